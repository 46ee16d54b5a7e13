use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64 as C64;

use crate::dmd::DmdModel;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// Named complex time series sharing one uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSeries {
    pub grid: TimeGrid,
    labels: Vec<String>,
    data: Vec<Vec<C64>>,
}

/// Formats with 17 significant digits, which round-trips every f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

impl KernelSeries {
    pub fn new(grid: TimeGrid, labels: Vec<String>, data: Vec<Vec<C64>>) -> Result<Self> {
        if labels.len() != data.len() {
            return Err(Error::Dimension(format!(
                "{} labels for {} series",
                labels.len(),
                data.len()
            )));
        }
        if let Some(bad) = data.iter().position(|s| s.len() != grid.len) {
            return Err(Error::Dimension(format!(
                "series {} has {} samples, grid has {}",
                labels[bad],
                data[bad].len(),
                grid.len
            )));
        }
        Ok(Self { grid, labels, data })
    }

    /// Evaluates a DMD forecast on `grid`; the model's state components map to `labels` in order.
    pub fn from_dmd(model: &DmdModel, labels: Vec<String>, grid: TimeGrid) -> Result<Self> {
        if labels.len() != model.base_dim {
            return Err(Error::Dimension(format!(
                "{} labels for a {}-component model",
                labels.len(),
                model.base_dim
            )));
        }
        let mut data = vec![Vec::with_capacity(grid.len); labels.len()];
        for k in 0..grid.len {
            let x = model.predict(grid.t(k) - model.t0);
            for (d, v) in data.iter_mut().zip(x) {
                d.push(v);
            }
        }
        Self::new(grid, labels, data)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.grid.len
    }

    pub fn is_empty(&self) -> bool {
        self.grid.len == 0
    }

    pub fn get(&self, label: &str) -> Option<&[C64]> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.data[i].as_slice())
    }

    pub fn require(&self, label: &str) -> Result<&[C64]> {
        self.get(label)
            .ok_or_else(|| Error::InvalidInput(format!("kernel series has no component {label}")))
    }

    pub fn component(&self, i: usize) -> &[C64] {
        &self.data[i]
    }

    pub fn components(&self) -> impl Iterator<Item = (&str, &[C64])> {
        self.labels
            .iter()
            .map(String::as_str)
            .zip(self.data.iter().map(Vec::as_slice))
    }

    /// The first `len` samples.
    pub fn truncated(&self, len: usize) -> Self {
        let grid = self.grid.truncated(len);
        Self {
            grid,
            labels: self.labels.clone(),
            data: self.data.iter().map(|s| s[..grid.len].to_vec()).collect(),
        }
    }

    /// Extends (or cuts) to `len` samples, filling with zeros.
    pub fn zero_padded(&self, len: usize) -> Self {
        let data = self
            .data
            .iter()
            .map(|s| {
                let mut v = s.clone();
                v.resize(len, C64::new(0.0, 0.0));
                v
            })
            .collect();
        Self {
            grid: self.grid.with_len(len),
            labels: self.labels.clone(),
            data,
        }
    }

    /// Largest `|Im|` over all components.
    pub fn max_imag(&self) -> f64 {
        self.data
            .iter()
            .flatten()
            .map(|z| z.im.abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self, label: &str) -> Option<f64> {
        self.get(label)
            .map(|s| s.iter().map(|z| z.norm()).fold(0.0, f64::max))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        for l in &self.labels {
            header.push(format!("{l}_re"));
            header.push(format!("{l}_im"));
        }
        wr.write_record(&header).map_err(csv_err)?;
        for k in 0..self.grid.len {
            let mut row = vec![fmt_f64(self.grid.t(k))];
            for s in &self.data {
                row.push(fmt_f64(s[k].re));
                row.push(fmt_f64(s[k].im));
            }
            wr.write_record(&row).map_err(csv_err)?;
        }
        wr.flush().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers().map_err(csv_err)?.clone();
        if header.get(0) != Some("t") || header.len() % 2 != 1 {
            return Err(Error::Parse(
                "kernel CSV header must be t followed by re/im column pairs".into(),
            ));
        }
        let mut labels = Vec::new();
        for pair in 0..(header.len() - 1) / 2 {
            let re = &header[1 + 2 * pair];
            let im = &header[2 + 2 * pair];
            match (re.strip_suffix("_re"), im.strip_suffix("_im")) {
                (Some(a), Some(b)) if a == b => labels.push(a.to_string()),
                _ => return Err(Error::Parse(format!("unpaired columns {re}, {im}"))),
            }
        }
        let mut times = Vec::new();
        let mut data = vec![Vec::new(); labels.len()];
        for (line, rec) in rd.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let num = |i: usize| -> Result<f64> {
                rec[i]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: column {}: {e}", line + 2, i + 1)))
            };
            times.push(num(0)?);
            for (j, d) in data.iter_mut().enumerate() {
                d.push(C64::new(num(1 + 2 * j)?, num(2 + 2 * j)?));
            }
        }
        let grid = uniform_grid(&times)?;
        Self::new(grid, labels, data)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Recovers a uniform grid from sample times, rejecting non-uniform spacing.
pub fn uniform_grid(times: &[f64]) -> Result<TimeGrid> {
    match times {
        [] => Err(Error::Grid("no samples".into())),
        [t0] => TimeGrid::new(*t0, 1.0, 1),
        _ => {
            let n = times.len();
            let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
            let tol = 1e-9 * dt.abs().max(times[n - 1].abs());
            for (k, &t) in times.iter().enumerate() {
                if (t - (times[0] + k as f64 * dt)).abs() > tol {
                    return Err(Error::Grid(format!(
                        "sample {k} at t = {t} breaks the uniform spacing {dt}"
                    )));
                }
            }
            TimeGrid::new(times[0], dt, n)
        }
    }
}

/// `max |a − b| / max |a|`, the relative sup-norm deviation used for depth convergence.
pub fn relative_sup_deviation(a: &[C64], b: &[C64]) -> f64 {
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    diff / scale
}

/// `‖a − b‖₂ / ‖b‖₂` with `b` the reference.
pub fn relative_l2(a: &[C64], reference: &[C64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(reference)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum();
    let den: f64 = reference.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}
