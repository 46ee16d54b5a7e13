//! Column-wise comparison of two CSV time series.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernels::{dc_component, uniform_grid};

/// A CSV table: first column time, remaining columns numeric. `X_re`/`X_im`
/// pairs are merged into one complex column `X`.
#[derive(Clone, Debug)]
pub struct Table {
    pub grid: TimeGrid,
    pub columns: Vec<(String, Vec<C64>)>,
}

impl Table {
    pub fn read<R: Read>(r: R) -> Result<Self> {
        let err = |e: csv::Error| Error::Parse(e.to_string());
        let mut rd = csv::Reader::from_reader(r);
        let header: Vec<String> = rd.headers().map_err(err)?.iter().map(str::to_string).collect();
        if header.len() < 2 {
            return Err(Error::Parse("need a time column and at least one data column".into()));
        }
        let mut raw: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
        for (line, rec) in rd.records().enumerate() {
            let rec = rec.map_err(err)?;
            if rec.len() != header.len() {
                return Err(Error::Parse(format!("row {}: {} fields, header has {}", line + 2, rec.len(), header.len())));
            }
            for (i, field) in rec.iter().enumerate() {
                let v = field
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: column {}: {e}", line + 2, header[i])))?;
                raw[i].push(v);
            }
        }
        let grid = uniform_grid(&raw[0])?;
        let mut columns = Vec::new();
        let mut i = 1;
        while i < header.len() {
            let paired = header[i]
                .strip_suffix("_re")
                .filter(|base| header.get(i + 1).and_then(|h| h.strip_suffix("_im")) == Some(base));
            match paired {
                Some(base) => {
                    let z = raw[i].iter().zip(&raw[i + 1]).map(|(&re, &im)| C64::new(re, im)).collect();
                    columns.push((base.to_string(), z));
                    i += 2;
                }
                None => {
                    columns.push((header[i].clone(), raw[i].iter().map(|&x| C64::new(x, 0.0)).collect()));
                    i += 1;
                }
            }
        }
        Ok(Self { grid, columns })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::read(std::io::BufReader::new(f))
    }

    fn column(&self, name: &str) -> Option<&[C64]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }
}

/// Error measures of a curve against a reference on a shared grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurveMetrics {
    /// `‖x − ref‖₂ / ‖ref‖₂`; absent when the reference is identically zero.
    pub rel_l2: Option<f64>,
    pub max_abs: f64,
    /// `|dt Σ x − dt Σ ref|`.
    pub dc_diff: f64,
}

impl CurveMetrics {
    pub fn between(x: &[C64], reference: &[C64], dt: f64) -> Self {
        let n = x.len().min(reference.len());
        let (x, r) = (&x[..n], &reference[..n]);
        let mut num = 0.0;
        let mut den = 0.0;
        let mut max_abs: f64 = 0.0;
        for (a, b) in x.iter().zip(r) {
            let d = (a - b).norm();
            num += d * d;
            den += b.norm_sqr();
            max_abs = max_abs.max(d);
        }
        let rel_l2 = if den > 0.0 {
            Some((num / den).sqrt())
        } else if num == 0.0 {
            Some(0.0)
        } else {
            None
        };
        Self {
            rel_l2,
            max_abs,
            dc_diff: (dc_component(x, dt) - dc_component(r, dt)).norm(),
        }
    }

    pub fn real(x: &[f64], reference: &[f64], dt: f64) -> Self {
        let c = |v: &[f64]| v.iter().map(|&a| C64::new(a, 0.0)).collect::<Vec<_>>();
        Self::between(&c(x), &c(reference), dt)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SharedGrid {
    pub t0: f64,
    pub dt: f64,
    pub points: usize,
    pub stride_a: usize,
    pub stride_b: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub grid: SharedGrid,
    /// Metrics of `b` against `a` as reference, per shared column.
    pub columns: BTreeMap<String, CurveMetrics>,
    pub only_in_a: Vec<String>,
    pub only_in_b: Vec<String>,
}

fn integer_ratio(coarse: f64, fine: f64) -> Option<usize> {
    let r = coarse / fine;
    let k = r.round();
    (k >= 1.0 && (r - k).abs() <= 1e-9 * r).then_some(k as usize)
}

/// Common grid of two tables: equal grids, or one a strided subset of the other.
fn shared_grid(a: &TimeGrid, b: &TimeGrid) -> Result<SharedGrid> {
    let tol = 1e-9 * a.dt.max(b.dt);
    if (a.t0 - b.t0).abs() > tol {
        return Err(Error::Grid(format!("grids start at different times ({} vs {})", a.t0, b.t0)));
    }
    let (sa, sb, dt) = if let Some(k) = integer_ratio(b.dt, a.dt) {
        (k, 1, b.dt)
    } else if let Some(k) = integer_ratio(a.dt, b.dt) {
        (1, k, a.dt)
    } else {
        return Err(Error::Grid(format!(
            "steps {} and {} have no common refinement by an integer stride",
            a.dt, b.dt
        )));
    };
    let points = ((a.len - 1) / sa).min((b.len - 1) / sb) + 1;
    Ok(SharedGrid {
        t0: a.t0,
        dt,
        points,
        stride_a: sa,
        stride_b: sb,
    })
}

pub fn compare_tables(a: &Table, b: &Table) -> Result<(SharedGrid, BTreeMap<String, CurveMetrics>, Vec<String>, Vec<String>)> {
    let g = shared_grid(&a.grid, &b.grid)?;
    let pick = |v: &[C64], s: usize| (0..g.points).map(|k| v[k * s]).collect::<Vec<_>>();
    let mut columns = BTreeMap::new();
    let mut only_a = Vec::new();
    for (name, va) in &a.columns {
        match b.column(name) {
            Some(vb) => {
                let m = CurveMetrics::between(&pick(vb, g.stride_b), &pick(va, g.stride_a), g.dt);
                columns.insert(name.clone(), m);
            }
            None => only_a.push(name.clone()),
        }
    }
    let only_b = b
        .columns
        .iter()
        .filter(|(n, _)| a.column(n).is_none())
        .map(|(n, _)| n.clone())
        .collect();
    if columns.is_empty() {
        return Err(Error::InvalidInput("the two files share no data column".into()));
    }
    Ok((g, columns, only_a, only_b))
}

/// Compares the CSV series at `a` (reference) and `b`.
pub fn compare_files(a: impl AsRef<Path>, b: impl AsRef<Path>) -> Result<Comparison> {
    let ta = Table::load(a.as_ref())?;
    let tb = Table::load(b.as_ref())?;
    let (grid, columns, only_in_a, only_in_b) = compare_tables(&ta, &tb)?;
    Ok(Comparison {
        a: a.as_ref().display().to_string(),
        b: b.as_ref().display().to_string(),
        grid,
        columns,
        only_in_a,
        only_in_b,
    })
}
