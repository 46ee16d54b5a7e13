//! Generalized rate equation and generalized master equation solvers.

mod volterra;

use std::io::Write;
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernels::{fmt_f64, tensor_label, FloquetKernelSet, KernelSeries, ProjectorKind};
use crate::propagator::{block_adjoint, commutator, Block, EtHamiltonian};
use volterra::volterra_heun;

/// Drift above which a GME trajectory is flagged in its metadata.
pub const INVARIANT_FLAG: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct PopulationTrajectory {
    pub grid: TimeGrid,
    pub p_d: Vec<f64>,
}

impl PopulationTrajectory {
    pub fn p_a(&self) -> Vec<f64> {
        self.p_d.iter().map(|p| 1.0 - p).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_rows(w, &["t", "P_D", "P_A"], self.grid.len, |k| {
            vec![self.grid.t(k), self.p_d[k], 1.0 - self.p_d[k]]
        })
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// `max_k |P_D − other.P_D|` over the common prefix.
    pub fn max_abs_diff(&self, other: &[f64]) -> f64 {
        self.p_d.iter().zip(other).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Largest violations of the density-matrix invariants along a trajectory.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct DensityDrift {
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    /// Set when either drift exceeds [`INVARIANT_FLAG`].
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityTrajectory {
    pub grid: TimeGrid,
    pub rho: Vec<Block>,
    pub drift: DensityDrift,
}

impl DensityTrajectory {
    fn new(grid: TimeGrid, rho: Vec<Block>) -> Self {
        let mut drift = DensityDrift::default();
        for r in &rho {
            drift.max_trace_error = drift.max_trace_error.max((r[0] + r[3] - 1.0).norm());
            let adj = block_adjoint(r);
            let h = r.iter().zip(&adj).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            drift.max_hermiticity_error = drift.max_hermiticity_error.max(h);
        }
        drift.flagged = drift.max_trace_error > INVARIANT_FLAG || drift.max_hermiticity_error > INVARIANT_FLAG;
        Self { grid, rho, drift }
    }

    pub fn p_d(&self) -> Vec<f64> {
        self.rho.iter().map(|r| r[0].re).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let header = [
            "t", "rho_DD_re", "rho_DD_im", "rho_DA_re", "rho_DA_im", "rho_AD_re", "rho_AD_im", "rho_AA_re", "rho_AA_im",
        ];
        write_rows(w, &header, self.grid.len, |k| {
            let mut row = vec![self.grid.t(k)];
            for z in &self.rho[k] {
                row.push(z.re);
                row.push(z.im);
            }
            row
        })
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

fn write_rows<W: Write>(w: W, header: &[&str], rows: usize, row: impl Fn(usize) -> Vec<f64>) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Parse(e.to_string());
    wr.write_record(header).map_err(err)?;
    for k in 0..rows {
        wr.write_record(row(k).into_iter().map(fmt_f64)).map_err(err)?;
    }
    wr.flush().map_err(|e| Error::Parse(e.to_string()))
}

/// Stride that maps `grid` steps onto kernel samples; the kernel grid must be
/// at least as fine, divide `grid.dt` evenly and cover `grid`'s span.
fn kernel_stride(kernel: &TimeGrid, grid: &TimeGrid) -> Result<usize> {
    let ratio = grid.dt / kernel.dt;
    let stride = ratio.round();
    if ratio < 1.0 - 1e-9 || (ratio - stride).abs() > 1e-9 * ratio {
        return Err(Error::Grid(format!(
            "kernel step {} does not evenly divide solver step {}; interpolation is not supported",
            kernel.dt, grid.dt
        )));
    }
    let stride = stride as usize;
    if (grid.len - 1) * stride > kernel.len - 1 {
        return Err(Error::Grid(format!(
            "kernel covers [0, {}] but the solver needs lags up to {}",
            kernel.t_end(),
            (grid.len - 1) as f64 * grid.dt
        )));
    }
    Ok(stride)
}

/// Last lag index at which any of `series` is nonzero.
fn support<'a>(series: impl IntoIterator<Item = &'a [C64]>) -> usize {
    series
        .into_iter()
        .filter_map(|s| s.iter().rposition(|z| *z != C64::new(0.0, 0.0)))
        .max()
        .unwrap_or(0)
}

fn real_samples(series: &[C64], stride: usize, len: usize) -> Vec<f64> {
    (0..len).map(|k| series[k * stride].re).collect()
}

/// Generalized rate equation `Ṗ_D = −∫k_DD(t−τ)P_D(τ)dτ + ∫k_AD(t−τ)P_A(τ)dτ`.
///
/// Only the real parts of the kernels enter; population kernels are real.
pub fn solve_population(kernel: &KernelSeries, p_d0: f64, grid: &TimeGrid) -> Result<PopulationTrajectory> {
    check_p0(p_d0)?;
    let stride = kernel_stride(&kernel.grid, grid)?;
    let k_dd = real_samples(kernel.require("k_DD")?, stride, grid.len);
    let k_ad = real_samples(kernel.require("k_AD")?, stride, grid.len);
    let sup = [&k_dd, &k_ad].iter().filter_map(|s| s.iter().rposition(|&x| x != 0.0)).max().unwrap_or(0);
    population_core(p_d0, grid, sup, |_, lag| (k_dd[lag], k_ad[lag]))
}

/// Rate equation with the two-time kernel `k(τ; t) = Σ_{|n|≤n_cut} k_n(τ) e^{inΩt}`.
pub fn solve_population_floquet(
    fset: &FloquetKernelSet,
    n_cut: usize,
    p_d0: f64,
    grid: &TimeGrid,
) -> Result<PopulationTrajectory> {
    check_p0(p_d0)?;
    let stride = kernel_stride(&fset.tau_grid, grid)?;
    let n_cut = n_cut.min(fset.n_max);
    let labels = fset.labels();
    let c_dd = labels.iter().position(|l| l == "k_DD");
    let c_ad = labels.iter().position(|l| l == "k_AD");
    let (Some(c_dd), Some(c_ad)) = (c_dd, c_ad) else {
        return Err(Error::InvalidInput("floquet kernel set lacks k_DD/k_AD".into()));
    };
    // harmonics on the solver grid, and drive phases at each solver time
    let h: Vec<[Vec<C64>; 2]> = fset.harmonics()[..=n_cut]
        .iter()
        .map(|s| {
            let pick = |c: usize| (0..grid.len).map(|k| s.component(c)[k * stride]).collect();
            [pick(c_dd), pick(c_ad)]
        })
        .collect();
    let phases: Vec<Vec<C64>> = (0..grid.len)
        .map(|k| {
            let t = grid.t(k);
            (0..=n_cut).map(|n| C64::from_polar(1.0, n as f64 * fset.omega * t)).collect()
        })
        .collect();
    let sup = support(h.iter().flatten().map(Vec::as_slice));
    population_core(p_d0, grid, sup, |n, lag| {
        let ph = &phases[n];
        let mut out = [h[0][0][lag].re, h[0][1][lag].re];
        for m in 1..=n_cut {
            for c in 0..2 {
                out[c] += 2.0 * (h[m][c][lag] * ph[m]).re;
            }
        }
        (out[0], out[1])
    })
}

fn check_p0(p_d0: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p_d0) {
        return Err(Error::InvalidInput(format!("initial donor population {p_d0} outside [0, 1]")));
    }
    Ok(())
}

/// `kern(n, lag)` returns `(k_DD, k_AD)` at lag `lag` for solver time index `n`.
fn population_core<K>(p_d0: f64, grid: &TimeGrid, support: usize, kern: K) -> Result<PopulationTrajectory>
where
    K: Fn(usize, usize) -> (f64, f64),
{
    let zero = C64::new(0.0, 0.0);
    let ys = volterra_heun(
        &[C64::new(p_d0, 0.0)],
        grid.t0,
        grid.dt,
        grid.len,
        support,
        |_, _, out| out[0] = zero,
        |n, lag, y, out| {
            let (kd, ka) = kern(n, lag);
            let p = y[0].re;
            out[0] += C64::new(-kd * p + ka * (1.0 - p), 0.0);
        },
    )?;
    Ok(PopulationTrajectory {
        grid: *grid,
        p_d: ys.iter().map(|y| y[0].re).collect(),
    })
}

/// Generalized master equation `ρ̇ = −i[H_S(t), ρ] + ∫₀ᵗ K(t−τ) ρ(τ) dτ` for the full
/// system-projector kernel tensor (labels `K_b_a`).
pub fn solve_gme(kernel: &KernelSeries, h: &EtHamiltonian, rho0: Block, grid: &TimeGrid) -> Result<DensityTrajectory> {
    let stride = kernel_stride(&kernel.grid, grid)?;
    let names = ProjectorKind::System.basis_labels();
    let mut k = vec![[[C64::new(0.0, 0.0); 4]; 4]; grid.len];
    for (bi, b) in names.iter().enumerate() {
        for (ai, a) in names.iter().enumerate() {
            let s = kernel.require(&tensor_label(b, a))?;
            for (lag, row) in k.iter_mut().enumerate() {
                row[bi][ai] = s[lag * stride];
            }
        }
    }
    let sup = k
        .iter()
        .rposition(|m| m.iter().flatten().any(|z| *z != C64::new(0.0, 0.0)))
        .unwrap_or(0);
    let mi = C64::new(0.0, -1.0);
    let ys = volterra_heun(
        &rho0,
        grid.t0,
        grid.dt,
        grid.len,
        sup,
        |t, y, out| {
            let c = commutator(&h.at(t), &[y[0], y[1], y[2], y[3]]);
            for i in 0..4 {
                out[i] = mi * c[i];
            }
        },
        |_, lag, y, out| {
            let m = &k[lag];
            for b in 0..4 {
                out[b] += m[b][0] * y[0] + m[b][1] * y[1] + m[b][2] * y[2] + m[b][3] * y[3];
            }
        },
    )?;
    let rho = ys.into_iter().map(|y| [y[0], y[1], y[2], y[3]]).collect();
    Ok(DensityTrajectory::new(*grid, rho))
}
