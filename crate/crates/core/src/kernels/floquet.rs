use std::f64::consts::TAU;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::extract::{kernel_tensor, label_columns};
use super::projector::ProjectorKind;
use super::series::KernelSeries;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::propagator::{EtHamiltonian, HierarchySpace};

/// Fourier components `k_n(τ)` of a periodically driven population kernel
/// `k(τ; t) = Σ_n k_n(τ) e^{inΩt}`.
#[derive(Clone, Debug)]
pub struct FloquetKernelSet {
    pub n_max: usize,
    pub omega: f64,
    pub tau_grid: TimeGrid,
    /// `harmonics[n]` holds `k_n` for `n = 0..=n_max`.
    harmonics: Vec<KernelSeries>,
    /// Two-time samples `k(τ; s_j + τ)`, one series per start phase `s_j = j·T₀/n_phase`.
    samples: Vec<KernelSeries>,
}

/// Step nearest to `dt` that divides the period into whole steps.
pub fn snap_dt(period: f64, dt: f64) -> f64 {
    let steps = (period / dt).round().max(1.0);
    period / steps
}

impl FloquetKernelSet {
    /// Builds from two-time samples at uniformly spaced start phases.
    pub fn from_samples(samples: Vec<KernelSeries>, omega: f64, n_max: usize) -> Result<Self> {
        let n_phase = samples.len();
        if n_phase < 2 * n_max + 1 {
            return Err(Error::Config(vec![format!(
                "floquet.n_phase = {n_phase} cannot resolve harmonics up to n_max = {n_max} (need at least {})",
                2 * n_max + 1
            )]));
        }
        let tau_grid = samples[0].grid;
        let mut set = Self {
            n_max,
            omega,
            tau_grid,
            harmonics: Vec::new(),
            samples,
        };
        set.harmonics = (0..=n_max as i64)
            .map(|n| set.harmonic(n))
            .collect::<Result<_>>()?;
        Ok(set)
    }

    /// Builds from precomputed `k_0..k_{n_max}` (e.g. a forecast); no phase samples are kept.
    pub fn from_harmonics(harmonics: Vec<KernelSeries>, omega: f64) -> Result<Self> {
        let Some(first) = harmonics.first() else {
            return Err(Error::InvalidInput("need at least k_0".into()));
        };
        let tau_grid = first.grid;
        if harmonics.iter().any(|h| h.grid != tau_grid || h.labels() != first.labels()) {
            return Err(Error::Dimension("harmonics differ in grid or labels".into()));
        }
        Ok(Self {
            n_max: harmonics.len() - 1,
            omega,
            tau_grid,
            harmonics,
            samples: Vec::new(),
        })
    }

    pub fn n_phase(&self) -> usize {
        self.samples.len()
    }

    pub fn period(&self) -> f64 {
        TAU / self.omega
    }

    pub fn phase_start(&self, j: usize) -> f64 {
        j as f64 * self.period() / self.n_phase() as f64
    }

    pub fn labels(&self) -> &[String] {
        self.harmonics[0].labels()
    }

    pub fn samples(&self) -> &[KernelSeries] {
        &self.samples
    }

    /// `k_n(τ) = (1/T₀)∫ k(τ; t) e^{−inΩt} dt`, evaluated directly from the
    /// phase samples by the periodic trapezoid rule. Any sign of `n` is allowed.
    pub fn harmonic(&self, n: i64) -> Result<KernelSeries> {
        let Some(first) = self.samples.first() else {
            return Err(Error::InvalidInput("set was built without phase samples".into()));
        };
        let np = self.n_phase() as f64;
        let mut data: Vec<Vec<C64>> =
            vec![vec![C64::new(0.0, 0.0); self.tau_grid.len]; first.labels().len()];
        for (j, s) in self.samples.iter().enumerate() {
            let start = self.phase_start(j);
            for (c, series) in data.iter_mut().enumerate() {
                let src = s.component(c);
                for (k, out) in series.iter_mut().enumerate() {
                    let t = start + self.tau_grid.t(k);
                    *out += src[k] * C64::from_polar(1.0 / np, -(n as f64) * self.omega * t);
                }
            }
        }
        KernelSeries::new(self.tau_grid, first.labels().to_vec(), data)
    }

    /// Stored component `k_n`; negative `n` uses `k_{−n} = k_n*`.
    pub fn component(&self, n: i64) -> Option<KernelSeries> {
        let m = n.unsigned_abs() as usize;
        let base = self.harmonics.get(m)?;
        if n >= 0 {
            return Some(base.clone());
        }
        let data = base
            .components()
            .map(|(_, s)| s.iter().map(|z| z.conj()).collect())
            .collect();
        KernelSeries::new(base.grid, base.labels().to_vec(), data).ok()
    }

    pub fn harmonics(&self) -> &[KernelSeries] {
        &self.harmonics
    }

    /// `Σ_{|n|≤n_cut} k_n(τ_k) e^{inΩt}` for component `c`; real by construction.
    pub fn eval(&self, c: usize, k: usize, t: f64, n_cut: usize) -> f64 {
        let mut acc = self.harmonics[0].component(c)[k].re;
        for n in 1..=n_cut.min(self.n_max) {
            let z =
                self.harmonics[n].component(c)[k] * C64::from_polar(1.0, n as f64 * self.omega * t);
            acc += 2.0 * z.re;
        }
        acc
    }

    /// Largest `max_τ |k_n|` over `n = 0..=n_max` for one component.
    pub fn max_abs_by_harmonic(&self, label: &str) -> Vec<f64> {
        self.harmonics
            .iter()
            .map(|h| h.max_abs(label).unwrap_or(0.0))
            .collect()
    }
}

/// Population kernels of a driven system, Fourier-resolved in the second time argument.
///
/// For each start phase `s_j = j·T₀/n_phase` the memory is propagated from absolute
/// time `s_j`, giving `k(τ; s_j + τ)` on `tau_grid`.
pub fn extract_floquet_kernels(
    space: &HierarchySpace,
    h: &EtHamiltonian,
    omega: f64,
    tau_grid: &TimeGrid,
    n_max: usize,
    n_phase: usize,
) -> Result<FloquetKernelSet> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "drive frequency {omega} must be positive"
        )));
    }
    if n_phase < 2 * n_max + 1 {
        return Err(Error::Config(vec![format!(
            "floquet.n_phase = {n_phase} cannot resolve harmonics up to n_max = {n_max} (need at least {})",
            2 * n_max + 1
        )]));
    }
    if tau_grid.t0 != 0.0 {
        return Err(Error::Grid(format!(
            "kernel grid must start at 0, not {}",
            tau_grid.t0
        )));
    }
    let period = TAU / omega;
    let kind = ProjectorKind::Population;
    let samples = (0..n_phase)
        .into_par_iter()
        .map(|j| {
            let start = j as f64 * period / n_phase as f64;
            let cols = kernel_tensor(space, h, kind, start, tau_grid.dt, tau_grid.len)?;
            label_columns(kind, &cols, *tau_grid)
        })
        .collect::<Result<Vec<_>>>()?;
    FloquetKernelSet::from_samples(samples, omega, n_max)
}
