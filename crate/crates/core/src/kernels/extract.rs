use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::projector::ProjectorKind;
use super::series::KernelSeries;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::numerics::integrate_fixed;
use crate::propagator::{
    rhs_into, stable_substeps, tier0_derivative, EtHamiltonian, HierarchySpace,
};

const MINUS_I: C64 = C64::new(0.0, -1.0);

/// `K̃[b ← a](τ)` for every P-basis element `b`, starting the memory at absolute time `start`.
///
/// Returns one row per `τ_k = k·dt`, `k = 0..len`.
pub(crate) fn kernel_column(
    space: &HierarchySpace,
    h: &EtHamiltonian,
    kind: ProjectorKind,
    a: usize,
    start: f64,
    dt: f64,
    len: usize,
) -> Result<Vec<Vec<C64>>> {
    let p = kind.p_indices();
    let n = space.state_len();
    let mut e = vec![C64::new(0.0, 0.0); n];
    e[p[a]] = C64::new(1.0, 0.0);
    // rhs = −i𝓛ρ, so 𝓠𝓛e = i·𝓠(rhs e)
    let mut w = vec![C64::new(0.0, 0.0); n];
    rhs_into(space, h, start, &e, &mut w);
    drop(e);
    for v in w.iter_mut() {
        *v *= C64::i();
    }
    kind.keep_q_in_place(&mut w);

    let mut f = |t: f64, y: &[C64], dy: &mut [C64]| {
        rhs_into(space, h, t, y, dy);
        kind.keep_q_in_place(dy);
    };
    let mut rows = Vec::with_capacity(len);
    integrate_fixed(
        &mut f,
        start,
        dt,
        len - 1,
        stable_substeps(space, h, dt),
        &mut w,
        |k, y| {
            let d = tier0_derivative(space, h, start + k as f64 * dt, y);
            rows.push(p.iter().map(|&b| MINUS_I * d[b]).collect());
            Ok(())
        },
    )?;
    Ok(rows)
}

/// All columns `K̃[·][a]` for one memory start time, basis columns in parallel.
pub(crate) fn kernel_tensor(
    space: &HierarchySpace,
    h: &EtHamiltonian,
    kind: ProjectorKind,
    start: f64,
    dt: f64,
    len: usize,
) -> Result<Vec<Vec<Vec<C64>>>> {
    let labels = kind.basis_labels();
    (0..labels.len())
        .into_par_iter()
        .map(|a| {
            kernel_column(space, h, kind, a, start, dt, len).map_err(|e| Error::Kernel {
                label: labels[a].to_string(),
                source: Box::new(e),
            })
        })
        .collect()
}

/// Names a tensor entry `K̃[b ← a]` of the system-projector kernel.
pub fn tensor_label(b: &str, a: &str) -> String {
    format!("K_{b}_{a}")
}

/// Packs the raw `K̃[b ← a]` columns into named series.
///
/// Population kernels are `k_DD = −K̃[DD ← DD]` and `k_AD = K̃[DD ← AA]`, so that
/// `Ṗ_D = −∫k_DD P_D + ∫k_AD P_A`. The system projector keeps all entries `K_b_a`.
pub(crate) fn label_columns(
    kind: ProjectorKind,
    cols: &[Vec<Vec<C64>>],
    grid: TimeGrid,
) -> Result<KernelSeries> {
    match kind {
        ProjectorKind::Population => {
            let k_dd = cols[0].iter().map(|r| -r[0]).collect();
            let k_ad = cols[1].iter().map(|r| r[0]).collect();
            KernelSeries::new(grid, vec!["k_DD".into(), "k_AD".into()], vec![k_dd, k_ad])
        }
        ProjectorKind::System => {
            let names = kind.basis_labels();
            let mut labels = Vec::new();
            let mut data = Vec::new();
            for (bi, b) in names.iter().enumerate() {
                for (ai, a) in names.iter().enumerate() {
                    labels.push(tensor_label(b, a));
                    data.push(cols[ai].iter().map(|r| r[bi]).collect());
                }
            }
            KernelSeries::new(grid, labels, data)
        }
    }
}

/// Memory kernel of a time-independent Hamiltonian on `grid` (which must start at 0).
pub fn extract_kernel(
    space: &HierarchySpace,
    h: &EtHamiltonian,
    kind: ProjectorKind,
    grid: &TimeGrid,
) -> Result<KernelSeries> {
    if h.is_driven() {
        return Err(Error::InvalidInput(
            "extract_kernel needs a time-independent Hamiltonian; use extract_floquet_kernels"
                .into(),
        ));
    }
    if grid.t0 != 0.0 {
        return Err(Error::Grid(format!(
            "kernel grid must start at 0, not {}",
            grid.t0
        )));
    }
    let cols = kernel_tensor(space, h, kind, 0.0, grid.dt, grid.len)?;
    label_columns(kind, &cols, *grid)
}
