use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::hamiltonian::{block_adjoint, commutator, Block, EtHamiltonian, D};
use super::hierarchy::HierarchySpace;
use crate::bath::CouplingChannel;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::numerics::integrate_fixed;

const ZERO: C64 = C64::new(0.0, 0.0);
const MINUS_I: C64 = C64::new(0.0, -1.0);

/// Hierarchies at least this large are evaluated in parallel chunks.
const PARALLEL_MIN_ADOS: usize = 4096;
const CHUNK_ADOS: usize = 512;

/// Flattened hierarchy state: ADO `i` occupies entries `4i..4i+4` (row-major 2×2).
#[derive(Clone, Debug, PartialEq)]
pub struct AdoState {
    pub values: Vec<C64>,
    pub t: f64,
}

impl AdoState {
    pub fn zeros(space: &HierarchySpace, t: f64) -> Self {
        Self {
            values: vec![ZERO; space.state_len()],
            t,
        }
    }

    pub fn block(&self, i: usize) -> Block {
        let b = &self.values[4 * i..4 * i + 4];
        [b[0], b[1], b[2], b[3]]
    }

    /// The reduced density matrix (tier-0 block).
    pub fn rho(&self) -> Block {
        self.block(0)
    }

    pub fn trace(&self) -> C64 {
        self.values[0] + self.values[3]
    }

    pub fn donor_population(&self) -> f64 {
        self.values[0].re
    }

    /// Max-norm distance of the tier-0 block from its adjoint.
    pub fn hermiticity_defect(&self) -> f64 {
        let r = self.rho();
        let adj = block_adjoint(&r);
        r.iter()
            .zip(&adj)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest entry magnitude among tier > 0 ADOs.
    pub fn max_auxiliary(&self) -> f64 {
        self.values[4..]
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// Tier-0 block `|D⟩⟨D|`, every auxiliary ADO zero.
pub fn thermal_donor_initial(space: &HierarchySpace) -> AdoState {
    let mut s = AdoState::zeros(space, 0.0);
    s.values[2 * D + D] = C64::new(1.0, 0.0);
    s
}

#[inline]
fn left_mul(ch: CouplingChannel, x: &Block) -> Block {
    match ch {
        // |A⟩⟨A| x
        CouplingChannel::DonorGap => [ZERO, ZERO, x[2], x[3]],
        // σ_x x
        CouplingChannel::Bridge => [x[2], x[3], x[0], x[1]],
    }
}

#[inline]
fn right_mul(ch: CouplingChannel, x: &Block) -> Block {
    match ch {
        CouplingChannel::DonorGap => [ZERO, x[1], ZERO, x[3]],
        CouplingChannel::Bridge => [x[1], x[0], x[3], x[2]],
    }
}

#[inline]
fn load(state: &[C64], i: usize) -> Block {
    [
        state[4 * i],
        state[4 * i + 1],
        state[4 * i + 2],
        state[4 * i + 3],
    ]
}

#[inline]
fn axpy(acc: &mut Block, a: C64, x: &Block) {
    for k in 0..4 {
        acc[k] += a * x[k];
    }
}

/// Time derivative of ADO `i`.
#[inline]
fn ado_derivative(space: &HierarchySpace, h: &Block, state: &[C64], i: usize) -> Block {
    let rho = load(state, i);
    let c = commutator(h, &rho);
    let damp = space.damping(i);
    let mut d = [
        MINUS_I * c[0] - damp * rho[0],
        MINUS_I * c[1] - damp * rho[1],
        MINUS_I * c[2] - damp * rho[2],
        MINUS_I * c[3] - damp * rho[3],
    ];
    let terms = space.terms();
    for (b, range) in space.bath_terms().iter().enumerate() {
        let ch = space.coupling(b);
        let mut upper = [ZERO; 4];
        let mut left = [ZERO; 4];
        let mut right = [ZERO; 4];
        let mut any_up = false;
        let mut any_down = false;
        for t in range.clone() {
            if let Some(j) = space.up(i, t) {
                let r = load(state, j);
                for k in 0..4 {
                    upper[k] += r[k];
                }
                any_up = true;
            }
            if let Some(j) = space.down(i, t) {
                let n = space.occupation(i, t) as f64;
                let r = load(state, j);
                axpy(&mut left, terms[t].eta * n, &r);
                axpy(&mut right, terms[t].eta_bar * n, &r);
                any_down = true;
            }
        }
        if any_up {
            let ql = left_mul(ch, &upper);
            let qr = right_mul(ch, &upper);
            for k in 0..4 {
                d[k] += MINUS_I * (ql[k] - qr[k]);
            }
        }
        if any_down {
            let ql = left_mul(ch, &left);
            let qr = right_mul(ch, &right);
            for k in 0..4 {
                d[k] += MINUS_I * (ql[k] - qr[k]);
            }
        }
    }
    d
}

/// Writes `dρ/dt` of the whole hierarchy at time `t` into `out`.
pub fn rhs_into(space: &HierarchySpace, h: &EtHamiltonian, t: f64, state: &[C64], out: &mut [C64]) {
    debug_assert_eq!(state.len(), space.state_len());
    debug_assert_eq!(out.len(), space.state_len());
    let hb = h.at(t);
    let n = space.len();
    if n >= PARALLEL_MIN_ADOS && rayon::current_num_threads() > 1 {
        out.par_chunks_mut(4 * CHUNK_ADOS)
            .enumerate()
            .for_each(|(c, chunk)| {
                let base = c * CHUNK_ADOS;
                for (off, dst) in chunk.chunks_exact_mut(4).enumerate() {
                    dst.copy_from_slice(&ado_derivative(space, &hb, state, base + off));
                }
            });
    } else {
        for (i, dst) in out.chunks_exact_mut(4).enumerate() {
            dst.copy_from_slice(&ado_derivative(space, &hb, state, i));
        }
    }
}

/// Tier-0 block of `dρ/dt`; cheaper than a full [`rhs_into`] when only the
/// reduced derivative is needed.
pub fn tier0_derivative(space: &HierarchySpace, h: &EtHamiltonian, t: f64, state: &[C64]) -> Block {
    ado_derivative(space, &h.at(t), state, 0)
}

/// `dρ/dt` for a state; allocating form of [`rhs_into`].
pub fn rhs(
    space: &HierarchySpace,
    h: &EtHamiltonian,
    state: &AdoState,
    t: f64,
) -> Result<Vec<C64>> {
    if state.values.len() != space.state_len() {
        return Err(Error::Dimension(format!(
            "state has {} entries, hierarchy expects {}",
            state.values.len(),
            space.state_len()
        )));
    }
    let mut out = vec![ZERO; space.state_len()];
    rhs_into(space, h, t, &state.values, &mut out);
    Ok(out)
}

/// Radius RK4 may safely take per step on the negative real and imaginary axes.
const RK4_STABLE_RADIUS: f64 = 2.5;

/// Gershgorin-type bound on the spectral radius of the hierarchy generator.
pub fn generator_bound(space: &HierarchySpace, h: &EtHamiltonian) -> f64 {
    let hnorm = h.norm_bound();
    let terms = space.terms();
    (0..space.len())
        .map(|i| {
            let mut g = space.damping(i).norm() + 2.0 * hnorm;
            for (t, term) in terms.iter().enumerate() {
                if space.up(i, t).is_some() {
                    g += 2.0;
                }
                g += space.occupation(i, t) as f64 * (term.eta.norm() + term.eta_bar.norm());
            }
            g
        })
        .fold(0.0, f64::max)
}

/// Number of RK4 substeps per grid step `dt` that keeps every generator
/// eigenvalue inside the stability region.
pub fn stable_substeps(space: &HierarchySpace, h: &EtHamiltonian, dt: f64) -> usize {
    ((generator_bound(space, h) * dt / RK4_STABLE_RADIUS).ceil() as usize).max(1)
}

/// RK4 propagation over `grid`, calling `observe` on each grid state
/// (including the initial one). Returns the final state.
pub fn propagate_observe<O>(
    space: &HierarchySpace,
    h: &EtHamiltonian,
    state0: &AdoState,
    grid: &TimeGrid,
    mut observe: O,
) -> Result<AdoState>
where
    O: FnMut(usize, &AdoState) -> Result<()>,
{
    if state0.values.len() != space.state_len() {
        return Err(Error::Dimension(
            "initial state does not match hierarchy".into(),
        ));
    }
    let mut y = state0.values.clone();
    let mut f = |t: f64, y: &[C64], dy: &mut [C64]| rhs_into(space, h, t, y, dy);
    let substeps = stable_substeps(space, h, grid.dt);
    let mut snapshot = AdoState {
        values: Vec::new(),
        t: grid.t0,
    };
    integrate_fixed(
        &mut f,
        grid.t0,
        grid.dt,
        grid.len - 1,
        substeps,
        &mut y,
        |k, y| {
            snapshot.values.clear();
            snapshot.values.extend_from_slice(y);
            snapshot.t = grid.t(k);
            observe(k, &snapshot)
        },
    )?;
    Ok(AdoState {
        values: y,
        t: grid.t_end(),
    })
}

/// RK4 trajectory on `grid`; keeps every state in memory.
pub fn propagate(
    space: &HierarchySpace,
    h: &EtHamiltonian,
    state0: &AdoState,
    grid: &TimeGrid,
) -> Result<Vec<AdoState>> {
    let mut out = Vec::with_capacity(grid.len);
    propagate_observe(space, h, state0, grid, |_, s| {
        out.push(s.clone());
        Ok(())
    })?;
    Ok(out)
}

/// Reduced dynamics only: the tier-0 block at every grid point.
pub fn propagate_reduced(
    space: &HierarchySpace,
    h: &EtHamiltonian,
    state0: &AdoState,
    grid: &TimeGrid,
) -> Result<Vec<Block>> {
    let mut out = Vec::with_capacity(grid.len);
    propagate_observe(space, h, state0, grid, |_, s| {
        out.push(s.rho());
        Ok(())
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{correlation_expansion, BathExpansion, ExpTerm, SpectralDensity};
    use crate::numerics::{eig_dense, lsq_solve, CMatrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn drude(lambda: f64, n_mats: usize, ch: CouplingChannel) -> BathExpansion {
        correlation_expansion(
            SpectralDensity::Drude { lambda, gamma: 1.0 },
            1.0,
            n_mats,
            ch,
        )
        .unwrap()
    }

    fn silent_bath() -> BathExpansion {
        let mut b = drude(1.0, 0, CouplingChannel::DonorGap);
        b.terms = vec![ExpTerm {
            eta: c(0., 0.),
            eta_bar: c(0., 0.),
            gamma: c(1., 0.),
        }];
        b
    }

    #[test]
    fn uncoupled_rabi_oscillation() {
        let space = HierarchySpace::build(vec![silent_bath()], 3).unwrap();
        let h = EtHamiltonian::explicit(super::super::hamiltonian::pauli_x()).unwrap();
        let grid = TimeGrid::new(0.0, 0.01, 301).unwrap();
        let traj = propagate(&space, &h, &thermal_donor_initial(&space), &grid).unwrap();
        for s in &traj {
            assert!(
                (s.donor_population() - s.t.cos().powi(2)).abs() < 1e-8,
                "t={}",
                s.t
            );
            assert_eq!(s.max_auxiliary(), 0.0);
        }
    }

    #[test]
    fn derivative_is_traceless() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let space = HierarchySpace::build(
            vec![
                drude(0.5, 2, CouplingChannel::DonorGap),
                drude(0.3, 1, CouplingChannel::Bridge),
            ],
            3,
        )
        .unwrap();
        let mut s = AdoState::zeros(&space, 0.0);
        for v in s.values.iter_mut() {
            *v = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        let d = rhs(&space, &EtHamiltonian::sigma_x_plus_z(), &s, 0.0).unwrap();
        assert!((d[0] + d[3]).norm() < 1e-13);
    }

    #[test]
    fn reduced_state_stays_hermitian_with_unit_trace() {
        let space = HierarchySpace::build(
            vec![
                drude(1.0, 2, CouplingChannel::DonorGap),
                drude(0.2, 1, CouplingChannel::Bridge),
            ],
            4,
        )
        .unwrap();
        let grid = TimeGrid::new(0.0, 0.01, 201).unwrap();
        let traj = propagate(
            &space,
            &EtHamiltonian::sigma_x_plus_z(),
            &thermal_donor_initial(&space),
            &grid,
        )
        .unwrap();
        for s in &traj {
            assert!(s.hermiticity_defect() < 1e-10);
            assert!((s.trace() - c(1., 0.)).norm() < 1e-8);
        }
    }

    fn kron(a: &Block, b: &Block) -> CMatrix {
        CMatrix::from_fn(4, 4, |r, col| {
            a[2 * (r / 2) + col / 2] * b[2 * (r % 2) + col % 2]
        })
    }

    fn transpose(a: &Block) -> Block {
        [a[0], a[2], a[1], a[3]]
    }

    #[test]
    fn single_term_generator_matches_dense_exponential() {
        let bath = drude(0.7, 0, CouplingChannel::Bridge);
        let term = bath.terms[0];
        let space = HierarchySpace::build(vec![bath.clone()], 1).unwrap();
        let hs = EtHamiltonian::sigma_x_plus_z();
        let hb = hs.at(0.0);
        let q = CouplingChannel::Bridge.operator();
        let id = [c(1., 0.), c(0., 0.), c(0., 0.), c(1., 0.)];
        let mi = c(0., -1.);
        let liou = kron(&hb, &id).sub(&kron(&id, &transpose(&hb))).scale(mi);
        let up = kron(&q, &id).sub(&kron(&id, &transpose(&q))).scale(mi);
        let down = kron(&q, &id)
            .scale(term.eta)
            .sub(&kron(&id, &transpose(&q)).scale(term.eta_bar))
            .scale(mi);
        let g = CMatrix::from_fn(8, 8, |r, col| match (r / 4, col / 4) {
            (0, 0) => liou[(r, col)],
            (0, 1) => up[(r, col - 4)],
            (1, 0) => down[(r - 4, col)],
            _ => liou[(r - 4, col - 4)] - if r == col { term.gamma } else { c(0., 0.) },
        });
        let (lam, vecs) = eig_dense(&g).unwrap();
        let s0 = thermal_donor_initial(&space);
        let coef = lsq_solve(&vecs, &s0.values).unwrap();
        let grid = TimeGrid::new(0.0, 0.001, 1001).unwrap();
        let traj = propagate(&space, &hs, &s0, &grid).unwrap();
        for s in traj.iter().step_by(50) {
            let w: Vec<C64> = coef
                .iter()
                .zip(&lam)
                .map(|(a, l)| a * (l * s.t).exp())
                .collect();
            let exact = vecs.mul_vec(&w);
            let err = exact
                .iter()
                .zip(&s.values)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-6, "t={} err={err}", s.t);
        }
    }

    #[test]
    fn pure_dephasing_matches_cumulant() {
        // [H, Q] = 0: the D/A coherence decays as exp(-∫∫ C*), exactly.
        let bath = drude(0.1, 3, CouplingChannel::DonorGap);
        let space = HierarchySpace::build(vec![bath.clone()], 8).unwrap();
        let gap = 1.0;
        let h = EtHamiltonian::explicit([c(0., 0.), c(0., 0.), c(0., 0.), c(gap, 0.)]).unwrap();
        let mut s0 = AdoState::zeros(&space, 0.0);
        s0.values[..4].copy_from_slice(&[c(0.5, 0.), c(0.5, 0.), c(0.5, 0.), c(0.5, 0.)]);
        let grid = TimeGrid::new(0.0, 0.005, 601).unwrap();
        let traj = propagate_reduced(&space, &h, &s0, &grid).unwrap();
        for (k, rho) in traj.iter().enumerate().step_by(20) {
            let t = grid.t(k);
            let g: C64 = bath
                .terms
                .iter()
                .map(|term| {
                    let (e, y) = (term.eta.conj(), term.gamma.conj());
                    e / y * (t - (1.0 - (-y * t).exp()) / y)
                })
                .sum();
            let exact = 0.5 * (c(0., gap * t) - g).exp();
            assert!(
                (rho[1] - exact).norm() < 1e-6,
                "t={t} {} vs {exact}",
                rho[1]
            );
            assert!((rho[0].re - 0.5).abs() < 1e-12);
        }
    }
}
