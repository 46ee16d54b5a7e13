//! Truncated singular value decomposition by one-sided (Hestenes) Jacobi
//! rotations, plus the pseudoinverse and least-squares helpers built on it.

use log::warn;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::matrix::{dot_conj, CMatrix};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// Singular values below `PINV_FLOOR * max(sigma)` are never inverted.
pub const PINV_FLOOR: f64 = 1e3 * f64::EPSILON;

/// How many singular triplets to keep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RankPolicy {
    Fixed { rank: usize },
    Threshold { rel: f64 },
}

impl Default for RankPolicy {
    fn default() -> Self {
        RankPolicy::Threshold { rel: 1e-10 }
    }
}

impl RankPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RankPolicy::Fixed { rank } if rank == 0 => {
                Err(Error::InvalidRankPolicy("fixed rank must be >= 1".into()))
            }
            RankPolicy::Threshold { rel } if !(rel > 0.0 && rel < 1.0) => Err(
                Error::InvalidRankPolicy(format!("threshold {rel} must lie in (0, 1)")),
            ),
            _ => Ok(()),
        }
    }
}

/// `M ≈ U diag(sigma) V^H` with orthonormal columns in `U` and `V`.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: CMatrix,
    pub sigma: Vec<f64>,
    pub v: CMatrix,
    /// Largest singular value of the untruncated decomposition.
    pub sigma_max: f64,
    /// Singular values that were dropped by the policy.
    pub discarded: Vec<f64>,
}

impl Svd {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// `U diag(sigma) V^H`.
    pub fn reconstruct(&self) -> CMatrix {
        let us = self.u.scale_columns(
            &self
                .sigma
                .iter()
                .map(|&s| C64::new(s, 0.0))
                .collect::<Vec<_>>(),
        );
        us.matmul(&self.v.adjoint())
    }
}

/// Full thin SVD with singular values sorted non-increasing.
fn jacobi_svd(m: &CMatrix) -> (CMatrix, Vec<f64>, CMatrix) {
    if m.rows() < m.cols() {
        let (u, s, v) = jacobi_svd(&m.adjoint());
        return (v, s, u);
    }
    let n = m.cols();
    let mut a = m.clone();
    let mut v = CMatrix::identity(n);
    let tol = f64::EPSILON * (m.rows() as f64).sqrt().max(1.0);

    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let alpha = a.col(i).iter().map(|z| z.norm_sqr()).sum::<f64>();
                let beta = a.col(j).iter().map(|z| z.norm_sqr()).sum::<f64>();
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = dot_conj(a.col(i), a.col(j));
                let g = gamma.norm();
                if g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, i, j, c, s, phase);
                rotate(&mut v, i, j, c, s, phase);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(usize, f64)> = (0..n)
        .map(|j| (j, a.col(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()))
        .collect();
    order.sort_by(|x, y| y.1.total_cmp(&x.1));

    let mut u = CMatrix::zeros(m.rows(), n);
    let mut vs = CMatrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    for (dst, &(src, s)) in order.iter().enumerate() {
        sigma.push(s);
        if s > 0.0 {
            for (o, z) in u.col_mut(dst).iter_mut().zip(a.col(src)) {
                *o = z / s;
            }
        }
        vs.col_mut(dst).copy_from_slice(v.col(src));
    }
    (u, sigma, vs)
}

/// Applies the rotation that zeroes `<a_i, a_j>` where `phase = γ/|γ|`.
fn rotate(m: &mut CMatrix, i: usize, j: usize, c: f64, s: f64, phase: C64) {
    let ph = phase.conj();
    let (ci, cj) = m.col_pair_mut(i, j);
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let yt = *y * ph;
        let xi = *x;
        *x = xi * c - yt * s;
        *y = xi * s + yt * c;
    }
}

/// Rank-truncated SVD of `m` under `policy`.
pub fn truncated_svd(m: &CMatrix, policy: RankPolicy) -> Result<Svd> {
    policy.validate()?;
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::DegenerateSnapshots);
    }
    if !m.is_finite() {
        return Err(Error::InvalidInput(
            "non-finite entries in SVD input".into(),
        ));
    }
    let (u, sigma, v) = jacobi_svd(m);
    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    if sigma_max == 0.0 {
        return Err(Error::DegenerateSnapshots);
    }
    let numerical = sigma
        .iter()
        .take_while(|&&s| s > PINV_FLOOR * sigma_max)
        .count();
    let keep = match policy {
        RankPolicy::Fixed { rank } => rank.min(numerical),
        RankPolicy::Threshold { rel } => sigma.iter().take_while(|&&s| s > rel * sigma_max).count(),
    };
    if keep == 0 {
        return Err(Error::DegenerateSnapshots);
    }
    Ok(Svd {
        u: u.leading_columns(keep),
        discarded: sigma[keep..].to_vec(),
        sigma: sigma[..keep].to_vec(),
        v: v.leading_columns(keep),
        sigma_max,
    })
}

/// `V diag(1/sigma) U^H y` over the retained subspace.
pub fn pinv_apply(svd: &Svd, y: &[C64]) -> Vec<C64> {
    let floor = PINV_FLOOR * svd.sigma_max;
    let mut coeff = svd.u.adjoint_mul_vec(y);
    for (k, (c, &s)) in coeff.iter_mut().zip(&svd.sigma).enumerate() {
        if s <= floor {
            warn!("pinv: singular value {k} ({s:.3e}) below floor {floor:.3e}; excluded");
            *c = C64::new(0.0, 0.0);
        } else {
            *c /= s;
        }
    }
    svd.v.mul_vec(&coeff)
}

/// Minimum-norm least-squares solution of `a x ≈ y`.
pub fn lsq_solve(a: &CMatrix, y: &[C64]) -> Result<Vec<C64>> {
    if a.rows() != y.len() {
        return Err(Error::Dimension(format!(
            "lsq_solve: matrix has {} rows, rhs has {}",
            a.rows(),
            y.len()
        )));
    }
    let svd = truncated_svd(a, RankPolicy::Threshold { rel: PINV_FLOOR })?;
    Ok(pinv_apply(&svd, y))
}

/// Minimum-norm least-squares solution of `a X ≈ B` for every column of `B`.
pub fn lsq_solve_many(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.rows() != b.rows() {
        return Err(Error::Dimension("lsq_solve_many: row mismatch".into()));
    }
    let svd = truncated_svd(a, RankPolicy::Threshold { rel: PINV_FLOOR })?;
    let cols: Vec<Vec<C64>> = (0..b.cols()).map(|j| pinv_apply(&svd, b.col(j))).collect();
    Ok(CMatrix::from_columns(a.cols(), &cols))
}
