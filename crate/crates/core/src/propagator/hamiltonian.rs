use std::f64::consts::TAU;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major 2×2 block `[DD, DA, AD, AA]` in the donor/acceptor basis.
pub type Block = [C64; 4];

pub const D: usize = 0;
pub const A: usize = 1;

#[inline]
pub fn idx(a: usize, b: usize) -> usize {
    2 * a + b
}

#[inline]
pub fn block_mul(x: &Block, y: &Block) -> Block {
    [
        x[0] * y[0] + x[1] * y[2],
        x[0] * y[1] + x[1] * y[3],
        x[2] * y[0] + x[3] * y[2],
        x[2] * y[1] + x[3] * y[3],
    ]
}

#[inline]
pub fn commutator(x: &Block, y: &Block) -> Block {
    let xy = block_mul(x, y);
    let yx = block_mul(y, x);
    [xy[0] - yx[0], xy[1] - yx[1], xy[2] - yx[2], xy[3] - yx[3]]
}

#[inline]
pub fn block_adjoint(x: &Block) -> Block {
    [x[0].conj(), x[2].conj(), x[1].conj(), x[3].conj()]
}

pub fn pauli_x() -> Block {
    let o = C64::new(1.0, 0.0);
    let z = C64::new(0.0, 0.0);
    [z, o, o, z]
}

pub fn pauli_z() -> Block {
    let o = C64::new(1.0, 0.0);
    let z = C64::new(0.0, 0.0);
    [o, z, z, -o]
}

/// System Hamiltonian of the donor/acceptor pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EtHamiltonian {
    /// A fixed hermitian 2×2 matrix.
    Explicit { h: Block },
    /// `(E° + ε cos Ωt + λ)|A⟩⟨A| + ⟨V⟩_B (|D⟩⟨A| + |A⟩⟨D|)`.
    EtParams {
        e0: f64,
        lambda: f64,
        vbar: f64,
        eps: f64,
        omega: f64,
    },
}

impl EtHamiltonian {
    pub fn explicit(h: Block) -> Result<Self> {
        let hv = EtHamiltonian::Explicit { h };
        hv.validate()?;
        Ok(hv)
    }

    /// `σ_x + σ_z`.
    pub fn sigma_x_plus_z() -> Self {
        let (x, z) = (pauli_x(), pauli_z());
        EtHamiltonian::Explicit {
            h: [x[0] + z[0], x[1] + z[1], x[2] + z[2], x[3] + z[3]],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            EtHamiltonian::Explicit { h } => {
                let adj = block_adjoint(h);
                let defect = h
                    .iter()
                    .zip(&adj)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
                if defect > 1e-12 {
                    return Err(Error::InvalidInput(format!(
                        "explicit Hamiltonian is not hermitian (defect {defect:.3e})"
                    )));
                }
                if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::InvalidInput("non-finite Hamiltonian entry".into()));
                }
            }
            EtHamiltonian::EtParams {
                e0,
                lambda,
                vbar,
                eps,
                omega,
            } => {
                if [e0, lambda, vbar, eps, omega]
                    .iter()
                    .any(|v| !v.is_finite())
                {
                    return Err(Error::InvalidInput(
                        "non-finite Hamiltonian parameter".into(),
                    ));
                }
                if *eps != 0.0 && !(*omega > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "drive frequency must be positive when eps != 0 (got {omega})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn is_driven(&self) -> bool {
        matches!(self, EtHamiltonian::EtParams { eps, .. } if *eps != 0.0)
    }

    /// Drive frequency Ω, if driven.
    pub fn drive_frequency(&self) -> Option<f64> {
        match self {
            EtHamiltonian::EtParams { eps, omega, .. } if *eps != 0.0 => Some(*omega),
            _ => None,
        }
    }

    /// Drive period `T₀ = 2π/Ω`, if driven.
    pub fn period(&self) -> Option<f64> {
        self.drive_frequency().map(|w| TAU / w)
    }

    /// `H_S(t)`.
    #[inline]
    pub fn at(&self, t: f64) -> Block {
        match *self {
            EtHamiltonian::Explicit { h } => h,
            EtHamiltonian::EtParams {
                e0,
                lambda,
                vbar,
                eps,
                omega,
            } => {
                let z = C64::new(0.0, 0.0);
                let v = C64::new(vbar, 0.0);
                let gap = e0
                    + lambda
                    + if eps != 0.0 {
                        eps * (omega * t).cos()
                    } else {
                        0.0
                    };
                [z, v, v, C64::new(gap, 0.0)]
            }
        }
    }

    /// Upper bound on the spectral norm of `H_S(t)` over all `t`.
    pub fn norm_bound(&self) -> f64 {
        match *self {
            EtHamiltonian::Explicit { h } => h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(),
            EtHamiltonian::EtParams {
                e0,
                lambda,
                vbar,
                eps,
                ..
            } => {
                let gap = (e0 + lambda).abs() + eps.abs();
                (gap * gap + 2.0 * vbar * vbar).sqrt()
            }
        }
    }

    /// The same Hamiltonian with the drive switched off.
    pub fn undriven(&self) -> Self {
        match *self {
            EtHamiltonian::EtParams {
                e0,
                lambda,
                vbar,
                omega,
                ..
            } => EtHamiltonian::EtParams {
                e0,
                lambda,
                vbar,
                eps: 0.0,
                omega,
            },
            other => other,
        }
    }
}
