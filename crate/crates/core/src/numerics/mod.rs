//! Dense complex linear algebra and fixed-step integration.

pub mod eig;
pub mod matrix;
pub mod rk4;
pub mod svd;
#[cfg(test)]
pub(crate) mod testing;

pub use eig::eig_dense;
pub use matrix::{dot_conj, norm2, CMatrix};
pub use rk4::{integrate_fixed, rk4_step, rk4_step_into, Rk4Workspace};
pub use svd::{lsq_solve, lsq_solve_many, pinv_apply, truncated_svd, RankPolicy, Svd};
