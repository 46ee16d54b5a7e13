//! Nakajima-Zwanzig memory kernels extracted from the hierarchy.

mod extract;
mod floquet;
mod projector;
mod series;
mod spectrum;

pub use extract::{extract_kernel, tensor_label};
pub use floquet::{extract_floquet_kernels, snap_dt, FloquetKernelSet};
pub use projector::{apply_complement, apply_projector, ProjectorKind};
pub use series::{fmt_f64, relative_l2, relative_sup_deviation, uniform_grid, KernelSeries};
pub use spectrum::{dc_component, kernel_fft, KernelSpectrum};
