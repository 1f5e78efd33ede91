//! Numerical laboratory for rotationally symmetric Ricci flow and the
//! conjugate heat equation.
//!
//! The crate evolves warped-product sphere metrics and flat-torus controls,
//! computes fundamental solutions of the forward and conjugate heat
//! equations along those flows, and checks the kernel bounds, entropy
//! monotonicity, and backward-limit soliton behaviour that the exact model
//! trajectories make testable.

pub mod bounds;
pub mod entropy;
pub mod fd;
pub mod flow;
pub mod geometry;
pub mod io;
pub mod kernel;
pub mod report;
pub mod soliton;

pub use bounds::{
    gaussian_envelope_check, mass_bracket_check, mean_value_check, on_diag_lower_check,
    on_diag_upper_check, BoundsError,
};
pub use entropy::{
    f_from_u, lambda0, log_sobolev_check, sobolev_check, trial_corpus, w_entropy,
    w_monotonicity, EntropyError, EntropyTrace,
};
pub use flow::{FlowError, FlowTrajectory, StepControl};
pub use geometry::{
    make_flat_torus, make_round_sphere, CurvatureField, GeometryError, ProfileKind, WarpedProfile,
};
pub use io::IoError;
pub use kernel::{
    solve_conjugate_kernel, solve_forward_kernel, spectral_kernel_sphere, KernelData,
    KernelDirection, KernelError, KernelField, KernelOptions,
};
pub use report::CheckReport;
pub use soliton::{
    backward_limit_experiment, rescale, rescaled_kernel, soliton_residual, LimitReport,
    SolitonError, Verdict,
};
