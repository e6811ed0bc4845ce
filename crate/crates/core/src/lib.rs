//! Numerical tools for the average-field energy of almost-bosonic anyons.
#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod diagnostics;
pub mod error;
pub mod field;
pub mod functional;
pub mod grid;
pub mod kernel;
pub mod minimize;
pub mod potential;
pub mod precond;
pub mod snapshot;
pub mod tf;
pub mod trial;

pub use diagnostics::{
    coarse_grain, detect_vortices, homogeneous_distance, lda_compare, weak_norm_distance, CoarseDensity, LdaReport,
    VortexRecord,
};
pub use error::{AfError, Result};
pub use field::{
    current, density, gradient, lp_norm, normalize, rescale_state, ComplexField, ScalarField, VectorField,
};
pub use functional::{
    chemical_potential, diamagnetic_bound, el_apply, energy, lower_bounds, magnetic_bound, sobolev_gradient,
    EnergyBreakdown, Evaluation, Functional,
};
pub use grid::{make_grid, BoundaryCondition, Grid2D, Rect};
pub use kernel::{build_kernel, curl, exterior_field, vector_potential, KernelTable};
pub use minimize::{
    default_sigma, estimate_e11, estimate_e11_rows, estimate_e11_series, experiment_grid, init_state, init_state_in,
    minimize, minimize_with, multistart, seed_region, sweep, E11Fit, InitStrategy, Method, MinimizeReport,
    MinimizeSettings, SweepOptions, SweepOutcome, SweepRow,
};
pub use potential::PotentialSpec;
pub use precond::Preconditioner;
pub use snapshot::{load_snapshot, read_snapshot, save_snapshot, write_snapshot};
pub use tf::{homogeneous_energy, tf_energy, tf_minimizer, tf_minimizer_at, tf_scale, tf_uniform, TfProfile, TfShape};
pub use trial::{
    ball_energy, bump_profile, factorization_check, packed_side, phase_winding, trial_geometry, unit_square_trial,
    vortex_lattice_trial, RadialProfile,
};
