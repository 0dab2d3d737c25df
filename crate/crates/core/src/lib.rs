//! Polynomial solutions of injection-driven Hele-Shaw and Stokes flows.
//!
//! The crate evolves conformal maps `f(ξ, t) = Σ a_k(t) ξ^k` of the unit disk,
//! computes their conserved quantities (Richardson moments `M_k`, Stokes
//! invariants `C_k`) and checks large-time coefficient decay, rescaling
//! limits and boundary geometry numerically.

pub mod asymptotics;
pub mod conformal_map;
pub mod error;
pub mod exact;
pub mod export;
pub mod heleshaw;
pub mod invariants;
pub mod newton;
pub mod stokes;
pub mod trajectory;

pub use asymptotics::{
    rate_fit, ClaimCheck, ClaimGroup, CurvatureExpansion, RateFitResult, ResidualSeries, Slope, VerificationReport,
    DEFAULT_WINDOW,
};
pub use conformal_map::{
    boundary_geometry, is_univalent, rescaled_map, univalence_check, BoundaryGeometry, PolynomialMap, UnivalenceReport,
};
pub use error::{FlowError, Result};
pub use exact::{exact_cubic, exact_disk};
pub use export::{
    parse_coefficients, parse_trajectory_csv, read_coefficients, read_trajectory_csv, trajectory_csv, trajectory_json,
    write_atomic, write_trajectory_csv,
};
pub use heleshaw::{assemble_pg_system, evolve, evolve_continuation, evolve_ode};
pub use invariants::{
    moment_contour_oracle, n0_of, oracle_samples, stokes_contour_oracle, richardson_moment, stokes_invariant, tail_weight, MomentVector, StokesInvariants,
    TailWeight,
};
pub use num_complex::Complex64;
pub use stokes::{evolve_stokes, stokes_residual};
pub use trajectory::{EvolutionConfig, Method, Model, RecordSchedule, Trajectory, TrajectorySample};
