//! Monte Carlo laboratory for additive-noise SDEs `dX = b(X) dt + dW` whose
//! drifts satisfy a dissipativity and polynomial-growth certificate.
//!
//! The crate simulates the SDE jointly with its variational flow, estimates
//! the transition and Feynman-Kac semigroups and their spatial derivatives,
//! samples the invariant measure by time averaging, and verifies the
//! integration-by-parts calculus that the invariant measure supports: the
//! score field `v_z`, the gradient integral inequality, the adjoint `D*`,
//! and the generalized Ornstein-Uhlenbeck operator `-1/2 D*D`.
//!
//! Everything is deterministic given a seed: per-path ChaCha streams are
//! addressed by `(seed, path_index)`, reductions run in fixed order, and the
//! companion CLI writes byte-identical reports for identical configs.

// validation guards use the `!(x > 0.0)` form on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod drift;
pub mod error;
pub mod estimate;
pub mod fomin;
pub mod invariant;
pub mod kde;
pub mod rng;
pub mod sde;
pub mod semigroup;
pub mod testfn;
mod util;

pub use drift::{check_hypothesis, default_grid, DriftModel, HypothesisParams, StationaryOracle};
pub use error::{Error, Result};
pub use estimate::MCEstimate;
pub use invariant::{
    check_invariance, check_moments, check_tail_bound, moment_bound_constant,
    sample_krylov_bogoliubov, sample_long_run, EmpiricalMeasure, Provenance,
};
pub use kde::{kde_fit, BandwidthRule, KdeDensity, ScoreField};
pub use rng::brownian_increments;
pub use sde::{
    check_eta_bound, simulate_path, simulate_paths, PathBundle, Scheme, SimConfig,
};
pub use semigroup::{
    check_commutation_identity, check_voc_identity, estimate_dpt_fd, estimate_dst_bel,
    estimate_dst_fd, estimate_pt, estimate_st, scan_small_t, suggested_voc_tol, BelEstimate,
    CommutationOptions, IdentityReport, SmallTReport,
};
pub use testfn::{battery_by_labels, canonical_battery, TestFunction, VectorField};

/// Crate version, embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
