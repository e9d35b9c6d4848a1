//! Convex single-hidden-layer neural networks with positively homogeneous activations.
//!
//! A predictor is a finite signed measure over unit directions `v`, evaluated as
//! `f(x) = Σ_j η_j (v_jᵀz / R)₊^α` with the lifted input `z = (x, R)`. Training runs
//! conditional gradient over the ball `Σ|η_j| ≤ δ`, each step calling an oracle that
//! selects a new unit. Supporting modules cover zonotope and ellipsoid geometry, the
//! induced kernels and random features, spherical-harmonic spectra, convex relaxations
//! of the oracle, and Rademacher complexity bounds.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bounds;
pub mod error;
pub mod experiment;
pub mod fw;
pub mod geometry;
pub mod harmonics;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod loss;
pub mod model;
pub mod oracle;
pub mod relax;

pub use error::{Error, Result};
pub use loss::{smoothing_schedule, Loss};
pub use model::{
    activation, augment, caratheodory_reduce, predict, variation_norm, AugmentedPoint, Dataset,
    SignedMeasureModel, Unit, WeightedUnit,
};
pub use oracle::{
    kappa_wrap, oracle_exact, oracle_restarts, oracle_surrogate_alpha0, OracleMethod,
    OracleProblem, OracleResult, OracleStatus,
};
