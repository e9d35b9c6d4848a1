//! Rademacher complexity bounds for variation-norm balls, their Monte-Carlo counterparts and
//! the summary rate formulas.
//!
//! For losses that are `G`-Lipschitz and predictors with `γ₁(f) ≤ δ`, the expected uniform
//! deviation between the risk and the empirical risk is at most `4Gδ C(p,d,α) / √n`, with
//! `C = α √(2 log(d+1))` for `p = 1`, `C = α / √(p−1)` for `p ∈ (1,2]` and `C = C₀ √(d+1)`
//! for `α = 0`, where the universal constant `C₀` is left to the caller (default 1).
//! The quantity driving the bound is the Rademacher complexity of the unit class,
//! `E sup_{‖v‖_p = 1} |(1/n) Σ_i τ_i (vᵀz_i / R)₊^α|`, which [`rademacher_mc`] estimates with
//! an oracle solving one Frank-Wolfe step per sign vector.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::linalg::{derive_seed, rng_from_seed};
use crate::model::Dataset;
use crate::oracle::{OracleMethod, OracleProblem};
use rand::Rng;

/// Default value of the universal constant `C₀` in the `α = 0` bound.
pub const DEFAULT_C0: f64 = 1.0;

/// Parameters of the uniform-deviation bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundSpec {
    /// Lipschitz constant `G` of the loss.
    pub g: f64,
    /// Radius `δ` of the variation-norm ball.
    pub delta: f64,
    /// Sample size.
    pub n: usize,
    /// Norm exponent `p ∈ [1, 2]` on input weights.
    pub p: f64,
    /// Input dimension.
    pub d: usize,
    /// Activation exponent.
    pub alpha: u32,
    /// Universal constant of the `α = 0` case.
    pub c0: f64,
}

impl BoundSpec {
    /// A specification with `C₀ = 1`.
    pub fn new(g: f64, delta: f64, n: usize, p: f64, d: usize, alpha: u32) -> Result<Self> {
        let spec = Self {
            g,
            delta,
            n,
            p,
            d,
            alpha,
            c0: DEFAULT_C0,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks positivity of every field and `p ∈ [1, 2]`.
    pub fn validate(&self) -> Result<()> {
        if !(self.g > 0.0 && self.delta > 0.0 && self.c0 > 0.0) || self.n == 0 || self.d == 0 {
            return Err(invalid("G, δ, C₀, n and d must be positive"));
        }
        if !(1.0..=2.0).contains(&self.p) {
            return Err(invalid(format!("p must lie in [1, 2], got {}", self.p)));
        }
        Ok(())
    }
}

/// The constant `C(p, d, α)`.
pub fn complexity_constant(p: f64, d: usize, alpha: u32, c0: f64) -> f64 {
    if alpha == 0 {
        c0 * ((d + 1) as f64).sqrt()
    } else if p == 1.0 {
        alpha as f64 * (2.0 * ((d + 1) as f64).ln()).sqrt()
    } else {
        alpha as f64 / (p - 1.0).sqrt()
    }
}

/// The uniform-deviation bound `4 G δ C(p,d,α) / √n`.
pub fn rademacher_bound(spec: &BoundSpec) -> Result<f64> {
    spec.validate()?;
    let c = complexity_constant(spec.p, spec.d, spec.alpha, spec.c0);
    Ok(4.0 * spec.g * spec.delta / (spec.n as f64).sqrt() * c)
}

/// Bound on the Rademacher complexity of the unit class for data with `‖x‖_q ≤ R`.
///
/// The lifted points satisfy `‖z‖_q ≤ 2^{1/q} R`, and `(·)₊^α` is `α 2^{(α−1)/q}`-Lipschitz
/// on the resulting range, so for `α ≥ 1` the bound is `C(p,d,α) 2^{α/q} / √n` with
/// `1/q = 1 − 1/p`. For `α = 0` it is `C₀ √(d+1) / √n`.
pub fn complexity_bound(n: usize, d: usize, alpha: u32, p: f64, c0: f64) -> f64 {
    let c = complexity_constant(p, d, alpha, c0);
    let inv_q = 1.0 - 1.0 / p;
    let lift = if alpha == 0 {
        1.0
    } else {
        2f64.powf(alpha as f64 * inv_q)
    };
    c * lift / (n as f64).sqrt()
}

/// The supremum `sup_{‖v‖_p = 1} |(1/n) Σ_i τ_i (vᵀz_i / R)₊^α|` for one sign vector.
pub fn rademacher_sup(
    dataset: &Dataset,
    tau: &[f64],
    alpha: u32,
    p: f64,
    oracle: &OracleMethod,
) -> Result<f64> {
    let zs = dataset.lifted();
    let problem = OracleProblem::new(&zs, tau, alpha, p, dataset.radius())?;
    Ok(oracle.solve(&problem)?.value)
}

/// Monte-Carlo estimate of the Rademacher complexity with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RademacherEstimate {
    /// Mean supremum over sign vectors.
    pub estimate: f64,
    /// Standard error of the mean.
    pub std_error: f64,
    /// Number of sign vectors.
    pub trials: usize,
}

/// Averages [`rademacher_sup`] over `trials` seeded sign vectors.
///
/// Trial `t` draws its signs from `derive_seed(seed, t)`, so results do not depend on
/// scheduling.
pub fn rademacher_mc(
    dataset: &Dataset,
    alpha: u32,
    p: f64,
    trials: usize,
    oracle: &OracleMethod,
    seed: u64,
) -> Result<RademacherEstimate> {
    if trials < 2 {
        return Err(invalid("need at least two trials"));
    }
    if dataset.n() == 0 {
        return Err(invalid("dataset is empty"));
    }
    let n = dataset.n();
    let vals: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from_seed(derive_seed(seed, t as u64));
            let tau: Vec<f64> = (0..n)
                .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                .collect();
            rademacher_sup(
                dataset,
                &tau,
                alpha,
                p,
                &oracle.reseeded(derive_seed(seed ^ 0x5eed, t as u64)),
            )
        })
        .collect::<Result<_>>()?;
    let k = trials as f64;
    let mean = vals.iter().sum::<f64>() / k;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    Ok(RademacherEstimate {
        estimate: mean,
        std_error: (var / k).sqrt(),
        trials,
    })
}

/// Row of the summary table: the structure of the target function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FunctionSpace {
    /// `wᵀx + b`.
    Affine,
    /// `Σ_{j≤k} f_j(w_jᵀx)`.
    ProjectionPursuit,
    /// `Σ_{j≤k} f_j(W_jᵀx)` with `W_j ∈ R^{d×s}`.
    MultiIndex,
}

/// Column of the summary table: the constraint on input weights and the activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// `ℓ2` input weights with `α ≥ 1`.
    L2,
    /// `ℓ1` input weights with `α ≥ 1`.
    L1,
    /// Threshold units, `α = 0`.
    Step,
}

impl FromStr for FunctionSpace {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "affine" => Ok(FunctionSpace::Affine),
            "projection-pursuit" => Ok(FunctionSpace::ProjectionPursuit),
            "multi-index" | "multi-dim" => Ok(FunctionSpace::MultiIndex),
            other => Err(invalid(format!(
                "unknown setting {other:?} (expected affine, projection-pursuit or multi-index)"
            ))),
        }
    }
}

impl FromStr for Regime {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l2" => Ok(Regime::L2),
            "l1" => Ok(Regime::L1),
            "step" | "alpha0" => Ok(Regime::Step),
            other => Err(invalid(format!(
                "unknown regime {other:?} (expected l2, l1 or step)"
            ))),
        }
    }
}

impl fmt::Display for FunctionSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FunctionSpace::Affine => "affine",
            FunctionSpace::ProjectionPursuit => "projection-pursuit",
            FunctionSpace::MultiIndex => "multi-index",
        })
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::L2 => "l2",
            Regime::L1 => "l1",
            Regime::Step => "step",
        })
    }
}

/// Parameters entering the rate formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateParams {
    /// Sample size.
    pub n: f64,
    /// Input dimension.
    pub d: f64,
    /// Number of ridge components `k`.
    pub k: f64,
    /// Number of nonzero input weights `q`.
    pub sparsity: f64,
    /// Dimension `s` of each projection.
    pub s: f64,
    /// Activation exponent.
    pub alpha: u32,
}

/// A rate value with the formula it came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rate {
    /// Numeric value.
    pub value: f64,
    /// The evaluated expression in plain text.
    pub formula: String,
}

/// Evaluates the summary-table rate for a function space and regime, ignoring constants.
pub fn table1_rates(space: FunctionSpace, regime: Regime, params: &RateParams) -> Result<Rate> {
    let RateParams {
        n,
        d,
        k,
        sparsity: q,
        s,
        alpha,
    } = *params;
    if !(n > 1.0 && d >= 1.0 && k >= 1.0 && q >= 1.0 && s >= 1.0) {
        return Err(invalid("rates need n > 1 and d, k, q, s ≥ 1"));
    }
    if regime != Regime::Step && alpha == 0 {
        return Err(invalid("the l2 and l1 columns require α ≥ 1"));
    }
    let a = alpha as f64;
    let ln = n.ln();
    let (value, formula) = match (space, regime) {
        (FunctionSpace::Affine, Regime::L2) => {
            (d.sqrt() / n.sqrt(), "d^(1/2) / n^(1/2)".to_string())
        }
        (FunctionSpace::Affine, Regime::L1) => (
            q.sqrt() * (d.ln() / n).sqrt(),
            "q^(1/2) (log d / n)^(1/2)".into(),
        ),
        (FunctionSpace::Affine, Regime::Step) => {
            ((d * q).sqrt() / n.sqrt(), "(d q)^(1/2) / n^(1/2)".into())
        }
        (FunctionSpace::ProjectionPursuit, Regime::L2) => {
            let e = 1.0 / (2.0 * a + 2.0);
            (
                k * d.sqrt() * n.powf(-e) * ln,
                format!("k d^(1/2) n^(-{e}) log n"),
            )
        }
        (FunctionSpace::ProjectionPursuit, Regime::L1) => {
            let e = 1.0 / (2.0 * a + 2.0);
            let l = 1.0 / (a + 1.0);
            (
                k * q.sqrt() * d.ln().powf(l) * n.powf(-e) * ln,
                format!("k q^(1/2) (log d)^({l}) n^(-{e}) log n"),
            )
        }
        (FunctionSpace::ProjectionPursuit, Regime::Step) => (
            k * (d * q).sqrt() / n.sqrt(),
            "k (d q)^(1/2) / n^(1/2)".into(),
        ),
        (FunctionSpace::MultiIndex, Regime::L2) => {
            let e = 1.0 / (2.0 * a + s + 1.0);
            (
                k * d.sqrt() * n.powf(-e) * ln,
                format!("k d^(1/2) n^(-{e}) log n"),
            )
        }
        (FunctionSpace::MultiIndex, Regime::L1) => {
            let e = 1.0 / (2.0 * a + s + 1.0);
            let l = 1.0 / (a + (s + 1.0) / 2.0);
            (
                k * q.sqrt() * d.ln().powf(l) * n.powf(-e) * ln,
                format!("k q^(1/2) (log d)^({l}) n^(-{e}) log n"),
            )
        }
        (FunctionSpace::MultiIndex, Regime::Step) => {
            let e = 1.0 / (s + 1.0);
            (
                (d * q).sqrt() * d.powf(e) * n.powf(-e) * ln,
                format!("(d q)^(1/2) d^({e}) n^(-{e}) log n"),
            )
        }
    };
    Ok(Rate { value, formula })
}
