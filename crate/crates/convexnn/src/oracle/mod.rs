//! Solvers for the Frank-Wolfe step
//! `max_{‖v‖_p = 1} |(1/n) Σ_i g_i (vᵀz_i / R)₊^α|`.
//!
//! [`oracle_exact`] enumerates the faces of the hyperplane arrangement of the points,
//! [`oracle_restarts`] runs seeded local ascents, [`oracle_surrogate_alpha0`] fits a
//! weighted logistic separator, and [`kappa_wrap`] degrades an exact answer to a
//! `1/κ`-approximate one.

pub mod arrangement;
mod exact;
mod kappa;
mod restarts;
mod surrogate;
mod sweep;

pub use exact::{oracle_exact, oracle_exact_candidates, Candidate, DEFAULT_BUDGET};
pub use kappa::kappa_wrap;
pub use restarts::oracle_restarts;
pub use surrogate::oracle_surrogate_alpha0;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::linalg::dot;
use crate::model::{activation, Unit};

/// One instance of the oracle problem.
#[derive(Debug, Clone, Copy)]
pub struct OracleProblem<'a> {
    /// Lifted points `z_i`.
    pub zs: &'a [Vec<f64>],
    /// Residual weights `g_i`.
    pub g: &'a [f64],
    /// Activation exponent.
    pub alpha: u32,
    /// Norm exponent of the unit sphere.
    pub p: f64,
    /// Scale `R` dividing `vᵀz`.
    pub radius: f64,
}

impl<'a> OracleProblem<'a> {
    /// Validates and wraps an instance.
    pub fn new(zs: &'a [Vec<f64>], g: &'a [f64], alpha: u32, p: f64, radius: f64) -> Result<Self> {
        if zs.len() != g.len() {
            return Err(invalid(format!(
                "{} points but {} weights",
                zs.len(),
                g.len()
            )));
        }
        if zs.is_empty() {
            return Err(invalid("oracle needs at least one point"));
        }
        let dim = zs[0].len();
        if dim == 0 || zs.iter().any(|z| z.len() != dim) {
            return Err(invalid("points must share a positive dimension"));
        }
        if !(1.0..=2.0).contains(&p) {
            return Err(invalid(format!("p must lie in [1, 2], got {p}")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid(format!("radius must be positive, got {radius}")));
        }
        if zs.iter().flatten().chain(g).any(|x| !x.is_finite()) {
            return Err(invalid("oracle inputs must be finite"));
        }
        Ok(Self {
            zs,
            g,
            alpha,
            p,
            radius,
        })
    }

    /// Number of points.
    pub fn n(&self) -> usize {
        self.zs.len()
    }

    /// Ambient dimension `d + 1`.
    pub fn dim(&self) -> usize {
        self.zs[0].len()
    }

    /// Signed objective `(1/n) Σ_i g_i (vᵀz_i / R)₊^α`.
    pub fn signed_value(&self, v: &[f64]) -> f64 {
        let s: f64 = self
            .zs
            .iter()
            .zip(self.g)
            .map(|(z, gi)| gi * activation(dot(v, z) / self.radius, self.alpha))
            .sum();
        s / self.n() as f64
    }

    /// Gradient of the signed objective in `v` (for `α ≥ 1`).
    pub fn gradient(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        let scale = 1.0 / (self.n() as f64 * self.radius);
        for (z, gi) in self.zs.iter().zip(self.g) {
            let s = dot(v, z) / self.radius;
            let d = crate::model::activation_derivative(s, self.alpha);
            if d != 0.0 {
                for (o, zj) in out.iter_mut().zip(z) {
                    *o += scale * gi * d * zj;
                }
            }
        }
        out
    }
}

/// How an oracle answer was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleStatus {
    /// Certified maximizer.
    Exact,
    /// Best of local searches.
    Heuristic,
    /// Thresholded convex surrogate.
    Surrogate,
}

/// An oracle answer.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Selected direction.
    pub unit: Unit,
    /// `|(1/n) Σ g_i (vᵀz_i / R)₊^α|` at the direction.
    pub value: f64,
    /// `+1` when the signed objective is nonnegative (the `g` side won), `−1` otherwise.
    pub sign: f64,
    /// Provenance of the answer.
    pub status: OracleStatus,
    /// Approximation factor guaranteed by a wrapper.
    pub kappa: Option<f64>,
    /// Solver notes, such as a non-converged inner loop.
    pub diagnostic: Option<String>,
}

impl OracleResult {
    pub(crate) fn from_direction(
        problem: &OracleProblem<'_>,
        v: Vec<f64>,
        status: OracleStatus,
    ) -> Result<Self> {
        let unit = Unit::from_direction(&v, problem.p)?;
        let s = problem.signed_value(unit.v());
        Ok(Self {
            unit,
            value: s.abs(),
            sign: if s >= 0.0 { 1.0 } else { -1.0 },
            status,
            kappa: None,
            diagnostic: None,
        })
    }
}

/// Oracle selection used by the trainer and the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleMethod {
    /// Arrangement enumeration with a work budget.
    Exact {
        /// Maximum number of subset evaluations.
        budget: f64,
    },
    /// Seeded multistart ascent.
    Restarts {
        /// Number of starts.
        restarts: usize,
        /// Base seed.
        seed: u64,
    },
    /// Weighted logistic surrogate (α = 0 only).
    Surrogate {
        /// Ridge penalty on the separator.
        regularization: f64,
        /// Seed (reserved for randomized initializations).
        seed: u64,
    },
    /// Exact oracle degraded to a `κ`-approximate answer.
    Kappa {
        /// Approximation factor.
        kappa: f64,
        /// Budget of the wrapped exact oracle.
        budget: f64,
    },
}

impl OracleMethod {
    /// Runs the selected oracle.
    pub fn solve(&self, problem: &OracleProblem<'_>) -> Result<OracleResult> {
        match *self {
            OracleMethod::Exact { budget } => oracle_exact(problem, budget),
            OracleMethod::Restarts { restarts, seed } => oracle_restarts(problem, restarts, seed),
            OracleMethod::Surrogate {
                regularization,
                seed,
            } => oracle_surrogate_alpha0(problem, regularization, seed),
            OracleMethod::Kappa { kappa, budget } => kappa_wrap(problem, kappa, budget),
        }
    }

    /// The same method with its seed replaced by `seed` (no-op for deterministic methods).
    pub fn reseeded(&self, seed: u64) -> Self {
        match self.clone() {
            OracleMethod::Restarts { restarts, .. } => OracleMethod::Restarts { restarts, seed },
            OracleMethod::Surrogate { regularization, .. } => OracleMethod::Surrogate {
                regularization,
                seed,
            },
            other => other,
        }
    }
}

impl std::str::FromStr for OracleMethod {
    type Err = crate::Error;

    /// Parses `exact[:budget]`, `restarts:<k>`, `surrogate[:regularization]` or
    /// `kappa:<factor>`. Seeds default to zero and are replaced through [`OracleMethod::reseeded`].
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let num = |a: Option<&str>, default: Option<f64>| -> Result<f64> {
            match (a, default) {
                (Some(a), _) => a
                    .parse::<f64>()
                    .map_err(|_| invalid(format!("bad oracle parameter {a:?}"))),
                (None, Some(d)) => Ok(d),
                (None, None) => Err(invalid(format!("oracle {name:?} needs a parameter"))),
            }
        };
        match name {
            "exact" => Ok(OracleMethod::Exact {
                budget: num(arg, Some(DEFAULT_BUDGET))?,
            }),
            "restarts" => {
                let k = num(arg, None)?;
                if !(k >= 1.0 && k.fract() == 0.0) {
                    return Err(invalid("restarts must be a positive integer"));
                }
                Ok(OracleMethod::Restarts {
                    restarts: k as usize,
                    seed: 0,
                })
            }
            "surrogate" => Ok(OracleMethod::Surrogate {
                regularization: num(arg, Some(1e-3))?,
                seed: 0,
            }),
            "kappa" => Ok(OracleMethod::Kappa {
                kappa: num(arg, None)?,
                budget: DEFAULT_BUDGET,
            }),
            other => Err(invalid(format!(
                "unknown oracle {other:?} (expected exact, restarts, surrogate or kappa)"
            ))),
        }
    }
}

/// Keeps the better of two candidates: larger value, then lexicographically larger direction.
pub(crate) fn better(value: f64, v: &[f64], best_value: f64, best_v: &[f64]) -> bool {
    let tol = 1e-13 * best_value.abs().max(1e-300);
    if value > best_value + tol {
        true
    } else if value >= best_value - tol {
        v.iter()
            .zip(best_v)
            .find(|(a, b)| a != b)
            .is_some_and(|(a, b)| a > b)
    } else {
        false
    }
}
