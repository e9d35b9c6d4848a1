//! Convex surrogate for the `α = 0` oracle: a weighted logistic separator.
//!
//! The separator `w` minimizes `Σ_i |g_i| log(1 + exp(−sign(g_i) wᵀẑ_i)) / Σ|g| + (λ/2)‖w‖²`
//! over normalized points `ẑ_i`, by damped Newton steps. The halfspace `wᵀz > 0` and its
//! complement are then scored with the true objective.

use nalgebra::{DMatrix, DVector};

use super::{better, OracleProblem, OracleResult, OracleStatus};
use crate::error::{invalid, Result};
use crate::linalg::{dot, normalize_p};

const MAX_NEWTON: usize = 200;

/// Weighted logistic surrogate for `α = 0`. The seed is accepted for interface symmetry;
/// the solver is deterministic.
pub fn oracle_surrogate_alpha0(
    problem: &OracleProblem<'_>,
    regularization: f64,
    _seed: u64,
) -> Result<OracleResult> {
    if problem.alpha != 0 {
        return Err(invalid("the logistic surrogate applies to α = 0 only"));
    }
    if !(regularization > 0.0) {
        return Err(invalid(format!(
            "regularization must be positive, got {regularization}"
        )));
    }
    let dim = problem.dim();
    let zs: Vec<Vec<f64>> = problem
        .zs
        .iter()
        .map(|z| normalize_p(z, 2.0).unwrap_or_else(|| vec![0.0; dim]))
        .collect();
    let total: f64 = problem.g.iter().map(|x| x.abs()).sum();
    let mut fallback = vec![0.0; dim];
    fallback[dim - 1] = 1.0;
    if total == 0.0 {
        return OracleResult::from_direction(problem, fallback, OracleStatus::Surrogate);
    }
    let weights: Vec<f64> = problem.g.iter().map(|x| x.abs() / total).collect();
    let labels: Vec<f64> = problem.g.iter().map(|x| x.signum()).collect();

    let objective = |w: &[f64]| -> f64 {
        let loss: f64 = zs
            .iter()
            .zip(&weights)
            .zip(&labels)
            .map(|((z, a), s)| a * softplus(-s * dot(w, z)))
            .sum();
        loss + 0.5 * regularization * dot(w, w)
    };

    let mut w = vec![0.0; dim];
    let mut converged = false;
    for _ in 0..MAX_NEWTON {
        let mut grad = DVector::from_iterator(dim, w.iter().map(|x| regularization * x));
        let mut hess = DMatrix::identity(dim, dim) * regularization;
        for ((z, a), s) in zs.iter().zip(&weights).zip(&labels) {
            let m = s * dot(&w, z);
            let p = sigmoid(-m);
            for i in 0..dim {
                grad[i] -= a * s * p * z[i];
                for j in 0..dim {
                    hess[(i, j)] += a * p * (1.0 - p) * z[i] * z[j];
                }
            }
        }
        if grad.norm() < 1e-12 {
            converged = true;
            break;
        }
        let Some(step) = hess.cholesky().map(|c| c.solve(&grad)) else {
            break;
        };
        let f0 = objective(&w);
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = w.iter().zip(step.iter()).map(|(a, b)| a - t * b).collect();
            if objective(&trial) <= f0 - 1e-4 * t * grad.dot(&step) || t < 1e-12 {
                w = trial;
                break;
            }
            t *= 0.5;
        }
    }

    let mut best_v = fallback;
    let mut best = problem.signed_value(&best_v).abs();
    if let Some(v) = normalize_p(&w, problem.p) {
        for cand in [v.clone(), v.iter().map(|x| -x).collect::<Vec<f64>>()] {
            let val = problem.signed_value(&cand).abs();
            if better(val, &cand, best, &best_v) {
                best = val;
                best_v = cand;
            }
        }
    }
    let mut result = OracleResult::from_direction(problem, best_v, OracleStatus::Surrogate)?;
    if !converged {
        result.diagnostic = Some(format!(
            "logistic fit stopped after {MAX_NEWTON} Newton steps"
        ));
    }
    Ok(result)
}

fn softplus(s: f64) -> f64 {
    if s > 0.0 {
        s + (-s).exp().ln_1p()
    } else {
        s.exp().ln_1p()
    }
}

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{oracle_exact, DEFAULT_BUDGET};

    #[test]
    fn four_point_instance_matches_exact() {
        let zs: Vec<Vec<f64>> = [-1.0, -0.5, 0.5, 1.0]
            .iter()
            .map(|&x| vec![x, 1.0])
            .collect();
        let g = [-1.0, -1.0, 1.0, 1.0];
        let p = OracleProblem::new(&zs, &g, 0, 2.0, 1.0).unwrap();
        let s = oracle_surrogate_alpha0(&p, 1e-3, 0).unwrap();
        assert!((s.value - 0.5).abs() < 1e-15);
        assert_eq!(s.value, oracle_exact(&p, DEFAULT_BUDGET).unwrap().value);
    }

    #[test]
    fn zero_weights_give_zero() {
        let zs = vec![vec![1.0, 1.0]];
        let p = OracleProblem::new(&zs, &[0.0], 0, 2.0, 1.0).unwrap();
        assert_eq!(oracle_surrogate_alpha0(&p, 1e-3, 0).unwrap().value, 0.0);
    }

    #[test]
    fn rejects_alpha_one() {
        let zs = vec![vec![1.0, 1.0]];
        let p = OracleProblem::new(&zs, &[1.0], 1, 2.0, 1.0).unwrap();
        assert!(oracle_surrogate_alpha0(&p, 1e-3, 0).is_err());
    }
}
