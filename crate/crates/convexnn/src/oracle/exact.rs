//! Exact oracle by enumeration of arrangement faces.
//!
//! For `α = 0` the objective is constant on every face of the arrangement of the points,
//! so one representative per face suffices. For `α = 1` and `p = 2` the objective is
//! linear on each face with positive set `S`, equal to `vᵀc_S / (nR)` where
//! `c_S = Σ_{i∈S} g_i z_i`; its critical points on the sphere are `±Proj_L c_S`
//! normalized, with `L` the flat of the face. For `α = 1` and `p = 1` the maximum over
//! the closure of a cell is attained at a vertex of the cell intersected with the ℓ1
//! ball, which has `k` active hyperplanes and support of size at most `k + 1`.

use super::arrangement::{faces, sign_vector};
use super::sweep::{sweep_maximizer, sweep_work};
use super::{better, OracleProblem, OracleResult, OracleStatus};
use crate::error::{invalid, Error, Result};
use crate::linalg::{binomial, dot, for_each_combination, normalize_p, null_vector};

/// Default cap on the number of subset evaluations.
pub const DEFAULT_BUDGET: f64 = 5e6;

/// A visited direction and its signed objective value.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    /// Unit-norm direction.
    pub v: Vec<f64>,
    /// `(1/n) Σ g_i (vᵀz_i / R)₊^α`.
    pub signed_value: f64,
}

/// Certified maximizer for `α ∈ {0, 1}` with `p = 2`, `α = 1` with `p = 1`, and
/// `α = 0` with any `p`.
///
/// In lifted dimension 2 or 3 with points in general position the maximizer comes from a
/// walk along the circles of the arrangement; otherwise every face is enumerated.
pub fn oracle_exact(problem: &OracleProblem<'_>, budget: f64) -> Result<OracleResult> {
    if problem.dim() <= 3 {
        let work = sweep_work(problem.n(), problem.dim());
        if work > budget {
            return Err(Error::BudgetExceeded(format!(
                "circle walk needs about {work:.3e} proposals, budget is {budget:.3e}"
            )));
        }
        if let Some(v) = sweep_maximizer(problem) {
            return OracleResult::from_direction(problem, v, OracleStatus::Exact);
        }
    }
    let cands = oracle_exact_candidates(problem, budget)?;
    let (mut best_v, mut best) = (cands[0].v.clone(), cands[0].signed_value.abs());
    for c in &cands[1..] {
        if better(c.signed_value.abs(), &c.v, best, &best_v) {
            best = c.signed_value.abs();
            best_v = c.v.clone();
        }
    }
    OracleResult::from_direction(problem, best_v, OracleStatus::Exact)
}

/// Every direction the exact oracle evaluates. The maximizer of `|objective|` is among them.
pub fn oracle_exact_candidates(problem: &OracleProblem<'_>, budget: f64) -> Result<Vec<Candidate>> {
    let p = problem.p;
    let raw = match (problem.alpha, p) {
        (0, _) => alpha0_points(problem, budget)?,
        (1, 2.0) => alpha1_l2_points(problem, budget)?,
        (1, 1.0) => alpha1_l1_points(problem, budget)?,
        (1, _) => {
            return Err(invalid(
                "exact oracle for α = 1 supports p = 1 and p = 2 only",
            ))
        }
        (a, _) => {
            return Err(invalid(format!(
                "exact oracle supports α ∈ {{0, 1}}, got {a}"
            )))
        }
    };
    let mut out: Vec<Candidate> = raw
        .into_iter()
        .filter_map(|v| normalize_p(&v, p))
        .map(|v| Candidate {
            signed_value: problem.signed_value(&v),
            v,
        })
        .collect();
    if out.is_empty() {
        let mut v = vec![0.0; problem.dim()];
        v[problem.dim() - 1] = 1.0;
        out.push(Candidate {
            signed_value: problem.signed_value(&v),
            v,
        });
    }
    Ok(out)
}

fn projection(flat: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for f in flat {
        let c = dot(f, x);
        for (o, fi) in out.iter_mut().zip(f) {
            *o += c * fi;
        }
    }
    out
}

fn alpha0_points(problem: &OracleProblem<'_>, budget: f64) -> Result<Vec<Vec<f64>>> {
    let dim = problem.dim();
    let unit_zs: Vec<Vec<f64>> = problem
        .zs
        .iter()
        .map(|z| normalize_p(z, 2.0).unwrap_or_else(|| vec![0.0; dim]))
        .collect();
    let mut out = Vec::new();
    for face in faces(problem.zs, dim, budget)? {
        let mut centered = vec![0.0; dim];
        for (s, z) in face.signs.iter().zip(&unit_zs) {
            for (c, zi) in centered.iter_mut().zip(z) {
                *c += *s as f64 * zi;
            }
        }
        let centered = projection(&face.flat, &centered);
        if centered.iter().any(|x| *x != 0.0) && sign_vector(problem.zs, &centered) == face.signs {
            out.push(centered);
        } else {
            out.push(face.point);
        }
    }
    Ok(out)
}

fn alpha1_l2_points(problem: &OracleProblem<'_>, budget: f64) -> Result<Vec<Vec<f64>>> {
    let dim = problem.dim();
    let mut out = Vec::new();
    for face in faces(problem.zs, dim, budget)? {
        let mut c = vec![0.0; dim];
        for ((s, z), gi) in face.signs.iter().zip(problem.zs).zip(problem.g) {
            if *s > 0 {
                for (ci, zi) in c.iter_mut().zip(z) {
                    *ci += gi * zi;
                }
            }
        }
        let pc = projection(&face.flat, &c);
        if pc.iter().any(|x| *x != 0.0) {
            out.push(pc.iter().map(|x| -x).collect());
            out.push(pc);
        }
        out.push(face.point);
    }
    Ok(out)
}

fn alpha1_l1_points(problem: &OracleProblem<'_>, budget: f64) -> Result<Vec<Vec<f64>>> {
    let dim = problem.dim();
    let n = problem.n();
    let est: f64 = (0..dim)
        .map(|k| binomial(n, k) * binomial(dim, k + 1))
        .sum();
    if est > budget {
        return Err(Error::BudgetExceeded(format!(
            "ℓ1 vertex enumeration needs about {est:.3e} subset evaluations, budget is {budget:.3e}"
        )));
    }
    let mut out = Vec::new();
    for k in 0..dim.min(n + 1) {
        for_each_combination(n, k, |edges| {
            for_each_combination(dim, k + 1, |support| {
                let rows: Vec<Vec<f64>> = edges
                    .iter()
                    .map(|&i| support.iter().map(|&j| problem.zs[i][j]).collect())
                    .collect();
                if let Some(w) = null_vector(&rows, k + 1, 1e-10) {
                    let mut v = vec![0.0; dim];
                    for (&j, wj) in support.iter().zip(&w) {
                        v[j] = *wj;
                    }
                    out.push(v.iter().map(|x| -x).collect());
                    out.push(v);
                }
            });
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{rng_from_seed, sample_gaussian, sample_unit_sphere};
    use crate::oracle::OracleProblem;

    fn solve(zs: &[Vec<f64>], g: &[f64], alpha: u32, p: f64) -> OracleResult {
        oracle_exact(
            &OracleProblem::new(zs, g, alpha, p, 1.0).unwrap(),
            DEFAULT_BUDGET,
        )
        .unwrap()
    }

    #[test]
    fn single_point_alpha0() {
        let r = solve(&[vec![0.0, 1.0]], &[1.0], 0, 2.0);
        assert_eq!(r.value, 1.0);
        assert!((r.unit.v()[0]).abs() < 1e-12 && (r.unit.v()[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_point_alpha1() {
        let r = solve(&[vec![1.0, 0.0]], &[1.0], 1, 2.0);
        assert!((r.value - 1.0).abs() < 1e-12);
        assert!((r.unit.v()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn four_point_separator() {
        let zs: Vec<Vec<f64>> = [-1.0, -0.5, 0.5, 1.0]
            .iter()
            .map(|&x| vec![x, 1.0])
            .collect();
        let r = solve(&zs, &[-1.0, -1.0, 1.0, 1.0], 0, 2.0);
        assert!((r.value - 0.5).abs() < 1e-15);
        let fires: Vec<bool> = zs.iter().map(|z| dot(r.unit.v(), z) > 0.0).collect();
        assert_eq!(fires, vec![false, false, true, true]);
    }

    #[test]
    fn exact_dominates_random_directions() {
        let mut rng = rng_from_seed(21);
        for alpha in [0, 1] {
            for p in [1.0, 2.0] {
                let zs: Vec<Vec<f64>> = (0..6).map(|_| sample_gaussian(&mut rng, 3)).collect();
                let g = sample_gaussian(&mut rng, 6);
                let prob = OracleProblem::new(&zs, &g, alpha, p, 1.0).unwrap();
                let r = oracle_exact(&prob, DEFAULT_BUDGET).unwrap();
                for _ in 0..20000 {
                    let v = normalize_p(&sample_unit_sphere(&mut rng, 3), p).unwrap();
                    assert!(
                        prob.signed_value(&v).abs() <= r.value + 1e-12,
                        "α={alpha} p={p}"
                    );
                }
            }
        }
    }

    #[test]
    fn value_is_symmetric_in_g() {
        let mut rng = rng_from_seed(8);
        let zs: Vec<Vec<f64>> = (0..5).map(|_| sample_gaussian(&mut rng, 3)).collect();
        let g = sample_gaussian(&mut rng, 5);
        let neg: Vec<f64> = g.iter().map(|x| -x).collect();
        for alpha in [0, 1] {
            let a = solve(&zs, &g, alpha, 2.0).value;
            let b = solve(&zs, &neg, alpha, 2.0).value;
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_unsupported_settings() {
        let zs = vec![vec![1.0, 0.0]];
        let p = OracleProblem::new(&zs, &[1.0], 2, 2.0, 1.0).unwrap();
        assert!(oracle_exact(&p, DEFAULT_BUDGET).is_err());
        let p = OracleProblem::new(&zs, &[1.0], 1, 1.5, 1.0).unwrap();
        assert!(oracle_exact(&p, DEFAULT_BUDGET).is_err());
    }
}
