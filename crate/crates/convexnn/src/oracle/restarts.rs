//! Multistart local ascent on the unit `ℓ_p` sphere.
//!
//! Each start is a seeded uniform direction. For `α ≥ 1` the ascent follows the gradient
//! with a retraction onto the sphere and an adaptive step; for `α = 1` and `p = 2` it is
//! then polished by the fixed point `v ← normalize(±Σ_{vᵀz_i > 0} g_i z_i)` and refined on
//! the cell boundaries of nearly active points. For `α = 0`
//! the step function is replaced by a sigmoid of shrinking temperature. Both signs of `g`
//! are explored and every visited point is scored with the true objective.

use rayon::prelude::*;

use super::{better, OracleProblem, OracleResult, OracleStatus};
use crate::error::{invalid, Result};
use crate::linalg::{derive_seed, dot, norm2, normalize_p, rng_from_seed, sample_unit_sphere};

const ASCENT_ITERS: usize = 300;
const POLISH_ITERS: usize = 30;
/// Largest `|vᵀz|/‖z‖` for which a point counts as nearly active during refinement.
const BOUNDARY_BAND: f64 = 0.05;
/// Most nearly active points considered during refinement.
const MAX_NEAR: usize = 4;
const TEMPERATURES: [f64; 6] = [0.3, 0.1, 0.03, 0.01, 0.003, 0.001];
const ITERS_PER_TEMPERATURE: usize = 60;

/// Best of `restarts` seeded ascents, each run for `g` and `−g`.
pub fn oracle_restarts(
    problem: &OracleProblem<'_>,
    restarts: usize,
    seed: u64,
) -> Result<OracleResult> {
    if restarts == 0 {
        return Err(invalid("restarts must be at least 1"));
    }
    let runs: Vec<(f64, Vec<f64>)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_from_seed(derive_seed(seed, r as u64));
            let start = normalize_p(&sample_unit_sphere(&mut rng, problem.dim()), problem.p)
                .expect("sphere samples are nonzero");
            let mut best: Option<(f64, Vec<f64>)> = None;
            for sign in [1.0, -1.0] {
                let (val, v) = ascend(problem, &start, sign);
                if best
                    .as_ref()
                    .is_none_or(|(bv, bx)| better(val, &v, *bv, bx))
                {
                    best = Some((val, v));
                }
            }
            best.expect("two signs explored")
        })
        .collect();
    let mut it = runs.into_iter();
    let (mut best_val, mut best_v) = it.next().expect("at least one restart");
    for (val, v) in it {
        if better(val, &v, best_val, &best_v) {
            best_val = val;
            best_v = v;
        }
    }
    OracleResult::from_direction(problem, best_v, OracleStatus::Heuristic)
}

struct Tracker<'p, 'a> {
    problem: &'p OracleProblem<'a>,
    best_val: f64,
    best_v: Vec<f64>,
}

impl<'p, 'a> Tracker<'p, 'a> {
    fn new(problem: &'p OracleProblem<'a>, v: &[f64]) -> Self {
        Self {
            problem,
            best_val: problem.signed_value(v).abs(),
            best_v: v.to_vec(),
        }
    }

    fn offer(&mut self, v: &[f64]) {
        let val = self.problem.signed_value(v).abs();
        if better(val, v, self.best_val, &self.best_v) {
            self.best_val = val;
            self.best_v = v.to_vec();
        }
    }
}

fn ascend(problem: &OracleProblem<'_>, start: &[f64], sign: f64) -> (f64, Vec<f64>) {
    let mut tracker = Tracker::new(problem, start);
    if problem.alpha == 0 {
        smoothed_ascent(problem, start, sign, &mut tracker);
    } else {
        let v = gradient_ascent(
            problem,
            start,
            sign,
            &mut tracker,
            |v| sign * problem.signed_value(v),
            |v| problem.gradient(v),
        );
        if problem.alpha == 1 && problem.p == 2.0 {
            polish(problem, &v, sign, &mut tracker);
        }
    }
    (tracker.best_val, tracker.best_v)
}

fn gradient_ascent(
    problem: &OracleProblem<'_>,
    start: &[f64],
    sign: f64,
    tracker: &mut Tracker<'_, '_>,
    objective: impl Fn(&[f64]) -> f64,
    gradient: impl Fn(&[f64]) -> Vec<f64>,
) -> Vec<f64> {
    let mut v = start.to_vec();
    let mut f = objective(&v);
    let mut step = 0.5;
    for _ in 0..ASCENT_ITERS {
        let g = gradient(&v);
        let gn = norm2(&g);
        if gn == 0.0 || step < 1e-12 {
            break;
        }
        let trial: Vec<f64> = v
            .iter()
            .zip(&g)
            .map(|(a, b)| a + sign * step * b / gn)
            .collect();
        let Some(trial) = normalize_p(&trial, problem.p) else {
            step *= 0.5;
            continue;
        };
        let ft = objective(&trial);
        if ft > f {
            v = trial;
            f = ft;
            tracker.offer(&v);
            step = (step * 1.5).min(1.0);
        } else {
            step *= 0.5;
        }
    }
    v
}

fn polish(problem: &OracleProblem<'_>, start: &[f64], sign: f64, tracker: &mut Tracker<'_, '_>) {
    let mut v = start.to_vec();
    for _ in 0..POLISH_ITERS {
        let mut c = vec![0.0; v.len()];
        for (z, gi) in problem.zs.iter().zip(problem.g) {
            if dot(&v, z) > 0.0 {
                for (ci, zi) in c.iter_mut().zip(z) {
                    *ci += sign * gi * zi;
                }
            }
        }
        let Some(next) = normalize_p(&c, 2.0) else {
            return;
        };
        tracker.offer(&next);
        if next == v {
            break;
        }
        v = next;
    }
    let best = tracker.best_v.clone();
    refine_on_boundaries(problem, start, sign, tracker);
    refine_on_boundaries(problem, &best, sign, tracker);
}

/// Offers the maximizers of the cell's linear objective restricted to the hyperplanes
/// `vᵀz_j = 0` of nearly active points, alone and in pairs, with every sign pattern for
/// the remaining nearly active points.
fn refine_on_boundaries(
    problem: &OracleProblem<'_>,
    v: &[f64],
    sign: f64,
    tracker: &mut Tracker<'_, '_>,
) {
    let dim = v.len();
    let mut near: Vec<(f64, usize)> = problem
        .zs
        .iter()
        .enumerate()
        .filter_map(|(j, z)| {
            let nz = norm2(z);
            let c = dot(v, z).abs() / nz;
            (nz > 0.0 && c <= BOUNDARY_BAND).then_some((c, j))
        })
        .collect();
    near.sort_by(|a, b| a.0.total_cmp(&b.0));
    near.truncate(MAX_NEAR);
    let near: Vec<usize> = near.into_iter().map(|(_, j)| j).collect();
    let mut base = vec![0.0; dim];
    for (i, (z, gi)) in problem.zs.iter().zip(problem.g).enumerate() {
        if !near.contains(&i) && dot(v, z) > 0.0 {
            for (b, zi) in base.iter_mut().zip(z) {
                *b += sign * gi * zi;
            }
        }
    }
    let m = near.len();
    for subset in 1u32..(1 << m) {
        let tight: Vec<usize> = (0..m)
            .filter(|b| subset >> b & 1 == 1)
            .map(|b| near[b])
            .collect();
        if tight.len() >= dim {
            continue;
        }
        let Some(basis) = orthonormal_basis(tight.iter().map(|&j| problem.zs[j].as_slice())) else {
            continue;
        };
        let free: Vec<usize> = near
            .iter()
            .copied()
            .filter(|j| !tight.contains(j))
            .collect();
        for pattern in 0u32..(1 << free.len()) {
            let mut c = base.clone();
            for (b, &j) in free.iter().enumerate() {
                if pattern >> b & 1 == 1 {
                    for (ci, zi) in c.iter_mut().zip(&problem.zs[j]) {
                        *ci += sign * problem.g[j] * zi;
                    }
                }
            }
            for e in &basis {
                let t = dot(&c, e);
                for (ci, ei) in c.iter_mut().zip(e) {
                    *ci -= t * ei;
                }
            }
            if let Some(candidate) = normalize_p(&c, 2.0) {
                tracker.offer(&candidate);
            }
        }
    }
}

fn orthonormal_basis<'a>(vectors: impl Iterator<Item = &'a [f64]>) -> Option<Vec<Vec<f64>>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for w in vectors {
        let mut u = w.to_vec();
        for e in &basis {
            let t = dot(&u, e);
            for (ui, ei) in u.iter_mut().zip(e) {
                *ui -= t * ei;
            }
        }
        let nu = norm2(&u);
        if nu <= 1e-12 * norm2(w).max(1.0) {
            return None;
        }
        basis.push(u.into_iter().map(|x| x / nu).collect());
    }
    Some(basis)
}

fn smoothed_ascent(
    problem: &OracleProblem<'_>,
    start: &[f64],
    sign: f64,
    tracker: &mut Tracker<'_, '_>,
) {
    let unit_zs: Vec<Vec<f64>> = problem
        .zs
        .iter()
        .map(|z| normalize_p(z, 2.0).unwrap_or_else(|| vec![0.0; z.len()]))
        .collect();
    let mut v = start.to_vec();
    for tau in TEMPERATURES {
        let objective = |v: &[f64]| -> f64 {
            let nv = norm2(v);
            sign * unit_zs
                .iter()
                .zip(problem.g)
                .map(|(z, gi)| gi * sigmoid(dot(v, z) / (nv * tau)))
                .sum::<f64>()
        };
        let gradient = |v: &[f64]| -> Vec<f64> {
            let nv = norm2(v);
            let mut out = vec![0.0; v.len()];
            for (z, gi) in unit_zs.iter().zip(problem.g) {
                let s = sigmoid(dot(v, z) / (nv * tau));
                let w = gi * s * (1.0 - s) / (nv * tau);
                for (o, zi) in out.iter_mut().zip(z) {
                    *o += w * zi;
                }
            }
            out
        };
        let mut v_tau = v.clone();
        let mut f = objective(&v_tau);
        let mut step = 0.5;
        for _ in 0..ITERS_PER_TEMPERATURE {
            let g = gradient(&v_tau);
            let gn = norm2(&g);
            if gn == 0.0 || step < 1e-12 {
                break;
            }
            let trial: Vec<f64> = v_tau
                .iter()
                .zip(&g)
                .map(|(a, b)| a + sign * step * b / gn)
                .collect();
            let Some(trial) = normalize_p(&trial, problem.p) else {
                break;
            };
            let ft = objective(&trial);
            if ft > f {
                v_tau = trial;
                f = ft;
                tracker.offer(&v_tau);
                step = (step * 1.5).min(1.0);
            } else {
                step *= 0.5;
            }
        }
        v = v_tau;
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
    use crate::linalg::sample_gaussian;
    use crate::oracle::{oracle_exact, DEFAULT_BUDGET};

    #[test]
    fn zero_weights_give_zero() {
        let zs = vec![vec![1.0, 0.5], vec![-0.3, 1.0]];
        let p = OracleProblem::new(&zs, &[0.0, 0.0], 1, 2.0, 1.0).unwrap();
        assert_eq!(oracle_restarts(&p, 5, 1).unwrap().value, 0.0);
    }

    #[test]
    fn planted_spike_is_recovered() {
        let mut rng = rng_from_seed(4);
        let star = sample_unit_sphere(&mut rng, 3);
        let zs: Vec<Vec<f64>> = (0..12).map(|_| sample_gaussian(&mut rng, 3)).collect();
        let g: Vec<f64> = zs.iter().map(|z| dot(&star, z).max(0.0)).collect();
        let p = OracleProblem::new(&zs, &g, 1, 2.0, 1.0).unwrap();
        let r = oracle_restarts(&p, 10, 9).unwrap();
        assert!(r.value >= p.signed_value(&star) - 1e-12);
    }

    #[test]
    fn restarts_never_beat_exact() {
        let mut rng = rng_from_seed(12);
        for alpha in [0, 1] {
            for _ in 0..5 {
                let zs: Vec<Vec<f64>> = (0..7).map(|_| sample_gaussian(&mut rng, 3)).collect();
                let g = sample_gaussian(&mut rng, 7);
                let p = OracleProblem::new(&zs, &g, alpha, 2.0, 1.0).unwrap();
                let h = oracle_restarts(&p, 50, 3).unwrap();
                let e = oracle_exact(&p, DEFAULT_BUDGET).unwrap();
                assert!(h.value <= e.value + 1e-12);
            }
        }
    }

    #[test]
    fn deterministic_for_a_seed() {
        let zs = vec![
            vec![1.0, 0.5, 0.2],
            vec![-0.3, 1.0, 0.7],
            vec![0.2, -0.4, 1.0],
        ];
        let g = [0.5, -1.0, 0.8];
        let p = OracleProblem::new(&zs, &g, 2, 1.5, 1.0).unwrap();
        assert_eq!(
            oracle_restarts(&p, 8, 77).unwrap(),
            oracle_restarts(&p, 8, 77).unwrap()
        );
    }
}
