//! Zonotopes `{Σ_i b_i t_i : b ∈ [0,1]^r}` and their Hausdorff distances.

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::linalg::{dot, norm2};
use crate::oracle::arrangement::{cells, work_estimate};
use crate::Error;

/// A zonotope given by its generators.
#[derive(Debug, Clone, PartialEq)]
pub struct Zonotope {
    generators: Vec<Vec<f64>>,
    dim: usize,
}

impl Zonotope {
    /// Builds a zonotope in `R^dim`. Every generator must have length `dim`.
    pub fn new(generators: Vec<Vec<f64>>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("zonotope dimension must be positive"));
        }
        if generators
            .iter()
            .any(|t| t.len() != dim || t.iter().any(|x| !x.is_finite()))
        {
            return Err(invalid(format!(
                "generators must be finite vectors of length {dim}"
            )));
        }
        Ok(Self { generators, dim })
    }

    /// Generators.
    pub fn generators(&self) -> &[Vec<f64>] {
        &self.generators
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Support function `h(w) = Σ_i max(0, t_iᵀw)`.
    pub fn support(&self, w: &[f64]) -> f64 {
        self.generators.iter().map(|t| dot(t, w).max(0.0)).sum()
    }

    /// Vertices, one per cell of the arrangement of the generators. Fails when the
    /// enumeration work exceeds `budget`.
    pub fn vertices(&self, budget: f64) -> Result<Vec<Vec<f64>>> {
        let live: Vec<Vec<f64>> = self
            .generators
            .iter()
            .filter(|t| norm2(t) > 0.0)
            .cloned()
            .collect();
        if live.is_empty() {
            return Ok(vec![vec![0.0; self.dim]]);
        }
        let est = work_estimate(live.len(), self.dim);
        if est > budget {
            return Err(Error::BudgetExceeded(format!(
                "vertex enumeration needs about {est:.3e} subset evaluations, budget is {budget:.3e}"
            )));
        }
        Ok(cells(&live, self.dim)
            .into_iter()
            .map(|w| {
                let mut v = vec![0.0; self.dim];
                for t in &live {
                    if dot(t, &w) > 0.0 {
                        for (vi, ti) in v.iter_mut().zip(t) {
                            *vi += ti;
                        }
                    }
                }
                v
            })
            .collect())
    }

    /// Euclidean distance from `point` to the zonotope, with the minimizing coefficients.
    pub fn distance(&self, point: &[f64]) -> (f64, Vec<f64>) {
        box_least_squares(&self.generators, point)
    }
}

fn residual(gens: &[Vec<f64>], a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut r = a.to_vec();
    for (t, bi) in gens.iter().zip(b) {
        for (ri, ti) in r.iter_mut().zip(t) {
            *ri -= bi * ti;
        }
    }
    r
}

fn objective(gens: &[Vec<f64>], a: &[f64], b: &[f64]) -> f64 {
    let r = residual(gens, a, b);
    0.5 * dot(&r, &r)
}

const FISTA_ITERS: usize = 5000;
const KKT_TOL: f64 = 1e-13;

/// Minimizes `½‖a − Σ b_i t_i‖²` over `b ∈ [0,1]^r` by accelerated projected gradient,
/// followed by an active-set refinement on the free coordinates.
pub fn box_least_squares(gens: &[Vec<f64>], a: &[f64]) -> (f64, Vec<f64>) {
    let r = gens.len();
    if r == 0 {
        return (norm2(a), Vec::new());
    }
    let gram = nalgebra::DMatrix::from_fn(r, r, |i, j| dot(&gens[i], &gens[j]));
    let lip = gram
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(0.0, f64::max);
    if lip == 0.0 {
        return (norm2(a), vec![0.0; r]);
    }
    let clamp = |x: f64| x.clamp(0.0, 1.0);
    let grad = |b: &[f64]| -> Vec<f64> {
        let res = residual(gens, a, b);
        gens.iter().map(|t| -dot(t, &res)).collect()
    };
    let mut x = vec![0.5; r];
    let mut y = x.clone();
    let mut theta = 1.0f64;
    for _ in 0..FISTA_ITERS {
        let g = grad(&y);
        let next: Vec<f64> = y
            .iter()
            .zip(&g)
            .map(|(yi, gi)| clamp(yi - gi / lip))
            .collect();
        let moved: f64 = next
            .iter()
            .zip(&x)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max);
        let restart = next
            .iter()
            .zip(&x)
            .zip(&g)
            .map(|((p, q), gi)| gi * (p - q))
            .sum::<f64>()
            > 0.0;
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        y = if restart {
            theta = 1.0;
            next.clone()
        } else {
            let beta = (theta - 1.0) / theta_next;
            theta = theta_next;
            next.iter()
                .zip(&x)
                .map(|(p, q)| p + beta * (p - q))
                .collect()
        };
        x = next;
        if moved < 1e-15 {
            break;
        }
    }
    let polished = active_set_polish(gens, a, x.clone());
    let best = if objective(gens, a, &polished) <= objective(gens, a, &x) {
        polished
    } else {
        x
    };
    let d = norm2(&residual(gens, a, &best));
    (d, best)
}

fn active_set_polish(gens: &[Vec<f64>], a: &[f64], mut b: Vec<f64>) -> Vec<f64> {
    let r = gens.len();
    let dim = a.len();
    let scale = gens.iter().map(|t| norm2(t)).fold(0.0, f64::max) * norm2(a).max(1.0);
    for _ in 0..(4 * r + 20) {
        let res = residual(gens, a, &b);
        let g: Vec<f64> = gens.iter().map(|t| -dot(t, &res)).collect();
        let tol = KKT_TOL * scale.max(1e-300);
        let free: Vec<usize> = (0..r)
            .filter(|&i| {
                (b[i] > 0.0 && b[i] < 1.0)
                    || (b[i] <= 0.0 && g[i] < -tol)
                    || (b[i] >= 1.0 && g[i] > tol)
            })
            .collect();
        if free.iter().all(|&i| g[i].abs() <= tol) {
            break;
        }
        let mut target = a.to_vec();
        for i in 0..r {
            if free.binary_search(&i).is_err() {
                for (tj, ti) in target.iter_mut().zip(&gens[i]) {
                    *tj -= b[i] * ti;
                }
            }
        }
        let m = nalgebra::DMatrix::from_fn(dim, free.len(), |row, col| gens[free[col]][row]);
        let rhs = nalgebra::DVector::from_column_slice(&target);
        let Ok(sol) = m.clone().svd(true, true).solve(&rhs, 1e-12) else {
            break;
        };
        let mut step = 1.0f64;
        for (k, &i) in free.iter().enumerate() {
            let dir = sol[k] - b[i];
            if sol[k] > 1.0 && dir > 0.0 {
                step = step.min((1.0 - b[i]) / dir);
            } else if sol[k] < 0.0 && dir < 0.0 {
                step = step.min(-b[i] / dir);
            }
        }
        let step = step.max(0.0);
        for (k, &i) in free.iter().enumerate() {
            b[i] = (b[i] + step * (sol[k] - b[i])).clamp(0.0, 1.0);
            if step < 1.0 {
                if (b[i] - 1.0).abs() < 1e-14 {
                    b[i] = 1.0;
                } else if b[i].abs() < 1e-14 {
                    b[i] = 0.0;
                }
            }
        }
    }
    b
}

/// Largest distance from a vertex of `from` to the body `to`.
pub fn one_sided_distance(from: &Zonotope, to: &Zonotope, budget: f64) -> Result<f64> {
    let verts = from.vertices(budget)?;
    Ok(verts
        .par_iter()
        .map(|v| to.distance(v).0)
        .reduce(|| 0.0, f64::max))
}

/// Euclidean Hausdorff distance between two zonotopes, by vertex enumeration of each body and
/// projection onto the other.
pub fn zonotope_hausdorff(z1: &Zonotope, z2: &Zonotope, budget: f64) -> Result<f64> {
    if z1.dim != z2.dim {
        return Err(invalid("zonotopes live in different dimensions"));
    }
    Ok(one_sided_distance(z1, z2, budget)?.max(one_sided_distance(z2, z1, budget)?))
}

/// The Frank-Wolfe step for `α = 1`, `p = 2` written as a Hausdorff distance between the
/// zonotopes generated by `t_i = |y_i| z_i / R` for `y_i ≥ 0` and for `y_i < 0`. The result
/// equals `n` times the oracle value.
pub fn fw_step_as_hausdorff(zs: &[Vec<f64>], y: &[f64], radius: f64, budget: f64) -> Result<f64> {
    if zs.len() != y.len() || zs.is_empty() {
        return Err(invalid("need one label per point and at least one point"));
    }
    let dim = zs[0].len();
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for (z, yi) in zs.iter().zip(y) {
        let t: Vec<f64> = z.iter().map(|x| yi.abs() * x / radius).collect();
        if *yi >= 0.0 {
            pos.push(t);
        } else {
            neg.push(t);
        }
    }
    zonotope_hausdorff(&Zonotope::new(pos, dim)?, &Zonotope::new(neg, dim)?, budget)
}

/// Hausdorff distance between two convex bodies known through their support functions, as
/// the largest `|h₁(w) − h₂(w)|` over unit directions of the dual norm `q* = q/(q−1)`.
/// Uses a deterministic direction set of about `samples` points followed by local
/// refinement; supports dimensions 1 to 3.
pub fn hausdorff_by_directions(
    h1: &(dyn Fn(&[f64]) -> f64 + Sync),
    h2: &(dyn Fn(&[f64]) -> f64 + Sync),
    dim: usize,
    q: f64,
    samples: usize,
) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(invalid("q must be at least 1"));
    }
    let q_dual = if q == 1.0 {
        f64::INFINITY
    } else if q.is_infinite() {
        1.0
    } else {
        q / (q - 1.0)
    };
    let to_dir = |x: &[f64]| -> Vec<f64> {
        crate::linalg::normalize_p(x, q_dual).unwrap_or_else(|| x.to_vec())
    };
    let gap = |x: &[f64]| -> f64 {
        let w = to_dir(x);
        (h1(&w) - h2(&w)).abs()
    };
    match dim {
        1 => Ok(gap(&[1.0]).max(gap(&[-1.0]))),
        2 => {
            let m = samples.max(8);
            let ang = |k: f64| std::f64::consts::TAU * k / m as f64;
            let at = |th: f64| gap(&[th.cos(), th.sin()]);
            let vals: Vec<f64> = (0..m).into_par_iter().map(|k| at(ang(k as f64))).collect();
            let mut idx: Vec<usize> = (0..m).collect();
            idx.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
            let best = idx
                .iter()
                .take(16)
                .map(|&k| golden_max(&at, ang(k as f64 - 1.0), ang(k as f64 + 1.0)))
                .fold(vals[idx[0]], f64::max);
            Ok(best)
        }
        3 => {
            let m = samples.max(16);
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            let point = |k: usize| -> Vec<f64> {
                let z = 1.0 - 2.0 * (k as f64 + 0.5) / m as f64;
                let r = (1.0 - z * z).max(0.0).sqrt();
                let th = golden * k as f64;
                vec![r * th.cos(), r * th.sin(), z]
            };
            let vals: Vec<f64> = (0..m).into_par_iter().map(|k| gap(&point(k))).collect();
            let mut idx: Vec<usize> = (0..m).collect();
            idx.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
            let spacing = (4.0 * std::f64::consts::PI / m as f64).sqrt();
            let best = idx
                .iter()
                .take(16)
                .map(|&k| pattern_search_max(&gap, point(k), spacing))
                .fold(vals[idx[0]], f64::max);
            Ok(best)
        }
        _ => Err(invalid("direction sampling supports dimensions 1 to 3")),
    }
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    let mut best = f1.max(f2).max(f(lo)).max(f(hi));
    for _ in 0..100 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        }
        best = best.max(f1).max(f2);
        if hi - lo < 1e-15 {
            break;
        }
    }
    best
}

fn pattern_search_max(f: &dyn Fn(&[f64]) -> f64, start: Vec<f64>, spacing: f64) -> f64 {
    let mut x = start;
    let mut fx = f(&x);
    let mut h = spacing;
    while h > 1e-13 {
        let mut improved = false;
        for axis in 0..x.len() {
            for s in [1.0, -1.0] {
                let mut y = x.clone();
                y[axis] += s * h;
                let fy = f(&y);
                if fy > fx {
                    x = y;
                    fx = fy;
                    improved = true;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    fx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{rng_from_seed, sample_gaussian};

    const B: f64 = 1e7;

    #[test]
    fn support_examples() {
        let z = Zonotope::new(vec![vec![1.0, 0.0]], 2).unwrap();
        assert_eq!(z.support(&[1.0, 0.0]), 1.0);
        assert_eq!(z.support(&[-1.0, 0.0]), 0.0);
        assert_eq!(z.support(&[3.0, 0.0]), 3.0 * z.support(&[1.0, 0.0]));
        let z2 = Zonotope::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], 2).unwrap();
        assert_eq!(z2.support(&[1.0, 1.0]), 2.0);
    }

    #[test]
    fn hausdorff_examples() {
        let seg = Zonotope::new(vec![vec![1.0, 0.0]], 2).unwrap();
        let origin = Zonotope::new(vec![], 2).unwrap();
        assert_eq!(zonotope_hausdorff(&seg, &seg, B).unwrap(), 0.0);
        assert!((zonotope_hausdorff(&seg, &origin, B).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hausdorff_matches_direction_sampling_in_2d() {
        let mut rng = rng_from_seed(31);
        let g1: Vec<Vec<f64>> = (0..5).map(|_| sample_gaussian(&mut rng, 2)).collect();
        let g2: Vec<Vec<f64>> = (0..5).map(|_| sample_gaussian(&mut rng, 2)).collect();
        let z1 = Zonotope::new(g1, 2).unwrap();
        let z2 = Zonotope::new(g2, 2).unwrap();
        let h = zonotope_hausdorff(&z1, &z2, B).unwrap();
        let s = hausdorff_by_directions(&|w| z1.support(w), &|w| z2.support(w), 2, 2.0, 100_000)
            .unwrap();
        assert!((h - s).abs() < 1e-6, "{h} vs {s}");
    }

    #[test]
    fn fw_step_equals_scaled_exact_oracle() {
        use crate::oracle::{oracle_exact, OracleProblem, DEFAULT_BUDGET};
        let mut rng = rng_from_seed(12);
        for _ in 0..5 {
            let zs: Vec<Vec<f64>> = (0..6)
                .map(|_| {
                    let mut z = sample_gaussian(&mut rng, 2);
                    z.push(1.0);
                    z
                })
                .collect();
            let y = sample_gaussian(&mut rng, 6);
            let h = fw_step_as_hausdorff(&zs, &y, 1.0, B).unwrap();
            let p = OracleProblem::new(&zs, &y, 1, 2.0, 1.0).unwrap();
            let o = 6.0 * oracle_exact(&p, DEFAULT_BUDGET).unwrap().value;
            assert!((h - o).abs() < 1e-8 * o.max(1.0), "{h} vs {o}");
        }
    }

    #[test]
    fn zero_labels_give_zero_distance() {
        let zs = vec![vec![1.0, 1.0], vec![-1.0, 1.0]];
        assert_eq!(fw_step_as_hausdorff(&zs, &[0.0, 0.0], 1.0, B).unwrap(), 0.0);
    }

    #[test]
    fn budget_is_enforced() {
        let gens: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![1.0, i as f64, (i * i) as f64])
            .collect();
        let z = Zonotope::new(gens, 3).unwrap();
        assert!(matches!(z.vertices(10.0), Err(Error::BudgetExceeded(_))));
    }

    #[test]
    fn box_least_squares_interior_and_clamped() {
        let gens = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let (d, b) = box_least_squares(&gens, &[0.25, 0.75]);
        assert!(d < 1e-12);
        assert!((b[0] - 0.25).abs() < 1e-12 && (b[1] - 0.75).abs() < 1e-12);
        let (d, _) = box_least_squares(&gens, &[2.0, -1.0]);
        assert!((d - 2f64.sqrt()).abs() < 1e-12);
    }
}
