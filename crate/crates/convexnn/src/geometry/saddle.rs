//! The `α ≥ 2` Frank-Wolfe step written as a saddle problem over nonnegative coefficients.
//!
//! With generators `t_i = |y_i|^{1/α} z_i`, conjugate exponent `β = α/(α−1)` and the
//! identity `(1/α)s₊^α = max_{b≥0} bs − b^β/β`, the one-sided step value
//! `(1/α) max_{‖w‖≤1} Σ_i y_i (wᵀz_i)₊^α` equals
//! `max_{b₊≥0} max_{‖w‖≤1} wᵀT₊ᵀb₊ − ‖b₊‖_β^β/β − (1/α)Σ_{y_i<0}(t_iᵀw)₊^α`.
//! The inner problem in `w` is concave; the outer problem is solved by alternating exact
//! updates of `b₊` and `w` from several starting directions.

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::linalg::{derive_seed, dot, norm2, rng_from_seed, sample_unit_sphere};

const OUTER_ITERS: usize = 2000;
const INNER_ITERS: usize = 5000;

/// Outcome of [`alpha2_saddle`].
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleResult {
    /// Best saddle value found, never negative.
    pub value: f64,
    /// Coefficients `b₊` attaining it, one per point with `y_i > 0`.
    pub b_plus: Vec<f64>,
    /// Maximizing direction `w` with `‖w‖₂ ≤ 1`.
    pub direction: Vec<f64>,
    /// Whether every alternating run met its tolerance.
    pub converged: bool,
    /// Explanation when some run stopped early.
    pub diagnostic: Option<String>,
}

/// Evaluates the saddle value for activation exponent `alpha ≥ 2` from `restarts` random
/// starting directions plus the normalized positive generators.
pub fn alpha2_saddle(
    zs: &[Vec<f64>],
    y: &[f64],
    alpha: u32,
    restarts: usize,
    seed: u64,
) -> Result<SaddleResult> {
    if alpha < 2 {
        return Err(invalid(format!("the saddle form needs α ≥ 2, got {alpha}")));
    }
    if zs.len() != y.len() || zs.is_empty() {
        return Err(invalid("need one label per point and at least one point"));
    }
    let dim = zs[0].len();
    if zs.iter().any(|z| z.len() != dim) || y.iter().any(|v| !v.is_finite()) {
        return Err(invalid(
            "points must share a dimension and labels must be finite",
        ));
    }
    let a = alpha as f64;
    let gen =
        |z: &[f64], yi: f64| -> Vec<f64> { z.iter().map(|x| yi.abs().powf(1.0 / a) * x).collect() };
    let pos: Vec<Vec<f64>> = zs
        .iter()
        .zip(y)
        .filter(|(_, yi)| **yi > 0.0)
        .map(|(z, yi)| gen(z, *yi))
        .collect();
    let neg: Vec<Vec<f64>> = zs
        .iter()
        .zip(y)
        .filter(|(_, yi)| **yi < 0.0)
        .map(|(z, yi)| gen(z, *yi))
        .collect();
    let problem = Saddle {
        pos,
        neg,
        alpha: a,
        dim,
    };

    let mut starts: Vec<Vec<f64>> = problem.pos.iter().filter_map(|t| unit(t)).collect();
    for r in 0..restarts {
        let mut rng = rng_from_seed(derive_seed(seed, r as u64));
        starts.push(sample_unit_sphere(&mut rng, dim));
    }
    let runs: Vec<(f64, Vec<f64>, Vec<f64>, bool)> = starts
        .par_iter()
        .map(|w| problem.alternate(w.clone()))
        .collect();

    let mut best = SaddleResult {
        value: 0.0,
        b_plus: vec![0.0; problem.pos.len()],
        direction: vec![0.0; dim],
        converged: true,
        diagnostic: None,
    };
    let mut stalled = 0;
    for (val, b, w, ok) in runs {
        if !ok {
            stalled += 1;
        }
        if val > best.value {
            best.value = val;
            best.b_plus = b;
            best.direction = w;
        }
    }
    if stalled > 0 {
        best.converged = false;
        best.diagnostic = Some(format!(
            "{stalled} alternating runs stopped after {OUTER_ITERS} rounds"
        ));
    }
    Ok(best)
}

fn unit(v: &[f64]) -> Option<Vec<f64>> {
    let n = norm2(v);
    (n > 0.0).then(|| v.iter().map(|x| x / n).collect())
}

struct Saddle {
    pos: Vec<Vec<f64>>,
    neg: Vec<Vec<f64>>,
    alpha: f64,
    dim: usize,
}

impl Saddle {
    fn beta(&self) -> f64 {
        self.alpha / (self.alpha - 1.0)
    }

    fn best_b(&self, w: &[f64]) -> Vec<f64> {
        self.pos
            .iter()
            .map(|t| dot(t, w).max(0.0).powf(self.alpha - 1.0))
            .collect()
    }

    fn penalty(&self, w: &[f64]) -> f64 {
        self.neg
            .iter()
            .map(|t| dot(t, w).max(0.0).powf(self.alpha))
            .sum::<f64>()
            / self.alpha
    }

    fn joint(&self, b: &[f64], w: &[f64]) -> f64 {
        let beta = self.beta();
        let lin: f64 = self.pos.iter().zip(b).map(|(t, bi)| bi * dot(t, w)).sum();
        lin - b.iter().map(|bi| bi.powf(beta)).sum::<f64>() / beta - self.penalty(w)
    }

    fn pull(&self, b: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.dim];
        for (t, bi) in self.pos.iter().zip(b) {
            for (pj, tj) in p.iter_mut().zip(t) {
                *pj += bi * tj;
            }
        }
        p
    }

    /// Maximizes `wᵀp − penalty(w)` over the unit ball by projected gradient ascent with
    /// backtracking, warm-started at `w`.
    fn inner(&self, p: &[f64], mut w: Vec<f64>) -> Vec<f64> {
        if self.neg.is_empty() {
            return unit(p).unwrap_or(w);
        }
        let obj = |w: &[f64]| dot(w, p) - self.penalty(w);
        let grad = |w: &[f64]| -> Vec<f64> {
            let mut g = p.to_vec();
            for t in &self.neg {
                let s = dot(t, w).max(0.0).powf(self.alpha - 1.0);
                for (gj, tj) in g.iter_mut().zip(t) {
                    *gj -= s * tj;
                }
            }
            g
        };
        let project = |v: Vec<f64>| -> Vec<f64> {
            let n = norm2(&v);
            if n > 1.0 {
                v.into_iter().map(|x| x / n).collect()
            } else {
                v
            }
        };
        w = project(w);
        let mut step = 1.0;
        let mut f = obj(&w);
        for _ in 0..INNER_ITERS {
            let g = grad(&w);
            let mut accepted = false;
            while step > 1e-18 {
                let trial = project(w.iter().zip(&g).map(|(a, b)| a + step * b).collect());
                let ft = obj(&trial);
                let moved: f64 = trial.iter().zip(&w).map(|(a, b)| (a - b).powi(2)).sum();
                if ft >= f + moved / (2.0 * step) - 1e-16 * f.abs() {
                    let done = moved.sqrt() < 1e-14;
                    w = trial;
                    f = ft;
                    accepted = true;
                    step *= 2.0;
                    if done {
                        return w;
                    }
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        w
    }

    fn alternate(&self, mut w: Vec<f64>) -> (f64, Vec<f64>, Vec<f64>, bool) {
        let mut b = self.best_b(&w);
        let mut val = self.joint(&b, &w);
        for _ in 0..OUTER_ITERS {
            w = self.inner(&self.pull(&b), w);
            b = self.best_b(&w);
            let next = self.joint(&b, &w);
            let gain = next - val;
            val = val.max(next);
            if gain <= 1e-15 * val.abs().max(1e-300) {
                return (val.max(0.0), b, w, true);
            }
        }
        (val.max(0.0), b, w, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_labels_give_zero() {
        let zs = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let r = alpha2_saddle(&zs, &[0.0, 0.0], 2, 4, 0).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn single_positive_point() {
        let r = alpha2_saddle(&[vec![1.0, 0.0]], &[1.0], 2, 4, 0).unwrap();
        assert!((r.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn agrees_with_restarts_oracle() {
        use crate::linalg::sample_gaussian;
        use crate::oracle::{oracle_restarts, OracleProblem};
        let mut rng = rng_from_seed(5);
        let zs: Vec<Vec<f64>> = (0..6)
            .map(|_| {
                let mut z = sample_gaussian(&mut rng, 2);
                z.push(1.0);
                z
            })
            .collect();
        let y = sample_gaussian(&mut rng, 6);
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        let up = alpha2_saddle(&zs, &y, 2, 32, 1).unwrap().value;
        let down = alpha2_saddle(&zs, &neg, 2, 32, 1).unwrap().value;
        let p = OracleProblem::new(&zs, &y, 2, 2.0, 1.0).unwrap();
        let o = 6.0 * oracle_restarts(&p, 64, 3).unwrap().value;
        assert!(
            (2.0 * up.max(down) - o).abs() <= 1e-4,
            "{} vs {o}",
            2.0 * up.max(down)
        );
    }

    #[test]
    fn rejects_alpha_one() {
        assert!(alpha2_saddle(&[vec![1.0, 0.0]], &[1.0], 1, 4, 0).is_err());
    }
}
