//! Ellipsoids `{x : (x − a)ᵀA⁻¹(x − a) ≤ 1}`: minimum-volume enclosing ellipsoids and
//! Hausdorff distances by a one-dimensional dual search.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{dot, norm2, span_basis, sym_eigen, sym_sqrt};
use crate::Error;

/// An ellipsoid with center `a` and symmetric positive semidefinite shape `A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    /// Center `a`.
    pub center: Vec<f64>,
    /// Shape matrix `A`, row by row.
    pub shape: Vec<Vec<f64>>,
}

impl Ellipsoid {
    /// Builds an ellipsoid, checking dimensions, finiteness and symmetry.
    pub fn new(center: Vec<f64>, shape: Vec<Vec<f64>>) -> Result<Self> {
        let d = center.len();
        if d == 0 || shape.len() != d || shape.iter().any(|r| r.len() != d) {
            return Err(invalid("shape must be a square matrix matching the center"));
        }
        if center
            .iter()
            .chain(shape.iter().flatten())
            .any(|x| !x.is_finite())
        {
            return Err(invalid("ellipsoid entries must be finite"));
        }
        let scale = shape
            .iter()
            .flatten()
            .map(|x| x.abs())
            .fold(0.0, f64::max)
            .max(1.0);
        for i in 0..d {
            for j in 0..i {
                if (shape[i][j] - shape[j][i]).abs() > 1e-12 * scale {
                    return Err(invalid("shape matrix must be symmetric"));
                }
            }
        }
        Ok(Self { center, shape })
    }

    /// Ball of radius `r` around `center`.
    pub fn ball(center: Vec<f64>, r: f64) -> Result<Self> {
        let d = center.len();
        let shape = (0..d)
            .map(|i| (0..d).map(|j| if i == j { r * r } else { 0.0 }).collect())
            .collect();
        Self::new(center, shape)
    }

    /// Dimension.
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Shape as a dense matrix.
    pub fn shape_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| self.shape[i][j])
    }

    /// Support function `h(w) = aᵀw + ‖A^{1/2}w‖₂`.
    pub fn support(&self, w: &[f64]) -> f64 {
        let w = DVector::from_column_slice(w);
        let quad = w.dot(&(self.shape_matrix() * &w)).max(0.0);
        dot(&self.center, w.as_slice()) + quad.sqrt()
    }

    /// Whether `x` satisfies `(x − a)ᵀA⁻¹(x − a) ≤ 1 + tol`. Requires a full-rank shape.
    pub fn contains(&self, x: &[f64], tol: f64) -> Result<bool> {
        Ok(self.gauge(x)? <= 1.0 + tol)
    }

    fn gauge(&self, x: &[f64]) -> Result<f64> {
        let inv = self
            .shape_matrix()
            .cholesky()
            .ok_or_else(|| invalid("shape matrix is not positive definite"))?;
        let diff =
            DVector::from_iterator(self.dim(), x.iter().zip(&self.center).map(|(p, q)| p - q));
        Ok(diff.dot(&inv.solve(&diff)))
    }

    fn check_definite(&self) -> Result<Vec<f64>> {
        let (vals, _) = sym_eigen(&self.shape_matrix());
        let top = vals.last().copied().unwrap_or(0.0);
        if !(vals[0] > 1e-14 * top.max(f64::MIN_POSITIVE)) {
            return Err(invalid("shape matrix must be positive definite"));
        }
        Ok(vals)
    }
}

const MVEE_MAX_ITERS: usize = 200_000;

/// Minimum-volume enclosing ellipsoid by Khachiyan's barycentric coordinate ascent. Stops
/// once `max_j q_jᵀX⁻¹q_j ≤ (d+1)(1+tol)`, which bounds the volume ratio to the optimum, then
/// rescales so every point lies inside.
pub fn mvee(points: &[Vec<f64>], tol: f64) -> Result<Ellipsoid> {
    if !(tol > 0.0) {
        return Err(invalid("tol must be positive"));
    }
    let m = points.len();
    let d = points.first().map_or(0, |p| p.len());
    if d == 0
        || points
            .iter()
            .any(|p| p.len() != d || p.iter().any(|x| !x.is_finite()))
    {
        return Err(invalid(
            "points must be finite vectors of one positive dimension",
        ));
    }
    if m < d + 1 {
        return Err(Error::RankDeficient(format!(
            "{m} points cannot affinely span R^{d}"
        )));
    }
    let diffs: Vec<Vec<f64>> = points[1..]
        .iter()
        .map(|p| p.iter().zip(&points[0]).map(|(a, b)| a - b).collect())
        .collect();
    if span_basis(&diffs, d, 1e-10).len() < d {
        return Err(Error::RankDeficient(format!(
            "points do not affinely span R^{d}"
        )));
    }
    let q = DMatrix::from_fn(d + 1, m, |i, j| if i < d { points[j][i] } else { 1.0 });
    let mut u = vec![1.0 / m as f64; m];
    let target = (d + 1) as f64;
    let mut converged = false;
    for _ in 0..MVEE_MAX_ITERS {
        let x = &q * DMatrix::from_diagonal(&DVector::from_column_slice(&u)) * q.transpose();
        let chol = x
            .cholesky()
            .ok_or_else(|| Error::NumericalFailure("moment matrix lost definiteness".into()))?;
        let lev: Vec<f64> = (0..m)
            .map(|j| {
                let col = q.column(j).into_owned();
                col.dot(&chol.solve(&col))
            })
            .collect();
        let (j_up, m_up) = (0..m)
            .map(|j| (j, lev[j]))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty");
        if m_up <= target * (1.0 + tol) {
            converged = true;
            break;
        }
        let (j_down, m_down) = (0..m)
            .filter(|&j| u[j] > 0.0)
            .map(|j| (j, lev[j]))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("weights sum to one");
        let (j, step) = if target - m_down > m_up - target && u[j_down] < 1.0 {
            let floor = -u[j_down] / (1.0 - u[j_down]);
            (
                j_down,
                ((m_down - target) / (target * (m_down - 1.0))).max(floor),
            )
        } else {
            (j_up, (m_up - target) / (target * (m_up - 1.0)))
        };
        for ui in u.iter_mut() {
            *ui *= 1.0 - step;
        }
        u[j] = (u[j] + step).max(0.0);
    }
    if !converged {
        return Err(Error::NonConverged(format!(
            "Khachiyan iteration did not reach tol {tol}"
        )));
    }
    let mut center = vec![0.0; d];
    for (p, ui) in points.iter().zip(&u) {
        for (c, x) in center.iter_mut().zip(p) {
            *c += ui * x;
        }
    }
    let mut shape = DMatrix::zeros(d, d);
    for (p, ui) in points.iter().zip(&u) {
        let v = DVector::from_iterator(d, p.iter().zip(&center).map(|(a, b)| a - b));
        shape += &v * v.transpose() * *ui;
    }
    shape *= d as f64;
    let mut e = Ellipsoid::new(
        center,
        (0..d)
            .map(|i| shape.row(i).iter().cloned().collect())
            .collect(),
    )?;
    let worst = points
        .iter()
        .map(|p| e.gauge(p))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    if worst > 1.0 {
        for row in e.shape.iter_mut() {
            for x in row.iter_mut() {
                *x *= worst;
            }
        }
    }
    Ok(e)
}

const LAMBDA_GRID: usize = 10_000;
const LAMBDA_GRID_DECADES: f64 = 12.0;
const REFINED_PEAKS: usize = 8;

/// Hausdorff distance between two ellipsoids with positive definite shapes.
///
/// The farthest point of `E₁` from `E₂` solves
/// `½D² = max_{λ≥0} max_{‖u‖≤1} (λ/2)(cᵀ(B+λI)⁻¹c − 1)` with `c = a − b + A^{1/2}u`. For fixed
/// `λ` the inner problem is a trust-region maximization solved by bisection on its
/// multiplier `μ`. The outer search scans a logarithmic grid of `λ` and refines the best
/// grid points by golden-section search.
pub fn ellipsoid_hausdorff(e1: &Ellipsoid, e2: &Ellipsoid) -> Result<f64> {
    if e1.dim() != e2.dim() {
        return Err(invalid("ellipsoids live in different dimensions"));
    }
    e1.check_definite()?;
    e2.check_definite()?;
    Ok(one_sided(e1, e2).max(one_sided(e2, e1)))
}

/// Largest distance from a point of `from` to the body `to`.
pub fn ellipsoid_one_sided(from: &Ellipsoid, to: &Ellipsoid) -> Result<f64> {
    if from.dim() != to.dim() {
        return Err(invalid("ellipsoids live in different dimensions"));
    }
    from.check_definite()?;
    to.check_definite()?;
    Ok(one_sided(from, to))
}

struct DualSearch {
    a_half: DMatrix<f64>,
    diff: DVector<f64>,
    b_vals: Vec<f64>,
    b_vecs: DMatrix<f64>,
}

impl DualSearch {
    /// Value of the inner maximization over `u` for a fixed `λ > 0`.
    fn value(&self, lambda: f64) -> f64 {
        let d = self.diff.len();
        let k_diag = DVector::from_iterator(d, self.b_vals.iter().map(|b| lambda / (b + lambda)));
        let k = &self.b_vecs * DMatrix::from_diagonal(&k_diag) * self.b_vecs.transpose();
        let m = &self.a_half * &k * &self.a_half;
        let q = &self.a_half * &k * &self.diff;
        let constant = 0.5 * self.diff.dot(&(&k * &self.diff)) - 0.5 * lambda;
        let (m_vals, m_vecs) = sym_eigen(&m);
        let qt: Vec<f64> = (m_vecs.transpose() * q).iter().cloned().collect();
        constant + trust_region_max(&m_vals, &qt)
    }
}

/// Maximum of `½uᵀMu + qᵀu` over the unit ball, with `M` given in its eigenbasis.
fn trust_region_max(m: &[f64], q: &[f64]) -> f64 {
    let d = m.len();
    let top = m[d - 1];
    let qn = norm2(q);
    let scale = top.abs().max(qn).max(f64::MIN_POSITIVE);
    let value = |u: &[f64]| -> f64 { (0..d).map(|i| 0.5 * m[i] * u[i] * u[i] + q[i] * u[i]).sum() };
    let in_top = |i: usize| top - m[i] <= 1e-12 * scale;
    let q_top: f64 = (0..d)
        .filter(|&i| in_top(i))
        .map(|i| q[i] * q[i])
        .sum::<f64>()
        .sqrt();
    if q_top <= 1e-14 * scale {
        let rest: Vec<f64> = (0..d)
            .map(|i| if in_top(i) { 0.0 } else { q[i] / (top - m[i]) })
            .collect();
        let used = dot(&rest, &rest);
        if used <= 1.0 {
            let mut u = rest;
            let k = (0..d)
                .rev()
                .find(|&i| in_top(i))
                .expect("top eigenvalue belongs to the top set");
            u[k] = (1.0 - used).sqrt();
            return value(&u);
        }
    }
    let norm_at = |mu: f64| -> f64 { (0..d).map(|i| (q[i] / (mu - m[i])).powi(2)).sum::<f64>() };
    let mut lo = top;
    let mut hi = top + qn;
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if norm_at(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let u: Vec<f64> = (0..d).map(|i| q[i] / (hi - m[i])).collect();
    value(&u)
}

fn one_sided(from: &Ellipsoid, to: &Ellipsoid) -> f64 {
    let a_mat = from.shape_matrix();
    let a_half = sym_sqrt(&a_mat);
    let (b_vals, b_vecs) = sym_eigen(&to.shape_matrix());
    let diff = DVector::from_iterator(
        from.dim(),
        from.center.iter().zip(&to.center).map(|(p, q)| p - q),
    );
    let a_top = sym_eigen(&a_mat)
        .0
        .last()
        .copied()
        .unwrap_or(0.0)
        .max(0.0)
        .sqrt();
    let hi = (diff.norm() + a_top).powi(2) - b_vals[0];
    if hi <= 0.0 {
        return 0.0;
    }
    let search = DualSearch {
        a_half,
        diff,
        b_vals,
        b_vecs,
    };
    let grid: Vec<f64> = (0..LAMBDA_GRID)
        .map(|k| {
            hi * 10f64.powf(-LAMBDA_GRID_DECADES * (1.0 - k as f64 / (LAMBDA_GRID - 1) as f64))
        })
        .collect();
    let vals: Vec<f64> = grid.par_iter().map(|&l| search.value(l)).collect();
    let mut order: Vec<usize> = (0..LAMBDA_GRID).collect();
    order.sort_by(|&x, &y| vals[y].total_cmp(&vals[x]));
    let mut best = vals[order[0]].max(0.0);
    for &k in order.iter().take(REFINED_PEAKS) {
        let lo = if k == 0 { 0.0 } else { grid[k - 1] };
        let up = grid[(k + 1).min(LAMBDA_GRID - 1)];
        best = best.max(golden_max(|l| search.value(l), lo, up));
    }
    (2.0 * best).sqrt()
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    let mut best = f1.max(f2);
    for _ in 0..200 {
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
        if hi - lo <= 1e-15 * hi.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::hausdorff_by_directions;
    use crate::linalg::{rng_from_seed, sample_gaussian};

    #[test]
    fn identical_bodies() {
        let e = Ellipsoid::new(vec![1.0, -2.0], vec![vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        assert!(ellipsoid_hausdorff(&e, &e).unwrap() < 1e-7);
    }

    #[test]
    fn concentric_balls() {
        let a = Ellipsoid::ball(vec![0.0, 0.0, 0.0], 1.0).unwrap();
        let b = Ellipsoid::ball(vec![0.0, 0.0, 0.0], 3.0).unwrap();
        assert!((ellipsoid_hausdorff(&a, &b).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn translated_balls() {
        let a = Ellipsoid::ball(vec![0.0, 0.0], 1.0).unwrap();
        let b = Ellipsoid::ball(vec![3.0, 4.0], 1.0).unwrap();
        assert!((ellipsoid_hausdorff(&a, &b).unwrap() - 5.0).abs() < 1e-9);
    }

    #[test]
    fn singular_shape_rejected() {
        let a = Ellipsoid::new(vec![0.0, 0.0], vec![vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let b = Ellipsoid::ball(vec![0.0, 0.0], 1.0).unwrap();
        assert!(matches!(
            ellipsoid_hausdorff(&a, &b),
            Err(Error::InvalidArgument(_))
        ));
    }

    fn random_spd(rng: &mut crate::linalg::SeededRng, d: usize) -> Vec<Vec<f64>> {
        let g: Vec<Vec<f64>> = (0..d).map(|_| sample_gaussian(rng, d)).collect();
        (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| dot(&g[i], &g[j]) + if i == j { 0.2 } else { 0.0 })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn matches_support_function_oracle() {
        let mut rng = rng_from_seed(8);
        for d in [2, 3] {
            for _ in 0..3 {
                let e1 =
                    Ellipsoid::new(sample_gaussian(&mut rng, d), random_spd(&mut rng, d)).unwrap();
                let e2 =
                    Ellipsoid::new(sample_gaussian(&mut rng, d), random_spd(&mut rng, d)).unwrap();
                let h = ellipsoid_hausdorff(&e1, &e2).unwrap();
                let s = hausdorff_by_directions(
                    &|w| e1.support(w),
                    &|w| e2.support(w),
                    d,
                    2.0,
                    100_000,
                )
                .unwrap();
                assert!((h - s).abs() < 1e-6, "d={d}: {h} vs {s}");
            }
        }
    }

    #[test]
    fn mvee_of_cross_polytope_is_unit_ball() {
        let d = 3;
        let mut pts = Vec::new();
        for i in 0..d {
            for s in [1.0, -1.0] {
                let mut p = vec![0.0; d];
                p[i] = s;
                pts.push(p);
            }
        }
        let e = mvee(&pts, 1e-9).unwrap();
        for i in 0..d {
            assert!(e.center[i].abs() < 1e-9);
            for j in 0..d {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((e.shape[i][j] - want).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn mvee_rejects_collinear_points() {
        let pts = vec![
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![2.0, 2.0],
            vec![-1.0, -1.0],
        ];
        assert!(matches!(mvee(&pts, 1e-6), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn mvee_contains_inputs() {
        let mut rng = rng_from_seed(4);
        let pts: Vec<Vec<f64>> = (0..30).map(|_| sample_gaussian(&mut rng, 2)).collect();
        let e = mvee(&pts, 1e-7).unwrap();
        for p in &pts {
            assert!(e.contains(p, 1e-9).unwrap());
        }
    }
}
