//! A small dense conic solver based on the alternating direction method of multipliers.
//!
//! Problems take the form `min cᵀx` subject to `Ax + s = b` with `s` in a product of
//! zero, nonnegative, second-order and positive semidefinite cones. Semidefinite blocks
//! are stored as scaled lower triangles (off-diagonal entries times `√2`), so the
//! Euclidean inner product of two stored blocks equals the trace inner product.
//! The multiplier iterates stay inside the dual cone, which yields an upper bound on the
//! optimal value of the maximization `max −cᵀx` whenever the feasible set is bounded.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::linalg::sym_eigen;

/// One block of the product cone, sized by its number of rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    /// Equality rows (`s = 0`).
    Zero(usize),
    /// Inequality rows (`s ≥ 0`).
    NonNeg(usize),
    /// Second-order cone `{(t, z) : ‖z‖₂ ≤ t}` with the given total size.
    Soc(usize),
    /// Positive semidefinite matrices of the given order, stored as scaled lower triangles.
    Psd(usize),
}

impl Cone {
    /// Number of rows occupied by the block.
    pub fn rows(&self) -> usize {
        match *self {
            Cone::Zero(m) | Cone::NonNeg(m) | Cone::Soc(m) => m,
            Cone::Psd(k) => k * (k + 1) / 2,
        }
    }
}

/// Position of entry `(i, j)` of an order-`k` symmetric matrix in its stored lower triangle.
pub fn svec_index(k: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i >= j { (i, j) } else { (j, i) };
    j * k - j * (j + 1) / 2 + i
}

/// Stores a symmetric matrix as its scaled lower triangle.
pub fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let k = m.nrows();
    let mut out = vec![0.0; k * (k + 1) / 2];
    for j in 0..k {
        for i in j..k {
            let scale = if i == j {
                1.0
            } else {
                std::f64::consts::SQRT_2
            };
            out[svec_index(k, i, j)] = scale * 0.5 * (m[(i, j)] + m[(j, i)]);
        }
    }
    out
}

/// Rebuilds the symmetric matrix of order `k` from its scaled lower triangle.
pub fn smat(v: &[f64], k: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(k, k);
    for j in 0..k {
        for i in j..k {
            let x = v[svec_index(k, i, j)];
            if i == j {
                m[(i, i)] = x;
            } else {
                m[(i, j)] = x / std::f64::consts::SQRT_2;
                m[(j, i)] = m[(i, j)];
            }
        }
    }
    m
}

/// Euclidean projection onto the second-order cone, in place.
pub fn project_soc(v: &mut [f64]) {
    let t = v[0];
    let nz = v[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
    if nz <= t {
        return;
    }
    if nz <= -t {
        v.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let a = 0.5 * (t + nz);
    v[0] = a;
    for x in &mut v[1..] {
        *x *= a / nz;
    }
}

/// Euclidean projection onto the semidefinite cone of order `k`, in place on the stored triangle.
pub fn project_psd(v: &mut [f64], k: usize) {
    let m = smat(v, k);
    let (vals, vecs) = sym_eigen(&m);
    if vals[0] >= 0.0 {
        return;
    }
    let d = DVector::from_iterator(k, vals.iter().map(|x| x.max(0.0)));
    let p = &vecs * DMatrix::from_diagonal(&d) * vecs.transpose();
    v.copy_from_slice(&svec(&p));
}

/// Smallest eigenvalue of the stored symmetric matrix of order `k`.
pub fn min_eigenvalue(v: &[f64], k: usize) -> f64 {
    sym_eigen(&smat(v, k)).0[0]
}

/// A conic program `min cᵀx` subject to `Ax + s = b`, `s ∈ K`.
#[derive(Debug, Clone)]
pub struct ConicProgram {
    /// Objective coefficients.
    pub c: Vec<f64>,
    /// Constraint matrix, one row per slack entry.
    pub a: DMatrix<f64>,
    /// Right-hand side.
    pub b: Vec<f64>,
    /// Cone blocks in row order.
    pub cones: Vec<Cone>,
}

/// Iteration controls for [`ConicProgram::solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmSettings {
    /// Maximum number of iterations.
    pub max_iter: usize,
    /// Relative tolerance on primal residual, dual residual and duality gap.
    pub tol: f64,
}

impl Default for AdmmSettings {
    fn default() -> Self {
        Self {
            max_iter: 200_000,
            tol: 1e-6,
        }
    }
}

/// Iterates and residuals returned by [`ConicProgram::solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution {
    /// Primal variables.
    pub x: Vec<f64>,
    /// Slack, exactly inside the cone.
    pub s: Vec<f64>,
    /// Multipliers, inside the dual cone.
    pub lambda: Vec<f64>,
    /// Iterations performed.
    pub iterations: usize,
    /// `‖Ax + s − b‖∞`.
    pub primal_residual: f64,
    /// `‖c + Aᵀλ‖∞`.
    pub dual_residual: f64,
    /// `|cᵀx + bᵀλ|`.
    pub gap: f64,
    /// Whether all three measures met the tolerance.
    pub converged: bool,
    /// Whether the run stopped because the dual bound fell below the requested threshold.
    pub dominated: bool,
}

/// Stops a solve once [`ConicProgram::dual_bound`] drops to `threshold`.
#[derive(Debug, Clone, Copy)]
pub struct EarlyStop<'a> {
    /// Bounds on `|x_j|` used by the certificate.
    pub x_bounds: &'a [f64],
    /// Certificate level at which the run may stop.
    pub threshold: f64,
}

const OVER_RELAXATION: f64 = 1.6;
const PROXIMAL: f64 = 1e-6;
const CHECK_EVERY: usize = 10;
const ADAPT_EVERY: usize = 1000;

impl ConicProgram {
    /// Checks that the dimensions of `c`, `A`, `b` and the cones agree.
    pub fn validate(&self) -> Result<()> {
        let rows: usize = self.cones.iter().map(Cone::rows).sum();
        if rows != self.a.nrows() || rows != self.b.len() || self.c.len() != self.a.ncols() {
            return Err(invalid(format!(
                "conic program shape mismatch: {} cone rows, A is {}x{}, |b| = {}, |c| = {}",
                rows,
                self.a.nrows(),
                self.a.ncols(),
                self.b.len(),
                self.c.len()
            )));
        }
        Ok(())
    }

    /// Projects `v` onto the product cone.
    pub fn project(&self, v: &mut [f64]) {
        let mut at = 0;
        for cone in &self.cones {
            let m = cone.rows();
            let block = &mut v[at..at + m];
            match *cone {
                Cone::Zero(_) => block.iter_mut().for_each(|x| *x = 0.0),
                Cone::NonNeg(_) => block.iter_mut().for_each(|x| *x = x.max(0.0)),
                Cone::Soc(_) => project_soc(block),
                Cone::Psd(k) => project_psd(block, k),
            }
            at += m;
        }
    }

    /// Upper bound on `max −cᵀx` over the feasible set, valid for multipliers `lambda` in the
    /// dual cone when every feasible `x` satisfies `|x_j| ≤ x_bounds[j]`.
    pub fn dual_bound(&self, lambda: &[f64], x_bounds: &[f64]) -> f64 {
        let l = DVector::from_column_slice(lambda);
        let r = self.a.tr_mul(&l) + DVector::from_column_slice(&self.c);
        let bl: f64 = self.b.iter().zip(lambda).map(|(b, l)| b * l).sum();
        bl + r
            .iter()
            .zip(x_bounds)
            .map(|(r, b)| r.abs() * b)
            .sum::<f64>()
    }

    /// Runs over-relaxed ADMM with residual balancing of the penalty parameter.
    pub fn solve(&self, settings: AdmmSettings) -> Result<ConicSolution> {
        self.solve_until(settings, None)
    }

    /// Like [`ConicProgram::solve`], additionally stopping when the certificate of `early`
    /// reaches its threshold.
    pub fn solve_until(
        &self,
        settings: AdmmSettings,
        early: Option<EarlyStop<'_>>,
    ) -> Result<ConicSolution> {
        self.validate()?;
        let (m, n) = self.a.shape();
        let scale = self.row_scaling();
        let a = DMatrix::from_fn(m, n, |i, j| scale[i] * self.a[(i, j)]);
        let b = DVector::from_iterator(m, self.b.iter().zip(&scale).map(|(b, s)| b * s));
        let c = DVector::from_column_slice(&self.c);
        let ata = a.tr_mul(&a);
        let factor = |rho: f64| {
            let k = &ata * rho + DMatrix::identity(n, n) * PROXIMAL;
            k.cholesky().ok_or_else(|| {
                Error::NumericalFailure("ADMM system is not positive definite".into())
            })
        };
        let mut rho = 1.0;
        let mut chol = factor(rho)?;
        let mut x = DVector::zeros(n);
        let mut s = DVector::zeros(m);
        let mut lam = DVector::zeros(m);
        let b_norm = b.amax();
        let c_norm = c.amax();
        let mut out = None;
        for it in 1..=settings.max_iter {
            let rhs = &x * PROXIMAL - &c - a.tr_mul(&((&s - &b) * rho + &lam));
            x = chol.solve(&rhs);
            let ax = &a * &x;
            let axr = &ax * OVER_RELAXATION + (&b - &s) * (1.0 - OVER_RELAXATION);
            let mut w = &b - &axr - &lam / rho;
            let w_copy = w.clone();
            self.project(w.as_mut_slice());
            s = w;
            lam = (&s - &w_copy) * rho;
            if it % CHECK_EVERY != 0 && it != settings.max_iter {
                continue;
            }
            let rp_vec = &ax + &s - &b;
            let atl = a.tr_mul(&lam);
            let rd_vec = &c + &atl;
            let (rp, rd) = (rp_vec.amax(), rd_vec.amax());
            let pobj = c.dot(&x);
            let dobj = -b.dot(&lam);
            let gap = (pobj - dobj).abs();
            let done = rp <= settings.tol * (1.0 + b_norm)
                && rd <= settings.tol * (1.0 + c_norm)
                && gap <= settings.tol * (1.0 + pobj.abs() + dobj.abs());
            let dominated = early.is_some_and(|e| {
                let slack: f64 = rd_vec
                    .iter()
                    .zip(e.x_bounds)
                    .map(|(r, b)| r.abs() * b)
                    .sum();
                b.dot(&lam) + slack <= e.threshold
            });
            if done || dominated || it == settings.max_iter {
                out = Some((it, done, dominated));
                break;
            }
            if it % ADAPT_EVERY == 0 {
                let p_scale = ax.amax().max(s.amax()).max(b_norm).max(1e-12);
                let d_scale = atl.amax().max(c_norm).max(1e-12);
                let ratio = ((rp / p_scale) / (rd / d_scale).max(1e-300)).sqrt();
                if !(1.0 / 5.0..=5.0).contains(&ratio) && ratio.is_finite() {
                    let next = (rho * ratio).clamp(1e-6, 1e6);
                    if next != rho {
                        rho = next;
                        chol = factor(rho)?;
                    }
                }
            }
        }
        let (iterations, converged, dominated) = out.unwrap_or((settings.max_iter, false, false));
        let s_orig: Vec<f64> = s.iter().zip(&scale).map(|(v, e)| v / e).collect();
        let lam_orig: Vec<f64> = lam.iter().zip(&scale).map(|(v, e)| v * e).collect();
        let ax = &self.a * &x;
        let primal_residual = (0..m)
            .map(|i| (ax[i] + s_orig[i] - self.b[i]).abs())
            .fold(0.0, f64::max);
        let atl = self.a.tr_mul(&DVector::from_column_slice(&lam_orig));
        let dual_residual = (0..n)
            .map(|j| (atl[j] + self.c[j]).abs())
            .fold(0.0, f64::max);
        let bl: f64 = self.b.iter().zip(&lam_orig).map(|(b, l)| b * l).sum();
        let gap = (c.dot(&x) + bl).abs();
        Ok(ConicSolution {
            x: x.iter().copied().collect(),
            s: s_orig,
            lambda: lam_orig,
            iterations,
            primal_residual,
            dual_residual,
            gap,
            converged,
            dominated,
        })
    }

    /// One positive factor per row, constant on each cone block, normalizing the row norms.
    fn row_scaling(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.a.nrows());
        let mut at = 0;
        let row_norm = |i: usize| self.a.row(i).norm();
        for cone in &self.cones {
            let m = cone.rows();
            match cone {
                Cone::Zero(_) | Cone::NonNeg(_) => {
                    for i in at..at + m {
                        let r = row_norm(i);
                        out.push(if r > 0.0 { 1.0 / r } else { 1.0 });
                    }
                }
                Cone::Soc(_) | Cone::Psd(_) => {
                    let r = (at..at + m).map(row_norm).fold(0.0, f64::max);
                    let f = if r > 0.0 { 1.0 / r } else { 1.0 };
                    out.extend(std::iter::repeat_n(f, m));
                }
            }
            at += m;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svec_round_trip_preserves_trace_product() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.5, 1.0, 3.0, -1.0, 0.5, -1.0, 1.0]);
        let b = DMatrix::from_row_slice(3, 3, &[1.0, -2.0, 0.0, -2.0, 0.5, 4.0, 0.0, 4.0, 2.0]);
        let (va, vb) = (svec(&a), svec(&b));
        let ip: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
        assert!((ip - (&a * &b).trace()).abs() < 1e-12);
        assert!((smat(&va, 3) - a).amax() < 1e-15);
    }

    #[test]
    fn soc_projection_cases() {
        let mut inside = [2.0, 1.0, 1.0];
        project_soc(&mut inside);
        assert_eq!(inside, [2.0, 1.0, 1.0]);
        let mut polar = [-2.0, 1.0, 0.0];
        project_soc(&mut polar);
        assert_eq!(polar, [0.0, 0.0, 0.0]);
        let mut edge = [0.0, 2.0, 0.0];
        project_soc(&mut edge);
        assert!((edge[0] - 1.0).abs() < 1e-15 && (edge[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn psd_projection_clips_negative_eigenvalues() {
        let mut v = svec(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -3.0]));
        project_psd(&mut v, 2);
        assert!(
            (smat(&v, 2) - DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).amax() < 1e-14
        );
    }

    #[test]
    fn solves_small_lp() {
        // max x1 + x2 with x1 + 2 x2 ≤ 4, 3 x1 + x2 ≤ 6, x ≥ 0: optimum 2.8 at (1.6, 1.2).
        let p = ConicProgram {
            c: vec![-1.0, -1.0],
            a: DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 3.0, 1.0, -1.0, 0.0, 0.0, -1.0]),
            b: vec![4.0, 6.0, 0.0, 0.0],
            cones: vec![Cone::NonNeg(4)],
        };
        let sol = p
            .solve(AdmmSettings {
                max_iter: 50_000,
                tol: 1e-10,
            })
            .unwrap();
        assert!(sol.converged);
        assert!((sol.x[0] - 1.6).abs() < 1e-6 && (sol.x[1] - 1.2).abs() < 1e-6);
        let bound = p.dual_bound(&sol.lambda, &[10.0, 10.0]);
        assert!((2.8 - 1e-12..2.8 + 1e-6).contains(&bound));
    }

    #[test]
    fn solves_small_sdp() {
        // max ⟨C, X⟩ over tr X = 1, X ⪰ 0 equals the top eigenvalue of C.
        let cm = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, -1.0]);
        let c: Vec<f64> = svec(&cm).iter().map(|v| -v).collect();
        let mut a = DMatrix::zeros(4, 3);
        a[(0, svec_index(2, 0, 0))] = 1.0;
        a[(0, svec_index(2, 1, 1))] = 1.0;
        for j in 0..3 {
            a[(1 + j, j)] = -1.0;
        }
        let p = ConicProgram {
            c,
            a,
            b: vec![1.0, 0.0, 0.0, 0.0],
            cones: vec![Cone::Zero(1), Cone::Psd(2)],
        };
        let sol = p
            .solve(AdmmSettings {
                max_iter: 50_000,
                tol: 1e-10,
            })
            .unwrap();
        let top = 5f64.sqrt();
        assert!(sol.converged);
        assert!((-p.c.iter().zip(&sol.x).map(|(c, x)| c * x).sum::<f64>() - top).abs() < 1e-6);
        assert!(p.dual_bound(&sol.lambda, &[1.0, std::f64::consts::SQRT_2, 1.0]) >= top - 1e-12);
    }
}
