//! Positive-definite kernels induced by infinitely many random units, their random-feature
//! approximations, and the kernel ridge baseline.
//!
//! For `v` uniform on the unit sphere of `R^{d+1}` and lifted inputs `z = (x, R)`, the kernel is
//! `k_α(x, x') = E[(vᵀz/R)₊^α (vᵀz'/R)₊^α]`. For `α ≤ 2` it has a closed form in the angle `φ`
//! between `z` and `z'`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::linalg::{derive_seed, dot, norm2, rng_from_seed, sample_unit_sphere};
use crate::model::{activation, Dataset};
use crate::Error;

/// Samples per Monte-Carlo chunk; each chunk draws from its own derived seed.
const MC_CHUNK: usize = 8192;

/// Activation exponent, input dimension and radius defining a kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    alpha: u32,
    d: usize,
    radius: f64,
}

impl KernelSpec {
    /// Builds a kernel specification. Closed forms exist for `α ∈ {0, 1, 2}` only.
    pub fn new(alpha: u32, d: usize, radius: f64) -> Result<Self> {
        if alpha > 2 {
            return Err(invalid(format!("no closed-form kernel for α = {alpha}")));
        }
        if d == 0 || !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid("need d ≥ 1 and a positive finite radius"));
        }
        Ok(Self { alpha, d, radius })
    }

    /// Activation exponent.
    pub fn alpha(&self) -> u32 {
        self.alpha
    }

    /// Input dimension.
    pub fn d(&self) -> usize {
        self.d
    }

    /// Input radius.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn lift(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.d, "input dimension does not match the kernel");
        let mut z: Vec<f64> = x.iter().map(|v| v / self.radius).collect();
        z.push(1.0);
        z
    }
}

/// Closed-form kernel value. The angle is computed as `2 atan2(‖u − u'‖, ‖u + u'‖)` on the
/// normalized lifted inputs, which is exact at `x = x'`.
pub fn kernel(spec: &KernelSpec, x: &[f64], xp: &[f64]) -> f64 {
    let (z, zp) = (spec.lift(x), spec.lift(xp));
    let (nz, nzp) = (norm2(&z), norm2(&zp));
    let (u, up): (Vec<f64>, Vec<f64>) = (
        z.iter().map(|v| v / nz).collect(),
        zp.iter().map(|v| v / nzp).collect(),
    );
    let diff: Vec<f64> = u.iter().zip(&up).map(|(a, b)| a - b).collect();
    let sum: Vec<f64> = u.iter().zip(&up).map(|(a, b)| a + b).collect();
    let phi = 2.0 * norm2(&diff).atan2(norm2(&sum));
    let (sin, cos) = phi.sin_cos();
    let dd = (spec.d + 1) as f64;
    match spec.alpha {
        0 => (PI - phi) / (2.0 * PI),
        1 => nz * nzp / (2.0 * dd * PI) * ((PI - phi) * cos + sin),
        _ => {
            let scale = (nz * nz) * (nzp * nzp) / (2.0 * PI * (dd * dd + 2.0 * dd));
            scale * (3.0 * sin * cos + (PI - phi) * (1.0 + 2.0 * cos * cos))
        }
    }
}

/// Gram matrix of the closed-form kernel on `xs`.
pub fn gram(spec: &KernelSpec, xs: &[Vec<f64>]) -> DMatrix<f64> {
    let n = xs.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).map(|j| kernel(spec, &xs[i], &xs[j])).collect())
        .collect();
    DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

/// Monte-Carlo estimate of the kernel from `m` uniform directions, with its standard error.
/// The result depends only on `seed` and `m`, not on the thread count.
pub fn kernel_mc(
    spec: &KernelSpec,
    x: &[f64],
    xp: &[f64],
    m: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if m == 0 {
        return Err(invalid("m must be at least 1"));
    }
    let (z, zp) = (spec.lift(x), spec.lift(xp));
    let dim = spec.d + 1;
    let chunks = m.div_ceil(MC_CHUNK);
    let sums: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng_from_seed(derive_seed(seed, c as u64));
            let count = MC_CHUNK.min(m - c * MC_CHUNK);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                let v = sample_unit_sphere(&mut rng, dim);
                let val =
                    activation(dot(&v, &z), spec.alpha) * activation(dot(&v, &zp), spec.alpha);
                s += val;
                s2 += val * val;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = sums
        .iter()
        .fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    let mf = m as f64;
    let mean = s / mf;
    if m == 1 {
        return Ok((mean, f64::INFINITY));
    }
    let var = ((s2 - mf * mean * mean) / (mf - 1.0)).max(0.0);
    Ok((mean, (var / mf).sqrt()))
}

/// Finite sample of `m` units defining an explicit feature map whose inner products
/// approximate the kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomFeatureMap {
    spec: KernelSpec,
    directions: Vec<Vec<f64>>,
}

impl RandomFeatureMap {
    /// Number of features.
    pub fn m(&self) -> usize {
        self.directions.len()
    }

    /// Sampled unit directions in `R^{d+1}`.
    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    /// Kernel specification the map approximates.
    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }
}

/// Samples `m` directions uniformly on the unit sphere, deterministically per seed.
pub fn random_features(spec: &KernelSpec, m: usize, seed: u64) -> Result<RandomFeatureMap> {
    if m == 0 {
        return Err(invalid("m must be at least 1"));
    }
    let mut rng = rng_from_seed(seed);
    let directions = (0..m)
        .map(|_| sample_unit_sphere(&mut rng, spec.d + 1))
        .collect();
    Ok(RandomFeatureMap {
        spec: *spec,
        directions,
    })
}

/// Feature vector `((v_jᵀz/R)₊^α / √m)_j`, so that `featurize(x)ᵀfeaturize(x')` estimates
/// the kernel.
pub fn featurize(map: &RandomFeatureMap, x: &[f64]) -> Vec<f64> {
    let z = map.spec.lift(x);
    let s = 1.0 / (map.m() as f64).sqrt();
    map.directions
        .iter()
        .map(|v| s * activation(dot(v, &z), map.spec.alpha))
        .collect()
}

/// How the kernel ridge baseline is computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum F2Method {
    /// Solve the `n × n` system with the closed-form kernel.
    ExactKernel,
    /// Ridge regression on `m` random features.
    RandomFeatures {
        /// Number of features.
        m: usize,
    },
}

/// Predictor returned by [`f2_estimate`].
#[derive(Debug, Clone)]
pub enum F2Predictor {
    /// `f(x) = Σ_i c_i k(x_i, x)`.
    Kernel {
        /// Kernel used.
        spec: KernelSpec,
        /// Training inputs.
        xs: Vec<Vec<f64>>,
        /// Dual coefficients.
        coef: Vec<f64>,
    },
    /// `f(x) = θᵀφ(x)` on a random feature map.
    Features {
        /// Feature map used.
        map: RandomFeatureMap,
        /// Output weights.
        theta: Vec<f64>,
    },
}

impl F2Predictor {
    /// Evaluates the predictor.
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            F2Predictor::Kernel { spec, xs, coef } => xs
                .iter()
                .zip(coef)
                .map(|(xi, c)| c * kernel(spec, xi, x))
                .sum(),
            F2Predictor::Features { map, theta } => dot(&featurize(map, x), theta),
        }
    }
}

/// Jitter added to the kernel system, relative to its trace.
pub const KERNEL_JITTER: f64 = 1e-10;

/// Kernel ridge regression minimizing `(1/2n)Σ(y_i − f(x_i))² + (λ/2)γ₂(f)²`, either exactly
/// or on random features.
pub fn f2_estimate(
    dataset: &Dataset,
    alpha: u32,
    lambda: f64,
    method: F2Method,
    seed: u64,
) -> Result<F2Predictor> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid("lambda must be positive and finite"));
    }
    let spec = KernelSpec::new(alpha, dataset.d(), dataset.radius())?;
    let n = dataset.n();
    let nl = n as f64 * lambda;
    let y = DVector::from_column_slice(dataset.ys());
    match method {
        F2Method::ExactKernel => {
            let mut k = gram(&spec, dataset.xs());
            let jitter = KERNEL_JITTER * k.trace();
            for i in 0..n {
                k[(i, i)] += nl + jitter;
            }
            let chol = k.cholesky().ok_or_else(|| {
                Error::NumericalFailure("kernel system is not positive definite".into())
            })?;
            let coef = chol.solve(&y);
            Ok(F2Predictor::Kernel {
                spec,
                xs: dataset.xs().to_vec(),
                coef: coef.iter().cloned().collect(),
            })
        }
        F2Method::RandomFeatures { m } => {
            let map = random_features(&spec, m, seed)?;
            let rows: Vec<Vec<f64>> = dataset
                .xs()
                .par_iter()
                .map(|x| featurize(&map, x))
                .collect();
            let phi = DMatrix::from_fn(n, m, |i, j| rows[i][j]);
            let mut a = phi.transpose() * &phi;
            for j in 0..m {
                a[(j, j)] += nl;
            }
            let rhs = phi.transpose() * y;
            let chol = a.cholesky().ok_or_else(|| {
                Error::NumericalFailure("feature system is not positive definite".into())
            })?;
            let theta = chol.solve(&rhs);
            Ok(F2Predictor::Features {
                map,
                theta: theta.iter().cloned().collect(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sample_gaussian;

    #[test]
    fn closed_form_values() {
        let s0 = KernelSpec::new(0, 3, 1.0).unwrap();
        let x = [0.3, -0.2, 0.5];
        assert!((kernel(&s0, &x, &x) - 0.5).abs() < 1e-15);
        let u = [0.6, 0.8, 0.0];
        let mu = [-0.6, -0.8, 0.0];
        assert!((kernel(&s0, &u, &mu) - 0.25).abs() < 1e-15);
        let s1 = KernelSpec::new(1, 3, 1.0).unwrap();
        assert!((kernel(&s1, &[0.0; 3], &[0.0; 3]) - 1.0 / 8.0).abs() < 1e-15);
        let s2 = KernelSpec::new(2, 3, 1.0).unwrap();
        assert!((kernel(&s2, &u, &u) - 6.0 / 24.0).abs() < 1e-14);
    }

    #[test]
    fn unsupported_alpha() {
        assert!(KernelSpec::new(3, 2, 1.0).is_err());
    }

    #[test]
    fn monte_carlo_agrees() {
        let mut rng = rng_from_seed(1);
        for alpha in 0..=2 {
            let spec = KernelSpec::new(alpha, 2, 1.0).unwrap();
            for k in 0..3 {
                let x: Vec<f64> = sample_gaussian(&mut rng, 2)
                    .iter()
                    .map(|v| v * 0.5)
                    .collect();
                let xp: Vec<f64> = sample_gaussian(&mut rng, 2)
                    .iter()
                    .map(|v| v * 0.5)
                    .collect();
                let (est, se) = kernel_mc(&spec, &x, &xp, 200_000, k).unwrap();
                assert!((est - kernel(&spec, &x, &xp)).abs() < 4.0 * se, "α={alpha}");
            }
        }
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let spec = KernelSpec::new(1, 2, 1.0).unwrap();
        let a = kernel_mc(&spec, &[0.1, 0.2], &[0.3, -0.1], 20_000, 7).unwrap();
        let b = kernel_mc(&spec, &[0.1, 0.2], &[0.3, -0.1], 20_000, 7).unwrap();
        assert_eq!(a, b);
        let single = kernel_mc(&spec, &[0.1, 0.2], &[0.3, -0.1], 1, 7).unwrap();
        assert!(single.0 >= 0.0);
    }

    #[test]
    fn features_are_deterministic() {
        let spec = KernelSpec::new(1, 2, 1.0).unwrap();
        assert_eq!(
            random_features(&spec, 50, 3).unwrap(),
            random_features(&spec, 50, 3).unwrap()
        );
    }

    #[test]
    fn two_point_ridge_matches_hand_solution() {
        let xs = vec![vec![0.5, 0.0], vec![-0.2, 0.4]];
        let ys = vec![1.0, -0.5];
        let ds = Dataset::new(xs.clone(), ys.clone(), 1.0, 2.0).unwrap();
        let lambda = 0.1;
        let spec = KernelSpec::new(1, 2, 1.0).unwrap();
        let (k11, k12, k22) = (
            kernel(&spec, &xs[0], &xs[0]),
            kernel(&spec, &xs[0], &xs[1]),
            kernel(&spec, &xs[1], &xs[1]),
        );
        let shift = 2.0 * lambda + KERNEL_JITTER * (k11 + k22);
        let (a, b, c) = (k11 + shift, k12, k22 + shift);
        let det = a * c - b * b;
        let c1 = (c * ys[0] - b * ys[1]) / det;
        let c2 = (a * ys[1] - b * ys[0]) / det;
        let F2Predictor::Kernel { coef, .. } =
            f2_estimate(&ds, 1, lambda, F2Method::ExactKernel, 0).unwrap()
        else {
            panic!("exact path returns a kernel predictor");
        };
        assert!((coef[0] - c1).abs() < 1e-10 && (coef[1] - c2).abs() < 1e-10);
    }

    #[test]
    fn heavy_ridge_predicts_near_zero() {
        let xs = vec![vec![0.5, 0.0], vec![-0.2, 0.4], vec![0.1, 0.1]];
        let ds = Dataset::new(xs, vec![1.0, -1.0, 2.0], 1.0, 2.0).unwrap();
        for method in [F2Method::ExactKernel, F2Method::RandomFeatures { m: 100 }] {
            let f = f2_estimate(&ds, 1, 1e9, method, 0).unwrap();
            assert!(f.predict(&[0.2, 0.2]).abs() < 1e-8);
        }
    }
}
