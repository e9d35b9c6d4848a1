//! Datasets, homogeneous units and finite signed-measure predictors.
//!
//! Inputs `x ∈ R^d` are lifted to `z = (x, R)`. A unit is a direction `v` with
//! `‖v‖_p = 1` and responds with `(vᵀz / R)₊^α`, using the convention `(0)₊⁰ = 0`.
//! A model is a finite list of weighted units, and its variation norm is the ℓ1 norm
//! of the weights.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, min_right_singular, norm_p, normalize_p};

/// Tolerance on `‖v‖_p = 1` accepted by [`Unit::new`].
pub const UNIT_NORM_TOL: f64 = 1e-12;

/// Relative prediction drift allowed by [`caratheodory_reduce`].
pub const REDUCTION_TOL: f64 = 1e-8;

/// Input points with labels, the radius bound `R` and the norm exponent `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
    radius: f64,
    q: f64,
}

impl Dataset {
    /// Validates and builds a dataset. Every `x` must satisfy `‖x‖_q ≤ R`.
    pub fn new(xs: Vec<Vec<f64>>, ys: Vec<f64>, radius: f64, q: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid(format!("radius must be positive, got {radius}")));
        }
        if !(q >= 1.0) {
            return Err(invalid(format!("q must be at least 1, got {q}")));
        }
        if xs.len() != ys.len() {
            return Err(invalid(format!(
                "{} inputs but {} labels",
                xs.len(),
                ys.len()
            )));
        }
        if let Some(first) = xs.first() {
            let d = first.len();
            for (i, x) in xs.iter().enumerate() {
                if x.len() != d {
                    return Err(invalid(format!(
                        "row {i} has dimension {} instead of {d}",
                        x.len()
                    )));
                }
                if x.iter().any(|v| !v.is_finite()) || !ys[i].is_finite() {
                    return Err(invalid(format!("row {i} is not finite")));
                }
                let nq = norm_p(x, q);
                if nq > radius * (1.0 + 1e-12) {
                    return Err(invalid(format!(
                        "row {i} has norm {nq} above radius {radius}"
                    )));
                }
            }
        }
        Ok(Self { xs, ys, radius, q })
    }

    /// Builds a dataset with `R` set to the largest `ℓ_q` norm of the inputs (or 1 when all vanish).
    pub fn with_fitted_radius(xs: Vec<Vec<f64>>, ys: Vec<f64>, q: f64) -> Result<Self> {
        let r = xs.iter().map(|x| norm_p(x, q)).fold(0.0, f64::max);
        Self::new(xs, ys, if r > 0.0 { r } else { 1.0 }, q)
    }

    /// Input points.
    pub fn xs(&self) -> &[Vec<f64>] {
        &self.xs
    }

    /// Labels.
    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    /// Radius bound `R`.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Norm exponent `q`.
    pub fn q(&self) -> f64 {
        self.q
    }

    /// Number of points.
    pub fn n(&self) -> usize {
        self.xs.len()
    }

    /// Input dimension (0 for an empty dataset).
    pub fn d(&self) -> usize {
        self.xs.first().map_or(0, Vec::len)
    }

    /// Lifted points `z_i = (x_i, R)`.
    pub fn lifted(&self) -> Vec<Vec<f64>> {
        self.xs.iter().map(|x| lift(x, self.radius)).collect()
    }
}

/// An input lifted by appending the radius.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedPoint {
    /// The vector `(x, R)`.
    pub z: Vec<f64>,
}

/// Lifts `x` to `z = (x, R)`.
pub fn augment(x: &[f64], radius: f64) -> Result<AugmentedPoint> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(invalid(format!("radius must be positive, got {radius}")));
    }
    Ok(AugmentedPoint { z: lift(x, radius) })
}

fn lift(x: &[f64], radius: f64) -> Vec<f64> {
    let mut z = Vec::with_capacity(x.len() + 1);
    z.extend_from_slice(x);
    z.push(radius);
    z
}

/// The activation `(s)₊^α` with `(0)₊⁰ = 0`.
pub fn activation(s: f64, alpha: u32) -> f64 {
    if s > 0.0 {
        match alpha {
            0 => 1.0,
            1 => s,
            2 => s * s,
            a => s.powi(a as i32),
        }
    } else {
        0.0
    }
}

/// Derivative of `(s)₊^α` in `s` for `α ≥ 1`.
pub fn activation_derivative(s: f64, alpha: u32) -> f64 {
    if s > 0.0 && alpha >= 1 {
        alpha as f64 * s.powi(alpha as i32 - 1)
    } else {
        0.0
    }
}

/// A direction `v` on the unit `ℓ_p` sphere of `R^{d+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unit {
    v: Vec<f64>,
    p: f64,
}

impl Unit {
    /// Wraps `v`, which must already satisfy `‖v‖_p = 1`.
    pub fn new(v: Vec<f64>, p: f64) -> Result<Self> {
        check_p(p)?;
        let n = norm_p(&v, p);
        if (n - 1.0).abs() > UNIT_NORM_TOL || v.iter().any(|x| !x.is_finite()) {
            return Err(invalid(format!(
                "unit direction has ℓ{p} norm {n}, expected 1"
            )));
        }
        Ok(Self { v, p })
    }

    /// Normalizes a nonzero direction onto the unit `ℓ_p` sphere.
    pub fn from_direction(v: &[f64], p: f64) -> Result<Self> {
        check_p(p)?;
        let v = normalize_p(v, p).ok_or_else(|| invalid("cannot normalize a zero direction"))?;
        Ok(Self { v, p })
    }

    /// The direction.
    pub fn v(&self) -> &[f64] {
        &self.v
    }

    /// The norm exponent.
    pub fn p(&self) -> f64 {
        self.p
    }

    /// Response `(vᵀz / R)₊^α` on a lifted point.
    pub fn response(&self, z: &[f64], alpha: u32, radius: f64) -> f64 {
        activation(dot(&self.v, z) / radius, alpha)
    }
}

fn check_p(p: f64) -> Result<()> {
    if (1.0..=2.0).contains(&p) {
        Ok(())
    } else {
        Err(invalid(format!("p must lie in [1, 2], got {p}")))
    }
}

/// A unit and its output weight.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedUnit {
    /// Output weight `η`.
    pub eta: f64,
    /// Input direction.
    pub unit: Unit,
}

/// A finite signed measure over unit directions, used as a predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedMeasureModel {
    alpha: u32,
    p: f64,
    radius: f64,
    units: Vec<WeightedUnit>,
}

impl SignedMeasureModel {
    /// An empty model.
    pub fn new(alpha: u32, p: f64, radius: f64) -> Result<Self> {
        check_p(p)?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid(format!("radius must be positive, got {radius}")));
        }
        Ok(Self {
            alpha,
            p,
            radius,
            units: Vec::new(),
        })
    }

    /// Builds a model from weighted units, checking that every unit uses exponent `p`.
    pub fn from_units(alpha: u32, p: f64, radius: f64, units: Vec<WeightedUnit>) -> Result<Self> {
        let mut m = Self::new(alpha, p, radius)?;
        for wu in units {
            m.push(wu.eta, wu.unit)?;
        }
        Ok(m)
    }

    /// Appends a unit.
    pub fn push(&mut self, eta: f64, unit: Unit) -> Result<()> {
        if unit.p != self.p {
            return Err(invalid(format!(
                "unit uses p = {} but model uses p = {}",
                unit.p, self.p
            )));
        }
        if let Some(first) = self.units.first() {
            if first.unit.v.len() != unit.v.len() {
                return Err(invalid("unit dimension differs from the model"));
            }
        }
        if !eta.is_finite() {
            return Err(invalid("weight is not finite"));
        }
        self.units.push(WeightedUnit { eta, unit });
        Ok(())
    }

    /// Activation exponent `α`.
    pub fn alpha(&self) -> u32 {
        self.alpha
    }

    /// Norm exponent `p` of the unit directions.
    pub fn p(&self) -> f64 {
        self.p
    }

    /// Radius `R`.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Weighted units.
    pub fn units(&self) -> &[WeightedUnit] {
        &self.units
    }

    /// Mutable access to the weights, keeping the directions fixed.
    pub fn set_weights(&mut self, etas: &[f64]) -> Result<()> {
        if etas.len() != self.units.len() {
            return Err(invalid("weight count differs from unit count"));
        }
        for (wu, e) in self.units.iter_mut().zip(etas) {
            wu.eta = *e;
        }
        Ok(())
    }

    /// Multiplies every weight by `c`.
    pub fn scale(&mut self, c: f64) {
        for wu in &mut self.units {
            wu.eta *= c;
        }
    }

    /// Removes zero-weight units.
    pub fn prune(&mut self) {
        self.units.retain(|wu| wu.eta != 0.0);
    }

    /// Prediction on a lifted point.
    pub fn predict_lifted(&self, z: &[f64]) -> f64 {
        self.units
            .iter()
            .map(|wu| wu.eta * wu.unit.response(z, self.alpha, self.radius))
            .sum()
    }
}

/// Evaluates `Σ_j η_j (v_jᵀz / R)₊^α` at `x`.
pub fn predict(model: &SignedMeasureModel, x: &[f64]) -> Result<f64> {
    if let Some(first) = model.units.first() {
        if first.unit.v.len() != x.len() + 1 {
            return Err(invalid(format!(
                "input has dimension {} but units expect {}",
                x.len(),
                first.unit.v.len() - 1
            )));
        }
    }
    Ok(model.predict_lifted(&lift(x, model.radius)))
}

/// The variation norm `γ₁ = Σ_j |η_j|`.
pub fn variation_norm(model: &SignedMeasureModel) -> f64 {
    model.units.iter().map(|wu| wu.eta.abs()).sum()
}

/// Reduces the support of `model` to at most `n + 1` units while preserving predictions
/// at the `n` points `xs` and not increasing the variation norm.
///
/// Each pass takes `n + 2` units, finds a null vector `c` of the matrix whose rows are the
/// unit responses at the points plus the weight signs, and slides `η ← η − t c` until a
/// weight vanishes. Sign agreement is kept along the slide, so `γ₁` is unchanged.
pub fn caratheodory_reduce(
    model: &SignedMeasureModel,
    xs: &[Vec<f64>],
) -> Result<SignedMeasureModel> {
    let n = xs.len();
    let mut out = model.clone();
    out.prune();
    if out.units.len() <= n + 1 {
        return Ok(out);
    }
    let zs: Vec<Vec<f64>> = xs.iter().map(|x| lift(x, model.radius)).collect();
    let before: Vec<f64> = zs.iter().map(|z| out.predict_lifted(z)).collect();
    let scale = before
        .iter()
        .fold(1.0f64, |m, v| m.max(v.abs()))
        .max(variation_norm(&out));

    while out.units.len() > n + 1 {
        let k = n + 2;
        let block = &out.units[..k];
        let mut rows: Vec<Vec<f64>> = zs
            .iter()
            .map(|z| {
                block
                    .iter()
                    .map(|wu| wu.unit.response(z, out.alpha, out.radius))
                    .collect()
            })
            .collect();
        rows.push(block.iter().map(|wu| wu.eta.signum()).collect());
        let row_scale = rows
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1.0);
        let (mut c, residual) = min_right_singular(&rows, k);
        if residual > 1e-10 * row_scale * (k as f64).sqrt() {
            return Err(Error::ReductionFailed(format!(
                "null-space residual {residual:e} for a block of {k} units"
            )));
        }
        let gain: f64 = block
            .iter()
            .zip(&c)
            .map(|(wu, ci)| wu.eta.signum() * ci)
            .fold(0.0, f64::max);
        if gain <= 0.0 {
            c.iter_mut().for_each(|ci| *ci = -*ci);
        }
        let mut best: Option<(usize, f64)> = None;
        for (j, (wu, cj)) in block.iter().zip(&c).enumerate() {
            if wu.eta.signum() * cj > 0.0 {
                let t = wu.eta / cj;
                if best.is_none_or(|(_, bt)| t < bt) {
                    best = Some((j, t));
                }
            }
        }
        let (hit, t) = best.ok_or_else(|| {
            Error::ReductionFailed("null vector has no admissible direction".into())
        })?;
        for (j, cj) in c.iter().enumerate() {
            let wu = &mut out.units[j];
            let updated = wu.eta - t * cj;
            wu.eta = if j == hit || updated.signum() != wu.eta.signum() {
                0.0
            } else {
                updated
            };
        }
        out.prune();
    }

    for (z, b) in zs.iter().zip(&before) {
        let drift = (out.predict_lifted(z) - b).abs();
        if drift > REDUCTION_TOL * scale {
            return Err(Error::ReductionFailed(format!(
                "prediction drift {drift:e} exceeds tolerance"
            )));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{rng_from_seed, sample_unit_sphere};
    use rand::Rng;

    fn unit(v: &[f64]) -> Unit {
        Unit::from_direction(v, 2.0).unwrap()
    }

    #[test]
    fn augment_appends_radius() {
        assert_eq!(augment(&[0.0, 0.0], 1.0).unwrap().z, vec![0.0, 0.0, 1.0]);
        let z = augment(&[3.0, 4.0], 5.0).unwrap().z;
        assert_eq!(z, vec![3.0, 4.0, 5.0]);
        assert!(norm_p(&z, 2.0) <= 2f64.sqrt() * 5.0 + 1e-12);
        assert_eq!(augment(&[1.0], 2.0).unwrap().z, vec![1.0, 2.0]);
        assert!(augment(&[1.0], 0.0).is_err());
    }

    #[test]
    fn predict_examples() {
        let empty = SignedMeasureModel::new(1, 2.0, 1.0).unwrap();
        assert_eq!(predict(&empty, &[0.3]).unwrap(), 0.0);

        let mut relu = SignedMeasureModel::new(1, 2.0, 1.0).unwrap();
        relu.push(2.0, unit(&[1.0, 0.0])).unwrap();
        assert_eq!(predict(&relu, &[3.0]).unwrap(), 6.0);
        assert_eq!(predict(&relu, &[-1.0]).unwrap(), 0.0);
        assert!(predict(&relu, &[1.0, 2.0]).is_err());

        let mut step = SignedMeasureModel::new(0, 2.0, 1.0).unwrap();
        step.push(1.0, unit(&[0.0, 1.0])).unwrap();
        for x in [-5.0, 0.0, 2.0] {
            assert_eq!(predict(&step, &[x]).unwrap(), 1.0);
        }
        let mut boundary = SignedMeasureModel::new(0, 2.0, 1.0).unwrap();
        boundary.push(1.0, unit(&[1.0, 0.0])).unwrap();
        assert_eq!(predict(&boundary, &[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn variation_norm_examples() {
        let mut m = SignedMeasureModel::new(1, 2.0, 1.0).unwrap();
        assert_eq!(variation_norm(&m), 0.0);
        for eta in [1.0, -2.0, 0.5] {
            m.push(eta, unit(&[1.0, 1.0])).unwrap();
        }
        assert_eq!(variation_norm(&m), 3.5);
        m.scale(-3.0);
        assert_eq!(variation_norm(&m), 10.5);
    }

    #[test]
    fn unit_rejects_unnormalized_directions() {
        assert!(Unit::new(vec![1.0, 1.0], 2.0).is_err());
        assert!(Unit::new(vec![0.5, -0.5], 1.0).is_ok());
        assert!(Unit::new(vec![1.0], 3.0).is_err());
        assert!(Unit::from_direction(&[0.0, 0.0], 2.0).is_err());
    }

    #[test]
    fn dataset_validates_radius() {
        assert!(Dataset::new(vec![vec![3.0, 4.0]], vec![1.0], 5.0, 2.0).is_ok());
        assert!(Dataset::new(vec![vec![3.0, 4.0]], vec![1.0], 4.9, 2.0).is_err());
        assert!(Dataset::new(vec![vec![3.0, 4.0]], vec![1.0, 2.0], 5.0, 2.0).is_err());
        assert!(Dataset::new(vec![vec![1.0], vec![1.0, 0.0]], vec![1.0, 2.0], 5.0, 2.0).is_err());
    }

    #[test]
    fn reduce_merges_collinear_units() {
        let mut m = SignedMeasureModel::new(1, 2.0, 1.0).unwrap();
        m.push(1.0, unit(&[1.0, 1.0])).unwrap();
        m.push(2.0, unit(&[1.0, 1.0])).unwrap();
        m.push(0.5, unit(&[1.0, 1.0])).unwrap();
        let xs = vec![vec![0.5]];
        let r = caratheodory_reduce(&m, &xs).unwrap();
        assert!(r.units().len() <= 2);
        assert!((predict(&r, &[0.5]).unwrap() - predict(&m, &[0.5]).unwrap()).abs() < 1e-12);
        assert!((variation_norm(&r) - 3.5).abs() < 1e-12);
    }

    #[test]
    fn reduce_leaves_small_models_unchanged() {
        let mut m = SignedMeasureModel::new(1, 2.0, 1.0).unwrap();
        m.push(1.0, unit(&[1.0, 0.0])).unwrap();
        m.push(-1.0, unit(&[0.0, 1.0])).unwrap();
        let r = caratheodory_reduce(&m, &[vec![0.1], vec![0.2]]).unwrap();
        assert_eq!(r, m);
    }

    #[test]
    fn reduce_random_model() {
        let mut rng = rng_from_seed(11);
        let mut m = SignedMeasureModel::new(1, 2.0, 1.0).unwrap();
        for _ in 0..50 {
            let v = sample_unit_sphere(&mut rng, 3);
            m.push(rng.random_range(-1.0..1.0), Unit::new(v, 2.0).unwrap())
                .unwrap();
        }
        let xs: Vec<Vec<f64>> = (0..10)
            .map(|_| {
                let u = sample_unit_sphere(&mut rng, 2);
                let r: f64 = rng.random();
                u.iter().map(|c| c * r).collect()
            })
            .collect();
        let r = caratheodory_reduce(&m, &xs).unwrap();
        assert!(r.units().len() <= 11);
        assert!(variation_norm(&r) <= variation_norm(&m) + 1e-12);
        for x in &xs {
            assert!((predict(&r, x).unwrap() - predict(&m, x).unwrap()).abs() <= 1e-8);
        }
    }
}
