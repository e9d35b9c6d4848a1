//! Conditional-gradient training over the variation-norm ball `{γ₁(f) ≤ δ}`.
//!
//! Starting from `f₀ = 0`, each iteration forms the residuals `g_i = −ℓ′(y_i, f_t(x_i))`,
//! asks the oracle for the unit `v` and sign `s` maximizing `s (1/n) Σ g_i φ_v(x_i)`,
//! and moves towards the extreme point `f̄_t = δ s φ_v`. The Frank-Wolfe gap
//! `δ · value − ⟨g, f_t⟩ / n` upper-bounds the suboptimality of `f_t`.

use std::fmt::Write as _;

use crate::error::{invalid, Result};
use crate::linalg::{derive_seed, dot};
use crate::loss::{smoothing_schedule, Loss};
use crate::model::{Dataset, SignedMeasureModel, Unit};
use crate::oracle::{OracleMethod, OracleProblem};

/// Step-size rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRule {
    /// `ρ_t = 2 / (t + 1)` for `t ≥ 1`.
    Harmonic,
    /// Exact minimization on the segment `[f_t, f̄_t]`.
    LineSearch,
    /// Re-optimization of all weights over the ℓ1 ball after each new unit.
    FullyCorrective,
}

impl StepRule {
    /// Parses `harmonic`, `linesearch` or `fc`.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "harmonic" => Ok(StepRule::Harmonic),
            "linesearch" | "line-search" => Ok(StepRule::LineSearch),
            "fc" | "fully-corrective" => Ok(StepRule::FullyCorrective),
            other => Err(invalid(format!("unknown step rule {other:?}"))),
        }
    }
}

/// Training configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct FwConfig {
    /// Activation exponent `α`.
    pub alpha: u32,
    /// Norm exponent `p` of the unit directions.
    pub p: f64,
    /// Variation-norm budget `δ`.
    pub delta: f64,
    /// Maximum number of iterations.
    pub steps: usize,
    /// Step-size rule.
    pub step_rule: StepRule,
    /// Oracle used for each step.
    pub oracle: OracleMethod,
    /// Constant `c` of the smoothing schedule `ε_t = c / √(t + 1)` for the plain hinge.
    pub smoothing: Option<f64>,
    /// Seed from which per-iteration oracle seeds are derived.
    pub seed: u64,
    /// Training stops once the gap falls to this value.
    pub gap_tol: f64,
}

impl FwConfig {
    /// A configuration with the exact oracle, line search and default tolerances.
    pub fn new(alpha: u32, p: f64, delta: f64, steps: usize) -> Self {
        Self {
            alpha,
            p,
            delta,
            steps,
            step_rule: StepRule::LineSearch,
            oracle: OracleMethod::Exact {
                budget: crate::oracle::DEFAULT_BUDGET,
            },
            smoothing: None,
            seed: 0,
            gap_tol: 1e-12,
        }
    }

    fn validate(&self, loss: &Loss) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(invalid(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if self.steps == 0 {
            return Err(invalid("steps must be at least 1"));
        }
        if !loss.is_smooth() && self.smoothing.is_none() {
            return Err(invalid("a non-smooth loss needs a smoothing schedule"));
        }
        if let Some(c) = self.smoothing {
            if !(c > 0.0) {
                return Err(invalid("smoothing constant must be positive"));
            }
        }
        Ok(())
    }
}

/// One row of the training trace. Row `t` describes the iterate `f_t` and the step taken from it.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    /// Iteration index.
    pub t: usize,
    /// Empirical risk `Ĵ(f_t)` under the training loss.
    pub risk: f64,
    /// Frank-Wolfe gap at `f_t`.
    pub gap: f64,
    /// Oracle value at `f_t`.
    pub oracle_value: f64,
    /// Step size applied to move to `f_{t+1}` (`None` on the final row).
    pub step: Option<f64>,
    /// Direction selected by the oracle, signed by the winning side.
    pub unit: Vec<f64>,
    /// Sign of the selected extreme point.
    pub sign: f64,
}

/// Per-iteration record of a training run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainTrace {
    /// Rows in iteration order.
    pub rows: Vec<TraceRow>,
}

impl TrainTrace {
    /// Running minimum of the gap.
    pub fn running_min_gap(&self) -> Vec<f64> {
        let mut m = f64::INFINITY;
        self.rows
            .iter()
            .map(|r| {
                m = m.min(r.gap);
                m
            })
            .collect()
    }

    /// CSV rendering with columns `t,risk,gap,oracle_value,step,sign,v`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,risk,gap,oracle_value,step,sign,v\n");
        for r in &self.rows {
            let v: Vec<String> = r.unit.iter().map(|x| format!("{x:?}")).collect();
            let step = r.step.map(|x| format!("{x:?}")).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{:?},{:?},{:?},{},{:?},{}",
                r.t,
                r.risk,
                r.gap,
                r.oracle_value,
                step,
                r.sign,
                v.join(";")
            );
        }
        s
    }
}

/// Average loss `(1/n) Σ ℓ(y_i, f_i)` of predictions `f`.
pub fn risk_of(loss: &Loss, ys: &[f64], f: &[f64]) -> f64 {
    if ys.is_empty() {
        return 0.0;
    }
    ys.iter()
        .zip(f)
        .map(|(y, u)| loss.value(*y, *u))
        .sum::<f64>()
        / ys.len() as f64
}

/// Empirical risk of a model on a dataset.
pub fn empirical_risk(model: &SignedMeasureModel, dataset: &Dataset, loss: &Loss) -> f64 {
    let f: Vec<f64> = dataset
        .lifted()
        .iter()
        .map(|z| model.predict_lifted(z))
        .collect();
    risk_of(loss, dataset.ys(), &f)
}

fn residuals(loss: &Loss, ys: &[f64], f: &[f64]) -> Vec<f64> {
    ys.iter()
        .zip(f)
        .map(|(y, u)| -loss.derivative(*y, *u))
        .collect()
}

/// The Frank-Wolfe gap of `model` on `dataset` for the ball of radius `delta`.
pub fn duality_gap(
    model: &SignedMeasureModel,
    dataset: &Dataset,
    loss: &Loss,
    delta: f64,
    oracle: &OracleMethod,
) -> Result<f64> {
    let zs = dataset.lifted();
    let f: Vec<f64> = zs.iter().map(|z| model.predict_lifted(z)).collect();
    let g = residuals(loss, dataset.ys(), &f);
    let problem = OracleProblem::new(&zs, &g, model.alpha(), model.p(), dataset.radius())?;
    let r = oracle.solve(&problem)?;
    Ok(delta * r.value - dot(&g, &f) / dataset.n() as f64)
}

fn responses(unit: &Unit, zs: &[Vec<f64>], alpha: u32, radius: f64) -> Vec<f64> {
    zs.iter().map(|z| unit.response(z, alpha, radius)).collect()
}

/// Trains a model by conditional gradient. Returns the final model and the trace.
pub fn fw_train(
    dataset: &Dataset,
    loss: &Loss,
    config: &FwConfig,
) -> Result<(SignedMeasureModel, TrainTrace)> {
    config.validate(loss)?;
    if dataset.n() == 0 {
        return Err(invalid("training needs at least one point"));
    }
    let zs = dataset.lifted();
    let ys = dataset.ys();
    let n = dataset.n() as f64;
    let mut units: Vec<Unit> = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut eta: Vec<f64> = Vec::new();
    let mut f = vec![0.0; dataset.n()];
    let mut trace = TrainTrace::default();

    for t in 0..=config.steps {
        let step_loss = match config.smoothing {
            Some(c) if !loss.is_smooth() => smoothing_schedule(c, t)?,
            _ => *loss,
        };
        let g = residuals(&step_loss, ys, &f);
        let problem = OracleProblem::new(&zs, &g, config.alpha, config.p, dataset.radius())?;
        let oracle = config.oracle.reseeded(derive_seed(config.seed, t as u64));
        let res = oracle.solve(&problem)?;
        let gap = config.delta * res.value - dot(&g, &f) / n;
        let mut row = TraceRow {
            t,
            risk: risk_of(loss, ys, &f),
            gap,
            oracle_value: res.value,
            step: None,
            unit: res.unit.v().to_vec(),
            sign: res.sign,
        };
        if gap <= config.gap_tol || t == config.steps {
            trace.rows.push(row);
            break;
        }
        let col = responses(&res.unit, &zs, config.alpha, dataset.radius());
        let target: Vec<f64> = col.iter().map(|c| config.delta * res.sign * c).collect();
        match config.step_rule {
            StepRule::Harmonic | StepRule::LineSearch => {
                let rho = if config.step_rule == StepRule::Harmonic {
                    (2.0 / (t as f64 + 2.0)).min(1.0)
                } else {
                    line_search(&step_loss, ys, &f, &target)
                };
                for e in &mut eta {
                    *e *= 1.0 - rho;
                }
                for (fi, ti) in f.iter_mut().zip(&target) {
                    *fi = (1.0 - rho) * *fi + rho * ti;
                }
                units.push(res.unit.clone());
                cols.push(col);
                eta.push(rho * config.delta * res.sign);
                row.step = Some(rho);
            }
            StepRule::FullyCorrective => {
                units.push(res.unit.clone());
                cols.push(col);
                eta.push(0.0);
                eta = fc_weights(&cols, ys, &step_loss, config.delta, &eta)?;
                let keep: Vec<bool> = eta.iter().map(|e| *e != 0.0).collect();
                let mut k = 0;
                units.retain(|_| {
                    k += 1;
                    keep[k - 1]
                });
                k = 0;
                cols.retain(|_| {
                    k += 1;
                    keep[k - 1]
                });
                eta.retain(|e| *e != 0.0);
                f = predictions(&cols, &eta, dataset.n());
                row.step = Some(1.0);
            }
        }
        trace.rows.push(row);
    }

    let mut model = SignedMeasureModel::new(config.alpha, config.p, dataset.radius())?;
    for (u, e) in units.into_iter().zip(eta) {
        if e != 0.0 {
            model.push(e, u)?;
        }
    }
    Ok((model, trace))
}

/// Conditional gradient with a `κ`-approximate oracle and exact line search on the segment
/// towards `δ s φ_v`. The final risk competes with the ball of radius `δ/κ`.
pub fn fw_train_approx(
    dataset: &Dataset,
    loss: &Loss,
    config: &FwConfig,
    kappa: f64,
) -> Result<(SignedMeasureModel, TrainTrace)> {
    let budget = match config.oracle {
        OracleMethod::Exact { budget } | OracleMethod::Kappa { budget, .. } => budget,
        _ => crate::oracle::DEFAULT_BUDGET,
    };
    let mut cfg = config.clone();
    cfg.oracle = OracleMethod::Kappa { kappa, budget };
    cfg.step_rule = StepRule::LineSearch;
    fw_train(dataset, loss, &cfg)
}

fn predictions(cols: &[Vec<f64>], eta: &[f64], n: usize) -> Vec<f64> {
    let mut f = vec![0.0; n];
    for (c, e) in cols.iter().zip(eta) {
        for (fi, ci) in f.iter_mut().zip(c) {
            *fi += e * ci;
        }
    }
    f
}

/// Minimizes `ρ ↦ Ĵ((1−ρ)f + ρ target)` over `[0, 1]` by bisection on the derivative,
/// down to adjacent floating-point values.
fn line_search(loss: &Loss, ys: &[f64], f: &[f64], target: &[f64]) -> f64 {
    let dir: Vec<f64> = target.iter().zip(f).map(|(a, b)| a - b).collect();
    let deriv = |rho: f64| -> f64 {
        ys.iter()
            .zip(f)
            .zip(&dir)
            .map(|((y, fi), di)| loss.derivative(*y, fi + rho * di) * di)
            .sum()
    };
    if deriv(1.0) <= 0.0 {
        return 1.0;
    }
    if deriv(0.0) >= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if deriv(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Euclidean projection onto `{‖x‖₁ ≤ radius}`.
pub fn project_l1_ball(x: &[f64], radius: f64) -> Vec<f64> {
    if x.iter().map(|v| v.abs()).sum::<f64>() <= radius {
        return x.to_vec();
    }
    let mut u: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - radius) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    x.iter()
        .map(|v| v.signum() * (v.abs() - theta).max(0.0))
        .collect()
}

/// Weights minimizing the empirical risk of fixed units over `‖η‖₁ ≤ δ`.
pub fn fully_corrective(
    units: &[Unit],
    dataset: &Dataset,
    loss: &Loss,
    alpha: u32,
    delta: f64,
) -> Result<Vec<f64>> {
    if units.is_empty() {
        return Err(invalid("fully corrective step needs at least one unit"));
    }
    if !loss.is_smooth() {
        return Err(invalid("fully corrective step needs a smooth loss"));
    }
    let zs = dataset.lifted();
    let cols: Vec<Vec<f64>> = units
        .iter()
        .map(|u| responses(u, &zs, alpha, dataset.radius()))
        .collect();
    fc_weights(&cols, dataset.ys(), loss, delta, &vec![0.0; units.len()])
}

const FC_MAX_ITERS: usize = 20_000;
const FC_REL_TOL: f64 = 1e-9;

/// Accelerated projected gradient with adaptive restart on `η ↦ Ĵ(Φη)` over the ℓ1 ball.
fn fc_weights(
    cols: &[Vec<f64>],
    ys: &[f64],
    loss: &Loss,
    delta: f64,
    start: &[f64],
) -> Result<Vec<f64>> {
    let n = ys.len();
    let k = cols.len();
    let smooth = loss
        .smoothness(ys.iter().fold(1.0f64, |m, y| m.max(y.abs())))
        .ok_or_else(|| invalid("fully corrective step needs a smooth loss"))?;
    let mut gram = nalgebra::DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v = dot(&cols[i], &cols[j]) / n as f64;
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    let lip = smooth
        * gram
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(0.0, f64::max);
    if lip <= 0.0 {
        return Ok(vec![0.0; k]);
    }
    let step = 1.0 / lip;
    let objective = |eta: &[f64]| risk_of(loss, ys, &predictions(cols, eta, n));
    let grad = |eta: &[f64]| -> Vec<f64> {
        let f = predictions(cols, eta, n);
        let d: Vec<f64> = ys
            .iter()
            .zip(&f)
            .map(|(y, u)| loss.derivative(*y, *u))
            .collect();
        cols.iter().map(|c| dot(c, &d) / n as f64).collect()
    };

    let mut x = project_l1_ball(start, delta);
    let mut best = x.clone();
    let mut best_val = objective(&x);
    let start_val = objective(start);
    let mut y = x.clone();
    let mut theta = 1.0f64;
    for _ in 0..FC_MAX_ITERS {
        let gy = grad(&y);
        let trial: Vec<f64> = y.iter().zip(&gy).map(|(a, b)| a - step * b).collect();
        let next = project_l1_ball(&trial, delta);
        let val = objective(&next);
        if val < best_val {
            best_val = val;
            best = next.clone();
        }
        let moved: f64 = next
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale = next.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
        let restart = next
            .iter()
            .zip(&x)
            .zip(&gy)
            .map(|((a, b), g)| g * (a - b))
            .sum::<f64>()
            > 0.0;
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        if restart {
            theta = 1.0;
            y = next.clone();
        } else {
            let beta = (theta - 1.0) / theta_next;
            y = next
                .iter()
                .zip(&x)
                .map(|(a, b)| a + beta * (a - b))
                .collect();
            theta = theta_next;
        }
        x = next;
        if moved <= FC_REL_TOL * scale {
            break;
        }
    }
    if start.iter().map(|v| v.abs()).sum::<f64>() <= delta && start_val < best_val {
        return Ok(start.to_vec());
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(x: f64, y: f64) -> Dataset {
        Dataset::new(vec![vec![x]], vec![y], 1.0, 2.0).unwrap()
    }

    #[test]
    fn already_optimal_start() {
        let ds = single(0.0, 0.0);
        let (m, trace) = fw_train(&ds, &Loss::Squared, &FwConfig::new(1, 2.0, 2.0, 10)).unwrap();
        assert!(m.units().is_empty());
        assert_eq!(trace.rows.len(), 1);
        assert_eq!(trace.rows[0].gap, 0.0);
    }

    #[test]
    fn constant_target_in_one_step() {
        let ds = single(0.0, 1.0);
        let (m, trace) = fw_train(&ds, &Loss::Squared, &FwConfig::new(0, 2.0, 2.0, 5)).unwrap();
        assert!((trace.rows[0].gap - 2.0).abs() < 1e-12);
        assert_eq!(m.units().len(), 1);
        assert!((m.units()[0].eta - 1.0).abs() < 1e-10);
        assert!((m.units()[0].unit.v()[1] - 1.0).abs() < 1e-12);
        assert!(trace.rows[1].risk < 1e-20);
    }

    #[test]
    fn initial_gap_by_hand() {
        let ds = single(0.0, 1.0);
        let m = SignedMeasureModel::new(0, 2.0, 1.0).unwrap();
        let oracle = OracleMethod::Exact { budget: 1e6 };
        assert!((duality_gap(&m, &ds, &Loss::Squared, 2.0, &oracle).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn l1_projection() {
        assert_eq!(project_l1_ball(&[0.2, -0.3], 1.0), vec![0.2, -0.3]);
        let p = project_l1_ball(&[3.0, -1.0, 0.5], 2.0);
        assert!((p.iter().map(|v| v.abs()).sum::<f64>() - 2.0).abs() < 1e-12);
        assert_eq!(p, vec![2.0, 0.0, 0.0]);
    }

    #[test]
    fn single_unit_fc_is_clipped_least_squares() {
        let xs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 10.0]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x[0]).collect();
        let ds = Dataset::new(xs, ys, 1.0, 2.0).unwrap();
        let u = Unit::from_direction(&[1.0, 0.0], 2.0).unwrap();
        let zs = ds.lifted();
        let col: Vec<f64> = zs.iter().map(|z| u.response(z, 1, 1.0)).collect();
        let ls = dot(&col, ds.ys()) / dot(&col, &col);
        for delta in [1.0, 10.0] {
            let w =
                fully_corrective(std::slice::from_ref(&u), &ds, &Loss::Squared, 1, delta).unwrap();
            assert!((w[0] - ls.min(delta)).abs() < 1e-8);
        }
    }

    #[test]
    fn line_search_risk_is_monotone() {
        let xs: Vec<Vec<f64>> = (0..20).map(|i| vec![-1.0 + i as f64 / 10.0]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x[0].abs()).collect();
        let ds = Dataset::new(xs, ys, 1.0, 2.0).unwrap();
        let (m, trace) = fw_train(&ds, &Loss::Squared, &FwConfig::new(1, 2.0, 3.0, 40)).unwrap();
        for w in trace.rows.windows(2) {
            assert!(w[1].risk <= w[0].risk + 1e-15);
        }
        assert!(crate::model::variation_norm(&m) <= 3.0 + 1e-12);
    }

    #[test]
    fn hinge_requires_schedule() {
        let ds = single(0.5, 1.0);
        assert!(fw_train(&ds, &Loss::Hinge, &FwConfig::new(1, 2.0, 1.0, 5)).is_err());
        let mut cfg = FwConfig::new(1, 2.0, 1.0, 5);
        cfg.smoothing = Some(1.0);
        assert!(fw_train(&ds, &Loss::Hinge, &cfg).is_ok());
    }
}
