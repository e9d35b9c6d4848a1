//! Synthetic adaptivity experiments comparing the variation-norm space with its RKHS baselines.
//!
//! A configuration fixes a target function `f*` (affine, single-index, projection pursuit
//! or multi-index, optionally supported on a few coordinates), an input distribution
//! (uniform on an `ℓ_q` ball or the `ℓ∞` box), a grid of sample sizes and the model
//! families to train. Each replicate is determined by the configuration seed, the sample
//! size and the replicate index, and all families see the same training sample.

use std::fmt::Write as _;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fw::{fw_train, FwConfig, StepRule};
use crate::kernels::{f2_estimate, F2Method};
use crate::linalg::{derive_seed, dot, norm2, rng_from_seed, sample_gaussian, sample_lq_ball};
use crate::loss::Loss;
use crate::model::{predict, Dataset};
use crate::oracle::{OracleMethod, DEFAULT_BUDGET};

/// Shape of the target function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    /// `wᵀx + b`.
    Affine,
    /// `(wᵀx)₊`.
    SingleIndex,
    /// `(1/k) Σ_j (w_jᵀx)₊`.
    ProjectionPursuit,
    /// `(1/k) Σ_j ‖W_jᵀx‖₂` with `W_j` having `s` orthonormal columns.
    MultiIndex,
}

/// Input distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "shape")]
pub enum InputDomain {
    /// Uniform on `{‖x‖_q ≤ R}`.
    Ball {
        /// Norm exponent of the ball.
        q: f64,
    },
    /// Uniform on `[−R, R]^d`.
    Box,
}

/// Model family trained in each replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    /// Conditional gradient on the variation-norm ball.
    #[serde(rename = "F1-FW")]
    F1Fw,
    /// Kernel ridge regression with the closed-form kernel.
    #[serde(rename = "F2-kernel")]
    F2Kernel,
    /// Ridge regression on as many random features as conditional-gradient steps.
    #[serde(rename = "F2-RF")]
    F2Rf,
}

impl Family {
    /// Name used in CSV output.
    pub fn name(self) -> &'static str {
        match self {
            Family::F1Fw => "F1-FW",
            Family::F2Kernel => "F2-kernel",
            Family::F2Rf => "F2-RF",
        }
    }
}

/// Full description of an adaptivity experiment. Every field has a default, so a JSON
/// configuration only needs to list the fields it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Target shape.
    pub target: TargetKind,
    /// Input dimension.
    pub d: usize,
    /// Number of ridge components for projection pursuit and multi-index targets.
    pub k: usize,
    /// Projection dimension of multi-index targets.
    pub s: usize,
    /// When set, target weights are supported on this many randomly chosen coordinates.
    pub sparsity: Option<usize>,
    /// Input distribution.
    pub input: InputDomain,
    /// Input radius `R`.
    pub radius: f64,
    /// Sample sizes.
    pub n_grid: Vec<usize>,
    /// Replicates per sample size.
    pub replicates: usize,
    /// Families to train.
    pub families: Vec<Family>,
    /// Activation exponent shared by all families.
    pub alpha: u32,
    /// Norm exponent of the input weights of the F1 family.
    pub p: f64,
    /// Variation-norm budget of the F1 family.
    pub delta: f64,
    /// Conditional-gradient steps, which also sets the number of random features.
    pub steps: usize,
    /// Step-size rule of the F1 family.
    pub step_rule: String,
    /// Random restarts per oracle call; `0` selects the exact oracle.
    pub restarts: usize,
    /// Ridge parameter of the F2 families.
    pub lambda: f64,
    /// Noise standard deviation; defaults to one tenth of the standard deviation of `f*`.
    pub noise: Option<f64>,
    /// Size of the held-out test set.
    pub test_size: usize,
    /// Whether test risk is measured against the noise-free target.
    pub noise_free_test: bool,
    /// Seed from which the target, the test set and every replicate are derived.
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            target: TargetKind::SingleIndex,
            d: 10,
            k: 2,
            s: 2,
            sparsity: None,
            input: InputDomain::Ball { q: 2.0 },
            radius: 1.0,
            n_grid: vec![100, 200, 500],
            replicates: 5,
            families: vec![Family::F1Fw, Family::F2Rf],
            alpha: 1,
            p: 2.0,
            delta: 2.0,
            steps: 50,
            step_rule: "linesearch".into(),
            restarts: 10,
            lambda: 1e-3,
            noise: None,
            test_size: 10_000,
            noise_free_test: true,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    /// Checks ranges and cross-field consistency.
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.k == 0 || self.s == 0 {
            return Err(invalid("d, k and s must be positive"));
        }
        if self.target == TargetKind::MultiIndex && self.s > self.support_size() {
            return Err(invalid(
                "multi-index targets need s no larger than the support size",
            ));
        }
        if let Some(q) = self.sparsity {
            if q == 0 || q > self.d {
                return Err(invalid(format!("sparsity must lie in 1..={}", self.d)));
            }
        }
        if let InputDomain::Ball { q } = self.input {
            if !(q >= 1.0) {
                return Err(invalid("ball exponent must be at least 1"));
            }
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(invalid("radius must be positive"));
        }
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return Err(invalid("n grid must be nonempty and positive"));
        }
        if self.replicates == 0
            || self.families.is_empty()
            || self.steps == 0
            || self.test_size == 0
        {
            return Err(invalid(
                "replicates, families, steps and test size must be positive",
            ));
        }
        if !(1.0..=2.0).contains(&self.p) {
            return Err(invalid("p must lie in [1, 2]"));
        }
        if !(self.delta > 0.0 && self.lambda > 0.0) {
            return Err(invalid("delta and lambda must be positive"));
        }
        if let Some(sigma) = self.noise {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(invalid("noise must be nonnegative"));
            }
        }
        StepRule::parse(&self.step_rule)?;
        Ok(())
    }

    fn support_size(&self) -> usize {
        self.sparsity.unwrap_or(self.d)
    }

    fn data_q(&self) -> f64 {
        match self.input {
            InputDomain::Ball { q } => q,
            InputDomain::Box => f64::INFINITY,
        }
    }
}

/// A target function with its drawn parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Target {
    /// Shape of the target.
    pub kind: TargetKind,
    /// Ridge directions, or the columns of each `W_j` stored consecutively for multi-index targets.
    pub directions: Vec<Vec<f64>>,
    /// Offset of affine targets.
    pub offset: f64,
    /// Number of columns per `W_j`.
    pub s: usize,
}

impl Target {
    /// Draws a target for the configuration, independent of the replicate.
    pub fn draw(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = rng_from_seed(derive_seed(config.seed, 0x7a67));
        let d = config.d;
        let support: Vec<usize> = match config.sparsity {
            Some(q) => {
                let mut idx = sample_indices(&mut rng, d, q).into_vec();
                idx.sort_unstable();
                idx
            }
            None => (0..d).collect(),
        };
        let unit = |rng: &mut crate::linalg::SeededRng| -> Vec<f64> {
            loop {
                let g = sample_gaussian(rng, support.len());
                let nrm = norm2(&g);
                if nrm > 1e-12 {
                    let mut w = vec![0.0; d];
                    for (&j, v) in support.iter().zip(&g) {
                        w[j] = v / nrm;
                    }
                    return w;
                }
            }
        };
        let (directions, offset, s) = match config.target {
            TargetKind::Affine => (
                vec![unit(&mut rng)],
                0.5 * rng.sample::<f64, _>(rand_distr::StandardNormal),
                1,
            ),
            TargetKind::SingleIndex => (vec![unit(&mut rng)], 0.0, 1),
            TargetKind::ProjectionPursuit => {
                ((0..config.k).map(|_| unit(&mut rng)).collect(), 0.0, 1)
            }
            TargetKind::MultiIndex => {
                let mut cols = Vec::with_capacity(config.k * config.s);
                for _ in 0..config.k {
                    let mut block: Vec<Vec<f64>> = Vec::with_capacity(config.s);
                    while block.len() < config.s {
                        let mut w = unit(&mut rng);
                        for b in &block {
                            let c = dot(&w, b);
                            for (wi, bi) in w.iter_mut().zip(b) {
                                *wi -= c * bi;
                            }
                        }
                        let nrm = norm2(&w);
                        if nrm > 1e-8 {
                            block.push(w.iter().map(|v| v / nrm).collect());
                        }
                    }
                    cols.extend(block);
                }
                (cols, 0.0, config.s)
            }
        };
        Ok(Self {
            kind: config.target,
            directions,
            offset,
            s,
        })
    }

    /// Evaluates `f*(x)`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self.kind {
            TargetKind::Affine => dot(&self.directions[0], x) + self.offset,
            TargetKind::SingleIndex => dot(&self.directions[0], x).max(0.0),
            TargetKind::ProjectionPursuit => {
                self.directions
                    .iter()
                    .map(|w| dot(w, x).max(0.0))
                    .sum::<f64>()
                    / self.directions.len() as f64
            }
            TargetKind::MultiIndex => {
                let blocks = self.directions.chunks(self.s);
                let k = blocks.len() as f64;
                blocks
                    .map(|b| b.iter().map(|w| dot(w, x).powi(2)).sum::<f64>().sqrt())
                    .sum::<f64>()
                    / k
            }
        }
    }
}

fn draw_inputs(config: &ExperimentConfig, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_from_seed(seed);
    (0..n)
        .map(|_| sample_lq_ball(&mut rng, config.d, config.data_q(), config.radius))
        .collect()
}

fn test_inputs(config: &ExperimentConfig) -> Vec<Vec<f64>> {
    draw_inputs(config, config.test_size, derive_seed(config.seed, 0x7e57))
}

/// Noise level used for the configuration: the configured value, or one tenth of the
/// standard deviation of `f*` on the test inputs.
pub fn noise_level(config: &ExperimentConfig, target: &Target) -> f64 {
    if let Some(sigma) = config.noise {
        return sigma;
    }
    let vals: Vec<f64> = test_inputs(config).iter().map(|x| target.eval(x)).collect();
    let m = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / m;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
    0.1 * var.sqrt()
}

fn labeled(
    config: &ExperimentConfig,
    target: &Target,
    xs: Vec<Vec<f64>>,
    sigma: f64,
    seed: u64,
) -> Result<Dataset> {
    let mut rng = rng_from_seed(seed);
    let normal = Normal::new(0.0, sigma.max(0.0)).map_err(|e| invalid(e.to_string()))?;
    let ys = xs
        .iter()
        .map(|x| {
            target.eval(x)
                + if sigma > 0.0 {
                    normal.sample(&mut rng)
                } else {
                    0.0
                }
        })
        .collect();
    Dataset::new(xs, ys, config.radius, config.data_q())
}

/// Draws a training sample of size `n` with `x` uniform on the configured domain and
/// `y = f*(x) + σ ε`.
pub fn synth_dataset(config: &ExperimentConfig, n: usize, seed: u64) -> Result<Dataset> {
    let target = Target::draw(config)?;
    let sigma = noise_level(config, &target);
    let xs = draw_inputs(config, n, derive_seed(seed, 1));
    labeled(config, &target, xs, sigma, derive_seed(seed, 2))
}

/// Test risk of one family in one replicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRecord {
    /// Family trained.
    pub family: Family,
    /// Training sample size.
    pub n: usize,
    /// Replicate index.
    pub replicate: usize,
    /// Mean squared error on the test set.
    pub risk: f64,
}

/// Mean test risk of a family at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    /// Family trained.
    pub family: Family,
    /// Training sample size.
    pub n: usize,
    /// Mean test risk over replicates.
    pub mean_risk: f64,
    /// Standard error of the mean (zero with one replicate).
    pub std_error: f64,
}

/// Outcome of [`run_adaptivity`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptivityReport {
    /// Every replicate, ordered by sample size, replicate and family.
    pub records: Vec<ReplicateRecord>,
    /// One row per family and sample size, ordered like the configuration.
    pub summary: Vec<SummaryRow>,
}

impl AdaptivityReport {
    /// Risks of one family at one sample size, indexed by replicate.
    pub fn risks(&self, family: Family, n: usize) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.family == family && r.n == n)
            .map(|r| r.risk)
            .collect()
    }

    /// CSV with header `family,n,mean_test_risk,std_error`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("family,n,mean_test_risk,std_error\n");
        for r in &self.summary {
            let _ = writeln!(
                out,
                "{},{},{:.10e},{:.10e}",
                r.family.name(),
                r.n,
                r.mean_risk,
                r.std_error
            );
        }
        out
    }

    /// CSV with header `family,n,replicate,test_risk`.
    pub fn records_csv(&self) -> String {
        let mut out = String::from("family,n,replicate,test_risk\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{:.10e}",
                r.family.name(),
                r.n,
                r.replicate,
                r.risk
            );
        }
        out
    }
}

struct TestSet {
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
}

fn train_and_score(
    config: &ExperimentConfig,
    family: Family,
    train: &Dataset,
    test: &TestSet,
    seed: u64,
) -> Result<f64> {
    let predictions: Vec<f64> = match family {
        Family::F1Fw => {
            let mut fw = FwConfig::new(config.alpha, config.p, config.delta, config.steps);
            fw.step_rule = StepRule::parse(&config.step_rule)?;
            fw.oracle = if config.restarts == 0 {
                OracleMethod::Exact {
                    budget: DEFAULT_BUDGET,
                }
            } else {
                OracleMethod::Restarts {
                    restarts: config.restarts,
                    seed,
                }
            };
            fw.seed = seed;
            let (model, _) = fw_train(train, &Loss::Squared, &fw)?;
            test.xs
                .iter()
                .map(|x| predict(&model, x))
                .collect::<Result<_>>()?
        }
        Family::F2Kernel | Family::F2Rf => {
            let method = if family == Family::F2Kernel {
                F2Method::ExactKernel
            } else {
                F2Method::RandomFeatures { m: config.steps }
            };
            let f2 = f2_estimate(train, config.alpha, config.lambda, method, seed)?;
            test.xs.par_iter().map(|x| f2.predict(x)).collect()
        }
    };
    let m = test.ys.len() as f64;
    Ok(predictions
        .iter()
        .zip(&test.ys)
        .map(|(f, y)| (f - y).powi(2))
        .sum::<f64>()
        / m)
}

/// Trains every family at every sample size over the replicates and evaluates each on the
/// held-out test set. Replicates run in parallel and the report is deterministic.
pub fn run_adaptivity(config: &ExperimentConfig) -> Result<AdaptivityReport> {
    let target = Target::draw(config)?;
    let sigma = noise_level(config, &target);
    let xs = test_inputs(config);
    let mut rng = rng_from_seed(derive_seed(config.seed, 0x7e58));
    let normal = Normal::new(0.0, sigma).map_err(|e| invalid(e.to_string()))?;
    let ys = xs
        .iter()
        .map(|x| {
            let eps = normal.sample(&mut rng);
            target.eval(x) + if config.noise_free_test { 0.0 } else { eps }
        })
        .collect();
    let test = TestSet { xs, ys };

    let jobs: Vec<(usize, usize)> = config
        .n_grid
        .iter()
        .flat_map(|&n| (0..config.replicates).map(move |r| (n, r)))
        .collect();
    let per_job: Vec<Vec<ReplicateRecord>> = jobs
        .par_iter()
        .map(|&(n, r)| {
            let seed = derive_seed(derive_seed(config.seed, n as u64), r as u64);
            let train_xs = draw_inputs(config, n, derive_seed(seed, 1));
            let train = labeled(config, &target, train_xs, sigma, derive_seed(seed, 2))?;
            config
                .families
                .iter()
                .map(|&family| {
                    let risk =
                        train_and_score(config, family, &train, &test, derive_seed(seed, 3))?;
                    Ok(ReplicateRecord {
                        family,
                        n,
                        replicate: r,
                        risk,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let records: Vec<ReplicateRecord> = per_job.into_iter().flatten().collect();

    let mut summary = Vec::new();
    for &family in &config.families {
        for &n in &config.n_grid {
            let risks: Vec<f64> = records
                .iter()
                .filter(|r| r.family == family && r.n == n)
                .map(|r| r.risk)
                .collect();
            let k = risks.len() as f64;
            let mean = risks.iter().sum::<f64>() / k;
            let std_error = if risks.len() > 1 {
                (risks.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
            } else {
                0.0
            };
            summary.push(SummaryRow {
                family,
                n,
                mean_risk: mean,
                std_error,
            });
        }
    }
    Ok(AdaptivityReport { records, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(target: TargetKind) -> ExperimentConfig {
        ExperimentConfig {
            target,
            d: 3,
            n_grid: vec![20, 80],
            replicates: 2,
            steps: 15,
            test_size: 500,
            families: vec![Family::F1Fw, Family::F2Kernel, Family::F2Rf],
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn noiseless_affine_targets_are_reproduced() {
        let config = ExperimentConfig {
            target: TargetKind::Affine,
            noise: Some(0.0),
            ..small(TargetKind::Affine)
        };
        let ds = synth_dataset(&config, 5, 3).unwrap();
        let t = Target::draw(&config).unwrap();
        for (x, y) in ds.xs().iter().zip(ds.ys()) {
            assert_eq!(*y, dot(&t.directions[0], x) + t.offset);
        }
    }

    #[test]
    fn datasets_are_reproducible_and_inside_the_domain() {
        for input in [InputDomain::Ball { q: 1.5 }, InputDomain::Box] {
            let config = ExperimentConfig {
                input,
                ..small(TargetKind::SingleIndex)
            };
            let a = synth_dataset(&config, 30, 5).unwrap();
            let b = synth_dataset(&config, 30, 5).unwrap();
            assert_eq!(a, b);
            assert_ne!(a, synth_dataset(&config, 30, 6).unwrap());
        }
    }

    #[test]
    fn single_index_targets_are_nonnegative() {
        let config = ExperimentConfig {
            noise: Some(0.0),
            ..small(TargetKind::SingleIndex)
        };
        let ds = synth_dataset(&config, 50, 1).unwrap();
        assert!(ds.ys().iter().all(|&y| y >= 0.0));
    }

    #[test]
    fn sparse_and_multi_index_targets_have_the_right_shape() {
        let config = ExperimentConfig {
            sparsity: Some(2),
            d: 6,
            k: 2,
            s: 2,
            ..small(TargetKind::MultiIndex)
        };
        let t = Target::draw(&config).unwrap();
        assert_eq!(t.directions.len(), 4);
        for block in t.directions.chunks(2) {
            assert!(dot(&block[0], &block[1]).abs() < 1e-12);
            for w in block {
                assert!((norm2(w) - 1.0).abs() < 1e-12);
                assert!(w.iter().filter(|v| **v != 0.0).count() <= 2);
            }
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let base = small(TargetKind::Affine);
        assert!(ExperimentConfig {
            sparsity: Some(9),
            ..base.clone()
        }
        .validate()
        .is_err());
        assert!(ExperimentConfig {
            n_grid: vec![],
            ..base.clone()
        }
        .validate()
        .is_err());
        assert!(ExperimentConfig {
            step_rule: "bogus".into(),
            ..base.clone()
        }
        .validate()
        .is_err());
        assert!(ExperimentConfig { p: 3.0, ..base }.validate().is_err());
    }

    #[test]
    fn config_json_uses_defaults_and_rejects_unknown_fields() {
        let c: ExperimentConfig = serde_json::from_str(
            r#"{"target":"projection-pursuit","input":{"shape":"box"},"families":["F2-RF"]}"#,
        )
        .unwrap();
        assert_eq!(c.target, TargetKind::ProjectionPursuit);
        assert_eq!(c.input, InputDomain::Box);
        assert_eq!(c.families, vec![Family::F2Rf]);
        assert_eq!(c.d, 10);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"dimension":3}"#).is_err());
    }

    #[test]
    fn affine_risk_decreases_and_runs_are_deterministic() {
        let config = small(TargetKind::Affine);
        let a = run_adaptivity(&config).unwrap();
        assert_eq!(a.to_csv(), run_adaptivity(&config).unwrap().to_csv());
        assert_eq!(a.summary.len(), 6);
        assert!(a.records.iter().all(|r| r.risk.is_finite()));
        for family in [Family::F1Fw, Family::F2Kernel] {
            let rows: Vec<&SummaryRow> = a.summary.iter().filter(|r| r.family == family).collect();
            assert!(
                rows[1].mean_risk < rows[0].mean_risk,
                "{family:?}: {rows:?}"
            );
        }
        assert!(a
            .to_csv()
            .starts_with("family,n,mean_test_risk,std_error\nF1-FW,20,"));
    }
}
