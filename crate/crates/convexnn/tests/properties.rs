//! Property tests of the library's invariants.

use proptest::prelude::*;

use convexnn::bounds::{complexity_bound, rademacher_bound, BoundSpec, DEFAULT_C0};
use convexnn::experiment::{run_adaptivity, ExperimentConfig};
use convexnn::fw::{fw_train, FwConfig};
use convexnn::geometry::{zonotope_hausdorff, Zonotope};
use convexnn::harmonics::{lambda_spectrum_quadrature, vanishes_by_parity};
use convexnn::kernels::{gram, kernel, KernelSpec};
use convexnn::linalg::{dot, norm2, rng_from_seed, sample_gaussian, sample_lq_ball};
use convexnn::oracle::{oracle_restarts, DEFAULT_BUDGET};
use convexnn::{
    caratheodory_reduce, oracle_exact, predict, variation_norm, Dataset, Loss, OracleProblem,
    SignedMeasureModel, Unit, WeightedUnit,
};

fn random_model(
    seed: u64,
    units: usize,
    d: usize,
    alpha: u32,
    p: f64,
    radius: f64,
) -> SignedMeasureModel {
    let mut rng = rng_from_seed(seed);
    let units = (0..units)
        .map(|_| WeightedUnit {
            eta: sample_gaussian(&mut rng, 1)[0],
            unit: Unit::from_direction(&sample_gaussian(&mut rng, d + 1), p).unwrap(),
        })
        .collect();
    SignedMeasureModel::from_units(alpha, p, radius, units).unwrap()
}

fn random_points(seed: u64, n: usize, d: usize) -> Vec<Vec<f64>> {
    let mut rng = rng_from_seed(seed);
    (0..n)
        .map(|_| sample_lq_ball(&mut rng, d, 2.0, 1.0))
        .collect()
}

fn lifted(xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    xs.iter()
        .map(|x| {
            let mut z = x.clone();
            z.push(1.0);
            z
        })
        .collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn predictions_are_scale_invariant(
        seed in any::<u64>(),
        alpha in 0u32..=2,
        p in prop::sample::select(vec![1.0, 1.5, 2.0]),
        c in 0.1f64..10.0,
    ) {
        let model = random_model(seed, 6, 3, alpha, p, 1.0);
        let scaled = SignedMeasureModel::from_units(alpha, p, c, model.units().to_vec()).unwrap();
        for x in random_points(seed ^ 1, 5, 3) {
            let cx: Vec<f64> = x.iter().map(|v| c * v).collect();
            prop_assert!(close(predict(&model, &x).unwrap(), predict(&scaled, &cx).unwrap(), 1e-9));
        }
    }

    #[test]
    fn variation_norm_is_absolutely_homogeneous_and_ignores_zero_weights(
        seed in any::<u64>(),
        c in -5.0f64..5.0,
    ) {
        let model = random_model(seed, 8, 2, 1, 2.0, 1.0);
        let expected: f64 = model.units().iter().map(|u| u.eta.abs()).sum();
        prop_assert_eq!(variation_norm(&model), expected);
        let mut scaled = model.clone();
        scaled.scale(c);
        prop_assert!(close(variation_norm(&scaled), c.abs() * expected, 1e-12));
        let mut padded = model.clone();
        padded.push(0.0, Unit::from_direction(&[0.3, -0.2, 0.9], 2.0).unwrap()).unwrap();
        padded.prune();
        for x in random_points(seed ^ 2, 4, 2) {
            prop_assert_eq!(predict(&padded, &x).unwrap(), predict(&model, &x).unwrap());
        }
    }

    #[test]
    fn caratheodory_keeps_predictions_and_norm(
        seed in any::<u64>(),
        units in 5usize..30,
        n in 1usize..7,
        alpha in 0u32..=2,
    ) {
        let model = random_model(seed, units, 2, alpha, 2.0, 1.0);
        let xs = random_points(seed ^ 3, n, 2);
        let reduced = caratheodory_reduce(&model, &xs).unwrap();
        prop_assert!(reduced.units().len() <= n + 1);
        prop_assert!(variation_norm(&reduced) <= variation_norm(&model) + 1e-12);
        for x in &xs {
            prop_assert!(close(predict(&reduced, x).unwrap(), predict(&model, x).unwrap(), 1e-8));
        }
    }

    #[test]
    fn loss_derivatives_match_finite_differences(
        y in -2.0f64..2.0,
        u in -3.0f64..3.0,
        eps in 0.05f64..1.0,
    ) {
        let h = 1e-6;
        for loss in [Loss::Squared, Loss::Logistic, Loss::smoothed_hinge(eps).unwrap()] {
            let fd = (loss.value(y, u + h) - loss.value(y, u - h)) / (2.0 * h);
            prop_assert!((fd - loss.derivative(y, u)).abs() <= 1e-5, "{:?} at ({}, {})", loss, y, u);
        }
    }

    #[test]
    fn oracle_is_consistent_under_scaling_and_sign(
        seed in any::<u64>(),
        n in 2usize..8,
        d in 1usize..3,
        alpha in 0u32..=1,
        c in 0.1f64..10.0,
    ) {
        let zs = lifted(&random_points(seed, n, d));
        let g = sample_gaussian(&mut rng_from_seed(seed ^ 4), n);
        let problem = OracleProblem::new(&zs, &g, alpha, 2.0, 1.0).unwrap();
        let exact = oracle_exact(&problem, DEFAULT_BUDGET).unwrap();
        prop_assert!((problem.signed_value(exact.unit.v()).abs() - exact.value).abs() <= 1e-10);
        let scaled: Vec<f64> = g.iter().map(|v| c * v).collect();
        let sp = OracleProblem::new(&zs, &scaled, alpha, 2.0, 1.0).unwrap();
        prop_assert!(close(sp.signed_value(exact.unit.v()).abs(), c * exact.value, 1e-12));
        prop_assert!(close(oracle_exact(&sp, DEFAULT_BUDGET).unwrap().value, c * exact.value, 1e-10));
        let negated: Vec<f64> = g.iter().map(|v| -v).collect();
        let np = OracleProblem::new(&zs, &negated, alpha, 2.0, 1.0).unwrap();
        prop_assert!(close(oracle_exact(&np, DEFAULT_BUDGET).unwrap().value, exact.value, 1e-10));
        let heuristic = oracle_restarts(&problem, 5, seed).unwrap();
        prop_assert!(heuristic.value <= exact.value + 1e-12);
    }

    #[test]
    fn zonotope_distances_form_a_metric(seed in any::<u64>(), r in 1usize..4) {
        let mut rng = rng_from_seed(seed);
        let mut body = || Zonotope::new((0..r).map(|_| sample_gaussian(&mut rng, 2)).collect(), 2).unwrap();
        let (a, b, c) = (body(), body(), body());
        let h = |x: &Zonotope, y: &Zonotope| zonotope_hausdorff(x, y, DEFAULT_BUDGET).unwrap();
        prop_assert!(h(&a, &a) <= 1e-12);
        prop_assert!(close(h(&a, &b), h(&b, &a), 1e-12));
        prop_assert!(h(&a, &c) <= h(&a, &b) + h(&b, &c) + 1e-10);
    }

    #[test]
    fn gram_matrices_are_psd(seed in any::<u64>(), n in 1usize..25, d in 1usize..5, alpha in 0u32..=2) {
        let spec = KernelSpec::new(alpha, d, 1.0).unwrap();
        let k = gram(&spec, &random_points(seed, n, d));
        prop_assert!((&k - k.transpose()).abs().max() <= 1e-12);
        let min = k.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(min >= -1e-8, "minimum eigenvalue {}", min);
    }

    #[test]
    fn kernels_are_rotation_invariant(
        seed in any::<u64>(),
        d in 2usize..5,
        alpha in 0u32..=2,
        theta in 0.0f64..std::f64::consts::TAU,
    ) {
        let spec = KernelSpec::new(alpha, d, 1.0).unwrap();
        let pts = random_points(seed, 2, d);
        let rotate = |x: &[f64]| {
            let mut y = x.to_vec();
            let (i, j) = ((seed % d as u64) as usize, ((seed / 7 + 1) % d as u64) as usize);
            let (i, j) = if i == j { (i, (i + 1) % d) } else { (i, j) };
            y[i] = theta.cos() * x[i] - theta.sin() * x[j];
            y[j] = theta.sin() * x[i] + theta.cos() * x[j];
            y
        };
        let (x, xp) = (&pts[0], &pts[1]);
        let (rx, rxp) = (rotate(x), rotate(xp));
        prop_assert!(close(norm2(&rx), norm2(x), 1e-12) && close(dot(&rx, &rxp), dot(x, xp), 1e-12));
        prop_assert!(close(kernel(&spec, &rx, &rxp), kernel(&spec, x, xp), 1e-10));
    }

    #[test]
    fn bounds_shrink_with_n_and_scale_linearly(
        n in 1usize..10_000,
        d in 1usize..20,
        alpha in 0u32..=3,
        p in prop::sample::select(vec![1.0, 1.25, 1.5, 2.0]),
        c in 0.1f64..10.0,
    ) {
        prop_assert!(complexity_bound(n + 1, d, alpha, p, DEFAULT_C0) < complexity_bound(n, d, alpha, p, DEFAULT_C0));
        let base = rademacher_bound(&BoundSpec::new(1.0, 1.0, n, p, d, alpha).unwrap()).unwrap();
        let scaled = rademacher_bound(&BoundSpec::new(c, 2.0, n, p, d, alpha).unwrap()).unwrap();
        prop_assert!(close(scaled, 2.0 * c * base, 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn fw_respects_the_budget_and_decreases_risk(
        seed in any::<u64>(),
        n in 3usize..12,
        alpha in 0u32..=1,
        delta in 0.5f64..4.0,
    ) {
        let xs = random_points(seed, n, 2);
        let ys = sample_gaussian(&mut rng_from_seed(seed ^ 5), n);
        let ds = Dataset::new(xs, ys, 1.0, 2.0).unwrap();
        let mut cfg = FwConfig::new(alpha, 2.0, delta, 25);
        cfg.seed = seed;
        let (model, trace) = fw_train(&ds, &Loss::Squared, &cfg).unwrap();
        prop_assert!(variation_norm(&model) <= delta + 1e-9);
        for w in trace.rows.windows(2) {
            prop_assert!(w[1].risk <= w[0].risk + 1e-12);
        }
        let (again, trace_again) = fw_train(&ds, &Loss::Squared, &cfg).unwrap();
        prop_assert_eq!(again, model);
        prop_assert_eq!(trace_again, trace);
    }

    #[test]
    fn spectra_vanish_by_parity(d in 1usize..7, alpha in 0u32..=3) {
        let l = lambda_spectrum_quadrature(d, alpha, 30).unwrap();
        for (k, lk) in l.iter().enumerate() {
            if vanishes_by_parity(alpha, k) {
                prop_assert!(lk.abs() <= 1e-10, "λ_{} = {} for d = {}, α = {}", k, lk, d, alpha);
            } else {
                prop_assert!(lk.abs() > 1e-10, "λ_{} = {} for d = {}, α = {}", k, lk, d, alpha);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn experiments_are_determined_by_config_and_seed(seed in any::<u64>()) {
        let config = ExperimentConfig {
            d: 2,
            n_grid: vec![12],
            replicates: 2,
            steps: 5,
            test_size: 50,
            seed,
            ..Default::default()
        };
        let a = run_adaptivity(&config).unwrap();
        let b = run_adaptivity(&config).unwrap();
        prop_assert_eq!(a.to_csv(), b.to_csv());
        prop_assert_eq!(a.records_csv(), b.records_csv());
    }
}
