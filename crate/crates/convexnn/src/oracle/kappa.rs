//! Multiplicative approximate oracle built from the exact one.

use super::exact::oracle_exact_candidates;
use super::{better, oracle_exact, OracleProblem, OracleResult, OracleStatus};
use crate::error::{invalid, Result};

/// Returns a visited candidate whose value is at least `1/κ` of the exact maximum, choosing
/// the weakest such candidate. With `κ = 1` this is the exact oracle.
pub fn kappa_wrap(problem: &OracleProblem<'_>, kappa: f64, budget: f64) -> Result<OracleResult> {
    if !(kappa >= 1.0 && kappa.is_finite()) {
        return Err(invalid(format!("kappa must be at least 1, got {kappa}")));
    }
    if kappa == 1.0 {
        let mut r = oracle_exact(problem, budget)?;
        r.kappa = Some(1.0);
        return Ok(r);
    }
    let cands = oracle_exact_candidates(problem, budget)?;
    let max = cands
        .iter()
        .map(|c| c.signed_value.abs())
        .fold(0.0, f64::max);
    let floor = max / kappa;
    let mut chosen: Option<(f64, &[f64])> = None;
    for c in &cands {
        let val = c.signed_value.abs();
        if val < floor {
            continue;
        }
        let replace = match chosen {
            None => true,
            Some((cv, cx)) => val < cv || (val == cv && better(val, &c.v, cv, cx)),
        };
        if replace {
            chosen = Some((val, &c.v));
        }
    }
    let (_, v) = chosen.expect("the maximizer clears the floor");
    let mut r = OracleResult::from_direction(problem, v.to_vec(), OracleStatus::Heuristic)?;
    r.kappa = Some(kappa);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{rng_from_seed, sample_gaussian};
    use crate::oracle::DEFAULT_BUDGET;

    #[test]
    fn kappa_one_is_identity() {
        let zs = vec![vec![1.0, 0.2], vec![-0.5, 1.0], vec![0.3, -1.0]];
        let g = [1.0, -0.5, 0.7];
        let p = OracleProblem::new(&zs, &g, 1, 2.0, 1.0).unwrap();
        let a = kappa_wrap(&p, 1.0, DEFAULT_BUDGET).unwrap();
        let b = oracle_exact(&p, DEFAULT_BUDGET).unwrap();
        assert_eq!(a.unit, b.unit);
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn kappa_two_stays_within_contract() {
        let mut rng = rng_from_seed(2);
        for _ in 0..10 {
            let zs: Vec<Vec<f64>> = (0..6).map(|_| sample_gaussian(&mut rng, 2)).collect();
            let g = sample_gaussian(&mut rng, 6);
            let p = OracleProblem::new(&zs, &g, 1, 2.0, 1.0).unwrap();
            let exact = oracle_exact(&p, DEFAULT_BUDGET).unwrap().value;
            let r = kappa_wrap(&p, 2.0, DEFAULT_BUDGET).unwrap();
            assert!(r.value >= exact / 2.0 - 1e-15 && r.value <= exact + 1e-15);
        }
    }

    #[test]
    fn rejects_small_kappa() {
        let zs = vec![vec![1.0, 0.0]];
        let p = OracleProblem::new(&zs, &[1.0], 1, 2.0, 1.0).unwrap();
        assert!(kappa_wrap(&p, 0.5, DEFAULT_BUDGET).is_err());
    }
}
