//! Enumeration of the faces of a central hyperplane arrangement.
//!
//! For vectors `a_1, …, a_N` the arrangement consists of the hyperplanes `a_iᵀv = 0`.
//! Every nonzero `v` lies in exactly one relatively open face, identified by its sign
//! vector `(sign(a_iᵀv))_i`. Full-dimensional cells of a spanning arrangement are pointed
//! cones, so each one touches an extreme ray. Cells are therefore found by walking all
//! rays and recursing on the arrangement of the hyperplanes through each ray.
//! Lower-dimensional faces are the cells of the arrangement restricted to each flat.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::linalg::{
    binomial, complement_basis, coords, dot, for_each_combination, norm2, null_vector, span_basis,
    uncoords,
};

const ZERO_TOL: f64 = 1e-11;
const RANK_TOL: f64 = 1e-10;

/// A relatively open face of the arrangement.
#[derive(Debug, Clone)]
pub struct Face {
    /// A unit-norm point inside the face.
    pub point: Vec<f64>,
    /// Orthonormal basis of the flat spanned by the face.
    pub flat: Vec<Vec<f64>>,
    /// Sign of `a_iᵀ point` for each input vector.
    pub signs: Vec<i8>,
}

/// Sign pattern of `v` against every vector, with a scale-aware zero test.
pub fn sign_vector(vectors: &[Vec<f64>], v: &[f64]) -> Vec<i8> {
    let nv = norm2(v);
    vectors
        .iter()
        .map(|a| {
            let s = dot(a, v);
            if s.abs() <= ZERO_TOL * norm2(a) * nv {
                0
            } else if s > 0.0 {
                1
            } else {
                -1
            }
        })
        .collect()
}

/// Upper estimate of the number of subset evaluations needed to list every face.
pub fn work_estimate(n_vectors: usize, rank: usize) -> f64 {
    if rank == 0 {
        return 1.0;
    }
    (0..rank)
        .map(|c| {
            binomial(n_vectors, c) * binomial(n_vectors.saturating_sub(c), rank - 1 - c).max(1.0)
        })
        .sum()
}

/// Lists every face of the arrangement of `vectors` in `R^dim`, restricted to the span of the
/// vectors. Fails with a budget error when [`work_estimate`] exceeds `budget`.
pub fn faces(vectors: &[Vec<f64>], dim: usize, budget: f64) -> Result<Vec<Face>> {
    let live: Vec<Vec<f64>> = vectors.iter().filter(|a| norm2(a) > 0.0).cloned().collect();
    let basis = span_basis(&live, dim, RANK_TOL);
    let m = basis.len();
    let est = work_estimate(live.len(), m);
    if est > budget {
        return Err(Error::BudgetExceeded(format!(
            "face enumeration needs about {est:.3e} subset evaluations, budget is {budget:.3e}"
        )));
    }
    if m == 0 {
        return Ok(Vec::new());
    }
    let local: Vec<Vec<f64>> = live.iter().map(|a| coords(&basis, a)).collect();

    let mut seen_flats: HashSet<Vec<usize>> = HashSet::new();
    let mut seen_faces: HashSet<Vec<i8>> = HashSet::new();
    let mut out = Vec::new();
    for c in 0..m {
        for_each_combination(local.len(), c, |subset| {
            let gens: Vec<Vec<f64>> = subset.iter().map(|&i| local[i].clone()).collect();
            if span_basis(&gens, m, RANK_TOL).len() != c {
                return;
            }
            let flat = complement_basis(&gens, m, RANK_TOL);
            let closure: Vec<usize> = (0..local.len())
                .filter(|&j| {
                    coords(&flat, &local[j])
                        .iter()
                        .all(|x| x.abs() <= ZERO_TOL * norm2(&local[j]))
                })
                .collect();
            if !seen_flats.insert(closure.clone()) {
                return;
            }
            let rest: Vec<usize> = (0..local.len())
                .filter(|j| closure.binary_search(j).is_err())
                .collect();
            let projected: Vec<Vec<f64>> = rest.iter().map(|&j| coords(&flat, &local[j])).collect();
            for w in cells(&projected, flat.len()) {
                let v_local = uncoords(&flat, &w, m);
                let v = uncoords(&basis, &v_local, dim);
                let signs = sign_vector(vectors, &v);
                if seen_faces.insert(signs.clone()) {
                    let flat_ambient = flat.iter().map(|f| uncoords(&basis, f, dim)).collect();
                    out.push(Face {
                        point: normalize(v),
                        flat: flat_ambient,
                        signs,
                    });
                }
            }
        });
    }
    Ok(out)
}

fn normalize(v: Vec<f64>) -> Vec<f64> {
    let n = norm2(&v);
    v.into_iter().map(|x| x / n).collect()
}

/// Representatives (unit norm) of every full-dimensional cell of the arrangement of `vectors`
/// in `R^m`.
pub fn cells(vectors: &[Vec<f64>], m: usize) -> Vec<Vec<f64>> {
    let live: Vec<Vec<f64>> = vectors.iter().filter(|a| norm2(a) > 0.0).cloned().collect();
    if live.is_empty() {
        let mut e = vec![0.0; m];
        if m > 0 {
            e[0] = 1.0;
        }
        return if m > 0 { vec![e] } else { Vec::new() };
    }
    let basis = span_basis(&live, m, RANK_TOL);
    if basis.len() < m {
        let r = basis.len();
        let local: Vec<Vec<f64>> = live.iter().map(|a| coords(&basis, a)).collect();
        return cells(&local, r)
            .into_iter()
            .map(|w| uncoords(&basis, &w, m))
            .collect();
    }
    if m == 1 {
        return vec![vec![1.0], vec![-1.0]];
    }

    let mut seen_rays: HashSet<Vec<i8>> = HashSet::new();
    let mut seen_cells: HashSet<Vec<i8>> = HashSet::new();
    let mut out = Vec::new();
    for_each_combination(live.len(), m - 1, |subset| {
        let rows: Vec<Vec<f64>> = subset.iter().map(|&i| live[i].clone()).collect();
        let Some(r) = null_vector(&rows, m, RANK_TOL) else {
            return;
        };
        for s in [1.0, -1.0] {
            let ray: Vec<f64> = r.iter().map(|x| s * x).collect();
            let ray_signs = sign_vector(&live, &ray);
            if !seen_rays.insert(ray_signs.clone()) {
                continue;
            }
            let zero: Vec<usize> = (0..live.len()).filter(|&j| ray_signs[j] == 0).collect();
            let perp = complement_basis(std::slice::from_ref(&ray), m, RANK_TOL);
            let sub: Vec<Vec<f64>> = zero.iter().map(|&j| coords(&perp, &live[j])).collect();
            for w_local in cells(&sub, m - 1) {
                let w = uncoords(&perp, &w_local, m);
                let mut eps = 1.0f64;
                for (j, a) in live.iter().enumerate() {
                    if ray_signs[j] != 0 {
                        let aw = dot(a, &w).abs();
                        if aw > 0.0 {
                            eps = eps.min(0.5 * dot(a, &ray).abs() / aw);
                        }
                    }
                }
                let v: Vec<f64> = ray.iter().zip(&w).map(|(a, b)| a + eps * b).collect();
                let signs = sign_vector(&live, &v);
                if signs.contains(&0) {
                    continue;
                }
                if seen_cells.insert(signs) {
                    out.push(normalize(v));
                }
            }
        }
    });
    out
}
