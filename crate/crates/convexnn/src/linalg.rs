//! Small dense vector helpers and seeded random sampling.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Seeded generator used everywhere randomness is needed.
pub type SeededRng = ChaCha8Rng;

/// Creates the generator for `seed`.
pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent child seed from `seed` and a stream index (splitmix64 mixing).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Inner product of two equal-length slices.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm.
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// The ℓp norm for `p >= 1` (`p = ∞` accepted).
pub fn norm_p(a: &[f64], p: f64) -> f64 {
    if p == 1.0 {
        a.iter().map(|x| x.abs()).sum()
    } else if p == 2.0 {
        norm2(a)
    } else if p.is_infinite() {
        a.iter().fold(0.0, |m, x| m.max(x.abs()))
    } else {
        a.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// Returns `a / ‖a‖_p`, or `None` when the norm vanishes.
pub fn normalize_p(a: &[f64], p: f64) -> Option<Vec<f64>> {
    let n = norm_p(a, p);
    if n > 0.0 && n.is_finite() {
        Some(a.iter().map(|x| x / n).collect())
    } else {
        None
    }
}

/// `y += s * x`.
pub fn axpy(s: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

/// Samples a point uniformly on the unit Euclidean sphere of dimension `dim - 1`.
pub fn sample_unit_sphere<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        if let Some(v) = normalize_p(&g, 2.0) {
            return v;
        }
    }
}

/// Samples a standard Gaussian vector.
pub fn sample_gaussian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Samples uniformly from the `ℓ_q` ball of the given radius (`q = ∞` gives the box).
///
/// Uses the generalized Gaussian representation: coordinates with density
/// proportional to `exp(−|t|^q)` and an independent unit exponential, normalized jointly.
pub fn sample_lq_ball<R: Rng + ?Sized>(rng: &mut R, dim: usize, q: f64, radius: f64) -> Vec<f64> {
    if q.is_infinite() {
        return (0..dim)
            .map(|_| radius * rng.random_range(-1.0..=1.0))
            .collect();
    }
    let gamma = rand_distr::Gamma::new(1.0 / q, 1.0).expect("positive shape");
    let g: Vec<f64> = (0..dim)
        .map(|_| {
            let mag: f64 = rng.sample(gamma);
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            sign * mag.powf(1.0 / q)
        })
        .collect();
    let e: f64 = rng.sample(rand_distr::Exp1);
    let denom = (g.iter().map(|t| t.abs().powf(q)).sum::<f64>() + e).powf(1.0 / q);
    g.into_iter().map(|t| radius * t / denom).collect()
}

/// Orthonormal basis (as rows) of the span of `vectors`, using singular values above
/// `rel_tol` times the largest one.
pub fn span_basis(vectors: &[Vec<f64>], dim: usize, rel_tol: f64) -> Vec<Vec<f64>> {
    if vectors.is_empty() {
        return Vec::new();
    }
    let m = DMatrix::from_fn(dim, vectors.len(), |i, j| vectors[j][i]);
    let svd = m.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for (k, s) in svd.singular_values.iter().enumerate() {
        if *s > rel_tol * smax {
            out.push(u.column(k).iter().cloned().collect());
        }
    }
    out
}

/// Orthonormal basis of the orthogonal complement of the span of `vectors` in `R^dim`.
pub fn complement_basis(vectors: &[Vec<f64>], dim: usize, rel_tol: f64) -> Vec<Vec<f64>> {
    let span = span_basis(vectors, dim, rel_tol);
    if span.is_empty() {
        return (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
    }
    let m = DMatrix::from_fn(dim, span.len(), |i, j| span[j][i]);
    let mut padded = DMatrix::zeros(dim, dim);
    padded.view_mut((0, 0), (dim, span.len())).copy_from(&m);
    let svd = padded.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut idx: Vec<usize> = (0..dim).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    idx[span.len()..]
        .iter()
        .map(|&k| u.column(k).iter().cloned().collect())
        .collect()
}

/// Coordinates of `x` in an orthonormal row basis.
pub fn coords(basis: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    basis.iter().map(|b| dot(b, x)).collect()
}

/// Maps coordinates in an orthonormal row basis back to the ambient space.
pub fn uncoords(basis: &[Vec<f64>], c: &[f64], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for (b, ci) in basis.iter().zip(c) {
        axpy(*ci, b, &mut out);
    }
    out
}

/// Unit vector spanning the null space of a `(m-1) x m` matrix given by rows, or `None`
/// when the rows are not linearly independent.
pub fn null_vector(rows: &[Vec<f64>], dim: usize, rel_tol: f64) -> Option<Vec<f64>> {
    let r = rows.len();
    debug_assert!(r < dim);
    let mut a = DMatrix::zeros(dim, dim);
    for (i, row) in rows.iter().enumerate() {
        for j in 0..dim {
            a[(i, j)] = row[j];
        }
    }
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let mut idx: Vec<usize> = (0..dim).collect();
    idx.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
    let smax = svd.singular_values[idx[0]];
    if r > 0 && svd.singular_values[idx[r - 1]] <= rel_tol * smax.max(f64::MIN_POSITIVE) {
        return None;
    }
    let k = idx[dim - 1];
    Some(vt.row(k).iter().cloned().collect())
}

/// Right singular vector of the smallest singular value of a wide matrix given by rows,
/// together with the residual norm `‖A v‖₂`.
pub fn min_right_singular(rows: &[Vec<f64>], dim: usize) -> (Vec<f64>, f64) {
    let mut a = DMatrix::zeros(dim.max(rows.len()), dim);
    for (i, row) in rows.iter().enumerate() {
        for j in 0..dim {
            a[(i, j)] = row[j];
        }
    }
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let k = (0..svd.singular_values.len())
        .min_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]))
        .expect("nonempty matrix");
    let v: Vec<f64> = vt.row(k).iter().cloned().collect();
    let res = rows.iter().map(|r| dot(r, &v).powi(2)).sum::<f64>().sqrt();
    (v, res)
}

/// Symmetric eigen-decomposition returning (eigenvalues ascending, eigenvectors as columns).
pub fn sym_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (c, &i) in idx.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Symmetric square root of a positive semidefinite matrix.
pub fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (vals, vecs) = sym_eigen(m);
    let d = DVector::from_iterator(vals.len(), vals.iter().map(|v| v.max(0.0).sqrt()));
    &vecs * DMatrix::from_diagonal(&d) * vecs.transpose()
}

/// Calls `f` on every increasing `k`-subset of `0..n`, in lexicographic order.
pub fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] < n - k + i {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Binomial coefficient as a float (exact for small arguments).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Log-log regression slope of `ys` against `xs` (both positive).
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    ols_slope(&lx, &ly)
}
