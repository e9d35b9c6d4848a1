//! Spherical harmonics on `S^d ⊂ R^{d+1}`: Legendre (Gegenbauer) polynomials, harmonic
//! dimensions, Funk-Hecke coefficients of the activation, `γ₂` norms of ridge functions,
//! Poisson-smoothed approximants and the kernel series.
//!
//! Integrals `∫_{-1}^1 f(t)(1−t²)^{(d−2)/2} dt` are computed in the variable `t = cos θ`, where
//! the weight becomes `sin^{d−1}θ`, with Gauss-Legendre rules on `[0, π/2]` and `[π/2, π]`.
//! This is exact up to rounding for integrands that are smooth away from `t = 0`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{invalid, Result};
use crate::linalg::loglog_slope;
use crate::Error;

/// Requested tolerance of the adaptive quadrature.
pub const QUADRATURE_TOL: f64 = 1e-12;
/// Relative size below which a harmonic coefficient is treated as zero.
pub const COEFFICIENT_FLOOR: f64 = 1e-12;
/// Points of the grid used to estimate sup-norm errors.
pub const SUP_GRID: usize = 10_000;

/// Legendre polynomial of degree `k` in dimension `d + 1`, normalized by `P_k(1) = 1`,
/// evaluated by its three-term recurrence.
pub fn legendre_p(k: usize, d: usize, t: f64) -> f64 {
    let mut prev = 1.0;
    if k == 0 {
        return prev;
    }
    let mut cur = t;
    let df = d as f64;
    for j in 1..k {
        let jf = j as f64;
        let next = ((2.0 * jf + df - 1.0) * t * cur - jf * prev) / (jf + df - 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// All of `P_0(t), …, P_K(t)` in one pass of the recurrence.
pub fn legendre_all(kmax: usize, d: usize, t: f64) -> Vec<f64> {
    let rec = Recurrence::new(kmax, d);
    let mut out = vec![0.0; kmax + 1];
    rec.fill(t, &mut out);
    out
}

/// Precomputed coefficients `P_{j+1} = a_j t P_j − b_j P_{j−1}`.
struct Recurrence {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl Recurrence {
    fn new(kmax: usize, d: usize) -> Self {
        let df = d as f64;
        let (a, b) = (1..kmax.max(1))
            .map(|j| {
                let jf = j as f64;
                (
                    (2.0 * jf + df - 1.0) / (jf + df - 1.0),
                    jf / (jf + df - 1.0),
                )
            })
            .unzip();
        Self { a, b }
    }

    fn fill(&self, t: f64, out: &mut [f64]) {
        out[0] = 1.0;
        if out.len() == 1 {
            return;
        }
        out[1] = t;
        for j in 1..out.len() - 1 {
            out[j + 1] = self.a[j - 1] * t * out[j] - self.b[j - 1] * out[j - 1];
        }
    }
}

/// Number `N(d, k)` of independent spherical harmonics of degree `k` on `S^d`, exact in 128
/// bits. Fails if the value overflows.
pub fn harmonic_dim(d: usize, k: usize) -> Result<u128> {
    if d == 0 {
        return Err(invalid("d must be at least 1"));
    }
    if k == 0 {
        return Ok(1);
    }
    let overflow = || invalid(format!("N({d}, {k}) overflows 128 bits"));
    let mut binom: u128 = 1;
    let (n, r) = ((k + d - 2) as u128, (d - 1) as u128);
    for i in 0..r {
        binom = binom.checked_mul(n - i).ok_or_else(overflow)? / (i + 1);
    }
    let num = binom
        .checked_mul((2 * k + d - 1) as u128)
        .ok_or_else(overflow)?;
    Ok(num / k as u128)
}

fn harmonic_dim_f64(d: usize, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let (kf, df) = (k as f64, d as f64);
    let ln_binom = ln_gamma(kf + df - 1.0) - ln_gamma(df) - ln_gamma(kf);
    (2.0 * kf + df - 1.0) / kf * ln_binom.exp()
}

/// Surface-area ratio `ω_{d−1}/ω_d = Γ((d+1)/2) / (√π Γ(d/2))`.
pub fn omega_ratio(d: usize) -> f64 {
    let df = d as f64;
    (ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0)).exp() / PI.sqrt()
}

/// Gauss-Legendre nodes and weights on `[−1, 1]` by Newton iteration on the Legendre
/// recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    let half = n.div_ceil(2);
    let pairs: Vec<(usize, f64, f64)> = (0..half)
        .into_par_iter()
        .map(|i| {
            let th = PI * (i as f64 + 0.75) / (nf + 0.5);
            let mut z = (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf)) * th.cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, z);
                for j in 1..n {
                    let jf = j as f64;
                    let p2 = ((2.0 * jf + 1.0) * z * p1 - jf * p0) / (jf + 1.0);
                    p0 = p1;
                    p1 = p2;
                }
                let (p, pm) = if n == 0 { (1.0, 0.0) } else { (p1, p0) };
                dp = nf * (z * p - pm) / (z * z - 1.0);
                let dz = p / dp;
                z -= dz;
                if dz.abs() <= 1e-16 * z.abs().max(1e-300) {
                    break;
                }
            }
            (i, z, 2.0 / ((1.0 - z * z) * dp * dp))
        })
        .collect();
    for (i, z, wi) in pairs {
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Nodes `t_j = cos θ_j` and weights `w_j` such that `Σ_j w_j f(t_j)` approximates
/// `∫_{-1}^1 f(t)(1−t²)^{(d−2)/2} dt`, using `n` Gauss-Legendre points per half of `[0, π]`.
fn weighted_rule(n: usize, d: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let mut out = Vec::with_capacity(2 * n);
    for (lo, hi) in [(0.0, PI / 2.0), (PI / 2.0, PI)] {
        let (mid, rad) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        for (xi, wi) in x.iter().zip(&w) {
            let th: f64 = mid + rad * xi;
            out.push((th.cos(), rad * wi * th.sin().powi(d as i32 - 1)));
        }
    }
    out
}

/// Projections `c_k = (ω_{d−1}/ω_d) ∫ φ(t) P_k(t) (1−t²)^{(d−2)/2} dt` for `k = 0..=kmax`,
/// refined by doubling the rule until two successive answers agree to [`QUADRATURE_TOL`].
pub fn funk_hecke_coefficients(
    phi: &(dyn Fn(f64) -> f64 + Sync),
    d: usize,
    kmax: usize,
) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(invalid("d must be at least 1"));
    }
    let ratio = omega_ratio(d);
    let rec = Recurrence::new(kmax, d);
    let eval = |n: usize| -> Vec<f64> {
        let rule = weighted_rule(n, d);
        let partial: Vec<Vec<f64>> = rule
            .par_chunks(256)
            .map(|chunk| {
                let mut acc = vec![0.0; kmax + 1];
                let mut p = vec![0.0; kmax + 1];
                for &(t, w) in chunk {
                    let f = phi(t) * w;
                    if f == 0.0 {
                        continue;
                    }
                    rec.fill(t, &mut p);
                    for (a, pk) in acc.iter_mut().zip(&p) {
                        *a += f * pk;
                    }
                }
                acc
            })
            .collect();
        let mut out = vec![0.0; kmax + 1];
        for acc in partial {
            for (o, a) in out.iter_mut().zip(acc) {
                *o += a;
            }
        }
        out.into_iter().map(|v| v * ratio).collect()
    };
    let mut n = 3 * kmax / 4 + 32;
    let mut prev = eval(n);
    for _ in 0..6 {
        n += n / 2;
        let next = eval(n);
        let err = next
            .iter()
            .zip(&prev)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if err <= QUADRATURE_TOL {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::ToleranceNotMet(format!(
        "Funk-Hecke quadrature for degrees up to {kmax} did not settle"
    )))
}

/// Funk-Hecke coefficient `λ_k` of `σ(t) = (t)₊^α` on `S^d`, by quadrature.
pub fn lambda_quadrature(d: usize, alpha: u32, k: usize) -> Result<f64> {
    Ok(lambda_spectrum_quadrature(d, alpha, k)?[k])
}

/// `λ_0, …, λ_K` by quadrature.
pub fn lambda_spectrum_quadrature(d: usize, alpha: u32, kmax: usize) -> Result<Vec<f64>> {
    funk_hecke_coefficients(&|t| crate::model::activation(t, alpha), d, kmax)
}

/// Whether `λ_k` vanishes by parity: `k > α` and `k ≡ α (mod 2)`.
pub fn vanishes_by_parity(alpha: u32, k: usize) -> bool {
    k > alpha as usize && (k - alpha as usize).is_multiple_of(2)
}

/// Closed-form `λ_k` for `k ≥ α + 1`, with both prefactors side by side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedLambda {
    /// Value with the prefactor `(d−1)/(2π)` standing for `ω_{d−1}/ω_d`.
    pub printed: f64,
    /// Value with the exact ratio `ω_{d−1}/ω_d`.
    pub corrected: f64,
    /// Whether the printed value agrees with quadrature to `1e-10`.
    pub printed_agrees: bool,
    /// Whether the value is zero by parity.
    pub zero_by_parity: bool,
}

/// Evaluates the closed form of `λ_k` obtained by `α` integrations by parts,
/// `c · α! (−1)^{(k−α−1)/2} 2^{−k} Γ(d/2)Γ(k−α) / (Γ((k−α+1)/2) Γ((k+d+α+1)/2))`, once with
/// `c = (d−1)/(2π)` and once with `c = ω_{d−1}/ω_d`, and compares the first with quadrature.
pub fn lambda_closed(d: usize, alpha: u32, k: usize) -> Result<ClosedLambda> {
    if d == 0 {
        return Err(invalid("d must be at least 1"));
    }
    let a = alpha as usize;
    if k < a + 1 {
        return Err(invalid(format!(
            "the closed form needs k ≥ α + 1 = {}",
            a + 1
        )));
    }
    if vanishes_by_parity(alpha, k) {
        return Ok(ClosedLambda {
            printed: 0.0,
            corrected: 0.0,
            printed_agrees: true,
            zero_by_parity: true,
        });
    }
    let (df, kf, af) = (d as f64, k as f64, alpha as f64);
    let sign = if ((k - a - 1) / 2).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    };
    let log_mag = ln_gamma(af + 1.0) - kf * 2f64.ln() + ln_gamma(df / 2.0) + ln_gamma(kf - af)
        - ln_gamma((kf - af + 1.0) / 2.0)
        - ln_gamma((kf + df + af + 1.0) / 2.0);
    let core = sign * log_mag.exp();
    let printed = (df - 1.0) / (2.0 * PI) * core;
    let corrected = omega_ratio(d) * core;
    let quad = lambda_quadrature(d, alpha, k)?;
    Ok(ClosedLambda {
        printed,
        corrected,
        printed_agrees: (printed - quad).abs() <= 1e-10,
        zero_by_parity: false,
    })
}

/// Fourier closed forms of `λ_k` on the circle (`d = 1`) for `α ≤ 2`.
pub fn lambda_fourier(alpha: u32, k: usize) -> Result<f64> {
    let kf = k as f64;
    let half_sin = (kf * PI / 2.0).sin();
    let half_cos = (kf * PI / 2.0).cos();
    let snap = |v: f64| if v.abs() < 1e-12 { 0.0 } else { v.round() };
    Ok(match (alpha, k) {
        (0, 0) => 0.5,
        (0, _) => snap(half_sin) / (PI * kf),
        (1, 1) => 0.25,
        (1, _) => -snap(half_cos) / (PI * (kf * kf - 1.0)),
        (2, 0) => 0.25,
        (2, 2) => 0.125,
        (2, _) => -8.0 * snap(half_sin) / (4.0 * PI * kf * (kf * kf - 4.0)),
        _ => return Err(invalid(format!("no Fourier closed form for α = {alpha}"))),
    })
}

/// Where a spectrum entry came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Integration-by-parts closed form with the printed prefactor.
    ClosedForm,
    /// Adaptive Gauss-Legendre quadrature.
    Quadrature,
    /// Fourier closed form on the circle.
    Fourier,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Provenance::ClosedForm => "closed-form",
            Provenance::Quadrature => "quadrature",
            Provenance::Fourier => "fourier",
        })
    }
}

/// Method for [`spectrum`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumMethod {
    /// Quadrature for every degree.
    Quadrature,
    /// Closed form where it applies (`k ≥ α + 1`), quadrature below.
    Closed,
    /// Fourier closed forms (`d = 1`, `α ≤ 2`).
    Fourier,
}

impl std::str::FromStr for SpectrumMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quad" | "quadrature" => Ok(Self::Quadrature),
            "closed" => Ok(Self::Closed),
            "fourier" => Ok(Self::Fourier),
            other => Err(invalid(format!("unknown spectrum method {other:?}"))),
        }
    }
}

/// Funk-Hecke spectrum of the activation with per-entry provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarmonicSpectrum {
    /// Sphere dimension `d` of `S^d`.
    pub d: usize,
    /// Activation exponent.
    pub alpha: u32,
    /// `λ_k` for `k = 0..=K`.
    pub lambdas: Vec<f64>,
    /// Source of each entry.
    pub provenance: Vec<Provenance>,
}

/// Computes `λ_0, …, λ_K` with the requested method.
pub fn spectrum(
    d: usize,
    alpha: u32,
    kmax: usize,
    method: SpectrumMethod,
) -> Result<HarmonicSpectrum> {
    let (lambdas, provenance) = match method {
        SpectrumMethod::Quadrature => (
            lambda_spectrum_quadrature(d, alpha, kmax)?,
            vec![Provenance::Quadrature; kmax + 1],
        ),
        SpectrumMethod::Closed => {
            let quad = lambda_spectrum_quadrature(d, alpha, kmax.min(alpha as usize))?;
            let mut l = Vec::with_capacity(kmax + 1);
            let mut p = Vec::with_capacity(kmax + 1);
            for k in 0..=kmax {
                if k <= alpha as usize {
                    l.push(quad[k]);
                    p.push(Provenance::Quadrature);
                } else {
                    l.push(lambda_closed_printed(d, alpha, k));
                    p.push(Provenance::ClosedForm);
                }
            }
            (l, p)
        }
        SpectrumMethod::Fourier => {
            if d != 1 {
                return Err(invalid("Fourier closed forms exist for d = 1 only"));
            }
            (
                (0..=kmax)
                    .map(|k| lambda_fourier(alpha, k))
                    .collect::<Result<Vec<f64>>>()?,
                vec![Provenance::Fourier; kmax + 1],
            )
        }
    };
    Ok(HarmonicSpectrum {
        d,
        alpha,
        lambdas,
        provenance,
    })
}

fn lambda_closed_printed(d: usize, alpha: u32, k: usize) -> f64 {
    if vanishes_by_parity(alpha, k) {
        return 0.0;
    }
    let (df, kf, af) = (d as f64, k as f64, alpha as f64);
    let a = alpha as usize;
    let sign = if ((k - a - 1) / 2).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    };
    let log_mag = ln_gamma(af + 1.0) - kf * 2f64.ln() + ln_gamma(df / 2.0) + ln_gamma(kf - af)
        - ln_gamma((kf - af + 1.0) / 2.0)
        - ln_gamma((kf + df + af + 1.0) / 2.0);
    (df - 1.0) / (2.0 * PI) * sign * log_mag.exp()
}

/// Fitted log-log slope of `|λ_k|` over the nonzero degrees in `[k_lo, k_hi]`.
pub fn decay_slope(lambdas: &[f64], alpha: u32, k_lo: usize, k_hi: usize) -> f64 {
    let (ks, ls): (Vec<f64>, Vec<f64>) = (k_lo..=k_hi.min(lambdas.len() - 1))
        .filter(|&k| !vanishes_by_parity(alpha, k))
        .map(|k| (k as f64, lambdas[k].abs()))
        .unzip();
    loglog_slope(&ks, &ls)
}

/// A ridge profile `φ : [−1, 1] → R`, smooth except possibly at `t = 0`.
pub struct RidgeProfile {
    phi: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    label: String,
}

impl std::fmt::Debug for RidgeProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RidgeProfile")
            .field("label", &self.label)
            .finish()
    }
}

impl RidgeProfile {
    /// Wraps an arbitrary profile.
    pub fn new(label: impl Into<String>, phi: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            phi: Box::new(phi),
            label: label.into(),
        }
    }

    /// `φ(t) = t`.
    pub fn linear() -> Self {
        Self::new("linear", |t| t)
    }

    /// `φ(t) = |t|`.
    pub fn abs() -> Self {
        Self::new("abs", f64::abs)
    }

    /// `φ(t) = (t)₊^α`, the activation itself.
    pub fn activation(alpha: u32) -> Self {
        Self::new(format!("activation-{alpha}"), move |t| {
            crate::model::activation(t, alpha)
        })
    }

    /// `φ = P_j` in dimension `d + 1`.
    pub fn legendre(j: usize, d: usize) -> Self {
        Self::new(format!("legendre-{j}"), move |t| legendre_p(j, d, t))
    }

    /// Polynomial `Σ_i c_i t^i`.
    pub fn polynomial(coefficients: Vec<f64>) -> Self {
        Self::new("polynomial", move |t| {
            coefficients.iter().rev().fold(0.0, |acc, c| acc * t + c)
        })
    }

    /// Evaluates the profile.
    pub fn eval(&self, t: f64) -> f64 {
        (self.phi)(t)
    }

    /// Short name.
    pub fn label(&self) -> &str {
        &self.label
    }
}

/// Convergence verdict of a `γ₂` partial-sum sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Gamma2Verdict {
    /// The tail terms vanish or decay faster than `1/k`.
    Converged,
    /// The tail terms do not decay fast enough for the series to converge.
    Diverging,
}

/// Outcome of [`gamma2_ridge`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gamma2Result {
    /// `√S_K`, reported only when the series converges.
    pub value: Option<f64>,
    /// Partial sums `S_0, …, S_K` of `‖g_k‖²/λ_k²`.
    pub partial_sums: Vec<f64>,
    /// Verdict from the tail terms.
    pub verdict: Gamma2Verdict,
}

fn snap_coefficients(coef: &mut [f64], lambdas: &[f64], alpha: u32) -> Result<()> {
    let scale = coef.iter().map(|c| c.abs()).fold(0.0, f64::max);
    for (k, c) in coef.iter_mut().enumerate() {
        if c.abs() <= COEFFICIENT_FLOOR * scale {
            *c = 0.0;
        } else if vanishes_by_parity(alpha, k) || lambdas[k] == 0.0 {
            return Err(Error::ParityViolation {
                degree: k,
                coefficient: c.abs(),
            });
        }
    }
    Ok(())
}

fn snap_lambdas(lambdas: &mut [f64], alpha: u32) {
    for (k, l) in lambdas.iter_mut().enumerate() {
        if vanishes_by_parity(alpha, k) {
            *l = 0.0;
        }
    }
}

/// `γ₂` norm of `x ↦ φ(wᵀx)` on `S^d` from its harmonic expansion, truncated at degree `K`.
/// Fails with a parity violation when `φ` has mass on a degree where `λ_k = 0`.
pub fn gamma2_ridge(
    profile: &RidgeProfile,
    d: usize,
    alpha: u32,
    kmax: usize,
) -> Result<Gamma2Result> {
    if kmax < 4 {
        return Err(invalid("need K ≥ 4"));
    }
    let mut lambdas = lambda_spectrum_quadrature(d, alpha, kmax)?;
    snap_lambdas(&mut lambdas, alpha);
    let mut coef = funk_hecke_coefficients(&|t| profile.eval(t), d, kmax)?;
    snap_coefficients(&mut coef, &lambdas, alpha)?;
    let terms: Vec<f64> = (0..=kmax)
        .map(|k| {
            if coef[k] == 0.0 {
                0.0
            } else {
                harmonic_dim_f64(d, k) * (coef[k] / lambdas[k]).powi(2)
            }
        })
        .collect();
    let mut partial_sums = Vec::with_capacity(kmax + 1);
    let mut s = 0.0;
    for t in &terms {
        s += t;
        partial_sums.push(s);
    }
    let verdict = tail_verdict(&terms, s);
    let value = (verdict == Gamma2Verdict::Converged).then(|| s.sqrt());
    Ok(Gamma2Result {
        value,
        partial_sums,
        verdict,
    })
}

fn tail_verdict(terms: &[f64], total: f64) -> Gamma2Verdict {
    let k_hi = terms.len() - 1;
    let (ks, ts): (Vec<f64>, Vec<f64>) = (k_hi / 2..=k_hi)
        .filter(|&k| terms[k] > 0.0)
        .map(|k| (k as f64, terms[k]))
        .unzip();
    if ks.len() < 3 || ts.iter().cloned().fold(0.0, f64::max) <= 1e-14 * total {
        return Gamma2Verdict::Converged;
    }
    if loglog_slope(&ks, &ts) < -1.1 {
        Gamma2Verdict::Converged
    } else {
        Gamma2Verdict::Diverging
    }
}

/// Poisson-smoothed approximant `ĝ_k = r^k g_k` of a ridge profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoissonApproximant {
    /// Damping factor.
    pub r: f64,
    /// Sphere dimension.
    pub d: usize,
    /// Damped coefficients `r^k N(d,k) c_k`, so that `ĝ(t) = Σ_k a_k P_k(t)`.
    pub coefficients: Vec<f64>,
    /// `γ₂(ĝ)`.
    pub gamma2: f64,
    /// `max |ĝ(t) − φ(t)|` over a uniform grid of [`SUP_GRID`] points in `[−1, 1]`.
    pub sup_error: f64,
}

impl PoissonApproximant {
    /// Evaluates `ĝ(t)`.
    pub fn eval(&self, t: f64) -> f64 {
        let p = legendre_all(self.coefficients.len() - 1, self.d, t);
        self.coefficients.iter().zip(&p).map(|(a, b)| a * b).sum()
    }

    fn eval_grid(&self, ts: &[f64]) -> Vec<f64> {
        let rec = Recurrence::new(self.coefficients.len() - 1, self.d);
        ts.par_chunks(64)
            .flat_map_iter(|chunk| {
                let mut p = vec![0.0; self.coefficients.len()];
                chunk
                    .iter()
                    .map(|&t| {
                        rec.fill(t, &mut p);
                        self.coefficients
                            .iter()
                            .zip(&p)
                            .map(|(a, b)| a * b)
                            .sum::<f64>()
                    })
                    .collect::<Vec<f64>>()
            })
            .collect()
    }
}

/// Largest degree kept by [`poisson_approximant`].
pub const POISSON_MAX_DEGREE: usize = 20_000;

/// Degree up to which a profile is first expanded to detect a finite band limit.
const POISSON_PROBE_DEGREE: usize = 256;

/// Damps the harmonic expansion of `φ` by `r^k`. The series stops at the band limit of `φ`
/// when it has one, and otherwise where `r^k` falls below `1e-13`, capped at
/// [`POISSON_MAX_DEGREE`].
pub fn poisson_approximant(
    profile: &RidgeProfile,
    d: usize,
    alpha: u32,
    r: f64,
) -> Result<PoissonApproximant> {
    if !(r > 0.0 && r < 1.0) {
        return Err(invalid("r must lie in (0, 1)"));
    }
    let damped_out = ((1e-13f64.ln() / r.ln()).ceil() as usize).clamp(8, POISSON_MAX_DEGREE);
    let probe = damped_out.min(POISSON_PROBE_DEGREE);
    let mut coef = funk_hecke_coefficients(&|t| profile.eval(t), d, probe)?;
    let bandlimit = {
        let scale = coef.iter().map(|c| c.abs()).fold(0.0, f64::max);
        (0..=probe)
            .rev()
            .find(|&k| coef[k].abs() > COEFFICIENT_FLOOR * scale)
            .unwrap_or(0)
    };
    let kmax = if bandlimit + 8 <= probe {
        bandlimit
    } else {
        damped_out
    };
    if kmax != probe {
        coef = funk_hecke_coefficients(&|t| profile.eval(t), d, kmax)?;
    }
    let mut lambdas = lambda_spectrum_quadrature(d, alpha, kmax)?;
    snap_lambdas(&mut lambdas, alpha);
    snap_coefficients(&mut coef, &lambdas, alpha)?;
    let mut gamma2_sq = 0.0;
    let mut damped = Vec::with_capacity(kmax + 1);
    let mut rk = 1.0;
    for k in 0..=kmax {
        let n = harmonic_dim_f64(d, k);
        if coef[k] != 0.0 {
            gamma2_sq += n * (rk * coef[k] / lambdas[k]).powi(2);
        }
        damped.push(rk * n * coef[k]);
        rk *= r;
    }
    let mut approx = PoissonApproximant {
        r,
        d,
        coefficients: damped,
        gamma2: gamma2_sq.sqrt(),
        sup_error: 0.0,
    };
    let grid: Vec<f64> = (0..SUP_GRID)
        .map(|i| -1.0 + 2.0 * i as f64 / (SUP_GRID - 1) as f64)
        .collect();
    approx.sup_error = approx
        .eval_grid(&grid)
        .iter()
        .zip(&grid)
        .map(|(g, t)| (g - profile.eval(*t)).abs())
        .fold(0.0, f64::max);
    Ok(approx)
}

/// Truncated kernel series `Σ_{k≤K} N(d,k) λ_k² P_k(u)` for unit-norm lifted inputs at
/// cosine `u`.
pub fn kernel_series(d: usize, alpha: u32, kmax: usize, u: f64) -> Result<f64> {
    let spec = spectrum(d, alpha, kmax, SpectrumMethod::Quadrature)?;
    Ok(kernel_series_from(&spec, u))
}

/// Kernel series from a precomputed spectrum.
pub fn kernel_series_from(spec: &HarmonicSpectrum, u: f64) -> f64 {
    let kmax = spec.lambdas.len() - 1;
    let p = legendre_all(kmax, spec.d, u);
    (0..=kmax)
        .filter(|&k| !vanishes_by_parity(spec.alpha, k))
        .map(|k| harmonic_dim_f64(spec.d, k) * spec.lambdas[k].powi(2) * p[k])
        .sum()
}

/// Value of `Γ` re-exported for callers that compare against closed forms.
pub fn gamma_fn(x: f64) -> f64 {
    gamma(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_degree_polynomials() {
        for d in 1..5 {
            for &t in &[-0.7, 0.0, 0.3, 1.0] {
                assert_eq!(legendre_p(0, d, t), 1.0);
                assert_eq!(legendre_p(1, d, t), t);
                let df = d as f64;
                assert!((legendre_p(2, d, t) - ((df + 1.0) * t * t - 1.0) / df).abs() < 1e-15);
            }
            assert!((legendre_p(17, d, 1.0) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn chebyshev_at_d1() {
        for k in 0..20 {
            let th: f64 = 0.37;
            assert!((legendre_p(k, 1, th.cos()) - (k as f64 * th).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn orthogonality() {
        for d in 1..5 {
            let rule = weighted_rule(40, d);
            let ip = |a: usize, b: usize| -> f64 {
                rule.iter()
                    .map(|(t, w)| w * legendre_p(a, d, *t) * legendre_p(b, d, *t))
                    .sum()
            };
            assert!(ip(3, 5).abs() < 1e-12);
            for k in [1, 2, 4] {
                let want = 1.0 / omega_ratio(d) / harmonic_dim(d, k).unwrap() as f64;
                assert!((ip(k, k) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn harmonic_dims() {
        for d in 1..6 {
            assert_eq!(harmonic_dim(d, 1).unwrap(), d as u128 + 1);
        }
        for k in 1..=10 {
            assert_eq!(harmonic_dim(2, k).unwrap(), 2 * k as u128 + 1);
        }
        assert_eq!(harmonic_dim(3, 2).unwrap(), 9);
        assert_eq!(harmonic_dim(1, 7).unwrap(), 2);
        assert!((harmonic_dim_f64(5, 30) - harmonic_dim(5, 30).unwrap() as f64).abs() < 1e-6);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((s - 2.0 / 19.0).abs() < 1e-14);
    }

    #[test]
    fn circle_values() {
        let pi = PI;
        let cases = [
            (0, 0, 0.5),
            (0, 1, 1.0 / pi),
            (1, 0, 1.0 / pi),
            (1, 1, 0.25),
            (1, 2, 1.0 / (3.0 * pi)),
            (2, 0, 0.25),
            (2, 1, 2.0 / (3.0 * pi)),
            (2, 2, 0.125),
        ];
        for (alpha, k, want) in cases {
            assert!(
                (lambda_quadrature(1, alpha, k).unwrap() - want).abs() < 1e-10,
                "α={alpha} k={k}"
            );
            assert!((lambda_fourier(alpha, k).unwrap() - want).abs() < 1e-15);
        }
    }

    #[test]
    fn closed_form_prefactor() {
        let c = lambda_closed(1, 1, 2).unwrap();
        assert!((c.corrected - 1.0 / (3.0 * PI)).abs() < 1e-14);
        assert_eq!(c.printed, 0.0);
        assert!(!c.printed_agrees);
        for d in 2..5 {
            for alpha in 0..3 {
                for k in alpha as usize + 1..30 {
                    let c = lambda_closed(d, alpha, k).unwrap();
                    let q = lambda_quadrature(d, alpha, k).unwrap();
                    assert!((c.corrected - q).abs() < 1e-12, "d={d} α={alpha} k={k}");
                }
            }
        }
        assert!(lambda_closed(3, 1, 3).unwrap().zero_by_parity);
    }

    #[test]
    fn gamma2_examples() {
        let d = 3;
        let lin = gamma2_ridge(&RidgeProfile::linear(), d, 1, 60).unwrap();
        let l1 = lambda_quadrature(d, 1, 1).unwrap();
        let want = 1.0 / (l1 * ((d + 1) as f64).sqrt());
        assert!((lin.value.unwrap() - want).abs() < 1e-8);
        let p2 = gamma2_ridge(&RidgeProfile::legendre(2, d), d, 1, 60).unwrap();
        let l2 = lambda_quadrature(d, 1, 2).unwrap();
        let want = 1.0 / (harmonic_dim(d, 2).unwrap() as f64 * l2 * l2).sqrt();
        assert!((p2.value.unwrap() - want).abs() < 1e-8);
        let act = gamma2_ridge(&RidgeProfile::activation(1), d, 1, 100).unwrap();
        assert_eq!(act.verdict, Gamma2Verdict::Diverging);
        assert!(matches!(
            gamma2_ridge(&RidgeProfile::legendre(3, d), d, 1, 60),
            Err(Error::ParityViolation { degree: 3, .. })
        ));
    }

    #[test]
    fn poisson_monotone_and_bandlimited() {
        let prof = RidgeProfile::polynomial(vec![0.3, 0.0, 1.0, 0.0, -0.5]);
        let a = poisson_approximant(&prof, 2, 1, 0.5).unwrap();
        let b = poisson_approximant(&prof, 2, 1, 0.9).unwrap();
        let c = poisson_approximant(&prof, 2, 1, 0.999).unwrap();
        assert!(a.gamma2 <= b.gamma2 && b.gamma2 <= c.gamma2);
        assert!(c.sup_error < b.sup_error && b.sup_error < a.sup_error);
        assert!(c.sup_error < 1e-2);
    }

    #[test]
    fn kernel_series_spot_values() {
        let s = kernel_series(3, 1, 60, 1.0).unwrap();
        assert!((s - 1.0 / 8.0).abs() < 1e-5);
        let s0 = kernel_series(3, 0, 60, 0.0).unwrap();
        assert!((s0 - 0.25).abs() < 1e-5);
    }
}
