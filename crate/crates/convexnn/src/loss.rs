//! Convex losses `ℓ(y, u)` in the prediction argument `u`.

use crate::error::{invalid, Result};

/// A convex loss in the prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Loss {
    /// `½ (y − u)²`.
    Squared,
    /// `log(1 + e^{−yu})`.
    Logistic,
    /// Huberized hinge with smoothing width `ε > 0`.
    SmoothedHinge {
        /// Width of the quadratic region below the margin.
        eps: f64,
    },
    /// `max(0, 1 − yu)`; non-smooth, trained through [`smoothing_schedule`].
    Hinge,
}

impl Loss {
    /// Parses `sq`, `squared`, `logistic`, `hinge` or `smoothed-hinge:<eps>`.
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "sq" | "squared" => Ok(Loss::Squared),
            "logistic" => Ok(Loss::Logistic),
            "hinge" => Ok(Loss::Hinge),
            other => {
                if let Some(eps) = other.strip_prefix("smoothed-hinge:") {
                    let eps: f64 = eps
                        .parse()
                        .map_err(|_| invalid(format!("bad smoothing width {eps:?}")))?;
                    Loss::smoothed_hinge(eps)
                } else {
                    Err(invalid(format!("unknown loss {other:?}")))
                }
            }
        }
    }

    /// A smoothed hinge, rejecting nonpositive widths.
    pub fn smoothed_hinge(eps: f64) -> Result<Self> {
        if eps > 0.0 && eps.is_finite() {
            Ok(Loss::SmoothedHinge { eps })
        } else {
            Err(invalid(format!(
                "smoothing width must be positive, got {eps}"
            )))
        }
    }

    /// Loss value.
    pub fn value(&self, y: f64, u: f64) -> f64 {
        match *self {
            Loss::Squared => 0.5 * (y - u) * (y - u),
            Loss::Logistic => softplus(-y * u),
            Loss::SmoothedHinge { eps } => {
                let m = y * u;
                if m >= 1.0 {
                    0.0
                } else if m > 1.0 - eps {
                    (1.0 - m) * (1.0 - m) / (2.0 * eps)
                } else {
                    1.0 - m - eps / 2.0
                }
            }
            Loss::Hinge => (1.0 - y * u).max(0.0),
        }
    }

    /// Derivative in `u` (a subgradient for the plain hinge).
    pub fn derivative(&self, y: f64, u: f64) -> f64 {
        match *self {
            Loss::Squared => u - y,
            Loss::Logistic => -y * sigmoid(-y * u),
            Loss::SmoothedHinge { eps } => {
                let m = y * u;
                if m >= 1.0 {
                    0.0
                } else if m > 1.0 - eps {
                    -y * (1.0 - m) / eps
                } else {
                    -y
                }
            }
            Loss::Hinge => {
                if y * u < 1.0 {
                    -y
                } else {
                    0.0
                }
            }
        }
    }

    /// Lipschitz constant `G` in `u` over `|u| ≤ u_max` for labels with `|y| ≤ y_max`.
    pub fn lipschitz(&self, y_max: f64, u_max: f64) -> f64 {
        match self {
            Loss::Squared => y_max + u_max,
            Loss::Logistic | Loss::SmoothedHinge { .. } | Loss::Hinge => y_max,
        }
    }

    /// Smoothness constant `L` for labels with `|y| ≤ y_max`, or `None` when not smooth.
    pub fn smoothness(&self, y_max: f64) -> Option<f64> {
        match *self {
            Loss::Squared => Some(1.0),
            Loss::Logistic => Some(y_max * y_max / 4.0),
            Loss::SmoothedHinge { eps } => Some(y_max * y_max / eps),
            Loss::Hinge => None,
        }
    }

    /// Whether the loss has a Lipschitz derivative.
    pub fn is_smooth(&self) -> bool {
        !matches!(self, Loss::Hinge)
    }
}

/// The smoothed hinge used at iteration `t` when training a hinge-type loss, with
/// width `ε_t = c / √(t + 1)` and smoothness `1/ε_t`.
pub fn smoothing_schedule(c: f64, t: usize) -> Result<Loss> {
    Loss::smoothed_hinge(c / ((t + 1) as f64).sqrt())
}

fn softplus(s: f64) -> f64 {
    if s > 0.0 {
        s + (-s).exp().ln_1p()
    } else {
        s.exp().ln_1p()
    }
}

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}
