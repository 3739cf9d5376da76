use crate::geometry::WeightCandidate;
use crate::{Error, Result};

/// `θ = exp(λ φ)` with `φ(t, x) = β t + η(x)`.
///
/// `λ = 0` is accepted and gives `θ ≡ 1`, which turns the weighted identity
/// into the plain energy identity.
#[derive(Debug, Clone, PartialEq)]
pub struct CarlemanWeight {
    pub beta: f64,
    pub lambda: f64,
    pub eta: WeightCandidate,
}

impl CarlemanWeight {
    pub fn new(beta: f64, lambda: f64, eta: WeightCandidate) -> Result<Self> {
        if !eta.certified() {
            return Err(Error::precondition("certified weight", format!("c0 = {:.6e}", eta.c0)));
        }
        if !(beta > 0.0 && beta < eta.c0) {
            return Err(Error::invariant("0 < beta < c0", format!("beta = {beta}, c0 = {}", eta.c0)));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::precondition(
                "lambda",
                format!("{lambda} is not a finite non-negative number"),
            ));
        }
        Ok(Self { beta, lambda, eta })
    }

    pub fn phi(&self, t: f64, x: &[f64]) -> f64 {
        self.beta * t + self.eta.eta_at(x)
    }

    pub fn theta(&self, t: f64, x: &[f64]) -> f64 {
        (self.lambda * self.phi(t, x)).exp()
    }

    /// Same weight with another `λ`.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.beta, lambda, self.eta.clone())
    }
}

/// `β = 2 c0 T0 / (T + T0)`, which sits strictly between `c0 T0 / T` and `c0`.
pub fn choose_beta(c0: f64, t: f64, t0: f64) -> Result<f64> {
    if !(c0 > 0.0 && t0 > 0.0 && t.is_finite()) {
        return Err(Error::precondition(
            "choose_beta",
            format!("need c0 > 0 and T0 > 0, got c0 = {c0}, T0 = {t0}"),
        ));
    }
    if t <= t0 {
        return Err(Error::precondition("T > T0", format!("T = {t} does not exceed T0 = {t0}")));
    }
    let beta = 2.0 * c0 * t0 / (t + t0);
    if beta.is_nan() || beta >= c0 {
        return Err(Error::invariant("beta < c0", format!("beta = {beta}, c0 = {c0}")));
    }
    // max η − min η = c0 T0
    let crossing = c0 * t0 / beta;
    if crossing.is_nan() || crossing >= t {
        return Err(Error::invariant("(max eta - min eta)/beta < T", format!("{crossing} >= {t}")));
    }
    Ok(beta)
}
