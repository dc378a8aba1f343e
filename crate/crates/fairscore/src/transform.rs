//! Scalar kernel for the score transformation.
//!
//! Given a per-sample multiplier `mu` and an original score `r`, the
//! transformed score is the maximizer of `r log q + (1-r) log(1-q) - mu*q`
//! over `q`. Everything else in the crate reduces to this one-dimensional
//! calculus: the transform itself, the per-sample dual term and its first
//! two derivatives in `mu`.

use thiserror::Error;

/// Scores are clamped into `[SCORE_FLOOR, 1 - SCORE_FLOOR]` before any
/// logarithm is taken; the transform and its derivatives degenerate at 0 and 1.
pub const SCORE_FLOOR: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum TransformError {
    #[error("probability {0} is outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("multiplier {0} is not finite")]
    NonFiniteMultiplier(f64),
}

/// A real number validated to lie in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self, TransformError> {
        if value.is_nan() || !(0.0..=1.0).contains(&value) {
            return Err(TransformError::ProbabilityOutOfRange(value));
        }
        Ok(Self(value))
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

/// A finite per-sample multiplier.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Multiplier(f64);

impl Multiplier {
    pub fn new(value: f64) -> Result<Self, TransformError> {
        if !value.is_finite() {
            return Err(TransformError::NonFiniteMultiplier(value));
        }
        Ok(Self(value))
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

#[inline]
pub fn clamp_score(r: f64) -> f64 {
    r.clamp(SCORE_FLOOR, 1.0 - SCORE_FLOOR)
}

/// Binary cross-entropy `-p log q - (1-p) log(1-q)` in nats.
///
/// `q` is clamped away from 0 and 1 first; terms with a zero coefficient are
/// dropped so that e.g. `(1, 1)` evaluates without touching `log 0`.
pub fn binary_cross_entropy(p: Probability, q: Probability) -> f64 {
    bce_raw(p.get(), q.get())
}

pub(crate) fn bce_raw(p: f64, q: f64) -> f64 {
    let q = clamp_score(q);
    let mut h = 0.0;
    if p > 0.0 {
        h -= p * q.ln();
    }
    if p < 1.0 {
        h -= (1.0 - p) * (1.0 - q).ln();
    }
    h
}

/// Optimal transformed score for multiplier `mu` and original score `r`.
///
/// Computed as `2r / (1 + mu + sqrt((1+mu)^2 - 4 r mu))`. This is the
/// conjugate of the textbook quadratic-root expression; it is exact, equals
/// `r` at `mu = 0` without a branch, and does not cancel for small `mu`.
pub fn transform_score(mu: Multiplier, r: Probability) -> Probability {
    Probability(transform_score_raw(mu.get(), r.get()))
}

#[inline]
pub(crate) fn transform_score_raw(mu: f64, r: f64) -> f64 {
    let r = clamp_score(r);
    // discriminant >= (1-mu)^2 for mu > 0 and >= (1+mu)^2 for mu <= 0
    let disc = (1.0 + mu) * (1.0 + mu) - 4.0 * r * mu;
    let root = disc.max(0.0).sqrt();
    (2.0 * r / (1.0 + mu + root)).clamp(0.0, 1.0)
}

/// Per-sample dual term: `-H_b(r, r*) - mu * r*` with `r* = transform_score(mu, r)`.
/// Convex in `mu`, with value `-H_b(r, r)` at `mu = 0`.
pub fn dual_term(mu: Multiplier, r: Probability) -> f64 {
    dual_term_raw(mu.get(), r.get())
}

pub(crate) fn dual_term_raw(mu: f64, r: f64) -> f64 {
    let r = clamp_score(r);
    let rs = transform_score_raw(mu, r);
    -bce_raw(r, rs) - mu * rs
}

/// First derivative of [`dual_term`] in `mu`, which collapses to `-r*`.
pub fn dual_term_grad(mu: Multiplier, r: Probability) -> f64 {
    dual_term_grad_raw(mu.get(), r.get())
}

#[inline]
pub(crate) fn dual_term_grad_raw(mu: f64, r: f64) -> f64 {
    -transform_score_raw(mu, r)
}

/// Second derivative of [`dual_term`] in `mu` (equivalently `-d r*/d mu`).
///
/// The raw expression `(1 - (1 + (1-2r)mu)/sqrt(disc)) / (2 mu^2)` loses all
/// precision near `mu = 0`. With `s = sqrt(disc)` and `t = 1 + (1-2r)mu` it
/// is algebraically equal to `2 r (1-r) / (s (s + t))`, which is stable for
/// every `mu` and reduces to `r (1-r)` at `mu = 0`. Always non-negative.
pub fn dual_term_hess(mu: Multiplier, r: Probability) -> f64 {
    dual_term_hess_raw(mu.get(), r.get())
}

#[inline]
pub(crate) fn dual_term_hess_raw(mu: f64, r: f64) -> f64 {
    let r = clamp_score(r);
    let s = ((1.0 + mu) * (1.0 + mu) - 4.0 * r * mu).max(0.0).sqrt();
    let t = 1.0 + (1.0 - 2.0 * r) * mu;
    // s >= |t| holds exactly (s^2 - t^2 = 4 r (1-r) mu^2), so s + t >= 0.
    2.0 * r * (1.0 - r) / (s * (s + t))
}
