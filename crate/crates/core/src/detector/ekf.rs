//! Scalar extended Kalman filter for one antenna pair's phase.
//!
//! State: `theta(n) = theta(n-1) + delta(n)`. Observation:
//! `y(n) = e^{j theta(n)} s(n) + alpha(n)` with `alpha ~ CN(0, r)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::C64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EkfState {
    pub theta: f64,
    pub m: f64,
}

impl EkfState {
    pub fn new(theta: f64, m: f64) -> Self {
        EkfState { theta, m }
    }
}

/// Which covariance enters the gain denominator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainForm {
    /// Standard EKF: the predicted covariance `M(n|n-1)`.
    #[default]
    Predicted,
    /// The previous posterior `M(n-1|n-1)`. Kept for comparison only; the
    /// posterior variance is clamped at zero because this form does not
    /// guarantee contraction.
    Literal,
}

/// Per-sample filter output.
#[derive(Clone, Debug, Default)]
pub struct EkfTrace {
    pub theta: Vec<f64>,
    pub m_pred: Vec<f64>,
    pub m_post: Vec<f64>,
    /// True when every reference sample was zero, so nothing was tracked.
    pub degenerate: bool,
}

impl EkfTrace {
    pub fn last(&self) -> Option<EkfState> {
        Some(EkfState::new(*self.theta.last()?, *self.m_post.last()?))
    }
}

/// Measurement update from the predicted state. `m_den` is the covariance
/// used in the gain denominator.
pub fn ekf_update(pred: EkfState, y: C64, s: C64, sigma2_w: f64, m_den: f64) -> EkfState {
    let rot = C64::from_polar(1.0, pred.theta);
    let jac = C64::new(0.0, 1.0) * rot * s;
    let denom = jac.norm_sqr() * m_den + sigma2_w;
    if !(denom > f64::MIN_POSITIVE) {
        return pred;
    }
    let gain = pred.m * jac.conj() / denom;
    let theta = pred.theta + (gain * (y - rot * s)).re;
    let m = (pred.m - gain * jac * pred.m).re.max(0.0);
    EkfState { theta, m }
}

/// Runs the filter over one OFDM symbol.
///
/// `init` is the predicted state for the first sample, `(theta(0|-1), M(0|-1))`.
pub fn ekf_track(
    y_hat: &[C64],
    s: &[C64],
    sigma2_delta: f64,
    sigma2_w: f64,
    init: EkfState,
    form: GainForm,
) -> Result<EkfTrace> {
    if y_hat.len() != s.len() {
        return Err(Error::dim("ekf_track", y_hat.len(), s.len()));
    }
    if !(sigma2_delta >= 0.0) || !(sigma2_w >= 0.0) || !(init.m >= 0.0) {
        return Err(Error::config("EKF variances must be non-negative"));
    }
    let n = s.len();
    let mut trace = EkfTrace {
        theta: Vec::with_capacity(n),
        m_pred: Vec::with_capacity(n),
        m_post: Vec::with_capacity(n),
        degenerate: s.iter().all(|v| v.norm_sqr() == 0.0),
    };
    let mut pred = init;
    // No posterior exists before the first sample; the literal form falls
    // back to the prior there.
    let mut prev_post_m = init.m;
    for (y, sv) in y_hat.iter().zip(s) {
        let m_den = match form {
            GainForm::Predicted => pred.m,
            GainForm::Literal => prev_post_m,
        };
        let post = ekf_update(pred, *y, *sv, sigma2_w, m_den);
        if !post.theta.is_finite() || !post.m.is_finite() {
            return Err(Error::NonFinite {
                context: "ekf_track",
            });
        }
        trace.theta.push(post.theta);
        trace.m_pred.push(pred.m);
        trace.m_post.push(post.m);
        prev_post_m = post.m;
        pred = EkfState::new(post.theta, post.m + sigma2_delta);
    }
    Ok(trace)
}
