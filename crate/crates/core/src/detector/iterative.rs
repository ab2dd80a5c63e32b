//! The joint EKF phase-tracking / MMSE data detector.

use serde::{Deserialize, Serialize};

use super::ekf::{ekf_track, EkfState, GainForm};
use super::system::{constant_phases, MmseSolution, SystemModel};
use crate::error::{Error, Result};
use crate::numerics::{self, C64};
use crate::phy::{PilotLayout, Qam, QamOrder};

/// How the reference waveform `s_v` fed to the EKF is rebuilt from `X_hat`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reconstruction {
    /// Nearest constellation points (pilots replaced by their known values).
    #[default]
    HardDecision,
    /// The MMSE output as is.
    Soft,
}

/// Stopping threshold on the change of the residual between iterations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopThreshold {
    Absolute(f64),
    /// Fraction of the received energy `sum_m ||y_m||^2`.
    Relative(f64),
}

impl Default for StopThreshold {
    fn default() -> Self {
        StopThreshold::Relative(1e-3)
    }
}

impl StopThreshold {
    pub fn resolve(self, y: &[Vec<C64>]) -> f64 {
        match self {
            StopThreshold::Absolute(z) => z,
            StopThreshold::Relative(r) => {
                r * y.iter().map(|ym| numerics::norm_sqr(ym)).sum::<f64>()
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct DetectorConfig {
    pub qam: QamOrder,
    pub sigma2_w: f64,
    /// Innovation variance of each pair's composite phase.
    pub sigma2_delta: f64,
    pub zeta: StopThreshold,
    pub max_iterations: usize,
    pub gain_form: GainForm,
    pub reconstruction: Reconstruction,
    /// Prior variance for the first symbol of a packet; `sigma2_delta` when unset.
    pub initial_variance: Option<f64>,
    pub pilots: PilotLayout,
}

impl DetectorConfig {
    pub fn new(qam: QamOrder, sigma2_w: f64, sigma2_delta: f64) -> Self {
        DetectorConfig {
            qam,
            sigma2_w,
            sigma2_delta,
            zeta: StopThreshold::default(),
            max_iterations: 10,
            gain_form: GainForm::default(),
            reconstruction: Reconstruction::default(),
            initial_variance: None,
            pilots: PilotLayout::comb(1, 0).expect("empty layout"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2_w >= 0.0) || !(self.sigma2_delta >= 0.0) {
            return Err(Error::config("detector variances must be non-negative"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("max_iterations must be at least 1"));
        }
        if let Some(v) = self.initial_variance {
            if !(v >= 0.0) {
                return Err(Error::config("initial_variance must be non-negative"));
            }
        }
        Ok(())
    }

    /// Hard decisions with known pilot values substituted.
    pub fn decide(&self, x: &[C64]) -> Vec<C64> {
        let mut out = Qam::new(self.qam).decide(x);
        for (k, p) in self.pilots.positions().iter().zip(self.pilots.values()) {
            if *k < out.len() {
                out[*k] = *p;
            }
        }
        out
    }
}

/// Predicted phase state of every pair at the first sample of a symbol.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePrior {
    pub states: Vec<EkfState>,
}

impl PhasePrior {
    /// Start of a packet: phases aligned by training, `theta = 0`.
    pub fn initial(pairs: usize, variance: f64) -> Self {
        PhasePrior {
            states: vec![EkfState::new(0.0, variance); pairs],
        }
    }

    /// Prior for the next symbol, `gap` samples after the last one of `result`.
    pub fn advance(result: &DetectionResult, gap: usize, sigma2_delta: f64) -> Self {
        PhasePrior {
            states: result
                .final_state
                .iter()
                .map(|s| EkfState::new(s.theta, s.m + gap as f64 * sigma2_delta))
                .collect(),
        }
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.theta).collect()
    }
}

/// Frequency-domain reconstruction terms for the rate estimate.
#[derive(Clone, Debug, Default)]
pub struct SinrTerms {
    /// `Y_m(k)`, unitary DFT of each received vector.
    pub y_freq: Vec<Vec<C64>>,
    /// Per pair (tx-major), `J_hat_{v,m} (*) (H_{v,m} Lambda_v X_hat)`.
    pub pair_spectra: Vec<Vec<C64>>,
}

impl SinrTerms {
    pub fn compute(model: &SystemModel, y: &[Vec<C64>], x: &[C64], thetas: &[Vec<f64>]) -> Self {
        let y_freq = y
            .iter()
            .map(|ym| {
                let mut b = ym.clone();
                numerics::dft_in_place(&mut b);
                b
            })
            .collect();
        let pair_spectra = model
            .waveforms(x)
            .into_iter()
            .zip(thetas)
            .map(|(s, th)| {
                let mut b: Vec<C64> = s
                    .iter()
                    .zip(th)
                    .map(|(v, t)| C64::from_polar(1.0, *t) * v)
                    .collect();
                numerics::dft_in_place(&mut b);
                b
            })
            .collect();
        SinrTerms {
            y_freq,
            pair_spectra,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DetectionResult {
    /// MMSE output.
    pub x_hat: Vec<C64>,
    /// Hard decisions on the unbiased `x_hat / mu`, pilots substituted.
    pub x_hard: Vec<C64>,
    /// Per-subcarrier MMSE bias `mu_k`.
    pub mmse_bias: Vec<f64>,
    /// Phase estimates per pair, tx-major.
    pub theta_hat: Vec<Vec<f64>>,
    /// Posterior at the last sample of every pair.
    pub final_state: Vec<EkfState>,
    pub iterations: usize,
    /// Residual after each iteration.
    pub residual_trace: Vec<f64>,
    pub sinr: SinrTerms,
}

impl DetectionResult {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_solution(
        model: &SystemModel,
        cfg: &DetectorConfig,
        y: &[Vec<C64>],
        sol: MmseSolution,
        theta_hat: Vec<Vec<f64>>,
        final_var: Vec<f64>,
        iterations: usize,
        residual_trace: Vec<f64>,
    ) -> Self {
        let x_hard = cfg.decide(&sol.unbiased().0);
        let sinr = SinrTerms::compute(model, y, &x_hard, &theta_hat);
        let final_state = theta_hat
            .iter()
            .zip(final_var)
            .map(|(t, m)| EkfState::new(*t.last().unwrap_or(&0.0), m))
            .collect();
        DetectionResult {
            x_hat: sol.x,
            x_hard,
            mmse_bias: sol.bias,
            theta_hat,
            final_state,
            iterations,
            residual_trace,
            sinr,
        }
    }

    /// Unbiased estimates and their error variances for soft demapping.
    pub fn soft_symbols(&self) -> (Vec<C64>, Vec<f64>) {
        MmseSolution {
            x: self.x_hat.clone(),
            bias: self.mmse_bias.clone(),
        }
        .unbiased()
    }
}

/// Joint detection of one OFDM symbol.
///
/// `prior` is the predicted phase state of every pair at the first sample
/// (from the previous symbol, or [`PhasePrior::initial`]).
pub fn iterative_detect(
    model: &SystemModel,
    y: &[Vec<C64>],
    cfg: &DetectorConfig,
    prior: &PhasePrior,
) -> Result<DetectionResult> {
    cfg.validate()?;
    model.check_rx(y)?;
    if prior.states.len() != model.pairs() {
        return Err(Error::dim("phase prior", model.pairs(), prior.states.len()));
    }
    let n = model.n();
    let zeta = cfg.zeta.resolve(y);

    let mut thetas = constant_phases(&prior.thetas(), n);
    let mut sol = model.mmse(y, &thetas, cfg.sigma2_w)?;
    let mut previous = model.residual(y, &sol.x, &thetas);
    let mut trace = Vec::new();
    let mut final_var: Vec<f64> = prior.states.iter().map(|s| s.m).collect();
    // Start state of each pair's filter. After the first pass it is the last
    // posterior carried back to sample 0: a Wiener phase looks the same run
    // backwards, so theta(0) | theta(N-1) has variance M(N-1) + (N-1) sigma2_delta.
    let mut starts = prior.states.clone();

    for iteration in 1..=cfg.max_iterations {
        let reference = match cfg.reconstruction {
            Reconstruction::HardDecision => cfg.decide(&sol.unbiased().0),
            Reconstruction::Soft => sol.x.clone(),
        };
        let waveforms = model.waveforms(&reference);
        for v in 0..model.nt() {
            for m in 0..model.nr() {
                let p = model.pair_index(v, m);
                let y_hat = model.cancel_interference(&y[m], m, v, &waveforms, &thetas);
                let tr = ekf_track(
                    &y_hat,
                    &waveforms[p],
                    cfg.sigma2_delta,
                    cfg.sigma2_w,
                    starts[p],
                    cfg.gain_form,
                )
                .map_err(|e| Error::Numerical {
                    iteration,
                    reason: e.to_string(),
                })?;
                final_var[p] = *tr.m_post.last().unwrap_or(&prior.states[p].m);
                if let Some(last) = tr.last() {
                    starts[p] =
                        EkfState::new(last.theta, last.m + (n - 1) as f64 * cfg.sigma2_delta);
                }
                thetas[p] = tr.theta;
            }
        }
        sol = model
            .mmse(y, &thetas, cfg.sigma2_w)
            .map_err(|e| Error::Numerical {
                iteration,
                reason: e.to_string(),
            })?;
        let current = model.residual(y, &sol.x, &thetas);
        if !current.is_finite() {
            return Err(Error::Numerical {
                iteration,
                reason: "non-finite residual".into(),
            });
        }
        trace.push(current);
        if (current - previous).abs() <= zeta {
            break;
        }
        previous = current;
    }
    let iterations = trace.len();
    Ok(DetectionResult::from_solution(
        model, cfg, y, sol, thetas, final_var, iterations, trace,
    ))
}
