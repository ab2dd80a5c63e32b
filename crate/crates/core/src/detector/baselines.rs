//! Reference receivers: genie phase knowledge, no tracking, and pilot-based
//! common-phase correction.

use nalgebra::{DMatrix, DVector};

use super::iterative::{DetectionResult, DetectorConfig, PhasePrior};
use super::system::{constant_phases, zero_phases, SystemModel};
use crate::error::{Error, Result};
use crate::numerics::{self, C64};

fn single_pass(
    model: &SystemModel,
    y: &[Vec<C64>],
    cfg: &DetectorConfig,
    thetas: Vec<Vec<f64>>,
) -> Result<DetectionResult> {
    cfg.validate()?;
    model.check_rx(y)?;
    model.check_phases(&thetas)?;
    let sol = model.mmse(y, &thetas, cfg.sigma2_w)?;
    let residual = model.residual(y, &sol.x, &thetas);
    let var = vec![0.0; model.pairs()];
    Ok(DetectionResult::from_solution(
        model,
        cfg,
        y,
        sol,
        thetas,
        var,
        1,
        vec![residual],
    ))
}

/// One MMSE solve with the true phase trajectories.
pub fn detect_perfect_phn(
    model: &SystemModel,
    y: &[Vec<C64>],
    true_phn: &[Vec<f64>],
    cfg: &DetectorConfig,
) -> Result<DetectionResult> {
    single_pass(model, y, cfg, true_phn.to_vec())
}

/// One MMSE solve assuming no phase noise at all.
pub fn detect_no_tracking(
    model: &SystemModel,
    y: &[Vec<C64>],
    cfg: &DetectorConfig,
) -> Result<DetectionResult> {
    single_pass(model, y, cfg, zero_phases(model.pairs(), model.n()))
}

/// Common phase of every pair from the pilot subcarriers.
///
/// At pilot `k` the received spectrum is `Y_m(k) = sum_v c_{v,m} G_{v,m}(k) P(k)`
/// up to inter-carrier leakage, where `c_{v,m} = J_{v,m}(0)`. The `Nt`
/// coefficients of each receive antenna are solved jointly by least squares,
/// regularized toward the prior phase with weight `sigma2_w / E|c - c_prior|^2`.
/// With few pilots at low SNR this keeps the estimate from doing worse than
/// no correction at all; as the prior variance grows it becomes plain LS.
pub fn pilot_cpe_estimate(
    model: &SystemModel,
    y: &[Vec<C64>],
    cfg: &DetectorConfig,
    prior: &PhasePrior,
) -> Result<Vec<C64>> {
    let pilots = &cfg.pilots;
    if pilots.is_empty() {
        return Err(Error::config("pilot baseline needs at least one pilot"));
    }
    model.check_rx(y)?;
    if prior.states.len() != model.pairs() {
        return Err(Error::dim("phase prior", model.pairs(), prior.states.len()));
    }
    let nt = model.nt();
    let mut cpe = vec![C64::new(1.0, 0.0); model.pairs()];
    for m in 0..model.nr() {
        let mut spec = y[m].clone();
        numerics::dft_in_place(&mut spec);
        let a = DMatrix::from_fn(pilots.len(), nt, |i, v| {
            model.gain(v, m)[pilots.positions()[i]] * pilots.values()[i]
        });
        let c0 = DVector::from_fn(nt, |v, _| {
            C64::from_polar(1.0, prior.states[model.pair_index(v, m)].theta)
        });
        let b = DVector::from_iterator(pilots.len(), pilots.positions().iter().map(|k| spec[*k]));
        let mut lhs = a.adjoint() * &a;
        for v in 0..nt {
            let var = prior.states[model.pair_index(v, m)].m.max(0.0);
            // E|e^{j theta} - e^{j mean}|^2 for a Gaussian phase of variance `var`.
            let spread = 2.0 - 2.0 * (-var / 2.0).exp();
            lhs[(v, v)] += if spread > 0.0 {
                cfg.sigma2_w / spread
            } else {
                f64::INFINITY
            };
        }
        let rhs = a.adjoint() * (b - &a * &c0);
        let c = if lhs.iter().all(|z| z.re.is_finite()) {
            let delta = lhs.lu().solve(&rhs).ok_or(Error::Singular {
                context: "pilot common phase",
                condition: f64::INFINITY,
            })?;
            c0 + delta
        } else {
            c0
        };
        numerics::ensure_finite(c.as_slice(), "pilot common phase")?;
        for (v, cv) in c.iter().enumerate() {
            cpe[model.pair_index(v, m)] = *cv;
        }
    }
    Ok(cpe)
}

/// Pilot-aided common-phase correction followed by one MMSE solve.
///
/// `prior` carries the phase statistics the receiver assumes at this symbol;
/// see [`pilot_cpe_estimate`].
pub fn detect_pilot_cpe(
    model: &SystemModel,
    y: &[Vec<C64>],
    cfg: &DetectorConfig,
    prior: &PhasePrior,
) -> Result<DetectionResult> {
    let cpe = pilot_cpe_estimate(model, y, cfg, prior)?;
    let phases: Vec<f64> = cpe.iter().map(|c| c.arg()).collect();
    single_pass(model, y, cfg, constant_phases(&phases, model.n()))
}
