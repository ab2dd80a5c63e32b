//! Wiener oscillator phase noise, pairwise composite phase, and the
//! spectral coefficients of `e^{j theta(n)}`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, C64};

/// Phase samples `theta(n)` in radians, with the innovation variance of the
/// Wiener process that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct PhnTrajectory {
    theta: Vec<f64>,
    sigma2_delta: f64,
}

impl PhnTrajectory {
    pub fn new(theta: Vec<f64>, sigma2_delta: f64) -> Result<Self> {
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite {
                context: "phase trajectory",
            });
        }
        if !(sigma2_delta >= 0.0) {
            return Err(Error::config(format!(
                "innovation variance must be >= 0, got {sigma2_delta}"
            )));
        }
        Ok(PhnTrajectory {
            theta,
            sigma2_delta,
        })
    }

    pub fn zeros(n: usize) -> Self {
        PhnTrajectory {
            theta: vec![0.0; n],
            sigma2_delta: 0.0,
        }
    }

    pub fn constant(n: usize, phi: f64) -> Self {
        PhnTrajectory {
            theta: vec![phi; n],
            sigma2_delta: 0.0,
        }
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn sigma2_delta(&self) -> f64 {
        self.sigma2_delta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Samples `start..start + len` as a new trajectory.
    pub fn window(&self, start: usize, len: usize) -> PhnTrajectory {
        PhnTrajectory {
            theta: self.theta[start..start + len].to_vec(),
            sigma2_delta: self.sigma2_delta,
        }
    }

    /// `theta` shifted by a constant.
    pub fn offset(&self, phi: f64) -> PhnTrajectory {
        PhnTrajectory {
            theta: self.theta.iter().map(|t| t + phi).collect(),
            sigma2_delta: self.sigma2_delta,
        }
    }
}

/// `theta(0) = theta0`, `theta(n) = theta(n-1) + delta(n)`, `delta ~ N(0, sigma2_delta)`.
pub fn draw_wiener<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    sigma2_delta: f64,
    theta0: f64,
) -> Result<PhnTrajectory> {
    if !(sigma2_delta >= 0.0) || !sigma2_delta.is_finite() {
        return Err(Error::config(format!(
            "innovation variance must be >= 0, got {sigma2_delta}"
        )));
    }
    let sd = sigma2_delta.sqrt();
    let mut theta = Vec::with_capacity(n);
    let mut cur = theta0;
    for i in 0..n {
        if i > 0 {
            let d: f64 = rng.sample(StandardNormal);
            cur += sd * d;
        }
        theta.push(cur);
    }
    PhnTrajectory::new(theta, sigma2_delta)
}

/// Composite phase between a transmit and a receive oscillator.
pub fn pair_phn(theta_v: &PhnTrajectory, theta_m: &PhnTrajectory) -> Result<PhnTrajectory> {
    if theta_v.len() != theta_m.len() {
        return Err(Error::dim("pair_phn", theta_v.len(), theta_m.len()));
    }
    Ok(PhnTrajectory {
        theta: theta_v
            .theta
            .iter()
            .zip(&theta_m.theta)
            .map(|(a, b)| a + b)
            .collect(),
        sigma2_delta: theta_v.sigma2_delta + theta_m.sigma2_delta,
    })
}

/// Splits `theta` into `theta(n) - theta(0)` and the start phase `phi0`.
///
/// Applying `e^{j phi0}` to the channel and the returned trajectory to the
/// data reproduces the original received signal exactly.
pub fn rereference(theta: &PhnTrajectory) -> (PhnTrajectory, f64) {
    let phi0 = theta.theta.first().copied().unwrap_or(0.0);
    (theta.offset(-phi0), phi0)
}

/// `J(k) = (1/N) sum_n e^{j theta(n)} e^{-j 2 pi k n / N}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralPhn {
    j: Vec<C64>,
}

impl SpectralPhn {
    pub fn coeffs(&self) -> &[C64] {
        &self.j
    }

    /// `J(k)` with `k` taken modulo `N` (negative offsets allowed).
    pub fn at(&self, k: isize) -> C64 {
        let n = self.j.len() as isize;
        self.j[k.rem_euclid(n) as usize]
    }

    pub fn cpe(&self) -> C64 {
        self.j[0]
    }

    pub fn energy(&self) -> f64 {
        self.j.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn len(&self) -> usize {
        self.j.len()
    }

    pub fn is_empty(&self) -> bool {
        self.j.is_empty()
    }
}

/// Spectral coefficients with the `1/N` forward normalization, so that
/// `sum_k |J(k)|^2 = 1`. Computed as the unitary DFT scaled by `1/sqrt(N)`.
pub fn spectral_coeffs(theta: &[f64]) -> Result<SpectralPhn> {
    if theta.is_empty() {
        return Err(Error::dim("spectral_coeffs", 1, 0));
    }
    let n = theta.len();
    let mut buf: Vec<C64> = theta.iter().map(|t| C64::from_polar(1.0, *t)).collect();
    numerics::dft_in_place(&mut buf);
    let scale = 1.0 / (n as f64).sqrt();
    for v in &mut buf {
        *v *= scale;
    }
    Ok(SpectralPhn { j: buf })
}

/// How a configured innovation variance maps onto individual oscillators.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMode {
    /// The configured value is the composite (tx + rx) variance; each
    /// oscillator gets half.
    #[default]
    PerPair,
    /// The configured value applies to every oscillator; composites get twice it.
    PerOscillator,
}

impl VarianceMode {
    pub fn oscillator_variance(self, configured: f64) -> f64 {
        match self {
            VarianceMode::PerPair => configured / 2.0,
            VarianceMode::PerOscillator => configured,
        }
    }

    pub fn pair_variance(self, configured: f64) -> f64 {
        2.0 * self.oscillator_variance(configured)
    }
}

/// Independent oscillators at every transmit and receive antenna for one
/// packet. All start at phase zero (aligned by the training preamble).
#[derive(Clone, Debug)]
pub struct OscillatorBank {
    tx: Vec<PhnTrajectory>,
    rx: Vec<PhnTrajectory>,
}

impl OscillatorBank {
    pub fn draw<R: Rng + ?Sized>(
        rng: &mut R,
        nt: usize,
        nr: usize,
        samples: usize,
        oscillator_variance: f64,
    ) -> Result<Self> {
        let tx = (0..nt)
            .map(|_| draw_wiener(rng, samples, oscillator_variance, 0.0))
            .collect::<Result<Vec<_>>>()?;
        let rx = (0..nr)
            .map(|_| draw_wiener(rng, samples, oscillator_variance, 0.0))
            .collect::<Result<Vec<_>>>()?;
        Ok(OscillatorBank { tx, rx })
    }

    pub fn silent(nt: usize, nr: usize, samples: usize) -> Self {
        OscillatorBank {
            tx: vec![PhnTrajectory::zeros(samples); nt],
            rx: vec![PhnTrajectory::zeros(samples); nr],
        }
    }

    /// Composite phase of pair `(v, m)` over samples `start..start + len`.
    pub fn pair_window(&self, v: usize, m: usize, start: usize, len: usize) -> PhnTrajectory {
        pair_phn(
            &self.tx[v].window(start, len),
            &self.rx[m].window(start, len),
        )
        .expect("oscillators share one length")
    }

    /// All pair windows in tx-major order.
    pub fn pairs_window(&self, start: usize, len: usize) -> Vec<PhnTrajectory> {
        let mut out = Vec::with_capacity(self.tx.len() * self.rx.len());
        for v in 0..self.tx.len() {
            for m in 0..self.rx.len() {
                out.push(self.pair_window(v, m, start, len));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_variance_is_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = draw_wiener(&mut rng, 32, 0.0, 0.3).unwrap();
        assert!(t.theta().iter().all(|v| *v == 0.3));
        assert!(draw_wiener(&mut rng, 4, -1.0, 0.0).is_err());
    }

    #[test]
    fn wiener_variance_grows_linearly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 64;
        let s2 = 1e-4;
        let draws = 10_000;
        let ends: Vec<f64> = (0..draws)
            .map(|_| {
                let t = draw_wiener(&mut rng, n, s2, 0.0).unwrap();
                t.theta()[n - 1] - t.theta()[0]
            })
            .collect();
        let mean = ends.iter().sum::<f64>() / draws as f64;
        let var = ends.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let expect = (n - 1) as f64 * s2;
        assert!(
            (var / expect - 1.0).abs() < 0.05,
            "var {var} expect {expect}"
        );
    }

    #[test]
    fn same_seed_same_trajectory() {
        let a = draw_wiener(&mut ChaCha8Rng::seed_from_u64(5), 16, 1e-3, 0.0).unwrap();
        let b = draw_wiener(&mut ChaCha8Rng::seed_from_u64(5), 16, 1e-3, 0.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pairing_adds_phases_and_variances() {
        let a = PhnTrajectory::constant(4, 0.1);
        let b = PhnTrajectory::constant(4, 0.25);
        let p = pair_phn(&a, &b).unwrap();
        assert!(p.theta().iter().all(|v| (v - 0.35).abs() < 1e-15));
        let z = PhnTrajectory::zeros(4);
        assert_eq!(pair_phn(&a, &z).unwrap().theta(), a.theta());
        assert!(pair_phn(&a, &PhnTrajectory::zeros(3)).is_err());
    }

    #[test]
    fn composite_increment_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let draws = 10_000;
        let mut incs = Vec::with_capacity(draws);
        for _ in 0..draws {
            let a = draw_wiener(&mut rng, 2, 1e-5, 0.0).unwrap();
            let b = draw_wiener(&mut rng, 2, 1e-5, 0.0).unwrap();
            let p = pair_phn(&a, &b).unwrap();
            assert!((p.sigma2_delta() - 2e-5).abs() < 1e-20);
            incs.push(p.theta()[1] - p.theta()[0]);
        }
        let var = incs.iter().map(|d| d * d).sum::<f64>() / draws as f64;
        assert!((var / 2e-5 - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn rereference_cases() {
        let (t, phi) = rereference(&PhnTrajectory::constant(3, 0.2));
        assert_eq!(phi, 0.2);
        assert!(t.theta().iter().all(|v| v.abs() < 1e-15));
        let (t, phi) = rereference(&PhnTrajectory::zeros(3));
        assert_eq!(phi, 0.0);
        assert_eq!(t.theta(), &[0.0; 3]);
    }

    #[test]
    fn spectrum_of_constant_phase() {
        let j = spectral_coeffs(&[0.0; 8]).unwrap();
        assert!((j.cpe() - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(j.coeffs()[1..].iter().all(|v| v.norm() < 1e-15));

        let phi = 0.7;
        let j = spectral_coeffs(&[phi; 8]).unwrap();
        assert!((j.cpe() - C64::from_polar(1.0, phi)).norm() < 1e-14);
        assert!(j.coeffs()[1..].iter().all(|v| v.norm() < 1e-14));
        assert!(spectral_coeffs(&[]).is_err());
    }

    #[test]
    fn spectrum_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let t = draw_wiener(&mut rng, 8, 0.05, 0.4).unwrap();
        let j = spectral_coeffs(t.theta()).unwrap();
        let n = 8.0;
        for k in 0..8 {
            let direct: C64 = t
                .theta()
                .iter()
                .enumerate()
                .map(|(i, th)| {
                    C64::from_polar(1.0, th - 2.0 * std::f64::consts::PI * (k * i) as f64 / n)
                })
                .sum::<C64>()
                / n;
            assert!((j.coeffs()[k] - direct).norm() < 1e-12);
        }
        assert!((j.energy() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_pair_gives_identity_spectrum() {
        let p = pair_phn(&PhnTrajectory::zeros(16), &PhnTrajectory::zeros(16)).unwrap();
        let j = spectral_coeffs(p.theta()).unwrap();
        assert!((j.cpe() - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    proptest! {
        #[test]
        fn parseval_and_cpe_bound(seed in any::<u64>(), s2 in 0.0f64..0.5, n in 1usize..65) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = draw_wiener(&mut rng, n, s2, 0.0).unwrap();
            let j = spectral_coeffs(t.theta()).unwrap();
            prop_assert!((j.energy() - 1.0).abs() < 1e-12);
            prop_assert!(j.cpe().norm() <= 1.0 + 1e-12);
        }
    }
}
