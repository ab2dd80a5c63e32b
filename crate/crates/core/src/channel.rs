//! Quasi-static frequency-selective Rayleigh channels and AWGN.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::C64;

/// Exponentially decaying tap powers used throughout the experiments (dB).
pub const DEFAULT_PDP_DB: [f64; 4] = [-1.52, -6.75, -11.91, -17.08];

/// Average power per channel tap, in dB. Taps may be `-inf` (absent).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PowerDelayProfile {
    avg_power_db: Vec<f64>,
}

impl PowerDelayProfile {
    pub fn new(avg_power_db: Vec<f64>) -> Result<Self> {
        if avg_power_db.is_empty() {
            return Err(Error::config("power delay profile needs at least one tap"));
        }
        if avg_power_db
            .iter()
            .any(|p| p.is_nan() || *p == f64::INFINITY)
        {
            return Err(Error::config("power delay profile contains NaN or +inf"));
        }
        if avg_power_db.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::config(
                "power delay profile must be non-increasing in delay",
            ));
        }
        Ok(PowerDelayProfile { avg_power_db })
    }

    pub fn exponential_default() -> Self {
        PowerDelayProfile {
            avg_power_db: DEFAULT_PDP_DB.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.avg_power_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.avg_power_db.is_empty()
    }

    pub fn db(&self) -> &[f64] {
        &self.avg_power_db
    }

    pub fn linear(&self) -> Vec<f64> {
        self.avg_power_db
            .iter()
            .map(|p| 10f64.powf(p / 10.0))
            .collect()
    }

    pub fn total_power(&self) -> f64 {
        self.linear().iter().sum()
    }
}

impl TryFrom<Vec<f64>> for PowerDelayProfile {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        PowerDelayProfile::new(v)
    }
}

impl From<PowerDelayProfile> for Vec<f64> {
    fn from(p: PowerDelayProfile) -> Self {
        p.avg_power_db
    }
}

/// Draws one circularly-symmetric complex Gaussian sample with variance `var`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * s, im * s)
}

/// Rayleigh taps `h(l) ~ CN(0, pdp(l))`.
pub fn draw_channel<R: Rng + ?Sized>(rng: &mut R, pdp: &PowerDelayProfile) -> Result<Vec<C64>> {
    if pdp.is_empty() {
        return Err(Error::config("channel order L must be >= 1"));
    }
    Ok(pdp
        .linear()
        .into_iter()
        .map(|p| complex_gaussian(rng, p))
        .collect())
}

/// `H(n) = sum_d h(d) e^{-j 2 pi n d / N}`.
///
/// This is the non-normalized transform, i.e. `sqrt(N)` times the unitary DFT
/// of the zero-padded taps.
pub fn freq_response(taps: &[C64], n: usize) -> Result<Vec<C64>> {
    if taps.is_empty() || taps.len() > n {
        return Err(Error::dim("freq_response", n, taps.len()));
    }
    let mut buf = vec![C64::new(0.0, 0.0); n];
    buf[..taps.len()].copy_from_slice(taps);
    crate::numerics::dft_in_place(&mut buf);
    let scale = (n as f64).sqrt();
    for v in &mut buf {
        *v *= scale;
    }
    Ok(buf)
}

/// Adds i.i.d. `CN(0, sigma2_w)` noise.
pub fn add_awgn<R: Rng + ?Sized>(signal: &[C64], sigma2_w: f64, rng: &mut R) -> Result<Vec<C64>> {
    if !(sigma2_w >= 0.0) || !sigma2_w.is_finite() {
        return Err(Error::config(format!(
            "noise variance must be >= 0, got {sigma2_w}"
        )));
    }
    if sigma2_w == 0.0 {
        return Ok(signal.to_vec());
    }
    Ok(signal
        .iter()
        .map(|s| s + complex_gaussian(rng, sigma2_w))
        .collect())
}

/// Noise variance giving `snr_db` for a received signal of average power
/// `signal_power` per sample.
pub fn noise_variance(signal_power: f64, snr_db: f64) -> f64 {
    signal_power / 10f64.powf(snr_db / 10.0)
}

/// Taps and frequency response of one transmit/receive antenna pair.
///
/// Fixed for the lifetime of a packet; there are no mutators.
#[derive(Clone, Debug)]
pub struct ChannelRealization {
    taps: Vec<C64>,
    freq_response: Vec<C64>,
}

impl ChannelRealization {
    pub fn new(taps: Vec<C64>, n: usize) -> Result<Self> {
        crate::numerics::ensure_finite(&taps, "channel taps")?;
        let freq_response = freq_response(&taps, n)?;
        Ok(ChannelRealization {
            taps,
            freq_response,
        })
    }

    pub fn taps(&self) -> &[C64] {
        &self.taps
    }

    pub fn freq_response(&self) -> &[C64] {
        &self.freq_response
    }

    /// Same channel with every tap rotated by `e^{j phi}`.
    pub fn rotated(&self, phi: f64) -> Self {
        let r = C64::from_polar(1.0, phi);
        ChannelRealization {
            taps: self.taps.iter().map(|h| h * r).collect(),
            freq_response: self.freq_response.iter().map(|h| h * r).collect(),
        }
    }
}

/// Independent channels for all `nt x nr` antenna pairs, stored tx-major.
#[derive(Clone, Debug)]
pub struct MimoChannel {
    nt: usize,
    nr: usize,
    n: usize,
    links: Vec<ChannelRealization>,
}

impl MimoChannel {
    pub fn draw<R: Rng + ?Sized>(
        rng: &mut R,
        nt: usize,
        nr: usize,
        n: usize,
        pdp: &PowerDelayProfile,
    ) -> Result<Self> {
        let mut links = Vec::with_capacity(nt * nr);
        for _ in 0..nt * nr {
            links.push(ChannelRealization::new(draw_channel(rng, pdp)?, n)?);
        }
        MimoChannel::from_links(nt, nr, n, links)
    }

    pub fn from_links(
        nt: usize,
        nr: usize,
        n: usize,
        links: Vec<ChannelRealization>,
    ) -> Result<Self> {
        if nt == 0 || nr == 0 {
            return Err(Error::config("antenna counts must be >= 1"));
        }
        if links.len() != nt * nr {
            return Err(Error::dim("MimoChannel links", nt * nr, links.len()));
        }
        if let Some(bad) = links.iter().find(|l| l.freq_response.len() != n) {
            return Err(Error::dim(
                "MimoChannel response",
                n,
                bad.freq_response.len(),
            ));
        }
        Ok(MimoChannel { nt, nr, n, links })
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn nr(&self) -> usize {
        self.nr
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Longest tap count over all links.
    pub fn order(&self) -> usize {
        self.links.iter().map(|l| l.taps.len()).max().unwrap_or(0)
    }

    /// Link from transmit antenna `v` to receive antenna `m` (both 0-based).
    pub fn link(&self, v: usize, m: usize) -> &ChannelRealization {
        &self.links[v * self.nr + m]
    }

    pub fn map_links(
        &self,
        mut f: impl FnMut(usize, usize, &ChannelRealization) -> ChannelRealization,
    ) -> Self {
        let mut links = Vec::with_capacity(self.links.len());
        for v in 0..self.nt {
            for m in 0..self.nr {
                links.push(f(v, m, self.link(v, m)));
            }
        }
        MimoChannel { links, ..*self }
    }
}
