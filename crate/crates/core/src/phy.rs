//! QAM mapping, OFDM framing, the per-antenna frequency-modulation
//! transform and received-signal synthesis.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{add_awgn, MimoChannel};
use crate::error::{Error, Result};
use crate::numerics::{self, circular_convolve, CMat, C64};
use crate::phase_noise::{PhnTrajectory, SpectralPhn};

// ---------------------------------------------------------------------------
// QAM
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum QamOrder {
    Qpsk,
    Qam16,
    Qam64,
}

impl QamOrder {
    pub fn points(self) -> usize {
        match self {
            QamOrder::Qpsk => 4,
            QamOrder::Qam16 => 16,
            QamOrder::Qam64 => 64,
        }
    }

    pub fn bits_per_symbol(self) -> usize {
        self.points().trailing_zeros() as usize
    }
}

impl TryFrom<u32> for QamOrder {
    type Error = Error;
    fn try_from(order: u32) -> Result<Self> {
        match order {
            4 => Ok(QamOrder::Qpsk),
            16 => Ok(QamOrder::Qam16),
            64 => Ok(QamOrder::Qam64),
            other => Err(Error::config(format!(
                "unsupported QAM order {other} (expected 4, 16 or 64)"
            ))),
        }
    }
}

impl From<QamOrder> for u32 {
    fn from(q: QamOrder) -> u32 {
        q.points() as u32
    }
}

/// Gray-mapped square QAM with unit average energy.
///
/// The first half of each symbol's bits (MSB first) select the in-phase
/// level, the second half the quadrature level; each axis is Gray coded so
/// neighbouring levels differ in one bit.
#[derive(Clone, Debug)]
pub struct Qam {
    order: QamOrder,
    axis_bits: usize,
    levels: usize,
    scale: f64,
    points: Vec<C64>,
}

fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

fn inverse_gray(mut g: usize) -> usize {
    let mut i = g;
    while g > 0 {
        g >>= 1;
        i ^= g;
    }
    i
}

impl Qam {
    pub fn new(order: QamOrder) -> Self {
        let bps = order.bits_per_symbol();
        let axis_bits = bps / 2;
        let levels = 1usize << axis_bits;
        let m = order.points() as f64;
        let scale = 1.0 / (2.0 * (m - 1.0) / 3.0).sqrt();
        let amp = |label: usize| (2 * inverse_gray(label)) as f64 - (levels - 1) as f64;
        let points = (0..order.points())
            .map(|s| {
                let i_label = s >> axis_bits;
                let q_label = s & (levels - 1);
                C64::new(amp(i_label) * scale, amp(q_label) * scale)
            })
            .collect();
        Qam {
            order,
            axis_bits,
            levels,
            scale,
            points,
        }
    }

    pub fn order(&self) -> QamOrder {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        2 * self.axis_bits
    }

    /// Constellation point for every symbol label.
    pub fn points(&self) -> &[C64] {
        &self.points
    }

    pub fn map(&self, bits: &[u8]) -> Result<Vec<C64>> {
        let bps = self.bits_per_symbol();
        if !bits.len().is_multiple_of(bps) {
            return Err(Error::config(format!(
                "bit count {} is not a multiple of {bps}",
                bits.len()
            )));
        }
        Ok(bits
            .chunks(bps)
            .map(|chunk| {
                let label = chunk
                    .iter()
                    .fold(0usize, |acc, b| (acc << 1) | (*b as usize & 1));
                self.points[label]
            })
            .collect())
    }

    fn axis_index(&self, v: f64) -> usize {
        let idx = ((v / self.scale + (self.levels - 1) as f64) / 2.0).round();
        idx.clamp(0.0, (self.levels - 1) as f64) as usize
    }

    /// Symbol label of the nearest constellation point.
    pub fn nearest_label(&self, y: C64) -> usize {
        let i = gray(self.axis_index(y.re));
        let q = gray(self.axis_index(y.im));
        (i << self.axis_bits) | q
    }

    pub fn nearest(&self, y: C64) -> C64 {
        self.points[self.nearest_label(y)]
    }

    pub fn decide(&self, symbols: &[C64]) -> Vec<C64> {
        symbols.iter().map(|y| self.nearest(*y)).collect()
    }

    pub fn demap_hard(&self, symbols: &[C64]) -> Vec<u8> {
        let bps = self.bits_per_symbol();
        let mut out = Vec::with_capacity(symbols.len() * bps);
        for y in symbols {
            let label = self.nearest_label(*y);
            for b in (0..bps).rev() {
                out.push(((label >> b) & 1) as u8);
            }
        }
        out
    }

    /// Exact per-bit LLRs `ln P(b=0|y) / P(b=1|y)` under `CN(0, sigma2[i])`
    /// noise on symbol `i`. Positive values favour bit 0.
    pub fn demap_llr(&self, symbols: &[C64], sigma2: &[f64]) -> Result<Vec<f64>> {
        if sigma2.len() != symbols.len() {
            return Err(Error::dim("demap_llr", symbols.len(), sigma2.len()));
        }
        let bps = self.bits_per_symbol();
        let mut metrics = vec![0.0; self.points.len()];
        let mut out = Vec::with_capacity(symbols.len() * bps);
        for (y, s2) in symbols.iter().zip(sigma2) {
            let s2 = s2.max(1e-12);
            for (m, c) in metrics.iter_mut().zip(&self.points) {
                *m = -(y - c).norm_sqr() / s2;
            }
            for b in (0..bps).rev() {
                let (mut max0, mut max1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
                for (label, m) in metrics.iter().enumerate() {
                    if (label >> b) & 1 == 0 {
                        max0 = max0.max(*m);
                    } else {
                        max1 = max1.max(*m);
                    }
                }
                let (mut sum0, mut sum1) = (0.0, 0.0);
                for (label, m) in metrics.iter().enumerate() {
                    if (label >> b) & 1 == 0 {
                        sum0 += (m - max0).exp();
                    } else {
                        sum1 += (m - max1).exp();
                    }
                }
                out.push((max0 + sum0.ln()) - (max1 + sum1.ln()));
            }
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// OFDM
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OfdmConfig {
    pub n: usize,
    pub cp_len: usize,
    pub qam: QamOrder,
    pub sample_rate_hz: f64,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        OfdmConfig {
            n: 64,
            cp_len: 16,
            qam: QamOrder::Qam16,
            sample_rate_hz: 20e6,
        }
    }
}

impl OfdmConfig {
    /// Checks the framing against a channel with `channel_order` taps.
    pub fn validate(&self, channel_order: usize) -> Result<()> {
        if self.n == 0 || !self.n.is_power_of_two() {
            return Err(Error::config(format!(
                "N = {} is not a power of two",
                self.n
            )));
        }
        if self.cp_len >= self.n {
            return Err(Error::config(
                "cyclic prefix must be shorter than the symbol",
            ));
        }
        if self.cp_len + 1 < channel_order {
            return Err(Error::config(format!(
                "cyclic prefix {} shorter than channel memory {}",
                self.cp_len,
                channel_order.saturating_sub(1)
            )));
        }
        if !(self.sample_rate_hz > 0.0) {
            return Err(Error::config("sample rate must be positive"));
        }
        Ok(())
    }

    /// `T + T_cp` in seconds.
    pub fn symbol_duration(&self) -> f64 {
        (self.n + self.cp_len) as f64 / self.sample_rate_hz
    }
}

/// `x = idft(X)` with its last `cp_len` samples prepended.
pub fn ofdm_modulate(x_freq: &[C64], cp_len: usize) -> Result<Vec<C64>> {
    let n = x_freq.len();
    if cp_len >= n.max(1) {
        return Err(Error::config(
            "cyclic prefix must be shorter than the symbol",
        ));
    }
    let payload = numerics::idft(x_freq, n)?;
    let mut out = Vec::with_capacity(n + cp_len);
    out.extend_from_slice(&payload[n - cp_len..]);
    out.extend_from_slice(&payload);
    Ok(out)
}

/// Strips the cyclic prefix. No DFT is taken; the detector works on time samples.
pub fn ofdm_demodulate(y_cp: &[C64], cp_len: usize) -> Result<Vec<C64>> {
    if cp_len >= y_cp.len() {
        return Err(Error::config(
            "cyclic prefix must be shorter than the symbol",
        ));
    }
    Ok(y_cp[cp_len..].to_vec())
}

/// Per-subcarrier phase ramp of transmit antenna `v` (1-based; `v = 0` is
/// the identity): `Lambda_v(k) = e^{j 2 pi (L+1) k v / N}`.
pub fn lambda_ramp(n: usize, v: usize, l: usize) -> Vec<C64> {
    (0..n)
        .map(|k| {
            let e = ((l + 1) * k * v) % n;
            C64::from_polar(1.0, 2.0 * PI * e as f64 / n as f64)
        })
        .collect()
}

/// `d_v = Lambda_v X`: a cyclic time shift by `(L+1) v` samples.
pub fn lambda_transform(x_freq: &[C64], v: usize, l: usize) -> Vec<C64> {
    lambda_ramp(x_freq.len(), v, l)
        .into_iter()
        .zip(x_freq)
        .map(|(r, x)| r * x)
        .collect()
}

// ---------------------------------------------------------------------------
// Pilots and frame assembly
// ---------------------------------------------------------------------------

/// Known QPSK values on equally spaced subcarriers.
#[derive(Clone, Debug, PartialEq)]
pub struct PilotLayout {
    positions: Vec<usize>,
    values: Vec<C64>,
}

impl PilotLayout {
    /// `count` comb pilots at `i * N / count`. `count == 0` yields no pilots.
    pub fn comb(n: usize, count: usize) -> Result<Self> {
        if count > n || (count > 0 && !n.is_multiple_of(count)) {
            return Err(Error::config(format!(
                "{count} comb pilots do not divide {n} subcarriers"
            )));
        }
        let positions: Vec<usize> = (0..count).map(|i| i * n / count.max(1)).collect();
        let values = (0..count)
            .map(|i| C64::from_polar(1.0, PI / 4.0 + (i % 4) as f64 * PI / 2.0))
            .collect();
        Ok(PilotLayout { positions, values })
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn data_positions(&self, n: usize) -> Vec<usize> {
        (0..n).filter(|k| !self.positions.contains(k)).collect()
    }

    /// Places `data` on the non-pilot subcarriers.
    pub fn assemble(&self, n: usize, data: &[C64]) -> Result<Vec<C64>> {
        let slots = self.data_positions(n);
        if slots.len() != data.len() {
            return Err(Error::dim("PilotLayout::assemble", slots.len(), data.len()));
        }
        let mut x = vec![C64::new(0.0, 0.0); n];
        for (k, d) in slots.iter().zip(data) {
            x[*k] = *d;
        }
        for (k, p) in self.positions.iter().zip(&self.values) {
            x[*k] = *p;
        }
        Ok(x)
    }

    pub fn extract_data(&self, x: &[C64]) -> Vec<C64> {
        self.data_positions(x.len())
            .into_iter()
            .map(|k| x[k])
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Synthesis
// ---------------------------------------------------------------------------

/// Independent ways of computing the noiseless received signal. All must agree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SynthesisRoute {
    /// `P_{v,m} (x_v (*) h_{v,m})` with circular convolution.
    TimeDomain,
    /// Double sum over transmit antennas and subcarriers.
    DirectSum,
    /// Dense matrices `P_{v,m} F^H H_{v,m} Lambda_v X`.
    Matrix,
    /// Cyclic prefix, linear convolution, prefix removal, then phase.
    LinearWithCp { cp_len: usize },
}

fn check_dims(x: &[C64], channel: &MimoChannel, phns: &[PhnTrajectory]) -> Result<()> {
    if x.len() != channel.n() {
        return Err(Error::dim("synthesize_rx data", channel.n(), x.len()));
    }
    if phns.len() != channel.nt() * channel.nr() {
        return Err(Error::dim(
            "synthesize_rx phase pairs",
            channel.nt() * channel.nr(),
            phns.len(),
        ));
    }
    if let Some(p) = phns.iter().find(|p| p.len() != channel.n()) {
        return Err(Error::dim(
            "synthesize_rx phase length",
            channel.n(),
            p.len(),
        ));
    }
    Ok(())
}

/// Noiseless received samples (CP removed) for every receive antenna.
///
/// `phns` holds the composite trajectory of each pair in tx-major order.
/// The channel order used for the `Lambda_v` ramp is the channel's tap count.
pub fn synthesize_rx_clean(
    x: &[C64],
    channel: &MimoChannel,
    phns: &[PhnTrajectory],
    route: SynthesisRoute,
) -> Result<Vec<Vec<C64>>> {
    check_dims(x, channel, phns)?;
    let (n, nt, nr) = (channel.n(), channel.nt(), channel.nr());
    let l = channel.order();
    let mut out = vec![vec![C64::new(0.0, 0.0); n]; nr];
    for v in 0..nt {
        let d = lambda_transform(x, v + 1, l);
        let x_time = numerics::idft(&d, n)?;
        for (m, y) in out.iter_mut().enumerate() {
            let link = channel.link(v, m);
            let theta = phns[v * nr + m].theta();
            let contrib: Vec<C64> = match route {
                SynthesisRoute::TimeDomain => circular_convolve(&x_time, link.taps())?,
                SynthesisRoute::DirectSum => {
                    let h = link.freq_response();
                    let scale = 1.0 / (n as f64).sqrt();
                    (0..n)
                        .map(|t| {
                            (0..n)
                                .map(|k| {
                                    h[k] * d[k]
                                        * C64::from_polar(
                                            1.0,
                                            2.0 * PI * ((k * t) % n) as f64 / n as f64,
                                        )
                                })
                                .sum::<C64>()
                                * scale
                        })
                        .collect()
                }
                SynthesisRoute::Matrix => {
                    let f = numerics::dft_matrix(n);
                    let hd = DVector::from_iterator(
                        n,
                        link.freq_response().iter().zip(&d).map(|(h, dv)| h * dv),
                    );
                    let r = f.adjoint() * hd;
                    r.iter().copied().collect()
                }
                SynthesisRoute::LinearWithCp { cp_len } => {
                    let tx = ofdm_modulate(&d, cp_len)?;
                    let taps = link.taps();
                    let lin: Vec<C64> = (0..tx.len())
                        .map(|t| {
                            taps.iter()
                                .enumerate()
                                .filter(|(i, _)| *i <= t)
                                .map(|(i, h)| h * tx[t - i])
                                .sum()
                        })
                        .collect();
                    ofdm_demodulate(&lin, cp_len)?
                }
            };
            for ((acc, c), th) in y.iter_mut().zip(contrib).zip(theta) {
                *acc += C64::from_polar(1.0, *th) * c;
            }
        }
    }
    Ok(out)
}

/// Received samples at every antenna with AWGN of variance `sigma2_w`.
pub fn synthesize_rx<R: Rng + ?Sized>(
    x: &[C64],
    channel: &MimoChannel,
    phns: &[PhnTrajectory],
    sigma2_w: f64,
    rng: &mut R,
) -> Result<Vec<Vec<C64>>> {
    synthesize_rx_clean(x, channel, phns, SynthesisRoute::TimeDomain)?
        .into_iter()
        .map(|y| add_awgn(&y, sigma2_w, rng))
        .collect()
}

/// One OFDM symbol as transmitted and received.
#[derive(Clone, Debug)]
pub struct MimoFrame {
    pub x: Vec<C64>,
    pub rx: Vec<Vec<C64>>,
}

impl MimoFrame {
    pub fn synthesize<R: Rng + ?Sized>(
        x: Vec<C64>,
        channel: &MimoChannel,
        phns: &[PhnTrajectory],
        sigma2_w: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let rx = synthesize_rx(&x, channel, phns, sigma2_w, rng)?;
        Ok(MimoFrame { x, rx })
    }
}

/// Splits subcarrier `k` of `J (*) (H X)` into the common-phase term and the
/// inter-carrier leakage from every other subcarrier (indices mod N).
pub fn cpe_ici_decompose(j: &SpectralPhn, h: &[C64], x: &[C64], k: usize) -> (C64, C64) {
    let n = x.len();
    let cpe = j.cpe() * h[k] * x[k];
    let ici = (0..n)
        .filter(|t| *t != k)
        .map(|t| j.at(k as isize - t as isize) * h[t] * x[t])
        .sum();
    (cpe, ici)
}

/// `(J (*) (H X))(k)` for every `k`, by direct summation.
pub fn phase_spectrum_convolve(j: &SpectralPhn, h: &[C64], x: &[C64]) -> Vec<C64> {
    (0..x.len())
        .map(|k| {
            let (c, i) = cpe_ici_decompose(j, h, x, k);
            c + i
        })
        .collect()
}

/// Dense `F^H diag(h .* Lambda_v)`, i.e. `Gamma_v` for one pair.
pub fn gamma_matrix(h: &[C64], v: usize, l: usize) -> CMat {
    let n = h.len();
    let ramp = lambda_ramp(n, v, l);
    let f = numerics::dft_matrix(n);
    let mut g = f.adjoint();
    for (col, (hk, rk)) in h.iter().zip(&ramp).enumerate() {
        let s = hk * rk;
        for row in 0..n {
            g[(row, col)] *= s;
        }
    }
    g
}
