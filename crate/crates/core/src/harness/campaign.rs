//! Monte Carlo campaign runner.
//!
//! A trial is one packet: a channel draw, one set of oscillators, and
//! `symbols_per_packet` OFDM symbols over which the channel is constant and
//! the phases keep drifting. Every selected detector sees the same frames.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::CampaignConfig;
use super::seeds::trial_seed;
use crate::channel::MimoChannel;
use crate::detector::{
    complexity_at, detect_no_tracking, detect_perfect_phn, detect_pilot_cpe, iterative_detect,
    DetectionResult, DetectorConfig, DetectorKind, PhasePrior, StopThreshold, SystemModel,
};
use crate::error::{Error, Result};
use crate::ldpc::{LdpcCode, DEFAULT_MAX_ITERATIONS};
use crate::numerics::C64;
use crate::phase_noise::OscillatorBank;
use crate::phy::{synthesize_rx, PilotLayout, Qam};
use crate::video::{self, RdParams};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Fraction of failed trials above which a campaign is rejected.
pub const FAILURE_LIMIT: f64 = 0.01;

/// One row of campaign output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub snr_db: f64,
    pub sigma2_delta: f64,
    pub nt: usize,
    pub nr: usize,
    pub qam: u32,
    pub detector: DetectorKind,
    /// Successful trials.
    pub trials: u64,
    pub uncoded_ber: f64,
    /// Half-width of the 95% Wilson interval on `uncoded_ber`.
    pub ber_ci: f64,
    pub coded_ber: Option<f64>,
    pub psnr_db: f64,
    pub mean_iters: f64,
    pub c_mult: f64,
    pub c_add: f64,
    pub failures: u64,
}

/// Raw integer tallies behind a record.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointCounts {
    pub bit_errors: u64,
    pub bits: u64,
    pub coded_errors: u64,
    pub coded_bits: u64,
    pub trials_ok: u64,
    pub failures: u64,
}

impl PointCounts {
    pub fn ber_interval(&self) -> (f64, f64) {
        wilson_interval(self.bit_errors, self.bits)
    }
}

#[derive(Clone, Debug)]
pub struct CampaignOutput {
    pub records: Vec<ResultRecord>,
    pub counts: Vec<PointCounts>,
}

impl CampaignOutput {
    pub fn find(
        &self,
        snr_db: f64,
        sigma2_delta: f64,
        detector: DetectorKind,
    ) -> Option<(&ResultRecord, &PointCounts)> {
        self.records.iter().zip(&self.counts).find(|(r, _)| {
            r.snr_db == snr_db && r.sigma2_delta == sigma2_delta && r.detector == detector
        })
    }

    /// Fails when any detector lost more than 1% of its trials.
    pub fn check_failures(&self) -> Result<()> {
        for c in &self.counts {
            let total = c.trials_ok + c.failures;
            if c.failures as f64 > FAILURE_LIMIT * total as f64 {
                return Err(Error::FailureThreshold {
                    failed: c.failures,
                    total,
                });
            }
        }
        Ok(())
    }
}

/// 95% Wilson score interval for `errors` out of `n`.
pub fn wilson_interval(errors: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = errors as f64 / nf;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = Z95 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Per-trial, per-detector tallies.
#[derive(Clone, Copy, Debug, Default)]
struct DetStats {
    bit_errors: u64,
    bits: u64,
    coded_errors: u64,
    coded_bits: u64,
    psnr: f64,
    iterations: u64,
    symbols: u64,
}

type Symbol = (Vec<Vec<C64>>, Vec<Vec<f64>>);

struct Packet {
    model: SystemModel,
    /// Received samples and true pair phases of every symbol.
    frames: Vec<Symbol>,
    tx_bits: Vec<u8>,
    messages: Vec<Vec<u8>>,
}

/// Shared, read-only campaign state.
pub struct Campaign {
    cfg: CampaignConfig,
    qam: Qam,
    pilots: PilotLayout,
    code: Option<LdpcCode>,
    rd: RdParams,
}

impl Campaign {
    pub fn new(cfg: CampaignConfig) -> Result<Self> {
        cfg.validate()?;
        let code = cfg.coding.then(LdpcCode::standard);
        let rd = cfg.rd_params(code.as_ref().map_or(1.0, |c| c.rate()))?;
        Ok(Campaign {
            qam: Qam::new(cfg.ofdm.qam),
            pilots: cfg.pilot_layout()?,
            code,
            rd,
            cfg,
        })
    }

    pub fn config(&self) -> &CampaignConfig {
        &self.cfg
    }

    fn noise_variance(&self, snr_db: f64) -> f64 {
        // Each receive antenna collects unit-energy data from every transmit antenna.
        self.cfg.antennas.nt as f64 / 10f64.powf(snr_db / 10.0)
    }

    fn detector_config(&self, sigma2_w: f64, sigma2_delta: f64) -> DetectorConfig {
        let mut d = DetectorConfig::new(
            self.cfg.ofdm.qam,
            sigma2_w,
            self.cfg.phn_variance_mode.pair_variance(sigma2_delta),
        );
        d.zeta = StopThreshold::Relative(self.cfg.zeta_rel);
        d.max_iterations = self.cfg.max_iterations;
        d.gain_form = self.cfg.gain_form;
        d.reconstruction = self.cfg.reconstruction;
        d.pilots = self.pilots.clone();
        d
    }

    fn draw_packet(
        &self,
        rng: &mut ChaCha8Rng,
        sigma2_delta: f64,
        sigma2_w: f64,
    ) -> Result<Packet> {
        let (nt, nr) = (self.cfg.antennas.nt, self.cfg.antennas.nr);
        let (n, cp) = (self.cfg.ofdm.n, self.cfg.ofdm.cp_len);
        let symbols = self.cfg.symbols_per_packet;
        let channel = MimoChannel::draw(rng, nt, nr, n, &self.cfg.channel.pdp_db)?;
        let stride = n + cp;
        let osc = OscillatorBank::draw(
            rng,
            nt,
            nr,
            (symbols - 1) * stride + n,
            self.cfg.phn_variance_mode.oscillator_variance(sigma2_delta),
        )?;

        let total_bits = self.cfg.coded_bits_per_packet()?;
        let mut tx_bits = Vec::with_capacity(total_bits);
        let mut messages = Vec::new();
        if let Some(code) = &self.code {
            for _ in 0..total_bits / code.n() {
                let msg: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2u8)).collect();
                tx_bits.extend(code.encode(&msg)?);
                messages.push(msg);
            }
        }
        while tx_bits.len() < total_bits {
            tx_bits.push(rng.random_range(0..2u8));
        }

        let data = self.qam.map(&tx_bits)?;
        let per_symbol = data.len() / symbols;
        let mut frames = Vec::with_capacity(symbols);
        for (j, chunk) in data.chunks(per_symbol).enumerate() {
            let x = self.pilots.assemble(n, chunk)?;
            let phns = osc.pairs_window(j * stride, n);
            let y = synthesize_rx(&x, &channel, &phns, sigma2_w, rng)?;
            frames.push((y, phns.iter().map(|p| p.theta().to_vec()).collect()));
        }
        Ok(Packet {
            model: SystemModel::new(&channel),
            frames,
            tx_bits,
            messages,
        })
    }

    fn run_detector(
        &self,
        kind: DetectorKind,
        packet: &Packet,
        det: &DetectorConfig,
    ) -> Result<DetStats> {
        let model = &packet.model;
        let bps = self.qam.bits_per_symbol();
        let per_symbol_bits = self.pilots.data_positions(model.n()).len() * bps;
        let mut stats = DetStats::default();
        let mut llrs = Vec::new();
        let mut rate_total = 0.0;
        let gap = self.cfg.ofdm.cp_len + 1;
        let mut prior = PhasePrior::initial(
            model.pairs(),
            det.initial_variance.unwrap_or(det.sigma2_delta),
        );
        for (j, (y, truth)) in packet.frames.iter().enumerate() {
            let res: DetectionResult = match kind {
                DetectorKind::Proposed => {
                    let r = iterative_detect(model, y, det, &prior)?;
                    prior = PhasePrior::advance(&r, gap, det.sigma2_delta);
                    r
                }
                DetectorKind::Perfect => detect_perfect_phn(model, y, truth, det)?,
                DetectorKind::NoTracking => detect_no_tracking(model, y, det)?,
                DetectorKind::Pilot => {
                    // No memory across symbols: the prior is the training
                    // reference plus the drift accumulated up to mid-symbol.
                    let drift = (j * (model.n() + self.cfg.ofdm.cp_len) + model.n() / 2) as f64
                        * det.sigma2_delta;
                    let base = det.initial_variance.unwrap_or(det.sigma2_delta);
                    detect_pilot_cpe(
                        model,
                        y,
                        det,
                        &PhasePrior::initial(model.pairs(), base + drift),
                    )?
                }
            };
            let sent = &packet.tx_bits[j * per_symbol_bits..(j + 1) * per_symbol_bits];
            let got = self.qam.demap_hard(&self.pilots.extract_data(&res.x_hard));
            stats.bit_errors += sent.iter().zip(&got).filter(|(a, b)| a != b).count() as u64;
            stats.bits += sent.len() as u64;
            if self.code.is_some() {
                let (z, var) = res.soft_symbols();
                let data_pos = self.pilots.data_positions(model.n());
                let zd: Vec<C64> = data_pos.iter().map(|k| z[*k]).collect();
                let vd: Vec<f64> = data_pos.iter().map(|k| var[*k]).collect();
                llrs.extend(self.qam.demap_llr(&zd, &vd)?);
            }
            rate_total += video::symbol_rates(model, &res, self.rd.code_rate)
                .iter()
                .sum::<f64>();
            stats.iterations += res.iterations as u64;
            stats.symbols += 1;
        }
        if let Some(code) = &self.code {
            for (i, msg) in packet.messages.iter().enumerate() {
                let out = code.decode(
                    &llrs[i * code.n()..(i + 1) * code.n()],
                    DEFAULT_MAX_ITERATIONS,
                )?;
                stats.coded_errors +=
                    msg.iter().zip(&out.bits).filter(|(a, b)| a != b).count() as u64;
                stats.coded_bits += msg.len() as u64;
            }
        }
        let mean_rate = rate_total / stats.symbols as f64;
        stats.psnr = video::psnr(video::distortion_from_total(mean_rate, &self.rd)?)?;
        Ok(stats)
    }

    fn run_trial(&self, snr_index: usize, sigma_index: usize, trial: u64) -> Vec<Option<DetStats>> {
        let snr = self.cfg.snr_db[snr_index];
        let sigma2 = self.cfg.sigma2_delta[sigma_index];
        let sigma2_w = self.noise_variance(snr);
        let mut rng =
            ChaCha8Rng::seed_from_u64(trial_seed(self.cfg.seed, snr_index, sigma_index, trial));
        let det = self.detector_config(sigma2_w, sigma2);
        let Ok(packet) = self.draw_packet(&mut rng, sigma2, sigma2_w) else {
            return vec![None; self.cfg.detectors.len()];
        };
        self.cfg
            .detectors
            .iter()
            .map(|kind| self.run_detector(*kind, &packet, &det).ok())
            .collect()
    }

    fn record(
        &self,
        snr: f64,
        sigma2: f64,
        kind: DetectorKind,
        trials: &[Vec<Option<DetStats>>],
        idx: usize,
    ) -> Result<(ResultRecord, PointCounts)> {
        let mut c = PointCounts::default();
        let (mut psnr, mut iters, mut symbols) = (0.0, 0u64, 0u64);
        for t in trials {
            match &t[idx] {
                Some(s) => {
                    c.trials_ok += 1;
                    c.bit_errors += s.bit_errors;
                    c.bits += s.bits;
                    c.coded_errors += s.coded_errors;
                    c.coded_bits += s.coded_bits;
                    psnr += s.psnr;
                    iters += s.iterations;
                    symbols += s.symbols;
                }
                None => c.failures += 1,
            }
        }
        let ber = c.bit_errors as f64 / c.bits.max(1) as f64;
        let (lo, hi) = c.ber_interval();
        let mean_iters = iters as f64 / symbols.max(1) as f64;
        let t = if kind == DetectorKind::Proposed {
            mean_iters
        } else {
            0.0
        };
        let o = &self.cfg.ofdm;
        let (c_mult, c_add) = complexity_at(
            o.n as u64,
            self.cfg.antennas.nt as u64,
            self.cfg.antennas.nr as u64,
            t,
        )?;
        let record = ResultRecord {
            snr_db: snr,
            sigma2_delta: sigma2,
            nt: self.cfg.antennas.nt,
            nr: self.cfg.antennas.nr,
            qam: o.qam.into(),
            detector: kind,
            trials: c.trials_ok,
            uncoded_ber: ber,
            ber_ci: (hi - lo) / 2.0,
            coded_ber: self
                .code
                .as_ref()
                .map(|_| c.coded_errors as f64 / c.coded_bits.max(1) as f64),
            psnr_db: psnr / c.trials_ok.max(1) as f64,
            mean_iters,
            c_mult,
            c_add,
            failures: c.failures,
        };
        Ok((record, c))
    }

    /// Runs every grid point. Output order: SNR, then phase-noise variance,
    /// then detector in configuration order.
    pub fn run(&self, workers: usize) -> Result<CampaignOutput> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?;
        let mut out = CampaignOutput {
            records: Vec::new(),
            counts: Vec::new(),
        };
        for (si, snr) in self.cfg.snr_db.iter().enumerate() {
            for (gi, sigma2) in self.cfg.sigma2_delta.iter().enumerate() {
                let trials: Vec<Vec<Option<DetStats>>> = pool.install(|| {
                    (0..self.cfg.trials)
                        .into_par_iter()
                        .map(|t| self.run_trial(si, gi, t))
                        .collect()
                });
                for (idx, kind) in self.cfg.detectors.iter().enumerate() {
                    let (r, c) = self.record(*snr, *sigma2, *kind, &trials, idx)?;
                    out.records.push(r);
                    out.counts.push(c);
                }
            }
        }
        Ok(out)
    }
}

/// Convenience wrapper: validate, run, and enforce the failure limit.
pub fn run_campaign(cfg: &CampaignConfig, workers: usize) -> Result<CampaignOutput> {
    let out = Campaign::new(cfg.clone())?.run(workers)?;
    out.check_failures()?;
    Ok(out)
}
