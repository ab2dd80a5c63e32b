//! Fixtures shared by the benchmarks.

use phntrack::channel::{MimoChannel, PowerDelayProfile};
use phntrack::detector::{DetectorConfig, SystemModel};
use phntrack::phase_noise::OscillatorBank;
use phntrack::phy::synthesize_rx;
use phntrack::{Qam, QamOrder, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// One received 16-QAM symbol with Wiener phase noise and AWGN.
pub struct Frame {
    pub model: SystemModel,
    pub y: Vec<Vec<C64>>,
    pub cfg: DetectorConfig,
}

pub fn frame(n: usize, nt: usize, nr: usize, snr_db: f64, sigma2_delta: f64, seed: u64) -> Frame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let channel = MimoChannel::draw(
        &mut rng,
        nt,
        nr,
        n,
        &PowerDelayProfile::exponential_default(),
    )
    .unwrap();
    let bits: Vec<u8> = (0..4 * n).map(|_| rng.random_range(0..2u8)).collect();
    let x = Qam::new(QamOrder::Qam16).map(&bits).unwrap();
    let bank = OscillatorBank::draw(&mut rng, nt, nr, n, sigma2_delta / 2.0).unwrap();
    let sigma2_w = nt as f64 * 10f64.powf(-snr_db / 10.0);
    let y = synthesize_rx(&x, &channel, &bank.pairs_window(0, n), sigma2_w, &mut rng).unwrap();
    Frame {
        model: SystemModel::new(&channel),
        y,
        cfg: DetectorConfig::new(QamOrder::Qam16, sigma2_w, sigma2_delta),
    }
}

/// Channel LLRs for a random codeword seen through BPSK and AWGN.
pub fn noisy_llrs(code: &phntrack::LdpcCode, sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let msg: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2u8)).collect();
    let cw = code.encode(&msg).unwrap();
    cw.iter()
        .map(|b| {
            let s = if *b == 0 { 1.0 } else { -1.0 };
            let noise: f64 = sigma * rng.sample::<f64, _>(StandardNormal);
            2.0 * (s + noise) / (sigma * sigma)
        })
        .collect()
}
