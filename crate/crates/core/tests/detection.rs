use num_complex::Complex64 as C64;
use phntrack::channel::{complex_gaussian, MimoChannel, PowerDelayProfile};
use phntrack::detector::{
    detect_perfect_phn, ekf_track, iterative_detect, DetectorConfig, EkfState, GainForm,
    PhasePrior, SystemModel,
};
use phntrack::phase_noise::{draw_wiener, PhnTrajectory};
use phntrack::phy::{synthesize_rx, synthesize_rx_clean, Qam, QamOrder, SynthesisRoute};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Instance {
    model: SystemModel,
    channel: MimoChannel,
    x: Vec<C64>,
    phns: Vec<PhnTrajectory>,
}

fn instance(rng: &mut ChaCha8Rng, n: usize, nt: usize, nr: usize, sigma2_delta: f64) -> Instance {
    let qam = Qam::new(QamOrder::Qam16);
    let pdp = PowerDelayProfile::exponential_default();
    let channel = MimoChannel::draw(rng, nt, nr, n, &pdp).unwrap();
    let x = (0..n)
        .map(|_| qam.points()[rng.random_range(0..16)])
        .collect();
    let phns = (0..nt * nr)
        .map(|_| draw_wiener(rng, n, sigma2_delta, 0.0).unwrap())
        .collect();
    Instance {
        model: SystemModel::new(&channel),
        channel,
        x,
        phns,
    }
}

#[test]
fn ekf_locks_onto_constant_phase() {
    let (phi, sigma2_w, n) = (0.05, 1e-4, 64);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut hits = 0;
    for _ in 0..500 {
        let s: Vec<C64> = (0..n).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
        let y: Vec<C64> = s
            .iter()
            .map(|v| C64::from_polar(1.0, phi) * v + complex_gaussian(&mut rng, sigma2_w))
            .collect();

        // Maximum-likelihood phase by grid search.
        let cost = |p: f64| -> f64 {
            let r = C64::from_polar(1.0, p);
            y.iter().zip(&s).map(|(a, b)| (a - r * b).norm_sqr()).sum()
        };
        let ml = (0..4001)
            .map(|i| -0.2 + 1e-4 * i as f64)
            .min_by(|a, b| cost(*a).total_cmp(&cost(*b)))
            .unwrap();
        assert!((ml - phi).abs() < 0.005, "ML phase {ml}");

        let tr = ekf_track(
            &y,
            &s,
            0.0,
            sigma2_w,
            EkfState::new(0.0, 1e-2),
            GainForm::Predicted,
        )
        .unwrap();
        if (tr.theta[n - 1] - phi).abs() < 0.005 {
            hits += 1;
        }
    }
    assert!(hits >= 475, "{hits} of 500 within 0.005 rad");
}

#[test]
fn ekf_covariance_contracts() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..200 {
        let s: Vec<C64> = (0..64).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
        let y: Vec<C64> = s
            .iter()
            .map(|v| v + complex_gaussian(&mut rng, 1e-2))
            .collect();
        let tr = ekf_track(
            &y,
            &s,
            1e-4,
            1e-2,
            EkfState::new(0.0, 1e-3),
            GainForm::Predicted,
        )
        .unwrap();
        for (post, pred) in tr.m_post.iter().zip(&tr.m_pred) {
            assert!(*post >= 0.0 && post <= pred);
        }
    }
}

#[test]
fn residual_does_not_grow_over_iterations() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let (nt, nr) = (2, 2);
    let mut ok = 0;
    for trial in 0..500 {
        let snr_db = [15.0, 20.0, 25.0, 30.0][trial % 4];
        let sigma2_delta = [1e-5, 1e-4][trial % 2];
        let sigma2_w = nt as f64 / 10f64.powf(snr_db / 10.0);
        let inst = instance(&mut rng, 64, nt, nr, sigma2_delta);
        let y = synthesize_rx(&inst.x, &inst.channel, &inst.phns, sigma2_w, &mut rng).unwrap();
        let mut cfg = DetectorConfig::new(QamOrder::Qam16, sigma2_w, sigma2_delta);
        cfg.max_iterations = 10;
        let res = iterative_detect(
            &inst.model,
            &y,
            &cfg,
            &PhasePrior::initial(nt * nr, sigma2_delta),
        )
        .unwrap();
        let trace = &res.residual_trace;
        if trace.last().unwrap() <= &trace[0] {
            ok += 1;
        }
    }
    assert!(
        ok >= 475,
        "{ok} of 500 trials ended at or below the first residual"
    );
}

#[test]
fn common_phase_offset_does_not_change_decisions() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let (nt, nr) = (2, 2);
    for _ in 0..50 {
        let inst = instance(&mut rng, 64, nt, nr, 1e-5);
        let cfg = DetectorConfig::new(QamOrder::Qam16, 1e-6, 1e-5);
        let prior = PhasePrior::initial(nt * nr, 1e-5);
        let base = synthesize_rx_clean(
            &inst.x,
            &inst.channel,
            &inst.phns,
            SynthesisRoute::TimeDomain,
        )
        .unwrap();
        let reference = iterative_detect(&inst.model, &base, &cfg, &prior).unwrap();

        // A common constant on every trajectory is absorbed into the channel.
        let c = rng.random_range(-3.0..3.0);
        let shifted: Vec<PhnTrajectory> = inst.phns.iter().map(|p| p.offset(c)).collect();
        let rotated = inst.channel.map_links(|_, _, link| link.rotated(c));
        let y = synthesize_rx_clean(&inst.x, &inst.channel, &shifted, SynthesisRoute::TimeDomain)
            .unwrap();
        let res = iterative_detect(&SystemModel::new(&rotated), &y, &cfg, &prior).unwrap();
        assert_eq!(res.x_hard, reference.x_hard);
        assert_eq!(reference.x_hard, inst.x);
    }
}

#[test]
fn perfect_knowledge_without_noise_is_error_free() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let (nt, nr) = (2, 2);
    let sigma2_w = nt as f64 / 1e6;
    for _ in 0..100 {
        let inst = instance(&mut rng, 64, nt, nr, 0.0);
        let y = synthesize_rx(&inst.x, &inst.channel, &inst.phns, sigma2_w, &mut rng).unwrap();
        let truth: Vec<Vec<f64>> = inst.phns.iter().map(|p| p.theta().to_vec()).collect();
        let cfg = DetectorConfig::new(QamOrder::Qam16, sigma2_w, 0.0);
        let res = detect_perfect_phn(&inst.model, &y, &truth, &cfg).unwrap();
        assert_eq!(res.x_hard, inst.x);
    }
}
