//! The effective system `y_m = sum_v P_{v,m} F^H H_{v,m} Lambda_v X + w_m`
//! and the linear algebra built on it.
//!
//! All transmit antennas carry the same data vector, so the per-antenna
//! blocks collapse into one `N x N` matrix per receive antenna,
//! `Psi_m = sum_v P_{v,m} Gamma_{v,m}`, and the receive antennas are stacked
//! row-wise into an `(N Nr) x N` system.

use nalgebra::DVector;

use crate::channel::MimoChannel;
use crate::error::{Error, Result};
use crate::numerics::{self, regularized_solve, CMat, RidgeCholesky, C64};
use crate::phy::lambda_ramp;

/// Channel-side constants of the system: `G_{v,m}(k) = H_{v,m}(k) Lambda_v(k)`.
#[derive(Clone, Debug)]
pub struct SystemModel {
    n: usize,
    nt: usize,
    nr: usize,
    gains: Vec<Vec<C64>>,
    h: Vec<Vec<C64>>,
}

/// Per-pair phase trajectories in tx-major order, each of length `N`.
pub type PhaseSet = [Vec<f64>];

fn phasors(theta: &[f64], sign: f64) -> impl Iterator<Item = C64> + '_ {
    theta.iter().map(move |t| C64::from_polar(1.0, sign * t))
}

impl SystemModel {
    pub fn new(channel: &MimoChannel) -> Self {
        let (n, nt, nr) = (channel.n(), channel.nt(), channel.nr());
        let l = channel.order();
        let mut gains = Vec::with_capacity(nt * nr);
        let mut h = Vec::with_capacity(nt * nr);
        for v in 0..nt {
            let ramp = lambda_ramp(n, v + 1, l);
            for m in 0..nr {
                let resp = channel.link(v, m).freq_response();
                gains.push(resp.iter().zip(&ramp).map(|(a, b)| a * b).collect());
                h.push(resp.to_vec());
            }
        }
        SystemModel {
            n,
            nt,
            nr,
            gains,
            h,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn nr(&self) -> usize {
        self.nr
    }

    pub fn pairs(&self) -> usize {
        self.nt * self.nr
    }

    pub fn pair_index(&self, v: usize, m: usize) -> usize {
        v * self.nr + m
    }

    pub fn gain(&self, v: usize, m: usize) -> &[C64] {
        &self.gains[self.pair_index(v, m)]
    }

    /// `H_{v,m}(k)` without the `Lambda_v` ramp.
    pub fn freq_response(&self, v: usize, m: usize) -> &[C64] {
        &self.h[self.pair_index(v, m)]
    }

    pub fn check_phases(&self, thetas: &PhaseSet) -> Result<()> {
        if thetas.len() != self.pairs() {
            return Err(Error::dim("phase set", self.pairs(), thetas.len()));
        }
        if let Some(t) = thetas.iter().find(|t| t.len() != self.n) {
            return Err(Error::dim("phase trajectory", self.n, t.len()));
        }
        Ok(())
    }

    pub fn check_rx(&self, y: &[Vec<C64>]) -> Result<()> {
        if y.len() != self.nr {
            return Err(Error::dim("received antennas", self.nr, y.len()));
        }
        if let Some(ym) = y.iter().find(|ym| ym.len() != self.n) {
            return Err(Error::dim("received samples", self.n, ym.len()));
        }
        Ok(())
    }

    /// `s_{v,m} = F^H H_{v,m} Lambda_v x`, the phase-free waveform of one pair.
    pub fn pair_waveform(&self, v: usize, m: usize, x: &[C64]) -> Vec<C64> {
        let mut buf: Vec<C64> = self
            .gain(v, m)
            .iter()
            .zip(x)
            .map(|(g, xk)| g * xk)
            .collect();
        numerics::idft_in_place(&mut buf);
        buf
    }

    /// All pair waveforms, tx-major.
    pub fn waveforms(&self, x: &[C64]) -> Vec<Vec<C64>> {
        (0..self.nt)
            .flat_map(|v| (0..self.nr).map(move |m| (v, m)))
            .map(|(v, m)| self.pair_waveform(v, m, x))
            .collect()
    }

    /// `sum_{v != skip} P_{v,m} s_{v,m}` from precomputed waveforms.
    pub fn combine(
        &self,
        m: usize,
        waveforms: &[Vec<C64>],
        thetas: &PhaseSet,
        skip: Option<usize>,
    ) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.n];
        for v in (0..self.nt).filter(|v| Some(*v) != skip) {
            let p = self.pair_index(v, m);
            for ((o, s), e) in out
                .iter_mut()
                .zip(&waveforms[p])
                .zip(phasors(&thetas[p], 1.0))
            {
                *o += e * s;
            }
        }
        out
    }

    /// Noiseless received signal at every antenna for data `x` and phases `thetas`.
    pub fn reconstruct(&self, x: &[C64], thetas: &PhaseSet) -> Vec<Vec<C64>> {
        let w = self.waveforms(x);
        (0..self.nr)
            .map(|m| self.combine(m, &w, thetas, None))
            .collect()
    }

    /// `sum_m ||y_m - sum_v P_{v,m} Gamma_{v,m} x||^2`, the stopping-rule objective.
    pub fn residual(&self, y: &[Vec<C64>], x: &[C64], thetas: &PhaseSet) -> f64 {
        self.reconstruct(x, thetas)
            .iter()
            .zip(y)
            .map(|(r, ym)| {
                ym.iter()
                    .zip(r)
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum::<f64>()
            })
            .sum()
    }

    /// First step of the detector: removes every other transmit antenna's
    /// estimated contribution from `y_m`.
    pub fn cancel_interference(
        &self,
        y_m: &[C64],
        m: usize,
        v: usize,
        waveforms: &[Vec<C64>],
        thetas: &PhaseSet,
    ) -> Vec<C64> {
        let interference = self.combine(m, waveforms, thetas, Some(v));
        y_m.iter().zip(&interference).map(|(a, b)| a - b).collect()
    }

    /// Dense `(N Nr) x N` matrix, rows `m N + n`.
    pub fn build_psi(&self, thetas: &PhaseSet) -> Result<CMat> {
        self.check_phases(thetas)?;
        let n = self.n;
        let f_h = numerics::dft_matrix(n).adjoint();
        let mut psi = CMat::zeros(n * self.nr, n);
        for v in 0..self.nt {
            for m in 0..self.nr {
                let p = self.pair_index(v, m);
                let g = &self.gains[p];
                for (row, e) in phasors(&thetas[p], 1.0).enumerate() {
                    for col in 0..n {
                        psi[(m * n + row, col)] += e * f_h[(row, col)] * g[col];
                    }
                }
            }
        }
        Ok(psi)
    }

    /// `Psi^H Psi` and `Psi^H y` without forming `Psi`.
    ///
    /// `F diag(p) F^H` is circulant with first column equal to the `1/N`
    /// spectrum of `p`, so each pair of transmit antennas contributes
    /// `conj(G_v(k)) U(k - k') G_v'(k')` with `U` the spectrum of
    /// `e^{j(theta_v' - theta_v)}`.
    pub fn normal_equations(&self, y: &[Vec<C64>], thetas: &PhaseSet) -> Result<(CMat, Vec<C64>)> {
        self.check_phases(thetas)?;
        self.check_rx(y)?;
        let n = self.n;
        let scale = 1.0 / (n as f64).sqrt();
        let mut gram = CMat::zeros(n, n);
        let mut rhs = vec![C64::new(0.0, 0.0); n];
        for m in 0..self.nr {
            for v in 0..self.nt {
                let pv = self.pair_index(v, m);
                let gv = &self.gains[pv];
                for k in 0..n {
                    gram[(k, k)] += gv[k].norm_sqr();
                }
                let mut ry: Vec<C64> = phasors(&thetas[pv], -1.0)
                    .zip(&y[m])
                    .map(|(e, s)| e * s)
                    .collect();
                numerics::dft_in_place(&mut ry);
                for ((r, g), t) in rhs.iter_mut().zip(gv).zip(&ry) {
                    *r += g.conj() * t;
                }
                for w in (v + 1)..self.nt {
                    let pw = self.pair_index(w, m);
                    let gw = &self.gains[pw];
                    let mut u: Vec<C64> = thetas[pw]
                        .iter()
                        .zip(&thetas[pv])
                        .map(|(a, b)| C64::from_polar(scale, a - b))
                        .collect();
                    numerics::dft_in_place(&mut u);
                    // Block (v, w) and its Hermitian transpose (w, v).
                    for k in 0..n {
                        let gk = gv[k].conj();
                        for kp in 0..n {
                            let val = gk * u[(k + n - kp) % n] * gw[kp];
                            gram[(k, kp)] += val;
                            gram[(kp, k)] += val.conj();
                        }
                    }
                }
            }
        }
        Ok((gram, rhs))
    }

    /// MMSE estimate through the structured normal equations.
    pub fn mmse(&self, y: &[Vec<C64>], thetas: &PhaseSet, sigma2_w: f64) -> Result<MmseSolution> {
        let (gram, rhs) = self.normal_equations(y, thetas)?;
        let chol = RidgeCholesky::factor(gram, sigma2_w, "mmse normal equations")?;
        let x = chol.solve(&rhs);
        numerics::ensure_finite(&x, "mmse estimate")?;
        Ok(MmseSolution::new(x, &chol, sigma2_w))
    }
}

/// Linear MMSE output plus the per-subcarrier bias `mu_k` that soft demapping needs.
#[derive(Clone, Debug)]
pub struct MmseSolution {
    pub x: Vec<C64>,
    pub bias: Vec<f64>,
}

impl MmseSolution {
    fn new(x: Vec<C64>, chol: &RidgeCholesky, sigma2_w: f64) -> Self {
        // Unbiasedness factor of the linear MMSE estimator: x_hat = mu x + noise.
        let bias = if sigma2_w > 0.0 {
            chol.inverse_diagonal()
                .into_iter()
                .map(|d| (1.0 - sigma2_w * d).clamp(1e-10, 1.0))
                .collect()
        } else {
            vec![1.0; x.len()]
        };
        MmseSolution { x, bias }
    }

    /// Unbiased symbol estimates `x / mu` and their error variances `(1 - mu) / mu`.
    pub fn unbiased(&self) -> (Vec<C64>, Vec<f64>) {
        let z = self
            .x
            .iter()
            .zip(&self.bias)
            .map(|(x, mu)| x / mu)
            .collect();
        let var = self
            .bias
            .iter()
            .map(|mu| ((1.0 - mu) / mu).max(1e-10))
            .collect();
        (z, var)
    }
}

/// `(Psi^H Psi + sigma2_w I)^{-1} Psi^H y` on an explicit stacked system.
pub fn mmse_detect(y_stacked: &[C64], psi: &CMat, sigma2_w: f64) -> Result<Vec<C64>> {
    regularized_solve(psi, y_stacked, sigma2_w)
}

/// Concatenates per-antenna vectors in antenna order.
pub fn stack(y: &[Vec<C64>]) -> Vec<C64> {
    y.iter().flatten().copied().collect()
}

pub(crate) fn constant_phases(values: &[f64], n: usize) -> Vec<Vec<f64>> {
    values.iter().map(|v| vec![*v; n]).collect()
}

pub(crate) fn zero_phases(pairs: usize, n: usize) -> Vec<Vec<f64>> {
    vec![vec![0.0; n]; pairs]
}

impl SystemModel {
    /// `Psi x` from the dense matrix, for cross-checks.
    pub fn apply_dense(&self, thetas: &PhaseSet, x: &[C64]) -> Result<Vec<C64>> {
        let psi = self.build_psi(thetas)?;
        Ok((psi * DVector::from_column_slice(x))
            .iter()
            .copied()
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ChannelRealization, PowerDelayProfile};
    use crate::phase_noise::draw_wiener;
    use crate::phy::{synthesize_rx_clean, Qam, QamOrder, SynthesisRoute};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(
        seed: u64,
        n: usize,
        nt: usize,
        nr: usize,
        var: f64,
    ) -> (MimoChannel, Vec<Vec<f64>>, Vec<C64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = MimoChannel::draw(
            &mut rng,
            nt,
            nr,
            n,
            &PowerDelayProfile::exponential_default(),
        )
        .unwrap();
        let th: Vec<Vec<f64>> = (0..nt * nr)
            .map(|_| {
                let t0 = rng.random_range(-0.5..0.5);
                draw_wiener(&mut rng, n, var, t0).unwrap().theta().to_vec()
            })
            .collect();
        let bits: Vec<u8> = (0..4 * n).map(|_| rng.random_range(0..2u8)).collect();
        let x = Qam::new(QamOrder::Qam16).map(&bits).unwrap();
        (ch, th, x)
    }

    fn to_traj(th: &[Vec<f64>]) -> Vec<crate::phase_noise::PhnTrajectory> {
        th.iter()
            .map(|t| crate::phase_noise::PhnTrajectory::new(t.clone(), 0.0).unwrap())
            .collect()
    }

    #[test]
    fn psi_identity_case() {
        let link = ChannelRealization::new(vec![C64::new(1.0, 0.0)], 8).unwrap();
        let ch = MimoChannel::from_links(1, 1, 8, vec![link]).unwrap();
        let model = SystemModel::new(&ch);
        let psi = model.build_psi(&zero_phases(1, 8)).unwrap();
        // Lambda_1 with L = 1 is a ramp; undo it to compare with F^H.
        let ramp = lambda_ramp(8, 1, 1);
        let f_h = numerics::dft_matrix(8).adjoint();
        for r in 0..8 {
            for c in 0..8 {
                assert!((psi[(r, c)] - f_h[(r, c)] * ramp[c]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn psi_matches_synthesis() {
        let (ch, th, x) = setup(1, 16, 2, 2, 1e-3);
        let model = SystemModel::new(&ch);
        let dense = model.apply_dense(&th, &x).unwrap();
        let synth =
            synthesize_rx_clean(&x, &ch, &to_traj(&th), SynthesisRoute::TimeDomain).unwrap();
        assert!(numerics::max_abs_diff(&dense, &stack(&synth)) < 1e-10);
        let fast = model.reconstruct(&x, &th);
        assert!(numerics::max_abs_diff(&stack(&fast), &stack(&synth)) < 1e-10);
    }

    #[test]
    fn constant_phase_scales_psi() {
        let (ch, _, _) = setup(2, 8, 2, 1, 0.0);
        let model = SystemModel::new(&ch);
        let phi = 0.37;
        let a = model.build_psi(&constant_phases(&[phi, phi], 8)).unwrap();
        let b = model.build_psi(&zero_phases(2, 8)).unwrap() * C64::from_polar(1.0, phi);
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn structured_normal_equations_match_dense() {
        let (ch, th, x) = setup(3, 16, 2, 2, 1e-3);
        let model = SystemModel::new(&ch);
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let y: Vec<Vec<C64>> = model
            .reconstruct(&x, &th)
            .into_iter()
            .map(|ym| crate::channel::add_awgn(&ym, 0.01, &mut rng).unwrap())
            .collect();
        let psi = model.build_psi(&th).unwrap();
        let (gram, rhs) = model.normal_equations(&y, &th).unwrap();
        let dense_gram = psi.adjoint() * &psi;
        assert!((gram - dense_gram).norm() < 1e-10);
        let dense_rhs = psi.adjoint() * DVector::from_column_slice(&stack(&y));
        assert!(numerics::max_abs_diff(&rhs, dense_rhs.as_slice()) < 1e-10);

        let fast = model.mmse(&y, &th, 0.01).unwrap().x;
        let slow = mmse_detect(&stack(&y), &psi, 0.01).unwrap();
        assert!(numerics::max_abs_diff(&fast, &slow) < 1e-8);
    }

    #[test]
    fn mmse_noiseless_recovers_data() {
        let (ch, th, x) = setup(4, 16, 2, 2, 1e-3);
        let model = SystemModel::new(&ch);
        let y = model.reconstruct(&x, &th);
        let sol = model.mmse(&y, &th, 0.0).unwrap();
        assert!(numerics::max_abs_diff(&sol.x, &x) < 1e-8);
    }

    #[test]
    fn mmse_identity_shrinks() {
        let y: Vec<C64> = (0..4).map(|i| C64::new(i as f64, 1.0)).collect();
        let psi = CMat::identity(4, 4);
        let x = mmse_detect(&y, &psi, 0.5).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b / 1.5).norm() < 1e-12);
        }
    }

    #[test]
    fn mmse_matches_explicit_normal_equations() {
        let (ch, th, _) = setup(5, 8, 1, 1, 1e-2);
        let model = SystemModel::new(&ch);
        let psi = model.build_psi(&th).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let y: Vec<C64> = (0..8)
            .map(|_| crate::channel::complex_gaussian(&mut rng, 1.0))
            .collect();
        let lhs = psi.adjoint() * &psi + CMat::identity(8, 8) * C64::new(0.1, 0.0);
        let oracle = lhs.try_inverse().unwrap() * psi.adjoint() * DVector::from_column_slice(&y);
        let x = mmse_detect(&y, &psi, 0.1).unwrap();
        assert!(numerics::max_abs_diff(&x, oracle.as_slice()) < 1e-10);
    }

    #[test]
    fn cancellation_cases() {
        let (ch, th, x) = setup(6, 16, 2, 2, 1e-3);
        let model = SystemModel::new(&ch);
        let y = model.reconstruct(&x, &th);
        let w = model.waveforms(&x);
        let own = model.cancel_interference(&y[1], 1, 0, &w, &th);
        let p = model.pair_index(0, 1);
        let expect: Vec<C64> = w[p]
            .iter()
            .zip(&th[p])
            .map(|(s, t)| C64::from_polar(1.0, *t) * s)
            .collect();
        assert!(numerics::max_abs_diff(&own, &expect) < 1e-10);

        // Zero interferer waveforms leave y untouched.
        let zero = vec![vec![C64::new(0.0, 0.0); 16]; 4];
        assert_eq!(model.cancel_interference(&y[0], 0, 1, &zero, &th), y[0]);

        let (ch1, th1, x1) = setup(7, 16, 1, 1, 1e-3);
        let m1 = SystemModel::new(&ch1);
        let y1 = m1.reconstruct(&x1, &th1);
        assert_eq!(
            m1.cancel_interference(&y1[0], 0, 0, &m1.waveforms(&x1), &th1),
            y1[0]
        );
    }

    #[test]
    fn residual_is_zero_for_truth() {
        let (ch, th, x) = setup(8, 16, 2, 2, 1e-3);
        let model = SystemModel::new(&ch);
        let y = model.reconstruct(&x, &th);
        assert!(model.residual(&y, &x, &th) < 1e-20);
        assert!(model.build_psi(&th[..3]).is_err());
    }
}
