//! Rate-distortion model of the transmitted light-field video and the
//! transposed view ordering.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detector::{DetectionResult, SystemModel};
use crate::error::{Error, Result};
use crate::numerics::C64;

/// Floor on the reconstruction-error power in the rate estimate.
pub const RATE_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdParams {
    /// MSE offset, squared pixel units.
    pub a: f64,
    pub b: f64,
    pub z: f64,
    /// GOP duration `T_s` in seconds.
    pub gop_duration_s: f64,
    /// `T0 = T + T_cp` in seconds.
    pub symbol_duration_s: f64,
    pub code_rate: f64,
}

impl RdParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.a > 0.0
            && self.b > 0.0
            && self.z >= 0.0
            && self.gop_duration_s > 0.0
            && self.symbol_duration_s > 0.0
            && self.code_rate > 0.0
            && self.code_rate <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!(
                "invalid rate-distortion parameters {self:?}"
            )))
        }
    }

    /// `T_s / T0`.
    pub fn symbols_per_gop(&self) -> f64 {
        self.gop_duration_s / self.symbol_duration_s
    }
}

/// Instantaneous rate of subcarrier `k` for one transmit antenna.
///
/// Slices run over receive antennas: `h[m] = H_{v,m}(k)`, `y[m] = Y_m(k)`,
/// `s_own[m] = S_m(k)` and `s_int[m]` the reconstruction from every other
/// transmit antenna.
pub fn estimate_rate(
    x_hat: C64,
    h: &[C64],
    y: &[C64],
    s_own: &[C64],
    s_int: &[C64],
    code_rate: f64,
) -> f64 {
    let signal = x_hat.norm_sqr() * h.iter().map(|v| v.norm_sqr()).sum::<f64>();
    let residual: f64 = y
        .iter()
        .zip(s_own)
        .zip(s_int)
        .map(|((y, s), i)| (y - s - i).norm_sqr())
        .sum();
    code_rate * (1.0 + signal / residual.max(RATE_FLOOR)).log2()
}

/// Rates of every `(v, k)` for one detected symbol, tx-major.
pub fn symbol_rates(model: &SystemModel, result: &DetectionResult, code_rate: f64) -> Vec<f64> {
    let terms = &result.sinr;
    let (n, nt, nr) = (model.n(), model.nt(), model.nr());
    let mut out = Vec::with_capacity(nt * n);
    for v in 0..nt {
        for k in 0..n {
            let h: Vec<C64> = (0..nr).map(|m| model.freq_response(v, m)[k]).collect();
            let y: Vec<C64> = (0..nr).map(|m| terms.y_freq[m][k]).collect();
            let own: Vec<C64> = (0..nr)
                .map(|m| terms.pair_spectra[model.pair_index(v, m)][k])
                .collect();
            let int: Vec<C64> = (0..nr)
                .map(|m| {
                    (0..nt)
                        .filter(|l| *l != v)
                        .map(|l| terms.pair_spectra[model.pair_index(l, m)][k])
                        .sum()
                })
                .collect();
            out.push(estimate_rate(
                result.x_hard[k],
                &h,
                &y,
                &own,
                &int,
                code_rate,
            ));
        }
    }
    out
}

/// `D_T = b / ((T_s / T0) R + z) + a` for a total per-symbol rate `R`.
pub fn distortion_from_total(total_rate: f64, params: &RdParams) -> Result<f64> {
    params.validate()?;
    if !(total_rate >= 0.0) {
        return Err(Error::Domain(format!(
            "rate must be non-negative, got {total_rate}"
        )));
    }
    let denom = params.symbols_per_gop() * total_rate + params.z;
    if !(denom > 0.0) {
        return Err(Error::config("distortion denominator must be positive"));
    }
    Ok(params.b / denom + params.a)
}

/// Distortion from the individual rates `R_v(k)`.
pub fn distortion(rates: &[f64], params: &RdParams) -> Result<f64> {
    if rates.iter().any(|r| !(*r >= 0.0)) {
        return Err(Error::Domain("rates must be non-negative".into()));
    }
    distortion_from_total(rates.iter().sum(), params)
}

pub fn psnr(d_t: f64) -> Result<f64> {
    if !(d_t > 0.0) || !d_t.is_finite() {
        return Err(Error::Domain(format!(
            "distortion must be positive, got {d_t}"
        )));
    }
    Ok(10.0 * (255.0f64.powi(2) / d_t).log10())
}

/// Path through the view grid within one light-field frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewScan {
    /// Row-major, alternating direction on every row.
    #[default]
    Serpentine,
    /// Row-major, every row left to right.
    Raster,
}

/// `(frame, h, v)` coding order. Even frames run from the top-left view,
/// odd frames traverse the same path backwards.
pub fn lf_transpose_order(
    h_views: usize,
    v_views: usize,
    num_frames: usize,
    scan: ViewScan,
) -> Vec<(usize, usize, usize)> {
    let mut grid = Vec::with_capacity(h_views * v_views);
    for h in 0..h_views {
        let reverse = scan == ViewScan::Serpentine && h % 2 == 1;
        for i in 0..v_views {
            grid.push((h, if reverse { v_views - 1 - i } else { i }));
        }
    }
    let mut out = Vec::with_capacity(grid.len() * num_frames);
    for f in 0..num_frames {
        if f % 2 == 0 {
            out.extend(grid.iter().map(|(h, v)| (f, *h, *v)));
        } else {
            out.extend(grid.iter().rev().map(|(h, v)| (f, *h, *v)));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdFit {
    pub a: f64,
    pub b: f64,
    pub z: f64,
    pub rss: f64,
}

/// For fixed `z` the model is linear in `(a, b)`; solve that exactly.
fn fit_linear(points: &[(f64, f64)], z: f64) -> Option<RdFit> {
    let n = points.len() as f64;
    let (mut su, mut sd, mut suu, mut sud) = (0.0, 0.0, 0.0, 0.0);
    for (r, d) in points {
        let u = 1.0 / (r + z);
        su += u;
        sd += d;
        suu += u * u;
        sud += u * d;
    }
    let det = n * suu - su * su;
    if !(det.abs() > 1e-300) {
        return None;
    }
    let b = (n * sud - su * sd) / det;
    let a = (sd - b * su) / n;
    let rss = points
        .iter()
        .map(|(r, d)| (d - (b / (r + z) + a)).powi(2))
        .sum();
    Some(RdFit { a, b, z, rss })
}

/// Least-squares fit of `D = b / (R + z) + a` to `(rate, mse)` samples.
///
/// `z` is searched on a logarithmic grid and refined by golden-section
/// search; `(a, b)` follow in closed form.
pub fn fit_rd(points: &[(f64, f64)]) -> Result<RdFit> {
    if points.len() < 3 {
        return Err(Error::config("need at least 3 (rate, mse) points"));
    }
    if points.iter().any(|(r, d)| !(*r >= 0.0) || !d.is_finite()) {
        return Err(Error::config("rates must be non-negative and MSE finite"));
    }
    let scale = points.iter().map(|p| p.0).fold(0.0, f64::max).max(1.0);
    let positive_min = points.iter().map(|p| p.0).any(|r| r == 0.0);
    let lo = scale * 1e-6;
    let candidates = (0..=360).map(|i| lo * 10f64.powf(i as f64 / 40.0));
    let start = if positive_min {
        None
    } else {
        fit_linear(points, 0.0)
    };
    let mut best = start;
    let mut best_i = None;
    let grid: Vec<f64> = candidates.collect();
    for (i, z) in grid.iter().enumerate() {
        if let Some(f) = fit_linear(points, *z) {
            if best.as_ref().is_none_or(|b| f.rss < b.rss) {
                best = Some(f);
                best_i = Some(i);
            }
        }
    }
    if let Some(i) = best_i {
        let (mut a, mut b) = (
            grid[i.saturating_sub(1)].ln(),
            grid[(i + 1).min(grid.len() - 1)].ln(),
        );
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let eval = |lz: f64| fit_linear(points, lz.exp()).map_or(f64::INFINITY, |f| f.rss);
        for _ in 0..100 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if eval(c) < eval(d) {
                b = d;
            } else {
                a = c;
            }
        }
        if let Some(f) = fit_linear(points, ((a + b) / 2.0).exp()) {
            if best.as_ref().is_none_or(|bst| f.rss <= bst.rss) {
                best = Some(f);
            }
        }
    }
    best.ok_or_else(|| Error::config("rate-distortion fit is degenerate"))
}

#[derive(Deserialize)]
struct RdRow {
    rate_bps: f64,
    mse: f64,
}

/// Reads `(rate_bps, mse)` rows from a CSV file with a header.
pub fn read_rd_points(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Parse {
        what: path.display().to_string(),
        reason: e.to_string(),
    })?;
    reader
        .deserialize::<RdRow>()
        .map(|row| {
            row.map(|r| (r.rate_bps, r.mse)).map_err(|e| Error::Parse {
                what: path.display().to_string(),
                reason: e.to_string(),
            })
        })
        .collect()
}
