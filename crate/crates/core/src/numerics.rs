//! Complex vector/matrix primitives shared by the simulator.
//!
//! Two DFT conventions appear in this crate and they are never mixed:
//!
//! * [`dft`]/[`idft`] are **unitary** (`1/sqrt(N)` in both directions). OFDM
//!   modulation, the `F` matrix of the detector and all time/frequency
//!   conversions of signals use this pair.
//! * Phase-noise spectral coefficients use the `1/N` forward convention; see
//!   [`crate::phase_noise::spectral_coeffs`]. They are obtained from the
//!   unitary transform by an extra `1/sqrt(N)` factor at that call site.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

/// A system is reported singular when the condition estimate of the
/// normal-equation matrix exceeds this.
pub const SINGULAR_CONDITION: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Direction {
    Forward,
    Inverse,
}

type PlanCache = (
    FftPlanner<f64>,
    HashMap<(usize, Direction), Arc<dyn Fft<f64>>>,
);

thread_local! {
    static PLANS: RefCell<PlanCache> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plan(n: usize, dir: Direction) -> Arc<dyn Fft<f64>> {
    PLANS.with(|cell| {
        let mut guard = cell.borrow_mut();
        let (planner, cache) = &mut *guard;
        cache
            .entry((n, dir))
            .or_insert_with(|| match dir {
                Direction::Forward => planner.plan_fft_forward(n),
                Direction::Inverse => planner.plan_fft_inverse(n),
            })
            .clone()
    })
}

fn unitary_in_place(buf: &mut [C64], dir: Direction) {
    let n = buf.len();
    if n == 0 {
        return;
    }
    plan(n, dir).process(buf);
    let scale = 1.0 / (n as f64).sqrt();
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// In-place unitary forward DFT. Length is taken from the slice.
pub fn dft_in_place(buf: &mut [C64]) {
    unitary_in_place(buf, Direction::Forward);
}

/// In-place unitary inverse DFT. Length is taken from the slice.
pub fn idft_in_place(buf: &mut [C64]) {
    unitary_in_place(buf, Direction::Inverse);
}

/// Unitary DFT: `X(k) = 1/sqrt(N) * sum_n x(n) e^{-j 2 pi k n / N}`.
pub fn dft(x: &[C64], n: usize) -> Result<Vec<C64>> {
    check_transform_len(x, n, "dft")?;
    let mut out = x.to_vec();
    dft_in_place(&mut out);
    Ok(out)
}

/// Unitary inverse DFT: `x(n) = 1/sqrt(N) * sum_k X(k) e^{+j 2 pi k n / N}`.
pub fn idft(x: &[C64], n: usize) -> Result<Vec<C64>> {
    check_transform_len(x, n, "idft")?;
    let mut out = x.to_vec();
    idft_in_place(&mut out);
    Ok(out)
}

fn check_transform_len(x: &[C64], n: usize, context: &'static str) -> Result<()> {
    if n == 0 {
        return Err(Error::dim(context, 1, 0));
    }
    if x.len() != n {
        return Err(Error::dim(context, n, x.len()));
    }
    Ok(())
}

/// Circular convolution `c(n) = sum_l a(l) b((n - l) mod N)`.
///
/// `b` is zero-padded to `len(a)` when shorter (a channel impulse response
/// with `L < N` taps, typically). Computed in the frequency domain; with the
/// unitary transforms the identity is `dft(c) = sqrt(N) * dft(a) .* dft(b)`.
pub fn circular_convolve(a: &[C64], b: &[C64]) -> Result<Vec<C64>> {
    let n = a.len();
    if n == 0 || b.is_empty() {
        return Err(Error::dim("circular_convolve", 1, 0));
    }
    if b.len() > n {
        return Err(Error::dim("circular_convolve", n, b.len()));
    }
    let mut fa = a.to_vec();
    let mut fb = vec![C64::new(0.0, 0.0); n];
    fb[..b.len()].copy_from_slice(b);
    dft_in_place(&mut fa);
    dft_in_place(&mut fb);
    let scale = (n as f64).sqrt();
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y * scale;
    }
    idft_in_place(&mut fa);
    Ok(fa)
}

pub(crate) fn ensure_finite(values: &[C64], context: &'static str) -> Result<()> {
    if values.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { context })
    }
}

/// Solves `min_x ||y - A x||^2 + lambda ||x||^2`, i.e. `(A^H A + lambda I)^{-1} A^H y`.
///
/// Uses a QR factorization of the stacked matrix `[A; sqrt(lambda) I]` so the
/// normal equations are never formed. The condition estimate reported on
/// failure is the squared diagonal ratio of `R`, which tracks the condition of
/// `A^H A + lambda I`.
pub fn regularized_solve(a: &CMat, y: &[C64], lambda: f64) -> Result<Vec<C64>> {
    let (rows, cols) = a.shape();
    if cols == 0 {
        return Err(Error::dim("regularized_solve", 1, 0));
    }
    if rows != y.len() {
        return Err(Error::dim("regularized_solve", rows, y.len()));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::config(format!(
            "regularization must be >= 0, got {lambda}"
        )));
    }
    ensure_finite(a.as_slice(), "regularized_solve matrix")?;
    ensure_finite(y, "regularized_solve rhs")?;

    let aug_rows = if lambda > 0.0 { rows + cols } else { rows };
    if aug_rows < cols {
        return Err(Error::Singular {
            context: "regularized_solve",
            condition: f64::INFINITY,
        });
    }
    let mut aug = CMat::zeros(aug_rows, cols);
    aug.view_mut((0, 0), (rows, cols)).copy_from(a);
    let mut rhs = DVector::<C64>::zeros(aug_rows);
    rhs.rows_mut(0, rows).copy_from_slice(y);
    if lambda > 0.0 {
        let s = lambda.sqrt();
        for i in 0..cols {
            aug[(rows + i, i)] = C64::new(s, 0.0);
        }
    }

    let qr = aug.qr();
    let r = qr.r();
    let condition = diagonal_condition(r.diagonal().iter().map(|d| d.norm()))?;
    if condition > SINGULAR_CONDITION {
        return Err(Error::Singular {
            context: "regularized_solve",
            condition,
        });
    }
    let qty = qr.q().adjoint() * rhs;
    let x = r.solve_upper_triangular(&qty).ok_or(Error::Singular {
        context: "regularized_solve",
        condition: f64::INFINITY,
    })?;
    Ok(x.iter().copied().collect())
}

/// `(max d / min d)^2` over the given nonnegative diagonal magnitudes.
fn diagonal_condition(diag: impl Iterator<Item = f64>) -> Result<f64> {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for d in diag {
        if !d.is_finite() {
            return Err(Error::NonFinite {
                context: "factorization diagonal",
            });
        }
        lo = lo.min(d);
        hi = hi.max(d);
    }
    if lo <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((hi / lo).powi(2))
}

/// Cholesky factorization of a Hermitian positive (semi)definite Gram matrix
/// plus a ridge term, `G + lambda I`.
///
/// This is the fast path used by the iterative detector, which forms the
/// Gram matrix `Psi^H Psi` directly from the structure of the system.
pub struct RidgeCholesky {
    chol: nalgebra::linalg::Cholesky<C64, nalgebra::Dyn>,
    n: usize,
}

impl RidgeCholesky {
    pub fn factor(mut gram: CMat, lambda: f64, context: &'static str) -> Result<Self> {
        let n = gram.nrows();
        if gram.ncols() != n || n == 0 {
            return Err(Error::dim(context, n.max(1), gram.ncols()));
        }
        ensure_finite(gram.as_slice(), context)?;
        for i in 0..n {
            gram[(i, i)] += lambda;
        }
        let chol = nalgebra::linalg::Cholesky::new(gram).ok_or(Error::Singular {
            context,
            condition: f64::INFINITY,
        })?;
        let condition = diagonal_condition(chol.l_dirty().diagonal().iter().map(|d| d.re.abs()))?;
        if condition > SINGULAR_CONDITION {
            return Err(Error::Singular { context, condition });
        }
        Ok(RidgeCholesky { chol, n })
    }

    pub fn solve(&self, rhs: &[C64]) -> Vec<C64> {
        debug_assert_eq!(rhs.len(), self.n);
        let b = DVector::from_column_slice(rhs);
        self.chol.solve(&b).iter().copied().collect()
    }

    /// Diagonal of `(G + lambda I)^{-1}`.
    ///
    /// With `A = L L^H`, `[A^{-1}]_ii = ||L^{-1} e_i||^2`, and `L^{-1} e_i` is
    /// zero above row `i`, so one forward substitution per column suffices.
    pub fn inverse_diagonal(&self) -> Vec<f64> {
        let n = self.n;
        // Row-major copy of the lower triangle keeps the inner loop contiguous.
        let l = self.chol.l_dirty().transpose();
        let l = l.as_slice();
        let mut z = vec![C64::new(0.0, 0.0); n];
        (0..n)
            .map(|i| {
                let mut acc = 0.0;
                for r in i..n {
                    let mut s = if r == i {
                        C64::new(1.0, 0.0)
                    } else {
                        C64::new(0.0, 0.0)
                    };
                    let row = &l[r * n..r * n + r];
                    for (lc, zc) in row[i..].iter().zip(&z[i..r]) {
                        s -= lc * zc;
                    }
                    z[r] = s / l[r * n + r];
                    acc += z[r].norm_sqr();
                }
                acc
            })
            .collect()
    }
}

/// Dense unitary DFT matrix `[F]_{l,p} = N^{-1/2} e^{-j 2 pi p l / N}`.
pub fn dft_matrix(n: usize) -> CMat {
    let scale = 1.0 / (n as f64).sqrt();
    CMat::from_fn(n, n, |l, p| {
        C64::from_polar(
            scale,
            -2.0 * std::f64::consts::PI * ((p * l) % n) as f64 / n as f64,
        )
    })
}

pub fn norm_sqr(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}

pub fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}
