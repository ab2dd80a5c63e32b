//! Operation counts of the iterative detector.
//!
//! `C_M = Nr [ Nt [ (Nt-1) N^2 (3N+1) + B_M t ] + I_M ]` with
//! `B_M = N + 5N + 2N + 2N + N^2 (N+1) + I_M + 2N^3` and
//! `I_M = N^2 Nt (N Nt (Nt+2) + 1)`; `C_A` has the same shape with the
//! addition counts below.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityCounts {
    pub mult: u128,
    pub add: u128,
}

struct Terms {
    cancel: f64,
    per_iter: f64,
    init: f64,
}

fn mult_terms(n: f64, nt: f64) -> Terms {
    let init = n * n * nt * (n * nt * (nt + 2.0) + 1.0);
    Terms {
        cancel: (nt - 1.0) * n * n * (3.0 * n + 1.0),
        per_iter: n + 5.0 * n + 2.0 * n + 2.0 * n + n * n * (n + 1.0) + init + 2.0 * n.powi(3),
        init,
    }
}

fn add_terms(n: f64, nt: f64) -> Terms {
    let init = n * nt * (n - 1.0) * (n * nt + 1.0) + n * n * nt * (n * nt * nt + n * nt - 1.0);
    Terms {
        cancel: (nt - 1.0) * n * (n - 1.0) * (2.0 * n + 1.0),
        per_iter: n + n + 2.0 * n + n + n * (n - 1.0) * (n + 1.0) + init + 2.0 * n * n * (n - 1.0),
        init,
    }
}

fn total(t: &Terms, nt: f64, nr: f64, iters: f64) -> f64 {
    nr * (nt * (t.cancel + t.per_iter * iters) + t.init)
}

fn check(n: u64, nt: u64, nr: u64) -> Result<()> {
    if n == 0 || nt == 0 || nr == 0 {
        return Err(Error::config("complexity arguments must be at least 1"));
    }
    Ok(())
}

/// Exact integer counts for an integer iteration count.
pub fn complexity_counts(n: u64, nt: u64, nr: u64, t: u64) -> Result<ComplexityCounts> {
    check(n, nt, nr)?;
    let (n, nt, nr, t) = (n as i128, nt as i128, nr as i128, t as i128);
    let im = n * n * nt * (n * nt * (nt + 2) + 1);
    let bm = n + 5 * n + 2 * n + 2 * n + n * n * (n + 1) + im + 2 * n * n * n;
    let mult = nr * (nt * ((nt - 1) * n * n * (3 * n + 1) + bm * t) + im);
    let ia = n * nt * (n - 1) * (n * nt + 1) + n * n * nt * (n * nt * nt + n * nt - 1);
    let ba = n + n + 2 * n + n + n * (n - 1) * (n + 1) + ia + 2 * n * n * (n - 1);
    let add = nr * (nt * ((nt - 1) * n * (n - 1) * (2 * n + 1) + ba * t) + ia);
    Ok(ComplexityCounts {
        mult: mult as u128,
        add: add as u128,
    })
}

/// Counts at a fractional (mean) iteration count.
pub fn complexity_at(n: u64, nt: u64, nr: u64, t: f64) -> Result<(f64, f64)> {
    check(n, nt, nr)?;
    if !(t >= 0.0) {
        return Err(Error::config("iteration count must be non-negative"));
    }
    let (nf, ntf, nrf) = (n as f64, nt as f64, nr as f64);
    Ok((
        total(&mult_terms(nf, ntf), ntf, nrf, t),
        total(&add_terms(nf, ntf), ntf, nrf, t),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_value() {
        assert_eq!(complexity_counts(64, 2, 2, 2).unwrap().mult, 51_516_416);
    }

    #[test]
    fn structural_cases() {
        // t = 0 leaves Nr [ Nt (Nt-1) cancel + init ]; with Nt = 1 only init.
        let c = complexity_counts(8, 1, 3, 0).unwrap();
        let init = 8u128 * 8 * (8 * 3 + 1);
        assert_eq!(c.mult, 3 * init);
        let with_t = complexity_counts(8, 1, 1, 1).unwrap();
        let per_iter = 8 * 10 + 64 * 9 + init + 2 * 512;
        assert_eq!(with_t.mult, per_iter + init);
    }

    #[test]
    fn fractional_agrees_at_integers() {
        for t in 0..5 {
            let exact = complexity_counts(64, 2, 2, t).unwrap();
            let (m, a) = complexity_at(64, 2, 2, t as f64).unwrap();
            assert_eq!(m as u128, exact.mult);
            assert_eq!(a as u128, exact.add);
        }
        assert!(complexity_counts(0, 1, 1, 1).is_err());
    }
}
