//! Analytical hot fraction of Zipf-distributed popularity.
//!
//! `H(n, a) = sum_{i=1..n} i^-a` is summed exactly (compensated) up to
//! [`EXACT_LIMIT`] terms. Beyond that, the first [`EM_HEAD`] terms are summed
//! exactly and the tail comes from Euler-Maclaurin through the B4 term; with a
//! head of 10^6 the truncation error is far below 1e-12 relative for a >= 0.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const EXACT_LIMIT: u64 = 100_000_000;
pub const EM_HEAD: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZipfError {
    #[error("alpha must be finite and >= 0, got {0}")]
    BadAlpha(f64),
    #[error("n_items must be at least 1")]
    NoItems,
    #[error("coverage must be in (0, 1), got {0}")]
    BadCoverage(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HotFractionQuery {
    pub alpha: f64,
    pub n_items: u64,
    pub coverage: f64,
}

impl HotFractionQuery {
    pub fn validate(&self) -> Result<(), ZipfError> {
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(ZipfError::BadAlpha(self.alpha));
        }
        if self.n_items == 0 {
            return Err(ZipfError::NoItems);
        }
        if !(self.coverage > 0.0 && self.coverage < 1.0) {
            return Err(ZipfError::BadCoverage(self.coverage));
        }
        Ok(())
    }
}

/// Neumaier-compensated running sum.
#[derive(Default, Clone, Copy)]
struct Compensated {
    sum: f64,
    c: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if libm::fabs(self.sum) >= libm::fabs(x) {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.c
    }
}

fn term(i: u64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        1.0
    } else {
        libm::pow(i as f64, -alpha)
    }
}

/// Exact compensated sum of the first `n` terms.
pub fn harmonic_exact(n: u64, alpha: f64) -> f64 {
    let mut acc = Compensated::default();
    for i in 1..=n {
        acc.add(term(i, alpha));
    }
    acc.value()
}

/// Euler-Maclaurin estimate of `H(n)` given the exact head `H(m)`, `m <= n`.
pub fn harmonic_euler_maclaurin(n: u64, alpha: f64, m: u64, head: f64) -> f64 {
    if n <= m {
        return harmonic_exact(n, alpha);
    }
    let (nf, mf) = (n as f64, m as f64);
    let f = |x: f64| libm::pow(x, -alpha);
    let integral = if libm::fabs(alpha - 1.0) < 1e-12 {
        libm::log(nf / mf)
    } else {
        (libm::pow(nf, 1.0 - alpha) - libm::pow(mf, 1.0 - alpha)) / (1.0 - alpha)
    };
    // f'(x) = -a x^(-a-1); f'''(x) = -a(a+1)(a+2) x^(-a-3)
    let d1 = |x: f64| -alpha * libm::pow(x, -alpha - 1.0);
    let d3 = |x: f64| -alpha * (alpha + 1.0) * (alpha + 2.0) * libm::pow(x, -alpha - 3.0);
    head + integral + 0.5 * (f(nf) - f(mf)) + (d1(nf) - d1(mf)) / 12.0 - (d3(nf) - d3(mf)) / 720.0
}

/// `H(n, alpha)`: exact up to [`EXACT_LIMIT`], Euler-Maclaurin above.
pub fn generalized_harmonic(n: u64, alpha: f64) -> f64 {
    if n <= EXACT_LIMIT {
        harmonic_exact(n, alpha)
    } else {
        harmonic_euler_maclaurin(n, alpha, EM_HEAD, harmonic_exact(EM_HEAD, alpha))
    }
}

/// Smallest `k` with `H(k) / H(n) >= coverage`.
pub fn hot_set_size(q: &HotFractionQuery) -> Result<u64, ZipfError> {
    q.validate()?;
    let (n, a, cov) = (q.n_items, q.alpha, q.coverage);

    if n <= EXACT_LIMIT {
        // The running prefix sums are exactly H(k) as computed by
        // `harmonic_exact`, so the first crossing is the binary-search answer.
        let total = harmonic_exact(n, a);
        let mut acc = Compensated::default();
        for k in 1..=n {
            acc.add(term(k, a));
            if acc.value() / total >= cov {
                return Ok(k);
            }
        }
        return Ok(n);
    }

    let head = harmonic_exact(EM_HEAD, a);
    let h = |k: u64| {
        if k <= EM_HEAD {
            harmonic_exact(k, a)
        } else {
            harmonic_euler_maclaurin(k, a, EM_HEAD, head)
        }
    };
    let total = h(n);
    let (mut lo, mut hi) = (1u64, n);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if h(mid) / total >= cov {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}

/// Fraction of items that absorbs `coverage` of the accesses.
pub fn hot_fraction(q: &HotFractionQuery) -> Result<f64, ZipfError> {
    Ok(hot_set_size(q)? as f64 / q.n_items as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(alpha: f64, n: u64, coverage: f64) -> HotFractionQuery {
        HotFractionQuery { alpha, n_items: n, coverage }
    }

    #[test]
    fn small_sums() {
        assert_eq!(generalized_harmonic(1, 0.9), 1.0);
        assert_eq!(generalized_harmonic(1, 0.0), 1.0);
        assert!((generalized_harmonic(3, 1.0) - 11.0 / 6.0).abs() < 1e-15);
        assert_eq!(generalized_harmonic(10, 0.0), 10.0);
    }

    #[test]
    fn euler_maclaurin_matches_exact() {
        for &alpha in &[0.0, 0.6, 0.9, 1.0, 1.01, 1.5] {
            let head = harmonic_exact(1000, alpha);
            let exact = harmonic_exact(2_000_000, alpha);
            let em = harmonic_euler_maclaurin(2_000_000, alpha, 1000, head);
            assert!(((em - exact) / exact).abs() < 1e-12, "alpha {alpha}: {em} vs {exact}");
        }
    }

    #[test]
    fn uniform_hot_fraction() {
        assert_eq!(hot_fraction(&q(0.0, 1000, 0.7)).unwrap(), 0.7);
        assert_eq!(hot_fraction(&q(0.0, 10, 0.75)).unwrap(), 0.8);
    }

    #[test]
    fn bracket_invariant() {
        for &(alpha, n, cov) in &[(0.9, 10_000u64, 0.7), (0.6, 5_000, 0.5), (1.2, 777, 0.95)] {
            let k = hot_set_size(&q(alpha, n, cov)).unwrap();
            let total = harmonic_exact(n, alpha);
            assert!(harmonic_exact(k, alpha) / total >= cov);
            assert!(harmonic_exact(k - 1, alpha) / total < cov);
        }
    }

    #[test]
    fn monotone_in_alpha_and_n() {
        let f = |a, n| hot_fraction(&q(a, n, 0.7)).unwrap();
        assert!(f(0.6, 100_000) >= f(0.9, 100_000));
        assert!(f(0.9, 100_000) >= f(1.01, 100_000));
        assert!(f(0.9, 10_000) >= f(0.9, 1_000_000));
    }

    #[test]
    fn invalid_queries() {
        assert_eq!(hot_fraction(&q(-1.0, 10, 0.7)), Err(ZipfError::BadAlpha(-1.0)));
        assert_eq!(hot_fraction(&q(1.0, 0, 0.7)), Err(ZipfError::NoItems));
        assert_eq!(hot_fraction(&q(1.0, 10, 1.0)), Err(ZipfError::BadCoverage(1.0)));
    }
}
