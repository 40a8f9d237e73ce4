//! Exact (Clopper-Pearson) binomial intervals by bisection on the binomial CDF.

use crate::error::{Error, Result};

const MODULE: &str = "experiments";
const BISECTION_STEPS: usize = 200;
const TERM_CUTOFF: f64 = 1e-18;

fn ln_choose(n: u64, k: u64) -> f64 {
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0)
}

fn ln_pmf(k: u64, n: u64, p: f64) -> f64 {
    ln_choose(n, k) + k as f64 * p.ln() + (n - k) as f64 * (-p).ln_1p()
}

/// `P(X <= k)` for `X ~ Bin(n, p)`.
///
/// Sums pmf terms outward from `k` in whichever direction they decrease, so
/// the cost is a few standard deviations of terms rather than `k`.
pub fn binomial_cdf(k: u64, n: u64, p: f64) -> f64 {
    if k >= n || p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    let mode = ((n + 1) as f64 * p).floor() as u64;
    let odds = p / (1.0 - p);
    if k < mode {
        // lower tail: terms decrease as j goes down from k
        let mut term = ln_pmf(k, n, p).exp();
        let mut sum = term;
        let mut j = k;
        while j > 0 && term > TERM_CUTOFF * sum {
            term *= j as f64 / ((n - j + 1) as f64 * odds);
            sum += term;
            j -= 1;
        }
        sum.min(1.0)
    } else {
        // upper tail from k + 1: terms decrease as j goes up
        let mut j = k + 1;
        let mut term = ln_pmf(j, n, p).exp();
        let mut sum = term;
        while j < n && term > TERM_CUTOFF * sum {
            term *= (n - j) as f64 / (j + 1) as f64 * odds;
            sum += term;
            j += 1;
        }
        (1.0 - sum).max(0.0)
    }
}

/// `P(X >= k)`, computed as a lower tail of `Bin(n, 1 − p)` for accuracy.
pub fn binomial_sf(k: u64, n: u64, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    binomial_cdf(n - k, n, 1.0 - p)
}

/// Two-sided exact interval for a proportion `k / n` at `confidence`.
///
/// `low` solves `P(X >= k; low) = α/2`, `high` solves `P(X <= k; high) = α/2`,
/// with `α = 1 − confidence`.
pub fn clopper_pearson(k: u64, n: u64, confidence: f64) -> Result<(f64, f64)> {
    if n == 0 || k > n {
        return Err(Error::invalid(MODULE, format!("invalid binomial count {k} of {n}")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::invalid(MODULE, format!("confidence {confidence} not in (0, 1)")));
    }
    let half_alpha = 0.5 * (1.0 - confidence);
    let low = if k == 0 {
        0.0
    } else {
        // sf increases in p
        bisect(|p| binomial_sf(k, n, p) < half_alpha)
    };
    let high = if k == n {
        1.0
    } else {
        // cdf decreases in p
        bisect(|p| binomial_cdf(k, n, p) > half_alpha)
    };
    Ok((low, high))
}

/// Boundary of a predicate that holds on `[0, x*)` and fails on `(x*, 1]`.
fn bisect(below: impl Fn(f64) -> bool) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct_cdf(k: u64, n: u64, p: f64) -> f64 {
        (0..=k).map(|j| ln_pmf(j, n, p).exp()).sum()
    }

    #[test]
    fn cdf_matches_direct_sum() {
        for (n, p) in [(10u64, 0.3), (50, 0.02), (200, 0.5), (1000, 0.9)] {
            for k in 0..n {
                let a = binomial_cdf(k, n, p);
                let b = direct_cdf(k, n, p);
                assert!((a - b).abs() < 1e-12, "n={n} k={k} p={p}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn interval_inversion_residuals() {
        let conf = 0.95;
        let half = 0.5 * (1.0 - conf);
        for (k, n) in [(0u64, 100u64), (3, 100), (50, 100), (99, 100), (500_000, 1_000_000), (37, 1_000_000)] {
            let (lo, hi) = clopper_pearson(k, n, conf).unwrap();
            assert!(lo <= k as f64 / n as f64 && k as f64 / n as f64 <= hi);
            if k < n {
                assert!((binomial_cdf(k, n, hi) - half).abs() < 1e-9);
            }
            if k > 0 {
                assert!((binomial_sf(k, n, lo) - half).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn textbook_interval() {
        // 7 of 20 at 95%: (0.1539092, 0.5921885)
        let (lo, hi) = clopper_pearson(7, 20, 0.95).unwrap();
        assert!((lo - 0.153_909_2).abs() < 1e-6);
        assert!((hi - 0.592_188_5).abs() < 1e-6);
        let (lo, hi) = clopper_pearson(0, 20, 0.95).unwrap();
        assert_eq!(lo, 0.0);
        assert!((hi - (1.0 - 0.025f64.powf(1.0 / 20.0))).abs() < 1e-10);
    }

    #[test]
    fn invalid_inputs() {
        assert!(clopper_pearson(5, 4, 0.9).is_err());
        assert!(clopper_pearson(1, 4, 1.0).is_err());
        assert!(clopper_pearson(0, 0, 0.9).is_err());
    }
}
