use serde::Serialize;
use statrs::function::erf::erfc;

use super::TextlabError;
use crate::eval::midranks;

/// Combined sample size at or below which the null distribution is enumerated.
pub const EXACT_MAX_N: usize = 16;
/// Largest combined size accepted when exact enumeration is forced.
pub const EXACT_LIMIT: usize = 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum UMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UTest {
    /// Pairs (a, b) with a > b, ties counted half.
    pub u_a: f64,
    pub u_b: f64,
    pub p_value: f64,
    pub method: UMethod,
}

/// Two-sided Mann-Whitney U test. Exact when `n_a + n_b <= 16`, otherwise
/// normal approximation with tie correction and continuity correction.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<UTest, TextlabError> {
    let method = if a.len() + b.len() <= EXACT_MAX_N {
        UMethod::Exact
    } else {
        UMethod::Normal
    };
    mann_whitney_u_with(a, b, method)
}

pub fn mann_whitney_u_with(a: &[f64], b: &[f64], method: UMethod) -> Result<UTest, TextlabError> {
    if a.is_empty() || b.is_empty() {
        return Err(TextlabError::EmptySample);
    }
    if let Some(&x) = a.iter().chain(b).find(|x| !x.is_finite()) {
        return Err(TextlabError::NonFinite(x));
    }
    if method == UMethod::Exact && a.len() + b.len() > EXACT_LIMIT {
        return Err(TextlabError::ExactTooLarge(a.len() + b.len()));
    }
    let (na, nb) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let rank_sum_a: f64 = ranks[..na].iter().sum();
    let u_a = rank_sum_a - (na * (na + 1)) as f64 / 2.0;
    let u_b = (na * nb) as f64 - u_a;

    let p_value = match method {
        UMethod::Exact => exact_p(&ranks, na),
        UMethod::Normal => normal_p(&pooled, u_a, na, nb),
    };
    Ok(UTest {
        u_a,
        u_b,
        p_value,
        method,
    })
}

/// Enumerates every assignment of `na` of the pooled midranks to sample A.
/// Midranks are multiples of 1/2, so doubled rank sums compare exactly.
fn exact_p(ranks: &[f64], na: usize) -> f64 {
    let n = ranks.len();
    let doubled: Vec<i64> = ranks.iter().map(|r| (2.0 * r).round() as i64).collect();
    let observed: i64 = doubled[..na].iter().sum();
    let (mut le, mut ge, mut total) = (0u64, 0u64, 0u64);
    // Gosper's hack over n-bit masks with na bits set.
    let mut mask: u64 = (1u64 << na) - 1;
    let limit: u64 = 1u64 << n;
    while mask < limit {
        let mut s = 0i64;
        let mut m = mask;
        while m != 0 {
            s += doubled[m.trailing_zeros() as usize];
            m &= m - 1;
        }
        total += 1;
        le += (s <= observed) as u64;
        ge += (s >= observed) as u64;
        let c = mask & mask.wrapping_neg();
        let r = mask + c;
        mask = (((r ^ mask) >> 2) / c) | r;
    }
    let tail = le.min(ge) as f64 / total as f64;
    (2.0 * tail).min(1.0)
}

fn normal_p(pooled: &[f64], u_a: f64, na: usize, nb: usize) -> f64 {
    let n = (na + nb) as f64;
    let mut sorted = pooled.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let j = i + sorted[i..].iter().take_while(|&&x| x == sorted[i]).count();
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let (fa, fb) = (na as f64, nb as f64);
    let variance = fa * fb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if !(variance > 0.0) {
        return 1.0;
    }
    let mean = fa * fb / 2.0;
    let z = ((u_a - mean).abs() - 0.5).max(0.0) / variance.sqrt();
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn separated_triples() {
        let t = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(t.u_a, 0.0);
        assert_eq!(t.u_b, 9.0);
        assert_eq!(t.method, UMethod::Exact);
        assert!((t.p_value - 0.1).abs() < 1e-15);
    }

    #[test]
    fn identical_samples() {
        let a = [0.2, 0.5, 0.5, 0.9];
        let t = mann_whitney_u(&a, &a).unwrap();
        assert_eq!(t.u_a, 8.0);
        assert_eq!(t.p_value, 1.0);
        let big: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let t = mann_whitney_u(&big, &big).unwrap();
        assert_eq!(t.method, UMethod::Normal);
        assert_eq!(t.u_a, 800.0);
        assert!(t.p_value > 0.99);
    }

    #[test]
    fn constant_equal_samples() {
        for method in [UMethod::Exact, UMethod::Normal] {
            let t = mann_whitney_u_with(&[3.0; 5], &[3.0; 7], method).unwrap();
            assert_eq!(t.p_value, 1.0);
            assert_eq!(t.u_a, 17.5);
        }
    }

    #[test]
    fn u_statistics_sum_to_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let a: Vec<f64> = (0..rng.random_range(1..30)).map(|_| rng.random()).collect();
            let b: Vec<f64> = (0..rng.random_range(1..30)).map(|_| rng.random()).collect();
            let ab = mann_whitney_u(&a, &b).unwrap();
            let ba = mann_whitney_u(&b, &a).unwrap();
            assert!((ab.u_a + ba.u_a - (a.len() * b.len()) as f64).abs() < 1e-9);
            assert_eq!(ab.u_b, ba.u_a);
            assert!((ab.p_value - ba.p_value).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_sample_is_an_error() {
        assert!(mann_whitney_u(&[], &[1.0]).is_err());
        assert!(mann_whitney_u_with(&[1.0; 40], &[1.0; 40], UMethod::Exact).is_err());
    }

    #[test]
    fn large_shift_is_significant() {
        let a: Vec<f64> = (0..200).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..200).map(|i| i as f64 + 60.0).collect();
        let t = mann_whitney_u(&a, &b).unwrap();
        assert!(t.p_value < 1e-6);
    }
}
