//! False-negative probability calculus for mid-near hard-negative sampling.
//!
//! A sampled mid-near point is a false negative when it lands inside the
//! anchor's k = 10 nearest neighbors; with 6 draws this happens exactly when
//! at least two draws come from the 10-NN. Two exact routes (closed-form
//! rational product and hypergeometric tail) are kept side by side, plus a
//! Monte Carlo estimator and the uniform-sampling baseline 10/n.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Neighbors regarded as positives.
pub const K_NEIGHBORS: u64 = 10;
/// Mid-near sample size.
pub const DRAWS: u64 = 6;
/// Smallest pool size the formulas are defined for.
pub const MIN_N: u64 = K_NEIGHBORS + DRAWS;

fn big(v: i64) -> BigInt {
    BigInt::from(v)
}

fn binom(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let mut acc = BigInt::one();
    for j in 0..k.min(n - k) {
        acc = acc * big((n - j) as i64) / big((j + 1) as i64);
    }
    acc
}

/// Closed-form false-negative probability
/// `1 - (n+45)(n-10)(n-11)(n-12)(n-13)(n-14) / (n(n-1)(n-2)(n-3)(n-4)(n-5))`
/// as an exact rational.
pub fn fn_prob_mn_closed_rational(n: u64) -> Result<BigRational> {
    if n < MIN_N {
        return Err(Error::InvalidArgument(format!("n = {n} < {MIN_N}")));
    }
    let n = n as i64;
    let num = big(n + 45) * big(n - 10) * big(n - 11) * big(n - 12) * big(n - 13) * big(n - 14);
    let den = big(n) * big(n - 1) * big(n - 2) * big(n - 3) * big(n - 4) * big(n - 5);
    Ok(BigRational::one() - BigRational::new(num, den))
}

pub fn fn_prob_mn_closed(n: u64) -> Result<f64> {
    Ok(fn_prob_mn_closed_rational(n)?.to_f64().unwrap())
}

/// Hypergeometric tail P(at least 2 of the 6 draws fall in the 10-NN):
/// `1 - [C(n-10,6) + 10 C(n-10,5)] / C(n,6)`, exact.
pub fn fn_prob_mn_hypergeom_rational(n: u64) -> Result<BigRational> {
    if n < MIN_N {
        return Err(Error::InvalidArgument(format!("n = {n} < {MIN_N}")));
    }
    let none = binom(n - K_NEIGHBORS, DRAWS);
    let one = big(K_NEIGHBORS as i64) * binom(n - K_NEIGHBORS, DRAWS - 1);
    let total = binom(n, DRAWS);
    Ok(BigRational::one() - BigRational::new(none + one, total))
}

pub fn fn_prob_mn_hypergeom(n: u64) -> Result<f64> {
    Ok(fn_prob_mn_hypergeom_rational(n)?.to_f64().unwrap())
}

/// Uniform-sampling baseline: always 10/n.
pub fn fn_prob_uniform(n: u64) -> Result<f64> {
    if n <= K_NEIGHBORS {
        return Err(Error::InvalidArgument(format!("n = {n} <= {K_NEIGHBORS}")));
    }
    Ok(K_NEIGHBORS as f64 / n as f64)
}

pub fn fn_prob_uniform_rational(n: u64) -> Result<BigRational> {
    if n <= K_NEIGHBORS {
        return Err(Error::InvalidArgument(format!("n = {n} <= {K_NEIGHBORS}")));
    }
    Ok(BigRational::new(big(K_NEIGHBORS as i64), big(n as i64)))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MonteCarloEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub trials: u64,
}

/// Simulates the sampling model directly: indices 0..n with 0..9 as the
/// NN set, 6 draws without replacement, false negative iff >= 2 NN drawn.
pub fn monte_carlo_fn(n: u64, trials: u64, seed: u64) -> Result<MonteCarloEstimate> {
    if n < MIN_N {
        return Err(Error::InvalidArgument(format!("n = {n} < {MIN_N}")));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut false_negatives = 0u64;
    let mut picks = [0u64; DRAWS as usize];
    for _ in 0..trials {
        let mut count = 0usize;
        while count < DRAWS as usize {
            let j = rng.gen_range(0..n);
            if !picks[..count].contains(&j) {
                picks[count] = j;
                count += 1;
            }
        }
        if picks.iter().filter(|&&j| j < K_NEIGHBORS).count() >= 2 {
            false_negatives += 1;
        }
    }
    let p = false_negatives as f64 / trials as f64;
    Ok(MonteCarloEstimate {
        estimate: p,
        stderr: (p * (1.0 - p) / trials as f64).sqrt(),
        trials,
    })
}

/// One row of the comparison table behind the crossover analysis.
#[derive(Debug, Clone, Serialize)]
pub struct FnRateRow {
    pub n: u64,
    pub p_mn: f64,
    pub p_uniform: f64,
    pub expected_mn: f64,
    pub expected_uniform: f64,
}

/// Expected false-negative counts per point at pool size n: `n_mn * p_mn(n)`
/// versus `n_fp * 10/n`.
pub fn fnrate_table(n_min: u64, n_max: u64, n_mn: u64, n_fp: u64, rows: usize) -> Result<Vec<FnRateRow>> {
    if n_min < MIN_N || n_min > n_max {
        return Err(Error::InvalidArgument(format!(
            "bad range [{n_min}, {n_max}]; need {MIN_N} <= n_min <= n_max"
        )));
    }
    let rows = rows.max(2);
    let log_min = (n_min as f64).ln();
    let log_max = (n_max as f64).ln();
    let mut ns: Vec<u64> = (0..rows)
        .map(|i| {
            let t = i as f64 / (rows - 1) as f64;
            (log_min + t * (log_max - log_min)).exp().round() as u64
        })
        .collect();
    ns.dedup();
    ns.iter()
        .map(|&n| {
            let p_mn = fn_prob_mn_closed(n)?;
            let p_uniform = fn_prob_uniform(n)?;
            Ok(FnRateRow {
                n,
                p_mn,
                p_uniform,
                expected_mn: n_mn as f64 * p_mn,
                expected_uniform: n_fp as f64 * p_uniform,
            })
        })
        .collect()
}

const CROSSOVER_LIMIT: u64 = 1_000_000_000;

/// Smallest n >= 16 where `n_mn * p_mn(n) < n_fp * 10/n`, found with exact
/// rational arithmetic. Returns None when no crossover exists below 1e9.
pub fn crossover_size(n_mn: u64, n_fp: u64) -> Result<Option<u64>> {
    if n_mn == 0 || n_fp == 0 {
        return Err(Error::InvalidArgument("counts must be >= 1".into()));
    }
    let below = |n: u64| -> Result<bool> {
        let lhs = BigRational::from(big(n_mn as i64)) * fn_prob_mn_closed_rational(n)?;
        let rhs = BigRational::from(big(n_fp as i64)) * fn_prob_uniform_rational(n)?;
        Ok(lhs < rhs)
    };
    // Exact scan over the small range, then doubling + bisection; the
    // expected-count ratio is monotone well before the scan cap.
    for n in MIN_N..=4096.min(CROSSOVER_LIMIT) {
        if below(n)? {
            return Ok(Some(n));
        }
    }
    let mut lo = 4096u64;
    let mut hi = lo;
    loop {
        hi = hi.saturating_mul(2);
        if hi > CROSSOVER_LIMIT {
            return Ok(None);
        }
        if below(hi)? {
            break;
        }
        lo = hi;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if below(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}
