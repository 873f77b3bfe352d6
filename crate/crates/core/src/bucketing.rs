//! Partition of samples by reference probability into dyadic buckets.
//!
//! Bucket `j ≥ 1` holds elements with reference mass in `(2^-j, 2^-j+1]`;
//! bucket 0 is the leftover bucket for everything at or below `2^-ell`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::multiset::Multiset;
use crate::oracle::EvalOracle;

/// Cap on the empirically chosen bucket count.
pub const DEFAULT_ELL_MAX: usize = 1024;

/// Exact `2^k`, including subnormal results; zero below `2^-1074`.
pub(crate) fn pow2(k: i32) -> f64 {
    if k > 1023 {
        f64::INFINITY
    } else if k >= -1022 {
        f64::from_bits(((k + 1023) as u64) << 52)
    } else if k >= -1074 {
        f64::from_bits(1u64 << (k + 1074))
    } else {
        0.0
    }
}

/// Uncapped dyadic index of `p`, i.e. the unique `j` with `2^-j < p ≤ 2^-j+1`.
fn dyadic_index(p: f64) -> usize {
    debug_assert!(p > 0.0 && p <= 1.0);
    let mut j = (1.0 - p.log2().floor()).max(1.0) as i32;
    // log2 can be off by one ulp near powers of two; settle against exact powers
    while j > 1 && p > pow2(1 - j) {
        j -= 1;
    }
    while p <= pow2(-j) {
        j += 1;
    }
    j as usize
}

/// Bucket of a probability `p` given `ell` non-leftover buckets.
pub fn bucket_index(p: f64, ell: usize) -> Result<usize> {
    if p.is_nan() || p <= 0.0 {
        return Err(Error::NonpositiveProbability(p));
    }
    if p > 1.0 {
        return Err(Error::ProbabilityOutOfRange(p));
    }
    let j = dyadic_index(p);
    Ok(if j <= ell { j } else { 0 })
}

/// `⌊log₂(domain_size / (c1·eps2))⌋ + 1`.
pub fn theoretical_ell(domain_size: u64, c1: f64, eps2: f64) -> Result<usize> {
    if domain_size < 2 {
        return Err(Error::InvalidParameter(format!("domain size {domain_size} < 2")));
    }
    if !(c1 > 0.0) || !(eps2 > 0.0 && eps2 <= 1.0) {
        return Err(Error::InvalidParameter(format!("c1 = {c1}, eps2 = {eps2}")));
    }
    let x = domain_size as f64 / (c1 * eps2);
    if x <= 1.0 {
        return Err(Error::InvalidParameter("c1·eps2 must be below the domain size".into()));
    }
    let mut k = x.log2().floor() as i32;
    while pow2(k) > x {
        k -= 1;
    }
    while pow2(k + 1) <= x {
        k += 1;
    }
    Ok(k as usize + 1)
}

/// Outcome of the leftover-fraction bucket count search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EllChoice {
    pub ell: usize,
    /// The search hit `ell_max` before the leftover fraction dropped to `tau`.
    pub capped: bool,
}

/// Smallest `ell ≥ 1` with at most a `tau` fraction of `ref_probs` at or below `2^-ell`.
/// Zero probabilities are left out: no bucket count moves them out of the leftover.
pub fn empirical_ell(ref_probs: &[f64], tau: f64, ell_max: usize) -> Result<EllChoice> {
    let weighted: Vec<(f64, u64)> = ref_probs.iter().map(|&p| (p, 1)).collect();
    empirical_ell_weighted(&weighted, tau, ell_max)
}

/// [`empirical_ell`] over `(probability, multiplicity)` pairs.
pub fn empirical_ell_weighted(ref_probs: &[(f64, u64)], tau: f64, ell_max: usize) -> Result<EllChoice> {
    if let Some(&(p, _)) = ref_probs.iter().find(|(p, _)| p.is_nan() || *p < 0.0) {
        return Err(Error::NonpositiveProbability(p));
    }
    let ref_probs: Vec<(f64, u64)> = ref_probs.iter().copied().filter(|&(p, _)| p > 0.0).collect();
    let total: u64 = ref_probs.iter().map(|&(_, c)| c).sum();
    if total == 0 {
        return Err(Error::EmptyInput("empirical_ell needs positive reference probabilities"));
    }
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidParameter(format!("tau {tau} outside (0, 1]")));
    }
    if ell_max == 0 {
        return Err(Error::InvalidParameter("ell_max must be at least 1".into()));
    }
    let mut idx: Vec<(usize, u64)> = ref_probs
        .iter()
        .map(|&(p, c)| (dyadic_index(p.min(1.0)), c))
        .collect();
    idx.sort_unstable();
    let n = total as f64;
    // entries with index > ell sit at or below 2^-ell
    let mut leftover = total;
    let mut k = 0;
    for ell in 1..=ell_max {
        while k < idx.len() && idx[k].0 <= ell {
            leftover -= idx[k].1;
            k += 1;
        }
        if leftover as f64 / n <= tau {
            return Ok(EllChoice { ell, capped: false });
        }
    }
    Ok(EllChoice {
        ell: ell_max,
        capped: true,
    })
}

/// Samples split into the leftover bucket and `ell` dyadic buckets.
#[derive(Debug, Clone, PartialEq)]
pub struct BucketPartition {
    pub ell: usize,
    /// Index 0 is the leftover bucket.
    pub buckets: Vec<Multiset>,
    /// Fraction of this sample set per bucket, floored at `2^-ell`.
    pub ref_mass: Vec<f64>,
    pub source_size: u64,
    /// Samples the oracle scored at zero; they are placed in the leftover bucket.
    pub zero_mass: u64,
}

impl BucketPartition {
    pub fn sizes(&self) -> Vec<u64> {
        self.buckets.iter().map(Multiset::len).collect()
    }

    /// Samples outside the leftover bucket.
    pub fn retained(&self) -> u64 {
        self.source_size - self.buckets[0].len()
    }

    pub fn leftover_fraction(&self) -> f64 {
        if self.source_size == 0 {
            0.0
        } else {
            self.buckets[0].len() as f64 / self.source_size as f64
        }
    }
}

pub fn bucketize<E: EvalOracle + ?Sized>(samples: &Multiset, eval: &E, ell: usize) -> Result<BucketPartition> {
    if ell == 0 {
        return Err(Error::InvalidParameter("ell must be at least 1".into()));
    }
    let assigned: Vec<(usize, bool)> = samples
        .iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|(x, _)| {
            let p = eval.eval(x.as_str());
            if p > 0.0 {
                bucket_index(p.min(1.0), ell).map(|j| (j, false))
            } else if p == 0.0 {
                Ok((0, true))
            } else {
                Err(Error::NonpositiveProbability(p))
            }
        })
        .collect::<Result<_>>()?;

    let mut buckets = vec![Multiset::new(); ell + 1];
    let mut zero_mass = 0;
    for ((x, n), (j, zero)) in samples.iter().zip(assigned) {
        buckets[j].insert_n(x.clone(), n);
        if zero {
            zero_mass += n;
        }
    }
    let source_size = samples.len();
    let floor = pow2(-(ell as i32));
    let ref_mass = buckets
        .iter()
        .map(|b| {
            let frac = if source_size == 0 {
                0.0
            } else {
                b.len() as f64 / source_size as f64
            };
            frac.max(floor)
        })
        .collect();
    Ok(BucketPartition {
        ell,
        buckets,
        ref_mass,
        source_size,
        zero_mass,
    })
}
