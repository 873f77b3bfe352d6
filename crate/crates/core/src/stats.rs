//! Distribution primitives and the scalar statistics the tester is built from.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::multiset::ElementId;

/// Slack allowed on the total mass of a [`Pmf`].
pub const MASS_TOLERANCE: f64 = 1e-9;

/// An explicit finite distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    weights: BTreeMap<ElementId, f64>,
    domain_size: u64,
}

impl Pmf {
    /// Builds a pmf whose domain is exactly its key set.
    pub fn new<I, K>(weights: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, f64)>,
        K: Into<ElementId>,
    {
        let mut map = BTreeMap::new();
        for (k, w) in weights {
            *map.entry(k.into()).or_insert(0.0) += w;
        }
        let n = map.len() as u64;
        Self::with_domain(map, n)
    }

    pub fn with_domain(weights: BTreeMap<ElementId, f64>, domain_size: u64) -> Result<Self> {
        let mut sum = 0.0;
        let mut positive = 0u64;
        for (k, &w) in &weights {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidPmf(format!("weight {w} for `{k}`")));
            }
            if w > 0.0 {
                positive += 1;
            }
            sum += w;
        }
        if (sum - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidPmf(format!("total mass {sum}")));
        }
        if domain_size < positive {
            return Err(Error::InvalidPmf(format!(
                "domain size {domain_size} below support size {positive}"
            )));
        }
        Ok(Self {
            weights,
            domain_size,
        })
    }

    /// Normalizes nonnegative weights to total mass one.
    pub fn from_unnormalized<I, K>(weights: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, f64)>,
        K: Into<ElementId>,
    {
        let raw: Vec<(ElementId, f64)> = weights.into_iter().map(|(k, w)| (k.into(), w)).collect();
        let total: f64 = raw.iter().map(|(_, w)| *w).sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidPmf(format!("total mass {total}")));
        }
        Self::new(raw.into_iter().map(|(k, w)| (k, w / total)))
    }

    pub fn uniform(n: usize) -> Self {
        let w = 1.0 / n as f64;
        Self::new((0..n).map(|i| (ElementId::from(i), w))).expect("uniform weights are valid")
    }

    pub fn prob(&self, x: &str) -> f64 {
        self.weights.get(x).copied().unwrap_or(0.0)
    }

    pub fn domain_size(&self) -> u64 {
        self.domain_size
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ElementId, f64)> {
        self.weights.iter().map(|(k, &w)| (k, w))
    }

    pub fn support_len(&self) -> usize {
        self.weights.values().filter(|&&w| w > 0.0).count()
    }

    pub fn l2_norm(&self) -> f64 {
        self.weights.values().map(|w| w * w).sum::<f64>().sqrt()
    }
}

/// Σ_x |p(x) − q(x)| over the union of supports.
pub fn l1_distance(p: &Pmf, q: &Pmf) -> f64 {
    let keys: BTreeSet<&ElementId> = p.weights.keys().chain(q.weights.keys()).collect();
    keys.into_iter()
        .map(|k| (p.prob(k.as_str()) - q.prob(k.as_str())).abs())
        .sum()
}

/// Conditional distribution of `p` on `subset`.
pub fn conditional<'a, I>(p: &Pmf, subset: I) -> Result<Pmf>
where
    I: IntoIterator<Item = &'a str>,
{
    let members: BTreeSet<&str> = subset.into_iter().collect();
    let mass: f64 = members.iter().map(|x| p.prob(x)).sum();
    if mass <= 0.0 {
        return Err(Error::EmptyCondition);
    }
    let weights: BTreeMap<ElementId, f64> = members
        .iter()
        .filter(|x| p.prob(x) > 0.0)
        .map(|x| (ElementId::from(*x), p.prob(x) / mass))
        .collect();
    let n = members.len() as u64;
    Pmf::with_domain(weights, n)
}

/// Deviation at which the two-sided DKW bound (Massart constant) equals `delta`.
pub fn dkw_epsilon(m: u64, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * m as f64)).sqrt()
}

/// Counts per category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmpiricalHistogram {
    counts: Vec<u64>,
    total: u64,
}

impl EmpiricalHistogram {
    pub fn new(counts: Vec<u64>) -> Self {
        let total = counts.iter().sum();
        Self { counts, total }
    }

    pub fn zeros(categories: usize) -> Self {
        Self::new(vec![0; categories])
    }

    pub fn add(&mut self, category: usize, n: u64) {
        self.counts[category] += n;
        self.total += n;
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn categories(&self) -> usize {
        self.counts.len()
    }
}

/// Largest pointwise gap between two empirical CDFs, each normalized by its own count.
pub fn max_cdf_gap(
    h1: &EmpiricalHistogram,
    h2: &EmpiricalHistogram,
    norm1: u64,
    norm2: u64,
) -> Result<f64> {
    if h1.categories() != h2.categories() {
        return Err(Error::CategoryMismatch {
            left: h1.categories(),
            right: h2.categories(),
        });
    }
    if norm1 == 0 || norm2 == 0 {
        return Err(Error::InvalidParameter("cdf normalizer must be at least 1".into()));
    }
    let (n1, n2) = (norm1 as f64, norm2 as f64);
    let mut c1 = 0u64;
    let mut c2 = 0u64;
    let mut gap = 0.0f64;
    for (&a, &b) in h1.counts().iter().zip(h2.counts()) {
        c1 += a;
        c2 += b;
        gap = gap.max((c1 as f64 / n1 - c2 as f64 / n2).abs());
    }
    Ok(gap)
}

/// One summand of the collision chi-square statistic.
pub fn collision_chi_term(z1: u64, z2: u64) -> f64 {
    let (a, b) = (z1 as f64, z2 as f64);
    ((a - b).powi(2) - a - b) / (a + b).max(1.0)
}

/// Mann–Whitney AUROC: probability a positive outscores a negative, ties counting one half.
pub fn auroc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::EmptyInput("auroc needs both classes"));
    }
    if pos.iter().chain(neg).any(|s| s.is_nan()) {
        return Err(Error::InvalidParameter("NaN score".into()));
    }
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Twice the rank sum of the positives keeps tie ranks integral.
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        // ranks i+1 ..= j+1, averaged
        let twice_avg = (i + 1 + j + 1) as u128;
        let pos_in_tie = all[i..=j].iter().filter(|e| e.1).count() as u128;
        twice_rank_sum += twice_avg * pos_in_tie;
        i = j + 1;
    }
    let np = pos.len() as u128;
    let nn = neg.len() as u128;
    let twice_u = twice_rank_sum - np * (np + 1);
    Ok(twice_u as f64 / (2 * np * nn) as f64)
}

/// ln(Σ exp(x_i)) without overflow; −∞ for an empty or all −∞ input.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}
