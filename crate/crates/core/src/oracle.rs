//! Sampling and evaluation access to a distribution.
//!
//! The tester only ever talks to a [`SampOracle`] and an [`EvalOracle`], so
//! it runs unchanged against an exact synthetic pmf, a deterministically
//! perturbed one, or a lookup table built from pre-scored sample files.

use std::collections::HashMap;

use rand::{Rng, RngCore};
use rand_distr::{Binomial, Distribution};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::multiset::{ElementId, Multiset};
use crate::stats::Pmf;

pub trait SampOracle: Sync {
    fn draw(&self, rng: &mut dyn RngCore) -> ElementId;

    /// `n` i.i.d. draws collected into a multiset.
    fn draw_many(&self, n: u64, rng: &mut dyn RngCore) -> Multiset {
        let mut out = Multiset::new();
        for _ in 0..n {
            out.insert(self.draw(rng));
        }
        out
    }
}

pub trait EvalOracle: Sync {
    /// Probability mass of `x`. Repeated calls return bit-identical values.
    fn eval(&self, x: &str) -> f64;

    /// Multiplicative accuracy; zero for an exact oracle.
    fn eta(&self) -> f64 {
        0.0
    }
}

impl<T: EvalOracle + ?Sized> EvalOracle for &T {
    fn eval(&self, x: &str) -> f64 {
        (**self).eval(x)
    }

    fn eta(&self) -> f64 {
        (**self).eta()
    }
}

/// Exact SAMP and EVAL access to an explicit pmf.
#[derive(Debug, Clone)]
pub struct ExactOracle {
    pmf: Pmf,
    elements: Vec<ElementId>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl ExactOracle {
    pub fn new(pmf: Pmf) -> Self {
        let (elements, weights): (Vec<_>, Vec<_>) = pmf
            .iter()
            .filter(|(_, w)| *w > 0.0)
            .map(|(k, w)| (k.clone(), w))
            .unzip();
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Self {
            pmf,
            elements,
            weights,
            cumulative,
        }
    }

    pub fn pmf(&self) -> &Pmf {
        &self.pmf
    }
}

/// Shorthand returning the same exact oracle for both access modes.
pub fn exact_oracle(p: Pmf) -> ExactOracle {
    ExactOracle::new(p)
}

impl SampOracle for ExactOracle {
    fn draw(&self, rng: &mut dyn RngCore) -> ElementId {
        let total = *self.cumulative.last().expect("nonempty support");
        let u: f64 = rng.random::<f64>() * total;
        let i = self.cumulative.partition_point(|&c| c <= u);
        self.elements[i.min(self.elements.len() - 1)].clone()
    }

    /// Multinomial draw by sequential conditional binomials; O(support) regardless of `n`.
    fn draw_many(&self, n: u64, rng: &mut dyn RngCore) -> Multiset {
        let mut out = Multiset::new();
        let mut remaining = n;
        let mut mass_left: f64 = self.weights.iter().sum();
        for (x, &w) in self.elements.iter().zip(&self.weights) {
            if remaining == 0 {
                break;
            }
            let p = if mass_left > 0.0 { (w / mass_left).clamp(0.0, 1.0) } else { 1.0 };
            let k = Binomial::new(remaining, p)
                .expect("probability clamped to [0, 1]")
                .sample(rng);
            out.insert_n(x.clone(), k);
            remaining -= k;
            mass_left -= w;
        }
        if remaining > 0 {
            // rounding left the final weight short of the residual mass
            out.insert_n(self.elements.last().expect("nonempty support").clone(), remaining);
        }
        out
    }
}

impl EvalOracle for ExactOracle {
    fn eval(&self, x: &str) -> f64 {
        self.pmf.prob(x)
    }
}

/// Deterministic η-approximate wrapper: `inner(x) · (1 + η·u(x))`, `u` a hash of `(seed, x)` in [−1, 1].
#[derive(Debug, Clone)]
pub struct ApproxEval<E> {
    inner: E,
    eta: f64,
    seed: u64,
}

pub fn approx_wrap<E: EvalOracle>(inner: E, eta: f64, seed: u64) -> Result<ApproxEval<E>> {
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!("eta {eta} outside [0, 1)")));
    }
    Ok(ApproxEval { inner, eta, seed })
}

fn unit_hash(seed: u64, x: &str) -> f64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(x.as_bytes());
    let digest = h.finalize();
    let mut b = [0u8; 8];
    b.copy_from_slice(&digest[..8]);
    let v = u64::from_le_bytes(b) >> 11; // 53 significant bits
    (v as f64 / ((1u64 << 53) - 1) as f64) * 2.0 - 1.0
}

impl<E: EvalOracle> EvalOracle for ApproxEval<E> {
    fn eval(&self, x: &str) -> f64 {
        let p = self.inner.eval(x);
        if self.eta == 0.0 {
            return p;
        }
        (p * (1.0 + self.eta * unit_hash(self.seed, x))).clamp(p * (1.0 - self.eta), p * (1.0 + self.eta))
    }

    fn eta(&self) -> f64 {
        self.inner.eta() + self.eta
    }
}

/// EVAL backed by a lookup table, e.g. probabilities read from scored-sample files.
/// Unknown elements evaluate to zero.
#[derive(Debug, Clone, Default)]
pub struct TableEval {
    probs: HashMap<String, f64>,
}

impl TableEval {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `exp(logprob)`; the first value seen for an element wins.
    pub fn insert_logprob(&mut self, x: &str, logprob: f64) {
        self.probs.entry(x.to_owned()).or_insert(logprob.exp().min(1.0));
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

impl EvalOracle for TableEval {
    fn eval(&self, x: &str) -> f64 {
        self.probs.get(x).copied().unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{dkw_epsilon, max_cdf_gap, EmpiricalHistogram};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_pmf() -> Pmf {
        Pmf::new([("a", 0.5), ("b", 0.3), ("c", 0.2)]).unwrap()
    }

    #[test]
    fn exact_eval_returns_stored_mass() {
        let o = exact_oracle(sample_pmf());
        assert_eq!(o.eval("a"), 0.5);
        assert_eq!(o.eval("b"), 0.3);
        assert_eq!(o.eval("nope"), 0.0);
    }

    fn cdf_gap_against(o: &ExactOracle, m: &Multiset) -> f64 {
        let names: Vec<&ElementId> = o.pmf().iter().map(|(k, _)| k).collect();
        let emp = EmpiricalHistogram::new(names.iter().map(|k| m.count(k.as_str())).collect());
        // exact pmf as a histogram over 10^12 pseudo-samples
        let scale = 1e12;
        let exact = EmpiricalHistogram::new(
            o.pmf().iter().map(|(_, w)| (w * scale).round() as u64).collect(),
        );
        max_cdf_gap(&emp, &exact, m.len(), exact.total()).unwrap()
    }

    #[test]
    fn single_draws_match_weights() {
        let o = exact_oracle(sample_pmf());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m: Multiset = (0..100_000).map(|_| o.draw(&mut rng)).collect();
        assert!(cdf_gap_against(&o, &m) < dkw_epsilon(100_000, 0.001));
    }

    #[test]
    fn bulk_draws_match_weights() {
        let o = exact_oracle(Pmf::uniform(64));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = o.draw_many(100_000, &mut rng);
        assert_eq!(m.len(), 100_000);
        assert!(cdf_gap_against(&o, &m) < dkw_epsilon(100_000, 0.001));
    }

    #[test]
    fn draws_are_reproducible() {
        let o = exact_oracle(sample_pmf());
        let a = o.draw_many(500, &mut ChaCha8Rng::seed_from_u64(3));
        let b = o.draw_many(500, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
    }

    #[test]
    fn approx_examples() {
        let o = exact_oracle(sample_pmf());
        let same = approx_wrap(&o, 0.0, 1).unwrap();
        assert_eq!(same.eval("a"), o.eval("a"));
        let noisy = approx_wrap(&o, 0.1, 1).unwrap();
        let v = noisy.eval("a");
        assert!((0.45..=0.55).contains(&v));
        assert_eq!(v.to_bits(), noisy.eval("a").to_bits());
        assert!(approx_wrap(&o, 1.0, 1).is_err());
    }

    proptest! {
        #[test]
        fn approx_stays_in_envelope(
            w in proptest::collection::vec(0.01f64..1.0, 1..12),
            eta_idx in 0usize..3,
            seed in any::<u64>(),
        ) {
            let eta = [0.0, 0.05, 0.2][eta_idx];
            let pmf = Pmf::from_unnormalized(w.into_iter().enumerate().map(|(i, w)| (ElementId::from(i), w))).unwrap();
            let o = exact_oracle(pmf.clone());
            let a = approx_wrap(&o, eta, seed).unwrap();
            for (k, p) in pmf.iter() {
                let v = a.eval(k.as_str());
                prop_assert!(v >= (1.0 - eta) * p && v <= (1.0 + eta) * p);
            }
        }
    }
}
