use std::collections::HashMap;

use super::{get_collision_with, CollisionSearch, TokenId, TokenSeq, TokenizerSpec};
use crate::error::{Error, Result};
use crate::stats::log_sum_exp;

/// An autoregressive distribution over token sequences.
pub trait TokenDist: Sync {
    /// `ln P(next | context)`.
    fn ln_prob(&self, context: &[TokenId], next: TokenId) -> f64;

    fn eos(&self) -> TokenId;
}

impl<T: TokenDist + ?Sized> TokenDist for &T {
    fn ln_prob(&self, context: &[TokenId], next: TokenId) -> f64 {
        (**self).ln_prob(context, next)
    }

    fn eos(&self) -> TokenId {
        (**self).eos()
    }
}

/// `ln P(seq | context)`, times `P(EOS | context ++ seq)` when `terminal`.
pub fn seq_ln_prob(dist: &dyn TokenDist, context: &[TokenId], seq: &[TokenId], terminal: bool) -> f64 {
    let mut ctx = context.to_vec();
    let mut acc = 0.0;
    for &t in seq {
        acc += dist.ln_prob(&ctx, t);
        if acc == f64::NEG_INFINITY {
            return acc;
        }
        ctx.push(t);
    }
    if terminal {
        acc += dist.ln_prob(&ctx, dist.eos());
    }
    acc
}

/// Context given to the right-hand part of a split.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum SuffixContext {
    /// Each part is scored from the start of the string.
    #[default]
    Unconditioned,
    /// The suffix is scored after the canonical tokens that precede it.
    Conditioned,
}

/// Collision-aware string likelihood with configurable depth and recursion.
#[derive(Debug, Clone, Copy)]
pub struct EvalPlus {
    pub depth: usize,
    pub suffix: SuffixContext,
    pub search: CollisionSearch,
}

impl EvalPlus {
    pub fn new(depth: usize) -> Self {
        Self {
            depth,
            suffix: SuffixContext::default(),
            search: CollisionSearch::default(),
        }
    }

    pub fn with_suffix(mut self, suffix: SuffixContext) -> Self {
        self.suffix = suffix;
        self
    }

    pub fn with_search(mut self, search: CollisionSearch) -> Self {
        self.search = search;
        self
    }

    /// Natural log of the estimate, clamped to at most 0.
    pub fn ln_prob(&self, dist: &dyn TokenDist, spec: &TokenizerSpec, sigma: &TokenSeq) -> Result<f64> {
        if self.depth == 0 {
            return Err(Error::InvalidParameter("collision depth must be at least 1".into()));
        }
        let eos = spec.eos_id();
        if !sigma.is_well_formed(eos) {
            return Err(Error::InvalidParameter(format!("EOS followed by content in {sigma}")));
        }
        for &t in sigma.ids() {
            spec.word(t).ok_or(Error::UnknownToken(t))?;
        }
        let core = sigma.without_eos(eos);
        if core.is_empty() {
            return Ok(dist.ln_prob(&[], dist.eos()).min(0.0));
        }
        let mut run = Run {
            plan: self,
            dist,
            spec,
            sigma: core.ids(),
            memo: HashMap::new(),
        };
        Ok(run.rec(0, core.len(), self.depth)?.min(0.0))
    }

    pub fn prob(&self, dist: &dyn TokenDist, spec: &TokenizerSpec, sigma: &TokenSeq) -> Result<f64> {
        Ok(self.ln_prob(dist, spec, sigma)?.exp())
    }
}

struct Run<'a> {
    plan: &'a EvalPlus,
    dist: &'a dyn TokenDist,
    spec: &'a TokenizerSpec,
    sigma: &'a [TokenId],
    memo: HashMap<(usize, usize, usize), f64>,
}

impl Run<'_> {
    fn context(&self, start: usize) -> &[TokenId] {
        match self.plan.suffix {
            SuffixContext::Unconditioned => &[],
            SuffixContext::Conditioned => &self.sigma[..start],
        }
    }

    fn rec(&mut self, start: usize, end: usize, depth: usize) -> Result<f64> {
        if let Some(&v) = self.memo.get(&(start, end, depth)) {
            return Ok(v);
        }
        let terminal = end == self.sigma.len();
        let v = if end - start <= depth {
            let part = TokenSeq(self.sigma[start..end].to_vec());
            let collisions = get_collision_with(self.spec, &part, depth, self.plan.search)?;
            let ctx = self.context(start);
            let terms: Vec<f64> = collisions
                .iter()
                .map(|c| seq_ln_prob(self.dist, ctx, c.ids(), terminal))
                .collect();
            log_sum_exp(terms)
        } else {
            let mut terms = Vec::with_capacity(depth);
            for i in 1..=depth {
                let left = self.rec(start, start + i, i)?;
                let right = self.rec(start + i, end, depth)?;
                terms.push(left + right);
            }
            log_sum_exp(terms)
        };
        self.memo.insert((start, end, depth), v);
        Ok(v)
    }
}

pub fn eval_plus_ln(dist: &dyn TokenDist, spec: &TokenizerSpec, sigma: &TokenSeq, d: usize) -> Result<f64> {
    EvalPlus::new(d).ln_prob(dist, spec, sigma)
}

pub fn eval_plus(dist: &dyn TokenDist, spec: &TokenizerSpec, sigma: &TokenSeq, d: usize) -> Result<f64> {
    EvalPlus::new(d).prob(dist, spec, sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Fixed next-token probabilities independent of context.
    struct Unigram {
        ln: Vec<f64>,
        eos: TokenId,
    }

    impl TokenDist for Unigram {
        fn ln_prob(&self, _: &[TokenId], next: TokenId) -> f64 {
            if next == self.eos {
                self.ln[0]
            } else {
                self.ln[next as usize]
            }
        }

        fn eos(&self) -> TokenId {
            self.eos
        }
    }

    fn abc() -> (TokenizerSpec, Unigram) {
        let t = TokenizerSpec::from_words("abc", &["a", "b", "ab"]).unwrap();
        // eos, a, b, ab
        let ln = [0.4f64, 0.2, 0.1, 0.3].iter().map(|p| p.ln()).collect();
        (t, Unigram { ln, eos: 4 })
    }

    #[test]
    fn abc_sums_both_segmentations() {
        let (t, m) = abc();
        let got = eval_plus(&m, &t, &TokenSeq(vec![3]), 2).unwrap();
        let want = 0.3 * 0.4 + 0.2 * 0.1 * 0.4;
        assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        let only_canonical = eval_plus(&m, &t, &TokenSeq(vec![3]), 1).unwrap();
        assert!((only_canonical - 0.12).abs() < 1e-15);
    }

    #[test]
    fn trailing_eos_is_ignored() {
        let (t, m) = abc();
        let a = eval_plus_ln(&m, &t, &TokenSeq(vec![1, 2]), 2).unwrap();
        let b = eval_plus_ln(&m, &t, &TokenSeq(vec![1, 2, 4]), 2).unwrap();
        assert_eq!(a, b);
        let empty = eval_plus(&m, &t, &TokenSeq(vec![4]), 2).unwrap();
        assert!((empty - 0.4).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        let (t, m) = abc();
        assert!(eval_plus(&m, &t, &TokenSeq(vec![1, 4, 2]), 2).is_err());
        assert!(eval_plus(&m, &t, &TokenSeq(vec![9]), 2).is_err());
        assert!(eval_plus(&m, &t, &TokenSeq(vec![1]), 0).is_err());
    }

    #[test]
    fn recursion_splits_long_inputs() {
        let (t, m) = abc();
        // "aaab" = (a, a, ab) with d = 2 splits after one token or after two
        let sigma = t.encode("aaab").unwrap();
        assert_eq!(sigma, TokenSeq(vec![1, 1, 3]));
        let got = eval_plus(&m, &t, &sigma, 2).unwrap();
        let (a, b, ab, eos) = (0.2, 0.1, 0.3, 0.4);
        let split1 = a * (a * ab * eos);
        let split2 = (a * a) * (ab * eos + a * b * eos);
        let want = split1 + split2;
        assert!((got - want).abs() < 1e-15, "{got} vs {want}");
    }

    #[test]
    fn conditioned_mode_uses_prefix_context() {
        struct Sticky;
        impl TokenDist for Sticky {
            fn ln_prob(&self, ctx: &[TokenId], next: TokenId) -> f64 {
                let same = ctx.last() == Some(&next);
                match (next, same) {
                    (4, _) => 0.5f64.ln(),
                    (_, true) => 0.3f64.ln(),
                    _ => (0.2f64 / 3.0).ln(),
                }
            }
            fn eos(&self) -> TokenId {
                4
            }
        }
        let t = TokenizerSpec::from_words("abc", &["a", "b", "ab"]).unwrap();
        let sigma = TokenSeq(vec![1, 1, 1]);
        let plain = EvalPlus::new(1).ln_prob(&Sticky, &t, &sigma).unwrap();
        let cond = EvalPlus::new(1)
            .with_suffix(SuffixContext::Conditioned)
            .ln_prob(&Sticky, &t, &sigma)
            .unwrap();
        let exact = seq_ln_prob(&Sticky, &[], &[1, 1, 1], true);
        assert!((cond - exact).abs() < 1e-12);
        assert!(plain < cond);
    }
}
