//! Small autoregressive token models with exact string probabilities.
//!
//! # Model file format
//!
//! Whitespace-separated directives, one per line; `#` starts a comment line.
//!
//! ```text
//! order 1
//! max_len 12
//! tokenizer toy.tok
//! row - : 1=0.5 7=0.5
//! row 1 : 2=0.1 eos=0.9
//! ```
//!
//! * `order k` is the longest context a row may condition on (default 1).
//! * `max_len n` caps generated sequences at `n` non-EOS tokens (default 12).
//! * `tokenizer path` is optional metadata, resolved by callers relative to the model file.
//! * `row <ctx> : <id>=<p> ...` gives `P(next | ctx)`. `<ctx>` is `-` for the
//!   empty context or up to `k` token ids; `eos` names the end-of-string token.
//!   Every row sums to 1 within 1e-12 and the empty-context row is mandatory.
//!
//! Lookup uses the longest suffix of the context that has a row. After EOS
//! the model stays in EOS with probability 1.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, RngCore};

use crate::dataio::ScoredSample;
use crate::error::{Error, Result};
use crate::stats::Pmf;
use crate::tokenizer::{TokenDist, TokenId, TokenSeq, TokenizerSpec};

pub const ROW_TOLERANCE: f64 = 1e-12;
pub const EXACT_LEN_CAP: usize = 12;
pub const EXACT_VOCAB_CAP: usize = 30;
const PMF_NODE_BUDGET: usize = 20_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    order: usize,
    max_len: usize,
    eos: TokenId,
    vocab_size: usize,
    rows: BTreeMap<Vec<TokenId>, Vec<(TokenId, f64)>>,
    pub tokenizer_path: Option<String>,
}

impl ToyModel {
    /// Validates `rows` against `spec`. Row entries may come in any order.
    pub fn new(
        spec: &TokenizerSpec,
        order: usize,
        max_len: usize,
        rows: BTreeMap<Vec<TokenId>, Vec<(TokenId, f64)>>,
    ) -> Result<Self> {
        let eos = spec.eos_id();
        let v = spec.vocab_size() as TokenId;
        let known = |t: TokenId| t == eos || (1..=v).contains(&t);
        if !rows.contains_key(&Vec::new()) {
            return Err(Error::InvalidParameter("model has no empty-context row".into()));
        }
        let mut clean = BTreeMap::new();
        for (ctx, mut row) in rows {
            if ctx.len() > order {
                return Err(Error::InvalidParameter(format!("context {ctx:?} longer than order {order}")));
            }
            if ctx.iter().any(|&t| t == eos || !known(t)) {
                return Err(Error::InvalidParameter(format!("context {ctx:?} has a non-vocabulary token")));
            }
            row.sort_by_key(|e| e.0);
            let mut sum = 0.0;
            for w in row.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::InvalidParameter(format!("row {ctx:?} repeats token {}", w[0].0)));
                }
            }
            for &(t, p) in &row {
                if !known(t) {
                    return Err(Error::UnknownToken(t));
                }
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::ProbabilityOutOfRange(p));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > ROW_TOLERANCE {
                return Err(Error::InvalidPmf(format!("row {ctx:?} sums to {sum}")));
            }
            row.retain(|e| e.1 > 0.0);
            clean.insert(ctx, row);
        }
        Ok(Self {
            order,
            max_len,
            eos,
            vocab_size: spec.vocab_size(),
            rows: clean,
            tokenizer_path: None,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn with_max_len(mut self, max_len: usize) -> Self {
        self.max_len = max_len;
        self
    }

    pub fn rows(&self) -> impl Iterator<Item = (&Vec<TokenId>, &Vec<(TokenId, f64)>)> {
        self.rows.iter()
    }

    /// The row used after `context`, or `None` once EOS has been emitted.
    pub fn row(&self, context: &[TokenId]) -> Option<&[(TokenId, f64)]> {
        if context.last() == Some(&self.eos) {
            return None;
        }
        let k = self.order.min(context.len());
        (0..=k)
            .rev()
            .find_map(|j| self.rows.get(&context[context.len() - j..]))
            .map(Vec::as_slice)
    }

    pub fn prob(&self, context: &[TokenId], next: TokenId) -> f64 {
        match self.row(context) {
            None => f64::from(u8::from(next == self.eos)),
            Some(row) => row
                .binary_search_by_key(&next, |e| e.0)
                .map(|i| row[i].1)
                .unwrap_or(0.0),
        }
    }

    pub fn parse(src: &str, spec: &TokenizerSpec) -> Result<Self> {
        let mut order = 1;
        let mut max_len = EXACT_LEN_CAP;
        let mut tokenizer_path = None;
        let mut rows = BTreeMap::new();
        for (i, line) in src.lines().enumerate() {
            let err = |msg: String| Error::Parse { line: i + 1, msg };
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut words = line.split_whitespace();
            let key = words.next().expect("nonempty line");
            let rest: Vec<&str> = words.collect();
            match key {
                "order" | "max_len" => {
                    let [v] = rest[..] else {
                        return Err(err(format!("`{key}` takes one value")));
                    };
                    let v = v.parse().map_err(|_| err(format!("bad {key}")))?;
                    if key == "order" {
                        order = v;
                    } else {
                        max_len = v;
                    }
                }
                "tokenizer" => {
                    let [p] = rest[..] else {
                        return Err(err("`tokenizer` takes one path".into()));
                    };
                    tokenizer_path = Some(p.to_owned());
                }
                "row" => {
                    let colon = rest
                        .iter()
                        .position(|w| *w == ":")
                        .ok_or_else(|| err("row without `:`".into()))?;
                    let ctx = match &rest[..colon] {
                        ["-"] => Vec::new(),
                        ids => ids
                            .iter()
                            .map(|w| w.parse::<TokenId>().map_err(|_| err(format!("bad context token `{w}`"))))
                            .collect::<Result<Vec<_>>>()?,
                    };
                    let mut row = Vec::new();
                    for entry in &rest[colon + 1..] {
                        let (t, p) = entry
                            .split_once('=')
                            .ok_or_else(|| err(format!("bad entry `{entry}`")))?;
                        let t = if t == "eos" {
                            spec.eos_id()
                        } else {
                            t.parse().map_err(|_| err(format!("bad token `{t}`")))?
                        };
                        let p: f64 = p.parse().map_err(|_| err(format!("bad probability `{p}`")))?;
                        row.push((t, p));
                    }
                    if rows.insert(ctx.clone(), row).is_some() {
                        return Err(err(format!("duplicate row for context {ctx:?}")));
                    }
                }
                other => return Err(err(format!("unknown directive `{other}`"))),
            }
        }
        let mut m = Self::new(spec, order, max_len, rows)?;
        m.tokenizer_path = tokenizer_path;
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>, spec: &TokenizerSpec) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, spec)
    }

    pub fn to_file_string(&self) -> String {
        let mut s = format!("order {}\nmax_len {}\n", self.order, self.max_len);
        if let Some(p) = &self.tokenizer_path {
            s.push_str(&format!("tokenizer {p}\n"));
        }
        for (ctx, row) in &self.rows {
            s.push_str("row ");
            if ctx.is_empty() {
                s.push('-');
            } else {
                let ids: Vec<String> = ctx.iter().map(u32::to_string).collect();
                s.push_str(&ids.join(" "));
            }
            s.push_str(" :");
            for &(t, p) in row {
                if t == self.eos {
                    s.push_str(&format!(" eos={p}"));
                } else {
                    s.push_str(&format!(" {t}={p}"));
                }
            }
            s.push('\n');
        }
        s
    }
}

impl TokenDist for ToyModel {
    fn ln_prob(&self, context: &[TokenId], next: TokenId) -> f64 {
        self.prob(context, next).ln()
    }

    fn eos(&self) -> TokenId {
        self.eos
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampledText {
    pub text: String,
    /// Generated tokens without the EOS.
    pub tokens: TokenSeq,
    /// Stopped at `max_len` before EOS was drawn.
    pub truncated: bool,
}

pub fn sample_text(model: &ToyModel, spec: &TokenizerSpec, rng: &mut dyn RngCore) -> Result<SampledText> {
    let mut ctx = Vec::new();
    while ctx.len() < model.max_len {
        let row = model.row(&ctx).expect("no EOS in context");
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut next = row.last().expect("rows are nonempty").0;
        for &(t, p) in row {
            acc += p;
            if u < acc {
                next = t;
                break;
            }
        }
        if next == model.eos {
            let text = spec.decode_ids(&ctx)?;
            return Ok(SampledText {
                text,
                tokens: TokenSeq(ctx),
                truncated: false,
            });
        }
        ctx.push(next);
    }
    Ok(SampledText {
        text: spec.decode_ids(&ctx)?,
        tokens: TokenSeq(ctx),
        truncated: true,
    })
}

fn check_exact_limits(spec: &TokenizerSpec, len_cap: usize) -> Result<()> {
    if len_cap > EXACT_LEN_CAP || spec.vocab_size() > EXACT_VOCAB_CAP {
        return Err(Error::OracleIntractable(format!(
            "exact probabilities need len_cap <= {EXACT_LEN_CAP} and vocab <= {EXACT_VOCAB_CAP}; got {len_cap} and {}",
            spec.vocab_size()
        )));
    }
    Ok(())
}

/// Probability that the model emits exactly `text`, summed over every
/// tokenization with at most `len_cap` tokens.
pub fn exact_text_prob(model: &ToyModel, spec: &TokenizerSpec, text: &str, len_cap: usize) -> Result<f64> {
    check_exact_limits(spec, len_cap)?;
    let bytes = text.as_bytes();
    let words: Vec<(TokenId, &[u8])> = spec
        .token_ids()
        .map(|t| (t, spec.word(t).expect("vocabulary id").as_bytes()))
        .collect();
    // forward pass over (bytes consumed, last `order` tokens)
    let mut frontier: HashMap<(usize, Vec<TokenId>), f64> = HashMap::from([((0, Vec::new()), 1.0)]);
    let mut total = 0.0;
    for step in 0..=len_cap {
        let mut next: HashMap<(usize, Vec<TokenId>), f64> = HashMap::new();
        for ((pos, tail), mass) in frontier {
            if pos == bytes.len() {
                total += mass * model.prob(&tail, model.eos);
            }
            if step == len_cap {
                continue;
            }
            for &(t, w) in &words {
                if !bytes[pos..].starts_with(w) {
                    continue;
                }
                let p = model.prob(&tail, t);
                if p == 0.0 {
                    continue;
                }
                let mut tail2 = tail.clone();
                tail2.push(t);
                if tail2.len() > model.order {
                    tail2.remove(0);
                }
                *next.entry((pos + w.len(), tail2)).or_insert(0.0) += mass * p;
            }
        }
        frontier = next;
    }
    Ok(total)
}

/// The full string distribution of a model up to `len_cap` tokens.
#[derive(Debug, Clone)]
pub struct TextPmf {
    pub probs: BTreeMap<String, f64>,
    /// Mass of sequences still running after `len_cap` tokens.
    pub dropped: f64,
}

impl TextPmf {
    /// Renormalized over the enumerated strings.
    pub fn to_pmf(&self) -> Result<Pmf> {
        Pmf::from_unnormalized(self.probs.iter().map(|(k, &v)| (k.as_str(), v)))
    }

    pub fn prob(&self, text: &str) -> f64 {
        self.probs.get(text).copied().unwrap_or(0.0)
    }

    /// ℓ1 distance between two enumerated distributions; dropped mass counts in full.
    pub fn l1(&self, other: &TextPmf) -> f64 {
        let mut d = self.dropped + other.dropped;
        for (k, &p) in &self.probs {
            d += (p - other.prob(k)).abs();
        }
        for (k, &q) in &other.probs {
            if !self.probs.contains_key(k) {
                d += q;
            }
        }
        d
    }
}

pub fn text_pmf(model: &ToyModel, spec: &TokenizerSpec, len_cap: usize) -> Result<TextPmf> {
    let mut probs: BTreeMap<String, f64> = BTreeMap::new();
    let mut dropped = 0.0;
    let mut visited = 0usize;
    let mut stack: Vec<(Vec<TokenId>, String, f64)> = vec![(Vec::new(), String::new(), 1.0)];
    while let Some((ctx, text, mass)) = stack.pop() {
        visited += 1;
        if visited > PMF_NODE_BUDGET {
            return Err(Error::OracleIntractable("string distribution too large to enumerate".into()));
        }
        let row = model.row(&ctx).expect("no EOS in context");
        for &(t, p) in row {
            if t == model.eos {
                *probs.entry(text.clone()).or_insert(0.0) += mass * p;
            } else if ctx.len() == len_cap {
                dropped += mass * p;
            } else {
                let mut c = ctx.clone();
                c.push(t);
                let mut s = text.clone();
                s.push_str(spec.word(t).ok_or(Error::UnknownToken(t))?);
                stack.push((c, s, mass * p));
            }
        }
    }
    Ok(TextPmf { probs, dropped })
}

/// Parameters for [`random_model`].
#[derive(Debug, Clone)]
pub struct RandomModelSpec {
    pub order: usize,
    /// Non-EOS successors per row.
    pub branching: usize,
    /// Successors of the empty context.
    pub start_branching: usize,
    /// EOS probability range for non-initial rows.
    pub eos_range: (f64, f64),
    /// EOS probability of the empty context.
    pub start_eos: f64,
    pub max_len: usize,
}

impl Default for RandomModelSpec {
    fn default() -> Self {
        Self {
            order: 1,
            branching: 3,
            start_branching: 4,
            eos_range: (0.75, 0.85),
            start_eos: 0.0,
            max_len: EXACT_LEN_CAP,
        }
    }
}

fn random_row(
    spec: &TokenizerSpec,
    branching: usize,
    eos: f64,
    rng: &mut dyn RngCore,
) -> Vec<(TokenId, f64)> {
    let v = spec.vocab_size();
    let k = branching.min(v);
    let mut picks: Vec<TokenId> = sample_indices(rng, v, k).into_iter().map(|i| i as TokenId + 1).collect();
    picks.sort_unstable();
    let raw: Vec<f64> = picks.iter().map(|_| rng.random_range(0.2..1.0)).collect();
    let z: f64 = raw.iter().sum();
    let mut row: Vec<(TokenId, f64)> = picks
        .iter()
        .zip(&raw)
        .map(|(&t, &w)| (t, (1.0 - eos) * w / z))
        .collect();
    // the last token absorbs the rounding so the row sums to 1
    let rest: f64 = row[..k - 1].iter().map(|e| e.1).sum();
    row[k - 1].1 = (1.0 - eos) - rest;
    if eos > 0.0 {
        row.push((spec.eos_id(), eos));
    }
    row
}

/// A sparse random model with rows for every context up to `shape.order`.
pub fn random_model(spec: &TokenizerSpec, shape: &RandomModelSpec, rng: &mut dyn RngCore) -> Result<ToyModel> {
    let (lo, hi) = shape.eos_range;
    if spec.vocab_size() == 0 || shape.branching == 0 || shape.start_branching == 0 {
        return Err(Error::InvalidParameter("random models need a vocabulary and branching ≥ 1".into()));
    }
    if !(0.0 <= lo && lo <= hi && hi < 1.0 && (0.0..1.0).contains(&shape.start_eos)) {
        return Err(Error::InvalidParameter("EOS probabilities must lie in [0, 1)".into()));
    }
    let mut rows = BTreeMap::new();
    rows.insert(Vec::new(), random_row(spec, shape.start_branching, shape.start_eos, rng));
    let mut layer: Vec<Vec<TokenId>> = vec![Vec::new()];
    for _ in 0..shape.order {
        let mut next_layer = Vec::new();
        for ctx in &layer {
            for t in spec.token_ids() {
                let mut c = ctx.clone();
                c.push(t);
                let eos = rng.random_range(shape.eos_range.0..=shape.eos_range.1);
                rows.insert(c.clone(), random_row(spec, shape.branching, eos, rng));
                next_layer.push(c);
            }
        }
        layer = next_layer;
    }
    ToyModel::new(spec, shape.order, shape.max_len, rows)
}

/// Row-wise mixture `(1 − λ)·a + λ·b` over the union of both models' contexts.
pub fn interpolate(a: &ToyModel, b: &ToyModel, lambda: f64, spec: &TokenizerSpec) -> Result<ToyModel> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!("lambda {lambda} outside [0, 1]")));
    }
    let contexts: std::collections::BTreeSet<&Vec<TokenId>> = a.rows.keys().chain(b.rows.keys()).collect();
    let mut rows = BTreeMap::new();
    for ctx in contexts {
        let mut mix: BTreeMap<TokenId, f64> = BTreeMap::new();
        for (m, w) in [(a, 1.0 - lambda), (b, lambda)] {
            for &(t, p) in m.row(ctx).expect("no EOS in context") {
                *mix.entry(t).or_insert(0.0) += w * p;
            }
        }
        rows.insert(ctx.clone(), mix.into_iter().collect());
    }
    ToyModel::new(spec, a.order.max(b.order), a.max_len.max(b.max_len), rows)
}

/// The bundled 12-token vocabulary. Several strings have more than one
/// tokenization, e.g. `a!=b` is both `a|!=|b` and `a|!|=|b`.
pub fn toy_tokenizer() -> TokenizerSpec {
    TokenizerSpec::from_words("toy12", &["a", "b", "c", "!", "=", "!=", "ab", "bc", "(", ")", " ", "=="])
        .expect("bundled vocabulary is valid")
}

/// Labels and names used when building a contaminated dataset.
#[derive(Debug, Clone)]
pub struct ContaminationLabels {
    pub target: String,
    pub adversary: String,
    pub id_prefix: String,
}

impl Default for ContaminationLabels {
    fn default() -> Self {
        Self {
            target: "target".into(),
            adversary: "adversary".into(),
            id_prefix: "s".into(),
        }
    }
}

/// Number of samples replaced at contamination level `gamma_pct` out of `n`.
pub fn contaminated_count(gamma_pct: f64, n: usize) -> usize {
    ((gamma_pct * n as f64 / 100.0) + 1e-9).floor() as usize
}

/// `n` target samples with `⌊γn/100⌋` of them, at random positions, replaced by
/// adversary samples. Every sample carries exact log-probabilities under both models.
pub fn make_contaminated_dataset(
    target: &ToyModel,
    adversary: &ToyModel,
    spec: &TokenizerSpec,
    gamma_pct: f64,
    n: usize,
    labels: &ContaminationLabels,
    rng: &mut dyn RngCore,
) -> Result<Vec<ScoredSample>> {
    if !(0.0..=100.0).contains(&gamma_pct) {
        return Err(Error::InvalidParameter(format!("gamma {gamma_pct} outside [0, 100]")));
    }
    let k = contaminated_count(gamma_pct, n);
    let mut from_adversary = vec![false; n];
    for i in sample_indices(rng, n, k) {
        from_adversary[i] = true;
    }
    let cap = target.max_len.max(adversary.max_len);
    let mut cache: HashMap<String, (f64, f64)> = HashMap::new();
    let mut out = Vec::with_capacity(n);
    for (i, &adv) in from_adversary.iter().enumerate() {
        let model = if adv { adversary } else { target };
        let s = sample_text(model, spec, rng)?;
        let (lt, la) = match cache.get(&s.text) {
            Some(&v) => v,
            None => {
                let v = (
                    exact_text_prob(target, spec, &s.text, cap)?.ln(),
                    exact_text_prob(adversary, spec, &s.text, cap)?.ln(),
                );
                cache.insert(s.text.clone(), v);
                v
            }
        };
        let mut sample = ScoredSample::new(format!("{}{i}", labels.id_prefix), s.text);
        sample.tokens = s.tokens.0;
        sample.logprob.insert(labels.target.clone(), lt);
        sample.logprob.insert(labels.adversary.clone(), la);
        sample.provenance = Some(if adv { &labels.adversary } else { &labels.target }.clone());
        out.push(sample);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn abc() -> TokenizerSpec {
        TokenizerSpec::from_words("abc", &["a", "b", "ab"]).unwrap()
    }

    fn hand_model() -> ToyModel {
        let src = "order 1\nmax_len 4\nrow - : 1=0.5 3=0.5\nrow 1 : 2=0.5 eos=0.5\nrow 2 : eos=1\nrow 3 : eos=1\n";
        ToyModel::parse(src, &abc()).unwrap()
    }

    #[test]
    fn hand_model_probabilities() {
        let t = abc();
        let m = hand_model();
        assert_eq!(exact_text_prob(&m, &t, "ab", 4).unwrap(), 0.5 + 0.25);
        assert_eq!(exact_text_prob(&m, &t, "a", 4).unwrap(), 0.25);
        assert_eq!(exact_text_prob(&m, &t, "b", 4).unwrap(), 0.0);
        let pmf = text_pmf(&m, &t, 4).unwrap();
        assert_eq!(pmf.prob("ab"), 0.75);
        assert_eq!(pmf.prob("a"), 0.25);
        assert_eq!(pmf.dropped, 0.0);
    }

    #[test]
    fn eos_is_absorbing() {
        let m = hand_model();
        assert_eq!(m.prob(&[1, 4], 4), 1.0);
        assert_eq!(m.prob(&[1, 4], 1), 0.0);
    }

    #[test]
    fn backoff_to_shorter_context() {
        let t = abc();
        let src = "order 2\nrow - : 1=0.5 eos=0.5\nrow 1 1 : eos=1\n";
        let m = ToyModel::parse(src, &t).unwrap();
        assert_eq!(m.prob(&[1, 1], 4), 1.0);
        assert_eq!(m.prob(&[2, 1], 4), 0.5);
    }

    #[test]
    fn file_errors() {
        let t = abc();
        assert!(ToyModel::parse("row 1 : eos=1\n", &t).is_err());
        assert!(ToyModel::parse("row - : 1=0.5\n", &t).is_err());
        assert!(matches!(ToyModel::parse("row - : 9=1\n", &t), Err(Error::UnknownToken(9))));
        assert!(matches!(ToyModel::parse("bogus\n", &t), Err(Error::Parse { line: 1, .. })));
        assert!(ToyModel::parse("order 1\nrow 1 2 : eos=1\nrow - : eos=1\n", &t).is_err());
    }

    #[test]
    fn file_round_trip() {
        let t = toy_tokenizer();
        let mut m = random_model(&t, &RandomModelSpec::default(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        m.tokenizer_path = Some("toy.tok".into());
        let again = ToyModel::parse(&m.to_file_string(), &t).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn random_models_enumerate_almost_all_mass() {
        let t = toy_tokenizer();
        let m = random_model(&t, &RandomModelSpec::default(), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let pmf = text_pmf(&m, &t, EXACT_LEN_CAP).unwrap();
        let total: f64 = pmf.probs.values().sum();
        assert!(pmf.dropped < 1e-6, "dropped {}", pmf.dropped);
        assert!((total + pmf.dropped - 1.0).abs() < 1e-9);
        for (text, &p) in pmf.probs.iter().take(200) {
            let exact = exact_text_prob(&m, &t, text, EXACT_LEN_CAP).unwrap();
            assert!((exact - p).abs() <= 1e-12 * p.max(1e-300) + 1e-18, "{text}: {exact} vs {p}");
        }
    }

    #[test]
    fn exact_prob_is_guarded() {
        let t = toy_tokenizer();
        let m = random_model(&t, &RandomModelSpec::default(), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert!(matches!(exact_text_prob(&m, &t, "a", 13), Err(Error::OracleIntractable(_))));
    }

    #[test]
    fn interpolation_endpoints() {
        let t = toy_tokenizer();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_model(&t, &RandomModelSpec::default(), &mut rng).unwrap();
        let b = random_model(&t, &RandomModelSpec::default(), &mut rng).unwrap();
        let m0 = interpolate(&a, &b, 0.0, &t).unwrap();
        for (ctx, _) in a.rows() {
            for id in t.token_ids().chain([t.eos_id()]) {
                assert!((m0.prob(ctx, id) - a.prob(ctx, id)).abs() < 1e-15);
            }
        }
        let pa = text_pmf(&a, &t, 6).unwrap();
        let pb = text_pmf(&b, &t, 6).unwrap();
        let pm = text_pmf(&interpolate(&a, &b, 0.5, &t).unwrap(), &t, 6).unwrap();
        assert!(pa.l1(&pm) < pa.l1(&pb));
    }

    #[test]
    fn contamination_replaces_exact_count() {
        let t = toy_tokenizer();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_model(&t, &RandomModelSpec::default(), &mut rng).unwrap();
        let b = random_model(&t, &RandomModelSpec::default(), &mut rng).unwrap();
        let labels = ContaminationLabels::default();
        for (gamma, n, want) in [(0.0, 50, 0), (10.0, 55, 5), (29.0, 100, 29), (100.0, 7, 7)] {
            let d = make_contaminated_dataset(&a, &b, &t, gamma, n, &labels, &mut rng).unwrap();
            assert_eq!(d.len(), n);
            let adv = d.iter().filter(|s| s.provenance.as_deref() == Some("adversary")).count();
            assert_eq!(adv, want, "gamma {gamma} n {n}");
            for s in &d {
                assert!(s.logprob.contains_key("target") && s.logprob.contains_key("adversary"));
                assert_eq!(t.decode_ids(&s.tokens).unwrap(), s.text);
            }
        }
    }

    #[test]
    fn sampling_matches_exact_distribution() {
        let t = abc();
        let m = hand_model();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 20_000;
        let hits = (0..n)
            .filter(|_| sample_text(&m, &t, &mut rng).unwrap().text == "ab")
            .count();
        let f = hits as f64 / n as f64;
        assert!((f - 0.75).abs() < 0.02, "{f}");
    }
}
