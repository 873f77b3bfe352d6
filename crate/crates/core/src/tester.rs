//! The composed identity tester: a global test on the bucket-count CDFs and a
//! collision chi-square local test inside every bucket.

use std::collections::BTreeSet;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bucketing::{bucketize, empirical_ell_weighted, theoretical_ell, BucketPartition, EllChoice};
use crate::error::{Error, Result};
use crate::multiset::Multiset;
use crate::oracle::{EvalOracle, SampOracle};
use crate::stats::{collision_chi_term, max_cdf_gap, EmpiricalHistogram};

/// Relative slack on the soundness inequalities, so boundary configs survive rounding.
const CONSTRAINT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Reject,
}

impl Verdict {
    pub fn is_reject(self) -> bool {
        self == Verdict::Reject
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Accept => "accept",
            Verdict::Reject => "reject",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EllMode {
    /// `⌊log₂(|Ω|/(c1·eps2))⌋ + 1`; needs `domain_size`.
    Theoretical,
    /// Leftover-fraction search over the reference sample.
    Empirical,
}

/// Units in which the local statistic is compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocalScale {
    /// `Z` against the ℓ1-scale threshold as is.
    Raw,
    /// `Z` against `m·t²/2`, `m` the mean per-side bucket count, i.e. `sqrt(2Z/m) ≥ t`.
    Count,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestConfig {
    pub eps1: f64,
    pub eps2: f64,
    pub delta: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    /// Defaults to `delta / 2`.
    pub delta1: Option<f64>,
    /// Defaults to `delta / (2·ell)`.
    pub delta2: Option<f64>,
    pub tau: f64,
    pub ell_mode: EllMode,
    pub ell_max: usize,
    pub domain_size: Option<u64>,
    pub big_c: f64,
    pub local_scale: LocalScale,
    /// When false, soundness-constraint violations are reported instead of raised.
    pub strict: bool,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            eps1: 0.0,
            eps2: 0.5,
            delta: 0.2,
            c1: 0.05,
            c2: 0.25,
            c3: 0.2,
            c4: 0.45,
            delta1: None,
            delta2: None,
            tau: 0.05,
            ell_mode: EllMode::Empirical,
            ell_max: crate::bucketing::DEFAULT_ELL_MAX,
            domain_size: None,
            big_c: 1.0,
            local_scale: LocalScale::Count,
            strict: true,
        }
    }
}

impl TestConfig {
    pub fn delta1(&self) -> f64 {
        self.delta1.unwrap_or(self.delta / 2.0)
    }

    pub fn delta2(&self, ell: usize) -> f64 {
        self.delta2.unwrap_or(self.delta / (2.0 * ell as f64))
    }

    /// Threshold of the global test.
    pub fn global_thresh(&self, ell: usize) -> f64 {
        let l = ell as f64;
        (self.c3 * self.eps2 + l * self.eps1) / (2.0 * l)
    }

    /// ℓ1-scale threshold of the local test for a bucket of reference mass `ref_mass`.
    pub fn local_thresh(&self, ell: usize, ref_mass: f64) -> f64 {
        let l = ell as f64;
        (self.c4 * self.eps2 + 2.0 * l * self.eps1) / (2.0 * l * ref_mass)
    }
}

/// One failed soundness constraint (or basic parameter range).
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// c1 + c2 + c3/2 + c4 ≤ 1
    ConstantSum(f64),
    /// eps1 ≤ (c2 − c1)·eps2
    LeftoverGap,
    /// eps1 ≤ c3·eps2/ell
    BucketMassGap,
    /// 2·eps1 ≤ c4·eps2/ell
    ConditionalGap,
    /// delta1 + ell·delta2 ≤ 1/5
    FailureBudget(f64),
    /// c4 ≥ 2·c3
    C4AtLeastTwiceC3,
    /// eps2 ≤ 1, the range the guarantee covers
    Eps2AboveOne,
    Range(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ConstantSum(s) => write!(f, "c1 + c2 + c3/2 + c4 = {s} > 1"),
            Violation::LeftoverGap => f.write_str("eps1 ≤ (c2 − c1)·eps2"),
            Violation::BucketMassGap => f.write_str("eps1 ≤ c3·eps2/ell"),
            Violation::ConditionalGap => f.write_str("2·eps1 ≤ c4·eps2/ell"),
            Violation::FailureBudget(s) => write!(f, "delta1 + ell·delta2 = {s} > 1/5"),
            Violation::C4AtLeastTwiceC3 => f.write_str("c4 ≥ 2c3"),
            Violation::Eps2AboveOne => f.write_str("eps2 ≤ 1"),
            Violation::Range(s) => f.write_str(s),
        }
    }
}

fn le(a: f64, b: f64) -> bool {
    a <= b + CONSTRAINT_SLACK * b.abs().max(1.0)
}

/// Every violated constraint for `cfg` at bucket count `ell`.
pub fn validate_config(cfg: &TestConfig, ell: usize) -> Vec<Violation> {
    let mut out = Vec::new();
    let l = ell.max(1) as f64;
    if !(cfg.eps1 >= 0.0 && cfg.eps1 < cfg.eps2) {
        out.push(Violation::Range(format!(
            "need 0 ≤ eps1 < eps2, got eps1 = {}, eps2 = {}",
            cfg.eps1, cfg.eps2
        )));
    }
    if cfg.eps2 > 1.0 {
        out.push(Violation::Eps2AboveOne);
    }
    for (name, v) in [
        ("c1", cfg.c1),
        ("c2", cfg.c2),
        ("c3", cfg.c3),
        ("c4", cfg.c4),
        ("big_c", cfg.big_c),
        ("delta", cfg.delta),
    ] {
        if !(v > 0.0) {
            out.push(Violation::Range(format!("{name} must be positive, got {v}")));
        }
    }
    if !(cfg.tau > 0.0 && cfg.tau <= 1.0) {
        out.push(Violation::Range(format!("tau must lie in (0, 1], got {}", cfg.tau)));
    }
    let sum = cfg.c1 + cfg.c2 + 0.5 * cfg.c3 + cfg.c4;
    if !le(sum, 1.0) {
        out.push(Violation::ConstantSum(sum));
    }
    if !le(cfg.eps1, (cfg.c2 - cfg.c1) * cfg.eps2) {
        out.push(Violation::LeftoverGap);
    }
    if !le(cfg.eps1, cfg.c3 * cfg.eps2 / l) {
        out.push(Violation::BucketMassGap);
    }
    if !le(2.0 * cfg.eps1, cfg.c4 * cfg.eps2 / l) {
        out.push(Violation::ConditionalGap);
    }
    let budget = cfg.delta1() + l * cfg.delta2(ell.max(1));
    if !le(budget, 0.2) {
        out.push(Violation::FailureBudget(budget));
    }
    if !le(2.0 * cfg.c3, cfg.c4) {
        out.push(Violation::C4AtLeastTwiceC3);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SamplePlan {
    /// Samples from each distribution for the bucket-mass estimates.
    pub n1: u64,
    /// Samples in total for the per-bucket tests.
    pub n2: u64,
}

impl SamplePlan {
    pub fn max(&self) -> u64 {
        self.n1.max(self.n2)
    }
}

pub fn plan_sample_sizes(cfg: &TestConfig, ell: usize, domain_size: u64) -> Result<SamplePlan> {
    let violations = validate_config(cfg, ell);
    if !violations.is_empty() {
        return Err(Error::ConfigViolation(violations.iter().map(ToString::to_string).collect()));
    }
    let l = ell as f64;
    let (e1, e2) = (cfg.eps1, cfg.eps2);
    let eta = f64::min(
        ((cfg.c2 - cfg.c1) * e2 - e1) / 4.0,
        (cfg.c3 * e2 - l * e1) / (4.0 * l),
    );
    if !(eta > 0.0) {
        return Err(Error::InfeasibleGap(eta));
    }
    let n1 = (8.0 / (eta * eta) * (4.0 / cfg.delta1()).ln()).ceil();

    let omega = domain_size as f64;
    let ratio = e1 / (e2 * e2);
    let c4 = cfg.c4;
    let tester_term = cfg.big_c
        * (16.0 * l * l / (c4 * c4) * omega * ratio * ratio
            + 8.0 * l / c4 * omega * ratio
            + 4.0 * l * l / (c4 * c4) * omega.sqrt() / (e2 * e2));
    let n2 = (f64::max(l / (cfg.c3 * e2), tester_term) * (2.0 / cfg.delta2(ell)).ln()).ceil();
    Ok(SamplePlan {
        n1: n1 as u64,
        n2: n2 as u64,
    })
}

/// Global test on bucket indices `1..=ell`, each CDF normalized by its own retained count.
pub fn global_test(s: &BucketPartition, t: &BucketPartition, thresh: f64) -> Result<(Verdict, f64)> {
    if s.ell != t.ell {
        return Err(Error::CategoryMismatch {
            left: s.ell,
            right: t.ell,
        });
    }
    if !(thresh > 0.0) {
        return Err(Error::InvalidParameter(format!("global threshold {thresh}")));
    }
    let hist = |p: &BucketPartition| EmpiricalHistogram::new(p.sizes()[1..].to_vec());
    let (hs, ht) = (hist(s), hist(t));
    if hs.total() == 0 {
        return Err(Error::EmptyRetained("S"));
    }
    if ht.total() == 0 {
        return Err(Error::EmptyRetained("T"));
    }
    let stat = max_cdf_gap(&hs, &ht, hs.total(), ht.total())?;
    let verdict = if stat > thresh { Verdict::Reject } else { Verdict::Accept };
    Ok((verdict, stat))
}

/// Collision statistic `Z` over the distinct elements of both buckets, in sorted order.
pub fn collision_statistic(s: &Multiset, t: &Multiset) -> f64 {
    let keys: BTreeSet<&str> = s.iter().chain(t.iter()).map(|(x, _)| x.as_str()).collect();
    keys.into_iter()
        .map(|x| collision_chi_term(s.count(x), t.count(x)))
        .fold(0.0, |z, term| z + term)
}

pub fn local_test(s: &Multiset, t: &Multiset, thresh: f64) -> (Verdict, f64) {
    let z = collision_statistic(s, t);
    let verdict = if z >= thresh { Verdict::Reject } else { Verdict::Accept };
    (verdict, z)
}

/// Where the reference samples come from.
pub enum Reference<'a> {
    Samples(&'a Multiset),
    /// Draw `|S|` fresh samples.
    Oracle(&'a dyn SampOracle),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucketResult {
    pub bucket: usize,
    pub s_count: u64,
    pub t_count: u64,
    pub ref_mass: f64,
    pub z: f64,
    /// Threshold `z` was compared with.
    pub thresh: f64,
    /// The ℓ1-scale threshold before any count scaling.
    pub thresh_l1: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub verdict: Verdict,
    pub ell: usize,
    pub ell_capped: bool,
    pub global_stat: f64,
    pub global_thresh: f64,
    pub per_bucket: Vec<BucketResult>,
    /// Leftover fractions of S and T.
    pub leftover_fracs: (f64, f64),
    pub score: f64,
    pub seeds: Vec<u64>,
    pub n_s: u64,
    pub n_t: u64,
    /// ℓ2 norm of the empirical reference distribution (diagnostic only).
    pub t_l2_norm: f64,
    /// Samples in S the oracle scored at zero.
    pub s_zero_mass: u64,
    /// Soundness constraints the config broke; always empty in strict mode.
    pub violations: Vec<String>,
}

impl TestReport {
    /// Index of the first failing stage in evaluation order: `Some(0)` for the
    /// global test, `Some(i)` for bucket `i`.
    pub fn first_failure(&self) -> Option<usize> {
        if self.global_stat > self.global_thresh {
            return Some(0);
        }
        self.per_bucket.iter().find(|b| b.verdict.is_reject()).map(|b| b.bucket)
    }
}

/// Largest ratio of a statistic to its threshold; below one exactly when the test accepts.
pub fn attribution_score(global_stat: f64, global_thresh: f64, locals: &[(f64, f64)]) -> f64 {
    let mut score = (global_stat / global_thresh).max(0.0);
    let mut reject = global_stat > global_thresh;
    for &(z, thresh) in locals {
        score = score.max(z.max(0.0) / thresh);
        reject |= z >= thresh;
    }
    if !reject && score >= 1.0 {
        // the global test accepts at equality
        score = f64::from_bits(1.0f64.to_bits() - 1);
    }
    score
}

fn l2_norm(m: &Multiset) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let n = m.len() as f64;
    m.iter().map(|(_, c)| (c as f64 / n).powi(2)).sum::<f64>().sqrt()
}

/// Runs the full test of `s` against the reference distribution behind `eval`.
pub fn anubis_test(
    s: &Multiset,
    reference: Reference<'_>,
    eval: &dyn EvalOracle,
    cfg: &TestConfig,
    seed: u64,
) -> Result<TestReport> {
    if s.is_empty() {
        return Err(Error::EmptyInput("sample set S is empty"));
    }
    let pre = validate_config(cfg, 1)
        .into_iter()
        .filter(|v| matches!(v, Violation::Range(_)))
        .map(|v| v.to_string())
        .collect::<Vec<_>>();
    if !pre.is_empty() {
        return Err(Error::ConfigViolation(pre));
    }

    let drawn;
    let t = match reference {
        Reference::Samples(t) => t,
        Reference::Oracle(samp) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            drawn = samp.draw_many(s.len(), &mut rng);
            &drawn
        }
    };
    if t.is_empty() {
        return Err(Error::EmptyInput("reference sample set T is empty"));
    }

    let choice = match cfg.ell_mode {
        EllMode::Theoretical => {
            let n = cfg.domain_size.ok_or_else(|| {
                Error::InvalidParameter("theoretical ell needs domain_size".into())
            })?;
            EllChoice {
                ell: theoretical_ell(n, cfg.c1, cfg.eps2)?,
                capped: false,
            }
        }
        EllMode::Empirical => {
            let weighted: Vec<(f64, u64)> = t.iter().map(|(x, c)| (eval.eval(x.as_str()), c)).collect();
            empirical_ell_weighted(&weighted, cfg.tau, cfg.ell_max)?
        }
    };
    let ell = choice.ell;
    let violations: Vec<String> = validate_config(cfg, ell).iter().map(ToString::to_string).collect();
    if cfg.strict && !violations.is_empty() {
        return Err(Error::ConfigViolation(violations));
    }

    let part_s = bucketize(s, eval, ell)?;
    let part_t = bucketize(t, eval, ell)?;
    let global_thresh = cfg.global_thresh(ell);
    let (global_verdict, global_stat) = global_test(&part_s, &part_t, global_thresh)?;

    let per_bucket: Vec<BucketResult> = (1..=ell)
        .map(|i| {
            let (bs, bt) = (&part_s.buckets[i], &part_t.buckets[i]);
            let ref_mass = part_t.ref_mass[i];
            let thresh_l1 = cfg.local_thresh(ell, ref_mass);
            let thresh = match cfg.local_scale {
                LocalScale::Raw => thresh_l1,
                LocalScale::Count => {
                    let m = ((bs.len() + bt.len()) as f64 / 2.0).max(1.0);
                    m * thresh_l1 * thresh_l1 / 2.0
                }
            };
            let (verdict, z) = local_test(bs, bt, thresh);
            BucketResult {
                bucket: i,
                s_count: bs.len(),
                t_count: bt.len(),
                ref_mass,
                z,
                thresh,
                thresh_l1,
                verdict,
            }
        })
        .collect();

    let verdict = if global_verdict.is_reject() || per_bucket.iter().any(|b| b.verdict.is_reject()) {
        Verdict::Reject
    } else {
        Verdict::Accept
    };
    let locals: Vec<(f64, f64)> = per_bucket.iter().map(|b| (b.z, b.thresh)).collect();
    let score = attribution_score(global_stat, global_thresh, &locals);
    Ok(TestReport {
        verdict,
        ell,
        ell_capped: choice.capped,
        global_stat,
        global_thresh,
        per_bucket,
        leftover_fracs: (part_s.leftover_fraction(), part_t.leftover_fraction()),
        score,
        seeds: vec![seed],
        n_s: s.len(),
        n_t: t.len(),
        t_l2_norm: l2_norm(t),
        s_zero_mass: part_s.zero_mass,
        violations,
    })
}

/// Maps LB/UB target-fraction percentages to closeness/farness radii, given the
/// ℓ1 separation between the target model and the alternative source.
pub fn lbub_to_epsilons(lb_pct: f64, ub_pct: f64, separation: f64) -> Result<(f64, f64)> {
    if !(0.0 <= lb_pct && lb_pct < ub_pct && ub_pct <= 100.0) {
        return Err(Error::InvalidParameter(format!("need 0 ≤ lb < ub ≤ 100, got {lb_pct}, {ub_pct}")));
    }
    if !(separation > 0.0 && separation <= 2.0) {
        return Err(Error::InvalidParameter(format!("separation {separation} outside (0, 2]")));
    }
    Ok(((1.0 - ub_pct / 100.0) * separation, (1.0 - lb_pct / 100.0) * separation))
}
