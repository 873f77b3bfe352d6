//! Contamination sweeps: build contaminated sample sets over a grid of
//! (γ, LB/UB, n, repetition), test each against the target model and
//! summarize attribution scores as AUROC.
//!
//! # Grid file (TOML)
//!
//! ```toml
//! gammas = [0, 10, 20, 30, 40, 50, 60, 70, 80, 90]
//! lbub_pairs = [[10, 90], [20, 100]]
//! sample_counts = [1000, 2000]
//! repetitions = 20
//! seed = 7
//! target_model = "target"     # key into each sample's logprob map
//! # separation = 1.2          # ℓ1(adversary, target); computed for toy pairs when absent
//!
//! [source]
//! kind = "toy"                # built-in random pair unless model files are given
//! model_seed = 1
//! # tokenizer = "toy.tok"
//! # target = "target.model"
//! # adversary = "adversary.model"
//!
//! # [source]
//! # kind = "pools"
//! # [[source.groups]]
//! # name = "task-1"
//! # target = "task1_target.jsonl"
//! # adversary = "task1_other.jsonl"
//!
//! [test]                      # TestConfig overrides
//! tau = 0.05
//! ```
//!
//! γ is the percentage of samples REPLACED by the adversary, so a run's
//! target fraction is `100 − γ`. A run is positive when that fraction is at
//! least UB, negative when at most LB, and out-of-hypothesis otherwise.
//!
//! Scores are oriented so that higher means more evidence against the target;
//! AUROC is the probability that a negative run outscores a positive one.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataio::{load_scored, table_eval, texts, ScoredSample};
use crate::error::{Error, Result};
use crate::stats::auroc;
use crate::tester::{anubis_test, lbub_to_epsilons, Reference, TestConfig, Verdict};
use crate::tokenizer::TokenizerSpec;
use crate::toy::{
    contaminated_count, make_contaminated_dataset, random_model, text_pmf, toy_tokenizer, ContaminationLabels,
    RandomModelSpec, ToyModel, EXACT_LEN_CAP,
};

pub const RESULTS_HEADER: &str = "group,gamma,lb,ub,n,rep,class,target_frac,verdict,score,ell,global_stat,global_thresh,seed";
pub const AUROC_HEADER: &str = "group,lb,ub,n,positives,negatives,auroc";
/// Group label of the rows pooled over every group.
pub const POOLED: &str = "*";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentGrid {
    pub gammas: Vec<f64>,
    pub lbub_pairs: Vec<(f64, f64)>,
    pub sample_counts: Vec<usize>,
    pub repetitions: usize,
    pub seed: u64,
    #[serde(default = "default_target_name")]
    pub target_model: String,
    #[serde(default)]
    pub separation: Option<f64>,
    /// Raise on soundness-constraint violations instead of recording them.
    #[serde(default)]
    pub strict: bool,
    #[serde(default)]
    pub source: Source,
    #[serde(default)]
    pub test: TestConfig,
}

fn default_target_name() -> String {
    "target".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Source {
    Toy {
        #[serde(default)]
        model_seed: u64,
        #[serde(default)]
        tokenizer: Option<PathBuf>,
        #[serde(default)]
        target: Option<PathBuf>,
        #[serde(default)]
        adversary: Option<PathBuf>,
    },
    Pools {
        groups: Vec<PoolGroup>,
    },
}

impl Default for Source {
    fn default() -> Self {
        Source::Toy {
            model_seed: 0,
            tokenizer: None,
            target: None,
            adversary: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolGroup {
    pub name: String,
    pub target: PathBuf,
    pub adversary: PathBuf,
}

impl ExperimentGrid {
    pub fn parse(src: &str) -> Result<Self> {
        let g: Self = toml::from_str(src).map_err(|e| Error::Parse {
            line: e.span().map(|s| src[..s.start].lines().count().max(1)).unwrap_or(0),
            msg: e.message().to_owned(),
        })?;
        g.check()?;
        Ok(g)
    }

    /// Reads a grid file; relative paths inside it resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut g = Self::parse(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut g.source {
            Source::Toy {
                tokenizer,
                target,
                adversary,
                ..
            } => {
                for p in [tokenizer, target, adversary].into_iter().flatten() {
                    fix(p);
                }
            }
            Source::Pools { groups } => {
                for grp in groups {
                    fix(&mut grp.target);
                    fix(&mut grp.adversary);
                }
            }
        }
        Ok(g)
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        if self.gammas.is_empty() || self.lbub_pairs.is_empty() || self.sample_counts.is_empty() {
            return bad("gammas, lbub_pairs and sample_counts must be nonempty".into());
        }
        if let Some(g) = self.gammas.iter().find(|g| !(0.0..=100.0).contains(*g)) {
            return bad(format!("gamma {g} outside [0, 100]"));
        }
        if self.sample_counts.contains(&0) {
            return bad("sample counts must be positive".into());
        }
        for &(lb, ub) in &self.lbub_pairs {
            lbub_to_epsilons(lb, ub, 1.0)?;
        }
        if let Source::Toy {
            tokenizer,
            target,
            adversary,
            ..
        } = &self.source
        {
            let given = [tokenizer, target, adversary].iter().filter(|p| p.is_some()).count();
            if given != 0 && given != 3 {
                return bad("toy source needs all of tokenizer, target and adversary, or none".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Class {
    Positive,
    Negative,
    OutOfHypothesis,
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Class::Positive => "positive",
            Class::Negative => "negative",
            Class::OutOfHypothesis => "out-of-hypothesis",
        })
    }
}

/// Ground truth for a run replacing `gamma` percent of the target samples.
pub fn classify(gamma: f64, lb: f64, ub: f64) -> Class {
    let target_frac = 100.0 - gamma;
    if target_frac >= ub {
        Class::Positive
    } else if target_frac <= lb {
        Class::Negative
    } else {
        Class::OutOfHypothesis
    }
}

/// One row of the results table. Test columns are empty for out-of-hypothesis runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub group: String,
    pub gamma: f64,
    pub lb: f64,
    pub ub: f64,
    pub n: usize,
    pub rep: usize,
    pub class: Class,
    pub target_frac: f64,
    pub verdict: Option<Verdict>,
    pub score: Option<f64>,
    pub ell: Option<usize>,
    pub global_stat: Option<f64>,
    pub global_thresh: Option<f64>,
    pub seed: u64,
}

impl RunRow {
    fn sort_key(&self) -> impl Ord + '_ {
        let f = |x: f64| OrdF64(x);
        (&self.group, self.n, f(self.gamma), f(self.lb), f(self.ub), self.rep)
    }
}

#[derive(PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Seed of the job identified by `key` under the grid seed.
pub fn derive_seed(seed: u64, key: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(key.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

enum GroupData {
    Toy {
        spec: TokenizerSpec,
        target: ToyModel,
        adversary: ToyModel,
    },
    Pools {
        target: Vec<ScoredSample>,
        adversary: Vec<ScoredSample>,
    },
}

struct Group {
    name: String,
    data: GroupData,
    separation: f64,
}

/// The built-in target/adversary pair over [`toy_tokenizer`].
pub fn builtin_pair(model_seed: u64) -> Result<(TokenizerSpec, ToyModel, ToyModel)> {
    let spec = toy_tokenizer();
    let shape = RandomModelSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(model_seed, "builtin-pair"));
    let target = random_model(&spec, &shape, &mut rng)?;
    let adversary = random_model(&spec, &shape, &mut rng)?;
    Ok((spec, target, adversary))
}

/// Exact ℓ1 distance between the string distributions of two toy models.
pub fn toy_separation(spec: &TokenizerSpec, a: &ToyModel, b: &ToyModel) -> Result<f64> {
    let cap = a.max_len().max(b.max_len()).min(EXACT_LEN_CAP);
    let pa = text_pmf(a, spec, cap)?;
    let pb = text_pmf(b, spec, cap)?;
    Ok(pa.l1(&pb).min(2.0))
}

fn prepare(grid: &ExperimentGrid) -> Result<Vec<Group>> {
    match &grid.source {
        Source::Toy {
            model_seed,
            tokenizer,
            target,
            adversary,
        } => {
            let (spec, t, a) = match (tokenizer, target, adversary) {
                (Some(tp), Some(mp), Some(ap)) => {
                    let spec = TokenizerSpec::load(tp)?;
                    let t = ToyModel::load(mp, &spec)?;
                    let a = ToyModel::load(ap, &spec)?;
                    (spec, t, a)
                }
                _ => builtin_pair(*model_seed)?,
            };
            let separation = match grid.separation {
                Some(s) => s,
                None => toy_separation(&spec, &t, &a)?,
            };
            Ok(vec![Group {
                name: "toy".into(),
                data: GroupData::Toy {
                    spec,
                    target: t,
                    adversary: a,
                },
                separation,
            }])
        }
        Source::Pools { groups } => {
            let separation = grid.separation.ok_or_else(|| {
                Error::InvalidParameter("dataset pools need an explicit `separation`".into())
            })?;
            let max_n = *grid.sample_counts.iter().max().expect("checked nonempty");
            groups
                .iter()
                .map(|g| {
                    let target = load_scored(&g.target)?;
                    let adversary = load_scored(&g.adversary)?;
                    let max_k = grid
                        .gammas
                        .iter()
                        .map(|&gm| contaminated_count(gm, max_n))
                        .max()
                        .unwrap_or(0);
                    if target.len() < 2 * max_n || adversary.len() < max_k {
                        return Err(Error::InvalidParameter(format!(
                            "group {}: need {} target and {max_k} adversary samples, have {} and {}",
                            g.name,
                            2 * max_n,
                            target.len(),
                            adversary.len()
                        )));
                    }
                    Ok(Group {
                        name: g.name.clone(),
                        data: GroupData::Pools { target, adversary },
                        separation,
                    })
                })
                .collect()
        }
    }
}

struct Job<'a> {
    group: &'a Group,
    gamma: f64,
    n: usize,
    rep: usize,
}

impl Job<'_> {
    fn key(&self) -> String {
        format!("{}|{}|{}|{}", self.group.name, self.gamma, self.n, self.rep)
    }

    /// Contaminated set S and reference set T, both scored under the target.
    fn build(&self, target_name: &str, rng: &mut ChaCha8Rng) -> Result<(Vec<ScoredSample>, Vec<ScoredSample>)> {
        match &self.group.data {
            GroupData::Toy {
                spec,
                target,
                adversary,
            } => {
                let labels = ContaminationLabels {
                    target: target_name.to_owned(),
                    adversary: "adversary".into(),
                    id_prefix: "s".into(),
                };
                let s = make_contaminated_dataset(target, adversary, spec, self.gamma, self.n, &labels, rng)?;
                let t_labels = ContaminationLabels {
                    id_prefix: "t".into(),
                    ..labels
                };
                let t = make_contaminated_dataset(target, adversary, spec, 0.0, self.n, &t_labels, rng)?;
                Ok((s, t))
            }
            GroupData::Pools { target, adversary } => {
                let k = contaminated_count(self.gamma, self.n);
                let mut ti: Vec<usize> = (0..target.len()).collect();
                ti.shuffle(rng);
                let mut ai: Vec<usize> = (0..adversary.len()).collect();
                ai.shuffle(rng);
                let mut s: Vec<ScoredSample> = ti[..self.n - k].iter().map(|&i| target[i].clone()).collect();
                s.extend(ai[..k].iter().map(|&i| adversary[i].clone()));
                let t = ti[self.n..2 * self.n].iter().map(|&i| target[i].clone()).collect();
                Ok((s, t))
            }
        }
    }

    fn run(&self, grid: &ExperimentGrid) -> Result<Vec<RunRow>> {
        let seed = derive_seed(grid.seed, &self.key());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (s, t) = self.build(&grid.target_model, &mut rng)?;
        let eval = table_eval(s.iter().chain(&t), &grid.target_model);
        let (ms, mt) = (texts(&s), texts(&t));
        let mut rows = Vec::with_capacity(grid.lbub_pairs.len());
        for &(lb, ub) in &grid.lbub_pairs {
            let class = classify(self.gamma, lb, ub);
            let mut row = RunRow {
                group: self.group.name.clone(),
                gamma: self.gamma,
                lb,
                ub,
                n: self.n,
                rep: self.rep,
                class,
                target_frac: 100.0 - self.gamma,
                verdict: None,
                score: None,
                ell: None,
                global_stat: None,
                global_thresh: None,
                seed,
            };
            if class != Class::OutOfHypothesis {
                let (eps1, eps2) = lbub_to_epsilons(lb, ub, self.group.separation)?;
                let cfg = TestConfig {
                    eps1,
                    eps2,
                    strict: grid.strict,
                    ..grid.test.clone()
                };
                let report = anubis_test(&ms, Reference::Samples(&mt), &eval, &cfg, seed)?;
                row.verdict = Some(report.verdict);
                row.score = Some(report.score);
                row.ell = Some(report.ell);
                row.global_stat = Some(report.global_stat);
                row.global_thresh = Some(report.global_thresh);
            }
            rows.push(row);
        }
        Ok(rows)
    }
}

/// Runs every grid cell; rows come back sorted by (group, n, γ, LB, UB, repetition).
pub fn run_experiment_grid(grid: &ExperimentGrid) -> Result<Vec<RunRow>> {
    grid.check()?;
    let groups = prepare(grid)?;
    let mut jobs = Vec::new();
    for group in &groups {
        for &n in &grid.sample_counts {
            for &gamma in &grid.gammas {
                for rep in 0..grid.repetitions {
                    jobs.push(Job { group, gamma, n, rep });
                }
            }
        }
    }
    let results: Vec<Result<Vec<RunRow>>> = jobs.par_iter().map(|j| j.run(grid)).collect();
    let mut rows = Vec::with_capacity(jobs.len() * grid.lbub_pairs.len());
    for r in results {
        rows.extend(r?);
    }
    rows.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    Ok(rows)
}

/// Separation the grid would use, for reporting.
pub fn grid_separations(grid: &ExperimentGrid) -> Result<Vec<(String, f64)>> {
    Ok(prepare(grid)?.into_iter().map(|g| (g.name, g.separation)).collect())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line: 0,
            msg: format!("{other:?}"),
        },
    }
}

pub fn write_results<W: Write>(writer: W, rows: &[RunRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(RESULTS_HEADER.split(',')).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results<R: Read>(reader: R) -> Result<Vec<RunRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
    if header.join(",") != RESULTS_HEADER {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header `{RESULTS_HEADER}`"),
        });
    }
    r.deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| Error::Parse {
                line: i + 2,
                msg: e.to_string(),
            })
        })
        .collect()
}

/// AUROC of one (group, LB/UB, n) cell; `None` when a class is missing.
#[derive(Debug, Clone, PartialEq)]
pub struct AurocCell {
    pub group: String,
    pub lb: f64,
    pub ub: f64,
    pub n: usize,
    pub positives: usize,
    pub negatives: usize,
    pub auroc: Option<f64>,
}

/// Per-group cells followed by cells pooled over all groups (group [`POOLED`]).
pub fn summarize_auroc(rows: &[RunRow]) -> Result<Vec<AurocCell>> {
    type Key = (String, OrdF64, OrdF64, usize);
    let mut cells: BTreeMap<Key, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut pooled: BTreeMap<Key, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        let Some(score) = r.score else { continue };
        for (map, group) in [(&mut cells, r.group.as_str()), (&mut pooled, POOLED)] {
            let e = map
                .entry((group.to_owned(), OrdF64(r.lb), OrdF64(r.ub), r.n))
                .or_default();
            match r.class {
                Class::Positive => e.0.push(score),
                Class::Negative => e.1.push(score),
                Class::OutOfHypothesis => {}
            }
        }
    }
    let mut out = Vec::new();
    for map in [cells, pooled] {
        for ((group, lb, ub, n), (pos, neg)) in map {
            let value = if pos.is_empty() || neg.is_empty() {
                None
            } else {
                // negatives should outscore positives
                Some(auroc(&neg, &pos)?)
            };
            out.push(AurocCell {
                group,
                lb: lb.0,
                ub: ub.0,
                n,
                positives: pos.len(),
                negatives: neg.len(),
                auroc: value,
            });
        }
    }
    Ok(out)
}

pub fn write_auroc<W: Write>(writer: W, cells: &[AurocCell]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(AUROC_HEADER.split(',')).map_err(csv_err)?;
    for c in cells {
        let value = c.auroc.map_or_else(|| "undefined".to_owned(), |a| a.to_string());
        w.write_record([
            c.group.clone(),
            c.lb.to_string(),
            c.ub.to_string(),
            c.n.to_string(),
            c.positives.to_string(),
            c.negatives.to_string(),
            value,
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(class: Class, score: f64) -> RunRow {
        RunRow {
            group: "g".into(),
            gamma: 0.0,
            lb: 10.0,
            ub: 90.0,
            n: 10,
            rep: 0,
            class,
            target_frac: 100.0,
            verdict: Some(Verdict::Accept),
            score: Some(score),
            ell: Some(3),
            global_stat: Some(0.1),
            global_thresh: Some(0.2),
            seed: 1,
        }
    }

    #[test]
    fn class_mapping_examples() {
        assert_eq!(classify(0.0, 10.0, 90.0), Class::Positive);
        assert_eq!(classify(100.0, 10.0, 90.0), Class::Negative);
        assert_eq!(classify(10.0, 10.0, 90.0), Class::Positive);
        assert_eq!(classify(50.0, 10.0, 90.0), Class::OutOfHypothesis);
        assert_eq!(classify(90.0, 10.0, 90.0), Class::Negative);
    }

    proptest! {
        #[test]
        fn class_mapping_uses_target_fraction(gi in 0usize..=10, lb in 0u32..100, width in 1u32..=100) {
            let gamma = (gi * 10) as f64;
            let ub = (lb + width).min(100) as f64;
            let lb = lb as f64;
            prop_assume!(lb < ub);
            let frac = 100.0 - gamma;
            let c = classify(gamma, lb, ub);
            prop_assert_eq!(c == Class::Positive, frac >= ub);
            prop_assert_eq!(c == Class::Negative, frac <= lb);
            prop_assert_eq!(c == Class::OutOfHypothesis, lb < frac && frac < ub);
        }
    }

    #[test]
    fn four_run_table_matches_auroc() {
        let rows = vec![
            row(Class::Positive, 0.2),
            row(Class::Positive, 0.7),
            row(Class::Negative, 0.5),
            row(Class::Negative, 0.9),
        ];
        let cells = summarize_auroc(&rows).unwrap();
        assert_eq!(cells.len(), 2);
        assert_eq!(cells[0].auroc, Some(auroc(&[0.5, 0.9], &[0.2, 0.7]).unwrap()));
        assert_eq!(cells[0].auroc, Some(0.75));
        assert_eq!(cells[1].group, POOLED);
    }

    #[test]
    fn one_class_cell_is_undefined() {
        let cells = summarize_auroc(&[row(Class::Positive, 0.3)]).unwrap();
        assert_eq!(cells[0].auroc, None);
        let mut buf = Vec::new();
        write_auroc(&mut buf, &cells).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(AUROC_HEADER));
        assert!(text.contains(",undefined\n"));
    }

    #[test]
    fn results_round_trip() {
        let mut skipped = row(Class::OutOfHypothesis, 0.0);
        skipped.score = None;
        skipped.verdict = None;
        skipped.ell = None;
        skipped.global_stat = None;
        skipped.global_thresh = None;
        let rows = vec![row(Class::Positive, 0.1 + 0.2), row(Class::Negative, 1e-300), skipped];
        let mut buf = Vec::new();
        write_results(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&format!("{RESULTS_HEADER}\n")));
        assert!(text.contains(",out-of-hypothesis,"));
        assert_eq!(read_results(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn seeds_depend_on_key() {
        assert_eq!(derive_seed(1, "a"), derive_seed(1, "a"));
        assert_ne!(derive_seed(1, "a"), derive_seed(2, "a"));
        assert_ne!(derive_seed(1, "a"), derive_seed(1, "b"));
    }

    #[test]
    fn grid_parse_and_check() {
        let g = ExperimentGrid::parse(
            "gammas = [0, 100]\nlbub_pairs = [[10, 90]]\nsample_counts = [50]\nrepetitions = 3\nseed = 1\n[test]\ntau = 0.1\n",
        )
        .unwrap();
        assert_eq!(g.test.tau, 0.1);
        assert_eq!(g.source, Source::default());
        assert!(ExperimentGrid::parse("gammas = [0]\nlbub_pairs = [[90, 10]]\nsample_counts = [5]\nrepetitions = 1\nseed = 1\n").is_err());
        assert!(ExperimentGrid::parse("gammas = [0]\nlbub_pairs = [[10, 90]]\nsample_counts = [5]\nrepetitions = 0\nseed = 1\n").is_err());
        assert!(ExperimentGrid::parse("bogus = 1\n").is_err());
    }

    #[test]
    fn small_sweep_labels_and_counts() {
        let g = ExperimentGrid::parse(
            "gammas = [0, 50, 100]\nlbub_pairs = [[10, 90]]\nsample_counts = [60]\nrepetitions = 3\nseed = 5\n",
        )
        .unwrap();
        let rows = run_experiment_grid(&g).unwrap();
        assert_eq!(rows.len(), 9);
        for r in &rows {
            let want = match r.gamma as u32 {
                0 => Class::Positive,
                50 => Class::OutOfHypothesis,
                _ => Class::Negative,
            };
            assert_eq!(r.class, want);
            assert_eq!(r.score.is_some(), want != Class::OutOfHypothesis);
        }
        assert_eq!(run_experiment_grid(&g).unwrap(), rows);
    }
}
