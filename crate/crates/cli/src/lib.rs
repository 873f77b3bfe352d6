//! The `anubis` command line, callable in-process through [`run_from`].

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use anubis_core::bucketing::{bucketize, empirical_ell};
use anubis_core::dataio::{load_scored, save_scored, table_eval, texts, write_scored, ScoredSample};
use anubis_core::experiment::{
    builtin_pair, read_results, run_experiment_grid, summarize_auroc, write_auroc, write_results, ExperimentGrid,
};
use anubis_core::oracle::EvalOracle;
use anubis_core::tester::{plan_sample_sizes, validate_config, EllMode, TestConfig};
use anubis_core::tokenizer::{EvalPlus, TokenSeq, TokenizerSpec};
use anubis_core::toy::{exact_text_prob, make_contaminated_dataset, ContaminationLabels, ToyModel, EXACT_LEN_CAP};
use anubis_core::{anubis_test, Reference};

#[derive(Parser)]
#[command(name = "anubis", version, about = "Attribute a sample set to a generative model by identity testing")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Add log-probabilities under a toy model to a scored-sample file.
    Score(ScoreArgs),
    /// Show how samples fall into probability buckets.
    Bucketize(BucketizeArgs),
    /// Test whether a sample set comes from the target model.
    Test(TestArgs),
    /// Draw a contaminated sample set from a target/adversary pair.
    Contaminate(ContaminateArgs),
    /// Run an experiment grid and write the results table.
    Sweep(SweepArgs),
    /// Summarize a results table as per-cell AUROC.
    Auroc(AurocArgs),
    /// Print the sample sizes the guarantee asks for.
    Plan(PlanArgs),
    /// Write the built-in toy tokenizer and model pair to a directory.
    ToyPair(ToyPairArgs),
}

#[derive(Args)]
struct ScoreArgs {
    /// Toy model file; without it the input is validated and copied through.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Vocabulary file; defaults to the model's `tokenizer` line.
    #[arg(long)]
    tokenizer: Option<PathBuf>,
    /// Collision depth for the string likelihood.
    #[arg(long, default_value_t = 2)]
    depth: usize,
    /// Exact string probability instead of the collision-depth estimate.
    #[arg(long)]
    exact: bool,
    /// Key for the new scores; defaults to the model file stem.
    #[arg(long)]
    name: Option<String>,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BucketizeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Model whose log-probabilities place the samples.
    #[arg(long, default_value = "target")]
    target: String,
    #[arg(long, conflicts_with = "tau", required_unless_present = "tau")]
    ell: Option<usize>,
    /// Leftover fraction; the bucket count is chosen from the input itself.
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Args)]
struct TestArgs {
    /// Sample set under test.
    #[arg(long)]
    samples: PathBuf,
    /// Independent samples from the target model.
    #[arg(long)]
    reference: PathBuf,
    /// Model name whose log-probabilities serve as the evaluation oracle.
    #[arg(long, default_value = "target")]
    target: String,
    #[arg(long)]
    eps1: Option<f64>,
    #[arg(long)]
    eps2: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// TOML file with TestConfig fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ContaminateArgs {
    /// Percentage of samples replaced by adversary draws.
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, requires_all = ["adversary", "tokenizer"])]
    target: Option<PathBuf>,
    #[arg(long)]
    adversary: Option<PathBuf>,
    #[arg(long)]
    tokenizer: Option<PathBuf>,
    /// Seed of the built-in pair, used when no model files are given.
    #[arg(long, default_value_t = 0)]
    model_seed: u64,
    #[arg(long, default_value = "target")]
    target_name: String,
    #[arg(long, default_value = "s")]
    id_prefix: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    grid_file: PathBuf,
    /// Overrides the grid seed.
    #[arg(long, env = "ANUBIS_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the AUROC summary here.
    #[arg(long)]
    auroc_out: Option<PathBuf>,
}

#[derive(Args)]
struct AurocArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    domain_size: u64,
    /// Bucket count; defaults to the theoretical choice for the domain.
    #[arg(long)]
    ell: Option<usize>,
    #[arg(long)]
    eps1: Option<f64>,
    #[arg(long)]
    eps2: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ToyPairArgs {
    #[arg(long, default_value_t = 0)]
    model_seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

/// Parses `args` (program name first) and runs the command.
pub fn run_from<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run(Cli::try_parse_from(args)?)
}

/// Runs the command given on the process command line.
pub fn main_entry() -> Result<()> {
    let result = run(Cli::parse());
    if let Err(e) = &result {
        // a closed downstream pipe (e.g. `| head`) is not a failure
        let broken_pipe = e.chain().any(|c| {
            let io = c
                .downcast_ref::<io::Error>()
                .or_else(|| match c.downcast_ref::<anubis_core::Error>() {
                    Some(anubis_core::Error::Io(io)) => Some(io),
                    _ => None,
                });
            io.is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
        });
        if broken_pipe {
            return Ok(());
        }
    }
    result
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Score(a) => score(a),
        Cmd::Bucketize(a) => bucketize_cmd(a),
        Cmd::Test(a) => test(a),
        Cmd::Contaminate(a) => contaminate(a),
        Cmd::Sweep(a) => sweep(a),
        Cmd::Auroc(a) => auroc(a),
        Cmd::Plan(a) => plan(a),
        Cmd::ToyPair(a) => toy_pair(a),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_samples(path: &Path) -> Result<Vec<ScoredSample>> {
    load_scored(path).with_context(|| format!("reading {}", path.display()))
}

fn load_config(path: Option<&Path>, eps1: Option<f64>, eps2: Option<f64>, delta: Option<f64>) -> Result<TestConfig> {
    let mut cfg = match path {
        Some(p) => {
            let src = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&src).with_context(|| format!("parsing {}", p.display()))?
        }
        None => TestConfig::default(),
    };
    if let Some(v) = eps1 {
        cfg.eps1 = v;
    }
    if let Some(v) = eps2 {
        cfg.eps2 = v;
    }
    if let Some(v) = delta {
        cfg.delta = v;
    }
    Ok(cfg)
}

fn load_model(model: &Path, tokenizer: Option<&Path>) -> Result<(TokenizerSpec, ToyModel)> {
    let src = std::fs::read_to_string(model).with_context(|| format!("reading {}", model.display()))?;
    let tok_path = match tokenizer {
        Some(p) => p.to_path_buf(),
        None => {
            let line = src
                .lines()
                .find_map(|l| l.trim().strip_prefix("tokenizer "))
                .context("model names no tokenizer; pass --tokenizer")?;
            model.parent().unwrap_or(Path::new(".")).join(line.trim())
        }
    };
    let spec = TokenizerSpec::load(&tok_path).with_context(|| format!("reading {}", tok_path.display()))?;
    let m = ToyModel::parse(&src, &spec).with_context(|| format!("parsing {}", model.display()))?;
    Ok((spec, m))
}

fn score(a: ScoreArgs) -> Result<()> {
    let mut samples = read_samples(&a.input)?;
    if let Some(model_path) = &a.model {
        let (spec, model) = load_model(model_path, a.tokenizer.as_deref())?;
        let name = match &a.name {
            Some(n) => n.clone(),
            None => model_path
                .file_stem()
                .and_then(|s| s.to_str())
                .context("cannot derive a model name; pass --name")?
                .to_owned(),
        };
        let plan = EvalPlus::new(a.depth);
        for s in &mut samples {
            let sigma = if s.tokens.is_empty() {
                spec.encode(&s.text).with_context(|| format!("sample {}", s.id))?
            } else {
                TokenSeq::new(s.tokens.clone())
            };
            let decoded = spec.decode(&sigma).with_context(|| format!("sample {}", s.id))?;
            if decoded != s.text {
                bail!("sample {}: tokens decode to {decoded:?}, not {:?}", s.id, s.text);
            }
            let lp = if a.exact {
                exact_text_prob(&model, &spec, &s.text, model.max_len().min(EXACT_LEN_CAP))?.ln()
            } else {
                plan.ln_prob(&model, &spec, &sigma)?
            };
            s.tokens = sigma.ids().to_vec();
            s.logprob.insert(name.clone(), lp);
        }
    }
    write_scored(output(a.out.as_deref())?, &samples)?;
    Ok(())
}

fn bucketize_cmd(a: BucketizeArgs) -> Result<()> {
    let samples = read_samples(&a.input)?;
    let eval = table_eval(&samples, &a.target);
    let set = texts(&samples);
    let (ell, capped) = match (a.ell, a.tau) {
        (Some(l), _) => (l, false),
        (None, Some(tau)) => {
            let probs: Vec<f64> = samples.iter().map(|s| eval.eval(&s.text)).collect();
            let c = empirical_ell(&probs, tau, anubis_core::bucketing::DEFAULT_ELL_MAX)?;
            (c.ell, c.capped)
        }
        (None, None) => unreachable!("clap requires one of --ell, --tau"),
    };
    let part = bucketize(&set, &eval, ell)?;
    let summary = serde_json::json!({
        "ell": ell,
        "capped": capped,
        "sizes": part.sizes(),
        "leftover_fraction": part.leftover_fraction(),
        "zero_mass": part.zero_mass,
    });
    let mut out = output(None)?;
    serde_json::to_writer_pretty(&mut out, &summary)?;
    writeln!(out)?;
    Ok(())
}

fn test(a: TestArgs) -> Result<()> {
    let cfg = load_config(a.config.as_deref(), a.eps1, a.eps2, a.delta)?;
    let s = read_samples(&a.samples)?;
    let t = read_samples(&a.reference)?;
    let eval = table_eval(s.iter().chain(&t), &a.target);
    let report = anubis_test(&texts(&s), Reference::Samples(&texts(&t)), &eval, &cfg, a.seed)?;
    eprintln!(
        "{}: score {:.4}, ell {}, global {:.4} / {:.4}",
        report.verdict, report.score, report.ell, report.global_stat, report.global_thresh
    );
    let mut out = output(a.out.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &report)?;
    writeln!(out)?;
    Ok(())
}

fn contaminate(a: ContaminateArgs) -> Result<()> {
    let (spec, target, adversary) = match (&a.target, &a.adversary, &a.tokenizer) {
        (Some(tp), Some(ap), Some(kp)) => {
            let spec = TokenizerSpec::load(kp).with_context(|| format!("reading {}", kp.display()))?;
            let t = ToyModel::load(tp, &spec).with_context(|| format!("reading {}", tp.display()))?;
            let ad = ToyModel::load(ap, &spec).with_context(|| format!("reading {}", ap.display()))?;
            (spec, t, ad)
        }
        _ => builtin_pair(a.model_seed)?,
    };
    let labels = ContaminationLabels {
        target: a.target_name,
        adversary: "adversary".into(),
        id_prefix: a.id_prefix,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let samples = make_contaminated_dataset(&target, &adversary, &spec, a.gamma, a.n, &labels, &mut rng)?;
    match &a.out {
        Some(p) => save_scored(p, &samples).with_context(|| format!("writing {}", p.display()))?,
        None => write_scored(output(None)?, &samples)?,
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let mut grid = ExperimentGrid::load(&a.grid_file).with_context(|| format!("reading {}", a.grid_file.display()))?;
    if let Some(seed) = a.seed {
        grid.seed = seed;
    }
    let rows = run_experiment_grid(&grid)?;
    write_results(output(a.out.as_deref())?, &rows)?;
    if let Some(p) = &a.auroc_out {
        write_auroc(output(Some(p))?, &summarize_auroc(&rows)?)?;
    }
    Ok(())
}

fn auroc(a: AurocArgs) -> Result<()> {
    let f = File::open(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let rows = read_results(BufReader::new(f))?;
    write_auroc(output(a.out.as_deref())?, &summarize_auroc(&rows)?)?;
    Ok(())
}

fn plan(a: PlanArgs) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref(), a.eps1, a.eps2, a.delta)?;
    cfg.domain_size = Some(a.domain_size);
    let ell = match a.ell {
        Some(l) => l,
        None => {
            cfg.ell_mode = EllMode::Theoretical;
            anubis_core::bucketing::theoretical_ell(a.domain_size, cfg.c1, cfg.eps2)?
        }
    };
    let violations = validate_config(&cfg, ell);
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("violated: {v}");
        }
        bail!("configuration breaks {} constraint(s) at ell = {ell}", violations.len());
    }
    let p = plan_sample_sizes(&cfg, ell, a.domain_size)?;
    println!("ell = {ell}");
    println!("n1 = {}", p.n1);
    println!("n2 = {}", p.n2);
    println!("samples per side = {}", p.max());
    Ok(())
}

fn toy_pair(a: ToyPairArgs) -> Result<()> {
    let (spec, mut target, mut adversary) = builtin_pair(a.model_seed)?;
    std::fs::create_dir_all(&a.out_dir)?;
    target.tokenizer_path = Some("toy.tok".into());
    adversary.tokenizer_path = Some("toy.tok".into());
    for (name, body) in [
        ("toy.tok", spec.to_file_string()),
        ("target.model", target.to_file_string()),
        ("adversary.model", adversary.to_file_string()),
    ] {
        let p = a.out_dir.join(name);
        std::fs::write(&p, body).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}
