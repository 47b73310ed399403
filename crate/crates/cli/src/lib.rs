//! Command implementations behind the `ctxrec` binary.
//!
//! Every command resolves its flags into a [`RunConfig`], which is embedded in
//! each report it writes so a run can be reproduced from the report alone.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use ctxrec::eval::{self, SweepResult, SweepRole, TopNSystem};
use ctxrec::{
    BaselineModel, ContextSchema, ContextSituation, EvalConfig, EvalReport, GenConfig, PipelineConfig,
    PipelineModel, RatingCube, SomConfig, SplitConfig,
};

/// Exit status for invalid flags or configuration.
pub const EXIT_USAGE: i32 = 1;
/// Exit status for unreadable, malformed or inconsistent data.
pub const EXIT_DATA: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Data(e) => write!(f, "error: {e:#}"),
        }
    }
}

impl From<ctxrec::Error> for CliError {
    fn from(e: ctxrec::Error) -> Self {
        match e {
            ctxrec::Error::InvalidConfig(msg) => CliError::Usage(msg),
            other => CliError::Data(other.into()),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Data(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "ctxrec", version, about = "Context-aware top-N recommendation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic ratings CSV with a ground-truth sidecar.
    Gen(GenArgs),
    /// Split a ratings CSV into train.csv and test.csv.
    Split(CommonArgs),
    /// Train and persist a model from a ratings CSV.
    Train(TrainArgs),
    /// Evaluate a persisted model on a test CSV.
    Eval(EvalArgs),
    /// Sweep the neuron count of one role.
    Sweep(SweepArgs),
    /// Print the top-N list for a user in a context.
    Recommend(RecommendArgs),
    /// Train and evaluate both systems on one split.
    Compare(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Ratings CSV (`user_id,item_id,<dimensions...>,rating`).
    #[arg(long)]
    pub ratings: Option<PathBuf>,
    /// Context schema JSON; the built-in restaurant schema when absent.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 6)]
    pub neurons_phase1: usize,
    #[arg(long, default_value_t = 21)]
    pub neurons_phase3: usize,
    #[arg(long, default_value_t = 19)]
    pub neurons_baseline: usize,
    #[arg(long, default_value_t = ctxrec::som::DEFAULT_EPOCHS)]
    pub epochs: usize,
    #[arg(long, default_value_t = ctxrec::som::DEFAULT_ALPHA0)]
    pub alpha0: f64,
    #[arg(long, default_value_t = 0.8)]
    pub train_frac: f64,
    /// Comma-separated list lengths.
    #[arg(long, value_delimiter = ',', default_values_t = [5, 10, 15, 20, 25, 30])]
    pub topn: Vec<usize>,
    /// Minimum rating counted as relevant.
    #[arg(long, default_value_t = 4)]
    pub threshold: u8,
    #[arg(long, default_value_t = 200)]
    pub sample_users: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub users: Option<usize>,
    #[arg(long)]
    pub items: Option<usize>,
    #[arg(long)]
    pub archetypes: Option<usize>,
    #[arg(long)]
    pub taste_groups: Option<usize>,
    /// Context dependence in [0, 1].
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Expected fraction of (user, situation) pairs with ratings.
    #[arg(long)]
    pub density: Option<f64>,
    #[arg(long)]
    pub ratings_per_situation: Option<usize>,
    #[arg(long)]
    pub noise_sd: Option<f64>,
    #[arg(long)]
    pub user_spread: Option<f64>,
    #[arg(long)]
    pub selectivity: Option<f64>,
    /// Forbid a user from rating the same item in two situations.
    #[arg(long)]
    pub no_repeat_items: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    Pipeline,
    Baseline,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum, default_value_t = System::Pipeline)]
    pub system: System,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Directory written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Ratings the model was trained on.
    #[arg(long)]
    pub train: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RoleArg {
    Phase1,
    Phase3,
    Baseline,
    All,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum, default_value_t = RoleArg::All)]
    pub role: RoleArg,
    /// Smallest neuron count; the role's default range when absent.
    #[arg(long)]
    pub min: Option<usize>,
    #[arg(long)]
    pub max: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct RecommendArgs {
    /// Directory written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub user: String,
    #[arg(long)]
    pub day: Option<String>,
    #[arg(long)]
    pub time: Option<String>,
    #[arg(long)]
    pub companion: Option<String>,
    #[arg(long)]
    pub weather: Option<String>,
    /// Extra `dimension=value` pairs for custom schemas.
    #[arg(long = "context", value_name = "DIM=VALUE")]
    pub context: Vec<String>,
    #[arg(long, default_value_t = 10)]
    pub topn: usize,
}

/// Fully resolved configuration of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub schema_path: Option<PathBuf>,
    pub ratings_path: Option<PathBuf>,
    pub phase1: SomConfig,
    pub phase3: SomConfig,
    pub baseline: SomConfig,
    pub split: SplitConfig,
    pub eval: EvalConfig,
    pub gen: GenConfig,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn resolve(args: &CommonArgs) -> CliResult<Self> {
        let schema = match &args.schema {
            Some(path) => ContextSchema::from_json_file(path)?,
            None => ContextSchema::restaurant_default(),
        };
        let som = |n: usize| SomConfig {
            epochs: args.epochs,
            alpha0: args.alpha0,
            ..SomConfig::new(n, args.seed)
        };
        let cfg = RunConfig {
            seed: args.seed,
            schema_path: args.schema.clone(),
            ratings_path: args.ratings.clone(),
            phase1: som(args.neurons_phase1),
            phase3: som(args.neurons_phase3),
            baseline: som(args.neurons_baseline),
            split: SplitConfig {
                train_fraction: args.train_frac,
                seed: args.seed,
            },
            eval: EvalConfig {
                top_ns: args.topn.clone(),
                relevance_threshold: args.threshold,
                sample_users: args.sample_users,
                seed: args.seed,
            },
            gen: GenConfig {
                schema,
                seed: args.seed,
                ..GenConfig::default()
            },
            out: args.out.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.phase1.validate()?;
        self.phase3.validate()?;
        self.baseline.validate()?;
        self.split.validate()?;
        self.eval.validate()?;
        self.gen.validate()?;
        Ok(())
    }

    pub fn schema(&self) -> &ContextSchema {
        &self.gen.schema
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            phase1: self.phase1.clone(),
            phase3: self.phase3.clone(),
        }
    }

    fn load_ratings(&self) -> CliResult<RatingCube> {
        let path = self
            .ratings_path
            .as_ref()
            .ok_or_else(|| CliError::Usage("--ratings is required".into()))?;
        load_cube(path, self.schema())
    }
}

fn load_cube(path: &Path, schema: &ContextSchema) -> CliResult<RatingCube> {
    Ok(RatingCube::load_csv(path, schema.clone())?)
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(CliError::Data)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).context("serializing report")?;
    text.push('\n');
    fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(CliError::Data)
}

fn write_with<F>(path: &Path, f: F) -> CliResult<()>
where
    F: FnOnce(&mut Vec<u8>) -> ctxrec::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    fs::write(path, buf)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(CliError::Data)
}

/// Writes `<prefix>_report.json`, `<prefix>_topn.csv` and `<prefix>_clusters.csv`.
fn write_report(cfg: &RunConfig, prefix: &str, report: &EvalReport) -> CliResult<()> {
    #[derive(Serialize)]
    struct Doc<'a> {
        config: &'a RunConfig,
        report: &'a EvalReport,
    }
    let dir = &cfg.out;
    write_json(&dir.join(format!("{prefix}_report.json")), &Doc { config: cfg, report })?;
    write_with(&dir.join(format!("{prefix}_topn.csv")), |b| report.write_topn_csv(b))?;
    write_with(&dir.join(format!("{prefix}_clusters.csv")), |b| report.write_cluster_csv(b))?;
    Ok(())
}

fn print_summary(out: &mut dyn Write, report: &EvalReport) -> CliResult<()> {
    let w = |e: std::io::Error| CliError::Data(e.into());
    writeln!(
        out,
        "{}: {} users sampled, {} units evaluated",
        report.system, report.sampled_users, report.evaluated_units
    )
    .map_err(w)?;
    for (n, s) in &report.per_n {
        writeln!(out, "  F1@{n:<3} {:.4}", s.mean_f1).map_err(w)?;
    }
    Ok(())
}

pub fn cmd_gen(args: &GenArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut cfg = RunConfig::resolve(&args.common)?;
    let g = &mut cfg.gen;
    macro_rules! set {
        ($field:ident, $value:expr) => {
            if let Some(v) = $value {
                g.$field = v;
            }
        };
    }
    set!(n_users, args.users);
    set!(n_items, args.items);
    set!(n_archetypes, args.archetypes);
    set!(n_taste_groups, args.taste_groups);
    set!(gamma, args.gamma);
    set!(density, args.density);
    set!(ratings_per_active_situation, args.ratings_per_situation);
    set!(noise_sd, args.noise_sd);
    set!(user_spread, args.user_spread);
    set!(selectivity, args.selectivity);
    if args.no_repeat_items {
        g.repeat_items = false;
    }
    cfg.validate()?;
    let data = ctxrec::generate(&cfg.gen)?;
    create_dir(&cfg.out)?;
    data.save(&cfg.out)?;
    write_json(&cfg.out.join("gen_config.json"), &cfg)?;
    writeln!(
        out,
        "generated {} ratings for {} users and {} items in {}",
        data.cube.len(),
        data.cube.users().len(),
        data.cube.items().len(),
        cfg.out.display()
    )
    .map_err(|e| CliError::Data(e.into()))?;
    Ok(())
}

pub fn cmd_split(args: &CommonArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = RunConfig::resolve(args)?;
    let cube = cfg.load_ratings()?;
    let (train, test) = eval::split(&cube, &cfg.split)?;
    create_dir(&cfg.out)?;
    train.save_csv(&cfg.out.join("train.csv"))?;
    test.save_csv(&cfg.out.join("test.csv"))?;
    writeln!(out, "train {} ratings, test {} ratings", train.len(), test.len())
        .map_err(|e| CliError::Data(e.into()))?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct ModelInfo {
    system: System,
    config: RunConfig,
}

const MODEL_INFO: &str = "model.json";

pub fn cmd_train(args: &TrainArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = RunConfig::resolve(&args.common)?;
    let cube = cfg.load_ratings()?;
    create_dir(&cfg.out)?;
    match args.system {
        System::Pipeline => {
            let model = PipelineModel::train(&cube, &cfg.pipeline())?;
            model.save(&cfg.out)?;
            writeln!(
                out,
                "pipeline: {} users, {} virtual users",
                model.clusterings.len(),
                model.space.len()
            )
        }
        System::Baseline => {
            let model = BaselineModel::train(&cube, &cfg.baseline)?;
            model.save(&cfg.out)?;
            writeln!(out, "baseline: {} users", model.flat.users.len())
        }
    }
    .map_err(|e| CliError::Data(e.into()))?;
    write_json(
        &cfg.out.join(MODEL_INFO),
        &ModelInfo {
            system: args.system,
            config: cfg.clone(),
        },
    )
}

enum Loaded {
    Pipeline(PipelineModel),
    Baseline(BaselineModel),
}

impl Loaded {
    fn open(dir: &Path) -> CliResult<Self> {
        let path = dir.join(MODEL_INFO);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let info: ModelInfo =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(match info.system {
            System::Pipeline => Loaded::Pipeline(PipelineModel::load(dir)?),
            System::Baseline => Loaded::Baseline(BaselineModel::load(dir)?),
        })
    }

    fn system(&self) -> &dyn TopNSystem {
        match self {
            Loaded::Pipeline(m) => m,
            Loaded::Baseline(m) => m,
        }
    }

    fn schema(&self) -> &ContextSchema {
        match self {
            Loaded::Pipeline(m) => &m.schema,
            Loaded::Baseline(m) => &m.schema,
        }
    }
}

pub fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut cfg = RunConfig::resolve(&args.common)?;
    let model = Loaded::open(&args.model)?;
    cfg.gen.schema = model.schema().clone();
    let test = cfg.load_ratings()?;
    let train = load_cube(&args.train, cfg.schema())?;
    let report = eval::evaluate(model.system(), &train, &test, &cfg.eval)?;
    create_dir(&cfg.out)?;
    write_report(&cfg, &report.system, &report)?;
    print_summary(out, &report)
}

pub fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = RunConfig::resolve(&args.common)?;
    let cube = cfg.load_ratings()?;
    let (train, validation) = eval::split(&cube, &cfg.split)?;
    let roles: &[SweepRole] = match args.role {
        RoleArg::Phase1 => &[SweepRole::Phase1],
        RoleArg::Phase3 => &[SweepRole::Phase3],
        RoleArg::Baseline => &[SweepRole::Baseline],
        RoleArg::All => &[SweepRole::Phase1, SweepRole::Phase3, SweepRole::Baseline],
    };
    create_dir(&cfg.out)?;
    let mut results = Vec::new();
    for &role in roles {
        let default = role.default_range();
        let range = args.min.unwrap_or(*default.start())..=args.max.unwrap_or(*default.end());
        let result = eval::neuron_sweep(&train, &validation, range, role, &cfg.pipeline(), &cfg.baseline, &cfg.eval)?;
        let name = role_name(role);
        write_with(&cfg.out.join(format!("sweep_{name}.csv")), |b| write_curve(b, &result))?;
        writeln!(out, "{name}: best {} neurons", result.best_neurons).map_err(|e| CliError::Data(e.into()))?;
        results.push(result);
    }
    #[derive(Serialize)]
    struct Doc<'a> {
        config: &'a RunConfig,
        sweeps: &'a [SweepResult],
    }
    write_json(
        &cfg.out.join("sweep_report.json"),
        &Doc {
            config: &cfg,
            sweeps: &results,
        },
    )
}

fn role_name(role: SweepRole) -> &'static str {
    match role {
        SweepRole::Phase1 => "phase1",
        SweepRole::Phase3 => "phase3",
        SweepRole::Baseline => "baseline",
    }
}

/// `neurons,mean_f1`; an empty score means nothing was evaluable.
fn write_curve(buf: &mut Vec<u8>, result: &SweepResult) -> ctxrec::Result<()> {
    let mut text = String::from("neurons,mean_f1\n");
    for p in &result.curve {
        let f = p.mean_f1_at_10.map(|v| v.to_string()).unwrap_or_default();
        text.push_str(&format!("{},{f}\n", p.neurons));
    }
    buf.extend_from_slice(text.as_bytes());
    Ok(())
}

/// Builds the online context from the named flags plus `--context` pairs.
fn online_context(args: &RecommendArgs, schema: &ContextSchema) -> CliResult<ContextSituation> {
    let mut given: BTreeMap<String, String> = BTreeMap::new();
    for (name, value) in [
        ("day", &args.day),
        ("time", &args.time),
        ("companion", &args.companion),
        ("weather", &args.weather),
    ] {
        if let Some(v) = value {
            given.insert(name.to_string(), v.clone());
        }
    }
    for pair in &args.context {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--context expects DIM=VALUE, got {pair:?}")))?;
        given.insert(k.to_string(), v.to_string());
    }
    let mut names = Vec::new();
    for dim in schema.dimensions() {
        let value = given
            .remove(&dim.name)
            .ok_or_else(|| CliError::Usage(format!("missing context value for {}", dim.name)))?;
        if dim.index_of(&value).is_none() {
            return Err(CliError::Usage(format!(
                "unknown value {value:?} for {}; expected one of {}",
                dim.name,
                dim.values.join(", ")
            )));
        }
        names.push(value);
    }
    if let Some(extra) = given.keys().next() {
        return Err(CliError::Usage(format!("schema has no dimension named {extra}")));
    }
    Ok(schema.situation_by_names(&names)?)
}

pub fn cmd_recommend(args: &RecommendArgs, out: &mut dyn Write) -> CliResult<()> {
    if args.topn == 0 {
        return Err(CliError::Usage("--topn must be positive".into()));
    }
    let model = Loaded::open(&args.model)?;
    let list = match &model {
        Loaded::Pipeline(m) => {
            let ctx = online_context(args, &m.schema)?;
            m.recommend(&args.user, &ctx, args.topn)?
        }
        Loaded::Baseline(m) => m.recommend(&args.user, args.topn)?,
    };
    for (rank, (item, score)) in list.iter().enumerate() {
        writeln!(out, "{}\t{item}\t{score:.4}", rank + 1).map_err(|e| CliError::Data(e.into()))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparePoint {
    pub n: usize,
    pub pipeline_f1: Option<f64>,
    pub baseline_f1: Option<f64>,
    pub difference: Option<f64>,
}

pub fn cmd_compare(args: &CommonArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = RunConfig::resolve(args)?;
    let cube = cfg.load_ratings()?;
    let (train, test) = eval::split(&cube, &cfg.split)?;
    let pipeline = PipelineModel::train(&train, &cfg.pipeline())?;
    let baseline = BaselineModel::train(&train, &cfg.baseline)?;
    let p = eval::evaluate(&pipeline, &train, &test, &cfg.eval)?;
    let b = eval::evaluate(&baseline, &train, &test, &cfg.eval)?;
    let points: Vec<ComparePoint> = cfg
        .eval
        .top_ns
        .iter()
        .map(|&n| {
            let (pf, bf) = (p.mean_f1(n), b.mean_f1(n));
            ComparePoint {
                n,
                pipeline_f1: pf,
                baseline_f1: bf,
                difference: pf.zip(bf).map(|(x, y)| x - y),
            }
        })
        .collect();

    create_dir(&cfg.out)?;
    write_report(&cfg, "pipeline", &p)?;
    write_report(&cfg, "baseline", &b)?;
    #[derive(Serialize)]
    struct Doc<'a> {
        config: &'a RunConfig,
        comparison: &'a [ComparePoint],
        pipeline: &'a EvalReport,
        baseline: &'a EvalReport,
    }
    write_json(
        &cfg.out.join("compare_report.json"),
        &Doc {
            config: &cfg,
            comparison: &points,
            pipeline: &p,
            baseline: &b,
        },
    )?;
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut csv = String::from("n,pipeline_f1,baseline_f1,difference\n");
    for pt in &points {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            pt.n,
            cell(pt.pipeline_f1),
            cell(pt.baseline_f1),
            cell(pt.difference)
        ));
    }
    write_with(&cfg.out.join("compare_topn.csv"), |buf| {
        buf.extend_from_slice(csv.as_bytes());
        Ok(())
    })?;

    let w = |e: std::io::Error| CliError::Data(e.into());
    writeln!(out, "   N  pipeline  baseline  difference").map_err(w)?;
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
    for pt in &points {
        writeln!(
            out,
            "{:>4}  {:>8}  {:>8}  {:>10}",
            pt.n,
            fmt(pt.pipeline_f1),
            fmt(pt.baseline_f1),
            pt.difference.map(|x| format!("{x:+.4}")).unwrap_or_else(|| "-".into())
        )
        .map_err(w)?;
    }
    Ok(())
}

/// Runs one parsed command, writing the human-readable summary to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    match &cli.command {
        Command::Gen(a) => cmd_gen(a, out),
        Command::Split(a) => cmd_split(a, out),
        Command::Train(a) => cmd_train(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Recommend(a) => cmd_recommend(a, out),
        Command::Compare(a) => cmd_compare(a, out),
    }
}
