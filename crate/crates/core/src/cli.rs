//! Command-line front end: `ingest`, `train`, `attack`, `sweep`, `verify`, `report`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use crate::attack::{attack, AttackConfig, Objective};
use crate::data::{find_schema, load_csv, stats_sidecar_path, DatasetSchema, LabeledDataset, Split};
use crate::error::{Error, Result};
use crate::experiment::{merge_reports, resolve_dataset, svg_plot, SweepSpec};
use crate::fairness::format_num;
use crate::model::Activation;
use crate::theory::{
    check_corollary1, check_corollary2, eq6_check, theorem1_diagnostic, theorem2_diagnostic, DiagnosticConfig,
};
use crate::train::{evaluate, train_dataset, TrainConfig, TrainMode, TrainedModel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_MISSING: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "fairadv", version, about = "Fairness attacks and fair adversarial training on tabular data")]
pub struct Cli {
    /// Seed for splits (ingest) or model initialization and batching (train).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads for sweeps and diagnostics (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Emit SVG plots where a command supports them.
    #[arg(long, global = true)]
    pub plot: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize a raw CSV into the dataset text format plus a stats sidecar.
    Ingest(IngestArgs),
    /// Train a model in one of the six modes.
    Train(TrainArgs),
    /// Attack a trained model on the test split.
    Attack(AttackArgs),
    /// Train/attack over modes, seeds and an epsilon grid.
    Sweep(SweepArgs),
    /// Run the theory checks for a trained model.
    Verify(VerifyArgs),
    /// Merge sweep files into one table with mean and spread across seeds.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Builtin dataset id (adult, compas, german) or a file written by `ingest`.
    pub dataset: String,
    /// Split seed used when `dataset` is a builtin id.
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
    /// Training fraction used when `dataset` is a builtin id.
    #[arg(long, default_value_t = 0.8)]
    pub split: f64,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Builtin dataset id; optional when --csv and --schema are given.
    pub dataset: Option<String>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Training fraction.
    #[arg(long, default_value_t = 0.8)]
    pub split: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    pub mode: String,
    /// Training perturbation level (default depends on the dataset).
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Comma-separated hidden widths.
    #[arg(long)]
    pub hidden: Option<String>,
    #[arg(long)]
    pub activation: Option<String>,
    #[arg(long)]
    pub inner_iterations: Option<usize>,
    #[arg(long)]
    pub inner_step: Option<f64>,
    /// Model file name inside --out.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ObjectiveArg {
    Accuracy,
    Di,
    Eod,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Accuracy => Objective::Accuracy,
            ObjectiveArg::Di => Objective::Di,
            ObjectiveArg::Eod => Objective::Eod,
        }
    }
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    #[command(flatten)]
    pub data: DataArgs,
    pub model: PathBuf,
    #[arg(long, value_enum, default_value = "di")]
    pub objective: ObjectiveArg,
    #[arg(long, default_value_t = 0.5)]
    pub eps: f64,
    #[arg(long, default_value_t = 20)]
    pub iterations: usize,
    /// Step size (default: eps / 10).
    #[arg(long)]
    pub step: Option<f64>,
    /// Disable the [0, 1] feature box.
    #[arg(long)]
    pub no_clip: bool,
    /// Keep one-hot coordinates fixed.
    #[arg(long)]
    pub freeze_categorical: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated training modes.
    #[arg(long, default_value = "erm,fair_adv_in")]
    pub modes: String,
    #[arg(long, value_enum, default_value = "di")]
    pub objective: ObjectiveArg,
    /// Comma-separated epsilon grid (default 0.00 to 0.50 step 0.05).
    #[arg(long)]
    pub eps_grid: Option<String>,
    /// Comma-separated model seeds.
    #[arg(long, default_value = "0,1,2")]
    pub seeds: String,
    #[arg(long, default_value_t = 20)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0.1)]
    pub step_ratio: f64,
    /// Training perturbation level for adversarial modes.
    #[arg(long)]
    pub train_eps: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Directory with `<mode>_s<seed>.model` files to evaluate instead of training.
    #[arg(long)]
    pub models: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Cor1,
    Cor2,
    Thm1,
    Thm2,
    Eq6,
    All,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub data: DataArgs,
    pub model: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    pub suite: Suite,
    #[arg(long, default_value_t = 0.2)]
    pub eps: f64,
    #[arg(long, default_value_t = 20)]
    pub iterations: usize,
    #[arg(long, default_value_t = 2000)]
    pub lipschitz_pairs: usize,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// File name inside --out.
    #[arg(long, default_value = "report.csv")]
    pub name: String,
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::MissingArtifact(_) | Error::Io { .. } => EXIT_MISSING,
        Error::Numeric(_) | Error::Training { .. } => EXIT_NUMERIC,
        _ => EXIT_USAGE,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: &Cli) -> Result<i32> {
    match cli.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            pool.install(|| dispatch(cli))
        }
        None => dispatch(cli),
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    std::fs::create_dir_all(&cli.out).map_err(|e| Error::io(&cli.out, e))?;
    match &cli.command {
        Command::Ingest(a) => cmd_ingest(cli, a),
        Command::Train(a) => cmd_train(cli, a),
        Command::Attack(a) => cmd_attack(cli, a),
        Command::Sweep(a) => cmd_sweep(cli, a),
        Command::Verify(a) => cmd_verify(cli, a),
        Command::Report(a) => cmd_report(cli, a),
    }
}

fn write(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::io(path, e))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<T>().map_err(|_| Error::Config(format!("bad {what} `{p}`"))))
        .collect()
}

fn dataset_of(d: &DataArgs) -> Result<(LabeledDataset, String)> {
    resolve_dataset(&d.dataset, d.split, d.data_seed)
}

fn cmd_ingest(cli: &Cli, a: &IngestArgs) -> Result<i32> {
    let (schema_path, id) = match (&a.schema, &a.dataset) {
        (Some(p), _) => {
            if !p.is_file() {
                return Err(Error::Schema(format!("schema file {} not found", p.display())));
            }
            let id = a.dataset.clone().unwrap_or_else(|| {
                p.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset").to_string()
            });
            (p.clone(), id)
        }
        (None, Some(id)) => (find_schema(id, None)?, id.clone()),
        (None, None) => return Err(Error::Config("give a dataset id or --schema".into())),
    };
    let schema = DatasetSchema::load(&schema_path)?;
    let csv = a
        .csv
        .clone()
        .or_else(|| schema.data_file.clone())
        .ok_or_else(|| Error::Config("no --csv given and the schema names no data_file".into()))?;
    let ds = load_csv(&csv, &schema, a.split, cli.seed)?;
    let path = cli.out.join(format!("{id}.csv"));
    ds.write_csv(&path)?;
    ds.write_stats(stats_sidecar_path(&path))?;
    let c = ds.group_counts(Split::Train);
    println!(
        "{id}: {} train / {} test rows, {} features (train cells y0a0={} y0a1={} y1a0={} y1a1={})",
        ds.indices(Split::Train).len(),
        ds.indices(Split::Test).len(),
        ds.n_features(),
        c.cells[0][0],
        c.cells[0][1],
        c.cells[1][0],
        c.cells[1][1]
    );
    Ok(EXIT_OK)
}

fn cmd_train(cli: &Cli, a: &TrainArgs) -> Result<i32> {
    let mode: TrainMode = a.mode.parse()?;
    let (ds, id) = dataset_of(&a.data)?;
    let mut cfg = TrainConfig::for_dataset(mode, &id);
    cfg.seed = cli.seed;
    if let Some(e) = a.eps {
        cfg.train_epsilon = e;
    }
    if let Some(l) = a.lambda {
        cfg.lambda = l;
    }
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(l) = a.lr {
        cfg.lr = l;
    }
    if let Some(b) = a.batch_size {
        cfg.batch_size = b;
    }
    if let Some(h) = &a.hidden {
        cfg.hidden = parse_list(h, "hidden width")?;
    }
    if let Some(act) = &a.activation {
        cfg.activation = act.parse::<Activation>()?;
    }
    if let Some(t) = a.inner_iterations {
        cfg.inner_iterations = t;
    }
    if a.inner_step.is_some() {
        cfg.inner_step = a.inner_step;
    }
    let trained = train_dataset(&ds, &cfg)?;
    let name = a.name.clone().unwrap_or_else(|| format!("{id}_{}.model", mode.name()));
    let model_path = cli.out.join(&name);
    trained.save(&model_path)?;
    let log_path = cli.out.join(format!("{}.log.csv", name.strip_suffix(".model").unwrap_or(&name)));
    let mut log = format!(
        "# mode={} train_eps={} inner_step={} inner_iterations={} lambda={} seed={}\n",
        mode.name(),
        format_num(cfg.train_epsilon),
        format_num(cfg.inner_step()),
        cfg.inner_iterations,
        format_num(cfg.lambda),
        cfg.seed
    );
    log.push_str(&trained.log.to_csv());
    write(&log_path, &log)?;
    let test = evaluate(&trained, &ds.slice(Split::Test))?;
    println!(
        "{} on {id}: final loss {}, test accuracy {}, DI {}, EOd {} -> {}",
        mode.name(),
        format_num(trained.log.last().map_or(f64::NAN, |e| e.loss)),
        format_num(test.accuracy),
        format_num(test.di_hard),
        format_num(test.eod_hard),
        model_path.display()
    );
    Ok(EXIT_OK)
}

fn load_model(path: &Path) -> Result<TrainedModel> {
    if !path.is_file() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    TrainedModel::load(path)
}

fn cmd_attack(cli: &Cli, a: &AttackArgs) -> Result<i32> {
    let (ds, id) = dataset_of(&a.data)?;
    let trained = load_model(&a.model)?;
    let test = ds.slice(Split::Test);
    let objective: Objective = a.objective.into();
    let mut cfg = AttackConfig::new(objective, a.eps).with_snapshots(trained.decision_thresholds());
    cfg.iterations = a.iterations;
    if let Some(s) = a.step {
        cfg.step = s;
    }
    cfg.clip_box = !a.no_clip;
    if a.freeze_categorical {
        cfg.frozen = Some(ds.categorical_mask.clone());
    }
    let result = attack(&trained.model, &test, &cfg)?;
    let tag = format!("{id}_{}_eps{}", objective.name(), format_num(a.eps));
    let mut trace = format!(
        "# attack={} epsilon={} step={} iterations={}\n",
        objective.name(),
        format_num(cfg.epsilon),
        format_num(cfg.step),
        cfg.iterations
    );
    trace.push_str(&result.trace_csv());
    write(&cli.out.join(format!("attack_{tag}.csv")), &trace)?;
    let mut adv = ds.clone();
    for (k, &row) in test.rows.iter().enumerate() {
        adv.features.row_mut(row).assign(&result.adversarial.row(k));
    }
    adv.write_csv(cli.out.join(format!("adversarial_{tag}.csv")))?;
    if cli.plot {
        let pts: Vec<(f64, f64)> = result.objective_trace.iter().enumerate().map(|(t, &v)| (t as f64, v)).collect();
        let svg = svg_plot(&format!("{id}: {} attack", objective.name()), "iteration", "objective", &[(objective.name().into(), pts)]);
        write(&cli.out.join(format!("attack_{tag}.svg")), &svg)?;
    }
    let r = result.final_report().expect("snapshots recorded");
    println!(
        "{} attack eps {}: accuracy {}, DI {}, EOd {}",
        objective.name(),
        format_num(a.eps),
        format_num(r.accuracy),
        format_num(r.di_hard),
        format_num(r.eod_hard)
    );
    Ok(EXIT_OK)
}

fn cmd_sweep(cli: &Cli, a: &SweepArgs) -> Result<i32> {
    let mut spec = SweepSpec::new(a.data.dataset.clone(), cli.out.clone());
    spec.modes = parse_list::<String>(&a.modes, "mode")?
        .iter()
        .map(|m| m.parse())
        .collect::<Result<_>>()?;
    spec.objective = a.objective.into();
    if let Some(g) = &a.eps_grid {
        spec.epsilons = parse_list(g, "epsilon")?;
    }
    spec.seeds = parse_list(&a.seeds, "seed")?;
    spec.iterations = a.iterations;
    spec.step_ratio = a.step_ratio;
    if let Some(e) = a.train_eps {
        spec.train.train_epsilon = e;
    }
    if let Some(e) = a.epochs {
        spec.train.epochs = e;
    }
    spec.models_dir = a.models.clone();
    spec.plot = cli.plot;
    let report = crate::experiment::sweep(&spec, a.data.data_seed)?;
    let flagged = report.rows.iter().filter(|r| r.flag.is_some()).count();
    println!("sweep: {} rows ({} flagged) in {}", report.rows.len(), flagged, cli.out.display());
    Ok(EXIT_OK)
}

fn cmd_verify(cli: &Cli, a: &VerifyArgs) -> Result<i32> {
    let (ds, _) = dataset_of(&a.data)?;
    let trained = load_model(&a.model)?;
    let model = &trained.model;
    let test = ds.slice(Split::Test);
    let thresholds = trained.decision_thresholds();
    let want = |s: Suite| a.suite == Suite::All || a.suite == s;
    let attack_cfg = |o: Objective| AttackConfig::new(o, a.eps).with_budget(a.eps / 10.0, a.iterations);
    let mut hard_ok = true;

    if want(Suite::Cor1) {
        let mut out = String::from("input,lhs,rhs,holds\n");
        let clean = model.predict(test.features.view())?;
        let mut inputs = vec![("clean".to_string(), clean)];
        for o in [Objective::Di, Objective::Eod] {
            let r = attack(model, &test, &attack_cfg(o))?;
            inputs.push((format!("{}_attack", o.name()), r.adversarial_soft));
        }
        for (name, soft) in &inputs {
            let c = check_corollary1(soft.view(), &test.labels, &test.sensitive)?;
            hard_ok &= c.holds;
            writeln!(out, "{name},{},{},{}", format_num(c.lhs), format_num(c.rhs), c.holds).unwrap();
        }
        write(&cli.out.join("cor1.csv"), &out)?;
    }
    if want(Suite::Cor2) {
        let audit = check_corollary2(model, &test, thresholds)?;
        hard_ok &= audit.holds();
        write(&cli.out.join("cor2.csv"), &audit.to_csv())?;
        println!("alignment audit: {}", if audit.holds() { "all fractions 1.0" } else { "MISMATCH" });
    }
    let mut dcfg = DiagnosticConfig::new(a.eps);
    dcfg.iterations = a.iterations;
    dcfg.lipschitz_pairs = a.lipschitz_pairs;
    dcfg.thresholds = thresholds;
    dcfg.seed = cli.seed;
    if want(Suite::Thm1) {
        let d = theorem1_diagnostic(model, &test, &dcfg)?;
        write(&cli.out.join("thm1.csv"), &d.to_csv())?;
        println!("first theorem: {} pairs, {} bound violations", d.pairs().count(), d.violations());
    }
    if want(Suite::Thm2) {
        let d = theorem2_diagnostic(model, &test, &dcfg)?;
        write(&cli.out.join("thm2.csv"), &d.to_csv())?;
        println!("second theorem: {} pairs, {} bound violations", d.pairs().count(), d.violations());
    }
    if want(Suite::Eq6) {
        let c = eq6_check(model, &test, &attack_cfg(Objective::Di))?;
        hard_ok &= c.holds;
        let out = format!(
            "epsilon,lhs,rhs,clean_di,xi_term,holds\n{},{},{},{},{},{}\n",
            format_num(a.eps),
            format_num(c.lhs),
            format_num(c.rhs),
            format_num(c.clean_di),
            format_num(c.xi_term),
            c.holds
        );
        write(&cli.out.join("eq6.csv"), &out)?;
    }
    if hard_ok {
        Ok(EXIT_OK)
    } else {
        eprintln!("a hard property failed");
        Ok(EXIT_NUMERIC)
    }
}

fn cmd_report(cli: &Cli, a: &ReportArgs) -> Result<i32> {
    for p in &a.inputs {
        if !p.is_file() {
            return Err(Error::MissingArtifact(p.clone()));
        }
    }
    let table = merge_reports(&a.inputs)?;
    write(&cli.out.join(&a.name), &table)?;
    print!("{table}");
    Ok(EXIT_OK)
}
