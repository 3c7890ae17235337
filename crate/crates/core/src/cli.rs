//! Batch command-line surface. Every subcommand is deterministic given its
//! flags: randomness is governed by `--seed`, outputs land under `--out-dir`,
//! and re-running with identical flags overwrites identical bytes.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bench;
use crate::data::{self, SyntheticSpec};
use crate::error::{Error, Result};
use crate::gradcheck::{self, GradCheckSettings};
use crate::losses::{CnnporConfig, Method};
use crate::net::Activation;
use crate::ordinal::OrdinalDataset;
use crate::trainer::{self, mix_seed, BoundarySpec, Head, SelectOn, TrainConfig};

#[derive(Parser, Debug)]
#[command(
    name = "thor",
    version,
    about = "Threshold-based ordinal regression: train, evaluate and compare ranking-loss models",
    args_override_self = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic ordinal dataset and write it as CSV.
    GenData(GenDataArgs),
    /// Train one method and persist the best checkpoint plus a run report.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset (or one split of it).
    Eval(EvalArgs),
    /// Train several methods on identical splits and tabulate accuracy/MAE.
    Compare(CompareArgs),
    /// Train the ranking loss across a list of margins and emit a CSV series.
    SweepGamma(SweepGammaArgs),
    /// Audit analytic gradients against central finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Dataset source: `synth` or a path to a CSV file of `f1,...,fd,label` rows.
    #[arg(long)]
    data: String,
    /// Number of ordered classes.
    #[arg(long)]
    k: usize,
    /// Synthetic: examples per class.
    #[arg(long, default_value_t = 200)]
    per_class: usize,
    /// Synthetic: feature dimension.
    #[arg(long, default_value_t = 8)]
    d: usize,
    /// Synthetic: latent noise standard deviation.
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    /// Synthetic: probability of corrupting a label by +-1.
    #[arg(long, default_value_t = 0.0)]
    label_noise: f64,
    /// Synthetic: seed of the fixed feature embedding.
    #[arg(long, default_value_t = 7)]
    transform_seed: u64,
    /// CSV: treat the first line as a header row.
    #[arg(long)]
    has_header: bool,
    /// Train/validation/test ratios, comma-separated.
    #[arg(long, default_value = "0.6,0.2,0.2")]
    split: String,
}

impl DataArgs {
    fn load(&self, seed: u64) -> Result<OrdinalDataset> {
        if self.data == "synth" {
            data::generate_synthetic(&SyntheticSpec {
                k: self.k,
                per_class: self.per_class,
                d: self.d,
                noise: self.noise,
                transform_seed: self.transform_seed,
                label_noise: self.label_noise,
                seed: mix_seed(seed, 3),
            })
        } else {
            data::load_csv(Path::new(&self.data), self.k, self.has_header)
        }
    }

    fn ratios(&self) -> Result<(f64, f64, f64)> {
        let parts = parse_f64_list(&self.split)?;
        if parts.len() != 3 {
            return Err(Error::InvalidConfig(format!(
                "--split expects three ratios, got {}",
                parts.len()
            )));
        }
        Ok((parts[0], parts[1], parts[2]))
    }

    fn load_splits(&self, seed: u64) -> Result<(OrdinalDataset, OrdinalDataset, OrdinalDataset)> {
        let ds = self.load(seed)?;
        data::split(&ds, self.ratios()?, mix_seed(seed, 2))
    }
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.02)]
    lr: f64,
    /// Training margin subtracted from each segment edge.
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// Hidden layer widths, comma-separated; `none` for a linear model.
    #[arg(long, default_value = "64,32")]
    hidden: String,
    /// Hidden activation: relu | tanh | identity.
    #[arg(long, default_value = "relu")]
    activation: String,
    /// Validation metric that picks the best epoch: mae | accuracy.
    #[arg(long, default_value = "mae")]
    select_on: String,
    /// Explicit thresholds (k+1 comma-separated values) instead of the default.
    #[arg(long, allow_hyphen_values = true)]
    thresholds: Option<String>,
    /// Train even when 2*gamma exceeds the narrowest segment.
    #[arg(long)]
    allow_infeasible_margin: bool,
    /// Weight of the pairwise term in the cnnpor objective.
    #[arg(long, default_value_t = 1.0)]
    cnnpor_c: f64,
    /// Margin of the cnnpor pairwise hinge.
    #[arg(long, default_value_t = 1.0)]
    pair_margin: f64,
    /// Weight of the ranking term in the hybrid objective.
    #[arg(long, default_value_t = 1.0)]
    hybrid_c: f64,
}

impl FitArgs {
    fn config(&self, method: Method, seed: u64) -> Result<TrainConfig> {
        let boundaries = match &self.thresholds {
            Some(text) => BoundarySpec::Explicit(parse_f64_list(text)?),
            None => BoundarySpec::Default,
        };
        let cfg = TrainConfig {
            method,
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            gamma: self.gamma,
            seed,
            boundaries,
            hidden: parse_widths(&self.hidden)?,
            activation: self.activation.parse::<Activation>()?,
            select_on: self.select_on.parse::<SelectOn>()?,
            allow_infeasible_margin: self.allow_infeasible_margin,
            cnnpor: CnnporConfig::new(self.cnnpor_c, self.pair_margin)?,
            hybrid_c: self.hybrid_c,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct GenDataArgs {
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 200)]
    per_class: usize,
    #[arg(long, default_value_t = 8)]
    d: usize,
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    #[arg(long, default_value_t = 0.0)]
    label_noise: f64,
    #[arg(long, default_value_t = 7)]
    transform_seed: u64,
    /// Write a `f1,...,fd,label` header line.
    #[arg(long)]
    header: bool,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Loss to train: thor | orcnn | coral | cnnpor | hybrid.
    #[arg(long)]
    method: Method,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    fit: FitArgs,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    method: Method,
    /// Inference head for hybrid checkpoints: classification | regression.
    #[arg(long)]
    head: Option<String>,
    /// Explicit thresholds (k+1 values) if the model was trained with them.
    #[arg(long, allow_hyphen_values = true)]
    thresholds: Option<String>,
    /// Portion of the dataset to evaluate: all | train | val | test.
    #[arg(long, default_value = "all")]
    part: String,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Comma-separated method list.
    #[arg(long, default_value = "thor,orcnn,coral,cnnpor")]
    methods: String,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    fit: FitArgs,
    /// Concurrent training jobs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Table format: text | csv.
    #[arg(long, default_value = "text")]
    format: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepGammaArgs {
    /// Comma-separated margin values to train at.
    #[arg(long)]
    gammas: String,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    fit: FitArgs,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    /// `all` or one method name.
    #[arg(long, default_value = "all")]
    method: String,
    /// Random cases per loss.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_f64_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| Error::InvalidConfig(format!("bad number '{t}': {e}")))
        })
        .collect()
}

fn parse_widths(text: &str) -> Result<Vec<usize>> {
    let trimmed = text.trim();
    if trimmed.is_empty() || trimmed == "none" {
        return Ok(Vec::new());
    }
    trimmed
        .split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<usize>()
                .map_err(|e| Error::InvalidConfig(format!("bad width '{t}': {e}")))
        })
        .collect()
}

fn parse_methods(text: &str) -> Result<Vec<Method>> {
    text.split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<Method>())
        .collect()
}

/// Expands `key=value` lines from `--config FILE` into flags inserted ahead
/// of the explicit arguments, which therefore win. `#` starts a comment;
/// boolean keys take `true`/`false`.
fn splice_config_args(argv: Vec<String>) -> Result<Vec<String>> {
    let mut config_path: Option<PathBuf> = None;
    for (index, arg) in argv.iter().enumerate() {
        if arg == "--config" {
            config_path = argv.get(index + 1).map(PathBuf::from);
        } else if let Some(path) = arg.strip_prefix("--config=") {
            config_path = Some(PathBuf::from(path));
        }
    }
    let Some(path) = config_path else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path)?;
    let mut injected = Vec::new();
    for (index, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::InvalidConfig(format!(
                "{}:{}: expected key=value, got '{raw}'",
                path.display(),
                index + 1
            )));
        };
        let key = key.trim();
        let value = value.trim();
        match value {
            "true" => injected.push(format!("--{key}")),
            "false" => {}
            _ => {
                injected.push(format!("--{key}"));
                injected.push(value.to_string());
            }
        }
    }
    // argv = [program, subcommand, flags...]; config flags go right after the
    // subcommand so explicit flags override them.
    if argv.len() < 2 {
        return Ok(argv);
    }
    let mut spliced = argv[..2].to_vec();
    spliced.extend(injected);
    spliced.extend(argv[2..].iter().cloned());
    Ok(spliced)
}

fn eval_part(args: &EvalArgs) -> Result<OrdinalDataset> {
    match args.part.as_str() {
        "all" => args.data.load(args.seed),
        part @ ("train" | "val" | "test") => {
            let (train, val, test) = args.data.load_splits(args.seed)?;
            Ok(match part {
                "train" => train,
                "val" => val,
                _ => test,
            })
        }
        other => Err(Error::InvalidConfig(format!(
            "unknown --part '{other}' (expected all, train, val or test)"
        ))),
    }
}

fn render_metrics(report: &crate::metrics::MetricsReport) -> String {
    let mut line = format!(
        "accuracy={} mae={} n={}",
        report.accuracy, report.mae, report.n
    );
    if let Some(rate) = report.inconsistency_rate {
        line.push_str(&format!(" inconsistency_rate={rate}"));
    }
    line.push('\n');
    line
}

fn run_command(command: Command) -> Result<()> {
    match command {
        Command::GenData(args) => {
            let ds = data::generate_synthetic(&SyntheticSpec {
                k: args.k,
                per_class: args.per_class,
                d: args.d,
                noise: args.noise,
                transform_seed: args.transform_seed,
                label_noise: args.label_noise,
                seed: mix_seed(args.seed, 3),
            })?;
            std::fs::create_dir_all(&args.out_dir)?;
            let path = args.out_dir.join("data.csv");
            data::write_csv(&path, &ds, args.header)?;
            println!("wrote {} examples to {}", ds.len(), path.display());
            Ok(())
        }
        Command::Train(args) => {
            let cfg = args.fit.config(args.method, args.seed)?;
            let (train, val, test) = args.data.load_splits(args.seed)?;
            let outcome = trainer::train(&train, &val, &cfg, &args.out_dir)?;
            let head = trainer::validation_head(&cfg);
            let test_report = trainer::evaluate(&outcome.model, &test, head)?;
            print!("{}", outcome.report.render());
            print!("test: {}", render_metrics(&test_report));
            Ok(())
        }
        Command::Eval(args) => {
            let gamma = 0.0; // the margin plays no role at inference
            let boundaries = match &args.thresholds {
                Some(text) => {
                    let thresholds = parse_f64_list(text)?;
                    if thresholds.len() != args.data.k + 1 {
                        return Err(Error::ThresholdCount {
                            expected: args.data.k + 1,
                            got: thresholds.len(),
                            k: args.data.k,
                        });
                    }
                    crate::ordinal::Boundaries::new(thresholds, gamma)?
                }
                None => crate::ordinal::Boundaries::default_for(args.data.k)?.with_margin(gamma)?,
            };
            let trained = trainer::TrainedModel::load(&args.checkpoint, args.method, boundaries)?;
            let head = args
                .head
                .as_deref()
                .map(|h| h.parse::<Head>())
                .transpose()?;
            let ds = eval_part(&args)?;
            let report = trainer::evaluate(&trained, &ds, head)?;
            let rendered = render_metrics(&report);
            print!("{rendered}");
            if let Some(out_dir) = &args.out_dir {
                std::fs::create_dir_all(out_dir)?;
                std::fs::write(out_dir.join("eval.txt"), rendered)?;
            }
            Ok(())
        }
        Command::Compare(args) => {
            let methods = parse_methods(&args.methods)?;
            if methods.is_empty() {
                return Err(Error::InvalidConfig(
                    "--methods requires at least one method".into(),
                ));
            }
            // The per-method configs are derived inside compare; the base
            // config's method field is a placeholder.
            let cfg = args.fit.config(methods[0], args.seed)?;
            let (train, val, test) = args.data.load_splits(args.seed)?;
            let table = bench::compare(
                &methods,
                &train,
                &val,
                &test,
                &cfg,
                &args.out_dir,
                args.jobs,
            )?;
            let csv = match args.format.as_str() {
                "text" => false,
                "csv" => true,
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "unknown --format '{other}' (expected text or csv)"
                    )))
                }
            };
            bench::write_table(&table, &args.out_dir, csv)?;
            if csv {
                print!("{}", table.render_csv());
            } else {
                print!("{}", table.render_text());
            }
            Ok(())
        }
        Command::SweepGamma(args) => {
            let gammas = parse_f64_list(&args.gammas)?;
            let cfg = args.fit.config(Method::Thor, args.seed)?;
            let (train, val, test) = args.data.load_splits(args.seed)?;
            let points =
                bench::sweep_gamma(&gammas, &train, &val, &test, &cfg, &args.out_dir, args.jobs)?;
            let csv = bench::render_sweep_csv(&points);
            std::fs::write(args.out_dir.join("sweep.csv"), &csv)?;
            print!("{csv}");
            Ok(())
        }
        Command::Gradcheck(args) => {
            let settings = GradCheckSettings {
                k: args.k,
                seeds: args.seeds,
                ..GradCheckSettings::default()
            };
            let reports = if args.method == "all" {
                gradcheck::check_all(&settings)?
            } else {
                vec![gradcheck::check_method(
                    args.method.parse::<Method>()?,
                    &settings,
                )?]
            };
            let mut all_passed = true;
            for report in &reports {
                println!(
                    "{}: max_rel_err={:e} checked={} excluded={} failures={}",
                    report.method,
                    report.max_rel_err,
                    report.checked,
                    report.excluded,
                    report.failures
                );
                all_passed &= report.passed(settings.tolerance);
            }
            if all_passed {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!(
                    "gradient check failed the {} tolerance",
                    settings.tolerance
                )))
            }
        }
    }
}

/// Parses and dispatches; returns the process exit status. 0 on success, 1 on
/// user or configuration errors, 2 on numeric faults.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let argv = match splice_config_args(argv) {
        Ok(argv) => argv,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are successful exits; everything else is a
            // usage error.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_command(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
