use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use balkit::dataset::SyntheticSpec;
use balkit::harness::{
    parse_jsonl, plot_svg, run_suite, CurveGroup, ExperimentConfig, ScenarioSource,
};
use balkit::oracle;

#[derive(Parser)]
#[command(name = "balkit", version, about = "Pool-based Bayesian active learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and emit its JSONL learning curve
    Run(RunArgs),
    /// Run each config several times and compare final accuracies
    Suite(SuiteArgs),
    /// Execute the brute-force oracle batteries
    OracleCheck(OracleArgs),
    /// Render SVG learning curves from JSONL result files
    Plot(PlotArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Full experiment config (JSON); flags below override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario manifest JSON (alternative to --config)
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Synthetic scenario spec JSON (alternative to --config)
    #[arg(long)]
    synthetic: Option<PathBuf>,
    #[arg(long)]
    algorithm: Option<String>,
    /// Acquisition iterations
    #[arg(long, visible_alias = "T")]
    t: Option<usize>,
    /// Budget per iteration
    #[arg(long, visible_alias = "B")]
    b: Option<usize>,
    #[arg(long)]
    initial_labeled: Option<usize>,
    /// Posterior sample count
    #[arg(long)]
    k: Option<usize>,
    /// Universe count (parbals-epig only)
    #[arg(long)]
    m: Option<usize>,
    /// Temperature for the stochastic variants
    #[arg(long)]
    beta: Option<f64>,
    /// Prior variance
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    val_subsample: Option<usize>,
    /// Write the JSONL learning curve here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Append per-iteration acquisition scores as CSV rows
    #[arg(long)]
    scores_out: Option<PathBuf>,
}

#[derive(Args)]
struct SuiteArgs {
    /// Experiment config JSON; repeat the flag to compare several
    #[arg(long, required = true)]
    config: Vec<PathBuf>,
    /// Seeds per config
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    /// Write the summary as JSON here (the table always prints)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// Which battery: parbals-mc, bait, batchbald, pairwise-mi, or all
    #[arg(long, default_value = "all")]
    suite: String,
    /// Trials for the parbals-mc battery
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Cases for the bait / batchbald / pairwise-mi batteries
    #[arg(long, default_value_t = 50)]
    cases: usize,
    #[arg(long, default_value_t = 20260301)]
    seed: u64,
}

#[derive(Args)]
struct PlotArgs {
    /// JSONL result file; repeat for several curves
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    /// Output SVG path
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Run(args) => run_command(args),
        Command::Suite(args) => suite_command(args),
        Command::OracleCheck(args) => oracle_command(args),
        Command::Plot(args) => plot_command(args),
    }
}

fn fail(code: u8, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(code)
}

fn build_run_config(args: &RunArgs) -> Result<ExperimentConfig, String> {
    let mut config: Option<ExperimentConfig> = None;
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        config = Some(ExperimentConfig::from_json(&text).map_err(|e| e.to_string())?);
    }
    let scenario = match (&args.manifest, &args.synthetic) {
        (Some(_), Some(_)) => {
            return Err("--manifest and --synthetic are mutually exclusive".into())
        }
        (Some(path), None) => Some(ScenarioSource::Manifest(path.clone())),
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| format!("cannot read synthetic spec {}: {e}", path.display()))?;
            let spec: SyntheticSpec = serde_json::from_str(&text).map_err(|e| e.to_string())?;
            Some(ScenarioSource::Synthetic(spec))
        }
        (None, None) => None,
    };

    let mut config = match (config, scenario) {
        (Some(mut c), s) => {
            if let Some(s) = s {
                c.scenario = s;
            }
            c
        }
        (None, Some(scenario)) => {
            let algorithm = args
                .algorithm
                .as_deref()
                .ok_or("--algorithm is required without --config")?
                .parse()
                .map_err(|e: balkit::Error| e.to_string())?;
            ExperimentConfig {
                scenario,
                algorithm,
                t: args.t.ok_or("--t is required without --config")?,
                b: args.b.ok_or("--b is required without --config")?,
                initial_labeled: args
                    .initial_labeled
                    .ok_or("--initial-labeled is required without --config")?,
                k: args.k.unwrap_or(400),
                m: None,
                beta: None,
                sigma2: args.sigma2.unwrap_or(1.0),
                seed: args.seed.unwrap_or(0),
                val_subsample: None,
                universe_coupling: Default::default(),
            }
        }
        (None, None) => return Err("provide --config, --manifest, or --synthetic".into()),
    };

    if let Some(a) = &args.algorithm {
        config.algorithm = a.parse().map_err(|e: balkit::Error| e.to_string())?;
    }
    if let Some(v) = args.t {
        config.t = v;
    }
    if let Some(v) = args.b {
        config.b = v;
    }
    if let Some(v) = args.initial_labeled {
        config.initial_labeled = v;
    }
    if let Some(v) = args.k {
        config.k = v;
    }
    if args.m.is_some() {
        config.m = args.m;
    }
    if args.beta.is_some() {
        config.beta = args.beta;
    }
    if let Some(v) = args.sigma2 {
        config.sigma2 = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if args.val_subsample.is_some() {
        config.val_subsample = args.val_subsample;
    }
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

fn run_command(args: RunArgs) -> ExitCode {
    let config = match build_run_config(&args) {
        Ok(c) => c,
        Err(e) => return fail(1, e),
    };
    let mut score_file = match &args.scores_out {
        Some(path) => match fs::File::create(path) {
            Ok(f) => Some(f),
            Err(e) => return fail(1, format!("cannot create {}: {e}", path.display())),
        },
        None => None,
    };
    let curve = match balkit::harness::run_experiment_with_scores(
        &config,
        score_file.as_mut().map(|f| f as &mut dyn Write),
    ) {
        Ok(c) => c,
        Err(e) => return fail(2, e),
    };
    let jsonl = curve.to_jsonl();
    match &args.out {
        Some(path) => {
            if let Err(e) = fs::write(path, jsonl) {
                return fail(2, format!("cannot write {}: {e}", path.display()));
            }
        }
        None => print!("{jsonl}"),
    }
    ExitCode::SUCCESS
}

fn suite_command(args: SuiteArgs) -> ExitCode {
    let mut configs = Vec::new();
    for path in &args.config {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => return fail(1, format!("cannot read config {}: {e}", path.display())),
        };
        match ExperimentConfig::from_json(&text) {
            Ok(c) => configs.push(c),
            Err(e) => return fail(1, format!("{}: {e}", path.display())),
        }
    }
    if args.repeats < 2 {
        return fail(1, "--repeats must be at least 2");
    }
    let summary = match run_suite(&configs, args.repeats) {
        Ok(s) => s,
        Err(e) => return fail(2, e),
    };
    print!("{summary}");
    if let Some(path) = &args.out {
        let json = serde_json::to_string_pretty(&summary).expect("serializable summary");
        if let Err(e) = fs::write(path, json) {
            return fail(2, format!("cannot write {}: {e}", path.display()));
        }
    }
    ExitCode::SUCCESS
}

fn oracle_command(args: OracleArgs) -> ExitCode {
    let mut all_passed = true;
    let run_parbals = matches!(args.suite.as_str(), "parbals-mc" | "all");
    let run_bait = matches!(args.suite.as_str(), "bait" | "all");
    let run_batchbald = matches!(args.suite.as_str(), "batchbald" | "all");
    let run_mi = matches!(args.suite.as_str(), "pairwise-mi" | "all");
    if !(run_parbals || run_bait || run_batchbald || run_mi) {
        return fail(
            1,
            format!(
                "unknown suite '{}'; expected parbals-mc, bait, batchbald, pairwise-mi, or all",
                args.suite
            ),
        );
    }
    if run_mi {
        let report = oracle::pairwise_mi_battery(args.cases, args.seed);
        print!("{report}");
        all_passed &= report.passed();
    }
    if run_batchbald {
        let report = oracle::batchbald_battery(args.cases, args.seed);
        print!("{report}");
        all_passed &= report.passed();
    }
    if run_bait {
        let report = oracle::bait_battery(args.cases, args.seed);
        print!("{report}");
        all_passed &= report.passed();
    }
    if run_parbals {
        match oracle::parbals_mc_battery(args.trials, &[1, 4, 16, 64, 256], args.seed) {
            Ok(report) => {
                print!("{report}");
                all_passed &= report.passed();
            }
            Err(e) => return fail(2, e),
        }
    }
    if all_passed {
        ExitCode::SUCCESS
    } else {
        fail(2, "one or more oracle batteries failed")
    }
}

fn plot_command(args: PlotArgs) -> ExitCode {
    let mut groups: Vec<CurveGroup> = Vec::new();
    for path in &args.input {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => return fail(1, format!("cannot read {}: {e}", path.display())),
        };
        let (records, summary) = match parse_jsonl(&text) {
            Ok(parsed) => parsed,
            Err(e) => return fail(1, format!("{}: {e}", path.display())),
        };
        let label = summary
            .map(|s| s.algorithm)
            .unwrap_or_else(|| file_stem(path));
        match groups.iter_mut().find(|g| g.label == label) {
            Some(group) => group.runs.push(records),
            None => groups.push(CurveGroup {
                label,
                runs: vec![records],
            }),
        }
    }
    let svg = match plot_svg(&groups) {
        Ok(s) => s,
        Err(e) => return fail(1, e),
    };
    if let Err(e) = fs::write(&args.out, svg) {
        return fail(2, format!("cannot write {}: {e}", args.out.display()));
    }
    ExitCode::SUCCESS
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}
