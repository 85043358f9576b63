//! `mvgsa`: model fitting, Sobol' analysis, convergence studies and
//! sensitivity-aware Bayesian optimization from the command line.

mod commands;
mod error;
mod evaluator;
mod manifest;
mod settings;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::parser::ValueSource;
use clap::{ArgMatches, Args, CommandFactory, Parser, Subcommand};
use mvgsa::benchfns::GridRule;

use crate::error::{CliError, CliResult};
use crate::settings::{load_config, normalize_key, Settings};

#[derive(Parser)]
#[command(
    name = "mvgsa",
    version,
    about = "Mixed-variable sensitivity analysis and Bayesian optimization"
)]
struct Cli {
    /// Flat `key = value` configuration file; flags override its entries.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Root seed of every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one LVGP per response column of a dataset.
    Fit(FitArgs),
    /// Sobol' indices of a named evaluator or a fitted model.
    Gsa(GsaArgs),
    /// Multi-objective Bayesian optimization.
    Bo(BoArgs),
    /// Convergence study on a discretized test function.
    Validate(ValidateArgs),
    /// Dump a design as CSV.
    Sample(SampleArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Dataset CSV (`x_<name>`, `t_<name>`, `y_<k>` columns).
    #[arg(long)]
    data: Option<String>,
    /// Design space JSON.
    #[arg(long)]
    space: Option<String>,
    /// Fraction of rows held out for the RMSE report (0 disables).
    #[arg(long)]
    holdout_frac: Option<String>,
    #[arg(long)]
    starts: Option<String>,
    #[arg(long)]
    max_iters: Option<String>,
    #[arg(long)]
    nugget: Option<String>,
    /// Add the level-statistics start.
    #[arg(long)]
    data_start: Option<String>,
}

#[derive(Args)]
struct GsaArgs {
    /// `direct:<name>` or `model:<file>`.
    #[arg(long)]
    evaluator: Option<String>,
    #[arg(long)]
    n_base: Option<String>,
    #[arg(long)]
    resamples: Option<String>,
    /// Level grid of discretized evaluators: endpoints | midpoints.
    #[arg(long)]
    grid: Option<String>,
}

#[derive(Args)]
struct BoArgs {
    /// vanilla | sensitivity-aware
    #[arg(long)]
    framework: Option<String>,
    #[arg(long)]
    evaluator: Option<String>,
    #[arg(long)]
    doe_n: Option<String>,
    #[arg(long)]
    stage1_iters: Option<String>,
    /// Evaluations after the DOE.
    #[arg(long)]
    budget: Option<String>,
    /// CSV of the known front; the run stops once it is fully evaluated.
    #[arg(long)]
    oracle_front: Option<String>,
    #[arg(long)]
    patience: Option<String>,
    #[arg(long)]
    starts: Option<String>,
    #[arg(long)]
    max_iters: Option<String>,
    #[arg(long)]
    refit_starts: Option<String>,
    #[arg(long)]
    reoptimize_every: Option<String>,
    #[arg(long)]
    gsa_n_base: Option<String>,
    /// tsi-fraction:<f> | top-k:<k>
    #[arg(long)]
    focus_rule: Option<String>,
}

#[derive(Args)]
struct ValidateArgs {
    /// ishigami | hartmann6
    #[arg(long)]
    function: Option<String>,
    /// Comma-separated level counts.
    #[arg(long)]
    levels: Option<String>,
    /// Comma-separated seeds (default: the root seed).
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    train_per_level: Option<String>,
    #[arg(long)]
    train_cap: Option<String>,
    #[arg(long)]
    n_direct: Option<String>,
    #[arg(long)]
    n_meta: Option<String>,
    #[arg(long)]
    holdout_n: Option<String>,
    #[arg(long)]
    starts: Option<String>,
}

#[derive(Args)]
struct SampleArgs {
    /// Design space JSON.
    #[arg(long)]
    space: Option<String>,
    /// Direct evaluator: samples its space and appends its responses.
    #[arg(long)]
    evaluator: Option<String>,
    #[arg(long)]
    n: Option<String>,
    /// doe | sobol
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    scramble: Option<String>,
    #[arg(long)]
    grid: Option<String>,
}

pub fn parse_grid(s: &Settings, default: GridRule) -> CliResult<GridRule> {
    match s.raw("grid") {
        Some(v) => GridRule::parse(v).map_err(|e| CliError::usage(e.to_string())),
        None => Ok(default),
    }
}

/// Values given explicitly on the command line, keyed like the config file.
fn explicit_flags(m: &ArgMatches, known: &[String], into: &mut BTreeMap<String, String>) {
    for id in m.ids() {
        let id = id.as_str();
        // argument-group ids and `config` are not settings
        if !known.contains(&normalize_key(id))
            || m.value_source(id) != Some(ValueSource::CommandLine)
        {
            continue;
        }
        if let Ok(Some(mut vals)) = m.try_get_raw(id) {
            if let Some(v) = vals.next() {
                into.insert(normalize_key(id), v.to_string_lossy().into_owned());
            }
        }
    }
}

fn known_keys(name: &str) -> Vec<String> {
    let cmd = Cli::command();
    let mut keys: Vec<String> = cmd
        .get_arguments()
        .filter_map(|a| a.get_long())
        .filter(|l| *l != "config")
        .map(String::from)
        .collect();
    if let Some(sub) = cmd.find_subcommand(name) {
        keys.extend(
            sub.get_arguments()
                .filter_map(|a| a.get_long())
                .map(String::from),
        );
    }
    keys.sort();
    keys.dedup();
    keys
}

fn dispatch(matches: &ArgMatches) -> CliResult<()> {
    let (name, sub) = matches
        .subcommand()
        .ok_or_else(|| CliError::usage("missing subcommand"))?;
    let config = sub
        .get_one::<PathBuf>("config")
        .or_else(|| matches.get_one::<PathBuf>("config"));
    let file = match config {
        Some(path) => load_config(path)?,
        None => BTreeMap::new(),
    };
    let known = known_keys(name);
    let mut flags = BTreeMap::new();
    explicit_flags(matches, &known, &mut flags);
    explicit_flags(sub, &known, &mut flags);
    let settings = Settings::merge(file, flags, &known)?;

    if let Some(n) = settings.get::<usize>("threads")? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(format!("cannot set thread count: {e}")))?;
    }
    match name {
        "fit" => commands::fit::run(&commands::fit::FitParams::resolve(&settings)?),
        "gsa" => commands::gsa::run(&commands::gsa::GsaParams::resolve(&settings)?),
        "bo" => commands::bo::run(&commands::bo::BoParams::resolve(&settings)?),
        "validate" => {
            commands::validate::run(&commands::validate::ValidateParams::resolve(&settings)?)
        }
        "sample" => commands::sample::run(&commands::sample::SampleParams::resolve(&settings)?),
        other => Err(CliError::usage(format!("unknown subcommand `{other}`"))),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let matches = match Cli::command().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
