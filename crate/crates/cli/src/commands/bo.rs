use std::path::PathBuf;

use mvgsa::benchfns::GridRule;
use mvgsa::lvgp::FitConfig;
use mvgsa::mobo::{
    keys_of, sensitivity_aware_bo_from, vanilla_bo, BoConfig, BoStatus, BoTrace, FocusRule,
    DEFAULT_STAGE1_ITERS,
};
use mvgsa::sampling::initial_doe;
use mvgsa::Dataset;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::evaluator::{EvaluatorSpec, Loaded};
use crate::manifest::Run;
use crate::settings::Settings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Framework {
    Vanilla,
    SensitivityAware,
}

impl std::str::FromStr for Framework {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "vanilla" => Ok(Framework::Vanilla),
            "sensitivity-aware" => Ok(Framework::SensitivityAware),
            _ => Err("expected vanilla or sensitivity-aware".into()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoParams {
    pub framework: Framework,
    pub evaluator: String,
    pub doe_n: usize,
    pub stage1_iters: usize,
    pub budget: usize,
    pub oracle_front: Option<PathBuf>,
    /// Iterations without a front change before stopping; 0 disables.
    /// Ignored when an oracle front is given.
    pub patience: usize,
    pub starts: usize,
    pub max_iters: usize,
    pub refit_starts: usize,
    pub reoptimize_every: usize,
    pub gsa_n_base: usize,
    pub focus_rule: String,
    pub seed: u64,
    pub out: PathBuf,
}

impl BoParams {
    pub fn resolve(s: &Settings) -> CliResult<Self> {
        let d = BoConfig::default();
        let p = Self {
            framework: s.get_or("framework", Framework::SensitivityAware)?,
            evaluator: s.get_or("evaluator", "direct:blockworld".to_string())?,
            doe_n: s.get_or("doe-n", 16)?,
            stage1_iters: s.get_or("stage1-iters", DEFAULT_STAGE1_ITERS)?,
            budget: s.get_or("budget", 584)?,
            oracle_front: s.get("oracle-front")?,
            patience: s.get_or("patience", 25)?,
            starts: s.get_or("starts", d.fit.starts)?,
            max_iters: s.get_or("max-iters", d.fit.max_iters)?,
            refit_starts: s.get_or("refit-starts", d.refit_starts)?,
            reoptimize_every: s.get_or("reoptimize-every", d.reoptimize_every)?,
            gsa_n_base: s.get_or("gsa-n-base", d.gsa_n_base)?,
            focus_rule: s.get_or("focus-rule", "tsi-fraction:0.5".to_string())?,
            seed: s.get_or("seed", 0)?,
            out: s.get_or("out", PathBuf::from("out"))?,
        };
        parse_focus_rule(&p.focus_rule)?;
        Ok(p)
    }
}

/// `tsi-fraction:<f>` or `top-k:<k>`.
pub fn parse_focus_rule(s: &str) -> CliResult<FocusRule> {
    let bad = || {
        CliError::usage(format!(
            "invalid focus rule `{s}` (tsi-fraction:<f> or top-k:<k>)"
        ))
    };
    let (kind, value) = s.split_once(':').ok_or_else(bad)?;
    match kind {
        "tsi-fraction" => {
            let f: f64 = value.parse().map_err(|_| bad())?;
            if !(f > 0.0 && f <= 1.0) {
                return Err(bad());
            }
            Ok(FocusRule::TsiThreshold(f))
        }
        "top-k" => Ok(FocusRule::TopK(value.parse().map_err(|_| bad())?)),
        _ => Err(bad()),
    }
}

pub fn run(p: &BoParams) -> CliResult<()> {
    let spec = EvaluatorSpec::parse(&p.evaluator)?;
    let outputs = ["trace.csv", "trace.json", "front.csv", "history.csv"]
        .map(String::from)
        .to_vec();
    let run = Run::start(&p.out, "bo", p, outputs)?;
    let result = execute(p, &spec, &run);
    run.finish(&result)?;
    result
}

fn execute(p: &BoParams, spec: &EvaluatorSpec, run: &Run) -> CliResult<()> {
    let bw = match spec.load(GridRule::default())? {
        Loaded::BlockWorld(bw) => bw,
        _ => {
            return Err(CliError::usage(format!(
                "bo needs a multi-objective qualitative evaluator; `{}` is not one (use direct:blockworld)",
                p.evaluator
            )))
        }
    };
    let space = bw.space()?;
    let oracle = match &p.oracle_front {
        Some(path) => Some(keys_of(Dataset::load_csv(&space, path)?.inputs())),
        None => None,
    };
    let cfg = BoConfig {
        fit: FitConfig {
            starts: p.starts,
            max_iters: p.max_iters,
            ..FitConfig::default()
        },
        refit_starts: p.refit_starts,
        reoptimize_every: p.reoptimize_every,
        // benchmark mode stops on the oracle alone
        patience: (p.patience > 0 && oracle.is_none()).then_some(p.patience),
        oracle_front: oracle.clone(),
        gsa_n_base: p.gsa_n_base,
        focus_rule: parse_focus_rule(&p.focus_rule)?,
        ..BoConfig::default()
    };
    let doe = initial_doe(&space, p.doe_n, p.seed)?;
    let trace = match p.framework {
        Framework::Vanilla => vanilla_bo(&bw, &space, &doe, p.budget, p.seed, &cfg)?,
        Framework::SensitivityAware => {
            sensitivity_aware_bo_from(&bw, &space, &doe, p.stage1_iters, p.budget, p.seed, &cfg)?
        }
    };
    write_outputs(&trace, &space, run)?;
    summarize(&trace, oracle.as_deref());
    if let BoStatus::Aborted(msg) = &trace.status {
        return Err(
            mvgsa::Error::FitFailed(format!("run aborted with a partial trace: {msg}")).into(),
        );
    }
    Ok(())
}

fn write_outputs(trace: &BoTrace, space: &mvgsa::MixedDesignSpace, run: &Run) -> CliResult<()> {
    trace.save_csv(run.path("trace.csv"))?;
    let json = run.path("trace.json");
    let text = serde_json::to_string_pretty(trace).map_err(mvgsa::Error::from)?;
    std::fs::write(&json, text).map_err(|e| CliError::io(&json, e))?;
    let archive = trace.archive();
    let front = archive.front();
    let data = Dataset::new(
        space.clone(),
        front.iter().map(|e| e.point.clone()).collect(),
        front.iter().map(|e| e.objectives.clone()).collect(),
    )?;
    data.save_csv(run.path("front.csv"))?;
    let history = run.path("history.csv");
    let file = std::fs::File::create(&history).map_err(|e| CliError::io(&history, e))?;
    trace.write_history_csv(file)?;
    Ok(())
}

fn summarize(trace: &BoTrace, oracle: Option<&[mvgsa::space::PointKey]>) {
    if let Some(f) = &trace.focus {
        println!("focus variables: {}", f.names.join(", "));
    }
    if let Some(opt) = &trace.stage1_optimal {
        println!("first-stage focus combinations kept: {}", opt.len());
    }
    println!("evaluations: {} (status {:?})", trace.len(), trace.status);
    println!("front size: {}", trace.archive().front().len());
    if let Some(front) = oracle {
        match trace.evaluations_to_front(front) {
            Some(n) => println!("full front found after {n} evaluations"),
            None => println!("full front not found"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn focus_rules() {
        assert_eq!(
            parse_focus_rule("tsi-fraction:0.5").unwrap(),
            FocusRule::TsiThreshold(0.5)
        );
        assert_eq!(parse_focus_rule("top-k:2").unwrap(), FocusRule::TopK(2));
        for bad in ["tsi-fraction:0", "tsi-fraction:2", "top-k:x", "half"] {
            assert!(parse_focus_rule(bad).is_err(), "{bad}");
        }
    }
}
