use std::path::PathBuf;

use mvgsa::benchfns::GridRule;
use mvgsa::gsa::{convergence_study, ConvergenceConfig, TestFamily};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::manifest::Run;
use crate::settings::Settings;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidateParams {
    pub function: TestFamily,
    pub levels: Vec<usize>,
    pub seeds: Vec<u64>,
    pub grid: GridRule,
    pub train_per_level: usize,
    pub train_cap: usize,
    pub n_direct: usize,
    pub n_meta: usize,
    pub holdout_n: usize,
    pub starts: usize,
    pub out: PathBuf,
}

impl ValidateParams {
    pub fn resolve(s: &Settings) -> CliResult<Self> {
        let function = TestFamily::parse(&s.get_or("function", "ishigami".to_string())?)
            .map_err(|e| CliError::usage(e.to_string()))?;
        let d = ConvergenceConfig::new(function, Vec::new());
        let levels = s.list("levels")?.unwrap_or_else(|| vec![2, 5, 10, 20]);
        if levels.is_empty() {
            return Err(CliError::usage("levels must list at least one level count"));
        }
        let seeds = match s.list("seeds")? {
            Some(v) => v,
            None => vec![s.get_or("seed", 0)?],
        };
        Ok(Self {
            function,
            levels,
            seeds,
            grid: crate::parse_grid(s, d.grid)?,
            train_per_level: s.get_or("train-per-level", d.train_per_level)?,
            train_cap: s.get_or("train-cap", d.train_cap)?,
            n_direct: s.get_or("n-direct", d.n_direct)?,
            n_meta: s.get_or("n-meta", d.n_meta)?,
            holdout_n: s.get_or("holdout-n", d.holdout_n)?,
            starts: s.get_or("starts", d.fit.starts)?,
            out: s.get_or("out", PathBuf::from("out"))?,
        })
    }

    fn config(&self) -> ConvergenceConfig {
        let mut cfg = ConvergenceConfig::new(self.function, self.levels.clone());
        cfg.seeds = self.seeds.clone();
        cfg.grid = self.grid;
        cfg.train_per_level = self.train_per_level;
        cfg.train_cap = self.train_cap;
        cfg.n_direct = self.n_direct;
        cfg.n_meta = self.n_meta;
        cfg.holdout_n = self.holdout_n;
        cfg.fit.starts = self.starts;
        cfg
    }
}

pub fn run(p: &ValidateParams) -> CliResult<()> {
    let outputs = ["convergence.csv", "convergence_summary.csv"]
        .map(String::from)
        .to_vec();
    let run = Run::start(&p.out, "validate", p, outputs)?;
    let result = execute(p, &run);
    run.finish(&result)?;
    result
}

fn execute(p: &ValidateParams, run: &Run) -> CliResult<()> {
    let report = convergence_study(&p.config())?;
    report.save_csv(run.path("convergence.csv"))?;
    let summary = run.path("convergence_summary.csv");
    let file = std::fs::File::create(&summary).map_err(|e| CliError::io(&summary, e))?;
    report.write_summary_csv(file)?;
    println!(
        "{:>6} {:>8} {:>5} {:>9} {:>9} {:>10}",
        "levels", "variable", "index", "MV", "True-MV", "continuous"
    );
    for r in report.rows.iter().filter(|r| r.seed == p.seeds[0]) {
        let cont = r
            .continuous
            .map_or_else(|| "-".to_string(), |c| format!("{c:.4}"));
        println!(
            "{:>6} {:>8} {:>5} {:>9.4} {:>9.4} {:>10}",
            r.levels,
            r.variable,
            r.kind.as_str(),
            r.mv,
            r.true_mv,
            cont
        );
    }
    for &l in &p.levels {
        println!(
            "L={l}: max |MV - True-MV| {:.4}, max |True-MV - continuous| {:.4}",
            report.max_mv_error(l),
            report.max_discretization_error(l)
        );
    }
    println!(
        "agreement within 0.05: {:.1}%",
        100.0 * report.agreement_fraction(0.05, 0.10)
    );
    Ok(())
}
