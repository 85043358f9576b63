use std::path::PathBuf;

use mvgsa::benchfns::GridRule;
use mvgsa::gsa::DEFAULT_RESAMPLES;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::evaluator::EvaluatorSpec;
use crate::manifest::Run;
use crate::settings::Settings;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GsaParams {
    pub evaluator: String,
    pub n_base: usize,
    pub resamples: usize,
    pub grid: GridRule,
    pub seed: u64,
    pub out: PathBuf,
}

impl GsaParams {
    pub fn resolve(s: &Settings) -> CliResult<Self> {
        Ok(Self {
            evaluator: s.require("evaluator")?,
            n_base: s.get_or("n-base", 4096)?,
            resamples: s.get_or("resamples", DEFAULT_RESAMPLES)?,
            grid: crate::parse_grid(s, GridRule::Endpoints)?,
            seed: s.get_or("seed", 0)?,
            out: s.get_or("out", PathBuf::from("out"))?,
        })
    }
}

pub fn run(p: &GsaParams) -> CliResult<()> {
    let spec = EvaluatorSpec::parse(&p.evaluator)?;
    let outputs = [
        "indices<suffix>.csv",
        "indices<suffix>.json",
        "bars<suffix>.csv",
    ]
    .map(String::from)
    .to_vec();
    let run = Run::start(&p.out, "gsa", p, outputs)?;
    let result = execute(p, &spec, &run);
    run.finish(&result)?;
    result
}

fn execute(p: &GsaParams, spec: &EvaluatorSpec, run: &Run) -> CliResult<()> {
    let loaded = spec.load(p.grid)?;
    let all = loaded.indices(p.n_base, p.seed, p.resamples)?;
    for (k, s) in all.iter().enumerate() {
        // one response: no suffix; several: _y<k>
        let suffix = if all.len() == 1 {
            String::new()
        } else {
            format!("_y{}", k + 1)
        };
        s.save_csv(run.path(&format!("indices{suffix}.csv")))?;
        let json = run.path(&format!("indices{suffix}.json"));
        std::fs::write(&json, s.to_json()?).map_err(|e| CliError::io(&json, e))?;
        let mut bars = String::from("variable,msi,tsi\n");
        for v in &s.clamped().variables {
            bars.push_str(&format!("{},{},{}\n", v.variable, v.msi, v.tsi));
        }
        let bars_path = run.path(&format!("bars{suffix}.csv"));
        std::fs::write(&bars_path, bars).map_err(|e| CliError::io(&bars_path, e))?;
        if all.len() > 1 {
            println!("response y{}:", k + 1);
        }
        println!(
            "{:<10} {:>9} {:>9} {:>9} {:>9}",
            "variable", "msi", "se", "tsi", "se"
        );
        for v in &s.variables {
            println!(
                "{:<10} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
                v.variable, v.msi, v.msi_stderr, v.tsi, v.tsi_stderr
            );
        }
    }
    Ok(())
}
