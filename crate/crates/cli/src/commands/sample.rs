use std::path::PathBuf;

use mvgsa::benchfns::GridRule;
use mvgsa::sampling::{initial_doe, sobol_mixed};
use mvgsa::seed::derive_seed;
use mvgsa::space::csv_header;
use mvgsa::{MixedDesignSpace, MixedPoint};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::evaluator::{EvaluatorSpec, Loaded};
use crate::manifest::Run;
use crate::settings::Settings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Doe,
    Sobol,
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "doe" => Ok(Method::Doe),
            "sobol" => Ok(Method::Sobol),
            _ => Err("expected doe or sobol".into()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleParams {
    pub space: Option<PathBuf>,
    /// Direct evaluator whose space is sampled and whose responses are appended.
    pub evaluator: Option<String>,
    pub n: usize,
    pub method: Method,
    pub scramble: bool,
    pub grid: GridRule,
    pub seed: u64,
    pub out: PathBuf,
}

impl SampleParams {
    pub fn resolve(s: &Settings) -> CliResult<Self> {
        let p = Self {
            space: s.get("space")?,
            evaluator: s.get("evaluator")?,
            n: s.require("n")?,
            method: s.get_or("method", Method::Doe)?,
            scramble: s.get_or("scramble", true)?,
            grid: crate::parse_grid(s, GridRule::Endpoints)?,
            seed: s.get_or("seed", 0)?,
            out: s.get_or("out", PathBuf::from("out"))?,
        };
        if p.space.is_some() == p.evaluator.is_some() {
            return Err(CliError::usage(
                "sample needs exactly one of --space or --evaluator",
            ));
        }
        Ok(p)
    }
}

pub fn run(p: &SampleParams) -> CliResult<()> {
    let spec = p
        .evaluator
        .as_deref()
        .map(EvaluatorSpec::parse)
        .transpose()?;
    if matches!(spec, Some(EvaluatorSpec::Model(_))) {
        return Err(CliError::usage("sample evaluates direct functions only"));
    }
    let outputs = ["samples.csv", "space.json"].map(String::from).to_vec();
    let run = Run::start(&p.out, "sample", p, outputs)?;
    let result = execute(p, spec.as_ref(), &run);
    run.finish(&result)?;
    result
}

fn execute(p: &SampleParams, spec: Option<&EvaluatorSpec>, run: &Run) -> CliResult<()> {
    let loaded: Option<Loaded> = spec.map(|s| s.load(p.grid)).transpose()?;
    let space = match (&loaded, &p.space) {
        (Some(l), _) => l.space()?,
        (None, Some(path)) => MixedDesignSpace::load(path)?,
        (None, None) => unreachable!("checked when resolving"),
    };
    let points: Vec<MixedPoint> = match p.method {
        Method::Doe => initial_doe(&space, p.n, p.seed)?,
        Method::Sobol => sobol_mixed(
            &space,
            p.n,
            0,
            p.scramble.then(|| derive_seed(p.seed, "sample")),
        )?,
    };
    let n_resp = loaded.as_ref().map_or(0, Loaded::n_responses);
    let path = run.path("samples.csv");
    let file = std::fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(csv_header(&space, n_resp))
        .map_err(mvgsa::Error::from)?;
    for pt in &points {
        let mut rec: Vec<String> =
            pt.x.iter()
                .map(f64::to_string)
                .chain(pt.t.iter().map(usize::to_string))
                .collect();
        if let Some(l) = &loaded {
            rec.extend(l.responses(pt)?.iter().map(f64::to_string));
        }
        w.write_record(&rec).map_err(mvgsa::Error::from)?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    let space_path = run.path("space.json");
    std::fs::write(&space_path, space.to_json()?).map_err(|e| CliError::io(&space_path, e))?;
    println!("wrote {} points to {}", points.len(), path.display());
    Ok(())
}
