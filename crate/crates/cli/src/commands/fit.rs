use std::path::{Path, PathBuf};

use mvgsa::lvgp::{fit, FitConfig, LvgpModel};
use mvgsa::seed::rng_for;
use mvgsa::{Dataset, MixedDesignSpace};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::manifest::Run;
use crate::settings::Settings;

/// Standalone fits run the optimizer longer than the library default; the
/// likelihood surface has long narrow valleys that 200 steps rarely clear.
pub const FIT_MAX_ITERS: usize = 1000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitParams {
    pub data: PathBuf,
    pub space: PathBuf,
    pub holdout_frac: f64,
    pub starts: usize,
    pub max_iters: usize,
    pub nugget: f64,
    pub data_start: bool,
    pub seed: u64,
    pub out: PathBuf,
}

impl FitParams {
    pub fn resolve(s: &Settings) -> CliResult<Self> {
        let d = FitConfig::default();
        let p = Self {
            data: s.require("data")?,
            space: s.require("space")?,
            holdout_frac: s.get_or("holdout-frac", 0.2)?,
            starts: s.get_or("starts", d.starts)?,
            max_iters: s.get_or("max-iters", FIT_MAX_ITERS)?,
            nugget: s.get_or("nugget", d.nugget)?,
            data_start: s.get_or("data-start", d.data_start)?,
            seed: s.get_or("seed", 0)?,
            out: s.get_or("out", PathBuf::from("out"))?,
        };
        if !(0.0..1.0).contains(&p.holdout_frac) {
            return Err(CliError::usage(format!(
                "holdout-frac must lie in [0, 1), got {}",
                p.holdout_frac
            )));
        }
        Ok(p)
    }
}

#[derive(Debug, Serialize)]
struct ResponseReport {
    column: String,
    n_train: usize,
    n_holdout: usize,
    nll: f64,
    log10_phi: Vec<f64>,
    nugget: f64,
    response_std: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    holdout_rmse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    holdout_rel_rmse: Option<f64>,
    model: String,
    latent: String,
}

fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Deterministic train/holdout split; the holdout keeps at least one row and
/// the training set at least two.
fn split(n: usize, frac: f64, seed: u64) -> CliResult<(Vec<usize>, Vec<usize>)> {
    let mut rows: Vec<usize> = (0..n).collect();
    if frac == 0.0 {
        return Ok((rows, Vec::new()));
    }
    let k = ((n as f64 * frac).round() as usize).max(1);
    if n < k + 2 {
        return Err(CliError::usage(format!(
            "{n} rows are too few for holdout-frac {frac}"
        )));
    }
    rows.shuffle(&mut rng_for(seed, "holdout-split"));
    let (hold, train) = rows.split_at(k);
    let (mut train, mut hold) = (train.to_vec(), hold.to_vec());
    train.sort_unstable();
    hold.sort_unstable();
    Ok((train, hold))
}

fn write_latent(model: &LvgpModel, path: &Path) -> CliResult<()> {
    let mut out = String::from("variable,level,z1,z2\n");
    for (j, var) in model.space().qualitative().iter().enumerate() {
        for (r, z) in model.latent().variable(j).iter().enumerate() {
            out.push_str(&format!("{},{},{},{}\n", var.name, r + 1, z[0], z[1]));
        }
    }
    std::fs::write(path, out).map_err(|e| CliError::io(path, e))
}

pub fn run(p: &FitParams) -> CliResult<()> {
    let outputs = [
        "fit_report.json",
        "model_<column>.json",
        "latent_<column>.csv",
    ]
    .map(String::from)
    .to_vec();
    let run = Run::start(&p.out, "fit", p, outputs)?;
    let result = execute(p, &run);
    run.finish(&result)?;
    result
}

fn execute(p: &FitParams, run: &Run) -> CliResult<()> {
    let space = MixedDesignSpace::load(&p.space)?;
    let data = Dataset::load_csv(&space, &p.data)?;
    let columns: Vec<String> = data.header()[space.dim()..].to_vec();
    let (train_rows, hold_rows) = split(data.n(), p.holdout_frac, p.seed)?;
    let cfg = FitConfig {
        starts: p.starts,
        max_iters: p.max_iters,
        nugget: p.nugget,
        data_start: p.data_start,
        seed: p.seed,
        ..FitConfig::default()
    };
    let mut reports = Vec::new();
    for (k, column) in columns.iter().enumerate() {
        let single = data.select_response(k)?;
        let train = single.subset(&train_rows)?;
        let model = fit(
            &train,
            &FitConfig {
                seed: mvgsa::seed::derive_indexed(p.seed, "fit", k as u64),
                ..cfg.clone()
            },
        )?;
        let response_std = std_dev(&single.response(0));
        let holdout_rmse = if hold_rows.is_empty() {
            None
        } else {
            let hold = single.subset(&hold_rows)?;
            let pred = model.predict_mean_batch(hold.inputs())?;
            let mse = pred
                .iter()
                .zip(hold.response(0))
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                / pred.len() as f64;
            Some(mse.sqrt())
        };
        let model_file = format!("model_{column}.json");
        let latent_file = format!("latent_{column}.csv");
        model.save(run.path(&model_file))?;
        write_latent(&model, &run.path(&latent_file))?;
        let hp = model.hyperparams();
        let report = ResponseReport {
            column: column.clone(),
            n_train: train_rows.len(),
            n_holdout: hold_rows.len(),
            nll: model.nll(),
            log10_phi: hp.log10_phi.clone(),
            nugget: hp.nugget,
            response_std,
            holdout_rmse,
            holdout_rel_rmse: holdout_rmse.map(|r| {
                if response_std > 0.0 {
                    r / response_std
                } else {
                    f64::NAN
                }
            }),
            model: model_file,
            latent: latent_file,
        };
        match report.holdout_rel_rmse {
            Some(rel) => println!(
                "{column}: nll {:.4}, holdout RMSE {:.4} ({:.2}% of std)",
                report.nll,
                holdout_rmse.unwrap_or(0.0),
                100.0 * rel
            ),
            None => println!("{column}: nll {:.4}", report.nll),
        }
        reports.push(report);
    }
    let path = run.path("fit_report.json");
    let text = serde_json::to_string_pretty(&serde_json::json!({ "responses": reports }))
        .map_err(mvgsa::Error::from)?;
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let (t, h) = split(10, 0.2, 3).unwrap();
        assert_eq!((t.len(), h.len()), (8, 2));
        assert!(h.iter().all(|i| !t.contains(i)));
        assert_eq!(split(10, 0.2, 3).unwrap(), (t, h));
        assert_eq!(split(5, 0.0, 1).unwrap().1.len(), 0);
        assert!(split(3, 0.5, 1).is_err());
    }
}
