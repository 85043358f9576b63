//! Level-refinement study: metamodel indices of a discretized test function
//! against its direct ("true mixed-variable") indices and the continuous
//! ground truth, over increasing level counts.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::benchfns::{
    discretize, BaseFunction, DiscretizedFunction, GridRule, HARTMANN_CONVERTED, HARTMANN_MSI,
    HARTMANN_TSI, ISHIGAMI_MSI, ISHIGAMI_TSI,
};
use crate::error::{Error, Result};
use crate::gsa::{estimate_indices, metamodel_indices, Evaluator, SobolIndices};
use crate::lvgp::{fit, FitConfig};
use crate::sampling::{initial_doe, sobol_mixed};
use crate::seed::{derive_indexed, derive_seed};
use crate::space::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestFamily {
    /// Ishigami with `x1` and `x3` made qualitative.
    Ishigami,
    /// Hartmann-6 with `x2` and `x6` made qualitative.
    Hartmann6,
}

impl TestFamily {
    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "ishigami" => Ok(Self::Ishigami),
            "hartmann6" | "hartmann" => Ok(Self::Hartmann6),
            other => Err(Error::InvalidArgument(format!(
                "unknown test function '{other}' (expected ishigami or hartmann6)"
            ))),
        }
    }

    pub fn base(self) -> BaseFunction {
        match self {
            Self::Ishigami => BaseFunction::Ishigami,
            Self::Hartmann6 => BaseFunction::Hartmann6,
        }
    }

    /// Base-variable indices turned qualitative.
    pub fn converted(self) -> Vec<usize> {
        match self {
            Self::Ishigami => vec![0, 2],
            Self::Hartmann6 => HARTMANN_CONVERTED.to_vec(),
        }
    }

    /// Published continuous `(MSI, TSI)` of a base variable, where known.
    pub fn continuous(self, base_var: usize) -> Option<(f64, f64)> {
        match self {
            Self::Ishigami => Some((ISHIGAMI_MSI[base_var], ISHIGAMI_TSI[base_var])),
            Self::Hartmann6 => HARTMANN_CONVERTED
                .iter()
                .position(|&i| i == base_var)
                .map(|p| (HARTMANN_MSI[p], HARTMANN_TSI[p])),
        }
    }

    pub fn discretize(self, levels: usize, rule: GridRule) -> Result<DiscretizedFunction> {
        discretize(self.base(), &self.converted(), levels, rule)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    pub family: TestFamily,
    /// Level counts, strictly ascending.
    pub levels: Vec<usize>,
    /// Training size is `train_per_level * L`, capped at `train_cap`.
    pub train_per_level: usize,
    pub train_cap: usize,
    pub n_direct: usize,
    pub n_meta: usize,
    pub seeds: Vec<u64>,
    pub grid: GridRule,
    pub fit: FitConfig,
    pub holdout_n: usize,
}

impl ConvergenceConfig {
    pub fn new(family: TestFamily, levels: Vec<usize>) -> Self {
        Self {
            family,
            levels,
            train_per_level: 40,
            train_cap: 400,
            n_direct: 1 << 14,
            n_meta: 1 << 13,
            seeds: vec![0],
            grid: GridRule::Midpoints,
            fit: FitConfig {
                starts: 2,
                data_start: true,
                ..FitConfig::default()
            },
            holdout_n: 256,
        }
    }

    pub fn train_n(&self, levels: usize) -> usize {
        (self.train_per_level * levels).min(self.train_cap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexKind {
    Msi,
    Tsi,
}

impl IndexKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Msi => "msi",
            Self::Tsi => "tsi",
        }
    }
}

/// One (level count, seed, variable, index type) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub levels: usize,
    pub seed: u64,
    pub variable: String,
    pub kind: IndexKind,
    /// Metamodel estimate.
    pub mv: f64,
    /// Direct estimate on the discretized function.
    pub true_mv: f64,
    pub continuous: Option<f64>,
    /// Holdout RMSE of the metamodel relative to the holdout response std.
    pub holdout_rel_rmse: f64,
    pub train_n: usize,
}

impl ConvergenceRow {
    pub fn mv_error(&self) -> f64 {
        (self.mv - self.true_mv).abs()
    }

    pub fn discretization_error(&self) -> Option<f64> {
        self.continuous.map(|c| (self.true_mv - c).abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub config: ConvergenceConfig,
    pub rows: Vec<ConvergenceRow>,
    /// Direct indices per level count, in `config.levels` order.
    pub true_mv: Vec<SobolIndices>,
}

impl ConvergenceReport {
    /// Largest `|MV - True-MV|` at a level count.
    pub fn max_mv_error(&self, levels: usize) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.levels == levels)
            .map(ConvergenceRow::mv_error)
            .fold(0.0, f64::max)
    }

    /// Largest `|True-MV - continuous|` at a level count, over variables with
    /// a known continuous value.
    pub fn max_discretization_error(&self, levels: usize) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.levels == levels)
            .filter_map(ConvergenceRow::discretization_error)
            .fold(0.0, f64::max)
    }

    /// Fraction of cells whose metamodel passed the holdout gate and whose
    /// MV index lies within `tol` of True-MV.
    pub fn agreement_fraction(&self, tol: f64, holdout_gate: f64) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        let ok = self
            .rows
            .iter()
            .filter(|r| r.holdout_rel_rmse < holdout_gate && r.mv_error() <= tol)
            .count();
        ok as f64 / self.rows.len() as f64
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            "levels",
            "seed",
            "variable",
            "index",
            "mv",
            "true_mv",
            "continuous",
            "abs_mv_error",
            "holdout_rel_rmse",
            "train_n",
        ])?;
        for r in &self.rows {
            wr.write_record([
                r.levels.to_string(),
                r.seed.to_string(),
                r.variable.clone(),
                r.kind.as_str().to_string(),
                r.mv.to_string(),
                r.true_mv.to_string(),
                r.continuous.map(|c| c.to_string()).unwrap_or_default(),
                r.mv_error().to_string(),
                r.holdout_rel_rmse.to_string(),
                r.train_n.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// `levels,max_abs_mv_error,max_abs_discretization_error`.
    pub fn write_summary_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["levels", "max_abs_mv_error", "max_abs_discretization_error"])?;
        for &l in &self.config.levels {
            wr.write_record([
                l.to_string(),
                self.max_mv_error(l).to_string(),
                self.max_discretization_error(l).to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Base-variable index of each variable of the discretized space, in space
/// order (continuous block first, then converted variables).
fn base_indices(f: &DiscretizedFunction) -> Vec<usize> {
    let converted = f.converted();
    (0..f.base().dim())
        .filter(|i| !converted.contains(i))
        .chain(converted.iter().copied())
        .collect()
}

fn holdout_rel_rmse(
    model: &crate::lvgp::LvgpModel,
    f: &DiscretizedFunction,
    n: usize,
    seed: u64,
) -> Result<f64> {
    let pts = sobol_mixed(f.space(), n, 0, Some(derive_seed(seed, "holdout")))?;
    let truth = pts
        .iter()
        .map(|p| f.evaluate(p))
        .collect::<Result<Vec<_>>>()?;
    let pred = model.predict_mean_batch(&pts)?;
    let mean = truth.iter().sum::<f64>() / n as f64;
    let var = truth.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n as f64;
    let mse = truth
        .iter()
        .zip(&pred)
        .map(|(t, p)| (t - p).powi(2))
        .sum::<f64>()
        / n as f64;
    Ok((mse / var).sqrt())
}

/// Run the study. For every level count: direct indices of the discretized
/// function once, then per seed a fresh training sample, an LVGP fit, a
/// holdout check and metamodel indices.
pub fn convergence_study(cfg: &ConvergenceConfig) -> Result<ConvergenceReport> {
    if cfg.levels.is_empty() {
        return Err(Error::InvalidArgument("level list is empty".into()));
    }
    if cfg.levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!(
            "level list {:?} must be strictly ascending",
            cfg.levels
        )));
    }
    if cfg.seeds.is_empty() {
        return Err(Error::InvalidArgument("seed list is empty".into()));
    }
    let mut rows = Vec::new();
    let mut true_mv = Vec::with_capacity(cfg.levels.len());
    for &l in &cfg.levels {
        let f = cfg.family.discretize(l, cfg.grid)?;
        let base = base_indices(&f);
        let direct = estimate_indices(
            &f,
            f.space(),
            cfg.n_direct,
            derive_indexed(0, "true-mv", l as u64),
        )?;
        let train_n = cfg.train_n(l);
        for &seed in &cfg.seeds {
            let s = derive_indexed(seed, "convergence", l as u64);
            let inputs = initial_doe(f.space(), train_n, derive_seed(s, "train"))?;
            let outputs = inputs
                .iter()
                .map(|p| f.evaluate(p).map(|y| vec![y]))
                .collect::<Result<Vec<_>>>()?;
            let data = Dataset::new(f.space().clone(), inputs, outputs)?;
            let model = fit(
                &data,
                &FitConfig {
                    seed: derive_seed(s, "fit"),
                    ..cfg.fit.clone()
                },
            )?;
            let gate = holdout_rel_rmse(&model, &f, cfg.holdout_n, s)?;
            let mv = metamodel_indices(&model, cfg.n_meta, derive_seed(s, "mv"))?;
            log::info!("L={l} seed={seed}: n={train_n}, holdout relative RMSE {gate:.4}");
            for (v, (m, t)) in mv.variables.iter().zip(&direct.variables).enumerate() {
                let truth = cfg.family.continuous(base[v]);
                for (kind, mvv, tv, cv) in [
                    (IndexKind::Msi, m.msi, t.msi, truth.map(|c| c.0)),
                    (IndexKind::Tsi, m.tsi, t.tsi, truth.map(|c| c.1)),
                ] {
                    rows.push(ConvergenceRow {
                        levels: l,
                        seed,
                        variable: t.variable.clone(),
                        kind,
                        mv: mvv,
                        true_mv: tv,
                        continuous: cv,
                        holdout_rel_rmse: gate,
                        train_n,
                    });
                }
            }
        }
        true_mv.push(direct);
    }
    Ok(ConvergenceReport {
        config: cfg.clone(),
        rows,
        true_mv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_mapping() {
        let f = TestFamily::Hartmann6
            .discretize(3, GridRule::Endpoints)
            .unwrap();
        assert_eq!(base_indices(&f), vec![0, 2, 3, 4, 1, 5]);
        assert_eq!(TestFamily::Hartmann6.continuous(0), None);
        assert_eq!(TestFamily::Hartmann6.continuous(5), Some((0.0086, 0.4812)));
        assert!(TestFamily::parse("branin").is_err());
    }

    #[test]
    fn rejects_bad_levels() {
        let mut cfg = ConvergenceConfig::new(TestFamily::Ishigami, vec![]);
        assert!(convergence_study(&cfg).is_err());
        cfg.levels = vec![5, 2];
        assert!(convergence_study(&cfg).is_err());
    }
}
