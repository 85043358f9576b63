//! Variance-based Sobol' sensitivity indices over mixed design spaces.
//!
//! Main (MSI) and total (TSI) indices are estimated with the Jansen
//! pick-freeze estimators on scrambled Sobol' samples; standard errors come
//! from a row bootstrap.

mod convergence;

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lvgp::LvgpModel;
use crate::sampling::{sobol_unit, unit_to_mixed, SOBOL_MAX_DIM};
use crate::seed::{derive_seed, rng_for};
use crate::space::{validate, MixedDesignSpace, MixedPoint};

pub use convergence::{
    convergence_study, ConvergenceConfig, ConvergenceReport, ConvergenceRow, IndexKind, TestFamily,
};

/// Default bootstrap resample count for standard errors.
pub const DEFAULT_RESAMPLES: usize = 200;

/// A deterministic scalar response over a mixed design space.
pub trait Evaluator: Sync {
    fn evaluate(&self, point: &MixedPoint) -> Result<f64>;

    /// Whether concurrent calls are safe. Serial evaluators are run on one thread.
    fn concurrent(&self) -> bool {
        true
    }
}

impl<F> Evaluator for F
where
    F: Fn(&MixedPoint) -> Result<f64> + Sync,
{
    fn evaluate(&self, point: &MixedPoint) -> Result<f64> {
        self(point)
    }
}

/// Posterior mean of a fitted model.
impl Evaluator for LvgpModel {
    fn evaluate(&self, point: &MixedPoint) -> Result<f64> {
        self.predict_mean(point)
    }
}

fn evaluate_all<E: Evaluator + ?Sized>(evaluator: &E, points: &[MixedPoint]) -> Result<Vec<f64>> {
    if evaluator.concurrent() {
        points.par_iter().map(|p| evaluator.evaluate(p)).collect()
    } else {
        points.iter().map(|p| evaluator.evaluate(p)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvaluatorKind {
    Metamodel,
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableIndices {
    pub variable: String,
    pub msi: f64,
    pub msi_stderr: f64,
    pub tsi: f64,
    pub tsi_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolIndices {
    pub variables: Vec<VariableIndices>,
    pub n_base: usize,
    pub seed: u64,
    pub evaluator: EvaluatorKind,
    pub resamples: usize,
}

impl SobolIndices {
    pub fn msi(&self) -> Vec<f64> {
        self.variables.iter().map(|v| v.msi).collect()
    }

    pub fn tsi(&self) -> Vec<f64> {
        self.variables.iter().map(|v| v.tsi).collect()
    }

    /// Estimates clamped to `[0, 1]`; standard errors unchanged.
    pub fn clamped(&self) -> Self {
        let mut out = self.clone();
        for v in &mut out.variables {
            v.msi = v.msi.clamp(0.0, 1.0);
            v.tsi = v.tsi.clamp(0.0, 1.0);
        }
        out
    }

    pub fn get(&self, name: &str) -> Option<&VariableIndices> {
        self.variables.iter().find(|v| v.variable == name)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["variable", "msi", "msi_stderr", "tsi", "tsi_stderr"])?;
        for v in &self.variables {
            wr.write_record([
                v.variable.clone(),
                v.msi.to_string(),
                v.msi_stderr.to_string(),
                v.tsi.to_string(),
                v.tsi_stderr.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Pick-freeze sample matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct PickFreeze {
    pub a: Vec<MixedPoint>,
    pub b: Vec<MixedPoint>,
    /// `ab[i]` is `a` with variable `i` (space order) taken from `b`.
    pub ab: Vec<Vec<MixedPoint>>,
}

impl PickFreeze {
    pub fn evaluations(&self) -> usize {
        self.a.len() * (self.ab.len() + 2)
    }
}

/// Build `A`, `B` and every `AB_i` for `n_base` rows.
///
/// `A` and `B` are the two halves of one scrambled Sobol' sequence of
/// dimension `2d`, so their columns carry separate scramble keys while the
/// rows remain jointly low-discrepancy. Two independently scrambled copies of
/// the same sequence would share the leading bits of every row and make the
/// estimators collapse.
pub fn pick_freeze_matrices(
    space: &MixedDesignSpace,
    n_base: usize,
    seed: u64,
) -> Result<PickFreeze> {
    let d = space.dim();
    if n_base < 2 {
        return Err(Error::InvalidArgument(format!(
            "pick-freeze needs N >= 2, got {n_base}"
        )));
    }
    if 2 * d > SOBOL_MAX_DIM {
        return Err(Error::InvalidArgument(format!(
            "pick-freeze supports at most {} variables, space has {d}",
            SOBOL_MAX_DIM / 2
        )));
    }
    let unit = sobol_unit(2 * d, n_base, 0, Some(derive_seed(seed, "pick-freeze")))?;
    let mut a = Vec::with_capacity(n_base);
    let mut b = Vec::with_capacity(n_base);
    for row in &unit {
        a.push(unit_to_mixed(&row[..d], space)?);
        b.push(unit_to_mixed(&row[d..], space)?);
    }
    let q = space.q();
    let ab = (0..d)
        .map(|i| {
            a.iter()
                .zip(&b)
                .map(|(pa, pb)| {
                    let mut p = pa.clone();
                    if i < q {
                        p.x[i] = pb.x[i];
                    } else {
                        p.t[i - q] = pb.t[i - q];
                    }
                    p
                })
                .collect()
        })
        .collect();
    Ok(PickFreeze { a, b, ab })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GsaOptions {
    pub n_base: usize,
    pub seed: u64,
    pub resamples: usize,
    pub kind: EvaluatorKind,
}

impl GsaOptions {
    pub fn new(n_base: usize, seed: u64) -> Self {
        Self {
            n_base,
            seed,
            resamples: DEFAULT_RESAMPLES,
            kind: EvaluatorKind::Direct,
        }
    }
}

/// Direct estimation with default options.
pub fn estimate_indices<E: Evaluator + ?Sized>(
    evaluator: &E,
    space: &MixedDesignSpace,
    n_base: usize,
    seed: u64,
) -> Result<SobolIndices> {
    estimate_indices_with(evaluator, space, &GsaOptions::new(n_base, seed))
}

/// Jansen estimators: `S_i = (V - mean((f_B - f_ABi)^2) / 2) / V` and
/// `S_i^T = mean((f_A - f_ABi)^2) / 2 / V`, `V` the variance over `A` and `B`.
pub fn estimate_indices_with<E: Evaluator + ?Sized>(
    evaluator: &E,
    space: &MixedDesignSpace,
    opts: &GsaOptions,
) -> Result<SobolIndices> {
    let pf = pick_freeze_matrices(space, opts.n_base, opts.seed)?;
    if let Some(p) = pf.a.first() {
        validate(p, space)?;
    }
    let fa = evaluate_all(evaluator, &pf.a)?;
    let fb = evaluate_all(evaluator, &pf.b)?;
    let fab = pf
        .ab
        .iter()
        .map(|m| evaluate_all(evaluator, m))
        .collect::<Result<Vec<_>>>()?;
    if fa
        .iter()
        .chain(&fb)
        .chain(fab.iter().flatten())
        .any(|v| !v.is_finite())
    {
        return Err(Error::InvalidArgument(
            "evaluator returned a non-finite value".into(),
        ));
    }

    let n = opts.n_base;
    let all_rows: Vec<usize> = (0..n).collect();
    let point = jansen(&fa, &fb, &fab, &all_rows).ok_or(Error::ConstantResponse)?;

    let mut rng = rng_for(opts.seed, "gsa-bootstrap");
    let mut boot: Vec<Vec<(f64, f64)>> = Vec::with_capacity(opts.resamples);
    let mut rows = vec![0usize; n];
    for _ in 0..opts.resamples {
        rows.iter_mut().for_each(|r| *r = rng.gen_range(0..n));
        if let Some(est) = jansen(&fa, &fb, &fab, &rows) {
            boot.push(est);
        }
    }
    let sd = |values: &mut dyn Iterator<Item = f64>| -> f64 {
        let v: Vec<f64> = values.collect();
        if v.len() < 2 {
            return f64::NAN;
        }
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    };
    let variables = (0..space.dim())
        .map(|i| VariableIndices {
            variable: space.name(i).to_string(),
            msi: point[i].0,
            msi_stderr: sd(&mut boot.iter().map(|b| b[i].0)),
            tsi: point[i].1,
            tsi_stderr: sd(&mut boot.iter().map(|b| b[i].1)),
        })
        .collect();
    Ok(SobolIndices {
        variables,
        n_base: n,
        seed: opts.seed,
        evaluator: opts.kind,
        resamples: opts.resamples,
    })
}

/// `(msi, tsi)` per variable over the given rows; `None` for zero variance.
fn jansen(fa: &[f64], fb: &[f64], fab: &[Vec<f64>], rows: &[usize]) -> Option<Vec<(f64, f64)>> {
    let m = rows.len() as f64;
    let mean = rows.iter().map(|&j| fa[j] + fb[j]).sum::<f64>() / (2.0 * m);
    let var = rows
        .iter()
        .map(|&j| (fa[j] - mean).powi(2) + (fb[j] - mean).powi(2))
        .sum::<f64>()
        / (2.0 * m);
    let scale = rows
        .iter()
        .fold(0.0f64, |a, &j| a.max(fa[j].abs()).max(fb[j].abs()));
    if !(var > (1e-12 * scale).powi(2)) {
        return None;
    }
    Some(
        fab.iter()
            .map(|fi| {
                let (mut sb, mut sa) = (0.0, 0.0);
                for &j in rows {
                    sb += (fb[j] - fi[j]).powi(2);
                    sa += (fa[j] - fi[j]).powi(2);
                }
                let msi = (var - sb / (2.0 * m)) / var;
                let tsi = sa / (2.0 * m) / var;
                (msi, tsi)
            })
            .collect(),
    )
}

/// Indices of a fitted model's posterior mean on the model's own space.
pub fn metamodel_indices(model: &LvgpModel, n_base: usize, seed: u64) -> Result<SobolIndices> {
    let opts = GsaOptions {
        kind: EvaluatorKind::Metamodel,
        ..GsaOptions::new(n_base, seed)
    };
    estimate_indices_with(&MeanEvaluator(model), model.space(), &opts)
}

struct MeanEvaluator<'a>(&'a LvgpModel);

impl Evaluator for MeanEvaluator<'_> {
    fn evaluate(&self, point: &MixedPoint) -> Result<f64> {
        Ok(self.0.mean_unchecked(point))
    }
}
