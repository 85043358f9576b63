//! Evaluators addressable by name: `direct:ishigami`, `direct:hartmann6`,
//! `direct:blockworld`, `direct:ishigami-mv:L=<n>`, `direct:hartmann6-mv:L=<n>`
//! and `model:<file>`.

use std::path::PathBuf;

use mvgsa::benchfns::{BaseFunction, BlockWorld, DiscretizedFunction, GridRule};
use mvgsa::gsa::{estimate_indices_with, EvaluatorKind, GsaOptions, SobolIndices, TestFamily};
use mvgsa::lvgp::LvgpModel;
use mvgsa::mobo::Objectives;
use mvgsa::{MixedDesignSpace, MixedPoint};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub enum EvaluatorSpec {
    Continuous(BaseFunction),
    Discretized { family: TestFamily, levels: usize },
    BlockWorld,
    Model(PathBuf),
}

impl EvaluatorSpec {
    pub fn parse(s: &str) -> CliResult<Self> {
        let bad = || {
            CliError::usage(format!(
                "unknown evaluator `{s}` (expected direct:ishigami, direct:hartmann6, direct:blockworld, \
                 direct:ishigami-mv:L=<n>, direct:hartmann6-mv:L=<n> or model:<file>)"
            ))
        };
        if let Some(path) = s.strip_prefix("model:") {
            if path.is_empty() {
                return Err(bad());
            }
            return Ok(EvaluatorSpec::Model(PathBuf::from(path)));
        }
        let name = s.strip_prefix("direct:").ok_or_else(bad)?;
        match name {
            "ishigami" => Ok(EvaluatorSpec::Continuous(BaseFunction::Ishigami)),
            "hartmann6" => Ok(EvaluatorSpec::Continuous(BaseFunction::Hartmann6)),
            "blockworld" => Ok(EvaluatorSpec::BlockWorld),
            _ => {
                let (fam, levels) = name.split_once("-mv:L=").ok_or_else(bad)?;
                let family = TestFamily::parse(fam).map_err(|_| bad())?;
                let levels = levels.parse::<usize>().map_err(|_| {
                    CliError::usage(format!("`{levels}` is not a level count in `{s}`"))
                })?;
                Ok(EvaluatorSpec::Discretized { family, levels })
            }
        }
    }

    pub fn load(&self, grid: GridRule) -> CliResult<Loaded> {
        Ok(match self {
            EvaluatorSpec::Continuous(f) => Loaded::Continuous(*f),
            EvaluatorSpec::Discretized { family, levels } => {
                Loaded::Discretized(family.discretize(*levels, grid)?)
            }
            EvaluatorSpec::BlockWorld => Loaded::BlockWorld(BlockWorld::default()),
            EvaluatorSpec::Model(path) => Loaded::Model(Box::new(LvgpModel::load(path)?)),
        })
    }
}

pub enum Loaded {
    Continuous(BaseFunction),
    Discretized(DiscretizedFunction),
    BlockWorld(BlockWorld),
    Model(Box<LvgpModel>),
}

impl Loaded {
    pub fn space(&self) -> CliResult<MixedDesignSpace> {
        Ok(match self {
            Loaded::Continuous(f) => f.space(),
            Loaded::Discretized(f) => f.space().clone(),
            Loaded::BlockWorld(b) => b.space()?,
            Loaded::Model(m) => m.space().clone(),
        })
    }

    pub fn n_responses(&self) -> usize {
        match self {
            Loaded::BlockWorld(b) => b.n_objectives(),
            _ => 1,
        }
    }

    pub fn responses(&self, p: &MixedPoint) -> CliResult<Vec<f64>> {
        Ok(match self {
            Loaded::Continuous(f) => vec![f.eval(&p.x)],
            Loaded::Discretized(f) => vec![f.eval(p)?],
            Loaded::BlockWorld(b) => b.evaluate(p)?,
            Loaded::Model(m) => vec![m.predict_mean(p)?],
        })
    }

    /// Sobol' indices of every response.
    pub fn indices(
        &self,
        n_base: usize,
        seed: u64,
        resamples: usize,
    ) -> CliResult<Vec<SobolIndices>> {
        let space = self.space()?;
        let opts = GsaOptions {
            resamples,
            ..GsaOptions::new(n_base, seed)
        };
        let out = match self {
            Loaded::Continuous(f) => vec![estimate_indices_with(f, &space, &opts)?],
            Loaded::Discretized(f) => vec![estimate_indices_with(f, &space, &opts)?],
            Loaded::BlockWorld(b) => (0..b.n_objectives())
                .map(|k| {
                    let f = |p: &MixedPoint| b.evaluate(p).map(|y| y[k]);
                    estimate_indices_with(&f, &space, &opts)
                })
                .collect::<mvgsa::Result<Vec<_>>>()?,
            Loaded::Model(m) => {
                let opts = GsaOptions {
                    kind: EvaluatorKind::Metamodel,
                    ..opts
                };
                vec![estimate_indices_with(m.as_ref(), &space, &opts)?]
            }
        };
        Ok(out)
    }
}
