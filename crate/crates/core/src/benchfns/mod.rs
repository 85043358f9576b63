//! Analytic test functions, their mixed-variable discretizations, and the
//! BlockWorld combinatorial two-objective benchmark.

mod blockworld;

use std::f64::consts::PI;
use std::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gsa::Evaluator;
use crate::mobo::{Direction, Objectives, ParetoArchive};
use crate::space::{
    full_factorial, validate, MixedDesignSpace, MixedPoint, QualitativeVar, QuantitativeVar,
};

pub use blockworld::{BlockWorld, BLOCKWORLD_FRONT_CSV, BLOCKWORLD_JSON};

/// Reference main indices of the continuous Ishigami function (a = 7, b = 0.1).
pub const ISHIGAMI_MSI: [f64; 3] = [0.3138, 0.4413, 0.0];
/// Reference total indices of the continuous Ishigami function.
pub const ISHIGAMI_TSI: [f64; 3] = [0.5575, 0.4424, 0.2436];
/// Variables of Hartmann-6 converted to qualitative by default (0-based).
pub const HARTMANN_CONVERTED: [usize; 2] = [1, 5];
/// Reference main indices of Hartmann-6 for `x2` and `x6`.
pub const HARTMANN_MSI: [f64; 2] = [0.0025, 0.0086];
/// Reference total indices of Hartmann-6 for `x2` and `x6`.
pub const HARTMANN_TSI: [f64; 2] = [0.3992, 0.4812];

static ISHIGAMI_RANGE_WARNED: AtomicBool = AtomicBool::new(false);

/// `sin(x1) + 7 sin^2(x2) + 0.1 x3^4 sin(x1)`.
///
/// Evaluates anywhere; the first call outside `[-pi, pi]^3` logs a warning.
pub fn ishigami(x1: f64, x2: f64, x3: f64) -> f64 {
    if [x1, x2, x3].iter().any(|v| v.abs() > PI)
        && !ISHIGAMI_RANGE_WARNED.swap(true, Ordering::Relaxed)
    {
        log::warn!("ishigami evaluated outside [-pi, pi]^3");
    }
    let s1 = x1.sin();
    let s2 = x2.sin();
    s1 + 7.0 * s2 * s2 + 0.1 * x3.powi(4) * s1
}

const H6_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
const H6_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];
const H6_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];

/// Standard signed Hartmann-6: `-sum_i alpha_i exp(-sum_j A_ij (x_j - P_ij)^2)`.
pub fn hartmann6(x: &[f64; 6]) -> f64 {
    -H6_ALPHA
        .iter()
        .zip(H6_A.iter().zip(&H6_P))
        .map(|(alpha, (a, p))| {
            let s: f64 = (0..6).map(|j| a[j] * (x[j] - p[j]).powi(2)).sum();
            alpha * (-s).exp()
        })
        .sum::<f64>()
}

/// Continuous base functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseFunction {
    Ishigami,
    Hartmann6,
}

impl BaseFunction {
    pub fn dim(self) -> usize {
        match self {
            BaseFunction::Ishigami => 3,
            BaseFunction::Hartmann6 => 6,
        }
    }

    pub fn bounds(self) -> (f64, f64) {
        match self {
            BaseFunction::Ishigami => (-PI, PI),
            BaseFunction::Hartmann6 => (0.0, 1.0),
        }
    }

    pub fn eval(self, x: &[f64]) -> f64 {
        match self {
            BaseFunction::Ishigami => ishigami(x[0], x[1], x[2]),
            BaseFunction::Hartmann6 => {
                let mut a = [0.0; 6];
                a.copy_from_slice(&x[..6]);
                hartmann6(&a)
            }
        }
    }

    /// All-continuous design space with variables `x1..xd`.
    pub fn space(self) -> MixedDesignSpace {
        let (lo, hi) = self.bounds();
        MixedDesignSpace::new(
            (1..=self.dim())
                .map(|i| QuantitativeVar {
                    name: format!("x{i}"),
                    lower: lo,
                    upper: hi,
                })
                .collect(),
            Vec::new(),
        )
        .expect("static space is valid")
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "ishigami" => Ok(BaseFunction::Ishigami),
            "hartmann6" => Ok(BaseFunction::Hartmann6),
            _ => Err(Error::InvalidArgument(format!(
                "unknown test function `{name}`"
            ))),
        }
    }
}

/// Continuous base function evaluated on its own space.
impl Evaluator for BaseFunction {
    fn evaluate(&self, point: &MixedPoint) -> Result<f64> {
        if point.x.len() != self.dim() || !point.t.is_empty() {
            return Err(Error::DimensionMismatch {
                what: "test function input",
                expected: self.dim(),
                found: point.x.len(),
            });
        }
        Ok(self.eval(&point.x))
    }
}

/// How a continuous range is cut into level values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridRule {
    /// `l` equally spaced values including both endpoints.
    #[default]
    Endpoints,
    /// Centres of `l` equal-width cells.
    Midpoints,
}

impl GridRule {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "endpoints" => Ok(GridRule::Endpoints),
            "midpoints" => Ok(GridRule::Midpoints),
            _ => Err(Error::InvalidArgument(format!(
                "unknown grid rule `{s}` (endpoints | midpoints)"
            ))),
        }
    }
}

/// Level values of a range. Level `r` (1-based) maps to `grid[r - 1]`.
pub fn level_grid(lower: f64, upper: f64, levels: usize, rule: GridRule) -> Result<Vec<f64>> {
    if levels < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 levels, got {levels}"
        )));
    }
    let width = upper - lower;
    let l = levels as f64;
    Ok((0..levels)
        .map(|r| match rule {
            GridRule::Endpoints if r == levels - 1 => upper,
            GridRule::Endpoints => lower + r as f64 / (l - 1.0) * width,
            GridRule::Midpoints => lower + (r as f64 + 0.5) / l * width,
        })
        .collect())
}

/// A continuous function with some variables restricted to level grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizedFunction {
    base: BaseFunction,
    /// `(base variable index, grid)` in base-variable order.
    converted: Vec<(usize, Vec<f64>)>,
    space: MixedDesignSpace,
}

/// Convert `convert` (0-based base-variable indices) to qualitative
/// variables with `levels` levels each.
///
/// Remaining variables stay continuous and are named `x<i>`; converted ones
/// become `t<i>`, keeping the base numbering.
pub fn discretize(
    base: BaseFunction,
    convert: &[usize],
    levels: usize,
    rule: GridRule,
) -> Result<DiscretizedFunction> {
    if convert.is_empty() {
        return Err(Error::InvalidArgument(
            "convert at least one variable".into(),
        ));
    }
    let mut conv = convert.to_vec();
    conv.sort_unstable();
    conv.dedup();
    if conv.len() != convert.len() || conv.iter().any(|&i| i >= base.dim()) {
        return Err(Error::InvalidArgument(format!(
            "invalid variables to convert {convert:?} for a {}-dimensional function",
            base.dim()
        )));
    }
    let (lo, hi) = base.bounds();
    let grid = level_grid(lo, hi, levels, rule)?;
    let quantitative = (0..base.dim())
        .filter(|i| !conv.contains(i))
        .map(|i| QuantitativeVar {
            name: format!("x{}", i + 1),
            lower: lo,
            upper: hi,
        })
        .collect();
    let qualitative = conv
        .iter()
        .map(|&i| QualitativeVar {
            name: format!("t{}", i + 1),
            num_levels: levels,
        })
        .collect();
    Ok(DiscretizedFunction {
        base,
        converted: conv.into_iter().map(|i| (i, grid.clone())).collect(),
        space: MixedDesignSpace::new(quantitative, qualitative)?,
    })
}

impl DiscretizedFunction {
    pub fn space(&self) -> &MixedDesignSpace {
        &self.space
    }

    pub fn base(&self) -> BaseFunction {
        self.base
    }

    /// Base-variable indices of the converted variables.
    pub fn converted(&self) -> Vec<usize> {
        self.converted.iter().map(|(i, _)| *i).collect()
    }

    pub fn grid(&self, converted_position: usize) -> &[f64] {
        &self.converted[converted_position].1
    }

    /// The full continuous input vector a mixed point stands for.
    pub fn to_continuous(&self, point: &MixedPoint) -> Result<Vec<f64>> {
        if point.x.len() != self.space.q() || point.t.len() != self.space.m() {
            return Err(Error::DimensionMismatch {
                what: "discretized function input",
                expected: self.space.dim(),
                found: point.x.len() + point.t.len(),
            });
        }
        let mut x = Vec::with_capacity(self.base.dim());
        let mut qi = 0;
        let mut ti = 0;
        for i in 0..self.base.dim() {
            match self.converted.get(ti) {
                Some((ci, grid)) if *ci == i => {
                    let level = point.t[ti];
                    if level == 0 || level > grid.len() {
                        return Err(Error::LevelOutOfRange {
                            name: self.space.qualitative()[ti].name.clone(),
                            level,
                            levels: grid.len(),
                        });
                    }
                    x.push(grid[level - 1]);
                    ti += 1;
                }
                _ => {
                    x.push(point.x[qi]);
                    qi += 1;
                }
            }
        }
        Ok(x)
    }

    pub fn eval(&self, point: &MixedPoint) -> Result<f64> {
        Ok(self.base.eval(&self.to_continuous(point)?))
    }
}

impl Evaluator for DiscretizedFunction {
    fn evaluate(&self, point: &MixedPoint) -> Result<f64> {
        self.eval(point)
    }
}

/// Exact Pareto front (maximization) of a qualitative-only space by full
/// enumeration.
pub fn exhaustive_pareto<O: Objectives + ?Sized>(
    objectives: &O,
    space: &MixedDesignSpace,
) -> Result<ParetoArchive> {
    const LIMIT: u64 = 1_000_000;
    let card = space.cardinality()?;
    if card > LIMIT {
        return Err(Error::InvalidArgument(format!(
            "exhaustive enumeration limited to {LIMIT} designs, space has {card}"
        )));
    }
    let points = full_factorial(space, LIMIT)?;
    let mut archive = ParetoArchive::new(vec![Direction::Maximize; objectives.n_objectives()]);
    for p in points {
        validate(&p, space)?;
        let y = objectives.evaluate(&p)?;
        archive.insert(p, y, 0)?;
    }
    Ok(archive)
}
