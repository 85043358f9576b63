use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mobo::Objectives;
use crate::space::{validate, Dataset, MixedDesignSpace, MixedPoint, QualitativeVar};

/// Default BlockWorld tables.
pub const BLOCKWORLD_JSON: &str = include_str!("../../data/blockworld.json");
/// Exhaustive Pareto front of the default tables (dataset CSV layout).
pub const BLOCKWORLD_FRONT_CSV: &str = include_str!("../../data/blockworld_front.csv");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub intercept: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decay {
    pub scale: f64,
    pub length: f64,
}

/// Synthetic four-variable combinatorial benchmark with two conflicting
/// objectives (both maximized).
///
/// A descriptor `lcd(A, C)` is looked up from a table; then
/// `y1 = intercept + slope * lcd + eps_b[B].0 + eps_d[D].0` and
/// `y2 = scale * exp(-lcd / length) + eps_b[B].1 + eps_d[D].1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBlockWorld")]
pub struct BlockWorld {
    names: Vec<String>,
    levels: Vec<usize>,
    lcd: Vec<Vec<f64>>,
    eps_b: Vec<[f64; 2]>,
    eps_d: Vec<[f64; 2]>,
    g1: Linear,
    g2: Decay,
}

#[derive(Deserialize)]
struct RawBlockWorld {
    names: Vec<String>,
    levels: Vec<usize>,
    lcd: Vec<Vec<f64>>,
    eps_b: Vec<[f64; 2]>,
    eps_d: Vec<[f64; 2]>,
    g1: Linear,
    g2: Decay,
}

impl TryFrom<RawBlockWorld> for BlockWorld {
    type Error = Error;

    fn try_from(r: RawBlockWorld) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidArgument(format!("blockworld tables: {msg}")));
        if r.names.len() != 4 || r.levels.len() != 4 {
            return bad("exactly four variables are required".into());
        }
        let [la, lb, lc, ld] = [r.levels[0], r.levels[1], r.levels[2], r.levels[3]];
        if r.lcd.len() != la || r.lcd.iter().any(|row| row.len() != lc) {
            return bad(format!("lcd table must be {la} x {lc}"));
        }
        if r.eps_b.len() != lb || r.eps_d.len() != ld {
            return bad(format!("eps tables must have {lb} and {ld} rows"));
        }
        let finite = r
            .lcd
            .iter()
            .flatten()
            .chain(r.eps_b.iter().flatten())
            .chain(r.eps_d.iter().flatten());
        if finite.into_iter().any(|v| !v.is_finite()) {
            return bad("non-finite table entry".into());
        }
        if !(r.g1.slope < 0.0) || !(r.g2.scale > 0.0) || !(r.g2.length > 0.0) {
            return bad("response curves must be decreasing in the descriptor".into());
        }
        let bw = BlockWorld {
            names: r.names,
            levels: r.levels,
            lcd: r.lcd,
            eps_b: r.eps_b,
            eps_d: r.eps_d,
            g1: r.g1,
            g2: r.g2,
        };
        bw.space()?;
        Ok(bw)
    }
}

impl Default for BlockWorld {
    fn default() -> Self {
        Self::from_json(BLOCKWORLD_JSON).expect("shipped tables are valid")
    }
}

impl BlockWorld {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The exhaustive Pareto front of the default tables, as shipped.
    pub fn shipped_front() -> Result<Dataset> {
        let space = Self::default().space()?;
        Dataset::read_csv(
            &space,
            BLOCKWORLD_FRONT_CSV.as_bytes(),
            "blockworld_front.csv",
        )
    }

    pub fn space(&self) -> Result<MixedDesignSpace> {
        MixedDesignSpace::new(
            Vec::new(),
            self.names
                .iter()
                .zip(&self.levels)
                .map(|(n, &l)| QualitativeVar {
                    name: n.clone(),
                    num_levels: l,
                })
                .collect(),
        )
    }

    pub fn lcd(&self, a: usize, c: usize) -> f64 {
        self.lcd[a - 1][c - 1]
    }

    pub fn eval(&self, point: &MixedPoint) -> Result<[f64; 2]> {
        validate(point, &self.space()?)?;
        let [a, b, c, d] = [point.t[0], point.t[1], point.t[2], point.t[3]];
        let lcd = self.lcd(a, c);
        let eb = self.eps_b[b - 1];
        let ed = self.eps_d[d - 1];
        let y1 = self.g1.intercept + self.g1.slope * lcd + eb[0] + ed[0];
        let y2 = self.g2.scale * (-lcd / self.g2.length).exp() + eb[1] + ed[1];
        Ok([y1, y2])
    }
}

impl Objectives for BlockWorld {
    fn n_objectives(&self) -> usize {
        2
    }

    fn evaluate(&self, point: &MixedPoint) -> Result<Vec<f64>> {
        Ok(self.eval(point)?.to_vec())
    }
}
