//! Mixed quantitative/qualitative design spaces, points and datasets.
//!
//! A design point is `w = [x, t]`: `q` bounded real variables followed by `m`
//! categorical variables. Levels are 1-based labels and are never used as
//! numbers by any model.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantitativeVar {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualitativeVar {
    pub name: String,
    pub num_levels: usize,
}

/// Kind of the `i`-th variable in declared order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    /// Index into the quantitative block.
    Quantitative(usize),
    /// Index into the qualitative block.
    Qualitative(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixedDesignSpace {
    quantitative: Vec<QuantitativeVar>,
    qualitative: Vec<QualitativeVar>,
}

#[derive(Deserialize)]
struct RawSpace {
    #[serde(default)]
    quantitative: Vec<QuantitativeVar>,
    #[serde(default)]
    qualitative: Vec<QualitativeVar>,
}

impl<'de> Deserialize<'de> for MixedDesignSpace {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawSpace::deserialize(d)?;
        MixedDesignSpace::new(raw.quantitative, raw.qualitative).map_err(serde::de::Error::custom)
    }
}

impl MixedDesignSpace {
    pub fn new(
        quantitative: Vec<QuantitativeVar>,
        qualitative: Vec<QualitativeVar>,
    ) -> Result<Self> {
        if quantitative.is_empty() && qualitative.is_empty() {
            return Err(Error::InvalidSpace("space has no variables".into()));
        }
        for v in &quantitative {
            if !(v.lower.is_finite() && v.upper.is_finite() && v.lower < v.upper) {
                return Err(Error::InvalidSpace(format!(
                    "variable `{}` needs finite lower < upper, got [{}, {}]",
                    v.name, v.lower, v.upper
                )));
            }
        }
        for v in &qualitative {
            if v.num_levels < 2 {
                return Err(Error::InvalidSpace(format!(
                    "variable `{}` needs at least 2 levels, got {}",
                    v.name, v.num_levels
                )));
            }
        }
        let mut seen = HashMap::new();
        for name in quantitative
            .iter()
            .map(|v| &v.name)
            .chain(qualitative.iter().map(|v| &v.name))
        {
            if name.is_empty() {
                return Err(Error::InvalidSpace("empty variable name".into()));
            }
            if seen.insert(name.clone(), ()).is_some() {
                return Err(Error::InvalidSpace(format!(
                    "duplicate variable name `{name}`"
                )));
            }
        }
        Ok(Self {
            quantitative,
            qualitative,
        })
    }

    /// Convenience constructor from `(name, lower, upper)` and `(name, levels)` tuples.
    pub fn from_parts(quant: &[(&str, f64, f64)], qual: &[(&str, usize)]) -> Result<Self> {
        Self::new(
            quant
                .iter()
                .map(|&(n, lower, upper)| QuantitativeVar {
                    name: n.to_string(),
                    lower,
                    upper,
                })
                .collect(),
            qual.iter()
                .map(|&(n, num_levels)| QualitativeVar {
                    name: n.to_string(),
                    num_levels,
                })
                .collect(),
        )
    }

    pub fn quantitative(&self) -> &[QuantitativeVar] {
        &self.quantitative
    }

    pub fn qualitative(&self) -> &[QualitativeVar] {
        &self.qualitative
    }

    pub fn q(&self) -> usize {
        self.quantitative.len()
    }

    pub fn m(&self) -> usize {
        self.qualitative.len()
    }

    pub fn dim(&self) -> usize {
        self.q() + self.m()
    }

    pub fn levels(&self) -> Vec<usize> {
        self.qualitative.iter().map(|v| v.num_levels).collect()
    }

    pub fn kind(&self, i: usize) -> VarKind {
        if i < self.q() {
            VarKind::Quantitative(i)
        } else {
            VarKind::Qualitative(i - self.q())
        }
    }

    pub fn name(&self, i: usize) -> &str {
        match self.kind(i) {
            VarKind::Quantitative(k) => &self.quantitative[k].name,
            VarKind::Qualitative(k) => &self.qualitative[k].name,
        }
    }

    pub fn names(&self) -> Vec<String> {
        (0..self.dim()).map(|i| self.name(i).to_string()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        (0..self.dim()).find(|&i| self.name(i) == name)
    }

    /// Number of distinct qualitative combinations, `prod l_j`.
    pub fn cardinality(&self) -> Result<u64> {
        self.qualitative.iter().try_fold(1u64, |acc, v| {
            acc.checked_mul(v.num_levels as u64)
                .ok_or_else(|| Error::InvalidSpace("qualitative cardinality overflows u64".into()))
        })
    }

    pub fn is_qualitative_only(&self) -> bool {
        self.q() == 0
    }

    /// Sub-space made of the given qualitative variables (indices into the
    /// qualitative block), in the given order.
    pub fn qualitative_subspace(&self, which: &[usize]) -> Result<Self> {
        let vars = which
            .iter()
            .map(|&j| {
                self.qualitative.get(j).cloned().ok_or_else(|| {
                    Error::InvalidArgument(format!("qualitative index {j} out of range"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(Vec::new(), vars)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.as_ref().display()),
            ))
        })?;
        serde_json::from_str(&text).map_err(|e| {
            Error::parse(
                &path.as_ref().display().to_string(),
                e.line(),
                e.column(),
                e.to_string(),
            )
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedPoint {
    pub x: Vec<f64>,
    /// 1-based level labels.
    pub t: Vec<usize>,
}

impl MixedPoint {
    pub fn new(x: Vec<f64>, t: Vec<usize>) -> Self {
        Self { x, t }
    }

    pub fn qualitative(t: Vec<usize>) -> Self {
        Self { x: Vec::new(), t }
    }

    pub fn quantitative(x: Vec<f64>) -> Self {
        Self { x, t: Vec::new() }
    }

    /// Bitwise identity key, usable in hash maps.
    pub fn key(&self) -> PointKey {
        PointKey {
            x: self.x.iter().map(|v| v.to_bits()).collect(),
            t: self.t.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PointKey {
    t: Vec<usize>,
    x: Vec<u64>,
}

/// Check that `point` belongs to `space`.
pub fn validate(point: &MixedPoint, space: &MixedDesignSpace) -> Result<()> {
    if point.x.len() != space.q() {
        return Err(Error::DimensionMismatch {
            what: "quantitative coordinates",
            expected: space.q(),
            found: point.x.len(),
        });
    }
    if point.t.len() != space.m() {
        return Err(Error::DimensionMismatch {
            what: "qualitative coordinates",
            expected: space.m(),
            found: point.t.len(),
        });
    }
    for (v, &value) in space.quantitative.iter().zip(&point.x) {
        if !(value >= v.lower && value <= v.upper) {
            return Err(Error::BoundViolation {
                name: v.name.clone(),
                value,
                lower: v.lower,
                upper: v.upper,
            });
        }
    }
    for (v, &level) in space.qualitative.iter().zip(&point.t) {
        if level < 1 || level > v.num_levels {
            return Err(Error::LevelOutOfRange {
                name: v.name.clone(),
                level,
                levels: v.num_levels,
            });
        }
    }
    Ok(())
}

/// Inputs with one or more real-valued responses per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    space: MixedDesignSpace,
    inputs: Vec<MixedPoint>,
    outputs: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(
        space: MixedDesignSpace,
        inputs: Vec<MixedPoint>,
        outputs: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::InvalidDataset(
                "dataset must contain at least one row".into(),
            ));
        }
        if inputs.len() != outputs.len() {
            return Err(Error::InvalidDataset(format!(
                "{} inputs but {} output rows",
                inputs.len(),
                outputs.len()
            )));
        }
        let p = outputs[0].len();
        if p == 0 {
            return Err(Error::InvalidDataset(
                "dataset has no response columns".into(),
            ));
        }
        let mut seen: HashMap<PointKey, usize> = HashMap::with_capacity(inputs.len());
        for (row, (input, out)) in inputs.iter().zip(&outputs).enumerate() {
            validate(input, &space)?;
            if out.len() != p {
                return Err(Error::InvalidDataset(format!(
                    "row {row} has {} responses, expected {p}",
                    out.len()
                )));
            }
            if let Some(v) = out.iter().find(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset(format!(
                    "row {row} has non-finite response {v}"
                )));
            }
            if let Some(&prev) = seen.get(&input.key()) {
                if outputs[prev] != *out {
                    return Err(Error::InvalidDataset(format!(
                        "rows {prev} and {row} share an input but disagree on outputs"
                    )));
                }
            } else {
                seen.insert(input.key(), row);
            }
        }
        Ok(Self {
            space,
            inputs,
            outputs,
        })
    }

    pub fn space(&self) -> &MixedDesignSpace {
        &self.space
    }

    pub fn inputs(&self) -> &[MixedPoint] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Vec<f64>] {
        &self.outputs
    }

    pub fn n(&self) -> usize {
        self.inputs.len()
    }

    pub fn p(&self) -> usize {
        self.outputs[0].len()
    }

    pub fn response(&self, k: usize) -> Vec<f64> {
        self.outputs.iter().map(|row| row[k]).collect()
    }

    /// Single-response view of column `k`.
    pub fn select_response(&self, k: usize) -> Result<Self> {
        if k >= self.p() {
            return Err(Error::InvalidArgument(format!(
                "response {k} out of range (p = {})",
                self.p()
            )));
        }
        Ok(Self {
            space: self.space.clone(),
            inputs: self.inputs.clone(),
            outputs: self.outputs.iter().map(|r| vec![r[k]]).collect(),
        })
    }

    /// Rows with the given indices, in order.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        Self::new(
            self.space.clone(),
            rows.iter().map(|&i| self.inputs[i].clone()).collect(),
            rows.iter().map(|&i| self.outputs[i].clone()).collect(),
        )
    }

    pub fn header(&self) -> Vec<String> {
        csv_header(&self.space, self.p())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(self.header())?;
        for (input, out) in self.inputs.iter().zip(&self.outputs) {
            let rec = input
                .x
                .iter()
                .map(|v| v.to_string())
                .chain(input.t.iter().map(|v| v.to_string()))
                .chain(out.iter().map(|v| v.to_string()));
            wr.write_record(rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Read the `x_<name>…,t_<name>…,y_<k>…` schema against a known space.
    pub fn read_csv<R: Read>(space: &MixedDesignSpace, r: R, source: &str) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(r);
        let header = rd
            .headers()
            .map_err(|e| Error::parse(source, 1, 1, e.to_string()))?
            .clone();
        let d = space.dim();
        for i in 0..d {
            let expected = column_name(space, i);
            match header.get(i) {
                Some(h) if h == expected => {}
                Some(h) => {
                    return Err(Error::parse(
                        source,
                        1,
                        i + 1,
                        format!("expected column `{expected}`, found `{h}`"),
                    ))
                }
                None => {
                    return Err(Error::parse(
                        source,
                        1,
                        i + 1,
                        format!("missing column `{expected}`"),
                    ))
                }
            }
        }
        let p = header.len().saturating_sub(d);
        if p == 0 {
            return Err(Error::parse(source, 1, d + 1, "no y_<k> response columns"));
        }
        for (k, h) in header.iter().enumerate().skip(d) {
            if !h.starts_with("y_") {
                return Err(Error::parse(
                    source,
                    1,
                    k + 1,
                    format!("response column `{h}` must start with y_"),
                ));
            }
        }
        let mut inputs = Vec::new();
        let mut outputs = Vec::new();
        for (row, rec) in rd.records().enumerate() {
            let line = row + 2;
            let rec = rec.map_err(|e| Error::parse(source, line, 1, e.to_string()))?;
            if rec.len() != d + p {
                return Err(Error::parse(
                    source,
                    line,
                    rec.len().min(d + p) + 1,
                    format!("expected {} fields, found {}", d + p, rec.len()),
                ));
            }
            let real = |c: usize| -> Result<f64> {
                rec[c].parse::<f64>().map_err(|_| {
                    Error::parse(
                        source,
                        line,
                        c + 1,
                        format!("`{}` is not a number", &rec[c]),
                    )
                })
            };
            let x = (0..space.q()).map(real).collect::<Result<Vec<_>>>()?;
            let t = (space.q()..d)
                .map(|c| {
                    rec[c].parse::<usize>().map_err(|_| {
                        Error::parse(
                            source,
                            line,
                            c + 1,
                            format!("`{}` is not a level index", &rec[c]),
                        )
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let point = MixedPoint::new(x, t);
            validate(&point, space).map_err(|e| Error::parse(source, line, 1, e.to_string()))?;
            inputs.push(point);
            outputs.push((d..d + p).map(real).collect::<Result<Vec<_>>>()?);
        }
        if inputs.is_empty() {
            return Err(Error::parse(source, 2, 1, "no data rows"));
        }
        Self::new(space.clone(), inputs, outputs)
    }

    pub fn load_csv(space: &MixedDesignSpace, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            ))
        })?;
        Self::read_csv(space, file, &path.display().to_string())
    }
}

pub fn column_name(space: &MixedDesignSpace, i: usize) -> String {
    match space.kind(i) {
        VarKind::Quantitative(_) => format!("x_{}", space.name(i)),
        VarKind::Qualitative(_) => format!("t_{}", space.name(i)),
    }
}

pub fn csv_header(space: &MixedDesignSpace, p: usize) -> Vec<String> {
    (0..space.dim())
        .map(|i| column_name(space, i))
        .chain((1..=p).map(|k| format!("y_{k}")))
        .collect()
}

/// Invertible affine conditioning applied before model fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    /// Original `(lower, upper)` of each quantitative variable.
    pub quantitative: Vec<(f64, f64)>,
    pub output_mean: Vec<f64>,
    pub output_scale: Vec<f64>,
    /// Output columns with zero variance; these keep identity scaling.
    pub degenerate: Vec<bool>,
}

impl Transform {
    pub fn any_degenerate(&self) -> bool {
        self.degenerate.iter().any(|&d| d)
    }

    pub fn point_to_unit(&self, p: &MixedPoint) -> MixedPoint {
        MixedPoint {
            x: p.x
                .iter()
                .zip(&self.quantitative)
                .map(|(&v, &(lo, hi))| (v - lo) / (hi - lo))
                .collect(),
            t: p.t.clone(),
        }
    }

    pub fn point_from_unit(&self, p: &MixedPoint) -> MixedPoint {
        MixedPoint {
            x: p.x
                .iter()
                .zip(&self.quantitative)
                .map(|(&u, &(lo, hi))| lo + u * (hi - lo))
                .collect(),
            t: p.t.clone(),
        }
    }

    pub fn output_forward(&self, k: usize, y: f64) -> f64 {
        (y - self.output_mean[k]) / self.output_scale[k]
    }

    pub fn output_inverse(&self, k: usize, z: f64) -> f64 {
        z * self.output_scale[k] + self.output_mean[k]
    }

    pub fn variance_inverse(&self, k: usize, v: f64) -> f64 {
        v * self.output_scale[k] * self.output_scale[k]
    }

    /// Map a standardized dataset back to the original scale.
    pub fn invert(
        &self,
        standardized: &Dataset,
        original_space: &MixedDesignSpace,
    ) -> Result<Dataset> {
        Dataset::new(
            original_space.clone(),
            standardized
                .inputs
                .iter()
                .map(|p| self.point_from_unit(p))
                .collect(),
            standardized
                .outputs
                .iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .map(|(k, &z)| self.output_inverse(k, z))
                        .collect()
                })
                .collect(),
        )
    }
}

/// Map quantitative inputs to `[0, 1]` and z-score each response column.
///
/// Constant response columns are passed through unchanged and flagged in
/// [`Transform::degenerate`].
pub fn standardize(data: &Dataset) -> Result<(Dataset, Transform)> {
    let n = data.n();
    if n < 2 {
        return Err(Error::InvalidDataset(
            "standardization needs at least 2 rows".into(),
        ));
    }
    let space = data.space();
    let unit_space = MixedDesignSpace::new(
        space
            .quantitative
            .iter()
            .map(|v| QuantitativeVar {
                name: v.name.clone(),
                lower: 0.0,
                upper: 1.0,
            })
            .collect(),
        space.qualitative.clone(),
    )?;
    let p = data.p();
    let mut output_mean = Vec::with_capacity(p);
    let mut output_scale = Vec::with_capacity(p);
    let mut degenerate = Vec::with_capacity(p);
    for k in 0..p {
        let col = data.response(k);
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        let biggest = col.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if !(sd > f64::EPSILON * biggest) || sd == 0.0 {
            log::warn!("response column {k} is constant; leaving it unscaled");
            output_mean.push(0.0);
            output_scale.push(1.0);
            degenerate.push(true);
        } else {
            output_mean.push(mean);
            output_scale.push(sd);
            degenerate.push(false);
        }
    }
    let transform = Transform {
        quantitative: space
            .quantitative
            .iter()
            .map(|v| (v.lower, v.upper))
            .collect(),
        output_mean,
        output_scale,
        degenerate,
    };
    let inputs = data
        .inputs
        .iter()
        .map(|p| transform.point_to_unit(p))
        .collect();
    let outputs = data
        .outputs
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(k, &y)| transform.output_forward(k, y))
                .collect()
        })
        .collect();
    Ok((Dataset::new(unit_space, inputs, outputs)?, transform))
}

/// Every qualitative combination of a qualitative-only space, in
/// lexicographic order (last variable fastest).
pub fn full_factorial(space: &MixedDesignSpace, limit: u64) -> Result<Vec<MixedPoint>> {
    if !space.is_qualitative_only() {
        return Err(Error::InvalidArgument(
            "full factorial enumeration needs a qualitative-only space".into(),
        ));
    }
    let card = space.cardinality()?;
    if card > limit {
        return Err(Error::InvalidArgument(format!(
            "space cardinality {card} exceeds enumeration limit {limit}"
        )));
    }
    let levels = space.levels();
    let mut out = Vec::with_capacity(card as usize);
    let mut t = vec![1usize; levels.len()];
    loop {
        out.push(MixedPoint::qualitative(t.clone()));
        let mut j = levels.len();
        loop {
            if j == 0 {
                return Ok(out);
            }
            j -= 1;
            if t[j] < levels[j] {
                t[j] += 1;
                break;
            }
            t[j] = 1;
        }
    }
}
