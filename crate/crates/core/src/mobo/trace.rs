use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mobo::archive::{Direction, ParetoArchive};
use crate::mobo::focus::FocusSelection;
use crate::seed::fnv1a;
use crate::space::{MixedPoint, PointKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Doe,
    Vanilla,
    Stage1,
    Stage2,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Doe => "doe",
            Stage::Vanilla => "vanilla",
            Stage::Stage1 => "stage1",
            Stage::Stage2 => "stage2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// 0 for the DOE, then 1, 2, ... per adaptive evaluation.
    pub iteration: usize,
    pub stage: Stage,
    pub point: MixedPoint,
    /// Acquisition value that selected the point (`None` for the DOE).
    pub acquisition: Option<f64>,
    pub objectives: Vec<f64>,
    /// Hash of the evaluated front after this record.
    pub front_hash: u64,
    pub seed: u64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum BoStatus {
    Running,
    BudgetExhausted,
    FrontFound,
    Stagnated,
    CandidatesExhausted,
    Aborted(String),
}

/// Append-only record of every evaluated design of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoTrace {
    pub seed: u64,
    pub variables: Vec<String>,
    pub directions: Vec<Direction>,
    records: Vec<TraceRecord>,
    pub status: BoStatus,
    pub focus: Option<FocusSelection>,
    /// Focus-variable level combinations kept after the first stage.
    pub stage1_optimal: Option<Vec<Vec<usize>>>,
}

impl BoTrace {
    pub fn new(seed: u64, variables: Vec<String>, directions: Vec<Direction>) -> Self {
        Self {
            seed,
            variables,
            directions,
            records: Vec::new(),
            status: BoStatus::Running,
            focus: None,
            stage1_optimal: None,
        }
    }

    pub(crate) fn push(&mut self, record: TraceRecord) {
        self.records.push(record);
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count(&self, stage: Stage) -> usize {
        self.records.iter().filter(|r| r.stage == stage).count()
    }

    /// Archive of every evaluated design.
    pub fn archive(&self) -> ParetoArchive {
        let mut a = ParetoArchive::new(self.directions.clone());
        for r in &self.records {
            a.insert(r.point.clone(), r.objectives.clone(), r.iteration)
                .expect("trace points are distinct and finite");
        }
        a
    }

    /// Number of evaluations (DOE included) after which every design of
    /// `front` had been evaluated.
    pub fn evaluations_to_front(&self, front: &[PointKey]) -> Option<usize> {
        let mut missing: std::collections::HashSet<&PointKey> = front.iter().collect();
        if missing.is_empty() {
            return Some(0);
        }
        for (i, r) in self.records.iter().enumerate() {
            missing.remove(&r.point.key());
            if missing.is_empty() {
                return Some(i + 1);
            }
        }
        None
    }

    /// Hash of everything except wall-clock times.
    pub fn fingerprint(&self) -> u64 {
        let mut text = format!(
            "{}|{:?}|{:?}|{:?}",
            self.seed,
            self.status,
            self.focus.as_ref().map(|f| &f.variables),
            self.stage1_optimal
        );
        for r in &self.records {
            text.push_str(&format!(
                "|{}:{}:{:?}:{:?}:{:?}:{:?}:{}",
                r.iteration,
                r.stage.as_str(),
                r.point.t,
                r.point.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                r.acquisition.map(f64::to_bits),
                r.objectives.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                r.front_hash
            ));
        }
        fnv1a(text.as_bytes())
    }

    /// `iteration,stage,<variables>,acquisition,y_1..,front_hash,seed,wall_time_s`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let k = self.directions.len();
        let mut header = vec!["iteration".to_string(), "stage".to_string()];
        header.extend(self.variables.iter().cloned());
        header.push("acquisition".into());
        header.extend((1..=k).map(|i| format!("y_{i}")));
        header.extend([
            "front_hash".to_string(),
            "seed".to_string(),
            "wall_time_s".to_string(),
        ]);
        wr.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![r.iteration.to_string(), r.stage.as_str().to_string()];
            row.extend(r.point.x.iter().map(|v| v.to_string()));
            row.extend(r.point.t.iter().map(|v| v.to_string()));
            row.push(r.acquisition.map(|a| a.to_string()).unwrap_or_default());
            row.extend(r.objectives.iter().map(|v| v.to_string()));
            row.push(format!("{:016x}", r.front_hash));
            row.push(r.seed.to_string());
            row.push(format!("{:.3}", r.wall_time_s));
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Per evaluation: front size and hypervolume, the reference point being
    /// the component-wise worst of all evaluated outputs.
    pub fn history(&self) -> Vec<HistoryRow> {
        let k = self.directions.len();
        let reference: Vec<f64> = (0..k)
            .map(|j| {
                let d = self.directions[j];
                self.records
                    .iter()
                    .map(|r| r.objectives[j])
                    .fold(None, |acc: Option<f64>, v| match acc {
                        None => Some(v),
                        Some(a) if d.orient(v) < d.orient(a) => Some(v),
                        keep => keep,
                    })
                    .unwrap_or(0.0)
            })
            .collect();
        let mut a = ParetoArchive::new(self.directions.clone());
        self.records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                a.insert(r.point.clone(), r.objectives.clone(), r.iteration)
                    .expect("trace points are distinct and finite");
                HistoryRow {
                    evaluations: i + 1,
                    iteration: r.iteration,
                    front_size: a.front().len(),
                    hypervolume: a.hypervolume(&reference),
                }
            })
            .collect()
    }

    pub fn write_history_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["evaluations", "iteration", "front_size", "hypervolume"])?;
        for h in self.history() {
            wr.write_record([
                h.evaluations.to_string(),
                h.iteration.to_string(),
                h.front_size.to_string(),
                h.hypervolume.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub evaluations: usize,
    pub iteration: usize,
    pub front_size: usize,
    pub hypervolume: Option<f64>,
}
