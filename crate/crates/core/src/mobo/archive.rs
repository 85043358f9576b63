use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::fnv1a;
use crate::space::{MixedPoint, PointKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Maximize,
    Minimize,
}

impl Direction {
    /// Value oriented so that larger is better.
    #[inline]
    pub fn orient(self, v: f64) -> f64 {
        match self {
            Direction::Maximize => v,
            Direction::Minimize => -v,
        }
    }
}

/// `a` dominates `b`: no worse in every objective, strictly better in one.
pub fn dominates(a: &[f64], b: &[f64], directions: &[Direction]) -> bool {
    let mut strictly = false;
    for ((&x, &y), d) in a.iter().zip(b).zip(directions) {
        let (x, y) = (d.orient(x), d.orient(y));
        if x < y {
            return false;
        }
        strictly |= x > y;
    }
    strictly
}

/// Indices of the nondominated rows, in input order. Equal vectors are all
/// retained.
///
/// Rows are visited in decreasing lexicographic order of their oriented
/// objectives; a later row can never dominate an earlier one, so each row
/// only needs checking against the front found so far.
pub fn pareto_filter(objectives: &[Vec<f64>], directions: &[Direction]) -> Vec<usize> {
    let oriented: Vec<Vec<f64>> = objectives
        .iter()
        .map(|row| {
            row.iter()
                .zip(directions)
                .map(|(&v, d)| d.orient(v))
                .collect()
        })
        .collect();
    let mut order: Vec<usize> = (0..objectives.len()).collect();
    order.sort_by(|&i, &j| {
        oriented[j]
            .iter()
            .zip(&oriented[i])
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
            .then(i.cmp(&j))
    });
    let maximize = vec![Direction::Maximize; directions.len()];
    let mut front: Vec<usize> = Vec::new();
    for i in order {
        if !front
            .iter()
            .any(|&f| dominates(&oriented[f], &oriented[i], &maximize))
        {
            front.push(i);
        }
    }
    front.sort_unstable();
    front
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub point: MixedPoint,
    pub objectives: Vec<f64>,
    pub iteration: usize,
    pub on_front: bool,
}

/// Evaluated designs with incrementally maintained nondominated flags.
#[derive(Debug, Clone, Default)]
pub struct ParetoArchive {
    directions: Vec<Direction>,
    entries: Vec<ArchiveEntry>,
    index: HashMap<PointKey, usize>,
}

impl ParetoArchive {
    pub fn new(directions: Vec<Direction>) -> Self {
        Self {
            directions,
            entries: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ArchiveEntry] {
        &self.entries
    }

    pub fn contains(&self, key: &PointKey) -> bool {
        self.index.contains_key(key)
    }

    pub fn get(&self, key: &PointKey) -> Option<&ArchiveEntry> {
        self.index.get(key).map(|&i| &self.entries[i])
    }

    /// Add an evaluated design. Returns whether it joined the front.
    pub fn insert(
        &mut self,
        point: MixedPoint,
        objectives: Vec<f64>,
        iteration: usize,
    ) -> Result<bool> {
        if objectives.len() != self.directions.len() {
            return Err(Error::DimensionMismatch {
                what: "objective vector",
                expected: self.directions.len(),
                found: objectives.len(),
            });
        }
        if objectives.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite objective value".into()));
        }
        let key = point.key();
        if self.index.contains_key(&key) {
            return Err(Error::InvalidArgument(format!(
                "design {:?} already evaluated",
                point.t
            )));
        }
        let dirs = &self.directions;
        let dominated = self
            .entries
            .iter()
            .any(|e| e.on_front && dominates(&e.objectives, &objectives, dirs));
        if !dominated {
            for e in self.entries.iter_mut().filter(|e| e.on_front) {
                if dominates(&objectives, &e.objectives, dirs) {
                    e.on_front = false;
                }
            }
        }
        self.index.insert(key, self.entries.len());
        self.entries.push(ArchiveEntry {
            point,
            objectives,
            iteration,
            on_front: !dominated,
        });
        Ok(!dominated)
    }

    pub fn front(&self) -> Vec<&ArchiveEntry> {
        self.entries.iter().filter(|e| e.on_front).collect()
    }

    pub fn front_indices(&self) -> Vec<usize> {
        (0..self.entries.len())
            .filter(|&i| self.entries[i].on_front)
            .collect()
    }

    /// Front recomputed from scratch (for consistency checks).
    pub fn recompute_front(&self) -> Vec<usize> {
        let objs: Vec<Vec<f64>> = self.entries.iter().map(|e| e.objectives.clone()).collect();
        pareto_filter(&objs, &self.directions)
    }

    pub fn front_keys(&self) -> Vec<PointKey> {
        let mut keys: Vec<PointKey> = self.front().iter().map(|e| e.point.key()).collect();
        keys.sort();
        keys
    }

    /// Order-independent FNV-1a hash of the front's design keys.
    pub fn front_hash(&self) -> u64 {
        let text = self
            .front_keys()
            .iter()
            .map(|k| format!("{k:?}"))
            .collect::<Vec<_>>()
            .join(";");
        fnv1a(text.as_bytes())
    }

    /// Whether every design in `front` has been evaluated.
    pub fn contains_all(&self, front: &[PointKey]) -> bool {
        front.iter().all(|k| self.index.contains_key(k))
    }

    /// Two-objective dominated hypervolume with respect to `reference`
    /// (`None` for other objective counts).
    pub fn hypervolume(&self, reference: &[f64]) -> Option<f64> {
        if self.directions.len() != 2 || reference.len() != 2 {
            return None;
        }
        let r: Vec<f64> = reference
            .iter()
            .zip(&self.directions)
            .map(|(&v, d)| d.orient(v))
            .collect();
        let mut pts: Vec<[f64; 2]> = self
            .front()
            .iter()
            .map(|e| {
                [
                    self.directions[0].orient(e.objectives[0]),
                    self.directions[1].orient(e.objectives[1]),
                ]
            })
            .filter(|p| p[0] > r[0] && p[1] > r[1])
            .collect();
        pts.sort_by(|a, b| b[0].total_cmp(&a[0]).then(b[1].total_cmp(&a[1])));
        let mut hv = 0.0;
        let mut y_done = r[1];
        for p in pts {
            if p[1] > y_done {
                hv += (p[0] - r[0]) * (p[1] - y_done);
                y_done = p[1];
            }
        }
        Some(hv)
    }
}
