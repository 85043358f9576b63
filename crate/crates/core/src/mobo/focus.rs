use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gsa::SobolIndices;
use crate::space::{MixedDesignSpace, VarKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FocusRule {
    /// Variables whose TSI reaches this fraction of the largest TSI on any objective.
    TsiThreshold(f64),
    /// The `k` variables with the largest TSI (maximum over objectives).
    TopK(usize),
}

impl Default for FocusRule {
    fn default() -> Self {
        FocusRule::TsiThreshold(0.5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocusSelection {
    /// Focus variable indices in space order.
    pub variables: Vec<usize>,
    pub names: Vec<String>,
    pub rule: FocusRule,
    pub sources: Vec<SobolIndices>,
}

/// Choose the high-sensitivity qualitative variables searched first.
///
/// Only qualitative variables are eligible. The result always has between 1
/// and `d - 1` members; when the rule would take every variable, the one with
/// the lowest TSI is dropped (ties: lowest MSI, then highest index).
pub fn select_focus(
    indices: &[SobolIndices],
    space: &MixedDesignSpace,
    rule: FocusRule,
) -> Result<FocusSelection> {
    if indices.is_empty() {
        return Err(Error::InvalidArgument(
            "focus selection needs indices for at least one objective".into(),
        ));
    }
    if indices.iter().any(|s| s.variables.len() != space.dim()) {
        return Err(Error::InvalidArgument(
            "indices do not match the design space".into(),
        ));
    }
    let eligible: Vec<usize> = (0..space.dim())
        .filter(|&i| matches!(space.kind(i), VarKind::Qualitative(_)))
        .collect();
    if eligible.is_empty() {
        return Err(Error::InvalidArgument(
            "focus selection needs a qualitative variable".into(),
        ));
    }
    let max_tsi = |i: usize| {
        indices
            .iter()
            .map(|s| s.variables[i].tsi)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let max_msi = |i: usize| {
        indices
            .iter()
            .map(|s| s.variables[i].msi)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    // strongest first: TSI desc, MSI desc, index asc
    let mut ranked = eligible.clone();
    ranked.sort_by(|&a, &b| {
        max_tsi(b)
            .total_cmp(&max_tsi(a))
            .then(max_msi(b).total_cmp(&max_msi(a)))
            .then(a.cmp(&b))
    });

    let mut chosen: Vec<usize> = match rule {
        FocusRule::TsiThreshold(frac) => {
            let peak: Vec<f64> = indices
                .iter()
                .map(|s| {
                    eligible
                        .iter()
                        .map(|&i| s.variables[i].tsi)
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect();
            ranked
                .iter()
                .copied()
                .filter(|&i| {
                    indices
                        .iter()
                        .zip(&peak)
                        .any(|(s, p)| s.variables[i].tsi >= frac * p)
                })
                .collect()
        }
        FocusRule::TopK(k) => ranked.iter().copied().take(k).collect(),
    };
    if chosen.is_empty() {
        chosen.push(ranked[0]);
    }
    let cap = space.dim().saturating_sub(1).max(1);
    // `ranked` order puts the weakest last, so truncation drops it first
    chosen.truncate(cap);
    chosen.sort_unstable();
    Ok(FocusSelection {
        names: chosen.iter().map(|&i| space.name(i).to_string()).collect(),
        variables: chosen,
        rule,
        sources: indices.to_vec(),
    })
}
