use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::mobo::archive::Direction;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Augmentation weight of the Tchebycheff scalarization.
pub const AUGMENTATION: f64 = 0.05;

fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn norm_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Closed-form expected improvement over `incumbent`.
///
/// With `delta` the signed improvement of `mean` (positive is better),
/// `EI = delta * Phi(delta / sd) + sd * phi(delta / sd)`, and `max(delta, 0)`
/// when `sd = 0`.
pub fn expected_improvement(mean: f64, sd: f64, incumbent: f64, direction: Direction) -> f64 {
    let delta = direction.orient(mean - incumbent);
    improvement(delta, sd)
}

fn improvement(delta: f64, sd: f64) -> f64 {
    if !(sd > 0.0) {
        return delta.max(0.0);
    }
    let z = delta / sd;
    (delta * norm_cdf(z) + sd * norm_pdf(z)).max(0.0)
}

/// Posterior summary of one objective at a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    pub sd: f64,
}

/// Random-weight augmented Tchebycheff scalarization on range-normalized
/// regrets, `s(y) = max_k w_k f_k + rho * sum_k w_k f_k` with
/// `f_k = (best_k - y_k) / range_k`; smaller is better.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scalarizer {
    pub weights: Vec<f64>,
    pub directions: Vec<Direction>,
    /// Per objective: best oriented value and range over the reference set.
    best: Vec<f64>,
    range: Vec<f64>,
    incumbent: f64,
}

impl Scalarizer {
    /// Normalize by the spread of `reference` (the evaluated outputs); the
    /// incumbent is the best scalarized reference value.
    pub fn new(
        weights: Vec<f64>,
        directions: Vec<Direction>,
        reference: &[Vec<f64>],
    ) -> Result<Self> {
        let k = directions.len();
        if weights.len() != k {
            return Err(Error::DimensionMismatch {
                what: "scalarization weights",
                expected: k,
                found: weights.len(),
            });
        }
        if reference.is_empty() {
            return Err(Error::InvalidArgument(
                "scalarization needs a nonempty archive".into(),
            ));
        }
        let mut best = vec![f64::NEG_INFINITY; k];
        let mut worst = vec![f64::INFINITY; k];
        for row in reference {
            for j in 0..k {
                let v = directions[j].orient(row[j]);
                best[j] = best[j].max(v);
                worst[j] = worst[j].min(v);
            }
        }
        let range = best
            .iter()
            .zip(&worst)
            .map(|(b, w)| if b - w > 0.0 { b - w } else { 1.0 })
            .collect();
        let mut s = Self {
            weights,
            directions,
            best,
            range,
            incumbent: 0.0,
        };
        s.incumbent = reference
            .iter()
            .map(|y| s.value(y))
            .fold(f64::INFINITY, f64::min);
        Ok(s)
    }

    pub fn incumbent(&self) -> f64 {
        self.incumbent
    }

    fn regrets(&self, y: &[f64]) -> Vec<f64> {
        (0..y.len())
            .map(|j| (self.best[j] - self.directions[j].orient(y[j])) / self.range[j])
            .collect()
    }

    /// Scalarized value of an objective vector.
    pub fn value(&self, y: &[f64]) -> f64 {
        let f = self.regrets(y);
        let terms: Vec<f64> = f.iter().zip(&self.weights).map(|(a, w)| a * w).collect();
        terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            + AUGMENTATION * terms.iter().sum::<f64>()
    }

    /// Mean and standard deviation of the scalarized value under independent
    /// Gaussian objectives, linearized on the active max branch.
    pub fn propagate(&self, preds: &[Prediction]) -> Prediction {
        let means: Vec<f64> = preds.iter().map(|p| p.mean).collect();
        let f = self.regrets(&means);
        let mut active = 0;
        for j in 1..f.len() {
            if self.weights[j] * f[j] > self.weights[active] * f[active] {
                active = j;
            }
        }
        let var: f64 = preds
            .iter()
            .enumerate()
            .map(|(j, p)| {
                let w = self.weights[j] * (AUGMENTATION + if j == active { 1.0 } else { 0.0 });
                let d = w / self.range[j];
                d * d * p.sd * p.sd
            })
            .sum();
        Prediction {
            mean: self.value(&means),
            sd: var.sqrt(),
        }
    }

    /// Expected improvement of the scalarized value over the incumbent.
    pub fn acquisition(&self, preds: &[Prediction]) -> (f64, f64) {
        let s = self.propagate(preds);
        (improvement(self.incumbent - s.mean, s.sd), s.mean)
    }
}

/// Multi-objective acquisition of one candidate: EI of the scalarized
/// prediction against the archive's best scalarized value.
pub fn mo_acquisition(preds: &[Prediction], scalarizer: &Scalarizer) -> f64 {
    scalarizer.acquisition(preds).0
}

/// Weights drawn uniformly from the probability simplex.
pub fn simplex_weights<R: Rng>(k: usize, rng: &mut R) -> Vec<f64> {
    let e: Vec<f64> = (0..k).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = e.iter().sum();
    e.iter().map(|v| v / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn ei_examples() {
        assert!(
            (expected_improvement(0.0, 1.0, 0.0, Direction::Maximize) - INV_SQRT_2PI).abs() < 1e-15
        );
        assert_eq!(
            expected_improvement(-1.0, 0.0, 0.0, Direction::Maximize),
            0.0
        );
        assert!((expected_improvement(1.0, 1e-12, 0.0, Direction::Maximize) - 1.0).abs() < 1e-9);
        assert!((expected_improvement(-1.0, 1e-12, 0.0, Direction::Minimize) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn weights_on_simplex() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let w = simplex_weights(3, &mut rng);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(w.iter().all(|v| *v >= 0.0));
        }
    }
}
