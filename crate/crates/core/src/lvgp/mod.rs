//! Latent Variable Gaussian Process.
//!
//! Each level of a qualitative variable is embedded as a point in a 2-D
//! latent plane; the kernel is the Gaussian correlation on the concatenation
//! of scaled quantitative inputs and latent coordinates:
//!
//! `c(h, h') = exp(-sum_i phi_i (x_i - x'_i)^2 - sum_j ||z_j - z'_j||^2)`
//!
//! Latent scales are absorbed into the coordinates themselves. Mean and
//! variance are profiled analytically; `log10 phi` and the free latent
//! coordinates are estimated by multi-start maximum likelihood.

mod likelihood;

use std::path::Path;

use nalgebra::{Cholesky, DVector, Dyn};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{minimize_box, BoxBounds, MinimizeOptions};
use crate::seed::rng_indexed;
use crate::space::{standardize, validate, Dataset, MixedDesignSpace, MixedPoint, Transform};

use likelihood::{profile, Design, Layout};
pub use likelihood::{DEGENERATE_PENALTY, MAX_NUGGET};

/// Latent coordinates of every level of every qualitative variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentMap {
    coords: Vec<Vec<[f64; 2]>>,
}

impl LatentMap {
    /// All levels at the origin.
    pub fn zeros(levels: &[usize]) -> Self {
        Self {
            coords: levels.iter().map(|&l| vec![[0.0, 0.0]; l]).collect(),
        }
    }

    /// Build a map, checking the identifiability pinning: level 1 at the
    /// origin, level 2 on the non-negative first axis.
    pub fn new(coords: Vec<Vec<[f64; 2]>>) -> Result<Self> {
        for (j, z) in coords.iter().enumerate() {
            if z.len() < 2 {
                return Err(Error::InvalidArgument(format!(
                    "latent variable {j} needs at least 2 levels"
                )));
            }
            if z.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "latent variable {j} has non-finite coordinates"
                )));
            }
            if z[0] != [0.0, 0.0] || z[1][1] != 0.0 || z[1][0] < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "latent variable {j} violates pinning (level 1 at origin, level 2 at (a >= 0, 0))"
                )));
            }
        }
        Ok(Self { coords })
    }

    /// Coordinates of 1-based `level` of qualitative variable `j`.
    pub fn coord(&self, j: usize, level: usize) -> Result<[f64; 2]> {
        let z = self
            .coords
            .get(j)
            .ok_or_else(|| Error::InvalidArgument(format!("no latent variable {j}")))?;
        if level == 0 || level > z.len() {
            return Err(Error::LevelOutOfRange {
                name: format!("t{}", j + 1),
                level,
                levels: z.len(),
            });
        }
        Ok(z[level - 1])
    }

    pub fn variable(&self, j: usize) -> &[[f64; 2]] {
        &self.coords[j]
    }

    pub fn num_variables(&self) -> usize {
        self.coords.len()
    }

    pub fn levels(&self) -> Vec<usize> {
        self.coords.iter().map(Vec::len).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.coords
            .iter()
            .flatten()
            .flatten()
            .fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// `h = [x; z(t_1); ...; z(t_m)]`.
pub fn to_latent(point: &MixedPoint, map: &LatentMap) -> Result<Vec<f64>> {
    if point.t.len() != map.num_variables() {
        return Err(Error::DimensionMismatch {
            what: "qualitative coordinates",
            expected: map.num_variables(),
            found: point.t.len(),
        });
    }
    let mut h = point.x.clone();
    for (j, &level) in point.t.iter().enumerate() {
        h.extend_from_slice(&map.coord(j, level)?);
    }
    Ok(h)
}

/// Gaussian correlation between two transformed inputs. The first
/// `phi.len()` entries are quantitative; the remainder are latent coordinates
/// with unit scale.
pub fn correlation(h: &[f64], h2: &[f64], phi: &[f64]) -> f64 {
    debug_assert_eq!(h.len(), h2.len());
    let q = phi.len();
    let quant: f64 = phi
        .iter()
        .zip(h.iter().zip(h2))
        .map(|(p, (a, b))| p * (a - b) * (a - b))
        .sum();
    let latent: f64 = h[q..]
        .iter()
        .zip(&h2[q..])
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    (-quant - latent).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LvgpHyperparams {
    pub log10_phi: Vec<f64>,
    pub mu: f64,
    pub sigma2: f64,
    pub nugget: f64,
}

impl LvgpHyperparams {
    pub fn phi(&self) -> Vec<f64> {
        self.log10_phi.iter().map(|v| 10f64.powf(*v)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub starts: usize,
    pub max_iters: usize,
    pub seed: u64,
    pub latent_box: f64,
    pub phi_log_range: (f64, f64),
    pub nugget: f64,
    /// Random starts draw latent coordinates from `[-r, r]`.
    pub init_latent_range: f64,
    /// Replaces the all-zeros first start (used to warm-start refits).
    #[serde(default)]
    pub warm_start: Option<Vec<f64>>,
    /// Add a start placing levels by their per-level response mean and std.
    #[serde(default)]
    pub data_start: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            starts: 8,
            max_iters: 200,
            seed: 0,
            latent_box: 10.0,
            phi_log_range: (-3.0, 3.0),
            nugget: 1e-8,
            init_latent_range: 2.0,
            warm_start: None,
            data_start: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartOutcome {
    pub start: usize,
    pub nll: f64,
    pub iterations: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub nll: f64,
    pub free_params: usize,
    pub best_start: usize,
    pub starts: Vec<StartOutcome>,
}

/// A fitted single-response LVGP.
#[derive(Debug, Clone)]
pub struct LvgpModel {
    space: MixedDesignSpace,
    training: Dataset,
    transform: Transform,
    latent: LatentMap,
    hyper: LvgpHyperparams,
    report: FitReport,
    // caches, rebuilt from the fields above
    layout: Layout,
    design: Design,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    l_inv_one: DVector<f64>,
    one_cinv_one: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    space: MixedDesignSpace,
    training: Dataset,
    transform: Transform,
    latent: LatentMap,
    hyperparams: LvgpHyperparams,
    report: FitReport,
}

const MODEL_FORMAT: &str = "mvgsa-lvgp/1";
const ORIGIN_SPREAD: f64 = 1e-2;
const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;
/// Spread of the level-statistics start; wide starts tend to lock the
/// latent layout into poor local optima.
const LEVEL_STATS_SCALE: f64 = 0.1;

fn layout_for(space: &MixedDesignSpace) -> Layout {
    Layout {
        q: space.q(),
        levels: space.levels(),
    }
}

fn design_for(data: &Dataset) -> Design {
    let n = data.n();
    let q = data.space().q();
    let m = data.space().m();
    let mut x = Vec::with_capacity(n * q);
    let mut t = Vec::with_capacity(n * m);
    for p in data.inputs() {
        x.extend_from_slice(&p.x);
        t.extend(p.t.iter().map(|l| l - 1));
    }
    Design { n, q, m, x, t }
}

/// Profiled negative log-likelihood `n/2 ln s2 + 1/2 ln|C|` for a
/// single-response dataset, with inputs used as given (no rescaling).
///
/// Returns [`DEGENERATE_PENALTY`] when the profiled variance collapses.
pub fn neg_log_likelihood(
    data: &Dataset,
    map: &LatentMap,
    phi: &[f64],
    nugget: f64,
) -> Result<f64> {
    let (design, y, layout, theta) = nll_inputs(data, map, phi)?;
    Ok(profile(&design, &y, &layout, &theta, nugget, false)?.nll)
}

/// Analytic gradient of [`neg_log_likelihood`] w.r.t. the free parameters
/// (`log10 phi`, then free latent coordinates).
pub fn neg_log_likelihood_gradient(
    data: &Dataset,
    map: &LatentMap,
    phi: &[f64],
    nugget: f64,
) -> Result<Vec<f64>> {
    let (design, y, layout, theta) = nll_inputs(data, map, phi)?;
    Ok(profile(&design, &y, &layout, &theta, nugget, true)?
        .grad
        .unwrap_or_default())
}

/// Free-parameter vector for a map and scale parameters.
pub fn pack_params(map: &LatentMap, phi: &[f64]) -> Vec<f64> {
    let layout = Layout {
        q: phi.len(),
        levels: map.levels(),
    };
    let log_phi: Vec<f64> = phi.iter().map(|p| p.log10()).collect();
    layout.pack(&log_phi, &map.coords)
}

/// Inverse of [`pack_params`].
pub fn unpack_params(space: &MixedDesignSpace, theta: &[f64]) -> Result<(LatentMap, Vec<f64>)> {
    let layout = layout_for(space);
    if theta.len() != layout.n_params() {
        return Err(Error::DimensionMismatch {
            what: "parameter vector",
            expected: layout.n_params(),
            found: theta.len(),
        });
    }
    let (phi, latent) = layout.unpack(theta);
    Ok((LatentMap { coords: latent }, phi))
}

fn nll_inputs(
    data: &Dataset,
    map: &LatentMap,
    phi: &[f64],
) -> Result<(Design, DVector<f64>, Layout, Vec<f64>)> {
    if data.p() != 1 {
        return Err(Error::InvalidArgument(
            "likelihood needs a single-response dataset".into(),
        ));
    }
    if data.n() < 2 {
        return Err(Error::InvalidDataset("likelihood needs n >= 2".into()));
    }
    let layout = layout_for(data.space());
    if phi.len() != layout.q {
        return Err(Error::DimensionMismatch {
            what: "phi",
            expected: layout.q,
            found: phi.len(),
        });
    }
    if map.levels() != layout.levels {
        return Err(Error::InvalidArgument(
            "latent map does not match the space's levels".into(),
        ));
    }
    if phi.iter().any(|p| !(*p > 0.0)) {
        return Err(Error::InvalidArgument("phi must be positive".into()));
    }
    let theta = pack_params(map, phi);
    Ok((
        design_for(data),
        DVector::from_vec(data.response(0)),
        layout,
        theta,
    ))
}

/// Fit by multi-start maximum likelihood.
///
/// The first starts are deterministic: `config.warm_start` when given, then
/// latent coordinates from per-level response statistics when
/// `config.data_start` is set, then near-zero coordinates. Later ones are
/// drawn from a per-start seeded stream, so adding starts never changes
/// earlier ones.
pub fn fit(data: &Dataset, config: &FitConfig) -> Result<LvgpModel> {
    if data.p() != 1 {
        return Err(Error::InvalidArgument(format!(
            "fit needs a single-response dataset, got {} responses",
            data.p()
        )));
    }
    if data.n() < 2 {
        return Err(Error::InvalidDataset("fit needs at least 2 rows".into()));
    }
    if config.starts == 0 {
        return Err(Error::InvalidArgument(
            "at least one start is required".into(),
        ));
    }
    if !(config.nugget >= 1e-12 && config.nugget <= MAX_NUGGET) {
        return Err(Error::InvalidArgument(format!(
            "nugget {} outside [1e-12, 1e-2]",
            config.nugget
        )));
    }
    let (std_data, transform) = standardize(data)?;
    let layout = layout_for(data.space());
    let design = design_for(&std_data);
    let y = DVector::from_vec(std_data.response(0));
    let n_params = layout.n_params();
    if data.n() < n_params {
        log::warn!(
            "fitting {n_params} free parameters from only {} observations",
            data.n()
        );
    }
    let (lo, hi) = layout.bounds(config.phi_log_range, config.latent_box);
    let bounds = BoxBounds {
        lower: lo,
        upper: hi,
    };

    let starts: Vec<Vec<f64>> = (0..config.starts)
        .map(|s| start_point(&std_data, &layout, config, s, &bounds))
        .collect();
    let opts = MinimizeOptions {
        max_iters: config.max_iters,
        ..Default::default()
    };

    let outcomes: Vec<(Vec<f64>, StartOutcome)> = starts
        .into_par_iter()
        .enumerate()
        .map(|(s, x0)| {
            let objective =
                |theta: &[f64]| match profile(&design, &y, &layout, theta, config.nugget, true) {
                    Ok(p) => (p.nll, p.grad.unwrap_or_default()),
                    Err(_) => (f64::INFINITY, vec![0.0; theta.len()]),
                };
            let m = minimize_box(objective, &x0, &bounds, opts);
            (
                m.x,
                StartOutcome {
                    start: s,
                    nll: m.value,
                    iterations: m.iterations,
                    evaluations: m.evaluations,
                },
            )
        })
        .collect();

    let (best_idx, _) = outcomes
        .iter()
        .enumerate()
        .filter(|(_, (_, o))| o.nll.is_finite())
        .min_by(|a, b| a.1 .1.nll.total_cmp(&b.1 .1.nll).then(a.0.cmp(&b.0)))
        .ok_or_else(|| {
            Error::FitFailed(format!(
                "all {} starts failed to factorize the correlation matrix (n = {}, {} free parameters)",
                config.starts,
                data.n(),
                n_params
            ))
        })?;
    let theta = outcomes[best_idx].0.clone();
    let report = FitReport {
        nll: outcomes[best_idx].1.nll,
        free_params: n_params,
        best_start: best_idx,
        starts: outcomes.into_iter().map(|(_, o)| o).collect(),
    };
    let (_, latent) = layout.unpack(&theta);
    let p = profile(&design, &y, &layout, &theta, config.nugget, false)?;
    LvgpModel::assemble(
        data.clone(),
        transform,
        LatentMap { coords: latent },
        theta[..layout.q].to_vec(),
        config.nugget,
        report,
        Some(p),
    )
}

/// Condition a model on `data` with fixed latent map and scale parameters
/// (no likelihood optimization).
pub fn condition(data: &Dataset, params: &[f64], nugget: f64) -> Result<LvgpModel> {
    if data.p() != 1 {
        return Err(Error::InvalidArgument(
            "condition needs a single-response dataset".into(),
        ));
    }
    let (std_data, transform) = standardize(data)?;
    let layout = layout_for(data.space());
    if params.len() != layout.n_params() {
        return Err(Error::DimensionMismatch {
            what: "parameter vector",
            expected: layout.n_params(),
            found: params.len(),
        });
    }
    let design = design_for(&std_data);
    let y = DVector::from_vec(std_data.response(0));
    let p = profile(&design, &y, &layout, params, nugget, false)?;
    let report = FitReport {
        nll: p.nll,
        free_params: layout.n_params(),
        best_start: 0,
        starts: Vec::new(),
    };
    let (_, latent) = layout.unpack(params);
    LvgpModel::assemble(
        data.clone(),
        transform,
        LatentMap { coords: latent },
        params[..layout.q].to_vec(),
        nugget,
        report,
        Some(p),
    )
}

/// Latent start built from per-level response statistics: level `r` of a
/// variable sits at its (mean, std) of the standardized response, each axis
/// scaled to a small common spread across levels, then shifted and rotated
/// into the pinned frame.
fn level_statistics_start(data: &Dataset, layout: &Layout, config: &FitConfig) -> Vec<f64> {
    let mid = 0.5 * (config.phi_log_range.0 + config.phi_log_range.1);
    let y = data.response(0);
    let mut latent = Vec::with_capacity(layout.levels.len());
    for (j, &l) in layout.levels.iter().enumerate() {
        let mut groups = vec![Vec::new(); l];
        for (p, v) in data.inputs().iter().zip(&y) {
            groups[p.t[j] - 1].push(*v);
        }
        let mut feats: Vec<[f64; 2]> = groups
            .iter()
            .map(|g| {
                if g.is_empty() {
                    return [0.0, 1.0];
                }
                let m = g.iter().sum::<f64>() / g.len() as f64;
                let v = g.iter().map(|x| (x - m).powi(2)).sum::<f64>() / g.len() as f64;
                [m, v.sqrt()]
            })
            .collect();
        for axis in 0..2 {
            let m = feats.iter().map(|f| f[axis]).sum::<f64>() / l as f64;
            let sd = (feats.iter().map(|f| (f[axis] - m).powi(2)).sum::<f64>() / l as f64).sqrt();
            for f in &mut feats {
                f[axis] = if sd > 1e-12 {
                    LEVEL_STATS_SCALE * (f[axis] - m) / sd
                } else {
                    0.0
                };
            }
        }
        let origin = feats[0];
        let d = [feats[1][0] - origin[0], feats[1][1] - origin[1]];
        let norm = d[0].hypot(d[1]);
        let (c, s) = if norm > 1e-12 {
            (d[0] / norm, d[1] / norm)
        } else {
            (1.0, 0.0)
        };
        let z: Vec<[f64; 2]> = feats
            .iter()
            .enumerate()
            .map(|(r, f)| {
                let (u, v) = (f[0] - origin[0], f[1] - origin[1]);
                let angle = r as f64 * GOLDEN_ANGLE;
                match r {
                    0 => [0.0, 0.0],
                    1 => [(c * u + s * v).max(ORIGIN_SPREAD), 0.0],
                    _ => [
                        c * u + s * v + ORIGIN_SPREAD * angle.cos(),
                        -s * u + c * v + ORIGIN_SPREAD * angle.sin(),
                    ],
                }
            })
            .collect();
        latent.push(z);
    }
    layout.pack(&vec![mid; layout.q], &latent)
}

/// Deterministic starts first (warm start if any, level statistics if
/// enabled, near origin), then random ones.
fn start_point(
    data: &Dataset,
    layout: &Layout,
    config: &FitConfig,
    start: usize,
    bounds: &BoxBounds,
) -> Vec<f64> {
    let mid = 0.5 * (config.phi_log_range.0 + config.phi_log_range.1);
    let warm = match &config.warm_start {
        Some(w) if w.len() == layout.n_params() => Some(w),
        Some(w) => {
            log::warn!(
                "ignoring warm start of length {} (expected {})",
                w.len(),
                layout.n_params()
            );
            None
        }
        None => None,
    };
    let warm_offset = usize::from(warm.is_some());
    let origin = warm_offset + usize::from(config.data_start);
    let mut x = match (start, warm) {
        (0, Some(w)) => w.clone(),
        (s, _) if config.data_start && s == warm_offset => {
            level_statistics_start(data, layout, config)
        }
        (s, _) if s == origin => {
            // Exactly coincident latent points are a stationary point of the
            // likelihood, so the origin start is spread by a tiny fixed offset.
            let mut x = vec![mid; layout.q];
            for &l in &layout.levels {
                x.push(ORIGIN_SPREAD);
                for r in 2..l {
                    let angle = r as f64 * GOLDEN_ANGLE;
                    x.push(ORIGIN_SPREAD * angle.cos());
                    x.push(ORIGIN_SPREAD * angle.sin());
                }
            }
            x
        }
        _ => {
            let mut rng = rng_indexed(config.seed, "lvgp-start", start as u64);
            let r = config.init_latent_range.min(config.latent_box);
            let mut x: Vec<f64> = (0..layout.q)
                .map(|_| rng.gen_range(config.phi_log_range.0..=config.phi_log_range.1))
                .collect();
            for &l in &layout.levels {
                x.push(rng.gen_range(0.0..=r));
                for _ in 0..2 * (l - 2) {
                    x.push(rng.gen_range(-r..=r));
                }
            }
            x
        }
    };
    bounds.project(&mut x);
    x
}

impl LvgpModel {
    fn assemble(
        training: Dataset,
        transform: Transform,
        latent: LatentMap,
        log10_phi: Vec<f64>,
        nugget: f64,
        report: FitReport,
        prof: Option<likelihood::Profile>,
    ) -> Result<Self> {
        let space = training.space().clone();
        let layout = layout_for(&space);
        let (std_data, _) = standardize(&training)?;
        let design = design_for(&std_data);
        let y = DVector::from_vec(std_data.response(0));
        let theta = layout.pack(&log10_phi, &latent.coords);
        let p = match prof {
            Some(p) => p,
            None => profile(&design, &y, &layout, &theta, nugget, false)?,
        };
        let ones = DVector::<f64>::from_element(design.n, 1.0);
        let l_inv_one = p
            .chol
            .l_dirty()
            .solve_lower_triangular(&ones)
            .ok_or_else(|| Error::Factorization("singular Cholesky factor".into()))?;
        let one_cinv_one = l_inv_one.dot(&l_inv_one);
        let hyper = LvgpHyperparams {
            log10_phi,
            mu: p.mu,
            sigma2: p.sigma2.max(f64::MIN_POSITIVE),
            nugget: p.nugget,
        };
        Ok(Self {
            space,
            training,
            transform,
            latent,
            hyper,
            report,
            layout,
            design,
            chol: p.chol,
            alpha: p.alpha,
            l_inv_one,
            one_cinv_one,
        })
    }

    pub fn space(&self) -> &MixedDesignSpace {
        &self.space
    }

    pub fn training(&self) -> &Dataset {
        &self.training
    }

    pub fn latent(&self) -> &LatentMap {
        &self.latent
    }

    pub fn hyperparams(&self) -> &LvgpHyperparams {
        &self.hyper
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    pub fn report(&self) -> &FitReport {
        &self.report
    }

    /// Free-parameter vector (for warm starts or [`condition`]).
    pub fn params(&self) -> Vec<f64> {
        self.layout.pack(&self.hyper.log10_phi, &self.latent.coords)
    }

    /// Minimized negative log-likelihood on the standardized training data.
    pub fn nll(&self) -> f64 {
        self.report.nll
    }

    fn corr_vector(&self, point: &MixedPoint) -> DVector<f64> {
        let phi = self.hyper.phi();
        let d = &self.design;
        let xs: Vec<f64> = point
            .x
            .iter()
            .zip(&self.transform.quantitative)
            .map(|(&v, &(lo, hi))| (v - lo) / (hi - lo))
            .collect();
        let zs: Vec<[f64; 2]> = point
            .t
            .iter()
            .enumerate()
            .map(|(j, &l)| self.latent.coords[j][l - 1])
            .collect();
        DVector::from_iterator(
            d.n,
            (0..d.n).map(|i| {
                let xi = d.x_row(i);
                let ti = d.t_row(i);
                let mut s = 0.0;
                for k in 0..d.q {
                    let dx = xs[k] - xi[k];
                    s += phi[k] * dx * dx;
                }
                let mut same = xs.iter().zip(xi).all(|(a, b)| a == b);
                for (j, z) in zs.iter().enumerate() {
                    let zi = self.latent.coords[j][ti[j]];
                    let a = z[0] - zi[0];
                    let b = z[1] - zi[1];
                    s += a * a + b * b;
                    same &= point.t[j] - 1 == ti[j];
                }
                // the nugget is part of the kernel at zero distance
                if same {
                    1.0 + self.hyper.nugget
                } else {
                    (-s).exp()
                }
            }),
        )
    }

    /// Posterior mean on the original output scale.
    pub fn predict_mean(&self, point: &MixedPoint) -> Result<f64> {
        validate(point, &self.space)?;
        Ok(self.mean_unchecked(point))
    }

    pub(crate) fn mean_unchecked(&self, point: &MixedPoint) -> f64 {
        let c = self.corr_vector(point);
        let m = self.hyper.mu + c.dot(&self.alpha);
        self.transform.output_inverse(0, m)
    }

    /// Posterior mean and variance (original output scale). The variance
    /// includes the uncertainty of the profiled constant mean.
    pub fn predict(&self, point: &MixedPoint) -> Result<(f64, f64)> {
        validate(point, &self.space)?;
        let c = self.corr_vector(point);
        let mean = self.hyper.mu + c.dot(&self.alpha);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&c)
            .ok_or_else(|| Error::Factorization("singular Cholesky factor".into()))?;
        let quad = v.dot(&v);
        let cross = 1.0 - self.l_inv_one.dot(&v);
        let var = self.hyper.sigma2
            * (1.0 + self.hyper.nugget - quad + cross * cross / self.one_cinv_one);
        Ok((
            self.transform.output_inverse(0, mean),
            self.transform.variance_inverse(0, var.max(0.0)),
        ))
    }

    pub fn predict_batch(&self, points: &[MixedPoint]) -> Result<Vec<(f64, f64)>> {
        points.par_iter().map(|p| self.predict(p)).collect()
    }

    pub fn predict_mean_batch(&self, points: &[MixedPoint]) -> Result<Vec<f64>> {
        points.par_iter().map(|p| self.predict_mean(p)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            space: self.space.clone(),
            training: self.training.clone(),
            transform: self.transform.clone(),
            latent: self.latent.clone(),
            hyperparams: self.hyper.clone(),
            report: self.report.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(s)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::InvalidArgument(format!(
                "unsupported model format `{}`",
                file.format
            )));
        }
        if file.training.space() != &file.space {
            return Err(Error::InvalidArgument(
                "model space does not match its training data".into(),
            ));
        }
        let latent = LatentMap::new(file.latent.coords)?;
        let model = Self::assemble(
            file.training,
            file.transform,
            latent,
            file.hyperparams.log10_phi.clone(),
            file.hyperparams.nugget,
            file.report,
            None,
        )?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            ))
        })?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn to_latent_examples() {
        let map = LatentMap::new(vec![vec![[0.0, 0.0], [1.4, 0.0], [0.3, -0.2]]]).unwrap();
        let p = MixedPoint::new(vec![0.3], vec![1]);
        assert_eq!(to_latent(&p, &map).unwrap(), vec![0.3, 0.0, 0.0]);
        let p = MixedPoint::new(vec![0.3], vec![2]);
        assert_eq!(to_latent(&p, &map).unwrap(), vec![0.3, 1.4, 0.0]);
        let p = MixedPoint::new(vec![0.3], vec![4]);
        assert!(matches!(
            to_latent(&p, &map),
            Err(Error::LevelOutOfRange { .. })
        ));

        let map2 = LatentMap::new(vec![
            vec![[0.0, 0.0], [0.5, 0.0]],
            vec![[0.0, 0.0], [1.0, 0.0], [-0.25, 0.75]],
        ])
        .unwrap();
        let p = MixedPoint::qualitative(vec![2, 3]);
        assert_eq!(to_latent(&p, &map2).unwrap(), vec![0.5, 0.0, -0.25, 0.75]);
    }

    #[test]
    fn latent_pinning_is_enforced() {
        assert!(LatentMap::new(vec![vec![[0.1, 0.0], [1.0, 0.0]]]).is_err());
        assert!(LatentMap::new(vec![vec![[0.0, 0.0], [1.0, 0.2]]]).is_err());
        assert!(LatentMap::new(vec![vec![[0.0, 0.0], [-1.0, 0.0]]]).is_err());
        assert!(LatentMap::new(vec![vec![[0.0, 0.0], [f64::NAN, 0.0]]]).is_err());
    }

    #[test]
    fn correlation_examples() {
        assert_eq!(
            correlation(&[0.2, 1.0, -1.0], &[0.2, 1.0, -1.0], &[3.0]),
            1.0
        );
        assert!((correlation(&[0.0], &[1.0], &[1.0]) - (-1f64).exp()).abs() < 1e-15);
        assert!((correlation(&[0.0, 0.0], &[1.0, 1.0], &[]) - (-2f64).exp()).abs() < 1e-15);
        let a = [0.1, 0.4, -0.3];
        let b = [0.7, -0.2, 0.5];
        assert_eq!(correlation(&a, &b, &[2.0]), correlation(&b, &a, &[2.0]));
    }

    #[test]
    fn config_rejects_bad_nugget() {
        let s = MixedDesignSpace::from_parts(&[("x", 0.0, 1.0)], &[]).unwrap();
        let d = Dataset::new(
            s,
            vec![
                MixedPoint::quantitative(vec![0.0]),
                MixedPoint::quantitative(vec![1.0]),
            ],
            vec![vec![0.0], vec![1.0]],
        )
        .unwrap();
        let cfg = FitConfig {
            nugget: 0.5,
            ..Default::default()
        };
        assert!(fit(&d, &cfg).is_err());
    }
}
