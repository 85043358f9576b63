use std::collections::{BTreeSet, HashSet};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gsa::metamodel_indices;
use crate::lvgp::{condition, fit, FitConfig, LvgpModel, MAX_NUGGET};
use crate::mobo::acquisition::{simplex_weights, Prediction, Scalarizer};
use crate::mobo::archive::{pareto_filter, Direction, ParetoArchive};
use crate::mobo::focus::{select_focus, FocusRule};
use crate::mobo::trace::{BoStatus, BoTrace, Stage, TraceRecord};
use crate::mobo::Objectives;
use crate::sampling::{initial_doe, sobol_mixed};
use crate::seed::{derive_indexed, derive_seed, rng_indexed};
use crate::space::{full_factorial, Dataset, MixedDesignSpace, MixedPoint, PointKey};

const CANDIDATE_LIMIT: u64 = 1_000_000;

/// First-stage iteration count used when none is given. On the BlockWorld
/// benchmark this is the shortest first stage that still recovers the front
/// when the DOE-based focus selection picks a wrong variable.
pub const DEFAULT_STAGE1_ITERS: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoConfig {
    /// Settings of the first fit; later refits are warm-started.
    pub fit: FitConfig,
    /// Starts of a warm refit (start 0 is the previous optimum).
    pub refit_starts: usize,
    /// Re-optimize hyperparameters every this many iterations; in between,
    /// models are re-conditioned on new data with the previous parameters.
    pub reoptimize_every: usize,
    /// Stop after this many iterations without a front change.
    pub patience: Option<usize>,
    /// Known front (benchmark mode): stop once every member is evaluated.
    pub oracle_front: Option<Vec<PointKey>>,
    /// Largest number of non-focus completions enumerated per focus
    /// combination in the first stage; larger sets are Sobol'-subsampled.
    pub completion_limit: usize,
    /// Base sample size of the metamodel GSA that picks focus variables.
    pub gsa_n_base: usize,
    pub focus_rule: FocusRule,
    pub directions: Option<Vec<Direction>>,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self {
            fit: FitConfig {
                starts: 8,
                max_iters: 200,
                ..FitConfig::default()
            },
            refit_starts: 2,
            reoptimize_every: 1,
            patience: None,
            oracle_front: None,
            completion_limit: 10_000,
            gsa_n_base: 4096,
            focus_rule: FocusRule::default(),
            directions: None,
        }
    }
}

/// One LVGP per objective, refit as data arrive.
struct Surrogates {
    models: Vec<LvgpModel>,
    fits: usize,
}

impl Surrogates {
    fn new() -> Self {
        Self {
            models: Vec::new(),
            fits: 0,
        }
    }

    fn update(&mut self, data: &Dataset, cfg: &BoConfig, seed: u64, tag: &str) -> Result<()> {
        let p = data.p();
        let reoptimize = self.models.len() != p || self.fits % cfg.reoptimize_every.max(1) == 0;
        let mut models = Vec::with_capacity(p);
        for k in 0..p {
            let single = data.select_response(k)?;
            let previous = self.models.get(k).map(LvgpModel::params);
            let fit_seed = derive_indexed(seed, &format!("{tag}-fit-{k}"), self.fits as u64);
            models.push(fit_with_retry(
                &single, cfg, previous, reoptimize, fit_seed,
            )?);
        }
        self.models = models;
        self.fits += 1;
        Ok(())
    }

    fn predict(&self, points: &[MixedPoint]) -> Result<Vec<Vec<Prediction>>> {
        points
            .par_iter()
            .map(|p| {
                self.models
                    .iter()
                    .map(|m| {
                        m.predict(p).map(|(mean, var)| Prediction {
                            mean,
                            sd: var.sqrt(),
                        })
                    })
                    .collect()
            })
            .collect()
    }

    fn means(&self, points: &[MixedPoint]) -> Result<Vec<Vec<f64>>> {
        points
            .par_iter()
            .map(|p| self.models.iter().map(|m| m.predict_mean(p)).collect())
            .collect()
    }
}

/// Fit, retrying with the nugget raised 100x twice before giving up.
fn fit_with_retry(
    data: &Dataset,
    cfg: &BoConfig,
    previous: Option<Vec<f64>>,
    reoptimize: bool,
    seed: u64,
) -> Result<LvgpModel> {
    let mut nugget = cfg.fit.nugget;
    let mut last = None;
    for _ in 0..3 {
        let attempt = match (&previous, reoptimize) {
            (Some(params), false) => condition(data, params, nugget),
            _ => {
                let warm = previous.is_some();
                let fc = FitConfig {
                    starts: if warm {
                        cfg.refit_starts.max(1)
                    } else {
                        cfg.fit.starts
                    },
                    seed,
                    nugget,
                    warm_start: previous.clone(),
                    ..cfg.fit.clone()
                };
                fit(data, &fc)
            }
        };
        match attempt {
            Ok(m) => return Ok(m),
            Err(e) => {
                log::warn!("surrogate fit failed with nugget {nugget:e}: {e}");
                last = Some(e);
                nugget = (nugget * 100.0).min(MAX_NUGGET);
            }
        }
    }
    Err(last.unwrap_or_else(|| Error::FitFailed("no fit attempted".into())))
}

/// Index of the best candidate: largest acquisition, then smallest
/// predicted scalarized value, then lowest index.
fn best_candidate(scores: &[(f64, f64)]) -> Option<usize> {
    (0..scores.len()).min_by(|&i, &j| {
        scores[j]
            .0
            .total_cmp(&scores[i].0)
            .then(scores[i].1.total_cmp(&scores[j].1))
            .then(i.cmp(&j))
    })
}

struct Run<'a, O: Objectives + ?Sized> {
    objectives: &'a O,
    space: &'a MixedDesignSpace,
    cfg: &'a BoConfig,
    seed: u64,
    directions: Vec<Direction>,
    archive: ParetoArchive,
    trace: BoTrace,
    models: Surrogates,
    iteration: usize,
    start: Instant,
    last_front_change: usize,
}

impl<'a, O: Objectives + ?Sized> Run<'a, O> {
    fn new(
        objectives: &'a O,
        space: &'a MixedDesignSpace,
        cfg: &'a BoConfig,
        seed: u64,
    ) -> Result<Self> {
        if !space.is_qualitative_only() {
            return Err(Error::InvalidArgument(
                "Bayesian optimization needs a qualitative-only space".into(),
            ));
        }
        let card = space.cardinality()?;
        if card > CANDIDATE_LIMIT {
            return Err(Error::InvalidArgument(format!(
                "candidate enumeration limited to {CANDIDATE_LIMIT} designs, space has {card}"
            )));
        }
        let k = objectives.n_objectives();
        let directions = cfg
            .directions
            .clone()
            .unwrap_or_else(|| vec![Direction::Maximize; k]);
        if directions.len() != k {
            return Err(Error::DimensionMismatch {
                what: "objective directions",
                expected: k,
                found: directions.len(),
            });
        }
        Ok(Self {
            objectives,
            space,
            cfg,
            seed,
            archive: ParetoArchive::new(directions.clone()),
            trace: BoTrace::new(seed, space.names(), directions.clone()),
            directions,
            models: Surrogates::new(),
            iteration: 0,
            start: Instant::now(),
            last_front_change: 0,
        })
    }

    fn evaluate(
        &mut self,
        point: MixedPoint,
        stage: Stage,
        acquisition: Option<f64>,
    ) -> Result<()> {
        let y = self.objectives.evaluate(&point)?;
        let before = self.archive.front_hash();
        self.archive
            .insert(point.clone(), y.clone(), self.iteration)?;
        let front_hash = self.archive.front_hash();
        if front_hash != before {
            self.last_front_change = self.iteration;
        }
        self.trace.push(TraceRecord {
            iteration: self.iteration,
            stage,
            point,
            acquisition,
            objectives: y,
            front_hash,
            seed: self.seed,
            wall_time_s: self.start.elapsed().as_secs_f64(),
        });
        Ok(())
    }

    fn evaluate_doe(&mut self, doe: &[MixedPoint]) -> Result<()> {
        for p in doe {
            crate::space::validate(p, self.space)?;
            if self.archive.contains(&p.key()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate DOE point {:?}",
                    p.t
                )));
            }
            self.evaluate(p.clone(), Stage::Doe, None)?;
        }
        Ok(())
    }

    fn data(&self) -> Result<Dataset> {
        let e = self.archive.entries();
        Dataset::new(
            self.space.clone(),
            e.iter().map(|e| e.point.clone()).collect(),
            e.iter().map(|e| e.objectives.clone()).collect(),
        )
    }

    fn front_found(&self) -> bool {
        self.cfg
            .oracle_front
            .as_ref()
            .is_some_and(|f| self.archive.contains_all(f))
    }

    fn stagnated(&self) -> bool {
        self.cfg.oracle_front.is_none()
            && self
                .cfg
                .patience
                .is_some_and(|p| self.iteration >= self.last_front_change + p)
    }

    fn scalarizer(&self, reference: &[Vec<f64>]) -> Result<Scalarizer> {
        let mut rng = rng_indexed(self.seed, "weights", self.iteration as u64);
        let w = simplex_weights(self.directions.len(), &mut rng);
        Scalarizer::new(w, self.directions.clone(), reference)
    }

    fn archive_outputs(&self) -> Vec<Vec<f64>> {
        self.archive
            .entries()
            .iter()
            .map(|e| e.objectives.clone())
            .collect()
    }

    /// The plain loop over a fixed candidate pool, for at most `budget`
    /// evaluations.
    fn search(&mut self, pool: &[MixedPoint], budget: usize, stage: Stage) -> Result<BoStatus> {
        let mut used = 0;
        loop {
            if self.front_found() {
                return Ok(BoStatus::FrontFound);
            }
            if used >= budget {
                return Ok(BoStatus::BudgetExhausted);
            }
            if self.stagnated() {
                return Ok(BoStatus::Stagnated);
            }
            let cands: Vec<MixedPoint> = pool
                .iter()
                .filter(|p| !self.archive.contains(&p.key()))
                .cloned()
                .collect();
            if cands.is_empty() {
                return Ok(BoStatus::CandidatesExhausted);
            }
            self.iteration += 1;
            self.models
                .update(&self.data()?, self.cfg, self.seed, "abcd")?;
            let scal = self.scalarizer(&self.archive_outputs())?;
            let preds = self.models.predict(&cands)?;
            let scores: Vec<(f64, f64)> = preds.iter().map(|p| scal.acquisition(p)).collect();
            let best = best_candidate(&scores).expect("nonempty candidates");
            self.evaluate(cands[best].clone(), stage, Some(scores[best].0))?;
            used += 1;
        }
    }

    fn finish(mut self, status: Result<BoStatus>) -> BoTrace {
        self.trace.status = match status {
            Ok(s) => s,
            Err(e) => {
                log::error!("optimization aborted: {e}");
                BoStatus::Aborted(e.to_string())
            }
        };
        self.trace
    }
}

fn all_candidates(space: &MixedDesignSpace) -> Result<Vec<MixedPoint>> {
    full_factorial(space, CANDIDATE_LIMIT)
}

/// Baseline: one LVGP per objective over all variables, scoring every
/// unevaluated design each iteration.
///
/// `budget` counts evaluations after the DOE.
pub fn vanilla_bo<O: Objectives + ?Sized>(
    objectives: &O,
    space: &MixedDesignSpace,
    doe: &[MixedPoint],
    budget: usize,
    seed: u64,
    cfg: &BoConfig,
) -> Result<BoTrace> {
    let mut run = Run::new(objectives, space, cfg, seed)?;
    run.evaluate_doe(doe)?;
    let pool = all_candidates(space)?;
    let status = run.search(&pool, budget, Stage::Vanilla);
    Ok(run.finish(status))
}

/// Levels of the `vars` coordinates of a point.
fn project(p: &MixedPoint, vars: &[usize]) -> Vec<usize> {
    vars.iter().map(|&i| p.t[i]).collect()
}

fn combine(
    focus: &[usize],
    combo: &[usize],
    rest: &[usize],
    completion: &[usize],
    d: usize,
) -> MixedPoint {
    let mut t = vec![0; d];
    for (&i, &l) in focus.iter().zip(combo) {
        t[i] = l;
    }
    for (&i, &l) in rest.iter().zip(completion) {
        t[i] = l;
    }
    MixedPoint::qualitative(t)
}

struct FocusSplit {
    focus: Vec<usize>,
    rest: Vec<usize>,
    focus_space: MixedDesignSpace,
    combos: Vec<Vec<usize>>,
    completions: Vec<Vec<usize>>,
}

impl FocusSplit {
    fn new(space: &MixedDesignSpace, focus: &[usize], limit: usize, seed: u64) -> Result<Self> {
        let d = space.dim();
        let mut f = focus.to_vec();
        f.sort_unstable();
        f.dedup();
        if f.is_empty() || f.len() >= d || f.iter().any(|&i| i >= d) {
            return Err(Error::InvalidArgument(format!(
                "focus {focus:?} must hold 1..{} of {d} variables",
                d - 1
            )));
        }
        let rest: Vec<usize> = (0..d).filter(|i| !f.contains(i)).collect();
        let focus_space = space.qualitative_subspace(&f)?;
        let rest_space = space.qualitative_subspace(&rest)?;
        let combos = full_factorial(&focus_space, CANDIDATE_LIMIT)?
            .into_iter()
            .map(|p| p.t)
            .collect();
        let completions = if rest_space.cardinality()? <= limit as u64 {
            full_factorial(&rest_space, limit as u64)?
                .into_iter()
                .map(|p| p.t)
                .collect()
        } else {
            let sample = sobol_mixed(
                &rest_space,
                limit,
                0,
                Some(derive_seed(seed, "completions")),
            )?;
            let uniq: BTreeSet<Vec<usize>> = sample.into_iter().map(|p| p.t).collect();
            uniq.into_iter().collect()
        };
        Ok(Self {
            focus: f,
            rest,
            focus_space,
            combos,
            completions,
        })
    }

    fn point(&self, combo: &[usize], completion: &[usize], d: usize) -> MixedPoint {
        combine(&self.focus, combo, &self.rest, completion, d)
    }
}

impl<O: Objectives + ?Sized> Run<'_, O> {
    /// Focus combinations seen in the evaluated data with, per objective, the
    /// largest predicted mean over completions.
    fn reduced_data(&self, split: &FocusSplit) -> Result<(Vec<Vec<usize>>, Vec<Vec<f64>>)> {
        let d = self.space.dim();
        let seen: BTreeSet<Vec<usize>> = self
            .archive
            .entries()
            .iter()
            .map(|e| project(&e.point, &split.focus))
            .collect();
        let combos: Vec<Vec<usize>> = seen.into_iter().collect();
        let k = self.directions.len();
        let mut outputs = Vec::with_capacity(combos.len());
        for c in &combos {
            let pts: Vec<MixedPoint> = split
                .completions
                .iter()
                .map(|r| split.point(c, r, d))
                .collect();
            let means = self.models.means(&pts)?;
            let best: Vec<f64> = (0..k)
                .map(|j| {
                    let dj = self.directions[j];
                    means.iter().map(|m| m[j]).fold(f64::NAN, |a, v| {
                        if a.is_nan() || dj.orient(v) > dj.orient(a) {
                            v
                        } else {
                            a
                        }
                    })
                })
                .collect();
            outputs.push(best);
        }
        Ok((combos, outputs))
    }

    fn stage1(&mut self, split: &FocusSplit, iters: usize) -> Result<Option<BoStatus>> {
        let d = self.space.dim();
        for _ in 0..iters {
            if self.front_found() {
                return Ok(Some(BoStatus::FrontFound));
            }
            self.iteration += 1;
            self.models
                .update(&self.data()?, self.cfg, self.seed, "abcd")?;
            let (combos, outputs) = self.reduced_data(split)?;
            let reduced = Dataset::new(
                split.focus_space.clone(),
                combos
                    .iter()
                    .map(|c| MixedPoint::qualitative(c.clone()))
                    .collect(),
                outputs.clone(),
            )?;
            // reduced models are refit from scratch every iteration
            let mut focus_models = Surrogates::new();
            let focus_seed = derive_indexed(self.seed, "stage1-focus", self.iteration as u64);
            focus_models.update(&reduced, self.cfg, focus_seed, "focus")?;

            let scal_full = self.scalarizer(&self.archive_outputs())?;
            let scal_focus =
                Scalarizer::new(scal_full.weights.clone(), self.directions.clone(), &outputs)?;

            // focus combinations whose model-best completion is still unevaluated
            let mut eligible = Vec::new();
            for c in &split.combos {
                let pts: Vec<MixedPoint> = split
                    .completions
                    .iter()
                    .map(|r| split.point(c, r, d))
                    .collect();
                if pts.iter().all(|p| self.archive.contains(&p.key())) {
                    continue;
                }
                let means = self.models.means(&pts)?;
                let top = (0..pts.len())
                    .min_by(|&i, &j| {
                        scal_full
                            .value(&means[i])
                            .total_cmp(&scal_full.value(&means[j]))
                            .then(i.cmp(&j))
                    })
                    .expect("nonempty completions");
                if !self.archive.contains(&pts[top].key()) {
                    eligible.push(c.clone());
                }
            }
            if eligible.is_empty() {
                log::info!("first stage ended early: no eligible focus combination");
                self.iteration -= 1;
                break;
            }
            let cps: Vec<MixedPoint> = eligible
                .iter()
                .map(|c| MixedPoint::qualitative(c.clone()))
                .collect();
            let focus_scores: Vec<(f64, f64)> = focus_models
                .predict(&cps)?
                .iter()
                .map(|p| scal_focus.acquisition(p))
                .collect();
            let combo = &eligible[best_candidate(&focus_scores).expect("nonempty")];

            let cands: Vec<MixedPoint> = split
                .completions
                .iter()
                .map(|r| split.point(combo, r, d))
                .filter(|p| !self.archive.contains(&p.key()))
                .collect();
            let scores: Vec<(f64, f64)> = self
                .models
                .predict(&cands)?
                .iter()
                .map(|p| scal_full.acquisition(p))
                .collect();
            let best = best_candidate(&scores).expect("eligible combination has a free completion");
            self.evaluate(cands[best].clone(), Stage::Stage1, Some(scores[best].0))?;
        }
        Ok(None)
    }

    /// Pareto-optimal focus combinations of the reduced data, from models
    /// fitted on everything evaluated so far.
    fn optimal_combos(&mut self, split: &FocusSplit) -> Result<Vec<Vec<usize>>> {
        self.models
            .update(&self.data()?, self.cfg, self.seed, "abcd")?;
        let (combos, outputs) = self.reduced_data(split)?;
        Ok(pareto_filter(&outputs, &self.directions)
            .into_iter()
            .map(|i| combos[i].clone())
            .collect())
    }

    fn stage2_pool(&self, split: &FocusSplit, optimal: &[Vec<usize>]) -> Result<Vec<MixedPoint>> {
        let d = self.space.dim();
        let rest_space = self.space.qualitative_subspace(&split.rest)?;
        let completions = full_factorial(&rest_space, CANDIDATE_LIMIT)?;
        let mut pool: Vec<MixedPoint> = optimal
            .iter()
            .flat_map(|c| completions.iter().map(move |r| split.point(c, &r.t, d)))
            .collect();
        pool.sort_by(|a, b| a.t.cmp(&b.t));
        Ok(pool)
    }
}

/// First stage alone: evaluates `doe`, then runs `iters` focus-guided
/// iterations. Returns the trace and the Pareto-optimal focus combinations.
pub fn stage1<O: Objectives + ?Sized>(
    objectives: &O,
    space: &MixedDesignSpace,
    doe: &[MixedPoint],
    focus: &[usize],
    iters: usize,
    seed: u64,
    cfg: &BoConfig,
) -> Result<(BoTrace, Vec<Vec<usize>>)> {
    let mut run = Run::new(objectives, space, cfg, seed)?;
    run.evaluate_doe(doe)?;
    let split = FocusSplit::new(space, focus, cfg.completion_limit, seed)?;
    let outcome = run
        .stage1(&split, iters)
        .and_then(|s| Ok((s, run.optimal_combos(&split)?)));
    match outcome {
        Ok((status, optimal)) => {
            run.trace.stage1_optimal = Some(optimal.clone());
            let status = status.unwrap_or(if run.front_found() {
                BoStatus::FrontFound
            } else {
                BoStatus::BudgetExhausted
            });
            Ok((run.finish(Ok(status)), optimal))
        }
        Err(e) => Ok((run.finish(Err(e)), Vec::new())),
    }
}

/// Second stage: continue `trace` over completions of the `optimal` focus
/// combinations for at most `budget` further evaluations.
pub fn stage2<O: Objectives + ?Sized>(
    objectives: &O,
    space: &MixedDesignSpace,
    focus: &[usize],
    optimal: &[Vec<usize>],
    trace: BoTrace,
    budget: usize,
    cfg: &BoConfig,
) -> Result<BoTrace> {
    if optimal.is_empty() {
        return Err(Error::InvalidArgument(
            "second stage needs at least one focus combination".into(),
        ));
    }
    let mut run = Run::new(objectives, space, cfg, trace.seed)?;
    for r in trace.records() {
        run.iteration = r.iteration;
        run.archive
            .insert(r.point.clone(), r.objectives.clone(), r.iteration)?;
    }
    run.last_front_change = run.iteration;
    let split = FocusSplit::new(space, focus, cfg.completion_limit, trace.seed)?;
    run.trace = trace;
    run.trace.status = BoStatus::Running;
    let status = run
        .stage2_pool(&split, optimal)
        .and_then(|pool| run.search(&pool, budget, Stage::Stage2));
    Ok(run.finish(status))
}

/// Full two-stage pipeline: DOE, metamodel GSA on the DOE models, focus
/// selection, the focus-guided first stage, then the restricted second stage.
///
/// `budget` counts evaluations after the DOE across both stages.
pub fn sensitivity_aware_bo<O: Objectives + ?Sized>(
    objectives: &O,
    space: &MixedDesignSpace,
    doe_n: usize,
    stage1_iters: usize,
    budget: usize,
    seed: u64,
    cfg: &BoConfig,
) -> Result<BoTrace> {
    let doe = initial_doe(space, doe_n, seed)?;
    sensitivity_aware_bo_from(objectives, space, &doe, stage1_iters, budget, seed, cfg)
}

/// As [`sensitivity_aware_bo`] with an explicit DOE.
pub fn sensitivity_aware_bo_from<O: Objectives + ?Sized>(
    objectives: &O,
    space: &MixedDesignSpace,
    doe: &[MixedPoint],
    stage1_iters: usize,
    budget: usize,
    seed: u64,
    cfg: &BoConfig,
) -> Result<BoTrace> {
    let mut run = Run::new(objectives, space, cfg, seed)?;
    run.evaluate_doe(doe)?;
    let status = two_stage(&mut run, stage1_iters, budget);
    Ok(run.finish(status))
}

fn two_stage<O: Objectives + ?Sized>(
    run: &mut Run<'_, O>,
    stage1_iters: usize,
    budget: usize,
) -> Result<BoStatus> {
    if run.front_found() {
        return Ok(BoStatus::FrontFound);
    }
    run.models.update(&run.data()?, run.cfg, run.seed, "abcd")?;
    let gsa_seed = derive_seed(run.seed, "focus-gsa");
    let indices = run
        .models
        .models
        .iter()
        .map(|m| metamodel_indices(m, run.cfg.gsa_n_base, gsa_seed))
        .collect::<Result<Vec<_>>>()?;
    let focus = select_focus(&indices, run.space, run.cfg.focus_rule)?;
    log::info!("focus variables: {:?}", focus.names);
    let split = FocusSplit::new(
        run.space,
        &focus.variables,
        run.cfg.completion_limit,
        run.seed,
    )?;
    run.trace.focus = Some(focus);

    let before = run.trace.len();
    if let Some(status) = run.stage1(&split, stage1_iters.min(budget))? {
        return Ok(status);
    }
    let used = run.trace.len() - before;
    let optimal = run.optimal_combos(&split)?;
    log::info!("first stage kept {} focus combinations", optimal.len());
    run.trace.stage1_optimal = Some(optimal.clone());
    let pool = run.stage2_pool(&split, &optimal)?;
    run.last_front_change = run.iteration;
    run.search(&pool, budget - used, Stage::Stage2)
}

/// Unique keys of a list of points.
pub fn keys_of(points: &[MixedPoint]) -> Vec<PointKey> {
    let set: HashSet<PointKey> = points.iter().map(MixedPoint::key).collect();
    let mut v: Vec<PointKey> = set.into_iter().collect();
    v.sort();
    v
}
