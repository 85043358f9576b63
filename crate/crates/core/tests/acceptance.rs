//! Acceptance checks, one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the report prints in order.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::time::Instant;

use mvgsa::benchfns::{
    exhaustive_pareto, BaseFunction, BlockWorld, HARTMANN_MSI, HARTMANN_TSI, ISHIGAMI_MSI,
    ISHIGAMI_TSI,
};
use mvgsa::gsa::{estimate_indices, ConvergenceConfig, IndexKind, TestFamily};
use mvgsa::lvgp::{fit, neg_log_likelihood, pack_params, unpack_params, FitConfig, LatentMap};
use mvgsa::mobo::{
    dominates, expected_improvement, pareto_filter, sensitivity_aware_bo_from, vanilla_bo,
    BoConfig, Direction, DEFAULT_STAGE1_ITERS,
};
use mvgsa::sampling::{initial_doe, sobol_unit};
use mvgsa::{Dataset, MixedDesignSpace, MixedPoint, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcome of one criterion: pass flag plus a one-line measurement summary.
struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("thread pool")
        .install(f)
}

fn c1_ishigami() -> Result<Outcome> {
    let t = Instant::now();
    let s = single_threaded(|| {
        estimate_indices(
            &BaseFunction::Ishigami,
            &BaseFunction::Ishigami.space(),
            1 << 14,
            0,
        )
    })?;
    let secs = t.elapsed().as_secs_f64();
    let mut worst: f64 = 0.0;
    for (i, v) in s.variables.iter().enumerate() {
        worst = worst
            .max((v.msi - ISHIGAMI_MSI[i]).abs())
            .max((v.tsi - ISHIGAMI_TSI[i]).abs());
    }
    Ok(Outcome::new(
        worst <= 0.02 && secs < 10.0,
        format!("max |dev| {worst:.4} (tol 0.02), {secs:.2}s single-threaded (limit 10s)"),
    ))
}

fn c2_hartmann() -> Result<Outcome> {
    let t = Instant::now();
    let s = estimate_indices(
        &BaseFunction::Hartmann6,
        &BaseFunction::Hartmann6.space(),
        1 << 14,
        0,
    )?;
    let secs = t.elapsed().as_secs_f64();
    // converted positions x2 and x6
    let (mut tsi_dev, mut msi_dev): (f64, f64) = (0.0, 0.0);
    for (k, &i) in [1usize, 5].iter().enumerate() {
        tsi_dev = tsi_dev.max((s.variables[i].tsi - HARTMANN_TSI[k]).abs());
        msi_dev = msi_dev.max((s.variables[i].msi - HARTMANN_MSI[k]).abs());
    }
    Ok(Outcome::new(
        tsi_dev <= 0.05 && msi_dev <= 0.03 && secs < 30.0,
        format!("TSI |dev| {tsi_dev:.4} (tol 0.05), MSI |dev| {msi_dev:.4} (tol 0.03), {secs:.2}s (limit 30s)"),
    ))
}

fn convergence_report() -> Result<mvgsa::gsa::ConvergenceReport> {
    let mut cfg = ConvergenceConfig::new(TestFamily::Ishigami, vec![2, 5, 10, 20]);
    cfg.seeds = (0..5).collect();
    mvgsa::gsa::convergence_study(&cfg)
}

fn c3_stage_one(report: &mvgsa::gsa::ConvergenceReport) -> Outcome {
    let frac = report.agreement_fraction(0.05, 0.10);
    let worst_gate = report
        .rows
        .iter()
        .map(|r| r.holdout_rel_rmse)
        .fold(0.0, f64::max);
    Outcome::new(
        frac >= 0.90,
        format!(
            "{:.1}% of cells within 0.05 over 5 seeds (need 90%), worst holdout rel. RMSE {worst_gate:.4} (gate 0.10)",
            100.0 * frac
        ),
    )
}

fn c4_stage_two(report: &mvgsa::gsa::ConvergenceReport) -> Outcome {
    let deviation = |levels: usize, var: &str, kind: IndexKind| {
        report
            .rows
            .iter()
            .find(|r| r.levels == levels && r.variable == var && r.kind == kind)
            .and_then(|r| r.discretization_error())
    };
    let mut worst20: f64 = 0.0;
    let mut violations = Vec::new();
    let mut complete = true;
    for var in ["x2", "t1", "t3"] {
        for kind in [IndexKind::Msi, IndexKind::Tsi] {
            match (deviation(20, var, kind), deviation(2, var, kind)) {
                (Some(d20), Some(d2)) => {
                    worst20 = worst20.max(d20);
                    if d20 > d2 {
                        violations.push(format!("{var} {} ({d20:.5} > {d2:.5})", kind.as_str()));
                    }
                }
                _ => complete = false,
            }
        }
    }
    let monotone = if violations.is_empty() {
        "L=20 <= L=2 for every index".to_string()
    } else {
        format!("L=20 > L=2 for {}", violations.join(", "))
    };
    Outcome::new(
        complete && worst20 <= 0.03 && violations.is_empty(),
        format!("max |True-MV(L=20) - continuous| {worst20:.4} (tol 0.03), {monotone}"),
    )
}

fn sine_mixed(n: usize, seed: u64) -> Result<Dataset> {
    let space = MixedDesignSpace::from_parts(&[("x", 0.0, 1.0)], &[("t", 3)])?;
    let offsets = [0.0, 0.7, -0.9];
    let pts = initial_doe(&space, n, seed)?;
    let ys = pts
        .iter()
        .map(|p| vec![(2.0 * PI * p.x[0]).sin() + offsets[p.t[0] - 1] * (1.0 + p.x[0])])
        .collect();
    Dataset::new(space, pts, ys)
}

fn c5_lvgp() -> Result<Outcome> {
    let data = sine_mixed(24, 5)?;
    let cfg = FitConfig {
        seed: 3,
        ..FitConfig::default()
    };
    let model = fit(&data, &cfg)?;

    let mut interp: f64 = 0.0;
    for (p, y) in data.inputs().iter().zip(data.outputs()) {
        interp = interp.max((model.predict_mean(p)? - y[0]).abs() / y[0].abs().max(1.0));
    }

    let map = LatentMap::new(vec![vec![[0.0, 0.0], [0.7, 0.0], [-0.2, 0.6]]])?;
    let theta = pack_params(&map, &[2.5]);
    let nll = |th: &[f64]| -> Result<f64> {
        let (m, phi) = unpack_params(data.space(), th)?;
        neg_log_likelihood(&data, &m, &phi, 1e-8)
    };
    let mut fd_gap: f64 = 0.0;
    for k in 0..theta.len() {
        let fd = |h: f64| -> Result<f64> {
            let (mut up, mut dn) = (theta.clone(), theta.clone());
            up[k] += h;
            dn[k] -= h;
            Ok((nll(&up)? - nll(&dn)?) / (2.0 * h))
        };
        let (a, b) = (fd(1e-4)?, fd(2e-4)?);
        fd_gap = fd_gap.max((a - b).abs() / a.abs().max(1.0));
    }

    let perm = [2usize, 3, 1];
    let relabeled = Dataset::new(
        data.space().clone(),
        data.inputs()
            .iter()
            .map(|p| MixedPoint::new(p.x.clone(), vec![perm[p.t[0] - 1]]))
            .collect(),
        data.outputs().to_vec(),
    )?;
    let other = fit(&relabeled, &cfg)?;
    let mut equiv: f64 = 0.0;
    for i in 0..40 {
        let x = (i as f64 + 0.5) / 40.0;
        for t in 1..=3 {
            let a = model.predict_mean(&MixedPoint::new(vec![x], vec![t]))?;
            let b = other.predict_mean(&MixedPoint::new(vec![x], vec![perm[t - 1]]))?;
            equiv = equiv.max((a - b).abs());
        }
    }
    Ok(Outcome::new(
        interp <= 1e-6 && fd_gap <= 1e-3 && equiv <= 1e-2,
        format!(
            "interpolation rel. err {interp:.1e} (tol 1e-6), FD step gap {fd_gap:.1e} (tol 1e-3), relabel max diff {equiv:.1e} (tol 1e-2)"
        ),
    ))
}

fn c6_gsa() -> Result<Outcome> {
    let two = MixedDesignSpace::from_parts(&[("x1", 0.0, 1.0), ("x2", 0.0, 1.0)], &[])?;
    let additive = |p: &MixedPoint| -> Result<f64> { Ok(p.x[0] + p.x[1]) };
    let s = estimate_indices(&additive, &two, 4096, 1)?;
    let additive_dev = s
        .variables
        .iter()
        .map(|v| (v.msi - 0.5).abs().max((v.tsi - 0.5).abs()))
        .fold(0.0, f64::max);

    let three = MixedDesignSpace::from_parts(&[("x1", 0.0, 1.0), ("x2", 0.0, 1.0)], &[("t", 4)])?;
    let inert_fn = |p: &MixedPoint| -> Result<f64> { Ok((3.0 * p.x[0]).sin() + p.x[1] * p.x[0]) };
    let s = estimate_indices(&inert_fn, &three, 4096, 2)?;
    let inert = s.variables[2].msi.abs().max(s.variables[2].tsi.abs());

    let space = BaseFunction::Ishigami.space();
    let base = estimate_indices(&BaseFunction::Ishigami, &space, 2048, 4)?;
    let scaled =
        |p: &MixedPoint| -> Result<f64> { Ok(-37.5 * BaseFunction::Ishigami.eval(&p.x) + 1e3) };
    let s = estimate_indices(&scaled, &space, 2048, 4)?;
    let affine = base
        .variables
        .iter()
        .zip(&s.variables)
        .map(|(a, b)| (a.msi - b.msi).abs().max((a.tsi - b.tsi).abs()))
        .fold(0.0, f64::max);

    let sum_msi: f64 = base.variables.iter().map(|v| v.msi).sum();
    let sum_se: f64 = base.variables.iter().map(|v| v.msi_stderr).sum();
    let bounded = sum_msi <= 1.0 + 3.0 * sum_se
        && base
            .variables
            .iter()
            .all(|v| v.tsi >= v.msi - 2.0 * (v.msi_stderr + v.tsi_stderr));

    let again = estimate_indices(&BaseFunction::Ishigami, &space, 2048, 4)?;
    let bit_exact = base.variables.iter().zip(&again.variables).all(|(a, b)| {
        a.msi.to_bits() == b.msi.to_bits()
            && a.tsi.to_bits() == b.tsi.to_bits()
            && a.msi_stderr.to_bits() == b.msi_stderr.to_bits()
            && a.tsi_stderr.to_bits() == b.tsi_stderr.to_bits()
    });

    Ok(Outcome::new(
        additive_dev <= 0.02 && inert <= 0.01 && affine <= 1e-10 && bounded && bit_exact,
        format!(
            "additive |dev| {additive_dev:.4} (tol 0.02), inert {inert:.4} (tol 0.01), affine {affine:.1e} (tol 1e-10), \
             sum MSI {sum_msi:.4} bounded: {bounded}, bit-exact: {bit_exact}"
        ),
    ))
}

struct BoRun {
    vanilla: Option<usize>,
    aware: Option<usize>,
    focus: Vec<usize>,
}

fn blockworld_runs() -> Result<(Vec<BoRun>, f64)> {
    let bw = BlockWorld::default();
    let space = bw.space()?;
    let front = exhaustive_pareto(&bw, &space)?.front_keys();
    let cfg = BoConfig {
        oracle_front: Some(front.clone()),
        ..BoConfig::default()
    };
    let budget = 600 - 16;
    let t = Instant::now();
    let mut runs = Vec::new();
    for seed in 0..10u64 {
        let doe = initial_doe(&space, 16, seed)?;
        let v = vanilla_bo(&bw, &space, &doe, budget, seed, &cfg)?;
        let a =
            sensitivity_aware_bo_from(&bw, &space, &doe, DEFAULT_STAGE1_ITERS, budget, seed, &cfg)?;
        let run = BoRun {
            vanilla: v.evaluations_to_front(&front),
            aware: a.evaluations_to_front(&front),
            focus: a
                .focus
                .as_ref()
                .map(|f| f.variables.clone())
                .unwrap_or_default(),
        };
        eprintln!(
            "  seed {seed}: vanilla {:?}, sensitivity-aware {:?}, focus {:?}",
            run.vanilla,
            run.aware,
            a.focus
                .as_ref()
                .map(|f| f.names.clone())
                .unwrap_or_default()
        );
        runs.push(run);
    }
    Ok((runs, t.elapsed().as_secs_f64()))
}

/// Median with unfound runs ranked after every found one.
fn median(values: impl Iterator<Item = Option<usize>>) -> f64 {
    let mut v: Vec<f64> = values
        .map(|x| x.map_or(f64::INFINITY, |n| n as f64))
        .collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn c7_bo(runs: &[BoRun], secs: f64) -> Outcome {
    let found_v = runs.iter().filter(|r| r.vanilla.is_some()).count();
    let found_a = runs.iter().filter(|r| r.aware.is_some()).count();
    let (mv, ma) = (
        median(runs.iter().map(|r| r.vanilla)),
        median(runs.iter().map(|r| r.aware)),
    );
    Outcome::new(
        found_v >= 9 && found_a >= 9 && ma <= mv && secs < 600.0,
        format!(
            "front found vanilla {found_v}/10, sensitivity-aware {found_a}/10 (need 9); median evaluations \
             {ma} vs {mv} (need <=); {secs:.0}s (limit 600s)"
        ),
    )
}

fn c8_focus(runs: &[BoRun]) -> Outcome {
    // A is variable 0, C is variable 2
    let good = runs
        .iter()
        .filter(|r| r.focus.contains(&0) && r.focus.iter().all(|&v| v == 0 || v == 2))
        .count();
    Outcome::new(
        good >= 8,
        format!("focus within {{A, C}} and containing A in {good}/10 seeds (need 8)"),
    )
}

fn c9_mechanics() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let pts: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.gen(), rng.gen()]).collect();
    let dirs = [Direction::Maximize, Direction::Maximize];
    let fast: BTreeSet<usize> = pareto_filter(&pts, &dirs).into_iter().collect();
    let brute: BTreeSet<usize> = (0..pts.len())
        .filter(|&i| !(0..pts.len()).any(|j| dominates(&pts[j], &pts[i], &dirs)))
        .collect();
    let pareto_ok = fast == brute;

    let normals: Vec<f64> = (0..1_000_000)
        .map(|_| {
            let (u1, u2): (f64, f64) = (1.0 - rng.gen::<f64>(), rng.gen());
            (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
        })
        .collect();
    let mut ei_gap: f64 = 0.0;
    for ratio in [-2.0, -1.0, 0.0, 1.0, 2.0] {
        let sd = 0.8;
        let mean = ratio * sd;
        let mc = normals
            .iter()
            .map(|z| (mean + sd * z).max(0.0))
            .sum::<f64>()
            / normals.len() as f64;
        ei_gap = ei_gap.max((expected_improvement(mean, sd, 0.0, Direction::Maximize) - mc).abs());
    }

    // first four points of the unscrambled 1-D sequence, as produced by SciPy's qmc.Sobol
    let first: Vec<f64> = sobol_unit(1, 4, 0, None)?
        .into_iter()
        .map(|p| p[0])
        .collect();
    let sobol_ok = first == [0.0, 0.5, 0.75, 0.25];

    Ok(Outcome::new(
        pareto_ok && ei_gap <= 1e-3 && sobol_ok,
        format!(
            "pareto == brute force: {pareto_ok} ({} front points), EI vs MC {ei_gap:.1e} (tol 1e-3), 1-D Sobol {first:?}",
            fast.len()
        ),
    ))
}

fn report(id: usize, name: &str, outcome: Result<Outcome>) -> bool {
    match outcome {
        Ok(o) => {
            println!(
                "criterion {id} {}: {name}: {}",
                if o.pass { "PASS" } else { "FAIL" },
                o.detail
            );
            o.pass
        }
        Err(e) => {
            println!("criterion {id} FAIL: {name}: error: {e}");
            false
        }
    }
}

fn main() {
    let mut all = true;
    all &= report(1, "Ishigami ground truth", c1_ishigami());
    all &= report(2, "Hartmann-6D ground truth", c2_hartmann());
    match convergence_report() {
        Ok(r) => {
            all &= report(3, "metamodel vs True-MV agreement", Ok(c3_stage_one(&r)));
            all &= report(4, "discretization convergence", Ok(c4_stage_two(&r)));
        }
        Err(e) => {
            all &= report(
                3,
                "metamodel vs True-MV agreement",
                Err(mvgsa::Error::InvalidArgument(e.to_string())),
            );
            all &= report(4, "discretization convergence", Err(e));
        }
    }
    all &= report(5, "LVGP properties", c5_lvgp());
    all &= report(6, "GSA estimator properties", c6_gsa());
    match blockworld_runs() {
        Ok((runs, secs)) => {
            all &= report(7, "BlockWorld BO", Ok(c7_bo(&runs, secs)));
            all &= report(8, "BlockWorld focus selection", Ok(c8_focus(&runs)));
        }
        Err(e) => {
            all &= report(
                7,
                "BlockWorld BO",
                Err(mvgsa::Error::InvalidArgument(e.to_string())),
            );
            all &= report(8, "BlockWorld focus selection", Err(e));
        }
    }
    all &= report(9, "mechanics oracles", c9_mechanics());
    if !all {
        std::process::exit(1);
    }
}
