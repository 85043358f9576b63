use mvgsa::benchfns::{discretize, BaseFunction, GridRule, ISHIGAMI_MSI, ISHIGAMI_TSI};
use mvgsa::gsa::{
    estimate_indices, estimate_indices_with, metamodel_indices, EvaluatorKind, GsaOptions,
    SobolIndices,
};
use mvgsa::lvgp::{fit, FitConfig};
use mvgsa::sampling::initial_doe;
use mvgsa::{Dataset, Error, MixedDesignSpace, MixedPoint, Result};

fn additive(p: &MixedPoint) -> Result<f64> {
    Ok(p.x[0] + p.x[1])
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn additive_symmetric_function_splits_evenly() {
    let space = MixedDesignSpace::from_parts(&[("x1", 0.0, 1.0), ("x2", 0.0, 1.0)], &[]).unwrap();
    let s = estimate_indices(&additive, &space, 4096, 1).unwrap();
    for v in &s.variables {
        assert!(close(v.msi, 0.5, 0.02) && close(v.tsi, 0.5, 0.02), "{v:?}");
    }
}

#[test]
fn inert_variable_has_zero_indices() {
    let space =
        MixedDesignSpace::from_parts(&[("x1", 0.0, 1.0), ("x2", 0.0, 1.0)], &[("t", 4)]).unwrap();
    let f = |p: &MixedPoint| -> Result<f64> { Ok((3.0 * p.x[0]).sin() + p.x[1] * p.x[0]) };
    let s = estimate_indices(&f, &space, 4096, 2).unwrap();
    let t = s.get("t").unwrap();
    assert!(t.msi.abs() <= 0.01 && t.tsi.abs() <= 0.01, "{t:?}");
}

#[test]
fn qualitative_only_additive_levels() {
    // y = effect(a) + effect(b) with equal level-effect variances
    let space = MixedDesignSpace::from_parts(&[], &[("a", 4), ("b", 4)]).unwrap();
    let effect = [-1.5, -0.5, 0.5, 1.5];
    let f = move |p: &MixedPoint| -> Result<f64> { Ok(effect[p.t[0] - 1] + effect[p.t[1] - 1]) };
    let s = estimate_indices(&f, &space, 4096, 3).unwrap();
    for v in &s.variables {
        assert!(close(v.msi, 0.5, 0.02) && close(v.tsi, 0.5, 0.02), "{v:?}");
    }
}

#[test]
fn affine_output_transform_leaves_indices_unchanged() {
    let space = BaseFunction::Ishigami.space();
    let base = estimate_indices(&BaseFunction::Ishigami, &space, 1024, 4).unwrap();
    for (a, b) in [(3.5, -20.0), (-0.01, 7.0), (1e4, 1e3)] {
        let g =
            move |p: &MixedPoint| -> Result<f64> { Ok(a * BaseFunction::Ishigami.eval(&p.x) + b) };
        let s = estimate_indices(&g, &space, 1024, 4).unwrap();
        for (u, v) in base.variables.iter().zip(&s.variables) {
            assert!(
                close(u.msi, v.msi, 1e-10) && close(u.tsi, v.tsi, 1e-10),
                "a={a}: {u:?} vs {v:?}"
            );
        }
    }
}

fn sanity(s: &SobolIndices) {
    let sum_msi: f64 = s.variables.iter().map(|v| v.msi).sum();
    let sum_se: f64 = s.variables.iter().map(|v| v.msi_stderr).sum();
    assert!(
        sum_msi <= 1.0 + 3.0 * sum_se,
        "sum of MSI {sum_msi} (stderr sum {sum_se})"
    );
    for v in &s.variables {
        assert!(
            v.tsi >= v.msi - 2.0 * (v.msi_stderr + v.tsi_stderr),
            "{v:?}"
        );
        assert!(v.msi_stderr.is_finite() && v.tsi_stderr.is_finite());
    }
}

#[test]
fn estimator_sanity_bounds() {
    sanity(
        &estimate_indices(
            &BaseFunction::Ishigami,
            &BaseFunction::Ishigami.space(),
            2048,
            5,
        )
        .unwrap(),
    );
    sanity(
        &estimate_indices(
            &BaseFunction::Hartmann6,
            &BaseFunction::Hartmann6.space(),
            2048,
            5,
        )
        .unwrap(),
    );
    let f = discretize(BaseFunction::Ishigami, &[0, 2], 5, GridRule::Endpoints).unwrap();
    sanity(&estimate_indices(&f, f.space(), 2048, 5).unwrap());
}

#[test]
fn identical_seeds_are_bit_identical() {
    let space = BaseFunction::Ishigami.space();
    let a = estimate_indices(&BaseFunction::Ishigami, &space, 512, 11).unwrap();
    let b = estimate_indices(&BaseFunction::Ishigami, &space, 512, 11).unwrap();
    let c = estimate_indices(&BaseFunction::Ishigami, &space, 512, 12).unwrap();
    for (u, v) in a.variables.iter().zip(&b.variables) {
        assert_eq!(u.msi.to_bits(), v.msi.to_bits());
        assert_eq!(u.tsi.to_bits(), v.tsi.to_bits());
        assert_eq!(u.msi_stderr.to_bits(), v.msi_stderr.to_bits());
    }
    assert_ne!(a.msi(), c.msi());
}

#[test]
fn serial_evaluators_give_the_same_answer() {
    struct Serial;
    impl mvgsa::gsa::Evaluator for Serial {
        fn evaluate(&self, p: &MixedPoint) -> Result<f64> {
            Ok(BaseFunction::Ishigami.eval(&p.x))
        }
        fn concurrent(&self) -> bool {
            false
        }
    }
    let space = BaseFunction::Ishigami.space();
    let a = estimate_indices(&Serial, &space, 256, 1).unwrap();
    let b = estimate_indices(&BaseFunction::Ishigami, &space, 256, 1).unwrap();
    assert_eq!(a, b);
}

#[test]
fn ishigami_moderate_sample() {
    let s = estimate_indices(
        &BaseFunction::Ishigami,
        &BaseFunction::Ishigami.space(),
        1 << 13,
        0,
    )
    .unwrap();
    for i in 0..3 {
        assert!(
            close(s.variables[i].msi, ISHIGAMI_MSI[i], 0.03),
            "{:?}",
            s.variables[i]
        );
        assert!(
            close(s.variables[i].tsi, ISHIGAMI_TSI[i], 0.03),
            "{:?}",
            s.variables[i]
        );
    }
}

#[test]
fn constant_response_is_reported() {
    let space = MixedDesignSpace::from_parts(&[("x", 0.0, 1.0)], &[("t", 3)]).unwrap();
    let f = |_: &MixedPoint| -> Result<f64> { Ok(4.2) };
    let err = estimate_indices(&f, &space, 128, 0).unwrap_err();
    assert!(matches!(err, Error::ConstantResponse));
    assert!(err.to_string().contains("constant response"));
}

#[test]
fn evaluator_errors_and_bad_values_propagate() {
    let space = MixedDesignSpace::from_parts(&[("x", 0.0, 1.0)], &[]).unwrap();
    let failing = |_: &MixedPoint| -> Result<f64> { Err(Error::InvalidArgument("boom".into())) };
    assert!(estimate_indices(&failing, &space, 64, 0).is_err());
    let nan = |_: &MixedPoint| -> Result<f64> { Ok(f64::NAN) };
    assert!(estimate_indices(&nan, &space, 64, 0).is_err());
    assert!(estimate_indices(&additive, &space, 1, 0).is_err());
}

#[test]
fn csv_and_json_output() {
    let space = MixedDesignSpace::from_parts(&[("x1", 0.0, 1.0), ("x2", 0.0, 1.0)], &[]).unwrap();
    let opts = GsaOptions {
        resamples: 20,
        ..GsaOptions::new(256, 0)
    };
    let s = estimate_indices_with(&additive, &space, &opts).unwrap();
    assert_eq!(s.evaluator, EvaluatorKind::Direct);
    let mut buf = Vec::new();
    s.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("variable,msi,msi_stderr,tsi,tsi_stderr"));
    assert!(lines.next().unwrap().starts_with("x1,"));
    let json: serde_json::Value = serde_json::from_str(&s.to_json().unwrap()).unwrap();
    assert_eq!(json["n_base"], 256);
    assert_eq!(json["resamples"], 20);
}

#[test]
fn metamodel_agrees_with_direct_on_a_dense_sample() {
    // mixed Ishigami at 5 levels, 120 training points
    let f = discretize(BaseFunction::Ishigami, &[0, 2], 5, GridRule::Endpoints).unwrap();
    let inputs = initial_doe(f.space(), 120, 1).unwrap();
    let outputs = inputs.iter().map(|p| vec![f.eval(p).unwrap()]).collect();
    let data = Dataset::new(f.space().clone(), inputs, outputs).unwrap();
    let model = fit(
        &data,
        &FitConfig {
            starts: 2,
            data_start: true,
            seed: 1,
            ..FitConfig::default()
        },
    )
    .unwrap();
    let mv = metamodel_indices(&model, 4096, 2).unwrap();
    let direct = estimate_indices(&f, f.space(), 1 << 14, 3).unwrap();
    assert_eq!(mv.evaluator, EvaluatorKind::Metamodel);
    for (m, d) in mv.variables.iter().zip(&direct.variables) {
        assert_eq!(m.variable, d.variable);
        assert!(
            close(m.msi, d.msi, 0.05) && close(m.tsi, d.tsi, 0.05),
            "{m:?} vs {d:?}"
        );
    }
}

#[test]
fn metamodel_of_constant_data_is_constant_response() {
    let space = MixedDesignSpace::from_parts(&[("x", 0.0, 1.0)], &[("t", 2)]).unwrap();
    let inputs = initial_doe(&space, 6, 0).unwrap();
    let outputs = vec![vec![1.5]; 6];
    let data = Dataset::new(space, inputs, outputs).unwrap();
    let model = fit(
        &data,
        &FitConfig {
            starts: 1,
            ..FitConfig::default()
        },
    )
    .unwrap();
    assert!(matches!(
        metamodel_indices(&model, 256, 0),
        Err(Error::ConstantResponse)
    ));
}
