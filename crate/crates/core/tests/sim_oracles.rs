//! Simulator against closed forms and exact chain solves.

use durability::closedform::mttdl_exact;
use durability::ctmc::{canonical_model, mttdl_linear_solve, reliability_at};
use durability::sim::{
    estimate_mean_time, estimate_unreliability, run_replicates, Bias, Estimator, SimConfig, SimModel, TimeKind,
};

#[test]
fn canonical_pair_within_two_percent() {
    let (lambda, mu) = (1.0 / 200e3, 1.0 / 24.0);
    let o =
        run_replicates(&SimModel::Markov(canonical_model(1, 1, lambda, mu)), &SimConfig::new(100_000, 2024)).unwrap();
    let est = estimate_mean_time(&o, TimeKind::DataLoss).unwrap();
    let exact = mttdl_exact(1, 1, lambda, mu).unwrap();
    assert!((est.value / exact - 1.0).abs() < 0.02, "{est:?} vs {exact}");
    assert!(est.ci.0 < exact && exact < est.ci.1, "{est:?} vs {exact}");
}

#[test]
fn pair_without_repair() {
    let lambda = 1.0 / 5000.0;
    let o = run_replicates(&SimModel::Markov(canonical_model(1, 1, lambda, 0.0)), &SimConfig::new(100_000, 5)).unwrap();
    let est = estimate_mean_time(&o, TimeKind::DataLoss).unwrap();
    assert!((est.value - 1.5 / lambda).abs() < 3.0 * est.std_err, "{est:?}");
}

#[test]
fn one_year_unreliability() {
    let model = canonical_model(2, 1, 1.0 / 2000.0, 1.0 / 48.0);
    let o = run_replicates(&SimModel::Markov(model.clone()), &SimConfig::new(50_000, 6)).unwrap();
    let u = estimate_unreliability(&o, 8760.0).unwrap();
    let exact = 1.0 - reliability_at(&model, 8760.0).unwrap();
    assert!((u.value - exact).abs() < 3.0 * u.std_err, "{u:?} vs {exact}");
}

#[test]
fn biased_regenerative_reaches_rare_losses() {
    // about 1e12 hours: unreachable by running replicates to absorption
    let model = canonical_model(8, 2, 1.0 / 200e3, 1.0 / 24.0);
    let exact = mttdl_linear_solve(&model).unwrap().mttdl;
    let mut cfg = SimConfig::new(100_000, 12);
    cfg.estimator = Estimator::Regenerative;
    cfg.bias = Some(Bias { threshold: 1, factor: 500.0 });
    let o = run_replicates(&SimModel::Markov(model), &cfg).unwrap();
    let est = estimate_mean_time(&o, TimeKind::DataLoss).unwrap();
    assert!((est.value - exact).abs() < 3.0 * est.std_err, "{est:?} vs {exact}");
    assert!(est.std_err / est.value < 0.05, "{est:?}");
}
