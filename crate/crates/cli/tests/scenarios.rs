use kmedyn::{approximation_error, reduce, NoiseProcess, Ridge, RngSeed, UncertaintySpec};
use kmedyn_cli::config::{ArxFitConfig, OdeGmmConfig, ReducedPropConfig};
use kmedyn_cli::scenarios::{run_arx_fit, run_ode_gmm, run_reduced_prop};

#[test]
fn single_component_mixture_is_indistinguishable() {
    let n = 400;
    let cfg = OdeGmmConfig {
        n,
        parameter_law: UncertaintySpec::scalar_gmm(&[(1.0, -0.2, 0.1)]).unwrap(),
        output_every: 30,
        ..Default::default()
    };
    let r = run_ode_gmm(&cfg).unwrap();
    let threshold = 3.0 / (n as f64).sqrt();
    for d in &r.distances {
        assert!(d.value <= threshold, "{} at t={}: {}", d.kernel, d.time, d.value);
    }
}

#[test]
fn ode_gmm_curves_cover_all_kernels() {
    let cfg = OdeGmmConfig {
        n: 100,
        output_every: 100,
        ..Default::default()
    };
    let r = run_ode_gmm(&cfg).unwrap();
    assert_eq!(r.distances.len(), 4 * 7);
    assert_eq!(r.gmm.times(), &[0.0, 1.0, 2.0, 3.0]);
    assert!(r.distances.iter().filter(|d| d.time == 0.0).all(|d| d.value == 0.0));
}

fn small_arx() -> ArxFitConfig {
    ArxFitConfig {
        n: 150,
        steps: 120,
        ..Default::default()
    }
}

#[test]
fn exact_pve_sits_on_the_sampling_floor() {
    let mut cfg = small_arx();
    cfg.pve = cfg.truth.clone();
    let r = run_arx_fit(&cfg).unwrap();
    let floor = r.mean_baseline.unwrap();
    assert!(r.mean_pve <= 1.5 * floor && r.mean_pve >= floor / 1.5, "{} vs {floor}", r.mean_pve);
}

#[test]
fn point_estimate_misses_variability() {
    let mut cfg = small_arx();
    cfg.lsq = UncertaintySpec::point(vec![0.2, 0.3]).unwrap();
    let r = run_arx_fit(&cfg).unwrap();
    assert!(r.mean_lsq > 2.0 * r.mean_baseline.unwrap(), "{} {:?}", r.mean_lsq, r.mean_baseline);
}

#[test]
fn deterministic_walk_has_no_error() {
    let cfg = ReducedPropConfig {
        noise: NoiseProcess::new(UncertaintySpec::point(vec![0.0]).unwrap())
            .with_drift(vec![0.1])
            .unwrap(),
        repetitions: 3,
        reference_size: 50,
        ..Default::default()
    };
    let r = run_reduced_prop(&cfg).unwrap();
    assert!(r.errors.iter().all(|e| e.error <= 1e-10), "{:?}", r.errors);
}

#[test]
fn reference_sized_reduction_reconstructs() {
    let cfg = ReducedPropConfig {
        repetitions: 1,
        sizes: vec![10],
        ..Default::default()
    };
    let r = run_reduced_prop(&cfg).unwrap();
    assert_eq!(r.reference.len(), 500);
    let full = reduce(&r.reference, 500, Ridge::Auto, RngSeed(1)).unwrap();
    assert!(approximation_error(&full, &r.reference).unwrap() <= 1e-8);
}
