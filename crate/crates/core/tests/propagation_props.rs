use std::sync::Arc;

use kmedyn::{
    embed_uniform, linear_ode, propagate_direct, propagate_reduced, random_walk_drift, reduce, rkhs_dist_sq,
    ustat_step, Cadence, DiscreteSystem, Expansion, KernelSpec, Method, NoiseProcess, PointSet, ReducedSetConfig,
    Ridge, RngSeed, StatePoint, StepMap, SystemModel, UncertaintySpec,
};
use rand::Rng;

fn random_expansion(seed: u64, n: usize, kernel: KernelSpec) -> Expansion {
    let mut rng = RngSeed(seed).rng();
    let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..1.0)).collect();
    Expansion::new(kernel, PointSet::from_rows(&rows).unwrap(), w).unwrap()
}

#[test]
fn ustat_preserves_mass() {
    let sys = random_walk_drift(5, 0.5f64, 0.1).unwrap();
    let k = KernelSpec::gaussian(0.5).unwrap();
    for seed in 0..20 {
        let cur = random_expansion(seed, 12, k);
        let next = ustat_step(&cur, &sys, 3, 7, RngSeed(seed)).unwrap();
        assert_eq!(next.len(), 84);
        assert!((next.total_weight() - cur.total_weight()).abs() <= 1e-12);
    }
}

#[test]
fn ustat_enumerates_two_outcomes() {
    // x + sign(w): each noise draw lands on −1 or +1
    let map: StepMap<f64> = Arc::new(|_, x, w| vec![x[0] + w[0].signum()]);
    let noise = NoiseProcess::new(UncertaintySpec::uniform_box(vec![-1.0], vec![1.0]).unwrap());
    let sys = DiscreteSystem::new(map, 1, noise.clone()).unwrap();
    let seed = (0..)
        .map(RngSeed)
        .find(|s| {
            let d = noise.sample_at_with(&mut s.stream(0), 2, 0.0).unwrap();
            d.row(0)[0] < 0.0 && d.row(1)[0] > 0.0
        })
        .unwrap();
    let k = KernelSpec::gaussian(1.0).unwrap();
    let cur = Expansion::singleton(k, &StatePoint::scalar(0.0).unwrap(), 1.0).unwrap();
    let next = ustat_step(&cur, &sys, 0, 2, seed).unwrap();
    assert_eq!(next.points().to_rows(), vec![vec![-1.0], vec![1.0]]);
    assert_eq!(next.weights(), &[0.5, 0.5]);
}

#[test]
fn ustat_rejects_draw_once_noise() {
    let noise = NoiseProcess::new(UncertaintySpec::normal(0.0, 1.0).unwrap()).with_cadence(Cadence::Once);
    let sys = kmedyn::random_walk(3, noise).unwrap();
    let k = KernelSpec::gaussian(1.0).unwrap();
    let cur = Expansion::singleton(k, &StatePoint::scalar(0.0).unwrap(), 1.0).unwrap();
    assert!(ustat_step(&cur, &sys, 0, 2, RngSeed(1)).is_err());
}

#[test]
fn reduced_weights_are_first_order_optimal() {
    let k = KernelSpec::gaussian(0.5).unwrap();
    let full = random_expansion(2, 40, k);
    let red = reduce(&full, 8, Ridge::Fixed(0.0), RngSeed(5)).unwrap();
    let best = rkhs_dist_sq(&red, &full).unwrap();
    let mut rng = RngSeed(6).rng();
    for _ in 0..100 {
        let w: Vec<f64> = red.weights().iter().map(|a| a + 1e-3 * rng.random_range(-1.0..1.0)).collect();
        let moved = Expansion::new(k, red.points().clone(), w).unwrap();
        assert!(rkhs_dist_sq(&moved, &full).unwrap() >= best - 1e-12);
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn residual_shrinks_with_reduced_size() {
    let k = KernelSpec::gaussian(0.5).unwrap();
    let full = random_expansion(17, 50, k);
    let med = |n_r: usize| {
        median(
            (0..20)
                .map(|s| rkhs_dist_sq(&reduce(&full, n_r, Ridge::Auto, RngSeed(s)).unwrap(), &full).unwrap())
                .collect(),
        )
    };
    assert!(med(25) <= med(10));
    let whole = reduce(&full, 50, Ridge::Fixed(0.0), RngSeed(0)).unwrap();
    assert!(rkhs_dist_sq(&whole, &full).unwrap() <= 1e-10);
}

#[test]
fn direct_ode_matches_analytic_solutions() {
    let law = UncertaintySpec::scalar_gmm(&[(0.7, -0.6, 0.25), (0.3, 1.0, 0.35)]).unwrap();
    let sys: SystemModel = linear_ode(0.0, 1.0, 0.01, Method::Rk4).unwrap().into();
    let seed = RngSeed(21);
    let n = 200;
    let ens = propagate_direct(&sys, &StatePoint::scalar(1.0).unwrap(), Some(&law), n, seed).unwrap();
    let exact: Vec<StatePoint> = (0..n)
        .map(|i| {
            let mut xi = Vec::new();
            law.draw_into(&mut seed.stream(i as u64), &mut xi);
            StatePoint::scalar(xi[0].exp()).unwrap()
        })
        .collect();
    let k = KernelSpec::gaussian(1.0).unwrap();
    let last = ens.times().len() - 1;
    let got = Expansion::uniform(k, ens.slice(last).clone()).unwrap();
    let d = rkhs_dist_sq(&got, &embed_uniform(&exact, k).unwrap()).unwrap().sqrt();
    assert!(d < 1e-4, "{d}");
}

#[test]
fn direct_is_deterministic() {
    let sys: SystemModel = random_walk_drift(10, 0.5f64, 0.1).unwrap().into();
    let x0 = StatePoint::scalar(0.0).unwrap();
    let a = propagate_direct(&sys, &x0, None, 50, RngSeed(3)).unwrap();
    let b = propagate_direct(&sys, &x0, None, 50, RngSeed(3)).unwrap();
    assert_eq!(a.slices(), b.slices());
    assert_eq!(a.weights(), None);
}

#[test]
fn reduced_random_walk_error_is_finite() {
    let sys = random_walk_drift(10, 0.5f64, 0.1).unwrap();
    let k = KernelSpec::gaussian(0.5).unwrap();
    let x0 = StatePoint::scalar(0.0).unwrap();
    let cfg = ReducedSetConfig::new(10, 10);
    let exps = propagate_reduced(&sys, &x0, &cfg, 10, k, RngSeed(1)).unwrap();
    assert_eq!(exps.len(), 11);
    let reference = propagate_direct(&sys.clone().into(), &x0, None, 500, RngSeed(99)).unwrap();
    let r = Expansion::uniform(k, reference.slice(10).clone()).unwrap();
    let err = rkhs_dist_sq(&exps[10], &r).unwrap();
    assert!(err.is_finite() && err < 1.0, "{err}");
    assert!(exps.iter().all(|e| e.len() <= 10));
}

#[test]
fn degenerate_noise_gives_exact_propagation() {
    let noise = NoiseProcess::new(UncertaintySpec::point(vec![0.0]).unwrap());
    let sys = kmedyn::random_walk(10, noise).unwrap();
    let k = KernelSpec::gaussian(0.5).unwrap();
    let x0 = StatePoint::scalar(0.0).unwrap();
    let exps = propagate_reduced(&sys, &x0, &ReducedSetConfig::new(10, 10), 10, k, RngSeed(1)).unwrap();
    let direct = propagate_direct(&sys.clone().into(), &x0, None, 10, RngSeed(2)).unwrap();
    let truth = Expansion::singleton(k, &x0, 1.0).unwrap();
    assert!(rkhs_dist_sq(&exps[10], &truth).unwrap() <= 1e-10);
    let d = Expansion::uniform(k, direct.slice(10).clone()).unwrap();
    assert!(rkhs_dist_sq(&d, &truth).unwrap() <= 1e-10);
}

#[test]
fn single_precision_pipeline() {
    let sys = random_walk_drift(5, 0.5f32, 0.1).unwrap();
    let k = KernelSpec::<f32>::gaussian(0.5).unwrap();
    let x0 = StatePoint::scalar(0.0f32).unwrap();
    let exps = propagate_reduced(&sys, &x0, &ReducedSetConfig::new(5, 5), 5, k, RngSeed(1)).unwrap();
    assert!(exps.iter().all(|e| e.weights().iter().all(|w| w.is_finite())));
}
