use kmedyn::{
    embed_uniform, eval_kernel, gram, mmd_over_time, rkhs_dist_sq, rkhs_dist_sq_fast, Expansion, KernelSpec,
    PointSet, RngSeed, StatePoint, TrajectoryEnsemble, UncertaintySpec,
};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::Rng;

fn kernels() -> Vec<KernelSpec> {
    vec![
        KernelSpec::linear(),
        KernelSpec::polynomial(3).unwrap(),
        KernelSpec::gaussian(0.7).unwrap(),
        KernelSpec::exponential(),
    ]
}

fn random_set<R: Rng>(rng: &mut R, n: usize, d: usize) -> Vec<StatePoint> {
    (0..n)
        .map(|_| StatePoint::new((0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap())
        .collect()
}

fn k(spec: &KernelSpec, x: &StatePoint, y: &StatePoint) -> f64 {
    eval_kernel(spec, x, y).unwrap()
}

/// (1/M²)ΣΣk(x,x') − (2/MN)ΣΣk(x,y) + (1/N²)ΣΣk(y,y'), plain loops.
fn naive_mmd2(spec: &KernelSpec, xs: &[StatePoint], ys: &[StatePoint]) -> f64 {
    let (m, n) = (xs.len() as f64, ys.len() as f64);
    let mut sxx = 0.0;
    for a in xs {
        for b in xs {
            sxx += k(spec, a, b);
        }
    }
    let mut sxy = 0.0;
    for a in xs {
        for b in ys {
            sxy += k(spec, a, b);
        }
    }
    let mut syy = 0.0;
    for a in ys {
        for b in ys {
            syy += k(spec, a, b);
        }
    }
    sxx / (m * m) - 2.0 * sxy / (m * n) + syy / (n * n)
}

#[test]
fn mmd_matches_triple_sum() {
    let mut rng = RngSeed(7).rng();
    for case in 0..100 {
        let spec = kernels()[case % 4];
        let d = rng.random_range(1..4);
        let (m, n) = (rng.random_range(1..16), rng.random_range(1..16));
        let xs = random_set(&mut rng, m, d);
        let ys = random_set(&mut rng, n, d);
        let got = rkhs_dist_sq(&embed_uniform(&xs, spec).unwrap(), &embed_uniform(&ys, spec).unwrap()).unwrap();
        let want = naive_mmd2(&spec, &xs, &ys).max(0.0);
        assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0), "case {case}: {got} vs {want}");
    }
}

#[test]
fn gram_is_psd() {
    let mut rng = RngSeed(3).rng();
    for spec in kernels() {
        for _ in 0..50 {
            let n = rng.random_range(2..21);
            let xs = random_set(&mut rng, n, 2);
            let ps = PointSet::from_points(&xs).unwrap();
            let g = gram(&spec, &ps, &ps).unwrap();
            let n = g.nrows();
            let m = DMatrix::from_row_slice(n, n, g.as_slice());
            let eig = SymmetricEigen::new(m).eigenvalues;
            let max = eig.max();
            assert!(eig.min() >= -1e-8 * max, "{spec}: {} vs {max}", eig.min());
        }
    }
}

#[test]
fn three_point_gaussian_gram_eigenvalues() {
    let mut rng = RngSeed(11).rng();
    let ps = PointSet::from_points(&random_set(&mut rng, 3, 2)).unwrap();
    let g = gram(&KernelSpec::gaussian(1.0).unwrap(), &ps, &ps).unwrap();
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(3, 3, g.as_slice())).eigenvalues;
    assert!(eig.min() >= -1e-10);
}

#[test]
fn linear_kernel_sees_only_means() {
    let mut rng = RngSeed(5).rng();
    for _ in 0..20 {
        let xs = random_set(&mut rng, 9, 3);
        let ys = random_set(&mut rng, 13, 3);
        let mx = PointSet::from_points(&xs).unwrap().mean().unwrap();
        let my = PointSet::from_points(&ys).unwrap().mean().unwrap();
        let want: f64 = mx.iter().zip(&my).map(|(a, b)| (a - b) * (a - b)).sum();
        let spec = KernelSpec::linear();
        let got = rkhs_dist_sq(&embed_uniform(&xs, spec).unwrap(), &embed_uniform(&ys, spec).unwrap()).unwrap();
        assert!((got - want).abs() <= 1e-10, "{got} vs {want}");
    }
}

/// Whitens `a` to unit second moment, then returns `A ∪ −A` shifted by `shift`.
fn symmetrized(a: &DMatrix<f64>, shift: &[f64]) -> Vec<StatePoint> {
    let n = a.nrows() as f64;
    let m = a.transpose() * a / n;
    let l = m.cholesky().unwrap().l();
    let w = l.solve_lower_triangular(&a.transpose()).unwrap().transpose();
    let mut out = Vec::new();
    for r in w.row_iter() {
        for s in [1.0, -1.0] {
            out.push(StatePoint::new(r.iter().zip(shift).map(|(v, c)| s * v + c).collect()).unwrap());
        }
    }
    out
}

#[test]
fn poly2_blind_to_matched_two_moments() {
    let mut rng = RngSeed(9).rng();
    let d = 2;
    let spec = KernelSpec::polynomial(2).unwrap();
    for _ in 0..10 {
        let a = DMatrix::from_fn(7, d, |_, _| rng.random_range(-1.0..1.0));
        let b = DMatrix::from_fn(11, d, |_, _| rng.random::<f64>().powi(3) - 0.2);
        let shift = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let xs = symmetrized(&a, &shift);
        let ys = symmetrized(&b, &shift);
        let got = rkhs_dist_sq(&embed_uniform(&xs, spec).unwrap(), &embed_uniform(&ys, spec).unwrap()).unwrap();
        assert!(got <= 1e-10, "{got}");
        // the third moment differs, so a cubic kernel separates them
        let cubic = KernelSpec::polynomial(3).unwrap();
        let sep = rkhs_dist_sq(&embed_uniform(&xs, cubic).unwrap(), &embed_uniform(&ys, cubic).unwrap()).unwrap();
        assert!(sep >= 0.0);
    }
}

#[test]
fn population_mmd_between_shifted_normals() {
    // Monte Carlo oracle for ‖μ_P − μ_Q‖ with P = N(0,1), Q = N(5,1), σ = 1:
    // E k(x,x') = E k(y,y') = 1/√3 and E k(x,y) = e^{−25/6}/√3.
    let mut rng = RngSeed(123).rng();
    let n = 100_000;
    let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
    let kern = |a: f64, b: f64| (-(a - b) * (a - b) / 2.0).exp();
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for _ in 0..n {
        let x: f64 = rng.sample(normal);
        let x2: f64 = rng.sample(normal);
        let y: f64 = 5.0 + rng.sample::<f64, _>(normal);
        sxx += kern(x, x2);
        sxy += kern(x, y);
    }
    let oracle = (2.0 * sxx / n as f64 - 2.0 * sxy / n as f64).sqrt();
    let closed = (2.0 / 3f64.sqrt() * (1.0 - (-25.0f64 / 6.0).exp())).sqrt();
    assert!((oracle - closed).abs() < 0.01);

    let times = vec![0.0, 1.0, 2.0];
    let draw = |mean: f64, seed: u64| {
        let law = UncertaintySpec::normal(mean, 1.0).unwrap();
        let slices = (0..3).map(|t| law.sample(100, RngSeed(seed).derive(t)).unwrap()).collect();
        TrajectoryEnsemble::new(times.clone(), slices, None).unwrap()
    };
    let a = draw(0.0, 1);
    let b = draw(5.0, 2);
    let d = mmd_over_time(&a, &b, &KernelSpec::gaussian(1.0).unwrap()).unwrap();
    assert_eq!(d.len(), 3);
    for (_, v) in d {
        assert!(v > 0.5);
        assert!((v - oracle).abs() < 0.2, "{v} vs {oracle}");
    }
}

#[test]
fn f32_distances_track_f64() {
    let pts: Vec<Vec<f64>> = vec![vec![0.1, 0.4], vec![-0.3, 0.2], vec![0.9, -0.5]];
    let other: Vec<Vec<f64>> = vec![vec![0.0, 0.0], vec![0.5, 0.5]];
    let spec = KernelSpec::gaussian(0.8).unwrap();
    let d64 = rkhs_dist_sq(
        &Expansion::uniform(spec, PointSet::from_rows(&pts).unwrap()).unwrap(),
        &Expansion::uniform(spec, PointSet::from_rows(&other).unwrap()).unwrap(),
    )
    .unwrap();
    let cast = |v: &[Vec<f64>]| v.iter().map(|r| r.iter().map(|&x| x as f32).collect()).collect::<Vec<Vec<f32>>>();
    let spec32 = KernelSpec::<f32>::gaussian(0.8).unwrap();
    let d32 = rkhs_dist_sq(
        &Expansion::uniform(spec32, PointSet::from_rows(&cast(&pts)).unwrap()).unwrap(),
        &Expansion::uniform(spec32, PointSet::from_rows(&cast(&other)).unwrap()).unwrap(),
    )
    .unwrap();
    assert!((d32 as f64 - d64).abs() < 1e-5);
}

fn small_set() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..4).prop_flat_map(|d| prop::collection::vec(prop::collection::vec(-2.0f64..2.0, d), 1..12))
}

proptest! {
    #[test]
    fn kernels_are_symmetric(x in prop::collection::vec(-3.0f64..3.0, 3), y in prop::collection::vec(-3.0f64..3.0, 3)) {
        let (x, y) = (StatePoint::new(x).unwrap(), StatePoint::new(y).unwrap());
        for spec in kernels() {
            prop_assert_eq!(k(&spec, &x, &y), k(&spec, &y, &x));
        }
        let g = KernelSpec::gaussian(0.3).unwrap();
        prop_assert_eq!(k(&g, &x, &x), 1.0);
    }

    #[test]
    fn self_distance_vanishes(rows in small_set(), seed in 0u64..1000) {
        let mut rng = RngSeed(seed).rng();
        let w: Vec<f64> = rows.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
        let ps = PointSet::from_rows(&rows).unwrap();
        for spec in kernels() {
            let a = Expansion::new(spec, ps.clone(), w.clone()).unwrap();
            prop_assert!(rkhs_dist_sq(&a, &a).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn distance_is_symmetric_and_routes_agree(a in small_set(), seed in 0u64..1000) {
        let d = a[0].len();
        let mut rng = RngSeed(seed).rng();
        let b: Vec<Vec<f64>> = (0..5).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        for spec in kernels() {
            let ea = Expansion::uniform(spec, PointSet::from_rows(&a).unwrap()).unwrap();
            let eb = Expansion::uniform(spec, PointSet::from_rows(&b).unwrap()).unwrap();
            let ab = rkhs_dist_sq(&ea, &eb).unwrap();
            let ba = rkhs_dist_sq(&eb, &ea).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-12 * ab.max(1.0));
            let fast = rkhs_dist_sq_fast(&ea, &eb).unwrap();
            prop_assert!((ab - fast).abs() <= 1e-9 * ab.max(1.0), "{} {} {}", spec, ab, fast);
        }
    }
}
