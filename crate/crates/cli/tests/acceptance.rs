//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on failure.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use kmedyn::{
    embed_uniform, eval_kernel, gram, linear_ode, propagate_direct, reduce, rkhs_dist_sq, CachedEmbedding,
    Expansion, KernelSpec, Matrix, Method, PointSet, Ridge, RngSeed, StatePoint, SystemModel, UncertaintySpec,
};
use kmedyn_cli::config::{ArxFitConfig, OdeGmmConfig, PropagateConfig, ReducedPropConfig, SystemConfig};
use kmedyn_cli::scenarios::{run_arx_fit, run_ode_gmm, run_reduced_prop};
use kmedyn_cli::ScenarioConfig;
use nalgebra::{DMatrix, SymmetricEigen};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn kernels() -> [KernelSpec; 4] {
    [
        KernelSpec::linear(),
        KernelSpec::polynomial(3).unwrap(),
        KernelSpec::gaussian(0.7).unwrap(),
        KernelSpec::exponential(),
    ]
}

fn uniform_points(n: usize, d: usize, seed: RngSeed) -> Vec<StatePoint> {
    UncertaintySpec::uniform_box(vec![-1.0; d], vec![1.0; d])
        .unwrap()
        .sample(n, seed)
        .unwrap()
        .to_points()
}

fn naive_mmd2(spec: &KernelSpec, xs: &[StatePoint], ys: &[StatePoint]) -> f64 {
    let k = |a: &StatePoint, b: &StatePoint| eval_kernel(spec, a, b).unwrap();
    let (m, n) = (xs.len() as f64, ys.len() as f64);
    let sxx: f64 = xs.iter().flat_map(|a| xs.iter().map(move |b| (a, b))).map(|(a, b)| k(a, b)).sum();
    let sxy: f64 = xs.iter().flat_map(|a| ys.iter().map(move |b| (a, b))).map(|(a, b)| k(a, b)).sum();
    let syy: f64 = ys.iter().flat_map(|a| ys.iter().map(move |b| (a, b))).map(|(a, b)| k(a, b)).sum();
    sxx / (m * m) - 2.0 * sxy / (m * n) + syy / (n * n)
}

fn c1_mmd_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    for case in 0..100u64 {
        let spec = kernels()[case as usize % 4];
        let d = 1 + (case as usize / 4) % 3;
        let m = 1 + (case as usize * 7) % 15;
        let n = 1 + (case as usize * 11 + 3) % 15;
        let xs = uniform_points(m, d, RngSeed(case).derive(1));
        let ys = uniform_points(n, d, RngSeed(case).derive(2));
        let got = rkhs_dist_sq(&embed_uniform(&xs, spec).unwrap(), &embed_uniform(&ys, spec).unwrap()).unwrap();
        let want = naive_mmd2(&spec, &xs, &ys);
        let rel = (got - want).abs() / want.abs().max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
    }
    check(worst <= 1e-10, format!("100 cases, max relative deviation {worst:.2e} (tol 1e-10)"))
}

fn c2_gram_psd() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    for (ki, spec) in kernels().iter().enumerate() {
        for s in 0..50u64 {
            let n = 2 + (s as usize * 5) % 19;
            let ps = PointSet::from_points(&uniform_points(n, 2, RngSeed(s).derive(ki as u64))).unwrap();
            let g = gram(spec, &ps, &ps).unwrap();
            let eig = SymmetricEigen::new(DMatrix::from_row_slice(n, n, g.as_slice())).eigenvalues;
            worst = worst.max(-eig.min() / eig.max());
        }
    }
    check(
        worst <= 1e-8,
        format!("200 Gram matrices, worst -min/max eigenvalue {worst:.2e} (tol 1e-8)"),
    )
}

/// Whitened, sign-symmetrized copy of `a` shifted by `shift`: mean `shift`,
/// second central moment `I`.
fn matched_set(a: &DMatrix<f64>, shift: &[f64]) -> Vec<StatePoint> {
    let m = a.transpose() * a / a.nrows() as f64;
    let l = m.cholesky().unwrap().l();
    let w = l.solve_lower_triangular(&a.transpose()).unwrap().transpose();
    w.row_iter()
        .flat_map(|r| {
            [1.0, -1.0].map(|s| StatePoint::new(r.iter().zip(shift).map(|(v, c)| s * v + c).collect()).unwrap())
        })
        .collect()
}

fn c3_moment_capture() -> Outcome {
    let mut lin_worst: f64 = 0.0;
    let mut poly_worst: f64 = 0.0;
    for s in 0..20u64 {
        let xs = uniform_points(9, 3, RngSeed(s).derive(1));
        let ys = uniform_points(13, 3, RngSeed(s).derive(2));
        let mean = |v: &[StatePoint]| PointSet::from_points(v).unwrap().mean().unwrap();
        let want: f64 = mean(&xs).iter().zip(mean(&ys)).map(|(a, b)| (a - b) * (a - b)).sum();
        let lin = KernelSpec::linear();
        let got = rkhs_dist_sq(&embed_uniform(&xs, lin).unwrap(), &embed_uniform(&ys, lin).unwrap()).unwrap();
        lin_worst = lin_worst.max((got - want).abs());

        let raw = |n: usize, seed: RngSeed| {
            let p = uniform_points(n, 2, seed);
            DMatrix::from_fn(n, 2, |i, j| p[i].as_slice()[j].powi(3))
        };
        let shift = [0.3 * s as f64 - 2.0, 1.0];
        let a = matched_set(&raw(7, RngSeed(s).derive(3)), &shift);
        let b = matched_set(&raw(12, RngSeed(s).derive(4)), &shift);
        let p2 = KernelSpec::polynomial(2).unwrap();
        let d = rkhs_dist_sq(&embed_uniform(&a, p2).unwrap(), &embed_uniform(&b, p2).unwrap()).unwrap();
        poly_worst = poly_worst.max(d);
    }
    check(
        lin_worst <= 1e-10 && poly_worst <= 1e-10,
        format!("linear vs mean gap max dev {lin_worst:.2e}; polynomial(2) on matched sets max {poly_worst:.2e} (tol 1e-10)"),
    )
}

fn c4_integrator_order() -> Outcome {
    let err = |method, h: f64| {
        let sys = linear_ode(0.0, 1.0, h, method).unwrap();
        let x1 = StatePoint::scalar(1.0).unwrap();
        let traj = sys.integrate(&x1, &x1).unwrap();
        (traj.last().unwrap().1.as_slice()[0] - 1f64.exp()).abs()
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for (method, lo, hi) in [(Method::Euler, 0.8, 1.2), (Method::Rk4, 3.5, 4.5)] {
        let e: Vec<f64> = [0.02, 0.01, 0.005].iter().map(|&h| err(method, h)).collect();
        let orders: Vec<f64> = e.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
        ok &= orders.iter().all(|o| (lo..=hi).contains(o));
        parts.push(format!("{method:?} orders {:.3}, {:.3} (want [{lo}, {hi}])", orders[0], orders[1]));
    }
    check(ok, parts.join("; "))
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

fn c5_consistency() -> Outcome {
    let law = UncertaintySpec::<f64>::scalar_gmm(&[(0.7, -0.6, 0.25), (0.3, 1.0, 0.35)]).unwrap();
    let kernel = KernelSpec::gaussian(1.0).unwrap();
    let t_end: f64 = 1.0;
    // analytic solutions x0·e^{ξt} at 10⁵ independent parameter draws
    let xi = law.sample(100_000, RngSeed(2024)).unwrap();
    let exact: Vec<f64> = xi.as_flat().iter().map(|&x| (x * t_end).exp()).collect();
    let reference = CachedEmbedding::new(Expansion::uniform(kernel, PointSet::new(1, exact).unwrap()).unwrap()).unwrap();
    let sys: SystemModel = linear_ode(0.0, t_end, 0.01, Method::Rk4).unwrap().into();
    let x0 = StatePoint::scalar(1.0).unwrap();
    let sizes = [100usize, 400, 1600];
    let meds: Vec<f64> = sizes
        .iter()
        .map(|&n| {
            median(
                (0..10u64)
                    .map(|s| {
                        let ens = propagate_direct(&sys, &x0, Some(&law), n, RngSeed(s).derive(n as u64)).unwrap();
                        let last = ens.times().len() - 1;
                        let e = Expansion::uniform(kernel, ens.slice(last).clone()).unwrap();
                        reference.dist_sq(&e).unwrap().sqrt()
                    })
                    .collect(),
            )
        })
        .collect();
    let lx: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let ly: Vec<f64> = meds.iter().map(|m| m.ln()).collect();
    let (mx, my) = (lx.iter().sum::<f64>() / 3.0, ly.iter().sum::<f64>() / 3.0);
    let slope = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / lx.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();
    let decreasing = meds.windows(2).all(|w| w[1] < w[0]);
    check(
        decreasing && (-0.75..=-0.25).contains(&slope),
        format!(
            "median distances {:.4e}, {:.4e}, {:.4e} for N=100/400/1600; log-log slope {slope:.3} (want [-0.75, -0.25])",
            meds[0], meds[1], meds[2]
        ),
    )
}

fn c6_reduce() -> Outcome {
    let kernel = KernelSpec::gaussian(0.5).unwrap();
    let pts = UncertaintySpec::gaussian(vec![0.0, 0.0], Matrix::identity(2))
        .unwrap()
        .sample(50, RngSeed(77))
        .unwrap();
    let full = Expansion::uniform(kernel, pts).unwrap();
    let whole = reduce(&full, 50, Ridge::Fixed(0.0), RngSeed(0)).unwrap();
    let exact = rkhs_dist_sq(&whole, &full).unwrap();
    let meds: Vec<f64> = [5usize, 10, 25, 50]
        .iter()
        .map(|&m| {
            median(
                (0..20u64)
                    .map(|s| rkhs_dist_sq(&reduce(&full, m, Ridge::Auto, RngSeed(s)).unwrap(), &full).unwrap())
                    .collect(),
            )
        })
        .collect();
    let monotone = meds.windows(2).all(|w| w[1] <= w[0]);
    check(
        exact <= 1e-10 && monotone,
        format!(
            "full-size residual {exact:.2e} (tol 1e-10); median residuals {:.2e}, {:.2e}, {:.2e}, {:.2e} for N_R=5/10/25/50",
            meds[0], meds[1], meds[2], meds[3]
        ),
    )
}

fn c7_reduced_vs_direct() -> Outcome {
    let cfg = ReducedPropConfig::default();
    let r = run_reduced_prop(&cfg).map_err(|e| e.to_string())?;
    let d = r.summary_for("direct", 10).unwrap();
    let red = r.summary_for("reduced", 10).unwrap();
    check(
        red.mean <= d.mean && red.std <= 2.0 * d.std,
        format!(
            "size 10, {} seeds: reduced mean {:.4e} std {:.4e}; direct mean {:.4e} std {:.4e}",
            cfg.repetitions, red.mean, red.std, d.mean, d.std
        ),
    )
}

fn c8_ode_gmm() -> Outcome {
    let base = OdeGmmConfig {
        n: 10_000,
        write_ensembles: false,
        ..Default::default()
    };
    let mut bandwidths: Vec<f64> = base
        .kernels
        .iter()
        .filter_map(|k| match k {
            KernelSpec::Gaussian { bandwidth } => Some(*bandwidth),
            _ => None,
        })
        .collect();
    bandwidths.sort_by(f64::total_cmp);
    let (mid, large) = (bandwidths[bandwidths.len() / 2], *bandwidths.last().unwrap());

    let poly = run_ode_gmm(&OdeGmmConfig {
        kernels: vec![KernelSpec::polynomial(1).unwrap(), KernelSpec::polynomial(3).unwrap()],
        ..base.clone()
    })
    .map_err(|e| e.to_string())?;
    let curve = |label: &str| -> Vec<(f64, f64)> {
        poly.distances.iter().filter(|d| d.kernel == label).map(|d| (d.time, d.value)).collect()
    };
    let (p1, p3) = (curve("polynomial(1)"), curve("polynomial(3)"));
    let after: Vec<(f64, f64, f64)> = p1
        .iter()
        .zip(&p3)
        .filter(|(a, _)| a.0 >= 1.0 - 1e-9)
        .map(|(a, b)| (a.0, a.1, b.1))
        .collect();
    let below = !after.is_empty() && after.iter().all(|(_, a, b)| a < b);
    let min_gap = after.iter().map(|(_, a, b)| b - a).fold(f64::INFINITY, f64::min);

    let steps = ((base.t_end - base.t0) / base.step).round() as usize;
    let gauss = run_ode_gmm(&OdeGmmConfig {
        kernels: vec![KernelSpec::gaussian(mid).unwrap(), KernelSpec::gaussian(large).unwrap()],
        output_every: steps,
        ..base.clone()
    })
    .map_err(|e| e.to_string())?;
    let at_end = |bw: f64| {
        let label = KernelSpec::gaussian(bw).unwrap().to_string();
        gauss
            .distances
            .iter()
            .filter(|d| d.kernel == label && (d.time - base.t_end).abs() < 1e-9)
            .map(|d| d.value)
            .next()
            .unwrap()
    };
    let (d_mid, d_large) = (at_end(mid), at_end(large));
    check(
        below && d_large < d_mid,
        format!(
            "N=1e4: polynomial(1) < polynomial(3) at all {} times t>=1 (min gap {min_gap:.3e}); at t={} gaussian({large}) {d_large:.4e} < gaussian({mid}) {d_mid:.4e}",
            after.len(),
            base.t_end
        ),
    )
}

fn c9_arx() -> Outcome {
    let mut wins = 0;
    let mut parts = Vec::new();
    for s in 0..5u64 {
        let cfg = ArxFitConfig {
            seed: RngSeed(42 + s),
            baseline: false,
            ..Default::default()
        };
        let r = run_arx_fit(&cfg).map_err(|e| e.to_string())?;
        if r.mean_pve < r.mean_lsq {
            wins += 1;
        }
        parts.push(format!("{:.3}/{:.3}", r.mean_pve, r.mean_lsq));
    }
    check(
        wins >= 3,
        format!("600 steps, PVE < LSQ in {wins}/5 seeds (time-averaged pve/lsq: {})", parts.join(", ")),
    )
}

fn csv_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

fn c10_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path();
    let configs = [
        ScenarioConfig::OdeGmm(OdeGmmConfig::default()),
        ScenarioConfig::ArxFit(ArxFitConfig {
            write_ensembles: true,
            ..Default::default()
        }),
        ScenarioConfig::ReducedProp(ReducedPropConfig::default()),
        ScenarioConfig::Propagate(PropagateConfig::default()),
        ScenarioConfig::Propagate(PropagateConfig {
            system: SystemConfig::Arx2 {
                a1: 0.5,
                input: Default::default(),
                steps: 50,
                noise: kmedyn::NoiseProcess::new(kmedyn_cli::config::default_arx_truth()),
            },
            x0: vec![0.0, 0.0],
            algorithm: kmedyn_cli::config::Algorithm::Reduced,
            ..Default::default()
        }),
    ];
    let mut files = 0;
    for (i, mut cfg) in configs.into_iter().enumerate() {
        let first = root.join(format!("{i}a"));
        *cfg.out_mut() = first.clone();
        kmedyn_cli::run(&cfg).map_err(|e| format!("{}: {e:#}", cfg.name()))?;
        let mut replay = ScenarioConfig::load(&first.join("manifest.json")).map_err(|e| format!("{e:#}"))?;
        let second = root.join(format!("{i}b"));
        *replay.out_mut() = second.clone();
        kmedyn_cli::run(&replay).map_err(|e| format!("{}: {e:#}", cfg.name()))?;
        let (a, b) = (csv_bytes(&first), csv_bytes(&second));
        if a.is_empty() || a != b {
            return Err(format!("{} outputs differ on replay", cfg.name()));
        }
        files += a.len();
    }
    Ok(format!("5 scenario runs replayed from manifest.json; {files} CSV files byte-identical"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("MMD oracle equivalence", c1_mmd_oracle),
        ("Gram PSD", c2_gram_psd),
        ("Moment capture", c3_moment_capture),
        ("Integrator order", c4_integrator_order),
        ("Propagation consistency trend", c5_consistency),
        ("Reduce exactness", c6_reduce),
        ("Reduced-set vs direct (random walk)", c7_reduced_vs_direct),
        ("Mixture vs moment-matched Gaussian (linear ODE)", c8_ode_gmm),
        ("ARX goodness of fit ordering", c9_arx),
        ("Determinism", c10_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS [{}] {name}: {d} ({secs:.1}s)", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL [{}] {name}: {d} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
