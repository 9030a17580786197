//! Scenario configuration. Every field has a default; a JSON file only needs
//! the fields it changes. The resolved value is echoed to `manifest.json`.

use std::path::PathBuf;

use anyhow::{bail, ensure, Context, Result};
use kmedyn::{
    arx_spectral_radius, builtin_arx, linear_ode, random_walk, sine_input, Cadence, KernelSpec, Matrix, Method,
    NoiseProcess, ReducedSetConfig, RngSeed, Selection, SystemModel, UncertaintySpec,
};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "snake_case")]
pub enum ScenarioConfig {
    OdeGmm(OdeGmmConfig),
    ArxFit(ArxFitConfig),
    ReducedProp(ReducedPropConfig),
    Propagate(PropagateConfig),
}

impl ScenarioConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioConfig::OdeGmm(_) => "ode_gmm",
            ScenarioConfig::ArxFit(_) => "arx_fit",
            ScenarioConfig::ReducedProp(_) => "reduced_prop",
            ScenarioConfig::Propagate(_) => "propagate",
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text).context("invalid scenario config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ScenarioConfig::OdeGmm(c) => c.validate(),
            ScenarioConfig::ArxFit(c) => c.validate(),
            ScenarioConfig::ReducedProp(c) => c.validate(),
            ScenarioConfig::Propagate(c) => c.validate(),
        }
    }

    pub fn seed_mut(&mut self) -> &mut RngSeed {
        match self {
            ScenarioConfig::OdeGmm(c) => &mut c.seed,
            ScenarioConfig::ArxFit(c) => &mut c.seed,
            ScenarioConfig::ReducedProp(c) => &mut c.seed,
            ScenarioConfig::Propagate(c) => &mut c.seed,
        }
    }

    pub fn out_mut(&mut self) -> &mut PathBuf {
        match self {
            ScenarioConfig::OdeGmm(c) => &mut c.out,
            ScenarioConfig::ArxFit(c) => &mut c.out,
            ScenarioConfig::ReducedProp(c) => &mut c.out,
            ScenarioConfig::Propagate(c) => &mut c.out,
        }
    }

    pub fn out(&self) -> &std::path::Path {
        match self {
            ScenarioConfig::OdeGmm(c) => &c.out,
            ScenarioConfig::ArxFit(c) => &c.out,
            ScenarioConfig::ReducedProp(c) => &c.out,
            ScenarioConfig::Propagate(c) => &c.out,
        }
    }
}

/// Uncertain linear ODE `ẋ = ξx` with a mixture parameter law against its
/// moment-matched Gaussian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdeGmmConfig {
    pub seed: RngSeed,
    pub out: PathBuf,
    /// Realizations per ensemble.
    pub n: usize,
    pub x0: f64,
    pub t0: f64,
    pub t_end: f64,
    pub step: f64,
    pub method: Method,
    /// Must be a scalar GMM; the comparison law is its moment-matched Gaussian.
    pub parameter_law: UncertaintySpec,
    pub kernels: Vec<KernelSpec>,
    /// Keep every k-th time slice in ensembles and distance curves.
    pub output_every: usize,
    pub write_ensembles: bool,
    pub histogram_bins: usize,
}

impl Default for OdeGmmConfig {
    fn default() -> Self {
        let mut kernels: Vec<KernelSpec> = (1..=4).map(|p| KernelSpec::polynomial(p).unwrap()).collect();
        kernels.extend([0.1, 1.0, 10.0].map(|s| KernelSpec::gaussian(s).unwrap()));
        Self {
            seed: RngSeed::default(),
            out: PathBuf::from("out/ode_gmm"),
            n: 500,
            x0: 1.0,
            t0: 0.0,
            t_end: 3.0,
            step: 0.01,
            method: Method::Euler,
            parameter_law: UncertaintySpec::scalar_gmm(&[(0.7, -0.6, 0.25), (0.3, 1.0, 0.35)]).unwrap(),
            kernels,
            output_every: 1,
            write_ensembles: true,
            histogram_bins: 50,
        }
    }
}

impl OdeGmmConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.n >= 1, "n must be >= 1");
        ensure!(self.output_every >= 1, "output_every must be >= 1");
        ensure!(self.histogram_bins >= 1, "histogram_bins must be >= 1");
        ensure!(!self.kernels.is_empty(), "at least one kernel is required");
        ensure!(self.x0.is_finite(), "x0 must be finite");
        for k in &self.kernels {
            k.validate()?;
        }
        ensure!(
            matches!(self.parameter_law, UncertaintySpec::Gmm { .. }) && self.parameter_law.dim() == 1,
            "parameter_law must be a one-dimensional gmm"
        );
        linear_ode(self.t0, self.t_end, self.step, self.method)?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SineInput {
    pub amplitude: f64,
    pub frequency: f64,
}

impl Default for SineInput {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            frequency: 0.1,
        }
    }
}

pub fn default_arx_truth() -> UncertaintySpec {
    UncertaintySpec::ellipsoid(
        vec![0.2, 0.3],
        Matrix::from_rows(&[vec![0.01, 0.003], vec![0.003, 0.01]]).unwrap(),
    )
    .unwrap()
}

/// ARX goodness-of-fit: a true parameter ellipsoid against a set-membership
/// (PVE) ellipsoid estimate and a least-squares Gaussian estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArxFitConfig {
    pub seed: RngSeed,
    pub out: PathBuf,
    pub n: usize,
    pub steps: usize,
    pub a1: f64,
    /// Initial window `(y_0, y_{-1})`.
    pub x0: [f64; 2],
    pub input: SineInput,
    /// Whether `(a2, b1)` is redrawn every step or once per trajectory.
    pub cadence: Cadence,
    pub truth: UncertaintySpec,
    pub pve: UncertaintySpec,
    pub lsq: UncertaintySpec,
    pub kernel: KernelSpec,
    /// Also compare two independent runs of the true model.
    pub baseline: bool,
    pub output_every: usize,
    pub write_ensembles: bool,
}

impl Default for ArxFitConfig {
    fn default() -> Self {
        Self {
            seed: RngSeed::default(),
            out: PathBuf::from("out/arx_fit"),
            n: 500,
            steps: 600,
            a1: 0.5,
            x0: [0.0, 0.0],
            input: SineInput::default(),
            cadence: Cadence::PerStep,
            truth: default_arx_truth(),
            pve: UncertaintySpec::ellipsoid(
                vec![0.205, 0.295],
                Matrix::from_rows(&[vec![0.011, 0.0033], vec![0.0033, 0.011]]).unwrap(),
            )
            .unwrap(),
            lsq: UncertaintySpec::gaussian(
                vec![0.19, 0.31],
                Matrix::from_rows(&[vec![0.001, 0.0], vec![0.0, 0.001]]).unwrap(),
            )
            .unwrap(),
            kernel: KernelSpec::gaussian(0.1).unwrap(),
            baseline: true,
            output_every: 1,
            write_ensembles: false,
        }
    }
}

/// Points at which the ARX recursion is checked for stability: 64 boundary
/// points for an ellipsoid, corners for a box, means otherwise.
fn stability_probes(law: &UncertaintySpec) -> Vec<Vec<f64>> {
    match law {
        UncertaintySpec::Ellipsoid { center, chol, .. } => (0..64)
            .map(|k| {
                let th = std::f64::consts::TAU * k as f64 / 64.0;
                let u = chol.transform(&[th.cos(), th.sin()]);
                vec![center[0] + u[0], center[1] + u[1]]
            })
            .collect(),
        UncertaintySpec::UniformBox { lower, upper } => {
            vec![
                vec![lower[0], lower[1]],
                vec![lower[0], upper[1]],
                vec![upper[0], lower[1]],
                vec![upper[0], upper[1]],
            ]
        }
        UncertaintySpec::Gmm { components } => components.iter().map(|c| c.mean.clone()).collect(),
        other => vec![other.mean()],
    }
}

impl ArxFitConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.n >= 1 && self.steps >= 1, "n and steps must be >= 1");
        ensure!(self.output_every >= 1, "output_every must be >= 1");
        ensure!(self.a1.is_finite() && self.x0.iter().all(|v| v.is_finite()), "a1 and x0 must be finite");
        self.kernel.validate()?;
        for (name, law) in [("truth", &self.truth), ("pve", &self.pve), ("lsq", &self.lsq)] {
            ensure!(law.dim() == 2, "{name} must be a law over (a2, b1)");
            if matches!(law, UncertaintySpec::Gaussian { .. } | UncertaintySpec::Gmm { .. }) {
                log::debug!("{name} has unbounded support; stability checked at its mean only");
            }
            for p in stability_probes(law) {
                let rho = arx_spectral_radius(self.a1, p[0]);
                if rho >= 1.0 {
                    bail!("{name}: ARX recursion unstable at (a2, b1) = ({}, {}), spectral radius {rho}", p[0], p[1]);
                }
            }
        }
        Ok(())
    }

    pub fn system(&self, law: &UncertaintySpec) -> Result<SystemModel> {
        let input = sine_input(self.input.amplitude, self.input.frequency);
        let mean = law.mean();
        let sys = builtin_arx(self.a1, [mean[0], mean[1]], input, self.steps)?;
        let noise = NoiseProcess::new(law.clone()).with_cadence(self.cadence);
        Ok(sys.with_noise(noise)?.into())
    }
}

/// Random walk with drifting noise: direct sampling against recursive
/// reduced-set propagation, scored against a large-sample reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReducedPropConfig {
    pub seed: RngSeed,
    pub out: PathBuf,
    pub steps: usize,
    /// Independent runs per method and size.
    pub repetitions: usize,
    /// Representation sizes: `N_R` for the reduced method, `N` for direct sampling.
    pub sizes: Vec<usize>,
    pub noise_draws: usize,
    /// `null` selects the automatic ridge.
    pub ridge: Option<f64>,
    pub selection: Selection,
    pub reference_size: usize,
    pub kernel: KernelSpec,
    pub x0: Vec<f64>,
    pub noise: NoiseProcess,
    pub write_reduced_sets: bool,
}

impl Default for ReducedPropConfig {
    fn default() -> Self {
        Self {
            seed: RngSeed::default(),
            out: PathBuf::from("out/reduced_prop"),
            steps: 10,
            repetitions: 10,
            sizes: vec![5, 10, 20, 50],
            noise_draws: 10,
            ridge: None,
            selection: Selection::Uniform,
            reference_size: 500,
            kernel: KernelSpec::gaussian(0.5).unwrap(),
            x0: vec![0.0],
            noise: NoiseProcess::new(UncertaintySpec::uniform_box(vec![-0.5], vec![0.5]).unwrap())
                .with_drift(vec![0.1])
                .unwrap(),
            write_reduced_sets: true,
        }
    }
}

impl ReducedPropConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.steps >= 1 && self.repetitions >= 1, "steps and repetitions must be >= 1");
        ensure!(!self.sizes.is_empty(), "sizes must not be empty");
        ensure!(self.reference_size >= 1, "reference_size must be >= 1");
        self.kernel.validate()?;
        self.noise.validate()?;
        ensure!(
            self.noise.dim() == self.x0.len(),
            "noise dimension {} does not match state dimension {}",
            self.noise.dim(),
            self.x0.len()
        );
        for &s in &self.sizes {
            self.reduced(s).validate()?;
        }
        Ok(())
    }

    pub fn reduced(&self, size: usize) -> ReducedSetConfig {
        ReducedSetConfig {
            target_size: size,
            noise_draws: self.noise_draws,
            ridge: self.ridge,
            selection: self.selection,
        }
    }

    pub fn system(&self) -> Result<kmedyn::DiscreteSystem> {
        Ok(random_walk(self.steps, self.noise.clone())?)
    }
}

/// Built-in systems selectable by name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemConfig {
    LinearOde {
        #[serde(default)]
        t0: f64,
        t_end: f64,
        step: f64,
        #[serde(default)]
        method: Method,
    },
    Arx2 {
        a1: f64,
        #[serde(default)]
        input: SineInput,
        steps: usize,
        /// Law of `(a2, b1)` and its redraw cadence.
        noise: NoiseProcess,
    },
    RandomWalkDrift {
        steps: usize,
        half_width: f64,
        drift: f64,
    },
}

impl SystemConfig {
    pub fn build(&self) -> Result<SystemModel> {
        Ok(match self {
            SystemConfig::LinearOde { t0, t_end, step, method } => linear_ode(*t0, *t_end, *step, *method)?.into(),
            SystemConfig::Arx2 { a1, input, steps, noise } => {
                ensure!(noise.dim() == 2, "arx2 noise must be a law over (a2, b1)");
                let m = noise.law.mean();
                builtin_arx(*a1, [m[0], m[1]], sine_input(input.amplitude, input.frequency), *steps)?
                    .with_noise(noise.clone())?
                    .into()
            }
            SystemConfig::RandomWalkDrift { steps, half_width, drift } => {
                kmedyn::random_walk_drift(*steps, *half_width, *drift)?.into()
            }
        })
    }

    pub fn state_dim(&self) -> usize {
        match self {
            SystemConfig::LinearOde { .. } | SystemConfig::RandomWalkDrift { .. } => 1,
            SystemConfig::Arx2 { .. } => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    Direct,
    Reduced,
}

/// Generic propagation of a built-in system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagateConfig {
    pub seed: RngSeed,
    pub out: PathBuf,
    pub system: SystemConfig,
    pub x0: Vec<f64>,
    pub algorithm: Algorithm,
    /// Realizations for the direct algorithm.
    pub n: usize,
    pub reduced: ReducedSetConfig,
    /// Kernel of the reduced-set expansions.
    pub kernel: KernelSpec,
    /// Parameter law of a continuous system; for discrete systems it replaces
    /// the base law of the noise process.
    pub parameter_law: Option<UncertaintySpec>,
}

impl Default for PropagateConfig {
    fn default() -> Self {
        Self {
            seed: RngSeed::default(),
            out: PathBuf::from("out/propagate"),
            system: SystemConfig::RandomWalkDrift {
                steps: 10,
                half_width: 0.5,
                drift: 0.1,
            },
            x0: vec![0.0],
            algorithm: Algorithm::Direct,
            n: 500,
            reduced: ReducedSetConfig::new(10, 10),
            kernel: KernelSpec::gaussian(0.5).unwrap(),
            parameter_law: None,
        }
    }
}

impl PropagateConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.n >= 1, "n must be >= 1");
        ensure!(
            self.x0.len() == self.system.state_dim(),
            "x0 has {} components, system state has {}",
            self.x0.len(),
            self.system.state_dim()
        );
        self.kernel.validate()?;
        self.reduced.validate()?;
        let sys = self.system.build()?;
        match (&sys, self.algorithm) {
            (SystemModel::Continuous(_), Algorithm::Reduced) => {
                bail!("reduced-set propagation is only defined for discrete systems")
            }
            (SystemModel::Continuous(_), Algorithm::Direct) if self.parameter_law.is_none() => {
                bail!("linear_ode needs a parameter_law")
            }
            _ => {}
        }
        if let (SystemModel::Discrete(d), Some(law)) = (&sys, &self.parameter_law) {
            ensure!(law.dim() == d.noise().dim(), "parameter_law dimension does not match the system noise");
        }
        Ok(())
    }
}

/// Values given on the command line; each one replaces the config field.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub n: Option<usize>,
    pub nr: Vec<usize>,
    pub nxi: Option<usize>,
    pub ridge: Option<Option<f64>>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ScenarioConfig) -> Result<()> {
        if let Some(s) = self.seed {
            *cfg.seed_mut() = RngSeed(s);
        }
        if let Some(o) = &self.out {
            *cfg.out_mut() = o.clone();
        }
        match cfg {
            ScenarioConfig::OdeGmm(c) => {
                if let Some(n) = self.n {
                    c.n = n;
                }
            }
            ScenarioConfig::ArxFit(c) => {
                if let Some(n) = self.n {
                    c.n = n;
                }
            }
            ScenarioConfig::ReducedProp(c) => {
                if !self.nr.is_empty() {
                    c.sizes = self.nr.clone();
                }
                if let Some(v) = self.nxi {
                    c.noise_draws = v;
                }
                if let Some(r) = self.ridge {
                    c.ridge = r;
                }
            }
            ScenarioConfig::Propagate(c) => {
                if let Some(n) = self.n {
                    c.n = n;
                }
                match self.nr.as_slice() {
                    [] => {}
                    [v] => c.reduced.target_size = *v,
                    _ => bail!("--nr takes a single value for propagate"),
                }
                if let Some(v) = self.nxi {
                    c.reduced.noise_draws = v;
                }
                if let Some(r) = self.ridge {
                    c.reduced.ridge = r;
                }
            }
        }
        cfg.validate()
    }
}
