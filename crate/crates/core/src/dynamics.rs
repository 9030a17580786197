//! System models and their evolution for one fixed uncertainty realization.
//!
//! Continuous-time models are integrated with fixed-step Euler or classical RK4
//! on the grid `t0 + i·h`; discrete-time models are iterated for a horizon of
//! `T` steps with one noise value per step.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::{PointSet, StatePoint};
use crate::scalar::{norm, Scalar};
use crate::uncertainty::{NoiseProcess, UncertaintySpec};

/// States with norm above this abort integration.
pub const BLOW_UP_NORM: f64 = 1e12;

/// `dx/dt = f(t, x, ξ)`.
pub type Rhs<T> = Arc<dyn Fn(T, &[T], &[T]) -> Vec<T> + Send + Sync>;

/// `x⁺ = f(step, x, ξ_step)`.
pub type StepMap<T> = Arc<dyn Fn(usize, &[T], &[T]) -> Vec<T> + Send + Sync>;

/// Exogenous input `u_k`.
pub type Input<T> = Arc<dyn Fn(usize) -> T + Send + Sync>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Euler,
    #[default]
    Rk4,
}

impl Method {
    pub fn order(self) -> u32 {
        match self {
            Method::Euler => 1,
            Method::Rk4 => 4,
        }
    }
}

#[derive(Clone)]
pub struct ContinuousSystem<T: Scalar = f64> {
    rhs: Rhs<T>,
    t0: T,
    t_end: T,
    step: T,
    steps: usize,
    method: Method,
}

impl<T: Scalar> fmt::Debug for ContinuousSystem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ContinuousSystem")
            .field("t0", &self.t0)
            .field("t_end", &self.t_end)
            .field("step", &self.step)
            .field("method", &self.method)
            .finish_non_exhaustive()
    }
}

fn check_state<T: Scalar>(x: &[T], dim: usize, time: T) -> Result<()> {
    if x.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) || norm(x) > T::c(BLOW_UP_NORM) {
        return Err(Error::BlowUp { time: time.as_f64() });
    }
    Ok(())
}

impl<T: Scalar> ContinuousSystem<T> {
    /// `(t_end − t0) / h` must be a positive integer (up to 1e-9 relative).
    pub fn new(rhs: Rhs<T>, t0: T, t_end: T, step: T, method: Method) -> Result<Self> {
        if !(step > T::zero()) || !step.is_finite() {
            return Err(Error::InvalidSystem(format!("step {step} must be positive")));
        }
        if !t0.is_finite() || !t_end.is_finite() || !(t_end > t0) {
            return Err(Error::InvalidSystem(format!("need t0 < t_end, got [{t0}, {t_end}]")));
        }
        let ratio = ((t_end - t0) / step).as_f64();
        let steps = ratio.round();
        if steps < 1.0 || (ratio - steps).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::InvalidSystem(format!(
                "span {} is not an integer multiple of step {step}",
                t_end - t0
            )));
        }
        Ok(Self {
            rhs,
            t0,
            t_end,
            step,
            steps: steps as usize,
            method,
        })
    }

    pub fn t0(&self) -> T {
        self.t0
    }

    pub fn t_end(&self) -> T {
        self.t_end
    }

    pub fn step(&self) -> T {
        self.step
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// Grid `t0 + i·h`, `i = 0..=steps`.
    pub fn times(&self) -> Vec<T> {
        (0..=self.steps)
            .map(|i| self.t0 + T::from_usize_lossy(i) * self.step)
            .collect()
    }

    fn eval(&self, t: T, x: &[T], xi: &[T]) -> Result<Vec<T>> {
        let dx = (self.rhs)(t, x, xi);
        if dx.len() != x.len() {
            return Err(Error::InvalidSystem(format!(
                "right-hand side returned {} components for a {}-dimensional state",
                dx.len(),
                x.len()
            )));
        }
        if dx.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { time: t.as_f64() });
        }
        Ok(dx)
    }

    fn advance(&self, t: T, x: &[T], xi: &[T]) -> Result<Vec<T>> {
        let h = self.step;
        match self.method {
            Method::Euler => {
                let k1 = self.eval(t, x, xi)?;
                Ok(x.iter().zip(&k1).map(|(&a, &k)| a + h * k).collect())
            }
            Method::Rk4 => {
                let half = h / T::c(2.0);
                let shift = |k: &[T], s: T| -> Vec<T> { x.iter().zip(k).map(|(&a, &b)| a + s * b).collect() };
                let k1 = self.eval(t, x, xi)?;
                let k2 = self.eval(t + half, &shift(&k1, half), xi)?;
                let k3 = self.eval(t + half, &shift(&k2, half), xi)?;
                let k4 = self.eval(t + h, &shift(&k3, h), xi)?;
                let sixth = h / T::c(6.0);
                Ok((0..x.len())
                    .map(|i| x[i] + sixth * (k1[i] + T::c(2.0) * (k2[i] + k3[i]) + k4[i]))
                    .collect())
            }
        }
    }

    /// Flat trajectory: `(steps + 1) × dim` values, appended to `out`.
    pub fn integrate_flat(&self, x0: &[T], xi: &[T], out: &mut Vec<T>) -> Result<()> {
        let dim = x0.len();
        check_state(x0, dim, self.t0)?;
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter"));
        }
        out.extend_from_slice(x0);
        let mut x = x0.to_vec();
        for i in 0..self.steps {
            let t = self.t0 + T::from_usize_lossy(i) * self.step;
            x = self.advance(t, &x, xi)?;
            check_state(&x, dim, self.t0 + T::from_usize_lossy(i + 1) * self.step)?;
            out.extend_from_slice(&x);
        }
        Ok(())
    }

    /// Fixed-step trajectory for parameter `xi`, including the initial state.
    pub fn integrate(&self, x0: &StatePoint<T>, xi: &StatePoint<T>) -> Result<Vec<(T, StatePoint<T>)>> {
        let mut flat = Vec::with_capacity((self.steps + 1) * x0.dim());
        self.integrate_flat(x0.as_slice(), xi.as_slice(), &mut flat)?;
        let pts = PointSet::new(x0.dim(), flat)?.to_points();
        Ok(self.times().into_iter().zip(pts).collect())
    }
}

#[derive(Clone)]
pub struct DiscreteSystem<T: Scalar = f64> {
    map: StepMap<T>,
    horizon: usize,
    noise: NoiseProcess<T>,
}

impl<T: Scalar> fmt::Debug for DiscreteSystem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiscreteSystem")
            .field("horizon", &self.horizon)
            .field("noise", &self.noise)
            .finish_non_exhaustive()
    }
}

impl<T: Scalar> DiscreteSystem<T> {
    pub fn new(map: StepMap<T>, horizon: usize, noise: NoiseProcess<T>) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidSystem("horizon must be >= 1".into()));
        }
        noise.validate()?;
        Ok(Self { map, horizon, noise })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn noise(&self) -> &NoiseProcess<T> {
        &self.noise
    }

    pub fn with_noise(mut self, noise: NoiseProcess<T>) -> Result<Self> {
        noise.validate()?;
        self.noise = noise;
        Ok(self)
    }

    pub fn with_horizon(mut self, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidSystem("horizon must be >= 1".into()));
        }
        self.horizon = horizon;
        Ok(self)
    }

    /// One application of the map with state checks.
    pub fn apply(&self, step: usize, x: &[T], xi: &[T]) -> Result<Vec<T>> {
        let next = (self.map)(step, x, xi);
        check_state(&next, x.len(), T::from_usize_lossy(step + 1))?;
        Ok(next)
    }

    /// Flat states `x_0..=x_T` appended to `out`; `noise` row `t` drives step `t`.
    pub fn iterate_flat(&self, x0: &[T], noise: &PointSet<T>, out: &mut Vec<T>) -> Result<()> {
        if noise.len() != self.horizon {
            return Err(Error::DimensionMismatch {
                expected: self.horizon,
                found: noise.len(),
            });
        }
        check_state(x0, x0.len(), T::zero())?;
        out.extend_from_slice(x0);
        let mut x = x0.to_vec();
        for (t, xi) in noise.rows().enumerate() {
            x = self.apply(t, &x, xi)?;
            out.extend_from_slice(&x);
        }
        Ok(())
    }

    /// `x_{t+1} = f(t, x_t, w_t)` over the horizon, including `x_0`.
    pub fn iterate(&self, x0: &StatePoint<T>, noise_path: &[StatePoint<T>]) -> Result<Vec<(usize, StatePoint<T>)>> {
        if noise_path.len() != self.horizon {
            return Err(Error::DimensionMismatch {
                expected: self.horizon,
                found: noise_path.len(),
            });
        }
        let noise = PointSet::from_points(noise_path)?;
        let mut flat = Vec::with_capacity((self.horizon + 1) * x0.dim());
        self.iterate_flat(x0.as_slice(), &noise, &mut flat)?;
        Ok(PointSet::new(x0.dim(), flat)?.to_points().into_iter().enumerate().collect())
    }

    pub fn times(&self) -> Vec<T> {
        (0..=self.horizon).map(T::from_usize_lossy).collect()
    }
}

#[derive(Clone, Debug)]
pub enum SystemModel<T: Scalar = f64> {
    Continuous(ContinuousSystem<T>),
    Discrete(DiscreteSystem<T>),
}

impl<T: Scalar> From<ContinuousSystem<T>> for SystemModel<T> {
    fn from(s: ContinuousSystem<T>) -> Self {
        SystemModel::Continuous(s)
    }
}

impl<T: Scalar> From<DiscreteSystem<T>> for SystemModel<T> {
    fn from(s: DiscreteSystem<T>) -> Self {
        SystemModel::Discrete(s)
    }
}

/// Per-time slices of state samples, one row per realization.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryEnsemble<T: Scalar = f64> {
    times: Vec<T>,
    slices: Vec<PointSet<T>>,
    weights: Option<Vec<T>>,
}

impl<T: Scalar> TrajectoryEnsemble<T> {
    pub fn new(times: Vec<T>, slices: Vec<PointSet<T>>, weights: Option<Vec<T>>) -> Result<Self> {
        if times.is_empty() || times.len() != slices.len() {
            return Err(Error::InvalidArgument(format!(
                "{} times for {} slices",
                times.len(),
                slices.len()
            )));
        }
        let n = slices[0].len();
        if n == 0 {
            return Err(Error::Empty("ensemble slice"));
        }
        let dim = slices[0].dim();
        for s in &slices {
            if s.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: s.len(),
                });
            }
            if s.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: s.dim(),
                });
            }
        }
        if let Some(w) = &weights {
            if w.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: w.len(),
                });
            }
        }
        Ok(Self { times, slices, weights })
    }

    /// Builds slices from per-realization flat trajectories (`times.len() × dim` each).
    pub fn from_trajectories(times: Vec<T>, dim: usize, trajectories: &[Vec<T>], weights: Option<Vec<T>>) -> Result<Self> {
        let mut slices: Vec<PointSet<T>> = (0..times.len())
            .map(|_| PointSet::with_capacity(dim, trajectories.len()))
            .collect();
        for traj in trajectories {
            if traj.len() != times.len() * dim {
                return Err(Error::DimensionMismatch {
                    expected: times.len() * dim,
                    found: traj.len(),
                });
            }
            for (t, slice) in slices.iter_mut().enumerate() {
                slice.push(&traj[t * dim..(t + 1) * dim]);
            }
        }
        Self::new(times, slices, weights)
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn slice(&self, t: usize) -> &PointSet<T> {
        &self.slices[t]
    }

    pub fn slices(&self) -> &[PointSet<T>] {
        &self.slices
    }

    pub fn weights(&self) -> Option<&[T]> {
        self.weights.as_deref()
    }

    pub fn realizations(&self) -> usize {
        self.slices[0].len()
    }

    pub fn dim(&self) -> usize {
        self.slices[0].dim()
    }

    /// Keeps every `stride`-th time, always including the last one.
    pub fn every(&self, stride: usize) -> Self {
        let stride = stride.max(1);
        let last = self.times.len() - 1;
        let keep: Vec<usize> = (0..=last).filter(|i| i % stride == 0 || *i == last).collect();
        Self {
            times: keep.iter().map(|&i| self.times[i]).collect(),
            slices: keep.iter().map(|&i| self.slices[i].clone()).collect(),
            weights: self.weights.clone(),
        }
    }

    /// Writes `time,realization,x0,..` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "time,realization")?;
        for k in 0..self.dim() {
            write!(out, ",x{k}")?;
        }
        writeln!(out)?;
        for (t, slice) in self.times.iter().zip(&self.slices) {
            for (i, r) in slice.rows().enumerate() {
                write!(out, "{t},{i}")?;
                for v in r {
                    write!(out, ",{v}")?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }
}

/// `dx/dt = ξ x` with a scalar parameter ξ (applied to every state component).
pub fn linear_ode<T: Scalar>(t0: T, t_end: T, step: T, method: Method) -> Result<ContinuousSystem<T>> {
    let rhs: Rhs<T> = Arc::new(|_t, x, xi| x.iter().map(|&v| xi[0] * v).collect());
    ContinuousSystem::new(rhs, t0, t_end, step, method)
}

/// `u_k = amplitude · sin(frequency · k)`.
pub fn sine_input<T: Scalar>(amplitude: T, frequency: T) -> Input<T> {
    Arc::new(move |k| amplitude * (frequency * T::from_usize_lossy(k)).sin())
}

/// Second-order ARX model `y_k = a¹ y_{k−1} + a² y_{k−2} + b¹ u_{k−1}`.
///
/// The state is `(y_k, y_{k−1})`; the per-step parameter is `w = (a², b¹)`. The
/// returned system draws `w` from a point law at `w`; swap in a random law with
/// [`DiscreteSystem::with_noise`] to make the parameters uncertain.
pub fn builtin_arx<T: Scalar>(a1: T, w: [T; 2], input: Input<T>, horizon: usize) -> Result<DiscreteSystem<T>> {
    let map: StepMap<T> = Arc::new(move |k, x, w| {
        let y = a1 * x[0] + w[0] * x[1] + w[1] * input(k);
        vec![y, x[0]]
    });
    DiscreteSystem::new(map, horizon, NoiseProcess::new(UncertaintySpec::point(w.to_vec())?))
}

/// Spectral radius of the ARX companion matrix `[[a¹, a²], [1, 0]]`.
pub fn arx_spectral_radius<T: Scalar>(a1: T, a2: T) -> T {
    let disc = a1 * a1 + T::c(4.0) * a2;
    if disc >= T::zero() {
        let s = disc.sqrt();
        ((a1 + s) / T::c(2.0)).abs().max(((a1 - s) / T::c(2.0)).abs())
    } else {
        (-a2).sqrt()
    }
}

/// `x(t+1) = x(t) + w(t)`, `w(t) ~ Uniform(−half_width, half_width) + drift · t`.
pub fn random_walk_drift<T: Scalar>(horizon: usize, half_width: T, drift: T) -> Result<DiscreteSystem<T>> {
    let noise = NoiseProcess::new(UncertaintySpec::uniform_box(vec![-half_width], vec![half_width])?)
        .with_drift(vec![drift])?;
    random_walk(horizon, noise)
}

/// `x(t+1) = x(t) + w(t)` for an arbitrary noise process of the state dimension.
pub fn random_walk<T: Scalar>(horizon: usize, noise: NoiseProcess<T>) -> Result<DiscreteSystem<T>> {
    let map: StepMap<T> = Arc::new(|_k, x, w| x.iter().zip(w).map(|(&a, &b)| a + b).collect());
    DiscreteSystem::new(map, horizon, noise)
}
