//! Time steppers: random- and fixed-step Euler for the discontinuous system,
//! plus adaptive explicit (Dormand–Prince 5(4)) and linearly implicit
//! (Rosenbrock 2(3)) solvers for smooth fields.

mod euler;
mod rk;
mod rosenbrock;

pub use euler::{euler_fixed, euler_random, euler_stream, EulerStep, StepControl};
pub use rk::rk_adaptive;
pub use rosenbrock::stiff_adaptive;

use serde::{Deserialize, Serialize};

use crate::error::{PwsError, Result};
use crate::model::{region_from_values, PwsSystem, RegionId};
use crate::regularization::{regularized_field, regularized_jacobian, RegularizationParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Reference stepsize; random Euler draws steps from `[tau, 2 tau]`.
    pub tau: f64,
    pub seed: u64,
    /// Final time (integration starts at 0).
    pub horizon: f64,
    /// Surface-landing perturbation, relative to `max(1, |x|)`.
    pub delta_scale: f64,
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            tau: 1e-4,
            seed: 0,
            horizon: 1.0,
            delta_scale: f64::EPSILON,
            rtol: 1e-6,
            atol: 1e-9,
            max_steps: 50_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn euler(tau: f64, horizon: f64, seed: u64) -> Self {
        Self { tau, horizon, seed, ..Self::default() }
    }

    pub fn adaptive(rtol: f64, atol: f64, horizon: f64) -> Self {
        Self { rtol, atol, horizon, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tau", self.tau),
            ("horizon", self.horizon),
            ("rtol", self.rtol),
            ("atol", self.atol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PwsError::InvalidParameter(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.delta_scale >= 0.0 && self.delta_scale.is_finite()) {
            return Err(PwsError::InvalidParameter(format!("delta_scale must be non-negative, got {}", self.delta_scale)));
        }
        if self.max_steps == 0 {
            return Err(PwsError::InvalidParameter("max_steps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Sampled solution: times, flat states, the region of every stored state and
/// the surface monitors `h1`, `h2`, `|(h1, h2)|`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub dim: usize,
    pub times: Vec<f64>,
    pub states: Vec<f64>,
    pub regions: Vec<RegionId>,
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub hnorm: Vec<f64>,
    /// Derivatives at the stored states, when the producer supplies them
    /// (adaptive solvers); enables Hermite interpolation.
    pub derivatives: Option<Vec<f64>>,
    /// Set when `max_steps` stopped the run before the horizon.
    pub truncated: bool,
}

impl Trajectory {
    pub fn new(dim: usize) -> Self {
        Self { dim, ..Self::default() }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn component(&self, i: usize) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().skip(i).step_by(self.dim).copied()
    }

    pub fn push(&mut self, t: f64, x: &[f64], region: RegionId, (h1, h2): (f64, f64)) {
        debug_assert_eq!(x.len(), self.dim);
        self.times.push(t);
        self.states.extend_from_slice(x);
        self.regions.push(region);
        self.h1.push(h1);
        self.h2.push(h2);
        self.hnorm.push(h1.hypot(h2));
    }

    fn push_derivative(&mut self, dx: &[f64]) {
        self.derivatives.get_or_insert_with(Vec::new).extend_from_slice(dx);
    }

    /// State at time `t` inside the sampled range: cubic Hermite when
    /// derivatives are stored, linear otherwise.
    pub fn interpolate(&self, t: f64, out: &mut [f64]) -> Result<()> {
        let (t0, t1) = match (self.times.first(), self.times.last()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => return Err(PwsError::InvalidInput("empty trajectory".into())),
        };
        if !(t >= t0 && t <= t1) {
            return Err(PwsError::InvalidInput(format!("time {t} outside [{t0}, {t1}]")));
        }
        let k = match self.times.partition_point(|&s| s <= t) {
            0 => 0,
            p if p >= self.len() => self.len().saturating_sub(2),
            p => p - 1,
        };
        if self.len() == 1 {
            out.copy_from_slice(self.state(0));
            return Ok(());
        }
        let (ta, tb) = (self.times[k], self.times[k + 1]);
        let h = tb - ta;
        let s = (t - ta) / h;
        let (xa, xb) = (self.state(k), self.state(k + 1));
        match &self.derivatives {
            Some(d) => {
                let (da, db) = (&d[k * self.dim..(k + 1) * self.dim], &d[(k + 1) * self.dim..(k + 2) * self.dim]);
                let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
                let h10 = s * (1.0 - s) * (1.0 - s);
                let h01 = s * s * (3.0 - 2.0 * s);
                let h11 = s * s * (s - 1.0);
                for i in 0..self.dim {
                    out[i] = h00 * xa[i] + h10 * h * da[i] + h01 * xb[i] + h11 * h * db[i];
                }
            }
            None => {
                for i in 0..self.dim {
                    out[i] = xa[i] + s * (xb[i] - xa[i]);
                }
            }
        }
        Ok(())
    }
}

/// A smooth right-hand side for the adaptive solvers, with the surface
/// monitors used to label the stored states.
pub trait SmoothField: Sync {
    fn dim(&self) -> usize;

    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]);

    /// Analytic Jacobian `∂f/∂x`; returns false when not available.
    fn jacobian(&self, _t: f64, _x: &[f64], _jac: &mut [Vec<f64>]) -> bool {
        false
    }

    /// `(h1, h2)` at `x`; canonical coordinates by default.
    fn surfaces(&self, x: &[f64]) -> (f64, f64) {
        (x[0], x.get(1).copied().unwrap_or(0.0))
    }
}

/// Closure-backed field.
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(f64, &[f64], &mut [f64]) + Sync> FnField<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(f64, &[f64], &mut [f64]) + Sync> SmoothField for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.f)(t, x, out)
    }
}

/// The regularized field of a canonical system.
pub struct RegularizedField<'a> {
    sys: &'a PwsSystem,
    params: RegularizationParams,
}

impl<'a> RegularizedField<'a> {
    pub fn new(sys: &'a PwsSystem, params: RegularizationParams) -> Result<Self> {
        if !sys.is_canonical() {
            return Err(PwsError::UnsupportedGeometry);
        }
        Ok(Self { sys, params })
    }
}

impl SmoothField for RegularizedField<'_> {
    fn dim(&self) -> usize {
        self.sys.dim()
    }

    fn eval(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        regularized_field(self.sys, &self.params, x, out).expect("canonical geometry checked at construction");
    }

    fn jacobian(&self, _t: f64, x: &[f64], jac: &mut [Vec<f64>]) -> bool {
        regularized_jacobian(self.sys, &self.params, x, jac).is_ok()
    }

    fn surfaces(&self, x: &[f64]) -> (f64, f64) {
        self.sys.surface_values(x)
    }
}

/// The discontinuous field evaluated as if it were smooth: the region is
/// re-read at every evaluation. Demonstrates why adaptive solvers misbehave
/// on the unregularized system; not a reliable integrator.
pub struct NaiveField<'a> {
    sys: &'a PwsSystem,
}

impl<'a> NaiveField<'a> {
    pub fn new(sys: &'a PwsSystem) -> Self {
        Self { sys }
    }
}

impl SmoothField for NaiveField<'_> {
    fn dim(&self) -> usize {
        self.sys.dim()
    }

    fn eval(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        let (h1, h2) = self.sys.surface_values(x);
        let j = 2 * usize::from(h1 > 0.0) + usize::from(h2 > 0.0);
        self.sys.eval_field(j, x, out);
    }

    fn surfaces(&self, x: &[f64]) -> (f64, f64) {
        self.sys.surface_values(x)
    }
}

pub(crate) fn push_smooth<F: SmoothField + ?Sized>(traj: &mut Trajectory, field: &F, t: f64, x: &[f64], dx: &[f64]) {
    let h = field.surfaces(x);
    traj.push(t, x, region_from_values(h.0, h.1, 0.0), h);
    traj.push_derivative(dx);
}

pub(crate) fn check_initial(x0: &[f64], dim: usize) -> Result<()> {
    if x0.len() != dim {
        return Err(PwsError::InvalidInput(format!("initial state has length {}, expected {dim}", x0.len())));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(PwsError::InvalidInput("initial state is not finite".into()));
    }
    Ok(())
}

/// Weighted max norm on `atol + rtol max(|y0|, |y1|)`; NaN propagates.
pub(crate) fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], rtol: f64, atol: f64) -> f64 {
    err.iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| e.abs() / (atol + rtol * a.abs().max(b.abs())))
        .fold(0.0, |m, v| if v.is_nan() || m.is_nan() { f64::NAN } else { m.max(v) })
}

/// Initial step guess from the size of the solution and its derivative.
pub(crate) fn initial_step(y: &[f64], dy: &[f64], rtol: f64, atol: f64, horizon: f64, order: i32) -> f64 {
    let d0 = y.iter().map(|v| (v / (atol + rtol * v.abs())).powi(2)).sum::<f64>().sqrt();
    let d1 = y.iter().zip(dy).map(|(v, d)| (d / (atol + rtol * v.abs())).powi(2)).sum::<f64>().sqrt();
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let rough = (0.01f64).powf(1.0 / order as f64) * horizon;
    h.min(rough).min(horizon).max(1e-12 * horizon)
}
