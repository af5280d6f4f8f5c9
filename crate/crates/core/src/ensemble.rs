//! Randomized-Euler ensembles: exit detection on single trajectories, exit
//! statistics over seeded ensembles, and averaging on a fixed time grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PwsError, Result};
use crate::filippov::HalfSurface;
use crate::integrate::{euler_stream, IntegratorConfig, StepControl, Trajectory};
use crate::model::{region_from_values, Preset, PwsSystem, RegionId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExitMode {
    TangentialToSurface(HalfSurface),
    NonTangentialToRegion(RegionId),
    Spiral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitEvent {
    pub exit_state: Vec<f64>,
    pub exit_index: usize,
    pub exit_time: f64,
    pub mode: ExitMode,
    pub slow_coordinate: f64,
}

/// Signed surface distance: `sign * h_surface`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monitor {
    pub surface: usize,
    pub sign: f64,
}

impl Monitor {
    /// Distance from Σ in the direction of a trajectory leaving Σ to slide on `hs`.
    pub fn leaving_onto(hs: HalfSurface) -> Self {
        Self { surface: hs.other_surface(), sign: hs.side() }
    }

    #[inline]
    pub fn value(&self, (h1, h2): (f64, f64)) -> f64 {
        self.sign * if self.surface == 0 { h1 } else { h2 }
    }
}

/// Scalar summary of the slow state reported for an exit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SlowCoordinate {
    Component(usize),
    /// `(x_i - c_i)² + (x_j - c_j)²`.
    RadiusSquared { i: usize, j: usize, center: (f64, f64) },
}

impl SlowCoordinate {
    pub fn value(&self, x: &[f64]) -> f64 {
        match *self {
            Self::Component(i) => x[i],
            Self::RadiusSquared { i, j, center } => (x[i] - center.0).powi(2) + (x[j] - center.1).powi(2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExitRule {
    Codim1 { monitor: Monitor, mode: ExitMode },
    Spiral { m_consecutive: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitSpec {
    pub rule: ExitRule,
    pub slow: SlowCoordinate,
    /// Members stop once the exit is certain: the codim-1 monitor (or `|(h1, h2)|`
    /// for spirals) exceeds `stop_factor * tau`. `None` runs to the horizon.
    pub stop_factor: Option<f64>,
}

impl ExitSpec {
    pub fn for_preset(preset: Preset) -> Self {
        let (rule, slow) = match preset {
            Preset::Tangential => (
                ExitRule::Codim1 {
                    monitor: Monitor::leaving_onto(HalfSurface::Sigma1Minus),
                    mode: ExitMode::TangentialToSurface(HalfSurface::Sigma1Minus),
                },
                SlowCoordinate::RadiusSquared { i: 2, j: 3, center: (0.0, 0.0) },
            ),
            Preset::Nontangential => (
                ExitRule::Codim1 {
                    monitor: Monitor::leaving_onto(HalfSurface::Sigma1Minus),
                    mode: ExitMode::NonTangentialToRegion(RegionId::R1),
                },
                SlowCoordinate::Component(2),
            ),
            Preset::Spiral => (ExitRule::Spiral { m_consecutive: 3 }, SlowCoordinate::Component(2)),
            Preset::Ambiguous => (
                ExitRule::Codim1 {
                    monitor: Monitor::leaving_onto(HalfSurface::Sigma2Plus),
                    mode: ExitMode::TangentialToSurface(HalfSurface::Sigma2Plus),
                },
                SlowCoordinate::RadiusSquared { i: 2, j: 3, center: (3.0, 3.0) },
            ),
        };
        Self { rule, slow, stop_factor: Some(1000.0) }
    }

    /// Integration time that carries the preset's default start past its exit locus.
    pub fn default_horizon(preset: Preset) -> f64 {
        match preset {
            Preset::Tangential => 0.5,
            Preset::Nontangential => 4.0,
            Preset::Spiral => 1.0,
            Preset::Ambiguous => 1.0,
        }
    }
}

/// Streaming form of the codim-1 rule: declared once the monitor passes `10τ`;
/// the exit index is the first step above `1.5τ` after which the monitor never
/// returns to `τ` or below.
#[derive(Debug, Clone)]
pub struct Codim1Detector {
    tau: f64,
    monitor: Monitor,
    declared: bool,
    candidate: Option<Candidate>,
}

#[derive(Debug, Clone)]
struct Candidate {
    index: usize,
    time: f64,
    state: Vec<f64>,
    next: Option<Vec<f64>>,
}

impl Codim1Detector {
    pub fn new(monitor: Monitor, tau: f64) -> Self {
        Self { tau, monitor, declared: false, candidate: None }
    }

    pub fn observe(&mut self, index: usize, t: f64, x: &[f64], h: (f64, f64)) {
        if let Some(c) = &mut self.candidate {
            if c.next.is_none() {
                c.next = Some(x.to_vec());
            }
        }
        let m = self.monitor.value(h);
        if m <= self.tau {
            self.candidate = None;
        } else if self.candidate.is_none() && m > 1.5 * self.tau {
            self.candidate = Some(Candidate { index, time: t, state: x.to_vec(), next: None });
        }
        if m > 10.0 * self.tau {
            self.declared = true;
        }
    }

    /// Whether the exit is declared and the current candidate is still standing.
    pub fn is_settled(&self) -> bool {
        self.declared && self.candidate.is_some()
    }

    pub fn finish(self, mode: ExitMode, slow: &SlowCoordinate) -> Option<ExitEvent> {
        if !self.declared {
            return None;
        }
        let c = self.candidate?;
        let exit_state = match &c.next {
            Some(next) => c.state.iter().zip(next).map(|(a, b)| 0.5 * (a + b)).collect(),
            None => c.state.clone(),
        };
        Some(ExitEvent {
            slow_coordinate: slow.value(&exit_state),
            exit_state,
            exit_index: c.index,
            exit_time: c.time,
            mode,
        })
    }
}

/// Streaming spiral rule. Each revolution contributes `|(h1, h2)|` at the last
/// step inside R4 before the trajectory moves on. The exit is the revolution
/// that starts the final strictly increasing run of recorded norms, provided
/// that run has at least `m_consecutive` increases.
#[derive(Debug, Clone)]
pub struct SpiralDetector {
    m_consecutive: usize,
    previous_region: Option<RegionId>,
    last_in_r4: Option<Candidate>,
    last_norm: f64,
    latest: f64,
    run_start: Option<(Candidate, f64)>,
    run_increases: usize,
}

impl SpiralDetector {
    pub fn new(m_consecutive: usize) -> Self {
        Self {
            m_consecutive,
            previous_region: None,
            last_in_r4: None,
            last_norm: f64::NAN,
            latest: f64::NAN,
            run_start: None,
            run_increases: 0,
        }
    }

    pub fn observe(&mut self, index: usize, t: f64, x: &[f64], region: RegionId, h: (f64, f64)) {
        if !region.is_open() {
            return;
        }
        if region == RegionId::R4 {
            self.last_in_r4 = Some(Candidate { index, time: t, state: x.to_vec(), next: None });
            self.last_norm = h.0.hypot(h.1);
        } else if self.previous_region == Some(RegionId::R4) {
            if let Some(c) = self.last_in_r4.take() {
                self.record(c, self.last_norm);
            }
        }
        self.previous_region = Some(region);
    }

    fn record(&mut self, c: Candidate, norm: f64) {
        match &self.run_start {
            Some(_) if norm > self.latest => self.run_increases += 1,
            _ => {
                self.run_start = Some((c, norm));
                self.run_increases = 0;
            }
        }
        self.latest = norm;
    }

    pub fn finish(self, slow: &SlowCoordinate) -> Option<ExitEvent> {
        if self.m_consecutive == 0 || self.run_increases < self.m_consecutive {
            return None;
        }
        let (c, _) = self.run_start?;
        Some(ExitEvent {
            slow_coordinate: slow.value(&c.state),
            exit_state: c.state,
            exit_index: c.index,
            exit_time: c.time,
            mode: ExitMode::Spiral,
        })
    }
}

/// Codim-1 exit on a stored trajectory.
pub fn detect_exit_codim1(traj: &Trajectory, monitor: Monitor, tau: f64) -> Option<ExitEvent> {
    let mut det = Codim1Detector::new(monitor, tau);
    for k in 0..traj.len() {
        det.observe(k, traj.times[k], traj.state(k), (traj.h1[k], traj.h2[k]));
    }
    let mode = match monitor.surface {
        0 => ExitMode::TangentialToSurface(if monitor.sign > 0.0 {
            HalfSurface::Sigma2Plus
        } else {
            HalfSurface::Sigma2Minus
        }),
        _ => ExitMode::TangentialToSurface(if monitor.sign > 0.0 {
            HalfSurface::Sigma1Plus
        } else {
            HalfSurface::Sigma1Minus
        }),
    };
    det.finish(mode, &default_slow(traj.dim))
}

/// Spiral exit on a stored trajectory.
pub fn detect_exit_spiral(traj: &Trajectory, m_consecutive: usize) -> Option<ExitEvent> {
    let mut det = SpiralDetector::new(m_consecutive);
    for k in 0..traj.len() {
        det.observe(k, traj.times[k], traj.state(k), traj.regions[k], (traj.h1[k], traj.h2[k]));
    }
    det.finish(&default_slow(traj.dim))
}

fn default_slow(dim: usize) -> SlowCoordinate {
    SlowCoordinate::Component(2.min(dim - 1))
}

/// Applies an exit specification to a stored trajectory.
pub fn detect_exit(traj: &Trajectory, spec: &ExitSpec, tau: f64) -> Option<ExitEvent> {
    let mut det = Detector::new(spec, tau);
    for k in 0..traj.len() {
        det.observe(k, traj.times[k], traj.state(k), traj.regions[k], (traj.h1[k], traj.h2[k]));
    }
    det.finish(spec)
}

enum Detector {
    Codim1(Codim1Detector, f64),
    Spiral(SpiralDetector, f64),
}

impl Detector {
    fn new(spec: &ExitSpec, tau: f64) -> Self {
        let stop = spec.stop_factor.map_or(f64::INFINITY, |f| f * tau);
        match spec.rule {
            ExitRule::Codim1 { monitor, .. } => Self::Codim1(Codim1Detector::new(monitor, tau), stop),
            ExitRule::Spiral { m_consecutive } => Self::Spiral(SpiralDetector::new(m_consecutive), stop),
        }
    }

    fn observe(&mut self, index: usize, t: f64, x: &[f64], region: RegionId, h: (f64, f64)) -> StepControl {
        match self {
            Self::Codim1(d, stop) => {
                d.observe(index, t, x, h);
                if d.is_settled() && d.monitor.value(h) > *stop {
                    return StepControl::Stop;
                }
            }
            Self::Spiral(d, stop) => {
                d.observe(index, t, x, region, h);
                if d.run_increases >= d.m_consecutive && h.0.hypot(h.1) > *stop {
                    return StepControl::Stop;
                }
            }
        }
        StepControl::Continue
    }

    fn finish(self, spec: &ExitSpec) -> Option<ExitEvent> {
        match (self, spec.rule) {
            (Self::Codim1(d, _), ExitRule::Codim1 { mode, .. }) => d.finish(mode, &spec.slow),
            (Self::Spiral(d, _), _) => d.finish(&spec.slow),
            _ => unreachable!("detector built from the same rule"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub n: usize,
    pub tau: f64,
    pub seed: u64,
    pub exits: Vec<ExitEvent>,
    /// Member index of each entry of `exits`.
    pub exited_members: Vec<usize>,
    pub mean: f64,
    pub std: f64,
    pub non_exited: usize,
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of ensemble member `index`: `splitmix64(master ^ splitmix64(index))`.
pub fn member_seed(master: u64, index: usize) -> u64 {
    splitmix64(master ^ splitmix64(index as u64))
}

/// Member initial state: `(x1, x2)` uniform in `[-τ, τ]²` from a stream of
/// the member's generator separate from the one driving the steps.
pub fn member_initial_state(base_point: &[f64], tau: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut x = base_point.to_vec();
    x[0] = rng.gen_range(-tau..=tau);
    x[1] = rng.gen_range(-tau..=tau);
    x
}

fn check_ensemble(sys: &PwsSystem, base_point: &[f64], n: usize, cfg: &IntegratorConfig) -> Result<()> {
    cfg.validate()?;
    if n == 0 {
        return Err(PwsError::InvalidInput("ensemble needs at least one member".into()));
    }
    if base_point.len() != sys.dim() || base_point.iter().any(|v| !v.is_finite()) {
        return Err(PwsError::InvalidInput(format!("base point must be a finite {}-vector", sys.dim())));
    }
    Ok(())
}

/// Evolves `n` seeded members by random Euler and collects exit statistics.
/// Results do not depend on the number of worker threads.
pub fn run_ensemble(
    sys: &PwsSystem,
    base_point: &[f64],
    n: usize,
    cfg: &IntegratorConfig,
    spec: &ExitSpec,
) -> Result<EnsembleStats> {
    check_ensemble(sys, base_point, n, cfg)?;
    let outcomes: Vec<Option<ExitEvent>> = (0..n)
        .into_par_iter()
        .map(|i| run_member(sys, base_point, i, cfg, spec))
        .collect::<Result<_>>()?;
    let mut exits = Vec::new();
    let mut exited_members = Vec::new();
    for (i, e) in outcomes.into_iter().enumerate() {
        if let Some(e) = e {
            exits.push(e);
            exited_members.push(i);
        }
    }
    let (mean, std) = exit_statistics(&exits);
    Ok(EnsembleStats { n, tau: cfg.tau, seed: cfg.seed, non_exited: n - exits.len(), exits, exited_members, mean, std })
}

/// A single member of [`run_ensemble`], detected while streaming.
pub fn run_member(
    sys: &PwsSystem,
    base_point: &[f64],
    index: usize,
    cfg: &IntegratorConfig,
    spec: &ExitSpec,
) -> Result<Option<ExitEvent>> {
    let seed = member_seed(cfg.seed, index);
    let x0 = member_initial_state(base_point, cfg.tau, seed);
    let member_cfg = IntegratorConfig { seed, ..*cfg };
    let mut det = Detector::new(spec, cfg.tau);
    euler_stream(sys, &x0, &member_cfg, true, |s| det.observe(s.index, s.t, s.x, s.region, s.h))?;
    Ok(det.finish(spec))
}

/// The stored trajectory of ensemble member `index`.
pub fn member_trajectory(sys: &PwsSystem, base_point: &[f64], index: usize, cfg: &IntegratorConfig) -> Result<Trajectory> {
    let seed = member_seed(cfg.seed, index);
    let x0 = member_initial_state(base_point, cfg.tau, seed);
    crate::integrate::euler_random(sys, &x0, &IntegratorConfig { seed, ..*cfg })
}

/// Sample mean and standard deviation (`n - 1` denominator, 0 for a single
/// event) of the exits' slow coordinates. NaN for an empty list.
pub fn exit_statistics(events: &[ExitEvent]) -> (f64, f64) {
    let n = events.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = events.iter().map(|e| e.slow_coordinate).sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = events.iter().map(|e| (e.slow_coordinate - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Accumulates linearly interpolated member states on the grid `0, τ, 2τ, …`.
#[derive(Debug, Clone)]
pub struct GridAverager {
    dim: usize,
    tau: f64,
    sums: Vec<f64>,
    members: usize,
    common_end: f64,
}

impl GridAverager {
    pub fn new(dim: usize, tau: f64) -> Self {
        Self { dim, tau, sums: Vec::new(), members: 0, common_end: f64::INFINITY }
    }

    /// Grid values of one member, fed as a stream of `(t, x)` samples.
    pub fn member_grid<'a, I>(&self, samples: I) -> (Vec<f64>, f64)
    where
        I: IntoIterator<Item = (f64, &'a [f64])>,
    {
        let mut grid = Vec::new();
        let mut prev: Option<(f64, Vec<f64>)> = None;
        let mut m = 0usize;
        let mut end = f64::NEG_INFINITY;
        for (t, x) in samples {
            loop {
                let g = m as f64 * self.tau;
                if g > t {
                    break;
                }
                match &prev {
                    _ if g == t => grid.extend_from_slice(x),
                    Some((tp, xp)) => {
                        let s = (g - tp) / (t - tp);
                        grid.extend(xp.iter().zip(x).map(|(a, b)| a + s * (b - a)));
                    }
                    None => grid.extend_from_slice(x),
                }
                m += 1;
            }
            prev = Some((t, x.to_vec()));
            end = t;
        }
        (grid, end)
    }

    pub fn add_grid(&mut self, grid: &[f64], end: f64) {
        if self.sums.is_empty() && self.members == 0 {
            self.sums = grid.to_vec();
        } else {
            let len = self.sums.len().min(grid.len());
            self.sums.truncate(len);
            self.sums.iter_mut().zip(grid).for_each(|(s, g)| *s += g);
        }
        self.members += 1;
        self.common_end = self.common_end.min(end);
    }

    /// The averaged trajectory, truncated to the shortest member; monitors
    /// use the canonical surfaces `h1 = x1`, `h2 = x2`.
    pub fn finish(self) -> Result<Trajectory> {
        if self.members == 0 {
            return Err(PwsError::InvalidInput("no trajectories to average".into()));
        }
        let mut out = Trajectory::new(self.dim);
        let inv = 1.0 / self.members as f64;
        let mut x = vec![0.0; self.dim];
        for (m, chunk) in self.sums.chunks_exact(self.dim).enumerate() {
            let t = m as f64 * self.tau;
            if t > self.common_end {
                break;
            }
            x.iter_mut().zip(chunk).for_each(|(v, s)| *v = s * inv);
            let h = (x[0], x[1]);
            out.push(t, &x, region_from_values(h.0, h.1, 0.0), h);
        }
        Ok(out)
    }
}

/// Mean of the members linearly interpolated on the grid `0, τ, 2τ, …` up to
/// the end of the shortest member.
pub fn average_trajectory(trajs: &[Trajectory], tau: f64) -> Result<Trajectory> {
    if trajs.is_empty() {
        return Err(PwsError::InvalidInput("no trajectories to average".into()));
    }
    if !(tau > 0.0) {
        return Err(PwsError::InvalidParameter(format!("grid spacing must be positive, got {tau}")));
    }
    let dim = trajs[0].dim;
    let t0 = trajs[0].times.first().copied();
    for tr in trajs {
        if tr.dim != dim || tr.is_empty() || tr.times.first().copied() != t0 {
            return Err(PwsError::InvalidInput("trajectories must share dimension and initial time".into()));
        }
    }
    let mut avg = GridAverager::new(dim, tau);
    for tr in trajs {
        let (grid, end) = avg.member_grid((0..tr.len()).map(|k| (tr.times[k], tr.state(k))));
        avg.add_grid(&grid, end);
    }
    avg.finish()
}

/// Average trajectory of the ensemble members of [`run_ensemble`], computed
/// without storing the members. Members are processed in fixed-size chunks
/// and summed in index order.
pub fn ensemble_average(sys: &PwsSystem, base_point: &[f64], n: usize, cfg: &IntegratorConfig) -> Result<Trajectory> {
    check_ensemble(sys, base_point, n, cfg)?;
    const CHUNK: usize = 8;
    let mut avg = GridAverager::new(sys.dim(), cfg.tau);
    for start in (0..n).step_by(CHUNK) {
        let grids: Vec<(Vec<f64>, f64)> = (start..(start + CHUNK).min(n))
            .into_par_iter()
            .map(|i| {
                let tr = member_trajectory(sys, base_point, i, cfg)?;
                Ok(avg.member_grid((0..tr.len()).map(|k| (tr.times[k], tr.state(k)))))
            })
            .collect::<Result<_>>()?;
        for (g, end) in grids {
            avg.add_grid(&g, end);
        }
    }
    avg.finish()
}
