use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_initial, IntegratorConfig, Trajectory};
use crate::error::{PwsError, Result};
use crate::model::{region_from_values, PwsSystem, RegionId};

/// One stored Euler state, as seen by a streaming observer.
#[derive(Debug, Clone, Copy)]
pub struct EulerStep<'a> {
    pub index: usize,
    pub t: f64,
    pub x: &'a [f64],
    pub region: RegionId,
    pub h: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepControl {
    Continue,
    Stop,
}

/// Random-step Euler: `τ_k = τ(1 + u_k)`, `u_k ~ U[0, 1]`.
pub fn euler_random(sys: &PwsSystem, x0: &[f64], cfg: &IntegratorConfig) -> Result<Trajectory> {
    collect(sys, x0, cfg, true)
}

/// Fixed-step Euler with the same surface-landing perturbation.
pub fn euler_fixed(sys: &PwsSystem, x0: &[f64], cfg: &IntegratorConfig) -> Result<Trajectory> {
    collect(sys, x0, cfg, false)
}

fn collect(sys: &PwsSystem, x0: &[f64], cfg: &IntegratorConfig, random: bool) -> Result<Trajectory> {
    let mut traj = Trajectory::new(sys.dim());
    let truncated = euler_stream(sys, x0, cfg, random, |s| {
        traj.push(s.t, s.x, s.region, s.h);
        StepControl::Continue
    })?;
    traj.truncated = truncated;
    Ok(traj)
}

/// Runs Euler until the horizon, `max_steps`, or the observer says stop,
/// handing every state (the initial one included) to `observer` without
/// storing it. Returns whether the run was cut by `max_steps`.
///
/// A state with `h1 = 0` or `h2 = 0` exactly is moved by `δ_k` of length
/// `delta_scale · max(1, |x_k|)` in a uniformly random direction, and the
/// step is taken from the moved point with the field of its region.
pub fn euler_stream<F>(sys: &PwsSystem, x0: &[f64], cfg: &IntegratorConfig, random: bool, mut observer: F) -> Result<bool>
where
    F: FnMut(&EulerStep<'_>) -> StepControl,
{
    cfg.validate()?;
    if !(cfg.delta_scale > 0.0) {
        return Err(PwsError::InvalidParameter("delta_scale must be positive for Euler".into()));
    }
    check_initial(x0, sys.dim())?;
    let n = sys.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x = x0.to_vec();
    let mut base = vec![0.0; n];
    let mut dir = vec![0.0; n];
    let mut f = vec![0.0; n];
    let mut t = 0.0;
    let mut index = 0usize;

    loop {
        let h = sys.surface_values(&x);
        let region = region_from_values(h.0, h.1, 0.0);
        let step = EulerStep { index, t, x: &x, region, h };
        if observer(&step) == StepControl::Stop || t >= cfg.horizon {
            return Ok(false);
        }
        if index >= cfg.max_steps {
            return Ok(true);
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(PwsError::StepFailure { t, reason: "state became non-finite".into() });
        }

        base.copy_from_slice(&x);
        let (mut h1, mut h2) = h;
        if h1 == 0.0 || h2 == 0.0 {
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let mut delta = cfg.delta_scale * norm.max(1.0);
            loop {
                random_direction(&mut rng, &mut dir);
                for i in 0..n {
                    base[i] = x[i] + delta * dir[i];
                }
                (h1, h2) = sys.surface_values(&base);
                if h1 != 0.0 && h2 != 0.0 {
                    break;
                }
                delta *= 2.0;
            }
        }
        let j = 2 * usize::from(h1 > 0.0) + usize::from(h2 > 0.0);
        let tau_k = if random { cfg.tau * (1.0 + rng.gen::<f64>()) } else { cfg.tau };
        sys.eval_field(j, &base, &mut f);
        for i in 0..n {
            x[i] = base[i] + tau_k * f[i];
        }
        t += tau_k;
        index += 1;
    }
}

/// Uniform direction on the unit sphere by rejection from the cube.
fn random_direction(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    loop {
        let mut r2 = 0.0;
        for v in out.iter_mut() {
            *v = rng.gen_range(-1.0..=1.0);
            r2 += *v * *v;
        }
        if r2 > 1e-12 && r2 <= 1.0 {
            let r = r2.sqrt();
            out.iter_mut().for_each(|v| *v /= r);
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::model::{Preset, VectorFieldFn};

    fn constant_system(c: [f64; 3]) -> PwsSystem {
        let f: VectorFieldFn = Arc::new(move |_x: &[f64], out: &mut [f64]| out.copy_from_slice(&c));
        PwsSystem::canonical("constant", 3, [f.clone(), f.clone(), f.clone(), f]).unwrap()
    }

    #[test]
    fn random_steps_sum_exactly_in_one_region() {
        let c = [0.5, 0.25, 1.0];
        let sys = constant_system(c);
        let x0 = [1.0, 1.0, 0.0];
        let cfg = IntegratorConfig::euler(1e-2, 0.5, 3);
        let tr = euler_random(&sys, &x0, &cfg).unwrap();
        assert!(!tr.truncated);
        // replay the generator stream and accumulate the same sums
        let mut x = x0;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut t = 0.0;
        for k in 1..tr.len() {
            let tau_k = 1e-2 * (1.0 + rng.gen::<f64>());
            assert!((1e-2..=2e-2).contains(&tau_k));
            for i in 0..3 {
                x[i] += tau_k * c[i];
            }
            t += tau_k;
            assert_eq!(tr.state(k), &x);
            assert_eq!(tr.times[k], t);
        }
        assert!(*tr.times.last().unwrap() >= 0.5);
    }

    #[test]
    fn fixed_steps_sum_exactly() {
        let c = [1.0, 2.0, -1.0];
        let sys = constant_system(c);
        let cfg = IntegratorConfig::euler(0.125, 1.0, 0);
        let tr = euler_fixed(&sys, &[1.0, 1.0, 1.0], &cfg).unwrap();
        assert_eq!(tr.len(), 9);
        assert_eq!(tr.last_state(), &[2.0, 3.0, 0.0]);
    }

    #[test]
    fn same_seed_same_bits() {
        let sys = Preset::Spiral.system();
        let cfg = IntegratorConfig::euler(1e-4, 0.3, 99);
        let a = euler_random(&sys, &[1e-6, 1e-6, 0.5], &cfg).unwrap();
        let b = euler_random(&sys, &[1e-6, 1e-6, 0.5], &cfg).unwrap();
        assert_eq!(a, b);
        let c = euler_random(&sys, &[1e-6, 1e-6, 0.5], &IntegratorConfig { seed: 100, ..cfg }).unwrap();
        assert_ne!(a.states, c.states);
    }

    #[test]
    fn mean_random_step_is_one_and_a_half_tau() {
        let sys = constant_system([0.0, 0.0, 1.0]);
        let tau = 1e-3;
        let cfg = IntegratorConfig { max_steps: 100_000, horizon: 1e9, ..IntegratorConfig::euler(tau, 1.0, 5) };
        let tr = euler_random(&sys, &[1.0, 1.0, 0.0], &cfg).unwrap();
        assert!(tr.truncated);
        assert_eq!(tr.len(), 100_001);
        let mean = tr.times.last().unwrap() / 100_000.0;
        assert!(mean >= 1.49 * tau && mean <= 1.51 * tau, "{mean}");
    }

    #[test]
    fn monitors_are_surface_values() {
        let sys = Preset::Tangential.system();
        let cfg = IntegratorConfig::euler(1e-3, 0.2, 1);
        let tr = euler_random(&sys, &[1e-4, 1e-4, 0.0, 1.7f64.sqrt()], &cfg).unwrap();
        for k in (0..tr.len()).step_by(17) {
            let (h1, h2) = sys.surface_values(tr.state(k));
            assert_eq!((tr.h1[k], tr.h2[k]), (h1, h2));
            assert_eq!(tr.hnorm[k], h1.hypot(h2));
            assert_eq!(tr.regions[k], region_from_values(h1, h2, 0.0));
        }
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn landing_on_a_surface_is_perturbed() {
        let sys = Preset::Nontangential.system();
        let cfg = IntegratorConfig::euler(1e-3, 0.05, 8);
        let tr = euler_random(&sys, &[0.0, 0.0, 0.0], &cfg).unwrap();
        assert_eq!(tr.regions[0], RegionId::OnSigma);
        assert!(tr.regions[1].is_open());
        let moved = tr.state(1);
        // after one step the state is an O(τ) move away from the origin
        assert!(moved[0].abs() <= 2e-3 && moved[1].abs() <= 2e-3 && moved[2] > 0.0);
    }

    #[test]
    fn zero_delta_rejected() {
        let sys = Preset::Spiral.system();
        let cfg = IntegratorConfig { delta_scale: 0.0, ..IntegratorConfig::euler(1e-3, 1.0, 0) };
        assert!(euler_random(&sys, &[0.1, 0.1, 0.0], &cfg).is_err());
        assert!(euler_random(&sys, &[0.1, f64::NAN, 0.0], &IntegratorConfig::euler(1e-3, 1.0, 0)).is_err());
    }

    #[test]
    fn nontangential_chatter_box_grows_toward_the_locus() {
        // the pull of f1 towards Σ1 is (3 - x3)/5, so the chattering amplitude
        // scales like τ/(3 - x3): bounded by 4τ well before the locus only
        let sys = Preset::Nontangential.system();
        let tau = 1e-5;
        let cfg = IntegratorConfig::euler(tau, 2.9, 11);
        let mut early = 0.0f64;
        let mut late = 0.0f64;
        euler_stream(&sys, &[1e-5, 1e-5, 0.0], &cfg, true, |s| {
            let m = s.x[0].abs().max(s.x[1].abs());
            if s.x[2] < 2.2 {
                early = early.max(m);
            } else if s.x[2] > 2.7 {
                late = late.max(m);
            }
            StepControl::Continue
        })
        .unwrap();
        assert!(early <= 4.0 * tau, "{}", early / tau);
        assert!(late > 1.5 * early);
    }

    #[test]
    fn observer_can_stop() {
        let sys = Preset::Spiral.system();
        let cfg = IntegratorConfig::euler(1e-3, 10.0, 0);
        let mut seen = 0;
        let truncated = euler_stream(&sys, &[1e-3, 1e-3, 0.0], &cfg, true, |s| {
            seen += 1;
            if s.index == 9 {
                StepControl::Stop
            } else {
                StepControl::Continue
            }
        })
        .unwrap();
        assert!(!truncated);
        assert_eq!(seen, 10);
    }

    #[test]
    fn fixed_euler_cycle_shrinks_with_tau() {
        let sys = Preset::Tangential.system();
        let amplitude = |tau: f64| {
            let cfg = IntegratorConfig::euler(tau, 0.6, 0);
            let mut amp = 0.0f64;
            euler_stream(&sys, &[1e-4, 1e-4, 0.0, 1.7f64.sqrt()], &cfg, false, |s| {
                let rho = s.x[2] * s.x[2] + s.x[3] * s.x[3];
                if (2.1..2.5).contains(&rho) {
                    amp = amp.max(s.x[0].abs().max(s.x[1].abs()));
                }
                StepControl::Continue
            })
            .unwrap();
            amp
        };
        let a = [amplitude(1e-3), amplitude(5e-4), amplitude(2.5e-4)];
        assert!(a[0] > a[1] && a[1] > a[2], "{a:?}");
        assert!(a[0] < 0.05);
    }
}
