use nalgebra::{DMatrix, DVector};

use super::{check_initial, push_smooth, IntegratorConfig, SmoothField, Trajectory};
use crate::error::{PwsError, Result};

/// Modified Rosenbrock pair of orders 2(3) (the `ode23s` scheme): two stages
/// per step with one matrix factorization, L-stable, error estimated from a
/// third stage at the new point. Uses the field's analytic Jacobian when it
/// provides one, forward differences otherwise.
///
/// Step control follows the classic scheme: the local error, weighted by
/// `max(|y|, |y_new|, atol/rtol)`, must not exceed `rtol`; steps are capped
/// at a tenth of the horizon.
pub fn stiff_adaptive<F: SmoothField + ?Sized>(field: &F, x0: &[f64], cfg: &IntegratorConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let n = field.dim();
    check_initial(x0, n)?;
    let d = 1.0 / (2.0 + std::f64::consts::SQRT_2);
    let e32 = 6.0 + std::f64::consts::SQRT_2;
    let threshold = cfg.atol / cfg.rtol;
    let h_max = 0.1 * cfg.horizon;
    let h_min = 1e-14 * cfg.horizon;

    let mut traj = Trajectory::new(n);
    let mut y = x0.to_vec();
    let mut f0 = vec![0.0; n];
    let mut f1 = vec![0.0; n];
    let mut f2 = vec![0.0; n];
    let mut ft = vec![0.0; n];
    let mut dfdt = vec![0.0; n];
    let mut stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut jac = vec![vec![0.0; n]; n];
    let mut t = 0.0;
    field.eval(t, &y, &mut f0);
    push_smooth(&mut traj, field, t, &y, &f0);

    let rh = weighted_max(&f0, &y, &y, threshold) / (0.8 * cfg.rtol.cbrt());
    let mut h = if h_max * rh > 1.0 { 1.0 / rh } else { h_max };
    let mut attempts = 0usize;
    let mut jacobian_current = false;
    let mut no_failures = true;

    while t < cfg.horizon {
        if attempts >= cfg.max_steps {
            traj.truncated = true;
            break;
        }
        attempts += 1;
        if !jacobian_current {
            if !field.jacobian(t, &y, &mut jac) {
                difference_jacobian(field, t, &y, &f0, &mut jac, &mut stage, &mut ft);
            }
            let dt = 1e-8 * t.abs().max(1e-3 * cfg.horizon).max(1e-8);
            field.eval(t + dt, &y, &mut ft);
            for i in 0..n {
                dfdt[i] = (ft[i] - f0[i]) / dt;
            }
            jacobian_current = true;
        }
        h = h.clamp(h_min, h_max);
        let last = t + 1.1 * h >= cfg.horizon;
        if last {
            h = cfg.horizon - t;
        }
        let t_new = if last { cfg.horizon } else { t + h };

        let lu = DMatrix::from_fn(n, n, |r, c| f64::from(u8::from(r == c)) - h * d * jac[r][c]).lu();
        let solve = |rhs: Vec<f64>| lu.solve(&DVector::from_vec(rhs));
        let e = match solve((0..n).map(|i| f0[i] + h * d * dfdt[i]).collect()) {
            None => f64::INFINITY,
            Some(k1) => {
                for i in 0..n {
                    stage[i] = y[i] + 0.5 * h * k1[i];
                }
                field.eval(t + 0.5 * h, &stage, &mut f1);
                let k2 = solve((0..n).map(|i| f1[i] - k1[i]).collect()).expect("matrix already factored") + &k1;
                for i in 0..n {
                    y_new[i] = y[i] + h * k2[i];
                }
                field.eval(t_new, &y_new, &mut f2);
                let k3 = solve(
                    (0..n).map(|i| f2[i] - e32 * (k2[i] - f1[i]) - 2.0 * (k1[i] - f0[i]) + h * d * dfdt[i]).collect(),
                )
                .expect("matrix already factored");
                for i in 0..n {
                    err[i] = (k1[i] - 2.0 * k2[i] + k3[i]) / 6.0;
                }
                h * weighted_max(&err, &y, &y_new, threshold)
            }
        };

        if e.is_finite() && e <= cfg.rtol {
            t = t_new;
            y.copy_from_slice(&y_new);
            f0.copy_from_slice(&f2);
            push_smooth(&mut traj, field, t, &y, &f0);
            jacobian_current = false;
            if no_failures {
                let shrink = 1.25 * (e / cfg.rtol).cbrt();
                h = if shrink > 0.2 { h / shrink } else { 5.0 * h };
            }
            no_failures = true;
            continue;
        }
        if h <= h_min {
            return Err(PwsError::StepFailure {
                t,
                reason: format!("error test fails at the minimum step {h_min:e} (weighted error {e:e})"),
            });
        }
        h = if no_failures && e.is_finite() { h * (0.8 * (cfg.rtol / e).cbrt()).max(0.5) } else { 0.5 * h };
        no_failures = false;
    }
    Ok(traj)
}

fn weighted_max(err: &[f64], y0: &[f64], y1: &[f64], threshold: f64) -> f64 {
    err.iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| e.abs() / a.abs().max(b.abs()).max(threshold))
        .fold(0.0, |m, v| if v.is_nan() || m.is_nan() { f64::NAN } else { m.max(v) })
}

fn difference_jacobian<F: SmoothField + ?Sized>(
    field: &F,
    t: f64,
    y: &[f64],
    fy: &[f64],
    jac: &mut [Vec<f64>],
    probe: &mut [f64],
    fp: &mut [f64],
) {
    let n = y.len();
    probe.copy_from_slice(y);
    for c in 0..n {
        let h = f64::EPSILON.sqrt() * y[c].abs().max(1e-5);
        probe[c] = y[c] + h;
        field.eval(t, probe, fp);
        probe[c] = y[c];
        for r in 0..n {
            jac[r][c] = (fp[r] - fy[r]) / h;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::rk::tests::regression_order;
    use crate::integrate::{FnField, RegularizedField};
    use crate::model::Preset;
    use crate::regularization::RegularizationParams;

    #[test]
    fn stiff_decay_with_large_steps() {
        let lambda = 1e6;
        let field = FnField::new(1, move |_t, x: &[f64], out: &mut [f64]| out[0] = -lambda * x[0]);
        let atol = 1e-8;
        let cfg = IntegratorConfig::adaptive(1e-6, atol, 1.0);
        let tr = stiff_adaptive(&field, &[1.0], &cfg).unwrap();
        assert!(tr.last_state()[0].abs() < atol);
        let steps = tr.len() - 1;
        let mean_step = 1.0 / steps as f64;
        assert!(mean_step > 100.0 * 2.0 / lambda, "{steps} steps");
    }

    #[test]
    fn constant_solution_is_exact() {
        let field = FnField::new(2, |_t, _x: &[f64], out: &mut [f64]| out.fill(0.0));
        let tr = stiff_adaptive(&field, &[0.25, -4.0], &IntegratorConfig::adaptive(1e-8, 1e-8, 3.0)).unwrap();
        for k in 0..tr.len() {
            assert_eq!(tr.state(k), &[0.25, -4.0]);
        }
    }

    #[test]
    fn observed_order_from_tolerance_sweep() {
        // y' = -2 t y², y(0) = 1, so y(3) = 1/10
        let field = FnField::new(1, |t, x: &[f64], out: &mut [f64]| out[0] = -2.0 * t * x[0] * x[0]);
        let mut pts = Vec::new();
        for k in 0..8 {
            let tol = 1e-4 * 0.5f64.powi(2 * k);
            let tr = stiff_adaptive(&field, &[1.0], &IntegratorConfig::adaptive(tol, tol, 3.0)).unwrap();
            pts.push(((tr.len() - 1) as f64, (tr.last_state()[0] - 0.1).abs()));
        }
        let order = regression_order(&pts);
        assert!(order >= 1.8, "observed order {order}");
    }

    #[test]
    fn linear_system_matches_exponential() {
        let field = FnField::new(2, |_t, x: &[f64], out: &mut [f64]| {
            out[0] = -0.5 * x[0] + x[1];
            out[1] = -x[0] - 0.5 * x[1];
        });
        let tr = stiff_adaptive(&field, &[1.0, 0.0], &IntegratorConfig::adaptive(1e-12, 1e-12, 1.0)).unwrap();
        let decay = (-0.5f64).exp();
        let x = tr.last_state();
        assert!((x[0] - decay * 1f64.cos()).abs() < 1e-8 && (x[1] + decay * 1f64.sin()).abs() < 1e-8);
    }

    #[test]
    fn regularized_spiral_stays_near_sigma() {
        let sys = Preset::Spiral.system();
        let eps = 1e-4;
        let field = RegularizedField::new(&sys, RegularizationParams::cubic(eps, eps).unwrap()).unwrap();
        let cfg = IntegratorConfig::adaptive(1e-10, 1e-10, 2.0);
        let tr = stiff_adaptive(&field, &[eps, eps, 0.0], &cfg).unwrap();
        assert!((tr.last_state()[2] - 2.0).abs() < 1e-8);
        let worst = tr.hnorm.iter().skip(1).fold(0.0f64, |m, v| m.max(*v));
        assert!(worst <= 3.0 * eps, "{}", worst / eps);
    }
}
