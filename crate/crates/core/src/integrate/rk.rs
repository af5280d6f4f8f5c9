use super::{check_initial, error_norm, initial_step, push_smooth, IntegratorConfig, SmoothField, Trajectory};
use crate::error::{PwsError, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// difference between the fifth- and fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Dormand–Prince 5(4) with first-same-as-last stages and step control on
/// `atol + rtol |x|`. Derivatives are stored for Hermite dense output.
pub fn rk_adaptive<F: SmoothField + ?Sized>(field: &F, x0: &[f64], cfg: &IntegratorConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let n = field.dim();
    check_initial(x0, n)?;
    let mut traj = Trajectory::new(n);
    let mut y = x0.to_vec();
    let mut k = vec![vec![0.0; n]; 7];
    let mut stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut t = 0.0;
    field.eval(t, &y, &mut k[0]);
    push_smooth(&mut traj, field, t, &y, &k[0]);
    let mut h = initial_step(&y, &k[0], cfg.rtol, cfg.atol, cfg.horizon, 5);
    let h_min = 1e-14 * cfg.horizon;
    let mut attempts = 0usize;

    while t < cfg.horizon {
        if attempts >= cfg.max_steps {
            traj.truncated = true;
            break;
        }
        attempts += 1;
        let last = t + h >= cfg.horizon;
        if last {
            h = cfg.horizon - t;
        }
        for s in 1..7 {
            let (prev, rest) = k.split_at_mut(s);
            for i in 0..n {
                stage[i] = y[i] + h * prev.iter().zip(&A[s]).map(|(kr, a)| a * kr[i]).sum::<f64>();
            }
            field.eval(t + C[s] * h, &stage, &mut rest[0]);
            if s == 6 {
                y_new.copy_from_slice(&stage);
            }
        }
        for i in 0..n {
            err[i] = h * (0..7).map(|r| E[r] * k[r][i]).sum::<f64>();
        }
        let e = error_norm(&err, &y, &y_new, cfg.rtol, cfg.atol);
        if !e.is_finite() {
            h *= 0.25;
        } else if e <= 1.0 {
            t = if last { cfg.horizon } else { t + h };
            y.copy_from_slice(&y_new);
            let fsal = k[6].clone();
            k[0].copy_from_slice(&fsal);
            push_smooth(&mut traj, field, t, &y, &k[0]);
            let factor = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
            h *= factor;
            continue;
        } else {
            h *= (0.9 * e.powf(-0.2)).clamp(0.2, 1.0);
        }
        if h < h_min {
            return Err(PwsError::StiffnessSuspected { t, h });
        }
    }
    Ok(traj)
}
