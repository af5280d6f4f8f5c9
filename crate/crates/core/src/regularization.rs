//! Bilinear regularization of the piecewise-smooth field, its fast subsystem on
//! the square `Q = [0,1]²`, and equilibrium / bifurcation analysis in the slow
//! variables.
//!
//! Inside the box `|x1| <= ε_α, |x2| <= ε_β` the regularized field is the
//! bilinear blend of `f1..f4` with weights driven by `α(x1)`, `β(x2)`. Writing
//! the blend in `(α, β)` and rescaling time by `3/(4ε_α)` gives the fast system
//!
//! ```text
//! α' = (1 - z(α)²) g1(α, β, y)
//! β' = (1/η)(1 - z(β)²) g2(α, β, y),     η = ε_β / ε_α
//! ```
//!
//! where `z` inverts the cubic interpolant and `g1, g2` are the normal
//! components of the blend. The linear ramp gives the same system without the
//! boundary factor (the "dummy" system).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{PwsError, Result};
use crate::filippov::{
    bilinear_coeffs, bilinear_jacobian, bilinear_residual, bilinear_weights, edge_sliding, HalfSurface,
};
use crate::model::{ProjectionTable, PwsSystem, RegionId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Interpolant {
    /// `1/2 + (u/4ε)(3 - (u/ε)²)` inside the band.
    C1Cubic,
    /// `(u + ε)/(2ε)` inside the band.
    C0Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizationParams {
    pub eps_alpha: f64,
    pub eps_beta: f64,
    pub interpolant: Interpolant,
}

impl RegularizationParams {
    pub fn new(eps_alpha: f64, eps_beta: f64, interpolant: Interpolant) -> Result<Self> {
        for (name, v) in [("eps_alpha", eps_alpha), ("eps_beta", eps_beta)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(PwsError::InvalidParameter(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        Ok(Self { eps_alpha, eps_beta, interpolant })
    }

    pub fn cubic(eps_alpha: f64, eps_beta: f64) -> Result<Self> {
        Self::new(eps_alpha, eps_beta, Interpolant::C1Cubic)
    }

    /// Fast-system parameters with a given `η`; only the ratio matters there.
    pub fn with_eta(eta: f64, interpolant: Interpolant) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(PwsError::InvalidParameter(format!("eta must be positive, got {eta}")));
        }
        let (a, b) = if eta >= 1.0 { (1e-6 / eta, 1e-6) } else { (1e-6, 1e-6 * eta) };
        Self::new(a, b, interpolant)
    }

    pub fn eta(&self) -> f64 {
        self.eps_beta / self.eps_alpha
    }

    fn interp(&self, u: f64, eps: f64) -> f64 {
        match self.interpolant {
            Interpolant::C1Cubic => cubic(u, eps),
            Interpolant::C0Linear => linear(u, eps),
        }
    }

    fn interp_deriv(&self, u: f64, eps: f64) -> f64 {
        match self.interpolant {
            Interpolant::C1Cubic => cubic_deriv(u, eps),
            Interpolant::C0Linear => {
                if u.abs() < eps {
                    0.5 / eps
                } else {
                    0.0
                }
            }
        }
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(PwsError::InvalidParameter(format!("band width must be positive, got {eps}")))
    }
}

#[inline]
fn cubic(u: f64, eps: f64) -> f64 {
    if u >= eps {
        1.0
    } else if u <= -eps {
        0.0
    } else {
        let s = u / eps;
        0.5 + 0.25 * s * (3.0 - s * s)
    }
}

#[inline]
fn cubic_deriv(u: f64, eps: f64) -> f64 {
    if u.abs() >= eps {
        0.0
    } else {
        let s = u / eps;
        0.75 / eps * (1.0 - s * s)
    }
}

#[inline]
fn linear(u: f64, eps: f64) -> f64 {
    ((u + eps) / (2.0 * eps)).clamp(0.0, 1.0)
}

/// C¹ cubic interpolant from 0 at `-eps` to 1 at `eps`.
pub fn interp_c1(u: f64, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    Ok(cubic(u, eps))
}

/// Derivative of [`interp_c1`] with respect to `u`.
pub fn interp_c1_deriv(u: f64, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    Ok(cubic_deriv(u, eps))
}

/// Linear ramp from 0 at `-eps` to 1 at `eps`.
pub fn interp_c0(u: f64, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    Ok(linear(u, eps))
}

/// Solves `interp_c1(ε z, ε) = a` for `z ∈ [-1, 1]` through the trigonometric
/// form of the cubic's roots.
pub fn invert_alpha(a: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&a) {
        return Err(PwsError::InvalidInput(format!("interpolant value {a} outside [0, 1]")));
    }
    Ok(z_of(a))
}

#[inline]
fn z_of(a: f64) -> f64 {
    if a <= 0.0 {
        return -1.0;
    }
    if a >= 1.0 {
        return 1.0;
    }
    let phi = (2.0 * (a - a * a).max(0.0).sqrt()).atan2(1.0 - 2.0 * a);
    2.0 * (phi / 3.0 + 4.0 * PI / 3.0).cos()
}

/// `1 - 4cos²(φ(γ)/3 + 4π/3) = 1 - z(γ)²`; vanishes on `{0, 1}`.
#[inline]
pub fn boundary_factor(gamma: f64) -> f64 {
    if gamma <= 0.0 || gamma >= 1.0 {
        return 0.0;
    }
    let z = z_of(gamma);
    (1.0 - z) * (1.0 + z)
}

/// `d/dγ (1 - z(γ)²)` in the open interval.
#[inline]
fn boundary_factor_deriv(gamma: f64) -> f64 {
    let z = z_of(gamma);
    -8.0 * z / (3.0 * (1.0 - z) * (1.0 + z))
}

/// The regularized field `f_B^ε(x)`.
pub fn regularized_field(sys: &PwsSystem, params: &RegularizationParams, x: &[f64], out: &mut [f64]) -> Result<()> {
    if !sys.is_canonical() {
        return Err(PwsError::UnsupportedGeometry);
    }
    let a = params.interp(x[0], params.eps_alpha);
    let b = params.interp(x[1], params.eps_beta);
    let weights = bilinear_weights(a, b);
    out.iter_mut().for_each(|v| *v = 0.0);
    let mut f = vec![0.0; sys.dim()];
    for (j, &l) in weights.iter().enumerate() {
        if l != 0.0 {
            sys.eval_field(j, x, &mut f);
            out.iter_mut().zip(&f).for_each(|(acc, v)| *acc += l * v);
        }
    }
    Ok(())
}

/// Jacobian of [`regularized_field`]: the interpolant derivatives are exact,
/// the regional fields are differentiated by central differences.
pub fn regularized_jacobian(
    sys: &PwsSystem,
    params: &RegularizationParams,
    x: &[f64],
    jac: &mut [Vec<f64>],
) -> Result<()> {
    if !sys.is_canonical() {
        return Err(PwsError::UnsupportedGeometry);
    }
    let n = sys.dim();
    let a = params.interp(x[0], params.eps_alpha);
    let b = params.interp(x[1], params.eps_beta);
    let da = params.interp_deriv(x[0], params.eps_alpha);
    let db = params.interp_deriv(x[1], params.eps_beta);
    let weights = bilinear_weights(a, b);
    let dw_da = [-(1.0 - b), -b, 1.0 - b, b];
    let dw_db = [-(1.0 - a), 1.0 - a, -a, a];
    jac.iter_mut().for_each(|row| row.iter_mut().for_each(|v| *v = 0.0));
    let mut f = vec![0.0; n];
    let mut up = vec![0.0; n];
    let mut down = vec![0.0; n];
    let mut probe = x.to_vec();
    for j in 0..4 {
        sys.eval_field(j, x, &mut f);
        for r in 0..n {
            jac[r][0] += dw_da[j] * da * f[r];
            jac[r][1] += dw_db[j] * db * f[r];
        }
        if weights[j] == 0.0 {
            continue;
        }
        for c in 0..n {
            let h = 1e-6 * x[c].abs().max(1.0);
            probe[c] = x[c] + h;
            sys.eval_field(j, &probe, &mut up);
            probe[c] = x[c] - h;
            sys.eval_field(j, &probe, &mut down);
            probe[c] = x[c];
            for r in 0..n {
                jac[r][c] += weights[j] * (up[r] - down[r]) / (2.0 * h);
            }
        }
    }
    Ok(())
}

/// A point of the fast phase space `Q = [0,1]²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FastPoint {
    pub alpha: f64,
    pub beta: f64,
}

impl FastPoint {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta }
    }

    pub fn clamped(self) -> Self {
        Self { alpha: self.alpha.clamp(0.0, 1.0), beta: self.beta.clamp(0.0, 1.0) }
    }
}

impl From<(f64, f64)> for FastPoint {
    fn from((alpha, beta): (f64, f64)) -> Self {
        Self { alpha, beta }
    }
}

/// Fast vector field `(α', β')` on Q. Uses the boundary factor for the cubic
/// interpolant and falls back to [`dummy_field`] for the linear ramp.
pub fn fast_field(w: &ProjectionTable, p: FastPoint, params: &RegularizationParams) -> (f64, f64) {
    let eta = params.eta();
    match params.interpolant {
        Interpolant::C0Linear => dummy_field(w, p, eta),
        Interpolant::C1Cubic => {
            let (g1, g2) = bilinear_residual(w, p.alpha, p.beta);
            (boundary_factor(p.alpha) * g1, boundary_factor(p.beta) * g2 / eta)
        }
    }
}

/// Fast field of the linear-ramp regularization.
pub fn dummy_field(w: &ProjectionTable, p: FastPoint, eta: f64) -> (f64, f64) {
    let (g1, g2) = bilinear_residual(w, p.alpha, p.beta);
    (g1, g2 / eta)
}

/// Interior equilibrium of the fast system (same zero set as the bilinear system).
pub fn fast_equilibrium(w: &ProjectionTable) -> Result<FastPoint> {
    bilinear_coeffs(w).map(FastPoint::from)
}

/// Full analytic Jacobian of the fast field at an interior point of Q.
pub fn fast_jacobian_matrix(w: &ProjectionTable, p: FastPoint, params: &RegularizationParams) -> [[f64; 2]; 2] {
    let jt = bilinear_jacobian(w, p.alpha, p.beta);
    let inv_eta = 1.0 / params.eta();
    match params.interpolant {
        Interpolant::C0Linear => [jt[0], [jt[1][0] * inv_eta, jt[1][1] * inv_eta]],
        Interpolant::C1Cubic => {
            let (g1, g2) = bilinear_residual(w, p.alpha, p.beta);
            let (fa, fb) = (boundary_factor(p.alpha), boundary_factor(p.beta));
            [
                [fa * jt[0][0] + boundary_factor_deriv(p.alpha) * g1, fa * jt[0][1]],
                [fb * jt[1][0] * inv_eta, (fb * jt[1][1] + boundary_factor_deriv(p.beta) * g2) * inv_eta],
            ]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityClass {
    StableNode,
    StableFocus,
    UnstableNode,
    UnstableFocus,
    Saddle,
    Marginal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub equilibrium: FastPoint,
    pub jacobian: [[f64; 2]; 2],
    /// Jacobian of the bilinear system alone (no boundary factors, no η).
    pub reduced_jacobian: [[f64; 2]; 2],
    pub eigenvalues: [Complex64; 2],
    pub classification: StabilityClass,
}

/// Eigenvalues of a 2×2 matrix, largest real part first.
pub fn eigenvalues_2x2(m: &[[f64; 2]; 2]) -> [Complex64; 2] {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = 0.25 * tr * tr - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        // avoid cancellation in the smaller root
        let big = 0.5 * tr + s.copysign(tr);
        let small = if big != 0.0 { det / big } else { 0.5 * tr - s.copysign(tr) };
        let (hi, lo) = if big >= small { (big, small) } else { (small, big) };
        [Complex64::new(hi, 0.0), Complex64::new(lo, 0.0)]
    } else {
        let im = (-disc).sqrt();
        [Complex64::new(0.5 * tr, im), Complex64::new(0.5 * tr, -im)]
    }
}

pub fn classify_eigenvalues(eig: &[Complex64; 2]) -> StabilityClass {
    const TOL: f64 = 1e-10;
    let scale = eig[0].norm().max(eig[1].norm()).max(1.0);
    let tol = TOL * scale;
    if eig[0].im.abs() > 0.0 {
        let re = eig[0].re;
        if re < -tol {
            StabilityClass::StableFocus
        } else if re > tol {
            StabilityClass::UnstableFocus
        } else {
            StabilityClass::Marginal
        }
    } else {
        let (a, b) = (eig[0].re, eig[1].re);
        if a.abs() <= tol || b.abs() <= tol {
            StabilityClass::Marginal
        } else if a < 0.0 && b < 0.0 {
            StabilityClass::StableNode
        } else if a > 0.0 && b > 0.0 {
            StabilityClass::UnstableNode
        } else {
            StabilityClass::Saddle
        }
    }
}

/// Linear stability of an equilibrium of the fast system with `g1 = g2 = 0`,
/// using `J = diag(1 - z(α)², (1 - z(β)²)/η) · J̃`.
pub fn fast_jacobian(w: &ProjectionTable, p: FastPoint, params: &RegularizationParams) -> Result<StabilityReport> {
    let (g1, g2) = bilinear_residual(w, p.alpha, p.beta);
    let residual = g1.abs().max(g2.abs());
    let in_q = (0.0..=1.0).contains(&p.alpha) && (0.0..=1.0).contains(&p.beta);
    if !(residual < 1e-10) || !in_q {
        return Err(PwsError::NotAnEquilibrium { alpha: p.alpha, beta: p.beta, residual });
    }
    let jt = bilinear_jacobian(w, p.alpha, p.beta);
    let (da, db) = match params.interpolant {
        Interpolant::C1Cubic => (boundary_factor(p.alpha), boundary_factor(p.beta)),
        Interpolant::C0Linear => (1.0, 1.0),
    };
    let inv_eta = 1.0 / params.eta();
    let jacobian = [[da * jt[0][0], da * jt[0][1]], [db * inv_eta * jt[1][0], db * inv_eta * jt[1][1]]];
    let eigenvalues = eigenvalues_2x2(&jacobian);
    Ok(StabilityReport {
        equilibrium: p,
        jacobian,
        reduced_jacobian: jt,
        eigenvalues,
        classification: classify_eigenvalues(&eigenvalues),
    })
}

/// What a boundary equilibrium of the fast system corresponds to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryLabel {
    /// Vertex where the blend reduces to the field of this region.
    Vertex(RegionId),
    /// Edge point where the blend is the codimension-1 sliding field.
    Sliding(HalfSurface),
}

/// Equilibria on `∂Q`: the four vertices and one edge point per half-surface
/// carrying (attractive or repulsive) sliding.
pub fn boundary_equilibria(w: &ProjectionTable) -> Vec<(FastPoint, BoundaryLabel)> {
    let mut out = vec![
        (FastPoint::new(0.0, 0.0), BoundaryLabel::Vertex(RegionId::R1)),
        (FastPoint::new(0.0, 1.0), BoundaryLabel::Vertex(RegionId::R2)),
        (FastPoint::new(1.0, 0.0), BoundaryLabel::Vertex(RegionId::R3)),
        (FastPoint::new(1.0, 1.0), BoundaryLabel::Vertex(RegionId::R4)),
    ];
    for hs in HalfSurface::ALL {
        let Some(s) = edge_sliding(w, hs) else { continue };
        if !(s.alpha > 0.0 && s.alpha < 1.0) {
            continue;
        }
        let p = match hs {
            HalfSurface::Sigma1Minus => FastPoint::new(s.alpha, 0.0),
            HalfSurface::Sigma1Plus => FastPoint::new(s.alpha, 1.0),
            HalfSurface::Sigma2Minus => FastPoint::new(0.0, s.alpha),
            HalfSurface::Sigma2Plus => FastPoint::new(1.0, s.alpha),
        };
        out.push((p, BoundaryLabel::Sliding(hs)));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BifurcationKind {
    Hopf,
    SaddleNode,
    /// The tracked equilibrium reached an edge of Q.
    BoundaryCollision(HalfSurface),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationReport {
    pub kind: BifurcationKind,
    pub slow_value: f64,
    pub bracket: (f64, f64),
    /// Eigenvalues at the two ends of the bracket.
    pub eigen_evidence: [[Complex64; 2]; 2],
}

struct Continuation<'a, P: Fn(f64) -> Vec<f64>> {
    sys: &'a PwsSystem,
    params: &'a RegularizationParams,
    path: P,
}

impl<P: Fn(f64) -> Vec<f64>> Continuation<'_, P> {
    fn table(&self, s: f64) -> Result<ProjectionTable> {
        self.sys.projections(&(self.path)(s))
    }

    /// Newton from the previous equilibrium; rejects jumps and exits from Q.
    fn track(&self, s: f64, from: FastPoint) -> Option<(FastPoint, [Complex64; 2])> {
        let w = self.table(s).ok()?;
        let (a, b) = newton_free(&w, (from.alpha, from.beta))?;
        if !(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0) {
            return None;
        }
        if (a - from.alpha).abs().max((b - from.beta).abs()) > 0.25 {
            return None;
        }
        let p = FastPoint::new(a, b);
        let report = fast_jacobian(&w, p, self.params).ok()?;
        Some((p, report.eigenvalues))
    }
}

/// Undamped Newton for the bilinear system without clipping to Q.
fn newton_free(w: &ProjectionTable, start: (f64, f64)) -> Option<(f64, f64)> {
    let (mut a, mut b) = start;
    let tol = 1e-13 * w.max_abs().max(1.0);
    for _ in 0..60 {
        let g = bilinear_residual(w, a, b);
        if g.0.abs().max(g.1.abs()) <= tol {
            return Some((a, b));
        }
        let j = bilinear_jacobian(w, a, b);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        a -= (j[1][1] * g.0 - j[0][1] * g.1) / det;
        b -= (-j[1][0] * g.0 + j[0][0] * g.1) / det;
        if !(a.is_finite() && b.is_finite()) || a.abs() > 10.0 || b.abs() > 10.0 {
            return None;
        }
    }
    None
}

fn leading_real(eig: &[Complex64; 2]) -> f64 {
    eig[0].re.max(eig[1].re)
}

/// Nearest edge of Q, labelled by the half-surface whose sliding field the edge represents.
fn nearest_edge(p: FastPoint) -> HalfSurface {
    let candidates = [
        (p.beta, HalfSurface::Sigma1Minus),
        (1.0 - p.beta, HalfSurface::Sigma1Plus),
        (p.alpha, HalfSurface::Sigma2Minus),
        (1.0 - p.alpha, HalfSurface::Sigma2Plus),
    ];
    candidates.into_iter().min_by(|x, y| x.0.total_cmp(&y.0)).map(|c| c.1).unwrap()
}

/// Natural-parameter continuation of the interior fast equilibrium along the
/// slow path `s -> y(s)` (a point of the manifold), reporting Hopf points,
/// folds, and collisions with `∂Q`, each bisected to a bracket of width `tol`.
/// The scan stops at the first fold or collision.
pub fn scan_bifurcation<P>(
    sys: &PwsSystem,
    params: &RegularizationParams,
    slow_path: P,
    s_range: (f64, f64),
    tol: f64,
) -> Result<Vec<BifurcationReport>>
where
    P: Fn(f64) -> Vec<f64>,
{
    let (s0, s1) = s_range;
    if !(tol > 0.0) {
        return Err(PwsError::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    if !(s1 > s0) {
        return Ok(Vec::new());
    }
    let cont = Continuation { sys, params, path: slow_path };
    let start = fast_equilibrium(&cont.table(s0)?)?;
    let (mut p, mut eig) = cont.track(s0, start).ok_or(PwsError::NoEquilibrium)?;
    let mut s = s0;
    let base_step = ((s1 - s0) / 400.0).max(tol);
    let mut step = base_step;
    let mut reports = Vec::new();

    while s < s1 {
        let s_next = (s + step).min(s1);
        match cont.track(s_next, p) {
            Some((pn, eig_n)) => {
                let (before, after) = (leading_real(&eig), leading_real(&eig_n));
                if (before < 0.0) != (after < 0.0) {
                    reports.push(bisect_crossing(&cont, (s, p, eig), (s_next, eig_n), tol));
                }
                s = s_next;
                p = pn;
                eig = eig_n;
                step = (step * 1.5).min(base_step);
            }
            None if step > 4.0 * tol => {
                // refine before concluding that the branch is lost
                step *= 0.25;
            }
            None => {
                reports.push(bisect_loss(&cont, (s, p, eig), s_next, tol));
                break;
            }
        }
    }
    Ok(reports)
}

fn bisect_crossing<P: Fn(f64) -> Vec<f64>>(
    cont: &Continuation<'_, P>,
    lo: (f64, FastPoint, [Complex64; 2]),
    hi: (f64, [Complex64; 2]),
    tol: f64,
) -> BifurcationReport {
    let (mut a, mut pa, mut ea) = lo;
    let (mut b, mut eb) = hi;
    let negative_at_a = leading_real(&ea) < 0.0;
    while b - a > tol {
        let m = 0.5 * (a + b);
        match cont.track(m, pa) {
            Some((pm, em)) if (leading_real(&em) < 0.0) == negative_at_a => {
                a = m;
                pa = pm;
                ea = em;
            }
            Some((_, em)) => {
                b = m;
                eb = em;
            }
            None => break,
        }
    }
    let complex = ea[0].im != 0.0 && eb[0].im != 0.0;
    BifurcationReport {
        kind: if complex { BifurcationKind::Hopf } else { BifurcationKind::SaddleNode },
        slow_value: 0.5 * (a + b),
        bracket: (a, b),
        eigen_evidence: [ea, eb],
    }
}

fn bisect_loss<P: Fn(f64) -> Vec<f64>>(
    cont: &Continuation<'_, P>,
    lo: (f64, FastPoint, [Complex64; 2]),
    hi: f64,
    tol: f64,
) -> BifurcationReport {
    let (mut a, mut pa, mut ea) = lo;
    let mut b = hi;
    while b - a > tol {
        let m = 0.5 * (a + b);
        match cont.track(m, pa) {
            Some((pm, em)) => {
                a = m;
                pa = pm;
                ea = em;
            }
            None => b = m,
        }
    }
    // evidence beyond the loss point: the reduced system's eigenvalues at the
    // last equilibrium evaluated with the far-side table
    let eb = cont
        .table(b)
        .map(|w| eigenvalues_2x2(&fast_jacobian_matrix(&w, pa, cont.params)))
        .unwrap_or(ea);
    let edge_distance = pa.alpha.min(1.0 - pa.alpha).min(pa.beta).min(1.0 - pa.beta);
    let kind =
        if edge_distance < 1e-3 { BifurcationKind::BoundaryCollision(nearest_edge(pa)) } else { BifurcationKind::SaddleNode };
    BifurcationReport { kind, slow_value: 0.5 * (a + b), bracket: (a, b), eigen_evidence: [ea, eb] }
}
