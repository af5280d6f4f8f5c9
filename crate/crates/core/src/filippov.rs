//! Filippov sliding selectors on the codimension-2 manifold and the
//! attractivity / potential-exit classification.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{PwsError, Result};
use crate::model::{dot, region_signs, ProjectionTable, PwsSystem, RegionId};

/// One of the four half-surfaces `Σ₁⁻, Σ₁⁺, Σ₂⁻, Σ₂⁺` bounding the regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum HalfSurface {
    /// `h1 = 0, h2 < 0`, between R1 and R3.
    Sigma1Minus,
    /// `h1 = 0, h2 > 0`, between R2 and R4.
    Sigma1Plus,
    /// `h2 = 0, h1 < 0`, between R1 and R2.
    Sigma2Minus,
    /// `h2 = 0, h1 > 0`, between R3 and R4.
    Sigma2Plus,
}

impl HalfSurface {
    pub const ALL: [HalfSurface; 4] =
        [HalfSurface::Sigma1Minus, HalfSurface::Sigma1Plus, HalfSurface::Sigma2Minus, HalfSurface::Sigma2Plus];

    /// Index of the surface the half-surface lies on.
    pub fn surface(self) -> usize {
        match self {
            HalfSurface::Sigma1Minus | HalfSurface::Sigma1Plus => 0,
            HalfSurface::Sigma2Minus | HalfSurface::Sigma2Plus => 1,
        }
    }

    pub fn other_surface(self) -> usize {
        1 - self.surface()
    }

    /// Sign of the other surface function on this half-surface.
    pub fn side(self) -> f64 {
        match self {
            HalfSurface::Sigma1Minus | HalfSurface::Sigma2Minus => -1.0,
            HalfSurface::Sigma1Plus | HalfSurface::Sigma2Plus => 1.0,
        }
    }

    /// Field indices on the negative and positive side of the surface.
    pub fn adjacent_fields(self) -> (usize, usize) {
        match self {
            HalfSurface::Sigma1Minus => (0, 2),
            HalfSurface::Sigma1Plus => (1, 3),
            HalfSurface::Sigma2Minus => (0, 1),
            HalfSurface::Sigma2Plus => (2, 3),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            HalfSurface::Sigma1Minus => "Sigma1-",
            HalfSurface::Sigma1Plus => "Sigma1+",
            HalfSurface::Sigma2Minus => "Sigma2-",
            HalfSurface::Sigma2Plus => "Sigma2+",
        }
    }
}

impl fmt::Display for HalfSurface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Codimension-1 Filippov sliding: `field = (1-α) fa + α fb` with
/// `α = ∇hᵀfa / ∇hᵀ(fa - fb)`, `fa` on the side `h < 0`.
pub fn codim1_sliding(fa: &[f64], fb: &[f64], grad_h: &[f64]) -> Result<(f64, Vec<f64>)> {
    let pa = dot(grad_h, fa);
    let pb = dot(grad_h, fb);
    let denom = pa - pb;
    if denom == 0.0 {
        return Err(PwsError::DegenerateSliding);
    }
    if (pa > 0.0 && pb > 0.0) || (pa < 0.0 && pb < 0.0) {
        return Err(PwsError::NoSliding);
    }
    let alpha = pa / denom;
    let field = fa.iter().zip(fb).map(|(a, b)| (1.0 - alpha) * a + alpha * b).collect();
    Ok((alpha, field))
}

/// Sliding data on a half-surface derived from the projection table alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeSliding {
    pub half_surface: HalfSurface,
    /// Weight of the positive-side field.
    pub alpha: f64,
    /// Normal component of the sliding field with respect to the other surface.
    pub normal_other: f64,
    /// Both fields push toward the surface (otherwise the sliding is repulsive).
    pub attractive: bool,
}

impl EdgeSliding {
    /// Sliding motion heads toward the codimension-2 manifold.
    pub fn toward_sigma(&self) -> bool {
        self.normal_other * self.half_surface.side() < 0.0
    }

    pub fn away_from_sigma(&self) -> bool {
        self.normal_other * self.half_surface.side() > 0.0
    }
}

/// Codimension-1 sliding on `hs`, attractive or repulsive, if any.
pub fn edge_sliding(w: &ProjectionTable, hs: HalfSurface) -> Option<EdgeSliding> {
    let (a, b) = hs.adjacent_fields();
    let (i, o) = (hs.surface(), hs.other_surface());
    let (pa, pb) = (w.w[i][a], w.w[i][b]);
    if pa == pb {
        return None;
    }
    let attractive = pa >= 0.0 && pb <= 0.0;
    let repulsive = pa <= 0.0 && pb >= 0.0;
    if !(attractive || repulsive) {
        return None;
    }
    let alpha = pa / (pa - pb);
    let normal_other = (1.0 - alpha) * w.w[o][a] + alpha * w.w[o][b];
    Some(EdgeSliding { half_surface: hs, alpha, normal_other, attractive })
}

/// Bilinear weights `((1-α)(1-β), (1-α)β, α(1-β), αβ)`.
#[inline]
pub fn bilinear_weights(alpha: f64, beta: f64) -> [f64; 4] {
    [(1.0 - alpha) * (1.0 - beta), (1.0 - alpha) * beta, alpha * (1.0 - beta), alpha * beta]
}

/// `(g1, g2)`: the normal components of the bilinear combination.
#[inline]
pub fn bilinear_residual(w: &ProjectionTable, alpha: f64, beta: f64) -> (f64, f64) {
    let l = bilinear_weights(alpha, beta);
    let g = |r: &[f64; 4]| r[0] * l[0] + r[1] * l[1] + r[2] * l[2] + r[3] * l[3];
    (g(&w.w[0]), g(&w.w[1]))
}

/// Partial derivatives `[[∂g1/∂α, ∂g1/∂β], [∂g2/∂α, ∂g2/∂β]]`.
#[inline]
pub fn bilinear_jacobian(w: &ProjectionTable, alpha: f64, beta: f64) -> [[f64; 2]; 2] {
    let d_alpha = [-(1.0 - beta), -beta, 1.0 - beta, beta];
    let d_beta = [-(1.0 - alpha), 1.0 - alpha, -alpha, alpha];
    let mut j = [[0.0; 2]; 2];
    for i in 0..2 {
        j[i][0] = dot(&w.w[i], &d_alpha);
        j[i][1] = dot(&w.w[i], &d_beta);
    }
    j
}

const GRID: usize = 17;
const ROOT_MERGE: f64 = 1e-6;

fn residual_tolerance(w: &ProjectionTable) -> f64 {
    1e-13 * w.max_abs().max(1.0)
}

/// Damped Newton iteration for the bilinear system, projected onto the unit
/// square. Returns the converged point, if any.
pub(crate) fn newton_bilinear(w: &ProjectionTable, start: (f64, f64), max_iter: usize) -> Option<(f64, f64)> {
    let tol = residual_tolerance(w);
    let (mut a, mut b) = start;
    let norm = |g: (f64, f64)| g.0.hypot(g.1);
    let mut g = bilinear_residual(w, a, b);
    for _ in 0..max_iter {
        if g.0.abs().max(g.1.abs()) <= tol {
            return Some((a, b));
        }
        let j = bilinear_jacobian(w, a, b);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let da = -(j[1][1] * g.0 - j[0][1] * g.1) / det;
        let db = -(-j[1][0] * g.0 + j[0][0] * g.1) / det;
        let mut lambda = 1.0;
        let current = norm(g);
        loop {
            let na = (a + lambda * da).clamp(0.0, 1.0);
            let nb = (b + lambda * db).clamp(0.0, 1.0);
            let ng = bilinear_residual(w, na, nb);
            if norm(ng) < current || lambda < 1e-6 {
                if na == a && nb == b {
                    return None;
                }
                a = na;
                b = nb;
                g = ng;
                break;
            }
            lambda *= 0.5;
        }
    }
    (g.0.abs().max(g.1.abs()) <= tol).then_some((a, b))
}

/// All distinct roots of the bilinear system found in `[0,1]²` by damped Newton
/// from the centre followed by a 17×17 multistart grid.
pub fn bilinear_roots(w: &ProjectionTable) -> Vec<(f64, f64)> {
    let mut roots: Vec<(f64, f64)> = Vec::new();
    let mut push = |r: (f64, f64)| {
        if !roots.iter().any(|q| (q.0 - r.0).abs() < ROOT_MERGE && (q.1 - r.1).abs() < ROOT_MERGE) {
            roots.push(r);
        }
    };
    if let Some(r) = newton_bilinear(w, (0.5, 0.5), 100) {
        push(r);
    }
    for i in 0..GRID {
        for k in 0..GRID {
            let start = (i as f64 / (GRID - 1) as f64, k as f64 / (GRID - 1) as f64);
            if let Some(r) = newton_bilinear(w, start, 100) {
                push(r);
            }
        }
    }
    roots
}

pub(crate) fn is_interior(p: (f64, f64)) -> bool {
    const EDGE: f64 = 1e-9;
    p.0 > EDGE && p.0 < 1.0 - EDGE && p.1 > EDGE && p.1 < 1.0 - EDGE
}

/// Coefficients `(α, β)` of the bilinear sliding field.
///
/// A unique interior root is returned even when tangential boundary roots
/// coexist with it; a single boundary root is returned when no interior root
/// exists. Anything else is reported as [`PwsError::Ambiguous`].
pub fn bilinear_coeffs(w: &ProjectionTable) -> Result<(f64, f64)> {
    let roots = bilinear_roots(w);
    let interior: Vec<_> = roots.iter().copied().filter(|&p| is_interior(p)).collect();
    match (interior.len(), roots.len()) {
        (1, _) => Ok(interior[0]),
        (0, 0) => Err(PwsError::NoEquilibrium),
        (0, 1) => Ok(roots[0]),
        _ => Err(PwsError::Ambiguous { roots }),
    }
}

/// Filippov weights selected by the moments closure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentsWeights {
    pub lambdas: [f64; 4],
    /// Max residual over the four defining equations.
    pub residual: f64,
    /// All weights are nonnegative (to `-1e-12`).
    pub admissible: bool,
}

/// Solves the Filippov system closed by the moments row
/// `d1 λ1 - d2 λ2 - d3 λ3 + d4 λ4 = 0`, `d_j = ‖(w¹_j, w²_j)‖₂`.
pub fn moments_coeffs(w: &ProjectionTable) -> Result<MomentsWeights> {
    let d: Vec<f64> = (0..4).map(|j| w.w[0][j].hypot(w.w[1][j])).collect();
    #[rustfmt::skip]
    let m = Matrix4::new(
        w.w[0][0], w.w[0][1], w.w[0][2], w.w[0][3],
        w.w[1][0], w.w[1][1], w.w[1][2], w.w[1][3],
        1.0, 1.0, 1.0, 1.0,
        d[0], -d[1], -d[2], d[3],
    );
    let sv = m.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let condition = if smin == 0.0 { f64::INFINITY } else { smax / smin };
    if condition > 1e14 {
        return Err(PwsError::SingularSystem { condition });
    }
    let rhs = Vector4::new(0.0, 0.0, 1.0, 0.0);
    let lu = m.lu();
    let mut x = lu.solve(&rhs).ok_or(PwsError::SingularSystem { condition })?;
    // one step of iterative refinement
    let r = rhs - m * x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    let residual = (rhs - m * x).amax();
    let lambdas = [x[0], x[1], x[2], x[3]];
    Ok(MomentsWeights { lambdas, residual, admissible: lambdas.iter().all(|&l| l >= -1e-12) })
}

/// A Filippov sliding vector field on the manifold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlidingSelection {
    pub lambdas: [f64; 4],
    pub alpha_beta: Option<(f64, f64)>,
    pub field: Vec<f64>,
    /// Max absolute normal component of `field`.
    pub residual: f64,
}

impl SlidingSelection {
    /// Combines the regional fields of `sys` at `x` with weights `lambdas`.
    pub fn assemble(sys: &PwsSystem, x: &[f64], lambdas: [f64; 4], alpha_beta: Option<(f64, f64)>) -> Self {
        let n = sys.dim();
        let mut field = vec![0.0; n];
        let mut f = vec![0.0; n];
        for (j, l) in lambdas.iter().enumerate() {
            sys.eval_field(j, x, &mut f);
            field.iter_mut().zip(&f).for_each(|(acc, v)| *acc += l * v);
        }
        let mut grad = vec![0.0; n];
        let mut residual = 0.0_f64;
        for i in 0..2 {
            sys.gradient(i, x, &mut grad);
            residual = residual.max(dot(&grad, &field).abs());
        }
        Self { lambdas, alpha_beta, field, residual }
    }
}

/// Bilinear sliding field at `x`.
pub fn bilinear_selection(sys: &PwsSystem, x: &[f64]) -> Result<SlidingSelection> {
    let w = sys.projections(x)?;
    let (a, b) = bilinear_coeffs(&w)?;
    Ok(SlidingSelection::assemble(sys, x, bilinear_weights(a, b), Some((a, b))))
}

/// Moments sliding field at `x`.
pub fn moments_selection(sys: &PwsSystem, x: &[f64]) -> Result<SlidingSelection> {
    let w = sys.projections(x)?;
    let m = moments_coeffs(&w)?;
    Ok(SlidingSelection::assemble(sys, x, m.lambdas, None))
}

/// Direction of rotation around the manifold in the `(h1, h2)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    Clockwise,
    CounterClockwise,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttractivityKind {
    NodallyAttractive,
    AttractiveUponSliding(BTreeSet<HalfSurface>),
    SpirallyAttractive(Orientation),
    NotAttractive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attractivity {
    pub kind: AttractivityKind,
    /// `w²₁w¹₃w²₄w¹₂ / (w¹₁w²₃w¹₄w²₂)`, reported for rotational crossing patterns.
    pub spiral_ratio: Option<f64>,
    /// Some projection is exactly zero; the classification uses sign conventions.
    pub non_generic: bool,
}

/// Ratio deciding spiral attractivity (attractive below one).
pub fn spiral_ratio(w: &ProjectionTable) -> f64 {
    let p = &w.w;
    (p[1][0] * p[0][2] * p[1][3] * p[0][1]) / (p[0][0] * p[1][2] * p[0][3] * p[1][1])
}

/// Crossing pattern: each region's field points toward exactly one of the two
/// surfaces and the induced region map is a 4-cycle.
pub fn rotation(w: &ProjectionTable) -> Option<Orientation> {
    let mut next = [0usize; 4];
    for j in 0..4 {
        let (s1, s2) = region_signs(j);
        let toward1 = w.w[0][j] * s1 < 0.0;
        let toward2 = w.w[1][j] * s2 < 0.0;
        next[j] = match (toward1, toward2) {
            (true, false) => j ^ 2,
            (false, true) => j ^ 1,
            _ => return None,
        };
    }
    let mut seen = [false; 4];
    let mut j = 0;
    for _ in 0..4 {
        if seen[j] {
            return None;
        }
        seen[j] = true;
        j = next[j];
    }
    if j != 0 {
        return None;
    }
    // R1 -> R3 runs along h2 < 0 with h1 increasing
    Some(if next[0] == 2 { Orientation::CounterClockwise } else { Orientation::Clockwise })
}

/// Attractivity of the manifold from the sign structure of the projections.
///
/// A region whose field points away from both surfaces, or an attractive
/// sliding motion leaving the manifold, makes it not attractive.
pub fn classify_attractivity(w: &ProjectionTable) -> Attractivity {
    let non_generic = w.w.iter().flatten().any(|&v| v == 0.0);
    let slides: Vec<EdgeSliding> = HalfSurface::ALL.iter().filter_map(|&hs| edge_sliding(w, hs)).collect();
    let escaping_region = (0..4).any(|j| {
        let (s1, s2) = region_signs(j);
        w.w[0][j] * s1 > 0.0 && w.w[1][j] * s2 > 0.0
    });
    let escaping_slide = slides.iter().any(|s| s.attractive && s.away_from_sigma());
    let toward: BTreeSet<HalfSurface> =
        slides.iter().filter(|s| s.attractive && s.toward_sigma()).map(|s| s.half_surface).collect();
    let orientation = rotation(w);
    let spiral_ratio = orientation.map(|_| spiral_ratio(w));

    let kind = if escaping_region || escaping_slide {
        AttractivityKind::NotAttractive
    } else if toward.len() == 4 {
        AttractivityKind::NodallyAttractive
    } else if !toward.is_empty() {
        AttractivityKind::AttractiveUponSliding(toward)
    } else {
        match (orientation, spiral_ratio) {
            (Some(o), Some(r)) if r < 1.0 => AttractivityKind::SpirallyAttractive(o),
            _ => AttractivityKind::NotAttractive,
        }
    };
    Attractivity { kind, spiral_ratio, non_generic }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExitKind {
    /// A codimension-1 sliding field on the half-surface is tangent to the manifold.
    TangentialExit(HalfSurface),
    /// A regional field is tangent to a surface and points away from the manifold.
    NonTangentialExit(RegionId),
    SpiralExit,
    None,
}

impl fmt::Display for ExitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExitKind::TangentialExit(hs) => write!(f, "tangential exit along {hs}"),
            ExitKind::NonTangentialExit(r) => write!(f, "non-tangential exit into {r}"),
            ExitKind::SpiralExit => f.write_str("spiral exit"),
            ExitKind::None => f.write_str("none"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitClassification {
    pub kind: ExitKind,
    /// The defining scalar changes at first order along the probe direction.
    pub first_order: bool,
}

const EXIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
enum DefiningScalar {
    SlidingNormal(HalfSurface),
    Projection(usize, usize),
    SpiralRatio,
}

impl DefiningScalar {
    fn eval(self, w: &ProjectionTable) -> f64 {
        match self {
            DefiningScalar::SlidingNormal(hs) => {
                let (a, b) = hs.adjacent_fields();
                let i = hs.surface();
                let alpha = w.w[i][a] / (w.w[i][a] - w.w[i][b]);
                (1.0 - alpha) * w.w[hs.other_surface()][a] + alpha * w.w[hs.other_surface()][b]
            }
            DefiningScalar::Projection(i, j) => w.w[i][j],
            DefiningScalar::SpiralRatio => spiral_ratio(w),
        }
    }
}

fn exit_candidates(w: &ProjectionTable) -> Vec<(ExitKind, DefiningScalar)> {
    let mut out = Vec::new();
    for hs in HalfSurface::ALL {
        if let Some(s) = edge_sliding(w, hs) {
            if s.attractive && s.normal_other.abs() <= EXIT_TOL {
                out.push((ExitKind::TangentialExit(hs), DefiningScalar::SlidingNormal(hs)));
            }
        }
    }
    for j in 0..4 {
        let (s1, s2) = region_signs(j);
        let signs = [s1, s2];
        for i in 0..2 {
            let o = 1 - i;
            if w.w[i][j].abs() <= EXIT_TOL && w.w[o][j] * signs[o] > EXIT_TOL {
                out.push((ExitKind::NonTangentialExit(RegionId::from_field_index(j)), DefiningScalar::Projection(i, j)));
            }
        }
    }
    if rotation(w).is_some() && (spiral_ratio(w) - 1.0).abs() <= EXIT_TOL {
        out.push((ExitKind::SpiralExit, DefiningScalar::SpiralRatio));
    }
    out
}

/// Classifies `x` (on the manifold) as a potential exit point.
///
/// `direction_probe` is the velocity along which the defining scalar is
/// differentiated to decide whether the exit is of first order.
pub fn detect_potential_exit(sys: &PwsSystem, x: &[f64], direction_probe: &[f64]) -> Result<ExitClassification> {
    let (h1, h2) = sys.surface_values(x);
    if h1.abs() > 1e-9 || h2.abs() > 1e-9 {
        return Err(PwsError::InvalidInput(format!("point is not on the manifold (h = ({h1:e}, {h2:e}))")));
    }
    if direction_probe.len() != x.len() {
        return Err(PwsError::InvalidInput("probe direction has the wrong dimension".into()));
    }
    let w = sys.projections(x)?;
    let candidates = exit_candidates(&w);
    let (kind, scalar) = match candidates.as_slice() {
        [] => return Ok(ExitClassification { kind: ExitKind::None, first_order: false }),
        [one] => *one,
        many => return Err(PwsError::NonGenericPoint(many.iter().map(|(k, _)| k.to_string()).collect())),
    };
    let h = 1e-6;
    let shifted = |sign: f64| -> Result<f64> {
        let xs: Vec<f64> = x.iter().zip(direction_probe).map(|(a, v)| a + sign * h * v).collect();
        Ok(scalar.eval(&sys.projections(&xs)?))
    };
    let derivative = (shifted(1.0)? - shifted(-1.0)?) / (2.0 * h);
    Ok(ExitClassification { kind, first_order: derivative.abs() > EXIT_TOL })
}
