//! Piecewise-smooth systems with four regional vector fields separated by two
//! discontinuity surfaces, and the benchmark presets.
//!
//! Regions follow the sign pattern of `(h1, h2)`:
//!
//! | region | h1 | h2 |
//! |--------|----|----|
//! | R1     | <0 | <0 |
//! | R2     | <0 | >0 |
//! | R3     | >0 | <0 |
//! | R4     | >0 | >0 |
//!
//! so the zero-based field index of a region is `2·[h1>0] + [h2>0]`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{PwsError, Result};

/// Smooth vector field `x -> f(x)`, written into the output slice.
pub type VectorFieldFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// Smooth scalar map `x -> h(x)`.
pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Gradient evaluator `x -> ∇h(x)`, written into the output slice.
pub type GradientFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Labels of the four open regions and the three switching sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionId {
    R1,
    R2,
    R3,
    R4,
    OnSigma1,
    OnSigma2,
    OnSigma,
}

impl RegionId {
    pub const OPEN: [RegionId; 4] = [RegionId::R1, RegionId::R2, RegionId::R3, RegionId::R4];

    /// Zero-based index of the regional field, `None` on a switching surface.
    pub fn field_index(self) -> Option<usize> {
        match self {
            RegionId::R1 => Some(0),
            RegionId::R2 => Some(1),
            RegionId::R3 => Some(2),
            RegionId::R4 => Some(3),
            _ => None,
        }
    }

    pub fn from_field_index(j: usize) -> RegionId {
        RegionId::OPEN[j]
    }

    /// Signs `(s1, s2)` of `(h1, h2)` inside an open region.
    pub fn signs(self) -> Option<(f64, f64)> {
        self.field_index().map(region_signs)
    }

    pub fn is_open(self) -> bool {
        self.field_index().is_some()
    }

    pub fn label(self) -> &'static str {
        match self {
            RegionId::R1 => "R1",
            RegionId::R2 => "R2",
            RegionId::R3 => "R3",
            RegionId::R4 => "R4",
            RegionId::OnSigma1 => "Sigma1",
            RegionId::OnSigma2 => "Sigma2",
            RegionId::OnSigma => "Sigma",
        }
    }
}

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for RegionId {
    type Err = PwsError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "R1" => RegionId::R1,
            "R2" => RegionId::R2,
            "R3" => RegionId::R3,
            "R4" => RegionId::R4,
            "Sigma1" => RegionId::OnSigma1,
            "Sigma2" => RegionId::OnSigma2,
            "Sigma" => RegionId::OnSigma,
            other => return Err(PwsError::InvalidInput(format!("unknown region label `{other}`"))),
        })
    }
}

/// Signs of `(h1, h2)` for the zero-based field index `j`.
pub(crate) fn region_signs(j: usize) -> (f64, f64) {
    let s1 = if j >= 2 { 1.0 } else { -1.0 };
    let s2 = if j % 2 == 1 { 1.0 } else { -1.0 };
    (s1, s2)
}

/// Region label from surface values, with `|h| <= tol` counted as on the surface.
pub fn region_from_values(h1: f64, h2: f64, tol: f64) -> RegionId {
    let on1 = h1.abs() <= tol;
    let on2 = h2.abs() <= tol;
    match (on1, on2) {
        (true, true) => RegionId::OnSigma,
        (true, false) => RegionId::OnSigma1,
        (false, true) => RegionId::OnSigma2,
        (false, false) => RegionId::from_field_index(2 * usize::from(h1 > 0.0) + usize::from(h2 > 0.0)),
    }
}

/// A discontinuity surface `{h(x) = 0}`.
#[derive(Clone)]
pub struct Surface {
    value: ScalarFn,
    gradient: Option<GradientFn>,
}

impl Surface {
    /// Surface with an exact gradient.
    pub fn new(value: ScalarFn, gradient: GradientFn) -> Self {
        Self { value, gradient: Some(gradient) }
    }

    /// Surface whose gradient is taken by central differences.
    pub fn without_gradient(value: ScalarFn) -> Self {
        Self { value, gradient: None }
    }

    /// The coordinate hyperplane `{x_k = 0}`.
    pub fn coordinate(k: usize) -> Self {
        Self::new(
            Arc::new(move |x: &[f64]| x[k]),
            Arc::new(move |_x: &[f64], g: &mut [f64]| {
                g.iter_mut().for_each(|v| *v = 0.0);
                g[k] = 1.0;
            }),
        )
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        match &self.gradient {
            Some(g) => g(x, out),
            None => {
                let mut probe = x.to_vec();
                for k in 0..x.len() {
                    let step = 1e-6 * x[k].abs().max(1.0);
                    probe[k] = x[k] + step;
                    let up = (self.value)(&probe);
                    probe[k] = x[k] - step;
                    let down = (self.value)(&probe);
                    probe[k] = x[k];
                    out[k] = (up - down) / (2.0 * step);
                }
            }
        }
    }
}

/// A piecewise-smooth system `x' = f_j(x)` for `x ∈ R_j`, `j = 1..4`.
#[derive(Clone)]
pub struct PwsSystem {
    name: String,
    dim: usize,
    fields: [VectorFieldFn; 4],
    surfaces: [Surface; 2],
    canonical: bool,
}

impl fmt::Debug for PwsSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PwsSystem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("canonical", &self.canonical)
            .finish_non_exhaustive()
    }
}

impl PwsSystem {
    /// General system with user-supplied surfaces.
    pub fn new(name: impl Into<String>, dim: usize, fields: [VectorFieldFn; 4], surfaces: [Surface; 2]) -> Result<Self> {
        if dim < 3 {
            return Err(PwsError::InvalidInput(format!("state dimension must be at least 3, got {dim}")));
        }
        Ok(Self { name: name.into(), dim, fields, surfaces, canonical: false })
    }

    /// System with `h1(x) = x1`, `h2(x) = x2`.
    pub fn canonical(name: impl Into<String>, dim: usize, fields: [VectorFieldFn; 4]) -> Result<Self> {
        let mut sys = Self::new(name, dim, fields, [Surface::coordinate(0), Surface::coordinate(1)])?;
        sys.canonical = true;
        Ok(sys)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_canonical(&self) -> bool {
        self.canonical
    }

    /// Evaluates the regional field `f_{j+1}` (zero-based `j`).
    #[inline]
    pub fn eval_field(&self, j: usize, x: &[f64], out: &mut [f64]) {
        (self.fields[j])(x, out)
    }

    pub fn field(&self, j: usize) -> &VectorFieldFn {
        &self.fields[j]
    }

    /// `(h1(x), h2(x))`.
    #[inline]
    pub fn surface_values(&self, x: &[f64]) -> (f64, f64) {
        (self.surfaces[0].value(x), self.surfaces[1].value(x))
    }

    pub fn surface(&self, i: usize) -> &Surface {
        &self.surfaces[i]
    }

    pub fn gradient(&self, i: usize, x: &[f64], out: &mut [f64]) {
        self.surfaces[i].gradient(x, out)
    }

    pub fn classify_region(&self, x: &[f64], tol: f64) -> Result<RegionId> {
        check_state(self.dim, x)?;
        let (h1, h2) = self.surface_values(x);
        Ok(region_from_values(h1, h2, tol))
    }

    /// Normal projections `w[i][j] = ∇h_i(x)ᵀ f_j(x)`.
    pub fn projections(&self, x: &[f64]) -> Result<ProjectionTable> {
        check_state(self.dim, x)?;
        let n = self.dim;
        let mut grads = [vec![0.0; n], vec![0.0; n]];
        for (i, g) in grads.iter_mut().enumerate() {
            self.gradient(i, x, g);
        }
        let mut f = vec![0.0; n];
        let mut w = [[0.0; 4]; 2];
        for j in 0..4 {
            self.eval_field(j, x, &mut f);
            for i in 0..2 {
                w[i][j] = dot(&grads[i], &f);
            }
        }
        Ok(ProjectionTable { w, point: x.to_vec() })
    }

    /// Checks that the surface gradients are independent at every sample point
    /// (2×2 Gram determinant above `1e-10`).
    pub fn check_transversality(&self, points: &[Vec<f64>]) -> Result<()> {
        let n = self.dim;
        let (mut g1, mut g2) = (vec![0.0; n], vec![0.0; n]);
        for p in points {
            check_state(n, p)?;
            self.gradient(0, p, &mut g1);
            self.gradient(1, p, &mut g2);
            let gram = dot(&g1, &g1) * dot(&g2, &g2) - dot(&g1, &g2).powi(2);
            if !(gram > 1e-10) {
                return Err(PwsError::InvalidInput(format!(
                    "surface gradients are dependent at {p:?} (Gram determinant {gram:e})"
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn check_state(dim: usize, x: &[f64]) -> Result<()> {
    if x.len() != dim {
        return Err(PwsError::InvalidInput(format!("state has {} components, expected {dim}", x.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(PwsError::InvalidInput(format!("non-finite state {x:?}")));
    }
    Ok(())
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The 2×4 table of normal projections of the regional fields at a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionTable {
    /// `w[i][j]`: surface `i` (0 or 1), field `j` (0..4).
    pub w: [[f64; 4]; 2],
    pub point: Vec<f64>,
}

impl ProjectionTable {
    /// Table not tied to a state (synthetic analysis).
    pub fn from_matrix(w: [[f64; 4]; 2]) -> Self {
        Self { w, point: Vec::new() }
    }

    /// Table from the four columns `(w¹_j, w²_j)`.
    pub fn from_columns(cols: [(f64, f64); 4]) -> Self {
        let mut w = [[0.0; 4]; 2];
        for (j, (a, b)) in cols.into_iter().enumerate() {
            w[0][j] = a;
            w[1][j] = b;
        }
        Self::from_matrix(w)
    }

    pub fn column(&self, j: usize) -> (f64, f64) {
        (self.w[0][j], self.w[1][j])
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().flatten().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.w.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// The same table with every column multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.w.iter_mut().flatten().for_each(|v| *v *= c);
        out
    }
}

/// The four benchmark systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Loss of attractivity along a circle of tangential exit points.
    Tangential,
    /// Loss of attractivity at a non-tangential exit point.
    Nontangential,
    /// Spiral dynamics around the codimension-2 manifold.
    Spiral,
    /// A one-parameter family of Filippov sliding fields.
    Ambiguous,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Tangential, Preset::Nontangential, Preset::Spiral, Preset::Ambiguous];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Tangential => "tangential",
            Preset::Nontangential => "nontangential",
            Preset::Spiral => "spiral",
            Preset::Ambiguous => "ambiguous",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Preset::Nontangential | Preset::Spiral => 3,
            Preset::Tangential | Preset::Ambiguous => 4,
        }
    }

    pub fn system(self) -> PwsSystem {
        let fields = match self {
            Preset::Tangential => tangential_fields(),
            Preset::Nontangential => nontangential_fields(),
            Preset::Spiral => spiral_fields(),
            Preset::Ambiguous => ambiguous_fields(),
        };
        PwsSystem::canonical(self.name(), self.dim(), fields).expect("preset dimensions are valid")
    }

    /// Default initial condition.
    pub fn default_initial_condition(self) -> Vec<f64> {
        match self {
            Preset::Tangential => vec![1e-4, 1e-4, 0.0, 1.7_f64.sqrt()],
            Preset::Nontangential => vec![1e-5, 1e-5, 0.0],
            Preset::Spiral => vec![1e-6, 1e-6, 0.5],
            Preset::Ambiguous => vec![1e-2, 1e-2, 3.0, 0.9],
        }
    }

    /// Curve of potential exit points on the manifold.
    pub fn exit_locus(self) -> &'static str {
        match self {
            Preset::Tangential => "x3^2+x4^2=2",
            Preset::Nontangential => "x3=3",
            Preset::Spiral => "x3=1",
            Preset::Ambiguous => "(x3-3)^2+(x4-3)^2=4",
        }
    }

    /// Region of the manifold where every projection stays within `[-1, 1]`.
    pub fn validity_domain(self) -> &'static str {
        match self {
            Preset::Tangential => "1 <= x3^2+x4^2 <= 2.775",
            Preset::Nontangential => "-2 <= x3 <= 8",
            Preset::Spiral => "-3 <= x3 <= 3",
            Preset::Ambiguous => "4 <= (x3-3)^2+(x4-3)^2 <= 6",
        }
    }

    /// The exit statistic reported for this preset: `x3²+x4²` for the
    /// four-dimensional tangential system, `x3` otherwise.
    pub fn slow_coordinate(self, x: &[f64]) -> f64 {
        match self {
            Preset::Tangential => x[2] * x[2] + x[3] * x[3],
            Preset::Ambiguous => (x[2] - 3.0).powi(2) + (x[3] - 3.0).powi(2),
            Preset::Nontangential | Preset::Spiral => x[2],
        }
    }

    /// Value of [`Preset::slow_coordinate`] on the exit locus.
    pub fn locus_value(self) -> f64 {
        match self {
            Preset::Tangential => 2.0,
            Preset::Nontangential => 3.0,
            Preset::Spiral => 1.0,
            Preset::Ambiguous => 4.0,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = PwsError;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| PwsError::UnknownPreset(s.to_string()))
    }
}

pub fn load_preset(name: &str) -> Result<PwsSystem> {
    name.parse::<Preset>().map(Preset::system)
}

fn field(f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> VectorFieldFn {
    Arc::new(f)
}

fn tangential_fields() -> [VectorFieldFn; 4] {
    fn slow(x: &[f64], out: &mut [f64]) {
        out[2] = -0.4 * x[2] + x[3];
        out[3] = -0.4 * x[2] + 0.8 * x[3];
    }
    [
        field(|x, out| {
            out[0] = 0.25;
            out[1] = 2.0 - 0.9 / 4.0 - x[2] * x[2] - x[3] * x[3];
            slow(x, out);
        }),
        field(|x, out| {
            out[0] = 1.0;
            out[1] = -0.3;
            slow(x, out);
        }),
        field(|x, out| {
            out[0] = -1.0;
            out[1] = 0.9;
            slow(x, out);
        }),
        field(|x, out| {
            out[0] = -0.25;
            out[1] = -0.15;
            slow(x, out);
        }),
    ]
}

fn nontangential_fields() -> [VectorFieldFn; 4] {
    [
        field(|x, out| {
            out[0] = (3.0 - x[2]) / 5.0;
            out[1] = -0.2;
            out[2] = 1.0;
        }),
        field(|_, out| {
            out[0] = 0.2;
            out[1] = -0.2;
            out[2] = 1.0;
        }),
        field(|_, out| {
            out[0] = 0.2;
            out[1] = 0.4;
            out[2] = 1.0;
        }),
        field(|_, out| {
            out[0] = -1.0;
            out[1] = -0.2;
            out[2] = 1.0;
        }),
    ]
}

fn spiral_fields() -> [VectorFieldFn; 4] {
    [
        field(|x, out| {
            out[0] = 1.0 / 3.0;
            out[1] = -x[2] / 3.0;
            out[2] = 1.0;
        }),
        field(|_, out| {
            out[0] = -2.0 / 3.0;
            out[1] = -1.0;
            out[2] = 1.0;
        }),
        field(|_, out| {
            out[0] = 1.0 / 3.0;
            out[1] = 2.0 / 3.0;
            out[2] = 1.0;
        }),
        field(|_, out| {
            out[0] = -1.0 / 3.0;
            out[1] = 1.0;
            out[2] = 1.0;
        }),
    ]
}

fn ambiguous_fields() -> [VectorFieldFn; 4] {
    [
        field(|x, out| {
            out[0] = 0.5;
            out[1] = 1.0;
            out[2] = -x[2] + 0.5 * x[3];
            out[3] = x[3];
        }),
        field(|x, out| {
            out[0] = 1.0;
            out[1] = 0.5;
            out[2] = -x[2] + 0.5 * x[3];
            out[3] = x[3];
        }),
        field(|x, out| {
            out[0] = -(x[2] - 3.0).powi(2) - (x[3] - 3.0).powi(2) + 5.0;
            out[1] = 1.0;
            out[2] = -x[2] + 28.0 * x[3];
            out[3] = x[3];
        }),
        field(|x, out| {
            out[0] = -1.0;
            out[1] = -1.0;
            out[2] = -x[2] + 4.0 * x[3];
            out[3] = x[3];
        }),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn constant_system(cols: [[f64; 3]; 4]) -> PwsSystem {
        let fields = cols.map(|c| -> VectorFieldFn { Arc::new(move |_x: &[f64], out: &mut [f64]| out.copy_from_slice(&c)) });
        PwsSystem::canonical("constant", 3, fields).unwrap()
    }

    #[test]
    fn classify_region_examples() {
        let sys = Preset::Spiral.system();
        assert_eq!(sys.classify_region(&[-1.0, -1.0, 0.0], 0.0).unwrap(), RegionId::R1);
        assert_eq!(sys.classify_region(&[1e-3, -1.0, 0.0], 0.0).unwrap(), RegionId::R3);
        assert_eq!(sys.classify_region(&[0.0, 0.0, 5.0], 0.0).unwrap(), RegionId::OnSigma);
        assert_eq!(sys.classify_region(&[-1.0, 1.0, 0.0], 0.0).unwrap(), RegionId::R2);
        assert_eq!(sys.classify_region(&[1.0, 1.0, 0.0], 0.0).unwrap(), RegionId::R4);
        assert_eq!(sys.classify_region(&[0.0, 1.0, 0.0], 0.0).unwrap(), RegionId::OnSigma1);
        assert_eq!(sys.classify_region(&[1.0, 0.0, 0.0], 0.0).unwrap(), RegionId::OnSigma2);
        assert_eq!(sys.classify_region(&[1e-9, 0.5, 0.0], 1e-8).unwrap(), RegionId::OnSigma1);
    }

    #[test]
    fn classify_region_rejects_non_finite() {
        let sys = Preset::Spiral.system();
        assert!(matches!(sys.classify_region(&[f64::NAN, 0.0, 0.0], 0.0), Err(PwsError::InvalidInput(_))));
        assert!(matches!(sys.classify_region(&[0.0, 0.0], 0.0), Err(PwsError::InvalidInput(_))));
    }

    #[test]
    fn projection_examples() {
        let w = Preset::Spiral.system().projections(&[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(w.w[1][0], -1.0 / 3.0);
        let w = Preset::Nontangential.system().projections(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(w.column(0), (0.6, -0.2));
        let sys = constant_system([[0.0, 0.0, 1.0], [1.0, 0.0, 1.0], [0.0, 1.0, 1.0], [1.0, 1.0, 1.0]]);
        assert_eq!(sys.projections(&[0.1, 0.2, 0.3]).unwrap().column(0), (0.0, 0.0));
    }

    #[test]
    fn presets_match_their_equations() {
        let sys = load_preset("spiral").unwrap();
        assert_eq!(sys.dim(), 3);
        let mut f = [0.0; 3];
        for x3 in [-1.0, 0.0, 2.5] {
            sys.eval_field(1, &[0.3, -0.2, x3], &mut f);
            assert_eq!(f, [-2.0 / 3.0, -1.0, 1.0]);
        }
        let sys = load_preset("tangential").unwrap();
        let x = [0.1, -0.2, 0.7, -1.1];
        let mut f = [0.0; 4];
        for j in 0..4 {
            sys.eval_field(j, &x, &mut f);
            assert_eq!(f[2], -0.4 * 0.7 - 1.1);
            assert_eq!(f[3], -0.4 * 0.7 + 0.8 * -1.1);
        }
        let sys = load_preset("ambiguous").unwrap();
        sys.eval_field(2, &[0.0, 0.0, 2.0, 4.5], &mut f);
        assert_eq!(f[0], -1.0 - 2.25 + 5.0);
        assert!(Preset::ALL.iter().all(|p| p.system().is_canonical()));
    }

    #[test]
    fn unknown_preset_is_not_found() {
        assert_eq!(load_preset("bogus").unwrap_err(), PwsError::UnknownPreset("bogus".into()));
    }

    #[test]
    fn slow_components_shared_for_constructed_presets() {
        // The ambiguous system deliberately uses distinct slow components.
        for p in [Preset::Tangential, Preset::Nontangential, Preset::Spiral] {
            let sys = p.system();
            let n = sys.dim();
            let x: Vec<f64> = (0..n).map(|k| 0.3 * k as f64 - 0.4).collect();
            let mut first = vec![0.0; n];
            let mut other = vec![0.0; n];
            sys.eval_field(0, &x, &mut first);
            for j in 1..4 {
                sys.eval_field(j, &x, &mut other);
                assert_eq!(first[2..], other[2..], "{p} field {j}");
            }
        }
    }

    #[test]
    fn preset_projections_bounded_on_validity_domain() {
        let tang = Preset::Tangential.system();
        for k in 0..=50 {
            let rho = 1.0 + 1.775 * k as f64 / 50.0;
            let w = tang.projections(&[0.0, 0.0, 0.0, rho.sqrt()]).unwrap();
            assert!(w.max_abs() <= 1.0 + 1e-12, "rho={rho}");
        }
        let nt = Preset::Nontangential.system();
        let sp = Preset::Spiral.system();
        for k in 0..=50 {
            let t = -2.0 + 10.0 * k as f64 / 50.0;
            assert!(nt.projections(&[0.0, 0.0, t]).unwrap().max_abs() <= 1.0 + 1e-12);
            let s = -3.0 + 6.0 * k as f64 / 50.0;
            assert!(sp.projections(&[0.0, 0.0, s]).unwrap().max_abs() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn finite_difference_gradient_for_general_surface() {
        let surf = Surface::without_gradient(Arc::new(|x: &[f64]| x[0] + 0.5 * x[1] * x[1]));
        let mut g = [0.0; 3];
        surf.gradient(&[0.2, 2.0, 1.0], &mut g);
        assert!((g[0] - 1.0).abs() < 1e-8 && (g[1] - 2.0).abs() < 1e-8 && g[2].abs() < 1e-8);
    }

    #[test]
    fn transversality_check() {
        let sys = Preset::Nontangential.system();
        sys.check_transversality(&[vec![0.0, 0.0, 1.0], vec![1e-3, -1e-3, 4.0]]).unwrap();
        let fields = Preset::Spiral.system().fields.clone();
        let same = PwsSystem::new("degenerate", 3, fields, [Surface::coordinate(0), Surface::coordinate(0)]).unwrap();
        assert!(same.check_transversality(&[vec![0.0, 0.0, 0.0]]).is_err());
    }

    proptest! {
        #[test]
        fn region_constant_on_open_quadrants(a in 1e-9..10.0f64, b in 1e-9..10.0f64, c in 1e-9..10.0f64, d in 1e-9..10.0f64,
                                             s1 in prop::bool::ANY, s2 in prop::bool::ANY) {
            let (sa, sb) = (if s1 { 1.0 } else { -1.0 }, if s2 { 1.0 } else { -1.0 });
            prop_assert_eq!(region_from_values(sa * a, sb * b, 0.0), region_from_values(sa * c, sb * d, 0.0));
        }

        #[test]
        fn projections_are_linear_in_each_field(scale in -5.0..5.0f64, j in 0usize..4, x3 in -2.0..2.0f64) {
            let base = [[0.3, -0.1, 1.0], [0.7, 0.2, 1.0], [-0.4, 0.9, 1.0], [0.1, -0.6, 1.0]];
            let mut scaled = base;
            scaled[j].iter_mut().for_each(|v| *v *= scale);
            let x = [0.0, 0.0, x3];
            let w0 = constant_system(base).projections(&x).unwrap();
            let w1 = constant_system(scaled).projections(&x).unwrap();
            for k in 0..4 {
                let c = if k == j { scale } else { 1.0 };
                prop_assert!((w1.w[0][k] - c * w0.w[0][k]).abs() < 1e-14);
                prop_assert!((w1.w[1][k] - c * w0.w[1][k]).abs() < 1e-14);
            }
        }
    }
}
