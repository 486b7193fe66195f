//! Model asymptotically cylindrical manifolds.
//!
//! Every model is a warped product `dt² + w(t)² g_X` over a flat cross-section
//! `X` (a circle or a flat 2-torus). Two topologies are supported: a two-ended
//! cylinder on `t ∈ [-R, R]` and a one-ended capped surface (the cigar) on
//! `t ∈ [0, R]` whose warp vanishes at a smooth tip.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discretize::grid::{CrossMesh, Grid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid manifold field `{field}`: {reason}")]
    InvalidField { field: &'static str, reason: String },
    #[error("truncation length {r} is below the decay requirement 5/|beta| = {required}")]
    TruncationTooShort { r: f64, required: f64 },
    #[error("a cigar cap admits exactly one end, got {ends}")]
    CigarWithTwoEnds { ends: usize },
    #[error("operation requires a two-dimensional model (circle cross-section)")]
    NotTwoDimensional,
}

fn invalid(field: &'static str, reason: impl Into<String>) -> GeometryError {
    GeometryError::InvalidField {
        field,
        reason: reason.into(),
    }
}

/// Compact, connected flat cross-section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CrossSection {
    Circle { radius: f64, mesh_points: usize },
    FlatTorus { r1: f64, r2: f64, mesh_points: usize },
}

impl CrossSection {
    pub fn circle(radius: f64, mesh_points: usize) -> Self {
        CrossSection::Circle {
            radius,
            mesh_points,
        }
    }

    pub fn flat_torus(r1: f64, r2: f64, mesh_points: usize) -> Self {
        CrossSection::FlatTorus { r1, r2, mesh_points }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let (radii, n) = match *self {
            CrossSection::Circle {
                radius,
                mesh_points,
            } => (vec![radius], mesh_points),
            CrossSection::FlatTorus { r1, r2, mesh_points } => (vec![r1, r2], mesh_points),
        };
        if radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(invalid("cross_section.radius", "radii must be positive"));
        }
        if n < 8 || n % 2 != 0 {
            return Err(invalid(
                "cross_section.mesh_points",
                format!("need an even count >= 8, got {n}"),
            ));
        }
        Ok(())
    }

    /// Radii of the circle factors.
    pub fn radii(&self) -> Vec<f64> {
        match *self {
            CrossSection::Circle { radius, .. } => vec![radius],
            CrossSection::FlatTorus { r1, r2, .. } => vec![r1, r2],
        }
    }

    pub fn mesh_points(&self) -> usize {
        match *self {
            CrossSection::Circle { mesh_points, .. } | CrossSection::FlatTorus { mesh_points, .. } => {
                mesh_points
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.radii().len()
    }

    /// Riemannian volume of `X` with its own flat metric.
    pub fn volume(&self) -> f64 {
        self.radii()
            .iter()
            .map(|r| 2.0 * std::f64::consts::PI * r)
            .product()
    }

    /// Number of connected components; every model cross-section is connected.
    pub fn b0(&self) -> usize {
        1
    }

    /// The same cross-section with all radii multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match *self {
            CrossSection::Circle {
                radius,
                mesh_points,
            } => CrossSection::Circle {
                radius: radius * factor,
                mesh_points,
            },
            CrossSection::FlatTorus { r1, r2, mesh_points } => CrossSection::FlatTorus {
                r1: r1 * factor,
                r2: r2 * factor,
                mesh_points,
            },
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            CrossSection::Circle { .. } => "circle",
            CrossSection::FlatTorus { .. } => "flat_torus",
        }
    }
}

fn sech(u: f64) -> f64 {
    let e = (-u.abs()).exp();
    2.0 * e / (1.0 + e * e)
}

/// Warp function `w(t)` of the product metric `dt² + w² g_X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WarpProfile {
    Constant {
        c: f64,
    },
    /// `base + amplitude·sech((t - center)/width)`
    SechBump {
        base: f64,
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// `base + amplitude·(1 - u²)³` for `|u| < 1`, `u = (t - center)/width`;
    /// exactly cylindrical outside the support.
    CompactBump {
        base: f64,
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// `scale·tanh(t/scale)` on `t >= 0`.
    Cigar {
        scale: f64,
    },
}

impl WarpProfile {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let finite = |x: f64| x.is_finite();
        match *self {
            WarpProfile::Constant { c } => {
                if !(finite(c) && c > 0.0) {
                    return Err(invalid("warp.c", "constant warp must be positive"));
                }
            }
            WarpProfile::SechBump {
                base,
                amplitude,
                center,
                width,
            }
            | WarpProfile::CompactBump {
                base,
                amplitude,
                center,
                width,
            } => {
                if !(finite(base) && finite(amplitude) && finite(center)) {
                    return Err(invalid("warp", "non-finite profile parameter"));
                }
                if !(finite(width) && width > 0.0) {
                    return Err(invalid("warp.width", "width must be positive"));
                }
                if base + amplitude.min(0.0) <= 0.0 || base <= 0.0 {
                    return Err(invalid("warp.amplitude", "warp must stay positive"));
                }
            }
            WarpProfile::Cigar { scale } => {
                if !(finite(scale) && scale > 0.0) {
                    return Err(invalid("warp.scale", "cigar scale must be positive"));
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, t: f64) -> f64 {
        match *self {
            WarpProfile::Constant { c } => c,
            WarpProfile::SechBump {
                base,
                amplitude,
                center,
                width,
            } => base + amplitude * sech((t - center) / width),
            WarpProfile::CompactBump {
                base,
                amplitude,
                center,
                width,
            } => {
                let u = (t - center) / width;
                if u.abs() >= 1.0 {
                    base
                } else {
                    base + amplitude * (1.0 - u * u).powi(3)
                }
            }
            WarpProfile::Cigar { scale } => scale * (t / scale).tanh(),
        }
    }

    pub fn d1(&self, t: f64) -> f64 {
        match *self {
            WarpProfile::Constant { .. } => 0.0,
            WarpProfile::SechBump {
                amplitude,
                center,
                width,
                ..
            } => {
                let u = (t - center) / width;
                -amplitude * sech(u) * u.tanh() / width
            }
            WarpProfile::CompactBump {
                amplitude,
                center,
                width,
                ..
            } => {
                let u = (t - center) / width;
                if u.abs() >= 1.0 {
                    0.0
                } else {
                    -6.0 * amplitude * u * (1.0 - u * u).powi(2) / width
                }
            }
            WarpProfile::Cigar { scale } => sech(t / scale).powi(2),
        }
    }

    pub fn d2(&self, t: f64) -> f64 {
        match *self {
            WarpProfile::Constant { .. } => 0.0,
            WarpProfile::SechBump {
                amplitude,
                center,
                width,
                ..
            } => {
                let u = (t - center) / width;
                let s = sech(u);
                let th = u.tanh();
                amplitude * (s * th * th - s * s * s) / (width * width)
            }
            WarpProfile::CompactBump {
                amplitude,
                center,
                width,
                ..
            } => {
                let u = (t - center) / width;
                if u.abs() >= 1.0 {
                    0.0
                } else {
                    let v = 1.0 - u * u;
                    amplitude * (-6.0 * v * v + 24.0 * u * u * v) / (width * width)
                }
            }
            WarpProfile::Cigar { scale } => {
                let u = t / scale;
                -2.0 / scale * sech(u).powi(2) * u.tanh()
            }
        }
    }

    /// Limit of `w` along the ends.
    pub fn limit(&self) -> f64 {
        match *self {
            WarpProfile::Constant { c } => c,
            WarpProfile::SechBump { base, .. } | WarpProfile::CompactBump { base, .. } => base,
            WarpProfile::Cigar { scale } => scale,
        }
    }

    /// Exponential rate `beta < 0` with `|w - w_inf| = O(e^{beta t})`;
    /// `None` when the ends are exactly cylindrical beyond a compact set.
    pub fn decay_rate(&self) -> Option<f64> {
        match *self {
            WarpProfile::Constant { .. } | WarpProfile::CompactBump { .. } => None,
            WarpProfile::SechBump { width, .. } => Some(-1.0 / width),
            WarpProfile::Cigar { scale } => Some(-2.0 / scale),
        }
    }

    /// Gaussian curvature `-w''/w` of `dt² + w² dθ²`.
    pub fn curvature(&self, t: f64) -> f64 {
        match *self {
            WarpProfile::Cigar { scale } => 2.0 / (scale * scale) * sech(t / scale).powi(2),
            _ => -self.d2(t) / self.value(t),
        }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self, WarpProfile::Constant { .. })
    }

    /// `∫ w(s) ds` over `[a, b]`, composite Simpson with 256 panels.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        let n = 256;
        let h = (b - a) / n as f64;
        let mut acc = self.value(a) + self.value(b);
        for k in 1..n {
            let c = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += c * self.value(a + k as f64 * h);
        }
        acc * h / 3.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    TwoEndCylinder,
    OneEndCapped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndSpec {
    pub cross_section: CrossSection,
    /// `+1` when the end coordinate increases with the global `t`.
    pub orientation: i8,
}

fn default_core_radius() -> f64 {
    2.0
}

/// Declarative description of a model manifold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSpec {
    pub topology: Topology,
    pub cross_section: CrossSection,
    pub warp: WarpProfile,
    /// Global `t` extent kept on each end: `[-R, R]` or `[0, R]`.
    pub truncation_r: f64,
    /// Target `t` spacing; the actual spacing divides `R` evenly.
    pub grid_h: f64,
    /// End charts start at `|t| = core_radius`; the compact core `K` lies inside.
    #[serde(default = "default_core_radius")]
    pub core_radius: f64,
}

impl ManifoldSpec {
    pub fn new(
        topology: Topology,
        cross_section: CrossSection,
        warp: WarpProfile,
        truncation_r: f64,
        grid_h: f64,
    ) -> Self {
        ManifoldSpec {
            topology,
            cross_section,
            warp,
            truncation_r,
            grid_h,
            core_radius: default_core_radius(),
        }
    }

    pub fn with_core_radius(mut self, core_radius: f64) -> Self {
        self.core_radius = core_radius;
        self
    }

    pub fn flat_cylinder(radius: f64, mesh_points: usize, r: f64, h: f64) -> Self {
        Self::new(
            Topology::TwoEndCylinder,
            CrossSection::circle(radius, mesh_points),
            WarpProfile::Constant { c: 1.0 },
            r,
            h,
        )
    }

    pub fn sech_cylinder(amplitude: f64, mesh_points: usize, r: f64, h: f64) -> Self {
        Self::new(
            Topology::TwoEndCylinder,
            CrossSection::circle(1.0, mesh_points),
            WarpProfile::SechBump {
                base: 1.0,
                amplitude,
                center: 0.0,
                width: 1.0,
            },
            r,
            h,
        )
    }

    pub fn cigar(scale: f64, mesh_points: usize, r: f64, h: f64) -> Self {
        Self::new(
            Topology::OneEndCapped,
            CrossSection::circle(1.0, mesh_points),
            WarpProfile::Cigar { scale },
            r,
            h,
        )
    }

    pub fn ends(&self) -> Vec<EndSpec> {
        let end = |orientation| EndSpec {
            cross_section: self.cross_section,
            orientation,
        };
        match self.topology {
            Topology::TwoEndCylinder => vec![end(1), end(-1)],
            Topology::OneEndCapped => vec![end(1)],
        }
    }

    /// Number of ends `ℓ`.
    pub fn end_count(&self) -> usize {
        match self.topology {
            Topology::TwoEndCylinder => 2,
            Topology::OneEndCapped => 1,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        self.cross_section.validate()?;
        self.warp.validate()?;
        let is_cigar = matches!(self.warp, WarpProfile::Cigar { .. });
        match self.topology {
            Topology::TwoEndCylinder if is_cigar => {
                return Err(GeometryError::CigarWithTwoEnds { ends: 2 })
            }
            Topology::OneEndCapped if !is_cigar => {
                return Err(invalid("topology", "a one-ended model needs the cigar warp"))
            }
            _ => {}
        }
        if is_cigar {
            match self.cross_section {
                CrossSection::Circle { radius, .. } if (radius - 1.0).abs() <= 1e-12 => {}
                _ => {
                    return Err(invalid(
                        "cross_section",
                        "the cigar tip is smooth only over the unit circle",
                    ))
                }
            }
        }
        if !(self.truncation_r.is_finite() && self.truncation_r > 0.0) {
            return Err(invalid("truncation_r", "must be positive"));
        }
        if !(self.grid_h.is_finite() && self.grid_h > 0.0) {
            return Err(invalid("grid_h", "must be positive"));
        }
        if self.grid_h * 8.0 > self.truncation_r {
            return Err(invalid("grid_h", "fewer than 8 intervals per end"));
        }
        if !(self.core_radius.is_finite() && self.core_radius >= 1.0) {
            return Err(invalid("core_radius", "must be at least 1"));
        }
        if self.core_radius >= self.truncation_r {
            return Err(invalid("core_radius", "core extends past the truncation"));
        }
        if let Some(beta) = self.warp.decay_rate() {
            let required = 5.0 / beta.abs();
            if self.truncation_r < required - 1e-12 {
                return Err(GeometryError::TruncationTooShort {
                    r: self.truncation_r,
                    required,
                });
            }
        }
        Ok(())
    }

    /// Cross-section seen at infinity: `X` rescaled by `w(∞)`.
    pub fn asymptotic_cross_section(&self) -> CrossSection {
        self.cross_section.scaled(self.warp.limit())
    }

    /// Number of `t` intervals on the grid.
    pub fn intervals(&self) -> usize {
        let per_side = (self.truncation_r / self.grid_h).round().max(1.0) as usize;
        match self.topology {
            Topology::TwoEndCylinder => 2 * per_side,
            Topology::OneEndCapped => per_side,
        }
    }

    pub fn t_range(&self) -> (f64, f64) {
        match self.topology {
            Topology::TwoEndCylinder => (-self.truncation_r, self.truncation_r),
            Topology::OneEndCapped => (0.0, self.truncation_r),
        }
    }
}

/// Metric coefficients sampled on the `t` nodes.
///
/// All models are invariant under the cross-section isometries, so each
/// component is stored once per ring of nodes.
#[derive(Debug, Clone)]
pub struct MetricField {
    pub radii: Vec<f64>,
    pub warp: Vec<f64>,
    pub warp_d1: Vec<f64>,
    /// `g_tt`, identically one for warped products.
    pub g_tt: Vec<f64>,
    /// `g_{φ_k φ_k} = r_k² w²` for each circle factor `k`.
    pub g_xx: Vec<Vec<f64>>,
    pub sqrt_det_g: Vec<f64>,
    /// `Γ^t_{φ_k φ_k} = -r_k² w w'`.
    pub christoffel_t_xx: Vec<Vec<f64>>,
    /// `Γ^{φ_k}_{t φ_k} = w'/w` (undefined at a tip, stored as NaN).
    pub christoffel_x_tx: Vec<f64>,
}

impl MetricField {
    pub fn sample(t_nodes: &[f64], cross: &CrossSection, warp: &WarpProfile) -> Self {
        let radii = cross.radii();
        let d = radii.len() as i32;
        let w: Vec<f64> = t_nodes.iter().map(|&t| warp.value(t)).collect();
        let wp: Vec<f64> = t_nodes.iter().map(|&t| warp.d1(t)).collect();
        let g_xx = radii
            .iter()
            .map(|r| w.iter().map(|wi| r * r * wi * wi).collect())
            .collect();
        let rprod: f64 = radii.iter().product();
        let sqrt_det_g = w.iter().map(|wi| rprod * wi.powi(d)).collect();
        let christoffel_t_xx = radii
            .iter()
            .map(|r| w.iter().zip(&wp).map(|(wi, di)| -r * r * wi * di).collect())
            .collect();
        let christoffel_x_tx = w
            .iter()
            .zip(&wp)
            .map(|(wi, di)| if *wi > 0.0 { di / wi } else { f64::NAN })
            .collect();
        MetricField {
            g_tt: vec![1.0; t_nodes.len()],
            radii,
            warp: w,
            warp_d1: wp,
            g_xx,
            sqrt_det_g,
            christoffel_t_xx,
            christoffel_x_tx,
        }
    }
}

/// A built model: immutable spec, grid and sampled metric.
#[derive(Debug, Clone)]
pub struct Manifold {
    pub spec: ManifoldSpec,
    pub grid: Grid,
    pub metric: MetricField,
}

/// Samples the metric of `spec` on its tensor-product grid.
pub fn build_manifold(spec: &ManifoldSpec) -> Result<Manifold, GeometryError> {
    spec.validate()?;
    let (t0, t1) = spec.t_range();
    let tip = spec.topology == Topology::OneEndCapped;
    let cross = CrossMesh::from_cross_section(&spec.cross_section);
    let grid = Grid::uniform(t0, t1, spec.intervals(), cross, tip);
    let metric = MetricField::sample(grid.t_nodes(), &spec.cross_section, &spec.warp);
    Ok(Manifold {
        spec: spec.clone(),
        grid,
        metric,
    })
}

impl Manifold {
    pub fn end_count(&self) -> usize {
        self.spec.end_count()
    }

    /// Gaussian curvature on the `t` nodes (two-dimensional models only).
    pub fn gaussian_curvature(&self) -> Result<Vec<f64>, GeometryError> {
        gaussian_curvature(&self.spec, self.grid.t_nodes())
    }

    pub fn volume_form(&self) -> VolumeForm {
        volume_form(self)
    }

    pub fn end_coordinates(&self, t: f64) -> EndPoint {
        end_coordinates(&self.spec, t)
    }

    /// Exact measure of the cross-section `X × {t}`.
    pub fn slice_volume(&self, t: f64) -> f64 {
        let d = self.spec.cross_section.dim() as i32;
        self.spec.cross_section.volume() * self.spec.warp.value(t).powi(d)
    }

    /// Measure of the cross-section at the outer face of end `i`'s last cell,
    /// where the discrete divergence theorem places the boundary flux.
    pub fn boundary_face_volume(&self, end: usize) -> f64 {
        let h = self.grid.h_t();
        let r = self.spec.truncation_r - 0.5 * h;
        let t = if end == 0 { r } else { -r };
        self.slice_volume(t)
    }
}

/// `K = -w''/w` on the given nodes; errors for the 3-D torus models.
pub fn gaussian_curvature(spec: &ManifoldSpec, t_nodes: &[f64]) -> Result<Vec<f64>, GeometryError> {
    if spec.cross_section.dim() != 1 {
        return Err(GeometryError::NotTwoDimensional);
    }
    Ok(t_nodes.iter().map(|&t| spec.warp.curvature(t)).collect())
}

/// Quadrature weights of the Riemannian measure plus per-end cross-section volumes.
#[derive(Debug, Clone)]
pub struct VolumeForm {
    /// `√g` per `t` node.
    pub sqrt_det_g: Vec<f64>,
    /// Node weights `dV` (trapezoid in `t`, uniform over `X`).
    pub weights: Vec<f64>,
    /// `vol(X_i)` at infinity, `vol(X)·w(∞)^dim`.
    pub end_volumes: Vec<f64>,
}

pub fn volume_form(m: &Manifold) -> VolumeForm {
    let d = m.spec.cross_section.dim() as i32;
    let v_inf = m.spec.cross_section.volume() * m.spec.warp.limit().powi(d);
    VolumeForm {
        sqrt_det_g: m.metric.sqrt_det_g.clone(),
        weights: crate::discretize::laplacian::node_measure(m),
        end_volumes: vec![v_inf; m.end_count()],
    }
}

/// Location of a point relative to the end charts `Ψ_i : X × (R_0, ∞) → M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum EndPoint {
    Core,
    End { index: usize, t: f64 },
}

pub fn end_coordinates(spec: &ManifoldSpec, t: f64) -> EndPoint {
    let threshold = spec.core_radius;
    match spec.topology {
        Topology::TwoEndCylinder => {
            if t > threshold {
                EndPoint::End { index: 0, t }
            } else if t < -threshold {
                EndPoint::End { index: 1, t: -t }
            } else {
                EndPoint::Core
            }
        }
        Topology::OneEndCapped => {
            if t > threshold {
                EndPoint::End { index: 0, t }
            } else {
                EndPoint::Core
            }
        }
    }
}

/// Christoffel symbols of a sampled metric by centered differences of `g_θθ`,
/// for cross-checking the analytic values. Returns `(Γ^t_θθ, Γ^θ_tθ)` on the
/// interior nodes `1..n-1`.
pub fn christoffels_from_samples(g_thth: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let n = g_thth.len();
    let mut gt = Vec::with_capacity(n.saturating_sub(2));
    let mut gth = Vec::with_capacity(n.saturating_sub(2));
    for i in 1..n - 1 {
        let dg = (g_thth[i + 1] - g_thth[i - 1]) / (2.0 * h);
        gt.push(-0.5 * dg);
        gth.push(0.5 * dg / g_thth[i]);
    }
    (gt, gth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn flat_cylinder_is_a_product() {
        let m = build_manifold(&ManifoldSpec::flat_cylinder(1.0, 16, 10.0, 0.05)).unwrap();
        assert!(m.metric.g_xx[0].iter().all(|g| (*g - 1.0).abs() < 1e-15));
        assert!(m.metric.g_tt.iter().all(|g| *g == 1.0));
        assert_eq!(m.grid.t_nodes().len(), 401);
    }

    #[test]
    fn cigar_metric_is_tanh_squared() {
        let m = build_manifold(&ManifoldSpec::cigar(1.0, 16, 5.0, 0.05)).unwrap();
        assert_eq!(m.metric.g_xx[0][0], 0.0);
        for (t, g) in m.grid.t_nodes().iter().zip(&m.metric.g_xx[0]) {
            assert_relative_eq!(*g, t.tanh().powi(2), epsilon = 1e-14);
        }
    }

    #[test]
    fn sech_bump_peak() {
        let spec = ManifoldSpec::sech_cylinder(0.3, 16, 8.0, 0.05);
        let m = build_manifold(&spec).unwrap();
        let mid = m.grid.t_nodes().len() / 2;
        assert_relative_eq!(m.metric.g_xx[0][mid], 1.69, epsilon = 1e-14);
    }

    #[test]
    fn curvature_examples() {
        let flat = ManifoldSpec::flat_cylinder(1.0, 16, 8.0, 0.1);
        let k = gaussian_curvature(&flat, &[0.0, 1.0, -3.0]).unwrap();
        assert!(k.iter().all(|v| *v == 0.0));

        let cigar = ManifoldSpec::cigar(1.0, 16, 5.0, 0.1);
        let k = gaussian_curvature(&cigar, &[0.0, 0.5, 2.0]).unwrap();
        assert_relative_eq!(k[0], 2.0, epsilon = 1e-14);
        for (t, kv) in [0.0f64, 0.5, 2.0].iter().zip(&k) {
            assert_relative_eq!(*kv, 2.0 / t.cosh().powi(2), epsilon = 1e-13);
        }

        let torus = ManifoldSpec::new(
            Topology::TwoEndCylinder,
            CrossSection::flat_torus(1.0, 1.0, 8),
            WarpProfile::Constant { c: 1.0 },
            8.0,
            0.1,
        );
        assert_eq!(
            gaussian_curvature(&torus, &[0.0]),
            Err(GeometryError::NotTwoDimensional)
        );
    }

    #[test]
    fn cosh_warp_has_curvature_minus_one() {
        // w = cosh t is not one of the model profiles; check the formula path directly.
        let h = 1e-3;
        for t in [-1.0f64, 0.0, 0.7] {
            let w = |s: f64| s.cosh();
            let d2 = (w(t + h) - 2.0 * w(t) + w(t - h)) / (h * h);
            assert_relative_eq!(-d2 / w(t), -1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn curvature_matches_finite_differences_of_metric() {
        let warp = WarpProfile::SechBump {
            base: 1.0,
            amplitude: 0.3,
            center: 0.0,
            width: 1.0,
        };
        let h = 1e-3;
        for t in [-2.0f64, -0.3, 0.0, 1.1] {
            let sg = |s: f64| warp.value(s);
            let fd = -(sg(t + h) - 2.0 * sg(t) + sg(t - h)) / (h * h) / sg(t);
            assert_relative_eq!(warp.curvature(t), fd, epsilon = 1e-6);
        }
    }

    #[test]
    fn volumes() {
        assert_relative_eq!(
            CrossSection::circle(1.0, 8).volume(),
            2.0 * std::f64::consts::PI
        );
        assert_relative_eq!(
            CrossSection::circle(2.0, 8).volume(),
            4.0 * std::f64::consts::PI
        );
        let m = build_manifold(&ManifoldSpec::sech_cylinder(0.3, 16, 8.0, 0.1)).unwrap();
        let vf = m.volume_form();
        assert_eq!(vf.end_volumes.len(), 2);
        assert_relative_eq!(vf.end_volumes[0], 2.0 * std::f64::consts::PI);
    }

    #[test]
    fn end_charts() {
        let spec = ManifoldSpec::flat_cylinder(1.0, 16, 10.0, 0.05).with_core_radius(5.0);
        assert_eq!(end_coordinates(&spec, 8.0), EndPoint::End { index: 0, t: 8.0 });
        assert_eq!(end_coordinates(&spec, -8.0), EndPoint::End { index: 1, t: 8.0 });
        assert_eq!(end_coordinates(&spec, 0.0), EndPoint::Core);
    }

    #[test]
    fn rejects_bad_specs() {
        let short = ManifoldSpec::sech_cylinder(0.3, 16, 4.0, 0.05);
        assert!(matches!(
            short.validate(),
            Err(GeometryError::TruncationTooShort { .. })
        ));
        let mut two_cigar = ManifoldSpec::cigar(1.0, 16, 5.0, 0.05);
        two_cigar.topology = Topology::TwoEndCylinder;
        assert_eq!(
            two_cigar.validate(),
            Err(GeometryError::CigarWithTwoEnds { ends: 2 })
        );
        let odd = ManifoldSpec::flat_cylinder(1.0, 9, 8.0, 0.05);
        assert!(odd.validate().is_err());
    }

    #[test]
    fn analytic_christoffels_match_sampled_metric() {
        let warp = WarpProfile::SechBump {
            base: 1.0,
            amplitude: 0.3,
            center: 0.0,
            width: 1.0,
        };
        let cross = CrossSection::circle(1.0, 8);
        let mut errs = Vec::new();
        for n in [80usize, 160] {
            let h = 8.0 / n as f64;
            let t: Vec<f64> = (0..=n).map(|i| -4.0 + i as f64 * h).collect();
            let m = MetricField::sample(&t, &cross, &warp);
            let (gt, gth) = christoffels_from_samples(&m.g_xx[0], h);
            let e = (1..n)
                .map(|i| {
                    (gt[i - 1] - m.christoffel_t_xx[0][i])
                        .abs()
                        .max((gth[i - 1] - m.christoffel_x_tx[i]).abs())
                })
                .fold(0.0, f64::max);
            errs.push(e);
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 1.9, "order {order}");

        let flat = MetricField::sample(&[0.0, 0.1, 0.2], &cross, &WarpProfile::Constant { c: 1.0 });
        let (gt, gth) = christoffels_from_samples(&flat.g_xx[0], 0.1);
        assert_eq!(gt[0], flat.christoffel_t_xx[0][1]);
        assert_eq!(gth[0], flat.christoffel_x_tx[1]);
    }

    #[test]
    fn warp_decay_is_bounded_at_recorded_rate() {
        for warp in [
            WarpProfile::SechBump {
                base: 1.0,
                amplitude: 0.3,
                center: 0.0,
                width: 1.0,
            },
            WarpProfile::Cigar { scale: 1.0 },
            WarpProfile::Cigar { scale: 2.0 },
        ] {
            let beta = warp.decay_rate().unwrap();
            let bound = (0..400)
                .map(|k| {
                    let t = k as f64 * 0.05;
                    (warp.value(t) - warp.limit()).abs() * (-beta * t).exp()
                })
                .fold(0.0, f64::max);
            assert!(bound < 10.0 * warp.limit(), "{warp:?}: {bound}");
        }
    }
}
