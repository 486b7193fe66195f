//! One-forms on a surface of revolution in the coordinate coframe `(dt, dθ)`.

use serde::Serialize;

use crate::discretize::fd::{d_angle, d_t};
use crate::geometry::Manifold;

use super::{evaluation_rings, require_surface, VerifyError};

#[derive(Debug, Clone)]
pub struct OneForm {
    pub t: Vec<f64>,
    pub theta: Vec<f64>,
    /// `|γ|_g`.
    pub norm: Vec<f64>,
}

/// `g^{θθ} = 1/(r² w²)` on each ring.
pub(crate) fn inverse_angular_metric(m: &Manifold, r: f64) -> Vec<f64> {
    m.metric.warp.iter().map(|w| 1.0 / (r * r * w * w)).collect()
}

impl OneForm {
    pub fn from_components(m: &Manifold, t: Vec<f64>, theta: Vec<f64>) -> Result<Self, VerifyError> {
        let r = require_surface(m)?;
        let ginv = inverse_angular_metric(m, r);
        let norm = (0..t.len())
            .map(|v| {
                let (i, _) = m.grid.ring_of(v);
                let s = t[v] * t[v] + ginv[i] * theta[v] * theta[v];
                if s.is_finite() { s.sqrt() } else { t[v].abs() }
            })
            .collect();
        Ok(OneForm { t, theta, norm })
    }

    /// Samples `a(t, θ) dt + b(t, θ) dθ`.
    pub fn sample(
        m: &Manifold,
        a: impl Fn(f64, f64) -> f64,
        b: impl Fn(f64, f64) -> f64,
    ) -> Result<Self, VerifyError> {
        let t = m.grid.sample(|t, th| a(t, th[0]));
        let theta = m.grid.sample(|t, th| b(t, th[0]));
        Self::from_components(m, t, theta)
    }
}

/// `γ = df` by second-order differences.
pub fn differential(m: &Manifold, f: &[f64]) -> Result<OneForm, VerifyError> {
    require_surface(m)?;
    OneForm::from_components(m, d_t(&m.grid, f), d_angle(&m.grid, f, 0))
}

/// `T_ab = ∇_a γ_b`.
#[derive(Debug, Clone)]
pub struct CovariantDerivative {
    pub tt: Vec<f64>,
    /// `∇_t γ_θ`
    pub t_theta: Vec<f64>,
    /// `∇_θ γ_t`
    pub theta_t: Vec<f64>,
    pub theta_theta: Vec<f64>,
    pub norm: Vec<f64>,
}

impl CovariantDerivative {
    /// `max |∇_t γ_θ - ∇_θ γ_t| / (r w)` over the evaluation rings.
    pub fn asymmetry(&self, m: &Manifold) -> f64 {
        let r = m.metric.radii[0];
        sup_on_rings(m, |v, i| (self.t_theta[v] - self.theta_t[v]).abs() / (r * m.metric.warp[i]))
    }

    pub fn sup_norm(&self, m: &Manifold) -> f64 {
        sup_on_rings(m, |v, _| self.norm[v])
    }
}

pub(crate) fn sup_on_rings(m: &Manifold, mut f: impl FnMut(usize, usize) -> f64) -> f64 {
    let (lo, hi) = evaluation_rings(m);
    let mut out = 0.0f64;
    for i in lo..=hi {
        for j in 0..m.grid.ring_size() {
            out = out.max(f(m.grid.node(i, j), i));
        }
    }
    out
}

/// `∇_a γ_b = ∂_a γ_b - Γᶜ_ab γ_c` with the warped-product Christoffels.
pub fn covariant_derivative(m: &Manifold, g: &OneForm) -> Result<CovariantDerivative, VerifyError> {
    let r = require_surface(m)?;
    let grid = &m.grid;
    let a = &m.metric.christoffel_t_xx[0];
    let b = &m.metric.christoffel_x_tx;
    let ginv = inverse_angular_metric(m, r);
    let tt = d_t(grid, &g.t);
    let mut t_theta = d_t(grid, &g.theta);
    let mut theta_t = d_angle(grid, &g.t, 0);
    let mut theta_theta = d_angle(grid, &g.theta, 0);
    let mut norm = vec![0.0; grid.len()];
    for v in 0..grid.len() {
        let (i, _) = grid.ring_of(v);
        if !b[i].is_finite() {
            continue;
        }
        t_theta[v] -= b[i] * g.theta[v];
        theta_t[v] -= b[i] * g.theta[v];
        theta_theta[v] -= a[i] * g.t[v];
        norm[v] = (tt[v] * tt[v]
            + ginv[i] * (t_theta[v].powi(2) + theta_t[v].powi(2))
            + ginv[i] * ginv[i] * theta_theta[v].powi(2))
        .sqrt();
    }
    Ok(CovariantDerivative {
        tt,
        t_theta,
        theta_t,
        theta_theta,
        norm,
    })
}

/// `d*ξ = -div ξ`.
fn codifferential(m: &Manifold, xi: &OneForm, r: f64) -> Vec<f64> {
    let grid = &m.grid;
    let w = &m.metric.warp;
    let wxi: Vec<f64> = (0..grid.len()).map(|v| w[grid.ring_of(v).0] * xi.t[v]).collect();
    let dwxi = d_t(grid, &wxi);
    let dth = d_angle(grid, &xi.theta, 0);
    (0..grid.len())
        .map(|v| {
            let i = grid.ring_of(v).0;
            -(dwxi[v] / w[i] + dth[v] / (r * r * w[i] * w[i]))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeitzenbockResidual {
    /// `sup |(dd* + d*d)ξ - ∇*∇ξ - K ξ|_g` over the evaluation rings.
    pub residual: f64,
    /// `sup |(dd* + d*d)ξ|_g`, for scale.
    pub hodge_sup: f64,
    /// `sup |ξ|_g`.
    pub form_sup: f64,
}

/// All three terms of the Weitzenböck identity by finite differences.
pub fn weitzenbock_residual(m: &Manifold, xi: &OneForm) -> Result<WeitzenbockResidual, VerifyError> {
    let r = require_surface(m)?;
    let grid = &m.grid;
    let n = grid.len();
    let w = &m.metric.warp;
    let a = &m.metric.christoffel_t_xx[0];
    let b = &m.metric.christoffel_x_tx;
    let ginv = inverse_angular_metric(m, r);
    let curvature = m.gaussian_curvature()?;

    // dd*ξ
    let phi = codifferential(m, xi, r);
    let ddstar_t = d_t(grid, &phi);
    let ddstar_th = d_angle(grid, &phi, 0);
    // d*dξ through ψ = *dξ
    let dt_th = d_t(grid, &xi.theta);
    let dth_t = d_angle(grid, &xi.t, 0);
    let psi: Vec<f64> = (0..n)
        .map(|v| {
            let i = grid.ring_of(v).0;
            (dt_th[v] - dth_t[v]) / (r * w[i])
        })
        .collect();
    let dpsi_t = d_t(grid, &psi);
    let dpsi_th = d_angle(grid, &psi, 0);
    // ∇*∇ξ
    let cd = covariant_derivative(m, xi)?;
    let d_tt = d_t(grid, &cd.tt);
    let d_tth = d_t(grid, &cd.t_theta);
    let dth_tht = d_angle(grid, &cd.theta_t, 0);
    let dth_thth = d_angle(grid, &cd.theta_theta, 0);

    let mut out = WeitzenbockResidual {
        residual: 0.0,
        hodge_sup: 0.0,
        form_sup: 0.0,
    };
    let (lo, hi) = evaluation_rings(m);
    for i in lo..=hi {
        for j in 0..grid.ring_size() {
            let v = grid.node(i, j);
            let hodge_t = ddstar_t[v] + dpsi_th[v] / (r * w[i]);
            let hodge_th = ddstar_th[v] - r * w[i] * dpsi_t[v];
            let rough_t = -(d_tt[v] + ginv[i] * (dth_tht[v] - a[i] * cd.tt[v] - b[i] * cd.theta_theta[v]));
            let rough_th = -(d_tth[v] - b[i] * cd.t_theta[v]
                + ginv[i] * (dth_thth[v] - a[i] * cd.t_theta[v] - a[i] * cd.theta_t[v]));
            let res_t = hodge_t - rough_t - curvature[i] * xi.t[v];
            let res_th = hodge_th - rough_th - curvature[i] * xi.theta[v];
            let pointwise = |x: f64, y: f64| (x * x + ginv[i] * y * y).sqrt();
            out.residual = out.residual.max(pointwise(res_t, res_th));
            out.hodge_sup = out.hodge_sup.max(pointwise(hodge_t, hodge_th));
            out.form_sup = out.form_sup.max(xi.norm[v]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_manifold, ManifoldSpec};

    fn flat(h: f64) -> Manifold {
        build_manifold(&ManifoldSpec::flat_cylinder(1.0, 64, 8.0, h)).unwrap()
    }

    #[test]
    fn differential_examples() {
        let m = flat(0.1);
        let g = differential(&m, &m.grid.node_t()).unwrap();
        assert!(g.norm.iter().all(|x| (x - 1.0).abs() < 1e-12));
        let g = differential(&m, &vec![2.0; m.grid.len()]).unwrap();
        assert!(g.norm.iter().all(|x| *x == 0.0));

        let spec = ManifoldSpec::sech_cylinder(0.3, 32, 8.0, 0.05);
        let m = build_manifold(&spec).unwrap();
        let f = m.grid.sample(|t, _| crate::oracle::inverse_warp_integral(&spec.warp, 0.0, t));
        let g = differential(&m, &f).unwrap();
        for (v, t) in m.grid.node_t().iter().enumerate() {
            assert!((g.norm[v] - 1.0 / spec.warp.value(*t)).abs() < 1e-3);
        }
    }

    #[test]
    fn covariant_derivative_examples() {
        let m = flat(0.1);
        let g = differential(&m, &m.grid.node_t()).unwrap();
        let cd = covariant_derivative(&m, &g).unwrap();
        assert!(cd.sup_norm(&m) < 1e-12);

        let spec = ManifoldSpec::sech_cylinder(0.3, 32, 8.0, 0.05);
        let m = build_manifold(&spec).unwrap();
        let g = OneForm::sample(&m, |_, _| 1.0, |_, _| 0.0).unwrap();
        let cd = covariant_derivative(&m, &g).unwrap();
        for (i, &t) in m.grid.t_nodes().iter().enumerate() {
            let v = m.grid.node(i, 3);
            let w = spec.warp.value(t);
            assert!((cd.theta_theta[v] - w * spec.warp.d1(t)).abs() < 1e-12);
        }
    }

    #[test]
    fn hessian_is_symmetric() {
        let m = build_manifold(&ManifoldSpec::sech_cylinder(0.3, 64, 8.0, 0.05)).unwrap();
        let f = m.grid.sample(|t, th| (0.3 * t).sin() * (2.0 * th[0]).cos() + t);
        let cd = covariant_derivative(&m, &differential(&m, &f).unwrap()).unwrap();
        assert!(cd.asymmetry(&m) < 1e-2);
    }

    #[test]
    fn weitzenbock_flat_harmonic_form() {
        for h in [0.1, 0.05] {
            let m = flat(h);
            let xi = OneForm::sample(&m, |t, th| (-t).exp() * th.cos(), |_, _| 0.0).unwrap();
            let w = weitzenbock_residual(&m, &xi).unwrap();
            assert!(w.residual / w.form_sup < 100.0 * h * h, "{w:?}");
        }
    }
}
