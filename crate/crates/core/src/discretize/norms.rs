//! Weight function `ρ` and weighted Sobolev norms
//! `‖f‖ = (Σ_{j≤k} ∫ e^{-αρ} |∇ʲf|^p dV)^{1/p}`.

use serde::Serialize;

use crate::geometry::{Manifold, Topology};

use super::fd::{d_angle, d_t};
use super::laplacian::node_measure;

#[derive(Debug, Clone)]
pub struct WeightFunction {
    pub rho: Vec<f64>,
    pub alpha: f64,
    pub p: f64,
}

impl WeightFunction {
    pub fn new(rho: Vec<f64>, alpha: f64, p: f64) -> Self {
        assert!(p >= 1.0, "Sobolev exponent must be >= 1");
        WeightFunction { rho, alpha, p }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }
}

/// `ρ` as a function of `|t|`: equal to `|t|` beyond `core + blend`, the
/// constant `core` inside `core - blend`, joined by a raised-cosine slope.
pub fn rho_profile(s: f64, core: f64, blend: f64) -> f64 {
    if s >= core + blend {
        s
    } else if s <= core - blend {
        core
    } else {
        let u = (s - (core - blend)) / (2.0 * blend);
        core + blend * (u - (std::f64::consts::PI * u).sin() / std::f64::consts::PI)
    }
}

/// `ρ = t_i` on each end, smoothly extended over the core.
pub fn extend_rho(m: &Manifold, blend: f64, alpha: f64, p: f64) -> WeightFunction {
    let core = m.spec.core_radius;
    let blend = blend.min(core);
    let rho = m
        .grid
        .node_t()
        .into_iter()
        .map(|t| {
            let s = match m.spec.topology {
                Topology::TwoEndCylinder => t.abs(),
                Topology::OneEndCapped => t,
            };
            rho_profile(s, core, blend)
        })
        .collect();
    WeightFunction::new(rho, alpha, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedNorm {
    pub value: f64,
    /// Set when the quadrature sum left the representable range.
    pub overflow: bool,
}

const OVERFLOW_GUARD: f64 = 1e300;

/// Pointwise `|∇f|_g` on every node.
pub fn gradient_norm(m: &Manifold, f: &[f64]) -> Vec<f64> {
    let grid = &m.grid;
    let ft = d_t(grid, f);
    let radii = grid.cross().radii().to_vec();
    let fa: Vec<Vec<f64>> = (0..radii.len()).map(|k| d_angle(grid, f, k)).collect();
    (0..grid.len())
        .map(|v| {
            let (i, _) = grid.ring_of(v);
            let w = m.metric.warp[i];
            let mut s = ft[v] * ft[v];
            if w > 0.0 {
                for (k, r) in radii.iter().enumerate() {
                    s += fa[k][v] * fa[k][v] / (r * r * w * w);
                }
            }
            s.sqrt()
        })
        .collect()
}

/// Pointwise norm of the covariant Hessian `∇²f`.
pub fn hessian_norm(m: &Manifold, f: &[f64]) -> Vec<f64> {
    let grid = &m.grid;
    let radii = grid.cross().radii().to_vec();
    let dim = radii.len();
    let ft = d_t(grid, f);
    let ftt = d_t(grid, &ft);
    let fa: Vec<Vec<f64>> = (0..dim).map(|k| d_angle(grid, f, k)).collect();
    let fta: Vec<Vec<f64>> = fa.iter().map(|g| d_t(grid, g)).collect();
    let faa: Vec<Vec<Vec<f64>>> = fa
        .iter()
        .map(|g| (0..dim).map(|l| d_angle(grid, g, l)).collect())
        .collect();
    (0..grid.len())
        .map(|v| {
            let (i, _) = grid.ring_of(v);
            let w = m.metric.warp[i];
            let wp = m.metric.warp_d1[i];
            if w <= 0.0 {
                return ftt[v].abs();
            }
            let mut s = ftt[v] * ftt[v];
            for k in 0..dim {
                let htk = fta[k][v] - wp / w * fa[k][v];
                s += 2.0 * htk * htk / (radii[k] * radii[k] * w * w);
                for l in 0..dim {
                    let mut hkl = faa[k][l][v];
                    if k == l {
                        hkl += radii[k] * radii[k] * w * wp * ft[v];
                    }
                    s += hkl * hkl / (radii[k] * radii[k] * radii[l] * radii[l] * w.powi(4));
                }
            }
            s.sqrt()
        })
        .collect()
}

/// Quadrature value of the weighted `L^p_k` norm, `k ∈ {0, 1, 2}`.
pub fn weighted_norm(m: &Manifold, f: &[f64], wt: &WeightFunction, k: usize) -> WeightedNorm {
    assert!(k <= 2, "derivatives up to order 2 are supported");
    let mass = node_measure(m);
    let mut terms = vec![f.iter().map(|x| x.abs()).collect::<Vec<f64>>()];
    if k >= 1 {
        terms.push(gradient_norm(m, f));
    }
    if k >= 2 {
        terms.push(hessian_norm(m, f));
    }
    let mut total = 0.0f64;
    for term in &terms {
        for ((mu, rho), x) in mass.iter().zip(&wt.rho).zip(term) {
            total += mu * (-wt.alpha * rho).exp() * x.powf(wt.p);
        }
    }
    if !total.is_finite() || total > OVERFLOW_GUARD {
        return WeightedNorm {
            value: f64::INFINITY,
            overflow: true,
        };
    }
    WeightedNorm {
        value: total.powf(1.0 / wt.p),
        overflow: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::grid::{CrossMesh, Grid};
    use crate::geometry::{build_manifold, CrossSection, ManifoldSpec, MetricField, WarpProfile};
    use std::f64::consts::PI;

    /// Flat half-cylinder `[0, T] × S¹` assembled by hand.
    fn half_cylinder(t_max: f64, h: f64) -> Manifold {
        let spec = ManifoldSpec::flat_cylinder(1.0, 16, t_max, h);
        let cross = CrossSection::circle(1.0, 16);
        let grid = Grid::uniform(
            0.0,
            t_max,
            (t_max / h).round() as usize,
            CrossMesh::from_cross_section(&cross),
            false,
        );
        let metric = MetricField::sample(grid.t_nodes(), &cross, &WarpProfile::Constant { c: 1.0 });
        Manifold { spec, grid, metric }
    }

    #[test]
    fn constant_function_closed_form() {
        let (t_max, alpha) = (6.0, -0.5);
        let m = half_cylinder(t_max, 0.01);
        let rho = m.grid.node_t();
        let wt = WeightFunction::new(rho, alpha, 2.0);
        let n = weighted_norm(&m, &vec![1.0; m.grid.len()], &wt, 0);
        let exact = (2.0 * PI * ((0.5 * t_max).exp() - 1.0) / 0.5).sqrt();
        assert!((n.value - exact).abs() / exact < 1e-5);
        assert!(!n.overflow);
        assert_eq!(weighted_norm(&m, &vec![0.0; m.grid.len()], &wt, 2).value, 0.0);
    }

    #[test]
    fn decaying_function_has_finite_limit() {
        let alpha = -0.5;
        let mut last = 0.0;
        for t_max in [10.0, 20.0, 40.0] {
            let m = half_cylinder(t_max, 0.01);
            let rho = m.grid.node_t();
            let f: Vec<f64> = rho.iter().map(|t| (alpha * t).exp()).collect();
            let v = weighted_norm(&m, &f, &WeightFunction::new(rho, alpha, 2.0), 0).value;
            let exact = (2.0 * PI / 0.5 * (1.0 - (-0.5 * t_max).exp())).sqrt();
            assert!((v - exact).abs() / exact < 1e-5);
            last = v;
        }
        assert!((last - (4.0 * PI).sqrt()).abs() < 1e-4);
    }

    #[test]
    fn overflow_is_flagged() {
        let m = half_cylinder(40.0, 0.1);
        let rho: Vec<f64> = m.grid.node_t().iter().map(|t| 100.0 * t).collect();
        let n = weighted_norm(&m, &vec![1.0; m.grid.len()], &WeightFunction::new(rho, -1.0, 2.0), 0);
        assert!(n.overflow && n.value.is_infinite());
    }

    #[test]
    fn rho_extension_examples() {
        let spec = ManifoldSpec::flat_cylinder(1.0, 8, 10.0, 0.1).with_core_radius(5.0);
        let m = build_manifold(&spec).unwrap();
        let wt = extend_rho(&m, 1.0, -0.5, 2.0);
        let t = m.grid.node_t();
        let at = |x: f64| {
            let v = t.iter().position(|s| (s - x).abs() < 1e-9).unwrap();
            wt.rho[v]
        };
        assert_eq!(at(10.0), 10.0);
        assert_eq!(at(-10.0), 10.0);
        assert_eq!(at(0.0), 5.0);
        // bounded discrete second differences
        let h = 1e-3;
        let second = (0..20000)
            .map(|k| {
                let s = k as f64 * h;
                (rho_profile(s + h, 5.0, 1.0) - 2.0 * rho_profile(s, 5.0, 1.0)
                    + rho_profile(s - h, 5.0, 1.0))
                    / (h * h)
            })
            .fold(0.0f64, |a, b| a.max(b.abs()));
        assert!(second <= PI / 2.0 + 1e-3);

        let cigar = build_manifold(&ManifoldSpec::cigar(1.0, 8, 6.0, 0.1)).unwrap();
        let r = extend_rho(&cigar, 1.0, -0.5, 2.0);
        let rings: Vec<f64> = (0..cigar.grid.rings()).map(|i| r.rho[cigar.grid.node(i, 0)]).collect();
        assert!(rings.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn core_extensions_give_equivalent_norms() {
        let spec = ManifoldSpec::sech_cylinder(0.3, 16, 8.0, 0.1).with_core_radius(3.0);
        let m = build_manifold(&spec).unwrap();
        let alpha = -0.5;
        let a = extend_rho(&m, 0.5, alpha, 2.0);
        let b = extend_rho(&m, 2.0, alpha, 2.0);
        let spread = a.rho.iter().zip(&b.rho).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let f = m.grid.sample(|t, th| (0.2 * t).sin() + th[0].cos() / (1.0 + t * t));
        for k in 0..=2 {
            let na = weighted_norm(&m, &f, &a, k).value;
            let nb = weighted_norm(&m, &f, &b, k).value;
            let bound = (alpha.abs() * spread).exp();
            assert!(na / nb <= bound && nb / na <= bound);
        }
    }

    #[test]
    fn zero_weight_is_unweighted_quadrature() {
        let m = build_manifold(&ManifoldSpec::flat_cylinder(1.0, 16, 4.0, 0.1)).unwrap();
        let f = m.grid.sample(|t, th| t * th[0].sin());
        let wt = extend_rho(&m, 1.0, 0.0, 2.0);
        let mass = node_measure(&m);
        let plain: f64 = mass.iter().zip(&f).map(|(w, x)| w * x * x).sum::<f64>().sqrt();
        assert!((weighted_norm(&m, &f, &wt, 0).value - plain).abs() < 1e-12 * plain);
    }

    #[test]
    fn hessian_of_linear_function_vanishes_on_flat_cylinder() {
        let m = build_manifold(&ManifoldSpec::flat_cylinder(2.0, 16, 4.0, 0.1)).unwrap();
        let f = m.grid.sample(|t, _| 3.0 * t + 1.0);
        assert!(hessian_norm(&m, &f).iter().all(|h| h.abs() < 1e-10));
        assert!(gradient_norm(&m, &f).iter().all(|g| (g - 3.0).abs() < 1e-10));
    }
}
