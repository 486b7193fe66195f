//! Integrated Bochner identity `∫|∇γ|² + ∫K|γ|² = Σ_i ∮ ⟨γ, ∇_η γ⟩` over
//! the truncated region `|t_i| ≤ R`, its dependence on `R`, and the
//! curvature sweep `w_s = 1 + s·sech t`.

use serde::Serialize;

use crate::geometry::{Manifold, ManifoldSpec, Topology, WarpProfile};
use crate::harmonic::{AsymptoticData, HarmonicOptions, HarmonicProblem};

use super::flow::{split_check, SplitOptions, SplitReport};
use super::forms::{covariant_derivative, differential, inverse_angular_metric, OneForm};
use super::{require_surface, VerifyError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BochnerReport {
    pub r: f64,
    pub interior_energy: f64,
    pub ricci_term: f64,
    /// `∮_{X_i × {R}} ⟨γ, ∇_η γ⟩` per end.
    pub boundary_terms: Vec<f64>,
    pub identity_residual: f64,
}

impl BochnerReport {
    pub fn boundary_total(&self) -> f64 {
        self.boundary_terms.iter().sum()
    }
}

/// Evaluates every term of the identity for `γ` at radius `r`, which is
/// rounded to the nearest ring and must leave two rings before truncation.
pub fn bochner_identity(m: &Manifold, gamma: &OneForm, r: f64) -> Result<BochnerReport, VerifyError> {
    let rad = require_surface(m)?;
    let grid = &m.grid;
    let h = grid.h_t();
    let max = m.spec.truncation_r - 2.0 * h;
    if !(r > 0.0 && r <= max + 1e-9) {
        return Err(VerifyError::RadiusOutOfRange { r, max });
    }
    let t = grid.t_nodes();
    let ginv = inverse_angular_metric(m, rad);
    let curvature = m.gaussian_curvature()?;
    let cd = covariant_derivative(m, gamma)?;
    let cell = grid.cross().cell_measure();

    let rings: Vec<usize> = (0..grid.rings())
        .filter(|&i| !(grid.has_tip() && i == 0))
        .filter(|&i| t[i].abs() <= r + 1e-9)
        .collect();
    let (first, last) = (rings[0], *rings.last().unwrap());
    let mut energy = 0.0;
    let mut ricci = 0.0;
    for &i in &rings {
        let half = (i == first && m.spec.topology == Topology::TwoEndCylinder) || i == last;
        let weight = if half { 0.5 * h } else { h } * cell * rad * m.metric.warp[i];
        for j in 0..grid.ring_size() {
            let v = grid.node(i, j);
            energy += weight * cd.norm[v] * cd.norm[v];
            ricci += weight * curvature[i] * gamma.norm[v] * gamma.norm[v];
        }
    }

    let b = &m.metric.christoffel_x_tx;
    let boundary_terms: Vec<f64> = (0..m.end_count())
        .map(|e| {
            let s = grid.end_orientation(e);
            let i = if s > 0.0 { last } else { first };
            let step = |k: usize| if s > 0.0 { i - k } else { i + k };
            // ∂_t by a one-sided stencil reaching into the region
            let one_sided = |f: &[f64], j: usize| {
                s * (3.0 * f[grid.node(i, j)] - 4.0 * f[grid.node(step(1), j)] + f[grid.node(step(2), j)])
                    / (2.0 * h)
            };
            let area = cell * rad * m.metric.warp[i];
            (0..grid.ring_size())
                .map(|j| {
                    let v = grid.node(i, j);
                    let n_t = s * one_sided(&gamma.t, j);
                    let n_th = s * (one_sided(&gamma.theta, j) - b[i] * gamma.theta[v]);
                    area * (gamma.t[v] * n_t + ginv[i] * gamma.theta[v] * n_th)
                })
                .sum()
        })
        .collect();
    let total: f64 = boundary_terms.iter().sum();
    Ok(BochnerReport {
        r: t[last],
        interior_energy: energy,
        ricci_term: ricci,
        identity_residual: (energy + ricci - total).abs(),
        boundary_terms,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayScan {
    pub reports: Vec<BochnerReport>,
    /// Successive differences of the total boundary term.
    pub increments: Vec<f64>,
    /// Slope of `log|increment|` against `R`, when all increments are nonzero.
    pub observed_rate: Option<f64>,
}

pub fn boundary_decay_scan(m: &Manifold, gamma: &OneForm, radii: &[f64]) -> Result<DecayScan, VerifyError> {
    let reports = radii
        .iter()
        .map(|&r| bochner_identity(m, gamma, r))
        .collect::<Result<Vec<_>, _>>()?;
    let increments: Vec<f64> = reports
        .windows(2)
        .map(|w| w[1].boundary_total() - w[0].boundary_total())
        .collect();
    let observed_rate = if increments.len() >= 2 && increments.iter().all(|d| d.abs() > 1e-13) {
        let pts: Vec<(f64, f64)> = reports
            .windows(2)
            .zip(&increments)
            .map(|(w, d)| (0.5 * (w[0].r + w[1].r), d.abs().ln()))
            .collect();
        Some(line_fit(&pts).0)
    } else {
        None
    };
    Ok(DecayScan {
        reports,
        increments,
        observed_rate,
    })
}

/// Least-squares `(slope, intercept)`.
pub fn line_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[derive(Debug, Clone, Serialize)]
pub struct DichotomyPoint {
    pub amplitude: f64,
    pub sup_grad_gamma: f64,
    pub interior_energy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DichotomyReport {
    pub points: Vec<DichotomyPoint>,
    pub strictly_increasing: bool,
    pub fit_slope: f64,
    /// Linear extrapolation of `sup|∇γ|` to zero amplitude.
    pub fit_intercept: f64,
    /// Relative spread of the ratios `sup|∇γ(s)|/s`.
    pub slope_spread: f64,
    pub flat_sup_grad_gamma: f64,
    pub flat_split: SplitReport,
    pub tol: f64,
}

impl DichotomyReport {
    pub fn passed(&self) -> bool {
        self.strictly_increasing
            && self.fit_intercept.abs() <= 2.0 * self.tol
            && self.flat_sup_grad_gamma <= self.tol
            && self.flat_split.passed
    }
}

/// Unit-slope harmonic function on a two-end model and its `γ`.
pub fn unit_slope_form(p: &HarmonicProblem) -> Result<(Vec<f64>, OneForm), VerifyError> {
    let offsets = p.phi.admissible_offsets(&[1.0, -1.0]).ok_or(VerifyError::NotTwoDimensional)?;
    let data = AsymptoticData::new(vec![1.0, -1.0], offsets)?;
    let sol = p.solve(&data, &HarmonicOptions::default())?;
    let gamma = differential(&p.manifold, &sol.f)?;
    Ok((sol.f, gamma))
}

/// Runs `w_s = 1 + s·sech t` for each amplitude plus the flat case `s = 0`,
/// keeping mesh, truncation and spacing from `template`.
pub fn dichotomy_sweep(
    template: &ManifoldSpec,
    amplitudes: &[f64],
    alpha: f64,
    tol: f64,
) -> Result<DichotomyReport, VerifyError> {
    let with_warp = |warp: WarpProfile| ManifoldSpec {
        warp,
        topology: Topology::TwoEndCylinder,
        ..template.clone()
    };
    let measure = |spec: &ManifoldSpec| -> Result<(HarmonicProblem, Vec<f64>, f64, f64), VerifyError> {
        let p = HarmonicProblem::new(spec, alpha)?;
        let (f, gamma) = unit_slope_form(&p)?;
        let cd = covariant_derivative(&p.manifold, &gamma)?;
        let sup = cd.sup_norm(&p.manifold);
        let r_energy = (spec.truncation_r - 2.0 * spec.grid_h).floor();
        let energy = bochner_identity(&p.manifold, &gamma, r_energy)?.interior_energy;
        Ok((p, f, sup, energy))
    };
    let mut points = Vec::new();
    for &s in amplitudes {
        let spec = with_warp(WarpProfile::SechBump {
            base: 1.0,
            amplitude: s,
            center: 0.0,
            width: 1.0,
        });
        let (_, _, sup, energy) = measure(&spec)?;
        points.push(DichotomyPoint {
            amplitude: s,
            sup_grad_gamma: sup,
            interior_energy: energy,
        });
    }
    let (flat, f, flat_sup, _) = measure(&with_warp(WarpProfile::Constant { c: 1.0 }))?;
    let flat_split = split_check(&flat.manifold, &f, &SplitOptions::with_tol(tol))?;

    let strictly_increasing = points.windows(2).all(|w| w[1].sup_grad_gamma > w[0].sup_grad_gamma);
    let pts: Vec<(f64, f64)> = points.iter().map(|p| (p.amplitude, p.sup_grad_gamma)).collect();
    let (fit_slope, fit_intercept) = line_fit(&pts);
    let ratios: Vec<f64> = pts.iter().map(|p| p.1 / p.0).collect();
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    Ok(DichotomyReport {
        points,
        strictly_increasing,
        fit_slope,
        fit_intercept,
        slope_spread: (hi - lo) / hi,
        flat_sup_grad_gamma: flat_sup,
        flat_split,
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_manifold;

    fn problem(spec: &ManifoldSpec) -> HarmonicProblem {
        HarmonicProblem::new(spec, -0.5).unwrap()
    }

    #[test]
    fn flat_cylinder_terms_vanish() {
        let p = problem(&ManifoldSpec::flat_cylinder(1.0, 32, 8.0, 0.1));
        let (_, gamma) = unit_slope_form(&p).unwrap();
        for r in [5.0, 6.0, 7.0] {
            let b = bochner_identity(&p.manifold, &gamma, r).unwrap();
            assert!(b.interior_energy < 1e-10 && b.boundary_total().abs() < 1e-10, "{b:?}");
        }
        assert!(matches!(
            bochner_identity(&p.manifold, &gamma, 7.95),
            Err(VerifyError::RadiusOutOfRange { .. })
        ));
    }

    #[test]
    fn warped_identity_holds_to_second_order() {
        let mut prev = None;
        for h in [0.1, 0.05] {
            let p = problem(&ManifoldSpec::sech_cylinder(0.3, 32, 8.0, h));
            let (_, gamma) = unit_slope_form(&p).unwrap();
            let b = bochner_identity(&p.manifold, &gamma, 6.0).unwrap();
            assert!(b.interior_energy > 1e-2);
            assert!(b.identity_residual <= 50.0 * h * h * (b.interior_energy + 1.0), "{b:?}");
            if let Some(r) = prev {
                assert!(b.identity_residual < r);
            }
            prev = Some(b.identity_residual);
        }
    }

    #[test]
    fn energy_matches_the_one_dimensional_reduction() {
        let spec = ManifoldSpec::sech_cylinder(0.3, 32, 8.0, 0.05);
        let p = problem(&spec);
        let (f, gamma) = unit_slope_form(&p).unwrap();
        let g = &p.manifold.grid;
        let c = (f[g.node(g.rings() - 1, 0)] - f[g.node(0, 0)])
            / (2.0 * crate::oracle::inverse_warp_integral(&spec.warp, 0.0, 8.0));
        let b = bochner_identity(&p.manifold, &gamma, 6.0).unwrap();
        let exact = crate::oracle::bochner_energy(&spec.warp, 1.0, c, -6.0, 6.0);
        assert!((b.interior_energy - exact).abs() < 1e-2 * exact, "{} vs {exact}", b.interior_energy);
    }

    #[test]
    fn constant_function_on_cigar() {
        let m = build_manifold(&ManifoldSpec::cigar(1.0, 32, 8.0, 0.1)).unwrap();
        let gamma = differential(&m, &vec![1.0; m.grid.len()]).unwrap();
        let b = bochner_identity(&m, &gamma, 6.0).unwrap();
        assert_eq!(b.interior_energy, 0.0);
        assert_eq!(b.boundary_terms, vec![0.0]);
    }

    #[test]
    fn decay_scan_on_warped_and_compact_models() {
        let p = problem(&ManifoldSpec::sech_cylinder(0.3, 32, 12.0, 0.05));
        let (_, gamma) = unit_slope_form(&p).unwrap();
        let scan = boundary_decay_scan(&p.manifold, &gamma, &[4.0, 5.0, 6.0, 7.0, 8.0, 9.0]).unwrap();
        // γ tends to a nonzero parallel form, so the integrand decays like w' alone
        let rate = scan.observed_rate.unwrap();
        assert!((rate + 1.0).abs() < 0.2, "rate {rate}");

        let spec = ManifoldSpec {
            warp: WarpProfile::CompactBump {
                base: 1.0,
                amplitude: 0.3,
                center: 0.0,
                width: 2.0,
            },
            ..ManifoldSpec::flat_cylinder(1.0, 32, 8.0, 0.05)
        };
        let p = problem(&spec);
        let (_, gamma) = unit_slope_form(&p).unwrap();
        let scan = boundary_decay_scan(&p.manifold, &gamma, &[3.0, 4.0, 5.0, 6.0]).unwrap();
        // γ is parallel outside the bump, so every boundary term vanishes
        for r in &scan.reports {
            assert!(r.boundary_total().abs() < 1e-8, "{r:?}");
            assert!(r.identity_residual <= 50.0 * 0.05 * 0.05 * (r.interior_energy + 1.0));
        }
        assert!(scan.reports[0].interior_energy > 1e-2);
    }
}
