//! Cross-section spectra, indicial roots and Fredholm index bookkeeping for
//! the Laplacian on cylindrical ends.

use serde::Serialize;
use thiserror::Error;

use crate::discretize::{cross_section_laplacian, eigen_smallest, CrossMesh, SolverError};
use crate::geometry::{CrossSection, GeometryError, ManifoldSpec};

/// Eigenvalues closer than this are one eigenvalue with multiplicity.
pub const ANALYTIC_GROUP_TOL: f64 = 1e-9;
/// Relative grouping tolerance for discrete eigenvalues.
pub const DISCRETE_GROUP_TOL: f64 = 1e-7;
/// A weight within this distance of an indicial root counts as on the root.
pub const ROOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("count must be at least 1")]
    InvalidCount,
    #[error("weight {weight} lies on the indicial root {root}")]
    AtRoot { weight: f64, root: f64 },
    #[error("weight {weight} lies outside the tabulated roots (|ε| ≤ {limit})")]
    OutsideTable { weight: f64, limit: f64 },
    #[error("weights must satisfy α ≤ δ (got {alpha} > {delta})")]
    InvalidInterval { alpha: f64, delta: f64 },
    #[error("weight {weight} is outside the spectral gap (-{gap}, 0)")]
    OutsideGap { weight: f64, gap: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumSource {
    Analytic,
    Discrete,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumTable {
    pub eigenvalues: Vec<f64>,
    pub multiplicities: Vec<usize>,
    pub source: SpectrumSource,
}

impl SpectrumTable {
    /// Eigenvalues repeated according to multiplicity.
    pub fn expanded(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .zip(&self.multiplicities)
            .flat_map(|(&l, &m)| std::iter::repeat_n(l, m))
            .collect()
    }

    /// Smallest positive eigenvalue.
    pub fn first_positive(&self) -> Option<f64> {
        self.eigenvalues.iter().copied().find(|&l| l > ANALYTIC_GROUP_TOL)
    }
}

fn group(sorted: &[f64], close: impl Fn(f64, f64) -> bool) -> (Vec<f64>, Vec<usize>) {
    let mut values: Vec<f64> = Vec::new();
    let mut mult: Vec<usize> = Vec::new();
    let mut first = 0.0;
    for &x in sorted {
        match values.last_mut() {
            Some(_) if close(first, x) => *mult.last_mut().unwrap() += 1,
            _ => {
                first = x;
                values.push(x);
                mult.push(1);
            }
        }
    }
    // report the mean of each cluster
    let mut out = Vec::with_capacity(values.len());
    let mut k = 0;
    for &m in &mult {
        out.push(sorted[k..k + m].iter().sum::<f64>() / m as f64);
        k += m;
    }
    (out, mult)
}

/// Exact spectrum of the flat cross-section, first `count` distinct values.
pub fn cross_section_spectrum(x: &CrossSection, count: usize) -> Result<SpectrumTable, SpectralError> {
    if count == 0 {
        return Err(SpectralError::InvalidCount);
    }
    x.validate()?;
    let (eigenvalues, multiplicities) = match *x {
        CrossSection::Circle { radius, .. } => {
            let ev = (0..count).map(|k| (k * k) as f64 / (radius * radius)).collect();
            let mult = (0..count).map(|k| if k == 0 { 1 } else { 2 }).collect();
            (ev, mult)
        }
        CrossSection::FlatTorus { r1, r2, .. } => torus_spectrum(r1, r2, count),
    };
    Ok(SpectrumTable {
        eigenvalues,
        multiplicities,
        source: SpectrumSource::Analytic,
    })
}

fn torus_spectrum(r1: f64, r2: f64, count: usize) -> (Vec<f64>, Vec<usize>) {
    let mut bound = count as i64 + 1;
    loop {
        let mut all = Vec::new();
        for m in -bound..=bound {
            for n in -bound..=bound {
                all.push((m * m) as f64 / (r1 * r1) + (n * n) as f64 / (r2 * r2));
            }
        }
        all.sort_by(f64::total_cmp);
        let (vals, mult) = group(&all, |a, b| (b - a).abs() <= ANALYTIC_GROUP_TOL * a.max(1.0));
        // every lattice point with value below this threshold was enumerated
        let safe = ((bound + 1) as f64 / r1.max(r2)).powi(2);
        if vals.len() > count && vals[count - 1] < safe {
            return (vals[..count].to_vec(), mult[..count].to_vec());
        }
        bound *= 2;
    }
}

/// Spectrum of the discrete cross-section Laplacian on its own mesh,
/// at least `count` eigenvalues counted with multiplicity.
pub fn discrete_cross_section_spectrum(
    x: &CrossSection,
    count: usize,
) -> Result<SpectrumTable, SpectralError> {
    if count == 0 {
        return Err(SpectralError::InvalidCount);
    }
    x.validate()?;
    let mesh = CrossMesh::from_cross_section(x);
    let lap = cross_section_laplacian(&mesh);
    let pairs = eigen_smallest(&lap, count.min(lap.nrows()))?;
    let values: Vec<f64> = pairs.iter().map(|p| p.value.max(0.0)).collect();
    let (eigenvalues, multiplicities) = group(&values, |a, b| {
        (b - a).abs() <= DISCRETE_GROUP_TOL * a.max(1.0)
    });
    Ok(SpectrumTable {
        eigenvalues,
        multiplicities,
        source: SpectrumSource::Discrete,
    })
}

/// Roots `±√λ` of the translation-invariant model operator, with the
/// dimension of the corresponding solution space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndicialSet {
    pub roots: Vec<f64>,
    pub multiplicities: Vec<usize>,
    /// Distance from 0 to the nearest nonzero root.
    pub gap: f64,
}

impl IndicialSet {
    pub fn d(&self, eps: f64) -> usize {
        self.roots
            .iter()
            .position(|&r| (r - eps).abs() <= ROOT_TOL)
            .map_or(0, |k| self.multiplicities[k])
    }

    /// Largest root magnitude covered by the table.
    pub fn limit(&self) -> f64 {
        self.roots.last().copied().unwrap_or(0.0)
    }

    fn check_weight(&self, w: f64) -> Result<(), SpectralError> {
        if let Some(&root) = self.roots.iter().find(|&&r| (r - w).abs() <= ROOT_TOL) {
            return Err(SpectralError::AtRoot { weight: w, root });
        }
        if w.abs() >= self.limit() {
            return Err(SpectralError::OutsideTable {
                weight: w,
                limit: self.limit(),
            });
        }
        Ok(())
    }
}

pub fn indicial_set(spectrum: &SpectrumTable, b0: usize) -> IndicialSet {
    let mut pairs: Vec<(f64, usize)> = Vec::new();
    for (&l, &m) in spectrum.eigenvalues.iter().zip(&spectrum.multiplicities) {
        if l <= ANALYTIC_GROUP_TOL {
            pairs.push((0.0, 2 * b0));
        } else {
            let s = l.sqrt();
            pairs.push((s, m));
            pairs.push((-s, m));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let gap = spectrum.first_positive().map_or(f64::INFINITY, f64::sqrt);
    IndicialSet {
        roots: pairs.iter().map(|p| p.0).collect(),
        multiplicities: pairs.iter().map(|p| p.1).collect(),
        gap,
    }
}

/// Change of index `Σ_{α<ε<δ} d(ε)` for a single end.
pub fn index_jump(set: &IndicialSet, alpha: f64, delta: f64) -> Result<usize, SpectralError> {
    if alpha > delta {
        return Err(SpectralError::InvalidInterval { alpha, delta });
    }
    set.check_weight(alpha)?;
    set.check_weight(delta)?;
    Ok(set
        .roots
        .iter()
        .zip(&set.multiplicities)
        .filter(|(&r, _)| alpha < r && r < delta)
        .map(|(_, &d)| d)
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexRecord {
    pub weight: f64,
    pub fredholm: bool,
    pub index: i64,
    pub predicted_ker_dim: usize,
    pub predicted_coker_dim: usize,
}

/// Index of the Laplacian between weighted spaces with weight `alpha` on a
/// manifold with `ends` ends, all modelled on `set`.
///
/// Self-adjointness makes the index odd in `alpha`, and the jump across 0 is
/// `ends · d(0)`. Decaying harmonic functions vanish by the maximum
/// principle, so the kernel is trivial for negative weights and the
/// cokernel for positive ones.
pub fn fredholm_index(set: &IndicialSet, ends: usize, alpha: f64) -> Result<IndexRecord, SpectralError> {
    set.check_weight(alpha)?;
    let l = ends as i64;
    let half = (set.d(0.0) / 2) as i64;
    let between = index_jump(set, -alpha.abs(), alpha.abs())? as i64;
    let magnitude = l * half + l * (between - set.d(0.0) as i64) / 2;
    let index = if alpha < 0.0 { -magnitude } else { magnitude };
    let (ker, coker) = if index >= 0 {
        (index as usize, 0)
    } else {
        (0, (-index) as usize)
    };
    Ok(IndexRecord {
        weight: alpha,
        fredholm: true,
        index,
        predicted_ker_dim: ker,
        predicted_coker_dim: coker,
    })
}

/// Spectral gap `√λ₁` of the asymptotic cross-section.
pub fn spectral_gap(spec: &ManifoldSpec) -> Result<f64, SpectralError> {
    let table = cross_section_spectrum(&spec.asymptotic_cross_section(), 2)?;
    Ok(table.first_positive().map_or(f64::INFINITY, f64::sqrt))
}

/// Midpoint of the negative half of the spectral gap.
pub fn default_weight(spec: &ManifoldSpec) -> Result<f64, SpectralError> {
    Ok(-0.5 * spectral_gap(spec)?)
}

/// Kernel and cokernel dimensions for a weight inside the spectral gap.
pub fn predict_dims(spec: &ManifoldSpec, alpha: f64) -> Result<IndexRecord, SpectralError> {
    spec.validate()?;
    let x = spec.asymptotic_cross_section();
    let gap = spectral_gap(spec)?;
    if alpha == 0.0 {
        return Err(SpectralError::AtRoot { weight: 0.0, root: 0.0 });
    }
    if alpha.abs() >= gap {
        return Err(SpectralError::OutsideGap { weight: alpha, gap });
    }
    let set = indicial_set(&cross_section_spectrum(&x, 3)?, x.b0());
    fredholm_index(&set, spec.end_count(), alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn circle_set(r: f64, count: usize) -> IndicialSet {
        indicial_set(&cross_section_spectrum(&CrossSection::circle(r, 64), count).unwrap(), 1)
    }

    #[test]
    fn analytic_tables() {
        let c = cross_section_spectrum(&CrossSection::circle(1.0, 64), 3).unwrap();
        assert_eq!(c.eigenvalues, vec![0.0, 1.0, 4.0]);
        assert_eq!(c.multiplicities, vec![1, 2, 2]);
        let c2 = cross_section_spectrum(&CrossSection::circle(2.0, 64), 2).unwrap();
        assert_eq!(c2.eigenvalues, vec![0.0, 0.25]);
        let t = cross_section_spectrum(&CrossSection::flat_torus(1.0, 1.0, 16), 2).unwrap();
        assert_eq!(t.eigenvalues, vec![0.0, 1.0]);
        assert_eq!(t.multiplicities, vec![1, 4]);
        let t = cross_section_spectrum(&CrossSection::flat_torus(1.0, 1.0, 16), 4).unwrap();
        assert_eq!(t.eigenvalues, vec![0.0, 1.0, 2.0, 4.0]);
        assert_eq!(t.multiplicities, vec![1, 4, 4, 4]);
        let t = cross_section_spectrum(&CrossSection::flat_torus(1.0, 2.0, 16), 3).unwrap();
        assert_eq!(t.eigenvalues, vec![0.0, 0.25, 1.0]);
        assert_eq!(t.multiplicities, vec![1, 2, 4]);
        assert_eq!(
            cross_section_spectrum(&CrossSection::circle(1.0, 64), 0),
            Err(SpectralError::InvalidCount)
        );
    }

    #[test]
    fn discrete_table_matches_closed_form() {
        let n = 64;
        let d = discrete_cross_section_spectrum(&CrossSection::circle(1.0, n), 5).unwrap();
        let h = 2.0 * std::f64::consts::PI / n as f64;
        let exact: Vec<f64> = (0..3)
            .map(|k| 4.0 * (std::f64::consts::PI * k as f64 / n as f64).sin().powi(2) / (h * h))
            .collect();
        assert_eq!(d.multiplicities, vec![1, 2, 2]);
        for (a, b) in d.eigenvalues.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!((d.eigenvalues[1] - 0.999197).abs() < 1e-6);
    }

    #[test]
    fn discrete_spectrum_converges_at_second_order() {
        let exact = cross_section_spectrum(&CrossSection::circle(1.0, 8), 3).unwrap().expanded();
        let err = |n: usize| {
            let d = discrete_cross_section_spectrum(&CrossSection::circle(1.0, n), 5).unwrap();
            d.expanded()
                .iter()
                .zip(&exact)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2, e3) = (err(16), err(32), err(64));
        assert!((e1 / e2).log2() > 1.9 && (e2 / e3).log2() > 1.9);

        let exact = cross_section_spectrum(&CrossSection::flat_torus(1.0, 1.0, 8), 3).unwrap();
        let exact = exact.expanded();
        let t = |n| {
            let d = discrete_cross_section_spectrum(&CrossSection::flat_torus(1.0, 1.0, n), 9)
                .unwrap()
                .expanded();
            d.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        assert!((t(16) / t(32)).log2() > 1.9);
    }

    #[test]
    fn indicial_examples() {
        let s = circle_set(1.0, 4);
        assert_eq!(s.roots, vec![-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]);
        assert_eq!(s.d(0.0), 2);
        assert_eq!(s.d(1.0), 2);
        assert_eq!(s.d(-1.0), 2);
        assert_eq!(s.gap, 1.0);
        let s2 = circle_set(2.0, 3);
        assert_eq!(s2.gap, 0.5);
        assert!(s2.roots.contains(&-0.5));
    }

    #[test]
    fn jump_examples() {
        let s = circle_set(1.0, 4);
        assert_eq!(index_jump(&s, -0.5, 0.5), Ok(2));
        assert_eq!(index_jump(&s, -1.5, 1.5), Ok(6));
        assert_eq!(index_jump(&s, -0.5, -0.5), Ok(0));
        assert!(matches!(index_jump(&s, -1.0, 0.5), Err(SpectralError::AtRoot { .. })));
        assert!(matches!(index_jump(&s, 0.0, 0.5), Err(SpectralError::AtRoot { .. })));
        assert!(matches!(index_jump(&s, -0.5, 7.0), Err(SpectralError::OutsideTable { .. })));
        assert!(matches!(
            index_jump(&s, 0.5, -0.5),
            Err(SpectralError::InvalidInterval { .. })
        ));
    }

    #[test]
    fn predicted_dimensions() {
        let two = ManifoldSpec::flat_cylinder(1.0, 16, 8.0, 0.1);
        let r = predict_dims(&two, -0.5).unwrap();
        assert_eq!((r.predicted_coker_dim, r.predicted_ker_dim, r.index), (2, 0, -2));
        let r = predict_dims(&two, 0.5).unwrap();
        assert_eq!((r.predicted_ker_dim, r.index), (2, 2));
        let one = ManifoldSpec::cigar(1.0, 16, 8.0, 0.1);
        let r = predict_dims(&one, -0.5).unwrap();
        assert_eq!((r.predicted_coker_dim, r.predicted_ker_dim, r.index), (1, 0, -1));
        assert!(matches!(predict_dims(&two, -1.5), Err(SpectralError::OutsideGap { .. })));
        assert!(matches!(predict_dims(&two, 0.0), Err(SpectralError::AtRoot { .. })));
        assert_eq!(default_weight(&two).unwrap(), -0.5);
        let wide = ManifoldSpec::flat_cylinder(2.0, 16, 12.0, 0.1);
        assert_eq!(default_weight(&wide).unwrap(), -0.25);
    }

    #[test]
    fn index_beyond_the_gap() {
        let s = circle_set(1.0, 4);
        let r = fredholm_index(&s, 2, -1.5).unwrap();
        assert_eq!(r.index, -6);
        assert_eq!(fredholm_index(&s, 2, 1.5).unwrap().index, 6);
        assert_eq!(r.index, r.predicted_ker_dim as i64 - r.predicted_coker_dim as i64);
    }

    proptest! {
        #[test]
        fn roots_are_symmetric(r in 0.3f64..3.0, count in 2usize..8) {
            let s = circle_set(r, count);
            for (&e, &d) in s.roots.iter().zip(&s.multiplicities) {
                prop_assert_eq!(s.d(-e), d);
            }
            prop_assert!(s.roots.contains(&0.0));
        }

        #[test]
        fn index_is_antisymmetric(alpha in 0.01f64..3.9, ends in 1usize..3) {
            let s = circle_set(1.0, 6);
            prop_assume!(s.roots.iter().all(|r| (r.abs() - alpha).abs() > 1e-6));
            let lo = fredholm_index(&s, ends, -alpha).unwrap();
            let hi = fredholm_index(&s, ends, alpha).unwrap();
            prop_assert_eq!(lo.index, -hi.index);
            let jump = index_jump(&s, -alpha, alpha).unwrap() as i64;
            prop_assert_eq!(hi.index - lo.index, ends as i64 * jump);
        }
    }
}
