//! Runs the stages of one scenario and turns their outputs into verdicts.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ConfigError, ScenarioConfig, Stage};
use super::report::{Report, Source, Table, Verdict, REPORT_SCHEMA_VERSION, SIGN_CONVENTION};
use crate::discretize::CgOptions;
use crate::geometry::{build_manifold, CrossSection, Manifold, ManifoldSpec, Topology};
use crate::harmonic::{AsymptoticData, HarmonicError, HarmonicOptions, HarmonicProblem, HarmonicSolution};
use crate::oracle::{fourier_circle_spectrum, grad_gamma_sup, inverse_warp_integral};
use crate::spectral::{
    cross_section_spectrum, default_weight, discrete_cross_section_spectrum, index_jump, indicial_set,
    predict_dims, IndexRecord, IndicialSet, SpectrumTable,
};
use crate::verify::bochner::line_fit;
use crate::verify::flow::SplitOptions;
use crate::verify::{
    boundary_decay_scan, covariant_derivative, dichotomy_sweep, differential, evaluation_rings, split_check,
    weitzenbock_residual, DecayScan, DichotomyReport, OneForm, SplitReport,
};

/// Distinct analytic eigenvalues requested from the cross-section.
const SPECTRUM_COUNT: usize = 4;

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumStage {
    pub analytic: SpectrumTable,
    pub discrete: SpectrumTable,
    /// Pseudo-spectral eigenvalues with multiplicity.
    pub fourier: Vec<f64>,
    pub max_discrete_error: f64,
    pub discrete_band: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IndicialStage {
    pub set: IndicialSet,
    pub oracle_roots: Vec<f64>,
    pub oracle_multiplicities: Vec<usize>,
    pub weight: f64,
    pub index_jump: usize,
    pub index: IndexRecord,
}

#[derive(Debug, Clone, Serialize)]
pub struct FluxCheck {
    pub data: AsymptoticData,
    pub measured: f64,
    pub expected: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhiStage {
    pub weight: f64,
    pub ends: usize,
    pub nullity: usize,
    pub rank: usize,
    pub gap: f64,
    pub singular_values: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub nullspace: Vec<Vec<f64>>,
    pub cokernel_residuals: Vec<f64>,
    pub cokernel_gram_ratio: f64,
    pub flux: FluxCheck,
}

#[derive(Debug, Clone, Serialize)]
pub struct ObstructionRecord {
    pub slope: f64,
    pub value: f64,
    pub expected: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OdeComparison {
    /// `f ≈ slope·∫dt/w + intercept`.
    pub slope: f64,
    pub intercept: f64,
    pub sup_error: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradGamma {
    pub sup: f64,
    pub oracle: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HarmonicStage {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub obstruction: Option<ObstructionRecord>,
    pub solution: HarmonicSolution,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ode: Option<OdeComparison>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grad_gamma: Option<GradGamma>,
    pub spread: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FormResidual {
    pub form: String,
    pub residual: f64,
    pub hodge_sup: f64,
    pub form_sup: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WeitzenbockStage {
    pub bound: f64,
    pub forms: Vec<FormResidual>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BochnerStage {
    /// `asymptotic_solution`, or `angular_mode` on one-end models, where the
    /// asymptotic solution is constant.
    pub test_function: &'static str,
    pub scan: DecayScan,
}

#[derive(Debug, Clone, Serialize)]
pub struct RefinementPoint {
    pub h: f64,
    pub error: f64,
    pub relative_error: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RefinementStage {
    /// `exact` compares with `C t + D` directly; `ode` with the affine fit.
    pub reference: &'static str,
    pub points: Vec<RefinementPoint>,
    pub orders: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct StageResults {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumStage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub indicial: Option<IndicialStage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<PhiStage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub harmonic: Option<HarmonicStage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weitzenbock: Option<WeitzenbockStage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bochner: Option<BochnerStage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refinement: Option<RefinementStage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dichotomy: Option<DichotomyReport>,
}

/// Why a stage produced no result.
enum Halt {
    Error(String),
    Skip(String),
}

impl<E: std::fmt::Display> From<E> for Halt {
    fn from(e: E) -> Self {
        Halt::Error(e.to_string())
    }
}

type StageResult = Result<(), Halt>;

struct Run<'a> {
    cfg: &'a ScenarioConfig,
    alpha: f64,
    problem: Option<Result<HarmonicProblem, String>>,
    harmonic: Option<Result<Vec<f64>, String>>,
    results: StageResults,
    verdicts: Vec<Verdict>,
    tables: Vec<Table>,
}

/// Executes the configured stages in dependency order. Stage failures are
/// recorded in the report; stages depending on a failed one are skipped.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Report, ConfigError> {
    cfg.validate()?;
    let alpha = match cfg.weight {
        Some(a) => a,
        None => default_weight(&cfg.manifold).map_err(|e| ConfigError::Invalid {
            field: "weight".into(),
            message: e.to_string(),
        })?,
    };
    let mut resolved = cfg.clone();
    resolved.weight = Some(alpha);
    if cfg.wants(Stage::Bochner) {
        resolved.sweeps.r_list = Some(bochner_radii(cfg));
    }
    if [Stage::Harmonic, Stage::Bochner, Stage::Split, Stage::Refinement].iter().any(|&s| cfg.wants(s)) {
        resolved.asymptotics = Some(requested_asymptotics(cfg));
    }

    let mut run = Run {
        cfg: &resolved,
        alpha,
        problem: None,
        harmonic: None,
        results: StageResults::default(),
        verdicts: Vec::new(),
        tables: Vec::new(),
    };
    let mut stage_errors = BTreeMap::new();
    let mut skipped = BTreeMap::new();
    let mut timings = Vec::new();
    for stage in resolved.ordered_stages() {
        let start = Instant::now();
        let outcome = match stage {
            Stage::Spectrum => run.spectrum(),
            Stage::Indicial => run.indicial(),
            Stage::Phi => run.phi(),
            Stage::Harmonic => run.harmonic_stage(),
            Stage::Weitzenbock => run.weitzenbock(),
            Stage::Bochner => run.bochner(),
            Stage::Split => run.split(),
            Stage::Refinement => run.refinement(),
            Stage::Dichotomy => run.dichotomy(),
        };
        timings.push((stage.name().to_string(), start.elapsed().as_secs_f64()));
        match outcome {
            Ok(()) => {}
            Err(Halt::Error(e)) => {
                stage_errors.insert(stage.name().to_string(), e);
            }
            Err(Halt::Skip(why)) => {
                skipped.insert(stage.name().to_string(), why);
            }
        }
    }
    let Run {
        results,
        verdicts,
        tables,
        ..
    } = run;
    let passed = stage_errors.is_empty() && verdicts.iter().all(Verdict::ok);
    Ok(Report {
        schema_version: REPORT_SCHEMA_VERSION,
        scenario: resolved.name.clone(),
        sign_convention: SIGN_CONVENTION,
        config: resolved,
        stages: results,
        stage_errors,
        skipped,
        verdicts,
        passed,
        tables,
        timings,
    })
}

fn bochner_radii(cfg: &ScenarioConfig) -> Vec<f64> {
    if let Some(r) = &cfg.sweeps.r_list {
        return r.clone();
    }
    let max = cfg.manifold.truncation_r - 2.0 * cfg.manifold.grid_h;
    let standard = [5.0, 6.0, 7.0];
    if standard.iter().all(|&r| r <= max) {
        standard.to_vec()
    } else {
        let r = cfg.manifold.truncation_r;
        vec![0.5 * r, 0.625 * r, 0.75 * r]
    }
}

fn requested_asymptotics(cfg: &ScenarioConfig) -> super::config::AsymptoticsConfig {
    if let Some(a) = &cfg.asymptotics {
        return a.clone();
    }
    match cfg.manifold.topology {
        Topology::TwoEndCylinder => super::config::AsymptoticsConfig {
            slopes: vec![1.0, -1.0],
            offsets: None,
        },
        Topology::OneEndCapped => super::config::AsymptoticsConfig {
            slopes: vec![1.0],
            offsets: Some(vec![0.0]),
        },
    }
}

fn circle_radius(m: &Manifold) -> Option<f64> {
    match m.spec.cross_section {
        CrossSection::Circle { radius, .. } => Some(radius),
        _ => None,
    }
}

fn sup_abs(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(0.0, |a, x| a.max(x.abs()))
}

/// Fourier eigenvalues of a flat cross-section, with multiplicity.
fn fourier_spectrum(x: &CrossSection, count: usize) -> Vec<f64> {
    match *x {
        CrossSection::Circle { radius, mesh_points } => fourier_circle_spectrum(radius, mesh_points, count),
        CrossSection::FlatTorus { r1, r2, mesh_points } => {
            let a = fourier_circle_spectrum(r1, mesh_points, count);
            let b = fourier_circle_spectrum(r2, mesh_points, count);
            let mut all: Vec<f64> = a.iter().flat_map(|x| b.iter().map(move |y| x + y)).collect();
            all.sort_by(f64::total_cmp);
            all.truncate(count);
            all
        }
    }
}

/// Groups sorted values within `tol`, dropping the last group, which may be
/// cut short by truncation.
fn complete_groups(values: &[f64], tol: f64) -> (Vec<f64>, Vec<usize>) {
    let mut vals: Vec<f64> = Vec::new();
    let mut mult: Vec<usize> = Vec::new();
    for &x in values {
        match vals.last() {
            Some(&v) if (x - v).abs() <= tol * v.max(1.0) => *mult.last_mut().unwrap() += 1,
            _ => {
                vals.push(x);
                mult.push(1);
            }
        }
    }
    vals.pop();
    mult.pop();
    (vals, mult)
}

/// `sup |f - (c·I + d)|` after a least-squares fit of `f` against `I`.
fn affine_comparison(m: &Manifold, f: &[f64]) -> OdeComparison {
    let ring_integral: Vec<f64> = m
        .grid
        .t_nodes()
        .iter()
        .map(|&t| inverse_warp_integral(&m.spec.warp, 0.0, t))
        .collect();
    let x: Vec<f64> = (0..f.len()).map(|v| ring_integral[m.grid.ring_of(v).0]).collect();
    let pts: Vec<(f64, f64)> = x.iter().copied().zip(f.iter().copied()).collect();
    let (slope, intercept) = line_fit(&pts);
    let sup_error = sup_abs(x.iter().zip(f).map(|(a, b)| slope * a + intercept - b));
    OdeComparison {
        slope,
        intercept,
        sup_error,
        relative_error: sup_error / sup_abs(f.iter().copied()),
    }
}

fn test_forms(m: &Manifold, seed: u64) -> Result<Vec<(String, OneForm)>, Halt> {
    let mut forms = vec![
        ("dt".to_string(), OneForm::sample(m, |_, _| 1.0, |_, _| 0.0)?),
        (
            "gaussian_cos_dt".to_string(),
            OneForm::sample(m, |t, th| (-t * t / 8.0).exp() * th.cos(), |_, _| 0.0)?,
        ),
        (
            "oscillating_dtheta".to_string(),
            OneForm::sample(m, |_, _| 0.0, |t, th| (0.5 * t).cos() * th.sin())?,
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coef: Vec<[f64; 4]> = (0..3)
        .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
        .collect();
    let field = move |t: f64, th: f64, row: usize| -> f64 {
        let c = &coef[row];
        (c[0] + c[1] * th.cos() + c[2] * (2.0 * th).sin()) / (0.25 * t).cosh() + c[3] * (0.3 * t).sin() / 3.0
    };
    forms.push((
        format!("random_seed_{seed}"),
        OneForm::sample(m, |t, th| field(t, th, 0), |t, th| field(t, th, 1))?,
    ));
    Ok(forms)
}

impl Run<'_> {
    fn spec(&self) -> &ManifoldSpec {
        &self.cfg.manifold
    }

    fn tol(&self) -> &super::config::Tolerances {
        &self.cfg.tolerances
    }

    fn check(&mut self, v: Verdict) {
        self.verdicts.push(v);
    }

    fn problem(&mut self) -> Result<&HarmonicProblem, Halt> {
        if self.problem.is_none() {
            self.problem = Some(HarmonicProblem::new(self.spec(), self.alpha).map_err(|e| e.to_string()));
        }
        match self.problem.as_ref().expect("set above") {
            Ok(p) => Ok(p),
            Err(e) => Err(Halt::Skip(format!("obstruction map unavailable: {e}"))),
        }
    }

    fn manifold(&mut self) -> Result<Manifold, Halt> {
        match &self.problem {
            Some(Ok(p)) => Ok(p.manifold.clone()),
            _ => Ok(build_manifold(self.spec())?),
        }
    }

    fn spectrum(&mut self) -> StageResult {
        let x = self.spec().asymptotic_cross_section();
        let analytic = cross_section_spectrum(&x, SPECTRUM_COUNT)?;
        let expected = analytic.expanded();
        let discrete = discrete_cross_section_spectrum(&x, expected.len())?;
        let fourier = fourier_spectrum(&x, expected.len());

        let max_discrete_error = sup_abs(discrete.expanded().iter().zip(&expected).map(|(a, b)| a - b));
        let h_theta = std::f64::consts::TAU / x.mesh_points() as f64;
        let r_max = x.radii().into_iter().fold(0.0, f64::max);
        let lam = expected.last().copied().unwrap_or(0.0);
        let discrete_band = self.tol().spectrum_band_factor * lam * lam * r_max * r_max * h_theta * h_theta / 12.0;
        let fourier_error = sup_abs(fourier.iter().zip(&expected).map(|(a, b)| a - b));

        self.check(Verdict::at_most(
            "spectrum.fourier_agreement",
            fourier_error,
            self.tol().indicial_roots,
            Source::FourierOracle,
        ));
        self.check(Verdict::at_most(
            "spectrum.discrete_band",
            max_discrete_error,
            discrete_band,
            Source::ClosedForm,
        ));
        let mut table = Table::new("spectrum", &["index", "analytic", "discrete", "fourier"]);
        for (k, lam) in expected.iter().enumerate() {
            table.push(vec![
                k as f64,
                *lam,
                discrete.expanded().get(k).copied().unwrap_or(f64::NAN),
                fourier.get(k).copied().unwrap_or(f64::NAN),
            ]);
        }
        self.tables.push(table);
        self.results.spectrum = Some(SpectrumStage {
            analytic,
            discrete,
            fourier,
            max_discrete_error,
            discrete_band,
        });
        Ok(())
    }

    fn indicial(&mut self) -> StageResult {
        let x = self.spec().asymptotic_cross_section();
        let b0 = x.b0();
        let analytic = cross_section_spectrum(&x, SPECTRUM_COUNT)?;
        let set = indicial_set(&analytic, b0);

        // roots and multiplicities rebuilt from the Fourier eigenvalues alone
        let oracle_eigs = fourier_spectrum(&x, analytic.expanded().len() + 8);
        let (values, mult) = complete_groups(&oracle_eigs, 1e-8);
        let mut pairs: Vec<(f64, usize)> = Vec::new();
        for (&l, &m) in values.iter().zip(&mult).take(SPECTRUM_COUNT) {
            if l.abs() < 1e-8 {
                pairs.push((0.0, 2 * m));
            } else {
                pairs.push((l.sqrt(), m));
                pairs.push((-l.sqrt(), m));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let oracle_roots: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let oracle_multiplicities: Vec<usize> = pairs.iter().map(|p| p.1).collect();

        let root_error = if oracle_roots.len() == set.roots.len() {
            sup_abs(oracle_roots.iter().zip(&set.roots).map(|(a, b)| a - b))
        } else {
            f64::INFINITY
        };
        let mismatches = if oracle_multiplicities.len() == set.multiplicities.len() {
            oracle_multiplicities.iter().zip(&set.multiplicities).filter(|(a, b)| a != b).count()
        } else {
            set.multiplicities.len().max(oracle_multiplicities.len())
        };
        let alpha = self.alpha;
        let jump = index_jump(&set, alpha, -alpha)?;
        let index = predict_dims(self.spec(), alpha)?;
        let ends = self.spec().end_count();

        self.check(Verdict::at_most(
            "indicial.roots_vs_oracle",
            root_error,
            self.tol().indicial_roots,
            Source::FourierOracle,
        ));
        self.check(Verdict::count("indicial.multiplicity_mismatches", mismatches, 0));
        self.check(Verdict::count("indicial.d0", set.d(0.0), 2 * b0));
        self.check(Verdict::count("indicial.index_jump", jump, 2 * b0));
        self.check(Verdict::count("indicial.coker_dim", index.predicted_coker_dim, ends));
        self.check(Verdict::count("indicial.ker_dim", index.predicted_ker_dim, 0));
        self.results.indicial = Some(IndicialStage {
            set,
            oracle_roots,
            oracle_multiplicities,
            weight: alpha,
            index_jump: jump,
            index,
        });
        Ok(())
    }

    fn phi(&mut self) -> StageResult {
        if let Some(Err(e)) = &self.problem {
            return Err(Halt::Error(e.clone()));
        }
        let p = match self.problem() {
            Ok(p) => p,
            Err(Halt::Skip(e)) => return Err(Halt::Error(e)),
            Err(e) => return Err(e),
        };
        let ends = p.manifold.end_count();
        let data = AsymptoticData::new(vec![1.0; ends], vec![0.0; ends])?;
        let f0 = crate::harmonic::build_f0(&p.manifold, &data)?;
        let measured = p.outward_flux(&f0);
        let expected = p.expected_flux(&data);
        let relative_error = (measured - expected).abs() / expected.abs();
        let stage = PhiStage {
            weight: p.alpha,
            ends,
            nullity: p.phi.nullity,
            rank: p.phi.rank,
            gap: p.phi.gap,
            singular_values: p.phi.singular_values.clone(),
            rows: p.phi.rows.clone(),
            nullspace: p.phi.nullspace.clone(),
            cokernel_residuals: p.basis.residuals.clone(),
            cokernel_gram_ratio: p.basis.gram_ratio,
            flux: FluxCheck {
                data,
                measured,
                expected,
                relative_error,
            },
        };
        let mut table = Table::new("phi_singular_values", &["index", "sigma"]);
        for (k, s) in stage.singular_values.iter().enumerate() {
            table.push(vec![k as f64, *s]);
        }
        self.tables.push(table);
        self.check(Verdict::count("phi.nullity", stage.nullity, ends));
        self.check(Verdict::at_least("phi.gap", stage.gap, self.tol().phi_gap, Source::Structural));
        self.check(Verdict::at_most(
            "phi.flux_identity",
            relative_error,
            self.tol().flux_relative,
            Source::FluxOracle,
        ));
        self.results.phi = Some(stage);
        Ok(())
    }

    fn options(&self) -> HarmonicOptions {
        HarmonicOptions {
            auto_project: self.cfg.auto_project,
            closure: self.cfg.closure,
            ..Default::default()
        }
    }

    fn harmonic_stage(&mut self) -> StageResult {
        let outcome = self.solve_harmonic();
        self.harmonic = Some(match &outcome {
            Ok(()) => Ok(self.results.harmonic.as_ref().expect("stored").solution.f.clone()),
            Err(Halt::Error(e) | Halt::Skip(e)) => Err(e.clone()),
        });
        outcome
    }

    fn solve_harmonic(&mut self) -> StageResult {
        let opts = self.options();
        let tol = self.tol().clone();
        let requested = self.cfg.asymptotics.clone().expect("resolved");
        let alpha = self.alpha;
        let p = self.problem()?;
        let m = &p.manifold;
        let h = m.grid.h_t();
        let mut verdicts = Vec::new();
        let mut obstruction = None;

        let data = match m.end_count() {
            1 => {
                let offsets = requested.offsets.clone().unwrap_or(vec![0.0]);
                let slope = requested.slopes[0];
                if slope != 0.0 {
                    let asked = AsymptoticData::new(vec![slope], offsets.clone())?;
                    let expected = slope * m.spec.asymptotic_cross_section().volume();
                    match p.solve(&asked, &opts) {
                        Err(HarmonicError::Obstructed { obstruction: value, .. }) => {
                            let relative_error = (value - expected).abs() / expected.abs();
                            verdicts.push(
                                Verdict::above("harmonic.one_end_rejected", value.abs(), 0.0, Source::FluxOracle)
                                    .expected_failure(),
                            );
                            verdicts.push(Verdict::at_most(
                                "harmonic.obstruction_value",
                                relative_error,
                                tol.obstruction_relative,
                                Source::FluxOracle,
                            ));
                            obstruction = Some(ObstructionRecord {
                                slope,
                                value,
                                expected,
                                relative_error,
                            });
                        }
                        Err(e) => return Err(e.into()),
                        Ok(_) => verdicts.push(
                            Verdict::above("harmonic.one_end_rejected", 0.0, 0.0, Source::FluxOracle)
                                .expected_failure()
                                .with_note("nonzero slope on a single end was accepted"),
                        ),
                    }
                }
                let fallback = if slope != 0.0 && offsets.iter().all(|&d| d == 0.0) {
                    vec![1.0]
                } else {
                    offsets
                };
                AsymptoticData::new(vec![0.0], fallback)?
            }
            _ => {
                let offsets = match &requested.offsets {
                    Some(d) => d.clone(),
                    None => p.phi.admissible_offsets(&requested.slopes).ok_or_else(|| {
                        Halt::Error(format!("slopes {:?} admit no offsets in Ker Φ", requested.slopes))
                    })?,
                };
                AsymptoticData::new(requested.slopes.clone(), offsets)?
            }
        };

        let sol = p.solve(&data, &opts)?;
        let f = &sol.f;
        let spread = f.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) - f.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        verdicts.push(Verdict::at_most(
            "harmonic.laplacian_residual",
            sol.laplacian_residual,
            tol.harmonic_residual,
            Source::ClosedForm,
        ));
        let decay_ratio = sol.decay.iter().map(|d| d.sup / d.bound).fold(0.0, f64::max);
        verdicts.push(Verdict::at_most("harmonic.decay", decay_ratio, 1.0, Source::ClosedForm));

        let mut ode = None;
        let mut grad_gamma = None;
        if m.end_count() == 1 {
            verdicts.push(Verdict::at_most(
                "harmonic.constant_spread",
                spread,
                tol.constant_spread,
                Source::ClosedForm,
            ));
        } else {
            let cmp = affine_comparison(m, f);
            verdicts.push(Verdict::at_most(
                "harmonic.ode_oracle",
                cmp.relative_error,
                tol.ode_relative,
                Source::OdeOracle,
            ));
            let d = &sol.data;
            let linear = (d.slopes[0] + d.slopes[1]).abs() < 1e-9 && (d.offsets[0] - d.offsets[1]).abs() < 1e-9;
            if m.spec.warp.is_flat() && linear {
                let t = m.grid.node_t();
                let err = sup_abs(f.iter().zip(&t).map(|(fv, tv)| fv - d.slopes[0] * tv - d.offsets[0]));
                let bound = tol.flat_error_factor * (h * h + (alpha * m.spec.truncation_r).exp());
                verdicts.push(Verdict::at_most("harmonic.flat_linear", err, bound, Source::ClosedForm));
            }
            if circle_radius(m).is_some() && !m.spec.warp.is_flat() {
                let gamma = differential(m, f)?;
                let sup = covariant_derivative(m, &gamma)?.sup_norm(m);
                let (lo, hi) = evaluation_rings(m);
                let tn = m.grid.t_nodes();
                let oracle = grad_gamma_sup(&m.spec.warp, cmp.slope, tn[lo], tn[hi]);
                let relative_error = (sup - oracle).abs() / oracle;
                verdicts.push(Verdict::at_most(
                    "harmonic.grad_gamma_oracle",
                    relative_error,
                    tol.grad_gamma_relative,
                    Source::ClosedForm,
                ));
                grad_gamma = Some(GradGamma {
                    sup,
                    oracle,
                    relative_error,
                });
            }
            ode = Some(cmp);
        }

        let mut table = Table::new("harmonic_profile", &["t", "f", "f0"]);
        for i in 0..m.grid.rings() {
            let v = m.grid.node(i, 0);
            table.push(vec![m.grid.t_nodes()[i], f[v], sol.f0[v]]);
        }
        self.tables.push(table);
        self.verdicts.extend(verdicts);
        self.results.harmonic = Some(HarmonicStage {
            obstruction,
            solution: sol,
            ode,
            grad_gamma,
            spread,
        });
        Ok(())
    }

    fn harmonic_function(&mut self) -> Result<Vec<f64>, Halt> {
        if self.harmonic.is_none() {
            // run silently when the harmonic stage itself was not requested
            let saved = (self.verdicts.len(), self.tables.len());
            let outcome = self.harmonic_stage();
            self.verdicts.truncate(saved.0);
            self.tables.truncate(saved.1);
            self.results.harmonic = None;
            if let Err(Halt::Error(e)) = outcome {
                return Err(Halt::Error(e));
            }
        }
        match self.harmonic.as_ref().expect("set above") {
            Ok(f) => Ok(f.clone()),
            Err(e) => Err(Halt::Skip(format!("harmonic solve unavailable: {e}"))),
        }
    }

    fn require_surface(&mut self) -> Result<(), Halt> {
        match self.spec().cross_section {
            CrossSection::Circle { .. } => Ok(()),
            _ => Err(Halt::Skip("form checks are implemented for circle cross-sections".into())),
        }
    }

    fn weitzenbock(&mut self) -> StageResult {
        self.require_surface()?;
        let h = self.h_of_template();
        let bound = self.tol().weitzenbock_factor * h * h;
        let seed = self.cfg.seed;
        let m = &self.manifold()?;
        let mut forms = Vec::new();
        for (name, xi) in test_forms(m, seed)? {
            let w = weitzenbock_residual(m, &xi)?;
            forms.push(FormResidual {
                form: name,
                residual: w.residual,
                hodge_sup: w.hodge_sup,
                form_sup: w.form_sup,
            });
        }
        let mut table = Table::new("weitzenbock", &["form", "residual", "hodge_sup", "form_sup"]);
        for (k, f) in forms.iter().enumerate() {
            table.push(vec![k as f64, f.residual, f.hodge_sup, f.form_sup]);
            self.verdicts.push(Verdict::at_most(
                &format!("weitzenbock.{}", f.form),
                f.residual,
                bound,
                Source::Calibrated,
            ));
        }
        self.tables.push(table);
        self.results.weitzenbock = Some(WeitzenbockStage { bound, forms });
        Ok(())
    }

    fn bochner(&mut self) -> StageResult {
        self.require_surface()?;
        let one_end = self.spec().end_count() == 1;
        let f = if one_end { self.angular_mode()? } else { self.harmonic_function()? };
        let h = self.h_of_template();
        let radii = self.cfg.sweeps.r_list.clone().expect("resolved");
        let tol = self.tol().clone();
        let m = &self.problem()?.manifold;
        let flat = m.spec.warp.is_flat();
        let gamma = differential(m, &f)?;
        let scan = boundary_decay_scan(m, &gamma, &radii)?;
        let mut table = Table::new(
            "bochner_sweep",
            &["R", "interior", "ricci", "boundary_1", "boundary_2", "residual"],
        );
        for b in &scan.reports {
            let bound = tol.bochner_factor * h * h * (b.interior_energy + 1.0);
            self.verdicts.push(Verdict::at_most(
                &format!("bochner.identity_R{}", b.r),
                b.identity_residual,
                bound,
                Source::Calibrated,
            ));
            if flat {
                self.verdicts.push(Verdict::at_most(
                    &format!("bochner.flat_energy_R{}", b.r),
                    b.interior_energy,
                    tol.flat_energy,
                    Source::ClosedForm,
                ));
            }
            table.push(vec![
                b.r,
                b.interior_energy,
                b.ricci_term,
                b.boundary_terms.first().copied().unwrap_or(f64::NAN),
                b.boundary_terms.get(1).copied().unwrap_or(f64::NAN),
                b.identity_residual,
            ]);
        }
        self.tables.push(table);
        self.results.bochner = Some(BochnerStage {
            test_function: if one_end { "angular_mode" } else { "asymptotic_solution" },
            scan,
        });
        Ok(())
    }

    /// Harmonic function equal to `cos θ` on the truncation ring.
    fn angular_mode(&mut self) -> Result<Vec<f64>, Halt> {
        let p = self.problem()?;
        let g = &p.manifold.grid;
        let boundary = g.sample(|_, th| th[0].cos());
        let sol = p.laplacian.solve_dirichlet(&vec![0.0; g.len()], &boundary, &CgOptions::default())?;
        Ok(sol.u)
    }

    fn split(&mut self) -> StageResult {
        self.require_surface()?;
        if self.spec().topology == Topology::OneEndCapped {
            return Err(Halt::Skip("a single end forces f constant, so there is no flow".into()));
        }
        let f = self.harmonic_function()?;
        let h = self.h_of_template();
        let tol = self.tol().clone();
        let m = &self.problem()?.manifold;
        let report = split_check(m, &f, &SplitOptions::with_tol(tol.split_factor * h * h))?;
        if m.spec.warp.is_flat() {
            let defect = report
                .defect_g_ss
                .max(report.defect_g_s_theta)
                .max(report.defect_ds_g_theta_theta);
            self.verdicts.push(Verdict::at_most("split.max_defect", defect, report.tol, Source::Calibrated));
            self.verdicts.push(Verdict::at_most(
                "split.level_residual",
                report.level_residual,
                tol.level_residual,
                Source::ClosedForm,
            ));
            self.verdicts.push(Verdict::count("split.injective", report.injective as usize, 1));
        } else {
            self.verdicts.push(
                Verdict::above(
                    "split.warping_detected",
                    report.defect_ds_g_theta_theta,
                    tol.warping_defect,
                    Source::ClosedForm,
                )
                .expected_failure(),
            );
        }
        self.results.split = Some(report);
        Ok(())
    }

    fn refinement(&mut self) -> StageResult {
        if self.spec().topology != Topology::TwoEndCylinder {
            return Err(Halt::Skip("refinement compares two-end solutions".into()));
        }
        let hs = self.cfg.sweeps.h_list.clone().expect("validated");
        let requested = self.cfg.asymptotics.clone().expect("resolved");
        let opts = self.options();
        let alpha = self.alpha;
        let tol = self.tol().clone();
        let template = self.spec().clone();
        let exact = template.warp.is_flat();
        let points: Vec<Result<RefinementPoint, String>> = hs
            .par_iter()
            .map(|&h| {
                let spec = ManifoldSpec {
                    grid_h: h,
                    ..template.clone()
                };
                let p = HarmonicProblem::new(&spec, alpha).map_err(|e| e.to_string())?;
                let offsets = match &requested.offsets {
                    Some(d) => d.clone(),
                    None => p
                        .phi
                        .admissible_offsets(&requested.slopes)
                        .ok_or_else(|| "slopes admit no offsets in Ker Φ".to_string())?,
                };
                let data = AsymptoticData::new(requested.slopes.clone(), offsets).map_err(|e| e.to_string())?;
                let sol = p.solve(&data, &opts).map_err(|e| e.to_string())?;
                let m = &p.manifold;
                let ht = m.grid.h_t();
                let scale = sup_abs(sol.f.iter().copied());
                let (error, bound) = if exact {
                    let d = &sol.data;
                    let t = m.grid.node_t();
                    let err = sup_abs(sol.f.iter().zip(&t).map(|(fv, tv)| fv - d.slopes[0] * tv - d.offsets[0]));
                    (err, tol.flat_error_factor * (ht * ht + (alpha * spec.truncation_r).exp()))
                } else {
                    let cmp = affine_comparison(m, &sol.f);
                    (cmp.sup_error, tol.ode_relative * scale)
                };
                Ok(RefinementPoint {
                    h: ht,
                    error,
                    relative_error: error / scale,
                    bound,
                })
            })
            .collect();
        let points = points.into_iter().collect::<Result<Vec<_>, _>>().map_err(Halt::Error)?;
        let orders: Vec<f64> = points
            .windows(2)
            .map(|w| (w[0].error / w[1].error).ln() / (w[0].h / w[1].h).ln())
            .collect();
        let mut table = Table::new("refinement", &["h", "error", "relative_error", "bound"]);
        for pt in &points {
            table.push(vec![pt.h, pt.error, pt.relative_error, pt.bound]);
            self.verdicts.push(Verdict::at_most(
                &format!("refinement.error_h{}", pt.h),
                pt.error,
                pt.bound,
                if exact { Source::ClosedForm } else { Source::OdeOracle },
            ));
        }
        let max_error = points.iter().map(|p| p.error).fold(0.0, f64::max);
        if max_error <= tol.rounding_floor {
            self.verdicts.push(
                Verdict::at_most("refinement.exact", max_error, tol.rounding_floor, Source::ClosedForm)
                    .with_note("errors at rounding level: the scheme reproduces this solution exactly, so no order is observable"),
            );
        } else {
            let order = orders.iter().copied().fold(f64::INFINITY, f64::min);
            self.verdicts.push(Verdict::at_least(
                "refinement.order",
                order,
                tol.convergence_order,
                Source::Refinement,
            ));
        }
        self.tables.push(table);
        self.results.refinement = Some(RefinementStage {
            reference: if exact { "exact" } else { "ode" },
            points,
            orders,
        });
        Ok(())
    }

    fn dichotomy(&mut self) -> StageResult {
        self.require_surface()?;
        let amplitudes = self.cfg.sweeps.s_list.clone().expect("validated");
        let h = self.h_of_template();
        let tol = self.tol().clone();
        let split_tol = tol.split_factor * h * h;
        let report = dichotomy_sweep(self.spec(), &amplitudes, self.alpha, split_tol)?;
        let min_step = report
            .points
            .windows(2)
            .map(|w| w[1].sup_grad_gamma - w[0].sup_grad_gamma)
            .fold(f64::INFINITY, f64::min);
        self.verdicts.push(
            Verdict::above("dichotomy.strictly_increasing", min_step, 0.0, Source::Structural)
                .with_note("smallest increment of sup|∇γ| between consecutive amplitudes"),
        );
        self.verdicts.push(Verdict::at_most(
            "dichotomy.intercept",
            report.fit_intercept.abs(),
            2.0 * split_tol,
            Source::Calibrated,
        ));
        self.verdicts.push(Verdict::at_most(
            "dichotomy.slope_spread",
            report.slope_spread,
            tol.slope_spread,
            Source::Calibrated,
        ));
        self.verdicts.push(Verdict::at_most(
            "dichotomy.flat_grad_gamma",
            report.flat_sup_grad_gamma,
            split_tol,
            Source::Calibrated,
        ));
        let s = &report.flat_split;
        let defect = s.defect_g_ss.max(s.defect_g_s_theta).max(s.defect_ds_g_theta_theta);
        self.verdicts.push(Verdict::at_most("dichotomy.flat_split_defect", defect, split_tol, Source::Calibrated));
        self.verdicts.push(Verdict::count("dichotomy.flat_split_injective", s.injective as usize, 1));
        let mut table = Table::new("dichotomy", &["s", "sup_grad_gamma", "interior_energy"]);
        table.push(vec![0.0, report.flat_sup_grad_gamma, f64::NAN]);
        for p in &report.points {
            table.push(vec![p.amplitude, p.sup_grad_gamma, p.interior_energy]);
        }
        self.tables.push(table);
        self.results.dichotomy = Some(report);
        Ok(())
    }

    /// Actual `t` spacing of the configured grid, without assembling it.
    fn h_of_template(&self) -> f64 {
        let s = self.spec();
        let (a, b) = s.t_range();
        (b - a) / s.intervals() as f64
    }
}
