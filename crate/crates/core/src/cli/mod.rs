//! Command-line front end: scenario configs, the staged pipeline, the
//! built-in acceptance suite, and report output.

pub mod config;
pub mod pipeline;
pub mod report;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{CrossSection, ManifoldSpec, Topology, WarpProfile};
pub use config::{ConfigError, ScenarioConfig, Stage, Sweeps, Tolerances};
pub use pipeline::run_scenario;
pub use report::{Report, Status, SuiteReport, Verdict};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Overrides applied to every built-in scenario.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
}

impl SuiteConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: SuiteConfig = config::parse_json(text)?;
        if cfg.schema_version != config::SCHEMA_VERSION {
            return Err(ConfigError::Invalid {
                field: "schema_version".into(),
                message: format!("unsupported version {}", cfg.schema_version),
            });
        }
        cfg.tolerances.validate()?;
        Ok(cfg)
    }
}

const MESH: usize = 64;
const R: f64 = 8.0;
const H: f64 = 0.05;

fn flat() -> ManifoldSpec {
    ManifoldSpec::flat_cylinder(1.0, MESH, R, H)
}

fn warped() -> ManifoldSpec {
    ManifoldSpec::sech_cylinder(0.3, MESH, R, H)
}

/// The acceptance scenarios, sorted by name.
pub fn builtin_scenarios(suite: &SuiteConfig) -> Vec<ScenarioConfig> {
    let unit_slopes = config::AsymptoticsConfig {
        slopes: vec![1.0, -1.0],
        offsets: Some(vec![0.0, 0.0]),
    };
    let refinement = Sweeps {
        h_list: Some(vec![0.1, 0.05, 0.025]),
        ..Default::default()
    };
    let torus = ManifoldSpec::new(
        Topology::TwoEndCylinder,
        CrossSection::flat_torus(1.0, 1.5, 32),
        WarpProfile::Constant { c: 1.0 },
        R,
        H,
    );
    let mut out = vec![
        ScenarioConfig::new("cigar", ManifoldSpec::cigar(1.0, MESH, R, H)),
        ScenarioConfig {
            sweeps: Sweeps {
                s_list: Some(vec![0.05, 0.1, 0.2]),
                ..Default::default()
            },
            ..ScenarioConfig::new("dichotomy", flat()).with_stages(&[Stage::Dichotomy])
        },
        ScenarioConfig::new("flat_cylinder", flat()),
        ScenarioConfig {
            asymptotics: Some(unit_slopes.clone()),
            sweeps: refinement.clone(),
            ..ScenarioConfig::new("flat_refinement", flat()).with_stages(&[Stage::Refinement])
        },
        ScenarioConfig::new("torus_spectrum", torus).with_stages(&[Stage::Spectrum, Stage::Indicial]),
        ScenarioConfig::new("warped_cylinder", warped()),
        ScenarioConfig {
            sweeps: refinement,
            ..ScenarioConfig::new("warped_refinement", warped()).with_stages(&[Stage::Refinement])
        },
    ];
    for c in &mut out {
        c.tolerances = suite.tolerances.clone();
        c.seed = suite.seed;
    }
    out
}

/// Keeps the whole scenario when its name matches, otherwise only the
/// stages whose names match.
pub fn apply_filter(cfg: ScenarioConfig, filter: Option<&str>) -> Option<ScenarioConfig> {
    let Some(f) = filter else { return Some(cfg) };
    if cfg.name.contains(f) {
        return Some(cfg);
    }
    let stages: Vec<Stage> = cfg.stages.iter().copied().filter(|s| s.name().contains(f)).collect();
    if stages.is_empty() {
        None
    } else {
        Some(cfg.with_stages(&stages))
    }
}

/// Runs the built-in scenarios concurrently; the result is ordered by name.
pub fn run_suite(suite: &SuiteConfig, filter: Option<&str>) -> Result<SuiteReport, ConfigError> {
    let configs: Vec<ScenarioConfig> = builtin_scenarios(suite)
        .into_iter()
        .filter_map(|c| apply_filter(c, filter))
        .collect();
    if configs.is_empty() {
        return Err(ConfigError::Invalid {
            field: "filter".into(),
            message: format!("`{}` matches no scenario or stage", filter.unwrap_or_default()),
        });
    }
    let reports = configs
        .par_iter()
        .map(run_scenario)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SuiteReport::new(
        filter.map(str::to_string),
        suite.seed,
        suite.tolerances.clone(),
        reports,
    ))
}

pub fn exit_code<'a>(reports: impl IntoIterator<Item = &'a Report>) -> i32 {
    let mut failed = false;
    let mut errored = false;
    for r in reports {
        failed |= r.failed_checks().next().is_some();
        errored |= !r.stage_errors.is_empty();
    }
    if failed {
        EXIT_CHECK_FAILED
    } else if errored {
        EXIT_NUMERICAL
    } else {
        EXIT_PASS
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Flat,
    Warped,
    Cigar,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory for report.json and CSV tables; without it the JSON goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Restrict to scenarios or stages whose name contains this string.
    #[arg(long)]
    pub filter: Option<String>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Built-in model used when no config is given.
    #[arg(long, value_enum, default_value = "flat")]
    pub model: Model,
}

#[derive(Debug, Parser)]
#[command(name = "acyl", version, about = "Harmonic functions and the Bochner splitting test on asymptotically cylindrical surfaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cross-section spectrum against the Fourier oracle.
    Spectrum(Common),
    /// Indicial roots, multiplicities and index bookkeeping.
    Indicial(Common),
    /// Obstruction map and harmonic solve.
    Harmonic {
        #[command(flatten)]
        common: Common,
        /// Slopes C_i, comma separated.
        #[arg(long = "C", value_delimiter = ',', allow_hyphen_values = true)]
        slopes: Option<Vec<f64>>,
        /// Offsets D_i, comma separated.
        #[arg(long = "D", value_delimiter = ',', allow_hyphen_values = true)]
        offsets: Option<Vec<f64>>,
    },
    /// Weitzenböck residuals and the Bochner identity over the R sweep.
    Bochner(Common),
    /// Gradient-flow product test.
    Split(Common),
    /// Full pipeline, or the stages listed in the config.
    Run(Common),
    /// Built-in acceptance scenarios.
    Suite(Common),
}

fn builtin(model: Model) -> ScenarioConfig {
    match model {
        Model::Flat => ScenarioConfig::new("flat_cylinder", flat()),
        Model::Warped => ScenarioConfig::new("warped_cylinder", warped()),
        Model::Cigar => ScenarioConfig::new("cigar", ManifoldSpec::cigar(1.0, MESH, R, H)),
    }
}

fn scenario(common: &Common, stages: Option<&[Stage]>) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = match &common.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => builtin(common.model),
    };
    if let Some(s) = stages {
        cfg.stages = s.to_vec();
    }
    Ok(cfg)
}

fn write_outputs(out: &Path, format: Format, json: &str, reports: &[&Report]) -> std::io::Result<()> {
    std::fs::create_dir_all(out)?;
    if format != Format::Csv {
        std::fs::write(out.join("report.json"), json)?;
    }
    if format != Format::Json {
        let prefix = reports.len() > 1;
        for r in reports {
            for t in &r.tables {
                report::write_table(out, if prefix { &r.scenario } else { "" }, t)?;
            }
        }
        report::write_verdicts(out, reports)?;
    }
    Ok(())
}

fn emit(common: &Common, json: String, reports: &[&Report]) -> i32 {
    let summary: String = reports.iter().map(|r| report::human_summary(r)).collect();
    match &common.out {
        Some(dir) => {
            if let Err(e) = write_outputs(dir, common.format, &json, reports) {
                eprintln!("error: cannot write to {}: {e}", dir.display());
                return EXIT_CONFIG;
            }
            print!("{summary}");
        }
        None => {
            if common.format != Format::Json {
                eprintln!("error: CSV output needs --out <dir>");
                return EXIT_CONFIG;
            }
            print!("{json}");
            eprint!("{summary}");
        }
    }
    let code = exit_code(reports.iter().copied());
    for r in reports {
        for v in r.failed_checks() {
            eprintln!("failed check: {}/{}", r.scenario, v.check);
        }
    }
    code
}

fn config_failure(e: ConfigError) -> i32 {
    eprintln!("config error: {e}");
    EXIT_CONFIG
}

fn run_single(common: &Common, cfg: Result<ScenarioConfig, ConfigError>) -> i32 {
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => return config_failure(e),
    };
    let Some(cfg) = apply_filter(cfg, common.filter.as_deref()) else {
        return config_failure(ConfigError::Invalid {
            field: "filter".into(),
            message: "matches no stage".into(),
        });
    };
    match run_scenario(&cfg) {
        Ok(r) => emit(common, report::to_json(&r), &[&r]),
        Err(e) => config_failure(e),
    }
}

/// Dispatches a parsed command line and returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    match cli.command {
        Command::Spectrum(c) => run_single(&c, scenario(&c, Some(&[Stage::Spectrum]))),
        Command::Indicial(c) => run_single(&c, scenario(&c, Some(&[Stage::Indicial]))),
        Command::Harmonic {
            common,
            slopes,
            offsets,
        } => {
            let cfg = scenario(&common, Some(&[Stage::Phi, Stage::Harmonic])).and_then(|mut cfg| {
                if slopes.is_some() || offsets.is_some() {
                    let base = cfg.asymptotics.take();
                    let slopes = slopes
                        .or_else(|| base.as_ref().map(|b| b.slopes.clone()))
                        .ok_or_else(|| ConfigError::Invalid {
                            field: "C".into(),
                            message: "offsets given without slopes".into(),
                        })?;
                    cfg.asymptotics = Some(config::AsymptoticsConfig {
                        slopes,
                        offsets: offsets.or(base.and_then(|b| b.offsets)),
                    });
                }
                cfg.validate()?;
                Ok(cfg)
            });
            run_single(&common, cfg)
        }
        Command::Bochner(c) => run_single(&c, scenario(&c, Some(&[Stage::Weitzenbock, Stage::Bochner]))),
        Command::Split(c) => run_single(&c, scenario(&c, Some(&[Stage::Split]))),
        Command::Run(c) => run_single(&c, scenario(&c, None)),
        Command::Suite(c) => {
            let suite = match &c.config {
                Some(p) => config::read_file(p).and_then(|t| SuiteConfig::from_json(&t)),
                None => Ok(SuiteConfig {
                    schema_version: config::SCHEMA_VERSION,
                    ..Default::default()
                }),
            };
            let report = match suite.and_then(|s| run_suite(&s, c.filter.as_deref())) {
                Ok(r) => r,
                Err(e) => return config_failure(e),
            };
            let refs: Vec<&Report> = report.scenarios.iter().collect();
            emit(&c, report::to_json(&report), &refs)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_selects_stages() {
        let cfg = ScenarioConfig::new("flat_cylinder", flat());
        let f = apply_filter(cfg.clone(), Some("indicial")).unwrap();
        assert_eq!(f.stages, vec![Stage::Indicial]);
        assert_eq!(apply_filter(cfg.clone(), Some("flat")).unwrap().stages, cfg.stages);
        assert!(apply_filter(cfg, Some("nothing")).is_none());
    }

    #[test]
    fn builtin_names_are_sorted_and_unique() {
        let names: Vec<String> = builtin_scenarios(&SuiteConfig::default()).into_iter().map(|c| c.name).collect();
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(names, sorted);
        for c in builtin_scenarios(&SuiteConfig::default()) {
            c.validate().unwrap();
        }
    }

    #[test]
    fn empty_stage_list_echoes_config() {
        let cfg = ScenarioConfig::new("empty", flat()).with_stages(&[]);
        let r = run_scenario(&cfg).unwrap();
        assert!(r.verdicts.is_empty() && r.passed);
        let json = report::to_json(&r);
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["config"]["name"], "empty");
        assert_eq!(v["stages"], serde_json::json!({}));
        assert!(v["config"]["weight"].as_f64().unwrap() < 0.0);
    }

    #[test]
    fn indicial_stage_alone() {
        let cfg = ScenarioConfig::new("x", ManifoldSpec::flat_cylinder(1.0, 32, 8.0, 0.1)).with_stages(&[Stage::Indicial]);
        let r = run_scenario(&cfg).unwrap();
        assert!(r.passed, "{}", report::human_summary(&r));
        assert!(r.verdicts.iter().all(|v| v.check.starts_with("indicial.")));
    }
}
