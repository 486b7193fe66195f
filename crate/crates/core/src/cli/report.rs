//! Verdicts, reports, and their byte-stable JSON and CSV renderings.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use super::config::{ScenarioConfig, Tolerances};
use super::pipeline::StageResults;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const SIGN_CONVENTION: &str = "Delta = -div grad (nonnegative spectrum)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// A rejection the theory predicts, observed as predicted.
    ExpectedFail,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::ExpectedFail => "XFAIL",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `measured <= tolerance`
    AtMost,
    /// `measured >= tolerance`
    AtLeast,
    /// `measured > tolerance`
    Above,
    /// `|measured - expected| <= tolerance`
    Near,
}

/// Where the value a check compares against comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    /// Pseudo-spectral cross-section eigenvalues.
    FourierOracle,
    /// Quadrature of the separated radial equation.
    OdeOracle,
    /// Cross-section volume times slope.
    FluxOracle,
    /// Closed-form expression in the warp profile.
    ClosedForm,
    /// Integer from index theory or counting.
    Structural,
    /// `C·h²` band with the constant fixed by refinement on the flat model.
    Calibrated,
    /// Observed order across a refinement triple.
    Refinement,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub check: String,
    pub status: Status,
    pub measured: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<f64>,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub expected_source: Source,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Verdict {
    fn build(check: &str, measured: f64, expected: Option<f64>, tolerance: f64, comparison: Comparison, source: Source) -> Self {
        let ok = match comparison {
            Comparison::AtMost => measured <= tolerance,
            Comparison::AtLeast => measured >= tolerance,
            Comparison::Above => measured > tolerance,
            Comparison::Near => (measured - expected.unwrap_or(f64::NAN)).abs() <= tolerance,
        };
        Verdict {
            check: check.to_string(),
            status: if ok { Status::Pass } else { Status::Fail },
            measured,
            expected,
            tolerance,
            comparison,
            expected_source: source,
            note: None,
        }
    }

    pub fn at_most(check: &str, measured: f64, tolerance: f64, source: Source) -> Self {
        Self::build(check, measured, None, tolerance, Comparison::AtMost, source)
    }

    pub fn at_least(check: &str, measured: f64, tolerance: f64, source: Source) -> Self {
        Self::build(check, measured, None, tolerance, Comparison::AtLeast, source)
    }

    pub fn above(check: &str, measured: f64, tolerance: f64, source: Source) -> Self {
        Self::build(check, measured, None, tolerance, Comparison::Above, source)
    }

    pub fn near(check: &str, measured: f64, expected: f64, tolerance: f64, source: Source) -> Self {
        Self::build(check, measured, Some(expected), tolerance, Comparison::Near, source)
    }

    /// Integer equality.
    pub fn count(check: &str, measured: usize, expected: usize) -> Self {
        Self::near(check, measured as f64, expected as f64, 0.0, Source::Structural)
    }

    /// Marks a passing check as a predicted rejection.
    pub fn expected_failure(mut self) -> Self {
        if self.status == Status::Pass {
            self.status = Status::ExpectedFail;
        }
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn ok(&self) -> bool {
        self.status != Status::Fail
    }
}

/// A plot-ready table destined for CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub scenario: String,
    pub sign_convention: &'static str,
    /// The configuration with every default filled in.
    pub config: ScenarioConfig,
    pub stages: StageResults,
    pub stage_errors: BTreeMap<String, String>,
    pub skipped: BTreeMap<String, String>,
    pub verdicts: Vec<Verdict>,
    pub passed: bool,
    #[serde(skip)]
    pub tables: Vec<Table>,
    /// Wall-clock seconds per stage; kept out of the JSON.
    #[serde(skip)]
    pub timings: Vec<(String, f64)>,
}

impl Report {
    pub fn failed_checks(&self) -> impl Iterator<Item = &Verdict> {
        self.verdicts.iter().filter(|v| !v.ok())
    }

    pub fn verdict(&self, check: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.check == check)
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Tally {
    pub checks: usize,
    pub passed: usize,
    pub expected_failures: usize,
    pub failed: usize,
    pub stage_errors: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub schema_version: u32,
    pub sign_convention: &'static str,
    pub filter: Option<String>,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub scenarios: Vec<Report>,
    pub tally: Tally,
    pub passed: bool,
}

impl SuiteReport {
    pub fn new(filter: Option<String>, seed: u64, tolerances: Tolerances, mut scenarios: Vec<Report>) -> Self {
        scenarios.sort_by(|a, b| a.scenario.cmp(&b.scenario));
        let mut tally = Tally::default();
        for r in &scenarios {
            tally.stage_errors += r.stage_errors.len();
            for v in &r.verdicts {
                tally.checks += 1;
                match v.status {
                    Status::Pass => tally.passed += 1,
                    Status::ExpectedFail => tally.expected_failures += 1,
                    Status::Fail => tally.failed += 1,
                }
            }
        }
        SuiteReport {
            schema_version: REPORT_SCHEMA_VERSION,
            sign_convention: SIGN_CONVENTION,
            filter,
            seed,
            tolerances,
            passed: scenarios.iter().all(|r| r.passed),
            scenarios,
            tally,
        }
    }
}

/// Pretty JSON with every float in `{:.16e}` form (17 significant digits).
struct FixedFloats(PrettyFormatter<'static>);

macro_rules! delegate {
    ($($name:ident$(($arg:ident: $ty:ty))?),* $(,)?) => {
        $(
            fn $name<W: ?Sized + Write>(&mut self, w: &mut W $(, $arg: $ty)?) -> io::Result<()> {
                self.0.$name(w $(, $arg)?)
            }
        )*
    };
}

impl Formatter for FixedFloats {
    delegate!(
        begin_array,
        end_array,
        begin_array_value(first: bool),
        end_array_value,
        begin_object,
        end_object,
        begin_object_key(first: bool),
        end_object_key,
        begin_object_value,
        end_object_value,
    );

    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{}", format_float(value))
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
}

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloats(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("report types serialize infallibly");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

pub fn write_table(dir: &Path, prefix: &str, t: &Table) -> io::Result<()> {
    let name = if prefix.is_empty() {
        format!("{}.csv", t.name)
    } else {
        format!("{prefix}_{}.csv", t.name)
    };
    let mut w = csv::Writer::from_path(dir.join(name))?;
    w.write_record(&t.header)?;
    for row in &t.rows {
        w.write_record(row.iter().map(|x| format_float(*x)))?;
    }
    w.flush()
}

pub fn verdict_table(reports: &[&Report]) -> Vec<Vec<String>> {
    let mut rows = vec![vec![
        "scenario".to_string(),
        "check".into(),
        "status".into(),
        "measured".into(),
        "tolerance".into(),
        "expected_source".into(),
    ]];
    for r in reports {
        for v in &r.verdicts {
            let source = serde_json::to_value(v.expected_source).expect("unit enum");
            rows.push(vec![
                r.scenario.clone(),
                v.check.clone(),
                v.status.label().to_string(),
                format_float(v.measured),
                format_float(v.tolerance),
                source.as_str().unwrap_or_default().to_string(),
            ]);
        }
    }
    rows
}

pub fn write_verdicts(dir: &Path, reports: &[&Report]) -> io::Result<()> {
    let mut w = csv::Writer::from_path(dir.join("verdicts.csv"))?;
    for row in verdict_table(reports) {
        w.write_record(&row)?;
    }
    w.flush()
}

/// One line per verdict, then stage errors and timings.
pub fn human_summary(r: &Report) -> String {
    let mut s = format!("scenario {}\n", r.scenario);
    for v in &r.verdicts {
        s.push_str(&format!(
            "  {:<5} {:<40} measured {:>12.5e}  tol {:>10.3e}\n",
            v.status.label(),
            v.check,
            v.measured,
            v.tolerance
        ));
    }
    for (stage, e) in &r.stage_errors {
        s.push_str(&format!("  ERROR {stage}: {e}\n"));
    }
    for (stage, why) in &r.skipped {
        s.push_str(&format!("  SKIP  {stage}: {why}\n"));
    }
    let total: f64 = r.timings.iter().map(|t| t.1).sum();
    let parts: Vec<String> = r.timings.iter().map(|(n, t)| format!("{n} {t:.2}s")).collect();
    s.push_str(&format!("  time {total:.2}s ({})\n", parts.join(", ")));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits() {
        #[derive(Serialize)]
        struct S {
            a: f64,
            b: Vec<f64>,
            c: f64,
        }
        let text = to_json(&S {
            a: 0.1,
            b: vec![1.0, -2.5e-300],
            c: f64::NAN,
        });
        assert!(text.contains("\"a\": 1.0000000000000001e-1"), "{text}");
        assert!(text.contains("1.0000000000000000e0"));
        assert!(text.contains("-2.5000000000000000e-300"));
        assert!(text.contains("\"c\": null"));
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.1));
    }

    #[test]
    fn verdict_comparisons() {
        assert!(Verdict::at_most("x", 1.0, 1.0, Source::Calibrated).ok());
        assert!(!Verdict::at_most("x", 1.0, 0.0, Source::Calibrated).ok());
        assert!(Verdict::at_least("x", 2.0, 1.0, Source::Structural).ok());
        assert!(!Verdict::above("x", 1.0, 1.0, Source::Structural).ok());
        assert!(Verdict::count("x", 2, 2).ok());
        assert!(!Verdict::count("x", 1, 2).ok());
        assert!(!Verdict::near("x", f64::NAN, 1.0, 1.0, Source::ClosedForm).ok());
        let x = Verdict::above("x", 2.0, 1.0, Source::ClosedForm).expected_failure();
        assert_eq!(x.status, Status::ExpectedFail);
        assert!(x.ok());
        let y = Verdict::above("x", 0.0, 1.0, Source::ClosedForm).expected_failure();
        assert_eq!(y.status, Status::Fail);
    }
}
