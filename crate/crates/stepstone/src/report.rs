//! Experiment reports: per-check verdicts, plot-ready curves, a seed
//! ledger, and the writers that put them on disk.
//!
//! A report is self-contained: it embeds the canonical configuration text
//! and the master seed, so the run that produced it can be repeated
//! exactly. Timestamps and wall-clock are the only fields allowed to
//! differ between two runs of the same configuration.

use crate::error::{Error, Result};
use crate::seeds::child_seed;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

/// Version of the report layout; bumped on any incompatible change.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
    /// The check could not run; the detail holds the error. Counted as a
    /// failure for exit purposes, but siblings still ran.
    Error,
}

/// One verified statement: an observed value judged against a bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    /// The measured quantity, when the check produced one.
    pub estimate: Option<f64>,
    /// What the estimate was judged against (tolerance, band, SE multiple).
    pub bound: Option<f64>,
    pub verdict: Verdict,
    pub detail: String,
}

impl CheckResult {
    pub fn judged(name: impl Into<String>, estimate: f64, bound: f64, pass: bool) -> CheckResult {
        CheckResult {
            name: name.into(),
            estimate: Some(estimate),
            bound: Some(bound),
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
            detail: format!("{estimate:.6e} vs bound {bound:.6e}"),
        }
    }

    pub fn within(name: impl Into<String>, estimate: f64, bound: f64) -> CheckResult {
        Self::judged(name, estimate, bound, estimate <= bound)
    }

    pub fn flag(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> CheckResult {
        CheckResult {
            name: name.into(),
            estimate: None,
            bound: None,
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
            detail: detail.into(),
        }
    }

    pub fn from_error(name: impl Into<String>, err: &Error) -> CheckResult {
        CheckResult {
            name: name.into(),
            estimate: None,
            bound: None,
            verdict: Verdict::Error,
            detail: err.to_string(),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// One aligned text line, e.g. for terminal output.
    pub fn render(&self) -> String {
        let verdict = match self.verdict {
            Verdict::Pass => "PASS ",
            Verdict::Fail => "FAIL ",
            Verdict::Error => "ERROR",
        };
        format!("{verdict}  {:<58} {}", self.name, self.detail)
    }
}

/// A point of a distribution-style curve with its confidence band.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: f64,
    pub cdf: f64,
    pub lo: f64,
    pub hi: f64,
}

/// A named plot-ready curve; serialized as CSV with header `t,cdf,lo,hi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub name: String,
    pub points: Vec<CurvePoint>,
}

impl Curve {
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "t,cdf,lo,hi")?;
        for p in &self.points {
            writeln!(out, "{},{},{},{}", p.t, p.cdf, p.lo, p.hi)?;
        }
        Ok(())
    }
}

/// One replicate family in the seed ledger.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedEntry {
    /// The derivation tag the module mixes into the master seed.
    pub tag: String,
    /// How many replicate indices the family spans: 0..replicates.
    pub replicates: u64,
    /// The derived seed at index 0, as a spot check of the rule.
    pub first: u64,
}

/// Record of every random stream the run consumed. Together with the
/// stated rule this pins the seed of any single replicate, so one
/// replicate can be re-run in isolation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedLedger {
    pub master: u64,
    /// Human-readable statement of the derivation rule.
    pub rule: String,
    pub entries: Vec<SeedEntry>,
}

impl SeedLedger {
    pub fn new(master: u64) -> SeedLedger {
        SeedLedger {
            master,
            rule: "child(master, tag, index): three SplitMix64 rounds folding the master seed, \
                   the tag bytes in 8-byte chunks, and the replicate index; streams are ChaCha8 \
                   keyed by the child seed"
                .into(),
            entries: Vec::new(),
        }
    }

    /// Record that `tag` consumes `replicates` more child indices under
    /// `master`. Repeated calls with one tag accumulate into one entry.
    pub fn record(&mut self, tag: &str, replicates: u64) {
        if let Some(entry) = self.entries.iter_mut().find(|e| e.tag == tag) {
            entry.replicates += replicates;
            return;
        }
        self.entries.push(SeedEntry {
            tag: tag.to_string(),
            replicates,
            first: child_seed(self.master, tag, 0),
        });
    }
}

/// The complete outcome of one experiment run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    /// Experiment kind, e.g. "duality".
    pub kind: String,
    /// Canonical configuration text; parsing it reproduces the run.
    pub config: String,
    pub code_version: String,
    /// Unix time the run started. Volatile: excluded from comparisons.
    pub started_unix: u64,
    /// Volatile: excluded from comparisons.
    pub wall_clock_secs: f64,
    pub checks: Vec<CheckResult>,
    pub curves: Vec<Curve>,
    pub seeds: SeedLedger,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    /// The report as JSON with the volatile fields zeroed, for
    /// reproducibility comparisons.
    pub fn comparable_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v["started_unix"] = 0.into();
        v["wall_clock_secs"] = 0.into();
        v
    }

    /// Terminal summary: one line per check plus a verdict tail line.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            s.push_str(&c.render());
            s.push('\n');
        }
        let passed = self.checks.iter().filter(|c| c.passed()).count();
        s.push_str(&format!(
            "{}: {passed}/{} checks passed in {:.1}s\n",
            if self.passed() { "PASS" } else { "FAIL" },
            self.checks.len(),
            self.wall_clock_secs
        ));
        s
    }
}

/// Output selection for `write_report`. JSON is always written; the
/// choice only controls whether curves additionally become CSV tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportFormat {
    Json,
    Csv,
    Both,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Option<ReportFormat> {
        match s {
            "json" => Some(ReportFormat::Json),
            "csv" => Some(ReportFormat::Csv),
            "both" => Some(ReportFormat::Both),
            _ => None,
        }
    }

    fn wants_csv(&self) -> bool {
        !matches!(self, ReportFormat::Json)
    }
}

fn io_context(e: std::io::Error, path: &Path) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

/// Write the report under `dir`: `report.json` always, one
/// `curve-<name>.csv` per curve when CSV output is selected, and an
/// `index.json` naming every artifact. Returns the paths written.
pub fn write_report(
    report: &ExperimentReport,
    dir: impl AsRef<Path>,
    format: ReportFormat,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| io_context(e, dir))?;
    let mut written = Vec::new();

    let report_path = dir.join("report.json");
    let json = serde_json::to_string_pretty(report)?;
    std::fs::write(&report_path, json).map_err(|e| io_context(e, &report_path))?;
    written.push(report_path);

    if format.wants_csv() {
        for curve in &report.curves {
            let name: String = curve
                .name
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '-' })
                .collect();
            let path = dir.join(format!("curve-{name}.csv"));
            let mut buf = Vec::new();
            curve.write_csv(&mut buf)?;
            std::fs::write(&path, buf).map_err(|e| io_context(e, &path))?;
            written.push(path);
        }
    }

    #[derive(Serialize)]
    struct Index<'a> {
        schema_version: u32,
        kind: &'a str,
        passed: bool,
        artifacts: Vec<String>,
    }
    let index = Index {
        schema_version: SCHEMA_VERSION,
        kind: &report.kind,
        passed: report.passed(),
        artifacts: written
            .iter()
            .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
            .collect(),
    };
    let index_path = dir.join("index.json");
    std::fs::write(&index_path, serde_json::to_string_pretty(&index)?)
        .map_err(|e| io_context(e, &index_path))?;
    written.push(index_path);
    Ok(written)
}

/// Load a report back, refusing any schema version this build does not
/// understand.
pub fn load_report(path: impl AsRef<Path>) -> Result<ExperimentReport> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| io_context(e, path))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let got = value.get("schema_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if got != SCHEMA_VERSION {
        return Err(Error::SchemaVersion { expected: SCHEMA_VERSION, got });
    }
    Ok(serde_json::from_value(value)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::child_seed;

    fn sample_report() -> ExperimentReport {
        let mut seeds = SeedLedger::new(42);
        seeds.record("demo", 3);
        ExperimentReport {
            schema_version: SCHEMA_VERSION,
            kind: "duality".into(),
            config: "kind = duality\n".into(),
            code_version: "test".into(),
            started_unix: 1_700_000_000,
            wall_clock_secs: 1.25,
            checks: vec![
                CheckResult::within("identity residual", 1e-15, 1e-12),
                CheckResult::judged("z score", 1.7, 3.0, true),
            ],
            curves: vec![Curve {
                name: "merge cdf".into(),
                points: vec![
                    CurvePoint { t: 0.5, cdf: 0.25, lo: 0.2, hi: 0.3 },
                    CurvePoint { t: 1.0, cdf: 0.45, lo: 0.4, hi: 0.5 },
                ],
            }],
            seeds,
        }
    }

    #[test]
    fn reports_round_trip_through_json_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let report = sample_report();
        let paths = write_report(&report, dir.path(), ReportFormat::Json).unwrap();
        assert_eq!(paths.len(), 2, "report.json and index.json");

        let loaded = load_report(dir.path().join("report.json")).unwrap();
        assert_eq!(loaded, report);
    }

    #[test]
    fn csv_output_adds_one_table_per_curve_with_the_header() {
        let dir = tempfile::tempdir().unwrap();
        let report = sample_report();
        let paths = write_report(&report, dir.path(), ReportFormat::Both).unwrap();
        let names: Vec<String> = paths
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, vec!["report.json", "curve-merge-cdf.csv", "index.json"]);

        let csv = std::fs::read_to_string(&paths[1]).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,cdf,lo,hi"));
        assert_eq!(lines.next(), Some("0.5,0.25,0.2,0.3"));
        assert_eq!(lines.next(), Some("1,0.45,0.4,0.5"));
        assert_eq!(lines.next(), None);
    }

    #[test]
    fn the_index_names_every_artifact_and_the_verdict() {
        let dir = tempfile::tempdir().unwrap();
        let mut report = sample_report();
        report.checks.push(CheckResult::within("failing", 2.0, 1.0));
        write_report(&report, dir.path(), ReportFormat::Both).unwrap();

        let index: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("index.json")).unwrap())
                .unwrap();
        assert_eq!(index["schema_version"], SCHEMA_VERSION);
        assert_eq!(index["kind"], "duality");
        assert_eq!(index["passed"], false);
        let artifacts: Vec<&str> =
            index["artifacts"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
        assert_eq!(artifacts, vec!["report.json", "curve-merge-cdf.csv"]);
    }

    #[test]
    fn unknown_schema_versions_are_refused_on_load() {
        let dir = tempfile::tempdir().unwrap();
        let mut report = sample_report();
        report.schema_version = SCHEMA_VERSION + 1;
        let json = serde_json::to_string(&report).unwrap();
        let path = dir.path().join("report.json");
        std::fs::write(&path, json).unwrap();

        match load_report(&path) {
            Err(Error::SchemaVersion { expected, got }) => {
                assert_eq!(expected, SCHEMA_VERSION);
                assert_eq!(got, SCHEMA_VERSION + 1);
            }
            other => panic!("expected schema refusal, got {other:?}"),
        }
    }

    #[test]
    fn an_empty_result_set_is_still_a_valid_report() {
        let dir = tempfile::tempdir().unwrap();
        let mut report = sample_report();
        report.checks.clear();
        report.curves.clear();
        write_report(&report, dir.path(), ReportFormat::Both).unwrap();
        let loaded = load_report(dir.path().join("report.json")).unwrap();
        assert!(loaded.checks.is_empty());
        assert!(loaded.passed(), "vacuously true");
    }

    #[test]
    fn comparable_json_masks_only_the_volatile_fields() {
        let mut a = sample_report();
        let mut b = sample_report();
        b.started_unix = 1;
        b.wall_clock_secs = 99.0;
        assert_eq!(a.comparable_json(), b.comparable_json());

        a.checks[0].name = "renamed".into();
        assert_ne!(a.comparable_json(), b.comparable_json());
    }

    #[test]
    fn verdict_lines_render_pass_fail_and_error() {
        assert!(CheckResult::within("ok", 0.5, 1.0).render().starts_with("PASS"));
        assert!(CheckResult::within("bad", 2.0, 1.0).render().starts_with("FAIL"));
        let err = Error::NoMeetings;
        let row = CheckResult::from_error("broken", &err);
        assert!(row.render().starts_with("ERROR"));
        assert!(!row.passed());
        assert!(row.render().contains("no meeting time"));
    }

    #[test]
    fn the_seed_ledger_records_the_rule_and_the_first_replicate_seed() {
        let mut ledger = SeedLedger::new(99);
        ledger.record("walks", 1000);
        ledger.record("walks", 1000);
        assert_eq!(ledger.entries.len(), 1, "tags are merged");
        assert_eq!(ledger.entries[0].replicates, 2000);
        assert_eq!(ledger.entries[0].first, child_seed(99, "walks", 0));
        assert!(ledger.rule.contains("ChaCha8"), "derivation rule is spelled out");
    }
}
