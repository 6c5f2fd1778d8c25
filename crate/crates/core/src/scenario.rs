//! Scenario files: one JSON document describing a run and where its
//! artifacts go.
//!
//! ```json
//! {"kind": "model2", "params": {...}, "tolerances": {...}, "output": "out/model2"}
//! ```
//!
//! Artifacts are written next to the output prefix (`<prefix>.report.json`,
//! `<prefix>.csv`, ...). Their bytes depend only on the scenario and the
//! overrides; the wall-clock time goes to `<prefix>.meta.json`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::exec::Execution;
use crate::models::{build_model1, build_model2, verify_fixture, FixtureReport, Model1Params, Model2Params};
use crate::observables::{coexistence_check, CoexistenceOptions, CoexistenceVerdict, DensityOperator, DiscretePOVM};
use crate::sampling::{batch_audit, summarize, write_audit_csv, write_manifest, Ensemble, EnsembleMember};
use crate::scheme::{insolubility_audit, AuditConfig, SchemeDocument};
use crate::tolerance::Tolerances;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_BREACH: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Model1,
    Model2,
    AuditScheme,
    AuditBatch,
    Coexist,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Model1 => "model1",
            ScenarioKind::Model2 => "model2",
            ScenarioKind::AuditScheme => "audit_scheme",
            ScenarioKind::AuditBatch => "audit_batch",
            ScenarioKind::Coexist => "coexist",
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario<'a> {
    kind: ScenarioKind,
    #[serde(borrow, default)]
    params: Option<&'a RawValue>,
    #[serde(default)]
    tolerances: Option<Tolerances>,
    #[serde(default)]
    output: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSchemeParams {
    pub scheme: SchemeDocument,
    /// Object state for the apparatus-mixture residual and conditional Gram.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<DensityOperator>,
    #[serde(default)]
    pub ignore_pvd: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditBatchParams {
    #[serde(default)]
    pub seed: u64,
    pub members: Vec<EnsembleMember>,
    #[serde(default)]
    pub ignore_pvd: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoexistParams {
    pub a: DiscretePOVM,
    pub b: DiscretePOVM,
    #[serde(default)]
    pub options: CoexistenceOptions,
}

#[derive(Debug, Clone)]
pub enum ScenarioParams {
    Model1(Model1Params),
    Model2(Model2Params),
    AuditScheme(Box<AuditSchemeParams>),
    AuditBatch(AuditBatchParams),
    Coexist(Box<CoexistParams>),
}

/// Parsed, validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub params: ScenarioParams,
    pub tolerances: Tolerances,
    pub output: Option<String>,
}

/// Command-line adjustments applied on top of a scenario file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub tol_pm: Option<f64>,
    pub tol_pvd: Option<f64>,
    pub tol_triv: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub execution: Execution,
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Run(#[from] crate::Error),
}

impl ScenarioError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Read { .. } | ScenarioError::Invalid(_) => EXIT_INVALID,
            ScenarioError::Write { .. } | ScenarioError::Run(_) => EXIT_FAILURE,
        }
    }
}

fn check_tolerances(t: &Tolerances) -> Result<(), ScenarioError> {
    for (name, v) in [
        ("equality", t.equality),
        ("classification", t.classification),
        ("pm", t.pm),
        ("pvd", t.pvd),
        ("triviality", t.triviality),
        ("psd_clamp", t.psd_clamp),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(ScenarioError::Invalid(format!("tolerances.{name} must be a nonnegative number")));
        }
    }
    Ok(())
}

/// Line and column of byte `offset` in `text`, both 1-based.
fn position(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(offset, |nl| offset - nl - 1) + 1;
    (line, col)
}

fn params_error(text: &str, raw: &RawValue, err: serde_json::Error) -> ScenarioError {
    let start = raw.get().as_ptr() as usize - text.as_ptr() as usize;
    let (line0, col0) = position(text, start);
    let (line, col) = if err.line() <= 1 {
        (line0, col0 + err.column().saturating_sub(1))
    } else {
        (line0 + err.line() - 1, err.column())
    };
    let msg = err.to_string();
    let msg = msg.rsplit_once(" at line ").map_or(msg.as_str(), |(m, _)| m);
    ScenarioError::Invalid(format!("params: {msg} at line {line} column {col}"))
}

fn parse_params<T: for<'de> Deserialize<'de>>(text: &str, raw: Option<&RawValue>) -> Result<T, ScenarioError> {
    match raw {
        Some(raw) => serde_json::from_str(raw.get()).map_err(|e| params_error(text, raw, e)),
        None => serde_json::from_str("{}").map_err(|e| ScenarioError::Invalid(format!("params: {e}"))),
    }
}

impl Scenario {
    /// Parses a scenario document. Errors carry the line and column of the
    /// offending field in `text`.
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let raw: RawScenario = serde_json::from_str(text).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        let params = match raw.kind {
            ScenarioKind::Model1 => ScenarioParams::Model1(parse_params(text, raw.params)?),
            ScenarioKind::Model2 => ScenarioParams::Model2(parse_params(text, raw.params)?),
            ScenarioKind::AuditScheme => ScenarioParams::AuditScheme(Box::new(parse_params(text, raw.params)?)),
            ScenarioKind::AuditBatch => ScenarioParams::AuditBatch(parse_params(text, raw.params)?),
            ScenarioKind::Coexist => ScenarioParams::Coexist(Box::new(parse_params(text, raw.params)?)),
        };
        let scenario = Scenario {
            kind: raw.kind,
            params,
            tolerances: raw.tolerances.unwrap_or_default(),
            output: raw.output,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_path(path: &Path) -> Result<Self, ScenarioError> {
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |e: crate::Error| ScenarioError::Invalid(format!("params: {e}"));
        let t = &self.tolerances;
        check_tolerances(t)?;
        match &self.params {
            ScenarioParams::Model1(p) => p.validate().map_err(invalid),
            ScenarioParams::Model2(p) => p.validate().map_err(invalid),
            ScenarioParams::AuditScheme(p) => p
                .scheme
                .clone()
                .into_scheme(t.equality)
                .map(|_| ())
                .map_err(|e| ScenarioError::Invalid(format!("params.scheme: {e}"))),
            ScenarioParams::AuditBatch(p) => {
                if p.members.is_empty() {
                    return Err(ScenarioError::Invalid("params.members: at least one member required".into()));
                }
                for (i, m) in p.members.iter().enumerate() {
                    let spec = crate::sampling::SamplerSpec {
                        d_s: m.d_s,
                        d_a: m.d_a,
                        n_outcomes: m.n_outcomes,
                        pointer_kind: m.pointer_kind,
                        family: m.family,
                        seed: 0,
                    };
                    spec.validate()
                        .map_err(|e| ScenarioError::Invalid(format!("params.members[{i}]: {e}")))?;
                }
                Ok(())
            }
            ScenarioParams::Coexist(p) => {
                if p.a.dim() != p.b.dim() {
                    return Err(ScenarioError::Invalid(format!(
                        "params: observables act on dimensions {} and {}",
                        p.a.dim(),
                        p.b.dim()
                    )));
                }
                Ok(())
            }
        }
    }

    fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.tol_pm {
            self.tolerances.pm = v;
        }
        if let Some(v) = o.tol_pvd {
            self.tolerances.pvd = v;
        }
        if let Some(v) = o.tol_triv {
            self.tolerances.triviality = v;
        }
        if let Some(seed) = o.seed {
            match &mut self.params {
                ScenarioParams::AuditBatch(p) => p.seed = seed,
                ScenarioParams::Coexist(p) => p.options.seed = seed,
                _ => {}
            }
        }
        if let ScenarioParams::Coexist(p) = &mut self.params {
            p.options.execution = o.execution;
        }
    }

    /// Seed that drives the run, when the kind uses one.
    pub fn seed(&self) -> Option<u64> {
        match &self.params {
            ScenarioParams::AuditBatch(p) => Some(p.seed),
            ScenarioParams::Coexist(p) => Some(p.options.seed),
            _ => None,
        }
    }
}

/// Result of a completed run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub artifacts: Vec<PathBuf>,
    /// Human-readable summary lines.
    pub summary: Vec<String>,
}

#[derive(Serialize)]
struct ModelDocument<'a, P: Serialize> {
    kind: &'static str,
    params: &'a P,
    tolerances: Tolerances,
    report: &'a FixtureReport,
}

#[derive(Serialize)]
struct AuditDocument<'a> {
    kind: &'static str,
    tolerances: Tolerances,
    report: &'a crate::scheme::AuditReport,
}

#[derive(Serialize)]
struct BatchDocument<'a> {
    kind: &'static str,
    tolerances: Tolerances,
    seed: u64,
    ignore_pvd: bool,
    members: &'a [EnsembleMember],
    summary: &'a crate::sampling::BatchSummary,
}

#[derive(Serialize)]
struct CoexistDocument<'a> {
    kind: &'static str,
    tolerances: Tolerances,
    options: &'a CoexistenceOptions,
    verdict: &'a CoexistenceVerdict,
}

#[derive(Serialize)]
struct Meta<'a> {
    created_unix_seconds: u64,
    scenario: String,
    kind: &'static str,
    seed: Option<u64>,
    parallel: bool,
    version: &'static str,
    artifacts: &'a [PathBuf],
}

struct Sink {
    prefix: PathBuf,
    written: Vec<PathBuf>,
}

impl Sink {
    fn path(&self, suffix: &str) -> PathBuf {
        let mut name = self.prefix.file_name().unwrap_or_default().to_os_string();
        name.push(suffix);
        self.prefix.with_file_name(name)
    }

    fn bytes(&mut self, suffix: &str, data: &[u8]) -> Result<(), ScenarioError> {
        let path = self.path(suffix);
        fs::write(&path, data).map_err(|source| ScenarioError::Write {
            path: path.clone(),
            source,
        })?;
        self.written.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, suffix: &str, value: &T) -> Result<(), ScenarioError> {
        let mut data = serde_json::to_vec_pretty(value).map_err(|e| ScenarioError::Run(crate::Error::Numeric(e.to_string())))?;
        data.push(b'\n');
        self.bytes(suffix, &data)
    }
}

fn output_prefix(path: &Path, scenario: &Scenario, overrides: &Overrides) -> PathBuf {
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let declared = scenario
        .output
        .as_ref()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(path.file_stem().unwrap_or_default()));
    match &overrides.out_dir {
        Some(dir) => dir.join(declared.file_name().unwrap_or_default()),
        None if declared.is_absolute() => declared,
        None => base_dir.join(declared),
    }
}

fn write_error(path: &Path) -> impl FnOnce(std::io::Error) -> ScenarioError + '_ {
    move |source| ScenarioError::Write {
        path: path.to_path_buf(),
        source,
    }
}

/// Runs the scenario at `path` and writes its artifacts.
pub fn run_scenario(path: &Path, overrides: &Overrides) -> Result<RunOutcome, ScenarioError> {
    let mut scenario = Scenario::from_path(path)?;
    scenario.apply(overrides);
    check_tolerances(&scenario.tolerances)?;
    let prefix = output_prefix(path, &scenario, overrides);
    if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(write_error(dir))?;
    }
    let mut sink = Sink { prefix, written: Vec::new() };
    let tol = scenario.tolerances;
    let kind = scenario.kind.as_str();
    let mut summary = Vec::new();

    let exit_code = match &scenario.params {
        ScenarioParams::Model1(p) => {
            let report = verify_fixture(&build_model1(p)?, tol.equality)?;
            sink.json(".report.json", &ModelDocument { kind, params: p, tolerances: tol, report: &report })?;
            model_summary(&report, &mut summary)
        }
        ScenarioParams::Model2(p) => {
            let report = verify_fixture(&build_model2(p)?, tol.equality)?;
            sink.json(".report.json", &ModelDocument { kind, params: p, tolerances: tol, report: &report })?;
            model_summary(&report, &mut summary)
        }
        ScenarioParams::AuditScheme(p) => {
            let (m, part) = p.scheme.clone().into_scheme(tol.equality)?;
            let config = AuditConfig {
                tolerances: tol,
                probe: p.probe.clone(),
                ignore_pvd: p.ignore_pvd,
            };
            let report = insolubility_audit(&m, &part, &config)?;
            sink.json(".report.json", &AuditDocument { kind, tolerances: tol, report: &report })?;
            summary.push(format!(
                "audit_scheme: pm={:e} pvd={:e} triviality={:e} objectifying={} trivial={} counterexample={}",
                report.pm_residual,
                report.pvd_residual,
                report.triviality_residual,
                report.objectifying,
                report.trivial,
                report.counterexample
            ));
            if report.counterexample { EXIT_BREACH } else { EXIT_OK }
        }
        ScenarioParams::AuditBatch(p) => {
            let ensemble = Ensemble { seed: p.seed, members: p.members.clone() };
            let specs = ensemble.specs();
            let config = AuditConfig {
                tolerances: tol,
                probe: None,
                ignore_pvd: p.ignore_pvd,
            };
            let rows = batch_audit(&specs, &config, overrides.execution)?;
            let stats = summarize(&rows);
            let mut csv = Vec::new();
            write_audit_csv(&rows, &mut csv).map_err(write_error(&sink.path(".csv")))?;
            sink.bytes(".csv", &csv)?;
            let mut manifest = Vec::new();
            write_manifest(&specs, &mut manifest).map_err(write_error(&sink.path(".manifest.csv")))?;
            sink.bytes(".manifest.csv", &manifest)?;
            sink.json(
                ".summary.json",
                &BatchDocument {
                    kind,
                    tolerances: tol,
                    seed: p.seed,
                    ignore_pvd: p.ignore_pvd,
                    members: &p.members,
                    summary: &stats,
                },
            )?;
            summary.push(format!(
                "audit_batch: schemes={} objectifying={} trivial={} counterexamples={}",
                stats.schemes, stats.objectifying, stats.trivial, stats.counterexamples
            ));
            if stats.counterexamples > 0 { EXIT_BREACH } else { EXIT_OK }
        }
        ScenarioParams::Coexist(p) => {
            let verdict = coexistence_check(&p.a, &p.b, &p.options)?;
            sink.json(
                ".report.json",
                &CoexistDocument { kind, tolerances: tol, options: &p.options, verdict: &verdict },
            )?;
            summary.push(match &verdict {
                CoexistenceVerdict::Coexistent { marginal_residual, min_eigenvalue, .. } => format!(
                    "coexist: coexistent (marginal residual {marginal_residual:e}, min eigenvalue {min_eigenvalue:e})"
                ),
                CoexistenceVerdict::Infeasible { certified_gap, .. } => {
                    format!("coexist: infeasible (certified gap {certified_gap:e})")
                }
                CoexistenceVerdict::Inconclusive { best_gap, .. } => {
                    format!("coexist: inconclusive (best gap {best_gap:e})")
                }
            });
            EXIT_OK
        }
    };

    let artifacts = sink.written.clone();
    let meta = Meta {
        created_unix_seconds: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        scenario: path.display().to_string(),
        kind,
        seed: scenario.seed(),
        parallel: overrides.execution.is_parallel(),
        version: env!("CARGO_PKG_VERSION"),
        artifacts: &artifacts,
    };
    sink.json(".meta.json", &meta)?;
    Ok(RunOutcome {
        exit_code,
        artifacts: sink.written,
        summary,
    })
}

fn model_summary(report: &FixtureReport, out: &mut Vec<String>) -> i32 {
    out.push(format!(
        "{}: max delta {:e} (tolerance {:e}) {}",
        report.model,
        report.max_delta,
        report.tolerance,
        if report.pass { "PASS" } else { "FAIL" }
    ));
    for (name, delta) in report.deltas.iter().filter(|(_, d)| **d > report.tolerance) {
        out.push(format!("  {name}: {delta:e}"));
    }
    if report.pass { EXIT_OK } else { EXIT_BREACH }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positions_are_one_based() {
        assert_eq!(position("ab\ncd", 0), (1, 1));
        assert_eq!(position("ab\ncd", 4), (2, 2));
    }

    #[test]
    fn params_errors_point_into_the_file() {
        let text = "{\n  \"kind\": \"model1\",\n  \"params\": {\n    \"xi\": 0.5\n  }\n}";
        let err = Scenario::parse(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("unknown field `xi`") && msg.contains("line 4"), "{msg}");
        assert_eq!(err.exit_code(), EXIT_INVALID);
    }

    #[test]
    fn top_level_errors() {
        assert!(Scenario::parse(r#"{"kind": "model3"}"#).unwrap_err().to_string().contains("model3"));
        assert!(Scenario::parse(r#"{"kind": "model1", "extra": 1}"#).is_err());
        let e = Scenario::parse(r#"{"kind": "model1", "params": {"apparatus_dim": 1}}"#).unwrap_err();
        assert!(e.to_string().contains("apparatus_dim"));
        let e = Scenario::parse(r#"{"kind": "model1", "tolerances": {"pm": -1}}"#).unwrap_err();
        assert!(e.to_string().contains("tolerances.pm"));
    }

    #[test]
    fn defaults_and_overrides() {
        let mut s = Scenario::parse(r#"{"kind": "audit_batch", "params": {"seed": 3, "members": [
            {"d_S": 2, "d_A": 2, "n_outcomes": 2, "pointer_kind": "sharp", "family": "haar_generic", "count": 1}]}}"#)
        .unwrap();
        assert_eq!(s.tolerances, Tolerances::default());
        s.apply(&Overrides {
            seed: Some(9),
            tol_pm: Some(1e-4),
            ..Default::default()
        });
        assert_eq!(s.seed(), Some(9));
        assert_eq!(s.tolerances.pm, 1e-4);
        let e = Scenario::parse(r#"{"kind": "audit_batch", "params": {"members": [
            {"d_S": 1, "d_A": 2, "n_outcomes": 2, "pointer_kind": "sharp", "family": "haar_generic", "count": 1}]}}"#)
        .unwrap_err();
        assert!(e.to_string().contains("members[0]"));
    }
}
