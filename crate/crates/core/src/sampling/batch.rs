use std::io;

use serde::{Deserialize, Serialize};

use super::rng::derive_seed;
use super::schemes::{random_scheme, Family, PointerKind, SamplerSpec};
use crate::error::Result;
use crate::exec::Execution;
use crate::scheme::{insolubility_audit, AuditConfig, AuditReport, Partition};

/// `count` schemes drawn from one template.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleMember {
    #[serde(rename = "d_S")]
    pub d_s: usize,
    #[serde(rename = "d_A")]
    pub d_a: usize,
    pub n_outcomes: usize,
    pub pointer_kind: PointerKind,
    pub family: Family,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ensemble {
    #[serde(default)]
    pub seed: u64,
    pub members: Vec<EnsembleMember>,
}

impl Ensemble {
    /// One spec per scheme; scheme `i` is seeded from `(seed, i)`.
    pub fn specs(&self) -> Vec<SamplerSpec> {
        self.members
            .iter()
            .flat_map(|m| std::iter::repeat_n(m, m.count))
            .enumerate()
            .map(|(i, m)| SamplerSpec {
                d_s: m.d_s,
                d_a: m.d_a,
                n_outcomes: m.n_outcomes,
                pointer_kind: m.pointer_kind,
                family: m.family,
                seed: derive_seed(self.seed, i as u64),
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.members.iter().map(|m| m.count).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchRow {
    pub scheme_id: usize,
    pub spec: SamplerSpec,
    pub report: AuditReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchSummary {
    pub schemes: usize,
    pub objectifying: usize,
    pub trivial: usize,
    pub counterexamples: usize,
    pub counterexample_ids: Vec<usize>,
    /// Largest cell-level triviality residual among objectifying schemes.
    pub max_objectifying_triviality: f64,
}

/// Generates and audits every spec on its finest pointer partition.
///
/// Rows come back in spec order whatever the execution mode; the first
/// failing index determines the error.
pub fn batch_audit(specs: &[SamplerSpec], config: &AuditConfig, exec: Execution) -> Result<Vec<BatchRow>> {
    exec.map_indexed(specs.len(), |i| {
        let m = random_scheme(&specs[i])?;
        let report = insolubility_audit(&m, &Partition::finest(m.pointer()), config)?;
        Ok(BatchRow {
            scheme_id: i,
            spec: specs[i],
            report,
        })
    })
    .into_iter()
    .collect()
}

pub fn summarize(rows: &[BatchRow]) -> BatchSummary {
    let ids: Vec<usize> = rows.iter().filter(|r| r.report.counterexample).map(|r| r.scheme_id).collect();
    BatchSummary {
        schemes: rows.len(),
        objectifying: rows.iter().filter(|r| r.report.objectifying).count(),
        trivial: rows.iter().filter(|r| r.report.trivial).count(),
        counterexamples: ids.len(),
        counterexample_ids: ids,
        max_objectifying_triviality: rows
            .iter()
            .filter(|r| r.report.objectifying)
            .map(|r| r.report.triviality_residual)
            .fold(0.0, f64::max),
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    scheme_id: usize,
    family: &'a str,
    #[serde(rename = "d_S")]
    d_s: usize,
    #[serde(rename = "d_A")]
    d_a: usize,
    pm_residual: f64,
    pvd_residual: f64,
    triviality_residual: f64,
    apparatus_mixture_residual: f64,
    objectifying: bool,
    trivial: bool,
    counterexample: bool,
}

/// One CSV line per audited scheme, in row order.
pub fn write_audit_csv<W: io::Write>(rows: &[BatchRow], out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(CsvRow {
            scheme_id: r.scheme_id,
            family: r.spec.family.as_str(),
            d_s: r.spec.d_s,
            d_a: r.spec.d_a,
            pm_residual: r.report.pm_residual,
            pvd_residual: r.report.pvd_residual,
            triviality_residual: r.report.triviality_residual,
            apparatus_mixture_residual: r.report.apparatus_mixture_residual,
            objectifying: r.report.objectifying,
            trivial: r.report.trivial,
            counterexample: r.report.counterexample,
        })?;
    }
    w.flush()
}

#[derive(Serialize)]
struct ManifestRow<'a> {
    index: usize,
    seed: u64,
    family: &'a str,
    #[serde(rename = "d_S")]
    d_s: usize,
    #[serde(rename = "d_A")]
    d_a: usize,
    n_outcomes: usize,
    smearing: f64,
}

/// Batch manifest: enough to regenerate any single scheme.
pub fn write_manifest<W: io::Write>(specs: &[SamplerSpec], out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (index, s) in specs.iter().enumerate() {
        w.serialize(ManifestRow {
            index,
            seed: s.seed,
            family: s.family.as_str(),
            d_s: s.d_s,
            d_a: s.d_a,
            n_outcomes: s.n_outcomes,
            smearing: match s.pointer_kind {
                PointerKind::Sharp => 0.0,
                PointerKind::Unsharp(x) => x,
            },
        })?;
    }
    w.flush()
}
