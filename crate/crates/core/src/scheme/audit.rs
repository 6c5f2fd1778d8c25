use std::collections::BTreeMap;

use serde::Serialize;

use super::conditions::{
    apparatus_mixture_residual, conditional_gram, induced_observable, pm_residual,
    pointer_components, post_state, pr_residual, pvd_residual,
};
use super::{MeasurementScheme, Partition};
use crate::error::Result;
use crate::observables::{triviality_residual, DensityOperator};
use crate::tensor::C64;
use crate::tolerance::Tolerances;

#[derive(Debug, Clone, Default)]
pub struct AuditConfig {
    pub tolerances: Tolerances,
    /// State used for the apparatus-mixture residual and the conditional
    /// Gram matrix. Defaults to the uniform superposition on the object.
    pub probe: Option<DensityOperator>,
    /// Classify on the pointer mixture condition alone.
    pub ignore_pvd: bool,
}

/// Residuals of one scheme against the objectification conditions.
#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub pm_residual: f64,
    pub pvd_residual: f64,
    /// Triviality of the induced observable, coarse-grained to the cells.
    pub triviality_residual: f64,
    pub triviality_lambda: BTreeMap<String, f64>,
    pub pr_residual: f64,
    pub apparatus_mixture_residual: f64,
    /// Labels of the read cells, in partition order.
    pub gram_labels: Vec<String>,
    /// `|tr[ρ'_S(X_i) ρ'_S(X_j)]|` over read cells.
    pub object_conditional_gram: Vec<Vec<f64>>,
    pub max_object_gram_offdiagonal: f64,
    pub unread_cells: Vec<String>,
    pub objectifying: bool,
    pub trivial: bool,
    /// Both conditions hold but the observable is not trivial.
    pub counterexample: bool,
    pub ignore_pvd: bool,
    pub tolerances: Tolerances,
}

fn uniform_superposition(d: usize) -> Result<DensityOperator> {
    DensityOperator::pure_from_amplitudes(&vec![C64::new(1.0, 0.0); d])
}

/// Evaluates the pointer conditions and the triviality of the measured
/// observable, and tests the prediction that a scheme satisfying both
/// conditions measures a trivial observable.
pub fn insolubility_audit(
    m: &MeasurementScheme,
    part: &Partition,
    config: &AuditConfig,
) -> Result<AuditReport> {
    let tol = &config.tolerances;
    let pm = pm_residual(m, part)?;
    let pvd = pvd_residual(m, part)?;
    let e = induced_observable(m)?;
    let pr = pr_residual(m, &e)?;
    let triv = triviality_residual(&part.coarse_grain(&e)?);

    let probe = match &config.probe {
        Some(p) => p.clone(),
        None => uniform_superposition(m.object_dim())?,
    };
    let app_mix = apparatus_mixture_residual(m, &probe, part)?;
    let post = post_state(m, &probe)?;
    let dec = pointer_components(&post, m.layout(), m.pointer(), part)?;
    let read: Vec<_> = dec.cells().iter().filter(|c| !c.unread).collect();
    let gram = conditional_gram(&read.iter().map(|c| &c.object).collect::<Vec<_>>())?
        .into_iter()
        .map(|row| row.into_iter().map(f64::abs).collect::<Vec<_>>())
        .collect::<Vec<_>>();
    let max_off = gram
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().enumerate().filter(move |(j, _)| *j != i).map(|(_, v)| *v))
        .fold(0.0, f64::max);

    let pm_ok = pm <= tol.pm;
    let pvd_ok = pvd <= tol.pvd;
    let trivial = triv.residual <= tol.triviality;
    Ok(AuditReport {
        pm_residual: pm,
        pvd_residual: pvd,
        triviality_residual: triv.residual,
        triviality_lambda: triv.lambda,
        pr_residual: pr,
        apparatus_mixture_residual: app_mix,
        gram_labels: read.iter().map(|c| c.label.clone()).collect(),
        object_conditional_gram: gram,
        max_object_gram_offdiagonal: max_off,
        unread_cells: dec
            .cells()
            .iter()
            .filter(|c| c.unread)
            .map(|c| c.label.clone())
            .collect(),
        objectifying: pm_ok && (pvd_ok || config.ignore_pvd),
        trivial,
        counterexample: pm_ok && pvd_ok && !trivial,
        ignore_pvd: config.ignore_pvd,
        tolerances: *tol,
    })
}
