use std::collections::BTreeMap;

use serde::Serialize;

use super::{BridgeData, ModelFixture};
use crate::error::{Error, Result};
use crate::observables::{degree_of_reality, validate_povm};
use crate::scheme::{
    apparatus_mixture_residual, conditional_gram, induced_observable, pointer_components,
    post_state, pr_residual, UNREAD_TRACE,
};
use crate::tensor::{frobenius_distance, hermitian_basis, tensor_all, ComplexMatrix, StateVector};

/// Simulation-versus-closed-form comparison, keyed by quantity name.
#[derive(Debug, Clone, Serialize)]
pub struct FixtureReport {
    pub model: String,
    pub tolerance: f64,
    /// Absolute deviations from the closed forms.
    pub deltas: BTreeMap<String, f64>,
    /// Simulated quantities with no closed form attached.
    pub values: BTreeMap<String, f64>,
    pub max_delta: f64,
    pub pass: bool,
}

fn expectation(v: &StateVector, op: &ComplexMatrix) -> f64 {
    v.inner(&StateVector::flat(op.apply(v.amplitudes())).expect("finite")).re
}

fn max_offdiagonal(g: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, row) in g.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if i != j {
                worst = worst.max(v.abs());
            }
        }
    }
    worst
}

/// Simulates the fixture's scheme and compares every closed-form quantity.
pub fn verify_fixture(f: &ModelFixture, tol: f64) -> Result<FixtureReport> {
    let mut deltas = BTreeMap::new();
    let mut values = BTreeMap::new();
    let m = &f.scheme;

    deltas.insert("unitarity".to_string(), m.coupling().unitarity_residual());
    let e = induced_observable(m)?;
    deltas.insert("pr_residual".to_string(), pr_residual(m, &e)?);
    deltas.insert(
        "effect_sum".to_string(),
        frobenius_distance(&e.effect_sum(), &ComplexMatrix::identity(e.dim()))?,
    );
    for o in f.expected_observable.outcomes() {
        deltas.insert(format!("effect[{}]", o.label), frobenius_distance(e.effect(&o.label)?, &o.effect)?);
    }
    let report = validate_povm(&e);
    values.insert("observable_sharp".to_string(), f64::from(u8::from(report.sharp)));

    let post = post_state(m, &f.object_state)?;
    let dec = pointer_components(&post, m.layout(), m.pointer(), &f.partition)?;
    deltas.insert("total_probability".to_string(), (dec.total_probability() - 1.0).abs());
    let keep = [f.probe_factor.as_str()];
    let mut probes = Vec::new();
    for x in &f.expected_conditionals {
        let cell = dec.cell(&x.label)?;
        deltas.insert(
            format!("probability[{}]", x.label),
            (cell.probability - x.object.trace().re).abs(),
        );
        deltas.insert(format!("object[{}]", x.label), frobenius_distance(cell.object.matrix(), &x.object)?);
        let probe = dec.reduced(&x.label, &keep)?;
        deltas.insert(format!("apparatus[{}]", x.label), frobenius_distance(probe.matrix(), &x.apparatus)?);
        if let (Some(sim), Some(exp)) = (
            cell.object.normalized(UNREAD_TRACE),
            (x.object.trace().re > UNREAD_TRACE)
                .then(|| x.object.scale_real(1.0 / x.object.trace().re)),
        ) {
            deltas.insert(format!("object_normalized[{}]", x.label), frobenius_distance(sim.matrix(), &exp)?);
            if let Ok(effect) = f.expected_observable.effect(&x.label) {
                values.insert(format!("degree_of_reality[{}]", x.label), degree_of_reality(effect, &sim)?);
            }
        }
        if !cell.unread {
            probes.push(probe);
        }
    }

    let read: Vec<_> = dec.cells().iter().filter(|c| !c.unread).collect();
    let object_gram = max_offdiagonal(&conditional_gram(&read.iter().map(|c| &c.object).collect::<Vec<_>>())?);
    let probe_gram = max_offdiagonal(&conditional_gram(&probes.iter().collect::<Vec<_>>())?);
    let mixture = apparatus_mixture_residual(m, &f.object_state, &f.partition)?;
    values.insert("object_gram_offdiagonal".to_string(), object_gram);
    values.insert("probe_gram_offdiagonal".to_string(), probe_gram);
    values.insert("apparatus_mixture_residual".to_string(), mixture);
    for (name, expected) in &f.expected_scalars {
        if let Some(sim) = values.get(name) {
            deltas.insert(name.clone(), (sim - expected).abs());
        }
    }

    if let Some(bridge) = &f.bridge {
        bridge_deltas(f, bridge, &mut deltas)?;
    }

    let max_delta = deltas.values().fold(0.0, |a: f64, b| a.max(*b));
    Ok(FixtureReport {
        model: f.model.clone(),
        tolerance: tol,
        deltas,
        values,
        max_delta,
        pass: max_delta <= tol,
    })
}

/// Compares reading-conditioned expectations on the final vector with the
/// screen-conditioned ones after stage 2 and with the closed forms, on a
/// hermitian basis of object and probe operators.
fn bridge_deltas(f: &ModelFixture, bridge: &BridgeData, deltas: &mut BTreeMap<String, f64>) -> Result<()> {
    let dims: Vec<usize> = f.scheme.layout().factors().iter().map(|(_, d)| *d).collect();
    let (d_s, d_a, d_b, d_c) = (dims[0], dims[1], dims[2], dims[3]);
    let apply = |u: &ComplexMatrix, v: &StateVector| StateVector::flat(u.apply(v.amplitudes()));
    let stages = &f.stage_unitaries;
    let after2 = apply(&stages[1], &apply(&stages[0], &f.initial)?)?;
    let after3 = apply(&stages[2], &after2)?;
    let id = ComplexMatrix::identity;

    for r in &bridge.readings {
        let expected = f
            .expected_conditionals
            .iter()
            .find(|x| x.label == r.label)
            .ok_or_else(|| Error::UnknownLabel(r.label.clone()))?;
        let mut final_vs_stage2: f64 = 0.0;
        let mut object_vs_closed: f64 = 0.0;
        for x in hermitian_basis(d_s) {
            let lhs = expectation(&after3, &tensor_all([&x, &id(d_a), &id(d_b), &r.recorder]));
            let mid = expectation(&after2, &tensor_all([&x, &id(d_a), &r.screen, &id(d_c)]));
            final_vs_stage2 = final_vs_stage2.max((lhs - mid).abs());
            object_vs_closed = object_vs_closed.max((lhs - expected.object.trace_product(&x).re).abs());
        }
        let mut probe_vs_closed: f64 = 0.0;
        for y in hermitian_basis(d_a) {
            let lhs = expectation(&after3, &tensor_all([&id(d_s), &y, &id(d_b), &r.recorder]));
            probe_vs_closed = probe_vs_closed.max((lhs - expected.apparatus.trace_product(&y).re).abs());
        }
        deltas.insert(format!("bridge_final_vs_stage2[{}]", r.label), final_vs_stage2);
        deltas.insert(format!("bridge_object[{}]", r.label), object_vs_closed);
        deltas.insert(format!("bridge_probe[{}]", r.label), probe_vs_closed);
    }
    Ok(())
}
