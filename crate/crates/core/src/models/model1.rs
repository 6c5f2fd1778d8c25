use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{check_amplitudes, ExpectedConditional, ModelFixture};
use crate::error::{Error, Result};
use crate::observables::{DensityOperator, DiscretePOVM, Outcome};
use crate::scheme::{MeasurementScheme, Partition};
use crate::tensor::{unitary_extension, vectors_with_gram, ComplexMatrix, SpaceLayout, StateVector, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Model1Params {
    /// Amplitudes of the initial object state in the eigenbasis `φ_1, φ_2`.
    pub c: [C64; 2],
    /// `⟨ξ_1, ξ_2⟩`.
    pub xi_overlap: C64,
    pub apparatus_dim: usize,
}

impl Default for Model1Params {
    fn default() -> Self {
        Self {
            c: [C64::new(FRAC_1_SQRT_2, 0.0); 2],
            xi_overlap: C64::new(0.5, 0.0),
            apparatus_dim: 2,
        }
    }
}

impl Model1Params {
    pub fn validate(&self) -> Result<()> {
        check_amplitudes(&self.c)?;
        if self.xi_overlap.norm() >= 1.0 {
            return Err(Error::InvalidParams(format!(
                "|⟨ξ_1, ξ_2⟩| = {} must be below 1",
                self.xi_overlap.norm()
            )));
        }
        if self.apparatus_dim < 2 {
            return Err(Error::InvalidParams("apparatus_dim must be at least 2".into()));
        }
        Ok(())
    }
}

fn basis(label: &str, dim: usize, k: usize) -> Result<StateVector> {
    StateVector::basis(SpaceLayout::single(label, dim), k)
}

/// Object `S(2)`, apparatus `A(d)`. The apparatus starts in `φ = e_0` and
/// ends in `φ_1^A = e_0` or `φ_2^A = e_1`; the pointer is `{P_{e_0}, I − P_{e_0}}`.
pub fn build_model1(p: &Model1Params) -> Result<ModelFixture> {
    p.validate()?;
    let d = p.apparatus_dim;
    let one = C64::new(1.0, 0.0);
    let gram = ComplexMatrix::from_rows(&[vec![one, p.xi_overlap], vec![p.xi_overlap.conj(), one]])?;
    let xi: Vec<StateVector> = vectors_with_gram(&gram, 2)?
        .into_iter()
        .map(|v| v.relabel(SpaceLayout::single("S", 2)))
        .collect::<Result<_>>()?;
    let varphi = [basis("S", 2, 0)?, basis("S", 2, 1)?];
    let ready = basis("A", d, 0)?;
    let pointer_states = [basis("A", d, 0)?, basis("A", d, 1)?];

    let pairs = (0..2)
        .map(|k| Ok((varphi[k].tensor(&ready)?, xi[k].tensor(&pointer_states[k])?)))
        .collect::<Result<Vec<_>>>()?;
    let coupling = unitary_extension(&pairs, 2 * d)?;

    let p1 = pointer_states[0].projector();
    let pointer = DiscretePOVM::new(vec![
        Outcome::new("1", p1.clone()),
        Outcome::new("2", &ComplexMatrix::identity(d) - &p1),
    ])?;
    let layout = SpaceLayout::new([("S", 2), ("A", d)])?;
    let scheme = MeasurementScheme::new(
        layout,
        DensityOperator::pure(&ready)?,
        coupling.clone(),
        pointer,
        1e-9,
    )?;
    let partition = Partition::finest(scheme.pointer());

    let phi = StateVector::new(SpaceLayout::single("S", 2), DVector::from_column_slice(&p.c))?;
    let expected_observable = DiscretePOVM::new(vec![
        Outcome::new("1", varphi[0].projector()),
        Outcome::new("2", varphi[1].projector()),
    ])?;
    let expected_conditionals = (0..2)
        .map(|k| {
            let w = p.c[k].norm_sqr();
            ExpectedConditional {
                label: (k + 1).to_string(),
                object: xi[k].projector().scale_real(w),
                apparatus: pointer_states[k].projector().scale_real(w),
            }
        })
        .collect();
    let (c1, c2) = (p.c[0], p.c[1]);
    let overlap = p.xi_overlap.norm();
    let expected_scalars = BTreeMap::from([
        (
            "apparatus_mixture_residual".to_string(),
            std::f64::consts::SQRT_2 * (c1 * c2).norm() * overlap,
        ),
        (
            "object_gram_offdiagonal".to_string(),
            c1.norm_sqr() * c2.norm_sqr() * overlap * overlap,
        ),
    ]);

    Ok(ModelFixture {
        model: "model1".into(),
        initial: phi.tensor(&ready)?,
        object_state: DensityOperator::pure(&phi)?,
        scheme,
        partition,
        probe_factor: "A".into(),
        expected_observable,
        expected_conditionals,
        expected_scalars,
        stage_unitaries: vec![coupling],
        bridge: None,
    })
}
