use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{check_amplitudes, BridgeData, BridgeReading, ExpectedConditional, ModelFixture};
use crate::error::{Error, Result};
use crate::observables::{DensityOperator, DiscretePOVM, Outcome};
use crate::scheme::{MeasurementScheme, Partition};
use crate::tensor::{
    tensor_all, tensor_product, unitary_extension, vectors_with_gram, ComplexMatrix, SpaceLayout,
    StateVector, C64,
};

const PROBE_DIM: usize = 6;
const SCREEN_DIM: usize = 5;
const RECORDER_DIM: usize = 3;

/// `⟨φ_11, φ_12⟩ = ⟨φ_21, φ_22⟩` in the overlapping-tails preset.
pub const OVERLAPPING_TAILS: f64 = 0.3;

/// Gram matrix of the final probe states, ordered `φ_11, φ_12, φ_21, φ_22`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GramSpec {
    Preset(GramPreset),
    Matrix(ComplexMatrix),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GramPreset {
    Orthonormal,
    OverlappingTails,
}

impl GramSpec {
    pub fn matrix(&self) -> ComplexMatrix {
        match self {
            GramSpec::Matrix(m) => m.clone(),
            GramSpec::Preset(GramPreset::Orthonormal) => ComplexMatrix::identity(4),
            GramSpec::Preset(GramPreset::OverlappingTails) => {
                let t = OVERLAPPING_TAILS;
                ComplexMatrix::from_real_rows(&[
                    vec![1.0, t, 0.0, 0.0],
                    vec![t, 1.0, 0.0, 0.0],
                    vec![0.0, 0.0, 1.0, t],
                    vec![0.0, 0.0, t, 1.0],
                ])
                .expect("4x4 literal")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Model2Params {
    pub c: [C64; 2],
    /// `alpha[i][j] = α_{i+1, j+1}`; each row has unit norm.
    pub alpha: [[f64; 2]; 2],
    /// `⟨φ_1, φ_2⟩` of the probe states after stage 1.
    pub probe_overlap: C64,
    pub probe_final_gram: GramSpec,
}

impl Default for Model2Params {
    fn default() -> Self {
        let (hi, lo) = (0.9f64.sqrt(), 0.1f64.sqrt());
        Self {
            c: [C64::new(FRAC_1_SQRT_2, 0.0); 2],
            alpha: [[hi, lo], [lo, hi]],
            probe_overlap: C64::new(0.5, 0.0),
            probe_final_gram: GramSpec::Preset(GramPreset::Orthonormal),
        }
    }
}

impl Model2Params {
    pub fn validate(&self) -> Result<()> {
        check_amplitudes(&self.c)?;
        for (i, row) in self.alpha.iter().enumerate() {
            if row.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
                return Err(Error::InvalidParams(format!("alpha row {} must be nonnegative", i + 1)));
            }
            let norm = row[0] * row[0] + row[1] * row[1];
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParams(format!(
                    "alpha row {} has squared norm {norm}, expected 1",
                    i + 1
                )));
            }
        }
        if self.probe_overlap.norm() > 1.0 {
            return Err(Error::InvalidParams("|⟨φ_1, φ_2⟩| exceeds 1".into()));
        }
        if self.probe_final_gram.matrix().dim() != 4 {
            return Err(Error::InvalidParams("probe_final_gram must be 4x4".into()));
        }
        Ok(())
    }
}

fn basis(label: &str, dim: usize, k: usize) -> Result<StateVector> {
    StateVector::basis(SpaceLayout::single(label, dim), k)
}

/// Places `v` at coordinates `offset..` of a `dim`-dimensional factor.
fn embed(v: &StateVector, label: &str, dim: usize, offset: usize) -> Result<StateVector> {
    let mut a = DVector::zeros(dim);
    a.rows_mut(offset, v.dim()).copy_from(v.amplitudes());
    StateVector::new(SpaceLayout::single(label, dim), a)
}

fn gram2(overlap: C64) -> Result<ComplexMatrix> {
    let one = C64::new(1.0, 0.0);
    ComplexMatrix::from_rows(&[vec![one, overlap], vec![overlap.conj(), one]])
}

fn combine(terms: &[(f64, StateVector)]) -> Result<StateVector> {
    let (first, rest) = terms.split_first().expect("nonempty");
    rest.iter().try_fold(first.1.scale(C64::new(first.0, 0.0)), |acc, (w, v)| {
        acc.add(&v.scale(C64::new(*w, 0.0)))
    })
}

/// Layout `S(2) ⊗ A(6) ⊗ B(5) ⊗ C(3)`.
///
/// Probe `A`: `φ = e_0`, `φ_1, φ_2 ∈ span{e_0, e_1}`, `φ_ij ∈ span{e_2..e_5}`.
/// Screen `B`: `χ = e_0`, `χ_11, χ_12, χ_21, χ_22 = e_1..e_4`.
/// Recorder `C`: `ψ = e_0`, `ψ_1 = e_1`, `ψ_2 = e_2`.
///
/// Stage 1 acts on `S ⊗ A`, stage 2 on `S ⊗ A ⊗ B`, stage 3 on `B ⊗ C`;
/// each is a canonical unitary extension tensored with the identity on the
/// untouched factors.
pub fn build_model2(p: &Model2Params) -> Result<ModelFixture> {
    p.validate()?;
    let a = &p.alpha;
    let varphi = [basis("S", 2, 0)?, basis("S", 2, 1)?];

    let probe_pair = vectors_with_gram(&gram2(p.probe_overlap)?, 2)?;
    let probe = [
        embed(&probe_pair[0], "A", PROBE_DIM, 0)?,
        embed(&probe_pair[1], "A", PROBE_DIM, 0)?,
    ];
    let probe_ready = basis("A", PROBE_DIM, 0)?;
    let tails = vectors_with_gram(&p.probe_final_gram.matrix(), 4)?;
    // final_probe[i][j] = φ_{i+1, j+1}
    let final_probe: Vec<Vec<StateVector>> = (0..2)
        .map(|i| (0..2).map(|j| embed(&tails[2 * i + j], "A", PROBE_DIM, 2)).collect())
        .collect::<Result<_>>()?;
    let screen_ready = basis("B", SCREEN_DIM, 0)?;
    let screen: Vec<Vec<StateVector>> = (0..2)
        .map(|i| (0..2).map(|j| basis("B", SCREEN_DIM, 1 + 2 * i + j)).collect())
        .collect::<Result<_>>()?;
    let recorder_ready = basis("C", RECORDER_DIM, 0)?;
    let recorder = [basis("C", RECORDER_DIM, 1)?, basis("C", RECORDER_DIM, 2)?];

    let stage1_pairs = (0..2)
        .map(|i| Ok((varphi[i].tensor(&probe_ready)?, varphi[i].tensor(&probe[i])?)))
        .collect::<Result<Vec<_>>>()?;
    let stage1 = unitary_extension(&stage1_pairs, 2 * PROBE_DIM)?;

    let stage2_pairs = (0..2)
        .map(|i| {
            let input = varphi[i].tensor(&probe[i])?.tensor(&screen_ready)?;
            let branches = (0..2)
                .map(|j| Ok((a[i][j], final_probe[i][j].tensor(&screen[i][j])?)))
                .collect::<Result<Vec<_>>>()?;
            Ok((input, varphi[i].tensor(&combine(&branches)?)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let stage2 = unitary_extension(&stage2_pairs, 2 * PROBE_DIM * SCREEN_DIM)?;

    let stage3_pairs = (0..2)
        .flat_map(|i| (0..2).map(move |j| (i, j)))
        .map(|(i, j)| Ok((screen[i][j].tensor(&recorder_ready)?, screen[i][j].tensor(&recorder[j])?)))
        .collect::<Result<Vec<_>>>()?;
    let stage3 = unitary_extension(&stage3_pairs, SCREEN_DIM * RECORDER_DIM)?;

    let id = ComplexMatrix::identity;
    let stages = vec![
        tensor_product(&stage1, &id(SCREEN_DIM * RECORDER_DIM)),
        tensor_product(&stage2, &id(RECORDER_DIM)),
        tensor_product(&id(2 * PROBE_DIM), &stage3),
    ];
    let coupling = &(&stages[2] * &stages[1]) * &stages[0];

    let apparatus_ready = probe_ready.tensor(&screen_ready)?.tensor(&recorder_ready)?;
    let rec_id = id(RECORDER_DIM);
    let rec_proj = [recorder[0].projector(), recorder[1].projector()];
    let rest = &(&rec_id - &rec_proj[0]) - &rec_proj[1];
    let lift = |m: &ComplexMatrix| tensor_all([&id(PROBE_DIM), &id(SCREEN_DIM), m]);
    let pointer = DiscretePOVM::new(vec![
        Outcome::new("1", lift(&rec_proj[0])),
        Outcome::new("2", lift(&rec_proj[1])),
        Outcome::new("rest", lift(&rest)),
    ])?;
    let layout = SpaceLayout::new([("S", 2), ("A", PROBE_DIM), ("B", SCREEN_DIM), ("C", RECORDER_DIM)])?;
    let scheme = MeasurementScheme::new(
        layout,
        DensityOperator::pure(&apparatus_ready)?,
        coupling,
        pointer,
        1e-9,
    )?;
    let partition = Partition::finest(scheme.pointer());

    let proj = [varphi[0].projector(), varphi[1].projector()];
    let zero2 = ComplexMatrix::zeros(2);
    let effect = |j: usize| &proj[0].scale_real(a[0][j] * a[0][j]) + &proj[1].scale_real(a[1][j] * a[1][j]);
    let expected_observable = DiscretePOVM::new(vec![
        Outcome::new("1", effect(0)),
        Outcome::new("2", effect(1)),
        Outcome::new("rest", zero2.clone()),
    ])?;
    let w = [p.c[0].norm_sqr(), p.c[1].norm_sqr()];
    let mut expected_conditionals: Vec<ExpectedConditional> = (0..2)
        .map(|j| {
            let (s1, s2) = (w[0] * a[0][j] * a[0][j], w[1] * a[1][j] * a[1][j]);
            ExpectedConditional {
                label: (j + 1).to_string(),
                object: &proj[0].scale_real(s1) + &proj[1].scale_real(s2),
                apparatus: &final_probe[0][j].projector().scale_real(s1)
                    + &final_probe[1][j].projector().scale_real(s2),
            }
        })
        .collect();
    expected_conditionals.push(ExpectedConditional {
        label: "rest".into(),
        object: zero2,
        apparatus: ComplexMatrix::zeros(PROBE_DIM),
    });

    let readings = (0..2)
        .map(|j| BridgeReading {
            label: (j + 1).to_string(),
            screen: &screen[0][j].projector() + &screen[1][j].projector(),
            recorder: rec_proj[j].clone(),
        })
        .collect();
    let phi = StateVector::new(SpaceLayout::single("S", 2), DVector::from_column_slice(&p.c))?;

    Ok(ModelFixture {
        model: "model2".into(),
        initial: phi.tensor(&apparatus_ready)?,
        object_state: DensityOperator::pure(&phi)?,
        scheme,
        partition,
        probe_factor: "A".into(),
        expected_observable,
        expected_conditionals,
        expected_scalars: BTreeMap::new(),
        stage_unitaries: stages,
        bridge: Some(BridgeData { readings }),
    })
}
