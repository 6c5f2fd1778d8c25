//! Exact constructions of two measurement models with closed-form expected
//! observables and conditional states.
//!
//! Model 1 is an imperfect measurement of a sharp qubit observable: the
//! coupling sends `φ_k ⊗ φ` to `ξ_k ⊗ φ_k^A` with nonorthogonal `ξ_k`.
//! Model 2 is a three-stage Stern-Gerlach-like measurement on
//! `S(2) ⊗ A(6) ⊗ B(5) ⊗ C(3)` (object, probe, screen, recorder) whose
//! unsharpness comes from overlapping probe states.

mod model1;
mod model2;
mod verify;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use model1::{build_model1, Model1Params};
pub use model2::{build_model2, GramPreset, GramSpec, Model2Params, OVERLAPPING_TAILS};
pub use verify::{verify_fixture, FixtureReport};

use crate::error::Result;
use crate::observables::{DensityOperator, DiscretePOVM};
use crate::scheme::{MeasurementScheme, Partition};
use crate::tensor::{ComplexMatrix, StateVector};

/// Closed-form conditional states for one reading, sub-normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedConditional {
    pub label: String,
    pub object: ComplexMatrix,
    /// State of the probe factor.
    pub apparatus: ComplexMatrix,
}

/// Extra data for the Model 2 bridge identities.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgeData {
    pub readings: Vec<BridgeReading>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BridgeReading {
    /// Pointer cell label.
    pub label: String,
    /// Screen projection `P_i`.
    pub screen: ComplexMatrix,
    /// Recorder projection `P_{ψ_i}`.
    pub recorder: ComplexMatrix,
}

/// A constructed scheme together with everything it should reproduce.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFixture {
    pub model: String,
    pub scheme: MeasurementScheme,
    pub partition: Partition,
    /// Full initial vector `φ ⊗ (apparatus ready state)`.
    pub initial: StateVector,
    /// Object state `P_φ`, `φ = c_1 φ_1 + c_2 φ_2`.
    pub object_state: DensityOperator,
    /// Factor label the apparatus conditionals are reduced to.
    pub probe_factor: String,
    pub expected_observable: DiscretePOVM,
    pub expected_conditionals: Vec<ExpectedConditional>,
    /// Further closed-form scalars, keyed by quantity name.
    pub expected_scalars: BTreeMap<String, f64>,
    /// Stage unitaries on the full space, in order of application.
    pub stage_unitaries: Vec<ComplexMatrix>,
    pub bridge: Option<BridgeData>,
}

/// Parameter file: `{"model": "model1" | "model2", ...params}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelParams {
    Model1(Model1Params),
    Model2(Model2Params),
}

impl ModelParams {
    pub fn build(&self) -> Result<ModelFixture> {
        match self {
            ModelParams::Model1(p) => build_model1(p),
            ModelParams::Model2(p) => build_model2(p),
        }
    }
}

fn check_amplitudes(c: &[crate::tensor::C64; 2]) -> Result<()> {
    let norm: f64 = c.iter().map(|z| z.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(crate::error::Error::InvalidParams(format!(
            "|c_1|² + |c_2|² = {norm}, expected 1"
        )));
    }
    Ok(())
}
