use nalgebra::DVector;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::tensor::{ComplexMatrix, StateVector, C64};

const STATE_TOL: f64 = 1e-9;

/// Positive semidefinite operator with trace one (normalized) or trace at
/// most one (sub-normalized, e.g. a state conditional on a reading).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: ComplexMatrix,
    normalized: bool,
}

impl DensityOperator {
    /// Normalized state; checks positivity and unit trace within `1e-9`.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::check_psd(&matrix)?;
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        Ok(Self {
            matrix,
            normalized: true,
        })
    }

    /// State with trace in `[0, 1]`. Zero-trace operators are admitted so that
    /// unread pointer cells can still be represented.
    pub fn sub_normalized(matrix: ComplexMatrix) -> Result<Self> {
        Self::check_psd(&matrix)?;
        let tr = matrix.trace().re;
        if !(-STATE_TOL..=1.0 + STATE_TOL).contains(&tr) {
            return Err(Error::InvalidState(format!("trace {tr} outside [0, 1]")));
        }
        Ok(Self {
            matrix,
            normalized: false,
        })
    }

    fn check_psd(m: &ComplexMatrix) -> Result<()> {
        if !m.is_hermitian(STATE_TOL * m.dim() as f64) {
            return Err(Error::InvalidState(format!(
                "not hermitian (residual {:e})",
                m.hermiticity_residual()
            )));
        }
        let min = m.min_eigenvalue();
        if min < -STATE_TOL {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
        Ok(())
    }

    pub fn pure(v: &StateVector) -> Result<Self> {
        Self::new(v.normalized()?.projector())
    }

    pub fn pure_from_amplitudes(amplitudes: &[C64]) -> Result<Self> {
        Self::pure(&StateVector::flat(DVector::from_column_slice(amplitudes))?)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64),
            normalized: true,
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        self.matrix.trace_product(&self.matrix).re
    }

    /// `ρ / tr ρ`, or `None` when the trace is at most `min_trace`.
    pub fn normalized(&self, min_trace: f64) -> Option<DensityOperator> {
        let tr = self.trace();
        (tr > min_trace).then(|| DensityOperator {
            matrix: self.matrix.scale_real(1.0 / tr),
            normalized: true,
        })
    }
}

impl Serialize for DensityOperator {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.matrix.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DensityOperator {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let m = ComplexMatrix::deserialize(deserializer)?;
        DensityOperator::new(m).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(DensityOperator::new(ComplexMatrix::diagonal(&[0.5, 0.5])).is_ok());
        assert!(DensityOperator::new(ComplexMatrix::diagonal(&[0.5, 0.4])).is_err());
        assert!(DensityOperator::new(ComplexMatrix::diagonal(&[1.2, -0.2])).is_err());
        let sub = DensityOperator::sub_normalized(ComplexMatrix::diagonal(&[0.2, 0.1])).unwrap();
        assert!(!sub.is_normalized());
        let n = sub.normalized(1e-12).unwrap();
        assert!((n.trace() - 1.0).abs() < 1e-15);
        let zero = DensityOperator::sub_normalized(ComplexMatrix::zeros(2)).unwrap();
        assert!(zero.normalized(1e-12).is_none());
    }

    #[test]
    fn pure_state_purity() {
        let rho = DensityOperator::pure_from_amplitudes(&[C64::new(1.0, 0.0), C64::new(0.0, 1.0)]).unwrap();
        assert!((rho.purity() - 1.0).abs() < 1e-15);
        assert!((DensityOperator::maximally_mixed(4).purity() - 0.25).abs() < 1e-15);
    }
}
