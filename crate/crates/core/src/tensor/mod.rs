//! Dense complex linear algebra over tensor-product spaces.

mod layout;
mod matrix;
mod ops;

pub use layout::{SpaceLayout, StateVector};
pub use matrix::{ComplexMatrix, Eigh, C64};
pub use ops::{
    frobenius_distance, hermitian_basis, partial_trace, psd_sqrt, psd_sqrt_clamped,
    spanning_states, tensor_all, tensor_product, unitary_extension, unitary_extension_tol,
    vectors_with_gram, DEFAULT_TOL, PSD_CLAMP,
};
pub(crate) use ops::pd_inv_sqrt;
#[allow(unused_imports)]
pub(crate) use matrix::{ONE, ZERO};
