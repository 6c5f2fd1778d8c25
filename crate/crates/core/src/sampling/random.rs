use nalgebra::DMatrix;
use rand::Rng;

use super::rng::{complex_gaussian, substream};
use crate::error::{Error, Result};
use crate::observables::{DensityOperator, DiscretePOVM, Outcome};
use crate::tensor::{pd_inv_sqrt, ComplexMatrix, C64};

const POVM_ATTEMPTS: u64 = 8;
const MIN_FRAME_EIGENVALUE: f64 = 1e-8;

/// Haar-distributed unitary of dimension `d`, deterministic per seed.
pub fn haar_unitary(d: usize, seed: u64) -> ComplexMatrix {
    haar_unitary_from(d, &mut substream(seed, 0))
}

/// QR of a complex Ginibre matrix with the phases of `R`'s diagonal moved
/// into `Q`.
pub fn haar_unitary_from<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    let qr = complex_gaussian(d, d, rng).qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    ComplexMatrix::wrap(q)
}

/// Random state `G G† / tr(G G†)` with `G` a `d × rank` Gaussian matrix.
pub fn random_density(d: usize, rank: usize, seed: u64) -> Result<DensityOperator> {
    random_density_from(d, rank, &mut substream(seed, 0))
}

pub fn random_density_from<R: Rng + ?Sized>(
    d: usize,
    rank: usize,
    rng: &mut R,
) -> Result<DensityOperator> {
    if rank == 0 || rank > d {
        return Err(Error::InvalidParams(format!("rank {rank} outside 1..={d}")));
    }
    let g = complex_gaussian(d, rank, rng);
    let m = ComplexMatrix::wrap(&g * g.adjoint()).hermitian_part();
    let tr = m.trace().re;
    DensityOperator::new(m.scale_real(1.0 / tr))
}

/// Random `n`-outcome POVM `S^{-1/2} G_i G_i† S^{-1/2}`, `S = Σ G_i G_i†`.
///
/// A nearly singular frame operator is redrawn from the next substream.
pub fn random_povm(d: usize, n: usize, seed: u64) -> Result<DiscretePOVM> {
    if n == 0 {
        return Err(Error::InvalidParams("a POVM needs at least one outcome".into()));
    }
    for attempt in 0..POVM_ATTEMPTS {
        let mut rng = substream(seed, attempt);
        let parts: Vec<DMatrix<C64>> = (0..n)
            .map(|_| {
                let g = complex_gaussian(d, d, &mut rng);
                &g * g.adjoint()
            })
            .collect();
        let frame = ComplexMatrix::wrap(parts.iter().fold(DMatrix::zeros(d, d), |acc, a| acc + a))
            .hermitian_part();
        let Ok(w) = pd_inv_sqrt(&frame, MIN_FRAME_EIGENVALUE) else {
            continue;
        };
        let outcomes = parts
            .into_iter()
            .enumerate()
            .map(|(i, a)| Outcome::new(i.to_string(), ComplexMatrix::wrap(a).conjugate_by(&w).hermitian_part()))
            .collect();
        return DiscretePOVM::new(outcomes);
    }
    Err(Error::Numeric(format!(
        "frame operator singular in {POVM_ATTEMPTS} attempts"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::validate_povm;

    #[test]
    fn haar_unitary_basics() {
        let u1 = haar_unitary(1, 3);
        assert!((u1.get(0, 0).norm() - 1.0).abs() < 1e-12);
        let a = haar_unitary(5, 11);
        assert!(a.unitarity_residual() < 1e-10);
        assert_eq!(a, haar_unitary(5, 11));
        assert_ne!(a, haar_unitary(5, 12));
    }

    #[test]
    fn density_rank_and_trace() {
        let pure = random_density(4, 1, 2).unwrap();
        assert!((pure.purity() - 1.0).abs() < 1e-9);
        let full = random_density(4, 4, 2).unwrap();
        assert!((full.trace() - 1.0).abs() < 1e-12);
        assert!(full.matrix().min_eigenvalue() > 1e-6);
        assert!(random_density(3, 0, 1).is_err());
        assert!(random_density(3, 4, 1).is_err());
    }

    #[test]
    fn povm_outputs_are_valid() {
        let one = random_povm(3, 1, 0).unwrap();
        assert!((&one.outcomes()[0].effect - &ComplexMatrix::identity(3)).frobenius_norm() < 1e-12);
        let p = random_povm(3, 4, 9).unwrap();
        let report = validate_povm(&p);
        assert!(report.valid && !report.sharp);
        assert!(random_povm(2, 0, 0).is_err());
    }
}
