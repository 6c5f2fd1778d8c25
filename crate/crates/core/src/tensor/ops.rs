use nalgebra::{DMatrix, DVector};

use super::layout::{SpaceLayout, StateVector};
use super::matrix::{ComplexMatrix, C64, ONE, ZERO};
use crate::error::{Error, Result};

/// Default residual bound for numerical identities.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Eigenvalues in `[-PSD_CLAMP, 0)` are treated as zero.
pub const PSD_CLAMP: f64 = 1e-9;

/// Kronecker product `A ⊗ B`.
pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::wrap(a.as_dmatrix().kronecker(b.as_dmatrix()))
}

/// Left-to-right Kronecker product of several factors.
pub fn tensor_all<'a>(factors: impl IntoIterator<Item = &'a ComplexMatrix>) -> ComplexMatrix {
    let mut it = factors.into_iter();
    let first = it.next().expect("at least one factor").clone();
    it.fold(first, |acc, f| tensor_product(&acc, f))
}

/// Traces out every factor of `layout` not listed in `keep`. The result is
/// ordered like the kept factors appear in `layout`.
pub fn partial_trace(m: &ComplexMatrix, layout: &SpaceLayout, keep: &[&str]) -> Result<ComplexMatrix> {
    let n = layout.total_dim();
    if m.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: m.dim(),
        });
    }
    let mask = layout.keep_mask(keep)?;
    let dims: Vec<usize> = layout.factors().iter().map(|(_, d)| *d).collect();

    // Split every product index into its (kept, traced) parts once.
    let mut kept_idx = vec![0usize; n];
    let mut traced_idx = vec![0usize; n];
    for full in 0..n {
        let digits = layout.digits(full);
        let (mut k, mut t) = (0usize, 0usize);
        for ((&digit, &d), &keep_it) in digits.iter().zip(&dims).zip(&mask) {
            if keep_it {
                k = k * d + digit;
            } else {
                t = t * d + digit;
            }
        }
        kept_idx[full] = k;
        traced_idx[full] = t;
    }

    let kept_dim: usize = dims.iter().zip(&mask).filter(|(_, &k)| k).map(|(d, _)| d).product();
    let src = m.as_dmatrix();
    let mut out = DMatrix::<C64>::zeros(kept_dim, kept_dim);
    for i in 0..n {
        for j in 0..n {
            if traced_idx[i] == traced_idx[j] {
                out[(kept_idx[i], kept_idx[j])] += src[(i, j)];
            }
        }
    }
    Ok(ComplexMatrix::wrap(out))
}

/// Square root of a positive semidefinite matrix, using the default clamp.
pub fn psd_sqrt(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    psd_sqrt_clamped(m, PSD_CLAMP)
}

/// Square root of a PSD matrix. Eigenvalues in `[-clamp, 0)` and eigenvalues
/// below the solver's roundoff floor are set to zero before rooting.
pub fn psd_sqrt_clamped(m: &ComplexMatrix, clamp: f64) -> Result<ComplexMatrix> {
    if !m.is_hermitian(clamp.max(1e-12) * (m.dim() as f64).max(1.0)) {
        return Err(Error::NotPsd {
            min_eigenvalue: f64::NAN,
        });
    }
    let eig = m.eigh();
    let min = eig.values[0];
    if min < -clamp {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    let floor = roundoff_floor(m.dim(), *eig.values.last().unwrap());
    Ok(m.hermitian_map(|lam| if lam <= floor { 0.0 } else { lam.sqrt() }))
}

/// Inverse square root of a positive definite matrix.
pub(crate) fn pd_inv_sqrt(m: &ComplexMatrix, min_eigenvalue: f64) -> Result<ComplexMatrix> {
    let lo = m.min_eigenvalue();
    if lo < min_eigenvalue {
        return Err(Error::Numeric(format!(
            "matrix is (near) singular: min eigenvalue {lo:e}"
        )));
    }
    Ok(m.hermitian_map(|lam| 1.0 / lam.sqrt()))
}

fn roundoff_floor(dim: usize, max_eigenvalue: f64) -> f64 {
    16.0 * f64::EPSILON * dim as f64 * max_eigenvalue.abs().max(1.0)
}

/// `‖A − B‖_F`.
pub fn frobenius_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok((a - b).frobenius_norm())
}

fn gram(vs: &[&DVector<C64>]) -> DMatrix<C64> {
    DMatrix::from_fn(vs.len(), vs.len(), |i, j| vs[i].dotc(vs[j]))
}

/// Extends the map `in_i ↦ out_i` to a unitary on a `dim`-dimensional space.
///
/// The pair map must be isometric on its span (equal Gram matrices). The
/// orthogonal complements are completed with canonical basis vectors taken in
/// index order, so the result is fully determined by the pairs.
pub fn unitary_extension(pairs: &[(StateVector, StateVector)], dim: usize) -> Result<ComplexMatrix> {
    unitary_extension_tol(pairs, dim, DEFAULT_TOL)
}

pub fn unitary_extension_tol(
    pairs: &[(StateVector, StateVector)],
    dim: usize,
    tol: f64,
) -> Result<ComplexMatrix> {
    if pairs.len() > dim {
        return Err(Error::RankDeficient(format!(
            "{} pairs do not fit in dimension {dim}",
            pairs.len()
        )));
    }
    for (a, b) in pairs {
        for v in [a, b] {
            if v.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.dim(),
                });
            }
        }
    }
    let ins: Vec<&DVector<C64>> = pairs.iter().map(|(a, _)| a.amplitudes()).collect();
    let outs: Vec<&DVector<C64>> = pairs.iter().map(|(_, b)| b.amplitudes()).collect();
    let residual = (gram(&ins) - gram(&outs)).norm();
    if residual > tol {
        return Err(Error::GramMismatch { residual });
    }

    // Modified Gram-Schmidt on the inputs, carrying the same linear
    // combinations along on the output side.
    let mut dom: Vec<DVector<C64>> = Vec::with_capacity(dim);
    let mut cod: Vec<DVector<C64>> = Vec::with_capacity(dim);
    for (a, b) in ins.iter().zip(&outs) {
        let mut v = (*a).clone();
        let mut w = (*b).clone();
        for _ in 0..2 {
            for (e, f) in dom.iter().zip(&cod) {
                let c = e.dotc(&v);
                v -= e * c;
                w -= f * c;
            }
        }
        let nv = v.norm();
        if nv > 1e-7 {
            let inv = C64::new(1.0 / nv, 0.0);
            let f = w * inv;
            if (f.norm() - 1.0).abs() > 1e3 * tol.max(1e-12) {
                return Err(Error::RankDeficient(
                    "orthonormalized outputs lost unit norm".into(),
                ));
            }
            dom.push(v * inv);
            cod.push(f);
        } else if w.norm() > 1e-6 {
            return Err(Error::RankDeficient(
                "input is dependent on earlier inputs but its output is not".into(),
            ));
        }
    }

    complete_basis(&mut dom, dim);
    complete_basis(&mut cod, dim);
    debug_assert_eq!(dom.len(), cod.len());

    let e = DMatrix::from_columns(&dom);
    let f = DMatrix::from_columns(&cod);
    let u = ComplexMatrix::wrap(f * e.adjoint());

    for (a, b) in ins.iter().zip(&outs) {
        let miss = (u.apply(a) - *b).norm();
        if miss > tol.max(1e-12) * 10.0 {
            return Err(Error::RankDeficient(format!(
                "extension misses a pair by {miss:e}"
            )));
        }
    }
    Ok(u)
}

/// Appends canonical basis vectors, in index order, orthonormalized against
/// the current family until it spans the space.
fn complete_basis(basis: &mut Vec<DVector<C64>>, dim: usize) {
    for k in 0..dim {
        if basis.len() == dim {
            break;
        }
        let mut v = DVector::<C64>::zeros(dim);
        v[k] = ONE;
        for _ in 0..2 {
            for e in basis.iter() {
                let c = e.dotc(&v);
                v -= e * c;
            }
        }
        let n = v.norm();
        if n > 1e-6 {
            basis.push(v / C64::new(n, 0.0));
        }
    }
}

/// Unit vectors `v_i` in `C^dim` with `⟨v_i, v_j⟩ = G_ij`.
///
/// Built from a semidefinite Cholesky factor of `G` laid against the first
/// `n` canonical basis vectors; `v_1` is always `e_1`.
pub fn vectors_with_gram(g: &ComplexMatrix, dim: usize) -> Result<Vec<StateVector>> {
    let n = g.dim();
    if n > dim {
        return Err(Error::InvalidGram(format!("{n} vectors do not fit in dimension {dim}")));
    }
    for i in 0..n {
        let d = g.get(i, i);
        if (d - ONE).norm() > DEFAULT_TOL {
            return Err(Error::InvalidGram(format!("diagonal entry {i} is {d}, expected 1")));
        }
    }
    if !g.is_hermitian(DEFAULT_TOL) {
        return Err(Error::InvalidGram("matrix is not hermitian".into()));
    }
    let min = g.min_eigenvalue();
    if min < -PSD_CLAMP {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }

    let gm = g.as_dmatrix();
    let mut l = DMatrix::<C64>::zeros(n, n);
    for j in 0..n {
        let mut d = gm[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d <= 1e-12 {
            continue;
        }
        let pivot = d.sqrt();
        l[(j, j)] = C64::new(pivot, 0.0);
        for i in (j + 1)..n {
            let mut s = gm[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / pivot;
        }
    }

    let layout = SpaceLayout::single("H", dim);
    let vectors: Vec<StateVector> = (0..n)
        .map(|i| {
            let mut v = DVector::<C64>::zeros(dim);
            for k in 0..n {
                v[k] = l[(i, k)].conj();
            }
            StateVector::new(layout.clone(), v)
        })
        .collect::<Result<_>>()?;

    let amps: Vec<&DVector<C64>> = vectors.iter().map(|v| v.amplitudes()).collect();
    let residual = (gram(&amps) - gm).norm();
    if residual > 1e-6 {
        return Err(Error::InvalidGram(format!(
            "factorization reproduces the gram matrix only to {residual:e}"
        )));
    }
    Ok(vectors)
}

/// `d²` pure states whose projectors span the hermitian `d×d` matrices:
/// `|k⟩`, `(|k⟩+|l⟩)/√2` and `(|k⟩+i|l⟩)/√2` for `k < l`.
///
/// Any condition linear in the input state holds for all states iff it holds
/// on this family.
pub fn spanning_states(d: usize) -> Vec<ComplexMatrix> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(d * d);
    for k in 0..d {
        let mut v = DVector::<C64>::zeros(d);
        v[k] = ONE;
        out.push(ComplexMatrix::projector(&v));
    }
    for k in 0..d {
        for l in (k + 1)..d {
            for phase in [ONE, C64::new(0.0, 1.0)] {
                let mut v = DVector::<C64>::zeros(d);
                v[k] = C64::new(h, 0.0);
                v[l] = phase * h;
                out.push(ComplexMatrix::projector(&v));
            }
        }
    }
    out
}

/// `d²` hermitian matrices forming a basis of the hermitian `d×d` matrices:
/// `E_kk`, `E_kl + E_lk`, `i(E_kl − E_lk)`.
pub fn hermitian_basis(d: usize) -> Vec<ComplexMatrix> {
    let mut out = Vec::with_capacity(d * d);
    for k in 0..d {
        out.push(ComplexMatrix::from_fn(d, |i, j| if i == k && j == k { ONE } else { ZERO }));
    }
    for k in 0..d {
        for l in (k + 1)..d {
            out.push(ComplexMatrix::from_fn(d, |i, j| {
                if (i, j) == (k, l) || (i, j) == (l, k) {
                    ONE
                } else {
                    ZERO
                }
            }));
            out.push(ComplexMatrix::from_fn(d, |i, j| {
                if (i, j) == (k, l) {
                    C64::new(0.0, 1.0)
                } else if (i, j) == (l, k) {
                    C64::new(0.0, -1.0)
                } else {
                    ZERO
                }
            }));
        }
    }
    out
}
