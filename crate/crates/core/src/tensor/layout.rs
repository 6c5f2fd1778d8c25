use nalgebra::DVector;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::matrix::{ComplexMatrix, C64};
use crate::error::{Error, Result};

/// Ordered tensor-product factorization of a Hilbert space.
///
/// Product basis indices are mixed-radix with the first factor most
/// significant, so for factors `(S, 2), (A, 3)` the index of `|s⟩⊗|a⟩` is
/// `3*s + a`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpaceLayout {
    factors: Vec<(String, usize)>,
}

impl SpaceLayout {
    pub fn new<S: Into<String>>(factors: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let factors: Vec<(String, usize)> =
            factors.into_iter().map(|(l, d)| (l.into(), d)).collect();
        if factors.is_empty() {
            return Err(Error::InvalidParams("layout needs at least one factor".into()));
        }
        for (i, (label, dim)) in factors.iter().enumerate() {
            if *dim == 0 {
                return Err(Error::InvalidParams(format!("factor `{label}` has dimension 0")));
            }
            if factors[..i].iter().any(|(l, _)| l == label) {
                return Err(Error::DuplicateLabel(label.clone()));
            }
        }
        Ok(Self { factors })
    }

    pub fn single(label: &str, dim: usize) -> Self {
        Self::new([(label, dim)]).expect("valid single-factor layout")
    }

    pub fn factors(&self) -> &[(String, usize)] {
        &self.factors
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.factors.iter().map(|(l, _)| l.as_str())
    }

    pub fn total_dim(&self) -> usize {
        self.factors.iter().map(|(_, d)| d).product()
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.factors
            .iter()
            .position(|(l, _)| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        Ok(self.factors[self.position(label)?].1)
    }

    /// Layout `self ⊗ other`; labels must stay unique.
    pub fn concat(&self, other: &SpaceLayout) -> Result<SpaceLayout> {
        SpaceLayout::new(self.factors.iter().chain(other.factors.iter()).cloned())
    }

    /// Sub-layout of the kept labels, in this layout's order.
    pub fn restrict(&self, keep: &[&str]) -> Result<SpaceLayout> {
        let mask = self.keep_mask(keep)?;
        SpaceLayout::new(
            self.factors
                .iter()
                .zip(&mask)
                .filter(|(_, &k)| k)
                .map(|(f, _)| f.clone()),
        )
    }

    pub(crate) fn keep_mask(&self, keep: &[&str]) -> Result<Vec<bool>> {
        if keep.is_empty() {
            return Err(Error::InvalidParams("partial trace must keep at least one factor".into()));
        }
        let mut mask = vec![false; self.factors.len()];
        for label in keep {
            mask[self.position(label)?] = true;
        }
        Ok(mask)
    }

    /// Mixed-radix digits of a product-basis index.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut digits = vec![0; self.factors.len()];
        for (slot, (_, d)) in digits.iter_mut().zip(&self.factors).rev() {
            *slot = index % d;
            index /= d;
        }
        digits
    }

    pub fn index_of(&self, digits: &[usize]) -> usize {
        digits
            .iter()
            .zip(&self.factors)
            .fold(0, |acc, (&digit, (_, d))| acc * d + digit)
    }
}

impl Serialize for SpaceLayout {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.factors.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SpaceLayout {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let factors = Vec::<(String, usize)>::deserialize(deserializer)?;
        SpaceLayout::new(factors).map_err(D::Error::custom)
    }
}

/// Vector in a factorized space.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    layout: SpaceLayout,
    amplitudes: DVector<C64>,
}

impl StateVector {
    pub fn new(layout: SpaceLayout, amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.len() != layout.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: layout.total_dim(),
                found: amplitudes.len(),
            });
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("state vector"));
        }
        Ok(Self { layout, amplitudes })
    }

    /// Vector on a single anonymous factor of dimension `amplitudes.len()`.
    pub fn flat(amplitudes: DVector<C64>) -> Result<Self> {
        let dim = amplitudes.len();
        Self::new(SpaceLayout::single("H", dim), amplitudes)
    }

    pub fn basis(layout: SpaceLayout, index: usize) -> Result<Self> {
        let n = layout.total_dim();
        if index >= n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: index + 1,
            });
        }
        let mut v = DVector::zeros(n);
        v[index] = C64::new(1.0, 0.0);
        Self::new(layout, v)
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// `⟨self, other⟩`, antilinear in `self`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::InvalidState("cannot normalize the zero vector".into()));
        }
        Ok(Self {
            layout: self.layout.clone(),
            amplitudes: &self.amplitudes / C64::new(n, 0.0),
        })
    }

    /// `self ⊗ other` with concatenated layouts.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let layout = self.layout.concat(&other.layout)?;
        Ok(Self {
            layout,
            amplitudes: self.amplitudes.kronecker(&other.amplitudes),
        })
    }

    pub fn relabel(self, layout: SpaceLayout) -> Result<Self> {
        Self::new(layout, self.amplitudes)
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            layout: self.layout.clone(),
            amplitudes: &self.amplitudes * c,
        }
    }

    pub fn add(&self, other: &StateVector) -> Result<Self> {
        if self.layout != other.layout {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(Self {
            layout: self.layout.clone(),
            amplitudes: &self.amplitudes + &other.amplitudes,
        })
    }

    /// `|v⟩⟨v|`.
    pub fn projector(&self) -> ComplexMatrix {
        ComplexMatrix::projector(&self.amplitudes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixed_radix_most_significant_first() {
        let l = SpaceLayout::new([("S", 2), ("A", 3)]).unwrap();
        assert_eq!(l.total_dim(), 6);
        assert_eq!(l.index_of(&[1, 2]), 5);
        assert_eq!(l.digits(4), vec![1, 1]);
        for i in 0..6 {
            assert_eq!(l.index_of(&l.digits(i)), i);
        }
    }

    #[test]
    fn layout_validation() {
        assert!(matches!(
            SpaceLayout::new([("S", 2), ("S", 3)]),
            Err(Error::DuplicateLabel(_))
        ));
        assert!(SpaceLayout::new([("S", 0)]).is_err());
        let l = SpaceLayout::new([("S", 2), ("A", 3), ("B", 4)]).unwrap();
        assert_eq!(l.restrict(&["B", "S"]).unwrap().factors(), &[("S".to_string(), 2), ("B".to_string(), 4)]);
        assert!(matches!(l.restrict(&["Q"]), Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn layout_json_is_label_dim_list() {
        let l = SpaceLayout::new([("S", 2), ("A", 3)]).unwrap();
        let s = serde_json::to_string(&l).unwrap();
        assert_eq!(s, r#"[["S",2],["A",3]]"#);
        assert_eq!(serde_json::from_str::<SpaceLayout>(&s).unwrap(), l);
        assert!(serde_json::from_str::<SpaceLayout>(r#"[["S",2],["S",3]]"#).is_err());
    }

    #[test]
    fn tensor_of_basis_vectors() {
        let a = StateVector::basis(SpaceLayout::single("S", 2), 1).unwrap();
        let b = StateVector::basis(SpaceLayout::single("A", 3), 2).unwrap();
        let ab = a.tensor(&b).unwrap();
        assert_eq!(ab.amplitudes()[5], C64::new(1.0, 0.0));
        assert_eq!(ab.layout().total_dim(), 6);
    }
}
