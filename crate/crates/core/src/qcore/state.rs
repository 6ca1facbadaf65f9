//! States, observables and test ensembles on labeled spaces.

use serde::{Deserialize, Serialize};

use super::json;
use super::linalg::{self, c, eigh, hermitian_part, hermiticity_gap, kron, CMat};
use super::space::{partial_trace_matrix, permute_operator, Space};
use crate::error::{Error, Result};

pub const TOL_HERM: f64 = 1e-10;
pub const TOL_TRACE: f64 = 1e-10;
pub const TOL_EIG: f64 = 1e-10;
pub const TOL_ENSEMBLE: f64 = 1e-12;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Labeled {
    space: Space,
    #[serde(with = "json")]
    matrix: CMat,
}

fn check_shape(space: &Space, data: &CMat) -> Result<()> {
    let d = space.dim();
    if data.nrows() != d || data.ncols() != d {
        return Err(Error::Shape(format!(
            "matrix is {}x{} but space {:?} has dimension {}",
            data.nrows(),
            data.ncols(),
            space.names(),
            d
        )));
    }
    Ok(())
}

/// Trace-one positive semidefinite matrix on a labeled space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Labeled", into = "Labeled")]
pub struct DensityMatrix {
    space: Space,
    data: CMat,
}

impl TryFrom<Labeled> for DensityMatrix {
    type Error = Error;
    fn try_from(l: Labeled) -> Result<Self> {
        DensityMatrix::new(l.space, l.matrix)
    }
}

impl From<DensityMatrix> for Labeled {
    fn from(d: DensityMatrix) -> Self {
        Labeled { space: d.space, matrix: d.data }
    }
}

impl DensityMatrix {
    pub fn new(space: Space, data: CMat) -> Result<Self> {
        check_shape(&space, &data)?;
        let gap = hermiticity_gap(&data);
        if gap > TOL_HERM {
            return Err(Error::StateValidity(format!("not Hermitian (gap {gap:e})")));
        }
        let tr = linalg::trace(&data).re;
        if (tr - 1.0).abs() > TOL_TRACE {
            return Err(Error::StateValidity(format!("trace is {tr}")));
        }
        let data = hermitian_part(&data);
        let min = eigh(&data).0.first().copied().unwrap_or(0.0);
        if min < -TOL_EIG {
            return Err(Error::StateValidity(format!("negative eigenvalue {min:e}")));
        }
        Ok(DensityMatrix { space, data })
    }

    /// Wraps a matrix produced by trusted numerics (channel outputs) without checks.
    pub(crate) fn from_parts(space: Space, data: CMat) -> Self {
        DensityMatrix { space, data }
    }

    /// |ψ⟩⟨ψ| for a (not necessarily normalized) column vector.
    pub fn pure(space: Space, psi: &CMat) -> Result<Self> {
        let n = psi.norm();
        if n == 0.0 {
            return Err(Error::StateValidity("zero state vector".into()));
        }
        let v = psi / c(n, 0.0);
        DensityMatrix::new(space, &v * v.adjoint())
    }

    pub fn basis(space: Space, i: usize) -> Result<Self> {
        let d = space.dim();
        if i >= d {
            return Err(Error::Shape(format!("basis index {i} out of range {d}")));
        }
        DensityMatrix::pure(space, &linalg::ket(d, i))
    }

    pub fn maximally_mixed(space: Space) -> Self {
        let d = space.dim();
        DensityMatrix { data: linalg::identity(d) * c(1.0 / d as f64, 0.0), space }
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn matrix(&self) -> &CMat {
        &self.data
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    /// ⟨O⟩ = Re Tr[ρO].
    pub fn expect(&self, o: &CMat) -> f64 {
        (&self.data * o).trace().re
    }

    /// Eigenvalues in [-1e-10, 0) clipped to zero and the spectrum renormalized.
    pub fn clipped_spectrum(&self) -> Result<(Vec<f64>, CMat)> {
        let (mut vals, vecs) = eigh(&self.data);
        if let Some(&min) = vals.first() {
            if min < -TOL_EIG {
                return Err(Error::StateValidity(format!("negative eigenvalue {min:e}")));
            }
        }
        for v in vals.iter_mut() {
            *v = v.max(0.0);
        }
        let s: f64 = vals.iter().sum();
        if s <= 0.0 {
            return Err(Error::StateValidity("state has zero trace".into()));
        }
        for v in vals.iter_mut() {
            *v /= s;
        }
        Ok((vals, vecs))
    }

    pub fn partial_trace(&self, keep: &Space) -> Result<DensityMatrix> {
        let (space, data) = partial_trace_matrix(&self.data, &self.space, keep)?;
        Ok(DensityMatrix { space, data })
    }

    /// Same state with labels in the given order.
    pub fn reorder(&self, order: &Space) -> Result<DensityMatrix> {
        Ok(DensityMatrix { data: permute_operator(&self.data, &self.space, order)?, space: order.clone() })
    }

    /// Same matrix on a renamed space of equal dimension.
    pub fn relabel(&self, space: Space) -> Result<DensityMatrix> {
        check_shape(&space, &self.data)?;
        Ok(DensityMatrix { space, data: self.data.clone() })
    }
}

/// Hermitian operator on a labeled space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Labeled", into = "Labeled")]
pub struct Observable {
    space: Space,
    data: CMat,
}

impl TryFrom<Labeled> for Observable {
    type Error = Error;
    fn try_from(l: Labeled) -> Result<Self> {
        Observable::new(l.space, l.matrix)
    }
}

impl From<Observable> for Labeled {
    fn from(o: Observable) -> Self {
        Labeled { space: o.space, matrix: o.data }
    }
}

impl Observable {
    pub fn new(space: Space, data: CMat) -> Result<Self> {
        check_shape(&space, &data)?;
        let gap = hermiticity_gap(&data);
        if gap > TOL_HERM {
            return Err(Error::Shape(format!("observable is not Hermitian (gap {gap:e})")));
        }
        Ok(Observable { data: hermitian_part(&data), space })
    }

    pub fn zero(space: Space) -> Self {
        let d = space.dim();
        Observable { space, data: linalg::zeros(d, d) }
    }

    /// Diagonal observable in the computational basis.
    pub fn diagonal(space: Space, values: &[f64]) -> Result<Self> {
        if values.len() != space.dim() {
            return Err(Error::Shape(format!("{} diagonal values for dimension {}", values.len(), space.dim())));
        }
        let d = values.len();
        let m = CMat::from_fn(d, d, |r, k| if r == k { c(values[r], 0.0) } else { c(0.0, 0.0) });
        Ok(Observable { space, data: m })
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn matrix(&self) -> &CMat {
        &self.data
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eigh(&self.data).0
    }

    /// Largest minus smallest eigenvalue.
    pub fn spread(&self) -> f64 {
        let e = self.eigenvalues();
        match (e.first(), e.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    pub fn reorder(&self, order: &Space) -> Result<Observable> {
        Ok(Observable { data: permute_operator(&self.data, &self.space, order)?, space: order.clone() })
    }

    pub fn relabel(&self, space: Space) -> Result<Observable> {
        check_shape(&space, &self.data)?;
        Ok(Observable { space, data: self.data.clone() })
    }

    /// O ⊗ I on `full`, laid out in `full`'s label order.
    pub fn embed(&self, full: &Space) -> Result<Observable> {
        full.check_subset(&self.space)?;
        let rest = full.without(&self.space);
        let m = kron(&self.data, &linalg::identity(rest.dim()));
        let space = self.space.concat(&rest)?;
        Ok(Observable { data: permute_operator(&m, &space, full)?, space: full.clone() })
    }

    pub fn scaled(&self, s: f64) -> Observable {
        Observable { space: self.space.clone(), data: &self.data * c(s, 0.0) }
    }

    pub fn add(&self, other: &Observable) -> Result<Observable> {
        if self.space != other.space {
            return Err(Error::CompositeSpace("adding observables on different spaces".into()));
        }
        Ok(Observable { space: self.space.clone(), data: &self.data + &other.data })
    }
}

/// Kronecker product with concatenated labels.
pub trait Tensor: Sized {
    fn tensor(&self, other: &Self) -> Result<Self>;
}

impl Tensor for DensityMatrix {
    fn tensor(&self, other: &Self) -> Result<Self> {
        let space = self.space.concat(&other.space)?;
        Ok(DensityMatrix { space, data: kron(&self.data, &other.data) })
    }
}

impl Tensor for Observable {
    fn tensor(&self, other: &Self) -> Result<Self> {
        let space = self.space.concat(&other.space)?;
        Ok(Observable { space, data: kron(&self.data, &other.data) })
    }
}

/// Weighted list of states on a common space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<EnsembleEntry>", into = "Vec<EnsembleEntry>")]
pub struct TestEnsemble {
    entries: Vec<(f64, DensityMatrix)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnsembleEntry {
    p: f64,
    state: DensityMatrix,
}

impl TryFrom<Vec<EnsembleEntry>> for TestEnsemble {
    type Error = Error;
    fn try_from(v: Vec<EnsembleEntry>) -> Result<Self> {
        TestEnsemble::new(v.into_iter().map(|e| (e.p, e.state)).collect())
    }
}

impl From<TestEnsemble> for Vec<EnsembleEntry> {
    fn from(t: TestEnsemble) -> Self {
        t.entries.into_iter().map(|(p, state)| EnsembleEntry { p, state }).collect()
    }
}

impl TestEnsemble {
    pub fn new(entries: Vec<(f64, DensityMatrix)>) -> Result<Self> {
        let Some(first) = entries.first() else {
            return Err(Error::StateValidity("empty ensemble".into()));
        };
        let space = first.1.space().clone();
        if entries.iter().any(|(_, r)| r.space() != &space) {
            return Err(Error::CompositeSpace("ensemble states live on different spaces".into()));
        }
        if entries.iter().any(|(p, _)| !(*p >= 0.0)) {
            return Err(Error::StateValidity("negative ensemble weight".into()));
        }
        let total: f64 = entries.iter().map(|(p, _)| p).sum();
        if (total - 1.0).abs() > TOL_ENSEMBLE {
            return Err(Error::StateValidity(format!("ensemble weights sum to {total}")));
        }
        Ok(TestEnsemble { entries })
    }

    /// Equal mixture of |+⟩ and |−⟩ on a qubit named `label`.
    pub fn plus_minus(label: &str) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let space = Space::single(label, 2);
        let plus = DensityMatrix::pure(space.clone(), &CMat::from_column_slice(2, 1, &[c(s, 0.0), c(s, 0.0)])).unwrap();
        let minus = DensityMatrix::pure(space, &CMat::from_column_slice(2, 1, &[c(s, 0.0), c(-s, 0.0)])).unwrap();
        TestEnsemble { entries: vec![(0.5, plus), (0.5, minus)] }
    }

    pub fn entries(&self) -> &[(f64, DensityMatrix)] {
        &self.entries
    }

    pub fn space(&self) -> &Space {
        self.entries[0].1.space()
    }

    /// Σ p_k ρ_k.
    pub fn average(&self) -> DensityMatrix {
        let d = self.entries[0].1.dim();
        let mut m = linalg::zeros(d, d);
        for (p, r) in &self.entries {
            m += r.matrix() * c(*p, 0.0);
        }
        DensityMatrix::from_parts(self.space().clone(), m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::linalg::{max_abs_diff, pauli_z};
    use crate::qcore::space::HilbertLabel;

    #[test]
    fn state_validation() {
        let s = Space::single("S", 2);
        assert!(DensityMatrix::new(s.clone(), pauli_z()).is_err());
        assert!(DensityMatrix::new(s.clone(), linalg::real_matrix(2, 2, &[1.2, 0.0, 0.0, -0.2])).is_err());
        assert!(DensityMatrix::new(s, linalg::real_matrix(2, 2, &[0.5, 0.5, 0.5, 0.5])).is_ok());
    }

    #[test]
    fn product_basis_tensor() {
        let a = DensityMatrix::basis(Space::single("A", 2), 0).unwrap();
        let b = DensityMatrix::basis(Space::single("B", 2), 1).unwrap();
        let ab = a.tensor(&b).unwrap();
        assert_eq!(ab.matrix()[(1, 1)], c(1.0, 0.0));
        assert!((linalg::trace(ab.matrix()).re - 1.0).abs() < 1e-15);
        assert!(a.tensor(&a).is_err());
    }

    #[test]
    fn embed_places_factor() {
        let full = Space::new(vec![HilbertLabel::new("A", 2), HilbertLabel::new("B", 2)]).unwrap();
        let z = Observable::new(Space::single("B", 2), pauli_z()).unwrap();
        let e = z.embed(&full).unwrap();
        assert!(max_abs_diff(e.matrix(), &kron(&linalg::identity(2), &pauli_z())) < 1e-15);
    }

    #[test]
    fn ensemble_weights_checked() {
        let r = DensityMatrix::maximally_mixed(Space::single("Q", 2));
        assert!(TestEnsemble::new(vec![(0.5, r.clone()), (0.4, r.clone())]).is_err());
        assert!(TestEnsemble::new(vec![(0.5, r.clone()), (0.5, r)]).is_ok());
    }
}
