//! Labeled tensor-product spaces and the index bookkeeping behind them.

use serde::{Deserialize, Serialize};

use super::linalg::CMat;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HilbertLabel {
    pub name: String,
    pub dim: usize,
}

impl HilbertLabel {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        HilbertLabel { name: name.into(), dim }
    }
}

/// Ordered list of labels; the first label is the most significant tensor factor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<HilbertLabel>", into = "Vec<HilbertLabel>")]
pub struct Space(Vec<HilbertLabel>);

impl TryFrom<Vec<HilbertLabel>> for Space {
    type Error = Error;
    fn try_from(labels: Vec<HilbertLabel>) -> Result<Self> {
        Space::new(labels)
    }
}

impl From<Space> for Vec<HilbertLabel> {
    fn from(s: Space) -> Self {
        s.0
    }
}

impl Space {
    pub fn new(labels: Vec<HilbertLabel>) -> Result<Self> {
        for (i, l) in labels.iter().enumerate() {
            if l.dim == 0 {
                return Err(Error::CompositeSpace(format!("label {} has dimension 0", l.name)));
            }
            if labels[..i].iter().any(|o| o.name == l.name) {
                return Err(Error::CompositeSpace(format!("duplicate label {}", l.name)));
            }
        }
        Ok(Space(labels))
    }

    /// Single-label space.
    pub fn single(name: &str, dim: usize) -> Self {
        Space(vec![HilbertLabel::new(name, dim)])
    }

    pub fn empty() -> Self {
        Space(Vec::new())
    }

    pub fn labels(&self) -> &[HilbertLabel] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.0.iter().map(|l| l.dim).product()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.0.iter().map(|l| l.dim).collect()
    }

    pub fn names(&self) -> Vec<&str> {
        self.0.iter().map(|l| l.name.as_str()).collect()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.0.iter().position(|l| l.name == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.position(name).is_some()
    }

    pub fn get(&self, name: &str) -> Option<&HilbertLabel> {
        self.0.iter().find(|l| l.name == name)
    }

    /// Concatenation; fails on a shared label name.
    pub fn concat(&self, other: &Space) -> Result<Space> {
        for l in &other.0 {
            if self.contains(&l.name) {
                return Err(Error::CompositeSpace(format!("label {} appears on both sides", l.name)));
            }
        }
        let mut v = self.0.clone();
        v.extend(other.0.iter().cloned());
        Ok(Space(v))
    }

    /// Labels of `self` not named in `other`, in `self` order.
    pub fn without(&self, other: &Space) -> Space {
        Space(self.0.iter().filter(|l| !other.contains(&l.name)).cloned().collect())
    }

    /// Checks that every label of `sub` appears in `self` with the same dimension.
    pub fn check_subset(&self, sub: &Space) -> Result<()> {
        for l in &sub.0 {
            match self.get(&l.name) {
                None => return Err(Error::CompositeSpace(format!("unknown label {}", l.name))),
                Some(m) if m.dim != l.dim => {
                    return Err(Error::Shape(format!(
                        "label {} has dimension {} but {} was expected",
                        l.name, m.dim, l.dim
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Same labels, possibly reordered.
    pub fn same_set(&self, other: &Space) -> bool {
        self.len() == other.len() && self.check_subset(other).is_ok()
    }

    /// Positions in `self` of the labels of `order`, i.e. the permutation taking
    /// `self` to `order`.
    pub fn permutation_to(&self, order: &Space) -> Result<Vec<usize>> {
        if !self.same_set(order) {
            return Err(Error::CompositeSpace(format!(
                "cannot reorder {:?} into {:?}",
                self.names(),
                order.names()
            )));
        }
        Ok(order.0.iter().map(|l| self.position(&l.name).unwrap()).collect())
    }
}

/// For a tensor layout with factor dims `dims` reordered so that new factor `i`
/// is old factor `perm[i]`, returns for every new flat index the old flat index.
pub fn index_map(dims: &[usize], perm: &[usize]) -> Vec<usize> {
    let n = dims.len();
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let mut old_stride = vec![1usize; n];
    for i in (0..n.saturating_sub(1)).rev() {
        old_stride[i] = old_stride[i + 1] * dims[i + 1];
    }
    let total: usize = dims.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut digits = vec![0usize; n];
    for _ in 0..total {
        out.push((0..n).map(|i| digits[i] * old_stride[perm[i]]).sum());
        for i in (0..n).rev() {
            digits[i] += 1;
            if digits[i] < new_dims[i] {
                break;
            }
            digits[i] = 0;
        }
    }
    out
}

/// Reorders the row and column tensor factors of `m`.
pub fn permute_matrix(m: &CMat, row_space: &Space, row_order: &Space, col_space: &Space, col_order: &Space) -> Result<CMat> {
    let rmap = index_map(&row_space.dims(), &row_space.permutation_to(row_order)?);
    let cmap = index_map(&col_space.dims(), &col_space.permutation_to(col_order)?);
    Ok(CMat::from_fn(m.nrows(), m.ncols(), |r, k| m[(rmap[r], cmap[k])]))
}

/// Reorders an operator on `space` into the label order `order`.
pub fn permute_operator(m: &CMat, space: &Space, order: &Space) -> Result<CMat> {
    permute_matrix(m, space, order, space, order)
}

/// Partial trace keeping the labels in `keep` (returned in `space` order).
pub fn partial_trace_matrix(m: &CMat, space: &Space, keep: &Space) -> Result<(Space, CMat)> {
    space.check_subset(keep)?;
    let kept = Space(space.0.iter().filter(|l| keep.contains(&l.name)).cloned().collect());
    let traced = space.without(&kept);
    let order = kept.concat(&traced)?;
    let p = permute_operator(m, space, &order)?;
    let (dk, dt) = (kept.dim(), traced.dim());
    let out = CMat::from_fn(dk, dk, |i, j| (0..dt).map(|t| p[(i * dt + t, j * dt + t)]).sum());
    Ok((kept, out))
}
