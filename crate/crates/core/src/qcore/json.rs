//! Complex matrices as row-major nested arrays of `[re, im]` pairs.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::linalg::{c, CMat};

pub type RawMatrix = Vec<Vec<[f64; 2]>>;

pub fn to_raw(m: &CMat) -> RawMatrix {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|k| [m[(r, k)].re, m[(r, k)].im]).collect())
        .collect()
}

pub fn from_raw(raw: &RawMatrix) -> Result<CMat, String> {
    let rows = raw.len();
    let cols = raw.first().map_or(0, |r| r.len());
    if raw.iter().any(|r| r.len() != cols) {
        return Err("ragged matrix: rows differ in length".into());
    }
    if raw.iter().flatten().flatten().any(|x| !x.is_finite()) {
        return Err("matrix entries must be finite".into());
    }
    Ok(CMat::from_fn(rows, cols, |r, k| c(raw[r][k][0], raw[r][k][1])))
}

pub fn serialize<S: Serializer>(m: &CMat, s: S) -> Result<S::Ok, S::Error> {
    to_raw(m).serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMat, D::Error> {
    let raw = RawMatrix::deserialize(d)?;
    from_raw(&raw).map_err(D::Error::custom)
}

/// Same encoding for a list of matrices.
pub mod list {
    use super::*;

    pub fn serialize<S: Serializer>(ms: &[CMat], s: S) -> Result<S::Ok, S::Error> {
        ms.iter().map(to_raw).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CMat>, D::Error> {
        let raws = Vec::<RawMatrix>::deserialize(d)?;
        raws.iter().map(|r| from_raw(r).map_err(D::Error::custom)).collect()
    }
}

/// Newtype for places that need a serializable matrix value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JsonMatrix(#[serde(with = "self")] pub CMat);
