//! Kraus channels and instruments between labeled spaces.

use serde::{Deserialize, Serialize};

use super::json;
use super::linalg::{self, c, eigh, kron, max_abs_diff, CMat};
use super::space::{permute_matrix, permute_operator, Space};
use super::state::{DensityMatrix, Observable};
use crate::error::{Error, Result};

pub const TOL_TP: f64 = 1e-9;
pub const TOL_CHOI: f64 = 1e-9;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    in_space: Space,
    out_space: Space,
    #[serde(with = "json::list")]
    kraus: Vec<CMat>,
    #[serde(default = "yes")]
    trace_preserving: bool,
}

fn yes() -> bool {
    true
}

/// Completely positive map Σ K_i(·)K_i† with K_i of shape out×in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChannel", into = "RawChannel")]
pub struct KrausChannel {
    in_space: Space,
    out_space: Space,
    kraus: Vec<CMat>,
    trace_preserving: bool,
}

impl TryFrom<RawChannel> for KrausChannel {
    type Error = Error;
    fn try_from(r: RawChannel) -> Result<Self> {
        if r.trace_preserving {
            KrausChannel::new(r.in_space, r.out_space, r.kraus)
        } else {
            KrausChannel::new_cp(r.in_space, r.out_space, r.kraus)
        }
    }
}

impl From<KrausChannel> for RawChannel {
    fn from(k: KrausChannel) -> Self {
        RawChannel { in_space: k.in_space, out_space: k.out_space, kraus: k.kraus, trace_preserving: k.trace_preserving }
    }
}

fn check_kraus_shapes(in_space: &Space, out_space: &Space, kraus: &[CMat]) -> Result<()> {
    if kraus.is_empty() {
        return Err(Error::Shape("channel needs at least one Kraus operator".into()));
    }
    let (din, dout) = (in_space.dim(), out_space.dim());
    for (i, k) in kraus.iter().enumerate() {
        if k.nrows() != dout || k.ncols() != din {
            return Err(Error::Shape(format!(
                "Kraus operator {i} is {}x{}, expected {dout}x{din}",
                k.nrows(),
                k.ncols()
            )));
        }
    }
    Ok(())
}

/// Σ K†K.
fn gram(kraus: &[CMat], din: usize) -> CMat {
    let mut g = linalg::zeros(din, din);
    for k in kraus {
        g += k.adjoint() * k;
    }
    g
}

impl KrausChannel {
    /// Trace-preserving channel; Σ K†K must equal the identity within 1e-9.
    pub fn new(in_space: Space, out_space: Space, kraus: Vec<CMat>) -> Result<Self> {
        check_kraus_shapes(&in_space, &out_space, &kraus)?;
        let dev = max_abs_diff(&gram(&kraus, in_space.dim()), &linalg::identity(in_space.dim()));
        if dev > TOL_TP {
            return Err(Error::ChannelValidity(format!("not trace preserving (deviation {dev:e})")));
        }
        Ok(KrausChannel { in_space, out_space, kraus, trace_preserving: true })
    }

    /// Trace-non-increasing CP map; Σ K†K ≼ I + 1e-9.
    pub fn new_cp(in_space: Space, out_space: Space, kraus: Vec<CMat>) -> Result<Self> {
        check_kraus_shapes(&in_space, &out_space, &kraus)?;
        let top = eigh(&gram(&kraus, in_space.dim())).0.last().copied().unwrap_or(0.0);
        if top > 1.0 + TOL_TP {
            return Err(Error::ChannelValidity(format!("trace increasing (largest eigenvalue of ΣK†K is {top})")));
        }
        Ok(KrausChannel { in_space, out_space, kraus, trace_preserving: false })
    }

    /// CP map with no bound on Σ K†K, for branches whose outputs are
    /// renormalized by their trace before use.
    pub fn new_cp_unbounded(in_space: Space, out_space: Space, kraus: Vec<CMat>) -> Result<Self> {
        check_kraus_shapes(&in_space, &out_space, &kraus)?;
        Ok(KrausChannel { in_space, out_space, kraus, trace_preserving: false })
    }

    pub(crate) fn from_parts(in_space: Space, out_space: Space, kraus: Vec<CMat>) -> Self {
        KrausChannel { in_space, out_space, kraus, trace_preserving: true }
    }

    pub fn identity(space: Space) -> Self {
        let d = space.dim();
        KrausChannel { out_space: space.clone(), in_space: space, kraus: vec![linalg::identity(d)], trace_preserving: true }
    }

    pub fn unitary(space: Space, u: CMat) -> Result<Self> {
        KrausChannel::new(space.clone(), space, vec![u])
    }

    /// ρ ↦ (1−p)ρ + p·Tr[ρ]·I/d.
    pub fn depolarizing(space: Space, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::ChannelValidity(format!("depolarizing parameter {p} outside [0,1]")));
        }
        let d = space.dim();
        let mut kraus = vec![linalg::identity(d) * c((1.0 - p).sqrt(), 0.0)];
        let w = c((p / d as f64).sqrt(), 0.0);
        for i in 0..d {
            for j in 0..d {
                kraus.push(linalg::ket(d, i) * linalg::ket(d, j).adjoint() * w);
            }
        }
        KrausChannel::new(space.clone(), space, kraus)
    }

    pub fn in_space(&self) -> &Space {
        &self.in_space
    }

    pub fn out_space(&self) -> &Space {
        &self.out_space
    }

    pub fn kraus(&self) -> &[CMat] {
        &self.kraus
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.trace_preserving
    }

    /// Max-abs gap between Σ K†K and the identity.
    pub fn tp_deviation(&self) -> f64 {
        max_abs_diff(&gram(&self.kraus, self.in_space.dim()), &linalg::identity(self.in_space.dim()))
    }

    /// Choi matrix Σ_{ij} |i⟩⟨j| ⊗ N(|i⟩⟨j|), input factor first.
    pub fn choi(&self) -> CMat {
        let (din, dout) = (self.in_space.dim(), self.out_space.dim());
        let mut j = linalg::zeros(din * dout, din * dout);
        for k in &self.kraus {
            let v = CMat::from_fn(din * dout, 1, |r, _| k[(r % dout, r / dout)]);
            j += &v * v.adjoint();
        }
        j
    }

    pub fn choi_min_eigenvalue(&self) -> f64 {
        eigh(&self.choi()).0.first().copied().unwrap_or(0.0)
    }

    /// Checks trace preservation (if claimed) and Choi positivity.
    pub fn validate(&self) -> Result<()> {
        if self.trace_preserving {
            let dev = self.tp_deviation();
            if dev > TOL_TP {
                return Err(Error::ChannelValidity(format!("not trace preserving (deviation {dev:e})")));
            }
        }
        let m = self.choi_min_eigenvalue();
        if m < -TOL_CHOI {
            return Err(Error::ChannelValidity(format!("Choi matrix has eigenvalue {m:e}")));
        }
        Ok(())
    }

    /// Equivalent channel with at most dim(in)·dim(out) Kraus operators.
    pub fn minimal(&self) -> KrausChannel {
        let (din, dout) = (self.in_space.dim(), self.out_space.dim());
        let (vals, vecs) = eigh(&self.choi());
        let top = vals.last().copied().unwrap_or(0.0).max(0.0);
        let mut kraus = Vec::new();
        for (idx, &l) in vals.iter().enumerate().rev() {
            if l <= top * 1e-15 || l <= 0.0 {
                continue;
            }
            let s = c(l.sqrt(), 0.0);
            kraus.push(CMat::from_fn(dout, din, |o, i| vecs[(i * dout + o, idx)] * s));
        }
        if kraus.is_empty() {
            kraus.push(linalg::zeros(dout, din));
        }
        KrausChannel { in_space: self.in_space.clone(), out_space: self.out_space.clone(), kraus, trace_preserving: self.trace_preserving }
    }

    /// Same map with input and output labels reordered.
    pub fn reorder(&self, in_order: &Space, out_order: &Space) -> Result<KrausChannel> {
        let kraus = self
            .kraus
            .iter()
            .map(|k| permute_matrix(k, &self.out_space, out_order, &self.in_space, in_order))
            .collect::<Result<Vec<_>>>()?;
        Ok(KrausChannel { in_space: in_order.clone(), out_space: out_order.clone(), kraus, trace_preserving: self.trace_preserving })
    }

    /// Output label order after acting on `full`: input labels replaced in place
    /// by the output labels (at the position of the first input label).
    fn embedded_out_order(&self, full: &Space) -> Result<Space> {
        let rest = full.without(&self.in_space);
        let mut labels = Vec::new();
        let mut placed = false;
        for l in full.labels() {
            if self.in_space.contains(&l.name) {
                if !placed {
                    labels.extend(self.out_space.labels().iter().cloned());
                    placed = true;
                }
            } else {
                labels.push(l.clone());
            }
        }
        // collision check between outputs and the untouched labels
        self.out_space.concat(&rest)?;
        Space::new(labels)
    }

    /// The map N ⊗ id acting on the larger input space `full`.
    pub fn embed(&self, full: &Space) -> Result<KrausChannel> {
        full.check_subset(&self.in_space)?;
        let rest = full.without(&self.in_space);
        let in_order = self.in_space.concat(&rest)?;
        let out_order = self.out_space.concat(&rest)?;
        let target = self.embedded_out_order(full)?;
        let id = linalg::identity(rest.dim());
        let kraus = self
            .kraus
            .iter()
            .map(|k| permute_matrix(&kron(k, &id), &out_order, &target, &in_order, full))
            .collect::<Result<Vec<_>>>()?;
        Ok(KrausChannel { in_space: full.clone(), out_space: target, kraus, trace_preserving: self.trace_preserving })
    }

    /// `next ∘ self`; `next` may act on a subset of this channel's outputs.
    pub fn then(&self, next: &KrausChannel) -> Result<KrausChannel> {
        let next = if next.in_space.same_set(&self.out_space) {
            next.reorder(&self.out_space, &next.out_space)?
        } else {
            next.embed(&self.out_space)?
        };
        let mut kraus = Vec::with_capacity(self.kraus.len() * next.kraus.len());
        for b in &next.kraus {
            for a in &self.kraus {
                kraus.push(b * a);
            }
        }
        Ok(KrausChannel {
            in_space: self.in_space.clone(),
            out_space: next.out_space.clone(),
            kraus,
            trace_preserving: self.trace_preserving && next.trace_preserving,
        })
    }

    /// Applies the map to an operator on `space` ⊇ in_space; returns the output
    /// space (labels replaced in place) and matrix.
    pub fn apply_matrix(&self, space: &Space, m: &CMat) -> Result<(Space, CMat)> {
        if m.nrows() != space.dim() || m.ncols() != space.dim() {
            return Err(Error::Shape("operator does not match its space".into()));
        }
        space.check_subset(&self.in_space)?;
        if space == &self.in_space {
            return Ok((self.out_space.clone(), self.sandwich(m)));
        }
        let rest = space.without(&self.in_space);
        let in_order = self.in_space.concat(&rest)?;
        let out_order = self.out_space.concat(&rest)?;
        let target = self.embedded_out_order(space)?;
        let p = permute_operator(m, space, &in_order)?;
        let id = linalg::identity(rest.dim());
        let mut out = linalg::zeros(out_order.dim(), out_order.dim());
        for k in &self.kraus {
            let kk = kron(k, &id);
            out += &kk * &p * kk.adjoint();
        }
        Ok((target.clone(), permute_operator(&out, &out_order, &target)?))
    }

    fn sandwich(&self, m: &CMat) -> CMat {
        let d = self.out_space.dim();
        let mut out = linalg::zeros(d, d);
        for k in &self.kraus {
            out += k * m * k.adjoint();
        }
        out
    }

    /// N(ρ); for sub-normalized maps the result carries trace ≤ 1.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let (s, m) = self.apply_matrix(rho.space(), rho.matrix())?;
        Ok(DensityMatrix::from_parts(s, m))
    }

    /// Heisenberg-picture map N†(O) = Σ K†OK.
    pub fn dual(&self, o: &Observable) -> Result<Observable> {
        let o = if o.space() == &self.out_space { o.clone() } else { o.reorder(&self.out_space)? };
        let d = self.in_space.dim();
        let mut out = linalg::zeros(d, d);
        for k in &self.kraus {
            out += k.adjoint() * o.matrix() * k;
        }
        Observable::new(self.in_space.clone(), out)
    }

    /// Dual applied to a matrix on the output space (no Hermiticity requirement).
    pub fn dual_matrix(&self, o: &CMat) -> CMat {
        let d = self.in_space.dim();
        let mut out = linalg::zeros(d, d);
        for k in &self.kraus {
            out += k.adjoint() * o * k;
        }
        out
    }

    pub fn tensor(&self, other: &KrausChannel) -> Result<KrausChannel> {
        let in_space = self.in_space.concat(&other.in_space)?;
        let out_space = self.out_space.concat(&other.out_space)?;
        let mut kraus = Vec::new();
        for a in &self.kraus {
            for b in &other.kraus {
                kraus.push(kron(a, b));
            }
        }
        Ok(KrausChannel { in_space, out_space, kraus, trace_preserving: self.trace_preserving && other.trace_preserving })
    }

    /// Max-abs Choi-matrix gap to another channel on the same (reorderable) spaces.
    pub fn choi_distance(&self, other: &KrausChannel) -> Result<f64> {
        let other = other.reorder(&self.in_space, &self.out_space)?;
        Ok(max_abs_diff(&self.choi(), &other.choi()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstrumentBranch {
    pub outcome: usize,
    #[serde(with = "json")]
    pub kraus: CMat,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstrument {
    in_space: Space,
    out_space: Space,
    branches: Vec<InstrumentBranch>,
}

/// Outcome-labeled Kraus operators; several branches may share an outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInstrument", into = "RawInstrument")]
pub struct Instrument {
    in_space: Space,
    out_space: Space,
    branches: Vec<InstrumentBranch>,
}

impl TryFrom<RawInstrument> for Instrument {
    type Error = Error;
    fn try_from(r: RawInstrument) -> Result<Self> {
        Instrument::new(r.in_space, r.out_space, r.branches)
    }
}

impl From<Instrument> for RawInstrument {
    fn from(i: Instrument) -> Self {
        RawInstrument { in_space: i.in_space, out_space: i.out_space, branches: i.branches }
    }
}

/// Post-measurement operator for one outcome, trace = outcome probability.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchState {
    pub outcome: usize,
    pub space: Space,
    pub data: CMat,
}

impl BranchState {
    pub fn probability(&self) -> f64 {
        linalg::trace(&self.data).re
    }
}

impl Instrument {
    pub fn new(in_space: Space, out_space: Space, branches: Vec<InstrumentBranch>) -> Result<Self> {
        let ops: Vec<CMat> = branches.iter().map(|b| b.kraus.clone()).collect();
        check_kraus_shapes(&in_space, &out_space, &ops)?;
        let dev = max_abs_diff(&gram(&ops, in_space.dim()), &linalg::identity(in_space.dim()));
        if dev > TOL_TP {
            return Err(Error::ChannelValidity(format!("instrument is not trace preserving (deviation {dev:e})")));
        }
        Ok(Instrument { in_space, out_space, branches })
    }

    /// One branch per outcome, with Kraus operators indexed by outcome.
    pub fn from_kraus(in_space: Space, out_space: Space, kraus: Vec<CMat>) -> Result<Self> {
        let branches = kraus.into_iter().enumerate().map(|(outcome, kraus)| InstrumentBranch { outcome, kraus }).collect();
        Instrument::new(in_space, out_space, branches)
    }

    /// Lüders instrument √Π_m(·)√Π_m for a POVM; the output space is `out_name`.
    pub fn luders(in_space: Space, out_name: &str, povm: &[CMat]) -> Result<Self> {
        let out = Space::single(out_name, in_space.dim());
        Instrument::from_kraus(in_space, out, povm.iter().map(linalg::sqrt_psd).collect())
    }

    /// Projective measurement in the computational basis.
    pub fn computational(in_space: Space, out_name: &str) -> Result<Self> {
        let d = in_space.dim();
        let proj: Vec<CMat> = (0..d).map(|i| linalg::projector(&linalg::ket(d, i))).collect();
        Instrument::luders(in_space, out_name, &proj)
    }

    pub fn in_space(&self) -> &Space {
        &self.in_space
    }

    pub fn out_space(&self) -> &Space {
        &self.out_space
    }

    pub fn branches(&self) -> &[InstrumentBranch] {
        &self.branches
    }

    pub fn num_outcomes(&self) -> usize {
        self.branches.iter().map(|b| b.outcome + 1).max().unwrap_or(0)
    }

    /// POVM elements Π_m = Σ_{branches of m} M†M.
    pub fn povm(&self) -> Vec<CMat> {
        let d = self.in_space.dim();
        let mut out = vec![linalg::zeros(d, d); self.num_outcomes()];
        for b in &self.branches {
            out[b.outcome] += b.kraus.adjoint() * &b.kraus;
        }
        out
    }

    /// The measuring process Σ_m M_m(·)M_m† from S to S'.
    pub fn channel(&self) -> KrausChannel {
        KrausChannel::from_parts(self.in_space.clone(), self.out_space.clone(), self.branches.iter().map(|b| b.kraus.clone()).collect())
    }

    /// The outcome channel ρ ↦ Σ_m Tr[M_m ρ M_m†] |m⟩⟨m| onto a register named `label`.
    pub fn outcome_channel(&self, label: &str) -> KrausChannel {
        let n = self.num_outcomes();
        let dout = self.out_space.dim();
        let mut kraus = Vec::new();
        for b in &self.branches {
            for j in 0..dout {
                kraus.push(linalg::ket(n, b.outcome) * (linalg::ket(dout, j).adjoint() * &b.kraus));
            }
        }
        KrausChannel::from_parts(self.in_space.clone(), Space::single(label, n), kraus)
    }

    /// Per-outcome sub-normalized post-measurement states.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<Vec<BranchState>> {
        let mut per: Vec<Option<(Space, CMat)>> = vec![None; self.num_outcomes()];
        for b in &self.branches {
            let ch = KrausChannel::from_parts(self.in_space.clone(), self.out_space.clone(), vec![b.kraus.clone()]);
            let (s, m) = ch.apply_matrix(rho.space(), rho.matrix())?;
            match &mut per[b.outcome] {
                Some((_, acc)) => *acc += m,
                slot => *slot = Some((s, m)),
            }
        }
        Ok(per
            .into_iter()
            .enumerate()
            .filter_map(|(outcome, e)| e.map(|(space, data)| BranchState { outcome, space, data }))
            .collect())
    }

    /// Outcome probabilities p(m) = Tr[Π_m ρ] for ρ on the input space.
    pub fn probabilities(&self, rho: &CMat) -> Vec<f64> {
        self.povm().iter().map(|p| (p * rho).trace().re).collect()
    }
}
