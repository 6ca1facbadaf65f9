//! Out-of-time-ordered correlators as the disturbance of a single ancilla.
//!
//! C(τ) = −Tr[ρ[W(τ), V]²] is recovered from the protocol in which V couples
//! the system to the ancilla, W(τ) acts as the process, and the canonical
//! recovery built from V undoes the coupling.

use serde::{Deserialize, Serialize};

use crate::comb::{self, ExtractionConfig, IepResult, Recovery};
use crate::error::{Error, Result};
use crate::qcore::linalg::{self, c, CMat};
use crate::qcore::{DensityMatrix, HilbertLabel, Instrument, InstrumentBranch, KrausChannel, Observable, Space};
use crate::way::{self, Implementation, WayReport};

pub const TOL_UNITARY: f64 = 1e-9;
pub const TOL_MIXED: f64 = 1e-9;
/// Operators with all |w_i| below this are treated as zero.
pub const TOL_VANISHING: f64 = 1e-12;

/// Sum of Pauli strings over qubits labeled q0, q1, ….
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PauliSum {
    pub qubits: usize,
    pub terms: Vec<PauliTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PauliTerm {
    pub coeff: f64,
    /// One of I, X, Y, Z per qubit, most significant first.
    pub ops: String,
}

pub fn qubit_space(n: usize) -> Space {
    Space::new((0..n).map(|i| HilbertLabel::new(format!("q{i}"), 2)).collect()).expect("distinct names")
}

impl PauliSum {
    pub fn to_observable(&self) -> Result<Observable> {
        let d = 1usize << self.qubits;
        let mut m = linalg::zeros(d, d);
        for t in &self.terms {
            if t.ops.chars().count() != self.qubits {
                return Err(Error::Shape(format!("Pauli string {:?} does not have {} sites", t.ops, self.qubits)));
            }
            let p = linalg::pauli_string(&t.ops).ok_or_else(|| Error::Shape(format!("bad Pauli string {:?}", t.ops)))?;
            m += p * c(t.coeff, 0.0);
        }
        Observable::new(qubit_space(self.qubits), m)
    }
}

/// Dense observable or Pauli sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OperatorSpec {
    Pauli(PauliSum),
    Dense(Observable),
}

impl OperatorSpec {
    pub fn to_observable(&self) -> Result<Observable> {
        match self {
            OperatorSpec::Pauli(p) => p.to_observable(),
            OperatorSpec::Dense(o) => Ok(o.clone()),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    hamiltonian: OperatorSpec,
    w: OperatorSpec,
    v: OperatorSpec,
    #[serde(default)]
    tau: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    state: Option<DensityMatrix>,
}

/// H, W(0), V(0), τ and ρ on a common system; ρ defaults to I/d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScenario", into = "RawScenario")]
pub struct ScramblingScenario {
    hamiltonian: Observable,
    w: Observable,
    v: Observable,
    tau: f64,
    state: DensityMatrix,
}

impl TryFrom<RawScenario> for ScramblingScenario {
    type Error = Error;
    fn try_from(r: RawScenario) -> Result<Self> {
        ScramblingScenario::new(r.hamiltonian.to_observable()?, r.w.to_observable()?, r.v.to_observable()?, r.tau, r.state)
    }
}

impl From<ScramblingScenario> for RawScenario {
    fn from(s: ScramblingScenario) -> Self {
        RawScenario {
            hamiltonian: OperatorSpec::Dense(s.hamiltonian),
            w: OperatorSpec::Dense(s.w),
            v: OperatorSpec::Dense(s.v),
            tau: s.tau,
            state: Some(s.state),
        }
    }
}

impl ScramblingScenario {
    pub fn new(hamiltonian: Observable, w: Observable, v: Observable, tau: f64, state: Option<DensityMatrix>) -> Result<Self> {
        let space = hamiltonian.space().clone();
        let w = w.reorder(&space)?;
        let v = v.reorder(&space)?;
        let state = match state {
            Some(s) => s.reorder(&space)?,
            None => DensityMatrix::maximally_mixed(space),
        };
        if !tau.is_finite() {
            return Err(Error::Shape(format!("non-finite time {tau}")));
        }
        Ok(ScramblingScenario { hamiltonian, w, v, tau, state })
    }

    pub fn space(&self) -> &Space {
        self.hamiltonian.space()
    }

    pub fn hamiltonian(&self) -> &Observable {
        &self.hamiltonian
    }

    pub fn w(&self) -> &Observable {
        &self.w
    }

    pub fn v(&self) -> &Observable {
        &self.v
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn state(&self) -> &DensityMatrix {
        &self.state
    }

    pub fn at(&self, tau: f64) -> ScramblingScenario {
        ScramblingScenario { tau, ..self.clone() }
    }

    pub fn with_w(&self, w: Observable) -> Result<ScramblingScenario> {
        ScramblingScenario::new(self.hamiltonian.clone(), w, self.v.clone(), self.tau, Some(self.state.clone()))
    }

    pub fn with_state(&self, state: DensityMatrix) -> Result<ScramblingScenario> {
        ScramblingScenario::new(self.hamiltonian.clone(), self.w.clone(), self.v.clone(), self.tau, Some(state))
    }

    /// W(τ).
    pub fn evolved_w(&self) -> Result<Observable> {
        heisenberg(&self.w, &self.hamiltonian, self.tau)
    }

    fn require_unitary_w(&self) -> Result<()> {
        let sq = self.w.matrix() * self.w.matrix();
        let dev = linalg::max_abs_diff(&sq, &linalg::identity(self.w.dim()));
        if dev > TOL_UNITARY {
            return Err(Error::Assumption(format!("W must satisfy W² = I (deviation {dev:e})")));
        }
        Ok(())
    }
}

/// e^{iHτ} W e^{−iHτ}.
pub fn heisenberg(w0: &Observable, h: &Observable, tau: f64) -> Result<Observable> {
    let w0 = w0.reorder(h.space())?;
    let u = linalg::expm_i(h.matrix(), tau);
    Observable::new(h.space().clone(), u.adjoint() * w0.matrix() * u)
}

/// −Tr[ρ[W(τ), V]²].
pub fn otoc_direct(s: &ScramblingScenario) -> Result<f64> {
    let w = s.evolved_w()?;
    Ok(commutator_otoc(s.state.matrix(), w.matrix(), s.v.matrix()))
}

fn commutator_otoc(rho: &CMat, w: &CMat, v: &CMat) -> f64 {
    let k = linalg::commutator(w, v);
    -(rho * &k * &k).trace().re
}

/// Each label primed, the output side of the process.
pub fn primed(space: &Space) -> Space {
    Space::new(space.labels().iter().map(|l| HilbertLabel::new(format!("{}'", l.name), l.dim)).collect()).expect("priming keeps names distinct")
}

fn w_process(s: &ScramblingScenario, w: &CMat) -> Result<Instrument> {
    Instrument::new(s.space().clone(), primed(s.space()), vec![InstrumentBranch { outcome: 0, kraus: w.clone() }])
}

/// C(τ) as the disturbance of V under ρ ↦ W(τ)ρW(τ) with recovery built from V.
pub fn otoc_iep(s: &ScramblingScenario, cfg: &ExtractionConfig) -> Result<IepResult> {
    s.require_unitary_w()?;
    let w = s.evolved_w()?;
    let process = w_process(s, w.matrix())?;
    let x = s.v.relabel(primed(s.space()))?;
    comb::extract_eta(&s.state, &s.v, &process, &Recovery::Canonical { observable: x }, cfg)
}

/// η² with the optimal recovery for the same process; never above C(τ).
pub fn otoc_eta_min(s: &ScramblingScenario, cfg: &ExtractionConfig) -> Result<IepResult> {
    s.require_unitary_w()?;
    let w = s.evolved_w()?;
    comb::extract_eta(&s.state, &s.v, &w_process(s, w.matrix())?, &Recovery::Optimize, cfg)
}

/// Scale that turns a Hermitian W into the operator W̃ used by the CP protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CpNormalization {
    /// W̃ = W/√Tr[W²ρ], so the branch weight is 1 at θ = 0.
    #[default]
    SecondMoment,
    /// W̃ = W/Σ|w_i|; the branch weight is then Tr[W̃²ρ], generally below 1.
    TraceNorm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpOtocReport {
    pub iep: IepResult,
    /// C(τ) computed directly with W̃.
    pub direct_normalized: f64,
    /// W̃ = scale·W; the unnormalized C(τ) is value / scale².
    pub scale: f64,
    pub normalization: CpNormalization,
    /// Branch weights q per θ (outer) and test state (inner), flattened.
    pub branch_probabilities: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub warning: Option<String>,
}

/// C(τ) for a Hermitian, not necessarily unitary, W via the trace-renormalized
/// branch ρ ↦ W̃(τ)ρW̃(τ). Requires ρ = I/d.
pub fn otoc_iep_cp(s: &ScramblingScenario, cfg: &ExtractionConfig, normalization: CpNormalization) -> Result<CpOtocReport> {
    let d = s.state.dim();
    let mixed = linalg::identity(d) * c(1.0 / d as f64, 0.0);
    let dev = linalg::max_abs_diff(s.state.matrix(), &mixed);
    if dev > TOL_MIXED {
        return Err(Error::Assumption(format!("the CP protocol needs ρ = I/d (deviation {dev:e})")));
    }
    let eig = s.w.eigenvalues();
    if eig.iter().all(|w| w.abs() < TOL_VANISHING) {
        return Ok(CpOtocReport {
            iep: IepResult::analytic(0.0),
            direct_normalized: 0.0,
            scale: 0.0,
            normalization,
            branch_probabilities: Vec::new(),
            warning: Some("W vanishes; the normalization is undefined and C is 0".into()),
        });
    }
    let scale = match normalization {
        CpNormalization::SecondMoment => 1.0 / s.state.expect(&(s.w.matrix() * s.w.matrix())).sqrt(),
        CpNormalization::TraceNorm => 1.0 / eig.iter().map(|w| w.abs()).sum::<f64>(),
    };
    let w = s.evolved_w()?.scaled(scale);
    let stage = KrausChannel::new_cp_unbounded(s.space().clone(), primed(s.space()), vec![w.matrix().clone()])?;
    let x = s.v.relabel(primed(s.space()))?;
    let (iep, qs) = comb::extract_cp(&s.state, &s.v, &stage, &x, cfg)?;
    Ok(CpOtocReport {
        iep,
        direct_normalized: commutator_otoc(s.state.matrix(), w.matrix(), s.v.matrix()),
        scale,
        normalization,
        branch_probabilities: qs,
        warning: None,
    })
}

/// √C(τ) ≥ |⟨[Y″, V]⟩| / (√𝓕_{ρ_β}(X_β) + spread(X_S) + spread(X_S′)) for an
/// implementation of ρ ↦ W(τ)ρW(τ). The output of `imp` must be the primed system.
pub fn way_bound_otoc(s: &ScramblingScenario, imp: &Implementation) -> Result<WayReport> {
    s.require_unitary_w()?;
    let w = s.evolved_w()?;
    let target = KrausChannel::new(s.space().clone(), primed(s.space()), vec![w.matrix().clone()])?;
    let lhs = otoc_direct(s)?.max(0.0).sqrt();
    way::way_bound_unitary(&s.state, &s.v, &target, imp, lhs)
}

/// Transverse-field Ising chain Σ J σᶻσᶻ (open) + Σ h σˣ on n qubits.
pub fn ising_chain(n: usize, coupling: f64, field: f64) -> PauliSum {
    let mut terms = Vec::new();
    for i in 0..n.saturating_sub(1) {
        terms.push(PauliTerm { coeff: coupling, ops: site_string(n, &[(i, 'Z'), (i + 1, 'Z')]) });
    }
    for i in 0..n {
        terms.push(PauliTerm { coeff: field, ops: site_string(n, &[(i, 'X')]) });
    }
    PauliSum { qubits: n, terms }
}

/// Single-site Pauli on qubit `site` of an n-qubit chain.
pub fn site_pauli(n: usize, site: usize, op: char) -> PauliSum {
    PauliSum { qubits: n, terms: vec![PauliTerm { coeff: 1.0, ops: site_string(n, &[(site, op)]) }] }
}

fn site_string(n: usize, ops: &[(usize, char)]) -> String {
    (0..n).map(|i| ops.iter().find(|(s, _)| *s == i).map_or('I', |(_, o)| *o)).collect()
}
