//! Conservation-law bounds on measurement error and disturbance.
//!
//! A measurement is implemented by a unitary U on system ⊗ apparatus that
//! conserves an additive charge. The bounds compare the error (or
//! disturbance) against |⟨[Y, A]⟩| divided by the coherence available in the
//! apparatus and the state.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::comb::{self, ExtractionConfig, ExtractionMethod, IepResult, Recovery, POINTER};
use crate::error::{Error, Result};
use crate::oracles;
use crate::qcore::linalg::{self, c, kron, max_abs_diff, CMat};
use crate::qcore::random;
use crate::qcore::space::permute_matrix;
use crate::qcore::{qfi, variance, DensityMatrix, Instrument, InstrumentBranch, KrausChannel, Observable, Space, Tensor};

pub const TOL_CONSERVATION: f64 = 1e-9;
pub const TOL_REALIZATION: f64 = 1e-8;
pub const TOL_SLACK: f64 = 1e-9;

/// Charge observable per label; labels without an entry carry zero charge.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChargeAssignment(pub BTreeMap<String, Observable>);

impl ChargeAssignment {
    pub fn insert(&mut self, o: Observable) -> Result<()> {
        if o.space().len() != 1 {
            return Err(Error::CompositeSpace("each charge lives on exactly one label".into()));
        }
        self.0.insert(o.space().labels()[0].name.clone(), o);
        Ok(())
    }

    /// Total charge Σ X_label on `space`, in its label order.
    pub fn total(&self, space: &Space) -> Result<Observable> {
        let mut acc = Observable::zero(space.clone());
        for l in space.labels() {
            if let Some(x) = self.0.get(&l.name) {
                if x.space().labels() != [l.clone()] {
                    return Err(Error::Shape(format!("charge for {} has the wrong dimension", l.name)));
                }
                acc = acc.add(&x.embed(space)?)?;
            }
        }
        Ok(acc)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawImplementation {
    alpha: Space,
    beta_state: DensityMatrix,
    #[serde(with = "crate::qcore::json")]
    unitary: CMat,
    alpha_out: Space,
    beta_out: Space,
    charges: ChargeAssignment,
}

/// Unitary dilation: U acts on α ⊗ β (input order) and yields α′ ⊗ β′.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawImplementation", into = "RawImplementation")]
pub struct Implementation {
    alpha: Space,
    beta_state: DensityMatrix,
    unitary: CMat,
    alpha_out: Space,
    beta_out: Space,
    charges: ChargeAssignment,
}

impl TryFrom<RawImplementation> for Implementation {
    type Error = Error;
    fn try_from(r: RawImplementation) -> Result<Self> {
        Implementation::new(r.alpha, r.beta_state, r.unitary, r.alpha_out, r.beta_out, r.charges)
    }
}

impl From<Implementation> for RawImplementation {
    fn from(i: Implementation) -> Self {
        RawImplementation {
            alpha: i.alpha,
            beta_state: i.beta_state,
            unitary: i.unitary,
            alpha_out: i.alpha_out,
            beta_out: i.beta_out,
            charges: i.charges,
        }
    }
}

impl Implementation {
    pub fn new(alpha: Space, beta_state: DensityMatrix, unitary: CMat, alpha_out: Space, beta_out: Space, charges: ChargeAssignment) -> Result<Self> {
        let input = alpha.concat(beta_state.space())?;
        let output = alpha_out.concat(&beta_out)?;
        if unitary.nrows() != output.dim() || unitary.ncols() != input.dim() || input.dim() != output.dim() {
            return Err(Error::Shape(format!(
                "unitary is {}x{} for input dimension {} and output dimension {}",
                unitary.nrows(),
                unitary.ncols(),
                input.dim(),
                output.dim()
            )));
        }
        if !linalg::is_unitary(&unitary, 1e-9) {
            return Err(Error::Shape("implementation operator is not unitary".into()));
        }
        Ok(Implementation { alpha, beta_state, unitary, alpha_out, beta_out, charges })
    }

    pub fn alpha(&self) -> &Space {
        &self.alpha
    }

    pub fn beta(&self) -> &Space {
        self.beta_state.space()
    }

    pub fn alpha_out(&self) -> &Space {
        &self.alpha_out
    }

    pub fn beta_out(&self) -> &Space {
        &self.beta_out
    }

    pub fn beta_state(&self) -> &DensityMatrix {
        &self.beta_state
    }

    pub fn unitary(&self) -> &CMat {
        &self.unitary
    }

    pub fn charges(&self) -> &ChargeAssignment {
        &self.charges
    }

    pub fn input_space(&self) -> Space {
        self.alpha.concat(self.beta_state.space()).expect("checked at construction")
    }

    pub fn output_space(&self) -> Space {
        self.alpha_out.concat(&self.beta_out).expect("checked at construction")
    }

    /// The implemented channel α → α′: Tr_β′[U(· ⊗ ρ_β)U†].
    pub fn channel(&self) -> Result<KrausChannel> {
        let (vals, vecs) = linalg::eigh(self.beta_state.matrix());
        let (da, dbo) = (self.alpha.dim(), self.beta_out.dim());
        let ida = linalg::identity(da);
        let idao = linalg::identity(self.alpha_out.dim());
        let mut kraus = Vec::new();
        for (j, &l) in vals.iter().enumerate() {
            if l <= 0.0 {
                continue;
            }
            let prep = kron(&ida, &(linalg::col(&vecs, j) * c(l.sqrt(), 0.0)));
            let evolved = &self.unitary * prep;
            for k in 0..dbo {
                kraus.push(kron(&idao, &linalg::ket(dbo, k).adjoint()) * &evolved);
            }
        }
        KrausChannel::new(self.alpha.clone(), self.alpha_out.clone(), kraus)
    }

    /// 𝓕_{ρ_β}(X_β).
    pub fn fisher_beta(&self) -> Result<f64> {
        qfi(&self.beta_state, &self.charges.total(self.beta_state.space())?)
    }
}

/// Max-abs gap of U†(X_α′ + X_β′)U − (X_α + X_β).
pub fn check_conservation(imp: &Implementation) -> Result<f64> {
    let before = imp.charges.total(&imp.input_space())?;
    let after = imp.charges.total(&imp.output_space())?;
    let u = &imp.unitary;
    Ok(max_abs_diff(&(u.adjoint() * after.matrix() * u), before.matrix()))
}

/// X_in − N†(X_out).
pub fn y_operator(channel: &KrausChannel, x_in: &Observable, x_out: &Observable) -> Result<Observable> {
    let d = channel.dual(x_out)?;
    let xi = x_in.reorder(channel.in_space())?;
    Observable::new(channel.in_space().clone(), xi.matrix() - d.matrix())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LhsSource {
    /// Exact optimal recovery at each coupling.
    Optimize,
    /// Best canonical recovery, i.e. the LT value (an upper bound on the optimum).
    Canonical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WayConfig {
    pub lhs: LhsSource,
    pub extraction: ExtractionConfig,
}

impl Default for WayConfig {
    fn default() -> Self {
        WayConfig { lhs: LhsSource::Optimize, extraction: ExtractionConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WayTerms {
    pub commutator_expectation: f64,
    pub fisher_cost_upper: f64,
    pub qfi_state: f64,
    pub variance_out: f64,
    /// Spectral spreads of the input and output charges (OTOC bound only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub spread_sum: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    Error,
    Disturbance,
    ErrorYanase,
    Otoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WayReport {
    pub bound: BoundKind,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub passed: bool,
    pub terms: WayTerms,
    pub conservation_deviation: f64,
    pub realization_deviation: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub iep: Option<IepResult>,
}

/// Commutator expectations below this are round-off; the bound is then 0
/// rather than a ratio of two round-off quantities.
pub const NUMERATOR_FLOOR: f64 = 1e-12;

fn ratio(num: f64, den: f64) -> f64 {
    if num <= NUMERATOR_FLOOR {
        0.0
    } else if den > 0.0 {
        num / den
    } else {
        f64::INFINITY
    }
}

/// |⟨[Y, A]⟩_ρ|.
fn commutator_expectation(rho: &DensityMatrix, y: &Observable, a: &Observable) -> Result<f64> {
    let s = rho.space();
    let (y, a) = (y.reorder(s)?, a.reorder(s)?);
    Ok((rho.matrix() * linalg::commutator(y.matrix(), a.matrix())).trace().norm())
}

/// Conservation and realization checks; returns both deviations.
fn validate(imp: &Implementation, target: &KrausChannel) -> Result<(f64, f64)> {
    let cons = check_conservation(imp)?;
    if cons > TOL_CONSERVATION {
        return Err(Error::Conservation(cons));
    }
    let ch = imp.channel()?;
    if !ch.in_space().same_set(target.in_space()) || !ch.out_space().same_set(target.out_space()) {
        return Err(Error::Shape(format!(
            "implementation maps {:?} -> {:?} but the target maps {:?} -> {:?}",
            ch.in_space().names(),
            ch.out_space().names(),
            target.in_space().names(),
            target.out_space().names()
        )));
    }
    let real = target.choi_distance(&ch)?;
    if real > TOL_REALIZATION {
        return Err(Error::Realization(real));
    }
    Ok((cons, real))
}

fn lhs_error(rho: &DensityMatrix, a: &Observable, meas: &Instrument, cfg: &WayConfig) -> Result<(f64, IepResult)> {
    let iep = match cfg.lhs {
        LhsSource::Optimize => comb::extract_epsilon(rho, a, meas, &Recovery::Optimize, &cfg.extraction)?,
        LhsSource::Canonical => {
            let f = oracles::lt_error(rho, a, meas)?.outcome_function();
            let ex = ExtractionConfig { method: ExtractionMethod::Analytic, ..cfg.extraction.clone() };
            comb::extract_epsilon(rho, a, meas, &Recovery::Canonical { observable: comb::pointer_observable(&f.0) }, &ex)?
        }
    };
    Ok((iep.value.max(0.0).sqrt(), iep))
}

fn lhs_disturbance(rho: &DensityMatrix, b: &Observable, meas: &Instrument, cfg: &WayConfig) -> Result<(f64, IepResult)> {
    let iep = match cfg.lhs {
        LhsSource::Optimize => comb::extract_eta(rho, b, meas, &Recovery::Optimize, &cfg.extraction)?,
        LhsSource::Canonical => {
            let x = oracles::lt_disturbance(rho, b, meas)?.minimizer;
            let ex = ExtractionConfig { method: ExtractionMethod::Analytic, ..cfg.extraction.clone() };
            comb::extract_eta(rho, b, meas, &Recovery::Canonical { observable: x }, &ex)?
        }
    };
    Ok((iep.value.max(0.0).sqrt(), iep))
}

fn finish(bound: BoundKind, lhs: f64, rhs: f64, terms: WayTerms, dev: (f64, f64), iep: Option<IepResult>) -> WayReport {
    let slack = lhs - rhs;
    WayReport {
        bound,
        lhs,
        rhs,
        slack,
        passed: slack >= -TOL_SLACK,
        terms,
        conservation_deviation: dev.0,
        realization_deviation: dev.1,
        iep,
    }
}

/// ε ≥ |⟨[Y_S, A]⟩| / (√𝓕_{ρ_β}(X_β) + √𝓕_ρ(X_S) + 2√V_{𝓟(ρ)}(X_P)), with
/// Y_S = X_S − 𝓟†(X_P). The implementation must output the pointer as P.
pub fn way_bound_error(rho: &DensityMatrix, a: &Observable, meas: &Instrument, imp: &Implementation, cfg: &WayConfig) -> Result<WayReport> {
    let target = meas.outcome_channel(POINTER);
    let dev = validate(imp, &target)?;
    let xs = imp.charges.total(meas.in_space())?;
    let xp = imp.charges.total(target.out_space())?;
    let y = y_operator(&target, &xs, &xp)?;
    let rho_s = rho.reorder(meas.in_space())?;
    let terms = WayTerms {
        commutator_expectation: commutator_expectation(&rho_s, &y, a)?,
        fisher_cost_upper: imp.fisher_beta()?,
        qfi_state: qfi(&rho_s, &xs)?,
        variance_out: variance(&target.apply(&rho_s)?, &xp)?,
        spread_sum: None,
    };
    let den = terms.fisher_cost_upper.sqrt() + terms.qfi_state.sqrt() + 2.0 * terms.variance_out.sqrt();
    let rhs = ratio(terms.commutator_expectation, den);
    let (lhs, iep) = lhs_error(rho, a, meas, cfg)?;
    Ok(finish(BoundKind::Error, lhs, rhs, terms, dev, Some(iep)))
}

/// η ≥ |⟨[Y′_S, B]⟩| / (√𝓕_{ρ_β}(X_β) + √𝓕_ρ(X_S) + 2√V_{𝓘(ρ)}(X_S′)), with
/// Y′_S = X_S − 𝓘†(X_S′).
pub fn way_bound_disturbance(rho: &DensityMatrix, b: &Observable, meas: &Instrument, imp: &Implementation, cfg: &WayConfig) -> Result<WayReport> {
    let target = meas.channel();
    let dev = validate(imp, &target)?;
    let xs = imp.charges.total(meas.in_space())?;
    let xo = imp.charges.total(meas.out_space())?;
    let y = y_operator(&target, &xs, &xo)?;
    let rho_s = rho.reorder(meas.in_space())?;
    let terms = WayTerms {
        commutator_expectation: commutator_expectation(&rho_s, &y, b)?,
        fisher_cost_upper: imp.fisher_beta()?,
        qfi_state: qfi(&rho_s, &xs)?,
        variance_out: variance(&target.apply(&rho_s)?, &xo)?,
        spread_sum: None,
    };
    let den = terms.fisher_cost_upper.sqrt() + terms.qfi_state.sqrt() + 2.0 * terms.variance_out.sqrt();
    let rhs = ratio(terms.commutator_expectation, den);
    let (lhs, iep) = lhs_disturbance(rho, b, meas, cfg)?;
    Ok(finish(BoundKind::Disturbance, lhs, rhs, terms, dev, Some(iep)))
}

/// ε ≥ |⟨[X_S, A]⟩| / √(𝓕_{ρ_β}(X_β) + 𝓕_ρ(X_S)) when the pointer charge is
/// diagonal in the outcome basis.
pub fn way_bound_error_yanase(rho: &DensityMatrix, a: &Observable, meas: &Instrument, imp: &Implementation, cfg: &WayConfig) -> Result<WayReport> {
    let target = meas.outcome_channel(POINTER);
    let dev = validate(imp, &target)?;
    let xp = imp.charges.total(target.out_space())?;
    let m = xp.matrix();
    let off = (0..m.nrows())
        .flat_map(|r| (0..m.ncols()).map(move |k| (r, k)))
        .filter(|(r, k)| r != k)
        .map(|(r, k)| m[(r, k)].norm())
        .fold(0.0, f64::max);
    if off > TOL_CONSERVATION {
        return Err(Error::YanaseCondition(off));
    }
    let xs = imp.charges.total(meas.in_space())?;
    let rho_s = rho.reorder(meas.in_space())?;
    let terms = WayTerms {
        commutator_expectation: commutator_expectation(&rho_s, &xs, a)?,
        fisher_cost_upper: imp.fisher_beta()?,
        qfi_state: qfi(&rho_s, &xs)?,
        variance_out: variance(&target.apply(&rho_s)?, &xp)?,
        spread_sum: None,
    };
    let rhs = ratio(terms.commutator_expectation, (terms.fisher_cost_upper + terms.qfi_state).sqrt());
    let (lhs, iep) = lhs_error(rho, a, meas, cfg)?;
    Ok(finish(BoundKind::ErrorYanase, lhs, rhs, terms, dev, Some(iep)))
}

/// OTOC variant: √C ≥ |⟨[Y″, V]⟩| / (√𝓕_{ρ_β}(X_β) + spread(X_S) + spread(X_S′)).
pub(crate) fn way_bound_unitary(
    rho: &DensityMatrix,
    v: &Observable,
    target: &KrausChannel,
    imp: &Implementation,
    lhs: f64,
) -> Result<WayReport> {
    let dev = validate(imp, target)?;
    let xs = imp.charges.total(target.in_space())?;
    let xo = imp.charges.total(target.out_space())?;
    let y = y_operator(target, &xs, &xo)?;
    let rho_s = rho.reorder(target.in_space())?;
    let spread = xs.spread() + xo.spread();
    let terms = WayTerms {
        commutator_expectation: commutator_expectation(&rho_s, &y, v)?,
        fisher_cost_upper: imp.fisher_beta()?,
        qfi_state: qfi(&rho_s, &xs)?,
        variance_out: variance(&target.apply(&rho_s)?, &xo)?,
        spread_sum: Some(spread),
    };
    let rhs = ratio(terms.commutator_expectation, terms.fisher_cost_upper.sqrt() + spread);
    Ok(finish(BoundKind::Otoc, lhs, rhs, terms, dev, None))
}

/// State of the probe before it couples to the system.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbeState {
    /// Charge eigenstate |k⟩: no coherence in the probe charge.
    Eigenstate(usize),
    /// Arbitrary density matrix on the probe.
    Density(CMat),
}

/// A measurement together with conserving implementations of its outcome
/// channel and of its measuring process.
#[derive(Debug, Clone)]
pub struct MeasurementModel {
    pub instrument: Instrument,
    pub error_impl: Implementation,
    pub disturbance_impl: Implementation,
    pub system_charge: Observable,
}

/// Probe-based measurement: U couples system S to probe E, then E is read in
/// its computational basis. The outcome register P is E after a CNOT-style
/// copy into a fresh register F (charge zero), which makes P classical.
/// `coupling` should conserve X_S ⊗ I + I ⊗ diag(probe_charge).
pub fn pointer_measurement(system_charge: &Observable, probe_charge: &[f64], coupling: &CMat, probe: ProbeState) -> Result<MeasurementModel> {
    if system_charge.space().len() != 1 {
        return Err(Error::CompositeSpace("the measured system must be a single label".into()));
    }
    let s_label = &system_charge.space().labels()[0];
    let (ds, de) = (s_label.dim, probe_charge.len());
    if coupling.nrows() != ds * de || coupling.ncols() != ds * de {
        return Err(Error::Shape("coupling unitary does not match system ⊗ probe".into()));
    }
    let s = Space::single(&s_label.name, ds);
    let s_out = Space::single(&format!("{}'", s_label.name), ds);
    let e = Space::single("E", de);
    let rho_e = match probe {
        ProbeState::Eigenstate(k) => DensityMatrix::basis(e.clone(), k)?,
        ProbeState::Density(m) => DensityMatrix::new(e.clone(), m)?,
    };

    // instrument Kraus ⟨m|_E U (I ⊗ √λ_j|j⟩_E)
    let (vals, vecs) = linalg::eigh(rho_e.matrix());
    let ids = linalg::identity(ds);
    let mut branches = Vec::new();
    for m in 0..de {
        for (j, &l) in vals.iter().enumerate() {
            if l <= 1e-15 {
                continue;
            }
            let k = kron(&ids, &linalg::ket(de, m).adjoint()) * coupling * kron(&ids, &(linalg::col(&vecs, j) * c(l.sqrt(), 0.0)));
            branches.push(InstrumentBranch { outcome: m, kraus: k });
        }
    }
    let instrument = Instrument::new(s.clone(), s_out.clone(), branches)?;

    let xe = Observable::diagonal(e.clone(), probe_charge)?;
    let mut charges = ChargeAssignment::default();
    charges.insert(system_charge.relabel(s.clone())?)?;
    charges.insert(system_charge.relabel(s_out.clone())?)?;
    charges.insert(xe.clone())?;
    charges.insert(xe.relabel(Space::single("E'", de))?)?;
    charges.insert(xe.relabel(Space::single(POINTER, de))?)?;

    let disturbance_impl = Implementation::new(
        s.clone(),
        rho_e.clone(),
        coupling.clone(),
        s_out.clone(),
        Space::single("E'", de),
        charges.clone(),
    )?;

    // copy E into F: |m⟩|f⟩ ↦ |m⟩|f + m mod de⟩
    let copy = CMat::from_fn(de * de, de * de, |r, k| {
        let (m, f) = (k / de, k % de);
        if r == m * de + (f + m) % de {
            c(1.0, 0.0)
        } else {
            c(0.0, 0.0)
        }
    });
    let full = kron(&ids, &copy) * kron(coupling, &linalg::identity(de));
    let f_space = Space::single("F", de);
    let produced = Space::new(vec![s_out.labels()[0].clone(), e.labels()[0].clone().rename(POINTER), f_space.labels()[0].clone().rename("F'")])?;
    let alpha_out = Space::single(POINTER, de);
    let beta_out = Space::new(vec![s_out.labels()[0].clone(), f_space.labels()[0].clone().rename("F'")])?;
    let order = alpha_out.concat(&beta_out)?;
    let in_space = s.concat(&e)?.concat(&f_space)?;
    let u = permute_matrix(&full, &produced, &order, &in_space, &in_space)?;
    let beta_state = rho_e.tensor(&DensityMatrix::basis(f_space, 0)?)?;
    let error_impl = Implementation::new(s.clone(), beta_state, u, alpha_out, beta_out, charges)?;

    Ok(MeasurementModel { instrument, error_impl, disturbance_impl, system_charge: system_charge.relabel(s)? })
}

impl crate::qcore::HilbertLabel {
    fn rename(self, name: &str) -> Self {
        crate::qcore::HilbertLabel::new(name, self.dim)
    }
}

/// Unitary on system ⊗ probe that is block diagonal in the eigenspaces of the
/// diagonal total charge diag(xs) ⊗ I + I ⊗ diag(xe), Haar random per block.
pub fn random_conserving_unitary<R: Rng>(rng: &mut R, xs: &[f64], xe: &[f64]) -> CMat {
    let (ds, de) = (xs.len(), xe.len());
    let total: Vec<f64> = (0..ds * de).map(|i| xs[i / de] + xe[i % de]).collect();
    let mut u = linalg::zeros(ds * de, ds * de);
    let mut seen = vec![false; ds * de];
    for i in 0..ds * de {
        if seen[i] {
            continue;
        }
        let block: Vec<usize> = (0..ds * de).filter(|&j| (total[j] - total[i]).abs() < 1e-12).collect();
        for &j in &block {
            seen[j] = true;
        }
        let w = random::unitary(rng, block.len());
        for (a, &r) in block.iter().enumerate() {
            for (b, &k) in block.iter().enumerate() {
                u[(r, k)] = w[(a, b)];
            }
        }
    }
    u
}

/// Random probe measurement with integer charges, rotated by a random local
/// unitary on the system so that neither the charge nor the measurement is
/// diagonal in the computational basis.
pub fn random_measurement_model<R: Rng>(rng: &mut R, ds: usize, de: usize, coherent: bool) -> Result<MeasurementModel> {
    let xs: Vec<f64> = (0..ds).map(|_| rng.random_range(0..3) as f64).collect();
    let xe: Vec<f64> = (0..de).map(|_| rng.random_range(0..3) as f64).collect();
    let block = random_conserving_unitary(rng, &xs, &xe);
    let w = random::unitary(rng, ds);
    let wl = kron(&w, &linalg::identity(de));
    let coupling = &wl * block * wl.adjoint();
    let s = Space::single("S", ds);
    let xs_diag = Observable::diagonal(s.clone(), &xs)?;
    let system_charge = Observable::new(s, &w * xs_diag.matrix() * w.adjoint())?;
    let probe = if coherent {
        let rank = rng.random_range(1..=de);
        ProbeState::Density(random::density(rng, de, rank))
    } else {
        ProbeState::Eigenstate(rng.random_range(0..de))
    };
    pointer_measurement(&system_charge, &xe, &coupling, probe)
}

/// Conserving implementation of ρ ↦ WρW† on a labeled system: U = W ⊗ U_β with
/// output charges X_S′ = W(X_S + shift)W† and X_β′ = U_β(X_β − shift)U_β†.
pub fn unitary_implementation(
    w: &CMat,
    system_charge: &Observable,
    shift: f64,
    probe_unitary: &CMat,
    probe_charge: &Observable,
    probe_state: DensityMatrix,
    out_space: &Space,
) -> Result<Implementation> {
    let s = system_charge.space().clone();
    let b = probe_charge.space().clone();
    if probe_state.space() != &b || s.len() != 1 || b.len() != 1 || out_space.len() != 1 {
        return Err(Error::CompositeSpace("unitary implementation expects single-label system, output and probe".into()));
    }
    let ds = s.dim();
    let db = b.dim();
    let b_out = Space::single(&format!("{}'", b.labels()[0].name), db);
    let xs_out = Observable::new(out_space.clone(), w * (system_charge.matrix() + linalg::identity(ds) * c(shift, 0.0)) * w.adjoint())?;
    let xb_out = Observable::new(b_out.clone(), probe_unitary * (probe_charge.matrix() - linalg::identity(db) * c(shift, 0.0)) * probe_unitary.adjoint())?;
    let mut charges = ChargeAssignment::default();
    charges.insert(system_charge.clone())?;
    charges.insert(probe_charge.clone())?;
    charges.insert(xs_out)?;
    charges.insert(xb_out)?;
    Implementation::new(s, probe_state, kron(w, probe_unitary), out_space.clone(), b_out, charges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::linalg::{pauli_x, pauli_z};

    #[test]
    fn swap_is_conserving_and_measures_z() {
        let s = Space::single("S", 2);
        let z = Observable::new(s.clone(), pauli_z()).unwrap();
        let swap = linalg::real_matrix(4, 4, &[1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0., 0., 0., 0., 0., 1.]);
        let model = pointer_measurement(&z, &[1.0, -1.0], &swap, ProbeState::Eigenstate(0)).unwrap();
        assert!(check_conservation(&model.error_impl).unwrap() < 1e-12);
        assert!(check_conservation(&model.disturbance_impl).unwrap() < 1e-12);
        let zmeas = Instrument::computational(s, "S'").unwrap();
        let d = zmeas.outcome_channel(POINTER).choi_distance(&model.instrument.outcome_channel(POINTER)).unwrap();
        assert!(d < 1e-12);
    }

    #[test]
    fn non_conserving_flagged() {
        let s = Space::single("S", 2);
        let z = Observable::new(s, pauli_z()).unwrap();
        let cnot = linalg::real_matrix(4, 4, &[1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0.]);
        let model = pointer_measurement(&z, &[1.0, -1.0], &cnot, ProbeState::Eigenstate(0)).unwrap();
        assert!(check_conservation(&model.error_impl).unwrap() > 0.5);
        let rho = DensityMatrix::basis(Space::single("S", 2), 0).unwrap();
        let x = Observable::new(Space::single("S", 2), pauli_x()).unwrap();
        let r = way_bound_error(&rho, &x, &model.instrument, &model.error_impl, &WayConfig::default());
        assert!(matches!(r, Err(Error::Conservation(_))));
    }

    #[test]
    fn y_vanishes_for_covariant_unitary() {
        let s = Space::single("S", 2);
        let z = Observable::new(s.clone(), pauli_z()).unwrap();
        let ch = KrausChannel::new(s.clone(), Space::single("S'", 2), vec![pauli_x()]).unwrap();
        let zo = Observable::new(Space::single("S'", 2), pauli_x() * pauli_z() * pauli_x()).unwrap();
        let y = y_operator(&ch, &z, &zo).unwrap();
        assert!(linalg::max_abs(y.matrix()) < 1e-15);
    }
}
