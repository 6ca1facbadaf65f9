//! Ancilla protocols turning measurement error and disturbance into the
//! irreversibility of a probe qubit, and the small-coupling extraction.
//!
//! A qubit Q prepared in |±⟩ couples to the system through e^{−iθ X⊗σ_z}; the
//! system is then measured. The squared irreversibility of Q behaves as c₂θ²
//! for small θ and c₂ is the error (outcome register kept) or the disturbance
//! (post-measurement system kept).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::irrev::{self, delta_min, delta_sq_with_recovery, discrimination_recovery, OptimizerConfig, RecoveryChannel};
use crate::qcore::linalg::{self, c, expm_i, kron, pauli_z, CMat};
use crate::qcore::{DensityMatrix, Instrument, KrausChannel, Observable, Space, TestEnsemble};

pub const ANCILLA: &str = "Q";
pub const POINTER: &str = "P";

/// Relative residuals are taken against max(|δ²|, this floor); below it δ² is
/// round-off rather than signal.
pub const RESIDUAL_FLOOR: f64 = 1e-8;

pub const DEFAULT_GRID: [f64; 4] = [1e-2, 5e-3, 2.5e-3, 1.25e-3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Error,
    Disturbance,
}

#[derive(Debug, Clone)]
pub struct LossProcess {
    pub kind: LossKind,
    pub rho: DensityMatrix,
    pub generator: Observable,
    pub theta: f64,
    pub meas: Instrument,
    pub two_copy: bool,
    /// Q → Q+P (error) or Q → Q+S' (disturbance).
    pub channel: KrausChannel,
}

fn ancilla() -> Space {
    Space::single(ANCILLA, 2)
}

/// Kraus operators of the measurement stage: the outcome channel onto P or the
/// measuring process onto S'. The bool marks sub-normalized stages.
fn stage(meas: &Instrument, kind: LossKind) -> KrausChannel {
    match kind {
        LossKind::Error => meas.outcome_channel(POINTER),
        LossKind::Disturbance => meas.channel(),
    }
}

fn check_inputs(rho: &DensityMatrix, generator: &Observable, stage_in: &Space) -> Result<(DensityMatrix, Observable)> {
    if !rho.space().same_set(stage_in) {
        return Err(Error::Shape(format!(
            "state on {:?} but the measurement acts on {:?}",
            rho.space().names(),
            stage_in.names()
        )));
    }
    if !generator.space().same_set(stage_in) {
        return Err(Error::Shape(format!(
            "coupling observable on {:?} but the measurement acts on {:?}",
            generator.space().names(),
            stage_in.names()
        )));
    }
    if stage_in.contains(ANCILLA) {
        return Err(Error::CompositeSpace(format!("label {ANCILLA} is reserved for the probe qubit")));
    }
    Ok((rho.reorder(stage_in)?, generator.reorder(stage_in)?))
}

/// e^{−iθ σ_z⊗X} on [Q, system].
fn coupling(x: &CMat, theta: f64) -> CMat {
    expm_i(&kron(&pauli_z(), x), theta)
}

/// Loss channel Kraus operators (I_Q ⊗ E) e^{−iθσ_z⊗G}(I_Q ⊗ √λ_i|i⟩) for every
/// stage operator E and eigenpair of ρ.
fn loss_kraus(rho: &CMat, g: &CMat, theta: f64, stage_ops: &[CMat]) -> Vec<CMat> {
    let (vals, vecs) = linalg::eigh(rho);
    let u = coupling(g, theta);
    let id2 = linalg::identity(2);
    let mut out = Vec::new();
    for (i, &l) in vals.iter().enumerate() {
        if l <= 0.0 {
            continue;
        }
        let w = &u * kron(&id2, &(linalg::col(&vecs, i) * c(l.sqrt(), 0.0)));
        for e in stage_ops {
            out.push(kron(&id2, e) * &w);
        }
    }
    out
}

/// Shared builder: the measurement stage may be sub-normalized (OTOC branches).
pub(crate) fn build_loss_with_stage(rho: &DensityMatrix, generator: &Observable, theta: f64, stage_ch: &KrausChannel) -> Result<KrausChannel> {
    let (rho, g) = check_inputs(rho, generator, stage_ch.in_space())?;
    let out = ancilla().concat(stage_ch.out_space())?;
    let kraus = loss_kraus(rho.matrix(), g.matrix(), theta, stage_ch.kraus());
    if stage_ch.is_trace_preserving() {
        KrausChannel::new(ancilla(), out, kraus)
    } else {
        KrausChannel::new_cp_unbounded(ancilla(), out, kraus)
    }
}

fn build(rho: &DensityMatrix, generator: &Observable, theta: f64, meas: &Instrument, kind: LossKind) -> Result<LossProcess> {
    let channel = build_loss_with_stage(rho, generator, theta, &stage(meas, kind))?;
    Ok(LossProcess {
        kind,
        rho: rho.clone(),
        generator: generator.clone(),
        theta,
        meas: meas.clone(),
        two_copy: false,
        channel,
    })
}

/// 𝓟_𝓜 ∘ 𝓤_{A,θ} ∘ 𝓐_ρ from Q to Q+P.
pub fn build_loss_error(rho: &DensityMatrix, a: &Observable, theta: f64, meas: &Instrument) -> Result<LossProcess> {
    build(rho, a, theta, meas, LossKind::Error)
}

/// 𝓘_𝓜 ∘ 𝓤_{B,θ} ∘ 𝓐_ρ from Q to Q+S'.
pub fn build_loss_disturbance(rho: &DensityMatrix, b: &Observable, theta: f64, meas: &Instrument) -> Result<LossProcess> {
    build(rho, b, theta, meas, LossKind::Disturbance)
}

/// Two copies of ρ are appended; the coupling acts on the first copy, which is
/// then discarded, and the measurement acts on the second.
pub fn build_loss_two_copy(rho: &DensityMatrix, generator: &Observable, theta: f64, meas: &Instrument, kind: LossKind) -> Result<LossProcess> {
    let st = stage(meas, kind);
    let (r, g) = check_inputs(rho, generator, st.in_space())?;
    let out = ancilla().concat(st.out_space())?;
    let (vals, vecs) = linalg::eigh(r.matrix());
    let u = coupling(g.matrix(), theta);
    let ds = vals.len();
    let id2 = linalg::identity(2);
    let mut kraus = Vec::new();
    for (i, &li) in vals.iter().enumerate() {
        if li <= 0.0 {
            continue;
        }
        let w = &u * kron(&id2, &(linalg::col(&vecs, i) * c(li.sqrt(), 0.0)));
        for k in 0..ds {
            let a = kron(&id2, &linalg::ket(ds, k).adjoint()) * &w;
            for (j, &lj) in vals.iter().enumerate() {
                if lj <= 0.0 {
                    continue;
                }
                let vj = linalg::col(&vecs, j) * c(lj.sqrt(), 0.0);
                for e in st.kraus() {
                    kraus.push(kron(&a, &(e * &vj)));
                }
            }
        }
    }
    let channel = KrausChannel::new(ancilla(), out, kraus)?;
    Ok(LossProcess { kind, rho: rho.clone(), generator: generator.clone(), theta, meas: meas.clone(), two_copy: true, channel })
}

#[derive(Debug, Clone)]
pub struct CanonicalRecovery {
    pub x: Observable,
    pub theta: f64,
    /// Q+target → Q: trace out the target after 𝓤†_{X,θ}, then dephase Q in {|+⟩,|−⟩}.
    pub channel: RecoveryChannel,
}

impl CanonicalRecovery {
    pub fn target(&self) -> &Space {
        self.x.space()
    }
}

/// 𝓙_• ∘ 𝓤†_{X,θ} with X on the pointer P or on the post-measurement system.
pub fn canonical_recovery(x: &Observable, theta: f64) -> Result<CanonicalRecovery> {
    let target = x.space().clone();
    let input = ancilla().concat(&target)?;
    let udag = expm_i(&kron(&pauli_z(), x.matrix()), -theta);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let plus = linalg::column(&[s, s]);
    let minus = linalg::column(&[s, -s]);
    let dt = target.dim();
    let mut kraus = Vec::with_capacity(2 * dt);
    for j in [&plus, &minus] {
        let pj = linalg::projector(j);
        for t in 0..dt {
            kraus.push(kron(&pj, &linalg::ket(dt, t).adjoint()) * &udag);
        }
    }
    let channel = KrausChannel::new(input, ancilla(), kraus)?;
    Ok(CanonicalRecovery { x: x.clone(), theta, channel })
}

/// Diagonal pointer observable Σ f(m)|m⟩⟨m|_P.
pub fn pointer_observable(f: &[f64]) -> Observable {
    Observable::diagonal(Space::single(POINTER, f.len()), f).expect("diagonal matches its own length")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Recovery {
    /// R_{X,•} with X on P (error) or S' (disturbance).
    Canonical { observable: Observable },
    /// A fixed channel, the same at every θ.
    Explicit { channel: KrausChannel },
    /// Optimized over all recoveries at each θ.
    Optimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtractionMethod {
    Extrapolated,
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizeSolver {
    /// Minimum-error discrimination of the two probe outputs (exact for |±⟩).
    Exact,
    /// Stinespring gradient ascent.
    Stinespring,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionConfig {
    pub method: ExtractionMethod,
    pub grid: Vec<f64>,
    pub tol: f64,
    pub solver: OptimizeSolver,
    pub optimizer: OptimizerConfig,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            method: ExtractionMethod::Extrapolated,
            grid: DEFAULT_GRID.to_vec(),
            tol: 1e-6,
            solver: OptimizeSolver::Exact,
            optimizer: OptimizerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IepResult {
    pub value: f64,
    pub theta_grid: Vec<(f64, f64)>,
    pub fit_residual: f64,
    pub method: ExtractionMethod,
    /// Fitted θ⁴ coefficient (extrapolated method only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub quartic: Option<f64>,
}

impl IepResult {
    /// A value known in closed form, with no θ grid behind it.
    pub fn analytic(value: f64) -> Self {
        IepResult { value, theta_grid: Vec::new(), fit_residual: 0.0, method: ExtractionMethod::Analytic, quartic: None }
    }
}

/// Squared irreversibility of the probe for one loss channel.
pub fn probe_delta_sq(loss: &KrausChannel, recovery: &Recovery, theta: f64, cfg: &ExtractionConfig) -> Result<f64> {
    let omega = TestEnsemble::plus_minus(ANCILLA);
    match recovery {
        Recovery::Canonical { observable } => delta_sq_with_recovery(loss, &canonical_recovery(observable, theta)?.channel, &omega),
        Recovery::Explicit { channel } => delta_sq_with_recovery(loss, channel, &omega),
        Recovery::Optimize => match cfg.solver {
            OptimizeSolver::Exact => {
                let (_, v) = discrimination_recovery(loss, &omega)?.expect("the probe ensemble is two orthogonal pure states");
                Ok(v)
            }
            OptimizeSolver::Stinespring => Ok(delta_min(loss, &omega, &cfg.optimizer)?.delta_sq()),
        },
    }
}

/// Least-squares fit of δ²/θ² = c₂ + c₄θ²; returns (c₂, c₄, max relative residual).
pub fn fit_even(points: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    let fail = |reason: &str| Error::Extraction { reason: reason.into(), residual: f64::NAN, tol: f64::NAN, theta_grid: points.to_vec() };
    if points.iter().any(|(t, _)| *t == 0.0 || !t.is_finite()) {
        return Err(fail("grid contains a zero or non-finite coupling"));
    }
    let xs: Vec<f64> = points.iter().map(|(t, _)| t * t).collect();
    let zs: Vec<f64> = points.iter().map(|(t, d)| d / (t * t)).collect();
    let n = xs.len() as f64;
    let (c2, c4) = if points.len() == 1 {
        (zs[0], 0.0)
    } else {
        let mx = xs.iter().sum::<f64>() / n;
        let mz = zs.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        if sxx <= 0.0 {
            return Err(fail("grid needs at least two distinct |θ| values"));
        }
        let sxz: f64 = xs.iter().zip(&zs).map(|(x, z)| (x - mx) * (z - mz)).sum();
        let c4 = sxz / sxx;
        (mz - c4 * mx, c4)
    };
    let residual = points
        .iter()
        .map(|&(t, d)| {
            let t2 = t * t;
            (c2 * t2 + c4 * t2 * t2 - d).abs() / d.abs().max(RESIDUAL_FLOOR)
        })
        .fold(0.0, f64::max);
    Ok((c2, c4, residual))
}

/// Closed-form c₂ for canonical recoveries. `ops` are the Kraus operators of
/// the measurement stage acting on the system (several per outcome allowed),
/// each with its outcome index.
fn analytic_c2(kind: LossKind, sqrt_rho: &CMat, g: &CMat, ops: &[(usize, CMat)], x: &Observable) -> Result<f64> {
    match kind {
        LossKind::Error => {
            let xm = x.matrix();
            let off = (0..xm.nrows())
                .flat_map(|r| (0..xm.ncols()).map(move |k| (r, k)))
                .filter(|(r, k)| r != k)
                .map(|(r, k)| xm[(r, k)].norm())
                .fold(0.0, f64::max);
            if off > 1e-12 {
                return Err(Error::Extraction {
                    reason: "analytic extraction needs a pointer observable diagonal in the outcome basis".into(),
                    residual: off,
                    tol: 1e-12,
                    theta_grid: Vec::new(),
                });
            }
            let d = g.nrows();
            Ok(ops
                .iter()
                .map(|(m, k)| {
                    let shifted = g - linalg::identity(d) * xm[(*m, *m)];
                    linalg::hs_norm_sq(&(k * shifted * sqrt_rho))
                })
                .sum())
        }
        LossKind::Disturbance => Ok(ops.iter().map(|(_, k)| linalg::hs_norm_sq(&((x.matrix() * k - k * g) * sqrt_rho))).sum()),
    }
}

fn extract_generic(
    build_at: impl Fn(f64) -> Result<KrausChannel> + Sync,
    recovery: &Recovery,
    cfg: &ExtractionConfig,
    analytic: impl FnOnce(&Observable) -> Result<f64>,
) -> Result<IepResult> {
    if cfg.method == ExtractionMethod::Analytic {
        let Recovery::Canonical { observable } = recovery else {
            return Err(Error::Extraction {
                reason: "analytic extraction applies to canonical recoveries only".into(),
                residual: f64::NAN,
                tol: cfg.tol,
                theta_grid: Vec::new(),
            });
        };
        let value = analytic(observable)?;
        return Ok(IepResult::analytic(value));
    }
    if cfg.grid.is_empty() {
        return Err(Error::Extraction { reason: "empty θ grid".into(), residual: f64::NAN, tol: cfg.tol, theta_grid: Vec::new() });
    }
    let grid: Vec<(f64, f64)> = cfg
        .grid
        .par_iter()
        .map(|&t| Ok((t, probe_delta_sq(&build_at(t)?, recovery, t, cfg)?)))
        .collect::<Result<Vec<_>>>()?;
    let (c2, c4, residual) = fit_even(&grid)?;
    if !(residual <= cfg.tol) {
        return Err(Error::Extraction { reason: "quadratic fit does not describe δ²(θ)".into(), residual, tol: cfg.tol, theta_grid: grid });
    }
    if c2 < -1e-9 {
        return Err(Error::Extraction { reason: format!("negative extracted value {c2:e}"), residual, tol: cfg.tol, theta_grid: grid });
    }
    Ok(IepResult { value: c2, theta_grid: grid, fit_residual: residual, method: ExtractionMethod::Extrapolated, quartic: Some(c4) })
}

fn stage_ops(meas: &Instrument) -> Vec<(usize, CMat)> {
    meas.branches().iter().map(|b| (b.outcome, b.kraus.clone())).collect()
}

fn extract(rho: &DensityMatrix, g: &Observable, meas: &Instrument, recovery: &Recovery, cfg: &ExtractionConfig, kind: LossKind) -> Result<IepResult> {
    let st = stage(meas, kind);
    let (r, gg) = check_inputs(rho, g, st.in_space())?;
    extract_generic(
        |t| build_loss_with_stage(&r, &gg, t, &st),
        recovery,
        cfg,
        |x| analytic_c2(kind, &linalg::sqrt_psd(r.matrix()), gg.matrix(), &stage_ops(meas), x),
    )
}

/// ε² = lim δ²/θ² for the error protocol.
pub fn extract_epsilon(rho: &DensityMatrix, a: &Observable, meas: &Instrument, recovery: &Recovery, cfg: &ExtractionConfig) -> Result<IepResult> {
    extract(rho, a, meas, recovery, cfg, LossKind::Error)
}

/// η² = lim δ²/θ² for the disturbance protocol.
pub fn extract_eta(rho: &DensityMatrix, b: &Observable, meas: &Instrument, recovery: &Recovery, cfg: &ExtractionConfig) -> Result<IepResult> {
    extract(rho, b, meas, recovery, cfg, LossKind::Disturbance)
}

/// Extraction for the two-copy protocol.
pub fn extract_two_copy(rho: &DensityMatrix, g: &Observable, meas: &Instrument, kind: LossKind, recovery: &Recovery, cfg: &ExtractionConfig) -> Result<IepResult> {
    let st = stage(meas, kind);
    let (r, gg) = check_inputs(rho, g, st.in_space())?;
    let analytic = |x: &Observable| {
        // the same closed form on the doubled system, with the first copy
        // absorbed into the measurement as a trace
        let d = r.dim();
        let sq = linalg::sqrt_psd(r.matrix());
        let sqrt_rho = kron(&sq, &sq);
        let g2 = kron(gg.matrix(), &linalg::identity(d));
        let mut ops = Vec::new();
        for (m, k) in stage_ops(meas) {
            for j in 0..d {
                ops.push((m, kron(&linalg::ket(d, j).adjoint(), &k)));
            }
        }
        analytic_c2(kind, &sqrt_rho, &g2, &ops, x)
    };
    extract_generic(|t| Ok(build_loss_two_copy(&r, &gg, t, meas, kind)?.channel), recovery, cfg, analytic)
}

/// Sub-normalized variant used for non-unitary OTOC branches: δ per θ uses the
/// renormalized branch output.
pub(crate) fn extract_cp(
    rho: &DensityMatrix,
    g: &Observable,
    stage_ch: &KrausChannel,
    recovery_x: &Observable,
    cfg: &ExtractionConfig,
) -> Result<(IepResult, Vec<f64>)> {
    if cfg.grid.is_empty() {
        return Err(Error::Extraction { reason: "empty θ grid".into(), residual: f64::NAN, tol: cfg.tol, theta_grid: Vec::new() });
    }
    let omega = TestEnsemble::plus_minus(ANCILLA);
    let rows: Vec<(f64, f64, Vec<f64>)> = cfg
        .grid
        .par_iter()
        .map(|&t| {
            let loss = build_loss_with_stage(rho, g, t, stage_ch)?;
            let rep = irrev::delta_cp(&loss, &omega, &canonical_recovery(recovery_x, t)?.channel)?;
            Ok((t, rep.delta_sq(), rep.branch_probabilities.unwrap_or_default()))
        })
        .collect::<Result<Vec<_>>>()?;
    let grid: Vec<(f64, f64)> = rows.iter().map(|(t, d, _)| (*t, *d)).collect();
    let qs: Vec<f64> = rows.into_iter().flat_map(|(_, _, q)| q).collect();
    let (c2, c4, residual) = fit_even(&grid)?;
    if !(residual <= cfg.tol) {
        return Err(Error::Extraction { reason: "quadratic fit does not describe δ²(θ)".into(), residual, tol: cfg.tol, theta_grid: grid });
    }
    Ok((IepResult { value: c2, theta_grid: grid, fit_residual: residual, method: ExtractionMethod::Extrapolated, quartic: Some(c4) }, qs))
}
