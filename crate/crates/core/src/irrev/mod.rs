//! How well a process can be undone: irreversibility for a fixed recovery,
//! minimized over recoveries, the Petz baseline and the sub-normalized variant.

mod optimizer;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::linalg::{self, c, eigh, inv_sqrt_psd, sqrt_psd, CMat};
use crate::qcore::{infidelity_sq, DensityMatrix, KrausChannel, Space, TestEnsemble};

pub use optimizer::{delta_min, OptimizerConfig};

/// A channel from a process's output space back to its input space.
pub type RecoveryChannel = KrausChannel;

/// Branch probabilities at or below this make the renormalized output undefined.
pub const TOL_PROB: f64 = 1e-12;
/// Eigenvalues at or below this are treated as zero when pseudo-inverting.
pub const TOL_PINV: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub delta: f64,
    pub per_state: Vec<(usize, f64)>,
    pub recovery_used: RecoveryChannel,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub optimizer_trace: Option<Vec<(usize, f64)>>,
    /// Set by the optimizer: the result is a local optimum with no global certificate.
    #[serde(default)]
    pub local_optimum_only: bool,
    #[serde(default)]
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub start: Option<String>,
    /// Irreversibility under the Petz recovery, reported next to optimized values.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub petz_delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub branch_probabilities: Option<Vec<f64>>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl DeltaReport {
    fn plain(per_state_sq: &[f64], weights: &[f64], recovery: RecoveryChannel) -> Self {
        let delta_sq: f64 = per_state_sq.iter().zip(weights).map(|(d, p)| d * p).sum();
        DeltaReport {
            delta: delta_sq.max(0.0).sqrt(),
            per_state: per_state_sq.iter().enumerate().map(|(k, d)| (k, d.sqrt())).collect(),
            recovery_used: recovery,
            optimizer_trace: None,
            local_optimum_only: false,
            converged: true,
            start: None,
            petz_delta: None,
            branch_probabilities: None,
            warnings: Vec::new(),
        }
    }

    pub fn delta_sq(&self) -> f64 {
        self.delta * self.delta
    }
}

fn check_spaces(l: &KrausChannel, r: &RecoveryChannel, omega: &TestEnsemble) -> Result<()> {
    if !omega.space().same_set(l.in_space()) {
        return Err(Error::Shape(format!(
            "test states on {:?} but the process acts on {:?}",
            omega.space().names(),
            l.in_space().names()
        )));
    }
    if !r.in_space().same_set(l.out_space()) || !r.out_space().same_set(l.in_space()) {
        return Err(Error::Shape(format!(
            "recovery maps {:?} -> {:?}, expected {:?} -> {:?}",
            r.in_space().names(),
            r.out_space().names(),
            l.out_space().names(),
            l.in_space().names()
        )));
    }
    Ok(())
}

/// Per-state 1 − F² for a fixed recovery, in ensemble order.
pub fn per_state_infidelity(l: &KrausChannel, r: &RecoveryChannel, omega: &TestEnsemble) -> Result<Vec<f64>> {
    check_spaces(l, r, omega)?;
    omega
        .entries()
        .iter()
        .map(|(_, rho)| {
            let sigma = r.apply(&l.apply(rho)?)?;
            infidelity_sq(rho, &sigma)
        })
        .collect()
}

/// Σ p_k D_F(ρ_k, R∘L(ρ_k))².
pub fn delta_sq_with_recovery(l: &KrausChannel, r: &RecoveryChannel, omega: &TestEnsemble) -> Result<f64> {
    let d = per_state_infidelity(l, r, omega)?;
    Ok(omega.entries().iter().zip(&d).map(|((p, _), d)| p * d).sum())
}

pub fn delta_with_recovery(l: &KrausChannel, r: &RecoveryChannel, omega: &TestEnsemble) -> Result<DeltaReport> {
    let d = per_state_infidelity(l, r, omega)?;
    let w: Vec<f64> = omega.entries().iter().map(|(p, _)| *p).collect();
    Ok(DeltaReport::plain(&d, &w, r.clone()))
}

/// Petz map X ↦ σ^{1/2} L†(L(σ)^{−1/2} X L(σ)^{−1/2}) σ^{1/2}, completed to a
/// trace-preserving map by preparing σ on the kernel of L(σ).
pub fn petz_recovery(l: &KrausChannel, sigma_ref: &DensityMatrix) -> Result<RecoveryChannel> {
    if !sigma_ref.space().same_set(l.in_space()) {
        return Err(Error::Shape("reference state is not on the process input space".into()));
    }
    let sigma = sigma_ref.reorder(l.in_space())?;
    let (svals, svecs) = sigma.clipped_spectrum()?;
    let sq = sqrt_psd(sigma.matrix());
    let out = l.apply(&sigma)?;
    let lsig = out.matrix();
    let inv = inv_sqrt_psd(lsig, TOL_PINV);
    let mut kraus: Vec<CMat> = l.kraus().iter().map(|k| &sq * k.adjoint() * &inv).collect();
    let (ovals, ovecs) = eigh(lsig);
    let dout = lsig.nrows();
    for j in 0..dout {
        if ovals[j] > TOL_PINV {
            continue;
        }
        let u = ovecs.column(j).into_owned();
        for (idx, &lam) in svals.iter().enumerate() {
            if lam > 0.0 {
                kraus.push(svecs.column(idx).into_owned() * u.adjoint() * c(lam.sqrt(), 0.0));
            }
        }
    }
    KrausChannel::new(out.space().clone(), l.in_space().clone(), kraus)
}

/// For an ensemble of two orthogonal pure states, the optimal recovery is the
/// minimum-error measurement on the outputs followed by re-preparation.
/// Returns the recovery and the exact optimal Σ p_k(1 − F_k²).
pub fn discrimination_recovery(l: &KrausChannel, omega: &TestEnsemble) -> Result<Option<(RecoveryChannel, f64)>> {
    let entries = omega.entries();
    if entries.len() != 2 || !omega.space().same_set(l.in_space()) {
        return Ok(None);
    }
    let mut kets = Vec::new();
    for (_, rho) in entries {
        let rho = rho.reorder(l.in_space())?;
        let (vals, vecs) = rho.clipped_spectrum()?;
        let n = vals.len();
        if vals[n - 1] < 1.0 - 1e-12 {
            return Ok(None);
        }
        kets.push(vecs.column(n - 1).into_owned());
    }
    if (kets[0].adjoint() * &kets[1])[(0, 0)].norm() > 1e-12 {
        return Ok(None);
    }
    let (p1, p2) = (entries[0].0, entries[1].0);
    let s1 = l.apply(&entries[0].1.reorder(l.in_space())?)?;
    let s2 = l.apply(&entries[1].1.reorder(l.in_space())?)?;
    let gamma = s1.matrix() * c(p1, 0.0) - s2.matrix() * c(p2, 0.0);
    let (vals, vecs) = eigh(&gamma);
    let dout = vals.len();
    let mut kraus = Vec::with_capacity(dout);
    let mut loss = 0.0;
    for j in 0..dout {
        let u = vecs.column(j).into_owned();
        let a = (u.adjoint() * s1.matrix() * &u)[(0, 0)].re;
        let b = (u.adjoint() * s2.matrix() * &u)[(0, 0)].re;
        if vals[j] > 0.0 {
            kraus.push(&kets[0] * u.adjoint());
            loss += p2 * b;
        } else {
            kraus.push(&kets[1] * u.adjoint());
            loss += p1 * a;
        }
    }
    let r = KrausChannel::new(s1.space().clone(), l.in_space().clone(), kraus)?;
    Ok(Some((r, loss.max(0.0))))
}

/// Irreversibility of a sub-normalized branch: each output is renormalized by
/// its branch probability before comparison.
pub fn delta_cp(l_branch: &KrausChannel, omega: &TestEnsemble, r: &RecoveryChannel) -> Result<DeltaReport> {
    check_spaces(l_branch, r, omega)?;
    let mut d = Vec::new();
    let mut qs = Vec::new();
    for (k, (_, rho)) in omega.entries().iter().enumerate() {
        let tau = l_branch.apply(rho)?;
        let q = linalg::trace(tau.matrix()).re;
        if !(q > TOL_PROB) {
            return Err(Error::BranchProbability { index: k, q });
        }
        let sigma = r.apply(&tau)?;
        let sigma = DensityMatrix::from_parts(sigma.space().clone(), sigma.matrix() * c(1.0 / q, 0.0));
        d.push(infidelity_sq(rho, &sigma)?);
        qs.push(q);
    }
    let w: Vec<f64> = omega.entries().iter().map(|(p, _)| *p).collect();
    let mut rep = DeltaReport::plain(&d, &w, r.clone());
    rep.branch_probabilities = Some(qs);
    Ok(rep)
}

/// Identity recovery on a space, convenient when a process maps a space to itself.
pub fn identity_recovery(space: &Space) -> RecoveryChannel {
    KrausChannel::identity(space.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::linalg::{column, ket, pauli_x, projector};

    fn q() -> Space {
        Space::single("Q", 2)
    }

    #[test]
    fn petz_of_unital_depolarizer_is_itself() {
        let l = KrausChannel::depolarizing(q(), 0.5).unwrap();
        let p = petz_recovery(&l, &DensityMatrix::maximally_mixed(q())).unwrap();
        assert!(p.choi_distance(&l).unwrap() < 1e-12);
        let zero = DensityMatrix::basis(q(), 0).unwrap();
        let once = l.apply(&zero).unwrap();
        let back = p.apply(&once).unwrap();
        // recovery makes things worse here: F² drops from 3/4 to 5/8
        assert!((1.0 - infidelity_sq(&zero, &once).unwrap() - 0.75).abs() < 1e-12);
        assert!((1.0 - infidelity_sq(&zero, &back).unwrap() - 0.625).abs() < 1e-12);
    }

    #[test]
    fn depolarizer_with_identity_recovery() {
        let l = KrausChannel::depolarizing(q(), 1.0).unwrap();
        let rep = delta_with_recovery(&l, &identity_recovery(&q()), &TestEnsemble::plus_minus("Q")).unwrap();
        assert!((rep.delta - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn unitary_undone_by_inverse() {
        let l = KrausChannel::unitary(q(), pauli_x()).unwrap();
        let rep = delta_with_recovery(&l, &l, &TestEnsemble::plus_minus("Q")).unwrap();
        assert!(rep.delta < 1e-7);
        let p = petz_recovery(&l, &DensityMatrix::maximally_mixed(q())).unwrap();
        assert!(p.choi_distance(&l).unwrap() < 1e-12);
    }

    #[test]
    fn measure_prepare_in_plus_minus_is_discriminable() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = column(&[s, s]);
        let minus = column(&[s, -s]);
        let l = KrausChannel::new(q(), q(), vec![projector(&plus), projector(&minus)]).unwrap();
        let (r, loss) = discrimination_recovery(&l, &TestEnsemble::plus_minus("Q")).unwrap().unwrap();
        assert!(loss < 1e-15);
        assert!(delta_with_recovery(&l, &r, &TestEnsemble::plus_minus("Q")).unwrap().delta < 1e-7);
    }

    #[test]
    fn projector_branch_renormalized() {
        let l = KrausChannel::new_cp(q(), q(), vec![projector(&ket(2, 0))]).unwrap();
        let rep = delta_cp(&l, &TestEnsemble::plus_minus("Q"), &identity_recovery(&q())).unwrap();
        for (_, d) in &rep.per_state {
            assert!((d - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        }
        let zero = KrausChannel::new_cp(q(), q(), vec![linalg::zeros(2, 2)]).unwrap();
        assert!(matches!(
            delta_cp(&zero, &TestEnsemble::plus_minus("Q"), &identity_recovery(&q())),
            Err(Error::BranchProbability { .. })
        ));
    }
}
