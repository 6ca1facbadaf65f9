//! Closed-form error and disturbance measures used to certify the protocols.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::linalg::{self, c, eigh, jordan, CMat};
use crate::qcore::{DensityMatrix, Instrument, KrausChannel, Observable, Space};

/// Outcome probabilities below this are left out of pushforwards.
pub const TOL_OUTCOME: f64 = 1e-12;
pub const TOL_UNBIASED: f64 = 1e-9;

/// Real value attached to each measurement outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OutcomeFunction(pub Vec<f64>);

impl OutcomeFunction {
    fn check(&self, meas: &Instrument) -> Result<()> {
        let n = meas.num_outcomes();
        if self.0.len() < n {
            return Err(Error::OutcomeFunction(format!("{} values given for {n} outcomes", self.0.len())));
        }
        if self.0.iter().any(|v| !v.is_finite()) {
            return Err(Error::OutcomeFunction("non-finite value".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let b = BlochVector { x, y, z };
        if !(b.norm() <= 1.0 + 1e-12) {
            return Err(Error::Bloch(format!("norm {} exceeds 1", b.norm())));
        }
        Ok(b)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, o: &BlochVector) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// x σ_x + y σ_y + z σ_z.
    pub fn operator(&self) -> CMat {
        linalg::bloch_operator(self.array())
    }
}

/// ρ and the observable laid out in the instrument's input order.
fn aligned(rho: &DensityMatrix, o: &Observable, meas: &Instrument) -> Result<(CMat, CMat)> {
    let s = meas.in_space();
    if !rho.space().same_set(s) || !o.space().same_set(s) {
        return Err(Error::Shape(format!(
            "state on {:?} and observable on {:?} do not match the measured system {:?}",
            rho.space().names(),
            o.space().names(),
            s.names()
        )));
    }
    Ok((rho.reorder(s)?.matrix().clone(), o.reorder(s)?.matrix().clone()))
}

/// Σ_m ‖M_m(A − f(m))√ρ‖².
pub fn ozawa_error_sq(rho: &DensityMatrix, a: &Observable, meas: &Instrument, f: &OutcomeFunction) -> Result<f64> {
    f.check(meas)?;
    let (r, am) = aligned(rho, a, meas)?;
    let sq = linalg::sqrt_psd(&r);
    let d = am.nrows();
    Ok(meas
        .branches()
        .iter()
        .map(|b| linalg::hs_norm_sq(&(&b.kraus * (&am - linalg::identity(d) * c(f.0[b.outcome], 0.0)) * &sq)))
        .sum())
}

pub fn ozawa_error(rho: &DensityMatrix, a: &Observable, meas: &Instrument, f: &OutcomeFunction) -> Result<f64> {
    Ok(ozawa_error_sq(rho, a, meas, f)?.sqrt())
}

/// Σ_m ‖[M_m, B]√ρ‖²; the instrument must map the system to a copy of itself.
pub fn ozawa_disturbance_sq(rho: &DensityMatrix, b: &Observable, meas: &Instrument) -> Result<f64> {
    if meas.in_space().dim() != meas.out_space().dim() {
        return Err(Error::Shape(format!(
            "Kraus operators are {}x{}; the commutator needs square ones",
            meas.out_space().dim(),
            meas.in_space().dim()
        )));
    }
    let (r, bm) = aligned(rho, b, meas)?;
    let sq = linalg::sqrt_psd(&r);
    Ok(meas.branches().iter().map(|br| linalg::hs_norm_sq(&(linalg::commutator(&br.kraus, &bm) * &sq))).sum())
}

pub fn ozawa_disturbance(rho: &DensityMatrix, b: &Observable, meas: &Instrument) -> Result<f64> {
    Ok(ozawa_disturbance_sq(rho, b, meas)?.sqrt())
}

/// Whether Σ_m f(m)Π_m = A, with the max-abs gap.
pub fn akg_unbiasedness_check(meas: &Instrument, a: &Observable, f: &OutcomeFunction) -> Result<(bool, f64)> {
    f.check(meas)?;
    let s = meas.in_space();
    if !a.space().same_set(s) {
        return Err(Error::Shape("observable is not on the measured system".into()));
    }
    let am = a.reorder(s)?;
    let d = s.dim();
    let mut acc = linalg::zeros(d, d);
    for (m, p) in meas.povm().iter().enumerate() {
        acc += p * c(f.0[m], 0.0);
    }
    let dev = linalg::max_abs_diff(&acc, am.matrix());
    Ok((dev <= TOL_UNBIASED, dev))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LtError {
    pub error_sq: f64,
    /// Minimizing outcome function; `None` for outcomes of probability below 1e-12.
    pub pushforward: Vec<Option<f64>>,
    pub probabilities: Vec<f64>,
}

impl LtError {
    pub fn error(&self) -> f64 {
        self.error_sq.max(0.0).sqrt()
    }

    /// Pushforward with excluded outcomes set to zero.
    pub fn outcome_function(&self) -> OutcomeFunction {
        OutcomeFunction(self.pushforward.iter().map(|v| v.unwrap_or(0.0)).collect())
    }

    /// ‖f − pushforward‖² weighted by the outcome distribution.
    pub fn gap(&self, f: &OutcomeFunction) -> f64 {
        self.pushforward
            .iter()
            .zip(&self.probabilities)
            .enumerate()
            .map(|(m, (g, p))| g.map_or(0.0, |g| p * (f.0[m] - g).powi(2)))
            .sum()
    }
}

/// ⟨A²⟩ − 2⟨A∘𝓟†(f)⟩ + ⟨𝓟†(f²)⟩.
pub fn lt_error_sq_for(rho: &DensityMatrix, a: &Observable, meas: &Instrument, f: &OutcomeFunction) -> Result<f64> {
    f.check(meas)?;
    let (r, am) = aligned(rho, a, meas)?;
    let d = am.nrows();
    let mut pf = linalg::zeros(d, d);
    let mut pf2 = linalg::zeros(d, d);
    for (m, p) in meas.povm().iter().enumerate() {
        pf += p * c(f.0[m], 0.0);
        pf2 += p * c(f.0[m] * f.0[m], 0.0);
    }
    let ex = |o: &CMat| (&r * o).trace().re;
    Ok(ex(&(&am * &am)) - 2.0 * ex(&jordan(&am, &pf)) + ex(&pf2))
}

/// Minimum over outcome functions, attained at f(m) = ⟨A∘Π_m⟩_ρ / p(m).
pub fn lt_error(rho: &DensityMatrix, a: &Observable, meas: &Instrument) -> Result<LtError> {
    let (r, am) = aligned(rho, a, meas)?;
    let povm = meas.povm();
    let mut push = Vec::with_capacity(povm.len());
    let mut probs = Vec::with_capacity(povm.len());
    for p in &povm {
        let pm = (&r * p).trace().re;
        probs.push(pm);
        push.push(if pm < TOL_OUTCOME { None } else { Some((&r * jordan(&am, p)).trace().re / pm) });
    }
    let mut out = LtError { error_sq: 0.0, pushforward: push, probabilities: probs };
    out.error_sq = lt_error_sq_for(rho, a, meas, &out.outcome_function())?.max(0.0);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LtDisturbance {
    pub disturbance_sq: f64,
    pub minimizer: Observable,
}

impl LtDisturbance {
    pub fn disturbance(&self) -> f64 {
        self.disturbance_sq.max(0.0).sqrt()
    }
}

/// ⟨B²⟩ − 2⟨B∘𝓘†(X)⟩ + ⟨𝓘†(X²)⟩ for X on the output system.
pub fn lt_disturbance_sq_for(rho: &DensityMatrix, b: &Observable, meas: &Instrument, x: &Observable) -> Result<f64> {
    let (r, bm) = aligned(rho, b, meas)?;
    let ch = meas.channel();
    if !x.space().same_set(ch.out_space()) {
        return Err(Error::Shape("trial observable is not on the output system".into()));
    }
    let xm = x.reorder(ch.out_space())?.matrix().clone();
    let ix = ch.dual_matrix(&xm);
    let ix2 = ch.dual_matrix(&(&xm * &xm));
    let ex = |o: &CMat| (&r * o).trace().re;
    Ok(ex(&(&bm * &bm)) - 2.0 * ex(&jordan(&bm, &ix)) + ex(&ix2))
}

/// Minimum over Hermitian X on the output system. With σ = 𝓘(ρ) and
/// S = Re 𝓘(ρB) (Hermitian part), the objective is Tr[σX²] − 2Tr[SX] + ⟨B²⟩,
/// minimized where σX + Xσ = 2S; solved in σ's eigenbasis with eigenvalue
/// sums below 1e-12 pseudo-inverted to 0.
pub fn lt_disturbance(rho: &DensityMatrix, b: &Observable, meas: &Instrument) -> Result<LtDisturbance> {
    let (r, bm) = aligned(rho, b, meas)?;
    let ch = meas.channel();
    let apply = |m: &CMat| {
        let d = ch.out_space().dim();
        let mut out = linalg::zeros(d, d);
        for k in ch.kraus() {
            out += k * m * k.adjoint();
        }
        out
    };
    let sigma = apply(&r);
    let s = linalg::hermitian_part(&apply(&(&r * &bm)));
    let (vals, vecs) = eigh(&sigma);
    let se = vecs.adjoint() * s * &vecs;
    let n = vals.len();
    let xe = CMat::from_fn(n, n, |i, j| {
        let d = vals[i] + vals[j];
        if d > TOL_OUTCOME {
            se[(i, j)] * c(2.0 / d, 0.0)
        } else {
            c(0.0, 0.0)
        }
    });
    let x = Observable::new(ch.out_space().clone(), &vecs * xe * vecs.adjoint())?;
    let v = lt_disturbance_sq_for(rho, b, meas, &x)?.max(0.0);
    Ok(LtDisturbance { disturbance_sq: v, minimizer: x })
}

/// √(2|a·(a−a′)|) for a sharp qubit observable a·σ and its noisy version a′·σ.
pub fn blw_calibration_error_qubit(a: &BlochVector, a_prime: &BlochVector) -> Result<f64> {
    if (a.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::Bloch(format!("sharp observable needs a unit vector, got norm {}", a.norm())));
    }
    if !(a_prime.norm() <= 1.0 + 1e-12) {
        return Err(Error::Bloch(format!("norm {} exceeds 1", a_prime.norm())));
    }
    let diff = BlochVector { x: a.x - a_prime.x, y: a.y - a_prime.y, z: a.z - a_prime.z };
    Ok((2.0 * a.dot(&diff).abs()).sqrt())
}

/// Wasserstein-2 distance between finitely supported distributions on the
/// line, given as (point, weight) pairs; monotone coupling of the quantiles.
pub fn wasserstein2_discrete(mu: &[(f64, f64)], nu: &[(f64, f64)]) -> Result<f64> {
    let prep = |d: &[(f64, f64)]| -> Result<Vec<(f64, f64)>> {
        if d.iter().any(|(x, w)| !x.is_finite() || !(*w >= 0.0)) {
            return Err(Error::Distribution("points must be finite and weights non-negative".into()));
        }
        let mut v: Vec<(f64, f64)> = d.iter().copied().filter(|(_, w)| *w > 0.0).collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(v)
    };
    let (a, b) = (prep(mu)?, prep(nu)?);
    let (ma, mb) = (a.iter().map(|p| p.1).sum::<f64>(), b.iter().map(|p| p.1).sum::<f64>());
    if (ma - mb).abs() > 1e-12 {
        return Err(Error::Distribution(format!("total masses differ: {ma} vs {mb}")));
    }
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a.first().map_or(0.0, |p| p.1), b.first().map_or(0.0, |p| p.1));
    let mut cost = 0.0;
    while i < a.len() && j < b.len() {
        let w = ra.min(rb);
        cost += w * (a[i].0 - b[j].0).powi(2);
        ra -= w;
        rb -= w;
        if ra <= 1e-15 {
            i += 1;
            ra = a.get(i).map_or(0.0, |p| p.1);
        }
        if rb <= 1e-15 {
            j += 1;
            rb = b.get(j).map_or(0.0, |p| p.1);
        }
    }
    Ok(cost.max(0.0).sqrt())
}

/// Qubit instance whose two-copy calibration value is known in closed form.
#[derive(Debug, Clone)]
pub struct BlwSetup {
    /// Eigenstate (I + a·σ)/2 of the sharp observable.
    pub state: DensityMatrix,
    pub observable: Observable,
    pub instrument: Instrument,
    /// Canonical recovery observable: ±1 on the pointer, or the sharp observable on S′.
    pub recovery: Observable,
    /// 2|a·(a − a′)|.
    pub expected: f64,
}

fn blw_common(sharp: &BlochVector, noisy: &BlochVector) -> Result<(Space, DensityMatrix, Observable, f64)> {
    let e = blw_calibration_error_qubit(sharp, noisy)?;
    let s = Space::single("S", 2);
    let state = DensityMatrix::new(s.clone(), (linalg::identity(2) + sharp.operator()) * c(0.5, 0.0))?;
    Ok((s.clone(), state, Observable::new(s, sharp.operator())?, e * e))
}

/// Sharp a·σ measured by the unsharp two-outcome POVM (I ± a′·σ)/2.
pub fn blw_error_setup(sharp: &BlochVector, noisy: &BlochVector) -> Result<BlwSetup> {
    let (s, state, observable, expected) = blw_common(sharp, noisy)?;
    let half = |sign: f64| (linalg::identity(2) + noisy.operator() * c(sign, 0.0)) * c(0.5, 0.0);
    let instrument = Instrument::luders(s, "S'", &[half(1.0), half(-1.0)])?;
    let recovery = crate::comb::pointer_observable(&[1.0, -1.0]);
    Ok(BlwSetup { state, observable, instrument, recovery, expected })
}

/// Unital channel whose dual sends b·σ to b′·σ: a rotation taking b′/|b′| to b
/// followed by depolarizing with strength 1 − |b′|.
pub fn blw_disturbance_setup(sharp: &BlochVector, noisy: &BlochVector) -> Result<BlwSetup> {
    let (s, state, observable, expected) = blw_common(sharp, noisy)?;
    let len = noisy.norm();
    let rot = if len > 1e-12 {
        let (_, vb) = eigh(&sharp.operator());
        let (_, vn) = eigh(&(noisy.operator() * c(1.0 / len, 0.0)));
        vb * vn.adjoint()
    } else {
        linalg::identity(2)
    };
    let dep = KrausChannel::depolarizing(s.clone(), (1.0 - len).clamp(0.0, 1.0))?;
    let kraus = dep.kraus().iter().map(|k| k * &rot).collect();
    let instrument = Instrument::from_kraus(s, Space::single("S'", 2), kraus)?;
    let recovery = observable.relabel(Space::single("S'", 2))?;
    Ok(BlwSetup { state, observable, instrument, recovery, expected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::linalg::{pauli_x, pauli_z};
    use crate::qcore::Space;

    fn s() -> Space {
        Space::single("S", 2)
    }

    #[test]
    fn textbook_values() {
        let m = Instrument::computational(s(), "S'").unwrap();
        let x = Observable::new(s(), pauli_x()).unwrap();
        let f = OutcomeFunction(vec![1.0, -1.0]);
        for rho in [DensityMatrix::basis(s(), 0).unwrap(), DensityMatrix::maximally_mixed(s())] {
            assert!((ozawa_error_sq(&rho, &x, &m, &f).unwrap() - 2.0).abs() < 1e-12);
            assert!((ozawa_disturbance_sq(&rho, &x, &m).unwrap() - 2.0).abs() < 1e-12);
        }
        let lt = lt_error(&DensityMatrix::basis(s(), 0).unwrap(), &x, &m).unwrap();
        assert!((lt.error_sq - 1.0).abs() < 1e-12);
        assert_eq!(lt.pushforward[1], None);
        assert!(lt.pushforward[0].unwrap().abs() < 1e-12);
        let ltd = lt_disturbance(&DensityMatrix::maximally_mixed(s()), &x, &m).unwrap();
        assert!((ltd.disturbance_sq - 1.0).abs() < 1e-12);
        assert!(linalg::max_abs(ltd.minimizer.matrix()) < 1e-12);
    }

    #[test]
    fn unbiasedness() {
        let m = Instrument::computational(s(), "S'").unwrap();
        let z = Observable::new(s(), pauli_z()).unwrap();
        assert_eq!(akg_unbiasedness_check(&m, &z, &OutcomeFunction(vec![1.0, -1.0])).unwrap(), (true, 0.0));
        assert!(!akg_unbiasedness_check(&m, &z, &OutcomeFunction(vec![0.0, 0.0])).unwrap().0);
        assert!(matches!(akg_unbiasedness_check(&m, &z, &OutcomeFunction(vec![1.0])), Err(Error::OutcomeFunction(_))));
    }

    #[test]
    fn transport() {
        assert!(wasserstein2_discrete(&[(0.0, 1.0)], &[(3.0, 1.0)]).unwrap() == 3.0);
        assert!((wasserstein2_discrete(&[(-1.0, 0.5), (1.0, 0.5)], &[(0.0, 1.0)]).unwrap() - 1.0).abs() < 1e-15);
        assert!(wasserstein2_discrete(&[(0.0, 1.0)], &[(0.0, 0.5)]).is_err());
    }

    #[test]
    fn bloch_examples() {
        let z = BlochVector::new(0.0, 0.0, 1.0).unwrap();
        let x = BlochVector::new(1.0, 0.0, 0.0).unwrap();
        let mz = BlochVector::new(0.0, 0.0, -1.0).unwrap();
        assert!(blw_calibration_error_qubit(&z, &z).unwrap() == 0.0);
        assert!((blw_calibration_error_qubit(&z, &x).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!((blw_calibration_error_qubit(&z, &mz).unwrap() - 2.0).abs() < 1e-15);
        assert!(blw_calibration_error_qubit(&BlochVector { x: 0.5, y: 0.0, z: 0.0 }, &z).is_err());
    }
}
