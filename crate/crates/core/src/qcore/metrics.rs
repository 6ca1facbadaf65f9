//! Fidelity, purified distance, variance and SLD quantum Fisher information.

use super::linalg::{self, c, spectral, CMat};
use super::state::{DensityMatrix, Observable};
use crate::error::{Error, Result};

/// Eigenvalue pairs with λ_i + λ_j at or below this are skipped in the QFI sum.
pub const TOL_QFI_EIG: f64 = 1e-12;

/// A state counts as pure when its top eigenvalue exceeds 1 − PURE_TOL.
const PURE_TOL: f64 = 1e-12;

fn aligned(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<DensityMatrix> {
    if rho.space() == sigma.space() {
        return Ok(sigma.clone());
    }
    if !rho.space().same_set(sigma.space()) {
        return Err(Error::CompositeSpace(format!(
            "states live on {:?} and {:?}",
            rho.space().names(),
            sigma.space().names()
        )));
    }
    sigma.reorder(rho.space())
}

/// Uhlmann fidelity ‖√ρ √σ‖₁.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    let sigma = aligned(rho, sigma)?;
    let root = |r: &DensityMatrix| -> Result<CMat> {
        let (vals, vecs) = r.clipped_spectrum()?;
        Ok(spectral(&vals.iter().map(|&l| c(l.sqrt(), 0.0)).collect::<Vec<_>>(), &vecs))
    };
    let m = root(rho)? * root(&sigma)?;
    let f: f64 = m.singular_values().iter().sum();
    Ok(f.clamp(0.0, 1.0))
}

/// 1 − F(ρ,σ)², evaluated without cancellation when either state is pure.
pub fn infidelity_sq(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    let sigma = aligned(rho, sigma)?;
    if let Some(v) = pure_infidelity_sq(rho, &sigma)? {
        return Ok(v);
    }
    if let Some(v) = pure_infidelity_sq(&sigma, rho)? {
        return Ok(v);
    }
    let f = fidelity(rho, &sigma)?;
    Ok((1.0 - f * f).clamp(0.0, 1.0))
}

/// For pure ρ = |ψ⟩⟨ψ|: 1 − ⟨ψ|σ|ψ⟩ = Σ_{φ⊥ψ} ⟨φ|σ|φ⟩ over an orthonormal complement.
fn pure_infidelity_sq(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<Option<f64>> {
    let (vals, vecs) = rho.clipped_spectrum()?;
    let n = vals.len();
    if vals[n - 1] < 1.0 - PURE_TOL {
        return Ok(None);
    }
    let s = sigma.matrix();
    let tr = linalg::trace(s).re;
    if tr <= 0.0 {
        return Err(Error::StateValidity("state has zero trace".into()));
    }
    let mut acc = 0.0;
    for j in 0..n - 1 {
        let v = vecs.column(j);
        acc += (v.adjoint() * s * v)[(0, 0)].re;
    }
    Ok(Some((acc / tr).clamp(0.0, 1.0)))
}

/// Purified distance √(1 − F²).
pub fn purified_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    Ok(infidelity_sq(rho, sigma)?.sqrt())
}

fn check_same(rho: &DensityMatrix, z: &Observable) -> Result<Observable> {
    if rho.space() == z.space() {
        Ok(z.clone())
    } else if rho.space().same_set(z.space()) {
        z.reorder(rho.space())
    } else {
        Err(Error::CompositeSpace(format!(
            "state on {:?}, observable on {:?}",
            rho.space().names(),
            z.space().names()
        )))
    }
}

pub fn expectation(rho: &DensityMatrix, z: &Observable) -> Result<f64> {
    let z = check_same(rho, z)?;
    Ok(rho.expect(z.matrix()))
}

/// ⟨Z²⟩ − ⟨Z⟩², clamped at zero.
pub fn variance(rho: &DensityMatrix, z: &Observable) -> Result<f64> {
    let z = check_same(rho, z)?;
    let m = z.matrix();
    let mean = rho.expect(m);
    Ok((rho.expect(&(m * m)) - mean * mean).max(0.0))
}

/// SLD quantum Fisher information of the family e^{−iεX}ρe^{iεX} at ε = 0.
pub fn qfi(rho: &DensityMatrix, x: &Observable) -> Result<f64> {
    let x = check_same(rho, x)?;
    let (vals, vecs) = rho.clipped_spectrum()?;
    let xe = vecs.adjoint() * x.matrix() * &vecs;
    let n = vals.len();
    let mut f = 0.0;
    for i in 0..n {
        for j in 0..n {
            let s = vals[i] + vals[j];
            if s > TOL_QFI_EIG {
                let d = vals[i] - vals[j];
                f += d * d / s * xe[(i, j)].norm_sqr();
            }
        }
    }
    Ok(2.0 * f)
}
