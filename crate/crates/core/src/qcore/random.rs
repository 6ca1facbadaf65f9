//! Seeded random generators for states, observables, unitaries and instruments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::channel::Instrument;
use super::linalg::{self, c, hermitian_part, CMat};
use super::space::Space;
use crate::error::Result;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Matrix of i.i.d. standard complex Gaussians.
pub fn ginibre<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Isometry of shape rows×cols (rows ≥ cols); Haar distributed.
pub fn isometry<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    linalg::qr_retract(&ginibre(rng, rows, cols))
}

pub fn unitary<R: Rng>(rng: &mut R, n: usize) -> CMat {
    isometry(rng, n, n)
}

/// Hermitian matrix with spectrum rescaled into [−1, 1].
pub fn hermitian<R: Rng>(rng: &mut R, n: usize) -> CMat {
    let h = hermitian_part(&ginibre(rng, n, n));
    let top = linalg::eigh(&h).0.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    if top == 0.0 {
        h
    } else {
        h * c(1.0 / top, 0.0)
    }
}

/// Density matrix G G†/Tr of the given rank.
pub fn density<R: Rng>(rng: &mut R, n: usize, rank: usize) -> CMat {
    let g = ginibre(rng, n, rank.max(1));
    let m = &g * g.adjoint();
    let t = linalg::trace(&m).re;
    m * c(1.0 / t, 0.0)
}

pub fn pure<R: Rng>(rng: &mut R, n: usize) -> CMat {
    let v = ginibre(rng, n, 1);
    let norm = v.norm();
    v * c(1.0 / norm, 0.0)
}

/// Uniform point on the unit sphere.
pub fn unit_vector3<R: Rng>(rng: &mut R) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-6 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Instrument with one generic Kraus operator per outcome, normalized through
/// (Σ K†K)^{−1/2}.
pub fn instrument<R: Rng>(rng: &mut R, in_space: Space, out_space: Space, outcomes: usize) -> Result<Instrument> {
    let (din, dout) = (in_space.dim(), out_space.dim());
    let raw: Vec<CMat> = (0..outcomes).map(|_| ginibre(rng, dout, din)).collect();
    let mut g = linalg::zeros(din, din);
    for k in &raw {
        g += k.adjoint() * k;
    }
    let norm = linalg::inv_sqrt_psd(&g, 0.0);
    Instrument::from_kraus(in_space, out_space, raw.into_iter().map(|k| k * &norm).collect())
}
