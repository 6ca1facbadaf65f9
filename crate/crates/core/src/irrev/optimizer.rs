//! Recovery optimization over Stinespring isometries V: out → in ⊗ env.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{delta_with_recovery, discrimination_recovery, petz_recovery, DeltaReport, RecoveryChannel, TOL_PINV};
use crate::error::{Error, Result};
use crate::qcore::linalg::{self, c, eigh, qr_retract, spectral, CMat};
use crate::qcore::random;
use crate::qcore::{KrausChannel, TestEnsemble};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub seed: u64,
    pub max_iters: usize,
    /// Initial trial step of the backtracking line search.
    pub step: f64,
    pub restarts: usize,
    /// Stop once the objective changes by less than this between iterations.
    pub tol: f64,
    /// Also start from the minimum-error discrimination recovery when the
    /// ensemble consists of two orthogonal pure states.
    pub discrimination_start: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig { seed: 0, max_iters: 2000, step: 0.1, restarts: 4, tol: 1e-10, discrimination_start: true }
    }
}

/// Precomputed data for Σ p_k F(ρ_k, Tr_E[V τ_k V†])².
struct Problem {
    din: usize,
    denv: usize,
    weights: Vec<f64>,
    sqrt_rho: Vec<CMat>,
    tau: Vec<CMat>,
}

struct Eval {
    value: f64,
    grad: CMat,
}

impl Problem {
    fn env_trace(&self, m: &CMat) -> CMat {
        let (din, de) = (self.din, self.denv);
        CMat::from_fn(din, din, |i, j| (0..de).map(|e| m[(i * de + e, j * de + e)]).sum())
    }

    fn value(&self, v: &CMat) -> f64 {
        let mut total = 0.0;
        for k in 0..self.weights.len() {
            let sigma = self.env_trace(&(v * &self.tau[k] * v.adjoint()));
            let m = &self.sqrt_rho[k] * sigma * &self.sqrt_rho[k];
            let f: f64 = eigh(&m).0.iter().map(|l| l.max(0.0).sqrt()).sum();
            total += self.weights[k] * f * f;
        }
        total
    }

    /// Objective and its Euclidean gradient 2F (T ⊗ I_E) V τ with
    /// T = √ρ (√ρσ√ρ)^{−1/2} √ρ.
    fn eval(&self, v: &CMat) -> Eval {
        let mut total = 0.0;
        let mut grad = linalg::zeros(v.nrows(), v.ncols());
        let id_env = linalg::identity(self.denv);
        for k in 0..self.weights.len() {
            let vt = v * &self.tau[k];
            let sigma = self.env_trace(&(&vt * v.adjoint()));
            let m = &self.sqrt_rho[k] * sigma * &self.sqrt_rho[k];
            let (vals, vecs) = eigh(&m);
            let f: f64 = vals.iter().map(|l| l.max(0.0).sqrt()).sum();
            total += self.weights[k] * f * f;
            let inv: Vec<_> = vals.iter().map(|&l| if l > TOL_PINV { c(1.0 / l.sqrt(), 0.0) } else { c(0.0, 0.0) }).collect();
            let t = &self.sqrt_rho[k] * spectral(&inv, &vecs) * &self.sqrt_rho[k];
            grad += linalg::kron(&t, &id_env) * vt * c(2.0 * f * self.weights[k], 0.0);
        }
        Eval { value: total, grad }
    }

    fn isometry_from_kraus(&self, r: &RecoveryChannel) -> CMat {
        let r = if r.kraus().len() > self.denv { r.minimal() } else { r.clone() };
        let dout = r.in_space().dim();
        let mut v = linalg::zeros(self.din * self.denv, dout);
        for (e, k) in r.kraus().iter().enumerate() {
            for i in 0..self.din {
                for j in 0..dout {
                    v[(i * self.denv + e, j)] = k[(i, j)];
                }
            }
        }
        v
    }

    fn kraus_from_isometry(&self, v: &CMat) -> Vec<CMat> {
        (0..self.denv)
            .map(|e| CMat::from_fn(self.din, v.ncols(), |i, j| v[(i * self.denv + e, j)]))
            .filter(|k| linalg::max_abs(k) > 0.0)
            .collect()
    }
}

struct Run {
    label: String,
    v: CMat,
    value: f64,
    trace: Vec<(usize, f64)>,
    converged: bool,
}

fn ascend(p: &Problem, label: String, v0: CMat, cfg: &OptimizerConfig) -> Run {
    let mut v = qr_retract(&v0);
    let mut cur = p.eval(&v);
    let mut trace = vec![(0, cur.value)];
    let mut t = cfg.step;
    let mut converged = false;
    for it in 1..=cfg.max_iters {
        let vg = v.adjoint() * &cur.grad;
        let xi = &cur.grad - &v * linalg::hermitian_part(&vg);
        let slope = linalg::hs_norm_sq(&xi);
        if slope < 1e-30 {
            converged = true;
            break;
        }
        let mut accepted = None;
        let mut trial = (t * 2.0).min(cfg.step * 1e3);
        for _ in 0..60 {
            let cand = qr_retract(&(&v + &xi * c(trial, 0.0)));
            let val = p.value(&cand);
            if val >= cur.value + 1e-4 * trial * slope {
                accepted = Some((cand, val));
                break;
            }
            trial *= 0.5;
        }
        let Some((nv, nval)) = accepted else {
            converged = true;
            break;
        };
        t = trial;
        let change = nval - cur.value;
        v = nv;
        cur = p.eval(&v);
        trace.push((it, cur.value));
        if change.abs() < cfg.tol {
            converged = true;
            break;
        }
    }
    Run { label, value: cur.value, v, trace, converged }
}

/// Best recovery found by projected gradient ascent on Σ p_k F² over
/// Stinespring isometries, started from the Petz map, the discrimination
/// recovery (when applicable) and `cfg.restarts` random isometries.
/// Deterministic for a fixed configuration.
pub fn delta_min(l: &KrausChannel, omega: &TestEnsemble, cfg: &OptimizerConfig) -> Result<DeltaReport> {
    if !omega.space().same_set(l.in_space()) {
        return Err(Error::Shape("test states are not on the process input space".into()));
    }
    let (din, dout) = (l.in_space().dim(), l.out_space().dim());
    let denv = din * dout;
    let mut sqrt_rho = Vec::new();
    let mut tau = Vec::new();
    for (_, rho) in omega.entries() {
        let rho = rho.reorder(l.in_space())?;
        let (vals, vecs) = rho.clipped_spectrum()?;
        sqrt_rho.push(spectral(&vals.iter().map(|&x| c(x.sqrt(), 0.0)).collect::<Vec<_>>(), &vecs));
        tau.push(l.apply(&rho)?.matrix().clone());
    }
    let out_space = l.apply(&omega.entries()[0].1.reorder(l.in_space())?)?.space().clone();
    let problem = Problem { din, denv, weights: omega.entries().iter().map(|(p, _)| *p).collect(), sqrt_rho, tau };

    let petz = petz_recovery(l, &omega.average())?;
    let petz_report = delta_with_recovery(l, &petz, omega)?;
    let mut starts: Vec<(String, CMat)> = vec![("petz".into(), problem.isometry_from_kraus(&petz))];
    if cfg.discrimination_start {
        if let Some((r, _)) = discrimination_recovery(l, omega)? {
            starts.push(("discrimination".into(), problem.isometry_from_kraus(&r)));
        }
    }
    for r in 0..cfg.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(r as u64 + 1);
        starts.push((format!("random-{r}"), random::isometry(&mut rng, din * denv, dout)));
    }

    let runs: Vec<Run> = starts.into_par_iter().map(|(label, v0)| ascend(&problem, label, v0, cfg)).collect();
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.value > runs[best].value {
            best = i;
        }
    }
    let run = &runs[best];
    let recovery = KrausChannel::new(out_space, l.in_space().clone(), problem.kraus_from_isometry(&run.v))?;
    let mut report = delta_with_recovery(l, &recovery, omega)?;
    let mut warnings = Vec::new();
    if report.delta > petz_report.delta {
        report = petz_report.clone();
        warnings.push("optimized recovery did not improve on the Petz map; reporting Petz".to_string());
    }
    if !run.converged {
        warnings.push(format!("optimizer stopped after {} iterations without meeting tol {:e}", cfg.max_iters, cfg.tol));
    }
    report.optimizer_trace = Some(run.trace.clone());
    report.local_optimum_only = true;
    report.converged = run.converged;
    report.start = Some(run.label.clone());
    report.petz_delta = Some(petz_report.delta);
    report.warnings = warnings;
    Ok(report)
}
