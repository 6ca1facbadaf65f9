//! Built-in example scenarios, one per kind and then some.

use std::path::{Path, PathBuf};

use irrevkit::comb::{pointer_observable, Recovery};
use irrevkit::oracles::BlochVector;
use irrevkit::otoc::{self, qubit_space, ScramblingScenario};
use irrevkit::qcore::linalg::{self, c, pauli_x, pauli_z, CMat};
use irrevkit::qcore::{DensityMatrix, Instrument, KrausChannel, Observable, Space, TestEnsemble};
use irrevkit::way::{self, LhsSource, ProbeState, WayConfig};
use serde::Serialize;
use serde_json::{json, Value};

use crate::io::{json_bytes, write_atomic};
use crate::scenario::SCHEMA;
use crate::CliError;

fn scenario<P: Serialize>(name: &str, kind: &str, payload: P) -> (String, Value) {
    let v = json!({
        "schema": SCHEMA,
        "kind": kind,
        "seed": 0,
        "output": format!("{name}.report.json"),
        "payload": serde_json::to_value(payload).expect("fixture serializes"),
    });
    (name.to_string(), v)
}

fn s() -> Space {
    Space::single("S", 2)
}

fn obs(m: CMat) -> Observable {
    Observable::new(s(), m).expect("Hermitian fixture")
}

fn ket0() -> DensityMatrix {
    DensityMatrix::basis(s(), 0).expect("valid index")
}

/// σ_y eigenstate (|0⟩ + i|1⟩)/√2.
fn plus_i() -> DensityMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let psi = CMat::from_column_slice(2, 1, &[c(h, 0.0), c(0.0, h)]);
    DensityMatrix::pure(s(), &psi).expect("normalized")
}

fn zmeas() -> Instrument {
    Instrument::computational(s(), "S'").expect("qubit")
}

fn swap() -> CMat {
    linalg::real_matrix(4, 4, &[1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0., 0., 0., 0., 0., 1.])
}

fn cnot() -> CMat {
    linalg::real_matrix(4, 4, &[1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0.])
}

fn qubit_scenario(h: CMat, w: CMat, v: CMat, tau: f64) -> ScramblingScenario {
    let o = |m: CMat| Observable::new(qubit_space(1), m).expect("Hermitian fixture");
    ScramblingScenario::new(o(h), o(w), o(v), tau, None).expect("consistent spaces")
}

pub fn corpus() -> Result<Vec<(String, Value)>, CliError> {
    let mut out = Vec::new();
    let canonical_pm = Recovery::Canonical { observable: pointer_observable(&[1.0, -1.0]) };

    out.push(scenario(
        "epsilon-qubit",
        "epsilon",
        json!({ "state": ket0(), "observable": obs(pauli_x()), "instrument": zmeas(), "recovery": canonical_pm }),
    ));
    out.push(scenario(
        "eta-dephasing",
        "eta",
        json!({
            "state": ket0(),
            "observable": obs(pauli_x()),
            "instrument": zmeas(),
            "recovery": Recovery::Canonical { observable: Observable::new(Space::single("S'", 2), pauli_x()).expect("Hermitian") },
        }),
    ));
    let q = Space::single("Q", 2);
    let dep = KrausChannel::depolarizing(q.clone(), 0.5)?;
    out.push(scenario(
        "delta-depolarizing",
        "delta",
        json!({ "process": dep, "ensemble": TestEnsemble::plus_minus("Q"), "recovery": { "type": "optimize" } }),
    ));
    out.push(scenario(
        "delta-petz",
        "delta",
        json!({ "process": dep, "ensemble": TestEnsemble::plus_minus("Q"), "recovery": { "type": "petz" } }),
    ));
    let sharp = BlochVector::new(0.0, 0.0, 1.0)?;
    let noisy = BlochVector::new(0.3, 0.0, 0.8)?;
    out.push(scenario("blw-error", "blw", json!({ "target": "error", "sharp": sharp, "noisy": noisy })));
    out.push(scenario("blw-disturbance", "blw", json!({ "target": "disturbance", "sharp": sharp, "noisy": noisy })));
    out.push(scenario(
        "lt-error",
        "lt",
        json!({ "target": "error", "state": ket0(), "observable": obs(pauli_x()), "instrument": zmeas() }),
    ));

    let z = obs(pauli_z());
    let swap_model = way::pointer_measurement(&z, &[1.0, -1.0], &swap(), ProbeState::Eigenstate(0))?;
    out.push(scenario(
        "way-error-swap",
        "way-error",
        json!({
            "state": ket0(),
            "observable": obs(pauli_x()),
            "instrument": swap_model.instrument,
            "implementation": swap_model.error_impl,
            "yanase": true,
        }),
    ));
    let canonical = WayConfig { lhs: LhsSource::Canonical, ..WayConfig::default() };
    out.push(scenario(
        "way-error-yanase-tight",
        "way-error",
        json!({
            "state": plus_i(),
            "observable": obs(pauli_x()),
            "instrument": swap_model.instrument,
            "implementation": swap_model.error_impl,
            "config": canonical,
            "yanase": true,
        }),
    ));
    let cnot_model = way::pointer_measurement(&z, &[0.0, 0.0], &cnot(), ProbeState::Eigenstate(0))?;
    out.push(scenario(
        "way-disturbance-dephasing",
        "way-disturbance",
        json!({
            "state": ket0(),
            "observable": obs(pauli_x()),
            "instrument": cnot_model.instrument,
            "implementation": cnot_model.disturbance_impl,
        }),
    ));

    out.push(scenario(
        "otoc-qubit",
        "otoc",
        json!({ "scenario": qubit_scenario(linalg::zeros(2, 2), pauli_x(), pauli_z(), 0.0) }),
    ));
    out.push(scenario(
        "otoc-chain",
        "otoc",
        json!({
            "scenario": {
                "hamiltonian": otoc::ising_chain(3, 1.0, 1.0),
                "w": otoc::site_pauli(3, 0, 'X'),
                "v": otoc::site_pauli(3, 2, 'Z'),
                "tau": 1.0,
            }
        }),
    ));
    let diag = linalg::real_matrix(2, 2, &[2.0, 0.0, 0.0, 0.0]);
    out.push(scenario(
        "otoc-cp-diag",
        "otoc-cp",
        json!({ "scenario": qubit_scenario(linalg::zeros(2, 2), diag, pauli_x(), 0.0) }),
    ));
    let sc = qubit_scenario(linalg::zeros(2, 2), pauli_x(), pauli_z(), 0.0);
    let b = Space::single("B", 2);
    let probe = DensityMatrix::pure(b.clone(), &linalg::column(&[std::f64::consts::FRAC_1_SQRT_2; 2]))?;
    let imp = way::unitary_implementation(
        &pauli_x(),
        &Observable::new(qubit_space(1), pauli_z())?,
        0.0,
        &linalg::identity(2),
        &Observable::new(b, pauli_z())?,
        probe,
        &otoc::primed(&qubit_space(1)),
    )?;
    out.push(scenario("way-otoc-qubit", "way-otoc", json!({ "scenario": sc, "implementation": imp })));
    Ok(out)
}

/// Write the corpus into `dir` as `<name>.json`.
pub fn write_corpus(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut paths = Vec::new();
    for (name, v) in corpus()? {
        let p = dir.join(format!("{name}.json"));
        write_atomic(&p, &json_bytes(&v))?;
        paths.push(p);
    }
    Ok(paths)
}
