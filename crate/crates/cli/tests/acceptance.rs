//! End-to-end acceptance suite: one line per criterion, non-zero exit on any failure.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use irrevkit::comb::{extract_epsilon, extract_eta, extract_two_copy, pointer_observable, ExtractionConfig, LossKind, Recovery};
use irrevkit::irrev::{delta_min, OptimizerConfig};
use irrevkit::oracles::{blw_calibration_error_qubit, blw_disturbance_setup, blw_error_setup, lt_error, ozawa_disturbance_sq, ozawa_error_sq, BlochVector, OutcomeFunction};
use irrevkit::otoc::{self, otoc_direct, otoc_iep, otoc_iep_cp, CpNormalization, ScramblingScenario};
use irrevkit::qcore::linalg::{self, c, expm_i, pauli_x, pauli_z, CMat};
use irrevkit::qcore::metrics::{fidelity, infidelity_sq, purified_distance, qfi, variance};
use irrevkit::qcore::random::{self, seeded, SeededRng};
use irrevkit::qcore::{DensityMatrix, Instrument, KrausChannel, Observable, Space, TestEnsemble};
use irrevkit::way;
use irrevkit::{comb, irrev};
use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

struct Instance {
    rho: DensityMatrix,
    a: Observable,
    b: Observable,
    f: OutcomeFunction,
    meas: Instrument,
}

fn instance(seed: u64) -> Instance {
    let mut rng = seeded(seed);
    let d = rng.random_range(2..=4);
    let k = rng.random_range(2..=4);
    let s = Space::single("S", d);
    let rank = rng.random_range(1..=d);
    Instance {
        rho: DensityMatrix::new(s.clone(), random::density(&mut rng, d, rank)).unwrap(),
        a: Observable::new(s.clone(), random::hermitian(&mut rng, d)).unwrap(),
        b: Observable::new(s.clone(), random::hermitian(&mut rng, d)).unwrap(),
        f: OutcomeFunction((0..k).map(|_| rng.random_range(-1.0..1.0)).collect()),
        meas: random::instrument(&mut rng, s, Space::single("S'", d), k).unwrap(),
    }
}

fn corpus() -> Vec<Instance> {
    (0..100).map(|i| instance(1000 + i)).collect()
}

fn primed_b(inst: &Instance) -> Observable {
    inst.b.relabel(Space::single("S'", inst.b.dim())).unwrap()
}

fn ozawa_equivalence(corpus: &[Instance]) -> Outcome {
    let cfg = ExtractionConfig::default();
    let (mut we, mut wd) = (0.0f64, 0.0f64);
    for inst in corpus {
        let rec = Recovery::Canonical { observable: pointer_observable(&inst.f.0) };
        let e = extract_epsilon(&inst.rho, &inst.a, &inst.meas, &rec, &cfg).unwrap().value;
        we = we.max((e - ozawa_error_sq(&inst.rho, &inst.a, &inst.meas, &inst.f).unwrap()).abs());
        let rec = Recovery::Canonical { observable: primed_b(inst) };
        let n = extract_eta(&inst.rho, &inst.b, &inst.meas, &rec, &cfg).unwrap().value;
        wd = wd.max((n - ozawa_disturbance_sq(&inst.rho, &inst.b, &inst.meas).unwrap()).abs());
    }
    outcome(we <= 1e-6 && wd <= 1e-6, format!("max |ε²−oracle| = {we:.2e}, max |η²−oracle| = {wd:.2e} (tol 1e-6)"))
}

fn ordering(corpus: &[Instance]) -> Outcome {
    let cfg = ExtractionConfig::default();
    let mut worst = f64::NEG_INFINITY;
    for inst in corpus {
        let canon = Recovery::Canonical { observable: pointer_observable(&inst.f.0) };
        let c = extract_epsilon(&inst.rho, &inst.a, &inst.meas, &canon, &cfg).unwrap().value;
        let o = extract_epsilon(&inst.rho, &inst.a, &inst.meas, &Recovery::Optimize, &cfg).unwrap().value;
        worst = worst.max(o - c);
        let canon = Recovery::Canonical { observable: primed_b(inst) };
        let c = extract_eta(&inst.rho, &inst.b, &inst.meas, &canon, &cfg).unwrap().value;
        let o = extract_eta(&inst.rho, &inst.b, &inst.meas, &Recovery::Optimize, &cfg).unwrap().value;
        worst = worst.max(o - c);
    }
    let omega = TestEnsemble::plus_minus(comb::ANCILLA);
    let opt = OptimizerConfig { restarts: 0, discrimination_start: false, ..OptimizerConfig::default() };
    let petz_worst = corpus
        .par_iter()
        .map(|inst| {
            let loss = comb::build_loss_error(&inst.rho, &inst.a, 0.3, &inst.meas).unwrap().channel;
            let r = delta_min(&loss, &omega, &opt).unwrap();
            let petz = irrev::delta_with_recovery(&loss, &irrev::petz_recovery(&loss, &omega.average()).unwrap(), &omega).unwrap().delta;
            r.delta - petz
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    outcome(
        worst <= 1e-6 && petz_worst <= 1e-9,
        format!("max(optimized − canonical) = {worst:.2e} (tol 1e-6), max(δ_min − δ_Petz) = {petz_worst:.2e} (tol 1e-9)"),
    )
}

fn lt_inclusion(corpus: &[Instance]) -> Outcome {
    let mut rng = seeded(7);
    let (mut below, mut gap) = (f64::INFINITY, 0.0f64);
    for inst in corpus {
        let lt = lt_error(&inst.rho, &inst.a, &inst.meas).unwrap();
        let k = inst.meas.num_outcomes();
        let best = (0..50)
            .map(|_| OutcomeFunction((0..k).map(|_| rng.random_range(-2.0..2.0)).collect()))
            .map(|f| ozawa_error_sq(&inst.rho, &inst.a, &inst.meas, &f).unwrap())
            .fold(f64::INFINITY, f64::min);
        below = below.min(best - lt.error_sq);
        let at = ozawa_error_sq(&inst.rho, &inst.a, &inst.meas, &lt.outcome_function()).unwrap();
        gap = gap.max((at - lt.error_sq).abs());
    }
    outcome(
        below >= 0.0 && gap <= 1e-8,
        format!("min(best random − LT) = {below:.2e} (≥ 0), |oracle at minimizer − LT| = {gap:.2e} (tol 1e-8)"),
    )
}

fn bloch(v: [f64; 3]) -> BlochVector {
    BlochVector::new(v[0], v[1], v[2]).unwrap()
}

fn blw_calibration() -> Outcome {
    let cfg = ExtractionConfig::default();
    let mut worst = [0.0f64; 2];
    for seed in 0..20 {
        let mut rng = seeded(300 + seed);
        let a = bloch(random::unit_vector3(&mut rng));
        let ap = bloch(random::unit_vector3(&mut rng));
        for (i, (setup, kind)) in [(blw_error_setup(&a, &ap).unwrap(), LossKind::Error), (blw_disturbance_setup(&a, &ap).unwrap(), LossKind::Disturbance)]
            .into_iter()
            .enumerate()
        {
            let expected = blw_calibration_error_qubit(&a, &ap).unwrap().powi(2);
            let rec = Recovery::Canonical { observable: setup.recovery.clone() };
            let v = extract_two_copy(&setup.state, &setup.observable, &setup.instrument, kind, &rec, &cfg).unwrap().value;
            worst[i] = worst[i].max((v - expected).abs());
        }
    }
    outcome(worst[0] <= 1e-6 && worst[1] <= 1e-6, format!("error gap {:.2e}, disturbance gap {:.2e} (tol 1e-6)", worst[0], worst[1]))
}

fn random_state(rng: &mut SeededRng, s: &Space) -> DensityMatrix {
    let d = s.dim();
    let rank = rng.random_range(1..=d);
    DensityMatrix::new(s.clone(), random::density(rng, d, rank)).unwrap()
}

fn hermitian_unitary(rng: &mut SeededRng, d: usize) -> CMat {
    let u = random::unitary(rng, d);
    let signs: Vec<f64> = (0..d).map(|i| if i == 0 || rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    let mut s = linalg::zeros(d, d);
    for (i, v) in signs.iter().enumerate() {
        s[(i, i)] = c(*v, 0.0);
    }
    &u * s * u.adjoint()
}

fn random_scrambling(rng: &mut SeededRng, d: usize, unitary_w: bool, mixed: bool) -> ScramblingScenario {
    let s = Space::single("S", d);
    let o = |m: CMat| Observable::new(s.clone(), m).unwrap();
    let w = if unitary_w { hermitian_unitary(rng, d) } else { random::hermitian(rng, d) };
    let h = random::hermitian(rng, d);
    let v = random::hermitian(rng, d);
    let tau = rng.random_range(0.0..2.0);
    let state = if mixed { None } else { Some(random_state(rng, &s)) };
    ScramblingScenario::new(o(h), o(w), o(v), tau, state).unwrap()
}

fn chain() -> ScramblingScenario {
    ScramblingScenario::new(
        otoc::ising_chain(3, 1.0, 1.0).to_observable().unwrap(),
        otoc::site_pauli(3, 0, 'X').to_observable().unwrap(),
        otoc::site_pauli(3, 2, 'Z').to_observable().unwrap(),
        1.0,
        None,
    )
    .unwrap()
}

fn scrambling_equivalence() -> Outcome {
    let cfg = ExtractionConfig::default();
    let mut scenarios = vec![chain()];
    let mut rng = seeded(500);
    while scenarios.len() < 50 {
        let d = rng.random_range(2..=8);
        scenarios.push(random_scrambling(&mut rng, d, true, false));
    }
    let worst = scenarios.iter().map(|s| (otoc_iep(s, &cfg).unwrap().value - otoc_direct(s).unwrap()).abs()).fold(0.0, f64::max);
    let q = otoc::qubit_space(1);
    let o = |m: CMat| Observable::new(q.clone(), m).unwrap();
    let qubit = ScramblingScenario::new(o(linalg::zeros(2, 2)), o(pauli_x()), o(pauli_z()), 0.0, None).unwrap();
    let exact = (otoc_direct(&qubit).unwrap() - 4.0).abs();
    outcome(worst <= 1e-6 && exact <= 1e-9, format!("max |protocol − direct| = {worst:.2e} (tol 1e-6), |C − 4| = {exact:.2e} (tol 1e-9)"))
}

fn cp_extension() -> Outcome {
    let cfg = ExtractionConfig::default();
    let (mut gap, mut qdev) = (0.0f64, 0.0f64);
    let mut rng = seeded(600);
    for _ in 0..20 {
        let d = rng.random_range(2..=4);
        let s = random_scrambling(&mut rng, d, false, true);
        let r = otoc_iep_cp(&s, &cfg, CpNormalization::SecondMoment).unwrap();
        gap = gap.max((r.iep.value - r.direct_normalized).abs());
        qdev = r.branch_probabilities.iter().fold(qdev, |m, q| m.max((q - 1.0).abs()));
    }
    outcome(gap <= 1e-6 && qdev <= 1e-9, format!("max |protocol − direct| = {gap:.2e} (tol 1e-6), max |q − 1| = {qdev:.2e} (tol 1e-9)"))
}

fn envelope(kind: &str, seed: u64, payload: Value) -> Value {
    json!({ "schema": "irrevkit/1", "kind": kind, "seed": seed, "output": format!("{kind}-{seed}.report.json"), "payload": payload })
}

fn way_corpus(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut files = Vec::new();
    let mut write = |v: Value| {
        let p = dir.join(format!("{}-{}.json", v["kind"].as_str().unwrap(), v["seed"]));
        std::fs::write(&p, serde_json::to_vec_pretty(&v).unwrap()).unwrap();
        files.push(p);
    };
    for seed in 0..50u64 {
        let mut rng = seeded(700 + seed);
        let ds = rng.random_range(2..=3);
        let de = rng.random_range(2..=3);
        let coherent = rng.random_bool(0.5);
        let model = way::random_measurement_model(&mut rng, ds, de, coherent).unwrap();
        let s = Space::single("S", ds);
        let rho = random_state(&mut rng, &s);
        let a = Observable::new(s.clone(), random::hermitian(&mut rng, ds)).unwrap();
        write(envelope(
            "way-error",
            seed,
            json!({ "state": rho, "observable": a, "instrument": model.instrument, "implementation": model.error_impl, "yanase": true }),
        ));
        write(envelope(
            "way-disturbance",
            seed,
            json!({ "state": rho, "observable": a, "instrument": model.instrument, "implementation": model.disturbance_impl }),
        ));

        let d = rng.random_range(2..=4);
        let sc = random_scrambling(&mut rng, d, true, false);
        let w = sc.evolved_w().unwrap();
        let db = rng.random_range(2..=3);
        let b = Space::single("B", db);
        let imp = way::unitary_implementation(
            w.matrix(),
            &Observable::new(sc.space().clone(), random::hermitian(&mut rng, d)).unwrap(),
            rng.random_range(-1.0..1.0),
            &random::unitary(&mut rng, db),
            &Observable::new(b.clone(), random::hermitian(&mut rng, db)).unwrap(),
            random_state(&mut rng, &b),
            &otoc::primed(sc.space()),
        )
        .unwrap();
        write(envelope("way-otoc", seed, json!({ "scenario": sc, "implementation": imp })));
    }
    files
}

fn slacks(report: &Value, out: &mut Vec<f64>) {
    match report {
        Value::Object(m) => {
            if let Some(s) = m.get("slack").and_then(Value::as_f64) {
                out.push(s);
            }
            m.values().for_each(|v| slacks(v, out));
        }
        Value::Array(a) => a.iter().for_each(|v| slacks(v, out)),
        _ => {}
    }
}

fn way_falsification() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let files = way_corpus(dir.path());
    let status = Command::new(env!("CARGO_BIN_EXE_irrevkit")).arg("run").args(&files).output().unwrap();
    let code = status.status.code();
    let mut all = Vec::new();
    for f in &files {
        let rep = f.with_extension("").with_extension("report.json");
        if let Ok(text) = std::fs::read_to_string(&rep) {
            slacks(&serde_json::from_str(&text).unwrap(), &mut all);
        }
    }
    let min = all.iter().copied().fold(f64::INFINITY, f64::min);
    // the exit-code path itself: a check that cannot pass must yield 4
    let strict = dir.path().join("strict.json");
    let qubit = envelope(
        "otoc",
        0,
        json!({ "scenario": serde_json::to_value(chain()).unwrap(), "tolerance": 1e-300 }),
    );
    std::fs::write(&strict, serde_json::to_vec(&qubit).unwrap()).unwrap();
    let failing = Command::new(env!("CARGO_BIN_EXE_irrevkit")).arg("run").arg(&strict).output().unwrap().status.code();
    let expected_bounds = 4 * files.len() / 3;
    outcome(
        code == Some(0) && all.len() >= expected_bounds && min >= -1e-9 && failing == Some(4),
        format!(
            "{} scenarios, {} bounds, min slack {min:.2e} (≥ −1e-9), exit {:?}; failing check exits {:?}",
            files.len(),
            all.len(),
            code,
            failing
        ),
    )
}

fn qfi_limit(rho: &DensityMatrix, x: &Observable) -> f64 {
    let points: Vec<(f64, f64)> = [1e-2, 5e-3, 2.5e-3, 1.25e-3]
        .iter()
        .map(|&e| {
            let u = expm_i(x.matrix(), e);
            let moved = DensityMatrix::new(rho.space().clone(), &u * rho.matrix() * u.adjoint()).unwrap();
            (e, 4.0 * infidelity_sq(&moved, rho).unwrap())
        })
        .collect();
    comb::fit_even(&points).unwrap().0
}

fn qfi_cross_validation() -> Outcome {
    let (mut rel, mut pure_gap) = (0.0f64, 0.0f64);
    for seed in 0..50 {
        let mut rng = seeded(800 + seed);
        let d = rng.random_range(2..=4);
        let s = Space::single("S", d);
        let rho = DensityMatrix::new(s.clone(), random::density(&mut rng, d, d)).unwrap();
        let x = Observable::new(s.clone(), random::hermitian(&mut rng, d)).unwrap();
        let spectral = qfi(&rho, &x).unwrap();
        rel = rel.max((spectral - qfi_limit(&rho, &x)).abs() / spectral.max(1e-12));
        let psi = DensityMatrix::pure(s, &random::pure(&mut rng, d)).unwrap();
        pure_gap = pure_gap.max((qfi(&psi, &x).unwrap() - 4.0 * variance(&psi, &x).unwrap()).abs());
    }
    outcome(rel <= 1e-5 && pure_gap <= 1e-9, format!("max relative gap {rel:.2e} (tol 1e-5), pure-state |F − 4V| = {pure_gap:.2e} (tol 1e-9)"))
}

fn channel_ok(ch: &KrausChannel) -> bool {
    ch.validate().is_ok()
}

fn metric_properties(corpus: &[Instance]) -> Outcome {
    let mut rng = seeded(900);
    let (mut asym, mut tri) = (0.0f64, f64::NEG_INFINITY);
    for _ in 0..100 {
        let d = rng.random_range(2..=4);
        let s = Space::single("S", d);
        let mut st = || {
            let rank = rng.random_range(1..=d);
            DensityMatrix::new(s.clone(), random::density(&mut rng, d, rank)).unwrap()
        };
        let (r, t, u) = (st(), st(), st());
        asym = asym.max((fidelity(&r, &t).unwrap() - fidelity(&t, &r).unwrap()).abs());
        let lhs = purified_distance(&r, &u).unwrap();
        let rhs = purified_distance(&r, &t).unwrap() + purified_distance(&t, &u).unwrap();
        tri = tri.max(lhs - rhs);
    }
    let mut bad = 0;
    let mut checked = 0;
    let omega = TestEnsemble::plus_minus(comb::ANCILLA);
    for inst in corpus.iter().take(30) {
        let mut chans = vec![inst.meas.channel(), inst.meas.outcome_channel(comb::POINTER)];
        for theta in [0.5, 1e-2] {
            chans.push(comb::canonical_recovery(&pointer_observable(&inst.f.0), theta).unwrap().channel);
            chans.push(comb::canonical_recovery(&primed_b(inst), theta).unwrap().channel);
            let loss = comb::build_loss_disturbance(&inst.rho, &inst.b, theta, &inst.meas).unwrap().channel;
            chans.push(irrev::petz_recovery(&loss, &omega.average()).unwrap());
            chans.push(loss);
        }
        checked += chans.len();
        bad += chans.iter().filter(|c| !channel_ok(c)).count();
    }
    outcome(
        asym <= 1e-10 && tri <= 1e-8 && bad == 0,
        format!("fidelity asymmetry {asym:.2e}, triangle excess {tri:.2e} (tol 1e-8), {bad}/{checked} channels fail CPTP validation"),
    )
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn main() {
    let corpus = corpus();
    let criteria: Vec<Criterion> = vec![
        ("error/disturbance oracle equivalence", Box::new(|| ozawa_equivalence(&corpus))),
        ("recovery ordering", Box::new(|| ordering(&corpus))),
        ("least-squares inclusion", Box::new(|| lt_inclusion(&corpus))),
        ("qubit calibration error", Box::new(blw_calibration)),
        ("scrambling equals irreversibility", Box::new(scrambling_equivalence)),
        ("non-unitary scrambling operators", Box::new(cp_extension)),
        ("conservation-law bounds via CLI", Box::new(way_falsification)),
        ("Fisher information cross-validation", Box::new(qfi_cross_validation)),
        ("metric and channel validity", Box::new(|| metric_properties(&corpus))),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let status = if o.passed { "PASS" } else { "FAIL" };
        println!("criterion {} [{status}] {name}: {} ({:.1}s)", i + 1, o.detail, start.elapsed().as_secs_f64());
        failed += usize::from(!o.passed);
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
