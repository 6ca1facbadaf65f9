mod common;

use common::Setup;
use irrevkit::comb::{extract_epsilon, extract_eta, extract_two_copy, pointer_observable, ExtractionConfig, ExtractionMethod, LossKind, Recovery};
use irrevkit::oracles::{
    blw_calibration_error_qubit, blw_disturbance_setup, blw_error_setup, lt_disturbance, lt_disturbance_sq_for, lt_error, ozawa_disturbance_sq, ozawa_error_sq,
    BlochVector, OutcomeFunction,
};
use irrevkit::qcore::random::{self, seeded};
use irrevkit::qcore::Observable;
use proptest::prelude::*;
use rand::Rng;

fn analytic() -> ExtractionConfig {
    ExtractionConfig { method: ExtractionMethod::Analytic, ..ExtractionConfig::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn protocol_reproduces_closed_forms(seed in any::<u64>()) {
        let st = Setup::new(seed);
        let cfg = ExtractionConfig::default();
        let rec = Recovery::Canonical { observable: pointer_observable(&st.f.0) };
        let oracle = ozawa_error_sq(&st.rho, &st.a, &st.meas, &st.f).unwrap();
        prop_assert!((extract_epsilon(&st.rho, &st.a, &st.meas, &rec, &cfg).unwrap().value - oracle).abs() <= 1e-6);
        prop_assert!((extract_epsilon(&st.rho, &st.a, &st.meas, &rec, &analytic()).unwrap().value - oracle).abs() <= 1e-10);
        let rec = Recovery::Canonical { observable: st.b_out() };
        let oracle = ozawa_disturbance_sq(&st.rho, &st.b, &st.meas).unwrap();
        prop_assert!((extract_eta(&st.rho, &st.b, &st.meas, &rec, &cfg).unwrap().value - oracle).abs() <= 1e-6);
        prop_assert!((extract_eta(&st.rho, &st.b, &st.meas, &rec, &analytic()).unwrap().value - oracle).abs() <= 1e-10);
    }

    #[test]
    fn optimized_recovery_never_worse(seed in any::<u64>()) {
        let st = Setup::new(seed);
        let cfg = ExtractionConfig::default();
        let canon = Recovery::Canonical { observable: pointer_observable(&st.f.0) };
        let c = extract_epsilon(&st.rho, &st.a, &st.meas, &canon, &cfg).unwrap().value;
        prop_assert!(extract_epsilon(&st.rho, &st.a, &st.meas, &Recovery::Optimize, &cfg).unwrap().value <= c + 1e-6);
        let canon = Recovery::Canonical { observable: st.b_out() };
        let c = extract_eta(&st.rho, &st.b, &st.meas, &canon, &cfg).unwrap().value;
        prop_assert!(extract_eta(&st.rho, &st.b, &st.meas, &Recovery::Optimize, &cfg).unwrap().value <= c + 1e-6);
    }

    #[test]
    fn least_squares_error_is_the_minimum(seed in any::<u64>()) {
        let st = Setup::new(seed);
        let mut rng = seeded(seed ^ 0x5eed);
        let lt = lt_error(&st.rho, &st.a, &st.meas).unwrap();
        let k = st.meas.num_outcomes();
        for _ in 0..20 {
            let f = OutcomeFunction((0..k).map(|_| rng.random_range(-2.0..2.0)).collect());
            let v = ozawa_error_sq(&st.rho, &st.a, &st.meas, &f).unwrap();
            prop_assert!(v >= lt.error_sq - 1e-12);
            // the excess is exactly the weighted distance to the minimizer
            prop_assert!((v - lt.error_sq - lt.gap(&f)).abs() <= 1e-10);
        }
        prop_assert!((ozawa_error_sq(&st.rho, &st.a, &st.meas, &lt.outcome_function()).unwrap() - lt.error_sq).abs() <= 1e-8);
    }

    #[test]
    fn least_squares_disturbance_is_the_minimum(seed in any::<u64>()) {
        let st = Setup::new(seed);
        let mut rng = seeded(seed ^ 0xd157);
        let lt = lt_disturbance(&st.rho, &st.b, &st.meas).unwrap();
        prop_assert!(lt.disturbance_sq <= ozawa_disturbance_sq(&st.rho, &st.b, &st.meas).unwrap() + 1e-10);
        let out = st.meas.out_space().clone();
        for _ in 0..10 {
            let x = Observable::new(out.clone(), random::hermitian(&mut rng, out.dim())).unwrap();
            prop_assert!(lt_disturbance_sq_for(&st.rho, &st.b, &st.meas, &x).unwrap() >= lt.disturbance_sq - 1e-10);
        }
        let canon = Recovery::Canonical { observable: lt.minimizer.clone() };
        let v = extract_eta(&st.rho, &st.b, &st.meas, &canon, &analytic()).unwrap().value;
        prop_assert!((v - lt.disturbance_sq).abs() <= 1e-8);
    }

    #[test]
    fn qubit_calibration_matches_two_copy_protocol(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let u = random::unit_vector3(&mut rng);
        let a = BlochVector::new(u[0], u[1], u[2]).unwrap();
        let n = random::unit_vector3(&mut rng);
        let len: f64 = rng.random_range(0.0..1.0);
        let ap = BlochVector::new(len * n[0], len * n[1], len * n[2]).unwrap();
        let expected = blw_calibration_error_qubit(&a, &ap).unwrap().powi(2);
        let cfg = ExtractionConfig::default();
        for (setup, kind) in [(blw_error_setup(&a, &ap).unwrap(), LossKind::Error), (blw_disturbance_setup(&a, &ap).unwrap(), LossKind::Disturbance)] {
            prop_assert!((setup.expected - expected).abs() <= 1e-12);
            let rec = Recovery::Canonical { observable: setup.recovery.clone() };
            let v = extract_two_copy(&setup.state, &setup.observable, &setup.instrument, kind, &rec, &cfg).unwrap().value;
            prop_assert!((v - expected).abs() <= 1e-6, "{:?}: {} vs {}", kind, v, expected);
        }
    }
}
