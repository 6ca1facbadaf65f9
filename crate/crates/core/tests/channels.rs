mod common;

use common::{channel, state, system, Setup};
use irrevkit::comb::{self, canonical_recovery, pointer_observable, probe_delta_sq, ExtractionConfig, Recovery};
use irrevkit::irrev::{delta_min, delta_sq_with_recovery, delta_with_recovery, petz_recovery, OptimizerConfig};
use irrevkit::qcore::random::seeded;
use irrevkit::qcore::linalg::ket;
use irrevkit::qcore::{KrausChannel, Space, TestEnsemble};
use proptest::prelude::*;
use rand::Rng;

fn probe() -> TestEnsemble {
    TestEnsemble::plus_minus(comb::ANCILLA)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn constructed_channels_are_cptp(seed in any::<u64>(), theta in -1.0f64..1.0) {
        let st = Setup::new(seed);
        prop_assert!(st.meas.channel().validate().is_ok());
        prop_assert!(st.meas.outcome_channel(comb::POINTER).validate().is_ok());
        prop_assert!(canonical_recovery(&pointer_observable(&st.f.0), theta).unwrap().channel.validate().is_ok());
        prop_assert!(canonical_recovery(&st.b_out(), theta).unwrap().channel.validate().is_ok());
        let loss = comb::build_loss_error(&st.rho, &st.a, theta, &st.meas).unwrap().channel;
        prop_assert!(loss.validate().is_ok());
        prop_assert!(petz_recovery(&loss, &probe().average()).unwrap().validate().is_ok());
    }

    #[test]
    fn petz_map_is_cptp_for_random_channels(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let (din, dout) = (rng.random_range(2..=3), rng.random_range(2..=4));
        let k = rng.random_range(1..=3);
        let l = channel(&mut rng, system(din), Space::single("T", dout), k);
        let reference = state(&mut rng, &system(din));
        let petz = petz_recovery(&l, &reference).unwrap();
        prop_assert!(petz.validate().is_ok());
        prop_assert_eq!(petz.in_space(), l.out_space());
    }

    #[test]
    fn probe_irreversibility_even_in_coupling(seed in any::<u64>(), theta in 1e-3f64..0.5) {
        let st = Setup::new(seed);
        let cfg = ExtractionConfig::default();
        let at = |t: f64, rec: &Recovery| {
            let loss = comb::build_loss_disturbance(&st.rho, &st.b, t, &st.meas).unwrap().channel;
            probe_delta_sq(&loss, rec, t, &cfg).unwrap()
        };
        for rec in [Recovery::Canonical { observable: st.b_out() }, Recovery::Optimize] {
            prop_assert!((at(theta, &rec) - at(-theta, &rec)).abs() <= 1e-12);
        }
    }

    #[test]
    fn optimum_below_any_recovery(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let st = Setup::new(seed);
        let loss = comb::build_loss_error(&st.rho, &st.a, 0.4, &st.meas).unwrap().channel;
        let r = delta_min(&loss, &probe(), &OptimizerConfig { restarts: 1, ..OptimizerConfig::default() }).unwrap();
        let petz = petz_recovery(&loss, &probe().average()).unwrap();
        prop_assert!(r.delta <= delta_with_recovery(&loss, &petz, &probe()).unwrap().delta + 1e-9);
        prop_assert_eq!(r.petz_delta.map(|p| r.delta <= p + 1e-9), Some(true));
        for _ in 0..5 {
            let k = rng.random_range(1..=3);
            let other = channel(&mut rng, loss.out_space().clone(), loss.in_space().clone(), k);
            prop_assert!(r.delta_sq() <= delta_sq_with_recovery(&loss, &other, &probe()).unwrap() + 1e-9);
        }
    }
}

#[test]
fn unitary_process_is_reversible() {
    let mut rng = seeded(3);
    let q = Space::single(comb::ANCILLA, 2);
    let u = irrevkit::qcore::random::unitary(&mut rng, 2);
    let l = KrausChannel::unitary(q.clone(), u.clone()).unwrap();
    let back = KrausChannel::unitary(q, u.adjoint()).unwrap();
    assert!(delta_with_recovery(&l, &back, &probe()).unwrap().delta < 1e-7);
    assert!(delta_min(&l, &probe(), &OptimizerConfig::default()).unwrap().delta < 1e-7);
}

#[test]
fn replacement_channel_is_maximally_irreversible() {
    let q = Space::single(comb::ANCILLA, 2);
    let kraus = (0..2).map(|j| ket(2, 0) * ket(2, j).adjoint()).collect();
    let l = KrausChannel::new(q.clone(), q, kraus).unwrap();
    let r = delta_min(&l, &probe(), &OptimizerConfig::default()).unwrap();
    assert!((r.delta_sq() - 0.5).abs() < 1e-7, "{}", r.delta_sq());
}
