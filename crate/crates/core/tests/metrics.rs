mod common;

use common::{full_rank, observable, state, system};
use irrevkit::comb::fit_even;
use irrevkit::qcore::linalg::expm_i;
use irrevkit::qcore::random::{self, seeded};
use irrevkit::qcore::{fidelity, infidelity_sq, purified_distance, qfi, variance, DensityMatrix};
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fidelity_symmetric_and_bounded(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let s = system(rng.random_range(2..=4));
        let (r, t) = (state(&mut rng, &s), state(&mut rng, &s));
        let f = fidelity(&r, &t).unwrap();
        prop_assert!((f - fidelity(&t, &r).unwrap()).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!((fidelity(&r, &r).unwrap() - 1.0).abs() <= 1e-7);
    }

    #[test]
    fn fidelity_unitarily_invariant(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let s = system(rng.random_range(2..=4));
        let (r, t) = (full_rank(&mut rng, &s), full_rank(&mut rng, &s));
        let u = random::unitary(&mut rng, s.dim());
        let rot = |x: &DensityMatrix| DensityMatrix::new(s.clone(), &u * x.matrix() * u.adjoint()).unwrap();
        prop_assert!((fidelity(&r, &t).unwrap() - fidelity(&rot(&r), &rot(&t)).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn purified_distance_triangle(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let s = system(rng.random_range(2..=4));
        let (r, t, u) = (state(&mut rng, &s), state(&mut rng, &s), state(&mut rng, &s));
        let d = |x: &DensityMatrix, y: &DensityMatrix| purified_distance(x, y).unwrap();
        prop_assert!(d(&r, &u) <= d(&r, &t) + d(&t, &u) + 1e-8);
    }

    #[test]
    fn qfi_of_pure_state_is_four_variances(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let s = system(rng.random_range(2..=4));
        let psi = DensityMatrix::pure(s.clone(), &random::pure(&mut rng, s.dim())).unwrap();
        let x = observable(&mut rng, &s);
        prop_assert!((qfi(&psi, &x).unwrap() - 4.0 * variance(&psi, &x).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn qfi_between_zero_and_four_variances(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let s = system(rng.random_range(2..=4));
        let (r, x) = (state(&mut rng, &s), observable(&mut rng, &s));
        let f = qfi(&r, &x).unwrap();
        prop_assert!(f >= 0.0);
        prop_assert!(f <= 4.0 * variance(&r, &x).unwrap() + 1e-9);
    }

    #[test]
    fn qfi_matches_distance_limit(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let s = system(rng.random_range(2..=4));
        let (r, x) = (full_rank(&mut rng, &s), observable(&mut rng, &s));
        let points: Vec<(f64, f64)> = [1e-2, 5e-3, 2.5e-3, 1.25e-3]
            .iter()
            .map(|&e| {
                let u = expm_i(x.matrix(), e);
                let moved = DensityMatrix::new(s.clone(), &u * r.matrix() * u.adjoint()).unwrap();
                (e, 4.0 * infidelity_sq(&moved, &r).unwrap())
            })
            .collect();
        let limit = fit_even(&points).unwrap().0;
        let f = qfi(&r, &x).unwrap();
        prop_assert!((f - limit).abs() <= 1e-5 * f.max(1e-12), "spectral {} limit {}", f, limit);
    }
}
