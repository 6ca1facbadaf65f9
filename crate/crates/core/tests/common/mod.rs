#![allow(dead_code)]

use irrevkit::oracles::OutcomeFunction;
use irrevkit::qcore::random::{self, seeded, SeededRng};
use irrevkit::qcore::{DensityMatrix, Instrument, KrausChannel, Observable, Space};
use rand::Rng;

pub fn system(d: usize) -> Space {
    Space::single("S", d)
}

pub fn state(rng: &mut SeededRng, s: &Space) -> DensityMatrix {
    let d = s.dim();
    let rank = rng.random_range(1..=d);
    DensityMatrix::new(s.clone(), random::density(rng, d, rank)).unwrap()
}

pub fn full_rank(rng: &mut SeededRng, s: &Space) -> DensityMatrix {
    DensityMatrix::new(s.clone(), random::density(rng, s.dim(), s.dim())).unwrap()
}

pub fn observable(rng: &mut SeededRng, s: &Space) -> Observable {
    Observable::new(s.clone(), random::hermitian(rng, s.dim())).unwrap()
}

/// Channel from a Haar isometry split into `k` Kraus operators (at least
/// enough of them to fit the input).
pub fn channel(rng: &mut SeededRng, input: Space, output: Space, k: usize) -> KrausChannel {
    let (din, dout) = (input.dim(), output.dim());
    let k = k.max(din.div_ceil(dout));
    let v = random::isometry(rng, dout * k, din);
    let kraus = (0..k).map(|i| v.rows(i * dout, dout).into_owned()).collect();
    KrausChannel::new(input, output, kraus).unwrap()
}

/// A measurement on S with a random state, observables and outcome function.
pub struct Setup {
    pub rho: DensityMatrix,
    pub a: Observable,
    pub b: Observable,
    pub f: OutcomeFunction,
    pub meas: Instrument,
}

impl Setup {
    pub fn new(seed: u64) -> Self {
        let mut rng = seeded(seed);
        let d = rng.random_range(2..=3);
        let k = rng.random_range(2..=3);
        let s = system(d);
        Setup {
            rho: state(&mut rng, &s),
            a: observable(&mut rng, &s),
            b: observable(&mut rng, &s),
            f: OutcomeFunction((0..k).map(|_| rng.random_range(-1.0..1.0)).collect()),
            meas: random::instrument(&mut rng, s, Space::single("S'", d), k).unwrap(),
        }
    }

    pub fn b_out(&self) -> Observable {
        self.b.relabel(Space::single("S'", self.b.dim())).unwrap()
    }
}
