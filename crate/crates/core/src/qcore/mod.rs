//! Linear algebra and quantum primitives shared by every other module.

pub mod channel;
pub mod json;
pub mod linalg;
pub mod metrics;
pub mod random;
pub mod space;
pub mod state;

pub use channel::{BranchState, Instrument, InstrumentBranch, KrausChannel};
pub use linalg::CMat;
pub use metrics::{expectation, fidelity, infidelity_sq, purified_distance, qfi, variance};
pub use space::{HilbertLabel, Space};
pub use state::{DensityMatrix, Observable, Tensor, TestEnsemble};
