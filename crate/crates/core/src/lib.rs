//! Z-Bus load flow for unbalanced three-phase distribution feeders with
//! wye and delta ZIP loads, and a contraction certificate for the iteration.

pub mod certificate;
pub mod cli;
pub mod feeder;
pub mod linalg;
pub mod loads;
pub mod network;
pub mod reference;
pub mod report;
pub mod solver;
pub mod system;

pub use certificate::{certify, CertificateResult, ConditionCoefficients};
pub use feeder::{parse_feeder, FeederFile};
pub use loads::{LoadSet, Zip};
pub use network::{ConnectionKind, NetworkModel, Phase};
pub use num_complex::Complex64;
pub use solver::{solve, LambdaChoice, SolveConfig, SolveStatus, SolveTrace};
pub use system::SystemMatrices;
