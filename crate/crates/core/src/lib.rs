pub mod channels;
pub mod clifford;
pub mod error;
pub mod estimator;
pub mod pauli;
pub mod protocol;
pub mod rng;
pub mod simulator;
