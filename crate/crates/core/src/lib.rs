//! Tag-system benchmark toolkit: simulation, Turing-machine compilation,
//! instance generation, prompt/transcript handling, scoring and evaluation.

pub mod client;
pub mod generate;
pub mod metrics;
pub mod rng;
pub mod stats;
pub mod tag;
pub mod transcript;
pub mod utm;
