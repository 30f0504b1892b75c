//! Temporal point processes for sparse events in dense streams.

pub mod classical;
pub mod data;
pub mod markov;
pub mod metrics;
pub mod neural;
pub mod numerics;
pub mod pipeline;
pub mod tpm;
