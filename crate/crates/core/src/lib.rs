//! RV64 ML-inference evaluator: ISA model, timing models, caches, tensor
//! compiler and benchmark harness.

pub mod harness;
pub mod isa;
pub mod loader;
pub mod memhier;
pub mod tensorc;
pub mod uarch;
