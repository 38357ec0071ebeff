//! Test-only oracles and generators shared by integration tests.
#![allow(dead_code)]

pub mod cache_oracle;
pub mod fma_oracle;
pub mod programs;
