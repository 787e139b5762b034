//! Experiment engine and measure language behind the `pepa` binary, exposed
//! as a library so the test suites can drive them directly.

pub mod experiment;
pub mod measures;
