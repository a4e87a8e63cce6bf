//! Driver-side machinery for the command-line tool: sweeps, probes, the
//! closed-form comparison, and the built-in verification suite.

pub mod compare;
pub mod probe;
pub mod selftest;
pub mod sweep;
