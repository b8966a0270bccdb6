//! Forward model and inverse problems for an ensemble of flux qubits loaded
//! into a multimode microwave resonator.
//!
//! * [`model`]: constants and single-qubit / resonator relations
//! * [`semiclassical`]: stationary cavity field and transmission phase
//! * [`lindblad`]: brute-force master-equation steady state for small ensembles
//! * [`estimation`]: least squares, lineshape, spectrum and ensemble fits
//! * [`config`], [`trace`], [`sweep`]: flux sweeps, their configuration and CSV traces
//! * [`scenarios`]: built-in generate-then-fit round trips

pub mod config;
pub mod estimation;
pub mod exec;
pub mod lindblad;
pub mod model;
pub mod scenarios;
pub mod semiclassical;
pub mod sweep;
pub mod trace;
pub mod units;

pub use exec::Execution;
