//! Mean-field construction for the quantum Duffing oscillator
//! H = p^2/2m + m omega^2 q^2/2 + m lambda q^4/4 (hbar = 1), with every
//! piece checked against independent brute-force oracles:
//!
//! * [`fock`] - exact normal-ordered operator algebra for one bosonic mode
//!   and its truncated matrix realization;
//! * [`meanfield`] - the gap cubic Omega^3 - omega^2 Omega - 3 lambda/2m = 0,
//!   mode functions, mean energy, and the mean-field equation residual;
//! * [`coeff_flow`] - the 4x4 coefficient flow of the cubic generator, its
//!   constant-coefficient reduction, eigenvalue sweeps and the critical
//!   coupling alpha_c;
//! * [`forge`] - the sector split H = H2 + m lambda H4 + E0, the perturbed
//!   generators A, Adag, Liouville-residual diagnostics, and the density
//!   operator exp(-Omega0 Adag A) with its non-Gaussianity report;
//! * [`oracle`] - dense exact diagonalization in the bare basis, Heisenberg
//!   evolution, and the classical Duffing frequency;
//! * [`verify`] - the named check suites driven by the CLI.

pub mod coeff_flow;
pub mod error;
pub mod fock;
pub mod forge;
pub mod jsonfmt;
pub mod linalg;
pub mod meanfield;
pub mod oracle;
pub mod verify;

pub use coeff_flow::{CoeffSystem, CoeffVector, Mode, StabilityReport};
pub use error::{CoreError, Result};
pub use fock::{FockMatrix, NoPoly};
pub use forge::{DensitySpec, GeneratorPair, SectorSplit};
pub use meanfield::{Convention, MeanFieldSolution, ModeValues, PhysParams};
pub use oracle::{ClassicalRun, SpectrumResult};
