pub mod assembly;
pub mod basis;
pub mod dump;
pub mod ldlt;
pub mod pml;
pub mod quadrature;
pub mod reconstruct;
pub mod solve;

pub use assembly::{AssemblyOptions, Block, HarmonicSystem};
pub use pml::PmlMap;
pub use reconstruct::{reconstruct_fields, HarmonicSample, Probe};
pub use solve::{solve_all, solve_harmonic, Factorization, HarmonicSolution, HarmonicSolver};
