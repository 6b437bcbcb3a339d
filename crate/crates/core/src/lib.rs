//! High-resolution range profile synthesis for stepped-frequency radar with
//! sparsely retained pulses, under a geometric theory of diffraction (GTD)
//! scattering model.
//!
//! The crate builds the multi-mechanism GTD dictionary, designs sensing
//! dictionaries that suppress inter-atom interference, recovers sparse
//! scatterer sets with greedy solvers, and runs Monte Carlo benchmarks.

pub mod bench;
pub mod coherence;
pub mod config;
pub mod error;
pub mod gtd;
pub mod numerics;
pub mod sd_design;
pub mod solvers;

pub use error::{Error, Result};
pub use numerics::{ComplexMatrix, ComplexVector, C64};
pub use bench::{aggregate, run_trial, Bench, BenchReport, TrialResult};
pub use config::{Algorithm, ExperimentConfig, SuccessRule};
pub use gtd::{build_dictionary, Dictionary, Scenario, Snr, Target};
pub use sd_design::{design_sd, evaluate_sd, DesignMode, DesignOptions, SensingDictionary};
pub use solvers::{a_omp, omp, omp_sd, reconstruct_srp, SolverOptions, SparseSolution, Srp};
