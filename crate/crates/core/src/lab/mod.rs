//! Experiment plumbing: reproducible random streams, random Hamiltonians,
//! experiment runners and their on-disk artifacts.

pub mod experiment;
pub mod generate;
pub mod rng;

pub use generate::{
    generate_random_hamiltonian, generate_random_hamiltonian_exact, AlphaMode, BetaSpec, ExactGrid,
    RandomHamiltonianParams,
};
pub use rng::CounterRng;
pub use experiment::{run_experiment, Artifacts, ExperimentKind, ExperimentSpec, HamiltonianSource, Knobs};
