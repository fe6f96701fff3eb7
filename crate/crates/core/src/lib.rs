//! Monte Carlo simulation of susceptible / believer / fact-checker hoax
//! spreading on Erdős–Rényi and two-block (minority / majority) networks.

pub mod cli;
pub mod dynamics;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod graph;

pub use dynamics::{
    belief_prob, factcheck_prob, step, tally_neighbors, AgentState, ModelParams, NeighborTally,
    StateVector,
};
pub use engine::{
    derive_seed, ensemble, ensemble_timeseries, ensemble_with_timeseries, exact_state_distribution,
    run_trajectory, seed_initial, EnsembleSpec, EnsembleStats, GraphMode, InitialCondition,
    NetworkSpec, SeedingScope, StateDistribution, Summary, Trajectory,
};
pub use error::{Error, Result};
pub use graph::{
    generate_er, generate_sbm, group_counts, BlockMatrix, Graph, Group, MinorityFraction,
};
