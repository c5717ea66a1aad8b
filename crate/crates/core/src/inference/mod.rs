//! Parameter estimation for the hidden percolation model.

pub mod em;
pub mod mcmc;
pub mod particle;
pub mod path;

use thiserror::Error;

use crate::graph::GraphError;
use crate::series::SeriesError;

pub use em::{accumulate_stats, em_fit, m_step, EmConfig, EmFit, IterationRecord, SegmentPaths, SufficientStats};
pub use mcmc::{mcmc_path_sampler, McmcConfig, McmcError};
pub use particle::{draw_ancestral_lines, particle_filter, run_filter, FilterRun, ParticleCloud};
pub use path::{path_pmf_log, path_stats, PathError, PathStats, PathStep, SamplePath};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferenceError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("all particle weights vanished")]
    DegenerateWeights,
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Mcmc(#[from] McmcError),
}
