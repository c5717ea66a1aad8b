//! Random-graph hidden Markov models driven by continuous-time
//! Erdős–Rényi and product-rule percolation.
//!
//! * [`graph`]: mutable simple graphs with component bookkeeping.
//! * [`percolation`]: the latent birth-death chain and exact choice laws.
//! * [`kernel`]: exact transition matrices for graphs of at most four vertices.
//! * [`noise`]: the edgewise observation channel.
//! * [`series`]: observed series and their simulation.
//! * [`inference`]: particle filtering, path sampling and EM.
//! * [`model_selection`]: Bayes-factor comparison of the two regimes.
//! * [`segmentation`]: picking rising stretches of a series for testing.

pub mod graph;
pub mod inference;
pub mod kernel;
pub mod model_selection;
pub mod noise;
pub mod numeric;
pub mod params;
pub mod percolation;
pub mod seed;
pub mod segmentation;
pub mod series;

use thiserror::Error;

pub use graph::{DynGraph, Edge, GraphError};
pub use params::{ModelParams, NoiseParams, ParamError, ProcessParams, Regime};
pub use percolation::{Direction, LatentState};
pub use series::{NetworkSeries, SeriesError};

/// Any error raised by this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Kernel(#[from] kernel::KernelError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Inference(#[from] inference::InferenceError),
    #[error(transparent)]
    Selection(#[from] model_selection::SelectionError),
    #[error(transparent)]
    Segment(#[from] segmentation::SegmentError),
}
