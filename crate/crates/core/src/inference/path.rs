//! Sample paths between latent states and their probability mass.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{DynGraph, Edge, GraphError};
use crate::numeric::ln_factorial;
use crate::params::{ProcessParams, Regime};
use crate::percolation::{edge_choice_prob, h_prob, h_term, Direction, LatentState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathError {
    #[error("step {step} changes {edge} in the wrong direction")]
    Infeasible { step: usize, edge: Edge },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathStep {
    pub direction: Direction,
    pub edge: Edge,
}

/// Ordered single-edge changes applied at the jump times of one interval.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SamplePath {
    steps: Vec<PathStep>,
}

impl SamplePath {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Checks that every step is applicable to the graph it meets.
    pub fn new(start: &DynGraph, steps: Vec<PathStep>) -> Result<Self, PathError> {
        let path = Self { steps };
        path.replay_graph(start)?;
        Ok(path)
    }

    /// Path that toggles `edges` in order, directions implied by `start`.
    pub fn from_toggles(start: &DynGraph, edges: &[Edge]) -> Result<Self, PathError> {
        let mut g = start.clone();
        let mut steps = Vec::with_capacity(edges.len());
        for &edge in edges {
            let added = g.toggle(edge)?;
            steps.push(PathStep {
                direction: Direction::from_bit(added),
                edge,
            });
        }
        Ok(Self { steps })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[PathStep] {
        &self.steps
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.steps.iter().map(|s| s.edge)
    }

    fn replay_graph(&self, start: &DynGraph) -> Result<DynGraph, PathError> {
        let mut g = start.clone();
        for (step, s) in self.steps.iter().enumerate() {
            apply(&mut g, *s, step)?;
        }
        Ok(g)
    }

    /// State reached by applying the path to `start`.
    pub fn replay(&self, start: &LatentState) -> Result<LatentState, PathError> {
        let graph = self.replay_graph(&start.graph)?;
        let direction = self.steps.last().map_or(start.direction, |s| s.direction);
        Ok(LatentState::new(direction, graph))
    }

    pub fn connects(&self, start: &LatentState, end: &LatentState) -> Result<bool, PathError> {
        Ok(&self.replay(start)? == end)
    }
}

fn apply(g: &mut DynGraph, s: PathStep, step: usize) -> Result<(), PathError> {
    let ok = match s.direction {
        Direction::Add => !g.has_edge(s.edge),
        Direction::Delete => g.has_edge(s.edge),
    };
    if !ok {
        return Err(PathError::Infeasible { step, edge: s.edge });
    }
    g.toggle(s.edge)?;
    Ok(())
}

/// `ln[e^{-γd} (γd)^R / R!] + Σ_r [ln h + ln g]` for a path over an interval
/// of length `duration`.
pub fn path_pmf_log(
    path: &SamplePath,
    start: &LatentState,
    duration: f64,
    params: &ProcessParams,
    regime: Regime,
) -> Result<f64, PathError> {
    let mean = params.gamma * duration;
    let r = path.len();
    let mut total = if r == 0 {
        -mean
    } else {
        -mean + r as f64 * mean.ln() - ln_factorial(r)
    };
    let mut g = start.graph.clone();
    let mut w = start.direction;
    for (step, s) in path.steps.iter().enumerate() {
        total += h_prob(s.direction, &g, w, params).ln();
        total += edge_choice_prob(regime, &g, s.direction, s.edge).ln();
        apply(&mut g, *s, step)?;
        w = s.direction;
    }
    Ok(total)
}

/// Transition counts of one path.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PathStats {
    pub transitions: u64,
    /// Steps taken from direction 0 out of a graph that is neither empty
    /// nor complete.
    pub from_delete: u64,
    /// Of those, steps that switched to direction 1.
    pub births: u64,
    pub from_add: u64,
    pub deaths: u64,
}

pub fn path_stats(path: &SamplePath, start: &LatentState) -> Result<PathStats, PathError> {
    let mut stats = PathStats {
        transitions: path.len() as u64,
        ..PathStats::default()
    };
    let mut g = start.graph.clone();
    let mut w = start.direction;
    for (step, s) in path.steps.iter().enumerate() {
        if !h_term(s.direction, &g, w).is_forced() {
            match (w, s.direction) {
                (Direction::Delete, Direction::Add) => {
                    stats.from_delete += 1;
                    stats.births += 1;
                }
                (Direction::Delete, Direction::Delete) => stats.from_delete += 1,
                (Direction::Add, Direction::Delete) => {
                    stats.from_add += 1;
                    stats.deaths += 1;
                }
                (Direction::Add, Direction::Add) => stats.from_add += 1,
            }
        }
        apply(&mut g, *s, step)?;
        w = s.direction;
    }
    Ok(stats)
}
