//! Observed network time series and their simulation.

use rand::Rng;
use thiserror::Error;

use crate::graph::{DynGraph, GraphError};
use crate::noise::corrupt;
use crate::params::{NoiseParams, ProcessParams, Regime};
use crate::percolation::{simulate_interval, Direction, LatentState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeriesError {
    #[error("a series needs at least one snapshot")]
    Empty,
    #[error("times and snapshots differ in length ({times} vs {snapshots})")]
    LengthMismatch { times: usize, snapshots: usize },
    #[error("time at index {index} is not finite")]
    NonFiniteTime { index: usize },
    #[error("times must be strictly increasing (index {index})")]
    NotIncreasing { index: usize },
    #[error("snapshot {index} has {found} vertices, expected {expected}")]
    VertexMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("need at least {needed} snapshots, got {found}")]
    TooShort { needed: usize, found: usize },
    #[error("observation rate must be positive, got {0}")]
    BadRate(f64),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Snapshots `g*(t_1), ..., g*(t_M)` of a common vertex set.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSeries {
    times: Vec<f64>,
    snapshots: Vec<DynGraph>,
}

impl NetworkSeries {
    pub fn new(times: Vec<f64>, snapshots: Vec<DynGraph>) -> Result<Self, SeriesError> {
        if times.len() != snapshots.len() {
            return Err(SeriesError::LengthMismatch {
                times: times.len(),
                snapshots: snapshots.len(),
            });
        }
        if times.is_empty() {
            return Err(SeriesError::Empty);
        }
        for (index, t) in times.iter().enumerate() {
            if !t.is_finite() {
                return Err(SeriesError::NonFiniteTime { index });
            }
            if index > 0 && *t <= times[index - 1] {
                return Err(SeriesError::NotIncreasing { index });
            }
        }
        let expected = snapshots[0].n();
        for (index, g) in snapshots.iter().enumerate() {
            if g.n() != expected {
                return Err(SeriesError::VertexMismatch {
                    index,
                    expected,
                    found: g.n(),
                });
            }
        }
        Ok(Self { times, snapshots })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n(&self) -> usize {
        self.snapshots[0].n()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn snapshots(&self) -> &[DynGraph] {
        &self.snapshots
    }

    pub fn snapshot(&self, m: usize) -> &DynGraph {
        &self.snapshots[m]
    }

    /// `t_M - t_1`.
    pub fn duration(&self) -> f64 {
        self.times[self.len() - 1] - self.times[0]
    }

    /// Gap before observation `m` (`m >= 1`).
    pub fn gap(&self, m: usize) -> f64 {
        self.times[m] - self.times[m - 1]
    }

    pub fn require_len(&self, needed: usize) -> Result<(), SeriesError> {
        if self.len() < needed {
            Err(SeriesError::TooShort {
                needed,
                found: self.len(),
            })
        } else {
            Ok(())
        }
    }

    /// Snapshots `first..=last` as a new series.
    pub fn slice(&self, first: usize, last: usize) -> Result<Self, SeriesError> {
        if first > last || last >= self.len() {
            return Err(SeriesError::TooShort {
                needed: last + 1,
                found: self.len(),
            });
        }
        Self::new(
            self.times[first..=last].to_vec(),
            self.snapshots[first..=last].to_vec(),
        )
    }

    pub fn gcc_curve(&self) -> Vec<f64> {
        self.snapshots.iter().map(DynGraph::gcc_fraction).collect()
    }

    pub fn density_curve(&self) -> Vec<f64> {
        self.snapshots.iter().map(DynGraph::density).collect()
    }
}

/// A simulated series together with the hidden states behind it.
#[derive(Debug, Clone)]
pub struct SimulatedSeries {
    pub series: NetworkSeries,
    pub latent: Vec<LatentState>,
    pub transitions: Vec<usize>,
}

/// Observation times `t_m = m / kappa`, `m = 1..=count`.
pub fn observation_times(kappa: f64, count: usize) -> Result<Vec<f64>, SeriesError> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(SeriesError::BadRate(kappa));
    }
    Ok((1..=count).map(|m| m as f64 / kappa).collect())
}

/// Runs the latent chain from `(add, init)` at `t_1` and observes it at
/// `t_m = m / kappa`. The first snapshot is the exact initial graph; later
/// ones pass through the noise channel.
pub fn simulate_series<R: Rng + ?Sized>(
    regime: Regime,
    init: DynGraph,
    process: &ProcessParams,
    noise: &NoiseParams,
    kappa: f64,
    count: usize,
    rng: &mut R,
) -> Result<SimulatedSeries, SeriesError> {
    if count == 0 {
        return Err(SeriesError::Empty);
    }
    let times = observation_times(kappa, count)?;
    let mut state = LatentState::new(Direction::Add, init);
    let mut latent = vec![state.clone()];
    let mut snapshots = vec![state.graph.clone()];
    let mut transitions = Vec::with_capacity(count.saturating_sub(1));
    for m in 1..count {
        let out = simulate_interval(&mut state, times[m] - times[m - 1], regime, process, rng, false)?;
        transitions.push(out.transitions);
        snapshots.push(corrupt(&state.graph, noise, rng));
        latent.push(state.clone());
    }
    Ok(SimulatedSeries {
        series: NetworkSeries::new(times, snapshots)?,
        latent,
        transitions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    #[test]
    fn validates_times_and_sizes() {
        let g = DynGraph::empty(3).unwrap();
        let h = DynGraph::empty(4).unwrap();
        assert!(matches!(
            NetworkSeries::new(vec![1.0, 1.0], vec![g.clone(), g.clone()]),
            Err(SeriesError::NotIncreasing { index: 1 })
        ));
        assert!(matches!(
            NetworkSeries::new(vec![1.0, 2.0], vec![g.clone(), h]),
            Err(SeriesError::VertexMismatch { index: 1, .. })
        ));
        assert!(matches!(NetworkSeries::new(vec![], vec![]), Err(SeriesError::Empty)));
        assert!(NetworkSeries::new(vec![1.0], vec![g]).is_ok());
    }

    #[test]
    fn single_snapshot_is_initial_graph() {
        let mut rng = rng_from_seed(1);
        let init = DynGraph::from_edges(5, [(0, 1)]).unwrap();
        let p = ProcessParams::new(0.7, 0.3, 2.0).unwrap();
        let noise = NoiseParams::new(0.3, 0.3).unwrap();
        let s = simulate_series(Regime::Er, init.clone(), &p, &noise, 0.6, 1, &mut rng).unwrap();
        assert_eq!(s.series.len(), 1);
        assert_eq!(s.series.snapshot(0), &init);
    }

    #[test]
    fn timestamps_follow_rate() {
        let mut rng = rng_from_seed(2);
        let p = ProcessParams::new(0.7, 0.3, 2.0).unwrap();
        let noise = NoiseParams::new(0.03, 0.01).unwrap();
        let s = simulate_series(Regime::Pr, DynGraph::empty(6).unwrap(), &p, &noise, 0.6, 50, &mut rng).unwrap();
        let t = s.series.times();
        assert_eq!(t.len(), 50);
        assert!((t[0] - 1.0 / 0.6).abs() < 1e-12);
        assert!((t[49] - 50.0 / 0.6).abs() < 1e-12);
        assert_eq!(s.latent.len(), 50);
        assert_eq!(s.transitions.len(), 49);
    }

    #[test]
    fn noiseless_snapshots_equal_latent_graphs() {
        let mut rng = rng_from_seed(3);
        let p = ProcessParams::new(0.6, 0.4, 3.0).unwrap();
        let s = simulate_series(
            Regime::Er,
            DynGraph::empty(7).unwrap(),
            &p,
            &NoiseParams::noiseless(),
            1.0,
            10,
            &mut rng,
        )
        .unwrap();
        for (g, x) in s.series.snapshots().iter().zip(&s.latent) {
            assert_eq!(g, &x.graph);
        }
    }
}
