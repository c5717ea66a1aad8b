//! Metropolis-Hastings sampler over sample paths with fixed endpoints.
//!
//! A path is held as its sequence of toggled edges; directions follow from
//! the start graph. Toggle sequences always have positive mass, so the only
//! constraint besides the end graph (fixed by per-edge toggle parity, which
//! every move preserves) is that the last change has the end direction.
//!
//! Moves, chosen uniformly among those available:
//! * paired insertion: a uniform pair and two uniform positions `i < j`
//!   in the lengthened sequence;
//! * paired deletion: a uniform pair of positions toggling the same edge;
//! * transposition of two uniform positions (needs `R >= 2`).

use rand::Rng;
use thiserror::Error;

use super::path::{path_pmf_log, PathError, SamplePath};
use crate::graph::{pair_at, pair_index, Edge, GraphError};
use crate::params::{ProcessParams, Regime};
use crate::percolation::{Direction, LatentState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McmcError {
    #[error("invalid sampler settings: {0}")]
    InvalidConfig(String),
    #[error("end state is unreachable from the start state")]
    Unreachable,
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McmcConfig {
    pub samples: usize,
    /// Proposals discarded before the first sample; `None` means
    /// `10 * (initial length + 1)`.
    pub burn_in: Option<usize>,
    /// Proposals between retained samples.
    pub thin: usize,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            samples: 10,
            burn_in: None,
            thin: 5,
        }
    }
}

/// Deterministic feasible path: differing pairs in lexicographic order,
/// followed by an offsetting pair on the smallest eligible edge if the
/// final direction would otherwise be wrong.
pub fn initial_path(start: &LatentState, end: &LatentState) -> Result<Vec<Edge>, McmcError> {
    if start.graph.n() != end.graph.n() {
        return Err(GraphError::SizeMismatch {
            left: start.graph.n(),
            right: end.graph.n(),
        }
        .into());
    }
    let n = start.graph.n();
    let mut edges: Vec<Edge> = (0..start.graph.pair_count())
        .map(|k| pair_at(n, k))
        .filter(|&e| start.graph.has_edge(e) != end.graph.has_edge(e))
        .collect();
    let last = edges
        .last()
        .map(|&e| Direction::from_bit(end.graph.has_edge(e)))
        .unwrap_or(start.direction);
    if last != end.direction {
        // Deleting then re-adding an edge of the end graph finishes with an
        // addition; adding then deleting a non-edge finishes with a deletion.
        let want_edge = end.direction == Direction::Add;
        let extra = (0..end.graph.pair_count())
            .map(|k| pair_at(n, k))
            .find(|&e| end.graph.has_edge(e) == want_edge)
            .ok_or(McmcError::Unreachable)?;
        edges.push(extra);
        edges.push(extra);
    }
    Ok(edges)
}

struct Chain<'a> {
    start: &'a LatentState,
    end_direction: Direction,
    duration: f64,
    params: &'a ProcessParams,
    regime: Regime,
    n: usize,
    pairs: usize,
    edges: Vec<Edge>,
    counts: Vec<u32>,
    log_target: f64,
}

impl<'a> Chain<'a> {
    fn log_target(&self, edges: &[Edge]) -> Result<Option<f64>, McmcError> {
        let path = SamplePath::from_toggles(&self.start.graph, edges)?;
        let last = path.steps().last().map_or(self.start.direction, |s| s.direction);
        if last != self.end_direction {
            return Ok(None);
        }
        Ok(Some(path_pmf_log(&path, self.start, self.duration, self.params, self.regime)?))
    }

    fn same_edge_pairs(counts: &[u32]) -> u64 {
        counts.iter().map(|&c| u64::from(c) * u64::from(c.saturating_sub(1)) / 2).sum()
    }

    fn move_types(len: usize, same_pairs: u64) -> u32 {
        1 + u32::from(same_pairs > 0) + u32::from(len >= 2)
    }

    fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(), McmcError> {
        let r = self.edges.len();
        let d_now = Self::same_edge_pairs(&self.counts);
        let k_now = Self::move_types(r, d_now);
        let mut kinds = vec![0u8];
        if d_now > 0 {
            kinds.push(1);
        }
        if r >= 2 {
            kinds.push(2);
        }
        let kind = kinds[rng.random_range(0..kinds.len())];
        let mut proposal = self.edges.clone();
        let mut counts = self.counts.clone();
        let log_q_ratio = match kind {
            0 => {
                let k = rng.random_range(0..self.pairs);
                let e = pair_at(self.n, k);
                let (i, j) = two_positions(r + 2, rng);
                proposal.insert(i, e);
                proposal.insert(j, e);
                counts[k] += 2;
                let d_new = Self::same_edge_pairs(&counts);
                let k_new = Self::move_types(r + 2, d_new);
                let slots = ((r + 2) * (r + 1) / 2) as f64;
                (f64::from(k_now) / f64::from(k_new)).ln() + (self.pairs as f64 * slots / d_new as f64).ln()
            }
            1 => {
                let (i, j) = self.pick_same_edge_pair(d_now, rng);
                let e = proposal[i];
                proposal.remove(j);
                proposal.remove(i);
                counts[pair_index(self.n, e)] -= 2;
                let d_new = Self::same_edge_pairs(&counts);
                let k_new = Self::move_types(r - 2, d_new);
                let slots = (r * (r - 1) / 2) as f64;
                (f64::from(k_now) / f64::from(k_new)).ln() + (d_now as f64 / (self.pairs as f64 * slots)).ln()
            }
            _ => {
                let (i, j) = two_positions(r, rng);
                proposal.swap(i, j);
                0.0
            }
        };
        if let Some(log_new) = self.log_target(&proposal)? {
            let log_accept = log_new - self.log_target + log_q_ratio;
            if log_accept >= 0.0 || rng.random::<f64>().ln() < log_accept {
                self.edges = proposal;
                self.counts = counts;
                self.log_target = log_new;
            }
        }
        Ok(())
    }

    /// Uniform pair of positions `i < j` holding the same edge.
    fn pick_same_edge_pair<R: Rng + ?Sized>(&self, total: u64, rng: &mut R) -> (usize, usize) {
        let mut target = rng.random_range(0..total);
        let mut chosen = 0;
        for (k, &c) in self.counts.iter().enumerate() {
            let here = u64::from(c) * u64::from(c.saturating_sub(1)) / 2;
            if target < here {
                chosen = k;
                break;
            }
            target -= here;
        }
        let e = pair_at(self.n, chosen);
        let positions: Vec<usize> = self
            .edges
            .iter()
            .enumerate()
            .filter(|(_, &x)| x == e)
            .map(|(i, _)| i)
            .collect();
        let (a, b) = two_positions(positions.len(), rng);
        (positions[a], positions[b])
    }
}

/// Uniform `i < j` from `0..len`.
fn two_positions<R: Rng + ?Sized>(len: usize, rng: &mut R) -> (usize, usize) {
    let a = rng.random_range(0..len);
    let mut b = rng.random_range(0..len - 1);
    if b >= a {
        b += 1;
    }
    (a.min(b), a.max(b))
}

/// Draws `config.samples` paths from the path law conditioned on joining
/// `start` to `end` within `duration`.
pub fn mcmc_path_sampler<R: Rng + ?Sized>(
    start: &LatentState,
    end: &LatentState,
    duration: f64,
    params: &ProcessParams,
    regime: Regime,
    config: &McmcConfig,
    rng: &mut R,
) -> Result<Vec<SamplePath>, McmcError> {
    if config.thin == 0 {
        return Err(McmcError::InvalidConfig("thin must be at least 1".into()));
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(McmcError::InvalidConfig(format!("duration must be positive, got {duration}")));
    }
    let initial = initial_path(start, end)?;
    let n = start.graph.n();
    let pairs = start.graph.pair_count();
    if pairs == 0 {
        return Ok(vec![SamplePath::empty(); config.samples]);
    }
    let mut counts = vec![0u32; pairs];
    for &e in &initial {
        counts[pair_index(n, e)] += 1;
    }
    let burn_in = config.burn_in.unwrap_or(10 * (initial.len() + 1));
    let mut chain = Chain {
        start,
        end_direction: end.direction,
        duration,
        params,
        regime,
        n,
        pairs,
        edges: Vec::new(),
        counts,
        log_target: 0.0,
    };
    chain.log_target = chain.log_target(&initial)?.ok_or(McmcError::Unreachable)?;
    chain.edges = initial;
    for _ in 0..burn_in {
        chain.step(rng)?;
    }
    let mut out = Vec::with_capacity(config.samples);
    for _ in 0..config.samples {
        for _ in 0..config.thin {
            chain.step(rng)?;
        }
        out.push(SamplePath::from_toggles(&start.graph, &chain.edges)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::DynGraph;
    use crate::seed::rng_from_seed;

    fn params() -> ProcessParams {
        ProcessParams::new(0.7, 0.3, 2.0).unwrap()
    }

    fn state(dir: Direction, edges: &[(usize, usize)]) -> LatentState {
        LatentState::new(dir, DynGraph::from_edges(4, edges.iter().copied()).unwrap())
    }

    #[test]
    fn initial_path_reaches_end() {
        let cases = [
            (state(Direction::Add, &[(0, 1)]), state(Direction::Add, &[(0, 1), (2, 3)])),
            (state(Direction::Add, &[(0, 1)]), state(Direction::Delete, &[(0, 1), (2, 3)])),
            (state(Direction::Add, &[(0, 1)]), state(Direction::Delete, &[(0, 1)])),
            (state(Direction::Delete, &[(0, 1)]), state(Direction::Delete, &[(0, 1)])),
            (state(Direction::Add, &[]), state(Direction::Add, &[])),
        ];
        for (s, e) in cases {
            let edges = initial_path(&s, &e).unwrap();
            let path = SamplePath::from_toggles(&s.graph, &edges).unwrap();
            assert!(path.connects(&s, &e).unwrap(), "{s:?} -> {e:?}");
        }
    }

    #[test]
    fn samples_connect_endpoints_with_correct_parity() {
        let mut rng = rng_from_seed(1);
        for regime in Regime::ALL {
            let s = state(Direction::Add, &[(0, 1), (1, 2)]);
            let e = state(Direction::Delete, &[(0, 1), (2, 3)]);
            let cfg = McmcConfig {
                samples: 200,
                burn_in: None,
                thin: 3,
            };
            for p in mcmc_path_sampler(&s, &e, 1.0, &params(), regime, &cfg, &mut rng).unwrap() {
                assert!(p.connects(&s, &e).unwrap());
                assert_eq!(p.len() % 2, 0);
            }
        }
    }

    #[test]
    fn identical_endpoints_visit_longer_paths() {
        let mut rng = rng_from_seed(2);
        let s = state(Direction::Add, &[(0, 1)]);
        let cfg = McmcConfig {
            samples: 500,
            burn_in: Some(50),
            thin: 2,
        };
        let paths = mcmc_path_sampler(&s, &s, 1.5, &params(), Regime::Er, &cfg, &mut rng).unwrap();
        assert!(paths.iter().any(SamplePath::is_empty));
        assert!(paths.iter().any(|p| p.len() >= 2));
        assert!(paths.iter().all(|p| p.len() % 2 == 0));
    }

    #[test]
    fn one_edge_apart_gives_odd_lengths() {
        let mut rng = rng_from_seed(3);
        let s = state(Direction::Add, &[(0, 1)]);
        let e = state(Direction::Add, &[(0, 1), (1, 3)]);
        let cfg = McmcConfig {
            samples: 300,
            ..McmcConfig::default()
        };
        let paths = mcmc_path_sampler(&s, &e, 1.0, &params(), Regime::Pr, &cfg, &mut rng).unwrap();
        assert!(paths.iter().all(|p| p.len() % 2 == 1));
    }

    #[test]
    fn rejects_zero_thin() {
        let mut rng = rng_from_seed(4);
        let s = state(Direction::Add, &[]);
        let cfg = McmcConfig {
            samples: 1,
            burn_in: None,
            thin: 0,
        };
        assert!(matches!(
            mcmc_path_sampler(&s, &s, 1.0, &params(), Regime::Er, &cfg, &mut rng),
            Err(McmcError::InvalidConfig(_))
        ));
    }
}
