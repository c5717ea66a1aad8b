//! Edgewise observation noise: false edges at rate `alpha`, missed edges at
//! rate `beta`, independently per vertex pair.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{pair_at, DynGraph, GraphError};
use crate::params::NoiseParams;

/// Fourfold classification of vertex pairs between a true and an observed
/// graph.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    /// True edges observed as edges.
    pub a: u64,
    /// True edges observed as non-edges.
    pub b: u64,
    /// True non-edges observed as edges.
    pub c: u64,
    /// True non-edges observed as non-edges.
    pub d: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }

    /// `c ln α + d ln(1-α) + b ln β + a ln(1-β)`, with `0 · ln 0 = 0`.
    pub fn loglik(&self, noise: &NoiseParams) -> f64 {
        fn term(count: u64, prob: f64) -> f64 {
            if count == 0 {
                0.0
            } else {
                count as f64 * prob.ln()
            }
        }
        term(self.c, noise.alpha)
            + term(self.d, 1.0 - noise.alpha)
            + term(self.b, noise.beta)
            + term(self.a, 1.0 - noise.beta)
    }
}

impl std::ops::AddAssign for ConfusionCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.a += rhs.a;
        self.b += rhs.b;
        self.c += rhs.c;
        self.d += rhs.d;
    }
}

/// Counts from raw pair bitsets and edge totals of graphs on `pairs` pairs.
pub fn confusion_from_bits(
    pairs: usize,
    true_bits: &[u64],
    true_edges: usize,
    obs_bits: &[u64],
    obs_edges: usize,
) -> ConfusionCounts {
    let a: u64 = true_bits
        .iter()
        .zip(obs_bits)
        .map(|(t, o)| u64::from((t & o).count_ones()))
        .sum();
    let b = true_edges as u64 - a;
    let c = obs_edges as u64 - a;
    ConfusionCounts {
        a,
        b,
        c,
        d: pairs as u64 - a - b - c,
    }
}

pub fn confusion_counts(g_true: &DynGraph, g_obs: &DynGraph) -> Result<ConfusionCounts, GraphError> {
    if g_true.n() != g_obs.n() {
        return Err(GraphError::SizeMismatch {
            left: g_true.n(),
            right: g_obs.n(),
        });
    }
    Ok(confusion_from_bits(
        g_true.pair_count(),
        g_true.pair_bits(),
        g_true.edge_count(),
        g_obs.pair_bits(),
        g_obs.edge_count(),
    ))
}

/// `ln f(g_obs | g_true)`.
pub fn obs_loglik(g_obs: &DynGraph, g_true: &DynGraph, noise: &NoiseParams) -> Result<f64, GraphError> {
    Ok(confusion_counts(g_true, g_obs)?.loglik(noise))
}

/// Draws an observation of `g`.
pub fn corrupt<R: Rng + ?Sized>(g: &DynGraph, noise: &NoiseParams, rng: &mut R) -> DynGraph {
    let n = g.n();
    let mut edges = Vec::new();
    for k in 0..g.pair_count() {
        let e = pair_at(n, k);
        let keep = if g.has_edge(e) {
            rng.random::<f64>() >= noise.beta
        } else {
            rng.random::<f64>() < noise.alpha
        };
        if keep {
            edges.push((e.lo(), e.hi()));
        }
    }
    DynGraph::from_edges(n, edges).expect("pairs are valid")
}
