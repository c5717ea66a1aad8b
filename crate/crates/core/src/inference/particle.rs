//! Bootstrap particle filter over the latent chain with multinomial
//! resampling at every observation.
//!
//! Each particle's propagation draws from its own stream derived from the
//! run seed, the observation index and the particle index, so results do
//! not depend on the number of worker threads.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;

use crate::graph::{DynGraph, GraphError};
use crate::noise::{confusion_from_bits, ConfusionCounts};
use crate::numeric::log_mean_exp;
use crate::params::{ModelParams, Regime};
use crate::percolation::{simulate_interval, Direction, LatentState};
use crate::seed::{derive_rng, stream};
use crate::series::NetworkSeries;

use super::InferenceError;

/// Particles at one observation time, stored as flat bitsets.
#[derive(Debug, Clone)]
pub struct CloudStep {
    words: usize,
    bits: Vec<u64>,
    directions: Vec<Direction>,
    /// Index of each particle's parent in the previous step.
    pub ancestors: Vec<u32>,
    /// `ln f(g*_m | particle)`; zero at the first observation.
    pub log_weights: Vec<f64>,
    pub confusion: Vec<ConfusionCounts>,
}

impl CloudStep {
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    fn graph_bits(&self, b: usize) -> &[u64] {
        &self.bits[b * self.words..(b + 1) * self.words]
    }

    pub fn direction(&self, b: usize) -> Direction {
        self.directions[b]
    }
}

/// Filter history: `steps[m]` holds the particles at observation `m`.
#[derive(Debug, Clone)]
pub struct ParticleCloud {
    n: usize,
    steps: Vec<CloudStep>,
}

impl ParticleCloud {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn particles(&self) -> usize {
        self.steps[0].len()
    }

    pub fn step(&self, m: usize) -> &CloudStep {
        &self.steps[m]
    }

    pub fn graph(&self, m: usize, b: usize) -> DynGraph {
        DynGraph::from_pair_bits(self.n, self.steps[m].graph_bits(b)).expect("stored from a valid graph")
    }

    pub fn state(&self, m: usize, b: usize) -> LatentState {
        LatentState::new(self.steps[m].direction(b), self.graph(m, b))
    }

    /// Particle indices `line[0..M]` of the ancestor chain ending at
    /// particle `b` of the last step.
    pub fn trace(&self, b: usize) -> Vec<usize> {
        let mut line = vec![0; self.len()];
        let mut cur = b;
        for m in (0..self.len()).rev() {
            line[m] = cur;
            cur = self.steps[m].ancestors[cur] as usize;
        }
        line
    }
}

/// Output of one filter pass.
#[derive(Debug, Clone)]
pub struct FilterRun {
    /// Full history when requested.
    pub cloud: Option<ParticleCloud>,
    /// `ln((1/B) Σ_b f(g*_m | ξ_m^b))` for `m = 1..M`.
    pub log_increments: Vec<f64>,
}

impl FilterRun {
    pub fn log_likelihood(&self) -> f64 {
        self.log_increments.iter().sum()
    }
}

fn make_step(words: usize, capacity: usize) -> CloudStep {
    CloudStep {
        words,
        bits: Vec::with_capacity(words * capacity),
        directions: Vec::with_capacity(capacity),
        ancestors: Vec::with_capacity(capacity),
        log_weights: Vec::with_capacity(capacity),
        confusion: Vec::with_capacity(capacity),
    }
}

/// Multinomial draw of `count` indices with probabilities proportional to
/// `exp(log_weights)`.
pub fn resample<R: Rng + ?Sized>(log_weights: &[f64], count: usize, rng: &mut R) -> Result<Vec<u32>, InferenceError> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(InferenceError::DegenerateWeights);
    }
    let w: Vec<f64> = log_weights.iter().map(|l| (l - max).exp()).collect();
    let dist = WeightedIndex::new(&w).map_err(|_| InferenceError::DegenerateWeights)?;
    Ok((0..count).map(|_| dist.sample(rng) as u32).collect())
}

/// Runs the filter with a fixed base seed.
pub fn run_filter(
    series: &NetworkSeries,
    params: &ModelParams,
    regime: Regime,
    particles: usize,
    seed: u64,
    keep_history: bool,
) -> Result<FilterRun, InferenceError> {
    if particles == 0 {
        return Err(InferenceError::InvalidConfig("need at least one particle".into()));
    }
    let n = series.n();
    let first = series.snapshot(0);
    let words = first.pair_bits().len();
    let pairs = first.pair_count();

    let mut start = make_step(words, particles);
    for b in 0..particles {
        start.bits.extend_from_slice(first.pair_bits());
        start.directions.push(Direction::Add);
        start.ancestors.push(b as u32);
        start.log_weights.push(0.0);
        start.confusion.push(ConfusionCounts::default());
    }

    let mut history = Vec::new();
    let mut prev = start;
    let mut log_increments = Vec::with_capacity(series.len().saturating_sub(1));
    for m in 1..series.len() {
        let mut rng = derive_rng(seed, &[stream::RESAMPLE, m as u64]);
        let ancestors = resample(&prev.log_weights, particles, &mut rng)?;
        let obs = series.snapshot(m);
        let gap = series.gap(m);
        let propagated: Vec<(Vec<u64>, Direction, ConfusionCounts, f64)> = ancestors
            .par_iter()
            .enumerate()
            .map(|(b, &a)| -> Result<_, GraphError> {
                let a = a as usize;
                let graph = DynGraph::from_pair_bits(n, prev.graph_bits(a))?;
                let mut state = LatentState::new(prev.directions[a], graph);
                let mut prng = derive_rng(seed, &[stream::FILTER, m as u64, b as u64]);
                simulate_interval(&mut state, gap, regime, &params.process, &mut prng, false)?;
                let cc = confusion_from_bits(
                    pairs,
                    state.graph.pair_bits(),
                    state.graph.edge_count(),
                    obs.pair_bits(),
                    obs.edge_count(),
                );
                let lw = cc.loglik(&params.noise);
                Ok((
                    state.graph.pair_bits().to_vec(),
                    state.direction,
                    cc,
                    lw,
                ))
            })
            .collect::<Result<_, _>>()?;
        let mut next = make_step(words, particles);
        for (bits, dir, cc, lw) in propagated {
            next.bits.extend_from_slice(&bits);
            next.directions.push(dir);
            next.log_weights.push(lw);
            next.confusion.push(cc);
        }
        next.ancestors = ancestors;
        log_increments.push(log_mean_exp(&next.log_weights));
        if keep_history {
            history.push(std::mem::replace(&mut prev, next));
        } else {
            prev = next;
        }
    }
    let cloud = keep_history.then(|| {
        history.push(prev);
        ParticleCloud { n, steps: history }
    });
    Ok(FilterRun { cloud, log_increments })
}

/// Particle filter conditioned on `(add, g*_1)` at the first observation.
pub fn particle_filter<R: Rng + ?Sized>(
    series: &NetworkSeries,
    params: &ModelParams,
    regime: Regime,
    particles: usize,
    rng: &mut R,
) -> Result<ParticleCloud, InferenceError> {
    let seed = rng.next_u64();
    Ok(run_filter(series, params, regime, particles, seed, true)?
        .cloud
        .expect("history requested"))
}

/// Ancestor chains of `count` terminal particles drawn in proportion to
/// their final observation weights. Each line lists one particle index per
/// observation.
pub fn draw_ancestral_lines<R: Rng + ?Sized>(
    cloud: &ParticleCloud,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>, InferenceError> {
    let last = cloud.step(cloud.len() - 1);
    let terminals = resample(&last.log_weights, count, rng)?;
    Ok(terminals.into_iter().map(|b| cloud.trace(b as usize)).collect())
}

/// Confusion totals over observations `1..M` along one line.
pub fn line_confusion(cloud: &ParticleCloud, line: &[usize]) -> ConfusionCounts {
    let mut total = ConfusionCounts::default();
    for (m, &b) in line.iter().enumerate().skip(1) {
        total += cloud.step(m).confusion[b];
    }
    total
}
