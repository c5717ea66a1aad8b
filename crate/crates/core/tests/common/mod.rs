//! Brute-force oracles for graphs on at most four vertices, written
//! without the library's choice laws or kernels.

#![allow(dead_code)]

use rghmm_core::graph::{pair_at, pair_count};
use rghmm_core::params::{ProcessParams, Regime};
use rghmm_core::{Direction, DynGraph, Edge, LatentState};

/// Size of the component of every vertex, by repeated relabelling.
pub fn component_sizes(g: &DynGraph) -> Vec<usize> {
    let n = g.n();
    let mut label: Vec<usize> = (0..n).collect();
    loop {
        let mut changed = false;
        for e in g.edges() {
            let m = label[e.lo()].min(label[e.hi()]);
            for v in [e.lo(), e.hi()] {
                if label[v] != m {
                    label[v] = m;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    (0..n).map(|v| label.iter().filter(|&&l| l == label[v]).count()).collect()
}

fn addition_product(g: &DynGraph, e: Edge) -> usize {
    let s = component_sizes(g);
    s[e.lo()] * s[e.hi()]
}

fn deletion_product(g: &DynGraph, e: Edge) -> usize {
    let mut h = g.clone();
    h.remove_edge(e).unwrap();
    let s = component_sizes(&h);
    s[e.lo()] * s[e.hi()]
}

/// Probability that the next jump moves in `next` given the current graph
/// and the previous direction.
pub fn direction_prob(next: Direction, g: &DynGraph, prev: Direction, params: &ProcessParams) -> f64 {
    let add = if g.edge_count() == 0 {
        1.0
    } else if g.edge_count() == pair_count(g.n()) {
        0.0
    } else {
        match prev {
            Direction::Delete => params.p,
            Direction::Add => 1.0 - params.q,
        }
    };
    match next {
        Direction::Add => add,
        Direction::Delete => 1.0 - add,
    }
}

/// Probability that `e` is the edge changed, given the direction, by
/// averaging the selection rule over every ordered candidate pair.
pub fn choice_prob(regime: Regime, g: &DynGraph, dir: Direction, e: Edge) -> f64 {
    let pool: Vec<Edge> = (0..pair_count(g.n()))
        .map(|k| pair_at(g.n(), k))
        .filter(|&x| g.has_edge(x) == (dir == Direction::Delete))
        .collect();
    if !pool.contains(&e) {
        return 0.0;
    }
    if regime == Regime::Er || pool.len() == 1 {
        return 1.0 / pool.len() as f64;
    }
    let k = pool.len() as f64;
    let mut hits = 0usize;
    for &a in &pool {
        for &b in &pool {
            if a == b {
                continue;
            }
            let chosen = match dir {
                Direction::Add => {
                    if addition_product(g, a) < addition_product(g, b) {
                        a
                    } else {
                        b
                    }
                }
                Direction::Delete => {
                    if deletion_product(g, a) < deletion_product(g, b) {
                        b
                    } else {
                        a
                    }
                }
            };
            hits += usize::from(chosen == e);
        }
    }
    hits as f64 / (k * (k - 1.0))
}

/// One enumerated jump sequence.
#[derive(Debug, Clone)]
pub struct Enumerated {
    pub edges: Vec<Edge>,
    pub end: LatentState,
    /// Product of the per-jump direction and edge-choice probabilities.
    pub prob: f64,
}

/// Every jump sequence of length exactly `r` with positive probability.
pub fn enumerate_paths(start: &LatentState, r: usize, regime: Regime, params: &ProcessParams) -> Vec<Enumerated> {
    let mut out = Vec::new();
    let mut edges = Vec::with_capacity(r);
    walk(start, r, regime, params, 1.0, &mut edges, &mut out);
    out
}

fn walk(
    state: &LatentState,
    left: usize,
    regime: Regime,
    params: &ProcessParams,
    prob: f64,
    edges: &mut Vec<Edge>,
    out: &mut Vec<Enumerated>,
) {
    if left == 0 {
        out.push(Enumerated {
            edges: edges.clone(),
            end: state.clone(),
            prob,
        });
        return;
    }
    let n = state.graph.n();
    for k in 0..pair_count(n) {
        let e = pair_at(n, k);
        let dir = if state.graph.has_edge(e) {
            Direction::Delete
        } else {
            Direction::Add
        };
        let step = direction_prob(dir, &state.graph, state.direction, params) * choice_prob(regime, &state.graph, dir, e);
        if step == 0.0 {
            continue;
        }
        let mut g = state.graph.clone();
        g.toggle(e).unwrap();
        edges.push(e);
        walk(&LatentState::new(dir, g), left - 1, regime, params, prob * step, edges, out);
        edges.pop();
    }
}

pub fn poisson_pmf(r: usize, mean: f64) -> f64 {
    let mut v = (-mean).exp();
    for k in 1..=r {
        v *= mean / k as f64;
    }
    v
}

/// All `2 · 2^P` latent states in index order: direction bit high, pair
/// mask low.
pub fn all_states(n: usize) -> Vec<LatentState> {
    let graphs = 1u64 << pair_count(n);
    (0..2 * graphs)
        .map(|i| {
            LatentState::new(
                Direction::from_bit(i >= graphs),
                DynGraph::from_pair_mask(n, i % graphs).unwrap(),
            )
        })
        .collect()
}

/// Transition probabilities over an interval with mean jump count `mean`,
/// summed over jump counts `0..=r_max`, as a dense row-major matrix.
pub fn enumerated_interval_matrix(n: usize, regime: Regime, params: &ProcessParams, mean: f64, r_max: usize) -> Vec<Vec<f64>> {
    let states = all_states(n);
    let index = |s: &LatentState| states.iter().position(|x| x == s).unwrap();
    let mut out = vec![vec![0.0; states.len()]; states.len()];
    for (i, s) in states.iter().enumerate() {
        for r in 0..=r_max {
            let w = poisson_pmf(r, mean);
            for p in enumerate_paths(s, r, regime, params) {
                out[i][index(&p.end)] += w * p.prob;
            }
        }
    }
    out
}

/// Edgewise observation likelihood.
pub fn obs_prob(obs: &DynGraph, truth: &DynGraph, alpha: f64, beta: f64) -> f64 {
    let mut v = 1.0;
    for k in 0..pair_count(obs.n()) {
        let e = pair_at(obs.n(), k);
        v *= match (truth.has_edge(e), obs.has_edge(e)) {
            (true, true) => 1.0 - beta,
            (true, false) => beta,
            (false, true) => alpha,
            (false, false) => 1.0 - alpha,
        };
    }
    v
}
