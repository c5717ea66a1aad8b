//! Continuous-time birth-death percolation processes.
//!
//! The latent chain is a pair `(direction, graph)`. At exponentially
//! distributed event times the direction bit is redrawn from a two-state
//! kernel (forced to "add" on the empty graph and to "delete" on the
//! complete graph), then one edge is added or deleted according to the
//! regime's edge rule.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::graph::{DynGraph, Edge, GraphError};
use crate::params::{ProcessParams, Regime};

/// Whether a transition added or deleted an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    Delete,
    Add,
}

impl Direction {
    pub fn bit(self) -> u8 {
        match self {
            Direction::Delete => 0,
            Direction::Add => 1,
        }
    }

    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Direction::Add
        } else {
            Direction::Delete
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Direction::Delete => Direction::Add,
            Direction::Add => Direction::Delete,
        }
    }
}

/// State of the hidden chain.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LatentState {
    pub direction: Direction,
    pub graph: DynGraph,
}

impl LatentState {
    pub fn new(direction: Direction, graph: DynGraph) -> Self {
        Self { direction, graph }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionEvent {
    /// Time since the start of the simulated interval.
    pub time: f64,
    pub direction: Direction,
    pub edge: Edge,
}

/// The factor `h(next | graph, previous)` as a symbol in `p` and `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HTerm {
    Zero,
    One,
    P,
    OneMinusP,
    Q,
    OneMinusQ,
}

impl HTerm {
    pub fn eval(self, params: &ProcessParams) -> f64 {
        match self {
            HTerm::Zero => 0.0,
            HTerm::One => 1.0,
            HTerm::P => params.p,
            HTerm::OneMinusP => 1.0 - params.p,
            HTerm::Q => params.q,
            HTerm::OneMinusQ => 1.0 - params.q,
        }
    }

    /// `true` for the forced moves out of the empty and complete graphs,
    /// which carry no information about `p` or `q`.
    pub fn is_forced(self) -> bool {
        matches!(self, HTerm::Zero | HTerm::One)
    }
}

pub fn h_term(next: Direction, graph: &DynGraph, previous: Direction) -> HTerm {
    let forced = if graph.is_empty() {
        Some(Direction::Add)
    } else if graph.is_complete() {
        Some(Direction::Delete)
    } else {
        None
    };
    match (forced, previous, next) {
        (Some(f), _, n) if f == n => HTerm::One,
        (Some(_), _, _) => HTerm::Zero,
        (None, Direction::Delete, Direction::Add) => HTerm::P,
        (None, Direction::Delete, Direction::Delete) => HTerm::OneMinusP,
        (None, Direction::Add, Direction::Delete) => HTerm::Q,
        (None, Direction::Add, Direction::Add) => HTerm::OneMinusQ,
    }
}

pub fn h_prob(next: Direction, graph: &DynGraph, previous: Direction, params: &ProcessParams) -> f64 {
    h_term(next, graph, previous).eval(params)
}

/// Draws the next direction bit.
pub fn step_w<R: Rng + ?Sized>(
    previous: Direction,
    graph: &DynGraph,
    params: &ProcessParams,
    rng: &mut R,
) -> Direction {
    if graph.is_empty() {
        return Direction::Add;
    }
    if graph.is_complete() {
        return Direction::Delete;
    }
    let p_add = match previous {
        Direction::Delete => params.p,
        Direction::Add => 1.0 - params.q,
    };
    Direction::from_bit(rng.random::<f64>() < p_add)
}

pub fn choose_edge_er<R: Rng + ?Sized>(
    graph: &DynGraph,
    direction: Direction,
    rng: &mut R,
) -> Result<Edge, GraphError> {
    match direction {
        Direction::Add => graph.sample_uniform_nonedge(rng),
        Direction::Delete => graph.sample_uniform_edge(rng),
    }
}

fn addition_product(graph: &DynGraph, e: Edge) -> usize {
    graph.component_size(e.lo()) * graph.component_size(e.hi())
}

/// Product rule for addition: `e1` if its endpoint-component product is
/// strictly smaller, otherwise `e2`.
pub fn pr_pick_addition(graph: &DynGraph, e1: Edge, e2: Edge) -> Edge {
    if addition_product(graph, e1) < addition_product(graph, e2) {
        e1
    } else {
        e2
    }
}

/// Product rule for deletion: products use the component sizes each
/// candidate's endpoints would have without that candidate. Deletes `e2`
/// if `e1`'s product is strictly smaller, otherwise `e1`.
pub fn pr_pick_deletion(graph: &DynGraph, e1: Edge, e2: Edge) -> Result<Edge, GraphError> {
    let (a, b) = graph.component_sizes_without_edge(e1)?;
    let (c, d) = graph.component_sizes_without_edge(e2)?;
    Ok(if a * b < c * d { e2 } else { e1 })
}

/// Draws two distinct ranks uniformly from `0..k` (`k >= 2`).
fn two_distinct<R: Rng + ?Sized>(k: usize, rng: &mut R) -> (usize, usize) {
    let a = rng.random_range(0..k);
    let mut b = rng.random_range(0..k - 1);
    if b >= a {
        b += 1;
    }
    (a, b)
}

pub fn choose_edge_pr<R: Rng + ?Sized>(
    graph: &DynGraph,
    direction: Direction,
    rng: &mut R,
) -> Result<Edge, GraphError> {
    match direction {
        Direction::Add => {
            let k = graph.non_edge_count();
            match k {
                0 => Err(GraphError::EmptySet("non-edge")),
                1 => Ok(graph.nth_non_edge(0).expect("one non-edge")),
                _ => {
                    let (a, b) = two_distinct(k, rng);
                    let e1 = graph.nth_non_edge(a).expect("rank < k");
                    let e2 = graph.nth_non_edge(b).expect("rank < k");
                    Ok(pr_pick_addition(graph, e1, e2))
                }
            }
        }
        Direction::Delete => {
            let k = graph.edge_count();
            match k {
                0 => Err(GraphError::EmptySet("edge")),
                1 => Ok(graph.nth_edge(0).expect("one edge")),
                _ => {
                    let (a, b) = two_distinct(k, rng);
                    let e1 = graph.nth_edge(a).expect("rank < k");
                    let e2 = graph.nth_edge(b).expect("rank < k");
                    pr_pick_deletion(graph, e1, e2)
                }
            }
        }
    }
}

/// Probability that the regime's rule picks `edge`, as an exact fraction
/// `(numerator, denominator)`. Zero if `edge` is not in the relevant set.
pub fn edge_choice_ratio(
    regime: Regime,
    graph: &DynGraph,
    direction: Direction,
    edge: Edge,
) -> (u64, u64) {
    let eligible = match direction {
        Direction::Add => !graph.has_edge(edge),
        Direction::Delete => graph.has_edge(edge),
    };
    let k = match direction {
        Direction::Add => graph.non_edge_count(),
        Direction::Delete => graph.edge_count(),
    } as u64;
    if !eligible || edge.hi() >= graph.n() {
        return (0, 1);
    }
    match regime {
        Regime::Er => (1, k),
        Regime::Pr if k == 1 => (1, 1),
        Regime::Pr => {
            // Over ordered candidate pairs (e1, e2), e1 != e2:
            //   addition picks x as e1 when prod(x) < prod(e2) and as e2
            //   when prod(e1) >= prod(x);
            //   deletion picks x as e1 when prod(e2) <= prod(x) and as e2
            //   when prod(e1) < prod(x).
            let (mine, others): (usize, Vec<usize>) = match direction {
                Direction::Add => (
                    addition_product(graph, edge),
                    graph
                        .non_edges()
                        .filter(|&x| x != edge)
                        .map(|x| addition_product(graph, x))
                        .collect(),
                ),
                Direction::Delete => {
                    let splits = graph.removal_split_sizes();
                    let mine = splits
                        .iter()
                        .find(|(x, _)| *x == edge)
                        .map(|(_, (a, b))| a * b)
                        .expect("edge present");
                    let others = splits
                        .iter()
                        .filter(|(x, _)| *x != edge)
                        .map(|(_, (a, b))| a * b)
                        .collect();
                    (mine, others)
                }
            };
            let num = match direction {
                Direction::Add => others
                    .iter()
                    .map(|&o| u64::from(o > mine) + u64::from(o >= mine))
                    .sum(),
                Direction::Delete => others
                    .iter()
                    .map(|&o| u64::from(o <= mine) + u64::from(o < mine))
                    .sum(),
            };
            (num, k * (k - 1))
        }
    }
}

/// `g(next graph | direction, graph)` for the transition that changes `edge`.
pub fn edge_choice_prob(regime: Regime, graph: &DynGraph, direction: Direction, edge: Edge) -> f64 {
    let (num, den) = edge_choice_ratio(regime, graph, direction, edge);
    num as f64 / den as f64
}

impl Regime {
    pub fn choose_edge<R: Rng + ?Sized>(
        self,
        graph: &DynGraph,
        direction: Direction,
        rng: &mut R,
    ) -> Result<Edge, GraphError> {
        match self {
            Regime::Er => choose_edge_er(graph, direction, rng),
            Regime::Pr => choose_edge_pr(graph, direction, rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalOutcome {
    /// Number of transitions applied.
    pub transitions: usize,
    pub events: Option<Vec<TransitionEvent>>,
}

/// Runs the chain forward for `duration` time units in place.
pub fn simulate_interval<R: Rng + ?Sized>(
    state: &mut LatentState,
    duration: f64,
    regime: Regime,
    params: &ProcessParams,
    rng: &mut R,
    record: bool,
) -> Result<IntervalOutcome, GraphError> {
    let mut events = record.then(Vec::new);
    let mut transitions = 0;
    if state.graph.pair_count() == 0 || duration <= 0.0 {
        return Ok(IntervalOutcome {
            transitions,
            events,
        });
    }
    let holding = Exp::new(params.gamma).expect("gamma > 0");
    let mut t = holding.sample(rng);
    while t <= duration {
        let direction = step_w(state.direction, &state.graph, params, rng);
        let edge = regime.choose_edge(&state.graph, direction, rng)?;
        match direction {
            Direction::Add => state.graph.add_edge(edge)?,
            Direction::Delete => state.graph.remove_edge(edge)?,
        }
        state.direction = direction;
        transitions += 1;
        if let Some(ev) = events.as_mut() {
            ev.push(TransitionEvent {
                time: t,
                direction,
                edge,
            });
        }
        t += holding.sample(rng);
    }
    Ok(IntervalOutcome {
        transitions,
        events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    fn e(a: usize, b: usize) -> Edge {
        Edge::new(a, b).unwrap()
    }

    fn params() -> ProcessParams {
        ProcessParams::new(0.7, 0.3, 2.0).unwrap()
    }

    #[test]
    fn step_w_forced_at_boundaries() {
        let mut rng = rng_from_seed(1);
        let empty = DynGraph::empty(4).unwrap();
        let full = DynGraph::complete(4).unwrap();
        for prev in [Direction::Add, Direction::Delete] {
            for _ in 0..50 {
                assert_eq!(step_w(prev, &empty, &params(), &mut rng), Direction::Add);
                assert_eq!(step_w(prev, &full, &params(), &mut rng), Direction::Delete);
            }
        }
    }

    #[test]
    fn step_w_birth_frequency() {
        let mut rng = rng_from_seed(2);
        let g = DynGraph::from_edges(4, [(0, 1)]).unwrap();
        let draws = 100_000;
        let adds = (0..draws)
            .filter(|_| step_w(Direction::Delete, &g, &params(), &mut rng) == Direction::Add)
            .count();
        let sigma = (draws as f64 * 0.7 * 0.3).sqrt();
        assert!((adds as f64 - 0.7 * draws as f64).abs() < 3.0 * sigma);
    }

    #[test]
    fn h_sums_to_one() {
        let p = params();
        let graphs = [
            DynGraph::empty(3).unwrap(),
            DynGraph::from_edges(3, [(0, 1)]).unwrap(),
            DynGraph::complete(3).unwrap(),
        ];
        for g in &graphs {
            for prev in [Direction::Add, Direction::Delete] {
                let total = h_prob(Direction::Add, g, prev, &p) + h_prob(Direction::Delete, g, prev, &p);
                assert!((total - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn product_rule_addition_prefers_small_components() {
        // {0,1}, {2}, {3,4,5}
        let g = DynGraph::from_edges(6, [(0, 1), (3, 4), (4, 5)]).unwrap();
        assert_eq!(pr_pick_addition(&g, e(0, 2), e(2, 3)), e(0, 2));
        assert_eq!(pr_pick_addition(&g, e(2, 3), e(0, 2)), e(0, 2));
        // Tie goes to the second candidate.
        assert_eq!(pr_pick_addition(&g, e(0, 3), e(1, 4)), e(1, 4));
    }

    #[test]
    fn product_rule_deletion_prefers_large_products() {
        // Path 0-1-2-3 plus triangle 4-5-6.
        let g = DynGraph::from_edges(7, [(0, 1), (1, 2), (2, 3), (4, 5), (5, 6), (4, 6)]).unwrap();
        assert_eq!(g.component_sizes_without_edge(e(1, 2)).unwrap(), (2, 2));
        assert_eq!(g.component_sizes_without_edge(e(4, 5)).unwrap(), (3, 3));
        assert_eq!(pr_pick_deletion(&g, e(1, 2), e(4, 5)).unwrap(), e(4, 5));
        assert_eq!(pr_pick_deletion(&g, e(4, 5), e(1, 2)).unwrap(), e(4, 5));
        // Tie goes to the first candidate.
        assert_eq!(pr_pick_deletion(&g, e(4, 6), e(5, 6)).unwrap(), e(4, 6));
    }

    #[test]
    fn product_rule_single_candidate() {
        let mut rng = rng_from_seed(3);
        let mut g = DynGraph::complete(4).unwrap();
        g.remove_edge(e(1, 3)).unwrap();
        for _ in 0..20 {
            assert_eq!(choose_edge_pr(&g, Direction::Add, &mut rng).unwrap(), e(1, 3));
        }
        let g = DynGraph::from_edges(4, [(0, 2)]).unwrap();
        assert_eq!(choose_edge_pr(&g, Direction::Delete, &mut rng).unwrap(), e(0, 2));
    }

    #[test]
    fn choice_ratios_sum_to_one() {
        let graphs = [
            DynGraph::from_edges(6, [(0, 1), (3, 4), (4, 5)]).unwrap(),
            DynGraph::from_edges(7, [(0, 1), (1, 2), (2, 3), (4, 5), (5, 6), (4, 6)]).unwrap(),
            DynGraph::from_edges(5, [(0, 1)]).unwrap(),
        ];
        for g in &graphs {
            for regime in Regime::ALL {
                let adds: f64 = g
                    .non_edges()
                    .map(|x| edge_choice_prob(regime, g, Direction::Add, x))
                    .sum();
                let dels: f64 = g
                    .edges()
                    .map(|x| edge_choice_prob(regime, g, Direction::Delete, x))
                    .sum();
                assert!((adds - 1.0).abs() < 1e-12, "{regime} add {adds}");
                assert!((dels - 1.0).abs() < 1e-12, "{regime} delete {dels}");
            }
        }
    }

    #[test]
    fn pr_choice_frequencies_match_ratios() {
        let mut rng = rng_from_seed(4);
        let g = DynGraph::from_edges(6, [(0, 1), (1, 2), (3, 4)]).unwrap();
        let draws = 200_000;
        for direction in [Direction::Add, Direction::Delete] {
            let mut counts = std::collections::HashMap::new();
            for _ in 0..draws {
                *counts.entry(choose_edge_pr(&g, direction, &mut rng).unwrap()).or_insert(0usize) += 1;
            }
            let set: Vec<Edge> = match direction {
                Direction::Add => g.non_edges().collect(),
                Direction::Delete => g.edges().collect(),
            };
            for x in set {
                let p = edge_choice_prob(Regime::Pr, &g, direction, x);
                let c = *counts.get(&x).unwrap_or(&0) as f64;
                let sigma = (draws as f64 * p * (1.0 - p)).sqrt().max(1.0);
                assert!((c - p * draws as f64).abs() < 4.0 * sigma, "{x} {c} vs {p}");
            }
        }
    }

    #[test]
    fn zero_duration_is_a_no_op() {
        let mut rng = rng_from_seed(5);
        let mut s = LatentState::new(Direction::Add, DynGraph::from_edges(4, [(0, 1)]).unwrap());
        let before = s.clone();
        let out = simulate_interval(&mut s, 0.0, Regime::Er, &params(), &mut rng, true).unwrap();
        assert_eq!(out.transitions, 0);
        assert_eq!(s, before);
    }

    #[test]
    fn first_event_from_empty_is_an_addition() {
        let mut rng = rng_from_seed(6);
        for regime in Regime::ALL {
            for _ in 0..200 {
                let mut s = LatentState::new(Direction::Delete, DynGraph::empty(5).unwrap());
                let out = simulate_interval(&mut s, 3.0, regime, &params(), &mut rng, true).unwrap();
                if let Some(first) = out.events.unwrap().first() {
                    assert_eq!(first.direction, Direction::Add);
                }
            }
        }
    }

    #[test]
    fn event_count_mean_is_gamma_times_duration() {
        let mut rng = rng_from_seed(7);
        let runs = 10_000;
        let total: usize = (0..runs)
            .map(|_| {
                let mut s = LatentState::new(Direction::Add, DynGraph::empty(6).unwrap());
                simulate_interval(&mut s, 5.0, Regime::Er, &params(), &mut rng, false)
                    .unwrap()
                    .transitions
            })
            .sum();
        let mean = total as f64 / runs as f64;
        // Poisson(10): standard error sqrt(10 / runs).
        assert!((mean - 10.0).abs() < 3.0 * (10.0 / runs as f64).sqrt(), "{mean}");
    }

    #[test]
    fn recorded_events_replay_to_final_state() {
        let mut rng = rng_from_seed(8);
        for regime in Regime::ALL {
            let start = LatentState::new(Direction::Add, DynGraph::from_edges(6, [(0, 1), (2, 3)]).unwrap());
            let mut s = start.clone();
            let out = simulate_interval(&mut s, 4.0, regime, &params(), &mut rng, true).unwrap();
            let events = out.events.unwrap();
            assert_eq!(events.len(), out.transitions);
            let mut g = start.graph.clone();
            for ev in &events {
                assert!(ev.time > 0.0 && ev.time <= 4.0);
                match ev.direction {
                    Direction::Add => g.add_edge(ev.edge).unwrap(),
                    Direction::Delete => g.remove_edge(ev.edge).unwrap(),
                }
            }
            assert_eq!(g, s.graph);
            if let Some(last) = events.last() {
                assert_eq!(last.direction, s.direction);
            }
        }
    }
}
