//! Exact transition kernels over the full latent state space for tiny `n`.
//!
//! States are indexed as `direction_bit * 2^P + pair_mask`, where `P` is
//! the number of vertex pairs and bit `k` of the mask is pair
//! [`pair_at(n, k)`](crate::graph::pair_at).

use nalgebra::DMatrix;
use num_rational::Ratio;
use thiserror::Error;

use crate::graph::{pair_at, pair_count, DynGraph, GraphError};
use crate::numeric::poisson_ln_pmf;
use crate::params::{ProcessParams, Regime};
use crate::percolation::{edge_choice_ratio, h_term, Direction, HTerm, LatentState};

pub const MAX_EXACT_VERTICES: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("exact kernels support at most {MAX_EXACT_VERTICES} vertices, got {0}")]
    TooLarge(usize),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Enumeration of `{0, 1} × graphs(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateSpace {
    n: usize,
    pairs: usize,
}

impl StateSpace {
    pub fn new(n: usize) -> Result<Self, KernelError> {
        if n > MAX_EXACT_VERTICES {
            return Err(KernelError::TooLarge(n));
        }
        if n == 0 {
            return Err(GraphError::NoVertices.into());
        }
        Ok(Self {
            n,
            pairs: pair_count(n),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn graph_count(&self) -> usize {
        1 << self.pairs
    }

    pub fn len(&self) -> usize {
        2 * self.graph_count()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, direction: Direction, mask: u64) -> usize {
        direction.bit() as usize * self.graph_count() + mask as usize
    }

    pub fn index_of(&self, state: &LatentState) -> usize {
        self.index(state.direction, state.graph.pair_mask())
    }

    pub fn direction(&self, index: usize) -> Direction {
        Direction::from_bit(index >= self.graph_count())
    }

    pub fn mask(&self, index: usize) -> u64 {
        (index % self.graph_count()) as u64
    }

    pub fn graph(&self, index: usize) -> DynGraph {
        DynGraph::from_pair_mask(self.n, self.mask(index)).expect("mask within range")
    }

    pub fn state(&self, index: usize) -> LatentState {
        LatentState::new(self.direction(index), self.graph(index))
    }
}

/// One kernel entry `c · h` with a rational edge-choice factor `c` and a
/// direction factor `h` in `{0, 1, p, 1-p, q, 1-q}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelTerm {
    pub coef: Ratio<u64>,
    pub h: HTerm,
}

impl KernelTerm {
    pub fn zero() -> Self {
        Self {
            coef: Ratio::new(0, 1),
            h: HTerm::Zero,
        }
    }

    pub fn new(coef: Ratio<u64>, h: HTerm) -> Self {
        if coef == Ratio::new(0, 1) || h == HTerm::Zero {
            Self::zero()
        } else {
            Self { coef, h }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.h == HTerm::Zero
    }

    pub fn eval(&self, params: &ProcessParams) -> f64 {
        *self.coef.numer() as f64 / *self.coef.denom() as f64 * self.h.eval(params)
    }
}

/// The embedded one-step kernel with entries kept symbolic in `p`, `q`.
#[derive(Debug, Clone)]
pub struct SymbolicKernel {
    space: StateSpace,
    entries: Vec<KernelTerm>,
}

impl SymbolicKernel {
    pub fn space(&self) -> StateSpace {
        self.space
    }

    pub fn get(&self, from: usize, to: usize) -> KernelTerm {
        self.entries[from * self.space.len() + to]
    }

    pub fn eval(&self, params: &ProcessParams) -> DMatrix<f64> {
        let s = self.space.len();
        DMatrix::from_fn(s, s, |i, j| self.get(i, j).eval(params))
    }
}

pub fn symbolic_embedded_kernel(n: usize, regime: Regime) -> Result<SymbolicKernel, KernelError> {
    let space = StateSpace::new(n)?;
    let s = space.len();
    let mut entries = vec![KernelTerm::zero(); s * s];
    for from in 0..s {
        let state = space.state(from);
        let g = &state.graph;
        for k in 0..space.pairs {
            let edge = pair_at(n, k);
            let next = if g.has_edge(edge) {
                Direction::Delete
            } else {
                Direction::Add
            };
            let h = h_term(next, g, state.direction);
            let (num, den) = edge_choice_ratio(regime, g, next, edge);
            let to = space.index(next, space.mask(from) ^ (1 << k));
            entries[from * s + to] = KernelTerm::new(Ratio::new(num, den), h);
        }
    }
    Ok(SymbolicKernel { space, entries })
}

/// `f(g2, w2 | g1, w1) = g(g2 | w2, g1) · h(w2 | g1, w1)` as a dense matrix.
pub fn exact_embedded_kernel(
    n: usize,
    regime: Regime,
    params: &ProcessParams,
) -> Result<DMatrix<f64>, KernelError> {
    Ok(symbolic_embedded_kernel(n, regime)?.eval(params))
}

/// `Σ_{r ≤ r_max} K^r · Poisson(r; γ·duration)`.
pub fn exact_interval_kernel(
    n: usize,
    regime: Regime,
    params: &ProcessParams,
    duration: f64,
    r_max: usize,
) -> Result<DMatrix<f64>, KernelError> {
    let step = exact_embedded_kernel(n, regime, params)?;
    Ok(interval_kernel_from(&step, params.gamma * duration, r_max))
}

pub fn interval_kernel_from(step: &DMatrix<f64>, mean: f64, r_max: usize) -> DMatrix<f64> {
    let s = step.nrows();
    let mut power = DMatrix::<f64>::identity(s, s);
    let mut total = power.scale(poisson_ln_pmf(0, mean).exp());
    for r in 1..=r_max {
        power = &power * step;
        total += power.scale(poisson_ln_pmf(r, mean).exp());
    }
    total
}
