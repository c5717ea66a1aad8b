//! Undirected simple graphs on a fixed vertex set.
//!
//! [`DynGraph`] keeps three views of the same edge set in sync:
//!
//! - a bitset over canonical vertex pairs (for uniform edge/non-edge
//!   selection and fast confusion counts),
//! - per-vertex adjacency rows (for breadth-first search),
//! - a disjoint-set forest with component sizes (for the product rule).
//!
//! Additions merge components incrementally. Deletions rebuild the forest
//! with a breadth-first search, which is cheap at the sizes this crate
//! targets (tens of vertices).

use std::fmt;
use std::hash::{Hash, Hasher};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("vertex {vertex} out of range for a graph on {n} vertices")]
    InvalidVertex { vertex: usize, n: usize },
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("edge {0} already present")]
    EdgePresent(Edge),
    #[error("edge {0} not present")]
    EdgeAbsent(Edge),
    #[error("cannot sample from an empty {0} set")]
    EmptySet(&'static str),
    #[error("graph sizes differ: {left} vs {right} vertices")]
    SizeMismatch { left: usize, right: usize },
    #[error("a graph needs at least one vertex")]
    NoVertices,
    #[error("pair bitset does not fit a graph on {n} vertices")]
    BadBitset { n: usize },
}

/// Unordered vertex pair stored as `(min, max)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    lo: usize,
    hi: usize,
}

impl Edge {
    pub fn new(a: usize, b: usize) -> Result<Self, GraphError> {
        if a == b {
            return Err(GraphError::SelfLoop(a));
        }
        Ok(Self {
            lo: a.min(b),
            hi: a.max(b),
        })
    }

    pub fn lo(self) -> usize {
        self.lo
    }

    pub fn hi(self) -> usize {
        self.hi
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lo, self.hi)
    }
}

/// Number of unordered vertex pairs on `n` vertices.
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Position of `e` in the lexicographic enumeration of pairs
/// `(0,1), (0,2), ..., (0,n-1), (1,2), ...`.
pub fn pair_index(n: usize, e: Edge) -> usize {
    let i = e.lo;
    i * n - i * (i + 1) / 2 + (e.hi - i - 1)
}

/// Inverse of [`pair_index`].
pub fn pair_at(n: usize, mut k: usize) -> Edge {
    let mut i = 0;
    loop {
        let row = n - i - 1;
        if k < row {
            return Edge {
                lo: i,
                hi: i + 1 + k,
            };
        }
        k -= row;
        i += 1;
    }
}

fn word_count(bits: usize) -> usize {
    bits.div_ceil(64)
}

/// Index of the `k`-th set bit (0-based) of `word`.
fn select_in_word(mut word: u64, k: u32) -> u32 {
    for _ in 0..k {
        word &= word - 1;
    }
    word.trailing_zeros()
}

/// Index of the `k`-th set bit across `words`, where the last word is masked
/// by `last_mask` and every word is optionally complemented.
fn select_bit(words: &[u64], last_mask: u64, complement: bool, mut k: usize) -> Option<usize> {
    let last = words.len().checked_sub(1)?;
    for (wi, &raw) in words.iter().enumerate() {
        let mut w = if complement { !raw } else { raw };
        if wi == last {
            w &= last_mask;
        }
        let ones = w.count_ones() as usize;
        if k < ones {
            return Some(wi * 64 + select_in_word(w, k as u32) as usize);
        }
        k -= ones;
    }
    None
}

/// Disjoint-set forest with union by size.
///
/// `find` does not compress paths so that component queries work through a
/// shared reference; union by size keeps trees logarithmically shallow.
#[derive(Debug, Clone)]
struct DisjointSet {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl DisjointSet {
    fn singletons(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    fn find(&self, mut v: usize) -> usize {
        while self.parent[v] as usize != v {
            v = self.parent[v] as usize;
        }
        v
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra as u32;
        self.size[ra] += self.size[rb];
    }

    fn component_size(&self, v: usize) -> usize {
        self.size[self.find(v)] as usize
    }
}

/// Component id per vertex (dense, in order of first appearance) and the
/// size of each component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentView {
    pub labels: Vec<usize>,
    pub sizes: Vec<usize>,
}

/// Mutable undirected simple graph on `n` fixed vertices.
#[derive(Clone)]
pub struct DynGraph {
    n: usize,
    pairs: usize,
    bits: Vec<u64>,
    row_words: usize,
    adj: Vec<u64>,
    edges: usize,
    dsu: DisjointSet,
}

impl DynGraph {
    pub fn empty(n: usize) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::NoVertices);
        }
        let pairs = pair_count(n);
        let row_words = word_count(n);
        Ok(Self {
            n,
            pairs,
            bits: vec![0; word_count(pairs).max(1)],
            row_words,
            adj: vec![0; n * row_words],
            edges: 0,
            dsu: DisjointSet::singletons(n),
        })
    }

    pub fn complete(n: usize) -> Result<Self, GraphError> {
        let mut g = Self::empty(n)?;
        for k in 0..g.pairs {
            g.insert_unchecked(pair_at(n, k));
        }
        Ok(g)
    }

    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut g = Self::empty(n)?;
        for (a, b) in edges {
            let e = Edge::new(a, b)?;
            g.add_edge(e)?;
        }
        Ok(g)
    }

    /// Graph whose edge set is given by a pair bitmask (bit `k` set means
    /// `pair_at(n, k)` is an edge). Only meaningful when `pair_count(n) <= 64`.
    pub fn from_pair_mask(n: usize, mask: u64) -> Result<Self, GraphError> {
        let mut g = Self::empty(n)?;
        for k in 0..g.pairs.min(64) {
            if mask >> k & 1 == 1 {
                g.insert_unchecked(pair_at(n, k));
            }
        }
        Ok(g)
    }

    /// Graph whose edges are the set bits of a pair bitset laid out as in
    /// [`DynGraph::pair_bits`].
    pub fn from_pair_bits(n: usize, bits: &[u64]) -> Result<Self, GraphError> {
        let mut g = Self::empty(n)?;
        if bits.len() != g.bits.len() {
            return Err(GraphError::BadBitset { n });
        }
        for (wi, &word) in bits.iter().enumerate() {
            let mut w = word;
            while w != 0 {
                let k = wi * 64 + w.trailing_zeros() as usize;
                if k >= g.pairs {
                    return Err(GraphError::BadBitset { n });
                }
                g.insert_unchecked(pair_at(n, k));
                w &= w - 1;
            }
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `n(n-1)/2`.
    pub fn pair_count(&self) -> usize {
        self.pairs
    }

    pub fn edge_count(&self) -> usize {
        self.edges
    }

    pub fn non_edge_count(&self) -> usize {
        self.pairs - self.edges
    }

    pub fn is_empty(&self) -> bool {
        self.edges == 0
    }

    pub fn is_complete(&self) -> bool {
        self.edges == self.pairs
    }

    fn check(&self, e: Edge) -> Result<(), GraphError> {
        if e.hi >= self.n {
            return Err(GraphError::InvalidVertex {
                vertex: e.hi,
                n: self.n,
            });
        }
        Ok(())
    }

    pub fn has_edge(&self, e: Edge) -> bool {
        if e.hi >= self.n {
            return false;
        }
        let k = pair_index(self.n, e);
        self.bits[k / 64] >> (k % 64) & 1 == 1
    }

    fn set_bits(&mut self, e: Edge, on: bool) {
        let k = pair_index(self.n, e);
        let (i, j) = (e.lo, e.hi);
        let rw = self.row_words;
        if on {
            self.bits[k / 64] |= 1 << (k % 64);
            self.adj[i * rw + j / 64] |= 1 << (j % 64);
            self.adj[j * rw + i / 64] |= 1 << (i % 64);
            self.edges += 1;
        } else {
            self.bits[k / 64] &= !(1 << (k % 64));
            self.adj[i * rw + j / 64] &= !(1 << (j % 64));
            self.adj[j * rw + i / 64] &= !(1 << (i % 64));
            self.edges -= 1;
        }
    }

    fn insert_unchecked(&mut self, e: Edge) {
        self.set_bits(e, true);
        self.dsu.union(e.lo, e.hi);
    }

    pub fn add_edge(&mut self, e: Edge) -> Result<(), GraphError> {
        self.check(e)?;
        if self.has_edge(e) {
            return Err(GraphError::EdgePresent(e));
        }
        self.insert_unchecked(e);
        Ok(())
    }

    pub fn remove_edge(&mut self, e: Edge) -> Result<(), GraphError> {
        self.check(e)?;
        if !self.has_edge(e) {
            return Err(GraphError::EdgeAbsent(e));
        }
        self.set_bits(e, false);
        self.rebuild_components();
        Ok(())
    }

    /// Adds `e` if absent, removes it if present. Returns `true` when the
    /// edge was added.
    pub fn toggle(&mut self, e: Edge) -> Result<bool, GraphError> {
        if self.has_edge(e) {
            self.remove_edge(e)?;
            Ok(false)
        } else {
            self.add_edge(e)?;
            Ok(true)
        }
    }

    fn row(&self, v: usize) -> &[u64] {
        &self.adj[v * self.row_words..(v + 1) * self.row_words]
    }

    /// Neighbours of `v` in increasing order.
    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(v).iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + b)
            })
        })
    }

    fn rebuild_components(&mut self) {
        let n = self.n;
        let mut dsu = DisjointSet::singletons(n);
        let mut seen = vec![false; n];
        let mut stack = Vec::with_capacity(n);
        for root in 0..n {
            if seen[root] {
                continue;
            }
            seen[root] = true;
            stack.push(root);
            let mut count = 0u32;
            while let Some(v) = stack.pop() {
                count += 1;
                dsu.parent[v] = root as u32;
                for u in self.neighbors(v) {
                    if !seen[u] {
                        seen[u] = true;
                        stack.push(u);
                    }
                }
            }
            dsu.size[root] = count;
        }
        self.dsu = dsu;
    }

    /// Size of the connected component containing `v`.
    pub fn component_size(&self, v: usize) -> usize {
        self.dsu.component_size(v)
    }

    pub fn same_component(&self, a: usize, b: usize) -> bool {
        self.dsu.find(a) == self.dsu.find(b)
    }

    pub fn components(&self) -> ComponentView {
        let mut root_label = vec![usize::MAX; self.n];
        let mut labels = Vec::with_capacity(self.n);
        let mut sizes = Vec::new();
        for v in 0..self.n {
            let r = self.dsu.find(v);
            if root_label[r] == usize::MAX {
                root_label[r] = sizes.len();
                sizes.push(0);
            }
            labels.push(root_label[r]);
            sizes[root_label[r]] += 1;
        }
        ComponentView { labels, sizes }
    }

    /// Component sizes in decreasing order.
    pub fn component_sizes(&self) -> Vec<usize> {
        let mut sizes = self.components().sizes;
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes
    }

    pub fn largest_component(&self) -> usize {
        (0..self.n)
            .filter(|&v| self.dsu.find(v) == v)
            .map(|v| self.dsu.size[v] as usize)
            .max()
            .unwrap_or(0)
    }

    /// Fraction of vertices in the largest connected component.
    pub fn gcc_fraction(&self) -> f64 {
        self.largest_component() as f64 / self.n as f64
    }

    /// `|E| / (n(n-1)/2)`; zero for a single vertex.
    pub fn density(&self) -> f64 {
        if self.pairs == 0 {
            0.0
        } else {
            self.edges as f64 / self.pairs as f64
        }
    }

    /// Endpoint component sizes in the graph with `e` removed.
    ///
    /// Equal sizes mean `e` is not a bridge.
    pub fn component_sizes_without_edge(&self, e: Edge) -> Result<(usize, usize), GraphError> {
        self.check(e)?;
        if !self.has_edge(e) {
            return Err(GraphError::EdgeAbsent(e));
        }
        let total = self.component_size(e.lo);
        let mut seen = vec![false; self.n];
        let mut stack = vec![e.lo];
        seen[e.lo] = true;
        let mut reached = 0usize;
        while let Some(v) = stack.pop() {
            reached += 1;
            for u in self.neighbors(v) {
                if seen[u] || (v == e.lo && u == e.hi) || (v == e.hi && u == e.lo) {
                    continue;
                }
                seen[u] = true;
                stack.push(u);
            }
        }
        if seen[e.hi] {
            Ok((total, total))
        } else {
            Ok((reached, total - reached))
        }
    }

    /// For every edge, the endpoint component sizes after removing that edge
    /// alone, computed in one pass with a bridge-finding depth-first search.
    pub fn removal_split_sizes(&self) -> Vec<(Edge, (usize, usize))> {
        let n = self.n;
        let mut disc = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut sub = vec![1usize; n];
        let mut parent = vec![usize::MAX; n];
        let mut bridge_child: Vec<Option<usize>> = vec![None; self.pairs];
        let mut timer = 0;
        for root in 0..n {
            if disc[root] != usize::MAX {
                continue;
            }
            disc[root] = timer;
            low[root] = timer;
            timer += 1;
            // (vertex, iterator position over neighbours)
            let mut stack: Vec<(usize, Vec<usize>, usize)> =
                vec![(root, self.neighbors(root).collect(), 0)];
            while let Some(top) = stack.last_mut() {
                let v = top.0;
                if top.2 < top.1.len() {
                    let u = top.1[top.2];
                    top.2 += 1;
                    if disc[u] == usize::MAX {
                        parent[u] = v;
                        disc[u] = timer;
                        low[u] = timer;
                        timer += 1;
                        stack.push((u, self.neighbors(u).collect(), 0));
                    } else if u != parent[v] {
                        low[v] = low[v].min(disc[u]);
                    }
                } else {
                    stack.pop();
                    let p = parent[v];
                    if p != usize::MAX {
                        low[p] = low[p].min(low[v]);
                        sub[p] += sub[v];
                        if low[v] > disc[p] {
                            let k = pair_index(n, Edge::new(p, v).expect("tree edge"));
                            bridge_child[k] = Some(v);
                        }
                    }
                }
            }
        }
        self.edges()
            .map(|e| {
                let total = self.component_size(e.lo);
                let split = match bridge_child[pair_index(n, e)] {
                    Some(child) => {
                        let s = sub[child];
                        // Orient the split to the endpoints (lo, hi).
                        if child == e.lo {
                            (s, total - s)
                        } else {
                            (total - s, s)
                        }
                    }
                    None => (total, total),
                };
                (e, split)
            })
            .collect()
    }

    /// Edges in canonical lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        let n = self.n;
        self.set_positions(false).map(move |k| pair_at(n, k))
    }

    /// Non-edges in canonical lexicographic order.
    pub fn non_edges(&self) -> impl Iterator<Item = Edge> + '_ {
        let n = self.n;
        self.set_positions(true).map(move |k| pair_at(n, k))
    }

    fn last_mask(&self) -> u64 {
        match self.pairs % 64 {
            0 if self.pairs > 0 => u64::MAX,
            0 => 0,
            r => (1u64 << r) - 1,
        }
    }

    fn set_positions(&self, complement: bool) -> impl Iterator<Item = usize> + '_ {
        let last = self.bits.len() - 1;
        let last_mask = self.last_mask();
        self.bits.iter().enumerate().flat_map(move |(wi, &raw)| {
            let mut w = if complement { !raw } else { raw };
            if wi == last {
                w &= last_mask;
            }
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + b)
            })
        })
    }

    /// The `k`-th edge in canonical order.
    pub fn nth_edge(&self, k: usize) -> Option<Edge> {
        select_bit(&self.bits, self.last_mask(), false, k).map(|i| pair_at(self.n, i))
    }

    /// The `k`-th non-edge in canonical order.
    pub fn nth_non_edge(&self, k: usize) -> Option<Edge> {
        select_bit(&self.bits, self.last_mask(), true, k).map(|i| pair_at(self.n, i))
    }

    pub fn sample_uniform_edge<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Edge, GraphError> {
        if self.edges == 0 {
            return Err(GraphError::EmptySet("edge"));
        }
        let k = rng.random_range(0..self.edges);
        Ok(self.nth_edge(k).expect("rank within edge count"))
    }

    pub fn sample_uniform_nonedge<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Edge, GraphError> {
        let free = self.non_edge_count();
        if free == 0 {
            return Err(GraphError::EmptySet("non-edge"));
        }
        let k = rng.random_range(0..free);
        Ok(self.nth_non_edge(k).expect("rank within non-edge count"))
    }

    /// Edges of the complementary graph.
    pub fn complement(&self) -> DynGraph {
        let mut g = DynGraph::empty(self.n).expect("n > 0");
        for e in self.non_edges() {
            g.insert_unchecked(e);
        }
        g
    }

    /// Raw pair bitset; bit `k` corresponds to `pair_at(n, k)`.
    pub fn pair_bits(&self) -> &[u64] {
        &self.bits
    }

    /// Bitmask over pairs; only valid when `pair_count(n) <= 64`.
    pub fn pair_mask(&self) -> u64 {
        self.bits[0]
    }

    pub fn pack(&self) -> PackedGraph {
        PackedGraph {
            n: self.n,
            edges: self.edges,
            bits: self.bits.clone().into_boxed_slice(),
        }
    }
}

impl PartialEq for DynGraph {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.bits == other.bits
    }
}

impl Eq for DynGraph {}

impl Hash for DynGraph {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.n.hash(state);
        self.bits.hash(state);
    }
}

impl fmt::Debug for DynGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DynGraph")
            .field("n", &self.n)
            .field("edges", &self.edges().collect::<Vec<_>>())
            .finish()
    }
}

/// Compact edge set without component bookkeeping, used to store particle
/// histories.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PackedGraph {
    n: usize,
    edges: usize,
    bits: Box<[u64]>,
}

impl PackedGraph {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges
    }

    pub fn pair_bits(&self) -> &[u64] {
        &self.bits
    }

    pub fn unpack(&self) -> DynGraph {
        DynGraph::from_pair_bits(self.n, &self.bits).expect("packed from a valid graph")
    }
}
