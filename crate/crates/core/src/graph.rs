//! Finite stage graphs and the elementary operations shared by every
//! construction: induced prefixes, complements, extension-pair witnesses, and
//! the brute-force isomorphism and indivisibility checks used as test oracles.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::dsl::Expr;
use crate::oracle::GraphOracle;

pub type Vertex = usize;

/// Brute-force cap for [`is_isomorphic_finite`]; 8! = 40320 bijections.
pub const DEFAULT_BRUTE_FORCE_CAP: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("vertex {vertex} out of range for graph of size {size}")]
    VertexOutOfRange { vertex: Vertex, size: usize },
    #[error("self-loop on vertex {0} rejected")]
    SelfLoop(Vertex),
    #[error("extension pair sides overlap on vertex {0}")]
    OverlappingPair(Vertex),
    #[error("graph size {size} exceeds brute-force cap {cap}")]
    CapExceeded { size: usize, cap: usize },
    #[error("side {side} of the partition appears finite at bound {bound}: found {found} of {wanted} vertices")]
    SideExhausted {
        side: u8,
        bound: Vertex,
        found: usize,
        wanted: usize,
    },
}

/// A finite symmetric irreflexive graph on `{0, …, size-1}`.
///
/// Edges are unordered pairs stored as `(u, v)` with `u < v`, so symmetry is
/// structural rather than checked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageGraph {
    size: usize,
    edges: BTreeSet<(Vertex, Vertex)>,
}

impl StageGraph {
    pub fn new(size: usize) -> StageGraph {
        StageGraph {
            size,
            edges: BTreeSet::new(),
        }
    }

    pub fn from_edges<I>(size: usize, edges: I) -> Result<StageGraph, GraphError>
    where
        I: IntoIterator<Item = (Vertex, Vertex)>,
    {
        let mut g = StageGraph::new(size);
        for (u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    /// Complete graph on `size` vertices.
    pub fn complete(size: usize) -> StageGraph {
        let mut g = StageGraph::new(size);
        for u in 0..size {
            for v in u + 1..size {
                g.edges.insert((u, v));
            }
        }
        g
    }

    pub fn add_edge(&mut self, u: Vertex, v: Vertex) -> Result<(), GraphError> {
        if u == v {
            return Err(GraphError::SelfLoop(u));
        }
        let w = u.max(v);
        if w >= self.size {
            return Err(GraphError::VertexOutOfRange {
                vertex: w,
                size: self.size,
            });
        }
        self.edges.insert((u.min(v), u.max(v)));
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, u: Vertex, v: Vertex) -> bool {
        u != v && self.edges.contains(&(u.min(v), u.max(v)))
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vertex, Vertex)> + '_ {
        self.edges.iter().copied()
    }

    pub fn degree(&self, v: Vertex) -> usize {
        (0..self.size).filter(|&u| self.has_edge(u, v)).count()
    }

    pub fn is_isolated(&self, v: Vertex) -> bool {
        (0..self.size).all(|u| !self.has_edge(u, v))
    }

    /// Swaps edges and non-edges off the diagonal.
    pub fn complement(&self) -> StageGraph {
        let mut g = StageGraph::new(self.size);
        for u in 0..self.size {
            for v in u + 1..self.size {
                if !self.has_edge(u, v) {
                    g.edges.insert((u, v));
                }
            }
        }
        g
    }

    /// Induced subgraph on `verts`, relabeled to `0..verts.len()` in the
    /// given order. Duplicates and out-of-range vertices are rejected.
    pub fn induced(&self, verts: &[Vertex]) -> Result<StageGraph, GraphError> {
        let mut seen = BTreeSet::new();
        for &v in verts {
            if v >= self.size {
                return Err(GraphError::VertexOutOfRange {
                    vertex: v,
                    size: self.size,
                });
            }
            seen.insert(v);
        }
        debug_assert_eq!(seen.len(), verts.len());
        let mut g = StageGraph::new(verts.len());
        for (i, &u) in verts.iter().enumerate() {
            for (j, &v) in verts.iter().enumerate().skip(i + 1) {
                if self.has_edge(u, v) {
                    g.edges.insert((i.min(j), i.max(j)));
                }
            }
        }
        Ok(g)
    }

    /// Sorted degree sequence, used as a cheap isomorphism invariant.
    fn degree_sequence(&self) -> Vec<usize> {
        let mut d = vec![0usize; self.size];
        for &(u, v) in &self.edges {
            d[u] += 1;
            d[v] += 1;
        }
        d.sort_unstable();
        d
    }

    /// DOT rendering with one node per vertex and undirected edges.
    pub fn to_dot(&self, name: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "graph {name} {{");
        for v in 0..self.size {
            let _ = writeln!(out, "  {v};");
        }
        for &(u, v) in &self.edges {
            let _ = writeln!(out, "  {u} -- {v};");
        }
        out.push_str("}\n");
        out
    }
}

impl<'de> Deserialize<'de> for StageGraph {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            size: usize,
            edges: Vec<(Vertex, Vertex)>,
        }
        let raw = Raw::deserialize(deserializer)?;
        let mut g = StageGraph::new(raw.size);
        for (u, v) in raw.edges {
            g.add_edge(u, v).map_err(serde::de::Error::custom)?;
        }
        Ok(g)
    }
}

/// Disjoint finite vertex sets `⟨A, B⟩`: a witness must connect to all of `A`
/// and none of `B`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExtensionPair {
    a_side: BTreeSet<Vertex>,
    b_side: BTreeSet<Vertex>,
}

impl ExtensionPair {
    pub fn new<A, B>(a: A, b: B) -> Result<ExtensionPair, GraphError>
    where
        A: IntoIterator<Item = Vertex>,
        B: IntoIterator<Item = Vertex>,
    {
        let a_side: BTreeSet<Vertex> = a.into_iter().collect();
        let b_side: BTreeSet<Vertex> = b.into_iter().collect();
        if let Some(&v) = a_side.intersection(&b_side).next() {
            return Err(GraphError::OverlappingPair(v));
        }
        Ok(ExtensionPair { a_side, b_side })
    }

    pub fn empty() -> ExtensionPair {
        ExtensionPair {
            a_side: BTreeSet::new(),
            b_side: BTreeSet::new(),
        }
    }

    pub fn a(&self) -> &BTreeSet<Vertex> {
        &self.a_side
    }

    pub fn b(&self) -> &BTreeSet<Vertex> {
        &self.b_side
    }

    pub fn size(&self) -> usize {
        self.a_side.len() + self.b_side.len()
    }

    pub fn contains(&self, v: Vertex) -> bool {
        self.a_side.contains(&v) || self.b_side.contains(&v)
    }

    pub fn support(&self) -> impl Iterator<Item = Vertex> + '_ {
        self.a_side.iter().chain(self.b_side.iter()).copied()
    }

    pub fn max_support(&self) -> Option<Vertex> {
        self.support().max()
    }

    /// Whether `v` witnesses this pair under the given edge predicate.
    pub fn witnessed_by(&self, v: Vertex, edge: impl Fn(Vertex, Vertex) -> bool) -> bool {
        !self.contains(v)
            && self.a_side.iter().all(|&a| edge(v, a))
            && self.b_side.iter().all(|&b| !edge(v, b))
    }
}

/// A total two-coloring of the vertices.
#[derive(Debug, Clone)]
pub struct Partition {
    kind: PartitionKind,
}

#[derive(Debug, Clone)]
enum PartitionKind {
    Parity,
    Threshold(Vertex),
    Constant(u8),
    Expr(Expr),
}

impl Partition {
    pub fn parity() -> Partition {
        Partition {
            kind: PartitionKind::Parity,
        }
    }

    /// Side 0 below the threshold, side 1 from it on.
    pub fn threshold(at: Vertex) -> Partition {
        Partition {
            kind: PartitionKind::Threshold(at),
        }
    }

    pub fn constant(side: u8) -> Partition {
        Partition {
            kind: PartitionKind::Constant(side.min(1)),
        }
    }

    /// Side 1 where the expression (over variable `v`) is nonzero.
    pub fn from_expr(expr: Expr) -> Partition {
        Partition {
            kind: PartitionKind::Expr(expr),
        }
    }

    pub fn side(&self, v: Vertex) -> u8 {
        match &self.kind {
            PartitionKind::Parity => (v % 2) as u8,
            PartitionKind::Threshold(t) => (v >= *t) as u8,
            PartitionKind::Constant(s) => *s,
            PartitionKind::Expr(e) => e.eval_bool(&[v as i64]) as u8,
        }
    }
}

/// Induced subgraph of `oracle` on `{0, …, s}`.
pub fn stage_prefix(oracle: &GraphOracle, s: Vertex) -> StageGraph {
    let mut g = StageGraph::new(s + 1);
    for u in 0..=s {
        for v in u + 1..=s {
            if oracle.edge(u, v) {
                g.edges.insert((u, v));
            }
        }
    }
    g
}

/// Least vertex of `g` outside the pair that connects to all of `A` and none
/// of `B`. Absence only means the pair fails within this stage graph.
pub fn has_extension_witness(g: &StageGraph, pair: &ExtensionPair) -> Option<Vertex> {
    if let Some(max) = pair.max_support() {
        assert!(max < g.size(), "extension pair exceeds graph size");
    }
    (0..g.size()).find(|&v| pair.witnessed_by(v, |a, b| g.has_edge(a, b)))
}

/// Exhaustive isomorphism test below [`DEFAULT_BRUTE_FORCE_CAP`].
pub fn is_isomorphic_finite(g1: &StageGraph, g2: &StageGraph) -> Result<bool, GraphError> {
    is_isomorphic_finite_with_cap(g1, g2, DEFAULT_BRUTE_FORCE_CAP)
}

pub fn is_isomorphic_finite_with_cap(
    g1: &StageGraph,
    g2: &StageGraph,
    cap: usize,
) -> Result<bool, GraphError> {
    let n = g1.size().max(g2.size());
    if n > cap {
        return Err(GraphError::CapExceeded { size: n, cap });
    }
    if g1.size() != g2.size() {
        return Ok(false);
    }
    if g1.edge_count() != g2.edge_count() {
        return Ok(false);
    }
    if g1.degree_sequence() != g2.degree_sequence() {
        return Ok(false);
    }
    let n = g1.size();
    for perm in (0..n).permutations(n) {
        let ok = g1.edges().all(|(u, v)| g2.has_edge(perm[u], perm[v]));
        if ok {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Whether some side of every bipartition (trivial ones included) induces a
/// graph isomorphic to `g`. True only for the single-vertex graph.
pub fn is_strongly_indivisible_finite(g: &StageGraph) -> Result<bool, GraphError> {
    is_strongly_indivisible_finite_with_cap(g, DEFAULT_BRUTE_FORCE_CAP)
}

pub fn is_strongly_indivisible_finite_with_cap(
    g: &StageGraph,
    cap: usize,
) -> Result<bool, GraphError> {
    let n = g.size();
    if n > cap {
        return Err(GraphError::CapExceeded { size: n, cap });
    }
    for mask in 0u64..(1u64 << n) {
        let side0: Vec<Vertex> = (0..n).filter(|&v| mask >> v & 1 == 0).collect();
        let side1: Vec<Vertex> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
        let ok0 = is_isomorphic_finite_with_cap(&g.induced(&side0)?, g, cap)?;
        let ok1 = ok0 || is_isomorphic_finite_with_cap(&g.induced(&side1)?, g, cap)?;
        if !ok1 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// First `k` vertices of the given side in increasing order, searching below
/// `bound`. These are the initial segment of the order isomorphism from the
/// side onto the homogeneous graph it induces.
pub fn side_iso_prefix(
    partition: &Partition,
    side: u8,
    k: usize,
    bound: Vertex,
) -> Result<Vec<Vertex>, GraphError> {
    let mut out = Vec::with_capacity(k);
    for v in 0..bound {
        if out.len() == k {
            break;
        }
        if partition.side(v) == side {
            out.push(v);
        }
    }
    if out.len() < k {
        return Err(GraphError::SideExhausted {
            side,
            bound,
            found: out.len(),
            wanted: k,
        });
    }
    Ok(out)
}
