//! Lazy infinite graphs presented as total edge predicates.
//!
//! An oracle is a decidable edge relation on ℕ×ℕ plus optional structural
//! extras: a finite-degree enumeration schedule, isolation/universality
//! deciders, exact neighbor lists, and extension-pair certificates. The
//! shipped families are all config-serializable so runs never depend on
//! arbitrary code.
//!
//! Constructions are only allowed to consult `edge` and the schedule; the
//! deciders and certificates exist for verifiers and test oracles. That
//! split is a calling-convention discipline, not an API barrier.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dsl::{Expr, ExprSource};
use crate::graph::{ExtensionPair, Vertex};
use crate::kforest::unpair1;
use crate::random::witness_formula_checked;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("table for the injective function is not injective: {0} has two preimages")]
    NonInjectiveTable(u64),
    #[error("table for the injective function repeats domain point {0}")]
    DuplicateDomainPoint(u64),
    #[error("relabeling is not a permutation: {0}")]
    BadPermutation(String),
    #[error("finite-degree schedule is not monotone at entry {0}")]
    ScheduleNotMonotone(usize),
    #[error("finite-degree schedule lists vertex {0} twice")]
    ScheduleDuplicate(Vertex),
    #[error("bad expression: {0}")]
    Expr(#[from] crate::dsl::DslError),
}

/// Injective function supplied as a finite table or a total expression of `n`.
#[derive(Debug, Clone)]
pub enum FuncSpec {
    Table(BTreeMap<u64, u64>),
    Expr(Expr),
}

impl FuncSpec {
    pub fn table(pairs: impl IntoIterator<Item = (u64, u64)>) -> Result<FuncSpec, OracleError> {
        let mut map = BTreeMap::new();
        let mut seen = BTreeSet::new();
        for (n, m) in pairs {
            if map.insert(n, m).is_some() {
                return Err(OracleError::DuplicateDomainPoint(n));
            }
            if !seen.insert(m) {
                return Err(OracleError::NonInjectiveTable(m));
            }
        }
        Ok(FuncSpec::Table(map))
    }

    fn apply(&self, n: u64) -> Option<u64> {
        match self {
            FuncSpec::Table(t) => t.get(&n).copied(),
            FuncSpec::Expr(e) => {
                let v = e.eval(&[n as i64]);
                Some(v.max(0) as u64)
            }
        }
    }

    fn preimage(&self, m: u64) -> Option<Option<u64>> {
        // Outer None: membership in the range is not decidable for this spec.
        match self {
            FuncSpec::Table(t) => Some(t.iter().find(|(_, v)| **v == m).map(|(k, _)| *k)),
            FuncSpec::Expr(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Complete,
    Empty,
    CanonicalRandom,
    Matching,
    KforestLayout,
    AcaGadget(FuncSpec),
    EdgeList {
        edges: BTreeSet<(Vertex, Vertex)>,
        adjacency: BTreeMap<Vertex, BTreeSet<Vertex>>,
    },
    Expr(Expr),
    Relabeled {
        inner: Box<Kind>,
        fwd: BTreeMap<Vertex, Vertex>,
        inv: BTreeMap<Vertex, Vertex>,
    },
    Complement(Box<Kind>),
}

/// One of the named certificates that closes a Π⁰₁ failure claim: why no
/// witness for a pair exists anywhere in the infinite graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FailureCertificate {
    /// Some vertex in `A` has a full, finite neighbor list and every common
    /// neighbor of `A` is excluded by the pair or by an edge into `B`.
    FiniteNeighborhood { anchor: Vertex },
    /// A vertex of `B` is universal, so no vertex avoids it.
    UniversalVertex { vertex: Vertex },
}

/// Outcome of asking a family whether a pair has a witness somewhere in the
/// infinite graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Certification {
    HasWitness(Vertex),
    NoWitness(FailureCertificate),
    Unknown,
}

#[derive(Debug, Clone)]
pub struct GraphOracle {
    kind: Kind,
    description: String,
    schedule: Option<Vec<(Vertex, usize)>>,
}

impl GraphOracle {
    pub fn complete() -> GraphOracle {
        GraphOracle::new(Kind::Complete, "complete")
    }

    pub fn empty() -> GraphOracle {
        GraphOracle::new(Kind::Empty, "empty")
    }

    /// The canonical random presentation: for `u < v`, an edge iff bit `u` of
    /// `v` is 1.
    pub fn canonical_random() -> GraphOracle {
        GraphOracle::new(Kind::CanonicalRandom, "canonical-random")
    }

    /// Infinite matching: edges exactly between `2k` and `2k+1`.
    pub fn matching() -> GraphOracle {
        GraphOracle::new(Kind::Matching, "matching")
    }

    /// Consecutive clique blocks whose sizes cycle through every value
    /// infinitely often (block `i` has size `unpair1(i) + 1`).
    pub fn kforest_layout() -> GraphOracle {
        GraphOracle::new(Kind::KforestLayout, "kforest-layout")
    }

    /// Edges between `2n` and `2m+1` exactly when `f(n) = m`; odd vertex
    /// `2m+1` is isolated iff `m` is outside the range of `f`.
    pub fn aca_gadget(f: FuncSpec) -> GraphOracle {
        GraphOracle::new(Kind::AcaGadget(f), "aca-gadget")
    }

    /// A finite edge list; every vertex not touching the list is isolated.
    pub fn edge_list(edges: impl IntoIterator<Item = (Vertex, Vertex)>) -> GraphOracle {
        let mut set = BTreeSet::new();
        let mut adjacency: BTreeMap<Vertex, BTreeSet<Vertex>> = BTreeMap::new();
        for (u, v) in edges {
            if u == v {
                continue;
            }
            set.insert((u.min(v), u.max(v)));
            adjacency.entry(u).or_default().insert(v);
            adjacency.entry(v).or_default().insert(u);
        }
        GraphOracle::new(
            Kind::EdgeList {
                edges: set,
                adjacency,
            },
            "edge-list",
        )
    }

    /// Arbitrary oracle from an expression over `u, v`; the wrapper
    /// symmetrizes (evaluates on the sorted pair) and forces irreflexivity.
    pub fn from_expr(expr: Expr) -> GraphOracle {
        GraphOracle::new(Kind::Expr(expr), "expr")
    }

    /// Vertices permuted by a finite-support permutation:
    /// `edge(u, v) = inner.edge(p(u), p(v))`.
    pub fn relabeled(
        inner: GraphOracle,
        perm: impl IntoIterator<Item = (Vertex, Vertex)>,
    ) -> Result<GraphOracle, OracleError> {
        let mut fwd = BTreeMap::new();
        let mut inv = BTreeMap::new();
        for (from, to) in perm {
            if fwd.insert(from, to).is_some() {
                return Err(OracleError::BadPermutation(format!(
                    "vertex {from} mapped twice"
                )));
            }
            if inv.insert(to, from).is_some() {
                return Err(OracleError::BadPermutation(format!(
                    "vertex {to} is the image of two vertices"
                )));
            }
        }
        let keys: BTreeSet<_> = fwd.keys().copied().collect();
        let vals: BTreeSet<_> = inv.keys().copied().collect();
        if keys != vals {
            return Err(OracleError::BadPermutation(
                "support and image sets differ".into(),
            ));
        }
        let description = format!("relabeled({})", inner.description);
        Ok(GraphOracle {
            kind: Kind::Relabeled {
                inner: Box::new(inner.kind),
                fwd,
                inv,
            },
            description,
            schedule: inner.schedule,
        })
    }

    /// Edges and non-edges swapped off the diagonal.
    pub fn complemented(inner: GraphOracle) -> GraphOracle {
        let description = format!("complement({})", inner.description);
        GraphOracle {
            kind: Kind::Complement(Box::new(inner.kind)),
            description,
            schedule: None,
        }
    }

    fn new(kind: Kind, description: &str) -> GraphOracle {
        GraphOracle {
            kind,
            description: description.to_string(),
            schedule: None,
        }
    }

    /// Attaches the monotone `(vertex, reveal stage)` enumeration of the
    /// finite-degree vertices.
    pub fn with_schedule(
        mut self,
        schedule: Vec<(Vertex, usize)>,
    ) -> Result<GraphOracle, OracleError> {
        let mut seen = BTreeSet::new();
        for (i, (v, stage)) in schedule.iter().enumerate() {
            if i > 0 && schedule[i - 1].1 > *stage {
                return Err(OracleError::ScheduleNotMonotone(i));
            }
            if !seen.insert(*v) {
                return Err(OracleError::ScheduleDuplicate(*v));
            }
        }
        self.schedule = Some(schedule);
        Ok(self)
    }

    pub fn describe(&self) -> &str {
        &self.description
    }

    pub fn finite_degree_schedule(&self) -> Option<&[(Vertex, usize)]> {
        self.schedule.as_deref()
    }

    pub fn edge(&self, u: Vertex, v: Vertex) -> bool {
        if u == v {
            return false;
        }
        kind_edge(&self.kind, u.min(v), u.max(v))
    }

    /// Total isolation decider where the family admits one.
    pub fn is_isolated(&self, v: Vertex) -> Option<bool> {
        kind_isolated(&self.kind, v)
    }

    /// Total universality decider where the family admits one.
    pub fn is_universal(&self, v: Vertex) -> Option<bool> {
        kind_universal(&self.kind, v)
    }

    /// Exact, finite neighbor list when the family can produce one for `v`.
    pub fn neighbors_exact(&self, v: Vertex) -> Option<Vec<Vertex>> {
        kind_neighbors(&self.kind, v)
    }

    /// Structural verdict on whether `pair` has a witness anywhere in the
    /// infinite graph. `Unknown` is honest: nothing about the family closes
    /// the question.
    pub fn certify_pair(&self, pair: &ExtensionPair) -> Certification {
        kind_certify(&self.kind, pair)
    }
}

fn kind_edge(kind: &Kind, u: Vertex, v: Vertex) -> bool {
    // Callers guarantee u < v.
    match kind {
        Kind::Complete => true,
        Kind::Empty => false,
        Kind::CanonicalRandom => u < 64 && (v >> u) & 1 == 1,
        Kind::Matching => v == u + 1 && u % 2 == 0,
        Kind::KforestLayout => {
            let (bu, _) = kforest_block(u);
            let (bv, _) = kforest_block(v);
            bu == bv
        }
        Kind::AcaGadget(f) => {
            // Only even-odd pairs can be edges.
            let (even, odd) = if u % 2 == 0 && v % 2 == 1 {
                (u, v)
            } else if u % 2 == 1 && v % 2 == 0 {
                (v, u)
            } else {
                return false;
            };
            let n = (even / 2) as u64;
            let m = ((odd - 1) / 2) as u64;
            f.apply(n) == Some(m)
        }
        Kind::EdgeList { edges, .. } => edges.contains(&(u, v)),
        Kind::Expr(e) => e.eval_bool(&[u as i64, v as i64]),
        Kind::Relabeled { inner, fwd, .. } => {
            let pu = fwd.get(&u).copied().unwrap_or(u);
            let pv = fwd.get(&v).copied().unwrap_or(v);
            kind_edge(inner, pu.min(pv), pu.max(pv))
        }
        Kind::Complement(inner) => !kind_edge(inner, u, v),
    }
}

/// Block index and span of vertex `v` in the canonical clique layout.
fn kforest_block(v: Vertex) -> (usize, (Vertex, Vertex)) {
    let mut start = 0;
    let mut i = 0;
    loop {
        let len = unpair1(i) + 1;
        if v < start + len {
            return (i, (start, start + len));
        }
        start += len;
        i += 1;
    }
}

fn kind_isolated(kind: &Kind, v: Vertex) -> Option<bool> {
    match kind {
        Kind::Complete => Some(false),
        Kind::Empty => Some(true),
        Kind::CanonicalRandom => Some(false),
        Kind::Matching => Some(false),
        Kind::KforestLayout => {
            let (_, (start, end)) = kforest_block(v);
            Some(end - start == 1)
        }
        Kind::AcaGadget(f) => {
            if v % 2 == 0 {
                match f {
                    FuncSpec::Table(t) => Some(!t.contains_key(&((v / 2) as u64))),
                    FuncSpec::Expr(_) => Some(false),
                }
            } else {
                let m = ((v - 1) / 2) as u64;
                f.preimage(m).map(|pre| pre.is_none())
            }
        }
        Kind::EdgeList { adjacency, .. } => Some(!adjacency.contains_key(&v)),
        Kind::Expr(_) => None,
        Kind::Relabeled { inner, fwd, .. } => {
            kind_isolated(inner, fwd.get(&v).copied().unwrap_or(v))
        }
        Kind::Complement(inner) => kind_universal(inner, v),
    }
}

fn kind_universal(kind: &Kind, v: Vertex) -> Option<bool> {
    match kind {
        Kind::Complete => Some(true),
        Kind::Empty => Some(false),
        Kind::CanonicalRandom => Some(false),
        Kind::Matching => Some(false),
        Kind::KforestLayout => Some(false),
        Kind::AcaGadget(_) => Some(false),
        Kind::EdgeList { .. } => Some(false),
        Kind::Expr(_) => None,
        Kind::Relabeled { inner, fwd, .. } => {
            kind_universal(inner, fwd.get(&v).copied().unwrap_or(v))
        }
        Kind::Complement(inner) => kind_isolated(inner, v),
    }
}

fn kind_neighbors(kind: &Kind, v: Vertex) -> Option<Vec<Vertex>> {
    match kind {
        Kind::Empty => Some(vec![]),
        Kind::Matching => Some(vec![if v % 2 == 0 { v + 1 } else { v - 1 }]),
        Kind::KforestLayout => {
            let (_, (start, end)) = kforest_block(v);
            Some((start..end).filter(|&u| u != v).collect())
        }
        Kind::AcaGadget(f) => {
            if v % 2 == 0 {
                match f.apply((v / 2) as u64) {
                    Some(m) => Some(vec![2 * m as Vertex + 1]),
                    None => Some(vec![]),
                }
            } else {
                let m = ((v - 1) / 2) as u64;
                f.preimage(m)
                    .map(|pre| pre.map(|n| vec![2 * n as Vertex]).unwrap_or_default())
            }
        }
        Kind::EdgeList { adjacency, .. } => Some(
            adjacency
                .get(&v)
                .map(|s| s.iter().copied().collect())
                .unwrap_or_default(),
        ),
        Kind::Relabeled { inner, fwd, inv } => {
            let image = fwd.get(&v).copied().unwrap_or(v);
            let ns = kind_neighbors(inner, image)?;
            let mut back: Vec<Vertex> = ns
                .into_iter()
                .map(|n| inv.get(&n).copied().unwrap_or(n))
                .collect();
            back.sort_unstable();
            Some(back)
        }
        Kind::Complete | Kind::CanonicalRandom | Kind::Expr(_) | Kind::Complement(_) => None,
    }
}

fn kind_certify(kind: &Kind, pair: &ExtensionPair) -> Certification {
    match kind {
        Kind::CanonicalRandom => match witness_formula_checked(pair) {
            Some(w) => Certification::HasWitness(w),
            None => Certification::Unknown,
        },
        Kind::Complete => {
            if let Some(&b) = pair.b().iter().next() {
                Certification::NoWitness(FailureCertificate::UniversalVertex { vertex: b })
            } else {
                let w = (0..).find(|v| !pair.contains(*v)).unwrap();
                Certification::HasWitness(w)
            }
        }
        Kind::Complement(inner) => {
            let swapped = ExtensionPair::new(pair.b().iter().copied(), pair.a().iter().copied())
                .expect("sides of a valid pair stay disjoint");
            kind_certify(inner, &swapped)
        }
        Kind::Relabeled { inner, fwd, inv } => {
            let map = |v: &Vertex| fwd.get(v).copied().unwrap_or(*v);
            let mapped = ExtensionPair::new(pair.a().iter().map(map), pair.b().iter().map(map))
                .expect("permutation preserves disjointness");
            match kind_certify(inner, &mapped) {
                Certification::HasWitness(w) => {
                    Certification::HasWitness(inv.get(&w).copied().unwrap_or(w))
                }
                other => other,
            }
        }
        _ => certify_via_neighborhoods(kind, pair),
    }
}

/// Closes the witness question from exact neighbor lists: with `A` nonempty
/// the candidates are the common neighbors of `A`; with `A` empty the
/// excluded vertices are `B` and their neighbors.
fn certify_via_neighborhoods(kind: &Kind, pair: &ExtensionPair) -> Certification {
    if let Some(&anchor) = pair.a().iter().next() {
        let Some(base) = kind_neighbors(kind, anchor) else {
            return Certification::Unknown;
        };
        let mut candidates: BTreeSet<Vertex> = base.into_iter().collect();
        for &a in pair.a().iter().skip(1) {
            let Some(ns) = kind_neighbors(kind, a) else {
                return Certification::Unknown;
            };
            let set: BTreeSet<Vertex> = ns.into_iter().collect();
            candidates = candidates.intersection(&set).copied().collect();
        }
        for c in candidates {
            if !pair.contains(c)
                && pair
                    .b()
                    .iter()
                    .all(|&b| !kind_edge(kind, c.min(b), c.max(b)))
            {
                return Certification::HasWitness(c);
            }
        }
        Certification::NoWitness(FailureCertificate::FiniteNeighborhood { anchor })
    } else {
        let mut excluded: BTreeSet<Vertex> = pair.b().iter().copied().collect();
        for &b in pair.b() {
            let Some(ns) = kind_neighbors(kind, b) else {
                return Certification::Unknown;
            };
            excluded.extend(ns);
        }
        let w = (0..).find(|v| !excluded.contains(v)).unwrap();
        Certification::HasWitness(w)
    }
}

/// Serializable oracle description; `build` compiles it into a [`GraphOracle`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum OracleSpec {
    Complete,
    Empty,
    CanonicalRandom,
    Matching,
    KforestLayout,
    AcaGadget {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        table: Option<Vec<(u64, u64)>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expr: Option<ExprSource>,
    },
    EdgeList {
        edges: Vec<(Vertex, Vertex)>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        finite_degree_schedule: Option<Vec<(Vertex, usize)>>,
    },
    Expr {
        expr: ExprSource,
    },
    Relabeled {
        inner: Box<OracleSpec>,
        perm: Vec<(Vertex, Vertex)>,
    },
    Complement {
        inner: Box<OracleSpec>,
    },
}

impl OracleSpec {
    pub fn build(&self) -> Result<GraphOracle, OracleError> {
        match self {
            OracleSpec::Complete => Ok(GraphOracle::complete()),
            OracleSpec::Empty => Ok(GraphOracle::empty()),
            OracleSpec::CanonicalRandom => Ok(GraphOracle::canonical_random()),
            OracleSpec::Matching => Ok(GraphOracle::matching()),
            OracleSpec::KforestLayout => Ok(GraphOracle::kforest_layout()),
            OracleSpec::AcaGadget { table, expr } => {
                let f = match (table, expr) {
                    (Some(t), None) => FuncSpec::table(t.iter().copied())?,
                    (None, Some(src)) => FuncSpec::Expr(src.compile(&["n"])?),
                    _ => {
                        return Err(OracleError::BadPermutation(
                            "aca_gadget needs exactly one of `table` or `expr`".into(),
                        ))
                    }
                };
                Ok(GraphOracle::aca_gadget(f))
            }
            OracleSpec::EdgeList {
                edges,
                finite_degree_schedule,
            } => {
                let o = GraphOracle::edge_list(edges.iter().copied());
                match finite_degree_schedule {
                    Some(s) => o.with_schedule(s.clone()),
                    None => Ok(o),
                }
            }
            OracleSpec::Expr { expr } => Ok(GraphOracle::from_expr(expr.compile(&["u", "v"])?)),
            OracleSpec::Relabeled { inner, perm } => {
                GraphOracle::relabeled(inner.build()?, perm.iter().copied())
            }
            OracleSpec::Complement { inner } => Ok(GraphOracle::complemented(inner.build()?)),
        }
    }
}
