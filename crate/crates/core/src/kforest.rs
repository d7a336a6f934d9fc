//! Stage-built copy of the disjoint-cliques graph (infinitely many finished
//! copies of every `K_n`) that defeats each registered total adversary
//! partition: one side always accumulates finished cliques of every size.
//!
//! Per stage the construction lays down a fresh finished base clique, seeds a
//! working component for the newest requirement, and lets every older
//! requirement either grow its working clique by one fresh vertex or freeze
//! it and restart once the adversary has classified a large-enough subclique.

use serde::{Deserialize, Serialize};

use crate::graph::{StageGraph, Vertex};
use crate::machine::AdversaryRegistry;
use crate::report::Check;

/// First Cantor coordinate, with the pairing enumerated as
/// (0,0), (0,1), (1,0), (0,2), (1,1), (2,0), …
///
/// Every value is attained infinitely often, which is what the stage
/// scheduler needs.
pub fn unpair1(s: usize) -> usize {
    // Largest w with w(w+1)/2 ≤ s.
    let mut w = 0usize;
    while (w + 1) * (w + 2) / 2 <= s {
        w += 1;
    }
    s - w * (w + 1) / 2
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KforestError {
    #[error("adversary {e} left vertex {v} unclassified at stage {s}; extension order should prevent this")]
    Unclassified { e: usize, v: Vertex, s: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagStageRecord {
    pub s: usize,
    pub pi1: usize,
    pub k: usize,
    /// Vertices of the finished base clique laid down this stage.
    pub base: Vec<Vertex>,
    /// Seed vertex of the working component started this stage.
    pub seed: Vertex,
    pub actions: Vec<DiagAction>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagAction {
    pub e: usize,
    pub kind: DiagActionKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiagActionKind {
    /// The adversary classified the whole working clique but completed
    /// neither side: grow the clique by one fresh vertex.
    Extend { v: Vertex },
    /// A side reached its target size: freeze the component and restart.
    Reset {
        side: u8,
        target: usize,
        frozen: Vec<Vertex>,
        frozen_sides: [Vec<Vertex>; 2],
        new_seed: Vertex,
        m_after: [u64; 2],
    },
}

/// Where a finished component came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "origin", rename_all = "snake_case")]
pub enum Origin {
    Base { n: usize },
    Requirement { e: usize, side: u8, target: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinishedComponent {
    pub stage: usize,
    #[serde(flatten)]
    pub origin: Origin,
    pub vertices: Vec<Vertex>,
    /// Adversary classification of the component at freeze time, for
    /// requirement components only.
    pub sides: Option<[Vec<Vertex>; 2]>,
}

#[derive(Debug, Clone)]
pub struct DiagTrace {
    pub horizon: usize,
    pub stages: Vec<DiagStageRecord>,
    pub finished: Vec<FinishedComponent>,
    pub graph: StageGraph,
    /// Final (m⁰, m¹) per requirement.
    pub final_m: Vec<[u64; 2]>,
}

fn side_of(value: u64) -> u8 {
    (value != 0) as u8
}

/// Runs the construction for stages `0..=horizon`.
///
/// Adversaries are consulted through the raw delay-gated evaluator: fresh
/// vertex numbers outgrow stage numbers quickly here, so an input-below-stage
/// convention would silence every adversary almost immediately.
pub fn diag_run(registry: &AdversaryRegistry, horizon: usize) -> Result<DiagTrace, KforestError> {
    let mut next_vertex: Vertex = 0;
    let mut edges: Vec<(Vertex, Vertex)> = Vec::new();
    let mut stages = Vec::with_capacity(horizon + 1);
    let mut finished = Vec::new();
    // Working component per started stage index; only e < registry.len()
    // ever grow, but every stage seeds one.
    let mut c_sets: Vec<Vec<Vertex>> = Vec::new();
    let mut m: Vec<[u64; 2]> = vec![[0, 0]; registry.len()];

    for s in 0..=horizon {
        let pi1 = unpair1(s);
        // Verdicts are computed up front; the stage width depends on them.
        let mut halted: Vec<(usize, u64)> = Vec::new();
        for e in 0..s.min(registry.len()) {
            let max_c = *c_sets[e].last().expect("working components stay nonempty");
            if let Some(v) = registry
                .evaluate_raw(e, max_c, s)
                .expect("index bounded by registry length")
                .halted()
            {
                halted.push((e, v));
            }
        }
        let k = pi1 + 2 + halted.len();
        let first = next_vertex;
        next_vertex += k;

        let base: Vec<Vertex> = (first..first + pi1 + 1).collect();
        for i in 0..base.len() {
            for j in i + 1..base.len() {
                edges.push((base[i], base[j]));
            }
        }
        finished.push(FinishedComponent {
            stage: s,
            origin: Origin::Base { n: base.len() },
            vertices: base.clone(),
            sides: None,
        });

        let seed = first + pi1 + 1;
        let mut alloc = seed + 1;
        let mut actions = Vec::new();

        for (e, _) in &halted {
            let e = *e;
            // Classify the whole working clique; everything below the max
            // halted at an earlier extension step, so this is total.
            let mut sides: [Vec<Vertex>; 2] = [Vec::new(), Vec::new()];
            for &z in &c_sets[e] {
                let v = registry
                    .evaluate_raw(e, z, s)
                    .expect("index checked above")
                    .halted()
                    .ok_or(KforestError::Unclassified { e, v: z, s })?;
                sides[side_of(v) as usize].push(z);
            }
            let matched = (0..2u8)
                .find(|&i| sides[i as usize].len() == unpair1(m[e][i as usize] as usize) + 1);
            match matched {
                Some(i) => {
                    let target = sides[i as usize].len();
                    let frozen = std::mem::replace(&mut c_sets[e], vec![alloc]);
                    m[e][i as usize] += 1;
                    finished.push(FinishedComponent {
                        stage: s,
                        origin: Origin::Requirement { e, side: i, target },
                        vertices: frozen.clone(),
                        sides: Some(sides.clone()),
                    });
                    actions.push(DiagAction {
                        e,
                        kind: DiagActionKind::Reset {
                            side: i,
                            target,
                            frozen,
                            frozen_sides: sides,
                            new_seed: alloc,
                            m_after: m[e],
                        },
                    });
                }
                None => {
                    for &z in &c_sets[e] {
                        edges.push((z, alloc));
                    }
                    c_sets[e].push(alloc);
                    actions.push(DiagAction {
                        e,
                        kind: DiagActionKind::Extend { v: alloc },
                    });
                }
            }
            alloc += 1;
        }
        debug_assert_eq!(alloc, first + k, "every fresh vertex consumed exactly once");

        c_sets.push(vec![seed]);
        stages.push(DiagStageRecord {
            s,
            pi1,
            k,
            base,
            seed,
            actions,
        });
    }

    let graph = StageGraph::from_edges(next_vertex, edges).expect("construction emits valid edges");
    Ok(DiagTrace {
        horizon,
        stages,
        finished,
        graph,
        final_m: m,
    })
}

/// Rebuilds the full trace (graph, finished log, counters) from stored stage
/// records, for verification without re-simulating.
pub fn trace_from_records(records: Vec<DiagStageRecord>, registry_len: usize) -> DiagTrace {
    let horizon = records.last().map(|r| r.s).unwrap_or(0);
    let mut edges: Vec<(Vertex, Vertex)> = Vec::new();
    let mut finished = Vec::new();
    let mut c_sets: Vec<Vec<Vertex>> = Vec::new();
    let mut m: Vec<[u64; 2]> = vec![[0, 0]; registry_len];
    let mut max_vertex = 0;
    for rec in &records {
        for i in 0..rec.base.len() {
            for j in i + 1..rec.base.len() {
                edges.push((rec.base[i], rec.base[j]));
            }
        }
        max_vertex = max_vertex
            .max(rec.seed)
            .max(rec.base.iter().copied().max().unwrap_or(0));
        finished.push(FinishedComponent {
            stage: rec.s,
            origin: Origin::Base { n: rec.base.len() },
            vertices: rec.base.clone(),
            sides: None,
        });
        for action in &rec.actions {
            match &action.kind {
                DiagActionKind::Extend { v } => {
                    for &z in &c_sets[action.e] {
                        edges.push((z, *v));
                    }
                    c_sets[action.e].push(*v);
                    max_vertex = max_vertex.max(*v);
                }
                DiagActionKind::Reset {
                    side,
                    target,
                    frozen,
                    frozen_sides,
                    new_seed,
                    m_after,
                } => {
                    finished.push(FinishedComponent {
                        stage: rec.s,
                        origin: Origin::Requirement {
                            e: action.e,
                            side: *side,
                            target: *target,
                        },
                        vertices: frozen.clone(),
                        sides: Some(frozen_sides.clone()),
                    });
                    if action.e < registry_len {
                        m[action.e] = *m_after;
                    }
                    c_sets[action.e] = vec![*new_seed];
                    max_vertex = max_vertex.max(*new_seed);
                }
            }
        }
        c_sets.push(vec![rec.seed]);
    }
    let graph =
        StageGraph::from_edges(max_vertex + 1, edges).expect("stored records carry valid edges");
    DiagTrace {
        horizon,
        stages: records,
        finished,
        graph,
        final_m: m,
    }
}

/// Count of finished cliques of size `n` landing wholly inside side `side`
/// under adversary `e`: frozen working components whose recorded side part
/// has exactly `n` vertices, plus base cliques whose limit classification is
/// constant `side`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FinishedCount {
    pub count: usize,
    /// Base vertices the adversary never classifies make the count partial.
    pub unclassified: usize,
}

pub fn count_finished(
    trace: &DiagTrace,
    registry: &AdversaryRegistry,
    e: usize,
    side: u8,
    n: usize,
) -> FinishedCount {
    if n == 0 {
        // K_0 is the empty graph; it never counts.
        return FinishedCount {
            count: 0,
            unclassified: 0,
        };
    }
    let mut count = 0;
    let mut unclassified = 0;
    for comp in &trace.finished {
        match &comp.origin {
            Origin::Requirement { e: owner, .. } if *owner == e => {
                let sides = comp
                    .sides
                    .as_ref()
                    .expect("requirement components carry sides");
                if sides[side as usize].len() == n {
                    count += 1;
                }
            }
            Origin::Base { n: base_n } if *base_n == n => {
                let adv = registry.get(e).expect("count_finished needs a real index");
                let mut all = true;
                for &v in &comp.vertices {
                    match adv.eval_limit(v as u64) {
                        Some(val) if side_of(val) == side => {}
                        Some(_) => {
                            all = false;
                            break;
                        }
                        None => {
                            all = false;
                            unclassified += 1;
                        }
                    }
                }
                if all {
                    count += 1;
                }
            }
            _ => {}
        }
    }
    FinishedCount {
        count,
        unclassified,
    }
}

struct Dsu {
    parent: Vec<usize>,
    verts: Vec<usize>,
    edges: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Dsu {
        Dsu {
            parent: (0..n).collect(),
            verts: vec![1; n],
            edges: vec![0; n],
        }
    }

    fn find(&mut self, v: usize) -> usize {
        if self.parent[v] != v {
            let root = self.find(self.parent[v]);
            self.parent[v] = root;
        }
        self.parent[v]
    }

    fn add_edge(&mut self, u: usize, v: usize) {
        let (ru, rv) = (self.find(u), self.find(v));
        if ru == rv {
            self.edges[ru] += 1;
        } else {
            self.parent[rv] = ru;
            self.verts[ru] += self.verts[rv];
            self.edges[ru] += self.edges[rv] + 1;
        }
    }

    fn is_clique(&mut self, v: usize) -> bool {
        let r = self.find(v);
        self.edges[r] == self.verts[r] * (self.verts[r] - 1) / 2
    }
}

/// Replays the trace and checks the structural invariants: every component is
/// a clique at every stage, resets fire exactly when a side reaches its
/// target, the working-clique size bound holds, and frozen components never
/// gain vertices or edges.
pub fn verify_diag_trace(trace: &DiagTrace, registry: &AdversaryRegistry) -> Vec<Check> {
    let mut checks = Vec::new();
    let size = trace.graph.size();
    let mut dsu = Dsu::new(size);
    let mut frozen = vec![false; size];
    let mut c_sets: Vec<Vec<Vertex>> = Vec::new();
    let mut m: Vec<[u64; 2]> = vec![[0, 0]; registry.len()];

    let mut cliques_ok = true;
    let mut resets_ok = true;
    let mut bound_ok = true;
    let mut frozen_ok = true;
    let mut arithmetic_ok = true;
    let mut detail = String::new();
    let note = |flag: &mut bool, d: &mut String, msg: String| {
        if *flag {
            *flag = false;
            d.push_str(&msg);
            d.push_str("; ");
        }
    };

    for rec in &trace.stages {
        let s = rec.s;
        if rec.pi1 != unpair1(s) || rec.k != rec.pi1 + 2 + rec.actions.len() {
            note(
                &mut arithmetic_ok,
                &mut detail,
                format!("stage width wrong at {s}"),
            );
        }
        let mut touched = Vec::new();
        for i in 0..rec.base.len() {
            for j in i + 1..rec.base.len() {
                dsu.add_edge(rec.base[i], rec.base[j]);
            }
        }
        if let Some(&v) = rec.base.first() {
            touched.push(v);
        }
        touched.push(rec.seed);
        for action in &rec.actions {
            let e = action.e;
            match &action.kind {
                DiagActionKind::Extend { v } => {
                    if c_sets[e].iter().any(|&z| frozen[z]) {
                        note(
                            &mut frozen_ok,
                            &mut detail,
                            format!("stage {s}: extend touches frozen vertex"),
                        );
                    }
                    for &z in &c_sets[e] {
                        dsu.add_edge(z, *v);
                    }
                    c_sets[e].push(*v);
                    touched.push(*v);
                }
                DiagActionKind::Reset {
                    side,
                    target,
                    frozen: frozen_set,
                    frozen_sides,
                    new_seed,
                    m_after,
                } => {
                    if frozen_set != &c_sets[e] {
                        note(
                            &mut resets_ok,
                            &mut detail,
                            format!("stage {s}: frozen set mismatch for e={e}"),
                        );
                    }
                    let expected = unpair1(m[e][*side as usize] as usize) + 1;
                    if frozen_sides[*side as usize].len() != expected || *target != expected {
                        note(
                            &mut resets_ok,
                            &mut detail,
                            format!("stage {s}: reset of e={e} without a completed side"),
                        );
                    }
                    let mut m_next = m[e];
                    m_next[*side as usize] += 1;
                    if *m_after != m_next {
                        note(
                            &mut resets_ok,
                            &mut detail,
                            format!("stage {s}: wrong counter bump for e={e}"),
                        );
                    }
                    m[e] = m_next;
                    for &z in &c_sets[e] {
                        frozen[z] = true;
                    }
                    c_sets[e] = vec![*new_seed];
                    touched.push(*new_seed);
                }
            }
            let cap = unpair1(m[e][0] as usize) + unpair1(m[e][1] as usize) + 2;
            if c_sets[e].len() > cap {
                note(
                    &mut bound_ok,
                    &mut detail,
                    format!("stage {s}: |C^{e}| = {} exceeds {}", c_sets[e].len(), cap),
                );
            }
        }
        c_sets.push(vec![rec.seed]);
        for v in touched {
            if !dsu.is_clique(v) {
                note(
                    &mut cliques_ok,
                    &mut detail,
                    format!("stage {s}: component of {v} is not a clique"),
                );
            }
        }
    }

    // Full recount at the horizon from the final edge set.
    let mut full = Dsu::new(size);
    for (u, v) in trace.graph.edges() {
        full.add_edge(u, v);
    }
    for v in 0..size {
        if !full.is_clique(v) {
            note(
                &mut cliques_ok,
                &mut detail,
                format!("final component of {v} is not a clique"),
            );
            break;
        }
    }
    if m != trace.final_m {
        note(
            &mut resets_ok,
            &mut detail,
            "final counters do not match replay".to_string(),
        );
    }

    checks.push(Check::new(
        "kforest/cliques",
        cliques_ok,
        "every component is a clique at every stage",
    ));
    checks.push(Check::new(
        "kforest/resets",
        resets_ok,
        "resets fire exactly on completed sides",
    ));
    checks.push(Check::new(
        "kforest/bound",
        bound_ok,
        "working cliques respect the size bound",
    ));
    checks.push(Check::new(
        "kforest/frozen",
        frozen_ok,
        "frozen components never grow",
    ));
    checks.push(Check::new(
        "kforest/arithmetic",
        arithmetic_ok,
        "stage widths match the action counts",
    ));
    if !detail.is_empty() {
        if let Some(c) = checks.iter_mut().find(|c| !c.pass) {
            c.detail = detail.clone();
        }
    }
    checks
}
