//! Stage-built graph whose least failing extension-pair size tracks the
//! least `n` with `ψ(n) = ∃x ∀y φ(n,x,y)`.
//!
//! Each size-`n` strategy keeps a candidate witness `x_n` and a fresh vertex
//! set `F_n` of size `n`, and protects `⟨F_n, ∅⟩` from ever receiving an
//! extension witness while `x_n` survives its bounded universal checks. When
//! the check fails, the strategy re-seeds `F_n` from fresh vertices, bumps
//! `x_n`, and extension witnesses are granted to the pairs of the previous
//! graph — except those swallowing a protected `F_m`.
//!
//! Witness granting is demand-driven: pairs are enumerated in canonical
//! order behind a persistent cursor per size, pairs that already have a
//! witness are skipped, and at most a configured batch of pairs is examined
//! per acting stage. The literal all-pairs re-witnessing at every acting
//! stage grows at a non-elementary rate and cannot run to any useful
//! horizon; the cursor discipline preserves the per-stage arithmetic, the
//! protection invariant, and eventual coverage of every pair.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dsl::Expr;
use crate::graph::Vertex;
use crate::report::Check;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GadgetError {
    #[error("predicate carries no universal bound, so truth of the underlying statement is not decidable here")]
    NoYBound,
    #[error("strategy {0} did not stabilize within the horizon")]
    NotStabilized(usize),
    #[error("the shifted statement must be false at 0; run preprocess first")]
    PsiZeroHolds,
    #[error("strategy index {0} was never realized")]
    NeverRealized(usize),
}

/// A decidable three-place predicate, with an optional certificate that the
/// universal quantifier is settled by checking `y ≤ y_bound` (test-harness
/// use only). The `shift` counts preprocess applications.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhiPredicate {
    expr: Expr,
    pub y_bound: Option<u64>,
    shift: u64,
}

impl PhiPredicate {
    pub fn new(expr: Expr, y_bound: Option<u64>) -> PhiPredicate {
        PhiPredicate {
            expr,
            y_bound,
            shift: 0,
        }
    }

    pub fn eval(&self, n: u64, x: u64, y: u64) -> bool {
        if n < self.shift {
            return false;
        }
        self.expr
            .eval_bool(&[(n - self.shift) as i64, x as i64, y as i64])
    }
}

/// Shifts the statement by one: the result is false at 0 and agrees with the
/// input at `n+1`.
pub fn preprocess(phi: &PhiPredicate) -> PhiPredicate {
    PhiPredicate {
        expr: phi.expr.clone(),
        y_bound: phi.y_bound,
        shift: phi.shift + 1,
    }
}

/// Independent truth oracle for the bounded statement: `∃x ≤ x_search_bound
/// ∀y ≤ y_bound φ(n,x,y)`. Refuses predicates without a universal bound.
pub fn psi_oracle(phi: &PhiPredicate, n: u64, x_search_bound: u64) -> Result<bool, GadgetError> {
    let y_bound = phi.y_bound.ok_or(GadgetError::NoYBound)?;
    Ok((0..=x_search_bound).any(|x| (0..=y_bound).all(|y| phi.eval(n, x, y))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GadgetConfig {
    pub horizon: usize,
    /// Only sizes up to the cap take part in pair witnessing.
    pub n_cap: usize,
    /// Pair slots examined per size per acting stage.
    pub witness_batch: usize,
}

impl Default for GadgetConfig {
    fn default() -> GadgetConfig {
        GadgetConfig {
            horizon: 300,
            n_cap: 4,
            witness_batch: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessRecord {
    pub v: Vertex,
    pub n: usize,
    pub x0: Vec<Vertex>,
    pub x1: Vec<Vertex>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GadgetStageRecord {
    pub s: usize,
    /// Max vertex after the stage.
    pub m: Vertex,
    pub y_set: Vec<usize>,
    /// `(n, k_n)` for the acting sizes.
    pub k: Vec<(usize, usize)>,
    pub witnesses: Vec<WitnessRecord>,
    /// `(n, new x)` for acting sizes.
    pub x_updates: Vec<(usize, u64)>,
    /// `(n, fresh range start)` for acting sizes; the set is `start..start+n`.
    pub f_updates: Vec<(usize, Vertex)>,
    /// Strategy seeded this stage: `(n = s, range start)`.
    pub seed: Option<(usize, Vertex)>,
}

#[derive(Debug, Clone)]
pub struct GadgetRun {
    pub config: GadgetConfig,
    pub stages: Vec<GadgetStageRecord>,
    pub m_final: Vertex,
    pub adjacency: BTreeMap<Vertex, BTreeSet<Vertex>>,
    /// Final `x_n` per realized strategy (index = n; 0 unused).
    pub x_final: Vec<Option<u64>>,
    /// Final `F_n` range start per realized strategy.
    pub f_final: Vec<Option<Vertex>>,
}

impl GadgetRun {
    pub fn edge(&self, u: Vertex, v: Vertex) -> bool {
        u != v
            && self
                .adjacency
                .get(&u)
                .map(|ns| ns.contains(&v))
                .unwrap_or(false)
    }

    pub fn f_set(&self, n: usize) -> Result<Vec<Vertex>, GadgetError> {
        let start = self
            .f_final
            .get(n)
            .copied()
            .flatten()
            .ok_or(GadgetError::NeverRealized(n))?;
        Ok((start..start + n).collect())
    }

    /// Stage after which neither `x_n` nor `F_n` ever changed, or `None` when
    /// the strategy was still churning at the horizon.
    pub fn stabilization_stage(&self, n: usize) -> Option<usize> {
        let mut last_change = None;
        for rec in &self.stages {
            let touched = rec.x_updates.iter().any(|&(m, _)| m == n)
                || rec.f_updates.iter().any(|&(m, _)| m == n)
                || matches!(rec.seed, Some((m, _)) if m == n);
            if touched {
                last_change = Some(rec.s);
            }
        }
        let last = last_change?;
        (last < self.config.horizon).then_some(last)
    }
}

/// Per-strategy search state for `least x ≤ s with ∀y ≤ s φ(n,x,y)`.
/// Failures are discovered in ascending `x` order, so the failed set stays
/// contiguous and the whole run tests each `x` at most once past its failure.
#[derive(Debug, Clone)]
struct XSearch {
    frontier: u64,
    passing: Option<u64>,
    verified_y: u64,
}

impl XSearch {
    fn new() -> XSearch {
        XSearch {
            frontier: 0,
            passing: None,
            verified_y: 0,
        }
    }

    /// Does the current candidate fail some `y ≤ s`?
    fn current_fails(&mut self, phi: &PhiPredicate, n: u64, current: u64, s: u64) -> bool {
        if self.passing == Some(current) {
            let from = self.verified_y + 1;
            for y in from..=s {
                if !phi.eval(n, current, y) {
                    self.passing = None;
                    self.frontier = self.frontier.max(current + 1);
                    return true;
                }
            }
            self.verified_y = s;
            false
        } else {
            (0..=s).any(|y| !phi.eval(n, current, y))
        }
    }

    /// Least `x ≤ s` passing all `y ≤ s`, else `s + 1`.
    fn advance(&mut self, phi: &PhiPredicate, n: u64, s: u64) -> u64 {
        let mut x = self.frontier;
        while x <= s {
            if (0..=s).all(|y| phi.eval(n, x, y)) {
                self.passing = Some(x);
                self.verified_y = s;
                self.frontier = x;
                return x;
            }
            x += 1;
            self.frontier = x;
        }
        self.passing = None;
        s + 1
    }
}

/// Canonical enumeration of size-`n` pairs: ascending support maximum, then
/// lexicographic lower support, then the side mask (a set bit sends the
/// element to the avoid side).
#[derive(Debug, Clone)]
struct PairCursor {
    n: usize,
    max_v: Vertex,
    lower: Vec<Vertex>,
    mask: u32,
}

impl PairCursor {
    fn new(n: usize) -> PairCursor {
        PairCursor {
            n,
            max_v: n - 1,
            lower: (0..n - 1).collect(),
            mask: 0,
        }
    }

    /// Next pair with support inside `{0..vertex_limit}`, or `None` once the
    /// enumeration is ahead of the graph.
    fn next(&mut self, vertex_limit: Vertex) -> Option<(Vec<Vertex>, Vec<Vertex>)> {
        if self.max_v >= vertex_limit {
            return None;
        }
        let mut support = self.lower.clone();
        support.push(self.max_v);
        let x0: Vec<Vertex> = support
            .iter()
            .enumerate()
            .filter(|(i, _)| self.mask >> i & 1 == 0)
            .map(|(_, &v)| v)
            .collect();
        let x1: Vec<Vertex> = support
            .iter()
            .enumerate()
            .filter(|(i, _)| self.mask >> i & 1 == 1)
            .map(|(_, &v)| v)
            .collect();
        self.bump();
        Some((x0, x1))
    }

    fn bump(&mut self) {
        self.mask += 1;
        if self.mask < (1u32 << self.n) {
            return;
        }
        self.mask = 0;
        let k = self.lower.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.max_v += 1;
                self.lower = (0..k).collect();
                return;
            }
            i -= 1;
            let limit = self.max_v - (k - i);
            if self.lower[i] < limit {
                self.lower[i] += 1;
                for j in i + 1..k {
                    self.lower[j] = self.lower[j - 1] + 1;
                }
                return;
            }
        }
    }
}

struct Builder {
    adjacency: BTreeMap<Vertex, BTreeSet<Vertex>>,
    m: Vertex,
    /// The two most recent seed ranges: a pool of vertices known isolated in
    /// the previous graph.
    recent_seeds: Vec<(Vertex, usize)>,
}

impl Builder {
    fn add_witness_edges(&mut self, w: Vertex, x0: &[Vertex]) {
        for &u in x0 {
            self.adjacency.entry(w).or_default().insert(u);
            self.adjacency.entry(u).or_default().insert(w);
        }
    }

    fn has_pair_witness(&self, x0: &[Vertex], x1: &[Vertex]) -> bool {
        let in_support = |v: Vertex| x0.contains(&v) || x1.contains(&v);
        if let Some(&anchor) = x0.first() {
            let Some(base) = self.adjacency.get(&anchor) else {
                return false;
            };
            'cand: for &c in base {
                if in_support(c) {
                    continue;
                }
                for &u in &x0[1..] {
                    if !self
                        .adjacency
                        .get(&u)
                        .map(|ns| ns.contains(&c))
                        .unwrap_or(false)
                    {
                        continue 'cand;
                    }
                }
                for &u in x1 {
                    if self
                        .adjacency
                        .get(&c)
                        .map(|ns| ns.contains(&u))
                        .unwrap_or(false)
                    {
                        continue 'cand;
                    }
                }
                return true;
            }
            false
        } else {
            // Any isolated vertex outside the support works; the recent seed
            // ranges supply one once they outgrow the support.
            for &(start, len) in &self.recent_seeds {
                for v in start..start + len {
                    if !in_support(v) && !self.adjacency.contains_key(&v) {
                        return true;
                    }
                }
            }
            false
        }
    }
}

/// Runs the construction for stages `0..=horizon`.
pub fn gadget_run(phi: &PhiPredicate, config: GadgetConfig) -> Result<GadgetRun, GadgetError> {
    if let Some(yb) = phi.y_bound {
        let psi0 = (0..=config.horizon as u64).any(|x| (0..=yb).all(|y| phi.eval(0, x, y)));
        if psi0 {
            return Err(GadgetError::PsiZeroHolds);
        }
    }
    let horizon = config.horizon;
    let mut builder = Builder {
        adjacency: BTreeMap::new(),
        m: 0,
        recent_seeds: Vec::new(),
    };
    let mut x_val: Vec<Option<u64>> = vec![None; horizon + 2];
    let mut f_start: Vec<Option<Vertex>> = vec![None; horizon + 2];
    let mut searches: Vec<XSearch> = (0..horizon + 2).map(|_| XSearch::new()).collect();
    let mut cursors: Vec<Option<PairCursor>> = (0..config.n_cap + 1)
        .map(|n| (n >= 1).then(|| PairCursor::new(n)))
        .collect();
    let mut deferred: Vec<Vec<(Vec<Vertex>, Vec<Vertex>)>> = vec![Vec::new(); config.n_cap + 1];

    let mut stages: Vec<GadgetStageRecord> = Vec::with_capacity(horizon + 1);
    // Stage 0 is a throwaway: one vertex, no strategies.
    stages.push(GadgetStageRecord {
        s: 0,
        m: 0,
        y_set: vec![],
        k: vec![],
        witnesses: vec![],
        x_updates: vec![],
        f_updates: vec![],
        seed: None,
    });
    if horizon >= 1 {
        // Stage 1 sets the first real parameters for the size-1 strategy.
        builder.m = 1;
        x_val[1] = Some(0);
        f_start[1] = Some(1);
        builder.recent_seeds = vec![(1, 1)];
        stages.push(GadgetStageRecord {
            s: 1,
            m: 1,
            y_set: vec![],
            k: vec![],
            witnesses: vec![],
            x_updates: vec![(1, 0)],
            f_updates: vec![],
            seed: Some((1, 1)),
        });
    }

    for s in 2..=horizon {
        let vertex_limit = builder.m + 1; // pairs live in the previous graph
        let y_set: Vec<usize> = (1..s)
            .filter(|&n| {
                let cur = x_val[n].expect("strategies below the stage are realized");
                searches[n].current_fails(phi, n as u64, cur, s as u64)
            })
            .collect();
        let in_y = |m: usize| y_set.binary_search(&m).is_ok();

        let mut k: Vec<(usize, usize)> = Vec::new();
        let mut to_witness: Vec<(usize, Vec<Vertex>, Vec<Vertex>)> = Vec::new();
        for &n in y_set.iter().filter(|&&n| n <= config.n_cap) {
            let mut granted = 0usize;
            let mut still_parked = Vec::new();
            let handle =
                |x0: Vec<Vertex>,
                 x1: Vec<Vertex>,
                 parked_out: &mut Vec<(Vec<Vertex>, Vec<Vertex>)>,
                 granted: &mut usize,
                 queue: &mut Vec<(usize, Vec<Vertex>, Vec<Vertex>)>| {
                    let excluded = (1..n).any(|m| {
                        !in_y(m)
                            && f_start[m]
                                .map(|st| (st..st + m).all(|v| x0.contains(&v)))
                                .unwrap_or(false)
                    });
                    if excluded {
                        parked_out.push((x0, x1));
                        return;
                    }
                    if !builder.has_pair_witness(&x0, &x1) {
                        *granted += 1;
                        queue.push((n, x0, x1));
                    }
                };
            // Pairs parked by the exclusion come first: they are canonically
            // older than anything at the cursor.
            for (x0, x1) in std::mem::take(&mut deferred[n]) {
                handle(x0, x1, &mut still_parked, &mut granted, &mut to_witness);
            }
            let cursor = cursors[n].as_mut().expect("cursor exists for capped sizes");
            for _ in 0..config.witness_batch {
                match cursor.next(vertex_limit) {
                    Some((x0, x1)) => {
                        handle(x0, x1, &mut still_parked, &mut granted, &mut to_witness)
                    }
                    None => break,
                }
            }
            deferred[n] = still_parked;
            k.push((n, granted));
        }

        let k_sum: usize = k.iter().map(|&(_, kn)| kn).sum();
        let n_sum: usize = y_set.iter().sum();
        let m_prev = builder.m;
        builder.m = if y_set.is_empty() {
            m_prev + s
        } else {
            m_prev + s + k_sum + n_sum
        };

        let mut alloc = m_prev + 1;
        let mut witnesses = Vec::with_capacity(to_witness.len());
        for (n, x0, x1) in to_witness {
            builder.add_witness_edges(alloc, &x0);
            witnesses.push(WitnessRecord {
                v: alloc,
                n,
                x0,
                x1,
            });
            alloc += 1;
        }
        let mut x_updates = Vec::with_capacity(y_set.len());
        let mut f_updates = Vec::with_capacity(y_set.len());
        for &n in &y_set {
            let new_x = searches[n].advance(phi, n as u64, s as u64);
            debug_assert!(
                x_val[n].unwrap() <= new_x,
                "candidate witnesses never move down"
            );
            x_val[n] = Some(new_x);
            x_updates.push((n, new_x));
            f_start[n] = Some(alloc);
            f_updates.push((n, alloc));
            alloc += n;
        }
        // Seed the size-s strategy from the remaining fresh vertices.
        let seed_start = alloc;
        x_val[s] = Some(0);
        searches[s] = XSearch::new();
        f_start[s] = Some(seed_start);
        alloc += s;
        debug_assert_eq!(
            alloc,
            builder.m + 1,
            "every fresh vertex consumed exactly once"
        );
        builder.recent_seeds.push((seed_start, s));
        if builder.recent_seeds.len() > 2 {
            builder.recent_seeds.remove(0);
        }

        // Protection: no fresh witness may cover a stable strategy set.
        debug_assert!(witnesses.iter().all(|w| {
            (1..=s.min(config.n_cap)).all(|m| {
                in_y(m) || f_start[m].is_none_or(|st| !(st..st + m).all(|v| w.x0.contains(&v)))
            })
        }));

        stages.push(GadgetStageRecord {
            s,
            m: builder.m,
            y_set,
            k,
            witnesses,
            x_updates,
            f_updates,
            seed: Some((s, seed_start)),
        });
    }

    Ok(GadgetRun {
        config,
        stages,
        m_final: builder.m,
        adjacency: builder.adjacency,
        x_final: x_val,
        f_final: f_start,
    })
}

/// Rebuilds a run from stored stage records, for verification without
/// re-simulating.
pub fn run_from_records(config: GadgetConfig, records: Vec<GadgetStageRecord>) -> GadgetRun {
    let horizon = config.horizon;
    let mut adjacency: BTreeMap<Vertex, BTreeSet<Vertex>> = BTreeMap::new();
    let mut x_val: Vec<Option<u64>> = vec![None; horizon + 2];
    let mut f_start: Vec<Option<Vertex>> = vec![None; horizon + 2];
    let mut m_final = 0;
    for rec in &records {
        for w in &rec.witnesses {
            for &u in &w.x0 {
                adjacency.entry(w.v).or_default().insert(u);
                adjacency.entry(u).or_default().insert(w.v);
            }
        }
        for &(n, x) in &rec.x_updates {
            x_val[n] = Some(x);
        }
        for &(n, st) in &rec.f_updates {
            f_start[n] = Some(st);
        }
        if let Some((n, st)) = rec.seed {
            f_start[n] = Some(st);
            if x_val[n].is_none() {
                x_val[n] = Some(0);
            }
        }
        m_final = rec.m;
    }
    GadgetRun {
        config,
        stages: records,
        m_final,
        adjacency,
        x_final: x_val,
        f_final: f_start,
    }
}

/// Whether the stabilized `F_m` stayed witness-free from `from_stage` to the
/// horizon: since edges only ever gain a fresh endpoint, this reduces to the
/// final graph having no common neighbor of `F_m`.
pub fn failure_protected(
    run: &GadgetRun,
    m: usize,
    from_stage: usize,
) -> Result<bool, GadgetError> {
    let stab = run
        .stabilization_stage(m)
        .ok_or(GadgetError::NotStabilized(m))?;
    if from_stage < stab {
        return Err(GadgetError::NotStabilized(m));
    }
    let f = run.f_set(m)?;
    let Some(base) = run.adjacency.get(&f[0]) else {
        return Ok(true);
    };
    let common = base.iter().any(|&c| {
        f[1..].iter().all(|&u| {
            run.adjacency
                .get(&u)
                .map(|ns| ns.contains(&c))
                .unwrap_or(false)
        })
    });
    Ok(!common)
}

/// Extension check against the finished graph: a vertex outside the pair
/// adjacent to all of `x0` and none of `x1`. For an empty `x0` the last seed
/// range supplies an isolated witness.
pub fn pair_witnessed_in_final(run: &GadgetRun, x0: &[Vertex], x1: &[Vertex]) -> bool {
    let in_support = |v: Vertex| x0.contains(&v) || x1.contains(&v);
    if let Some(&anchor) = x0.first() {
        let Some(base) = run.adjacency.get(&anchor) else {
            return false;
        };
        base.iter().any(|&c| {
            !in_support(c)
                && x0[1..].iter().all(|&u| {
                    run.adjacency
                        .get(&u)
                        .map(|ns| ns.contains(&c))
                        .unwrap_or(false)
                })
                && x1.iter().all(|&u| {
                    !run.adjacency
                        .get(&c)
                        .map(|ns| ns.contains(&u))
                        .unwrap_or(false)
                })
        })
    } else {
        let Some((start, len)) = run
            .stages
            .last()
            .and_then(|r| r.seed.map(|(n, st)| (st, n)))
        else {
            return false;
        };
        (start..start + len).any(|v| !in_support(v) && !run.adjacency.contains_key(&v))
    }
}

/// Every size-`m` pair over the vertex prefix `{0..=prefix}` has an extension
/// witness in the final graph.
pub fn prefix_pairs_witnessed(run: &GadgetRun, m: usize, prefix: Vertex) -> bool {
    let mut cursor = PairCursor::new(m);
    while let Some((x0, x1)) = cursor.next(prefix + 1) {
        if !pair_witnessed_in_final(run, &x0, &x1) {
            return false;
        }
    }
    true
}

/// Replay checks over a finished run: the stage arithmetic, exact fresh
/// vertex consumption, witness-edge fidelity, the protection invariant, and
/// monotone candidate witnesses.
pub fn verify_gadget_trace(run: &GadgetRun, phi: &PhiPredicate) -> Vec<Check> {
    let mut arithmetic_ok = true;
    let mut consumption_ok = true;
    let mut fidelity_ok = true;
    let mut protection_ok = true;
    let mut monotone_ok = true;
    let mut y_ok = true;
    let mut detail = String::new();

    let mut adjacency: BTreeMap<Vertex, BTreeSet<Vertex>> = BTreeMap::new();
    let mut f_ranges: Vec<Option<(Vertex, usize)>> = vec![None; run.config.horizon + 2];
    let mut x_prev: Vec<Option<u64>> = vec![None; run.config.horizon + 2];
    let mut prev_m: Vertex = 0;

    for rec in &run.stages {
        let s = rec.s;
        if s < 2 {
            if let Some((n, st)) = rec.seed {
                f_ranges[n] = Some((st, n));
            }
            for &(n, x) in &rec.x_updates {
                x_prev[n] = Some(x);
            }
            prev_m = rec.m;
            continue;
        }
        let k_sum: usize = rec.k.iter().map(|&(_, kn)| kn).sum();
        let n_sum: usize = rec.y_set.iter().sum();
        let expected_m = if rec.y_set.is_empty() {
            prev_m + s
        } else {
            prev_m + s + k_sum + n_sum
        };
        if rec.m != expected_m {
            arithmetic_ok = false;
            detail.push_str(&format!("stage {s}: m mismatch; "));
        }
        if rec.witnesses.len() != k_sum {
            arithmetic_ok = false;
            detail.push_str(&format!("stage {s}: witness count differs from k; "));
        }
        // Consumption: witnesses, then strategy ranges, then the seed.
        let mut alloc = prev_m + 1;
        for w in &rec.witnesses {
            if w.v != alloc {
                consumption_ok = false;
                detail.push_str(&format!("stage {s}: witness id out of order; "));
            }
            alloc += 1;
        }
        for &(n, st) in &rec.f_updates {
            if st != alloc {
                consumption_ok = false;
                detail.push_str(&format!("stage {s}: strategy range out of order; "));
            }
            alloc += n;
        }
        match rec.seed {
            Some((n, st)) if n == s => {
                if st != alloc {
                    consumption_ok = false;
                    detail.push_str(&format!("stage {s}: seed range out of order; "));
                }
                alloc += n;
            }
            _ => {
                consumption_ok = false;
                detail.push_str(&format!("stage {s}: missing seed; "));
            }
        }
        if alloc != rec.m + 1 {
            consumption_ok = false;
            detail.push_str(&format!("stage {s}: fresh vertices not exactly consumed; "));
        }
        for w in &rec.witnesses {
            if w.x0.iter().chain(w.x1.iter()).any(|&v| v > prev_m) {
                fidelity_ok = false;
                detail.push_str(&format!(
                    "stage {s}: pair reaches outside the previous graph; "
                ));
            }
            for m in 1..=w.x0.len() {
                if rec.y_set.contains(&m) {
                    continue;
                }
                if let Some((st, len)) = f_ranges[m] {
                    if len <= w.x0.len() && (st..st + len).all(|v| w.x0.contains(&v)) {
                        protection_ok = false;
                        detail.push_str(&format!(
                            "stage {s}: witness {} covers protected set of size {m}; ",
                            w.v
                        ));
                    }
                }
            }
            for &u in &w.x0 {
                adjacency.entry(w.v).or_default().insert(u);
                adjacency.entry(u).or_default().insert(w.v);
            }
        }
        // Acting sizes must hold a refutation against the value that entered
        // the stage, before this stage's updates land.
        for &n in &rec.y_set {
            let entering = x_prev[n].unwrap_or(0);
            let refuted = (0..=s as u64).any(|y| !phi.eval(n as u64, entering, y));
            if !refuted {
                y_ok = false;
                detail.push_str(&format!("stage {s}: size {n} acted without a refutation; "));
            }
        }
        for &(n, x) in &rec.x_updates {
            if let Some(prev) = x_prev[n] {
                if x < prev {
                    monotone_ok = false;
                    detail.push_str(&format!("stage {s}: candidate for {n} decreased; "));
                }
            }
            x_prev[n] = Some(x);
        }
        for &(n, st) in &rec.f_updates {
            f_ranges[n] = Some((st, n));
        }
        if let Some((n, st)) = rec.seed {
            f_ranges[n] = Some((st, n));
            x_prev[n] = Some(0);
        }
        prev_m = rec.m;
    }
    if adjacency != run.adjacency {
        fidelity_ok = false;
        detail.push_str("final adjacency differs from the witness log; ");
    }

    let mut checks = vec![
        Check::new(
            "gadget/arithmetic",
            arithmetic_ok,
            "stage vertex-count identity holds",
        ),
        Check::new(
            "gadget/consumption",
            consumption_ok,
            "fresh vertices consumed exactly once, in order",
        ),
        Check::new(
            "gadget/fidelity",
            fidelity_ok,
            "witnesses connect to exactly their pair's join side",
        ),
        Check::new(
            "gadget/protection",
            protection_ok,
            "no witness covers a stable strategy set",
        ),
        Check::new(
            "gadget/monotone-x",
            monotone_ok,
            "candidate witnesses never decrease",
        ),
        Check::new(
            "gadget/y-membership",
            y_ok,
            "acting sizes really hold a refutation",
        ),
    ];
    if !detail.is_empty() {
        if let Some(c) = checks.iter_mut().find(|c| !c.pass) {
            c.detail = detail;
        }
    }
    checks
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phi(expr: &str, y_bound: Option<u64>) -> PhiPredicate {
        PhiPredicate::new(Expr::parse(expr, &["n", "x", "y"]).unwrap(), y_bound)
    }

    /// ψ′ true exactly at 3 with least witness 5, via the preprocess shift.
    fn shifted_at_3() -> PhiPredicate {
        preprocess(&phi("n == 2 && x >= 5", Some(0)))
    }

    fn config(horizon: usize) -> GadgetConfig {
        GadgetConfig {
            horizon,
            ..Default::default()
        }
    }

    #[test]
    fn preprocess_shifts_truth() {
        let p = phi("1", Some(0));
        let p1 = preprocess(&p);
        assert!(!psi_oracle(&p1, 0, 50).unwrap());
        for n in 1..5 {
            assert!(psi_oracle(&p1, n, 50).unwrap());
        }
        let p2 = preprocess(&p1);
        assert!(!psi_oracle(&p2, 1, 50).unwrap());
        assert!(psi_oracle(&p2, 2, 50).unwrap());
    }

    #[test]
    fn psi_oracle_examples() {
        let p = shifted_at_3();
        assert!(psi_oracle(&p, 3, 100).unwrap());
        assert!(!psi_oracle(&p, 2, 100).unwrap());
        let never = phi("0", Some(4));
        for n in 0..6 {
            assert!(!psi_oracle(&never, n, 60).unwrap());
        }
        assert!(matches!(
            psi_oracle(&phi("1", None), 0, 10),
            Err(GadgetError::NoYBound)
        ));
    }

    #[test]
    fn run_requires_false_at_zero() {
        assert!(matches!(
            gadget_run(&phi("1", Some(0)), config(20)),
            Err(GadgetError::PsiZeroHolds)
        ));
    }

    #[test]
    fn always_true_after_shift_never_acts() {
        let p = preprocess(&phi("1", Some(0)));
        let run = gadget_run(&p, config(30)).unwrap();
        for rec in &run.stages[2..] {
            assert!(rec.y_set.is_empty());
            assert!(rec.witnesses.is_empty());
            assert!(rec.k.is_empty());
        }
        assert!(run.adjacency.is_empty());
        let checks = verify_gadget_trace(&run, &p);
        assert!(checks.iter().all(|c| c.pass), "{checks:?}");
    }

    #[test]
    fn quiet_stages_add_exactly_s_vertices() {
        let p = preprocess(&phi("1", Some(0)));
        let run = gadget_run(&p, config(10)).unwrap();
        for w in run.stages.windows(2).skip(1) {
            assert_eq!(w[1].m, w[0].m + w[1].s);
        }
    }

    #[test]
    fn candidate_stabilizes_at_least_witness() {
        let p = shifted_at_3();
        let run = gadget_run(&p, config(60)).unwrap();
        assert_eq!(run.x_final[3], Some(5));
        assert!(run.stabilization_stage(3).is_some());
        // Unsatisfiable sizes keep churning: the candidate tracks the stage.
        assert_eq!(run.x_final[1], Some(61));
        assert_eq!(run.x_final[2], Some(61));
        assert!(run.stabilization_stage(1).is_none());
        let checks = verify_gadget_trace(&run, &p);
        assert!(checks.iter().all(|c| c.pass), "{checks:?}");
    }

    #[test]
    fn unshifted_predicate_true_at_two() {
        // Already false at 0, so it runs without the shift: the size-2
        // strategy settles while smaller sizes chase the stage number.
        let p = phi("n == 2 && x >= 5", Some(0));
        let run = gadget_run(&p, config(50)).unwrap();
        assert_eq!(run.x_final[2], Some(5));
        assert!(run.stabilization_stage(2).is_some());
        assert_eq!(run.x_final[1], Some(51));
        let checks = verify_gadget_trace(&run, &p);
        assert!(checks.iter().all(|c| c.pass), "{checks:?}");
    }

    #[test]
    fn stabilized_set_is_protected() {
        let p = shifted_at_3();
        let run = gadget_run(&p, config(80)).unwrap();
        let stab = run.stabilization_stage(3).unwrap();
        assert!(failure_protected(&run, 3, stab).unwrap());
        assert!(matches!(
            failure_protected(&run, 1, 10),
            Err(GadgetError::NotStabilized(1))
        ));
    }

    #[test]
    fn injected_witness_edge_breaks_protection() {
        let p = shifted_at_3();
        let mut run = gadget_run(&p, config(60)).unwrap();
        let stab = run.stabilization_stage(3).unwrap();
        let f = run.f_set(3).unwrap();
        let intruder = run.m_final + 1;
        for &u in &f {
            run.adjacency.entry(intruder).or_default().insert(u);
            run.adjacency.entry(u).or_default().insert(intruder);
        }
        assert!(!failure_protected(&run, 3, stab).unwrap());
    }

    #[test]
    fn small_prefix_pairs_get_witnessed() {
        let p = shifted_at_3();
        let run = gadget_run(&p, config(120)).unwrap();
        for m in 1..=2 {
            assert!(prefix_pairs_witnessed(&run, m, 20), "size {m} over 0..=20");
        }
    }

    #[test]
    fn pair_cursor_enumerates_canonically() {
        let mut c = PairCursor::new(2);
        let mut seen = Vec::new();
        while let Some(p) = c.next(4) {
            seen.push(p);
        }
        // Supports {0,1}, {0,2}, {1,2}, {0,3}, ... with 4 masks each.
        assert_eq!(seen.len(), 4 * 6);
        assert_eq!(seen[0], (vec![0, 1], vec![]));
        assert_eq!(seen[1], (vec![1], vec![0]));
        assert_eq!(seen[2], (vec![0], vec![1]));
        assert_eq!(seen[3], (vec![], vec![0, 1]));
        assert_eq!(seen[4], (vec![0, 2], vec![]));
        let unique: BTreeSet<_> = seen.iter().collect();
        assert_eq!(unique.len(), seen.len());
    }

    #[test]
    fn stage_records_serialize() {
        let p = shifted_at_3();
        let run = gadget_run(&p, config(20)).unwrap();
        for rec in &run.stages {
            let line = serde_json::to_string(rec).unwrap();
            let back: GadgetStageRecord = serde_json::from_str(&line).unwrap();
            assert_eq!(&back, rec);
        }
    }
}
