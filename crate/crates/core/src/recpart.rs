//! Finite-injury construction of a computable partition `X₀ ⊔ X₁` that
//! defeats every registered candidate isomorphism.
//!
//! Each requirement guesses the isolation status of probe vertices and forces
//! the image side to disagree: a probe's image either gets all its future
//! neighbors pushed to the other side (after the finite-degree enumeration
//! reveals it) or gets a promised neighbor on its own side. Requirements
//! interact through vertex claims with least-index priority; a firing claim
//! initializes everything below it.
//!
//! The two unbounded searches of the underlying argument — the lookahead for
//! the next vertex that ever looks isolated, and the dovetail between the
//! finite-degree enumeration and the hunt for an unclaimed future neighbor —
//! run as budgeted, resumable searches that persist across stages.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::graph::Vertex;
use crate::machine::{dovetail_step, AdversaryRegistry, DovetailState, Poll};
use crate::oracle::GraphOracle;
use crate::report::Check;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RecError {
    #[error("oracle `{0}` carries no finite-degree schedule")]
    MissingSchedule(String),
    #[error("requirement {e} ended in {tag:?}, not a diagonalizing state")]
    NotDiagonalizing { e: usize, tag: Option<SatTag> },
    #[error("requirement index {0} out of range")]
    BadIndex(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SatTag {
    S1,
    S2,
    S3,
    S4,
    S5,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Phase {
    NeedsSide,
    /// Budgeted lookahead for the next probe; `pending` carries the guess bit
    /// owed to the previous probe once the new one fixes the string length.
    Seeking {
        cursor: Vertex,
        pending: Option<bool>,
    },
    Probing,
    Dovetailing {
        y: Vertex,
        dove: DovetailState,
    },
}

#[derive(Debug, Clone)]
struct ReqState {
    i: Option<u8>,
    x: Option<Vertex>,
    sigma: Vec<bool>,
    d_set: BTreeSet<Vertex>,
    s_set: BTreeSet<Vertex>,
    d_enrolled: Vec<(Vertex, usize)>,
    s_enrolled: Vec<(Vertex, usize)>,
    probes: Vec<Vertex>,
    phase: Phase,
    waiting_logged: bool,
    tag: Option<SatTag>,
}

impl ReqState {
    fn fresh() -> ReqState {
        ReqState {
            i: None,
            x: None,
            sigma: Vec::new(),
            d_set: BTreeSet::new(),
            s_set: BTreeSet::new(),
            d_enrolled: Vec::new(),
            s_enrolled: Vec::new(),
            probes: Vec::new(),
            phase: Phase::NeedsSide,
            waiting_logged: false,
            tag: None,
        }
    }

    fn claims(&self, v: Vertex, oracle: &GraphOracle) -> bool {
        self.s_set.contains(&v) || self.d_set.iter().any(|&d| oracle.edge(v, d))
    }
}

/// The promise and commitment sets of one requirement, as seen by the claims
/// machinery: vertices promised to the requirement's own side, and vertices
/// whose neighbors are pushed to the other side.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClaimSets {
    pub promised: BTreeSet<Vertex>,
    pub committed: BTreeSet<Vertex>,
}

/// Least index whose claim covers `v` — membership in the promise set or
/// adjacency to a committed vertex — together with which kind won. Within
/// one requirement the promise beats commitment adjacency.
pub fn claimed_by(claims: &[ClaimSets], v: Vertex, oracle: &GraphOracle) -> Option<(usize, bool)> {
    for (e, c) in claims.iter().enumerate() {
        if c.promised.contains(&v) {
            return Some((e, true));
        }
        if c.committed.iter().any(|&d| oracle.edge(v, d)) {
            return Some((e, false));
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecEvent {
    pub e: usize,
    #[serde(flatten)]
    pub kind: RecEventKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum RecEventKind {
    SideChosen { i: u8 },
    ProbeSet { x: Vertex },
    NeighborObserved { y: Vertex },
    EnrolledD { y: Vertex },
    EnrolledS { z: Vertex, y: Vertex },
    Waiting,
    Initialized { cause: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecStageRecord {
    pub s: usize,
    /// Side assigned to vertex `s` at the end of the stage.
    pub side: u8,
    pub claimed_by: Option<usize>,
    pub via_promise: bool,
    pub events: Vec<RecEvent>,
    pub tags: Vec<Option<SatTag>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReqSnapshot {
    pub e: usize,
    pub i: Option<u8>,
    pub x: Option<Vertex>,
    pub sigma: Vec<bool>,
    pub d_enrolled: Vec<(Vertex, usize)>,
    pub s_enrolled: Vec<(Vertex, usize)>,
    pub probes: Vec<Vertex>,
    pub tag: Option<SatTag>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecTrace {
    pub horizon: usize,
    /// `assignment[v]` is the side vertex `v` received at stage `v`.
    pub assignment: Vec<u8>,
    pub stages: Vec<RecStageRecord>,
    pub initializations: Vec<(usize, usize, String)>,
    pub finals: Vec<ReqSnapshot>,
}

/// Stage at which each vertex first shows an explored neighbor; isolation in
/// the prefix `{0..=s}` is `first_nbr[v] > s`.
fn first_neighbor_stages(oracle: &GraphOracle, horizon: usize) -> Vec<usize> {
    (0..=horizon)
        .map(|v| {
            (0..=horizon)
                .filter(|&u| u != v && oracle.edge(u, v))
                .map(|u| u.max(v))
                .min()
                .unwrap_or(usize::MAX)
        })
        .collect()
}

/// First satisfaction condition holding for requirement `e` at stage `s`, in
/// order: the zero probe diverges; the map collides or hits both sides; the
/// current probe diverges; some non-isolated vertex maps into the committed
/// set; some isolated vertex maps next to a promised vertex. Evaluations use
/// only data below the stage.
#[allow(clippy::too_many_arguments)]
pub fn looks_satisfied(
    registry: &AdversaryRegistry,
    e: usize,
    s: usize,
    assignment: &[u8],
    probe: Option<Vertex>,
    claims: &ClaimSets,
    oracle: &GraphOracle,
    first_nbr: &[usize],
) -> Option<SatTag> {
    let adv = registry.get(e).expect("caller bounds the index");
    if adv.eval(0, s).halted().is_none() {
        return Some(SatTag::S1);
    }
    let halted: Vec<(Vertex, Vertex)> = (0..s)
        .filter_map(|x| adv.eval(x as u64, s).halted().map(|v| (x, v as Vertex)))
        .collect();
    let mut values = BTreeSet::new();
    let mut sides = [false, false];
    for &(_, v) in &halted {
        if !values.insert(v) {
            return Some(SatTag::S2);
        }
        sides[assignment[v] as usize] = true;
    }
    if sides[0] && sides[1] {
        return Some(SatTag::S2);
    }
    if let Some(x) = probe {
        if adv.eval(x as u64, s).halted().is_none() {
            return Some(SatTag::S3);
        }
    }
    let isolated_at = |v: Vertex| v <= s && first_nbr[v] > s;
    for &(x, v) in &halted {
        if claims.committed.contains(&v) && !isolated_at(x) {
            return Some(SatTag::S4);
        }
    }
    for &(x, y) in &halted {
        if isolated_at(x) && claims.promised.iter().any(|&z| oracle.edge(y, z)) {
            return Some(SatTag::S5);
        }
    }
    None
}

/// Runs the construction for stages `0..=horizon` with per-stage search
/// budget `budget`. The construction consults only the oracle's edge
/// relation and finite-degree schedule; isolation deciders stay with the
/// verifier.
pub fn rec_run(
    oracle: &GraphOracle,
    registry: &AdversaryRegistry,
    horizon: usize,
    budget: u64,
) -> Result<RecTrace, RecError> {
    let schedule: Vec<(Vertex, usize)> = oracle
        .finite_degree_schedule()
        .ok_or_else(|| RecError::MissingSchedule(oracle.describe().to_string()))?
        .to_vec();
    let first_nbr = first_neighbor_stages(oracle, horizon);
    let len = registry.len();

    let mut states: Vec<ReqState> = (0..len).map(|_| ReqState::fresh()).collect();
    let mut assignment: Vec<u8> = vec![0];
    let mut stages = vec![RecStageRecord {
        s: 0,
        side: 0,
        claimed_by: None,
        via_promise: false,
        events: Vec::new(),
        tags: vec![None; len],
    }];
    let mut initializations: Vec<(usize, usize, String)> = Vec::new();

    for s in 1..=horizon {
        let mut events: Vec<RecEvent> = Vec::new();
        let mut tags: Vec<Option<SatTag>> = vec![None; len];

        for e in 0..len.min(s) {
            let claims = ClaimSets {
                promised: states[e].s_set.clone(),
                committed: states[e].d_set.clone(),
            };
            let tag = looks_satisfied(
                registry,
                e,
                s,
                &assignment,
                states[e].x,
                &claims,
                oracle,
                &first_nbr,
            );
            tags[e] = tag;
            states[e].tag = tag;
            if tag.is_some() {
                continue; // looks satisfied: do nothing
            }
            let (lower, rest) = states.split_at_mut(e);
            let st = &mut rest[0];
            match st.phase.clone() {
                Phase::NeedsSide => {
                    let v = registry
                        .get(e)
                        .unwrap()
                        .eval(0, s)
                        .halted()
                        .expect("S1 would have fired") as Vertex;
                    let i = assignment[v];
                    st.i = Some(i);
                    st.phase = Phase::Seeking {
                        cursor: 0,
                        pending: None,
                    };
                    events.push(RecEvent {
                        e,
                        kind: RecEventKind::SideChosen { i },
                    });
                }
                Phase::Seeking {
                    mut cursor,
                    pending,
                } => {
                    let mut found = None;
                    for _ in 0..budget {
                        if cursor > horizon {
                            if !st.waiting_logged {
                                st.waiting_logged = true;
                                events.push(RecEvent {
                                    e,
                                    kind: RecEventKind::Waiting,
                                });
                            }
                            break;
                        }
                        // Isolated in some prefix from here on means isolated
                        // in the prefix at max(s, cursor).
                        if first_nbr[cursor] > s.max(cursor) {
                            found = Some(cursor);
                            break;
                        }
                        cursor += 1;
                    }
                    match found {
                        Some(x) => {
                            match pending {
                                Some(bit) => {
                                    let prev = st.x.expect("pending bit implies a previous probe");
                                    debug_assert_eq!(st.sigma.len(), prev);
                                    st.sigma.push(bit);
                                    st.sigma.resize(x, false);
                                }
                                None => {
                                    debug_assert!(st.sigma.is_empty());
                                    st.sigma = vec![false; x];
                                }
                            }
                            st.x = Some(x);
                            st.probes.push(x);
                            st.phase = Phase::Probing;
                            events.push(RecEvent {
                                e,
                                kind: RecEventKind::ProbeSet { x },
                            });
                        }
                        None => {
                            st.phase = Phase::Seeking { cursor, pending };
                        }
                    }
                }
                Phase::Probing => {
                    let x = st.x.expect("probing requires a probe");
                    let y = registry
                        .get(e)
                        .unwrap()
                        .eval(x as u64, s)
                        .halted()
                        .expect("S3 would have fired") as Vertex;
                    let i = st.i.expect("side chosen before probing");
                    debug_assert_eq!(assignment[y], i, "S2 would have fired");
                    let has_side_neighbor = (0..s).any(|v| assignment[v] == i && oracle.edge(y, v));
                    if has_side_neighbor {
                        st.phase = Phase::Seeking {
                            cursor: x + 1,
                            pending: Some(false),
                        };
                        events.push(RecEvent {
                            e,
                            kind: RecEventKind::NeighborObserved { y },
                        });
                    } else {
                        // Entering the dovetail is this stage's action; the
                        // polling starts next stage.
                        let mut dove = DovetailState::new(2);
                        dove.cursors[1] = s as u64;
                        st.phase = Phase::Dovetailing { y, dove };
                    }
                }
                Phase::Dovetailing { y, mut dove } => {
                    let i = st.i.expect("side chosen before dovetailing");
                    let has_side_neighbor = (0..s).any(|v| assignment[v] == i && oracle.edge(y, v));
                    if has_side_neighbor {
                        let x = st.x.expect("dovetailing requires a probe");
                        st.phase = Phase::Seeking {
                            cursor: x + 1,
                            pending: Some(false),
                        };
                        events.push(RecEvent {
                            e,
                            kind: RecEventKind::NeighborObserved { y },
                        });
                    } else {
                        let mut enumeration = |c: u64| match schedule.get(c as usize) {
                            None => Poll::Blocked,
                            Some(&(v, reveal)) => {
                                if reveal > s {
                                    Poll::Blocked
                                } else if v == y {
                                    Poll::Found(v as u64)
                                } else {
                                    Poll::Pending
                                }
                            }
                        };
                        let mut neighbor_hunt = |c: u64| {
                            let v = c as Vertex;
                            if v < s {
                                return Poll::Pending;
                            }
                            let claimed = lower.iter().any(|other| other.claims(v, oracle));
                            if !claimed && oracle.edge(y, v) {
                                Poll::Found(c)
                            } else {
                                Poll::Pending
                            }
                        };
                        dovetail_step(
                            &mut dove,
                            &mut [&mut enumeration, &mut neighbor_hunt],
                            budget,
                        )
                        .expect("winner handled before re-polling");
                        match dove.winner {
                            Some(win) if win.search == 0 => {
                                st.d_set.insert(y);
                                st.d_enrolled.push((y, s));
                                let x = st.x.expect("dovetailing requires a probe");
                                st.phase = Phase::Seeking {
                                    cursor: x + 1,
                                    pending: Some(true),
                                };
                                events.push(RecEvent {
                                    e,
                                    kind: RecEventKind::EnrolledD { y },
                                });
                            }
                            Some(win) => {
                                let z = win.value as Vertex;
                                st.s_set.insert(z);
                                st.s_enrolled.push((z, s));
                                let x = st.x.expect("dovetailing requires a probe");
                                st.phase = Phase::Seeking {
                                    cursor: x + 1,
                                    pending: Some(false),
                                };
                                events.push(RecEvent {
                                    e,
                                    kind: RecEventKind::EnrolledS { z, y },
                                });
                            }
                            None => {
                                st.phase = Phase::Dovetailing { y, dove };
                            }
                        }
                    }
                }
            }
        }

        // Assign vertex s from the claims, least index first; a promise into
        // the requirement's own side beats adjacency to a committed vertex.
        let claim_sets: Vec<ClaimSets> = states
            .iter()
            .take(len.min(s))
            .map(|st| ClaimSets {
                promised: st.s_set.clone(),
                committed: st.d_set.clone(),
            })
            .collect();
        let claimed = claimed_by(&claim_sets, s, oracle);
        let side = match claimed {
            None => 0,
            Some((e, via_promise)) => {
                let i = states[e]
                    .i
                    .expect("claims come from requirements with a side");
                if via_promise {
                    i
                } else {
                    1 - i
                }
            }
        };
        assignment.push(side);
        if let Some((winner, _)) = claimed {
            for e in winner + 1..len {
                states[e] = ReqState::fresh();
                let cause = format!("claim by R{winner} on vertex {s}");
                initializations.push((s, e, cause.clone()));
                events.push(RecEvent {
                    e,
                    kind: RecEventKind::Initialized { cause },
                });
            }
        }

        stages.push(RecStageRecord {
            s,
            side,
            claimed_by: claimed.map(|(e, _)| e),
            via_promise: claimed.map(|(_, v)| v).unwrap_or(false),
            events,
            tags,
        });
    }

    let finals = states
        .iter()
        .enumerate()
        .map(|(e, st)| ReqSnapshot {
            e,
            i: st.i,
            x: st.x,
            sigma: st.sigma.clone(),
            d_enrolled: st.d_enrolled.clone(),
            s_enrolled: st.s_enrolled.clone(),
            probes: st.probes.clone(),
            tag: st.tag,
        })
        .collect();

    Ok(RecTrace {
        horizon,
        assignment,
        stages,
        initializations,
        finals,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum DiagVerdict {
    Confirmed,
    ConsistentAtHorizon { open: String },
    Violated { reason: String },
}

/// Confirms a requirement's final diagonalizing state against the oracle.
///
/// For an S4 ending, some probe must map into the committed set while
/// non-isolated, with every explored neighbor of the image pushed to the
/// other side; the verdict closes (rather than staying merely consistent)
/// when the family certifies the image's whole neighborhood inside the
/// horizon. For an S5 ending, the probe must be isolated (certified when the
/// family can say so) and the promised neighbor placed on the requirement's
/// own side.
pub fn verify_diagonalization(
    trace: &RecTrace,
    oracle: &GraphOracle,
    registry: &AdversaryRegistry,
    e: usize,
) -> Result<DiagVerdict, RecError> {
    let snap = trace.finals.get(e).ok_or(RecError::BadIndex(e))?;
    let adv = registry.get(e).ok_or(RecError::BadIndex(e))?;
    let i = match (snap.tag, snap.i) {
        (Some(SatTag::S4), Some(i)) | (Some(SatTag::S5), Some(i)) => i,
        (tag, _) => return Err(RecError::NotDiagonalizing { e, tag }),
    };
    let horizon = trace.horizon;
    let first_nbr = first_neighbor_stages(oracle, horizon);
    let d_set: BTreeSet<Vertex> = snap.d_enrolled.iter().map(|&(y, _)| y).collect();
    let s_set: BTreeSet<Vertex> = snap.s_enrolled.iter().map(|&(z, _)| z).collect();

    if snap.tag == Some(SatTag::S4) {
        let hit = (0..horizon).find_map(|x| {
            let y = adv.eval(x as u64, horizon).halted()? as Vertex;
            (d_set.contains(&y) && first_nbr[x] <= horizon).then_some(y)
        });
        let Some(y) = hit else {
            return Ok(DiagVerdict::Violated {
                reason: "no probe maps into the committed set with an explored neighbor".into(),
            });
        };
        for v in 0..=horizon {
            if oracle.edge(y, v) && trace.assignment[v] != 1 - i {
                return Ok(DiagVerdict::Violated {
                    reason: format!("neighbor {v} of committed vertex {y} sits on side {i}"),
                });
            }
        }
        match oracle.neighbors_exact(y) {
            Some(ns) if ns.iter().all(|&v| v <= horizon) => Ok(DiagVerdict::Confirmed),
            _ => Ok(DiagVerdict::ConsistentAtHorizon {
                open: format!("neighborhood of {y} not certified within the horizon"),
            }),
        }
    } else {
        let hit = (0..horizon).find_map(|x| {
            if first_nbr[x] <= horizon {
                return None;
            }
            let y = adv.eval(x as u64, horizon).halted()? as Vertex;
            let z = s_set.iter().copied().find(|&z| oracle.edge(y, z))?;
            Some((x, z))
        });
        let Some((x, z)) = hit else {
            return Ok(DiagVerdict::Violated {
                reason: "no isolated probe maps next to a promised vertex".into(),
            });
        };
        if z <= horizon && trace.assignment[z] != i {
            return Ok(DiagVerdict::Violated {
                reason: format!("promised vertex {z} sits on side {}", trace.assignment[z]),
            });
        }
        match (oracle.is_isolated(x), z <= horizon) {
            (Some(true), true) => Ok(DiagVerdict::Confirmed),
            (Some(false), _) => Ok(DiagVerdict::Violated {
                reason: format!("probe {x} is not isolated in the full graph"),
            }),
            _ => Ok(DiagVerdict::ConsistentAtHorizon {
                open: format!("isolation of probe {x} not certified"),
            }),
        }
    }
}

/// Trace-wide invariants: priority discipline of the claims, commitment
/// keeping after each requirement's final initialization, and soundness of
/// the gap-filled zeros in the guessed isolation strings.
pub fn verify_rec_trace(
    trace: &RecTrace,
    oracle: &GraphOracle,
    registry: &AdversaryRegistry,
) -> Vec<Check> {
    let len = registry.len();
    let horizon = trace.horizon;
    let first_nbr = first_neighbor_stages(oracle, horizon);
    let mut detail = String::new();

    // Replay claims from the event log.
    let mut d_sets: Vec<BTreeSet<Vertex>> = vec![BTreeSet::new(); len];
    let mut s_sets: Vec<BTreeSet<Vertex>> = vec![BTreeSet::new(); len];
    let mut sides: Vec<Option<u8>> = vec![None; len];
    let mut priority_ok = trace.assignment.first() == Some(&0);
    for rec in &trace.stages {
        for ev in &rec.events {
            match &ev.kind {
                RecEventKind::SideChosen { i } => sides[ev.e] = Some(*i),
                RecEventKind::EnrolledD { y } => {
                    d_sets[ev.e].insert(*y);
                }
                RecEventKind::EnrolledS { z, .. } => {
                    s_sets[ev.e].insert(*z);
                }
                RecEventKind::Initialized { .. } => {
                    d_sets[ev.e].clear();
                    s_sets[ev.e].clear();
                    sides[ev.e] = None;
                }
                _ => {}
            }
        }
        if rec.s == 0 {
            continue;
        }
        let s = rec.s;
        let claim_sets: Vec<ClaimSets> = (0..len.min(s))
            .map(|e| ClaimSets {
                promised: s_sets[e].clone(),
                committed: d_sets[e].clone(),
            })
            .collect();
        let expect = claimed_by(&claim_sets, s, oracle);
        let expected_side = match expect {
            None => 0,
            Some((e, true)) => sides[e].unwrap_or(0),
            Some((e, false)) => 1 - sides[e].unwrap_or(0),
        };
        if rec.claimed_by != expect.map(|(e, _)| e)
            || rec.side != expected_side
            || trace.assignment[s] != rec.side
        {
            priority_ok = false;
            detail.push_str(&format!("stage {s}: claim resolution mismatch; "));
        }
        if let Some((winner, _)) = expect {
            for e in winner + 1..len {
                let logged = trace
                    .initializations
                    .iter()
                    .any(|&(stage, idx, _)| stage == s && idx == e);
                if !logged {
                    priority_ok = false;
                    detail.push_str(&format!("stage {s}: missing initialization of R{e}; "));
                }
            }
        }
    }

    // Commitments, judged from each requirement's final epoch.
    let mut commitments_ok = true;
    for snap in &trace.finals {
        let Some(i) = snap.i else { continue };
        for &(z, _) in &snap.s_enrolled {
            if z <= horizon && trace.assignment[z] != i {
                commitments_ok = false;
                detail.push_str(&format!(
                    "promise broken: vertex {z} of R{} on side {}; ",
                    snap.e, trace.assignment[z]
                ));
            }
        }
        for &(y, _) in &snap.d_enrolled {
            for v in 0..=horizon {
                if oracle.edge(y, v)
                    && trace.assignment[v] != 1 - i
                    && !snap.s_enrolled.iter().any(|&(z, _)| z == v)
                {
                    commitments_ok = false;
                    detail.push_str(&format!(
                        "commitment broken: neighbor {v} of {y} (R{}) on side {}; ",
                        snap.e, trace.assignment[v]
                    ));
                }
            }
        }
    }

    // Gap-filled zeros name vertices that were already non-isolated.
    let mut sigma_ok = true;
    for snap in &trace.finals {
        let probes: BTreeSet<Vertex> = snap.probes.iter().copied().collect();
        for (v, &bit) in snap.sigma.iter().enumerate() {
            if !bit && !probes.contains(&v) {
                let non_isolated_explored = v <= horizon && first_nbr[v] <= horizon;
                let certified = oracle.is_isolated(v) == Some(false);
                if !non_isolated_explored && !certified {
                    sigma_ok = false;
                    detail.push_str(&format!(
                        "gap zero at {v} for R{} lacks a neighbor; ",
                        snap.e
                    ));
                }
            }
        }
    }

    let mut checks = vec![
        Check::new(
            "recpart/priority",
            priority_ok,
            "claims resolve by least index and initialize lower priorities",
        ),
        Check::new(
            "recpart/commitments",
            commitments_ok,
            "promised and committed vertices land on the pledged sides",
        ),
        Check::new(
            "recpart/sigma-zeros",
            sigma_ok,
            "gap-filled zeros correspond to non-isolated vertices",
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
    use crate::machine::{Adversary, AdversaryRegistry, Combinator};

    /// Oracle with probe traps: vertex 2 looks isolated until 30, vertex 9
    /// never gains a neighbor, vertices 0 and 1 are matched from the start.
    fn s4_oracle(horizon: usize) -> GraphOracle {
        let mut sched: Vec<(Vertex, usize)> = vec![(9, 6), (3, 8), (4, 9)];
        let mut reveal = 12;
        for v in (0..=horizon).filter(|v| ![9, 3, 4].contains(v)) {
            sched.push((v, reveal));
            reveal += 1;
        }
        GraphOracle::edge_list([(0, 1), (2, 30), (40, 41)])
            .with_schedule(sched)
            .unwrap()
    }

    fn swap(a: u64, b: u64) -> Combinator {
        Combinator::TableOverride {
            base: Box::new(Combinator::Identity),
            table: vec![(a, b), (b, a)],
        }
    }

    #[test]
    fn swap_adversary_lands_in_s4() {
        let horizon = 120;
        let oracle = s4_oracle(horizon);
        let registry = AdversaryRegistry::new(vec![
            Adversary::new("swap-2-9", swap(2, 9)),
            Adversary::new("c0", Combinator::Constant(0)),
        ]);
        let trace = rec_run(&oracle, &registry, horizon, 8).unwrap();
        assert_eq!(trace.finals[0].tag, Some(SatTag::S4));
        assert_eq!(trace.finals[1].tag, Some(SatTag::S2));
        assert!(trace.finals[0].d_enrolled.iter().any(|&(y, _)| y == 9));
        assert_eq!(
            verify_diagonalization(&trace, &oracle, &registry, 0).unwrap(),
            DiagVerdict::Confirmed
        );
        let checks = verify_rec_trace(&trace, &oracle, &registry);
        assert!(checks.iter().all(|c| c.pass), "{checks:?}");
    }

    /// Oracle where the least isolated-looking vertex 3 is isolated forever
    /// while its swap partner 8 gains a late neighbor; 8's schedule entry is
    /// revealed far too late for the enumeration to win the race.
    fn s5_oracle(horizon: usize) -> GraphOracle {
        let mut sched: Vec<(Vertex, usize)> = vec![(3, 5), (9, 7)];
        let mut reveal = 100;
        for v in (0..=horizon).filter(|v| ![3, 9].contains(v)) {
            sched.push((v, reveal));
            reveal += 1;
        }
        GraphOracle::edge_list([(0, 1), (1, 2), (8, 31)])
            .with_schedule(sched)
            .unwrap()
    }

    #[test]
    fn swap_adversary_lands_in_s5() {
        let horizon = 120;
        let oracle = s5_oracle(horizon);
        let registry = AdversaryRegistry::new(vec![
            Adversary::new("swap-3-8", swap(3, 8)),
            Adversary::new("parity", Combinator::Parity),
        ]);
        let trace = rec_run(&oracle, &registry, horizon, 8).unwrap();
        assert_eq!(trace.finals[0].tag, Some(SatTag::S5));
        assert!(trace.finals[0].s_enrolled.iter().any(|&(z, _)| z == 31));
        assert_eq!(trace.assignment[31], trace.finals[0].i.unwrap());
        assert_eq!(
            verify_diagonalization(&trace, &oracle, &registry, 0).unwrap(),
            DiagVerdict::Confirmed
        );
        // The promise claim at stage 31 initializes everything below R0.
        assert!(trace
            .initializations
            .iter()
            .any(|&(stage, e, _)| stage == 31 && e == 1));
        let checks = verify_rec_trace(&trace, &oracle, &registry);
        assert!(checks.iter().all(|c| c.pass), "{checks:?}");
    }

    #[test]
    fn never_halting_adversary_parks_in_s1() {
        let horizon = 60;
        let oracle = s4_oracle(horizon);
        let registry =
            AdversaryRegistry::new(vec![Adversary::new("never", Combinator::NeverHalts)]);
        let trace = rec_run(&oracle, &registry, horizon, 8).unwrap();
        assert_eq!(trace.finals[0].tag, Some(SatTag::S1));
        // Nothing is ever claimed: everything lands on side 0.
        assert!(trace.assignment.iter().all(|&s| s == 0));
    }

    #[test]
    fn corrupted_assignment_is_flagged() {
        let horizon = 120;
        let oracle = s5_oracle(horizon);
        let registry = AdversaryRegistry::new(vec![Adversary::new("swap-3-8", swap(3, 8))]);
        let mut trace = rec_run(&oracle, &registry, horizon, 8).unwrap();
        let i = trace.finals[0].i.unwrap();
        trace.assignment[31] = 1 - i;
        assert!(matches!(
            verify_diagonalization(&trace, &oracle, &registry, 0).unwrap(),
            DiagVerdict::Violated { .. }
        ));
        let checks = verify_rec_trace(&trace, &oracle, &registry);
        assert!(!checks.iter().all(|c| c.pass));
    }

    #[test]
    fn claims_resolve_by_least_index_with_promise_precedence() {
        let oracle = GraphOracle::edge_list([(7, 20)]);
        let mut claims = vec![ClaimSets::default(); 5];
        claims[3].promised.insert(9);
        assert_eq!(claimed_by(&claims, 9, &oracle), Some((3, true)));
        // Adjacency to a committed vertex of a higher-priority requirement
        // beats a promise further down.
        claims[1].committed.insert(20);
        claims[4].promised.insert(7);
        assert_eq!(claimed_by(&claims, 7, &oracle), Some((1, false)));
        assert_eq!(claimed_by(&claims, 42, &oracle), None);
    }

    #[test]
    fn satisfaction_conditions_fire_in_order() {
        let oracle = GraphOracle::edge_list([(1, 4)]);
        let first_nbr = [usize::MAX, 4, usize::MAX, usize::MAX, 4, usize::MAX];
        let assignment = [0u8, 0, 0, 0, 0];
        // A diverging zero probe is the first condition.
        let never = AdversaryRegistry::new(vec![Adversary::new("never", Combinator::NeverHalts)]);
        assert_eq!(
            looks_satisfied(
                &never,
                0,
                5,
                &assignment,
                None,
                &ClaimSets::default(),
                &oracle,
                &first_nbr
            ),
            Some(SatTag::S1)
        );
        // A value collision is the second.
        let c0 = AdversaryRegistry::new(vec![Adversary::new("c0", Combinator::Constant(0))]);
        assert_eq!(
            looks_satisfied(
                &c0,
                0,
                5,
                &assignment,
                None,
                &ClaimSets::default(),
                &oracle,
                &first_nbr
            ),
            Some(SatTag::S2)
        );
        // A non-isolated vertex mapping into the committed set: vertex 1 is
        // de-isolated by stage 4 and the identity sends it to itself.
        let id = AdversaryRegistry::new(vec![Adversary::new("id", Combinator::Identity)]);
        let mut claims = ClaimSets::default();
        claims.committed.insert(1);
        assert_eq!(
            looks_satisfied(&id, 0, 5, &assignment, None, &claims, &oracle, &first_nbr),
            Some(SatTag::S4)
        );
    }

    #[test]
    fn lookahead_parks_waiting_without_isolated_vertices() {
        // In the complete graph no vertex is ever isolated in any prefix
        // (everything beyond 0 has the smaller neighbor 0), so the probe
        // search exhausts the horizon and parks; that is logged, not fatal.
        let horizon = 40;
        let oracle = GraphOracle::complete().with_schedule(vec![]).unwrap();
        let registry = AdversaryRegistry::new(vec![Adversary::new("id", Combinator::Identity)]);
        let trace = rec_run(&oracle, &registry, horizon, 8).unwrap();
        let waited = trace
            .stages
            .iter()
            .flat_map(|r| &r.events)
            .any(|ev| matches!(ev.kind, RecEventKind::Waiting));
        assert!(waited, "the probe search should park");
        assert_eq!(trace.finals[0].x, None);
    }

    #[test]
    fn missing_schedule_is_an_error() {
        let oracle = GraphOracle::edge_list([(0, 1)]);
        let registry = AdversaryRegistry::default();
        assert!(matches!(
            rec_run(&oracle, &registry, 10, 8),
            Err(RecError::MissingSchedule(_))
        ));
    }

    #[test]
    fn diagnosis_requires_a_diagonalizing_tag() {
        let horizon = 60;
        let oracle = s4_oracle(horizon);
        let registry = AdversaryRegistry::new(vec![Adversary::new("c0", Combinator::Constant(0))]);
        let trace = rec_run(&oracle, &registry, horizon, 8).unwrap();
        assert!(matches!(
            verify_diagonalization(&trace, &oracle, &registry, 0),
            Err(RecError::NotDiagonalizing { .. })
        ));
    }
}
