//! The three-case classification partitions: split by the isolation (or
//! universality) decider when one exists, and otherwise around a least
//! failing extension pair, so that both sides inherit strictly smaller
//! failures.

use serde::{Deserialize, Serialize};

use crate::graph::{ExtensionPair, Vertex};
use crate::oracle::{Certification, FailureCertificate, FuncSpec, GraphOracle};

use itertools::Itertools;
use std::collections::BTreeSet;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClassifyError {
    #[error("oracle family `{0}` has no {1} decider")]
    DeciderUnavailable(String, &'static str),
    #[error("cut split must partition the pair support into nonempty halves")]
    BadSplit,
}

/// Checks whether `v` is wrongly joined relative to one half of a failing
/// pair: missing an edge into the half's `A` part or carrying one into its
/// `B` part. Bounded quantifiers only.
pub fn not_correctly_joined(
    oracle: &GraphOracle,
    v: Vertex,
    ui_a: &BTreeSet<Vertex>,
    ui_b: &BTreeSet<Vertex>,
) -> bool {
    ui_a.iter().any(|&a| !oracle.edge(v, a)) || ui_b.iter().any(|&b| oracle.edge(v, b))
}

/// A partition of a failing pair's support into two nonempty halves.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutSplit {
    u0: BTreeSet<Vertex>,
    u1: BTreeSet<Vertex>,
}

impl CutSplit {
    pub fn new(
        pair: &ExtensionPair,
        u0: impl IntoIterator<Item = Vertex>,
    ) -> Result<CutSplit, ClassifyError> {
        let support: BTreeSet<Vertex> = pair.support().collect();
        let u0: BTreeSet<Vertex> = u0.into_iter().collect();
        if u0.is_empty() || !u0.is_subset(&support) || u0.len() == support.len() {
            return Err(ClassifyError::BadSplit);
        }
        let u1: BTreeSet<Vertex> = support.difference(&u0).copied().collect();
        Ok(CutSplit { u0, u1 })
    }

    /// The canonical minimal split: the least support vertex against the rest.
    pub fn canonical(pair: &ExtensionPair) -> Result<CutSplit, ClassifyError> {
        let least = pair.support().min().ok_or(ClassifyError::BadSplit)?;
        CutSplit::new(pair, [least])
    }

    pub fn u0(&self) -> &BTreeSet<Vertex> {
        &self.u0
    }

    pub fn u1(&self) -> &BTreeSet<Vertex> {
        &self.u1
    }

    /// The half of the pair inherited by side `i`.
    pub fn inherited_pair(&self, pair: &ExtensionPair, side: u8) -> ExtensionPair {
        let u = if side == 0 { &self.u0 } else { &self.u1 };
        ExtensionPair::new(
            pair.a().intersection(u).copied(),
            pair.b().intersection(u).copied(),
        )
        .expect("subsets of disjoint sides stay disjoint")
    }
}

/// Side of `v` in the partition built around a failing pair: side 0 holds
/// `U₀` and everything outside `U₁` wrongly joined to `U₀`; side 1 is the
/// rest. Total and decidable.
pub fn case3_membership(
    oracle: &GraphOracle,
    pair: &ExtensionPair,
    split: &CutSplit,
    v: Vertex,
) -> u8 {
    if split.u0.contains(&v) {
        return 0;
    }
    if split.u1.contains(&v) {
        return 1;
    }
    let u0_a: BTreeSet<Vertex> = pair.a().intersection(&split.u0).copied().collect();
    let u0_b: BTreeSet<Vertex> = pair.b().intersection(&split.u0).copied().collect();
    if not_correctly_joined(oracle, v, &u0_a, &u0_b) {
        0
    } else {
        1
    }
}

/// A confirmed least failure: the smallest pair size at which the extension
/// property provably fails, with the structural certificate that closed it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeastFailureReport {
    pub n: usize,
    pub pair_a: Vec<Vertex>,
    pub pair_b: Vec<Vertex>,
    pub certificate: FailureCertificate,
}

impl LeastFailureReport {
    pub fn pair(&self) -> ExtensionPair {
        ExtensionPair::new(self.pair_a.iter().copied(), self.pair_b.iter().copied())
            .expect("report sides are disjoint by construction")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum LeastFailureOutcome {
    Found(LeastFailureReport),
    /// No confirmed failure up to `n_max`. Candidates that merely lacked a
    /// witness below the scan bound are listed as unconfirmed, never as
    /// failures: failure is a for-all-vertices fact a bounded scan cannot
    /// settle.
    NotFound {
        n_max: usize,
        unconfirmed: Vec<(usize, Vec<Vertex>, Vec<Vertex>)>,
        unconfirmed_total: usize,
    },
}

const UNCONFIRMED_KEPT: usize = 16;

/// Scans pair sizes `1..=n_max` over supports within `{0..=vertex_bound}` in
/// canonical order (size, then lexicographic support, then the A/B split
/// mask) and returns the least pair whose failure the oracle certifies.
pub fn least_failing_pair(
    oracle: &GraphOracle,
    n_max: usize,
    vertex_bound: Vertex,
) -> LeastFailureOutcome {
    let mut unconfirmed = Vec::new();
    let mut unconfirmed_total = 0usize;
    for n in 1..=n_max {
        if let Some(report) = scan_size(
            oracle,
            n,
            vertex_bound,
            &mut unconfirmed,
            &mut unconfirmed_total,
        ) {
            return LeastFailureOutcome::Found(report);
        }
    }
    LeastFailureOutcome::NotFound {
        n_max,
        unconfirmed,
        unconfirmed_total,
    }
}

/// Least confirmed failing pair of each exact size, for the monotone-failure
/// check: one confirmed failure at size m forces one at every larger size.
pub fn confirmed_failures_by_size(
    oracle: &GraphOracle,
    n_max: usize,
    vertex_bound: Vertex,
) -> Vec<Option<LeastFailureReport>> {
    (1..=n_max)
        .map(|n| scan_size(oracle, n, vertex_bound, &mut Vec::new(), &mut 0))
        .collect()
}

fn scan_size(
    oracle: &GraphOracle,
    n: usize,
    vertex_bound: Vertex,
    unconfirmed: &mut Vec<(usize, Vec<Vertex>, Vec<Vertex>)>,
    unconfirmed_total: &mut usize,
) -> Option<LeastFailureReport> {
    for support in (0..=vertex_bound).combinations(n) {
        for mask in 0u64..(1u64 << n) {
            let a = support
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 0)
                .map(|(_, &v)| v);
            let b = support
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &v)| v);
            let pair = ExtensionPair::new(a, b).expect("mask split is disjoint");
            match oracle.certify_pair(&pair) {
                Certification::HasWitness(w) => {
                    debug_assert!(
                        pair.witnessed_by(w, |x, y| oracle.edge(x, y)),
                        "family certificate produced a non-witness"
                    );
                }
                Certification::NoWitness(certificate) => {
                    return Some(LeastFailureReport {
                        n,
                        pair_a: pair.a().iter().copied().collect(),
                        pair_b: pair.b().iter().copied().collect(),
                        certificate,
                    });
                }
                Certification::Unknown => {
                    let witnessed =
                        (0..=vertex_bound).any(|w| pair.witnessed_by(w, |x, y| oracle.edge(x, y)));
                    if !witnessed {
                        *unconfirmed_total += 1;
                        if unconfirmed.len() < UNCONFIRMED_KEPT {
                            unconfirmed.push((
                                n,
                                pair.a().iter().copied().collect(),
                                pair.b().iter().copied().collect(),
                            ));
                        }
                    }
                }
            }
        }
    }
    None
}

/// Verdict on one side of the induced partition failing its inherited pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum InheritedFailure {
    /// Bounded scan found nothing and the original failure is certified, so
    /// the wrong-joining argument closes the side for good.
    Confirmed,
    /// Bounded scan found nothing but no certificate closes the question.
    ConsistentAtBound,
    Violated {
        witness: Vertex,
    },
}

/// Checks that side `side` of the partition around `pair` has no witness for
/// its inherited pair among vertices below `bound`.
pub fn verify_inherited_failure(
    oracle: &GraphOracle,
    pair: &ExtensionPair,
    split: &CutSplit,
    side: u8,
    bound: Vertex,
    certified: bool,
) -> InheritedFailure {
    let inherited = split.inherited_pair(pair, side);
    for v in 0..=bound {
        if case3_membership(oracle, pair, split, v) == side
            && inherited.witnessed_by(v, |x, y| oracle.edge(x, y))
        {
            return InheritedFailure::Violated { witness: v };
        }
    }
    if certified {
        InheritedFailure::Confirmed
    } else {
        InheritedFailure::ConsistentAtBound
    }
}

/// Splits on the oracle's isolation decider: side 0 is the isolated
/// vertices. The universal-vertex case is the same call on the complemented
/// oracle.
pub fn decider_partition(oracle: &GraphOracle, v: Vertex) -> Result<u8, ClassifyError> {
    match oracle.is_isolated(v) {
        Some(true) => Ok(0),
        Some(false) => Ok(1),
        None => Err(ClassifyError::DeciderUnavailable(
            oracle.describe().to_string(),
            "isolation",
        )),
    }
}

/// Graph with an edge between `2n` and `2m+1` exactly when `f(n) = m`; the
/// odd vertex `2m+1` is isolated precisely when `m` is outside the range of
/// `f`, so the isolated set encodes the range.
pub fn aca_gadget(f: FuncSpec) -> GraphOracle {
    GraphOracle::aca_gadget(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(a: &[Vertex], b: &[Vertex]) -> ExtensionPair {
        ExtensionPair::new(a.iter().copied(), b.iter().copied()).unwrap()
    }

    fn set(vs: &[Vertex]) -> BTreeSet<Vertex> {
        vs.iter().copied().collect()
    }

    #[test]
    fn wrong_joining_on_the_matching() {
        let o = GraphOracle::matching();
        assert!(not_correctly_joined(&o, 2, &set(&[0]), &set(&[])));
        assert!(!not_correctly_joined(&o, 1, &set(&[0]), &set(&[])));
        assert!(!not_correctly_joined(&o, 7, &set(&[]), &set(&[])));
    }

    #[test]
    fn case3_on_a_matched_edge() {
        let o = GraphOracle::matching();
        let p = pair(&[0, 1], &[]);
        let split = CutSplit::canonical(&p).unwrap();
        assert_eq!(split.u0(), &set(&[0]));
        assert_eq!(split.u1(), &set(&[1]));
        assert_eq!(case3_membership(&o, &p, &split, 0), 0);
        assert_eq!(case3_membership(&o, &p, &split, 1), 1);
        assert_eq!(case3_membership(&o, &p, &split, 5), 0);
        // Total 2-coloring with U₀ ⊆ X₀ and U₁ ⊆ X₁; here side 1 is exactly {1}.
        for v in 0..100 {
            let side = case3_membership(&o, &p, &split, v);
            assert_eq!(side == 1, v == 1);
        }
    }

    #[test]
    fn least_failure_on_the_matching() {
        match least_failing_pair(&GraphOracle::matching(), 3, 16) {
            LeastFailureOutcome::Found(r) => {
                assert_eq!(r.n, 2);
                assert_eq!(r.pair_a, vec![0, 1]);
                assert!(r.pair_b.is_empty());
                assert!(matches!(
                    r.certificate,
                    FailureCertificate::FiniteNeighborhood { anchor: 0 }
                ));
            }
            other => panic!("expected a confirmed failure, got {other:?}"),
        }
    }

    #[test]
    fn canonical_presentation_never_fails() {
        match least_failing_pair(&GraphOracle::canonical_random(), 3, 8) {
            LeastFailureOutcome::NotFound {
                unconfirmed_total, ..
            } => assert_eq!(unconfirmed_total, 0),
            other => panic!("unexpected failure report {other:?}"),
        }
    }

    #[test]
    fn complete_graph_fails_at_one() {
        match least_failing_pair(&GraphOracle::complete(), 1, 8) {
            LeastFailureOutcome::Found(r) => {
                assert_eq!(r.n, 1);
                assert!(r.pair_a.is_empty());
                assert_eq!(r.pair_b, vec![0]);
                assert!(matches!(
                    r.certificate,
                    FailureCertificate::UniversalVertex { vertex: 0 }
                ));
            }
            other => panic!("expected universal failure, got {other:?}"),
        }
    }

    #[test]
    fn monotone_failure_on_the_matching() {
        let by_size = confirmed_failures_by_size(&GraphOracle::matching(), 4, 12);
        assert!(by_size[0].is_none(), "no 1-pair fails in the matching");
        for (i, entry) in by_size.iter().enumerate().skip(1) {
            assert!(entry.is_some(), "size {} should fail", i + 1);
        }
    }

    #[test]
    fn inherited_failures_are_certified_on_the_matching() {
        let o = GraphOracle::matching();
        let p = pair(&[0, 1], &[]);
        let split = CutSplit::canonical(&p).unwrap();
        for side in 0..2u8 {
            assert_eq!(
                verify_inherited_failure(&o, &p, &split, side, 256, true),
                InheritedFailure::Confirmed
            );
        }
    }

    #[test]
    fn decider_partition_examples() {
        let o = GraphOracle::edge_list([(0, 1)]);
        assert_eq!(decider_partition(&o, 5).unwrap(), 0);
        assert_eq!(decider_partition(&o, 1).unwrap(), 1);
        let e = crate::dsl::Expr::parse("u + 1 == v", &["u", "v"]).unwrap();
        assert!(matches!(
            decider_partition(&GraphOracle::from_expr(e), 0),
            Err(ClassifyError::DeciderUnavailable(..))
        ));
    }

    #[test]
    fn universal_case_via_the_complement() {
        // Splitting on universal vertices is the isolated split of the
        // complemented oracle. In the complement of the matching, exactly
        // the matched partners are non-universal — i.e. nothing is, but
        // every vertex is non-isolated; a family with genuine universal
        // vertices comes from complementing an edge list.
        let o = GraphOracle::complemented(GraphOracle::edge_list([(0, 1)]));
        // Vertices 0 and 1 miss only each other; everything else is
        // universal in the complement.
        assert_eq!(
            decider_partition(&GraphOracle::complemented(o.clone()), 0),
            Ok(1)
        );
        for v in [2, 3, 10] {
            assert_eq!(o.is_universal(v), Some(true));
            // The universal split of `o` is the isolated split of its
            // complement.
            assert_eq!(
                decider_partition(&GraphOracle::complemented(o.clone()), v),
                Ok(0)
            );
        }
    }

    #[test]
    fn aca_gadget_successor_table() {
        let f = FuncSpec::table((0..60).map(|n| (n, n + 1))).unwrap();
        let o = aca_gadget(f);
        assert_eq!(o.is_isolated(1), Some(true)); // 0 is outside the range
        for m in 1..=60usize {
            assert_eq!(o.is_isolated(2 * m + 1), Some(false), "m={m}");
        }
        // Even vertices with a defined image are never isolated.
        for n in 0..60usize {
            assert!(o.edge(2 * n, 2 * (n + 1) + 1));
        }
    }

    #[test]
    fn aca_gadget_identity_expr() {
        let f = FuncSpec::Expr(crate::dsl::Expr::parse("n", &["n"]).unwrap());
        let o = aca_gadget(f);
        // Range is everything: each odd vertex 2m+1 has the neighbor 2m.
        for m in 0..50usize {
            assert!(o.edge(2 * m, 2 * m + 1));
        }
    }

    #[test]
    fn bad_splits_rejected() {
        let p = pair(&[0, 1], &[]);
        assert!(CutSplit::new(&p, []).is_err());
        assert!(CutSplit::new(&p, [0, 1]).is_err());
        assert!(CutSplit::new(&p, [7]).is_err());
    }

    #[test]
    fn report_serializes_with_certificate() {
        let r = LeastFailureReport {
            n: 2,
            pair_a: vec![0, 1],
            pair_b: vec![],
            certificate: FailureCertificate::FiniteNeighborhood { anchor: 0 },
        };
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("finite_neighborhood"));
        let back: LeastFailureReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }
}
