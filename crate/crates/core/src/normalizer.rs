//! Builds a copy `H` of an input graph in which the isolated vertices are
//! exactly the even numbers, tracking the stage-indexed map `f_s` whose limit
//! is the isomorphism.
//!
//! Each stage handles the newest vertex: an isolated newcomer gets the least
//! fresh even number, a newcomer attached only to already-non-isolated
//! vertices gets the least fresh odd number, and a newcomer that de-isolates
//! older vertices triggers a re-pack: the de-isolated vertices move to fresh
//! odd numbers and the still-isolated vertices are re-packed onto the even
//! initial segment. Odd images never move again.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::graph::{stage_prefix, StageGraph, Vertex};
use crate::oracle::GraphOracle;
use crate::report::Check;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NormalizerError {
    #[error("vertices {0} and {1} never share a stage within the horizon")]
    NeverCoappeared(Vertex, Vertex),
    #[error("edge verdict for ({0}, {1}) differs across stages; stability is violated")]
    UnstableEdge(Vertex, Vertex),
    #[error("vertex {x} exceeds horizon {horizon}")]
    BeyondHorizon { x: Vertex, horizon: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum StageCase {
    Init,
    FreshEven,
    FreshOdd,
    Repack {
        de_isolated: Vec<Vertex>,
        still_isolated: Vec<Vertex>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizerStageRecord {
    pub s: usize,
    #[serde(flatten)]
    pub case: StageCase,
    /// Mappings added or changed this stage, as `(input vertex, image)`.
    pub delta: Vec<(Vertex, Vertex)>,
    /// Image-side edges first visible this stage.
    pub new_edges: Vec<(Vertex, Vertex)>,
}

#[derive(Debug, Clone)]
pub struct NormalizerState {
    pub horizon: usize,
    /// Input prefix on `{0..=horizon}`.
    pub g: StageGraph,
    /// The map after each stage; stage `s` is defined on `{0..=s}`.
    pub f_history: Vec<BTreeMap<Vertex, Vertex>>,
    pub records: Vec<NormalizerStageRecord>,
}

/// Runs stages `0..=horizon` against the oracle's edge relation.
pub fn normalize_run(oracle: &GraphOracle, horizon: usize) -> NormalizerState {
    let g = stage_prefix(oracle, horizon);
    let mut f: BTreeMap<Vertex, Vertex> = BTreeMap::new();
    f.insert(0, 0);
    let mut isolated: Vec<bool> = vec![true];
    let mut evens_used = 1usize; // images 0, 2, …, 2(evens_used-1)
    let mut odds_used = 0usize; // images 1, 3, …, 2·odds_used-1

    let mut f_history = vec![f.clone()];
    let mut records = vec![NormalizerStageRecord {
        s: 0,
        case: StageCase::Init,
        delta: vec![(0, 0)],
        new_edges: vec![],
    }];
    let mut prev_h_edges: BTreeSet<(Vertex, Vertex)> = BTreeSet::new();

    for t in 1..=horizon {
        let neighbors: Vec<Vertex> = (0..t).filter(|&u| g.has_edge(u, t)).collect();
        let case;
        let mut delta = Vec::new();
        if neighbors.is_empty() {
            let image = 2 * evens_used;
            evens_used += 1;
            f.insert(t, image);
            delta.push((t, image));
            isolated.push(true);
            case = StageCase::FreshEven;
        } else if neighbors.iter().all(|&u| !isolated[u]) {
            let image = 2 * odds_used + 1;
            odds_used += 1;
            f.insert(t, image);
            delta.push((t, image));
            isolated.push(false);
            case = StageCase::FreshOdd;
        } else {
            let de_isolated: Vec<Vertex> =
                neighbors.iter().copied().filter(|&u| isolated[u]).collect();
            for &x in &de_isolated {
                isolated[x] = false;
            }
            isolated.push(false);
            let still_isolated: Vec<Vertex> = (0..t).filter(|&u| isolated[u]).collect();
            for (i, &x) in de_isolated.iter().enumerate() {
                let image = 2 * (odds_used + i) + 1;
                f.insert(x, image);
                delta.push((x, image));
            }
            let newcomer_image = 2 * (odds_used + de_isolated.len()) + 1;
            odds_used += de_isolated.len() + 1;
            f.insert(t, newcomer_image);
            delta.push((t, newcomer_image));
            for (i, &a) in still_isolated.iter().enumerate() {
                if f.get(&a) != Some(&(2 * i)) {
                    f.insert(a, 2 * i);
                    delta.push((a, 2 * i));
                }
            }
            evens_used = still_isolated.len();
            case = StageCase::Repack {
                de_isolated,
                still_isolated,
            };
        }
        debug_assert_eq!(
            least_missing(&f, 0),
            2 * evens_used,
            "even frontier counter out of sync at stage {t}"
        );
        debug_assert_eq!(
            least_missing(&f, 1),
            2 * odds_used + 1,
            "odd frontier counter out of sync at stage {t}"
        );

        let h_edges = image_edges(&g, &f, t);
        let new_edges: Vec<(Vertex, Vertex)> = h_edges
            .iter()
            .filter(|e| !prev_h_edges.contains(e))
            .copied()
            .collect();
        prev_h_edges = h_edges;
        delta.sort_unstable();
        f_history.push(f.clone());
        records.push(NormalizerStageRecord {
            s: t,
            case,
            delta,
            new_edges,
        });
    }

    NormalizerState {
        horizon,
        g,
        f_history,
        records,
    }
}

fn least_missing(f: &BTreeMap<Vertex, Vertex>, parity: usize) -> Vertex {
    let used: BTreeSet<Vertex> = f.values().copied().collect();
    (0..)
        .map(|i| 2 * i + parity)
        .find(|m| !used.contains(m))
        .unwrap()
}

/// Image-side edge set at stage `s`: `(f(x), f(y))` for each input edge with
/// both ends at or below `s`.
fn image_edges(
    g: &StageGraph,
    f: &BTreeMap<Vertex, Vertex>,
    s: usize,
) -> BTreeSet<(Vertex, Vertex)> {
    let mut out = BTreeSet::new();
    for (x, y) in g.edges() {
        if x <= s && y <= s {
            let (n, m) = (f[&x], f[&y]);
            out.insert((n.min(m), n.max(m)));
        }
    }
    out
}

impl NormalizerState {
    fn image_edges_at(&self, s: usize) -> BTreeSet<(Vertex, Vertex)> {
        image_edges(&self.g, &self.f_history[s], s)
    }

    /// Stage-s preimage of an image vertex, if present.
    fn preimage(&self, s: usize, n: Vertex) -> Option<Vertex> {
        self.f_history[s]
            .iter()
            .find(|(_, &img)| img == n)
            .map(|(&x, _)| x)
    }
}

/// The stable image-side edge verdict: consults every stage where both
/// vertices are present and checks that they all agree rather than trusting
/// the first.
pub fn stable_edge(state: &NormalizerState, n: Vertex, m: Vertex) -> Result<bool, NormalizerError> {
    let mut verdict: Option<bool> = None;
    for s in 0..=state.horizon {
        let (Some(x), Some(y)) = (state.preimage(s, n), state.preimage(s, m)) else {
            continue;
        };
        let here = x != y && state.g.has_edge(x, y);
        match verdict {
            None => verdict = Some(here),
            Some(v) if v != here => return Err(NormalizerError::UnstableEdge(n, m)),
            _ => {}
        }
    }
    verdict.ok_or(NormalizerError::NeverCoappeared(n, m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitOutcome {
    Stable {
        value: Vertex,
        since: usize,
        /// Even images remain provisional: isolation is never settled from
        /// inside a finite run.
        provisional: bool,
    },
    UnstableAtHorizon {
        last_value: Vertex,
    },
}

/// Last value of `f_s(x)` and the stage from which it never changed within
/// the horizon.
pub fn limit_map(state: &NormalizerState, x: Vertex) -> Result<LimitOutcome, NormalizerError> {
    if x > state.horizon {
        return Err(NormalizerError::BeyondHorizon {
            x,
            horizon: state.horizon,
        });
    }
    let value = state.f_history[state.horizon][&x];
    let mut since = x; // first stage where f(x) is defined
    for s in x + 1..=state.horizon {
        if state.f_history[s][&x] != state.f_history[s - 1][&x] {
            since = s;
        }
    }
    if value % 2 == 1 {
        Ok(LimitOutcome::Stable {
            value,
            since,
            provisional: false,
        })
    } else if since == state.horizon && state.horizon > 0 {
        Ok(LimitOutcome::UnstableAtHorizon { last_value: value })
    } else {
        Ok(LimitOutcome::Stable {
            value,
            since,
            provisional: true,
        })
    }
}

/// The full invariant suite over a finished run.
pub fn verify_run(state: &NormalizerState) -> Vec<Check> {
    let mut checks = Vec::new();
    let h = state.horizon;
    // Stage at which each vertex first shows a neighbor; isolation in the
    // prefix {0..=s} is first_nbr[v] > s.
    let first_nbr: Vec<usize> = (0..=h)
        .map(|v| {
            (0..=h)
                .filter(|&u| state.g.has_edge(u, v))
                .map(|u| u.max(v))
                .min()
                .unwrap_or(usize::MAX)
        })
        .collect();

    let mut injective = true;
    let mut shape = true;
    let mut parity_tracks_isolation = true;
    let mut odd_permanent = true;
    let mut drops_even = true;
    let mut stability = true;
    let mut detail = String::new();

    let mut first_verdicts: BTreeMap<(Vertex, Vertex), bool> = BTreeMap::new();
    for s in 0..=h {
        let f = &state.f_history[s];
        let images: BTreeSet<Vertex> = f.values().copied().collect();
        if images.len() != f.len() {
            injective = false;
            detail.push_str(&format!("stage {s}: not injective; "));
        }
        let evens: Vec<Vertex> = images.iter().copied().filter(|v| v % 2 == 0).collect();
        let odds: Vec<Vertex> = images.iter().copied().filter(|v| v % 2 == 1).collect();
        let evens_ok = evens.iter().enumerate().all(|(i, &v)| v == 2 * i);
        let odds_ok = odds.iter().enumerate().all(|(i, &v)| v == 2 * i + 1);
        if !evens_ok || !odds_ok {
            shape = false;
            detail.push_str(&format!("stage {s}: range is not two initial segments; "));
        }
        for (&x, &img) in f {
            if (first_nbr[x] > s) != (img % 2 == 0) {
                parity_tracks_isolation = false;
                detail.push_str(&format!(
                    "stage {s}: parity of f({x}) disagrees with isolation; "
                ));
            }
        }
        if s > 0 {
            let prev = &state.f_history[s - 1];
            for (&x, &img) in prev {
                if img % 2 == 1 && f[&x] != img {
                    odd_permanent = false;
                    detail.push_str(&format!("stage {s}: odd image of {x} moved; "));
                }
            }
            let prev_images: BTreeSet<Vertex> = prev.values().copied().collect();
            for dropped in prev_images.difference(&images) {
                if dropped % 2 == 1 {
                    drops_even = false;
                    detail.push_str(&format!("stage {s}: odd image {dropped} dropped; "));
                }
            }
        }
        let edges = state.image_edges_at(s);
        for n in images.iter().copied() {
            for m in images.iter().copied().filter(|&m| m > n) {
                let here = edges.contains(&(n, m));
                match first_verdicts.get(&(n, m)) {
                    None => {
                        first_verdicts.insert((n, m), here);
                    }
                    Some(&v) if v != here => {
                        stability = false;
                        detail.push_str(&format!("stage {s}: edge ({n},{m}) flipped; "));
                    }
                    _ => {}
                }
            }
        }
    }

    checks.push(Check::new(
        "normalizer/injective",
        injective,
        "f_s injective at every stage",
    ));
    checks.push(Check::new(
        "normalizer/range-shape",
        shape,
        "range is an even prefix plus an odd prefix",
    ));
    checks.push(Check::new(
        "normalizer/isolation-parity",
        parity_tracks_isolation,
        "isolated in the prefix iff the image is even",
    ));
    checks.push(Check::new(
        "normalizer/odd-permanent",
        odd_permanent,
        "odd images never move",
    ));
    checks.push(Check::new(
        "normalizer/drops-even",
        drops_even,
        "vertices leaving the range are even",
    ));
    checks.push(Check::new(
        "normalizer/edge-stability",
        stability,
        "image edges agree across all stage pairs",
    ));

    // Limit behavior: injectivity and edge preservation over stabilized
    // vertices, and the final range exactly fitting the isolation counts.
    let mut stable_values: BTreeMap<Vertex, Vertex> = BTreeMap::new();
    let mut limit_injective = true;
    let mut preserved = true;
    for x in 0..=h {
        if let Ok(LimitOutcome::Stable { value, .. }) = limit_map(state, x) {
            if stable_values.insert(x, value).is_some() {
                limit_injective = false;
            }
        }
    }
    let values: BTreeSet<Vertex> = stable_values.values().copied().collect();
    if values.len() != stable_values.len() {
        limit_injective = false;
    }
    // Stabilized images are all present at the horizon stage, and the
    // per-stage stability sweep above already pinned every verdict to its
    // first co-appearance, so the horizon snapshot decides preservation.
    let final_edges = state.image_edges_at(h);
    let keys: Vec<Vertex> = stable_values.keys().copied().collect();
    for (i, &x) in keys.iter().enumerate() {
        for &y in keys.iter().skip(i + 1) {
            let want = state.g.has_edge(x, y);
            let (n, m) = (stable_values[&x], stable_values[&y]);
            let got = final_edges.contains(&(n.min(m), n.max(m)));
            if got != want {
                preserved = false;
            }
        }
    }
    checks.push(Check::new(
        "normalizer/limit-injective",
        limit_injective,
        "stabilized images are distinct",
    ));
    checks.push(Check::new(
        "normalizer/limit-preserves-edges",
        preserved,
        "input edges match stable image edges on stabilized vertices",
    ));

    let final_f = &state.f_history[h];
    let iso_count = (0..=h).filter(|&v| first_nbr[v] > h).count();
    let non_iso = h + 1 - iso_count;
    if iso_count == 0 || non_iso == 0 {
        checks.push(Check::new(
            "normalizer/onto-scale",
            true,
            "skipped: degenerate input without both isolated and non-isolated vertices",
        ));
    } else {
        let images: BTreeSet<Vertex> = final_f.values().copied().collect();
        let mut onto = true;
        for i in 0..non_iso {
            if !images.contains(&(2 * i + 1)) {
                onto = false;
            }
        }
        for i in 0..iso_count {
            if !images.contains(&(2 * i)) {
                onto = false;
            }
        }
        checks.push(Check::new(
            "normalizer/onto-scale",
            onto,
            "every even and odd number within the explored counts is attained",
        ));
    }

    if !detail.is_empty() {
        if let Some(c) = checks.iter_mut().find(|c| !c.pass) {
            c.detail = detail;
        }
    }
    checks
}

/// The image-side graph as of the final stage: vertices up to the largest
/// image, edges exactly the stable image edges.
pub fn image_graph(state: &NormalizerState) -> StageGraph {
    let f = &state.f_history[state.horizon];
    let size = f.values().copied().max().map(|m| m + 1).unwrap_or(0);
    let mut g = StageGraph::new(size);
    for (n, m) in state.image_edges_at(state.horizon) {
        g.add_edge(n, m).expect("image edges stay in range");
    }
    g
}

/// Rebuilds the run state from stored stage records plus the oracle, for
/// trace verification without re-simulating.
pub fn state_from_records(
    oracle: &GraphOracle,
    records: Vec<NormalizerStageRecord>,
) -> NormalizerState {
    let horizon = records.last().map(|r| r.s).unwrap_or(0);
    let g = stage_prefix(oracle, horizon);
    let mut f: BTreeMap<Vertex, Vertex> = BTreeMap::new();
    let mut f_history = Vec::with_capacity(records.len());
    for rec in &records {
        for &(x, img) in &rec.delta {
            f.insert(x, img);
        }
        f_history.push(f.clone());
    }
    NormalizerState {
        horizon,
        g,
        f_history,
        records,
    }
}
