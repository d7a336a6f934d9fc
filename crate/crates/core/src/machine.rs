//! Step-indexed partial-function adversaries and resumable dovetailing.
//!
//! Adversaries are built from a fixed set of named combinators plus the
//! expression language, never from arbitrary code, so every run replays
//! bit-for-bit. An adversary's raw verdict at budget `s` is `Halted(v)` once
//! `s` reaches its declared delay; [`AdversaryRegistry::evaluate`]
//! additionally enforces the use convention (a computation halting by stage
//! `s` has input and output below `s`) by suppressing early verdicts to
//! `Pending`.

use serde::{Deserialize, Serialize};

use crate::dsl::{Expr, ExprSource};
use crate::graph::Vertex;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MachineError {
    #[error("adversary index {index} out of range (registry has {len} entries)")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("dovetail already has a winner")]
    AlreadyWon,
    #[error("bad expression: {0}")]
    Expr(#[from] crate::dsl::DslError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalOutcome {
    Halted(u64),
    Pending,
}

impl EvalOutcome {
    pub fn halted(&self) -> Option<u64> {
        match self {
            EvalOutcome::Halted(v) => Some(*v),
            EvalOutcome::Pending => None,
        }
    }
}

/// The value rule of an adversary.
#[derive(Debug, Clone)]
pub enum Combinator {
    Constant(u64),
    Parity,
    /// 0 below the threshold, 1 from it on.
    Threshold(u64),
    Identity,
    /// Base rule with finitely many inputs overridden.
    TableOverride {
        base: Box<Combinator>,
        table: Vec<(u64, u64)>,
    },
    /// Base rule punched with finitely many divergence holes.
    PartialOn {
        base: Box<Combinator>,
        undefined: Vec<u64>,
    },
    NeverHalts,
    /// Arbitrary total rule over `x`; negative results clamp to 0.
    Expr(Expr),
}

impl Combinator {
    fn value(&self, x: u64) -> Option<u64> {
        match self {
            Combinator::Constant(c) => Some(*c),
            Combinator::Parity => Some(x % 2),
            Combinator::Threshold(t) => Some((x >= *t) as u64),
            Combinator::Identity => Some(x),
            Combinator::TableOverride { base, table } => table
                .iter()
                .find(|(k, _)| *k == x)
                .map(|(_, v)| Some(*v))
                .unwrap_or_else(|| base.value(x)),
            Combinator::PartialOn { base, undefined } => {
                if undefined.contains(&x) {
                    None
                } else {
                    base.value(x)
                }
            }
            Combinator::NeverHalts => None,
            Combinator::Expr(e) => Some(e.eval(&[x as i64]).max(0) as u64),
        }
    }
}

/// Extra halting delay, per input.
#[derive(Debug, Clone)]
pub enum Delay {
    None,
    Fixed(u64),
    Expr(Expr),
}

impl Delay {
    fn at(&self, x: u64) -> u64 {
        match self {
            Delay::None => 0,
            Delay::Fixed(d) => *d,
            Delay::Expr(e) => e.eval(&[x as i64]).max(0) as u64,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adversary {
    pub name: String,
    combinator: Combinator,
    delay: Delay,
}

impl Adversary {
    pub fn new(name: &str, combinator: Combinator) -> Adversary {
        Adversary {
            name: name.to_string(),
            combinator,
            delay: Delay::None,
        }
    }

    pub fn with_delay(mut self, delay: Delay) -> Adversary {
        self.delay = delay;
        self
    }

    /// Limit value, ignoring stages entirely. `None` means the adversary
    /// never halts on `x`.
    pub fn eval_limit(&self, x: u64) -> Option<u64> {
        self.combinator.value(x)
    }

    /// Raw step-indexed verdict: halted once the budget covers the declared
    /// delay. Monotone in `s` by construction.
    pub fn eval_raw(&self, x: u64, s: usize) -> EvalOutcome {
        match self.combinator.value(x) {
            Some(v) if self.delay.at(x) <= s as u64 => EvalOutcome::Halted(v),
            _ => EvalOutcome::Pending,
        }
    }

    /// Use-convention verdict: raw, additionally suppressed to `Pending`
    /// unless `x < s` and the value is `< s`.
    pub fn eval(&self, x: u64, s: usize) -> EvalOutcome {
        match self.eval_raw(x, s) {
            EvalOutcome::Halted(v) if x < s as u64 && v < s as u64 => EvalOutcome::Halted(v),
            _ => EvalOutcome::Pending,
        }
    }

    /// Least stage at which [`Adversary::eval`] halts on `x`, if any.
    pub fn halt_stage(&self, x: u64) -> Option<usize> {
        let v = self.combinator.value(x)?;
        Some(self.delay.at(x).max(x + 1).max(v + 1) as usize)
    }
}

/// Finite indexed family standing in for an effective enumeration of the
/// partial functions, at desk scale.
#[derive(Debug, Clone, Default)]
pub struct AdversaryRegistry {
    entries: Vec<Adversary>,
}

impl AdversaryRegistry {
    pub fn new(entries: Vec<Adversary>) -> AdversaryRegistry {
        AdversaryRegistry { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, e: usize) -> Option<&Adversary> {
        self.entries.get(e)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Adversary> {
        self.entries.iter()
    }

    pub fn evaluate(&self, e: usize, x: Vertex, s: usize) -> Result<EvalOutcome, MachineError> {
        self.checked(e).map(|a| a.eval(x as u64, s))
    }

    pub fn evaluate_raw(&self, e: usize, x: Vertex, s: usize) -> Result<EvalOutcome, MachineError> {
        self.checked(e).map(|a| a.eval_raw(x as u64, s))
    }

    fn checked(&self, e: usize) -> Result<&Adversary, MachineError> {
        self.entries.get(e).ok_or(MachineError::IndexOutOfRange {
            index: e,
            len: self.entries.len(),
        })
    }
}

/// One poll of a resumable search at its current cursor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Poll {
    Found(u64),
    /// Candidate examined and rejected; the cursor advances.
    Pending,
    /// Candidate not available yet (e.g. an enumeration that has not revealed
    /// this entry); the cursor stays put.
    Blocked,
}

/// Cursors plus winner of a round-robin dovetail across several searches.
/// Resumable across stages; the winner is recorded at most once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DovetailState {
    pub cursors: Vec<u64>,
    pub winner: Option<DovetailWin>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DovetailWin {
    pub search: usize,
    pub value: u64,
}

impl DovetailState {
    pub fn new(searches: usize) -> DovetailState {
        DovetailState {
            cursors: vec![0; searches],
            winner: None,
        }
    }
}

/// Advances the searches round-robin, one poll per budget unit, recording the
/// first success. Ties cannot arise: polls are strictly sequential, and the
/// round-robin order itself breaks simultaneous readiness by search index.
pub fn dovetail_step(
    state: &mut DovetailState,
    searches: &mut [&mut dyn FnMut(u64) -> Poll],
    budget: u64,
) -> Result<(), MachineError> {
    if state.winner.is_some() {
        return Err(MachineError::AlreadyWon);
    }
    assert_eq!(state.cursors.len(), searches.len());
    if searches.is_empty() {
        return Ok(());
    }
    let mut which = 0usize;
    for _ in 0..budget {
        let cursor = state.cursors[which];
        match searches[which](cursor) {
            Poll::Found(value) => {
                state.winner = Some(DovetailWin {
                    search: which,
                    value,
                });
                return Ok(());
            }
            Poll::Pending => state.cursors[which] += 1,
            Poll::Blocked => {}
        }
        which = (which + 1) % searches.len();
    }
    Ok(())
}

/// Serializable registry entry; `build` compiles the whole file into an
/// [`AdversaryRegistry`]. Order in the file is the priority index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarySpec {
    pub name: String,
    pub combinator: CombinatorSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay: Option<DelaySpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CombinatorSpec {
    Constant {
        value: u64,
    },
    Parity,
    Threshold {
        at: u64,
    },
    Identity,
    TableOverride {
        base: Box<CombinatorSpec>,
        table: Vec<(u64, u64)>,
    },
    PartialOn {
        base: Box<CombinatorSpec>,
        undefined: Vec<u64>,
    },
    NeverHalts,
    Expr {
        expr: ExprSource,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DelaySpec {
    Fixed(u64),
    Expr { expr: ExprSource },
}

impl CombinatorSpec {
    pub fn build(&self) -> Result<Combinator, MachineError> {
        Ok(match self {
            CombinatorSpec::Constant { value } => Combinator::Constant(*value),
            CombinatorSpec::Parity => Combinator::Parity,
            CombinatorSpec::Threshold { at } => Combinator::Threshold(*at),
            CombinatorSpec::Identity => Combinator::Identity,
            CombinatorSpec::TableOverride { base, table } => Combinator::TableOverride {
                base: Box::new(base.build()?),
                table: table.clone(),
            },
            CombinatorSpec::PartialOn { base, undefined } => Combinator::PartialOn {
                base: Box::new(base.build()?),
                undefined: undefined.clone(),
            },
            CombinatorSpec::NeverHalts => Combinator::NeverHalts,
            CombinatorSpec::Expr { expr } => Combinator::Expr(expr.compile(&["x"])?),
        })
    }
}

pub fn build_registry(specs: &[AdversarySpec]) -> Result<AdversaryRegistry, MachineError> {
    let mut entries = Vec::with_capacity(specs.len());
    for spec in specs {
        let mut adv = Adversary::new(&spec.name, spec.combinator.build()?);
        adv = match &spec.delay {
            None => adv,
            Some(DelaySpec::Fixed(d)) => adv.with_delay(Delay::Fixed(*d)),
            Some(DelaySpec::Expr { expr }) => adv.with_delay(Delay::Expr(expr.compile(&["x"])?)),
        };
        entries.push(adv);
    }
    Ok(AdversaryRegistry::new(entries))
}
