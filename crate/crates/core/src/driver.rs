//! Batch driver: runs a configured construction to its horizon, writes the
//! trace (JSON-lines with a config header), the final graph (JSON and DOT),
//! and a verification report; re-runs invariant suites against stored traces.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classify::{
    case3_membership, least_failing_pair, verify_inherited_failure, CutSplit, InheritedFailure,
    LeastFailureOutcome,
};
use crate::config::{Construction, RunConfig};
use crate::gadget::{self, GadgetConfig};
use crate::graph::{stage_prefix, ExtensionPair, StageGraph};
use crate::kforest;
use crate::normalizer;
use crate::random::{canonical_edge, random_side_search, witness_formula, SideVerdict};
use crate::recpart::{self, DiagVerdict, RecTrace, SatTag};
use crate::report::{all_pass, render, Check};

#[derive(Debug, thiserror::Error)]
pub enum DriverError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config error: {0}")]
    Config(#[from] crate::config::ConfigError),
    #[error("parse error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("construction error: {0}")]
    Gadget(#[from] crate::gadget::GadgetError),
    #[error("construction error: {0}")]
    Kforest(#[from] crate::kforest::KforestError),
    #[error("construction error: {0}")]
    Recpart(#[from] crate::recpart::RecError),
    #[error("trace file is empty or missing its config header")]
    EmptyTrace,
    #[error("no suite named `{suite}` applies to a {construction} trace")]
    UnknownSuite {
        suite: String,
        construction: &'static str,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DriverError + '_ {
    move |source| DriverError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug)]
pub struct RunReport {
    pub checks: Vec<Check>,
    pub artifacts: Vec<PathBuf>,
}

impl RunReport {
    pub fn all_pass(&self) -> bool {
        all_pass(&self.checks)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceHeader {
    config: RunConfig,
}

/// Tail summary line of a partitioner trace; stage records carry an `s`
/// field, this one does not.
#[derive(Debug, Serialize, Deserialize)]
struct RecSummary {
    assignment: Vec<u8>,
    initializations: Vec<(usize, usize, String)>,
    finals: Vec<recpart::ReqSnapshot>,
}

struct Artifacts {
    trace_lines: Vec<String>,
    graph: Option<StageGraph>,
    extra: Vec<(&'static str, String)>,
    checks: Vec<Check>,
}

/// Runs the configured construction and writes its artifacts under `out_dir`.
pub fn run_config(config: &RunConfig, out_dir: &Path) -> Result<RunReport, DriverError> {
    config.validate()?;
    let built = match config.construction {
        Construction::Normalize => run_normalize(config)?,
        Construction::Kforest => run_kforest(config)?,
        Construction::Recpart => run_recpart(config)?,
        Construction::Gadget => run_gadget(config)?,
        Construction::Cameron => run_cameron(config)?,
        Construction::RandomChecks => run_random_checks(config)?,
    };
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut artifacts = Vec::new();

    let trace_path = out_dir.join("trace.jsonl");
    {
        let mut f = fs::File::create(&trace_path).map_err(io_err(&trace_path))?;
        let header = serde_json::to_string(&TraceHeader {
            config: config.clone(),
        })?;
        writeln!(f, "{header}").map_err(io_err(&trace_path))?;
        for line in &built.trace_lines {
            writeln!(f, "{line}").map_err(io_err(&trace_path))?;
        }
    }
    artifacts.push(trace_path);

    if let Some(graph) = &built.graph {
        let json_path = out_dir.join("graph.json");
        fs::write(&json_path, serde_json::to_string(graph)?).map_err(io_err(&json_path))?;
        artifacts.push(json_path);
        let dot_path = out_dir.join("graph.dot");
        fs::write(&dot_path, graph.to_dot("g")).map_err(io_err(&dot_path))?;
        artifacts.push(dot_path);
    }
    for (name, content) in &built.extra {
        let path = out_dir.join(name);
        fs::write(&path, content).map_err(io_err(&path))?;
        artifacts.push(path);
    }

    let report_json = out_dir.join("report.json");
    fs::write(&report_json, serde_json::to_string_pretty(&built.checks)?)
        .map_err(io_err(&report_json))?;
    artifacts.push(report_json);
    let report_txt = out_dir.join("report.txt");
    fs::write(&report_txt, render(&built.checks)).map_err(io_err(&report_txt))?;
    artifacts.push(report_txt);

    Ok(RunReport {
        checks: built.checks,
        artifacts,
    })
}

fn to_lines<T: Serialize>(items: &[T]) -> Result<Vec<String>, DriverError> {
    items
        .iter()
        .map(|r| serde_json::to_string(r).map_err(DriverError::from))
        .collect()
}

fn run_normalize(config: &RunConfig) -> Result<Artifacts, DriverError> {
    let oracle = config.oracle()?;
    let state = normalizer::normalize_run(&oracle, config.horizon);
    let checks = normalizer::verify_run(&state);
    Ok(Artifacts {
        trace_lines: to_lines(&state.records)?,
        graph: Some(normalizer::image_graph(&state)),
        extra: vec![],
        checks,
    })
}

fn run_kforest(config: &RunConfig) -> Result<Artifacts, DriverError> {
    let registry = config.registry()?;
    let trace = kforest::diag_run(&registry, config.horizon)?;
    let checks = kforest::verify_diag_trace(&trace, &registry);
    Ok(Artifacts {
        trace_lines: to_lines(&trace.stages)?,
        extra: vec![(
            "finished.json",
            serde_json::to_string_pretty(&trace.finished)?,
        )],
        graph: Some(trace.graph),
        checks,
    })
}

fn run_recpart(config: &RunConfig) -> Result<Artifacts, DriverError> {
    let oracle = config.oracle()?;
    let registry = config.registry()?;
    let budget = config.budget.unwrap_or(256);
    let trace = recpart::rec_run(&oracle, &registry, config.horizon, budget)?;
    let mut checks = recpart::verify_rec_trace(&trace, &oracle, &registry);
    for snap in &trace.finals {
        if matches!(snap.tag, Some(SatTag::S4) | Some(SatTag::S5)) {
            let verdict = recpart::verify_diagonalization(&trace, &oracle, &registry, snap.e)?;
            let name = format!("recpart/diagonalization-r{}", snap.e);
            match verdict {
                DiagVerdict::Confirmed => {
                    checks.push(Check::new(&name, true, "confirmed against the oracle"))
                }
                DiagVerdict::ConsistentAtHorizon { open } => checks.push(Check::new(
                    &name,
                    true,
                    &format!("consistent at horizon: {open}"),
                )),
                DiagVerdict::Violated { reason } => checks.push(Check::fail(&name, reason)),
            }
        }
    }
    let mut lines = to_lines(&trace.stages)?;
    lines.push(serde_json::to_string(&RecSummary {
        assignment: trace.assignment.clone(),
        initializations: trace.initializations.clone(),
        finals: trace.finals.clone(),
    })?);
    Ok(Artifacts {
        trace_lines: lines,
        graph: Some(stage_prefix(&oracle, config.horizon)),
        extra: vec![],
        checks,
    })
}

fn run_gadget(config: &RunConfig) -> Result<Artifacts, DriverError> {
    let phi = config.phi()?;
    let gcfg = GadgetConfig {
        horizon: config.horizon,
        n_cap: config.n_cap.unwrap_or(4),
        witness_batch: config.witness_batch.unwrap_or(64),
    };
    let run = gadget::gadget_run(&phi, gcfg)?;
    let checks = gadget::verify_gadget_trace(&run, &phi);
    let mut graph = StageGraph::new(run.m_final + 1);
    for (&u, ns) in &run.adjacency {
        for &v in ns.iter().filter(|&&v| v > u) {
            graph.add_edge(u, v).expect("adjacency stays in range");
        }
    }
    Ok(Artifacts {
        trace_lines: to_lines(&run.stages)?,
        graph: Some(graph),
        extra: vec![],
        checks,
    })
}

fn run_cameron(config: &RunConfig) -> Result<Artifacts, DriverError> {
    let oracle = config.oracle()?;
    let n_max = config.n_max.unwrap_or(3);
    let vertex_bound = config.vertex_bound.unwrap_or(16);
    let outcome = least_failing_pair(&oracle, n_max, vertex_bound);
    let mut checks = Vec::new();
    let mut trace_lines = Vec::new();
    match &outcome {
        LeastFailureOutcome::Found(report) => {
            checks.push(Check::new(
                "cameron/least-failure",
                true,
                &format!("confirmed failing pair of size {}", report.n),
            ));
            let pair = report.pair();
            let split = CutSplit::canonical(&pair).expect("confirmed pairs are nonempty");
            for side in 0..2u8 {
                let verdict =
                    verify_inherited_failure(&oracle, &pair, &split, side, vertex_bound * 16, true);
                let name = format!("cameron/inherited-failure-x{side}");
                match verdict {
                    InheritedFailure::Confirmed => {
                        checks.push(Check::new(&name, true, "certified"))
                    }
                    InheritedFailure::ConsistentAtBound => {
                        checks.push(Check::new(&name, true, "consistent at bound"))
                    }
                    InheritedFailure::Violated { witness } => checks.push(Check::fail(
                        &name,
                        format!("witness {witness} inside the side"),
                    )),
                }
            }
            #[derive(Serialize)]
            struct SideLine {
                v: usize,
                side: u8,
            }
            for v in 0..=config.horizon {
                trace_lines.push(serde_json::to_string(&SideLine {
                    v,
                    side: case3_membership(&oracle, &pair, &split, v),
                })?);
            }
        }
        LeastFailureOutcome::NotFound {
            unconfirmed_total, ..
        } => {
            checks.push(Check::new(
                "cameron/least-failure",
                true,
                &format!(
                    "no confirmed failure up to size {n_max} ({unconfirmed_total} unconfirmed)"
                ),
            ));
        }
    }
    Ok(Artifacts {
        trace_lines,
        graph: Some(stage_prefix(&oracle, config.horizon)),
        extra: vec![(
            "least_failure.json",
            serde_json::to_string_pretty(&outcome)?,
        )],
        checks,
    })
}

fn run_random_checks(config: &RunConfig) -> Result<Artifacts, DriverError> {
    let partition = config.partition()?;
    let depth = config.depth.unwrap_or(2);
    let bound = config.bound.unwrap_or(1 << 12);
    let mut checks = Vec::new();

    let mut formula_ok = true;
    for assignment in 0u32..3u32.pow(8) {
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut k = assignment;
        for v in 0..8usize {
            match k % 3 {
                1 => a.push(v),
                2 => b.push(v),
                _ => {}
            }
            k /= 3;
        }
        let pair = ExtensionPair::new(a, b).expect("three-way split is disjoint");
        let w = witness_formula(&pair);
        if !pair.witnessed_by(w, canonical_edge) {
            formula_ok = false;
        }
    }
    checks.push(Check::new(
        "random/witness-formula",
        formula_ok,
        "closed-form witnesses validate on every pair over {0..7}",
    ));

    let verdicts = random_side_search(&partition, depth, bound);
    let witnessed = verdicts.iter().any(|v| matches!(v, SideVerdict::Witnessed));
    checks.push(Check::new(
        "random/side-witnessed",
        witnessed,
        "at least one side of the partition is fully witnessed at this depth",
    ));

    let trace_lines = verdicts
        .iter()
        .map(|v| serde_json::to_string(v).map_err(DriverError::from))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Artifacts {
        trace_lines,
        graph: Some(stage_prefix(
            &crate::oracle::GraphOracle::canonical_random(),
            63,
        )),
        extra: vec![],
        checks,
    })
}

/// Re-runs a named invariant suite against a stored trace. The suite name
/// selects checks by substring match on their names; `all` selects
/// everything the construction offers.
pub fn verify_trace(trace_path: &Path, suite: &str) -> Result<Vec<Check>, DriverError> {
    let content = fs::read_to_string(trace_path).map_err(io_err(trace_path))?;
    let mut lines = content.lines();
    let header: TraceHeader = serde_json::from_str(lines.next().ok_or(DriverError::EmptyTrace)?)?;
    let config = header.config;
    let body: Vec<&str> = lines.collect();

    let checks = match config.construction {
        Construction::Normalize => {
            let records = body
                .iter()
                .map(|l| serde_json::from_str(l))
                .collect::<Result<Vec<_>, _>>()?;
            let oracle = config.oracle()?;
            let state = normalizer::state_from_records(&oracle, records);
            normalizer::verify_run(&state)
        }
        Construction::Kforest => {
            let records = body
                .iter()
                .map(|l| serde_json::from_str(l))
                .collect::<Result<Vec<_>, _>>()?;
            let registry = config.registry()?;
            let trace = kforest::trace_from_records(records, registry.len());
            kforest::verify_diag_trace(&trace, &registry)
        }
        Construction::Recpart => {
            let (summary_line, stage_lines) = body.split_last().ok_or(DriverError::EmptyTrace)?;
            let stages = stage_lines
                .iter()
                .map(|l| serde_json::from_str(l))
                .collect::<Result<Vec<_>, _>>()?;
            let summary: RecSummary = serde_json::from_str(summary_line)?;
            let trace = RecTrace {
                horizon: config.horizon,
                assignment: summary.assignment,
                stages,
                initializations: summary.initializations,
                finals: summary.finals,
            };
            let oracle = config.oracle()?;
            let registry = config.registry()?;
            recpart::verify_rec_trace(&trace, &oracle, &registry)
        }
        Construction::Gadget => {
            let records = body
                .iter()
                .map(|l| serde_json::from_str(l))
                .collect::<Result<Vec<_>, _>>()?;
            let phi = config.phi()?;
            let gcfg = GadgetConfig {
                horizon: config.horizon,
                n_cap: config.n_cap.unwrap_or(4),
                witness_batch: config.witness_batch.unwrap_or(64),
            };
            let run = gadget::run_from_records(gcfg, records);
            gadget::verify_gadget_trace(&run, &phi)
        }
        other => {
            return Err(DriverError::UnknownSuite {
                suite: suite.to_string(),
                construction: other.name(),
            })
        }
    };

    if suite == "all" {
        return Ok(checks);
    }
    let filtered: Vec<Check> = checks
        .into_iter()
        .filter(|c| c.name.contains(suite))
        .collect();
    if filtered.is_empty() {
        return Err(DriverError::UnknownSuite {
            suite: suite.to_string(),
            construction: config.construction.name(),
        });
    }
    Ok(filtered)
}

/// Renders a stored graph dump as DOT.
pub fn dump_dot(graph_path: &Path) -> Result<String, DriverError> {
    let content = fs::read_to_string(graph_path).map_err(io_err(graph_path))?;
    let graph: StageGraph = serde_json::from_str(&content)?;
    Ok(graph.to_dot("g"))
}
