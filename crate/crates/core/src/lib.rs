//! Deterministic workbench for stage-based constructions on computable graph
//! presentations.
//!
//! The crate provides lazy infinite graph oracles with structural
//! certificates, the canonical random presentation and its extension-witness
//! machinery, a step-indexed adversary model, and four stage constructions
//! run to a finite horizon with their invariants enforced as executable
//! checks: the classification partitions, the isolated-vertex presentation
//! normalizer, the disjoint-cliques diagonalizer, the finite-injury
//! partitioner, and the least-failure induction gadget.
//!
//! Everything is seedless: identical inputs replay to byte-identical traces.
//!
//! ```
//! use stagegraph_core::normalizer::{normalize_run, stable_edge, verify_run};
//! use stagegraph_core::GraphOracle;
//!
//! // Rebuild a graph so its isolated vertices are exactly the evens.
//! let oracle = GraphOracle::edge_list([(1, 2)]);
//! let run = normalize_run(&oracle, 2);
//! assert_eq!(run.f_history[2][&1], 1);
//! assert_eq!(stable_edge(&run, 1, 3), Ok(true));
//! assert!(verify_run(&run).iter().all(|check| check.pass));
//! ```

pub mod classify;
pub mod config;
pub mod driver;
pub mod dsl;
pub mod gadget;
pub mod graph;
pub mod kforest;
pub mod machine;
pub mod normalizer;
pub mod oracle;
pub mod random;
pub mod recpart;
pub mod report;

pub use graph::{ExtensionPair, Partition, StageGraph, Vertex};
pub use oracle::GraphOracle;
pub use report::Check;
