//! Serializable run configurations: which construction to run, to what
//! horizon, against which oracle, registry, partition, or predicate.

use serde::{Deserialize, Serialize};

use crate::dsl::ExprSource;
use crate::gadget::{preprocess, PhiPredicate};
use crate::graph::Partition;
use crate::machine::{build_registry, AdversaryRegistry, AdversarySpec};
use crate::oracle::{GraphOracle, OracleSpec};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("config field `{0}` is required for this construction")]
    Missing(&'static str),
    #[error("horizon must be at least 1")]
    BadHorizon,
    #[error("bad oracle: {0}")]
    Oracle(#[from] crate::oracle::OracleError),
    #[error("bad registry: {0}")]
    Machine(#[from] crate::machine::MachineError),
    #[error("bad expression: {0}")]
    Expr(#[from] crate::dsl::DslError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Construction {
    Normalize,
    Kforest,
    Recpart,
    Gadget,
    Cameron,
    RandomChecks,
}

impl Construction {
    pub fn name(&self) -> &'static str {
        match self {
            Construction::Normalize => "normalize",
            Construction::Kforest => "kforest",
            Construction::Recpart => "recpart",
            Construction::Gadget => "gadget",
            Construction::Cameron => "cameron",
            Construction::RandomChecks => "random-checks",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PartitionSpec {
    Parity,
    Threshold { at: usize },
    Constant { side: u8 },
    Expr { expr: ExprSource },
}

impl PartitionSpec {
    pub fn build(&self) -> Result<Partition, ConfigError> {
        Ok(match self {
            PartitionSpec::Parity => Partition::parity(),
            PartitionSpec::Threshold { at } => Partition::threshold(*at),
            PartitionSpec::Constant { side } => Partition::constant(*side),
            PartitionSpec::Expr { expr } => Partition::from_expr(expr.compile(&["v"])?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiSpec {
    pub expr: ExprSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_bound: Option<u64>,
    /// Apply the shift making the statement false at 0.
    #[serde(default)]
    pub preprocess: bool,
}

impl PhiSpec {
    pub fn build(&self) -> Result<PhiPredicate, ConfigError> {
        let phi = PhiPredicate::new(self.expr.compile(&["n", "x", "y"])?, self.y_bound);
        Ok(if self.preprocess {
            preprocess(&phi)
        } else {
            phi
        })
    }
}

/// One batch run: a construction, a horizon, and the pieces it needs. All
/// runs are seedless; identical configs replay byte-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub construction: Construction,
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness_batch: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub registry: Option<Vec<AdversarySpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<PhiSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<PartitionSpec>,
    /// Largest pair size scanned by the least-failure search.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    /// Support and witness-scan bound for the least-failure search.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertex_bound: Option<usize>,
    /// Pair-size/vertex depth for the partition-side extension sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    /// Witness-scan bound for the partition-side extension sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<usize>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.horizon == 0 {
            return Err(ConfigError::BadHorizon);
        }
        Ok(())
    }

    pub fn oracle(&self) -> Result<GraphOracle, ConfigError> {
        Ok(self
            .oracle
            .as_ref()
            .ok_or(ConfigError::Missing("oracle"))?
            .build()?)
    }

    pub fn registry(&self) -> Result<AdversaryRegistry, ConfigError> {
        Ok(build_registry(
            self.registry
                .as_ref()
                .ok_or(ConfigError::Missing("registry"))?,
        )?)
    }

    pub fn phi(&self) -> Result<PhiPredicate, ConfigError> {
        self.phi
            .as_ref()
            .ok_or(ConfigError::Missing("phi"))?
            .build()
    }

    pub fn partition(&self) -> Result<Partition, ConfigError> {
        self.partition
            .as_ref()
            .ok_or(ConfigError::Missing("partition"))?
            .build()
    }
}
