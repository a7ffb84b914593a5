//! File formats: the matrix JSON read by `schur` and the run report JSON
//! written by `verify`, `counterexample` and `brownian`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::block::BlockPartition;
use crate::brownian::GridSpec;
use crate::dense::SymMatrix;
use crate::error::{Error, Result};
use crate::inequalities::{GapReport, Verdict};

/// `{"n": int, "data": [reals, row-major], "partition": [ints]?}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    pub n: usize,
    pub data: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub partition: Option<Vec<usize>>,
}

impl MatrixFile {
    pub fn from_matrix(m: &SymMatrix, partition: Option<&BlockPartition>) -> Self {
        Self { n: m.n(), data: m.as_slice().to_vec(), partition: partition.map(|p| p.sizes().to_vec()) }
    }

    pub fn parse(json: &str) -> Result<Self> {
        let f: MatrixFile =
            serde_json::from_str(json).map_err(|e| Error::InvalidMatrix(format!("malformed matrix JSON: {e}")))?;
        f.validate()?;
        Ok(f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidMatrix(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.len() != self.n * self.n {
            return Err(Error::DimensionMismatch { expected: self.n * self.n, got: self.data.len() });
        }
        if let Some(p) = &self.partition {
            let p = BlockPartition::new(p.clone())?;
            if p.total() != self.n {
                return Err(Error::DimensionMismatch { expected: self.n, got: p.total() });
            }
        }
        Ok(())
    }

    /// The stored matrix, symmetrized.
    pub fn matrix(&self) -> Result<SymMatrix> {
        SymMatrix::new(self.n, self.data.clone())
    }

    pub fn block_partition(&self) -> Result<Option<BlockPartition>> {
        self.partition.clone().map(BlockPartition::new).transpose()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub holds: u64,
    pub violated: u64,
    pub skipped: u64,
}

impl Counts {
    pub fn record(&mut self, v: Verdict) {
        match v {
            Verdict::Holds => self.holds += 1,
            Verdict::Violated => self.violated += 1,
            Verdict::Skipped => self.skipped += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.holds + self.violated + self.skipped
    }

    pub fn merge(&mut self, other: &Counts) {
        self.holds += other.holds;
        self.violated += other.violated;
        self.skipped += other.skipped;
    }
}

/// The matrices of one trial, enough to replay it without the generator.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InstanceDump {
    pub matrices: Vec<NamedMatrix>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub partition: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedMatrix {
    pub name: String,
    #[serde(flatten)]
    pub matrix: MatrixFile,
}

impl InstanceDump {
    pub fn new(partition: Option<&BlockPartition>) -> Self {
        Self { matrices: Vec::new(), partition: partition.map(|p| p.sizes().to_vec()) }
    }

    pub fn with(mut self, name: &str, m: &SymMatrix) -> Self {
        self.matrices.push(NamedMatrix { name: name.to_string(), matrix: MatrixFile::from_matrix(m, None) });
        self
    }
}

/// A failing (or skipped) check together with its instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub suite: String,
    pub trial: u64,
    #[serde(flatten)]
    pub report: GapReport,
    pub instance: InstanceDump,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub suite: String,
    pub trials: u64,
    pub counts: Counts,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrownianSummary {
    pub grid: GridSpec,
    /// Path averages of the conditional log-expectations (illustrative only).
    pub mean_f_full: f64,
    pub mean_f_1: f64,
    pub mean_f_2: f64,
    pub min_gap: f64,
}

/// Report JSON. `counts` aggregates every suite in `suites`, so for a
/// single suite it sums to `trials`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub suite: String,
    pub seed: u64,
    pub trials: u64,
    pub tol: f64,
    pub max_dim: usize,
    pub max_blocks: usize,
    pub counts: Counts,
    pub suites: Vec<SuiteSummary>,
    pub violations: Vec<Violation>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub brownian: Option<BrownianSummary>,
    pub wall_clock_secs: f64,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }

    /// The JSON with the wall-clock field zeroed, for reproducibility checks.
    pub fn to_json_without_clock(&self) -> String {
        let mut r = self.clone();
        r.wall_clock_secs = 0.0;
        r.to_json()
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        fs::write(path, self.to_json())
    }
}
