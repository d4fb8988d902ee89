//! Experiment configuration files.
//!
//! A config is a JSON object. Only `schemes` is required:
//!
//! ```json
//! {
//!   "schemes": [
//!     { "scheme": "beta_matvec", "n": 12, "gamma": "1/4", "beta": 3 },
//!     { "scheme": "scs_matmat", "n": 5, "k_a": 2, "k_b": 2 }
//!   ],
//!   "matrices": { "rows": 1000, "cols_a": 600, "cols_b": 400,
//!                 "density_a": 0.03, "density_b": 0.03, "mode": "measured" },
//!   "speed": { "base_time": 1e-9, "slowdown": { "kind": "uniform", "lo": 1.0, "hi": 1.5 } },
//!   "trials": 20,
//!   "seed": 7,
//!   "budget": 10000000,
//!   "random_states": 20,
//!   "kappa": false,
//!   "output": "results.csv"
//! }
//! ```
//!
//! Scheme objects are tagged by `scheme`: `beta_matvec`, `beta_matmat`,
//! `coded_bottom_matvec`, `coded_bottom_matmat`, `scs_matvec`, `scs_matmat`,
//! `polynomial`, `dense_random`. Fractions are strings such as `"2/5"`.
//! β-level schemes take an optional `classes` (`{"type": "trivial"}`,
//! `"shifted_pair"`, `"transversal"`, `{"type": "kirkman", "indices": [0, 1]}`
//! or an explicit `custom` design).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::blockmat::{generate_sparse, SparseMatrix};
use crate::decoder::Operand;
use crate::error::{param, Result};
use crate::metrics::DEFAULT_BUDGET;
use crate::schemes::{EncodingPlan, PlanKind, SchemeSpec};
use crate::simulator::{CostSource, SpeedModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CostMode {
    /// Generate the matrices and count nonzeros of the encoded blocks.
    #[default]
    Measured,
    /// Use expected nonzero counts from the densities.
    Expected,
}

/// Input matrices: `A` is `rows × cols_a`, `B` is `rows × cols_b`.
/// Column counts are rounded down to a multiple of the plan's block count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatrixConfig {
    pub rows: usize,
    pub cols_a: usize,
    pub cols_b: usize,
    pub density_a: f64,
    pub density_b: f64,
    pub mode: CostMode,
}

impl Default for MatrixConfig {
    fn default() -> Self {
        MatrixConfig { rows: 600, cols_a: 360, cols_b: 240, density_a: 0.03, density_b: 0.03, mode: CostMode::Measured }
    }
}

/// Concrete inputs for one plan.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub a: SparseMatrix,
    pub rhs: Operand,
}

impl MatrixConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols_a == 0 || self.cols_b == 0 {
            return Err(param("matrix dimensions must be positive"));
        }
        for d in [self.density_a, self.density_b] {
            if !(d > 0.0 && d <= 1.0) {
                return Err(param(format!("density {d} is outside (0, 1]")));
            }
        }
        Ok(())
    }

    fn fitted(cols: usize, blocks: usize) -> Result<usize> {
        let c = cols / blocks * blocks;
        if c == 0 {
            return Err(param(format!("{cols} columns cannot be split into {blocks} blocks")));
        }
        Ok(c)
    }

    /// Random sparse inputs shaped for `plan`. `A` uses `seed`, the right
    /// operand `seed + 1`.
    pub fn generate(&self, plan: &EncodingPlan, seed: u64) -> Result<Inputs> {
        self.validate()?;
        let a = generate_sparse(self.rows, Self::fitted(self.cols_a, plan.delta_a)?, self.density_a, seed)?;
        let rhs = match plan.kind {
            PlanKind::Matvec => {
                let x = generate_sparse(self.rows, 1, 1.0, seed.wrapping_add(1))?;
                Operand::Vector(x.to_dense().column(0).iter().copied().collect())
            }
            PlanKind::Matmat => Operand::Matrix(generate_sparse(
                self.rows,
                Self::fitted(self.cols_b, plan.delta_b)?,
                self.density_b,
                seed.wrapping_add(1),
            )?),
        };
        Ok(Inputs { a, rhs })
    }

    /// Expected-count cost source for `plan`.
    pub fn expected(&self, plan: &EncodingPlan) -> Result<CostSource<'static>> {
        self.validate()?;
        Ok(CostSource::Expected {
            rows: self.rows,
            width_a: Self::fitted(self.cols_a, plan.delta_a)? / plan.delta_a,
            density_a: self.density_a,
            width_b: Self::fitted(self.cols_b, plan.delta_b)? / plan.delta_b,
            density_b: self.density_b,
        })
    }
}

fn default_trials() -> usize {
    10
}

fn default_budget() -> u64 {
    DEFAULT_BUDGET as u64
}

fn default_random_states() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schemes: Vec<SchemeSpec>,
    #[serde(default)]
    pub matrices: MatrixConfig,
    #[serde(default)]
    pub speed: SpeedModel,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Drives plan coefficients, matrices and slowdowns.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_budget")]
    pub budget: u64,
    /// Random partial-completion states per scheme in end-to-end runs.
    #[serde(default = "default_random_states")]
    pub random_states: usize,
    #[serde(default)]
    pub kappa: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(schemes: Vec<SchemeSpec>) -> Self {
        ExperimentConfig {
            schemes,
            matrices: MatrixConfig::default(),
            speed: SpeedModel::default(),
            trials: default_trials(),
            seed: 0,
            budget: default_budget(),
            random_states: default_random_states(),
            kappa: false,
            output: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Checks inputs and builds every plan, so regime errors surface before
    /// any expensive work.
    pub fn validate(&self) -> Result<Vec<EncodingPlan>> {
        self.matrices.validate()?;
        self.speed.validate()?;
        self.plans()
    }

    pub fn plans(&self) -> Result<Vec<EncodingPlan>> {
        self.schemes.iter().map(|s| s.build(self.seed)).collect()
    }
}
