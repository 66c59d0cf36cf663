//! TOML run configuration.
//!
//! One file drives every subcommand; each reads the sections it needs.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cell::{CellSolver, CellTolerances, Linearization};
use crate::error::{Error, Result};
use crate::flux::{FluxModel, ModelSpec};
use crate::harness::{StudySetup, SweepSpec, TwoScaleTestFunction};
use crate::pde::MacroSpec;
use crate::projection::{MatrixSpec, ProjectionMatrix};
use crate::torus::FieldSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSection {
    #[serde(default = "default_bandlimit")]
    pub bandlimit: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_tol: Option<f64>,
    #[serde(default = "default_cell_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub linearization: Linearization,
}

fn default_cell_iters() -> usize {
    CellTolerances::default().max_iters
}

impl CellSection {
    pub fn tolerances(&self) -> CellTolerances {
        CellTolerances { residual_tol: self.residual_tol, max_iters: self.max_iters, linearization: self.linearization }
    }
}

fn default_bandlimit() -> i64 {
    16
}

impl Default for CellSection {
    fn default() -> Self {
        let t = CellTolerances::default();
        Self { bandlimit: default_bandlimit(), residual_tol: t.residual_tol, max_iters: t.max_iters, linearization: t.linearization }
    }
}

/// A single cell problem for the `cell` subcommand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSection {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    /// Include the spectrum of the corrected gradient in the report.
    #[serde(default)]
    pub spectrum: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FineSection {
    pub eta: f64,
    #[serde(default = "default_fine_refinement")]
    pub refinement: usize,
}

fn default_fine_refinement() -> usize {
    40
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErgodicSection {
    pub field: FieldSpec,
    pub times: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSection {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_samples() -> usize {
    2000
}

fn default_seed() -> u64 {
    20240917
}

impl Default for AuditSection {
    fn default() -> Self {
        Self { samples: default_samples(), seed: default_seed() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSection {
    /// Radius of the `|k|∞` ball scanned for small divisors.
    #[serde(default = "default_radius")]
    pub radius: i64,
}

fn default_radius() -> i64 {
    16
}

impl Default for CheckSection {
    fn default() -> Self {
        Self { radius: default_radius() }
    }
}

/// The whole file. Defaults are filled in on load, so serializing a loaded
/// config gives the resolved settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub matrix: MatrixSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub cell: CellSection,
    #[serde(default, rename = "macro", skip_serializing_if = "Option::is_none")]
    pub macro_problem: Option<MacroSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fine: Option<FineSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub test_functions: Vec<TwoScaleTestFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<PointSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ergodic: Option<ErgodicSection>,
    #[serde(default)]
    pub audit: AuditSection,
    #[serde(default)]
    pub check: CheckSection,
}

fn missing(section: &str) -> Error {
    Error::Config(format!("missing [{section}] section"))
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn projection(&self) -> Result<ProjectionMatrix> {
        self.matrix.build()
    }

    pub fn model(&self, r: &ProjectionMatrix) -> Result<Arc<FluxModel>> {
        let spec = self.model.as_ref().ok_or_else(|| missing("model"))?;
        Ok(Arc::new(FluxModel::new(spec, r.m(), r.n())?))
    }

    pub fn cell_solver(&self, r: &ProjectionMatrix, model: Arc<FluxModel>) -> Result<CellSolver> {
        CellSolver::new(r, model, self.cell.bandlimit, self.cell.tolerances())
    }

    pub fn macro_spec(&self) -> Result<&MacroSpec> {
        self.macro_problem.as_ref().ok_or_else(|| missing("macro"))
    }

    pub fn study(&self) -> Result<StudySetup> {
        let projection = self.projection()?;
        let model = self.model(&projection)?;
        let problem = self.macro_spec()?.build()?;
        if problem.mesh.n() != projection.n() {
            return Err(Error::Dimension(format!(
                "macro domain is {}-dimensional, the projection has n = {}",
                problem.mesh.n(),
                projection.n()
            )));
        }
        Ok(StudySetup {
            projection,
            model,
            bandlimit: self.cell.bandlimit,
            cell_tolerances: self.cell.tolerances(),
            problem,
            sweep: self.sweep.clone().unwrap_or_default(),
            test_functions: self.test_functions.clone(),
        })
    }
}
