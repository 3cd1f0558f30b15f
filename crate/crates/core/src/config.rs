//! Run configuration: a single strict JSON document.

use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::operators::ConstraintMode;
use crate::surface::SurfaceKind;
use crate::trace_lab::GraphCase;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid field `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field, message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Sweep,
    Trace,
    MeshInfo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StretchConfig {
    pub band_width: f64,
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    pub kind: SurfaceKind,
    pub resolution: usize,
    pub dimensions: Vec<f64>,
    #[serde(default)]
    pub stretch: Option<StretchConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorConfig {
    Laplacian,
    ShiftedLaplacian { c0: f64 },
    /// Stability operator of the round cylinder; the surface circumference
    /// must equal `2π radius`.
    CmcCylinder { radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BasePoint {
    Vertex(usize),
    /// Parameter coordinates; the nearest vertex is used.
    At([f64; 2]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_base_samples")]
    pub base_samples: usize,
    #[serde(default = "default_refine_depth")]
    pub refine_depth: usize,
}

fn default_base_samples() -> usize {
    64
}

fn default_refine_depth() -> usize {
    8
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { base_samples: default_base_samples(), refine_depth: default_refine_depth() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Absent: `1e-6 * max(1, |λ_k(final)|)`.
    #[serde(default)]
    pub null_tol: Option<f64>,
    #[serde(default = "default_eig_tol")]
    pub eig_tol: f64,
    #[serde(default = "default_mono_tol")]
    pub mono_tol: f64,
    #[serde(default = "default_cluster_tol")]
    pub cluster_tol: f64,
    #[serde(default = "default_max_blocks")]
    pub max_blocks: usize,
}

fn default_eig_tol() -> f64 {
    1e-10
}

fn default_mono_tol() -> f64 {
    1e-8
}

fn default_cluster_tol() -> f64 {
    1e-6
}

fn default_max_blocks() -> usize {
    500
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            null_tol: None,
            eig_tol: default_eig_tol(),
            mono_tol: default_mono_tol(),
            cluster_tol: default_cluster_tol(),
            max_blocks: default_max_blocks(),
        }
    }
}

/// One level of a joint (mesh, t-grid) refinement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuityLevelConfig {
    pub resolution: usize,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuityConfig {
    pub levels: Vec<ContinuityLevelConfig>,
    /// Sub-interval of the sweep range checked separately.
    #[serde(default)]
    pub window: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceConfig {
    #[serde(default = "default_case")]
    pub case: GraphCase,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_l0")]
    pub l0: f64,
    #[serde(default = "default_r_resolution")]
    pub r_resolution: usize,
    #[serde(default = "default_delta0")]
    pub delta0: f64,
    #[serde(default = "default_halvings")]
    pub halvings: usize,
}

fn default_case() -> GraphCase {
    GraphCase::Corner
}

fn default_grid_points() -> usize {
    400
}

fn default_l0() -> f64 {
    1.0
}

fn default_r_resolution() -> usize {
    81
}

fn default_delta0() -> f64 {
    0.1
}

fn default_halvings() -> usize {
    4
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            case: default_case(),
            grid_points: default_grid_points(),
            l0: default_l0(),
            r_resolution: default_r_resolution(),
            delta0: default_delta0(),
            halvings: default_halvings(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub surface: Option<SurfaceConfig>,
    #[serde(default)]
    pub operator: Option<OperatorConfig>,
    #[serde(default)]
    pub constraint: ConstraintMode,
    #[serde(default)]
    pub p0: Option<BasePoint>,
    #[serde(default = "default_perturbation")]
    pub perturbation_scale: f64,
    #[serde(default)]
    pub t_start: Option<f64>,
    /// Absent: just above `max h`, so the sweep ends on the whole surface.
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub continuity: Option<ContinuityConfig>,
    #[serde(default)]
    pub trace: Option<TraceConfig>,
    #[serde(default)]
    pub seed: u64,
    /// Not serialized, so reports do not depend on where they are written.
    #[serde(default = "default_output_dir", skip_serializing)]
    pub output_dir: PathBuf,
}

fn default_perturbation() -> f64 {
    1e-3
}

fn default_k() -> usize {
    6
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn positive(field: &'static str, x: f64) -> Result<(), ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive and finite, got {x}")))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Checks that do not need the surface; `t` bounds against `max h`
    /// are checked once `h` is known.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let tol = &self.tolerances;
        if let Some(n) = tol.null_tol {
            positive("tolerances.null_tol", n)?;
        }
        positive("tolerances.eig_tol", tol.eig_tol)?;
        positive("tolerances.mono_tol", tol.mono_tol)?;
        positive("tolerances.cluster_tol", tol.cluster_tol)?;
        if tol.max_blocks == 0 {
            return Err(invalid("tolerances.max_blocks", "must be at least 1"));
        }
        if !(self.perturbation_scale >= 0.0 && self.perturbation_scale.is_finite()) {
            return Err(invalid("perturbation_scale", "must be non-negative"));
        }
        if self.k == 0 {
            return Err(invalid("k", "must be at least 1"));
        }
        if self.grid.base_samples < 2 {
            return Err(invalid("grid.base_samples", "must be at least 2"));
        }
        if let (Some(a), Some(b)) = (self.t_start, self.t_end) {
            if !(a < b) {
                return Err(invalid("t_end", "must exceed t_start"));
            }
        }
        for (field, t) in [("t_start", self.t_start), ("t_end", self.t_end)] {
            if let Some(t) = t {
                if !(t >= 0.0 && t.is_finite()) {
                    return Err(invalid(field, "must be non-negative and finite"));
                }
            }
        }
        match self.scenario {
            Scenario::Sweep | Scenario::MeshInfo => {
                if self.surface.is_none() {
                    return Err(invalid("surface", "required for this scenario"));
                }
            }
            Scenario::Trace => {}
        }
        if self.scenario == Scenario::Sweep {
            if self.operator.is_none() {
                return Err(invalid("operator", "required for a sweep"));
            }
            if self.t_start.is_none() {
                return Err(invalid("t_start", "required for a sweep"));
            }
        }
        if let Some(OperatorConfig::CmcCylinder { radius }) = &self.operator {
            positive("operator.radius", *radius)?;
        }
        if let Some(c) = &self.continuity {
            if c.levels.len() < 2 {
                return Err(invalid("continuity.levels", "needs at least two levels"));
            }
            if let Some([a, b]) = c.window {
                if !(a < b) {
                    return Err(invalid("continuity.window", "must be an increasing pair"));
                }
            }
        }
        if let Some(t) = &self.trace {
            positive("trace.l0", t.l0)?;
            positive("trace.delta0", t.delta0)?;
        }
        Ok(())
    }

    pub fn demo(name: DemoName) -> RunConfig {
        let base = RunConfig {
            scenario: Scenario::Sweep,
            surface: None,
            operator: None,
            constraint: ConstraintMode::Dirichlet,
            p0: None,
            perturbation_scale: default_perturbation(),
            t_start: None,
            t_end: None,
            grid: GridConfig::default(),
            k: default_k(),
            tolerances: Tolerances::default(),
            continuity: None,
            trace: None,
            seed: 0,
            output_dir: default_output_dir(),
        };
        match name {
            DemoName::SquareIndex => RunConfig {
                surface: Some(SurfaceConfig {
                    kind: SurfaceKind::Rectangle,
                    resolution: 32,
                    dimensions: vec![1.0, 1.0],
                    stretch: None,
                }),
                operator: Some(OperatorConfig::ShiftedLaplacian { c0: 50.0 }),
                p0: Some(BasePoint::At([0.5, 0.5])),
                t_start: Some(0.01),
                k: 6,
                ..base
            },
            DemoName::CylinderRing => RunConfig {
                surface: Some(SurfaceConfig {
                    kind: SurfaceKind::Cylinder,
                    resolution: 64,
                    dimensions: vec![1.0, 1.5],
                    stretch: None,
                }),
                operator: Some(OperatorConfig::ShiftedLaplacian { c0: 20.0 }),
                p0: Some(BasePoint::At([0.5, 0.75])),
                t_start: Some(0.16),
                t_end: Some(0.36),
                k: 4,
                continuity: Some(ContinuityConfig {
                    levels: vec![
                        ContinuityLevelConfig { resolution: 32, samples: 64 },
                        ContinuityLevelConfig { resolution: 45, samples: 128 },
                        ContinuityLevelConfig { resolution: 64, samples: 256 },
                    ],
                    window: Some([0.22, 0.28]),
                }),
                ..base
            },
            DemoName::CmcCylinder => RunConfig {
                surface: Some(SurfaceConfig {
                    kind: SurfaceKind::Cylinder,
                    resolution: 48,
                    dimensions: vec![1.0, 1.3],
                    stretch: None,
                }),
                operator: Some(OperatorConfig::CmcCylinder { radius: 1.0 / (2.0 * PI) }),
                p0: Some(BasePoint::At([0.5, 0.65])),
                t_start: Some(0.01),
                k: 5,
                ..base
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum DemoName {
    CylinderRing,
    SquareIndex,
    CmcCylinder,
}
