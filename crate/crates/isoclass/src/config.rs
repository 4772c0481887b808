//! Experiment configuration schema. Unknown keys are rejected everywhere.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::RunError;

/// One experiment; the `experiment` key selects the variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    TransportCheck(TransportConfig),
    NormCheck(NormConfig),
    MetaplecticCheck(MetaplecticConfig),
    FioCheck(FioConfig),
    Propagate(PropagateConfig),
    OrbitAverage(OrbitConfig),
    Quasimode(QuasimodeConfig),
    HusimiDump(HusimiConfig),
}

impl ExperimentConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::TransportCheck(_) => "transport-check",
            Self::NormCheck(_) => "norm-check",
            Self::MetaplecticCheck(_) => "metaplectic-check",
            Self::FioCheck(_) => "fio-check",
            Self::Propagate(_) => "propagate",
            Self::OrbitAverage(_) => "orbit-average",
            Self::Quasimode(_) => "quasimode",
            Self::HusimiDump(_) => "husimi-dump",
        }
    }

    pub fn out_dir(&self) -> Option<&str> {
        match self {
            Self::TransportCheck(c) => c.out_dir.as_deref(),
            Self::NormCheck(c) => c.out_dir.as_deref(),
            Self::MetaplecticCheck(c) => c.out_dir.as_deref(),
            Self::FioCheck(c) => c.out_dir.as_deref(),
            Self::Propagate(c) => c.out_dir.as_deref(),
            Self::OrbitAverage(c) => c.out_dir.as_deref(),
            Self::Quasimode(c) => c.out_dir.as_deref(),
            Self::HusimiDump(c) => c.out_dir.as_deref(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, RunError> {
        serde_json::from_str(text).map_err(|e| RunError::Config(format!("schema: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            RunError::Config(m) => RunError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplittingConfig {
    pub k: usize,
    pub l: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    /// Cutoff equals 1 for |t| ≤ flat.
    pub flat: f64,
    /// Cutoff vanishes for |t| ≥ edge.
    pub edge: f64,
}

/// Fixed t-box and per-ℏ self-dual u-box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnessGridConfig {
    #[serde(default = "d_t_half_width")]
    pub t_half_width: f64,
    #[serde(default = "d_t_size")]
    pub t_size: usize,
    #[serde(default = "d_u_size")]
    pub u_size: usize,
    #[serde(default)]
    pub window: Option<WindowConfig>,
}

fn d_t_half_width() -> f64 {
    8.0
}
fn d_t_size() -> usize {
    64
}
fn d_u_size() -> usize {
    128
}

/// A cube [−L, L)ⁿ with N nodes per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub half_width: f64,
    pub size: usize,
}

/// c · Π exp(−t_i²/(2w²)) · Π h_{m_j}(u_j).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HermiteTerm {
    pub hermite: Vec<usize>,
    #[serde(default = "one")]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
    #[serde(default = "one")]
    pub t_width: f64,
}

fn one() -> f64 {
    1.0
}

/// ℏ^r Σ_j ℏ^{j/2} a_j with each a_j a sum of Hermite terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackConfig {
    /// The order r; must be a multiple of 1/2.
    #[serde(default)]
    pub order: f64,
    pub terms: Vec<Vec<HermiteTerm>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceThresholds {
    #[serde(default = "d_slope_min")]
    pub slope_min: f64,
    #[serde(default = "d_residual_max")]
    pub residual_max: f64,
}

impl Default for ConvergenceThresholds {
    fn default() -> Self {
        Self { slope_min: d_slope_min(), residual_max: d_residual_max() }
    }
}

fn d_slope_min() -> f64 {
    0.4
}
fn d_residual_max() -> f64 {
    0.05
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointConfig {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Principal symbol p0 over x_i, xi_i.
    pub symbol: String,
    /// Optional subleading symbol p1.
    #[serde(default)]
    pub symbol_sub: Option<String>,
    pub order: u8,
    pub splitting: SplittingConfig,
    #[serde(default = "d_harness")]
    pub grid: HarnessGridConfig,
    pub stack: StackConfig,
    pub schedule: Vec<f64>,
    pub t_star: Vec<f64>,
    #[serde(default)]
    pub thresholds: ConvergenceThresholds,
    #[serde(default)]
    pub out_dir: Option<String>,
}

fn d_harness() -> HarnessGridConfig {
    HarnessGridConfig { t_half_width: d_t_half_width(), t_size: d_t_size(), u_size: d_u_size(), window: None }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormThresholds {
    #[serde(default = "d_half")]
    pub slope_target: f64,
    #[serde(default = "d_slope_tol")]
    pub slope_tol: f64,
    #[serde(default = "d_norm_max")]
    pub final_max: f64,
}

impl Default for NormThresholds {
    fn default() -> Self {
        Self { slope_target: d_half(), slope_tol: d_slope_tol(), final_max: d_norm_max() }
    }
}

fn d_half() -> f64 {
    0.5
}
fn d_slope_tol() -> f64 {
    0.1
}
fn d_norm_max() -> f64 {
    0.01
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub splitting: SplittingConfig,
    #[serde(default = "d_harness")]
    pub grid: HarnessGridConfig,
    pub stack: StackConfig,
    pub schedule: Vec<f64>,
    #[serde(default)]
    pub thresholds: NormThresholds,
    #[serde(default)]
    pub out_dir: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaplecticConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub seed: u64,
    pub samples: usize,
    /// Extra 2l×2l symplectic matrices to factor, each a list of rows.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub matrices: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub out_dir: Option<String>,
}

/// The elementary operator under test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FioOperator {
    /// Multiplication by e^{iφ/ℏ}.
    QuadraticPhase { phase: String },
    /// Semiclassical Fourier transform in u.
    PartialFourier,
    /// Pullback by a diffeomorphism given componentwise.
    Pullback {
        forward: Vec<String>,
        #[serde(default)]
        inverse: Option<Vec<String>>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WavefrontConfig {
    pub radius: f64,
    pub hbars: Vec<f64>,
    #[serde(default = "d_min_drop")]
    pub min_drop: f64,
}

fn d_min_drop() -> f64 {
    4.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub operator: FioOperator,
    pub splitting: SplittingConfig,
    #[serde(default = "d_harness")]
    pub grid: HarnessGridConfig,
    pub stack: StackConfig,
    pub schedule: Vec<f64>,
    pub t_star: Vec<f64>,
    #[serde(default)]
    pub thresholds: ConvergenceThresholds,
    #[serde(default = "d_unitarity_max")]
    pub unitarity_max: f64,
    #[serde(default)]
    pub wavefront: Option<WavefrontConfig>,
    #[serde(default)]
    pub out_dir: Option<String>,
}

fn d_unitarity_max() -> f64 {
    1e-10
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagateThresholds {
    /// Minimum log-log slope of the overlap defect; applies with two or more ℏ.
    #[serde(default = "d_slope_min")]
    pub slope_min: f64,
    #[serde(default)]
    pub overlap_min: f64,
    /// Husimi peak of the reference within this many √ℏ of the classical center.
    #[serde(default = "d_center")]
    pub center_sqrt_hbar: f64,
}

impl Default for PropagateThresholds {
    fn default() -> Self {
        Self { slope_min: d_slope_min(), overlap_min: 0.0, center_sqrt_hbar: d_center() }
    }
}

fn d_center() -> f64 {
    3.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagateConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// V(x); the Hamiltonian is Σ ξ_i² + V.
    pub potential: String,
    pub z0: PointConfig,
    pub time: f64,
    #[serde(default = "d_flow_dt")]
    pub flow_dt: f64,
    pub pde_dt: f64,
    pub grid: BoxConfig,
    pub hbars: Vec<f64>,
    #[serde(default = "d_trajectory")]
    pub trajectory_samples: usize,
    #[serde(default)]
    pub thresholds: PropagateThresholds,
    #[serde(default)]
    pub out_dir: Option<String>,
}

fn d_flow_dt() -> f64 {
    1e-3
}
fn d_trajectory() -> usize {
    64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub hamiltonian: String,
    pub z0: PointConfig,
    /// Amplitude along the orbit, an expression in x_1 = orbit angle 2πt/T.
    #[serde(default = "d_rho")]
    pub rho: String,
    #[serde(default = "d_samples")]
    pub samples: usize,
    #[serde(default = "d_flow_dt")]
    pub flow_dt: f64,
    pub grid: BoxConfig,
    pub hbar: f64,
    #[serde(default = "d_tube")]
    pub tube_radius: f64,
    #[serde(default = "d_tube_mass")]
    pub tube_mass_min: f64,
    #[serde(default = "d_stride")]
    pub husimi_stride: usize,
    #[serde(default)]
    pub out_dir: Option<String>,
}

fn d_rho() -> String {
    "1".to_string()
}
fn d_samples() -> usize {
    512
}
fn d_tube() -> f64 {
    0.2
}
fn d_tube_mass() -> f64 {
    0.9
}
fn d_stride() -> usize {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuasimodeConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub symbol: String,
    pub point: PointConfig,
    pub n_max: usize,
    pub hbars: Vec<f64>,
    /// Minimum residual slope per order N; omitted entries are not checked.
    #[serde(default = "d_quasi_slopes")]
    pub slope_min: Vec<f64>,
    /// Bound on the order-N ratio at the smallest ℏ.
    #[serde(default)]
    pub ratio_max: Option<f64>,
    #[serde(default)]
    pub out_dir: Option<String>,
}

fn d_quasi_slopes() -> Vec<f64> {
    vec![0.85, 1.4, 1.85, 2.35, 2.85]
}

/// State whose Husimi density is dumped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum HusimiSource {
    Coherent { z0: PointConfig },
    Propagated {
        potential: String,
        z0: PointConfig,
        time: f64,
        #[serde(default = "d_flow_dt")]
        flow_dt: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HusimiConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub state: HusimiSource,
    pub grid: BoxConfig,
    pub hbar: f64,
    #[serde(default = "d_two")]
    pub x_stride: usize,
    #[serde(default = "d_two")]
    pub xi_stride: usize,
    /// Allowed relative gap between the Husimi mass and ‖ψ‖².
    #[serde(default = "d_mass_tol")]
    pub mass_tol: f64,
    #[serde(default)]
    pub out_dir: Option<String>,
}

fn d_two() -> usize {
    2
}
fn d_mass_tol() -> f64 {
    1e-2
}
