//! Experiment configuration: strict JSON schema with documented defaults.
//!
//! Unknown keys are rejected everywhere. Parsing immediately resolves every
//! default and the integration scheme, so the config embedded in a report is
//! complete: feeding it back through `run` reproduces the report byte for
//! byte.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use fominlab::drift::{DriftModel, HypothesisParams};
use fominlab::kde::BandwidthRule;
use fominlab::sde::{Scheme, SimConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Built-in model name: ou, double_well, rotated.
    pub name: String,
    /// Dimension override (OU family only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Certificate override, e.g. to probe a deliberately wrong claim.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<HypothesisParams>,
}

impl ModelConfig {
    pub fn build(&self) -> Result<DriftModel> {
        let model = DriftModel::by_name(&self.name, self.dim)?;
        Ok(match &self.params {
            Some(p) => model.with_params(*p)?,
            None => model,
        })
    }
}

/// Scheme selection; `tamed_auto` resolves to the taming index n = 1/dt.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SchemeConfig {
    EulerMaruyama,
    #[default]
    TamedAuto,
    TamedEuler { n: u32 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_n_paths")]
    pub n_paths: usize,
    #[serde(default)]
    pub scheme: SchemeConfig,
}

fn default_dt() -> f64 {
    1e-3
}
fn default_seed() -> u64 {
    42
}
fn default_n_paths() -> usize {
    4_000
}

impl SimSection {
    pub fn to_sim_config(&self, t_final: f64) -> SimConfig {
        let scheme = match self.scheme {
            SchemeConfig::EulerMaruyama => Scheme::EulerMaruyama,
            SchemeConfig::TamedAuto => Scheme::tamed_for_dt(self.dt),
            SchemeConfig::TamedEuler { n } => Scheme::TamedEuler { n },
        };
        SimConfig { dt: self.dt, t_final, scheme, seed: self.seed, n_paths: self.n_paths }
    }

    /// Replace `tamed_auto` by its concrete index so the echoed config is
    /// self-contained.
    fn resolve(&mut self) {
        if self.scheme == SchemeConfig::TamedAuto {
            if let Scheme::TamedEuler { n } = Scheme::tamed_for_dt(self.dt) {
                self.scheme = SchemeConfig::TamedEuler { n };
            }
        }
    }
}

/// Sampler settings shared by the measure-based experiments.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default = "default_thin")]
    pub thin: f64,
}

fn default_burn_in() -> f64 {
    10.0
}
fn default_n_samples() -> usize {
    20_000
}
fn default_thin() -> f64 {
    1.0
}

impl Default for SamplerSection {
    fn default() -> Self {
        Self { burn_in: default_burn_in(), n_samples: default_n_samples(), thin: default_thin() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum ExperimentSection {
    HypothesisCheck {
        #[serde(default = "default_radius")]
        radius: f64,
        #[serde(default = "default_grid_points")]
        grid_points: usize,
        #[serde(default = "default_cert_tol")]
        tol: f64,
    },
    Moments {
        #[serde(default)]
        sampler: SamplerSection,
        #[serde(default = "default_m_max")]
        m_max: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x0: Option<Vec<f64>>,
    },
    Tail {
        #[serde(default = "default_tail_t")]
        t: f64,
        #[serde(default = "default_tail_r")]
        r: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x0: Option<Vec<f64>>,
    },
    SemigroupIdentities {
        #[serde(default = "default_t")]
        t: f64,
        #[serde(default = "default_n_quad")]
        n_quad: usize,
        #[serde(default = "default_phi")]
        phi: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x0: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        h: Option<Vec<f64>>,
        #[serde(default = "default_commutation_n_quad")]
        commutation_n_quad: usize,
        #[serde(default = "default_inner_paths")]
        inner_paths: usize,
        #[serde(default = "default_commutation_paths")]
        commutation_paths: usize,
    },
    BelCheck {
        #[serde(default = "default_t_values")]
        t_values: Vec<f64>,
        #[serde(default = "default_phis")]
        phis: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x0: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        h: Option<Vec<f64>>,
        #[serde(default = "default_fd_delta")]
        delta: f64,
    },
    SmallTScan {
        #[serde(default = "default_t_grid")]
        t_grid: Vec<f64>,
        #[serde(default = "default_phi")]
        phi: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x0: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        h: Option<Vec<f64>>,
        #[serde(default = "default_p")]
        p: f64,
        #[serde(default = "default_slope_floor")]
        slope_floor: f64,
    },
    InvariantSample {
        #[serde(default)]
        sampler: SamplerSection,
        #[serde(default = "default_kb_horizon")]
        kb_horizon: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x0: Option<Vec<f64>>,
        #[serde(default = "default_battery")]
        battery: Vec<String>,
        #[serde(default = "default_invariance_delta")]
        invariance_delta: f64,
        #[serde(default = "default_true")]
        export_csv: bool,
    },
    FominSuite {
        #[serde(default)]
        sampler: SamplerSection,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x0: Option<Vec<f64>>,
        #[serde(default = "default_bandwidth")]
        bandwidth: BandwidthRule,
        #[serde(default = "default_score_bandwidth")]
        score_bandwidth: BandwidthRule,
        #[serde(default = "default_battery")]
        battery: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        directions: Option<Vec<Vec<f64>>>,
        #[serde(default = "default_p")]
        p: f64,
        #[serde(default = "default_eval_cap")]
        eval_cap: usize,
        #[serde(default = "default_ibp_residual_bound")]
        ibp_residual_bound: f64,
        #[serde(default)]
        export_score_csv: bool,
    },
    CpScan {
        #[serde(default)]
        sampler: SamplerSection,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x0: Option<Vec<f64>>,
        #[serde(default = "default_battery")]
        battery: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        directions: Option<Vec<Vec<f64>>>,
        #[serde(default = "default_p")]
        p: f64,
        #[serde(default = "default_stability_bound")]
        stability_bound: f64,
    },
}

fn default_radius() -> f64 {
    10.0
}
fn default_grid_points() -> usize {
    10_000
}
fn default_cert_tol() -> f64 {
    1e-9
}
fn default_m_max() -> u32 {
    3
}
fn default_tail_t() -> f64 {
    5.0
}
fn default_tail_r() -> f64 {
    1.0
}
fn default_t() -> f64 {
    0.5
}
fn default_n_quad() -> usize {
    16
}
fn default_commutation_n_quad() -> usize {
    8
}
fn default_inner_paths() -> usize {
    32
}
fn default_commutation_paths() -> usize {
    400
}
fn default_phi() -> String {
    "sin_k1_e1".into()
}
fn default_t_values() -> Vec<f64> {
    vec![0.25, 0.5, 1.0]
}
fn default_phis() -> Vec<String> {
    vec!["sin_k1_e1".into(), "tanh_e1".into()]
}
fn default_fd_delta() -> f64 {
    1e-3
}
fn default_t_grid() -> Vec<f64> {
    vec![1.0, 0.5, 0.2, 0.1, 0.05]
}
fn default_p() -> f64 {
    2.0
}
fn default_slope_floor() -> f64 {
    -0.65
}
fn default_kb_horizon() -> f64 {
    50.0
}
fn default_battery() -> Vec<String> {
    Vec::new() // empty = full canonical battery
}
fn default_invariance_delta() -> f64 {
    0.1
}
fn default_true() -> bool {
    true
}
fn default_bandwidth() -> BandwidthRule {
    BandwidthRule::Silverman
}
fn default_score_bandwidth() -> BandwidthRule {
    BandwidthRule::SilvermanScaled(2.0)
}
fn default_eval_cap() -> usize {
    4_000
}
fn default_ibp_residual_bound() -> f64 {
    0.05
}
fn default_stability_bound() -> f64 {
    1.25
}

impl ExperimentSection {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::HypothesisCheck { .. } => "hypothesis_check",
            Self::Moments { .. } => "moments",
            Self::Tail { .. } => "tail",
            Self::SemigroupIdentities { .. } => "semigroup_identities",
            Self::BelCheck { .. } => "bel_check",
            Self::SmallTScan { .. } => "small_t_scan",
            Self::InvariantSample { .. } => "invariant_sample",
            Self::FominSuite { .. } => "fomin_suite",
            Self::CpScan { .. } => "cp_scan",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    #[serde(default = "default_sim")]
    pub sim: SimSection,
    pub experiment: ExperimentSection,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
}

fn default_sim() -> SimSection {
    SimSection {
        dt: default_dt(),
        seed: default_seed(),
        n_paths: default_n_paths(),
        scheme: SchemeConfig::default(),
    }
}

fn default_output_dir() -> String {
    "out".into()
}

impl ExperimentConfig {
    /// Parse and resolve a config, rejecting unknown keys with a diagnostic
    /// that names them.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut config: ExperimentConfig =
            serde_json::from_str(text).context("invalid experiment config")?;
        config.sim.resolve();
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        if !(self.sim.dt > 0.0) {
            bail!("sim.dt must be positive");
        }
        if self.sim.n_paths == 0 {
            bail!("sim.n_paths must be >= 1");
        }
        self.model.build().map_err(|e| anyhow::anyhow!("model: {e}"))?;
        Ok(())
    }

    /// Zero vector default for x0, first basis vector for h.
    pub fn point_or_zero(dim: usize, x0: &Option<Vec<f64>>) -> Result<Vec<f64>> {
        match x0 {
            None => Ok(vec![0.0; dim]),
            Some(v) if v.len() == dim => Ok(v.clone()),
            Some(v) => bail!("point has dimension {}, model has {}", v.len(), dim),
        }
    }

    pub fn direction_or_e1(dim: usize, h: &Option<Vec<f64>>) -> Result<Vec<f64>> {
        match h {
            None => {
                let mut e1 = vec![0.0; dim];
                e1[0] = 1.0;
                Ok(e1)
            }
            Some(v) if v.len() == dim => Ok(v.clone()),
            Some(v) => bail!("direction has dimension {}, model has {}", v.len(), dim),
        }
    }
}
