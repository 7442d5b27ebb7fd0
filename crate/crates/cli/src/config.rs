//! Run configuration: model, propagation, search, training and ensemble
//! settings in one TOML file. Every section is optional.

use std::path::Path;

use qdml::dataset::FeatureMode;
use qdml::ensemble::EnsembleSpec;
use qdml::hyperopt::{memory_time_grid, paper_neuron_grid, Method, SaConfig, SearchSpace, TpeConfig};
use qdml::lstm::TrainConfig;
use qdml::physmodel::{ModelConfig, ModelId, SiteExcitonModel};
use qdml::tdvp::{PropagationConfig, Scheme};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignSection {
    pub method: Method,
    pub tasks: usize,
    pub iters: usize,
    pub sa: SaConfig,
    pub tpe: TpeConfig,
}

impl Default for CampaignSection {
    fn default() -> Self {
        Self {
            method: Method::SimulatedAnnealing,
            tasks: 4,
            iters: 25,
            sa: SaConfig::default(),
            tpe: TpeConfig::default(),
        }
    }
}

/// Search grids. The memory-time grid runs from `memory_time_min_fs` to
/// `memory_time_max_fs` (default: a quarter of the history) every
/// `memory_time_stride` time steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub layer_counts: Vec<usize>,
    pub neuron_grid: Vec<usize>,
    pub memory_time_min_fs: f64,
    pub memory_time_max_fs: Option<f64>,
    pub memory_time_stride: usize,
}

impl Default for SearchSection {
    fn default() -> Self {
        Self {
            layer_counts: vec![2, 3, 4],
            neuron_grid: paper_neuron_grid(),
            memory_time_min_fs: 5.0,
            memory_time_max_fs: None,
            memory_time_stride: 1,
        }
    }
}

impl SearchSection {
    pub fn space(&self, t_hist: f64, dt: f64) -> qdml::Result<SearchSpace> {
        let hi = self.memory_time_max_fs.unwrap_or(t_hist / 4.0);
        SearchSpace::new(
            self.layer_counts.clone(),
            self.neuron_grid.clone(),
            memory_time_grid(self.memory_time_min_fs, hi, dt, self.memory_time_stride)?,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub model: ModelConfig,
    pub propagation: PropagationConfig,
    /// Length of the training history in fs.
    pub t_hist_fs: f64,
    pub feature_mode: FeatureMode,
    pub campaign: CampaignSection,
    pub search: SearchSection,
    pub training: TrainConfig,
    /// Ensemble label such as `(SA-H3)×BT10`.
    pub ensemble: String,
    /// History lengths for `sweep-history`, fs.
    pub history_lengths: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl RunConfig {
    /// Model I with 10 modes per state, one-site propagation at bond 16,
    /// 4 × 25 campaign over a compact grid, (SA-H3)×BT10.
    pub fn desk() -> Self {
        Self {
            seed: 0,
            model: ModelConfig {
                modes_per_state_override: Some(10),
                ..ModelConfig::preset(ModelId::I)
            },
            propagation: PropagationConfig {
                scheme: Scheme::OneSite,
                max_bond: 16,
                initial_bond: 16,
                ..PropagationConfig::default()
            },
            t_hist_fs: 350.0,
            feature_mode: FeatureMode::Full,
            campaign: CampaignSection::default(),
            search: SearchSection {
                layer_counts: vec![2, 3],
                neuron_grid: vec![10, 20, 30],
                memory_time_min_fs: 5.0,
                memory_time_max_fs: Some(50.0),
                memory_time_stride: 10,
            },
            training: TrainConfig {
                max_epochs: 40,
                patience: 8,
                ..TrainConfig::default()
            },
            ensemble: "(SA-H3)×BT10".into(),
            history_lengths: vec![200.0, 350.0],
        }
    }

    /// The published protocol: full bath, two-site TDVP with bond cap 64,
    /// 20 × 100 campaign over the full grid, (SA-H10)×BT100.
    pub fn paper() -> Self {
        Self {
            model: ModelConfig::preset(ModelId::I),
            propagation: PropagationConfig::default(),
            campaign: CampaignSection {
                tasks: 20,
                iters: 100,
                ..CampaignSection::default()
            },
            search: SearchSection::default(),
            training: TrainConfig::default(),
            ensemble: "(SA-H10)×BT100".into(),
            ..Self::desk()
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self, CliError> {
        toml::from_str(s).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    /// Loads a TOML config, or the config embedded in a run manifest (JSON).
    pub fn load(path: &Path, base: RunConfig) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            let manifest: crate::manifest::RunManifest = serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("manifest {}: {e}", path.display())))?;
            return Ok(manifest.config);
        }
        let overlay: toml::Table = toml::from_str(&text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        let mut merged = toml::Table::try_from(&base).expect("config serializes");
        merge(&mut merged, overlay);
        let cfg: RunConfig = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Usage(format!("config {}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn model(&self) -> Result<SiteExcitonModel, CliError> {
        self.model.resolve().map_err(|e| CliError::Usage(format!("model: {e}")))
    }

    /// Propagation settings with the model's boson level count applied.
    pub fn propagation(&self) -> PropagationConfig {
        PropagationConfig {
            n_boson_levels: self.model.n_boson_levels.unwrap_or(self.propagation.n_boson_levels),
            ..self.propagation.clone()
        }
    }

    pub fn ensemble_spec(&self) -> Result<EnsembleSpec, CliError> {
        self.ensemble
            .parse()
            .map_err(|e| CliError::Usage(format!("ensemble: {e}")))
    }

    pub fn space(&self, t_hist: f64) -> Result<SearchSpace, CliError> {
        self.search
            .space(t_hist, self.propagation.dt * self.propagation.record_stride as f64)
            .map_err(|e| CliError::Usage(format!("search: {e}")))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.model()?;
        self.propagation()
            .validate()
            .map_err(|e| CliError::Usage(format!("propagation: {e}")))?;
        self.training
            .validate()
            .map_err(|e| CliError::Usage(format!("training: {e}")))?;
        self.ensemble_spec()?;
        let t_end = self.propagation.t_end;
        for t in std::iter::once(self.t_hist_fs).chain(self.history_lengths.iter().copied()) {
            if !(t > 0.0 && t < t_end) {
                return Err(CliError::Usage(format!(
                    "history length {t} fs must lie in (0, t_end = {t_end} fs)"
                )));
            }
            self.space(t)?;
        }
        if self.campaign.tasks == 0 || self.campaign.iters == 0 {
            return Err(CliError::Usage("campaign tasks and iters must be >= 1".into()));
        }
        Ok(())
    }
}

fn merge(base: &mut toml::Table, overlay: toml::Table) {
    for (k, v) in overlay {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
