//! Two-state site-exciton Hamiltonian with Debye baths.
//!
//! The system part couples two locally excited states |φ₁⟩, |φ₂⟩; each state
//! is linearly coupled to its own set of harmonic modes. The continuous Debye
//! spectral density is sampled on a regular frequency grid ω_j = j·Δω
//! (j = 1..ω_max/Δω) with couplings κ_j = sqrt((2/π) J(ω_j) Δω).

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::cm_to_ev;

/// Frequency grid used by all presets: 0–1200 cm⁻¹ in steps of 12 cm⁻¹.
pub const PRESET_GRID_MAX_CM: f64 = 1200.0;
pub const PRESET_GRID_SPACING_CM: f64 = 12.0;

/// Debye spectral density J(ω) = 2λωω_c / (ω² + ω_c²), all in cm⁻¹.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralDensity {
    pub reorganization_energy: f64,
    pub characteristic_frequency: f64,
}

impl SpectralDensity {
    pub fn new(reorganization_energy: f64, characteristic_frequency: f64) -> Result<Self> {
        let sd = Self {
            reorganization_energy,
            characteristic_frequency,
        };
        sd.validate()?;
        Ok(sd)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.reorganization_energy >= 0.0) {
            return Err(Error::Domain(format!(
                "reorganization energy must be >= 0, got {}",
                self.reorganization_energy
            )));
        }
        if !(self.characteristic_frequency > 0.0) {
            return Err(Error::Domain(format!(
                "characteristic frequency must be > 0, got {}",
                self.characteristic_frequency
            )));
        }
        Ok(())
    }

    pub fn eval(&self, omega: f64) -> Result<f64> {
        if !(omega >= 0.0) {
            return Err(Error::Domain(format!(
                "spectral density needs omega >= 0, got {omega}"
            )));
        }
        let (lambda, wc) = (self.reorganization_energy, self.characteristic_frequency);
        Ok(2.0 * lambda * omega * wc / (omega * omega + wc * wc))
    }

    /// Reorganization energy carried by the band [0, ω_max]:
    /// (1/π)∫₀^ω_max J(ω)/ω dω = (2λ/π)·atan(ω_max/ω_c).
    pub fn band_reorganization_energy(&self, omega_max: f64) -> f64 {
        2.0 * self.reorganization_energy / std::f64::consts::PI
            * (omega_max / self.characteristic_frequency).atan()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelId {
    I,
    II,
    III,
    IV,
}

impl ModelId {
    pub const ALL: [ModelId; 4] = [ModelId::I, ModelId::II, ModelId::III, ModelId::IV];
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelId::I => "I",
            ModelId::II => "II",
            ModelId::III => "III",
            ModelId::IV => "IV",
        })
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(ModelId::I),
            "II" | "2" => Ok(ModelId::II),
            "III" | "3" => Ok(ModelId::III),
            "IV" | "4" => Ok(ModelId::IV),
            other => Err(Error::Config(format!(
                "model_id: unknown preset `{other}` (expected I, II, III or IV)"
            ))),
        }
    }
}

/// Site-exciton model parameters. Energies of the electronic part are in eV,
/// bath quantities in cm⁻¹. V₂₂ is the energy origin, so V₁₁ = ΔE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiteExcitonModel {
    pub site_energy_gap: f64,
    pub electronic_coupling: f64,
    /// Identical for both electronic states.
    pub bath: SpectralDensity,
    pub grid_max: f64,
    pub grid_spacing: f64,
}

impl SiteExcitonModel {
    pub fn preset(id: ModelId) -> Self {
        let (gap, lambda) = match id {
            ModelId::I => (0.0, 64.0),
            ModelId::II => (0.0, 256.0),
            ModelId::III => (0.0186, 64.0),
            ModelId::IV => (0.0186, 225.0),
        };
        Self {
            site_energy_gap: gap,
            electronic_coupling: 0.0124,
            bath: SpectralDensity {
                reorganization_energy: lambda,
                characteristic_frequency: 200.0,
            },
            grid_max: PRESET_GRID_MAX_CM,
            grid_spacing: PRESET_GRID_SPACING_CM,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.bath.validate()?;
        if !self.site_energy_gap.is_finite() || !self.electronic_coupling.is_finite() {
            return Err(Error::Domain("electronic parameters must be finite".into()));
        }
        if !(self.grid_spacing > 0.0) {
            return Err(Error::Domain(format!(
                "grid spacing must be > 0, got {}",
                self.grid_spacing
            )));
        }
        let ratio = self.grid_max / self.grid_spacing;
        if !(ratio >= 1.0) || (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return Err(Error::Domain(format!(
                "grid max {} is not a positive integer multiple of spacing {}",
                self.grid_max, self.grid_spacing
            )));
        }
        Ok(())
    }

    pub fn modes_per_state(&self) -> usize {
        (self.grid_max / self.grid_spacing).round() as usize
    }

    /// Same band, resampled with `n` modes per state.
    pub fn with_modes_per_state(mut self, n: usize) -> Self {
        self.grid_spacing = self.grid_max / n as f64;
        self
    }

    /// Without system–bath coupling.
    pub fn decoupled(mut self) -> Self {
        self.bath.reorganization_energy = 0.0;
        self
    }

    /// Electronic Hamiltonian H_S in eV, basis (|φ₁⟩, |φ₂⟩).
    pub fn system_hamiltonian(&self) -> [[f64; 2]; 2] {
        [
            [self.site_energy_gap, self.electronic_coupling],
            [self.electronic_coupling, 0.0],
        ]
    }

    /// Diagonal energy V_kk of electronic state `k` (0-based) in eV.
    pub fn site_energy(&self, state: usize) -> f64 {
        self.system_hamiltonian()[state][state]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathModes {
    /// ω_kj in cm⁻¹, ascending.
    pub frequencies: Vec<f64>,
    /// κ_kj in cm⁻¹.
    pub couplings: Vec<f64>,
}

impl BathModes {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Σ_j κ_j² / (2ω_j): the reorganization energy realized by these modes.
    pub fn reorganization_energy(&self) -> f64 {
        self.frequencies
            .iter()
            .zip(&self.couplings)
            .map(|(w, k)| k * k / (2.0 * w))
            .sum()
    }

    pub fn frequencies_ev(&self) -> Vec<f64> {
        self.frequencies.iter().copied().map(cm_to_ev).collect()
    }

    pub fn couplings_ev(&self) -> Vec<f64> {
        self.couplings.iter().copied().map(cm_to_ev).collect()
    }
}

/// Discretized baths, one per electronic state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizedBath {
    pub states: [BathModes; 2],
}

impl DiscretizedBath {
    pub fn modes_per_state(&self) -> usize {
        self.states[0].len()
    }

    pub fn total_modes(&self) -> usize {
        self.states.iter().map(BathModes::len).sum()
    }
}

pub fn discretize_bath(model: &SiteExcitonModel) -> Result<DiscretizedBath> {
    model.validate()?;
    let n = model.modes_per_state();
    let dw = model.grid_spacing;
    let mut frequencies = Vec::with_capacity(n);
    let mut couplings = Vec::with_capacity(n);
    for j in 1..=n {
        let w = j as f64 * dw;
        let j_w = model.bath.eval(w)?;
        frequencies.push(w);
        couplings.push((2.0 / std::f64::consts::PI * j_w * dw).sqrt());
    }
    let modes = BathModes {
        frequencies,
        couplings,
    };
    Ok(DiscretizedBath {
        states: [modes.clone(), modes],
    })
}

/// Human-editable model configuration. Either `model_id` selects a preset, or
/// the explicit fields describe the model; explicit fields override a preset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub model_id: Option<String>,
    pub delta_e_ev: Option<f64>,
    pub v12_ev: Option<f64>,
    pub omega_c_cm: Option<f64>,
    pub lambda_cm: Option<f64>,
    pub omega_max_cm: Option<f64>,
    pub delta_omega_cm: Option<f64>,
    pub n_boson_levels: Option<usize>,
    pub modes_per_state_override: Option<usize>,
}

pub const DEFAULT_BOSON_LEVELS: usize = 6;

impl ModelConfig {
    pub fn preset(id: ModelId) -> Self {
        Self {
            model_id: Some(id.to_string()),
            ..Self::default()
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("model config serializes")
    }

    pub fn n_boson_levels(&self) -> usize {
        self.n_boson_levels.unwrap_or(DEFAULT_BOSON_LEVELS)
    }

    /// Resolve into a validated model.
    pub fn resolve(&self) -> Result<SiteExcitonModel> {
        let mut model = match &self.model_id {
            Some(id) => SiteExcitonModel::preset(id.parse()?),
            None => {
                let missing: Vec<&str> = [
                    ("delta_e_ev", self.delta_e_ev.is_none()),
                    ("v12_ev", self.v12_ev.is_none()),
                    ("omega_c_cm", self.omega_c_cm.is_none()),
                    ("lambda_cm", self.lambda_cm.is_none()),
                ]
                .into_iter()
                .filter_map(|(name, absent)| absent.then_some(name))
                .collect();
                if !missing.is_empty() {
                    return Err(Error::Config(format!(
                        "model_id absent and explicit fields missing: {}",
                        missing.join(", ")
                    )));
                }
                SiteExcitonModel::preset(ModelId::I)
            }
        };
        if let Some(v) = self.delta_e_ev {
            model.site_energy_gap = v;
        }
        if let Some(v) = self.v12_ev {
            model.electronic_coupling = v;
        }
        if let Some(v) = self.omega_c_cm {
            model.bath.characteristic_frequency = v;
        }
        if let Some(v) = self.lambda_cm {
            model.bath.reorganization_energy = v;
        }
        if let Some(v) = self.omega_max_cm {
            model.grid_max = v;
        }
        if let Some(v) = self.delta_omega_cm {
            model.grid_spacing = v;
        }
        if let Some(n) = self.modes_per_state_override {
            if n == 0 {
                return Err(Error::Config(
                    "modes_per_state_override must be >= 1".into(),
                ));
            }
            model = model.with_modes_per_state(n);
        }
        if self.n_boson_levels() < 2 {
            return Err(Error::Config("n_boson_levels must be >= 2".into()));
        }
        model
            .validate()
            .map_err(|e| Error::Config(format!("model: {e}")))?;
        Ok(model)
    }
}
