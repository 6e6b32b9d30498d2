//! Experiment configuration: a TOML document with one section per module,
//! dotted `key=value` overrides, and a SHA-256 fingerprint of the resolved
//! settings.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{LinkBudget, NodeLayout, PathLossModel, Point2};
use crate::error::{Error, Result};
use crate::impairment::Placement;
use crate::rate::{FblParams, RateKind};
use crate::ris::{AmplitudeMode, AmplitudeModel, QuantizationSpec};
use crate::rl::Td3Config;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SnrCdf,
    CsiError,
    Td3Train,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::SnrCdf => "snr-cdf",
            ExperimentKind::CsiError => "csi-error",
            ExperimentKind::Td3Train => "td3-train",
        }
    }

    fn default_trials(&self) -> usize {
        match self {
            ExperimentKind::SnrCdf => 100_000,
            ExperimentKind::CsiError => 10_000,
            ExperimentKind::Td3Train => 1,
        }
    }

    fn default_preset(&self) -> LayoutPreset {
        match self {
            ExperimentKind::SnrCdf | ExperimentKind::CsiError => LayoutPreset::SingleLink,
            ExperimentKind::Td3Train => LayoutPreset::FactoryFloor,
        }
    }

    fn default_elements(&self) -> usize {
        match self {
            ExperimentKind::SnrCdf => 512,
            ExperimentKind::CsiError => 1024,
            ExperimentKind::Td3Train => 64,
        }
    }

    fn default_tx_power_db(&self) -> f64 {
        match self {
            ExperimentKind::Td3Train => 225.0,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayoutPreset {
    SingleLink,
    FactoryFloor,
}

/// Geometry; unset entries come from the preset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub preset: Option<LayoutPreset>,
    /// Surface elements `N`.
    pub elements: Option<usize>,
    /// BS antennas `M`.
    pub antennas: Option<usize>,
    pub bs_position: Option<Point2>,
    pub ris_position: Option<Point2>,
    pub actuator_positions: Option<Vec<Point2>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetConfig {
    pub tx_power_db: Option<f64>,
    pub noise_power_db: f64,
    pub direct_path_offset_db: f64,
    /// Fit the budget to the two median anchors before running (default
    /// on for snr-cdf).
    pub calibrate: Option<bool>,
    pub target_optimized_median_db: f64,
    pub target_relay_direct_median_db: f64,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        BudgetConfig {
            tx_power_db: None,
            noise_power_db: 0.0,
            direct_path_offset_db: 0.0,
            calibrate: None,
            target_optimized_median_db: 21.0,
            target_relay_direct_median_db: 27.71,
        }
    }
}

impl BudgetConfig {
    pub fn link_budget(&self) -> LinkBudget {
        LinkBudget {
            tx_power_db: self.tx_power_db.unwrap_or(0.0),
            noise_power_db: self.noise_power_db,
            direct_path_offset_db: self.direct_path_offset_db,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RisConfig {
    pub mode: AmplitudeMode,
    pub beta_min: f64,
    pub phi: f64,
    pub alpha: f64,
    /// Phase resolution of the practical surface; 0 keeps phases
    /// continuous. The ideal surface is always continuous.
    pub bits: u32,
}

impl Default for RisConfig {
    fn default() -> Self {
        RisConfig {
            mode: AmplitudeMode::Ideal,
            beta_min: AmplitudeModel::DEFAULT_BETA_MIN,
            phi: AmplitudeModel::DEFAULT_PHI,
            alpha: AmplitudeModel::DEFAULT_ALPHA,
            bits: 2,
        }
    }
}

impl RisConfig {
    pub fn amplitude(&self) -> Result<AmplitudeModel> {
        match self.mode {
            AmplitudeMode::Ideal => Ok(AmplitudeModel::ideal()),
            AmplitudeMode::Practical => AmplitudeModel::practical(self.beta_min, self.phi, self.alpha),
        }
    }

    pub fn quantization(&self) -> Result<QuantizationSpec> {
        if self.bits == 0 || self.mode == AmplitudeMode::Ideal {
            Ok(QuantizationSpec::continuous())
        } else {
            QuantizationSpec::new(self.bits)
        }
    }

    /// Ideal surfaces are unit-amplitude with continuous phases; practical
    /// ones take amplitude and resolution from `self`.
    pub fn for_mode(&self, mode: AmplitudeMode) -> RisConfig {
        match mode {
            AmplitudeMode::Ideal => RisConfig { mode, bits: 0, ..self.clone() },
            AmplitudeMode::Practical => RisConfig { mode, ..self.clone() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsiConfig {
    /// Maximum phase mismatch values `Δ` (rad).
    pub deltas: Vec<f64>,
    /// Resolution of the quantized bars.
    pub bits: u32,
    pub placements: Vec<Placement>,
}

impl Default for CsiConfig {
    fn default() -> Self {
        CsiConfig {
            deltas: vec![0.0, PI / 6.0, PI / 4.0, PI / 3.0, PI / 2.0, 2.0 * PI / 3.0, PI],
            bits: 2,
            placements: Placement::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// One training run per surface mode, all with the same seed.
    pub modes: Vec<AmplitudeMode>,
    /// Reward the agent maximises; both rate curves are logged regardless.
    pub rate_kind: RateKind,
    pub include_direct: bool,
    pub resample_channels: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            modes: vec![AmplitudeMode::Ideal, AmplitudeMode::Practical],
            rate_kind: RateKind::Fbl,
            include_direct: false,
            resample_channels: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    #[serde(default)]
    pub trials: Option<usize>,
    /// Output directory; not part of the fingerprint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub path_loss: PathLossModel,
    #[serde(default)]
    pub budget: BudgetConfig,
    #[serde(default)]
    pub ris: RisConfig,
    #[serde(default)]
    pub fbl: FblParams,
    #[serde(default)]
    pub td3: Td3Config,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub csi: CsiConfig,
}

impl ExperimentConfig {
    /// Defaults for `kind` with the given seed.
    pub fn new(kind: ExperimentKind, seed: u64) -> Result<Self> {
        let mut table = toml::Table::new();
        table.insert("experiment".into(), toml::Value::String(kind.name().into()));
        table.insert("seed".into(), toml::Value::Integer(seed_as_toml(seed)?));
        Self::from_table(table)
    }

    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Self::from_table(table)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text, overrides)
    }

    fn from_table(table: toml::Table) -> Result<Self> {
        if !table.contains_key("seed") {
            return Err(Error::Config("a seed is required".into()));
        }
        let config: ExperimentConfig =
            toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let config = config.resolved();
        config.validate()?;
        Ok(config)
    }

    /// Fills every kind-dependent default explicitly so that equivalent
    /// configs fingerprint identically.
    fn resolved(mut self) -> Self {
        let kind = self.experiment;
        self.trials.get_or_insert(kind.default_trials());
        self.scenario.preset.get_or_insert(kind.default_preset());
        self.scenario.elements.get_or_insert(kind.default_elements());
        self.budget.tx_power_db.get_or_insert(kind.default_tx_power_db());
        self.budget.calibrate.get_or_insert(kind == ExperimentKind::SnrCdf);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.layout()?;
        self.path_loss.validate()?;
        self.budget.link_budget().validate()?;
        self.ris.amplitude()?;
        self.ris.quantization()?;
        self.fbl.validate()?;
        self.td3.validate()?;
        if self.trials() == 0 {
            return Err(Error::Config("trials must be positive".into()));
        }
        if self.train.modes.is_empty() {
            return Err(Error::Config("train.modes is empty".into()));
        }
        if self.csi.placements.is_empty() || self.csi.deltas.is_empty() {
            return Err(Error::Config("csi sweep is empty".into()));
        }
        Ok(())
    }

    pub fn trials(&self) -> usize {
        self.trials.unwrap_or(self.experiment.default_trials())
    }

    pub fn layout(&self) -> Result<NodeLayout> {
        let s = &self.scenario;
        let mut layout = match s.preset.unwrap_or(self.experiment.default_preset()) {
            LayoutPreset::SingleLink => NodeLayout::single_link(),
            LayoutPreset::FactoryFloor => NodeLayout::factory_floor(),
        };
        layout.ris_elements = s.elements.unwrap_or(self.experiment.default_elements());
        if let Some(m) = s.antennas {
            layout.bs_antennas = m;
        }
        if let Some(p) = s.bs_position {
            layout.bs_position = p;
        }
        if let Some(p) = s.ris_position {
            layout.ris_position = p;
        }
        if let Some(p) = &s.actuator_positions {
            layout.actuator_positions = p.clone();
        }
        layout.validate()?;
        Ok(layout)
    }

    /// Hex SHA-256 of the canonical JSON form, output path excluded.
    pub fn fingerprint(&self) -> String {
        let canonical = ExperimentConfig { output: None, ..self.clone() };
        let json = serde_json::to_string(&canonical).expect("config serializes to JSON");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }
}

fn seed_as_toml(seed: u64) -> Result<i64> {
    i64::try_from(seed).map_err(|_| Error::Config(format!("seed {seed} exceeds the TOML integer range")))
}

/// Sets `section.key = value` in `table`. The value is read as a TOML literal
/// when it parses as one and as a bare string otherwise.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) =
        assignment.split_once('=').ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key `{key}`")));
    }
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut cursor = table;
    for p in parents {
        let entry = cursor.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor =
            entry.as_table_mut().ok_or_else(|| Error::Config(format!("override `{key}`: `{p}` is not a section")))?;
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_is_mandatory() {
        assert!(matches!(ExperimentConfig::from_toml_str("experiment = \"snr-cdf\"", &[]), Err(Error::Config(_))));
    }

    #[test]
    fn kind_defaults() {
        let c = ExperimentConfig::new(ExperimentKind::SnrCdf, 3).unwrap();
        assert_eq!(c.trials(), 100_000);
        assert_eq!(c.layout().unwrap().ris_elements, 512);
        assert_eq!(c.budget.calibrate, Some(true));
        let c = ExperimentConfig::new(ExperimentKind::CsiError, 3).unwrap();
        assert_eq!(c.trials(), 10_000);
        assert_eq!(c.layout().unwrap().ris_elements, 1024);
        let c = ExperimentConfig::new(ExperimentKind::Td3Train, 3).unwrap();
        let l = c.layout().unwrap();
        assert_eq!((l.ris_elements, l.bs_antennas, l.actuators()), (64, 4, 4));
    }

    #[test]
    fn overrides_reach_nested_sections() {
        let c = ExperimentConfig::from_toml_str(
            "experiment = \"td3-train\"\nseed = 1\n[td3]\nepisodes = 10\n",
            &["td3.episodes=20".into(), "ris.bits=2".into(), "ris.mode=practical".into(), "trials = 7".into()],
        )
        .unwrap();
        assert_eq!(c.td3.episodes, 20);
        assert_eq!(c.ris.bits, 2);
        assert_eq!(c.ris.mode, AmplitudeMode::Practical);
        assert_eq!(c.trials(), 7);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(
            ExperimentConfig::from_toml_str("experiment = \"snr-cdf\"\nseed = 1\n", &["ris.bitz=2".into()]).is_err()
        );
        assert!(ExperimentConfig::from_toml_str("experiment = \"snr-cdf\"\nseed = 1\n", &["noequals".into()]).is_err());
    }

    #[test]
    fn fingerprint_ignores_output_and_explicit_defaults() {
        let a = ExperimentConfig::from_toml_str("experiment = \"csi-error\"\nseed = 9\n", &[]).unwrap();
        let b = ExperimentConfig::from_toml_str(
            "experiment = \"csi-error\"\nseed = 9\ntrials = 10000\noutput = \"elsewhere\"\n[scenario]\nelements = 1024\n",
            &[],
        )
        .unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        let c = ExperimentConfig::from_toml_str("experiment = \"csi-error\"\nseed = 10\n", &[]).unwrap();
        assert_ne!(a.fingerprint(), c.fingerprint());
        assert_eq!(a.fingerprint().len(), 64);
    }

    #[test]
    fn toml_round_trip() {
        let c = ExperimentConfig::new(ExperimentKind::Td3Train, 4).unwrap();
        let back = ExperimentConfig::from_toml_str(&c.to_toml_string(), &[]).unwrap();
        assert_eq!(back, c);
    }
}
