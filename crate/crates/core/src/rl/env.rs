//! Multi-actuator sum-rate environment: the action sets the surface phases,
//! the BS serves every actuator with zero-forcing, and the reward is the
//! sum rate.
//!
//! The observation is the previous action followed by the previous
//! per-actuator rates, so the agent never sees channel coefficients.

use rand::RngCore;

use super::{phases_from_action, Environment, StepOutcome};
use crate::channel::{sample_realization, ChannelRealization, LinkBudget, NodeLayout, PathLossModel};
use crate::error::{param, Result};
use crate::rate::{sinr, zero_forcing_precoder, EffectiveChannelSet, FblParams, RateKind, RateReport};
use crate::ris::{effective_channel, AmplitudeModel, QuantizationSpec, RisState};

#[derive(Debug, Clone, PartialEq)]
pub struct RisEnvConfig {
    pub layout: NodeLayout,
    pub path_loss: PathLossModel,
    pub budget: LinkBudget,
    pub amplitude: AmplitudeModel,
    pub quantization: QuantizationSpec,
    pub fbl: FblParams,
    pub rate_kind: RateKind,
    pub include_direct: bool,
    pub steps_per_episode: usize,
    /// Draw a fresh channel at every reset instead of keeping the first one.
    pub resample_channels: bool,
}

#[derive(Debug, Clone)]
pub struct RisSumRateEnv {
    config: RisEnvConfig,
    realization: Option<ChannelRealization>,
    state: Vec<f64>,
    steps: usize,
}

impl RisSumRateEnv {
    pub fn new(config: RisEnvConfig) -> Result<Self> {
        config.layout.validate()?;
        config.fbl.validate()?;
        config.budget.validate()?;
        if config.steps_per_episode == 0 {
            return param("steps per episode must be positive");
        }
        if config.layout.actuators() > config.layout.bs_antennas {
            return param("zero-forcing needs at least as many BS antennas as actuators");
        }
        Ok(RisSumRateEnv { config, realization: None, state: Vec::new(), steps: 0 })
    }

    pub fn config(&self) -> &RisEnvConfig {
        &self.config
    }

    pub fn realization(&self) -> Option<&ChannelRealization> {
        self.realization.as_ref()
    }

    /// Installs a specific channel draw (kept until the next resampling reset).
    pub fn set_realization(&mut self, realization: ChannelRealization) {
        self.realization = Some(realization);
    }

    /// Rates obtained with the phases encoded by `action`, without touching
    /// the episode state.
    pub fn evaluate(&self, action: &[f64]) -> Result<RateReport> {
        let real = match &self.realization {
            Some(r) => r,
            None => return param("environment has no channel yet; call reset first"),
        };
        let c = &self.config;
        if action.len() != c.layout.ris_elements {
            return param(format!("action has {} entries, surface {}", action.len(), c.layout.ris_elements));
        }
        let phases = phases_from_action(action, &c.quantization);
        let ris = RisState::new(&phases, c.amplitude, c.quantization)?;
        let rows = (0..real.actuators())
            .map(|k| effective_channel(real, &ris, k, c.include_direct))
            .collect::<Result<Vec<_>>>()?;
        let channels = EffectiveChannelSet::new(rows)?;
        let precoder = zero_forcing_precoder(&channels, c.budget.snr_scale())?;
        let sinrs = sinr(&channels, &precoder, 1.0)?;
        RateReport::from_sinrs(&sinrs, &c.fbl, c.rate_kind)
    }

    fn observation(&self, action: &[f64], report: &RateReport) -> Vec<f64> {
        let mut s = action.to_vec();
        s.extend_from_slice(report.rates(self.config.rate_kind));
        s
    }
}

impl Environment for RisSumRateEnv {
    fn state_dim(&self) -> usize {
        self.config.layout.ris_elements + self.config.layout.actuators()
    }

    fn action_dim(&self) -> usize {
        self.config.layout.ris_elements
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        if self.realization.is_none() || self.config.resample_channels {
            let c = &self.config;
            self.realization = Some(sample_realization(&c.layout, &c.path_loss, &c.budget, rng)?);
        }
        let zero = vec![0.0; self.action_dim()];
        let report = self.evaluate(&zero)?;
        self.state = self.observation(&zero, &report);
        self.steps = 0;
        Ok(self.state.clone())
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        let report = self.evaluate(action)?;
        self.steps += 1;
        self.state = self.observation(action, &report);
        Ok(StepOutcome {
            next_state: self.state.clone(),
            reward: report.reward,
            done: self.steps >= self.config.steps_per_episode,
            aux: vec![report.sum_shannon, report.sum_fbl],
        })
    }
}
