//! Reinforcement-learning phase control: a small MLP library, replay
//! storage, the TD3 agent and the RIS sum-rate environment it drives.

pub mod env;
pub mod mlp;
pub mod replay;
pub mod td3;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ris::{quantize_phases, wrap_phase, QuantizationSpec};

pub use env::{RisEnvConfig, RisSumRateEnv};
pub use mlp::{Adam, Mlp, MlpGrads, OutputActivation};
pub use replay::{ReplayBuffer, Transition};
pub use td3::{td3_train, Td3Agent, Td3Config, TrainOutcome};

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    /// Extra per-step metrics averaged into the episode log.
    pub aux: Vec<f64>,
}

pub trait Environment {
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn reset(&mut self, rng: &mut dyn rand::RngCore) -> Result<Vec<f64>>;
    fn step(&mut self, action: &[f64]) -> Result<StepOutcome>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    /// 1-based.
    pub episode: usize,
    pub sum_rate: f64,
    /// Mean over the last `window` episodes, once that many exist.
    pub moving_avg: Option<f64>,
    pub moving_std: Option<f64>,
    pub aux: Vec<f64>,
}

/// Trailing-window mean and (population) standard deviation; `None` until
/// `window` values are available.
pub fn moving_stats(values: &[f64], window: usize) -> Vec<(Option<f64>, Option<f64>)> {
    (0..values.len())
        .map(|i| {
            if i + 1 < window {
                return (None, None);
            }
            let w = &values[i + 1 - window..=i];
            let mean = w.iter().sum::<f64>() / window as f64;
            let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / window as f64;
            (Some(mean), Some(var.sqrt()))
        })
        .collect()
}

pub(crate) fn episode_logs(raw: &[f64], aux: &[Vec<f64>], window: usize) -> Vec<EpisodeLog> {
    moving_stats(raw, window)
        .into_iter()
        .enumerate()
        .map(|(i, (avg, std))| EpisodeLog {
            episode: i + 1,
            sum_rate: raw[i],
            moving_avg: avg,
            moving_std: std,
            aux: aux[i].clone(),
        })
        .collect()
}

/// Maps actions in `[-1, 1]` affinely onto `(0, 2π]` and snaps them to the
/// quantization grid.
pub fn phases_from_action(action: &[f64], quantization: &QuantizationSpec) -> Vec<f64> {
    let phases: Vec<f64> = action.iter().map(|a| wrap_phase(PI * (a.clamp(-1.0, 1.0) + 1.0))).collect();
    quantize_phases(&phases, quantization)
}
