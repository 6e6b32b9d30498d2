//! Normalized cascade gain under phase-estimation errors, swept over the
//! maximum mismatch, the phase resolution and the error placement.

use serde::Serialize;

use super::config::{ExperimentConfig, ExperimentKind};
use super::report::{CsvTable, ExperimentReport};
use crate::error::{Error, Result};
use crate::impairment::{normalized_gain_sweep, PhaseErrorSpec, PhaseMode, Placement};
use crate::numerics::RngStream;

pub(crate) const CSI_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainBar {
    pub delta_rad: f64,
    pub placement: Placement,
    pub bits: u32,
    pub mean_gain: f64,
    pub std: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CsiSummary {
    pub elements: usize,
    pub bars: Vec<GainBar>,
}

impl CsiSummary {
    pub fn bar(&self, delta: f64, placement: Placement, bits: u32) -> Option<&GainBar> {
        self.bars.iter().find(|b| b.delta_rad == delta && b.placement == placement && b.bits == bits)
    }
}

/// All bars share each trial's channel and error draws, so they differ only
/// through `Δ`, the placement and the resolution.
pub fn run_csi_error(config: &ExperimentConfig) -> Result<(CsiSummary, ExperimentReport)> {
    if config.experiment != ExperimentKind::CsiError {
        return Err(Error::Config(format!("expected a csi-error config, got {}", config.experiment.name())));
    }
    let layout = config.layout()?;
    let n = layout.ris_elements;
    let trials = config.trials();
    let rng = RngStream::new(config.seed, CSI_STREAM);
    let modes = [PhaseMode::Continuous, PhaseMode::Quantized(config.csi.bits)];

    let mut specs = Vec::new();
    for &delta in &config.csi.deltas {
        for phase_mode in modes {
            for &placement in &config.csi.placements {
                specs.push(PhaseErrorSpec { max_mismatch: delta, placement, phase_mode });
            }
        }
    }
    let results = normalized_gain_sweep(&layout, &config.path_loss, &specs, n, trials, rng)?;

    let mut table = CsvTable::new("csi_error.csv", "delta_rad,placement,bits,mean_gain,std,trials,seed");
    let mut bars = Vec::new();
    for (spec, r) in specs.iter().zip(results) {
        let bar = GainBar {
            delta_rad: spec.max_mismatch,
            placement: spec.placement,
            bits: spec.phase_mode.bits(),
            mean_gain: r.mean_normalized_gain,
            std: r.std,
            trials: r.trials,
        };
        table.rows.push(format!(
            "{:.6},{},{},{:.6},{:.6},{},{}",
            bar.delta_rad,
            bar.placement.name(),
            bar.bits,
            bar.mean_gain,
            bar.std,
            trials,
            config.seed
        ));
        bars.push(bar);
    }
    let summary = CsiSummary { elements: n, bars };
    let mut report = ExperimentReport::new(config, &summary)?;
    report.add_table(table);
    Ok((summary, report))
}
