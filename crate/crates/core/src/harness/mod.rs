//! Experiment orchestration: configuration, the three experiment runners,
//! budget calibration and report emission.

pub mod config;
pub mod csi;
pub mod kpi;
pub mod report;
pub mod snr;
pub mod train;

pub use config::{apply_override, ExperimentConfig, ExperimentKind};
pub use csi::{run_csi_error, CsiSummary, GainBar};
pub use kpi::{KpiAnnotation, KpiTarget, KpiTargetTable};
pub use report::{read_csv_provenance, verify_outputs, CsvTable, ExperimentReport};
pub use snr::{
    calibrate_budget, calibrate_on_samples, draw_snr_samples, run_snr_cdf, SnrCase, SnrCdfSummary, SnrSample,
};
pub use train::{run_td3, TrainSummary};

use crate::error::Result;

/// Runs the experiment named by `config.experiment`.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    Ok(match config.experiment {
        ExperimentKind::SnrCdf => run_snr_cdf(config)?.1,
        ExperimentKind::CsiError => run_csi_error(config)?.1,
        ExperimentKind::Td3Train => run_td3(config)?.1,
    })
}
