//! TD3 phase optimization of the multi-actuator sum rate, one run per
//! surface mode with matched seeds.

use serde::Serialize;

use super::config::{ExperimentConfig, ExperimentKind};
use super::kpi::{reliability_annotations, spectral_efficiency_annotation};
use super::report::{CsvTable, ExperimentReport};
use crate::error::{Error, Result};
use crate::numerics::RngStream;
use crate::rate::{RateKind, RateReport};
use crate::ris::AmplitudeMode;
use crate::rl::{moving_stats, td3_train, RisEnvConfig, RisSumRateEnv};

pub(crate) const TD3_STREAM: u64 = 3;

/// Position of each rate kind in the environment's auxiliary metrics.
const AUX_INDEX: [(RateKind, usize); 2] = [(RateKind::Shannon, 0), (RateKind::Fbl, 1)];

#[derive(Debug, Clone, Serialize)]
pub struct Curve {
    pub rate_kind: RateKind,
    pub raw: Vec<f64>,
    pub moving_avg: Vec<Option<f64>>,
    pub moving_std: Vec<Option<f64>>,
}

impl Curve {
    pub fn first_moving_avg(&self) -> Option<f64> {
        self.moving_avg.iter().flatten().next().copied()
    }

    pub fn final_moving_avg(&self) -> Option<f64> {
        self.moving_avg.last().copied().flatten()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeRun {
    pub ris_mode: AmplitudeMode,
    pub bits: u32,
    pub curves: Vec<Curve>,
    /// Rates at the trained actor's greedy action.
    pub final_sum_shannon: f64,
    pub final_sum_fbl: f64,
    #[serde(skip)]
    pub final_report: Option<RateReport>,
}

impl ModeRun {
    pub fn curve(&self, kind: RateKind) -> &Curve {
        self.curves.iter().find(|c| c.rate_kind == kind).expect("both rate curves logged")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub reward_kind: RateKind,
    pub runs: Vec<ModeRun>,
}

impl TrainSummary {
    pub fn run(&self, mode: AmplitudeMode) -> Option<&ModeRun> {
        self.runs.iter().find(|r| r.ris_mode == mode)
    }
}

fn mode_name(mode: AmplitudeMode) -> &'static str {
    match mode {
        AmplitudeMode::Ideal => "ideal",
        AmplitudeMode::Practical => "practical",
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// Trains one agent per configured surface mode and emits the episode
/// curves (`td3_episodes.csv`) and final per-actuator rates
/// (`td3_final_rates_<mode>.csv`).
pub fn run_td3(config: &ExperimentConfig) -> Result<(TrainSummary, ExperimentReport)> {
    if config.experiment != ExperimentKind::Td3Train {
        return Err(Error::Config(format!("expected a td3-train config, got {}", config.experiment.name())));
    }
    let layout = config.layout()?;
    let t = &config.train;
    let mut runs = Vec::new();
    for &mode in &t.modes {
        let ris = config.ris.for_mode(mode);
        let env_config = RisEnvConfig {
            layout: layout.clone(),
            path_loss: config.path_loss,
            budget: config.budget.link_budget(),
            amplitude: ris.amplitude()?,
            quantization: ris.quantization()?,
            fbl: config.fbl,
            rate_kind: t.rate_kind,
            include_direct: t.include_direct,
            steps_per_episode: config.td3.steps_per_episode,
            resample_channels: t.resample_channels,
        };
        let mut env = RisSumRateEnv::new(env_config)?;
        let outcome = td3_train(&mut env, &config.td3, RngStream::new(config.seed, TD3_STREAM))?;
        let curves = AUX_INDEX
            .iter()
            .map(|&(kind, i)| {
                let raw: Vec<f64> = outcome.logs.iter().map(|l| l.aux[i]).collect();
                let (moving_avg, moving_std) = moving_stats(&raw, config.td3.window).into_iter().unzip();
                Curve { rate_kind: kind, raw, moving_avg, moving_std }
            })
            .collect();
        let action = outcome.agent.act(&outcome.final_state)?;
        let report = env.evaluate(&action)?;
        runs.push(ModeRun {
            ris_mode: mode,
            bits: ris.bits,
            curves,
            final_sum_shannon: report.sum_shannon,
            final_sum_fbl: report.sum_fbl,
            final_report: Some(report),
        });
    }

    let mut episodes =
        CsvTable::new("td3_episodes.csv", "episode,sum_rate_bpcu,moving_avg,moving_std,rate_kind,ris_mode,bits");
    let mut finals = Vec::new();
    for run in &runs {
        for c in &run.curves {
            for (i, raw) in c.raw.iter().enumerate() {
                episodes.rows.push(format!(
                    "{},{raw:.6},{},{},{},{},{}",
                    i + 1,
                    fmt_opt(c.moving_avg[i]),
                    fmt_opt(c.moving_std[i]),
                    c.rate_kind.name(),
                    mode_name(run.ris_mode),
                    run.bits
                ));
            }
        }
        let mut table =
            CsvTable::new(format!("td3_final_rates_{}.csv", mode_name(run.ris_mode)), RateReport::CSV_HEADER);
        table.rows = run.final_report.as_ref().expect("set above").csv_rows();
        finals.push(table);
    }

    let summary = TrainSummary { reward_kind: t.rate_kind, runs };
    let mut report = ExperimentReport::new(config, &summary)?;
    report.kpi = reliability_annotations(config.fbl.error_target);
    if let Some(best) = summary.runs.iter().map(|r| r.final_sum_shannon).reduce(f64::max) {
        report.kpi.push(spectral_efficiency_annotation(best));
    }
    report.add_table(episodes);
    for f in finals {
        report.add_table(f);
    }
    Ok((summary, report))
}
