//! Single-link SNR statistics for phase-optimized and relay-mode surfaces,
//! with and without the direct path, and the link-budget calibration that
//! anchors them.

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, ExperimentKind};
use super::report::{CsvTable, ExperimentReport};
use crate::channel::{sample_realization, LinkBudget, NodeLayout, PathLossModel};
use crate::error::{param, Error, Result};
use crate::numerics::{percentile_sorted, RngStream, SummaryStats, C64};
use crate::ris::{aligned_phases, cascade_response, optimal_phases, AmplitudeModel, QuantizationSpec, RisState};

pub(crate) const SNR_STREAM: u64 = 1;

/// Trial counts below this make the 0.1/99.9 % span unreliable.
pub const MIN_STABLE_TRIALS: usize = 1000;

/// Number of steps in the emitted CDF quantile grid.
const CDF_GRID: usize = 1000;

const CALIBRATION_TOL_DB: f64 = 1e-3;
const CALIBRATION_MAX_ITER: usize = 200;
const TX_BRACKET_DB: (f64, f64) = (-100.0, 400.0);
const DIRECT_BRACKET_DB: (f64, f64) = (-120.0, 120.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrCase {
    OptimizedDirect,
    OptimizedNoDirect,
    RelayDirect,
    RelayNoDirect,
}

impl SnrCase {
    pub const ALL: [SnrCase; 4] =
        [SnrCase::OptimizedDirect, SnrCase::OptimizedNoDirect, SnrCase::RelayDirect, SnrCase::RelayNoDirect];

    pub fn name(&self) -> &'static str {
        match self {
            SnrCase::OptimizedDirect => "optimized_direct",
            SnrCase::OptimizedNoDirect => "optimized_no_direct",
            SnrCase::RelayDirect => "relay_direct",
            SnrCase::RelayNoDirect => "relay_no_direct",
        }
    }
}

/// Budget-free channel quantities of one trial. `direct` excludes the
/// direct-path offset so calibration can rescale it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrSample {
    pub direct: C64,
    /// Cascade with phases co-phased among themselves.
    pub optimized: C64,
    /// Cascade with phases co-phased onto the direct path.
    pub aligned: C64,
    /// Cascade with every phase at the relay setting.
    pub relay: C64,
}

impl SnrSample {
    pub fn snr_db(&self, case: SnrCase, budget: &LinkBudget) -> f64 {
        let a = 10f64.powf(budget.direct_path_offset_db / 20.0);
        let y = match case {
            SnrCase::OptimizedDirect => self.direct * a + self.aligned,
            SnrCase::OptimizedNoDirect => self.optimized,
            SnrCase::RelayDirect => self.direct * a + self.relay,
            SnrCase::RelayNoDirect => self.relay,
        };
        budget.snr_offset_db() + 10.0 * y.norm_sqr().log10()
    }
}

fn draw_sample(
    layout: &NodeLayout,
    path_loss: &PathLossModel,
    amplitude: AmplitudeModel,
    quantization: QuantizationSpec,
    rng: RngStream,
) -> Result<SnrSample> {
    let mut gen = rng.generator();
    let real = sample_realization(layout, path_loss, &LinkBudget::default(), &mut gen)?;
    let g = real.ris_to_actuator[0].as_slice();
    let h = real.bs_to_ris_column(0);
    let direct = real.direct[0][0];
    let optimized = RisState::new(&optimal_phases(g, &h)?, amplitude, quantization)?;
    let aligned = RisState::new(&aligned_phases(g, &h, direct.arg())?, amplitude, quantization)?;
    let relay = RisState::relay(real.elements(), amplitude)?;
    Ok(SnrSample {
        direct,
        optimized: cascade_response(&real, &optimized, 0)?[0],
        aligned: cascade_response(&real, &aligned, 0)?[0],
        relay: cascade_response(&real, &relay, 0)?[0],
    })
}

/// Draws `trials` independent single-antenna channels; trial `t` uses
/// `rng.derive(t)`.
pub fn draw_snr_samples(
    layout: &NodeLayout,
    path_loss: &PathLossModel,
    amplitude: AmplitudeModel,
    quantization: QuantizationSpec,
    trials: usize,
    rng: RngStream,
) -> Result<Vec<SnrSample>> {
    if layout.bs_antennas != 1 {
        return param(format!("SNR statistics need a single-antenna BS, got {}", layout.bs_antennas));
    }
    if trials == 0 {
        return param("at least one trial required");
    }
    (0..trials)
        .into_par_iter()
        .map(|t| draw_sample(layout, path_loss, amplitude, quantization, rng.derive(t as u64)))
        .collect()
}

pub fn sorted_snr_db(samples: &[SnrSample], case: SnrCase, budget: &LinkBudget) -> Vec<f64> {
    let mut v: Vec<f64> = samples.iter().map(|s| s.snr_db(case, budget)).collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn case_stats(samples: &[SnrSample], case: SnrCase, budget: &LinkBudget) -> Result<SummaryStats> {
    SummaryStats::from_sorted_db(&sorted_snr_db(samples, case, budget))
}

/// Bisection for the root of an increasing function on `[lo, hi]`.
fn bisect(mut lo: f64, mut hi: f64, what: &str, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let (flo, fhi) = (f(lo)?, f(hi)?);
    if !(flo <= 0.0 && fhi >= 0.0) {
        return Err(Error::Calibration(format!(
            "{what}: target not bracketed on [{lo}, {hi}] dB (residuals {flo:.3}, {fhi:.3})"
        )));
    }
    for _ in 0..CALIBRATION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm.abs() < CALIBRATION_TOL_DB {
            return Ok(mid);
        }
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Calibration(format!("{what}: no convergence after {CALIBRATION_MAX_ITER} steps")))
}

/// Fits `tx_power_db` so the optimized no-direct median hits
/// `target_optimized_db`, then `direct_path_offset_db` so the relay
/// with-direct median hits `target_relay_direct_db`. Noise power is kept.
pub fn calibrate_on_samples(
    samples: &[SnrSample],
    base: LinkBudget,
    target_optimized_db: f64,
    target_relay_direct_db: f64,
) -> Result<LinkBudget> {
    let median = |case: SnrCase, b: &LinkBudget| -> Result<f64> { Ok(case_stats(samples, case, b)?.median_db) };
    let tx = bisect(TX_BRACKET_DB.0, TX_BRACKET_DB.1, "transmit power", |tx| {
        let b = LinkBudget { tx_power_db: tx, ..base };
        Ok(median(SnrCase::OptimizedNoDirect, &b)? - target_optimized_db)
    })?;
    let with_tx = LinkBudget { tx_power_db: tx, ..base };
    let offset = bisect(DIRECT_BRACKET_DB.0, DIRECT_BRACKET_DB.1, "direct-path offset", |d| {
        let b = LinkBudget { direct_path_offset_db: d, ..with_tx };
        Ok(median(SnrCase::RelayDirect, &b)? - target_relay_direct_db)
    })?;
    Ok(LinkBudget { direct_path_offset_db: offset, ..with_tx })
}

fn samples_for(config: &ExperimentConfig) -> Result<Vec<SnrSample>> {
    draw_snr_samples(
        &config.layout()?,
        &config.path_loss,
        config.ris.amplitude()?,
        config.ris.quantization()?,
        config.trials(),
        RngStream::new(config.seed, SNR_STREAM),
    )
}

fn check_kind(config: &ExperimentConfig) -> Result<()> {
    if config.experiment != ExperimentKind::SnrCdf {
        return Err(Error::Config(format!("expected an snr-cdf config, got {}", config.experiment.name())));
    }
    Ok(())
}

fn trial_warnings(config: &ExperimentConfig) -> Vec<String> {
    if config.trials() < MIN_STABLE_TRIALS {
        vec![format!("{} trials is below {MIN_STABLE_TRIALS}; the 0.1-99.9% range is unstable", config.trials())]
    } else {
        Vec::new()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationSummary {
    pub budget: LinkBudget,
    pub optimized_no_direct_median_db: f64,
    pub relay_direct_median_db: f64,
    pub relay_no_direct_median_db: f64,
    pub trials: usize,
}

/// Calibrated budget for `config` plus a report documenting it.
pub fn calibrate_budget(config: &ExperimentConfig) -> Result<(LinkBudget, ExperimentReport)> {
    check_kind(config)?;
    let samples = samples_for(config)?;
    let b = &config.budget;
    let budget =
        calibrate_on_samples(&samples, b.link_budget(), b.target_optimized_median_db, b.target_relay_direct_median_db)?;
    let summary = CalibrationSummary {
        budget,
        optimized_no_direct_median_db: case_stats(&samples, SnrCase::OptimizedNoDirect, &budget)?.median_db,
        relay_direct_median_db: case_stats(&samples, SnrCase::RelayDirect, &budget)?.median_db,
        relay_no_direct_median_db: case_stats(&samples, SnrCase::RelayNoDirect, &budget)?.median_db,
        trials: samples.len(),
    };
    let mut report = ExperimentReport::new(config, &summary)?;
    report.warnings = trial_warnings(config);
    let mut table = CsvTable::new(
        "calibration.csv",
        "tx_power_db,noise_power_db,direct_path_offset_db,optimized_no_direct_median_db,relay_direct_median_db",
    );
    table.rows.push(format!(
        "{:.6},{:.6},{:.6},{:.6},{:.6}",
        budget.tx_power_db,
        budget.noise_power_db,
        budget.direct_path_offset_db,
        summary.optimized_no_direct_median_db,
        summary.relay_direct_median_db
    ));
    report.add_table(table);
    Ok((budget, report))
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseSummary {
    pub case: SnrCase,
    pub median_db: f64,
    pub range_db: f64,
    pub p001_db: f64,
    pub p999_db: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SnrCdfSummary {
    pub budget: LinkBudget,
    pub calibrated: bool,
    pub trials: usize,
    pub cases: Vec<CaseSummary>,
}

impl SnrCdfSummary {
    pub fn case(&self, case: SnrCase) -> &CaseSummary {
        self.cases.iter().find(|c| c.case == case).expect("all cases present")
    }
}

/// Runs the four SNR cases on shared channel draws and emits the empirical
/// CDFs (`snr_cdf.csv`) and per-case statistics (`snr_summary.csv`).
pub fn run_snr_cdf(config: &ExperimentConfig) -> Result<(SnrCdfSummary, ExperimentReport)> {
    check_kind(config)?;
    let samples = samples_for(config)?;
    let b = &config.budget;
    let calibrated = b.calibrate.unwrap_or(true);
    let budget = if calibrated {
        calibrate_on_samples(&samples, b.link_budget(), b.target_optimized_median_db, b.target_relay_direct_median_db)?
    } else {
        b.link_budget()
    };

    let mut cdf = CsvTable::new("snr_cdf.csv", "case,cdf,snr_db");
    let mut stats = CsvTable::new("snr_summary.csv", "case,median_db,range_db,p001_db,p999_db,trials");
    let mut cases = Vec::new();
    for case in SnrCase::ALL {
        let sorted = sorted_snr_db(&samples, case, &budget);
        for i in 0..=CDF_GRID {
            let p = i as f64 / CDF_GRID as f64;
            cdf.rows.push(format!("{},{p:.3},{:.6}", case.name(), percentile_sorted(&sorted, p)?));
        }
        let s = SummaryStats::from_sorted_db(&sorted)?;
        let c = CaseSummary {
            case,
            median_db: s.median_db,
            range_db: s.range_db,
            p001_db: percentile_sorted(&sorted, crate::numerics::RANGE_LOW)?,
            p999_db: percentile_sorted(&sorted, crate::numerics::RANGE_HIGH)?,
        };
        stats.rows.push(format!(
            "{},{:.6},{:.6},{:.6},{:.6},{}",
            case.name(),
            c.median_db,
            c.range_db,
            c.p001_db,
            c.p999_db,
            samples.len()
        ));
        cases.push(c);
    }
    let summary = SnrCdfSummary { budget, calibrated, trials: samples.len(), cases };
    let mut report = ExperimentReport::new(config, &summary)?;
    report.warnings = trial_warnings(config);
    report.add_table(cdf);
    report.add_table(stats);
    Ok((summary, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ris::effective_channel;

    fn small_config(trials: usize) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(ExperimentKind::SnrCdf, 11).unwrap();
        c.trials = Some(trials);
        c.scenario.elements = Some(64);
        c
    }

    #[test]
    fn aligned_cascade_adds_to_direct_magnitude() {
        let layout = NodeLayout::single_link().with_elements(32);
        let pl = PathLossModel::default();
        let budget = LinkBudget { direct_path_offset_db: -20.0, ..LinkBudget::default() };
        for t in 0..20 {
            let rng = RngStream::new(5, 0).derive(t);
            let s = draw_sample(&layout, &pl, AmplitudeModel::ideal(), QuantizationSpec::continuous(), rng).unwrap();
            let a = 10f64.powf(-1.0);
            let combined = (s.direct * a + s.aligned).norm();
            assert!((combined - (s.direct.norm() * a + s.optimized.norm())).abs() < 1e-9 * combined);

            // Against a directly built realization with the offset applied.
            let mut gen = rng.generator();
            let real = sample_realization(&layout, &pl, &budget, &mut gen).unwrap();
            let g = real.ris_to_actuator[0].as_slice();
            let h = real.bs_to_ris_column(0);
            let ris = RisState::ideal(&aligned_phases(g, &h, real.direct[0][0].arg()).unwrap()).unwrap();
            let y = effective_channel(&real, &ris, 0, true).unwrap().norm_sqr();
            assert!((10.0 * y.log10() - s.snr_db(SnrCase::OptimizedDirect, &budget)).abs() < 1e-9);
        }
    }

    #[test]
    fn calibration_hits_both_anchors() {
        let c = small_config(2000);
        let (budget, report) = calibrate_budget(&c).unwrap();
        let samples = samples_for(&c).unwrap();
        let opt = case_stats(&samples, SnrCase::OptimizedNoDirect, &budget).unwrap().median_db;
        let rel = case_stats(&samples, SnrCase::RelayDirect, &budget).unwrap().median_db;
        assert!((opt - 21.0).abs() < 0.01);
        assert!((rel - 27.71).abs() < 0.01);
        assert_eq!(report.files, vec!["calibration.csv".to_string()]);
    }

    #[test]
    fn unreachable_anchor_is_a_calibration_error() {
        let mut c = small_config(500);
        c.budget.target_relay_direct_median_db = 1e4;
        assert!(matches!(calibrate_budget(&c), Err(Error::Calibration(_))));
    }

    #[test]
    fn snr_depends_only_on_power_difference() {
        let mut c = small_config(300);
        c.budget.calibrate = Some(false);
        c.budget.tx_power_db = Some(150.0);
        c.budget.noise_power_db = 0.0;
        let (a, _) = run_snr_cdf(&c).unwrap();
        c.budget.tx_power_db = Some(153.0103);
        c.budget.noise_power_db = 3.0103;
        let (b, _) = run_snr_cdf(&c).unwrap();
        for (x, y) in a.cases.iter().zip(&b.cases) {
            assert!((x.median_db - y.median_db).abs() < 1e-9);
            assert!((x.range_db - y.range_db).abs() < 1e-9);
        }
    }

    #[test]
    fn few_trials_flagged() {
        let mut c = small_config(200);
        c.budget.calibrate = Some(false);
        let (_, report) = run_snr_cdf(&c).unwrap();
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn cdf_rows_are_monotone_and_span_unit_interval() {
        let mut c = small_config(1000);
        c.budget.calibrate = Some(false);
        let (_, report) = run_snr_cdf(&c).unwrap();
        let cdf = report.table("snr_cdf.csv").unwrap();
        assert_eq!(cdf.rows.len(), 4 * (CDF_GRID + 1));
        for chunk in cdf.rows.chunks(CDF_GRID + 1) {
            let parsed: Vec<(f64, f64)> = chunk
                .iter()
                .map(|r| {
                    let f: Vec<&str> = r.split(',').collect();
                    (f[1].parse().unwrap(), f[2].parse().unwrap())
                })
                .collect();
            assert_eq!(parsed[0].0, 0.0);
            assert_eq!(parsed[CDF_GRID].0, 1.0);
            assert!(parsed.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 >= w[0].1));
        }
    }
}
