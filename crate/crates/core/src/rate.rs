//! SINR under zero-forcing precoding, Shannon and finite-blocklength (normal
//! approximation) rates, and the sum-rate reward.

use std::f64::consts::LOG2_E;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::numerics::{linear_to_db, q_inverse, ComplexMatrix, ComplexVector, C64};

/// Relative pivot threshold below which the channel Gram matrix is treated
/// as rank deficient.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FblParams {
    /// Channel uses per packet.
    pub blocklength: u64,
    /// Target decoding error probability.
    pub error_target: f64,
}

impl Default for FblParams {
    fn default() -> Self {
        FblParams { blocklength: 20, error_target: 1e-6 }
    }
}

impl FblParams {
    pub fn validate(&self) -> Result<()> {
        if self.blocklength == 0 {
            return param("blocklength must be at least one channel use");
        }
        if !(self.error_target > 0.0 && self.error_target < 1.0) {
            return param(format!("error target must lie in (0, 1), got {}", self.error_target));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateKind {
    Shannon,
    Fbl,
}

impl RateKind {
    pub fn name(&self) -> &'static str {
        match self {
            RateKind::Shannon => "shannon",
            RateKind::Fbl => "fbl",
        }
    }
}

/// Effective downlink rows `h_k = f_k + g_k^H Θ H`, one per actuator.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannelSet {
    rows: Vec<ComplexVector>,
}

impl EffectiveChannelSet {
    pub fn new(rows: Vec<ComplexVector>) -> Result<Self> {
        let m = rows.first().map(|r| r.len()).unwrap_or(0);
        if m == 0 {
            return param("effective channel set is empty");
        }
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::Dimension("effective rows differ in length".into()));
        }
        Ok(EffectiveChannelSet { rows })
    }

    pub fn users(&self) -> usize {
        self.rows.len()
    }

    pub fn antennas(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[ComplexVector] {
        &self.rows
    }

    pub fn matrix(&self) -> ComplexMatrix {
        ComplexMatrix::from_rows(&self.rows).expect("rows validated at construction")
    }
}

/// Zero-forcing precoder `W` (M x K): columns of `H^H (H H^H)^{-1}`, each
/// rescaled so every user gets `total_power / K`.
pub fn zero_forcing_precoder(channels: &EffectiveChannelSet, total_power: f64) -> Result<ComplexMatrix> {
    if !(total_power > 0.0) || !total_power.is_finite() {
        return param(format!("total power must be positive, got {total_power}"));
    }
    let k = channels.users();
    let m = channels.antennas();
    if k > m {
        return Err(Error::SingularChannel(format!("{k} users cannot be nulled with {m} antennas")));
    }
    let h = channels.matrix();
    let h_adj = h.adjoint();
    let gram = h.matmul(&h_adj)?;
    let mut w = h_adj.matmul(&gram.inverse(RANK_TOL)?)?;
    let per_user = (total_power / k as f64).sqrt();
    for j in 0..k {
        let norm = w.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::SingularChannel(format!("precoder column {j} degenerate")));
        }
        for r in 0..m {
            w[(r, j)] *= per_user / norm;
        }
    }
    Ok(w)
}

/// `SINR_k = |h_k w_k|^2 / (sum_{j≠k} |h_k w_j|^2 + σ^2)`.
pub fn sinr(channels: &EffectiveChannelSet, precoder: &ComplexMatrix, noise_power: f64) -> Result<Vec<f64>> {
    if precoder.rows() != channels.antennas() || precoder.cols() != channels.users() {
        return Err(Error::Dimension(format!(
            "precoder is {}x{}, channels are {}x{}",
            precoder.rows(),
            precoder.cols(),
            channels.users(),
            channels.antennas()
        )));
    }
    if !(noise_power >= 0.0) {
        return param("noise power must be non-negative");
    }
    let k = channels.users();
    let out = channels
        .rows()
        .iter()
        .enumerate()
        .map(|(user, row)| {
            let gains: Vec<f64> = (0..k)
                .map(|j| row.iter().enumerate().map(|(m, h)| h * precoder[(m, j)]).sum::<C64>().norm_sqr())
                .collect();
            let interference: f64 = gains.iter().enumerate().filter(|(j, _)| *j != user).map(|(_, g)| g).sum();
            let denom = interference + noise_power;
            if denom == 0.0 {
                if gains[user] == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                gains[user] / denom
            }
        })
        .collect();
    Ok(out)
}

/// `log2(1 + γ)` in bits per channel use.
pub fn shannon_rate(gamma: f64) -> f64 {
    (1.0 + gamma.max(0.0)).log2()
}

/// Normal-approximation rate
/// `max(0, log2(1+γ) - sqrt(V/n) Q^{-1}(ε) log2(e))`, `V = 1 - (1+γ)^{-2}`.
pub fn fbl_rate(gamma: f64, params: &FblParams) -> Result<f64> {
    params.validate()?;
    let gamma = gamma.max(0.0);
    let capacity = (1.0 + gamma).log2();
    let dispersion = 1.0 - (1.0 + gamma).powi(-2);
    let penalty = (dispersion / params.blocklength as f64).sqrt() * q_inverse(params.error_target)? * LOG2_E;
    Ok((capacity - penalty).max(0.0))
}

pub fn rate(gamma: f64, params: &FblParams, kind: RateKind) -> Result<f64> {
    match kind {
        RateKind::Shannon => Ok(shannon_rate(gamma)),
        RateKind::Fbl => fbl_rate(gamma, params),
    }
}

/// Sum of per-actuator rates. The reliability target enters through the
/// decoding error `ε` of the finite-blocklength rate.
pub fn sum_rate_reward(sinrs: &[f64], params: &FblParams, kind: RateKind) -> Result<f64> {
    sinrs.iter().map(|&g| rate(g, params, kind)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub sinr: Vec<f64>,
    pub shannon_rate: Vec<f64>,
    pub fbl_rate: Vec<f64>,
    pub sum_shannon: f64,
    pub sum_fbl: f64,
    pub reward: f64,
    pub reward_kind: RateKind,
    pub error_target: f64,
}

impl RateReport {
    pub fn from_sinrs(sinrs: &[f64], params: &FblParams, kind: RateKind) -> Result<Self> {
        let shannon: Vec<f64> = sinrs.iter().map(|&g| shannon_rate(g)).collect();
        let fbl = sinrs.iter().map(|&g| fbl_rate(g, params)).collect::<Result<Vec<_>>>()?;
        let sum_shannon = shannon.iter().sum();
        let sum_fbl = fbl.iter().sum();
        Ok(RateReport {
            sinr: sinrs.to_vec(),
            shannon_rate: shannon,
            fbl_rate: fbl,
            sum_shannon,
            sum_fbl,
            reward: match kind {
                RateKind::Shannon => sum_shannon,
                RateKind::Fbl => sum_fbl,
            },
            reward_kind: kind,
            error_target: params.error_target,
        })
    }

    pub fn rates(&self, kind: RateKind) -> &[f64] {
        match kind {
            RateKind::Shannon => &self.shannon_rate,
            RateKind::Fbl => &self.fbl_rate,
        }
    }

    pub const CSV_HEADER: &'static str = "actuator_id,sinr_db,shannon_bpcu,fbl_bpcu";

    /// One line per actuator, matching [`Self::CSV_HEADER`].
    pub fn csv_rows(&self) -> Vec<String> {
        (0..self.sinr.len())
            .map(|k| {
                format!("{},{:.6},{:.6},{:.6}", k, linear_to_db(self.sinr[k]), self.shannon_rate[k], self.fbl_rate[k])
            })
            .collect()
    }
}
