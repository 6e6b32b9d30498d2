//! Scenario geometry, log-distance path loss and fading draws for the direct,
//! BS→RIS and RIS→actuator segments.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::numerics::{sample_circular_gaussian, ComplexMatrix, ComplexVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Positions (m) of the base station, the surface and every actuator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeLayout {
    pub bs_position: Point2,
    pub ris_position: Point2,
    pub actuator_positions: Vec<Point2>,
    pub bs_antennas: usize,
    pub ris_elements: usize,
}

impl NodeLayout {
    /// Single-antenna BS at the origin, surface at (10, 10), one actuator at
    /// (100, 0), 512 elements.
    pub fn single_link() -> Self {
        NodeLayout {
            bs_position: Point2::new(0.0, 0.0),
            ris_position: Point2::new(10.0, 10.0),
            actuator_positions: vec![Point2::new(100.0, 0.0)],
            bs_antennas: 1,
            ris_elements: 512,
        }
    }

    /// Indoor factory floor: BS at (75, 75), surface on the edge at
    /// (150, 150), four single-antenna actuators, four BS antennas.
    pub fn factory_floor() -> Self {
        NodeLayout {
            bs_position: Point2::new(75.0, 75.0),
            ris_position: Point2::new(150.0, 150.0),
            actuator_positions: vec![
                Point2::new(135.0, 105.0),
                Point2::new(105.0, 135.0),
                Point2::new(120.0, 90.0),
                Point2::new(90.0, 120.0),
            ],
            bs_antennas: 4,
            ris_elements: 1024,
        }
    }

    pub fn with_elements(mut self, n: usize) -> Self {
        self.ris_elements = n;
        self
    }

    pub fn actuators(&self) -> usize {
        self.actuator_positions.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.ris_elements == 0 {
            return param("surface needs at least one element");
        }
        if self.bs_antennas == 0 {
            return param("base station needs at least one antenna");
        }
        if self.actuator_positions.is_empty() {
            return param("layout has no actuators");
        }
        let mut nodes = vec![self.bs_position, self.ris_position];
        nodes.extend(self.actuator_positions.iter().copied());
        for (i, a) in nodes.iter().enumerate() {
            if !(a.x.is_finite() && a.y.is_finite()) {
                return param(format!("node {i} has a non-finite coordinate"));
            }
            for b in &nodes[i + 1..] {
                if !(a.distance(b) > 0.0) {
                    return param(format!("coincident nodes at ({}, {})", a.x, a.y));
                }
            }
        }
        Ok(())
    }

    pub fn bs_ris_distance(&self) -> f64 {
        self.bs_position.distance(&self.ris_position)
    }

    pub fn ris_actuator_distance(&self, k: usize) -> f64 {
        self.ris_position.distance(&self.actuator_positions[k])
    }

    pub fn direct_distance(&self, k: usize) -> f64 {
        self.bs_position.distance(&self.actuator_positions[k])
    }
}

/// `PL(d) = intercept + slope * log10(d)` in dB, `d` in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathLossModel {
    pub intercept_db: f64,
    pub slope_db_per_decade: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        PathLossModel { intercept_db: 34.53, slope_db_per_decade: 38.0 }
    }
}

impl PathLossModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.slope_db_per_decade >= 0.0) || !self.intercept_db.is_finite() {
            return param("path-loss slope must be non-negative and intercept finite");
        }
        Ok(())
    }

    pub fn path_loss_db(&self, d: f64) -> Result<f64> {
        if !(d > 0.0) {
            return param(format!("distance must be positive, got {d}"));
        }
        Ok(self.intercept_db + self.slope_db_per_decade * d.log10())
    }

    /// Amplitude factor `10^(-PL/20)`.
    pub fn amplitude_gain(&self, d: f64) -> Result<f64> {
        Ok(10f64.powf(-self.path_loss_db(d)? / 20.0))
    }
}

/// Maps channel gains to SNR. Only `tx_power_db - noise_power_db` matters for
/// SNR; `direct_path_offset_db` rescales the BS→actuator path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkBudget {
    pub tx_power_db: f64,
    pub noise_power_db: f64,
    pub direct_path_offset_db: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        LinkBudget { tx_power_db: 0.0, noise_power_db: 0.0, direct_path_offset_db: 0.0 }
    }
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        if [self.tx_power_db, self.noise_power_db, self.direct_path_offset_db].iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite("link budget".into()))
        }
    }

    pub fn snr_offset_db(&self) -> f64 {
        self.tx_power_db - self.noise_power_db
    }

    /// Transmit-to-noise power ratio, linear.
    pub fn snr_scale(&self) -> f64 {
        10f64.powf(self.snr_offset_db() / 10.0)
    }
}

/// One block-static fading draw.
///
/// `ris_to_actuator[k]` holds the entries of the row vector `g_k^H`, so the
/// cascade for actuator `k` is `sum_n ris_to_actuator[k][n] * c_n * H[n, :]`
/// with `c_n` the surface reflection coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Per actuator, length M.
    pub direct: Vec<ComplexVector>,
    /// N x M.
    pub bs_to_ris: ComplexMatrix,
    /// Per actuator, length N.
    pub ris_to_actuator: Vec<ComplexVector>,
}

impl ChannelRealization {
    pub fn elements(&self) -> usize {
        self.bs_to_ris.rows()
    }

    pub fn antennas(&self) -> usize {
        self.bs_to_ris.cols()
    }

    pub fn actuators(&self) -> usize {
        self.ris_to_actuator.len()
    }

    /// Column `m` of the BS→RIS matrix.
    pub fn bs_to_ris_column(&self, m: usize) -> Vec<crate::C64> {
        self.bs_to_ris.column(m)
    }
}

/// Draws unit-variance Rayleigh fading for every scalar entry and applies
/// the segment path loss (and the direct-path offset).
pub fn sample_realization<R: Rng + ?Sized>(
    layout: &NodeLayout,
    model: &PathLossModel,
    budget: &LinkBudget,
    rng: &mut R,
) -> Result<ChannelRealization> {
    layout.validate()?;
    model.validate()?;
    budget.validate()?;
    let n = layout.ris_elements;
    let m = layout.bs_antennas;
    let direct_offset = 10f64.powf(budget.direct_path_offset_db / 20.0);

    let h_amp = model.amplitude_gain(layout.bs_ris_distance())?;
    let h = sample_circular_gaussian(rng, n * m, 1.0)?.scaled(h_amp);
    let bs_to_ris = ComplexMatrix::new(n, m, h.into_inner())?;

    let mut direct = Vec::with_capacity(layout.actuators());
    let mut ris_to_actuator = Vec::with_capacity(layout.actuators());
    for k in 0..layout.actuators() {
        let g_amp = model.amplitude_gain(layout.ris_actuator_distance(k))?;
        ris_to_actuator.push(sample_circular_gaussian(rng, n, 1.0)?.scaled(g_amp));
        let f_amp = model.amplitude_gain(layout.direct_distance(k))? * direct_offset;
        direct.push(sample_circular_gaussian(rng, m, 1.0)?.scaled(f_amp));
    }
    Ok(ChannelRealization { direct, bs_to_ris, ris_to_actuator })
}
