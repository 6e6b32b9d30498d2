//! The reflecting surface: per-element phase state, phase controllers, the
//! practical phase-dependent amplitude response and the received-signal
//! evaluation `f + g^H Θ h`.
//!
//! Phases live in `(0, 2π]`; a zero phase is represented as `2π`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::error::{param, Error, Result};
use crate::numerics::{ComplexVector, C64};

/// Wraps an angle into `(0, 2π]`.
pub fn wrap_phase(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r == 0.0 {
        TAU
    } else {
        r
    }
}

/// Smallest absolute angular difference, in `[0, π]`.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmplitudeMode {
    Ideal,
    Practical,
}

/// Phase-dependent reflection amplitude
/// `β(θ) = (1 - β_min) * ((sin(θ - φ) + 1) / 2)^α + β_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeModel {
    beta_min: f64,
    phi: f64,
    alpha: f64,
    mode: AmplitudeMode,
}

impl AmplitudeModel {
    pub const DEFAULT_BETA_MIN: f64 = 0.8;
    pub const DEFAULT_PHI: f64 = 0.43 * PI;
    pub const DEFAULT_ALPHA: f64 = 1.6;

    /// Unit amplitude at every phase.
    pub fn ideal() -> Self {
        AmplitudeModel { beta_min: 1.0, phi: 0.0, alpha: 1.0, mode: AmplitudeMode::Ideal }
    }

    pub fn practical(beta_min: f64, phi: f64, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return param(format!("amplitude exponent must be positive, got {alpha}"));
        }
        if !(0.0..=1.0).contains(&beta_min) {
            return param(format!("beta_min must lie in [0, 1], got {beta_min}"));
        }
        if !phi.is_finite() {
            return param("amplitude phase offset must be finite");
        }
        Ok(AmplitudeModel { beta_min, phi, alpha, mode: AmplitudeMode::Practical })
    }

    pub fn practical_default() -> Self {
        Self::practical(Self::DEFAULT_BETA_MIN, Self::DEFAULT_PHI, Self::DEFAULT_ALPHA)
            .expect("default amplitude constants are valid")
    }

    pub fn mode(&self) -> AmplitudeMode {
        self.mode
    }

    pub fn beta_min(&self) -> f64 {
        match self.mode {
            AmplitudeMode::Ideal => 1.0,
            AmplitudeMode::Practical => self.beta_min,
        }
    }

    pub fn amplitude(&self, theta: f64) -> f64 {
        match self.mode {
            AmplitudeMode::Ideal => 1.0,
            AmplitudeMode::Practical => {
                let bracket = (((theta - self.phi).sin() + 1.0) / 2.0).clamp(0.0, 1.0);
                (1.0 - self.beta_min) * bracket.powf(self.alpha) + self.beta_min
            }
        }
    }
}

/// Uniform `b`-bit phase grid `{2πk / 2^b : k = 1..2^b}`; `b = 0` means
/// continuous phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QuantizationSpec {
    pub bits: u32,
}

impl QuantizationSpec {
    pub const MAX_BITS: u32 = 16;

    pub fn new(bits: u32) -> Result<Self> {
        if bits > Self::MAX_BITS {
            return param(format!("at most {} quantization bits supported", Self::MAX_BITS));
        }
        Ok(QuantizationSpec { bits })
    }

    pub fn continuous() -> Self {
        QuantizationSpec { bits: 0 }
    }

    pub fn is_continuous(&self) -> bool {
        self.bits == 0
    }

    fn level_count(&self) -> u64 {
        1u64 << self.bits
    }

    fn step(&self) -> f64 {
        TAU / self.level_count() as f64
    }

    /// The phase levels in ascending order; empty for continuous phases.
    pub fn levels(&self) -> Vec<f64> {
        if self.is_continuous() {
            return Vec::new();
        }
        let step = self.step();
        (1..=self.level_count()).map(|k| k as f64 * step).collect()
    }

    /// Nearest level in circular distance; on a tie the numerically smaller
    /// level wins.
    pub fn quantize(&self, theta: f64) -> f64 {
        let theta = wrap_phase(theta);
        if self.is_continuous() {
            return theta;
        }
        let levels = self.level_count();
        let step = self.step();
        let x = theta / step;
        let lo = x.floor();
        let frac = x - lo;
        let lo = lo as u64;
        // Level index k in 1..=levels; index 0 is the level 2π.
        let to_level = |k: u64| if k.is_multiple_of(levels) { levels } else { k % levels };
        let (below, above) = (to_level(lo), to_level(lo + 1));
        const TIE: f64 = 1e-9;
        let k = if frac < 0.5 - TIE {
            below
        } else if frac > 0.5 + TIE {
            above
        } else {
            below.min(above)
        };
        k as f64 * step
    }
}

/// Applies [`QuantizationSpec::quantize`] element-wise.
pub fn quantize_phases(phases: &[f64], spec: &QuantizationSpec) -> Vec<f64> {
    phases.iter().map(|&t| spec.quantize(t)).collect()
}

/// Surface configuration `Θ = diag(β_n(θ_n) e^{iθ_n})`.
#[derive(Debug, Clone, PartialEq)]
pub struct RisState {
    phases: Vec<f64>,
    amplitude: AmplitudeModel,
    quantization: QuantizationSpec,
}

impl RisState {
    /// Wraps the requested phases and snaps them to the quantization grid.
    pub fn new(phases: &[f64], amplitude: AmplitudeModel, quantization: QuantizationSpec) -> Result<Self> {
        if phases.is_empty() {
            return param("surface state needs at least one element");
        }
        if phases.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("phase".into()));
        }
        Ok(RisState { phases: quantize_phases(phases, &quantization), amplitude, quantization })
    }

    /// All phases zero: the surface reflects without alignment.
    pub fn relay(n: usize, amplitude: AmplitudeModel) -> Result<Self> {
        Self::new(&vec![TAU; n], amplitude, QuantizationSpec::continuous())
    }

    pub fn ideal(phases: &[f64]) -> Result<Self> {
        Self::new(phases, AmplitudeModel::ideal(), QuantizationSpec::continuous())
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn amplitude_model(&self) -> &AmplitudeModel {
        &self.amplitude
    }

    pub fn quantization(&self) -> &QuantizationSpec {
        &self.quantization
    }

    /// Same amplitude model and phases, different grid.
    pub fn requantized(&self, quantization: QuantizationSpec) -> Self {
        RisState { phases: quantize_phases(&self.phases, &quantization), amplitude: self.amplitude, quantization }
    }

    /// Diagonal entries `β_n e^{iθ_n}`.
    pub fn coefficients(&self) -> Vec<C64> {
        self.phases.iter().map(|&t| C64::from_polar(self.amplitude.amplitude(t), t)).collect()
    }
}

fn check_nonzero(v: &[C64], what: &str) -> Result<()> {
    match v.iter().position(|z| z.norm_sqr() == 0.0) {
        Some(i) => Err(Error::DegenerateChannel(format!("{what} entry {i} is zero"))),
        None => Ok(()),
    }
}

/// Co-phasing rule `θ_n = -(ξ_n + ζ_n)`, where `ξ_n` is the phase of the
/// `n`-th entry of the row `g^H` and `ζ_n` that of `h`. Every cascade summand
/// becomes real and non-negative.
pub fn optimal_phases(g_row: &[C64], h: &[C64]) -> Result<Vec<f64>> {
    aligned_phases(g_row, h, 0.0)
}

/// Co-phases every cascade summand to `reference` (e.g. the phase of the
/// direct path, which maximises `|f + g^H Θ h|`).
pub fn aligned_phases(g_row: &[C64], h: &[C64], reference: f64) -> Result<Vec<f64>> {
    if g_row.len() != h.len() {
        return Err(Error::Dimension(format!("g has {} entries, h has {}", g_row.len(), h.len())));
    }
    check_nonzero(g_row, "g")?;
    check_nonzero(h, "h")?;
    Ok(g_row.iter().zip(h).map(|(g, h)| wrap_phase(reference - (g.arg() + h.arg()))).collect())
}

/// `g_k^H Θ H` for actuator `k`: one complex value per BS antenna.
pub fn cascade_response(realization: &ChannelRealization, ris: &RisState, actuator: usize) -> Result<ComplexVector> {
    let n = realization.elements();
    if ris.len() != n {
        return Err(Error::Dimension(format!("surface has {} elements, channel {n}", ris.len())));
    }
    let g =
        realization.ris_to_actuator.get(actuator).ok_or_else(|| Error::Parameter(format!("no actuator {actuator}")))?;
    let m = realization.antennas();
    let coeffs = ris.coefficients();
    let mut out = vec![C64::new(0.0, 0.0); m];
    for (i, (gi, ci)) in g.iter().zip(&coeffs).enumerate() {
        let w = gi * ci;
        for (o, hm) in out.iter_mut().zip(realization.bs_to_ris.row(i)) {
            *o += w * hm;
        }
    }
    ComplexVector::new(out)
}

/// Effective channel row `f_k + g_k^H Θ H` (direct term omitted on request).
pub fn effective_channel(
    realization: &ChannelRealization,
    ris: &RisState,
    actuator: usize,
    include_direct: bool,
) -> Result<ComplexVector> {
    let cascade = cascade_response(realization, ris, actuator)?;
    if !include_direct {
        return Ok(cascade);
    }
    let f = &realization.direct[actuator];
    ComplexVector::new(cascade.iter().zip(f.iter()).map(|(c, f)| c + f).collect())
}

/// Received power per unit transmit power, `|f + g^H Θ h|^2`. With several BS
/// antennas this is the squared norm of the effective channel row, i.e. the
/// gain of matched-filter transmission.
pub fn received_signal_power(
    realization: &ChannelRealization,
    ris: &RisState,
    actuator: usize,
    include_direct: bool,
) -> Result<f64> {
    Ok(effective_channel(realization, ris, actuator, include_direct)?.norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_realization, LinkBudget, NodeLayout, PathLossModel};
    use crate::numerics::{sample_circular_gaussian, ComplexMatrix, RngStream};
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn single_antenna(g: Vec<C64>, h: Vec<C64>, f: C64) -> ChannelRealization {
        let n = g.len();
        ChannelRealization {
            direct: vec![ComplexVector::new(vec![f]).unwrap()],
            bs_to_ris: ComplexMatrix::new(n, 1, h).unwrap(),
            ris_to_actuator: vec![ComplexVector::new(g).unwrap()],
        }
    }

    fn random_pair(seed: u64, n: usize) -> (Vec<C64>, Vec<C64>) {
        let mut rng = RngStream::new(seed, 0).generator();
        let g = sample_circular_gaussian(&mut rng, n, 1.0).unwrap().into_inner();
        let h = sample_circular_gaussian(&mut rng, n, 1.0).unwrap().into_inner();
        (g, h)
    }

    #[test]
    fn amplitude_examples() {
        let m = AmplitudeModel::practical_default();
        let phi = AmplitudeModel::DEFAULT_PHI;
        assert_relative_eq!(m.amplitude(phi + FRAC_PI_2), 1.0, epsilon = 1e-12);
        assert_relative_eq!(m.amplitude(phi - FRAC_PI_2), 0.8, epsilon = 1e-12);
        let ideal = AmplitudeModel::ideal();
        for t in [0.1, 1.0, 3.0, 6.0] {
            assert_eq!(ideal.amplitude(t), 1.0);
        }
        assert!(matches!(AmplitudeModel::practical(0.8, 0.0, 0.0), Err(Error::Parameter(_))));
        assert!(AmplitudeModel::practical(0.8, 0.0, -1.0).is_err());
    }

    #[test]
    fn amplitude_periodic_and_bounded() {
        let m = AmplitudeModel::practical(0.3, 0.7, 2.3).unwrap();
        for i in 0..500 {
            let t = -10.0 + i as f64 * 0.05;
            let a = m.amplitude(t);
            assert!((0.3..=1.0).contains(&a));
            assert_relative_eq!(a, m.amplitude(t + TAU), epsilon = 1e-12);
        }
    }

    #[test]
    fn wrap_convention() {
        assert_eq!(wrap_phase(0.0), TAU);
        assert_eq!(wrap_phase(TAU), TAU);
        assert_relative_eq!(wrap_phase(-FRAC_PI_2), 3.0 * FRAC_PI_2);
        assert_relative_eq!(wrap_phase(7.0), 7.0 - TAU);
    }

    #[test]
    fn optimal_phase_examples() {
        let e = C64::from_polar(1.0, FRAC_PI_4);
        let t = optimal_phases(&[e], &[e]).unwrap();
        assert_relative_eq!(t[0], 3.0 * FRAC_PI_2, epsilon = 1e-12);
        let one = C64::new(1.0, 0.0);
        assert_eq!(optimal_phases(&[one, one * 2.0], &[one * 0.5, one]).unwrap(), vec![TAU, TAU]);
        let zero = C64::new(0.0, 0.0);
        assert!(matches!(optimal_phases(&[zero], &[one]), Err(Error::DegenerateChannel(_))));
        assert!(optimal_phases(&[one], &[one, one]).is_err());
    }

    #[test]
    fn optimal_phases_add_coherently() {
        let (g, h) = random_pair(31, 257);
        let ris = RisState::ideal(&optimal_phases(&g, &h).unwrap()).unwrap();
        let real = single_antenna(g.clone(), h.clone(), C64::new(0.0, 0.0));
        let cascade = cascade_response(&real, &ris, 0).unwrap()[0];
        let brute: f64 = g.iter().zip(&h).map(|(a, b)| a.norm() * b.norm()).sum();
        assert_relative_eq!(cascade.norm(), brute, max_relative = 1e-12);
        assert!(cascade.im.abs() < 1e-9 * brute);
        let power = received_signal_power(&real, &ris, 0, false).unwrap();
        assert_relative_eq!(power, brute * brute, max_relative = 1e-12);
    }

    #[test]
    fn aligned_phases_follow_reference() {
        let (g, h) = random_pair(32, 64);
        let reference = 1.234;
        let ris = RisState::ideal(&aligned_phases(&g, &h, reference).unwrap()).unwrap();
        let real = single_antenna(g, h, C64::new(0.0, 0.0));
        let cascade = cascade_response(&real, &ris, 0).unwrap()[0];
        assert_relative_eq!(cascade.arg(), reference, epsilon = 1e-9);
    }

    #[test]
    fn single_element_cascade() {
        let g = C64::from_polar(0.3, 2.0);
        let h = C64::from_polar(1.7, -0.4);
        let theta = optimal_phases(&[g], &[h]).unwrap();
        let real = single_antenna(vec![g], vec![h], C64::new(0.0, 0.0));
        let c = cascade_response(&real, &RisState::ideal(&theta).unwrap(), 0).unwrap()[0];
        assert_relative_eq!(c.re, 0.3 * 1.7, max_relative = 1e-12);
        assert!(c.im.abs() < 1e-12);
    }

    #[test]
    fn relay_is_plain_inner_product() {
        let (g, h) = random_pair(33, 40);
        let real = single_antenna(g.clone(), h.clone(), C64::new(0.0, 0.0));
        let ris = RisState::relay(40, AmplitudeModel::ideal()).unwrap();
        let c = cascade_response(&real, &ris, 0).unwrap()[0];
        let dot: C64 = g.iter().zip(&h).map(|(a, b)| a * b).sum();
        assert!((c - dot).norm() < 1e-12 * dot.norm().max(1.0));
    }

    #[test]
    fn cascade_matches_explicit_diagonal_product() {
        let layout = NodeLayout::factory_floor().with_elements(12);
        let real = sample_realization(
            &layout,
            &PathLossModel { intercept_db: 0.0, slope_db_per_decade: 0.0 },
            &LinkBudget::default(),
            &mut RngStream::new(34, 0).generator(),
        )
        .unwrap();
        let phases: Vec<f64> = (0..12).map(|i| 0.37 * i as f64 + 0.1).collect();
        let ris = RisState::new(&phases, AmplitudeModel::practical_default(), QuantizationSpec::continuous()).unwrap();
        // Oracle: build diag(Θ) as a full N x N matrix and multiply g^H · Θ · H.
        let n = 12;
        let mut theta = ComplexMatrix::zeros(n, n);
        for (i, c) in ris.coefficients().into_iter().enumerate() {
            theta[(i, i)] = c;
        }
        for k in 0..4 {
            let g_row = ComplexMatrix::new(1, n, real.ris_to_actuator[k].as_slice().to_vec()).unwrap();
            let expect = g_row.matmul(&theta).unwrap().matmul(&real.bs_to_ris).unwrap();
            let got = cascade_response(&real, &ris, k).unwrap();
            for m in 0..4 {
                assert!((got[m] - expect[(0, m)]).norm() <= 1e-12 * expect[(0, m)].norm().max(1e-300));
            }
        }
    }

    #[test]
    fn zero_amplitude_leaves_direct_path() {
        let (g, h) = random_pair(35, 8);
        let f = C64::new(0.3, -0.2);
        let real = single_antenna(g, h, f);
        let dead = AmplitudeModel::practical(0.0, 0.0, 1.0).unwrap();
        // sin(θ - 0) = -1 at θ = 3π/2 so every β_n is exactly zero.
        let ris = RisState::new(&[3.0 * FRAC_PI_2; 8], dead, QuantizationSpec::continuous()).unwrap();
        assert_relative_eq!(received_signal_power(&real, &ris, 0, true).unwrap(), f.norm_sqr(), epsilon = 1e-15);
    }

    #[test]
    fn received_power_matches_signal_model() {
        let (g, h) = random_pair(36, 30);
        let f = C64::new(-0.8, 1.1);
        let real = single_antenna(g.clone(), h.clone(), f);
        let phases: Vec<f64> = (0..30).map(|i| (i as f64 * 1.3).sin() * 3.0).collect();
        let model = AmplitudeModel::practical_default();
        let ris = RisState::new(&phases, model, QuantizationSpec::continuous()).unwrap();
        let mut y = f;
        for n in 0..30 {
            let t = wrap_phase(phases[n]);
            y += g[n] * C64::from_polar(model.amplitude(t), t) * h[n];
        }
        assert_relative_eq!(received_signal_power(&real, &ris, 0, true).unwrap(), y.norm_sqr(), max_relative = 1e-12);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let (g, h) = random_pair(37, 5);
        let real = single_antenna(g, h, C64::new(0.0, 0.0));
        let ris = RisState::ideal(&[1.0; 4]).unwrap();
        assert!(matches!(cascade_response(&real, &ris, 0), Err(Error::Dimension(_))));
        let ris = RisState::ideal(&[1.0; 5]).unwrap();
        assert!(cascade_response(&real, &ris, 1).is_err());
    }

    #[test]
    fn quantizer_examples() {
        let q2 = QuantizationSpec::new(2).unwrap();
        assert_eq!(q2.levels(), vec![FRAC_PI_2, PI, 3.0 * FRAC_PI_2, TAU]);
        // Brute force over the four levels for θ = 0.1.
        let best = q2
            .levels()
            .into_iter()
            .min_by(|a, b| circular_distance(0.1, *a).total_cmp(&circular_distance(0.1, *b)))
            .unwrap();
        assert_eq!(best, TAU);
        assert_eq!(q2.quantize(0.1), TAU);
        assert_eq!(q2.quantize(3.0 * PI / 4.0), FRAC_PI_2);
        assert_eq!(q2.quantize(FRAC_PI_4), FRAC_PI_2);
        let q0 = QuantizationSpec::continuous();
        assert_eq!(quantize_phases(&[0.3, 2.0, 5.5], &q0), vec![0.3, 2.0, 5.5]);
        assert!(QuantizationSpec::new(40).is_err());
    }

    #[test]
    fn coherent_optimum_never_beaten_by_random_phases() {
        let (g, h) = random_pair(38, 32);
        let real = single_antenna(g.clone(), h.clone(), C64::new(0.0, 0.0));
        let best =
            cascade_response(&real, &RisState::ideal(&optimal_phases(&g, &h).unwrap()).unwrap(), 0).unwrap()[0].norm();
        let mut rng = RngStream::new(38, 1).generator();
        use rand::Rng;
        for _ in 0..2_000 {
            let phases: Vec<f64> = (0..32).map(|_| rng.random_range(0.0..TAU)).collect();
            let c = cascade_response(&real, &RisState::ideal(&phases).unwrap(), 0).unwrap()[0];
            assert!(c.norm() <= best * (1.0 + 1e-12));
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn quantized_output_on_grid(theta in -20.0f64..20.0, bits in 1u32..6) {
                let q = QuantizationSpec::new(bits).unwrap();
                let out = q.quantize(theta);
                prop_assert!(q.levels().contains(&out));
                let step = TAU / (1u64 << bits) as f64;
                prop_assert!(circular_distance(out, theta) <= step / 2.0 + 1e-9);
            }

            #[test]
            fn wrap_stays_in_domain(theta in -1e3f64..1e3) {
                let w = wrap_phase(theta);
                prop_assert!(w > 0.0 && w <= TAU);
                prop_assert!(circular_distance(w, theta) < 1e-9);
            }

            #[test]
            fn quantization_never_beats_continuous_optimum(seed in 0u64..1_000, bits in 1u32..4) {
                let (g, h) = random_pair(seed, 24);
                let real = single_antenna(g.clone(), h.clone(), C64::new(0.0, 0.0));
                let opt = optimal_phases(&g, &h).unwrap();
                let cont = RisState::ideal(&opt).unwrap();
                let quant = cont.requantized(QuantizationSpec::new(bits).unwrap());
                let c = cascade_response(&real, &cont, 0).unwrap()[0].norm();
                let q = cascade_response(&real, &quant, 0).unwrap()[0].norm();
                prop_assert!(q <= c * (1.0 + 1e-12));
            }
        }
    }
}
