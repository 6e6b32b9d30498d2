//! Imperfect CSI as a uniform phase mismatch, and the normalized cascade
//! gain it leaves behind.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{sample_realization, ChannelRealization, LinkBudget, NodeLayout, PathLossModel};
use crate::error::{param, Result};
use crate::numerics::{mean_std, RngStream, C64};
use crate::ris::{cascade_response, optimal_phases, AmplitudeModel, QuantizationSpec, RisState};

/// Where the estimation error enters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// The cascaded phase `θ_n` is mis-estimated as a whole.
    Cascaded,
    /// Only the RIS→actuator phase `ξ_n` is mis-estimated.
    GOnly,
    /// Only the BS→RIS phase `ζ_n` is mis-estimated.
    HOnly,
}

impl Placement {
    pub const ALL: [Placement; 3] = [Placement::Cascaded, Placement::GOnly, Placement::HOnly];

    pub fn name(&self) -> &'static str {
        match self {
            Placement::Cascaded => "cascaded",
            Placement::GOnly => "g_only",
            Placement::HOnly => "h_only",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMode {
    Continuous,
    Quantized(u32),
}

impl PhaseMode {
    pub fn quantization(&self) -> Result<QuantizationSpec> {
        match *self {
            PhaseMode::Continuous => Ok(QuantizationSpec::continuous()),
            PhaseMode::Quantized(bits) => QuantizationSpec::new(bits),
        }
    }

    pub fn bits(&self) -> u32 {
        match *self {
            PhaseMode::Continuous => 0,
            PhaseMode::Quantized(b) => b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseErrorSpec {
    /// Errors are drawn from `U(0, max_mismatch)`.
    pub max_mismatch: f64,
    pub placement: Placement,
    pub phase_mode: PhaseMode,
}

impl PhaseErrorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_mismatch >= 0.0 && self.max_mismatch < std::f64::consts::TAU) {
            return param(format!("max phase mismatch must lie in [0, 2π), got {}", self.max_mismatch));
        }
        self.phase_mode.quantization().map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedGainResult {
    pub mean_normalized_gain: f64,
    pub std: f64,
    pub trials: usize,
    pub delta: f64,
}

/// Per-element errors `ε_n ~ U(0, Δ)`; all zero when `Δ = 0`.
pub fn draw_phase_errors<R: Rng + ?Sized>(rng: &mut R, n: usize, max_mismatch: f64) -> Vec<f64> {
    (0..n).map(|_| max_mismatch * rng.random::<f64>()).collect()
}

/// Signed shift that an estimation error `ε` produces on `θ = -(ξ + ζ)`.
fn phase_shift(placement: Placement, eps: f64) -> f64 {
    match placement {
        Placement::Cascaded => eps,
        // ξ̂ = ξ + ε (or ζ̂ = ζ + ε) enters θ with a minus sign.
        Placement::GOnly | Placement::HOnly => -eps,
    }
}

/// Perturbs the continuous co-phasing state `ideal` with given errors and
/// re-quantizes per `spec.phase_mode`.
pub fn apply_phase_errors(ideal: &RisState, spec: &PhaseErrorSpec, errors: &[f64]) -> Result<RisState> {
    spec.validate()?;
    if errors.len() != ideal.len() {
        return param(format!("{} errors for {} elements", errors.len(), ideal.len()));
    }
    let phases: Vec<f64> =
        ideal.phases().iter().zip(errors).map(|(t, e)| t + phase_shift(spec.placement, *e)).collect();
    RisState::new(&phases, *ideal.amplitude_model(), spec.phase_mode.quantization()?)
}

/// Draws `ε_n ~ U(0, Δ)` and applies them via [`apply_phase_errors`].
///
/// `ideal` must hold the continuous (unquantized) co-phasing solution, since
/// the error corrupts the estimate before any quantization.
pub fn apply_phase_error<R: Rng + ?Sized>(ideal: &RisState, spec: &PhaseErrorSpec, rng: &mut R) -> Result<RisState> {
    if spec.max_mismatch == 0.0 {
        spec.validate()?;
        return Ok(ideal.requantized(spec.phase_mode.quantization()?));
    }
    let errors = draw_phase_errors(rng, ideal.len(), spec.max_mismatch);
    apply_phase_errors(ideal, spec, &errors)
}

fn rotate(v: &[C64], errors: &[f64]) -> Vec<C64> {
    v.iter().zip(errors).map(|(z, e)| z * C64::from_polar(1.0, *e)).collect()
}

/// Channel draw and unit-scale error draws of one trial, shared by every
/// sweep point.
struct Trial {
    realization: ChannelRealization,
    g: Vec<C64>,
    h: Vec<C64>,
    /// Perfect-CSI co-phasing solution.
    continuous: RisState,
    /// `U(0, 1)` per element; the errors for `Δ` are `Δ * u`.
    uniforms: Vec<f64>,
    /// Reference power `|g^H Θ_ideal h|^2` per phase resolution.
    reference: Vec<(u32, f64)>,
}

impl Trial {
    fn draw(layout: &NodeLayout, model: &PathLossModel, stream: RngStream) -> Result<Self> {
        let mut rng = stream.generator();
        let realization = sample_realization(layout, model, &LinkBudget::default(), &mut rng)?;
        let uniforms = draw_phase_errors(&mut rng, realization.elements(), 1.0);
        let g = realization.ris_to_actuator[0].as_slice().to_vec();
        let h = realization.bs_to_ris_column(0);
        let continuous =
            RisState::new(&optimal_phases(&g, &h)?, AmplitudeModel::ideal(), QuantizationSpec::continuous())?;
        Ok(Trial { realization, g, h, continuous, uniforms, reference: Vec::new() })
    }

    fn reference_power(&mut self, mode: PhaseMode) -> Result<f64> {
        let bits = mode.bits();
        if let Some(&(_, p)) = self.reference.iter().find(|(b, _)| *b == bits) {
            return Ok(p);
        }
        let state = self.continuous.requantized(mode.quantization()?);
        let p = cascade_response(&self.realization, &state, 0)?[0].norm_sqr();
        self.reference.push((bits, p));
        Ok(p)
    }

    /// Normalized gain `|g^H Θ_err h|^2 / |g^H Θ_ideal h|^2`, the reference
    /// using the same phase resolution.
    ///
    /// For `g_only`/`h_only` the corrupted phases are re-derived from the
    /// perturbed channel estimate rather than by shifting `θ` directly.
    fn gain(&mut self, spec: &PhaseErrorSpec) -> Result<f64> {
        let den = self.reference_power(spec.phase_mode)?;
        let quant = spec.phase_mode.quantization()?;
        let errors: Vec<f64> = self.uniforms.iter().map(|u| spec.max_mismatch * u).collect();
        let corrupted = match spec.placement {
            Placement::Cascaded => apply_phase_errors(&self.continuous, spec, &errors)?,
            Placement::GOnly => {
                let g_est = rotate(&self.g, &errors);
                RisState::new(&optimal_phases(&g_est, &self.h)?, AmplitudeModel::ideal(), quant)?
            }
            Placement::HOnly => {
                let h_est = rotate(&self.h, &errors);
                RisState::new(&optimal_phases(&self.g, &h_est)?, AmplitudeModel::ideal(), quant)?
            }
        };
        let num = cascade_response(&self.realization, &corrupted, 0)?[0].norm_sqr();
        Ok(num / den)
    }
}

/// Monte-Carlo mean of the normalized cascade gain over `trials` independent
/// channel draws with `n_elements` surface elements (single-antenna BS, first
/// actuator of `layout`).
///
/// Trial `t` draws from `rng.derive(t)`, so results do not depend on the
/// worker count, and sweeps sharing `rng` reuse the same channels.
pub fn normalized_gain_experiment(
    layout: &NodeLayout,
    model: &PathLossModel,
    spec: &PhaseErrorSpec,
    n_elements: usize,
    trials: usize,
    rng: RngStream,
) -> Result<NormalizedGainResult> {
    let mut r = normalized_gain_sweep(layout, model, std::slice::from_ref(spec), n_elements, trials, rng)?;
    Ok(r.remove(0))
}

/// [`normalized_gain_experiment`] for several specs at once. Each trial's
/// channel and error draws are generated once and evaluated under every
/// spec; the results equal separate runs with the same `rng`.
pub fn normalized_gain_sweep(
    layout: &NodeLayout,
    model: &PathLossModel,
    specs: &[PhaseErrorSpec],
    n_elements: usize,
    trials: usize,
    rng: RngStream,
) -> Result<Vec<NormalizedGainResult>> {
    for s in specs {
        s.validate()?;
    }
    if trials == 0 {
        return param("at least one trial required");
    }
    let mut layout = layout.clone().with_elements(n_elements);
    layout.bs_antennas = 1;
    layout.validate()?;
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut trial = Trial::draw(&layout, model, rng.derive(t as u64))?;
            specs.iter().map(|s| trial.gain(s)).collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(specs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let gains: Vec<f64> = per_trial.iter().map(|g| g[i]).collect();
            let (mean, std) = mean_std(&gains);
            NormalizedGainResult { mean_normalized_gain: mean, std, trials, delta: s.max_mismatch }
        })
        .collect())
}

/// Large-N limit `|E e^{iε}|^2 = (sin(Δ/2) / (Δ/2))^2` for `ε ~ U(0, Δ)`.
pub fn large_n_gain(delta: f64) -> f64 {
    if delta == 0.0 {
        1.0
    } else {
        let x = delta / 2.0;
        (x.sin() / x).powi(2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_3, PI};

    fn spec(delta: f64, placement: Placement, mode: PhaseMode) -> PhaseErrorSpec {
        PhaseErrorSpec { max_mismatch: delta, placement, phase_mode: mode }
    }

    fn ideal_state(n: usize) -> RisState {
        let phases: Vec<f64> = (0..n).map(|i| 0.1 + 0.77 * i as f64).collect();
        RisState::ideal(&phases).unwrap()
    }

    #[test]
    fn zero_mismatch_is_identity() {
        let s = ideal_state(16);
        let mut rng = RngStream::new(1, 0).generator();
        let out = apply_phase_error(&s, &spec(0.0, Placement::Cascaded, PhaseMode::Continuous), &mut rng).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn g_only_shift_mirrors_cascaded() {
        let s = ideal_state(64);
        let errors: Vec<f64> = (0..64).map(|i| 0.01 * i as f64).collect();
        let c = apply_phase_errors(&s, &spec(1.0, Placement::Cascaded, PhaseMode::Continuous), &errors).unwrap();
        let g = apply_phase_errors(&s, &spec(1.0, Placement::GOnly, PhaseMode::Continuous), &errors).unwrap();
        for ((t0, tc), tg) in s.phases().iter().zip(c.phases()).zip(g.phases()) {
            // Same error magnitude, opposite sign.
            assert!(crate::ris::circular_distance(*tc, *t0) - crate::ris::circular_distance(*tg, *t0) < 1e-12);
        }
    }

    #[test]
    fn quantized_mode_requantizes_after_error() {
        let s = ideal_state(32);
        let errors: Vec<f64> = (0..32).map(|i| 0.05 * (i % 7) as f64).collect();
        let sp = spec(0.5, Placement::Cascaded, PhaseMode::Quantized(2));
        let out = apply_phase_errors(&s, &sp, &errors).unwrap();
        let q = QuantizationSpec::new(2).unwrap();
        for ((t, e), o) in s.phases().iter().zip(&errors).zip(out.phases()) {
            assert_eq!(*o, q.quantize(t + e));
        }
    }

    #[test]
    fn errors_bounded_by_mismatch() {
        let mut rng = RngStream::new(4, 0).generator();
        let e = draw_phase_errors(&mut rng, 10_000, 0.7);
        assert!(e.iter().all(|x| (0.0..0.7).contains(x)));
        let mean = e.iter().sum::<f64>() / e.len() as f64;
        assert!((mean - 0.35).abs() < 0.01);
    }

    #[test]
    fn route_through_perturbed_channel_matches_state_shift() {
        // g_only via a rotated g estimate equals shifting θ by -ε.
        let mut rng = RngStream::new(8, 0).generator();
        let layout = NodeLayout::single_link().with_elements(20);
        let real = sample_realization(&layout, &PathLossModel::default(), &LinkBudget::default(), &mut rng).unwrap();
        let g = real.ris_to_actuator[0].as_slice();
        let h = real.bs_to_ris_column(0);
        let errors = draw_phase_errors(&mut rng, 20, 1.0);
        let ideal = RisState::ideal(&optimal_phases(g, &h).unwrap()).unwrap();
        let via_state =
            apply_phase_errors(&ideal, &spec(1.0, Placement::GOnly, PhaseMode::Continuous), &errors).unwrap();
        let via_channel = RisState::ideal(&optimal_phases(&rotate(g, &errors), &h).unwrap()).unwrap();
        for (a, b) in via_state.phases().iter().zip(via_channel.phases()) {
            assert!(crate::ris::circular_distance(*a, *b) < 1e-9);
        }
    }

    #[test]
    fn experiment_zero_delta_gives_unity() {
        let layout = NodeLayout::single_link();
        for mode in [PhaseMode::Continuous, PhaseMode::Quantized(2)] {
            for p in Placement::ALL {
                let r = normalized_gain_experiment(
                    &layout,
                    &PathLossModel::default(),
                    &spec(0.0, p, mode),
                    64,
                    50,
                    RngStream::new(2, 0),
                )
                .unwrap();
                assert_relative_eq!(r.mean_normalized_gain, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn experiment_tracks_large_n_limit() {
        let layout = NodeLayout::single_link();
        let r = normalized_gain_experiment(
            &layout,
            &PathLossModel::default(),
            &spec(PI, Placement::Cascaded, PhaseMode::Continuous),
            1024,
            400,
            RngStream::new(3, 0),
        )
        .unwrap();
        assert!((r.mean_normalized_gain - 4.0 / (PI * PI)).abs() < 0.02, "{}", r.mean_normalized_gain);
        assert_relative_eq!(large_n_gain(FRAC_PI_3), 0.911890652781, epsilon = 1e-11);
    }

    #[test]
    fn sweep_matches_separate_runs() {
        let layout = NodeLayout::single_link();
        let pl = PathLossModel::default();
        let specs = [
            spec(0.4, Placement::Cascaded, PhaseMode::Continuous),
            spec(1.3, Placement::HOnly, PhaseMode::Quantized(2)),
            spec(2.0, Placement::GOnly, PhaseMode::Quantized(1)),
        ];
        let joint = normalized_gain_sweep(&layout, &pl, &specs, 48, 30, RngStream::new(6, 1)).unwrap();
        for (s, j) in specs.iter().zip(&joint) {
            let alone = normalized_gain_experiment(&layout, &pl, s, 48, 30, RngStream::new(6, 1)).unwrap();
            assert_eq!(&alone, j);
        }
    }

    #[test]
    fn experiment_rejects_bad_input() {
        let layout = NodeLayout::single_link();
        let pl = PathLossModel::default();
        assert!(normalized_gain_experiment(
            &layout,
            &pl,
            &spec(0.1, Placement::Cascaded, PhaseMode::Continuous),
            8,
            0,
            RngStream::new(0, 0)
        )
        .is_err());
        assert!(normalized_gain_experiment(
            &layout,
            &pl,
            &spec(-0.1, Placement::Cascaded, PhaseMode::Continuous),
            8,
            5,
            RngStream::new(0, 0)
        )
        .is_err());
    }
}
