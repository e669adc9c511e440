//! Photon counting and heralded superposition protocols for a Λ emitter.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{compute_rates, effective_hamiltonian_elements, DynamicsError, LambdaParams, PulseSpec, Rates};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("filtered photon probabilities need equal left and right couplings")]
    AsymmetricCoupling,
    #[error("{what} = {value} is outside [{lo}, {hi}]")]
    OutOfRange { what: &'static str, value: f64, lo: f64, hi: f64 },
}

/// Probabilities for a photon sent in from the left to leave to the right
/// (`_r`) or left (`_l`), Raman-shifted (`red`) or unshifted (`blue`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilteredProbs {
    pub red_r: f64,
    pub red_l: f64,
    pub blue_r: f64,
    pub blue_l: f64,
}

impl FilteredProbs {
    pub fn total(&self) -> f64 {
        self.red_r + self.red_l + self.blue_r + self.blue_l
    }
}

pub fn filtered_photon_probs(p: &LambdaParams) -> Result<FilteredProbs, ProtocolError> {
    compute_rates(p)?;
    if !p.is_symmetric() {
        return Err(ProtocolError::AsymmetricCoupling);
    }
    let g = p.gamma();
    let lorentz = 1.0 + 4.0 * p.delta * p.delta / (g * g);
    let (b0, b1) = (p.beta(0), p.beta(1));
    let red = b0 * b1 / lorentz;
    Ok(FilteredProbs {
        red_r: red,
        red_l: red,
        blue_r: 1.0 - (2.0 - b0) * b0 / lorentz,
        blue_l: b0 * b0 / lorentz,
    })
}

/// Transmitted photon flux at time `t` for an emitter starting in `|0⟩`.
pub fn output_intensity(rates: &Rates, pulse: &PulseSpec, t: f64) -> f64 {
    let i = pulse.intensity_at(t);
    i * (1.0 - rates.p_sc * (-rates.p_r * i * t).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Filter {
    #[default]
    None,
    RedOnly,
    BlueOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionConfig {
    pub efficiency: f64,
    pub filter: Filter,
    /// Phase `φ_z` picked up on the way to the detector.
    pub phase_offset: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig { efficiency: 1.0, filter: Filter::None, phase_offset: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClickProbs {
    pub single_photon: f64,
    pub coherent: f64,
    /// First order in the mean photon number.
    pub coherent_weak: f64,
}

/// `(1 − e^{−p n})/p`, continuous at `p = 0`.
fn saturated(p: f64, n: f64) -> f64 {
    let x = p * n;
    if x.abs() < 1e-12 {
        n * (1.0 - 0.5 * x)
    } else {
        -(-x).exp_m1() / p
    }
}

/// Detector click probabilities in the transmitted mode.
pub fn click_probabilities(p: &LambdaParams, pulse: &PulseSpec, det: &DetectionConfig) -> Result<ClickProbs, ProtocolError> {
    if !(0.0..=1.0).contains(&det.efficiency) {
        return Err(ProtocolError::OutOfRange { what: "efficiency", value: det.efficiency, lo: 0.0, hi: 1.0 });
    }
    let r = compute_rates(p)?;
    let n = pulse.mean_photons();
    let eta = det.efficiency;
    let absorbed = saturated(r.p_r, n);
    let (single, coherent) = match det.filter {
        Filter::None => (1.0 - r.p_sc, n - r.p_sc * absorbed),
        Filter::RedOnly => {
            let f = filtered_photon_probs(p)?;
            (f.red_r, f.red_r * absorbed)
        }
        Filter::BlueOnly => {
            let f = filtered_photon_probs(p)?;
            (f.blue_r, n - (r.p_sc + f.red_r) * absorbed)
        }
    };
    Ok(ClickProbs { single_photon: eta * single, coherent: eta * coherent, coherent_weak: eta * n * single })
}

struct FidelityTerms {
    rates: Rates,
    sqrt_n: f64,
    width: f64,
    chi: f64,
    omega: f64,
}

fn fidelity_terms(p: &LambdaParams, pulse: &PulseSpec) -> Result<FidelityTerms, ProtocolError> {
    let rates = compute_rates(p)?;
    let g = p.gamma();
    let x = 4.0 * p.delta * p.delta / (g * g);
    let (b0, b1) = (p.beta(0), p.beta(1));
    Ok(FidelityTerms {
        rates,
        sqrt_n: g * g * ((x + (1.0 - b0).powi(2)) * b0 * b1).sqrt(),
        width: 4.0 * p.delta * p.delta + g * g,
        chi: (2.0 * p.delta / g).atan2(1.0 - b0),
        omega: effective_hamiltonian_elements(p, pulse.intensity).omega01_prime,
    })
}

/// Overlap with the equal superposition of the ground state left behind when
/// the first transmitted photon is detected at `t_c`. The detection phase
/// offset shifts the reference phase.
pub fn conditional_fidelity(p: &LambdaParams, pulse: &PulseSpec, t_c: f64, det: &DetectionConfig) -> Result<f64, ProtocolError> {
    let tt = pulse.duration;
    if !(0.0..=tt).contains(&t_c) {
        return Err(ProtocolError::OutOfRange { what: "t_c", value: t_c, lo: 0.0, hi: tt });
    }
    let f = fidelity_terms(p, pulse)?;
    if f.sqrt_n == 0.0 {
        return Ok(0.5);
    }
    let i = pulse.intensity;
    let r = f.rates;
    let d = 0.5 * f.width * (1.0 - r.p_sc * (-r.p_r * i * t_c).exp());
    let gamma = i * (0.5 * r.p_r * (t_c + tt) + 0.5 * r.p_d * (tt - t_c));
    let phi = det.phase_offset + f.omega * (tt - t_c) + f.chi;
    Ok(0.5 + 0.5 * (-gamma).exp() * f.sqrt_n / d * phi.cos())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AverageFidelity {
    /// Weak-pulse formula for balanced lossless resonant driving; it depends
    /// only on the mean photon number and `ω₀₁T`.
    pub closed_form: f64,
    /// Intensity-weighted Simpson average of [`conditional_fidelity`].
    pub numeric: f64,
    /// The same average evaluated analytically.
    pub analytic: f64,
}

pub const DEFAULT_PANELS: usize = 2000;

/// `(1 − e^{−zT})/z`, continuous at `z = 0`.
fn phi1(z: C64, t: f64) -> C64 {
    let x = z * t;
    if x.norm() < 1e-5 {
        t * (1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0)
    } else {
        (1.0 - (-x).exp()) / z
    }
}

pub fn average_fidelity(p: &LambdaParams, pulse: &PulseSpec, det: &DetectionConfig, panels: usize) -> Result<AverageFidelity, ProtocolError> {
    if panels < 2 || !panels.is_multiple_of(2) {
        return Err(ProtocolError::OutOfRange { what: "panels", value: panels as f64, lo: 2.0, hi: f64::INFINITY });
    }
    let f = fidelity_terms(p, pulse)?;
    let r = f.rates;
    let (i, tt) = (pulse.intensity, pulse.duration);
    let n = pulse.mean_photons();

    let wt = p.omega01 * tt;
    let osc = if wt == 0.0 {
        det.phase_offset.cos()
    } else {
        ((det.phase_offset + wt).sin() - det.phase_offset.sin()) / wt
    };
    let e = (-0.5 * n).exp();
    let closed_form = 0.5 + 0.5 * osc * e / (2.0 - e);

    let h = tt / panels as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..=panels {
        let w = if k == 0 || k == panels { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
        let t = k as f64 * h;
        let weight = i * (1.0 - r.p_sc * (-r.p_r * i * t).exp());
        num += w * weight * conditional_fidelity(p, pulse, t, det)?;
        den += w * weight;
    }
    let numeric = if den > 0.0 { num / den } else { 0.5 };

    let total = n - r.p_sc * saturated(r.p_r, n);
    let analytic = if f.sqrt_n == 0.0 || total <= 0.0 {
        0.5
    } else {
        let a = 0.5 * i * tt * (r.p_r + r.p_d);
        let b = 0.5 * i * (r.p_r - r.p_d);
        let c = det.phase_offset + f.omega * tt + f.chi;
        let integral = (C64::from_polar((-a).exp(), c) * phi1(C64::new(b, f.omega), tt)).re;
        0.5 + i * f.sqrt_n / f.width * integral / total
    };

    Ok(AverageFidelity { closed_form, numeric, analytic })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn balanced() -> LambdaParams {
        LambdaParams::symmetric(0.5, 0.5, 1.0, 0.0, 0.0)
    }

    #[test]
    fn balanced_filtered_probabilities() {
        let f = filtered_photon_probs(&balanced()).unwrap();
        assert!((f.red_r - 0.25).abs() < 1e-15);
        assert!((f.red_l - 0.25).abs() < 1e-15);
        assert!((f.blue_r - 0.25).abs() < 1e-15);
        assert!((f.blue_l - 0.25).abs() < 1e-15);
    }

    #[test]
    fn asymmetric_is_refused() {
        let mut p = balanced();
        p.gamma_right[0] = 0.4;
        p.gamma_left[0] = 0.1;
        assert_eq!(filtered_photon_probs(&p), Err(ProtocolError::AsymmetricCoupling));
    }

    #[test]
    fn intensity_example() {
        let r = compute_rates(&balanced()).unwrap();
        let pulse = PulseSpec { intensity: 1.0, duration: 2.0 };
        let expect = 1.0 - 0.5 * (-0.5f64).exp();
        assert!((output_intensity(&r, &pulse, 1.0) - expect).abs() < 1e-15);
        assert_eq!(output_intensity(&r, &pulse, 2.5), 0.0);
    }

    #[test]
    fn perfect_two_level_reflector_never_clicks() {
        let p = LambdaParams::symmetric(1.0, 0.0, 1.0, 0.0, 0.0);
        let c = click_probabilities(&p, &PulseSpec { intensity: 1.0, duration: 1.0 }, &DetectionConfig::default()).unwrap();
        assert_eq!(c.single_photon, 0.0);
    }

    #[test]
    fn weak_pulse_limit_of_clicks() {
        let p = LambdaParams::symmetric(0.3, 0.4, 1.0, 0.2, 0.0);
        let pulse = PulseSpec::from_mean_photons(1e-4, 1.0);
        let c = click_probabilities(&p, &pulse, &DetectionConfig { efficiency: 0.3, ..Default::default() }).unwrap();
        assert!((c.coherent - c.coherent_weak).abs() < 1e-4 * c.coherent_weak);
    }

    #[test]
    fn filtered_clicks_add_up() {
        let p = LambdaParams::symmetric(0.3, 0.4, 1.0, 0.2, 0.0);
        let pulse = PulseSpec::from_mean_photons(0.7, 1.0);
        let mk = |filter| DetectionConfig { efficiency: 0.8, filter, phase_offset: 0.0 };
        let all = click_probabilities(&p, &pulse, &mk(Filter::None)).unwrap();
        let red = click_probabilities(&p, &pulse, &mk(Filter::RedOnly)).unwrap();
        let blue = click_probabilities(&p, &pulse, &mk(Filter::BlueOnly)).unwrap();
        assert!((red.single_photon + blue.single_photon - all.single_photon).abs() < 1e-15);
        assert!((red.coherent + blue.coherent - all.coherent).abs() < 1e-14);
    }

    #[test]
    fn conditional_fidelity_range_check() {
        let pulse = PulseSpec { intensity: 1.0, duration: 1.0 };
        let e = conditional_fidelity(&balanced(), &pulse, 1.5, &DetectionConfig::default()).unwrap_err();
        assert!(matches!(e, ProtocolError::OutOfRange { what: "t_c", .. }));
    }

    #[test]
    fn balanced_fidelity_at_start() {
        // At t_c = 0 only the dephasing over the whole pulse reduces the overlap.
        let pulse = PulseSpec::from_mean_photons(0.8, 1.0);
        let f = conditional_fidelity(&balanced(), &pulse, 0.0, &DetectionConfig::default()).unwrap();
        assert!((f - (0.5 + 0.5 * (-0.4f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn average_closed_form_value() {
        let pulse = PulseSpec::from_mean_photons(1.0, 1.0);
        let mut p = balanced();
        p.omega01 = 1e-3;
        let a = average_fidelity(&p, &pulse, &DetectionConfig::default(), DEFAULT_PANELS).unwrap();
        assert!((a.closed_form - 1.0 / (2.0 - (-0.5f64).exp())).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn fidelity_is_a_probability(b0 in 0.0..1.0f64, frac in 0.0..1.0f64, d in -3.0..3.0f64, w in -5.0..5.0f64,
                                     n in 0.0..5.0f64, tc in 0.0..1.0f64, phz in 0.0..6.3f64) {
            let p = LambdaParams::symmetric(b0, (1.0 - b0) * frac, 1.0, d, w);
            let pulse = PulseSpec::from_mean_photons(n, 2.0);
            let det = DetectionConfig { phase_offset: phz, ..Default::default() };
            let f = conditional_fidelity(&p, &pulse, 2.0 * tc, &det).unwrap();
            prop_assert!((0.0..=1.0).contains(&f));
            let flipped = DetectionConfig { phase_offset: phz + std::f64::consts::PI, ..det };
            let g = conditional_fidelity(&p, &pulse, 2.0 * tc, &flipped).unwrap();
            prop_assert!((f + g - 1.0).abs() < 1e-12);
        }

        #[test]
        fn channels_are_complete_without_loss(b0 in 0.0..1.0f64, d in -5.0..5.0f64, g in 0.1..3.0f64) {
            let p = LambdaParams::symmetric(b0, 1.0 - b0, g, d, 0.0);
            prop_assert!((filtered_photon_probs(&p).unwrap().total() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn numeric_average_matches_analytic(b0 in 0.05..1.0f64, frac in 0.0..1.0f64, d in -2.0..2.0f64, w in -10.0..10.0f64, n in 0.01..3.0f64) {
            let p = LambdaParams::symmetric(b0, (1.0 - b0) * frac, 1.0, d, w);
            let pulse = PulseSpec::from_mean_photons(n, 1.0);
            let a = average_fidelity(&p, &pulse, &DetectionConfig::default(), DEFAULT_PANELS).unwrap();
            prop_assert!((a.numeric - a.analytic).abs() < 1e-10, "{a:?}");
        }
    }
}
