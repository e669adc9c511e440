//! Ground-state dynamics of a Λ emitter driven by a weak coherent pulse.
//!
//! The emitter has ground levels `|0⟩`, `|1⟩` and one excited level. Light
//! enters from the left in resonance (up to `delta`) with `|0⟩ → |e⟩`.

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::model::{LevelKind, SystemSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("not a single Λ emitter: {0}")]
    NotLambda(String),
    #[error("time step {step:.3e} exceeds the accuracy bound {bound:.3e}")]
    StepTooLarge { step: f64, bound: f64 },
    #[error("time grid must be finite, non-negative and sorted")]
    BadGrid,
}

/// Rates per ground level, index 0 for `|0⟩` and 1 for `|1⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaParams {
    pub gamma_right: [f64; 2],
    pub gamma_left: [f64; 2],
    pub gamma_prime: [f64; 2],
    /// Detuning of the drive from `|0⟩ → |e⟩`.
    pub delta: f64,
    /// Ground splitting `ω₁ − ω₀`.
    pub omega01: f64,
}

impl LambdaParams {
    /// Symmetric couplings given by β-factors, total linewidth `gamma`.
    pub fn symmetric(beta0: f64, beta1: f64, gamma: f64, delta: f64, omega01: f64) -> Self {
        let prime = gamma * (1.0 - beta0 - beta1);
        LambdaParams {
            gamma_right: [0.5 * beta0 * gamma, 0.5 * beta1 * gamma],
            gamma_left: [0.5 * beta0 * gamma, 0.5 * beta1 * gamma],
            gamma_prime: [0.5 * prime, 0.5 * prime],
            delta,
            omega01,
        }
    }

    /// Reads a single-emitter Λ system. The first ground level listed is `|0⟩`.
    pub fn from_system(system: &SystemSpec, detuning: f64, sign: f64) -> Result<Self, DynamicsError> {
        let [em] = system.emitters.as_slice() else {
            return Err(DynamicsError::NotLambda(format!("{} emitters", system.emitters.len())));
        };
        let grounds: Vec<_> = em.grounds().map(|(_, l)| l).collect();
        let excited: Vec<_> = em.levels.iter().filter(|l| l.kind == LevelKind::Excited).collect();
        if grounds.len() != 2 || excited.len() != 1 {
            return Err(DynamicsError::NotLambda(format!(
                "emitter '{}' has {} ground and {} excited levels",
                em.id,
                grounds.len(),
                excited.len()
            )));
        }
        let e = excited[0];
        let mut p = LambdaParams {
            gamma_right: [0.0; 2],
            gamma_left: [0.0; 2],
            gamma_prime: [0.0; 2],
            delta: e.energy - grounds[0].energy + sign * detuning,
            omega01: system
                .ground_splitting(&em.id, &grounds[1].id, &grounds[0].id)
                .expect("levels exist"),
        };
        for (i, g) in grounds.iter().enumerate() {
            if let Some(t) = em.transition(&e.id, &g.id) {
                p.gamma_right[i] = t.gamma1d_right;
                p.gamma_left[i] = t.gamma1d_left;
                p.gamma_prime[i] = t.gamma_prime;
            }
        }
        Ok(p)
    }

    pub fn gamma1d(&self, i: usize) -> f64 {
        self.gamma_right[i] + self.gamma_left[i]
    }

    pub fn gamma_channel(&self, i: usize) -> f64 {
        self.gamma1d(i) + self.gamma_prime[i]
    }

    pub fn gamma(&self) -> f64 {
        self.gamma_channel(0) + self.gamma_channel(1)
    }

    pub fn beta(&self, i: usize) -> f64 {
        self.gamma1d(i) / self.gamma()
    }

    /// `|δ̃|² = δ² + Γ²/4`.
    pub fn delta_tilde_sq(&self) -> f64 {
        self.delta * self.delta + 0.25 * self.gamma() * self.gamma()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..2).all(|i| (self.gamma_right[i] - self.gamma_left[i]).abs() <= 1e-12 * self.gamma1d(i).max(1.0))
    }

    fn check(&self) -> Result<(), DynamicsError> {
        let all = self.gamma_right.iter().chain(&self.gamma_left).chain(&self.gamma_prime);
        if all.clone().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(DynamicsError::InvalidParams("rates must be finite and non-negative".into()));
        }
        if !self.delta.is_finite() || !self.omega01.is_finite() {
            return Err(DynamicsError::InvalidParams("detuning and splitting must be finite".into()));
        }
        if !(self.gamma() > 0.0) {
            return Err(DynamicsError::InvalidParams("total linewidth must be positive".into()));
        }
        Ok(())
    }
}

/// Per-photon probabilities of dephasing (`p_d`), Raman flip `|0⟩ → |1⟩`
/// (`p_r`) and removal from the forward elastic mode (`p_sc`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub p_d: f64,
    pub p_r: f64,
    pub p_sc: f64,
}

pub fn compute_rates(p: &LambdaParams) -> Result<Rates, DynamicsError> {
    p.check()?;
    let dsq = p.delta_tilde_sq();
    let g = p.gamma();
    let lorentz = 1.0 + 4.0 * p.delta * p.delta / (g * g);
    let (b0, b1) = (p.beta(0), p.beta(1));
    Ok(Rates {
        p_d: p.gamma_channel(0) * p.gamma_right[0] / dsq,
        p_r: p.gamma_channel(1) * p.gamma_right[0] / dsq,
        p_sc: (2.0 - b0 - b1) * b0 / lorentz,
    })
}

/// Square pulse of photon flux `intensity = |α|²` lasting `duration`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    pub intensity: f64,
    pub duration: f64,
}

impl PulseSpec {
    pub fn from_mean_photons(mean_photons: f64, duration: f64) -> Self {
        PulseSpec { intensity: mean_photons / duration, duration }
    }

    pub fn mean_photons(&self) -> f64 {
        self.intensity * self.duration
    }

    pub fn intensity_at(&self, t: f64) -> f64 {
        if (0.0..self.duration).contains(&t) {
            self.intensity
        } else {
            0.0
        }
    }

    fn check(&self) -> Result<(), DynamicsError> {
        if !(self.intensity >= 0.0 && self.intensity.is_finite() && self.duration > 0.0 && self.duration.is_finite()) {
            return Err(DynamicsError::InvalidParams("pulse needs finite intensity ≥ 0 and duration > 0".into()));
        }
        Ok(())
    }
}

/// Light-shifted ground-state Hamiltonian under constant `intensity`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveElements {
    /// Shift of `|0⟩`.
    pub h00_shift: f64,
    /// Energy of `|1⟩`.
    pub h11: f64,
    /// `h11 − h00_shift`.
    pub omega01_prime: f64,
}

pub fn effective_hamiltonian_elements(p: &LambdaParams, intensity: f64) -> EffectiveElements {
    let shift = -p.gamma1d(0) * intensity * p.delta / p.delta_tilde_sq();
    EffectiveElements { h00_shift: shift, h11: p.omega01, omega01_prime: p.omega01 - shift }
}

/// Populations and coherence `ρ₀₁` of the two ground levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundState {
    pub rho00: f64,
    pub rho11: f64,
    pub rho01: C64,
}

impl GroundState {
    /// Equal superposition `(|0⟩ + |1⟩)/√2`.
    pub fn superposition() -> Self {
        GroundState { rho00: 0.5, rho11: 0.5, rho01: C64::new(0.5, 0.0) }
    }

    pub fn trace(&self) -> f64 {
        self.rho00 + self.rho11
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IntegratorConfig {
    /// Upper limit for the step; the accuracy bound is used when `None`.
    pub max_step: Option<f64>,
}

/// Largest step for which the rates satisfy `max(p_r, p_d)·|α|²·h ≤ 1e-3` and
/// the coherence turns by at most 0.01 rad.
pub fn step_bound(rates: &Rates, intensity: f64, omega: f64) -> f64 {
    let decay = rates.p_r.max(rates.p_d) * intensity;
    let mut h = f64::INFINITY;
    if decay > 0.0 {
        h = h.min(1e-3 / decay);
    }
    if omega != 0.0 {
        h = h.min(1e-2 / omega.abs());
    }
    h
}

#[derive(Clone, Copy)]
struct Coeffs {
    flip: f64,
    decay: C64,
}

fn rk4(y: GroundState, c: Coeffs, h: f64) -> GroundState {
    let f = |s: &GroundState| (-c.flip * s.rho00, c.flip * s.rho00, c.decay * s.rho01);
    let add = |s: &GroundState, k: (f64, f64, C64), a: f64| GroundState {
        rho00: s.rho00 + a * k.0,
        rho11: s.rho11 + a * k.1,
        rho01: s.rho01 + a * k.2,
    };
    let k1 = f(&y);
    let k2 = f(&add(&y, k1, 0.5 * h));
    let k3 = f(&add(&y, k2, 0.5 * h));
    let k4 = f(&add(&y, k3, h));
    GroundState {
        rho00: y.rho00 + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        rho11: y.rho11 + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        rho01: y.rho01 + h / 6.0 * (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2),
    }
}

fn coeffs(p: &LambdaParams, r: &Rates, intensity: f64) -> Coeffs {
    let w = effective_hamiltonian_elements(p, intensity).omega01_prime;
    Coeffs { flip: r.p_r * intensity, decay: C64::new(-0.5 * (r.p_r + r.p_d) * intensity, w) }
}

/// RK4 integration of the ground-state equations, sampled at `times`.
pub fn evolve_ground_state(
    p: &LambdaParams,
    pulse: &PulseSpec,
    times: &[f64],
    initial: GroundState,
    config: &IntegratorConfig,
) -> Result<Vec<GroundState>, DynamicsError> {
    let rates = compute_rates(p)?;
    pulse.check()?;
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(DynamicsError::BadGrid);
    }
    let on = coeffs(p, &rates, pulse.intensity);
    let off = coeffs(p, &rates, 0.0);
    let bound_on = step_bound(&rates, pulse.intensity, on.decay.im);
    let bound_off = step_bound(&rates, 0.0, off.decay.im);
    if let Some(h) = config.max_step {
        if !(h > 0.0) {
            return Err(DynamicsError::InvalidParams("max_step must be positive".into()));
        }
        let bound = if pulse.intensity > 0.0 { bound_on } else { bound_off };
        if h > bound {
            return Err(DynamicsError::StepTooLarge { step: h, bound });
        }
    }
    let limit = |b: f64| config.max_step.map_or(b, |h| h.min(b));

    let advance = |mut y: GroundState, from: f64, to: f64, c: Coeffs, bound: f64| {
        let len = to - from;
        if len <= 0.0 {
            return y;
        }
        let n = (len / limit(bound)).ceil().max(1.0) as usize;
        let h = len / n as f64;
        for _ in 0..n {
            y = rk4(y, c, h);
        }
        y
    };

    let mut out = Vec::with_capacity(times.len());
    let (mut t, mut y) = (0.0, initial);
    for &target in times {
        if t < pulse.duration {
            let stop = target.min(pulse.duration);
            y = advance(y, t, stop, on, bound_on);
            t = stop;
        }
        if target > t {
            y = advance(y, t, target, off, bound_off);
            t = target;
        }
        out.push(y);
    }
    Ok(out)
}

/// Exact solution of the same equations.
pub fn ground_state_closed_form(p: &LambdaParams, pulse: &PulseSpec, t: f64, initial: GroundState) -> Result<GroundState, DynamicsError> {
    let rates = compute_rates(p)?;
    pulse.check()?;
    if !(t >= 0.0) {
        return Err(DynamicsError::BadGrid);
    }
    let t_on = t.min(pulse.duration);
    let t_off = t - t_on;
    let on = coeffs(p, &rates, pulse.intensity);
    let off = coeffs(p, &rates, 0.0);
    let rho00 = initial.rho00 * (-on.flip * t_on).exp();
    Ok(GroundState {
        rho00,
        rho11: initial.rho11 + initial.rho00 - rho00,
        rho01: initial.rho01 * (on.decay * t_on + off.decay * t_off).exp(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::lambda;
    use proptest::prelude::*;

    #[test]
    fn rates_for_balanced_lossless() {
        let p = LambdaParams::symmetric(0.5, 0.5, 1.0, 0.0, 0.0);
        let r = compute_rates(&p).unwrap();
        assert!((r.p_r - 0.5).abs() < 1e-15);
        assert!((r.p_d - 0.5).abs() < 1e-15);
        assert!((r.p_sc - 0.5).abs() < 1e-15);
    }

    #[test]
    fn no_guided_decay_means_no_rates() {
        let p = LambdaParams::symmetric(0.0, 0.0, 1.0, 0.3, 0.0);
        let r = compute_rates(&p).unwrap();
        assert_eq!((r.p_r, r.p_d, r.p_sc), (0.0, 0.0, 0.0));
    }

    #[test]
    fn zero_linewidth_is_invalid() {
        let p = LambdaParams::symmetric(0.5, 0.5, 0.0, 0.0, 0.0);
        assert!(matches!(compute_rates(&p), Err(DynamicsError::InvalidParams(_))));
    }

    #[test]
    fn stark_shift_example() {
        let p = LambdaParams::symmetric(0.5, 0.5, 1.0, 0.5, 0.0);
        let e = effective_hamiltonian_elements(&p, 1.0);
        assert!((e.omega01_prime - 0.5).abs() < 1e-15);
        assert!((e.h00_shift + 0.5).abs() < 1e-15);
    }

    #[test]
    fn from_system_reads_rates_and_splitting() {
        let sys = lambda(0.6, 0.4, 0.1, 0.2, 3.0);
        let p = LambdaParams::from_system(&sys, 0.25, 1.0).unwrap();
        assert_eq!(p.gamma_right, [0.3, 0.2]);
        assert_eq!(p.gamma_prime, [0.1, 0.2]);
        assert_eq!(p.delta, 0.25);
        assert_eq!(p.omega01, 3.0);
        assert!((p.gamma() - 1.3).abs() < 1e-15);
    }

    #[test]
    fn two_level_is_not_lambda() {
        let sys = SystemSpec { emitters: vec![crate::model::fixtures::two_level("A", 0.0, 0.0, 1.0, 0.0)], ..Default::default() };
        assert!(matches!(LambdaParams::from_system(&sys, 0.0, 1.0), Err(DynamicsError::NotLambda(_))));
    }

    #[test]
    fn requested_step_above_bound_is_refused() {
        let p = LambdaParams::symmetric(0.5, 0.5, 1.0, 0.0, 0.0);
        let pulse = PulseSpec { intensity: 1.0, duration: 1.0 };
        let cfg = IntegratorConfig { max_step: Some(0.1) };
        let e = evolve_ground_state(&p, &pulse, &[1.0], GroundState::superposition(), &cfg).unwrap_err();
        assert!(matches!(e, DynamicsError::StepTooLarge { .. }));
    }

    #[test]
    fn dark_after_pulse() {
        let p = LambdaParams::symmetric(0.5, 0.5, 1.0, 0.0, 0.7);
        let pulse = PulseSpec { intensity: 0.5, duration: 1.0 };
        let init = GroundState::superposition();
        let traj = evolve_ground_state(&p, &pulse, &[1.0, 3.0], init, &IntegratorConfig::default()).unwrap();
        assert_eq!(traj[0].rho00, traj[1].rho00);
        let rot = traj[1].rho01 / traj[0].rho01;
        assert!((rot - C64::from_polar(1.0, 1.4)).norm() < 1e-8);
    }

    proptest! {
        #[test]
        fn rk4_matches_closed_form(b0 in 0.05..0.95f64, frac in 0.0..1.0f64, d in -2.0..2.0f64, w in -3.0..3.0f64,
                                   i in 0.01..3.0f64, t in 0.0..4.0f64) {
            let p = LambdaParams::symmetric(b0, (1.0 - b0) * frac, 1.0, d, w);
            let pulse = PulseSpec { intensity: i, duration: 2.0 };
            let init = GroundState::superposition();
            let y = evolve_ground_state(&p, &pulse, &[t], init, &IntegratorConfig::default()).unwrap()[0];
            let z = ground_state_closed_form(&p, &pulse, t, init).unwrap();
            prop_assert!((y.rho00 - z.rho00).abs() < 1e-9);
            prop_assert!((y.rho01 - z.rho01).norm() < 1e-9);
            prop_assert!((y.trace() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn symmetric_rates_are_bounded(b0 in 0.0..1.0f64, frac in 0.0..1.0f64, d in -5.0..5.0f64, g in 0.1..3.0f64) {
            let p = LambdaParams::symmetric(b0, (1.0 - b0) * frac, g, d, 0.0);
            let r = compute_rates(&p).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.p_r));
            prop_assert!((0.0..=1.0).contains(&r.p_sc));
            prop_assert!((0.0..=2.0).contains(&r.p_d));
        }
    }
}
