//! Closed-form amplitudes for a few small systems with symmetric couplings.
//! They serve as independent checks of the generic kernel.

use num_complex::Complex64 as C64;

use crate::kernel::AmplitudePair;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Single two-level emitter at `z = 0`.
pub fn two_level(delta: f64, gamma1d: f64, gamma_total: f64) -> AmplitudePair {
    let r = -gamma1d / C64::new(gamma_total, 2.0 * delta);
    AmplitudePair { t: 1.0 + r, r }
}

/// Two symmetric point scatterers, the second one a phase `k_dz` to the right.
/// Reflection is referenced to the first scatterer.
pub fn cascade(a: AmplitudePair, b: AmplitudePair, k_dz: f64) -> AmplitudePair {
    let round = C64::from_polar(1.0, 2.0 * k_dz);
    let den = 1.0 - a.r * b.r * round;
    AmplitudePair { t: a.t * b.t / den, r: a.r + a.t * a.t * b.r * round / den }
}

/// V-type emitter with both transitions coupled equally to the waveguide and
/// its excited levels driven by `Ω e^{iθ}`. `dphi = θ − (φ₁ − φ₂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VSystem {
    pub delta1: f64,
    pub delta2: f64,
    pub gamma1d: f64,
    pub gamma_prime: f64,
    pub omega: f64,
    pub dphi: f64,
}

pub fn v_system(p: &VSystem) -> AmplitudePair {
    let gamma = p.gamma1d + p.gamma_prime;
    let d1 = C64::new(p.delta1, -0.5 * gamma);
    let d2 = C64::new(p.delta2, -0.5 * gamma);
    let g = C64::from_polar(p.omega, p.dphi) - 0.5 * I * p.gamma1d;
    let gb = C64::from_polar(p.omega, -p.dphi) - 0.5 * I * p.gamma1d;
    let r = 0.5 * I * p.gamma1d * (d1 + d2 + I * p.gamma1d - 2.0 * p.omega * p.dphi.cos()) / (d1 * d2 - g * gb);
    AmplitudePair { t: 1.0 + r, r }
}

/// Two identical two-level emitters separated by the phase `k_dz`.
pub fn two_emitters(delta: f64, gamma1d: f64, gamma_prime: f64, k_dz: f64) -> AmplitudePair {
    let x = (1.0 - C64::from_polar(1.0, 2.0 * k_dz)) * gamma1d * gamma1d / C64::new(gamma_prime, 2.0 * delta);
    let t = 1.0 - (2.0 * gamma1d + x) / (C64::new(gamma_prime + 2.0 * gamma1d, 2.0 * delta) + x);
    let single = two_level(delta, gamma1d, gamma1d + gamma_prime);
    AmplitudePair { t, r: cascade(single, single, k_dz).r }
}

/// Two co-located two-level emitters with a direct exchange `|V| e^{iφ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipolePair {
    pub delta_a: f64,
    pub delta_b: f64,
    pub gamma1d_a: f64,
    pub gamma1d_b: f64,
    pub gamma_prime_a: f64,
    pub gamma_prime_b: f64,
    pub v: f64,
    pub phi: f64,
}

pub fn dipole_pair(p: &DipolePair) -> AmplitudePair {
    let (ga, gb) = (p.gamma1d_a, p.gamma1d_b);
    let la = C64::new(ga + p.gamma_prime_a, 2.0 * p.delta_a);
    let lb = C64::new(gb + p.gamma_prime_b, 2.0 * p.delta_b);
    let cross = 4.0 * I * (ga * gb).sqrt() * p.v * p.phi.cos();
    let num = cross + 2.0 * ga * gb - ga * lb - gb * la;
    let den = la * lb - ga * gb - cross + 4.0 * p.v * p.v;
    let r = num / den;
    AmplitudePair { t: 1.0 + r, r }
}

/// Lossless two-level emitter A followed, a phase `k_dz` later, by a V-type
/// emitter B with degenerate excited levels coupled by `Ω`. All guided rates
/// equal `gamma1d`.
pub fn two_plus_v(delta_a: f64, delta_b: f64, gamma1d: f64, omega: f64, k_dz: f64) -> AmplitudePair {
    let g = gamma1d;
    let t = 2.0 * delta_a * (omega + delta_b)
        / (C64::from_polar(g * g, 2.0 * k_dz) - C64::new(g, 2.0 * delta_a) * C64::new(g, omega + delta_b));
    // Only the symmetric combination of B's levels couples to the guide.
    let a = two_level(delta_a, g, g);
    let b = two_level(delta_b + omega, 2.0 * g, 2.0 * g);
    AmplitudePair { t, r: cascade(a, b, k_dz).r }
}
