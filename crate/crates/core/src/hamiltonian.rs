//! Non-Hermitian Hamiltonian of the single-excitation manifold and its inverse.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::NumericError;
use crate::linalg::{norm1, Lu};
use crate::model::{total_decay_rate, CombinedBasis, SystemSpec};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Drive parameters for assembling the Hamiltonian.
///
/// Each excited state gets the detuning `E_e − E_g + sign·detuning`, where `g`
/// is the level the excited emitter occupies in the input ground state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Drive {
    pub detuning: f64,
    /// `+1` for transition-minus-drive, `−1` for drive-minus-transition.
    pub sign: f64,
    /// Index of the input joint ground state in the basis.
    pub ground: usize,
}

impl Drive {
    pub fn new(detuning: f64) -> Self {
        Drive { detuning, sign: 1.0, ground: 0 }
    }
}

impl Default for Drive {
    fn default() -> Self {
        Drive::new(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NhMatrix {
    pub matrix: DMatrix<C64>,
    pub basis: CombinedBasis,
    /// Complex detunings `δ_e − iΓ_e/2` on the diagonal.
    pub detunings: Vec<C64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NhInverse {
    pub matrix: DMatrix<C64>,
    /// `‖M‖₁ ‖M⁻¹‖₁`.
    pub condition_estimate: f64,
}

/// Builds the matrix over `basis.excited`.
///
/// Guided photons couple excited states that decay into a common ground
/// configuration. Between different emitters the exchange is causal: a photon
/// emitted to the right only reaches emitters further right, and vice versa.
/// For symmetric rates this is the usual `−(i/2) Γ₁D e^{ik|Δz|}` exchange.
pub fn assemble_nh(system: &SystemSpec, basis: &CombinedBasis, drive: &Drive) -> Result<NhMatrix, NumericError> {
    let expected: usize = system.emitters.iter().map(|e| e.excited().count()).sum();
    if expected != basis.n_excited() {
        return Err(NumericError::BasisMismatch { expected, found: basis.n_excited() });
    }
    if drive.ground >= basis.n_ground() {
        return Err(NumericError::BasisMismatch { expected: basis.n_ground(), found: drive.ground + 1 });
    }
    let n = basis.n_excited();
    let input = &basis.grounds[drive.ground];
    let mut m = DMatrix::<C64>::zeros(n, n);
    let mut detunings = Vec::with_capacity(n);

    for (a, sa) in basis.excited.iter().enumerate() {
        let em = &system.emitters[sa.emitter];
        let lvl = &em.levels[sa.level];
        let host = &em.levels[input.levels[sa.emitter]];
        let gamma = total_decay_rate(em, &lvl.id).expect("validated basis");
        let d = C64::new(lvl.energy - host.energy + drive.sign * drive.detuning, -0.5 * gamma);
        detunings.push(d);
        m[(a, a)] = d;
    }

    for (a, sa) in basis.excited.iter().enumerate() {
        for (b, sb) in basis.excited.iter().enumerate() {
            if a == b {
                continue;
            }
            let ea = &system.emitters[sa.emitter];
            let eb = &system.emitters[sb.emitter];
            let la = &ea.levels[sa.level].id;
            let lb = &eb.levels[sb.level].id;
            let mut v = C64::new(0.0, 0.0);
            if sa.emitter == sb.emitter {
                for (_, g) in ea.grounds() {
                    if let (Some(ta), Some(tb)) = (ea.transition(la, &g.id), ea.transition(lb, &g.id)) {
                        let w = (ta.gamma1d_right * tb.gamma1d_right).sqrt() + (ta.gamma1d_left * tb.gamma1d_left).sqrt();
                        v += -0.5 * I * w * C64::from_polar(1.0, ta.coupling_phase - tb.coupling_phase);
                    }
                }
            } else {
                // Each emitter has a single ground level here.
                let ga = &ea.levels[input.levels[sa.emitter]].id;
                let gb = &eb.levels[input.levels[sb.emitter]].id;
                if let (Some(ta), Some(tb)) = (ea.transition(la, ga), eb.transition(lb, gb)) {
                    let phi = C64::from_polar(1.0, ta.coupling_phase - tb.coupling_phase);
                    let dt = ea.phase_position - eb.phase_position;
                    v += if dt > 0.0 {
                        -I * (ta.gamma1d_right * tb.gamma1d_right).sqrt() * C64::from_polar(1.0, dt)
                    } else if dt < 0.0 {
                        -I * (ta.gamma1d_left * tb.gamma1d_left).sqrt() * C64::from_polar(1.0, -dt)
                    } else {
                        -0.5 * I
                            * ((ta.gamma1d_right * tb.gamma1d_right).sqrt() + (ta.gamma1d_left * tb.gamma1d_left).sqrt())
                    } * phi;
                }
            }
            m[(a, b)] += v;
        }
    }

    let index = |emitter: usize, level: &str| {
        let li = system.emitters[emitter].level_index(level)?;
        basis.excited.iter().position(|s| s.emitter == emitter && s.level == li)
    };
    for (ei, em) in system.emitters.iter().enumerate() {
        for cc in &em.coherent_couplings {
            let (a, b) = (index(ei, &cc.a).expect("validated"), index(ei, &cc.b).expect("validated"));
            m[(a, b)] += C64::from_polar(cc.magnitude, cc.phase);
            m[(b, a)] += C64::from_polar(cc.magnitude, -cc.phase);
        }
    }
    for dc in &system.dipole_couplings {
        let ea = system.emitter_index(&dc.a.emitter).expect("validated");
        let eb = system.emitter_index(&dc.b.emitter).expect("validated");
        let (a, b) = (index(ea, &dc.a.level).expect("validated"), index(eb, &dc.b.level).expect("validated"));
        m[(a, b)] += C64::from_polar(dc.magnitude, dc.phase);
        m[(b, a)] += C64::from_polar(dc.magnitude, -dc.phase);
    }

    Ok(NhMatrix { matrix: m, basis: basis.clone(), detunings })
}

pub fn invert_nh(h: &NhMatrix) -> Result<NhInverse, NumericError> {
    invert_matrix(&h.matrix)
}

pub fn invert_matrix(m: &DMatrix<C64>) -> Result<NhInverse, NumericError> {
    let inv = Lu::new(m)?.inverse();
    let condition_estimate = norm1(m) * norm1(&inv);
    Ok(NhInverse { matrix: inv, condition_estimate })
}

fn nonzero(z: C64, symbol: &'static str) -> Result<C64, NumericError> {
    if z == C64::new(0.0, 0.0) {
        Err(NumericError::DivisionByZero { symbol })
    } else {
        Ok(z)
    }
}

/// Effective parameters of a two-state block
/// `[[δ̃₁, G], [Ḡ, δ̃₂]]`, whose inverse is
/// `[[1/δ₁eff, 1/g], [1/g′, 1/δ₂eff]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VEffective {
    pub delta1_eff: C64,
    pub delta2_eff: C64,
    /// `None` when `G = 0`, so that the off-diagonal inverse entry vanishes.
    pub g_eff: Option<C64>,
    pub g_prime_eff: Option<C64>,
}

pub fn effective_params_v(delta1: C64, delta2: C64, g: C64, g_bar: C64) -> Result<VEffective, NumericError> {
    let d1 = nonzero(delta1, "δ̃₁")?;
    let d2 = nonzero(delta2, "δ̃₂")?;
    let gg = g * g_bar;
    let num = nonzero(gg - d1 * d2, "GḠ − δ̃₁δ̃₂")?;
    let opt = |x: C64| (x != C64::new(0.0, 0.0)).then(|| num / x);
    Ok(VEffective {
        delta1_eff: d1 - gg / d2,
        delta2_eff: d2 - gg / d1,
        g_eff: opt(g),
        g_prime_eff: opt(g_bar),
    })
}

/// A two-level emitter (state 1) next to a V-type emitter (states 2, 3).
/// Off-diagonal entries are `−(i/2)Γ₁₂`, `−(i/2)Γ₁₃` and `Ω/2 − (i/2)Γ₂₃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoEmitterInputs {
    pub delta: [C64; 3],
    pub gamma12: C64,
    pub gamma13: C64,
    pub gamma23: C64,
    pub omega: f64,
}

impl TwoEmitterInputs {
    /// Symmetric guided rates `gamma1d[j]`, extra losses `gamma_prime[j]`, and a
    /// phase distance `k_dz` between the emitters.
    pub fn from_rates(delta: [f64; 3], gamma1d: [f64; 3], gamma_prime: [f64; 3], omega: f64, k_dz: f64) -> Self {
        let dt = |j: usize| C64::new(delta[j], -0.5 * (gamma1d[j] + gamma_prime[j]));
        let ph = C64::from_polar(1.0, k_dz);
        TwoEmitterInputs {
            delta: [dt(0), dt(1), dt(2)],
            gamma12: (gamma1d[0] * gamma1d[1]).sqrt() * ph,
            gamma13: (gamma1d[0] * gamma1d[2]).sqrt() * ph,
            gamma23: C64::new((gamma1d[1] * gamma1d[2]).sqrt(), 0.0),
            omega,
        }
    }

    pub fn matrix(&self) -> DMatrix<C64> {
        let h12 = -0.5 * I * self.gamma12;
        let h13 = -0.5 * I * self.gamma13;
        let h23 = 0.5 * self.omega - 0.5 * I * self.gamma23;
        let [d1, d2, d3] = self.delta;
        DMatrix::from_row_slice(3, 3, &[d1, h12, h13, h12, d2, h23, h13, h23, d3])
    }
}

/// Closed-form effective parameters; each is the reciprocal of an entry of the
/// inverse Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveParams3 {
    pub delta_eff: [C64; 3],
    /// `None` when the closed form for the coupling is not defined (one of its
    /// denominators vanishes).
    pub gamma12_eff: Option<C64>,
    pub gamma13_eff: Option<C64>,
    pub gamma23_eff: Option<C64>,
}

pub fn effective_params_two_emitter(p: &TwoEmitterInputs) -> Result<EffectiveParams3, NumericError> {
    let zero = C64::new(0.0, 0.0);
    let d1 = nonzero(p.delta[0], "δ̃₁")?;
    let d2 = nonzero(p.delta[1], "δ̃₂")?;
    let d3 = nonzero(p.delta[2], "δ̃₃")?;
    let (g12, g13) = (p.gamma12, p.gamma13);
    let big_w = p.omega - I * p.gamma23;
    let w = 0.5 * big_w;

    let s = g12 * g12 / (4.0 * d2) + g13 * g13 / (4.0 * d3);
    let den1 = nonzero(big_w * big_w - 4.0 * d2 * d3, "W² − 4δ̃₂δ̃₃")?;
    let e1 = d1 + s - big_w * (big_w * s - g12 * g13) / den1;

    let x = g12 * g12 / (4.0 * d1) - big_w * big_w / (4.0 * d3);
    let den2 = nonzero(g13 * g13 + 4.0 * d1 * d3, "Γ₁₃² + 4δ̃₁δ̃₃")?;
    let e2 = d2 + x - g13 * (g13 * x + g12 * big_w) / den2;

    let y = g13 * g13 / (4.0 * d1) - big_w * big_w / (4.0 * d2);
    let den3 = nonzero(g12 * g12 + 4.0 * d1 * d2, "Γ₁₂² + 4δ̃₁δ̃₂")?;
    let e3 = d3 + y - g12 * (g12 * y + g13 * big_w) / den3;

    let gamma12_eff = (g12 != zero)
        .then(|| d3 - w * g13 / g12)
        .filter(|den| *den != zero)
        .map(|den| {
            -0.5 * I
                * (g12
                    + 4.0 * d1 * d2 / g12
                    + (g13 * g13 / g12 * d2 - 4.0 * w * w / g12 * d1 - w * g13 * (1.0 - 4.0 * d1 * d2 / (g12 * g12))) / den)
        });
    let gamma13_eff = (g13 != zero)
        .then(|| d2 - w * g12 / g13)
        .filter(|den| *den != zero)
        .map(|den| {
            -0.5 * I
                * (g13
                    + 4.0 * d1 * d3 / g13
                    + (g12 * g12 / g13 * d3 - 4.0 * w * w / g13 * d1 - w * g12 * (1.0 - 4.0 * d1 * d3 / (g13 * g13))) / den)
        });
    let gamma23_eff = (w != zero)
        .then(|| d1 + 0.25 * g12 * g13 / w)
        .filter(|den| *den != zero)
        .map(|den| w - d2 * d3 / w + 0.25 * (g12 - g13 * d2 / w) * (g13 - g12 * d3 / w) / den);

    Ok(EffectiveParams3 { delta_eff: [e1, e2, e3], gamma12_eff, gamma13_eff, gamma23_eff })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;
    use crate::model::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + b.norm())
    }

    fn assemble(sys: &SystemSpec, drive: Drive) -> NhMatrix {
        let b = build_single_excitation_basis(sys).unwrap();
        assemble_nh(sys, &b, &drive).unwrap()
    }

    #[test]
    fn two_level_diagonal() {
        let sys = SystemSpec { emitters: vec![two_level("A", 0.0, 0.0, 0.8, 0.2)], ..Default::default() };
        let h = assemble(&sys, Drive::new(0.3));
        assert_eq!(h.matrix[(0, 0)], c(0.3, -0.5));
        let h = assemble(&sys, Drive { detuning: 0.3, sign: -1.0, ground: 0 });
        assert_eq!(h.matrix[(0, 0)], c(-0.3, -0.5));
    }

    #[test]
    fn two_emitters_symmetric_exchange() {
        let k = 0.7;
        let sys = SystemSpec {
            emitters: vec![two_level("A", 0.0, 0.0, 1.0, 0.0), two_level("B", k, 0.0, 1.0, 0.0)],
            ..Default::default()
        };
        let h = assemble(&sys, Drive::new(0.0));
        let expect = -0.5 * I * C64::from_polar(1.0, k);
        assert!(close(h.matrix[(0, 1)], expect, 1e-15));
        assert!(close(h.matrix[(1, 0)], expect, 1e-15));
    }

    #[test]
    fn chiral_exchange_is_one_way() {
        let mut a = two_level("A", 0.0, 0.0, 1.0, 0.0);
        let mut b = two_level("B", 1.0, 0.0, 1.0, 0.0);
        for em in [&mut a, &mut b] {
            em.transitions[0].gamma1d_right = 1.0;
            em.transitions[0].gamma1d_left = 0.0;
        }
        let sys = SystemSpec { emitters: vec![a, b], ..Default::default() };
        let h = assemble(&sys, Drive::new(0.0));
        // B is downstream of A: B feels A, A does not feel B.
        assert!(close(h.matrix[(1, 0)], -I * C64::from_polar(1.0, 1.0), 1e-15));
        assert_eq!(h.matrix[(0, 1)], c(0.0, 0.0));
    }

    #[test]
    fn coherent_coupling_is_hermitian_pair() {
        let mut em = two_level("V", 0.0, 0.0, 1.0, 0.0);
        em.levels.push(Level { id: "f".into(), energy: 1.0, kind: LevelKind::Excited });
        em.coherent_couplings.push(CoherentCoupling { a: "e".into(), b: "f".into(), magnitude: 2.0, phase: 0.4 });
        let sys = SystemSpec { emitters: vec![em], ..Default::default() };
        let h = assemble(&sys, Drive::new(0.0));
        assert!(close(h.matrix[(0, 1)], C64::from_polar(2.0, 0.4), 1e-15));
        assert!(close(h.matrix[(1, 0)], C64::from_polar(2.0, -0.4), 1e-15));
        assert_eq!(h.matrix[(1, 1)], c(1.0, 0.0));
    }

    #[test]
    fn v_system_cross_decay() {
        let mut em = two_level("V", 0.0, 0.0, 1.0, 0.0);
        em.levels.push(Level { id: "f".into(), energy: 0.0, kind: LevelKind::Excited });
        let mut t = em.transitions[0].clone();
        t.excited = "f".into();
        t.gamma1d_right = 0.2;
        t.gamma1d_left = 0.2;
        t.coupling_phase = 0.3;
        em.transitions.push(t);
        let sys = SystemSpec { emitters: vec![em], ..Default::default() };
        let h = assemble(&sys, Drive::new(0.0));
        let g = -0.5 * I * (2.0 * (0.5f64 * 0.2).sqrt()) * C64::from_polar(1.0, -0.3);
        assert!(close(h.matrix[(0, 1)], g, 1e-15));
        let gb = -0.5 * I * (2.0 * (0.5f64 * 0.2).sqrt()) * C64::from_polar(1.0, 0.3);
        assert!(close(h.matrix[(1, 0)], gb, 1e-15));
    }

    #[test]
    fn lambda_detuning_is_relative_to_input_ground() {
        let sys = lambda(0.5, 0.5, 0.0, 0.0, 2.0);
        let h0 = assemble(&sys, Drive { detuning: 0.1, sign: 1.0, ground: 0 });
        let h1 = assemble(&sys, Drive { detuning: 0.1, sign: 1.0, ground: 1 });
        assert!(close(h0.matrix[(0, 0)], c(0.1, -0.5), 1e-15));
        assert!(close(h1.matrix[(0, 0)], c(-1.9, -0.5), 1e-15));
    }

    #[test]
    fn basis_mismatch() {
        let sys = SystemSpec { emitters: vec![two_level("A", 0.0, 0.0, 1.0, 0.0)], ..Default::default() };
        let mut b = build_single_excitation_basis(&sys).unwrap();
        b.excited.push(b.excited[0]);
        assert!(matches!(assemble_nh(&sys, &b, &Drive::default()), Err(NumericError::BasisMismatch { .. })));
    }

    #[test]
    fn inverse_of_singular_reports() {
        // Lossless V-system with equal detunings has a dark state at zero.
        let mut em = two_level("V", 0.0, 0.0, 1.0, 0.0);
        em.levels.push(Level { id: "f".into(), energy: 0.0, kind: LevelKind::Excited });
        let mut t = em.transitions[0].clone();
        t.excited = "f".into();
        em.transitions.push(t);
        let sys = SystemSpec { emitters: vec![em], ..Default::default() };
        let h = assemble(&sys, Drive::new(0.0));
        assert!(matches!(invert_nh(&h), Err(NumericError::SingularMatrix { .. })));
    }

    #[test]
    fn v_effective_example() {
        let v = effective_params_v(c(0.0, -0.5), c(0.0, -0.5), c(0.0, -0.25), c(0.0, -0.25)).unwrap();
        assert!(close(v.delta1_eff, c(0.0, -0.375), 1e-15));
        assert!(close(v.delta2_eff, c(0.0, -0.375), 1e-15));
    }

    #[test]
    fn v_effective_decoupled() {
        let v = effective_params_v(c(0.2, -0.5), c(-1.0, -0.3), c(0.0, 0.0), c(0.0, 0.0)).unwrap();
        assert_eq!(v.delta1_eff, c(0.2, -0.5));
        assert_eq!(v.delta2_eff, c(-1.0, -0.3));
        assert_eq!(v.g_eff, None);
    }

    #[test]
    fn v_effective_zero_detuning() {
        let e = effective_params_v(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)).unwrap_err();
        assert_eq!(e, NumericError::DivisionByZero { symbol: "δ̃₁" });
    }

    #[test]
    fn two_emitter_decoupled_limit() {
        let p = TwoEmitterInputs {
            delta: [c(0.1, -0.5), c(-0.4, -0.2), c(1.0, -1.0)],
            gamma12: c(0.0, 0.0),
            gamma13: c(0.0, 0.0),
            gamma23: c(0.0, 0.0),
            omega: 0.0,
        };
        let e = effective_params_two_emitter(&p).unwrap();
        assert_eq!(e.delta_eff, p.delta);
        assert_eq!(e.gamma12_eff, None);
    }

    #[test]
    fn two_emitter_reduces_to_pair_when_third_is_uncoupled() {
        let p = TwoEmitterInputs::from_rates([0.3, -0.2, 0.5], [1.0, 0.7, 0.0], [0.1, 0.2, 0.3], 0.0, 0.9);
        let e = effective_params_two_emitter(&p).unwrap();
        let h12 = -0.5 * I * p.gamma12;
        let v = effective_params_v(p.delta[0], p.delta[1], h12, h12).unwrap();
        assert!(close(e.delta_eff[0], v.delta1_eff, 1e-14));
        assert!(close(e.delta_eff[1], v.delta2_eff, 1e-14));
        assert!(close(e.gamma12_eff.unwrap(), v.g_eff.unwrap(), 1e-14));
        assert!(close(e.delta_eff[2], p.delta[2], 1e-14));
    }

    #[test]
    fn two_emitter_matrix_matches_assembled_system() {
        let (k, om) = (0.8, 1.4);
        let mut b = two_level("B", k, 0.0, 0.6, 0.1);
        b.levels.push(Level { id: "f".into(), energy: 0.5, kind: LevelKind::Excited });
        let mut t = b.transitions[0].clone();
        t.excited = "f".into();
        t.gamma1d_right = 0.45;
        t.gamma1d_left = 0.45;
        t.gamma_prime = 0.05;
        b.transitions.push(t);
        b.coherent_couplings.push(CoherentCoupling { a: "e".into(), b: "f".into(), magnitude: om / 2.0, phase: 0.0 });
        let sys = SystemSpec { emitters: vec![two_level("A", 0.0, -0.2, 1.2, 0.3), b], ..Default::default() };
        let h = assemble(&sys, Drive::new(0.1));
        let p = TwoEmitterInputs::from_rates([-0.1, 0.1, 0.6], [1.2, 0.6, 0.9], [0.3, 0.1, 0.05], om, k);
        assert!((h.matrix - p.matrix()).iter().all(|z| z.norm() < 1e-15));
    }

    fn rate() -> impl Strategy<Value = f64> {
        0.1..2.0f64
    }

    proptest! {
        #[test]
        fn v_effective_matches_inverse(d1 in -3.0..3.0f64, d2 in -3.0..3.0f64, g1 in rate(), g2 in rate(), p1 in rate(), p2 in rate(),
                                       om in 0.0..2.0f64, th in 0.0..std::f64::consts::TAU, ph in 0.0..std::f64::consts::TAU) {
            let dt1 = c(d1, -0.5 * (g1 + p1));
            let dt2 = c(d2, -0.5 * (g2 + p2));
            let g = C64::from_polar(om, th) - 0.5 * I * (g1 * g2).sqrt() * C64::from_polar(1.0, ph);
            let gb = C64::from_polar(om, -th) - 0.5 * I * (g1 * g2).sqrt() * C64::from_polar(1.0, -ph);
            let m = DMatrix::from_row_slice(2, 2, &[dt1, g, gb, dt2]);
            let inv = invert_matrix(&m).unwrap().matrix;
            let v = effective_params_v(dt1, dt2, g, gb).unwrap();
            prop_assert!(close(1.0 / v.delta1_eff, inv[(0, 0)], 1e-12));
            prop_assert!(close(1.0 / v.delta2_eff, inv[(1, 1)], 1e-12));
            prop_assert!(close(1.0 / v.g_eff.unwrap(), inv[(0, 1)], 1e-12));
            prop_assert!(close(1.0 / v.g_prime_eff.unwrap(), inv[(1, 0)], 1e-12));
        }

        #[test]
        fn two_emitter_closed_forms_match_inverse(d in proptest::array::uniform3(-3.0..3.0f64), g in proptest::array::uniform3(rate()),
                                                  gp in proptest::array::uniform3(rate()), om in rate(), k in 0.01..6.27f64) {
            let p = TwoEmitterInputs::from_rates(d, g, gp, om, k);
            let inv = invert_matrix(&p.matrix()).unwrap().matrix;
            let e = effective_params_two_emitter(&p).unwrap();
            for j in 0..3 {
                prop_assert!(close(1.0 / e.delta_eff[j], inv[(j, j)], 1e-10));
            }
            prop_assert!(close(1.0 / e.gamma12_eff.unwrap(), inv[(0, 1)], 1e-10));
            prop_assert!(close(1.0 / e.gamma13_eff.unwrap(), inv[(0, 2)], 1e-10));
            prop_assert!(close(1.0 / e.gamma23_eff.unwrap(), inv[(1, 2)], 1e-10));
        }

        #[test]
        fn passivity(d in proptest::array::uniform3(-3.0..3.0f64), g in proptest::array::uniform3(rate()),
                     gp in proptest::array::uniform3(0.0..1.0f64), om in 0.0..2.0f64, k in 0.0..std::f64::consts::TAU, chi in 0.0..1.0f64) {
            let mut b = two_level("B", k, d[1], g[1], gp[1]);
            b.levels.push(Level { id: "f".into(), energy: d[2], kind: LevelKind::Excited });
            let mut t = b.transitions[0].clone();
            t.excited = "f".into();
            t.gamma1d_right = g[2] * chi;
            t.gamma1d_left = g[2] * (1.0 - chi);
            t.gamma_prime = gp[2];
            b.transitions.push(t);
            b.coherent_couplings.push(CoherentCoupling { a: "e".into(), b: "f".into(), magnitude: om, phase: 0.3 });
            let mut a = two_level("A", 0.0, d[0], g[0], gp[0]);
            a.transitions[0].gamma1d_right = g[0] * chi;
            a.transitions[0].gamma1d_left = g[0] * (1.0 - chi);
            let sys = SystemSpec { emitters: vec![a, b], ..Default::default() };
            let h = assemble(&sys, Drive::new(0.0)).matrix;
            let eig = h.clone().schur().eigenvalues().unwrap();
            for z in eig.iter() {
                prop_assert!(z.im <= 1e-12, "eigenvalue {z}");
            }
            // The anti-Hermitian part is a decay matrix.
            let decay = (h.adjoint() - h).map(|z| -I * z);
            let e = nalgebra::linalg::SymmetricEigen::new(decay).eigenvalues;
            for x in e.iter() {
                prop_assert!(*x >= -1e-12);
            }
        }
    }
}
