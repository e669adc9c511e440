//! Photon scattering kernel and the transmitted/reflected amplitudes.
//!
//! The kernel is `S^{ζζ'}_{gg'} = Σ A*_{e,g}(ζ) [H⁻¹]_{ee'} A_{e',g'}(ζ')`, with
//! `A_{e,g}(ζ) = √Γ^ζ_{eg} e^{iφ_{eg}} e^{i k_ζ z_j}` and `k_R = −k_L = k₀`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::NumericError;
use crate::hamiltonian::{assemble_nh, invert_nh, Drive, NhInverse};
use crate::linalg::PIVOT_TOLERANCE;
use crate::model::{build_single_excitation_basis, CombinedBasis, ModelError, SystemSpec};

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Right,
    Left,
}

impl Direction {
    pub fn opposite(self) -> Self {
        match self {
            Direction::Right => Direction::Left,
            Direction::Left => Direction::Right,
        }
    }

    fn index(self) -> usize {
        match self {
            Direction::Right => 0,
            Direction::Left => 1,
        }
    }

    fn k_sign(self) -> f64 {
        match self {
            Direction::Right => 1.0,
            Direction::Left => -1.0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScatterError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("system has several ground states; elastic amplitudes are not defined")]
    MultiGroundElastic,
    #[error("detuning grid must be finite and sorted")]
    BadGrid,
}

/// Emission amplitudes `A_{e,g}(ζ)` as an `n_excited × n_ground` matrix.
pub fn coupling_matrix(system: &SystemSpec, basis: &CombinedBasis, dir: Direction) -> DMatrix<C64> {
    let mut a = DMatrix::zeros(basis.n_excited(), basis.n_ground());
    for (e, s) in basis.excited.iter().enumerate() {
        let em = &system.emitters[s.emitter];
        let lvl = &em.levels[s.level].id;
        for (gi, jg) in basis.grounds.iter().enumerate() {
            let g = &em.levels[jg.levels[s.emitter]].id;
            if let Some(t) = em.transition(lvl, g) {
                let rate = match dir {
                    Direction::Right => t.gamma1d_right,
                    Direction::Left => t.gamma1d_left,
                };
                let phase = t.coupling_phase + dir.k_sign() * em.phase_position;
                a[(e, gi)] = C64::from_polar(rate.sqrt(), phase);
            }
        }
    }
    a
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringKernel {
    n_ground: usize,
    /// Indexed `[out][in]`, each an `n_ground × n_ground` matrix `[g_out, g_in]`.
    blocks: [[DMatrix<C64>; 2]; 2],
    pub condition_estimate: f64,
}

impl ScatteringKernel {
    pub fn n_ground(&self) -> usize {
        self.n_ground
    }

    pub fn get(&self, out: Direction, input: Direction, g_out: usize, g_in: usize) -> C64 {
        self.blocks[out.index()][input.index()][(g_out, g_in)]
    }
}

pub fn scattering_kernel(system: &SystemSpec, basis: &CombinedBasis, inverse: &NhInverse) -> ScatteringKernel {
    let a = [coupling_matrix(system, basis, Direction::Right), coupling_matrix(system, basis, Direction::Left)];
    let block = |o: usize, i: usize| a[o].adjoint() * &inverse.matrix * &a[i];
    ScatteringKernel {
        n_ground: basis.n_ground(),
        blocks: [[block(0, 0), block(0, 1)], [block(1, 0), block(1, 1)]],
        condition_estimate: inverse.condition_estimate,
    }
}

/// Builds the basis, assembles, inverts and contracts in one go.
pub fn kernel_at(system: &SystemSpec, drive: &Drive) -> Result<ScatteringKernel, ScatterError> {
    let basis = build_single_excitation_basis(system)?;
    kernel_with_basis(system, &basis, drive)
}

fn kernel_with_basis(system: &SystemSpec, basis: &CombinedBasis, drive: &Drive) -> Result<ScatteringKernel, ScatterError> {
    let h = assemble_nh(system, basis, drive)?;
    match invert_nh(&h) {
        Ok(inv) => Ok(scattering_kernel(system, basis, &inv)),
        Err(e @ NumericError::SingularMatrix { .. }) => Ok(range_kernel(system, basis, &h.matrix).ok_or(e)?),
        Err(e) => Err(e.into()),
    }
}

/// Relative residual below which a singular mode counts as decoupled.
const DECOUPLED_TOLERANCE: f64 = 1e-9;

/// An undamped eigenmode (a dark state on resonance) makes `H` singular. In a
/// passive system such a mode has no overlap with any guided coupling, so the
/// kernel is still fixed by `H` on its range and the pseudo-inverse gives it.
/// `None` if the singular subspace does couple to the guide.
fn range_kernel(system: &SystemSpec, basis: &CombinedBasis, h: &DMatrix<C64>) -> Option<ScatteringKernel> {
    let svd = h.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cut = PIVOT_TOLERANCE * smax;
    let smin = svd.singular_values.iter().copied().filter(|s| *s > cut).fold(f64::INFINITY, f64::min);
    let pinv = svd.pseudo_inverse(cut).ok()?;
    let n = h.nrows();
    let onto_range = h * &pinv;
    let off_rows = DMatrix::<C64>::identity(n, n) - &pinv * h;
    for dir in [Direction::Right, Direction::Left] {
        let a = coupling_matrix(system, basis, dir);
        let scale = a.norm();
        if (&onto_range * &a - &a).norm() > DECOUPLED_TOLERANCE * scale
            || (a.adjoint() * &off_rows).norm() > DECOUPLED_TOLERANCE * scale
        {
            return None;
        }
    }
    Some(scattering_kernel(system, basis, &NhInverse { matrix: pinv, condition_estimate: smax / smin }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudePair {
    pub t: C64,
    pub r: C64,
}

impl AmplitudePair {
    pub fn transmission(&self) -> f64 {
        self.t.norm_sqr()
    }

    pub fn reflection(&self) -> f64 {
        self.r.norm_sqr()
    }
}

/// Elastic amplitudes for a photon entering in `dir` with the system in
/// `ground`. The reflected amplitude is referenced to `z = 0`.
pub fn output_amplitudes(kernel: &ScatteringKernel, dir: Direction, ground: usize) -> Result<AmplitudePair, ScatterError> {
    output_amplitudes_with_phase(kernel, dir, ground, 0.0)
}

/// As [`output_amplitudes`], with an extra observation phase on the reflected
/// amplitude (e.g. `2k₀(z₀ − z')` for a detector at `z'`).
pub fn output_amplitudes_with_phase(
    kernel: &ScatteringKernel,
    dir: Direction,
    ground: usize,
    reflection_phase: f64,
) -> Result<AmplitudePair, ScatterError> {
    if kernel.n_ground != 1 {
        return Err(ScatterError::MultiGroundElastic);
    }
    let t = 1.0 + I * kernel.get(dir, dir, ground, ground);
    let r = I * kernel.get(dir.opposite(), dir, ground, ground) * C64::from_polar(1.0, reflection_phase);
    Ok(AmplitudePair { t, r })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub detunings: Vec<f64>,
    pub amplitudes: Vec<AmplitudePair>,
}

impl Spectrum {
    pub fn transmission(&self) -> Vec<f64> {
        self.amplitudes.iter().map(AmplitudePair::transmission).collect()
    }

    pub fn reflection(&self) -> Vec<f64> {
        self.amplitudes.iter().map(AmplitudePair::reflection).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumWarning {
    pub index: usize,
    pub detuning: f64,
    pub error: NumericError,
}

/// Amplitudes at every grid point. Points where the Hamiltonian cannot be
/// inverted are filled with NaN and reported as warnings.
pub fn sweep_spectrum(
    system: &SystemSpec,
    grid: &[f64],
    dir: Direction,
    sign: f64,
) -> Result<(Spectrum, Vec<SpectrumWarning>), ScatterError> {
    if grid.iter().any(|x| !x.is_finite()) || grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(ScatterError::BadGrid);
    }
    let basis = build_single_excitation_basis(system)?;
    if basis.n_ground() != 1 {
        return Err(ScatterError::MultiGroundElastic);
    }
    let results: Vec<Result<AmplitudePair, ScatterError>> = grid
        .par_iter()
        .map(|&d| {
            let k = kernel_with_basis(system, &basis, &Drive { detuning: d, sign, ground: 0 })?;
            output_amplitudes(&k, dir, 0)
        })
        .collect();

    let nan = C64::new(f64::NAN, f64::NAN);
    let mut amplitudes = Vec::with_capacity(grid.len());
    let mut warnings = Vec::new();
    for (index, (res, &detuning)) in results.into_iter().zip(grid).enumerate() {
        match res {
            Ok(a) => amplitudes.push(a),
            Err(ScatterError::Numeric(error)) => {
                warnings.push(SpectrumWarning { index, detuning, error });
                amplitudes.push(AmplitudePair { t: nan, r: nan });
            }
            Err(e) => return Err(e),
        }
    }
    Ok((Spectrum { detunings: grid.to_vec(), amplitudes }, warnings))
}
