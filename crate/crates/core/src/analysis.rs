//! Closed-form and s-domain companions to the time-domain solver.
//!
//! * Markovian collapse M_eff = Σₙ Aₙ e^{inφ}, whose eigenvalues expose lossless
//!   (bound) modes and decoherence-free couplings.
//! * Laplace-domain coupling pair of a dimer: with ϕ̃ = iφ − sτ the
//!   coefficient of c̃_l in the equation for c̃_j is Σₙ Aₙ[j, l] e^{nϕ̃}.
//! * Reciprocity predicate from the modulus of that pair.
//! * Pre-feedback closed form of the small dimer.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::model::{DelayedLinearSystem, Emitter, ModelError, SystemParams, TAP_COUNT};

/// Absolute tolerance (γ = 1 units) below which a rate or coefficient counts as zero.
pub const ZERO_TOLERANCE: f64 = 1e-12;
/// Tolerance on the coefficients of the modulus-asymmetry polynomial.
pub const PREDICATE_TOLERANCE: f64 = 1e-10;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("operation needs a two-emitter system, got dimension {0}")]
    NotDimer(usize),
    #[error("closed form only holds before the first feedback: t = {t} is outside [0, {tau})")]
    OutsideEarlyWindow { t: f64, tau: f64 },
    #[error("initial emitter {0} is not part of a dimer")]
    BadInitial(Emitter),
    #[error("eigenvalue computation did not converge")]
    Eigen,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Markovian (τ → 0) collapse of a retarded system.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveMatrix {
    pub matrix: DMatrix<Complex64>,
    pub eigenvalues: Vec<Complex64>,
}

impl EffectiveMatrix {
    /// Population decay rates −2 Re λ of the eigenmodes.
    pub fn decay_rates(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|l| -2.0 * l.re).collect()
    }

    pub fn has_lossless_mode(&self) -> bool {
        self.eigenvalues
            .iter()
            .any(|l| l.re.abs() <= ZERO_TOLERANCE)
    }

    /// exp(M_eff t) c(0).
    pub fn propagate(&self, c0: &[Complex64], t: f64) -> Vec<Complex64> {
        let evolution = (&self.matrix * Complex64::from(t)).exp();
        (evolution * DVector::from_column_slice(c0))
            .iter()
            .copied()
            .collect()
    }
}

pub fn markovian_effective_matrix(
    system: &DelayedLinearSystem,
) -> Result<EffectiveMatrix, AnalysisError> {
    let d = system.dimension;
    let mut matrix = DMatrix::zeros(d, d);
    for n in 0..TAP_COUNT {
        matrix += &system.taps[n] * system.phase_factor(n);
    }
    let eigenvalues = matrix
        .clone()
        .eigenvalues()
        .ok_or(AnalysisError::Eigen)?
        .iter()
        .copied()
        .collect();
    Ok(EffectiveMatrix {
        matrix,
        eigenvalues,
    })
}

/// Waveguide-mediated coupling g_eff = −i(γ/2)(3e^{iφ} + e^{3iφ}) of two braided
/// giant atoms in the Markovian limit, in Hamiltonian form (dc_a/dt ∋ −i g_eff c_b).
pub fn braided_indirect_coupling(phi: f64) -> Complex64 {
    -I * 0.5 * (Complex64::from_polar(3.0, phi) + Complex64::from_polar(1.0, 3.0 * phi))
}

/// Overall s-domain couplings of a dimer: `forward` multiplies c̃_b in the
/// equation for c̃_a, `backward` multiplies c̃_a in the equation for c̃_b.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingPair {
    pub forward: Complex64,
    pub backward: Complex64,
}

fn require_dimer(system: &DelayedLinearSystem) -> Result<(), AnalysisError> {
    if system.dimension == 2 {
        Ok(())
    } else {
        Err(AnalysisError::NotDimer(system.dimension))
    }
}

/// Per-tap off-diagonal coefficients Aₙ[j, l] e^{inφ}, n = 0..=3.
fn retarded_coefficients(
    system: &DelayedLinearSystem,
    row: usize,
    col: usize,
) -> [Complex64; TAP_COUNT] {
    std::array::from_fn(|n| system.taps[n][(row, col)] * system.phase_factor(n))
}

pub fn sdomain_coupling_pair(
    system: &DelayedLinearSystem,
    s: Complex64,
) -> Result<CouplingPair, AnalysisError> {
    require_dimer(system)?;
    let varphi = I * system.phi - s * system.tau;
    let pair = |row, col| {
        (0..TAP_COUNT)
            .map(|n| system.taps[n][(row, col)] * (varphi * n as f64).exp())
            .sum()
    };
    Ok(CouplingPair {
        forward: pair(0, 1),
        backward: pair(1, 0),
    })
}

/// |forward(s)|² − |backward(s)|².
pub fn modulus_asymmetry(system: &DelayedLinearSystem, s: Complex64) -> Result<f64, AnalysisError> {
    let pair = sdomain_coupling_pair(system, s)?;
    Ok(pair.forward.norm_sqr() - pair.backward.norm_sqr())
}

/// For real s the pair is a polynomial in z = e^{−sτ}, so the modulus
/// asymmetry is the real polynomial Σₖ aₖ zᵏ (k = 0..=6) returned here.
/// With τ = 0 only the sum Σₖ aₖ is meaningful.
pub fn asymmetry_polynomial(system: &DelayedLinearSystem) -> Result<Vec<f64>, AnalysisError> {
    require_dimer(system)?;
    let fwd = retarded_coefficients(system, 0, 1);
    let bwd = retarded_coefficients(system, 1, 0);
    let mut coefs = vec![0.0; 2 * TAP_COUNT - 1];
    for n in 0..TAP_COUNT {
        for m in 0..TAP_COUNT {
            coefs[n + m] += (fwd[n] * fwd[m].conj() - bwd[n] * bwd[m].conj()).re;
        }
    }
    Ok(coefs)
}

/// True when the modulus asymmetry vanishes identically in s.
///
/// For the small dimer this reduces to sinθ·cosφ = 0; for the braided giant
/// dimer to sinθ = 0 or cosφ = cos3φ = 0.
pub fn reciprocity_predicted(system: &DelayedLinearSystem) -> Result<bool, AnalysisError> {
    let coefs = asymmetry_polynomial(system)?;
    Ok(if system.tau > 0.0 {
        coefs.iter().all(|a| a.abs() <= PREDICATE_TOLERANCE)
    } else {
        coefs.iter().sum::<f64>().abs() <= PREDICATE_TOLERANCE
    })
}

/// (c_a(t), c_b(t)) of the small dimer for 0 ≤ t < τ, where no retarded term
/// has switched on yet.
pub fn early_time_closed_form(
    params: &SystemParams,
    t: f64,
    init: Emitter,
) -> Result<(Complex64, Complex64), AnalysisError> {
    params.check()?;
    let tau = params.delay();
    if !(t >= 0.0 && t < tau) {
        return Err(AnalysisError::OutsideEarlyWindow { t, tau });
    }
    let envelope = (-(params.kappa_over_gamma + 1.0) * t / 2.0).exp();
    let j = params.j_modulus_over_gamma;
    let stay = Complex64::from(envelope * (j * t).cos());
    let moved = envelope * (j * t).sin();
    match init {
        Emitter::A => Ok((stay, -I * Complex64::from_polar(moved, -params.theta))),
        Emitter::B => Ok((-I * Complex64::from_polar(moved, params.theta), stay)),
        Emitter::C => Err(AnalysisError::BadInitial(Emitter::C)),
    }
}
