//! Physical parameters and the three emitter configurations, each expressed as
//! an instance of a generic retarded linear system
//!
//! ```text
//! dc/dt = Σₙ Aₙ e^{inφ} Θ(t − nτ) c(t − nτ),   n = 0..=3
//! ```
//!
//! All rates are in units of the waveguide emission rate γ (γ = 1), so times
//! are measured in 1/γ.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of delay taps carried by every system (A₀ … A₃).
pub const TAP_COUNT: usize = 4;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("parameter `{field}` = {value} is outside its domain: {reason}")]
    Domain {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("invalid system: {}", format_issues(.0))]
    Invalid(Vec<ValidationIssue>),
}

fn format_issues(issues: &[ValidationIssue]) -> String {
    issues
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// One violated check found by [`validate`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationIssue {
    #[error("dimension {0} is not supported (expected 2 or 3)")]
    Dimension(usize),
    #[error("tap A{tap} has shape {rows}x{cols}, expected {expected}x{expected}")]
    TapShape {
        tap: usize,
        rows: usize,
        cols: usize,
        expected: usize,
    },
    #[error("expected {TAP_COUNT} tap matrices, found {0}")]
    TapCount(usize),
    #[error("tap A{tap} has a non-finite entry at ({row}, {col})")]
    NonFiniteTap { tap: usize, row: usize, col: usize },
    #[error("delay tau = {0} is negative")]
    NegativeDelay(f64),
    #[error("field `{0}` is not finite")]
    NonFinite(&'static str),
    #[error("{found} labels given for a {expected}-emitter system")]
    Labels { expected: usize, found: usize },
}

/// Emitter label. The ordering is fixed as (a, b, c).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emitter {
    A,
    B,
    C,
}

impl Emitter {
    pub const ALL: [Emitter; 3] = [Emitter::A, Emitter::B, Emitter::C];

    pub fn index(self) -> usize {
        match self {
            Emitter::A => 0,
            Emitter::B => 1,
            Emitter::C => 2,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            Emitter::A => "a",
            Emitter::B => "b",
            Emitter::C => "c",
        }
    }
}

impl fmt::Display for Emitter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Emitter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" => Ok(Emitter::A),
            "b" => Ok(Emitter::B),
            "c" => Ok(Emitter::C),
            other => Err(format!("unknown emitter `{other}` (expected a, b or c)")),
        }
    }
}

/// Single excitation in one emitter, waveguide in vacuum, zero history for t < 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitialState {
    pub excited: Emitter,
}

impl InitialState {
    pub fn excited(excited: Emitter) -> Self {
        Self { excited }
    }

    /// Unit basis vector of the excited emitter in a `dimension`-emitter system.
    pub fn amplitudes(&self, dimension: usize) -> Vec<Complex64> {
        let mut c = vec![Complex64::new(0.0, 0.0); dimension];
        if let Some(slot) = c.get_mut(self.excited.index()) {
            *slot = Complex64::new(1.0, 0.0);
        }
        c
    }
}

impl From<Emitter> for InitialState {
    fn from(excited: Emitter) -> Self {
        Self { excited }
    }
}

/// Dimensionless physical parameters (γ ≡ 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub omega0_over_gamma: f64,
    pub kappa_over_gamma: f64,
    pub j_modulus_over_gamma: f64,
    /// Phase of the direct coupling, J = |J| e^{iθ}.
    pub theta: f64,
    /// Port separation normalized by the coherence length, η = dγ/v_g.
    pub eta: f64,
}

impl SystemParams {
    /// Emitter frequency used throughout the small-dimer and trimer examples.
    pub const REFERENCE_OMEGA0: f64 = 112.19;
    /// Non-waveguide loss used throughout the small-dimer and trimer examples.
    pub const REFERENCE_KAPPA: f64 = 8.7e-3;

    pub fn new(
        omega0_over_gamma: f64,
        kappa_over_gamma: f64,
        j_modulus_over_gamma: f64,
        theta: f64,
        eta: f64,
    ) -> Result<Self, ModelError> {
        let params = Self {
            omega0_over_gamma,
            kappa_over_gamma,
            j_modulus_over_gamma,
            theta,
            eta,
        };
        params.check()?;
        Ok(params)
    }

    /// Reference parameters (ω₀/γ = 112.19, κ/γ = 8.7e-3) with the given
    /// coupling and separation.
    pub fn reference(j_modulus_over_gamma: f64, theta: f64, eta: f64) -> Result<Self, ModelError> {
        Self::new(
            Self::REFERENCE_OMEGA0,
            Self::REFERENCE_KAPPA,
            j_modulus_over_gamma,
            theta,
            eta,
        )
    }

    /// Picks ω₀/γ = φ/η so that the propagation phase is (up to rounding) `phi`.
    /// With η = 0 the frequency falls back to the reference value.
    pub fn with_phase(
        kappa_over_gamma: f64,
        j_modulus_over_gamma: f64,
        theta: f64,
        eta: f64,
        phi: f64,
    ) -> Result<Self, ModelError> {
        let omega0 = if eta > 0.0 {
            phi / eta
        } else {
            Self::REFERENCE_OMEGA0
        };
        Self::new(omega0, kappa_over_gamma, j_modulus_over_gamma, theta, eta)
    }

    pub fn check(&self) -> Result<(), ModelError> {
        let fields = [
            ("omega0_over_gamma", self.omega0_over_gamma),
            ("kappa_over_gamma", self.kappa_over_gamma),
            ("j_modulus_over_gamma", self.j_modulus_over_gamma),
            ("theta", self.theta),
            ("eta", self.eta),
        ];
        for (field, value) in fields {
            if !value.is_finite() {
                return Err(ModelError::Domain {
                    field,
                    value,
                    reason: "must be finite",
                });
            }
        }
        if self.omega0_over_gamma <= 0.0 {
            return Err(ModelError::Domain {
                field: "omega0_over_gamma",
                value: self.omega0_over_gamma,
                reason: "must be positive",
            });
        }
        for (field, value) in [
            ("kappa_over_gamma", self.kappa_over_gamma),
            ("j_modulus_over_gamma", self.j_modulus_over_gamma),
            ("eta", self.eta),
        ] {
            if value < 0.0 {
                return Err(ModelError::Domain {
                    field,
                    value,
                    reason: "must be nonnegative",
                });
            }
        }
        Ok(())
    }

    /// Propagation phase φ = ω₀η/γ, not snapped to multiples of π.
    pub fn phase(&self) -> f64 {
        self.omega0_over_gamma * self.eta
    }

    /// Unit delay τ = η in units of 1/γ.
    pub fn delay(&self) -> f64 {
        self.eta
    }

    /// J = |J| e^{iθ}.
    pub fn coupling(&self) -> Complex64 {
        Complex64::from_polar(self.j_modulus_over_gamma, self.theta)
    }
}

/// φ = ω₀η/γ.
pub fn phase_from_eta(omega0_over_gamma: f64, eta: f64) -> Result<f64, ModelError> {
    for (field, value) in [("omega0_over_gamma", omega0_over_gamma), ("eta", eta)] {
        if !value.is_finite() {
            return Err(ModelError::Domain {
                field,
                value,
                reason: "must be finite",
            });
        }
        if value < 0.0 {
            return Err(ModelError::Domain {
                field,
                value,
                reason: "must be nonnegative",
            });
        }
    }
    Ok(omega0_over_gamma * eta)
}

/// Which coupling geometry a system was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    /// Two point-coupled emitters, one waveguide link of length d.
    SmallDimer,
    /// Two braided giant atoms with ports at x₁, x₃ and x₂, x₄.
    GiantDimer,
    /// Braided giant atoms a and c sharing ports, b interleaved.
    GiantTrimer,
    Custom,
}

impl SystemKind {
    pub fn name(self) -> &'static str {
        match self {
            SystemKind::SmallDimer => "small-dimer",
            SystemKind::GiantDimer => "giant-dimer",
            SystemKind::GiantTrimer => "trimer",
            SystemKind::Custom => "custom",
        }
    }
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SystemKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "small-dimer" => Ok(SystemKind::SmallDimer),
            "giant-dimer" => Ok(SystemKind::GiantDimer),
            "trimer" | "giant-trimer" => Ok(SystemKind::GiantTrimer),
            other => Err(format!(
                "unknown system `{other}` (expected small-dimer, giant-dimer or trimer)"
            )),
        }
    }
}

/// `dc/dt = Σₙ Aₙ e^{inφ} Θ(t − nτ) c(t − nτ)`.
///
/// The propagation phase lives only in `phi`; tap matrices never carry it, so
/// φ can be swept without rebuilding the taps.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayedLinearSystem {
    pub kind: SystemKind,
    pub dimension: usize,
    pub tau: f64,
    pub phi: f64,
    /// A₀ … A₃; `taps[n][(j, l)]` couples c_l(t − nτ) into dc_j/dt.
    pub taps: Vec<DMatrix<Complex64>>,
    pub labels: Vec<Emitter>,
}

impl DelayedLinearSystem {
    fn zeros(kind: SystemKind, dimension: usize, params: &SystemParams) -> Self {
        Self {
            kind,
            dimension,
            tau: params.delay(),
            phi: params.phase(),
            taps: vec![DMatrix::zeros(dimension, dimension); TAP_COUNT],
            labels: Emitter::ALL[..dimension].to_vec(),
        }
    }

    /// A₀, the instantaneous part.
    pub fn instantaneous(&self) -> &DMatrix<Complex64> {
        &self.taps[0]
    }

    /// e^{inφ} for tap `n`.
    pub fn phase_factor(&self, n: usize) -> Complex64 {
        Complex64::from_polar(1.0, n as f64 * self.phi)
    }

    /// Highest tap index with a nonzero matrix.
    pub fn max_active_tap(&self) -> usize {
        (0..self.taps.len())
            .rev()
            .find(|&n| self.taps[n].iter().any(|z| *z != Complex64::new(0.0, 0.0)))
            .unwrap_or(0)
    }

    /// Copy with emitters permuted: entry (j, l) of every tap moves to
    /// (perm[j], perm[l]).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let d = self.dimension;
        let taps = self
            .taps
            .iter()
            .map(|a| {
                let mut out = DMatrix::zeros(d, d);
                for j in 0..d {
                    for l in 0..d {
                        out[(perm[j], perm[l])] = a[(j, l)];
                    }
                }
                out
            })
            .collect();
        Self {
            taps,
            ..self.clone()
        }
    }
}

/// Small-atom dimer: each emitter decays at (κ+γ)/2, is driven by the other
/// one's retarded field after τ, and couples directly through J.
pub fn build_small_dimer(params: &SystemParams) -> Result<DelayedLinearSystem, ModelError> {
    params.check()?;
    let mut sys = DelayedLinearSystem::zeros(SystemKind::SmallDimer, 2, params);
    let j = params.coupling();
    let local = Complex64::from(-(params.kappa_over_gamma + 1.0) / 2.0);

    let a0 = &mut sys.taps[0];
    a0[(0, 0)] = local;
    a0[(1, 1)] = local;
    a0[(0, 1)] = -I * j;
    a0[(1, 0)] = -I * j.conj();

    let a1 = &mut sys.taps[1];
    a1[(0, 1)] = Complex64::from(-0.5);
    a1[(1, 0)] = Complex64::from(-0.5);
    Ok(sys)
}

/// Braided giant-atom dimer. A nonzero κ is added to the local decay.
pub fn build_giant_dimer(params: &SystemParams) -> Result<DelayedLinearSystem, ModelError> {
    params.check()?;
    let mut sys = DelayedLinearSystem::zeros(SystemKind::GiantDimer, 2, params);
    let j = params.coupling();
    let local = Complex64::from(-1.0 - params.kappa_over_gamma);

    let a0 = &mut sys.taps[0];
    a0[(0, 0)] = local;
    a0[(1, 1)] = local;
    a0[(0, 1)] = -I * j;
    a0[(1, 0)] = -I * j.conj();

    for (n, value) in [(1, -1.5), (3, -0.5)] {
        sys.taps[n][(0, 1)] = Complex64::from(value);
        sys.taps[n][(1, 0)] = Complex64::from(value);
    }
    sys.taps[2][(0, 0)] = Complex64::from(-1.0);
    sys.taps[2][(1, 1)] = Complex64::from(-1.0);
    Ok(sys)
}

/// Braided giant-atom trimer, ordering (a, b, c). a and c share the outer
/// port pair and couple directly through J; b is interleaved.
pub fn build_giant_trimer(params: &SystemParams) -> Result<DelayedLinearSystem, ModelError> {
    params.check()?;
    let mut sys = DelayedLinearSystem::zeros(SystemKind::GiantTrimer, 3, params);
    let j = params.coupling();
    let local = Complex64::from(-1.0 - params.kappa_over_gamma);
    let (a, b, c) = (0, 1, 2);

    let a0 = &mut sys.taps[0];
    for k in 0..3 {
        a0[(k, k)] = local;
    }
    a0[(a, c)] = -I * (j - I);
    a0[(c, a)] = -I * (j.conj() - I);

    for (n, value) in [(1, -1.5), (3, -0.5)] {
        for (row, col) in [(a, b), (b, a), (b, c), (c, b)] {
            sys.taps[n][(row, col)] = Complex64::from(value);
        }
    }
    for (row, col) in [(a, a), (b, b), (c, c), (a, c), (c, a)] {
        sys.taps[2][(row, col)] = Complex64::from(-1.0);
    }
    Ok(sys)
}

pub fn build(kind: SystemKind, params: &SystemParams) -> Result<DelayedLinearSystem, ModelError> {
    match kind {
        SystemKind::SmallDimer => build_small_dimer(params),
        SystemKind::GiantDimer => build_giant_dimer(params),
        SystemKind::GiantTrimer => build_giant_trimer(params),
        SystemKind::Custom => Err(ModelError::Domain {
            field: "system",
            value: f64::NAN,
            reason: "custom systems have no builder",
        }),
    }
}

/// Structural checks on a (possibly hand-assembled) system.
pub fn validate(system: &DelayedLinearSystem) -> Result<(), Vec<ValidationIssue>> {
    let mut issues = Vec::new();
    let d = system.dimension;
    if !(2..=3).contains(&d) {
        issues.push(ValidationIssue::Dimension(d));
    }
    if !system.tau.is_finite() {
        issues.push(ValidationIssue::NonFinite("tau"));
    } else if system.tau < 0.0 {
        issues.push(ValidationIssue::NegativeDelay(system.tau));
    }
    if !system.phi.is_finite() {
        issues.push(ValidationIssue::NonFinite("phi"));
    }
    if system.taps.len() != TAP_COUNT {
        issues.push(ValidationIssue::TapCount(system.taps.len()));
    }
    for (tap, a) in system.taps.iter().enumerate() {
        if a.nrows() != d || a.ncols() != d {
            issues.push(ValidationIssue::TapShape {
                tap,
                rows: a.nrows(),
                cols: a.ncols(),
                expected: d,
            });
            continue;
        }
        if let Some((row, col)) = (0..d)
            .flat_map(|r| (0..d).map(move |c| (r, c)))
            .find(|&(r, c)| !(a[(r, c)].re.is_finite() && a[(r, c)].im.is_finite()))
        {
            issues.push(ValidationIssue::NonFiniteTap { tap, row, col });
        }
    }
    if system.labels.len() != d {
        issues.push(ValidationIssue::Labels {
            expected: d,
            found: system.labels.len(),
        });
    }
    if issues.is_empty() {
        Ok(())
    } else {
        Err(issues)
    }
}

/// Reduces an angle to (−π, π].
pub fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}
