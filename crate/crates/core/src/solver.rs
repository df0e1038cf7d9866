//! Fixed-step integration of a [`DelayedLinearSystem`] on a delay-aligned grid.
//!
//! The step is h = τ/N, so every breakpoint t = nτ of the Heaviside taps is a
//! grid node and no step straddles a derivative jump. Each step is classical
//! RK4; the retarded arguments at stage times fall on history nodes or
//! interval midpoints, the latter filled in by cubic Hermite interpolation of
//! the stored (value, derivative) pairs. History is zero for t < 0 and
//! Θ(0) = 1.
//!
//! Each node keeps two derivatives: the one seen from the interval to its
//! right (what the Θ(0) = 1 convention gives at the node itself) and the one
//! seen from the interval to its left. They only differ at breakpoints, and
//! dense output uses the one belonging to the interval being interpolated.

use num_complex::Complex64;
use thiserror::Error;

use crate::model::{validate, DelayedLinearSystem, Emitter, InitialState, ValidationIssue};

/// Smallest accepted number of steps per unit delay.
pub const MIN_STEPS_PER_DELAY: usize = 16;
/// Default resolution; far below plotting accuracy at the reference time scales.
pub const DEFAULT_STEPS_PER_DELAY: usize = 200;
/// Any amplitude modulus above this aborts the run.
pub const DIVERGENCE_BOUND: f64 = 10.0;

const MAX_DIM: usize = 3;
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

type State = [Complex64; MAX_DIM];
type Block = [[Complex64; MAX_DIM]; MAX_DIM];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid system: {0:?}")]
    InvalidSystem(Vec<ValidationIssue>),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(
        "integration diverged after t = {last_valid_time} (|c| > {DIVERGENCE_BOUND} or non-finite)"
    )]
    Diverged { last_valid_time: f64 },
    #[error("t = {t} is outside the integrated range [0, {t_end}]")]
    OutOfRange { t: f64, t_end: f64 },
    #[error("emitter {0} is not part of this system")]
    UnknownEmitter(Emitter),
}

/// Grid resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Resolution {
    /// h = τ/N. For a Markovian system (τ = 0) this is read as N steps per 1/γ.
    PerDelay(usize),
    /// Explicit step, only meaningful when τ = 0.
    Step(f64),
}

/// Amplitudes on the uniform grid t_m = m·h with stored derivatives.
#[derive(Debug, Clone)]
pub struct Trajectory {
    system: DelayedLinearSystem,
    init: InitialState,
    step: f64,
    steps_per_delay: Option<usize>,
    dimension: usize,
    times: Vec<f64>,
    amplitudes: Vec<State>,
    derivatives: Vec<State>,
    left_derivatives: Vec<State>,
}

impl Trajectory {
    pub fn system(&self) -> &DelayedLinearSystem {
        &self.system
    }

    pub fn initial_state(&self) -> InitialState {
        self.init
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn steps_per_delay(&self) -> Option<usize> {
        self.steps_per_delay
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Time of the last node.
    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("trajectory has at least one node")
    }

    pub fn amplitudes(&self, node: usize) -> &[Complex64] {
        &self.amplitudes[node][..self.dimension]
    }

    /// dc/dt at a node, with the tap activity of the interval starting there.
    pub fn derivatives(&self, node: usize) -> &[Complex64] {
        &self.derivatives[node][..self.dimension]
    }

    /// c_j(t_m) for every node.
    pub fn amplitude_series(&self, emitter: Emitter) -> Result<Vec<Complex64>, SolverError> {
        let j = self.emitter_index(emitter)?;
        Ok(self.amplitudes.iter().map(|c| c[j]).collect())
    }

    /// |c_j(t_m)|² for every node.
    pub fn population_series(&self, emitter: Emitter) -> Result<Vec<f64>, SolverError> {
        let j = self.emitter_index(emitter)?;
        Ok(self.amplitudes.iter().map(|c| c[j].norm_sqr()).collect())
    }

    fn emitter_index(&self, emitter: Emitter) -> Result<usize, SolverError> {
        let j = emitter.index();
        if j < self.dimension {
            Ok(j)
        } else {
            Err(SolverError::UnknownEmitter(emitter))
        }
    }

    /// Dense output at time `t`; exact at nodes.
    pub fn sample(&self, t: f64) -> Result<Vec<Complex64>, SolverError> {
        let t_end = self.t_end();
        let last = self.times.len() - 1;
        // the grid may stop a rounding error short of the requested horizon
        if t > t_end && t <= t_end + NODE_SLACK * self.step {
            return Ok(self.amplitudes(last).to_vec());
        }
        if !(t >= 0.0 && t <= t_end) {
            return Err(SolverError::OutOfRange { t, t_end });
        }
        let pos = t / self.step;
        let nearest = (pos.round() as usize).min(last);
        if self.times[nearest] == t {
            return Ok(self.amplitudes(nearest).to_vec());
        }
        let m = (pos.floor() as usize).min(last);
        if m == last {
            return Ok(self.amplitudes(m).to_vec());
        }
        let s = (t - self.times[m]) / self.step;
        Ok(hermite(
            &self.amplitudes[m],
            &self.amplitudes[m + 1],
            &self.derivatives[m],
            &self.left_derivatives[m + 1],
            self.step,
            s,
        )[..self.dimension]
            .to_vec())
    }
}

fn hermite(y0: &State, y1: &State, d0: &State, d1: &State, h: f64, s: f64) -> State {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = (s3 - 2.0 * s2 + s) * h;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = (s3 - s2) * h;
    let mut out = [ZERO; MAX_DIM];
    for j in 0..MAX_DIM {
        out[j] = y0[j] * h00 + d0[j] * h10 + y1[j] * h01 + d1[j] * h11;
    }
    out
}

fn hermite_midpoint(y0: &State, y1: &State, d0: &State, d1: &State, h: f64) -> State {
    let mut out = [ZERO; MAX_DIM];
    for j in 0..MAX_DIM {
        out[j] = (y0[j] + y1[j]) * 0.5 + (d0[j] - d1[j]) * (h / 8.0);
    }
    out
}

/// Delay taps with the propagation phase folded in, ready for the stepper.
struct Kernel {
    dim: usize,
    instantaneous: Block,
    /// (lag in steps, e^{inφ} Aₙ) for every nonzero retarded tap.
    retarded: Vec<(usize, Block)>,
}

impl Kernel {
    fn new(system: &DelayedLinearSystem, steps_per_delay: Option<usize>) -> Self {
        let dim = system.dimension;
        let to_block = |n: usize| {
            let factor = system.phase_factor(n);
            let mut b = [[ZERO; MAX_DIM]; MAX_DIM];
            for (j, row) in b.iter_mut().enumerate().take(dim) {
                for (l, entry) in row.iter_mut().enumerate().take(dim) {
                    *entry = system.taps[n][(j, l)] * factor;
                }
            }
            b
        };
        let nonzero = |n: usize| system.taps[n].iter().any(|z| *z != ZERO);
        let mut instantaneous = to_block(0);
        let mut retarded = Vec::new();
        for n in 1..system.taps.len() {
            if !nonzero(n) {
                continue;
            }
            let block = to_block(n);
            match steps_per_delay {
                Some(per_delay) => retarded.push((n * per_delay, block)),
                // τ = 0: every tap is instantaneous.
                None => {
                    for j in 0..dim {
                        for l in 0..dim {
                            instantaneous[j][l] += block[j][l];
                        }
                    }
                }
            }
        }
        Self {
            dim,
            instantaneous,
            retarded,
        }
    }

    fn apply(&self, block: &Block, v: &State, out: &mut State) {
        for j in 0..self.dim {
            let mut acc = out[j];
            for l in 0..self.dim {
                acc += block[j][l] * v[l];
            }
            out[j] = acc;
        }
    }

    /// Right-hand side with the given retarded arguments (one per active tap,
    /// in `retarded` order; inactive taps are skipped).
    fn rhs(&self, y: &State, delayed: &[State], active: usize) -> State {
        let mut out = [ZERO; MAX_DIM];
        self.apply(&self.instantaneous, y, &mut out);
        for ((_, block), arg) in self.retarded[..active].iter().zip(delayed) {
            self.apply(block, arg, &mut out);
        }
        out
    }
}

fn axpy(y: &State, h: f64, k: &State) -> State {
    let mut out = *y;
    for j in 0..MAX_DIM {
        out[j] += k[j] * h;
    }
    out
}

fn is_bounded(y: &State) -> bool {
    y.iter()
        .all(|z| z.re.is_finite() && z.im.is_finite() && z.norm() <= DIVERGENCE_BOUND)
}

/// Fraction of a step below which a horizon counts as reached.
const NODE_SLACK: f64 = 1e-9;

fn node_count(t_max: f64, h: f64) -> usize {
    if t_max == 0.0 {
        0
    } else {
        (t_max / h - NODE_SLACK).ceil().max(1.0) as usize
    }
}

/// Integrates from a single-excitation initial state up to (at least) `t_max`
/// with h = τ / `steps_per_delay`.
pub fn integrate(
    system: &DelayedLinearSystem,
    init: impl Into<InitialState>,
    t_max: f64,
    steps_per_delay: usize,
) -> Result<Trajectory, SolverError> {
    integrate_with(system, init, t_max, Resolution::PerDelay(steps_per_delay))
}

pub fn integrate_with(
    system: &DelayedLinearSystem,
    init: impl Into<InitialState>,
    t_max: f64,
    resolution: Resolution,
) -> Result<Trajectory, SolverError> {
    validate(system).map_err(SolverError::InvalidSystem)?;
    let init = init.into();
    if init.excited.index() >= system.dimension {
        return Err(SolverError::UnknownEmitter(init.excited));
    }
    if !(t_max.is_finite() && t_max >= 0.0) {
        return Err(SolverError::Config(format!(
            "t_max must be finite and nonnegative, got {t_max}"
        )));
    }

    let markovian = system.tau == 0.0;
    let (step, per_delay) = match (markovian, resolution) {
        (false, Resolution::PerDelay(n)) if n >= MIN_STEPS_PER_DELAY => {
            (system.tau / n as f64, Some(n))
        }
        (false, Resolution::PerDelay(n)) => {
            return Err(SolverError::Config(format!(
                "steps_per_delay = {n} is below the minimum of {MIN_STEPS_PER_DELAY}"
            )))
        }
        (false, Resolution::Step(_)) => {
            return Err(SolverError::Config(
                "a retarded system needs an integer number of steps per delay".into(),
            ))
        }
        (true, Resolution::PerDelay(n)) if n > 0 => (1.0 / n as f64, None),
        (true, Resolution::Step(h)) if h.is_finite() && h > 0.0 => (h, None),
        (true, other) => {
            return Err(SolverError::Config(format!(
                "invalid step specification {other:?}"
            )))
        }
    };

    let kernel = Kernel::new(system, per_delay);
    let steps = node_count(t_max, step);
    let dim = system.dimension;

    let mut y0 = [ZERO; MAX_DIM];
    y0[..dim].copy_from_slice(&init.amplitudes(dim));

    let mut amplitudes = Vec::with_capacity(steps + 1);
    let mut derivatives = Vec::with_capacity(steps + 1);
    let mut left_derivatives = Vec::with_capacity(steps + 1);

    // Taps are sorted by lag, so the active ones at step m form a prefix.
    let active_at = |m: usize| {
        kernel
            .retarded
            .iter()
            .take_while(|(lag, _)| m >= *lag)
            .count()
    };

    let d0 = kernel.rhs(&y0, &[], 0);
    amplitudes.push(y0);
    derivatives.push(d0);
    left_derivatives.push(d0);

    let mut mid = [[ZERO; MAX_DIM]; 3];
    let mut end = [[ZERO; MAX_DIM]; 3];
    for m in 0..steps {
        let active = active_at(m);
        for (k, (lag, _)) in kernel.retarded[..active].iter().enumerate() {
            let j = m - lag;
            mid[k] = hermite_midpoint(
                &amplitudes[j],
                &amplitudes[j + 1],
                &derivatives[j],
                &left_derivatives[j + 1],
                step,
            );
            end[k] = amplitudes[j + 1];
        }
        let y = amplitudes[m];
        let k1 = derivatives[m];
        let k2 = kernel.rhs(&axpy(&y, step / 2.0, &k1), &mid, active);
        let k3 = kernel.rhs(&axpy(&y, step / 2.0, &k2), &mid, active);
        let k4 = kernel.rhs(&axpy(&y, step, &k3), &end, active);
        let mut next = y;
        for j in 0..dim {
            next[j] += (k1[j] + (k2[j] + k3[j]) * 2.0 + k4[j]) * (step / 6.0);
        }
        if !is_bounded(&next) {
            return Err(SolverError::Diverged {
                last_valid_time: m as f64 * step,
            });
        }
        let left = kernel.rhs(&next, &end, active);
        // Taps switching on at node m + 1 see c(0) there (Θ(0) = 1).
        let mut right = left;
        for (_, block) in &kernel.retarded[active..active_at(m + 1)] {
            kernel.apply(block, &y0, &mut right);
        }
        amplitudes.push(next);
        left_derivatives.push(left);
        derivatives.push(right);
    }

    let times = (0..=steps).map(|m| m as f64 * step).collect();
    Ok(Trajectory {
        system: system.clone(),
        init,
        step,
        steps_per_delay: per_delay,
        dimension: dim,
        times,
        amplitudes,
        derivatives,
        left_derivatives,
    })
}

/// Observed convergence order at `t_max` from runs with N, 2N and 4N steps
/// per delay (N = [`MIN_STEPS_PER_DELAY`]), using the finest run as reference.
pub fn convergence_order(
    system: &DelayedLinearSystem,
    init: impl Into<InitialState>,
    t_max: f64,
) -> Result<f64, SolverError> {
    convergence_order_from(system, init, t_max, MIN_STEPS_PER_DELAY)
}

pub fn convergence_order_from(
    system: &DelayedLinearSystem,
    init: impl Into<InitialState>,
    t_max: f64,
    base_steps: usize,
) -> Result<f64, SolverError> {
    let init = init.into();
    let at_end = |n: usize| -> Result<Vec<Complex64>, SolverError> {
        integrate(system, init, t_max, n)?.sample(t_max)
    };
    let coarse = at_end(base_steps)?;
    let medium = at_end(2 * base_steps)?;
    let fine = at_end(4 * base_steps)?;
    let dist = |a: &[Complex64], b: &[Complex64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    };
    let e_coarse = dist(&coarse, &fine);
    let e_medium = dist(&medium, &fine);
    if e_medium == 0.0 {
        return Err(SolverError::Config(
            "step refinement produced no measurable change".into(),
        ));
    }
    Ok((e_coarse / e_medium).log2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_giant_trimer, build_small_dimer, SystemParams, TAP_COUNT};
    use std::f64::consts::FRAC_PI_2;

    fn fig2(theta: f64, eta: f64) -> DelayedLinearSystem {
        build_small_dimer(&SystemParams::reference(0.5, theta, eta).unwrap()).unwrap()
    }

    #[test]
    fn single_emitter_decays_exponentially_before_feedback() {
        let p = SystemParams::new(112.19, 0.0, 0.0, 0.0, 0.56).unwrap();
        let sys = build_small_dimer(&p).unwrap();
        let traj = integrate(&sys, Emitter::A, 0.56, 200).unwrap();
        for (m, &t) in traj.times().iter().enumerate() {
            let p_a = traj.amplitudes(m)[0].norm_sqr();
            assert!((p_a - (-t).exp()).abs() < 1e-8, "t = {t}");
            assert_eq!(traj.amplitudes(m)[1], ZERO);
        }
    }

    #[test]
    fn breakpoints_are_nodes() {
        let sys = fig2(FRAC_PI_2, 0.56);
        let traj = integrate(&sys, Emitter::A, 3.0, 40).unwrap();
        for n in 1..=5 {
            assert_eq!(traj.times()[n * 40], n as f64 * 0.56 / 40.0 * 40.0);
        }
        assert!(traj.t_end() >= 3.0);
        assert!(traj.t_end() - traj.step() < 3.0);
    }

    #[test]
    fn initial_node_and_zero_horizon() {
        let sys = fig2(0.0, 0.56);
        let traj = integrate(&sys, Emitter::B, 0.0, 200).unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj.amplitudes(0), &[ZERO, Complex64::new(1.0, 0.0)]);
        assert_eq!(traj.sample(0.0).unwrap(), traj.amplitudes(0).to_vec());
    }

    #[test]
    fn rejects_bad_configuration() {
        let sys = fig2(0.0, 0.56);
        assert!(matches!(
            integrate(&sys, Emitter::A, 1.0, 8),
            Err(SolverError::Config(_))
        ));
        assert!(matches!(
            integrate(&sys, Emitter::A, -1.0, 200),
            Err(SolverError::Config(_))
        ));
        assert!(matches!(
            integrate(&sys, Emitter::C, 1.0, 200),
            Err(SolverError::UnknownEmitter(Emitter::C))
        ));
        assert!(matches!(
            integrate_with(&sys, Emitter::A, 1.0, Resolution::Step(0.01)),
            Err(SolverError::Config(_))
        ));
        let mut bad = sys.clone();
        bad.tau = -1.0;
        assert!(matches!(
            integrate(&bad, Emitter::A, 1.0, 200),
            Err(SolverError::InvalidSystem(_))
        ));
    }

    #[test]
    fn divergence_is_reported() {
        let mut sys = fig2(0.0, 0.56);
        sys.taps[0][(0, 0)] = Complex64::new(5.0, 0.0);
        match integrate(&sys, Emitter::A, 5.0, 50) {
            Err(SolverError::Diverged { last_valid_time }) => {
                assert!(last_valid_time > 0.3 && last_valid_time < 0.6)
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn sample_is_exact_at_nodes_and_bounded() {
        let sys = fig2(FRAC_PI_2, 0.56);
        let traj = integrate(&sys, Emitter::A, 2.0, 50).unwrap();
        for m in [0, 1, 49, 50, 51, traj.len() - 1] {
            assert_eq!(
                traj.sample(traj.times()[m]).unwrap(),
                traj.amplitudes(m).to_vec()
            );
        }
        assert!(traj.sample(-1e-3).is_err());
        assert!(traj.sample(traj.t_end() + 1e-3).is_err());
    }

    #[test]
    fn dense_output_matches_refined_run() {
        let sys = fig2(FRAC_PI_2, 0.56);
        let coarse = integrate(&sys, Emitter::A, 3.0, 32).unwrap();
        let fine = integrate(&sys, Emitter::A, 3.0, 64).unwrap();
        let h = coarse.step();
        let mut worst: f64 = 0.0;
        // midpoints of coarse intervals are nodes of the refined grid
        for m in (0..coarse.len() - 1).step_by(7) {
            let t = coarse.times()[m] + h / 2.0;
            let a = coarse.sample(t).unwrap();
            let b = fine.amplitudes(2 * m + 1);
            for (x, y) in a.iter().zip(b) {
                worst = worst.max((x - y).norm());
            }
        }
        assert!(
            worst < 50.0 * h.powi(4),
            "worst = {worst:e}, h⁴ = {:e}",
            h.powi(4)
        );
    }

    #[test]
    fn causality_before_first_delay() {
        let sys = fig2(FRAC_PI_2, 0.56);
        let mut perturbed = sys.clone();
        perturbed.phi += 1.234;
        for n in 1..TAP_COUNT {
            perturbed.taps[n] = perturbed.taps[n].map(|z| z * 3.0 + Complex64::new(0.1, -0.2));
        }
        let a = integrate(&sys, Emitter::A, 2.0, 100).unwrap();
        let b = integrate(&perturbed, Emitter::A, 2.0, 100).unwrap();
        for m in 0..=100 {
            for (x, y) in a.amplitudes(m).iter().zip(b.amplitudes(m)) {
                assert!((x - y).norm() <= 1e-12);
            }
        }
        assert!((a.amplitudes(101)[1] - b.amplitudes(101)[1]).norm() > 1e-6);
    }

    #[test]
    fn markovian_limit_runs_plain_rk4() {
        let p = SystemParams::reference(0.5, 0.3, 0.0).unwrap();
        let sys = build_small_dimer(&p).unwrap();
        let traj = integrate(&sys, Emitter::A, 2.0, 100).unwrap();
        assert_eq!(traj.steps_per_delay(), None);
        assert!((traj.step() - 0.01).abs() < 1e-15);
        let order = convergence_order(&sys, Emitter::A, 2.0).unwrap();
        assert!((3.5..=4.5).contains(&order), "order = {order}");
    }

    #[test]
    fn trimer_population_stays_bounded() {
        let p = SystemParams::reference(1.0, FRAC_PI_2, 0.56).unwrap();
        let sys = build_giant_trimer(&p).unwrap();
        let traj = integrate(&sys, Emitter::A, 10.0, 50).unwrap();
        for m in 0..traj.len() {
            let total: f64 = traj.amplitudes(m).iter().map(|z| z.norm_sqr()).sum();
            assert!((0.0..=1.0 + 1e-9).contains(&total));
        }
    }
}
