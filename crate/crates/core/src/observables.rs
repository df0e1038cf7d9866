//! Quantities measured on trajectories: populations, survival probability,
//! the emitters' reduced density matrix and its linear entropy, the
//! nonreciprocity metric and the circulation direction of the trimer.
//!
//! All grid metrics are evaluated on the stored nodes, not on dense output.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Emitter;
use crate::solver::{SolverError, Trajectory};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObservableError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("trajectories live on different grids ({0} vs {1} nodes)")]
    GridMismatch(usize, usize),
    #[error("circulation needs a three-emitter trajectory, got {0} emitters")]
    NotTrimer(usize),
    #[error("no population maximum of emitter {0} after the first delay")]
    Inconclusive(Emitter),
}

/// A real quantity sampled on a trajectory's grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub name: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl ObservableSeries {
    fn new(name: impl Into<String>, traj: &Trajectory, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            times: traj.times().to_vec(),
            values,
        }
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn last(&self) -> f64 {
        *self.values.last().expect("series has at least one node")
    }
}

/// ρ over the basis {|e_a⟩, |e_b⟩[, |e_c⟩], |g…g⟩}.
///
/// Every probability not held by the emitters (waveguide photon and the κ
/// channel alike) is traced out into the ground element.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn from_amplitudes(c: &[Complex64]) -> Self {
        let d = c.len();
        let mut matrix = DMatrix::zeros(d + 1, d + 1);
        for j in 0..d {
            for l in 0..d {
                matrix[(j, l)] = c[j] * c[l].conj();
            }
        }
        let excited: f64 = c.iter().map(|z| z.norm_sqr()).sum();
        matrix[(d, d)] = Complex64::from(1.0 - excited);
        Self { matrix }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// Tr(ρ²).
    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// S = 1 − Tr(ρ²).
    pub fn linear_entropy(&self) -> f64 {
        1.0 - self.purity()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .matrix
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

/// 2P(1 − P), the linear entropy of a single-excitation state whose emitters
/// hold total population P.
pub fn entropy_from_total_population(p_tot: f64) -> f64 {
    2.0 * p_tot * (1.0 - p_tot)
}

/// One series `P_<label>` per emitter.
pub fn populations(traj: &Trajectory) -> Vec<ObservableSeries> {
    (0..traj.dimension())
        .map(|j| {
            let emitter = Emitter::from_index(j).expect("dimension is at most three");
            let values = (0..traj.len())
                .map(|m| traj.amplitudes(m)[j].norm_sqr())
                .collect();
            ObservableSeries::new(format!("P_{emitter}"), traj, values)
        })
        .collect()
}

pub fn total_population(traj: &Trajectory) -> ObservableSeries {
    let values = (0..traj.len())
        .map(|m| traj.amplitudes(m).iter().map(|z| z.norm_sqr()).sum())
        .collect();
    ObservableSeries::new("P_tot", traj, values)
}

pub fn reduced_density_matrix(traj: &Trajectory, t: f64) -> Result<DensityMatrix, SolverError> {
    Ok(DensityMatrix::from_amplitudes(&traj.sample(t)?))
}

/// S(t) = 1 − Tr(ρ(t)²) at every node.
pub fn linear_entropy(traj: &Trajectory) -> ObservableSeries {
    let values = (0..traj.len())
        .map(|m| DensityMatrix::from_amplitudes(traj.amplitudes(m)).linear_entropy())
        .collect();
    ObservableSeries::new("S", traj, values)
}

/// Which emitter to read in each of the two mirrored runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbePair {
    pub in_first: Emitter,
    pub in_second: Emitter,
}

impl ProbePair {
    /// P_b from the run started in a against P_a from the run started in b.
    pub const TRANSFER_AB: ProbePair = ProbePair {
        in_first: Emitter::B,
        in_second: Emitter::A,
    };

    pub fn swapped(self) -> Self {
        Self {
            in_first: self.in_second,
            in_second: self.in_first,
        }
    }
}

impl Default for ProbePair {
    fn default() -> Self {
        Self::TRANSFER_AB
    }
}

/// max over nodes of |P_x(t; first) − P_y(t; second)|.
pub fn nonreciprocity_metric(
    first: &Trajectory,
    second: &Trajectory,
    probe: ProbePair,
) -> Result<f64, ObservableError> {
    Ok(transfer_difference(first, second, probe)?
        .into_iter()
        .fold(0.0, f64::max))
}

/// |P_x(t; first) − P_y(t; second)| at every node.
pub fn transfer_difference(
    first: &Trajectory,
    second: &Trajectory,
    probe: ProbePair,
) -> Result<Vec<f64>, ObservableError> {
    if first.len() != second.len() || first.step() != second.step() {
        return Err(ObservableError::GridMismatch(first.len(), second.len()));
    }
    let p = first.population_series(probe.in_first)?;
    let q = second.population_series(probe.in_second)?;
    Ok(p.iter().zip(&q).map(|(x, y)| (x - y).abs()).collect())
}

/// Cyclic order of excitation transfer among the trimer emitters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Circulation {
    /// a → c → b → a
    #[serde(rename = "a->c->b->a")]
    Acba,
    /// a → b → c → a
    #[serde(rename = "a->b->c->a")]
    Abca,
    #[serde(rename = "none")]
    None,
}

impl Circulation {
    pub fn label(self) -> &'static str {
        match self {
            Circulation::Acba => "a->c->b->a",
            Circulation::Abca => "a->b->c->a",
            Circulation::None => "none",
        }
    }

    fn from_cycle(start: Emitter, first: Emitter) -> Self {
        // successor of each emitter along a→c→b→a
        let next_acba = match start {
            Emitter::A => Emitter::C,
            Emitter::C => Emitter::B,
            Emitter::B => Emitter::A,
        };
        if first == next_acba {
            Circulation::Acba
        } else {
            Circulation::Abca
        }
    }
}

impl fmt::Display for Circulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A population peak only counts towards the circulation order if it reaches
/// this fraction of the emitter's largest population over the run.
pub const PEAK_PROMINENCE_FRACTION: f64 = 0.5;

/// Index of the first discrete local maximum strictly after `after` with
/// value at least `floor`: P[m−1] < P[m] ≥ P[m+1], so plateaus resolve to
/// their earliest node.
pub fn first_peak_after(times: &[f64], values: &[f64], after: f64, floor: f64) -> Option<usize> {
    (1..values.len().saturating_sub(1)).find(|&m| {
        times[m] > after
            && values[m] >= floor
            && values[m] > values[m - 1]
            && values[m] >= values[m + 1]
    })
}

/// Orders the first prominent post-delay population peaks of the two
/// non-initial emitters; peaks closer than one step count as simultaneous.
pub fn circulation_direction(traj: &Trajectory) -> Result<Circulation, ObservableError> {
    if traj.dimension() != 3 {
        return Err(ObservableError::NotTrimer(traj.dimension()));
    }
    let start = traj.initial_state().excited;
    let tau = traj.system().tau;
    let mut peaks = Vec::with_capacity(2);
    for emitter in Emitter::ALL.into_iter().filter(|&e| e != start) {
        let p = traj.population_series(emitter)?;
        let largest = p.iter().copied().fold(0.0, f64::max);
        let m = first_peak_after(traj.times(), &p, tau, PEAK_PROMINENCE_FRACTION * largest)
            .filter(|_| largest > 0.0)
            .ok_or(ObservableError::Inconclusive(emitter))?;
        peaks.push((traj.times()[m], emitter));
    }
    let (t0, e0) = peaks[0];
    let (t1, e1) = peaks[1];
    if (t0 - t1).abs() <= traj.step() {
        return Ok(Circulation::None);
    }
    let first = if t0 < t1 { e0 } else { e1 };
    Ok(Circulation::from_cycle(start, first))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_giant_trimer, build_small_dimer, SystemParams};
    use crate::solver::integrate;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn dimer(theta: f64, eta: f64) -> crate::model::DelayedLinearSystem {
        build_small_dimer(&SystemParams::reference(0.5, theta, eta).unwrap()).unwrap()
    }

    #[test]
    fn initial_node_populations() {
        let traj = integrate(&dimer(0.3, 0.56), Emitter::A, 1.0, 50).unwrap();
        let pops = populations(&traj);
        assert_eq!(pops[0].name, "P_a");
        assert_eq!(pops[0].values[0], 1.0);
        assert_eq!(pops[1].values[0], 0.0);
        assert_eq!(total_population(&traj).values[0], 1.0);
        assert_eq!(linear_entropy(&traj).values[0], 0.0);
    }

    #[test]
    fn free_decay_population() {
        let p = SystemParams::new(112.19, 0.0, 0.0, 0.0, 0.56).unwrap();
        let traj = integrate(&build_small_dimer(&p).unwrap(), Emitter::A, 0.5, 200).unwrap();
        let pa = &populations(&traj)[0];
        for (t, v) in pa.times.iter().zip(&pa.values) {
            assert!((v - (-t).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn density_matrix_structure() {
        let rho = DensityMatrix::from_amplitudes(&[c(1.0, 0.0), c(0.0, 0.0)]);
        let expected = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            c(1.0, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
        ]));
        assert_eq!(rho.matrix(), &expected);

        let ground = DensityMatrix::from_amplitudes(&[c(0.0, 0.0); 3]);
        assert_eq!(ground.matrix()[(3, 3)], c(1.0, 0.0));
        assert_eq!(ground.linear_entropy(), 0.0);

        let amps = [c(0.3, -0.2), c(-0.1, 0.4), c(0.25, 0.05)];
        let p_tot: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        let rho = DensityMatrix::from_amplitudes(&amps);
        assert!(rho.hermiticity_defect() < 1e-14);
        assert!((rho.trace() - c(1.0, 0.0)).norm() < 1e-12);
        let ev = rho.eigenvalues();
        assert!(ev[0].abs() < 1e-12 && ev[1].abs() < 1e-12);
        let mut top = [ev[2], ev[3]];
        top.sort_by(f64::total_cmp);
        let mut want = [p_tot, 1.0 - p_tot];
        want.sort_by(f64::total_cmp);
        assert!((top[0] - want[0]).abs() < 1e-12);
        assert!((top[1] - want[1]).abs() < 1e-12);
    }

    #[test]
    fn half_population_maximizes_entropy() {
        let s = 0.5_f64.sqrt();
        let rho = DensityMatrix::from_amplitudes(&[c(s, 0.0), c(0.0, 0.0)]);
        assert!((rho.linear_entropy() - 0.5).abs() < 1e-15);
        assert_eq!(entropy_from_total_population(0.5), 0.5);
    }

    #[test]
    fn metric_of_identical_runs_is_zero() {
        let traj = integrate(&dimer(FRAC_PI_2, 0.56), Emitter::A, 3.0, 50).unwrap();
        let probe = ProbePair {
            in_first: Emitter::B,
            in_second: Emitter::B,
        };
        assert_eq!(nonreciprocity_metric(&traj, &traj, probe).unwrap(), 0.0);
    }

    #[test]
    fn metric_rejects_mismatched_grids() {
        let a = integrate(&dimer(0.0, 0.56), Emitter::A, 3.0, 50).unwrap();
        let b = integrate(&dimer(0.0, 0.56), Emitter::B, 3.0, 60).unwrap();
        assert!(matches!(
            nonreciprocity_metric(&a, &b, ProbePair::default()),
            Err(ObservableError::GridMismatch(..))
        ));
    }

    #[test]
    fn metric_vanishes_at_theta_pi() {
        let sys = dimer(PI, 0.56);
        let a = integrate(&sys, Emitter::A, 15.0, 200).unwrap();
        let b = integrate(&sys, Emitter::B, 15.0, 200).unwrap();
        assert!(nonreciprocity_metric(&a, &b, ProbePair::default()).unwrap() <= 1e-10);
    }

    #[test]
    fn peak_detection_prefers_earliest_plateau_node() {
        let times = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let values = [0.0, 1.0, 2.0, 2.0, 1.0, 0.0];
        assert_eq!(first_peak_after(&times, &values, 0.5, 0.0), Some(2));
        assert_eq!(first_peak_after(&times, &values, 2.5, 0.0), None);
        let bumpy = [0.0, 0.2, 0.1, 1.0, 0.5, 0.0];
        assert_eq!(first_peak_after(&times, &bumpy, 0.5, 0.0), Some(1));
        assert_eq!(first_peak_after(&times, &bumpy, 0.5, 0.5), Some(3));
    }

    #[test]
    fn circulation_needs_trimer() {
        let traj = integrate(&dimer(0.0, 0.56), Emitter::A, 3.0, 50).unwrap();
        assert!(matches!(
            circulation_direction(&traj),
            Err(ObservableError::NotTrimer(2))
        ));
    }

    #[test]
    fn circulation_is_inconclusive_without_peaks() {
        let p = SystemParams::reference(1.0, FRAC_PI_2, 0.56).unwrap();
        let sys = build_giant_trimer(&p).unwrap();
        let traj = integrate(&sys, Emitter::A, 0.6, 50).unwrap();
        assert!(matches!(
            circulation_direction(&traj),
            Err(ObservableError::Inconclusive(_))
        ));
    }
}
