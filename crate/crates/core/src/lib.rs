//! Single-photon excitation transfer between emitters on a common waveguide
//! with retarded (non-Markovian) feedback.

pub mod analysis;
pub mod cli;
pub mod model;
pub mod observables;
pub mod solver;
