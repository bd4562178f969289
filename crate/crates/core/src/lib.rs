//! Non-equilibrium "real ensemble" dynamics for finite-level quantum systems.
//!
//! Each ensemble entry carries an observable value `a`, a phase `φ` and a
//! probability `ρ`. With one phase per value the evolution reduces to the
//! Schrödinger equation; with several phases per value the entries interact
//! through a phase-overlap kernel and either relax back to the quantum
//! fixed point or run away from it. The crate integrates both evolution
//! laws, measures how fast phases re-merge, checks the results against a
//! perturbative near-equilibrium theory, and drives parameter scans.

pub mod circular;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod hamiltonian;
pub mod integrator;
pub mod kernel;
pub mod montecarlo;
pub mod perturbation;

pub use dynamics::{Derivatives, EnsembleState, Entry, EvolutionLaw, Model};
pub use error::{Error, Result};
pub use hamiltonian::{CouplingMatrix, PauliCoefficients};
pub use integrator::{IntegratorControls, StepMode, Trajectory};
pub use kernel::Kernel;

use std::f64::consts::PI;

/// Reduces an angle into `(−π, π]`.
#[inline]
pub fn wrap_phase(x: f64) -> f64 {
    if x > -PI && x <= PI {
        return x;
    }
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_phase(PI), PI);
        assert_eq!(wrap_phase(-PI), PI);
        assert!((wrap_phase(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_phase(-0.5 - 4.0 * PI) + 0.5).abs() < 1e-12);
        assert_eq!(wrap_phase(0.25), 0.25);
    }
}
