//! Partial-wave solvers for -hbar^2 u'' + (V + hbar^2 c_l / r^2) u = E u.

mod bound;
mod green;
mod kernels;
mod phase;
mod resolvent;
mod solver;
mod stationary;

pub use bound::{
    bound_states, box_radius, finite_difference_levels, BoundState, BoundStateList,
    BoundStateOptions, Level,
};
pub use green::{outgoing_green, GreenKernel};
pub use kernels::{birman_schwinger_kernels, bs_kernels_converged, BsKernels, KernelOptions};
pub use phase::{channel_phases, phase_shift, smatrix_eigenvalue, ChannelPhases, PhaseShift};
pub use resolvent::weighted_resolvent_norm;
pub use solver::{RadialProblem, SolverOptions};
pub use stationary::{stationary_smatrix, Perturbation, StationaryBase, StationaryResult};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::bessel::{riccati_2d, riccati_3d, FreeWave};
use crate::potential::Dimension;

/// Angular-momentum channel in dimension 2 or 3.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Channel {
    pub dimension: Dimension,
    pub ell: u32,
}

impl Channel {
    pub fn new(dimension: Dimension, ell: u32) -> Self {
        Channel { dimension, ell }
    }

    /// Coefficient of hbar^2 / r^2 in the radial operator.
    pub fn centrifugal(&self) -> f64 {
        let l = self.ell as f64;
        match self.dimension {
            Dimension::Three => l * (l + 1.0),
            Dimension::Two => l * l - 0.25,
        }
    }

    /// Multiplicity of the channel in the full operator.
    pub fn weight(&self) -> u32 {
        match self.dimension {
            Dimension::Three => 2 * self.ell + 1,
            Dimension::Two => {
                if self.ell == 0 {
                    1
                } else {
                    2
                }
            }
        }
    }

    /// Leading power of the regular solution at the origin.
    pub fn regular_exponent(&self) -> f64 {
        match self.dimension {
            Dimension::Three => self.ell as f64 + 1.0,
            Dimension::Two => self.ell as f64 + 0.5,
        }
    }

    /// Free waves at x = k r.
    pub fn free_wave(&self, x: f64) -> FreeWave {
        match self.dimension {
            Dimension::Three => riccati_3d(self.ell as usize, x),
            Dimension::Two => riccati_2d(self.ell as usize, x),
        }
    }
}

/// Highest channel kept at energy E: the first l whose centrifugal barrier at
/// `radius` exceeds 4E, plus a margin of five.
pub fn channel_cutoff(dimension: Dimension, energy: f64, hbar: f64, radius: f64) -> Result<u32> {
    if !(energy > 0.0 && hbar > 0.0 && radius > 0.0) {
        return Err(Error::Domain(format!(
            "channel cutoff needs positive E, hbar, radius (got {energy}, {hbar}, {radius})"
        )));
    }
    let target = 4.0 * energy * radius * radius / (hbar * hbar);
    let mut ell = 0u32;
    while Channel::new(dimension, ell).centrifugal() <= target {
        ell += 1;
        if ell > 1_000_000 {
            return Err(Error::Truncation(format!(
                "cutoff exceeds 10^6 at E = {energy}, hbar = {hbar}"
            )));
        }
    }
    Ok(ell + 5)
}

pub fn channels_up_to(dimension: Dimension, l_max: u32) -> Vec<Channel> {
    (0..=l_max).map(|l| Channel::new(dimension, l)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_and_centrifugal_terms() {
        assert_eq!(Channel::new(Dimension::Three, 2).weight(), 5);
        assert_eq!(Channel::new(Dimension::Two, 0).weight(), 1);
        assert_eq!(Channel::new(Dimension::Two, 3).weight(), 2);
        assert_eq!(Channel::new(Dimension::Two, 0).centrifugal(), -0.25);
        assert_eq!(Channel::new(Dimension::Three, 3).centrifugal(), 12.0);
    }

    #[test]
    fn cutoff_grows_like_inverse_hbar() {
        let a = channel_cutoff(Dimension::Three, 1.0, 0.2, 2.0).unwrap();
        let b = channel_cutoff(Dimension::Three, 1.0, 0.1, 2.0).unwrap();
        assert!(b > a && (b as f64 - 5.0) / (a as f64 - 5.0) > 1.8);
    }
}
