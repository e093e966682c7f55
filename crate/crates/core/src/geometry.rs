//! Channel geometry shared by the Reynolds and thin Navier-Stokes solvers.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Height of the rescaled channel, `0 < Z < h(x)`.
///
/// The slider is `1 + delta + delta cos(2 pi (x - shift) / L)`, i.e. the
/// cosine bearing lifted so that its minimum is exactly 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeightProfile {
    Constant(f64),
    Slider { delta: f64, shift: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThinGeometry {
    pub length: f64,
    pub profile: HeightProfile,
    /// Aspect ratio of the film.
    pub eps: f64,
    /// Speed of the lower wall.
    pub wall_speed: f64,
    pub rho_bottom: f64,
    pub rho_top: f64,
    /// Total mass in the rescaled channel.
    pub mass: f64,
}

impl Default for ThinGeometry {
    fn default() -> Self {
        Self::slider(0.3, 1.0)
    }
}

impl ThinGeometry {
    pub fn flat(mean_density: f64) -> Self {
        Self {
            length: 1.0,
            profile: HeightProfile::Constant(1.0),
            eps: 0.1,
            wall_speed: 1.0,
            rho_bottom: mean_density,
            rho_top: mean_density,
            mass: mean_density,
        }
    }

    /// Slider bearing with unit mean density.
    pub fn slider(delta: f64, wall_speed: f64) -> Self {
        let mut g = Self {
            length: 1.0,
            profile: HeightProfile::Slider { delta, shift: 0.0 },
            eps: 0.1,
            wall_speed,
            rho_bottom: 1.0,
            rho_top: 1.0,
            mass: 0.0,
        };
        g.mass = g.area();
        g
    }

    pub fn h(&self, x: f64) -> f64 {
        match self.profile {
            HeightProfile::Constant(c) => c,
            HeightProfile::Slider { delta, shift } => {
                1.0 + delta + delta * (2.0 * PI * (x - shift) / self.length).cos()
            }
        }
    }

    pub fn h_prime(&self, x: f64) -> f64 {
        match self.profile {
            HeightProfile::Constant(_) => 0.0,
            HeightProfile::Slider { delta, shift } => {
                let k = 2.0 * PI / self.length;
                -delta * k * (k * (x - shift)).sin()
            }
        }
    }

    pub fn h_min(&self) -> f64 {
        match self.profile {
            HeightProfile::Constant(c) => c,
            HeightProfile::Slider { delta, .. } => 1.0 + delta - delta.abs(),
        }
    }

    /// Exact `int_0^L h dx`.
    pub fn area(&self) -> f64 {
        match self.profile {
            HeightProfile::Constant(c) => c * self.length,
            HeightProfile::Slider { delta, .. } => (1.0 + delta) * self.length,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if !(self.length > 0.0) {
            return bad(format!("period length must be positive, got {}", self.length));
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return bad(format!("eps must lie in (0, 1], got {}", self.eps));
        }
        if !(self.mass > 0.0) {
            return bad(format!("mass must be positive, got {}", self.mass));
        }
        if !(self.rho_bottom > 0.0 && self.rho_top > 0.0) {
            return bad("boundary densities must be positive".into());
        }
        if self.h_min() < 1.0 - 1e-12 {
            return bad(format!("min h = {} < 1; normalise the profile", self.h_min()));
        }
        if self.wall_speed < 0.0 {
            return bad(format!("wall speed must be non-negative, got {}", self.wall_speed));
        }
        Ok(())
    }

    /// Cell centres of a uniform periodic grid with `nx` cells.
    pub fn cell_centres(&self, nx: usize) -> Vec<f64> {
        let dx = self.length / nx as f64;
        (0..nx).map(|i| (i as f64 + 0.5) * dx).collect()
    }
}
