//! D3Q19 velocity set, weights and the BGK building blocks.
//!
//! Nineteen velocities on the cubic lattice:
//! - 1 rest (0)
//! - 6 axis (±x, ±y, ±z), weight 1/18
//! - 12 face diagonals (±x±y, ±y±z, ±z±x), weight 1/36

use crate::error::{Error, Result};
use crate::memory::TargetDevice;

pub const Q: usize = 19;

pub const CV: [[i32; 3]; Q] = [
    [0, 0, 0],
    [1, 0, 0],
    [-1, 0, 0],
    [0, 1, 0],
    [0, -1, 0],
    [0, 0, 1],
    [0, 0, -1],
    [1, 1, 0],
    [-1, -1, 0],
    [1, -1, 0],
    [-1, 1, 0],
    [1, 0, 1],
    [-1, 0, -1],
    [1, 0, -1],
    [-1, 0, 1],
    [0, 1, 1],
    [0, -1, -1],
    [0, 1, -1],
    [0, -1, 1],
];

const W0: f64 = 1.0 / 3.0;
const W1: f64 = 1.0 / 18.0;
const W2: f64 = 1.0 / 36.0;

pub const WV: [f64; Q] = [
    W0, W1, W1, W1, W1, W1, W1, W2, W2, W2, W2, W2, W2, W2, W2, W2, W2, W2, W2,
];

/// Index of the negated velocity.
pub const OPPOSITE: [usize; Q] = [
    0, 2, 1, 4, 3, 6, 5, 8, 7, 10, 9, 12, 11, 14, 13, 16, 15, 18, 17,
];

pub const CS2: f64 = 1.0 / 3.0;

/// Constant-store keys used by the collision kernel.
pub mod keys {
    pub const WV: &str = "wv";
    pub const CV: &str = "cv";
    pub const CS2: &str = "cs2";
    pub const TAU_F: &str = "tau_f";
    pub const TAU_G: &str = "tau_g";
}

#[derive(Debug, Clone, PartialEq)]
pub struct D3Q19Model {
    pub cv: [[i32; 3]; Q],
    pub wv: [f64; Q],
    pub cs2: f64,
    pub tau_f: f64,
    pub tau_g: f64,
}

impl Default for D3Q19Model {
    fn default() -> Self {
        Self {
            cv: CV,
            wv: WV,
            cs2: CS2,
            tau_f: 1.0,
            tau_g: 1.0,
        }
    }
}

impl D3Q19Model {
    pub fn with_tau(tau_f: f64, tau_g: f64) -> Result<Self> {
        for (name, tau) in [("tau_f", tau_f), ("tau_g", tau_g)] {
            if !(tau > 0.5) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be > 0.5, got {tau}"
                )));
            }
        }
        Ok(Self {
            tau_f,
            tau_g,
            ..Self::default()
        })
    }

    /// Copies the model into the device's constant store.
    pub fn upload(&self, dev: &mut TargetDevice) -> Result<()> {
        let cv: Vec<i64> = self.cv.iter().flatten().map(|c| i64::from(*c)).collect();
        dev.set_constant_double_array(keys::WV, &self.wv, &[Q])?;
        dev.set_constant_int_array(keys::CV, &cv, &[Q, 3])?;
        dev.set_constant_double(keys::CS2, self.cs2)?;
        dev.set_constant_double(keys::TAU_F, self.tau_f)?;
        dev.set_constant_double(keys::TAU_G, self.tau_g)?;
        Ok(())
    }

    pub fn coefficients(&self) -> Coefficients {
        let inv_cs2 = 1.0 / self.cs2;
        Coefficients {
            inv_cs2,
            half_inv_cs2_sq: 0.5 * inv_cs2 * inv_cs2,
            half_inv_cs2: 0.5 * inv_cs2,
        }
    }

    /// Density and velocity of one site's populations.
    pub fn moments(&self, f: &[f64; Q]) -> Result<(f64, [f64; 3])> {
        let mut rho = 0.0;
        let mut m = [0.0; 3];
        for (fi, c) in f.iter().zip(&self.cv) {
            rho += fi;
            for a in 0..3 {
                m[a] += fi * f64::from(c[a]);
            }
        }
        if rho == 0.0 {
            return Err(Error::SingularState { site: 0, rho });
        }
        Ok((rho, [m[0] / rho, m[1] / rho, m[2] / rho]))
    }

    /// Second-order equilibrium `w_i rho (1 + u.c/cs2 + (u.c)^2/(2 cs2^2) - u.u/(2 cs2))`.
    pub fn equilibrium(&self, rho: f64, u: [f64; 3]) -> [f64; Q] {
        let k = self.coefficients();
        let uu = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
        let mut out = [0.0; Q];
        for i in 0..Q {
            out[i] = self.wv[i] * rho * k.bracket(self.cdot(i, u), uu);
        }
        out
    }

    /// Order-parameter equilibrium: the same bracket scaled by `w_i phi`.
    pub fn phi_equilibrium(&self, phi: f64, u: [f64; 3]) -> [f64; Q] {
        let k = self.coefficients();
        let uu = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
        let mut out = [0.0; Q];
        for i in 0..Q {
            out[i] = self.wv[i] * phi * k.bracket(self.cdot(i, u), uu);
        }
        out
    }

    /// `f_i (1 - 1/tau) + f_eq_i / tau`; returns `f_eq` exactly when `tau == 1`.
    pub fn bgk_relax(f: &[f64; Q], feq: &[f64; Q], tau: f64) -> [f64; Q] {
        let omega = 1.0 / tau;
        let keep = 1.0 - omega;
        let mut out = [0.0; Q];
        for i in 0..Q {
            out[i] = keep * f[i] + omega * feq[i];
        }
        out
    }

    fn cdot(&self, i: usize, u: [f64; 3]) -> f64 {
        let c = self.cv[i];
        f64::from(c[0]) * u[0] + f64::from(c[1]) * u[1] + f64::from(c[2]) * u[2]
    }
}

/// Equilibrium bracket coefficients derived from `cs2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub inv_cs2: f64,
    pub half_inv_cs2_sq: f64,
    pub half_inv_cs2: f64,
}

impl Coefficients {
    #[inline(always)]
    pub fn bracket(&self, cu: f64, uu: f64) -> f64 {
        1.0 + cu * self.inv_cs2 + cu * cu * self.half_inv_cs2_sq - uu * self.half_inv_cs2
    }
}
