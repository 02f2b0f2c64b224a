//! Droplet state, parameters and the geometric diagnostics shared by all schemes.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid;
use crate::substrate::Substrate;

/// Dimensionless physics and numerical controls.
///
/// Volume is not stored here: each droplet carries its own target volume,
/// since splits and merges create droplets with different volumes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Friction of the capillary surface.
    pub beta: f64,
    /// Gravity to capillarity ratio.
    pub kappa: f64,
    /// Relative adhesion coefficient, `-1 < sigma < 0`.
    pub sigma: f64,
    /// Effective inclination of the substrate frame (radians).
    #[serde(default)]
    pub theta0: f64,
    pub dt: f64,
    /// Number of moving-grid intervals per droplet.
    pub n: usize,
    #[serde(default = "default_eps")]
    pub eps_split: f64,
    #[serde(default = "default_eps_merge")]
    pub eps_merge: f64,
    #[serde(default = "default_contact_tol")]
    pub contact_tol: f64,
    #[serde(default = "default_bisect_tol")]
    pub bisect_tol: f64,
}

fn default_eps() -> f64 {
    0.075
}
fn default_eps_merge() -> f64 {
    0.01
}
fn default_contact_tol() -> f64 {
    1e-10
}
fn default_bisect_tol() -> f64 {
    1e-12
}

impl SimParams {
    pub fn new(beta: f64, kappa: f64, sigma: f64, theta0: f64, dt: f64, n: usize) -> Self {
        Self {
            beta,
            kappa,
            sigma,
            theta0,
            dt,
            n,
            eps_split: default_eps(),
            eps_merge: default_eps_merge(),
            contact_tol: default_contact_tol(),
            bisect_tol: default_bisect_tol(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidParams(msg));
        if !(self.sigma > -1.0 && self.sigma < 0.0) {
            return fail(format!("sigma must lie in (-1, 0), got {}", self.sigma));
        }
        if !(self.theta0.abs() < PI / 2.0) {
            return fail(format!("|theta0| must be below pi/2, got {}", self.theta0));
        }
        if !(self.beta > 0.0) {
            return fail(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.kappa >= 0.0) {
            return fail(format!("kappa must be nonnegative, got {}", self.kappa));
        }
        if !(self.dt > 0.0) {
            return fail(format!("dt must be positive, got {}", self.dt));
        }
        if self.n < 8 {
            return fail(format!("n must be at least 8, got {}", self.n));
        }
        if !(self.eps_split > 0.0 && self.eps_merge > 0.0) {
            return fail("eps_split and eps_merge must be positive".into());
        }
        if !(self.contact_tol >= 0.0 && self.bisect_tol > 0.0) {
            return fail("contact_tol must be nonnegative and bisect_tol positive".into());
        }
        Ok(())
    }
}

/// One droplet: contact points `a < b`, relative heights `u` on the uniform
/// grid over `[a, b]` (with `u = 0` at both ends), and its target volume.
#[derive(Debug, Clone, PartialEq)]
pub struct DropletState {
    pub a: f64,
    pub b: f64,
    pub u: Vec<f64>,
    pub time: f64,
    pub volume: f64,
}

impl DropletState {
    /// Samples `profile` on `n` intervals, zeroes the ends and takes the
    /// quadrature volume as the target.
    pub fn from_profile(a: f64, b: f64, n: usize, profile: impl Fn(f64) -> f64) -> Self {
        let mut u: Vec<f64> = grid::nodes(a, b, n).into_iter().map(profile).collect();
        u[0] = 0.0;
        u[n] = 0.0;
        let mut s = Self {
            a,
            b,
            u,
            time: 0.0,
            volume: 0.0,
        };
        s.volume = s.current_volume();
        s
    }

    pub fn n(&self) -> usize {
        self.u.len() - 1
    }

    pub fn dx(&self) -> f64 {
        (self.b - self.a) / self.n() as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        grid::nodes(self.a, self.b, self.n())
    }

    /// Absolute heights `h = u + w` at the nodes.
    pub fn heights(&self, substrate: &Substrate) -> Result<Vec<f64>> {
        let w = substrate.sample(&self.nodes())?;
        Ok(self.u.iter().zip(&w).map(|(u, w)| u + w).collect())
    }

    /// Trapezoid quadrature of `u` over `[a, b]`.
    pub fn current_volume(&self) -> f64 {
        grid::trapezoid(&self.u, self.dx())
    }

    /// Area-weighted mean x-position.
    pub fn centroid(&self) -> f64 {
        let xs = self.nodes();
        let xu: Vec<f64> = xs.iter().zip(&self.u).map(|(x, u)| x * u).collect();
        grid::trapezoid(&xu, self.dx()) / self.current_volume()
    }
}

/// Trapezoid volume of the droplet.
pub fn volume(state: &DropletState) -> f64 {
    state.current_volume()
}

/// Free energy with surface tension scaled out: liquid-gas arc length,
/// wetted substrate length weighted by `sigma`, and the gravitational potential.
pub fn energy(state: &DropletState, substrate: &Substrate, params: &SimParams) -> Result<f64> {
    let xs = state.nodes();
    let dx = state.dx();
    let w = substrate.sample(&xs)?;
    let h: Vec<f64> = state.u.iter().zip(&w).map(|(u, w)| u + w).collect();
    let hx = grid::node_slopes(&h, dx);
    let (c, s) = (params.theta0.cos(), params.theta0.sin());
    let density = xs
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            let u = state.u[j];
            let wx = substrate.w_prime(x)?;
            Ok((1.0 + hx[j] * hx[j]).sqrt()
                + params.sigma * (1.0 + wx * wx).sqrt()
                + params.kappa * (0.5 * u * u * c + u * w[j] * c + x * u * s))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(grid::trapezoid(&density, dx))
}

/// Boundary slopes `(dh/dx at a, dh/dx at b)` from 3-point one-sided differences.
pub fn boundary_slopes(state: &DropletState, substrate: &Substrate) -> Result<(f64, f64)> {
    let n = state.n();
    let dx = state.dx();
    let xs = state.nodes();
    let h: Vec<f64> = [0, 1, 2, n - 2, n - 1, n]
        .iter()
        .map(|&j| Ok(state.u[j] + substrate.w(xs[j])?))
        .collect::<Result<_>>()?;
    let left = (-3.0 * h[0] + 4.0 * h[1] - h[2]) / (2.0 * dx);
    let right = (3.0 * h[5] - 4.0 * h[4] + h[3]) / (2.0 * dx);
    Ok((left, right))
}

/// Contact angles measured from the local substrate tangent.
pub fn contact_angles(state: &DropletState, substrate: &Substrate) -> Result<(f64, f64)> {
    let (ha, hb) = boundary_slopes(state, substrate)?;
    let wa = substrate.w_prime(state.a)?;
    let wb = substrate.w_prime(state.b)?;
    Ok(angles_from_slopes(ha, wa, hb, wb))
}

pub fn angles_from_slopes(ha: f64, wa: f64, hb: f64, wb: f64) -> (f64, f64) {
    (ha.atan() - wa.atan(), (-hb).atan() - (-wb).atan())
}

/// Equilibrium angle with `cos(theta_Y) = -sigma`.
pub fn young_angle(sigma: f64) -> Result<f64> {
    if !(sigma > -1.0 && sigma < 0.0) {
        return Err(Error::InvalidParams(format!(
            "sigma must lie in (-1, 0), got {sigma}"
        )));
    }
    Ok((-sigma).acos())
}

/// Effective Bond number `kappa L^2 cos(theta0)` with `V = pi L^2`.
pub fn bond_number(volume: f64, kappa: f64, theta0: f64) -> f64 {
    kappa * (volume / PI) * theta0.cos()
}
