//! Simplified projection scheme on a horizontal plane (no gravity, no
//! volume constraint) and executable checks of its unconditional stability
//! bounds.
//!
//! Arc length is measured as the length of the piecewise-linear interpolant.
//! With face slopes `s`, `S(s) = sqrt(1 + s^2)` and the averaged flux
//! `F = (s~ + s*) / (S(s~) + S(s*))`, one has `F (s~ - s*) = S(s~) - S(s*)`,
//! so summation by parts turns the implicit step into the exact identity
//! `dissipation + arc(h~) - arc(h*) = 0` once the nonlinear solve has converged.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::droplet::DropletState;
use crate::error::{Error, Result};
use crate::grid;
use crate::par::Execution;

/// Fixed-point tolerance of the implicit solve (max norm between iterates).
pub const FIXED_POINT_TOL: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 100;
pub const MAX_DAMPING_HALVINGS: usize = 3;
/// Target max-norm residual of the nonlinear equation.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Allowed violation of the per-step identity.
pub const IDENTITY_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityParams {
    pub beta: f64,
    pub sigma: f64,
    pub dt: f64,
}

impl StabilityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        if !(self.sigma > -1.0 && self.sigma < 0.0) {
            return Err(Error::InvalidParams(format!(
                "sigma must lie in (-1, 0), got {}",
                self.sigma
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        Ok(())
    }
}

fn stretch(p: f64) -> f64 {
    (1.0 + p * p).sqrt()
}

fn face_slopes(u: &[f64], dx: f64) -> Vec<f64> {
    u.windows(2).map(|w| (w[1] - w[0]) / dx).collect()
}

pub fn boundary_step_simple(state: &DropletState, params: &StabilityParams) -> Result<(f64, f64)> {
    let dx = state.dx();
    let ha = grid::slope_left(&state.u, dx);
    let hb = grid::slope_right(&state.u, dx);
    let a_new = state.a + params.dt * (params.sigma + 1.0 / stretch(ha));
    let b_new = state.b - params.dt * (params.sigma + 1.0 / stretch(hb));
    if !(a_new < b_new) {
        return Err(Error::Collapse {
            time: state.time + params.dt,
            a: a_new,
            b: b_new,
        });
    }
    Ok((a_new, b_new))
}

/// Resampling in the fixed variable `Z = (x - a)/(b - a)`: both grids share
/// the uniform Z-nodes, so node values carry over unchanged.
pub fn rescale_fixed_z(state: &DropletState) -> Vec<f64> {
    state.u.clone()
}

pub fn project_zero(u_tilde: &[f64]) -> Vec<f64> {
    u_tilde.iter().map(|v| v.max(0.0)).collect()
}

/// `beta/dt * dx * sum_j (u~_j - u*_j)^2 / sqrt(1 + (central slope of u~)^2)`.
pub fn dissipation(u_tilde: &[f64], u_star: &[f64], dx: f64, beta: f64, dt: f64) -> f64 {
    let r = grid::node_slopes(u_tilde, dx);
    let n = u_tilde.len() - 1;
    beta / dt
        * dx
        * (1..n)
            .map(|j| (u_tilde[j] - u_star[j]).powi(2) / stretch(r[j]))
            .sum::<f64>()
}

/// Max-norm residual of the nonlinear implicit equation at `u_tilde`.
pub fn implicit_residual(u_tilde: &[f64], u_star: &[f64], dx: f64, beta: f64, dt: f64) -> f64 {
    let n = u_tilde.len() - 1;
    let st = face_slopes(u_tilde, dx);
    let ss = face_slopes(u_star, dx);
    let flux: Vec<f64> = st
        .iter()
        .zip(&ss)
        .map(|(&p, &q)| (p + q) / (stretch(p) + stretch(q)))
        .collect();
    let r = grid::node_slopes(u_tilde, dx);
    (1..n)
        .map(|j| {
            (beta / (dt * stretch(r[j])) * (u_tilde[j] - u_star[j]) - (flux[j] - flux[j - 1]) / dx)
                .abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImplicitSolve {
    pub u_tilde: Vec<f64>,
    pub iterations: usize,
    pub damping: f64,
    pub residual: f64,
}

/// One linear solve with the node weights and face denominators frozen at `prev`.
fn lagged_solve(prev: &[f64], u_star: &[f64], dx: f64, beta: f64, dt: f64) -> Vec<f64> {
    let n = u_star.len() - 1;
    let m = n - 1;
    let sp = face_slopes(prev, dx);
    let ss = face_slopes(u_star, dx);
    let denom: Vec<f64> = sp
        .iter()
        .zip(&ss)
        .map(|(&p, &q)| stretch(p) + stretch(q))
        .collect();
    let r = grid::node_slopes(prev, dx);
    let dx2 = dx * dx;
    let (mut lower, mut diag, mut upper, mut rhs) =
        (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    for i in 0..m {
        let j = i + 1;
        let (cl, cr) = (1.0 / (denom[j - 1] * dx2), 1.0 / (denom[j] * dx2));
        let mass = beta / (dt * stretch(r[j]));
        lower[i] = -cl;
        upper[i] = -cr;
        diag[i] = mass + cl + cr;
        // explicit half of the averaged flux
        rhs[i] = mass * u_star[j] + (ss[j] / denom[j] - ss[j - 1] / denom[j - 1]) / dx;
    }
    let inner = grid::solve_tridiagonal(&lower, &diag, &upper, &rhs);
    let mut out = vec![0.0; n + 1];
    out[1..n].copy_from_slice(&inner);
    out
}

/// Implicit averaged-flux capillary step with zero Dirichlet ends, solved by
/// a lagged-coefficient fixed point started at `u_star`.
pub fn capillary_implicit_avg(
    u_star: &[f64],
    a_new: f64,
    b_new: f64,
    params: &StabilityParams,
) -> Result<ImplicitSolve> {
    let n = u_star.len() - 1;
    let dx = (b_new - a_new) / n as f64;
    let mut start = u_star.to_vec();
    start[0] = 0.0;
    start[n] = 0.0;
    let mut damping = 1.0;
    let mut last_change = f64::INFINITY;
    for _ in 0..=MAX_DAMPING_HALVINGS {
        let mut it = start.clone();
        for k in 1..=MAX_ITERATIONS {
            let target = lagged_solve(&it, &start, dx, params.beta, params.dt);
            let next: Vec<f64> = it
                .iter()
                .zip(&target)
                .map(|(o, t)| o + damping * (t - o))
                .collect();
            last_change = next
                .iter()
                .zip(&it)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            it = next;
            if !last_change.is_finite() {
                break;
            }
            if last_change <= FIXED_POINT_TOL {
                let residual = implicit_residual(&it, &start, dx, params.beta, params.dt);
                if residual > RESIDUAL_TOL {
                    if let Some(mut polished) = newton(&it, &start, dx, params) {
                        polished.iterations += k;
                        return Ok(polished);
                    }
                }
                return Ok(ImplicitSolve {
                    u_tilde: it,
                    iterations: k,
                    damping,
                    residual,
                });
            }
        }
        damping *= 0.5;
    }
    newton(&start, &start, dx, params).ok_or(Error::ImplicitSolve {
        residual: last_change,
    })
}

/// Newton iteration on the same nonlinear system, used when the lagged
/// fixed point stalls (its contraction factor tends to one for steep slopes).
fn newton(
    guess: &[f64],
    u_star: &[f64],
    dx: f64,
    params: &StabilityParams,
) -> Option<ImplicitSolve> {
    let (beta, dt) = (params.beta, params.dt);
    let n = u_star.len() - 1;
    let m = n - 1;
    let ss = face_slopes(u_star, dx);
    let mut u = guess.to_vec();
    let residual_vec = |u: &[f64]| -> Vec<f64> {
        let st = face_slopes(u, dx);
        let flux: Vec<f64> = st
            .iter()
            .zip(&ss)
            .map(|(&p, &q)| (p + q) / (stretch(p) + stretch(q)))
            .collect();
        let r = grid::node_slopes(u, dx);
        (1..n)
            .map(|j| {
                beta / (dt * stretch(r[j])) * (u[j] - u_star[j]) - (flux[j] - flux[j - 1]) / dx
            })
            .collect()
    };
    let norm = |v: &[f64]| grid::max_abs(v);
    let mut res = residual_vec(&u);
    for k in 1..=MAX_ITERATIONS {
        let st = face_slopes(&u, dx);
        // d flux / d (face slope of u~)
        let dflux: Vec<f64> = st
            .iter()
            .zip(&ss)
            .map(|(&p, &q)| {
                let (sp, sq) = (stretch(p), stretch(q));
                ((sp + sq) - (p + q) * p / sp) / (sp + sq).powi(2)
            })
            .collect();
        let r = grid::node_slopes(&u, dx);
        let (mut lower, mut diag, mut upper) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
        for i in 0..m {
            let j = i + 1;
            let sr = stretch(r[j]);
            let weight_slope = -beta / dt * (u[j] - u_star[j]) * r[j] / sr.powi(3) / (2.0 * dx);
            diag[i] = beta / (dt * sr) + (dflux[j] + dflux[j - 1]) / (dx * dx);
            upper[i] = weight_slope - dflux[j] / (dx * dx);
            lower[i] = -weight_slope - dflux[j - 1] / (dx * dx);
        }
        let step = grid::solve_tridiagonal(&lower, &diag, &upper, &res);
        if step.iter().any(|v| !v.is_finite()) {
            return None;
        }
        // backtrack on the residual norm
        let mut t = 1.0;
        let base = norm(&res);
        let mut accepted = None;
        for _ in 0..30 {
            let mut trial = u.clone();
            for i in 0..m {
                trial[i + 1] -= t * step[i];
            }
            let tr = residual_vec(&trial);
            if norm(&tr) < base || base == 0.0 {
                accepted = Some((trial, tr));
                break;
            }
            t *= 0.5;
        }
        let Some((trial, tr)) = accepted else {
            // round-off floor reached
            return (base <= RESIDUAL_TOL).then_some(ImplicitSolve {
                residual: base,
                u_tilde: u,
                iterations: k,
                damping: t,
            });
        };
        let change = trial
            .iter()
            .zip(&u)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        u = trial;
        res = tr;
        if change <= FIXED_POINT_TOL && norm(&res) <= RESIDUAL_TOL {
            return Some(ImplicitSolve {
                residual: norm(&res),
                u_tilde: u,
                iterations: k,
                damping: t,
            });
        }
    }
    None
}

/// Diagnostics of one simplified step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimpleStep {
    pub arc_before: f64,
    pub arc_star: f64,
    pub arc_tilde: f64,
    pub arc_after: f64,
    pub dissipation: f64,
    pub iterations: usize,
    pub residual: f64,
}

pub fn simple_step(
    state: &DropletState,
    params: &StabilityParams,
) -> Result<(DropletState, SimpleStep)> {
    let (a_new, b_new) = boundary_step_simple(state, params)?;
    let u_star = rescale_fixed_z(state);
    let n = state.n();
    let dx_new = (b_new - a_new) / n as f64;
    let solve = capillary_implicit_avg(&u_star, a_new, b_new, params)?;
    let u_new = project_zero(&solve.u_tilde);
    let diag = SimpleStep {
        arc_before: grid::polyline_length(&state.u, state.dx()),
        arc_star: grid::polyline_length(&u_star, dx_new),
        arc_tilde: grid::polyline_length(&solve.u_tilde, dx_new),
        arc_after: grid::polyline_length(&u_new, dx_new),
        dissipation: dissipation(&solve.u_tilde, &u_star, dx_new, params.beta, params.dt),
        iterations: solve.iterations,
        residual: solve.residual,
    };
    let volume = grid::trapezoid(&u_new, dx_new);
    let next = DropletState {
        a: a_new,
        b: b_new,
        u: u_new,
        time: state.time + params.dt,
        volume,
    };
    Ok((next, diag))
}

/// Histories of one simplified run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StabilityReport {
    pub dt: f64,
    pub profile: usize,
    pub time: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// Arc length after each step (index 0 is the initial state).
    pub arc: Vec<f64>,
    pub cumulative_dissipation: Vec<f64>,
    /// Per-step `dissipation + arc(h~) - arc(h*)`.
    pub identity_defect: Vec<f64>,
    /// Per-step quadrature slack `10 dx^2`.
    pub slack: Vec<f64>,
    pub max_residual: f64,
    pub max_iterations: usize,
}

/// Bound values for one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundMargins {
    /// Smallest distance of any endpoint to its bound (negative = violated).
    pub endpoint: f64,
    /// `8T + 2 arc0 + slack - max(arc) - dissipation` (negative = violated).
    pub energy: f64,
    /// Largest per-step identity defect.
    pub identity: f64,
}

impl StabilityReport {
    pub fn margins(&self, sigma: f64) -> BoundMargins {
        let (a0, b0) = (self.a[0], self.b[0]);
        let mut endpoint = f64::INFINITY;
        for k in 0..self.time.len() {
            let t = self.time[k];
            endpoint = endpoint
                .min(self.a[k] - (a0 + sigma * t))
                .min(a0 + (1.0 + sigma) * t - self.a[k])
                .min(self.b[k] - (b0 - (1.0 + sigma) * t))
                .min(b0 - sigma * t - self.b[k]);
        }
        let t_final = *self.time.last().unwrap_or(&0.0);
        let max_arc = self.arc.iter().cloned().fold(0.0, f64::max);
        let total_dissipation = *self.cumulative_dissipation.last().unwrap_or(&0.0);
        let slack: f64 = self.slack.iter().sum();
        let energy = 8.0 * t_final + 2.0 * self.arc[0] + slack - max_arc - total_dissipation;
        let identity = self
            .identity_defect
            .iter()
            .map(|d| d.abs())
            .fold(0.0, f64::max);
        BoundMargins {
            endpoint,
            energy,
            identity,
        }
    }

    /// Checks the endpoint, arc-length plus dissipation, and per-step bounds.
    pub fn check(&self, sigma: f64) -> Result<()> {
        let m = self.margins(sigma);
        let scale = 1.0 + self.a[0].abs().max(self.b[0].abs());
        if m.endpoint < -64.0 * f64::EPSILON * scale {
            return Err(Error::StabilityViolation(format!(
                "endpoint bound violated by {} at dt = {}",
                -m.endpoint, self.dt
            )));
        }
        if m.energy < 0.0 {
            return Err(Error::StabilityViolation(format!(
                "arc length + dissipation bound violated by {} at dt = {}",
                -m.energy, self.dt
            )));
        }
        if m.identity > IDENTITY_SLACK {
            return Err(Error::StabilityViolation(format!(
                "per-step identity defect {} at dt = {}",
                m.identity, self.dt
            )));
        }
        Ok(())
    }
}

pub fn stability_run(
    initial: &DropletState,
    params: &StabilityParams,
    t_final: f64,
) -> Result<StabilityReport> {
    params.validate()?;
    let mut rep = StabilityReport {
        dt: params.dt,
        time: vec![initial.time],
        a: vec![initial.a],
        b: vec![initial.b],
        arc: vec![grid::polyline_length(&initial.u, initial.dx())],
        cumulative_dissipation: vec![0.0],
        ..Default::default()
    };
    let mut state = initial.clone();
    let mut total = 0.0;
    for _ in 0..crate::scheme::step_count(t_final, params.dt) {
        let (next, d) = simple_step(&state, params)?;
        total += d.dissipation;
        rep.time.push(next.time - initial.time);
        rep.a.push(next.a);
        rep.b.push(next.b);
        rep.arc.push(d.arc_after);
        rep.cumulative_dissipation.push(total);
        rep.identity_defect
            .push(d.dissipation + d.arc_tilde - d.arc_star);
        rep.slack.push(10.0 * next.dx().powi(2));
        rep.max_residual = rep.max_residual.max(d.residual);
        rep.max_iterations = rep.max_iterations.max(d.iterations);
        state = next;
    }
    rep.time[0] = 0.0;
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    pub beta: f64,
    pub sigma: f64,
    pub dts: Vec<f64>,
    pub t_final: f64,
    pub n: usize,
    pub profiles: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_a0")]
    pub a0: f64,
    #[serde(default = "default_b0")]
    pub b0: f64,
}

fn default_a0() -> f64 {
    -1.0
}
fn default_b0() -> f64 {
    1.0
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            sigma: -0.5,
            dts: vec![1e-1, 1e-2, 1e-3],
            t_final: 0.5,
            n: 100,
            profiles: 10,
            seed: 0,
            a0: -1.0,
            b0: 1.0,
        }
    }
}

/// Random smooth nonnegative bump: `c1 sin(pi Z) + sum_{k=2..4} c_k sin(k pi Z)`
/// clipped at zero, with `c1` in `[0.3, 1.5]` and `|c_k| <= c1 / k^2`.
pub fn random_bump<R: Rng>(rng: &mut R, a0: f64, b0: f64, n: usize) -> DropletState {
    let c1 = rng.gen_range(0.3..1.5);
    let rest: Vec<f64> = (2..=4)
        .map(|k| rng.gen_range(-1.0..1.0) * c1 / (k * k) as f64)
        .collect();
    let mut s = DropletState::from_profile(a0, b0, n, |x| {
        let z = (x - a0) / (b0 - a0);
        let pi = std::f64::consts::PI;
        let mut v = c1 * (pi * z).sin();
        for (i, c) in rest.iter().enumerate() {
            v += c * ((i + 2) as f64 * pi * z).sin();
        }
        v.max(0.0)
    });
    s.volume = s.current_volume();
    s
}

pub fn random_profiles(config: &StabilityConfig) -> Vec<DropletState> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
    (0..config.profiles)
        .map(|_| random_bump(&mut rng, config.a0, config.b0, config.n))
        .collect()
}

/// Runs every (profile, dt) pair without checking the bounds.
pub fn stability_runs(config: &StabilityConfig, exec: Execution) -> Result<Vec<StabilityReport>> {
    if config.dts.is_empty() {
        return Err(Error::InvalidParams(
            "stability sweep needs at least one dt".into(),
        ));
    }
    let profiles = random_profiles(config);
    let jobs: Vec<(usize, f64)> = (0..profiles.len())
        .flat_map(|p| config.dts.iter().map(move |&dt| (p, dt)))
        .collect();
    exec.map(&jobs, |&(p, dt)| {
        let params = StabilityParams {
            beta: config.beta,
            sigma: config.sigma,
            dt,
        };
        stability_run(&profiles[p], &params, config.t_final).map(|mut r| {
            r.profile = p;
            r
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()
}

/// Runs every (profile, dt) pair and checks all bounds.
pub fn stability_sweep(config: &StabilityConfig, exec: Execution) -> Result<Vec<StabilityReport>> {
    let reports = stability_runs(config, exec)?;
    for r in &reports {
        r.check(config.sigma)?;
    }
    Ok(reports)
}

/// Per-step rows `dt,profile,step,time,a,b,arc,dissipation,identity_defect,endpoint_margin,energy_margin`.
pub fn write_report_csv(
    reports: &[StabilityReport],
    sigma: f64,
    path: &std::path::Path,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "dt",
        "profile",
        "step",
        "time",
        "a",
        "b",
        "arc",
        "dissipation",
        "identity_defect",
        "endpoint_margin",
        "energy_margin",
    ])?;
    for r in reports {
        let m = r.margins(sigma);
        for k in 0..r.time.len() {
            let defect = if k == 0 {
                0.0
            } else {
                r.identity_defect[k - 1]
            };
            w.write_record([
                r.dt.to_string(),
                r.profile.to_string(),
                k.to_string(),
                r.time[k].to_string(),
                r.a[k].to_string(),
                r.b[k].to_string(),
                r.arc[k].to_string(),
                r.cumulative_dissipation[k].to_string(),
                defect.to_string(),
                m.endpoint.to_string(),
                m.energy.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(dt: f64) -> StabilityParams {
        StabilityParams {
            beta: 1.0,
            sigma: -0.5,
            dt,
        }
    }

    fn bump(n: usize) -> DropletState {
        DropletState::from_profile(-1.0, 1.0, n, |x| 0.8 * (1.0 - x * x))
    }

    #[test]
    fn equilibrium_slope_keeps_a_fixed() {
        let theta = std::f64::consts::FRAC_PI_3;
        let n = 50;
        let s = DropletState::from_profile(0.0, 1.0, n, |x| theta.tan() * x * (1.0 - x));
        let p = StabilityParams {
            beta: 1.0,
            sigma: -theta.cos(),
            dt: 0.1,
        };
        // exact slope tan(theta) at a for this quadratic: one-sided stencil is exact
        let (a, _) = boundary_step_simple(&s, &p).unwrap();
        assert!(a.abs() < 1e-12);
    }

    #[test]
    fn endpoint_increment_bounds() {
        for slope in [0.0, 0.3, 2.0, 50.0] {
            let s = DropletState::from_profile(0.0, 1.0, 20, |x| slope * x * (1.0 - x));
            let p = params(0.05);
            let (a, b) = boundary_step_simple(&s, &p).unwrap();
            assert!(a >= p.sigma * p.dt - 1e-15 && a <= (1.0 + p.sigma) * p.dt + 1e-15);
            assert!(1.0 - b >= p.sigma * p.dt - 1e-15 && 1.0 - b <= (1.0 + p.sigma) * p.dt + 1e-15);
        }
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let z = vec![0.0; 11];
        let s = capillary_implicit_avg(&z, 0.0, 1.0, &params(0.1)).unwrap();
        assert!(s.u_tilde.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn clipping_shortens_polyline() {
        let n = 60;
        let u: Vec<f64> = (0..=n)
            .map(|j| (3.0 * std::f64::consts::PI * j as f64 / n as f64).sin())
            .collect();
        let c = project_zero(&u);
        for (a, b) in u.iter().zip(&c) {
            assert!(if *a >= 0.0 { a == b } else { *b == 0.0 });
        }
        let dx = 1.0 / n as f64;
        assert!(grid::polyline_length(&c, dx) <= grid::polyline_length(&u, dx));
    }

    #[test]
    fn energy_identity_holds_for_each_dt() {
        for dt in [1e-1, 1e-2, 1e-3] {
            let s = bump(80);
            let (_, d) = simple_step(&s, &params(dt)).unwrap();
            let defect = d.dissipation + d.arc_tilde - d.arc_star;
            assert!(defect.abs() < 1e-8, "dt {dt}: defect {defect}");
            assert!(
                d.residual <= RESIDUAL_TOL,
                "dt {dt}: residual {}",
                d.residual
            );
            assert!(d.arc_after <= d.arc_tilde + 1e-15);
            assert!((d.arc_star - d.arc_before).abs() <= 4.0 * dt);
        }
    }

    #[test]
    fn single_run_satisfies_bounds() {
        let r = stability_run(&bump(60), &params(0.1), 0.5).unwrap();
        r.check(-0.5).unwrap();
        assert_eq!(r.time.len(), 6);
        assert!(r.cumulative_dissipation.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn zero_horizon_reduces_to_initial_values() {
        let s = bump(40);
        let r = stability_run(&s, &params(0.1), 0.0).unwrap();
        let m = r.margins(-0.5);
        assert_eq!(m.endpoint, 0.0);
        assert!((m.energy - r.arc[0]).abs() < 1e-15);
    }

    #[test]
    fn random_bumps_are_feasible() {
        let c = StabilityConfig::default();
        for s in random_profiles(&c) {
            assert!(s.u.iter().all(|&v| v >= 0.0));
            assert_eq!((s.u[0], s.u[c.n]), (0.0, 0.0));
        }
    }
}
