//! First-order projection scheme for one droplet.
//!
//! One step is the composition
//!
//! 1. explicit contact-point update from the unbalanced Young force,
//! 2. ALE transfer of the profile onto the new uniform grid with a
//!    first-order Taylor correction,
//! 3. semi-implicit capillary update with a volume multiplier (two
//!    tridiagonal solves combined by linearity),
//! 4. projection onto `{u >= 0, integral of u = V}` by bisection on the
//!    shift `lambda` in `max(u + lambda, 0)`.

use crate::droplet::{contact_angles, energy, DropletState, SimParams};
use crate::error::{Error, Result};
use crate::grid;
use crate::substrate::Substrate;
use crate::trace::{Event, EventKind, SimulationTrace, Snapshot, TraceRecord};

/// Internals of one [`full_step`], kept for diagnostics and tests.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub a_new: f64,
    pub b_new: f64,
    pub pre_projection: Vec<f64>,
    pub post_projection: Vec<f64>,
    pub lambda_volume: f64,
    pub lambda_proj: f64,
    pub coincidence: Vec<bool>,
}

/// Normal velocity factor `sigma sqrt(1 + w'^2) + (1 + h' w') / sqrt(1 + h'^2)`.
pub fn contact_velocity(sigma: f64, hx: f64, wx: f64) -> f64 {
    sigma * (1.0 + wx * wx).sqrt() + (1.0 + hx * wx) / (1.0 + hx * hx).sqrt()
}

pub fn boundary_step(
    state: &DropletState,
    substrate: &Substrate,
    params: &SimParams,
) -> Result<(f64, f64)> {
    let (ha, hb) = crate::droplet::boundary_slopes(state, substrate)?;
    let wa = substrate.w_prime(state.a)?;
    let wb = substrate.w_prime(state.b)?;
    let a_new = state.a + params.dt * contact_velocity(params.sigma, ha, wa);
    let b_new = state.b - params.dt * contact_velocity(params.sigma, hb, wb);
    if !(a_new < b_new) {
        return Err(Error::Collapse {
            time: state.time + params.dt,
            a: a_new,
            b: b_new,
        });
    }
    Ok((a_new, b_new))
}

/// Transfers the profile to the grid over `[a_new, b_new]`: node `j` of the
/// new grid takes `h(x_j) + h_x(x_j) (x'_j - x_j)` from node `j` of the old one.
/// The end nodes are reset to the substrate.
pub fn ale_rescale(
    state: &DropletState,
    a_new: f64,
    b_new: f64,
    substrate: &Substrate,
) -> Result<Vec<f64>> {
    let mut u_star = ale_transfer(state, a_new, b_new, substrate)?;
    let n = u_star.len() - 1;
    u_star[0] = 0.0;
    u_star[n] = 0.0;
    Ok(u_star)
}

/// Same transfer with the Taylor values kept at the end nodes. These only
/// enter the curvature weights of the capillary step; a reset end would put
/// a spurious kink into them whenever a contact line moves.
pub fn ale_transfer(
    state: &DropletState,
    a_new: f64,
    b_new: f64,
    substrate: &Substrate,
) -> Result<Vec<f64>> {
    let n = state.n();
    let old = state.nodes();
    let new = grid::nodes(a_new, b_new, n);
    let w_old = substrate.sample(&old)?;
    let w_new = substrate.sample(&new)?;
    let h: Vec<f64> = state.u.iter().zip(&w_old).map(|(u, w)| u + w).collect();
    let hx = grid::node_slopes(&h, state.dx());
    Ok((0..=n)
        .map(|j| state.u[j] + (w_old[j] - w_new[j]) + hx[j] * (new[j] - old[j]))
        .collect())
}

/// Semi-implicit capillary update with the volume multiplier.
///
/// Interior values of `u_star` carry the data; its end values enter only the
/// slope weights. Returns the relative height `u_tilde` (zero at both ends,
/// exact volume) and the multiplier `lambda`.
pub fn capillary_semi_implicit(
    u_star: &[f64],
    a_new: f64,
    b_new: f64,
    volume: f64,
    substrate: &Substrate,
    params: &SimParams,
) -> Result<(Vec<f64>, f64)> {
    let n = u_star.len() - 1;
    let dx = (b_new - a_new) / n as f64;
    let xs = grid::nodes(a_new, b_new, n);
    let w = substrate.sample(&xs)?;
    let h_star: Vec<f64> = u_star.iter().zip(&w).map(|(u, w)| u + w).collect();
    let q: Vec<f64> = grid::node_slopes(&h_star, dx)
        .into_iter()
        .map(|p| 1.0 / (1.0 + p * p).sqrt())
        .collect();
    // face weights between node j and j+1
    let face: Vec<f64> = q.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect();

    let (cos0, sin0) = (params.theta0.cos(), params.theta0.sin());
    let dx2 = dx * dx;
    let m = n - 1;
    let mut lower = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];
    let mut rhs_p = vec![0.0; m];
    for i in 0..m {
        let j = i + 1;
        let (cl, cr) = (face[j - 1] / dx2, face[j] / dx2);
        let mass = params.beta * q[j] / params.dt;
        lower[i] = -cl;
        upper[i] = -cr;
        diag[i] = mass + params.kappa * cos0 + cl + cr;
        rhs_p[i] = mass * h_star[j] - params.kappa * xs[j] * sin0;
    }
    rhs_p[0] += face[0] / dx2 * w[0];
    rhs_p[m - 1] += face[n - 1] / dx2 * w[n];
    let h_p = grid::solve_tridiagonal(&lower, &diag, &upper, &rhs_p);
    let h_r = grid::solve_tridiagonal(&lower, &diag, &upper, &vec![1.0; m]);

    let vol_p = dx * (0..m).map(|i| h_p[i] - w[i + 1]).sum::<f64>();
    let vol_r = dx * h_r.iter().sum::<f64>();
    if !vol_p.is_finite() || !vol_r.is_finite() {
        return Err(Error::BlowUp {
            step: step_index(params, 0.0),
        });
    }
    if vol_r <= 1e-14 {
        return Err(Error::SingularConstraint(vol_r));
    }
    let lambda = (volume - vol_p) / vol_r;
    let mut u_tilde = vec![0.0; n + 1];
    for i in 0..m {
        u_tilde[i + 1] = (h_p[i] - w[i + 1]) + lambda * h_r[i];
    }
    if u_tilde.iter().any(|v| !v.is_finite()) {
        return Err(Error::BlowUp {
            step: step_index(params, 0.0),
        });
    }
    Ok((u_tilde, lambda))
}

fn step_index(params: &SimParams, time: f64) -> usize {
    (time / params.dt).round() as usize
}

/// Projection of `u_tilde` onto `{u >= 0, trapezoid integral = volume}`
/// with the end nodes held at zero: `u = max(u_tilde + lambda, 0)`.
///
/// `lambda` is found by bisection on the nondecreasing map
/// `f(lambda) = integral of max(u_tilde + lambda, 0) - volume`, and once the
/// active set is identified it is recomputed in closed form.
pub fn project_onto_obstacle(
    u_tilde: &[f64],
    dx: f64,
    volume: f64,
    bisect_tol: f64,
) -> Result<(Vec<f64>, f64)> {
    let n = u_tilde.len() - 1;
    let interior = &u_tilde[1..n];
    if interior.iter().any(|v| !v.is_finite()) {
        return Err(Error::BracketFailure("non-finite profile".into()));
    }
    let shifted_volume =
        |lambda: f64| dx * interior.iter().map(|v| (v + lambda).max(0.0)).sum::<f64>();
    let residual = |lambda: f64| shifted_volume(lambda) - volume;
    let tol = bisect_tol * volume.abs().max(f64::MIN_POSITIVE);
    let finish = |lambda: f64| {
        let mut u: Vec<f64> = u_tilde.iter().map(|v| (v + lambda).max(0.0)).collect();
        u[0] = 0.0;
        u[n] = 0.0;
        (u, lambda)
    };

    if residual(0.0).abs() <= tol {
        return Ok(finish(0.0));
    }
    let top = interior.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut lo = -top;
    let mut hi = ((volume - dx * interior.iter().sum::<f64>()) / (dx * (n - 1) as f64)).max(0.0);
    if residual(hi).abs() <= tol {
        return Ok(finish(hi));
    }
    if !(residual(lo) <= tol && residual(hi) >= -tol) {
        return Err(Error::BracketFailure(format!(
            "f({lo}) = {}, f({hi}) = {}",
            residual(lo),
            residual(hi)
        )));
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let f = residual(mid);
        if f.abs() <= tol || hi - lo <= f64::EPSILON * hi.abs().max(lo.abs()).max(1.0) {
            break;
        }
        if f < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // exact multiplier on the active set found by bisection
    let active: Vec<f64> = interior.iter().copied().filter(|v| v + mid > 0.0).collect();
    if !active.is_empty() {
        let exact = (volume / dx - active.iter().sum::<f64>()) / active.len() as f64;
        let consistent = interior
            .iter()
            .all(|v| (v + mid > 0.0) == (v + exact > 0.0));
        if consistent && residual(exact).abs() <= residual(mid).abs() {
            mid = exact;
        }
    }
    Ok(finish(mid))
}

pub fn full_step(
    state: &DropletState,
    substrate: &Substrate,
    params: &SimParams,
) -> Result<(DropletState, StepReport)> {
    let step = step_index(params, state.time) + 1;
    let with_step = |e: Error| match e {
        Error::BlowUp { .. } => Error::BlowUp { step },
        other => other,
    };
    let (a_new, b_new) = boundary_step(state, substrate, params)?;
    let u_star = ale_transfer(state, a_new, b_new, substrate)?;
    let (u_tilde, lambda_volume) =
        capillary_semi_implicit(&u_star, a_new, b_new, state.volume, substrate, params)
            .map_err(with_step)?;
    let dx = (b_new - a_new) / state.n() as f64;
    let (u_new, lambda_proj) = project_onto_obstacle(&u_tilde, dx, state.volume, params.bisect_tol)
        .map_err(|e| match e {
            Error::BracketFailure(_) => Error::BlowUp { step },
            other => other,
        })?;
    let coincidence = u_new.iter().map(|&v| v <= params.contact_tol).collect();
    let next = DropletState {
        a: a_new,
        b: b_new,
        u: u_new.clone(),
        time: state.time + params.dt,
        volume: state.volume,
    };
    Ok((
        next,
        StepReport {
            a_new,
            b_new,
            pre_projection: u_tilde,
            post_projection: u_new,
            lambda_volume,
            lambda_proj,
            coincidence,
        },
    ))
}

/// Number of fixed steps needed to reach `t_final`.
pub fn step_count(t_final: f64, dt: f64) -> usize {
    if t_final <= 0.0 {
        0
    } else {
        (t_final / dt - 1e-9).ceil() as usize
    }
}

pub fn record(
    state: &DropletState,
    substrate: &Substrate,
    params: &SimParams,
    lambda: f64,
) -> Result<TraceRecord> {
    let (theta_a, theta_b) = contact_angles(state, substrate)?;
    Ok(TraceRecord {
        time: state.time,
        a: state.a,
        b: state.b,
        theta_a,
        theta_b,
        energy: energy(state, substrate, params)?,
        volume: state.current_volume(),
        lambda,
    })
}

pub fn snapshot(step: usize, droplets: &[DropletState], substrate: &Substrate) -> Result<Snapshot> {
    let mut s = Snapshot {
        step,
        time: droplets.first().map_or(0.0, |d| d.time),
        x: Vec::new(),
        u: Vec::new(),
        w: Vec::new(),
    };
    for d in droplets {
        let xs = d.nodes();
        s.w.extend(substrate.sample(&xs)?);
        s.x.extend(xs);
        s.u.extend(&d.u);
    }
    Ok(s)
}

/// A run that stopped on an error; the trace holds everything up to the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub trace: SimulationTrace,
    pub error: Error,
}

/// Single-droplet run without topology events. A collapse ends the run
/// with a recorded event rather than an error.
pub fn run_simulation(
    initial: &DropletState,
    substrate: &Substrate,
    params: &SimParams,
    t_final: f64,
    snapshot_stride: usize,
) -> std::result::Result<SimulationTrace, RunFailure> {
    let mut trace = SimulationTrace::default();
    let fail = |trace: SimulationTrace, error| RunFailure { trace, error };
    let stride = snapshot_stride.max(1);
    match record(initial, substrate, params, 0.0)
        .and_then(|r| Ok((r, snapshot(0, std::slice::from_ref(initial), substrate)?)))
    {
        Ok((r, s)) => {
            trace.records.push(r);
            trace.snapshots.push(s);
        }
        Err(e) => return Err(fail(trace, e)),
    }
    let steps = step_count(t_final, params.dt);
    let mut state = initial.clone();
    for k in 1..=steps {
        let (next, report) = match full_step(&state, substrate, params) {
            Ok(v) => v,
            Err(Error::Collapse { time, a, b }) => {
                trace.events.push(Event {
                    kind: EventKind::Collapse,
                    time,
                    c: Some(a),
                    d: Some(b),
                    indices: vec![0],
                    volumes_before: vec![state.volume],
                    volumes_after: vec![],
                });
                return Ok(trace);
            }
            Err(e) => return Err(fail(trace, e)),
        };
        state = next;
        match record(&state, substrate, params, report.lambda_volume) {
            Ok(r) => trace.records.push(r),
            Err(e) => return Err(fail(trace, e)),
        }
        if k % stride == 0 || k == steps {
            match snapshot(k, std::slice::from_ref(&state), substrate) {
                Ok(s) => trace.snapshots.push(s),
                Err(e) => return Err(fail(trace, e)),
            }
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn flat_params() -> SimParams {
        SimParams::new(1.0, 0.0, -0.5, 0.0, 0.01, 64)
    }

    /// Circular cap over [-1, 1] meeting the flat substrate at angle `theta`.
    fn cap(theta: f64) -> impl Fn(f64) -> f64 {
        let r = 1.0 / theta.sin();
        move |x: f64| (r * r - x * x).max(0.0).sqrt() - r * theta.cos()
    }

    #[test]
    fn equilibrium_slope_does_not_move_contact_point() {
        let p = flat_params();
        let slope = (PI / 3.0).tan();
        assert!(contact_velocity(p.sigma, slope, 0.0).abs() < 1e-15);
    }

    #[test]
    fn zero_slope_spreads_at_half_unit_speed() {
        let p = flat_params();
        assert_relative_eq!(contact_velocity(p.sigma, 0.0, 0.0), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn flat_increment_bounds() {
        let sigma = -0.3;
        for i in 0..200 {
            let v = contact_velocity(sigma, -20.0 + 0.2 * i as f64, 0.0);
            assert!(sigma <= v && v <= 1.0 + sigma);
        }
    }

    #[test]
    fn boundary_step_reports_collapse() {
        let mut p = flat_params();
        p.dt = 10.0;
        let s = DropletState::from_profile(-0.1, 0.1, 16, |x| 0.01 * (0.01 - x * x));
        assert!(matches!(
            boundary_step(&s, &Substrate::Flat, &p),
            Err(Error::Collapse { .. })
        ));
    }

    #[test]
    fn ale_identity_for_fixed_endpoints() {
        let g = Substrate::Groove {
            amplitude: 0.1,
            wavenumber: 2.5,
        };
        let s = DropletState::from_profile(-1.0, 1.2, 40, |x| (1.0 - x * x).max(0.0) + 0.3);
        let u = ale_rescale(&s, s.a, s.b, &g).unwrap();
        assert_eq!(&u[1..40], &s.u[1..40]);
    }

    #[test]
    fn ale_exact_for_affine_heights() {
        // ends deliberately nonzero so the whole profile is affine
        let xs = grid::nodes(0.0, 2.0, 20);
        let u = xs.iter().map(|x| 0.5 * x + 0.25).collect();
        let s = DropletState {
            a: 0.0,
            b: 2.0,
            u,
            time: 0.0,
            volume: 1.0,
        };
        let u = ale_rescale(&s, 0.1, 2.3, &Substrate::Flat).unwrap();
        let xs = grid::nodes(0.1, 2.3, 20);
        for j in 1..20 {
            assert_relative_eq!(u[j], 0.5 * xs[j] + 0.25, epsilon = 1e-13);
        }
    }

    #[test]
    fn ale_error_is_second_order_in_shift() {
        let f = |x: f64| (1.0 - x * x) * (1.0 + 0.3 * x);
        let s = DropletState::from_profile(-1.0, 1.0, 200, f);
        let err = |delta: f64| {
            let u = ale_rescale(&s, -1.0 - delta, 1.0 + 0.5 * delta, &Substrate::Flat).unwrap();
            let xs = grid::nodes(-1.0 - delta, 1.0 + 0.5 * delta, 200);
            (1..200)
                .map(|j| (u[j] - f(xs[j])).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(0.02) / err(0.01);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn capillary_step_hits_volume_exactly() {
        let p = SimParams::new(2.0, 20.0, -0.5, 0.2, 0.01, 80);
        let g = Substrate::Groove {
            amplitude: 0.1,
            wavenumber: 2.5,
        };
        let s = DropletState::from_profile(-1.0, 1.0, 80, |x| 0.4 * (1.0 - x * x));
        let target = 0.9 * s.volume;
        let (u, _) = capillary_semi_implicit(&s.u, -1.0, 1.0, target, &g, &p).unwrap();
        let v = grid::trapezoid(&u, 2.0 / 80.0);
        assert!((v - target).abs() <= 1e-12 * target);
        assert_eq!(u[0], 0.0);
        assert_eq!(u[80], 0.0);
    }

    #[test]
    fn steady_cap_is_nearly_stationary_under_capillary_step() {
        let theta = PI / 3.0;
        let p = flat_params();
        let change = |n: usize| {
            let s = DropletState::from_profile(-1.0, 1.0, n, cap(theta));
            let (u, _) =
                capillary_semi_implicit(&s.u, -1.0, 1.0, s.volume, &Substrate::Flat, &p).unwrap();
            grid::max_abs(&u.iter().zip(&s.u).map(|(x, y)| x - y).collect::<Vec<_>>())
        };
        let (c1, c2) = (change(64), change(128));
        assert!(c1 < 1e-3, "change {c1}");
        assert!(c1 / c2 > 3.0, "ratio {}", c1 / c2);
    }

    #[test]
    fn projection_of_feasible_point_is_identity() {
        let u = vec![0.0, 0.2, 0.5, 0.3, 0.0];
        let v = grid::trapezoid(&u, 0.25);
        let (out, lambda) = project_onto_obstacle(&u, 0.25, v, 1e-12).unwrap();
        assert_eq!(lambda, 0.0);
        assert_eq!(out, u);
    }

    /// Oracle: for u(x) = x on [-1, 1], the integral of max(x + l, 0) is
    /// (1 + l)^2 / 2 when l <= 1 and 2 l when l >= 1. Trapezoid on nodes
    /// hits the exact value when the kink sits on a node.
    fn ramp(n: usize) -> (Vec<f64>, f64) {
        let xs = grid::nodes(-1.0, 1.0, n);
        let mut u = xs.clone();
        u[0] = 0.0;
        u[n] = 0.0;
        (u, 2.0 / n as f64)
    }

    #[test]
    fn projection_of_ramp_closed_form() {
        // Volume 2 shifts by exactly 1 and keeps every node active.
        let (u, dx) = ramp(1000);
        // the end nodes are zero, so the trapezoid of x + 1 loses the ends
        let interior_volume = 2.0 - dx * (0.0 + 2.0) * 0.5;
        let (out, lambda) = project_onto_obstacle(&u, dx, interior_volume, 1e-13).unwrap();
        assert_relative_eq!(lambda, 1.0, epsilon = 1e-12);
        assert_relative_eq!(out[500], 1.0, epsilon = 1e-12);

        // Volume 1: continuum value sqrt(2) - 1; grid error O(dx).
        let (out, lambda) = project_onto_obstacle(&u, dx, 1.0, 1e-13).unwrap();
        assert!(
            (lambda - (2f64.sqrt() - 1.0)).abs() < 2e-3,
            "lambda {lambda}"
        );
        assert_relative_eq!(grid::trapezoid(&out, dx), 1.0, epsilon = 1e-12);
        let fine = project_onto_obstacle(&ramp(100_000).0, 2e-5, 1.0, 1e-13)
            .unwrap()
            .1;
        assert!((fine - (2f64.sqrt() - 1.0)).abs() < 2e-5, "lambda {fine}");
    }

    #[test]
    fn projection_is_idempotent() {
        let u: Vec<f64> = (0..=50).map(|j| (j as f64 * 0.37).sin() * 0.5).collect();
        let mut u = u;
        u[0] = 0.0;
        u[50] = 0.0;
        let (p1, _) = project_onto_obstacle(&u, 0.02, 0.2, 1e-12).unwrap();
        let (p2, l2) = project_onto_obstacle(&p1, 0.02, 0.2, 1e-12).unwrap();
        assert!(l2.abs() <= 1e-12);
        assert!(
            grid::max_abs(&p1.iter().zip(&p2).map(|(a, b)| a - b).collect::<Vec<_>>()) <= 1e-12
        );
    }

    #[test]
    fn projection_rejects_non_finite() {
        let u = vec![0.0, f64::NAN, 0.0];
        assert!(matches!(
            project_onto_obstacle(&u, 0.5, 1.0, 1e-12),
            Err(Error::BracketFailure(_))
        ));
    }

    #[test]
    fn equilibrium_cap_is_stationary_under_full_step() {
        let theta = PI / 3.0;
        let p = flat_params();
        let change = |n: usize| {
            let p = SimParams { n, ..p };
            let s = DropletState::from_profile(-1.0, 1.0, n, cap(theta));
            let (next, _) = full_step(&s, &Substrate::Flat, &p).unwrap();
            let u_err = grid::max_abs(
                &next
                    .u
                    .iter()
                    .zip(&s.u)
                    .map(|(x, y)| x - y)
                    .collect::<Vec<_>>(),
            );
            u_err.max((next.a - s.a).abs()).max((next.b - s.b).abs())
        };
        let (c1, c2) = (change(64), change(128));
        assert!(c1 < p.dt * 0.1, "change {c1}");
        assert!(c1 / c2 > 3.0, "ratio {}", c1 / c2);
    }

    #[test]
    fn full_step_preserves_reflection_symmetry() {
        let p = SimParams::new(2.0, 20.0, -0.5, 0.0, 0.005, 120);
        let mut s = DropletState::from_profile(-1.3, 1.3, 120, |x| {
            (-(x + 1.0) * (x + 1.0)).exp() + (-16.0 * x * x).exp() + (-(x - 1.0) * (x - 1.0)).exp()
                - 0.6
        });
        for _ in 0..20 {
            s = full_step(&s, &Substrate::Flat, &p).unwrap().0;
        }
        assert!((s.a + s.b).abs() <= 1e-12);
        for j in 0..=120 {
            assert!((s.u[j] - s.u[120 - j]).abs() <= 1e-12);
        }
    }

    #[test]
    fn zero_horizon_run_has_only_initial_record() {
        let s = DropletState::from_profile(-1.0, 1.0, 32, cap(1.0));
        let t = run_simulation(&s, &Substrate::Flat, &flat_params(), 0.0, 10).unwrap();
        assert_eq!(t.records.len(), 1);
        assert_eq!(t.snapshots.len(), 1);
    }

    #[test]
    fn run_keeps_volume_and_feasibility() {
        let p = SimParams::new(0.5, 1.0, -0.6, 0.2, 0.01, 100);
        let g = Substrate::Groove {
            amplitude: 0.05,
            wavenumber: 2.5,
        };
        let s = DropletState::from_profile(-1.0, 1.0, 100, |x| 0.5 * (1.0 - x * x));
        let t = run_simulation(&s, &g, &p, 0.5, 10).unwrap();
        assert_eq!(t.records.len(), 51);
        for r in &t.records {
            assert!((r.volume - s.volume).abs() <= 1e-10 * s.volume);
        }
    }
}
