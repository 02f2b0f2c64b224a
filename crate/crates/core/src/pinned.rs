//! Pinned-contact-line obstacle problem on a fixed domain, solved by the
//! resolvent splitting `u <- J_B(J_A(u))`: `J_A` is one minimizing-movement
//! step of the capillary energy under the volume constraint and `J_B` is the
//! projection onto `{u >= 0, integral = V}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid;
use crate::par::Execution;
use crate::scheme::project_onto_obstacle;

pub const RESOLVENT_TOL: f64 = 1e-10;
pub const RESOLVENT_MAX_ITERATIONS: usize = 1000;
const PROJECTION_TOL: f64 = 1e-14;

/// Fixed domain `[a, b]` with `n` intervals, gravity `kappa`, target volume
/// taken from a feasible reference profile, and splitting step `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct PinnedProblem {
    pub a: f64,
    pub b: f64,
    pub n: usize,
    pub kappa: f64,
    pub volume: f64,
    pub tau: f64,
}

impl PinnedProblem {
    pub fn new(a: f64, b: f64, u_ref: &[f64], kappa: f64, tau: f64) -> Result<Self> {
        if u_ref.len() < 3 || !(a < b) {
            return Err(Error::InvalidParams(
                "need a < b and at least two intervals".into(),
            ));
        }
        if !(tau > 0.0) || !(kappa >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "need tau > 0 and kappa >= 0, got {tau}, {kappa}"
            )));
        }
        let n = u_ref.len() - 1;
        if u_ref[0] != 0.0 || u_ref[n] != 0.0 {
            return Err(Error::InvalidParams(
                "reference profile must vanish at both ends".into(),
            ));
        }
        if let Some(j) = u_ref.iter().position(|&v| !(v >= 0.0)) {
            return Err(Error::InfeasibleInitial {
                x: a + (b - a) * j as f64 / n as f64,
                value: u_ref[j],
            });
        }
        let volume = grid::trapezoid(u_ref, (b - a) / n as f64);
        if !(volume > 0.0) {
            return Err(Error::InvalidParams(
                "reference profile has no volume".into(),
            ));
        }
        Ok(Self {
            a,
            b,
            n,
            kappa,
            volume,
            tau,
        })
    }

    pub fn dx(&self) -> f64 {
        (self.b - self.a) / self.n as f64
    }

    pub fn with_tau(&self, tau: f64) -> Self {
        Self {
            tau,
            ..self.clone()
        }
    }
}

/// Discrete energy: polyline length plus `kappa/2 * integral of u^2`.
pub fn energy(problem: &PinnedProblem, u: &[f64]) -> f64 {
    let dx = problem.dx();
    let sq: Vec<f64> = u.iter().map(|v| v * v).collect();
    grid::polyline_length(u, dx) + 0.5 * problem.kappa * grid::trapezoid(&sq, dx)
}

/// `J_A`: solves `(v - u)/tau = d/dx(v_x / sqrt(1 + v_x^2)) - kappa v + lambda`
/// with zero ends and `integral v = V` by freezing the face weights at the
/// previous iterate.
pub fn resolvent_energy_step(u: &[f64], problem: &PinnedProblem) -> Result<Vec<f64>> {
    let n = problem.n;
    if u.len() != n + 1 {
        return Err(Error::InvalidParams(format!(
            "expected {} samples, got {}",
            n + 1,
            u.len()
        )));
    }
    let dx = problem.dx();
    let m = n - 1;
    let mut it = u.to_vec();
    it[0] = 0.0;
    it[n] = 0.0;
    let mut change = f64::INFINITY;
    for _ in 0..RESOLVENT_MAX_ITERATIONS {
        let c: Vec<f64> = it
            .windows(2)
            .map(|w| 1.0 / (1.0 + ((w[1] - w[0]) / dx).powi(2)).sqrt())
            .collect();
        let (mut lower, mut diag, mut upper) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
        for i in 0..m {
            let (cl, cr) = (c[i] / (dx * dx), c[i + 1] / (dx * dx));
            lower[i] = -cl;
            upper[i] = -cr;
            diag[i] = 1.0 / problem.tau + problem.kappa + cl + cr;
        }
        let rhs: Vec<f64> = (1..n).map(|j| u[j] / problem.tau).collect();
        let particular = grid::solve_tridiagonal(&lower, &diag, &upper, &rhs);
        let response = grid::solve_tridiagonal(&lower, &diag, &upper, &vec![1.0; m]);
        let resp_vol = dx * response.iter().sum::<f64>();
        if !(resp_vol > 1e-14) {
            return Err(Error::SingularConstraint(resp_vol));
        }
        let lambda = (problem.volume - dx * particular.iter().sum::<f64>()) / resp_vol;
        let mut next = vec![0.0; n + 1];
        for i in 0..m {
            next[i + 1] = particular[i] + lambda * response[i];
        }
        change = next
            .iter()
            .zip(&it)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max);
        it = next;
        if !change.is_finite() {
            break;
        }
        if change <= RESOLVENT_TOL {
            return Ok(it);
        }
    }
    Err(Error::Resolvent { change })
}

/// `J_B`: projection onto the feasible set; it does not depend on `tau`.
pub fn projection_resolvent(u_tilde: &[f64], problem: &PinnedProblem) -> Result<Vec<f64>> {
    Ok(project_onto_obstacle(u_tilde, problem.dx(), problem.volume, PROJECTION_TOL)?.0)
}

pub fn composite_step(u: &[f64], problem: &PinnedProblem) -> Result<Vec<f64>> {
    projection_resolvent(&resolvent_energy_step(u, problem)?, problem)
}

/// Number of composite steps contained in `[0, T]` (piecewise-constant interpolation).
pub fn pinned_step_count(t_final: f64, tau: f64) -> usize {
    (t_final / tau + 1e-9).floor().max(0.0) as usize
}

pub fn splitting_evolve(problem: &PinnedProblem, u0: &[f64], t_final: f64) -> Result<Vec<f64>> {
    let mut u = u0.to_vec();
    for _ in 0..pinned_step_count(t_final, problem.tau) {
        u = composite_step(&u, problem)?;
    }
    Ok(u)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub taus: Vec<f64>,
    pub profiles: Vec<Vec<f64>>,
    /// Sup-norm distances between successive rungs.
    pub differences: Vec<f64>,
}

impl ConvergenceStudy {
    /// `log2(d_j / d_{j+1})` for successive differences.
    pub fn orders(&self) -> Vec<f64> {
        self.differences
            .windows(2)
            .map(|d| (d[0] / d[1]).log2())
            .collect()
    }

    pub fn is_strictly_decreasing(&self) -> bool {
        self.differences.windows(2).all(|d| d[1] < d[0])
    }

    /// Rows `tau,d` where `d` pairs rung `j` with rung `j + 1`.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["tau", "d"])?;
        for (tau, d) in self.taus.iter().zip(&self.differences) {
            w.write_record([tau.to_string(), d.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs the ladder `tau0, tau0/2, ...` and requires strictly decreasing
/// successive differences.
pub fn convergence_study(
    problem: &PinnedProblem,
    u0: &[f64],
    t_final: f64,
    tau0: f64,
    rungs: usize,
    exec: Execution,
) -> Result<ConvergenceStudy> {
    if rungs < 4 {
        return Err(Error::InvalidParams(format!(
            "a convergence study needs at least 4 rungs, got {rungs}"
        )));
    }
    let taus: Vec<f64> = (0..rungs).map(|j| tau0 / 2f64.powi(j as i32)).collect();
    let profiles = exec
        .map(&taus, |&tau| {
            splitting_evolve(&problem.with_tau(tau), u0, t_final)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let differences: Vec<f64> = profiles
        .windows(2)
        .map(|p| {
            p[0].iter()
                .zip(&p[1])
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let study = ConvergenceStudy {
        taus,
        profiles,
        differences,
    };
    if !study.is_strictly_decreasing() {
        return Err(Error::ConvergenceFailure(format!(
            "successive differences not strictly decreasing: {:?}",
            study.differences
        )));
    }
    Ok(study)
}

pub mod oracle {
    //! Exhaustive active-set solution of
    //! `min |u - u~|^2  s.t.  u >= 0, dx * sum(u) = V` on small grids.

    use rand::{Rng, SeedableRng};
    use serde::{Deserialize, Serialize};

    use crate::error::Result;
    use crate::par::Execution;
    use crate::scheme::project_onto_obstacle;

    /// Largest number of interior nodes the enumeration accepts.
    pub const MAX_INTERIOR: usize = 14;

    /// Minimizer over all free sets; `None` when the grid is too large or the
    /// problem is infeasible. End nodes are held at zero.
    pub fn qp_projection(u_tilde: &[f64], dx: f64, volume: f64) -> Option<Vec<f64>> {
        let n = u_tilde.len().checked_sub(1)?;
        let m = n.checked_sub(1)?;
        if m == 0 || m > MAX_INTERIOR || volume <= 0.0 {
            return None;
        }
        let inner = &u_tilde[1..n];
        let mut best: Option<(f64, Vec<f64>)> = None;
        for mask in 1u32..(1u32 << m) {
            let free: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
            let shift =
                (volume / dx - free.iter().map(|&i| inner[i]).sum::<f64>()) / free.len() as f64;
            let mut u = vec![0.0; m];
            let mut feasible = true;
            for &i in &free {
                u[i] = inner[i] + shift;
                if u[i] < 0.0 {
                    feasible = false;
                    break;
                }
            }
            if !feasible {
                continue;
            }
            let obj: f64 = u.iter().zip(inner).map(|(a, b)| (a - b).powi(2)).sum();
            if best.as_ref().is_none_or(|(o, _)| obj < *o) {
                best = Some((obj, u));
            }
        }
        best.map(|(_, u)| {
            let mut out = vec![0.0; n + 1];
            out[1..n].copy_from_slice(&u);
            out
        })
    }

    /// Largest value of `<u~ - u, phi - u>` over the vertices `phi = V/dx e_j`
    /// of the feasible set (nonpositive for the exact projection).
    pub fn vertex_inequality(u_tilde: &[f64], u: &[f64], dx: f64, volume: f64) -> f64 {
        let n = u.len() - 1;
        (1..n)
            .map(|j| {
                (1..n)
                    .map(|i| {
                        let phi = if i == j { volume / dx } else { 0.0 };
                        (u_tilde[i] - u[i]) * (phi - u[i]) * dx
                    })
                    .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
    pub struct OracleCheck {
        pub instances: usize,
        /// Max-norm distance between bisection and enumeration.
        pub max_deviation: f64,
        /// Max-norm spread of the projection across tau in {1e-3, 1, 1e3}.
        pub max_tau_spread: f64,
        /// Largest vertex inequality value.
        pub max_vertex_inequality: f64,
    }

    /// Random instance: 3..=16 nodes, values in `[-1, 2]`, zero ends, volume in `[0.05, 1]`.
    pub fn random_instance<R: Rng>(rng: &mut R) -> (Vec<f64>, f64, f64) {
        let nodes = rng.gen_range(3..=16usize);
        let n = nodes - 1;
        let mut u: Vec<f64> = (0..=n).map(|_| rng.gen_range(-1.0..2.0)).collect();
        u[0] = 0.0;
        u[n] = 0.0;
        let dx = 1.0 / n as f64;
        let volume = rng.gen_range(0.05..1.0);
        (u, dx, volume)
    }

    pub fn run_oracle_check(instances: usize, seed: u64, exec: Execution) -> Result<OracleCheck> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let cases: Vec<_> = (0..instances).map(|_| random_instance(&mut rng)).collect();
        let rows = exec
            .map(&cases, |(u, dx, volume)| -> Result<(f64, f64, f64)> {
                let problem = |tau: f64| super::PinnedProblem {
                    a: 0.0,
                    b: dx * (u.len() - 1) as f64,
                    n: u.len() - 1,
                    kappa: 0.0,
                    volume: *volume,
                    tau,
                };
                let p = super::projection_resolvent(u, &problem(1.0))?;
                let exact = qp_projection(u, *dx, *volume).ok_or_else(|| {
                    crate::Error::InvalidParams("oracle instance too large".into())
                })?;
                let dev = p
                    .iter()
                    .zip(&exact)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                let mut spread: f64 = 0.0;
                for tau in [1e-3, 1e3] {
                    let q = super::projection_resolvent(u, &problem(tau))?;
                    spread = spread.max(
                        q.iter()
                            .zip(&p)
                            .map(|(a, b)| (a - b).abs())
                            .fold(0.0, f64::max),
                    );
                }
                let vi = vertex_inequality(u, &p, *dx, *volume);
                Ok((dev, spread, vi))
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let max_of = |f: fn(&(f64, f64, f64)) -> f64| rows.iter().map(f).fold(0.0, f64::max);
        Ok(OracleCheck {
            instances,
            max_deviation: max_of(|r| r.0),
            max_tau_spread: max_of(|r| r.1),
            max_vertex_inequality: rows.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max),
        })
    }

    /// Keeps the bisection path visible to callers comparing against the oracle.
    pub fn bisection_projection(
        u_tilde: &[f64],
        dx: f64,
        volume: f64,
        tol: f64,
    ) -> Result<Vec<f64>> {
        Ok(project_onto_obstacle(u_tilde, dx, volume, tol)?.0)
    }
}

/// Settings of the pinned experiment: convergence ladders with and without
/// obstacle contact, plus the projection oracle check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinnedConfig {
    pub a: f64,
    pub b: f64,
    pub n: usize,
    pub kappa: f64,
    pub t_final: f64,
    pub tau0: f64,
    pub rungs: usize,
    pub oracle_instances: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for PinnedConfig {
    fn default() -> Self {
        Self {
            a: -1.0,
            b: 1.0,
            n: 64,
            kappa: 1.0,
            t_final: 0.2,
            tau0: 0.05,
            rungs: 5,
            oracle_instances: 100,
            seed: 0,
        }
    }
}

impl PinnedConfig {
    /// Smooth bump `0.5 (1 - x^2)(1 + 0.3 x)` mapped onto `[a, b]`, positive inside.
    pub fn inactive_profile(&self) -> Vec<f64> {
        let xs = grid::nodes(self.a, self.b, self.n);
        let (c, h) = (0.5 * (self.a + self.b), 0.5 * (self.b - self.a));
        let mut u: Vec<f64> = xs
            .iter()
            .map(|x| {
                let z = (x - c) / h;
                0.5 * (1.0 - z * z) * (1.0 + 0.3 * z)
            })
            .collect();
        u[0] = 0.0;
        u[self.n] = 0.0;
        u
    }

    /// Two bumps separated by a dry gap, so the obstacle is active.
    pub fn contact_profile(&self) -> Vec<f64> {
        let xs = grid::nodes(self.a, self.b, self.n);
        let (c, h) = (0.5 * (self.a + self.b), 0.5 * (self.b - self.a));
        let mut u: Vec<f64> = xs
            .iter()
            .map(|x| {
                let z = (x - c) / h;
                (0.6 * (2.0 * std::f64::consts::PI * z).sin().abs() - 0.1).max(0.0) * (1.0 - z * z)
            })
            .collect();
        u[0] = 0.0;
        u[self.n] = 0.0;
        u
    }

    pub fn problem(&self, u_ref: &[f64]) -> Result<PinnedProblem> {
        PinnedProblem::new(self.a, self.b, u_ref, self.kappa, self.tau0)
    }
}
