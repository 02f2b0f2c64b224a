//! Drivers for the benchmark experiments: the triple-Gaussian accuracy
//! study, droplet splitting on an inclined groove, and droplet merging in
//! the teapot.

use serde::{Deserialize, Serialize};

use crate::droplet::{contact_angles, DropletState, SimParams};
use crate::error::{Error, Result};
use crate::grid;
use crate::par::Execution;
use crate::scheme::{self, full_step, step_count, RunFailure};
use crate::substrate::Substrate;
use crate::topology::{run_multi, TopologyOptions};
use crate::trace::{EventKind, SimulationTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialProfile {
    /// Shifted and clipped sum of three Gaussians on `[-b0, b0]`.
    TripleGaussian { b0: f64 },
    /// Parabola `coef (x - a0)(b0 - x)` on top of the chord of `w` between the contact points.
    TiltedParabola { coef: f64, a0: f64, b0: f64 },
}

fn triple_gaussian(x: f64) -> f64 {
    (-(x + 1.0).powi(2)).exp() + (-16.0 * x * x).exp() + (-(x - 1.0).powi(2)).exp()
}

/// Samples the initial profile on `n` intervals; the target volume is its quadrature volume.
pub fn initial_profile(
    spec: &InitialProfile,
    substrate: &Substrate,
    n: usize,
) -> Result<DropletState> {
    match *spec {
        InitialProfile::TripleGaussian { b0 } => {
            let shift = triple_gaussian(b0);
            Ok(DropletState::from_profile(-b0, b0, n, |x| {
                (2.0 * (triple_gaussian(x) - shift)).max(0.0)
            }))
        }
        InitialProfile::TiltedParabola { coef, a0, b0 } => {
            if !(a0 < b0) {
                return Err(Error::InvalidParams(format!(
                    "need a0 < b0, got {a0} >= {b0}"
                )));
            }
            let (wa, wb) = (substrate.w(a0)?, substrate.w(b0)?);
            let xs = grid::nodes(a0, b0, n);
            let w = substrate.sample(&xs)?;
            let mut u = Vec::with_capacity(n + 1);
            for (j, &x) in xs.iter().enumerate() {
                let h = coef * (x - a0) * (b0 - x) + wa + (wb - wa) * (x - a0) / (b0 - a0);
                let v = h - w[j];
                if v < -1e-12 * (1.0 + h.abs()) {
                    return Err(Error::InfeasibleInitial { x, value: v });
                }
                u.push(v.max(0.0));
            }
            u[0] = 0.0;
            u[n] = 0.0;
            let mut s = DropletState {
                a: a0,
                b: b0,
                u,
                time: 0.0,
                volume: 0.0,
            };
            s.volume = s.current_volume();
            Ok(s)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyConfig {
    pub beta: f64,
    pub kappa: f64,
    pub sigma: f64,
    #[serde(default)]
    pub theta0: f64,
    pub b0: f64,
    pub t_final: f64,
    /// Step counts of the compared runs.
    pub steps: Vec<usize>,
    /// Step count of the self-reference run.
    pub reference_steps: usize,
    /// Grid intervals per time step (`N = ratio * M`).
    pub grid_ratio: usize,
}

impl Default for AccuracyConfig {
    fn default() -> Self {
        Self {
            beta: 2.0,
            kappa: 20.0,
            sigma: -0.5,
            theta0: 0.0,
            b0: 1.3,
            t_final: 0.2,
            steps: vec![20, 40, 80, 160, 320],
            reference_steps: 1280,
            grid_ratio: 8,
        }
    }
}

impl AccuracyConfig {
    pub fn params(&self, steps: usize) -> SimParams {
        SimParams::new(
            self.beta,
            self.kappa,
            self.sigma,
            self.theta0,
            self.t_final / steps as f64,
            self.grid_ratio * steps,
        )
    }
}

/// Terminal state of one accuracy run.
#[derive(Debug, Clone)]
pub struct AccuracyRun {
    pub steps: usize,
    pub state: DropletState,
    pub theta: f64,
}

/// Runs steps 1-4 (no topology events) for `steps` uniform steps.
pub fn accuracy_run(config: &AccuracyConfig, steps: usize) -> Result<AccuracyRun> {
    let params = config.params(steps);
    params.validate()?;
    let mut state = initial_profile(
        &InitialProfile::TripleGaussian { b0: config.b0 },
        &Substrate::Flat,
        params.n,
    )?;
    for _ in 0..step_count(config.t_final, params.dt) {
        state = full_step(&state, &Substrate::Flat, &params)?.0;
    }
    let theta = contact_angles(&state, &Substrate::Flat)?.1;
    Ok(AccuracyRun {
        steps,
        state,
        theta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyRow {
    pub steps: usize,
    pub error_b: f64,
    pub order_b: Option<f64>,
    pub error_u: f64,
    pub order_u: Option<f64>,
    pub error_theta: f64,
    pub order_theta: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct AccuracyTable {
    pub reference: AccuracyRun,
    pub rows: Vec<AccuracyRow>,
}

/// Max-norm distance after interpolating `coarse` onto the reference nodes
/// inside both domains.
pub fn profile_error(coarse: &DropletState, reference: &DropletState) -> f64 {
    let (lo, hi) = (coarse.a.max(reference.a), coarse.b.min(reference.b));
    reference
        .nodes()
        .iter()
        .zip(&reference.u)
        .filter(|(x, _)| **x >= lo && **x <= hi)
        .map(|(&x, &u)| (grid::interpolate(coarse.a, coarse.b, &coarse.u, x) - u).abs())
        .fold(0.0, f64::max)
}

pub fn convergence_order(e_coarse: f64, e_fine: f64, m_coarse: usize, m_fine: usize) -> f64 {
    (e_coarse / e_fine).ln() / (m_fine as f64 / m_coarse as f64).ln()
}

/// Self-referenced accuracy study: the reference run completes first, then
/// the compared runs execute as one batch.
pub fn run_accuracy_study(config: &AccuracyConfig, exec: Execution) -> Result<AccuracyTable> {
    let reference = accuracy_run(config, config.reference_steps)?;
    let runs = exec
        .map(&config.steps, |&m| accuracy_run(config, m))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut rows: Vec<AccuracyRow> = runs
        .iter()
        .map(|r| AccuracyRow {
            steps: r.steps,
            error_b: (r.state.b - reference.state.b).abs(),
            order_b: None,
            error_u: profile_error(&r.state, &reference.state),
            order_u: None,
            error_theta: (r.theta - reference.theta).abs(),
            order_theta: None,
        })
        .collect();
    for k in 1..rows.len() {
        let (p, q) = (rows[k - 1], rows[k]);
        rows[k].order_b = Some(convergence_order(p.error_b, q.error_b, p.steps, q.steps));
        rows[k].order_u = Some(convergence_order(p.error_u, q.error_u, p.steps, q.steps));
        rows[k].order_theta = Some(convergence_order(
            p.error_theta,
            q.error_theta,
            p.steps,
            q.steps,
        ));
    }
    Ok(AccuracyTable { reference, rows })
}

impl AccuracyTable {
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "M",
            "error_b",
            "order_b",
            "error_u",
            "order_u",
            "error_theta",
            "order_theta",
        ])?;
        let opt = |o: Option<f64>| o.map_or(String::new(), |v| v.to_string());
        for r in &self.rows {
            w.write_record([
                r.steps.to_string(),
                r.error_b.to_string(),
                opt(r.order_b),
                r.error_u.to_string(),
                opt(r.order_u),
                r.error_theta.to_string(),
                opt(r.order_theta),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shared settings of the multi-droplet experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropletExperiment {
    pub params: SimParams,
    pub substrate: crate::substrate::SubstrateSpec,
    pub droplets: Vec<InitialProfile>,
    pub t_final: f64,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    #[serde(default = "default_true")]
    pub split: bool,
    #[serde(default = "default_true")]
    pub merge: bool,
}

fn default_stride() -> usize {
    10
}
fn default_true() -> bool {
    true
}

impl DropletExperiment {
    /// Groove splitting defaults.
    pub fn splitting() -> Self {
        let mut params = SimParams::new(0.1, 1.0, -0.52, 0.3, 0.005, 200);
        params.eps_split = 0.075;
        Self {
            params,
            substrate: crate::substrate::SubstrateSpec::Groove {
                amplitude: 0.1,
                k: 2.5,
            },
            droplets: vec![InitialProfile::TiltedParabola {
                coef: 0.1,
                a0: -2.1,
                b0: 3.1,
            }],
            t_final: 1.0,
            snapshot_stride: 20,
            split: true,
            merge: true,
        }
    }

    /// Teapot merging defaults; `droplets` selects the mode.
    pub fn teapot(mode: TeapotMode) -> Self {
        let mut params = SimParams::new(1.0, 20.0, -0.78, 0.226 * std::f64::consts::PI, 0.05, 1000);
        params.eps_merge = 0.01;
        let d1 = InitialProfile::TiltedParabola {
            coef: 4.5,
            a0: 1.9,
            b0: 2.2,
        };
        let d2 = InitialProfile::TiltedParabola {
            coef: 7.8,
            a0: 2.4,
            b0: 2.9,
        };
        let droplets = match mode {
            TeapotMode::Droplet1 => vec![d1],
            TeapotMode::Droplet2 => vec![d2],
            TeapotMode::Both => vec![d1, d2],
        };
        Self {
            params,
            substrate: crate::substrate::SubstrateSpec::Teapot,
            droplets,
            t_final: 12.0,
            snapshot_stride: 20,
            split: true,
            merge: true,
        }
    }

    pub fn initial_states(&self, substrate: &Substrate) -> Result<Vec<DropletState>> {
        self.droplets
            .iter()
            .map(|d| initial_profile(d, substrate, self.params.n))
            .collect()
    }

    pub fn run(&self, exec: Execution) -> Result<SimulationTrace> {
        self.run_keep_trace(exec).map_err(|f| f.error)
    }

    pub fn run_keep_trace(
        &self,
        exec: Execution,
    ) -> std::result::Result<SimulationTrace, RunFailure> {
        let prepared = self.params.validate().and_then(|_| {
            let substrate = self.substrate.build()?;
            let initial = self.initial_states(&substrate)?;
            Ok((substrate, initial))
        });
        let (substrate, initial) = match prepared {
            Ok(v) => v,
            Err(error) => {
                return Err(RunFailure {
                    trace: SimulationTrace::default(),
                    error,
                })
            }
        };
        let options = TopologyOptions {
            split: self.split,
            merge: self.merge,
        };
        if initial.len() == 1 && !self.split {
            return scheme::run_simulation(
                &initial[0],
                &substrate,
                &self.params,
                self.t_final,
                self.snapshot_stride,
            );
        }
        run_multi(
            initial,
            &substrate,
            &self.params,
            self.t_final,
            self.snapshot_stride,
            options,
            exec,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeapotMode {
    Droplet1,
    Droplet2,
    Both,
}

impl TeapotMode {
    pub const ALL: [TeapotMode; 3] = [TeapotMode::Droplet1, TeapotMode::Droplet2, TeapotMode::Both];

    pub fn name(self) -> &'static str {
        match self {
            TeapotMode::Droplet1 => "droplet1",
            TeapotMode::Droplet2 => "droplet2",
            TeapotMode::Both => "both",
        }
    }
}

/// Times of recorded events of one kind.
pub fn event_times(trace: &SimulationTrace, kind: EventKind) -> Vec<f64> {
    trace
        .events
        .iter()
        .filter(|e| e.kind == kind)
        .map(|e| e.time)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triple_gaussian_vanishes_at_ends() {
        let s = initial_profile(
            &InitialProfile::TripleGaussian { b0: 1.3 },
            &Substrate::Flat,
            64,
        )
        .unwrap();
        assert_eq!((s.a, s.b), (-1.3, 1.3));
        assert_eq!(s.u[0], 0.0);
        assert_eq!(s.u[64], 0.0);
        assert!(s.u[32] > 1.6);
        // the clip leaves dry gaps between the central and outer bumps
        let x = s.nodes();
        let gap = (0..=64).find(|&j| (x[j] - 0.5).abs() < 0.03).unwrap();
        assert_eq!(s.u[gap], 0.0);
        // the formula itself is zero at the ends, not just the clamp
        assert!((triple_gaussian(1.3) - triple_gaussian(-1.3)).abs() < 1e-15);
    }

    #[test]
    fn groove_parabola_is_feasible() {
        let g = Substrate::Groove {
            amplitude: 0.1,
            wavenumber: 2.5,
        };
        let s = initial_profile(
            &InitialProfile::TiltedParabola {
                coef: 0.1,
                a0: -2.1,
                b0: 3.1,
            },
            &g,
            200,
        )
        .unwrap();
        assert!(s.u.iter().all(|&v| v >= 0.0));
        assert!(s.volume > 0.0);
    }

    #[test]
    fn teapot_droplets_are_feasible() {
        let t = Substrate::teapot();
        for (coef, a0, b0) in [(4.5, 1.9, 2.2), (7.8, 2.4, 2.9)] {
            let s = initial_profile(&InitialProfile::TiltedParabola { coef, a0, b0 }, &t, 1000)
                .unwrap();
            assert!(s.u.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn parabola_below_substrate_is_rejected() {
        let g = Substrate::Groove {
            amplitude: 0.5,
            wavenumber: 2.5,
        };
        let err = initial_profile(
            &InitialProfile::TiltedParabola {
                coef: 0.01,
                a0: -2.1,
                b0: 3.1,
            },
            &g,
            200,
        );
        assert!(matches!(err, Err(Error::InfeasibleInitial { .. })));
    }

    #[test]
    fn orders_from_halving() {
        assert!((convergence_order(4.0, 2.0, 20, 40) - 1.0).abs() < 1e-15);
    }
}
