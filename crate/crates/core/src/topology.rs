//! Splitting and merging of droplets.
//!
//! A split fires when the coincidence set (interior nodes with `u` at the
//! obstacle) contains a run longer than `eps_split`; the run's first and
//! last nodes become new contact points and the two sides evolve as
//! independent droplets with frozen volumes. A merge fires when the gap
//! between neighbouring droplets drops below `eps_merge`.

use crate::droplet::{DropletState, SimParams};
use crate::error::{Error, Result};
use crate::grid;
use crate::par::Execution;
use crate::scheme::{self, record, snapshot, step_count, RunFailure};
use crate::substrate::Substrate;
use crate::trace::{Event, EventKind, SimulationTrace, TraceRecord};

/// Droplets sorted by position and pairwise disjoint.
#[derive(Debug, Clone, Default)]
pub struct MultiDropletState {
    pub droplets: Vec<DropletState>,
    pub events: Vec<Event>,
}

impl MultiDropletState {
    pub fn new(mut droplets: Vec<DropletState>) -> Result<Self> {
        droplets.sort_by(|p, q| p.a.total_cmp(&q.a));
        let s = Self {
            droplets,
            events: Vec::new(),
        };
        s.check_order()?;
        Ok(s)
    }

    pub fn total_volume(&self) -> f64 {
        self.droplets.iter().map(|d| d.volume).sum()
    }

    fn check_order(&self) -> Result<()> {
        for (i, p) in self.droplets.windows(2).enumerate() {
            if p[1].a < p[0].b {
                return Err(Error::Ordering {
                    left: i,
                    right: i + 1,
                    b: p[0].b,
                    a: p[1].a,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSite {
    /// First and last node of the coincidence run.
    pub first: usize,
    pub last: usize,
    pub c: f64,
    pub d: f64,
}

/// Longest interior coincidence run, if its x-extent exceeds `eps_split`.
/// Runs attached to either contact point are ignored.
pub fn detect_split(state: &DropletState, params: &SimParams) -> Option<SplitSite> {
    let n = state.n();
    let dx = state.dx();
    let mut best: Option<(usize, usize)> = None;
    let mut j = 1;
    while j < n {
        if state.u[j] > params.contact_tol {
            j += 1;
            continue;
        }
        let start = j;
        while j < n && state.u[j] <= params.contact_tol {
            j += 1;
        }
        let end = j - 1;
        let attached = start == 1 || end == n - 1;
        if !attached && best.is_none_or(|(s, e)| end - start > e - s) {
            best = Some((start, end));
        }
    }
    let (first, last) = best?;
    let extent = (last - first) as f64 * dx;
    if extent > params.eps_split {
        let xs = state.nodes();
        Some(SplitSite {
            first,
            last,
            c: xs[first],
            d: xs[last],
        })
    } else {
        None
    }
}

/// Children of a split; a side that is too small to carry its own grid
/// comes back as `None` (collapsed).
#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub left: Option<DropletState>,
    pub right: Option<DropletState>,
    /// Frozen volumes of both sides, collapsed or not.
    pub volumes: (f64, f64),
}

/// Resamples `parent` restricted to `[a, b]` onto `n` uniform intervals and
/// projects onto the target volume.
fn resample(
    parent_a: f64,
    parent_b: f64,
    parent_u: &[f64],
    a: f64,
    b: f64,
    n: usize,
    time: f64,
    volume: f64,
    params: &SimParams,
) -> Result<DropletState> {
    let xs = grid::nodes(a, b, n);
    let mut u: Vec<f64> = xs
        .iter()
        .map(|&x| grid::interpolate(parent_a, parent_b, parent_u, x))
        .collect();
    u[0] = 0.0;
    u[n] = 0.0;
    let dx = (b - a) / n as f64;
    let (u, _) = scheme::project_onto_obstacle(&u, dx, volume, params.bisect_tol)?;
    Ok(DropletState {
        a,
        b,
        u,
        time,
        volume,
    })
}

pub fn apply_split(
    state: &DropletState,
    site: SplitSite,
    params: &SimParams,
) -> Result<SplitOutcome> {
    let n = state.n();
    let dx = state.dx();
    let left_piece = grid::trapezoid(&state.u[..=site.first], dx);
    let right_piece = grid::trapezoid(&state.u[site.last..], dx);
    // scale so the children carry exactly the parent's target volume
    let scale = state.volume / (left_piece + right_piece);
    let (v_left, v_right) = (left_piece * scale, right_piece * scale);
    let min_volume = 1e-6 * state.volume;
    let child = |a: f64, b: f64, cells: usize, v: f64| -> Result<Option<DropletState>> {
        if cells < 4 || v < min_volume {
            return Ok(None);
        }
        resample(state.a, state.b, &state.u, a, b, n, state.time, v, params).map(Some)
    };
    Ok(SplitOutcome {
        left: child(state.a, site.c, site.first, v_left)?,
        right: child(site.d, state.b, n - site.last, v_right)?,
        volumes: (v_left, v_right),
    })
}

/// First adjacent pair closer than `eps_merge`.
pub fn detect_merge(multi: &MultiDropletState, params: &SimParams) -> Result<Option<usize>> {
    multi.check_order()?;
    Ok(find_close_pair(multi, params))
}

// Overlapping pairs count as close: a fast approach can jump the threshold in one step.
fn find_close_pair(multi: &MultiDropletState, params: &SimParams) -> Option<usize> {
    multi
        .droplets
        .windows(2)
        .position(|p| p[1].a - p[0].b < params.eps_merge)
}

/// Replaces droplets `i` and `i + 1` by one droplet over their union. The gap
/// is filled with `u = 0`, overlapping liquid is added, and a projection
/// restores the summed volume.
pub fn apply_merge(
    multi: &MultiDropletState,
    i: usize,
    params: &SimParams,
) -> Result<MultiDropletState> {
    let (l, r) = (&multi.droplets[i], &multi.droplets[i + 1]);
    let n = params.n;
    let (a, b) = (l.a, r.b);
    let volume = l.volume + r.volume;
    let xs = grid::nodes(a, b, n);
    let mut u: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let mut v = 0.0;
            if x >= l.a && x <= l.b {
                v += grid::interpolate(l.a, l.b, &l.u, x);
            }
            if x >= r.a && x <= r.b {
                v += grid::interpolate(r.a, r.b, &r.u, x);
            }
            v
        })
        .collect();
    u[0] = 0.0;
    u[n] = 0.0;
    let (u, _) = scheme::project_onto_obstacle(&u, (b - a) / n as f64, volume, params.bisect_tol)?;
    let merged = DropletState {
        a,
        b,
        u,
        time: l.time.max(r.time),
        volume,
    };
    let mut out = multi.clone();
    out.droplets.splice(i..=i + 1, [merged]);
    out.events.push(Event {
        kind: EventKind::Merge,
        time: merged_time(l, r),
        c: Some(l.b),
        d: Some(r.a),
        indices: vec![i, i + 1],
        volumes_before: vec![l.volume, r.volume],
        volumes_after: vec![volume],
    });
    Ok(out)
}

fn merged_time(l: &DropletState, r: &DropletState) -> f64 {
    l.time.max(r.time)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TopologyOptions {
    pub split: bool,
    pub merge: bool,
}

impl Default for TopologyOptions {
    fn default() -> Self {
        Self {
            split: true,
            merge: true,
        }
    }
}

/// Volume multipliers of the droplets that survived the step, in output order.
pub type StepLambdas = Vec<f64>;

/// Advances every droplet one step, then resolves splits, then merges.
pub fn multi_step(
    multi: &MultiDropletState,
    substrate: &Substrate,
    params: &SimParams,
    options: TopologyOptions,
    exec: Execution,
) -> Result<(MultiDropletState, StepLambdas)> {
    let results = exec.map(&multi.droplets, |d| scheme::full_step(d, substrate, params));
    let mut next = MultiDropletState {
        droplets: Vec::new(),
        events: multi.events.clone(),
    };
    let mut lambdas = Vec::new();
    for (i, (res, before)) in results.into_iter().zip(&multi.droplets).enumerate() {
        match res {
            Ok((d, report)) => {
                next.droplets.push(d);
                lambdas.push(report.lambda_volume);
            }
            Err(Error::Collapse { time, a, b }) => next.events.push(Event {
                kind: EventKind::Collapse,
                time,
                c: Some(a),
                d: Some(b),
                indices: vec![i],
                volumes_before: vec![before.volume],
                volumes_after: vec![],
            }),
            Err(e) => return Err(e),
        }
    }

    if options.split {
        let mut droplets = Vec::with_capacity(next.droplets.len() + 1);
        let mut split_lambdas = Vec::with_capacity(droplets.capacity());
        for (i, d) in next.droplets.iter().enumerate() {
            let Some(site) = detect_split(d, params) else {
                droplets.push(d.clone());
                split_lambdas.push(lambdas[i]);
                continue;
            };
            let out = apply_split(d, site, params)?;
            let mut after = Vec::new();
            let index = droplets.len();
            for child in [out.left, out.right].into_iter().flatten() {
                after.push(child.volume);
                droplets.push(child);
                split_lambdas.push(lambdas[i]);
            }
            next.events.push(Event {
                kind: if after.is_empty() {
                    EventKind::Collapse
                } else {
                    EventKind::Split
                },
                time: d.time,
                c: Some(site.c),
                d: Some(site.d),
                indices: vec![index],
                volumes_before: vec![d.volume],
                volumes_after: vec![out.volumes.0, out.volumes.1],
            });
        }
        next.droplets = droplets;
        lambdas = split_lambdas;
    }

    if options.merge {
        while let Some(i) = find_close_pair(&next, params) {
            next = apply_merge(&next, i, params)?;
            lambdas.splice(i..=i + 1, [0.0]);
        }
    }
    next.check_order()?;
    Ok((next, lambdas))
}

fn system_record(
    multi: &MultiDropletState,
    substrate: &Substrate,
    params: &SimParams,
    lambdas: &[f64],
    time: f64,
) -> Result<(TraceRecord, Vec<TraceRecord>)> {
    let per: Vec<TraceRecord> = multi
        .droplets
        .iter()
        .zip(lambdas)
        .map(|(d, &l)| record(d, substrate, params, l))
        .collect::<Result<_>>()?;
    let total = match (per.first(), per.last()) {
        (Some(f), Some(l)) => TraceRecord {
            time,
            a: f.a,
            b: l.b,
            theta_a: f.theta_a,
            theta_b: l.theta_b,
            energy: per.iter().map(|r| r.energy).sum(),
            volume: per.iter().map(|r| r.volume).sum(),
            lambda: f.lambda,
        },
        _ => TraceRecord {
            time,
            a: f64::NAN,
            b: f64::NAN,
            theta_a: f64::NAN,
            theta_b: f64::NAN,
            energy: 0.0,
            volume: 0.0,
            lambda: 0.0,
        },
    };
    Ok((total, per))
}

/// Multi-droplet run with split and merge handling.
pub fn run_multi(
    initial: Vec<DropletState>,
    substrate: &Substrate,
    params: &SimParams,
    t_final: f64,
    snapshot_stride: usize,
    options: TopologyOptions,
    exec: Execution,
) -> std::result::Result<SimulationTrace, RunFailure> {
    let mut trace = SimulationTrace::default();
    let mut multi = match MultiDropletState::new(initial) {
        Ok(m) => m,
        Err(error) => return Err(RunFailure { trace, error }),
    };
    let stride = snapshot_stride.max(1);
    let steps = step_count(t_final, params.dt);
    let mut lambdas = vec![0.0; multi.droplets.len()];
    for k in 0..=steps {
        if k > 0 {
            match multi_step(&multi, substrate, params, options, exec) {
                Ok((m, l)) => {
                    multi = m;
                    lambdas = l;
                }
                Err(error) => {
                    trace.events = multi.events;
                    return Err(RunFailure { trace, error });
                }
            }
        }
        let time = k as f64 * params.dt;
        let rows = system_record(&multi, substrate, params, &lambdas, time).and_then(|r| {
            let snap = if k % stride == 0 || k == steps {
                Some(snapshot(k, &multi.droplets, substrate)?)
            } else {
                None
            };
            Ok((r, snap))
        });
        match rows {
            Ok(((total, per), snap)) => {
                trace.records.push(total);
                trace.droplet_records.extend(per.into_iter().enumerate());
                if let Some(mut s) = snap {
                    s.time = time;
                    trace.snapshots.push(s);
                }
            }
            Err(error) => {
                trace.events = multi.events;
                return Err(RunFailure { trace, error });
            }
        }
        if multi.droplets.is_empty() {
            break;
        }
    }
    trace.events = multi.events;
    Ok(trace)
}
