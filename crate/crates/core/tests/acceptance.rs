//! Exit criteria. Each test writes one `criterion N: PASS|FAIL` line to
//! stderr (bypassing the test harness capture) and then asserts.

use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use dropletpvi::experiments::{event_times, run_accuracy_study, AccuracyConfig, AccuracyTable};
use dropletpvi::experiments::{initial_profile, DropletExperiment, InitialProfile, TeapotMode};
use dropletpvi::pinned::{self, convergence_study, PinnedConfig};
use dropletpvi::scheme::{full_step, project_onto_obstacle, step_count};
use dropletpvi::stability::{stability_runs, StabilityConfig};
use dropletpvi::trace::{EventKind, SimulationTrace};
use dropletpvi::{DropletState, Execution, SimParams, Substrate};

fn report(id: u32, title: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(
        std::io::stderr(),
        "criterion {id}: {verdict} {title} | {detail}"
    );
}

fn accuracy() -> &'static (AccuracyTable, Duration) {
    static CELL: OnceLock<(AccuracyTable, Duration)> = OnceLock::new();
    CELL.get_or_init(|| {
        let start = Instant::now();
        let table = run_accuracy_study(&AccuracyConfig::default(), Execution::default()).unwrap();
        (table, start.elapsed())
    })
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

#[test]
fn criterion_1_first_order_accuracy() {
    let (table, elapsed) = accuracy();
    let in_band = |o: f64| (0.85..=1.35).contains(&o);
    let rows = &table.rows;
    let mut orders = Vec::new();
    for r in &rows[1..] {
        orders.push([
            r.order_b.unwrap(),
            r.order_u.unwrap(),
            r.order_theta.unwrap(),
        ]);
    }
    let orders_ok = orders.iter().flatten().all(|&o| in_band(o));
    let eb: Vec<f64> = rows.iter().map(|r| r.error_b).collect();
    let eu: Vec<f64> = rows.iter().map(|r| r.error_u).collect();
    let et: Vec<f64> = rows.iter().map(|r| r.error_theta).collect();
    let decreasing =
        strictly_decreasing(&eb) && strictly_decreasing(&eu) && strictly_decreasing(&et);
    let fast = *elapsed < Duration::from_secs(300);
    let pass = orders_ok && decreasing && fast;
    let fmt: Vec<String> = orders
        .iter()
        .map(|o| format!("({:.3},{:.3},{:.3})", o[0], o[1], o[2]))
        .collect();
    report(
        1,
        "convergence orders of b, u, theta in [0.85, 1.35] with decreasing errors",
        pass,
        &format!(
            "orders(b,u,theta) {} decreasing={decreasing} e_b(M=20)={:.3e} runtime={:.1}s",
            fmt.join(" "),
            eb[0],
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_2_reference_endpoint_and_angle() {
    let (table, _) = accuracy();
    let b = table.reference.state.b;
    let theta = table.reference.theta;
    let (db, dt) = (
        (b - 1.238369607448268).abs(),
        (theta - 0.493880485215342).abs(),
    );
    let pass = db <= 5e-3 && dt <= 5e-3;
    report(
        2,
        "reference b(T) and contact angle within 5e-3",
        pass,
        &format!("b={b:.6} (|diff|={db:.3e}) theta={theta:.6} (|diff|={dt:.3e})"),
    );
    assert!(pass);
}

/// Droplet count at the last recorded time of a multi-droplet trace.
fn final_droplets(trace: &SimulationTrace) -> usize {
    let t = trace
        .droplet_records
        .last()
        .map(|(_, r)| r.time)
        .unwrap_or(0.0);
    trace
        .droplet_records
        .iter()
        .filter(|(_, r)| r.time == t)
        .count()
}

fn relative_drift(trace: &SimulationTrace, reference: f64) -> f64 {
    (trace.last().unwrap().volume - reference).abs() / reference
}

#[test]
fn criterion_3_groove_splitting() {
    let start = Instant::now();
    let trace = DropletExperiment::splitting()
        .run(Execution::default())
        .unwrap();
    let elapsed = start.elapsed();
    let splits = event_times(&trace, EventKind::Split);
    let v0 = trace.records[0].volume;
    let drift = relative_drift(&trace, v0);
    let count = final_droplets(&trace);
    let pass = splits.len() == 1
        && (0.02..=0.06).contains(&splits[0])
        && count == 2
        && drift <= 1e-7
        && elapsed < Duration::from_secs(60);
    report(
        3,
        "one split in [0.02, 0.06], two final droplets, volume drift <= 1e-7",
        pass,
        &format!(
            "splits at {splits:?} final droplets={count} drift={drift:.2e} runtime={:.1}s",
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

fn centroid_of_snapshot(trace: &SimulationTrace, index: usize) -> f64 {
    let s = &trace.snapshots[index];
    let (num, den) =
        s.x.iter()
            .zip(&s.u)
            .fold((0.0, 0.0), |(n, d), (x, u)| (n + x * u, d + u));
    num / den
}

#[test]
fn criterion_4_teapot_merge_and_single_droplet_motion() {
    let start = Instant::now();
    let exec = Execution::default();
    let both = DropletExperiment::teapot(TeapotMode::Both)
        .run(exec)
        .unwrap();
    let d1 = DropletExperiment::teapot(TeapotMode::Droplet1)
        .run(exec)
        .unwrap();
    let d2 = DropletExperiment::teapot(TeapotMode::Droplet2)
        .run(exec)
        .unwrap();
    let elapsed = start.elapsed();

    let merges = event_times(&both, EventKind::Merge);
    let merge_ok = merges.len() == 1 && (2.0..=4.0).contains(&merges[0]);
    let after_single = merges.first().is_some_and(|&tm| {
        both.events.iter().all(|e| e.time <= tm)
            && both
                .droplet_records
                .iter()
                .filter(|(_, r)| r.time > tm)
                .all(|(k, _)| *k == 0)
    });
    let exp = DropletExperiment::teapot(TeapotMode::Both);
    let teapot = exp.substrate.build().unwrap();
    let v_sum: f64 = exp
        .initial_states(&teapot)
        .unwrap()
        .iter()
        .map(|d| d.volume)
        .sum();
    let drift = relative_drift(&both, v_sum);

    let (first, last) = (&d1.records[0], d1.last().unwrap());
    let rise = last.a <= first.a && last.b >= first.b;
    let c0 = centroid_of_snapshot(&d2, 0);
    let c1 = centroid_of_snapshot(&d2, d2.snapshots.len() - 1);
    let downslope = c1 < c0;

    let pass = merge_ok
        && after_single
        && drift <= 1e-6
        && rise
        && downslope
        && elapsed < Duration::from_secs(120);
    report(
        4,
        "one merge in [2, 4], single droplet after with V1+V2, droplet 1 rises, droplet 2 moves down",
        pass,
        &format!(
            "merges at {merges:?} events={} single_after={after_single} drift={drift:.2e} \
             droplet1 a {:.3}->{:.3} b {:.3}->{:.3} droplet2 centroid {c0:.3}->{c1:.3} runtime={:.1}s",
            both.events.len(),
            first.a,
            last.a,
            first.b,
            last.b,
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_5_unconditional_energy_and_endpoint_bounds() {
    let config = StabilityConfig::default();
    assert_eq!(config.dts, vec![1e-1, 1e-2, 1e-3]);
    assert_eq!(config.profiles, 10);
    let reports = stability_runs(&config, Execution::default()).unwrap();
    let mut worst_endpoint = f64::INFINITY;
    let mut worst_energy = f64::INFINITY;
    let mut per_dt_ok = Vec::new();
    for &dt in &config.dts {
        let mut ok = true;
        for r in reports.iter().filter(|r| r.dt == dt) {
            let m = r.margins(config.sigma);
            worst_endpoint = worst_endpoint.min(m.endpoint);
            worst_energy = worst_energy.min(m.energy);
            ok &= m.endpoint >= 0.0 && m.energy >= 0.0;
        }
        per_dt_ok.push(ok);
    }
    let pass = reports.len() == 30 && per_dt_ok.iter().all(|&ok| ok);
    report(
        5,
        "endpoint bounds exact and arc length + dissipation bound for every dt",
        pass,
        &format!("per-dt {per_dt_ok:?} min endpoint margin={worst_endpoint:.3e} min energy margin={worst_energy:.3e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_6_projection_matches_enumeration() {
    let check = pinned::oracle::run_oracle_check(100, 0, Execution::default()).unwrap();
    let pass = check.instances == 100 && check.max_deviation <= 1e-8 && check.max_tau_spread == 0.0;
    report(
        6,
        "bisection projection equals enumerated QP to 1e-8 and ignores tau",
        pass,
        &format!(
            "instances={} max deviation={:.2e} tau spread={:.1e} max vertex inequality={:.1e}",
            check.instances, check.max_deviation, check.max_tau_spread, check.max_vertex_inequality
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_7_pinned_cauchy_ladder() {
    let cfg = PinnedConfig::default();
    assert!(cfg.rungs >= 5);
    let exec = Execution::default();
    let inactive = cfg.inactive_profile();
    let study = convergence_study(
        &cfg.problem(&inactive).unwrap(),
        &inactive,
        cfg.t_final,
        cfg.tau0,
        cfg.rungs,
        exec,
    );
    let contact = cfg.contact_profile();
    let contact_study = convergence_study(
        &cfg.problem(&contact).unwrap(),
        &contact,
        cfg.t_final,
        cfg.tau0,
        cfg.rungs,
        exec,
    );
    let (detail, pass) = match (&study, &contact_study) {
        (Ok(s), Ok(c)) => {
            let orders = s.orders();
            // inactive: no rung touches the obstacle
            let positive = s
                .profiles
                .iter()
                .all(|u| u[1..cfg.n].iter().all(|&v| v > 0.0));
            let ok = orders.iter().all(|o| (0.7..=1.3).contains(o)) && positive;
            (
                format!(
                    "inactive d={:?} orders={:?} stays positive={positive}; contact d={:?}",
                    s.differences, orders, c.differences
                ),
                ok,
            )
        }
        (s, c) => (
            format!(
                "inactive {:?} contact {:?}",
                s.as_ref().err(),
                c.as_ref().err()
            ),
            false,
        ),
    };
    report(
        7,
        "strictly decreasing rung differences, inactive order 1 +- 0.3",
        pass,
        &detail,
    );
    assert!(pass);
}

/// Runs `full_step` to `t_final` and returns the worst volume error, the
/// worst idempotence defect and whether any node went negative.
fn feasibility(
    initial: &DropletState,
    substrate: &Substrate,
    params: &SimParams,
    t_final: f64,
) -> (f64, f64, bool) {
    let mut state = initial.clone();
    let (mut vol, mut idem, mut negative) = (0.0f64, 0.0f64, false);
    for _ in 0..step_count(t_final, params.dt) {
        let (next, _) = full_step(&state, substrate, params).unwrap();
        negative |= next.u.iter().any(|&v| v < 0.0);
        vol = vol
            .max((next.current_volume() - next.volume).abs() / (params.bisect_tol * next.volume));
        let (again, _) =
            project_onto_obstacle(&next.u, next.dx(), next.volume, params.bisect_tol).unwrap();
        let d = again
            .iter()
            .zip(&next.u)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        idem = idem.max(d / (params.bisect_tol * next.volume));
        state = next;
    }
    (vol, idem, negative)
}

#[test]
fn criterion_8_per_step_feasibility() {
    let mut cases: Vec<(String, DropletState, Substrate, SimParams, f64)> = Vec::new();
    let acc = AccuracyConfig::default();
    for &m in &acc.steps {
        let params = acc.params(m);
        let s = initial_profile(
            &InitialProfile::TripleGaussian { b0: acc.b0 },
            &Substrate::Flat,
            params.n,
        )
        .unwrap();
        cases.push((
            format!("accuracy M={m}"),
            s,
            Substrate::Flat,
            params,
            acc.t_final,
        ));
    }
    let groove = DropletExperiment::splitting();
    let sub = groove.substrate.build().unwrap();
    let s = groove.initial_states(&sub).unwrap().remove(0);
    cases.push(("groove".into(), s, sub, groove.params, groove.t_final));
    for mode in [TeapotMode::Droplet1, TeapotMode::Droplet2] {
        let e = DropletExperiment::teapot(mode);
        let sub = e.substrate.build().unwrap();
        let s = e.initial_states(&sub).unwrap().remove(0);
        cases.push((
            format!("teapot {}", mode.name()),
            s,
            sub,
            e.params,
            e.t_final,
        ));
    }
    let results = Execution::default().map(&cases, |(_, s, sub, p, t)| feasibility(s, sub, p, *t));
    let mut pass = true;
    let mut worst = (0.0f64, 0.0f64);
    for ((name, ..), (vol, idem, negative)) in cases.iter().zip(&results) {
        let ok = *vol <= 1.0 && *idem <= 1.0 && !negative;
        if !ok {
            let _ = writeln!(
                std::io::stderr(),
                "  {name}: volume {vol:.2} idempotence {idem:.2} negative={negative}"
            );
        }
        pass &= ok;
        worst = (worst.0.max(*vol), worst.1.max(*idem));
    }
    report(
        8,
        "u >= 0, volume and projection idempotence within bisect_tol*V after every step",
        pass,
        &format!(
            "{} runs, worst volume error {:.2} and idempotence {:.2} in units of bisect_tol*V",
            cases.len(),
            worst.0,
            worst.1
        ),
    );
    assert!(pass);
}
