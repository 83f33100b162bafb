//! Random scenarios stepped one event at a time with the engine's own
//! invariant checks, followed by whole-run checks on the flight records.

use std::collections::BTreeMap;

use proptest::prelude::*;
use uam_ecosim::config::bay3;
use uam_ecosim::demand::{default_mixture, DemandModel};
use uam_ecosim::engine::{self, FlightRecord, RunOutput, Scenario, Simulation};
use uam_ecosim::policies::{FleetPolicy, PolicyConfig, PolicyKind};

#[derive(Debug, Clone)]
pub struct Setup {
    pub fleet: u32,
    pub slack: [u32; 3],
    pub kind: PolicyKind,
    pub mixture: bool,
    pub rate: f64,
    pub turnaround_std: f64,
    pub seps: [f64; 2],
    pub seed: u64,
}

pub fn setup() -> impl Strategy<Value = Setup> {
    (
        1u32..=12,
        prop::array::uniform3(0u32..4),
        prop::sample::select(PolicyKind::ALL.to_vec()),
        any::<bool>(),
        1.0..90.0f64,
        0.0..6.0f64,
        (0.0..4.0f64, 0.0..4.0f64),
        any::<u64>(),
    )
        .prop_map(|(fleet, slack, kind, mixture, rate, turnaround_std, seps, seed)| Setup {
            fleet,
            slack,
            kind,
            mixture,
            rate,
            turnaround_std,
            seps: [seps.0, seps.1],
            seed,
        })
}

pub fn scenario(s: &Setup) -> Scenario {
    let base = bay3(0);
    let mut sc = Scenario::new(
        base.clone(),
        s.fleet,
        if s.mixture { DemandModel::gaussian_mixture(s.rate, default_mixture()) } else { DemandModel::uniform(s.rate) },
        PolicyConfig::new(s.kind),
    );
    let placed = sc.initial_placement();
    let caps: Vec<u32> = placed.iter().zip(s.slack).map(|(p, k)| p + k).collect();
    let mut net = base.with_capacities(&caps);
    let mut ports = net.vertiports().to_vec();
    for p in &mut ports {
        p.arrival_separation = s.seps[0];
        p.departure_separation = s.seps[1];
    }
    net = uam_ecosim::network::Network::complete(ports, net.cruise_speed_kmh(), Default::default()).unwrap();
    sc.network = net;
    sc.engine.horizon = 360.0;
    sc.engine.turnaround_std = s.turnaround_std;
    sc.seed = s.seed;
    sc
}

fn sorted_by(flights: &[FlightRecord], key: impl Fn(&FlightRecord) -> Option<f64>) -> Vec<&FlightRecord> {
    let mut v: Vec<&FlightRecord> = flights.iter().filter(|f| key(f).is_some()).collect();
    v.sort_by(|a, b| key(a).unwrap().total_cmp(&key(b).unwrap()).then(a.id.cmp(&b.id)));
    v
}

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn stepped_run(sc: &Scenario) -> Result<RunOutput, String> {
    let policy = FleetPolicy::new(sc.policy.clone());
    let requests = sc.generate_requests(sc.seed).map_err(|e| e.to_string())?;
    let mut sim = Simulation::new(sc, &policy, requests).map_err(|e| e.to_string())?.with_event_log();
    while sim.step().map_err(|e| e.to_string())? {
        let bad = sim.invariant_violations();
        ensure!(bad.is_empty(), "t={}: {bad:?}", sim.now());
    }
    sim.run().map_err(|e| e.to_string())
}

/// Runs one setup and returns the first violated property.
pub fn check(s: &Setup) -> Result<(), String> {
    let sc = scenario(s);
    let out = stepped_run(&sc)?;
    let net = &sc.network;
    let horizon = sc.engine.horizon;

    // time partition
    for (k, st) in out.ledger.per_vehicle.iter().enumerate() {
        ensure!((st.total() - horizon).abs() < 1e-6, "vehicle {k}: {} != {horizon}", st.total());
        let unclipped = out.ledger.per_vehicle_unclipped[k].total();
        ensure!((unclipped - out.ledger.end_time).abs() < 1e-6, "vehicle {k}: unclipped {unclipped}");
    }

    // separation and FCFS landing order
    for p in 0..net.len() {
        let vp = net.vertiport(p);
        let landings = sorted_by(&out.flights, |f| if f.dest == p { f.t_landing_start } else { None });
        for w in landings.windows(2) {
            let gap = w[1].t_landing_start.unwrap() - w[0].t_landing_start.unwrap();
            ensure!(gap >= vp.arrival_separation - 1e-9, "arrival gap {gap} at {p}");
            ensure!(
                w[0].t_enter_dest_airspace.unwrap() <= w[1].t_enter_dest_airspace.unwrap(),
                "landing order at {p} is not FCFS"
            );
        }
        let takeoffs = sorted_by(&out.flights, |f| if f.origin == p { f.t_takeoff } else { None });
        for w in takeoffs.windows(2) {
            let gap = w[1].t_takeoff.unwrap() - w[0].t_takeoff.unwrap();
            ensure!(gap >= vp.departure_separation - 1e-9, "departure gap {gap} at {p}");
            ensure!(w[0].t_request_matched <= w[1].t_request_matched, "takeoff order at {p} is not FCFS");
        }
    }

    // passengers board in arrival order
    let mut last: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for f in &out.flights {
        let Some(r) = f.request else { continue };
        let key = if sc.policy.kind == PolicyKind::Scheduled { (f.origin, f.dest) } else { (f.origin, usize::MAX) };
        if let Some(&prev) = last.get(&key) {
            ensure!(prev < r, "request {r} boarded after {prev} on {key:?}");
        }
        last.insert(key, r);
    }

    let again = engine::run_with_requests(&sc, sc.generate_requests(sc.seed).unwrap(), true).unwrap();
    ensure!(again == out, "rerun differs");
    Ok(())
}
