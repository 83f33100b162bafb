//! Small instances checked against a brute-force chronological simulator
//! written from the model rules alone. It scans a flat timer list for the
//! earliest entry instead of using the engine's queue and keeps plain
//! counters instead of slot sets. Route lengths come from the network so
//! both sides add identical floating-point durations.

use std::collections::VecDeque;

use proptest::prelude::*;
use uam_ecosim::demand::{DemandModel, Request};
use uam_ecosim::engine::{self, EventRecord, FlightPurpose, Place, Scenario, VehicleState};
use uam_ecosim::network::{Network, RangeBounds, Vertiport};
use uam_ecosim::policies::{PolicyConfig, PolicyKind};

const SITES: [(&str, f64, f64); 3] =
    [("SFO", 37.6213, -122.3790), ("OAK", 37.7126, -122.2197), ("SJC", 37.3639, -121.9289)];

#[derive(Debug, Clone, Copy, PartialEq)]
enum Timer {
    Request(usize),
    Clearance(usize),
    TakeoffDone(usize),
    Arrive(usize),
    Retry(usize),
    LandingDone(usize),
    TurnaroundDone(usize),
}

#[derive(Debug, Clone, Copy)]
struct Trip {
    origin: usize,
    dest: usize,
    purpose: FlightPurpose,
}

#[derive(Debug, Clone)]
struct Car {
    state: VehicleState,
    at: Option<usize>,
    trip: Option<Trip>,
}

#[derive(Debug, Clone, Default)]
struct Pad {
    capacity: u32,
    parked: u32,
    reserved: u32,
    idle: VecDeque<usize>,
    waiting: VecDeque<usize>,
    stack: VecDeque<usize>,
    last_landing: Option<f64>,
    last_takeoff: Option<f64>,
    retry_at: Option<f64>,
}

/// Log line: time, vehicle, from, to, place, purpose.
pub type Line = (f64, usize, VehicleState, VehicleState, Place, Option<FlightPurpose>);

pub struct Oracle<'a> {
    sc: &'a Scenario,
    reqs: &'a [Request],
    now: f64,
    seq: u64,
    timers: Vec<(f64, u64, Timer)>,
    cars: Vec<Car>,
    pads: Vec<Pad>,
    log: Vec<Line>,
}

pub fn haversine(a: usize, b: usize) -> f64 {
    let (la1, lo1) = (SITES[a].1.to_radians(), SITES[a].2.to_radians());
    let (la2, lo2) = (SITES[b].1.to_radians(), SITES[b].2.to_radians());
    let h = ((la2 - la1) / 2.0).sin().powi(2) + la1.cos() * la2.cos() * ((lo2 - lo1) / 2.0).sin().powi(2);
    2.0 * 6371.0 * h.sqrt().asin()
}

impl<'a> Oracle<'a> {
    pub fn new(sc: &'a Scenario, reqs: &'a [Request]) -> Self {
        let n = sc.network.len();
        let mut pads: Vec<Pad> = (0..n)
            .map(|v| Pad { capacity: sc.network.vertiport(v).parking_capacity, ..Pad::default() })
            .collect();
        let cars = (0..sc.fleet_size as usize)
            .map(|k| {
                pads[k % n].parked += 1;
                pads[k % n].idle.push_back(k);
                Car { state: VehicleState::Idle, at: Some(k % n), trip: None }
            })
            .collect();
        let mut o = Oracle { sc, reqs, now: 0.0, seq: 0, timers: Vec::new(), cars, pads, log: Vec::new() };
        for r in reqs {
            o.set(r.t_submit, Timer::Request(r.id));
        }
        o
    }

    fn set(&mut self, t: f64, what: Timer) {
        self.timers.push((t, self.seq, what));
        self.seq += 1;
    }

    fn rebalancing(&self) -> bool {
        self.sc.policy.kind == PolicyKind::OnDemandRebalance
    }

    fn go(&mut self, car: usize, to: VehicleState) {
        let c = &self.cars[car];
        let place = match (to, c.trip) {
            (VehicleState::GroundHold | VehicleState::Turnaround | VehicleState::Idle, _) => {
                Place::Vertiport(c.at.unwrap())
            }
            (_, Some(t)) => Place::Route { origin: t.origin, dest: t.dest },
            _ => unreachable!(),
        };
        self.log.push((self.now, car, c.state, to, place, c.trip.map(|t| t.purpose)));
        self.cars[car].state = to;
    }

    pub fn run(mut self) -> Vec<Line> {
        while !self.timers.is_empty() {
            let mut k = 0;
            for i in 1..self.timers.len() {
                let (a, b) = (self.timers[i], self.timers[k]);
                if a.0 < b.0 || (a.0 == b.0 && a.1 < b.1) {
                    k = i;
                }
            }
            let (t, _, what) = self.timers.swap_remove(k);
            self.now = t;
            match what {
                Timer::Request(r) => {
                    let o = self.reqs[r].origin;
                    self.pads[o].waiting.push_back(r);
                    if self.open() {
                        self.serve(o);
                        if self.rebalancing() {
                            self.pull_toward(o);
                        }
                    }
                }
                Timer::Clearance(car) => {
                    let trip = self.cars[car].trip.unwrap();
                    self.pads[trip.origin].parked -= 1;
                    self.cars[car].at = None;
                    self.go(car, VehicleState::TakingOff);
                    let d = self.sc.engine.takeoff_duration;
                    self.set(t + d, Timer::TakeoffDone(car));
                    self.land(trip.origin);
                }
                Timer::TakeoffDone(car) => {
                    let trip = self.cars[car].trip.unwrap();
                    self.go(car, VehicleState::EnRoute);
                    let cruise = self.sc.network.travel_time(trip.origin, trip.dest).unwrap();
                    self.set(t + cruise, Timer::Arrive(car));
                }
                Timer::Arrive(car) => {
                    let dest = self.cars[car].trip.unwrap().dest;
                    self.go(car, VehicleState::AirHold);
                    self.pads[dest].stack.push_back(car);
                    self.land(dest);
                }
                Timer::Retry(p) => {
                    if self.pads[p].retry_at == Some(t) {
                        self.pads[p].retry_at = None;
                    }
                    self.land(p);
                }
                Timer::LandingDone(car) => {
                    let dest = self.cars[car].trip.unwrap().dest;
                    self.pads[dest].reserved -= 1;
                    self.pads[dest].parked += 1;
                    self.cars[car].at = Some(dest);
                    self.go(car, VehicleState::Turnaround);
                    self.cars[car].trip = None;
                    let vp = self.sc.network.vertiport(dest);
                    let d = vp.taxi_in + self.sc.engine.turnaround_mean + vp.taxi_out;
                    self.set(t + d, Timer::TurnaroundDone(car));
                }
                Timer::TurnaroundDone(car) => {
                    let v = self.cars[car].at.unwrap();
                    self.go(car, VehicleState::Idle);
                    self.pads[v].idle.push_back(car);
                    if self.open() {
                        self.serve(v);
                        if self.rebalancing() {
                            self.push_away(v);
                        }
                    }
                }
            }
        }
        self.log
    }

    fn open(&self) -> bool {
        self.now < self.sc.engine.horizon
    }

    fn serve(&mut self, v: usize) {
        while !self.pads[v].idle.is_empty() && !self.pads[v].waiting.is_empty() {
            let car = self.pads[v].idle[0];
            let r = self.pads[v].waiting.pop_front().unwrap();
            self.depart(car, self.reqs[r].dest, FlightPurpose::Revenue);
        }
    }

    fn pull_toward(&mut self, v: usize) {
        let theta = self.sc.policy.demand_lookahead as usize;
        if self.pads[v].idle.len() >= theta || self.pads[v].waiting.is_empty() {
            return;
        }
        let mut best: Option<usize> = None;
        for u in 0..self.pads.len() {
            if u == v || self.pads[u].idle.is_empty() {
                continue;
            }
            best = match best {
                None => Some(u),
                Some(b) => {
                    let (du, db) = (haversine(u, v), haversine(b, v));
                    let better = du < db || (du == db && self.pads[u].idle.len() > self.pads[b].idle.len());
                    Some(if better { u } else { b })
                }
            };
        }
        if let Some(u) = best {
            let car = self.pads[u].idle[0];
            self.depart(car, v, FlightPurpose::Rebalance);
        }
    }

    fn push_away(&mut self, v: usize) {
        let theta = self.sc.policy.space_lookahead;
        let p = &self.pads[v];
        if p.parked + p.reserved < p.capacity.saturating_sub(theta) || p.idle.is_empty() {
            return;
        }
        let mut best: Option<(usize, u32)> = None;
        for u in 0..self.pads.len() {
            let q = &self.pads[u];
            let free = q.capacity - q.parked - q.reserved;
            if u != v && free > theta && best.is_none_or(|(_, f)| free > f) {
                best = Some((u, free));
            }
        }
        if let Some((u, _)) = best {
            let car = self.pads[v].idle[0];
            self.depart(car, u, FlightPurpose::Rebalance);
        }
    }

    fn depart(&mut self, car: usize, dest: usize, purpose: FlightPurpose) {
        let origin = self.cars[car].at.unwrap();
        self.pads[origin].idle.retain(|&c| c != car);
        self.cars[car].trip = Some(Trip { origin, dest, purpose });
        self.go(car, VehicleState::GroundHold);
        let sep = self.sc.network.vertiport(origin).departure_separation;
        let pad = &mut self.pads[origin];
        let at = pad.last_takeoff.map_or(self.now, |last| self.now.max(last + sep));
        pad.last_takeoff = Some(at);
        self.set(at, Timer::Clearance(car));
    }

    fn land(&mut self, v: usize) {
        let sep = self.sc.network.vertiport(v).arrival_separation;
        let mut any = false;
        loop {
            let p = &self.pads[v];
            let Some(&car) = p.stack.front() else { break };
            if p.parked + p.reserved >= p.capacity {
                break;
            }
            if let Some(last) = p.last_landing {
                if self.now < last + sep {
                    if p.retry_at != Some(last + sep) {
                        self.pads[v].retry_at = Some(last + sep);
                        self.set(last + sep, Timer::Retry(v));
                    }
                    break;
                }
            }
            let p = &mut self.pads[v];
            p.stack.pop_front();
            p.reserved += 1;
            p.last_landing = Some(self.now);
            self.go(car, VehicleState::Landing);
            let d = self.sc.engine.landing_duration;
            self.set(self.now + d, Timer::LandingDone(car));
            any = true;
        }
        if any && self.open() && self.rebalancing() {
            self.push_away(v);
        }
    }
}

#[derive(Debug, Clone)]
pub struct Case {
    pub fleet: u32,
    pub capacities: [u32; 3],
    pub arrival_sep: [f64; 3],
    pub departure_sep: [f64; 3],
    pub takeoff: f64,
    pub landing: f64,
    pub turnaround: f64,
    pub rebalance: bool,
    pub space_lookahead: u32,
    pub demand_lookahead: u32,
    pub requests: Vec<(f64, usize, usize)>,
}

pub fn case() -> impl Strategy<Value = Case> {
    let request = (0.0..90.0f64, 0usize..3, 1usize..3).prop_map(|(t, o, k)| (t, o, (o + k) % 3));
    (
        1u32..=3,
        prop::array::uniform3(0u32..3),
        prop::array::uniform3(0.0..6.0f64),
        prop::array::uniform3(0.0..6.0f64),
        (0.5..4.0f64, 0.5..4.0f64, 0.0..15.0f64),
        any::<bool>(),
        (0u32..3, 1u32..3),
        prop::collection::vec(request, 0..=5),
    )
        .prop_map(|(fleet, extra, arrival_sep, departure_sep, (takeoff, landing, turnaround), rebalance, (ts, td), mut requests)| {
            requests.sort_by(|a, b| a.0.total_cmp(&b.0));
            // Room for the round-robin placement plus a little slack.
            let capacities = [0, 1, 2].map(|v| u32::from((v as u32) < fleet) + extra[v]);
            Case {
                fleet,
                capacities,
                arrival_sep,
                departure_sep,
                takeoff,
                landing,
                turnaround,
                rebalance,
                space_lookahead: ts,
                demand_lookahead: td,
                requests,
            }
        })
}

pub fn build(c: &Case) -> (Scenario, Vec<Request>) {
    let vertiports = (0..3)
        .map(|i| {
            let mut v = Vertiport::new(i, SITES[i].0, SITES[i].1, SITES[i].2);
            v.parking_capacity = c.capacities[i];
            v.arrival_separation = c.arrival_sep[i];
            v.departure_separation = c.departure_sep[i];
            v
        })
        .collect();
    let net = Network::complete(vertiports, 140.0, RangeBounds::default()).unwrap();
    let kind = if c.rebalance { PolicyKind::OnDemandRebalance } else { PolicyKind::OnDemand };
    let mut policy = PolicyConfig::new(kind);
    policy.space_lookahead = c.space_lookahead;
    policy.demand_lookahead = c.demand_lookahead;
    let mut sc = Scenario::new(net, c.fleet, DemandModel::uniform(0.0), policy);
    sc.engine.horizon = 120.0;
    sc.engine.turnaround_std = 0.0;
    sc.engine.turnaround_mean = c.turnaround;
    sc.engine.takeoff_duration = c.takeoff;
    sc.engine.landing_duration = c.landing;
    let requests = c
        .requests
        .iter()
        .enumerate()
        .map(|(id, &(t_submit, origin, dest))| Request { id, t_submit, origin, dest })
        .collect();
    (sc, requests)
}

pub fn engine_log(events: &[EventRecord]) -> Vec<Line> {
    events.iter().map(|e| (e.t, e.vehicle, e.from, e.to, e.place, e.purpose)).collect()
}

/// First mismatch between two logs, if any.
pub fn first_difference(expected: &[Line], got: &[Line]) -> Option<String> {
    for (i, (a, b)) in expected.iter().zip(got).enumerate() {
        if a != b {
            return Some(format!("line {i}: oracle {a:?}, engine {b:?}"));
        }
    }
    (expected.len() != got.len()).then(|| format!("oracle has {} lines, engine {}", expected.len(), got.len()))
}

/// Runs one case through both simulators.
pub fn compare(c: &Case) -> Option<String> {
    let (sc, requests) = build(c);
    let expected = Oracle::new(&sc, &requests).run();
    let out = engine::run_with_requests(&sc, requests, true).expect("engine run");
    first_difference(&expected, &engine_log(out.events.as_ref().expect("event log")))
}

pub fn assert_same(expected: &[Line], got: &[Line]) {
    assert_eq!(expected.len(), got.len(), "log lengths differ\noracle: {expected:#?}\nengine: {got:#?}");
    for (i, (a, b)) in expected.iter().zip(got).enumerate() {
        let same = a.0 == b.0 && (a.1, a.2, a.3, a.4, a.5) == (b.1, b.2, b.3, b.4, b.5);
        let lo = i.saturating_sub(4);
        assert!(same, "line {i} differs\noracle: {:?}\nengine: {:?}", &expected[lo..=i], &got[lo..=i]);
    }
}

