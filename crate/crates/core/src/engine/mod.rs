//! Discrete-event core: global event queue, vehicle state machine and
//! vertiport resource arbitration.
//!
//! A run is single threaded and a pure function of (scenario, policy,
//! request list, seed). Events are ordered by time and then by insertion
//! sequence, so simultaneous events resolve the same way on every run.

mod queue;
mod state;

use std::collections::VecDeque;

use rand_distr::{Distribution, Normal};
use thiserror::Error;

pub use queue::EventQueue;
pub use state::{
    EventRecord, FlightId, FlightPurpose, FlightRecord, Place, VehicleId, VehicleRecord, VehicleState,
    VertiportState,
};

use crate::demand::{self, DemandError, DemandModel, Request, RequestId};
use crate::metrics::{CostWeights, RequestOutcome, StateTimes, TimeLedger};
use crate::network::{Network, NetworkError, VertiportId};
use crate::policies::{FleetPolicy, Policy, PolicyAction, PolicyConfig, PolicyError, ScheduledDeparture};
use crate::rng::{self, Stream, StreamRng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Demand(#[from] DemandError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("fleet of {fleet} exceeds parking capacity: vertiport {vertiport} receives {placed} vehicles but has {capacity} slots")]
    FleetExceedsCapacity { fleet: u32, vertiport: VertiportId, placed: u32, capacity: u32 },
    #[error("fleet size must be positive")]
    ZeroFleet,
    #[error("{field} must be non-negative and finite, got {value}")]
    InvalidDuration { field: &'static str, value: f64 },
    #[error("horizon must be positive, got {0}")]
    InvalidHorizon(f64),
    #[error("request {0} is out of order or malformed")]
    BadRequest(RequestId),
    #[error("policy emitted an invalid action at t={t}: {reason}")]
    InvalidAction { t: f64, reason: String },
}

/// Timing parameters shared by every vertiport and vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineParams {
    /// Nominal simulated time, minutes.
    pub horizon: f64,
    pub turnaround_mean: f64,
    pub turnaround_std: f64,
    pub takeoff_duration: f64,
    pub landing_duration: f64,
}

impl Default for EngineParams {
    fn default() -> Self {
        Self {
            horizon: 1440.0,
            turnaround_mean: 10.0,
            turnaround_std: 5.0,
            takeoff_duration: 3.0,
            landing_duration: 3.0,
        }
    }
}

/// Full experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub network: Network,
    pub fleet_size: u32,
    pub demand: DemandModel,
    pub policy: PolicyConfig,
    pub engine: EngineParams,
    pub cost_weights: CostWeights,
    pub seed: u64,
    pub replications: u32,
}

impl Scenario {
    pub fn new(network: Network, fleet_size: u32, demand: DemandModel, policy: PolicyConfig) -> Self {
        Self {
            network,
            fleet_size,
            demand,
            policy,
            engine: EngineParams::default(),
            cost_weights: CostWeights::default(),
            seed: 0,
            replications: 5,
        }
    }

    /// Vehicles per vertiport under round-robin initial placement.
    pub fn initial_placement(&self) -> Vec<u32> {
        let n = self.network.len() as u32;
        (0..n).map(|v| self.fleet_size / n + u32::from(v < self.fleet_size % n)).collect()
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.fleet_size == 0 {
            return Err(EngineError::ZeroFleet);
        }
        let e = &self.engine;
        if !(e.horizon > 0.0) || !e.horizon.is_finite() {
            return Err(EngineError::InvalidHorizon(e.horizon));
        }
        for (field, value) in [
            ("turnaround_mean", e.turnaround_mean),
            ("turnaround_std", e.turnaround_std),
            ("takeoff_duration", e.takeoff_duration),
            ("landing_duration", e.landing_duration),
        ] {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(EngineError::InvalidDuration { field, value });
            }
        }
        for (v, &placed) in self.initial_placement().iter().enumerate() {
            let capacity = self.network.vertiport(v).parking_capacity;
            if placed > capacity {
                return Err(EngineError::FleetExceedsCapacity {
                    fleet: self.fleet_size,
                    vertiport: v,
                    placed,
                    capacity,
                });
            }
        }
        self.demand.validate(self.network.len())?;
        self.policy.validate(&self.network)?;
        Ok(())
    }

    /// Samples this scenario's request stream for `seed`.
    pub fn generate_requests(&self, seed: u64) -> Result<Vec<Request>, EngineError> {
        Ok(demand::generate_requests(&self.demand, self.network.len(), self.engine.horizon, seed)?)
    }
}

/// Draws a turnaround duration from Normal(mean, std), redrawing negatives.
pub fn sample_turnaround(mean: f64, std: f64, rng: &mut StreamRng) -> f64 {
    if std <= 0.0 {
        return mean.max(0.0);
    }
    let normal = Normal::new(mean, std).expect("finite std");
    loop {
        let x = normal.sample(rng);
        if x >= 0.0 {
            return x;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Event {
    RequestArrival(RequestId),
    ScheduleSlot(usize),
    TakeoffClearance(VehicleId),
    TakeoffComplete(VehicleId),
    ArriveAirspace(VehicleId),
    LandingRetry(VertiportId),
    LandingComplete(VehicleId),
    TurnaroundComplete(VehicleId),
}

/// World state visible to policies.
pub struct World<'s> {
    scenario: &'s Scenario,
    clock: f64,
    vehicles: Vec<VehicleRecord>,
    ports: Vec<VertiportState>,
    flights: Vec<FlightRecord>,
    requests: Vec<Request>,
}

/// Read-only snapshot handed to policies.
#[derive(Clone, Copy)]
pub struct SimView<'a> {
    world: &'a World<'a>,
}

impl<'a> SimView<'a> {
    pub fn now(&self) -> f64 {
        self.world.clock
    }

    pub fn horizon(&self) -> f64 {
        self.world.scenario.engine.horizon
    }

    pub fn scenario(&self) -> &'a Scenario {
        self.world.scenario
    }

    pub fn network(&self) -> &'a Network {
        &self.world.scenario.network
    }

    pub fn n_vertiports(&self) -> usize {
        self.world.ports.len()
    }

    pub fn vehicle(&self, id: VehicleId) -> &'a VehicleRecord {
        &self.world.vehicles[id]
    }

    pub fn vertiport(&self, id: VertiportId) -> &'a VertiportState {
        &self.world.ports[id]
    }

    pub fn request(&self, id: RequestId) -> &'a Request {
        &self.world.requests[id]
    }

    /// Idle vehicles at `v`, longest-idle first.
    pub fn idle_at(&self, v: VertiportId) -> impl Iterator<Item = VehicleId> + 'a {
        self.world.ports[v].idle.iter().copied()
    }

    pub fn idle_count(&self, v: VertiportId) -> usize {
        self.world.ports[v].idle.len()
    }

    pub fn pending_at(&self, v: VertiportId) -> &'a VecDeque<RequestId> {
        &self.world.ports[v].pending_requests
    }

    pub fn occupancy(&self, v: VertiportId) -> u32 {
        self.world.ports[v].occupancy()
    }

    pub fn capacity(&self, v: VertiportId) -> u32 {
        self.world.ports[v].capacity
    }

    pub fn free_slots(&self, v: VertiportId) -> u32 {
        self.world.ports[v].free_slots()
    }
}

/// Everything a finished run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub ledger: TimeLedger,
    pub flights: Vec<FlightRecord>,
    pub requests: Vec<Request>,
    pub events: Option<Vec<EventRecord>>,
    pub schedule: Vec<ScheduledDeparture>,
}

/// One simulation run in progress.
pub struct Simulation<'s, 'p> {
    world: World<'s>,
    policy: &'p dyn Policy,
    queue: EventQueue<Event>,
    schedule: Vec<ScheduledDeparture>,
    per_vehicle: Vec<StateTimes>,
    per_vehicle_unclipped: Vec<StateTimes>,
    rebalancing: crate::metrics::FlightPhaseTimes,
    over_scheduled: crate::metrics::FlightPhaseTimes,
    outcomes: Vec<RequestOutcome>,
    schedule_slots_skipped: u64,
    events: Option<Vec<EventRecord>>,
    turnaround_rng: StreamRng,
    policy_rng: StreamRng,
}

impl<'s, 'p> Simulation<'s, 'p> {
    /// Places the fleet round-robin (vehicle k at vertiport k mod n), all
    /// idle at t = 0, and loads the request list and any schedule.
    pub fn new(scenario: &'s Scenario, policy: &'p dyn Policy, requests: Vec<Request>) -> Result<Self, EngineError> {
        scenario.validate()?;
        let net = &scenario.network;
        let n = net.len();
        for (i, r) in requests.iter().enumerate() {
            let ordered = i == 0 || requests[i - 1].t_submit <= r.t_submit;
            if r.id != i
                || !ordered
                || r.origin >= n
                || r.dest >= n
                || r.origin == r.dest
                || !(r.t_submit >= 0.0 && r.t_submit < scenario.engine.horizon)
            {
                return Err(EngineError::BadRequest(r.id));
            }
        }

        let mut ports: Vec<VertiportState> =
            net.vertiports().iter().map(|v| VertiportState::new(v.id, v.parking_capacity)).collect();
        let fleet = scenario.fleet_size as usize;
        let vehicles: Vec<VehicleRecord> = (0..fleet)
            .map(|k| {
                let v = k % n;
                ports[v].parked.insert(k);
                ports[v].idle.push_back(k);
                VehicleRecord {
                    id: k,
                    state: VehicleState::Idle,
                    location: Place::Vertiport(v),
                    state_entered_at: 0.0,
                    assigned_flight: None,
                }
            })
            .collect();

        let schedule = policy.schedule(net, &scenario.demand, scenario.engine.horizon);
        let mut queue = EventQueue::new();
        for r in &requests {
            queue.push(r.t_submit, Event::RequestArrival(r.id));
        }
        for (i, s) in schedule.iter().enumerate() {
            if s.time < scenario.engine.horizon {
                queue.push(s.time, Event::ScheduleSlot(i));
            }
        }

        let outcomes = requests
            .iter()
            .map(|r| RequestOutcome { id: r.id, t_submit: r.t_submit, t_takeoff: None, t_landed: None })
            .collect();

        Ok(Self {
            world: World { scenario, clock: 0.0, vehicles, ports, flights: Vec::new(), requests },
            policy,
            queue,
            schedule,
            per_vehicle: vec![StateTimes::default(); fleet],
            per_vehicle_unclipped: vec![StateTimes::default(); fleet],
            rebalancing: Default::default(),
            over_scheduled: Default::default(),
            outcomes,
            schedule_slots_skipped: 0,
            events: None,
            turnaround_rng: rng::stream(scenario.seed, Stream::Turnaround),
            policy_rng: rng::stream(scenario.seed, Stream::Policy),
        })
    }

    /// Records every state transition.
    pub fn with_event_log(mut self) -> Self {
        self.events = Some(Vec::new());
        self
    }

    pub fn now(&self) -> f64 {
        self.world.clock
    }

    pub fn view(&self) -> SimView<'_> {
        SimView { world: &self.world }
    }

    pub fn vehicles(&self) -> &[VehicleRecord] {
        &self.world.vehicles
    }

    pub fn vertiports(&self) -> &[VertiportState] {
        &self.world.ports
    }

    pub fn flights(&self) -> &[FlightRecord] {
        &self.world.flights
    }

    /// Processes the next event. Returns `false` once the queue is drained.
    pub fn step(&mut self) -> Result<bool, EngineError> {
        let Some((t, event)) = self.queue.pop() else {
            return Ok(false);
        };
        assert!(t >= self.world.clock, "event at {t} precedes clock {}", self.world.clock);
        self.world.clock = t;
        match event {
            Event::RequestArrival(r) => self.on_request_arrival(r)?,
            Event::ScheduleSlot(i) => self.on_schedule_slot(i)?,
            Event::TakeoffClearance(v) => self.on_takeoff_clearance(v)?,
            Event::TakeoffComplete(v) => self.on_takeoff_complete(v)?,
            Event::ArriveAirspace(v) => self.on_arrive_airspace(v)?,
            Event::LandingRetry(p) => {
                if self.world.ports[p].landing_retry_at == Some(t) {
                    self.world.ports[p].landing_retry_at = None;
                }
                self.process_landing_queue(p)?;
            }
            Event::LandingComplete(v) => self.on_landing_complete(v),
            Event::TurnaroundComplete(v) => self.on_turnaround_complete(v)?,
        }
        Ok(true)
    }

    /// Runs to completion: events past the horizon drain but trigger no
    /// new dispatches.
    pub fn run(mut self) -> Result<RunOutput, EngineError> {
        while self.step()? {}
        Ok(self.finish())
    }

    fn finish(mut self) -> RunOutput {
        let horizon = self.world.scenario.engine.horizon;
        let end_time = self.world.clock.max(horizon);
        for id in 0..self.world.vehicles.len() {
            let (state, since) = (self.world.vehicles[id].state, self.world.vehicles[id].state_entered_at);
            self.accrue(id, state, since, end_time);
            self.world.vehicles[id].state_entered_at = end_time;
        }
        let ledger = TimeLedger {
            horizon,
            fleet_size: self.world.scenario.fleet_size,
            per_vehicle: self.per_vehicle,
            per_vehicle_unclipped: self.per_vehicle_unclipped,
            rebalancing: self.rebalancing,
            over_scheduled: self.over_scheduled,
            requests: self.outcomes,
            schedule_slots: self.schedule.iter().filter(|s| s.time < horizon).count() as u64,
            schedule_slots_skipped: self.schedule_slots_skipped,
            end_time,
        };
        RunOutput {
            ledger,
            flights: self.world.flights,
            requests: self.world.requests,
            events: self.events,
            schedule: self.schedule,
        }
    }

    /// Checks resource and bookkeeping invariants; returns one message per
    /// violation.
    pub fn invariant_violations(&self) -> Vec<String> {
        let w = &self.world;
        let mut out = Vec::new();
        let mut ground = 0;
        for veh in &w.vehicles {
            match (veh.state.on_ground(), veh.location) {
                (true, Place::Vertiport(v)) => {
                    ground += 1;
                    if !w.ports[v].parked.contains(&veh.id) {
                        out.push(format!("vehicle {} on ground at {v} without a slot", veh.id));
                    }
                    let idle_listed = w.ports[v].idle.contains(&veh.id);
                    if idle_listed != (veh.state == VehicleState::Idle) {
                        out.push(format!("vehicle {} idle list mismatch at {v}", veh.id));
                    }
                }
                (false, Place::Route { .. }) => {}
                (on_ground, place) => {
                    out.push(format!("vehicle {} in {:?} (ground={on_ground}) at {place:?}", veh.id, veh.state))
                }
            }
        }
        let parked: usize = w.ports.iter().map(|p| p.parked.len()).sum();
        if parked != ground {
            out.push(format!("{parked} parked slots but {ground} ground vehicles"));
        }
        for p in &w.ports {
            if p.occupancy() > p.capacity {
                out.push(format!("vertiport {} occupancy {} > capacity {}", p.id, p.occupancy(), p.capacity));
            }
            let landing = w
                .vehicles
                .iter()
                .filter(|v| v.state == VehicleState::Landing)
                .filter(|v| matches!(v.location, Place::Route { dest, .. } if dest == p.id))
                .count() as u32;
            if landing != p.reserved_slots {
                out.push(format!("vertiport {} reserved {} but {landing} landing", p.id, p.reserved_slots));
            }
        }
        let counted: usize =
            VehicleState::ALL.iter().map(|s| w.vehicles.iter().filter(|v| v.state == *s).count()).sum();
        if counted != w.scenario.fleet_size as usize {
            out.push(format!("{counted} vehicles accounted for, fleet is {}", w.scenario.fleet_size));
        }
        out
    }

    fn accepting(&self) -> bool {
        self.world.clock < self.world.scenario.engine.horizon
    }

    fn accrue(&mut self, vehicle: VehicleId, state: VehicleState, from: f64, to: f64) {
        let horizon = self.world.scenario.engine.horizon;
        let clipped = (to.min(horizon) - from.min(horizon)).max(0.0);
        self.per_vehicle[vehicle].add(state, clipped);
        self.per_vehicle_unclipped[vehicle].add(state, to - from);
        if let Some(fid) = self.world.vehicles[vehicle].assigned_flight {
            let phases = match self.world.flights[fid].purpose {
                FlightPurpose::Revenue => None,
                FlightPurpose::Rebalance => Some(&mut self.rebalancing),
                FlightPurpose::ScheduledEmpty => Some(&mut self.over_scheduled),
            };
            if let Some(phases) = phases {
                phases.add(state, clipped);
            }
        }
    }

    fn transition(&mut self, vehicle: VehicleId, to: VehicleState, place: Place) {
        let now = self.world.clock;
        let (from, since) = {
            let v = &self.world.vehicles[vehicle];
            (v.state, v.state_entered_at)
        };
        debug_assert_eq!(from.next(), to, "illegal transition for vehicle {vehicle}");
        self.accrue(vehicle, from, since, now);
        let v = &mut self.world.vehicles[vehicle];
        v.state = to;
        v.state_entered_at = now;
        v.location = place;
        if let Some(log) = &mut self.events {
            let flight = v.assigned_flight;
            log.push(EventRecord {
                t: now,
                vehicle,
                from,
                to,
                place,
                flight,
                purpose: flight.map(|f| self.world.flights[f].purpose),
            });
        }
    }

    fn consult<F>(&mut self, hook: F) -> Result<usize, EngineError>
    where
        F: FnOnce(&dyn Policy, &SimView<'_>, &mut StreamRng) -> Vec<PolicyAction>,
    {
        if !self.accepting() {
            return Ok(0);
        }
        let actions = {
            let view = SimView { world: &self.world };
            hook(self.policy, &view, &mut self.policy_rng)
        };
        let mut dispatched = 0;
        for action in actions {
            if self.apply(action)? {
                dispatched += 1;
            }
        }
        Ok(dispatched)
    }

    fn invalid(&self, reason: String) -> EngineError {
        EngineError::InvalidAction { t: self.world.clock, reason }
    }

    fn apply(&mut self, action: PolicyAction) -> Result<bool, EngineError> {
        let (vehicle, dest, purpose, request) = match action {
            PolicyAction::NoOp => return Ok(false),
            PolicyAction::DispatchRevenue { vehicle, request } => {
                let r = *self
                    .world
                    .requests
                    .get(request)
                    .ok_or_else(|| self.invalid(format!("unknown request {request}")))?;
                (vehicle, r.dest, FlightPurpose::Revenue, Some(r))
            }
            PolicyAction::DispatchRebalance { vehicle, dest } => (vehicle, dest, FlightPurpose::Rebalance, None),
            PolicyAction::DispatchScheduledEmpty { vehicle, dest } => {
                (vehicle, dest, FlightPurpose::ScheduledEmpty, None)
            }
        };
        let veh = self
            .world
            .vehicles
            .get(vehicle)
            .ok_or_else(|| self.invalid(format!("unknown vehicle {vehicle}")))?;
        let Place::Vertiport(origin) = veh.location else {
            return Err(self.invalid(format!("vehicle {vehicle} is airborne")));
        };
        if veh.state != VehicleState::Idle {
            return Err(self.invalid(format!("vehicle {vehicle} is {:?}, not idle", veh.state)));
        }
        if !self.world.scenario.network.has_route(origin, dest) {
            return Err(self.invalid(format!("no route {origin} -> {dest}")));
        }
        if let Some(r) = request {
            if r.origin != origin {
                return Err(self.invalid(format!("request {} originates at {}, vehicle at {origin}", r.id, r.origin)));
            }
            let pending = &mut self.world.ports[origin].pending_requests;
            let pos = pending
                .iter()
                .position(|&id| id == r.id)
                .ok_or_else(|| EngineError::InvalidAction {
                    t: self.world.clock,
                    reason: format!("request {} is not pending", r.id),
                })?;
            pending.remove(pos);
        }
        self.dispatch(vehicle, origin, dest, purpose, request.map(|r| r.id));
        Ok(true)
    }

    fn dispatch(
        &mut self,
        vehicle: VehicleId,
        origin: VertiportId,
        dest: VertiportId,
        purpose: FlightPurpose,
        request: Option<RequestId>,
    ) {
        let now = self.world.clock;
        let port = &mut self.world.ports[origin];
        let pos = port.idle.iter().position(|&v| v == vehicle).expect("idle vehicle listed");
        port.idle.remove(pos);

        let fid = self.world.flights.len();
        self.world.flights.push(FlightRecord {
            id: fid,
            vehicle,
            origin,
            dest,
            purpose,
            request,
            t_request_matched: now,
            t_takeoff: None,
            t_enter_dest_airspace: None,
            t_landing_start: None,
            t_landing_done: None,
        });
        self.world.vehicles[vehicle].assigned_flight = Some(fid);
        self.transition(vehicle, VehicleState::GroundHold, Place::Vertiport(origin));
        let clearance = self.request_takeoff(origin);
        self.queue.push(clearance, Event::TakeoffClearance(vehicle));
    }

    /// Next takeoff clearance at `origin`, FCFS behind earlier departures.
    fn request_takeoff(&mut self, origin: VertiportId) -> f64 {
        let now = self.world.clock;
        let sep = self.world.scenario.network.vertiport(origin).departure_separation;
        let port = &mut self.world.ports[origin];
        let clearance = match port.last_takeoff_clearance {
            Some(last) => now.max(last + sep),
            None => now,
        };
        port.last_takeoff_clearance = Some(clearance);
        clearance
    }

    fn on_request_arrival(&mut self, r: RequestId) -> Result<(), EngineError> {
        let origin = self.world.requests[r].origin;
        self.world.ports[origin].pending_requests.push_back(r);
        self.consult(|p, view, rng| p.on_request(view, rng, r))?;
        Ok(())
    }

    fn on_schedule_slot(&mut self, i: usize) -> Result<(), EngineError> {
        let slot = self.schedule[i];
        if self.consult(|p, view, rng| p.on_schedule_slot(view, rng, &slot))? == 0 {
            self.schedule_slots_skipped += 1;
        }
        Ok(())
    }

    fn flight_of(&self, vehicle: VehicleId) -> FlightId {
        self.world.vehicles[vehicle].assigned_flight.expect("vehicle has a flight")
    }

    fn on_takeoff_clearance(&mut self, vehicle: VehicleId) -> Result<(), EngineError> {
        let now = self.world.clock;
        let fid = self.flight_of(vehicle);
        let (origin, dest, request) = {
            let f = &mut self.world.flights[fid];
            f.t_takeoff = Some(now);
            (f.origin, f.dest, f.request)
        };
        self.world.ports[origin].parked.remove(&vehicle);
        if let Some(r) = request {
            let outcome = &mut self.outcomes[r];
            debug_assert!(now >= outcome.t_submit, "negative demand delay");
            outcome.t_takeoff = Some(now);
        }
        self.transition(vehicle, VehicleState::TakingOff, Place::Route { origin, dest });
        self.queue.push(now + self.world.scenario.engine.takeoff_duration, Event::TakeoffComplete(vehicle));
        self.process_landing_queue(origin)
    }

    fn on_takeoff_complete(&mut self, vehicle: VehicleId) -> Result<(), EngineError> {
        let now = self.world.clock;
        let f = &self.world.flights[self.flight_of(vehicle)];
        let (origin, dest) = (f.origin, f.dest);
        let cruise = self.world.scenario.network.travel_time(origin, dest)?;
        self.transition(vehicle, VehicleState::EnRoute, Place::Route { origin, dest });
        self.queue.push(now + cruise, Event::ArriveAirspace(vehicle));
        Ok(())
    }

    fn on_arrive_airspace(&mut self, vehicle: VehicleId) -> Result<(), EngineError> {
        let now = self.world.clock;
        let fid = self.flight_of(vehicle);
        let (origin, dest) = {
            let f = &mut self.world.flights[fid];
            f.t_enter_dest_airspace = Some(now);
            (f.origin, f.dest)
        };
        self.transition(vehicle, VehicleState::AirHold, Place::Route { origin, dest });
        self.request_landing(fid, dest)
    }

    /// Joins the FCFS air-holding queue at `dest` and clears whoever is
    /// at its head if a slot and the approach fix are free.
    fn request_landing(&mut self, flight: FlightId, dest: VertiportId) -> Result<(), EngineError> {
        self.world.ports[dest].air_hold_queue.push_back(flight);
        self.process_landing_queue(dest)
    }

    fn process_landing_queue(&mut self, v: VertiportId) -> Result<(), EngineError> {
        let now = self.world.clock;
        let sep = self.world.scenario.network.vertiport(v).arrival_separation;
        let landing_duration = self.world.scenario.engine.landing_duration;
        let mut granted = false;
        loop {
            let port = &mut self.world.ports[v];
            let Some(&fid) = port.air_hold_queue.front() else { break };
            if port.occupancy() >= port.capacity {
                break;
            }
            if let Some(last) = port.last_landing_clearance {
                let earliest = last + sep;
                if now < earliest {
                    if port.landing_retry_at != Some(earliest) {
                        port.landing_retry_at = Some(earliest);
                        self.queue.push(earliest, Event::LandingRetry(v));
                    }
                    break;
                }
            }
            port.air_hold_queue.pop_front();
            port.reserved_slots += 1;
            port.last_landing_clearance = Some(now);
            let f = &mut self.world.flights[fid];
            f.t_landing_start = Some(now);
            let (vehicle, origin) = (f.vehicle, f.origin);
            self.transition(vehicle, VehicleState::Landing, Place::Route { origin, dest: v });
            self.queue.push(now + landing_duration, Event::LandingComplete(vehicle));
            granted = true;
        }
        if granted {
            self.consult(|p, view, rng| p.on_occupancy_increase(view, rng, v))?;
        }
        Ok(())
    }

    fn on_landing_complete(&mut self, vehicle: VehicleId) {
        let now = self.world.clock;
        let fid = self.flight_of(vehicle);
        let (dest, request) = {
            let f = &mut self.world.flights[fid];
            f.t_landing_done = Some(now);
            (f.dest, f.request)
        };
        let port = &mut self.world.ports[dest];
        port.reserved_slots -= 1;
        port.parked.insert(vehicle);
        if let Some(r) = request {
            self.outcomes[r].t_landed = Some(now);
        }
        self.transition(vehicle, VehicleState::Turnaround, Place::Vertiport(dest));
        self.world.vehicles[vehicle].assigned_flight = None;
        let e = &self.world.scenario.engine;
        let vp = self.world.scenario.network.vertiport(dest);
        let service = sample_turnaround(e.turnaround_mean, e.turnaround_std, &mut self.turnaround_rng);
        self.queue.push(now + vp.taxi_in + service + vp.taxi_out, Event::TurnaroundComplete(vehicle));
    }

    fn on_turnaround_complete(&mut self, vehicle: VehicleId) -> Result<(), EngineError> {
        let Place::Vertiport(v) = self.world.vehicles[vehicle].location else {
            unreachable!("turnaround happens on the ground")
        };
        self.transition(vehicle, VehicleState::Idle, Place::Vertiport(v));
        self.world.ports[v].idle.push_back(vehicle);
        self.consult(|p, view, rng| p.on_vehicle_ready(view, rng, vehicle))?;
        Ok(())
    }
}

/// Generates requests from the scenario's demand model and runs it under
/// the scenario's own policy.
pub fn run(scenario: &Scenario) -> Result<RunOutput, EngineError> {
    let requests = scenario.generate_requests(scenario.seed)?;
    run_with_requests(scenario, requests, false)
}

/// Runs the scenario's policy against an explicit request list.
pub fn run_with_requests(
    scenario: &Scenario,
    requests: Vec<Request>,
    event_log: bool,
) -> Result<RunOutput, EngineError> {
    let policy = FleetPolicy::new(scenario.policy.clone());
    let sim = Simulation::new(scenario, &policy, requests)?;
    let sim = if event_log { sim.with_event_log() } else { sim };
    sim.run()
}
