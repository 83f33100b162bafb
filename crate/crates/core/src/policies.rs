//! Fleet-management policies.
//!
//! A policy sees a read-only [`SimView`] and returns actions; the engine
//! validates and applies them. Within one hook call a vehicle that has
//! already been given a flight is invisible to later triggers.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demand::{DemandModel, RequestId};
use crate::engine::{SimView, VehicleId};
use crate::network::{Network, VertiportId};
use crate::rng::StreamRng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("demand_lookahead must be at least 1")]
    ZeroDemandLookahead,
    #[error("headway for {origin} -> {dest} must be positive, got {headway}")]
    InvalidHeadway { origin: VertiportId, dest: VertiportId, headway: f64 },
    #[error("headway given for missing route {origin} -> {dest}")]
    UnknownRoute { origin: VertiportId, dest: VertiportId },
    #[error("unknown policy '{0}' (expected on-demand, on-demand-rebalance or scheduled)")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    OnDemand,
    OnDemandRebalance,
    Scheduled,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::OnDemand, PolicyKind::OnDemandRebalance, PolicyKind::Scheduled];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::OnDemand => "on-demand",
            PolicyKind::OnDemandRebalance => "on-demand-rebalance",
            PolicyKind::Scheduled => "scheduled",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "on-demand" | "ondemand" => Ok(PolicyKind::OnDemand),
            "on-demand-rebalance" | "rebalance" => Ok(PolicyKind::OnDemandRebalance),
            "scheduled" => Ok(PolicyKind::Scheduled),
            _ => Err(PolicyError::UnknownKind(s.to_string())),
        }
    }
}

/// Explicit headway for one directed route, minutes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteHeadway {
    pub origin: VertiportId,
    pub dest: VertiportId,
    pub headway: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// Free-slot buffer θ_s; 0 triggers only when a vertiport is full.
    pub space_lookahead: u32,
    /// Idle-vehicle floor θ_d; 1 triggers only when no vehicle idles.
    pub demand_lookahead: u32,
    pub space_driven: bool,
    pub demand_driven: bool,
    /// Overrides the demand-derived headway on the listed routes.
    pub schedule_headways: Vec<RouteHeadway>,
}

impl PolicyConfig {
    pub fn new(kind: PolicyKind) -> Self {
        Self {
            kind,
            space_lookahead: 2,
            demand_lookahead: 1,
            space_driven: true,
            demand_driven: true,
            schedule_headways: Vec::new(),
        }
    }

    pub fn validate(&self, network: &Network) -> Result<(), PolicyError> {
        if self.demand_lookahead < 1 {
            return Err(PolicyError::ZeroDemandLookahead);
        }
        for h in &self.schedule_headways {
            if !network.has_route(h.origin, h.dest) {
                return Err(PolicyError::UnknownRoute { origin: h.origin, dest: h.dest });
            }
            if !(h.headway > 0.0) || !h.headway.is_finite() {
                return Err(PolicyError::InvalidHeadway { origin: h.origin, dest: h.dest, headway: h.headway });
            }
        }
        Ok(())
    }
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self::new(PolicyKind::OnDemandRebalance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyAction {
    DispatchRevenue { vehicle: VehicleId, request: RequestId },
    DispatchRebalance { vehicle: VehicleId, dest: VertiportId },
    DispatchScheduledEmpty { vehicle: VehicleId, dest: VertiportId },
    NoOp,
}

/// One fixed departure slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduledDeparture {
    pub origin: VertiportId,
    pub dest: VertiportId,
    pub time: f64,
}

/// Decision hooks called by the engine. Hooks are never called at or after
/// the horizon.
pub trait Policy: Send + Sync {
    /// Fixed departure slots, computed once at initialization.
    fn schedule(&self, _network: &Network, _demand: &DemandModel, _horizon: f64) -> Vec<ScheduledDeparture> {
        Vec::new()
    }

    /// A request has just joined the pending queue at its origin.
    fn on_request(&self, view: &SimView<'_>, rng: &mut StreamRng, request: RequestId) -> Vec<PolicyAction>;

    /// A vehicle has just finished turnaround and is idle.
    fn on_vehicle_ready(&self, view: &SimView<'_>, rng: &mut StreamRng, vehicle: VehicleId) -> Vec<PolicyAction>;

    /// A landing clearance has just reserved a slot at `vertiport`.
    fn on_occupancy_increase(
        &self,
        _view: &SimView<'_>,
        _rng: &mut StreamRng,
        _vertiport: VertiportId,
    ) -> Vec<PolicyAction> {
        Vec::new()
    }

    /// A fixed departure slot is due.
    fn on_schedule_slot(
        &self,
        _view: &SimView<'_>,
        _rng: &mut StreamRng,
        _slot: &ScheduledDeparture,
    ) -> Vec<PolicyAction> {
        Vec::new()
    }
}

/// Evenly spaced departures per directed route: headway is 60 divided by
/// the route's mean hourly demand, first departure at half a headway.
pub fn build_schedule(
    network: &Network,
    demand: &DemandModel,
    horizon: f64,
    overrides: &[RouteHeadway],
) -> Vec<ScheduledDeparture> {
    let mut out = Vec::new();
    for ((origin, dest), rate) in demand.mean_route_rates(network.len(), horizon) {
        if !network.has_route(origin, dest) {
            continue;
        }
        let headway = match overrides.iter().find(|h| h.origin == origin && h.dest == dest) {
            Some(h) => h.headway,
            None if rate > 0.0 => 60.0 / rate,
            None => continue,
        };
        let mut k = 0u64;
        loop {
            let time = headway * (k as f64 + 0.5);
            if time >= horizon {
                break;
            }
            out.push(ScheduledDeparture { origin, dest, time });
            k += 1;
        }
    }
    out.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.origin.cmp(&b.origin)).then(a.dest.cmp(&b.dest)));
    out
}

/// Scratch state for one hook call.
struct Planner<'a, 'v> {
    view: &'a SimView<'v>,
    claimed: BTreeSet<VehicleId>,
    served: BTreeSet<RequestId>,
    actions: Vec<PolicyAction>,
}

impl<'a, 'v> Planner<'a, 'v> {
    fn new(view: &'a SimView<'v>) -> Self {
        Self { view, claimed: BTreeSet::new(), served: BTreeSet::new(), actions: Vec::new() }
    }

    fn free_idle(&self, v: VertiportId) -> impl Iterator<Item = VehicleId> + '_ {
        self.view.idle_at(v).filter(|id| !self.claimed.contains(id))
    }

    fn free_idle_count(&self, v: VertiportId) -> usize {
        self.free_idle(v).count()
    }

    fn unserved(&self, v: VertiportId) -> impl Iterator<Item = RequestId> + '_ {
        self.view.pending_at(v).iter().copied().filter(|r| !self.served.contains(r))
    }

    fn push(&mut self, action: PolicyAction) {
        match action {
            PolicyAction::DispatchRevenue { vehicle, request } => {
                self.claimed.insert(vehicle);
                self.served.insert(request);
            }
            PolicyAction::DispatchRebalance { vehicle, .. } | PolicyAction::DispatchScheduledEmpty { vehicle, .. } => {
                self.claimed.insert(vehicle);
            }
            PolicyAction::NoOp => return,
        }
        self.actions.push(action);
    }

    /// Pairs longest-idle vehicles with oldest pending requests at `v`.
    fn serve_fcfs(&mut self, v: VertiportId) {
        loop {
            let vehicle = self.free_idle(v).next();
            let request = self.unserved(v).next();
            match (vehicle, request) {
                (Some(vehicle), Some(request)) => self.push(PolicyAction::DispatchRevenue { vehicle, request }),
                _ => break,
            }
        }
    }

    fn demand_check(&self, v: VertiportId, theta_d: u32) -> Option<PolicyAction> {
        if self.free_idle_count(v) >= theta_d as usize || self.unserved(v).next().is_none() {
            return None;
        }
        let net = self.view.network();
        let donor = (0..self.view.n_vertiports())
            .filter(|&u| u != v && net.has_route(u, v))
            .map(|u| (u, self.free_idle_count(u)))
            .filter(|&(_, idle)| idle > 0)
            .min_by(|a, b| {
                net.distance(a.0, v)
                    .total_cmp(&net.distance(b.0, v))
                    .then(b.1.cmp(&a.1))
                    .then(a.0.cmp(&b.0))
            })?
            .0;
        let vehicle = self.free_idle(donor).next()?;
        Some(PolicyAction::DispatchRebalance { vehicle, dest: v })
    }

    fn space_check(&self, v: VertiportId, theta_s: u32) -> Option<PolicyAction> {
        let trigger = self.view.capacity(v).saturating_sub(theta_s);
        if self.view.occupancy(v) < trigger {
            return None;
        }
        let vehicle = self.free_idle(v).next()?;
        let net = self.view.network();
        let dest = (0..self.view.n_vertiports())
            .filter(|&u| u != v && net.has_route(v, u))
            .map(|u| (u, self.view.free_slots(u)))
            .filter(|&(_, free)| free > theta_s)
            .min_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)))?
            .0;
        Some(PolicyAction::DispatchRebalance { vehicle, dest })
    }
}

/// Demand-driven trigger: when `v` has fewer than `theta_d` idle vehicles
/// and a waiting request, pull the longest-idle vehicle from the nearest
/// vertiport that has one (ties: more idle vehicles, then lower id).
pub fn demand_rebalance_check(view: &SimView<'_>, v: VertiportId, theta_d: u32) -> Option<PolicyAction> {
    Planner::new(view).demand_check(v, theta_d)
}

/// Space-driven trigger: when occupancy at `v` reaches capacity − θ_s, send
/// its longest-idle vehicle to the vertiport with the most free slots
/// (ties: lower id), provided that vertiport has at least θ_s + 1 free.
pub fn space_rebalance_check(view: &SimView<'_>, v: VertiportId, theta_s: u32) -> Option<PolicyAction> {
    Planner::new(view).space_check(v, theta_s)
}

/// The built-in policies, selected by [`PolicyConfig::kind`].
#[derive(Debug, Clone, PartialEq)]
pub struct FleetPolicy {
    config: PolicyConfig,
}

impl FleetPolicy {
    pub fn new(config: PolicyConfig) -> Self {
        Self { config }
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    fn rebalancing(&self) -> bool {
        self.config.kind == PolicyKind::OnDemandRebalance
    }
}

impl Policy for FleetPolicy {
    fn schedule(&self, network: &Network, demand: &DemandModel, horizon: f64) -> Vec<ScheduledDeparture> {
        match self.config.kind {
            PolicyKind::Scheduled => build_schedule(network, demand, horizon, &self.config.schedule_headways),
            _ => Vec::new(),
        }
    }

    fn on_request(&self, view: &SimView<'_>, _rng: &mut StreamRng, request: RequestId) -> Vec<PolicyAction> {
        if self.config.kind == PolicyKind::Scheduled {
            return Vec::new();
        }
        let origin = view.request(request).origin;
        let mut plan = Planner::new(view);
        plan.serve_fcfs(origin);
        if self.rebalancing() && self.config.demand_driven {
            if let Some(a) = plan.demand_check(origin, self.config.demand_lookahead) {
                plan.push(a);
            }
        }
        plan.actions
    }

    fn on_vehicle_ready(&self, view: &SimView<'_>, _rng: &mut StreamRng, vehicle: VehicleId) -> Vec<PolicyAction> {
        if self.config.kind == PolicyKind::Scheduled {
            return Vec::new();
        }
        let crate::engine::Place::Vertiport(v) = view.vehicle(vehicle).location else {
            return Vec::new();
        };
        let mut plan = Planner::new(view);
        plan.serve_fcfs(v);
        if self.rebalancing() && self.config.space_driven {
            if let Some(a) = plan.space_check(v, self.config.space_lookahead) {
                plan.push(a);
            }
        }
        plan.actions
    }

    fn on_occupancy_increase(&self, view: &SimView<'_>, _rng: &mut StreamRng, v: VertiportId) -> Vec<PolicyAction> {
        if !(self.rebalancing() && self.config.space_driven) {
            return Vec::new();
        }
        let mut plan = Planner::new(view);
        if let Some(a) = plan.space_check(v, self.config.space_lookahead) {
            plan.push(a);
        }
        plan.actions
    }

    fn on_schedule_slot(&self, view: &SimView<'_>, _rng: &mut StreamRng, slot: &ScheduledDeparture) -> Vec<PolicyAction> {
        let plan = Planner::new(view);
        let Some(vehicle) = plan.free_idle(slot.origin).next() else {
            return Vec::new();
        };
        let passenger = plan.unserved(slot.origin).find(|&r| view.request(r).dest == slot.dest);
        vec![match passenger {
            Some(request) => PolicyAction::DispatchRevenue { vehicle, request },
            None => PolicyAction::DispatchScheduledEmpty { vehicle, dest: slot.dest },
        }]
    }
}
