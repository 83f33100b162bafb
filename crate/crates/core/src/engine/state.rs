use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::demand::RequestId;
use crate::network::VertiportId;

pub type VehicleId = usize;
pub type FlightId = usize;

/// Vehicle lifecycle. The only legal cycle is
/// Idle → GroundHold → TakingOff → EnRoute → AirHold → Landing → Turnaround → Idle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VehicleState {
    Idle,
    GroundHold,
    TakingOff,
    EnRoute,
    AirHold,
    Landing,
    Turnaround,
}

impl VehicleState {
    pub const ALL: [VehicleState; 7] = [
        VehicleState::Idle,
        VehicleState::GroundHold,
        VehicleState::TakingOff,
        VehicleState::EnRoute,
        VehicleState::AirHold,
        VehicleState::Landing,
        VehicleState::Turnaround,
    ];

    pub fn next(self) -> VehicleState {
        use VehicleState::*;
        match self {
            Idle => GroundHold,
            GroundHold => TakingOff,
            TakingOff => EnRoute,
            EnRoute => AirHold,
            AirHold => Landing,
            Landing => Turnaround,
            Turnaround => Idle,
        }
    }

    /// Whether the vehicle holds a parking slot in this state.
    pub fn on_ground(self) -> bool {
        matches!(self, VehicleState::Idle | VehicleState::GroundHold | VehicleState::Turnaround)
    }

    pub fn as_str(self) -> &'static str {
        use VehicleState::*;
        match self {
            Idle => "idle",
            GroundHold => "ground_hold",
            TakingOff => "taking_off",
            EnRoute => "en_route",
            AirHold => "air_hold",
            Landing => "landing",
            Turnaround => "turnaround",
        }
    }
}

impl fmt::Display for VehicleState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FlightPurpose {
    Revenue,
    Rebalance,
    ScheduledEmpty,
}

impl FlightPurpose {
    pub fn as_str(self) -> &'static str {
        match self {
            FlightPurpose::Revenue => "revenue",
            FlightPurpose::Rebalance => "rebalance",
            FlightPurpose::ScheduledEmpty => "scheduled_empty",
        }
    }
}

impl fmt::Display for FlightPurpose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Place {
    Vertiport(VertiportId),
    Route { origin: VertiportId, dest: VertiportId },
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleRecord {
    pub id: VehicleId,
    pub state: VehicleState,
    pub location: Place,
    pub state_entered_at: f64,
    pub assigned_flight: Option<FlightId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightRecord {
    pub id: FlightId,
    pub vehicle: VehicleId,
    pub origin: VertiportId,
    pub dest: VertiportId,
    pub purpose: FlightPurpose,
    pub request: Option<RequestId>,
    pub t_request_matched: f64,
    pub t_takeoff: Option<f64>,
    pub t_enter_dest_airspace: Option<f64>,
    pub t_landing_start: Option<f64>,
    pub t_landing_done: Option<f64>,
}

/// Mutable resource state of one vertiport.
#[derive(Debug, Clone, PartialEq)]
pub struct VertiportState {
    pub id: VertiportId,
    pub capacity: u32,
    /// Vehicles on the ground: idle, ground-holding or turning around.
    pub parked: BTreeSet<VehicleId>,
    /// Slots promised to aircraft cleared to land but not yet down.
    pub reserved_slots: u32,
    pub air_hold_queue: VecDeque<FlightId>,
    pub last_landing_clearance: Option<f64>,
    pub last_takeoff_clearance: Option<f64>,
    pub pending_requests: VecDeque<RequestId>,
    /// Idle vehicles, longest-idle first.
    pub idle: VecDeque<VehicleId>,
    pub(crate) landing_retry_at: Option<f64>,
}

impl VertiportState {
    pub fn new(id: VertiportId, capacity: u32) -> Self {
        Self {
            id,
            capacity,
            parked: BTreeSet::new(),
            reserved_slots: 0,
            air_hold_queue: VecDeque::new(),
            last_landing_clearance: None,
            last_takeoff_clearance: None,
            pending_requests: VecDeque::new(),
            idle: VecDeque::new(),
            landing_retry_at: None,
        }
    }

    pub fn occupancy(&self) -> u32 {
        self.parked.len() as u32 + self.reserved_slots
    }

    pub fn free_slots(&self) -> u32 {
        self.capacity.saturating_sub(self.occupancy())
    }
}

/// One state transition, as written to the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t: f64,
    pub vehicle: VehicleId,
    pub from: VehicleState,
    pub to: VehicleState,
    pub place: Place,
    pub flight: Option<FlightId>,
    pub purpose: Option<FlightPurpose>,
}
