//! Time-utilization ledger, demand delay, throughput and operating cost.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demand::RequestId;
use crate::engine::VehicleState;

/// Delay thresholds (minutes) for the throughput buckets.
pub const DELAY_BUCKETS: [f64; 6] = [1.0, 5.0, 15.0, 30.0, 60.0, 120.0];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("simulation time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("cost weight {name} must be non-negative, got {value}")]
    NegativeWeight { name: &'static str, value: f64 },
}

/// Minutes spent in each lifecycle state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StateTimes {
    pub idling: f64,
    pub ground_holding: f64,
    pub takeoff: f64,
    pub en_route: f64,
    pub air_holding: f64,
    pub landing: f64,
    pub turnaround: f64,
}

impl StateTimes {
    pub fn add(&mut self, state: VehicleState, minutes: f64) {
        *self.slot(state) += minutes;
    }

    pub fn get(&self, state: VehicleState) -> f64 {
        match state {
            VehicleState::Idle => self.idling,
            VehicleState::GroundHold => self.ground_holding,
            VehicleState::TakingOff => self.takeoff,
            VehicleState::EnRoute => self.en_route,
            VehicleState::AirHold => self.air_holding,
            VehicleState::Landing => self.landing,
            VehicleState::Turnaround => self.turnaround,
        }
    }

    fn slot(&mut self, state: VehicleState) -> &mut f64 {
        match state {
            VehicleState::Idle => &mut self.idling,
            VehicleState::GroundHold => &mut self.ground_holding,
            VehicleState::TakingOff => &mut self.takeoff,
            VehicleState::EnRoute => &mut self.en_route,
            VehicleState::AirHold => &mut self.air_holding,
            VehicleState::Landing => &mut self.landing,
            VehicleState::Turnaround => &mut self.turnaround,
        }
    }

    pub fn total(&self) -> f64 {
        VehicleState::ALL.iter().map(|&s| self.get(s)).sum()
    }

    pub fn merged(mut self, other: &StateTimes) -> StateTimes {
        for s in VehicleState::ALL {
            self.add(s, other.get(s));
        }
        self
    }
}

/// Flying time of one class of flights.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FlightPhaseTimes {
    pub takeoff: f64,
    pub en_route: f64,
    pub landing: f64,
}

impl FlightPhaseTimes {
    /// Accumulates flying states; other states are ignored.
    pub fn add(&mut self, state: VehicleState, minutes: f64) {
        match state {
            VehicleState::TakingOff => self.takeoff += minutes,
            VehicleState::EnRoute => self.en_route += minutes,
            VehicleState::Landing => self.landing += minutes,
            _ => {}
        }
    }

    pub fn total(&self) -> f64 {
        self.takeoff + self.en_route + self.landing
    }

    pub fn merged(&self, other: &FlightPhaseTimes) -> FlightPhaseTimes {
        FlightPhaseTimes {
            takeoff: self.takeoff + other.takeoff,
            en_route: self.en_route + other.en_route,
            landing: self.landing + other.landing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RequestOutcome {
    pub id: RequestId,
    pub t_submit: f64,
    pub t_takeoff: Option<f64>,
    pub t_landed: Option<f64>,
}

impl RequestOutcome {
    /// Served if its aircraft took off by `horizon`.
    pub fn fulfilled(&self, horizon: f64) -> bool {
        self.t_takeoff.is_some_and(|t| t <= horizon)
    }
}

/// Accumulated times of one run. `per_vehicle` is clipped to the horizon
/// so each vehicle sums to exactly `horizon`; `per_vehicle_unclipped`
/// also holds the drain tail and sums to `end_time`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeLedger {
    pub horizon: f64,
    pub fleet_size: u32,
    pub per_vehicle: Vec<StateTimes>,
    pub per_vehicle_unclipped: Vec<StateTimes>,
    pub rebalancing: FlightPhaseTimes,
    pub over_scheduled: FlightPhaseTimes,
    pub requests: Vec<RequestOutcome>,
    pub schedule_slots: u64,
    pub schedule_slots_skipped: u64,
    pub end_time: f64,
}

impl TimeLedger {
    pub fn totals(&self) -> StateTimes {
        self.per_vehicle.iter().fold(StateTimes::default(), |acc, v| acc.merged(v))
    }

    /// Flying time of rebalancing and over-scheduled flights.
    pub fn additional(&self) -> FlightPhaseTimes {
        self.rebalancing.merged(&self.over_scheduled)
    }

    pub fn fulfilled(&self) -> impl Iterator<Item = &RequestOutcome> {
        self.requests.iter().filter(|r| r.fulfilled(self.horizon))
    }

    pub fn fulfilled_count(&self) -> usize {
        self.fulfilled().count()
    }

    pub fn unfulfilled_count(&self) -> usize {
        self.requests.len() - self.fulfilled_count()
    }

    /// Delay of served requests plus the wait accrued by unserved ones up
    /// to the horizon.
    pub fn total_demand_delay(&self) -> f64 {
        self.requests
            .iter()
            .map(|r| match r.t_takeoff {
                Some(t) if t <= self.horizon => t - r.t_submit,
                _ => (self.horizon - r.t_submit).max(0.0),
            })
            .sum()
    }

    /// Mean delay over served requests.
    pub fn mean_demand_delay(&self) -> Option<f64> {
        let delays: Vec<f64> = self.fulfilled().filter_map(|r| demand_delay(r.t_submit, r.t_takeoff?).ok()).collect();
        (!delays.is_empty()).then(|| delays.iter().sum::<f64>() / delays.len() as f64)
    }
}

/// Time from submission to takeoff of the serving aircraft.
pub fn demand_delay(t_submit: f64, t_takeoff: f64) -> Result<f64, f64> {
    let d = t_takeoff - t_submit;
    if d < 0.0 {
        Err(d)
    } else {
        Ok(d)
    }
}

/// Cost per minute of accumulated time in each category.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostWeights {
    pub idling: f64,
    pub ground_holding: f64,
    pub air_holding: f64,
    pub cruising: f64,
    pub takeoff: f64,
    pub landing: f64,
    pub demand_delay: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            idling: 1.0,
            ground_holding: 5.0,
            air_holding: 100.0,
            cruising: 50.0,
            takeoff: 150.0,
            landing: 150.0,
            demand_delay: 100.0,
        }
    }
}

impl CostWeights {
    pub fn named(&self) -> [(&'static str, f64); 7] {
        [
            ("idling", self.idling),
            ("ground_holding", self.ground_holding),
            ("air_holding", self.air_holding),
            ("cruising", self.cruising),
            ("takeoff", self.takeoff),
            ("landing", self.landing),
            ("demand_delay", self.demand_delay),
        ]
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        for (name, value) in self.named() {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(MetricsError::NegativeWeight { name, value });
            }
        }
        Ok(())
    }
}

/// Weighted operating cost above nominal revenue flying, per simulated
/// minute. Revenue takeoff, cruise and landing cost nothing.
pub fn marginal_cost(ledger: &TimeLedger, weights: &CostWeights, t_simulation: f64) -> Result<f64, MetricsError> {
    if !(t_simulation > 0.0) {
        return Err(MetricsError::NonPositiveTime(t_simulation));
    }
    let totals = ledger.totals();
    let extra = ledger.additional();
    let sum = weights.idling * totals.idling
        + weights.ground_holding * totals.ground_holding
        + weights.air_holding * totals.air_holding
        + weights.cruising * extra.en_route
        + weights.takeoff * extra.takeoff
        + weights.landing * extra.landing
        + weights.demand_delay * ledger.total_demand_delay();
    Ok(sum / t_simulation)
}

/// Shares of fleet time. Revenue takeoff and landing count as en-route;
/// rebalancing and over-scheduled flying is its own category.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UtilizationShares {
    pub en_route: f64,
    pub air_holding: f64,
    pub ground_holding: f64,
    pub idling: f64,
    pub turnaround: f64,
    pub rebalancing: f64,
}

impl UtilizationShares {
    pub fn named(&self) -> [(&'static str, f64); 6] {
        [
            ("en_route", self.en_route),
            ("air_holding", self.air_holding),
            ("ground_holding", self.ground_holding),
            ("idling", self.idling),
            ("turnaround", self.turnaround),
            ("rebalancing", self.rebalancing),
        ]
    }

    pub fn sum(&self) -> f64 {
        self.named().iter().map(|p| p.1).sum()
    }
}

pub fn time_utilization(ledger: &TimeLedger) -> UtilizationShares {
    let total = ledger.fleet_size as f64 * ledger.horizon;
    if total <= 0.0 {
        return UtilizationShares::default();
    }
    let t = ledger.totals();
    let extra = ledger.additional().total();
    let flying = t.takeoff + t.en_route + t.landing;
    UtilizationShares {
        en_route: (flying - extra) / total,
        air_holding: t.air_holding / total,
        ground_holding: t.ground_holding / total,
        idling: t.idling / total,
        turnaround: t.turnaround / total,
        rebalancing: extra / total,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayBucket {
    pub below_min: f64,
    pub per_hour: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputReport {
    pub requested_per_hour: f64,
    pub completed_per_hour: f64,
    pub buckets: Vec<DelayBucket>,
    pub mean_demand_delay: Option<f64>,
}

/// Revenue operations whose landing completes within the horizon, per
/// hour, split by demand-delay threshold.
pub fn throughput(ledger: &TimeLedger) -> ThroughputReport {
    let hours = ledger.horizon / 60.0;
    let completed: Vec<f64> = ledger
        .requests
        .iter()
        .filter(|r| r.t_landed.is_some_and(|t| t <= ledger.horizon))
        .filter_map(|r| r.t_takeoff.map(|t| t - r.t_submit))
        .collect();
    let rate = |n: usize| if hours > 0.0 { n as f64 / hours } else { 0.0 };
    ThroughputReport {
        requested_per_hour: rate(ledger.requests.len()),
        completed_per_hour: rate(completed.len()),
        buckets: DELAY_BUCKETS
            .iter()
            .map(|&below_min| DelayBucket {
                below_min,
                per_hour: rate(completed.iter().filter(|&&d| d < below_min).count()),
            })
            .collect(),
        mean_demand_delay: ledger.mean_demand_delay(),
    }
}

/// Headline numbers of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub requests: usize,
    pub fulfilled: usize,
    pub unfulfilled: usize,
    pub throughput: ThroughputReport,
    pub utilization: UtilizationShares,
    pub totals: StateTimes,
    pub additional: FlightPhaseTimes,
    pub total_demand_delay: f64,
    pub schedule_slots: u64,
    pub schedule_slots_skipped: u64,
    pub cost: f64,
}

impl RunMetrics {
    pub fn from_ledger(ledger: &TimeLedger, weights: &CostWeights) -> Result<Self, MetricsError> {
        Ok(Self {
            requests: ledger.requests.len(),
            fulfilled: ledger.fulfilled_count(),
            unfulfilled: ledger.unfulfilled_count(),
            throughput: throughput(ledger),
            utilization: time_utilization(ledger),
            totals: ledger.totals(),
            additional: ledger.additional(),
            total_demand_delay: ledger.total_demand_delay(),
            schedule_slots: ledger.schedule_slots,
            schedule_slots_skipped: ledger.schedule_slots_skipped,
            cost: marginal_cost(ledger, weights, ledger.horizon)?,
        })
    }

    /// Flat (name, value) pairs; a missing mean delay is omitted.
    pub fn flatten(&self) -> Vec<(String, f64)> {
        let mut out = vec![
            ("requests".to_string(), self.requests as f64),
            ("fulfilled".to_string(), self.fulfilled as f64),
            ("unfulfilled".to_string(), self.unfulfilled as f64),
            ("cost".to_string(), self.cost),
            ("requested_per_hour".to_string(), self.throughput.requested_per_hour),
            ("throughput_per_hour".to_string(), self.throughput.completed_per_hour),
        ];
        if let Some(d) = self.throughput.mean_demand_delay {
            out.push(("mean_demand_delay".to_string(), d));
        }
        for b in &self.throughput.buckets {
            out.push((format!("throughput_delay_lt_{}", b.below_min), b.per_hour));
        }
        for (name, share) in self.utilization.named() {
            out.push((format!("share_{name}"), share));
        }
        for s in VehicleState::ALL {
            out.push((format!("time_{s}"), self.totals.get(s)));
        }
        out.push(("time_additional_flying".to_string(), self.additional.total()));
        out.push(("total_demand_delay".to_string(), self.total_demand_delay));
        out.push(("schedule_slots".to_string(), self.schedule_slots as f64));
        out.push(("schedule_slots_skipped".to_string(), self.schedule_slots_skipped as f64));
        out
    }
}

/// Mean with a normal-approximation 95% confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    /// `None` with fewer than two samples.
    pub half_width: Option<f64>,
    pub n: usize,
}

impl Estimate {
    pub fn lower(&self) -> f64 {
        self.mean - self.half_width.unwrap_or(0.0)
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width.unwrap_or(0.0)
    }
}

pub const Z_95: f64 = 1.959963984540054;

/// Across-replication estimate. Empty input yields NaN mean.
pub fn aggregate(values: &[f64]) -> Estimate {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let half_width = (n >= 2).then(|| {
        let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Z_95 * var.sqrt() / (n as f64).sqrt()
    });
    Estimate { mean, half_width, n }
}
