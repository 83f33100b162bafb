//! Capacity estimate, replications, and grid search over fleet size and
//! normalized vertiport capacity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{self, EngineError, RunOutput, Scenario};
use crate::metrics::{self, Estimate, MetricsError, RunMetrics};
use crate::network::size_vertiports;
use crate::rng::derive_seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("operation time must be positive, got {0}")]
    NonPositiveOperationTime(f64),
    #[error("{0} axis is empty")]
    EmptyAxis(&'static str),
    #[error("{0} axis must be strictly increasing")]
    UnsortedAxis(&'static str),
    #[error("{axis} axis value {value} is out of range")]
    AxisValue { axis: &'static str, value: f64 },
    #[error("replications must be at least 1")]
    ZeroReplications,
    #[error("cell f={fleet}, c_n={c_n}, seed={seed}: {source}")]
    Cell { fleet: u32, c_n: f64, seed: u64, source: EngineError },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Highest demand rate (per hour) a fleet can serve when one operation
/// takes `t_operation` minutes end to end.
pub fn estimate_dmax(fleet_size: u32, t_operation: f64) -> Result<f64, DesignError> {
    if !(t_operation > 0.0) || !t_operation.is_finite() {
        return Err(DesignError::NonPositiveOperationTime(t_operation));
    }
    Ok(fleet_size as f64 * 60.0 / t_operation)
}

/// Mean over directed routes of takeoff, cruise, landing, taxi and mean
/// turnaround, with no queueing anywhere.
pub fn measure_unimpeded_operation_time(scenario: &Scenario) -> Result<f64, DesignError> {
    let net = &scenario.network;
    let e = &scenario.engine;
    let routes = net.routes();
    if routes.is_empty() {
        return Err(DesignError::NonPositiveOperationTime(0.0));
    }
    let mut sum = 0.0;
    for r in routes {
        let dest = net.vertiport(r.dest);
        sum += e.takeoff_duration
            + net.travel_time(r.origin, r.dest).map_err(EngineError::from)?
            + e.landing_duration
            + dest.taxi_in
            + e.turnaround_mean
            + dest.taxi_out;
    }
    Ok(sum / routes.len() as f64)
}

/// Seed of replication `rep` under `base`. Shared by every cell and
/// policy so comparisons use common random numbers.
pub fn replication_seed(base: u64, rep: u32) -> u64 {
    derive_seed(base, &[rep as u64])
}

/// One finished replication.
#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub rep: u32,
    pub seed: u64,
    pub output: RunOutput,
    pub metrics: RunMetrics,
}

/// Runs `reps` replications of `scenario` in parallel, in rep order.
pub fn run_replications(
    scenario: &Scenario,
    reps: u32,
    base_seed: u64,
    event_log: bool,
) -> Result<Vec<Replication>, DesignError> {
    if reps == 0 {
        return Err(DesignError::ZeroReplications);
    }
    (0..reps)
        .into_par_iter()
        .map(|rep| {
            let seed = replication_seed(base_seed, rep);
            let mut sc = scenario.clone();
            sc.seed = seed;
            let requests = sc.generate_requests(seed)?;
            let output = engine::run_with_requests(&sc, requests, event_log)?;
            let metrics = RunMetrics::from_ledger(&output.ledger, &sc.cost_weights)?;
            Ok(Replication { rep, seed, output, metrics })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub fleet_values: Vec<u32>,
    pub cn_values: Vec<f64>,
    pub replications: u32,
    pub base_seed: u64,
    /// Everything but fleet size and capacities.
    pub template: Scenario,
}

impl GridSpec {
    /// f ∈ {15, 18, …, 60}.
    pub fn default_fleet_values() -> Vec<u32> {
        (15..=60).step_by(3).collect()
    }

    /// c_n ∈ {1.0, 1.1, …, 3.0}.
    pub fn default_cn_values() -> Vec<f64> {
        (10..=30).map(|k| k as f64 / 10.0).collect()
    }

    pub fn new(template: Scenario, base_seed: u64) -> Self {
        Self {
            fleet_values: Self::default_fleet_values(),
            cn_values: Self::default_cn_values(),
            replications: template.replications,
            base_seed,
            template,
        }
    }

    pub fn validate(&self) -> Result<(), DesignError> {
        if self.fleet_values.is_empty() {
            return Err(DesignError::EmptyAxis("fleet"));
        }
        if self.cn_values.is_empty() {
            return Err(DesignError::EmptyAxis("c_n"));
        }
        if self.fleet_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DesignError::UnsortedAxis("fleet"));
        }
        if self.cn_values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(DesignError::UnsortedAxis("c_n"));
        }
        if let Some(&f) = self.fleet_values.iter().find(|&&f| f == 0) {
            return Err(DesignError::AxisValue { axis: "fleet", value: f as f64 });
        }
        if let Some(&c) = self.cn_values.iter().find(|&&c| !(c > 0.0) || !c.is_finite()) {
            return Err(DesignError::AxisValue { axis: "c_n", value: c });
        }
        if self.replications == 0 {
            return Err(DesignError::ZeroReplications);
        }
        Ok(())
    }

    /// The template resized to (f, c_n).
    pub fn cell_scenario(&self, fleet: u32, c_n: f64) -> Scenario {
        let mut sc = self.template.clone();
        let per_port = size_vertiports(c_n, fleet, sc.network.len());
        sc.network = sc.network.with_uniform_capacity(per_port);
        sc.fleet_size = fleet;
        sc
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceCell {
    pub fleet: u32,
    pub c_n: f64,
    pub cost: Estimate,
    pub costs: Vec<f64>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSurface {
    pub fleet_values: Vec<u32>,
    pub cn_values: Vec<f64>,
    /// Row-major: fleet outer, c_n inner.
    pub cells: Vec<SurfaceCell>,
    pub argmin: (usize, usize),
}

impl CostSurface {
    pub fn cell(&self, fi: usize, ci: usize) -> &SurfaceCell {
        &self.cells[fi * self.cn_values.len() + ci]
    }

    pub fn optimum(&self) -> &SurfaceCell {
        self.cell(self.argmin.0, self.argmin.1)
    }
}

/// Evaluates every (f, c_n) cell. Replication r of every cell uses the
/// same seed, so all cells see the same demand stream.
pub fn grid_search(spec: &GridSpec) -> Result<CostSurface, DesignError> {
    spec.validate()?;
    let nf = spec.fleet_values.len();
    let nc = spec.cn_values.len();
    let reps = spec.replications;
    let seeds: Vec<u64> = (0..reps).map(|r| replication_seed(spec.base_seed, r)).collect();
    let requests = seeds
        .par_iter()
        .map(|&s| spec.template.generate_requests(s))
        .collect::<Result<Vec<_>, _>>()?;

    let jobs: Vec<(usize, usize, usize)> = (0..nf)
        .flat_map(|fi| (0..nc).flat_map(move |ci| (0..reps as usize).map(move |r| (fi, ci, r))))
        .collect();
    let costs = jobs
        .par_iter()
        .map(|&(fi, ci, r)| {
            let (fleet, c_n) = (spec.fleet_values[fi], spec.cn_values[ci]);
            let seed = seeds[r];
            let wrap = |source: EngineError| DesignError::Cell { fleet, c_n, seed, source };
            let mut sc = spec.cell_scenario(fleet, c_n);
            sc.seed = seed;
            let out = engine::run_with_requests(&sc, requests[r].clone(), false).map_err(wrap)?;
            Ok(metrics::marginal_cost(&out.ledger, &sc.cost_weights, sc.engine.horizon)?)
        })
        .collect::<Result<Vec<f64>, DesignError>>()?;

    let r = reps as usize;
    let cells: Vec<SurfaceCell> = (0..nf * nc)
        .map(|k| {
            let costs = costs[k * r..(k + 1) * r].to_vec();
            SurfaceCell {
                fleet: spec.fleet_values[k / nc],
                c_n: spec.cn_values[k % nc],
                cost: metrics::aggregate(&costs),
                costs,
                seeds: seeds.clone(),
            }
        })
        .collect();
    let mut best = 0;
    for (k, c) in cells.iter().enumerate() {
        if c.cost.mean < cells[best].cost.mean {
            best = k;
        }
    }
    Ok(CostSurface {
        fleet_values: spec.fleet_values.clone(),
        cn_values: spec.cn_values.clone(),
        cells,
        argmin: (best / nc, best % nc),
    })
}

/// One point of a sensitivity slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlicePoint {
    /// The fixed coordinate (f for the fleet slice, c_n for the other).
    pub value: f64,
    /// Best cost along the free coordinate minus the optimal cost.
    pub delta_cost: f64,
    pub half_width: Option<f64>,
    /// Best free coordinate at this point.
    pub best_other: f64,
    /// `best_other` minus its value at the optimum.
    pub other_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sensitivity {
    pub by_fleet: Vec<SlicePoint>,
    pub by_cn: Vec<SlicePoint>,
}

/// Fixes one design variable at each grid value and re-optimizes the
/// other, reporting the cost increase over the optimum.
pub fn sensitivity(surface: &CostSurface) -> Sensitivity {
    let opt = surface.optimum();
    let (nf, nc) = (surface.fleet_values.len(), surface.cn_values.len());
    let point = |value: f64, cells: Vec<&SurfaceCell>, other: fn(&SurfaceCell) -> f64| {
        let best = cells
            .into_iter()
            .reduce(|a, b| if b.cost.mean < a.cost.mean { b } else { a })
            .expect("nonempty axis");
        let half_width = match (best.cost.half_width, opt.cost.half_width) {
            _ if std::ptr::eq(best, opt) => Some(0.0),
            (Some(a), Some(b)) => Some(a.hypot(b)),
            _ => None,
        };
        SlicePoint {
            value,
            delta_cost: best.cost.mean - opt.cost.mean,
            half_width,
            best_other: other(best),
            other_deviation: other(best) - other(opt),
        }
    };
    Sensitivity {
        by_fleet: (0..nf)
            .map(|fi| point(surface.fleet_values[fi] as f64, (0..nc).map(|ci| surface.cell(fi, ci)).collect(), |c| c.c_n))
            .collect(),
        by_cn: (0..nc)
            .map(|ci| point(surface.cn_values[ci], (0..nf).map(|fi| surface.cell(fi, ci)).collect(), |c| c.fleet as f64))
            .collect(),
    }
}
