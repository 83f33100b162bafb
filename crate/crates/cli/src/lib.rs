//! Batch front-end: single runs, policy sweeps and the design grid search,
//! written out as CSV and JSON.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use uam_ecosim::config::{self, bay3, emit_scenario_json};
use uam_ecosim::demand::{default_mixture, DemandKind, DemandModel};
use uam_ecosim::design::{grid_search, run_replications, sensitivity, CostSurface, GridSpec, Replication};
use uam_ecosim::engine::{EventRecord, Place, Scenario};
use uam_ecosim::metrics::{aggregate, Estimate, RunMetrics};
use uam_ecosim::network::{normalized_capacity, size_vertiports};
use uam_ecosim::policies::{PolicyConfig, PolicyKind};

pub const THREADS_ENV: &str = "UAM_ECOSIM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "uam-ecosim", version, about = "Urban air mobility fleet and vertiport simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one scenario for a number of replications.
    Run(RunArgs),
    /// Compare policies across demand levels and capacities.
    Sweep(SweepArgs),
    /// Grid search over fleet size and normalized capacity.
    Optimize(OptimizeArgs),
    /// Built-in experiment presets.
    Presets {
        #[command(subcommand)]
        action: PresetsAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum PresetsAction {
    List,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Overrides the scenario's policy kind.
    #[arg(long)]
    pub policy: Option<PolicyKind>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub reps: Option<u32>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write one events_rep{k}.csv per replication.
    #[arg(long)]
    pub emit_events: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub reps: Option<u32>,
    #[arg(long)]
    pub out: PathBuf,
    /// Demand levels per hour (base rate or mixture peak).
    #[arg(long, value_delimiter = ',')]
    pub rates: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub policies: Option<Vec<PolicyKind>>,
    /// Normalized capacities; the scenario's own when omitted.
    #[arg(long = "cn", value_delimiter = ',')]
    pub cn: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Grid file: a scenario plus optional fleet_values, cn_values, replications.
    #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
    pub grid: Option<PathBuf>,
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub reps: Option<u32>,
    #[arg(long)]
    pub out: PathBuf,
}

/// A named experiment.
#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub command: &'static str,
    pub about: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset { name: "uniform-fig6", command: "sweep", about: "uniform demand 9-75/h, c_n 1 and 2, three policies: demand delay" },
    Preset { name: "uniform-fig8", command: "sweep", about: "uniform demand 9-90/h, c_n 1 and 2, three policies: utilization and throughput" },
    Preset { name: "gmm-fig9", command: "sweep", about: "Gaussian-mixture demand, peak 9-75/h, c_n 1 and 2, three policies: demand delay" },
    Preset { name: "gmm-fig11", command: "sweep", about: "Gaussian-mixture demand, peak 9-90/h, c_n 1 and 2, three policies: utilization, throughput and cost" },
    Preset { name: "grid-fig13", command: "optimize", about: "Gaussian-mixture peak 30/h, f 15-60 step 3, c_n 1.0-3.0 step 0.1" },
];

const LOW_RATES: [f64; 7] = [9.0, 15.0, 21.0, 30.0, 45.0, 60.0, 75.0];
const PRESET_FLEET: u32 = 36;

fn template(demand: DemandModel, c_n: f64) -> Scenario {
    let cap = size_vertiports(c_n, PRESET_FLEET, 3);
    Scenario::new(bay3(cap), PRESET_FLEET, demand, PolicyConfig::default())
}

/// Sweep axes of a preset: template, rates, capacities.
pub fn sweep_preset(name: &str) -> Result<(Scenario, Vec<f64>, Vec<f64>)> {
    let with_90 = |mut v: Vec<f64>| {
        v.push(90.0);
        v
    };
    let (demand, rates) = match name {
        "uniform-fig6" => (DemandModel::uniform(30.0), LOW_RATES.to_vec()),
        "uniform-fig8" => (DemandModel::uniform(30.0), with_90(LOW_RATES.to_vec())),
        "gmm-fig9" => (DemandModel::gaussian_mixture(30.0, default_mixture()), LOW_RATES.to_vec()),
        "gmm-fig11" => (DemandModel::gaussian_mixture(30.0, default_mixture()), with_90(LOW_RATES.to_vec())),
        other => bail!("unknown sweep preset '{other}' (see `presets list`)"),
    };
    Ok((template(demand, 2.0), rates, vec![1.0, 2.0]))
}

pub fn grid_preset(name: &str, base_seed: u64) -> Result<GridSpec> {
    match name {
        "grid-fig13" => Ok(GridSpec::new(template(DemandModel::gaussian_mixture(30.0, default_mixture()), 2.0), base_seed)),
        other => bail!("unknown optimize preset '{other}' (see `presets list`)"),
    }
}

/// Applies `UAM_ECOSIM_THREADS` to the global rayon pool.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = raw.trim().parse().with_context(|| format!("{THREADS_ENV}={raw} is not a thread count"))?;
    if n == 0 {
        bail!("{THREADS_ENV} must be at least 1");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring thread pool")?;
    Ok(())
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(a) => cmd_run(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Optimize(a) => cmd_optimize(&a),
        Command::Presets { action: PresetsAction::List } => {
            print!("{}", presets_listing());
            Ok(())
        }
    }
}

pub fn presets_listing() -> String {
    PRESETS.iter().map(|p| format!("{:<14}{:<10}{}\n", p.name, p.command, p.about)).collect()
}

fn load(path: &Path) -> Result<Scenario> {
    let parsed = config::load_scenario(path).with_context(|| format!("loading {}", path.display()))?;
    for w in &parsed.warnings {
        eprintln!("warning: {w}");
    }
    Ok(parsed.value)
}

fn scenario_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "scenario".into())
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn actual_cn(sc: &Scenario) -> f64 {
    normalized_capacity(sc.network.total_capacity(), sc.fleet_size).unwrap_or(f64::NAN)
}

#[derive(Debug, Serialize)]
struct MetricSummary {
    name: String,
    mean: f64,
    half_width: Option<f64>,
    n: usize,
}

#[derive(Debug, Serialize)]
struct ReplicationSummary {
    replication: u32,
    seed: u64,
    metrics: RunMetrics,
}

#[derive(Debug, Serialize)]
struct RunSummary {
    scenario_id: String,
    policy: &'static str,
    base_seed: u64,
    replications: u32,
    fleet_size: u32,
    normalized_capacity: f64,
    demand_kind: &'static str,
    demand_level: f64,
    horizon: f64,
    metrics: Vec<MetricSummary>,
    per_replication: Vec<ReplicationSummary>,
}

fn demand_kind(sc: &Scenario) -> &'static str {
    match sc.demand.kind() {
        DemandKind::Uniform => "uniform",
        DemandKind::GaussianMixture => "gaussian_mixture",
    }
}

/// Mean and CI of every flattened metric, in first-seen order.
fn summarize(reps: &[Replication]) -> Vec<MetricSummary> {
    let mut names: Vec<String> = Vec::new();
    for r in reps {
        for (n, _) in r.metrics.flatten() {
            if !names.contains(&n) {
                names.push(n);
            }
        }
    }
    names
        .into_iter()
        .map(|name| {
            let values: Vec<f64> = reps
                .iter()
                .filter_map(|r| r.metrics.flatten().into_iter().find(|(n, _)| *n == name).map(|(_, v)| v))
                .collect();
            let e = aggregate(&values);
            MetricSummary { name, mean: e.mean, half_width: e.half_width, n: e.n }
        })
        .collect()
}

pub fn cmd_run(a: &RunArgs) -> Result<()> {
    let mut sc = load(&a.scenario)?;
    if let Some(kind) = a.policy {
        sc.policy.kind = kind;
    }
    let reps = a.reps.unwrap_or(sc.replications);
    sc.replications = reps;
    prepare_out(&a.out)?;
    let id = scenario_id(&a.scenario);
    log::info!("run {id}: policy {}, {reps} replications, seed {}", sc.policy.kind, a.seed);
    let results = run_replications(&sc, reps, a.seed, a.emit_events)?;

    let summary = RunSummary {
        scenario_id: id.clone(),
        policy: sc.policy.kind.as_str(),
        base_seed: a.seed,
        replications: reps,
        fleet_size: sc.fleet_size,
        normalized_capacity: actual_cn(&sc),
        demand_kind: demand_kind(&sc),
        demand_level: sc.demand.level(),
        horizon: sc.engine.horizon,
        metrics: summarize(&results),
        per_replication: results
            .iter()
            .map(|r| ReplicationSummary { replication: r.rep, seed: r.seed, metrics: r.metrics.clone() })
            .collect(),
    };
    write_json(&a.out.join("summary.json"), &summary)?;
    fs::write(a.out.join("scenario.json"), emit_scenario_json(&sc) + "\n")?;

    let mut w = csv_writer(&a.out.join("metrics.csv"))?;
    w.write_record(["scenario_id", "replication", "metric", "value"])?;
    for r in &results {
        for (name, value) in r.metrics.flatten() {
            w.write_record([id.clone(), r.rep.to_string(), name, value.to_string()])?;
        }
    }
    w.flush()?;

    if a.emit_events {
        for r in &results {
            let events = r.output.events.as_deref().unwrap_or_default();
            write_events(&a.out.join(format!("events_rep{}.csv", r.rep)), events)?;
        }
    }
    Ok(())
}

fn write_events(path: &Path, events: &[EventRecord]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["t", "vehicle", "from", "to", "vertiport", "origin", "dest", "flight", "purpose"])?;
    let opt = |x: Option<usize>| x.map(|v| v.to_string()).unwrap_or_default();
    for e in events {
        let (port, origin, dest) = match e.place {
            Place::Vertiport(v) => (Some(v), None, None),
            Place::Route { origin, dest } => (None, Some(origin), Some(dest)),
        };
        w.write_record([
            e.t.to_string(),
            e.vehicle.to_string(),
            e.from.to_string(),
            e.to.to_string(),
            opt(port),
            opt(origin),
            opt(dest),
            opt(e.flight),
            e.purpose.map(|p| p.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One sweep cell's replications.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub policy: PolicyKind,
    pub c_n: f64,
    pub demand: f64,
    pub reps: Vec<Replication>,
}

/// Runs every (policy, c_n, demand) cell. Replication r of every cell uses
/// the same seed. Cells come back sorted by (policy, c_n, demand).
pub fn sweep(
    base: &Scenario,
    policies: &[PolicyKind],
    cns: Option<&[f64]>,
    rates: &[f64],
    reps: u32,
    seed: u64,
) -> Result<Vec<SweepCell>> {
    if policies.is_empty() || rates.is_empty() || cns.is_some_and(|c| c.is_empty()) {
        bail!("every sweep axis needs at least one value");
    }
    let cn_axis: Vec<Option<f64>> = match cns {
        Some(c) => c.iter().map(|&x| Some(x)).collect(),
        None => vec![None],
    };
    let mut jobs = Vec::new();
    for &p in policies {
        for &c in &cn_axis {
            for &d in rates {
                jobs.push((p, c, d));
            }
        }
    }
    let mut cells = jobs
        .par_iter()
        .map(|&(policy, c_n, demand)| {
            let mut sc = base.clone();
            sc.policy.kind = policy;
            sc.demand = sc.demand.clone().with_level(demand);
            if let Some(c) = c_n {
                if !(c > 0.0) {
                    bail!("c_n must be positive, got {c}");
                }
                sc.network = sc.network.with_uniform_capacity(size_vertiports(c, sc.fleet_size, sc.network.len()));
            }
            let c_n = c_n.unwrap_or_else(|| actual_cn(&sc));
            let reps = run_replications(&sc, reps, seed, false)
                .with_context(|| format!("policy {policy}, c_n {c_n}, demand {demand}"))?;
            Ok(SweepCell { policy, c_n, demand, reps })
        })
        .collect::<Result<Vec<_>>>()?;
    cells.sort_by(|a, b| {
        a.policy.as_str().cmp(b.policy.as_str()).then(a.c_n.total_cmp(&b.c_n)).then(a.demand.total_cmp(&b.demand))
    });
    Ok(cells)
}

fn sweep_header(m: &RunMetrics) -> Vec<String> {
    let mut h: Vec<String> = ["policy", "c_n", "demand", "replication", "seed", "requests", "fulfilled", "unfulfilled"]
        .map(String::from)
        .to_vec();
    h.extend(["mean_demand_delay", "requested_per_hour", "throughput_per_hour"].map(String::from));
    h.extend(m.throughput.buckets.iter().map(|b| format!("throughput_delay_lt_{}", b.below_min)));
    h.extend(m.utilization.named().iter().map(|(n, _)| format!("share_{n}")));
    h.extend(["air_holding_time", "additional_flying_time", "cost"].map(String::from));
    h
}

fn sweep_row(cell: &SweepCell, r: &Replication) -> Vec<String> {
    let m = &r.metrics;
    let mut row = vec![
        cell.policy.as_str().to_string(),
        cell.c_n.to_string(),
        cell.demand.to_string(),
        r.rep.to_string(),
        r.seed.to_string(),
        m.requests.to_string(),
        m.fulfilled.to_string(),
        m.unfulfilled.to_string(),
        m.throughput.mean_demand_delay.map(|d| d.to_string()).unwrap_or_default(),
        m.throughput.requested_per_hour.to_string(),
        m.throughput.completed_per_hour.to_string(),
    ];
    row.extend(m.throughput.buckets.iter().map(|b| b.per_hour.to_string()));
    row.extend(m.utilization.named().iter().map(|(_, v)| v.to_string()));
    row.push(m.totals.air_holding.to_string());
    row.push(m.additional.total().to_string());
    row.push(m.cost.to_string());
    row
}

fn est_fields(e: &Estimate) -> [String; 2] {
    [e.mean.to_string(), e.half_width.map(|h| h.to_string()).unwrap_or_default()]
}

pub fn write_sweep(dir: &Path, cells: &[SweepCell]) -> Result<()> {
    let Some(first) = cells.first().and_then(|c| c.reps.first()) else { bail!("empty sweep") };
    let mut w = csv_writer(&dir.join("sweep.csv"))?;
    w.write_record(sweep_header(&first.metrics))?;
    for cell in cells {
        for r in &cell.reps {
            w.write_record(sweep_row(cell, r))?;
        }
    }
    w.flush()?;

    let mut s = csv_writer(&dir.join("sweep_summary.csv"))?;
    let mut header = vec!["policy".to_string(), "c_n".into(), "demand".into(), "replications".into()];
    for name in ["mean_demand_delay", "throughput_per_hour", "share_idling", "air_holding_time", "cost"] {
        header.push(name.to_string());
        header.push(format!("{name}_ci95"));
    }
    s.write_record(&header)?;
    for cell in cells {
        let pick = |f: &dyn Fn(&RunMetrics) -> Option<f64>| {
            aggregate(&cell.reps.iter().filter_map(|r| f(&r.metrics)).collect::<Vec<_>>())
        };
        let mut row = vec![
            cell.policy.as_str().to_string(),
            cell.c_n.to_string(),
            cell.demand.to_string(),
            cell.reps.len().to_string(),
        ];
        row.extend(est_fields(&pick(&|m| m.throughput.mean_demand_delay)));
        row.extend(est_fields(&pick(&|m| Some(m.throughput.completed_per_hour))));
        row.extend(est_fields(&pick(&|m| Some(m.utilization.idling))));
        row.extend(est_fields(&pick(&|m| Some(m.totals.air_holding))));
        row.extend(est_fields(&pick(&|m| Some(m.cost))));
        s.write_record(&row)?;
    }
    s.flush()?;
    Ok(())
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let (base, mut rates, mut cns) = match (&a.scenario, &a.preset) {
        (Some(path), None) => {
            let sc = load(path)?;
            let level = sc.demand.level();
            (sc, vec![level], None)
        }
        (None, Some(name)) => {
            let (sc, rates, cns) = sweep_preset(name)?;
            (sc, rates, Some(cns))
        }
        _ => bail!("give exactly one of --scenario or --preset"),
    };
    if let Some(r) = &a.rates {
        rates = r.clone();
    }
    if let Some(c) = &a.cn {
        cns = Some(c.clone());
    }
    let policies = match &a.policies {
        Some(p) => p.clone(),
        None if a.preset.is_some() => PolicyKind::ALL.to_vec(),
        None => vec![base.policy.kind],
    };
    let reps = a.reps.unwrap_or(base.replications);
    prepare_out(&a.out)?;
    log::info!(
        "sweep: {} policies x {} capacities x {} demand levels x {reps} replications",
        policies.len(),
        cns.as_ref().map_or(1, Vec::len),
        rates.len()
    );
    let cells = sweep(&base, &policies, cns.as_deref(), &rates, reps, a.seed)?;
    write_sweep(&a.out, &cells)
}

#[derive(Debug, Serialize)]
struct Argmin {
    fleet: u32,
    c_n: f64,
    cost_mean: f64,
    cost_half_width: Option<f64>,
    replications: usize,
    base_seed: u64,
}

pub fn write_surface(dir: &Path, surface: &CostSurface, base_seed: u64) -> Result<()> {
    let mut w = csv_writer(&dir.join("surface.csv"))?;
    w.write_record(["fleet", "c_n", "cost_mean", "cost_ci95", "replications"])?;
    for c in &surface.cells {
        let [mean, hw] = est_fields(&c.cost);
        w.write_record([c.fleet.to_string(), c.c_n.to_string(), mean, hw, c.cost.n.to_string()])?;
    }
    w.flush()?;

    let opt = surface.optimum();
    write_json(
        &dir.join("argmin.json"),
        &Argmin {
            fleet: opt.fleet,
            c_n: opt.c_n,
            cost_mean: opt.cost.mean,
            cost_half_width: opt.cost.half_width,
            replications: opt.cost.n,
            base_seed,
        },
    )?;

    let s = sensitivity(surface);
    let opt_hw = |h: Option<f64>| h.map(|x| x.to_string()).unwrap_or_default();
    let mut w = csv_writer(&dir.join("sensitivity_f.csv"))?;
    w.write_record(["fleet", "delta_cost", "delta_ci95", "best_c_n", "c_n_deviation"])?;
    for p in &s.by_fleet {
        w.write_record([
            p.value.to_string(),
            p.delta_cost.to_string(),
            opt_hw(p.half_width),
            p.best_other.to_string(),
            p.other_deviation.to_string(),
        ])?;
    }
    w.flush()?;
    let mut w = csv_writer(&dir.join("sensitivity_cn.csv"))?;
    w.write_record(["c_n", "delta_cost", "delta_ci95", "best_fleet", "fleet_deviation"])?;
    for p in &s.by_cn {
        w.write_record([
            p.value.to_string(),
            p.delta_cost.to_string(),
            opt_hw(p.half_width),
            p.best_other.to_string(),
            p.other_deviation.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_optimize(a: &OptimizeArgs) -> Result<()> {
    let mut spec = match (&a.grid, &a.preset) {
        (Some(path), None) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let parsed = config::parse_grid(&text, a.seed).with_context(|| format!("loading {}", path.display()))?;
            for w in &parsed.warnings {
                eprintln!("warning: {w}");
            }
            parsed.value
        }
        (None, Some(name)) => grid_preset(name, a.seed)?,
        _ => bail!("give exactly one of --grid or --preset"),
    };
    if let Some(r) = a.reps {
        spec.replications = r;
    }
    prepare_out(&a.out)?;
    log::info!(
        "optimize: {} x {} cells, {} replications each",
        spec.fleet_values.len(),
        spec.cn_values.len(),
        spec.replications
    );
    let surface = grid_search(&spec)?;
    write_surface(&a.out, &surface, a.seed)
}

