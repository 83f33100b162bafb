//! JSON scenario and grid files.
//!
//! Unknown keys are rejected, missing sections take documented defaults,
//! and every error names the JSON path it concerns.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demand::{default_mixture, DemandKind, DemandModel, MixtureComponent, OdWeight, RateProfile};
use crate::design::GridSpec;
use crate::engine::{EngineParams, Scenario};
use crate::metrics::CostWeights;
use crate::network::{size_vertiports, Network, RangeBounds, Route, Vertiport};
use crate::policies::{PolicyConfig, PolicyKind, RouteHeadway};

pub const SCHEMA_VERSION: u32 = 1;

/// Capacity ratio used when a file gives neither capacities nor a ratio.
pub const DEFAULT_NORMALIZED_CAPACITY: f64 = 2.0;

const BAY3: &str = include_str!("../presets/bay3.json");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: {message}")]
    Constraint { path: String, message: String },
}

impl ConfigError {
    pub fn path(&self) -> &str {
        match self {
            ConfigError::Parse { path, .. } | ConfigError::Constraint { path, .. } => path,
        }
    }

    fn at(path: impl Into<String>, message: impl ToString) -> Self {
        ConfigError::Constraint { path: path.into(), message: message.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    pub network: NetworkSection,
    pub fleet_size: u32,
    #[serde(default)]
    pub demand: DemandSection,
    #[serde(default)]
    pub policy: PolicySection,
    #[serde(default)]
    pub engine: EngineSection,
    #[serde(default)]
    pub cost_weights: CostWeights,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertiports: Option<Vec<VertiportSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cruise_speed_kmh: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range_km: Option<RangeBounds>,
    /// Directed (origin, dest) index pairs; all pairs when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub routes: Option<Vec<[usize; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalized_capacity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacities: Option<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertiportSpec {
    pub name: String,
    pub lat: f64,
    pub lon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parking_capacity: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arrival_separation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub departure_separation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taxi_in: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taxi_out: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct PresetFile {
    cruise_speed_kmh: f64,
    vertiports: Vec<VertiportSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemandKindName {
    Uniform,
    GaussianMixture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSection {
    pub kind: DemandKindName,
    /// Base rate (uniform) or peak rate (mixture), requests per hour.
    pub rate_per_hour: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<MixtureComponent>>,
    #[serde(default = "default_noise")]
    pub noise_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub od_weights: Option<Vec<OdWeight>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_origin: Option<Vec<Vec<MixtureComponent>>>,
}

fn default_noise() -> f64 {
    0.25
}

impl Default for DemandSection {
    fn default() -> Self {
        Self {
            kind: DemandKindName::GaussianMixture,
            rate_per_hour: 30.0,
            components: None,
            noise_fraction: default_noise(),
            od_weights: None,
            per_origin: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicySection {
    pub kind: PolicyKind,
    pub space_lookahead: u32,
    pub demand_lookahead: u32,
    pub space_driven: bool,
    pub demand_driven: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub schedule_headways: Vec<RouteHeadway>,
}

impl Default for PolicySection {
    fn default() -> Self {
        PolicySection::from(&PolicyConfig::default())
    }
}

impl From<&PolicyConfig> for PolicySection {
    fn from(p: &PolicyConfig) -> Self {
        Self {
            kind: p.kind,
            space_lookahead: p.space_lookahead,
            demand_lookahead: p.demand_lookahead,
            space_driven: p.space_driven,
            demand_driven: p.demand_driven,
            schedule_headways: p.schedule_headways.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineSection {
    pub horizon: f64,
    pub turnaround_mean: f64,
    pub turnaround_std: f64,
    pub takeoff_duration: f64,
    pub landing_duration: f64,
    /// Defaults for vertiports that do not set their own.
    pub arrival_separation: f64,
    pub departure_separation: f64,
    pub taxi_in: f64,
    pub taxi_out: f64,
}

impl Default for EngineSection {
    fn default() -> Self {
        let e = EngineParams::default();
        let v = Vertiport::new(0, "", 0.0, 0.0);
        Self {
            horizon: e.horizon,
            turnaround_mean: e.turnaround_mean,
            turnaround_std: e.turnaround_std,
            takeoff_duration: e.takeoff_duration,
            landing_duration: e.landing_duration,
            arrival_separation: v.arrival_separation,
            departure_separation: v.departure_separation,
            taxi_in: v.taxi_in,
            taxi_out: v.taxi_out,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub replications: u32,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self { replications: 5 }
    }
}

/// A resolved scenario plus any precedence warnings raised on the way.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub value: T,
    pub warnings: Vec<String>,
}

fn from_json<'de, T: Deserialize<'de>>(text: &'de str) -> Result<T, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::Parse { path, message: e.into_inner().to_string() }
    })
}

/// Names of the built-in network presets.
pub fn network_presets() -> &'static [&'static str] {
    &["bay3"]
}

fn preset(name: &str) -> Result<PresetFile, ConfigError> {
    match name {
        "bay3" => Ok(serde_json::from_str(BAY3).expect("bundled preset parses")),
        other => Err(ConfigError::at("network.preset", format!("unknown preset '{other}'"))),
    }
}

/// The bundled three-vertiport Bay Area network with uniform capacity.
pub fn bay3(capacity: u32) -> Network {
    let p = preset("bay3").expect("bundled preset");
    let vertiports = p
        .vertiports
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut v = Vertiport::new(i, s.name.clone(), s.lat, s.lon);
            v.parking_capacity = capacity;
            v
        })
        .collect();
    Network::complete(vertiports, p.cruise_speed_kmh, RangeBounds::default()).expect("bundled preset is valid")
}

pub fn parse_scenario(text: &str) -> Result<Parsed<Scenario>, ConfigError> {
    let file: ScenarioFile = from_json(text)?;
    resolve(&file)
}

pub fn load_scenario(path: &std::path::Path) -> Result<Parsed<Scenario>, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Parse { path: path.display().to_string(), message: e.to_string() })?;
    parse_scenario(&text)
}

fn non_negative(path: &str, value: f64) -> Result<(), ConfigError> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::at(path, format!("must be non-negative and finite, got {value}")))
    }
}

/// Turns a parsed file into a validated scenario.
pub fn resolve(file: &ScenarioFile) -> Result<Parsed<Scenario>, ConfigError> {
    let mut warnings = Vec::new();
    if file.version != SCHEMA_VERSION {
        return Err(ConfigError::at("version", format!("unsupported version {}, expected {SCHEMA_VERSION}", file.version)));
    }
    let e = &file.engine;
    if !(e.horizon > 0.0) || !e.horizon.is_finite() {
        return Err(ConfigError::at("engine.horizon", format!("must be positive, got {}", e.horizon)));
    }
    for (name, v) in [
        ("turnaround_mean", e.turnaround_mean),
        ("turnaround_std", e.turnaround_std),
        ("takeoff_duration", e.takeoff_duration),
        ("landing_duration", e.landing_duration),
        ("arrival_separation", e.arrival_separation),
        ("departure_separation", e.departure_separation),
        ("taxi_in", e.taxi_in),
        ("taxi_out", e.taxi_out),
    ] {
        non_negative(&format!("engine.{name}"), v)?;
    }
    if file.fleet_size == 0 {
        return Err(ConfigError::at("fleet_size", "must be positive"));
    }

    let network = resolve_network(&file.network, e, file.fleet_size, &mut warnings)?;

    let d = &file.demand;
    let components = d.components.clone().unwrap_or_else(default_mixture);
    let mut demand = match d.kind {
        DemandKindName::Uniform => {
            if d.components.is_some() {
                return Err(ConfigError::at("demand.components", "only valid for gaussian_mixture demand"));
            }
            if d.per_origin.is_some() {
                return Err(ConfigError::at("demand.per_origin", "only valid for gaussian_mixture demand"));
            }
            DemandModel::uniform(d.rate_per_hour)
        }
        DemandKindName::GaussianMixture => DemandModel::gaussian_mixture(d.rate_per_hour, components),
    };
    demand.noise_fraction = d.noise_fraction;
    demand.od_weights = d.od_weights.clone();
    demand.per_origin = d.per_origin.clone();
    if demand.per_origin.is_some() && demand.od_weights.is_some() {
        return Err(ConfigError::at("demand.od_weights", "cannot be combined with per_origin"));
    }
    demand.validate(network.len()).map_err(|err| ConfigError::at("demand", err))?;

    let p = &file.policy;
    let policy = PolicyConfig {
        kind: p.kind,
        space_lookahead: p.space_lookahead,
        demand_lookahead: p.demand_lookahead,
        space_driven: p.space_driven,
        demand_driven: p.demand_driven,
        schedule_headways: p.schedule_headways.clone(),
    };
    policy.validate(&network).map_err(|err| ConfigError::at("policy", err))?;

    for (name, v) in file.cost_weights.named() {
        non_negative(&format!("cost_weights.{name}"), v)?;
    }
    if file.experiment.replications == 0 {
        return Err(ConfigError::at("experiment.replications", "must be at least 1"));
    }

    let scenario = Scenario {
        network,
        fleet_size: file.fleet_size,
        demand,
        policy,
        engine: EngineParams {
            horizon: e.horizon,
            turnaround_mean: e.turnaround_mean,
            turnaround_std: e.turnaround_std,
            takeoff_duration: e.takeoff_duration,
            landing_duration: e.landing_duration,
        },
        cost_weights: file.cost_weights,
        seed: 0,
        replications: file.experiment.replications,
    };
    scenario.validate().map_err(|err| match err {
        crate::engine::EngineError::FleetExceedsCapacity { .. } => ConfigError::at("fleet_size", err),
        other => ConfigError::at("", other),
    })?;
    Ok(Parsed { value: scenario, warnings })
}

fn resolve_network(
    s: &NetworkSection,
    e: &EngineSection,
    fleet: u32,
    warnings: &mut Vec<String>,
) -> Result<Network, ConfigError> {
    let (specs, preset_speed) = match (&s.preset, &s.vertiports) {
        (Some(_), Some(_)) => return Err(ConfigError::at("network", "give either preset or vertiports, not both")),
        (None, None) => return Err(ConfigError::at("network", "missing preset or vertiports")),
        (Some(name), None) => {
            let p = preset(name)?;
            (p.vertiports, Some(p.cruise_speed_kmh))
        }
        (None, Some(v)) => (v.clone(), None),
    };
    let n = specs.len();
    if n < 2 {
        return Err(ConfigError::at("network.vertiports", "need at least two vertiports"));
    }
    let speed = s.cruise_speed_kmh.or(preset_speed).unwrap_or(140.0);

    let given = specs.iter().filter(|v| v.parking_capacity.is_some()).count();
    if given != 0 && given != n {
        return Err(ConfigError::at("network.vertiports", "parking_capacity must be set on all vertiports or none"));
    }
    if given == n && s.capacities.is_some() {
        return Err(ConfigError::at("network.capacities", "capacities given both per vertiport and as a list"));
    }
    let explicit: Option<Vec<u32>> = match &s.capacities {
        Some(c) if c.len() != n => {
            return Err(ConfigError::at("network.capacities", format!("expected {n} entries, got {}", c.len())))
        }
        Some(c) => Some(c.clone()),
        None if given == n => Some(specs.iter().map(|v| v.parking_capacity.unwrap_or(0)).collect()),
        None => None,
    };
    if let Some(c_n) = s.normalized_capacity {
        if !(c_n > 0.0) || !c_n.is_finite() {
            return Err(ConfigError::at("network.normalized_capacity", format!("must be positive, got {c_n}")));
        }
    }
    let capacities = match (explicit, s.normalized_capacity) {
        (Some(c), Some(c_n)) => {
            let msg = format!("network.normalized_capacity = {c_n} ignored: explicit capacities take precedence");
            log::warn!("{msg}");
            warnings.push(msg);
            c
        }
        (Some(c), None) => c,
        (None, c_n) => vec![size_vertiports(c_n.unwrap_or(DEFAULT_NORMALIZED_CAPACITY), fleet, n); n],
    };

    let mut vertiports = Vec::with_capacity(n);
    for (i, sp) in specs.iter().enumerate() {
        let mut v = Vertiport::new(i, sp.name.clone(), sp.lat, sp.lon);
        v.parking_capacity = capacities[i];
        v.arrival_separation = sp.arrival_separation.unwrap_or(e.arrival_separation);
        v.departure_separation = sp.departure_separation.unwrap_or(e.departure_separation);
        v.taxi_in = sp.taxi_in.unwrap_or(e.taxi_in);
        v.taxi_out = sp.taxi_out.unwrap_or(e.taxi_out);
        vertiports.push(v);
    }
    let range = s.range_km.unwrap_or_default();
    let built = match &s.routes {
        None => Network::complete(vertiports, speed, range),
        Some(pairs) => {
            let mut routes = Vec::with_capacity(pairs.len());
            for (k, &[o, d]) in pairs.iter().enumerate() {
                if o >= n || d >= n {
                    return Err(ConfigError::at(format!("network.routes[{k}]"), "unknown vertiport index"));
                }
                let distance_km =
                    crate::network::great_circle_distance(vertiports[o].position(), vertiports[d].position());
                routes.push(Route { origin: o, dest: d, distance_km });
            }
            Network::new(vertiports, routes, speed, range)
        }
    };
    built.map_err(|err| ConfigError::at("network", err))
}

/// Writes a resolved scenario back out with every default made explicit.
pub fn emit_scenario(scenario: &Scenario) -> ScenarioFile {
    let net = &scenario.network;
    let d = &scenario.demand;
    let n = net.len();
    let complete = net.routes().len() == n * (n - 1)
        && net.routes().iter().enumerate().all(|(k, r)| {
            let (o, i) = (k / (n - 1), k % (n - 1));
            r.origin == o && r.dest == if i >= o { i + 1 } else { i }
        });
    let (kind, components) = match &d.profile {
        RateProfile::Uniform { .. } => (DemandKindName::Uniform, None),
        RateProfile::GaussianMixture { components, .. } => (DemandKindName::GaussianMixture, Some(components.clone())),
    };
    debug_assert_eq!(d.kind() == DemandKind::Uniform, kind == DemandKindName::Uniform);
    ScenarioFile {
        version: SCHEMA_VERSION,
        network: NetworkSection {
            preset: None,
            vertiports: Some(
                net.vertiports()
                    .iter()
                    .map(|v| VertiportSpec {
                        name: v.name.clone(),
                        lat: v.lat,
                        lon: v.lon,
                        parking_capacity: Some(v.parking_capacity),
                        arrival_separation: Some(v.arrival_separation),
                        departure_separation: Some(v.departure_separation),
                        taxi_in: Some(v.taxi_in),
                        taxi_out: Some(v.taxi_out),
                    })
                    .collect(),
            ),
            cruise_speed_kmh: Some(net.cruise_speed_kmh()),
            range_km: None,
            routes: (!complete).then(|| net.routes().iter().map(|r| [r.origin, r.dest]).collect()),
            normalized_capacity: None,
            capacities: None,
        },
        fleet_size: scenario.fleet_size,
        demand: DemandSection {
            kind,
            rate_per_hour: d.level(),
            components,
            noise_fraction: d.noise_fraction,
            od_weights: d.od_weights.clone(),
            per_origin: d.per_origin.clone(),
        },
        policy: PolicySection::from(&scenario.policy),
        engine: EngineSection {
            horizon: scenario.engine.horizon,
            turnaround_mean: scenario.engine.turnaround_mean,
            turnaround_std: scenario.engine.turnaround_std,
            takeoff_duration: scenario.engine.takeoff_duration,
            landing_duration: scenario.engine.landing_duration,
            ..EngineSection::default()
        },
        cost_weights: scenario.cost_weights,
        experiment: ExperimentSection { replications: scenario.replications },
    }
}

pub fn emit_scenario_json(scenario: &Scenario) -> String {
    serde_json::to_string_pretty(&emit_scenario(scenario)).expect("scenario serializes")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    pub version: u32,
    pub scenario: ScenarioFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fleet_values: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cn_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replications: Option<u32>,
}

/// Parses a grid file; the base seed is supplied by the caller.
pub fn parse_grid(text: &str, base_seed: u64) -> Result<Parsed<GridSpec>, ConfigError> {
    let file: GridFile = from_json(text)?;
    if file.version != SCHEMA_VERSION {
        return Err(ConfigError::at("version", format!("unsupported version {}, expected {SCHEMA_VERSION}", file.version)));
    }
    let Parsed { value: template, warnings } = resolve(&file.scenario).map_err(|err| match err {
        ConfigError::Constraint { path, message } => ConfigError::Constraint { path: format!("scenario.{path}"), message },
        other => other,
    })?;
    let mut spec = GridSpec::new(template, base_seed);
    if let Some(f) = file.fleet_values {
        spec.fleet_values = f;
    }
    if let Some(c) = file.cn_values {
        spec.cn_values = c;
    }
    if let Some(r) = file.replications {
        spec.replications = r;
    }
    spec.validate().map_err(|err| ConfigError::at("", err))?;
    Ok(Parsed { value: spec, warnings })
}
