//! Static vertiport network: locations, directed routes, travel times and
//! parking-capacity sizing.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius used by the haversine distance, in km.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Index of a vertiport within its [`Network`].
pub type VertiportId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("no route from vertiport {origin} to vertiport {dest}")]
    UnknownRoute { origin: VertiportId, dest: VertiportId },
    #[error("route endpoint references unknown vertiport {0}")]
    UnknownVertiport(VertiportId),
    #[error("fleet size must be positive")]
    ZeroFleet,
    #[error("vertiport {name}: coordinate ({lat}, {lon}) out of range")]
    InvalidCoordinate { name: String, lat: f64, lon: f64 },
    #[error("route {0} -> {0} is a self loop")]
    SelfLoop(VertiportId),
    #[error("route {origin} -> {dest}: distance {distance} km must be positive")]
    NonPositiveDistance { origin: VertiportId, dest: VertiportId, distance: f64 },
    #[error("route {origin} -> {dest}: distance {distance} km outside vehicle range [{min}, {max}]")]
    OutOfRange { origin: VertiportId, dest: VertiportId, distance: f64, min: f64, max: f64 },
    #[error("cruise speed must be positive, got {0}")]
    InvalidSpeed(f64),
    #[error("vertiport {0}: only a single approach and a single departure fix are supported")]
    MultipleFixes(String),
    #[error("vertiport {name}: {field} must be non-negative")]
    NegativeDuration { name: String, field: &'static str },
    #[error("network needs at least two vertiports")]
    TooFewVertiports,
}

/// A latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        (-90.0..=90.0).contains(&self.lat) && (-180.0..=180.0).contains(&self.lon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vertiport {
    pub id: VertiportId,
    pub name: String,
    pub lat: f64,
    pub lon: f64,
    /// Ground slots for idle, turnaround and ground-holding aircraft.
    pub parking_capacity: u32,
    pub n_approach_fixes: u32,
    pub n_departure_fixes: u32,
    /// Minimum spacing between successive landing clearances, minutes.
    pub arrival_separation: f64,
    /// Minimum spacing between successive takeoff clearances, minutes.
    pub departure_separation: f64,
    pub taxi_in: f64,
    pub taxi_out: f64,
}

impl Vertiport {
    pub fn new(id: VertiportId, name: impl Into<String>, lat: f64, lon: f64) -> Self {
        Self {
            id,
            name: name.into(),
            lat,
            lon,
            parking_capacity: 0,
            n_approach_fixes: 1,
            n_departure_fixes: 1,
            arrival_separation: 1.5,
            departure_separation: 1.5,
            taxi_in: 0.0,
            taxi_out: 0.0,
        }
    }

    pub fn position(&self) -> LatLon {
        LatLon::new(self.lat, self.lon)
    }

    fn validate(&self) -> Result<(), NetworkError> {
        if !self.position().is_valid() {
            return Err(NetworkError::InvalidCoordinate {
                name: self.name.clone(),
                lat: self.lat,
                lon: self.lon,
            });
        }
        if self.n_approach_fixes != 1 || self.n_departure_fixes != 1 {
            return Err(NetworkError::MultipleFixes(self.name.clone()));
        }
        for (field, value) in [
            ("arrival_separation", self.arrival_separation),
            ("departure_separation", self.departure_separation),
            ("taxi_in", self.taxi_in),
            ("taxi_out", self.taxi_out),
        ] {
            if !(value >= 0.0) {
                return Err(NetworkError::NegativeDuration { name: self.name.clone(), field });
            }
        }
        Ok(())
    }
}

/// A directed route between two vertiports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub origin: VertiportId,
    pub dest: VertiportId,
    pub distance_km: f64,
}

/// Inclusive bounds on route length imposed by vehicle range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeBounds {
    pub min_km: f64,
    pub max_km: f64,
}

impl Default for RangeBounds {
    fn default() -> Self {
        Self { min_km: 0.0, max_km: 250.0 }
    }
}

/// Vertiports plus the directed routes between them. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    vertiports: Vec<Vertiport>,
    routes: Vec<Route>,
    cruise_speed_kmh: f64,
    route_index: HashMap<(VertiportId, VertiportId), usize>,
}

impl Network {
    pub fn new(
        vertiports: Vec<Vertiport>,
        routes: Vec<Route>,
        cruise_speed_kmh: f64,
        range: RangeBounds,
    ) -> Result<Self, NetworkError> {
        if vertiports.len() < 2 {
            return Err(NetworkError::TooFewVertiports);
        }
        if !(cruise_speed_kmh > 0.0) || !cruise_speed_kmh.is_finite() {
            return Err(NetworkError::InvalidSpeed(cruise_speed_kmh));
        }
        let mut vertiports = vertiports;
        for (i, v) in vertiports.iter_mut().enumerate() {
            v.id = i;
            v.validate()?;
        }
        let mut route_index = HashMap::with_capacity(routes.len());
        for (i, r) in routes.iter().enumerate() {
            for end in [r.origin, r.dest] {
                if end >= vertiports.len() {
                    return Err(NetworkError::UnknownVertiport(end));
                }
            }
            if r.origin == r.dest {
                return Err(NetworkError::SelfLoop(r.origin));
            }
            if !(r.distance_km > 0.0) {
                return Err(NetworkError::NonPositiveDistance {
                    origin: r.origin,
                    dest: r.dest,
                    distance: r.distance_km,
                });
            }
            if r.distance_km < range.min_km || r.distance_km > range.max_km {
                return Err(NetworkError::OutOfRange {
                    origin: r.origin,
                    dest: r.dest,
                    distance: r.distance_km,
                    min: range.min_km,
                    max: range.max_km,
                });
            }
            route_index.insert((r.origin, r.dest), i);
        }
        Ok(Self { vertiports, routes, cruise_speed_kmh, route_index })
    }

    /// Builds the complete directed graph over `vertiports`, with haversine
    /// route lengths.
    pub fn complete(
        vertiports: Vec<Vertiport>,
        cruise_speed_kmh: f64,
        range: RangeBounds,
    ) -> Result<Self, NetworkError> {
        let n = vertiports.len();
        let routes = (0..n)
            .flat_map(|o| (0..n).filter(move |&d| d != o).map(move |d| (o, d)))
            .map(|(origin, dest)| Route {
                origin,
                dest,
                distance_km: great_circle_distance(
                    vertiports[origin].position(),
                    vertiports[dest].position(),
                ),
            })
            .collect();
        Self::new(vertiports, routes, cruise_speed_kmh, range)
    }

    pub fn vertiports(&self) -> &[Vertiport] {
        &self.vertiports
    }

    pub fn vertiport(&self, id: VertiportId) -> &Vertiport {
        &self.vertiports[id]
    }

    pub fn len(&self) -> usize {
        self.vertiports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertiports.is_empty()
    }

    pub fn routes(&self) -> &[Route] {
        &self.routes
    }

    pub fn cruise_speed_kmh(&self) -> f64 {
        self.cruise_speed_kmh
    }

    pub fn route(&self, origin: VertiportId, dest: VertiportId) -> Result<&Route, NetworkError> {
        self.route_index
            .get(&(origin, dest))
            .map(|&i| &self.routes[i])
            .ok_or(NetworkError::UnknownRoute { origin, dest })
    }

    pub fn has_route(&self, origin: VertiportId, dest: VertiportId) -> bool {
        self.route_index.contains_key(&(origin, dest))
    }

    /// En-route time in minutes at the network cruise speed.
    pub fn travel_time(&self, origin: VertiportId, dest: VertiportId) -> Result<f64, NetworkError> {
        let route = self.route(origin, dest)?;
        Ok(route.distance_km / self.cruise_speed_kmh * 60.0)
    }

    /// Straight-line distance between two vertiports, whether or not a route
    /// connects them.
    pub fn distance(&self, a: VertiportId, b: VertiportId) -> f64 {
        great_circle_distance(self.vertiports[a].position(), self.vertiports[b].position())
    }

    pub fn total_capacity(&self) -> u64 {
        self.vertiports.iter().map(|v| v.parking_capacity as u64).sum()
    }

    /// Returns a copy with every vertiport's parking capacity replaced.
    pub fn with_capacities(&self, capacities: &[u32]) -> Self {
        assert_eq!(capacities.len(), self.vertiports.len());
        let mut out = self.clone();
        for (v, &c) in out.vertiports.iter_mut().zip(capacities) {
            v.parking_capacity = c;
        }
        out
    }

    /// Returns a copy where every vertiport gets the same capacity.
    pub fn with_uniform_capacity(&self, capacity: u32) -> Self {
        self.with_capacities(&vec![capacity; self.vertiports.len()])
    }

    /// Returns a copy with a different cruise speed.
    pub fn with_cruise_speed(&self, cruise_speed_kmh: f64) -> Result<Self, NetworkError> {
        if !(cruise_speed_kmh > 0.0) || !cruise_speed_kmh.is_finite() {
            return Err(NetworkError::InvalidSpeed(cruise_speed_kmh));
        }
        let mut out = self.clone();
        out.cruise_speed_kmh = cruise_speed_kmh;
        Ok(out)
    }

    pub fn mean_route_distance(&self) -> f64 {
        self.routes.iter().map(|r| r.distance_km).sum::<f64>() / self.routes.len() as f64
    }
}

/// Haversine distance in km.
pub fn great_circle_distance(a: LatLon, b: LatLon) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Total parking capacity divided by fleet size.
pub fn normalized_capacity(total_capacity: u64, fleet_size: u32) -> Result<f64, NetworkError> {
    if fleet_size == 0 {
        return Err(NetworkError::ZeroFleet);
    }
    Ok(total_capacity as f64 / fleet_size as f64)
}

/// Per-vertiport capacity for an even split of `c_n * fleet_size` slots,
/// rounded up so the network never falls short of the requested ratio.
pub fn size_vertiports(c_n: f64, fleet_size: u32, n_vertiports: usize) -> u32 {
    assert!(c_n > 0.0 && fleet_size > 0 && n_vertiports > 0);
    let per = c_n * fleet_size as f64 / n_vertiports as f64;
    // Grid values like 1.2 * 15 carry representation error just above an integer.
    (per - 1e-9).ceil().max(0.0) as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const SFO: LatLon = LatLon { lat: 37.6213, lon: -122.3790 };
    const OAK: LatLon = LatLon { lat: 37.7126, lon: -122.2197 };
    const SJC: LatLon = LatLon { lat: 37.3639, lon: -121.9289 };

    fn bay() -> Network {
        let v = vec![
            Vertiport::new(0, "SFO", SFO.lat, SFO.lon),
            Vertiport::new(1, "OAK", OAK.lat, OAK.lon),
            Vertiport::new(2, "SJC", SJC.lat, SJC.lon),
        ];
        Network::complete(v, 140.0, RangeBounds::default()).unwrap()
    }

    #[test]
    fn haversine_airport_pairs() {
        assert_eq!(great_circle_distance(SFO, SFO), 0.0);
        // Reference values from an independent haversine evaluation.
        assert_abs_diff_eq!(great_circle_distance(SFO, OAK), 17.310876, epsilon = 1e-4);
        assert_abs_diff_eq!(great_circle_distance(SFO, SJC), 48.949931, epsilon = 1e-4);
        assert_abs_diff_eq!(great_circle_distance(OAK, SJC), 46.484592, epsilon = 1e-4);
    }

    #[test]
    fn travel_times() {
        let net = bay();
        assert_abs_diff_eq!(net.travel_time(0, 2).unwrap(), 20.978542, epsilon = 1e-4);
        assert_abs_diff_eq!(net.travel_time(0, 1).unwrap(), 7.418947, epsilon = 1e-4);
        assert!(matches!(net.travel_time(0, 0), Err(NetworkError::UnknownRoute { .. })));

        let v = vec![Vertiport::new(0, "A", 0.0, 0.0), Vertiport::new(1, "B", 0.0, 1.0)];
        let routes = vec![Route { origin: 0, dest: 1, distance_km: 140.0 }];
        let net = Network::new(v, routes, 140.0, RangeBounds::default()).unwrap();
        assert_eq!(net.travel_time(0, 1).unwrap(), 60.0);
        assert!(net.travel_time(1, 0).is_err());
    }

    #[test]
    fn bay_mean_route() {
        let net = bay();
        assert_eq!(net.routes().len(), 6);
        assert!((net.mean_route_distance() - 37.6).abs() < 0.5);
        let mean_min = net.mean_route_distance() / 140.0 * 60.0;
        assert_abs_diff_eq!(mean_min, 16.106486, epsilon = 1e-4);
    }

    #[test]
    fn normalized_capacity_ratio() {
        assert_eq!(normalized_capacity(36, 36).unwrap(), 1.0);
        assert_eq!(normalized_capacity(72, 36).unwrap(), 2.0);
        assert_eq!(normalized_capacity(54, 36).unwrap(), 1.5);
        assert_eq!(normalized_capacity(10, 0), Err(NetworkError::ZeroFleet));
    }

    #[test]
    fn sizing() {
        assert_eq!(size_vertiports(1.0, 36, 3), 12);
        assert_eq!(size_vertiports(2.0, 36, 3), 24);
        assert_eq!(size_vertiports(1.1, 36, 3), 14);
        assert_eq!(size_vertiports(1.2, 15, 3), 6);
    }

    #[test]
    fn sizing_covers_search_grid() {
        for f in (15..=60).step_by(3) {
            for k in 0..=20 {
                let c_n = (10 + k) as f64 / 10.0;
                let per = size_vertiports(c_n, f, 3);
                assert!(per as f64 * 3.0 >= (c_n * f as f64).round(), "f={f} c_n={c_n}");
                // Never more than one extra slot per vertiport.
                assert!((per as f64 - 1.0) * 3.0 < c_n * f as f64 + 1e-6);
            }
        }
    }

    #[test]
    fn rejects_bad_networks() {
        let mut v = vec![Vertiport::new(0, "A", 95.0, 0.0), Vertiport::new(1, "B", 0.0, 1.0)];
        assert!(matches!(
            Network::complete(v.clone(), 140.0, RangeBounds::default()),
            Err(NetworkError::InvalidCoordinate { .. })
        ));
        v[0].lat = 0.0;
        let self_loop = vec![Route { origin: 1, dest: 1, distance_km: 3.0 }];
        assert_eq!(
            Network::new(v.clone(), self_loop, 140.0, RangeBounds::default()),
            Err(NetworkError::SelfLoop(1))
        );
        let dangling = vec![Route { origin: 0, dest: 4, distance_km: 3.0 }];
        assert_eq!(
            Network::new(v.clone(), dangling, 140.0, RangeBounds::default()),
            Err(NetworkError::UnknownVertiport(4))
        );
        let far = RangeBounds { min_km: 0.0, max_km: 50.0 };
        assert!(matches!(Network::complete(v.clone(), 140.0, far), Err(NetworkError::OutOfRange { .. })));
        v[1].n_approach_fixes = 2;
        assert!(matches!(
            Network::complete(v, 140.0, RangeBounds::default()),
            Err(NetworkError::MultipleFixes(_))
        ));
    }

    fn coord() -> impl Strategy<Value = LatLon> {
        (-89.0f64..89.0, -179.0f64..179.0).prop_map(|(lat, lon)| LatLon::new(lat, lon))
    }

    proptest! {
        #[test]
        fn haversine_is_a_metric(a in coord(), b in coord(), c in coord()) {
            let ab = great_circle_distance(a, b);
            let ba = great_circle_distance(b, a);
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() < 1e-9);
            let ac = great_circle_distance(a, c);
            let cb = great_circle_distance(c, b);
            prop_assert!(ab <= ac + cb + 1e-6);
        }
    }
}
