//! Stochastic request generation.
//!
//! Arrivals follow a nonhomogeneous Poisson process sampled by thinning
//! against a constant envelope. The instantaneous rate is either constant or
//! a scaled Gaussian mixture over the hour of day, multiplied by mean-one
//! uniform noise that is redrawn every [`NOISE_INTERVAL_MIN`] minutes.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::VertiportId;
use crate::rng::{self, Stream};

/// Length of one noise interval, minutes.
pub const NOISE_INTERVAL_MIN: f64 = 15.0;
/// Resolution of the grid scan that locates the mixture maximum, hours.
pub const PEAK_SCAN_STEP_H: f64 = 0.01;

pub type RequestId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DemandError {
    #[error("demand rate must be non-negative and finite, got {0}")]
    InvalidRate(f64),
    #[error("mixture component std must be positive, got {0}")]
    NonPositiveStd(f64),
    #[error("mixture component weight must be non-negative, got {0}")]
    NegativeWeight(f64),
    #[error("noise fraction must lie in [0, 1], got {0}")]
    InvalidNoise(f64),
    #[error("od weight {origin} -> {dest} is invalid: {reason}")]
    InvalidOdWeight { origin: VertiportId, dest: VertiportId, reason: &'static str },
    #[error("od weights sum to zero")]
    ZeroOdWeights,
    #[error("expected one mixture per vertiport ({expected}), got {got}")]
    MixtureCount { expected: usize, got: usize },
    #[error("peak normalization requires a Gaussian mixture demand model")]
    NotMixture,
    #[error("horizon must be positive, got {0}")]
    NonPositiveHorizon(f64),
    #[error("need at least two vertiports to generate requests")]
    TooFewVertiports,
}

/// One travel request: the unit of throughput.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: RequestId,
    /// Submission time, minutes since simulation start.
    pub t_submit: f64,
    pub origin: VertiportId,
    pub dest: VertiportId,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub mean_hour: f64,
    pub std_hour: f64,
    pub weight: f64,
}

impl MixtureComponent {
    pub fn new(mean_hour: f64, std_hour: f64, weight: f64) -> Self {
        Self { mean_hour, std_hour, weight }
    }
}

/// Morning peak, broad midday hump, evening peak; equal weights.
pub fn default_mixture() -> Vec<MixtureComponent> {
    vec![
        MixtureComponent::new(8.0, 2.0, 1.0),
        MixtureComponent::new(12.0, 8.0, 1.0),
        MixtureComponent::new(16.0, 2.0, 1.0),
    ]
}

/// Weighted sum of normal densities at hour `t`.
pub fn mixture_density(components: &[MixtureComponent], t: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    components
        .iter()
        .map(|c| {
            let z = (t - c.mean_hour) / c.std_hour;
            c.weight * INV_SQRT_2PI / c.std_hour * (-0.5 * z * z).exp()
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DemandKind {
    Uniform,
    GaussianMixture,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RateProfile {
    Uniform { rate_per_hour: f64 },
    GaussianMixture { peak_rate_per_hour: f64, components: Vec<MixtureComponent> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdWeight {
    pub origin: VertiportId,
    pub dest: VertiportId,
    pub weight: f64,
}

/// Network-wide demand description.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandModel {
    pub profile: RateProfile,
    pub noise_fraction: f64,
    /// OD sampling weights; `None` means uniform over all directed pairs.
    pub od_weights: Option<Vec<OdWeight>>,
    /// Per-origin mixtures for geographically imbalanced demand. When set,
    /// origins follow their own time profile and destinations are uniform.
    pub per_origin: Option<Vec<Vec<MixtureComponent>>>,
}

impl DemandModel {
    pub fn uniform(rate_per_hour: f64) -> Self {
        Self {
            profile: RateProfile::Uniform { rate_per_hour },
            noise_fraction: 0.25,
            od_weights: None,
            per_origin: None,
        }
    }

    pub fn gaussian_mixture(peak_rate_per_hour: f64, components: Vec<MixtureComponent>) -> Self {
        Self {
            profile: RateProfile::GaussianMixture { peak_rate_per_hour, components },
            noise_fraction: 0.25,
            od_weights: None,
            per_origin: None,
        }
    }

    pub fn with_noise(mut self, noise_fraction: f64) -> Self {
        self.noise_fraction = noise_fraction;
        self
    }

    pub fn kind(&self) -> DemandKind {
        match self.profile {
            RateProfile::Uniform { .. } => DemandKind::Uniform,
            RateProfile::GaussianMixture { .. } => DemandKind::GaussianMixture,
        }
    }

    /// Base rate (uniform) or peak rate (mixture), requests per hour.
    pub fn level(&self) -> f64 {
        match self.profile {
            RateProfile::Uniform { rate_per_hour } => rate_per_hour,
            RateProfile::GaussianMixture { peak_rate_per_hour, .. } => peak_rate_per_hour,
        }
    }

    /// Same shape at a different base/peak rate.
    pub fn with_level(mut self, level: f64) -> Self {
        match &mut self.profile {
            RateProfile::Uniform { rate_per_hour } => *rate_per_hour = level,
            RateProfile::GaussianMixture { peak_rate_per_hour, .. } => *peak_rate_per_hour = level,
        }
        self
    }

    pub fn validate(&self, n_vertiports: usize) -> Result<(), DemandError> {
        let level = self.level();
        if !(level >= 0.0) || !level.is_finite() {
            return Err(DemandError::InvalidRate(level));
        }
        let check = |cs: &[MixtureComponent]| -> Result<(), DemandError> {
            for c in cs {
                if !(c.std_hour > 0.0) {
                    return Err(DemandError::NonPositiveStd(c.std_hour));
                }
                if !(c.weight >= 0.0) {
                    return Err(DemandError::NegativeWeight(c.weight));
                }
            }
            Ok(())
        };
        if let RateProfile::GaussianMixture { components, .. } = &self.profile {
            check(components)?;
        }
        if !(0.0..=1.0).contains(&self.noise_fraction) {
            return Err(DemandError::InvalidNoise(self.noise_fraction));
        }
        if let Some(ws) = &self.od_weights {
            for w in ws {
                let reason = if w.origin >= n_vertiports || w.dest >= n_vertiports {
                    Some("unknown vertiport")
                } else if w.origin == w.dest {
                    Some("origin equals destination")
                } else if !(w.weight >= 0.0) || !w.weight.is_finite() {
                    Some("weight must be non-negative")
                } else {
                    None
                };
                if let Some(reason) = reason {
                    return Err(DemandError::InvalidOdWeight { origin: w.origin, dest: w.dest, reason });
                }
            }
            if ws.iter().map(|w| w.weight).sum::<f64>() <= 0.0 {
                return Err(DemandError::ZeroOdWeights);
            }
        }
        if let Some(per) = &self.per_origin {
            if per.len() != n_vertiports {
                return Err(DemandError::MixtureCount { expected: n_vertiports, got: per.len() });
            }
            for cs in per {
                check(cs)?;
            }
        }
        Ok(())
    }

    /// Precomputes the peak normalization.
    pub fn curve(&self) -> RateCurve<'_> {
        let scale = match (&self.profile, &self.per_origin) {
            (RateProfile::Uniform { .. }, None) => 1.0,
            (_, Some(per)) => {
                let n = per.len() as f64;
                let max = scan_max(|t| per.iter().map(|cs| mixture_density(cs, t)).sum::<f64>() / n).1;
                if max > 0.0 {
                    self.level() / max
                } else {
                    0.0
                }
            }
            (RateProfile::GaussianMixture { peak_rate_per_hour, components }, None) => {
                let max = scan_max(|t| mixture_density(components, t)).1;
                if max > 0.0 {
                    peak_rate_per_hour / max
                } else {
                    0.0
                }
            }
        };
        RateCurve { model: self, scale }
    }

    /// Mean expected requests per hour on every directed pair over
    /// `[0, horizon_min)`, noise excluded (it is mean-one).
    pub fn mean_route_rates(&self, n_vertiports: usize, horizon_min: f64) -> Vec<((VertiportId, VertiportId), f64)> {
        let curve = self.curve();
        let steps = horizon_min.ceil().max(1.0) as usize;
        let dt = horizon_min / steps as f64;
        let hour = |k: usize| ((k as f64 + 0.5) * dt / 60.0) % 24.0;
        let mut out = Vec::new();
        match &self.per_origin {
            Some(_) => {
                for o in 0..n_vertiports {
                    let mean = (0..steps).map(|k| curve.origin_rate(o, hour(k)).unwrap_or(0.0)).sum::<f64>() / steps as f64;
                    for d in (0..n_vertiports).filter(|&d| d != o) {
                        out.push(((o, d), mean / (n_vertiports - 1) as f64));
                    }
                }
            }
            None => {
                let mean_total = (0..steps).map(|k| curve.total(hour(k))).sum::<f64>() / steps as f64;
                let pairs = od_table(self.od_weights.as_deref(), n_vertiports);
                let sum: f64 = pairs.iter().map(|p| p.2).sum();
                for (o, d, w) in pairs {
                    out.push(((o, d), mean_total * w / sum));
                }
            }
        }
        out
    }
}

/// Rate function with its peak normalization resolved.
#[derive(Debug, Clone, Copy)]
pub struct RateCurve<'a> {
    model: &'a DemandModel,
    scale: f64,
}

impl RateCurve<'_> {
    /// Total network rate (requests/hour) at hour-of-day `t`, before noise.
    pub fn total(&self, t: f64) -> f64 {
        match (&self.model.profile, &self.model.per_origin) {
            (RateProfile::Uniform { rate_per_hour }, None) => *rate_per_hour,
            (_, Some(per)) => {
                self.scale * per.iter().map(|cs| mixture_density(cs, t)).sum::<f64>() / per.len() as f64
            }
            (RateProfile::GaussianMixture { components, .. }, None) => self.scale * mixture_density(components, t),
        }
    }

    /// Rate of requests originating at `origin` for per-origin models;
    /// `None` for models sharing one profile across origins.
    pub fn origin_rate(&self, origin: VertiportId, t: f64) -> Option<f64> {
        self.model
            .per_origin
            .as_ref()
            .map(|per| self.scale * mixture_density(&per[origin], t) / per.len() as f64)
    }

    /// Largest value of [`Self::total`] over the day, found by grid scan.
    pub fn max_total(&self) -> f64 {
        match (&self.model.profile, &self.model.per_origin) {
            (RateProfile::Uniform { rate_per_hour }, None) => *rate_per_hour,
            _ => scan_max(|t| self.total(t)).1,
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

/// (argmax, max) of `f` over `[0, 24)` on the fixed scan grid.
pub fn scan_max(f: impl Fn(f64) -> f64) -> (f64, f64) {
    let steps = (24.0 / PEAK_SCAN_STEP_H).round() as usize;
    (0..steps)
        .map(|k| {
            let t = k as f64 * PEAK_SCAN_STEP_H;
            (t, f(t))
        })
        .fold((0.0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
}

/// Total pre-noise request rate at hour-of-day `t`.
pub fn rate_at(model: &DemandModel, t: f64) -> f64 {
    model.curve().total(t)
}

/// Scale factor mapping mixture density to requests/hour so that the daily
/// maximum equals the model's peak rate.
pub fn peak_normalizer(model: &DemandModel) -> Result<f64, DemandError> {
    match model.profile {
        RateProfile::GaussianMixture { .. } => Ok(model.curve().scale()),
        RateProfile::Uniform { .. } => Err(DemandError::NotMixture),
    }
}

/// Geographically imbalanced variant: one mixture per origin vertiport.
/// Mixture weights act as relative heights between origins.
pub fn imbalance(
    model: &DemandModel,
    per_vertiport: Vec<Vec<MixtureComponent>>,
    n_vertiports: usize,
) -> Result<DemandModel, DemandError> {
    if per_vertiport.len() != n_vertiports {
        return Err(DemandError::MixtureCount { expected: n_vertiports, got: per_vertiport.len() });
    }
    let shared = match &model.profile {
        RateProfile::GaussianMixture { components, .. } => components.clone(),
        RateProfile::Uniform { .. } => Vec::new(),
    };
    let out = DemandModel {
        profile: RateProfile::GaussianMixture { peak_rate_per_hour: model.level(), components: shared },
        noise_fraction: model.noise_fraction,
        od_weights: None,
        per_origin: Some(per_vertiport),
    };
    out.validate(n_vertiports)?;
    Ok(out)
}

fn od_table(weights: Option<&[OdWeight]>, n_vertiports: usize) -> Vec<(VertiportId, VertiportId, f64)> {
    match weights {
        Some(ws) => ws.iter().map(|w| (w.origin, w.dest, w.weight)).collect(),
        None => (0..n_vertiports)
            .flat_map(|o| (0..n_vertiports).filter(move |&d| d != o).map(move |d| (o, d, 1.0)))
            .collect(),
    }
}

/// Samples the request stream for `[0, horizon_min)`.
///
/// Arrival times and OD pairs come from the demand stream of `seed`, the
/// interval noise from its noise stream, so changing the noise level never
/// shifts the candidate arrival sequence.
pub fn generate_requests(
    model: &DemandModel,
    n_vertiports: usize,
    horizon_min: f64,
    seed: u64,
) -> Result<Vec<Request>, DemandError> {
    if !(horizon_min > 0.0) {
        return Err(DemandError::NonPositiveHorizon(horizon_min));
    }
    if n_vertiports < 2 {
        return Err(DemandError::TooFewVertiports);
    }
    model.validate(n_vertiports)?;

    let curve = model.curve();
    let nf = model.noise_fraction;
    let envelope_per_hour = curve.max_total() * (1.0 + nf);
    if envelope_per_hour <= 0.0 {
        return Ok(Vec::new());
    }

    let mut noise_rng = rng::stream(seed, Stream::Noise);
    let n_intervals = (horizon_min / NOISE_INTERVAL_MIN).ceil() as usize;
    let noise: Vec<f64> = (0..n_intervals)
        .map(|_| if nf > 0.0 { noise_rng.random_range(1.0 - nf..=1.0 + nf) } else { 1.0 })
        .collect();

    let mut rng = rng::stream(seed, Stream::Demand);
    let gap = Exp::new(envelope_per_hour / 60.0).expect("positive envelope");

    let pairs = od_table(model.od_weights.as_deref(), n_vertiports);
    let pair_index = match model.per_origin {
        None => Some(WeightedIndex::new(pairs.iter().map(|p| p.2)).map_err(|_| DemandError::ZeroOdWeights)?),
        Some(_) => None,
    };
    let mut origin_rates = vec![0.0; n_vertiports];

    let mut out = Vec::new();
    let mut t = 0.0;
    loop {
        t += gap.sample(&mut rng);
        if t >= horizon_min {
            break;
        }
        let hour = (t / 60.0) % 24.0;
        let k = ((t / NOISE_INTERVAL_MIN) as usize).min(n_intervals - 1);
        let rate = curve.total(hour) * noise[k];
        let accept: f64 = rng.random();
        if accept * envelope_per_hour >= rate {
            continue;
        }
        let (origin, dest) = match &pair_index {
            Some(idx) => {
                let p = pairs[idx.sample(&mut rng)];
                (p.0, p.1)
            }
            None => {
                for (v, r) in origin_rates.iter_mut().enumerate() {
                    *r = curve.origin_rate(v, hour).unwrap_or(0.0);
                }
                let origin = match WeightedIndex::new(&origin_rates) {
                    Ok(idx) => idx.sample(&mut rng),
                    Err(_) => continue,
                };
                let mut dest = rng.random_range(0..n_vertiports - 1);
                if dest >= origin {
                    dest += 1;
                }
                (origin, dest)
            }
        };
        out.push(Request { id: out.len(), t_submit: t, origin, dest });
    }
    Ok(out)
}
