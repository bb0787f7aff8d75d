//! Radio network model: APs, locations, neighbourhoods and effective link
//! capacities.
//!
//! Capacities are stored already multiplied by the packet-size reciprocal
//! `omega`, so `service_rate(j, i)` is in packets per second and every load
//! computation divides demand by it directly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distances below this are clamped before applying the path-loss exponent.
pub const MIN_DISTANCE: f64 = 1.0;

/// Downlink rate `W log2(1 + G P / (W N0 + sum G_k P_k))` in bits per second.
///
/// `interferers` holds `(gain, power)` pairs of every other transmitter heard
/// at the receiver. Powers are in watts and `noise_density` in W/Hz.
pub fn shannon_rate(
    signal_gain: f64,
    own_power: f64,
    interferers: &[(f64, f64)],
    bandwidth: f64,
    noise_density: f64,
) -> Result<f64> {
    if !bandwidth.is_finite() || bandwidth <= 0.0 {
        return Err(Error::Domain(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let nonneg = |name: &str, v: f64| {
        if v >= 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!("{name} must be non-negative, got {v}")))
        }
    };
    nonneg("signal gain", signal_gain)?;
    nonneg("transmit power", own_power)?;
    nonneg("noise density", noise_density)?;
    let mut interference = 0.0;
    for &(g, p) in interferers {
        nonneg("interferer gain", g)?;
        nonneg("interferer power", p)?;
        interference += g * p;
    }
    let denominator = bandwidth * noise_density + interference;
    let signal = signal_gain * own_power;
    if signal == 0.0 {
        return Ok(0.0);
    }
    if denominator == 0.0 {
        return Err(Error::Domain(
            "SINR is unbounded: no noise and no interference".into(),
        ));
    }
    Ok(bandwidth * (signal / denominator).ln_1p() / std::f64::consts::LN_2)
}

/// Converts a dBm figure into watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Regular rectangular grid of locations, `columns x rows`, row by row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocationGrid {
    pub columns: usize,
    pub rows: usize,
    pub spacing: f64,
}

impl LocationGrid {
    pub fn positions(&self) -> Vec<Position> {
        let mut out = Vec::with_capacity(self.columns * self.rows);
        for r in 0..self.rows {
            for c in 0..self.columns {
                out.push(Position::new(c as f64 * self.spacing, r as f64 * self.spacing));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApClass {
    Macro,
    Micro,
}

impl ApClass {
    pub fn default_power_dbm(self) -> f64 {
        match self {
            ApClass::Macro => 43.0,
            ApClass::Micro => 33.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApSite {
    pub x: f64,
    pub y: f64,
    pub class: ApClass,
    /// Overrides the class default transmit power.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_dbm: Option<f64>,
}

impl ApSite {
    pub fn new(x: f64, y: f64, class: ApClass) -> Self {
        Self {
            x,
            y,
            class,
            power_dbm: None,
        }
    }

    pub fn position(&self) -> Position {
        Position::new(self.x, self.y)
    }

    pub fn power_watts(&self) -> f64 {
        dbm_to_watts(self.power_dbm.unwrap_or_else(|| self.class.default_power_dbm()))
    }
}

/// Physical parameters of the radio layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioConfig {
    pub aps: Vec<ApSite>,
    #[serde(default = "RadioConfig::default_bandwidth")]
    pub bandwidth_hz: f64,
    #[serde(default = "RadioConfig::default_noise")]
    pub noise_density_dbm_per_hz: f64,
    #[serde(default = "RadioConfig::default_path_loss")]
    pub path_loss_exponent: f64,
    /// Links slower than this (bits/s) are dropped, unless that orphans a
    /// location.
    #[serde(default)]
    pub min_rate_bps: f64,
    /// Reciprocal of the mean packet size (packets per bit).
    #[serde(default = "RadioConfig::default_omega")]
    pub omega: f64,
}

impl RadioConfig {
    fn default_bandwidth() -> f64 {
        10e6
    }
    fn default_noise() -> f64 {
        -174.0
    }
    fn default_path_loss() -> f64 {
        3.0
    }
    fn default_omega() -> f64 {
        1.0 / 12_000.0
    }

    pub fn new(aps: Vec<ApSite>) -> Self {
        Self {
            aps,
            bandwidth_hz: Self::default_bandwidth(),
            noise_density_dbm_per_hz: Self::default_noise(),
            path_loss_exponent: Self::default_path_loss(),
            min_rate_bps: 0.0,
            omega: Self::default_omega(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.aps.is_empty() {
            return Err(Error::Topology("at least one AP is required".into()));
        }
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be positive and finite, got {v}")))
            }
        };
        positive("bandwidth_hz", self.bandwidth_hz)?;
        positive("omega", self.omega)?;
        if !self.noise_density_dbm_per_hz.is_finite() {
            return Err(Error::config("noise_density_dbm_per_hz", "must be finite"));
        }
        if !self.path_loss_exponent.is_finite() || self.path_loss_exponent < 2.0 {
            return Err(Error::config(
                "path_loss_exponent",
                format!("must be at least 2, got {}", self.path_loss_exponent),
            ));
        }
        if !self.min_rate_bps.is_finite() || self.min_rate_bps < 0.0 {
            return Err(Error::config("min_rate_bps", "must be non-negative"));
        }
        for (j, ap) in self.aps.iter().enumerate() {
            if !ap.x.is_finite() || !ap.y.is_finite() {
                return Err(Error::config(format!("aps[{j}]"), "position must be finite"));
            }
            if let Some(p) = ap.power_dbm {
                if !p.is_finite() {
                    return Err(Error::config(format!("aps[{j}].power_dbm"), "must be finite"));
                }
            }
        }
        Ok(())
    }

    /// Far-field gain `max(d, 1)^-exponent`.
    pub fn gain(&self, distance: f64) -> f64 {
        distance.max(MIN_DISTANCE).powf(-self.path_loss_exponent)
    }
}

/// Immutable AP/location graph with effective capacities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TopologyDocument", into = "TopologyDocument")]
pub struct Topology {
    n_locations: usize,
    n_aps: usize,
    /// `omega * C_ji`, row-major by AP; zero marks a missing link.
    service_rate: Vec<f64>,
    aps_of_location: Vec<Vec<usize>>,
    locations_of_ap: Vec<Vec<usize>>,
}

/// On-disk form of a [`Topology`]; neighbour sets are derived on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyDocument {
    pub n_locations: usize,
    pub n_aps: usize,
    /// Dense row-major `n_aps x n_locations` matrix.
    pub service_rate: Vec<f64>,
}

impl TryFrom<TopologyDocument> for Topology {
    type Error = Error;

    fn try_from(doc: TopologyDocument) -> Result<Self> {
        Topology::from_service_rates(doc.n_aps, doc.n_locations, doc.service_rate)
    }
}

impl From<Topology> for TopologyDocument {
    fn from(t: Topology) -> Self {
        TopologyDocument {
            n_locations: t.n_locations,
            n_aps: t.n_aps,
            service_rate: t.service_rate,
        }
    }
}

impl Topology {
    /// Builds a topology from a dense `n_aps x n_locations` effective-rate
    /// matrix (row-major by AP). Entries equal to zero are non-links.
    pub fn from_service_rates(n_aps: usize, n_locations: usize, service_rate: Vec<f64>) -> Result<Self> {
        if n_aps == 0 || n_locations == 0 {
            return Err(Error::Topology(format!(
                "need at least one AP and one location, got {n_aps} APs and {n_locations} locations"
            )));
        }
        if service_rate.len() != n_aps * n_locations {
            return Err(Error::Dimension {
                context: "service_rate",
                expected: n_aps * n_locations,
                actual: service_rate.len(),
            });
        }
        if let Some(bad) = service_rate.iter().find(|r| !r.is_finite() || **r < 0.0) {
            return Err(Error::Topology(format!(
                "service rates must be finite and non-negative, found {bad}"
            )));
        }
        let mut aps_of_location = vec![Vec::new(); n_locations];
        let mut locations_of_ap = vec![Vec::new(); n_aps];
        for j in 0..n_aps {
            for i in 0..n_locations {
                if service_rate[j * n_locations + i] > 0.0 {
                    aps_of_location[i].push(j);
                    locations_of_ap[j].push(i);
                }
            }
        }
        if let Some(i) = aps_of_location.iter().position(Vec::is_empty) {
            return Err(Error::Topology(format!("location {} has no serving AP", i + 1)));
        }
        Ok(Self {
            n_locations,
            n_aps,
            service_rate,
            aps_of_location,
            locations_of_ap,
        })
    }

    pub fn n_locations(&self) -> usize {
        self.n_locations
    }

    pub fn n_aps(&self) -> usize {
        self.n_aps
    }

    /// Effective capacity `omega * C_ji` of link AP `j` -> location `i`.
    #[inline]
    pub fn service_rate(&self, ap: usize, location: usize) -> f64 {
        self.service_rate[ap * self.n_locations + location]
    }

    pub fn service_rates(&self) -> &[f64] {
        &self.service_rate
    }

    /// APs that can serve `location`, ascending.
    pub fn aps_of(&self, location: usize) -> &[usize] {
        &self.aps_of_location[location]
    }

    /// Locations that `ap` can serve, ascending.
    pub fn locations_of(&self, ap: usize) -> &[usize] {
        &self.locations_of_ap[ap]
    }

    pub fn is_link(&self, ap: usize, location: usize) -> bool {
        self.service_rate(ap, location) > 0.0
    }

    /// All `(ap, location, rate)` triples with a positive rate.
    pub fn links(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.locations_of_ap
            .iter()
            .enumerate()
            .flat_map(move |(j, locs)| locs.iter().map(move |&i| (j, i, self.service_rate(j, i))))
    }

    pub fn n_links(&self) -> usize {
        self.locations_of_ap.iter().map(Vec::len).sum()
    }

    /// Smallest positive effective capacity over all links.
    pub fn min_service_rate(&self) -> f64 {
        self.links().map(|(_, _, r)| r).fold(f64::INFINITY, f64::min)
    }

    pub fn max_degrees(&self) -> (usize, usize) {
        max_degrees(self)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// `(M_I, M_J)`: the largest number of locations any AP covers and the
/// largest number of APs any location hears.
pub fn max_degrees(topology: &Topology) -> (usize, usize) {
    let m_i = topology.locations_of_ap.iter().map(Vec::len).max().unwrap_or(0);
    let m_j = topology.aps_of_location.iter().map(Vec::len).max().unwrap_or(0);
    (m_i, m_j)
}

/// Computes link rates from geometry and prunes weak links.
///
/// Every AP transmits at full power, so all other APs interfere at each
/// location. A location whose links all fall below `min_rate_bps` keeps its
/// single strongest link.
pub fn build_topology(config: &RadioConfig, locations: &[Position]) -> Result<Topology> {
    config.validate()?;
    if locations.is_empty() {
        return Err(Error::Topology("at least one location is required".into()));
    }
    let n_aps = config.aps.len();
    let n_locations = locations.len();
    let noise = dbm_to_watts(config.noise_density_dbm_per_hz);
    let powers: Vec<f64> = config.aps.iter().map(ApSite::power_watts).collect();

    let mut service_rate = vec![0.0; n_aps * n_locations];
    let mut received = vec![(0.0, 0.0); n_aps];
    let mut interferers = Vec::with_capacity(n_aps.saturating_sub(1));
    let mut rates = vec![0.0; n_aps];
    for (i, loc) in locations.iter().enumerate() {
        for (j, ap) in config.aps.iter().enumerate() {
            received[j] = (config.gain(ap.position().distance(loc)), powers[j]);
        }
        for j in 0..n_aps {
            interferers.clear();
            interferers.extend(received.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, gp)| *gp));
            rates[j] = shannon_rate(received[j].0, received[j].1, &interferers, config.bandwidth_hz, noise)?;
        }
        let mut kept = 0;
        for j in 0..n_aps {
            if rates[j] > 0.0 && rates[j] >= config.min_rate_bps {
                service_rate[j * n_locations + i] = config.omega * rates[j];
                kept += 1;
            }
        }
        if kept == 0 {
            let (best, rate) = rates
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (j, r)| if r > acc.1 { (j, r) } else { acc });
            if rate.is_nan() || rate <= 0.0 {
                return Err(Error::Topology(format!("location {} receives no usable signal", i + 1)));
            }
            service_rate[best * n_locations + i] = config.omega * rate;
        }
    }
    Topology::from_service_rates(n_aps, n_locations, service_rate)
}
