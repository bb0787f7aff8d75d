//! Demand traces and the period / zone / window calendar.
//!
//! Slots are numbered `1..=T` everywhere in the public API. Zones are
//! numbered `1..=K`.

use std::f64::consts::TAU;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-slot, per-location demand intensities (packets per second).
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficTrace {
    n_locations: usize,
    horizon: usize,
    /// Row-major `horizon x n_locations`.
    demand: Vec<f64>,
}

impl TrafficTrace {
    /// Builds a trace from a flat slot-major matrix.
    pub fn new(n_locations: usize, horizon: usize, demand: Vec<f64>) -> Result<Self> {
        if n_locations == 0 {
            return Err(Error::config("n_locations", "must be at least 1"));
        }
        if demand.len() != n_locations * horizon {
            return Err(Error::Dimension {
                context: "traffic demand",
                expected: n_locations * horizon,
                actual: demand.len(),
            });
        }
        if let Some(v) = demand.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Domain(format!("demand must be finite and non-negative, found {v}")));
        }
        Ok(Self {
            n_locations,
            horizon,
            demand,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(n * rows.len());
        for row in rows {
            if row.len() != n {
                return Err(Error::Dimension {
                    context: "traffic row",
                    expected: n,
                    actual: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        Self::new(n, rows.len(), flat)
    }

    pub fn zeros(n_locations: usize, horizon: usize) -> Result<Self> {
        Self::new(n_locations, horizon, vec![0.0; n_locations * horizon])
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_locations(&self) -> usize {
        self.n_locations
    }

    /// Demand vector of slot `t` (1-based).
    ///
    /// # Panics
    /// If `t` is outside `1..=horizon`.
    #[inline]
    pub fn slot(&self, t: usize) -> &[f64] {
        assert!(t >= 1 && t <= self.horizon, "slot {t} outside 1..={}", self.horizon);
        let start = (t - 1) * self.n_locations;
        &self.demand[start..start + self.n_locations]
    }

    pub fn try_slot(&self, t: usize) -> Result<&[f64]> {
        if t == 0 || t > self.horizon {
            return Err(Error::Index {
                what: "slot",
                index: t,
                min: 1,
                max: self.horizon,
            });
        }
        Ok(self.slot(t))
    }

    /// `lambda_i(t)` with 1-based `t` and 0-based location.
    pub fn get(&self, t: usize, location: usize) -> f64 {
        self.slot(t)[location]
    }

    /// Largest intensity anywhere in the trace.
    pub fn max_intensity(&self) -> f64 {
        self.demand.iter().copied().fold(0.0, f64::max)
    }

    /// Largest intensity over the listed slots.
    pub fn max_intensity_over(&self, slots: &[usize]) -> f64 {
        slots
            .iter()
            .flat_map(|&t| self.slot(t).iter().copied())
            .fold(0.0, f64::max)
    }

    /// Writes `t,location_id,intensity` rows (1-based ids), header included.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            writeln!(w, "t,location_id,intensity")?;
            for t in 1..=self.horizon {
                for (i, v) in self.slot(t).iter().enumerate() {
                    writeln!(w, "{t},{},{v:?}", i + 1)?;
                }
            }
            w.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }
}

/// Reads a `t,location_id,intensity` CSV trace.
///
/// An optional header row starting with `t` is skipped. Missing `(t, i)`
/// pairs are zero and repeated pairs keep the last value. The horizon is
/// `horizon` when given, otherwise the largest `t` in the file.
pub fn load_trace_csv(path: &Path, n_locations: usize, horizon: Option<usize>) -> Result<TrafficTrace> {
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Parse {
                path: display.clone(),
                line: 0,
                message: format!("{other:?}"),
            },
        })?;

    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            path: display.clone(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(idx as u64 + 1, |p| p.line());
        let parse_err = |message: String| Error::Parse {
            path: display.clone(),
            line,
            message,
        };
        if record.iter().all(str::is_empty) {
            continue;
        }
        if idx == 0 && record.get(0).is_some_and(|f| f.eq_ignore_ascii_case("t")) {
            continue;
        }
        if record.len() != 3 {
            return Err(parse_err(format!("expected 3 fields, found {}", record.len())));
        }
        let t: usize = record[0]
            .parse()
            .map_err(|_| parse_err(format!("slot `{}` is not a positive integer", &record[0])))?;
        let loc: usize = record[1]
            .parse()
            .map_err(|_| parse_err(format!("location_id `{}` is not a positive integer", &record[1])))?;
        let value: f64 = record[2]
            .parse()
            .map_err(|_| parse_err(format!("intensity `{}` is not a number", &record[2])))?;
        if t == 0 {
            return Err(parse_err("slot numbers start at 1".into()));
        }
        if loc == 0 || loc > n_locations {
            return Err(parse_err(format!("location_id {loc} outside 1..={n_locations}")));
        }
        if !value.is_finite() || value < 0.0 {
            return Err(parse_err(format!("intensity {value} must be finite and non-negative")));
        }
        if let Some(h) = horizon {
            if t > h {
                return Err(parse_err(format!("slot {t} exceeds declared horizon {h}")));
            }
        }
        entries.push((t, loc, value));
    }

    let horizon = horizon.unwrap_or_else(|| entries.iter().map(|e| e.0).max().unwrap_or(0));
    let mut demand = vec![0.0; horizon * n_locations];
    for (t, loc, v) in entries {
        demand[(t - 1) * n_locations + (loc - 1)] = v;
    }
    TrafficTrace::new(n_locations, horizon, demand)
}

/// Position of a slot in the calendar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowPosition {
    /// Zone `k` in `1..=K`.
    pub zone: usize,
    /// 1-based rank of the slot inside its window `W_k`.
    pub rank: usize,
    pub is_first: bool,
}

/// Split of the horizon into `P` periods of `K` zones of `Z` slots each.
///
/// Window `W_k` collects zone `k`'s slots across all periods.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimePartition {
    periods: usize,
    zones: usize,
    slots_per_zone: usize,
}

/// Builds the calendar for `horizon = P * zones * slots_per_zone`.
pub fn build_partition(horizon: usize, zones: usize, slots_per_zone: usize) -> Result<TimePartition> {
    if horizon == 0 {
        return Err(Error::config("horizon", "must be at least 1"));
    }
    if zones == 0 {
        return Err(Error::config("zones", "must be at least 1"));
    }
    if slots_per_zone == 0 {
        return Err(Error::config("slots_per_zone", "must be at least 1"));
    }
    let period = zones * slots_per_zone;
    if !horizon.is_multiple_of(period) {
        return Err(Error::config(
            "horizon",
            format!("{horizon} slots is not a whole number of periods of {zones} x {slots_per_zone} slots"),
        ));
    }
    Ok(TimePartition {
        periods: horizon / period,
        zones,
        slots_per_zone,
    })
}

impl TimePartition {
    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn zones(&self) -> usize {
        self.zones
    }

    pub fn slots_per_zone(&self) -> usize {
        self.slots_per_zone
    }

    pub fn horizon(&self) -> usize {
        self.periods * self.zones * self.slots_per_zone
    }

    /// Number of slots in every window, `P * Z`.
    pub fn window_len(&self) -> usize {
        self.periods * self.slots_per_zone
    }

    /// Slots of window `W_zone` in increasing order.
    pub fn window(&self, zone: usize) -> Result<Vec<usize>> {
        if zone == 0 || zone > self.zones {
            return Err(Error::Index {
                what: "zone",
                index: zone,
                min: 1,
                max: self.zones,
            });
        }
        let kz = self.zones * self.slots_per_zone;
        let z = self.slots_per_zone;
        let mut out = Vec::with_capacity(self.window_len());
        for p in 1..=self.periods {
            for tau in 1..=z {
                out.push(kz * (p - 1) + z * (zone - 1) + tau);
            }
        }
        Ok(out)
    }

    /// All windows `W_1..W_K`.
    pub fn windows(&self) -> Vec<Vec<usize>> {
        (1..=self.zones).map(|k| self.window(k).expect("zone in range")).collect()
    }

    pub fn window_of(&self, t: usize) -> Result<WindowPosition> {
        window_of(self, t)
    }
}

/// Zone of slot `t`, its rank inside the window, and whether it opens the
/// window.
pub fn window_of(partition: &TimePartition, t: usize) -> Result<WindowPosition> {
    if t == 0 || t > partition.horizon() {
        return Err(Error::Index {
            what: "slot",
            index: t,
            min: 1,
            max: partition.horizon(),
        });
    }
    let z = partition.slots_per_zone;
    let kz = partition.zones * z;
    let period = (t - 1) / kz;
    let offset = (t - 1) % kz;
    let zone = offset / z + 1;
    let tau = offset % z + 1;
    let rank = period * z + tau;
    Ok(WindowPosition {
        zone,
        rank,
        is_first: rank == 1,
    })
}

/// Shape of the daily demand curve, evaluated at the phase `x` in `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DailyShape {
    Flat,
    /// `1 + amplitude * sin(2 pi x + phase)`, amplitude in `[0, 1)`.
    Sinusoidal { amplitude: f64, phase: f64 },
}

impl DailyShape {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            DailyShape::Flat => 1.0,
            DailyShape::Sinusoidal { amplitude, phase } => 1.0 + amplitude * (TAU * x + phase).sin(),
        }
    }
}

/// Parameters of the synthetic periodic demand generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticProfile {
    /// Per-location base intensity is drawn uniformly from `[base_min, base_max]`.
    pub base_min: f64,
    pub base_max: f64,
    pub slots_per_day: usize,
    pub shape: DailyShape,
    /// Half-width of the multiplicative uniform noise, in `[0, 1)`.
    #[serde(default)]
    pub noise: f64,
}

impl SyntheticProfile {
    pub fn validate(&self) -> Result<()> {
        if !self.base_min.is_finite() || self.base_min < 0.0 {
            return Err(Error::config("base_min", "must be finite and non-negative"));
        }
        if !self.base_max.is_finite() || self.base_max < self.base_min {
            return Err(Error::config("base_max", "must be finite and at least base_min"));
        }
        if self.slots_per_day == 0 {
            return Err(Error::config("slots_per_day", "must be at least 1"));
        }
        if !(self.noise >= 0.0 && self.noise < 1.0) {
            return Err(Error::config("noise", format!("must lie in [0, 1), got {}", self.noise)));
        }
        if let DailyShape::Sinusoidal { amplitude, phase } = self.shape {
            if !(0.0..1.0).contains(&amplitude) {
                return Err(Error::config("shape.amplitude", "must lie in [0, 1)"));
            }
            if !phase.is_finite() {
                return Err(Error::config("shape.phase", "must be finite"));
            }
        }
        Ok(())
    }

    /// Analytic upper bound on any generated intensity.
    pub fn max_intensity(&self) -> f64 {
        let peak = match self.shape {
            DailyShape::Flat => 1.0,
            DailyShape::Sinusoidal { amplitude, .. } => 1.0 + amplitude,
        };
        self.base_max * peak * (1.0 + self.noise)
    }
}

/// Synthetic periodic trace; bit-for-bit reproducible from `seed`.
pub fn generate_synthetic(
    n_locations: usize,
    horizon: usize,
    seed: u64,
    profile: &SyntheticProfile,
) -> Result<TrafficTrace> {
    profile.validate()?;
    if horizon == 0 {
        return Err(Error::config("horizon", "must be at least 1"));
    }
    if n_locations == 0 {
        return Err(Error::config("n_locations", "must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: Vec<f64> = (0..n_locations)
        .map(|_| {
            if profile.base_max > profile.base_min {
                rng.random_range(profile.base_min..=profile.base_max)
            } else {
                profile.base_min
            }
        })
        .collect();
    let spd = profile.slots_per_day;
    let mut demand = Vec::with_capacity(horizon * n_locations);
    for t in 1..=horizon {
        let shape = profile.shape.value((t % spd) as f64 / spd as f64);
        for b in &base {
            let noise = if profile.noise > 0.0 {
                rng.random_range(-profile.noise..=profile.noise)
            } else {
                0.0
            };
            demand.push((b * shape * (1.0 + noise)).max(0.0));
        }
    }
    TrafficTrace::new(n_locations, horizon, demand)
}
