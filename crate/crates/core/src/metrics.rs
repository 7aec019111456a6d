//! Safety, efficiency and coverage metrics over campaign results.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::EncounterRecord;

/// Pair range below which an encounter is a near miss (m).
pub const NEAR_MISS_RANGE: f64 = 10.0;
/// Pair range below which an encounter is a collision (m).
pub const COLLISION_RANGE: f64 = 3.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SafetyCounts {
    pub near_misses: usize,
    pub collisions: usize,
}

/// Counts near misses and collisions (strict inequalities; a collision is
/// also a near miss).
pub fn score_safety(records: &[EncounterRecord]) -> SafetyCounts {
    let mut out = SafetyCounts::default();
    for r in records {
        if r.min_range < NEAR_MISS_RANGE {
            out.near_misses += 1;
        }
        if r.min_range < COLLISION_RANGE {
            out.collisions += 1;
        }
    }
    out
}

pub fn percent_change(actual: f64, baseline: f64) -> f64 {
    debug_assert!(baseline > 0.0);
    100.0 * (actual - baseline) / baseline
}

/// One vehicle's traversal of one leg next to its unobstructed baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraversalStats {
    pub vehicle_id: usize,
    pub time: f64,
    pub distance: f64,
    pub baseline_time: f64,
    pub baseline_distance: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Efficiency {
    pub extra_time_pct: f64,
    pub extra_distance_pct: f64,
}

/// Percentage change over baseline, averaged over legs per vehicle, then
/// over vehicles. Empty input scores 0.
pub fn score_efficiency(samples: &[TraversalStats]) -> Efficiency {
    use std::collections::BTreeMap;
    let mut per_vehicle: BTreeMap<usize, (f64, f64, usize)> = BTreeMap::new();
    for s in samples {
        let e = per_vehicle.entry(s.vehicle_id).or_default();
        e.0 += percent_change(s.time, s.baseline_time);
        e.1 += percent_change(s.distance, s.baseline_distance);
        e.2 += 1;
    }
    if per_vehicle.is_empty() {
        return Efficiency::default();
    }
    let n = per_vehicle.len() as f64;
    let (t, d) = per_vehicle.values().fold((0.0, 0.0), |(t, d), &(st, sd, k)| (t + st / k as f64, d + sd / k as f64));
    Efficiency { extra_time_pct: t / n, extra_distance_pct: d / n }
}

/// Range-bearing histogram of encounter views. Cells are stored bearing-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncounterGrid {
    pub range_bin_size: f64,
    pub bearing_bin_size: f64,
    pub max_range: f64,
    pub n_bearing: usize,
    pub n_range: usize,
    pub counts: Vec<u64>,
    /// Samples beyond `max_range`.
    pub ignored: u64,
}

impl Default for EncounterGrid {
    fn default() -> Self {
        Self::new(0.1, 1.0, 32.0).expect("default grid is valid")
    }
}

impl EncounterGrid {
    /// `bearing_bin_size` in degrees; it must divide 360.
    pub fn new(range_bin_size: f64, bearing_bin_size: f64, max_range: f64) -> Result<Self> {
        if !(range_bin_size > 0.0 && max_range > range_bin_size) {
            return Err(Error::InvalidParameter {
                name: "range_bin_size",
                reason: "need 0 < range_bin_size < max_range".into(),
            });
        }
        let nb = 360.0 / bearing_bin_size;
        if !(bearing_bin_size > 0.0) || (nb - nb.round()).abs() > 1e-9 {
            return Err(Error::InvalidParameter { name: "bearing_bin_size", reason: "must divide 360 degrees".into() });
        }
        let n_bearing = nb.round() as usize;
        let n_range = (max_range / range_bin_size - 1e-9).ceil() as usize;
        Ok(Self {
            range_bin_size,
            bearing_bin_size,
            max_range,
            n_bearing,
            n_range,
            counts: vec![0; n_bearing * n_range],
            ignored: 0,
        })
    }

    pub fn empty_like(&self) -> Self {
        Self { counts: vec![0; self.counts.len()], ignored: 0, ..self.clone() }
    }

    /// Cell of a (range m, bearing rad) sample, `None` beyond `max_range`.
    pub fn cell(&self, range: f64, bearing: f64) -> Option<(usize, usize)> {
        if !(range >= 0.0) || range >= self.max_range {
            return None;
        }
        let r = ((range / self.range_bin_size) as usize).min(self.n_range - 1);
        let deg = bearing.to_degrees().rem_euclid(360.0);
        let b = ((deg / self.bearing_bin_size) as usize) % self.n_bearing;
        Some((b, r))
    }

    pub fn add(&mut self, range: f64, bearing: f64) -> bool {
        match self.cell(range, bearing) {
            Some((b, r)) => {
                self.counts[b * self.n_range + r] += 1;
                true
            }
            None => {
                self.ignored += 1;
                false
            }
        }
    }

    pub fn get(&self, bearing_bin: usize, range_bin: usize) -> u64 {
        self.counts[bearing_bin * self.n_range + range_bin]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.n_bearing == other.n_bearing
            && self.n_range == other.n_range
            && self.range_bin_size == other.range_bin_size
            && self.bearing_bin_size == other.bearing_bin_size
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::InvalidParameter { name: "grid", reason: "grids differ in shape".into() });
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.ignored += other.ignored;
        Ok(())
    }

    /// Plot-ready dump: one row per nonzero cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bearing_deg,range_m,count\n");
        for b in 0..self.n_bearing {
            for r in 0..self.n_range {
                let c = self.get(b, r);
                if c > 0 {
                    let deg = b as f64 * self.bearing_bin_size;
                    let range = r as f64 * self.range_bin_size;
                    out.push_str(&format!("{deg},{range:.3},{c}\n"));
                }
            }
        }
        out
    }
}

/// Bins every track sample of every record, once per vehicle's view.
pub fn bin_encounters(records: &[EncounterRecord], template: &EncounterGrid) -> EncounterGrid {
    let mut grid = template.empty_like();
    for rec in records {
        for s in &rec.relative_track {
            grid.add(s.range, s.bearing[0]);
            grid.add(s.range, s.bearing[1]);
        }
    }
    grid
}

/// Mean over bearings of the squared Euclidean distance between each
/// bearing's radial profile and the mean profile, with counts normalized by
/// the largest cell. Zero exactly when all bearings see the same profile.
pub fn coverage_variance(grid: &EncounterGrid) -> Result<f64> {
    let max = grid.counts.iter().copied().max().unwrap_or(0);
    if max == 0 {
        return Err(Error::EmptyGrid);
    }
    // With c the count, S the per-range sum over bearings and n the number
    // of bearings, c/max - S/(n max) = (n c - S) / (n max). The numerator is
    // an exact integer, so angularly uniform grids give exactly zero.
    let n = grid.n_bearing as i128;
    let mut sums = vec![0i128; grid.n_range];
    for b in 0..grid.n_bearing {
        for (r, s) in sums.iter_mut().enumerate() {
            *s += grid.get(b, r) as i128;
        }
    }
    let mut total = 0.0;
    for b in 0..grid.n_bearing {
        for (r, s) in sums.iter().enumerate() {
            let d = (n * grid.get(b, r) as i128 - s) as f64;
            total += d * d;
        }
    }
    let denom = (grid.n_bearing as f64 * max as f64).powi(2);
    Ok(total / denom / grid.n_bearing as f64)
}

/// The five Table-II-style columns plus campaign diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub mode: String,
    pub seed: u64,
    pub legs: usize,
    pub encounters: usize,
    pub near_misses: usize,
    pub collisions: usize,
    pub min_range: Option<f64>,
    pub avg_extra_time_pct: f64,
    pub avg_extra_distance_pct: f64,
    pub coverage_variance: Option<f64>,
    pub timeouts: usize,
    pub slacked_ticks: u64,
}

impl MetricsSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes") + "\n"
    }
}
