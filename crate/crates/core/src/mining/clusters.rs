use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::domain::{AudienceCategory, BandTable, PersonId, StationId, TimeBand, World, MINUTES_PER_DAY};
use crate::error::Result;
use crate::mining::audience::AudienceHistogram;
use crate::mining::dbscan::{dbscan, ClusterId, Clustering, Metric, PointSet};
use crate::sim::{Population, TripLog};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialCluster {
    pub id: ClusterId,
    pub member_trip_indices: Vec<usize>,
    pub dominant_od_pair: (StationId, StationId),
    pub category_mix: AudienceHistogram,
}

/// Inclusive, possibly wrapping, range of minutes of day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: u16,
    pub end: u16,
}

impl TimeWindow {
    pub fn width(self) -> u16 {
        (self.end + MINUTES_PER_DAY - self.start) % MINUTES_PER_DAY
    }

    pub fn contains(self, minute: u16) -> bool {
        (minute + MINUTES_PER_DAY - self.start) % MINUTES_PER_DAY <= self.width()
    }

    /// Smallest arc covering every minute in `minutes` (non-empty).
    pub fn covering(minutes: &[u16]) -> Self {
        let distinct: Vec<u16> = minutes.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        let n = distinct.len();
        // The arc starts right after the widest empty gap.
        let mut best = (0u16, 0usize);
        for i in 0..n {
            let next = distinct[(i + 1) % n];
            let gap = (next + MINUTES_PER_DAY - distinct[i]) % MINUTES_PER_DAY;
            let gap = if n == 1 { MINUTES_PER_DAY } else { gap };
            if gap > best.0 {
                best = (gap, (i + 1) % n);
            }
        }
        let start = distinct[best.1];
        let end = distinct[(best.1 + n - 1) % n];
        TimeWindow { start, end }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalCluster {
    pub id: ClusterId,
    pub member_trip_indices: Vec<usize>,
    pub time_window: TimeWindow,
    pub band: TimeBand,
}

/// Circular mean of minutes of day, or `None` when they cancel out.
pub fn circular_mean(minutes: impl IntoIterator<Item = u16>) -> Option<f64> {
    let (mut s, mut c, mut n) = (0.0, 0.0, 0usize);
    for m in minutes {
        let angle = m as f64 / MINUTES_PER_DAY as f64 * TAU;
        s += angle.sin();
        c += angle.cos();
        n += 1;
    }
    if n == 0 || s.hypot(c) / (n as f64) < 1e-9 {
        return None;
    }
    Some(s.atan2(c).rem_euclid(TAU) / TAU * MINUTES_PER_DAY as f64)
}

fn band_of(table: &BandTable, minutes: &[u16], window: TimeWindow) -> TimeBand {
    let centre = circular_mean(minutes.iter().copied())
        .map(|m| (m.round() as u16) % MINUTES_PER_DAY)
        .unwrap_or(window.start);
    table.band_of_minute(centre)
}

/// Clusters trips by (check-in x, y, check-out x, y).
pub fn spatial_clusters(
    log: &TripLog,
    world: &World,
    population: &Population,
    categories: &[AudienceCategory],
    table: &BandTable,
    eps: f64,
    min_pts: usize,
) -> Result<Vec<SpatialCluster>> {
    let mut points = Vec::with_capacity(log.len());
    for e in &log.events {
        let a = world.station(e.check_in_station)?.location;
        let b = world.station(e.check_out_station)?.location;
        points.push(vec![a.x, a.y, b.x, b.y]);
    }
    let clustering = dbscan(&PointSet::new(points, Metric::Euclidean)?, eps, min_pts)?;
    let category_of: HashMap<PersonId, &AudienceCategory> =
        population.persons.iter().map(|p| (p.id, &p.category)).collect();

    Ok(clustering
        .members()
        .into_iter()
        .enumerate()
        .map(|(id, members)| {
            let mut od: BTreeMap<(StationId, StationId), usize> = BTreeMap::new();
            let mut riders: BTreeSet<PersonId> = BTreeSet::new();
            for &i in &members {
                let e = &log.events[i];
                *od.entry((e.check_in_station, e.check_out_station)).or_default() += 1;
                riders.insert(e.person);
            }
            let dominant_od_pair = od
                .iter()
                .fold(
                    None,
                    |best: Option<(&(StationId, StationId), usize)>, (pair, &n)| match best {
                        Some((_, m)) if m >= n => best,
                        _ => Some((pair, n)),
                    },
                )
                .map(|(pair, _)| *pair)
                .expect("clusters are non-empty");
            let minutes: Vec<u16> = members
                .iter()
                .map(|&i| log.events[i].check_in_time.minute_of_day())
                .collect();
            let band = band_of(table, &minutes, TimeWindow::covering(&minutes));
            let mut category_mix = AudienceHistogram::zeroed(dominant_od_pair.0, band, categories);
            for p in riders {
                if let Some(c) = category_of.get(&p) {
                    *category_mix.counts.entry((*c).clone()).or_default() += 1;
                }
            }
            SpatialCluster {
                id: ClusterId(id as u32),
                member_trip_indices: members,
                dominant_od_pair,
                category_mix,
            }
        })
        .collect())
}

/// Clusters trips by check-in minute of day on the circular metric.
pub fn temporal_clusters(
    log: &TripLog,
    table: &BandTable,
    eps_minutes: f64,
    min_pts: usize,
) -> Result<Vec<TemporalCluster>> {
    let clustering = temporal_clustering(log, eps_minutes, min_pts)?;
    Ok(clustering
        .members()
        .into_iter()
        .enumerate()
        .map(|(id, members)| {
            let minutes: Vec<u16> = members
                .iter()
                .map(|&i| log.events[i].check_in_time.minute_of_day())
                .collect();
            let time_window = TimeWindow::covering(&minutes);
            TemporalCluster {
                id: ClusterId(id as u32),
                band: band_of(table, &minutes, time_window),
                member_trip_indices: members,
                time_window,
            }
        })
        .collect())
}

pub fn temporal_clustering(log: &TripLog, eps_minutes: f64, min_pts: usize) -> Result<Clustering> {
    let points = log
        .events
        .iter()
        .map(|e| vec![e.check_in_time.minute_of_day() as f64])
        .collect();
    dbscan(&PointSet::new(points, Metric::CircularMinutes)?, eps_minutes, min_pts)
}
