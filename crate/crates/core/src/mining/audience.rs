use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::domain::{AudienceCategory, BandTable, PersonId, StationId, TimeBand, World};
use crate::error::{Error, Result};
use crate::sim::{Population, TripLog};

/// Predicted riders per audience category at one station and time band.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AudienceHistogram {
    pub station: StationId,
    pub band: TimeBand,
    pub counts: BTreeMap<AudienceCategory, u32>,
}

impl AudienceHistogram {
    pub fn zeroed(station: StationId, band: TimeBand, categories: &[AudienceCategory]) -> Self {
        AudienceHistogram {
            station,
            band,
            counts: categories.iter().map(|c| (c.clone(), 0)).collect(),
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.values().map(|&c| c as u64).sum()
    }

    pub fn count(&self, category: &AudienceCategory) -> u32 {
        self.counts.get(category).copied().unwrap_or(0)
    }

    /// Largest non-zero category; equal counts go to the lexicographically
    /// smaller name.
    pub fn argmax(&self) -> Option<(&AudienceCategory, u32)> {
        self.counts
            .iter()
            .filter(|(_, &n)| n > 0)
            .fold(None, |best, (c, &n)| match best {
                Some((_, m)) if m >= n => best,
                _ => Some((c, n)),
            })
    }
}

/// Average-day audience at every station and band of `world`.
///
/// A rider counts once per day per (station, band) in which they check in;
/// per-category sums are divided by the log's day count and rounded half up.
/// Riders missing from `population` are ignored.
pub fn predict_all(
    log: &TripLog,
    population: &Population,
    world: &World,
    categories: &[AudienceCategory],
    table: &BandTable,
) -> Vec<AudienceHistogram> {
    let category_of: HashMap<PersonId, &AudienceCategory> =
        population.persons.iter().map(|p| (p.id, &p.category)).collect();
    let mut seen: BTreeSet<(StationId, TimeBand, i32, PersonId)> = BTreeSet::new();
    for e in &log.events {
        let band = table.band_of_minute(e.check_in_time.minute_of_day());
        seen.insert((e.check_in_station, band, e.check_in_time.day(), e.person));
    }
    let mut sums: HashMap<(StationId, TimeBand), BTreeMap<&AudienceCategory, u64>> = HashMap::new();
    for (station, band, _, person) in seen {
        if let Some(cat) = category_of.get(&person) {
            *sums.entry((station, band)).or_default().entry(cat).or_default() += 1;
        }
    }
    let days = log.day_count as u64;
    let mut out = Vec::with_capacity(world.stations.len() * 3);
    for s in &world.stations {
        for band in TimeBand::ALL {
            let mut h = AudienceHistogram::zeroed(s.id, band, categories);
            if days > 0 {
                if let Some(cats) = sums.get(&(s.id, band)) {
                    for (cat, &sum) in cats {
                        h.counts.insert((*cat).clone(), ((2 * sum + days) / (2 * days)) as u32);
                    }
                }
            }
            out.push(h);
        }
    }
    out
}

pub fn predict_audience(
    log: &TripLog,
    population: &Population,
    world: &World,
    categories: &[AudienceCategory],
    table: &BandTable,
    station: StationId,
    band: TimeBand,
) -> Result<AudienceHistogram> {
    if !world.contains(station) {
        return Err(Error::UnknownStation(station.0));
    }
    predict_all(log, population, world, categories, table)
        .into_iter()
        .find(|h| h.station == station && h.band == band)
        .ok_or(Error::UnknownStation(station.0))
}
