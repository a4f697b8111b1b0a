//! Synthetic world, population and smart-card trip generation.
//!
//! Commuters ride home -> work and back at habitual peak times on weekdays.
//! Everyone else (and commuters on weekends) makes flexible trips whose time
//! bands are drawn from per-day quotas, so that the whole log follows the
//! configured T1:T2:T3 trip ratio.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{
    is_weekend_day, AudienceCategory, BandTable, Brand, BrandId, BuildingProfile, Location, Person, PersonId, Routine,
    Station, StationId, TimeBand, Timestamp, TripEvent, World, WorldConfig, MINUTES_PER_DAY,
};
use crate::error::{Error, Result};
use crate::rng::{self, SimRng, Stream};

/// Jitter, in minutes, around a commuter's habitual check-in time.
pub const COMMUTE_JITTER: u16 = 15;
pub const MAX_TRIPS_PER_DAY: u32 = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Population {
    pub persons: Vec<Person>,
    pub config_hash: String,
}

impl Population {
    pub fn person(&self, id: PersonId) -> Option<&Person> {
        self.persons.iter().find(|p| p.id == id)
    }

    pub fn validate(&self, world: &World) -> Result<()> {
        let mut ids: Vec<_> = self.persons.iter().map(|p| p.id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Input(format!("duplicate person id {}", w[0])));
        }
        for p in &self.persons {
            world.station(p.home_station)?;
            if let Some(work) = p.routine.work_station {
                world.station(work)?;
            }
            for s in &p.routine.leisure_stations {
                world.station(*s)?;
            }
        }
        Ok(())
    }
}

/// Trip events sorted by check-in time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripLog {
    pub events: Vec<TripEvent>,
    pub day_count: u32,
}

impl TripLog {
    /// Sorts `events` canonically and checks every event invariant.
    pub fn new(mut events: Vec<TripEvent>, day_count: u32) -> Result<Self> {
        for e in &events {
            e.validate()?;
        }
        events.sort_by_key(trip_order);
        Ok(TripLog { events, day_count })
    }

    /// Builds a log whose day count is the span of check-in days.
    pub fn from_events(events: Vec<TripEvent>) -> Result<Self> {
        let days = day_span(&events);
        TripLog::new(events, days)
    }

    pub fn empty(day_count: u32) -> Self {
        TripLog {
            events: Vec::new(),
            day_count,
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn band_counts(&self, table: &BandTable) -> [u64; 3] {
        let mut counts = [0; 3];
        for e in &self.events {
            counts[table.band_of_minute(e.check_in_time.minute_of_day()).index()] += 1;
        }
        counts
    }

    pub fn validate_stations(&self, world: &World) -> Result<()> {
        for e in &self.events {
            world.station(e.check_in_station)?;
            world.station(e.check_out_station)?;
        }
        Ok(())
    }
}

fn trip_order(e: &TripEvent) -> (Timestamp, PersonId, StationId, StationId, Timestamp) {
    (
        e.check_in_time,
        e.person,
        e.check_in_station,
        e.check_out_station,
        e.check_out_time,
    )
}

fn day_span(events: &[TripEvent]) -> u32 {
    let days = events.iter().map(|e| e.check_in_time.day());
    match (days.clone().min(), days.max()) {
        (Some(lo), Some(hi)) => (hi - lo + 1) as u32,
        _ => 0,
    }
}

pub fn config_hash(config: &WorldConfig) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    hex::encode(Sha256::digest(&bytes))
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

/// Stations on a line at uniform spacing, one building per category at each
/// station and `brands_per_station` brands cycling through the categories.
pub fn generate_world(config: &WorldConfig) -> Result<World> {
    config.validate()?;
    let mut rng = rng::stream(config.rng_seed, Stream::World);
    let stations: Vec<Station> = (0..config.station_count)
        .map(|i| Station {
            id: StationId(i + 1),
            name: format!("S{}", i + 1),
            location: Location {
                x: i as f64 * config.station_spacing,
                y: 0.0,
            },
            buildings: config
                .category_table
                .iter()
                .map(|c| BuildingProfile {
                    label: String::new(),
                    category: c.clone(),
                    density: round4(rng.gen_range(0.1..1.0)),
                    active_band: if config.is_commuter(c) {
                        TimeBand::T1Peak
                    } else if rng.gen_bool(2.0 / 3.0) {
                        TimeBand::T2Offpeak
                    } else {
                        TimeBand::T3Night
                    },
                })
                .collect(),
            screen_count: config.screens_per_station.max(1),
        })
        .collect();
    let k = config.category_table.len();
    let mut brands = Vec::new();
    for s in &stations {
        for j in 0..config.brands_per_station as usize {
            let id = BrandId(brands.len() as u32 + 1);
            brands.push(Brand {
                id,
                name: format!("brand-{id}"),
                category: config.category_table[j % k].clone(),
                station: s.id,
                per_second_rate: round4(rng.gen_range(0.01..0.05)),
            });
        }
    }
    Ok(World { stations, brands })
}

fn weighted_pick<'a, T>(rng: &mut SimRng, items: &'a [(T, f64)]) -> Option<&'a T> {
    let total: f64 = items.iter().map(|(_, w)| *w).sum();
    if total.is_nan() || total <= 0.0 {
        return None;
    }
    let mut x = rng.gen_range(0.0..total);
    for (item, w) in items {
        if x < *w {
            return Some(item);
        }
        x -= w;
    }
    items.iter().rev().find(|(_, w)| *w > 0.0).map(|(t, _)| t)
}

fn category_weight(station: &Station, category: &AudienceCategory) -> f64 {
    station
        .buildings
        .iter()
        .filter(|b| &b.category == category)
        .map(|b| b.density)
        .sum()
}

/// Habitual morning and evening peak windows as `[start, end)` minutes.
fn commute_windows(table: &BandTable) -> ((u16, u16), (u16, u16)) {
    let runs = table.runs(TimeBand::T1Peak);
    let morning = runs.iter().copied().find(|r| r.0 < 720).unwrap_or((420, 600));
    let evening = runs.iter().copied().find(|r| r.0 >= 720).unwrap_or((960, 1140));
    (morning, evening)
}

fn habitual_minute(rng: &mut SimRng, (start, end): (u16, u16)) -> u16 {
    let lo = start + COMMUTE_JITTER;
    let hi = end.saturating_sub(COMMUTE_JITTER + 1);
    if lo >= hi {
        (start + end) / 2
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// Persons with homes drawn uniformly over stations and categories drawn in
/// proportion to the building-density mix around the home station.
pub fn generate_population(config: &WorldConfig, world: &World) -> Result<Population> {
    config.validate()?;
    if world.stations.is_empty() {
        return Err(Error::Config("world has no stations".into()));
    }
    let mut rng = rng::stream(config.rng_seed, Stream::Population);
    let windows = commute_windows(&config.band_table);
    let persons = (1..=config.persons)
        .map(|id| {
            let home = world.stations.choose(&mut rng).expect("non-empty");
            let mix: Vec<(AudienceCategory, f64)> = config
                .category_table
                .iter()
                .map(|c| (c.clone(), category_weight(home, c)))
                .collect();
            let category = match weighted_pick(&mut rng, &mix) {
                Some(c) => c.clone(),
                None => config.category_table.choose(&mut rng).expect("non-empty").clone(),
            };
            let work_station = if config.is_commuter(&category) && world.stations.len() > 1 {
                let options: Vec<(StationId, f64)> = world
                    .stations
                    .iter()
                    .filter(|s| s.id != home.id)
                    .map(|s| (s.id, category_weight(s, &category)))
                    .collect();
                Some(match weighted_pick(&mut rng, &options) {
                    Some(s) => *s,
                    None => options.choose(&mut rng).expect("non-empty").0,
                })
            } else {
                None
            };
            Person {
                id: PersonId(id),
                category,
                home_station: home.id,
                routine: Routine {
                    work_station,
                    morning_minute: habitual_minute(&mut rng, windows.0),
                    evening_minute: habitual_minute(&mut rng, windows.1),
                    leisure_stations: Vec::new(),
                },
            }
        })
        .collect();
    Ok(Population {
        persons,
        config_hash: config_hash(config),
    })
}

/// Largest-remainder split of `total` over non-negative real weights; ties
/// go to the lower index.
fn split_by_weight(weights: &[f64], total: u64) -> Vec<u64> {
    let sum: f64 = weights.iter().sum();
    if sum.is_nan() || sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut out: Vec<u64> = quotas.iter().map(|q| q.floor() as u64).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let left = total - out.iter().sum::<u64>();
    for &i in order.iter().cycle().take(left as usize) {
        out[i] += 1;
    }
    out
}

struct TripMaker<'a> {
    world: &'a World,
    config: &'a WorldConfig,
}

impl TripMaker<'_> {
    fn trip(&self, person: PersonId, from: StationId, to: StationId, start: Timestamp) -> Result<TripEvent> {
        let hops = self.world.line_index(from)?.abs_diff(self.world.line_index(to)?) as i64;
        Ok(TripEvent {
            person,
            check_in_station: from,
            check_in_time: start,
            check_out_station: to,
            check_out_time: start.plus_minutes(hops.max(1) * self.config.minutes_per_station as i64),
        })
    }

    fn leisure_destination(&self, rng: &mut SimRng, person: &Person) -> StationId {
        let preferred: Vec<StationId> = person
            .routine
            .leisure_stations
            .iter()
            .copied()
            .filter(|s| *s != person.home_station)
            .collect();
        if let Some(s) = preferred.choose(rng) {
            return *s;
        }
        let others: Vec<StationId> = self
            .world
            .stations
            .iter()
            .map(|s| s.id)
            .filter(|s| *s != person.home_station)
            .collect();
        *others.choose(rng).expect("at least two stations")
    }
}

/// Generates `days` days of trips for `population`.
pub fn simulate_trips(population: &Population, world: &World, config: &WorldConfig, days: u32) -> Result<TripLog> {
    if days == 0 {
        return Err(Error::Config("days must be at least 1".into()));
    }
    population.validate(world)?;
    if population.persons.is_empty() || world.stations.len() < 2 {
        return Ok(TripLog::empty(days));
    }
    let mut rng = rng::stream(config.rng_seed, Stream::Trips);
    let maker = TripMaker { world, config };
    let ratio = config.band_trip_ratio;
    let ratio_sum: f64 = ratio.iter().sum();
    let band_hours: Vec<Vec<u32>> = TimeBand::ALL.iter().map(|b| config.band_table.hours_in(*b)).collect();
    let n = population.persons.len();
    let mut events = Vec::new();

    for day in 0..days as i32 {
        let weekend = is_weekend_day(day);
        let mut anchored = [0u64; 3];
        let mut used = vec![0u32; n];

        if !weekend {
            for (i, p) in population.persons.iter().enumerate() {
                let Some(work) = p.routine.work_station else { continue };
                if !config.is_commuter(&p.category) || work == p.home_station {
                    continue;
                }
                for (from, to, habit) in [
                    (p.home_station, work, p.routine.morning_minute),
                    (work, p.home_station, p.routine.evening_minute),
                ] {
                    let jitter = rng.gen_range(-(COMMUTE_JITTER as i64)..=COMMUTE_JITTER as i64);
                    let start = Timestamp::new(day, 0)?.plus_minutes(habit as i64 + jitter);
                    anchored[config.band_table.band_of_minute(start.minute_of_day()).index()] += 1;
                    events.push(maker.trip(p.id, from, to, start)?);
                    used[i] += 1;
                }
            }
        }

        let desired: Vec<u32> = population
            .persons
            .iter()
            .zip(&used)
            .map(|(p, &u)| {
                let want = if weekend {
                    rng.gen_range(1..=3)
                } else if config.is_commuter(&p.category) && p.routine.work_station.is_some() {
                    0
                } else {
                    rng.gen_range(0..=2)
                };
                want.min(MAX_TRIPS_PER_DAY - u)
            })
            .collect();
        let anchored_total: u64 = anchored.iter().sum();
        let desired_total: u64 = desired.iter().map(|&d| d as u64).sum();
        let capacity: u64 = used.iter().map(|&u| (MAX_TRIPS_PER_DAY - u) as u64).sum();

        // Smallest day volume whose band quotas can absorb the anchored trips.
        let floor_total = (0..3)
            .map(|b| (anchored[b] as f64 * ratio_sum / ratio[b]).ceil() as u64)
            .max()
            .unwrap_or(0);
        let day_total = floor_total.max(anchored_total + desired_total);
        let quotas = split_by_weight(&ratio, day_total);
        let mut flex: Vec<u64> = (0..3).map(|b| quotas[b].saturating_sub(anchored[b])).collect();
        let flex_total: u64 = flex.iter().sum();
        if flex_total > capacity {
            let weights: Vec<f64> = flex.iter().map(|&f| f as f64).collect();
            flex = split_by_weight(&weights, capacity);
        }
        let flex_total: u64 = flex.iter().sum();

        // Who rides: desired trips first, then spare capacity, non-commuters
        // before commuters.
        let mut riders: Vec<usize> = Vec::with_capacity(flex_total as usize);
        for (i, &d) in desired.iter().enumerate() {
            riders.extend(std::iter::repeat_n(i, d as usize));
        }
        let spare = |commuter: bool, rng: &mut SimRng| {
            let mut slots: Vec<usize> = Vec::new();
            for (i, p) in population.persons.iter().enumerate() {
                if config.is_commuter(&p.category) == commuter {
                    let free = MAX_TRIPS_PER_DAY - used[i] - desired[i];
                    slots.extend(std::iter::repeat_n(i, free as usize));
                }
            }
            slots.shuffle(rng);
            slots
        };
        if (riders.len() as u64) < flex_total {
            riders.extend(spare(false, &mut rng));
            riders.extend(spare(true, &mut rng));
        }
        riders.truncate(flex_total as usize);

        let mut bands: Vec<TimeBand> = TimeBand::ALL
            .iter()
            .flat_map(|b| std::iter::repeat_n(*b, flex[b.index()] as usize))
            .collect();
        bands.shuffle(&mut rng);

        for (&i, band) in riders.iter().zip(&bands) {
            let p = &population.persons[i];
            let hours = &band_hours[band.index()];
            let hour = *hours.choose(&mut rng).expect("band table is total");
            let minute = hour as u16 * 60 + rng.gen_range(0..60);
            debug_assert!(minute < MINUTES_PER_DAY);
            let to = maker.leisure_destination(&mut rng, p);
            events.push(maker.trip(p.id, p.home_station, to, Timestamp::new(day, minute)?)?);
        }
    }
    TripLog::new(events, days)
}
