//! Entities, state variables and scales of the transit advertising model.
//!
//! Everything here is a plain value: immutable once built, `Send + Sync`,
//! and serializable through serde.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MINUTES_PER_DAY: u16 = 1440;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(StationId);
id_type!(
    /// Smart-card number of a rider.
    PersonId
);
id_type!(BrandId);
id_type!(AdId);

/// Audience (profession) label drawn from the configured category table.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AudienceCategory(String);

impl AudienceCategory {
    pub fn new(name: impl Into<String>) -> Self {
        AudienceCategory(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AudienceCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AudienceCategory {
    fn from(s: &str) -> Self {
        AudienceCategory::new(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TimeBand {
    #[serde(rename = "T1_peak")]
    T1Peak,
    #[serde(rename = "T2_offpeak")]
    T2Offpeak,
    #[serde(rename = "T3_night")]
    T3Night,
}

impl TimeBand {
    pub const ALL: [TimeBand; 3] = [TimeBand::T1Peak, TimeBand::T2Offpeak, TimeBand::T3Night];

    pub fn index(self) -> usize {
        match self {
            TimeBand::T1Peak => 0,
            TimeBand::T2Offpeak => 1,
            TimeBand::T3Night => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TimeBand::T1Peak => "T1_peak",
            TimeBand::T2Offpeak => "T2_offpeak",
            TimeBand::T3Night => "T3_night",
        }
    }
}

impl fmt::Display for TimeBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TimeBand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TimeBand::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| Error::Input(format!("unknown time band `{s}`")))
    }
}

/// Total mapping from hour of day to time band.
///
/// Serialized as `band -> [hours]`, e.g. `T1_peak = [7, 8, 9, 16, 17, 18]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<TimeBand, Vec<u32>>", into = "BTreeMap<TimeBand, Vec<u32>>")]
pub struct BandTable {
    hours: [TimeBand; 24],
}

impl BandTable {
    pub fn from_hours(hours: [TimeBand; 24]) -> Self {
        BandTable { hours }
    }

    pub fn classify(&self, hour: u32) -> Result<TimeBand> {
        self.hours
            .get(hour as usize)
            .copied()
            .ok_or_else(|| Error::Input(format!("hour {hour} outside 0..=23")))
    }

    pub fn band_of_minute(&self, minute: u16) -> TimeBand {
        self.hours[(minute % MINUTES_PER_DAY) as usize / 60]
    }

    pub fn hours_in(&self, band: TimeBand) -> Vec<u32> {
        (0..24u32).filter(|&h| self.hours[h as usize] == band).collect()
    }

    /// Maximal runs of consecutive hours in `band` as `[start, end)` minute
    /// ranges. A run touching midnight is not merged across it.
    pub fn runs(&self, band: TimeBand) -> Vec<(u16, u16)> {
        let mut runs = Vec::new();
        let mut start = None;
        for h in 0..=24u16 {
            let inside = h < 24 && self.hours[h as usize] == band;
            match (inside, start) {
                (true, None) => start = Some(h),
                (false, Some(s)) => {
                    runs.push((s * 60, h * 60));
                    start = None;
                }
                _ => {}
            }
        }
        runs
    }
}

impl Default for BandTable {
    fn default() -> Self {
        use TimeBand::*;
        let mut hours = [T3Night; 24];
        for h in (7..10).chain(16..19) {
            hours[h] = T1Peak;
        }
        for h in (10..16).chain(19..22) {
            hours[h] = T2Offpeak;
        }
        BandTable { hours }
    }
}

impl TryFrom<BTreeMap<TimeBand, Vec<u32>>> for BandTable {
    type Error = Error;

    fn try_from(map: BTreeMap<TimeBand, Vec<u32>>) -> Result<Self> {
        let mut slots: [Option<TimeBand>; 24] = [None; 24];
        for (band, hours) in &map {
            for &h in hours {
                let slot = slots
                    .get_mut(h as usize)
                    .ok_or_else(|| Error::Config(format!("band table hour {h} outside 0..=23")))?;
                if let Some(prev) = slot.replace(*band) {
                    return Err(Error::Config(format!(
                        "band table hour {h} assigned to both {prev} and {band}"
                    )));
                }
            }
        }
        let mut hours = [TimeBand::T1Peak; 24];
        for (h, slot) in slots.iter().enumerate() {
            hours[h] = slot.ok_or_else(|| Error::Config(format!("band table does not cover hour {h}")))?;
        }
        Ok(BandTable { hours })
    }
}

impl From<BandTable> for BTreeMap<TimeBand, Vec<u32>> {
    fn from(table: BandTable) -> Self {
        TimeBand::ALL
            .into_iter()
            .map(|b| (b, table.hours_in(b)))
            .filter(|(_, hours)| !hours.is_empty())
            .collect()
    }
}

pub fn classify_hour(hour: u32, table: &BandTable) -> Result<TimeBand> {
    table.classify(hour)
}

/// Minute-resolution timestamp: day index plus minute of day.
///
/// Day 0 is 2023-01-01, a Sunday, so `day mod 7` in {0, 6} is a weekend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Timestamp {
    day: i32,
    minute: u16,
}

fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(2023, 1, 1).expect("valid epoch")
}

impl Timestamp {
    pub fn new(day: i32, minute: u16) -> Result<Self> {
        if minute >= MINUTES_PER_DAY {
            return Err(Error::Input(format!("minute of day {minute} outside 0..1440")));
        }
        Ok(Timestamp { day, minute })
    }

    pub fn from_total_minutes(total: i64) -> Self {
        let day = total.div_euclid(MINUTES_PER_DAY as i64) as i32;
        let minute = total.rem_euclid(MINUTES_PER_DAY as i64) as u16;
        Timestamp { day, minute }
    }

    pub fn day(self) -> i32 {
        self.day
    }

    pub fn minute_of_day(self) -> u16 {
        self.minute
    }

    pub fn hour(self) -> u32 {
        self.minute as u32 / 60
    }

    pub fn total_minutes(self) -> i64 {
        self.day as i64 * MINUTES_PER_DAY as i64 + self.minute as i64
    }

    pub fn plus_minutes(self, minutes: i64) -> Self {
        Self::from_total_minutes(self.total_minutes() + minutes)
    }

    pub fn is_weekend(self) -> bool {
        is_weekend_day(self.day)
    }

    pub fn to_iso(self) -> String {
        let date = epoch() + Duration::days(self.day as i64);
        format!(
            "{}T{:02}:{:02}",
            date.format("%Y-%m-%d"),
            self.minute / 60,
            self.minute % 60
        )
    }

    pub fn parse_iso(s: &str) -> Result<Self> {
        let dt = NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M")
            .map_err(|e| Error::Input(format!("bad timestamp `{s}`: {e}")))?;
        // Reject forms chrono tolerates but which would not round-trip.
        if Timestamp::from_datetime(dt).to_iso() != s {
            return Err(Error::Input(format!("non-canonical timestamp `{s}`")));
        }
        Ok(Timestamp::from_datetime(dt))
    }

    fn from_datetime(dt: NaiveDateTime) -> Self {
        let day = (dt.date() - epoch()).num_days() as i32;
        let minute = (dt.time() - chrono::NaiveTime::MIN).num_minutes() as u16;
        Timestamp { day, minute }
    }
}

pub fn is_weekend_day(day: i32) -> bool {
    matches!(day.rem_euclid(7), 0 | 6)
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_iso())
    }
}

impl Serialize for Timestamp {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_iso())
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Timestamp::parse_iso(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub x: f64,
    pub y: f64,
}

impl Location {
    pub fn distance(self, other: Location) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingProfile {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub label: String,
    pub category: AudienceCategory,
    pub density: f64,
    pub active_band: TimeBand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub id: StationId,
    pub name: String,
    pub location: Location,
    pub buildings: Vec<BuildingProfile>,
    pub screen_count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Brand {
    pub id: BrandId,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    pub category: AudienceCategory,
    pub station: StationId,
    /// Money per second of screen time (PR).
    pub per_second_rate: f64,
}

/// Habitual behaviour of a rider.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Routine {
    /// Commute destination; `None` for riders who do not commute.
    pub work_station: Option<StationId>,
    pub morning_minute: u16,
    pub evening_minute: u16,
    /// Preferred leisure destinations; empty means any station.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub leisure_stations: Vec<StationId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Person {
    pub id: PersonId,
    pub category: AudienceCategory,
    pub home_station: StationId,
    pub routine: Routine,
}

/// One smart-card journey (CIN/COUT with times).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TripEvent {
    pub person: PersonId,
    pub check_in_station: StationId,
    pub check_in_time: Timestamp,
    pub check_out_station: StationId,
    pub check_out_time: Timestamp,
}

impl TripEvent {
    pub fn validate(&self) -> Result<()> {
        if self.check_out_time <= self.check_in_time {
            return Err(Error::Input(format!(
                "check-out {} not after check-in {}",
                self.check_out_time, self.check_in_time
            )));
        }
        if self.check_in_station == self.check_out_station {
            return Err(Error::Input(format!(
                "check-in and check-out at the same station {}",
                self.check_in_station
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub station_count: u32,
    pub persons: u32,
    pub brands_per_station: u32,
    pub band_table: BandTable,
    /// Relative trip volume for T1, T2, T3.
    pub band_trip_ratio: [f64; 3],
    /// Distance D between neighbouring stations.
    pub station_spacing: f64,
    pub category_table: Vec<AudienceCategory>,
    /// Categories whose members commute home -> work on weekdays.
    pub commuter_categories: Vec<AudienceCategory>,
    pub minutes_per_station: u32,
    pub screens_per_station: u32,
    pub rng_seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            station_count: 7,
            persons: 1000,
            brands_per_station: 10,
            band_table: BandTable::default(),
            band_trip_ratio: [3.0, 2.0, 1.0],
            station_spacing: 1.0,
            category_table: ["student", "office_worker", "shopper", "other"]
                .into_iter()
                .map(AudienceCategory::from)
                .collect(),
            commuter_categories: ["student", "office_worker"]
                .into_iter()
                .map(AudienceCategory::from)
                .collect(),
            minutes_per_station: 3,
            screens_per_station: 2,
            rng_seed: 42,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.station_count == 0 {
            return Err(Error::Config("station_count must be positive".into()));
        }
        if self.persons == 0 {
            return Err(Error::Config("persons must be positive".into()));
        }
        if self.brands_per_station == 0 {
            return Err(Error::Config("brands_per_station must be positive".into()));
        }
        if self.category_table.is_empty() {
            return Err(Error::Config("category_table is empty".into()));
        }
        if self.band_trip_ratio.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Config("band_trip_ratio entries must be positive".into()));
        }
        if !(self.station_spacing.is_finite() && self.station_spacing > 0.0) {
            return Err(Error::Config("station_spacing must be positive".into()));
        }
        if self.minutes_per_station == 0 {
            return Err(Error::Config("minutes_per_station must be positive".into()));
        }
        if let Some(c) = self
            .commuter_categories
            .iter()
            .find(|c| !self.category_table.contains(c))
        {
            return Err(Error::Config(format!("commuter category `{c}` not in category_table")));
        }
        Ok(())
    }

    pub fn is_commuter(&self, category: &AudienceCategory) -> bool {
        self.commuter_categories.contains(category)
    }
}

/// Stations and brands of one simulated or fixture world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub stations: Vec<Station>,
    pub brands: Vec<Brand>,
}

impl World {
    pub fn station(&self, id: StationId) -> Result<&Station> {
        self.stations
            .iter()
            .find(|s| s.id == id)
            .ok_or(Error::UnknownStation(id.0))
    }

    pub fn station_by_name(&self, name: &str) -> Option<&Station> {
        self.stations.iter().find(|s| s.name == name)
    }

    pub fn contains(&self, id: StationId) -> bool {
        self.stations.iter().any(|s| s.id == id)
    }

    /// Position of the station along the line, used for travel times.
    pub fn line_index(&self, id: StationId) -> Result<usize> {
        self.stations
            .iter()
            .position(|s| s.id == id)
            .ok_or(Error::UnknownStation(id.0))
    }

    pub fn brands_at(&self, station: StationId) -> impl Iterator<Item = &Brand> {
        self.brands.iter().filter(move |b| b.station == station)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.stations.iter().enumerate() {
            for t in &self.stations[..i] {
                if t.id == s.id {
                    return Err(Error::Input(format!("duplicate station id {}", s.id)));
                }
                if t.location == s.location {
                    return Err(Error::Input(format!("stations {} and {} share a location", t.id, s.id)));
                }
            }
            if s.screen_count == 0 {
                return Err(Error::Input(format!("station {} has no screens", s.id)));
            }
            if s.buildings.iter().any(|b| b.density.is_nan() || b.density < 0.0) {
                return Err(Error::Input(format!(
                    "station {} has a negative building density",
                    s.id
                )));
            }
        }
        for b in &self.brands {
            if !self.contains(b.station) {
                return Err(Error::UnknownStation(b.station.0));
            }
            if b.per_second_rate.is_nan() || b.per_second_rate <= 0.0 {
                return Err(Error::Input(format!("brand {} has non-positive rate", b.id)));
            }
        }
        Ok(())
    }
}
