use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{AdId, AudienceCategory, BrandId, Station, StationId, TimeBand};
use crate::error::{Error, Result};
use crate::mining::AudienceHistogram;
use crate::scheduler::apportion::apportion;

/// Shown when a station has no ads at all.
pub const HOUSE_AD: AdId = AdId(0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    MaxAudience,
    AudienceRatio,
    NearestBuildings,
    BuildingRatio,
}

impl Policy {
    pub const ALL: [Policy; 4] = [
        Policy::MaxAudience,
        Policy::AudienceRatio,
        Policy::NearestBuildings,
        Policy::BuildingRatio,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::MaxAudience => "max_audience",
            Policy::AudienceRatio => "audience_ratio",
            Policy::NearestBuildings => "nearest_buildings",
            Policy::BuildingRatio => "building_ratio",
        }
    }

    /// Audience-driven member of this policy's family.
    pub fn audience_variant(self) -> Policy {
        match self {
            Policy::MaxAudience | Policy::NearestBuildings => Policy::MaxAudience,
            Policy::AudienceRatio | Policy::BuildingRatio => Policy::AudienceRatio,
        }
    }

    /// Building-driven member of this policy's family.
    pub fn building_variant(self) -> Policy {
        match self {
            Policy::MaxAudience | Policy::NearestBuildings => Policy::NearestBuildings,
            Policy::AudienceRatio | Policy::BuildingRatio => Policy::BuildingRatio,
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Policy::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Input(format!("unknown policy `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ad {
    pub id: AdId,
    pub brand: BrandId,
    pub category: AudienceCategory,
    /// Feedback-adjusted preference among ads of one category.
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub ad: AdId,
    pub tos_seconds: u32,
}

/// One screen slot: ads with their time on screen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdSchedule {
    pub station: StationId,
    pub band: TimeBand,
    pub slot_seconds: u32,
    pub policy: Policy,
    pub fallback: bool,
    pub entries: Vec<ScheduleEntry>,
}

impl AdSchedule {
    fn new(
        station: StationId,
        band: TimeBand,
        slot_seconds: u32,
        policy: Policy,
        mut entries: Vec<ScheduleEntry>,
    ) -> Self {
        entries.sort_by(|a, b| b.tos_seconds.cmp(&a.tos_seconds).then(a.ad.cmp(&b.ad)));
        AdSchedule {
            station,
            band,
            slot_seconds,
            policy,
            fallback: false,
            entries,
        }
    }

    /// Entry with the most screen time (lowest ad id on ties).
    pub fn top(&self) -> Option<&ScheduleEntry> {
        self.entries.first()
    }

    pub fn total_seconds(&self) -> u64 {
        self.entries.iter().map(|e| e.tos_seconds as u64).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_seconds() != self.slot_seconds as u64 {
            return Err(Error::Input(format!(
                "schedule for station {} {} fills {} of {} seconds",
                self.station,
                self.band,
                self.total_seconds(),
                self.slot_seconds
            )));
        }
        let distinct: BTreeSet<AdId> = self.entries.iter().map(|e| e.ad).collect();
        if distinct.len() != self.entries.len() {
            return Err(Error::Input(format!(
                "schedule for station {} {} repeats an ad",
                self.station, self.band
            )));
        }
        Ok(())
    }
}

fn check_slot(slot_seconds: u32) -> Result<()> {
    if slot_seconds == 0 {
        return Err(Error::Input("slot_seconds must be positive".into()));
    }
    Ok(())
}

/// Highest-weight ad of `category`; ties go to the lowest id.
pub fn best_ad<'a>(ads: &'a [Ad], category: &AudienceCategory) -> Option<&'a Ad> {
    best_ad_excluding(ads, category, &BTreeSet::new())
}

fn best_ad_excluding<'a>(ads: &'a [Ad], category: &AudienceCategory, taken: &BTreeSet<AdId>) -> Option<&'a Ad> {
    ads.iter()
        .filter(|a| &a.category == category && !taken.contains(&a.id))
        .min_by(|a, b| b.weight.total_cmp(&a.weight).then(a.id.cmp(&b.id)))
}

/// Even rotation over every ad at the station. `rotation` picks which ads
/// receive the leftover seconds, so successive slots take turns.
pub fn fallback_schedule(
    station: StationId,
    band: TimeBand,
    ads: &[Ad],
    slot_seconds: u32,
    policy: Policy,
    rotation: usize,
) -> AdSchedule {
    let mut ids: Vec<AdId> = ads.iter().map(|a| a.id).collect::<BTreeSet<_>>().into_iter().collect();
    if ids.is_empty() {
        ids.push(HOUSE_AD);
    }
    let k = ids.len();
    let (base, extra) = (slot_seconds / k as u32, slot_seconds as usize % k);
    let entries = (0..k)
        .map(|i| {
            let turn = (i + k - rotation % k) % k;
            ScheduleEntry {
                ad: ids[i],
                tos_seconds: base + u32::from(turn < extra),
            }
        })
        .filter(|e| e.tos_seconds > 0)
        .collect();
    let mut schedule = AdSchedule::new(station, band, slot_seconds, policy, entries);
    schedule.fallback = true;
    schedule
}

fn whole_slot(station: StationId, band: TimeBand, slot_seconds: u32, policy: Policy, ad: AdId) -> AdSchedule {
    AdSchedule::new(
        station,
        band,
        slot_seconds,
        policy,
        vec![ScheduleEntry {
            ad,
            tos_seconds: slot_seconds,
        }],
    )
}

/// Whole slot to the best ad of the most represented category that has one.
pub fn policy_max_audience(hist: &AudienceHistogram, ads: &[Ad], slot_seconds: u32) -> Result<AdSchedule> {
    check_slot(slot_seconds)?;
    let winner = hist
        .counts
        .iter()
        .filter(|(_, &n)| n > 0)
        .filter_map(|(c, &n)| best_ad(ads, c).map(|ad| (n, ad)))
        .fold(None, |best: Option<(u32, &Ad)>, (n, ad)| match best {
            Some((m, _)) if m >= n => best,
            _ => Some((n, ad)),
        });
    Ok(match winner {
        Some((_, ad)) => whole_slot(hist.station, hist.band, slot_seconds, Policy::MaxAudience, ad.id),
        None => fallback_schedule(hist.station, hist.band, ads, slot_seconds, Policy::MaxAudience, 0),
    })
}

/// Slot shared in proportion to category counts, one ad per category.
pub fn policy_audience_ratio(hist: &AudienceHistogram, ads: &[Ad], slot_seconds: u32) -> Result<AdSchedule> {
    check_slot(slot_seconds)?;
    let shares: Vec<(AdId, u64)> = hist
        .counts
        .iter()
        .filter(|(_, &n)| n > 0)
        .filter_map(|(c, &n)| best_ad(ads, c).map(|ad| (ad.id, n as u64)))
        .collect();
    Ok(ratio_schedule(
        hist.station,
        hist.band,
        &shares,
        ads,
        slot_seconds,
        Policy::AudienceRatio,
    ))
}

fn ratio_schedule(
    station: StationId,
    band: TimeBand,
    shares: &[(AdId, u64)],
    ads: &[Ad],
    slot_seconds: u32,
    policy: Policy,
) -> AdSchedule {
    let split = apportion(shares, slot_seconds);
    if split.is_empty() {
        return fallback_schedule(station, band, ads, slot_seconds, policy, 0);
    }
    let entries = split
        .into_iter()
        .map(|(ad, tos_seconds)| ScheduleEntry { ad, tos_seconds })
        .collect();
    AdSchedule::new(station, band, slot_seconds, policy, entries)
}

/// Whole slot to the densest building active in `band` that has a matching ad.
pub fn policy_nearest_buildings(
    station: &Station,
    band: TimeBand,
    ads: &[Ad],
    slot_seconds: u32,
) -> Result<AdSchedule> {
    check_slot(slot_seconds)?;
    let winner = station
        .buildings
        .iter()
        .filter(|b| b.active_band == band)
        .filter_map(|b| best_ad(ads, &b.category).map(|ad| (b.density, ad)))
        .fold(None, |best: Option<(f64, &Ad)>, (d, ad)| match best {
            Some((m, _)) if m >= d => best,
            _ => Some((d, ad)),
        });
    Ok(match winner {
        Some((_, ad)) => whole_slot(station.id, band, slot_seconds, Policy::NearestBuildings, ad.id),
        None => fallback_schedule(station.id, band, ads, slot_seconds, Policy::NearestBuildings, 0),
    })
}

/// Slot shared in proportion to per-building visitor counts. Each building
/// gets its own ad: the best one of its category not already claimed by a
/// busier building.
pub fn policy_building_ratio(
    station: &Station,
    band: TimeBand,
    visitor_counts: &BTreeMap<usize, u64>,
    ads: &[Ad],
    slot_seconds: u32,
) -> Result<AdSchedule> {
    check_slot(slot_seconds)?;
    if let Some(&i) = visitor_counts.keys().find(|&&i| i >= station.buildings.len()) {
        return Err(Error::Input(format!(
            "station {} has no building with index {i}",
            station.id
        )));
    }
    let mut order: Vec<(usize, u64)> = visitor_counts
        .iter()
        .map(|(&i, &n)| (i, n))
        .filter(|(_, n)| *n > 0)
        .collect();
    order.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut taken = BTreeSet::new();
    let mut shares = Vec::new();
    for (i, n) in order {
        if let Some(ad) = best_ad_excluding(ads, &station.buildings[i].category, &taken) {
            taken.insert(ad.id);
            shares.push((ad.id, n));
        }
    }
    Ok(ratio_schedule(
        station.id,
        band,
        &shares,
        ads,
        slot_seconds,
        Policy::BuildingRatio,
    ))
}
