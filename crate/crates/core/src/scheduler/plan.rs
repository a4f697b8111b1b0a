use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::domain::{AdId, BrandId, Station, StationId, TimeBand, World};
use crate::error::{Error, Result};
use crate::mining::AudienceHistogram;
use crate::scheduler::feedback::DEFAULT_DECAY;
use crate::scheduler::policy::{
    fallback_schedule, policy_audience_ratio, policy_building_ratio, policy_max_audience, policy_nearest_buildings, Ad,
    AdSchedule, Policy,
};

/// Scale applied to building densities when they stand in for visitor counts.
pub const BUILDING_VISITOR_SCALE: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleParams {
    pub slot_seconds: u32,
    /// Predicted viewers at or above which audience-based policies apply.
    pub density_threshold: u64,
    pub feedback_decay: f64,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        ScheduleParams {
            slot_seconds: 300,
            density_threshold: 10,
            feedback_decay: DEFAULT_DECAY,
        }
    }
}

impl ScheduleParams {
    pub fn validate(&self) -> Result<()> {
        if self.slot_seconds == 0 {
            return Err(Error::Config("slot_seconds must be positive".into()));
        }
        if !(self.feedback_decay > 0.0 && self.feedback_decay <= 1.0) {
            return Err(Error::Config("feedback_decay must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// One ad per brand, sharing the brand's id, at neutral weight.
pub fn ads_for_world(world: &World) -> Vec<Ad> {
    world
        .brands
        .iter()
        .map(|b| Ad {
            id: AdId(b.id.0),
            brand: b.id,
            category: b.category.clone(),
            weight: 1.0,
        })
        .collect()
}

/// Visitor counts for buildings active in `band`, from their densities.
pub fn building_visitor_estimate(station: &Station, band: TimeBand) -> BTreeMap<usize, u64> {
    station
        .buildings
        .iter()
        .enumerate()
        .filter(|(_, b)| b.active_band == band)
        .map(|(i, b)| (i, (b.density * BUILDING_VISITOR_SCALE).round() as u64))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayPlan {
    pub day: u32,
    pub policy: Policy,
    pub schedules: Vec<AdSchedule>,
}

impl DayPlan {
    pub fn get(&self, station: StationId, band: TimeBand) -> Option<&AdSchedule> {
        self.schedules.iter().find(|s| s.station == station && s.band == band)
    }
}

/// Schedules every (station, band) slot of `world` for one day.
///
/// Bands whose predicted audience reaches the density threshold use the
/// audience member of `policy`'s family, the rest use the building member.
pub fn build_day_schedule(
    world: &World,
    audience: &[AudienceHistogram],
    ads: &[Ad],
    policy: Policy,
    params: &ScheduleParams,
    day: u32,
) -> Result<DayPlan> {
    params.validate()?;
    let station_of: HashMap<BrandId, StationId> = world.brands.iter().map(|b| (b.id, b.station)).collect();
    let by_slot: HashMap<(StationId, TimeBand), &AudienceHistogram> =
        audience.iter().map(|h| ((h.station, h.band), h)).collect();
    let mut schedules = Vec::with_capacity(world.stations.len() * 3);
    for (n, station) in world.stations.iter().enumerate() {
        let local: Vec<Ad> = ads
            .iter()
            .filter(|a| station_of.get(&a.brand) == Some(&station.id))
            .cloned()
            .collect();
        for band in TimeBand::ALL {
            let empty;
            let hist = match by_slot.get(&(station.id, band)) {
                Some(h) => *h,
                None => {
                    empty = AudienceHistogram::zeroed(station.id, band, &[]);
                    &empty
                }
            };
            let slot = params.slot_seconds;
            let mut schedule = if hist.total() >= params.density_threshold {
                match policy.audience_variant() {
                    Policy::MaxAudience => policy_max_audience(hist, &local, slot)?,
                    _ => policy_audience_ratio(hist, &local, slot)?,
                }
            } else {
                match policy.building_variant() {
                    Policy::NearestBuildings => policy_nearest_buildings(station, band, &local, slot)?,
                    _ => {
                        let visitors = building_visitor_estimate(station, band);
                        policy_building_ratio(station, band, &visitors, &local, slot)?
                    }
                }
            };
            if schedule.fallback {
                let rotation = day as usize + n * 3 + band.index();
                schedule = fallback_schedule(station.id, band, &local, slot, schedule.policy, rotation);
            }
            schedules.push(schedule);
        }
    }
    Ok(DayPlan { day, policy, schedules })
}
