//! Ad slot pricing by visitor density and by nearby-building density.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{AdId, BrandId, StationId, TimeBand, World};
use crate::error::{Error, Result};
use crate::mining::AudienceHistogram;
use crate::scheduler::{Ad, AdSchedule, DayPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostModel {
    VisitorDensity,
    BuildingDensity,
}

impl CostModel {
    pub fn as_str(self) -> &'static str {
        match self {
            CostModel::VisitorDensity => "visitor_density",
            CostModel::BuildingDensity => "building_density",
        }
    }
}

impl fmt::Display for CostModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How the building-density total is formed.
///
/// `Literal` is `PR * SBF * CA` with `CA = PR * T`, which carries PR twice.
/// `Consistent` is `SBF * CA`, a plain money amount.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMode {
    Literal,
    #[default]
    Consistent,
}

impl FromStr for CostMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(CostMode::Literal),
            "consistent" => Ok(CostMode::Consistent),
            _ => Err(Error::Input(format!("unknown cost mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewRecord {
    pub ad: AdId,
    /// Viewers whose category matches the ad (VR).
    pub relevant_views: u64,
    pub per_viewer_second_rate: f64,
    pub display_seconds: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleRef {
    pub station: StationId,
    pub band: TimeBand,
    pub day: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineItem {
    pub ad: AdId,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub schedule_ref: ScheduleRef,
    pub model: CostModel,
    pub line_items: Vec<LineItem>,
    pub total: f64,
}

impl CostReport {
    fn new(schedule_ref: ScheduleRef, model: CostModel, line_items: Vec<LineItem>) -> Self {
        let total = line_items.iter().map(|l| l.cost).sum();
        CostReport {
            schedule_ref,
            model,
            line_items,
            total,
        }
    }
}

/// Per record: `VR * C(VR)` with `C(VR) = rate * seconds`.
pub fn cost_by_visitor_density(schedule_ref: ScheduleRef, records: &[ViewRecord]) -> Result<CostReport> {
    let items = records
        .iter()
        .map(|r| {
            if !(r.per_viewer_second_rate.is_finite() && r.per_viewer_second_rate >= 0.0) {
                return Err(Error::Input(format!(
                    "ad {}: per-viewer rate {} is not a non-negative number",
                    r.ad, r.per_viewer_second_rate
                )));
            }
            let view_cost = r.per_viewer_second_rate * r.display_seconds as f64;
            Ok(LineItem {
                ad: r.ad,
                cost: r.relevant_views as f64 * view_cost,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CostReport::new(schedule_ref, CostModel::VisitorDensity, items))
}

pub fn cost_by_building_density(per_second_rate: f64, sbf: f64, seconds: f64, mode: CostMode) -> Result<f64> {
    for (name, v) in [("per-second rate", per_second_rate), ("SBF", sbf), ("seconds", seconds)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::Input(format!("{name} must be non-negative, got {v}")));
        }
    }
    let ad_cost = per_second_rate * seconds;
    Ok(match mode {
        CostMode::Literal => per_second_rate * sbf * ad_cost,
        CostMode::Consistent => sbf * ad_cost,
    })
}

fn active_density(world: &World, station: StationId, band: TimeBand) -> Result<f64> {
    Ok(world
        .station(station)?
        .buildings
        .iter()
        .filter(|b| b.active_band == band)
        .map(|b| b.density)
        .sum())
}

/// Active building density at the station over the mean across stations.
pub fn station_business_factor(world: &World, station: StationId, band: TimeBand) -> Result<f64> {
    let own = active_density(world, station, band)?;
    let mut sum = 0.0;
    for s in &world.stations {
        sum += active_density(world, s.id, band)?;
    }
    let mean = sum / world.stations.len() as f64;
    Ok(if mean > 0.0 { (own / mean).max(0.0) } else { 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbfOverride {
    pub station: StationId,
    pub band: TimeBand,
    pub sbf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostParams {
    /// Money per viewer per second of display.
    pub viewer_second_rate: f64,
    pub mode: CostMode,
    pub sbf_overrides: Vec<SbfOverride>,
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams {
            viewer_second_rate: 0.0005,
            mode: CostMode::Consistent,
            sbf_overrides: Vec::new(),
        }
    }
}

impl CostParams {
    pub fn sbf(&self, world: &World, station: StationId, band: TimeBand) -> Result<f64> {
        match self
            .sbf_overrides
            .iter()
            .find(|o| o.station == station && o.band == band)
        {
            Some(o) if o.sbf >= 0.0 => Ok(o.sbf),
            Some(o) => Err(Error::Config(format!("negative SBF override {}", o.sbf))),
            None => station_business_factor(world, station, band),
        }
    }
}

/// Prices every schedule of `plan` under both cost models.
pub fn price_plan(
    plan: &DayPlan,
    world: &World,
    audience: &[AudienceHistogram],
    ads: &[Ad],
    params: &CostParams,
) -> Result<Vec<CostReport>> {
    let ad_index: HashMap<AdId, &Ad> = ads.iter().map(|a| (a.id, a)).collect();
    let rate_of: HashMap<BrandId, f64> = world.brands.iter().map(|b| (b.id, b.per_second_rate)).collect();
    let hist_of: HashMap<(StationId, TimeBand), &AudienceHistogram> =
        audience.iter().map(|h| ((h.station, h.band), h)).collect();
    let mut reports = Vec::with_capacity(plan.schedules.len() * 2);
    for schedule in &plan.schedules {
        let schedule_ref = ScheduleRef {
            station: schedule.station,
            band: schedule.band,
            day: plan.day,
        };
        reports.push(price_visitor_density(
            schedule,
            schedule_ref,
            &ad_index,
            hist_of.get(&(schedule.station, schedule.band)).copied(),
            params,
        )?);
        let sbf = params.sbf(world, schedule.station, schedule.band)?;
        let items = schedule
            .entries
            .iter()
            .map(|e| {
                let rate = ad_index
                    .get(&e.ad)
                    .and_then(|a| rate_of.get(&a.brand))
                    .copied()
                    .unwrap_or(0.0);
                Ok(LineItem {
                    ad: e.ad,
                    cost: cost_by_building_density(rate, sbf, e.tos_seconds as f64, params.mode)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        reports.push(CostReport::new(schedule_ref, CostModel::BuildingDensity, items));
    }
    Ok(reports)
}

fn price_visitor_density(
    schedule: &AdSchedule,
    schedule_ref: ScheduleRef,
    ads: &HashMap<AdId, &Ad>,
    hist: Option<&AudienceHistogram>,
    params: &CostParams,
) -> Result<CostReport> {
    let records: Vec<ViewRecord> = schedule
        .entries
        .iter()
        .map(|e| ViewRecord {
            ad: e.ad,
            relevant_views: match (ads.get(&e.ad), hist) {
                (Some(ad), Some(h)) => h.count(&ad.category) as u64,
                _ => 0,
            },
            per_viewer_second_rate: params.viewer_second_rate,
            display_seconds: e.tos_seconds as u64,
        })
        .collect();
    cost_by_visitor_density(schedule_ref, &records)
}
