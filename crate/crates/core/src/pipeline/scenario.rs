use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{AdId, AudienceCategory, PersonId, StationId, TimeBand, World};
use crate::error::{Error, Result};
use crate::mining::{ClusterId, TimeWindow};
use crate::pipeline::{ClusterReport, RunConfig};
use crate::scheduler::{ads_for_world, apply_feedback, build_day_schedule, Ad, AdSchedule, DayPlan, FeedbackEvent};
use crate::sim::{Population, TripLog};

pub(crate) const SETTINGS_FILE: &str = "scenario.toml";

/// What the scenario follows: one rider and their feedback file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSettings {
    pub focus_person: PersonId,
    #[serde(default = "default_feedback_file")]
    pub feedback_file: String,
}

fn default_feedback_file() -> String {
    "feedback.csv".into()
}

impl ScenarioSettings {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(toml::from_str(&text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalMatch {
    pub cluster: ClusterId,
    pub band: TimeBand,
    pub window: TimeWindow,
    /// Window as `HH:MM-HH:MM`.
    pub window_label: String,
    pub covered: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialMatch {
    pub cluster: ClusterId,
    pub origin: String,
    pub destination: String,
    pub dominant_category: Option<AudienceCategory>,
    pub covered: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShownAd {
    pub ad: AdId,
    pub brand: String,
    pub category: AudienceCategory,
    pub tos_seconds: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub focus_person: PersonId,
    pub category: AudienceCategory,
    pub home_station: String,
    pub work_station: String,
    /// Weekday home-to-work trips of the focus rider.
    pub commute_trips: usize,
    pub temporal: Option<TemporalMatch>,
    pub temporal_coverage: f64,
    pub spatial: Option<SpatialMatch>,
    pub spatial_coverage: f64,
    pub schedule_band: TimeBand,
    pub schedule_before: AdSchedule,
    pub schedule_after: AdSchedule,
    /// Entry with the most screen time before feedback.
    pub top_before: Option<ShownAd>,
    /// Ad shown to the rider's category before and after feedback.
    pub shown_before: Option<ShownAd>,
    pub shown_after: Option<ShownAd>,
    pub feedback_events: usize,
    pub ads_after: Vec<Ad>,
}

fn hhmm(minute: u16) -> String {
    format!("{:02}:{:02}", minute / 60, minute % 60)
}

fn shown(schedule: &AdSchedule, ads: &[Ad], world: &World, category: Option<&AudienceCategory>) -> Option<ShownAd> {
    schedule.entries.iter().find_map(|e| {
        let ad = ads
            .iter()
            .find(|a| a.id == e.ad && category.is_none_or(|c| &a.category == c))?;
        let brand = world.brands.iter().find(|b| b.id == ad.brand)?;
        Some(ShownAd {
            ad: ad.id,
            brand: brand.name.clone(),
            category: ad.category.clone(),
            tos_seconds: e.tos_seconds,
        })
    })
}

/// Cluster holding most of `trips`, lowest id on ties.
fn best_cover<'a, C>(clusters: &'a [C], members: impl Fn(&C) -> &[usize], trips: &[usize]) -> Option<(&'a C, usize)> {
    clusters
        .iter()
        .map(|c| {
            let m = members(c);
            (c, trips.iter().filter(|i| m.binary_search(i).is_ok()).count())
        })
        .filter(|(_, n)| *n > 0)
        .fold(None, |best, (c, n)| match best {
            Some((_, m)) if m >= n => best,
            _ => Some((c, n)),
        })
}

/// Follows the focus rider through clustering, scheduling and one round of
/// feedback. Also returns the day plan rebuilt after feedback.
pub fn analyze_scenario(
    config: &RunConfig,
    settings: &ScenarioSettings,
    world: &World,
    population: &Population,
    log: &TripLog,
    clusters: &ClusterReport,
    events: &[FeedbackEvent],
) -> Result<(ScenarioOutcome, DayPlan)> {
    let person = population.person(settings.focus_person).ok_or_else(|| {
        Error::Input(format!(
            "focus person {} is not in the population",
            settings.focus_person
        ))
    })?;
    let home = person.home_station;
    let work: StationId = person
        .routine
        .work_station
        .ok_or_else(|| Error::Input(format!("focus person {} has no work station", person.id)))?;

    let commute: Vec<usize> = log
        .events
        .iter()
        .enumerate()
        .filter(|(_, e)| {
            e.person == person.id
                && e.check_in_station == home
                && e.check_out_station == work
                && !e.check_in_time.is_weekend()
        })
        .map(|(i, _)| i)
        .collect();
    let denom = commute.len().max(1) as f64;

    let temporal = best_cover(&clusters.temporal, |c| &c.cluster.member_trip_indices, &commute).map(|(c, n)| {
        let c = &c.cluster;
        TemporalMatch {
            cluster: c.id,
            band: c.band,
            window: c.time_window,
            window_label: format!("{}-{}", hhmm(c.time_window.start), hhmm(c.time_window.end)),
            covered: n,
        }
    });
    let spatial = best_cover(&clusters.spatial, |c| &c.member_trip_indices, &commute)
        .map(|(c, n)| -> Result<SpatialMatch> {
            Ok(SpatialMatch {
                cluster: c.id,
                origin: world.station(c.dominant_od_pair.0)?.name.clone(),
                destination: world.station(c.dominant_od_pair.1)?.name.clone(),
                dominant_category: c.category_mix.argmax().map(|(cat, _)| cat.clone()),
                covered: n,
            })
        })
        .transpose()?;

    let schedule_band = temporal.as_ref().map_or(TimeBand::T1Peak, |t| t.band);
    let ads = ads_for_world(world);
    let params = &config.schedule;
    let before = build_day_schedule(
        world,
        &clusters.audience,
        &ads,
        config.run.policy,
        params,
        config.run.day,
    )?;
    let ads_after = apply_feedback(&ads, events, params.feedback_decay)?;
    let after = build_day_schedule(
        world,
        &clusters.audience,
        &ads_after,
        config.run.policy,
        params,
        config.run.day,
    )?;
    let slot = |plan: &DayPlan| {
        plan.get(work, schedule_band)
            .cloned()
            .ok_or(Error::UnknownStation(work.0))
    };
    let schedule_before = slot(&before)?;
    let schedule_after = slot(&after)?;

    let changed: BTreeMap<AdId, f64> = ads_after.iter().map(|a| (a.id, a.weight)).collect();
    let ads_after: Vec<Ad> = ads
        .iter()
        .filter(|a| changed.get(&a.id) != Some(&a.weight))
        .map(|a| Ad {
            weight: changed[&a.id],
            ..a.clone()
        })
        .collect();

    let outcome = ScenarioOutcome {
        focus_person: person.id,
        category: person.category.clone(),
        home_station: world.station(home)?.name.clone(),
        work_station: world.station(work)?.name.clone(),
        commute_trips: commute.len(),
        temporal_coverage: temporal.as_ref().map_or(0.0, |t| t.covered as f64 / denom),
        temporal,
        spatial_coverage: spatial.as_ref().map_or(0.0, |s| s.covered as f64 / denom),
        spatial,
        schedule_band,
        top_before: shown(&schedule_before, &ads, world, None),
        shown_before: shown(&schedule_before, &ads, world, Some(&person.category)),
        shown_after: shown(&schedule_after, &ads, world, Some(&person.category)),
        schedule_before,
        schedule_after,
        feedback_events: events.len(),
        ads_after,
    };
    Ok((outcome, after))
}
