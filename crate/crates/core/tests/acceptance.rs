//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{labels, oracle_dbscan, random_instance};
use metro_ads::cost::{cost_by_building_density, cost_by_visitor_density, CostMode, ScheduleRef, ViewRecord};
use metro_ads::domain::{
    AdId, AudienceCategory, BrandId, BuildingProfile, Location, PersonId, Station, StationId, TimeBand, Timestamp,
    World,
};
use metro_ads::io;
use metro_ads::mining::{dbscan, AudienceHistogram, PointSet};
use metro_ads::pipeline::{ExternalInputs, Pipeline, RunConfig, ScenarioOutcome, Stage};
use metro_ads::scheduler::{
    apply_feedback, fallback_schedule, policy_audience_ratio, policy_building_ratio, policy_max_audience,
    policy_nearest_buildings, Ad, AdSchedule, FeedbackEvent, Polarity, Policy, HOUSE_AD, WEIGHT_FLOOR,
};
use metro_ads::sim::{Population, TripLog};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BAND_SHARE_TOLERANCE: f64 = 0.05;
const SIMULATE_BUDGET: Duration = Duration::from_secs(10);
const DBSCAN_INSTANCES: usize = 500;
const DBSCAN_MAX_POINTS: usize = 200;
const DBSCAN_BUDGET: Duration = Duration::from_secs(60);
const CASES_PER_POLICY: usize = 1000;
const COST_TOLERANCE: f64 = 1e-9;
const FEEDBACK_SEQUENCES: usize = 1000;
const FEEDBACK_TOLERANCE: f64 = 1e-12;
const SCENARIO_COVERAGE: f64 = 0.9;
const SCENARIO_BUDGET: Duration = Duration::from_secs(10);

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixture_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/metro")
}

fn odd_initialization() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let p = Pipeline::new(RunConfig::default(), dir.path()).map_err(|e| e.to_string())?;
    p.run(Stage::Simulate, &ExternalInputs::default())
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let world: World = io::read_json(&dir.path().join("world.json")).map_err(|e| e.to_string())?;
    let population: Population = io::read_json(&dir.path().join("persons.json")).map_err(|e| e.to_string())?;
    let log = io::ingest_trip_log(&dir.path().join("trips.csv"), &world)
        .map_err(|e| e.to_string())?
        .log;
    ensure(population.persons.len() == 1000, || {
        format!("{} persons", population.persons.len())
    })?;
    ensure(world.stations.len() == 7, || {
        format!("{} stations", world.stations.len())
    })?;
    ensure(world.brands.len() == 70, || format!("{} brands", world.brands.len()))?;
    ensure(log.day_count == 30, || format!("{} days", log.day_count))?;
    let counts = log.band_counts(&RunConfig::default().world.band_table);
    let total: u64 = counts.iter().sum();
    let target = [3.0 / 6.0, 2.0 / 6.0, 1.0 / 6.0];
    let mut worst: f64 = 0.0;
    for (c, t) in counts.iter().zip(target) {
        let share = *c as f64 / total as f64;
        worst = worst.max((share - t).abs() / t);
    }
    ensure(worst <= BAND_SHARE_TOLERANCE, || {
        format!("band shares off by {:.2}%", worst * 100.0)
    })?;
    ensure(elapsed < SIMULATE_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "1000 persons, 7 stations, 70 brands, {total} trips, worst band error {:.2}%, {:.2?}",
        worst * 100.0,
        elapsed
    ))
}

fn dbscan_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce);
    let start = Instant::now();
    let mut circular = 0;
    for case in 0..DBSCAN_INSTANCES {
        let inst = random_instance(&mut rng, DBSCAN_MAX_POINTS);
        circular += usize::from(inst.metric == metro_ads::mining::Metric::CircularMinutes);
        let set = PointSet::new(inst.points.clone(), inst.metric).map_err(|e| e.to_string())?;
        let got = labels(&dbscan(&set, inst.eps, inst.min_pts).map_err(|e| e.to_string())?);
        let want = oracle_dbscan(&inst.points, inst.metric, inst.eps, inst.min_pts);
        ensure(got == want, || format!("instance {case} differs from the oracle"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < DBSCAN_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{DBSCAN_INSTANCES} instances ({circular} circular) identical to the oracle, {elapsed:.2?}"
    ))
}

fn random_ads(rng: &mut ChaCha8Rng, categories: usize) -> Vec<Ad> {
    (0..rng.gen_range(0..12))
        .map(|i| Ad {
            id: AdId(i + 1),
            brand: BrandId(i + 1),
            // One index past the histogram's categories matches nothing.
            category: AudienceCategory::new(format!("c{}", rng.gen_range(0..=categories))),
            weight: rng.gen_range(1..4) as f64 * 0.5,
        })
        .collect()
}

fn random_hist(rng: &mut ChaCha8Rng, categories: usize) -> AudienceHistogram {
    AudienceHistogram {
        station: StationId(1),
        band: TimeBand::T1Peak,
        counts: (0..categories)
            .map(|c| {
                (
                    AudienceCategory::new(format!("c{c}")),
                    if rng.gen_bool(0.2) { 0 } else { rng.gen_range(0..500) },
                )
            })
            .collect(),
    }
}

fn ordered(s: &AdSchedule, count_of: &HashMap<AdId, u64>) -> bool {
    s.entries.iter().all(|a| {
        s.entries.iter().all(|b| {
            let (ca, cb) = (count_of[&a.ad], count_of[&b.ad]);
            (ca <= cb || a.tos_seconds > b.tos_seconds) && (ca != cb || a.tos_seconds.abs_diff(b.tos_seconds) <= 1)
        })
    })
}

/// Visitor count behind each ad: busiest buildings claim the best free ad
/// of their category first.
fn claimed_counts(station: &Station, visitors: &BTreeMap<usize, u64>, ads: &[Ad]) -> HashMap<AdId, u64> {
    let mut order: Vec<(usize, u64)> = visitors.iter().map(|(&i, &n)| (i, n)).filter(|p| p.1 > 0).collect();
    order.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut claimed = HashMap::new();
    for (i, n) in order {
        let pick = ads
            .iter()
            .filter(|a| a.category == station.buildings[i].category && !claimed.contains_key(&a.id))
            .min_by(|a, b| b.weight.total_cmp(&a.weight).then(a.id.cmp(&b.id)));
        if let Some(a) = pick {
            claimed.insert(a.id, n);
        }
    }
    claimed
}

fn fallback_ok(s: &AdSchedule, ads: &[Ad]) -> bool {
    if ads.is_empty() {
        s.entries.len() == 1 && s.entries[0].ad == HOUSE_AD
    } else {
        s.entries.iter().all(|e| ads.iter().any(|a| a.id == e.ad))
    }
}

fn allocation_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xa110c);
    let mut fallbacks = [0usize; 4];
    for case in 0..CASES_PER_POLICY {
        let k = rng.gen_range(1..6);
        let hist = random_hist(&mut rng, k);
        let ads = random_ads(&mut rng, k);
        let slot = rng.gen_range(1..2000);
        let fail = |p: Policy, what: &str| format!("{p} case {case}: {what}");

        let s = policy_max_audience(&hist, &ads, slot).map_err(|e| e.to_string())?;
        s.validate().map_err(|e| fail(Policy::MaxAudience, &e.to_string()))?;
        let scale = rng.gen_range(2..100);
        let scaled = AudienceHistogram {
            counts: hist.counts.iter().map(|(c, n)| (c.clone(), n * scale)).collect(),
            ..hist.clone()
        };
        let s2 = policy_max_audience(&scaled, &ads, slot).map_err(|e| e.to_string())?;
        ensure(s2.entries == s.entries, || {
            fail(Policy::MaxAudience, "argmax changed under scaling")
        })?;
        ensure(!s.fallback || fallback_ok(&s, &ads), || {
            fail(Policy::MaxAudience, "bad fallback")
        })?;
        fallbacks[0] += usize::from(s.fallback);

        let s = policy_audience_ratio(&hist, &ads, slot).map_err(|e| e.to_string())?;
        s.validate().map_err(|e| fail(Policy::AudienceRatio, &e.to_string()))?;
        let count_of: HashMap<AdId, u64> = ads.iter().map(|a| (a.id, hist.count(&a.category) as u64)).collect();
        ensure(s.fallback || ordered(&s, &count_of), || {
            fail(Policy::AudienceRatio, "count order broken")
        })?;
        ensure(!s.fallback || fallback_ok(&s, &ads), || {
            fail(Policy::AudienceRatio, "bad fallback")
        })?;
        fallbacks[1] += usize::from(s.fallback);

        let buildings: Vec<BuildingProfile> = (0..rng.gen_range(1..6))
            .map(|_| BuildingProfile {
                label: String::new(),
                category: AudienceCategory::new(format!("c{}", rng.gen_range(0..=k))),
                density: rng.gen_range(0.05..1.0),
                active_band: TimeBand::ALL[rng.gen_range(0..3)],
            })
            .collect();
        let station = Station {
            id: StationId(1),
            name: "S1".into(),
            location: Location { x: 0.0, y: 0.0 },
            buildings,
            screen_count: 1,
        };
        let band = TimeBand::ALL[rng.gen_range(0..3)];
        let s = policy_nearest_buildings(&station, band, &ads, slot).map_err(|e| e.to_string())?;
        s.validate()
            .map_err(|e| fail(Policy::NearestBuildings, &e.to_string()))?;
        ensure(s.fallback || s.entries.len() == 1, || {
            fail(Policy::NearestBuildings, "split slot")
        })?;
        ensure(!s.fallback || fallback_ok(&s, &ads), || {
            fail(Policy::NearestBuildings, "bad fallback")
        })?;
        fallbacks[2] += usize::from(s.fallback);

        let visitors: BTreeMap<usize, u64> = (0..station.buildings.len())
            .map(|i| (i, if rng.gen_bool(0.2) { 0 } else { rng.gen_range(0..500) }))
            .collect();
        let s = policy_building_ratio(&station, band, &visitors, &ads, slot).map_err(|e| e.to_string())?;
        s.validate().map_err(|e| fail(Policy::BuildingRatio, &e.to_string()))?;
        ensure(!s.fallback || fallback_ok(&s, &ads), || {
            fail(Policy::BuildingRatio, "bad fallback")
        })?;
        ensure(
            s.fallback || ordered(&s, &claimed_counts(&station, &visitors, &ads)),
            || fail(Policy::BuildingRatio, "count order broken"),
        )?;
        fallbacks[3] += usize::from(s.fallback);

        let rotation = rng.gen_range(0..50);
        let f = fallback_schedule(StationId(1), band, &ads, slot, Policy::AudienceRatio, rotation);
        f.validate().map_err(|e| format!("fallback case {case}: {e}"))?;
        ensure(fallback_ok(&f, &ads), || format!("fallback case {case}: foreign ad"))?;
    }
    Ok(format!(
        "{CASES_PER_POLICY} cases per policy; fallbacks max/ratio/nearest/building = {}/{}/{}/{}",
        fallbacks[0], fallbacks[1], fallbacks[2], fallbacks[3]
    ))
}

fn cost_values() -> Outcome {
    let r = cost_by_visitor_density(
        ScheduleRef {
            station: StationId(1),
            band: TimeBand::T1Peak,
            day: 0,
        },
        &[ViewRecord {
            ad: AdId(1),
            relevant_views: 50,
            per_viewer_second_rate: 0.01,
            display_seconds: 120,
        }],
    )
    .map_err(|e| e.to_string())?;
    ensure((r.total - 60.0).abs() < COST_TOLERANCE, || {
        format!("visitor density gave {}", r.total)
    })?;
    let consistent = cost_by_building_density(0.02, 1.5, 300.0, CostMode::Consistent).map_err(|e| e.to_string())?;
    ensure((consistent - 9.0).abs() < COST_TOLERANCE, || {
        format!("consistent gave {consistent}")
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(0xc057);
    let mut checked = 1;
    let mut cases = vec![(0.02, 1.5, 300.0)];
    cases.extend((0..999).map(|_| {
        (
            rng.gen_range(0.0..0.1),
            rng.gen_range(0.0..5.0),
            rng.gen_range(0.0..3600.0),
        )
    }));
    for (pr, sbf, t) in cases {
        let c = cost_by_building_density(pr, sbf, t, CostMode::Consistent).map_err(|e| e.to_string())?;
        let l = cost_by_building_density(pr, sbf, t, CostMode::Literal).map_err(|e| e.to_string())?;
        ensure((l - c * pr).abs() < COST_TOLERANCE, || {
            format!("literal {l} != consistent {c} x {pr}")
        })?;
        checked += 1;
    }
    Ok(format!(
        "60.0 and 9.0 exact to 1e-9, literal = consistent x PR on {} inputs",
        checked - 1
    ))
}

fn feedback_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xfeed);
    let mut negatives = 0;
    let mut floored = 0;
    for seq in 0..FEEDBACK_SEQUENCES {
        let n_ads = rng.gen_range(1..6);
        let ads: Vec<Ad> = (0..n_ads)
            .map(|i| Ad {
                id: AdId(i),
                brand: BrandId(i),
                category: AudienceCategory::new("c0"),
                weight: if rng.gen_bool(0.1) {
                    WEIGHT_FLOOR
                } else {
                    rng.gen_range(1e-5..2.0)
                },
            })
            .collect();
        let decay = rng.gen_range(0.01..=1.0);
        let events: Vec<FeedbackEvent> = (0..rng.gen_range(0..60))
            .map(|i| FeedbackEvent {
                person: PersonId(rng.gen_range(1..10)),
                ad: AdId(rng.gen_range(0..n_ads)),
                polarity: [Polarity::Positive, Polarity::Silent, Polarity::Negative][rng.gen_range(0..3)],
                time: Timestamp::from_total_minutes(i),
            })
            .collect();
        let out = apply_feedback(&ads, &events, decay).map_err(|e| e.to_string())?;
        for (before, after) in ads.iter().zip(&out) {
            let k = events
                .iter()
                .filter(|e| e.ad == before.id && e.polarity == Polarity::Negative)
                .count();
            negatives += k;
            let mut want = before.weight;
            for _ in 0..k {
                want = (want * decay).max(WEIGHT_FLOOR);
            }
            floored += usize::from(want == WEIGHT_FLOOR && k > 0);
            ensure(
                (after.weight - want).abs() <= FEEDBACK_TOLERANCE * want.max(1.0),
                || {
                    format!(
                        "sequence {seq}: ad {} weight {} expected {want}",
                        before.id, after.weight
                    )
                },
            )?;
            ensure(after.weight >= WEIGHT_FLOOR, || {
                format!("sequence {seq}: weight below floor")
            })?;
        }
    }
    Ok(format!(
        "{FEEDBACK_SEQUENCES} sequences, {negatives} negative events, {floored} weights at the floor"
    ))
}

const DETERMINISM_FILES: [&str; 6] = [
    "trips.csv",
    "clusters.json",
    "schedules.csv",
    "schedules.json",
    "costs.csv",
    "costs.json",
];

fn determinism() -> Outcome {
    let runs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().expect("tempdir")).collect();
    for dir in &runs {
        let p = Pipeline::new(RunConfig::default(), dir.path()).map_err(|e| e.to_string())?;
        for stage in [Stage::Simulate, Stage::Cluster, Stage::Schedule, Stage::Cost] {
            p.run(stage, &ExternalInputs::default()).map_err(|e| e.to_string())?;
        }
    }
    let mut bytes = 0;
    for name in DETERMINISM_FILES {
        let a = fs::read(runs[0].path().join(name)).map_err(|e| e.to_string())?;
        let b = fs::read(runs[1].path().join(name)).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("{name} differs between runs"))?;
        bytes += a.len();
    }
    Ok(format!(
        "{} files, {bytes} bytes identical across two runs",
        DETERMINISM_FILES.len()
    ))
}

fn scenario_replay() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let config = RunConfig::load(&fixture_dir().join("config.toml")).map_err(|e| e.to_string())?;
    let p = Pipeline::new(config, dir.path()).map_err(|e| e.to_string())?;
    let inputs = ExternalInputs {
        fixture: Some(fixture_dir()),
        ..Default::default()
    };
    p.run(Stage::Scenario, &inputs).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let o: ScenarioOutcome = io::read_json(&dir.path().join("scenario.json")).map_err(|e| e.to_string())?;
    let world: World = io::read_json(&fixture_dir().join("world.json")).map_err(|e| e.to_string())?;
    ensure(world.stations.len() == 24, || {
        format!("{} stations", world.stations.len())
    })?;
    let log: TripLog = io::ingest_trip_log(&fixture_dir().join("trips.csv"), &world)
        .map_err(|e| e.to_string())?
        .log;
    let home = world.station_by_name("6th-Road").ok_or("no 6th-Road")?.id;
    let in_window = log
        .events
        .iter()
        .filter(|e| e.person == o.focus_person && e.check_in_station == home && !e.check_in_time.is_weekend())
        .all(|e| (510..=540).contains(&e.check_in_time.minute_of_day()));
    ensure(in_window, || "home check-ins outside 08:30-09:00".into())?;

    let t = o.temporal.as_ref().ok_or("no temporal cluster")?;
    ensure(o.temporal_coverage >= SCENARIO_COVERAGE, || {
        format!("temporal coverage {}", o.temporal_coverage)
    })?;
    ensure(t.band == TimeBand::T1Peak, || format!("cluster band {}", t.band))?;
    let s = o.spatial.as_ref().ok_or("no spatial cluster")?;
    ensure(s.origin == "6th-Road" && s.destination == "Kechahri", || {
        format!("dominant pair {} -> {}", s.origin, s.destination)
    })?;
    let top = o.top_before.as_ref().ok_or("empty Kechahri schedule")?;
    ensure(
        o.work_station == "Kechahri" && o.schedule_band == TimeBand::T1Peak,
        || "wrong slot".into(),
    )?;
    ensure(Some(&top.category) == s.dominant_category.as_ref(), || {
        format!("top ad category {} vs cluster {:?}", top.category, s.dominant_category)
    })?;
    let (before, after) = (
        o.shown_before.as_ref().ok_or("nothing shown before")?,
        o.shown_after.as_ref().ok_or("nothing shown after")?,
    );
    ensure(before.ad == top.ad, || "feedback target is not the top ad".into())?;
    ensure(before.ad != after.ad, || {
        "selected ad did not change after feedback".into()
    })?;
    ensure(elapsed < SCENARIO_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "window {} covers {:.0}% of {} commutes, pair {} -> {} ({}), T1 top {} -> {} after feedback, {:.2?}",
        t.window_label,
        o.temporal_coverage * 100.0,
        o.commute_trips,
        s.origin,
        s.destination,
        top.category,
        before.brand,
        after.brand,
        elapsed
    ))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("ODD initialization fidelity", odd_initialization),
        ("DBSCAN oracle equivalence", dbscan_oracle),
        ("allocation invariants", allocation_invariants),
        ("cost correctness", cost_values),
        ("feedback contract", feedback_contract),
        ("determinism", determinism),
        ("scenario replay", scenario_replay),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
