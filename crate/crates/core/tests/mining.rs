use metro_ads::domain::{
    AudienceCategory, BandTable, Person, PersonId, Routine, StationId, TimeBand, Timestamp, TripEvent, WorldConfig,
};
use metro_ads::io;
use metro_ads::mining::{predict_audience, spatial_clusters, temporal_clusters};
use metro_ads::sim::{generate_world, Population, TripLog};

fn person(id: u32, category: &str, home: u32) -> Person {
    Person {
        id: PersonId(id),
        category: AudienceCategory::new(category),
        home_station: StationId(home),
        routine: Routine {
            work_station: None,
            morning_minute: 480,
            evening_minute: 1020,
            leisure_stations: Vec::new(),
        },
    }
}

fn trip(person: u32, from: u32, to: u32, day: i32, minute: u16) -> TripEvent {
    let start = Timestamp::new(day, minute).unwrap();
    TripEvent {
        person: PersonId(person),
        check_in_station: StationId(from),
        check_in_time: start,
        check_out_station: StationId(to),
        check_out_time: start.plus_minutes(12),
    }
}

fn categories() -> Vec<AudienceCategory> {
    WorldConfig::default().category_table
}

#[test]
fn audience_recount_of_constructed_log() {
    let config = WorldConfig::default();
    let world = generate_world(&config).unwrap();
    let mut persons = Vec::new();
    let mut events = Vec::new();
    let groups = [("office_worker", 60), ("student", 30), ("shopper", 10)];
    let mut id = 1;
    for (category, n) in groups {
        for _ in 0..n {
            persons.push(person(id, category, 3));
            for day in 0..5 {
                events.push(trip(id, 3, 6, day, 480 + (id % 60) as u16));
            }
            id += 1;
        }
    }
    let population = Population {
        persons,
        config_hash: String::new(),
    };
    let log = TripLog::new(events, 5).unwrap();
    let h = predict_audience(
        &log,
        &population,
        &world,
        &categories(),
        &config.band_table,
        StationId(3),
        TimeBand::T1Peak,
    )
    .unwrap();
    let count = |c: &str| h.count(&AudienceCategory::new(c));
    assert_eq!(
        (count("office_worker"), count("student"), count("shopper")),
        (60, 30, 10)
    );
    assert_eq!(count("other"), 0);
    assert!(h.total() <= population.persons.len() as u64);

    let elsewhere = predict_audience(
        &log,
        &population,
        &world,
        &categories(),
        &config.band_table,
        StationId(6),
        TimeBand::T1Peak,
    )
    .unwrap();
    assert_eq!(elsewhere.total(), 0);
    assert!(predict_audience(
        &log,
        &population,
        &world,
        &categories(),
        &config.band_table,
        StationId(99),
        TimeBand::T1Peak
    )
    .is_err());
}

#[test]
fn single_student_and_empty_history() {
    let config = WorldConfig::default();
    let world = generate_world(&config).unwrap();
    let population = Population {
        persons: vec![person(1, "student", 2)],
        config_hash: String::new(),
    };
    let log = TripLog::new((0..7).map(|d| trip(1, 2, 4, d, 8 * 60)).collect(), 7).unwrap();
    let args = (&world, categories(), &config.band_table);
    let h = predict_audience(
        &log,
        &population,
        args.0,
        &args.1,
        args.2,
        StationId(2),
        TimeBand::T1Peak,
    )
    .unwrap();
    assert_eq!(h.count(&AudienceCategory::new("student")), 1);
    assert_eq!(h.total(), 1);
    let empty = TripLog::empty(7);
    let h = predict_audience(
        &empty,
        &population,
        args.0,
        &args.1,
        args.2,
        StationId(2),
        TimeBand::T1Peak,
    )
    .unwrap();
    assert_eq!(h.total(), 0);
}

#[test]
fn morning_and_evening_habits_form_two_peak_clusters() {
    let mut events = Vec::new();
    for day in 0..20 {
        for (k, m) in (510..=540).step_by(10).enumerate() {
            events.push(trip(k as u32 + 1, 1, 5, day, m));
        }
        for (k, m) in (1020..=1050).step_by(10).enumerate() {
            events.push(trip(k as u32 + 1, 5, 1, day, m));
        }
    }
    let log = TripLog::from_events(events).unwrap();
    let clusters = temporal_clusters(&log, &BandTable::default(), 20.0, 4).unwrap();
    assert_eq!(clusters.len(), 2);
    for c in &clusters {
        assert_eq!(c.band, TimeBand::T1Peak);
        assert!(c.time_window.width() < 1440);
    }
    let windows: Vec<(u16, u16)> = clusters
        .iter()
        .map(|c| (c.time_window.start, c.time_window.end))
        .collect();
    assert!(windows.contains(&(510, 540)) && windows.contains(&(1020, 1050)));
}

#[test]
fn midnight_checkins_join_one_cluster() {
    let log = TripLog::from_events(vec![trip(1, 1, 2, 0, 23 * 60 + 55), trip(2, 1, 2, 1, 5)]).unwrap();
    let clusters = temporal_clusters(&log, &BandTable::default(), 15.0, 2).unwrap();
    assert_eq!(clusters.len(), 1);
    assert_eq!(clusters[0].member_trip_indices.len(), 2);
    assert_eq!(clusters[0].band, TimeBand::T3Night);
    assert_eq!((clusters[0].time_window.start, clusters[0].time_window.end), (1435, 5));
}

#[test]
fn identical_od_pairs_form_one_spatial_cluster() {
    let config = WorldConfig::default();
    let world = generate_world(&config).unwrap();
    let population = Population {
        persons: (1..=6).map(|i| person(i, "shopper", 1)).collect(),
        config_hash: String::new(),
    };
    let log = TripLog::from_events((1..=6).map(|i| trip(i, 1, 5, 0, 600 + i as u16)).collect()).unwrap();
    let clusters = spatial_clusters(&log, &world, &population, &categories(), &config.band_table, 0.5, 4).unwrap();
    assert_eq!(clusters.len(), 1);
    assert_eq!(clusters[0].dominant_od_pair, (StationId(1), StationId(5)));
    assert_eq!(clusters[0].member_trip_indices.len(), 6);
    assert_eq!(clusters[0].category_mix.count(&AudienceCategory::new("shopper")), 6);

    let empty = TripLog::empty(1);
    assert!(
        spatial_clusters(&empty, &world, &population, &categories(), &config.band_table, 0.5, 4)
            .unwrap()
            .is_empty()
    );
}

#[test]
fn metro_fixture_matches_the_narrative_windows() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/metro");
    let world: metro_ads::domain::World = io::read_json(&dir.join("world.json")).unwrap();
    assert_eq!(world.stations.len(), 24);
    let ingested = io::ingest_trip_log(&dir.join("trips.csv"), &world).unwrap();
    assert!(ingested.warnings.is_empty());
    let home = world.station_by_name("6th-Road").unwrap().id;
    let work = world.station_by_name("Kechahri").unwrap().id;
    let usama = PersonId(1001);
    let mut commutes = 0;
    for e in ingested.log.events.iter().filter(|e| e.person == usama) {
        if e.check_in_time.is_weekend() {
            continue;
        }
        let m = e.check_in_time.minute_of_day();
        if e.check_in_station == home {
            assert_eq!(e.check_out_station, work);
            assert!((510..=540).contains(&m), "home check-in at {m}");
            let out = e.check_out_time.minute_of_day();
            assert!((530..=560).contains(&out), "Kechahri check-out at {out}");
            commutes += 1;
        } else if e.check_in_station == work {
            assert!((1020..=1050).contains(&m), "Kechahri check-in at {m}");
        }
    }
    assert!(commutes >= 20);
}
