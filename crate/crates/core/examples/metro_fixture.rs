//! Regenerates the bundled metro scenario fixture.
//!
//! cargo run -p metro-ads --example metro_fixture -- fixtures/metro

use std::error::Error;
use std::fs;
use std::path::PathBuf;

use metro_ads::domain::{
    AdId, AudienceCategory, BuildingProfile, Person, PersonId, Routine, StationId, TimeBand, Timestamp,
};
use metro_ads::io;
use metro_ads::pipeline::RunConfig;
use metro_ads::scheduler::{FeedbackEvent, Polarity};
use metro_ads::sim::{generate_population, generate_world, simulate_trips};

const STATIONS: [&str; 24] = [
    "Saddar",
    "Marrir Chowk",
    "Liaquat Bagh",
    "Committee Chowk",
    "Waris Khan",
    "Chandni Chowk",
    "Rehmanabad",
    "6th-Road",
    "Shamsabad",
    "Faizabad",
    "IJP Road",
    "Potohar",
    "Khayaban-e-Johar",
    "Faiz Ahmed Faiz",
    "Kashmir Highway",
    "Chaman",
    "Ibn-e-Sina",
    "Kechahri",
    "PIMS",
    "Stock Exchange",
    "7th-Avenue",
    "Shaheed-e-Millat",
    "Parade Ground",
    "Pak Secretariat",
];

const CONFIG: &str = r#"[world]
station_count = 24
persons = 360
station_spacing = 0.95
minutes_per_station = 2
rng_seed = 2014

[simulation]
days = 30

[run]
policy = "audience_ratio"
day = 0
"#;

const SCENARIO: &str = r#"focus_person = 1001
feedback_file = "feedback.csv"
"#;

const KECHAHRI_BRANDS: [&str; 10] = [
    "Subway",
    "Law Chambers Cafe",
    "Blue Area Outlet",
    "Metro Pharmacy",
    "Campus Books",
    "Court Stationers",
    "Jinnah Super Mart",
    "Night Diner",
    "Student Print Hub",
    "Legal Aid Desk",
];

fn main() -> Result<(), Box<dyn Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures/metro".into()));
    fs::create_dir_all(&dir)?;
    let config: RunConfig = toml::from_str(CONFIG)?;
    let cfg = &config.world;

    let mut world = generate_world(cfg)?;
    for (station, name) in world.stations.iter_mut().zip(STATIONS) {
        station.name = name.into();
    }
    let id_of = |name: &str| StationId(STATIONS.iter().position(|s| *s == name).expect("known station") as u32 + 1);
    let (home, work) = (id_of("6th-Road"), id_of("Kechahri"));

    let kechahri = &mut world.stations[work.0 as usize - 1];
    kechahri.buildings = vec![
        building("university", "student", 0.95, TimeBand::T1Peak),
        building("district courts", "office_worker", 0.35, TimeBand::T1Peak),
        building("market", "shopper", 0.3, TimeBand::T2Offpeak),
        building("hostel", "other", 0.2, TimeBand::T3Night),
    ];
    for (brand, name) in world
        .brands
        .iter_mut()
        .filter(|b| b.station == work)
        .zip(KECHAHRI_BRANDS)
    {
        brand.name = name.into();
    }

    let mut population = generate_population(cfg, &world)?;
    population.persons.push(Person {
        id: PersonId(1001),
        category: AudienceCategory::new("student"),
        home_station: home,
        routine: Routine {
            work_station: Some(work),
            morning_minute: 8 * 60 + 45,
            evening_minute: 17 * 60 + 15,
            leisure_stations: vec![id_of("Saddar"), id_of("7th-Avenue")],
        },
    });
    population.validate(&world)?;
    let log = simulate_trips(&population, &world, cfg, config.simulation.days)?;

    let subway = world.brands.iter().find(|b| b.name == "Subway").expect("Subway brand");
    let feedback = [FeedbackEvent {
        person: PersonId(1001),
        ad: AdId(subway.id.0),
        polarity: Polarity::Negative,
        time: Timestamp::parse_iso("2023-01-31T09:05")?,
    }];

    io::write_json(&dir.join("world.json"), &world)?;
    io::write_json(&dir.join("persons.json"), &population)?;
    io::write_file(&dir.join("trips.csv"), |buf| io::write_trips(&log, buf))?;
    io::write_file(&dir.join("feedback.csv"), |buf| io::write_feedback(&feedback, buf))?;
    fs::write(dir.join("config.toml"), CONFIG)?;
    fs::write(dir.join("scenario.toml"), SCENARIO)?;
    println!(
        "{} trips for {} riders in {}",
        log.len(),
        population.persons.len(),
        dir.display()
    );
    Ok(())
}

fn building(label: &str, category: &str, density: f64, active_band: TimeBand) -> BuildingProfile {
    BuildingProfile {
        label: label.into(),
        category: AudienceCategory::new(category),
        density,
        active_band,
    }
}
