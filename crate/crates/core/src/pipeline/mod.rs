//! File-based pipeline stages: simulate, cluster, schedule, cost, report and
//! the bundled metro scenario.
//!
//! Each stage reads its inputs from the output directory (or from explicit
//! external paths), writes its products there, and records a manifest that is
//! enough to re-run it byte for byte.

mod scenario;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::info;
use serde::{Deserialize, Serialize};

use crate::cost::{price_plan, CostModel, CostParams, CostReport};
use crate::domain::{PersonId, World, WorldConfig};
use crate::error::{Error, Result};
use crate::io;
use crate::mining::{
    predict_all, spatial_clusters, temporal_clusters, AudienceHistogram, ClusterId, SpatialCluster, TemporalCluster,
};
use crate::scheduler::{ads_for_world, apply_feedback, build_day_schedule, Ad, DayPlan, Policy, ScheduleParams};
use crate::sim::{config_hash, generate_population, generate_world, simulate_trips, Population, TripLog};

pub use scenario::{analyze_scenario, ScenarioOutcome, ScenarioSettings};

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

pub const WORLD_FILE: &str = "world.json";
pub const PERSONS_FILE: &str = "persons.json";
pub const TRIPS_FILE: &str = "trips.csv";
pub const CLUSTERS_FILE: &str = "clusters.json";
pub const ADS_FILE: &str = "ads.json";
pub const SCHEDULES_CSV: &str = "schedules.csv";
pub const SCHEDULES_JSON: &str = "schedules.json";
pub const COSTS_CSV: &str = "costs.csv";
pub const COSTS_JSON: &str = "costs.json";
pub const REPORT_FILE: &str = "report.json";
pub const SCENARIO_FILE: &str = "scenario.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationParams {
    pub days: u32,
}

impl Default for SimulationParams {
    fn default() -> Self {
        SimulationParams { days: 30 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiningParams {
    pub temporal_eps_minutes: f64,
    /// Spatial radius in units of station spacing.
    pub spatial_eps: f64,
    pub min_pts: usize,
}

impl Default for MiningParams {
    fn default() -> Self {
        MiningParams {
            temporal_eps_minutes: 25.0,
            spatial_eps: 0.5,
            min_pts: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunParams {
    pub policy: Policy,
    /// Day index the schedule and cost stages plan for.
    pub day: u32,
}

impl Default for RunParams {
    fn default() -> Self {
        RunParams {
            policy: Policy::AudienceRatio,
            day: 0,
        }
    }
}

/// Everything a pipeline run depends on besides its input files.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub world: WorldConfig,
    pub simulation: SimulationParams,
    pub mining: MiningParams,
    pub schedule: ScheduleParams,
    pub cost: CostParams,
    pub run: RunParams,
}

impl RunConfig {
    /// Reads TOML, or JSON when the file ends in `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: RunConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text)?
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.schedule.validate()?;
        if self.simulation.days == 0 {
            return Err(Error::Config("simulation.days must be at least 1".into()));
        }
        if !(self.mining.temporal_eps_minutes > 0.0 && self.mining.spatial_eps > 0.0) {
            return Err(Error::Config("mining eps values must be positive".into()));
        }
        if self.mining.min_pts == 0 {
            return Err(Error::Config("mining.min_pts must be at least 1".into()));
        }
        if self.cost.viewer_second_rate.is_nan() || self.cost.viewer_second_rate < 0.0 {
            return Err(Error::Config("cost.viewer_second_rate must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Simulate,
    Cluster,
    Schedule,
    Cost,
    Report,
    Scenario,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Simulate,
        Stage::Cluster,
        Stage::Schedule,
        Stage::Cost,
        Stage::Report,
        Stage::Scenario,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::Cluster => "cluster",
            Stage::Schedule => "schedule",
            Stage::Cost => "cost",
            Stage::Report => "report",
            Stage::Scenario => "scenario",
        }
    }

    pub fn manifest_name(self) -> String {
        format!("manifest-{}.json", self.as_str())
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::Input(format!("unknown stage `{s}`")))
    }
}

/// Input files supplied from outside the output directory.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExternalInputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub world: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub persons: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trips: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feedback: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixture: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub stage: Stage,
    pub seed: u64,
    pub world_config_hash: String,
    pub config: RunConfig,
    pub external_inputs: ExternalInputs,
    /// Files read from the output directory.
    pub inputs: Vec<String>,
    /// Files written to the output directory.
    pub outputs: Vec<String>,
}

/// A temporal habit cluster mined from one rider's check-ins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiderCluster {
    pub person: PersonId,
    #[serde(flatten)]
    pub cluster: TemporalCluster,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub params: MiningParams,
    pub trip_count: usize,
    pub day_count: u32,
    pub temporal_noise: usize,
    pub spatial_noise: usize,
    pub temporal: Vec<RiderCluster>,
    pub spatial: Vec<SpatialCluster>,
    pub audience: Vec<AudienceHistogram>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelTotal {
    pub model: CostModel,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub stations: usize,
    pub brands: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub persons: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trips: Option<usize>,
    /// Trips per band in T1, T2, T3 order.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band_trips: Option<[u64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temporal_clusters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spatial_clusters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedules: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fallback_schedules: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cost_totals: Vec<ModelTotal>,
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "stations: {}  brands: {}", self.stations, self.brands)?;
        if let Some(p) = self.persons {
            writeln!(f, "persons: {p}")?;
        }
        if let (Some(t), Some(b)) = (self.trips, self.band_trips) {
            let total = t.max(1) as f64;
            writeln!(
                f,
                "trips: {t}  (T1 {:.1}%, T2 {:.1}%, T3 {:.1}%)",
                100.0 * b[0] as f64 / total,
                100.0 * b[1] as f64 / total,
                100.0 * b[2] as f64 / total
            )?;
        }
        if let (Some(t), Some(s)) = (self.temporal_clusters, self.spatial_clusters) {
            writeln!(f, "clusters: {t} temporal, {s} spatial")?;
        }
        if let (Some(s), Some(fb)) = (self.schedules, self.fallback_schedules) {
            writeln!(f, "schedules: {s} ({fb} fallback)")?;
        }
        for m in &self.cost_totals {
            writeln!(f, "cost {}: {:.2}", m.model, m.total)?;
        }
        Ok(())
    }
}

/// A pipeline bound to a config and an output directory.
pub struct Pipeline {
    config: RunConfig,
    out_dir: PathBuf,
}

struct Tracker<'a> {
    out_dir: &'a Path,
    inputs: Vec<String>,
    outputs: Vec<String>,
}

impl Tracker<'_> {
    fn input(&mut self, name: &str, run_first: Stage) -> Result<PathBuf> {
        let path = self.out_dir.join(name);
        if !path.is_file() {
            return Err(Error::MissingArtifact {
                path,
                run_first: run_first.as_str().into(),
            });
        }
        self.inputs.push(name.into());
        Ok(path)
    }

    fn optional_input(&mut self, name: &str) -> Option<PathBuf> {
        let path = self.out_dir.join(name);
        path.is_file().then(|| {
            self.inputs.push(name.into());
            path
        })
    }

    fn output(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.into());
        self.out_dir.join(name)
    }
}

impl Pipeline {
    pub fn new(config: RunConfig, out_dir: impl Into<PathBuf>) -> Result<Self> {
        config.validate()?;
        let out_dir = out_dir.into();
        fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
        Ok(Pipeline { config, out_dir })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    /// Runs one stage and writes its manifest next to its outputs.
    pub fn run(&self, stage: Stage, external: &ExternalInputs) -> Result<RunManifest> {
        let mut t = Tracker {
            out_dir: &self.out_dir,
            inputs: Vec::new(),
            outputs: Vec::new(),
        };
        match stage {
            Stage::Simulate => self.simulate(&mut t, external)?,
            Stage::Cluster => self.cluster(&mut t, external)?,
            Stage::Schedule => self.schedule(&mut t, external)?,
            Stage::Cost => self.cost(&mut t)?,
            Stage::Report => {
                self.report(&mut t)?;
            }
            Stage::Scenario => self.scenario(&mut t, external)?,
        }
        let manifest = RunManifest {
            tool_version: TOOL_VERSION.into(),
            stage,
            seed: self.config.world.rng_seed,
            world_config_hash: config_hash(&self.config.world),
            config: self.config.clone(),
            external_inputs: external.clone(),
            inputs: t.inputs,
            outputs: t.outputs,
        };
        io::write_json(&self.out_dir.join(stage.manifest_name()), &manifest)?;
        info!("{stage}: wrote {}", manifest.outputs.join(", "));
        Ok(manifest)
    }

    fn load_world(&self, t: &mut Tracker<'_>, external: &ExternalInputs) -> Result<World> {
        let world: World = match &external.world {
            Some(p) => io::read_json(p)?,
            None => io::read_json(&t.input(WORLD_FILE, Stage::Simulate)?)?,
        };
        world.validate()?;
        Ok(world)
    }

    fn load_population(&self, t: &mut Tracker<'_>, external: &ExternalInputs, world: &World) -> Result<Population> {
        let population: Population = match &external.persons {
            Some(p) => io::read_json(p)?,
            None => io::read_json(&t.input(PERSONS_FILE, Stage::Simulate)?)?,
        };
        population.validate(world)?;
        Ok(population)
    }

    fn simulate(&self, t: &mut Tracker<'_>, external: &ExternalInputs) -> Result<()> {
        let cfg = &self.config.world;
        let world = match &external.world {
            Some(p) => {
                let w: World = io::read_json(p)?;
                w.validate()?;
                w
            }
            None => generate_world(cfg)?,
        };
        let population = match &external.persons {
            Some(p) => {
                let pop: Population = io::read_json(p)?;
                pop.validate(&world)?;
                pop
            }
            None => generate_population(cfg, &world)?,
        };
        let log = simulate_trips(&population, &world, cfg, self.config.simulation.days)?;
        io::write_json(&t.output(WORLD_FILE), &world)?;
        io::write_json(&t.output(PERSONS_FILE), &population)?;
        io::write_file(&t.output(TRIPS_FILE), |buf| io::write_trips(&log, buf))?;
        Ok(())
    }

    fn cluster(&self, t: &mut Tracker<'_>, external: &ExternalInputs) -> Result<()> {
        let world = self.load_world(t, external)?;
        let population = self.load_population(t, external, &world)?;
        let trips_path = match &external.trips {
            Some(p) => p.clone(),
            None => t.input(TRIPS_FILE, Stage::Simulate)?,
        };
        let ingested = io::ingest_trip_log(&trips_path, &world)?;
        info!("ingested {} trips from {}", ingested.rows, trips_path.display());
        let report = cluster_log(&self.config, &world, &population, &ingested.log)?;
        io::write_json(&t.output(CLUSTERS_FILE), &report)?;
        Ok(())
    }

    fn schedule(&self, t: &mut Tracker<'_>, external: &ExternalInputs) -> Result<()> {
        let world = self.load_world(t, external)?;
        let clusters: ClusterReport = io::read_json(&t.input(CLUSTERS_FILE, Stage::Cluster)?)?;
        let mut ads = ads_for_world(&world);
        if let Some(path) = &external.feedback {
            let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
            let events = io::read_feedback(file)?;
            ads = apply_feedback(&ads, &events, self.config.schedule.feedback_decay)?;
        }
        let plan = build_day_schedule(
            &world,
            &clusters.audience,
            &ads,
            self.config.run.policy,
            &self.config.schedule,
            self.config.run.day,
        )?;
        io::write_json(&t.output(ADS_FILE), &ads)?;
        io::write_file(&t.output(SCHEDULES_CSV), |buf| {
            io::write_schedules(&plan.schedules, buf)
        })?;
        io::write_json(&t.output(SCHEDULES_JSON), &plan)?;
        Ok(())
    }

    fn cost(&self, t: &mut Tracker<'_>) -> Result<()> {
        let world = self.load_world(t, &ExternalInputs::default())?;
        let clusters: ClusterReport = io::read_json(&t.input(CLUSTERS_FILE, Stage::Cluster)?)?;
        let plan: DayPlan = io::read_json(&t.input(SCHEDULES_JSON, Stage::Schedule)?)?;
        let ads: Vec<Ad> = io::read_json(&t.input(ADS_FILE, Stage::Schedule)?)?;
        let reports = price_plan(&plan, &world, &clusters.audience, &ads, &self.config.cost)?;
        io::write_file(&t.output(COSTS_CSV), |buf| io::write_costs(&reports, buf))?;
        io::write_json(&t.output(COSTS_JSON), &reports)?;
        Ok(())
    }

    /// Summarises whatever artifacts exist in the output directory.
    fn report(&self, t: &mut Tracker<'_>) -> Result<RunReport> {
        let world = self.load_world(t, &ExternalInputs::default())?;
        let mut report = RunReport {
            stations: world.stations.len(),
            brands: world.brands.len(),
            persons: None,
            trips: None,
            band_trips: None,
            temporal_clusters: None,
            spatial_clusters: None,
            schedules: None,
            fallback_schedules: None,
            cost_totals: Vec::new(),
        };
        if let Some(p) = t.optional_input(PERSONS_FILE) {
            report.persons = Some(io::read_json::<Population>(&p)?.persons.len());
        }
        if let Some(p) = t.optional_input(TRIPS_FILE) {
            let log = io::ingest_trip_log(&p, &world)?.log;
            report.trips = Some(log.len());
            report.band_trips = Some(log.band_counts(&self.config.world.band_table));
        }
        if let Some(p) = t.optional_input(CLUSTERS_FILE) {
            let c: ClusterReport = io::read_json(&p)?;
            report.temporal_clusters = Some(c.temporal.len());
            report.spatial_clusters = Some(c.spatial.len());
        }
        if let Some(p) = t.optional_input(SCHEDULES_JSON) {
            let plan: DayPlan = io::read_json(&p)?;
            report.schedules = Some(plan.schedules.len());
            report.fallback_schedules = Some(plan.schedules.iter().filter(|s| s.fallback).count());
        }
        if let Some(p) = t.optional_input(COSTS_JSON) {
            let reports: Vec<CostReport> = io::read_json(&p)?;
            for model in [CostModel::VisitorDensity, CostModel::BuildingDensity] {
                report.cost_totals.push(ModelTotal {
                    model,
                    total: reports.iter().filter(|r| r.model == model).map(|r| r.total).sum(),
                });
            }
        }
        io::write_json(&t.output(REPORT_FILE), &report)?;
        Ok(report)
    }

    fn scenario(&self, t: &mut Tracker<'_>, external: &ExternalInputs) -> Result<()> {
        let fixture = external
            .fixture
            .clone()
            .ok_or_else(|| Error::Input("scenario needs a fixture directory".into()))?;
        let settings = ScenarioSettings::load(&fixture.join(scenario::SETTINGS_FILE))?;
        let fixture_inputs = ExternalInputs {
            world: Some(fixture.join(WORLD_FILE)),
            persons: Some(fixture.join(PERSONS_FILE)),
            trips: Some(fixture.join(TRIPS_FILE)),
            feedback: None,
            fixture: None,
        };
        let world = self.load_world(t, &fixture_inputs)?;
        let population = self.load_population(t, &fixture_inputs, &world)?;
        let log = io::ingest_trip_log(&fixture.join(TRIPS_FILE), &world)?.log;
        io::write_json(&t.output(WORLD_FILE), &world)?;
        io::write_json(&t.output(PERSONS_FILE), &population)?;
        io::write_file(&t.output(TRIPS_FILE), |buf| io::write_trips(&log, buf))?;

        self.cluster(t, &ExternalInputs::default())?;
        self.schedule(t, &ExternalInputs::default())?;
        self.cost(t)?;
        let feedback_path = fixture.join(&settings.feedback_file);
        let file = fs::File::open(&feedback_path).map_err(|e| Error::io(&feedback_path, e))?;
        let events = io::read_feedback(file)?;

        let clusters: ClusterReport = io::read_json(&self.out_dir.join(CLUSTERS_FILE))?;
        let (outcome, replanned) =
            analyze_scenario(&self.config, &settings, &world, &population, &log, &clusters, &events)?;
        io::write_file(&t.output("schedules-after-feedback.csv"), |buf| {
            io::write_schedules(&replanned.schedules, buf)
        })?;
        io::write_json(&t.output(SCENARIO_FILE), &outcome)?;
        self.report(t)?;
        Ok(())
    }
}

/// Spatial clusters over the whole log, per-rider temporal habit clusters,
/// and the audience predicted from the full history.
pub fn cluster_log(config: &RunConfig, world: &World, population: &Population, log: &TripLog) -> Result<ClusterReport> {
    let m = &config.mining;
    let table = &config.world.band_table;
    let categories = &config.world.category_table;
    let spatial_eps = m.spatial_eps * config.world.station_spacing;
    let spatial = spatial_clusters(log, world, population, categories, table, spatial_eps, m.min_pts)?;

    let mut by_rider: BTreeMap<PersonId, Vec<usize>> = BTreeMap::new();
    for (i, e) in log.events.iter().enumerate() {
        by_rider.entry(e.person).or_default().push(i);
    }
    let mut temporal = Vec::new();
    for (person, indices) in by_rider {
        let sub = TripLog {
            events: indices.iter().map(|&i| log.events[i]).collect(),
            day_count: log.day_count,
        };
        for mut cluster in temporal_clusters(&sub, table, m.temporal_eps_minutes, m.min_pts)? {
            cluster.id = ClusterId(temporal.len() as u32);
            for i in &mut cluster.member_trip_indices {
                *i = indices[*i];
            }
            temporal.push(RiderCluster { person, cluster });
        }
    }

    let audience = predict_all(log, population, world, categories, table);
    let temporal_members: usize = temporal.iter().map(|c| c.cluster.member_trip_indices.len()).sum();
    let spatial_members: usize = spatial.iter().map(|c| c.member_trip_indices.len()).sum();
    Ok(ClusterReport {
        params: m.clone(),
        trip_count: log.len(),
        day_count: log.day_count,
        temporal_noise: log.len() - temporal_members,
        spatial_noise: log.len() - spatial_members,
        temporal,
        spatial,
        audience,
    })
}

/// Re-runs the stage recorded in a manifest. Outputs go to `out_dir`, or to
/// the manifest's own directory when `None`.
pub fn replay(manifest_path: &Path, out_dir: Option<&Path>) -> Result<RunManifest> {
    let manifest: RunManifest = io::read_json(manifest_path)?;
    let dir = match out_dir {
        Some(d) => d.to_path_buf(),
        None => manifest_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    Pipeline::new(manifest.config.clone(), dir)?.run(manifest.stage, &manifest.external_inputs)
}
