//! CSV and JSON formats shared by the pipeline stages.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use log::warn;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::cost::CostReport;
use crate::domain::{AdId, PersonId, StationId, Timestamp, TripEvent, World};
use crate::error::{Error, Result};
use crate::scheduler::{AdSchedule, FeedbackEvent, Polarity};
use crate::sim::TripLog;

pub const TRIP_HEADER: [&str; 5] = ["card_id", "in_station", "in_time", "out_station", "out_time"];
pub const SCHEDULE_HEADER: [&str; 4] = ["station", "band", "ad_id", "tos_seconds"];
pub const COST_HEADER: [&str; 6] = ["station", "band", "day", "model", "ad_id", "cost"];
pub const FEEDBACK_HEADER: [&str; 4] = ["card_id", "ad_id", "polarity", "time"];

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

pub fn write_trips<W: Write>(log: &TripLog, w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(TRIP_HEADER)?;
    for e in &log.events {
        out.write_record([
            e.person.to_string(),
            e.check_in_station.to_string(),
            e.check_in_time.to_iso(),
            e.check_out_station.to_string(),
            e.check_out_time.to_iso(),
        ])?;
    }
    out.flush().map_err(|e| Error::io("<trip csv>", e))?;
    Ok(())
}

/// Result of reading a trip CSV.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub log: TripLog,
    pub rows: usize,
    pub warnings: Vec<String>,
}

fn field<T>(line: u64, name: &str, raw: Option<&str>, parse: impl FnOnce(&str) -> Result<T>) -> Result<T> {
    let raw = raw.ok_or_else(|| Error::Row {
        line,
        field: name.into(),
        message: "missing value".into(),
    })?;
    parse(raw.trim()).map_err(|e| Error::Row {
        line,
        field: name.into(),
        message: match e {
            Error::Input(m) => m,
            other => other.to_string(),
        },
    })
}

fn parse_id(s: &str) -> Result<u32> {
    s.parse::<u32>()
        .map_err(|_| Error::Input(format!("`{s}` is not a non-negative integer id")))
}

/// Parses and validates trip rows. With a `world`, station ids are checked
/// against it.
pub fn read_trips<R: Read>(r: R, world: Option<&World>) -> Result<Ingested> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(r);
    let mut records = reader.records();
    let mut warnings = Vec::new();
    match records.next() {
        None => {
            warnings.push("trip file is empty".to_string());
            return Ok(Ingested {
                log: TripLog::empty(0),
                rows: 0,
                warnings,
            });
        }
        Some(header) => {
            let header = header?;
            let names: Vec<&str> = header.iter().map(str::trim).collect();
            if names != TRIP_HEADER {
                return Err(Error::Row {
                    line: 1,
                    field: "header".into(),
                    message: format!("expected `{}`", TRIP_HEADER.join(",")),
                });
            }
        }
    }
    let mut events = Vec::new();
    for record in records {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != TRIP_HEADER.len() {
            return Err(Error::Row {
                line,
                field: "record".into(),
                message: format!("expected {} fields, found {}", TRIP_HEADER.len(), record.len()),
            });
        }
        let station = |name: &str, raw: Option<&str>| {
            field(line, name, raw, |s| {
                let id = StationId(parse_id(s)?);
                match world {
                    Some(w) if !w.contains(id) => Err(Error::Input(format!("unknown station id {id}"))),
                    _ => Ok(id),
                }
            })
        };
        let event = TripEvent {
            person: PersonId(field(line, "card_id", record.get(0), parse_id)?),
            check_in_station: station("in_station", record.get(1))?,
            check_in_time: field(line, "in_time", record.get(2), Timestamp::parse_iso)?,
            check_out_station: station("out_station", record.get(3))?,
            check_out_time: field(line, "out_time", record.get(4), Timestamp::parse_iso)?,
        };
        if event.check_out_time <= event.check_in_time {
            return Err(Error::Row {
                line,
                field: "out_time".into(),
                message: format!(
                    "check-out {} is not after check-in {}",
                    event.check_out_time, event.check_in_time
                ),
            });
        }
        if event.check_in_station == event.check_out_station {
            return Err(Error::Row {
                line,
                field: "out_station".into(),
                message: "check-out station equals check-in station".into(),
            });
        }
        events.push(event);
    }
    if events.is_empty() {
        warnings.push("trip file has a header but no rows".to_string());
    }
    for w in &warnings {
        warn!("{w}");
    }
    let rows = events.len();
    Ok(Ingested {
        log: TripLog::from_events(events)?,
        rows,
        warnings,
    })
}

/// Reads, validates and sorts a smart-card trip CSV.
pub fn ingest_trip_log(path: &Path, world: &World) -> Result<Ingested> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_trips(file, Some(world))
}

pub fn write_schedules<W: Write>(schedules: &[AdSchedule], w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(SCHEDULE_HEADER)?;
    for s in schedules {
        for e in &s.entries {
            out.write_record([
                s.station.to_string(),
                s.band.to_string(),
                e.ad.to_string(),
                e.tos_seconds.to_string(),
            ])?;
        }
    }
    out.flush().map_err(|e| Error::io("<schedule csv>", e))?;
    Ok(())
}

/// Costs are printed to two decimals; the JSON mirror keeps full precision.
pub fn write_costs<W: Write>(reports: &[CostReport], w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(COST_HEADER)?;
    for r in reports {
        for item in &r.line_items {
            out.write_record([
                r.schedule_ref.station.to_string(),
                r.schedule_ref.band.to_string(),
                r.schedule_ref.day.to_string(),
                r.model.to_string(),
                item.ad.to_string(),
                format!("{:.2}", item.cost),
            ])?;
        }
    }
    out.flush().map_err(|e| Error::io("<cost csv>", e))?;
    Ok(())
}

pub fn read_feedback<R: Read>(r: R) -> Result<Vec<FeedbackEvent>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(r);
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header != FEEDBACK_HEADER {
        return Err(Error::Row {
            line: 1,
            field: "header".into(),
            message: format!("expected `{}`", FEEDBACK_HEADER.join(",")),
        });
    }
    let mut events = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        events.push(FeedbackEvent {
            person: PersonId(field(line, "card_id", record.get(0), parse_id)?),
            ad: AdId(field(line, "ad_id", record.get(1), parse_id)?),
            polarity: field(line, "polarity", record.get(2), |s| match s {
                "positive" => Ok(Polarity::Positive),
                "silent" => Ok(Polarity::Silent),
                "negative" => Ok(Polarity::Negative),
                _ => Err(Error::Input(format!("unknown polarity `{s}`"))),
            })?,
            time: field(line, "time", record.get(3), Timestamp::parse_iso)?,
        });
    }
    Ok(events)
}

pub fn write_feedback<W: Write>(events: &[FeedbackEvent], w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(FEEDBACK_HEADER)?;
    for e in events {
        let polarity = match e.polarity {
            Polarity::Positive => "positive",
            Polarity::Silent => "silent",
            Polarity::Negative => "negative",
        };
        out.write_record([
            e.person.to_string(),
            e.ad.to_string(),
            polarity.to_string(),
            e.time.to_iso(),
        ])?;
    }
    out.flush().map_err(|e| Error::io("<feedback csv>", e))?;
    Ok(())
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json_bytes(value)?).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

/// Writes through a buffer so a failed stage never leaves half a file.
pub fn write_file(path: &Path, fill: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    fill(&mut buf)?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}
