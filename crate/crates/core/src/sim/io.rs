//! Trace export: one CSV row per vehicle per tick, events as JSON lines.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::scalar::Scalar;
use crate::scenario::{Heading, ScenarioSpec, EGO_NAME, VEHICLE_LENGTH, VEHICLE_WIDTH};

use super::{SimEvent, SimTrace, TraceFrame, VehicleState};

pub const CSV_HEADER: [&str; 7] = ["time", "name", "s", "lat", "speed", "accel", "lane"];

#[derive(Debug, Error)]
pub enum TraceIoError {
    #[error("trace row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("trace header must be `{}`", CSV_HEADER.join(","))]
    Header,
    #[error("events line {line}: {source}")]
    Event { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub fn write_trace_csv<T: Scalar>(trace: &SimTrace<T>) -> String {
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    writer.write_record(CSV_HEADER).expect("in-memory writes cannot fail");
    for frame in &trace.frames {
        for v in &frame.vehicles {
            writer
                .write_record([
                    frame.time.to_string(),
                    v.name.clone(),
                    v.s.to_string(),
                    v.lat.to_string(),
                    v.speed.to_string(),
                    v.accel.to_string(),
                    v.lane.to_string(),
                ])
                .expect("in-memory writes cannot fail");
        }
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush cannot fail")).expect("csv output is utf-8")
}

pub fn write_events_jsonl<T: Scalar>(events: &[SimEvent<T>]) -> String {
    events.iter().map(|e| serde_json::to_string(e).expect("events always serialize") + "\n").collect()
}

pub fn read_events_jsonl<T: Scalar>(text: &str) -> Result<Vec<SimEvent<T>>, TraceIoError> {
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| serde_json::from_str(line).map_err(|source| TraceIoError::Event { line: i + 1, source }))
        .collect()
}

/// Rebuilds a trace from its CSV export. Vehicle sizes and headings come from the scenario.
pub fn read_trace_csv<T: Scalar>(
    csv_text: &str,
    events: Vec<SimEvent<T>>,
    spec: &ScenarioSpec<T>,
) -> Result<SimTrace<T>, TraceIoError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(csv_text.as_bytes());
    let header = reader.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(TraceIoError::Header);
    }
    let headings: BTreeMap<&str, Heading> = spec.agents.iter().map(|a| (a.name.as_str(), a.heading)).collect();
    let mut frames: Vec<TraceFrame<T>> = Vec::new();
    for (index, record) in reader.records().enumerate() {
        // data rows are numbered from 1, the header being row 0
        let row = index + 1;
        let record = record.map_err(|e| TraceIoError::Row { row, message: e.to_string() })?;
        if record.len() != CSV_HEADER.len() {
            return Err(TraceIoError::Row { row, message: format!("expected 7 fields, found {}", record.len()) });
        }
        let num = |i: usize| -> Result<T, TraceIoError> {
            record[i].parse::<T>().ok().filter(|v| v.is_finite()).ok_or_else(|| TraceIoError::Row {
                row,
                message: format!("`{}` is not a number in column {}", &record[i], CSV_HEADER[i]),
            })
        };
        let time = num(0)?;
        let name = record[1].to_string();
        let heading = if name == EGO_NAME {
            Heading::Forward
        } else {
            *headings
                .get(name.as_str())
                .ok_or_else(|| TraceIoError::Row { row, message: format!("unknown vehicle `{name}`") })?
        };
        let lane = record[6]
            .parse::<i64>()
            .map_err(|_| TraceIoError::Row { row, message: format!("`{}` is not a lane index", &record[6]) })?;
        let vehicle = VehicleState {
            name,
            s: num(2)?,
            lat: num(3)?,
            speed: num(4)?,
            accel: num(5)?,
            lane,
            heading,
            length: T::of(VEHICLE_LENGTH),
            width: T::of(VEHICLE_WIDTH),
        };
        match frames.last_mut() {
            Some(frame) if frame.time == time => frame.vehicles.push(vehicle),
            Some(frame) if time < frame.time => {
                return Err(TraceIoError::Row { row, message: "time goes backwards".into() });
            }
            _ => frames.push(TraceFrame { time, vehicles: vec![vehicle] }),
        }
    }
    let dt = match frames.as_slice() {
        [first, second, ..] => second.time - first.time,
        _ => T::of(super::DEFAULT_DT),
    };
    Ok(SimTrace { scenario_id: spec.id.clone(), dt, frames, events })
}
