//! CSV and JSON exports of frames, traces and run records.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use fuzzytherm_core::control::RunSummary;
use fuzzytherm_core::inference::FuzzifiedInput;
use fuzzytherm_core::pwm::duty_from_level;
use fuzzytherm_core::{InferenceTrace, RunRecord, TelemetryFrame};
use serde_json::{json, Map, Value};

use crate::config::{ControllerDoc, LoopDoc, PlantDoc};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, thiserror::Error)]
#[error("cannot write {path}: {source}")]
pub struct WriteError {
    pub path: String,
    #[source]
    pub source: io::Error,
}

pub const FIXED_COLUMNS: [&str; 7] = [
    "t",
    "setpoint",
    "sensed",
    "error",
    "defuzz",
    "fan_duty",
    "heater_duty",
];

fn num(x: f64) -> Value {
    // NaN and infinities have no JSON form
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

fn opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

fn input_json(f: &FuzzifiedInput) -> Value {
    let degrees: Map<String, Value> = f
        .degrees
        .iter()
        .map(|(t, d)| (t.to_string(), num(d.value())))
        .collect();
    json!({
        "variable": f.variable,
        "raw": num(f.raw),
        "value": num(f.value),
        "clamped": f.clamped(),
        "degrees": degrees,
    })
}

pub fn trace_json(trace: &InferenceTrace) -> Value {
    json!({
        "inputs": trace.fuzzified.iter().map(input_json).collect::<Vec<_>>(),
        "activations": trace.activations.iter().map(|a| json!({
            "rule_id": a.rule_id,
            "weight": num(a.weight.value()),
            "peak": num(a.peak),
        })).collect::<Vec<_>>(),
        "output": opt(trace.output),
    })
}

/// A single inference as printed by `step`: the trace plus the duties the
/// loop would apply.
pub fn step_json(trace: &InferenceTrace) -> Value {
    let mut v = trace_json(trace);
    let fan = trace.output.map(duty_from_level);
    let obj = v.as_object_mut().expect("trace is an object");
    obj.insert("fan_duty".into(), opt(fan));
    obj.insert("heater_duty".into(), opt(fan.map(|f| 1.0 - f)));
    v
}

pub fn frame_json(frame: &TelemetryFrame, run_id: Option<&str>) -> Value {
    let mut obj = Map::new();
    if let Some(id) = run_id {
        obj.insert("run_id".into(), json!(id));
    }
    obj.insert("t".into(), num(frame.t));
    obj.insert("setpoint".into(), num(frame.setpoint));
    obj.insert("sensed".into(), num(frame.sensed));
    obj.insert("error".into(), num(frame.error));
    obj.insert("defuzz".into(), opt(frame.defuzz));
    obj.insert("fan_duty".into(), num(frame.fan_duty));
    obj.insert("heater_duty".into(), num(frame.heater_duty));
    obj.insert("held".into(), json!(frame.held));
    obj.insert("trace".into(), trace_json(&frame.trace));
    Value::Object(obj)
}

pub fn summary_json(s: &RunSummary) -> Value {
    json!({
        "settling_time": opt(s.settling_time),
        "overshoot": num(s.overshoot),
        "band": num(s.band),
        "steady_state_error": s.steady_state_error.map(|(lo, hi)| json!([num(lo), num(hi)])),
        "held_frames": s.held_frames,
    })
}

/// Full record: id, seed, the run config, summary and every frame.
pub fn record_json(record: &RunRecord, run_id: &str, controller: &ControllerDoc) -> Value {
    json!({
        "run_id": run_id,
        "seed": record.plant.seed,
        "config": {
            "controller": controller,
            "plant": PlantDoc::from(&record.plant),
            "loop": LoopDoc::from(&record.config),
        },
        "summary": summary_json(&record.summary),
        "frames": record.frames.iter().map(|f| frame_json(f, None)).collect::<Vec<_>>(),
    })
}

/// Header row: the fixed columns, then `mu_<term>` for every term of every
/// input variable, in declaration order.
pub fn csv_header(frames: &[TelemetryFrame]) -> Vec<String> {
    let mut cols: Vec<String> = FIXED_COLUMNS.iter().map(|c| c.to_string()).collect();
    if let Some(f) = frames.first() {
        for input in &f.trace.fuzzified {
            cols.extend(input.degrees.iter().map(|(t, _)| format!("mu_{t}")));
        }
    }
    cols
}

fn cell(x: f64) -> String {
    format!("{x}")
}

pub fn write_csv<W: Write>(frames: &[TelemetryFrame], out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(frames))?;
    for f in frames {
        let mut row = vec![
            cell(f.t),
            cell(f.setpoint),
            cell(f.sensed),
            cell(f.error),
            f.defuzz.map(cell).unwrap_or_default(),
            cell(f.fan_duty),
            cell(f.heater_duty),
        ];
        for input in &f.trace.fuzzified {
            row.extend(input.degrees.iter().map(|(_, d)| cell(d.value())));
        }
        w.write_record(&row)?;
    }
    w.flush()
}

pub fn write_json<W: Write>(value: &Value, mut out: W) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()
}

/// Writes a record to `path` in the chosen format.
pub fn write_trace(
    record: &RunRecord,
    run_id: &str,
    controller: &ControllerDoc,
    format: Format,
    path: &Path,
) -> Result<(), WriteError> {
    let wrap = |source| WriteError {
        path: path.display().to_string(),
        source,
    };
    let out = BufWriter::new(File::create(path).map_err(wrap)?);
    match format {
        Format::Csv => write_csv(&record.frames, out),
        Format::Json => write_json(&record_json(record, run_id, controller), out),
    }
    .map_err(wrap)
}

/// `slot_index,state` rows for a sampled PWM period.
pub fn write_waveform<W: Write>(wave: &[bool], out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["slot_index", "state"])?;
    for (i, &s) in wave.iter().enumerate() {
        w.write_record([i.to_string(), u8::from(s).to_string()])?;
    }
    w.flush()
}
