//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use fuzzytherm_core::pwm::{synthesize, PwmCommand};
use fuzzytherm_core::ruledsl::{parse_rules, serialize_rulebase, RuleMatrix};
use fuzzytherm_core::{control, room, InferenceError};
use serde_json::{json, Value};

use crate::config::{
    controller_from_json, read_json, ConfigError, MatrixDoc, RunConfigDoc, VocabularyDoc,
};
use crate::service::{self, Service, ServiceOptions};
use crate::trace::{self, summary_json, Format};

#[derive(Debug, Parser)]
#[command(
    name = "fuzzytherm",
    version,
    about = "Fuzzy-logic temperature controller"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the closed loop and write its trace.
    Simulate(SimulateArgs),
    /// Evaluate the controller once and print the full inference trace.
    Step(StepArgs),
    /// Parse a rule file (or rule-matrix JSON) and write the canonical rule text.
    CompileRules(CompileArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Write the canonical run configuration.
    DefaultConfig(DefaultConfigArgs),
    /// Evaluate the room-temperature rule matrix.
    DemoRoom(DemoRoomArgs),
    /// Write one sampled PWM period as `slot_index,state` CSV.
    Waveform(WaveformArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Run config JSON (controller, plant, loop).
    #[arg(long)]
    pub config: PathBuf,
    /// Trace destination.
    #[arg(long)]
    pub out: PathBuf,
    /// Trace format; defaults to json for a `.json` destination, csv otherwise.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Overrides the plant noise seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct StepArgs {
    /// Controller JSON, or a run config holding one.
    #[arg(long)]
    pub controller: PathBuf,
    /// Setpoint minus sensed temperature, °C.
    #[arg(long, allow_negative_numbers = true)]
    pub error: f64,
}

#[derive(Debug, Args)]
pub struct CompileArgs {
    /// Rule text, or a `.json` rule matrix.
    #[arg(long)]
    pub rules: PathBuf,
    /// Vocabulary JSON: `{"inputs": [...], "output": {...}}`.
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Run config used when `POST /runs` has no body.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8700")]
    pub listen: String,
    /// Directory for finished run records.
    #[arg(long, default_value = "runs")]
    pub data_dir: PathBuf,
    /// Simulated seconds per wall-clock second.
    #[arg(long, default_value_t = 1.0)]
    pub speed: f64,
}

#[derive(Debug, Args)]
pub struct DefaultConfigArgs {
    /// Destination; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DemoRoomArgs {
    /// Room temperature, °C in [0, 40].
    #[arg(long, allow_negative_numbers = true)]
    pub temperature: f64,
    /// Target temperature, °C in [0, 40].
    #[arg(long, allow_negative_numbers = true)]
    pub target: f64,
}

#[derive(Debug, Args)]
pub struct WaveformArgs {
    /// Duty fraction in [0, 1].
    #[arg(long)]
    pub duty: f64,
    /// Slots per period.
    #[arg(long, default_value_t = 100)]
    pub resolution: usize,
    /// Destination; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn print_json(v: &Value) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v).map_err(runtime)?;
    writeln!(out).map_err(runtime)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes)
        .map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))
}

/// Parses arguments, runs the subcommand and returns the exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("fuzzytherm: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::Step(a) => step(a),
        Command::CompileRules(a) => compile_rules(a),
        Command::Serve(a) => serve(a),
        Command::DefaultConfig(a) => default_config(a),
        Command::DemoRoom(a) => demo_room(a),
        Command::Waveform(a) => waveform(a),
    }
}

fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let mut doc: RunConfigDoc = read_json(&a.config)?;
    if let Some(seed) = a.seed {
        doc.plant.seed = seed;
    }
    let setup = doc.build()?;
    let record = control::run(setup.controller, setup.plant, setup.config).map_err(runtime)?;
    let format = a
        .format
        .unwrap_or_else(|| match a.out.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        });
    let run_id = format!("simulate-seed-{}", record.plant.seed);
    trace::write_trace(&record, &run_id, &doc.controller, format, &a.out).map_err(runtime)?;
    let mut summary = summary_json(&record.summary);
    let obj = summary.as_object_mut().expect("summary is an object");
    obj.insert("seed".into(), json!(record.plant.seed));
    obj.insert("frames".into(), json!(record.frames.len()));
    obj.insert("out".into(), json!(a.out.display().to_string()));
    print_json(&summary)
}

fn step(a: StepArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&a.controller)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", a.controller.display())))?;
    let ctl = controller_from_json(&text)?;
    let input = match ctl.rulebase().inputs() {
        [one] => one.name().to_string(),
        many => {
            return Err(CliError::Usage(format!(
                "step needs a single-input controller, this one has {}",
                many.len()
            )))
        }
    };
    let trace = match ctl.infer(&[(&input, a.error)]) {
        Ok(t) => t,
        Err(InferenceError::Degenerate(t)) => *t,
        Err(e @ InferenceError::InvalidInput(_)) => return Err(CliError::Usage(e.to_string())),
        Err(e) => return Err(runtime(e)),
    };
    print_json(&trace::step_json(&trace))
}

fn compile_rules(a: CompileArgs) -> Result<(), CliError> {
    let vocab = read_json::<VocabularyDoc>(&a.vocab)?.build("")?;
    let is_json = a
        .rules
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let rules_path = a.rules.display().to_string();
    let rulebase = if is_json {
        let matrix: MatrixDoc = read_json(&a.rules)?;
        RuleMatrix::from(matrix)
            .to_rules(&vocab)
            .map_err(|e| CliError::Usage(format!("{rules_path}: {e}")))?
    } else {
        let text = std::fs::read_to_string(&a.rules)
            .map_err(|e| CliError::Usage(format!("cannot read {rules_path}: {e}")))?;
        parse_rules(&text, &vocab).map_err(|e| CliError::Usage(format!("{rules_path}:{e}")))?
    };
    write_file(&a.out, serialize_rulebase(&rulebase).as_bytes())?;
    print_json(&json!({ "rules": rulebase.rules().len(), "out": a.out.display().to_string() }))
}

fn default_config(a: DefaultConfigArgs) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(&RunConfigDoc::default()).map_err(runtime)?;
    text.push('\n');
    match a.out {
        Some(path) => write_file(&path, text.as_bytes()),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(runtime),
    }
}

fn demo_room(a: DemoRoomArgs) -> Result<(), CliError> {
    for (name, v) in [("temperature", a.temperature), ("target", a.target)] {
        if !(v.is_finite() && (0.0..=40.0).contains(&v)) {
            return Err(CliError::Usage(format!(
                "--{name} {v} is outside the room range [0, 40] °C"
            )));
        }
    }
    let d = room::decide(&room::controller(), a.temperature, a.target).map_err(runtime)?;
    let strengths: serde_json::Map<String, Value> = d
        .strengths
        .iter()
        .map(|(c, w)| (c.clone(), json!(w.value())))
        .collect();
    print_json(&json!({
        "temperature": a.temperature,
        "target": a.target,
        "command": d.command,
        "degree": d.degree.value(),
        "strengths": strengths,
    }))
}

fn waveform(a: WaveformArgs) -> Result<(), CliError> {
    let cmd =
        PwmCommand::new(a.duty, 1.0, a.resolution).map_err(|e| CliError::Usage(e.to_string()))?;
    let wave = synthesize(&cmd);
    let mut buf = Vec::new();
    trace::write_waveform(&wave, &mut buf).map_err(runtime)?;
    match a.out {
        Some(path) => write_file(&path, &buf),
        None => std::io::stdout().write_all(&buf).map_err(runtime),
    }
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        match signal(SignalKind::terminate()) {
            Ok(mut term) => {
                tokio::select! {
                    _ = tokio::signal::ctrl_c() => {}
                    _ = term.recv() => {}
                }
            }
            Err(_) => {
                let _ = tokio::signal::ctrl_c().await;
            }
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
}

fn serve(a: ServeArgs) -> Result<(), CliError> {
    let addr: SocketAddr = a
        .listen
        .parse()
        .map_err(|e| CliError::Usage(format!("invalid --listen address {:?}: {e}", a.listen)))?;
    if !(a.speed.is_finite() && a.speed > 0.0) {
        return Err(CliError::Usage(format!(
            "--speed must be positive, got {}",
            a.speed
        )));
    }
    let default_config = match &a.config {
        Some(path) => {
            let doc: RunConfigDoc = read_json(path)?;
            doc.build()?;
            Some(doc)
        }
        None => None,
    };
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(runtime)?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| runtime(format!("cannot listen on {addr}: {e}")))?;
        let local = listener.local_addr().map_err(runtime)?;
        eprintln!("fuzzytherm: listening on http://{local}");
        let svc = Service::new(ServiceOptions {
            data_dir: a.data_dir,
            speed: a.speed,
            default_config,
        });
        service::serve(listener, svc, shutdown_signal())
            .await
            .map_err(runtime)
    })
}
