//! The `latentseq` command line.

use std::fmt::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use latentseq_core::atlas::build_atlas;
use latentseq_core::control::{Control, Transport};
use latentseq_core::engine::Engine;
use latentseq_core::generator::{generate, Ensemble, GenerationRequest};
use latentseq_core::nn::{train, Architecture, Autoencoder, TrainReport};
use latentseq_core::sequencer::Sequencer;
use latentseq_core::{ManyHotPattern, TimeBase};

use crate::atlas_file::{export_atlas, load_atlas, AtlasFile};
use crate::bridge::ModelInfo;
use crate::config::Config;
use crate::dataset::{ingest_corpus, Dataset};
use crate::error::{Error, Result};
use crate::live::{spawn, Hub, Live, LiveOptions, Mailbox, MidiSink, MonotonicClock, NullSink, RawMidiSink, StateCell};
use crate::model_file::{load_model, save_model};
use crate::server::{ServeOptions, Server};

#[derive(Debug, Parser)]
#[command(name = "latentseq", version, about = "Autoencoder drum-pattern generator and step sequencer")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode a directory of drum-loop WAV files into a pattern dataset.
    Ingest(IngestArgs),
    /// Train an autoencoder on one or more datasets.
    Train(TrainArgs),
    /// Encode a dataset through a model and export its latent atlas.
    Atlas(AtlasArgs),
    /// Run the live engine with OSC and WebSocket control.
    Serve(ServeArgs),
    /// Play a generated pattern to a MIDI port without network control.
    Play(PlayArgs),
    /// Generate one pattern and write it as a standard MIDI file.
    Render(RenderArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ArchArg {
    Prototype,
    Model1,
    Model2,
    Model3,
}

impl From<ArchArg> for Architecture {
    fn from(a: ArchArg) -> Self {
        match a {
            ArchArg::Prototype => Architecture::Prototype,
            ArchArg::Model1 => Architecture::Model1,
            ArchArg::Model2 => Architecture::Model2,
            ArchArg::Model3 => Architecture::Model3,
        }
    }
}

fn unit_interval(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is not in [0, 1]"))
    }
}

fn finite(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err("must be a finite number".into())
    }
}

fn positive(s: &str) -> std::result::Result<f64, String> {
    let v = finite(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} must be positive"))
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Directory containing .wav loops (not searched recursively).
    #[arg(long)]
    pub dir: PathBuf,
    /// Tempo of the loops.
    #[arg(long, default_value_t = 120.0, value_parser = positive)]
    pub bpm: f64,
    /// Dataset file to write (JSON lines).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset file(s); records are concatenated in the order given.
    #[arg(long, required = true, num_args = 1..)]
    pub dataset: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub arch: ArchArg,
    /// Config file supplying seed and training defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub epochs: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub batch_size: Option<u64>,
    #[arg(long, value_parser = positive)]
    pub lr: Option<f64>,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Loss history CSV; defaults to `<out>.loss.csv`.
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AtlasArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, required = true, num_args = 1..)]
    pub dataset: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Model id recorded in the atlas; defaults to the model file stem.
    #[arg(long)]
    pub id: Option<String>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_parser = positive)]
    pub bpm: Option<f64>,
    /// UDP port for inbound OSC (0 picks a free port).
    #[arg(long)]
    pub osc_port: Option<u16>,
    /// UDP port outbound OSC is sent to.
    #[arg(long)]
    pub osc_out_port: Option<u16>,
    /// TCP port for WebSocket clients (0 picks a free port).
    #[arg(long)]
    pub ws_port: Option<u16>,
    #[arg(long)]
    pub no_osc: bool,
    #[arg(long)]
    pub no_websocket: bool,
    /// Raw MIDI device to write notes to.
    #[arg(long)]
    pub midi_port: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlayArgs {
    /// Model file to play; alternatively take models from --config.
    #[arg(long, required_unless_present = "config", conflicts_with = "config")]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0, value_parser = finite)]
    pub x: f64,
    #[arg(long, default_value_t = 0.0, value_parser = finite)]
    pub y: f64,
    #[arg(long, default_value_t = 0.5, value_parser = unit_interval)]
    pub threshold: f64,
    /// Steps to play; 0 plays until interrupted.
    #[arg(long, default_value_t = 32)]
    pub steps: u64,
    #[arg(long, value_parser = positive)]
    pub bpm: Option<f64>,
    /// Raw MIDI device to write notes to; without it notes are only logged.
    #[arg(long)]
    pub midi_port: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=16))]
    pub channel: Option<u8>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_parser = finite)]
    pub x: f64,
    #[arg(long, value_parser = finite)]
    pub y: f64,
    #[arg(long, default_value_t = 0.5, value_parser = unit_interval)]
    pub threshold: f64,
    /// Number of sequencer steps to render (at least 1).
    #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u64).range(1..))]
    pub steps: u64,
    #[arg(long, default_value_t = 120.0, value_parser = positive)]
    pub bpm: f64,
    /// Note for every pitch-lane slot.
    #[arg(long, default_value_t = 60, value_parser = clap::value_parser!(u8).range(0..=127))]
    pub pitch: u8,
    #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u8).range(1..=32))]
    pub length: u8,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest(a) => cmd_ingest(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Atlas(a) => cmd_atlas(&a),
        Command::Serve(a) => cmd_serve(&a),
        Command::Play(a) => cmd_play(&a),
        Command::Render(a) => cmd_render(&a),
    }
}

fn cmd_ingest(a: &IngestArgs) -> Result<()> {
    let tb = TimeBase::with_bpm(a.bpm)?;
    let report = ingest_corpus(&a.dir, &tb)?;
    report.dataset.save(&a.out)?;
    println!(
        "ingested {} loops ({} skipped, {} duration warnings) -> {}",
        report.dataset.len(),
        report.skipped.len(),
        report.duration_flagged.len(),
        a.out.display()
    );
    Ok(())
}

fn load_patterns(paths: &[PathBuf]) -> Result<Vec<(String, ManyHotPattern)>> {
    let mut out = Vec::new();
    for p in paths {
        let ds = Dataset::load(p)?;
        out.extend(ds.records().iter().map(|r| (r.id.clone(), r.pattern)));
    }
    if out.is_empty() {
        return Err(Error::Input("dataset contains no records".into()));
    }
    Ok(out)
}

/// The loss history as CSV.
pub fn history_csv(report: &TrainReport) -> String {
    let mut s = String::from("epoch,mean_bce,total_objective\n");
    for e in &report.history {
        let _ = writeln!(s, "{},{},{}", e.epoch, e.mean_bce, e.total_objective);
    }
    s
}

fn default_history_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".loss.csv");
    out.with_file_name(name)
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let cfg = match &a.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let mut tc = cfg.train_config();
    if let Some(s) = a.seed {
        tc.seed = s;
    }
    if let Some(e) = a.epochs {
        tc.epochs = e as usize;
    }
    if let Some(b) = a.batch_size {
        tc.batch_size = b as usize;
    }
    if let Some(lr) = a.lr {
        tc.learning_rate = lr;
    }
    let patterns: Vec<ManyHotPattern> = load_patterns(&a.dataset)?.into_iter().map(|(_, p)| p).collect();
    let arch = Architecture::from(a.arch);
    let mut model = Autoencoder::init(arch, tc.seed);
    let report = train(&mut model, &patterns, &tc)?;
    save_model(&model, &a.out)?;
    let history = a.history.clone().unwrap_or_else(|| default_history_path(&a.out));
    std::fs::write(&history, history_csv(&report)).map_err(|e| Error::io(&history, e))?;
    let first = report.history.first().map_or(f64::NAN, |e| e.mean_bce);
    println!(
        "trained {arch} on {} patterns for {} epochs: bce {first:.4} -> {:.4}; model {}, history {}",
        patterns.len(),
        tc.epochs,
        report.final_loss().unwrap_or(f64::NAN),
        a.out.display(),
        history.display()
    );
    Ok(())
}

fn file_stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into())
}

fn cmd_atlas(a: &AtlasArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let records = load_patterns(&a.dataset)?;
    let (encoder, _) = model.split();
    let points = build_atlas(&encoder, records.iter().map(|(id, p)| (id.as_str(), p)))?;
    let id = a.id.clone().unwrap_or_else(|| file_stem(&a.model));
    let atlas = AtlasFile::new(&id, &points)?;
    export_atlas(&atlas, &a.out)?;
    let r = &atlas.range;
    println!(
        "{} points, x {:.3}..{:.3}, y {:.3}..{:.3}, suggested UI range {}..{} -> {}",
        points.len(),
        r.min_x,
        r.max_x,
        r.min_y,
        r.max_y,
        r.suggested_ui_min,
        r.suggested_ui_max,
        a.out.display()
    );
    Ok(())
}

/// Loads every configured model (and atlas) into an ensemble.
pub fn load_ensemble(cfg: &Config) -> Result<(Ensemble, Vec<ModelInfo>)> {
    if cfg.models.is_empty() {
        return Err(Error::Config("no [[models]] configured".into()));
    }
    let mut ensemble = Ensemble::new();
    let mut infos = Vec::new();
    for m in &cfg.models {
        let model = load_model(&m.path)?;
        let atlas = m.atlas.as_deref().map(load_atlas).transpose()?;
        infos.push(ModelInfo { model_id: m.id.clone(), architecture: model.architecture().name().into(), atlas });
        ensemble.insert(m.id.clone(), model.split().1);
    }
    Ok((ensemble, infos))
}

fn open_sink(port: Option<&Path>, channel: u8) -> Result<Box<dyn MidiSink>> {
    Ok(match port {
        Some(p) => Box::new(RawMidiSink::open(p, channel)?),
        None => Box::new(NullSink),
    })
}

static INTERRUPTED: AtomicBool = AtomicBool::new(false);

/// Routes SIGINT and SIGTERM to a flag polled by long-running commands.
fn install_signal_handlers() -> Result<()> {
    for sig in [libc::SIGINT, libc::SIGTERM] {
        // SAFETY: the handler only stores to an atomic, which is async-signal-safe.
        unsafe { signal_hook_registry::register(sig, || INTERRUPTED.store(true, Ordering::SeqCst)) }
            .map_err(|e| Error::Runtime(format!("cannot install signal handler: {e}")))?;
    }
    Ok(())
}

fn cmd_serve(a: &ServeArgs) -> Result<()> {
    let mut cfg = Config::load(&a.config)?;
    if let Some(b) = a.bpm {
        cfg.bpm = b;
    }
    if let Some(p) = a.osc_port {
        cfg.osc.listen_port = p;
    }
    if let Some(p) = a.osc_out_port {
        cfg.osc.send_port = p;
    }
    if let Some(p) = a.ws_port {
        cfg.websocket.port = p;
    }
    if a.no_osc {
        cfg.osc.enabled = false;
    }
    if a.no_websocket {
        cfg.websocket.enabled = false;
    }
    if let Some(p) = &a.midi_port {
        cfg.midi.port = Some(p.clone());
    }
    cfg.validate()?;

    // everything that can fail on input happens before any port is bound
    let (ensemble, models) = load_ensemble(&cfg)?;
    let engine = Engine::new(ensemble, cfg.active_model.as_deref(), cfg.time_base()?)?;
    let sink = open_sink(cfg.midi.port.as_deref(), cfg.midi.channel)?;
    install_signal_handlers()?;

    let options = ServeOptions {
        osc: cfg.osc.enabled.then(|| {
            (SocketAddr::new(cfg.osc.bind, cfg.osc.listen_port), SocketAddr::new(cfg.osc.send_host, cfg.osc.send_port))
        }),
        websocket: cfg.websocket.enabled.then(|| SocketAddr::new(cfg.websocket.bind, cfg.websocket.port)),
        models,
        live: LiveOptions::default(),
    };
    let server = Server::start(engine, MonotonicClock::new(), sink, options)?;
    let show = |a: Option<SocketAddr>| a.map_or_else(|| "off".to_string(), |a| a.to_string());
    println!("listening osc={} websocket={}", show(server.osc_addr()), show(server.ws_addr()));
    log::info!("serving {} model(s); send SIGINT or SIGTERM to stop", cfg.models.len());
    while !INTERRUPTED.load(Ordering::SeqCst) && !server.is_finished() {
        std::thread::sleep(Duration::from_millis(20));
    }
    server.shutdown();
    let engine = server.join()?;
    println!("stopped; sounding note: {:?}", engine.sequencer().sounding());
    Ok(())
}

fn cmd_play(a: &PlayArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(b) = a.bpm {
        cfg.bpm = b;
    }
    if let Some(p) = &a.midi_port {
        cfg.midi.port = Some(p.clone());
    }
    if let Some(c) = a.channel {
        cfg.midi.channel = c;
    }
    if let Some(m) = &a.model {
        cfg.models = vec![crate::config::ModelEntry { id: file_stem(m), path: m.clone(), atlas: None }];
        cfg.active_model = None;
    }
    cfg.validate()?;
    let (ensemble, _) = load_ensemble(&cfg)?;
    let mut engine = Engine::new(ensemble, cfg.active_model.as_deref(), cfg.time_base()?)?;
    engine.apply(&Control::Threshold(a.threshold))?;
    engine.apply(&Control::Latent { x: a.x, y: a.y })?;
    println!("playing {:?}", engine.state().pattern);
    let sink = open_sink(cfg.midi.port.as_deref(), cfg.midi.channel)?;
    install_signal_handlers()?;

    let mailbox = Mailbox::new();
    mailbox.push(Control::Transport(Transport::Start), None);
    let options = LiveOptions { stop_after_steps: (a.steps > 0).then_some(a.steps) };
    let live = Live::new(engine, MonotonicClock::new(), sink, Arc::clone(&mailbox), Hub::new(), StateCell::new())
        .with_options(options);
    let handle = spawn(live);
    while !handle.is_finished() {
        if INTERRUPTED.load(Ordering::SeqCst) {
            mailbox.shutdown();
        }
        std::thread::sleep(Duration::from_millis(20));
    }
    handle.join().map_err(|_| Error::Runtime("engine thread panicked".into()))?;
    Ok(())
}

/// The MIDI file `render` writes for a model and generation request.
pub fn render_bytes(model: &Autoencoder, a: &RenderArgs) -> Result<Vec<u8>> {
    let (_, decoder) = model.split();
    let result = generate(&decoder, &GenerationRequest::new("render", a.x, a.y, a.threshold))?;
    let mut seq = Sequencer::new(TimeBase::with_bpm(a.bpm)?);
    seq.apply_generation(&result);
    seq.set_length(usize::from(a.length))?;
    for slot in 0..latentseq_core::sequencer::PITCH_STEPS {
        seq.set_pitch(slot, a.pitch)?;
    }
    Ok(seq.render_offline(a.steps as usize)?)
}

fn cmd_render(a: &RenderArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let bytes = render_bytes(&model, a)?;
    std::fs::write(&a.out, &bytes).map_err(|e| Error::io(&a.out, e))?;
    println!("rendered {} steps -> {}", a.steps, a.out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use latentseq_core::nn::EpochLoss;

    #[test]
    fn usage_errors_exit_1() {
        assert_eq!(main_with_args(["latentseq"]), 1);
        assert_eq!(main_with_args(["latentseq", "ingest", "--out", "x"]), 1);
        assert_eq!(main_with_args(["latentseq", "render", "--model", "m", "--x", "0", "--y", "0", "--steps", "0", "--out", "o"]), 1);
        assert_eq!(main_with_args(["latentseq", "--help"]), 0);
    }

    #[test]
    fn unknown_arch_lists_valid_names() {
        let err = Cli::try_parse_from(["latentseq", "train", "--dataset", "d", "--arch", "model9", "--out", "m"]).unwrap_err();
        let text = err.to_string();
        for name in ["prototype", "model1", "model2", "model3"] {
            assert!(text.contains(name), "{text}");
        }
    }

    #[test]
    fn history_csv_format() {
        let report = TrainReport {
            history: vec![
                EpochLoss { epoch: 1, mean_bce: 0.5, total_objective: 0.625 },
                EpochLoss { epoch: 2, mean_bce: 0.25, total_objective: 0.3 },
            ],
        };
        assert_eq!(history_csv(&report), "epoch,mean_bce,total_objective\n1,0.5,0.625\n2,0.25,0.3\n");
        assert_eq!(default_history_path(Path::new("out/m.json")), PathBuf::from("out/m.json.loss.csv"));
    }
}
