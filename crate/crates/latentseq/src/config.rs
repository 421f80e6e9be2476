//! The TOML configuration file shared by `serve`, `play` and `train`.
//!
//! Every table and key is optional; unknown keys are rejected with an error
//! naming the key. Relative paths are resolved against the config file's
//! directory. Command-line flags override values from the file.

use std::collections::HashSet;
use std::net::IpAddr;
use std::path::{Path, PathBuf};

use latentseq_core::nn::TrainConfig;
use latentseq_core::TimeBase;
use serde::Deserialize;

use crate::error::{Error, Result};

pub const MAX_MODELS: usize = 3;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub bpm: f64,
    pub ppq: u32,
    pub seed: u64,
    /// Dataset files (JSON lines), used by `train` and for atlas building.
    pub datasets: Vec<PathBuf>,
    /// Model selected at startup; defaults to the first entry of `models`.
    pub active_model: Option<String>,
    pub models: Vec<ModelEntry>,
    pub osc: OscConfig,
    pub websocket: WebSocketConfig,
    pub midi: MidiConfig,
    pub training: TrainingConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub id: String,
    pub path: PathBuf,
    /// Atlas JSON sent to web clients in the connect snapshot.
    pub atlas: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OscConfig {
    pub enabled: bool,
    pub bind: IpAddr,
    pub listen_port: u16,
    pub send_host: IpAddr,
    pub send_port: u16,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WebSocketConfig {
    pub enabled: bool,
    pub bind: IpAddr,
    pub port: u16,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MidiConfig {
    /// Raw MIDI device to write to, e.g. `/dev/snd/midiC1D0`. Unset means
    /// notes are only logged at debug level.
    pub port: Option<PathBuf>,
    /// MIDI channel 1–16.
    pub channel: u8,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

const LOCALHOST: IpAddr = IpAddr::V4(std::net::Ipv4Addr::LOCALHOST);

impl Default for Config {
    fn default() -> Self {
        Self {
            bpm: 120.0,
            ppq: 480,
            seed: 0,
            datasets: Vec::new(),
            active_model: None,
            models: Vec::new(),
            osc: OscConfig::default(),
            websocket: WebSocketConfig::default(),
            midi: MidiConfig { port: None, channel: 1 },
            training: TrainingConfig::default(),
        }
    }
}

impl Default for OscConfig {
    fn default() -> Self {
        Self { enabled: true, bind: LOCALHOST, listen_port: 9000, send_host: LOCALHOST, send_port: 9001 }
    }
}

impl Default for WebSocketConfig {
    fn default() -> Self {
        Self { enabled: true, bind: LOCALHOST, port: 8080 }
    }
}

impl Default for TrainingConfig {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self { epochs: d.epochs, batch_size: d.batch_size, learning_rate: d.learning_rate }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file, resolving relative paths against
    /// its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.datasets.iter_mut().for_each(fix);
        for m in &mut self.models {
            fix(&mut m.path);
            if let Some(a) = m.atlas.as_mut() {
                fix(a);
            }
        }
        if let Some(p) = self.midi.port.as_mut() {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.time_base().map_err(|e| Error::Config(e.to_string()))?;
        if self.models.len() > MAX_MODELS {
            return bad(format!("at most {MAX_MODELS} models may be loaded, got {}", self.models.len()));
        }
        let mut ids = HashSet::new();
        for m in &self.models {
            if m.id.is_empty() {
                return bad("model id must not be empty".into());
            }
            if !ids.insert(m.id.as_str()) {
                return bad(format!("duplicate model id `{}`", m.id));
            }
        }
        if let Some(active) = &self.active_model {
            if !ids.contains(active.as_str()) {
                return bad(format!("active_model `{active}` is not listed in [[models]]"));
            }
        }
        if !(1..=16).contains(&self.midi.channel) {
            return bad(format!("midi.channel must be 1-16, got {}", self.midi.channel));
        }
        let t = &self.training;
        if t.epochs == 0 || t.batch_size == 0 {
            return bad("training.epochs and training.batch_size must be positive".into());
        }
        if !(t.learning_rate.is_finite() && t.learning_rate > 0.0) {
            return bad(format!("training.learning_rate must be positive, got {}", t.learning_rate));
        }
        Ok(())
    }

    pub fn time_base(&self) -> latentseq_core::Result<TimeBase> {
        TimeBase::new(self.bpm, self.ppq, 2)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.training.epochs,
            batch_size: self.training.batch_size,
            learning_rate: self.training.learning_rate,
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
bpm = 96.0
ppq = 480
seed = 7
datasets = ["data/corpus.jsonl"]
active_model = "m3"

[[models]]
id = "m1"
path = "models/m1.json"
atlas = "atlas/m1.json"

[[models]]
id = "m3"
path = "/abs/m3.json"

[osc]
listen_port = 9100
send_port = 9101

[websocket]
enabled = false

[midi]
port = "/dev/snd/midiC1D0"
channel = 10

[training]
epochs = 50
"#;

    #[test]
    fn full_file_parses() {
        let cfg = Config::parse(FULL).unwrap();
        assert_eq!(cfg.bpm, 96.0);
        assert_eq!(cfg.models.len(), 2);
        assert_eq!(cfg.osc.listen_port, 9100);
        assert_eq!(cfg.osc.send_host, LOCALHOST);
        assert!(!cfg.websocket.enabled);
        assert_eq!(cfg.websocket.port, 8080);
        assert_eq!(cfg.training.epochs, 50);
        assert_eq!(cfg.training.batch_size, 16);
        assert_eq!(cfg.train_config().seed, 7);
    }

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = Config::parse("").unwrap();
        assert_eq!(cfg, Config::default());
        assert_eq!((cfg.osc.listen_port, cfg.osc.send_port, cfg.websocket.port), (9000, 9001, 8080));
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = Config::parse("bpm = 120.0\ntempo = 3\n").unwrap_err().to_string();
        assert!(err.contains("tempo"), "{err}");
        let err = Config::parse("[osc]\nlisten = 1\n").unwrap_err().to_string();
        assert!(err.contains("listen"), "{err}");
    }

    #[test]
    fn invalid_values_rejected() {
        for text in [
            "bpm = -1.0",
            "ppq = 30",
            "active_model = \"x\"",
            "[[models]]\nid=\"a\"\npath=\"a\"\n[[models]]\nid=\"a\"\npath=\"b\"",
            "[midi]\nchannel = 0",
            "[training]\nlearning_rate = 0.0",
        ] {
            assert!(matches!(Config::parse(text), Err(Error::Config(_))), "{text}");
        }
        let four: String = (0..4).map(|i| format!("[[models]]\nid=\"m{i}\"\npath=\"p\"\n")).collect();
        assert!(Config::parse(&four).is_err());
    }

    #[test]
    fn relative_paths_resolve_against_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("latentseq.toml");
        std::fs::write(&p, FULL).unwrap();
        let cfg = Config::load(&p).unwrap();
        assert_eq!(cfg.models[0].path, dir.path().join("models/m1.json"));
        assert_eq!(cfg.models[1].path, PathBuf::from("/abs/m3.json"));
        assert_eq!(cfg.datasets[0], dir.path().join("data/corpus.jsonl"));
    }
}
