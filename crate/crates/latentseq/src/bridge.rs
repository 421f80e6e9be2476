//! The WebSocket JSON protocol. Messages are flat objects tagged by `type`.
//!
//! Client → server, mirroring the OSC `/seq/*` inputs:
//!
//! | type        | fields                         |
//! |-------------|--------------------------------|
//! | `latent`    | `x`, `y` (numbers)             |
//! | `threshold` | `value` in [0, 1]              |
//! | `model`     | `model_id`                     |
//! | `pitch`     | `slot` 0–7, `note` 0–127       |
//! | `length`    | `value` 1–32                   |
//! | `bpm`       | `value` > 0                    |
//! | `transport` | `value`: `"start"` or `"stop"` |
//!
//! Server → client: `snapshot` (on connect), `pattern`, `velocity`,
//! `playhead`, `ensemble`, `state` and `error`.

use std::collections::BTreeMap;

use latentseq_core::control::{Control, ControlError, Outbound, Transport};
use latentseq_core::engine::EngineState;
use latentseq_core::generator::GenerationResult;
use serde_json::{json, Map, Value};

use crate::atlas_file::AtlasFile;
use crate::live::Event;

/// A loaded model as described to clients.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInfo {
    pub model_id: String,
    pub architecture: String,
    pub atlas: Option<AtlasFile>,
}

fn num(obj: &Map<String, Value>, key: &str) -> Result<f64, String> {
    obj.get(key).and_then(Value::as_f64).ok_or_else(|| format!("`{key}` must be a number"))
}

fn int(obj: &Map<String, Value>, key: &str) -> Result<i64, String> {
    let v = num(obj, key)?;
    if v.fract() != 0.0 || v.abs() > 1e15 {
        return Err(format!("`{key}` must be an integer"));
    }
    Ok(v as i64)
}

fn text<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a str, String> {
    obj.get(key).and_then(Value::as_str).ok_or_else(|| format!("`{key}` must be a string"))
}

fn check_fields(obj: &Map<String, Value>, kind: &str, allowed: &[&str]) -> Result<(), String> {
    match obj.keys().find(|k| *k != "type" && !allowed.contains(&k.as_str())) {
        Some(k) => Err(format!("unknown field `{k}` for `{kind}`")),
        None => Ok(()),
    }
}

fn range_err(e: ControlError) -> String {
    e.to_string()
}

/// Parses and validates one client message.
pub fn parse_client_message(text_frame: &str) -> Result<Control, String> {
    let value: Value = serde_json::from_str(text_frame).map_err(|e| format!("malformed JSON: {e}"))?;
    let obj = value.as_object().ok_or("message must be a JSON object")?;
    let kind = obj.get("type").and_then(Value::as_str).ok_or("missing string field `type`")?;
    let fields: &[&str] = match kind {
        "latent" => &["x", "y"],
        "threshold" | "length" | "bpm" | "transport" => &["value"],
        "model" => &["model_id"],
        "pitch" => &["slot", "note"],
        other => return Err(format!("unknown message type `{other}`")),
    };
    check_fields(obj, kind, fields)?;
    match kind {
        "latent" => Control::latent(num(obj, "x")?, num(obj, "y")?).map_err(range_err),
        "threshold" => Control::threshold(num(obj, "value")?).map_err(range_err),
        "model" => {
            let id = text(obj, "model_id")?;
            if id.is_empty() {
                return Err("`model_id` must not be empty".into());
            }
            Ok(Control::Model(id.into()))
        }
        "pitch" => Control::pitch(int(obj, "slot")?, int(obj, "note")?).map_err(range_err),
        "length" => Control::length(int(obj, "value")?).map_err(range_err),
        "bpm" => Control::bpm(num(obj, "value")?).map_err(range_err),
        _ => {
            let v = text(obj, "value")?;
            Transport::parse(v)
                .map(Control::Transport)
                .ok_or_else(|| format!("transport value must be \"start\" or \"stop\", got {v:?}"))
        }
    }
}

/// The JSON form of a control, as a client would send it.
pub fn control_to_json(control: &Control) -> Value {
    match control {
        Control::Latent { x, y } => json!({"type": "latent", "x": x, "y": y}),
        Control::Threshold(t) => json!({"type": "threshold", "value": t}),
        Control::Model(id) => json!({"type": "model", "model_id": id}),
        Control::Pitch { slot, note } => json!({"type": "pitch", "slot": slot, "note": note}),
        Control::Length(l) => json!({"type": "length", "value": l}),
        Control::Bpm(b) => json!({"type": "bpm", "value": b}),
        Control::Transport(t) => json!({"type": "transport", "value": t.as_str()}),
    }
}

fn result_json(r: &GenerationResult) -> Value {
    json!({"pattern": r.pattern.bits(), "velocities": r.velocities, "raw": r.raw})
}

fn ensemble_json(results: &BTreeMap<String, GenerationResult>) -> Value {
    Value::Object(results.iter().map(|(id, r)| (id.clone(), result_json(r))).collect())
}

pub fn state_json(s: &EngineState) -> Value {
    json!({
        "active_model": s.active_model,
        "x": s.x,
        "y": s.y,
        "threshold": s.threshold,
        "running": s.running,
        "length": s.length,
        "bpm": s.bpm,
        "pitch_lane": s.pitch_lane,
        "playhead": s.playhead,
        "pattern": s.pattern.bits(),
        "velocities": s.velocities,
    })
}

/// The frame for an engine event; `None` for events not meant for clients.
pub fn event_json(event: &Event) -> Value {
    match event {
        Event::Outbound(Outbound::Pattern(p)) => json!({"type": "pattern", "pattern": p.bits()}),
        Event::Outbound(Outbound::Velocity(v)) => json!({"type": "velocity", "velocities": v}),
        Event::Outbound(Outbound::Playhead(p)) => json!({"type": "playhead", "value": p}),
        Event::Ensemble(results) => json!({"type": "ensemble", "models": ensemble_json(results)}),
        Event::State(s) => {
            let mut v = state_json(s);
            v["type"] = "state".into();
            v
        }
        Event::Error { message, .. } => error_json(message),
    }
}

pub fn error_json(message: &str) -> Value {
    json!({"type": "error", "message": message})
}

pub fn snapshot_json(models: &[ModelInfo], state: &EngineState, latest: &BTreeMap<String, GenerationResult>) -> Value {
    let models: Vec<Value> = models
        .iter()
        .map(|m| {
            json!({
                "model_id": m.model_id,
                "architecture": m.architecture,
                "atlas": m.atlas.as_ref().map(|a| json!({"points": a.points, "range": a.range})),
            })
        })
        .collect();
    json!({"type": "snapshot", "models": models, "state": state_json(state), "ensemble": ensemble_json(latest)})
}
