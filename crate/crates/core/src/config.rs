//! One serialisable bundle of every tunable, with JSON-file and dotted-key
//! overrides (`control.kp=1.5`, `sim.max_duration=30`).

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::control::{StepSetup, TuningGrid};
use crate::error::{Error, Result};
use crate::planner::{ExpertConfig, GenConfig, TrainConfig};
use crate::world::SimConfig;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub sim: SimConfig,
    pub expert: ExpertConfig,
    pub gen: GenConfig,
    pub train: TrainConfig,
    pub step: StepSetup,
    pub tuning: TuningGrid,
}

/// Short forms accepted on the command line. `control.kp` and `control.ki`
/// set both the linear and the angular loop.
fn expand_key(key: &str) -> Vec<String> {
    match key {
        "control.kp" | "control.ki" | "control.kd" => {
            let leaf = &key["control.".len()..];
            vec![format!("sim.controller.gains_v.{leaf}"), format!("sim.controller.gains_w.{leaf}")]
        }
        "control.tau" => vec!["sim.controller.tau".into(), "step.tau".into()],
        _ => match key.split_once('.') {
            Some(("control", rest)) => vec![format!("sim.controller.{rest}")],
            Some(("vision", rest)) => vec![format!("sim.vision.{rest}")],
            Some(("camera", rest)) => vec![format!("sim.camera.{rest}")],
            Some(("sensors", rest)) => vec![format!("sim.sensors.{rest}")],
            _ => vec![key.to_string()],
        },
    }
}

/// Overwrites the existing leaf at `path`; unknown keys are an error.
fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut node = root;
    for part in path.split('.') {
        node = match node {
            Value::Object(map) => map.get_mut(part),
            Value::Array(items) => part.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| Error::Config(format!("unknown config key `{path}`")))?;
    }
    *node = value;
    Ok(())
}

/// Recursively copies `patch` onto `base`, refusing keys `base` lacks.
fn merge(base: &mut Value, patch: Value, at: &str) -> Result<()> {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                let here = if at.is_empty() { k.clone() } else { format!("{at}.{k}") };
                let slot = b.get_mut(&k).ok_or_else(|| Error::Config(format!("unknown config key `{here}`")))?;
                merge(slot, v, &here)?;
            }
            Ok(())
        }
        (b, p) => {
            *b = p;
            Ok(())
        }
    }
}

/// Parses an override value: JSON when it parses, otherwise a bare string.
fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        if !(self.expert.clear_cm > self.expert.stop_cm) {
            return Err(Error::Config("expert.clear_cm must exceed expert.stop_cm".into()));
        }
        if self.train.batch_size == 0 || !(0.0..1.0).contains(&self.train.val_fraction) {
            return Err(Error::Config("need train.batch_size > 0 and 0 <= train.val_fraction < 1".into()));
        }
        if !(self.step.tau > 0.0 && self.step.dt > 0.0 && self.step.duration > 0.0) {
            return Err(Error::Config("step.tau, step.dt and step.duration must be positive".into()));
        }
        Ok(())
    }

    /// Defaults, then the JSON file (if any), then `key=value` overrides.
    pub fn resolve<S: AsRef<str>>(file: Option<&Path>, overrides: &[S]) -> Result<Self> {
        let mut value = serde_json::to_value(Config::default())?;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)?;
            merge(&mut value, serde_json::from_str(&text)?, "")?;
        }
        for item in overrides {
            let item = item.as_ref();
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{item}` is not key=value")))?;
            let key = key.trim();
            for path in expand_key(key) {
                set_path(&mut value, &path, parse_value(raw.trim()))
                    .map_err(|_| Error::Config(format!("unknown config key `{key}`")))?;
            }
        }
        let cfg: Config =
            serde_json::from_value(value).map_err(|e| Error::Config(format!("invalid configuration: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}
