use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::PlannerInput;
use super::{clamp_v, FeatureScaler, MlpNetwork, V_NET_SIZES, W_NET_SIZES};
use crate::error::{Error, Result};
use crate::kinematics::BodyTwist;

pub const MODEL_FORMAT: &str = "follower-planner";
pub const MODEL_VERSION: u32 = 1;

/// Scaler plus the linear and angular velocity networks.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannerModel {
    /// Seed the model was trained with.
    pub seed: u64,
    pub scaler: FeatureScaler,
    pub v_net: MlpNetwork,
    pub w_net: MlpNetwork,
}

impl PlannerModel {
    /// Raw network outputs with `v` clamped to [0, 1] m/s.
    pub fn predict(&self, input: &PlannerInput) -> BodyTwist {
        let z = self.scaler.apply(&input.as_array());
        BodyTwist::new(clamp_v(self.v_net.forward(&z)), self.w_net.forward(&z))
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            seed: self.seed,
            scaler: self.scaler,
            v_net: NetFile::from(&self.v_net),
            w_net: NetFile::from(&self.w_net),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        let bad = |detail: String| Error::Format { what: "model json", detail };
        if file.format != MODEL_FORMAT {
            return Err(bad(format!("unknown format `{}`", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(bad(format!("unsupported version {}", file.version)));
        }
        if file.scaler.std.iter().any(|s| !(*s > 0.0)) {
            return Err(bad("scaler std must be positive".into()));
        }
        let v_net = file.v_net.into_network(&V_NET_SIZES)?;
        let w_net = file.w_net.into_network(&W_NET_SIZES)?;
        Ok(Self { seed: file.seed, scaler: file.scaler, v_net, w_net })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_json()? + "\n")?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    seed: u64,
    scaler: FeatureScaler,
    v_net: NetFile,
    w_net: NetFile,
}

#[derive(Serialize, Deserialize)]
struct NetFile {
    layer_sizes: Vec<usize>,
    /// One row-major `out x in` matrix per layer.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    hidden_activation: String,
    output_activation: String,
}

impl From<&MlpNetwork> for NetFile {
    fn from(net: &MlpNetwork) -> Self {
        Self {
            layer_sizes: net.layer_sizes().to_vec(),
            weights: (0..net.n_layers()).map(|l| net.weights(l).to_vec()).collect(),
            biases: (0..net.n_layers()).map(|l| net.biases(l).to_vec()).collect(),
            hidden_activation: "relu".into(),
            output_activation: "linear".into(),
        }
    }
}

impl NetFile {
    fn into_network(self, expected: &[usize]) -> Result<MlpNetwork> {
        if self.layer_sizes != expected {
            return Err(Error::Format {
                what: "model json",
                detail: format!("layer sizes {:?}, expected {expected:?}", self.layer_sizes),
            });
        }
        if self.hidden_activation != "relu" || self.output_activation != "linear" {
            return Err(Error::Format { what: "model json", detail: "only relu/linear networks are supported".into() });
        }
        if self.weights.iter().chain(&self.biases).flatten().any(|v| !v.is_finite()) {
            return Err(Error::Format { what: "model json", detail: "non-finite parameter".into() });
        }
        MlpNetwork::from_parts(&self.layer_sizes, &self.weights, &self.biases)
    }
}
