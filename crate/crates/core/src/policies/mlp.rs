use serde::{Deserialize, Serialize};

use crate::plant::PlanningAction;
use crate::scenario::AidcConfig;

use super::{Observation, PlanningPolicy, PolicyError, ACTION_DIM, FEATURE_NAMES, OBS_DIM};

pub const WEIGHTS_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }
}

/// Output map onto `[0,1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Squash {
    /// `(tanh(x) + 1) / 2`
    Tanh01,
    Sigmoid,
}

/// Affine layer `act(W x + b)`, `w` row-major with `rows` outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub rows: usize,
    pub cols: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub act: Activation,
}

/// Exported actor network: 13 normalized features in, 5 pre-squash outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyWeights {
    pub version: u32,
    pub layers: Vec<DenseLayer>,
    pub squash: Squash,
    pub feature_order: Vec<String>,
}

impl PolicyWeights {
    pub fn from_json(text: &str) -> Result<Self, PolicyError> {
        let w: Self = serde_json::from_str(text).map_err(|e| PolicyError::Load {
            path: "<json>".into(),
            message: e.to_string(),
        })?;
        w.validate()?;
        Ok(w)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, PolicyError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| PolicyError::Load {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text).map_err(|e| match e {
            PolicyError::Load { message, .. } => PolicyError::Load {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("weights serialize")
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.version != WEIGHTS_VERSION {
            return Err(PolicyError::Version(self.version));
        }
        if self.feature_order.len() != OBS_DIM
            || self.feature_order.iter().zip(FEATURE_NAMES).any(|(a, b)| a != b)
        {
            return Err(PolicyError::FeatureOrder);
        }
        self.check_shapes()?;
        for (i, l) in self.layers.iter().enumerate() {
            if l.w.iter().chain(&l.b).any(|v| !v.is_finite()) {
                return Err(PolicyError::NonFinite(format!("layer {i}")));
            }
        }
        Ok(())
    }

    /// The 13 -> ... -> 5 chain with consistent buffer lengths.
    fn check_shapes(&self) -> Result<(), PolicyError> {
        if self.layers.is_empty() {
            return Err(PolicyError::Shape("no layers".into()));
        }
        let mut width = OBS_DIM;
        for (i, l) in self.layers.iter().enumerate() {
            if l.cols != width {
                return Err(PolicyError::Shape(format!(
                    "layer {i} expects {} inputs, previous width is {width}",
                    l.cols
                )));
            }
            if l.w.len() != l.rows * l.cols || l.b.len() != l.rows {
                return Err(PolicyError::Shape(format!(
                    "layer {i}: w has {} entries and b {}, expected {} and {}",
                    l.w.len(),
                    l.b.len(),
                    l.rows * l.cols,
                    l.rows
                )));
            }
            width = l.rows;
        }
        if width != ACTION_DIM {
            return Err(PolicyError::Shape(format!(
                "output width {width}, expected {ACTION_DIM}"
            )));
        }
        Ok(())
    }

    /// Deterministic forward pass on normalized features.
    pub fn forward(&self, features: &[f64; OBS_DIM]) -> [f64; ACTION_DIM] {
        let mut h = features.to_vec();
        for l in &self.layers {
            h = (0..l.rows)
                .map(|r| {
                    let row = &l.w[r * l.cols..(r + 1) * l.cols];
                    let z: f64 = row.iter().zip(&h).map(|(w, x)| w * x).sum::<f64>() + l.b[r];
                    l.act.apply(z)
                })
                .collect();
        }
        let mut out = [0.0; ACTION_DIM];
        for (o, z) in out.iter_mut().zip(h) {
            *o = match self.squash {
                Squash::Tanh01 => (z.tanh() + 1.0) / 2.0,
                Squash::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            };
        }
        out
    }
}

/// Applies exported weights to an observation.
pub fn mlp_policy_eval(weights: &PolicyWeights, obs: &Observation) -> Result<PlanningAction, PolicyError> {
    weights.check_shapes()?;
    let out = weights.forward(&obs.features);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(PolicyError::NonFinite(format!("policy output at step {}", obs.t)));
    }
    Ok(PlanningAction::from_array(out))
}

#[derive(Debug, Clone)]
pub struct MlpPolicy {
    weights: PolicyWeights,
}

impl MlpPolicy {
    pub fn new(weights: PolicyWeights) -> Result<Self, PolicyError> {
        weights.validate()?;
        Ok(Self { weights })
    }
}

impl PlanningPolicy for MlpPolicy {
    fn name(&self) -> String {
        "mlp".into()
    }

    fn act(&mut self, obs: &Observation, _cfg: &AidcConfig) -> Result<PlanningAction, PolicyError> {
        mlp_policy_eval(&self.weights, obs)
    }
}
