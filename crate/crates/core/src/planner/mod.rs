//! Behavioural-cloning planner: two small ReLU networks map
//! (left_cm, right_cm, x_angle, proximity) to the desired linear and angular
//! velocity. Includes the scripted demonstrator that produces the training
//! data.

mod adam;
mod dataset;
mod mlp;
mod model;
mod policy;
mod scaler;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use dataset::{
    episode_variant, expert_policy, generate_dataset, DemoDataset, DemoRow, ExpertConfig, GenConfig, PlannerInput,
    DATASET_HEADER,
};
pub use mlp::{compute_loss, loss_derivative, LossKind, MlpNetwork, V_NET_SIZES, W_NET_SIZES};
pub use model::{PlannerModel, MODEL_FORMAT, MODEL_VERSION};
pub use policy::{plan_twist, ExpertPolicy, NetworkPolicy, PlannerState, DEFAULT_X_ANGLE};
pub use scaler::{FeatureScaler, STD_FLOOR};
pub use train::{split_indices, train_network, train_planner, EpochLoss, TrainConfig, TrainedPlanner};

pub const N_FEATURES: usize = 4;

/// Highest linear speed the robot is ever asked for, m/s.
pub const V_LIMIT: f64 = 1.0;

/// Clamps a linear velocity into [0, V_LIMIT]; NaN maps to 0.
pub fn clamp_v(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, V_LIMIT)
    }
}
