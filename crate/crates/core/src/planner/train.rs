use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::dataset::DemoDataset;
use super::mlp::{compute_loss, LossKind, MlpNetwork, V_NET_SIZES, W_NET_SIZES};
use super::model::PlannerModel;
use super::scaler::FeatureScaler;
use super::N_FEATURES;
use crate::error::{Error, Result};

// Independent RNG streams derived from one training seed.
const STREAM_SPLIT: u64 = 0;
const STREAM_SHUFFLE: u64 = 1;
const STREAM_INIT_V: u64 = 2;
const STREAM_INIT_W: u64 = 3;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seeded permutation of `0..n` cut into (train, validation) index lists.
pub fn split_indices(n: usize, seed: u64, val_fraction: f64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng(seed, STREAM_SPLIT));
    let n_val = ((n as f64 * val_fraction).round() as usize).min(n.saturating_sub(1));
    let train = idx.split_off(n_val);
    (train, idx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub val_fraction: f64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 300, batch_size: 32, seed: 42, val_fraction: 0.2, adam: AdamConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train: f64,
    pub val: f64,
}

/// Mini-batch Adam on already scaled inputs. Returns the loss on both splits
/// after every epoch.
pub fn train_network(
    net: &mut MlpNetwork,
    inputs: &[[f64; N_FEATURES]],
    targets: &[f64],
    loss: LossKind,
    cfg: &TrainConfig,
) -> Result<Vec<EpochLoss>> {
    if inputs.len() != targets.len() {
        return Err(Error::LengthMismatch(inputs.len(), targets.len()));
    }
    if inputs.is_empty() {
        return Err(Error::Empty("cannot train on an empty dataset"));
    }
    if inputs.len() < 10 {
        return Err(Error::DatasetShort { got: inputs.len(), wanted: 10 });
    }
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    let (mut train_idx, val_idx) = split_indices(inputs.len(), cfg.seed, cfg.val_fraction);
    let mut shuffle = rng(cfg.seed, STREAM_SHUFFLE);
    let mut adam = AdamState::new(net.params().len(), cfg.adam);
    let mut grad = vec![0.0; net.params().len()];
    let mut history = Vec::with_capacity(cfg.epochs);

    let eval = |net: &MlpNetwork, idx: &[usize]| -> Result<f64> {
        if idx.is_empty() {
            return Ok(f64::NAN);
        }
        let preds: Vec<f64> = idx.iter().map(|&i| net.forward(&inputs[i])).collect();
        let ys: Vec<f64> = idx.iter().map(|&i| targets[i]).collect();
        compute_loss(&preds, &ys, loss)
    };

    for epoch in 1..=cfg.epochs {
        train_idx.shuffle(&mut shuffle);
        for batch in train_idx.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                net.accumulate_gradients(&inputs[i], targets[i], loss, scale, &mut grad);
            }
            adam_step(&mut adam, net.params_mut(), &grad);
        }
        let train = eval(net, &train_idx)?;
        let val = eval(net, &val_idx)?;
        if !train.is_finite() || !(val.is_finite() || val_idx.is_empty()) {
            return Err(Error::Diverged { epoch });
        }
        log::debug!("epoch {epoch}: train {train:.6} val {val:.6}");
        history.push(EpochLoss { epoch, train, val });
    }
    Ok(history)
}

#[derive(Debug, Clone)]
pub struct TrainedPlanner {
    pub model: PlannerModel,
    /// MAE history of the linear velocity network.
    pub v_history: Vec<EpochLoss>,
    /// MSE history of the angular velocity network.
    pub w_history: Vec<EpochLoss>,
}

/// Fits the scaler on the training split, then trains the v-network on MAE
/// and the ω-network on MSE.
pub fn train_planner(dataset: &DemoDataset, cfg: &TrainConfig) -> Result<TrainedPlanner> {
    if dataset.is_empty() {
        return Err(Error::Empty("cannot train on an empty dataset"));
    }
    let raw = dataset.inputs();
    let (train_idx, _) = split_indices(raw.len(), cfg.seed, cfg.val_fraction);
    let train_rows: Vec<_> = train_idx.iter().map(|&i| raw[i]).collect();
    let (scaler, _) = FeatureScaler::fit(&train_rows)?;
    let scaled: Vec<_> = raw.iter().map(|x| scaler.apply(x)).collect();
    let v: Vec<f64> = dataset.rows.iter().map(|r| r.v).collect();
    let w: Vec<f64> = dataset.rows.iter().map(|r| r.w).collect();

    let mut v_net = MlpNetwork::initialized(&V_NET_SIZES, &mut rng(cfg.seed, STREAM_INIT_V));
    let mut w_net = MlpNetwork::initialized(&W_NET_SIZES, &mut rng(cfg.seed, STREAM_INIT_W));
    let v_history = train_network(&mut v_net, &scaled, &v, LossKind::Mae, cfg)?;
    let w_history = train_network(&mut w_net, &scaled, &w, LossKind::Mse, cfg)?;
    Ok(TrainedPlanner { model: PlannerModel { seed: cfg.seed, scaler, v_net, w_net }, v_history, w_history })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_a_seeded_partition() {
        let (tr, va) = split_indices(100, 5, 0.2);
        assert_eq!((tr.len(), va.len()), (80, 20));
        let mut all: Vec<_> = tr.iter().chain(&va).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_eq!(split_indices(100, 5, 0.2), (tr, va));
        assert_ne!(split_indices(100, 6, 0.2).1, split_indices(100, 5, 0.2).1);
    }

    #[test]
    fn memorizes_a_constant() {
        let inputs = vec![[0.3, -1.0, 0.5, 0.0]; 1000];
        let targets = vec![0.5; 1000];
        let mut net = MlpNetwork::initialized(&V_NET_SIZES, &mut rng(1, 9));
        let cfg = TrainConfig { epochs: 50, seed: 1, ..TrainConfig::default() };
        let hist = train_network(&mut net, &inputs, &targets, LossKind::Mse, &cfg).unwrap();
        assert_eq!(hist.len(), 50);
        assert!(hist.last().unwrap().train < 1e-3, "{:?}", hist.last());
    }

    #[test]
    fn rejects_tiny_or_mismatched_data() {
        let mut net = MlpNetwork::zeros(&V_NET_SIZES);
        let cfg = TrainConfig::default();
        assert!(train_network(&mut net, &[], &[], LossKind::Mse, &cfg).is_err());
        assert!(train_network(&mut net, &[[0.0; 4]; 5], &[0.0; 5], LossKind::Mse, &cfg).is_err());
        assert!(train_network(&mut net, &[[0.0; 4]; 20], &[0.0; 19], LossKind::Mse, &cfg).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let inputs = vec![[1.0, 1.0, 1.0, 1.0]; 20];
        let targets = vec![f64::MAX; 20];
        let mut net = MlpNetwork::zeros(&V_NET_SIZES);
        let cfg = TrainConfig { epochs: 3, ..TrainConfig::default() };
        assert!(matches!(
            train_network(&mut net, &inputs, &targets, LossKind::Mse, &cfg),
            Err(Error::Diverged { epoch: 1 })
        ));
    }
}
