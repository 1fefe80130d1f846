use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adamw::{adamw_step, AdamWConfig, AdamWState};
use super::mlp::{backward, mean_loss, DropoutMasks, MlpParameters};
use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamWConfig::default();
        TrainConfig {
            batch_size: 128,
            dropout: 0.40,
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            weight_decay: adam.weight_decay,
            max_epochs: 200,
            early_stop_patience: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn adamw(&self) -> AdamWConfig {
        AdamWConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            weight_decay: self.weight_decay,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::Config(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        if self.batch_size == 0 {
            return Err(ModelError::Config("batch_size must be >= 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(ModelError::Config("max_epochs must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(ModelError::Config(
                "learning_rate > 0 and betas in [0, 1) required".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean of the dropout-mode mini-batch losses seen during the epoch.
    pub batch_loss: f64,
    /// Inference-mode loss over the whole training set after the epoch.
    pub train_loss: f64,
    pub validation_loss: f64,
    pub validation_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub params: MlpParameters,
    pub best_epoch: usize,
    pub log: Vec<EpochLog>,
    pub stopped_early: bool,
}

fn check_classes(name: &str, data: &[(&[f64], u8)]) -> Result<(), ModelError> {
    let ones = data.iter().filter(|(_, y)| *y == 1).count();
    if ones == 0 || ones == data.len() {
        return Err(ModelError::SingleClass(format!(
            "{name} set has {} sample(s) of class 1 out of {}; both classes are required",
            ones,
            data.len()
        )));
    }
    Ok(())
}

fn accuracy(params: &MlpParameters, data: &[(&[f64], u8)]) -> Result<f64, ModelError> {
    let mut correct = 0usize;
    for &(x, y) in data {
        let pred = u8::from(params.predict_p1(x)? >= 0.5);
        correct += usize::from(pred == y);
    }
    Ok(correct as f64 / data.len().max(1) as f64)
}

/// Mini-batch AdamW training with dropout and early stopping on validation
/// loss. Fully determined by `config.seed` and the order of `train`.
pub fn train(
    train: &[(&[f64], u8)],
    validation: &[(&[f64], u8)],
    config: &TrainConfig,
    embedder_id: &str,
) -> Result<TrainOutcome, ModelError> {
    config.validate()?;
    check_classes("training", train)?;
    check_classes("validation", validation)?;
    let input_dim = train[0].0.len();
    if let Some(&(x, _)) = train.iter().chain(validation).find(|(x, _)| x.len() != input_dim) {
        return Err(ModelError::DimensionMismatch {
            expected: input_dim,
            found: x.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = MlpParameters::init(input_dim, embedder_id, &mut rng);
    let mut state = AdamWState::new(&params.layers);
    let adam = config.adamw();

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best = (f64::INFINITY, params.clone(), 0usize);
    let mut log = Vec::new();
    let mut since_best = 0usize;
    let mut stopped_early = false;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut batch_losses = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(&[f64], u8)> = chunk.iter().map(|&i| train[i]).collect();
            let masks: Vec<DropoutMasks> = (0..batch.len())
                .map(|_| DropoutMasks::sample(&params, config.dropout, &mut rng))
                .collect();
            let (grads, loss) = backward(&params, &batch, Some(&masks))?;
            adamw_step(&mut params.layers, &grads, &mut state, &adam);
            batch_losses += loss;
            batches += 1;
        }
        if !params.is_finite() {
            return Err(ModelError::Diverged(epoch));
        }
        let entry = EpochLog {
            epoch,
            batch_loss: batch_losses / batches as f64,
            train_loss: mean_loss(&params, train)?,
            validation_loss: mean_loss(&params, validation)?,
            validation_accuracy: accuracy(&params, validation)?,
        };
        log::debug!(
            "epoch {epoch}: train {:.5} val {:.5} acc {:.4}",
            entry.train_loss,
            entry.validation_loss,
            entry.validation_accuracy
        );
        if entry.validation_loss < best.0 {
            best = (entry.validation_loss, params.clone(), epoch);
            since_best = 0;
        } else {
            since_best += 1;
        }
        log.push(entry);
        if since_best >= config.early_stop_patience {
            stopped_early = true;
            break;
        }
    }
    Ok(TrainOutcome {
        params: best.1,
        best_epoch: best.2,
        log,
        stopped_early,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn pairs(data: &[(Vec<f64>, u8)]) -> Vec<(&[f64], u8)> {
        data.iter().map(|(x, y)| (x.as_slice(), *y)).collect()
    }

    #[test]
    fn rejects_single_class() {
        let data: Vec<(Vec<f64>, u8)> = (0..10).map(|i| (vec![i as f64; 4], 1)).collect();
        let p = pairs(&data);
        assert!(matches!(
            train(&p, &p, &TrainConfig::default(), "x"),
            Err(ModelError::SingleClass(_))
        ));
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = TrainConfig {
            dropout: 1.0,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn early_stopping_returns_best_epoch() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let noise = Normal::new(0.0, 1.0).unwrap();
        // pure noise: validation loss stops improving quickly
        let data: Vec<(Vec<f64>, u8)> = (0..200)
            .map(|i| ((0..8).map(|_| noise.sample(&mut rng)).collect(), (i % 2) as u8))
            .collect();
        let val: Vec<(Vec<f64>, u8)> = (0..100)
            .map(|i| ((0..8).map(|_| noise.sample(&mut rng)).collect(), (i % 2) as u8))
            .collect();
        let cfg = TrainConfig {
            max_epochs: 300,
            early_stop_patience: 5,
            learning_rate: 1e-2,
            ..TrainConfig::default()
        };
        let out = train(&pairs(&data), &pairs(&val), &cfg, "x").unwrap();
        assert!(out.stopped_early);
        assert_eq!(out.log.len(), out.best_epoch + 5);
        let best = out.log.iter().map(|e| e.validation_loss).fold(f64::INFINITY, f64::min);
        assert_eq!(out.log[out.best_epoch - 1].validation_loss, best);
    }
}
