use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::{focal_loss, FocalParams};
use super::network::{ParamGrads, ToyModel, TrainableParams};
use super::tensor::FeatureMap;
use super::ModelConfig;
use crate::error::{Error, Result};
use crate::metrics::BinaryMask;
use crate::scalar::Scalar;

const SHUFFLE_STREAM: u64 = 2;

/// One training tile: stacked input channels and its reference mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub key: String,
    pub input: FeatureMap<T>,
    pub target: BinaryMask,
}

impl<T: Scalar> Sample<T> {
    pub fn new(key: impl Into<String>, input: FeatureMap<T>, target: BinaryMask) -> Result<Self> {
        if (input.height(), input.width()) != (target.height(), target.width()) {
            return Err(Error::Shape(format!(
                "input is {}x{} but target is {}x{}",
                input.height(),
                input.width(),
                target.height(),
                target.width()
            )));
        }
        Ok(Self {
            key: key.into(),
            input,
            target,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Patience-based early stopping on validation loss. Epochs are 1-based;
/// only a strictly lower loss counts as an improvement, so ties keep the
/// earliest epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best_epoch: usize,
    best_loss: f64,
    stale: usize,
    seen: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best_epoch: 0,
            best_loss: f64::INFINITY,
            stale: 0,
            seen: 0,
        }
    }

    pub fn observe(&mut self, val_loss: f64) -> StopDecision {
        self.seen += 1;
        if val_loss < self.best_loss || self.best_epoch == 0 {
            self.best_loss = val_loss;
            self.best_epoch = self.seen;
            self.stale = 0;
            StopDecision::Improved
        } else {
            self.stale += 1;
            if self.stale >= self.patience {
                StopDecision::Stop
            } else {
                StopDecision::Continue
            }
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState<T> {
    /// Epochs completed.
    pub epoch: usize,
    pub train_loss: Vec<T>,
    pub val_loss: Vec<T>,
    /// Losses of the initial parameters, before any update.
    pub initial_train_loss: T,
    pub initial_val_loss: T,
    /// 1-based epoch with the lowest validation loss.
    pub best_epoch: usize,
    pub best_params: TrainableParams<T>,
    pub stopped_early: bool,
}

impl<T: Scalar> TrainState<T> {
    /// `epoch,train_loss,val_loss` rows for every completed epoch.
    pub fn log_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss\n");
        for (i, (t, v)) in self.train_loss.iter().zip(&self.val_loss).enumerate() {
            let _ = writeln!(out, "{},{},{}", i + 1, t, v);
        }
        out
    }
}

fn focal_of<T: Scalar>(cfg: &ModelConfig) -> FocalParams<T> {
    FocalParams {
        gamma: T::lit(cfg.focal_gamma),
        alpha: T::lit(cfg.focal_alpha),
    }
}

struct Encoded<T> {
    features: FeatureMap<T>,
    targets: Vec<bool>,
    valid: Option<Vec<bool>>,
}

fn encode_all<T: Scalar>(model: &ToyModel<T>, samples: &[Sample<T>]) -> Result<Vec<Encoded<T>>> {
    samples
        .iter()
        .map(|s| {
            Ok(Encoded {
                features: model.encoder().encode(&s.input)?,
                targets: s.target.pixels().to_vec(),
                valid: s.target.valid().map(<[bool]>::to_vec),
            })
        })
        .collect()
}

fn mean_loss<T: Scalar>(params: &TrainableParams<T>, data: &[Encoded<T>], focal: FocalParams<T>) -> Result<T> {
    let mut total = T::zero();
    for e in data {
        let logits = params.logits(&e.features)?;
        total = total + focal_loss(logits.data(), &e.targets, e.valid.as_deref(), focal)?;
    }
    Ok(total / T::from_count(data.len()))
}

/// Mini-batch gradient descent on the trainable parameters with early
/// stopping on validation loss. The returned model carries the parameters of
/// the best epoch.
///
/// The encoder is frozen, so its features are computed once up front.
pub fn train<T: Scalar>(
    mut model: ToyModel<T>,
    train_set: &[Sample<T>],
    val_set: &[Sample<T>],
) -> Result<(ToyModel<T>, TrainState<T>)> {
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Validation("training and validation sets must be non-empty".into()));
    }
    let cfg = model.config().clone();
    let focal = focal_of::<T>(&cfg);
    let lr = T::lit(cfg.learning_rate);
    let train_data = encode_all(&model, train_set)?;
    let val_data = encode_all(&model, val_set)?;

    let initial_train_loss = mean_loss(model.params(), &train_data, focal)?;
    let initial_val_loss = mean_loss(model.params(), &val_data, focal)?;
    if !initial_train_loss.is_finite() || !initial_val_loss.is_finite() {
        return Err(Error::Diverged { epoch: 0 });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut state = TrainState {
        epoch: 0,
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        initial_train_loss,
        initial_val_loss,
        best_epoch: 0,
        best_params: model.params().clone(),
        stopped_early: false,
    };

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = T::zero();
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = ParamGrads::zeros_like(model.params());
            for &i in batch {
                let e = &train_data[i];
                let loss = model
                    .params()
                    .loss_and_grad(&e.features, &e.targets, e.valid.as_deref(), focal, &mut grads)?;
                if !loss.is_finite() {
                    return Err(Error::Diverged { epoch });
                }
                epoch_loss = epoch_loss + loss;
            }
            grads.scale(T::one() / T::from_count(batch.len()));
            model.params_mut().step(&grads, lr);
        }
        let train_loss = epoch_loss / T::from_count(train_data.len());
        let val_loss = mean_loss(model.params(), &val_data, focal)?;
        if !val_loss.is_finite() || !train_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        state.epoch = epoch;
        state.train_loss.push(train_loss);
        state.val_loss.push(val_loss);

        match stopper.observe(val_loss.as_f64()) {
            StopDecision::Improved => state.best_params = model.params().clone(),
            StopDecision::Continue => {}
            StopDecision::Stop => {
                state.stopped_early = epoch < cfg.max_epochs;
                break;
            }
        }
    }
    state.best_epoch = stopper.best_epoch();
    model.set_params(state.best_params.clone());
    Ok((model, state))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn early_stopping_rule() {
        let mut s = EarlyStopping::new(2);
        let decisions: Vec<StopDecision> = [1.0, 0.8, 0.9, 0.85].iter().map(|&v| s.observe(v)).collect();
        assert_eq!(
            decisions,
            [StopDecision::Improved, StopDecision::Improved, StopDecision::Continue, StopDecision::Stop]
        );
        assert_eq!(s.best_epoch(), 2);
    }

    #[test]
    fn ties_keep_earliest() {
        let mut s = EarlyStopping::new(5);
        for v in [0.5, 0.5, 0.7, 0.5] {
            s.observe(v);
        }
        assert_eq!(s.best_epoch(), 1);
    }

    #[test]
    fn large_patience_never_stops() {
        let mut s = EarlyStopping::new(10);
        assert!((0..10).all(|i| s.observe(i as f64) != StopDecision::Stop));
    }
}
