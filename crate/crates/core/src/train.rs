//! Minibatch training with Adam, RMSE evaluation and the mean baseline.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Binding, ParamStore, Tape, Tensor, Var};
use crate::corpus::MAX_GRADE;
use crate::error::{Error, Result};
use crate::model::{IbenModel, ModelInput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossKind {
    /// `(1/n) Σ (y − ŷ)²`.
    #[default]
    Mse,
    /// `Σ |y − ŷ|`.
    MaeSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub loss: LossKind,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub shuffle: bool,
    /// Global gradient-norm cap applied before each update.
    pub clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 25,
            batch_size: 16,
            learning_rate: 0.001,
            loss: LossKind::Mse,
            optimizer: OptimizerKind::Adam,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            shuffle: true,
            clip: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Invalid("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Invalid("batch_size must be at least 1".into()));
        }
        // lr = 0 is allowed: it freezes the parameters.
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Invalid(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Invalid("Adam betas must lie in [0, 1)".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Invalid("Adam epsilon must be positive".into()));
        }
        if let Some(c) = self.clip {
            if !(c > 0.0) {
                return Err(Error::Invalid("clip must be positive".into()));
            }
        }
        Ok(())
    }
}

/// First and second moment estimates per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ParamStore) -> Self {
        let zeros: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.value.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }
}

fn check_grads(params: &ParamStore) -> Result<()> {
    for p in params.iter() {
        if !p.grad.is_finite() {
            return Err(Error::NonFiniteGradient { name: p.name.clone() });
        }
    }
    Ok(())
}

/// One bias-corrected Adam update using the accumulated gradients.
pub fn adam_step(params: &mut ParamStore, state: &mut AdamState, cfg: &TrainConfig) -> Result<()> {
    check_grads(params)?;
    state.t += 1;
    let t = state.t as f64;
    let bc1 = 1.0 - libm::pow(cfg.beta1, t);
    let bc2 = 1.0 - libm::pow(cfg.beta2, t);
    for ((p, m), v) in params.iter_mut().zip(&mut state.m).zip(&mut state.v) {
        let grad = p.grad.data();
        let value = p.value.data_mut();
        for i in 0..value.len() {
            let g = grad[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            value[i] -= cfg.learning_rate * m_hat / (libm::sqrt(v_hat) + cfg.epsilon);
        }
    }
    Ok(())
}

/// Plain gradient descent update.
pub fn sgd_step(params: &mut ParamStore, cfg: &TrainConfig) -> Result<()> {
    check_grads(params)?;
    for p in params.iter_mut() {
        let grad = p.grad.data().to_vec();
        p.value
            .data_mut()
            .iter_mut()
            .zip(grad)
            .for_each(|(v, g)| *v -= cfg.learning_rate * g);
    }
    Ok(())
}

fn clip_grads(params: &mut ParamStore, max_norm: f64) {
    let norm = libm::sqrt(
        params
            .iter()
            .flat_map(|p| p.grad.data().iter())
            .map(|g| g * g)
            .sum::<f64>(),
    );
    if norm > max_norm {
        let s = max_norm / norm;
        for p in params.iter_mut() {
            p.grad.data_mut().iter_mut().for_each(|g| *g *= s);
        }
    }
}

/// One training or evaluation example.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub input: ModelInput,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-sample loss over the epoch, measured before each update.
    pub train_loss: f64,
    pub dev_rmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
}

impl History {
    pub fn train_losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.train_loss).collect()
    }
}

fn sample_loss(tape: &mut Tape<'_>, model: &IbenModel, b: &Binding, s: &Sample, kind: LossKind) -> Result<Var> {
    let pred = model.forward_on_tape(tape, b, &s.input)?;
    let target = tape.constant(Tensor::scalar(s.target));
    match kind {
        LossKind::Mse => tape.mse_loss(pred, target),
        LossKind::MaeSum => tape.mae_sum_loss(pred, target),
    }
}

/// Trains `model` in place.
///
/// Each epoch visits the data in a seeded shuffle order (or file order when
/// shuffling is off), split into batches of `batch_size` with the final
/// partial batch kept. Within a batch, per-sample gradients are accumulated
/// in ascending sample-index order, so a given seed always produces the same
/// parameters bit for bit. With the mean-squared loss each sample's loss is
/// divided by the batch length, giving the batch mean.
pub fn train(model: &mut IbenModel, data: &[Sample], dev: Option<&[Sample]>, cfg: &TrainConfig) -> Result<History> {
    train_with(model, data, dev, cfg, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with<F>(
    model: &mut IbenModel,
    data: &[Sample],
    dev: Option<&[Sample]>,
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<History>
where
    F: FnMut(&EpochRecord),
{
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Invalid("training set is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(model.params());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = History::default();

    for epoch in 1..=cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut sample_losses = vec![0.0; data.len()];
        for (bi, batch) in order.chunks(cfg.batch_size).enumerate() {
            let batch_no = bi + 1;
            model.params_mut().zero_grad();
            let scale = match cfg.loss {
                LossKind::Mse => 1.0 / batch.len() as f64,
                LossKind::MaeSum => 1.0,
            };
            let mut batch = batch.to_vec();
            batch.sort_unstable();
            for &i in &batch {
                let (grads, binding) = {
                    let mut tape = Tape::new();
                    let b = model.params().bind(&mut tape);
                    let loss = sample_loss(&mut tape, model, &b, &data[i], cfg.loss).map_err(|e| match e {
                        Error::NonFinite { .. } => Error::NonFiniteLoss { epoch, batch: batch_no },
                        other => other,
                    })?;
                    let value = tape.value(loss).item();
                    if !value.is_finite() {
                        return Err(Error::NonFiniteLoss { epoch, batch: batch_no });
                    }
                    sample_losses[i] = value;
                    let scaled = tape.scale(loss, scale)?;
                    (tape.backward(scaled)?, b)
                };
                model.params_mut().accumulate(&binding, &grads);
            }
            if let Some(c) = cfg.clip {
                clip_grads(model.params_mut(), c);
            }
            match cfg.optimizer {
                OptimizerKind::Adam => adam_step(model.params_mut(), &mut adam, cfg)?,
                OptimizerKind::Sgd => sgd_step(model.params_mut(), cfg)?,
            }
        }
        let dev_rmse = match dev {
            Some(d) if !d.is_empty() => Some(evaluate(model, d, false)?.rmse),
            _ => None,
        };
        let rec = EpochRecord {
            epoch,
            // summed in sample order so the value does not depend on the shuffle
            train_loss: sample_losses.iter().sum::<f64>() / data.len() as f64,
            dev_rmse,
        };
        on_epoch(&rec);
        history.epochs.push(rec);
    }
    model.params_mut().zero_grad();
    Ok(history)
}

/// `sqrt((1/n) Σ (y − ŷ)²)`.
pub fn evaluate_rmse(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::Invalid(format!(
            "{} predictions for {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Invalid("cannot compute RMSE of zero samples".into()));
    }
    let sse: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, y)| (y - p) * (y - p))
        .sum();
    Ok(libm::sqrt(sse / predictions.len() as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub id: String,
    pub target: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rmse: f64,
    pub n: usize,
    pub predictions: Vec<Prediction>,
}

/// Predicts every sample; `clamp` bounds predictions to `[0, 3]`.
pub fn evaluate(model: &IbenModel, samples: &[Sample], clamp: bool) -> Result<EvalReport> {
    let mut predictions = Vec::with_capacity(samples.len());
    for s in samples {
        let mut y = model.predict(&s.input)?;
        if clamp {
            y = y.clamp(0.0, MAX_GRADE);
        }
        predictions.push(Prediction {
            id: s.id.clone(),
            target: s.target,
            predicted: y,
        });
    }
    let p: Vec<f64> = predictions.iter().map(|p| p.predicted).collect();
    let t: Vec<f64> = predictions.iter().map(|p| p.target).collect();
    Ok(EvalReport {
        rmse: evaluate_rmse(&p, &t)?,
        n: predictions.len(),
        predictions,
    })
}

/// Constant predictor equal to the mean training grade.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanBaseline {
    pub mean: f64,
}

impl MeanBaseline {
    pub fn predict(&self) -> f64 {
        self.mean
    }
}

pub fn mean_baseline(train_grades: &[f64]) -> Result<MeanBaseline> {
    if train_grades.is_empty() {
        return Err(Error::Invalid("baseline needs a non-empty training set".into()));
    }
    Ok(MeanBaseline {
        mean: train_grades.iter().sum::<f64>() / train_grades.len() as f64,
    })
}

pub fn baseline_rmse(train_grades: &[f64], eval_grades: &[f64]) -> Result<f64> {
    let b = mean_baseline(train_grades)?;
    let preds = vec![b.predict(); eval_grades.len()];
    evaluate_rmse(&preds, eval_grades)
}
