use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{backward, forward, loss, Params};
use super::{ModelKind, PropagationSet, TrainConfig};
use crate::error::{Error, Result};
use crate::sparse::DenseMatrix;

/// Adam over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(len: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainOutcome {
    /// Parameters at the best validation epoch.
    pub params: Params,
    pub best_epoch: usize,
    pub best_val_acc: f64,
    pub history: Vec<EpochRecord>,
}

/// Fraction of `mask` rows whose argmax (lowest index on ties) equals the label.
pub fn accuracy(probabilities: &DenseMatrix, labels: &[usize], mask: &[usize]) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let correct = mask
        .iter()
        .filter(|&&i| {
            let row = probabilities.row(i);
            let mut best = 0;
            for c in 1..row.len() {
                if row[c] > row[best] {
                    best = c;
                }
            }
            best == labels[i]
        })
        .count();
    Ok(correct as f64 / mask.len() as f64)
}

/// Class probabilities in evaluation mode (no dropout).
pub fn predict(kind: ModelKind, x: &DenseMatrix, props: &PropagationSet, params: &Params) -> Result<DenseMatrix> {
    Ok(forward(kind, x, props, params, None)?.probabilities)
}

pub fn evaluate(
    kind: ModelKind,
    x: &DenseMatrix,
    props: &PropagationSet,
    params: &Params,
    labels: &[usize],
    mask: &[usize],
) -> Result<f64> {
    accuracy(&predict(kind, x, props, params)?, labels, mask)
}

/// Full-batch training with Adam and early stopping on validation accuracy.
///
/// Ties in validation accuracy are broken by lower validation loss. Training
/// stops after `patience` epochs without improvement.
#[allow(clippy::too_many_arguments)]
pub fn train(
    kind: ModelKind,
    x: &DenseMatrix,
    props: &PropagationSet,
    labels: &[usize],
    classes: usize,
    train_idx: &[usize],
    val_idx: &[usize],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if labels.len() != x.nrows() {
        return Err(Error::ShapeMismatch(format!("{} labels for {} nodes", labels.len(), x.nrows())));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::InvalidParameter(format!("label {bad} outside 0..{classes}")));
    }
    if train_idx.is_empty() || val_idx.is_empty() {
        return Err(Error::EmptyMask);
    }
    props.check(kind, x.nrows())?;
    let mixed = kind.is_mixed();
    let mut params = Params::init(kind, x.ncols(), cfg.hidden, classes, cfg.layers, cfg.seed);
    let mut flat = params.flatten(mixed);
    let mut adam = Adam::new(flat.len(), cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));

    let mut best: Option<(f64, f64, usize, Params)> = None;
    let mut history = Vec::new();
    let mut since_best = 0;
    for epoch in 0..cfg.max_epochs {
        let cache = forward(kind, x, props, &params, Some((cfg.dropout, &mut rng)))?;
        let train_loss = loss(&cache.probabilities, labels, train_idx, &params, cfg.weight_decay)?;
        let grads = backward(kind, &cache, props, &params, labels, train_idx, cfg.weight_decay)?;
        adam.step(&mut flat, &grads.flatten(mixed));
        params = params.unflatten(&flat, mixed);

        let probs = predict(kind, x, props, &params)?;
        let val_loss = loss(&probs, labels, val_idx, &params, 0.0)?;
        let val_acc = accuracy(&probs, labels, val_idx)?;
        let train_acc = accuracy(&probs, labels, train_idx)?;
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            train_acc,
            val_acc,
            alpha: params.alpha,
            beta: params.beta,
        });

        let improved = match &best {
            None => true,
            Some((acc, vl, _, _)) => val_acc > *acc || (val_acc == *acc && val_loss < *vl),
        };
        if improved {
            best = Some((val_acc, val_loss, epoch, params.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    let (best_val_acc, _, best_epoch, params) = best.expect("at least one epoch");
    Ok(TrainOutcome { params, best_epoch, best_val_acc, history })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_contract() {
        let p = DenseMatrix::from_row_slice(3, 2, &[0.9, 0.1, 0.5, 0.5, 0.2, 0.8]);
        assert_eq!(accuracy(&p, &[0, 0, 1], &[0, 1, 2]).unwrap(), 1.0);
        assert_eq!(accuracy(&p, &[1, 1, 0], &[0, 1, 2]).unwrap(), 0.0);
        assert_eq!(accuracy(&p, &[0, 0, 1], &[]), Err(Error::EmptyMask));
        // swapping columns and labels together
        let q = DenseMatrix::from_row_slice(3, 2, &[0.1, 0.9, 0.5, 0.5, 0.8, 0.2]);
        assert_eq!(accuracy(&q, &[1, 0, 0], &[0, 2]).unwrap(), accuracy(&p, &[0, 0, 1], &[0, 2]).unwrap());
    }

    #[test]
    fn adam_minimizes_quadratic() {
        let mut x = vec![3.0, -2.0];
        let mut opt = Adam::new(2, 0.1);
        for _ in 0..500 {
            let g: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
            opt.step(&mut x, &g);
        }
        assert!(x.iter().all(|v| v.abs() < 1e-2));
    }
}
