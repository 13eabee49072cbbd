//! Feed-forward classifier: one hidden layer of logistic units, softmax
//! output, mean cross-entropy loss, trained by plain mini-batch gradient
//! descent. Weights are seeded-normal at init, biases zero, and the whole
//! procedure is deterministic given the seed.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::expfam::logistic;

#[derive(Debug, Clone, PartialEq)]
pub struct NeuralNet {
    /// d_hidden × d_in
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    /// C × d_hidden
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
}

impl NeuralNet {
    /// [d_in, d_hidden, C]
    pub fn dims(&self) -> [usize; 3] {
        [self.w1.ncols(), self.w1.nrows(), self.w2.nrows()]
    }

    pub fn validate(&self) -> Result<()> {
        let [d_in, d_hidden, c] = self.dims();
        if d_in == 0 || d_hidden == 0 || c == 0 {
            return Err(Error::invalid("network dimensions must be nonzero"));
        }
        if self.b1.len() != d_hidden || self.w2.ncols() != d_hidden || self.b2.len() != c {
            return Err(Error::invalid("network parameter shapes are inconsistent"));
        }
        let finite = self.w1.iter().all(|v| v.is_finite())
            && self.b1.iter().all(|v| v.is_finite())
            && self.w2.iter().all(|v| v.is_finite())
            && self.b2.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("network parameters must be finite"));
        }
        Ok(())
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone)]
pub struct TrainHyper {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub init_scale: f64,
    pub l2_decay: f64,
    /// Hidden-layer width.
    pub hidden: usize,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            learning_rate: 0.5,
            epochs: 200,
            batch_size: 32,
            seed: 0,
            init_scale: 0.1,
            l2_decay: 0.0,
            hidden: 32,
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if !(self.learning_rate > 0.0) || !(self.init_scale > 0.0) {
            return Err(Error::invalid("learning_rate and init_scale must be positive"));
        }
        if self.l2_decay < 0.0 {
            return Err(Error::invalid("l2_decay must be nonnegative"));
        }
        if self.hidden == 0 {
            return Err(Error::invalid("hidden width must be at least 1"));
        }
        Ok(())
    }
}

/// Gradients shaped like the network.
#[derive(Debug, Clone)]
pub struct NetGradient {
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
}

/// Class probabilities for one input: softmax(W2·logistic(W1·x + b1) + b2).
pub fn forward(net: &NeuralNet, x: &DVector<f64>) -> Result<DVector<f64>> {
    let [d_in, _, _] = net.dims();
    if x.len() != d_in {
        return Err(Error::invalid(format!(
            "input has length {} but the network expects {d_in}",
            x.len()
        )));
    }
    let hidden = (&net.w1 * x + &net.b1).map(logistic);
    let logits = &net.w2 * hidden + &net.b2;
    Ok(softmax(&logits))
}

fn softmax(logits: &DVector<f64>) -> DVector<f64> {
    let max = logits.max();
    let exp = logits.map(|v| (v - max).exp());
    let sum = exp.sum();
    exp / sum
}

fn log_sum_exp(logits: &DVector<f64>) -> f64 {
    let max = logits.max();
    max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Mean cross-entropy over the batch plus (l2_decay/2)·Σ weights², with
/// exact gradients for every parameter. Labels are 1-based.
pub fn loss_and_grad(
    net: &NeuralNet,
    features: &DMatrix<f64>,
    labels: &[usize],
    l2_decay: f64,
) -> Result<(f64, NetGradient)> {
    net.validate()?;
    let [d_in, d_hidden, c] = net.dims();
    let m = features.nrows();
    if m == 0 {
        return Err(Error::invalid("batch must be nonempty"));
    }
    if features.ncols() != d_in {
        return Err(Error::invalid(format!(
            "features have {} columns but the network expects {d_in}",
            features.ncols()
        )));
    }
    if labels.len() != m {
        return Err(Error::invalid("labels must match the batch rows"));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y == 0 || y > c) {
        return Err(Error::invalid(format!("label {bad} outside 1..={c}")));
    }

    let mut loss = 0.0;
    let mut gw1 = DMatrix::zeros(d_hidden, d_in);
    let mut gb1 = DVector::zeros(d_hidden);
    let mut gw2 = DMatrix::zeros(c, d_hidden);
    let mut gb2 = DVector::zeros(c);

    for i in 0..m {
        let x = features.row(i).transpose();
        let hidden = (&net.w1 * &x + &net.b1).map(logistic);
        let logits = &net.w2 * &hidden + &net.b2;
        let y = labels[i] - 1;
        loss += log_sum_exp(&logits) - logits[y];

        let mut delta_out = softmax(&logits);
        delta_out[y] -= 1.0;
        gw2 += &delta_out * hidden.transpose();
        gb2 += &delta_out;
        let mut delta_hidden = net.w2.transpose() * delta_out;
        for h in 0..d_hidden {
            delta_hidden[h] *= hidden[h] * (1.0 - hidden[h]);
        }
        gw1 += &delta_hidden * x.transpose();
        gb1 += &delta_hidden;
    }

    let scale = 1.0 / m as f64;
    loss *= scale;
    gw1 *= scale;
    gb1 *= scale;
    gw2 *= scale;
    gb2 *= scale;

    if l2_decay > 0.0 {
        loss += 0.5 * l2_decay * (net.w1.norm_squared() + net.w2.norm_squared());
        gw1 += l2_decay * &net.w1;
        gw2 += l2_decay * &net.w2;
    }

    Ok((
        loss,
        NetGradient {
            w1: gw1,
            b1: gb1,
            w2: gw2,
            b2: gb2,
        },
    ))
}

/// Train on the full dataset; requires at least one example of every class
/// in 1..=num_classes.
pub fn train_nn(
    features: &DMatrix<f64>,
    labels: &[usize],
    num_classes: usize,
    hyper: &TrainHyper,
) -> Result<NeuralNet> {
    train_nn_with_trace(features, labels, num_classes, hyper).map(|(net, _)| net)
}

/// Same as [`train_nn`] but also returns the full-dataset loss after each
/// epoch.
pub fn train_nn_with_trace(
    features: &DMatrix<f64>,
    labels: &[usize],
    num_classes: usize,
    hyper: &TrainHyper,
) -> Result<(NeuralNet, Vec<f64>)> {
    hyper.validate()?;
    let m = features.nrows();
    if m == 0 {
        return Err(Error::invalid("training set must be nonempty"));
    }
    if labels.len() != m {
        return Err(Error::invalid("labels must match the feature rows"));
    }
    if num_classes < 2 {
        return Err(Error::invalid("need at least 2 classes"));
    }
    let mut seen = vec![false; num_classes];
    for &y in labels {
        if y == 0 || y > num_classes {
            return Err(Error::invalid(format!("label {y} outside 1..={num_classes}")));
        }
        seen[y - 1] = true;
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(Error::invalid(format!(
            "class {} has no training examples",
            missing + 1
        )));
    }

    let d_in = features.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut draw = |rows: usize, cols: usize| {
        DMatrix::from_fn(rows, cols, |_, _| {
            let v: f64 = rng.sample(StandardNormal);
            v * hyper.init_scale
        })
    };
    let w1 = draw(hyper.hidden, d_in);
    let w2 = draw(num_classes, hyper.hidden);
    let mut net = NeuralNet {
        w1,
        b1: DVector::zeros(hyper.hidden),
        w2,
        b2: DVector::zeros(num_classes),
    };

    let mut order: Vec<usize> = (0..m).collect();
    let mut trace = Vec::with_capacity(hyper.epochs);
    for _epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(hyper.batch_size) {
            let batch = features.select_rows(chunk.iter());
            let batch_labels: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let (_, grad) = loss_and_grad(&net, &batch, &batch_labels, hyper.l2_decay)?;
            net.w1 -= hyper.learning_rate * grad.w1;
            net.b1 -= hyper.learning_rate * grad.b1;
            net.w2 -= hyper.learning_rate * grad.w2;
            net.b2 -= hyper.learning_rate * grad.b2;
        }
        let (epoch_loss, _) = loss_and_grad(&net, features, labels, hyper.l2_decay)?;
        trace.push(epoch_loss);
    }
    net.validate()?;
    Ok((net, trace))
}
