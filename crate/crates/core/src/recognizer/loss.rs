//! Training objective: weighted class, sub-state and contrastive terms.

use ndarray::{Array1, Array2, ArrayView1};

use super::model::{softmax, ModelOutput, OutputGrads};
use super::params::{HyperParams, Scalar};
use super::RecognizerError;

/// Cross-entropy of one logit vector against a label, with its gradient.
pub fn cross_entropy<F: Scalar>(logits: ArrayView1<F>, label: usize) -> (F, Array1<F>) {
    let p = softmax(logits);
    let loss = -(p[label].max(F::min_positive_value())).ln();
    let mut g = p;
    g[label] = g[label] - F::one();
    (loss, g)
}

/// Mean per-frame cross-entropy of `(T, 5)` state logits, with gradient.
pub fn state_cross_entropy<F: Scalar>(logits: &Array2<F>, labels: &[u8]) -> (F, Array2<F>) {
    let t = F::c(labels.len() as f64);
    let mut grad = Array2::zeros(logits.dim());
    let mut total = F::zero();
    for (i, &y) in labels.iter().enumerate() {
        let (l, g) = cross_entropy(logits.row(i), y as usize);
        total = total + l;
        grad.row_mut(i).assign(&(g / t));
    }
    (total / t, grad)
}

/// Result of the in-batch supervised contrastive loss.
#[derive(Debug, Clone)]
pub struct Contrastive<F> {
    pub loss: F,
    /// Gradient with respect to each embedding.
    pub grads: Vec<Array1<F>>,
    /// Anchors that had at least one positive.
    pub anchors: usize,
}

/// Supervised NT-Xent over a batch of L2-normalized embeddings. For each
/// anchor with at least one same-class partner:
/// `-log(sum_pos exp(s/k) / sum_{j != i} exp(s/k))`, averaged over anchors.
pub fn contrastive_loss<F: Scalar>(
    embeddings: &[Array1<F>],
    labels: &[usize],
    temperature: f64,
) -> Result<Contrastive<F>, RecognizerError> {
    let n = embeddings.len();
    if n < 2 {
        return Err(RecognizerError::BatchTooSmallForContrastive);
    }
    let kappa = F::c(temperature);
    let dim = embeddings[0].len();
    let mut grads = vec![Array1::<F>::zeros(dim); n];
    let mut sim = Array2::<F>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            sim[[i, j]] = embeddings[i].dot(&embeddings[j]);
        }
    }

    let mut total = F::zero();
    let mut anchors = 0;
    let mut coeff = Array2::<F>::zeros((n, n));
    for i in 0..n {
        if !(0..n).any(|j| j != i && labels[j] == labels[i]) {
            continue;
        }
        anchors += 1;
        let m = (0..n)
            .filter(|&j| j != i)
            .map(|j| sim[[i, j]] / kappa)
            .fold(F::neg_infinity(), F::max);
        let w: Vec<F> = (0..n)
            .map(|j| if j == i { F::zero() } else { (sim[[i, j]] / kappa - m).exp() })
            .collect();
        let all: F = w.iter().fold(F::zero(), |a, &b| a + b);
        let pos: F = (0..n)
            .filter(|&j| j != i && labels[j] == labels[i])
            .fold(F::zero(), |a, j| a + w[j]);
        total = total - (pos / all).ln();
        for j in (0..n).filter(|&j| j != i) {
            let indicator = if labels[j] == labels[i] { w[j] / pos } else { F::zero() };
            coeff[[i, j]] = (w[j] / all - indicator) / kappa;
        }
    }
    if anchors == 0 {
        return Ok(Contrastive {
            loss: F::zero(),
            grads,
            anchors,
        });
    }
    let scale = F::one() / F::c(anchors as f64);
    for i in 0..n {
        for j in 0..n {
            let c = coeff[[i, j]] * scale;
            if c == F::zero() {
                continue;
            }
            // d s_ij / d e_i = e_j and d s_ij / d e_j = e_i
            grads[i].scaled_add(c, &embeddings[j]);
            grads[j].scaled_add(c, &embeddings[i]);
        }
    }
    Ok(Contrastive {
        loss: total * scale,
        grads,
        anchors,
    })
}

/// Labels of one training window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowLabels {
    pub class: usize,
    pub states: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub total: f64,
    pub class: f64,
    pub state: f64,
    pub contrastive: f64,
    /// False when the batch had no positive pair and the contrastive term
    /// was dropped.
    pub contrastive_active: bool,
}

/// `alpha * CE(class) + beta * mean-frame CE(state) + gamma * contrastive`,
/// averaged over the batch, with the gradient for each sample's outputs.
pub fn total_loss<F: Scalar>(
    outputs: &[ModelOutput<F>],
    labels: &[WindowLabels],
    hp: &HyperParams,
) -> Result<(LossBreakdown, Vec<OutputGrads<F>>), RecognizerError> {
    if outputs.is_empty() || outputs.len() != labels.len() {
        return Err(RecognizerError::ShapeMismatch(format!(
            "{} outputs for {} labels",
            outputs.len(),
            labels.len()
        )));
    }
    let b = F::c(outputs.len() as f64);
    let (alpha, beta, gamma) = (F::c(hp.alpha), F::c(hp.beta), F::c(hp.gamma));
    let hidden = outputs[0].embedding.len();

    let mut class_sum = F::zero();
    let mut state_sum = F::zero();
    let mut grads = Vec::with_capacity(outputs.len());
    for (out, lab) in outputs.iter().zip(labels) {
        let (lc, gc) = cross_entropy(out.class_logits.view(), lab.class);
        let (ls, gs) = state_cross_entropy(&out.state_logits, &lab.states);
        class_sum = class_sum + lc;
        state_sum = state_sum + ls;
        let mut g = OutputGrads::zeros(hidden);
        g.class_logits = gc * (alpha / b);
        g.state_logits = gs * (beta / b);
        grads.push(g);
    }

    let embeddings: Vec<Array1<F>> = outputs.iter().map(|o| o.embedding.clone()).collect();
    let classes: Vec<usize> = labels.iter().map(|l| l.class).collect();
    let contrastive = match contrastive_loss(&embeddings, &classes, hp.contrastive_temperature) {
        Ok(c) if c.anchors > 0 => Some(c),
        _ => {
            log::warn!("no positive pair in batch of {}; contrastive term dropped", outputs.len());
            None
        }
    };
    let mut lk = F::zero();
    if let Some(c) = &contrastive {
        lk = c.loss;
        for (g, ge) in grads.iter_mut().zip(&c.grads) {
            g.embedding = ge * gamma;
        }
    }

    let class = (class_sum / b).f64();
    let state = (state_sum / b).f64();
    let contrastive_val = lk.f64();
    let total = hp.alpha * class + hp.beta * state + hp.gamma * contrastive_val;
    Ok((
        LossBreakdown {
            total,
            class,
            state,
            contrastive: contrastive_val,
            contrastive_active: contrastive.is_some(),
        },
        grads,
    ))
}
