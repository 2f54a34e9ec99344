//! Finite-difference check of the analytic loss gradient.

use super::loss::{total_loss, WindowLabels};
use super::model::{forward_traced, window_matrix};
use super::params::{HyperParams, ModelParams};
use super::train::batch_gradient;
use super::RecognizerError;
use crate::skeleton::FeatureWindow;

#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: &'static str,
    pub max_rel_error: f64,
    pub checked: usize,
    /// Entries skipped because ReLUs changed state on both sides.
    pub skipped: usize,
}

struct Probe {
    loss: f64,
    masks: Vec<Vec<bool>>,
}

fn probe(p: &ModelParams<f64>, windows: &[FeatureWindow], labels: &[WindowLabels], hp: &HyperParams) -> Result<Probe, RecognizerError> {
    let mut outputs = Vec::with_capacity(windows.len());
    let mut masks = Vec::with_capacity(windows.len());
    for w in windows {
        let (o, t) = forward_traced(p, window_matrix(w).view())?;
        masks.push(t.relu_mask());
        outputs.push(o);
    }
    let (loss, _) = total_loss(&outputs, labels, hp)?;
    Ok(Probe {
        loss: loss.total,
        masks,
    })
}

/// Compares the analytic gradient of the total loss with central
/// differences for every entry of every tensor. Relative error is
/// `|a - n| / max(|a|, |n|, 1e-7)`.
pub fn check_gradients(
    params: &ModelParams<f64>,
    windows: &[FeatureWindow],
    labels: &[WindowLabels],
    hp: &HyperParams,
    eps: f64,
) -> Result<Vec<TensorCheck>, RecognizerError> {
    let (_, analytic) = batch_gradient(params, windows, labels, hp, 1)?;
    let base = probe(params, windows, labels, hp)?;
    let mut work = params.clone();
    let mut out = Vec::new();
    for (t, (name, _, grad)) in analytic.tensors().into_iter().enumerate() {
        let mut check = TensorCheck {
            name,
            max_rel_error: 0.0,
            checked: 0,
            skipped: 0,
        };
        for i in 0..grad.len() {
            let orig = work.tensors_mut()[t].1[i];
            work.tensors_mut()[t].1[i] = orig + eps;
            let plus = probe(&work, windows, labels, hp)?;
            work.tensors_mut()[t].1[i] = orig - eps;
            let minus = probe(&work, windows, labels, hp)?;
            let numeric = match (plus.masks == base.masks, minus.masks == base.masks) {
                (true, true) => (plus.loss - minus.loss) / (2.0 * eps),
                (false, false) => {
                    work.tensors_mut()[t].1[i] = orig;
                    check.skipped += 1;
                    continue;
                }
                // a kink on one side: extrapolated one-sided difference
                // 2 D(eps/2) - D(eps) on the smooth side
                (plus_ok, _) => {
                    let sign = if plus_ok { 1.0 } else { -1.0 };
                    let far = if plus_ok { plus.loss } else { minus.loss };
                    work.tensors_mut()[t].1[i] = orig + sign * eps / 2.0;
                    let near = probe(&work, windows, labels, hp)?;
                    if near.masks != base.masks {
                        work.tensors_mut()[t].1[i] = orig;
                        check.skipped += 1;
                        continue;
                    }
                    let d_full = sign * (far - base.loss) / eps;
                    let d_half = sign * (near.loss - base.loss) / (eps / 2.0);
                    2.0 * d_half - d_full
                }
            };
            work.tensors_mut()[t].1[i] = orig;
            let a = grad[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-7);
            check.max_rel_error = check.max_rel_error.max(rel);
            check.checked += 1;
        }
        out.push(check);
    }
    Ok(out)
}
