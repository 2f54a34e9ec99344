//! Post-hoc temperature scaling and calibration error.

use ndarray::{Array2, ArrayView1};

use super::RecognizerError;

pub const TEMPERATURE_RANGE: (f64, f64) = (0.05, 10.0);
pub const ECE_BINS: usize = 15;

fn log_softmax_at(row: ArrayView1<f64>, tau: f64, k: usize) -> f64 {
    let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b / tau));
    let lse = m + row.iter().map(|&z| (z / tau - m).exp()).sum::<f64>().ln();
    row[k] / tau - lse
}

/// Mean negative log-likelihood of `softmax(logits / tau)`.
pub fn nll(logits: &Array2<f64>, labels: &[usize], tau: f64) -> f64 {
    let n = labels.len().max(1) as f64;
    logits
        .rows()
        .into_iter()
        .zip(labels)
        .map(|(row, &y)| -log_softmax_at(row, tau, y))
        .sum::<f64>()
        / n
}

/// Golden-section search for the temperature minimizing validation NLL.
pub fn fit_temperature(logits: &Array2<f64>, labels: &[usize]) -> Result<f64, RecognizerError> {
    if labels.is_empty() || logits.nrows() != labels.len() {
        return Err(RecognizerError::EmptyValidation);
    }
    let f = |t: f64| nll(logits, labels, t);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = TEMPERATURE_RANGE;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-6 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mut best = (a + b) / 2.0;
    // the interior search cannot land exactly on an endpoint
    for edge in [TEMPERATURE_RANGE.0, TEMPERATURE_RANGE.1] {
        if f(edge) < f(best) {
            best = edge;
        }
    }
    Ok(best)
}

/// Confidence and correctness of each row under temperature `tau`.
pub fn confidences(logits: &Array2<f64>, labels: &[usize], tau: f64) -> Vec<(f64, bool)> {
    logits
        .rows()
        .into_iter()
        .zip(labels)
        .map(|(row, &y)| {
            let mut best = 0;
            for k in 1..row.len() {
                if row[k] > row[best] {
                    best = k;
                }
            }
            (log_softmax_at(row, tau, best).exp(), best == y)
        })
        .collect()
}

/// Expected calibration error with [`ECE_BINS`] equal-width confidence
/// bins; bin `b` holds confidences in `(b/B, (b+1)/B]`.
pub fn expected_calibration_error(logits: &Array2<f64>, labels: &[usize], tau: f64) -> f64 {
    let pairs = confidences(logits, labels, tau);
    if pairs.is_empty() {
        return 0.0;
    }
    let mut conf = [0.0; ECE_BINS];
    let mut acc = [0.0; ECE_BINS];
    let mut count = [0usize; ECE_BINS];
    for (c, ok) in pairs.iter() {
        let b = ((c * ECE_BINS as f64).ceil() as usize).clamp(1, ECE_BINS) - 1;
        conf[b] += c;
        acc[b] += *ok as u8 as f64;
        count[b] += 1;
    }
    let n = pairs.len() as f64;
    (0..ECE_BINS)
        .filter(|&b| count[b] > 0)
        .map(|b| (acc[b] - conf[b]).abs() / n)
        .sum()
}
