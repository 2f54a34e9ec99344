//! Confusion matrices and per-fold evaluation.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::calibrate::{expected_calibration_error, fit_temperature, nll};
use super::model::{argmax, forward};
use super::params::{HyperParams, ModelParams, Scalar};
use super::train::{center_logits, prepare, train_fold, EpochLog, Fold, PreparedClip};
use super::RecognizerError;
use crate::gesture::{NUM_CLASSES, NUM_STATES};
use crate::par::ordered_map;
use crate::skeleton::{FeatureWindow, WINDOW_LEN};
use crate::synth::LabeledClip;

/// Row = truth, column = prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(n: usize) -> Self {
        Self {
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn size(&self) -> usize {
        self.counts.len()
    }

    pub fn add(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Recall of class `k`; `None` when it never occurs.
    pub fn class_accuracy(&self, k: usize) -> Option<f64> {
        let row: u64 = self.counts[k].iter().sum();
        (row > 0).then(|| self.counts[k][k] as f64 / row as f64)
    }

    pub fn per_class_accuracy(&self) -> Vec<Option<f64>> {
        (0..self.size()).map(|k| self.class_accuracy(k)).collect()
    }

    /// Mean recall over classes that occur.
    pub fn macro_accuracy(&self) -> f64 {
        let accs: Vec<f64> = self.per_class_accuracy().into_iter().flatten().collect();
        accs.iter().sum::<f64>() / accs.len().max(1) as f64
    }

    /// Fraction of rows `< limit` whose prediction is also `< limit` but not
    /// adjacent to the truth (|truth - predicted| > 1), relative to all
    /// counts in those rows.
    pub fn off_tridiagonal_fraction(&self, limit: usize) -> f64 {
        let mut off = 0u64;
        let mut total = 0u64;
        for t in 0..limit {
            for p in 0..self.size() {
                let c = self.counts[t][p];
                total += c;
                if p < limit && t.abs_diff(p) > 1 {
                    off += c;
                }
            }
        }
        if total == 0 {
            0.0
        } else {
            off as f64 / total as f64
        }
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.size()).all(|i| (0..self.size()).all(|j| i == j || self.counts[i][j] == 0))
    }
}

/// Anything that maps a feature window to class and per-frame state logits.
pub trait Predictor: Sync {
    fn predict(&self, window: &FeatureWindow) -> Result<(Array1<f64>, Array2<f64>), RecognizerError>;
}

impl<F: Scalar> Predictor for ModelParams<F> {
    fn predict(&self, window: &FeatureWindow) -> Result<(Array1<f64>, Array2<f64>), RecognizerError> {
        let out = forward(self, window)?;
        Ok((out.class_logits.mapv(|v| v.f64()), out.state_logits.mapv(|v| v.f64())))
    }
}

/// Window starts tiling a clip: non-overlapping, with the last window
/// aligned to the end. Each pair is (start, first frame not yet counted).
pub fn tiling(len: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    if len < WINDOW_LEN {
        return out;
    }
    let mut covered = 0;
    let mut start = 0;
    while covered < len {
        let s = start.min(len - WINDOW_LEN);
        out.push((s, covered));
        covered = s + WINDOW_LEN;
        start += WINDOW_LEN;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub clips: usize,
    pub class_confusion: ConfusionMatrix,
    pub state_confusion: ConfusionMatrix,
    pub temperature: f64,
    pub ece_before: f64,
    pub ece_after: f64,
}

impl EvalReport {
    pub fn per_class_accuracy(&self) -> Vec<Option<f64>> {
        self.class_confusion.per_class_accuracy()
    }

    pub fn per_state_accuracy(&self) -> Vec<Option<f64>> {
        self.state_confusion.per_class_accuracy()
    }
}

/// Evaluates prepared clips: one center window per clip for the class
/// confusion and tiled windows for frame-level states. ECE is reported at
/// temperature 1 and at `temperature`.
pub fn evaluate<P: Predictor>(
    model: &P,
    clips: &[PreparedClip],
    temperature: f64,
    threads: usize,
) -> Result<EvalReport, RecognizerError> {
    let per_clip = ordered_map(clips, threads, |_, clip| {
        let mut cls = ConfusionMatrix::new(NUM_CLASSES);
        let mut st = ConfusionMatrix::new(NUM_STATES);
        let start = clip.center_start();
        let (logits, _) = model.predict(&clip.window(start))?;
        cls.add(clip.class, argmax(logits.view()));
        for (s, first_new) in tiling(clip.len()) {
            let (_, states) = model.predict(&clip.window(s))?;
            let labels = clip.labels(s).states;
            for t in first_new - s..WINDOW_LEN {
                st.add(labels[t] as usize, argmax(states.row(t)));
            }
        }
        Ok::<_, RecognizerError>((cls, st, logits))
    });
    let mut class_confusion = ConfusionMatrix::new(NUM_CLASSES);
    let mut state_confusion = ConfusionMatrix::new(NUM_STATES);
    let mut logits = Array2::zeros((clips.len(), NUM_CLASSES));
    for (i, r) in per_clip.into_iter().enumerate() {
        let (c, s, l) = r?;
        class_confusion.merge(&c);
        state_confusion.merge(&s);
        logits.row_mut(i).assign(&l);
    }
    let labels: Vec<usize> = clips.iter().map(|c| c.class).collect();
    Ok(EvalReport {
        clips: clips.len(),
        class_confusion,
        state_confusion,
        temperature,
        ece_before: expected_calibration_error(&logits, &labels, 1.0),
        ece_after: expected_calibration_error(&logits, &labels, temperature),
    })
}

/// Temperature fit on the validation clips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub temperature: f64,
    pub nll_before: f64,
    pub nll_after: f64,
    pub ece_before: f64,
    pub ece_after: f64,
    /// Fraction of validation windows whose argmax is unchanged.
    pub argmax_agreement: f64,
}

/// Calibration statistics of `params` on validation clips at temperature
/// `tau`, without changing anything.
pub fn calibration_stats<F: Scalar>(
    params: &ModelParams<F>,
    val: &[PreparedClip],
    tau: f64,
    threads: usize,
) -> Result<Calibration, RecognizerError> {
    if val.is_empty() {
        return Err(RecognizerError::EmptyValidation);
    }
    let (logits, labels) = center_logits(params, val, threads)?;
    Ok(stats_from_logits(&logits, &labels, tau))
}

fn stats_from_logits(logits: &Array2<f64>, labels: &[usize], tau: f64) -> Calibration {
    let agree = logits
        .rows()
        .into_iter()
        .filter(|r| argmax(r.view()) == argmax(r.mapv(|v| v / tau).view()))
        .count();
    Calibration {
        temperature: tau,
        nll_before: nll(logits, labels, 1.0),
        nll_after: nll(logits, labels, tau),
        ece_before: expected_calibration_error(logits, labels, 1.0),
        ece_after: expected_calibration_error(logits, labels, tau),
        argmax_agreement: agree as f64 / labels.len() as f64,
    }
}

/// Fits the temperature on validation clips and stores it in `params`.
pub fn calibrate<F: Scalar>(
    params: &mut ModelParams<F>,
    val: &[PreparedClip],
    threads: usize,
) -> Result<Calibration, RecognizerError> {
    if val.is_empty() {
        return Err(RecognizerError::EmptyValidation);
    }
    let (logits, labels) = center_logits(params, val, threads)?;
    let tau = fit_temperature(&logits, &labels)?;
    params.temperature = F::c(tau);
    Ok(stats_from_logits(&logits, &labels, tau))
}

/// Everything produced by one leave-one-subject-out fold.
#[derive(Debug, Clone)]
pub struct FoldResult {
    pub fold: Fold,
    pub params: ModelParams<f32>,
    pub best_epoch: usize,
    pub log: Vec<EpochLog>,
    pub calibration: Calibration,
    pub report: EvalReport,
}

/// Train, calibrate and evaluate one fold of `clips`.
pub fn evaluate_fold(
    clips: &[LabeledClip],
    test_subject: u32,
    hp: &HyperParams,
    threads: usize,
) -> Result<FoldResult, RecognizerError> {
    let mut subjects: Vec<u32> = clips.iter().map(|c| c.subject_id).collect();
    subjects.sort_unstable();
    subjects.dedup();
    let fold = Fold::new(&subjects, test_subject)?;
    let split = fold.split(clips);
    split.check()?;
    let train = prepare(&split.train)?;
    let val = prepare(&split.val)?;
    let test = prepare(&split.test)?;
    let outcome = train_fold(&train, &val, &fold, hp, threads)?;
    let mut params = outcome.params;
    let calibration = calibrate(&mut params, &val, threads)?;
    let report = evaluate(&params, &test, calibration.temperature, threads)?;
    Ok(FoldResult {
        fold,
        params,
        best_epoch: outcome.best_epoch,
        log: outcome.log,
        calibration,
        report,
    })
}
