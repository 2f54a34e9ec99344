//! Leave-one-subject-out training with Adam and a plateau scheduler.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{cross_entropy, state_cross_entropy, total_loss, LossBreakdown, WindowLabels};
use super::model::{backward, forward, forward_traced, window_matrix, ModelOutput, Trace};
use super::params::{HyperParams, ModelParams, Scalar};
use super::RecognizerError;
use crate::gesture::{GestureClass, NUM_CLASSES};
use crate::par::ordered_map;
use crate::skeleton::{frame_features, FeatureWindow, FEATURE_DIM, NUM_JOINTS, WINDOW_LEN};
use crate::synth::{derive_seed, LabeledClip};

const FRAME_STRIDE: usize = NUM_JOINTS * FEATURE_DIM;
// samples per gradient chunk; fixed so sums do not depend on thread count
const GRAD_CHUNK: usize = 4;
/// Valid crop starts per training window drawn from a clip each epoch.
pub const CROP_SPAN: usize = 128;

/// A clip with its per-frame features computed once.
#[derive(Debug, Clone)]
pub struct PreparedClip {
    pub class: usize,
    pub subject: u32,
    features: Vec<f64>,
    states: Vec<u8>,
    onset: usize,
}

impl PreparedClip {
    pub fn new(index: usize, clip: &LabeledClip) -> Result<Self, RecognizerError> {
        let len = clip.frames.len();
        if len < WINDOW_LEN || clip.substates.len() != len {
            return Err(RecognizerError::ClipTooShort(index));
        }
        let mut features = Vec::with_capacity(len * FRAME_STRIDE);
        for f in &clip.frames {
            features.extend_from_slice(&frame_features(f));
        }
        Ok(Self {
            class: clip.gesture.index(),
            subject: clip.subject_id,
            features,
            states: clip.substates.iter().map(|s| s.value()).collect(),
            onset: clip.onset_frame().min(len - WINDOW_LEN),
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Valid crop starts for training.
    pub fn crop_range(&self) -> std::ops::RangeInclusive<usize> {
        self.onset..=self.len() - WINDOW_LEN
    }

    /// Crops drawn from this clip per epoch: one per [`CROP_SPAN`] valid
    /// starts, so long clips contribute proportionally more windows.
    pub fn crops_per_epoch(&self) -> usize {
        let starts = self.crop_range().count();
        starts.div_ceil(CROP_SPAN).max(1)
    }

    /// Start of the evaluation crop: the middle of the gesture portion.
    pub fn center_start(&self) -> usize {
        (self.onset + self.len() - WINDOW_LEN) / 2
    }

    pub fn window(&self, start: usize) -> FeatureWindow {
        let data = self.features[start * FRAME_STRIDE..(start + WINDOW_LEN) * FRAME_STRIDE].to_vec();
        FeatureWindow::from_vec(data).expect("window slice has the fixed shape")
    }

    /// Per-frame feature rows.
    pub fn frames(&self) -> std::slice::ChunksExact<'_, f64> {
        self.features.chunks_exact(FRAME_STRIDE)
    }

    pub fn labels(&self, start: usize) -> WindowLabels {
        WindowLabels {
            class: self.class,
            states: self.states[start..start + WINDOW_LEN].to_vec(),
        }
    }
}

/// Prepares every clip of a slice.
pub fn prepare(clips: &[&LabeledClip]) -> Result<Vec<PreparedClip>, RecognizerError> {
    clips.iter().enumerate().map(|(i, c)| PreparedClip::new(i, c)).collect()
}

/// One leave-one-subject-out split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub test_subject: u32,
    /// Subject used for validation; `None` when too few subjects exist, in
    /// which case every fifth clip of each class, starting with its second,
    /// is held out.
    pub val_subject: Option<u32>,
}

impl Fold {
    /// Validation uses the subject following the test subject in sorted
    /// order (wrapping around).
    pub fn new(subjects: &[u32], test_subject: u32) -> Result<Self, RecognizerError> {
        let mut ids = subjects.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let pos = ids
            .iter()
            .position(|&s| s == test_subject)
            .ok_or(RecognizerError::EmptyFold("test"))?;
        if ids.len() < 2 {
            return Err(RecognizerError::EmptyFold("training"));
        }
        let val_subject = (ids.len() >= 3).then(|| ids[(pos + 1) % ids.len()]);
        Ok(Self {
            test_subject,
            val_subject,
        })
    }

    /// Splits clips into (train, validation, test).
    pub fn split<'a>(&self, clips: &'a [LabeledClip]) -> SplitClips<'a> {
        let mut split = SplitClips::default();
        let mut seen = [0usize; NUM_CLASSES];
        for clip in clips {
            if clip.subject_id == self.test_subject {
                split.test.push(clip);
            } else if Some(clip.subject_id) == self.val_subject {
                split.val.push(clip);
            } else if self.val_subject.is_none() {
                let k = &mut seen[clip.gesture.index()];
                if *k % 5 == 1 {
                    split.val.push(clip);
                } else {
                    split.train.push(clip);
                }
                *k += 1;
            } else {
                split.train.push(clip);
            }
        }
        split
    }
}

#[derive(Debug, Default, Clone)]
pub struct SplitClips<'a> {
    pub train: Vec<&'a LabeledClip>,
    pub val: Vec<&'a LabeledClip>,
    pub test: Vec<&'a LabeledClip>,
}

impl SplitClips<'_> {
    pub fn check(&self) -> Result<(), RecognizerError> {
        if self.train.is_empty() {
            return Err(RecognizerError::EmptyFold("training"));
        }
        if self.val.is_empty() {
            return Err(RecognizerError::EmptyFold("validation"));
        }
        if self.test.is_empty() {
            return Err(RecognizerError::EmptyFold("test"));
        }
        for class in GestureClass::ALL {
            if !self.train.iter().any(|c| c.gesture == class) {
                return Err(RecognizerError::MissingClass(class));
            }
        }
        Ok(())
    }
}

/// Adam moment estimates.
#[derive(Debug, Clone)]
pub struct Adam<F> {
    m: ModelParams<F>,
    v: ModelParams<F>,
    step: i32,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl<F: Scalar> Adam<F> {
    pub fn new(hidden: usize, hp: &HyperParams) -> Self {
        Self {
            m: ModelParams::zeros(hidden),
            v: ModelParams::zeros(hidden),
            step: 0,
            beta1: hp.adam_beta1,
            beta2: hp.adam_beta2,
            eps: hp.adam_eps,
        }
    }

    pub fn update(&mut self, params: &mut ModelParams<F>, grads: &ModelParams<F>, lr: f64) {
        self.step += 1;
        let (b1, b2) = (F::c(self.beta1), F::c(self.beta2));
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let step_size = F::c(lr / c1);
        let c2_sqrt = F::c(c2.sqrt());
        let eps = F::c(self.eps);
        let one = F::one();
        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
            .zip(grads.tensors());
        for ((((_, p), (_, m)), (_, v)), (_, _, g)) in tensors {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (one - b1) * g[i];
                v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
                p[i] = p[i] - step_size * m[i] / (v[i].sqrt() / c2_sqrt + eps);
            }
        }
    }
}

/// Reduce-on-plateau learning-rate schedule (minimizing, relative
/// threshold).
#[derive(Debug, Clone)]
pub struct Plateau {
    pub lr: f64,
    best: f64,
    bad_epochs: usize,
    patience: usize,
    factor: f64,
    threshold: f64,
    min_lr: f64,
}

impl Plateau {
    pub fn new(hp: &HyperParams) -> Self {
        Self {
            lr: hp.learning_rate,
            best: f64::INFINITY,
            bad_epochs: 0,
            patience: hp.plateau_patience,
            factor: hp.plateau_factor,
            threshold: hp.plateau_threshold,
            min_lr: hp.min_learning_rate,
        }
    }

    /// Records one epoch's metric; returns true if the rate was reduced.
    pub fn observe(&mut self, metric: f64) -> bool {
        if metric < self.best * (1.0 - self.threshold) {
            self.best = metric;
            self.bad_epochs = 0;
            return false;
        }
        self.bad_epochs += 1;
        if self.bad_epochs > self.patience {
            self.bad_epochs = 0;
            let reduced = (self.lr * self.factor).max(self.min_lr);
            let changed = reduced < self.lr;
            self.lr = reduced;
            return changed;
        }
        false
    }
}

/// Loss, outputs and parameter gradient of one batch, averaged over it.
pub fn batch_gradient<F: Scalar>(
    params: &ModelParams<F>,
    windows: &[FeatureWindow],
    labels: &[WindowLabels],
    hp: &HyperParams,
    threads: usize,
) -> Result<(LossBreakdown, ModelParams<F>), RecognizerError> {
    let traced: Vec<Result<(ModelOutput<F>, Trace<F>), RecognizerError>> =
        ordered_map(windows, threads, |_, w| forward_traced(params, window_matrix(w).view()));
    let mut outputs = Vec::with_capacity(windows.len());
    let mut traces = Vec::with_capacity(windows.len());
    for r in traced {
        let (o, t) = r?;
        outputs.push(o);
        traces.push(t);
    }
    let (loss, out_grads) = total_loss(&outputs, labels, hp)?;

    let idx: Vec<usize> = (0..windows.len()).collect();
    let chunks: Vec<&[usize]> = idx.chunks(GRAD_CHUNK).collect();
    let partials = ordered_map(&chunks, threads, |_, chunk| {
        let mut g = ModelParams::zeros(params.hidden());
        for &i in chunk.iter() {
            backward(params, &traces[i], &outputs[i], &out_grads[i], &mut g);
        }
        g
    });
    let mut grads = ModelParams::zeros(params.hidden());
    for p in &partials {
        grads.add_scaled(p, F::one());
    }
    Ok((loss, grads))
}

/// Supervised validation metric: `alpha * CE(class) + beta * CE(state)` on
/// center crops, plus class accuracy.
pub fn validation_metric<F: Scalar>(
    params: &ModelParams<F>,
    clips: &[PreparedClip],
    hp: &HyperParams,
    threads: usize,
) -> Result<(f64, f64), RecognizerError> {
    let per_clip = ordered_map(clips, threads, |_, c| {
        let start = c.center_start();
        let out = forward(params, &c.window(start))?;
        let lab = c.labels(start);
        let (lc, _) = cross_entropy(out.class_logits.view(), lab.class);
        let (ls, _) = state_cross_entropy(&out.state_logits, &lab.states);
        let correct = out.predicted_class() == lab.class;
        Ok::<_, RecognizerError>((hp.alpha * lc.f64() + hp.beta * ls.f64(), correct))
    });
    let mut loss = 0.0;
    let mut correct = 0usize;
    for r in per_clip {
        let (l, c) = r?;
        loss += l;
        correct += c as usize;
    }
    let n = clips.len().max(1) as f64;
    Ok((loss / n, correct as f64 / n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_loss: f64,
    pub train_class: f64,
    pub train_state: f64,
    pub train_contrastive: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the epoch with the lowest validation loss.
    pub params: ModelParams<f32>,
    pub best_epoch: usize,
    pub log: Vec<EpochLog>,
}

/// Trains one fold from scratch. Deterministic in `hp.master_seed` and the
/// fold, independent of `threads`.
pub fn train_fold(
    train: &[PreparedClip],
    val: &[PreparedClip],
    fold: &Fold,
    hp: &HyperParams,
    threads: usize,
) -> Result<TrainOutcome, RecognizerError> {
    hp.validate().map_err(RecognizerError::InvalidHyperParams)?;
    if train.is_empty() {
        return Err(RecognizerError::EmptyFold("training"));
    }
    if val.is_empty() {
        return Err(RecognizerError::EmptyFold("validation"));
    }
    let fold_key = fold.test_subject as u64;
    let mut params = ModelParams::<f32>::init(hp.hidden, derive_seed(&[hp.master_seed, 1, fold_key]));
    params.fit_input_standardization(train.iter().flat_map(|c| c.frames()));
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[hp.master_seed, 2, fold_key]));
    let mut adam = Adam::new(hp.hidden, hp);
    let mut sched = Plateau::new(hp);
    let mut best = (f64::INFINITY, params.clone(), 0);
    let mut log = Vec::with_capacity(hp.max_epochs);
    let mut order: Vec<usize> = (0..train.len())
        .flat_map(|i| std::iter::repeat_n(i, train[i].crops_per_epoch()))
        .collect();

    for epoch in 1..=hp.max_epochs {
        order.shuffle(&mut rng);
        let lr = sched.lr;
        let mut sums = [0.0f64; 4];
        let mut batches = 0usize;
        for batch in order.chunks(hp.batch_size) {
            let mut windows = Vec::with_capacity(batch.len());
            let mut labels = Vec::with_capacity(batch.len());
            for &i in batch {
                let clip = &train[i];
                let start = rng.random_range(clip.crop_range());
                windows.push(clip.window(start));
                labels.push(clip.labels(start));
            }
            let (loss, grads) = batch_gradient(&params, &windows, &labels, hp, threads)?;
            adam.update(&mut params, &grads, lr);
            if !params.is_finite() {
                return Err(RecognizerError::NonFiniteActivation);
            }
            sums[0] += loss.total;
            sums[1] += loss.class;
            sums[2] += loss.state;
            sums[3] += loss.contrastive;
            batches += 1;
        }
        let (val_loss, val_accuracy) = validation_metric(&params, val, hp, threads)?;
        let b = batches as f64;
        let entry = EpochLog {
            epoch,
            learning_rate: lr,
            train_loss: sums[0] / b,
            train_class: sums[1] / b,
            train_state: sums[2] / b,
            train_contrastive: sums[3] / b,
            val_loss,
            val_accuracy,
        };
        log::info!(
            "fold {} epoch {epoch}: train {:.4} val {:.4} acc {:.3} lr {:.1e}",
            fold.test_subject,
            entry.train_loss,
            val_loss,
            val_accuracy,
            lr
        );
        log.push(entry);
        if val_loss < best.0 {
            best = (val_loss, params.clone(), epoch);
        }
        sched.observe(val_loss);
    }
    Ok(TrainOutcome {
        params: best.1,
        best_epoch: best.2,
        log,
    })
}

/// Stacks the class logits of center crops, one row per clip.
pub fn center_logits<F: Scalar>(
    params: &ModelParams<F>,
    clips: &[PreparedClip],
    threads: usize,
) -> Result<(Array2<f64>, Vec<usize>), RecognizerError> {
    let rows = ordered_map(clips, threads, |_, c| forward(params, &c.window(c.center_start())));
    let mut logits = Array2::zeros((clips.len(), NUM_CLASSES));
    for (i, r) in rows.into_iter().enumerate() {
        let out = r?;
        for k in 0..NUM_CLASSES {
            logits[[i, k]] = out.class_logits[k].f64();
        }
    }
    Ok((logits, clips.iter().map(|c| c.class).collect()))
}
