use ndarray::{Array1, Array2, LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, NumAssign};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::fmt::Debug;

use crate::gesture::{NUM_CLASSES, NUM_STATES};
use crate::skeleton::{FEATURE_DIM, NUM_JOINTS, WINDOW_LEN};

/// Floating-point type the network can run in.
pub trait Scalar:
    LinalgScalar + ScalarOperand + Float + NumAssign + FromPrimitive + Debug + Default + Send + Sync + 'static
{
    fn c(v: f64) -> Self {
        Self::from_f64(v).unwrap()
    }

    fn f64(self) -> f64 {
        self.to_f64().unwrap()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    pub hidden: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub plateau_threshold: f64,
    pub min_learning_rate: f64,
    pub max_epochs: usize,
    pub contrastive_temperature: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub master_seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            hidden: 256,
            alpha: 0.6,
            beta: 0.2,
            gamma: 0.2,
            learning_rate: 1e-3,
            batch_size: 32,
            plateau_patience: 5,
            plateau_factor: 0.5,
            plateau_threshold: 1e-4,
            min_learning_rate: 1e-5,
            max_epochs: 60,
            contrastive_temperature: 0.1,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            master_seed: 0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<(), String> {
        if (self.alpha + self.beta + self.gamma - 1.0).abs() > 1e-9 {
            return Err(format!(
                "loss weights must sum to 1 (got {})",
                self.alpha + self.beta + self.gamma
            ));
        }
        let positive = [
            self.alpha,
            self.beta,
            self.gamma,
            self.learning_rate,
            self.plateau_factor,
            self.contrastive_temperature,
            self.adam_eps,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return Err("weights, rates and temperatures must be positive".into());
        }
        if self.hidden == 0 || self.batch_size == 0 || self.max_epochs == 0 {
            return Err("hidden, batch_size and max_epochs must be >= 1".into());
        }
        Ok(())
    }
}

/// All learnable tensors, the fixed input standardization and the post-hoc
/// softmax temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<F> {
    /// Per joint and feature: inputs enter as `(x - input_shift) * input_scale`.
    pub input_shift: Array2<F>,
    pub input_scale: Array2<F>,
    pub w_in: Array2<F>,
    pub b_in: Array1<F>,
    pub spatial: Array2<F>,
    pub temporal: Array2<F>,
    pub wq: Array2<F>,
    pub wk: Array2<F>,
    pub wv: Array2<F>,
    pub w_state: Array2<F>,
    pub b_state: Array1<F>,
    pub w_class: Array2<F>,
    pub b_class: Array1<F>,
    pub w_proj: Array2<F>,
    pub b_proj: Array1<F>,
    pub temperature: F,
}

/// Names of the fixed (not trained) tensors, stored before the learnable ones.
pub const BUFFER_NAMES: [&str; 2] = ["input_shift", "input_scale"];

/// Learnable tensor names in storage order.
pub const TENSOR_NAMES: [&str; 13] = [
    "w_in", "b_in", "spatial", "temporal", "wq", "wk", "wv", "w_state", "b_state", "w_class", "b_class",
    "w_proj", "b_proj",
];

impl<F: Scalar> ModelParams<F> {
    pub fn zeros(hidden: usize) -> Self {
        let h = hidden;
        Self {
            input_shift: Array2::zeros((NUM_JOINTS, FEATURE_DIM)),
            input_scale: Array2::ones((NUM_JOINTS, FEATURE_DIM)),
            w_in: Array2::zeros((FEATURE_DIM, h)),
            b_in: Array1::zeros(h),
            spatial: Array2::zeros((NUM_JOINTS, h)),
            temporal: Array2::zeros((WINDOW_LEN, h)),
            wq: Array2::zeros((h, h)),
            wk: Array2::zeros((h, h)),
            wv: Array2::zeros((h, h)),
            w_state: Array2::zeros((2 * h, NUM_STATES)),
            b_state: Array1::zeros(NUM_STATES),
            w_class: Array2::zeros((h, NUM_CLASSES)),
            b_class: Array1::zeros(NUM_CLASSES),
            w_proj: Array2::zeros((h, h)),
            b_proj: Array1::zeros(h),
            temperature: F::one(),
        }
    }

    /// Random initialization, deterministic in `seed`.
    pub fn init(hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(hidden);
        let h = hidden as f64;
        let mut fill = |a: &mut [F], std: f64| {
            let n = Normal::new(0.0, std).unwrap();
            a.iter_mut().for_each(|v| *v = F::c(n.sample(&mut rng)));
        };
        fill(p.w_in.as_slice_mut().unwrap(), (2.0 / FEATURE_DIM as f64).sqrt());
        fill(p.spatial.as_slice_mut().unwrap(), 0.5);
        fill(p.temporal.as_slice_mut().unwrap(), 0.1);
        fill(p.wq.as_slice_mut().unwrap(), (1.0 / h).sqrt());
        fill(p.wk.as_slice_mut().unwrap(), (1.0 / h).sqrt());
        fill(p.wv.as_slice_mut().unwrap(), (1.0 / h).sqrt());
        fill(p.w_state.as_slice_mut().unwrap(), (1.0 / (2.0 * h)).sqrt());
        fill(p.w_class.as_slice_mut().unwrap(), (1.0 / h).sqrt());
        fill(p.w_proj.as_slice_mut().unwrap(), (1.0 / h).sqrt());
        p
    }

    pub fn hidden(&self) -> usize {
        self.b_in.len()
    }

    pub fn buffers(&self) -> [(&'static str, Vec<usize>, &[F]); 2] {
        [
            ("input_shift", self.input_shift.shape().to_vec(), self.input_shift.as_slice().unwrap()),
            ("input_scale", self.input_scale.shape().to_vec(), self.input_scale.as_slice().unwrap()),
        ]
    }

    pub fn buffers_mut(&mut self) -> [(&'static str, &mut [F]); 2] {
        [
            ("input_shift", self.input_shift.as_slice_mut().unwrap()),
            ("input_scale", self.input_scale.as_slice_mut().unwrap()),
        ]
    }

    /// Sets the input standardization from per-frame feature rows
    /// (`NUM_JOINTS * FEATURE_DIM` values each). Constant features keep
    /// scale 1.
    pub fn fit_input_standardization<'a, I>(&mut self, frames: I)
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let n = NUM_JOINTS * FEATURE_DIM;
        let mut sum = vec![0.0; n];
        let mut sq = vec![0.0; n];
        let mut count = 0usize;
        for row in frames {
            for i in 0..n {
                sum[i] += row[i];
                sq[i] += row[i] * row[i];
            }
            count += 1;
        }
        if count == 0 {
            return;
        }
        let c = count as f64;
        for i in 0..n {
            let mean = sum[i] / c;
            let var = (sq[i] / c - mean * mean).max(0.0);
            let std = var.sqrt();
            let (j, d) = (i / FEATURE_DIM, i % FEATURE_DIM);
            self.input_shift[[j, d]] = F::c(mean);
            self.input_scale[[j, d]] = F::c(if std > 1e-6 { 1.0 / std } else { 1.0 });
        }
    }

    pub fn tensors(&self) -> [(&'static str, Vec<usize>, &[F]); 13] {
        macro_rules! t {
            ($name:literal, $f:ident) => {
                ($name, self.$f.shape().to_vec(), self.$f.as_slice().unwrap())
            };
        }
        [
            t!("w_in", w_in),
            t!("b_in", b_in),
            t!("spatial", spatial),
            t!("temporal", temporal),
            t!("wq", wq),
            t!("wk", wk),
            t!("wv", wv),
            t!("w_state", w_state),
            t!("b_state", b_state),
            t!("w_class", w_class),
            t!("b_class", b_class),
            t!("w_proj", w_proj),
            t!("b_proj", b_proj),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut [F]); 13] {
        macro_rules! t {
            ($name:literal, $f:ident) => {
                ($name, self.$f.as_slice_mut().unwrap())
            };
        }
        [
            t!("w_in", w_in),
            t!("b_in", b_in),
            t!("spatial", spatial),
            t!("temporal", temporal),
            t!("wq", wq),
            t!("wk", wk),
            t!("wv", wv),
            t!("w_state", w_state),
            t!("b_state", b_state),
            t!("w_class", w_class),
            t!("b_class", b_class),
            t!("w_proj", w_proj),
            t!("b_proj", b_proj),
        ]
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, _, d)| d.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.temperature.is_finite()
            && self.input_shift.iter().chain(self.input_scale.iter()).all(|v| v.is_finite())
            && self
                .tensors()
                .iter()
                .all(|(_, _, d)| d.iter().all(|v| v.is_finite()))
    }

    pub fn cast<G: Scalar>(&self) -> ModelParams<G> {
        let mut out = ModelParams::<G>::zeros(self.hidden());
        for ((_, _, src), (_, dst)) in self.tensors().iter().zip(out.tensors_mut()) {
            for (d, s) in dst.iter_mut().zip(src.iter()) {
                *d = G::c(s.f64());
            }
        }
        for ((_, _, src), (_, dst)) in self.buffers().iter().zip(out.buffers_mut()) {
            for (d, s) in dst.iter_mut().zip(src.iter()) {
                *d = G::c(s.f64());
            }
        }
        out.temperature = G::c(self.temperature.f64());
        out
    }

    /// Adds `scale * other` to every tensor (temperature untouched).
    pub fn add_scaled(&mut self, other: &ModelParams<F>, scale: F) {
        for ((_, dst), (_, _, src)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.iter_mut().zip(src.iter()) {
                *d = *d + *s * scale;
            }
        }
    }
}
