//! Forward and reverse pass of the multi-task network.
//!
//! Per window: a shared per-joint projection `D -> H` (plus a learned
//! per-joint embedding) with ReLU and layer normalization, mean pooling
//! over joints, a learned temporal embedding, single-head self-attention
//! over the `T` frames, then three heads:
//!
//! * static: mean over frames, `H -> 8` class logits;
//! * dynamic: per frame, `[attended, joint-pooled] (2H) -> 5` state logits,
//!   one weight matrix shared by all frames;
//! * contrastive: the frame-mean passed through `H -> H` and L2-normalized.
//!
//! [`backward`] propagates output gradients through the cached
//! activations of [`forward_traced`].

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};

use super::params::{ModelParams, Scalar};
use super::RecognizerError;
use crate::gesture::{NUM_CLASSES, NUM_STATES};
use crate::skeleton::{FeatureWindow, FEATURE_DIM, NUM_JOINTS, WINDOW_LEN};

const LN_EPS: f64 = 1e-5;
const NORM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutput<F> {
    /// Pre-temperature class logits.
    pub class_logits: Array1<F>,
    /// `softmax(class_logits / temperature)`.
    pub class_probs: Array1<F>,
    /// `(T, 5)` per-frame sub-state logits.
    pub state_logits: Array2<F>,
    /// L2-normalized contrastive embedding.
    pub embedding: Array1<F>,
}

impl<F: Scalar> ModelOutput<F> {
    pub fn predicted_class(&self) -> usize {
        argmax(self.class_probs.view())
    }

    /// Most likely sub-state of every frame.
    pub fn predicted_states(&self) -> Vec<usize> {
        self.state_logits.rows().into_iter().map(argmax).collect()
    }
}

/// Activations kept for the reverse pass.
#[derive(Debug, Clone)]
pub struct Trace<F> {
    /// Standardized input.
    pub x: Array2<F>,
    pub pre: Array2<F>,
    pub normed: Array2<F>,
    pub inv_std: Array1<F>,
    pub h0: Array2<F>,
    pub h: Array2<F>,
    pub q: Array2<F>,
    pub k: Array2<F>,
    pub v: Array2<F>,
    pub attn: Array2<F>,
    pub attended: Array2<F>,
    pub pooled: Array1<F>,
    pub proj: Array1<F>,
    pub proj_norm: F,
}

impl<F: Scalar> Trace<F> {
    /// Which ReLU units were active.
    pub fn relu_mask(&self) -> Vec<bool> {
        self.pre.iter().map(|v| *v > F::zero()).collect()
    }
}

pub fn argmax<F: Scalar>(v: ArrayView1<F>) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub fn softmax<F: Scalar>(v: ArrayView1<F>) -> Array1<F> {
    let m = v.fold(F::neg_infinity(), |a, &b| a.max(b));
    let e = v.mapv(|x| (x - m).exp());
    let sum = e.sum();
    e / sum
}

/// `softmax(logits / temperature)`.
pub fn tempered_probs<F: Scalar>(logits: ArrayView1<F>, temperature: F) -> Array1<F> {
    softmax(logits.mapv(|x| x / temperature).view())
}

/// Copies a feature window into a `(T*J, D)` matrix.
pub fn window_matrix<F: Scalar>(window: &FeatureWindow) -> Array2<F> {
    Array2::from_shape_vec(
        (WINDOW_LEN * NUM_JOINTS, FEATURE_DIM),
        window.as_slice().iter().map(|v| F::c(*v)).collect(),
    )
    .expect("feature window shape")
}

fn softmax_rows<F: Scalar>(m: &mut Array2<F>) {
    for mut row in m.rows_mut() {
        let mx = row.fold(F::neg_infinity(), |a, &b| a.max(b));
        row.mapv_inplace(|x| (x - mx).exp());
        let s = row.sum();
        row.mapv_inplace(|x| x / s);
    }
}

fn mean_rows<F: Scalar>(m: &Array2<F>) -> Array1<F> {
    m.mean_axis(Axis(0)).expect("non-empty")
}

pub fn forward<F: Scalar>(params: &ModelParams<F>, window: &FeatureWindow) -> Result<ModelOutput<F>, RecognizerError> {
    let (out, _) = forward_traced(params, window_matrix(window).view())?;
    Ok(out)
}

/// Runs the network on a `(T*J, D)` input and keeps the activations.
pub fn forward_traced<F: Scalar>(
    p: &ModelParams<F>,
    x: ArrayView2<F>,
) -> Result<(ModelOutput<F>, Trace<F>), RecognizerError> {
    let rows = WINDOW_LEN * NUM_JOINTS;
    if x.dim() != (rows, FEATURE_DIM) {
        return Err(RecognizerError::ShapeMismatch(format!(
            "input {:?}, expected ({rows}, {FEATURE_DIM})",
            x.dim()
        )));
    }
    let h = p.hidden();
    let hf = F::c(h as f64);

    let mut x = x.to_owned();
    for (r, mut row) in x.rows_mut().into_iter().enumerate() {
        let j = r % NUM_JOINTS;
        Zip::from(&mut row)
            .and(p.input_shift.row(j))
            .and(p.input_scale.row(j))
            .for_each(|v, &m, &s| *v = (*v - m) * s);
    }
    let mut pre = x.dot(&p.w_in);
    for (r, mut row) in pre.rows_mut().into_iter().enumerate() {
        let j = r % NUM_JOINTS;
        Zip::from(&mut row)
            .and(&p.b_in)
            .and(p.spatial.row(j))
            .for_each(|z, &b, &e| *z = *z + b + e);
    }

    let mut normed = pre.mapv(|v| v.max(F::zero()));
    let mut inv_std = Array1::zeros(rows);
    for (r, mut row) in normed.rows_mut().into_iter().enumerate() {
        let mean = row.sum() / hf;
        let var = row.fold(F::zero(), |acc, &v| acc + (v - mean) * (v - mean)) / hf;
        let inv = F::one() / (var + F::c(LN_EPS)).sqrt();
        inv_std[r] = inv;
        row.mapv_inplace(|v| (v - mean) * inv);
    }

    let h0 = normed
        .view()
        .into_shape_with_order((WINDOW_LEN, NUM_JOINTS, h))
        .expect("contiguous")
        .mean_axis(Axis(1))
        .expect("non-empty");
    let hs = &h0 + &p.temporal;

    let q = hs.dot(&p.wq);
    let k = hs.dot(&p.wk);
    let v = hs.dot(&p.wv);
    let scale = F::one() / hf.sqrt();
    let mut attn = q.dot(&k.t()) * scale;
    softmax_rows(&mut attn);
    let attended = attn.dot(&v);
    let pooled = mean_rows(&attended);

    let class_logits = pooled.dot(&p.w_class) + &p.b_class;
    let class_probs = tempered_probs(class_logits.view(), p.temperature);

    let mut state_logits = attended.dot(&p.w_state.slice(s![..h, ..]));
    general_mat_mul(F::one(), &h0, &p.w_state.slice(s![h.., ..]), F::one(), &mut state_logits);
    state_logits += &p.b_state;

    let proj = pooled.dot(&p.w_proj) + &p.b_proj;
    let proj_norm = proj.dot(&proj).sqrt().max(F::c(NORM_EPS));
    let embedding = &proj / proj_norm;

    let finite = class_logits.iter().all(|v| v.is_finite())
        && state_logits.iter().all(|v| v.is_finite())
        && embedding.iter().all(|v| v.is_finite())
        && class_probs.iter().all(|v| v.is_finite());
    if !finite {
        return Err(RecognizerError::NonFiniteActivation);
    }

    let out = ModelOutput {
        class_logits,
        class_probs,
        state_logits,
        embedding,
    };
    let trace = Trace {
        x,
        pre,
        normed,
        inv_std,
        h0,
        h: hs,
        q,
        k,
        v,
        attn,
        attended,
        pooled,
        proj,
        proj_norm,
    };
    Ok((out, trace))
}

fn add_outer<F: Scalar>(acc: &mut Array2<F>, a: &Array1<F>, b: &Array1<F>) {
    for (i, &ai) in a.iter().enumerate() {
        if ai == F::zero() {
            continue;
        }
        Zip::from(acc.row_mut(i)).and(b).for_each(|g, &bj| *g = *g + ai * bj);
    }
}

/// Gradients of the loss with respect to the three network outputs.
#[derive(Debug, Clone)]
pub struct OutputGrads<F> {
    pub class_logits: Array1<F>,
    pub state_logits: Array2<F>,
    pub embedding: Array1<F>,
}

impl<F: Scalar> OutputGrads<F> {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            class_logits: Array1::zeros(NUM_CLASSES),
            state_logits: Array2::zeros((WINDOW_LEN, NUM_STATES)),
            embedding: Array1::zeros(hidden),
        }
    }
}

/// Accumulates parameter gradients into `grads`.
pub fn backward<F: Scalar>(p: &ModelParams<F>, tr: &Trace<F>, out: &ModelOutput<F>, g: &OutputGrads<F>, grads: &mut ModelParams<F>) {
    let h = p.hidden();
    let t_len = F::c(WINDOW_LEN as f64);
    let hf = F::c(h as f64);

    // contrastive head: e = u / |u|
    let emb = &out.embedding;
    let radial = emb.dot(&g.embedding);
    let g_proj = (&g.embedding - &(emb * radial)) / tr.proj_norm;
    add_outer(&mut grads.w_proj, &tr.pooled, &g_proj);
    grads.b_proj += &g_proj;
    let mut g_pooled = p.w_proj.dot(&g_proj);

    // static head
    add_outer(&mut grads.w_class, &tr.pooled, &g.class_logits);
    grads.b_class += &g.class_logits;
    g_pooled += &p.w_class.dot(&g.class_logits);

    // dynamic head
    let w_att = p.w_state.slice(s![..h, ..]);
    let w_h0 = p.w_state.slice(s![h.., ..]);
    {
        let mut gw = grads.w_state.slice_mut(s![..h, ..]);
        general_mat_mul(F::one(), &tr.attended.t(), &g.state_logits, F::one(), &mut gw);
    }
    {
        let mut gw = grads.w_state.slice_mut(s![h.., ..]);
        general_mat_mul(F::one(), &tr.h0.t(), &g.state_logits, F::one(), &mut gw);
    }
    grads.b_state += &g.state_logits.sum_axis(Axis(0));
    let mut g_att = g.state_logits.dot(&w_att.t());
    let mut g_h0 = g.state_logits.dot(&w_h0.t());

    // frame mean
    let share = &g_pooled / t_len;
    g_att += &share;

    // attention
    let g_attn = g_att.dot(&tr.v.t());
    let g_v = tr.attn.t().dot(&g_att);
    let mut g_s = g_attn;
    let scale = F::one() / hf.sqrt();
    for (mut gs_row, a_row) in g_s.rows_mut().into_iter().zip(tr.attn.rows()) {
        let dot = gs_row.dot(&a_row);
        Zip::from(&mut gs_row)
            .and(&a_row)
            .for_each(|gs, &a| *gs = a * (*gs - dot) * scale);
    }
    let g_q = g_s.dot(&tr.k);
    let g_k = g_s.t().dot(&tr.q);
    general_mat_mul(F::one(), &tr.h.t(), &g_q, F::one(), &mut grads.wq);
    general_mat_mul(F::one(), &tr.h.t(), &g_k, F::one(), &mut grads.wk);
    general_mat_mul(F::one(), &tr.h.t(), &g_v, F::one(), &mut grads.wv);
    let mut g_h = g_q.dot(&p.wq.t());
    general_mat_mul(F::one(), &g_k, &p.wk.t(), F::one(), &mut g_h);
    general_mat_mul(F::one(), &g_v, &p.wv.t(), F::one(), &mut g_h);
    grads.temporal += &g_h;
    g_h0 += &g_h;

    // joint mean, layer norm, ReLU
    let j_len = F::c(NUM_JOINTS as f64);
    let rows = WINDOW_LEN * NUM_JOINTS;
    let mut g_pre = Array2::<F>::zeros((rows, h));
    for r in 0..rows {
        let t = r / NUM_JOINTS;
        let gn = g_h0.row(t);
        let y = tr.normed.row(r);
        let mean_g = gn.sum() / (hf * j_len);
        let mean_gy = gn.dot(&y) / (hf * j_len);
        let inv = tr.inv_std[r];
        let mut out_row = g_pre.row_mut(r);
        Zip::from(&mut out_row)
            .and(&gn)
            .and(&y)
            .and(tr.pre.row(r))
            .for_each(|o, &gi, &yi, &zi| {
                *o = if zi > F::zero() {
                    inv * (gi / j_len - mean_g - yi * mean_gy)
                } else {
                    F::zero()
                };
            });
    }
    general_mat_mul(F::one(), &tr.x.t(), &g_pre, F::one(), &mut grads.w_in);
    grads.b_in += &g_pre.sum_axis(Axis(0));
    for (r, row) in g_pre.rows().into_iter().enumerate() {
        let mut e = grads.spatial.row_mut(r % NUM_JOINTS);
        e += &row;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn random_window(seed: u64) -> FeatureWindow {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        FeatureWindow::from_vec((0..WINDOW_LEN * NUM_JOINTS * FEATURE_DIM).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap()
    }

    #[test]
    fn zero_input_shapes() {
        let p = ModelParams::<f64>::init(16, 3);
        let out = forward(&p, &FeatureWindow::zeros()).unwrap();
        assert!(close(out.class_probs.sum(), 1.0, 1e-6));
        assert_eq!(out.state_logits.dim(), (20, 5));
        assert_eq!(out.embedding.len(), 16);
        assert!(close(out.embedding.dot(&out.embedding), 1.0, 1e-9));
    }

    #[test]
    fn temperature_changes_confidence_not_class() {
        let mut p = ModelParams::<f64>::init(16, 4);
        let w = random_window(1);
        let a = forward(&p, &w).unwrap();
        p.temperature = 2.0;
        let b = forward(&p, &w).unwrap();
        assert_eq!(a.predicted_class(), b.predicted_class());
        let max = |v: &Array1<f64>| v.fold(0.0f64, |m, &x| m.max(x));
        assert!(max(&a.class_probs) > max(&b.class_probs));
        assert_eq!(a.class_logits, b.class_logits);
    }

    #[test]
    fn rejects_wrong_shape() {
        let p = ModelParams::<f64>::init(8, 4);
        let x = Array2::<f64>::zeros((10, 7));
        assert!(matches!(
            forward_traced(&p, x.view()),
            Err(RecognizerError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn non_finite_input_is_reported() {
        let p = ModelParams::<f64>::init(8, 4);
        let mut data = vec![0.0; WINDOW_LEN * NUM_JOINTS * FEATURE_DIM];
        data[3] = f64::INFINITY;
        let w = FeatureWindow::from_vec(data).unwrap();
        assert_eq!(forward(&p, &w), Err(RecognizerError::NonFiniteActivation));
    }

    #[test]
    fn f32_and_f64_agree() {
        let p = ModelParams::<f64>::init(16, 9);
        let w = random_window(2);
        let a = forward(&p, &w).unwrap();
        let b = forward(&p.cast::<f32>(), &w).unwrap();
        for (x, y) in a.class_logits.iter().zip(b.class_logits.iter()) {
            assert!(close(*x, *y as f64, 1e-4));
        }
    }
}
