//! One-layer Elman recurrent edge classifier.
//!
//! Each angle bin is looked up in an embedding table, fed through a `tanh`
//! recurrent cell and a linear head, and turned into a distribution over base
//! edges with a softmax:
//!
//! ```text
//! x_t = embed[bin_t]
//! h_t = tanh(W_xh x_t + W_hh h_{t-1} + b_h),   h_0 = 0
//! y_t = W_hy h_t + b_y
//! p_t = softmax(y_t)
//! ```
//!
//! Training minimizes the per-trajectory mean negative log-likelihood with
//! plain SGD on one trajectory per step, gradients from exact
//! backpropagation through time, clipped by global norm.

use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::encoding::{AngleBin, ALPHABET_SIZE};
use crate::error::{Error, Result};
use crate::map::EdgeId;

const MAGIC: &[u8; 5] = b"TRNN1";
const PROB_FLOOR: f64 = 1e-12;

static CLAMPED_LOSSES: AtomicU64 = AtomicU64::new(0);

/// Number of times [`nll_loss`] had to clamp a zero probability.
pub fn clamped_loss_count() -> u64 {
    CLAMPED_LOSSES.load(Ordering::Relaxed)
}

/// Parameter names in storage order.
pub const PARAM_NAMES: [&str; 6] = ["embed", "w_xh", "w_hh", "b_h", "w_hy", "b_y"];

#[derive(Debug, Clone, PartialEq)]
pub struct RnnModel {
    /// `[20, d_e]`
    pub embed: Array2<f64>,
    /// `[H, d_e]`
    pub w_xh: Array2<f64>,
    /// `[H, H]`
    pub w_hh: Array2<f64>,
    pub b_h: Array1<f64>,
    /// `[C, H]`
    pub w_hy: Array2<f64>,
    pub b_y: Array1<f64>,
}

/// Gradients share the layout of the model they differentiate.
pub type Gradients = RnnModel;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub hidden: usize,
    pub embed_dim: usize,
    pub learning_rate: f64,
    /// Iterations are `round(epochs_multiplier * records)`.
    pub epochs_multiplier: f64,
    pub seed: u64,
    pub init_scale: f64,
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: 128,
            embed_dim: 32,
            learning_rate: 0.01,
            epochs_multiplier: 6.0,
            seed: 0,
            init_scale: 0.08,
            clip_norm: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.hidden == 0 {
            return bad("hidden size must be at least 1".into());
        }
        if self.embed_dim == 0 {
            return bad("embedding size must be at least 1".into());
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return bad(format!("learning rate must be non-negative, got {}", self.learning_rate));
        }
        if !self.epochs_multiplier.is_finite() || self.epochs_multiplier < 0.0 {
            return bad(format!("epochs multiplier must be non-negative, got {}", self.epochs_multiplier));
        }
        if !self.init_scale.is_finite() || self.init_scale < 0.0 {
            return bad(format!("init scale must be non-negative, got {}", self.init_scale));
        }
        if self.clip_norm.is_nan() || self.clip_norm <= 0.0 {
            return bad(format!("clip norm must be positive, got {}", self.clip_norm));
        }
        Ok(())
    }
}

impl RnnModel {
    pub fn zeros(embed_dim: usize, hidden: usize, classes: usize) -> Self {
        RnnModel {
            embed: Array2::zeros((ALPHABET_SIZE, embed_dim)),
            w_xh: Array2::zeros((hidden, embed_dim)),
            w_hh: Array2::zeros((hidden, hidden)),
            b_h: Array1::zeros(hidden),
            w_hy: Array2::zeros((classes, hidden)),
            b_y: Array1::zeros(classes),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.nrows()
    }

    pub fn embed_dim(&self) -> usize {
        self.embed.ncols()
    }

    pub fn classes(&self) -> usize {
        self.w_hy.nrows()
    }

    pub fn param_count(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    /// Flat views of every parameter, in [`PARAM_NAMES`] order.
    pub fn slices(&self) -> [&[f64]; 6] {
        fn f(s: Option<&[f64]>) -> &[f64] {
            s.expect("parameters are contiguous")
        }
        [
            f(self.embed.as_slice()),
            f(self.w_xh.as_slice()),
            f(self.w_hh.as_slice()),
            f(self.b_h.as_slice()),
            f(self.w_hy.as_slice()),
            f(self.b_y.as_slice()),
        ]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 6] {
        fn f(s: Option<&mut [f64]>) -> &mut [f64] {
            s.expect("parameters are contiguous")
        }
        [
            f(self.embed.as_slice_mut()),
            f(self.w_xh.as_slice_mut()),
            f(self.w_hh.as_slice_mut()),
            f(self.b_h.as_slice_mut()),
            f(self.w_hy.as_slice_mut()),
            f(self.b_y.as_slice_mut()),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    /// Euclidean norm over all parameters.
    pub fn norm(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    fn zeros_like(&self) -> Self {
        RnnModel::zeros(self.embed_dim(), self.hidden(), self.classes())
    }

    fn scale(&mut self, k: f64) {
        for s in self.slices_mut() {
            s.iter_mut().for_each(|v| *v *= k);
        }
    }

    /// `self -= lr * grads`
    fn descend(&mut self, grads: &Gradients, lr: f64) {
        for (p, g) in self.slices_mut().into_iter().zip(grads.slices()) {
            p.iter_mut().zip(g).for_each(|(p, g)| *p -= lr * g);
        }
    }

    /// Serializes as `TRNN1`, dims `(20, d_e, H, C)` as little-endian `u32`,
    /// then all parameters as little-endian `f64` in [`PARAM_NAMES`] order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(MAGIC.len() + 16 + 8 * self.param_count());
        out.extend_from_slice(MAGIC);
        for d in [ALPHABET_SIZE, self.embed_dim(), self.hidden(), self.classes()] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for s in self.slices() {
            for v in s {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fmt_err = |m: String| Error::ModelFormat(m);
        if bytes.len() < MAGIC.len() {
            return Err(fmt_err("file is truncated".into()));
        }
        let (magic, rest) = bytes.split_at(MAGIC.len());
        if magic != MAGIC {
            if magic.starts_with(b"TRNN") {
                return Err(fmt_err(format!(
                    "unsupported version `{}`",
                    String::from_utf8_lossy(magic)
                )));
            }
            return Err(fmt_err("bad magic bytes".into()));
        }
        if rest.len() < 16 {
            return Err(fmt_err("file is truncated in the header".into()));
        }
        let dim = |i: usize| u32::from_le_bytes(rest[4 * i..4 * i + 4].try_into().unwrap()) as usize;
        let (alphabet, embed_dim, hidden, classes) = (dim(0), dim(1), dim(2), dim(3));
        if alphabet != ALPHABET_SIZE {
            return Err(fmt_err(format!("alphabet size {alphabet}, expected {ALPHABET_SIZE}")));
        }
        let mut m = RnnModel::zeros(embed_dim, hidden, classes);
        let body = &rest[16..];
        if body.len() != 8 * m.param_count() {
            return Err(fmt_err(format!(
                "expected {} parameter bytes, found {}",
                8 * m.param_count(),
                body.len()
            )));
        }
        let mut values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        for s in m.slices_mut() {
            for v in s.iter_mut() {
                *v = values.next().expect("length checked");
            }
        }
        Ok(m)
    }
}

pub fn save_model(m: &RnnModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, m.to_bytes())?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<RnnModel> {
    RnnModel::from_bytes(&fs::read(path)?)
}

/// Weight matrices uniform in `[-init_scale, init_scale]`, biases zero.
pub fn init_model(cfg: &TrainConfig, classes: usize) -> Result<RnnModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    init_with_rng(cfg, classes, &mut rng)
}

fn init_with_rng(cfg: &TrainConfig, classes: usize, rng: &mut ChaCha8Rng) -> Result<RnnModel> {
    cfg.validate()?;
    if classes < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 classes, got {classes}")));
    }
    let mut m = RnnModel::zeros(cfg.embed_dim, cfg.hidden, classes);
    let s = cfg.init_scale;
    if s > 0.0 {
        let [embed, w_xh, w_hh, _, w_hy, _] = m.slices_mut();
        for w in [embed, w_xh, w_hh, w_hy] {
            w.iter_mut().for_each(|v| *v = rng.random_range(-s..=s));
        }
    }
    Ok(m)
}

/// One recurrence step; returns the new hidden state and the logits.
pub fn rnn_step(m: &RnnModel, bin: usize, h_prev: ArrayView1<f64>) -> Result<(Array1<f64>, Array1<f64>)> {
    if bin >= ALPHABET_SIZE {
        return Err(Error::InvalidArgument(format!("angle bin {bin} outside 0..{ALPHABET_SIZE}")));
    }
    if h_prev.len() != m.hidden() {
        return Err(Error::Dimension(format!(
            "hidden state has {} entries, model has {}",
            h_prev.len(),
            m.hidden()
        )));
    }
    let x = m.embed.row(bin);
    let mut h = m.w_xh.dot(&x) + m.w_hh.dot(&h_prev) + &m.b_h;
    h.mapv_inplace(f64::tanh);
    let logits = m.w_hy.dot(&h) + &m.b_y;
    Ok((h, logits))
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `ln softmax(logits)` without forming the probabilities.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

/// `-ln p[label]`, with the probability floored at `1e-12`.
pub fn nll_loss(p: &[f64], label: EdgeId) -> Result<f64> {
    let q = *p.get(label.index()).ok_or_else(|| {
        Error::Dimension(format!("label {label} outside {} classes", p.len()))
    })?;
    if q < PROB_FLOOR {
        CLAMPED_LOSSES.fetch_add(1, Ordering::Relaxed);
        log::warn!("probability {q} of label {label} clamped to {PROB_FLOOR}");
        return Ok(-PROB_FLOOR.ln());
    }
    Ok(-q.ln())
}

/// Per-step hidden states, logits and probabilities, one row per step.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub hidden: Array2<f64>,
    pub logits: Array2<f64>,
    pub probs: Array2<f64>,
    pub log_probs: Array2<f64>,
}

impl ForwardTrace {
    /// Builds a trace from logits alone; hidden states are left empty.
    pub fn from_logits(logits: Array2<f64>) -> Self {
        let (t, c) = logits.dim();
        let mut probs = Array2::zeros((t, c));
        let mut log_probs = Array2::zeros((t, c));
        for (i, row) in logits.outer_iter().enumerate() {
            let row = row.to_vec();
            probs.row_mut(i).assign(&Array1::from(softmax(&row)));
            log_probs.row_mut(i).assign(&Array1::from(log_softmax(&row)));
        }
        ForwardTrace {
            hidden: Array2::zeros((t, 0)),
            logits,
            probs,
            log_probs,
        }
    }

    pub fn len(&self) -> usize {
        self.logits.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn classes(&self) -> usize {
        self.logits.ncols()
    }

    pub fn log_prob(&self, t: usize, e: EdgeId) -> f64 {
        self.log_probs[[t, e.index()]]
    }

    /// Most probable edge at step `t`, smallest id on ties.
    pub fn argmax(&self, t: usize) -> EdgeId {
        let row = self.probs.row(t);
        let mut best = 0;
        for (i, &p) in row.iter().enumerate() {
            if p > row[best] {
                best = i;
            }
        }
        EdgeId(best as u32)
    }
}

pub fn forward(m: &RnnModel, inputs: &[AngleBin]) -> Result<ForwardTrace> {
    if inputs.is_empty() {
        return Err(Error::InvalidArgument("cannot run the model on an empty sequence".into()));
    }
    let (t_len, hidden, classes) = (inputs.len(), m.hidden(), m.classes());
    let mut hs = Array2::zeros((t_len, hidden));
    let mut logits = Array2::zeros((t_len, classes));
    let mut h = Array1::zeros(hidden);
    for (t, bin) in inputs.iter().enumerate() {
        let (h_new, y) = rnn_step(m, bin.index(), h.view())?;
        hs.row_mut(t).assign(&h_new);
        logits.row_mut(t).assign(&y);
        h = h_new;
    }
    let mut trace = ForwardTrace::from_logits(logits);
    trace.hidden = hs;
    Ok(trace)
}

/// Mean sequence NLL and its exact gradient.
pub fn backward_bptt(m: &RnnModel, inputs: &[AngleBin], labels: &[EdgeId]) -> Result<(f64, Gradients)> {
    if inputs.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} inputs but {} labels",
            inputs.len(),
            labels.len()
        )));
    }
    if let Some(l) = labels.iter().find(|l| l.index() >= m.classes()) {
        return Err(Error::Dimension(format!("label {l} outside {} classes", m.classes())));
    }
    let trace = forward(m, inputs)?;
    let t_len = inputs.len();
    let scale = 1.0 / t_len as f64;

    let mut loss = 0.0;
    // dL/dy for every step, [T, C]
    let mut dy = trace.probs.clone();
    for (t, l) in labels.iter().enumerate() {
        loss += nll_loss(trace.probs.row(t).as_slice().expect("contiguous"), *l)?;
        dy[[t, l.index()]] -= 1.0;
    }
    dy *= scale;
    loss *= scale;

    let mut g = m.zeros_like();
    let hs = &trace.hidden;
    g.w_hy = dy.t().dot(hs);
    g.b_y = dy.sum_axis(Axis(0));

    // output contribution to dL/dh for every step, [T, H]
    let dh_out = dy.dot(&m.w_hy);
    let mut da = Array2::<f64>::zeros(hs.dim());
    let mut carry = Array1::<f64>::zeros(m.hidden());
    for t in (0..t_len).rev() {
        let dh = &dh_out.row(t) + &carry;
        let h = hs.row(t);
        let a = Array1::from_shape_fn(h.len(), |i| dh[i] * (1.0 - h[i] * h[i]));
        carry = m.w_hh.t().dot(&a);
        da.row_mut(t).assign(&a);
    }

    g.b_h = da.sum_axis(Axis(0));
    // h_{t-1} rows with h_0 = 0
    let mut h_prev = Array2::<f64>::zeros(hs.dim());
    if t_len > 1 {
        h_prev.slice_mut(s![1.., ..]).assign(&hs.slice(s![..t_len - 1, ..]));
    }
    g.w_hh = da.t().dot(&h_prev);
    let xs = Array2::from_shape_fn((t_len, m.embed_dim()), |(t, j)| m.embed[[inputs[t].index(), j]]);
    g.w_xh = da.t().dot(&xs);
    let dx = da.dot(&m.w_xh);
    for (t, bin) in inputs.iter().enumerate() {
        let mut row = g.embed.row_mut(bin.index());
        row += &dx.row(t);
    }
    Ok((loss, g))
}

/// Mean NLL of a labelled sequence, without gradients.
pub fn sequence_loss(m: &RnnModel, inputs: &[AngleBin], labels: &[EdgeId]) -> Result<f64> {
    if inputs.len() != labels.len() {
        return Err(Error::Dimension(format!("{} inputs but {} labels", inputs.len(), labels.len())));
    }
    let trace = forward(m, inputs)?;
    let mut loss = 0.0;
    for (t, l) in labels.iter().enumerate() {
        loss += nll_loss(trace.probs.row(t).as_slice().expect("contiguous"), *l)?;
    }
    Ok(loss / inputs.len() as f64)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: RnnModel,
    /// Loss of the sampled trajectory at every iteration.
    pub loss_curve: Vec<f64>,
}

/// SGD with one uniformly sampled trajectory per iteration.
pub fn train(d: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with_progress(d, cfg, |_, _| {})
}

/// [`train`] with a callback invoked after every iteration.
pub fn train_with_progress(
    d: &Dataset,
    cfg: &TrainConfig,
    mut progress: impl FnMut(usize, f64),
) -> Result<TrainOutcome> {
    if d.is_empty() {
        return Err(Error::InvalidArgument("cannot train on an empty dataset".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = init_with_rng(cfg, d.num_classes, &mut rng)?;
    let iterations = (cfg.epochs_multiplier * d.len() as f64).round() as usize;
    let mut loss_curve = Vec::with_capacity(iterations);
    let report_every = (iterations / 20).max(1);

    for it in 0..iterations {
        let rec = &d.records[rng.random_range(0..d.len())];
        let (loss, mut grads) = backward_bptt(&model, &rec.inputs, &rec.labels)?;
        let norm = grads.norm();
        if !loss.is_finite() || !norm.is_finite() {
            return Err(Error::Divergence { iteration: it, loss });
        }
        if norm > cfg.clip_norm {
            grads.scale(cfg.clip_norm / norm);
        }
        model.descend(&grads, cfg.learning_rate);
        loss_curve.push(loss);
        progress(it, loss);
        if (it + 1) % report_every == 0 {
            let window = &loss_curve[loss_curve.len().saturating_sub(report_every)..];
            log::info!(
                "iteration {}/{iterations}: mean loss {:.4}",
                it + 1,
                window.iter().sum::<f64>() / window.len() as f64
            );
        }
    }
    Ok(TrainOutcome { model, loss_curve })
}
