//! Bidirectional transformer encoder trained from scratch with masked
//! language modeling: forward pass, handwritten reverse-mode gradients,
//! adaptive-moment training, perplexity evaluation and mask-filling queries.

pub mod backward;
pub mod forward;
pub mod io;
pub mod masking;
pub mod math;
pub mod train;

pub use masking::{mask_batch, MaskedExample};
pub use math::{argmax_select, softmax};
pub use train::{fill_mask, perplexity, train_mlm, MlmHyper, Prediction, TrainLogRow};

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Layer-norm epsilon.
pub const LAYER_NORM_EPS: f64 = 1e-12;
/// Weight initialization: truncated normal standard deviation.
pub const INIT_STD: f64 = 0.02;
/// Additive score for attention at padding positions.
pub const ATTENTION_MASK_BIAS: f64 = -1e30;

#[derive(Debug, Error)]
pub enum MlmError {
    #[error("invalid encoder config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch in {tensor}: expected {expected}, got {got}")]
    Shape {
        tensor: String,
        expected: String,
        got: String,
    },
    #[error("non-finite input to {0}")]
    NonFinite(&'static str),
    #[error("empty input to {0}")]
    EmptyInput(&'static str),
    #[error("no masked positions to evaluate")]
    NoMaskedPositions,
    #[error("training diverged at epoch {epoch}, step {step}; last good checkpoint attached")]
    Diverged {
        epoch: usize,
        step: usize,
        last_good: Box<EncoderParams>,
    },
    #[error("template must contain exactly one [MASK], found {0}")]
    MaskCount(usize),
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Subword(#[from] crate::subword::SubwordError),
}

/// Encoder shape and masking policy.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub layers: usize,
    pub hidden: usize,
    pub heads: usize,
    pub intermediate: usize,
    pub max_seq: usize,
    pub vocab_size: usize,
    pub mask_rate: f64,
    /// Fraction of chosen positions replaced by the MASK id.
    pub mask_token_fraction: f64,
    /// Fraction of chosen positions replaced by a random non-special id.
    pub random_token_fraction: f64,
    /// Share the token embedding matrix with the output head.
    pub tie_embeddings: bool,
}

impl EncoderConfig {
    /// Desk-scale default: small enough to train on one CPU core.
    pub fn desk_scale(vocab_size: usize) -> Self {
        Self {
            layers: 2,
            hidden: 64,
            heads: 4,
            intermediate: 256,
            max_seq: 128,
            vocab_size,
            mask_rate: 0.15,
            mask_token_fraction: 0.8,
            random_token_fraction: 0.1,
            tie_embeddings: false,
        }
    }

    /// Canonical base-encoder shape (L=12, H=768, A=12, 110M parameters).
    /// Constructible for shape checks; not trained in tests.
    pub fn bert_base(vocab_size: usize) -> Self {
        Self {
            layers: 12,
            hidden: 768,
            heads: 12,
            intermediate: 3072,
            max_seq: 512,
            vocab_size,
            mask_rate: 0.15,
            mask_token_fraction: 0.8,
            random_token_fraction: 0.1,
            tie_embeddings: false,
        }
    }

    pub fn validate(&self) -> Result<(), MlmError> {
        if self.hidden == 0 || self.heads == 0 || !self.hidden.is_multiple_of(self.heads) {
            return Err(MlmError::InvalidConfig(format!(
                "hidden {} must be a positive multiple of heads {}",
                self.hidden, self.heads
            )));
        }
        if !(self.mask_rate > 0.0 && self.mask_rate < 1.0) {
            return Err(MlmError::InvalidConfig(format!(
                "mask_rate {} must lie in (0, 1)",
                self.mask_rate
            )));
        }
        let split = self.mask_token_fraction + self.random_token_fraction;
        if !(0.0..=1.0).contains(&split)
            || self.mask_token_fraction < 0.0
            || self.random_token_fraction < 0.0
        {
            return Err(MlmError::InvalidConfig(
                "corruption fractions must be nonnegative and sum to at most 1".into(),
            ));
        }
        if self.vocab_size <= crate::subword::SPECIALS.len() {
            return Err(MlmError::InvalidConfig(format!(
                "vocab_size {} leaves no non-special tokens",
                self.vocab_size
            )));
        }
        if self.max_seq < 3 || self.layers == 0 || self.intermediate == 0 {
            return Err(MlmError::InvalidConfig(
                "layers, intermediate and max_seq must be positive (max_seq >= 3)".into(),
            ));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden / self.heads
    }
}

/// Per-layer weights. Projections and feed-forward matrices carry no bias;
/// the two layer norms carry gain and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
    pub wv: Array2<f64>,
    pub wo: Array2<f64>,
    pub w_in: Array2<f64>,
    pub w_out: Array2<f64>,
    pub ln1_gain: Array1<f64>,
    pub ln1_bias: Array1<f64>,
    pub ln2_gain: Array1<f64>,
    pub ln2_bias: Array1<f64>,
}

/// All encoder weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub token_emb: Array2<f64>,
    pub pos_emb: Array2<f64>,
    pub seg_emb: Array2<f64>,
    pub layers: Vec<LayerParams>,
    pub head_w: Array2<f64>,
    pub head_b: Array1<f64>,
}

impl EncoderParams {
    /// Truncated-normal initialization (std 0.02, clipped at two standard
    /// deviations); layer-norm gains start at one, biases at zero.
    pub fn init(config: &EncoderConfig, rng: &mut ChaCha8Rng) -> Self {
        let h = config.hidden;
        let mut normal = |rows: usize, cols: usize| {
            Array2::from_shape_fn((rows, cols), |_| truncated_normal(rng, INIT_STD))
        };
        let token_emb = normal(config.vocab_size, h);
        let pos_emb = normal(config.max_seq, h);
        let seg_emb = normal(2, h);
        let mut layers = Vec::with_capacity(config.layers);
        for _ in 0..config.layers {
            layers.push(LayerParams {
                wq: normal(h, h),
                wk: normal(h, h),
                wv: normal(h, h),
                wo: normal(h, h),
                w_in: normal(h, config.intermediate),
                w_out: normal(config.intermediate, h),
                ln1_gain: Array1::ones(h),
                ln1_bias: Array1::zeros(h),
                ln2_gain: Array1::ones(h),
                ln2_bias: Array1::zeros(h),
            });
        }
        let head_w = normal(h, config.vocab_size);
        let head_b = Array1::zeros(config.vocab_size);
        Self {
            token_emb,
            pos_emb,
            seg_emb,
            layers,
            head_w,
            head_b,
        }
    }

    /// Zero-filled parameters with the same shapes; gradient container.
    pub fn zeros_like(&self) -> Self {
        Self {
            token_emb: Array2::zeros(self.token_emb.raw_dim()),
            pos_emb: Array2::zeros(self.pos_emb.raw_dim()),
            seg_emb: Array2::zeros(self.seg_emb.raw_dim()),
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    wq: Array2::zeros(l.wq.raw_dim()),
                    wk: Array2::zeros(l.wk.raw_dim()),
                    wv: Array2::zeros(l.wv.raw_dim()),
                    wo: Array2::zeros(l.wo.raw_dim()),
                    w_in: Array2::zeros(l.w_in.raw_dim()),
                    w_out: Array2::zeros(l.w_out.raw_dim()),
                    ln1_gain: Array1::zeros(l.ln1_gain.raw_dim()),
                    ln1_bias: Array1::zeros(l.ln1_bias.raw_dim()),
                    ln2_gain: Array1::zeros(l.ln2_gain.raw_dim()),
                    ln2_bias: Array1::zeros(l.ln2_bias.raw_dim()),
                })
                .collect(),
            head_w: Array2::zeros(self.head_w.raw_dim()),
            head_b: Array1::zeros(self.head_b.raw_dim()),
        }
    }

    /// Visit every tensor as a named flat slice, in a fixed canonical order.
    pub fn for_each_tensor<F: FnMut(String, Vec<usize>, &[f64])>(&self, mut f: F) {
        let arr2 = |name: &str, a: &Array2<f64>, f: &mut F| {
            f(
                name.to_string(),
                a.shape().to_vec(),
                a.as_slice().expect("standard layout"),
            )
        };
        let arr1 = |name: &str, a: &Array1<f64>, f: &mut F| {
            f(
                name.to_string(),
                a.shape().to_vec(),
                a.as_slice().expect("standard layout"),
            )
        };
        arr2("token_embeddings", &self.token_emb, &mut f);
        arr2("position_embeddings", &self.pos_emb, &mut f);
        arr2("segment_embeddings", &self.seg_emb, &mut f);
        for (i, l) in self.layers.iter().enumerate() {
            arr2(&format!("layer{i}.attention.query"), &l.wq, &mut f);
            arr2(&format!("layer{i}.attention.key"), &l.wk, &mut f);
            arr2(&format!("layer{i}.attention.value"), &l.wv, &mut f);
            arr2(&format!("layer{i}.attention.output"), &l.wo, &mut f);
            arr2(&format!("layer{i}.ffn.intermediate"), &l.w_in, &mut f);
            arr2(&format!("layer{i}.ffn.output"), &l.w_out, &mut f);
            arr1(&format!("layer{i}.ln1.gain"), &l.ln1_gain, &mut f);
            arr1(&format!("layer{i}.ln1.bias"), &l.ln1_bias, &mut f);
            arr1(&format!("layer{i}.ln2.gain"), &l.ln2_gain, &mut f);
            arr1(&format!("layer{i}.ln2.bias"), &l.ln2_bias, &mut f);
        }
        arr2("mlm_head.weight", &self.head_w, &mut f);
        arr1("mlm_head.bias", &self.head_b, &mut f);
    }

    pub fn all_finite(&self) -> bool {
        let mut finite = true;
        self.for_each_tensor(|_, _, data| {
            if finite && !data.iter().all(|x| x.is_finite()) {
                finite = false;
            }
        });
        finite
    }
}

fn truncated_normal(rng: &mut ChaCha8Rng, std: f64) -> f64 {
    // Box-Muller, resampling outside two standard deviations
    loop {
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        if z.abs() <= 2.0 {
            return z * std;
        }
    }
}
