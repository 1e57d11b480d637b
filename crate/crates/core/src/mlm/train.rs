//! MLM training loop (adaptive moment estimation, bias-corrected, no weight
//! decay), heldout perplexity, and mask-filling queries.

use rand_chacha::ChaCha8Rng;

use super::backward::backward;
use super::forward::{encoder_forward, forward_cached};
use super::masking::{mask_batch, MaskedExample};
use super::math::softmax;
use super::{EncoderConfig, EncoderParams, MlmError};
use crate::seed::rng_for;
use crate::subword::{encode, EncodedSequence, WordPieceVocab, MASK};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct MlmHyper {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for MlmHyper {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 32,
            learning_rate: 1e-4,
            seed: 42,
        }
    }
}

/// One training-log row; written to CSV as epoch, step, loss,
/// heldout_perplexity.
#[derive(Debug, Clone)]
pub struct TrainLogRow {
    pub epoch: usize,
    pub step: usize,
    pub loss: f64,
    pub heldout_perplexity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub token_id: u32,
    pub probability: f64,
    pub rank: usize,
}

pub struct TrainedMlm {
    pub params: EncoderParams,
    pub log: Vec<TrainLogRow>,
}

struct AdamState {
    m: EncoderParams,
    v: EncoderParams,
    step: u64,
}

impl AdamState {
    fn new(template: &EncoderParams) -> Self {
        Self {
            m: template.zeros_like(),
            v: template.zeros_like(),
            step: 0,
        }
    }

    fn update(&mut self, params: &mut EncoderParams, grads: &EncoderParams, lr: f64) {
        self.step += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.step as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.step as i32);
        let mut visit = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..p.len() {
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p[i] -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
            }
        };
        visit_pairs(params, grads, &mut self.m, &mut self.v, &mut visit);
    }
}

/// Walk (params, grads, m, v) slices together in canonical order.
fn visit_pairs<F: FnMut(&mut [f64], &[f64], &mut [f64], &mut [f64])>(
    params: &mut EncoderParams,
    grads: &EncoderParams,
    m: &mut EncoderParams,
    v: &mut EncoderParams,
    f: &mut F,
) {
    macro_rules! visit2 {
        ($field:ident) => {
            f(
                params.$field.as_slice_mut().unwrap(),
                grads.$field.as_slice().unwrap(),
                m.$field.as_slice_mut().unwrap(),
                v.$field.as_slice_mut().unwrap(),
            )
        };
    }
    macro_rules! visit_layer {
        ($i:expr, $field:ident) => {
            f(
                params.layers[$i].$field.as_slice_mut().unwrap(),
                grads.layers[$i].$field.as_slice().unwrap(),
                m.layers[$i].$field.as_slice_mut().unwrap(),
                v.layers[$i].$field.as_slice_mut().unwrap(),
            )
        };
    }
    visit2!(token_emb);
    visit2!(pos_emb);
    visit2!(seg_emb);
    for i in 0..params.layers.len() {
        visit_layer!(i, wq);
        visit_layer!(i, wk);
        visit_layer!(i, wv);
        visit_layer!(i, wo);
        visit_layer!(i, w_in);
        visit_layer!(i, w_out);
        visit_layer!(i, ln1_gain);
        visit_layer!(i, ln1_bias);
        visit_layer!(i, ln2_gain);
        visit_layer!(i, ln2_bias);
    }
    visit2!(head_w);
    visit2!(head_b);
}

fn scale_grads(grads: &mut EncoderParams, factor: f64) {
    let scale = |slice: &mut [f64]| {
        for x in slice {
            *x *= factor;
        }
    };
    scale(grads.token_emb.as_slice_mut().unwrap());
    scale(grads.pos_emb.as_slice_mut().unwrap());
    scale(grads.seg_emb.as_slice_mut().unwrap());
    for l in &mut grads.layers {
        scale(l.wq.as_slice_mut().unwrap());
        scale(l.wk.as_slice_mut().unwrap());
        scale(l.wv.as_slice_mut().unwrap());
        scale(l.wo.as_slice_mut().unwrap());
        scale(l.w_in.as_slice_mut().unwrap());
        scale(l.w_out.as_slice_mut().unwrap());
        scale(l.ln1_gain.as_slice_mut().unwrap());
        scale(l.ln1_bias.as_slice_mut().unwrap());
        scale(l.ln2_gain.as_slice_mut().unwrap());
        scale(l.ln2_bias.as_slice_mut().unwrap());
    }
    scale(grads.head_w.as_slice_mut().unwrap());
    scale(grads.head_b.as_slice_mut().unwrap());
}

/// Encode tokenized sentences for training: one sequence per sentence,
/// unpadded (CLS + pieces + SEP), truncated at max_seq.
pub fn encode_corpus<S: AsRef<str>>(
    vocab: &WordPieceVocab,
    sentences: &[Vec<S>],
    max_seq: usize,
) -> Result<Vec<EncodedSequence>, MlmError> {
    let mut out = Vec::with_capacity(sentences.len());
    for sentence in sentences {
        // length = pieces + CLS/SEP, capped; encode pads to its max_len so
        // pass the natural length to keep sequences dense
        let probe = encode(vocab, sentence, max_seq)?;
        let natural = probe.real_len();
        if natural == max_seq {
            out.push(probe);
        } else {
            out.push(encode(vocab, sentence, natural.max(3))?);
        }
    }
    Ok(out)
}

/// Train by stochastic gradient descent on the masking objective; masks
/// resample every epoch, heldout perplexity evaluates on fixed-seed masks.
/// `warm_start` continues from existing parameters (the two-stage scheme:
/// general-corpus stage then domain-corpus stage reuse this entry).
pub fn train_mlm(
    sequences: &[EncodedSequence],
    config: &EncoderConfig,
    hyper: &MlmHyper,
    warm_start: Option<EncoderParams>,
    heldout: Option<&[MaskedExample]>,
) -> Result<TrainedMlm, MlmError> {
    config.validate()?;
    let mut params = match warm_start {
        Some(p) => p,
        None => EncoderParams::init(config, &mut rng_for(hyper.seed, "mlm-init")),
    };
    let mut log = Vec::new();
    if hyper.epochs == 0 {
        return Ok(TrainedMlm { params, log });
    }
    let mut mask_rng = rng_for(hyper.seed, "mlm-mask");
    let mut step = 0usize;
    let mut last_good = params.clone();
    let mut adam = AdamState::new(&params);
    for epoch in 0..hyper.epochs {
        let examples = mask_batch(sequences, config, &mut mask_rng);
        let mut epoch_loss = 0.0;
        let mut epoch_masked = 0usize;
        for batch in examples.chunks(hyper.batch_size.max(1)) {
            let mut grads = params.zeros_like();
            let mut batch_loss = 0.0;
            let mut batch_masked = 0usize;
            for example in batch {
                let cache = forward_cached(
                    config,
                    &params,
                    &example.input_ids,
                    &example.attention_mask,
                )?;
                let (loss_sum, masked) =
                    backward(config, &params, &cache, &example.labels, &mut grads)?;
                batch_loss += loss_sum;
                batch_masked += masked;
            }
            if batch_masked == 0 {
                continue;
            }
            scale_grads(&mut grads, 1.0 / batch_masked as f64);
            step += 1;
            adam.update(&mut params, &grads, hyper.learning_rate);
            epoch_loss += batch_loss;
            epoch_masked += batch_masked;
            if !params.all_finite() {
                return Err(MlmError::Diverged {
                    epoch,
                    step,
                    last_good: Box::new(last_good),
                });
            }
        }
        let mean_loss = if epoch_masked == 0 {
            f64::NAN
        } else {
            epoch_loss / epoch_masked as f64
        };
        let pp = match heldout {
            Some(h) => Some(perplexity(config, &params, h)?),
            None => None,
        };
        log.push(TrainLogRow {
            epoch,
            step,
            loss: mean_loss,
            heldout_perplexity: pp,
        });
        last_good = params.clone();
    }
    Ok(TrainedMlm { params, log })
}

/// Perplexity 2^H over pre-masked heldout examples, H the base-2
/// cross-entropy per evaluated masked position.
pub fn perplexity(
    config: &EncoderConfig,
    params: &EncoderParams,
    heldout: &[MaskedExample],
) -> Result<f64, MlmError> {
    let mut total_nats = 0.0;
    let mut count = 0usize;
    for example in heldout {
        let logits = encoder_forward(config, params, &example.input_ids, &example.attention_mask)?;
        for (row, label) in example.labels.iter().enumerate() {
            if let Some(true_id) = label {
                let probs = softmax(logits.row(row).as_slice().expect("contiguous"))?;
                total_nats += -(probs[*true_id as usize].max(f64::MIN_POSITIVE)).ln();
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(MlmError::NoMaskedPositions);
    }
    // 2^(H bits) equals e^(H nats)
    Ok((total_nats / count as f64).exp())
}

/// Mask a heldout set once with a fixed seed.
pub fn mask_heldout(
    sequences: &[EncodedSequence],
    config: &EncoderConfig,
    seed: u64,
) -> Vec<MaskedExample> {
    let mut rng: ChaCha8Rng = rng_for(seed, "mlm-heldout-mask");
    mask_batch(sequences, config, &mut rng)
}

/// Fill a template containing exactly one literal "[MASK]": top-k
/// predictions at the mask position by probability, ties by ascending id,
/// ranks 1-based.
pub fn fill_mask(
    config: &EncoderConfig,
    params: &EncoderParams,
    vocab: &WordPieceVocab,
    template: &str,
    k: usize,
) -> Result<Vec<Prediction>, MlmError> {
    let occurrences = template.matches("[MASK]").count();
    if occurrences != 1 {
        return Err(MlmError::MaskCount(occurrences));
    }
    let lex = crate::chemtok::Lexicons::bundled();
    let sentences =
        crate::chemtok::process_text(template, crate::chemtok::PlaceholderPolicy::Off, &lex);
    let tokens: Vec<String> = sentences.into_iter().flatten().collect();
    // encode at full length (words may split into several pieces), then trim
    // the padded tail before the forward pass
    let encoded = encode(vocab, &tokens, config.max_seq)?;
    let attended = encoded.real_len();
    let ids = &encoded.ids[..attended];
    let attention_mask = &encoded.attention_mask[..attended];
    let mask_pos = ids
        .iter()
        .position(|&id| id == MASK)
        .ok_or(MlmError::MaskCount(0))?;
    let logits = encoder_forward(config, params, ids, attention_mask)?;
    let probs = softmax(logits.row(mask_pos).as_slice().expect("contiguous"))?;
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| {
        probs[b]
            .partial_cmp(&probs[a])
            .expect("finite probabilities")
            .then_with(|| a.cmp(&b))
    });
    Ok(order
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, id)| Prediction {
            token_id: id as u32,
            probability: probs[id],
            rank: i + 1,
        })
        .collect())
}

/// The row of probabilities used by `fill_mask`, exposed for the argmax
/// equivalence check.
pub fn mask_position_probabilities(
    config: &EncoderConfig,
    params: &EncoderParams,
    vocab: &WordPieceVocab,
    template: &str,
) -> Result<Vec<f64>, MlmError> {
    let predictions = fill_mask(config, params, vocab, template, config.vocab_size)?;
    let mut probs = vec![0.0; config.vocab_size];
    for p in predictions {
        probs[p.token_id as usize] = p.probability;
    }
    Ok(probs)
}
