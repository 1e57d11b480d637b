//! Skip-gram with negative sampling: plain SGD, linear learning-rate decay,
//! gradient accumulation over a fixed batch length, single-threaded
//! deterministic reference mode.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{EmbedError, EmbeddingModel, WordVocab};
use crate::seed::rng_for;

/// Learning rate floor as a fraction of the starting rate.
pub const LR_FLOOR_FACTOR: f64 = 1e-5;
/// Exponent flattening the unigram distribution for negative sampling.
pub const NEGATIVE_SAMPLING_POWER: f64 = 0.75;

#[derive(Debug, Clone)]
pub struct W2VHyper {
    pub dim: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub window: usize,
    pub negatives: usize,
    pub subsample_threshold: f64,
    pub seed: u64,
}

impl Default for W2VHyper {
    fn default() -> Self {
        Self {
            dim: 300,
            learning_rate: 0.001,
            batch_size: 128,
            epochs: 30,
            window: 8,
            negatives: 5,
            subsample_threshold: 1e-4,
            seed: 42,
        }
    }
}

impl W2VHyper {
    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.dim < 1 {
            return Err(EmbedError::InvalidHyper("dim must be >= 1".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(EmbedError::InvalidHyper("learning_rate must be > 0".into()));
        }
        if self.epochs < 1 {
            return Err(EmbedError::InvalidHyper("epochs must be >= 1".into()));
        }
        if self.window < 1 {
            return Err(EmbedError::InvalidHyper("window must be >= 1".into()));
        }
        if self.negatives < 1 {
            return Err(EmbedError::InvalidHyper("negatives must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(EmbedError::InvalidHyper("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Cumulative unigram^0.75 table; sampling is a binary search over it.
struct NegativeTable {
    cumulative: Vec<f64>,
}

impl NegativeTable {
    fn new(vocab: &WordVocab) -> Self {
        let mut cumulative = Vec::with_capacity(vocab.len());
        let mut acc = 0.0;
        for id in 0..vocab.len() {
            acc += (vocab.count(id) as f64).powf(NEGATIVE_SAMPLING_POWER);
            cumulative.push(acc);
        }
        Self { cumulative }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let total = *self.cumulative.last().expect("nonempty vocab");
        let x: f64 = rng.gen_range(0.0..total);
        self.cumulative.partition_point(|&c| c <= x)
    }
}

/// Loss of one (center, context, negatives) example:
/// -log sigma(u_o . v_c) - sum_n log sigma(-u_n . v_c).
pub fn pair_loss(model: &EmbeddingModel, center: usize, context: usize, negatives: &[usize]) -> f64 {
    let vc = model.input_row(center);
    let dot = |row: &[f64]| row.iter().zip(vc).map(|(a, b)| a * b).sum::<f64>();
    let mut loss = -log_sigmoid(dot(model.output_row(context)));
    for &n in negatives {
        loss += -log_sigmoid(-dot(model.output_row(n)));
    }
    loss
}

fn log_sigmoid(x: f64) -> f64 {
    // numerically stable log(sigma(x))
    if x >= 0.0 {
        -(1.0 + (-x).exp()).ln()
    } else {
        x - (1.0 + x.exp()).ln()
    }
}

/// Analytic gradients of [`pair_loss`] with respect to the center input row
/// and each output row involved. Returned as (d_center, [(row_id, d_row)]).
pub fn pair_gradients(
    model: &EmbeddingModel,
    center: usize,
    context: usize,
    negatives: &[usize],
) -> (Vec<f64>, Vec<(usize, Vec<f64>)>) {
    let dim = model.dim;
    let vc = model.input_row(center);
    let mut d_center = vec![0.0; dim];
    let mut d_outputs = Vec::with_capacity(1 + negatives.len());

    let mut accumulate = |row_id: usize, label: f64, d_center: &mut [f64]| {
        let row = model.output_row(row_id);
        let dot = row.iter().zip(vc).map(|(a, b)| a * b).sum::<f64>();
        // d/d(dot) of the loss term is sigma(dot) - label
        let g = sigmoid(dot) - label;
        for d in 0..dim {
            d_center[d] += g * row[d];
        }
        let d_row: Vec<f64> = vc.iter().map(|v| g * v).collect();
        d_outputs.push((row_id, d_row));
    };

    accumulate(context, 1.0, &mut d_center);
    for &n in negatives {
        accumulate(n, 0.0, &mut d_center);
    }
    (d_center, d_outputs)
}

/// Train skip-gram embeddings. Input rows initialize uniform in
/// (-0.5/dim, 0.5/dim), output rows start at zero; gradients accumulate over
/// `batch_size` (center, context) examples and apply with the decayed rate.
pub fn train_skipgram<S: AsRef<str>>(
    sentences: &[Vec<S>],
    vocab: &WordVocab,
    hyper: &W2VHyper,
) -> Result<EmbeddingModel, EmbedError> {
    hyper.validate()?;
    let dim = hyper.dim;
    let v = vocab.len();

    let mut init_rng = rng_for(hyper.seed, "w2v-init");
    let mut input = vec![0.0f64; v * dim];
    let half = 0.5 / dim as f64;
    for x in input.iter_mut() {
        *x = init_rng.gen_range(-half..half);
    }
    let mut model = EmbeddingModel {
        vocab: vocab.clone(),
        dim,
        input,
        output: vec![0.0f64; v * dim],
        normalized: false,
    };

    // id sequences; out-of-vocab tokens drop out before windowing
    let id_sentences: Vec<Vec<usize>> = sentences
        .iter()
        .map(|s| s.iter().filter_map(|t| vocab.id_of(t.as_ref())).collect())
        .collect();
    let total_tokens: u64 = id_sentences.iter().map(|s| s.len() as u64).sum();
    if total_tokens == 0 {
        return Err(EmbedError::EmptyVocab(vocab.min_count));
    }

    let table = NegativeTable::new(vocab);
    let mut rng = rng_for(hyper.seed, "w2v-train");
    let schedule_total = (hyper.epochs as u64 * total_tokens) as f64;
    let floor = hyper.learning_rate * LR_FLOOR_FACTOR;

    let mut batch: Vec<(usize, Vec<f64>)> = Vec::new(); // input-row deltas
    let mut batch_out: Vec<(usize, Vec<f64>)> = Vec::new(); // output-row deltas
    let mut in_batch = 0usize;
    let mut tokens_seen = 0u64;
    let mut step = 0usize;
    let mut lr = hyper.learning_rate;

    for epoch in 0..hyper.epochs {
        for sentence in &id_sentences {
            // subsampling of frequent tokens, word2vec keep probability
            let kept: Vec<usize> = sentence
                .iter()
                .copied()
                .filter(|&id| {
                    tokens_seen += 1;
                    if hyper.subsample_threshold <= 0.0 {
                        return true;
                    }
                    let freq = vocab.count(id) as f64 / vocab.total_tokens() as f64;
                    let keep = ((hyper.subsample_threshold / freq).sqrt()
                        + hyper.subsample_threshold / freq)
                        .min(1.0);
                    rng.gen_range(0.0..1.0) < keep
                })
                .collect();
            let lr_progress = 1.0 - tokens_seen as f64 / schedule_total;
            lr = (hyper.learning_rate * lr_progress).max(floor);

            for (pos, &center) in kept.iter().enumerate() {
                let lo = pos.saturating_sub(hyper.window);
                let hi = (pos + hyper.window + 1).min(kept.len());
                for ctx_pos in lo..hi {
                    if ctx_pos == pos {
                        continue;
                    }
                    let context = kept[ctx_pos];
                    let negatives: Vec<usize> = (0..hyper.negatives)
                        .map(|_| table.sample(&mut rng))
                        .filter(|&n| n != context)
                        .collect();
                    let (d_center, d_outputs) =
                        pair_gradients(&model, center, context, &negatives);
                    batch.push((center, d_center));
                    batch_out.extend(d_outputs);
                    in_batch += 1;
                    if in_batch == hyper.batch_size {
                        step += 1;
                        apply_batch(&mut model, &mut batch, &mut batch_out, lr);
                        in_batch = 0;
                        if !weights_finite(&model) {
                            return Err(EmbedError::Diverged { epoch, step });
                        }
                    }
                }
            }
        }
    }
    if in_batch > 0 {
        step += 1;
        apply_batch(&mut model, &mut batch, &mut batch_out, lr);
        if !weights_finite(&model) {
            return Err(EmbedError::Diverged {
                epoch: hyper.epochs,
                step,
            });
        }
    }
    Ok(model)
}

fn apply_batch(
    model: &mut EmbeddingModel,
    batch: &mut Vec<(usize, Vec<f64>)>,
    batch_out: &mut Vec<(usize, Vec<f64>)>,
    lr: f64,
) {
    let dim = model.dim;
    for (id, grad) in batch.drain(..) {
        let row = &mut model.input[id * dim..(id + 1) * dim];
        for (x, g) in row.iter_mut().zip(&grad) {
            *x -= lr * g;
        }
    }
    for (id, grad) in batch_out.drain(..) {
        let row = &mut model.output[id * dim..(id + 1) * dim];
        for (x, g) in row.iter_mut().zip(&grad) {
            *x -= lr * g;
        }
    }
}

fn weights_finite(model: &EmbeddingModel) -> bool {
    model.input.iter().all(|x| x.is_finite()) && model.output.iter().all(|x| x.is_finite())
}

/// Mean pair loss over the full (center, context) enumeration with negatives
/// drawn from a fixed-seed stream. Independent of training state mutation, so
/// before/after comparisons are meaningful.
pub fn evaluate_loss<S: AsRef<str>>(
    model: &EmbeddingModel,
    sentences: &[Vec<S>],
    hyper: &W2VHyper,
    eval_seed: u64,
) -> f64 {
    let table = NegativeTable::new(&model.vocab);
    let mut rng = rng_for(eval_seed, "w2v-eval");
    let mut total = 0.0;
    let mut pairs = 0u64;
    for sentence in sentences {
        let ids: Vec<usize> = sentence
            .iter()
            .filter_map(|t| model.vocab.id_of(t.as_ref()))
            .collect();
        for (pos, &center) in ids.iter().enumerate() {
            let lo = pos.saturating_sub(hyper.window);
            let hi = (pos + hyper.window + 1).min(ids.len());
            for ctx_pos in lo..hi {
                if ctx_pos == pos {
                    continue;
                }
                let negatives: Vec<usize> = (0..hyper.negatives)
                    .map(|_| table.sample(&mut rng))
                    .filter(|&n| n != ids[ctx_pos])
                    .collect();
                total += pair_loss(model, center, ids[ctx_pos], &negatives);
                pairs += 1;
            }
        }
    }
    if pairs == 0 {
        0.0
    } else {
        total / pairs as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::build_vocab;

    fn tiny_corpus() -> Vec<Vec<String>> {
        let mut sentences = Vec::new();
        for _ in 0..30 {
            sentences.push(
                "zinc coating protects steel from corrosion"
                    .split_whitespace()
                    .map(str::to_string)
                    .collect(),
            );
            sentences.push(
                "cerium salts inhibit corrosion of alloys"
                    .split_whitespace()
                    .map(str::to_string)
                    .collect(),
            );
        }
        sentences
    }

    fn tiny_hyper() -> W2VHyper {
        W2VHyper {
            dim: 8,
            learning_rate: 0.05,
            batch_size: 16,
            epochs: 3,
            window: 3,
            negatives: 3,
            subsample_threshold: 0.0,
            seed: 7,
        }
    }

    #[test]
    fn zero_epochs_rejected() {
        let hyper = W2VHyper {
            epochs: 0,
            ..tiny_hyper()
        };
        let corpus = tiny_corpus();
        let vocab = build_vocab(&corpus, 1).unwrap();
        assert!(matches!(
            train_skipgram(&corpus, &vocab, &hyper),
            Err(EmbedError::InvalidHyper(_))
        ));
    }

    #[test]
    fn loss_decreases_after_training() {
        let corpus = tiny_corpus();
        let vocab = build_vocab(&corpus, 1).unwrap();
        let hyper = tiny_hyper();
        let trained = train_skipgram(&corpus, &vocab, &hyper).unwrap();
        let mut initial = trained.clone();
        // reconstruct the initialization to evaluate the starting loss
        let mut init_rng = rng_for(hyper.seed, "w2v-init");
        let half = 0.5 / hyper.dim as f64;
        for x in initial.input.iter_mut() {
            *x = init_rng.gen_range(-half..half);
        }
        initial.output.fill(0.0);
        let before = evaluate_loss(&initial, &corpus, &hyper, 99);
        let after = evaluate_loss(&trained, &corpus, &hyper, 99);
        assert!(
            after < before,
            "loss should decrease: before={before} after={after}"
        );
    }

    #[test]
    fn same_seed_bit_identical() {
        let corpus = tiny_corpus();
        let vocab = build_vocab(&corpus, 1).unwrap();
        let hyper = tiny_hyper();
        let a = train_skipgram(&corpus, &vocab, &hyper).unwrap();
        let b = train_skipgram(&corpus, &vocab, &hyper).unwrap();
        assert_eq!(a.input, b.input);
        assert_eq!(a.output, b.output);
    }

    #[test]
    fn different_seed_differs() {
        let corpus = tiny_corpus();
        let vocab = build_vocab(&corpus, 1).unwrap();
        let a = train_skipgram(&corpus, &vocab, &tiny_hyper()).unwrap();
        let hyper_b = W2VHyper {
            seed: 8,
            ..tiny_hyper()
        };
        let b = train_skipgram(&corpus, &vocab, &hyper_b).unwrap();
        assert_ne!(a.input, b.input);
    }

    #[test]
    fn gradients_match_finite_differences() {
        // 10-word, dim-4 model with pseudorandom weights
        let sentences: Vec<Vec<String>> = vec![(0..10).map(|i| format!("w{i}")).collect()];
        let vocab = build_vocab(&sentences, 1).unwrap();
        let dim = 4;
        let mut model = EmbeddingModel {
            vocab,
            dim,
            input: vec![0.0; 10 * dim],
            output: vec![0.0; 10 * dim],
            normalized: false,
        };
        let mut rng = rng_for(3, "fd-check");
        for x in model.input.iter_mut().chain(model.output.iter_mut()) {
            *x = rng.gen_range(-0.8..0.8);
        }
        let center = 2;
        let context = 5;
        let negatives = [0, 7, 9];
        let (d_center, d_outputs) = pair_gradients(&model, center, context, &negatives);
        let eps = 1e-6;
        let check = |analytic: f64, numeric: f64| {
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            assert!(
                ((analytic - numeric) / denom).abs() < 1e-4,
                "analytic {analytic} vs numeric {numeric}"
            );
        };
        for d in 0..dim {
            let mut plus = model.clone();
            plus.input[center * dim + d] += eps;
            let mut minus = model.clone();
            minus.input[center * dim + d] -= eps;
            let numeric = (pair_loss(&plus, center, context, &negatives)
                - pair_loss(&minus, center, context, &negatives))
                / (2.0 * eps);
            check(d_center[d], numeric);
        }
        for (row_id, grad) in &d_outputs {
            for d in 0..dim {
                let mut plus = model.clone();
                plus.output[row_id * dim + d] += eps;
                let mut minus = model.clone();
                minus.output[row_id * dim + d] -= eps;
                let numeric = (pair_loss(&plus, center, context, &negatives)
                    - pair_loss(&minus, center, context, &negatives))
                    / (2.0 * eps);
                check(grad[d], numeric);
            }
        }
    }
}
