//! Training-example corruption: choose round(mask_rate x maskable) positions
//! per sequence uniformly without replacement, then split them 80/10/10 into
//! MASK replacement, random replacement and keep-as-is by largest remainder.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::EncoderConfig;
use crate::subword::{EncodedSequence, CLS, PAD, SEP, SPECIALS};

/// One corrupted training example. `labels` holds the original id exactly at
/// chosen positions and `None` elsewhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskedExample {
    pub input_ids: Vec<u32>,
    pub attention_mask: Vec<u8>,
    pub labels: Vec<Option<u32>>,
}

impl MaskedExample {
    pub fn masked_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_some()).count()
    }
}

/// Corrupt a batch of encoded sequences. Sequences with zero maskable
/// positions (only CLS/SEP/PAD) are skipped with a warning. PAD, CLS and SEP
/// positions are never chosen.
pub fn mask_batch(
    sequences: &[EncodedSequence],
    config: &EncoderConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<MaskedExample> {
    let mut out = Vec::with_capacity(sequences.len());
    for seq in sequences {
        let maskable: Vec<usize> = seq
            .ids
            .iter()
            .enumerate()
            .filter(|&(i, &id)| seq.attention_mask[i] == 1 && id != PAD && id != CLS && id != SEP)
            .map(|(i, _)| i)
            .collect();
        if maskable.is_empty() {
            log::warn!("sequence of only special tokens skipped by masking");
            continue;
        }
        let n_chosen = ((config.mask_rate * maskable.len() as f64).round() as usize)
            .min(maskable.len());
        let chosen = sample_without_replacement(&maskable, n_chosen, rng);
        let (n_mask, n_random, _n_keep) = corruption_split(
            n_chosen,
            config.mask_token_fraction,
            config.random_token_fraction,
        );

        let mut input_ids = seq.ids.clone();
        let mut labels = vec![None; seq.ids.len()];
        for (k, &pos) in chosen.iter().enumerate() {
            labels[pos] = Some(seq.ids[pos]);
            if k < n_mask {
                input_ids[pos] = crate::subword::MASK;
            } else if k < n_mask + n_random {
                input_ids[pos] = random_non_special(config.vocab_size, rng);
            }
            // remaining chosen positions keep the original id
        }
        out.push(MaskedExample {
            input_ids,
            attention_mask: seq.attention_mask.clone(),
            labels,
        });
    }
    out
}

/// Uniform sample of `n` positions without replacement (partial
/// Fisher-Yates); the returned order is the random draw order.
fn sample_without_replacement(
    pool: &[usize],
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let mut pool = pool.to_vec();
    let n = n.min(pool.len());
    for k in 0..n {
        let j = rng.gen_range(k..pool.len());
        pool.swap(k, j);
    }
    pool.truncate(n);
    pool
}

/// Largest-remainder apportionment of `n` chosen positions into
/// (mask, random, keep) counts; remainder ties resolve mask > random > keep.
pub fn corruption_split(n: usize, mask_fraction: f64, random_fraction: f64) -> (usize, usize, usize) {
    let keep_fraction = (1.0 - mask_fraction - random_fraction).max(0.0);
    let exact = [
        n as f64 * mask_fraction,
        n as f64 * random_fraction,
        n as f64 * keep_fraction,
    ];
    let mut counts = [
        exact[0].floor() as usize,
        exact[1].floor() as usize,
        exact[2].floor() as usize,
    ];
    let mut leftover = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap().then_with(|| a.cmp(&b))
    });
    for idx in order {
        if leftover == 0 {
            break;
        }
        counts[idx] += 1;
        leftover -= 1;
    }
    (counts[0], counts[1], counts[2])
}

fn random_non_special(vocab_size: usize, rng: &mut ChaCha8Rng) -> u32 {
    rng.gen_range(SPECIALS.len() as u32..vocab_size as u32)
}
