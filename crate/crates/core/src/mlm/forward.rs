//! Encoder forward pass: summed token/position/segment embeddings, then per
//! layer multi-head self-attention with padding masked out of the score
//! softmax, residual + layer norm, GELU feed-forward, residual + layer norm,
//! and finally the MLM output head. Deterministic given params and input.

use ndarray::{s, Array1, Array2, Array3};

use super::math::{gelu, layer_norm_row, softmax_in_place};
use super::{EncoderConfig, EncoderParams, MlmError, ATTENTION_MASK_BIAS};

/// Cached intermediates of one layer, kept for the backward pass.
pub struct LayerCache {
    pub x_in: Array2<f64>,
    pub q: Array2<f64>,
    pub k: Array2<f64>,
    pub v: Array2<f64>,
    /// Per-head attention probabilities, heads x seq x seq.
    pub attn: Array3<f64>,
    pub ctx: Array2<f64>,
    pub r1: Array2<f64>,
    pub xhat1: Array2<f64>,
    pub rstd1: Array1<f64>,
    pub n1: Array2<f64>,
    pub f1: Array2<f64>,
    pub g: Array2<f64>,
    pub r2: Array2<f64>,
    pub xhat2: Array2<f64>,
    pub rstd2: Array1<f64>,
    pub n2: Array2<f64>,
}

/// Everything the backward pass needs.
pub struct ForwardCache {
    pub ids: Vec<u32>,
    pub attention_mask: Vec<u8>,
    pub embedded: Array2<f64>,
    pub layers: Vec<LayerCache>,
    pub logits: Array2<f64>,
}

/// Validate ids and lengths against the config.
fn check_input(
    config: &EncoderConfig,
    ids: &[u32],
    attention_mask: &[u8],
) -> Result<(), MlmError> {
    if ids.is_empty() {
        return Err(MlmError::EmptyInput("encoder_forward"));
    }
    if ids.len() != attention_mask.len() {
        return Err(MlmError::Shape {
            tensor: "attention_mask".into(),
            expected: format!("{}", ids.len()),
            got: format!("{}", attention_mask.len()),
        });
    }
    if ids.len() > config.max_seq {
        return Err(MlmError::Shape {
            tensor: "input_ids".into(),
            expected: format!("len <= {}", config.max_seq),
            got: format!("{}", ids.len()),
        });
    }
    if let Some(&bad) = ids.iter().find(|&&id| id as usize >= config.vocab_size) {
        return Err(MlmError::Shape {
            tensor: "input_ids".into(),
            expected: format!("id < {}", config.vocab_size),
            got: format!("{bad}"),
        });
    }
    Ok(())
}

/// Forward pass returning the full cache.
pub fn forward_cached(
    config: &EncoderConfig,
    params: &EncoderParams,
    ids: &[u32],
    attention_mask: &[u8],
) -> Result<ForwardCache, MlmError> {
    check_input(config, ids, attention_mask)?;
    let seq = ids.len();
    let h = config.hidden;
    let heads = config.heads;
    let dh = config.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();

    let mut embedded = Array2::<f64>::zeros((seq, h));
    for (s_idx, &id) in ids.iter().enumerate() {
        let tok = params.token_emb.row(id as usize);
        let pos = params.pos_emb.row(s_idx);
        let seg = params.seg_emb.row(0);
        for d in 0..h {
            embedded[[s_idx, d]] = tok[d] + pos[d] + seg[d];
        }
    }

    let mut x = embedded.clone();
    let mut layer_caches = Vec::with_capacity(config.layers);
    for layer in &params.layers {
        let x_in = x.clone();
        let q = x_in.dot(&layer.wq);
        let k = x_in.dot(&layer.wk);
        let v = x_in.dot(&layer.wv);

        let mut attn = Array3::<f64>::zeros((heads, seq, seq));
        let mut ctx = Array2::<f64>::zeros((seq, h));
        for head in 0..heads {
            let cols = s![.., head * dh..(head + 1) * dh];
            let qh = q.slice(cols);
            let kh = k.slice(cols);
            let vh = v.slice(cols);
            let mut scores = qh.dot(&kh.t());
            scores *= scale;
            for key_pos in 0..seq {
                if attention_mask[key_pos] == 0 {
                    for row in 0..seq {
                        scores[[row, key_pos]] += ATTENTION_MASK_BIAS;
                    }
                }
            }
            for mut row in scores.rows_mut() {
                softmax_in_place(row.as_slice_mut().expect("contiguous row"));
            }
            let ctx_h = scores.dot(&vh);
            ctx.slice_mut(cols).assign(&ctx_h);
            attn.slice_mut(s![head, .., ..]).assign(&scores);
        }

        let attn_out = ctx.dot(&layer.wo);
        let r1 = &x_in + &attn_out;
        let mut xhat1 = Array2::<f64>::zeros((seq, h));
        let mut rstd1 = Array1::<f64>::zeros(seq);
        let mut n1 = Array2::<f64>::zeros((seq, h));
        for row in 0..seq {
            let (xhat, rstd) = layer_norm_row(r1.row(row));
            for d in 0..h {
                n1[[row, d]] = layer.ln1_gain[d] * xhat[d] + layer.ln1_bias[d];
            }
            xhat1.row_mut(row).assign(&xhat);
            rstd1[row] = rstd;
        }

        let f1 = n1.dot(&layer.w_in);
        let g = f1.mapv(gelu);
        let f2 = g.dot(&layer.w_out);
        let r2 = &n1 + &f2;
        let mut xhat2 = Array2::<f64>::zeros((seq, h));
        let mut rstd2 = Array1::<f64>::zeros(seq);
        let mut n2 = Array2::<f64>::zeros((seq, h));
        for row in 0..seq {
            let (xhat, rstd) = layer_norm_row(r2.row(row));
            for d in 0..h {
                n2[[row, d]] = layer.ln2_gain[d] * xhat[d] + layer.ln2_bias[d];
            }
            xhat2.row_mut(row).assign(&xhat);
            rstd2[row] = rstd;
        }

        x = n2.clone();
        layer_caches.push(LayerCache {
            x_in,
            q,
            k,
            v,
            attn,
            ctx,
            r1,
            xhat1,
            rstd1,
            n1,
            f1,
            g,
            r2,
            xhat2,
            rstd2,
            n2,
        });
    }

    let head_w = effective_head_weight(config, params);
    let mut logits = x.dot(&head_w);
    for mut row in logits.rows_mut() {
        row += &params.head_b;
    }
    Ok(ForwardCache {
        ids: ids.to_vec(),
        attention_mask: attention_mask.to_vec(),
        embedded,
        layers: layer_caches,
        logits,
    })
}

/// MLM head weight, either the dedicated matrix or the tied token embedding.
pub fn effective_head_weight(config: &EncoderConfig, params: &EncoderParams) -> Array2<f64> {
    if config.tie_embeddings {
        params.token_emb.t().to_owned()
    } else {
        params.head_w.clone()
    }
}

/// Logits (seq_len x vocab_size) for one example.
pub fn encoder_forward(
    config: &EncoderConfig,
    params: &EncoderParams,
    ids: &[u32],
    attention_mask: &[u8],
) -> Result<Array2<f64>, MlmError> {
    forward_cached(config, params, ids, attention_mask).map(|c| c.logits)
}

/// Mean negative log-probability of the true id over masked positions.
pub fn mlm_loss(logits: &Array2<f64>, labels: &[Option<u32>]) -> Result<f64, MlmError> {
    if logits.nrows() != labels.len() {
        return Err(MlmError::Shape {
            tensor: "labels".into(),
            expected: format!("{}", logits.nrows()),
            got: format!("{}", labels.len()),
        });
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (row, label) in logits.rows().into_iter().zip(labels) {
        if let Some(true_id) = label {
            let probs = super::math::softmax(row.as_slice().expect("contiguous"))?;
            total += -(probs[*true_id as usize].max(f64::MIN_POSITIVE)).ln();
            count += 1;
        }
    }
    if count == 0 {
        return Err(MlmError::NoMaskedPositions);
    }
    Ok(total / count as f64)
}
