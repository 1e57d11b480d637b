//! Reverse-mode gradients of the masked-language-modeling loss through the
//! forward contract. Gradients of one example accumulate as raw sums over its
//! masked positions; the trainer divides by the batch-wide masked count.

use ndarray::{s, Array1, Array2};

use super::forward::{effective_head_weight, ForwardCache};
use super::math::{gelu_grad, softmax_in_place};
use super::{EncoderConfig, EncoderParams, MlmError};

/// Backpropagate one example. Returns (summed cross-entropy, masked count);
/// gradients add into `grads`.
pub fn backward(
    config: &EncoderConfig,
    params: &EncoderParams,
    cache: &ForwardCache,
    labels: &[Option<u32>],
    grads: &mut EncoderParams,
) -> Result<(f64, usize), MlmError> {
    let seq = cache.ids.len();
    if labels.len() != seq {
        return Err(MlmError::Shape {
            tensor: "labels".into(),
            expected: format!("{seq}"),
            got: format!("{}", labels.len()),
        });
    }
    let h = config.hidden;
    let heads = config.heads;
    let dh = config.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();

    // d(loss sum)/d(logits): softmax minus one-hot at masked rows
    let mut dlogits = Array2::<f64>::zeros((seq, config.vocab_size));
    let mut loss_sum = 0.0;
    let mut masked = 0usize;
    for (row, label) in labels.iter().enumerate() {
        if let Some(true_id) = label {
            let mut probs: Vec<f64> = cache.logits.row(row).to_vec();
            softmax_in_place(&mut probs);
            loss_sum += -(probs[*true_id as usize].max(f64::MIN_POSITIVE)).ln();
            masked += 1;
            for (col, p) in probs.iter().enumerate() {
                dlogits[[row, col]] = *p;
            }
            dlogits[[row, *true_id as usize]] -= 1.0;
        }
    }
    if masked == 0 {
        return Ok((0.0, 0));
    }

    // output head
    let x_top = cache
        .layers
        .last()
        .map(|l| &l.n2)
        .unwrap_or(&cache.embedded);
    let head_w = effective_head_weight(config, params);
    let d_head_w = x_top.t().dot(&dlogits);
    if config.tie_embeddings {
        grads.token_emb += &d_head_w.t();
    } else {
        grads.head_w += &d_head_w;
    }
    grads.head_b += &dlogits.sum_axis(ndarray::Axis(0));
    let mut dx = dlogits.dot(&head_w.t());

    for (layer_idx, layer) in params.layers.iter().enumerate().rev() {
        let cache_l = &cache.layers[layer_idx];
        let glayer = &mut grads.layers[layer_idx];

        // layer norm 2
        let (dr2, dgain2, dbias2) = layer_norm_backward(
            &dx,
            &cache_l.xhat2,
            &cache_l.rstd2,
            &layer.ln2_gain,
        );
        glayer.ln2_gain += &dgain2;
        glayer.ln2_bias += &dbias2;

        // r2 = n1 + f2
        let mut dn1 = dr2.clone();
        let df2 = dr2;

        // f2 = g . w_out
        glayer.w_out += &cache_l.g.t().dot(&df2);
        let dg = df2.dot(&layer.w_out.t());

        // g = gelu(f1)
        let mut df1 = dg;
        for (df, f) in df1.iter_mut().zip(cache_l.f1.iter()) {
            *df *= gelu_grad(*f);
        }

        // f1 = n1 . w_in
        glayer.w_in += &cache_l.n1.t().dot(&df1);
        dn1 += &df1.dot(&layer.w_in.t());

        // layer norm 1
        let (dr1, dgain1, dbias1) = layer_norm_backward(
            &dn1,
            &cache_l.xhat1,
            &cache_l.rstd1,
            &layer.ln1_gain,
        );
        glayer.ln1_gain += &dgain1;
        glayer.ln1_bias += &dbias1;

        // r1 = x_in + attn_out
        let mut dx_in = dr1.clone();
        let d_attn_out = dr1;

        // attn_out = ctx . wo
        glayer.wo += &cache_l.ctx.t().dot(&d_attn_out);
        let dctx = d_attn_out.dot(&layer.wo.t());

        // per-head attention backward
        let mut dq = Array2::<f64>::zeros((seq, h));
        let mut dk = Array2::<f64>::zeros((seq, h));
        let mut dv = Array2::<f64>::zeros((seq, h));
        for head in 0..heads {
            let cols = s![.., head * dh..(head + 1) * dh];
            let p = cache_l.attn.slice(s![head, .., ..]);
            let vh = cache_l.v.slice(cols);
            let qh = cache_l.q.slice(cols);
            let kh = cache_l.k.slice(cols);
            let dctx_h = dctx.slice(cols);

            let dp = dctx_h.dot(&vh.t());
            dv.slice_mut(cols).assign(&p.t().dot(&dctx_h));

            // softmax jacobian: ds = p * (dp - rowsum(dp * p))
            let mut ds = Array2::<f64>::zeros((seq, seq));
            for row in 0..seq {
                let mut dot = 0.0;
                for col in 0..seq {
                    dot += dp[[row, col]] * p[[row, col]];
                }
                for col in 0..seq {
                    ds[[row, col]] = p[[row, col]] * (dp[[row, col]] - dot);
                }
            }
            ds *= scale;
            dq.slice_mut(cols).assign(&ds.dot(&kh));
            dk.slice_mut(cols).assign(&ds.t().dot(&qh));
        }

        // projections
        glayer.wq += &cache_l.x_in.t().dot(&dq);
        glayer.wk += &cache_l.x_in.t().dot(&dk);
        glayer.wv += &cache_l.x_in.t().dot(&dv);
        dx_in += &dq.dot(&layer.wq.t());
        dx_in += &dk.dot(&layer.wk.t());
        dx_in += &dv.dot(&layer.wv.t());

        dx = dx_in;
    }

    // embedding sums
    for (row, &id) in cache.ids.iter().enumerate() {
        let d = dx.row(row);
        let mut tok = grads.token_emb.row_mut(id as usize);
        tok += &d;
        let mut pos = grads.pos_emb.row_mut(row);
        pos += &d;
        let mut seg = grads.seg_emb.row_mut(0);
        seg += &d;
    }
    Ok((loss_sum, masked))
}

/// Backward through y = gain * xhat + bias with xhat = (x - mean) * rstd.
/// Returns (dx, dgain, dbias).
fn layer_norm_backward(
    dy: &Array2<f64>,
    xhat: &Array2<f64>,
    rstd: &Array1<f64>,
    gain: &Array1<f64>,
) -> (Array2<f64>, Array1<f64>, Array1<f64>) {
    let (rows, cols) = dy.dim();
    let n = cols as f64;
    let mut dx = Array2::<f64>::zeros((rows, cols));
    let mut dgain = Array1::<f64>::zeros(cols);
    let mut dbias = Array1::<f64>::zeros(cols);
    for r in 0..rows {
        let mut sum_dxhat = 0.0;
        let mut sum_dxhat_xhat = 0.0;
        for c in 0..cols {
            let dyv = dy[[r, c]];
            dgain[c] += dyv * xhat[[r, c]];
            dbias[c] += dyv;
            let dxhat = dyv * gain[c];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat[[r, c]];
        }
        for c in 0..cols {
            let dxhat = dy[[r, c]] * gain[c];
            dx[[r, c]] = rstd[r]
                * (dxhat - sum_dxhat / n - xhat[[r, c]] * sum_dxhat_xhat / n);
        }
    }
    (dx, dgain, dbias)
}
