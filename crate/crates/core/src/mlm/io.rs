//! Parameter checkpoint container: magic "CENC", format version, config
//! fields, then named tensor records (length-prefixed name, shape, f32 LE
//! data) in canonical order. Training logs write as CSV with columns
//! epoch, step, loss, heldout_perplexity.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{EncoderConfig, EncoderParams, LayerParams, MlmError, TrainLogRow};
use crate::FORMAT_VERSION;

const MAGIC: &[u8; 4] = b"CENC";

pub fn save_checkpoint(
    config: &EncoderConfig,
    params: &EncoderParams,
    path: &Path,
) -> Result<(), MlmError> {
    let io_err = |source| MlmError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    let mut out: Vec<u8> = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for field in [
        config.layers,
        config.hidden,
        config.heads,
        config.intermediate,
        config.max_seq,
        config.vocab_size,
    ] {
        out.extend_from_slice(&(field as u32).to_le_bytes());
    }
    out.extend_from_slice(&config.mask_rate.to_le_bytes());
    out.extend_from_slice(&config.mask_token_fraction.to_le_bytes());
    out.extend_from_slice(&config.random_token_fraction.to_le_bytes());
    out.push(u8::from(config.tie_embeddings));

    let mut count = 0u32;
    params.for_each_tensor(|_, _, _| count += 1);
    out.extend_from_slice(&count.to_le_bytes());
    params.for_each_tensor(|name, shape, data| {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for d in &shape {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        for x in data {
            out.extend_from_slice(&(*x as f32).to_le_bytes());
        }
    });
    w.write_all(&out).map_err(io_err)?;
    w.flush().map_err(|source| MlmError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<(EncoderConfig, EncoderParams), MlmError> {
    let io_err = |source| MlmError::Io {
        path: path.display().to_string(),
        source,
    };
    let format_err = |message: String| MlmError::Format {
        path: path.display().to_string(),
        message,
    };
    let mut r = BufReader::new(File::open(path).map_err(io_err)?);
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4).map_err(io_err)?;
    if &buf4 != MAGIC {
        return Err(format_err("bad magic, not a checkpoint".into()));
    }
    r.read_exact(&mut buf4).map_err(io_err)?;
    if u32::from_le_bytes(buf4) != FORMAT_VERSION {
        return Err(format_err("unsupported checkpoint version".into()));
    }
    let read_u32 = |r: &mut BufReader<File>| -> Result<u32, MlmError> {
        let mut b = [0u8; 4];
        r.read_exact(&mut b).map_err(|source| MlmError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(u32::from_le_bytes(b))
    };
    let layers = read_u32(&mut r)? as usize;
    let hidden = read_u32(&mut r)? as usize;
    let heads = read_u32(&mut r)? as usize;
    let intermediate = read_u32(&mut r)? as usize;
    let max_seq = read_u32(&mut r)? as usize;
    let vocab_size = read_u32(&mut r)? as usize;
    let mut f64buf = [0u8; 8];
    r.read_exact(&mut f64buf).map_err(io_err)?;
    let mask_rate = f64::from_le_bytes(f64buf);
    r.read_exact(&mut f64buf).map_err(io_err)?;
    let mask_token_fraction = f64::from_le_bytes(f64buf);
    r.read_exact(&mut f64buf).map_err(io_err)?;
    let random_token_fraction = f64::from_le_bytes(f64buf);
    let mut flag = [0u8; 1];
    r.read_exact(&mut flag).map_err(io_err)?;
    let config = EncoderConfig {
        layers,
        hidden,
        heads,
        intermediate,
        max_seq,
        vocab_size,
        mask_rate,
        mask_token_fraction,
        random_token_fraction,
        tie_embeddings: flag[0] != 0,
    };
    config.validate()?;

    let count = {
        let mut b = [0u8; 4];
        r.read_exact(&mut b).map_err(io_err)?;
        u32::from_le_bytes(b)
    };
    let mut tensors: Vec<(String, Vec<usize>, Vec<f64>)> = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let mut b = [0u8; 4];
        r.read_exact(&mut b).map_err(io_err)?;
        let name_len = u32::from_le_bytes(b) as usize;
        let mut name_bytes = vec![0u8; name_len];
        r.read_exact(&mut name_bytes).map_err(io_err)?;
        let name = String::from_utf8(name_bytes).map_err(|e| format_err(e.to_string()))?;
        r.read_exact(&mut b).map_err(io_err)?;
        let ndim = u32::from_le_bytes(b) as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            r.read_exact(&mut b).map_err(io_err)?;
            shape.push(u32::from_le_bytes(b) as usize);
        }
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            r.read_exact(&mut b).map_err(io_err)?;
            data.push(f64::from(f32::from_le_bytes(b)));
        }
        tensors.push((name, shape, data));
    }
    let params = assemble(&config, tensors).map_err(format_err)?;
    Ok((config, params))
}

fn assemble(
    config: &EncoderConfig,
    tensors: Vec<(String, Vec<usize>, Vec<f64>)>,
) -> Result<EncoderParams, String> {
    type TensorMap = std::collections::HashMap<String, (Vec<usize>, Vec<f64>)>;
    let mut map: TensorMap = tensors.into_iter().map(|(n, s, d)| (n, (s, d))).collect();
    fn take2(map: &mut TensorMap, name: &str) -> Result<Array2<f64>, String> {
        let (shape, data) = map.remove(name).ok_or_else(|| format!("missing tensor {name}"))?;
        if shape.len() != 2 {
            return Err(format!("tensor {name} is not rank 2"));
        }
        Array2::from_shape_vec((shape[0], shape[1]), data).map_err(|e| format!("tensor {name}: {e}"))
    }
    fn take1(map: &mut TensorMap, name: &str) -> Result<Array1<f64>, String> {
        let (shape, data) = map.remove(name).ok_or_else(|| format!("missing tensor {name}"))?;
        if shape.len() != 1 {
            return Err(format!("tensor {name} is not rank 1"));
        }
        Ok(Array1::from_vec(data))
    }
    let token_emb = take2(&mut map, "token_embeddings")?;
    let pos_emb = take2(&mut map, "position_embeddings")?;
    let seg_emb = take2(&mut map, "segment_embeddings")?;
    let mut layers = Vec::with_capacity(config.layers);
    for i in 0..config.layers {
        layers.push(LayerParams {
            wq: take2(&mut map, &format!("layer{i}.attention.query"))?,
            wk: take2(&mut map, &format!("layer{i}.attention.key"))?,
            wv: take2(&mut map, &format!("layer{i}.attention.value"))?,
            wo: take2(&mut map, &format!("layer{i}.attention.output"))?,
            w_in: take2(&mut map, &format!("layer{i}.ffn.intermediate"))?,
            w_out: take2(&mut map, &format!("layer{i}.ffn.output"))?,
            ln1_gain: take1(&mut map, &format!("layer{i}.ln1.gain"))?,
            ln1_bias: take1(&mut map, &format!("layer{i}.ln1.bias"))?,
            ln2_gain: take1(&mut map, &format!("layer{i}.ln2.gain"))?,
            ln2_bias: take1(&mut map, &format!("layer{i}.ln2.bias"))?,
        });
    }
    let head_w = take2(&mut map, "mlm_head.weight")?;
    let head_b = take1(&mut map, "mlm_head.bias")?;
    Ok(EncoderParams {
        token_emb,
        pos_emb,
        seg_emb,
        layers,
        head_w,
        head_b,
    })
}

/// Write the training log: epoch, step, loss, heldout_perplexity.
pub fn write_train_log(rows: &[TrainLogRow], path: &Path) -> Result<(), MlmError> {
    let io_err = |source| MlmError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    let mut write = |s: String| {
        w.write_all(s.as_bytes()).map_err(|source| MlmError::Io {
            path: path.display().to_string(),
            source,
        })
    };
    write("epoch,step,loss,heldout_perplexity\n".to_string())?;
    for row in rows {
        let pp = row
            .heldout_perplexity
            .map(|p| format!("{p:.6}"))
            .unwrap_or_default();
        write(format!("{},{},{:.6},{}\n", row.epoch, row.step, row.loss, pp))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;

    fn config() -> EncoderConfig {
        EncoderConfig {
            layers: 2,
            hidden: 8,
            heads: 2,
            intermediate: 16,
            max_seq: 10,
            vocab_size: 30,
            mask_rate: 0.15,
            mask_token_fraction: 0.8,
            random_token_fraction: 0.1,
            tie_embeddings: false,
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let config = config();
        let params = EncoderParams::init(&config, &mut rng_for(21, "ckpt"));
        save_checkpoint(&config, &params, &path).unwrap();
        let (loaded_config, loaded) = load_checkpoint(&path).unwrap();
        assert_eq!(loaded_config, config);
        let mut originals = Vec::new();
        params.for_each_tensor(|n, s, d| originals.push((n, s, d.to_vec())));
        let mut reloaded = Vec::new();
        loaded.for_each_tensor(|n, s, d| reloaded.push((n, s, d.to_vec())));
        assert_eq!(originals.len(), reloaded.len());
        for ((n1, s1, d1), (n2, s2, d2)) in originals.iter().zip(&reloaded) {
            assert_eq!(n1, n2);
            assert_eq!(s1, s2);
            for (a, b) in d1.iter().zip(d2) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn save_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.ckpt");
        let b = dir.path().join("b.ckpt");
        let config = config();
        let params = EncoderParams::init(&config, &mut rng_for(22, "ckpt"));
        save_checkpoint(&config, &params, &a).unwrap();
        save_checkpoint(&config, &params, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk");
        std::fs::write(&path, b"NOPE0000").unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(MlmError::Format { .. })
        ));
    }

    #[test]
    fn train_log_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        let rows = vec![
            TrainLogRow {
                epoch: 0,
                step: 10,
                loss: 5.25,
                heldout_perplexity: Some(120.5),
            },
            TrainLogRow {
                epoch: 1,
                step: 20,
                loss: 4.0,
                heldout_perplexity: None,
            },
        ];
        write_train_log(&rows, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "epoch,step,loss,heldout_perplexity");
        assert_eq!(lines.next().unwrap(), "0,10,5.250000,120.500000");
        assert_eq!(lines.next().unwrap(), "1,20,4.000000,");
    }
}
