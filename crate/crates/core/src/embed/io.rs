//! Embedding container file, bit-exact layout:
//! magic "CEMB" | format version u32 LE | vocab size V u32 LE | dim u32 LE |
//! V length-prefixed UTF-8 words | V*dim little-endian f32 row-major |
//! 4-byte "NORM" or "RAW " flag.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{EmbedError, EmbeddingModel, WordVocab};
use crate::FORMAT_VERSION;

const MAGIC: &[u8; 4] = b"CEMB";
const FLAG_NORM: &[u8; 4] = b"NORM";
const FLAG_RAW: &[u8; 4] = b"RAW ";

pub fn save_model(model: &EmbeddingModel, path: &Path) -> Result<(), EmbedError> {
    let io_err = |source| EmbedError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    let write = |w: &mut BufWriter<File>, bytes: &[u8]| {
        w.write_all(bytes).map_err(|source| EmbedError::Io {
            path: path.display().to_string(),
            source,
        })
    };
    write(&mut w, MAGIC)?;
    write(&mut w, &FORMAT_VERSION.to_le_bytes())?;
    write(&mut w, &(model.vocab.len() as u32).to_le_bytes())?;
    write(&mut w, &(model.dim as u32).to_le_bytes())?;
    for id in 0..model.vocab.len() {
        let word = model.vocab.word(id).as_bytes();
        write(&mut w, &(word.len() as u32).to_le_bytes())?;
        write(&mut w, word)?;
    }
    for &x in &model.input {
        write(&mut w, &(x as f32).to_le_bytes())?;
    }
    write(&mut w, if model.normalized { FLAG_NORM } else { FLAG_RAW })?;
    w.flush().map_err(|source| EmbedError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<EmbeddingModel, EmbedError> {
    let io_err = |source| EmbedError::Io {
        path: path.display().to_string(),
        source,
    };
    let format_err = |message: String| EmbedError::Format {
        path: path.display().to_string(),
        message,
    };
    let mut r = BufReader::new(File::open(path).map_err(io_err)?);
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4).map_err(io_err)?;
    if &buf4 != MAGIC {
        return Err(format_err("bad magic, not an embedding file".into()));
    }
    r.read_exact(&mut buf4).map_err(io_err)?;
    let version = u32::from_le_bytes(buf4);
    if version != FORMAT_VERSION {
        return Err(format_err(format!("unsupported format version {version}")));
    }
    r.read_exact(&mut buf4).map_err(io_err)?;
    let v = u32::from_le_bytes(buf4) as usize;
    r.read_exact(&mut buf4).map_err(io_err)?;
    let dim = u32::from_le_bytes(buf4) as usize;
    let mut words = Vec::with_capacity(v);
    for _ in 0..v {
        r.read_exact(&mut buf4).map_err(io_err)?;
        let len = u32::from_le_bytes(buf4) as usize;
        let mut bytes = vec![0u8; len];
        r.read_exact(&mut bytes).map_err(io_err)?;
        words.push(String::from_utf8(bytes).map_err(|e| format_err(e.to_string()))?);
    }
    let mut input = Vec::with_capacity(v * dim);
    for _ in 0..v * dim {
        r.read_exact(&mut buf4).map_err(io_err)?;
        input.push(f64::from(f32::from_le_bytes(buf4)));
    }
    r.read_exact(&mut buf4).map_err(io_err)?;
    let normalized = match &buf4 {
        b if b == FLAG_NORM => true,
        b if b == FLAG_RAW => false,
        _ => return Err(format_err("bad normalization flag".into())),
    };
    let counts = vec![1u64; v];
    let vocab = WordVocab::from_words(words, counts, 1);
    Ok(EmbeddingModel {
        output: vec![0.0; v * dim],
        vocab,
        dim,
        input,
        normalized,
    })
}
