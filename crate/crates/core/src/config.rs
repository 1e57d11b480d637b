//! Run configuration: one plain-text key-value file, flag overrides winning,
//! and a content hash echoed by every command so runs are reproducible.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::embed::W2VHyper;
use crate::mlm::{EncoderConfig, MlmHyper};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: expected key = value")]
    Syntax { path: String, line: usize },
    #[error("unknown config key {0}")]
    UnknownKey(String),
    #[error("config key {key}: cannot parse {value:?} as {ty}")]
    BadValue {
        key: String,
        value: String,
        ty: &'static str,
    },
}

const KNOWN_KEYS: &[&str] = &[
    "seed",
    "workers",
    "paths.corpus",
    "paths.words",
    "paths.subword",
    "paths.wordpiece_vocab",
    "paths.w2v_model",
    "paths.mlm_checkpoint",
    "paths.mlm_log",
    "paths.output_dir",
    "paths.fixtures_dir",
    "screen.min_abstract_chars",
    "screen.blocklist",
    "w2v.dim",
    "w2v.learning_rate",
    "w2v.batch_size",
    "w2v.epochs",
    "w2v.window",
    "w2v.negatives",
    "w2v.subsample_threshold",
    "w2v.min_count",
    "wordpiece.target_size",
    "mlm.layers",
    "mlm.hidden",
    "mlm.heads",
    "mlm.intermediate",
    "mlm.max_seq",
    "mlm.mask_rate",
    "mlm.epochs",
    "mlm.batch_size",
    "mlm.learning_rate",
    "mlm.tie_embeddings",
    "tune.fraction",
    "live.base_url",
    "live.api_key_env",
    "live.requests_per_second",
    "live.page_size",
    "eval.overlap_definition",
    "lexicons.element_names",
    "lexicons.units",
    "lexicons.function_words",
];

/// Effective configuration: file values overlaid with flag overrides.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    /// Parse `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str, path: &str) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax {
                path: path.to_string(),
                line: idx + 1,
            })?;
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey(key));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Flag overrides win over file values.
    pub fn set(&mut self, key: &str, value: String) -> Result<(), ConfigError> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        self.values.insert(key.to_string(), value);
        Ok(())
    }

    /// Hash of the effective configuration, sorted key=value lines.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for (k, v) in &self.values {
            hasher.update(k.as_bytes());
            hasher.update(b"=");
            hasher.update(v.as_bytes());
            hasher.update(b"\n");
        }
        let digest = hasher.finalize();
        hex_prefix(&digest, 12)
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parse_with<T: std::str::FromStr>(
        &self,
        key: &str,
        default: T,
        ty: &'static str,
    ) -> Result<T, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError::BadValue {
                key: key.to_string(),
                value: v.to_string(),
                ty,
            }),
        }
    }

    pub fn seed(&self) -> Result<u64, ConfigError> {
        self.parse_with("seed", 42, "u64")
    }

    pub fn workers(&self) -> Result<usize, ConfigError> {
        self.parse_with("workers", 1, "usize")
    }

    pub fn path(&self, key: &str, default: &str) -> PathBuf {
        PathBuf::from(self.get(key).unwrap_or(default))
    }

    pub fn min_abstract_chars(&self) -> Result<usize, ConfigError> {
        self.parse_with("screen.min_abstract_chars", 200, "usize")
    }

    pub fn blocklist(&self) -> Vec<String> {
        match self.get("screen.blocklist") {
            None => vec!["copyright".into(), "no abstract available".into()],
            Some(v) => v
                .split(';')
                .map(|s| s.trim().to_lowercase())
                .filter(|s| !s.is_empty())
                .collect(),
        }
    }

    pub fn w2v_hyper(&self) -> Result<W2VHyper, ConfigError> {
        let default = W2VHyper::default();
        Ok(W2VHyper {
            dim: self.parse_with("w2v.dim", default.dim, "usize")?,
            learning_rate: self.parse_with("w2v.learning_rate", default.learning_rate, "f64")?,
            batch_size: self.parse_with("w2v.batch_size", default.batch_size, "usize")?,
            epochs: self.parse_with("w2v.epochs", default.epochs, "usize")?,
            window: self.parse_with("w2v.window", default.window, "usize")?,
            negatives: self.parse_with("w2v.negatives", default.negatives, "usize")?,
            subsample_threshold: self.parse_with(
                "w2v.subsample_threshold",
                default.subsample_threshold,
                "f64",
            )?,
            seed: crate::seed::derive_seed(self.seed()?, "w2v"),
        })
    }

    pub fn w2v_min_count(&self) -> Result<u64, ConfigError> {
        self.parse_with("w2v.min_count", 2, "u64")
    }

    pub fn wordpiece_target_size(&self) -> Result<usize, ConfigError> {
        self.parse_with("wordpiece.target_size", 2000, "usize")
    }

    pub fn encoder_config(&self, vocab_size: usize) -> Result<EncoderConfig, ConfigError> {
        let d = EncoderConfig::desk_scale(vocab_size);
        Ok(EncoderConfig {
            layers: self.parse_with("mlm.layers", d.layers, "usize")?,
            hidden: self.parse_with("mlm.hidden", d.hidden, "usize")?,
            heads: self.parse_with("mlm.heads", d.heads, "usize")?,
            intermediate: self.parse_with("mlm.intermediate", d.intermediate, "usize")?,
            max_seq: self.parse_with("mlm.max_seq", d.max_seq, "usize")?,
            vocab_size,
            mask_rate: self.parse_with("mlm.mask_rate", d.mask_rate, "f64")?,
            mask_token_fraction: d.mask_token_fraction,
            random_token_fraction: d.random_token_fraction,
            tie_embeddings: self.parse_with("mlm.tie_embeddings", false, "bool")?,
        })
    }

    pub fn mlm_hyper(&self) -> Result<MlmHyper, ConfigError> {
        let d = MlmHyper::default();
        Ok(MlmHyper {
            epochs: self.parse_with("mlm.epochs", d.epochs, "usize")?,
            batch_size: self.parse_with("mlm.batch_size", d.batch_size, "usize")?,
            learning_rate: self.parse_with("mlm.learning_rate", d.learning_rate, "f64")?,
            seed: crate::seed::derive_seed(self.seed()?, "mlm"),
        })
    }

    pub fn tune_fraction(&self) -> Result<f64, ConfigError> {
        self.parse_with("tune.fraction", 0.10, "f64")
    }

    pub fn live_source(&self) -> crate::corpus::SourceConfig {
        crate::corpus::SourceConfig::Live {
            base_url: self
                .get("live.base_url")
                .unwrap_or("https://api.example.org/search")
                .to_string(),
            api_key_env: self
                .get("live.api_key_env")
                .unwrap_or("LITMINE_API_KEY")
                .to_string(),
            requests_per_second: self
                .parse_with("live.requests_per_second", 5.0, "f64")
                .unwrap_or(5.0),
            page_size: self.parse_with("live.page_size", 25, "usize").unwrap_or(25),
        }
    }

    /// Chemistry lexicons, honoring the override paths when configured.
    pub fn lexicons(&self) -> Result<crate::chemtok::Lexicons, crate::chemtok::ChemtokError> {
        let as_path = |key: &str| self.get(key).map(PathBuf::from);
        let names = as_path("lexicons.element_names");
        let units = as_path("lexicons.units");
        let function_words = as_path("lexicons.function_words");
        if names.is_none() && units.is_none() && function_words.is_none() {
            return Ok(crate::chemtok::Lexicons::bundled());
        }
        crate::chemtok::Lexicons::with_overrides(
            names.as_deref(),
            units.as_deref(),
            function_words.as_deref(),
        )
    }

    pub fn overlap_definition(&self) -> Result<crate::evalrank::OverlapDefinition, ConfigError> {
        match self.get("eval.overlap_definition").unwrap_or("intersection_over_w2v") {
            "intersection_over_w2v" => Ok(crate::evalrank::OverlapDefinition::IntersectionOverW2v),
            "intersection_over_union" => {
                Ok(crate::evalrank::OverlapDefinition::IntersectionOverUnion)
            }
            other => Err(ConfigError::BadValue {
                key: "eval.overlap_definition".into(),
                value: other.into(),
                ty: "intersection_over_w2v | intersection_over_union",
            }),
        }
    }
}

fn hex_prefix(bytes: &[u8], chars: usize) -> String {
    let mut out = String::with_capacity(chars);
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
        if out.len() >= chars {
            break;
        }
    }
    out.truncate(chars);
    out
}
