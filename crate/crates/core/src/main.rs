//! Command-line entry point wiring ingestion, preprocessing, training,
//! tuning, querying and evaluation. Exit codes: 0 success, 1 runtime
//! failure, 2 missing upstream artifact, 3 configuration error.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use litmine::chemtok::{self, PlaceholderPolicy};
use litmine::config::{ConfigError, RunConfig};
use litmine::corpus::{self, CorpusLine, FilterSpec, ScreenRules, SourceConfig};
use litmine::embed;
use litmine::evalrank::{self, RelevanceMode};
use litmine::mlm;
use litmine::subword;
use litmine::tune::{self, AxisValue, GridSpec, ObjectiveKind};

/// The six query templates of the reference evaluation, by abbreviation.
const TEMPLATE_PRESET: [(&str, &str); 6] = [
    ("can", "hexavalent chromium can be replaced by [MASK]"),
    ("may", "hexavalent chromium may be replaced by [MASK]"),
    ("chromate", "chromate can be replaced by [MASK]"),
    ("inhibitor", "the best corrosion inhibitor is [MASK]"),
    ("perform", "[MASK] performed better than chromate"),
    ("coating", "the best conversion coating is [MASK]"),
];

#[derive(Parser)]
#[command(
    name = "litmine",
    about = "Literature mining toolkit: train word and subword language models over abstracts and rank candidate replacement materials",
    version = concat!(env!("CARGO_PKG_VERSION"), " (embedding format CEMB v1, checkpoint format CENC v1)")
)]
struct Cli {
    /// Key-value config file; flags win over file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fetch, filter, clean and persist abstract records into the corpus file.
    Ingest {
        /// Directory of fixture record files (one JSON record per file).
        #[arg(long)]
        fixtures: Option<PathBuf>,
        /// Use the live HTTP source from the config instead of fixtures.
        #[arg(long)]
        live: bool,
        /// Query forwarded to the live source.
        #[arg(long, default_value = "chrom*")]
        query: String,
        /// Maximum number of result pages fetched in live mode.
        #[arg(long, default_value_t = 10)]
        page_limit: usize,
    },
    /// Tokenize the corpus into the word-level and subword-level text files.
    Preprocess,
    /// Train the subword vocabulary from the subword-level corpus.
    TrainWordpiece,
    /// Train word embeddings from the word-level corpus.
    TrainW2v,
    /// Train the masked-language-model encoder from the subword corpus.
    TrainMlm {
        /// Continue from an existing checkpoint (two-stage training).
        #[arg(long)]
        warm_start: Option<PathBuf>,
    },
    /// Grid-search word-embedding hyperparameters by analogy score.
    TuneW2v,
    /// Grid-search encoder hyperparameters by dev perplexity.
    TuneMlm,
    /// Rank words nearest to a query word by cosine similarity.
    Similar {
        #[arg(long)]
        word: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Fill the [MASK] slot of a template with ranked predictions.
    FillMask {
        /// Template containing exactly one [MASK].
        #[arg(long, conflicts_with = "preset")]
        template: Option<String>,
        /// Named template set; "table1" runs the six reference sentences.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Count corpus occurrences of terms (case-insensitive, normalized).
    Frequency {
        #[arg(long = "term", required = true)]
        terms: Vec<String>,
    },
    /// Score candidate lists against the benchmark lexicon.
    Evaluate {
        /// Word-embedding candidate list file (default: bundled fixture).
        #[arg(long)]
        w2v_list: Option<PathBuf>,
        /// Mask-model candidate list file (default: bundled fixture).
        #[arg(long)]
        bert_list: Option<PathBuf>,
        /// Benchmark lexicon file (default: bundled).
        #[arg(long)]
        benchmark: Option<PathBuf>,
        /// Curated relevance file (default: bundled).
        #[arg(long)]
        curated: Option<PathBuf>,
        /// Screen with the heuristic lexicons instead of the curation.
        #[arg(long)]
        heuristic: bool,
    },
    /// Export figure-ready CSVs from a saved evaluation report.
    Report {
        /// Report JSON produced by `evaluate` (default: output dir).
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

enum CliError {
    Config(String),
    MissingArtifact(String),
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::MissingArtifact(_) => 2,
            CliError::Config(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Runtime(_) => "runtime",
            CliError::MissingArtifact(_) => "missing_artifact",
            CliError::Config(_) => "config",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::MissingArtifact(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

macro_rules! runtime_from {
    ($($ty:ty),*) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Runtime(e.to_string())
            }
        })*
    };
}
runtime_from!(
    corpus::CorpusError,
    chemtok::ChemtokError,
    subword::SubwordError,
    embed::EmbedError,
    mlm::MlmError,
    tune::TuneError,
    evalrank::EvalError,
    std::io::Error
);

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            // unknown flags and other usage errors are configuration errors
            eprint!("{e}");
            return ExitCode::from(3);
        }
        Err(e) => {
            // --help / --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!(
                "error\tkind={}\tmessage={}",
                e.kind(),
                e.message().replace(['\n', '\t'], " ")
            );
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.set("seed", seed.to_string())?;
    }
    let seed = config.seed()?;
    eprintln!("seed={} config={}", seed, config.hash());

    match cli.command {
        Command::Ingest {
            fixtures,
            live,
            query,
            page_limit,
        } => cmd_ingest(&config, fixtures, live, &query, page_limit),
        Command::Preprocess => cmd_preprocess(&config),
        Command::TrainWordpiece => cmd_train_wordpiece(&config),
        Command::TrainW2v => cmd_train_w2v(&config),
        Command::TrainMlm { warm_start } => cmd_train_mlm(&config, warm_start),
        Command::TuneW2v => cmd_tune_w2v(&config),
        Command::TuneMlm => cmd_tune_mlm(&config),
        Command::Similar { word, k } => cmd_similar(&config, &word, k),
        Command::FillMask { template, preset, k } => cmd_fill_mask(&config, template, preset, k),
        Command::Frequency { terms } => cmd_frequency(&config, &terms),
        Command::Evaluate {
            w2v_list,
            bert_list,
            benchmark,
            curated,
            heuristic,
        } => cmd_evaluate(&config, w2v_list, bert_list, benchmark, curated, heuristic),
        Command::Report { report } => cmd_report(&config, report),
    }
}

fn require(path: &Path, what: &str) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::MissingArtifact(format!(
            "{what} not found at {}; run the producing command first",
            path.display()
        )))
    }
}

fn corpus_path(config: &RunConfig) -> PathBuf {
    config.path("paths.corpus", "corpus.jsonl")
}

fn words_path(config: &RunConfig) -> PathBuf {
    config.path("paths.words", "corpus_words.txt")
}

fn subword_path(config: &RunConfig) -> PathBuf {
    config.path("paths.subword", "corpus_subword.txt")
}

fn vocab_path(config: &RunConfig) -> PathBuf {
    config.path("paths.wordpiece_vocab", "wordpiece.vocab")
}

fn w2v_model_path(config: &RunConfig) -> PathBuf {
    config.path("paths.w2v_model", "w2v.cemb")
}

fn mlm_checkpoint_path(config: &RunConfig) -> PathBuf {
    config.path("paths.mlm_checkpoint", "mlm.ckpt")
}

fn output_dir(config: &RunConfig) -> PathBuf {
    config.path("paths.output_dir", "reports")
}

fn cmd_ingest(
    config: &RunConfig,
    fixtures: Option<PathBuf>,
    live: bool,
    query: &str,
    page_limit: usize,
) -> Result<(), CliError> {
    let source = if live {
        config.live_source()
    } else {
        let dir = fixtures.unwrap_or_else(|| config.path("paths.fixtures_dir", "fixtures"));
        require(&dir, "fixture directory")?;
        SourceConfig::Fixture { dir }
    };
    let records = match corpus::fetch_records(&source, query, page_limit) {
        Ok(r) => r,
        Err(e @ corpus::CorpusError::MissingCredential(_)) => {
            return Err(CliError::Config(e.to_string()))
        }
        Err(e) => return Err(e.into()),
    };
    let fetched = records.len();
    let lexicons = config.lexicons()?;
    let spec = FilterSpec::chromate_default();
    let kept = corpus::filter_records(&records, &spec, &lexicons);
    let filtered = kept.len();
    let rules = ScreenRules {
        min_abstract_chars: config.min_abstract_chars()?,
        blocklist: config.blocklist(),
    };
    let mut lines = Vec::new();
    for record in kept {
        let cleaned_abstract = corpus::clean_text(&record.abstract_text);
        if !rules.keeps(&cleaned_abstract) {
            continue;
        }
        let title = corpus::clean_text(&record.title);
        let text = if title.is_empty() {
            cleaned_abstract
        } else {
            format!("{title}. {cleaned_abstract}")
        };
        lines.push(CorpusLine {
            id: record.id,
            text,
        });
    }
    let screened = lines.len();
    let path = corpus_path(config);
    let out = corpus::write_corpus(&lines, &path)?;
    println!(
        "fetched={fetched} filtered={filtered} screened={screened} written={} duplicates_dropped={} path={}",
        out.records,
        out.duplicates_dropped,
        path.display()
    );
    Ok(())
}

fn cmd_preprocess(config: &RunConfig) -> Result<(), CliError> {
    let corpus_file = corpus_path(config);
    require(&corpus_file, "corpus file")?;
    let records = corpus::read_corpus(&corpus_file)?;
    let lexicons = config.lexicons()?;
    let workers = config.workers()?.max(1);

    let tokenize = |record: &CorpusLine| {
        (
            chemtok::process_text(&record.text, PlaceholderPolicy::On, &lexicons),
            chemtok::process_text(&record.text, PlaceholderPolicy::Off, &lexicons),
        )
    };
    // per-record tokenization is pure; parallel evaluation keeps input order
    type Tokenized = (Vec<Vec<String>>, Vec<Vec<String>>);
    let tokenized: Vec<Tokenized> = if workers > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        pool.install(|| records.par_iter().map(tokenize).collect())
    } else {
        records.iter().map(tokenize).collect()
    };

    let write_sentences = |path: &Path, pick: &dyn Fn(&Tokenized) -> &Vec<Vec<String>>| -> Result<usize, CliError> {
        let mut w = BufWriter::new(File::create(path)?);
        let mut count = 0usize;
        for entry in &tokenized {
            for sentence in pick(entry) {
                if sentence.is_empty() {
                    continue;
                }
                writeln!(w, "{}", sentence.join(" "))?;
                count += 1;
            }
        }
        w.flush()?;
        Ok(count)
    };
    let words_file = words_path(config);
    let subword_file = subword_path(config);
    let n_words = write_sentences(&words_file, &|e| &e.0)?;
    let n_subword = write_sentences(&subword_file, &|e| &e.1)?;
    println!(
        "records={} word_sentences={n_words} subword_sentences={n_subword} words={} subword={}",
        records.len(),
        words_file.display(),
        subword_file.display()
    );
    Ok(())
}

fn read_sentences(path: &Path) -> Result<Vec<Vec<String>>, CliError> {
    let file = File::open(path)?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(line.split_whitespace().map(str::to_string).collect());
    }
    Ok(out)
}

fn cmd_train_wordpiece(config: &RunConfig) -> Result<(), CliError> {
    let subword_file = subword_path(config);
    require(&subword_file, "subword corpus")?;
    let sentences = read_sentences(&subword_file)?;
    let words: Vec<String> = sentences.into_iter().flatten().collect();
    let vocab = subword::train_wordpiece(&words, config.wordpiece_target_size()?)?;
    let path = vocab_path(config);
    vocab.save(&path)?;
    println!("pieces={} target={} path={}", vocab.len(), vocab.target_size, path.display());
    Ok(())
}

fn cmd_train_w2v(config: &RunConfig) -> Result<(), CliError> {
    let words_file = words_path(config);
    require(&words_file, "word-level corpus")?;
    let sentences = read_sentences(&words_file)?;
    let vocab = embed::build_vocab(&sentences, config.w2v_min_count()?)?;
    let hyper = config.w2v_hyper()?;
    let model = embed::train_skipgram(&sentences, &vocab, &hyper)?;
    let model = embed::normalize(model);
    let path = w2v_model_path(config);
    embed::io::save_model(&model, &path)?;
    println!(
        "vocab={} dim={} epochs={} path={}",
        vocab.len(),
        hyper.dim,
        hyper.epochs,
        path.display()
    );
    Ok(())
}

fn cmd_train_mlm(config: &RunConfig, warm_start: Option<PathBuf>) -> Result<(), CliError> {
    let vocab_file = vocab_path(config);
    require(&vocab_file, "wordpiece vocabulary")?;
    let subword_file = subword_path(config);
    require(&subword_file, "subword corpus")?;
    let vocab = subword::WordPieceVocab::load(&vocab_file)?;
    let sentences = read_sentences(&subword_file)?;
    let encoder_config = config.encoder_config(vocab.len())?;
    let hyper = config.mlm_hyper()?;
    let sequences = mlm::train::encode_corpus(&vocab, &sentences, encoder_config.max_seq)?;

    // hash-split a dev set for the heldout-perplexity column of the log
    let indexed: Vec<(String, subword::EncodedSequence)> = sequences
        .into_iter()
        .enumerate()
        .map(|(i, s)| (format!("seq-{i}"), s))
        .collect();
    let (dev, rest) = tune::make_dev_split(
        indexed,
        |(id, _)| id.as_str(),
        config.tune_fraction()?,
        litmine::seed::derive_seed(config.seed()?, "split"),
    )?;
    let dev_sequences: Vec<subword::EncodedSequence> = dev.into_iter().map(|(_, s)| s).collect();
    let train_sequences: Vec<subword::EncodedSequence> =
        rest.into_iter().map(|(_, s)| s).collect();
    let heldout = mlm::train::mask_heldout(
        &dev_sequences,
        &encoder_config,
        litmine::seed::derive_seed(config.seed()?, "heldout"),
    );

    let warm = match warm_start {
        Some(path) => {
            require(&path, "warm-start checkpoint")?;
            let (ckpt_config, params) = mlm::io::load_checkpoint(&path)?;
            if ckpt_config != encoder_config {
                return Err(CliError::Config(
                    "warm-start checkpoint config differs from the configured encoder".into(),
                ));
            }
            Some(params)
        }
        None => None,
    };
    let heldout_opt = if heldout.is_empty() { None } else { Some(&heldout[..]) };
    let trained = match mlm::train_mlm(&train_sequences, &encoder_config, &hyper, warm, heldout_opt)
    {
        Ok(t) => t,
        Err(mlm::MlmError::Diverged { epoch, step, last_good }) => {
            let path = mlm_checkpoint_path(config);
            mlm::io::save_checkpoint(&encoder_config, &last_good, &path)?;
            return Err(CliError::Runtime(format!(
                "training diverged at epoch {epoch}, step {step}; last good checkpoint saved to {}",
                path.display()
            )));
        }
        Err(e) => return Err(e.into()),
    };
    let path = mlm_checkpoint_path(config);
    mlm::io::save_checkpoint(&encoder_config, &trained.params, &path)?;
    let log_path = config.path("paths.mlm_log", "mlm_train_log.csv");
    mlm::io::write_train_log(&trained.log, &log_path)?;
    let final_loss = trained.log.last().map(|r| r.loss).unwrap_or(f64::NAN);
    println!(
        "epochs={} final_loss={final_loss:.6} checkpoint={} log={}",
        hyper.epochs,
        path.display(),
        log_path.display()
    );
    Ok(())
}

fn trial_value(params: &[(String, AxisValue)], name: &str) -> f64 {
    params
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, v)| v.as_f64())
        .unwrap_or(f64::NAN)
}

fn cmd_tune_w2v(config: &RunConfig) -> Result<(), CliError> {
    let words_file = words_path(config);
    require(&words_file, "word-level corpus")?;
    let sentences = read_sentences(&words_file)?;
    let indexed: Vec<(String, Vec<String>)> = sentences
        .into_iter()
        .enumerate()
        .map(|(i, s)| (format!("sent-{i}"), s))
        .collect();
    let (_dev, rest) = tune::make_dev_split(
        indexed,
        |(id, _)| id.as_str(),
        config.tune_fraction()?,
        litmine::seed::derive_seed(config.seed()?, "split"),
    )?;
    let train_sentences: Vec<Vec<String>> = rest.into_iter().map(|(_, s)| s).collect();
    let vocab = embed::build_vocab(&train_sentences, config.w2v_min_count()?)?;
    let base = config.w2v_hyper()?;
    let quadruples = embed::bundled_quadruples();
    let grid = GridSpec::reference_grid();
    let (best, all) = tune::grid_search(
        &grid,
        |params| {
            let hyper = embed::W2VHyper {
                epochs: trial_value(params, "epochs") as usize,
                batch_size: trial_value(params, "batch_size") as usize,
                learning_rate: trial_value(params, "learning_rate"),
                ..base.clone()
            };
            embed::train_skipgram(&train_sentences, &vocab, &hyper).map_err(|e| e.to_string())
        },
        |model| {
            let normalized = embed::normalize(model.clone());
            embed::analogy_score(&normalized, &quadruples).map_err(|e| e.to_string())
        },
        ObjectiveKind::AnalogyScoreMax,
    )?;
    let out = output_dir(config);
    std::fs::create_dir_all(&out)?;
    let sweep = out.join("w2v_sweep.csv");
    tune::write_sweep_log(&grid, &all, &sweep)?;
    println!(
        "trials={} best_index={} best_objective={:.6} sweep={}",
        all.len(),
        best.trial_index,
        best.objective.unwrap_or(f64::NAN),
        sweep.display()
    );
    Ok(())
}

fn cmd_tune_mlm(config: &RunConfig) -> Result<(), CliError> {
    let vocab_file = vocab_path(config);
    require(&vocab_file, "wordpiece vocabulary")?;
    let subword_file = subword_path(config);
    require(&subword_file, "subword corpus")?;
    let vocab = subword::WordPieceVocab::load(&vocab_file)?;
    let sentences = read_sentences(&subword_file)?;
    let encoder_config = config.encoder_config(vocab.len())?;
    let sequences = mlm::train::encode_corpus(&vocab, &sentences, encoder_config.max_seq)?;
    let indexed: Vec<(String, subword::EncodedSequence)> = sequences
        .into_iter()
        .enumerate()
        .map(|(i, s)| (format!("seq-{i}"), s))
        .collect();
    let (dev, rest) = tune::make_dev_split(
        indexed,
        |(id, _)| id.as_str(),
        config.tune_fraction()?,
        litmine::seed::derive_seed(config.seed()?, "split"),
    )?;
    let dev_sequences: Vec<subword::EncodedSequence> = dev.into_iter().map(|(_, s)| s).collect();
    let train_sequences: Vec<subword::EncodedSequence> =
        rest.into_iter().map(|(_, s)| s).collect();
    let heldout = mlm::train::mask_heldout(
        &dev_sequences,
        &encoder_config,
        litmine::seed::derive_seed(config.seed()?, "heldout"),
    );
    if heldout.is_empty() {
        return Err(CliError::Runtime(
            "dev split produced no maskable heldout sequences".into(),
        ));
    }
    let base = config.mlm_hyper()?;
    let grid = GridSpec::reference_grid();
    let (best, all) = tune::grid_search(
        &grid,
        |params| {
            let hyper = mlm::MlmHyper {
                epochs: trial_value(params, "epochs") as usize,
                batch_size: trial_value(params, "batch_size") as usize,
                learning_rate: trial_value(params, "learning_rate"),
                seed: base.seed,
            };
            mlm::train_mlm(&train_sequences, &encoder_config, &hyper, None, None)
                .map_err(|e| e.to_string())
        },
        |trained| {
            mlm::perplexity(&encoder_config, &trained.params, &heldout).map_err(|e| e.to_string())
        },
        ObjectiveKind::PerplexityMin,
    )?;
    let out = output_dir(config);
    std::fs::create_dir_all(&out)?;
    let sweep = out.join("mlm_sweep.csv");
    tune::write_sweep_log(&grid, &all, &sweep)?;
    let heatmap = out.join("mlm_heatmap.csv");
    tune::write_heatmap_csv(&grid, &all, &heatmap)?;
    println!(
        "trials={} best_index={} best_objective={:.6} sweep={} heatmap={}",
        all.len(),
        best.trial_index,
        best.objective.unwrap_or(f64::NAN),
        sweep.display(),
        heatmap.display()
    );
    Ok(())
}

fn cmd_similar(config: &RunConfig, word: &str, k: usize) -> Result<(), CliError> {
    let path = w2v_model_path(config);
    require(&path, "embedding model")?;
    let model = embed::io::load_model(&path)?;
    let model = if model.normalized {
        model
    } else {
        embed::normalize(model)
    };
    let ranked = embed::most_similar(&model, word, k)?;
    let mut out = std::io::stdout().lock();
    for (rank, (term, score)) in ranked.iter().enumerate() {
        writeln!(out, "{}\t{}\t{:.6}", rank + 1, term, score)?;
    }
    Ok(())
}

fn cmd_fill_mask(
    config: &RunConfig,
    template: Option<String>,
    preset: Option<String>,
    k: usize,
) -> Result<(), CliError> {
    let templates: Vec<(String, String)> = match (template, preset) {
        (Some(t), None) => vec![("custom".to_string(), t)],
        (None, Some(name)) if name == "table1" => TEMPLATE_PRESET
            .iter()
            .map(|(a, t)| (a.to_string(), t.to_string()))
            .collect(),
        (None, Some(other)) => {
            return Err(CliError::Config(format!("unknown preset {other}")))
        }
        (None, None) => {
            return Err(CliError::Config(
                "provide --template or --preset table1".into(),
            ))
        }
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    let ckpt = mlm_checkpoint_path(config);
    require(&ckpt, "encoder checkpoint")?;
    let vocab_file = vocab_path(config);
    require(&vocab_file, "wordpiece vocabulary")?;
    let (encoder_config, params) = mlm::io::load_checkpoint(&ckpt)?;
    let vocab = subword::WordPieceVocab::load(&vocab_file)?;
    if vocab.len() != encoder_config.vocab_size {
        return Err(CliError::Config(format!(
            "vocabulary size {} does not match checkpoint vocab_size {}",
            vocab.len(),
            encoder_config.vocab_size
        )));
    }
    let mut out = std::io::stdout().lock();
    for (label, template) in templates {
        writeln!(out, "# {label}\t{template}")?;
        let predictions = mlm::fill_mask(&encoder_config, &params, &vocab, &template, k)?;
        for p in predictions {
            let piece = vocab.piece(p.token_id).unwrap_or("<bad id>");
            writeln!(out, "{}\t{}\t{:.6}", p.rank, piece, p.probability)?;
        }
    }
    Ok(())
}

fn cmd_frequency(config: &RunConfig, terms: &[String]) -> Result<(), CliError> {
    let subword_file = subword_path(config);
    require(&subword_file, "subword corpus")?;
    let sentences = read_sentences(&subword_file)?;
    let mut out = std::io::stdout().lock();
    for term in terms {
        let count = evalrank::corpus_frequency(&sentences, term);
        let status = if count > 0 { "in_corpus" } else { "out_of_corpus" };
        writeln!(out, "{term}\t{count}\t{status}")?;
    }
    Ok(())
}

fn cmd_evaluate(
    config: &RunConfig,
    w2v_list: Option<PathBuf>,
    bert_list: Option<PathBuf>,
    benchmark: Option<PathBuf>,
    curated: Option<PathBuf>,
    heuristic: bool,
) -> Result<(), CliError> {
    let mut lists = Vec::new();
    match w2v_list {
        Some(path) => {
            require(&path, "w2v candidate list")?;
            lists.extend(evalrank::load_candidate_lists(&path)?);
        }
        None => lists.extend(
            evalrank::parse_candidate_lists(evalrank::APPENDIX_W2V_DATA, "bundled w2v fixture")?,
        ),
    }
    match bert_list {
        Some(path) => {
            require(&path, "bert candidate list")?;
            lists.extend(evalrank::load_candidate_lists(&path)?);
        }
        None => lists.extend(evalrank::parse_candidate_lists(
            evalrank::APPENDIX_BERT_DATA,
            "bundled bert fixture",
        )?),
    }
    let lexicon = match benchmark {
        Some(path) => {
            require(&path, "benchmark lexicon")?;
            evalrank::BenchmarkLexicon::load(&path)?
        }
        None => evalrank::BenchmarkLexicon::bundled(),
    };
    let relevance = if heuristic {
        RelevanceMode::Heuristic(evalrank::RelevanceLexicons::default_heuristic())
    } else {
        match curated {
            Some(path) => {
                require(&path, "curated relevance file")?;
                RelevanceMode::load_curated(&path)?
            }
            None => RelevanceMode::bundled_curated(),
        }
    };
    let overlap = config.overlap_definition()?;
    let report =
        evalrank::compute_report::<String>(&lists, &lexicon, &relevance, overlap, None, &[]);

    let out = output_dir(config);
    std::fs::create_dir_all(&out)?;
    let report_path = out.join("report.json");
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    std::fs::write(&report_path, json)?;

    let mut stdout = std::io::stdout().lock();
    for m in &report.models {
        writeln!(
            stdout,
            "model={} total={} relevant={} benchmark_related={} rate={:.4}",
            m.label, m.total, m.relevant, m.benchmark_related, m.benchmark_related_rate
        )?;
    }
    writeln!(stdout, "bert_union_distinct={}", report.bert_union_distinct)?;
    writeln!(
        stdout,
        "overlap_rate={:.4} ({})",
        report.overlap_rate,
        report.overlap_definition.describe()
    )?;
    writeln!(stdout, "report={}", report_path.display())?;
    Ok(())
}

fn cmd_report(config: &RunConfig, report: Option<PathBuf>) -> Result<(), CliError> {
    let out = output_dir(config);
    let report_path = report.unwrap_or_else(|| out.join("report.json"));
    require(&report_path, "evaluation report")?;
    let json = std::fs::read_to_string(&report_path)?;
    let report: evalrank::EvalReport =
        serde_json::from_str(&json).map_err(|e| CliError::Runtime(e.to_string()))?;
    evalrank::export_report(&report, &out)?;
    println!(
        "exported figure4.csv figure5.csv figure6.csv summary.csv to {}",
        out.display()
    );
    Ok(())
}
