//! Acceptance suite: one test per criterion, each printing a pass line with
//! its measured values. Criteria 8 and 12 share one encoder training run.

use std::collections::BTreeMap;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::Rng;

use litmine::chemtok::{normalize_formula, parse_formula, FormulaAst};
use litmine::embed;
use litmine::evalrank::{self, ModelLabel, OverlapDefinition, RelevanceMode};
use litmine::mlm::{self, EncoderConfig, EncoderParams, MlmHyper};
use litmine::seed::rng_for;
use litmine::subword;
use litmine::tune::{self, AxisValue, GridSpec, ObjectiveKind};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_litmine")
}

fn fixture_report() -> evalrank::EvalReport {
    let lists = evalrank::bundled_fixture_lists();
    let lexicon = evalrank::BenchmarkLexicon::bundled();
    let relevance = RelevanceMode::bundled_curated();
    evalrank::compute_report::<String>(
        &lists,
        &lexicon,
        &relevance,
        OverlapDefinition::IntersectionOverW2v,
        None,
        &[],
    )
}

#[test]
fn criterion_01_w2v_fixture_reproduction() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let output = Command::new(bin())
        .current_dir(dir.path())
        .arg("evaluate")
        .output()
        .expect("evaluate runs");
    assert!(output.status.success(), "evaluate failed: {}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8_lossy(&output.stdout);
    let w2v_line = stdout
        .lines()
        .find(|l| l.starts_with("model=w2v"))
        .expect("w2v line in evaluate output");
    assert!(
        w2v_line.contains("relevant=54"),
        "expected relevant=54 in {w2v_line}"
    );
    assert!(
        w2v_line.contains("benchmark_related=45"),
        "expected benchmark_related=45 in {w2v_line}"
    );
    let report = fixture_report();
    let w2v = report.model(ModelLabel::W2v).unwrap();
    assert_eq!(w2v.relevant, 54);
    assert_eq!(w2v.benchmark_related, 45);
    assert!(
        (w2v.benchmark_related_rate - 0.833).abs() <= 0.001,
        "rate {} not within 0.833 +- 0.001",
        w2v.benchmark_related_rate
    );
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(5), "took {elapsed:?}, budget 5 s");
    println!(
        "acceptance criterion 01: w2v fixture relevant=54 benchmark=45 rate={:.4} in {elapsed:?} -- PASS",
        w2v.benchmark_related_rate
    );
}

#[test]
fn criterion_02_bert_union_fixture_reproduction() {
    let start = Instant::now();
    let report = fixture_report();
    assert_eq!(
        report.bert_union_distinct, 161,
        "bert union distinct terms"
    );
    let bert_covered = report.categories_covered_by_bert();
    assert_eq!(bert_covered.len(), 20, "bert union covers all categories");
    let w2v_covered = report.categories_covered_by_w2v();
    let missing: Vec<u32> = (1..=20u32)
        .filter(|id| !w2v_covered.contains(id))
        .collect();
    assert_eq!(
        missing,
        vec![1, 9, 11, 13],
        "w2v must miss exactly trivalent chromium, titanium conversion, zinc-based, calcium-based"
    );
    for label in ModelLabel::BERT_FAMILY {
        let m = report.model(label).unwrap();
        assert!(
            (30..=85).contains(&m.relevant),
            "per-mask relevant count {} for {label} outside [30, 85]",
            m.relevant
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(5), "took {elapsed:?}, budget 5 s");
    println!(
        "acceptance criterion 02: bert union=161 distinct, 20 categories covered, w2v misses {{1,9,11,13}}, per-mask counts in [30,85] in {elapsed:?} -- PASS"
    );
}

#[test]
fn criterion_03_overlap_rate() {
    let report = fixture_report();
    assert!(
        (report.overlap_rate - 0.19).abs() <= 0.01,
        "overlap {} not within 0.19 +- 0.01",
        report.overlap_rate
    );
    // the chosen definition is printed in the exported report
    let dir = tempfile::tempdir().unwrap();
    evalrank::export_report(&report, dir.path()).unwrap();
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(
        summary.contains("overlap_definition,intersection_over_w2v"),
        "summary.csv must state the overlap definition: {summary}"
    );
    println!(
        "acceptance criterion 03: overlap_rate={:.4} (definition printed in report) -- PASS",
        report.overlap_rate
    );
}

/// Random formula surface plus its independently tracked element multiset.
fn random_formula(rng: &mut rand_chacha::ChaCha8Rng) -> (String, BTreeMap<String, u64>) {
    const POOL: [&str; 30] = [
        "H", "B", "C", "N", "O", "F", "P", "S", "K", "V", "Y", "W", "Fe", "Na", "Mg", "Al",
        "Si", "Ca", "Ti", "Cr", "Mn", "Co", "Ni", "Cu", "Zn", "Zr", "Mo", "Ce", "Nd", "Bi",
    ];
    let mut surface = String::new();
    let mut multiset: BTreeMap<String, u64> = BTreeMap::new();
    let n_units = rng.gen_range(1..=4);
    for _ in 0..n_units {
        if rng.gen_bool(0.25) {
            // parenthesized group of 1-3 elements with a multiplier
            let mult = rng.gen_range(1..=4u64);
            surface.push('(');
            for _ in 0..rng.gen_range(1..=3) {
                let sym = POOL[rng.gen_range(0..POOL.len())];
                let count = rng.gen_range(1..=9u64);
                surface.push_str(sym);
                if count > 1 || rng.gen_bool(0.2) {
                    surface.push_str(&count.to_string());
                }
                *multiset.entry(sym.to_string()).or_insert(0) += count * mult;
            }
            surface.push(')');
            if mult > 1 {
                surface.push_str(&mult.to_string());
            }
        } else {
            let sym = POOL[rng.gen_range(0..POOL.len())];
            let count = rng.gen_range(1..=12u64);
            surface.push_str(sym);
            if count > 1 {
                surface.push_str(&count.to_string());
            }
            *multiset.entry(sym.to_string()).or_insert(0) += count;
        }
    }
    (surface, multiset)
}

fn multiset_of(ast: &FormulaAst) -> BTreeMap<String, u64> {
    ast.items()
        .map(|(sym, count)| (sym.to_string(), u64::from(count)))
        .collect()
}

#[test]
fn criterion_04_formula_normalization() {
    // exact reference values
    let expect = [
        ("BiVO4", "BiO4V"),
        ("Na2MoO4", "MoNa2O4"),
        ("Ce(NO3)3", "CeN3O9"),
    ];
    for (input, normalized) in expect {
        let ast = parse_formula(input).unwrap_or_else(|| panic!("{input} must parse"));
        assert_eq!(normalize_formula(&ast), normalized, "{input}");
    }
    // multiset preservation over 10^4 random generated formulas
    let mut rng = rng_for(2024, "formula-property");
    for case in 0..10_000 {
        let (surface, expected) = random_formula(&mut rng);
        let ast = parse_formula(&surface)
            .unwrap_or_else(|| panic!("case {case}: generated surface {surface} must parse"));
        assert_eq!(
            multiset_of(&ast),
            expected,
            "case {case}: parse of {surface}"
        );
        let normalized = normalize_formula(&ast);
        let reparsed = parse_formula(&normalized).unwrap_or_else(|| {
            panic!("case {case}: normalized form {normalized} must reparse")
        });
        assert_eq!(
            multiset_of(&reparsed),
            expected,
            "case {case}: {surface} -> {normalized} changed the element multiset"
        );
    }
    println!(
        "acceptance criterion 04: BiVO4->BiO4V, Na2MoO4->MoNa2O4, Ce(NO3)3->CeN3O9 exact; multisets preserved on 10000 random formulas -- PASS"
    );
}

#[test]
fn criterion_05_analytic_values() {
    let softmax = mlm::softmax(&[0.0, 0.0]).unwrap();
    assert!((softmax[0] - 0.5).abs() < 1e-6 * 0.5);
    assert!((softmax[1] - 0.5).abs() < 1e-6 * 0.5);

    // uniform model over vocab V has perplexity V
    let vocab_size = 24usize;
    let config = EncoderConfig {
        layers: 1,
        hidden: 8,
        heads: 2,
        intermediate: 16,
        max_seq: 8,
        vocab_size,
        mask_rate: 0.15,
        mask_token_fraction: 0.8,
        random_token_fraction: 0.1,
        tie_embeddings: false,
    };
    let mut params = EncoderParams::init(&config, &mut rng_for(1, "acc5"));
    params.head_w.fill(0.0);
    params.head_b.fill(0.0);
    let example = mlm::MaskedExample {
        input_ids: vec![2, 10, 11, 3],
        attention_mask: vec![1; 4],
        labels: vec![None, Some(10), Some(11), None],
    };
    let uniform_pp = mlm::perplexity(&config, &params, std::slice::from_ref(&example)).unwrap();
    let v = vocab_size as f64;
    assert!(
        ((uniform_pp - v) / v).abs() < 1e-6,
        "uniform perplexity {uniform_pp} vs {v}"
    );

    // perfect predictor has perplexity 1
    let mut perfect = EncoderParams::init(&config, &mut rng_for(2, "acc5"));
    perfect.head_w.fill(0.0);
    perfect.head_b.fill(-500.0);
    perfect.head_b[10] = 500.0;
    let example = mlm::MaskedExample {
        input_ids: vec![2, 12, 3],
        attention_mask: vec![1; 3],
        labels: vec![None, Some(10), None],
    };
    let perfect_pp = mlm::perplexity(&config, &perfect, &[example]).unwrap();
    assert!(
        (perfect_pp - 1.0).abs() < 1e-6,
        "perfect perplexity {perfect_pp}"
    );
    println!(
        "acceptance criterion 05: softmax([0,0])=[0.5,0.5], uniform PP={uniform_pp:.9}=V, perfect PP={perfect_pp:.9} -- PASS"
    );
}

#[test]
fn criterion_06_gradient_checks() {
    let start = Instant::now();

    // word-embedding trainer: 10 words x dim 4, every coordinate of the
    // pair-loss gradient against central finite differences
    let sentences: Vec<Vec<String>> = vec![(0..10).map(|i| format!("w{i}")).collect()];
    let vocab = embed::build_vocab(&sentences, 1).unwrap();
    let dim = 4;
    let mut model = embed::EmbeddingModel {
        vocab,
        dim,
        input: vec![0.0; 10 * dim],
        output: vec![0.0; 10 * dim],
        normalized: false,
    };
    let mut rng = rng_for(6, "acc-embed-fd");
    for x in model.input.iter_mut().chain(model.output.iter_mut()) {
        *x = rng.gen_range(-0.9..0.9);
    }
    let center = 3;
    let context = 6;
    let negatives = [0usize, 4, 9];
    let (d_center, d_outputs) =
        embed::trainer::pair_gradients(&model, center, context, &negatives);
    let eps = 1e-6;
    let mut embed_worst: f64 = 0.0;
    let mut check = |analytic: f64, numeric: f64, what: &str| {
        let denom = analytic.abs().max(numeric.abs()).max(1e-8);
        let rel = (analytic - numeric).abs() / denom;
        embed_worst = embed_worst.max(rel);
        assert!(rel < 1e-4, "{what}: analytic {analytic} vs numeric {numeric}");
    };
    for d in 0..dim {
        let mut plus = model.clone();
        plus.input[center * dim + d] += eps;
        let mut minus = model.clone();
        minus.input[center * dim + d] -= eps;
        let numeric = (embed::trainer::pair_loss(&plus, center, context, &negatives)
            - embed::trainer::pair_loss(&minus, center, context, &negatives))
            / (2.0 * eps);
        check(d_center[d], numeric, "center row");
    }
    for (row, grad) in &d_outputs {
        for d in 0..dim {
            let mut plus = model.clone();
            plus.output[*row * dim + d] += eps;
            let mut minus = model.clone();
            minus.output[*row * dim + d] -= eps;
            let numeric = (embed::trainer::pair_loss(&plus, center, context, &negatives)
                - embed::trainer::pair_loss(&minus, center, context, &negatives))
                / (2.0 * eps);
            check(grad[d], numeric, "output row");
        }
    }

    // encoder: L=1, H=8, A=2, vocab 20, every parameter coordinate
    let config = EncoderConfig {
        layers: 1,
        hidden: 8,
        heads: 2,
        intermediate: 16,
        max_seq: 8,
        vocab_size: 20,
        mask_rate: 0.15,
        mask_token_fraction: 0.8,
        random_token_fraction: 0.1,
        tie_embeddings: false,
    };
    let params = EncoderParams::init(&config, &mut rng_for(7, "acc-mlm-fd"));
    let ids = [2u32, 7, 4, 9, 13];
    let mask = [1u8; 5];
    let labels = vec![None, Some(6u32), None, Some(1u32), None];
    let cache = mlm::forward::forward_cached(&config, &params, &ids, &mask).unwrap();
    let mut grads = params.zeros_like();
    let (_, masked) =
        mlm::backward::backward(&config, &params, &cache, &labels, &mut grads).unwrap();
    assert_eq!(masked, 2);

    let loss_of = |p: &EncoderParams| {
        let logits = mlm::forward::encoder_forward(&config, p, &ids, &mask).unwrap();
        mlm::forward::mlm_loss(&logits, &labels).unwrap() * masked as f64
    };
    let mut flat_grads: Vec<(String, Vec<f64>)> = Vec::new();
    grads.for_each_tensor(|name, _, data| flat_grads.push((name, data.to_vec())));
    let eps = 1e-5;
    let mut mlm_worst: f64 = 0.0;
    let mut checked = 0usize;
    for (tensor_idx, (name, grad_data)) in flat_grads.iter().enumerate() {
        for flat in 0..grad_data.len() {
            let mut plus = params.clone();
            perturb_tensor(&mut plus, tensor_idx, flat, eps);
            let mut minus = params.clone();
            perturb_tensor(&mut minus, tensor_idx, flat, -eps);
            let numeric = (loss_of(&plus) - loss_of(&minus)) / (2.0 * eps);
            let analytic = grad_data[flat];
            if analytic.abs() < 1e-12 && numeric.abs() < 1e-9 {
                continue;
            }
            let denom = analytic.abs().max(numeric.abs()).max(1e-6);
            let rel = (analytic - numeric).abs() / denom;
            mlm_worst = mlm_worst.max(rel);
            assert!(
                rel < 1e-4,
                "{name}[{flat}]: analytic {analytic} vs numeric {numeric} rel {rel}"
            );
            checked += 1;
        }
    }
    assert!(checked > 800, "only {checked} coordinates checked");
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(120), "took {elapsed:?}, budget 2 min");
    println!(
        "acceptance criterion 06: gradient checks pass (embed worst rel {embed_worst:.2e}, encoder worst rel {mlm_worst:.2e} over {checked} coords) in {elapsed:?} -- PASS"
    );
}

fn perturb_tensor(params: &mut EncoderParams, tensor_idx: usize, flat: usize, delta: f64) {
    let mut idx = 0usize;
    let mut hit = |slice: &mut [f64]| {
        if idx == tensor_idx {
            slice[flat] += delta;
        }
        idx += 1;
    };
    hit(params.token_emb.as_slice_mut().unwrap());
    hit(params.pos_emb.as_slice_mut().unwrap());
    hit(params.seg_emb.as_slice_mut().unwrap());
    for l in &mut params.layers {
        hit(l.wq.as_slice_mut().unwrap());
        hit(l.wk.as_slice_mut().unwrap());
        hit(l.wv.as_slice_mut().unwrap());
        hit(l.wo.as_slice_mut().unwrap());
        hit(l.w_in.as_slice_mut().unwrap());
        hit(l.w_out.as_slice_mut().unwrap());
        hit(l.ln1_gain.as_slice_mut().unwrap());
        hit(l.ln1_bias.as_slice_mut().unwrap());
        hit(l.ln2_gain.as_slice_mut().unwrap());
        hit(l.ln2_bias.as_slice_mut().unwrap());
    }
    hit(params.head_w.as_slice_mut().unwrap());
    hit(params.head_b.as_slice_mut().unwrap());
}

#[test]
fn criterion_07_embedding_topic_separation() {
    let start = Instant::now();
    // two topics of 50 words each, 2000 sentences, shared function words
    let topic_a: Vec<String> = (0..50).map(|i| format!("alpha{i:02}")).collect();
    let topic_b: Vec<String> = (0..50).map(|i| format!("beta{i:02}")).collect();
    let function_words = ["the", "of", "and", "in", "with", "for"];
    let mut rng = rng_for(77, "two-topic-corpus");
    let mut sentences: Vec<Vec<String>> = Vec::with_capacity(2000);
    for s in 0..2000 {
        let topic = if s % 2 == 0 { &topic_a } else { &topic_b };
        let mut sentence = Vec::with_capacity(9);
        for _ in 0..7 {
            sentence.push(topic[rng.gen_range(0..topic.len())].clone());
        }
        for _ in 0..2 {
            let pos = rng.gen_range(0..=sentence.len());
            sentence.insert(pos, function_words[rng.gen_range(0..function_words.len())].to_string());
        }
        sentences.push(sentence);
    }
    let vocab = embed::build_vocab(&sentences, 1).unwrap();
    let hyper = embed::W2VHyper {
        dim: 32,
        learning_rate: 0.001,
        batch_size: 128,
        epochs: 30,
        window: 8,
        negatives: 5,
        subsample_threshold: 0.0,
        seed: 42,
    };
    let model = embed::train_skipgram(&sentences, &vocab, &hyper).unwrap();
    let model = embed::normalize(model);

    let mean_cosine = |xs: &[String], ys: &[String], skip_same: bool| {
        let mut total = 0.0;
        let mut count = 0usize;
        for (i, x) in xs.iter().enumerate() {
            for (j, y) in ys.iter().enumerate() {
                if skip_same && j <= i {
                    continue;
                }
                let xi = model.vocab.id_of(x).unwrap();
                let yi = model.vocab.id_of(y).unwrap();
                total += embed::cosine(model.input_row(xi), model.input_row(yi)).unwrap();
                count += 1;
            }
        }
        total / count as f64
    };
    let intra_a = mean_cosine(&topic_a, &topic_a, true);
    let intra_b = mean_cosine(&topic_b, &topic_b, true);
    let intra = (intra_a + intra_b) / 2.0;
    let cross = mean_cosine(&topic_a, &topic_b, false);
    let margin = intra - cross;
    let elapsed = start.elapsed();
    assert!(
        margin >= 0.2,
        "intra {intra:.4} - cross {cross:.4} = margin {margin:.4} below 0.2"
    );
    assert!(elapsed < Duration::from_secs(60), "took {elapsed:?}, budget 1 min");
    println!(
        "acceptance criterion 07: intra={intra:.4} cross={cross:.4} margin={margin:.4} in {elapsed:?} -- PASS"
    );
}

/// Shared planted-template training for criteria 8 and 12.
struct PlantedRun {
    config: EncoderConfig,
    vocab: subword::WordPieceVocab,
    params: EncoderParams,
    pairs: Vec<(String, String)>,
    init_pp: f64,
    final_pp: f64,
    elapsed: Duration,
}

fn planted_run() -> &'static PlantedRun {
    static RUN: OnceLock<PlantedRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let start = Instant::now();
        // 200-word vocabulary from syllables
        let syllables = ["ba", "de", "ki", "mo", "ru", "sa", "ti", "vu", "ne", "lo"];
        let word = |i: usize| {
            format!(
                "{}{}{}",
                syllables[(i / 100) % 10],
                syllables[(i / 10) % 10],
                syllables[i % 10]
            )
        };
        let words: Vec<String> = (0..200).map(word).collect();
        let pairs: Vec<(String, String)> = (0..10)
            .map(|i| (words[2 * i].clone(), words[2 * i + 1].clone()))
            .collect();
        let pool = &words[20..];
        let mut rng = rng_for(88, "planted-corpus");
        let sentence = |a: &str, b: &str| -> Vec<String> {
            format!("{a} can be replaced by {b}")
                .split_whitespace()
                .map(str::to_string)
                .collect()
        };
        // four of five sentences exercise the planted pairs, the rest draw
        // both slots from the remaining 180-word pool
        let mut train: Vec<Vec<String>> = Vec::with_capacity(500);
        let mut planted = 0usize;
        for i in 0..500 {
            if i % 5 != 4 {
                let (a, b) = &pairs[planted % 10];
                planted += 1;
                train.push(sentence(a, b));
            } else {
                let a = &pool[rng.gen_range(0..pool.len())];
                let b = &pool[rng.gen_range(0..pool.len())];
                train.push(sentence(a, b));
            }
        }
        let mut heldout_sentences: Vec<Vec<String>> = Vec::with_capacity(50);
        for i in 0..50 {
            if i % 2 == 0 {
                let (a, b) = &pairs[(i / 2) % 10];
                heldout_sentences.push(sentence(a, b));
            } else {
                let a = &pool[rng.gen_range(0..pool.len())];
                let b = &pool[rng.gen_range(0..pool.len())];
                heldout_sentences.push(sentence(a, b));
            }
        }

        let all_words: Vec<String> = train.iter().flatten().cloned().collect();
        let vocab = subword::train_wordpiece(&all_words, 2000).unwrap();
        for (a, b) in &pairs {
            for w in [a, b] {
                let enc = subword::encode(&vocab, std::slice::from_ref(w), 16).unwrap();
                assert_eq!(
                    enc.real_len(),
                    3,
                    "planted word {w} must be a single piece"
                );
            }
        }
        let config = EncoderConfig {
            layers: 2,
            hidden: 64,
            heads: 4,
            intermediate: 256,
            max_seq: 32,
            vocab_size: vocab.len(),
            mask_rate: 0.15,
            mask_token_fraction: 0.8,
            random_token_fraction: 0.1,
            tie_embeddings: false,
        };
        let hyper = MlmHyper {
            epochs: 10,
            batch_size: 32,
            learning_rate: 2e-3,
            seed: 42,
        };
        let train_sequences =
            mlm::train::encode_corpus(&vocab, &train, config.max_seq).unwrap();
        let heldout_sequences =
            mlm::train::encode_corpus(&vocab, &heldout_sentences, config.max_seq).unwrap();
        let heldout = mlm::train::mask_heldout(&heldout_sequences, &config, 99);

        let init = EncoderParams::init(&config, &mut rng_for(hyper.seed, "mlm-init"));
        let init_pp = mlm::perplexity(&config, &init, &heldout).unwrap();
        let trained =
            mlm::train_mlm(&train_sequences, &config, &hyper, None, Some(&heldout)).unwrap();
        let final_pp = trained
            .log
            .last()
            .and_then(|r| r.heldout_perplexity)
            .expect("heldout perplexity logged");
        PlantedRun {
            config,
            vocab,
            params: trained.params,
            pairs,
            init_pp,
            final_pp,
            elapsed: start.elapsed(),
        }
    })
}

#[test]
fn criterion_08_mlm_learns_planted_pattern() {
    let run = planted_run();
    assert!(
        run.final_pp < run.init_pp / 2.0,
        "heldout perplexity {} not halved from {}",
        run.final_pp,
        run.init_pp
    );
    let mut hits = 0usize;
    for (a, b) in &run.pairs {
        let template = format!("{a} can be replaced by [MASK]");
        let predictions =
            mlm::fill_mask(&run.config, &run.params, &run.vocab, &template, 5).unwrap();
        let b_id = run.vocab.id_of(b).expect("planted word is a piece");
        if predictions.iter().any(|p| p.token_id == b_id) {
            hits += 1;
        }
    }
    assert!(
        hits >= 8,
        "planted replacement in top-5 for only {hits}/10 pairs"
    );
    assert!(
        run.elapsed < Duration::from_secs(600),
        "took {:?}, budget 10 min",
        run.elapsed
    );
    println!(
        "acceptance criterion 08: heldout PP {:.2} -> {:.2} (halved), top-5 hits {hits}/10 in {:?} -- PASS",
        run.init_pp, run.final_pp, run.elapsed
    );
}

#[test]
fn criterion_09_grid_harness() {
    let start = Instant::now();
    let grid = GridSpec::reference_grid();
    let value = |params: &[(String, AxisValue)], name: &str| {
        params
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_f64())
            .unwrap()
    };
    let (best, all) = tune::grid_search(
        &grid,
        |params| Ok::<_, String>(params.to_vec()),
        |params| {
            let e = value(params, "epochs");
            let b = value(params, "batch_size");
            let lr = value(params, "learning_rate");
            Ok((e - 10.0).powi(2) + (b - 32.0).powi(2) + (lr.log10() + 4.0).powi(2))
        },
        ObjectiveKind::PerplexityMin,
    )
    .unwrap();
    assert_eq!(all.len(), 18, "grid must execute exactly 18 trials");
    assert_eq!(value(&best.params, "epochs"), 10.0);
    assert_eq!(value(&best.params, "batch_size"), 32.0);
    assert!((value(&best.params, "learning_rate") - 1e-4).abs() < 1e-12);
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(60), "took {elapsed:?}, budget 1 min");
    println!(
        "acceptance criterion 09: 18 trials, planted optimum (10, 32, 1e-4) selected in {elapsed:?} -- PASS"
    );
}

#[test]
fn criterion_10_masking_statistics() {
    let config = EncoderConfig::desk_scale(500);
    let mut rng = rng_for(10, "acc-masking");
    let mut sequences = Vec::with_capacity(10_000);
    let mut gen = rng_for(11, "acc-masking-content");
    for _ in 0..10_000 {
        let mut ids = vec![subword::CLS];
        for _ in 0..100 {
            ids.push(gen.gen_range(5..500u32));
        }
        ids.push(subword::SEP);
        sequences.push(subword::EncodedSequence {
            attention_mask: vec![1; ids.len()],
            type_ids: vec![0; ids.len()],
            ids,
        });
    }
    let examples = mlm::mask_batch(&sequences, &config, &mut rng);
    assert_eq!(examples.len(), 10_000);
    let mut total_masked = 0usize;
    for ex in &examples {
        total_masked += ex.masked_count();
        assert!(ex.labels[0].is_none(), "CLS masked");
        assert!(ex.labels.last().unwrap().is_none(), "SEP masked");
        assert_eq!(ex.input_ids[0], subword::CLS);
        assert_eq!(*ex.input_ids.last().unwrap(), subword::SEP);
    }
    let mean_fraction = total_masked as f64 / (10_000.0 * 100.0);
    assert!(
        (0.149..=0.151).contains(&mean_fraction),
        "mean masked fraction {mean_fraction}"
    );
    println!(
        "acceptance criterion 10: mean masked fraction {mean_fraction:.4} over 10^4 sequences, specials untouched -- PASS"
    );
}

#[test]
fn criterion_11_training_determinism() {
    let run_once = || {
        let dir = tempfile::tempdir().unwrap();
        let corpus_words = "zinc coating protects steel plate\ncerium nitrate inhibits corrosion attack\nmolybdate films replace chromate layers\n".repeat(20);
        let corpus_subword = corpus_words.clone();
        std::fs::write(dir.path().join("corpus_words.txt"), &corpus_words).unwrap();
        std::fs::write(dir.path().join("corpus_subword.txt"), &corpus_subword).unwrap();
        std::fs::write(
            dir.path().join("config.txt"),
            "seed = 42\nw2v.dim = 12\nw2v.epochs = 3\nw2v.min_count = 1\nwordpiece.target_size = 300\nmlm.layers = 1\nmlm.hidden = 16\nmlm.heads = 2\nmlm.intermediate = 32\nmlm.max_seq = 32\nmlm.epochs = 1\n",
        )
        .unwrap();
        for cmd in ["train-wordpiece", "train-w2v", "train-mlm"] {
            let output = Command::new(bin())
                .current_dir(dir.path())
                .args(["--config", "config.txt", cmd])
                .output()
                .unwrap();
            assert!(
                output.status.success(),
                "{cmd}: {}",
                String::from_utf8_lossy(&output.stderr)
            );
        }
        (
            std::fs::read(dir.path().join("w2v.cemb")).unwrap(),
            std::fs::read(dir.path().join("mlm.ckpt")).unwrap(),
        )
    };
    let (w2v_a, mlm_a) = run_once();
    let (w2v_b, mlm_b) = run_once();
    assert_eq!(w2v_a, w2v_b, "train-w2v output differs between runs");
    assert_eq!(mlm_a, mlm_b, "train-mlm output differs between runs");
    println!(
        "acceptance criterion 11: train-w2v ({} bytes) and train-mlm ({} bytes) byte-identical across reruns -- PASS",
        w2v_a.len(),
        mlm_a.len()
    );
}

#[test]
fn criterion_12_bidirectionality() {
    let run = planted_run();
    // sequence "a0 can be replaced by b0"; mask the position of "can" and
    // edit the token to its right-most context (the final content word)
    let (a0, b0) = &run.pairs[0];
    let (_, b1) = &run.pairs[1];
    let tokens: Vec<String> = format!("{a0} can be replaced by {b0}")
        .split_whitespace()
        .map(str::to_string)
        .collect();
    let encoded = subword::encode(&run.vocab, &tokens, run.config.max_seq).unwrap();
    let n = encoded.real_len();
    let mut ids: Vec<u32> = encoded.ids[..n].to_vec();
    let mask_vec: Vec<u8> = encoded.attention_mask[..n].to_vec();
    let mask_pos = 2usize; // CLS, a0, can, ...
    ids[mask_pos] = subword::MASK;
    let right_pos = n - 2; // the b word, right of the mask
    assert!(right_pos > mask_pos);
    let logits_a = mlm::forward::encoder_forward(&run.config, &run.params, &ids, &mask_vec).unwrap();
    let mut edited = ids.clone();
    edited[right_pos] = run.vocab.id_of(b1).unwrap();
    let logits_b = mlm::forward::encoder_forward(&run.config, &run.params, &edited, &mask_vec).unwrap();
    let mut max_diff: f64 = 0.0;
    for c in 0..run.config.vocab_size {
        max_diff = max_diff.max((logits_a[[mask_pos, c]] - logits_b[[mask_pos, c]]).abs());
    }
    assert!(
        max_diff > 1e-6,
        "mask-position logits blind to right-context edit (max diff {max_diff:e})"
    );
    println!(
        "acceptance criterion 12: right-context edit moved mask logits by {max_diff:.3e} (> 1e-6) -- PASS"
    );
}
