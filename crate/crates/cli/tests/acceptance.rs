//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use polarscale::corpus::Vocabulary;
use polarscale::evalkit::{run_benchmark, sample_seed_sets, BenchmarkOptions, BenchmarkRow, Family};
use polarscale::model::{sigmoid, Algorithm, EmbeddingModel, Matrix, Provenance};
use polarscale::modelfit::seed_perplexity;
use polarscale::scaling::{
    combine_scores, dictionary_word_scores, probabilistic_word_scores, score_documents, spatial_word_scores,
    SeedMode, SeedSet,
};
use polarscale::svd::{truncated_svd, SentenceTermMatrix};
use polarscale::synth::{generate, pseudo_lexicon, SyntheticConfig};
use polarscale::w2v::{train_example, Scratch};
use polarscale::{Corpus, Document, PatternSet, TokenizerConfig, W2VConfig};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(message())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:.1?}, limit {limit:?}"))
}

// 1. gradient oracle

fn ns_loss(hidden: &[f64], target: &[f64], negatives: &[&[f64]]) -> f64 {
    let dot = |w: &[f64]| hidden.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
    -sigmoid(dot(target)).ln() - negatives.iter().map(|w| sigmoid(-dot(w)).ln()).sum::<f64>()
}

fn example_loss(v: &Matrix<f64>, w: &Matrix<f64>, contexts: &[u32], target: u32, negatives: &[u32]) -> f64 {
    let k = v.cols();
    let mut hidden = vec![0.0; k];
    for &c in contexts {
        for (h, x) in hidden.iter_mut().zip(v.row(c as usize)) {
            *h += x / contexts.len() as f64;
        }
    }
    let negs: Vec<&[f64]> = negatives.iter().map(|&n| w.row(n as usize)).collect();
    ns_loss(&hidden, w.row(target as usize), &negs)
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

fn gradient_oracle() -> Check {
    const K: usize = 8;
    const N_TERMS: usize = 40;
    const STEP: f64 = 1e-5;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut triples = 0;
    for trial in 0..200 {
        let random = |rng: &mut ChaCha8Rng| {
            Matrix::from_vec(N_TERMS, K, (0..N_TERMS * K).map(|_| rng.random_range(-0.8..0.8)).collect())
        };
        let v = random(&mut rng);
        let w = random(&mut rng);
        // even trials: one context (skip-gram); odd trials: averaged contexts (CBOW)
        let n_contexts = if trial % 2 == 0 { 1 } else { rng.random_range(2..=4) };
        let picks = index::sample(&mut rng, N_TERMS, n_contexts + 6).into_vec();
        let contexts: Vec<u32> = picks[..n_contexts].iter().map(|&i| i as u32).collect();
        let target = picks[n_contexts] as u32;
        let negatives: Vec<u32> = picks[n_contexts + 1..].iter().map(|&i| i as u32).collect();

        let (mut v1, mut w1) = (v.clone(), w.clone());
        let mut scratch = Scratch::new(K);
        train_example(&mut v1, &mut w1, &contexts, target, &negatives, 1.0, &mut scratch);

        let numeric = |m: &Matrix<f64>, is_v: bool, row: usize, col: usize| {
            let (mut plus, mut minus) = (m.clone(), m.clone());
            plus.row_mut(row)[col] += STEP;
            minus.row_mut(row)[col] -= STEP;
            let (lp, lm) = if is_v {
                (example_loss(&plus, &w, &contexts, target, &negatives), example_loss(&minus, &w, &contexts, target, &negatives))
            } else {
                (example_loss(&v, &plus, &contexts, target, &negatives), example_loss(&v, &minus, &contexts, target, &negatives))
            };
            (lp - lm) / (2.0 * STEP)
        };
        let mut analytic_v = Vec::new();
        let mut numeric_v = Vec::new();
        for &c in &contexts {
            for j in 0..K {
                analytic_v.push(v.row(c as usize)[j] - v1.row(c as usize)[j]);
                numeric_v.push(numeric(&v, true, c as usize, j));
            }
        }
        let mut analytic_w = Vec::new();
        let mut numeric_w = Vec::new();
        for &r in std::iter::once(&target).chain(&negatives) {
            for j in 0..K {
                analytic_w.push(w.row(r as usize)[j] - w1.row(r as usize)[j]);
                numeric_w.push(numeric(&w, false, r as usize, j));
            }
        }
        worst = worst.max(relative_error(&analytic_v, &numeric_v)).max(relative_error(&analytic_w, &numeric_w));
        triples += 1;
    }
    let elapsed = start.elapsed();
    ensure(worst < 1e-4, || format!("max relative error {worst:.3e} >= 1e-4"))?;
    within(elapsed, Duration::from_secs(10))?;
    Ok(format!("{triples} triples, max relative error {worst:.2e}, {elapsed:.1?}"))
}

// 2. dictionary equivalence

fn dictionary_equivalence() -> Check {
    let lexicon = pseudo_lexicon(600, 2, 20, 30, 5);
    let docs = generate(&lexicon, &SyntheticConfig { n_docs: 1000, rng_seed: 9, ..Default::default() });
    let start = Instant::now();
    let corpus = Corpus::build(&docs, &TokenizerConfig::default(), 5).map_err(|e| e.to_string())?;
    let mut patterns: Vec<String> = lexicon.topics[0].dictionary().patterns().to_vec();
    patterns.push(lexicon.background[3].clone());
    let dictionary = PatternSet::new(&patterns).map_err(|e| e.to_string())?;
    let table = score_documents(&corpus, &dictionary_word_scores(&dictionary, &corpus.vocab), 1)
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();

    let matches = |term: &str| {
        patterns.iter().any(|p| match p.strip_suffix('*') {
            Some(prefix) => term.starts_with(prefix),
            None => term == p,
        })
    };
    let mut compared = 0;
    let mut rows = table.rows.iter();
    for doc in &docs {
        let tokens: Vec<String> = doc
            .text
            .split_whitespace()
            .map(|t| t.trim_end_matches('.').to_lowercase())
            .filter(|t| corpus.vocab.get(t).is_some())
            .collect();
        if tokens.is_empty() {
            ensure(table.skipped.contains(&doc.id), || format!("{} should be skipped", doc.id))?;
            continue;
        }
        let row = rows.next().ok_or("score table is short")?;
        ensure(row.id == doc.id, || format!("row {} where {} expected", row.id, doc.id))?;
        let hits = tokens.iter().filter(|t| matches(t)).count();
        let expected = hits as f64 / tokens.len() as f64;
        ensure(row.score == expected && row.n_tokens == tokens.len() as u64, || {
            format!("{}: {} ({} tokens) vs oracle {} ({} tokens)", doc.id, row.score, row.n_tokens, expected, tokens.len())
        })?;
        compared += 1;
    }
    ensure(compared >= 990, || format!("only {compared} documents compared"))?;
    within(elapsed, Duration::from_secs(5))?;
    Ok(format!("{compared} documents identical to the count/N oracle, {elapsed:.1?}"))
}

// 3. perplexity closed forms

fn vocab(terms: &[&str]) -> Vocabulary {
    Vocabulary::from_counts(terms.iter().map(|t| (t.to_string(), 1)).collect(), 1).expect("vocabulary")
}

fn model(vocab: &Vocabulary, v: Vec<f32>, w: Vec<f32>, k: usize) -> EmbeddingModel {
    let n = vocab.len();
    EmbeddingModel::new(
        vocab.clone(),
        Matrix::from_vec(n, k, v),
        Some(Matrix::from_vec(n, k, w)),
        Provenance {
            algorithm: Algorithm::SkipGram,
            window: 5,
            rng_seed: 0,
        },
    )
    .expect("model")
}

fn corpus_of(vocab: &Vocabulary, texts: &[&str]) -> Corpus {
    let docs: Vec<Document> = texts.iter().enumerate().map(|(i, t)| Document::new(format!("d{i}"), *t)).collect();
    Corpus::with_vocabulary(&docs, &TokenizerConfig::default(), vocab.clone()).expect("corpus")
}

fn perplexity_closed_forms() -> Check {
    let e = |x: polarscale::Error| x.to_string();

    // one single-token document holding a seed; zero output layer gives uniform predictions
    let terms = ["alpha", "beta", "delta", "gamma"];
    let voc = vocab(&terms);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let v: Vec<f32> = (0..terms.len() * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
    let uniform = model(&voc, v.clone(), vec![0.0; terms.len() * 3], 3);
    let seeds = SeedSet::from_weights(&voc, &[("alpha", 1.0), ("beta", 1.0), ("gamma", 1.0)], SeedMode::Unipolar).map_err(e)?;
    let p = seed_perplexity(&uniform, &corpus_of(&voc, &["beta"]), &seeds).map_err(e)?.perplexity;
    ensure((p - 3.0).abs() < 1e-9, || format!("uniform single token: {p} != M = 3"))?;

    // a single seed always gives 1
    let w: Vec<f32> = (0..terms.len() * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
    let trained = model(&voc, v, w, 3);
    let one = SeedSet::from_weights(&voc, &[("gamma", 1.0)], SeedMode::Unipolar).map_err(e)?;
    let p1 = seed_perplexity(&trained, &corpus_of(&voc, &["gamma alpha delta", "gamma gamma beta"]), &one)
        .map_err(e)?
        .perplexity;
    ensure((p1 - 1.0).abs() < 1e-9, || format!("single seed: {p1} != 1"))?;

    // two documents, two seeds, hand-chosen parameters
    let v = [0.5f32, -0.25, 1.0, 0.75, -0.5, 0.5, 0.25, 0.0];
    let w = [1.0f32, 0.5, -0.75, 0.25, 0.0, 0.0, 0.0, 0.0];
    let hand = model(&voc, v.to_vec(), w.to_vec(), 2);
    let two = SeedSet::from_weights(&voc, &[("alpha", 1.0), ("beta", 1.0)], SeedMode::Unipolar).map_err(e)?;
    let texts = ["alpha alpha gamma delta", "beta gamma gamma"];
    let got = seed_perplexity(&hand, &corpus_of(&voc, &texts), &two).map_err(e)?.perplexity;

    let row = |m: &[f32], i: usize| [f64::from(m[2 * i]), f64::from(m[2 * i + 1])];
    let index = |t: &str| terms.iter().position(|x| *x == t).expect("term");
    let (mut num, mut den) = (0.0, 0.0);
    for text in texts {
        let tokens: Vec<usize> = text.split(' ').map(index).collect();
        let n = tokens.len() as f64;
        let mut q = [0.0f64; 2];
        for (m, qm) in q.iter_mut().enumerate() {
            let wm = row(&w, m);
            for &t in &tokens {
                let vi = row(&v, t);
                *qm += 1.0 / (1.0 + (-(vi[0] * wm[0] + vi[1] * wm[1])).exp()) / n;
            }
        }
        let total = q[0] + q[1];
        for (m, qm) in q.iter().enumerate() {
            let f = tokens.iter().filter(|&&t| t == m).count() as f64;
            num += f / n * (qm / total).ln();
            den += f;
        }
    }
    let expected = (-num / den).exp();
    ensure((got - expected).abs() < 1e-9, || format!("hand case: {got} vs recomputed {expected}"))?;
    Ok(format!("uniform = {p:.12}, single seed = {p1:.12}, hand case = {got:.9} (oracle {expected:.9})"))
}

// 4. scaling invariants

fn scaling_invariants() -> Check {
    let e = |x: polarscale::Error| x.to_string();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_self = 0.0f64;
    for trial in 0..50 {
        let n = rng.random_range(8..40);
        let k = rng.random_range(2..12);
        let names: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        let voc = Vocabulary::from_counts(names.iter().map(|t| (t.clone(), rng.random_range(1..100))).collect(), 1)
            .map_err(e)?;
        let v: Vec<f32> = (0..n * k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f32> = (0..n * k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = model(&voc, v, w, k);

        let n_seeds = rng.random_range(1..=5);
        let picks = index::sample(&mut rng, n, n_seeds).into_vec();
        let weighted: Vec<(&str, f64)> =
            picks.iter().map(|&i| (names[i].as_str(), rng.random_range(0.1..2.0))).collect();
        let seeds = SeedSet::from_weights(&voc, &weighted, SeedMode::Unipolar).map_err(e)?;
        let bound = seeds.total_weight() / seeds.len() as f64;
        let prob = probabilistic_word_scores(&m, &seeds).map_err(e)?;
        ensure(prob.scores.iter().all(|&g| g > 0.0 && g < bound), || {
            format!("model {trial}: probabilistic score outside (0, {bound})")
        })?;

        let single = SeedSet::from_weights(&voc, &[(names[picks[0]].as_str(), 1.0)], SeedMode::Unipolar).map_err(e)?;
        let spatial = spatial_word_scores(&m, &single).map_err(e)?;
        let seed_index = single.expanded[0].index as usize;
        let argmax = (0..spatial.scores.len()).max_by(|&a, &b| spatial.scores[a].total_cmp(&spatial.scores[b])).expect("scores");
        ensure(argmax == seed_index && (spatial.scores[seed_index] - 1.0).abs() < 1e-9, || {
            format!("model {trial}: single-seed argmax {argmax}, seed {seed_index} scores {}", spatial.scores[seed_index])
        })?;

        let docs: Vec<Document> = (0..20)
            .map(|d| {
                let len = rng.random_range(1..15);
                let text: Vec<&str> = (0..len).map(|_| names[rng.random_range(0..n)].as_str()).collect();
                Document::new(format!("d{d}"), text.join(" "))
            })
            .collect();
        let corpus = Corpus::with_vocabulary(&docs, &TokenizerConfig::default(), voc.clone()).map_err(e)?;
        for polarity in [&prob, &spatial] {
            let table = score_documents(&corpus, polarity, 1).map_err(e)?;
            let (lo, hi) = (polarity.min(), polarity.max());
            let slack = 1e-12 * lo.abs().max(hi.abs());
            ensure(table.rows.iter().all(|r| r.score >= lo - slack && r.score <= hi + slack), || {
                format!("model {trial}: document score outside [{lo}, {hi}]")
            })?;
        }
        let table = score_documents(&corpus, &prob, 1).map_err(e)?;
        let combined = combine_scores(&table, &table).map_err(e)?.table;
        for (a, b) in combined.rows.iter().zip(&table.rows) {
            worst_self = worst_self.max((a.score - b.score).abs());
        }
        ensure(combined.rows.len() == table.rows.len() && worst_self <= 1e-12, || {
            format!("model {trial}: combine(x, x) differs from x by {worst_self:e}")
        })?;
    }
    Ok(format!("50 toy models, max |combine(x,x) - x| = {worst_self:.1e}"))
}

// 5. SVD oracle

fn svd_oracle() -> Check {
    let e = |x: polarscale::Error| x.to_string();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for trial in 0..20 {
        let rows: Vec<Vec<(u32, f64)>> = (0..50)
            .map(|_| {
                let mut row = Vec::new();
                for c in 0..30u32 {
                    if rng.random::<f64>() < 0.2 {
                        row.push((c, f64::from(rng.random_range(1..5u8))));
                    }
                }
                row
            })
            .collect();
        let matrix = SentenceTermMatrix::from_rows(30, &rows);
        let dense: DMatrix<f64> = matrix.to_dense();
        let mut exact: Vec<f64> = dense.clone().svd(false, false).singular_values.iter().copied().collect();
        exact.sort_by(|a, b| b.total_cmp(a));
        let k = [5, 10, 15][trial % 3];
        let got = truncated_svd(&matrix, k, trial as u64).map_err(e)?;
        for (s, x) in got.singular_values.iter().zip(&exact) {
            worst = worst.max((s - x).abs() / x);
        }
    }
    ensure(worst < 1e-6, || format!("singular values off by {worst:.2e} relative"))?;

    let mut worst_rank1: f64 = 0.0;
    for trial in 0..10 {
        let u: Vec<f64> = (0..50).map(|_| if rng.random::<f64>() < 0.3 { rng.random_range(0.5..3.0) } else { 0.0 }).collect();
        let v: Vec<f64> = (0..30).map(|_| if rng.random::<f64>() < 0.3 { rng.random_range(0.5..3.0) } else { 0.0 }).collect();
        let rows: Vec<Vec<(u32, f64)>> = u
            .iter()
            .map(|&a| v.iter().enumerate().filter(|(_, &b)| a * b != 0.0).map(|(c, &b)| (c as u32, a * b)).collect())
            .collect();
        let matrix = SentenceTermMatrix::from_rows(30, &rows);
        if matrix.nnz() == 0 {
            continue;
        }
        let got = truncated_svd(&matrix, 1, 100 + trial).map_err(e)?;
        let err = (got.reconstruct() - matrix.to_dense()).abs().max();
        worst_rank1 = worst_rank1.max(err);
    }
    ensure(worst_rank1 < 1e-9, || format!("rank-1 reconstruction error {worst_rank1:.2e}"))?;
    Ok(format!("20 random 50x30 matrices, singular values within {worst:.1e}; rank-1 error {worst_rank1:.1e}"))
}

// 6 and 7. synthetic separation and perplexity-quality association

const SYNTHETIC_KS: [usize; 3] = [25, 50, 100];

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

fn synthetic_benchmark() -> Result<(Vec<BenchmarkRow>, Vec<W2VConfig>, Duration), String> {
    let start = Instant::now();
    let lexicon = pseudo_lexicon(1000, 2, 25, 40, 1);
    let docs = generate(&lexicon, &SyntheticConfig { n_docs: 2000, ..Default::default() });
    let corpus = Corpus::build(&docs, &TokenizerConfig::default(), 5).map_err(|e| e.to_string())?;
    let dictionary = lexicon.topics[0].dictionary();
    let samples = sample_seed_sets(&dictionary, 10, 5, 7).map_err(|e| e.to_string())?;
    let grid: Vec<W2VConfig> = SYNTHETIC_KS
        .iter()
        .flat_map(|&k| [W2VConfig::skip_gram(k), W2VConfig::cbow(k)])
        .collect();
    let options = BenchmarkOptions {
        parallel: true,
        ..Default::default()
    };
    let rows = run_benchmark(&corpus, &dictionary, &samples, &grid, &options).map_err(|e| e.to_string())?;
    Ok((rows, grid, start.elapsed()))
}

fn synthetic_separation(rows: &[BenchmarkRow], elapsed: Duration) -> Check {
    let correlations = |family: Family, algorithm: Algorithm, k: usize| -> Vec<f64> {
        rows.iter()
            .filter(|r| r.family == family && r.algorithm == Some(algorithm) && r.k == Some(k))
            .map(|r| r.correlation)
            .collect()
    };
    let mut summary = Vec::new();
    for k in SYNTHETIC_KS {
        let prob = correlations(Family::W2vProbabilistic, Algorithm::SkipGram, k);
        let spatial = correlations(Family::W2vSpatial, Algorithm::SkipGram, k);
        let svd = correlations(Family::SvdSpatial, Algorithm::Svd, k);
        ensure(prob.len() == 10 && spatial.len() == 10 && svd.len() == 10, || format!("k={k}: missing rows"))?;
        let (p, s, v) = (median(prob), median(spatial), median(svd));
        ensure(p > 0.5 && p > s && p > v, || {
            format!("k={k}: median r probabilistic {p:.3}, spatial {s:.3}, SVD {v:.3}")
        })?;
        summary.push(format!("k={k} r {p:.3} > {s:.3} (spatial), {v:.3} (SVD)"));
    }
    within(elapsed, Duration::from_secs(300))?;
    Ok(format!("{}; {elapsed:.0?}", summary.join("; ")))
}

fn perplexity_association(rows: &[BenchmarkRow], grid: &[W2VConfig]) -> Check {
    let mut hits = 0;
    let mut ranks = Vec::new();
    for sample in 1..=10 {
        let conditions: Vec<&BenchmarkRow> = rows
            .iter()
            .filter(|r| r.sample_id == sample && r.family == Family::W2vProbabilistic)
            .collect();
        ensure(conditions.len() == grid.len(), || format!("sample {sample}: {} conditions", conditions.len()))?;
        let chosen = conditions
            .iter()
            .filter(|r| r.perplexity.is_some())
            .min_by(|a, b| a.perplexity.unwrap().total_cmp(&b.perplexity.unwrap()))
            .ok_or_else(|| format!("sample {sample}: no perplexity"))?;
        let rank = conditions.iter().filter(|r| r.correlation > chosen.correlation).count();
        if rank < conditions.len().div_ceil(2) {
            hits += 1;
        }
        ranks.push((rank + 1).to_string());
    }
    ensure(hits >= 8, || format!("lowest-perplexity config in top half in only {hits}/10 samples"))?;
    Ok(format!("top half in {hits}/10 samples (correlation ranks of chosen config: {} of {})", ranks.join(","), grid.len()))
}

// 8 and 9. command-line runs

fn tutorial() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/tutorial")
}

fn polarscale(dir: &Path, args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_polarscale"))
        .args(args)
        .arg("--threads")
        .arg("1")
        .current_dir(dir)
        .env_remove("POLARSCALE_THREADS")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("polarscale {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn determinism_run(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let data = tutorial();
    let corpus = data.join("corpus.jsonl");
    let corpus = corpus.to_str().ok_or("path")?;
    let seeds = data.join("health_seeds.txt");
    let seeds = seeds.to_str().ok_or("path")?;
    let dictionary = data.join("health.txt");
    let grid = data.join("grid.txt");
    let mut stdout = String::new();
    stdout += &polarscale(dir, &["train", "--corpus", corpus, "--k", "50", "--seed", "11", "--out", "model.bin"])?;
    stdout += &polarscale(dir, &["optimize", "--corpus", corpus, "--seeds", seeds, "--grid", grid.to_str().ok_or("path")?, "--seed", "11", "--out", "report.tsv"])?;
    stdout += &polarscale(dir, &["score", "--model", "model.bin", "--corpus", corpus, "--seeds", seeds, "--out", "scores.tsv"])?;
    stdout += &polarscale(
        dir,
        &[
            "evaluate", "--corpus", corpus, "--dictionary", dictionary.to_str().ok_or("path")?, "--grid",
            grid.to_str().ok_or("path")?, "--samples", "3", "--sample-size", "5", "--seed", "11", "--out",
            "benchmark.tsv", "--scores", "scores.tsv", "--groups", "china=china,chinese,beijing", "--series-out",
            "series.tsv",
        ],
    )?;
    let mut files = vec![("stdout".to_string(), stdout.into_bytes())];
    for name in ["model.bin", "report.tsv", "scores.tsv", "benchmark.tsv", "series.tsv"] {
        files.push((name.to_string(), fs::read(dir.join(name)).map_err(|e| format!("{name}: {e}"))?));
    }
    Ok(files)
}

fn determinism() -> Check {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = determinism_run(a.path())?;
    let second = determinism_run(b.path())?;
    for ((name, x), (_, y)) in first.iter().zip(&second) {
        ensure(x == y, || format!("{name} differs between runs"))?;
    }
    let bytes: usize = first.iter().map(|(_, x)| x.len()).sum();
    Ok(format!("train/optimize/evaluate outputs byte-identical ({} files, {bytes} bytes)", first.len()))
}

fn is_date(s: &str) -> bool {
    let b = s.as_bytes();
    b.len() == 10
        && b.iter().enumerate().all(|(i, c)| if i == 4 || i == 7 { *c == b'-' } else { c.is_ascii_digit() })
}

fn check_score_table(path: &Path, expected_rows: usize) -> Result<(), String> {
    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    ensure(lines.next() == Some("id\tdate\ttags\tn_tokens\tscore"), || format!("{}: bad header", path.display()))?;
    let mut n = 0;
    for line in lines {
        let f: Vec<&str> = line.split('\t').collect();
        ensure(f.len() == 5, || format!("{}: {} fields in {line:?}", path.display(), f.len()))?;
        ensure(!f[0].is_empty() && is_date(f[1]), || format!("{}: bad id/date in {line:?}", path.display()))?;
        ensure(f[3].parse::<u64>().is_ok_and(|n| n > 0), || format!("{}: bad n_tokens in {line:?}", path.display()))?;
        ensure(f[4].parse::<f64>().is_ok_and(|s| s.is_finite() && s >= 0.0), || {
            format!("{}: bad score in {line:?}", path.display())
        })?;
        n += 1;
    }
    ensure(n == expected_rows, || format!("{}: {n} rows, expected {expected_rows}", path.display()))
}

fn tutorial_run() -> Check {
    let data = tutorial();
    let corpus = data.join("corpus.jsonl");
    let n_docs = fs::read_to_string(&corpus).map_err(|e| e.to_string())?.lines().count();
    ensure(n_docs >= 500, || format!("tutorial corpus has {n_docs} documents"))?;
    let corpus = corpus.to_str().ok_or("path")?;
    let health = data.join("health_seeds.txt");
    let achievement = data.join("achievement_seeds.txt");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let start = Instant::now();
    polarscale(d, &["train", "--corpus", corpus, "--algo", "sg", "--k", "100", "--window", "10", "--lr", "0.05", "--epochs", "10", "--out", "m.bin"])?;
    polarscale(d, &["score", "--model", "m.bin", "--corpus", corpus, "--seeds", health.to_str().ok_or("path")?, "--mode", "probabilistic", "--out", "health.tsv", "--word-scores", "health_words.tsv"])?;
    polarscale(d, &["score", "--model", "m.bin", "--corpus", corpus, "--seeds", achievement.to_str().ok_or("path")?, "--mode", "probabilistic", "--out", "achievement.tsv"])?;
    polarscale(d, &["score", "--combine", "health.tsv", "achievement.tsv", "--out", "combined.tsv"])?;
    polarscale(d, &["evaluate", "--corpus", corpus, "--scores", "combined.tsv", "--groups", "china=china,chinese,beijing", "--series-out", "series.tsv"])?;
    let elapsed = start.elapsed();

    let model = fs::read(d.join("m.bin")).map_err(|e| e.to_string())?;
    ensure(model.starts_with(b"LSSW2V1\0"), || "model file lacks the container magic".into())?;
    for table in ["health.tsv", "achievement.tsv", "combined.tsv"] {
        check_score_table(&d.join(table), n_docs)?;
    }

    let words = fs::read_to_string(d.join("health_words.tsv")).map_err(|e| e.to_string())?;
    let mut lines = words.lines();
    ensure(lines.next() == Some("term\tfrequency\tscore"), || "word scores: bad header".into())?;
    let mut previous = f64::INFINITY;
    for line in lines {
        let f: Vec<&str> = line.split('\t').collect();
        ensure(f.len() == 3 && f[1].parse::<u64>().is_ok(), || format!("word scores: bad row {line:?}"))?;
        let g: f64 = f[2].parse().map_err(|_| format!("word scores: bad score {line:?}"))?;
        ensure(g > 0.0 && g <= previous, || "word scores: not positive and descending".into())?;
        previous = g;
    }

    let series = fs::read_to_string(d.join("series.tsv")).map_err(|e| e.to_string())?;
    let mut lines = series.lines();
    ensure(lines.next() == Some("date\tgroup\tvalue\tlower\tupper"), || "series: bad header".into())?;
    let mut points = 0;
    let mut groups = std::collections::BTreeSet::new();
    for line in lines {
        let f: Vec<&str> = line.split('\t').collect();
        ensure(f.len() == 5 && is_date(f[0]), || format!("series: bad row {line:?}"))?;
        let x: Vec<f64> = f[2..].iter().map(|s| s.parse().map_err(|_| format!("series: bad number in {line:?}"))).collect::<Result<_, _>>()?;
        ensure(x.iter().all(|v| v.is_finite()) && x[1] <= x[0] + 1e-12 && x[0] <= x[2] + 1e-12, || {
            format!("series: band does not contain the estimate in {line:?}")
        })?;
        groups.insert(f[1].to_string());
        points += 1;
    }
    ensure(groups.contains("china") && groups.contains("other"), || format!("series groups {groups:?}"))?;
    within(elapsed, Duration::from_secs(120))?;
    Ok(format!("{n_docs} documents; train, score, combine, smooth in {elapsed:.1?}; {points} series points"))
}

fn run(id: usize, name: &str, check: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
        Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into()))
    });
    let (status, detail) = match &outcome {
        Ok(d) => ("PASS", d.as_str()),
        Err(d) => ("FAIL", d.as_str()),
    };
    println!("{status} [{id}] {name}: {detail} ({:.1?})", start.elapsed());
    outcome.is_ok()
}

fn main() {
    let mut ok = true;
    ok &= run(1, "gradient oracle", gradient_oracle);
    ok &= run(2, "dictionary equivalence", dictionary_equivalence);
    ok &= run(3, "perplexity closed forms", perplexity_closed_forms);
    ok &= run(4, "scaling invariants", scaling_invariants);
    ok &= run(5, "SVD oracle", svd_oracle);
    match synthetic_benchmark() {
        Ok((rows, grid, elapsed)) => {
            ok &= run(6, "synthetic separation", || synthetic_separation(&rows, elapsed));
            ok &= run(7, "perplexity-quality association", || perplexity_association(&rows, &grid));
        }
        Err(e) => {
            println!("FAIL [6] synthetic separation: benchmark failed: {e}");
            println!("FAIL [7] perplexity-quality association: benchmark failed: {e}");
            ok = false;
        }
    }
    ok &= run(8, "determinism", determinism);
    ok &= run(9, "end-to-end tutorial", tutorial_run);
    if !ok {
        std::process::exit(1);
    }
}
