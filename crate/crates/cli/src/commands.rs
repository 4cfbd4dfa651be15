use std::collections::HashMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use polarscale::corpus::{read_corpus, read_weighted_patterns};
use polarscale::evalkit::{
    benchmark_to_tsv, classify_documents, daily_means, parse_group_spec, run_benchmark, sample_seed_sets,
    series_to_tsv, smooth_by_group, BenchmarkOptions,
};
use polarscale::model::context_probabilities;
use polarscale::modelfit::{grid_search, default_grid, read_grid, reports_to_tsv};
use polarscale::scaling::{
    combine_scores, dictionary_word_scores, make_seed_set, probabilistic_word_scores, score_documents,
    spatial_word_scores, PolarityKind, SeedMode,
};
use polarscale::svd::svd_model;
use polarscale::w2v::{train_word2vec, train_word2vec_hogwild};
use polarscale::{Algorithm, Corpus, EmbeddingModel, Error, PatternSet, ScoreTable, TokenizerConfig, W2VConfig};

use crate::{EvaluateArgs, GlobalArgs, InspectArgs, OptimizeArgs, ScoreArgs, TokenizerArgs, TrainArgs};

fn tokenizer_config(args: &TokenizerArgs) -> Result<TokenizerConfig> {
    let mut config = TokenizerConfig {
        drop_numbers: !args.keep_numbers,
        ..TokenizerConfig::default()
    };
    if let Some(path) = &args.stopwords {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        config.stopwords = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
    }
    Ok(config)
}

fn load_corpus(path: &Path, args: &TokenizerArgs) -> Result<Corpus> {
    let docs = read_corpus(path)?;
    let corpus = Corpus::build(&docs, &tokenizer_config(args)?, args.min_count)?;
    log::info!(
        "{}: {} documents, {} terms, {} tokens",
        path.display(),
        corpus.docs.len(),
        corpus.vocab.len(),
        corpus.total_tokens()
    );
    Ok(corpus)
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn config_error(message: impl Into<String>) -> anyhow::Error {
    Error::InvalidConfig(message.into()).into()
}

pub fn train(global: &GlobalArgs, args: &TrainArgs) -> Result<()> {
    let algorithm: Algorithm = args.algo.parse()?;
    let corpus = load_corpus(&args.corpus, &args.tokenizer)?;
    let model = if algorithm == Algorithm::Svd {
        if args.hogwild {
            log::warn!("--hogwild has no effect on SVD");
        }
        let model = svd_model(&corpus, args.k, args.weighting, global.seed)?;
        println!("algorithm=SVD vocab={} k={}", model.vocab().len(), model.dim());
        model
    } else {
        let defaults = if algorithm == Algorithm::Cbow {
            W2VConfig::cbow(args.k)
        } else {
            W2VConfig::skip_gram(args.k)
        };
        let config = W2VConfig {
            window: args.window.unwrap_or(defaults.window),
            learning_rate: args.lr,
            epochs: args.epochs,
            negatives: args.negatives,
            rng_seed: global.seed,
            subsample_threshold: args.subsample,
            ..defaults
        };
        let trained = if args.hogwild && global.threads > 1 {
            log::warn!(
                "WARNING: --hogwild trains with {} unsynchronized threads; the model will NOT be reproducible",
                global.threads
            );
            train_word2vec_hogwild(&corpus, &config, global.threads)?
        } else {
            if args.hogwild {
                log::warn!("--hogwild needs --threads > 1; training single-threaded");
            }
            train_word2vec(&corpus, &config)?
        };
        println!("{config} vocab={}", trained.model.vocab().len());
        for (epoch, loss) in trained.epoch_loss.iter().enumerate() {
            println!("epoch {}\tloss {loss:.6}", epoch + 1);
        }
        trained.model
    };
    model.save(&args.out)?;
    if let Some(path) = &args.text_out {
        let mut buf = Vec::new();
        model.write_text(&mut buf).map_err(|e| Error::io(path, e))?;
        write_file(path, buf)?;
    }
    Ok(())
}

pub fn score(args: &ScoreArgs) -> Result<()> {
    if let Some(pair) = &args.combine {
        let a = ScoreTable::read(&pair[0])?;
        let b = ScoreTable::read(&pair[1])?;
        let combined = combine_scores(&a, &b)?;
        if !combined.dropped.is_empty() {
            log::warn!("{} documents present in only one table were dropped", combined.dropped.len());
        }
        combined.table.write(&args.out)?;
        println!("combined {} documents", combined.table.rows.len());
        return Ok(());
    }

    let corpus_path = args.corpus.as_ref().ok_or_else(|| config_error("--corpus is required"))?;
    let tokenizer = tokenizer_config(&args.tokenizer)?;
    let model = args.model.as_ref().map(EmbeddingModel::load).transpose()?;
    if model.is_none() && args.mode != PolarityKind::Dictionary {
        return Err(config_error("--model is required for spatial and probabilistic scoring"));
    }
    if args.mode == PolarityKind::Probabilistic {
        if let Some(m) = &model {
            m.probabilistic()?;
        }
    }
    let docs = read_corpus(corpus_path)?;
    let corpus = match &model {
        Some(m) => Corpus::with_vocabulary(&docs, &tokenizer, m.vocab().clone())?,
        None => Corpus::build(&docs, &tokenizer, args.tokenizer.min_count)?,
    };

    let polarity = match args.mode {
        PolarityKind::Dictionary => {
            let path = args
                .dictionary
                .as_ref()
                .or(args.seeds.as_ref())
                .ok_or_else(|| config_error("dictionary mode needs --dictionary"))?;
            dictionary_word_scores(&PatternSet::read(path)?, &corpus.vocab)
        }
        mode => {
            let path = args.seeds.as_ref().ok_or_else(|| config_error("--seeds is required"))?;
            let seed_mode = if args.bipolar { SeedMode::Bipolar } else { SeedMode::Unipolar };
            let seeds = make_seed_set(&read_weighted_patterns(path)?, &corpus.vocab, seed_mode)?;
            let model = model.as_ref().expect("checked above");
            if mode == PolarityKind::Spatial {
                spatial_word_scores(model, &seeds)?
            } else {
                probabilistic_word_scores(model, &seeds)?
            }
        }
    };
    let table = score_documents(&corpus, &polarity, args.min_tokens)?;
    table.write(&args.out)?;
    if let Some(path) = &args.word_scores {
        write_file(path, polarity.to_tsv(&corpus.vocab)?)?;
    }
    if !table.skipped.is_empty() {
        log::warn!("{} documents below {} tokens were skipped", table.skipped.len(), args.min_tokens);
    }
    println!("scored {} documents ({} skipped)", table.rows.len(), table.skipped.len());
    Ok(())
}

pub fn optimize(global: &GlobalArgs, args: &OptimizeArgs) -> Result<()> {
    let grid = read_grid(&args.grid)?;
    let patterns = read_weighted_patterns(&args.seeds)?;
    let corpus = load_corpus(&args.corpus, &args.tokenizer)?;
    let seeds = make_seed_set(&patterns, &corpus.vocab, SeedMode::Unipolar)?;
    let mut result = grid_search(&corpus, &seeds, &grid, global.seed, global.threads > 1)?;
    for f in &result.failures {
        eprintln!("config #{} failed: {}", f.position + 1, f.error);
    }
    if result.reports.is_empty() {
        let first = result.failures.swap_remove(0);
        return Err(anyhow::Error::new(first.error).context("every grid configuration failed"));
    }
    write_file(&args.out, reports_to_tsv(&result.reports))?;
    let best = result.best().expect("nonempty");
    let config = best.config.as_ref().map(ToString::to_string).unwrap_or_default();
    println!("best: {config} perplexity={}", best.perplexity);
    Ok(())
}

pub fn evaluate(global: &GlobalArgs, args: &EvaluateArgs) -> Result<()> {
    if args.out.is_none() && args.series_out.is_none() {
        return Err(config_error("nothing to do: pass --out and/or --series-out"));
    }
    let groups = args
        .groups
        .iter()
        .map(|g| parse_group_spec(g))
        .collect::<polarscale::Result<Vec<_>>>()?;
    let corpus = load_corpus(&args.corpus, &args.tokenizer)?;

    if let Some(out) = &args.out {
        let path = args
            .dictionary
            .as_ref()
            .ok_or_else(|| config_error("the benchmark needs --dictionary"))?;
        let dictionary = PatternSet::read(path)?;
        let grid = match &args.grid {
            Some(p) => read_grid(p)?,
            None => default_grid(),
        };
        let samples = sample_seed_sets(&dictionary, args.samples, args.sample_size, global.seed)?;
        let options = BenchmarkOptions {
            rng_seed: global.seed,
            weighting: args.weighting,
            min_tokens: args.min_tokens,
            parallel: global.threads > 1,
        };
        let rows = run_benchmark(&corpus, &dictionary, &samples, &grid, &options)?;
        write_file(out, benchmark_to_tsv(&rows))?;
        println!("benchmark: {} rows", rows.len());
    }

    if let Some(series_out) = &args.series_out {
        let scores_path = args
            .scores
            .as_ref()
            .ok_or_else(|| config_error("--series-out needs --scores"))?;
        let table = ScoreTable::read(scores_path)?;
        let tags = classify_documents(&corpus.docs, &groups);
        let group_of: HashMap<String, String> =
            corpus.docs.iter().map(|d| d.id.clone()).zip(tags).collect();
        let points = daily_means(&table, &group_of);
        let (smoothed, skipped) = smooth_by_group(&points, args.bandwidth, args.n_boot, global.seed)
            .with_context(|| format!("smoothing {}", scores_path.display()))?;
        for g in &skipped {
            log::warn!("group {g:?} has fewer than two dates and was not smoothed");
        }
        if smoothed.is_empty() {
            return Err(Error::InsufficientDates(0).into());
        }
        write_file(series_out, series_to_tsv(&smoothed))?;
        println!(
            "series: {} points; smoother=gaussian-kernel local mean, bandwidth={} days, bootstrap n={} (2.5/97.5 percentiles)",
            smoothed.len(),
            args.bandwidth,
            args.n_boot
        );
    }
    Ok(())
}

pub fn inspect(args: &InspectArgs) -> Result<()> {
    let model = EmbeddingModel::load(&args.model)?;
    let p = model.provenance();
    if let Some(path) = &args.text_out {
        let mut buf = Vec::new();
        model.write_text(&mut buf).map_err(|e| Error::io(path, e))?;
        write_file(path, buf)?;
    }
    match &args.target {
        None => {
            println!(
                "algorithm={} vocab={} k={} window={} seed={} min_count={}",
                p.algorithm,
                model.vocab().len(),
                model.dim(),
                p.window,
                p.rng_seed,
                model.vocab().min_count()
            );
        }
        Some(target) => {
            println!("term\tprobability");
            for (term, prob) in context_probabilities(&model, target, args.top)? {
                println!("{term}\t{prob}");
            }
        }
    }
    Ok(())
}
