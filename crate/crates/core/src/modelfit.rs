//! Seed perplexity and perplexity-driven hyperparameter search.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::model::{Algorithm, EmbeddingModel};
use crate::rng;
use crate::scaling::SeedSet;
use crate::w2v::{train_word2vec, W2VConfig};

/// Predicted probabilities are clamped to this floor before taking logs.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// Per-document inputs to the perplexity: seed counts f_dm and normalized
/// predictions q̂_dm.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentDetail {
    pub id: String,
    pub n_tokens: u64,
    pub seed_counts: Vec<u32>,
    pub predicted: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerplexityReport {
    /// Set by grid search; `None` for a directly evaluated model.
    pub config: Option<W2VConfig>,
    pub seed_set_id: String,
    pub perplexity: f64,
    pub details: Vec<DocumentDetail>,
}

/// exp(−Σ_d Σ_m (f_dm / N_d) ln q̂_dm / Σ_d Σ_m f_dm).
pub fn perplexity_from_details(details: &[DocumentDetail]) -> Result<f64> {
    let mut exponent = 0.0;
    let mut total = 0.0;
    for d in details {
        let n = d.n_tokens as f64;
        for (&f, &q) in d.seed_counts.iter().zip(&d.predicted) {
            if f > 0 {
                exponent += f64::from(f) / n * q.max(PROBABILITY_FLOOR).ln();
                total += f64::from(f);
            }
        }
    }
    if total == 0.0 {
        return Err(Error::PerplexityUndefined);
    }
    Ok((-exponent / total).exp())
}

/// Normalizes raw per-seed predictions of one document so they sum to one.
pub fn normalize_predictions(raw: &mut [f64]) {
    let sum: f64 = raw.iter().sum();
    if sum > 0.0 {
        raw.iter_mut().for_each(|q| *q /= sum);
    } else {
        let uniform = 1.0 / raw.len() as f64;
        raw.iter_mut().for_each(|q| *q = uniform);
    }
}

/// Seed perplexity of a word2vec model over `corpus`.
///
/// q̂_dm is the mean of sigmoid(V_i · W_m) over the in-vocabulary tokens i of
/// document d, normalized across seeds within the document.
pub fn seed_perplexity(model: &EmbeddingModel, corpus: &Corpus, seeds: &SeedSet) -> Result<PerplexityReport> {
    let pm = model.probabilistic()?;
    if corpus.vocab.fingerprint() != pm.vocab.fingerprint() {
        return Err(Error::VocabularyMismatch);
    }
    let m = seeds.len();
    let seed_ids: Vec<u32> = seeds.expanded.iter().map(|s| s.index).collect();
    if let Some(s) = seeds.expanded.iter().find(|s| pm.vocab.get(&s.term) != Some(s.index)) {
        return Err(Error::OutOfVocabulary(s.term.clone()));
    }
    // probabilities[i * m + s] = sigmoid(V_i · W_s)
    let probabilities: Vec<f64> = (0..pm.vocab.len() as u32)
        .into_par_iter()
        .flat_map_iter(|i| seed_ids.iter().map(move |&s| pm.probability(i, s)))
        .collect();

    let details: Vec<DocumentDetail> = corpus
        .docs
        .par_iter()
        .filter(|d| d.total_tokens > 0)
        .map(|d| {
            let mut predicted = vec![0.0; m];
            for &(t, f) in &d.term_counts {
                let row = &probabilities[t as usize * m..(t as usize + 1) * m];
                for (q, &p) in predicted.iter_mut().zip(row) {
                    *q += p * f64::from(f);
                }
            }
            predicted.iter_mut().for_each(|q| *q /= d.total_tokens as f64);
            normalize_predictions(&mut predicted);
            DocumentDetail {
                id: d.id.clone(),
                n_tokens: d.total_tokens,
                seed_counts: seed_ids.iter().map(|&s| d.count_of(s)).collect(),
                predicted,
            }
        })
        .collect();
    let perplexity = perplexity_from_details(&details)?;
    Ok(PerplexityReport {
        config: None,
        seed_set_id: String::new(),
        perplexity,
        details,
    })
}

/// Training seed of a grid configuration: a function of the run seed and the
/// configuration's settings, so duplicated configurations train identically.
pub fn config_seed(rng_seed: u64, config: &W2VConfig) -> u64 {
    rng::derive_seed(rng_seed, &format!("grid {config}"))
}

#[derive(Debug)]
pub struct GridFailure {
    pub position: usize,
    pub config: W2VConfig,
    pub error: Error,
}

#[derive(Debug, Default)]
pub struct GridResult {
    /// Ascending perplexity; ties keep grid order.
    pub reports: Vec<PerplexityReport>,
    pub failures: Vec<GridFailure>,
}

impl GridResult {
    pub fn best(&self) -> Option<&PerplexityReport> {
        self.reports.first()
    }
}

/// Trains one model per configuration and ranks them by seed perplexity.
pub fn grid_search(
    corpus: &Corpus,
    seeds: &SeedSet,
    grid: &[W2VConfig],
    rng_seed: u64,
    parallel: bool,
) -> Result<GridResult> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty grid".into()));
    }
    let run = |(position, config): (usize, &W2VConfig)| -> (usize, Result<PerplexityReport>) {
        let config = W2VConfig {
            rng_seed: config_seed(rng_seed, config),
            ..config.clone()
        };
        log::info!("training {config}");
        let outcome = train_word2vec(corpus, &config)
            .and_then(|t| seed_perplexity(&t.model, corpus, seeds))
            .map(|r| PerplexityReport {
                config: Some(config.clone()),
                ..r
            })
            .map_err(|e| e.context(format!("config #{} ({config})", position + 1)));
        (position, outcome)
    };
    let outcomes: Vec<(usize, Result<PerplexityReport>)> = if parallel {
        grid.par_iter().enumerate().map(run).collect()
    } else {
        grid.iter().enumerate().map(run).collect()
    };

    let mut result = GridResult::default();
    for (position, outcome) in outcomes {
        match outcome {
            Ok(r) => result.reports.push(r),
            Err(error) => result.failures.push(GridFailure {
                position,
                config: grid[position].clone(),
                error,
            }),
        }
    }
    result.reports.sort_by(|a, b| a.perplexity.total_cmp(&b.perplexity));
    Ok(result)
}

/// The 12-configuration grid: SG (window 10) and CBOW (window 5) with
/// k ∈ {50, 100, 150, 200, 250, 300}, learning rate 0.05, 10 epochs.
pub fn default_grid() -> Vec<W2VConfig> {
    [W2VConfig::skip_gram as fn(usize) -> W2VConfig, W2VConfig::cbow]
        .iter()
        .flat_map(|make| [50, 100, 150, 200, 250, 300].map(make))
        .collect()
}

/// Parses `key=value` configuration lines (`#` comments and blank lines allowed).
///
/// Keys: `algorithm` (required), `k` (required), `window`, `lr`, `epochs`,
/// `negatives`, `subsample`. Missing keys take the algorithm's defaults.
pub fn parse_grid(text: &str, origin: &str) -> Result<Vec<W2VConfig>> {
    let mut grid = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |m: String| Error::parse(origin, n + 1, m);
        let mut fields = Vec::new();
        for field in line.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got {field:?}")))?;
            fields.push((key.to_ascii_lowercase(), value));
        }
        let get = |key: &str| fields.iter().find(|(k, _)| k == key).map(|&(_, v)| v);
        let algorithm: Algorithm = get("algorithm")
            .ok_or_else(|| bad("missing algorithm".into()))?
            .parse()
            .map_err(|e: Error| bad(e.to_string()))?;
        let dim: usize = get("k")
            .ok_or_else(|| bad("missing k".into()))?
            .parse()
            .map_err(|_| bad("invalid k".into()))?;
        let mut config = match algorithm {
            Algorithm::SkipGram => W2VConfig::skip_gram(dim),
            Algorithm::Cbow => W2VConfig::cbow(dim),
            Algorithm::Svd => return Err(bad("grid configurations must be SG or CBOW".into())),
        };
        for (key, value) in &fields {
            let invalid = || bad(format!("invalid {key} {value:?}"));
            match key.as_str() {
                "algorithm" | "k" => {}
                "window" => config.window = value.parse().map_err(|_| invalid())?,
                "lr" => config.learning_rate = value.parse().map_err(|_| invalid())?,
                "epochs" => config.epochs = value.parse().map_err(|_| invalid())?,
                "negatives" => config.negatives = value.parse().map_err(|_| invalid())?,
                "subsample" => config.subsample_threshold = Some(value.parse().map_err(|_| invalid())?),
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        config.validate().map_err(|e| bad(e.to_string()))?;
        grid.push(config);
    }
    if grid.is_empty() {
        return Err(Error::parse(origin, 0, "empty grid"));
    }
    Ok(grid)
}

pub fn read_grid(path: impl AsRef<Path>) -> Result<Vec<W2VConfig>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_grid(&text, &path.display().to_string())
}

pub const REPORT_HEADER: &str = "algorithm\tk\twindow\tlr\tepochs\tnegatives\tperplexity";

/// Tab-separated ranked report.
pub fn reports_to_tsv(reports: &[PerplexityReport]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in reports {
        let c = r.config.as_ref().expect("grid reports carry their configuration");
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            c.algorithm, c.dim, c.window, c.learning_rate, c.epochs, c.negatives, r.perplexity
        );
    }
    out
}
