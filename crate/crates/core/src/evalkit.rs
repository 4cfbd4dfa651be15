//! Evaluation against dictionary analysis: seed sampling, correlation,
//! benchmark tables, country grouping and smoothed time series.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};

use chrono::{Datelike, NaiveDate};
use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;

use crate::corpus::{Corpus, PatternSet, TokenizedDocument};
use crate::error::{Error, Result};
use crate::model::{Algorithm, EmbeddingModel};
use crate::modelfit::{config_seed, seed_perplexity};
use crate::rng;
use crate::scaling::{
    dictionary_word_scores, probabilistic_word_scores, score_documents, spatial_word_scores, uniform_seed_set,
    ScoreTable,
};
use crate::svd::{svd_model, Weighting};
use crate::w2v::{train_word2vec, W2VConfig};

/// Tag assigned to documents that match no keyword group.
pub const OTHER_GROUP: &str = "other";

#[derive(Debug, Clone, PartialEq)]
pub struct SeedSample {
    pub sample_id: usize,
    pub patterns: PatternSet,
    pub rng_seed: u64,
}

/// Draws `n_sets` samples of `set_size` distinct patterns each.
pub fn sample_seed_sets(dictionary: &PatternSet, n_sets: usize, set_size: usize, rng_seed: u64) -> Result<Vec<SeedSample>> {
    if set_size == 0 {
        return Err(Error::InvalidConfig("sample size must be at least 1".into()));
    }
    if set_size > dictionary.len() {
        return Err(Error::SampleTooLarge {
            size: set_size,
            available: dictionary.len(),
        });
    }
    (1..=n_sets)
        .map(|sample_id| {
            let seed = rng::derive_seed(rng_seed, &format!("seed-sample-{sample_id}"));
            let mut r = rng::substream(seed, "draw");
            let picks = index::sample(&mut r, dictionary.len(), set_size);
            let patterns = PatternSet::new(picks.iter().map(|i| &dictionary.patterns()[i]))?;
            Ok(SeedSample {
                sample_id,
                patterns,
                rng_seed: seed,
            })
        })
        .collect()
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation("fewer than two observations"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant vector"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Correlation over the documents scored in both tables.
pub fn correlate_tables(a: &ScoreTable, b: &ScoreTable) -> Result<f64> {
    let b_scores: HashMap<&str, f64> = b.rows.iter().map(|r| (r.id.as_str(), r.score)).collect();
    let (x, y): (Vec<f64>, Vec<f64>) = a
        .rows
        .iter()
        .filter_map(|r| b_scores.get(r.id.as_str()).map(|&s| (r.score, s)))
        .unzip();
    pearson(&x, &y)
}

/// Keyword groups in priority order: (group tag, lowercase keywords).
pub type KeywordGroups = Vec<(String, Vec<String>)>;

/// Parses `name=kw1,kw2` specifications.
pub fn parse_group_spec(spec: &str) -> Result<(String, Vec<String>)> {
    let (name, keywords) = spec
        .split_once('=')
        .ok_or_else(|| Error::InvalidConfig(format!("group {spec:?} is not name=kw1,kw2")))?;
    let keywords: Vec<String> = keywords
        .split(',')
        .map(|k| k.trim().to_lowercase())
        .filter(|k| !k.is_empty())
        .collect();
    if name.is_empty() || keywords.is_empty() {
        return Err(Error::InvalidConfig(format!("group {spec:?} needs a name and keywords")));
    }
    Ok((name.to_string(), keywords))
}

/// Tags each document with the first group whose keywords occur among its tokens.
pub fn classify_documents(docs: &[TokenizedDocument], groups: &[(String, Vec<String>)]) -> Vec<String> {
    let lowered: Vec<(&str, Vec<String>)> = groups
        .iter()
        .map(|(g, kws)| (g.as_str(), kws.iter().map(|k| k.to_lowercase()).collect()))
        .collect();
    docs.iter()
        .map(|d| {
            lowered
                .iter()
                .find(|(_, keywords)| d.sentences.iter().flatten().any(|t| keywords.contains(t)))
                .map_or_else(|| OTHER_GROUP.to_string(), |(g, _)| g.to_string())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPoint {
    pub date: NaiveDate,
    pub value: f64,
    pub group: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedPoint {
    pub date: NaiveDate,
    pub group: String,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Mean score per (date, group). Rows without a date are ignored.
pub fn daily_means(table: &ScoreTable, group_of: &HashMap<String, String>) -> Vec<TimeSeriesPoint> {
    let mut sums: BTreeMap<(String, NaiveDate), (f64, usize)> = BTreeMap::new();
    for r in &table.rows {
        let Some(date) = r.date else { continue };
        let group = group_of.get(&r.id).cloned().unwrap_or_else(|| OTHER_GROUP.to_string());
        let e = sums.entry((group, date)).or_default();
        e.0 += r.score;
        e.1 += 1;
    }
    sums.into_iter()
        .map(|((group, date), (s, n))| TimeSeriesPoint {
            date,
            value: s / n as f64,
            group,
        })
        .collect()
}

fn day_number(d: NaiveDate) -> f64 {
    f64::from(d.num_days_from_ce())
}

/// Gaussian-kernel weighted mean of `values` at `at`; weights are shifted by
/// the nearest point so they never all underflow.
fn kernel_mean(xs: &[f64], values: &[f64], picks: impl Iterator<Item = usize> + Clone, at: f64, bandwidth: f64) -> f64 {
    let z2 = |i: usize| {
        let z = (xs[i] - at) / bandwidth;
        z * z
    };
    let nearest = picks.clone().map(z2).fold(f64::INFINITY, f64::min);
    let (mut num, mut den) = (0.0, 0.0);
    for i in picks {
        let w = (-0.5 * (z2(i) - nearest)).exp();
        num += w * values[i];
        den += w;
    }
    num / den
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Kernel-smoothed series with 2.5/97.5 percentile bootstrap bands, evaluated
/// at each distinct date. The points are treated as one series labelled with
/// the first point's group.
pub fn smooth_series(points: &[TimeSeriesPoint], bandwidth_days: f64, n_boot: usize, rng_seed: u64) -> Result<Vec<SmoothedPoint>> {
    if !(bandwidth_days > 0.0 && bandwidth_days.is_finite()) {
        return Err(Error::InvalidConfig("bandwidth must be positive".into()));
    }
    let dates: BTreeSet<NaiveDate> = points.iter().map(|p| p.date).collect();
    if dates.len() < 2 {
        return Err(Error::InsufficientDates(dates.len()));
    }
    if let Some(p) = points.iter().find(|p| !p.value.is_finite()) {
        return Err(Error::InvalidConfig(format!("non-finite value on {}", p.date)));
    }
    let xs: Vec<f64> = points.iter().map(|p| day_number(p.date)).collect();
    let values: Vec<f64> = points.iter().map(|p| p.value).collect();
    let n = points.len();
    let eval: Vec<f64> = dates.iter().map(|&d| day_number(d)).collect();

    let fitted: Vec<f64> = eval.iter().map(|&t| kernel_mean(&xs, &values, 0..n, t, bandwidth_days)).collect();

    let mut boot: Vec<Vec<f64>> = vec![Vec::with_capacity(n_boot); eval.len()];
    let mut r = rng::substream(rng_seed, "bootstrap");
    let mut picks = vec![0usize; n];
    for _ in 0..n_boot {
        picks.iter_mut().for_each(|p| *p = r.random_range(0..n));
        for (b, &t) in boot.iter_mut().zip(&eval) {
            b.push(kernel_mean(&xs, &values, picks.iter().copied(), t, bandwidth_days));
        }
    }
    let group = points[0].group.clone();
    Ok(dates
        .into_iter()
        .zip(fitted)
        .zip(boot)
        .map(|((date, value), mut b)| {
            let (lower, upper) = if b.is_empty() {
                (value, value)
            } else {
                b.sort_by(f64::total_cmp);
                (percentile(&b, 0.025), percentile(&b, 0.975))
            };
            SmoothedPoint {
                date,
                group: group.clone(),
                value,
                lower,
                upper,
            }
        })
        .collect())
}

/// Smooths each group separately (groups in lexicographic order). Groups with
/// fewer than two distinct dates are returned in the second list.
pub fn smooth_by_group(
    points: &[TimeSeriesPoint],
    bandwidth_days: f64,
    n_boot: usize,
    rng_seed: u64,
) -> Result<(Vec<SmoothedPoint>, Vec<String>)> {
    let mut groups: BTreeMap<&str, Vec<TimeSeriesPoint>> = BTreeMap::new();
    for p in points {
        groups.entry(p.group.as_str()).or_default().push(p.clone());
    }
    let mut out = Vec::new();
    let mut skipped = Vec::new();
    for (group, pts) in groups {
        match smooth_series(&pts, bandwidth_days, n_boot, rng::derive_seed(rng_seed, group)) {
            Ok(s) => out.extend(s),
            Err(Error::InsufficientDates(_)) => skipped.push(group.to_string()),
            Err(e) => return Err(e),
        }
    }
    Ok((out, skipped))
}

pub const SERIES_HEADER: &str = "date\tgroup\tvalue\tlower\tupper";

pub fn series_to_tsv(points: &[SmoothedPoint]) -> String {
    let mut out = String::from(SERIES_HEADER);
    out.push('\n');
    for p in points {
        let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", p.date, p.group, p.value, p.lower, p.upper);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    SvdSpatial,
    W2vSpatial,
    W2vProbabilistic,
    MiniDictionary,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::SvdSpatial => "svd-spatial",
            Family::W2vSpatial => "w2v-spatial",
            Family::W2vProbabilistic => "w2v-probabilistic",
            Family::MiniDictionary => "mini-dictionary",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub sample_id: usize,
    pub family: Family,
    pub algorithm: Option<Algorithm>,
    pub k: Option<usize>,
    /// Position in the model grid (word2vec families only).
    pub config_index: Option<usize>,
    /// NaN when the correlation is undefined (e.g. constant scores).
    pub correlation: f64,
    pub perplexity: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BenchmarkOptions {
    pub rng_seed: u64,
    pub weighting: Weighting,
    pub min_tokens: u64,
    /// Train grid models concurrently (each model is still trained single-threaded).
    pub parallel: bool,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        BenchmarkOptions {
            rng_seed: rng::DEFAULT_SEED,
            weighting: Weighting::Count,
            min_tokens: 1,
            parallel: false,
        }
    }
}

/// Trained models reused across seed samples: models do not depend on seeds.
pub struct BenchmarkModels {
    pub word2vec: Vec<(W2VConfig, EmbeddingModel)>,
    pub svd: Vec<(usize, EmbeddingModel)>,
}

impl BenchmarkModels {
    /// Trains every grid configuration (with [`config_seed`] seeds) and one SVD
    /// model per distinct dimension in the grid.
    pub fn train(corpus: &Corpus, grid: &[W2VConfig], options: &BenchmarkOptions) -> Result<Self> {
        let train = |(i, c): (usize, &W2VConfig)| -> Result<(W2VConfig, EmbeddingModel)> {
            let config = W2VConfig {
                rng_seed: config_seed(options.rng_seed, c),
                ..c.clone()
            };
            let model = train_word2vec(corpus, &config)
                .map_err(|e| e.context(format!("config #{} ({config})", i + 1)))?
                .model;
            Ok((config, model))
        };
        let word2vec: Result<Vec<_>> = if options.parallel {
            grid.par_iter().enumerate().map(train).collect()
        } else {
            grid.iter().enumerate().map(train).collect()
        };
        let mut dims: Vec<usize> = Vec::new();
        for c in grid {
            if !dims.contains(&c.dim) {
                dims.push(c.dim);
            }
        }
        let svd = dims
            .into_iter()
            .map(|k| {
                let seed = rng::derive_seed(options.rng_seed, &format!("svd k={k}"));
                svd_model(corpus, k, options.weighting, seed)
                    .map(|m| (k, m))
                    .map_err(|e| e.context(format!("SVD k={k}")))
            })
            .collect::<Result<_>>()?;
        Ok(BenchmarkModels { word2vec: word2vec?, svd })
    }
}

fn correlation_or_nan(a: &ScoreTable, b: &ScoreTable) -> Result<f64> {
    match correlate_tables(a, b) {
        Ok(r) => Ok(r),
        Err(Error::UndefinedCorrelation(_)) => Ok(f64::NAN),
        Err(e) => Err(e),
    }
}

/// Scores every (seed sample × model family × grid configuration) and
/// correlates document scores with the full-dictionary scores.
pub fn run_benchmark(
    corpus: &Corpus,
    full_dictionary: &PatternSet,
    samples: &[SeedSample],
    grid: &[W2VConfig],
    options: &BenchmarkOptions,
) -> Result<Vec<BenchmarkRow>> {
    let models = BenchmarkModels::train(corpus, grid, options)?;
    benchmark_with_models(corpus, full_dictionary, samples, &models, options)
}

pub fn benchmark_with_models(
    corpus: &Corpus,
    full_dictionary: &PatternSet,
    samples: &[SeedSample],
    models: &BenchmarkModels,
    options: &BenchmarkOptions,
) -> Result<Vec<BenchmarkRow>> {
    let vocab = &corpus.vocab;
    let reference = score_documents(corpus, &dictionary_word_scores(full_dictionary, vocab), options.min_tokens)?;

    let per_sample = |sample: &SeedSample| -> Result<Vec<BenchmarkRow>> {
        let id = sample.sample_id;
        let ctx = |family: Family, what: String| move |e: Error| e.context(format!("sample {id}, {family} {what}"));
        let seeds = uniform_seed_set(&sample.patterns, vocab).map_err(ctx(Family::MiniDictionary, String::new()))?;
        let mut rows = Vec::new();

        let mini = score_documents(corpus, &dictionary_word_scores(&sample.patterns, vocab), options.min_tokens)?;
        rows.push(BenchmarkRow {
            sample_id: id,
            family: Family::MiniDictionary,
            algorithm: None,
            k: None,
            config_index: None,
            correlation: correlation_or_nan(&mini, &reference)?,
            perplexity: None,
        });

        for (k, model) in &models.svd {
            let g = spatial_word_scores(model, &seeds).map_err(ctx(Family::SvdSpatial, format!("k={k}")))?;
            let t = score_documents(corpus, &g, options.min_tokens)?;
            rows.push(BenchmarkRow {
                sample_id: id,
                family: Family::SvdSpatial,
                algorithm: Some(Algorithm::Svd),
                k: Some(*k),
                config_index: None,
                correlation: correlation_or_nan(&t, &reference)?,
                perplexity: None,
            });
        }

        for (i, (config, model)) in models.word2vec.iter().enumerate() {
            let what = format!("config #{} ({config})", i + 1);
            let g = spatial_word_scores(model, &seeds).map_err(ctx(Family::W2vSpatial, what.clone()))?;
            let t = score_documents(corpus, &g, options.min_tokens)?;
            rows.push(BenchmarkRow {
                sample_id: id,
                family: Family::W2vSpatial,
                algorithm: Some(config.algorithm),
                k: Some(config.dim),
                config_index: Some(i),
                correlation: correlation_or_nan(&t, &reference)?,
                perplexity: None,
            });

            let g = probabilistic_word_scores(model, &seeds).map_err(ctx(Family::W2vProbabilistic, what.clone()))?;
            let t = score_documents(corpus, &g, options.min_tokens)?;
            let perplexity = match seed_perplexity(model, corpus, &seeds) {
                Ok(r) => Some(r.perplexity),
                Err(Error::PerplexityUndefined) => None,
                Err(e) => return Err(ctx(Family::W2vProbabilistic, what)(e)),
            };
            rows.push(BenchmarkRow {
                sample_id: id,
                family: Family::W2vProbabilistic,
                algorithm: Some(config.algorithm),
                k: Some(config.dim),
                config_index: Some(i),
                correlation: correlation_or_nan(&t, &reference)?,
                perplexity,
            });
        }
        Ok(rows)
    };

    let nested: Vec<Vec<BenchmarkRow>> = samples.par_iter().map(per_sample).collect::<Result<_>>()?;
    let mut rows: Vec<BenchmarkRow> = nested.into_iter().flatten().collect();
    rows.sort_by_key(|r| (r.sample_id, r.family, r.config_index, r.k));
    Ok(rows)
}

pub const BENCHMARK_HEADER: &str = "sample_id\tfamily\talgorithm\tk\tcorrelation\tperplexity";

pub fn benchmark_to_tsv(rows: &[BenchmarkRow]) -> String {
    let na = |x: Option<String>| x.unwrap_or_else(|| "NA".into());
    let mut out = String::from(BENCHMARK_HEADER);
    out.push('\n');
    for r in rows {
        let correlation = if r.correlation.is_nan() {
            "NA".to_string()
        } else {
            r.correlation.to_string()
        };
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.sample_id,
            r.family,
            na(r.algorithm.map(|a| a.to_string())),
            na(r.k.map(|k| k.to_string())),
            correlation,
            na(r.perplexity.map(|p| p.to_string())),
        );
    }
    out
}
