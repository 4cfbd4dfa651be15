//! Seed expansion into word polarity scores and document scoring.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;

use crate::corpus::{match_pattern, Corpus, PatternSet, Vocabulary};
use crate::error::{Error, Result};
use crate::model::{dot, norm, EmbeddingModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeedMode {
    #[default]
    Unipolar,
    Bipolar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Seed {
    pub index: u32,
    pub term: String,
    pub weight: f64,
}

/// Seed patterns with their polarities and the vocabulary terms they expand to.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSet {
    pub entries: Vec<(String, f64)>,
    pub expanded: Vec<Seed>,
    pub mode: SeedMode,
    /// Patterns that matched no vocabulary term.
    pub unmatched: Vec<String>,
    vocab_fingerprint: u64,
}

impl SeedSet {
    /// Number of expanded seed terms (M).
    pub fn len(&self) -> usize {
        self.expanded.len()
    }

    pub fn is_empty(&self) -> bool {
        self.expanded.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.expanded.iter().map(|s| s.weight.abs()).sum()
    }

    /// Seeds with explicit weights, used as given (no normalization).
    pub fn from_weights(vocab: &Vocabulary, seeds: &[(&str, f64)], mode: SeedMode) -> Result<Self> {
        let mut expanded = Vec::with_capacity(seeds.len());
        for &(term, weight) in seeds {
            if !weight.is_finite() || weight == 0.0 {
                return Err(Error::InvalidConfig(format!("seed {term:?} has weight {weight}")));
            }
            let index = vocab.lookup(term)?;
            expanded.push(Seed {
                index,
                term: vocab.term(index).to_string(),
                weight,
            });
        }
        let set = SeedSet {
            entries: seeds.iter().map(|&(t, w)| (t.to_string(), w)).collect(),
            expanded,
            mode,
            unmatched: Vec::new(),
            vocab_fingerprint: vocab.fingerprint(),
        };
        set.check_mode()?;
        Ok(set)
    }

    /// The same seeds with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for s in &mut out.expanded {
            s.weight *= factor;
        }
        out
    }

    fn check_mode(&self) -> Result<()> {
        if self.expanded.is_empty() {
            return Err(Error::NoSeedMatches {
                unmatched: self.unmatched.clone(),
            });
        }
        let positive = self.expanded.iter().any(|s| s.weight > 0.0);
        let negative = self.expanded.iter().any(|s| s.weight < 0.0);
        match self.mode {
            SeedMode::Unipolar if negative => Err(Error::InvalidConfig(
                "unipolar seeds must have positive polarity".into(),
            )),
            SeedMode::Bipolar if !(positive && negative) => Err(Error::InvalidConfig(
                "bipolar seeds need both positive and negative polarities".into(),
            )),
            _ => Ok(()),
        }
    }

    fn check_vocab(&self, vocab: &Vocabulary) -> Result<()> {
        if self.vocab_fingerprint != vocab.fingerprint() {
            return Err(Error::VocabularyMismatch);
        }
        Ok(())
    }
}

/// Expands seed patterns against the vocabulary.
///
/// Each pattern's polarity (1 when omitted) is divided evenly among the terms
/// it matches; terms hit by several patterns accumulate their shares; the
/// weights are then rescaled so that the absolute weights sum to one.
pub fn make_seed_set(patterns: &[(String, Option<f64>)], vocab: &Vocabulary, mode: SeedMode) -> Result<SeedSet> {
    let mut entries = Vec::with_capacity(patterns.len());
    let mut unmatched = Vec::new();
    let mut order: Vec<u32> = Vec::new();
    let mut weights: HashMap<u32, f64> = HashMap::new();
    for (pattern, polarity) in patterns {
        let pattern = PatternSet::new([pattern])?.patterns()[0].clone();
        let polarity = polarity.unwrap_or(1.0);
        if !polarity.is_finite() || polarity == 0.0 {
            return Err(Error::InvalidConfig(format!("pattern {pattern:?} has polarity {polarity}")));
        }
        if mode == SeedMode::Unipolar && polarity < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "unipolar seed {pattern:?} has negative polarity"
            )));
        }
        let hits = match_pattern(&pattern, vocab);
        if hits.is_empty() {
            log::warn!("seed pattern {pattern:?} matches no vocabulary term");
            unmatched.push(pattern.clone());
        }
        let share = polarity / hits.len().max(1) as f64;
        for t in hits {
            let w = weights.entry(t).or_insert_with(|| {
                order.push(t);
                0.0
            });
            *w += share;
        }
        entries.push((pattern, polarity));
    }
    let mut expanded: Vec<Seed> = order
        .into_iter()
        .filter(|t| weights[t] != 0.0)
        .map(|t| Seed {
            index: t,
            term: vocab.term(t).to_string(),
            weight: weights[&t],
        })
        .collect();
    if expanded.is_empty() {
        return Err(Error::NoSeedMatches {
            unmatched: entries.iter().map(|(p, _)| p.clone()).collect(),
        });
    }
    let total: f64 = expanded.iter().map(|s| s.weight.abs()).sum();
    for s in &mut expanded {
        s.weight /= total;
    }
    let set = SeedSet {
        entries,
        expanded,
        mode,
        unmatched,
        vocab_fingerprint: vocab.fingerprint(),
    };
    set.check_mode()?;
    Ok(set)
}

/// Unipolar seeds with uniform pattern weights.
pub fn uniform_seed_set(patterns: &PatternSet, vocab: &Vocabulary) -> Result<SeedSet> {
    let entries: Vec<(String, Option<f64>)> = patterns.patterns().iter().map(|p| (p.clone(), None)).collect();
    make_seed_set(&entries, vocab, SeedMode::Unipolar)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolarityKind {
    Spatial,
    Probabilistic,
    Dictionary,
}

impl std::str::FromStr for PolarityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spatial" => Ok(PolarityKind::Spatial),
            "probabilistic" => Ok(PolarityKind::Probabilistic),
            "dictionary" => Ok(PolarityKind::Dictionary),
            _ => Err(Error::InvalidConfig(format!("unknown scoring mode {s:?}"))),
        }
    }
}

/// One polarity score per vocabulary term.
#[derive(Debug, Clone, PartialEq)]
pub struct WordPolarity {
    pub concept: String,
    pub scores: Vec<f64>,
    pub kind: PolarityKind,
    vocab_fingerprint: u64,
}

impl WordPolarity {
    pub fn new(concept: impl Into<String>, scores: Vec<f64>, kind: PolarityKind, vocab: &Vocabulary) -> Result<Self> {
        if scores.len() != vocab.len() {
            return Err(Error::LengthMismatch(scores.len(), vocab.len()));
        }
        Ok(WordPolarity {
            concept: concept.into(),
            scores,
            kind,
            vocab_fingerprint: vocab.fingerprint(),
        })
    }

    pub fn min(&self) -> f64 {
        self.scores.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.scores.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Tab-separated `term frequency score`, highest score first.
    pub fn to_tsv(&self, vocab: &Vocabulary) -> Result<String> {
        if self.vocab_fingerprint != vocab.fingerprint() {
            return Err(Error::VocabularyMismatch);
        }
        let mut order: Vec<usize> = (0..self.scores.len()).collect();
        order.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]));
        let mut out = String::from("term\tfrequency\tscore\n");
        for i in order {
            let _ = writeln!(out, "{}\t{}\t{}", vocab.terms()[i], vocab.frequencies()[i], self.scores[i]);
        }
        Ok(out)
    }
}

/// ĝ_i = (1/M) Σ_m cosine(V_i, V_m) p_m. Zero-norm rows score 0.
pub fn spatial_word_scores(model: &EmbeddingModel, seeds: &SeedSet) -> Result<WordPolarity> {
    let vocab = model.vocab();
    seeds.check_vocab(vocab)?;
    let input = model.input();
    let m = seeds.len() as f64;
    let mut unit_seeds = Vec::with_capacity(seeds.len());
    for s in &seeds.expanded {
        let v = input.row(s.index as usize);
        let n = norm(v);
        if n == 0.0 {
            return Err(Error::ZeroNormSeed(s.term.clone()));
        }
        unit_seeds.push((v, n, s.weight));
    }
    let scores = (0..vocab.len())
        .into_par_iter()
        .map(|i| {
            let v = input.row(i);
            let n = norm(v);
            if n == 0.0 {
                return 0.0;
            }
            unit_seeds
                .iter()
                .map(|&(s, sn, p)| dot(v, s) / (n * sn) * p)
                .sum::<f64>()
                / m
        })
        .collect();
    WordPolarity::new("", scores, PolarityKind::Spatial, vocab)
}

/// ĝ_i = (1/M) Σ_m sigmoid(V_i · W_m) p_m, with seeds as prediction targets.
pub fn probabilistic_word_scores(model: &EmbeddingModel, seeds: &SeedSet) -> Result<WordPolarity> {
    let pm = model.probabilistic()?;
    seeds.check_vocab(pm.vocab)?;
    let m = seeds.len() as f64;
    let scores = (0..pm.vocab.len() as u32)
        .into_par_iter()
        .map(|i| {
            seeds
                .expanded
                .iter()
                .map(|s| pm.probability(i, s.index) * s.weight)
                .sum::<f64>()
                / m
        })
        .collect();
    WordPolarity::new("", scores, PolarityKind::Probabilistic, pm.vocab)
}

/// Indicator scores: 1 for terms matched by any dictionary pattern, else 0.
pub fn dictionary_word_scores(dictionary: &PatternSet, vocab: &Vocabulary) -> WordPolarity {
    let mut scores = vec![0.0; vocab.len()];
    for p in dictionary.patterns() {
        for t in match_pattern(p, vocab) {
            scores[t as usize] = 1.0;
        }
    }
    WordPolarity::new("", scores, PolarityKind::Dictionary, vocab).expect("length matches vocabulary")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub id: String,
    pub date: Option<NaiveDate>,
    pub tags: Vec<String>,
    pub n_tokens: u64,
    pub score: f64,
}

/// Document scores; documents below the token minimum are listed in `skipped`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreTable {
    pub rows: Vec<ScoreRow>,
    pub skipped: Vec<String>,
}

pub const SCORE_HEADER: &str = "id\tdate\ttags\tn_tokens\tscore";

impl ScoreTable {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(SCORE_HEADER);
        out.push('\n');
        for r in &self.rows {
            let date = r.date.map(|d| d.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", r.id, date, r.tags.join(","), r.n_tokens, r.score);
        }
        out
    }

    pub fn from_tsv(text: &str, origin: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h == SCORE_HEADER => {}
            _ => return Err(Error::parse(origin, 1, format!("expected header {SCORE_HEADER:?}"))),
        }
        let mut rows = Vec::new();
        for (n, line) in lines {
            if line.is_empty() {
                continue;
            }
            let bad = |m: &str| Error::parse(origin, n + 1, m.to_string());
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 5 {
                return Err(bad("expected 5 tab-separated fields"));
            }
            let date = match f[1] {
                "" => None,
                d => Some(d.parse::<NaiveDate>().map_err(|_| bad("invalid date"))?),
            };
            let tags = f[2].split(',').filter(|t| !t.is_empty()).map(String::from).collect();
            rows.push(ScoreRow {
                id: f[0].to_string(),
                date,
                tags,
                n_tokens: f[3].parse().map_err(|_| bad("invalid n_tokens"))?,
                score: f[4].parse().map_err(|_| bad("invalid score"))?,
            });
        }
        Ok(ScoreTable {
            rows,
            skipped: Vec::new(),
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ScoreTable::from_tsv(&text, &path.display().to_string())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    pub fn scores(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.score).collect()
    }
}

/// ŷ = (1/N) Σ_i ĝ_i f_i over in-vocabulary tokens.
///
/// Documents with fewer than `min_tokens` (at least 1) in-vocabulary tokens are skipped.
pub fn score_documents(corpus: &Corpus, polarity: &WordPolarity, min_tokens: u64) -> Result<ScoreTable> {
    if polarity.vocab_fingerprint != corpus.vocab.fingerprint() || polarity.scores.len() != corpus.vocab.len() {
        return Err(Error::VocabularyMismatch);
    }
    let min_tokens = min_tokens.max(1);
    let scored: Vec<Option<ScoreRow>> = corpus
        .docs
        .par_iter()
        .map(|d| {
            if d.total_tokens < min_tokens {
                return None;
            }
            let weighted: f64 = d
                .term_counts
                .iter()
                .map(|&(t, f)| polarity.scores[t as usize] * f64::from(f))
                .sum();
            Some(ScoreRow {
                id: d.id.clone(),
                date: d.date,
                tags: d.tags.clone(),
                n_tokens: d.total_tokens,
                score: weighted / d.total_tokens as f64,
            })
        })
        .collect();
    let mut table = ScoreTable::default();
    for (row, doc) in scored.into_iter().zip(&corpus.docs) {
        match row {
            Some(r) => table.rows.push(r),
            None => table.skipped.push(doc.id.clone()),
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Combined {
    pub table: ScoreTable,
    /// Ids present in only one of the inputs.
    pub dropped: Vec<String>,
}

/// Geometric mean √(ŷ_a ŷ_b) per document, joined on id in the order of `a`.
pub fn combine_scores(a: &ScoreTable, b: &ScoreTable) -> Result<Combined> {
    for r in a.rows.iter().chain(&b.rows) {
        if r.score < 0.0 || r.score.is_nan() {
            return Err(Error::NegativeScore(r.id.clone()));
        }
    }
    let b_scores: HashMap<&str, f64> = b.rows.iter().map(|r| (r.id.as_str(), r.score)).collect();
    let mut table = ScoreTable::default();
    let mut dropped = Vec::new();
    for r in &a.rows {
        match b_scores.get(r.id.as_str()) {
            Some(&sb) => table.rows.push(ScoreRow {
                score: (r.score * sb).sqrt(),
                ..r.clone()
            }),
            None => dropped.push(r.id.clone()),
        }
    }
    let a_ids: std::collections::HashSet<&str> = a.rows.iter().map(|r| r.id.as_str()).collect();
    dropped.extend(b.rows.iter().filter(|r| !a_ids.contains(r.id.as_str())).map(|r| r.id.clone()));
    Ok(Combined { table, dropped })
}
