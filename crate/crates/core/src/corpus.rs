//! Document ingestion: tokenization, vocabularies and glob-pattern matching.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default minimum corpus frequency for a term to enter the vocabulary.
pub const DEFAULT_MIN_COUNT: u64 = 5;

/// A raw document as read from a corpus file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            text: text.into(),
            date: None,
            tags: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TokenizerConfig {
    /// Drop tokens without any alphabetic character (e.g. "2020", "19-20").
    pub drop_numbers: bool,
    /// Lowercased terms removed after tokenization. Empty by default.
    pub stopwords: HashSet<String>,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig {
            drop_numbers: true,
            stopwords: HashSet::new(),
        }
    }
}

fn is_joiner(c: char) -> bool {
    matches!(c, '-' | '\'' | '\u{2019}' | '\u{2010}' | '\u{2011}')
}

fn is_unicode_punctuation(c: char) -> bool {
    matches!(c as u32,
        0x00A0..=0x00BF
        | 0x00D7
        | 0x00F7
        | 0x037E
        | 0x0387
        | 0x0589
        | 0x05BE
        | 0x060C
        | 0x061B
        | 0x061F
        | 0x06D4
        | 0x0964..=0x0965
        | 0x2000..=0x206F
        | 0x2E00..=0x2E7F
        | 0x3000..=0x303F
        | 0xFE50..=0xFE6F
        | 0xFF01..=0xFF0F
        | 0xFF1A..=0xFF20
        | 0xFF3B..=0xFF40
        | 0xFF5B..=0xFF65)
}

fn is_separator(c: char) -> bool {
    if c.is_whitespace() {
        return true;
    }
    if c.is_alphanumeric() {
        return false;
    }
    c.is_ascii() || is_unicode_punctuation(c)
}

fn is_word_char(c: char) -> bool {
    !is_separator(c) && !is_joiner(c)
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Splits raw text into sentences of lowercased tokens.
pub fn tokenize(text: &str, config: &TokenizerConfig) -> Vec<Vec<String>> {
    let mut sentences = Vec::new();
    let mut sentence: Vec<String> = Vec::new();
    let mut token = String::new();

    let flush_token = |token: &mut String, sentence: &mut Vec<String>| {
        if token.is_empty() {
            return;
        }
        let term = token.to_lowercase();
        token.clear();
        if !term.chars().any(char::is_alphanumeric) {
            return;
        }
        if config.drop_numbers && !term.chars().any(char::is_alphabetic) {
            return;
        }
        if config.stopwords.contains(&term) {
            return;
        }
        sentence.push(term);
    };

    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        let next = chars.peek().copied();
        if is_word_char(c) || (is_joiner(c) && !token.is_empty() && next.is_some_and(is_word_char)) {
            token.push(c);
        } else {
            flush_token(&mut token, &mut sentence);
            if is_terminal(c) && next.is_none_or(char::is_whitespace) && !sentence.is_empty() {
                sentences.push(std::mem::take(&mut sentence));
            }
        }
    }
    flush_token(&mut token, &mut sentence);
    if !sentence.is_empty() {
        sentences.push(sentence);
    }
    sentences
}

/// Indexed term list, ordered by descending frequency with lexicographic ties.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    terms: Vec<String>,
    frequencies: Vec<u64>,
    min_count: u64,
    index: HashMap<String, u32>,
    // term indices in lexicographic order, for prefix lookups
    lexicographic: Vec<u32>,
    fingerprint: u64,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms
            && self.frequencies == other.frequencies
            && self.min_count == other.min_count
    }
}

fn fnv1a(bytes: impl IntoIterator<Item = u8>, mut hash: u64) -> u64 {
    for b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

impl Vocabulary {
    /// Builds a vocabulary from explicit (term, frequency) pairs.
    ///
    /// Pairs are reordered into the canonical order. Terms must be unique and
    /// every frequency must reach `min_count`.
    pub fn from_counts(counts: Vec<(String, u64)>, min_count: u64) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::EmptyVocabulary { min_count });
        }
        let mut counts = counts;
        counts.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut index = HashMap::with_capacity(counts.len());
        let mut terms = Vec::with_capacity(counts.len());
        let mut frequencies = Vec::with_capacity(counts.len());
        for (i, (term, freq)) in counts.into_iter().enumerate() {
            if freq < min_count {
                return Err(Error::InvalidConfig(format!(
                    "term {term:?} has frequency {freq} below min_count {min_count}"
                )));
            }
            if index.insert(term.clone(), i as u32).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate vocabulary term {term:?}")));
            }
            terms.push(term);
            frequencies.push(freq);
        }
        let mut lexicographic: Vec<u32> = (0..terms.len() as u32).collect();
        lexicographic.sort_by(|&a, &b| terms[a as usize].cmp(&terms[b as usize]));
        let fingerprint = terms.iter().fold(0xcbf2_9ce4_8422_2325, |h, t| {
            fnv1a(t.bytes().chain(std::iter::once(0)), h)
        });
        Ok(Vocabulary {
            terms,
            frequencies,
            min_count,
            index,
            lexicographic,
            fingerprint,
        })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn frequencies(&self) -> &[u64] {
        &self.frequencies
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn term(&self, index: u32) -> &str {
        &self.terms[index as usize]
    }

    pub fn frequency(&self, index: u32) -> u64 {
        self.frequencies[index as usize]
    }

    pub fn get(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    pub fn lookup(&self, term: &str) -> Result<u32> {
        self.get(term)
            .or_else(|| self.get(&term.to_lowercase()))
            .ok_or_else(|| Error::OutOfVocabulary(term.to_string()))
    }

    /// Hash of the ordered term list; equal fingerprints mean equal indexing.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Indices of all terms starting with `prefix`, in vocabulary order.
    pub fn with_prefix(&self, prefix: &str) -> Vec<u32> {
        let start = self
            .lexicographic
            .partition_point(|&i| self.terms[i as usize].as_str() < prefix);
        let mut hits: Vec<u32> = self.lexicographic[start..]
            .iter()
            .copied()
            .take_while(|&i| self.terms[i as usize].starts_with(prefix))
            .collect();
        hits.sort_unstable();
        hits
    }

    /// Maps a document's sentences onto vocabulary indices, dropping unknown tokens.
    pub fn encode(&self, sentences: &[Vec<String>]) -> Vec<Vec<u32>> {
        sentences
            .iter()
            .map(|s| s.iter().filter_map(|t| self.get(t)).collect::<Vec<_>>())
            .collect()
    }
}

/// Counts terms over tokenized documents and keeps those reaching `min_count`.
pub fn build_vocabulary(docs: &[TokenizedDocument], min_count: u64) -> Result<Vocabulary> {
    if min_count == 0 {
        return Err(Error::InvalidConfig("min_count must be at least 1".into()));
    }
    if docs.iter().all(|d| d.sentences.iter().all(Vec::is_empty)) {
        return Err(Error::EmptyCorpus);
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for doc in docs {
        for token in doc.sentences.iter().flatten() {
            *counts.entry(token.as_str()).or_default() += 1;
        }
    }
    let kept: Vec<(String, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .map(|(t, c)| (t.to_string(), c))
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyVocabulary { min_count });
    }
    Vocabulary::from_counts(kept, min_count)
}

/// A tokenized document. Term counts are relative to the vocabulary it was
/// indexed against (see [`Corpus`]).
#[derive(Debug, Clone, PartialEq)]
pub struct TokenizedDocument {
    pub id: String,
    pub date: Option<NaiveDate>,
    pub tags: Vec<String>,
    /// Lowercased tokens per sentence, including out-of-vocabulary ones.
    pub sentences: Vec<Vec<String>>,
    /// Sorted (term index, count) pairs of in-vocabulary terms.
    pub term_counts: Vec<(u32, u32)>,
    /// In-vocabulary token count.
    pub total_tokens: u64,
    encoded: Vec<Vec<u32>>,
}

impl TokenizedDocument {
    pub fn from_document(doc: &Document, config: &TokenizerConfig) -> Self {
        TokenizedDocument {
            id: doc.id.clone(),
            date: doc.date,
            tags: doc.tags.clone(),
            sentences: tokenize(&doc.text, config),
            term_counts: Vec::new(),
            total_tokens: 0,
            encoded: Vec::new(),
        }
    }

    /// Recomputes counts and encoded sentences against `vocab`.
    pub fn index(&mut self, vocab: &Vocabulary) {
        self.encoded = vocab.encode(&self.sentences);
        let mut counts: HashMap<u32, u32> = HashMap::new();
        for &t in self.encoded.iter().flatten() {
            *counts.entry(t).or_default() += 1;
        }
        let mut counts: Vec<(u32, u32)> = counts.into_iter().collect();
        counts.sort_unstable();
        self.total_tokens = counts.iter().map(|&(_, c)| u64::from(c)).sum();
        self.term_counts = counts;
    }

    /// In-vocabulary term indices per sentence.
    pub fn encoded_sentences(&self) -> &[Vec<u32>] {
        &self.encoded
    }

    pub fn count_of(&self, term: u32) -> u32 {
        self.term_counts
            .binary_search_by_key(&term, |&(t, _)| t)
            .map(|i| self.term_counts[i].1)
            .unwrap_or(0)
    }
}

/// Tokenized documents together with the vocabulary they are indexed against.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub vocab: Vocabulary,
    pub docs: Vec<TokenizedDocument>,
}

impl Corpus {
    /// Tokenizes `docs`, builds a vocabulary with `min_count`, and indexes every document.
    pub fn build(docs: &[Document], config: &TokenizerConfig, min_count: u64) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let tokenized: Vec<TokenizedDocument> = docs
            .iter()
            .map(|d| TokenizedDocument::from_document(d, config))
            .collect();
        let vocab = build_vocabulary(&tokenized, min_count)?;
        Ok(Corpus::index(tokenized, vocab))
    }

    /// Tokenizes `docs` against an existing vocabulary (e.g. one loaded with a model).
    pub fn with_vocabulary(docs: &[Document], config: &TokenizerConfig, vocab: Vocabulary) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let tokenized = docs
            .iter()
            .map(|d| TokenizedDocument::from_document(d, config))
            .collect();
        Ok(Corpus::index(tokenized, vocab))
    }

    pub fn index(mut docs: Vec<TokenizedDocument>, vocab: Vocabulary) -> Self {
        for doc in &mut docs {
            doc.index(&vocab);
        }
        Corpus { vocab, docs }
    }

    pub fn total_tokens(&self) -> u64 {
        self.docs.iter().map(|d| d.total_tokens).sum()
    }
}

/// Literal terms and prefix globs (`abc*`).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PatternSet {
    patterns: Vec<String>,
}

impl PatternSet {
    pub fn new<I, S>(patterns: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut out = Vec::new();
        for p in patterns {
            let p = p.as_ref().trim();
            if p.is_empty() {
                return Err(Error::InvalidPattern(p.to_string()));
            }
            if p.find('*').is_some_and(|pos| pos != p.len() - 1) {
                return Err(Error::InvalidPattern(p.to_string()));
            }
            out.push(p.to_lowercase());
        }
        Ok(PatternSet { patterns: out })
    }

    pub fn patterns(&self) -> &[String] {
        &self.patterns
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let entries = read_weighted_patterns(path)?;
        PatternSet::new(entries.iter().map(|(p, _)| p))
    }
}

/// Vocabulary indices matched by a single pattern.
pub fn match_pattern(pattern: &str, vocab: &Vocabulary) -> Vec<u32> {
    let pattern = pattern.to_lowercase();
    match pattern.strip_suffix('*') {
        Some(prefix) => vocab.with_prefix(prefix),
        None => vocab.get(&pattern).into_iter().collect(),
    }
}

/// Expands every pattern against the vocabulary, preserving pattern order.
pub fn expand_patterns(patterns: &PatternSet, vocab: &Vocabulary) -> Vec<(String, Vec<u32>)> {
    patterns
        .patterns
        .iter()
        .map(|p| (p.clone(), match_pattern(p, vocab)))
        .collect()
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(file)
        .lines()
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(path, e))
}

/// Reads a pattern file: one pattern per line with an optional polarity after
/// whitespace. `#` starts a comment line; blank lines are ignored.
pub fn read_weighted_patterns(path: impl AsRef<Path>) -> Result<Vec<(String, Option<f64>)>> {
    let path = path.as_ref();
    let origin = path.display().to_string();
    let mut out = Vec::new();
    for (n, line) in read_lines(path)?.iter().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let pattern = fields.next().unwrap_or_default().to_string();
        let polarity = match fields.next() {
            Some(v) => Some(
                v.parse::<f64>()
                    .ok()
                    .filter(|p| p.is_finite())
                    .ok_or_else(|| Error::parse(&origin, n + 1, format!("invalid polarity {v:?}")))?,
            ),
            None => None,
        };
        if fields.next().is_some() {
            return Err(Error::parse(&origin, n + 1, "expected `pattern [polarity]`"));
        }
        PatternSet::new([&pattern]).map_err(|e| Error::parse(&origin, n + 1, e.to_string()))?;
        out.push((pattern, polarity));
    }
    Ok(out)
}

/// Reads a directory of pattern files; the category is the file stem.
/// Categories are returned in lexicographic order.
pub fn read_dictionary_dir(dir: impl AsRef<Path>) -> Result<Vec<(String, PatternSet)>> {
    let dir = dir.as_ref();
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if !path.is_file() {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        if stem.starts_with('.') {
            continue;
        }
        out.push((stem.to_string(), PatternSet::read(&path)?));
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

/// Reads a JSON-lines corpus file. Ids must be nonempty and unique.
pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let origin = path.display().to_string();
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (n, line) in read_lines(path)?.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document =
            serde_json::from_str(line).map_err(|e| Error::parse(&origin, n + 1, e.to_string()))?;
        if doc.id.is_empty() {
            return Err(Error::parse(&origin, n + 1, "empty document id"));
        }
        if !seen.insert(doc.id.clone()) {
            return Err(Error::parse(&origin, n + 1, format!("duplicate document id {:?}", doc.id)));
        }
        docs.push(doc);
    }
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(docs)
}

pub fn write_corpus(path: impl AsRef<Path>, docs: &[Document]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for doc in docs {
        out.push_str(&serde_json::to_string(doc).expect("document serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
