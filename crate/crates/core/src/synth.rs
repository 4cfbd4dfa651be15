//! Synthetic corpora with planted topical vocabulary, used for benchmarks and
//! the tutorial data set.
//!
//! Each document mixes background words with words from a few topics. A topic
//! has dictionary stems (matched by `stem*` patterns, each stem with one or
//! more surface forms) and associated words that co-occur with the stems but
//! are not part of the dictionary. Topic intensities vary continuously across
//! documents, so dictionary scores form a graded signal rather than labels.

use std::collections::HashSet;

use chrono::NaiveDate;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Document, PatternSet};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Topic {
    pub name: String,
    /// Dictionary stems and their surface forms.
    pub stems: Vec<(String, Vec<String>)>,
    pub associated: Vec<String>,
}

impl Topic {
    /// One `stem*` pattern per dictionary stem.
    pub fn dictionary(&self) -> PatternSet {
        PatternSet::new(self.stems.iter().map(|(s, _)| format!("{s}*"))).expect("stems are valid patterns")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    pub background: Vec<String>,
    pub topics: Vec<Topic>,
    /// (group, keywords) inserted into some documents, e.g. country names.
    pub groups: Vec<(String, Vec<String>)>,
}

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub n_docs: usize,
    pub sentences: (usize, usize),
    pub sentence_len: (usize, usize),
    /// Probability that a document discusses a given topic at all.
    pub topic_prevalence: f64,
    /// Largest share of a document's tokens drawn from one topic.
    pub max_intensity: f64,
    /// Share of topic tokens drawn from dictionary stems (the rest are associated words).
    pub dictionary_share: f64,
    /// Probability that a document mentions one of the lexicon's groups.
    pub group_rate: f64,
    pub start: NaiveDate,
    pub days: u32,
    pub rng_seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_docs: 2000,
            sentences: (3, 8),
            sentence_len: (6, 14),
            topic_prevalence: 0.6,
            max_intensity: 0.35,
            dictionary_share: 0.5,
            group_rate: 0.3,
            start: NaiveDate::from_ymd_opt(2019, 1, 1).expect("valid date"),
            days: 1826,
            rng_seed: rng::DEFAULT_SEED,
        }
    }
}

/// Rank-frequency sampler with weights ∝ 1 / (rank + 1).
struct Zipf {
    cumulative: Vec<f64>,
}

impl Zipf {
    fn new(n: usize) -> Self {
        let mut acc = 0.0;
        let cumulative = (0..n)
            .map(|r| {
                acc += 1.0 / (r as f64 + 1.0);
                acc
            })
            .collect();
        Zipf { cumulative }
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        let total = *self.cumulative.last().expect("nonempty");
        let u = rng.random::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1)
    }
}

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

fn pseudo_word(rng: &mut impl Rng, syllables: usize) -> String {
    (0..syllables)
        .flat_map(|_| {
            [
                CONSONANTS[rng.random_range(0..CONSONANTS.len())] as char,
                VOWELS[rng.random_range(0..VOWELS.len())] as char,
            ]
        })
        .collect()
}

/// A lexicon of pronounceable pseudo-words. Stems never prefix any other word.
pub fn pseudo_lexicon(background: usize, topics: usize, stems: usize, associated: usize, rng_seed: u64) -> Lexicon {
    let mut r = rng::substream(rng_seed, "pseudo-lexicon");
    let mut used: HashSet<String> = HashSet::new();
    let mut fresh = |r: &mut ChaCha8Rng, syllables: usize| loop {
        let w = pseudo_word(r, syllables);
        if used.insert(w.clone()) {
            return w;
        }
    };
    let background_words: Vec<String> = (0..background).map(|i| fresh(&mut r, 2 + i % 2)).collect();
    let mut topic_list = Vec::with_capacity(topics);
    for t in 0..topics {
        let mut stem_list = Vec::with_capacity(stems);
        while stem_list.len() < stems {
            let stem = fresh(&mut r, 3);
            // forms are the stem plus suffixes; none may collide with other words
            let forms: Vec<String> = ["", "s", "ing", "ed"][..r.random_range(1..=3)]
                .iter()
                .map(|s| format!("{stem}{s}"))
                .collect();
            stem_list.push((stem, forms));
        }
        let assoc = (0..associated).map(|i| fresh(&mut r, 2 + i % 2)).collect();
        topic_list.push(Topic {
            name: format!("topic{t}"),
            stems: stem_list,
            associated: assoc,
        });
    }
    let mut lexicon = Lexicon {
        background: background_words,
        topics: topic_list,
        groups: Vec::new(),
    };
    drop_prefix_collisions(&mut lexicon);
    lexicon
}

fn drop_prefix_collisions(lexicon: &mut Lexicon) {
    let all: Vec<String> = lexicon
        .background
        .iter()
        .chain(lexicon.topics.iter().flat_map(|t| t.associated.iter()))
        .cloned()
        .collect();
    let stems: Vec<String> = lexicon.topics.iter().flat_map(|t| t.stems.iter().map(|(s, _)| s.clone())).collect();
    let collides = |w: &String| stems.iter().any(|s| w.starts_with(s.as_str()));
    let bad: HashSet<String> = all.iter().filter(|w| collides(w)).cloned().collect();
    lexicon.background.retain(|w| !bad.contains(w));
    for t in &mut lexicon.topics {
        t.associated.retain(|w| !bad.contains(w));
    }
}

/// Generates documents; topic 0 is the planted target.
pub fn generate(lexicon: &Lexicon, config: &SyntheticConfig) -> Vec<Document> {
    let mut r = rng::substream(config.rng_seed, "synthetic-corpus");
    let background = Zipf::new(lexicon.background.len());
    let topic_samplers: Vec<(Zipf, Zipf)> = lexicon
        .topics
        .iter()
        .map(|t| (Zipf::new(t.stems.len()), Zipf::new(t.associated.len().max(1))))
        .collect();

    (0..config.n_docs)
        .map(|d| {
            let intensities: Vec<f64> = lexicon
                .topics
                .iter()
                .map(|_| {
                    if r.random::<f64>() < config.topic_prevalence {
                        config.max_intensity * r.random::<f64>().powf(1.5)
                    } else {
                        0.0
                    }
                })
                .collect();
            let n_sentences = r.random_range(config.sentences.0..=config.sentences.1);
            let mut sentences: Vec<Vec<String>> = (0..n_sentences)
                .map(|_| {
                    let len = r.random_range(config.sentence_len.0..=config.sentence_len.1);
                    (0..len)
                        .map(|_| {
                            let mut u = r.random::<f64>();
                            for (t, &theta) in intensities.iter().enumerate() {
                                if u < theta {
                                    let topic = &lexicon.topics[t];
                                    let (stems, assoc) = &topic_samplers[t];
                                    if topic.associated.is_empty() || r.random::<f64>() < config.dictionary_share {
                                        let forms = &topic.stems[stems.sample(&mut r)].1;
                                        return forms[r.random_range(0..forms.len())].clone();
                                    }
                                    return topic.associated[assoc.sample(&mut r)].clone();
                                }
                                u -= theta;
                            }
                            lexicon.background[background.sample(&mut r)].clone()
                        })
                        .collect()
                })
                .collect();
            let mut tags = Vec::new();
            if !lexicon.groups.is_empty() && r.random::<f64>() < config.group_rate {
                let (group, keywords) = &lexicon.groups[r.random_range(0..lexicon.groups.len())];
                let s = r.random_range(0..sentences.len());
                let pos = r.random_range(0..=sentences[s].len());
                sentences[s].insert(pos, keywords[r.random_range(0..keywords.len())].clone());
                tags.push(group.clone());
            }
            let text = sentences
                .iter()
                .map(|s| {
                    let mut s = s.join(" ");
                    if let Some(first) = s.get(..1) {
                        s.replace_range(..1, &first.to_uppercase());
                    }
                    s + "."
                })
                .collect::<Vec<_>>()
                .join(" ");
            Document {
                id: format!("doc{:05}", d + 1),
                text,
                date: Some(config.start + chrono::Days::new(u64::from(r.random_range(0..config.days)))),
                tags,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, TokenizerConfig};
    use crate::scaling::{dictionary_word_scores, score_documents};

    #[test]
    fn stems_match_only_their_forms() {
        let lex = pseudo_lexicon(300, 2, 10, 20, 3);
        let docs = generate(&lex, &SyntheticConfig { n_docs: 200, ..Default::default() });
        let corpus = Corpus::build(&docs, &TokenizerConfig::default(), 1).unwrap();
        for topic in &lex.topics {
            for (stem, forms) in &topic.stems {
                let hits = crate::corpus::match_pattern(&format!("{stem}*"), &corpus.vocab);
                assert!(hits.iter().all(|&h| forms.contains(&corpus.vocab.term(h).to_string())));
            }
        }
    }

    #[test]
    fn deterministic_with_graded_dictionary_scores() {
        let lex = pseudo_lexicon(300, 2, 10, 20, 3);
        let config = SyntheticConfig { n_docs: 300, ..Default::default() };
        let docs = generate(&lex, &config);
        assert_eq!(docs, generate(&lex, &config));
        let corpus = Corpus::build(&docs, &TokenizerConfig::default(), 1).unwrap();
        let scores = score_documents(&corpus, &dictionary_word_scores(&lex.topics[0].dictionary(), &corpus.vocab), 1)
            .unwrap()
            .scores();
        let zero = scores.iter().filter(|&&s| s == 0.0).count();
        assert!(zero > 50 && zero < 250, "{zero}");
        assert!(scores.iter().any(|&s| s > 0.1));
    }
}
