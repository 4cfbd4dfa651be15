//! word2vec training with negative sampling (skip-gram and CBOW).
//!
//! The hidden layer is `V_i` of a single context word (SG) or the mean of the
//! input vectors in the window around the target (CBOW). Each positive target
//! and each sampled negative is scored with `sigmoid(H · W_j)`; output rows are
//! updated first and the accumulated hidden-layer error is then pushed back into
//! the input rows of the context words.

use std::fmt;
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use num_traits::Float;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Vocabulary};
use crate::error::{Error, Result};
use crate::model::{Algorithm, EmbeddingModel, Matrix, Provenance};
use crate::rng;

const TABLE_SIZE: usize = 1_000_000;
const UNIGRAM_POWER: f64 = 0.75;
const LR_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct W2VConfig {
    pub algorithm: Algorithm,
    pub dim: usize,
    pub window: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub negatives: usize,
    pub rng_seed: u64,
    pub subsample_threshold: Option<f64>,
}

impl W2VConfig {
    /// Skip-gram with window 10, learning rate 0.05 and 10 epochs.
    pub fn skip_gram(dim: usize) -> Self {
        W2VConfig {
            algorithm: Algorithm::SkipGram,
            dim,
            window: 10,
            learning_rate: 0.05,
            epochs: 10,
            negatives: 5,
            rng_seed: rng::DEFAULT_SEED,
            subsample_threshold: None,
        }
    }

    /// CBOW with window 5, learning rate 0.05 and 10 epochs.
    pub fn cbow(dim: usize) -> Self {
        W2VConfig {
            algorithm: Algorithm::Cbow,
            window: 5,
            ..W2VConfig::skip_gram(dim)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidConfig(format!("{m} ({self})")));
        if self.algorithm == Algorithm::Svd {
            return fail("word2vec training needs SG or CBOW");
        }
        if self.dim == 0 {
            return fail("k must be at least 1");
        }
        if self.window == 0 {
            return fail("window must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning rate must be positive");
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1");
        }
        if self.negatives == 0 {
            return fail("negatives must be at least 1");
        }
        if self.subsample_threshold.is_some_and(|t| !(t > 0.0 && t.is_finite())) {
            return fail("subsample threshold must be positive");
        }
        Ok(())
    }
}

impl fmt::Display for W2VConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "algorithm={} k={} window={} lr={} epochs={} negatives={}",
            self.algorithm, self.dim, self.window, self.learning_rate, self.epochs, self.negatives
        )?;
        if let Some(t) = self.subsample_threshold {
            write!(f, " subsample={t}")?;
        }
        Ok(())
    }
}

/// Trained model plus the mean loss per example for each epoch.
#[derive(Debug, Clone)]
pub struct Trained {
    pub model: EmbeddingModel,
    pub epoch_loss: Vec<f64>,
}

/// Row storage the update step reads from and adds into.
pub trait Params<F> {
    fn read(&self, row: usize, out: &mut [F]);
    fn add(&mut self, row: usize, delta: &[F], scale: F);
}

impl<F: Float> Params<F> for Matrix<F> {
    fn read(&self, row: usize, out: &mut [F]) {
        out.copy_from_slice(self.row(row));
    }

    fn add(&mut self, row: usize, delta: &[F], scale: F) {
        for (x, &d) in self.row_mut(row).iter_mut().zip(delta) {
            *x = *x + scale * d;
        }
    }
}

/// Shared f32 rows updated without synchronization beyond relaxed atomics.
struct RacyRows<'a> {
    data: &'a [AtomicU32],
    cols: usize,
}

impl Params<f32> for RacyRows<'_> {
    fn read(&self, row: usize, out: &mut [f32]) {
        let cells = &self.data[row * self.cols..(row + 1) * self.cols];
        for (o, c) in out.iter_mut().zip(cells) {
            *o = f32::from_bits(c.load(Ordering::Relaxed));
        }
    }

    fn add(&mut self, row: usize, delta: &[f32], scale: f32) {
        let cells = &self.data[row * self.cols..(row + 1) * self.cols];
        for (c, &d) in cells.iter().zip(delta) {
            let x = f32::from_bits(c.load(Ordering::Relaxed)) + scale * d;
            c.store(x.to_bits(), Ordering::Relaxed);
        }
    }
}

/// ln(1 + e^x) without overflow.
fn softplus<F: Float>(x: F) -> F {
    x.max(F::zero()) + (-x.abs()).exp().ln_1p()
}

/// Negative-sampling loss of one hidden vector:
/// `-ln σ(H·W_target) - Σ_n ln σ(-H·W_n)`.
pub fn negative_sampling_loss<F: Float>(hidden: &[F], target: &[F], negatives: &[&[F]]) -> F {
    let dot = |w: &[F]| hidden.iter().zip(w).fold(F::zero(), |acc, (&h, &x)| acc + h * x);
    negatives
        .iter()
        .fold(softplus(-dot(target)), |acc, w| acc + softplus(dot(w)))
}

/// Scratch buffers for [`train_example`].
pub struct Scratch<F> {
    hidden: Vec<F>,
    error: Vec<F>,
    row: Vec<F>,
}

impl<F: Float> Scratch<F> {
    pub fn new(dim: usize) -> Self {
        Scratch {
            hidden: vec![F::zero(); dim],
            error: vec![F::zero(); dim],
            row: vec![F::zero(); dim],
        }
    }
}

/// One stochastic gradient step on a (contexts → target) example.
///
/// The hidden layer is the mean of the context input rows. Output rows of the
/// target and of each negative (negatives equal to the target are skipped) are
/// updated first; every context row then receives the hidden-layer error
/// divided by the number of contexts. Returns the loss before the update.
pub fn train_example<F, V, W>(
    input: &mut V,
    output: &mut W,
    contexts: &[u32],
    target: u32,
    negatives: &[u32],
    lr: F,
    scratch: &mut Scratch<F>,
) -> F
where
    F: Float,
    V: Params<F> + ?Sized,
    W: Params<F> + ?Sized,
{
    let Scratch { hidden, error, row } = scratch;
    let share = F::one() / F::from(contexts.len()).expect("context count");
    hidden.iter_mut().for_each(|h| *h = F::zero());
    for &c in contexts {
        input.read(c as usize, row);
        for (h, &x) in hidden.iter_mut().zip(row.iter()) {
            *h = *h + x * share;
        }
    }
    error.iter_mut().for_each(|e| *e = F::zero());

    let mut loss = F::zero();
    let labelled = std::iter::once((target, F::one())).chain(
        negatives
            .iter()
            .filter(|&&n| n != target)
            .map(|&n| (n, F::zero())),
    );
    for (j, label) in labelled {
        output.read(j as usize, row);
        let r = hidden.iter().zip(row.iter()).fold(F::zero(), |acc, (&h, &w)| acc + h * w);
        let p = crate::model::sigmoid(r);
        loss = loss + if label > F::zero() { softplus(-r) } else { softplus(r) };
        let g = (label - p) * lr;
        for (e, &w) in error.iter_mut().zip(row.iter()) {
            *e = *e + g * w;
        }
        output.add(j as usize, hidden, g);
    }
    for &c in contexts {
        input.add(c as usize, error, share);
    }
    loss
}

/// Precomputed table for drawing negatives ∝ frequency^0.75.
pub struct UnigramTable {
    table: Vec<u32>,
}

impl UnigramTable {
    pub fn new(vocab: &Vocabulary) -> Self {
        Self::with_size(vocab.frequencies(), TABLE_SIZE)
    }

    fn with_size(frequencies: &[u64], size: usize) -> Self {
        let weights: Vec<f64> = frequencies.iter().map(|&f| (f as f64).powf(UNIGRAM_POWER)).collect();
        let total: f64 = weights.iter().sum();
        let mut table = Vec::with_capacity(size);
        let mut word = 0usize;
        let mut cumulative = weights[0] / total;
        for slot in 0..size {
            table.push(word as u32);
            if (slot as f64 + 1.0) / size as f64 > cumulative && word + 1 < weights.len() {
                word += 1;
                cumulative += weights[word] / total;
            }
        }
        UnigramTable { table }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> u32 {
        self.table[rng.random_range(0..self.table.len())]
    }
}

struct Schedule {
    initial: f64,
    total: f64,
}

impl Schedule {
    fn rate(&self, processed: u64) -> f32 {
        let decayed = self.initial * (1.0 - processed as f64 / (self.total + 1.0));
        decayed.max(self.initial * LR_FLOOR) as f32
    }
}

fn keep_probabilities(vocab: &Vocabulary, threshold: Option<f64>) -> Option<Vec<f64>> {
    let t = threshold?;
    let total: u64 = vocab.frequencies().iter().sum();
    let scaled = t * total as f64;
    Some(
        vocab
            .frequencies()
            .iter()
            .map(|&f| ((f as f64 / scaled).sqrt() + 1.0) * scaled / f as f64)
            .collect(),
    )
}

struct Trainer<'a> {
    config: &'a W2VConfig,
    table: &'a UnigramTable,
    keep: Option<&'a [f64]>,
    schedule: &'a Schedule,
}

impl Trainer<'_> {
    /// Trains on one sentence; returns the loss sum and the number of examples.
    fn sentence<V, W>(
        &self,
        input: &mut V,
        output: &mut W,
        sentence: &[u32],
        processed: u64,
        rng: &mut ChaCha8Rng,
        buffers: &mut Buffers,
    ) -> (f64, u64)
    where
        V: Params<f32> + ?Sized,
        W: Params<f32> + ?Sized,
    {
        let Buffers {
            kept,
            contexts,
            negatives,
            scratch,
        } = buffers;
        kept.clear();
        match self.keep {
            Some(keep) => kept.extend(
                sentence
                    .iter()
                    .copied()
                    .filter(|&t| keep[t as usize] >= 1.0 || rng.random::<f64>() < keep[t as usize]),
            ),
            None => kept.extend_from_slice(sentence),
        }
        let d = self.config.window;
        let mut loss = 0.0;
        let mut examples = 0;
        for j in 0..kept.len() {
            let lr = self.schedule.rate(processed + j as u64);
            let lo = j.saturating_sub(d);
            let hi = (j + d + 1).min(kept.len());
            let target = kept[j];
            match self.config.algorithm {
                Algorithm::SkipGram => {
                    for i in (lo..hi).filter(|&i| i != j) {
                        negatives.clear();
                        negatives.extend((0..self.config.negatives).map(|_| self.table.sample(rng)));
                        loss += f64::from(train_example(input, output, &kept[i..=i], target, negatives, lr, scratch));
                        examples += 1;
                    }
                }
                _ => {
                    contexts.clear();
                    contexts.extend((lo..hi).filter(|&i| i != j).map(|i| kept[i]));
                    if contexts.is_empty() {
                        continue;
                    }
                    negatives.clear();
                    negatives.extend((0..self.config.negatives).map(|_| self.table.sample(rng)));
                    loss += f64::from(train_example(input, output, contexts, target, negatives, lr, scratch));
                    examples += 1;
                }
            }
        }
        (loss, examples)
    }
}

struct Buffers {
    kept: Vec<u32>,
    contexts: Vec<u32>,
    negatives: Vec<u32>,
    scratch: Scratch<f32>,
}

impl Buffers {
    fn new(dim: usize) -> Self {
        Buffers {
            kept: Vec::new(),
            contexts: Vec::new(),
            negatives: Vec::new(),
            scratch: Scratch::new(dim),
        }
    }
}

fn check_corpus(corpus: &Corpus) -> Result<u64> {
    if corpus.vocab.len() < 2 {
        return Err(Error::CorpusTooShort(format!(
            "vocabulary has {} term(s), need at least 2",
            corpus.vocab.len()
        )));
    }
    let has_pair = corpus
        .docs
        .iter()
        .flat_map(|d| d.encoded_sentences())
        .any(|s| s.len() >= 2);
    if !has_pair {
        return Err(Error::CorpusTooShort("no sentence has two vocabulary tokens".into()));
    }
    Ok(corpus.total_tokens())
}

fn initial_input(vocab: &Vocabulary, config: &W2VConfig) -> Matrix<f32> {
    let mut rng = rng::substream(config.rng_seed, "w2v-init");
    let bound = 0.5 / config.dim as f32;
    let data = (0..vocab.len() * config.dim)
        .map(|_| rng.random_range(-bound..bound))
        .collect();
    Matrix::from_vec(vocab.len(), config.dim, data)
}

fn finish(corpus: &Corpus, config: &W2VConfig, input: Matrix<f32>, output: Matrix<f32>, epoch_loss: Vec<f64>) -> Result<Trained> {
    let model = EmbeddingModel::new(
        corpus.vocab.clone(),
        input,
        Some(output),
        Provenance {
            algorithm: config.algorithm,
            window: config.window as u32,
            rng_seed: config.rng_seed,
        },
    )?;
    Ok(Trained { model, epoch_loss })
}

/// Deterministic single-threaded training.
pub fn train_word2vec(corpus: &Corpus, config: &W2VConfig) -> Result<Trained> {
    config.validate()?;
    let total_tokens = check_corpus(corpus)?;
    let table = UnigramTable::new(&corpus.vocab);
    let keep = keep_probabilities(&corpus.vocab, config.subsample_threshold);
    let schedule = Schedule {
        initial: config.learning_rate,
        total: (config.epochs as u64 * total_tokens) as f64,
    };
    let trainer = Trainer {
        config,
        table: &table,
        keep: keep.as_deref(),
        schedule: &schedule,
    };

    let mut input = initial_input(&corpus.vocab, config);
    let mut output = Matrix::zeros(corpus.vocab.len(), config.dim);
    let mut rng = rng::substream(config.rng_seed, "w2v-train");
    let mut buffers = Buffers::new(config.dim);
    let mut processed = 0u64;
    let mut epoch_loss = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let (mut loss, mut examples) = (0.0, 0u64);
        for sentence in corpus.docs.iter().flat_map(|d| d.encoded_sentences()) {
            let (l, n) = trainer.sentence(&mut input, &mut output, sentence, processed, &mut rng, &mut buffers);
            loss += l;
            examples += n;
            processed += sentence.len() as u64;
        }
        if !loss.is_finite() || !input.is_finite() || !output.is_finite() {
            return Err(Error::TrainingDiverged);
        }
        epoch_loss.push(loss / examples.max(1) as f64);
    }
    finish(corpus, config, input, output, epoch_loss)
}

/// Lock-free parallel training over document shards. Threads update the
/// shared layers without coordination, so results are only statistically
/// reproducible.
pub fn train_word2vec_hogwild(corpus: &Corpus, config: &W2VConfig, threads: usize) -> Result<Trained> {
    if threads <= 1 {
        return train_word2vec(corpus, config);
    }
    config.validate()?;
    let total_tokens = check_corpus(corpus)?;
    let table = UnigramTable::new(&corpus.vocab);
    let keep = keep_probabilities(&corpus.vocab, config.subsample_threshold);
    let schedule = Schedule {
        initial: config.learning_rate,
        total: (config.epochs as u64 * total_tokens) as f64,
    };
    let trainer = Trainer {
        config,
        table: &table,
        keep: keep.as_deref(),
        schedule: &schedule,
    };

    let to_atomic = |m: Matrix<f32>| -> Vec<AtomicU32> {
        m.as_slice().iter().map(|x| AtomicU32::new(x.to_bits())).collect()
    };
    let input = to_atomic(initial_input(&corpus.vocab, config));
    let output = to_atomic(Matrix::zeros(corpus.vocab.len(), config.dim));
    let processed = AtomicU64::new(0);
    let shard = corpus.docs.len().div_ceil(threads);

    let results: Vec<Vec<(f64, u64)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = corpus
            .docs
            .chunks(shard.max(1))
            .enumerate()
            .map(|(t, docs)| {
                let (trainer, input, output, processed) = (&trainer, &input, &output, &processed);
                scope.spawn(move || {
                    let mut v = RacyRows { data: input, cols: config.dim };
                    let mut w = RacyRows { data: output, cols: config.dim };
                    let mut rng = rng::substream(config.rng_seed, &format!("w2v-hogwild-{t}"));
                    let mut buffers = Buffers::new(config.dim);
                    let mut per_epoch = Vec::with_capacity(config.epochs);
                    for _ in 0..config.epochs {
                        let (mut loss, mut examples) = (0.0, 0u64);
                        for sentence in docs.iter().flat_map(|d| d.encoded_sentences()) {
                            let seen = processed.fetch_add(sentence.len() as u64, Ordering::Relaxed);
                            let (l, n) = trainer.sentence(&mut v, &mut w, sentence, seen, &mut rng, &mut buffers);
                            loss += l;
                            examples += n;
                        }
                        per_epoch.push((loss, examples));
                    }
                    per_epoch
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("training thread panicked")).collect()
    });

    let epoch_loss: Vec<f64> = (0..config.epochs)
        .map(|e| {
            let (loss, n) = results
                .iter()
                .fold((0.0, 0u64), |(l, n), r| (l + r[e].0, n + r[e].1));
            loss / n.max(1) as f64
        })
        .collect();
    if epoch_loss.iter().any(|l| !l.is_finite()) {
        return Err(Error::TrainingDiverged);
    }
    let from_atomic = |cells: Vec<AtomicU32>| {
        let data = cells.into_iter().map(|c| f32::from_bits(c.into_inner())).collect();
        Matrix::from_vec(corpus.vocab.len(), config.dim, data)
    };
    finish(corpus, config, from_atomic(input), from_atomic(output), epoch_loss)
}
