//! Embedding models: the input layer V, the optional output layer W, and the
//! binary container they are persisted in.

use std::fmt;
use std::fs;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use num_traits::Float;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"LSSW2V1\0";

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<F = f32> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Float> Matrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<F>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<F>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let data: Vec<F> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Matrix::from_vec(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [F] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Dot product accumulated in f64.
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum()
}

pub fn norm(a: &[f32]) -> f64 {
    dot(a, a).sqrt()
}

/// Logistic function, branch-split so neither side overflows.
pub fn sigmoid<F: Float>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    SkipGram,
    Cbow,
    Svd,
}

impl Algorithm {
    pub fn tag(self) -> &'static str {
        match self {
            Algorithm::SkipGram => "SG",
            Algorithm::Cbow => "CBOW",
            Algorithm::Svd => "SVD",
        }
    }

    fn code(self) -> u8 {
        match self {
            Algorithm::SkipGram => 0,
            Algorithm::Cbow => 1,
            Algorithm::Svd => 2,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Algorithm::SkipGram),
            1 => Some(Algorithm::Cbow),
            2 => Some(Algorithm::Svd),
            _ => None,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SG" | "SKIPGRAM" | "SKIP-GRAM" => Ok(Algorithm::SkipGram),
            "CBOW" => Ok(Algorithm::Cbow),
            "SVD" => Ok(Algorithm::Svd),
            _ => Err(Error::InvalidConfig(format!("unknown algorithm {s:?}"))),
        }
    }
}

/// Settings recorded in the model header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Provenance {
    pub algorithm: Algorithm,
    pub window: u32,
    pub rng_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    vocab: Vocabulary,
    input: Matrix<f32>,
    output: Option<Matrix<f32>>,
    provenance: Provenance,
}

/// A model known to carry output-layer weights.
#[derive(Debug, Clone, Copy)]
pub struct ProbabilisticModel<'a> {
    pub vocab: &'a Vocabulary,
    pub input: &'a Matrix<f32>,
    pub output: &'a Matrix<f32>,
}

impl ProbabilisticModel<'_> {
    /// sigmoid(V_context · W_target) by vocabulary index.
    pub fn probability(&self, context: u32, target: u32) -> f64 {
        sigmoid(dot(self.input.row(context as usize), self.output.row(target as usize)))
    }
}

impl EmbeddingModel {
    pub fn new(
        vocab: Vocabulary,
        input: Matrix<f32>,
        output: Option<Matrix<f32>>,
        provenance: Provenance,
    ) -> Result<Self> {
        if input.rows() != vocab.len() {
            return Err(Error::ModelFormat(format!(
                "input layer has {} rows for {} terms",
                input.rows(),
                vocab.len()
            )));
        }
        if let Some(w) = &output {
            if w.rows() != input.rows() || w.cols() != input.cols() {
                return Err(Error::ModelFormat("input and output layers differ in shape".into()));
            }
        }
        if (provenance.algorithm == Algorithm::Svd) != output.is_none() {
            return Err(Error::ModelFormat(
                "SVD models carry no output layer; word2vec models require one".into(),
            ));
        }
        if !input.is_finite() || output.as_ref().is_some_and(|w| !w.is_finite()) {
            return Err(Error::TrainingDiverged);
        }
        Ok(EmbeddingModel {
            vocab,
            input,
            output,
            provenance,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn input(&self) -> &Matrix<f32> {
        &self.input
    }

    pub fn output(&self) -> Option<&Matrix<f32>> {
        self.output.as_ref()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn dim(&self) -> usize {
        self.input.cols()
    }

    pub fn probabilistic(&self) -> Result<ProbabilisticModel<'_>> {
        let output = self.output.as_ref().ok_or(Error::MissingOutputLayer)?;
        Ok(ProbabilisticModel {
            vocab: &self.vocab,
            input: &self.input,
            output,
        })
    }

    pub fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        let p = &self.provenance;
        w.write_all(MAGIC)?;
        w.write_all(&(self.vocab.len() as u32).to_le_bytes())?;
        w.write_all(&(self.dim() as u32).to_le_bytes())?;
        w.write_all(&[p.algorithm.code()])?;
        w.write_all(&p.window.to_le_bytes())?;
        w.write_all(&p.rng_seed.to_le_bytes())?;
        w.write_all(&self.vocab.min_count().to_le_bytes())?;
        for (term, &freq) in self.vocab.terms().iter().zip(self.vocab.frequencies()) {
            w.write_all(&(term.len() as u32).to_le_bytes())?;
            w.write_all(term.as_bytes())?;
            w.write_all(&freq.to_le_bytes())?;
        }
        for m in std::iter::once(&self.input).chain(self.output.as_ref()) {
            for x in m.as_slice() {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let bad = |e: io::Error| Error::ModelFormat(format!("truncated or unreadable: {e}"));
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(bad)?;
        if &magic != MAGIC {
            return Err(Error::ModelFormat("bad magic bytes".into()));
        }
        let n = read_u32(r).map_err(bad)? as usize;
        let k = read_u32(r).map_err(bad)? as usize;
        let mut code = [0u8; 1];
        r.read_exact(&mut code).map_err(bad)?;
        let algorithm = Algorithm::from_code(code[0])
            .ok_or_else(|| Error::ModelFormat(format!("unknown algorithm tag {}", code[0])))?;
        let window = read_u32(r).map_err(bad)?;
        let rng_seed = read_u64(r).map_err(bad)?;
        let min_count = read_u64(r).map_err(bad)?;

        let mut counts = Vec::with_capacity(n);
        for _ in 0..n {
            let len = read_u32(r).map_err(bad)? as usize;
            let mut bytes = vec![0u8; len];
            r.read_exact(&mut bytes).map_err(bad)?;
            let term = String::from_utf8(bytes)
                .map_err(|_| Error::ModelFormat("vocabulary term is not UTF-8".into()))?;
            counts.push((term, read_u64(r).map_err(bad)?));
        }
        let stored: Vec<String> = counts.iter().map(|(t, _)| t.clone()).collect();
        let vocab = Vocabulary::from_counts(counts, min_count)?;
        if vocab.terms() != stored.as_slice() {
            return Err(Error::ModelFormat("vocabulary is not in canonical order".into()));
        }

        let read_matrix = |r: &mut dyn Read| -> Result<Matrix<f32>> {
            let mut buf = vec![0u8; n * k * 4];
            r.read_exact(&mut buf).map_err(bad)?;
            let data = buf
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            Ok(Matrix::from_vec(n, k, data))
        };
        let input = read_matrix(r)?;
        let output = match algorithm {
            Algorithm::Svd => None,
            _ => Some(read_matrix(r)?),
        };
        let mut rest = [0u8; 1];
        if r.read(&mut rest).map_err(bad)? != 0 {
            return Err(Error::ModelFormat("trailing bytes".into()));
        }
        EmbeddingModel::new(
            vocab,
            input,
            output,
            Provenance {
                algorithm,
                window,
                rng_seed,
            },
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        EmbeddingModel::read_from(&mut bytes.as_slice())
            .map_err(|e| e.context(path.display().to_string()))
    }

    /// Lossy text export of the input layer: a `terms dim` header, then one
    /// term and its vector per line.
    pub fn write_text(&self, w: &mut impl Write) -> io::Result<()> {
        writeln!(w, "{} {}", self.vocab.len(), self.dim())?;
        for (i, term) in self.vocab.terms().iter().enumerate() {
            write!(w, "{term}")?;
            for x in self.input.row(i) {
                write!(w, " {x:.6}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn read_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Probability that `target` occurs in the context of `context`.
pub fn predict_probability(model: &EmbeddingModel, context: &str, target: &str) -> Result<f64> {
    let m = model.probabilistic()?;
    let c = model.vocab.lookup(context)?;
    let t = model.vocab.lookup(target)?;
    Ok(m.probability(c, t))
}

/// Context words ranked by their probability of predicting `target`.
pub fn context_probabilities(
    model: &EmbeddingModel,
    target: &str,
    top_n: usize,
) -> Result<Vec<(String, f64)>> {
    if top_n == 0 {
        return Err(Error::InvalidConfig("top_n must be at least 1".into()));
    }
    let m = model.probabilistic()?;
    let t = model.vocab.lookup(target)?;
    let mut scored: Vec<(u32, f64)> = (0..model.vocab.len() as u32)
        .map(|c| (c, m.probability(c, t)))
        .collect();
    // stable sort keeps vocabulary order among ties
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(scored
        .into_iter()
        .take(top_n)
        .map(|(c, p)| (model.vocab.term(c).to_string(), p))
        .collect())
}
