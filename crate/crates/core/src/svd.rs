//! Sentence-term matrices and randomized truncated SVD, the baseline embedding.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::model::{Algorithm, EmbeddingModel, Matrix, Provenance};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    #[default]
    Count,
    /// `1 + ln(count)`
    LogCount,
}

impl std::str::FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "count" => Ok(Weighting::Count),
            "log-count" | "logcount" => Ok(Weighting::LogCount),
            _ => Err(Error::InvalidConfig(format!("unknown weighting {s:?}"))),
        }
    }
}

/// Sparse sentence × term matrix in CSR layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceTermMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SentenceTermMatrix {
    /// Builds a matrix from rows of (column, value) pairs. Zero entries are dropped.
    pub fn from_rows(cols: usize, rows: &[Vec<(u32, f64)>]) -> Self {
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for row in rows {
            let mut row: Vec<(u32, f64)> = row.iter().copied().filter(|&(_, v)| v != 0.0).collect();
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                assert!((c as usize) < cols, "column out of range");
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        SentenceTermMatrix {
            rows: rows.len(),
            cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (u32, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                m[(r, c as usize)] = v;
            }
        }
        m
    }

    /// A · X for dense X (cols × l).
    fn mul(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.rows, x.ncols());
        for j in 0..x.ncols() {
            let xc = x.column(j);
            let mut oc = out.column_mut(j);
            for r in 0..self.rows {
                oc[r] = self.row(r).map(|(c, v)| v * xc[c as usize]).sum();
            }
        }
        out
    }

    /// Aᵀ · X for dense X (rows × l).
    fn mul_transpose(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.cols, x.ncols());
        for j in 0..x.ncols() {
            let xc = x.column(j);
            let mut oc = out.column_mut(j);
            for r in 0..self.rows {
                let xr = xc[r];
                if xr != 0.0 {
                    for (c, v) in self.row(r) {
                        oc[c as usize] += v * xr;
                    }
                }
            }
        }
        out
    }
}

/// One row per sentence holding at least one vocabulary term.
pub fn build_sentence_term_matrix(corpus: &Corpus, weighting: Weighting) -> Result<SentenceTermMatrix> {
    if corpus.vocab.is_empty() {
        return Err(Error::EmptyVocabulary { min_count: corpus.vocab.min_count() });
    }
    let mut rows = Vec::new();
    let mut counts: Vec<(u32, u32)> = Vec::new();
    for sentence in corpus.docs.iter().flat_map(|d| d.encoded_sentences()) {
        if sentence.is_empty() {
            continue;
        }
        let mut ids = sentence.clone();
        ids.sort_unstable();
        counts.clear();
        for t in ids {
            match counts.last_mut() {
                Some((last, n)) if *last == t => *n += 1,
                _ => counts.push((t, 1)),
            }
        }
        rows.push(
            counts
                .iter()
                .map(|&(t, n)| {
                    let n = f64::from(n);
                    let v = match weighting {
                        Weighting::Count => n,
                        Weighting::LogCount => 1.0 + n.ln(),
                    };
                    (t, v)
                })
                .collect::<Vec<_>>(),
        );
    }
    if rows.is_empty() {
        return Err(Error::NoSentences);
    }
    Ok(SentenceTermMatrix::from_rows(corpus.vocab.len(), &rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SvdOptions {
    pub power_iterations: usize,
    pub oversampling: usize,
}

impl Default for SvdOptions {
    fn default() -> Self {
        SvdOptions {
            power_iterations: 8,
            oversampling: 10,
        }
    }
}

/// Rank-k factors `A ≈ U diag(σ) Vᵀ` with σ non-increasing.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    /// rows × k
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    /// k × cols
    pub vt: DMatrix<f64>,
}

impl TruncatedSvd {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let k = self.singular_values.len();
        let mut us = self.u.clone();
        for c in 0..k {
            us.column_mut(c).scale_mut(self.singular_values[c]);
        }
        us * &self.vt
    }

    /// Term vectors `V Σ` (cols × k).
    pub fn term_vectors(&self) -> Matrix<f32> {
        let k = self.singular_values.len();
        let n = self.vt.ncols();
        let mut out = Matrix::zeros(n, k);
        for t in 0..n {
            for (c, x) in out.row_mut(t).iter_mut().enumerate() {
                *x = (self.vt[(c, t)] * self.singular_values[c]) as f32;
            }
        }
        out
    }
}

fn orthonormalize(m: DMatrix<f64>) -> DMatrix<f64> {
    m.qr().q()
}

pub fn truncated_svd(matrix: &SentenceTermMatrix, k: usize, rng_seed: u64) -> Result<TruncatedSvd> {
    truncated_svd_with(matrix, k, rng_seed, SvdOptions::default())
}

/// Randomized subspace iteration.
pub fn truncated_svd_with(
    matrix: &SentenceTermMatrix,
    k: usize,
    rng_seed: u64,
    options: SvdOptions,
) -> Result<TruncatedSvd> {
    let bound = matrix.rows.min(matrix.cols);
    if k == 0 || k > bound {
        return Err(Error::RankTooLarge { k, bound });
    }
    let l = (k + options.oversampling).min(bound);
    let mut rng = rng::substream(rng_seed, "svd-sketch");
    let omega = DMatrix::from_fn(matrix.cols, l, |_, _| rng.sample::<f64, _>(StandardNormal));

    let mut q = orthonormalize(matrix.mul(&omega));
    for _ in 0..options.power_iterations {
        let z = orthonormalize(matrix.mul_transpose(&q));
        q = orthonormalize(matrix.mul(&z));
    }
    // B = Qᵀ A, formed as (Aᵀ Q)ᵀ
    let b = matrix.mul_transpose(&q).transpose();
    let svd = b.svd(true, true);
    let (ub, vtb) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    order.truncate(k);

    let ub = DMatrix::from_fn(ub.nrows(), k, |r, c| ub[(r, order[c])]);
    let mut u = q * ub;
    let mut vt = DMatrix::from_fn(k, matrix.cols, |r, c| vtb[(order[r], c)]);
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();

    // largest-magnitude term loading of each component is positive
    for c in 0..k {
        let row = vt.row(c);
        let pivot = row
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (j, &x)| if x.abs() > best.1.abs() { (j, x) } else { best });
        if pivot.1 < 0.0 {
            vt.row_mut(c).neg_mut();
            u.column_mut(c).neg_mut();
        }
    }
    Ok(TruncatedSvd {
        u,
        singular_values,
        vt,
    })
}

/// Trains the SVD baseline: sentence-term matrix, truncated SVD, term vectors `VΣ`.
pub fn svd_model(corpus: &Corpus, k: usize, weighting: Weighting, rng_seed: u64) -> Result<EmbeddingModel> {
    let matrix = build_sentence_term_matrix(corpus, weighting)?;
    let svd = truncated_svd(&matrix, k, rng_seed)?;
    EmbeddingModel::new(
        corpus.vocab.clone(),
        svd.term_vectors(),
        None,
        Provenance {
            algorithm: Algorithm::Svd,
            window: 0,
            rng_seed,
        },
    )
}
