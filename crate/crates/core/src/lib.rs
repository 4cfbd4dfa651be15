//! Latent Semantic Scaling with probabilistic and spatial word polarity.
//!
//! The pipeline: tokenize a corpus ([`corpus`]), train word vectors with
//! word2vec ([`w2v`]) or truncated SVD ([`svd`]), expand seed words into word
//! polarity scores and score documents ([`scaling`]), select hyperparameters by
//! seed perplexity ([`modelfit`]), and evaluate against dictionary analysis
//! ([`evalkit`]).

pub mod corpus;
pub mod error;
pub mod evalkit;
pub mod model;
pub mod modelfit;
pub mod rng;
pub mod scaling;
pub mod svd;
pub mod synth;
pub mod w2v;

pub use corpus::{Corpus, Document, PatternSet, TokenizedDocument, TokenizerConfig, Vocabulary};
pub use error::{Error, ErrorKind, Result};
pub use model::{Algorithm, EmbeddingModel, Matrix, Provenance};
pub use scaling::{ScoreTable, SeedSet, WordPolarity};
pub use w2v::W2VConfig;
