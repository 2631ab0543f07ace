//! Kinship and face-verification research toolkit over precomputed embeddings.
//!
//! * [`embedding`]: vector primitives and the embedding data model.
//! * [`matcher`]: thresholded pair decisions and score matrices.
//! * [`clustering`]: semi-supervised spherical K-means guided by partial
//!   labels, category utility and NMI.
//! * [`dataset`]: families, pair lists, folds, face pruning, track pooling.
//! * [`eval`]: verification rates, thresholds, DET curves, subgroup bias,
//!   retrieval (AP, MAP, CMC), tri-subject scores, classification metrics.
//! * [`svm`]: class-weighted squared-hinge linear classifier.
//! * [`fusion`]: template scoring by score fusion, feature fusion and
//!   template adaptation.
//! * [`debias`]: adversarial feature adapter trained with gradient reversal,
//!   and the subgroup leakage probe.
//! * [`io`]: file formats shared with the command-line front end.
//! * [`commands`]: the subcommand pipelines run by the `kinface` binary.

pub mod clustering;
pub mod commands;
pub mod dataset;
pub mod debias;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod io;
pub mod matcher;
pub mod svm;

pub use embedding::{cosine_similarity, l2_normalize, Dataset, Embedding, Modality, ZERO_NORM_TOL};
pub use error::{Error, Result};
