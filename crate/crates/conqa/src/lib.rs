//! Consistency toolkit for comparison question answering.
//!
//! Comparison questions ("Which planet would the sun appear larger?") come
//! with logical obligations: rewriting the question with an antonym should
//! flip the answer, and two chained cause-effect questions imply a third.
//! This crate makes a classifier honor those obligations end to end:
//!
//! - [`lexicon`] holds the antonym dictionary and negation templates and
//!   finds polarity phrases in questions.
//! - [`augment`] rewrites questions into symmetric counterparts, composes
//!   transitive questions from cause-effect chains, relabels their answers,
//!   and samples a fixed training subset.
//! - [`model`] is a small feature-hashed bag-of-words softmax classifier
//!   with a hand-rolled Adam optimizer.
//! - [`consistency`] implements the symmetric and transitive consistency
//!   losses (absolute log-probability differences, product T-norm for
//!   conjunction) with annealing and masking.
//! - [`trainer`] runs the regularized training loop and evaluates accuracy.
//! - [`audit`] measures the violation rate of a prediction set against the
//!   stored consistency links.
//! - [`toygen`] generates synthetic comparison QA data with planted logic,
//!   for end-to-end experiments without any external dataset.
//!
//! The `examples/` directory has one runnable program per capability; the
//! `conqa` binary wires the same pieces into `augment`, `train`, `eval`,
//! `audit`, and `gen-toy` subcommands.

pub mod audit;
pub mod augment;
pub mod cli;
pub mod config;
pub mod consistency;
pub mod data;
pub mod lexicon;
pub mod model;
pub mod toygen;
pub mod trainer;

pub use audit::AuditReport;
pub use augment::AugmentationOutput;
pub use data::{ConsistencyLink, Dataset, Example, LinkKind, Origin, TaskFormat};
pub use lexicon::AntonymLexicon;
pub use model::{Parameters, Prediction};
pub use trainer::{Mode, TrainingConfig, TrainingHistory};
