//! Converting multiple-choice QA into weakly-labeled reading comprehension
//! data, and training reading-comprehension scorers with a three-stage
//! self-teaching schedule: a teacher trained on hard labels, a fresh student
//! trained on the teacher's blended soft labels, and an expert initialized
//! from the student and fine-tuned on the target data with the student's
//! soft labels.

pub mod cli;
pub mod config;
pub mod context_forge;
pub mod distill;
pub mod error;
pub mod jsonl;
pub mod metrics;
pub mod pipeline;
pub mod qa_corpus;
pub mod retrieval;
pub mod scorer;
pub mod synth;

pub use error::{Error, Result};
