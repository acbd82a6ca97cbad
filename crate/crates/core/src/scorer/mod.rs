//! The trainable reading-comprehension scorer behind every teacher and
//! student: character vocabulary, input encoding, a small attention-pooling
//! model with analytic gradients, Adam, and the checkpoint container.

pub mod checkpoint;
pub mod encode;
pub mod model;
pub mod optim;
pub mod params;
pub mod vocab;

pub use checkpoint::{load_params, save_params, Checkpoint, Lineage};
pub use encode::{encode_mc, encode_span, EncodedInstance, EncodedMc, EncodedSpan, McSequence};
pub use model::{
    batch_loss, best_span, forward_mc, forward_span, gradients, Example, OptionDistribution, SpanDistributions, Target,
};
pub use optim::{opt_step, AdamState};
pub use params::{ScorerParams, Task};
pub use vocab::Vocabulary;
