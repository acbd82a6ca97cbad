//! The three self-teaching stages, multi-source integration and the
//! multi-teacher baseline, with persisted checkpoints, soft-label files and
//! per-epoch metrics.

pub mod data;
pub mod manifest;
pub mod run;
pub mod train;

pub use data::{build_examples, evaluate, gen_soft_labels, Dataset, Records, SoftLabels, SoftRecord};
pub use manifest::{DatasetRef, DatasetRole, ExpertTeacher, Mode, PipelineManifest, StageEpochs};
pub use run::{near_equal_split, MetricLine, ReportEntry, Run, RunReport, StageKind, StageRecord};
pub use train::{epoch_order, train};
