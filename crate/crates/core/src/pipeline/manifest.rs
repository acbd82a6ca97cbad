use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{Preset, ScorerConfig};
use crate::error::{Error, Result};
use crate::jsonl;
use crate::scorer::checkpoint::digest;
use crate::scorer::Task;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetRole {
    /// Human-annotated target data.
    TargetV,
    /// Weakly-labeled data.
    WeakW,
    /// Held-out data evaluated after every epoch; never trained on.
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRef {
    pub name: String,
    pub path: PathBuf,
    pub role: DatasetRole,
    pub task: Task,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageEpochs {
    pub teacher: usize,
    pub student: usize,
    /// Defaults to 8 for multiple choice and 2 for extractive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expert: Option<usize>,
}

impl Default for StageEpochs {
    fn default() -> Self {
        Self {
            teacher: 1,
            student: 1,
            expert: None,
        }
    }
}

impl StageEpochs {
    pub fn expert_for(&self, task: Task) -> usize {
        self.expert.unwrap_or(match task {
            Task::MultipleChoice => 8,
            Task::Extractive => 2,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Mode {
    /// Teacher on V plus all weak data, student, expert.
    SelfTeaching,
    /// One teacher per weak dataset; the student pools all their soft labels.
    IntegrateSources,
    /// Weak data pooled, shuffled and split into `n_splits` teachers.
    MultiTeacher { n_splits: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpertTeacher {
    Student,
    Teacher,
}

fn default_lambda() -> f64 {
    0.5
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3, 4, 5]
}

fn default_preset() -> Preset {
    Preset::Desk
}

fn default_checkpoint_dir() -> PathBuf {
    PathBuf::from("checkpoints")
}

fn default_expert_teacher() -> ExpertTeacher {
    ExpertTeacher::Student
}

fn default_mode() -> Mode {
    Mode::SelfTeaching
}

/// Scorer fields that override the preset when present.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ScorerOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_emb: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
}

/// Everything that determines a run. Stored as `manifest.json` in the run
/// directory; its hash is recorded in every checkpoint's lineage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineManifest {
    pub datasets: Vec<DatasetRef>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub epochs: StageEpochs,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_preset")]
    pub preset: Preset,
    #[serde(default)]
    pub scorer: ScorerOverrides,
    /// Relative paths resolve against the run directory.
    #[serde(default = "default_checkpoint_dir")]
    pub checkpoint_dir: PathBuf,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    /// Which model labels V for the expert.
    #[serde(default = "default_expert_teacher")]
    pub expert_teacher: ExpertTeacher,
    /// Initialize the student from the teacher instead of fresh.
    #[serde(default)]
    pub warm_start_student: bool,
    /// One more expert, initialized from the student and taught by the expert.
    #[serde(default)]
    pub extra_expert_round: bool,
    /// Sparsify span soft labels to the k most probable positions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topk_soft: Option<usize>,
    /// Also train a fresh model on hard V labels for comparison.
    #[serde(default)]
    pub baseline: bool,
    /// Also fine-tune the teacher on hard V labels for comparison.
    #[serde(default)]
    pub control: bool,
}

impl PipelineManifest {
    pub fn new(datasets: Vec<DatasetRef>) -> Self {
        Self {
            datasets,
            lambda: default_lambda(),
            epochs: StageEpochs::default(),
            seeds: default_seeds(),
            preset: default_preset(),
            scorer: ScorerOverrides::default(),
            checkpoint_dir: default_checkpoint_dir(),
            mode: default_mode(),
            expert_teacher: default_expert_teacher(),
            warm_start_student: false,
            extra_expert_round: false,
            topk_soft: None,
            baseline: false,
            control: false,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: Self = jsonl::read_json(path, "pipeline")?;
        m.validate()?;
        Ok(m)
    }

    /// Makes relative dataset paths relative to `base` instead.
    pub fn resolve_paths(&mut self, base: &Path) {
        for d in &mut self.datasets {
            if d.path.is_relative() {
                d.path = base.join(&d.path);
            }
        }
    }

    pub fn scorer_config(&self) -> ScorerConfig {
        let base = ScorerConfig::preset(self.preset);
        ScorerConfig {
            d_emb: self.scorer.d_emb.unwrap_or(base.d_emb),
            max_len: self.scorer.max_len.unwrap_or(base.max_len),
            lr: self.scorer.lr.unwrap_or(base.lr),
            batch_size: self.scorer.batch_size.unwrap_or(base.batch_size),
        }
    }

    pub fn task(&self) -> Result<Task> {
        self.datasets
            .first()
            .map(|d| d.task)
            .ok_or_else(|| Error::Config("manifest lists no datasets".into()))
    }

    pub fn target(&self) -> Result<&DatasetRef> {
        let mut targets = self.datasets.iter().filter(|d| d.role == DatasetRole::TargetV);
        match (targets.next(), targets.next()) {
            (Some(t), None) => Ok(t),
            (None, _) => Err(Error::Config("manifest has no target_v dataset".into())),
            (Some(_), Some(_)) => Err(Error::Config("manifest has more than one target_v dataset".into())),
        }
    }

    pub fn weak(&self) -> impl Iterator<Item = &DatasetRef> {
        self.datasets.iter().filter(|d| d.role == DatasetRole::WeakW)
    }

    pub fn evals(&self) -> impl Iterator<Item = &DatasetRef> {
        self.datasets.iter().filter(|d| d.role == DatasetRole::Eval)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!("lambda {} outside [0, 1]", self.lambda)));
        }
        let e = &self.epochs;
        if e.teacher == 0 || e.student == 0 || e.expert == Some(0) {
            return Err(Error::Config("stage epochs must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("manifest lists no seeds".into()));
        }
        let task = self.task()?;
        if let Some(d) = self.datasets.iter().find(|d| d.task != task) {
            return Err(Error::Config(format!(
                "dataset {} is {} but the run is {task}; mixed-task runs are not supported",
                d.name, d.task
            )));
        }
        self.target()?;
        let mut names: Vec<&str> = self.datasets.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("dataset name {} used twice", w[0])));
        }
        let n_weak = self.weak().count();
        match self.mode {
            Mode::SelfTeaching => {}
            Mode::IntegrateSources if n_weak < 2 => {
                return Err(Error::Config(format!(
                    "integrate_sources needs at least 2 weak datasets, got {n_weak}; use self_teaching"
                )))
            }
            Mode::IntegrateSources => {}
            Mode::MultiTeacher { n_splits } if n_splits < 2 => {
                return Err(Error::Config(format!(
                    "multi_teacher needs n_splits >= 2, got {n_splits}"
                )))
            }
            Mode::MultiTeacher { .. } if n_weak == 0 => {
                return Err(Error::Config("multi_teacher needs weak data".into()))
            }
            Mode::MultiTeacher { .. } => {}
        }
        if self.topk_soft == Some(0) {
            return Err(Error::Config("topk_soft must be at least 1".into()));
        }
        self.scorer_config().validate()
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        digest(&serde_json::to_vec(self).expect("manifest serializes"))
    }
}
