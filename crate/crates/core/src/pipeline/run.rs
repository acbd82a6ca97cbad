//! Run directories and stage orchestration.
//!
//! Layout under the run root:
//!
//! ```text
//! manifest.json  vocab.json  metrics.jsonl  report.json  .lock
//! checkpoints/seed{s}/{stage}.ckpt
//! softlabels/seed{s}/{labeler}__{dataset}.jsonl
//! stages/seed{s}/{stage}.json
//! ```
//!
//! A stage whose record, checkpoint and manifest hash are all present and
//! consistent is reused instead of retrained.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::{build_examples, evaluate, gen_soft_labels, write_soft_labels, Dataset, SoftLabels};
use super::manifest::{ExpertTeacher, Mode, PipelineManifest};
use super::train::train;
use crate::config::ScorerConfig;
use crate::error::{Error, Result};
use crate::jsonl;
use crate::metrics::aggregate_seeds;
use crate::scorer::checkpoint::digest;
use crate::scorer::{Checkpoint, Example, Lineage, ScorerParams, Task, Vocabulary};

const MODULE: &str = "pipeline";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricLine {
    pub stage: String,
    pub epoch: usize,
    pub split: String,
    pub metric: String,
    pub value: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    Teacher,
    Student,
    Expert,
    MultiTeacherK,
    Baseline,
    Control,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    Hard,
    Soft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Fresh,
    FromStudent,
    FromTeacher,
    FromCheckpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub kind: StageKind,
    pub label: LabelKind,
    pub init: InitKind,
    pub seed: u64,
    pub epochs: usize,
    /// Training examples per epoch.
    pub train_size: usize,
    /// Extractive instances left out because the answer was truncated.
    pub skipped: usize,
    /// Relative to the run root.
    pub checkpoint: PathBuf,
    pub checkpoint_id: String,
    pub lineage: Lineage,
    pub metrics: Vec<MetricLine>,
}

impl StageRecord {
    /// Value of `metric` on `split` after the last epoch.
    pub fn final_metric(&self, split: &str, metric: &str) -> Option<f64> {
        self.metrics
            .iter()
            .rev()
            .find(|m| m.split == split && m.metric == metric)
            .map(|m| m.value)
    }
}

/// A soft-label file on disk and its parsed content.
#[derive(Debug, Clone)]
pub struct SoftFile {
    pub path: PathBuf,
    pub labels: SoftLabels,
    pub skipped: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub stage: String,
    pub split: String,
    pub metric: String,
    pub seeds: Vec<u64>,
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub manifest_hash: String,
    pub entries: Vec<ReportEntry>,
}

impl RunReport {
    pub fn entry(&self, stage: &str, split: &str, metric: &str) -> Option<&ReportEntry> {
        self.entries
            .iter()
            .find(|e| e.stage == stage && e.split == split && e.metric == metric)
    }
}

/// Splits `0..n` into `k` shuffled parts whose sizes differ by at most one.
pub fn near_equal_split(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5_9117));
    let base = n / k;
    let extra = n % k;
    let mut out = Vec::with_capacity(k);
    let mut at = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        out.push(idx[at..at + len].to_vec());
        at += len;
    }
    out
}

struct RunLock(PathBuf);

impl RunLock {
    fn acquire(root: &Path) -> Result<Self> {
        let path = root.join(".lock");
        OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| {
                if e.kind() == std::io::ErrorKind::AlreadyExists {
                    Error::Pipeline(format!(
                        "run directory {} is locked by another process (remove {} if stale)",
                        root.display(),
                        path.display()
                    ))
                } else {
                    Error::io(MODULE, &path, e)
                }
            })?;
        Ok(Self(path))
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.0);
    }
}

/// Teacher stage name, its kind, and the weak data it adds to V.
struct Source {
    stage: String,
    kind: StageKind,
    weak: Dataset,
}

/// Seeds and the value each one reached.
type SeedValues = (Vec<u64>, Vec<f64>);

enum Init {
    Fresh,
    From(InitKind, Box<Checkpoint>, String),
}

struct StageSpec<'a> {
    name: String,
    kind: StageKind,
    label: LabelKind,
    init: Init,
    parts: Vec<(&'a Dataset, Option<&'a SoftLabels>)>,
    epochs: usize,
}

/// An opened run directory holding the loaded datasets and vocabulary.
pub struct Run {
    root: PathBuf,
    manifest: PipelineManifest,
    hash: String,
    task: Task,
    cfg: ScorerConfig,
    vocab: Vocabulary,
    target: Dataset,
    weak: Vec<Dataset>,
    evals: Vec<Dataset>,
    _lock: RunLock,
}

impl Run {
    /// Opens (or creates) a run directory for `manifest`. Dataset paths must
    /// already be resolved. Fails if the directory belongs to another manifest.
    pub fn open(root: &Path, manifest: PipelineManifest) -> Result<Self> {
        manifest.validate()?;
        std::fs::create_dir_all(root).map_err(|e| Error::io(MODULE, root, e))?;
        let lock = RunLock::acquire(root)?;
        let hash = manifest.hash();
        let manifest_path = root.join("manifest.json");
        if manifest_path.exists() {
            let existing: PipelineManifest = jsonl::read_json(&manifest_path, MODULE)?;
            if existing.hash() != hash {
                return Err(Error::Pipeline(format!(
                    "run directory {} was created for a different manifest; use a fresh directory",
                    root.display()
                )));
            }
        } else {
            jsonl::write_json(&manifest_path, &manifest, MODULE)?;
        }

        let task = manifest.task()?;
        let target = Dataset::load(manifest.target()?)?;
        if target.is_empty() {
            return Err(Error::Config(format!("target dataset {} is empty", target.name)));
        }
        let weak = manifest.weak().map(Dataset::load).collect::<Result<Vec<_>>>()?;
        let evals = manifest.evals().map(Dataset::load).collect::<Result<Vec<_>>>()?;
        let vocab = Vocabulary::build(
            std::iter::once(&target)
                .chain(&weak)
                .flat_map(|d| d.texts())
                .collect::<Vec<_>>(),
        );
        jsonl::write_json(&root.join("vocab.json"), &vocab, MODULE)?;
        Ok(Self {
            root: root.to_path_buf(),
            cfg: manifest.scorer_config(),
            manifest,
            hash,
            task,
            vocab,
            target,
            weak,
            evals,
            _lock: lock,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &PipelineManifest {
        &self.manifest
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn checkpoint_path(&self, seed: u64, stage: &str) -> PathBuf {
        let dir = if self.manifest.checkpoint_dir.is_absolute() {
            self.manifest.checkpoint_dir.clone()
        } else {
            self.root.join(&self.manifest.checkpoint_dir)
        };
        dir.join(format!("seed{seed}")).join(format!("{stage}.ckpt"))
    }

    fn record_path(&self, seed: u64, stage: &str) -> PathBuf {
        self.root
            .join("stages")
            .join(format!("seed{seed}"))
            .join(format!("{stage}.json"))
    }

    pub fn soft_path(&self, seed: u64, labeler: &str, dataset: &str) -> PathBuf {
        self.root
            .join("softlabels")
            .join(format!("seed{seed}"))
            .join(format!("{labeler}__{dataset}.jsonl"))
    }

    fn rel(&self, p: &Path) -> PathBuf {
        p.strip_prefix(&self.root)
            .map(Path::to_path_buf)
            .unwrap_or_else(|_| p.to_path_buf())
    }

    /// The record of a completed, consistent stage, if any.
    pub fn completed(&self, seed: u64, stage: &str) -> Result<Option<StageRecord>> {
        let path = self.record_path(seed, stage);
        if !path.exists() {
            return Ok(None);
        }
        let rec: StageRecord = jsonl::read_json(&path, MODULE)?;
        if rec.lineage.manifest_hash != self.hash {
            return Ok(None);
        }
        let ckpt = self.checkpoint_path(seed, stage);
        match std::fs::read(&ckpt) {
            Ok(bytes) if digest(&bytes) == rec.checkpoint_id => Ok(Some(rec)),
            _ => Ok(None),
        }
    }

    /// Loads the checkpoint of a completed stage.
    pub fn checkpoint(&self, seed: u64, stage: &str) -> Result<(Checkpoint, String)> {
        let Some(rec) = self.completed(seed, stage)? else {
            return Err(Error::Pipeline(format!(
                "stage {stage} has not completed for seed {seed}"
            )));
        };
        let (ckpt, id) = Checkpoint::load_for(&self.checkpoint_path(seed, stage), self.task)?;
        debug_assert_eq!(id, rec.checkpoint_id);
        Ok((ckpt, id))
    }

    /// The datasets a name may refer to: the target, weak datasets and
    /// per-teacher weak sources.
    pub fn dataset(&self, seed: u64, name: &str) -> Result<Dataset> {
        if name == self.target.name {
            return Ok(self.target.clone());
        }
        if let Some(d) = self.weak.iter().chain(&self.evals).find(|d| d.name == name) {
            return Ok(d.clone());
        }
        self.sources(seed)?
            .into_iter()
            .map(|s| s.weak)
            .find(|d| d.name == name)
            .ok_or_else(|| Error::Config(format!("no dataset named {name}")))
    }

    fn empty_like_target(&self, name: &str) -> Dataset {
        match self.task {
            Task::MultipleChoice => Dataset::mc(name, Vec::new()),
            Task::Extractive => Dataset::span(name, Vec::new()),
        }
    }

    fn sources(&self, seed: u64) -> Result<Vec<Source>> {
        match self.manifest.mode {
            Mode::SelfTeaching => {
                let weak = match self.weak.as_slice() {
                    [] => self.empty_like_target("no_weak"),
                    [one] => one.clone(),
                    many => {
                        let name = many.iter().map(|d| d.name.as_str()).collect::<Vec<_>>().join("+");
                        Dataset::concat(name, &many.iter().collect::<Vec<_>>())?
                    }
                };
                Ok(vec![Source {
                    stage: "teacher".into(),
                    kind: StageKind::Teacher,
                    weak,
                }])
            }
            Mode::IntegrateSources => Ok(self
                .weak
                .iter()
                .enumerate()
                .map(|(i, w)| Source {
                    stage: format!("teacher_{}", i + 1),
                    kind: StageKind::Teacher,
                    weak: w.clone(),
                })
                .collect()),
            Mode::MultiTeacher { n_splits } => {
                let pooled = Dataset::concat("weak", &self.weak.iter().collect::<Vec<_>>())?;
                Ok(near_equal_split(pooled.len(), n_splits, seed)
                    .iter()
                    .enumerate()
                    .map(|(i, idx)| Source {
                        stage: format!("teacher_{}", i + 1),
                        kind: StageKind::MultiTeacherK,
                        weak: pooled.subset(format!("weak_split{}", i + 1), idx),
                    })
                    .collect())
            }
        }
    }

    fn single_teacher(&self, seed: u64, purpose: &str) -> Result<String> {
        let sources = self.sources(seed)?;
        match sources.as_slice() {
            [one] => Ok(one.stage.clone()),
            _ => Err(Error::Config(format!(
                "{purpose} needs a single teacher (mode self_teaching)"
            ))),
        }
    }

    fn run_stage(&self, seed: u64, spec: StageSpec<'_>) -> Result<StageRecord> {
        if let Some(rec) = self.completed(seed, &spec.name)? {
            return Ok(rec);
        }
        let name = spec.name.clone();
        self.train_stage(seed, spec).map_err(|e| Error::Stage {
            stage: name,
            source: Box::new(e),
        })
    }

    fn train_stage(&self, seed: u64, spec: StageSpec<'_>) -> Result<StageRecord> {
        let mut examples: Vec<Example> = Vec::new();
        let mut skipped = 0;
        let mut soft_files = Vec::new();
        for (ds, soft) in &spec.parts {
            let (ex, sk) = build_examples(ds, *soft, &self.vocab, self.cfg.max_len)?;
            examples.extend(ex);
            skipped += sk;
            if let Some(s) = soft {
                soft_files.push(s.file_id.clone());
            }
        }
        let (params, init_kind, parent) = match spec.init {
            Init::Fresh => (
                ScorerParams::init(self.task, self.vocab.len(), self.cfg.d_emb, seed),
                InitKind::Fresh,
                None,
            ),
            Init::From(kind, ckpt, id) => {
                ckpt.params.check_layout(self.task)?;
                (ckpt.params, kind, Some(id))
            }
        };

        let mut metrics = Vec::new();
        let params = train(params, &examples, spec.epochs, &self.cfg, seed, |epoch, p, loss| {
            metrics.push(MetricLine {
                stage: spec.name.clone(),
                epoch,
                split: "train".into(),
                metric: "loss".into(),
                value: loss,
                seed,
            });
            for ds in &self.evals {
                for (metric, value) in evaluate(p, &self.vocab, self.cfg.max_len, ds)? {
                    metrics.push(MetricLine {
                        stage: spec.name.clone(),
                        epoch,
                        split: ds.name.clone(),
                        metric,
                        value,
                        seed,
                    });
                }
            }
            Ok(())
        })?;

        let lineage = Lineage {
            stage: spec.name.clone(),
            manifest_hash: self.hash.clone(),
            parent,
            soft_files,
        };
        let ckpt_path = self.checkpoint_path(seed, &spec.name);
        let checkpoint_id = Checkpoint {
            params,
            vocab: self.vocab.clone(),
            max_len: self.cfg.max_len,
            lineage: lineage.clone(),
        }
        .save(&ckpt_path)?;
        let rec = StageRecord {
            stage: spec.name.clone(),
            kind: spec.kind,
            label: spec.label,
            init: init_kind,
            seed,
            epochs: spec.epochs,
            train_size: examples.len(),
            skipped,
            checkpoint: self.rel(&ckpt_path),
            checkpoint_id,
            lineage,
            metrics,
        };
        self.append_metrics(&rec.metrics)?;
        jsonl::write_json(&self.record_path(seed, &spec.name), &rec, MODULE)?;
        Ok(rec)
    }

    fn append_metrics(&self, lines: &[MetricLine]) -> Result<()> {
        let path = self.root.join("metrics.jsonl");
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(MODULE, &path, e))?;
        let mut buf = String::new();
        for l in lines {
            buf.push_str(&serde_json::to_string(l).expect("metric line serializes"));
            buf.push('\n');
        }
        f.write_all(buf.as_bytes()).map_err(|e| Error::io(MODULE, &path, e))
    }

    /// Labels `dataset` with the checkpoint of `labeler` and writes the file.
    pub fn soft_labels(&self, seed: u64, labeler: &str, dataset: &Dataset) -> Result<SoftFile> {
        let (ckpt, id) = self.checkpoint(seed, labeler)?;
        let (records, skipped) = gen_soft_labels(&ckpt, &id, dataset, self.manifest.lambda, self.manifest.topk_soft)?;
        let path = self.soft_path(seed, labeler, &dataset.name);
        let file_id = write_soft_labels(&path, &records)?;
        Ok(SoftFile {
            path,
            labels: SoftLabels::from_records(records, file_id)?,
            skipped,
        })
    }

    /// Loads a soft-label file that `labeler` must have produced.
    fn load_soft(&self, seed: u64, labeler: &str, dataset: &str) -> Result<SoftLabels> {
        let path = self.soft_path(seed, labeler, dataset);
        if !path.exists() {
            return Err(Error::Pipeline(format!(
                "missing soft-label file {} (labels of {dataset} by {labeler}); generate it first",
                path.display()
            )));
        }
        let (_, teacher_id) = self.checkpoint(seed, labeler)?;
        let labels = SoftLabels::load(&path)?;
        if let Some(r) = labels.by_id.values().find(|r| r.teacher_id != teacher_id) {
            return Err(Error::Pipeline(format!(
                "soft-label file {} is stale: record {} was produced by another {labeler} checkpoint",
                path.display(),
                r.id
            )));
        }
        Ok(labels)
    }

    /// Stage 1: one teacher per weak source, hard labels on V plus that source.
    pub fn train_teacher(&self, seed: u64) -> Result<Vec<StageRecord>> {
        let mut out = Vec::new();
        for src in self.sources(seed)? {
            out.push(self.run_stage(
                seed,
                StageSpec {
                    name: src.stage.clone(),
                    kind: src.kind,
                    label: LabelKind::Hard,
                    init: Init::Fresh,
                    parts: vec![(&self.target, None), (&src.weak, None)],
                    epochs: self.manifest.epochs.teacher,
                },
            )?);
        }
        Ok(out)
    }

    /// Writes every teacher's soft labels for V and for its weak source.
    pub fn teacher_soft_labels(&self, seed: u64) -> Result<Vec<SoftFile>> {
        let mut out = Vec::new();
        for src in self.sources(seed)? {
            out.push(self.soft_labels(seed, &src.stage, &self.target)?);
            out.push(self.soft_labels(seed, &src.stage, &src.weak)?);
        }
        Ok(out)
    }

    /// Stage 2: the student learns every teacher's soft labels; V once per
    /// teacher, then each teacher's weak source.
    pub fn train_student(&self, seed: u64) -> Result<StageRecord> {
        let sources = self.sources(seed)?;
        let mut v_labels = Vec::new();
        let mut w_labels = Vec::new();
        let in_stage = |e| Error::Stage {
            stage: "student".into(),
            source: Box::new(e),
        };
        for src in &sources {
            v_labels.push(self.load_soft(seed, &src.stage, &self.target.name).map_err(in_stage)?);
            w_labels.push(self.load_soft(seed, &src.stage, &src.weak.name).map_err(in_stage)?);
        }
        let mut parts: Vec<(&Dataset, Option<&SoftLabels>)> = Vec::new();
        for l in &v_labels {
            parts.push((&self.target, Some(l)));
        }
        for (src, l) in sources.iter().zip(&w_labels) {
            parts.push((&src.weak, Some(l)));
        }
        let init = if self.manifest.warm_start_student {
            let teacher = self.single_teacher(seed, "warm-starting the student")?;
            let (ckpt, id) = self.checkpoint(seed, &teacher)?;
            Init::From(InitKind::FromTeacher, Box::new(ckpt), id)
        } else {
            Init::Fresh
        };
        self.run_stage(
            seed,
            StageSpec {
                name: "student".into(),
                kind: StageKind::Student,
                label: LabelKind::Soft,
                init,
                parts,
                epochs: self.manifest.epochs.student,
            },
        )
    }

    /// The stage whose soft labels of V teach the expert.
    pub fn expert_labeler(&self, seed: u64) -> Result<String> {
        match self.manifest.expert_teacher {
            ExpertTeacher::Student => Ok("student".into()),
            ExpertTeacher::Teacher => self.single_teacher(seed, "an expert taught by the teacher"),
        }
    }

    /// Stage 3: initialized from the student, trained on V with soft labels.
    pub fn train_expert(&self, seed: u64) -> Result<StageRecord> {
        self.expert_stage(seed, "expert", &self.expert_labeler(seed)?)
    }

    /// Optional extra round: a new expert from the student, taught by the expert.
    pub fn train_extra_expert(&self, seed: u64) -> Result<StageRecord> {
        self.expert_stage(seed, "expert_round2", "expert")
    }

    fn expert_stage(&self, seed: u64, name: &str, labeler: &str) -> Result<StageRecord> {
        let in_stage = |e| Error::Stage {
            stage: name.into(),
            source: Box::new(e),
        };
        let (ckpt, id) = self.checkpoint(seed, "student").map_err(in_stage)?;
        let labels = self.load_soft(seed, labeler, &self.target.name).map_err(in_stage)?;
        self.run_stage(
            seed,
            StageSpec {
                name: name.into(),
                kind: StageKind::Expert,
                label: LabelKind::Soft,
                init: Init::From(InitKind::FromStudent, Box::new(ckpt), id),
                parts: vec![(&self.target, Some(&labels))],
                epochs: self.manifest.epochs.expert_for(self.task),
            },
        )
    }

    /// Fresh model, hard labels, V only.
    pub fn train_baseline(&self, seed: u64) -> Result<StageRecord> {
        self.run_stage(
            seed,
            StageSpec {
                name: "baseline".into(),
                kind: StageKind::Baseline,
                label: LabelKind::Hard,
                init: Init::Fresh,
                parts: vec![(&self.target, None)],
                epochs: self.manifest.epochs.expert_for(self.task),
            },
        )
    }

    /// The teacher fine-tuned on hard V labels.
    pub fn train_control(&self, seed: u64) -> Result<StageRecord> {
        let teacher = self.single_teacher(seed, "the hard-label control")?;
        let (ckpt, id) = self.checkpoint(seed, &teacher)?;
        self.run_stage(
            seed,
            StageSpec {
                name: "control".into(),
                kind: StageKind::Control,
                label: LabelKind::Hard,
                init: Init::From(InitKind::FromTeacher, Box::new(ckpt), id),
                parts: vec![(&self.target, None)],
                epochs: self.manifest.epochs.expert_for(self.task),
            },
        )
    }

    /// Every configured stage for one seed, in dependency order.
    pub fn run_seed(&self, seed: u64) -> Result<Vec<StageRecord>> {
        let mut out = self.train_teacher(seed)?;
        self.teacher_soft_labels(seed)?;
        out.push(self.train_student(seed)?);
        let labeler = self.expert_labeler(seed)?;
        if labeler == "student" {
            self.soft_labels(seed, "student", &self.target)?;
        }
        out.push(self.train_expert(seed)?);
        if self.manifest.extra_expert_round {
            self.soft_labels(seed, "expert", &self.target)?;
            out.push(self.train_extra_expert(seed)?);
        }
        if self.manifest.baseline {
            out.push(self.train_baseline(seed)?);
        }
        if self.manifest.control {
            out.push(self.train_control(seed)?);
        }
        Ok(out)
    }

    /// Runs every seed and writes `report.json`.
    pub fn run_all(&self) -> Result<RunReport> {
        let mut records = Vec::new();
        for &seed in &self.manifest.seeds {
            records.extend(self.run_seed(seed)?);
        }
        let report = self.report(&records)?;
        jsonl::write_json(&self.root.join("report.json"), &report, MODULE)?;
        Ok(report)
    }

    /// Mean and standard deviation across seeds of each stage's final metrics.
    pub fn report(&self, records: &[StageRecord]) -> Result<RunReport> {
        let mut groups: BTreeMap<(String, String, String), SeedValues> = BTreeMap::new();
        for rec in records {
            for m in rec.metrics.iter().filter(|m| m.epoch == rec.epochs) {
                let g = groups
                    .entry((rec.stage.clone(), m.split.clone(), m.metric.clone()))
                    .or_default();
                g.0.push(rec.seed);
                g.1.push(m.value);
            }
        }
        let mut entries = Vec::with_capacity(groups.len());
        for ((stage, split, metric), (seeds, values)) in groups {
            let (mean, std) = aggregate_seeds(&values)?;
            entries.push(ReportEntry {
                stage,
                split,
                metric,
                seeds,
                values,
                mean,
                std,
            });
        }
        Ok(RunReport {
            manifest_hash: self.hash.clone(),
            entries,
        })
    }

    pub fn target(&self) -> &Dataset {
        &self.target
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn scorer_config(&self) -> &ScorerConfig {
        &self.cfg
    }
}
