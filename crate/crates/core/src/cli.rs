//! Command-line front end. The binary is a thin wrapper around [`main_with_args`].

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{BackendKind, RunConfig};
use crate::context_forge::{forge, ForgeOptions, WeakMCInstance};
use crate::error::{Error, Result};
use crate::jsonl;
use crate::metrics::EvalReport;
use crate::pipeline::{evaluate, Dataset, PipelineManifest, Run};
use crate::qa_corpus::{corpus_stats, estimate_subject_coverage, parse_qa};
use crate::retrieval::{load_corpus, HttpBackend, HttpConfig, LocalBackend, SearchBackend};
use crate::scorer::{Checkpoint, Task};
use crate::synth::{generate, write_corpus, SynthConfig};

#[derive(Debug, Parser)]
#[command(
    name = "selfteach",
    version,
    about = "Weak reading-comprehension data forging and self-teaching training"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Debug, Args)]
pub struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed of every random choice; `run` trains only this seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel sections (0 = all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Weight of the hard label in soft labels, in [0, 1].
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Expert and baseline epochs.
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    /// Maximum tokens per encoded sequence.
    #[arg(long = "max-len", global = true)]
    pub max_len: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Search backend for `forge`.
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendArg>,
    /// Also write contexts with wrong options removed.
    #[arg(long = "clean-context", global = true)]
    pub clean_context: bool,
    /// Also write extractive instances.
    #[arg(long, global = true)]
    pub extractive: bool,
    /// Keep only the k most probable positions of span soft labels.
    #[arg(long = "topk-soft", global = true)]
    pub topk_soft: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BackendArg {
    Local,
    Http,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Retrieve contexts for QA instances and write weak datasets.
    Forge {
        /// QA instances, one JSON object per line.
        qa: PathBuf,
        /// Local document collection (JSONL with `id` and `text`).
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Corpus statistics of a weak multiple-choice dataset.
    Stats { dataset: PathBuf },
    /// Share of exam titles naming a subject from the list.
    Coverage {
        qa: PathBuf,
        /// File with one subject per line.
        #[arg(long)]
        subjects: PathBuf,
    },
    /// Run every stage of a pipeline manifest for every seed.
    Run { manifest: PathBuf },
    /// Run a single stage for one seed; its inputs must already exist.
    Teach {
        manifest: PathBuf,
        #[arg(long, value_enum)]
        stage: StageArg,
    },
    /// Write the soft labels a completed stage assigns to a dataset.
    Softlabels {
        manifest: PathBuf,
        /// Stage whose checkpoint labels the data, e.g. `teacher` or `student`.
        #[arg(long)]
        labeler: String,
        /// Dataset name from the manifest.
        #[arg(long)]
        dataset: String,
    },
    /// Evaluate a checkpoint on a dataset.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        dataset: PathBuf,
    },
    /// Write the synthetic desk-scale corpus and a manifest for it.
    Synth,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StageArg {
    Teacher,
    Student,
    Expert,
    ExpertRound2,
    Baseline,
    Control,
}

fn overrides(c: &Common) -> Vec<(&'static str, String)> {
    let mut o = Vec::new();
    if let Some(v) = c.seed {
        o.push(("seed", v.to_string()));
    }
    if let Some(v) = c.jobs {
        o.push(("jobs", v.to_string()));
    }
    if let Some(v) = c.lambda {
        o.push(("lambda", v.to_string()));
    }
    if let Some(v) = c.epochs {
        o.push(("epochs", v.to_string()));
    }
    if let Some(v) = c.max_len {
        o.push(("max_len", v.to_string()));
    }
    if let Some(b) = c.backend {
        o.push((
            "backend",
            match b {
                BackendArg::Local => "local",
                BackendArg::Http => "http",
            }
            .to_string(),
        ));
    }
    if c.clean_context {
        o.push(("clean_context", "true".into()));
    }
    if c.extractive {
        o.push(("extractive", "true".into()));
    }
    if let Some(v) = c.topk_soft {
        o.push(("topk_soft", v.to_string()));
    }
    o
}

fn print_json<T: Serialize>(value: &T) {
    use std::io::Write;
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    // a closed pipe (e.g. `| head`) is not a failure of the command
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn require_out(c: &Common) -> Result<&Path> {
    c.out
        .as_deref()
        .ok_or_else(|| Error::Config("--out is required for this command".into()))
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let cfg = RunConfig::load(cli.common.config.as_deref(), &overrides(&cli.common))?;
    if cfg.jobs > 0 {
        // Only the first call in a process can size the global pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build_global();
    }
    match cli.command {
        Command::Forge { qa, corpus } => cmd_forge(&cfg, &cli.common, &qa, corpus.as_deref()),
        Command::Stats { dataset } => {
            let rows: Vec<(usize, WeakMCInstance)> = jsonl::read(&dataset, "qa_corpus")?;
            let records: Vec<WeakMCInstance> = rows.into_iter().map(|(_, r)| r).collect();
            print_json(&corpus_stats(&records)?);
            Ok(())
        }
        Command::Coverage { qa, subjects } => {
            let qas = parse_qa(&qa)?;
            let text = std::fs::read_to_string(&subjects).map_err(|e| Error::io("qa_corpus", &subjects, e))?;
            let subjects: Vec<String> = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .collect();
            let titles: Vec<String> = qas.iter().filter_map(|q| q.exam_title.clone()).collect();
            print_json(&estimate_subject_coverage(&titles, &subjects)?);
            Ok(())
        }
        Command::Run { manifest } => {
            let m = load_manifest(&manifest, &cfg, true)?;
            let out = require_out(&cli.common)?;
            let run = Run::open(out, m)?;
            cfg.echo_to(out)?;
            print_json(&run.run_all()?);
            Ok(())
        }
        Command::Teach { manifest, stage } => {
            let m = load_manifest(&manifest, &cfg, false)?;
            let out = require_out(&cli.common)?;
            let run = Run::open(out, m)?;
            cfg.echo_to(out)?;
            let seed = cfg.seed;
            let records = match stage {
                StageArg::Teacher => run.train_teacher(seed)?,
                StageArg::Student => vec![run.train_student(seed)?],
                StageArg::Expert => vec![run.train_expert(seed)?],
                StageArg::ExpertRound2 => vec![run.train_extra_expert(seed)?],
                StageArg::Baseline => vec![run.train_baseline(seed)?],
                StageArg::Control => vec![run.train_control(seed)?],
            };
            print_json(&records);
            Ok(())
        }
        Command::Softlabels {
            manifest,
            labeler,
            dataset,
        } => {
            let m = load_manifest(&manifest, &cfg, false)?;
            let out = require_out(&cli.common)?;
            let run = Run::open(out, m)?;
            let ds = run.dataset(cfg.seed, &dataset)?;
            let file = run.soft_labels(cfg.seed, &labeler, &ds)?;
            print_json(&serde_json::json!({
                "path": file.path,
                "file_id": file.labels.file_id,
                "records": file.labels.by_id.len(),
                "skipped": file.skipped,
            }));
            Ok(())
        }
        Command::Eval { checkpoint, dataset } => {
            let reports = cmd_eval(&checkpoint, &dataset)?;
            if let Some(out) = &cli.common.out {
                jsonl::write_json(&out.join("eval.json"), &reports, "metrics")?;
            }
            print_json(&reports);
            Ok(())
        }
        Command::Synth => {
            let out = require_out(&cli.common)?;
            let synth = SynthConfig::default();
            let files = write_corpus(&generate(&synth), out)?;
            let manifest = synth_manifest(&files, &cfg);
            jsonl::write_json(&out.join("manifest.json"), &manifest, "synth")?;
            print_json(&manifest);
            Ok(())
        }
    }
}

/// The manifest with config overrides applied and dataset paths resolved
/// against the manifest's directory.
fn load_manifest(path: &Path, cfg: &RunConfig, seed_overrides_seeds: bool) -> Result<PipelineManifest> {
    let mut m: PipelineManifest = jsonl::read_json(path, "pipeline")?;
    m.resolve_paths(path.parent().unwrap_or(Path::new(".")));
    if cfg.is_set("lambda") {
        m.lambda = cfg.lambda;
    }
    if cfg.is_set("epochs") {
        m.epochs.expert = cfg.epochs;
    }
    if cfg.is_set("teacher_epochs") {
        m.epochs.teacher = cfg.teacher_epochs;
    }
    if cfg.is_set("student_epochs") {
        m.epochs.student = cfg.student_epochs;
    }
    if cfg.is_set("preset") {
        m.preset = cfg.preset;
    }
    if cfg.is_set("d_emb") {
        m.scorer.d_emb = Some(cfg.scorer.d_emb);
    }
    if cfg.is_set("max_len") {
        m.scorer.max_len = Some(cfg.scorer.max_len);
    }
    if cfg.is_set("lr") {
        m.scorer.lr = Some(cfg.scorer.lr);
    }
    if cfg.is_set("batch_size") {
        m.scorer.batch_size = Some(cfg.scorer.batch_size);
    }
    if cfg.is_set("topk_soft") {
        m.topk_soft = cfg.topk_soft;
    }
    if seed_overrides_seeds && cfg.is_set("seed") {
        m.seeds = vec![cfg.seed];
    }
    m.validate()?;
    Ok(m)
}

fn cmd_forge(cfg: &RunConfig, common: &Common, qa: &Path, corpus: Option<&Path>) -> Result<()> {
    let out = require_out(common)?;
    let qas = parse_qa(qa)?;
    let backend: Box<dyn SearchBackend> = match cfg.backend {
        BackendKind::Local => {
            let path = corpus
                .map(Path::to_path_buf)
                .or_else(|| cfg.corpus.clone())
                .ok_or_else(|| Error::Config("the local backend needs --corpus or a `corpus` config key".into()))?;
            Box::new(LocalBackend::new(load_corpus(&path)?))
        }
        BackendKind::Http => {
            let endpoint = cfg
                .endpoint
                .clone()
                .ok_or_else(|| Error::Config("the http backend needs an `endpoint` config key".into()))?;
            Box::new(HttpBackend::new(
                "http",
                HttpConfig {
                    endpoint,
                    results_per_page: cfg.results_per_page,
                    result_path: cfg.result_path.clone(),
                    text_field: cfg.text_field.clone(),
                },
                &cfg.cache_dir,
            ))
        }
    };
    let output = forge(
        &qas,
        backend.as_ref(),
        ForgeOptions {
            snippets_per_query: cfg.k,
            extractive: cfg.extractive,
            clean_context: cfg.clean_context,
        },
    )?;
    jsonl::write(&out.join("weak_mc.jsonl"), &output.weak_mc, "context_forge")?;
    if let Some(ex) = &output.extractive {
        jsonl::write(&out.join("extractive.jsonl"), ex, "context_forge")?;
    }
    if let Some(clean) = &output.cleaned {
        jsonl::write(&out.join("weak_mc_clean.jsonl"), clean, "context_forge")?;
    }
    jsonl::write_json(&out.join("summary.json"), &output.summary, "context_forge")?;
    cfg.echo_to(out)?;
    print_json(&output.summary);
    Ok(())
}

/// Guesses a dataset's task from its first record.
fn sniff_task(path: &Path) -> Result<Task> {
    let rows: Vec<(usize, serde_json::Value)> = jsonl::read(path, "metrics")?;
    match rows.first() {
        Some((_, v)) if v.get("options").is_some() => Ok(Task::MultipleChoice),
        Some((_, v)) if v.get("answer_start").is_some() => Ok(Task::Extractive),
        Some((line, _)) => Err(Error::Parse {
            module: "metrics",
            path: path.to_path_buf(),
            line: *line,
            message: "record is neither multiple-choice nor extractive".into(),
        }),
        None => Err(Error::Config(format!("dataset {} is empty", path.display()))),
    }
}

pub fn cmd_eval(checkpoint: &Path, dataset: &Path) -> Result<Vec<EvalReport>> {
    let (ckpt, _) = Checkpoint::load(checkpoint)?;
    let task = sniff_task(dataset)?;
    if task != ckpt.task() {
        return Err(Error::Shape(format!(
            "checkpoint {} is {} but dataset {} is {task}",
            checkpoint.display(),
            ckpt.task(),
            dataset.display()
        )));
    }
    let split = dataset
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ds = Dataset::load(&crate::pipeline::DatasetRef {
        name: split.clone(),
        path: dataset.to_path_buf(),
        role: crate::pipeline::DatasetRole::Eval,
        task,
    })?;
    let metrics = evaluate(&ckpt.params, &ckpt.vocab, ckpt.max_len, &ds)?;
    Ok(metrics
        .into_iter()
        .map(|(metric, value)| EvalReport {
            metric,
            value,
            n: ds.len(),
            seed: ckpt.params.seed,
            split: split.clone(),
        })
        .collect())
}

fn synth_manifest(files: &crate::synth::SynthFiles, cfg: &RunConfig) -> PipelineManifest {
    use crate::pipeline::{DatasetRef, DatasetRole};
    let file_name = |p: &Path| PathBuf::from(p.file_name().expect("corpus files have names"));
    let mut datasets = vec![DatasetRef {
        name: "v_train".into(),
        path: file_name(&files.v_train),
        role: DatasetRole::TargetV,
        task: Task::MultipleChoice,
    }];
    for (i, w) in files.weak.iter().enumerate() {
        datasets.push(DatasetRef {
            name: format!("w{}", i + 1),
            path: file_name(w),
            role: DatasetRole::WeakW,
            task: Task::MultipleChoice,
        });
    }
    datasets.push(DatasetRef {
        name: "v_test".into(),
        path: file_name(&files.v_test),
        role: DatasetRole::Eval,
        task: Task::MultipleChoice,
    });
    let mut m = PipelineManifest::new(datasets);
    m.lambda = cfg.lambda;
    m.baseline = true;
    m
}
