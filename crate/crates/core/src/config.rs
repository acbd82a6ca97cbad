//! Run configuration: built-in defaults, then a flat `key = value` file, then
//! command-line overrides. Unknown keys are rejected.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Small, fast settings used by default and by the acceptance runs.
    Desk,
    /// Large-model multiple-choice settings.
    FullMc,
    /// Large-model extractive settings.
    FullExtractive,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "full_mc" => Ok(Preset::FullMc),
            "full_extractive" => Ok(Preset::FullExtractive),
            other => Err(Error::Config(format!(
                "unknown preset {other:?} (expected desk, full_mc or full_extractive)"
            ))),
        }
    }
}

/// Scorer and optimizer hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScorerConfig {
    pub d_emb: usize,
    pub max_len: usize,
    pub lr: f64,
    pub batch_size: usize,
}

impl ScorerConfig {
    pub fn preset(p: Preset) -> Self {
        match p {
            Preset::Desk => ScorerConfig {
                d_emb: 64,
                max_len: 128,
                lr: 0.02,
                batch_size: 16,
            },
            Preset::FullMc => ScorerConfig {
                d_emb: 64,
                max_len: 512,
                lr: 2e-5,
                batch_size: 24,
            },
            Preset::FullExtractive => ScorerConfig {
                d_emb: 64,
                max_len: 512,
                lr: 3e-5,
                batch_size: 32,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_emb == 0 || self.max_len < 2 || self.batch_size == 0 {
            return Err(Error::Config(
                "d_emb and batch_size must be positive and max_len at least 2".into(),
            ));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        Ok(())
    }
}

impl Default for ScorerConfig {
    fn default() -> Self {
        Self::preset(Preset::Desk)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Local,
    Http,
}

impl FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "local" => Ok(BackendKind::Local),
            "http" => Ok(BackendKind::Http),
            other => Err(Error::Config(format!(
                "unknown backend {other:?} (expected local or http)"
            ))),
        }
    }
}

/// Effective configuration of one CLI invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 lets the pool pick.
    pub jobs: usize,
    pub lambda: f64,
    /// Teacher and student epochs.
    pub teacher_epochs: usize,
    pub student_epochs: usize,
    /// Expert (and baseline) epochs; `None` uses the task default.
    pub epochs: Option<usize>,
    pub preset: Preset,
    pub scorer: ScorerConfig,
    pub backend: BackendKind,
    pub corpus: Option<PathBuf>,
    pub cache_dir: PathBuf,
    pub endpoint: Option<String>,
    pub results_per_page: usize,
    pub result_path: String,
    pub text_field: String,
    /// Snippets requested per question.
    pub k: usize,
    pub topk_soft: Option<usize>,
    pub extractive: bool,
    pub clean_context: bool,
    /// Keys set by the config file or flags, as opposed to defaults.
    explicit: BTreeSet<String>,
}

/// Every accepted key.
pub const KEYS: &[&str] = &[
    "seed",
    "jobs",
    "lambda",
    "teacher_epochs",
    "student_epochs",
    "epochs",
    "preset",
    "d_emb",
    "max_len",
    "lr",
    "batch_size",
    "backend",
    "corpus",
    "cache_dir",
    "endpoint",
    "results_per_page",
    "result_path",
    "text_field",
    "k",
    "topk_soft",
    "extractive",
    "clean_context",
];

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            jobs: 0,
            lambda: 0.5,
            teacher_epochs: 1,
            student_epochs: 1,
            epochs: None,
            preset: Preset::Desk,
            scorer: ScorerConfig::default(),
            backend: BackendKind::Local,
            corpus: None,
            cache_dir: PathBuf::from(".selfteach-cache"),
            endpoint: None,
            results_per_page: 10,
            result_path: "/results".into(),
            text_field: "snippet".into(),
            k: 10,
            topk_soft: None,
            extractive: false,
            clean_context: false,
            explicit: BTreeSet::new(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for key {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean {value:?} for key {key}"))),
    }
}

/// Parses a flat `key = value` file. `#` starts a comment line.
pub fn parse_config_text(text: &str, origin: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "{} line {}: expected key = value",
                origin.display(),
                idx + 1
            )));
        };
        let key = k.trim().to_string();
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!(
                "{} line {}: unknown key {key:?}",
                origin.display(),
                idx + 1
            )));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

impl RunConfig {
    /// Merges defaults, the optional file and the flag overrides, in that order.
    pub fn load(file: Option<&Path>, overrides: &[(&str, String)]) -> Result<Self> {
        let mut values = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
                parse_config_text(&text, p)?
            }
            None => BTreeMap::new(),
        };
        for (k, v) in overrides {
            if !KEYS.contains(k) {
                return Err(Error::Config(format!("unknown key {k:?}")));
            }
            values.insert((*k).to_string(), v.clone());
        }
        Self::from_values(&values)
    }

    pub fn from_values(values: &BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = RunConfig::default();
        // The preset sets the scorer block; individual keys then override it.
        if let Some(p) = values.get("preset") {
            cfg.preset = p.parse()?;
            cfg.scorer = ScorerConfig::preset(cfg.preset);
        }
        for (key, value) in values {
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = parse(key, value)?,
            "jobs" => self.jobs = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "teacher_epochs" => self.teacher_epochs = parse(key, value)?,
            "student_epochs" => self.student_epochs = parse(key, value)?,
            "epochs" => self.epochs = Some(parse(key, value)?),
            "preset" => {}
            "d_emb" => self.scorer.d_emb = parse(key, value)?,
            "max_len" => self.scorer.max_len = parse(key, value)?,
            "lr" => self.scorer.lr = parse(key, value)?,
            "batch_size" => self.scorer.batch_size = parse(key, value)?,
            "backend" => self.backend = value.parse()?,
            "corpus" => self.corpus = Some(PathBuf::from(value)),
            "cache_dir" => self.cache_dir = PathBuf::from(value),
            "endpoint" => self.endpoint = Some(value.to_string()),
            "results_per_page" => self.results_per_page = parse(key, value)?,
            "result_path" => self.result_path = value.to_string(),
            "text_field" => self.text_field = value.to_string(),
            "k" => self.k = parse(key, value)?,
            "topk_soft" => self.topk_soft = Some(parse(key, value)?),
            "extractive" => self.extractive = parse_bool(key, value)?,
            "clean_context" => self.clean_context = parse_bool(key, value)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        self.explicit.insert(key.to_string());
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!("lambda {} outside [0, 1]", self.lambda)));
        }
        if self.teacher_epochs == 0 || self.student_epochs == 0 || self.epochs == Some(0) {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.topk_soft == Some(0) {
            return Err(Error::Config("topk_soft must be at least 1".into()));
        }
        self.scorer.validate()
    }

    /// Whether `key` came from the file or a flag rather than the defaults.
    pub fn is_set(&self, key: &str) -> bool {
        self.explicit.contains(key)
    }

    /// The effective configuration in the same `key = value` format it is read from.
    pub fn to_text(&self) -> String {
        let preset = match self.preset {
            Preset::Desk => "desk",
            Preset::FullMc => "full_mc",
            Preset::FullExtractive => "full_extractive",
        };
        let backend = match self.backend {
            BackendKind::Local => "local",
            BackendKind::Http => "http",
        };
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("seed", self.seed.to_string());
        line("jobs", self.jobs.to_string());
        line("lambda", self.lambda.to_string());
        line("teacher_epochs", self.teacher_epochs.to_string());
        line("student_epochs", self.student_epochs.to_string());
        if let Some(e) = self.epochs {
            line("epochs", e.to_string());
        }
        line("preset", preset.into());
        line("d_emb", self.scorer.d_emb.to_string());
        line("max_len", self.scorer.max_len.to_string());
        line("lr", self.scorer.lr.to_string());
        line("batch_size", self.scorer.batch_size.to_string());
        line("backend", backend.into());
        if let Some(c) = &self.corpus {
            line("corpus", c.display().to_string());
        }
        line("cache_dir", self.cache_dir.display().to_string());
        if let Some(e) = &self.endpoint {
            line("endpoint", e.clone());
        }
        line("results_per_page", self.results_per_page.to_string());
        line("result_path", self.result_path.clone());
        line("text_field", self.text_field.clone());
        line("k", self.k.to_string());
        if let Some(t) = self.topk_soft {
            line("topk_soft", t.to_string());
        }
        line("extractive", self.extractive.to_string());
        line("clean_context", self.clean_context.to_string());
        out
    }

    /// Writes the effective configuration as `config.txt` under `dir`.
    pub fn echo_to(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io("cli", dir, e))?;
        let path = dir.join("config.txt");
        std::fs::write(&path, self.to_text()).map_err(|e| Error::io("cli", &path, e))?;
        Ok(path)
    }
}
