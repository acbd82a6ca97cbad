//! Datasets, soft-label files, training examples and evaluation.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{DatasetRef, DatasetRole};
use crate::context_forge::{ExtractiveInstance, Provenance, WeakMCInstance};
use crate::distill::{blend_mc, blend_span, densify, top_k_sparse, HardLabelMc, HardLabelSpan};
use crate::error::{Error, Result};
use crate::jsonl;
use crate::metrics::{accuracy, char_f1, exact_match};
use crate::scorer::checkpoint::digest;
use crate::scorer::{
    best_span, encode_mc, encode_span, forward_mc, forward_span, Checkpoint, EncodedInstance, EncodedSpan, Example,
    ScorerParams, Target, Task, Vocabulary,
};

const MODULE: &str = "pipeline";

/// Longest predicted answer, in tokens, considered during span decoding.
pub const MAX_ANSWER_TOKENS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub enum Records {
    Mc(Vec<WeakMCInstance>),
    Span(Vec<ExtractiveInstance>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub records: Records,
}

impl Dataset {
    pub fn mc(name: impl Into<String>, records: Vec<WeakMCInstance>) -> Self {
        Self {
            name: name.into(),
            records: Records::Mc(records),
        }
    }

    pub fn span(name: impl Into<String>, records: Vec<ExtractiveInstance>) -> Self {
        Self {
            name: name.into(),
            records: Records::Span(records),
        }
    }

    /// Loads and validates a dataset. Target data must be clean.
    pub fn load(r: &DatasetRef) -> Result<Self> {
        let ds = match r.task {
            Task::MultipleChoice => {
                let rows: Vec<(usize, WeakMCInstance)> = jsonl::read(&r.path, MODULE)?;
                for (_, inst) in &rows {
                    inst.validate()?;
                    if r.role == DatasetRole::TargetV && inst.provenance != Provenance::Clean {
                        return Err(Error::Validation {
                            module: MODULE,
                            id: inst.id.clone(),
                            field: "provenance",
                            message: format!("target dataset {} must contain clean instances", r.name),
                        });
                    }
                }
                Dataset::mc(&r.name, rows.into_iter().map(|(_, i)| i).collect())
            }
            Task::Extractive => {
                let rows: Vec<(usize, ExtractiveInstance)> = jsonl::read(&r.path, MODULE)?;
                for (_, inst) in &rows {
                    inst.validate()?;
                }
                Dataset::span(&r.name, rows.into_iter().map(|(_, i)| i).collect())
            }
        };
        ds.check_unique_ids()?;
        Ok(ds)
    }

    pub fn task(&self) -> Task {
        match self.records {
            Records::Mc(_) => Task::MultipleChoice,
            Records::Span(_) => Task::Extractive,
        }
    }

    pub fn len(&self) -> usize {
        match &self.records {
            Records::Mc(r) => r.len(),
            Records::Span(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn id(&self, i: usize) -> &str {
        match &self.records {
            Records::Mc(r) => &r[i].id,
            Records::Span(r) => &r[i].id,
        }
    }

    pub fn check_unique_ids(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for i in 0..self.len() {
            if !seen.insert(self.id(i)) {
                return Err(Error::Validation {
                    module: MODULE,
                    id: self.id(i).to_string(),
                    field: "id",
                    message: format!("duplicate id in dataset {}", self.name),
                });
            }
        }
        Ok(())
    }

    /// All text the vocabulary should cover, in record order.
    pub fn texts(&self) -> Vec<&str> {
        let mut out = Vec::new();
        match &self.records {
            Records::Mc(r) => {
                for i in r {
                    out.push(i.question.as_str());
                    out.extend(i.options.iter().map(String::as_str));
                    out.push(i.context.as_str());
                }
            }
            Records::Span(r) => {
                for i in r {
                    out.push(i.question.as_str());
                    out.push(i.context.as_str());
                }
            }
        }
        out
    }

    pub fn subset(&self, name: impl Into<String>, indices: &[usize]) -> Self {
        let records = match &self.records {
            Records::Mc(r) => Records::Mc(indices.iter().map(|&i| r[i].clone()).collect()),
            Records::Span(r) => Records::Span(indices.iter().map(|&i| r[i].clone()).collect()),
        };
        Self {
            name: name.into(),
            records,
        }
    }

    /// Records of `parts` in order under one name.
    pub fn concat(name: impl Into<String>, parts: &[&Dataset]) -> Result<Self> {
        let name = name.into();
        let records = match parts.first().map(|d| d.task()) {
            Some(Task::Extractive) => Records::Span(
                parts
                    .iter()
                    .flat_map(|d| match &d.records {
                        Records::Span(r) => r.clone(),
                        Records::Mc(_) => Vec::new(),
                    })
                    .collect(),
            ),
            _ => Records::Mc(
                parts
                    .iter()
                    .flat_map(|d| match &d.records {
                        Records::Mc(r) => r.clone(),
                        Records::Span(_) => Vec::new(),
                    })
                    .collect(),
            ),
        };
        let ds = Self { name, records };
        if parts.iter().any(|p| p.task() != ds.task()) {
            return Err(Error::Config(format!("dataset {} mixes task types", ds.name)));
        }
        ds.check_unique_ids()?;
        Ok(ds)
    }
}

/// Soft span vector, dense or as renormalized `(position, probability)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpanVector {
    Dense(Vec<f64>),
    Sparse(Vec<(usize, f64)>),
}

impl SpanVector {
    pub fn to_dense(&self, len: usize) -> Vec<f64> {
        match self {
            SpanVector::Dense(v) => v.clone(),
            SpanVector::Sparse(s) => densify(s, len),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanSoft {
    /// Token count of the encoded sequence the positions refer to.
    pub len: usize,
    pub start: SpanVector,
    pub end: SpanVector,
}

/// One line of a soft-label file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftRecord {
    pub id: String,
    pub teacher_id: String,
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<SpanSoft>,
}

/// Soft labels keyed by instance id, plus the content id of their file.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftLabels {
    pub file_id: String,
    pub by_id: HashMap<String, SoftRecord>,
}

impl SoftLabels {
    pub fn from_records(records: Vec<SoftRecord>, file_id: String) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(records.len());
        for r in records {
            if by_id.contains_key(&r.id) {
                return Err(Error::Validation {
                    module: MODULE,
                    id: r.id,
                    field: "id",
                    message: "soft-label id collision".into(),
                });
            }
            by_id.insert(r.id.clone(), r);
        }
        Ok(Self { file_id, by_id })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(MODULE, path, e))?;
        let rows: Vec<(usize, SoftRecord)> = jsonl::read(path, MODULE)?;
        Self::from_records(rows.into_iter().map(|(_, r)| r).collect(), digest(&bytes))
    }
}

/// Writes soft-label records and returns the file's content id.
pub fn write_soft_labels(path: &Path, records: &[SoftRecord]) -> Result<String> {
    jsonl::write(path, records, MODULE)?;
    let bytes = std::fs::read(path).map_err(|e| Error::io(MODULE, path, e))?;
    Ok(digest(&bytes))
}

fn span_window(enc: &EncodedSpan, inst: &ExtractiveInstance) -> Option<(usize, usize)> {
    enc.token_span(inst.answer_start, inst.answer_end)
}

/// Labels every instance of `dataset` with `λ·hard + (1-λ)·p` from the
/// checkpoint. Extractive instances whose answer falls outside the encoded
/// window have no hard label and are skipped; their ids are returned.
pub fn gen_soft_labels(
    ckpt: &Checkpoint,
    teacher_id: &str,
    dataset: &Dataset,
    lambda: f64,
    topk: Option<usize>,
) -> Result<(Vec<SoftRecord>, Vec<String>)> {
    if ckpt.task() != dataset.task() {
        return Err(Error::Shape(format!(
            "checkpoint is {} but dataset {} is {}",
            ckpt.task(),
            dataset.name,
            dataset.task()
        )));
    }
    dataset.check_unique_ids()?;
    let params = &ckpt.params;
    let rows: Vec<Result<Option<SoftRecord>>> = match &dataset.records {
        Records::Mc(recs) => recs
            .par_iter()
            .map(|inst| {
                let enc = encode_mc(inst, &ckpt.vocab, ckpt.max_len);
                let p = forward_mc(params, &enc)?;
                let hard = HardLabelMc::new(inst.answer_index, inst.options.len());
                let soft = blend_mc(&hard, &p.probs, lambda, teacher_id).map_err(|e| Error::input(MODULE, e))?;
                Ok(Some(SoftRecord {
                    id: inst.id.clone(),
                    teacher_id: soft.teacher_id,
                    lambda,
                    probs: Some(soft.probs),
                    span: None,
                }))
            })
            .collect(),
        Records::Span(recs) => recs
            .par_iter()
            .map(|inst| {
                let enc = encode_span(inst, &ckpt.vocab, ckpt.max_len);
                let Some((s, e)) = span_window(&enc, inst) else {
                    return Ok(None);
                };
                let d = forward_span(params, &enc)?;
                let hard = HardLabelSpan::new(s, e, enc.len());
                let soft = blend_span(&hard, &d.start_probs, &d.end_probs, lambda, teacher_id)
                    .map_err(|e| Error::input(MODULE, e))?;
                let pack = |v: Vec<f64>| match topk {
                    Some(k) => SpanVector::Sparse(top_k_sparse(&v, k)),
                    None => SpanVector::Dense(v),
                };
                Ok(Some(SoftRecord {
                    id: inst.id.clone(),
                    teacher_id: soft.teacher_id,
                    lambda,
                    probs: None,
                    span: Some(SpanSoft {
                        len: enc.len(),
                        start: pack(soft.start),
                        end: pack(soft.end),
                    }),
                }))
            })
            .collect(),
    };
    let mut records = Vec::with_capacity(rows.len());
    let mut skipped = Vec::new();
    for (i, row) in rows.into_iter().enumerate() {
        match row? {
            Some(r) => records.push(r),
            None => skipped.push(dataset.id(i).to_string()),
        }
    }
    Ok((records, skipped))
}

/// Builds training examples from gold labels (`soft = None`) or from a
/// soft-label file. Returns the examples and the number of extractive
/// instances skipped because their answer was truncated away.
pub fn build_examples(
    dataset: &Dataset,
    soft: Option<&SoftLabels>,
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<(Vec<Example>, usize)> {
    let lookup = |id: &str| -> Result<&SoftRecord> {
        soft.and_then(|s| s.by_id.get(id)).ok_or_else(|| Error::Validation {
            module: MODULE,
            id: id.to_string(),
            field: "soft_label",
            message: format!("no soft-label record for this instance of {}", dataset.name),
        })
    };
    let mut out = Vec::with_capacity(dataset.len());
    let mut skipped = 0;
    match &dataset.records {
        Records::Mc(recs) => {
            for inst in recs {
                let enc = encode_mc(inst, vocab, max_len);
                let target = match soft {
                    None => Target::HardMc(inst.answer_index),
                    Some(_) => {
                        let rec = lookup(&inst.id)?;
                        match &rec.probs {
                            Some(p) if p.len() == inst.options.len() => Target::SoftMc(p.clone()),
                            _ => {
                                return Err(Error::Validation {
                                    module: MODULE,
                                    id: inst.id.clone(),
                                    field: "probs",
                                    message: format!("expected {} option probabilities", inst.options.len()),
                                })
                            }
                        }
                    }
                };
                out.push(Example {
                    id: inst.id.clone(),
                    input: EncodedInstance::Mc(enc),
                    target,
                });
            }
        }
        Records::Span(recs) => {
            for inst in recs {
                let enc = encode_span(inst, vocab, max_len);
                let Some((s, e)) = span_window(&enc, inst) else {
                    skipped += 1;
                    continue;
                };
                let target = match soft {
                    None => Target::HardSpan { start: s, end: e },
                    Some(_) => {
                        let rec = lookup(&inst.id)?;
                        match &rec.span {
                            Some(sp) if sp.len == enc.len() => Target::SoftSpan {
                                start: sp.start.to_dense(sp.len),
                                end: sp.end.to_dense(sp.len),
                            },
                            _ => {
                                return Err(Error::Validation {
                                    module: MODULE,
                                    id: inst.id.clone(),
                                    field: "span",
                                    message: format!("expected span vectors over {} tokens", enc.len()),
                                })
                            }
                        }
                    }
                };
                out.push(Example {
                    id: inst.id.clone(),
                    input: EncodedInstance::Span(enc),
                    target,
                });
            }
        }
    }
    Ok((out, skipped))
}

/// Metric name and percentage for each metric of the dataset's task:
/// accuracy for multiple choice, `em` and `f1` for extractive.
pub fn evaluate(
    params: &ScorerParams,
    vocab: &Vocabulary,
    max_len: usize,
    dataset: &Dataset,
) -> Result<Vec<(String, f64)>> {
    if dataset.is_empty() {
        return Err(Error::Config(format!("evaluation dataset {} is empty", dataset.name)));
    }
    match &dataset.records {
        Records::Mc(recs) => {
            let preds: Vec<Result<usize>> = recs
                .par_iter()
                .map(|inst| Ok(forward_mc(params, &encode_mc(inst, vocab, max_len))?.argmax()))
                .collect();
            let preds = preds.into_iter().collect::<Result<Vec<_>>>()?;
            let gold: Vec<usize> = recs.iter().map(|i| i.answer_index).collect();
            Ok(vec![("accuracy".into(), accuracy(&preds, &gold)?)])
        }
        Records::Span(recs) => {
            let scores: Vec<Result<(f64, f64)>> = recs
                .par_iter()
                .map(|inst| {
                    let enc = encode_span(inst, vocab, max_len);
                    let d = forward_span(params, &enc)?;
                    let pred: String = match best_span(&enc, &d, MAX_ANSWER_TOKENS) {
                        Some((s, e)) => {
                            let from = enc.offsets[s - enc.context.start];
                            let to = enc.offsets[e - enc.context.start] + 1;
                            inst.context.chars().skip(from).take(to - from).collect()
                        }
                        None => String::new(),
                    };
                    Ok((
                        f64::from(exact_match(&pred, &inst.answer_text)),
                        char_f1(&pred, &inst.answer_text),
                    ))
                })
                .collect();
            let mut em = 0.0;
            let mut f1 = 0.0;
            for s in scores {
                let (e, f) = s?;
                em += e;
                f1 += f;
            }
            let n = recs.len() as f64;
            Ok(vec![("em".into(), 100.0 * em / n), ("f1".into(), 100.0 * f1 / n)])
        }
    }
}
