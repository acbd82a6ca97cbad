//! Model input layouts.
//!
//! Multiple choice: one sequence per option, `question SEP option SEP context`.
//! Span: a single sequence `question SEP context` with a map from context
//! token positions back to character offsets. Over-long inputs lose the tail
//! of the context first, then the tail of the question, then of the option.

use std::ops::Range;

use super::vocab::{Vocabulary, SEP_ID};
use crate::context_forge::{ExtractiveInstance, WeakMCInstance};

#[derive(Debug, Clone, PartialEq)]
pub struct McSequence {
    pub ids: Vec<u32>,
    pub question: Range<usize>,
    pub option: Range<usize>,
    pub context: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMc {
    pub sequences: Vec<McSequence>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSpan {
    pub ids: Vec<u32>,
    pub question: Range<usize>,
    pub context: Range<usize>,
    /// Character offset in the original context of each context token.
    pub offsets: Vec<usize>,
}

impl EncodedSpan {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Token positions of a character span `[start, end)`, or `None` when
    /// any part of it was truncated away.
    pub fn token_span(&self, start: usize, end: usize) -> Option<(usize, usize)> {
        if start >= end || end > self.offsets.len() {
            return None;
        }
        Some((self.context.start + start, self.context.start + end - 1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EncodedInstance {
    Mc(EncodedMc),
    Span(EncodedSpan),
}

fn fit(
    mut question: Vec<u32>,
    mut option: Vec<u32>,
    mut context: Vec<u32>,
    seps: usize,
    max_len: usize,
) -> (Vec<u32>, Vec<u32>, Vec<u32>) {
    let fixed = question.len() + option.len() + seps;
    if fixed + context.len() > max_len {
        context.truncate(max_len.saturating_sub(fixed));
    }
    if question.len() + option.len() + seps > max_len {
        question.truncate(max_len.saturating_sub(option.len() + seps));
    }
    if question.len() + option.len() + seps > max_len {
        option.truncate(max_len.saturating_sub(question.len() + seps));
    }
    (question, option, context)
}

pub fn encode_mc_parts(
    question: &str,
    options: &[String],
    context: &str,
    vocab: &Vocabulary,
    max_len: usize,
) -> EncodedMc {
    let q = vocab.encode(question);
    let c = vocab.encode(context);
    let sequences = options
        .iter()
        .map(|opt| {
            let (q, o, c) = fit(q.clone(), vocab.encode(opt), c.clone(), 2, max_len);
            let mut ids = Vec::with_capacity(q.len() + o.len() + c.len() + 2);
            ids.extend_from_slice(&q);
            ids.push(SEP_ID);
            let o_start = ids.len();
            ids.extend_from_slice(&o);
            let o_end = ids.len();
            ids.push(SEP_ID);
            let c_start = ids.len();
            ids.extend_from_slice(&c);
            McSequence {
                question: 0..q.len(),
                option: o_start..o_end,
                context: c_start..ids.len(),
                ids,
            }
        })
        .collect();
    EncodedMc { sequences }
}

pub fn encode_mc(instance: &WeakMCInstance, vocab: &Vocabulary, max_len: usize) -> EncodedMc {
    encode_mc_parts(&instance.question, &instance.options, &instance.context, vocab, max_len)
}

pub fn encode_span_parts(question: &str, context: &str, vocab: &Vocabulary, max_len: usize) -> EncodedSpan {
    let (q, _, c) = fit(vocab.encode(question), Vec::new(), vocab.encode(context), 1, max_len);
    let mut ids = Vec::with_capacity(q.len() + c.len() + 1);
    ids.extend_from_slice(&q);
    ids.push(SEP_ID);
    let c_start = ids.len();
    ids.extend_from_slice(&c);
    EncodedSpan {
        question: 0..q.len(),
        context: c_start..ids.len(),
        offsets: (0..c.len()).collect(),
        ids,
    }
}

pub fn encode_span(instance: &ExtractiveInstance, vocab: &Vocabulary, max_len: usize) -> EncodedSpan {
    encode_span_parts(&instance.question, &instance.context, vocab, max_len)
}
