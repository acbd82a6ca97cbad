//! Forward scoring and exact analytic gradients.
//!
//! Multiple-choice head, per option sequence with embeddings `e_i`:
//!
//! ```text
//! q = mean(e_i, i in question)        o = mean(e_i, i in option)
//! z_i = (a + o) · e_i, i in context   α = softmax(z)   c = Σ α_i e_i
//! score = w · c + o · (B q) + o · (D c)
//! ```
//!
//! and the option distribution is the softmax of the scores.
//!
//! Span head, over every token of `question SEP context`:
//!
//! ```text
//! start_i = (w_s + S_s q) · e_i       end_i = (w_e + S_e q) · e_i
//! ```
//!
//! followed by independent softmaxes over positions.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::encode::{EncodedInstance, EncodedMc, EncodedSpan, McSequence};
use super::params::*;
use crate::distill::{cross_entropy, cross_entropy_logit_grad, loss_hard_span, loss_soft_span, one_hot};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct OptionDistribution {
    pub probs: Vec<f64>,
}

impl OptionDistribution {
    /// Index of the most probable option, lowest index on ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.probs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpanDistributions {
    pub start_probs: Vec<f64>,
    pub end_probs: Vec<f64>,
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    if z.is_empty() {
        return Vec::new();
    }
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `M v` for a row-major `d×d` matrix.
fn matvec(m: &[f64], v: &[f64], d: usize) -> Vec<f64> {
    (0..d).map(|r| dot(&m[r * d..(r + 1) * d], v)).collect()
}

/// `Mᵀ v` for a row-major `d×d` matrix.
fn matvec_t(m: &[f64], v: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d];
    for r in 0..d {
        axpy(v[r], &m[r * d..(r + 1) * d], &mut out);
    }
    out
}

/// `M += α · u vᵀ`.
fn outer_acc(m: &mut [f64], alpha: f64, u: &[f64], v: &[f64], d: usize) {
    for r in 0..d {
        axpy(alpha * u[r], v, &mut m[r * d..(r + 1) * d]);
    }
}

fn check_ids(params: &ScorerParams, ids: &[u32]) -> Result<()> {
    let vocab = params.vocab_size();
    if let Some(&bad) = ids.iter().find(|&&id| id as usize >= vocab) {
        return Err(Error::Shape(format!("token id {bad} outside vocabulary of {vocab}")));
    }
    Ok(())
}

fn row(params: &ScorerParams, id: u32) -> &[f64] {
    let d = params.d_emb();
    let start = id as usize * d;
    &params.tensors[EMBEDDING].data[start..start + d]
}

fn mean_rows(params: &ScorerParams, ids: &[u32]) -> Vec<f64> {
    let mut out = vec![0.0; params.d_emb()];
    if ids.is_empty() {
        return out;
    }
    for &id in ids {
        axpy(1.0, row(params, id), &mut out);
    }
    let inv = 1.0 / ids.len() as f64;
    out.iter_mut().for_each(|v| *v *= inv);
    out
}

struct OptionCache {
    q: Vec<f64>,
    o: Vec<f64>,
    u: Vec<f64>,
    alpha: Vec<f64>,
    c: Vec<f64>,
    score: f64,
}

fn option_forward(params: &ScorerParams, seq: &McSequence) -> OptionCache {
    let d = params.d_emb();
    let attn = &params.tensors[ATTN].data;
    let out = &params.tensors[MC_OUT].data;
    let bq = &params.tensors[MC_QUESTION].data;
    let bc = &params.tensors[MC_CONTEXT].data;

    let q = mean_rows(params, &seq.ids[seq.question.clone()]);
    let o = mean_rows(params, &seq.ids[seq.option.clone()]);
    let mut u = attn.clone();
    axpy(1.0, &o, &mut u);

    let ctx = &seq.ids[seq.context.clone()];
    let z: Vec<f64> = ctx.iter().map(|&id| dot(&u, row(params, id))).collect();
    let alpha = softmax(&z);
    let mut c = vec![0.0; d];
    for (&id, &a) in ctx.iter().zip(&alpha) {
        axpy(a, row(params, id), &mut c);
    }
    let score = dot(out, &c) + dot(&o, &matvec(bq, &q, d)) + dot(&o, &matvec(bc, &c, d));
    OptionCache {
        q,
        o,
        u,
        alpha,
        c,
        score,
    }
}

/// Sparse embedding gradient plus dense head gradients for one instance.
struct InstanceGrad {
    rows: BTreeMap<u32, Vec<f64>>,
    heads: Vec<Vec<f64>>,
}

impl InstanceGrad {
    fn new(params: &ScorerParams) -> Self {
        Self {
            rows: BTreeMap::new(),
            heads: params.tensors[1..].iter().map(|t| vec![0.0; t.data.len()]).collect(),
        }
    }

    fn row_mut(&mut self, id: u32, d: usize) -> &mut Vec<f64> {
        self.rows.entry(id).or_insert_with(|| vec![0.0; d])
    }

    fn head(&mut self, tensor: usize) -> &mut Vec<f64> {
        &mut self.heads[tensor - 1]
    }

    fn spread(&mut self, ids: &[u32], grad: &[f64], d: usize) {
        if ids.is_empty() {
            return;
        }
        let inv = 1.0 / ids.len() as f64;
        for &id in ids {
            axpy(inv, grad, self.row_mut(id, d));
        }
    }

    fn add_into(&self, grads: &mut ScorerParams, d: usize) {
        let emb = &mut grads.tensors[EMBEDDING].data;
        for (&id, g) in &self.rows {
            let start = id as usize * d;
            axpy(1.0, g, &mut emb[start..start + d]);
        }
        for (t, g) in grads.tensors[1..].iter_mut().zip(&self.heads) {
            axpy(1.0, g, &mut t.data);
        }
    }
}

fn option_backward(params: &ScorerParams, seq: &McSequence, cache: &OptionCache, g: f64, acc: &mut InstanceGrad) {
    let d = params.d_emb();
    let out = &params.tensors[MC_OUT].data;
    let bq = &params.tensors[MC_QUESTION].data;
    let bc = &params.tensors[MC_CONTEXT].data;

    axpy(g, &cache.c, acc.head(MC_OUT));
    outer_acc(acc.head(MC_QUESTION), g, &cache.o, &cache.q, d);
    outer_acc(acc.head(MC_CONTEXT), g, &cache.o, &cache.c, d);

    let mut dc = matvec_t(bc, &cache.o, d);
    axpy(1.0, out, &mut dc);
    dc.iter_mut().for_each(|v| *v *= g);

    let mut d_o = matvec(bq, &cache.q, d);
    axpy(1.0, &matvec(bc, &cache.c, d), &mut d_o);
    d_o.iter_mut().for_each(|v| *v *= g);

    let mut dq = matvec_t(bq, &cache.o, d);
    dq.iter_mut().for_each(|v| *v *= g);

    // attention pooling
    let ctx = &seq.ids[seq.context.clone()];
    let dc_dot_c = dot(&dc, &cache.c);
    let mut du = vec![0.0; d];
    for (&id, &a) in ctx.iter().zip(&cache.alpha) {
        let e = row(params, id);
        let dz = a * (dot(&dc, e) - dc_dot_c);
        axpy(dz, e, &mut du);
        let r = acc.row_mut(id, d);
        axpy(a, &dc, r);
        axpy(dz, &cache.u, r);
    }
    axpy(1.0, &du, acc.head(ATTN));
    axpy(1.0, &du, &mut d_o);

    acc.spread(&seq.ids[seq.option.clone()], &d_o, d);
    acc.spread(&seq.ids[seq.question.clone()], &dq, d);
}

fn check_mc(params: &ScorerParams, enc: &EncodedMc) -> Result<()> {
    params.check_layout(Task::MultipleChoice)?;
    if enc.sequences.is_empty() {
        return Err(Error::Shape("instance has no options".into()));
    }
    for s in &enc.sequences {
        check_ids(params, &s.ids)?;
    }
    Ok(())
}

pub fn forward_mc(params: &ScorerParams, enc: &EncodedMc) -> Result<OptionDistribution> {
    check_mc(params, enc)?;
    let scores: Vec<f64> = enc.sequences.iter().map(|s| option_forward(params, s).score).collect();
    Ok(OptionDistribution {
        probs: softmax(&scores),
    })
}

/// Pre-softmax option scores.
pub fn mc_scores(params: &ScorerParams, enc: &EncodedMc) -> Result<Vec<f64>> {
    check_mc(params, enc)?;
    Ok(enc.sequences.iter().map(|s| option_forward(params, s).score).collect())
}

struct SpanCache {
    q: Vec<f64>,
    vs: Vec<f64>,
    ve: Vec<f64>,
    p_start: Vec<f64>,
    p_end: Vec<f64>,
}

fn span_forward(params: &ScorerParams, enc: &EncodedSpan) -> SpanCache {
    let d = params.d_emb();
    let q = mean_rows(params, &enc.ids[enc.question.clone()]);
    let mut vs = matvec(&params.tensors[SPAN_START_QUESTION].data, &q, d);
    axpy(1.0, &params.tensors[SPAN_START].data, &mut vs);
    let mut ve = matvec(&params.tensors[SPAN_END_QUESTION].data, &q, d);
    axpy(1.0, &params.tensors[SPAN_END].data, &mut ve);
    let mut start = Vec::with_capacity(enc.ids.len());
    let mut end = Vec::with_capacity(enc.ids.len());
    for &id in &enc.ids {
        let e = row(params, id);
        start.push(dot(&vs, e));
        end.push(dot(&ve, e));
    }
    SpanCache {
        q,
        vs,
        ve,
        p_start: softmax(&start),
        p_end: softmax(&end),
    }
}

fn span_backward(
    params: &ScorerParams,
    enc: &EncodedSpan,
    cache: &SpanCache,
    d_start: &[f64],
    d_end: &[f64],
    acc: &mut InstanceGrad,
) {
    let d = params.d_emb();
    let mut dvs = vec![0.0; d];
    let mut dve = vec![0.0; d];
    for (i, &id) in enc.ids.iter().enumerate() {
        let e = row(params, id);
        axpy(d_start[i], e, &mut dvs);
        axpy(d_end[i], e, &mut dve);
        let r = acc.row_mut(id, d);
        axpy(d_start[i], &cache.vs, r);
        axpy(d_end[i], &cache.ve, r);
    }
    axpy(1.0, &dvs, acc.head(SPAN_START));
    axpy(1.0, &dve, acc.head(SPAN_END));
    outer_acc(acc.head(SPAN_START_QUESTION), 1.0, &dvs, &cache.q, d);
    outer_acc(acc.head(SPAN_END_QUESTION), 1.0, &dve, &cache.q, d);
    let mut dq = matvec_t(&params.tensors[SPAN_START_QUESTION].data, &dvs, d);
    axpy(
        1.0,
        &matvec_t(&params.tensors[SPAN_END_QUESTION].data, &dve, d),
        &mut dq,
    );
    acc.spread(&enc.ids[enc.question.clone()], &dq, d);
}

fn check_span(params: &ScorerParams, enc: &EncodedSpan) -> Result<()> {
    params.check_layout(Task::Extractive)?;
    if enc.ids.is_empty() {
        return Err(Error::Shape("empty span sequence".into()));
    }
    check_ids(params, &enc.ids)
}

pub fn forward_span(params: &ScorerParams, enc: &EncodedSpan) -> Result<SpanDistributions> {
    check_span(params, enc)?;
    let c = span_forward(params, enc);
    Ok(SpanDistributions {
        start_probs: c.p_start,
        end_probs: c.p_end,
    })
}

/// Most probable span `(start_tok, end_tok)` inside the context segment with
/// `start <= end` and at most `max_tokens` tokens.
pub fn best_span(enc: &EncodedSpan, dist: &SpanDistributions, max_tokens: usize) -> Option<(usize, usize)> {
    let mut best: Option<(f64, usize, usize)> = None;
    for s in enc.context.clone() {
        let ls = dist.start_probs[s].max(f64::MIN_POSITIVE).ln();
        for e in s..enc.context.end.min(s + max_tokens) {
            let score = ls + dist.end_probs[e].max(f64::MIN_POSITIVE).ln();
            if best.is_none_or(|(b, _, _)| score > b) {
                best = Some((score, s, e));
            }
        }
    }
    best.map(|(_, s, e)| (s, e))
}

/// Training target for one instance.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    /// Gold option index (L1).
    HardMc(usize),
    /// Target distribution over options (L2/L3).
    SoftMc(Vec<f64>),
    /// Gold start/end token positions (span L1).
    HardSpan { start: usize, end: usize },
    /// Target distributions over token positions (span L2/L3).
    SoftSpan { start: Vec<f64>, end: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub input: EncodedInstance,
    pub target: Target,
}

fn instance_grad(params: &ScorerParams, ex: &Example, scale: f64) -> Result<(f64, InstanceGrad)> {
    let mut acc = InstanceGrad::new(params);
    let loss = match (&ex.input, &ex.target) {
        (EncodedInstance::Mc(enc), target @ (Target::HardMc(_) | Target::SoftMc(_))) => {
            check_mc(params, enc)?;
            let m = enc.sequences.len();
            let owned;
            let t: &[f64] = match target {
                Target::HardMc(k) if *k < m => {
                    owned = one_hot(*k, m);
                    &owned
                }
                Target::SoftMc(s) if s.len() == m => s,
                _ => return Err(Error::Shape(format!("target for {} does not match {m} options", ex.id))),
            };
            let caches: Vec<OptionCache> = enc.sequences.iter().map(|s| option_forward(params, s)).collect();
            let scores: Vec<f64> = caches.iter().map(|c| c.score).collect();
            let p = softmax(&scores);
            let loss = cross_entropy(t, &p);
            let mut dscore = vec![0.0; m];
            cross_entropy_logit_grad(t, &p, scale, &mut dscore);
            for ((seq, cache), g) in enc.sequences.iter().zip(&caches).zip(&dscore) {
                if *g != 0.0 {
                    option_backward(params, seq, cache, *g, &mut acc);
                }
            }
            loss
        }
        (EncodedInstance::Span(enc), target @ (Target::HardSpan { .. } | Target::SoftSpan { .. })) => {
            check_span(params, enc)?;
            let l = enc.len();
            let cache = span_forward(params, enc);
            let mut d_start = vec![0.0; l];
            let mut d_end = vec![0.0; l];
            let loss = match target {
                Target::HardSpan { start, end } if *start < l && *end < l => {
                    cross_entropy_logit_grad(&one_hot(*start, l), &cache.p_start, scale, &mut d_start);
                    cross_entropy_logit_grad(&one_hot(*end, l), &cache.p_end, scale, &mut d_end);
                    loss_hard_span(*start, *end, &cache.p_start, &cache.p_end)
                }
                Target::SoftSpan { start, end } if start.len() == l && end.len() == l => {
                    cross_entropy_logit_grad(start, &cache.p_start, 0.5 * scale, &mut d_start);
                    cross_entropy_logit_grad(end, &cache.p_end, 0.5 * scale, &mut d_end);
                    loss_soft_span(start, end, &cache.p_start, &cache.p_end)
                }
                _ => {
                    return Err(Error::Shape(format!(
                        "span target for {} does not match {l} tokens",
                        ex.id
                    )))
                }
            };
            span_backward(params, enc, &cache, &d_start, &d_end, &mut acc);
            loss
        }
        _ => return Err(Error::Shape(format!("target kind does not match input for {}", ex.id))),
    };
    if !loss.is_finite() {
        return Err(Error::NonFinite { id: ex.id.clone() });
    }
    Ok((loss, acc))
}

/// Mean loss over the batch and its exact gradient. Per-instance work may
/// run on the current rayon pool; the reduction is always in batch order.
pub fn gradients(params: &ScorerParams, batch: &[Example]) -> Result<(f64, ScorerParams)> {
    let mut grads = params.zeros_like();
    if batch.is_empty() {
        return Ok((0.0, grads));
    }
    let scale = 1.0 / batch.len() as f64;
    let parts: Vec<Result<(f64, InstanceGrad)>> = batch.par_iter().map(|ex| instance_grad(params, ex, scale)).collect();
    let d = params.d_emb();
    let mut total = 0.0;
    for part in parts {
        let (loss, g) = part?;
        total += loss;
        g.add_into(&mut grads, d);
    }
    Ok((total * scale, grads))
}

/// Mean batch loss without gradients.
pub fn batch_loss(params: &ScorerParams, batch: &[Example]) -> Result<f64> {
    let mut total = 0.0;
    for ex in batch {
        let loss = match (&ex.input, &ex.target) {
            (EncodedInstance::Mc(enc), Target::HardMc(k)) => {
                let p = forward_mc(params, enc)?;
                cross_entropy(&one_hot(*k, p.probs.len()), &p.probs)
            }
            (EncodedInstance::Mc(enc), Target::SoftMc(s)) => cross_entropy(s, &forward_mc(params, enc)?.probs),
            (EncodedInstance::Span(enc), Target::HardSpan { start, end }) => {
                let p = forward_span(params, enc)?;
                loss_hard_span(*start, *end, &p.start_probs, &p.end_probs)
            }
            (EncodedInstance::Span(enc), Target::SoftSpan { start, end }) => {
                let p = forward_span(params, enc)?;
                loss_soft_span(start, end, &p.start_probs, &p.end_probs)
            }
            _ => return Err(Error::Shape(format!("target kind does not match input for {}", ex.id))),
        };
        if !loss.is_finite() {
            return Err(Error::NonFinite { id: ex.id.clone() });
        }
        total += loss;
    }
    Ok(if batch.is_empty() {
        0.0
    } else {
        total / batch.len() as f64
    })
}
