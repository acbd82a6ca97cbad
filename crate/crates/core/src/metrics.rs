//! Accuracy for multiple choice; exact match and character-level F1 for
//! extractive answers; mean/stddev aggregation across seeds.

use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, InputError, Result};

const MODULE: &str = "metrics";

/// Version of the answer normalization used by EM and F1.
pub const NORMALIZATION_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metric: String,
    pub value: f64,
    pub n: usize,
    pub seed: u64,
    pub split: String,
}

pub fn accuracy(predictions: &[usize], gold: &[usize]) -> Result<f64> {
    if predictions.len() != gold.len() {
        return Err(Error::input(
            MODULE,
            InputError::LengthMismatch {
                left: predictions.len(),
                right: gold.len(),
            },
        ));
    }
    if gold.is_empty() {
        return Err(Error::input(MODULE, InputError::Empty("predictions")));
    }
    let correct = predictions.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(100.0 * correct as f64 / gold.len() as f64)
}

fn strip_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[\p{P}\s]").expect("valid pattern"))
}

/// Removes all whitespace and Unicode punctuation.
pub fn normalize_answer(s: &str) -> String {
    strip_pattern().replace_all(s, "").into_owned()
}

pub fn exact_match(pred: &str, gold: &str) -> u8 {
    u8::from(normalize_answer(pred) == normalize_answer(gold))
}

/// F1 over the multiset of characters of the normalized strings.
pub fn char_f1(pred: &str, gold: &str) -> f64 {
    let p: Vec<char> = normalize_answer(pred).chars().collect();
    let g: Vec<char> = normalize_answer(gold).chars().collect();
    match (p.is_empty(), g.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let mut counts: HashMap<char, usize> = HashMap::new();
    for c in &g {
        *counts.entry(*c).or_default() += 1;
    }
    let mut overlap = 0usize;
    for c in &p {
        if let Some(n) = counts.get_mut(c) {
            if *n > 0 {
                *n -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / p.len() as f64;
    let recall = overlap as f64 / g.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Arithmetic mean and population standard deviation.
pub fn aggregate_seeds(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::input(MODULE, InputError::Empty("values")));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

/// Rounds to one decimal for table-style reporting.
pub fn round1(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}
