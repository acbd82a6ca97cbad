//! Multiple-choice QA ingestion, deduplication and corpus characterization.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::context_forge::WeakMCInstance;
use crate::error::{Error, InputError, Result};
use crate::jsonl;

const MODULE: &str = "qa_corpus";

/// A multiple-choice question with its options and gold index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAInstance {
    pub id: String,
    pub question: String,
    pub options: Vec<String>,
    pub answer_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exam_title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
}

impl QAInstance {
    pub fn validate(&self) -> Result<()> {
        validate_options(MODULE, &self.id, &self.options, self.answer_index)
    }

    pub fn correct_option(&self) -> &str {
        &self.options[self.answer_index]
    }
}

pub(crate) fn validate_options(module: &'static str, id: &str, options: &[String], answer_index: usize) -> Result<()> {
    let fail = |field, message: String| Error::Validation {
        module,
        id: id.to_string(),
        field,
        message,
    };
    if options.len() < 2 {
        return Err(fail(
            "options",
            format!("need at least 2 options, got {}", options.len()),
        ));
    }
    if let Some(k) = options.iter().position(|o| o.is_empty()) {
        return Err(fail("options", format!("option {k} is empty")));
    }
    if answer_index >= options.len() {
        return Err(fail(
            "answer_index",
            format!(
                "answer_index out of range: {answer_index} with {} options",
                options.len()
            ),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub covered_subjects: BTreeSet<String>,
    pub total_subjects: usize,
    pub fraction_titled: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub avg_num_options: f64,
    pub avg_question_len_chars: f64,
    pub avg_option_len_chars: f64,
    pub avg_context_len_chars: f64,
    pub char_vocab_size: usize,
    pub non_extractive_pct: f64,
}

/// Parses a QA JSONL file, validating every record and id uniqueness.
pub fn parse_qa(path: &Path) -> Result<Vec<QAInstance>> {
    let records: Vec<(usize, QAInstance)> = jsonl::read(path, MODULE)?;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(records.len());
    for (line, qa) in records {
        let located = |e: Error| match e {
            Error::Validation { field, message, .. } => Error::Parse {
                module: MODULE,
                path: path.to_path_buf(),
                line,
                message: format!("{field}: {message}"),
            },
            other => other,
        };
        qa.validate().map_err(located)?;
        if !seen.insert(qa.id.clone()) {
            return Err(Error::Parse {
                module: MODULE,
                path: path.to_path_buf(),
                line,
                message: format!("id: duplicate id {:?}", qa.id),
            });
        }
        out.push(qa);
    }
    Ok(out)
}

/// Canonical composition, trimmed, internal whitespace runs collapsed to one space.
pub fn normalize_text(s: &str) -> String {
    let composed: String = s.nfc().collect();
    composed.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn dedupe_key(qa: &QAInstance) -> String {
    let mut options: Vec<String> = qa.options.iter().map(|o| normalize_text(o)).collect();
    options.sort();
    let mut key = normalize_text(&qa.question);
    for o in options {
        key.push('\u{1f}');
        key.push_str(&o);
    }
    key
}

/// Keeps the first instance for each (question, option set) key; the answer
/// index and option order do not participate in the key.
pub fn dedupe(instances: Vec<QAInstance>) -> Vec<QAInstance> {
    let mut seen = HashSet::new();
    instances.into_iter().filter(|qa| seen.insert(dedupe_key(qa))).collect()
}

fn is_latin_letter(c: char) -> bool {
    c.is_ascii_alphabetic()
        || (('\u{00C0}'..='\u{024F}').contains(&c) && c.is_alphabetic())
        || ('\u{1E00}'..='\u{1EFF}').contains(&c)
}

/// Lowercases Latin letters only; other scripts compare exactly.
fn fold_latin(s: &str) -> String {
    s.chars()
        .flat_map(|c| {
            let folded: Vec<char> = if is_latin_letter(c) {
                c.to_lowercase().collect()
            } else {
                vec![c]
            };
            folded
        })
        .collect()
}

pub fn estimate_subject_coverage(exam_titles: &[String], subjects: &[String]) -> Result<CoverageReport> {
    if subjects.is_empty() {
        return Err(Error::input(MODULE, InputError::Empty("subject list")));
    }
    let distinct: BTreeSet<&String> = subjects.iter().collect();
    let folded_subjects: Vec<(&String, String)> = distinct.iter().map(|s| (*s, fold_latin(s))).collect();
    let folded_titles: Vec<String> = exam_titles.iter().map(|t| fold_latin(t)).collect();

    let mut covered = BTreeSet::new();
    let mut titled = 0usize;
    for title in &folded_titles {
        let mut any = false;
        for (name, folded) in &folded_subjects {
            if !folded.is_empty() && title.contains(folded.as_str()) {
                covered.insert((*name).clone());
                any = true;
            }
        }
        if any {
            titled += 1;
        }
    }
    let fraction_titled = if folded_titles.is_empty() {
        0.0
    } else {
        titled as f64 / folded_titles.len() as f64
    };
    Ok(CoverageReport {
        covered_subjects: covered,
        total_subjects: distinct.len(),
        fraction_titled,
    })
}

/// Corpus statistics with lengths measured in Unicode scalar values.
pub fn corpus_stats(dataset: &[WeakMCInstance]) -> Result<StatsReport> {
    if dataset.is_empty() {
        return Err(Error::input(MODULE, InputError::Empty("dataset")));
    }
    let n = dataset.len() as f64;
    let mut options = 0usize;
    let mut question_chars = 0usize;
    let mut option_chars = 0usize;
    let mut context_chars = 0usize;
    let mut non_extractive = 0usize;
    let mut vocab = HashSet::new();
    for inst in dataset {
        options += inst.options.len();
        question_chars += inst.question.chars().count();
        context_chars += inst.context.chars().count();
        for o in &inst.options {
            option_chars += o.chars().count();
            vocab.extend(o.chars());
        }
        vocab.extend(inst.question.chars());
        vocab.extend(inst.context.chars());
        if !inst.context.contains(inst.options[inst.answer_index].as_str()) {
            non_extractive += 1;
        }
    }
    Ok(StatsReport {
        avg_num_options: options as f64 / n,
        avg_question_len_chars: question_chars as f64 / n,
        avg_option_len_chars: if options == 0 {
            0.0
        } else {
            option_chars as f64 / options as f64
        },
        avg_context_len_chars: context_chars as f64 / n,
        char_vocab_size: vocab.len(),
        non_extractive_pct: 100.0 * non_extractive as f64 / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context_forge::Provenance;
    use proptest::prelude::*;
    use std::io::Write;

    fn qa(id: &str, q: &str, opts: &[&str], ans: usize) -> QAInstance {
        QAInstance {
            id: id.into(),
            question: q.into(),
            options: opts.iter().map(|s| s.to_string()).collect(),
            answer_index: ans,
            exam_title: None,
            subject: None,
        }
    }

    fn weak(q: &str, opts: &[&str], ans: usize, ctx: &str) -> WeakMCInstance {
        WeakMCInstance {
            id: "w".into(),
            question: q.into(),
            options: opts.iter().map(|s| s.to_string()).collect(),
            answer_index: ans,
            context: ctx.into(),
            provenance: Provenance::Weak,
            exam_title: None,
            subject: None,
        }
    }

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_single_record() {
        let f = write_tmp(r#"{"id":"q1","question":"2+2=?","options":["3","4"],"answer_index":1}"#);
        let out = parse_qa(f.path()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].options.len(), 2);
        assert_eq!(out[0].correct_option(), "4");
    }

    #[test]
    fn answer_index_out_of_range_reports_line() {
        let f = write_tmp(concat!(
            r#"{"id":"q1","question":"a","options":["1","2"],"answer_index":0}"#,
            "\n",
            r#"{"id":"q2","question":"b","options":["1","2","3","4"],"answer_index":5}"#,
        ));
        let err = parse_qa(f.path()).unwrap_err().to_string();
        assert!(err.contains("answer_index out of range"), "{err}");
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn malformed_line_reports_line() {
        let f = write_tmp("{\"id\":\"q1\"\n");
        let err = parse_qa(f.path()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn duplicate_id_rejected() {
        let line = r#"{"id":"q1","question":"a","options":["1","2"],"answer_index":0}"#;
        let f = write_tmp(&format!("{line}\n{line}\n"));
        assert!(parse_qa(f.path()).unwrap_err().to_string().contains("duplicate id"));
    }

    #[test]
    fn empty_file_is_empty_list() {
        let f = write_tmp("");
        assert!(parse_qa(f.path()).unwrap().is_empty());
    }

    #[test]
    fn dedupe_trailing_space() {
        let out = dedupe(vec![
            qa("a", "what is x", &["1", "2"], 0),
            qa("b", "what is x  ", &["1", "2"], 0),
        ]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].id, "a");
    }

    #[test]
    fn dedupe_ignores_option_order_and_answer() {
        let out = dedupe(vec![
            qa("a", "q", &["x", "y", "z"], 0),
            qa("b", "q", &["z", "x", "y"], 2),
            qa("c", "q", &["x", "y", "z"], 1),
            qa("d", "q2", &["x", "y", "z"], 1),
        ]);
        let ids: Vec<_> = out.iter().map(|q| q.id.as_str()).collect();
        assert_eq!(ids, ["a", "d"]);
    }

    #[test]
    fn dedupe_uses_canonical_composition() {
        // "é" precomposed vs e + combining acute.
        let out = dedupe(vec![
            qa("a", "caf\u{e9}", &["1", "2"], 0),
            qa("b", "cafe\u{301}", &["1", "2"], 0),
        ]);
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn coverage_substring_rule() {
        let r = estimate_subject_coverage(
            &["2018 sociology mock exam".to_string()],
            &["sociology".to_string(), "ecology".to_string()],
        )
        .unwrap();
        assert_eq!(r.covered_subjects.iter().collect::<Vec<_>>(), ["sociology"]);
        assert_eq!(r.total_subjects, 2);
        assert_eq!(r.fraction_titled, 1.0);
    }

    #[test]
    fn coverage_empty_titles() {
        let r = estimate_subject_coverage(&[], &["x".to_string()]).unwrap();
        assert!(r.covered_subjects.is_empty());
        assert_eq!(r.fraction_titled, 0.0);
    }

    #[test]
    fn coverage_empty_subjects_is_error() {
        assert!(estimate_subject_coverage(&["t".to_string()], &[]).is_err());
    }

    #[test]
    fn coverage_case_folding_latin_only() {
        let r = estimate_subject_coverage(
            &["Sociology Final".to_string(), "高等数学期末".to_string()],
            &["sociology".to_string(), "数学".to_string(), "ECOLOGY".to_string()],
        )
        .unwrap();
        assert_eq!(r.covered_subjects.len(), 2);
        assert_eq!(r.fraction_titled, 1.0);
    }

    #[test]
    fn stats_hand_counted() {
        let s = corpus_stats(&[weak("abc", &["x", "yz"], 0, "xabc")]).unwrap();
        assert_eq!(s.avg_question_len_chars, 3.0);
        assert_eq!(s.avg_option_len_chars, 1.5);
        assert_eq!(s.avg_num_options, 2.0);
        assert_eq!(s.avg_context_len_chars, 4.0);
        assert_eq!(s.non_extractive_pct, 0.0);
        // a b c x y z
        assert_eq!(s.char_vocab_size, 6);

        let s = corpus_stats(&[weak("abc", &["x", "yz"], 1, "xabc")]).unwrap();
        assert_eq!(s.non_extractive_pct, 100.0);
    }

    #[test]
    fn stats_counts_scalar_values() {
        let s = corpus_stats(&[weak("北京是", &["首都", "城市"], 0, "北京是首都")]).unwrap();
        assert_eq!(s.avg_question_len_chars, 3.0);
        assert_eq!(s.avg_context_len_chars, 5.0);
    }

    #[test]
    fn stats_empty_is_error() {
        assert!(corpus_stats(&[]).is_err());
    }

    fn arb_qa() -> impl Strategy<Value = QAInstance> {
        (
            prop::sample::select(vec!["q", "q ", " q", "r", "s t", "s  t"]),
            prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "a "]), 2..4),
            0usize..2,
        )
            .prop_map(|(q, opts, ans)| qa("id", q, &opts, ans))
    }

    proptest! {
        #[test]
        fn dedupe_idempotent_and_order_preserving(items in prop::collection::vec(arb_qa(), 0..20)) {
            let items: Vec<QAInstance> = items
                .into_iter()
                .enumerate()
                .map(|(i, mut q)| { q.id = i.to_string(); q })
                .collect();
            let once = dedupe(items.clone());
            prop_assert!(once.len() <= items.len());
            prop_assert_eq!(dedupe(once.clone()), once.clone());
            let ids: Vec<usize> = once.iter().map(|q| q.id.parse().unwrap()).collect();
            prop_assert!(ids.windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn coverage_monotone_in_titles(
            titles in prop::collection::vec("[a-dA-D ]{0,8}", 0..6),
            extra in "[a-dA-D ]{0,8}",
        ) {
            let subjects: Vec<String> = ["ab", "c", "Dd", "ba"].iter().map(|s| s.to_string()).collect();
            let before = estimate_subject_coverage(&titles, &subjects).unwrap();
            let mut more = titles.clone();
            more.push(extra);
            let after = estimate_subject_coverage(&more, &subjects).unwrap();
            prop_assert!(before.covered_subjects.is_subset(&after.covered_subjects));
            prop_assert!((0.0..=1.0).contains(&after.fraction_titled));
        }
    }
}
