//! Turns QA instances plus retrieved snippets into weakly-labeled
//! multiple-choice and extractive reading comprehension instances.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qa_corpus::{validate_options, QAInstance};
use crate::retrieval::{search, SearchBackend, Snippet};

const MODULE: &str = "context_forge";

/// Separator placed between surviving snippets. Character offsets of
/// extractive instances depend on it.
pub const SNIPPET_JOINER: &str = " ";
pub const FORGE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Weak,
    Clean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakMCInstance {
    pub id: String,
    pub question: String,
    pub options: Vec<String>,
    pub answer_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exam_title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    pub context: String,
    pub provenance: Provenance,
}

impl WeakMCInstance {
    pub fn validate(&self) -> Result<()> {
        validate_options(MODULE, &self.id, &self.options, self.answer_index)
    }

    pub fn correct_option(&self) -> &str {
        &self.options[self.answer_index]
    }
}

/// Offsets are character (Unicode scalar) positions; `answer_end` is exclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractiveInstance {
    pub id: String,
    pub context: String,
    pub question: String,
    pub answer_text: String,
    pub answer_start: usize,
    pub answer_end: usize,
}

impl ExtractiveInstance {
    pub fn span_text(&self) -> Option<String> {
        if self.answer_start >= self.answer_end {
            return None;
        }
        let n = self.context.chars().count();
        if self.answer_end > n {
            return None;
        }
        Some(
            self.context
                .chars()
                .skip(self.answer_start)
                .take(self.answer_end - self.answer_start)
                .collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        match self.span_text() {
            Some(t) if t == self.answer_text => Ok(()),
            _ => Err(Error::Validation {
                module: MODULE,
                id: self.id.clone(),
                field: "answer_start",
                message: format!(
                    "span [{}, {}) does not select answer_text {:?}",
                    self.answer_start, self.answer_end, self.answer_text
                ),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    NoSnippets,
    AnswerAbsent,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::NoSnippets => "no_snippets",
            DropReason::AnswerAbsent => "answer_absent",
        }
    }
}

/// Number of distinct options occurring as substrings of `text`.
pub fn options_in(text: &str, options: &[String]) -> usize {
    options
        .iter()
        .collect::<HashSet<_>>()
        .into_iter()
        .filter(|o| !o.is_empty() && text.contains(o.as_str()))
        .count()
}

/// Leakage filter: drops every snippet in which more than one distinct
/// option appears.
pub fn filter_snippets(snippets: &[Snippet], options: &[String]) -> Vec<Snippet> {
    snippets
        .iter()
        .filter(|s| options_in(&s.text, options) <= 1)
        .cloned()
        .collect()
}

pub fn build_weak_mc(qa: &QAInstance, snippets: &[Snippet]) -> Result<WeakMCInstance, DropReason> {
    let mut kept = filter_snippets(snippets, &qa.options);
    kept.sort_by_key(|s| s.rank);
    if kept.is_empty() {
        return Err(DropReason::NoSnippets);
    }
    let context = kept
        .iter()
        .map(|s| s.text.as_str())
        .collect::<Vec<_>>()
        .join(SNIPPET_JOINER);
    if context.is_empty() {
        return Err(DropReason::NoSnippets);
    }
    Ok(WeakMCInstance {
        id: qa.id.clone(),
        question: qa.question.clone(),
        options: qa.options.clone(),
        answer_index: qa.answer_index,
        exam_title: qa.exam_title.clone(),
        subject: qa.subject.clone(),
        context,
        provenance: Provenance::Weak,
    })
}

/// Span of the first mention of the correct option in the whole context.
pub fn to_extractive(weak: &WeakMCInstance) -> Result<ExtractiveInstance, DropReason> {
    let answer = weak.correct_option();
    let byte_start = weak.context.find(answer).ok_or(DropReason::AnswerAbsent)?;
    let answer_start = weak.context[..byte_start].chars().count();
    let answer_end = answer_start + answer.chars().count();
    Ok(ExtractiveInstance {
        id: weak.id.clone(),
        context: weak.context.clone(),
        question: weak.question.clone(),
        answer_text: answer.to_string(),
        answer_start,
        answer_end,
    })
}

/// Deletes every occurrence of every wrong option from the context. Passes
/// repeat until no wrong option remains, since a deletion can splice a new
/// occurrence together.
pub fn clean_context(weak: &WeakMCInstance) -> WeakMCInstance {
    let correct = weak.correct_option();
    let wrong: Vec<&str> = weak
        .options
        .iter()
        .enumerate()
        .filter(|(k, o)| *k != weak.answer_index && !o.is_empty() && o.as_str() != correct)
        .map(|(_, o)| o.as_str())
        .collect();
    let mut context = weak.context.clone();
    loop {
        let before = context.len();
        for w in &wrong {
            context = context.replace(w, "");
        }
        if context.len() == before {
            break;
        }
    }
    WeakMCInstance {
        context,
        ..weak.clone()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ForgeOptions {
    pub snippets_per_query: usize,
    pub extractive: bool,
    pub clean_context: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForgeSummary {
    pub format_version: u32,
    pub joiner: String,
    pub backend: String,
    pub input_count: usize,
    pub emitted_weak_mc: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emitted_extractive: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emitted_clean: Option<usize>,
    pub dropped: BTreeMap<String, usize>,
}

#[derive(Debug, Clone)]
pub struct ForgeOutput {
    pub weak_mc: Vec<WeakMCInstance>,
    pub extractive: Option<Vec<ExtractiveInstance>>,
    pub cleaned: Option<Vec<WeakMCInstance>>,
    pub summary: ForgeSummary,
}

/// Runs retrieval, filtering and conversion over a QA dataset. Output order
/// follows input order regardless of the rayon pool size.
pub fn forge(qas: &[QAInstance], backend: &dyn SearchBackend, opts: ForgeOptions) -> Result<ForgeOutput> {
    let k = if opts.snippets_per_query == 0 {
        backend.max_results()
    } else {
        opts.snippets_per_query
    };
    let fetched: Vec<Result<Vec<Snippet>>> = qas
        .par_iter()
        .map(|qa| {
            if qa.question.is_empty() {
                Ok(Vec::new())
            } else {
                search(backend, &qa.question, k)
            }
        })
        .collect();

    let mut dropped: BTreeMap<String, usize> = BTreeMap::new();
    for reason in [DropReason::NoSnippets, DropReason::AnswerAbsent] {
        dropped.insert(reason.as_str().to_string(), 0);
    }
    let mut weak_mc = Vec::new();
    for (qa, snippets) in qas.iter().zip(fetched) {
        match build_weak_mc(qa, &snippets?) {
            Ok(w) => weak_mc.push(w),
            Err(reason) => *dropped.entry(reason.as_str().to_string()).or_default() += 1,
        }
    }

    let extractive = opts.extractive.then(|| {
        let mut out = Vec::new();
        for w in &weak_mc {
            match to_extractive(w) {
                Ok(e) => out.push(e),
                Err(reason) => *dropped.entry(reason.as_str().to_string()).or_default() += 1,
            }
        }
        out
    });
    if !opts.extractive {
        dropped.remove(DropReason::AnswerAbsent.as_str());
    }
    let cleaned = opts
        .clean_context
        .then(|| weak_mc.iter().map(clean_context).collect::<Vec<_>>());

    let summary = ForgeSummary {
        format_version: FORGE_FORMAT_VERSION,
        joiner: SNIPPET_JOINER.to_string(),
        backend: backend.name().to_string(),
        input_count: qas.len(),
        emitted_weak_mc: weak_mc.len(),
        emitted_extractive: extractive.as_ref().map(Vec::len),
        emitted_clean: cleaned.as_ref().map(Vec::len),
        dropped,
    };
    Ok(ForgeOutput {
        weak_mc,
        extractive,
        cleaned,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn snip(text: &str, rank: usize) -> Snippet {
        Snippet {
            text: text.into(),
            rank,
            source_id: format!("s{rank}"),
        }
    }

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn weak(ctx: &str, opts: &[&str], ans: usize) -> WeakMCInstance {
        WeakMCInstance {
            id: "w1".into(),
            question: "q".into(),
            options: strings(opts),
            answer_index: ans,
            exam_title: None,
            subject: None,
            context: ctx.into(),
            provenance: Provenance::Weak,
        }
    }

    #[test]
    fn leakage_filter_discards_multi_option_snippets() {
        let options = strings(&["excess reserve", "interest rate", "currency supply", "base currency"]);
        let s = vec![
            snip("the interest rate and the currency supply", 0),
            snip("Friedman favoured currency supply", 1),
            snip("unrelated", 2),
        ];
        let kept = filter_snippets(&s, &options);
        assert_eq!(kept.iter().map(|s| s.rank).collect::<Vec<_>>(), [1, 2]);
    }

    #[test]
    fn nested_options_both_count() {
        let options = strings(&["6", "6.000000"]);
        assert!(filter_snippets(&[snip("value is 6.000000", 0)], &options).is_empty());
    }

    #[test]
    fn repeated_single_option_is_kept() {
        let options = strings(&["A1", "B2"]);
        assert_eq!(filter_snippets(&[snip("A1 then A1 again", 0)], &options).len(), 1);
    }

    #[test]
    fn weak_mc_joins_survivors_in_rank_order() {
        let qa = QAInstance {
            id: "q".into(),
            question: "?".into(),
            options: strings(&["cat", "dog"]),
            answer_index: 0,
            exam_title: None,
            subject: None,
        };
        let s = vec![snip("a cat", 0), snip("cat and dog", 1), snip("plain", 2)];
        let w = build_weak_mc(&qa, &s).unwrap();
        assert_eq!(w.context, "a cat plain");
        assert_eq!(w.provenance, Provenance::Weak);

        let all_leaky = vec![snip("cat dog", 0)];
        assert_eq!(build_weak_mc(&qa, &all_leaky), Err(DropReason::NoSnippets));
        assert_eq!(build_weak_mc(&qa, &[]), Err(DropReason::NoSnippets));
    }

    #[test]
    fn extractive_first_mention() {
        let e = to_extractive(&weak("abcXYZdefXYZ", &["XYZ", "no"], 0)).unwrap();
        assert_eq!((e.answer_start, e.answer_end), (3, 6));
        let e = to_extractive(&weak("XYZdef", &["XYZ", "no"], 0)).unwrap();
        assert_eq!((e.answer_start, e.answer_end), (0, 3));
        assert_eq!(
            to_extractive(&weak("def", &["XYZ", "no"], 0)),
            Err(DropReason::AnswerAbsent)
        );
    }

    #[test]
    fn extractive_offsets_are_characters() {
        let e = to_extractive(&weak("今天北京很好", &["北京", "上海"], 0)).unwrap();
        assert_eq!((e.answer_start, e.answer_end), (2, 4));
        e.validate().unwrap();
    }

    #[test]
    fn clean_context_deletes_wrong_options() {
        assert_eq!(clean_context(&weak("A or B", &["B", "A"], 0)).context, " or B");
        assert_eq!(clean_context(&weak("nothing", &["B", "A"], 0)).context, "nothing");
        assert_eq!(clean_context(&weak("A", &["B", "A"], 0)).context, "");
    }

    #[test]
    fn clean_context_reaches_fixpoint() {
        // removing "ab" from "aabb" splices another "ab"
        let c = clean_context(&weak("aabb", &["zz", "ab"], 0)).context;
        assert_eq!(c, "");
    }

    proptest! {
        #[test]
        fn filter_is_subsequence_matching_brute_force(
            texts in prop::collection::vec("[abc ]{0,10}", 0..6),
            options in prop::collection::vec("[abc]{1,2}", 2..4),
        ) {
            let snippets: Vec<Snippet> = texts.iter().enumerate().map(|(i, t)| snip(t, i)).collect();
            let kept = filter_snippets(&snippets, &options);
            let mut it = snippets.iter();
            for k in &kept {
                prop_assert!(it.any(|s| s == k));
            }
            for s in &snippets {
                let mut distinct: Vec<&String> = options.iter().filter(|o| s.text.contains(o.as_str())).collect();
                distinct.sort();
                distinct.dedup();
                prop_assert_eq!(kept.contains(s), distinct.len() <= 1);
            }
        }

        #[test]
        fn extractive_span_selects_answer(
            prefix in "[a-d]{0,6}",
            answer in "[a-d]{1,3}",
            suffix in "[a-d]{0,6}",
        ) {
            let ctx = format!("{prefix}{answer}{suffix}");
            let e = to_extractive(&weak(&ctx, &[answer.as_str(), "zz"], 0)).unwrap();
            prop_assert_eq!(e.span_text().unwrap(), answer);
            prop_assert!(e.answer_start <= prefix.chars().count());
        }
    }
}
