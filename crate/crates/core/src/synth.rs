//! Synthetic multiple-choice world for desk-scale experiments.
//!
//! Each question names a category through a topic character; the correct
//! option is a word of that category and the distractors are words of other
//! categories. Contexts are filler text with the correct option injected
//! with some probability, distractor options injected with another, and
//! unrelated words mixed in as noise. Category membership of words is the
//! "knowledge" that only large weak data covers well; spotting the option in
//! the context is the "reading" skill.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::context_forge::{Provenance, WeakMCInstance};
use crate::error::Result;
use crate::jsonl;

/// How a split's contexts and labels are corrupted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    /// Probability that the correct option appears in the context.
    pub p_answer: f64,
    /// Probability that each wrong option appears in the context.
    pub p_distractor: f64,
    /// Unrelated words mixed into the context.
    pub noise_words: usize,
    /// Probability that the stored answer index points at a wrong option.
    pub label_flip: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub categories: usize,
    pub words_per_category: usize,
    pub options: usize,
    pub question_len: usize,
    pub filler_len: usize,
    pub v_train: usize,
    pub v_test: usize,
    pub target: NoiseProfile,
    /// One entry per weak source: (instances, noise).
    pub weak_sources: Vec<(usize, NoiseProfile)>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 20_240_601,
            categories: 24,
            words_per_category: 16,
            options: 4,
            question_len: 8,
            filler_len: 60,
            v_train: 500,
            v_test: 500,
            target: NoiseProfile {
                p_answer: 0.8,
                p_distractor: 0.35,
                noise_words: 2,
                label_flip: 0.0,
            },
            weak_sources: vec![
                (
                    2500,
                    NoiseProfile {
                        p_answer: 0.6,
                        p_distractor: 0.4,
                        noise_words: 3,
                        label_flip: 0.2,
                    },
                ),
                (
                    2500,
                    NoiseProfile {
                        p_answer: 0.5,
                        p_distractor: 0.5,
                        noise_words: 4,
                        label_flip: 0.2,
                    },
                ),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub v_train: Vec<WeakMCInstance>,
    pub v_test: Vec<WeakMCInstance>,
    pub weak: Vec<Vec<WeakMCInstance>>,
}

struct World {
    filler: Vec<char>,
    topics: Vec<[char; 2]>,
    words: Vec<Vec<String>>,
}

impl World {
    fn new(cfg: &SynthConfig) -> Self {
        // Consecutive CJK ideographs; roles are assigned by a seeded shuffle.
        let total = 80 + cfg.categories * 2 + cfg.categories * cfg.words_per_category * 2;
        let mut chars: Vec<char> = (0x4E00u32..).filter_map(char::from_u32).take(total).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        chars.shuffle(&mut rng);
        let mut it = chars.into_iter();
        let filler: Vec<char> = it.by_ref().take(80).collect();
        let topics = (0..cfg.categories)
            .map(|_| [it.next().unwrap(), it.next().unwrap()])
            .collect();
        let words = (0..cfg.categories)
            .map(|_| {
                (0..cfg.words_per_category)
                    .map(|_| it.by_ref().take(2).collect())
                    .collect()
            })
            .collect();
        World { filler, topics, words }
    }

    fn instance(
        &self,
        cfg: &SynthConfig,
        noise: &NoiseProfile,
        id: String,
        provenance: Provenance,
        rng: &mut ChaCha8Rng,
    ) -> WeakMCInstance {
        let n_cat = self.topics.len();
        let cat = rng.gen_range(0..n_cat);
        let topic = self.topics[cat][rng.gen_range(0..2)];

        let mut question: Vec<char> = (0..cfg.question_len.saturating_sub(1))
            .map(|_| *self.filler.choose(rng).unwrap())
            .collect();
        let pos = rng.gen_range(0..=question.len());
        question.insert(pos, topic);

        let correct = self.words[cat].choose(rng).unwrap().clone();
        let mut others: Vec<usize> = (0..n_cat).filter(|&c| c != cat).collect();
        others.shuffle(rng);
        let distractors: Vec<String> = others[..cfg.options - 1]
            .iter()
            .map(|&c| self.words[c].choose(rng).unwrap().clone())
            .collect();

        let mut pieces: Vec<String> = Vec::new();
        if rng.gen_bool(noise.p_answer) {
            pieces.push(correct.clone());
        }
        for d in &distractors {
            if rng.gen_bool(noise.p_distractor) {
                pieces.push(d.clone());
            }
        }
        for _ in 0..noise.noise_words {
            let c = rng.gen_range(0..n_cat);
            if c != cat {
                pieces.push(self.words[c].choose(rng).unwrap().clone());
            }
        }
        let mut context: Vec<char> = (0..cfg.filler_len).map(|_| *self.filler.choose(rng).unwrap()).collect();
        for piece in pieces {
            let at = rng.gen_range(0..=context.len());
            context.splice(at..at, piece.chars());
        }

        let mut options = distractors;
        options.push(correct);
        options.shuffle(rng);
        let truth = options.iter().position(|o| self.words[cat].contains(o)).unwrap();
        let answer_index = if rng.gen_bool(noise.label_flip) {
            let wrong: Vec<usize> = (0..options.len()).filter(|&i| i != truth).collect();
            *wrong.choose(rng).unwrap()
        } else {
            truth
        };

        WeakMCInstance {
            id,
            question: question.into_iter().collect(),
            options,
            answer_index,
            exam_title: None,
            subject: None,
            context: context.into_iter().collect(),
            provenance,
        }
    }
}

/// Generates the corpus; a pure function of the configuration.
pub fn generate(cfg: &SynthConfig) -> SynthCorpus {
    let world = World::new(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x005E_ED0F_DA7A);
    let mut split = |prefix: &str, n: usize, noise: &NoiseProfile, prov: Provenance| -> Vec<WeakMCInstance> {
        (0..n)
            .map(|i| world.instance(cfg, noise, format!("{prefix}-{i:05}"), prov, &mut rng))
            .collect()
    };
    let v_train = split("v", cfg.v_train, &cfg.target, Provenance::Clean);
    let v_test = split("test", cfg.v_test, &cfg.target, Provenance::Clean);
    let weak = cfg
        .weak_sources
        .iter()
        .enumerate()
        .map(|(s, (n, noise))| split(&format!("w{}", s + 1), *n, noise, Provenance::Weak))
        .collect();
    SynthCorpus { v_train, v_test, weak }
}

/// Paths written by [`write_corpus`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthFiles {
    pub v_train: PathBuf,
    pub v_test: PathBuf,
    pub weak: Vec<PathBuf>,
}

pub fn write_corpus(corpus: &SynthCorpus, dir: &Path) -> Result<SynthFiles> {
    let files = SynthFiles {
        v_train: dir.join("v_train.jsonl"),
        v_test: dir.join("v_test.jsonl"),
        weak: (1..=corpus.weak.len())
            .map(|i| dir.join(format!("w{i}.jsonl")))
            .collect(),
    };
    jsonl::write(&files.v_train, &corpus.v_train, "synth")?;
    jsonl::write(&files.v_test, &corpus.v_test, "synth")?;
    for (path, w) in files.weak.iter().zip(&corpus.weak) {
        jsonl::write(path, w, "synth")?;
    }
    Ok(files)
}
