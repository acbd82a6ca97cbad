use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    MultipleChoice,
    Extractive,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Task::MultipleChoice => "multiple_choice",
            Task::Extractive => "extractive",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(name: &str, shape: &[usize]) -> Self {
        Self {
            name: name.to_string(),
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }
}

pub const EMBEDDING: usize = 0;

// multiple-choice head
pub const ATTN: usize = 1;
pub const MC_OUT: usize = 2;
pub const MC_QUESTION: usize = 3;
pub const MC_CONTEXT: usize = 4;

// span head
pub const SPAN_START: usize = 1;
pub const SPAN_END: usize = 2;
pub const SPAN_START_QUESTION: usize = 3;
pub const SPAN_END_QUESTION: usize = 4;

/// Names and shapes of every array for a task.
pub fn layout(task: Task, vocab_size: usize, d: usize) -> Vec<(&'static str, Vec<usize>)> {
    match task {
        Task::MultipleChoice => vec![
            ("embedding", vec![vocab_size, d]),
            ("attn", vec![d]),
            ("mc_out", vec![d]),
            ("mc_question", vec![d, d]),
            ("mc_context", vec![d, d]),
        ],
        Task::Extractive => vec![
            ("embedding", vec![vocab_size, d]),
            ("span_start", vec![d]),
            ("span_end", vec![d]),
            ("span_start_question", vec![d, d]),
            ("span_end_question", vec![d, d]),
        ],
    }
}

/// Trainable parameters as flat named arrays. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorerParams {
    pub task: Task,
    pub seed: u64,
    pub tensors: Vec<Tensor>,
}

impl ScorerParams {
    /// Deterministic initialization: every value is a pure function of
    /// (task, vocab size, width, seed).
    pub fn init(task: Task, vocab_size: usize, d_emb: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let emb_scale = (3.0 / d_emb as f64).sqrt();
        let head_scale = 0.1 * emb_scale;
        let tensors = layout(task, vocab_size, d_emb)
            .into_iter()
            .enumerate()
            .map(|(i, (name, shape))| {
                let mut t = Tensor::zeros(name, &shape);
                let scale = if i == EMBEDDING { emb_scale } else { head_scale };
                for v in &mut t.data {
                    *v = rng.gen_range(-scale..scale);
                }
                t
            })
            .collect();
        Self { task, seed, tensors }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            task: self.task,
            seed: self.seed,
            tensors: self.tensors.iter().map(|t| Tensor::zeros(&t.name, &t.shape)).collect(),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.tensors[EMBEDDING].shape[0]
    }

    pub fn d_emb(&self) -> usize {
        self.tensors[EMBEDDING].shape[1]
    }

    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    /// Checks names and shapes against the layout for `task`.
    pub fn check_layout(&self, task: Task) -> Result<()> {
        if self.task != task {
            return Err(Error::Shape(format!(
                "parameters are for {} but {} was requested",
                self.task, task
            )));
        }
        if self.tensors.is_empty() || self.tensors[EMBEDDING].shape.len() != 2 {
            return Err(Error::Shape("missing embedding table".into()));
        }
        let expected = layout(task, self.vocab_size(), self.d_emb());
        if expected.len() != self.tensors.len() {
            return Err(Error::Shape(format!(
                "expected {} arrays, found {}",
                expected.len(),
                self.tensors.len()
            )));
        }
        for ((name, shape), t) in expected.iter().zip(&self.tensors) {
            if *name != t.name || *shape != t.shape || t.data.len() != shape.iter().product::<usize>() {
                return Err(Error::Shape(format!(
                    "array {} has shape {:?}, expected {} {:?}",
                    t.name, t.shape, name, shape
                )));
            }
        }
        Ok(())
    }

    pub fn check_same_shape(&self, other: &ScorerParams) -> Result<()> {
        if self.tensors.len() != other.tensors.len()
            || self.tensors.iter().zip(&other.tensors).any(|(a, b)| a.shape != b.shape)
        {
            return Err(Error::Shape("gradient shapes do not match parameters".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_pure_in_seed() {
        let a = ScorerParams::init(Task::MultipleChoice, 10, 8, 7);
        let b = ScorerParams::init(Task::MultipleChoice, 10, 8, 7);
        let c = ScorerParams::init(Task::MultipleChoice, 10, 8, 8);
        assert_eq!(a, b);
        assert_ne!(a, c);
        a.check_layout(Task::MultipleChoice).unwrap();
        assert!(a.check_layout(Task::Extractive).is_err());
    }

    #[test]
    fn span_layout_shapes() {
        let p = ScorerParams::init(Task::Extractive, 12, 4, 1);
        assert_eq!(p.tensors[SPAN_START_QUESTION].shape, vec![4, 4]);
        assert_eq!(p.num_values(), 12 * 4 + 4 + 4 + 16 + 16);
    }
}
