//! The shared minibatch training loop.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ScorerConfig;
use crate::error::{Error, Result};
use crate::scorer::{gradients, opt_step, AdamState, Example, ScorerParams};

/// Example order for one epoch. Depends only on the count, the seed and the
/// epoch, so two stages over equally sized data visit it identically.
pub fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mix =
        seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (epoch as u64).wrapping_add(1).wrapping_mul(0xD6E8_FEB8_6659_FD93);
    let mut rng = ChaCha8Rng::seed_from_u64(mix);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// Trains for `epochs` passes with a fresh optimizer state and a learning
/// rate decaying linearly from `cfg.lr` to zero. `on_epoch`
/// receives the 1-based epoch, the parameters after it, and the mean
/// training loss over its batches.
pub fn train<F>(
    mut params: ScorerParams,
    examples: &[Example],
    epochs: usize,
    cfg: &ScorerConfig,
    seed: u64,
    mut on_epoch: F,
) -> Result<ScorerParams>
where
    F: FnMut(usize, &ScorerParams, f64) -> Result<()>,
{
    if examples.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    let mut state = AdamState::new(&params);
    let per_epoch = examples.len().div_ceil(cfg.batch_size);
    let total = (per_epoch * epochs) as f64;
    let mut step = 0usize;
    for epoch in 1..=epochs {
        let order = epoch_order(examples.len(), seed, epoch);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<Example> = chunk.iter().map(|&i| examples[i].clone()).collect();
            let (loss, grads) = gradients(&params, &batch)?;
            // linear decay from the initial rate to zero over the stage
            let lr = cfg.lr * (1.0 - step as f64 / total);
            opt_step(&mut params, &grads, &mut state, lr)?;
            step += 1;
            loss_sum += loss;
            batches += 1;
        }
        on_epoch(epoch, &params, loss_sum / batches as f64)?;
    }
    Ok(params)
}
