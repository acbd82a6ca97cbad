//! Label algebra and the three training losses.
//!
//! Hard labels are one-hot vectors; soft labels are the convex blend
//! `s = λ·h + (1-λ)·p` of a hard label with a model's predicted
//! distribution. The multiple-choice losses are plain cross-entropies
//! against the target vector. The span soft loss averages the start and end
//! cross-entropies (factor ½) while the span hard loss sums them; that
//! asymmetry is intentional.

use serde::{Deserialize, Serialize};

use crate::error::InputError;

/// Probabilities are floored at this value inside logarithms.
pub const LOG_FLOOR: f64 = 1e-12;

#[inline]
pub fn clamped_ln(p: f64) -> f64 {
    p.max(LOG_FLOOR).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HardLabelMc(Vec<f64>);

impl HardLabelMc {
    pub fn new(index: usize, num_options: usize) -> Self {
        assert!(index < num_options, "gold index {index} out of {num_options} options");
        Self(one_hot(index, num_options))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn index(&self) -> usize {
        self.0.iter().position(|&v| v == 1.0).expect("one-hot")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftLabelMc {
    pub probs: Vec<f64>,
    pub lambda_used: f64,
    pub teacher_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HardLabelSpan {
    pub start: Vec<f64>,
    pub end: Vec<f64>,
}

impl HardLabelSpan {
    pub fn new(start: usize, end: usize, len: usize) -> Self {
        assert!(start < len && end < len, "span token out of window");
        Self {
            start: one_hot(start, len),
            end: one_hot(end, len),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftLabelSpan {
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub lambda_used: f64,
    pub teacher_id: String,
}

pub fn one_hot(index: usize, len: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    v[index] = 1.0;
    v
}

/// `λ·h + (1-λ)·p` elementwise.
pub fn blend(hard: &[f64], predicted: &[f64], lambda: f64) -> Result<Vec<f64>, InputError> {
    if hard.len() != predicted.len() {
        return Err(InputError::LengthMismatch {
            left: hard.len(),
            right: predicted.len(),
        });
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(InputError::LambdaOutOfRange(lambda));
    }
    Ok(hard
        .iter()
        .zip(predicted)
        .map(|(&h, &p)| lambda * h + (1.0 - lambda) * p)
        .collect())
}

pub fn blend_mc(
    hard: &HardLabelMc,
    predicted: &[f64],
    lambda: f64,
    teacher_id: &str,
) -> Result<SoftLabelMc, InputError> {
    Ok(SoftLabelMc {
        probs: blend(hard.as_slice(), predicted, lambda)?,
        lambda_used: lambda,
        teacher_id: teacher_id.to_string(),
    })
}

pub fn blend_span(
    hard: &HardLabelSpan,
    predicted_start: &[f64],
    predicted_end: &[f64],
    lambda: f64,
    teacher_id: &str,
) -> Result<SoftLabelSpan, InputError> {
    Ok(SoftLabelSpan {
        start: blend(&hard.start, predicted_start, lambda)?,
        end: blend(&hard.end, predicted_end, lambda)?,
        lambda_used: lambda,
        teacher_id: teacher_id.to_string(),
    })
}

/// `-Σ t_k log p_k`, summed left to right.
pub fn cross_entropy(target: &[f64], p: &[f64]) -> f64 {
    debug_assert_eq!(target.len(), p.len());
    let mut acc = 0.0;
    for (&t, &q) in target.iter().zip(p) {
        if t != 0.0 {
            acc -= t * clamped_ln(q);
        }
    }
    acc
}

pub fn entropy(s: &[f64]) -> f64 {
    cross_entropy(s, s)
}

/// L1 for multiple choice.
pub fn loss_hard_mc(hard: &[f64], p: &[f64]) -> f64 {
    cross_entropy(hard, p)
}

/// L2 and L3 for multiple choice.
pub fn loss_soft_mc(soft: &[f64], p: &[f64]) -> f64 {
    cross_entropy(soft, p)
}

/// KL(s || p), the soft loss minus the target entropy.
pub fn kl_divergence(soft: &[f64], p: &[f64]) -> f64 {
    loss_soft_mc(soft, p) - entropy(soft)
}

/// L1 for spans: `-log p_start[a_start] - log p_end[a_end]`.
pub fn loss_hard_span(start_tok: usize, end_tok: usize, p_start: &[f64], p_end: &[f64]) -> f64 {
    -clamped_ln(p_start[start_tok]) - clamped_ln(p_end[end_tok])
}

/// L2 and L3 for spans: mean of the start and end cross-entropies.
pub fn loss_soft_span(s_start: &[f64], s_end: &[f64], p_start: &[f64], p_end: &[f64]) -> f64 {
    0.5 * (cross_entropy(s_start, p_start) + cross_entropy(s_end, p_end))
}

/// Gradient of `scale · cross_entropy(target, softmax(z))` with respect to
/// the logits `z`, accumulated into `out`. Terms whose probability sits
/// below the log floor contribute no gradient, matching the clamp.
pub fn cross_entropy_logit_grad(target: &[f64], p: &[f64], scale: f64, out: &mut [f64]) {
    let mut total = 0.0;
    for (&t, &q) in target.iter().zip(p) {
        if q >= LOG_FLOOR {
            total += t;
        }
    }
    for j in 0..p.len() {
        let w = if p[j] >= LOG_FLOOR { target[j] } else { 0.0 };
        out[j] += scale * (p[j] * total - w);
    }
}

/// Keeps the `k` largest entries (lower index first on ties) and
/// renormalizes them to sum to one.
pub fn top_k_sparse(v: &[f64], k: usize) -> Vec<(usize, f64)> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    idx.truncate(k.max(1));
    idx.sort_unstable();
    let mass: f64 = idx.iter().map(|&i| v[i]).sum();
    idx.into_iter()
        .map(|i| (i, if mass > 0.0 { v[i] / mass } else { 0.0 }))
        .collect()
}

pub fn densify(sparse: &[(usize, f64)], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for &(i, p) in sparse {
        if i < len {
            out[i] = p;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TOL: f64 = 1e-9;

    #[test]
    fn blend_endpoints_and_midpoint() {
        let h = HardLabelMc::new(1, 4);
        let p = [0.1, 0.6, 0.2, 0.1];
        assert_eq!(blend_mc(&h, &p, 1.0, "t").unwrap().probs, h.as_slice());
        assert_eq!(blend_mc(&h, &p, 0.0, "t").unwrap().probs, p);
        let s = blend_mc(&h, &p, 0.5, "t").unwrap().probs;
        for (a, b) in s.iter().zip([0.05, 0.8, 0.1, 0.05]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn blend_rejects_bad_input() {
        let h = HardLabelMc::new(0, 2);
        assert_eq!(
            blend_mc(&h, &[0.5, 0.5, 0.0], 0.5, "t"),
            Err(InputError::LengthMismatch { left: 2, right: 3 })
        );
        assert_eq!(
            blend_mc(&h, &[0.5, 0.5], 1.5, "t"),
            Err(InputError::LambdaOutOfRange(1.5))
        );
    }

    #[test]
    fn blend_span_cases() {
        let h = HardLabelSpan::new(0, 1, 2);
        let s = blend_span(&h, &[0.2, 0.8], &[0.5, 0.5], 0.5, "t").unwrap();
        assert!((s.start[0] - 0.6).abs() < 1e-15 && (s.start[1] - 0.4).abs() < 1e-15);
        let s1 = blend_span(&h, &[0.2, 0.8], &[0.5, 0.5], 1.0, "t").unwrap();
        assert_eq!((s1.start, s1.end), (h.start.clone(), h.end.clone()));
    }

    #[test]
    fn hard_mc_loss_values() {
        assert_eq!(loss_hard_mc(&[1.0, 0.0], &[1.0, 0.0]), 0.0);
        assert!((loss_hard_mc(&one_hot(2, 4), &[0.25; 4]) - 4f64.ln()).abs() < TOL);
        assert!((loss_hard_mc(&[0.0, 1.0], &[0.75, 0.25]) - 1.386294361119891).abs() < TOL);
    }

    #[test]
    fn soft_mc_loss_values() {
        assert!((loss_soft_mc(&[0.2; 5], &[0.2; 5]) - 5f64.ln()).abs() < TOL);
        let p = [0.3, 0.5, 0.2];
        assert_eq!(loss_soft_mc(&one_hot(1, 3), &p), loss_hard_mc(&one_hot(1, 3), &p));
        let expected = -0.5 * (0.9f64.ln() + 0.1f64.ln());
        assert!((loss_soft_mc(&[0.5, 0.5], &[0.9, 0.1]) - expected).abs() < TOL);
        assert!((expected - 1.203972804325936).abs() < 1e-12);
    }

    #[test]
    fn hard_span_loss_values() {
        assert_eq!(loss_hard_span(1, 2, &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]), 0.0);
        let u = [0.1; 10];
        assert!((loss_hard_span(3, 4, &u, &u) - 2.0 * 10f64.ln()).abs() < TOL);
        let v = loss_hard_span(0, 1, &[0.5, 0.5], &[0.75, 0.25]);
        assert!((v - (2f64.ln() + 4f64.ln())).abs() < TOL);
        assert!((v - 2.0794415416798357).abs() < TOL);
    }

    #[test]
    fn soft_span_loss_values() {
        let ps = [0.2, 0.5, 0.3];
        let pe = [0.1, 0.1, 0.8];
        let hard = loss_hard_span(1, 2, &ps, &pe);
        let soft = loss_soft_span(&one_hot(1, 3), &one_hot(2, 3), &ps, &pe);
        assert_eq!(soft, 0.5 * hard);
        let u = [0.25; 4];
        assert!((loss_soft_span(&u, &u, &u, &u) - 4f64.ln()).abs() < TOL);
        let v = loss_soft_span(&[0.6, 0.4], &[1.0, 0.0], &[0.5, 0.5], &[0.8, 0.2]);
        assert!((v - 0.5 * (2f64.ln() - 0.8f64.ln())).abs() < TOL);
        assert!((v - 0.4581453659370776).abs() < TOL);
    }

    #[test]
    fn clamp_keeps_losses_finite() {
        assert!(loss_hard_mc(&[1.0, 0.0], &[0.0, 1.0]).is_finite());
        assert!((loss_hard_mc(&[1.0, 0.0], &[0.0, 1.0]) + LOG_FLOOR.ln()).abs() < TOL);
    }

    #[test]
    fn kl_is_ce_minus_entropy() {
        let s = [0.2, 0.3, 0.5];
        assert!(kl_divergence(&s, &s).abs() < 1e-15);
        assert!(kl_divergence(&s, &[0.3, 0.3, 0.4]) > 0.0);
    }

    #[test]
    fn logit_grad_is_p_minus_target() {
        let mut g = vec![0.0; 3];
        cross_entropy_logit_grad(&[0.0, 1.0, 0.0], &[0.2, 0.5, 0.3], 1.0, &mut g);
        assert_eq!(g, vec![0.2, 0.5 - 1.0, 0.3]);
    }

    #[test]
    fn top_k_renormalizes() {
        let sparse = top_k_sparse(&[0.1, 0.5, 0.1, 0.3], 2);
        assert_eq!(sparse.iter().map(|p| p.0).collect::<Vec<_>>(), [1, 3]);
        let total: f64 = sparse.iter().map(|p| p.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(densify(&sparse, 4)[0], 0.0);
    }

    fn distribution(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.001f64..1.0, len).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
    }

    proptest! {
        #[test]
        fn lambda_one_collapses_soft_to_hard(q in distribution(5), p in distribution(5), gold in 0usize..5) {
            let h = HardLabelMc::new(gold, 5);
            let s = blend_mc(&h, &p, 1.0, "t").unwrap();
            prop_assert_eq!(loss_soft_mc(&s.probs, &q), loss_hard_mc(h.as_slice(), &q));
        }

        #[test]
        fn gibbs_inequality(s in distribution(4), p in distribution(4)) {
            prop_assert!(loss_soft_mc(&s, &p) >= entropy(&s) - 1e-9);
            prop_assert!((loss_soft_mc(&s, &s) - entropy(&s)).abs() <= 1e-9);
        }
    }
}
