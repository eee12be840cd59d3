//! Group-relative, structure-aligned advantage computation and a pure
//! clipped-surrogate evaluator.
//!
//! Span rewards (R_sel, R_evd) are normalized separately within a sampled
//! group using the population standard deviation plus a 1e-4 stability
//! epsilon. Selection-span tokens carry A_sel, evidence-span tokens A_evd;
//! completions without the evidence key are selection-span only.
//!
//! The surrogate evaluates the token-mean clipped objective
//! `min(r * A, clip(r, 1 - eps_low, 1 + eps_high) * A)` with
//! `r = exp(logprob_new - logprob_old)`. It is an evaluator only: no model,
//! no gradients. Trainers in any ecosystem can unit-test their loss against
//! it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{parse_action, split_spans, SpanSplit, Tokenizer};
use crate::rewards::RewardBreakdown;

/// Stability epsilon added to the group standard deviation.
pub const ADVANTAGE_EPSILON: f64 = 1e-4;

/// Default group size, including the injected anchor.
pub const DEFAULT_GROUP_SIZE: usize = 5;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("invalid anchor: {0}")]
    InvalidAnchor(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
}

/// Per-token log probabilities under the new and old policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogprobs {
    pub new: Vec<f64>,
    pub old: Vec<f64>,
}

/// One member of a sampled completion group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCompletion {
    pub text: String,
    pub token_count: usize,
    pub span_split: SpanSplit,
    pub reward: RewardBreakdown,
    pub is_anchor: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub logprobs: Option<TokenLogprobs>,
}

/// A group of completions for one prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionGroup {
    pub completions: Vec<GroupCompletion>,
}

impl CompletionGroup {
    pub fn new(completions: Vec<GroupCompletion>) -> Self {
        Self { completions }
    }

    pub fn size(&self) -> usize {
        self.completions.len()
    }

    pub fn has_anchor(&self) -> bool {
        self.completions.iter().any(|c| c.is_anchor)
    }

    pub fn selection_rewards(&self) -> Vec<f64> {
        self.completions.iter().map(|c| c.reward.r_sel).collect()
    }

    pub fn evidence_rewards(&self) -> Vec<f64> {
        self.completions.iter().map(|c| c.reward.r_evd).collect()
    }
}

fn normalize_group(rewards: &[f64]) -> Vec<f64> {
    if rewards.is_empty() {
        return Vec::new();
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let variance = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let denom = variance.sqrt() + ADVANTAGE_EPSILON;
    rewards.iter().map(|r| (r - mean) / denom).collect()
}

/// Group-relative normalization of the two span-reward families,
/// independently: `A_i = (R_i - mean) / (pop_std + 1e-4)`.
pub fn group_advantages(r_sel: &[f64], r_evd: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (normalize_group(r_sel), normalize_group(r_evd))
}

/// Appends a pre-verified full-reward anchor completion to a sampled group.
///
/// The anchor text must parse schema-valid; it enters the group carrying
/// (R_sel, R_evd) = (5, 6) and advantages are then computed over the mixed
/// group. A group can hold at most one anchor.
pub fn inject_anchor(
    mut group: CompletionGroup,
    anchor_text: &str,
    tokenizer: &dyn Tokenizer,
) -> Result<CompletionGroup, PolicyError> {
    if group.has_anchor() {
        return Err(PolicyError::InvalidAnchor(
            "group already contains an anchor".to_string(),
        ));
    }
    let parsed = parse_action(anchor_text);
    if !parsed.schema_ok {
        return Err(PolicyError::InvalidAnchor(format!(
            "anchor fails format validation (parse_ok={}, schema_ok={})",
            parsed.parse_ok, parsed.schema_ok
        )));
    }
    let span_split = split_spans(anchor_text, tokenizer);
    group.completions.push(GroupCompletion {
        text: anchor_text.to_string(),
        token_count: span_split.token_count(),
        span_split,
        reward: RewardBreakdown::full_reward(),
        is_anchor: true,
        logprobs: None,
    });
    Ok(group)
}

/// Span advantages for one completion plus the per-token assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionAdvantages {
    pub a_sel: f64,
    pub a_evd: f64,
    pub per_token: Vec<f64>,
    pub is_anchor: bool,
}

/// Per-token advantages for a whole group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenAdvantages {
    pub completions: Vec<CompletionAdvantages>,
}

/// Normalizes the group's span rewards and assigns each token its span's
/// advantage. Every token carries exactly one advantage; completions whose
/// split key was not found carry A_sel throughout.
pub fn assign_token_advantages(group: &CompletionGroup) -> TokenAdvantages {
    let (a_sel, a_evd) = group_advantages(&group.selection_rewards(), &group.evidence_rewards());
    let completions = group
        .completions
        .iter()
        .zip(a_sel.iter().zip(&a_evd))
        .map(|(completion, (&a_sel, &a_evd))| {
            let per_token = (0..completion.token_count)
                .map(|t| {
                    if completion.span_split.is_evidence_token(t) {
                        a_evd
                    } else {
                        a_sel
                    }
                })
                .collect();
            CompletionAdvantages {
                a_sel,
                a_evd,
                per_token,
                is_anchor: completion.is_anchor,
            }
        })
        .collect();
    TokenAdvantages { completions }
}

/// Asymmetric clip range for the surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    pub eps_low: f64,
    pub eps_high: f64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            eps_low: 0.2,
            eps_high: 0.28,
        }
    }
}

/// Aligned per-token inputs for one completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateTokens {
    pub logprob_new: Vec<f64>,
    pub logprob_old: Vec<f64>,
    pub advantages: Vec<f64>,
}

/// Evaluates the clipped surrogate objective over a group of completions,
/// token-sum normalized by the total token count.
pub fn dapo_surrogate(
    completions: &[SurrogateTokens],
    config: &SurrogateConfig,
) -> Result<f64, PolicyError> {
    let mut total_tokens = 0usize;
    let mut sum = 0.0;
    for (i, c) in completions.iter().enumerate() {
        if c.logprob_new.len() != c.logprob_old.len()
            || c.logprob_new.len() != c.advantages.len()
        {
            return Err(PolicyError::LengthMismatch(format!(
                "completion {i}: {} new / {} old logprobs, {} advantages",
                c.logprob_new.len(),
                c.logprob_old.len(),
                c.advantages.len()
            )));
        }
        total_tokens += c.advantages.len();
        for t in 0..c.advantages.len() {
            let ratio = (c.logprob_new[t] - c.logprob_old[t]).exp();
            let clipped = ratio.clamp(1.0 - config.eps_low, 1.0 + config.eps_high);
            let advantage = c.advantages[t];
            sum += (ratio * advantage).min(clipped * advantage);
        }
    }
    if total_tokens == 0 {
        return Ok(0.0);
    }
    Ok(sum / total_tokens as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::CharClassTokenizer;

    fn completion(r_sel: f64, r_evd: f64, tokens: usize, split_at: Option<usize>) -> GroupCompletion {
        let mut reward = RewardBreakdown::full_reward();
        reward.r_sel = r_sel;
        reward.r_evd = r_evd;
        let span_split = match split_at {
            Some(s) => SpanSplit {
                selection_span: 0..s,
                evidence_span: s..tokens,
                split_found: true,
            },
            None => SpanSplit::selection_only(tokens),
        };
        GroupCompletion {
            text: String::new(),
            token_count: tokens,
            span_split,
            reward,
            is_anchor: false,
            logprobs: None,
        }
    }

    #[test]
    fn degenerate_group_has_zero_advantages() {
        let (a_sel, _) = group_advantages(&[3.0, 3.0, 3.0], &[0.0, 0.0, 0.0]);
        assert_eq!(a_sel, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn selection_group_matches_the_frozen_values() {
        // mean 3, population std sqrt(2): (5-3)/(sqrt(2)+1e-4) and the two
        // symmetric negatives.
        let (a_sel, _) = group_advantages(&[5.0, 2.0, 2.0], &[0.0; 3]);
        let expected_pos = 2.0 / (2.0_f64.sqrt() + ADVANTAGE_EPSILON);
        assert!((a_sel[0] - expected_pos).abs() < 1e-12);
        assert!((a_sel[1] + expected_pos / 2.0).abs() < 1e-12);
        assert!((a_sel[0] - 1.41407).abs() < 1e-4);
        assert!((a_sel[1] - (-0.70704)).abs() < 1e-4);
        assert!((a_sel[2] - (-0.70704)).abs() < 1e-4);
    }

    #[test]
    fn evidence_group_matches_the_frozen_values() {
        // mean 3, population std 3: +-3 / 3.0001.
        let (_, a_evd) = group_advantages(&[0.0; 2], &[6.0, 0.0]);
        let expected = 3.0 / (3.0 + ADVANTAGE_EPSILON);
        assert!((a_evd[0] - expected).abs() < 1e-12);
        assert!((a_evd[1] + expected).abs() < 1e-12);
        assert!((a_evd[0] - 0.99997).abs() < 1e-4);
    }

    #[test]
    fn zero_mean_when_std_positive() {
        let (a_sel, a_evd) = group_advantages(&[1.0, 4.0, 2.0, 5.0], &[0.0, 6.0, 2.0, 1.0]);
        assert!(a_sel.iter().sum::<f64>().abs() < 1e-9);
        assert!(a_evd.iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn positive_scaling_preserves_advantage_ranking() {
        let rewards = [1.0, 4.0, 2.0, 5.0, 3.5];
        let scaled: Vec<f64> = rewards.iter().map(|r| r * 7.5).collect();
        let (base, _) = group_advantages(&rewards, &[0.0; 5]);
        let (scaled, _) = group_advantages(&scaled, &[0.0; 5]);
        let rank = |advantages: &[f64]| {
            let mut order: Vec<usize> = (0..advantages.len()).collect();
            order.sort_by(|&a, &b| advantages[a].total_cmp(&advantages[b]));
            order
        };
        assert_eq!(rank(&base), rank(&scaled));
    }

    fn sampled_group(rewards: &[(f64, f64)]) -> CompletionGroup {
        CompletionGroup::new(
            rewards
                .iter()
                .map(|&(s, e)| completion(s, e, 8, Some(5)))
                .collect(),
        )
    }

    const ANCHOR_TEXT: &str = r#"{"useful_msg":[{"msg_id":"D1:1"}],"distilled_info":[{"msg_id":"D1:1","info":"An anchor statement."}]}"#;

    #[test]
    fn anchor_injection_reaches_configured_group_size() {
        let group = sampled_group(&[(3.0, 2.0); 4]);
        let group = inject_anchor(group, ANCHOR_TEXT, &CharClassTokenizer).unwrap();
        assert_eq!(group.size(), DEFAULT_GROUP_SIZE);
        let anchor = group.completions.last().unwrap();
        assert!(anchor.is_anchor);
        assert_eq!(anchor.reward.r_sel, 5.0);
        assert_eq!(anchor.reward.r_evd, 6.0);
    }

    #[test]
    fn anchor_dominates_an_all_zero_group() {
        let group = sampled_group(&[(0.0, 0.0); 4]);
        let group = inject_anchor(group, ANCHOR_TEXT, &CharClassTokenizer).unwrap();
        let advantages = assign_token_advantages(&group);
        let anchor = advantages.completions.last().unwrap();
        assert!(anchor.a_sel > 0.0 && anchor.a_evd > 0.0);
        for sampled in &advantages.completions[..4] {
            assert!(sampled.a_sel < 0.0 && sampled.a_evd < 0.0);
        }
    }

    #[test]
    fn sampled_full_reward_matches_anchor_advantage() {
        let group = sampled_group(&[(5.0, 6.0), (0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]);
        let group = inject_anchor(group, ANCHOR_TEXT, &CharClassTokenizer).unwrap();
        let advantages = assign_token_advantages(&group);
        let perfect_sample = &advantages.completions[0];
        let anchor = advantages.completions.last().unwrap();
        assert!((perfect_sample.a_sel - anchor.a_sel).abs() < 1e-12);
        assert!((perfect_sample.a_evd - anchor.a_evd).abs() < 1e-12);
    }

    #[test]
    fn invalid_anchor_is_rejected() {
        let group = sampled_group(&[(0.0, 0.0); 4]);
        let err = inject_anchor(group, "not an action", &CharClassTokenizer).unwrap_err();
        assert!(matches!(err, PolicyError::InvalidAnchor(_)));
    }

    #[test]
    fn second_anchor_is_rejected() {
        let group = sampled_group(&[(0.0, 0.0); 3]);
        let group = inject_anchor(group, ANCHOR_TEXT, &CharClassTokenizer).unwrap();
        assert!(matches!(
            inject_anchor(group, ANCHOR_TEXT, &CharClassTokenizer),
            Err(PolicyError::InvalidAnchor(_))
        ));
    }

    #[test]
    fn token_assignment_follows_the_split() {
        let group = CompletionGroup::new(vec![
            completion(5.0, 0.0, 10, Some(6)),
            completion(1.0, 4.0, 10, Some(6)),
        ]);
        let advantages = assign_token_advantages(&group);
        let first = &advantages.completions[0];
        assert_eq!(first.per_token.len(), 10);
        for t in 0..6 {
            assert_eq!(first.per_token[t], first.a_sel);
        }
        for t in 6..10 {
            assert_eq!(first.per_token[t], first.a_evd);
        }
    }

    #[test]
    fn missing_split_assigns_selection_everywhere() {
        let group = CompletionGroup::new(vec![
            completion(5.0, 0.0, 4, None),
            completion(1.0, 4.0, 4, Some(2)),
        ]);
        let advantages = assign_token_advantages(&group);
        let first = &advantages.completions[0];
        assert!(first.per_token.iter().all(|&a| a == first.a_sel));
    }

    #[test]
    fn equal_span_advantages_collapse_per_token() {
        let group = CompletionGroup::new(vec![
            completion(2.0, 2.0, 6, Some(3)),
            completion(4.0, 4.0, 6, Some(3)),
        ]);
        let advantages = assign_token_advantages(&group);
        for c in &advantages.completions {
            assert!((c.a_sel - c.a_evd).abs() < 1e-12);
            assert!(c.per_token.iter().all(|&a| (a - c.a_sel).abs() < 1e-12));
        }
    }

    #[test]
    fn identity_ratio_yields_mean_advantage() {
        let completions = vec![
            SurrogateTokens {
                logprob_new: vec![-1.0, -2.0],
                logprob_old: vec![-1.0, -2.0],
                advantages: vec![1.0, 1.0],
            },
            SurrogateTokens {
                logprob_new: vec![-0.5, -0.25],
                logprob_old: vec![-0.5, -0.25],
                advantages: vec![1.0, 1.0],
            },
        ];
        let j = dapo_surrogate(&completions, &SurrogateConfig::default()).unwrap();
        assert!((j - 1.0).abs() < 1e-12);
    }

    #[test]
    fn upper_clip_applies_to_positive_advantage() {
        let completions = vec![SurrogateTokens {
            logprob_new: vec![1.5_f64.ln()],
            logprob_old: vec![0.0],
            advantages: vec![1.0],
        }];
        let j = dapo_surrogate(&completions, &SurrogateConfig::default()).unwrap();
        assert!((j - 1.28).abs() < 1e-12);
    }

    #[test]
    fn lower_clip_applies_to_negative_advantage() {
        let completions = vec![SurrogateTokens {
            logprob_new: vec![0.5_f64.ln()],
            logprob_old: vec![0.0],
            advantages: vec![-1.0],
        }];
        let j = dapo_surrogate(&completions, &SurrogateConfig::default()).unwrap();
        assert!((j - (-0.8)).abs() < 1e-12);
    }

    #[test]
    fn mismatched_lengths_error() {
        let completions = vec![SurrogateTokens {
            logprob_new: vec![0.0, 0.0],
            logprob_old: vec![0.0],
            advantages: vec![1.0, 1.0],
        }];
        assert!(matches!(
            dapo_surrogate(&completions, &SurrogateConfig::default()),
            Err(PolicyError::LengthMismatch(_))
        ));
    }
}
