//! Reference compressor: stop-token removal followed by uniform token
//! subsampling down to the target rate.
//!
//! The output is always a token subsequence of the input, never more than
//! `ceil(rate * token_count)` tokens. Live deployments replace this with a
//! remote learned compressor behind the same trait.

use super::{Compressor, ProviderError};

/// Tokens dropped first when the budget is tight.
const STOP_TOKENS: &[&str] = &[
    "a", "an", "the", "and", "or", "but", "of", "to", "in", "on", "at", "is", "are", "was",
    "were", "be", "been", "am", "it", "its", "this", "that", "these", "those", "i", "you", "he",
    "she", "we", "they", "my", "your", "his", "her", "our", "their", "do", "does", "did", "have",
    "has", "had", "will", "would", "can", "could", "so", "for", "with", "as", "by", "from",
];

#[derive(Debug, Clone, Copy, Default)]
pub struct ReferenceCompressor;

impl ReferenceCompressor {
    fn is_stop_token(token: &str) -> bool {
        let trimmed = token.trim_matches(|c: char| c.is_ascii_punctuation());
        if trimmed.is_empty() {
            return false;
        }
        let lower = trimmed.to_lowercase();
        STOP_TOKENS.contains(&lower.as_str())
    }
}

impl Compressor for ReferenceCompressor {
    fn compress(&self, text: &str, rate: f64) -> Result<String, ProviderError> {
        debug_assert!(rate > 0.0 && rate <= 1.0, "compression rate out of (0, 1]");
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if tokens.is_empty() {
            return Ok(String::new());
        }
        let target = (rate * tokens.len() as f64).ceil() as usize;
        if target >= tokens.len() {
            // Identity: rate 1.0 (or any rate whose budget covers everything)
            // must return the text untouched.
            return Ok(text.to_string());
        }

        let (content_idx, stop_idx): (Vec<usize>, Vec<usize>) = (0..tokens.len())
            .partition(|&i| !Self::is_stop_token(tokens[i]));

        let mut keep: Vec<usize> = if content_idx.len() >= target {
            uniform_subsample(&content_idx, target)
        } else {
            let mut keep = content_idx.clone();
            keep.extend(uniform_subsample(&stop_idx, target - content_idx.len()));
            keep
        };
        keep.sort_unstable();

        Ok(keep
            .into_iter()
            .map(|i| tokens[i])
            .collect::<Vec<_>>()
            .join(" "))
    }
}

/// Picks `m` indices spread evenly across `indices`, preserving order.
fn uniform_subsample(indices: &[usize], m: usize) -> Vec<usize> {
    if m == 0 || indices.is_empty() {
        return Vec::new();
    }
    if m >= indices.len() {
        return indices.to_vec();
    }
    (0..m).map(|i| indices[i * indices.len() / m]).collect()
}
