use serde::{Deserialize, Serialize};

use super::metrics::{Confusion, EvaluationReport, SeedMetrics};
use super::threshold::{move_threshold, ThresholdChoice};
use crate::anchor::{cosine, AnchorEmbedding, ZERO_NORM_FILL};
use crate::corpus::{Label, PostEmbedding, UserTimeline};
use crate::error::{Error, Result};

pub const DEFAULT_CHUNK_SIZE: usize = 35;

/// Maps a chunk of consecutive posts to a condition probability.
pub trait ChunkScorer: Sync {
    fn score(&self, posts: &[PostEmbedding]) -> Result<f64>;
}

/// `(mean cosine to the anchor + 1) / 2`; zero-norm posts count as cosine 0.
pub struct MeanCosineScorer<'a> {
    pub anchor: &'a AnchorEmbedding,
}

impl ChunkScorer for MeanCosineScorer<'_> {
    fn score(&self, posts: &[PostEmbedding]) -> Result<f64> {
        if posts.is_empty() {
            return Err(Error::Empty("chunk".into()));
        }
        let mut sum = 0.0;
        for p in posts {
            sum += match cosine(&p.vector, &self.anchor.vector) {
                Ok(c) => c,
                Err(Error::ZeroNorm) if p.vector.iter().any(|&v| v != 0.0) => return Err(Error::ZeroNorm),
                Err(Error::ZeroNorm) => ZERO_NORM_FILL,
                Err(e) => return Err(e),
            };
        }
        Ok((sum / posts.len() as f64 + 1.0) / 2.0)
    }
}

/// Outcome when exactly half the chunks vote condition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieRule {
    #[default]
    Control,
    Condition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineConfig {
    /// Posts per chunk; the last chunk of a user may be shorter.
    pub chunk_size: usize,
    #[serde(default)]
    pub tie: TieRule,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            chunk_size: DEFAULT_CHUNK_SIZE,
            tie: TieRule::Control,
        }
    }
}

pub fn chunk_scores(timeline: &UserTimeline, chunk_size: usize, scorer: &dyn ChunkScorer) -> Result<Vec<f64>> {
    if chunk_size == 0 {
        return Err(Error::InvalidConfig("chunk size must be at least 1".into()));
    }
    if timeline.posts.is_empty() {
        return Err(Error::EmptyUser(timeline.user_id.clone()));
    }
    timeline.posts.chunks(chunk_size).map(|c| scorer.score(c)).collect()
}

pub fn majority_vote(votes: &[bool], tie: TieRule) -> Label {
    let yes = votes.iter().filter(|&&v| v).count();
    let no = votes.len() - yes;
    match yes.cmp(&no) {
        std::cmp::Ordering::Greater => Label::Condition,
        std::cmp::Ordering::Less => Label::Control,
        std::cmp::Ordering::Equal => match tie {
            TieRule::Control => Label::Control,
            TieRule::Condition => Label::Condition,
        },
    }
}

/// Chunk-level threshold: every chunk inherits its user's label and the
/// threshold is moved over all chunk scores.
pub fn fit_chunk_threshold(
    timelines: &[UserTimeline],
    config: &BaselineConfig,
    scorer: &dyn ChunkScorer,
) -> Result<ThresholdChoice> {
    let mut probs = Vec::new();
    let mut labels = Vec::new();
    for t in timelines {
        let scores = chunk_scores(t, config.chunk_size, scorer)?;
        labels.extend(std::iter::repeat_n(t.label.index(), scores.len()));
        probs.extend(scores);
    }
    move_threshold(&probs, &labels)
}

/// Labels each user by majority over chunk votes (`score >= threshold`).
pub fn majority_vote_baseline(
    timelines: &[UserTimeline],
    config: &BaselineConfig,
    scorer: &dyn ChunkScorer,
    threshold: f64,
) -> Result<EvaluationReport> {
    if timelines.is_empty() {
        return Err(Error::Empty("baseline timelines".into()));
    }
    let mut predicted = Vec::with_capacity(timelines.len());
    let mut labels = Vec::with_capacity(timelines.len());
    for t in timelines {
        let votes: Vec<bool> = chunk_scores(t, config.chunk_size, scorer)?
            .into_iter()
            .map(|s| s >= threshold)
            .collect();
        predicted.push(majority_vote(&votes, config.tie).is_condition());
        labels.push(t.label.index());
    }
    let confusion = Confusion::from_predictions(&predicted, &labels);
    EvaluationReport::from_seeds(vec![SeedMetrics::new(None, threshold, confusion)])
}
