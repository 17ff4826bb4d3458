//! Corpus data model: per-user chronologically ordered post embeddings.

mod io;
mod split;
mod synth;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_corpus, read_corpus, save_corpus, write_corpus, FORMAT_VERSION};
pub use split::{split_corpus, split_three, stratified_mask};
pub use synth::{
    synth_generate, synth_pool, DirectionSpec, GroundTruth, PostCounts, SignalMode, SynthConfig,
    SynthCorpus,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Control,
    Condition,
}

impl Label {
    /// Class index used by the classifiers: control = 0, condition = 1.
    pub fn index(self) -> usize {
        match self {
            Label::Control => 0,
            Label::Condition => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 1 {
            Label::Condition
        } else {
            Label::Control
        }
    }

    pub fn is_condition(self) -> bool {
        self == Label::Condition
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Control => f.write_str("control"),
            Label::Condition => f.write_str("condition"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
    Pool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostEmbedding {
    #[serde(rename = "idx")]
    pub index: usize,
    #[serde(rename = "ts", default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<i64>,
    #[serde(rename = "v")]
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserTimeline {
    pub user_id: String,
    pub label: Label,
    pub posts: Vec<PostEmbedding>,
}

impl UserTimeline {
    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    /// Same posts in reverse order, re-indexed so the ordering invariant holds.
    pub fn reversed(&self) -> Self {
        let posts = self
            .posts
            .iter()
            .rev()
            .enumerate()
            .map(|(i, p)| PostEmbedding {
                index: i,
                timestamp: None,
                vector: p.vector.clone(),
            })
            .collect();
        UserTimeline {
            user_id: self.user_id.clone(),
            label: self.label,
            posts,
        }
    }

    pub(crate) fn validate(&self, dim: usize) -> Result<()> {
        if self.posts.is_empty() {
            return Err(Error::EmptyUser(self.user_id.clone()));
        }
        let mut prev: Option<&PostEmbedding> = None;
        for post in &self.posts {
            if post.vector.len() != dim {
                return Err(Error::DimensionMismatch {
                    context: format!("user `{}` post {}", self.user_id, post.index),
                    expected: dim,
                    found: post.vector.len(),
                });
            }
            if post.vector.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "user `{}` post {}",
                    self.user_id, post.index
                )));
            }
            if let Some(p) = prev {
                if post.index <= p.index {
                    return Err(Error::Ordering {
                        user: self.user_id.clone(),
                        message: format!("index {} does not follow {}", post.index, p.index),
                    });
                }
                if let (Some(a), Some(b)) = (p.timestamp, post.timestamp) {
                    if b < a {
                        return Err(Error::Ordering {
                            user: self.user_id.clone(),
                            message: format!("timestamp decreases at index {}", post.index),
                        });
                    }
                }
            }
            prev = Some(post);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub dim: usize,
    pub disorder: String,
    pub split: Split,
    pub users: Vec<UserTimeline>,
}

impl Corpus {
    pub fn new(dim: usize, disorder: impl Into<String>, split: Split) -> Self {
        Corpus {
            dim,
            disorder: disorder.into(),
            split,
            users: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidConfig("dim must be positive".into()));
        }
        let mut seen = HashSet::with_capacity(self.users.len());
        for user in &self.users {
            if !seen.insert(user.user_id.as_str()) {
                return Err(Error::DuplicateUser(user.user_id.clone()));
            }
            user.validate(self.dim)?;
        }
        Ok(())
    }

    /// Total number of posts over all users.
    pub fn post_count(&self) -> usize {
        self.users.iter().map(UserTimeline::len).sum()
    }

    pub fn count_label(&self, label: Label) -> usize {
        self.users.iter().filter(|u| u.label == label).count()
    }

    /// Only the condition-class users, as an anchor pool.
    pub fn condition_only(&self) -> Corpus {
        Corpus {
            dim: self.dim,
            disorder: self.disorder.clone(),
            split: Split::Pool,
            users: self
                .users
                .iter()
                .filter(|u| u.label.is_condition())
                .cloned()
                .collect(),
        }
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }
}
