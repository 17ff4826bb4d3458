use std::collections::HashMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::{cosine, AnchorEmbedding};
use crate::corpus::{Corpus, Label, UserTimeline};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Value written at positions whose post vector has zero norm.
pub const ZERO_NORM_FILL: f64 = 0.0;

/// A user's time series: `len()` steps of `channels` values each, stored
/// step-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilaritySeries {
    pub user_id: String,
    pub label: Label,
    pub channels: usize,
    pub values: Vec<f64>,
    /// Set when at least one position carries [`ZERO_NORM_FILL`].
    pub degraded: bool,
}

impl SimilaritySeries {
    pub fn scalar(user_id: impl Into<String>, label: Label, values: Vec<f64>) -> Self {
        SimilaritySeries {
            user_id: user_id.into(),
            label,
            channels: 1,
            values,
            degraded: false,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.channels.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn step(&self, j: usize) -> &[f64] {
        &self.values[j * self.channels..(j + 1) * self.channels]
    }

    pub fn steps(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.channels)
    }

    /// Steps in a uniformly random order; each step keeps its channels.
    pub fn permuted(&self, rng: &mut Rng) -> Self {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(rng);
        let values = order.iter().flat_map(|&j| self.step(j).iter().copied()).collect();
        SimilaritySeries {
            values,
            ..self.clone()
        }
    }

    pub fn reversed(&self) -> Self {
        let values = (0..self.len())
            .rev()
            .flat_map(|j| self.step(j).iter().copied())
            .collect();
        SimilaritySeries {
            values,
            ..self.clone()
        }
    }
}

/// Series for a whole corpus, tagged with which anchor produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSet {
    pub channels: usize,
    pub disorder: String,
    /// `None` for anchor-free (ablation) series.
    pub anchor_disorder: Option<String>,
    pub series: Vec<SimilaritySeries>,
}

impl SeriesSet {
    pub fn count_label(&self, label: Label) -> usize {
        self.series.iter().filter(|s| s.label == label).count()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.series.iter().map(|s| s.label).collect()
    }
}

/// Cosine of each post to the anchor, in post order.
pub fn build_series(timeline: &UserTimeline, anchor: &AnchorEmbedding) -> Result<SimilaritySeries> {
    let mut degraded = false;
    let values = timeline
        .posts
        .iter()
        .map(|post| {
            if post.vector.len() != anchor.dim {
                return Err(Error::DimensionMismatch {
                    context: format!("user `{}` against anchor `{}`", timeline.user_id, anchor.disorder),
                    expected: anchor.dim,
                    found: post.vector.len(),
                });
            }
            match cosine(&post.vector, &anchor.vector) {
                Ok(c) => Ok(c),
                Err(Error::ZeroNorm) => {
                    degraded = true;
                    Ok(ZERO_NORM_FILL)
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SimilaritySeries {
        user_id: timeline.user_id.clone(),
        label: timeline.label,
        channels: 1,
        values,
        degraded,
    })
}

/// Series for every user of `corpus` against `anchor`. Users are processed
/// in parallel; output order follows the corpus.
pub fn build_series_set(corpus: &Corpus, anchor: &AnchorEmbedding) -> Result<SeriesSet> {
    if corpus.dim != anchor.dim {
        return Err(Error::DimensionMismatch {
            context: format!("corpus `{}` against anchor `{}`", corpus.disorder, anchor.disorder),
            expected: anchor.dim,
            found: corpus.dim,
        });
    }
    let series = corpus
        .users
        .par_iter()
        .map(|u| build_series(u, anchor))
        .collect::<Result<Vec<_>>>()?;
    Ok(SeriesSet {
        channels: 1,
        disorder: corpus.disorder.clone(),
        anchor_disorder: Some(anchor.disorder.clone()),
        series,
    })
}

/// Series of one disorder's users against another disorder's anchor. The
/// mechanics are those of [`build_series_set`]; the result carries both tags.
pub fn build_cross_series(data: &Corpus, anchor: &AnchorEmbedding) -> Result<SeriesSet> {
    build_series_set(data, anchor)
}

/// Per-post channel vectors keyed by `(user_id, idx)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChannelTable {
    pub channels: usize,
    pub(crate) rows: HashMap<(String, usize), Vec<f64>>,
}

impl ChannelTable {
    pub fn new(channels: usize) -> Self {
        ChannelTable {
            channels,
            rows: HashMap::new(),
        }
    }

    pub fn insert(&mut self, user_id: impl Into<String>, idx: usize, probs: Vec<f64>) -> Result<()> {
        if probs.len() != self.channels {
            return Err(Error::DimensionMismatch {
                context: "channel record".into(),
                expected: self.channels,
                found: probs.len(),
            });
        }
        self.rows.insert((user_id.into(), idx), probs);
        Ok(())
    }

    pub fn get(&self, user_id: &str, idx: usize) -> Option<&[f64]> {
        self.rows.get(&(user_id.to_string(), idx)).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
pub enum MultichannelMode<'a> {
    /// Raw post embeddings, one channel per dimension.
    Direct,
    /// Externally supplied per-post channel vectors.
    Channels(&'a ChannelTable),
}

/// Anchor-free multichannel series for the ablation setups.
pub fn build_multichannel_series(
    timeline: &UserTimeline,
    mode: MultichannelMode<'_>,
) -> Result<SimilaritySeries> {
    let (channels, values) = match mode {
        MultichannelMode::Direct => {
            let dim = timeline.posts.first().map_or(0, |p| p.vector.len());
            let values: Vec<f64> = timeline
                .posts
                .iter()
                .flat_map(|p| p.vector.iter().copied())
                .collect();
            (dim, values)
        }
        MultichannelMode::Channels(table) => {
            let mut values = Vec::with_capacity(timeline.len() * table.channels);
            for post in &timeline.posts {
                let row = table.get(&timeline.user_id, post.index).ok_or_else(|| Error::Misaligned {
                    user: timeline.user_id.clone(),
                    idx: post.index,
                })?;
                values.extend_from_slice(row);
            }
            (table.channels, values)
        }
    };
    if channels == 0 {
        return Err(Error::Shape("multichannel series needs at least one channel".into()));
    }
    Ok(SimilaritySeries {
        user_id: timeline.user_id.clone(),
        label: timeline.label,
        channels,
        values,
        degraded: false,
    })
}

/// [`build_multichannel_series`] for every user of `corpus`.
pub fn build_multichannel_set(corpus: &Corpus, mode: MultichannelMode<'_>) -> Result<SeriesSet> {
    let series = corpus
        .users
        .par_iter()
        .map(|u| build_multichannel_series(u, mode))
        .collect::<Result<Vec<_>>>()?;
    let channels = match mode {
        MultichannelMode::Direct => corpus.dim,
        MultichannelMode::Channels(t) => t.channels,
    };
    Ok(SeriesSet {
        channels,
        disorder: corpus.disorder.clone(),
        anchor_disorder: None,
        series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{PostEmbedding, Split};
    use proptest::prelude::*;

    fn timeline(vs: &[Vec<f64>]) -> UserTimeline {
        UserTimeline {
            user_id: "u".into(),
            label: Label::Condition,
            posts: vs
                .iter()
                .enumerate()
                .map(|(i, v)| PostEmbedding {
                    index: i,
                    timestamp: None,
                    vector: v.clone(),
                })
                .collect(),
        }
    }

    fn anchor(v: Vec<f64>) -> AnchorEmbedding {
        AnchorEmbedding {
            disorder: "dep".into(),
            dim: v.len(),
            n_source_posts: 1,
            vector: v,
        }
    }

    #[test]
    fn posts_equal_to_anchor_give_ones() {
        let a = vec![0.3, -1.2, 2.0];
        let s = build_series(&timeline(&vec![a.clone(); 4]), &anchor(a)).unwrap();
        assert_eq!(s.len(), 4);
        for v in &s.values {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn axis_posts() {
        let t = timeline(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0]]);
        let s = build_series(&t, &anchor(vec![1.0, 0.0])).unwrap();
        assert_eq!(s.values, vec![1.0, 0.0, -1.0]);
        assert_eq!(s.channels, 1);
        assert!(!s.degraded);
    }

    #[test]
    fn zero_norm_post_is_filled_and_flagged() {
        let t = timeline(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        let s = build_series(&t, &anchor(vec![1.0, 0.0])).unwrap();
        assert_eq!(s.values, vec![1.0, ZERO_NORM_FILL]);
        assert!(s.degraded);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let t = timeline(&[vec![1.0, 0.0, 0.0]]);
        assert!(matches!(
            build_series(&t, &anchor(vec![1.0, 0.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn cross_series_with_same_disorder_matches_in_domain() {
        let c = Corpus {
            dim: 2,
            disorder: "dep".into(),
            split: Split::Test,
            users: vec![timeline(&[vec![1.0, 1.0], vec![0.5, -1.0]])],
        };
        let a = anchor(vec![1.0, 0.2]);
        assert_eq!(build_cross_series(&c, &a).unwrap(), build_series_set(&c, &a).unwrap());
    }

    #[test]
    fn direct_mode_copies_embeddings() {
        let vs = vec![vec![1.0, 2.0, 3.0, 4.0], vec![5.0, 6.0, 7.0, 8.0]];
        let s = build_multichannel_series(&timeline(&vs), MultichannelMode::Direct).unwrap();
        assert_eq!(s.channels, 4);
        assert_eq!(s.len(), 2);
        assert_eq!(s.step(0), vs[0].as_slice());
        assert_eq!(s.step(1), vs[1].as_slice());
    }

    #[test]
    fn channel_mode_passes_through_and_checks_alignment() {
        let t = timeline(&[vec![0.0; 3], vec![0.0; 3], vec![0.0; 3]]);
        let mut table = ChannelTable::new(8);
        for idx in 0..3 {
            table.insert("u", idx, vec![idx as f64 / 10.0; 8]).unwrap();
        }
        let s = build_multichannel_series(&t, MultichannelMode::Channels(&table)).unwrap();
        assert_eq!((s.channels, s.len()), (8, 3));
        assert_eq!(s.step(2), &[0.2; 8]);

        table.rows.remove(&("u".to_string(), 1));
        match build_multichannel_series(&t, MultichannelMode::Channels(&table)) {
            Err(Error::Misaligned { user, idx }) => assert_eq!((user.as_str(), idx), ("u", 1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn reversal_commutes_with_series(
            vs in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 1..15),
            a in prop::collection::vec(0.1f64..3.0, 3),
        ) {
            let t = timeline(&vs);
            let anchor = anchor(a);
            let fwd = build_series(&t, &anchor).unwrap();
            let rev = build_series(&t.reversed(), &anchor).unwrap();
            prop_assert_eq!(rev.values, fwd.reversed().values);
            prop_assert!(fwd.values.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }
}
