//! Anchor embeddings and their similarity series.

mod io;
mod series;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

pub use io::{
    load_anchor, load_channels, load_series_set, read_channels, read_series_set, save_anchor,
    save_series_set, write_series_csv, write_series_set,
};
pub use series::{
    build_cross_series, build_multichannel_series, build_multichannel_set, build_series, build_series_set, ChannelTable,
    MultichannelMode, SeriesSet, SimilaritySeries, ZERO_NORM_FILL,
};

/// Mean condition-class post vector of a disorder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorEmbedding {
    pub disorder: String,
    pub dim: usize,
    pub n_source_posts: usize,
    pub vector: Vec<f64>,
}

/// Component-wise mean over every post of every user in `pool`.
///
/// The pool is taken as given: callers restrict it to condition-class
/// posts (see [`Corpus::condition_only`]). Vectors are averaged raw; no
/// normalisation happens before the mean.
pub fn compute_anchor(pool: &Corpus) -> Result<AnchorEmbedding> {
    let mut sum = vec![0.0; pool.dim];
    let mut n = 0usize;
    for user in &pool.users {
        for post in &user.posts {
            if post.vector.len() != pool.dim {
                return Err(Error::DimensionMismatch {
                    context: format!("anchor pool user `{}`", user.user_id),
                    expected: pool.dim,
                    found: post.vector.len(),
                });
            }
            sum.iter_mut().zip(&post.vector).for_each(|(s, x)| *s += x);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyPool);
    }
    let inv = 1.0 / n as f64;
    Ok(AnchorEmbedding {
        disorder: pool.disorder.clone(),
        dim: pool.dim,
        n_source_posts: n,
        vector: sum.into_iter().map(|s| s * inv).collect(),
    })
}

/// Cosine similarity clamped to [-1, 1]. Zero-norm inputs yield
/// [`Error::ZeroNorm`].
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "cosine operands".into(),
            expected: a.len(),
            found: b.len(),
        });
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Label, PostEmbedding, Split, UserTimeline};
    use proptest::prelude::*;

    pub(crate) fn pool(vectors: &[Vec<f64>]) -> Corpus {
        Corpus {
            dim: vectors[0].len(),
            disorder: "dep".into(),
            split: Split::Pool,
            users: vec![UserTimeline {
                user_id: "p".into(),
                label: Label::Condition,
                posts: vectors
                    .iter()
                    .enumerate()
                    .map(|(i, v)| PostEmbedding {
                        index: i,
                        timestamp: None,
                        vector: v.clone(),
                    })
                    .collect(),
            }],
        }
    }

    #[test]
    fn anchor_of_single_post_is_the_post() {
        let a = compute_anchor(&pool(&[vec![1.0, 2.0, 3.0]])).unwrap();
        assert_eq!(a.vector, vec![1.0, 2.0, 3.0]);
        assert_eq!(a.n_source_posts, 1);
    }

    #[test]
    fn anchor_of_mirrored_posts() {
        let a = compute_anchor(&pool(&[vec![1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0]])).unwrap();
        assert_eq!(a.vector, vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn empty_pool_rejected() {
        let c = Corpus::new(3, "dep", Split::Pool);
        assert!(matches!(compute_anchor(&c), Err(Error::EmptyPool)));
    }

    #[test]
    fn cosine_axis_cases() {
        assert_eq!(cosine(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(cosine(&[2.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::ZeroNorm)));
        assert!(cosine(&[1.0], &[1.0, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn cosine_is_scale_invariant(
            a in prop::collection::vec(-10.0f64..10.0, 5),
            b in prop::collection::vec(-10.0f64..10.0, 5),
            alpha in 0.01f64..100.0,
            beta in 0.01f64..100.0,
        ) {
            prop_assume!(a.iter().any(|x| x.abs() > 1e-3) && b.iter().any(|x| x.abs() > 1e-3));
            let sa: Vec<f64> = a.iter().map(|x| x * alpha).collect();
            let sb: Vec<f64> = b.iter().map(|x| x * beta).collect();
            let c0 = cosine(&a, &b).unwrap();
            let c1 = cosine(&sa, &sb).unwrap();
            prop_assert!((c0 - c1).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&c1));
        }

        #[test]
        fn anchor_is_linear_in_pools(
            a in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 4), 1..20),
            b in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 4), 1..20),
        ) {
            let both: Vec<Vec<f64>> = a.iter().chain(&b).cloned().collect();
            let ab = compute_anchor(&pool(&both)).unwrap();
            let aa = compute_anchor(&pool(&a)).unwrap();
            let bb = compute_anchor(&pool(&b)).unwrap();
            let (na, nb) = (a.len() as f64, b.len() as f64);
            for i in 0..4 {
                let expect = (na * aa.vector[i] + nb * bb.vector[i]) / (na + nb);
                prop_assert!((ab.vector[i] - expect).abs() < 1e-10);
            }
        }
    }
}
