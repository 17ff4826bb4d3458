use rand::seq::SliceRandom;

use super::{Corpus, Label, Split};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream, Purpose};

/// User-level, class-stratified split into two corpora (tagged train and
/// val). Within each class the first share is `round(n * fractions.0)`,
/// clamped so both sides keep at least one user.
pub fn split_corpus(corpus: &Corpus, fractions: (f64, f64), seed: u64) -> Result<(Corpus, Corpus)> {
    let (first, second) = fractions;
    if !(first > 0.0 && second > 0.0) || ((first + second) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "split fractions must be positive and sum to 1, got {first} + {second}"
        )));
    }

    let labels: Vec<Label> = corpus.users.iter().map(|u| u.label).collect();
    let in_first = stratified_mask(&labels, first, seed)?;

    let part = |keep: bool, split: Split| Corpus {
        dim: corpus.dim,
        disorder: corpus.disorder.clone(),
        split,
        users: corpus
            .users
            .iter()
            .zip(&in_first)
            .filter(|(_, &f)| f == keep)
            .map(|(u, _)| u.clone())
            .collect(),
    };
    Ok((part(true, Split::Train), part(false, Split::Val)))
}

/// Marks, within each class, `round(n * fraction)` members (at least one,
/// and leaving at least one unmarked) chosen by a seeded shuffle.
pub fn stratified_mask(labels: &[Label], fraction: f64, seed: u64) -> Result<Vec<bool>> {
    let mut mask = vec![false; labels.len()];
    for (ci, label) in [Label::Condition, Label::Control].into_iter().enumerate() {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == label).collect();
        if members.len() < 2 {
            return Err(Error::Stratify {
                class: label.to_string(),
                count: members.len(),
                needed: 2,
            });
        }
        members.shuffle(&mut stream(seed, Purpose::Split, ci as u64));
        let n = members.len();
        let take = ((n as f64 * fraction).round() as usize).clamp(1, n - 1);
        for &i in &members[..take] {
            mask[i] = true;
        }
    }
    Ok(mask)
}

/// Train/val/test split: test users are set aside first, then the rest is
/// divided between train and val, each step stratified by class.
pub fn split_three(corpus: &Corpus, fractions: (f64, f64, f64), seed: u64) -> Result<(Corpus, Corpus, Corpus)> {
    let (a, b, c) = fractions;
    if !(a > 0.0 && b > 0.0 && c > 0.0) || ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "split fractions must be positive and sum to 1, got {a} + {b} + {c}"
        )));
    }
    let (rest, test) = split_corpus(corpus, (a + b, c), seed)?;
    let (train, val) = split_corpus(&rest, (a / (a + b), b / (a + b)), derive_seed(seed, Purpose::Split, 1))?;
    Ok((train, val, test.with_split(Split::Test)))
}
