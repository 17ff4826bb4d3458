//! Seeded synthetic longitudinal corpora with a planted anchor direction.
//!
//! Every post is built as `r * (c * u + sqrt(1 - c^2) * w)` where `u` is the
//! hidden unit direction, `w` a random unit vector orthogonal to `u`, `r` the
//! norm of a standard Gaussian draw and `c` the post's cosine to `u`. For
//! background posts `c` is the cosine of an isotropic Gaussian draw, which
//! makes background posts exactly isotropic. Signal posts move `c` towards 1:
//! `c' = (1 - s) * c + s`, an expected elevation of `s` since `E[c] = 0`.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Corpus, Label, PostEmbedding, Split, UserTimeline};
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose, Rng};

const BASE_EPOCH: i64 = 1_500_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalMode {
    /// Condition users carry an episode of elevated similarity.
    Magnitude,
    /// Matched pairs share similarity multisets; only ordering differs.
    Trend,
}

/// How the hidden direction is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DirectionSpec {
    /// Uniform on the unit sphere, drawn from the config seed.
    Random,
    /// At a fixed cosine to the random direction another seed would draw.
    /// Lets two synthetic "disorders" share a controlled amount of signal.
    Related { base_seed: u64, cosine: f64 },
}

/// Post counts per user: `round(mean * exp(spread * z))`, `z ~ N(0, 1)`,
/// at least 1. `spread = 0` gives exactly `mean` posts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostCounts {
    pub condition_mean: f64,
    pub control_mean: f64,
    pub spread: f64,
}

impl PostCounts {
    pub fn fixed(n: usize) -> Self {
        PostCounts {
            condition_mean: n as f64,
            control_mean: n as f64,
            spread: 0.0,
        }
    }

    fn draw(&self, label: Label, rng: &mut Rng) -> usize {
        let mean = match label {
            Label::Condition => self.condition_mean,
            Label::Control => self.control_mean,
        };
        let z: f64 = StandardNormal.sample(rng);
        ((mean * (self.spread * z).exp()).round() as usize).max(1)
    }
}

impl Default for PostCounts {
    // anorexia condition/control averages from the e-Risk statistics
    fn default() -> Self {
        PostCounts {
            condition_mean: 400.0,
            control_mean: 550.0,
            spread: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_condition: usize,
    pub n_control: usize,
    pub dim: usize,
    pub posts_per_user: PostCounts,
    pub signal_mode: SignalMode,
    pub signal_strength: f64,
    pub episode_fraction: f64,
    #[serde(default = "default_disorder")]
    pub disorder: String,
    /// Selects an independent population of users under the same hidden
    /// direction (e.g. a held-out test cohort).
    #[serde(default)]
    pub cohort: u64,
    #[serde(default = "default_direction")]
    pub direction: DirectionSpec,
}

fn default_disorder() -> String {
    "synthetic".into()
}

fn default_direction() -> DirectionSpec {
    DirectionSpec::Random
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            n_condition: 100,
            n_control: 100,
            dim: 768,
            posts_per_user: PostCounts::default(),
            signal_mode: SignalMode::Magnitude,
            signal_strength: 0.8,
            episode_fraction: 0.5,
            disorder: default_disorder(),
            cohort: 0,
            direction: DirectionSpec::Random,
        }
    }
}

impl SynthConfig {
    /// Small configuration used throughout the tests: `n` users per class,
    /// `posts` posts each, dimension 8.
    pub fn desk(seed: u64, mode: SignalMode, n: usize, posts: usize) -> Self {
        SynthConfig {
            seed,
            n_condition: n,
            n_control: n,
            dim: 8,
            posts_per_user: PostCounts::fixed(posts),
            signal_mode: mode,
            ..SynthConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.n_condition < 1 || self.n_control < 1 {
            return bad("class counts must be at least 1");
        }
        if self.dim < 2 {
            return bad("dim must be at least 2");
        }
        if !(0.0..=1.0).contains(&self.signal_strength) {
            return bad("signal_strength must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.episode_fraction) {
            return bad("episode_fraction must lie in [0, 1]");
        }
        let pc = &self.posts_per_user;
        let valid = pc.condition_mean >= 1.0 && pc.control_mean >= 1.0 && pc.spread >= 0.0;
        if !valid {
            return bad("post count means must be >= 1 and spread >= 0");
        }
        if let DirectionSpec::Related { cosine, .. } = self.direction {
            if !(-1.0..=1.0).contains(&cosine) {
                return bad("related direction cosine must lie in [-1, 1]");
            }
        }
        Ok(())
    }

    pub fn hidden_direction(&self) -> Vec<f64> {
        match self.direction {
            DirectionSpec::Random => {
                random_unit(self.dim, &mut stream(self.seed, Purpose::Direction, 0))
            }
            DirectionSpec::Related { base_seed, cosine } => {
                let base = random_unit(self.dim, &mut stream(base_seed, Purpose::Direction, 0));
                let mut rng = stream(self.seed, Purpose::Direction, 1);
                let w = orthogonal_unit(&base, &mut rng);
                let s = (1.0 - cosine * cosine).max(0.0).sqrt();
                base.iter().zip(&w).map(|(b, w)| cosine * b + s * w).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub hidden_direction: Vec<f64>,
    /// Trend mode: condition user_id -> matched control user_id.
    pub pair_map: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub corpus: Corpus,
    pub truth: GroundTruth,
}

pub fn synth_generate(config: &SynthConfig) -> Result<SynthCorpus> {
    config.validate()?;
    let u = config.hidden_direction();
    let mut rng = stream(config.seed, Purpose::Users, config.cohort);
    let prefix = if config.cohort == 0 {
        String::new()
    } else {
        format!("k{}-", config.cohort)
    };
    let cond_id = |i: usize| format!("{prefix}cond-{i:04}");
    let ctrl_id = |i: usize| format!("{prefix}ctrl-{i:04}");

    let mut users = Vec::with_capacity(config.n_condition + config.n_control);
    let mut pair_map = BTreeMap::new();
    match config.signal_mode {
        SignalMode::Magnitude => {
            for i in 0..config.n_condition {
                let k = config.posts_per_user.draw(Label::Condition, &mut rng);
                let episode = episode_len(k, config.episode_fraction);
                let start = rng.gen_range(0..=k - episode);
                let cosines: Vec<f64> = (0..k)
                    .map(|j| {
                        let c0 = isotropic_cosine(config.dim, &mut rng);
                        if (start..start + episode).contains(&j) {
                            elevate(c0, config.signal_strength)
                        } else {
                            c0
                        }
                    })
                    .collect();
                users.push(embed_user(cond_id(i), Label::Condition, &cosines, &u, &mut rng));
            }
            for i in 0..config.n_control {
                let k = config.posts_per_user.draw(Label::Control, &mut rng);
                let cosines: Vec<f64> = (0..k)
                    .map(|_| isotropic_cosine(config.dim, &mut rng))
                    .collect();
                users.push(embed_user(ctrl_id(i), Label::Control, &cosines, &u, &mut rng));
            }
        }
        SignalMode::Trend => {
            let pairs = config.n_condition.min(config.n_control);
            let mut controls = Vec::with_capacity(config.n_control);
            for i in 0..config.n_condition {
                let k = config.posts_per_user.draw(Label::Condition, &mut rng);
                let (background, mut episode) = trend_values(k, config, &mut rng);
                // condition: rising episode inserted into shuffled background
                episode.sort_by(f64::total_cmp);
                let mut cond_vals = background.clone();
                cond_vals.shuffle(&mut rng);
                let start = rng.gen_range(0..=cond_vals.len());
                cond_vals.splice(start..start, episode.iter().copied());
                users.push(embed_user(cond_id(i), Label::Condition, &cond_vals, &u, &mut rng));

                if i < pairs {
                    let mut ctrl_vals: Vec<f64> = background.into_iter().chain(episode).collect();
                    ctrl_vals.shuffle(&mut rng);
                    controls.push(embed_user(ctrl_id(i), Label::Control, &ctrl_vals, &u, &mut rng));
                    pair_map.insert(cond_id(i), ctrl_id(i));
                }
            }
            for i in pairs..config.n_control {
                let k = config.posts_per_user.draw(Label::Condition, &mut rng);
                let (background, episode) = trend_values(k, config, &mut rng);
                let mut vals: Vec<f64> = background.into_iter().chain(episode).collect();
                vals.shuffle(&mut rng);
                controls.push(embed_user(ctrl_id(i), Label::Control, &vals, &u, &mut rng));
            }
            users.extend(controls);
        }
    }

    let corpus = Corpus {
        dim: config.dim,
        disorder: config.disorder.clone(),
        split: Split::Train,
        users,
    };
    Ok(SynthCorpus {
        corpus,
        truth: GroundTruth {
            hidden_direction: u,
            pair_map,
        },
    })
}

/// Anchor pool for a synthetic configuration: `n_users` condition-class users
/// whose every post carries the signal, drawn from a stream disjoint from the
/// one that produces the labelled users.
pub fn synth_pool(config: &SynthConfig, n_users: usize, posts_per_user: usize) -> Result<Corpus> {
    config.validate()?;
    if n_users == 0 || posts_per_user == 0 {
        return Err(Error::InvalidConfig("pool needs at least one post".into()));
    }
    let u = config.hidden_direction();
    let mut rng = stream(config.seed, Purpose::Pool, config.cohort);
    let users = (0..n_users)
        .map(|i| {
            let cosines: Vec<f64> = (0..posts_per_user)
                .map(|_| elevate(isotropic_cosine(config.dim, &mut rng), config.signal_strength))
                .collect();
            embed_user(format!("pool-{i:04}"), Label::Condition, &cosines, &u, &mut rng)
        })
        .collect();
    Ok(Corpus {
        dim: config.dim,
        disorder: config.disorder.clone(),
        split: Split::Pool,
        users,
    })
}

fn episode_len(k: usize, fraction: f64) -> usize {
    ((k as f64 * fraction).round() as usize).min(k)
}

fn elevate(c0: f64, s: f64) -> f64 {
    (1.0 - s) * c0 + s
}

/// Background and elevated episode values for one trend-mode timeline.
fn trend_values(k: usize, config: &SynthConfig, rng: &mut Rng) -> (Vec<f64>, Vec<f64>) {
    let episode = episode_len(k, config.episode_fraction);
    let background = (0..k - episode)
        .map(|_| isotropic_cosine(config.dim, rng))
        .collect();
    let elevated = (0..episode)
        .map(|_| elevate(isotropic_cosine(config.dim, rng), config.signal_strength))
        .collect();
    (background, elevated)
}

fn embed_user(id: String, label: Label, cosines: &[f64], u: &[f64], rng: &mut Rng) -> UserTimeline {
    let mut ts = BASE_EPOCH + rng.gen_range(0..86_400 * 365);
    let posts = cosines
        .iter()
        .enumerate()
        .map(|(index, &c)| {
            ts += rng.gen_range(600..3 * 86_400);
            PostEmbedding {
                index,
                timestamp: Some(ts),
                vector: post_vector(c, u, rng),
            }
        })
        .collect();
    UserTimeline {
        user_id: id,
        label,
        posts,
    }
}

fn post_vector(c: f64, u: &[f64], rng: &mut Rng) -> Vec<f64> {
    let radius = gaussian(u.len(), rng).iter().map(|x| x * x).sum::<f64>().sqrt();
    let w = orthogonal_unit(u, rng);
    let s = (1.0 - c * c).max(0.0).sqrt();
    u.iter()
        .zip(&w)
        .map(|(ui, wi)| radius * (c * ui + s * wi))
        .collect()
}

fn gaussian(dim: usize, rng: &mut Rng) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn random_unit(dim: usize, rng: &mut Rng) -> Vec<f64> {
    loop {
        let g = gaussian(dim, rng);
        let n = norm(&g);
        if n > 1e-12 {
            return g.into_iter().map(|x| x / n).collect();
        }
    }
}

fn orthogonal_unit(u: &[f64], rng: &mut Rng) -> Vec<f64> {
    loop {
        let mut g = gaussian(u.len(), rng);
        let proj: f64 = g.iter().zip(u).map(|(a, b)| a * b).sum();
        g.iter_mut().zip(u).for_each(|(a, b)| *a -= proj * b);
        let n = norm(&g);
        if n > 1e-9 {
            return g.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Cosine between a fixed axis and an isotropic Gaussian vector in `dim`
/// dimensions.
fn isotropic_cosine(dim: usize, rng: &mut Rng) -> f64 {
    loop {
        let g = gaussian(dim, rng);
        let n = norm(&g);
        if n > 1e-12 {
            return g[0] / n;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    fn cos(a: &[f64], b: &[f64]) -> f64 {
        dot(a, b) / (norm(a) * norm(b))
    }

    #[test]
    fn same_seed_is_byte_identical() {
        let cfg = SynthConfig::desk(7, SignalMode::Magnitude, 5, 12);
        let mut a = Vec::new();
        let mut b = Vec::new();
        crate::corpus::write_corpus(&synth_generate(&cfg).unwrap().corpus, &mut a).unwrap();
        crate::corpus::write_corpus(&synth_generate(&cfg).unwrap().corpus, &mut b).unwrap();
        assert_eq!(a, b);

        let other = SynthConfig { seed: 8, ..cfg };
        let mut c = Vec::new();
        crate::corpus::write_corpus(&synth_generate(&other).unwrap().corpus, &mut c).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn trend_pairs_share_similarity_multisets() {
        let cfg = SynthConfig::desk(3, SignalMode::Trend, 6, 30);
        let out = synth_generate(&cfg).unwrap();
        let u = &out.truth.hidden_direction;
        assert_eq!(out.truth.pair_map.len(), 6);
        let find = |id: &str| out.corpus.users.iter().find(|x| x.user_id == id).unwrap();
        for (cond, ctrl) in &out.truth.pair_map {
            let sims = |t: &UserTimeline| {
                let mut v: Vec<f64> = t.posts.iter().map(|p| cos(&p.vector, u)).collect();
                v.sort_by(f64::total_cmp);
                v
            };
            let a = sims(find(cond));
            let b = sims(find(ctrl));
            assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12, "{x} vs {y}");
            }
            let raw_a: Vec<f64> = find(cond).posts.iter().map(|p| cos(&p.vector, u)).collect();
            let raw_b: Vec<f64> = find(ctrl).posts.iter().map(|p| cos(&p.vector, u)).collect();
            assert_ne!(raw_a, raw_b);
        }
    }

    #[test]
    fn trend_condition_episode_is_rising() {
        let cfg = SynthConfig {
            signal_strength: 1.0,
            episode_fraction: 0.4,
            ..SynthConfig::desk(5, SignalMode::Trend, 3, 20)
        };
        let out = synth_generate(&cfg).unwrap();
        let u = &out.truth.hidden_direction;
        for user in out.corpus.users.iter().filter(|u| u.label.is_condition()) {
            // with full strength every episode value is 1.0
            let sims: Vec<f64> = user.posts.iter().map(|p| cos(&p.vector, u)).collect();
            let ones: Vec<usize> = (0..sims.len()).filter(|&i| sims[i] > 1.0 - 1e-9).collect();
            assert_eq!(ones.len(), 8);
            assert_eq!(ones[7] - ones[0], 7, "episode must be contiguous");
        }
    }

    #[test]
    fn related_direction_has_requested_cosine() {
        let base = SynthConfig::desk(1, SignalMode::Magnitude, 2, 2);
        let rel = SynthConfig {
            seed: 2,
            direction: DirectionSpec::Related {
                base_seed: 1,
                cosine: 0.8,
            },
            ..base.clone()
        };
        let c = cos(&base.hidden_direction(), &rel.hidden_direction());
        assert!((c - 0.8).abs() < 1e-12);
        assert!((norm(&rel.hidden_direction()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn magnitude_signal_elevates_episode() {
        let cfg = SynthConfig {
            episode_fraction: 1.0,
            ..SynthConfig::desk(11, SignalMode::Magnitude, 20, 20)
        };
        let out = synth_generate(&cfg).unwrap();
        let u = &out.truth.hidden_direction;
        let mean = |label: Label| {
            let v: Vec<f64> = out
                .corpus
                .users
                .iter()
                .filter(|x| x.label == label)
                .flat_map(|x| x.posts.iter().map(|p| cos(&p.vector, u)))
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let gap = mean(Label::Condition) - mean(Label::Control);
        assert!((gap - 0.8).abs() < 0.1, "gap {gap}");
    }

    #[test]
    fn post_counts_follow_config() {
        let cfg = SynthConfig {
            posts_per_user: PostCounts {
                condition_mean: 40.0,
                control_mean: 55.0,
                spread: 0.0,
            },
            ..SynthConfig::desk(1, SignalMode::Magnitude, 3, 1)
        };
        let out = synth_generate(&cfg).unwrap();
        for u in &out.corpus.users {
            let expected = if u.label.is_condition() { 40 } else { 55 };
            assert_eq!(u.len(), expected);
        }
        assert!(out.corpus.validate().is_ok());
    }

    #[test]
    fn invalid_configs_rejected() {
        let ok = SynthConfig::desk(1, SignalMode::Magnitude, 3, 5);
        for bad in [
            SynthConfig { n_control: 0, ..ok.clone() },
            SynthConfig { dim: 1, ..ok.clone() },
            SynthConfig { signal_strength: 1.5, ..ok.clone() },
            SynthConfig { episode_fraction: -0.1, ..ok.clone() },
        ] {
            assert!(matches!(synth_generate(&bad), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn pool_is_condition_only_and_disjoint() {
        let cfg = SynthConfig::desk(4, SignalMode::Magnitude, 3, 5);
        let pool = synth_pool(&cfg, 4, 6).unwrap();
        assert_eq!(pool.split, Split::Pool);
        assert_eq!(pool.post_count(), 24);
        assert!(pool.users.iter().all(|u| u.label.is_condition()));
    }
}
