use serde::{Deserialize, Serialize};

use super::manifest::{ExperimentKind, ExperimentManifest};
use super::{evaluate_splits, write_outputs, SplitSeries};
use crate::anchor::{build_cross_series, build_series_set, load_anchor, AnchorEmbedding};
use crate::classify::{EvaluationReport, TrainConfig};
use crate::corpus::{load_corpus, Corpus};
use crate::error::{Error, Result};
use crate::nn::ModelSpec;

/// In-domain and transfer results side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    /// D1: the disorder whose anchor and test users are used.
    pub target: String,
    /// D2: the disorder whose users supply train and validation series.
    pub source: String,
    pub in_domain: EvaluationReport,
    pub transfer: EvaluationReport,
    /// `transfer.mean.f1 / in_domain.mean.f1` (0 when in-domain F1 is 0).
    pub retained: f64,
}

/// `target` holds D1's train/val/test corpora, `source` D2's train/val.
/// The in-domain arm uses D1 throughout; the transfer arm trains and moves
/// its threshold on `anchor × D2` series and tests on `anchor × D1`.
pub fn transfer_experiment(
    spec: &ModelSpec,
    anchor: &AnchorEmbedding,
    target: [&Corpus; 3],
    source: [&Corpus; 2],
    config: &TrainConfig,
) -> Result<TransferReport> {
    let test = build_series_set(target[2], anchor)?;
    let in_domain = evaluate_splits(
        spec,
        &SplitSeries {
            train: build_series_set(target[0], anchor)?,
            val: build_series_set(target[1], anchor)?,
            test: test.clone(),
        },
        config,
    )?;
    let transfer = evaluate_splits(
        spec,
        &SplitSeries {
            train: build_cross_series(source[0], anchor)?,
            val: build_cross_series(source[1], anchor)?,
            test,
        },
        config,
    )?;
    let retained = if in_domain.mean.f1 > 0.0 {
        transfer.mean.f1 / in_domain.mean.f1
    } else {
        0.0
    };
    Ok(TransferReport {
        target: target[2].disorder.clone(),
        source: source[0].disorder.clone(),
        in_domain,
        transfer,
        retained,
    })
}

pub fn run_transfer(manifest: &ExperimentManifest) -> Result<TransferReport> {
    if manifest.kind != ExperimentKind::Transfer {
        return Err(Error::InvalidConfig(format!("expected a transfer manifest, got {:?}", manifest.kind)));
    }
    manifest.validate()?;
    let anchor = load_anchor(manifest.anchor.as_ref().expect("validated"))?;
    let c = &manifest.corpora;
    let s = manifest.source.as_ref().expect("validated");
    let (tr, va, te) = (load_corpus(&c.train)?, load_corpus(&c.val)?, load_corpus(&c.test)?);
    let (str_, sva) = (load_corpus(&s.train)?, load_corpus(&s.val)?);
    let report = transfer_experiment(&manifest.model, &anchor, [&tr, &va, &te], [&str_, &sva], &manifest.train)?;
    write_outputs(manifest, &report)?;
    Ok(report)
}
