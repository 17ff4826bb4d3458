use serde::{Deserialize, Serialize};

use super::manifest::{ExperimentKind, ExperimentManifest};
use super::{evaluate_splits, write_outputs, SplitSeries};
use crate::anchor::{build_multichannel_set, load_channels, MultichannelMode};
use crate::classify::{EvaluationReport, TrainConfig};
use crate::corpus::{load_corpus, Corpus};
use crate::error::{Error, Result};
use crate::nn::{ModelKind, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AblationMode {
    /// Raw post embeddings as channels.
    Direct,
    /// Per-post channel vectors from a channel file.
    Channels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub mode: AblationMode,
    pub channels: usize,
    pub evaluation: EvaluationReport,
}

/// Anchor-free run on multichannel series. Only sequence models accept
/// multichannel input.
pub fn ablation_experiment(
    spec: &ModelSpec,
    mode: MultichannelMode<'_>,
    corpora: [&Corpus; 3],
    config: &TrainConfig,
) -> Result<AblationReport> {
    if spec.kind() == ModelKind::Feedforward {
        return Err(Error::InvalidConfig(
            "feedforward models take feature vectors; ablations need lstm or cnn1d".into(),
        ));
    }
    let splits = SplitSeries {
        train: build_multichannel_set(corpora[0], mode)?,
        val: build_multichannel_set(corpora[1], mode)?,
        test: build_multichannel_set(corpora[2], mode)?,
    };
    let evaluation = evaluate_splits(spec, &splits, config)?;
    Ok(AblationReport {
        mode: match mode {
            MultichannelMode::Direct => AblationMode::Direct,
            MultichannelMode::Channels(_) => AblationMode::Channels,
        },
        channels: splits.train.channels,
        evaluation,
    })
}

pub fn run_ablation(manifest: &ExperimentManifest) -> Result<AblationReport> {
    if manifest.kind != ExperimentKind::Ablation {
        return Err(Error::InvalidConfig(format!("expected an ablation manifest, got {:?}", manifest.kind)));
    }
    manifest.validate()?;
    let c = &manifest.corpora;
    let (tr, va, te) = (load_corpus(&c.train)?, load_corpus(&c.val)?, load_corpus(&c.test)?);
    let table;
    let mode = match manifest.ablation.expect("validated") {
        AblationMode::Direct => MultichannelMode::Direct,
        AblationMode::Channels => {
            table = load_channels(manifest.channels.as_ref().expect("validated"))?;
            MultichannelMode::Channels(&table)
        }
    };
    let report = ablation_experiment(&manifest.model, mode, [&tr, &va, &te], &manifest.train)?;
    write_outputs(manifest, &report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{synth_generate, SignalMode, SynthConfig};

    #[test]
    fn feedforward_rejected() {
        let c = synth_generate(&SynthConfig::desk(1, SignalMode::Magnitude, 4, 5)).unwrap().corpus;
        let spec = ModelSpec::default_feedforward(30);
        let config = TrainConfig::for_kind(ModelKind::Feedforward);
        assert!(matches!(
            ablation_experiment(&spec, MultichannelMode::Direct, [&c, &c, &c], &config),
            Err(Error::InvalidConfig(_))
        ));
    }
}
