use std::io::Write;
use std::path::Path;

use tempanchor_core::anchor::{build_series_set, compute_anchor, save_anchor};
use tempanchor_core::classify::{grid_search, Dataset, HyperGrid, TrainConfig};
use tempanchor_core::corpus::{save_corpus, synth_generate, synth_pool, Corpus, SignalMode, SynthConfig};
use tempanchor_core::experiments::{
    run_ablation, run_transfer, AblationMode, CorpusPaths, ExperimentKind, ExperimentManifest, SourcePaths,
};
use tempanchor_core::nn::{ModelKind, ModelSpec};
use tempanchor_core::Error;

fn corpus(seed: u64, cohort: u64, n: usize) -> Corpus {
    let config = SynthConfig {
        cohort,
        ..SynthConfig::desk(seed, SignalMode::Magnitude, n, 30)
    };
    synth_generate(&config).unwrap().corpus
}

fn quick() -> TrainConfig {
    TrainConfig {
        epochs: 10,
        seeds: vec![1, 2],
        ..TrainConfig::for_kind(ModelKind::Lstm)
    }
}

fn write_triple(dir: &Path, seed: u64) -> CorpusPaths {
    let mut names = Vec::new();
    for (cohort, split) in ["train", "val", "test"].into_iter().enumerate() {
        let name = format!("{split}.json");
        save_corpus(&corpus(seed, cohort as u64, 20), dir.join(&name)).unwrap();
        names.push(name);
    }
    CorpusPaths {
        train: names[0].clone().into(),
        val: names[1].clone().into(),
        test: names[2].clone().into(),
    }
}

fn manifest(kind: ExperimentKind, corpora: CorpusPaths, model: ModelSpec) -> ExperimentManifest {
    ExperimentManifest {
        kind,
        corpora,
        anchor: None,
        source: None,
        ablation: None,
        channels: None,
        model,
        train: quick(),
        permutations: 1,
        seed: 0,
        output_dir: "out".into(),
    }
}

fn store(dir: &Path, m: &ExperimentManifest) -> ExperimentManifest {
    let path = dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string(m).unwrap()).unwrap();
    ExperimentManifest::load(path).unwrap()
}

#[test]
fn transfer_to_itself_retains_everything() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let corpora = write_triple(d, 41);
    let config = SynthConfig::desk(41, SignalMode::Magnitude, 20, 30);
    let anchor = compute_anchor(&synth_pool(&config, 10, 30).unwrap().condition_only()).unwrap();
    save_anchor(&anchor, d.join("anchor.json")).unwrap();

    let mut m = manifest(ExperimentKind::Transfer, corpora.clone(), ModelSpec::Lstm { in_channels: 1, hidden: 6 });
    m.anchor = Some("anchor.json".into());
    m.source = Some(SourcePaths {
        train: corpora.train.clone(),
        val: corpora.val.clone(),
    });
    let report = run_transfer(&store(d, &m)).unwrap();
    assert_eq!(report.in_domain, report.transfer);
    assert_eq!(report.retained, 1.0);
    assert!(d.join("out/report.json").exists());
}

#[test]
fn direct_ablation_uses_every_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut m = manifest(
        ExperimentKind::Ablation,
        write_triple(d, 43),
        ModelSpec::Lstm { in_channels: 1, hidden: 6 },
    );
    m.ablation = Some(AblationMode::Direct);
    let report = run_ablation(&store(d, &m)).unwrap();
    assert_eq!(report.channels, 8);
    assert_eq!(report.evaluation.per_seed.len(), 2);
    assert!(report.evaluation.mean.f1 > 0.7, "{}", report.evaluation.mean.f1);
}

#[test]
fn channel_file_ablation() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let corpora = write_triple(d, 47);
    let mut file = std::fs::File::create(d.join("channels.jsonl")).unwrap();
    for split in [&corpora.train, &corpora.val, &corpora.test] {
        let c = tempanchor_core::corpus::load_corpus(d.join(split)).unwrap();
        for u in &c.users {
            for p in &u.posts {
                let probs = &p.vector[..3];
                writeln!(file, "{}", serde_json::json!({"user_id": u.user_id, "idx": p.index, "probs": probs})).unwrap();
            }
        }
    }
    drop(file);

    let mut m = manifest(ExperimentKind::Ablation, corpora, ModelSpec::Lstm { in_channels: 1, hidden: 6 });
    m.ablation = Some(AblationMode::Channels);
    let missing = store(d, &m);
    assert!(matches!(run_ablation(&missing), Err(Error::InvalidConfig(_))));
    m.channels = Some("channels.jsonl".into());
    let report = run_ablation(&store(d, &m)).unwrap();
    assert_eq!(report.channels, 3);
}

#[test]
fn wrong_kind_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let m = manifest(
        ExperimentKind::Permutation,
        write_triple(dir.path(), 49),
        ModelSpec::default_lstm(1),
    );
    assert!(matches!(run_ablation(&m), Err(Error::InvalidConfig(_))));
    assert!(matches!(run_transfer(&m), Err(Error::InvalidConfig(_))));
}

#[test]
fn grid_search_prefers_a_rate_that_learns() {
    let config = SynthConfig::desk(53, SignalMode::Magnitude, 20, 30);
    let anchor = compute_anchor(&synth_pool(&config, 10, 30).unwrap().condition_only()).unwrap();
    let train = Dataset::from_series(&build_series_set(&corpus(53, 0, 20), &anchor).unwrap());
    let val = Dataset::from_series(&build_series_set(&corpus(53, 1, 20), &anchor).unwrap());
    let grid = HyperGrid {
        lr: vec![1e-9, 1e-2],
        batch_size: vec![],
        epochs: vec![],
    };
    let spec = ModelSpec::Lstm { in_channels: 1, hidden: 6 };
    let result = grid_search(&spec, &grid, &quick(), &train, &val, 7).unwrap();
    assert_eq!(result.rows.len(), 2);
    assert_eq!(result.best_index, 1);
    assert_eq!(result.best.lr, 1e-2);
    assert_eq!(result.best.batch_size, quick().batch_size);
}
