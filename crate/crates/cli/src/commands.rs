use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use tempanchor_core::anchor::{
    build_multichannel_set, build_series_set, compute_anchor, load_anchor, load_channels, load_series_set,
    save_anchor, save_series_set, write_series_csv, MultichannelMode, SeriesSet,
};
use tempanchor_core::classify::{
    fit_chunk_threshold, majority_vote_baseline, move_threshold, predict, score_predictions, train, BaselineConfig,
    Dataset, EvaluationReport, MeanCosineScorer, TieRule, TrainConfig,
};
use tempanchor_core::corpus::{
    load_corpus, save_corpus, stratified_mask, synth_generate, synth_pool, DirectionSpec, PostCounts, SignalMode,
    SynthConfig,
};
use tempanchor_core::experiments::{run_ablation, run_permutation, run_transfer, ExperimentManifest};
use tempanchor_core::features::{
    extract_features, load_features, load_selection, rank_by_gini, save_features, save_selection, select_top_k,
    FeatureVector, ForestConfig, SelectionConfig,
};
use tempanchor_core::nn::{count_flops, FlopsTarget, ModelKind, ModelSpec, TrainedModel, TransformerParams};
use tempanchor_core::Error;

use crate::{
    AnchorArgs, BaselineArgs, Cli, Command, EvalArgs, FeaturesArgs, FlopsArgs, FlopsModel, ManifestArgs, ModeArg,
    ModelArg, SelectArgs, SeriesArgs, SeriesMode, SynthArgs, TieArg, TrainArgs,
};

pub fn run(cli: Cli) -> Result<()> {
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .context("configuring the job pool")?;
    }
    let seed = cli.seed;
    match cli.command {
        Command::Synth(a) => synth(a, seed),
        Command::Anchor(a) => anchor(a),
        Command::Series(a) => series(a),
        Command::Features(a) => features(a),
        Command::Select(a) => select(a, seed),
        Command::Train(a) => train_cmd(a, seed),
        Command::Eval(a) => eval(a),
        Command::Baseline(a) => baseline(a),
        Command::Permute(a) => permute(a),
        Command::Transfer(a) => transfer(a),
        Command::Ablate(a) => ablate(a),
        Command::Flops(a) => flops(a),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn synth(a: SynthArgs, seed: u64) -> Result<()> {
    let config = SynthConfig {
        seed,
        n_condition: a.n_condition,
        n_control: a.n_control,
        dim: a.dim,
        posts_per_user: PostCounts {
            spread: a.post_spread,
            ..PostCounts::fixed(a.posts)
        },
        signal_mode: match a.mode {
            ModeArg::Magnitude => SignalMode::Magnitude,
            ModeArg::Trend => SignalMode::Trend,
        },
        signal_strength: a.signal,
        episode_fraction: a.episode,
        disorder: a.disorder,
        cohort: a.cohort,
        direction: match a.related_seed {
            Some(base_seed) => DirectionSpec::Related {
                base_seed,
                cosine: a.related_cosine,
            },
            None => DirectionSpec::Random,
        },
    };
    let generated = synth_generate(&config)?;
    save_corpus(&generated.corpus, &a.out)?;
    println!(
        "wrote {} users ({} posts, dim {}) to {}",
        generated.corpus.users.len(),
        generated.corpus.post_count(),
        config.dim,
        a.out.display()
    );
    if let Some(path) = &a.pool_out {
        let pool = synth_pool(&config, a.pool_users, a.pool_posts)?;
        save_corpus(&pool, path)?;
        println!("wrote anchor pool of {} posts to {}", pool.post_count(), path.display());
    }
    if let Some(path) = &a.truth_out {
        write_json(path, &generated.truth)?;
    }
    Ok(())
}

fn anchor(a: AnchorArgs) -> Result<()> {
    let pool = load_corpus(&a.pool)?;
    let mut anchor = compute_anchor(&pool.condition_only())?;
    if let Some(d) = a.disorder {
        anchor.disorder = d;
    }
    save_anchor(&anchor, &a.out)?;
    println!(
        "anchor for `{}` from {} posts (dim {}) written to {}",
        anchor.disorder,
        anchor.n_source_posts,
        anchor.dim,
        a.out.display()
    );
    Ok(())
}

fn series(a: SeriesArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let set = match a.mode {
        SeriesMode::Anchor => {
            let anchor = load_anchor(a.anchor.as_ref().expect("required by clap"))?;
            build_series_set(&corpus, &anchor)?
        }
        SeriesMode::Direct => build_multichannel_set(&corpus, MultichannelMode::Direct)?,
        SeriesMode::Channels => {
            let table = load_channels(a.channels.as_ref().expect("required by clap"))?;
            build_multichannel_set(&corpus, MultichannelMode::Channels(&table))?
        }
    };
    save_series_set(&set, &a.out)?;
    if let Some(path) = &a.csv {
        let mut w = create(path)?;
        write_series_csv(&set, &mut w)?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    let degraded = set.series.iter().filter(|s| s.degraded).count();
    println!(
        "{} series ({} channel(s), {} degraded) written to {}",
        set.series.len(),
        set.channels,
        degraded,
        a.out.display()
    );
    Ok(())
}

fn feature_rows(set: &SeriesSet) -> Result<Vec<FeatureVector>> {
    Ok(set.series.iter().map(extract_features).collect::<Result<_, _>>()?)
}

fn features(a: FeaturesArgs) -> Result<()> {
    let rows = feature_rows(&load_series_set(&a.series)?)?;
    save_features(&rows, &a.out)?;
    let width = rows.first().map_or(0, |r| r.values.len());
    println!("{} feature vectors of {} features written to {}", rows.len(), width, a.out.display());
    Ok(())
}

fn select(a: SelectArgs, seed: u64) -> Result<()> {
    let rows = load_features(&a.features)?;
    let config = SelectionConfig {
        forest: ForestConfig {
            n_trees: a.trees,
            ..ForestConfig::default()
        },
        top_k: a.top_k,
    };
    let report = rank_by_gini(&rows, &config, seed)?;
    save_selection(&report, &a.out)?;
    println!("kept {} of {} features; strongest:", report.selected.len(), report.ranking.len());
    for r in report.ranking.iter().take(5) {
        println!("  {:<32} {:.4}", r.feature_id, r.importance);
    }
    Ok(())
}

/// Splits `items` by a stratified 80/20 user-level hold-out.
fn hold_out<T: Clone>(items: &[T], label: impl Fn(&T) -> tempanchor_core::Label, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    let labels: Vec<_> = items.iter().map(&label).collect();
    let mask = stratified_mask(&labels, 0.8, seed)?;
    let (mut keep, mut held) = (Vec::new(), Vec::new());
    for (item, m) in items.iter().zip(mask) {
        if m {
            keep.push(item.clone());
        } else {
            held.push(item.clone());
        }
    }
    Ok((keep, held))
}

fn train_config(a: &TrainArgs, kind: ModelKind, seed: u64) -> TrainConfig {
    let base = TrainConfig::for_kind(kind);
    TrainConfig {
        lr: a.lr.unwrap_or(base.lr),
        batch_size: a.batch_size.unwrap_or(base.batch_size),
        epochs: a.epochs.unwrap_or(base.epochs),
        patience: a.patience,
        seeds: vec![seed],
        grid: None,
    }
}

fn sequence_spec(a: &TrainArgs, kind: ModelKind, train_set: &SeriesSet) -> Result<ModelSpec> {
    if let Some(path) = &a.spec {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: ModelSpec = serde_json::from_str(&text).map_err(|e| Error::format(e.line(), e.to_string()))?;
        return Ok(spec.with_input_size(train_set.channels));
    }
    Ok(match kind {
        ModelKind::Lstm => ModelSpec::Lstm {
            in_channels: train_set.channels,
            hidden: a.hidden,
        },
        _ => {
            // size the convolution window to the longest training series
            let longest = train_set.series.iter().map(|s| s.len()).max().unwrap_or(1);
            match ModelSpec::default_cnn1d(train_set.channels) {
                ModelSpec::Cnn1d {
                    in_channels,
                    blocks,
                    activation,
                    ..
                } => ModelSpec::Cnn1d {
                    in_channels,
                    input_len: longest,
                    blocks,
                    activation,
                },
                other => other,
            }
        }
    })
}

fn train_cmd(a: TrainArgs, seed: u64) -> Result<()> {
    let kind = match a.model {
        ModelArg::Feedforward => ModelKind::Feedforward,
        ModelArg::Cnn1d => ModelKind::Cnn1d,
        ModelArg::Lstm => ModelKind::Lstm,
    };
    let config = train_config(&a, kind, seed);
    let (spec, train_set, val, ids) = match (kind, &a.series, &a.features) {
        (ModelKind::Feedforward, _, Some(path)) => {
            let rows = load_features(path)?;
            let (tr, va) = match &a.val {
                Some(v) => (rows, load_features(v)?),
                None => hold_out(&rows, |r| r.label, seed)?,
            };
            let ids = match &a.selection {
                Some(p) => load_selection(p)?.selected,
                None => select_top_k(&rank_by_gini(&tr, &SelectionConfig::default(), seed)?, 30)?,
            };
            let spec = match &a.spec {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                    serde_json::from_str::<ModelSpec>(&text).map_err(|e| Error::format(e.line(), e.to_string()))?
                }
                None => ModelSpec::default_feedforward(ids.len()),
            }
            .with_input_size(ids.len());
            let tr = Dataset::from_features(&tr, &ids)?;
            let va = Dataset::from_features(&va, &ids)?;
            (spec, tr, va, Some(ids))
        }
        (ModelKind::Feedforward, _, None) => bail!("feedforward models train on --features"),
        (_, Some(path), _) => {
            let set = load_series_set(path)?;
            let (tr, va) = match &a.val {
                Some(v) => (set, load_series_set(v)?),
                None => {
                    let (tr, va) = hold_out(&set.series, |s| s.label, seed)?;
                    (
                        SeriesSet {
                            series: tr,
                            ..set.clone()
                        },
                        SeriesSet { series: va, ..set },
                    )
                }
            };
            let spec = sequence_spec(&a, kind, &tr)?;
            (spec, Dataset::from_series(&tr), Dataset::from_series(&va), None)
        }
        (_, None, _) => bail!("{kind:?} models train on --series"),
    };

    let mut model = train(&spec, &train_set, &val, &config, seed)?;
    let choice = move_threshold(&predict(&model, &val)?, &val.labels)?;
    model.threshold = Some(choice.threshold);
    model.feature_ids = ids;
    model.save(&a.out)?;
    if let Some(path) = &a.history_csv {
        let mut w = create(path)?;
        writeln!(w, "epoch,train_loss,val_loss")?;
        for h in &model.history {
            writeln!(w, "{},{},{}", h.epoch, h.train_loss, h.val_loss)?;
        }
        w.flush()?;
    }
    println!(
        "{:?}: {} parameters, best epoch {} of {}, validation F1 {:.3} at threshold {:.4}; saved to {}",
        kind,
        model.parameters.len(),
        model.best_epoch,
        model.history.len(),
        choice.f1,
        choice.threshold,
        a.out.display()
    );
    Ok(())
}

fn print_report(name: &str, r: &EvaluationReport) {
    println!(
        "{name}: F1 {:.3}  precision {:.3}  recall {:.3}  (threshold {:.4}, {} seed(s))",
        r.mean.f1,
        r.mean.precision,
        r.mean.recall,
        r.mean.threshold,
        r.per_seed.len()
    );
}

fn eval(a: EvalArgs) -> Result<()> {
    let model = TrainedModel::load(&a.model)?;
    let threshold = match a.threshold.or(model.threshold) {
        Some(t) => t,
        None => bail!(Error::InvalidConfig(
            "checkpoint carries no validation threshold; pass --threshold".into()
        )),
    };
    let data = match (&a.series, &a.features) {
        (Some(p), _) => Dataset::from_series(&load_series_set(p)?),
        (None, Some(p)) => {
            let Some(ids) = &model.feature_ids else {
                bail!(Error::InvalidConfig("model was not trained on features".into()))
            };
            Dataset::from_features(&load_features(p)?, ids)?
        }
        (None, None) => unreachable!("clap requires one input"),
    };
    let probs = predict(&model, &data)?;
    let report = EvaluationReport::from_seeds(vec![score_predictions(
        &probs,
        &data.labels,
        threshold,
        Some(model.seed),
    )?])?;
    if let Some(path) = &a.out {
        write_json(path, &report)?;
    }
    if let Some(path) = &a.predictions_csv {
        let mut w = create(path)?;
        writeln!(w, "user_id,label,probability,predicted")?;
        for ((id, y), p) in data.ids.iter().zip(&data.labels).zip(&probs) {
            writeln!(w, "{id},{y},{p},{}", u8::from(*p >= threshold))?;
        }
        w.flush()?;
    }
    let c = &report.per_seed[0].confusion;
    print_report("test", &report);
    println!("confusion: tp {} fp {} fn {} tn {}", c.tp, c.fp, c.fn_, c.tn);
    Ok(())
}

fn baseline(a: BaselineArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let anchor = load_anchor(&a.anchor)?;
    let scorer = MeanCosineScorer { anchor: &anchor };
    let config = BaselineConfig {
        chunk_size: a.chunk_size,
        tie: match a.tie {
            TieArg::Control => TieRule::Control,
            TieArg::Condition => TieRule::Condition,
        },
    };
    let threshold = match (a.threshold, &a.val) {
        (Some(t), _) => t,
        (None, Some(v)) => fit_chunk_threshold(&load_corpus(v)?.users, &config, &scorer)?.threshold,
        (None, None) => unreachable!("clap requires one of them"),
    };
    let report = majority_vote_baseline(&corpus.users, &config, &scorer, threshold)?;
    if let Some(path) = &a.out {
        write_json(path, &report)?;
    }
    print_report("majority vote", &report);
    Ok(())
}

fn permute(a: ManifestArgs) -> Result<()> {
    let m = ExperimentManifest::load(&a.manifest)?;
    let r = run_permutation(&m)?;
    print_report("ordered", &r.ordered);
    for (i, f1) in r.permuted_f1.iter().enumerate() {
        println!("permutation {}: F1 {f1:.3}", i + 1);
    }
    println!("gap {:.3}; report in {}", r.gap, m.output_dir.display());
    Ok(())
}

fn transfer(a: ManifestArgs) -> Result<()> {
    let m = ExperimentManifest::load(&a.manifest)?;
    let r = run_transfer(&m)?;
    print_report(&format!("in-domain {}", r.target), &r.in_domain);
    print_report(&format!("{} -> {}", r.source, r.target), &r.transfer);
    println!("retained {:.1}% of in-domain F1; report in {}", 100.0 * r.retained, m.output_dir.display());
    Ok(())
}

fn ablate(a: ManifestArgs) -> Result<()> {
    let m = ExperimentManifest::load(&a.manifest)?;
    let r = run_ablation(&m)?;
    print_report(&format!("{:?} ({} channels)", r.mode, r.channels).to_lowercase(), &r.evaluation);
    println!("report in {}", m.output_dir.display());
    Ok(())
}

fn flops(a: FlopsArgs) -> Result<()> {
    let target = match a.model {
        FlopsModel::Transformer => FlopsTarget::Transformer(TransformerParams {
            n_params: a.n_params,
            n_layer: a.n_layer,
            n_context: a.n_context,
            d_model: a.d_model,
        }),
        kind => {
            let spec = match &a.spec_file {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                    serde_json::from_str(&text).map_err(|e| Error::format(e.line(), e.to_string()))?
                }
                None => match kind {
                    FlopsModel::Feedforward => ModelSpec::Feedforward {
                        layers: a.spec.clone(),
                        activation: tempanchor_core::nn::Activation::Relu,
                    },
                    FlopsModel::Cnn1d => ModelSpec::default_cnn1d(a.in_channels),
                    _ => ModelSpec::Lstm {
                        in_channels: a.in_channels,
                        hidden: a.hidden,
                    },
                },
            };
            FlopsTarget::Model {
                spec,
                seq_len: Some(a.seq_len),
            }
        }
    };
    let est = count_flops(&target)?;
    for row in &est.breakdown {
        println!("{:<48} {:>16}", row.layer, row.flops);
    }
    println!("{:<48} {:>16}", "total", est.total);
    if let Some(path) = &a.out {
        write_json(path, &est)?;
    }
    Ok(())
}
