//! Experiment configuration, preprocessing, the training loop, evaluation
//! and model bundles.
//!
//! Every random choice derives from the experiment seed through fixed
//! streams, so a (seed, config, data) triple fixes the checkpoint bytes and
//! the metrics log.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::LabeledInstance;
use super::metrics::{ConfusionMatrix, Metrics};
use super::schema::LabelSchema;
use super::HarnessError;
use crate::depgraph::SdpPath;
use crate::model::{decode, Brcnn, Example, Mode, ModelConfig, RelationLabel, Vocab};
use crate::numcore::{mix_seed, AdaDeltaState, ParamCheckpoint};
use crate::structreg::{extract_sr_sdp, regularize, CutRule};

const STREAM_SPLIT: u64 = 1;
const STREAM_INIT: u64 = 2;
const STREAM_DROPOUT: u64 = 3;
const STREAM_SHUFFLE: u64 = 4;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub metrics_log: Option<PathBuf>,
}

/// Everything a training run reads. Loaded from TOML:
///
/// ```toml
/// seed = 7
/// epochs = 20
/// validation_size = 800
/// schema = "semeval"
///
/// [model]
/// word_dim = 200
///
/// [cut]
/// rule = "prep"
///
/// [paths]
/// train = "data/train.jsonl"
/// checkpoint = "out/model.json"
/// metrics_log = "out/metrics.jsonl"
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `num_relations` is overwritten from the schema.
    pub model: ModelConfig,
    pub cut: CutRule,
    /// `semeval`, `sanwen`, or a path to a schema file.
    pub schema: String,
    pub seed: u64,
    pub epochs: usize,
    pub validation_size: usize,
    /// Instances per update; gradients within a batch are summed.
    pub batch_size: usize,
    /// Stop once an epoch's mean loss falls below this.
    pub target_loss: Option<f64>,
    pub fail_fast: bool,
    pub paths: DataPaths,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelConfig::default(),
            cut: CutRule::None,
            schema: "semeval".into(),
            seed: 0,
            epochs: 10,
            validation_size: 0,
            batch_size: 1,
            target_loss: None,
            fail_fast: true,
            paths: DataPaths::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.model.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.cut.validate()?;
        if self.epochs == 0 {
            return Err(HarnessError::Config("epochs must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(HarnessError::Config("batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// One line of the metrics log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean cross-entropy over training instances, dropout active.
    pub loss: f64,
    /// `lambda * ||theta||^2` after the epoch.
    pub penalty: f64,
    pub macro_f1: f64,
    /// Which instances `macro_f1` was measured on.
    pub split: String,
}

pub fn write_metrics_log(mut w: impl Write, records: &[EpochRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// The SR-SDP between the entity heads of `instance`, the sentence being at
/// position `ordinal` of its corpus.
pub fn instance_path(instance: &LabeledInstance, rule: &CutRule, ordinal: usize) -> SdpPath {
    let rt = regularize(&instance.tree, &rule.for_sentence(ordinal as u64));
    let (a, b) = instance.entity_heads();
    extract_sr_sdp(&rt, a, b)
}

#[derive(Clone, Debug)]
pub struct Prepared {
    pub examples: Vec<Example>,
    pub path_lengths: Vec<usize>,
}

/// Applies the cut rule and featurizes every instance, in parallel.
pub fn prepare(model: &Brcnn, instances: &[LabeledInstance], rule: &CutRule) -> Prepared {
    let pairs: Vec<(Example, usize)> = instances
        .par_iter()
        .enumerate()
        .map(|(i, inst)| {
            let path = instance_path(inst, rule, i);
            let n = path.len();
            (model.example(&path, &inst.tree, inst.label), n)
        })
        .collect();
    let degenerate = pairs.iter().filter(|(_, n)| *n == 1).count();
    if degenerate > 0 {
        log::info!("{degenerate} instances have both entity heads on one token");
    }
    let (examples, path_lengths) = pairs.into_iter().unzip();
    Prepared { examples, path_lengths }
}

fn check_schema(model: &Brcnn, schema: &LabelSchema) -> Result<(), HarnessError> {
    let k = model.config().num_relations;
    if k != schema.k() {
        return Err(super::SchemaError::Mismatch(format!(
            "model has {k} relation types, schema {:?} has {}",
            schema.name,
            schema.k()
        ))
        .into());
    }
    Ok(())
}

/// Decoded labels for prepared examples.
pub fn predict_all(model: &Brcnn, examples: &[Example], alpha: f64) -> Result<Vec<RelationLabel>, HarnessError> {
    let k = model.config().num_relations;
    examples
        .par_iter()
        .map(|ex| {
            let mut pred = model.predict(ex)?;
            let class = decode(&mut pred, alpha);
            Ok(RelationLabel::from_fine(class, k).expect("decoded class in range"))
        })
        .collect()
}

pub fn score(model: &Brcnn, examples: &[Example], alpha: f64) -> Result<Metrics, HarnessError> {
    let preds = predict_all(model, examples, alpha)?;
    let k = model.config().num_relations;
    let confusion = ConfusionMatrix::from_pairs(k, examples.iter().map(|e| e.gold).zip(preds));
    Ok(Metrics::from_confusion(confusion))
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub metrics: Metrics,
    pub predictions: Vec<RelationLabel>,
    pub path_lengths: Vec<usize>,
}

pub fn evaluate(
    model: &Brcnn,
    schema: &LabelSchema,
    instances: &[LabeledInstance],
    rule: &CutRule,
    alpha: f64,
) -> Result<Evaluation, HarnessError> {
    check_schema(model, schema)?;
    let prepared = prepare(model, instances, rule);
    let predictions = predict_all(model, &prepared.examples, alpha)?;
    let confusion = ConfusionMatrix::from_pairs(
        schema.k(),
        prepared
            .examples
            .iter()
            .map(|e| e.gold)
            .zip(predictions.iter().copied()),
    );
    Ok(Evaluation {
        metrics: Metrics::from_confusion(confusion),
        predictions,
        path_lengths: prepared.path_lengths,
    })
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the best validation epoch, or the last epoch when
    /// there is no validation split.
    pub model: Brcnn,
    pub log: Vec<EpochRecord>,
    pub best_epoch: usize,
}

/// Seeded shuffle, then the first `n` instances become validation data.
pub fn split_validation(
    instances: &[LabeledInstance],
    n: usize,
    seed: u64,
) -> Result<(Vec<LabeledInstance>, Vec<LabeledInstance>), HarnessError> {
    if n > 0 && n >= instances.len() {
        return Err(HarnessError::Config(format!(
            "validation_size {n} must be smaller than the {} training instances",
            instances.len()
        )));
    }
    let mut order: Vec<usize> = (0..instances.len()).collect();
    if n > 0 {
        order.shuffle(&mut Xoshiro256PlusPlus::seed_from_u64(mix_seed(seed, STREAM_SPLIT)));
    }
    let (val, train) = order.split_at(n);
    let mut train = train.to_vec();
    train.sort_unstable();
    let pick = |ix: &[usize]| ix.iter().map(|&i| instances[i].clone()).collect();
    Ok((pick(&train), pick(val)))
}

pub fn train(
    config: &ExperimentConfig,
    schema: &LabelSchema,
    instances: &[LabeledInstance],
    embeddings: Option<&HashMap<String, Vec<f64>>>,
) -> Result<TrainOutcome, HarnessError> {
    config.validate()?;
    if instances.is_empty() {
        return Err(HarnessError::Config("no training instances".into()));
    }
    let mut model_config = config.model.clone();
    model_config.num_relations = schema.k();
    let (train_set, val_set) = split_validation(instances, config.validation_size, config.seed)?;

    let vocab = Vocab::build(train_set.iter().map(|i| &i.tree), model_config.min_word_count);
    let mut model = Brcnn::new(model_config, vocab, mix_seed(config.seed, STREAM_INIT))?;
    if let Some(vectors) = embeddings {
        let hits = model.load_word_vectors(vectors)?;
        log::info!(
            "pre-trained vectors for {hits} of {} words",
            model.vocab().word_rows() - 1
        );
    }
    let train_data = prepare(&model, &train_set, &config.cut);
    let val_data = prepare(&model, &val_set, &config.cut);
    let alpha = model.config().alpha;

    let mut optimizer = AdaDeltaState::with_defaults(model.store());
    let dropout_base = mix_seed(config.seed, STREAM_DROPOUT);
    let mut step: u64 = 0;
    let mut log = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, Brcnn)> = None;

    for epoch in 1..=config.epochs {
        let mut order: Vec<usize> = (0..train_data.examples.len()).collect();
        let shuffle_seed = mix_seed(mix_seed(config.seed, STREAM_SHUFFLE), epoch as u64);
        order.shuffle(&mut Xoshiro256PlusPlus::seed_from_u64(shuffle_seed));

        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let first = step;
            let run = |(j, &i): (usize, &usize)| {
                let mode = Mode::Train {
                    seed: mix_seed(dropout_base, first + j as u64),
                };
                model
                    .objective(&train_data.examples[i], mode)
                    .map_err(|source| HarnessError::Instance {
                        id: train_set[i].id.clone(),
                        source,
                    })
            };
            let objectives: Vec<_> = if batch.len() > 1 {
                batch.par_iter().enumerate().map(run).collect::<Result<_, _>>()?
            } else {
                batch.iter().enumerate().map(run).collect::<Result<_, _>>()?
            };
            step += batch.len() as u64;
            let store = model.store_mut();
            store.zero_grads();
            for obj in &objectives {
                loss_sum += obj.data_loss;
                store.accumulate(&obj.grads);
            }
            model.accumulate_penalty_grad();
            optimizer.step(model.store_mut());
        }

        let loss = loss_sum / train_data.examples.len() as f64;
        let (split, eval_on) = if val_data.examples.is_empty() {
            ("train", &train_data.examples)
        } else {
            ("validation", &val_data.examples)
        };
        let macro_f1 = score(&model, eval_on, alpha)?.macro_f1;
        log::info!("epoch {epoch}: loss {loss:.6} {split} macro-F1 {macro_f1:.4}");
        log.push(EpochRecord {
            epoch,
            loss,
            penalty: model.penalty(),
            macro_f1,
            split: split.into(),
        });
        let better = match &best {
            None => true,
            Some((f, _, _)) => val_data.examples.is_empty() || macro_f1 > *f,
        };
        if better {
            best = Some((macro_f1, epoch, model.clone()));
        }
        if config.target_loss.is_some_and(|t| loss < t) {
            log::info!("loss below target after epoch {epoch}");
            break;
        }
    }
    let (_, best_epoch, model) = best.expect("at least one epoch");
    Ok(TrainOutcome { model, log, best_epoch })
}

pub const BUNDLE_FORMAT: &str = "srbrcnn-model";
pub const BUNDLE_VERSION: u32 = 1;

/// A trained model with everything needed to apply it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format: String,
    pub version: u32,
    pub schema: LabelSchema,
    pub cut: CutRule,
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub params: ParamCheckpoint,
}

impl ModelBundle {
    pub fn new(model: &Brcnn, schema: &LabelSchema, cut: &CutRule) -> Self {
        ModelBundle {
            format: BUNDLE_FORMAT.into(),
            version: BUNDLE_VERSION,
            schema: schema.clone(),
            cut: cut.clone(),
            config: model.config().clone(),
            vocab: model.vocab().clone(),
            params: ParamCheckpoint::from_store(model.store()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("bundle serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let bundle: ModelBundle = serde_json::from_str(text).map_err(|e| HarnessError::Checkpoint(e.to_string()))?;
        if bundle.format != BUNDLE_FORMAT || bundle.version != BUNDLE_VERSION {
            return Err(HarnessError::Checkpoint(format!(
                "unsupported bundle {} v{}",
                bundle.format, bundle.version
            )));
        }
        Ok(bundle)
    }

    /// Creates missing parent directories.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), HarnessError> {
        if let Some(dir) = path.as_ref().parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        }
        fs::write(&path, self.to_json()).map_err(|e| HarnessError::io(&path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
        Self::from_json(&text)
    }

    pub fn into_model(self) -> Result<(Brcnn, LabelSchema, CutRule), HarnessError> {
        let store = self
            .params
            .into_store()
            .map_err(|e| HarnessError::Checkpoint(e.to_string()))?;
        let model = Brcnn::from_parts(self.config, self.vocab, store)?;
        Ok((model, self.schema, self.cut))
    }
}
