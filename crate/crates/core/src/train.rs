//! Supervised training loops (classification, segmentation), evaluation
//! metrics and the sampling-resolution sensitivity sweep.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{config_hash, Dataset, Record};
use crate::error::{Error, Result};
use crate::model::{argmax_rows, ModelConfig, Task, UvNet};
use crate::nn::Adam;
use crate::sampler::SamplingConfig;
use crate::synth::split_by_face_bins;

pub const METRICS_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub test_fraction: f64,
    /// Stop once an epoch's running train accuracy reaches this value.
    pub stop_train_accuracy: Option<f64>,
    pub eval_batch: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 100, batch_size: 32, lr: 1e-3, seed: 0, test_fraction: 0.2, stop_train_accuracy: None, eval_batch: 64 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.eval_batch == 0 {
            return Err(Error::Config("epochs and batch sizes must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.lr)));
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(Error::Config(format!("test fraction {} outside [0, 1)", self.test_fraction)));
        }
        Ok(())
    }
}

/// Accuracy, per-class accuracy and (segmentation) IoU over one dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub loss: f64,
    pub accuracy: f64,
    /// `None` for classes absent from the targets.
    pub per_class_accuracy: Vec<Option<f64>>,
    pub iou: Option<Vec<Option<f64>>>,
    pub mean_iou: Option<f64>,
    pub targets: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test: EvalMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub format_version: u32,
    pub task: Task,
    pub config_hash: String,
    pub dataset_hash: String,
    pub train_records: usize,
    pub test_records: usize,
    pub parameter_count: usize,
    pub epochs_run: usize,
    pub final_metrics: EvalMetrics,
    pub best_test_accuracy: f64,
}

/// Targets of one record: its class, or one label per face.
pub fn targets(task: Task, r: &Record) -> Result<Vec<usize>> {
    match task {
        Task::Classification => Ok(vec![r.class]),
        Task::Segmentation => Ok(r.face_labels.clone()),
        Task::Contrastive => Err(Error::Config("contrastive task has no labels".into())),
    }
}

fn batch_targets(task: Task, records: &[&Record]) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for r in records {
        out.extend(targets(task, r)?);
    }
    Ok(out)
}

/// Number of output classes the task needs on `ds`.
pub fn label_count(task: Task, ds: &Dataset) -> usize {
    match task {
        Task::Classification => ds.class_count(),
        Task::Segmentation => ds.segment_names.len().max(ds.records.iter().flat_map(|r| r.face_labels.iter().map(|l| l + 1)).max().unwrap_or(0)),
        Task::Contrastive => 0,
    }
}

/// Evaluates `model` on every record of `ds` in evaluation mode.
pub fn evaluate(model: &mut UvNet, ds: &Dataset, eval_batch: usize) -> Result<EvalMetrics> {
    let task = model.config.task;
    let classes = model.config.num_classes;
    let mut preds = Vec::new();
    let mut truth = Vec::new();
    let mut loss_sum = 0.0;
    for chunk in ds.records.chunks(eval_batch.max(1)) {
        let refs: Vec<&Record> = chunk.iter().collect();
        let graphs: Vec<_> = refs.iter().map(|r| &r.graph).collect();
        let labels = batch_targets(task, &refs)?;
        let batch = model.batch(&graphs, None)?;
        let (f, loss) = model.supervised_loss(&batch, &labels, false)?;
        loss_sum += f.tape.value(loss).item() * labels.len() as f64;
        preds.extend(argmax_rows(f.tape.value(f.output)));
        truth.extend(labels);
    }
    let n = truth.len();
    if n == 0 {
        return Err(Error::Config("cannot evaluate on an empty dataset".into()));
    }
    let correct = preds.iter().zip(&truth).filter(|(p, t)| p == t).count();
    let per_class_accuracy = (0..classes)
        .map(|c| {
            let total = truth.iter().filter(|&&t| t == c).count();
            let hit = preds.iter().zip(&truth).filter(|&(&p, &t)| t == c && p == c).count();
            (total > 0).then(|| hit as f64 / total as f64)
        })
        .collect();
    let (iou, mean_iou) = if task == Task::Segmentation {
        let per: Vec<Option<f64>> = (0..classes).map(|c| class_iou(&preds, &truth, c)).collect();
        let present: Vec<f64> = per.iter().flatten().copied().collect();
        let mean = present.iter().sum::<f64>() / present.len().max(1) as f64;
        (Some(per), Some(mean))
    } else {
        (None, None)
    };
    Ok(EvalMetrics { loss: loss_sum / n as f64, accuracy: correct as f64 / n as f64, per_class_accuracy, iou, mean_iou, targets: n })
}

/// `TP / (TP + FP + FN)` for class `c`; `None` if `c` occurs in neither.
pub fn class_iou(preds: &[usize], truth: &[usize], c: usize) -> Option<f64> {
    let (mut tp, mut union) = (0usize, 0usize);
    for (&p, &t) in preds.iter().zip(truth) {
        if p == c && t == c {
            tp += 1;
        }
        if p == c || t == c {
            union += 1;
        }
    }
    (union > 0).then(|| tp as f64 / union as f64)
}

/// Splits `ds` by face-count bins into (train, test).
pub fn split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let counts: Vec<usize> = ds.records.iter().map(|r| r.graph.node_count()).collect();
    let (train, test) = split_by_face_bins(&counts, test_fraction, seed)?;
    Ok((ds.subset(&train), ds.subset(&test)))
}

/// Trains `model` on `train`, evaluating on `test` after every epoch.
/// `on_epoch` receives each epoch's metrics as they are produced.
pub fn fit(model: &mut UvNet, train: &Dataset, test: &Dataset, cfg: &TrainConfig, mut on_epoch: impl FnMut(&EpochMetrics) -> Result<()>) -> Result<Vec<EpochMetrics>> {
    cfg.validate()?;
    let task = model.config.task;
    if task == Task::Contrastive {
        return Err(Error::Config("use the contrastive trainer for clr models".into()));
    }
    let needed = label_count(task, train).max(label_count(task, test));
    if needed > model.config.num_classes {
        return Err(Error::Config(format!("dataset has {needed} labels, model has {} outputs", model.config.num_classes)));
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::Config("train and test splits must be nonempty".into()));
    }
    let mut adam = Adam::new(cfg.lr);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::new();
    for epoch in 1..=cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);
        let (mut loss_sum, mut hits, mut seen) = (0.0, 0usize, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let refs: Vec<&Record> = chunk.iter().map(|&i| &train.records[i]).collect();
            let graphs: Vec<_> = refs.iter().map(|r| &r.graph).collect();
            let labels = batch_targets(task, &refs)?;
            let batch = model.batch(&graphs, None)?;
            let (f, loss) = model.supervised_loss(&batch, &labels, true)?;
            let grads = f.tape.param_grads(&f.tape.backward(loss)?, &model.store);
            adam.step(&mut model.store, &grads);
            loss_sum += f.tape.value(loss).item() * labels.len() as f64;
            hits += argmax_rows(f.tape.value(f.output)).iter().zip(&labels).filter(|(p, t)| p == t).count();
            seen += labels.len();
        }
        let metrics = EpochMetrics {
            epoch,
            train_loss: loss_sum / seen as f64,
            train_accuracy: hits as f64 / seen as f64,
            test: evaluate(model, test, cfg.eval_batch)?,
        };
        log::info!("epoch {epoch}: loss {:.4} train acc {:.4} test acc {:.4}", metrics.train_loss, metrics.train_accuracy, metrics.test.accuracy);
        on_epoch(&metrics)?;
        let stop = cfg.stop_train_accuracy.is_some_and(|t| metrics.train_accuracy >= t);
        history.push(metrics);
        if stop {
            break;
        }
    }
    Ok(history)
}

/// Summary of a finished run. Contains no timings, so it is reproducible.
pub fn summarize(model: &UvNet, cfg: &TrainConfig, train: &Dataset, test: &Dataset, full: &Dataset, history: &[EpochMetrics]) -> Result<TrainSummary> {
    let last = history.last().ok_or_else(|| Error::Contract("no epochs were run".into()))?;
    let run = serde_json::json!({ "model": model.config, "train": cfg });
    Ok(TrainSummary {
        format_version: METRICS_FORMAT_VERSION,
        task: model.config.task,
        config_hash: config_hash(&run),
        dataset_hash: config_hash(&full.config),
        train_records: train.len(),
        test_records: test.len(),
        parameter_count: model.parameter_count(),
        epochs_run: history.len(),
        final_metrics: last.test.clone(),
        best_test_accuracy: history.iter().map(|m| m.test.accuracy).fold(0.0, f64::max),
    })
}

/// A complete supervised run: split, build, fit, summarize.
pub struct Run {
    pub model: UvNet,
    pub history: Vec<EpochMetrics>,
    pub summary: TrainSummary,
}

pub fn run_supervised(ds: &Dataset, model_cfg: &ModelConfig, cfg: &TrainConfig, on_epoch: impl FnMut(&EpochMetrics) -> Result<()>) -> Result<Run> {
    let (train, test) = split(ds, cfg.test_fraction, cfg.seed)?;
    let mut model = UvNet::new(model_cfg.clone(), cfg.seed)?;
    let history = fit(&mut model, &train, &test, cfg, on_epoch)?;
    let summary = summarize(&model, cfg, &train, &test, ds, &history)?;
    Ok(Run { model, history, summary })
}

/// One metrics line per epoch, newline-terminated JSON.
pub fn metrics_line(m: &EpochMetrics) -> Result<String> {
    Ok(serde_json::to_string(m)? + "\n")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub m: usize,
    pub n: usize,
    pub accuracy: f64,
    pub epochs_run: usize,
    /// Whether the face-adjacency graph (topology) was available to the model.
    pub topology: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub format_version: u32,
    pub config_hash: String,
    pub rows: Vec<SensitivityRow>,
    pub max_drop: f64,
}

/// Retrains the classifier at each square grid resolution and reports
/// test accuracy per resolution. The dataset must carry its solids.
pub fn sensitivity(ds: &Dataset, model_cfg: &ModelConfig, cfg: &TrainConfig, resolutions: &[usize]) -> Result<SensitivityReport> {
    if resolutions.is_empty() {
        return Err(Error::Config("no resolutions requested".into()));
    }
    if let Some(&r) = resolutions.iter().find(|&&r| r < 2) {
        return Err(Error::Config(format!("resolution {r} is below 2")));
    }
    let mut rows = Vec::new();
    for &r in resolutions {
        let sampling = SamplingConfig { normals: ds.sampling.normals, tangents: ds.sampling.tangents, ..SamplingConfig::with_resolution(r, r) };
        let resampled = ds.resampled(&sampling)?;
        let run = run_supervised(&resampled, model_cfg, cfg, |_| Ok(()))?;
        log::info!("resolution {r}: accuracy {:.4}", run.summary.final_metrics.accuracy);
        rows.push(SensitivityRow {
            m: r,
            n: r,
            accuracy: run.summary.final_metrics.accuracy,
            epochs_run: run.summary.epochs_run,
            topology: model_cfg.variant != crate::model::Variant::FeaturesOnly,
        });
    }
    let best = rows.iter().map(|r| r.accuracy).fold(f64::NEG_INFINITY, f64::max);
    let worst = rows.iter().map(|r| r.accuracy).fold(f64::INFINITY, f64::min);
    let hash = config_hash(&serde_json::json!({ "model": model_cfg, "train": cfg, "resolutions": resolutions }));
    Ok(SensitivityReport { format_version: METRICS_FORMAT_VERSION, config_hash: hash, rows, max_drop: best - worst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_dataset, GenConfig};

    fn tiny_model(task: Task, classes: usize) -> ModelConfig {
        ModelConfig {
            surface_widths: [4, 6, 8],
            curve_widths: [4, 6, 8],
            embed_dim: 8,
            graph_dim: 12,
            head_hidden: 8,
            mlp_hidden: 24,
            projection_dim: 6,
            ..ModelConfig::default()
        }
        .with_task(task, classes)
    }

    fn toy() -> Dataset {
        let mut g = GenConfig::four_shapes(11, 5);
        g.sampling = SamplingConfig::with_resolution(4, 4);
        gen_dataset(&g).unwrap()
    }

    #[test]
    fn iou_by_hand() {
        let preds = [0, 0, 1, 1, 2];
        let truth = [0, 1, 1, 1, 0];
        assert_eq!(class_iou(&preds, &truth, 0), Some(1.0 / 3.0));
        assert_eq!(class_iou(&preds, &truth, 1), Some(2.0 / 3.0));
        assert_eq!(class_iou(&preds, &truth, 2), Some(0.0));
        assert_eq!(class_iou(&preds, &truth, 3), None);
    }

    #[test]
    fn training_is_deterministic_and_reduces_loss() {
        let ds = toy();
        let cfg = TrainConfig { epochs: 6, batch_size: 8, lr: 1e-2, seed: 3, ..Default::default() };
        let mut lines = Vec::new();
        let a = run_supervised(&ds, &tiny_model(Task::Classification, 4), &cfg, |m| {
            lines.push(metrics_line(m)?);
            Ok(())
        })
        .unwrap();
        let b = run_supervised(&ds, &tiny_model(Task::Classification, 4), &cfg, |_| Ok(())).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(serde_json::to_string(&a.summary).unwrap(), serde_json::to_string(&b.summary).unwrap());
        assert_eq!(lines.len(), 6);
        assert!(a.history.last().unwrap().train_loss < a.history[0].train_loss);
        assert_eq!(a.summary.train_records + a.summary.test_records, 20);
    }

    #[test]
    fn segmentation_reports_iou() {
        let ds = toy();
        let cfg = TrainConfig { epochs: 2, batch_size: 8, ..Default::default() };
        let run = run_supervised(&ds, &tiny_model(Task::Segmentation, 3), &cfg, |_| Ok(())).unwrap();
        let m = &run.summary.final_metrics;
        assert_eq!(m.iou.as_ref().unwrap().len(), 3);
        assert!(m.mean_iou.unwrap() >= 0.0 && m.mean_iou.unwrap() <= 1.0);
        assert!(m.targets > 20);
    }

    #[test]
    fn mismatched_tasks_are_config_errors() {
        let ds = toy();
        let cfg = TrainConfig { epochs: 1, ..Default::default() };
        assert!(matches!(run_supervised(&ds, &tiny_model(Task::Classification, 2), &cfg, |_| Ok(())), Err(Error::Config(_))));
        assert!(matches!(run_supervised(&ds, &tiny_model(Task::Contrastive, 2), &cfg, |_| Ok(())), Err(Error::Config(_))));
        assert!(sensitivity(&ds, &tiny_model(Task::Classification, 4), &cfg, &[1]).is_err());
    }

    #[test]
    fn sensitivity_has_one_row_per_resolution() {
        let ds = toy();
        let cfg = TrainConfig { epochs: 1, batch_size: 10, ..Default::default() };
        let rep = sensitivity(&ds, &tiny_model(Task::Classification, 4), &cfg, &[4, 3]).unwrap();
        assert_eq!(rep.rows.iter().map(|r| r.m).collect::<Vec<_>>(), vec![4, 3]);
        assert!(rep.rows.iter().all(|r| r.topology));
    }
}
