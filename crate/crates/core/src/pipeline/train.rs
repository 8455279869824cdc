//! The training loop over the combined objective, and evaluation of a
//! trained model into detection records and metrics.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{
    self, ClusterIndices, DetectionRecord, LabeledEmbedding, GT_BACKGROUND, GT_UNKNOWN,
};
use crate::losses::{
    build_anchors, combined_loss, delta_schedule, mine_hard_examples, ClassLayout,
    LossBreakdown, LossCoefficients, MemoryBank, TrainMode,
};
use crate::model::{
    apply_spectral_norm, backward, forward, ModelParams, SgdOptimizer,
};
use crate::numerics::{log_sum_exp_slice, DenseMatrix, Rng};

use super::dataset::{SplitData, SyntheticDataset};
use super::TrainConfig;

const INIT_STREAM: u64 = 0x696e6974; // "init"
const BATCH_STREAM: u64 = 0x62617463; // "batc"

/// Final metrics of an evaluation run. Average precisions and accuracy are
/// fractions in [0, 1]; WI is in percent (its customary presentation).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalMetrics {
    /// Closed-set accuracy over known-class test points.
    pub accuracy: f64,
    /// Mean AP over known classes.
    pub map_known: f64,
    /// AP of the unknown class; absent when the test split has no unknowns.
    pub ap_unknown: Option<f64>,
    /// Wilderness impact at the headline operating point.
    pub wi: f64,
    /// The headline threshold: known-class recall closest to 0.8.
    pub wi_threshold: f64,
    /// WI over the fixed threshold grid (threshold, value).
    pub wi_grid: Vec<(f64, f64)>,
    /// Misclassified unknown instances at the headline threshold.
    pub aose: usize,
    /// Intra-class distance variance over mean centroid separation.
    pub sigma_mu: Option<f64>,
    pub cluster: Option<ClusterIndices>,
}

/// Everything a run produces besides the parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub config_hash: String,
    pub mode: TrainMode,
    pub seed: u64,
    pub loss_series: Vec<LossBreakdown>,
    pub metrics: Option<EvalMetrics>,
    pub wall_clock_seconds: f64,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Runs `iterations` steps of: forward, mine hard examples, combined loss,
/// backward, SGD step (with spectral norm reapplied), bank update, schedule
/// update. Deterministic given `(config, dataset)`. A non-finite loss
/// aborts with a diagnostic naming the offending component.
pub fn train(cfg: &TrainConfig, dataset: &SyntheticDataset) -> Result<(ModelParams, RunReport)> {
    let cfg = cfg.normalized();
    cfg.validate()?;
    let started = Instant::now();
    let layout = ClassLayout::new(cfg.num_known);
    let dims = cfg.model_dims();

    let mut init_rng = Rng::new(cfg.seed).derive(INIT_STREAM);
    let mut params = ModelParams::init(&dims, &mut init_rng);
    let sn_iters = if cfg.spectral_norm { cfg.sn_iters } else { 0 };
    if cfg.spectral_norm {
        apply_spectral_norm(&mut params, cfg.sn_iters)?;
    }

    let anchors = build_anchors(cfg.num_known, layout.c_total(), cfg.alpha_scale)?;
    let mut bank = MemoryBank::new(cfg.bank_capacity, cfg.num_known);
    let mut optimizer = SgdOptimizer::new(cfg.momentum, cfg.weight_decay, sn_iters);
    let mut batch_rng = Rng::new(cfg.seed).derive(BATCH_STREAM);

    let groups = group_indices(&dataset.train, &layout);
    let mut loss_series = Vec::with_capacity(cfg.iterations);

    for k in 0..cfg.iterations {
        let delta_k = delta_schedule(cfg.delta0, k, cfg.iterations);
        let coeffs = LossCoefficients {
            lambda: cfg.lambda,
            beta: cfg.beta,
            delta_k,
            tau: cfg.tau,
            alpha_w: cfg.alpha_w,
            cost_power: cfg.cost_power,
            blur: cfg.blur,
        };

        let batch_idx = stratified_batch(&groups, cfg.batch_size, &mut batch_rng);
        let (batch, labels) = gather(&dataset.train, &batch_idx)?;

        let trace = forward(&params, &batch, cfg.alpha_scale)?;
        let mined = mine_hard_examples(&trace.logits, &labels, &layout, cfg.k_fg, cfg.k_bg)?;
        let (breakdown, loss_grads) = combined_loss(
            cfg.mode, &trace, &labels, &bank, &anchors, &coeffs, &mined, &layout,
        )?;
        if let Some(component) = breakdown.all_finite() {
            return Err(Error::NonFinite(format!("{component} at iteration {k}")));
        }

        let grads = backward(&params, &trace, &loss_grads)?;
        if !grads.all_finite() {
            return Err(Error::NonFinite(format!("gradients at iteration {k}")));
        }
        optimizer.step(&mut params, &grads, cfg.lr)?;

        // Correctly classified foreground embeddings feed the bank.
        for (row, &label) in labels.iter().enumerate() {
            if !layout.is_known(label) {
                continue;
            }
            if argmax(trace.logits.row(row)) != label {
                continue;
            }
            let z = trace.embeddings.row_vector(row);
            if (z.norm() - 1.0).abs() <= 1e-9 {
                bank.push(label, z)?;
            }
        }

        loss_series.push(breakdown);
    }

    let report = RunReport {
        config_hash: cfg.config_hash(),
        mode: cfg.mode,
        seed: cfg.seed,
        loss_series,
        metrics: None,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    Ok((params, report))
}

/// Classify every test point (argmax over the classifier outputs, score =
/// max softmax probability), build detection records, and compute the full
/// metric suite. Background predictions produce no record.
pub fn evaluate(
    params: &ModelParams,
    dataset: &SyntheticDataset,
    cfg: &TrainConfig,
) -> Result<EvalMetrics> {
    let layout = ClassLayout::new(cfg.num_known);
    let trace = forward(params, &dataset.test.points, cfg.alpha_scale)?;
    let labels = &dataset.test.labels;
    let n = labels.len();

    let mut records = Vec::new();
    let mut correct_known = 0usize;
    let mut total_known = 0usize;
    let mut embeddings = Vec::new();
    for i in 0..n {
        let row = trace.logits.row(i);
        let pred = argmax(row);
        let lse = log_sum_exp_slice(row)?;
        let score = (row[pred] - lse).exp();

        if layout.is_known(labels[i]) {
            total_known += 1;
            if pred == labels[i] {
                correct_known += 1;
            }
            embeddings.push(LabeledEmbedding {
                embedding: trace.embeddings.row_vector(i),
                class_id: labels[i],
            });
        }

        if pred == layout.background_index() {
            continue;
        }
        let pred_code =
            if pred == layout.unknown_index() { GT_UNKNOWN } else { pred as i32 };
        let gt_code = if layout.is_known(labels[i]) {
            labels[i] as i32
        } else if labels[i] == layout.unknown_index() {
            GT_UNKNOWN
        } else {
            GT_BACKGROUND
        };
        records.push(DetectionRecord {
            id: format!("t{i}"),
            pred: pred_code,
            score,
            gt: gt_code,
            matched: gt_code != GT_BACKGROUND,
        });
    }

    let known_set: Vec<i32> = (0..cfg.num_known as i32).collect();
    let per_class_gt: Vec<usize> = (0..cfg.num_known)
        .map(|c| labels.iter().filter(|&&l| l == c).count())
        .collect();

    let mut ap_sum = 0.0;
    let mut ap_classes = 0usize;
    for c in 0..cfg.num_known {
        if per_class_gt[c] == 0 {
            continue;
        }
        ap_sum += eval::average_precision_for_class(&records, c as i32, per_class_gt[c])?;
        ap_classes += 1;
    }
    let map_known = if ap_classes > 0 { ap_sum / ap_classes as f64 } else { 0.0 };

    let unknown_gt_total = labels
        .iter()
        .filter(|&&l| l == layout.unknown_index())
        .count();
    let ap_unknown = if unknown_gt_total > 0 {
        Some(eval::average_precision_for_class(
            &records,
            GT_UNKNOWN,
            unknown_gt_total,
        )?)
    } else {
        None
    };

    let wi_threshold =
        eval::recall_operating_threshold(&records, &known_set, total_known, 0.8)?;
    let wi = eval::wilderness_impact(&records, &known_set, wi_threshold)?;
    let grid: Vec<f64> = (1..20).map(|i| i as f64 * 0.05).collect();
    let wi_grid = eval::wilderness_impact_grid(&records, &known_set, &grid);
    let aose = eval::aose(&records, wi_threshold);

    let sigma_mu = eval::compactness_ratio(&embeddings).ok();
    let cluster = eval::cluster_indices(&embeddings).ok();

    Ok(EvalMetrics {
        accuracy: correct_known as f64 / total_known.max(1) as f64,
        map_known,
        ap_unknown,
        wi,
        wi_threshold,
        wi_grid,
        aose,
        sigma_mu,
        cluster,
    })
}

/// The full pipeline for one configuration: generate, train, evaluate.
pub struct ExperimentOutput {
    pub params: ModelParams,
    pub dataset: SyntheticDataset,
    pub report: RunReport,
}

pub fn run_experiment(cfg: &TrainConfig) -> Result<ExperimentOutput> {
    let dataset = super::generate_dataset(cfg)?;
    run_experiment_on(cfg, dataset)
}

/// Same as [`run_experiment`] but on an externally supplied dataset.
pub fn run_experiment_on(
    cfg: &TrainConfig,
    dataset: SyntheticDataset,
) -> Result<ExperimentOutput> {
    let started = Instant::now();
    let (params, mut report) = train(cfg, &dataset)?;
    report.metrics = Some(evaluate(&params, &dataset, cfg)?);
    report.wall_clock_seconds = started.elapsed().as_secs_f64();
    Ok(ExperimentOutput { params, dataset, report })
}

fn group_indices(split: &SplitData, layout: &ClassLayout) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); layout.c_total()];
    for (i, &label) in split.labels.iter().enumerate() {
        groups[label].push(i);
    }
    groups.into_iter().filter(|g| !g.is_empty()).collect()
}

/// Near-equal quota per class group, sampled without replacement inside
/// each group.
fn stratified_batch(groups: &[Vec<usize>], batch_size: usize, rng: &mut Rng) -> Vec<usize> {
    let g = groups.len();
    let base = batch_size / g;
    let remainder = batch_size % g;
    let mut batch = Vec::with_capacity(batch_size);
    for (gi, group) in groups.iter().enumerate() {
        let quota = base + usize::from(gi < remainder);
        for local in rng.sample_indices(group.len(), quota) {
            batch.push(group[local]);
        }
    }
    batch
}

fn gather(split: &SplitData, indices: &[usize]) -> Result<(DenseMatrix, Vec<usize>)> {
    let cols = split.points.cols();
    let mut data = Vec::with_capacity(indices.len() * cols);
    let mut labels = Vec::with_capacity(indices.len());
    for &i in indices {
        data.extend_from_slice(split.points.row(i));
        labels.push(split.labels[i]);
    }
    Ok((DenseMatrix::from_vec(indices.len(), cols, data)?, labels))
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
