//! The loss components of the combined objective: instance contrastive
//! (over a per-class memory bank), cross entropy, unknown probability, and
//! the class-anchor transport loss, plus hard-example mining and the
//! contrastive-weight schedule.
//!
//! Gradients are computed analytically with respect to logits and
//! embeddings; the class-anchor term differentiates the transport cost with
//! the optimal plan held fixed.

use std::collections::BTreeMap;
use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ForwardTrace, LossGrads};
use crate::numerics::{log_sum_exp_slice, softmax_entropy, DenseMatrix, DenseVector};
use crate::transport::{sinkhorn_divergence_parts, EmpiricalMeasure};

/// Index convention for the `K + 2` classifier outputs: known classes
/// `0..K`, then the unknown class, then background.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassLayout {
    pub num_known: usize,
}

impl ClassLayout {
    pub fn new(num_known: usize) -> Self {
        Self { num_known }
    }

    pub fn unknown_index(&self) -> usize {
        self.num_known
    }

    pub fn background_index(&self) -> usize {
        self.num_known + 1
    }

    pub fn c_total(&self) -> usize {
        self.num_known + 2
    }

    pub fn is_known(&self, label: usize) -> bool {
        label < self.num_known
    }
}

/// Which terms of the combined objective are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainMode {
    /// Plain cross entropy; all other coefficients forced to zero.
    #[serde(rename = "ce-baseline")]
    CeBaseline,
    /// Contrastive + unknown-probability + cross entropy.
    #[serde(rename = "od-sn")]
    OdSn,
    /// OD-SN plus the class-anchor transport term.
    #[serde(rename = "od-cwa")]
    OdCwa,
}

impl std::fmt::Display for TrainMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TrainMode::CeBaseline => write!(f, "ce-baseline"),
            TrainMode::OdSn => write!(f, "od-sn"),
            TrainMode::OdCwa => write!(f, "od-cwa"),
        }
    }
}

/// Per-class bounded FIFO queues of unit embeddings. Only known-class
/// (foreground) embeddings may be stored, and every stored embedding must
/// be unit norm within 1e-9.
#[derive(Debug, Clone)]
pub struct MemoryBank {
    capacity: usize,
    num_known: usize,
    queues: BTreeMap<usize, VecDeque<DenseVector>>,
}

impl MemoryBank {
    pub fn new(capacity: usize, num_known: usize) -> Self {
        Self { capacity, num_known, queues: BTreeMap::new() }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, class: usize, embedding: DenseVector) -> Result<()> {
        if class >= self.num_known {
            return Err(Error::InvalidArgument(format!(
                "memory bank stores known classes only (class {class} >= {})",
                self.num_known
            )));
        }
        if (embedding.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(
                "memory bank embeddings must be unit norm".into(),
            ));
        }
        let q = self.queues.entry(class).or_default();
        q.push_back(embedding);
        if q.len() > self.capacity {
            q.pop_front();
        }
        Ok(())
    }

    pub fn class_len(&self, class: usize) -> usize {
        self.queues.get(&class).map_or(0, |q| q.len())
    }

    pub fn total_len(&self) -> usize {
        self.queues.values().map(|q| q.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total_len() == 0
    }

    /// All entries in deterministic order: class ascending, FIFO within.
    pub fn entries(&self) -> impl Iterator<Item = (usize, &DenseVector)> {
        self.queues
            .iter()
            .flat_map(|(&c, q)| q.iter().map(move |z| (c, z)))
    }
}

/// Fixed scaled one-hot anchor rows, one per known class, in `R^{C_total}`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    pub anchors: DenseMatrix,
    pub magnitude: f64,
}

impl AnchorSet {
    pub fn num_known(&self) -> usize {
        self.anchors.rows()
    }

    pub fn anchor(&self, class: usize) -> DenseVector {
        self.anchors.row_vector(class)
    }
}

/// Anchor row `c` is `magnitude * one_hot(c)` in `R^{c_total}`.
pub fn build_anchors(num_known: usize, c_total: usize, magnitude: f64) -> Result<AnchorSet> {
    if num_known > c_total {
        return Err(Error::InvalidArgument(format!(
            "{num_known} known classes exceed {c_total} outputs"
        )));
    }
    let mut anchors = DenseMatrix::zeros(num_known, c_total);
    for c in 0..num_known {
        anchors[(c, c)] = magnitude;
    }
    Ok(AnchorSet { anchors, magnitude })
}

/// Value plus gradient of the instance contrastive loss.
#[derive(Debug, Clone)]
pub struct IcResult {
    pub value: f64,
    pub d_embeddings: DenseMatrix,
    /// Samples whose class had no bank entries.
    pub skipped: usize,
    /// True when the bank held nothing at all (value is 0).
    pub empty_bank: bool,
}

/// Supervised instance contrastive loss over the memory bank: for each
/// sample, same-class bank entries are positives and every bank entry is a
/// candidate, at temperature `tau`. Samples whose class has no positives
/// are skipped and counted. Gradients flow to the batch embeddings only
/// (bank entries are detached history).
pub fn instance_contrastive_loss(
    embeddings: &DenseMatrix,
    labels: &[usize],
    bank: &MemoryBank,
    tau: f64,
) -> Result<IcResult> {
    if tau <= 0.0 || !tau.is_finite() {
        return Err(Error::InvalidArgument(format!("tau {tau} must be > 0")));
    }
    let n = embeddings.rows();
    if labels.len() != n {
        return Err(Error::ShapeMismatch("labels/embeddings".into()));
    }
    let mut d = DenseMatrix::zeros(n, embeddings.cols());
    if bank.is_empty() {
        return Ok(IcResult { value: 0.0, d_embeddings: d, skipped: n, empty_bank: true });
    }

    let all: Vec<(usize, &DenseVector)> = bank.entries().collect();
    let mut total = 0.0;
    let mut used = 0;
    let mut skipped = 0;
    let mut scores = vec![0.0_f64; all.len()];

    for i in 0..n {
        let positives = bank.class_len(labels[i]);
        if positives == 0 {
            skipped += 1;
            continue;
        }
        used += 1;
        let z = embeddings.row(i);
        for (k, (_, a)) in all.iter().enumerate() {
            scores[k] = dot(z, a.as_slice()) / tau;
        }
        let lse = log_sum_exp_slice(&scores)?;
        let inv_m = 1.0 / positives as f64;

        let mut loss_i = 0.0;
        for (k, (class, a)) in all.iter().enumerate() {
            let p_k = (scores[k] - lse).exp();
            // every candidate contributes the softmax pullback once
            for (g, &ak) in d.data_mut()[i * embeddings.cols()..].iter_mut().zip(a.as_slice()) {
                *g += p_k * ak / tau;
            }
            if *class == labels[i] {
                loss_i -= inv_m * (scores[k] - lse);
                for (g, &ak) in
                    d.data_mut()[i * embeddings.cols()..].iter_mut().zip(a.as_slice())
                {
                    *g -= inv_m * ak / tau;
                }
            }
        }
        total += loss_i;
    }

    if used == 0 {
        return Ok(IcResult {
            value: 0.0,
            d_embeddings: DenseMatrix::zeros(n, embeddings.cols()),
            skipped,
            empty_bank: false,
        });
    }
    let scale = 1.0 / used as f64;
    for g in d.data_mut() {
        *g *= scale;
    }
    Ok(IcResult { value: total * scale, d_embeddings: d, skipped, empty_bank: false })
}

/// Value plus gradient of a logit-space loss.
#[derive(Debug, Clone)]
pub struct LogitLoss {
    pub value: f64,
    pub d_logits: DenseMatrix,
}

/// Mean negative log softmax probability of the true class.
pub fn cross_entropy_loss(logits: &DenseMatrix, labels: &[usize]) -> Result<LogitLoss> {
    let (n, c) = (logits.rows(), logits.cols());
    if labels.len() != n {
        return Err(Error::ShapeMismatch("labels/logits".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::InvalidArgument(format!("label {bad} out of range {c}")));
    }
    let mut d = DenseMatrix::zeros(n, c);
    let mut total = 0.0;
    let inv_n = 1.0 / n as f64;
    for i in 0..n {
        let row = logits.row(i);
        let lse = log_sum_exp_slice(row)?;
        total -= row[labels[i]] - lse;
        for j in 0..c {
            let p = (row[j] - lse).exp();
            d[(i, j)] = (p - if j == labels[i] { 1.0 } else { 0.0 }) * inv_n;
        }
    }
    Ok(LogitLoss { value: total * inv_n, d_logits: d })
}

/// Uncertainty-weighted unknown-probability loss: raises the unknown-class
/// probability mass computed without the ground-truth logit, weighted by
/// `w = (1 - p_t)^alpha_w * p_t` where `p_t` is the true-class softmax
/// probability. The weight is treated as a constant in the gradient.
pub fn unknown_probability_loss(
    logits: &DenseMatrix,
    labels: &[usize],
    alpha_w: f64,
    unknown_index: usize,
) -> Result<LogitLoss> {
    let weights = up_sample_weights(logits, labels, alpha_w, unknown_index)?;
    unknown_probability_loss_frozen(logits, labels, &weights, unknown_index)
}

/// The per-sample uncertainty weights `w = (1 - p_t)^alpha_w * p_t`.
pub fn up_sample_weights(
    logits: &DenseMatrix,
    labels: &[usize],
    alpha_w: f64,
    unknown_index: usize,
) -> Result<Vec<f64>> {
    let (n, c) = (logits.rows(), logits.cols());
    if labels.len() != n {
        return Err(Error::ShapeMismatch("labels/logits".into()));
    }
    if unknown_index >= c {
        return Err(Error::InvalidArgument("unknown index out of range".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::InvalidArgument(format!("label {bad} out of range {c}")));
    }
    if labels.iter().any(|&l| l == unknown_index) {
        return Err(Error::InvalidArgument(
            "UP loss undefined for unknown ground truth".into(),
        ));
    }
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let row = logits.row(i);
        let full_lse = log_sum_exp_slice(row)?;
        let p_t = (row[labels[i]] - full_lse).exp();
        weights.push((1.0 - p_t).powf(alpha_w) * p_t);
    }
    Ok(weights)
}

/// The loss with the uncertainty weights supplied externally; this is what
/// the gradient actually differentiates (the weights are constants).
pub fn unknown_probability_loss_frozen(
    logits: &DenseMatrix,
    labels: &[usize],
    weights: &[f64],
    unknown_index: usize,
) -> Result<LogitLoss> {
    let (n, c) = (logits.rows(), logits.cols());
    if labels.len() != n || weights.len() != n {
        return Err(Error::ShapeMismatch("labels/weights/logits".into()));
    }
    let mut d = DenseMatrix::zeros(n, c);
    let mut total = 0.0;
    let inv_n = 1.0 / n as f64;
    let mut masked = vec![0.0_f64; c - 1];
    for i in 0..n {
        let row = logits.row(i);
        let target = labels[i];
        let w = weights[i];

        let mut m = 0;
        for j in 0..c {
            if j != target {
                masked[m] = row[j];
                m += 1;
            }
        }
        let masked_lse = log_sum_exp_slice(&masked[..m])?;
        let log_p_u = row[unknown_index] - masked_lse;
        total -= w * log_p_u;

        for j in 0..c {
            if j == target {
                continue;
            }
            let q_j = (row[j] - masked_lse).exp();
            let indicator = if j == unknown_index { 1.0 } else { 0.0 };
            d[(i, j)] = -w * (indicator - q_j) * inv_n;
        }
    }
    Ok(LogitLoss { value: total * inv_n, d_logits: d })
}

/// Value plus logit gradient of the class-anchor transport loss.
#[derive(Debug, Clone)]
pub struct CwaResult {
    pub value: f64,
    pub d_logits: DenseMatrix,
    /// True when the batch held no known-class samples (value is 0).
    pub no_known: bool,
}

/// Class-anchor transport loss: for each known class present in the batch,
/// the debiased Sinkhorn divergence between the class's logit vectors
/// (uniform weights) and a point mass at the class anchor, summed over
/// classes. Gradients differentiate the transport costs with the plans
/// held fixed.
pub fn cwa_loss(
    logits: &DenseMatrix,
    labels: &[usize],
    anchors: &AnchorSet,
    p: f64,
    blur: f64,
) -> Result<CwaResult> {
    let (n, c) = (logits.rows(), logits.cols());
    if labels.len() != n {
        return Err(Error::ShapeMismatch("labels/logits".into()));
    }
    if anchors.anchors.cols() != c {
        return Err(Error::ShapeMismatch("anchor dimension != logit dimension".into()));
    }
    let mut d = DenseMatrix::zeros(n, c);

    let mut classes: Vec<usize> = labels
        .iter()
        .copied()
        .filter(|&l| l < anchors.num_known())
        .collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.is_empty() {
        return Ok(CwaResult { value: 0.0, d_logits: d, no_known: true });
    }

    let mut value = 0.0;
    for &class in &classes {
        let rows: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
        let points: Vec<DenseVector> = rows.iter().map(|&i| logits.row_vector(i)).collect();
        let p_measure = EmpiricalMeasure::uniform(points.clone())?;
        let q_measure = EmpiricalMeasure::dirac(anchors.anchor(class));
        let parts = sinkhorn_divergence_parts(&p_measure, &q_measure, p, blur)?;
        value += parts.value;

        let anchor = anchors.anchor(class);
        // OT(P, Q) term: single target column.
        for (k, &row) in rows.iter().enumerate() {
            let t = parts.plan_pq.plan[(k, 0)];
            if t == 0.0 {
                continue;
            }
            let x = points[k].as_slice();
            let dist = parts.cost_pq[(k, 0)].powf(1.0 / p); // recover L1 distance
            let scale = t * p * dist.powf(p - 1.0);
            for j in 0..c {
                d[(row, j)] += scale * sign(x[j] - anchor[j]);
            }
        }
        // -1/2 OT(P, P) term; both argument slots touch x_k.
        let m = rows.len();
        for k in 0..m {
            let x = points[k].as_slice();
            for j_pt in 0..m {
                if j_pt == k {
                    continue; // zero distance, zero direction
                }
                let t = parts.plan_pp.plan[(k, j_pt)] + parts.plan_pp.plan[(j_pt, k)];
                if t == 0.0 {
                    continue;
                }
                let y = points[j_pt].as_slice();
                let dist = parts.cost_pp[(k, j_pt)].powf(1.0 / p);
                let scale = -0.5 * t * p * dist.powf(p - 1.0);
                let row = rows[k];
                for j in 0..c {
                    d[(row, j)] += scale * sign(x[j] - y[j]);
                }
            }
        }
    }

    Ok(CwaResult { value, d_logits: d, no_known: false })
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Indices of the `k_fg` foreground and `k_bg` background samples with the
/// highest softmax entropy (foreground picks first, then background; ties
/// break toward the lower sample index). Fewer available means all are
/// returned.
pub fn mine_hard_examples(
    logits: &DenseMatrix,
    labels: &[usize],
    layout: &ClassLayout,
    k_fg: usize,
    k_bg: usize,
) -> Result<Vec<usize>> {
    let n = logits.rows();
    if labels.len() != n {
        return Err(Error::ShapeMismatch("labels/logits".into()));
    }
    let mut fg: Vec<(f64, usize)> = Vec::new();
    let mut bg: Vec<(f64, usize)> = Vec::new();
    for i in 0..n {
        let h = softmax_entropy(logits.row(i))?;
        if layout.is_known(labels[i]) {
            fg.push((h, i));
        } else if labels[i] == layout.background_index() {
            bg.push((h, i));
        }
    }
    let pick = |mut xs: Vec<(f64, usize)>, k: usize| -> Vec<usize> {
        xs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        xs.into_iter().take(k).map(|(_, i)| i).collect()
    };
    let mut out = pick(fg, k_fg);
    out.extend(pick(bg, k_bg));
    Ok(out)
}

/// Linear decay of the contrastive weight: `delta0 * (1 - k / k_max)`,
/// clamped at zero (and zero whenever `k >= k_max`).
pub fn delta_schedule(delta0: f64, k: usize, k_max: usize) -> f64 {
    if k >= k_max {
        return 0.0;
    }
    (delta0 * (1.0 - k as f64 / k_max as f64)).max(0.0)
}

/// Coefficients of the combined objective.
#[derive(Debug, Clone, Copy)]
pub struct LossCoefficients {
    pub lambda: f64,
    pub beta: f64,
    pub delta_k: f64,
    pub tau: f64,
    pub alpha_w: f64,
    pub cost_power: f64,
    pub blur: f64,
}

/// One iteration's loss values and the coefficients they were combined with.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_ic: f64,
    pub l_ce: f64,
    pub l_up: f64,
    pub l_cwa: f64,
    pub total: f64,
    pub lambda: f64,
    pub beta: f64,
    pub delta_k: f64,
}

impl LossBreakdown {
    /// The combination identity the breakdown must satisfy.
    pub fn recombined(&self) -> f64 {
        self.lambda * self.l_cwa + self.beta * self.l_up + self.l_ce + self.delta_k * self.l_ic
    }

    pub fn all_finite(&self) -> Option<&'static str> {
        for (name, v) in [
            ("l_ic", self.l_ic),
            ("l_ce", self.l_ce),
            ("l_up", self.l_up),
            ("l_cwa", self.l_cwa),
            ("total", self.total),
        ] {
            if !v.is_finite() {
                return Some(name);
            }
        }
        None
    }
}

/// The combined objective and its gradients with respect to the trace
/// outputs. Cross entropy runs over the whole batch, the unknown
/// probability loss over the mined indices, the contrastive loss over all
/// batch embeddings against the bank, and the class-anchor term over all
/// known-class samples. `ce-baseline` computes cross entropy only; `od-sn`
/// drops the anchor term exactly. A zero `lambda` also skips the anchor
/// computation (the term contributes nothing either way).
#[allow(clippy::too_many_arguments)]
pub fn combined_loss(
    mode: TrainMode,
    trace: &ForwardTrace,
    labels: &[usize],
    bank: &MemoryBank,
    anchors: &AnchorSet,
    coeffs: &LossCoefficients,
    mined: &[usize],
    layout: &ClassLayout,
) -> Result<(LossBreakdown, LossGrads)> {
    let n = trace.batch_len();
    let c = trace.logits.cols();
    let e = trace.embeddings.cols();
    if labels.len() != n {
        return Err(Error::ShapeMismatch("labels/trace".into()));
    }
    let mut grads = LossGrads::zeros(n, c, e);

    let ce = cross_entropy_loss(&trace.logits, labels)?;
    grads.add_assign(
        &LossGrads { d_logits: ce.d_logits, d_embeddings: DenseMatrix::zeros(n, e) },
        1.0,
    );

    let mut breakdown = LossBreakdown {
        l_ic: 0.0,
        l_ce: ce.value,
        l_up: 0.0,
        l_cwa: 0.0,
        total: 0.0,
        lambda: 0.0,
        beta: 0.0,
        delta_k: 0.0,
    };

    if mode != TrainMode::CeBaseline {
        breakdown.beta = coeffs.beta;
        breakdown.delta_k = coeffs.delta_k;

        if !mined.is_empty() && coeffs.beta != 0.0 {
            let sub_logits = DenseMatrix::from_rows(
                &mined.iter().map(|&i| trace.logits.row(i).to_vec()).collect::<Vec<_>>(),
            )?;
            let sub_labels: Vec<usize> = mined.iter().map(|&i| labels[i]).collect();
            let up = unknown_probability_loss(
                &sub_logits,
                &sub_labels,
                coeffs.alpha_w,
                layout.unknown_index(),
            )?;
            breakdown.l_up = up.value;
            for (k, &i) in mined.iter().enumerate() {
                for j in 0..c {
                    grads.d_logits[(i, j)] += coeffs.beta * up.d_logits[(k, j)];
                }
            }
        }

        if coeffs.delta_k != 0.0 {
            let ic = instance_contrastive_loss(&trace.embeddings, labels, bank, coeffs.tau)?;
            breakdown.l_ic = ic.value;
            grads.add_assign(
                &LossGrads {
                    d_logits: DenseMatrix::zeros(n, c),
                    d_embeddings: ic.d_embeddings,
                },
                coeffs.delta_k,
            );
        }
    }

    if mode == TrainMode::OdCwa {
        breakdown.lambda = coeffs.lambda;
        if coeffs.lambda != 0.0 {
            let cwa = cwa_loss(&trace.logits, labels, anchors, coeffs.cost_power, coeffs.blur)?;
            breakdown.l_cwa = cwa.value;
            grads.add_assign(
                &LossGrads { d_logits: cwa.d_logits, d_embeddings: DenseMatrix::zeros(n, e) },
                coeffs.lambda,
            );
        }
    }

    breakdown.total = breakdown.recombined();
    Ok((breakdown, grads))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
