//! Open-set detection metrics over scored records, and cluster-validity
//! indices over labeled embeddings.
//!
//! Records use the reserved ground-truth codes [`GT_BACKGROUND`] (-1) and
//! [`GT_UNKNOWN`] (-2); non-negative codes are known classes. Predictions
//! are a known class or the unknown class, never background. The same
//! record schema is ingested from external JSON-lines dumps, where `matched`
//! carries the dump producer's detection-to-ground-truth matching.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::DenseVector;

/// Ground-truth code for background / no object.
pub const GT_BACKGROUND: i32 = -1;
/// Ground-truth (and prediction) code for the unknown class.
pub const GT_UNKNOWN: i32 = -2;

/// One scored prediction joined to ground truth.
///
/// `id` identifies the matched ground-truth instance (the sample itself in
/// the synthetic pipeline); duplicate-suppression in AOSE and the recall
/// denominators derived from dumps key on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub id: String,
    pub pred: i32,
    pub score: f64,
    pub gt: i32,
    pub matched: bool,
}

impl DetectionRecord {
    pub fn validate(&self) -> Result<()> {
        if self.pred != GT_UNKNOWN && self.pred < 0 {
            return Err(Error::InvalidArgument(format!(
                "record {}: pred {} is neither a known class nor the unknown code",
                self.id, self.pred
            )));
        }
        if !self.score.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "record {}: non-finite score",
                self.id
            )));
        }
        if self.gt < GT_UNKNOWN {
            return Err(Error::InvalidArgument(format!(
                "record {}: ground-truth code {} is not recognized",
                self.id, self.gt
            )));
        }
        Ok(())
    }

    fn is_true_positive(&self) -> bool {
        self.matched && self.gt == self.pred
    }
}

/// An embedding with its known-class label, the unit of the
/// cluster-validity computations.
#[derive(Debug, Clone)]
pub struct LabeledEmbedding {
    pub embedding: DenseVector,
    pub class_id: usize,
}

/// One point of a precision/recall curve, at a distinct score threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Precision/recall curve for the detections predicting a class in
/// `positive_set`, against `total_positives` ground-truth instances.
/// Records are ranked by descending score; one point per distinct score.
pub fn precision_recall_curve(
    records: &[DetectionRecord],
    positive_set: &[i32],
    total_positives: usize,
) -> Result<Vec<CurvePoint>> {
    if total_positives == 0 {
        return Err(Error::MetricUndefined(
            "precision/recall needs at least one ground-truth positive".into(),
        ));
    }
    let mut filtered: Vec<&DetectionRecord> = records
        .iter()
        .filter(|r| positive_set.contains(&r.pred))
        .collect();
    if filtered.iter().any(|r| !r.score.is_finite()) {
        return Err(Error::InvalidArgument("non-finite score".into()));
    }
    filtered.sort_by(|a, b| b.score.partial_cmp(&a.score).expect("scores are finite"));

    let mut curve = Vec::new();
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < filtered.len() {
        let score = filtered[i].score;
        while i < filtered.len() && filtered[i].score == score {
            if filtered[i].is_true_positive() {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        curve.push(CurvePoint {
            threshold: score,
            precision: tp as f64 / (tp + fp) as f64,
            recall: tp as f64 / total_positives as f64,
        });
    }
    Ok(curve)
}

/// All-point interpolated average precision: sum over recall steps of
/// `delta recall * max precision at recall >= r`.
pub fn average_precision(curve: &[CurvePoint]) -> f64 {
    if curve.is_empty() {
        return 0.0;
    }
    let n = curve.len();
    let mut envelope = vec![0.0_f64; n];
    let mut best = 0.0_f64;
    for i in (0..n).rev() {
        best = best.max(curve[i].precision);
        envelope[i] = best;
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for i in 0..n {
        ap += (curve[i].recall - prev_recall) * envelope[i];
        prev_recall = curve[i].recall;
    }
    ap
}

/// AP of one class with the ground-truth count supplied by the caller.
pub fn average_precision_for_class(
    records: &[DetectionRecord],
    class: i32,
    total_positives: usize,
) -> Result<f64> {
    let curve = precision_recall_curve(records, &[class], total_positives)?;
    Ok(average_precision(&curve))
}

/// How much precision degrades when unknown objects enter evaluation:
/// `(P_K / P_{K u U} - 1) * 100` over the known-class detections at or
/// above `threshold`. `P_K` ignores detections matched to unknown ground
/// truth; `P_{K u U}` counts them as errors. All detections hitting
/// unknowns (closed-set precision undefined) yields the infinity sentinel.
pub fn wilderness_impact(
    records: &[DetectionRecord],
    known_set: &[i32],
    threshold: f64,
) -> Result<f64> {
    let above: Vec<&DetectionRecord> = records
        .iter()
        .filter(|r| known_set.contains(&r.pred) && r.score >= threshold)
        .collect();
    if above.is_empty() {
        return Err(Error::MetricUndefined(
            "WI undefined: no known-class detections above threshold".into(),
        ));
    }
    let tp = above.iter().filter(|r| r.is_true_positive()).count();
    let unknown_hits = above.iter().filter(|r| r.gt == GT_UNKNOWN).count();
    let closed = above.len() - unknown_hits; // tp + closed-set errors
    if closed == 0 {
        return Ok(f64::INFINITY);
    }
    let _ = tp;
    Ok(100.0 * unknown_hits as f64 / closed as f64)
}

/// WI evaluated on a grid of thresholds; undefined points are skipped.
pub fn wilderness_impact_grid(
    records: &[DetectionRecord],
    known_set: &[i32],
    thresholds: &[f64],
) -> Vec<(f64, f64)> {
    thresholds
        .iter()
        .filter_map(|&t| wilderness_impact(records, known_set, t).ok().map(|wi| (t, wi)))
        .collect()
}

/// Absolute open-set error: ground-truth unknown instances confidently
/// predicted as a known class at or above `threshold`, each instance
/// counted at most once (its highest-scoring offender).
pub fn aose(records: &[DetectionRecord], threshold: f64) -> usize {
    let mut seen: BTreeMap<&str, ()> = BTreeMap::new();
    for r in records {
        if r.score >= threshold && r.gt == GT_UNKNOWN && r.pred >= 0 {
            seen.entry(r.id.as_str()).or_insert(());
        }
    }
    seen.len()
}

/// AP of the unknown class, with the positive count taken as the distinct
/// unknown ground-truth instances present in the records (producers must
/// emit a record per matched unknown instance for exact recall).
pub fn ap_unknown(records: &[DetectionRecord]) -> Result<f64> {
    let total = distinct_gt_instances(records, GT_UNKNOWN);
    if total == 0 {
        return Err(Error::MetricUndefined(
            "AP of the unknown class needs unknown ground truth".into(),
        ));
    }
    average_precision_for_class(records, GT_UNKNOWN, total)
}

/// Distinct record ids carrying the given ground-truth code.
pub fn distinct_gt_instances(records: &[DetectionRecord], gt: i32) -> usize {
    let mut seen: BTreeMap<&str, ()> = BTreeMap::new();
    for r in records {
        if r.gt == gt {
            seen.entry(r.id.as_str()).or_insert(());
        }
    }
    seen.len()
}

/// The threshold (among distinct known-class detection scores) whose
/// known-class recall lands closest to `target_recall`; ties prefer the
/// lower threshold.
pub fn recall_operating_threshold(
    records: &[DetectionRecord],
    known_set: &[i32],
    total_known_positives: usize,
    target_recall: f64,
) -> Result<f64> {
    if total_known_positives == 0 {
        return Err(Error::MetricUndefined("no known-class ground truth".into()));
    }
    let mut dets: Vec<&DetectionRecord> = records
        .iter()
        .filter(|r| known_set.contains(&r.pred))
        .collect();
    if dets.is_empty() {
        return Err(Error::MetricUndefined("no known-class detections".into()));
    }
    dets.sort_by(|a, b| b.score.partial_cmp(&a.score).expect("scores are finite"));
    let mut best: Option<(f64, f64)> = None; // (|recall - target|, threshold)
    let mut tp = 0usize;
    let mut i = 0;
    while i < dets.len() {
        let score = dets[i].score;
        while i < dets.len() && dets[i].score == score {
            if dets[i].is_true_positive() {
                tp += 1;
            }
            i += 1;
        }
        let recall = tp as f64 / total_known_positives as f64;
        let gap = (recall - target_recall).abs();
        let better = match best {
            None => true,
            Some((bg, bt)) => gap < bg - 1e-15 || (gap <= bg + 1e-15 && score < bt),
        };
        if better {
            best = Some((gap, score));
        }
    }
    Ok(best.expect("at least one detection").1)
}

/// Mean over classes of the variance of member-to-centroid distances,
/// divided by the mean pairwise distance between class centroids.
pub fn compactness_ratio(embeddings: &[LabeledEmbedding]) -> Result<f64> {
    let groups = group_by_class(embeddings)?;
    if groups.len() < 2 {
        return Err(Error::Degenerate("need at least two classes".into()));
    }
    for (c, members) in &groups {
        if members.len() < 2 {
            return Err(Error::Degenerate(format!(
                "class {c} has fewer than two embeddings"
            )));
        }
    }
    let centroids: BTreeMap<usize, DenseVector> =
        groups.iter().map(|(&c, m)| (c, centroid(m))).collect();

    let mut variance_sum = 0.0;
    for (c, members) in &groups {
        let mu = &centroids[c];
        let dists: Vec<f64> = members.iter().map(|x| x.sub(mu).norm()).collect();
        let mean = dists.iter().sum::<f64>() / dists.len() as f64;
        let var =
            dists.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / dists.len() as f64;
        variance_sum += var;
    }
    let numerator = variance_sum / groups.len() as f64;

    let cents: Vec<&DenseVector> = centroids.values().collect();
    let mut dist_sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..cents.len() {
        for j in i + 1..cents.len() {
            dist_sum += cents[i].sub(cents[j]).norm();
            pairs += 1;
        }
    }
    let denominator = dist_sum / pairs as f64;
    if denominator == 0.0 {
        return Err(Error::Degenerate("zero centroid separation".into()));
    }
    Ok(numerator / denominator)
}

/// The five cluster-validity indices over labeled embeddings.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ClusterIndices {
    /// Dunn: min inter-cluster point distance / max intra-cluster diameter.
    pub dunn: f64,
    /// Calinski-Harabasz: between-group over within-group dispersion.
    pub calinski_harabasz: f64,
    /// Normalized Hubert gamma: correlation between pairwise distances and
    /// the different-cluster indicator (higher = better separated).
    pub hubert: f64,
    /// Davies-Bouldin: mean worst-pair scatter-to-separation ratio.
    pub davies_bouldin: f64,
    /// Xie-Beni: within-cluster squared dispersion over `N` times the
    /// minimal squared centroid separation.
    pub xie_beni: f64,
}

pub fn cluster_indices(embeddings: &[LabeledEmbedding]) -> Result<ClusterIndices> {
    let groups = group_by_class(embeddings)?;
    if groups.len() < 2 {
        return Err(Error::Degenerate("need at least two clusters".into()));
    }
    for (c, members) in &groups {
        if members.len() < 2 {
            return Err(Error::Degenerate(format!(
                "class {c} has fewer than two embeddings"
            )));
        }
    }
    let n_total = embeddings.len();
    let k = groups.len();
    let centroids: BTreeMap<usize, DenseVector> =
        groups.iter().map(|(&c, m)| (c, centroid(m))).collect();

    // Dunn
    let mut min_inter = f64::INFINITY;
    let mut max_diameter = 0.0_f64;
    let class_ids: Vec<usize> = groups.keys().copied().collect();
    for (ai, &a) in class_ids.iter().enumerate() {
        for x in &groups[&a] {
            for &b in &class_ids[ai + 1..] {
                for y in &groups[&b] {
                    min_inter = min_inter.min(x.sub(y).norm());
                }
            }
            for y in &groups[&a] {
                max_diameter = max_diameter.max(x.sub(y).norm());
            }
        }
    }
    if max_diameter == 0.0 {
        return Err(Error::Degenerate("zero intra-cluster diameter".into()));
    }
    let dunn = min_inter / max_diameter;

    // Calinski-Harabasz
    let global = centroid(&embeddings.iter().map(|e| e.embedding.clone()).collect::<Vec<_>>());
    let mut between = 0.0;
    let mut within = 0.0;
    for (c, members) in &groups {
        let mu = &centroids[c];
        let d = mu.sub(&global).norm();
        between += members.len() as f64 * d * d;
        for x in members {
            let dd = x.sub(mu).norm();
            within += dd * dd;
        }
    }
    let calinski_harabasz =
        (between / (k as f64 - 1.0)) / (within / (n_total as f64 - k as f64));

    // Normalized Hubert gamma over all unordered pairs.
    let mut dists = Vec::new();
    let mut indicator = Vec::new();
    for i in 0..n_total {
        for j in i + 1..n_total {
            dists.push(embeddings[i].embedding.sub(&embeddings[j].embedding).norm());
            indicator.push(if embeddings[i].class_id == embeddings[j].class_id {
                0.0
            } else {
                1.0
            });
        }
    }
    let hubert = pearson(&dists, &indicator)?;

    // Davies-Bouldin
    let scatter: BTreeMap<usize, f64> = groups
        .iter()
        .map(|(&c, members)| {
            let mu = &centroids[&c];
            let mean = members.iter().map(|x| x.sub(mu).norm()).sum::<f64>()
                / members.len() as f64;
            (c, mean)
        })
        .collect();
    let mut db_sum = 0.0;
    let mut min_sep_sq = f64::INFINITY;
    for &a in &class_ids {
        let mut worst = 0.0_f64;
        for &b in &class_ids {
            if a == b {
                continue;
            }
            let sep = centroids[&a].sub(&centroids[&b]).norm();
            if sep == 0.0 {
                return Err(Error::Degenerate("zero centroid separation".into()));
            }
            worst = worst.max((scatter[&a] + scatter[&b]) / sep);
            min_sep_sq = min_sep_sq.min(sep * sep);
        }
        db_sum += worst;
    }
    let davies_bouldin = db_sum / k as f64;

    // Xie-Beni
    let xie_beni = within / (n_total as f64 * min_sep_sq);

    Ok(ClusterIndices { dunn, calinski_harabasz, hubert, davies_bouldin, xie_beni })
}

fn group_by_class(embeddings: &[LabeledEmbedding]) -> Result<BTreeMap<usize, Vec<DenseVector>>> {
    if embeddings.is_empty() {
        return Err(Error::EmptyInput);
    }
    if embeddings.iter().any(|e| !e.embedding.all_finite()) {
        return Err(Error::InvalidArgument("non-finite embedding".into()));
    }
    let mut groups: BTreeMap<usize, Vec<DenseVector>> = BTreeMap::new();
    for e in embeddings {
        groups.entry(e.class_id).or_default().push(e.embedding.clone());
    }
    Ok(groups)
}

fn centroid(points: &[DenseVector]) -> DenseVector {
    let d = points[0].len();
    let mut mu = vec![0.0; d];
    for p in points {
        for (m, &x) in mu.iter_mut().zip(p.as_slice()) {
            *m += x;
        }
    }
    let inv = 1.0 / points.len() as f64;
    DenseVector::new(mu.into_iter().map(|x| x * inv).collect())
}

fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("zero variance in correlation".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Parse a JSON-lines detection dump (one record object per line; blank
/// lines ignored). Every record is validated.
pub fn parse_dump_jsonl(text: &str) -> Result<Vec<DetectionRecord>> {
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let record: DetectionRecord = serde_json::from_str(line).map_err(|e| {
            Error::InvalidArgument(format!("dump line {}: {e}", lineno + 1))
        })?;
        record.validate()?;
        records.push(record);
    }
    Ok(records)
}

/// One row of the metric CSV (`metric,threshold,value`); `threshold` is
/// empty for threshold-free metrics.
#[derive(Debug, Clone)]
pub struct MetricRow {
    pub metric: String,
    pub threshold: Option<f64>,
    pub value: f64,
}

impl MetricRow {
    pub fn new(metric: impl Into<String>, threshold: Option<f64>, value: f64) -> Self {
        Self { metric: metric.into(), threshold, value }
    }
}

/// Render metric rows as CSV with the `metric,threshold,value` header.
pub fn metrics_to_csv(rows: &[MetricRow]) -> String {
    let mut out = String::from("metric,threshold,value\n");
    for row in rows {
        let t = row.threshold.map_or(String::new(), |t| format!("{t}"));
        out.push_str(&format!("{},{},{}\n", row.metric, t, row.value));
    }
    out
}

/// The metric suite over an ingested dump: per-class AP and mean AP for
/// the known classes present, AP of the unknown class when unknown ground
/// truth exists, WI at its headline operating point and over the threshold
/// grid, and AOSE at the headline threshold. Recall denominators are the
/// distinct ground-truth instances present in the records.
pub fn dump_metric_rows(records: &[DetectionRecord]) -> Result<Vec<MetricRow>> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut known_classes: Vec<i32> = records
        .iter()
        .flat_map(|r| [r.gt, r.pred])
        .filter(|&c| c >= 0)
        .collect();
    known_classes.sort_unstable();
    known_classes.dedup();

    let mut rows = Vec::new();
    let mut ap_sum = 0.0;
    let mut ap_n = 0usize;
    for &c in &known_classes {
        let total = distinct_gt_instances(records, c);
        if total == 0 {
            continue;
        }
        let ap = average_precision_for_class(records, c, total)?;
        rows.push(MetricRow::new(format!("ap_class_{c}"), None, ap));
        ap_sum += ap;
        ap_n += 1;
    }
    if ap_n > 0 {
        rows.push(MetricRow::new("map_known", None, ap_sum / ap_n as f64));
    }
    if let Ok(ap_u) = ap_unknown(records) {
        rows.push(MetricRow::new("ap_unknown", None, ap_u));
    }

    let total_known_gt: usize = known_classes
        .iter()
        .map(|&c| distinct_gt_instances(records, c))
        .sum();
    if total_known_gt > 0 {
        if let Ok(t) = recall_operating_threshold(records, &known_classes, total_known_gt, 0.8) {
            if let Ok(wi) = wilderness_impact(records, &known_classes, t) {
                rows.push(MetricRow::new("wi_headline", Some(t), wi));
            }
            rows.push(MetricRow::new("aose", Some(t), aose(records, t) as f64));
        }
    }
    let grid: Vec<f64> = (1..20).map(|i| i as f64 * 0.05).collect();
    for (t, wi) in wilderness_impact_grid(records, &known_classes, &grid) {
        rows.push(MetricRow::new("wi", Some(t), wi));
    }
    let unknown_total = distinct_gt_instances(records, GT_UNKNOWN);
    rows.push(MetricRow::new("unknown_gt_instances", None, unknown_total as f64));
    Ok(rows)
}
