//! Independent oracles shared by the integration tests: a Jacobi
//! eigenvalue SVD, brute-force metric implementations, and the hand
//! examples. None of this code shares helpers with the library paths it
//! checks.

use openset::eval::{self, DetectionRecord, LabeledEmbedding};
use openset::numerics::DenseMatrix;

/// Largest singular value via the Jacobi eigenvalue algorithm on `W^T W`.
pub fn jacobi_svd_sigma_max(w: &DenseMatrix) -> f64 {
    let n = w.cols();
    // gram = W^T W
    let mut a = vec![vec![0.0_f64; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for r in 0..w.rows() {
                s += w[(r, i)] * w[(r, j)];
            }
            a[i][j] = s;
        }
    }
    // Jacobi sweeps
    for _ in 0..200 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-30 {
                    continue;
                }
                let theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let lambda_max = (0..n).map(|i| a[i][i]).fold(0.0_f64, f64::max);
    lambda_max.max(0.0).sqrt()
}

/// AP by direct definition: rank by score, walk thresholds, integrate the
/// precision envelope over recall steps.
pub fn brute_force_ap(records: &[DetectionRecord], class: i32, total_positives: usize) -> f64 {
    let mut dets: Vec<&DetectionRecord> =
        records.iter().filter(|r| r.pred == class).collect();
    dets.sort_by(|x, y| y.score.partial_cmp(&x.score).unwrap());
    // (recall, precision) at every distinct score
    let mut pts: Vec<(f64, f64)> = Vec::new();
    let mut tp = 0.0;
    let mut seen = 0.0;
    let mut i = 0;
    while i < dets.len() {
        let s = dets[i].score;
        while i < dets.len() && dets[i].score == s {
            seen += 1.0;
            if dets[i].matched && dets[i].gt == class {
                tp += 1.0;
            }
            i += 1;
        }
        pts.push((tp / total_positives as f64, tp / seen));
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for k in 0..pts.len() {
        let max_prec_at_or_beyond = pts[k..]
            .iter()
            .map(|&(_, p)| p)
            .fold(0.0_f64, f64::max);
        ap += (pts[k].0 - prev_recall) * max_prec_at_or_beyond;
        prev_recall = pts[k].0;
    }
    ap
}

/// WI by direct counting; None when no known-class detections survive the
/// threshold (undefined), infinity when the closed-set denominator is 0.
pub fn brute_force_wi(
    records: &[DetectionRecord],
    known: &[i32],
    threshold: f64,
) -> Option<f64> {
    let dets: Vec<&DetectionRecord> = records
        .iter()
        .filter(|r| known.contains(&r.pred) && r.score >= threshold)
        .collect();
    if dets.is_empty() {
        return None;
    }
    let tp = dets.iter().filter(|r| r.matched && r.gt == r.pred).count() as f64;
    let unknown_hits = dets.iter().filter(|r| r.gt == eval::GT_UNKNOWN).count() as f64;
    let closed = dets.len() as f64 - unknown_hits;
    if closed == 0.0 {
        return Some(f64::INFINITY);
    }
    let p_k = tp / closed;
    let p_ku = tp / dets.len() as f64;
    if p_ku == 0.0 {
        // both precisions zero: the ratio formula degenerates to the
        // unknown-hit share over the closed-set denominator
        return Some(100.0 * unknown_hits / closed);
    }
    Some((p_k / p_ku - 1.0) * 100.0)
}

pub fn brute_force_aose(records: &[DetectionRecord], threshold: f64) -> usize {
    let mut ids: Vec<&str> = records
        .iter()
        .filter(|r| r.gt == eval::GT_UNKNOWN && r.pred >= 0 && r.score >= threshold)
        .map(|r| r.id.as_str())
        .collect();
    ids.sort_unstable();
    ids.dedup();
    ids.len()
}

pub struct BruteIndices {
    pub dunn: f64,
    pub chi: f64,
    pub hubert: f64,
    pub dbi: f64,
    pub xbi: f64,
}

fn dist(a: &LabeledEmbedding, b: &LabeledEmbedding) -> f64 {
    a.embedding
        .as_slice()
        .iter()
        .zip(b.embedding.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn classes(e: &[LabeledEmbedding]) -> Vec<usize> {
    let mut c: Vec<usize> = e.iter().map(|x| x.class_id).collect();
    c.sort_unstable();
    c.dedup();
    c
}

fn centroid_of(members: &[&LabeledEmbedding]) -> Vec<f64> {
    let d = members[0].embedding.len();
    let mut mu = vec![0.0; d];
    for m in members {
        for (s, &x) in mu.iter_mut().zip(m.embedding.as_slice()) {
            *s += x;
        }
    }
    mu.iter_mut().for_each(|x| *x /= members.len() as f64);
    mu
}

fn dist_to(mu: &[f64], e: &LabeledEmbedding) -> f64 {
    mu.iter()
        .zip(e.embedding.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn brute_force_indices(e: &[LabeledEmbedding]) -> BruteIndices {
    let cls = classes(e);
    let n = e.len() as f64;
    let k = cls.len() as f64;

    let mut min_inter = f64::INFINITY;
    let mut max_diam = 0.0_f64;
    for i in 0..e.len() {
        for j in 0..e.len() {
            if i == j {
                continue;
            }
            let d = dist(&e[i], &e[j]);
            if e[i].class_id == e[j].class_id {
                max_diam = max_diam.max(d);
            } else {
                min_inter = min_inter.min(d);
            }
        }
    }

    let all: Vec<&LabeledEmbedding> = e.iter().collect();
    let global = centroid_of(&all);
    let mut between = 0.0;
    let mut within = 0.0;
    for &c in &cls {
        let members: Vec<&LabeledEmbedding> =
            e.iter().filter(|x| x.class_id == c).collect();
        let mu = centroid_of(&members);
        let gd: f64 = mu.iter().zip(&global).map(|(x, y)| (x - y) * (x - y)).sum();
        between += members.len() as f64 * gd;
        for x in &members {
            let d = dist_to(&mu, x);
            within += d * d;
        }
    }

    let mut ds = Vec::new();
    let mut ss = Vec::new();
    for i in 0..e.len() {
        for j in i + 1..e.len() {
            ds.push(dist(&e[i], &e[j]));
            ss.push(if e[i].class_id == e[j].class_id { 0.0 } else { 1.0 });
        }
    }
    let md = ds.iter().sum::<f64>() / ds.len() as f64;
    let ms = ss.iter().sum::<f64>() / ss.len() as f64;
    let (mut num, mut vx, mut vy) = (0.0, 0.0, 0.0);
    for (d, s) in ds.iter().zip(&ss) {
        num += (d - md) * (s - ms);
        vx += (d - md) * (d - md);
        vy += (s - ms) * (s - ms);
    }

    let mut dbi_sum = 0.0;
    let mut min_sep = f64::INFINITY;
    for &a in &cls {
        let ma: Vec<&LabeledEmbedding> = e.iter().filter(|x| x.class_id == a).collect();
        let mua = centroid_of(&ma);
        let sa = ma.iter().map(|x| dist_to(&mua, x)).sum::<f64>() / ma.len() as f64;
        let mut worst = 0.0_f64;
        for &b in &cls {
            if a == b {
                continue;
            }
            let mb: Vec<&LabeledEmbedding> = e.iter().filter(|x| x.class_id == b).collect();
            let mub = centroid_of(&mb);
            let sb = mb.iter().map(|x| dist_to(&mub, x)).sum::<f64>() / mb.len() as f64;
            let sep: f64 = mua
                .iter()
                .zip(&mub)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            worst = worst.max((sa + sb) / sep);
            min_sep = min_sep.min(sep);
        }
        dbi_sum += worst;
    }

    BruteIndices {
        dunn: min_inter / max_diam,
        chi: (between / (k - 1.0)) / (within / (n - k)),
        hubert: num / (vx * vy).sqrt(),
        dbi: dbi_sum / k,
        xbi: within / (n * min_sep * min_sep),
    }
}

pub fn brute_force_sigma_mu(e: &[LabeledEmbedding]) -> f64 {
    let cls = classes(e);
    let mut var_sum = 0.0;
    let mut cents = Vec::new();
    for &c in &cls {
        let members: Vec<&LabeledEmbedding> = e.iter().filter(|x| x.class_id == c).collect();
        let mu = centroid_of(&members);
        let dists: Vec<f64> = members.iter().map(|x| dist_to(&mu, x)).collect();
        let mean = dists.iter().sum::<f64>() / dists.len() as f64;
        var_sum +=
            dists.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / dists.len() as f64;
        cents.push(mu);
    }
    let num = var_sum / cls.len() as f64;
    let mut dsum = 0.0;
    let mut pairs = 0;
    for i in 0..cents.len() {
        for j in i + 1..cents.len() {
            dsum += cents[i]
                .iter()
                .zip(&cents[j])
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            pairs += 1;
        }
    }
    num / (dsum / pairs as f64)
}

/// Every metric hand example stated with the operation contracts.
pub fn metric_hand_examples() {
    use openset::numerics::DenseVector;

    let rec = |id: &str, pred: i32, score: f64, gt: i32, matched: bool| DetectionRecord {
        id: id.into(),
        pred,
        score,
        gt,
        matched,
    };

    // ranked [TP, FP, TP] with 2 positives
    let records = vec![
        rec("a", 0, 0.9, 0, true),
        rec("b", 0, 0.8, 1, true),
        rec("c", 0, 0.7, 0, true),
    ];
    let curve = eval::precision_recall_curve(&records, &[0], 2).unwrap();
    assert_eq!(
        curve.iter().map(|p| p.precision).collect::<Vec<_>>(),
        vec![1.0, 0.5, 2.0 / 3.0]
    );
    assert_eq!(
        curve.iter().map(|p| p.recall).collect::<Vec<_>>(),
        vec![0.5, 0.5, 1.0]
    );
    assert!((eval::average_precision(&curve) - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-12);

    // WI arithmetic: P_K 0.8, P_KU 0.64 -> 25.0
    let mut records = Vec::new();
    for i in 0..16 {
        records.push(rec(&format!("tp{i}"), 0, 0.9, 0, true));
    }
    for i in 0..4 {
        records.push(rec(&format!("fp{i}"), 0, 0.9, 1, true));
    }
    for i in 0..5 {
        records.push(rec(&format!("u{i}"), 0, 0.9, eval::GT_UNKNOWN, true));
    }
    assert!((eval::wilderness_impact(&records, &[0, 1], 0.5).unwrap() - 25.0).abs() < 1e-12);

    // AOSE: 3 unknown instances, 2 misclassified above threshold
    let records = vec![
        rec("u1", 0, 0.9, eval::GT_UNKNOWN, true),
        rec("u2", 1, 0.8, eval::GT_UNKNOWN, true),
        rec("u3", eval::GT_UNKNOWN, 0.9, eval::GT_UNKNOWN, true),
    ];
    assert_eq!(eval::aose(&records, 0.5), 2);

    // compactness: equal member-centroid distances -> ratio 0
    let embed = |class_id: usize, coords: &[f64]| LabeledEmbedding {
        embedding: DenseVector::new(coords.to_vec()),
        class_id,
    };
    let embeddings = vec![
        embed(0, &[0.0, 0.0]),
        embed(0, &[0.0, 2.0]),
        embed(1, &[10.0, 0.0]),
        embed(1, &[10.0, 2.0]),
    ];
    assert_eq!(eval::compactness_ratio(&embeddings).unwrap(), 0.0);

    // Dunn on the separated pair example: 10 / 1
    let embeddings = vec![
        embed(0, &[0.0, 0.0]),
        embed(0, &[0.0, 1.0]),
        embed(1, &[10.0, 0.0]),
        embed(1, &[10.0, 1.0]),
    ];
    assert!((eval::cluster_indices(&embeddings).unwrap().dunn - 10.0).abs() < 1e-12);
}
