use openset::losses::{ClassLayout, TrainMode};
use openset::model::forward;
use openset::numerics::{softmax, DenseVector};
use openset::pipeline::{generate_dataset, run_experiment, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let radius: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(8.0);
    let std: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1.0);
    let bg: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(200);

    for mode in [TrainMode::CeBaseline, TrainMode::OdSn, TrainMode::OdCwa] {
        let cfg = TrainConfig {
            mode,
            circle_radius: radius,
            blob_std: std,
            background_samples: bg,
            ..TrainConfig::default()
        };
        let t0 = std::time::Instant::now();
        let out = run_experiment(&cfg).unwrap();
        let m = out.report.metrics.unwrap();

        // prediction histogram for unknown-gt test points
        let ds = generate_dataset(&cfg).unwrap();
        let layout = ClassLayout::new(cfg.num_known);
        let trace = forward(&out.params, &ds.test.points, cfg.alpha_scale).unwrap();
        let mut unk_to = [0usize; 3]; // known, unknown, bg
        let mut conf_sum = 0.0;
        let mut unk_n = 0;
        for (i, &l) in ds.test.labels.iter().enumerate() {
            if l != layout.unknown_index() { continue; }
            unk_n += 1;
            let row = trace.logits.row(i);
            let pred = (0..row.len()).max_by(|&a, &b| row[a].partial_cmp(&row[b]).unwrap()).unwrap();
            let probs = softmax(&DenseVector::new(row.to_vec())).unwrap();
            conf_sum += probs[pred];
            if layout.is_known(pred) { unk_to[0] += 1; }
            else if pred == layout.unknown_index() { unk_to[1] += 1; }
            else { unk_to[2] += 1; }
        }
        println!(
            "{mode}: {:.1}s acc={:.3} mAP={:.3} AP_U={:.3} WI={:.2} AOSE={} s/m={:.4} | unk->known {} unk->unk {} unk->bg {} meanconf {:.3}",
            t0.elapsed().as_secs_f64(), m.accuracy, m.map_known, m.ap_unknown.unwrap_or(-1.0),
            m.wi, m.aose, m.sigma_mu.unwrap_or(-1.0),
            unk_to[0], unk_to[1], unk_to[2], conf_sum / unk_n as f64
        );
    }
}
