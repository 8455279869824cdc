use openset::losses::{ClassLayout, TrainMode};
use openset::model::forward;
use openset::numerics::{softmax, DenseVector};
use openset::pipeline::{generate_dataset, run_experiment, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let radius: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(6.0);
    let std: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1.5);
    let bg: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(30);
    let factor: f64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(0.55);
    let kmax: usize = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(3000);
    let seeds: u64 = args.get(6).map(|s| s.parse().unwrap()).unwrap_or(3);

    for mode in [TrainMode::CeBaseline, TrainMode::OdSn, TrainMode::OdCwa] {
        let (mut aose_fix, mut wi, mut sm) = (0.0, 0.0, 0.0);
        for seed in 0..seeds {
            let cfg = TrainConfig {
                mode,
                seed: 1000 + seed,
                circle_radius: radius,
                unknown_radius_factor: factor,
                blob_std: std,
                background_samples: bg,
                iterations: kmax,
                ..TrainConfig::default()
            };
            let out = run_experiment(&cfg).unwrap();
            let m = out.report.metrics.clone().unwrap();

            // fixed-threshold AOSE + unknown-confidence profile
            let ds = generate_dataset(&cfg).unwrap();
            let layout = ClassLayout::new(cfg.num_known);
            let trace = forward(&out.params, &ds.test.points, cfg.alpha_scale).unwrap();
            let mut aose05 = 0usize;
            let mut unk_unk = 0usize;
            for (i, &l) in ds.test.labels.iter().enumerate() {
                if l != layout.unknown_index() { continue; }
                let row = trace.logits.row(i);
                let pred = (0..row.len()).max_by(|&a, &b| row[a].partial_cmp(&row[b]).unwrap()).unwrap();
                let probs = softmax(&DenseVector::new(row.to_vec())).unwrap();
                if layout.is_known(pred) && probs[pred] >= 0.5 { aose05 += 1; }
                if pred == layout.unknown_index() { unk_unk += 1; }
            }
            let nl = out.report.loss_series.len();
            let cwa_first: f64 = out.report.loss_series[..10].iter().map(|b| b.l_cwa).sum::<f64>() / 10.0;
            let cwa_last: f64 = out.report.loss_series[nl-10..].iter().map(|b| b.l_cwa).sum::<f64>() / 10.0;
            if std::env::var("QUIET").is_err() {
                println!("  {mode} s{seed}: AOSE@rec8={} AOSE@.5={} WI={:.1} s/m={:.4} unk->unk={} cwa {:.1}->{:.1}",
                    m.aose, aose05, m.wi, m.sigma_mu.unwrap(), unk_unk, cwa_first, cwa_last);
            }
            aose_fix += aose05 as f64; wi += m.wi; sm += m.sigma_mu.unwrap();
        }
        let n = seeds as f64;
        println!("{mode}: mean AOSE@.5={:.1} WI={:.2} sigma_mu={:.5} acc_last", aose_fix / n, wi / n, sm / n);
    }
}
