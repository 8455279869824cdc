use openset::losses::{ClassLayout, TrainMode};
use openset::model::forward;
use openset::numerics::{softmax, DenseVector};
use openset::pipeline::{generate_dataset, run_experiment, TrainConfig};

// (aose at detection floor 0.05, wi, sigma_mu, accuracy)
fn run(cfg: &TrainConfig) -> (f64, f64, f64, f64) {
    let out = run_experiment(cfg).unwrap();
    let m = out.report.metrics.unwrap();
    let ds = generate_dataset(cfg).unwrap();
    let layout = ClassLayout::new(cfg.num_known);
    let trace = forward(&out.params, &ds.test.points, cfg.alpha_scale).unwrap();
    let mut aose = 0usize;
    for (i, &l) in ds.test.labels.iter().enumerate() {
        if l != layout.unknown_index() { continue; }
        let row = trace.logits.row(i);
        let pred = (0..row.len()).max_by(|&a, &b| row[a].partial_cmp(&row[b]).unwrap()).unwrap();
        let probs = softmax(&DenseVector::new(row.to_vec())).unwrap();
        if layout.is_known(pred) && probs[pred] >= 0.05 { aose += 1; }
    }
    (aose as f64, m.wi, m.sigma_mu.unwrap_or(f64::NAN), m.accuracy)
}

fn main() {
    let seeds = [11u64, 12, 13];
    let tau: f64 = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(0.1);
    let fdim: usize = std::env::args().nth(2).map(|s| s.parse().unwrap()).unwrap_or(16);
    println!("std bg factor kmax | AOSE ce/sn/cwa | WI ce/cwa | s/m sn/cwa | acc | m1 m2 m3");
    for &std in &[1.2, 1.5] {
        for &bg in &[30usize, 60] {
            for &factor in &[1.0] {
                for &kmax in &[1200usize, 3000] {
                    let mut acc = [0.0f64; 3];
                    let mut aose = [0.0f64; 3];
                    let mut wi = [0.0f64; 3];
                    let mut sm = [0.0f64; 3];
                    for (mi, mode) in [TrainMode::CeBaseline, TrainMode::OdSn, TrainMode::OdCwa]
                        .iter()
                        .enumerate()
                    {
                        for &seed in &seeds {
                            let cfg = TrainConfig {
                                mode: *mode,
                                seed,
                                circle_radius: 5.0,
                                blob_std: std,
                                background_samples: bg,
                                unknown_radius_factor: factor,
                                iterations: kmax,
                                tau,
                                feature_dim: fdim,
                                embed_dim: fdim,
                                test_samples_per_class: 150,
                                unknown_samples_per_cluster: 150,
                                ..TrainConfig::default()
                            };
                            let (a, w, s, ac) = run(&cfg);
                            aose[mi] += a / seeds.len() as f64;
                            wi[mi] += w / seeds.len() as f64;
                            sm[mi] += s / seeds.len() as f64;
                            acc[mi] += ac / seeds.len() as f64;
                        }
                    }
                    let m1 = 0.85 * aose[0] - aose[2];
                    let m2 = wi[0] - wi[2];
                    let m3 = sm[1] - sm[2];
                    println!(
                        "{std} {bg} {factor} {kmax} | {:.0}/{:.0}/{:.0} | {:.1}/{:.1} | {:.4}/{:.4} | {:.2} | {}{}{} m1={:.1} m2={:.1} m3={:.4}",
                        aose[0], aose[1], aose[2], wi[0], wi[2], sm[1], sm[2], acc[2],
                        if m1 > 0.0 { "+" } else { "-" },
                        if m2 > 0.0 { "+" } else { "-" },
                        if m3 > 0.0 { "+" } else { "-" },
                        m1, m2, m3
                    );
                }
            }
        }
    }
}
