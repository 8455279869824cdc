use openset::losses::{ClassLayout, TrainMode};
use openset::model::forward;
use openset::pipeline::{generate_dataset, run_experiment, TrainConfig};

fn main() {
    for mode in [TrainMode::OdSn, TrainMode::OdCwa] {
        let (mut num, mut den) = (0.0, 0.0);
        for seed in [11u64, 12, 13] {
            let cfg = TrainConfig {
                mode, seed,
                circle_radius: 5.0, blob_std: 1.3, background_samples: 80,
                unknown_radius_factor: 0.6, iterations: 1200,
                test_samples_per_class: 150, unknown_samples_per_cluster: 150,
                ..TrainConfig::default()
            };
            let out = run_experiment(&cfg).unwrap();
            let ds = generate_dataset(&cfg).unwrap();
            let layout = ClassLayout::new(cfg.num_known);
            let trace = forward(&out.params, &ds.test.points, cfg.alpha_scale).unwrap();
            // group known-class embeddings
            let mut groups: Vec<Vec<Vec<f64>>> = vec![Vec::new(); cfg.num_known];
            for (i, &l) in ds.test.labels.iter().enumerate() {
                if layout.is_known(l) {
                    groups[l].push(trace.embeddings.row(i).to_vec());
                }
            }
            let centroids: Vec<Vec<f64>> = groups.iter().map(|g| {
                let d = g[0].len();
                let mut mu = vec![0.0; d];
                for p in g { for (m, x) in mu.iter_mut().zip(p) { *m += x; } }
                mu.iter_mut().for_each(|x| *x /= g.len() as f64);
                mu
            }).collect();
            let mut var_sum = 0.0;
            for (g, mu) in groups.iter().zip(&centroids) {
                let ds: Vec<f64> = g.iter().map(|p| {
                    p.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
                }).collect();
                let mean = ds.iter().sum::<f64>() / ds.len() as f64;
                var_sum += ds.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / ds.len() as f64;
            }
            let numerator = var_sum / groups.len() as f64;
            let mut dsum = 0.0; let mut np = 0;
            for i in 0..centroids.len() { for j in i+1..centroids.len() {
                dsum += centroids[i].iter().zip(&centroids[j]).map(|(a,b)| (a-b)*(a-b)).sum::<f64>().sqrt();
                np += 1;
            }}
            let denominator = dsum / np as f64;
            println!("  {mode} s{seed}: num={:.6} den={:.4} ratio={:.5}", numerator, denominator, numerator/denominator);
            num += numerator / 3.0; den += denominator / 3.0;
        }
        println!("{mode}: mean num={:.6} den={:.4}", num, den);
    }
}
