use openset::losses::TrainMode;
use openset::pipeline::{run_experiment, TrainConfig};

fn means(cfg_base: &TrainConfig, mode: TrainMode, seeds: &[u64]) -> (f64, f64, f64) {
    let (mut aose, mut wi, mut sm) = (0.0, 0.0, 0.0);
    for &seed in seeds {
        let cfg = TrainConfig { mode, seed, ..cfg_base.clone() };
        let m = run_experiment(&cfg).unwrap().report.metrics.unwrap();
        aose += m.aose as f64 / seeds.len() as f64;
        wi += m.wi / seeds.len() as f64;
        sm += m.sigma_mu.unwrap() / seeds.len() as f64;
    }
    (aose, wi, sm)
}

fn main() {
    let seed_sets: Vec<Vec<u64>> = vec![(100..105).collect(), (11..16).collect()];
    for seeds_a in &seed_sets {
    println!("--- seeds {seeds_a:?}");
    for &std in &[1.2] {
        for &bg in &[60usize] {
            for &kmax in &[3000usize] {
                let base = TrainConfig {
                    circle_radius: 5.0,
                    blob_std: std,
                    background_samples: bg,
                    unknown_radius_factor: 1.0,
                    iterations: kmax,
                    test_samples_per_class: 150,
                    unknown_samples_per_cluster: 150,
                    ..TrainConfig::default()
                };
                let ce = means(&base, TrainMode::CeBaseline, seeds_a);
                let sn = means(&base, TrainMode::OdSn, seeds_a);
                let cwa = means(&base, TrainMode::OdCwa, seeds_a);
                let m1 = 0.85 * ce.0 - cwa.0;
                let m2 = ce.1 - cwa.1;
                let m3 = sn.2 - cwa.2;
                println!(
                    "std={std} bg={bg} kmax={kmax} | AOSE {:.0}/{:.0}/{:.0} WI {:.1}/{:.1} sm {:.4}/{:.4} | {}{}{} m1={:.1} m2={:.1} m3={:.4}",
                    ce.0, sn.0, cwa.0, ce.1, cwa.1, sn.2, cwa.2,
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
