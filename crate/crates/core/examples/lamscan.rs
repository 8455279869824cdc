use openset::losses::TrainMode;
use openset::pipeline::{run_experiment, TrainConfig};

fn main() {
    let seeds = [11u64, 12, 13];
    for &(mode, lam) in &[
        (TrainMode::CeBaseline, 0.0),
        (TrainMode::OdSn, 0.0),
        (TrainMode::OdCwa, 1.7e-3),
        (TrainMode::OdCwa, 8e-3),
        (TrainMode::OdCwa, 0.03),
        (TrainMode::OdCwa, 0.1),
    ] {
        let (mut aose, mut wi, mut sm, mut acc, mut apu) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &seed in &seeds {
            let cfg = TrainConfig {
                mode, seed,
                lambda: if mode == TrainMode::OdCwa { lam } else { TrainConfig::default().lambda },
                circle_radius: 5.0, blob_std: 1.3, background_samples: 80,
                unknown_radius_factor: 0.6, iterations: 1200,
                test_samples_per_class: 150, unknown_samples_per_cluster: 150,
                feature_dim: 8, embed_dim: 8,
                ..TrainConfig::default()
            };
            let m = run_experiment(&cfg).unwrap().report.metrics.unwrap();
            aose += m.aose as f64 / 3.0; wi += m.wi / 3.0;
            sm += m.sigma_mu.unwrap() / 3.0; acc += m.accuracy / 3.0;
            apu += m.ap_unknown.unwrap_or(0.0) / 3.0;
        }
        println!("{mode} lam={lam}: AOSE={aose:.1} WI={wi:.2} s/m={sm:.4} acc={acc:.3} AP_U={apu:.3}");
    }
}
