use openset::losses::TrainMode;
use openset::pipeline::{run_experiment, TrainConfig};

fn main() {
    for &(mode, beta, lam) in &[
        (TrainMode::CeBaseline, 0.0, 0.0),
        (TrainMode::OdSn, 0.5, 0.0),
        (TrainMode::OdSn, 2.0, 0.0),
        (TrainMode::OdSn, 5.0, 0.0),
        (TrainMode::OdCwa, 0.5, 1.7e-3),
        (TrainMode::OdCwa, 5.0, 0.05),
    ] {
        let (mut aose, mut wi, mut apu) = (0.0, 0.0, 0.0);
        let seeds = [100u64, 101, 102];
        for &seed in &seeds {
            let cfg = TrainConfig {
                mode, seed,
                beta: if mode == TrainMode::CeBaseline { 0.0 } else { beta },
                lambda: lam,
                ..TrainConfig::default()
            };
            let m = run_experiment(&cfg).unwrap().report.metrics.unwrap();
            aose += m.aose as f64 / 3.0;
            wi += m.wi / 3.0;
            apu += m.ap_unknown.unwrap_or(0.0) / 3.0;
        }
        println!("{mode} beta={beta} lambda={lam}: AOSE={aose:.1} WI={wi:.2} AP_U={apu:.3}");
    }
}
