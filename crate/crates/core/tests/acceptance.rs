//! Acceptance suite: one test per criterion, each printing a PASS line
//! with its measured numbers. Criteria 1–4 check the numerics against
//! independent oracles; 5–8 exercise the full pipeline.

mod common;

use approx::assert_abs_diff_eq;
use openset::eval::{self, LabeledEmbedding};
use openset::losses::{
    build_anchors, combined_loss, cross_entropy_loss, cwa_loss, instance_contrastive_loss,
    mine_hard_examples, unknown_probability_loss, up_sample_weights, ClassLayout,
    LossCoefficients, MemoryBank, TrainMode,
};
use openset::model::{apply_spectral_norm, backward, forward, LossGrads, ModelParams};
use openset::numerics::{DenseMatrix, DenseVector, Rng};
use openset::pipeline::{generate_dataset, run_experiment, train, SweepGrid, TrainConfig};
use openset::transport::{exact_ot, sinkhorn_divergence, sinkhorn_plan};

use common::jacobi_svd_sigma_max;

/// Criterion 1: Sinkhorn transport cost within 1% of the exact solver on
/// 50 seeded tiny instances at blur 1e-3; marginal residuals <= 1e-6;
/// debiased self-divergence <= 1e-9.
#[test]
fn criterion_1_sinkhorn_matches_exact_solver() {
    let started = std::time::Instant::now();
    let mut rng = Rng::new(0xC1);
    let mut worst_rel = 0.0_f64;
    let mut worst_residual = 0.0_f64;
    for _ in 0..50 {
        let n = 2 + rng.below(3); // 2..=4
        let m = 2 + rng.below(3);
        let c = DenseMatrix::from_vec(n, m, (0..n * m).map(|_| rng.range(0.0, 1.0)).collect())
            .unwrap();
        let normalize = |xs: Vec<f64>| {
            let s: f64 = xs.iter().sum();
            xs.into_iter().map(|x| x / s).collect::<Vec<f64>>()
        };
        let a = normalize((0..n).map(|_| rng.range(0.2, 1.0)).collect());
        let b = normalize((0..m).map(|_| rng.range(0.2, 1.0)).collect());

        let plan = sinkhorn_plan(&c, &a, &b, 1e-3, 200_000, 1e-6).unwrap();
        assert!(plan.converged, "sinkhorn failed to converge");
        worst_residual = worst_residual.max(plan.residual);
        let sk_cost = plan.transport_cost(&c);
        let (exact_cost, _) = exact_ot(&c, &a, &b).unwrap();
        let rel = (sk_cost - exact_cost).abs() / exact_cost.max(1e-12);
        worst_rel = worst_rel.max(rel);
        assert!(
            rel < 0.01,
            "transport cost off by {rel:.4} (sinkhorn {sk_cost} vs exact {exact_cost})"
        );
    }
    // self-divergence of a seeded measure
    let points = (0..4)
        .map(|_| DenseVector::new(vec![rng.normal(0.0, 1.0), rng.normal(0.0, 1.0)]))
        .collect();
    let p = openset::transport::EmpiricalMeasure::uniform(points).unwrap();
    let self_div = sinkhorn_divergence(&p, &p, 1.0, 0.1).unwrap().abs();
    assert!(self_div <= 1e-9, "self-divergence {self_div}");
    assert!(worst_residual <= 1e-6);
    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 10.0, "criterion 1 took {secs:.1}s, budget 10s");
    println!(
        "PASS criterion 1: sinkhorn vs exact on 50 instances, worst rel {worst_rel:.2e}, worst residual {worst_residual:.2e}, self-divergence {self_div:.2e}, {secs:.1}s"
    );
}

/// Criterion 2: power-iteration sigma within 1e-6 of an SVD oracle on 100
/// seeded matrices up to 64x64; after normalization sigma <= 1 + 1e-6;
/// idempotence within 1e-9.
#[test]
fn criterion_2_spectral_norm_against_svd_oracle() {
    let started = std::time::Instant::now();
    let mut rng = Rng::new(0xC2);
    let mut worst_gap = 0.0_f64;
    let mut worst_after = 0.0_f64;
    let mut worst_idem = 0.0_f64;
    for trial in 0..100 {
        let rows = 2 + rng.below(63); // 2..=64
        let cols = 2 + rng.below(63);
        let w = DenseMatrix::from_vec(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.normal(0.0, 1.0)).collect(),
        )
        .unwrap();
        let u0 = DenseVector::new((0..rows).map(|_| rng.normal(0.0, 1.0)).collect());
        let (sigma, _, _) = openset::numerics::power_iteration(&w, 100_000, &u0).unwrap();
        let oracle = jacobi_svd_sigma_max(&w);
        let gap = (sigma - oracle).abs();
        worst_gap = worst_gap.max(gap);
        assert!(gap <= 1e-6, "trial {trial}: sigma {sigma} vs oracle {oracle}");

        // normalize through the model path and re-measure
        let mut params = dummy_params_with_classifier(w.clone(), &u0);
        apply_spectral_norm(&mut params, 100_000).unwrap();
        let after = jacobi_svd_sigma_max(&params.classifier_weights);
        worst_after = worst_after.max(after);
        assert!(after <= 1.0 + 1e-6, "trial {trial}: sigma after normalization {after}");

        let once = params.classifier_weights.clone();
        apply_spectral_norm(&mut params, 100_000).unwrap();
        let drift = once
            .data()
            .iter()
            .zip(params.classifier_weights.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        worst_idem = worst_idem.max(drift);
        assert!(drift <= 1e-9, "trial {trial}: reapplication drift {drift}");
    }
    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 5.0, "criterion 2 took {secs:.1}s, budget 5s");
    println!(
        "PASS criterion 2: 100 matrices, worst |sigma - svd| {worst_gap:.2e}, worst post-norm sigma {worst_after:.9}, worst idempotence drift {worst_idem:.2e}, {secs:.1}s"
    );
}

fn dummy_params_with_classifier(w: DenseMatrix, u0: &DenseVector) -> ModelParams {
    use openset::model::LayerParams;
    let d = w.cols();
    ModelParams {
        feature_layers: vec![LayerParams {
            weights: DenseMatrix::identity(d),
            bias: DenseVector::zeros(d),
        }],
        contrastive_head: LayerParams {
            weights: DenseMatrix::identity(d),
            bias: DenseVector::zeros(d),
        },
        classifier_weights: w,
        sn_state: u0.normalized(),
    }
}

/// Criterion 3: analytic gradients of every loss component and of the
/// combined loss through the full model match central finite differences
/// (step 1e-5) at relative error < 1e-4, on 10 seeded configurations each.
#[test]
fn criterion_3_gradient_suite() {
    let started = std::time::Instant::now();
    let rel_tol = 1e-4;
    let h = 1e-5;
    // The differencing oracle carries truncation noise ~ h^2 f'''/6; with
    // the cosine scale alpha = 20 the third derivatives reach ~1e4, an
    // absolute floor near 2e-7. Entries below the floor-dominated scale
    // are held to an absolute bound instead of the relative one.
    let check = |fd: f64, analytic: f64, what: &str| {
        let denom = fd.abs().max(analytic.abs());
        if denom > 5e-3 {
            let rel = (fd - analytic).abs() / denom;
            assert!(rel < rel_tol, "{what}: analytic {analytic} vs fd {fd} (rel {rel:.2e})");
        } else {
            assert!(
                (fd - analytic).abs() < 5e-7,
                "{what}: {analytic} vs {fd} (abs {:.2e})",
                (fd - analytic).abs()
            );
        }
    };

    for config in 0..10 {
        let mut rng = Rng::new(0xC3 + config);
        let c_total = 5;
        let n = 4;

        // L_CE over random logits
        let logits = DenseMatrix::from_vec(
            n,
            c_total,
            (0..n * c_total).map(|_| rng.normal(0.0, 3.0)).collect(),
        )
        .unwrap();
        let labels: Vec<usize> = (0..n).map(|_| rng.below(c_total)).collect();
        let ce = cross_entropy_loss(&logits, &labels).unwrap();
        probe_logits(&logits, h, &ce.d_logits, check, |l| {
            cross_entropy_loss(l, &labels).unwrap().value
        });

        // L_UP (weights frozen at base point, as the gradient defines)
        let unknown = 3usize;
        let up_labels: Vec<usize> =
            (0..n).map(|_| [0usize, 1, 2, 4][rng.below(4)]).collect();
        let weights = up_sample_weights(&logits, &up_labels, 1.0, unknown).unwrap();
        let up = unknown_probability_loss(&logits, &up_labels, 1.0, unknown).unwrap();
        probe_logits(&logits, h, &up.d_logits, check, |l| {
            openset::losses::unknown_probability_loss_frozen(l, &up_labels, &weights, unknown)
                .unwrap()
                .value
        });

        // L_CWA
        let anchors = build_anchors(3, c_total, 5.0).unwrap();
        let cwa_labels: Vec<usize> = (0..n).map(|_| rng.below(3)).collect();
        let cwa = cwa_loss(&logits, &cwa_labels, &anchors, 1.0, 0.1).unwrap();
        probe_logits(&logits, h, &cwa.d_logits, check, |l| {
            cwa_loss(l, &cwa_labels, &anchors, 1.0, 0.1).unwrap().value
        });

        // L_IC over unit embeddings and a seeded bank
        let e_dim = 4;
        let mut bank = MemoryBank::new(8, 3);
        for class in 0..3 {
            for _ in 0..3 {
                let v = DenseVector::new((0..e_dim).map(|_| rng.normal(0.0, 1.0)).collect())
                    .normalized();
                bank.push(class, v).unwrap();
            }
        }
        let z = DenseMatrix::from_vec(
            n,
            e_dim,
            (0..n * e_dim).map(|_| rng.normal(0.0, 1.0)).collect(),
        )
        .unwrap();
        let ic = instance_contrastive_loss(&z, &cwa_labels, &bank, 0.1).unwrap();
        probe_logits(&z, h, &ic.d_embeddings, check, |zz| {
            instance_contrastive_loss(zz, &cwa_labels, &bank, 0.1).unwrap().value
        });

        // Combined loss through the full model: every parameter. The width
        // keeps every sample's feature vector well away from the zero-norm
        // cosine guard (an all-dead ReLU row would sit exactly on it).
        let dims = openset::model::ModelDims {
            input_dim: 2,
            hidden: vec![12],
            feature_dim: 5,
            embed_dim: e_dim,
            c_total,
        };
        let mut params = ModelParams::init(&dims, &mut rng);
        apply_spectral_norm(&mut params, 1000).unwrap();
        let batch =
            DenseMatrix::from_vec(n, 2, (0..n * 2).map(|_| rng.normal(0.0, 1.5)).collect())
                .unwrap();
        {
            let probe = forward(&params, &batch, 20.0).unwrap();
            for i in 0..n {
                let fnorm: f64 = probe
                    .features
                    .row(i)
                    .iter()
                    .map(|x| x * x)
                    .sum::<f64>()
                    .sqrt();
                assert!(fnorm > 1e-3, "config {config}: degenerate feature norm {fnorm}");
            }
        }
        let layout = ClassLayout::new(3);
        let batch_labels: Vec<usize> =
            (0..n).map(|_| if rng.below(4) == 0 { layout.background_index() } else { rng.below(3) })
                .collect();
        let coeffs = LossCoefficients {
            lambda: 1.7e-3,
            beta: 0.5,
            delta_k: 0.21,
            tau: 0.1,
            alpha_w: 1.0,
            cost_power: 1.0,
            blur: 0.1,
        };
        let anchors20 = build_anchors(3, c_total, 20.0).unwrap();

        let trace = forward(&params, &batch, 20.0).unwrap();
        let mined =
            mine_hard_examples(&trace.logits, &batch_labels, &layout, 3, 3).unwrap();
        // freeze the UP weights of the mined subset at the base point
        let mined_logits = DenseMatrix::from_rows(
            &mined.iter().map(|&i| trace.logits.row(i).to_vec()).collect::<Vec<_>>(),
        )
        .unwrap();
        let mined_labels: Vec<usize> = mined.iter().map(|&i| batch_labels[i]).collect();
        let frozen_w =
            up_sample_weights(&mined_logits, &mined_labels, 1.0, layout.unknown_index()).unwrap();

        let scalar_loss = |p: &ModelParams| -> f64 {
            let t = forward(p, &batch, 20.0).unwrap();
            let ce = cross_entropy_loss(&t.logits, &batch_labels).unwrap().value;
            let sub = DenseMatrix::from_rows(
                &mined.iter().map(|&i| t.logits.row(i).to_vec()).collect::<Vec<_>>(),
            )
            .unwrap();
            let up = openset::losses::unknown_probability_loss_frozen(
                &sub,
                &mined_labels,
                &frozen_w,
                layout.unknown_index(),
            )
            .unwrap()
            .value;
            let ic = instance_contrastive_loss(&t.embeddings, &batch_labels, &bank, coeffs.tau)
                .unwrap()
                .value;
            let cwa = cwa_loss(&t.logits, &batch_labels, &anchors20, 1.0, coeffs.blur)
                .unwrap()
                .value;
            coeffs.lambda * cwa + coeffs.beta * up + ce + coeffs.delta_k * ic
        };

        let (breakdown, loss_grads) = combined_loss(
            TrainMode::OdCwa,
            &trace,
            &batch_labels,
            &bank,
            &anchors20,
            &coeffs,
            &mined,
            &layout,
        )
        .unwrap();
        assert_abs_diff_eq!(breakdown.total, scalar_loss(&params), epsilon = 1e-10);
        let grads = backward(&params, &trace, &loss_grads).unwrap();
        let analytic = grads.to_flat();
        let flat = params.to_flat();
        for k in 0..flat.len() {
            let mut probe = params.clone();
            let mut bumped = flat.clone();
            bumped[k] += h;
            probe.assign_from_flat(&bumped).unwrap();
            let up_v = scalar_loss(&probe);
            bumped[k] -= 2.0 * h;
            probe.assign_from_flat(&bumped).unwrap();
            let down_v = scalar_loss(&probe);
            check((up_v - down_v) / (2.0 * h), analytic[k], &format!("combined param {k}"));
        }
    }
    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 60.0, "criterion 3 took {secs:.1}s, budget 60s");
    println!(
        "PASS criterion 3: IC/CE/UP/CWA and combined-loss gradients match finite differences at rel < 1e-4 on 10 configs each, {secs:.1}s"
    );
}

fn probe_logits<F, C>(base: &DenseMatrix, h: f64, analytic: &DenseMatrix, check: C, f: F)
where
    F: Fn(&DenseMatrix) -> f64,
    C: Fn(f64, f64, &str),
{
    for i in 0..base.rows() {
        for j in 0..base.cols() {
            let mut up = base.clone();
            up[(i, j)] += h;
            let mut down = base.clone();
            down[(i, j)] -= h;
            let fd = (f(&up) - f(&down)) / (2.0 * h);
            check(fd, analytic[(i, j)], &format!("entry ({i},{j})"));
        }
    }
}

/// Criterion 4: WI, AOSE, AP, compactness and the five cluster indices
/// match independent brute-force implementations within 1e-9 on 20 seeded
/// instances, including every hand example.
#[test]
fn criterion_4_metric_oracles() {
    let started = std::time::Instant::now();

    // Hand examples first.
    common::metric_hand_examples();

    let mut rng = Rng::new(0xC4);
    for trial in 0..20 {
        // seeded records
        let n = 10 + rng.below(30);
        let records: Vec<eval::DetectionRecord> = (0..n)
            .map(|i| {
                let gt = match rng.below(4) {
                    0 => eval::GT_UNKNOWN,
                    1 => eval::GT_BACKGROUND,
                    _ => rng.below(3) as i32,
                };
                let pred = if rng.below(5) == 0 { eval::GT_UNKNOWN } else { rng.below(3) as i32 };
                eval::DetectionRecord {
                    id: format!("r{i}"),
                    pred,
                    score: rng.uniform(),
                    gt,
                    matched: gt != eval::GT_BACKGROUND,
                }
            })
            .collect();

        // AP against a brute-force oracle for each known class
        for class in 0..3 {
            let total = records.iter().filter(|r| r.gt == class).count();
            if total == 0 {
                continue;
            }
            let ours = eval::average_precision_for_class(&records, class, total).unwrap();
            let brute = common::brute_force_ap(&records, class, total);
            assert_abs_diff_eq!(ours, brute, epsilon = 1e-9);
        }

        // WI and AOSE against direct enumeration at a few thresholds
        for t in [0.2, 0.5, 0.8] {
            let known = vec![0, 1, 2];
            let ours = eval::wilderness_impact(&records, &known, t);
            let brute = common::brute_force_wi(&records, &known, t);
            match (ours, brute) {
                (Ok(a), Some(b)) => {
                    if a.is_finite() {
                        assert_abs_diff_eq!(a, b, epsilon = 1e-9);
                    } else {
                        assert!(!b.is_finite());
                    }
                }
                (Err(_), None) => {}
                (a, b) => panic!("trial {trial}: WI mismatch {a:?} vs {b:?}"),
            }
            assert_eq!(
                eval::aose(&records, t),
                common::brute_force_aose(&records, t),
                "trial {trial} threshold {t}"
            );
        }

        // compactness + indices on seeded blobs
        let k = 2 + rng.below(3);
        let mut embeddings = Vec::new();
        for c in 0..k {
            let cx = rng.range(-8.0, 8.0);
            let cy = rng.range(-8.0, 8.0);
            for _ in 0..(3 + rng.below(4)) {
                embeddings.push(LabeledEmbedding {
                    embedding: DenseVector::new(vec![
                        cx + rng.normal(0.0, 0.6),
                        cy + rng.normal(0.0, 0.6),
                    ]),
                    class_id: c,
                });
            }
        }
        let ratio = eval::compactness_ratio(&embeddings).unwrap();
        assert_abs_diff_eq!(ratio, common::brute_force_sigma_mu(&embeddings), epsilon = 1e-9);
        let ours = eval::cluster_indices(&embeddings).unwrap();
        let brute = common::brute_force_indices(&embeddings);
        assert_abs_diff_eq!(ours.dunn, brute.dunn, epsilon = 1e-9);
        assert_abs_diff_eq!(
            ours.calinski_harabasz,
            brute.chi,
            epsilon = 1e-9 * (1.0 + brute.chi)
        );
        assert_abs_diff_eq!(ours.hubert, brute.hubert, epsilon = 1e-9);
        assert_abs_diff_eq!(ours.davies_bouldin, brute.dbi, epsilon = 1e-9);
        assert_abs_diff_eq!(ours.xie_beni, brute.xbi, epsilon = 1e-9);
    }
    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 5.0, "criterion 4 took {secs:.1}s, budget 5s");
    println!(
        "PASS criterion 4: metrics match brute-force oracles within 1e-9 on 20 seeded instances plus hand examples, {secs:.1}s"
    );
}

/// Criterion 5: directional ablation over 5 seeds on the default
/// 5-known/3-unknown benchmark: mean AOSE(od-cwa) <= 0.85 x mean
/// AOSE(ce-baseline), mean WI(od-cwa) < mean WI(ce-baseline), and mean
/// sigma/mu(od-cwa) < mean sigma/mu(od-sn).
#[test]
fn criterion_5_directional_ablation() {
    let started = std::time::Instant::now();
    let seeds: Vec<u64> = (0..5).map(|i| 100 + i).collect();
    let mut mean = |mode: TrainMode| -> (f64, f64, f64) {
        let (mut aose, mut wi, mut sm) = (0.0, 0.0, 0.0);
        for &seed in &seeds {
            let cfg = TrainConfig { mode, seed, ..TrainConfig::default() };
            let out = run_experiment(&cfg).unwrap();
            let m = out.report.metrics.unwrap();
            aose += m.aose as f64 / seeds.len() as f64;
            wi += m.wi / seeds.len() as f64;
            sm += m.sigma_mu.expect("compactness defined on the benchmark")
                / seeds.len() as f64;

            // loss-series sanity for every shipped config: the final 10%
            // of iterations must not average above the first 10%.
            let series = &out.report.loss_series;
            let tenth = series.len() / 10;
            let head: f64 =
                series[..tenth].iter().map(|b| b.total).sum::<f64>() / tenth as f64;
            let tail: f64 = series[series.len() - tenth..]
                .iter()
                .map(|b| b.total)
                .sum::<f64>()
                / tenth as f64;
            assert!(
                tail <= head,
                "{mode} seed {seed}: loss rose from {head:.4} to {tail:.4}"
            );
        }
        (aose, wi, sm)
    };
    let ce = mean(TrainMode::CeBaseline);
    let sn = mean(TrainMode::OdSn);
    let cwa = mean(TrainMode::OdCwa);

    let secs = started.elapsed().as_secs_f64();
    println!(
        "criterion 5 means: AOSE ce {:.1} / sn {:.1} / cwa {:.1}; WI ce {:.2} / cwa {:.2}; sigma_mu sn {:.5} / cwa {:.5} ({secs:.0}s)",
        ce.0, sn.0, cwa.0, ce.1, cwa.1, sn.2, cwa.2
    );
    assert!(secs < 600.0, "criterion 5 took {secs:.0}s, budget 600s");
    assert!(
        cwa.0 <= 0.85 * ce.0,
        "mean AOSE: od-cwa {:.1} > 0.85 x ce-baseline {:.1}",
        cwa.0,
        0.85 * ce.0
    );
    assert!(cwa.1 < ce.1, "mean WI: od-cwa {:.2} >= ce-baseline {:.2}", cwa.1, ce.1);
    assert!(
        cwa.2 < sn.2,
        "mean sigma/mu: od-cwa {:.5} >= od-sn {:.5}",
        cwa.2,
        sn.2
    );
    println!(
        "PASS criterion 5: AOSE {:.1} <= 0.85x{:.1}, WI {:.2} < {:.2}, sigma/mu {:.5} < {:.5}",
        cwa.0,
        ce.0,
        cwa.1,
        ce.1,
        cwa.2,
        sn.2
    );
}

/// Criterion 6: the blur sweep over the five paper values completes with
/// no numerical failures and emits one fully populated CSV row per cell.
#[test]
fn criterion_6_blur_sweep() {
    let base = TrainConfig {
        iterations: 600,
        ..TrainConfig::default()
    };
    let grid = SweepGrid {
        blur: Some(vec![0.5, 0.3, 0.2, 0.15, 0.1]),
        ..SweepGrid::default()
    };
    let rows = openset::pipeline::run_sweep(&base, &grid);
    assert_eq!(rows.len(), 5);
    for row in &rows {
        assert!(row.error.is_none(), "blur {} failed: {:?}", row.blur, row.error);
        for (name, v) in [
            ("accuracy", row.accuracy),
            ("map_known", row.map_known),
            ("ap_unknown", row.ap_unknown),
            ("wi", row.wi),
            ("sigma_mu", row.sigma_mu),
            ("dunn", row.dunn),
            ("calinski_harabasz", row.calinski_harabasz),
            ("hubert", row.hubert),
            ("davies_bouldin", row.davies_bouldin),
            ("xie_beni", row.xie_beni),
        ] {
            assert!(v.is_some(), "blur {}: metric {name} missing", row.blur);
        }
        assert!(row.aose.is_some());
    }
    let csv = openset::pipeline::sweep_rows_to_csv(&rows);
    assert_eq!(csv.lines().count(), 6); // header + 5 cells
    println!("PASS criterion 6: blur sweep over {{0.5, 0.3, 0.2, 0.15, 0.1}} emitted 5 populated rows");
}

/// Criterion 7: od-cwa with lambda = 0 reproduces the od-sn trajectory bit
/// for bit; ce-baseline contains no nonzero auxiliary loss terms.
#[test]
fn criterion_7_reduction_identities() {
    let small = TrainConfig {
        iterations: 120,
        samples_per_class: 60,
        background_samples: 40,
        test_samples_per_class: 20,
        test_background_samples: 15,
        unknown_samples_per_cluster: 15,
        ..TrainConfig::default()
    };

    let cwa0 = TrainConfig { mode: TrainMode::OdCwa, lambda: 0.0, ..small.clone() };
    let sn = TrainConfig { mode: TrainMode::OdSn, lambda: 0.0, ..small.clone() };
    let ds = generate_dataset(&cwa0).unwrap();
    let (p1, r1) = train(&cwa0, &ds).unwrap();
    let (p2, r2) = train(&sn, &ds).unwrap();
    assert_eq!(p1, p2, "parameter trajectories diverged");
    for (a, b) in r1.loss_series.iter().zip(&r2.loss_series) {
        assert_eq!(a.total.to_bits(), b.total.to_bits(), "loss series diverged");
    }

    let ce = TrainConfig { mode: TrainMode::CeBaseline, ..small };
    let ds = generate_dataset(&ce).unwrap();
    let (_, report) = train(&ce, &ds).unwrap();
    for b in &report.loss_series {
        assert_eq!(b.l_ic, 0.0);
        assert_eq!(b.l_up, 0.0);
        assert_eq!(b.l_cwa, 0.0);
    }
    println!("PASS criterion 7: od-cwa(lambda=0) == od-sn bit-identically; ce-baseline has only the CE term");
}

/// Criterion 8: two CLI `train` runs with the same config and seed produce
/// identical report.json up to wall-clock fields.
#[test]
fn criterion_8_cli_determinism() {
    let bin = env!("CARGO_BIN_EXE_openset");
    let dir = tempfile::tempdir().unwrap();
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    for out in [&out1, &out2] {
        let status = std::process::Command::new(bin)
            .args([
                "train",
                "--iterations",
                "150",
                "--samples-per-class",
                "60",
                "--background-samples",
                "40",
                "--test-samples-per-class",
                "20",
                "--test-background-samples",
                "15",
                "--unknown-samples-per-cluster",
                "15",
                "--out",
            ])
            .arg(out)
            .status()
            .expect("run openset train");
        assert!(status.success());
    }
    let canonical = |path: &std::path::Path| -> serde_json::Value {
        let text = std::fs::read_to_string(path.join("report.json")).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v.as_object_mut().unwrap().remove("wall_clock_seconds");
        v
    };
    assert_eq!(canonical(&out1), canonical(&out2), "reports differ beyond wall clock");
    println!("PASS criterion 8: identical config and seed give identical report.json (wall clock excluded)");
}
