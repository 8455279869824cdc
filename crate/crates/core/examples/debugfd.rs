use openset::losses::*;
use openset::model::*;
use openset::numerics::{DenseMatrix, DenseVector, Rng};

fn main() {
    let mut rng = Rng::new(0xC3);
    let c_total = 5;
    let n = 4;
    // replicate criterion-3 config 0 up to the combined-loss section
    let _logits = DenseMatrix::from_vec(n, c_total, (0..n*c_total).map(|_| rng.normal(0.0, 3.0)).collect()).unwrap();
    let _labels: Vec<usize> = (0..n).map(|_| rng.below(c_total)).collect();
    let _ce_probe: Vec<f64> = vec![]; // placeholder, FD probes on logits consumed no rng
    let up_labels: Vec<usize> = (0..n).map(|_| [0usize,1,2,4][rng.below(4)]).collect();
    let _ = up_labels;
    let anchors = build_anchors(3, c_total, 5.0).unwrap();
    let cwa_labels: Vec<usize> = (0..n).map(|_| rng.below(3)).collect();
    let _ = cwa_loss(&_logits, &cwa_labels, &anchors, 1.0, 0.1);
    let e_dim = 4;
    let mut bank = MemoryBank::new(8, 3);
    for class in 0..3 {
        for _ in 0..3 {
            let v = DenseVector::new((0..e_dim).map(|_| rng.normal(0.0, 1.0)).collect()).normalized();
            bank.push(class, v).unwrap();
        }
    }
    let z = DenseMatrix::from_vec(n, e_dim, (0..n*e_dim).map(|_| rng.normal(0.0, 1.0)).collect()).unwrap();
    let _ = z;
    let dims = ModelDims { input_dim: 2, hidden: vec![6], feature_dim: 5, embed_dim: e_dim, c_total };
    let mut params = ModelParams::init(&dims, &mut rng);
    apply_spectral_norm(&mut params, 1000).unwrap();
    let batch = DenseMatrix::from_vec(n, 2, (0..n*2).map(|_| rng.normal(0.0, 1.5)).collect()).unwrap();
    let layout = ClassLayout::new(3);
    let batch_labels: Vec<usize> = (0..n).map(|_| if rng.below(4) == 0 { layout.background_index() } else { rng.below(3) }).collect();

    let trace = forward(&params, &batch, 20.0).unwrap();
    let mined = mine_hard_examples(&trace.logits, &batch_labels, &layout, 3, 3).unwrap();
    let mined_logits = DenseMatrix::from_rows(&mined.iter().map(|&i| trace.logits.row(i).to_vec()).collect::<Vec<_>>()).unwrap();
    let mined_labels: Vec<usize> = mined.iter().map(|&i| batch_labels[i]).collect();
    let frozen_w = up_sample_weights(&mined_logits, &mined_labels, 1.0, layout.unknown_index()).unwrap();
    let anchors20 = build_anchors(3, c_total, 20.0).unwrap();

    let parts = |p: &ModelParams| -> (f64, f64, f64, f64) {
        let t = forward(p, &batch, 20.0).unwrap();
        let ce = cross_entropy_loss(&t.logits, &batch_labels).unwrap().value;
        let sub = DenseMatrix::from_rows(&mined.iter().map(|&i| t.logits.row(i).to_vec()).collect::<Vec<_>>()).unwrap();
        let up = unknown_probability_loss_frozen(&sub, &mined_labels, &frozen_w, layout.unknown_index()).unwrap().value;
        let ic = instance_contrastive_loss(&t.embeddings, &batch_labels, &bank, 0.1).unwrap().value;
        let cwa = cwa_loss(&t.logits, &batch_labels, &anchors20, 1.0, 0.1).unwrap().value;
        (ce, up, ic, cwa)
    };

    let flat = params.to_flat();
    let h = 1e-5;
    let k = 48;
    for delta in [h, -h] {
        let mut probe = params.clone();
        let mut bumped = flat.clone();
        bumped[k] += delta;
        probe.assign_from_flat(&bumped).unwrap();
        let (ce, up, ic, cwa) = parts(&probe);
        println!("delta {delta:+e}: ce={ce:.9} up={up:.9} ic={ic:.9} cwa={cwa:.9}");
    }
    println!("labels: {batch_labels:?}, mined: {mined:?}");
}
