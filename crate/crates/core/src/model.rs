//! The trainable network: a small feedforward feature extractor, a
//! contrastive projection head, and a spectral-normalized scaled-cosine
//! classifier, with analytic gradients for every parameter.
//!
//! Spectral normalization is a projection: after every optimizer step the
//! classifier matrix is rescaled by `1 / max(1, sigma)`, and the backward
//! pass treats that scaling as a constant. Gradients are validated against
//! central finite differences in the test suite.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{power_iteration, DenseMatrix, DenseVector, Rng};

/// Norms below this are treated as zero in cosine and embedding scaling.
const NORM_GUARD: f64 = 1e-12;

/// Spectral rescaling is skipped inside this band above 1, so a matrix the
/// estimator already normalized is left untouched on the next call
/// (idempotence); the band is well under the 1e-6 Lipschitz slack.
const SN_DEAD_BAND: f64 = 1e-7;

/// One affine layer, `y = x W^T + b` with `weights` of shape (out x in).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub weights: DenseMatrix,
    pub bias: DenseVector,
}

/// Width specification for [`ModelParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDims {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub feature_dim: usize,
    pub embed_dim: usize,
    /// K known classes + 1 unknown + 1 background.
    pub c_total: usize,
}

/// All trainable state plus the persistent power-iteration vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// ReLU after every layer except the last (the feature layer is linear).
    pub feature_layers: Vec<LayerParams>,
    pub contrastive_head: LayerParams,
    /// Shape (c_total x feature_dim); rows are the class weight vectors.
    pub classifier_weights: DenseMatrix,
    /// Warm-start left singular vector for spectral normalization.
    pub sn_state: DenseVector,
}

impl ModelParams {
    /// He-initialized network; fully determined by `(dims, rng seed)`.
    pub fn init(dims: &ModelDims, rng: &mut Rng) -> Self {
        let mut feature_layers = Vec::new();
        let mut fan_in = dims.input_dim;
        for &width in dims.hidden.iter().chain(std::iter::once(&dims.feature_dim)) {
            feature_layers.push(random_layer(rng, width, fan_in));
            fan_in = width;
        }
        let contrastive_head = random_layer(rng, dims.embed_dim, dims.feature_dim);
        let scale = 1.0 / (dims.feature_dim as f64).sqrt();
        let classifier_weights = DenseMatrix::from_vec(
            dims.c_total,
            dims.feature_dim,
            (0..dims.c_total * dims.feature_dim)
                .map(|_| rng.normal(0.0, scale))
                .collect(),
        )
        .expect("shape is consistent by construction");
        let sn_state = DenseVector::new(
            (0..dims.c_total).map(|_| rng.normal(0.0, 1.0)).collect(),
        )
        .normalized();
        Self { feature_layers, contrastive_head, classifier_weights, sn_state }
    }

    pub fn dims(&self) -> ModelDims {
        let input_dim = self.feature_layers[0].weights.cols();
        let hidden = self.feature_layers[..self.feature_layers.len() - 1]
            .iter()
            .map(|l| l.weights.rows())
            .collect();
        ModelDims {
            input_dim,
            hidden,
            feature_dim: self.feature_layers.last().unwrap().weights.rows(),
            embed_dim: self.contrastive_head.weights.rows(),
            c_total: self.classifier_weights.rows(),
        }
    }

    /// Flattened view of every trainable value (finite-difference probes
    /// and the optimizer's velocity buffer share this layout).
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.feature_layers {
            out.extend_from_slice(l.weights.data());
            out.extend_from_slice(l.bias.as_slice());
        }
        out.extend_from_slice(self.contrastive_head.weights.data());
        out.extend_from_slice(self.contrastive_head.bias.as_slice());
        out.extend_from_slice(self.classifier_weights.data());
        out
    }

    /// Inverse of [`Self::to_flat`]; `sn_state` is untouched.
    pub fn assign_from_flat(&mut self, flat: &[f64]) -> Result<()> {
        let mut pos = 0;
        let take = |n: usize, pos: &mut usize| -> Result<std::ops::Range<usize>> {
            if *pos + n > flat.len() {
                return Err(Error::ShapeMismatch("flat vector too short".into()));
            }
            let r = *pos..*pos + n;
            *pos += n;
            Ok(r)
        };
        for l in &mut self.feature_layers {
            let r = take(l.weights.data().len(), &mut pos)?;
            l.weights.data_mut().copy_from_slice(&flat[r]);
            let r = take(l.bias.len(), &mut pos)?;
            l.bias.as_mut_slice().copy_from_slice(&flat[r]);
        }
        let r = take(self.contrastive_head.weights.data().len(), &mut pos)?;
        self.contrastive_head.weights.data_mut().copy_from_slice(&flat[r]);
        let r = take(self.contrastive_head.bias.len(), &mut pos)?;
        self.contrastive_head.bias.as_mut_slice().copy_from_slice(&flat[r]);
        let r = take(self.classifier_weights.data().len(), &mut pos)?;
        self.classifier_weights.data_mut().copy_from_slice(&flat[r]);
        if pos != flat.len() {
            return Err(Error::ShapeMismatch("flat vector too long".into()));
        }
        Ok(())
    }
}

fn random_layer(rng: &mut Rng, out_dim: usize, in_dim: usize) -> LayerParams {
    let scale = (2.0 / in_dim as f64).sqrt();
    LayerParams {
        weights: DenseMatrix::from_vec(
            out_dim,
            in_dim,
            (0..out_dim * in_dim).map(|_| rng.normal(0.0, scale)).collect(),
        )
        .expect("shape is consistent by construction"),
        bias: DenseVector::zeros(out_dim),
    }
}

/// Everything the backward pass needs from a forward evaluation.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub batch: DenseMatrix,
    /// Pre-activation of each feature layer.
    pre_activations: Vec<DenseMatrix>,
    /// Post-activation of each feature layer (last one equals `features`).
    activations: Vec<DenseMatrix>,
    /// F(x): N x feature_dim.
    pub features: DenseMatrix,
    feature_norms: Vec<f64>,
    embed_norms: Vec<f64>,
    /// Unit-norm embeddings z: N x embed_dim.
    pub embeddings: DenseMatrix,
    /// Scaled cosine logits: N x c_total.
    pub logits: DenseMatrix,
    classifier_norms: Vec<f64>,
    pub alpha_scale: f64,
}

impl ForwardTrace {
    pub fn batch_len(&self) -> usize {
        self.batch.rows()
    }
}

/// Gradients in one-to-one correspondence with [`ModelParams`].
#[derive(Debug, Clone)]
pub struct ParamGradients {
    pub feature_layers: Vec<LayerParams>,
    pub contrastive_head: LayerParams,
    pub classifier_weights: DenseMatrix,
}

impl ParamGradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self {
            feature_layers: params
                .feature_layers
                .iter()
                .map(|l| LayerParams {
                    weights: DenseMatrix::zeros(l.weights.rows(), l.weights.cols()),
                    bias: DenseVector::zeros(l.bias.len()),
                })
                .collect(),
            contrastive_head: LayerParams {
                weights: DenseMatrix::zeros(
                    params.contrastive_head.weights.rows(),
                    params.contrastive_head.weights.cols(),
                ),
                bias: DenseVector::zeros(params.contrastive_head.bias.len()),
            },
            classifier_weights: DenseMatrix::zeros(
                params.classifier_weights.rows(),
                params.classifier_weights.cols(),
            ),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.feature_layers {
            out.extend_from_slice(l.weights.data());
            out.extend_from_slice(l.bias.as_slice());
        }
        out.extend_from_slice(self.contrastive_head.weights.data());
        out.extend_from_slice(self.contrastive_head.bias.as_slice());
        out.extend_from_slice(self.classifier_weights.data());
        out
    }

    pub fn all_finite(&self) -> bool {
        self.to_flat().iter().all(|x| x.is_finite())
    }
}

/// Gradients of the scalar loss with respect to the trace outputs.
#[derive(Debug, Clone)]
pub struct LossGrads {
    /// d loss / d logits, N x c_total.
    pub d_logits: DenseMatrix,
    /// d loss / d unit embeddings, N x embed_dim.
    pub d_embeddings: DenseMatrix,
}

impl LossGrads {
    pub fn zeros(n: usize, c_total: usize, embed_dim: usize) -> Self {
        Self {
            d_logits: DenseMatrix::zeros(n, c_total),
            d_embeddings: DenseMatrix::zeros(n, embed_dim),
        }
    }

    pub fn add_assign(&mut self, other: &LossGrads, coeff: f64) {
        for (a, b) in self.d_logits.data_mut().iter_mut().zip(other.d_logits.data()) {
            *a += coeff * b;
        }
        for (a, b) in self
            .d_embeddings
            .data_mut()
            .iter_mut()
            .zip(other.d_embeddings.data())
        {
            *a += coeff * b;
        }
    }
}

/// Forward pass. Logits are `alpha * cos(F_i, w_j)` against the classifier
/// rows as currently stored (callers keep them spectral-normalized);
/// a zero-norm feature or weight vector makes its cosine term 0.
pub fn forward(params: &ModelParams, batch: &DenseMatrix, alpha_scale: f64) -> Result<ForwardTrace> {
    let dims = params.dims();
    if batch.cols() != dims.input_dim {
        return Err(Error::ShapeMismatch(format!(
            "batch has {} columns, model expects {}",
            batch.cols(),
            dims.input_dim
        )));
    }
    let n = batch.rows();
    let last = params.feature_layers.len() - 1;

    let mut pre_activations = Vec::with_capacity(params.feature_layers.len());
    let mut activations = Vec::with_capacity(params.feature_layers.len());
    let mut x = batch.clone();
    for (l, layer) in params.feature_layers.iter().enumerate() {
        let pre = affine(&x, layer)?;
        let act = if l == last { pre.clone() } else { relu(&pre) };
        pre_activations.push(pre);
        x = act.clone();
        activations.push(act);
    }
    let features = x;
    let feature_norms: Vec<f64> = (0..n).map(|i| norm(features.row(i))).collect();

    let embed_pre = affine(&features, &params.contrastive_head)?;
    let embed_norms: Vec<f64> = (0..n).map(|i| norm(embed_pre.row(i))).collect();
    let mut embeddings = DenseMatrix::zeros(n, dims.embed_dim);
    for i in 0..n {
        if embed_norms[i] > NORM_GUARD {
            let inv = 1.0 / embed_norms[i];
            for j in 0..dims.embed_dim {
                embeddings[(i, j)] = embed_pre[(i, j)] * inv;
            }
        }
    }

    let classifier_norms: Vec<f64> = (0..dims.c_total)
        .map(|j| norm(params.classifier_weights.row(j)))
        .collect();
    let mut logits = DenseMatrix::zeros(n, dims.c_total);
    for i in 0..n {
        let f = features.row(i);
        for j in 0..dims.c_total {
            let w = params.classifier_weights.row(j);
            let denom = feature_norms[i] * classifier_norms[j];
            let cos = if denom > NORM_GUARD { dot(f, w) / denom } else { 0.0 };
            logits[(i, j)] = alpha_scale * cos;
        }
    }

    Ok(ForwardTrace {
        batch: batch.clone(),
        pre_activations,
        activations,
        features,
        feature_norms,
        embed_norms,
        embeddings,
        logits,
        classifier_norms,
        alpha_scale,
    })
}

/// Backward pass: gradients of the scalar loss with respect to every
/// parameter, treating the spectral-norm scaling as a constant within the
/// step. `trace` must come from [`forward`] on the same `params`.
pub fn backward(
    params: &ModelParams,
    trace: &ForwardTrace,
    loss_grads: &LossGrads,
) -> Result<ParamGradients> {
    let dims = params.dims();
    let n = trace.batch_len();
    if loss_grads.d_logits.rows() != n
        || loss_grads.d_logits.cols() != dims.c_total
        || loss_grads.d_embeddings.rows() != n
        || loss_grads.d_embeddings.cols() != dims.embed_dim
    {
        return Err(Error::ShapeMismatch("loss gradient shapes".into()));
    }

    let mut grads = ParamGradients::zeros_like(params);
    let mut d_features = DenseMatrix::zeros(n, dims.feature_dim);

    // Classifier (scaled cosine) path.
    let alpha = trace.alpha_scale;
    for i in 0..n {
        let f = trace.features.row(i);
        let fnorm = trace.feature_norms[i];
        for j in 0..dims.c_total {
            let dl = loss_grads.d_logits[(i, j)];
            if dl == 0.0 {
                continue;
            }
            let w = params.classifier_weights.row(j);
            let wnorm = trace.classifier_norms[j];
            if fnorm * wnorm <= NORM_GUARD {
                continue; // cosine pinned at 0
            }
            let cos = dot(f, w) / (fnorm * wnorm);
            let dcos = dl * alpha;
            for k in 0..dims.feature_dim {
                d_features[(i, k)] +=
                    dcos * (w[k] / (fnorm * wnorm) - cos * f[k] / (fnorm * fnorm));
                grads.classifier_weights[(j, k)] +=
                    dcos * (f[k] / (fnorm * wnorm) - cos * w[k] / (wnorm * wnorm));
            }
        }
    }

    // Embedding normalization, then the contrastive head.
    let mut d_embed_pre = DenseMatrix::zeros(n, dims.embed_dim);
    for i in 0..n {
        let enorm = trace.embed_norms[i];
        if enorm <= NORM_GUARD {
            continue; // z pinned at 0
        }
        let z = trace.embeddings.row(i);
        let dz = loss_grads.d_embeddings.row(i);
        let dzz = dot(dz, z);
        for k in 0..dims.embed_dim {
            d_embed_pre[(i, k)] = (dz[k] - dzz * z[k]) / enorm;
        }
    }
    accumulate_affine(
        &trace.features,
        &d_embed_pre,
        &params.contrastive_head,
        &mut grads.contrastive_head,
        Some(&mut d_features),
    )?;

    // Feature layers, last to first.
    let mut d_out = d_features;
    for l in (0..params.feature_layers.len()).rev() {
        let is_last = l == params.feature_layers.len() - 1;
        let mut dz = d_out;
        if !is_last {
            let pre = &trace.pre_activations[l];
            for (g, &p) in dz.data_mut().iter_mut().zip(pre.data()) {
                if p <= 0.0 {
                    *g = 0.0;
                }
            }
        }
        let input = if l == 0 { &trace.batch } else { &trace.activations[l - 1] };
        let mut d_input = DenseMatrix::zeros(input.rows(), input.cols());
        accumulate_affine(
            input,
            &dz,
            &params.feature_layers[l],
            &mut grads.feature_layers[l],
            Some(&mut d_input),
        )?;
        d_out = d_input;
    }

    Ok(grads)
}

/// Replaces the classifier matrix with `W / max(1, sigma)`, estimating
/// `sigma` by power iteration warm-started from `sn_state` (which is
/// updated in place). Reapplying is a no-op: an already-normalized matrix
/// estimates inside the dead band and passes through untouched. A zero
/// matrix also passes through unchanged. Returns the sigma estimate.
pub fn apply_spectral_norm(params: &mut ModelParams, iters: usize) -> Result<f64> {
    if params.classifier_weights.data().iter().all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    let (sigma, u, _) = power_iteration(&params.classifier_weights, iters, &params.sn_state)?;
    params.sn_state = u;
    if sigma > 1.0 + SN_DEAD_BAND {
        params.classifier_weights = params.classifier_weights.scale(1.0 / sigma);
    }
    Ok(sigma)
}

/// Momentum SGD with classic coupled weight decay: the velocity accumulates
/// `grad + wd * theta` and parameters move along it. Spectral normalization
/// is reapplied after every step.
#[derive(Debug, Clone)]
pub struct SgdOptimizer {
    pub momentum: f64,
    pub weight_decay: f64,
    pub sn_iters: usize,
    velocity: Option<Vec<f64>>,
}

impl SgdOptimizer {
    pub fn new(momentum: f64, weight_decay: f64, sn_iters: usize) -> Self {
        Self { momentum, weight_decay, sn_iters, velocity: None }
    }

    pub fn step(
        &mut self,
        params: &mut ModelParams,
        grads: &ParamGradients,
        lr: f64,
    ) -> Result<()> {
        let mut flat = params.to_flat();
        let gflat = grads.to_flat();
        if gflat.len() != flat.len() {
            return Err(Error::ShapeMismatch("gradient/parameter length".into()));
        }
        let velocity = self.velocity.get_or_insert_with(|| vec![0.0; flat.len()]);
        if velocity.len() != flat.len() {
            return Err(Error::ShapeMismatch("velocity/parameter length".into()));
        }
        for ((theta, v), g) in flat.iter_mut().zip(velocity.iter_mut()).zip(&gflat) {
            *v = self.momentum * *v + (g + self.weight_decay * *theta);
            *theta -= lr * *v;
        }
        params.assign_from_flat(&flat)?;
        if self.sn_iters > 0 {
            apply_spectral_norm(params, self.sn_iters)?;
        }
        Ok(())
    }
}

/// Schema tag for checkpoint files.
pub const CHECKPOINT_SCHEMA: &str = "openset-checkpoint-v1";

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointFile {
    schema: String,
    params: ModelParams,
}

/// Serialize parameters to the versioned JSON checkpoint format.
pub fn checkpoint_to_json(params: &ModelParams) -> Result<String> {
    Ok(serde_json::to_string_pretty(&CheckpointFile {
        schema: CHECKPOINT_SCHEMA.to_string(),
        params: params.clone(),
    })?)
}

/// Parse a JSON checkpoint, rejecting unknown schema tags.
pub fn checkpoint_from_json(text: &str) -> Result<ModelParams> {
    let file: CheckpointFile = serde_json::from_str(text)?;
    if file.schema != CHECKPOINT_SCHEMA {
        return Err(Error::InvalidArgument(format!(
            "unsupported checkpoint schema {:?}",
            file.schema
        )));
    }
    Ok(file.params)
}

fn affine(x: &DenseMatrix, layer: &LayerParams) -> Result<DenseMatrix> {
    let wt = layer.weights.transpose();
    let mut out = x.matmul(&wt)?;
    let bias = layer.bias.as_slice();
    for i in 0..out.rows() {
        for j in 0..out.cols() {
            out[(i, j)] += bias[j];
        }
    }
    Ok(out)
}

fn relu(x: &DenseMatrix) -> DenseMatrix {
    let mut out = x.clone();
    for v in out.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    out
}

/// Accumulate affine-layer gradients: `d_weights += dz^T input`,
/// `d_bias += column sums of dz`, and optionally `d_input += dz W`.
fn accumulate_affine(
    input: &DenseMatrix,
    dz: &DenseMatrix,
    layer: &LayerParams,
    grad: &mut LayerParams,
    d_input: Option<&mut DenseMatrix>,
) -> Result<()> {
    let dw = dz.transpose().matmul(input)?;
    for (g, d) in grad.weights.data_mut().iter_mut().zip(dw.data()) {
        *g += d;
    }
    for i in 0..dz.rows() {
        for j in 0..dz.cols() {
            grad.bias[j] += dz[(i, j)];
        }
    }
    if let Some(di) = d_input {
        let dx = dz.matmul(&layer.weights)?;
        for (g, d) in di.data_mut().iter_mut().zip(dx.data()) {
            *g += d;
        }
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
