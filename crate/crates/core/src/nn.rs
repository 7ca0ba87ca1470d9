//! Dense-layer numerical engine.
//!
//! Everything here works in `f64`. Batches are `ndarray` matrices with one
//! sample per row, so a layer forward is a single GEMM: `Z = X·Wᵀ + b`.
//! Weight matrices are stored row-major with shape `(out_dim, in_dim)`, the
//! same layout the model file uses.
//!
//! Gradients are computed by hand (reverse mode, layer by layer) rather than
//! through a tape. [`finite_diff_grad`] is the independent oracle used to
//! check them.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};

/// Storage precision of trainable parameters.
///
/// Arithmetic is always carried out in `f64`. An `F32` network keeps every
/// parameter exactly representable as `f32`, so it can be written to disk at
/// 4 bytes per scalar and read back bit-exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

impl Precision {
    pub fn bytes(self) -> u8 {
        match self {
            Precision::F32 => 4,
            Precision::F64 => 8,
        }
    }

    pub fn from_bytes(b: u8) -> Option<Self> {
        match b {
            4 => Some(Precision::F32),
            8 => Some(Precision::F64),
            _ => None,
        }
    }

    #[inline]
    pub fn quantize(self, x: f64) -> f64 {
        match self {
            Precision::F32 => x as f32 as f64,
            Precision::F64 => x,
        }
    }
}

/// A fully connected layer `W·x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    out_dim: usize,
    in_dim: usize,
    /// Row-major, `out_dim × in_dim`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            out_dim,
            in_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    pub fn from_parts(in_dim: usize, out_dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(contract("layer dimensions must be positive"));
        }
        if weights.len() != in_dim * out_dim {
            return Err(contract(format!(
                "weights have {} entries, expected {out_dim}x{in_dim}",
                weights.len()
            )));
        }
        if bias.len() != out_dim {
            return Err(contract(format!("bias has {} entries, expected {out_dim}", bias.len())));
        }
        if !weights.iter().chain(&bias).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("layer parameters".into()));
        }
        Ok(Self { out_dim, in_dim, weights, bias })
    }

    /// Weights drawn from `U(-weight_limit, weight_limit)`, bias from
    /// `U(-bias_limit, bias_limit)` (zero when `bias_limit == 0`).
    pub fn uniform<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        weight_limit: f64,
        bias_limit: f64,
        rng: &mut R,
    ) -> Self {
        let mut layer = Self::zeros(in_dim, out_dim);
        let w = Uniform::new(-weight_limit, weight_limit);
        for x in &mut layer.weights {
            *x = w.sample(rng);
        }
        if bias_limit > 0.0 {
            let b = Uniform::new(-bias_limit, bias_limit);
            for x in &mut layer.bias {
                *x = b.sample(rng);
            }
        }
        layer
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn weight_matrix(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.out_dim, self.in_dim), &self.weights).expect("layer shape")
    }

    fn bias_view(&self) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.bias[..])
    }

    pub(crate) fn map_params(&mut self, f: impl Fn(f64) -> f64) {
        for x in self.weights.iter_mut().chain(self.bias.iter_mut()) {
            *x = f(*x);
        }
    }

    /// `Z = X·Wᵀ + b` for a batch with one sample per row.
    pub fn affine_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.in_dim {
            return Err(contract(format!(
                "layer expects {} inputs, batch has {}",
                self.in_dim,
                x.ncols()
            )));
        }
        let mut z = x.dot(&self.weight_matrix().t());
        z += &self.bias_view();
        Ok(z)
    }

    fn check_vector(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.in_dim {
            return Err(contract(format!(
                "layer expects {} inputs, got {}",
                self.in_dim,
                x.len()
            )));
        }
        Ok(())
    }
}

/// `sin(freq_scale · (W·x + b))`.
pub fn sine_layer_forward(layer: &DenseLayer, x: &[f64], freq_scale: f64) -> Result<Vec<f64>> {
    if !(freq_scale > 0.0) {
        return Err(contract("freq_scale must be positive"));
    }
    Ok(linear_layer_forward(layer, x)?
        .into_iter()
        .map(|z| (freq_scale * z).sin())
        .collect())
}

/// `W·x + b`.
pub fn linear_layer_forward(layer: &DenseLayer, x: &[f64]) -> Result<Vec<f64>> {
    layer.check_vector(x)?;
    let out = layer
        .weights
        .chunks_exact(layer.in_dim)
        .zip(&layer.bias)
        .map(|(row, b)| row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b)
        .collect();
    Ok(out)
}

/// Cached values of one sine layer evaluated on a batch.
#[derive(Debug, Clone)]
pub struct SineCache {
    pub input: Array2<f64>,
    /// `freq_scale · cos(freq_scale · z)`, the derivative of the activation.
    pub slope: Array2<f64>,
}

/// Batched sine layer that also returns what [`sine_layer_backward`] needs.
pub fn sine_layer_forward_batch(
    layer: &DenseLayer,
    input: Array2<f64>,
    freq_scale: f64,
) -> Result<(Array2<f64>, SineCache)> {
    let mut z = layer.affine_batch(input.view())?;
    let mut slope = z.clone();
    slope.mapv_inplace(|v| freq_scale * (freq_scale * v).cos());
    z.mapv_inplace(|v| (freq_scale * v).sin());
    Ok((z, SineCache { input, slope }))
}

/// Gradient of one dense layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerGrad {
    pub fn zeros_like(layer: &DenseLayer) -> Self {
        Self {
            weights: vec![0.0; layer.weights.len()],
            bias: vec![0.0; layer.bias.len()],
        }
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(&self.bias)
    }
}

/// Backward through an affine map given `dZ` (batch × out).
/// Returns the layer gradient and `dX` (batch × in).
pub fn affine_backward(
    layer: &DenseLayer,
    input: ArrayView2<'_, f64>,
    dz: ArrayView2<'_, f64>,
) -> (LayerGrad, Array2<f64>) {
    let dw = dz.t().dot(&input);
    let db: Array1<f64> = dz.sum_axis(Axis(0));
    let dx = dz.dot(&layer.weight_matrix());
    let grad = LayerGrad {
        weights: dw.as_standard_layout().iter().copied().collect(),
        bias: db.to_vec(),
    };
    (grad, dx)
}

/// Backward through `sin(s·(W·x + b))`.
pub fn sine_layer_backward(
    layer: &DenseLayer,
    cache: &SineCache,
    upstream: ArrayView2<'_, f64>,
) -> (LayerGrad, Array2<f64>) {
    let dz = &upstream * &cache.slope;
    affine_backward(layer, cache.input.view(), dz.view())
}

/// Mean over all scalar entries of `(pred − target)²`.
pub fn mse_loss(pred: ArrayView2<'_, f64>, target: ArrayView2<'_, f64>) -> Result<f64> {
    if pred.dim() != target.dim() {
        return Err(contract(format!(
            "prediction shape {:?} differs from target shape {:?}",
            pred.dim(),
            target.dim()
        )));
    }
    if pred.is_empty() {
        return Err(contract("mse of an empty batch"));
    }
    let sum: f64 = pred
        .iter()
        .zip(target.iter())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / pred.len() as f64)
}

/// `∂ mse / ∂ pred`.
pub fn mse_grad(pred: ArrayView2<'_, f64>, target: ArrayView2<'_, f64>) -> Array2<f64> {
    let scale = 2.0 / pred.len() as f64;
    (&pred - &target) * scale
}

/// Parameters organized as groups of dense layers (one group per stage).
///
/// A group that is not trainable is skipped by the optimizer and receives no
/// gradient entries.
pub trait ParamGroups {
    fn group_count(&self) -> usize;
    fn group_trainable(&self, group: usize) -> bool;
    fn group_layers(&self, group: usize) -> &[DenseLayer];
    fn group_layers_mut(&mut self, group: usize) -> &mut [DenseLayer];

    /// Rounding applied to every parameter after it is written.
    fn quantize(&self, x: f64) -> f64 {
        x
    }
}

/// Gradients mirroring a [`ParamGroups`] layout; `None` for frozen groups.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradientSet {
    pub groups: Vec<Option<Vec<LayerGrad>>>,
}

impl GradientSet {
    /// Zero gradients for every trainable group of `params`.
    pub fn zeros_like<P: ParamGroups + ?Sized>(params: &P) -> Self {
        let groups = (0..params.group_count())
            .map(|g| {
                params
                    .group_trainable(g)
                    .then(|| params.group_layers(g).iter().map(LayerGrad::zeros_like).collect())
            })
            .collect();
        Self { groups }
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.groups
            .iter()
            .flatten()
            .flat_map(|layers| layers.iter().flat_map(|l| l.values().copied()))
    }

    pub fn len(&self) -> usize {
        self.values().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(f64::is_finite)
    }

    pub fn is_zero(&self) -> bool {
        self.values().all(|v| v == 0.0)
    }

    pub fn scale(&mut self, factor: f64) {
        for layers in self.groups.iter_mut().flatten() {
            for l in layers {
                l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|v| *v *= factor);
            }
        }
    }

    /// Checks that the trainable layout and every layer shape match `params`.
    pub fn check_congruent<P: ParamGroups + ?Sized>(&self, params: &P) -> Result<()> {
        if self.groups.len() != params.group_count() {
            return Err(contract(format!(
                "gradient has {} groups, parameters have {}",
                self.groups.len(),
                params.group_count()
            )));
        }
        for (g, grads) in self.groups.iter().enumerate() {
            let layers = params.group_layers(g);
            match grads {
                None => continue,
                Some(_) if !params.group_trainable(g) => {
                    return Err(contract(format!("gradient supplied for frozen group {g}")))
                }
                Some(grads) => {
                    if grads.len() != layers.len()
                        || grads.iter().zip(layers).any(|(gr, l)| {
                            gr.weights.len() != l.weights.len() || gr.bias.len() != l.bias.len()
                        })
                    {
                        return Err(contract(format!("gradient shape mismatch in group {g}")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Central differences `(L(θ+h) − L(θ−h)) / 2h` for every trainable parameter.
///
/// Each parameter is restored to its exact original value after probing.
pub fn finite_diff_grad<P, F>(params: &mut P, h: f64, mut loss: F) -> Result<GradientSet>
where
    P: ParamGroups + ?Sized,
    F: FnMut(&P) -> f64,
{
    if !(h > 0.0) {
        return Err(contract("finite-difference step must be positive"));
    }
    let mut grads = GradientSet::zeros_like(params);
    for g in 0..params.group_count() {
        let Some(layer_grads) = grads.groups[g].as_mut() else {
            continue;
        };
        for (li, lg) in layer_grads.iter_mut().enumerate() {
            for (is_bias, out) in [(false, &mut lg.weights), (true, &mut lg.bias)] {
                for (k, slot) in out.iter_mut().enumerate() {
                    let probe = |params: &mut P, value: f64| {
                        let layer = &mut params.group_layers_mut(g)[li];
                        let p = if is_bias { &mut layer.bias[k] } else { &mut layer.weights[k] };
                        *p = value;
                    };
                    let layer = &params.group_layers(g)[li];
                    let orig = if is_bias { layer.bias[k] } else { layer.weights[k] };
                    probe(params, orig + h);
                    let plus = loss(params);
                    probe(params, orig - h);
                    let minus = loss(params);
                    probe(params, orig);
                    if !plus.is_finite() || !minus.is_finite() {
                        return Err(Error::NonFinite(format!(
                            "loss at perturbed parameter (group {g}, layer {li})"
                        )));
                    }
                    *slot = (plus - minus) / (2.0 * h);
                }
            }
        }
    }
    Ok(grads)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Moment estimates for Adam. Moments are allocated lazily on the first step
/// so that the state can be created before the trainable layout is known.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: GradientSet,
    pub v: GradientSet,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(cfg: AdamConfig) -> Self {
        Self {
            m: GradientSet::default(),
            v: GradientSet::default(),
            t: 0,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
        }
    }
}

impl Default for AdamState {
    fn default() -> Self {
        Self::new(AdamConfig::default())
    }
}

fn moments_match(moments: &GradientSet, grads: &GradientSet) -> bool {
    moments.groups.len() == grads.groups.len()
        && moments.groups.iter().zip(&grads.groups).all(|(m, g)| match (m, g) {
            (_, None) => true,
            (Some(m), Some(g)) => {
                m.len() == g.len()
                    && m.iter().zip(g).all(|(a, b)| {
                        a.weights.len() == b.weights.len() && a.bias.len() == b.bias.len()
                    })
            }
            (None, Some(_)) => false,
        })
}

fn zeros_for(grads: &GradientSet, template: &GradientSet) -> GradientSet {
    // keep moments of groups that already have them
    let groups = grads
        .groups
        .iter()
        .enumerate()
        .map(|(i, g)| match (template.groups.get(i).cloned().flatten(), g) {
            (Some(m), Some(g)) if m.len() == g.len() => Some(m),
            (_, Some(g)) => Some(
                g.iter()
                    .map(|l| LayerGrad { weights: vec![0.0; l.weights.len()], bias: vec![0.0; l.bias.len()] })
                    .collect(),
            ),
            (m, None) => m,
        })
        .collect();
    GradientSet { groups }
}

/// One bias-corrected Adam update of every trainable group.
///
/// Shapes and finiteness are validated before anything is written, so a
/// rejected step leaves both parameters and state untouched.
pub fn adam_step<P: ParamGroups + ?Sized>(
    params: &mut P,
    grads: &GradientSet,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if !(lr > 0.0) {
        return Err(contract("learning rate must be positive"));
    }
    grads.check_congruent(params)?;
    if !grads.is_finite() {
        return Err(Error::NonFinite("gradient".into()));
    }
    if !moments_match(&state.m, grads) {
        state.m = zeros_for(grads, &state.m);
        state.v = zeros_for(grads, &state.v);
    }

    state.t += 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);

    for (g, layer_grads) in grads.groups.iter().enumerate() {
        let Some(layer_grads) = layer_grads else { continue };
        let ms = state.m.groups[g].as_mut().expect("moments allocated");
        let vs = state.v.groups[g].as_mut().expect("moments allocated");
        let mut updated: Vec<(usize, Vec<f64>, Vec<f64>)> = Vec::with_capacity(layer_grads.len());
        for (li, lg) in layer_grads.iter().enumerate() {
            let layer = &params.group_layers(g)[li];
            let step = |theta: &[f64], grad: &[f64], m: &mut [f64], v: &mut [f64]| -> Vec<f64> {
                theta
                    .iter()
                    .zip(grad)
                    .zip(m.iter_mut().zip(v.iter_mut()))
                    .map(|((&th, &gr), (m, v))| {
                        *m = b1 * *m + (1.0 - b1) * gr;
                        *v = b2 * *v + (1.0 - b2) * gr * gr;
                        let m_hat = *m / c1;
                        let v_hat = *v / c2;
                        th - lr * m_hat / (v_hat.sqrt() + eps)
                    })
                    .collect()
            };
            let w = step(&layer.weights, &lg.weights, &mut ms[li].weights, &mut vs[li].weights);
            let b = step(&layer.bias, &lg.bias, &mut ms[li].bias, &mut vs[li].bias);
            updated.push((li, w, b));
        }
        for (li, w, b) in updated {
            let (w, b): (Vec<f64>, Vec<f64>) = (
                w.into_iter().map(|x| params.quantize(x)).collect(),
                b.into_iter().map(|x| params.quantize(x)).collect(),
            );
            let layer = &mut params.group_layers_mut(g)[li];
            layer.weights = w;
            layer.bias = b;
        }
    }
    Ok(())
}
