//! The MR-Net family.
//!
//! A network is an ordered list of stages, coarse to fine. Each stage has a
//! sinusoidal first layer whose weights are the stage's frequencies, an
//! optional block of sinusoidal hidden layers, and a linear output layer. The
//! network output is the sum of the stage outputs, each scaled by a control
//! weight in `[0, 1]`:
//!
//! ```text
//! f(x) = w₁·g₁(x) + w₂·g₂(x) + … + w_N·g_N(x)
//! ```
//!
//! Three variants differ only in how stages are wired:
//!
//! * **S**: no hidden block, `g = linear(sin(W₁x + b₁))`.
//! * **L**: every stage is an independent sinusoidal MLP.
//! * **M**: the hidden block of stage `i` also consumes the hidden-block output
//!   of stage `i − 1`, either concatenated with its own first-layer output
//!   ([`Wiring::Concat`]) or added to it ([`Wiring::Add`]).

mod io;

pub use io::{load_model, read_model, save_model, write_model, MAGIC, VERSION};

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::nn::{
    affine_backward, sine_layer_backward, sine_layer_forward_batch, DenseLayer, GradientSet, LayerGrad,
    ParamGroups, Precision, SineCache,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    S,
    L,
    M,
}

impl Variant {
    pub fn code(self) -> u8 {
        match self {
            Variant::S => 0,
            Variant::L => 1,
            Variant::M => 2,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Variant::S),
            1 => Some(Variant::L),
            2 => Some(Variant::M),
            _ => None,
        }
    }
}

/// How an M-Net stage combines its first-layer output with the previous
/// stage's hidden-block output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Wiring {
    #[default]
    Concat,
    Add,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchConfig {
    pub variant: Variant,
    pub wiring: Wiring,
    pub input_dim: usize,
    pub channels: usize,
    pub width: usize,
    /// Hidden layers per stage. Ignored for S-Nets.
    pub hidden_layers: usize,
    /// First-layer frequency band `B_i` of each stage; one entry per stage.
    pub bands: Vec<f64>,
    pub omega_g: f64,
    pub precision: Precision,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            variant: Variant::M,
            wiring: Wiring::Concat,
            input_dim: 2,
            channels: 1,
            width: 96,
            hidden_layers: 1,
            bands: doubling_bands(4.0, 7),
            omega_g: 30.0,
            precision: Precision::F64,
        }
    }
}

impl ArchConfig {
    pub fn num_stages(&self) -> usize {
        self.bands.len()
    }

    /// Default configuration with `num_stages` stages and bands 4, 8, 16, ….
    pub fn with_stages(num_stages: usize) -> Self {
        Self { bands: doubling_bands(4.0, num_stages), ..Self::default() }
    }

    fn effective_hidden(&self) -> usize {
        match self.variant {
            Variant::S => 0,
            _ => self.hidden_layers,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bands.is_empty() {
            return Err(Error::Config("at least one stage is required".into()));
        }
        if self.bands.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(Error::Config("bands must be positive and finite".into()));
        }
        if self.bands.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("bands must be strictly increasing".into()));
        }
        if self.width == 0 || self.input_dim == 0 || self.channels == 0 {
            return Err(Error::Config("width, input_dim and channels must be positive".into()));
        }
        if self.width > u16::MAX as usize || self.input_dim > u8::MAX as usize || self.channels > u8::MAX as usize {
            return Err(Error::Config("dimensions exceed the model file limits".into()));
        }
        if self.bands.len() > u16::MAX as usize {
            return Err(Error::Config("too many stages".into()));
        }
        if !(self.omega_g.is_finite() && self.omega_g > 0.0) {
            return Err(Error::Config("omega_g must be positive".into()));
        }
        if self.variant == Variant::M && self.hidden_layers == 0 {
            return Err(Error::Config("an M-Net needs at least one hidden layer per stage".into()));
        }
        Ok(())
    }
}

/// `start, 2·start, 4·start, …` with `n` entries.
pub fn doubling_bands(start: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| start * 2f64.powi(i as i32)).collect()
}

/// Layer gradients of one stage and the gradient flowing to the previous
/// stage's features, each present only when requested.
pub type StageGrads = (Option<Vec<LayerGrad>>, Option<Array2<f64>>);

/// One MR-Module.
#[derive(Debug, Clone, PartialEq)]
pub struct StageParams {
    /// First layer, hidden layers, then the linear layer.
    layers: Vec<DenseLayer>,
    pub alpha: f64,
    pub frozen: bool,
    pub band_limit: f64,
    pub omega_g: f64,
}

impl StageParams {
    pub fn new(layers: Vec<DenseLayer>, alpha: f64, frozen: bool, band_limit: f64, omega_g: f64) -> Result<Self> {
        if layers.len() < 2 {
            return Err(contract("a stage needs a first and a linear layer"));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(contract(format!("alpha {alpha} outside [0, 1]")));
        }
        Ok(Self { layers, alpha, frozen, band_limit, omega_g })
    }

    pub fn first(&self) -> &DenseLayer {
        &self.layers[0]
    }

    pub fn hidden(&self) -> &[DenseLayer] {
        &self.layers[1..self.layers.len() - 1]
    }

    pub fn linear(&self) -> &DenseLayer {
        self.layers.last().expect("stage has layers")
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }
}

/// Cached activations of one stage.
#[derive(Debug, Clone)]
pub struct StageTrace {
    first: SineCache,
    hidden: Vec<SineCache>,
    /// Input of the linear layer; for M-Nets also the value fed forward.
    features: Array2<f64>,
    /// Columns of the first hidden input that came from the previous stage.
    received: Option<usize>,
}

impl StageTrace {
    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }
}

/// Everything [`MrNet::backward`] needs from a forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    stages: Vec<StageTrace>,
    weights: Vec<f64>,
    batch: usize,
}

/// Per-stage detail outputs `g_1 … g_N`, each `batch × channels`.
#[derive(Debug, Clone)]
pub struct StageOutputs {
    pub details: Vec<Array2<f64>>,
    pub trace: Trace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MrNet {
    variant: Variant,
    wiring: Wiring,
    input_dim: usize,
    channels: usize,
    width: usize,
    precision: Precision,
    stages: Vec<StageParams>,
}

/// Sampler for the band-limited initialization.
pub fn init_mrnet(cfg: &ArchConfig, seed: u64) -> Result<MrNet> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = cfg.width;
    let hidden = cfg.effective_hidden();
    let mut stages = Vec::with_capacity(cfg.num_stages());
    for (i, &band) in cfg.bands.iter().enumerate() {
        let mut layers = Vec::with_capacity(hidden + 2);
        layers.push(DenseLayer::uniform(cfg.input_dim, w, band, 0.0, &mut rng));
        for h in 0..hidden {
            let fan_in = if h == 0 && i > 0 && cfg.variant == Variant::M && cfg.wiring == Wiring::Concat {
                2 * w
            } else {
                w
            };
            layers.push(siren_layer(fan_in, w, cfg.omega_g, &mut rng));
        }
        layers.push(siren_layer(w, cfg.channels, cfg.omega_g, &mut rng));
        for l in &mut layers {
            l.map_params(|x| cfg.precision.quantize(x));
        }
        stages.push(StageParams::new(layers, 1.0, false, band, cfg.omega_g)?);
    }
    Ok(MrNet {
        variant: cfg.variant,
        wiring: cfg.wiring,
        input_dim: cfg.input_dim,
        channels: cfg.channels,
        width: w,
        precision: cfg.precision,
        stages,
    })
}

/// Weights `U(±√(6/fan_in)/ω_G)`, biases `U(±1/√fan_in)`.
fn siren_layer(fan_in: usize, fan_out: usize, omega_g: f64, rng: &mut ChaCha8Rng) -> DenseLayer {
    let limit = (6.0 / fan_in as f64).sqrt() / omega_g;
    DenseLayer::uniform(fan_in, fan_out, limit, 1.0 / (fan_in as f64).sqrt(), rng)
}

impl MrNet {
    /// Assembles a network from explicit stages, checking the wiring.
    pub fn from_stages(
        variant: Variant,
        input_dim: usize,
        channels: usize,
        width: usize,
        precision: Precision,
        stages: Vec<StageParams>,
    ) -> Result<Self> {
        if stages.is_empty() {
            return Err(contract("network has no stages"));
        }
        let wiring = match (variant, stages.get(1).and_then(|s| s.hidden().first())) {
            (Variant::M, Some(h)) if h.in_dim() == width => Wiring::Add,
            _ => Wiring::Concat,
        };
        for (i, st) in stages.iter().enumerate() {
            let first = st.first();
            if first.in_dim() != input_dim || first.out_dim() != width {
                return Err(contract(format!("stage {} first layer has the wrong shape", i + 1)));
            }
            if st.linear().out_dim() != channels || st.linear().in_dim() != width {
                return Err(contract(format!("stage {} linear layer has the wrong shape", i + 1)));
            }
            if variant == Variant::S && !st.hidden().is_empty() {
                return Err(contract("S-Net stages have no hidden layers"));
            }
            if variant == Variant::M && st.hidden().is_empty() {
                return Err(contract("M-Net stages need a hidden block"));
            }
            for (h, layer) in st.hidden().iter().enumerate() {
                let expected_in = if variant == Variant::M && i > 0 && h == 0 && wiring == Wiring::Concat {
                    2 * width
                } else {
                    width
                };
                if layer.in_dim() != expected_in || layer.out_dim() != width {
                    return Err(contract(format!("stage {} hidden layer {} has the wrong shape", i + 1, h + 1)));
                }
            }
        }
        Ok(Self { variant, wiring, input_dim, channels, width, precision, stages })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn wiring(&self) -> Wiring {
        self.wiring
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn num_stages(&self) -> usize {
        self.stages.len()
    }

    pub fn stages(&self) -> &[StageParams] {
        &self.stages
    }

    pub fn stage(&self, i: usize) -> &StageParams {
        &self.stages[i]
    }

    pub fn stage_mut(&mut self, i: usize) -> &mut StageParams {
        &mut self.stages[i]
    }

    pub fn bands(&self) -> Vec<f64> {
        self.stages.iter().map(|s| s.band_limit).collect()
    }

    pub fn hidden_layers(&self) -> usize {
        self.stages[0].hidden().len()
    }

    /// Trainable scalars: weights and biases of every layer. Control
    /// weights are not trained and not counted.
    pub fn count_params(&self) -> usize {
        self.stages.iter().map(StageParams::param_count).sum()
    }

    fn check_coords(&self, coords: ArrayView2<'_, f64>) -> Result<()> {
        if coords.ncols() != self.input_dim {
            return Err(contract(format!(
                "coordinates have {} components, network expects {}",
                coords.ncols(),
                self.input_dim
            )));
        }
        Ok(())
    }

    /// Evaluates stage `i` (0-based). `prev_features` is the hidden-block
    /// output of stage `i − 1` and is required for M-Net stages after the
    /// first.
    pub fn stage_forward(
        &self,
        i: usize,
        coords: ArrayView2<'_, f64>,
        prev_features: Option<ArrayView2<'_, f64>>,
    ) -> Result<(Array2<f64>, StageTrace)> {
        self.check_coords(coords)?;
        let st = self.stages.get(i).ok_or_else(|| contract(format!("no stage {}", i + 1)))?;
        let (first_out, first) = sine_layer_forward_batch(st.first(), coords.to_owned(), 1.0)?;

        let chained = self.variant == Variant::M && i > 0;
        let mut received = None;
        let mut h = if chained {
            let prev = prev_features.ok_or_else(|| contract("M-Net stage needs the previous hidden output"))?;
            if prev.dim() != first_out.dim() {
                return Err(contract(format!(
                    "previous hidden output has shape {:?}, expected {:?}",
                    prev.dim(),
                    first_out.dim()
                )));
            }
            received = Some(prev.ncols());
            match self.wiring {
                Wiring::Concat => concatenate(Axis(1), &[first_out.view(), prev]).expect("matching rows"),
                Wiring::Add => first_out + prev,
            }
        } else {
            first_out
        };

        let mut hidden = Vec::with_capacity(st.hidden().len());
        for layer in st.hidden() {
            let (out, cache) = sine_layer_forward_batch(layer, h, st.omega_g)?;
            hidden.push(cache);
            h = out;
        }
        let g = st.linear().affine_batch(h.view())?;
        Ok((g, StageTrace { first, hidden, features: h, received }))
    }

    /// Backward through stage `i`.
    ///
    /// `dg` is `∂L/∂g_i`; `carry` is `∂L/∂features_i` arriving from stage
    /// `i + 1`. Returns the stage's layer gradients (when `want_grads`) and,
    /// when `want_carry`, the gradient with respect to the previous stage's
    /// features.
    pub fn stage_backward(
        &self,
        i: usize,
        trace: &StageTrace,
        dg: ArrayView2<'_, f64>,
        carry: Option<ArrayView2<'_, f64>>,
        want_grads: bool,
        want_carry: bool,
    ) -> Result<StageGrads> {
        let st = &self.stages[i];
        if trace.hidden.len() != st.hidden().len() || dg.ncols() != self.channels {
            return Err(contract(format!("trace does not belong to stage {}", i + 1)));
        }
        if dg.nrows() != trace.features.nrows() {
            return Err(contract("loss gradient batch size differs from the trace"));
        }
        let mut grads = Vec::with_capacity(st.layers().len());
        let (g_lin, mut dh) = affine_backward(st.linear(), trace.features.view(), dg);
        if let Some(c) = carry {
            dh += &c;
        }
        for (layer, cache) in st.hidden().iter().zip(&trace.hidden).rev() {
            let (g, dx) = sine_layer_backward(layer, cache, dh.view());
            grads.push(g);
            dh = dx;
        }

        let width = st.first().out_dim();
        let (d_first, d_prev) = match trace.received {
            Some(n) => match self.wiring {
                Wiring::Concat => (dh.slice(s![.., ..width]).to_owned(), Some(dh.slice(s![.., width..width + n]).to_owned())),
                Wiring::Add => (dh.clone(), Some(dh)),
            },
            None => (dh, None),
        };
        if want_grads {
            let (g_first, _) = sine_layer_backward(st.first(), &trace.first, d_first.view());
            grads.push(g_first);
            grads.reverse();
            grads.push(g_lin);
        }
        Ok((want_grads.then_some(grads), if want_carry { d_prev } else { None }))
    }

    /// Detail outputs of every stage, without control weights.
    pub fn stage_outputs(&self, coords: ArrayView2<'_, f64>) -> Result<StageOutputs> {
        self.run(coords, None)
    }

    fn run(&self, coords: ArrayView2<'_, f64>, upto: Option<usize>) -> Result<StageOutputs> {
        let n = upto.unwrap_or(self.stages.len());
        let mut details = Vec::with_capacity(n);
        let mut traces: Vec<StageTrace> = Vec::with_capacity(n);
        for i in 0..n {
            let prev = traces.last().map(|t| t.features.view());
            let (g, t) = self.stage_forward(i, coords, prev)?;
            details.push(g);
            traces.push(t);
        }
        Ok(StageOutputs {
            details,
            trace: Trace { stages: traces, weights: vec![1.0; n], batch: coords.nrows() },
        })
    }

    fn check_weights(&self, lod_weights: &[f64]) -> Result<()> {
        if lod_weights.len() != self.stages.len() {
            return Err(contract(format!(
                "{} control weights for {} stages",
                lod_weights.len(),
                self.stages.len()
            )));
        }
        if let Some(w) = lod_weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(contract(format!("control weight {w} outside [0, 1]")));
        }
        Ok(())
    }

    /// `Σ_i w_i·α_i·g_i(coords)`, summed coarse to fine.
    pub fn forward(&self, coords: ArrayView2<'_, f64>, lod_weights: &[f64]) -> Result<Array2<f64>> {
        Ok(self.forward_traced(coords, lod_weights)?.0)
    }

    /// Forward pass that keeps the activations for [`MrNet::backward`].
    pub fn forward_traced(&self, coords: ArrayView2<'_, f64>, lod_weights: &[f64]) -> Result<(Array2<f64>, Trace)> {
        self.check_coords(coords)?;
        self.check_weights(lod_weights)?;
        let last = lod_weights
            .iter()
            .zip(&self.stages)
            .rposition(|(w, st)| w * st.alpha != 0.0)
            .map_or(0, |p| p + 1);
        let outs = self.run(coords, Some(last))?;
        let mut out = Array2::zeros((coords.nrows(), self.channels));
        let mut weights = Vec::with_capacity(last);
        for ((g, w), st) in outs.details.iter().zip(lod_weights).zip(&self.stages) {
            let w = w * st.alpha;
            out.scaled_add(w, g);
            weights.push(w);
        }
        let mut trace = outs.trace;
        trace.weights = weights;
        Ok((out, trace))
    }

    /// Exact gradient of a loss with respect to every unfrozen parameter,
    /// given `dout = ∂L/∂f` for the traced forward pass.
    pub fn backward(&self, trace: &Trace, dout: ArrayView2<'_, f64>) -> Result<GradientSet> {
        if trace.stages.len() > self.stages.len() || trace.weights.len() != trace.stages.len() {
            return Err(contract("trace does not match the network"));
        }
        if dout.dim() != (trace.batch, self.channels) {
            return Err(contract(format!(
                "loss gradient has shape {:?}, expected {:?}",
                dout.dim(),
                (trace.batch, self.channels)
            )));
        }
        let mut groups: Vec<Option<Vec<LayerGrad>>> = self
            .stages
            .iter()
            .map(|st| (!st.frozen).then(|| st.layers().iter().map(LayerGrad::zeros_like).collect()))
            .collect();
        let n = trace.stages.len();
        let mut carry: Option<Array2<f64>> = None;
        for i in (0..n).rev() {
            let needs_upstream = self.variant == Variant::M && self.stages[..i].iter().any(|s| !s.frozen);
            let trainable = !self.stages[i].frozen;
            if !trainable && !needs_upstream {
                carry = None;
                continue;
            }
            let dg = &dout * trace.weights[i];
            let (grads, next) =
                self.stage_backward(i, &trace.stages[i], dg.view(), carry.as_ref().map(|c| c.view()), trainable, needs_upstream)?;
            if let Some(g) = grads {
                groups[i] = Some(g);
            }
            carry = next;
        }
        Ok(GradientSet { groups })
    }
}

impl ParamGroups for MrNet {
    fn group_count(&self) -> usize {
        self.stages.len()
    }

    fn group_trainable(&self, group: usize) -> bool {
        !self.stages[group].frozen
    }

    fn group_layers(&self, group: usize) -> &[DenseLayer] {
        self.stages[group].layers()
    }

    fn group_layers_mut(&mut self, group: usize) -> &mut [DenseLayer] {
        self.stages[group].layers_mut()
    }

    fn quantize(&self, x: f64) -> f64 {
        self.precision.quantize(x)
    }
}

/// View of a network in which only one stage is trainable.
pub struct LiveStage<'a> {
    pub net: &'a mut MrNet,
    pub stage: usize,
}

impl ParamGroups for LiveStage<'_> {
    fn group_count(&self) -> usize {
        self.net.num_stages()
    }

    fn group_trainable(&self, group: usize) -> bool {
        group == self.stage && !self.net.stages[group].frozen
    }

    fn group_layers(&self, group: usize) -> &[DenseLayer] {
        self.net.stages[group].layers()
    }

    fn group_layers_mut(&mut self, group: usize) -> &mut [DenseLayer] {
        self.net.stages[group].layers_mut()
    }

    fn quantize(&self, x: f64) -> f64 {
        self.net.precision.quantize(x)
    }
}

#[cfg(test)]
mod tests;
