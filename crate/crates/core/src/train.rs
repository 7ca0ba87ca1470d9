//! Coarse-to-fine training with progressive freezing.
//!
//! Stage `i` is fitted to pyramid level `i` while every earlier stage is
//! frozen. The loss is taken on the full partial sum `g_1 + … + g_i`, so the
//! live stage learns the detail missing from the frozen prefix. Because the
//! prefix never changes while a stage trains, its output (and, for M-Nets, its
//! last hidden features) is evaluated once per stage and cached.

use std::fmt::Write as _;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arch::{LiveStage, MrNet, Variant};
use crate::data::{coords_grid_wh, make_samples, ImageGrid, Pyramid, Sampler};
use crate::error::{contract, Error, Result};
use crate::metrics::psnr;
use crate::nn::{adam_step, mse_grad, mse_loss, AdamConfig, AdamState, GradientSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    #[default]
    Mse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Upper bound; the effective batch is `min(batch_size, samples)`.
    pub batch_size: usize,
    pub max_epochs_per_stage: usize,
    /// Relative epoch-to-epoch loss change, in percent, below which a stage
    /// counts as converged.
    pub convergence_threshold: f64,
    /// Consecutive sub-threshold epochs required to stop.
    pub patience: usize,
    /// Epoch-mean loss at or below which a stage stops at once. Zero disables.
    pub loss_threshold: f64,
    pub loss: Loss,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Train all stages jointly instead of coarse to fine.
    pub parallel_stages: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            batch_size: 65536,
            max_epochs_per_stage: 300,
            convergence_threshold: 1e-3,
            patience: 2,
            loss_threshold: 1e-12,
            loss: Loss::Mse,
            seed: 0,
            adam: AdamConfig::default(),
            parallel_stages: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 || self.max_epochs_per_stage == 0 || self.patience == 0 {
            return Err(Error::Config("batch_size, max_epochs_per_stage and patience must be positive".into()));
        }
        if !(self.convergence_threshold > 0.0) {
            return Err(Error::Config("convergence_threshold must be positive".into()));
        }
        if !(self.loss_threshold >= 0.0 && self.loss_threshold.is_finite()) {
            return Err(Error::Config("loss_threshold must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxEpochs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    /// 1-based stage number.
    pub stage: usize,
    pub epochs_run: usize,
    pub losses: Vec<f64>,
    /// Seconds since the stage started, at the end of each epoch.
    pub elapsed: Vec<f64>,
    pub stop_reason: StopReason,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainReport {
    pub stages: Vec<StageReport>,
    /// PSNR of the partial sum `g_1 + … + g_k` against level `k`.
    pub level_psnr: Vec<f64>,
    /// PSNR of the full reconstruction against the finest level.
    pub final_psnr: f64,
}

impl TrainReport {
    /// `stage,epoch,loss,elapsed` lines with a header.
    pub fn log_csv(&self) -> String {
        let mut out = String::from("stage,epoch,loss,elapsed\n");
        for st in &self.stages {
            for (e, (loss, t)) in st.losses.iter().zip(&st.elapsed).enumerate() {
                let _ = writeln!(out, "{},{},{:e},{:.6}", st.stage, e + 1, loss, t);
            }
        }
        out
    }
}

#[cfg(not(target_arch = "wasm32"))]
#[derive(Clone, Copy)]
struct Clock(std::time::Instant);

#[cfg(not(target_arch = "wasm32"))]
impl Clock {
    fn start() -> Self {
        Self(std::time::Instant::now())
    }
    fn secs(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

// no monotonic clock on wasm32-unknown-unknown without JS bindings
#[cfg(target_arch = "wasm32")]
#[derive(Clone, Copy)]
struct Clock;

#[cfg(target_arch = "wasm32")]
impl Clock {
    fn start() -> Self {
        Self
    }
    fn secs(&self) -> f64 {
        0.0
    }
}

fn epoch_seed(seed: u64, stage: usize, epoch: usize) -> u64 {
    let mut h = seed ^ 0x5851_F42D_4C95_7F2D;
    for v in [stage as u64, epoch as u64] {
        h = (h ^ v).wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(29);
    }
    h
}

/// Incremental trainer for a single stage. [`train_stage`] drives it to
/// completion; interactive callers can step it one epoch at a time.
pub struct StageTrainer {
    stage: usize,
    cfg: TrainConfig,
    coords: Array2<f64>,
    targets: Array2<f64>,
    prefix: Array2<f64>,
    prev_features: Option<Array2<f64>>,
    adam: AdamState,
    losses: Vec<f64>,
    elapsed: Vec<f64>,
    streak: usize,
    clock: Clock,
    stop: Option<StopReason>,
}

impl StageTrainer {
    /// Checks the freeze contract and caches the frozen prefix on the
    /// target's pixel centers.
    pub fn new(net: &MrNet, stage: usize, target: &ImageGrid, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if stage >= net.num_stages() {
            return Err(contract(format!("no stage {} in a {}-stage network", stage + 1, net.num_stages())));
        }
        if let Some(j) = net.stages()[..stage].iter().position(|s| !s.frozen) {
            return Err(contract(format!("stage {} must be frozen before stage {} trains", j + 1, stage + 1)));
        }
        let st = net.stage(stage);
        if st.frozen {
            return Err(contract(format!("stage {} is already frozen", stage + 1)));
        }
        if st.alpha != 1.0 {
            return Err(contract(format!("stage {} control weight must be 1 during training", stage + 1)));
        }
        if target.channels() != net.channels() {
            return Err(contract(format!(
                "target has {} channels, network outputs {}",
                target.channels(),
                net.channels()
            )));
        }
        let samples = make_samples(target, stage, Sampler::Regular)?;
        let n = samples.len();
        let mut prefix = Array2::zeros((n, net.channels()));
        let mut prev_features = None;
        if stage > 0 {
            let chained = net.variant() == Variant::M;
            let mut feats = chained.then(|| Array2::zeros((n, net.width())));
            const CHUNK: usize = 8192;
            for start in (0..n).step_by(CHUNK) {
                let end = (start + CHUNK).min(n);
                let x = samples.coords.slice(ndarray::s![start..end, ..]);
                let mut carry: Option<Array2<f64>> = None;
                for j in 0..stage {
                    let (g, trace) = net.stage_forward(j, x, carry.as_ref().map(|c| c.view()))?;
                    let w = net.stage(j).alpha;
                    prefix.slice_mut(ndarray::s![start..end, ..]).scaled_add(w, &g);
                    carry = chained.then(|| trace.features().to_owned());
                }
                if let (Some(f), Some(c)) = (feats.as_mut(), carry) {
                    f.slice_mut(ndarray::s![start..end, ..]).assign(&c);
                }
            }
            prev_features = feats;
        }
        Ok(Self {
            stage,
            cfg: cfg.clone(),
            coords: samples.coords,
            targets: samples.targets,
            prefix,
            prev_features,
            adam: AdamState::new(cfg.adam),
            losses: Vec::new(),
            elapsed: Vec::new(),
            streak: 0,
            clock: Clock::start(),
            stop: None,
        })
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn epochs_run(&self) -> usize {
        self.losses.len()
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    pub fn stop_reason(&self) -> Option<StopReason> {
        self.stop
    }

    /// One pass over all samples. Returns the stop reason once the stage is
    /// done; further calls are no-ops.
    pub fn run_epoch(&mut self, net: &mut MrNet) -> Result<Option<StopReason>> {
        if self.stop.is_some() {
            return Ok(self.stop);
        }
        let epoch = self.losses.len();
        let n = self.coords.nrows();
        let batch = self.cfg.batch_size.min(n);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(epoch_seed(self.cfg.seed, self.stage, epoch)));

        let mut total = 0.0;
        for idx in order.chunks(batch) {
            let x = self.coords.select(Axis(0), idx);
            let target = self.targets.select(Axis(0), idx);
            let prev = self.prev_features.as_ref().map(|f| f.select(Axis(0), idx));
            let (g, trace) = net.stage_forward(self.stage, x.view(), prev.as_ref().map(|p| p.view()))?;
            let out = self.prefix.select(Axis(0), idx) + &g;
            let loss = mse_loss(out.view(), target.view())?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("loss at stage {} epoch {}", self.stage + 1, epoch + 1)));
            }
            let dout = mse_grad(out.view(), target.view());
            let (grads, _) = net.stage_backward(self.stage, &trace, dout.view(), None, true, false)?;
            let mut set = GradientSet { groups: vec![None; net.num_stages()] };
            set.groups[self.stage] = grads;
            if !set.is_finite() {
                return Err(Error::NonFinite(format!("gradient at stage {} epoch {}", self.stage + 1, epoch + 1)));
            }
            adam_step(&mut LiveStage { net, stage: self.stage }, &set, &mut self.adam, self.cfg.learning_rate)?;
            total += loss * idx.len() as f64;
        }
        let loss = total / n as f64;
        self.losses.push(loss);
        self.elapsed.push(self.clock.secs());

        if let [.., prev, last] = self.losses[..] {
            let change = if prev == 0.0 { if last == 0.0 { 0.0 } else { f64::INFINITY } } else { (last - prev).abs() / prev };
            if change * 100.0 < self.cfg.convergence_threshold {
                self.streak += 1;
            } else {
                self.streak = 0;
            }
            // an exact fit cannot improve further
            if self.streak >= self.cfg.patience || (self.streak > 0 && last == 0.0) {
                self.stop = Some(StopReason::Converged);
            }
        }
        if loss <= self.cfg.loss_threshold {
            self.stop = Some(StopReason::Converged);
        }
        if self.stop.is_none() && self.losses.len() >= self.cfg.max_epochs_per_stage {
            self.stop = Some(StopReason::MaxEpochs);
        }
        Ok(self.stop)
    }

    /// Freezes the stage and returns its report.
    pub fn finish(self, net: &mut MrNet) -> StageReport {
        net.stage_mut(self.stage).frozen = true;
        StageReport {
            stage: self.stage + 1,
            epochs_run: self.losses.len(),
            wall_time: self.clock.secs(),
            losses: self.losses,
            elapsed: self.elapsed,
            stop_reason: self.stop.unwrap_or(StopReason::MaxEpochs),
        }
    }
}

/// Trains stage `stage` (0-based) against `target` and freezes it.
pub fn train_stage(net: &mut MrNet, stage: usize, target: &ImageGrid, cfg: &TrainConfig) -> Result<StageReport> {
    let mut trainer = StageTrainer::new(net, stage, target, cfg)?;
    while trainer.run_epoch(net)?.is_none() {}
    Ok(trainer.finish(net))
}

/// Trains every stage in order, coarse to fine, then scores the partial sums.
pub fn train_schedule(net: &mut MrNet, pyramid: &Pyramid, cfg: &TrainConfig) -> Result<TrainReport> {
    train_schedule_with(net, pyramid, cfg, |_, _| {})
}

/// Like [`train_schedule`], calling `on_stage(net, stage)` when each stage is
/// about to start (before any of its parameters change).
pub fn train_schedule_with(
    net: &mut MrNet,
    pyramid: &Pyramid,
    cfg: &TrainConfig,
    mut on_stage: impl FnMut(&MrNet, usize),
) -> Result<TrainReport> {
    if pyramid.len() != net.num_stages() {
        return Err(contract(format!(
            "pyramid has {} levels, network has {} stages",
            pyramid.len(),
            net.num_stages()
        )));
    }
    let stages = if cfg.parallel_stages {
        on_stage(net, 0);
        train_parallel(net, pyramid, cfg)?
    } else {
        let mut reports = Vec::with_capacity(net.num_stages());
        for (i, level) in pyramid.levels.iter().enumerate() {
            on_stage(net, i);
            reports.push(train_stage(net, i, level, cfg)?);
        }
        reports
    };
    let level_psnr = partial_sum_psnr(net, pyramid)?;
    let final_psnr = *level_psnr.last().expect("at least one level");
    Ok(TrainReport { stages, level_psnr, final_psnr })
}

/// Evaluates `net` with the first `k` stages on at the pixel centers of `level`.
pub fn partial_sum_image(net: &MrNet, k: usize, level: &ImageGrid) -> Result<ImageGrid> {
    let coords = coords_grid_wh(level.width(), level.height());
    let weights: Vec<f64> = (0..net.num_stages()).map(|i| if i < k { 1.0 } else { 0.0 }).collect();
    let out = net.forward(coords.view(), &weights)?;
    ImageGrid::from_clamped(level.width(), level.height(), level.channels(), out)
}

/// PSNR of partial sum `k` against level `k`, for every `k`.
pub fn partial_sum_psnr(net: &MrNet, pyramid: &Pyramid) -> Result<Vec<f64>> {
    pyramid
        .levels
        .iter()
        .enumerate()
        .map(|(i, level)| psnr(&partial_sum_image(net, i + 1, level)?, level))
        .collect()
}

/// Joint training: each epoch visits every level and updates all stages on
/// the loss of the matching partial sum.
fn train_parallel(net: &mut MrNet, pyramid: &Pyramid, cfg: &TrainConfig) -> Result<Vec<StageReport>> {
    cfg.validate()?;
    if net.stages().iter().any(|s| s.frozen) {
        return Err(contract("parallel training needs every stage unfrozen"));
    }
    let clock = Clock::start();
    let n_stages = net.num_stages();
    let sets = pyramid
        .levels
        .iter()
        .enumerate()
        .map(|(i, l)| make_samples(l, i, Sampler::Regular))
        .collect::<Result<Vec<_>>>()?;
    let mut adam = AdamState::new(cfg.adam);
    let mut losses: Vec<f64> = Vec::new();
    let mut elapsed = Vec::new();
    let mut streak = 0;
    let mut stop = StopReason::MaxEpochs;
    for epoch in 0..cfg.max_epochs_per_stage {
        let mut epoch_loss = 0.0;
        for (k, set) in sets.iter().enumerate() {
            let weights: Vec<f64> = (0..n_stages).map(|i| if i <= k { 1.0 } else { 0.0 }).collect();
            let n = set.len();
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(epoch_seed(cfg.seed, k, epoch)));
            let mut total = 0.0;
            for idx in order.chunks(cfg.batch_size.min(n)) {
                let x = set.coords.select(Axis(0), idx);
                let t = set.targets.select(Axis(0), idx);
                let (out, trace) = net.forward_traced(x.view(), &weights)?;
                let loss = mse_loss(out.view(), t.view())?;
                if !loss.is_finite() {
                    return Err(Error::NonFinite(format!("loss at level {} epoch {}", k + 1, epoch + 1)));
                }
                let grads = net.backward(&trace, mse_grad(out.view(), t.view()).view())?;
                adam_step(net, &grads, &mut adam, cfg.learning_rate)?;
                total += loss * idx.len() as f64;
            }
            epoch_loss += total / n as f64;
        }
        if let Some(&prev) = losses.last() {
            let change: f64 = if prev == 0.0 { 0.0 } else { (epoch_loss - prev).abs() / prev };
            streak = if change * 100.0 < cfg.convergence_threshold { streak + 1 } else { 0 };
        }
        losses.push(epoch_loss);
        elapsed.push(clock.secs());
        if streak >= cfg.patience || epoch_loss <= cfg.loss_threshold {
            stop = StopReason::Converged;
            break;
        }
    }
    for i in 0..n_stages {
        net.stage_mut(i).frozen = true;
    }
    let wall_time = clock.secs();
    Ok((0..n_stages)
        .map(|i| StageReport {
            stage: i + 1,
            epochs_run: losses.len(),
            losses: losses.clone(),
            elapsed: elapsed.clone(),
            stop_reason: stop,
            wall_time,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::{doubling_bands, init_mrnet, write_model, ArchConfig};
    use crate::data::build_pyramid;

    fn small(variant: Variant, stages: usize, width: usize) -> MrNet {
        let cfg = ArchConfig { variant, width, bands: doubling_bands(4.0, stages), ..ArchConfig::default() };
        init_mrnet(&cfg, 7).unwrap()
    }

    fn zero_linear(net: &mut MrNet) {
        for i in 0..net.num_stages() {
            let lin = net.stage_mut(i).layers_mut().last_mut().unwrap();
            lin.weights_mut().fill(0.0);
            lin.bias_mut().fill(0.0);
        }
    }

    #[test]
    fn zero_target_converges_immediately() {
        let mut net = small(Variant::M, 1, 8);
        zero_linear(&mut net);
        let target = ImageGrid::constant(8, 8, 1, 0.0).unwrap();
        let rep = train_stage(&mut net, 0, &target, &TrainConfig::default()).unwrap();
        assert!(rep.epochs_run <= 2);
        assert_eq!(rep.stop_reason, StopReason::Converged);
        assert!(rep.losses.iter().all(|&l| l == 0.0));
        assert!(net.stage(0).frozen);
    }

    #[test]
    fn contract_violations() {
        let mut net = small(Variant::L, 2, 4);
        let target = ImageGrid::constant(8, 8, 1, 0.5).unwrap();
        assert!(matches!(train_stage(&mut net, 1, &target, &TrainConfig::default()), Err(Error::Contract(_))));
        assert!(train_stage(&mut net, 2, &target, &TrainConfig::default()).is_err());
        net.stage_mut(0).alpha = 0.5;
        assert!(train_stage(&mut net, 0, &target, &TrainConfig::default()).is_err());
        net.stage_mut(0).alpha = 1.0;
        let rgb = ImageGrid::constant(8, 8, 3, 0.5).unwrap();
        assert!(train_stage(&mut net, 0, &rgb, &TrainConfig::default()).is_err());
        let bad = TrainConfig { learning_rate: 0.0, ..TrainConfig::default() };
        assert!(matches!(train_stage(&mut net, 0, &target, &bad), Err(Error::Config(_))));
        let p = build_pyramid(&ImageGrid::constant(16, 16, 1, 0.5).unwrap(), 4).unwrap();
        assert!(train_schedule(&mut net, &p, &TrainConfig::default()).is_err());
    }

    #[test]
    fn earlier_stages_are_untouched() {
        let mut net = small(Variant::M, 3, 8);
        let img = ImageGrid::from_fn(16, 16, 1, |x, y, _| ((x * y) % 7) as f64 / 6.0).unwrap();
        let p = build_pyramid(&img, 4).unwrap();
        let cfg = TrainConfig { max_epochs_per_stage: 5, learning_rate: 1e-3, ..TrainConfig::default() };
        let mut snapshots = Vec::new();
        train_schedule_with(&mut net, &p, &cfg, |n, i| {
            snapshots.push((i, n.stages()[..i].to_vec()));
        })
        .unwrap();
        for (i, before) in snapshots {
            assert_eq!(&net.stages()[..i], &before[..]);
        }
        assert!(net.stages().iter().all(|s| s.frozen));
    }

    #[test]
    fn ramp_fits_with_one_stage() {
        let mut net = init_mrnet(&ArchConfig { bands: vec![4.0], ..ArchConfig::default() }, 0).unwrap();
        let ramp = ImageGrid::from_fn(16, 16, 1, |x, _, _| x as f64 / 15.0).unwrap();
        let cfg = TrainConfig { max_epochs_per_stage: 300, ..TrainConfig::default() };
        let rep = train_stage(&mut net, 0, &ramp, &cfg).unwrap();
        assert!(rep.epochs_run <= 300);
        let mse = crate::metrics::mse(&partial_sum_image(&net, 1, &ramp).unwrap(), &ramp).unwrap();
        assert!(mse < 1e-3, "mse {mse}");
    }

    #[test]
    fn constant_image_two_stages() {
        let mut net = small(Variant::M, 2, 16);
        let p = build_pyramid(&ImageGrid::constant(16, 16, 1, 0.5).unwrap(), 8).unwrap();
        let cfg = TrainConfig { learning_rate: 1e-2, max_epochs_per_stage: 3000, ..TrainConfig::default() };
        let rep = train_schedule(&mut net, &p, &cfg).unwrap();
        assert!(rep.stages.iter().all(|s| s.stop_reason == StopReason::Converged), "{:?}", rep.stages.iter().map(|s| s.epochs_run).collect::<Vec<_>>());
        assert!(rep.final_psnr >= 100.0, "{}", rep.final_psnr);
        let full = partial_sum_image(&net, 2, &p.levels[1]).unwrap();
        assert!(crate::metrics::mse(&full, &p.levels[1]).unwrap() < 1e-10);
    }

    #[test]
    fn training_is_deterministic() {
        let img = ImageGrid::from_fn(16, 16, 1, |x, y, _| ((x + 2 * y) % 5) as f64 / 4.0).unwrap();
        let p = build_pyramid(&img, 8).unwrap();
        let cfg = TrainConfig { max_epochs_per_stage: 4, batch_size: 50, seed: 9, ..TrainConfig::default() };
        let run = || {
            let mut net = small(Variant::M, 2, 8);
            let rep = train_schedule(&mut net, &p, &cfg).unwrap();
            (write_model(&net), rep.stages.iter().flat_map(|s| s.losses.clone()).collect::<Vec<_>>())
        };
        let (a, la) = run();
        let (b, lb) = run();
        assert_eq!(a, b);
        assert_eq!(la, lb);
    }

    #[test]
    fn stop_rule_invariants() {
        let img = ImageGrid::from_fn(8, 8, 1, |x, _, _| x as f64 / 7.0).unwrap();
        let mut net = small(Variant::S, 1, 8);
        let cfg = TrainConfig { max_epochs_per_stage: 7, ..TrainConfig::default() };
        let rep = train_stage(&mut net, 0, &img, &cfg).unwrap();
        assert!(rep.epochs_run <= 7);
        assert_eq!(rep.losses.len(), rep.epochs_run);
        if rep.stop_reason == StopReason::Converged {
            let l = &rep.losses;
            let n = l.len();
            assert!(l[n - 1] <= cfg.loss_threshold || (l[n - 1] - l[n - 2]).abs() / l[n - 2] * 100.0 < cfg.convergence_threshold);
        }
        let csv = TrainReport { stages: vec![rep], ..Default::default() }.log_csv();
        assert!(csv.starts_with("stage,epoch,loss,elapsed\n1,1,"));
        assert_eq!(csv.lines().count(), 1 + 7.min(csv.lines().count() - 1));
    }

    #[test]
    fn parallel_mode_reduces_loss_and_freezes() {
        let img = ImageGrid::from_fn(16, 16, 1, |x, y, _| (x + y) as f64 / 30.0).unwrap();
        let p = build_pyramid(&img, 8).unwrap();
        let mut net = small(Variant::L, 2, 16);
        let cfg = TrainConfig { parallel_stages: true, max_epochs_per_stage: 30, learning_rate: 1e-3, ..TrainConfig::default() };
        let rep = train_schedule(&mut net, &p, &cfg).unwrap();
        let l = &rep.stages[0].losses;
        assert!(l.last().unwrap() < &l[0]);
        assert!(net.stages().iter().all(|s| s.frozen));
    }
}
