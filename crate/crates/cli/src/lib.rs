//! Commands behind the `mrnet` binary.
//!
//! Every command returns a [`CliError`] that knows its exit code: 2 for bad
//! input (usage, configuration, unreadable or invalid files), 1 for failures
//! while running.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use mrnet::arch::{doubling_bands, load_model, save_model};
use mrnet::data::{build_pyramid, build_tower, fit_power_of_two, load_image, save_image, FitPolicy};
use mrnet::render::{reconstruct, warp_render, WarpOptions};
use mrnet::train::{partial_sum_image, train_schedule_with};
use mrnet::{
    init_mrnet, psnr, ArchConfig, Error, Homography, ImageGrid, MrNet, Precision, Pyramid, PyramidKind, TrainConfig,
    TrainReport, Variant, Wiring,
};

pub const MODEL_FILE: &str = "model.mrn";
pub const LOG_FILE: &str = "train_log.csv";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) | Error::NonFinite(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Everything `train` needs. Paths are relative to the working directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Side of the coarsest level. The stage count is `log2(side / base_res) + 1`.
    pub base_res: usize,
    pub pyramid: PyramidKind,
    pub fit: FitPolicy,
    pub variant: Variant,
    pub wiring: Wiring,
    pub width: usize,
    pub hidden_layers: usize,
    pub omega_g: f64,
    /// Per-stage frequency bands. Defaults to 4, 8, 16, … for as many stages
    /// as the pyramid has levels.
    pub bands: Option<Vec<f64>>,
    pub precision: Precision,
    /// Also write every pyramid level as `level_<k>.png`.
    pub export_levels: bool,
    /// `train.seed` also seeds the network initialization.
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let arch = ArchConfig::default();
        Self {
            input: None,
            output_dir: PathBuf::from("out"),
            base_res: 8,
            pyramid: PyramidKind::Pyramid,
            fit: FitPolicy::Pad,
            variant: arch.variant,
            wiring: arch.wiring,
            width: arch.width,
            hidden_layers: arch.hidden_layers,
            omega_g: arch.omega_g,
            bands: None,
            precision: arch.precision,
            export_levels: false,
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        if !path.exists() {
            return Err(CliError::Usage(format!("config not found: {}", path.display())));
        }
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// Checks everything that does not depend on the input image.
    pub fn validate(&self) -> CliResult<()> {
        if self.input.is_none() {
            return Err(CliError::Usage("no input image given".into()));
        }
        if self.base_res == 0 || !self.base_res.is_power_of_two() {
            return Err(CliError::Usage(format!("base_res {} is not a power of two", self.base_res)));
        }
        self.arch(self.bands.clone().unwrap_or_else(|| vec![4.0])).validate()?;
        self.train.validate()?;
        Ok(())
    }

    fn arch(&self, bands: Vec<f64>) -> ArchConfig {
        ArchConfig {
            variant: self.variant,
            wiring: self.wiring,
            input_dim: 2,
            channels: 1,
            width: self.width,
            hidden_layers: self.hidden_layers,
            bands,
            omega_g: self.omega_g,
            precision: self.precision,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportFile {
    pub count_params: usize,
    pub level_sizes: Vec<usize>,
    #[serde(flatten)]
    pub report: TrainReport,
}

pub struct TrainOutcome {
    pub model_path: PathBuf,
    pub log_path: PathBuf,
    pub report_path: PathBuf,
    pub net: MrNet,
    pub report: TrainReport,
}

fn load_input(path: &Path, fit: FitPolicy) -> CliResult<ImageGrid> {
    let img = load_image(path)?;
    let fitted = fit_power_of_two(&img, fit);
    if (fitted.width(), fitted.height()) != (img.width(), img.height()) {
        info!("resized {}x{} input to {}x{}", img.width(), img.height(), fitted.width(), fitted.height());
    }
    Ok(fitted)
}

fn levels_for(side: usize, base_res: usize) -> CliResult<usize> {
    if base_res > side {
        return Err(CliError::Usage(format!("base_res {base_res} exceeds the image side {side}")));
    }
    Ok((side / base_res).trailing_zeros() as usize + 1)
}

fn build_levels(img: &ImageGrid, base_res: usize, kind: PyramidKind) -> CliResult<Pyramid> {
    let n = levels_for(img.width(), base_res)?;
    Ok(match kind {
        PyramidKind::Pyramid => build_pyramid(img, base_res)?,
        PyramidKind::Tower => build_tower(img, n)?,
    })
}

pub fn cmd_train(cfg: &RunConfig) -> CliResult<TrainOutcome> {
    cfg.validate()?;
    let input = cfg.input.as_deref().expect("validated");
    let img = load_input(input, cfg.fit)?;
    let pyramid = build_levels(&img, cfg.base_res, cfg.pyramid)?;
    let n = pyramid.len();
    let bands = cfg.bands.clone().unwrap_or_else(|| doubling_bands(4.0, n));
    if bands.len() != n {
        return Err(CliError::Usage(format!("{} bands given for {n} pyramid levels", bands.len())));
    }
    let arch = ArchConfig { channels: img.channels(), ..cfg.arch(bands) };
    let mut net = init_mrnet(&arch, cfg.train.seed)?;

    fs::create_dir_all(&cfg.output_dir).map_err(|e| io_err(&cfg.output_dir, e))?;
    if cfg.export_levels {
        pyramid.export(&cfg.output_dir)?;
    }
    let sizes: Vec<usize> = pyramid.levels.iter().map(|l| l.width()).collect();
    info!("training {n} stages at sizes {sizes:?}, {} parameters", net.count_params());
    let report = train_schedule_with(&mut net, &pyramid, &cfg.train, |_, i| info!("stage {}/{n}", i + 1))?;
    for st in &report.stages {
        info!("stage {}: {} epochs, {:?}, {:.1}s", st.stage, st.epochs_run, st.stop_reason, st.wall_time);
    }
    info!("final PSNR {:.2} dB", report.final_psnr);

    let model_path = cfg.output_dir.join(MODEL_FILE);
    let log_path = cfg.output_dir.join(LOG_FILE);
    let report_path = cfg.output_dir.join(REPORT_FILE);
    save_model(&net, &model_path)?;
    fs::write(&log_path, report.log_csv()).map_err(|e| io_err(&log_path, e))?;
    let file = ReportFile { count_params: net.count_params(), level_sizes: sizes, report: report.clone() };
    let json = serde_json::to_string_pretty(&file).map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(&report_path, json + "\n").map_err(|e| io_err(&report_path, e))?;
    Ok(TrainOutcome { model_path, log_path, report_path, net, report })
}

/// Clamps `lod` into `[1, N]`, warning when it had to.
pub fn clamp_lod(lod: f64, n: usize) -> CliResult<f64> {
    if !lod.is_finite() {
        return Err(CliError::Usage(format!("level of detail {lod} is not finite")));
    }
    let clamped = lod.clamp(1.0, n as f64);
    if clamped != lod {
        warn!("level of detail {lod} outside [1, {n}], using {clamped}");
    }
    Ok(clamped)
}

pub fn cmd_render(model: &Path, res: usize, lod: Option<f64>, out: &Path) -> CliResult<ImageGrid> {
    let net = load_model(model)?;
    if res == 0 {
        return Err(CliError::Usage("resolution must be positive".into()));
    }
    let n = net.num_stages();
    let lod = clamp_lod(lod.unwrap_or(n as f64), n)?;
    let img = reconstruct(&net, res, lod)?;
    save_image(&img, out)?;
    Ok(img)
}

/// Nine numbers, row-major, either inline (comma or space separated) or as a
/// JSON array in a file.
pub fn parse_homography(arg: &str) -> CliResult<Homography> {
    let path = Path::new(arg);
    let values: Vec<f64> = if path.is_file() {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{arg}: {e}")))?
    } else {
        arg.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|_| CliError::Usage(format!("bad homography entry {s:?}"))))
            .collect::<CliResult<_>>()?
    };
    Ok(Homography::from_row_major(&values)?)
}

pub fn cmd_warp(model: &Path, h: &Homography, opts: &WarpOptions, out: &Path) -> CliResult<ImageGrid> {
    let net = load_model(model)?;
    let img = warp_render(&net, h, opts)?;
    save_image(&img, out)?;
    Ok(img)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub count_params: usize,
    pub stages: usize,
    pub level_sizes: Vec<usize>,
    /// Partial sum `k` against level `k`.
    pub level_psnr: Vec<f64>,
    /// Full reconstruction against the reference.
    pub final_psnr: f64,
}

pub fn cmd_eval(model: &Path, reference: &Path, fit: FitPolicy, kind: PyramidKind) -> CliResult<EvalReport> {
    let net = load_model(model)?;
    let img = load_input(reference, fit)?;
    if img.channels() != net.channels() {
        return Err(CliError::Usage(format!(
            "reference has {} channels, model outputs {}",
            img.channels(),
            net.channels()
        )));
    }
    let n = net.num_stages();
    let side = img.width();
    if side >> (n - 1) == 0 {
        return Err(CliError::Usage(format!("reference side {side} is too small for {n} levels")));
    }
    let pyramid = build_levels(&img, side >> (n - 1), kind)?;
    let level_psnr = pyramid
        .levels
        .iter()
        .enumerate()
        .map(|(i, level)| psnr(&partial_sum_image(&net, i + 1, level)?, level))
        .collect::<mrnet::Result<Vec<_>>>()?;
    let final_psnr = psnr(&partial_sum_image(&net, n, &img)?, &img)?;
    Ok(EvalReport {
        count_params: net.count_params(),
        stages: n,
        level_sizes: pyramid.levels.iter().map(|l| l.width()).collect(),
        level_psnr,
        final_psnr,
    })
}

pub fn cmd_info(model: &Path) -> CliResult<String> {
    let net = load_model(model)?;
    let mut s = String::new();
    let variant = match net.variant() {
        Variant::S => "S",
        Variant::L => "L",
        Variant::M => "M",
    };
    s += &format!("variant       {variant}-Net\n");
    if net.variant() == Variant::M && net.num_stages() > 1 {
        s += &format!("wiring        {:?}\n", net.wiring()).to_lowercase();
    }
    s += &format!("precision     {} bytes\n", net.precision().bytes());
    s += &format!("input/output  {} -> {}\n", net.input_dim(), net.channels());
    s += &format!("width         {}\n", net.width());
    s += &format!("hidden layers {}\n", net.hidden_layers());
    s += &format!("stages        {}\n", net.num_stages());
    s += &format!("parameters    {}\n", net.count_params());
    s += "stage  band      omega_g  alpha  frozen  params\n";
    for (i, st) in net.stages().iter().enumerate() {
        s += &format!(
            "{:<6} {:<9} {:<8} {:<6} {:<7} {}\n",
            i + 1,
            st.band_limit,
            st.omega_g,
            st.alpha,
            if st.frozen { "yes" } else { "no" },
            st.param_count()
        );
    }
    Ok(s)
}
