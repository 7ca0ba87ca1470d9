use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mrnet::data::FitPolicy;
use mrnet::render::{LevelMapping, WarpOptions};
use mrnet::{PyramidKind, Variant};
use mrnet_cli::{
    cmd_eval, cmd_info, cmd_render, cmd_train, cmd_warp, parse_homography, CliError, CliResult, RunConfig,
};

/// Train multiresolution sinusoidal networks on images and render them at any
/// resolution and level of detail. Set MRNET_LOG=info (or debug) for progress.
#[derive(Parser)]
#[command(name = "mrnet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a network to an image, coarse to fine.
    Train(TrainArgs),
    /// Reconstruct an image at a resolution and level of detail.
    Render {
        model: PathBuf,
        #[arg(long)]
        res: usize,
        /// Fractional level in [1, N]; defaults to N (full detail).
        #[arg(long)]
        lod: Option<f64>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Render the texture seen through a homography.
    Warp {
        model: PathBuf,
        /// Nine row-major values ("a,b,c,...") or a JSON file holding them.
        #[arg(long)]
        homography: String,
        #[arg(long)]
        res: usize,
        /// Resolution the model was trained at; defaults to --res.
        #[arg(long)]
        tex_res: Option<usize>,
        /// Blend stages per pixel by texel footprint.
        #[arg(long)]
        antialias: bool,
        #[arg(long, value_enum, default_value_t = Mapping::Octave)]
        mapping: Mapping,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Score a model against a reference image; prints JSON.
    Eval {
        model: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long, value_enum, default_value_t = Fit::Pad)]
        fit: Fit,
        #[arg(long, value_enum, default_value_t = Levels::Pyramid)]
        levels: Levels,
        /// Also write the JSON here.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Print a model summary.
    Info { model: PathBuf },
}

#[derive(clap::Args)]
struct TrainArgs {
    /// JSON run configuration; flags below override it.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// Output directory for the model, CSV log and JSON report.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    base_res: Option<usize>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    #[arg(long, value_enum)]
    levels: Option<Levels>,
    /// Write every pyramid level next to the model.
    #[arg(long)]
    export_levels: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mapping {
    Octave,
    Linear,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fit {
    Pad,
    Crop,
}

#[derive(Clone, Copy, ValueEnum)]
enum Levels {
    Pyramid,
    Tower,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    S,
    L,
    M,
}

impl From<Fit> for FitPolicy {
    fn from(f: Fit) -> Self {
        match f {
            Fit::Pad => FitPolicy::Pad,
            Fit::Crop => FitPolicy::Crop,
        }
    }
}

impl From<Levels> for PyramidKind {
    fn from(l: Levels) -> Self {
        match l {
            Levels::Pyramid => PyramidKind::Pyramid,
            Levels::Tower => PyramidKind::Tower,
        }
    }
}

fn run_config(a: TrainArgs) -> CliResult<RunConfig> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = a.input {
        cfg.input = Some(v);
    }
    if let Some(v) = a.out {
        cfg.output_dir = v;
    }
    if let Some(v) = a.seed {
        cfg.train.seed = v;
    }
    if let Some(v) = a.epochs {
        cfg.train.max_epochs_per_stage = v;
    }
    if let Some(v) = a.lr {
        cfg.train.learning_rate = v;
    }
    if let Some(v) = a.batch {
        cfg.train.batch_size = v;
    }
    if let Some(v) = a.width {
        cfg.width = v;
    }
    if let Some(v) = a.base_res {
        cfg.base_res = v;
    }
    if let Some(v) = a.variant {
        cfg.variant = match v {
            VariantArg::S => Variant::S,
            VariantArg::L => Variant::L,
            VariantArg::M => Variant::M,
        };
    }
    if let Some(v) = a.levels {
        cfg.pyramid = v.into();
    }
    cfg.export_levels |= a.export_levels;
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train(args) => {
            let cfg = run_config(args)?;
            let done = cmd_train(&cfg)?;
            println!("model  {}", done.model_path.display());
            println!("log    {}", done.log_path.display());
            println!("report {}", done.report_path.display());
            println!("final PSNR {:.2} dB", done.report.final_psnr);
        }
        Command::Render { model, res, lod, out } => {
            cmd_render(&model, res, lod, &out)?;
        }
        Command::Warp { model, homography, res, tex_res, antialias, mapping, out } => {
            let h = parse_homography(&homography)?;
            let mapping = match mapping {
                Mapping::Octave => LevelMapping::Octave,
                Mapping::Linear => LevelMapping::Linear,
            };
            if res == 0 {
                return Err(CliError::Usage("resolution must be positive".into()));
            }
            let opts = WarpOptions { out_res: res, tex_res: tex_res.unwrap_or(res), antialias, mapping };
            cmd_warp(&model, &h, &opts, &out)?;
        }
        Command::Eval { model, reference, fit, levels, out } => {
            let report = cmd_eval(&model, &reference, fit.into(), levels.into())?;
            let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Runtime(e.to_string()))?;
            if let Some(path) = out {
                std::fs::write(&path, format!("{json}\n"))
                    .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
            }
            println!("{json}");
        }
        Command::Info { model } => print!("{}", cmd_info(&model)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MRNET_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
