//! Command-line front end. [`run`] parses arguments and returns the process
//! exit code:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | usage error |
//! | 2 | I/O or validation failure |
//! | 3 | `verify` found a failing check |

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::blocks::PoolWindow;
use crate::error::Error;
use crate::io::{load_png, read_weights, save_png, scan_dataset, write_atomically, write_weights};
use crate::metrics::{mse_loss, freq_charbonnier_loss, stereo_eval, EvalReport, LossConfig};
use crate::model::{
    init_parameters, param_breakdown, Model, ModelConfig, Preset, StereoPair, DEFAULT_TLC_WINDOW,
};
use crate::verify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "cvhssr", version, about = "Stereo image super-resolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Super-resolve one stereo pair.
    Run(RunArgs),
    /// Score a dataset of `<scene>/{lr0,lr1,hr0,hr1}.png` folders.
    Eval(EvalArgs),
    /// Print the parameter count of a configuration.
    Params(ConfigArgs),
    /// Write a freshly initialized weight file.
    InitWeights(InitArgs),
    /// Compute the training loss between SR and HR pairs.
    Loss(LossArgs),
    /// Run the built-in invariant checks.
    Verify,
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// Model size: t (tiny) or s (small).
    #[arg(long)]
    preset: Preset,
    /// Upscaling factor, 2 or 4.
    #[arg(long)]
    scale: usize,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Model size when no weight file is given: t or s.
    #[arg(long)]
    preset: Option<Preset>,
    /// Upscaling factor, 2 or 4.
    #[arg(long)]
    scale: Option<usize>,
    /// Weight file; without one the model is randomly initialized.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Seed for random initialization.
    #[arg(long, default_value_t = 0, conflicts_with = "weights")]
    seed: u64,
    /// Use local instead of global pooling in channel attention.
    #[arg(long)]
    tlc: bool,
    /// Local pooling window in feature pixels.
    #[arg(long, value_name = "HxW", requires = "tlc")]
    tlc_window: Option<PoolWindow>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    left: PathBuf,
    #[arg(long)]
    right: PathBuf,
    #[arg(long)]
    out_left: PathBuf,
    #[arg(long)]
    out_right: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Root folder holding one sub-folder per scene.
    #[arg(long)]
    dataset: PathBuf,
    /// Also write per-scene metrics and the mean as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InitArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct LossArgs {
    #[arg(long)]
    sr_left: PathBuf,
    #[arg(long)]
    sr_right: PathBuf,
    #[arg(long)]
    hr_left: PathBuf,
    #[arg(long)]
    hr_right: PathBuf,
    /// Weight of the frequency term.
    #[arg(long, default_value_t = LossConfig::default().lambda)]
    lambda: f64,
    /// Charbonnier constant.
    #[arg(long, default_value_t = LossConfig::default().epsilon)]
    epsilon: f64,
}

enum Failure {
    Usage(String),
    Runtime(String),
    Verify(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

/// Runs the CLI against the process's standard streams.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

/// Runs the CLI with data written to `out` and diagnostics to `err`.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a, err),
        Command::Eval(a) => cmd_eval(a, out, err),
        Command::Params(a) => cmd_params(a, out),
        Command::InitWeights(a) => cmd_init(a, err),
        Command::Loss(a) => cmd_loss(a, out),
        Command::Verify => cmd_verify(out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_FAILURE
        }
        Err(Failure::Verify(n)) => {
            let _ = writeln!(err, "verification failed: {n} check(s) did not pass");
            EXIT_VERIFY
        }
    }
}

fn build_model(args: &ModelArgs, err: &mut dyn Write) -> Result<Model, Failure> {
    let (config, store) = match &args.weights {
        Some(path) => {
            let (config, store) = read_weights(path)?;
            if let Some(p) = args.preset {
                if config.matching_preset() != Some(p) {
                    return Err(Failure::Runtime(format!(
                        "weight file holds C={}, N={}, which is not preset {p}",
                        config.channels, config.num_blocks
                    )));
                }
            }
            if let Some(s) = args.scale {
                if s != config.scale {
                    return Err(Failure::Runtime(format!(
                        "weight file is for scale {}, --scale says {s}",
                        config.scale
                    )));
                }
            }
            (config, store)
        }
        None => {
            let preset = args
                .preset
                .ok_or_else(|| Failure::Usage("--preset is required without --weights".into()))?;
            let scale = args
                .scale
                .ok_or_else(|| Failure::Usage("--scale is required without --weights".into()))?;
            let config = ModelConfig::preset(preset, scale)?;
            writeln!(err, "note: no weights given, using random initialization (seed {})", args.seed)?;
            (config, init_parameters(&config, args.seed))
        }
    };
    let window = args.tlc_window.unwrap_or(DEFAULT_TLC_WINDOW);
    Ok(Model::new(config, &store)?.with_tlc(args.tlc, window)?)
}

fn load_pair(left: &Path, right: &Path) -> Result<StereoPair, Failure> {
    Ok(StereoPair::new(load_png(left)?, load_png(right)?)?)
}

fn cmd_run(args: RunArgs, err: &mut dyn Write) -> Outcome {
    let model = build_model(&args.model, err)?;
    let input = load_pair(&args.left, &args.right)?;
    let sr = model.forward(&input)?;
    save_png(sr.left(), &args.out_left)?;
    if let Err(e) = save_png(sr.right(), &args.out_right) {
        let _ = std::fs::remove_file(&args.out_left);
        return Err(e.into());
    }
    writeln!(
        err,
        "wrote {}x{} pair to {} and {}",
        sr.height(),
        sr.width(),
        args.out_left.display(),
        args.out_right.display()
    )?;
    Ok(())
}

fn cmd_eval(args: EvalArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let model = build_model(&args.model, err)?;
    let scan = scan_dataset(&args.dataset, model.scale())?;
    for w in &scan.warnings {
        writeln!(err, "warning: skipping {w}")?;
    }
    let mut report = EvalReport { images: Vec::new() };
    for entry in &scan.entries {
        let scored = load_pair(&entry.lr_left, &entry.lr_right).and_then(|lr| {
            let hr = load_pair(&entry.hr_left, &entry.hr_right)?;
            let sr = model.forward(&lr)?;
            Ok(stereo_eval(&entry.scene, &sr, &hr)?)
        });
        match scored {
            Ok(m) => report.images.push(m),
            Err(Failure::Runtime(msg)) => writeln!(err, "warning: skipping scene `{}`: {msg}", entry.scene)?,
            Err(other) => return Err(other),
        }
    }

    writeln!(out, "{:<24} {:>10} {:>10} {:>10} {:>10}", "scene", "psnr_left", "ssim_left", "psnr_pair", "ssim_pair")?;
    for m in &report.images {
        writeln!(
            out,
            "{:<24} {:>10.4} {:>10.6} {:>10.4} {:>10.6}",
            m.scene, m.psnr_left, m.ssim_left, m.psnr_pair, m.ssim_pair
        )?;
    }
    let aggregate = report.aggregate();
    match aggregate {
        Some(a) => writeln!(
            out,
            "{:<24} {:>10.4} {:>10.6} {:>10.4} {:>10.6}",
            "mean", a.psnr_left, a.ssim_left, a.psnr_pair, a.ssim_pair
        )?,
        None => writeln!(err, "warning: no valid scenes under {}", args.dataset.display())?,
    }

    if let Some(path) = &args.csv {
        write_atomically(path, |f| {
            writeln!(f, "scene,psnr_left,ssim_left,psnr_pair,ssim_pair")?;
            for m in &report.images {
                writeln!(f, "{},{},{},{},{}", m.scene, m.psnr_left, m.ssim_left, m.psnr_pair, m.ssim_pair)?;
            }
            if let Some(a) = aggregate {
                writeln!(f, "mean,{},{},{},{}", a.psnr_left, a.ssim_left, a.psnr_pair, a.ssim_pair)?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

fn cmd_params(args: ConfigArgs, out: &mut dyn Write) -> Outcome {
    let config = ModelConfig::preset(args.preset, args.scale)?;
    let b = param_breakdown(&config);
    writeln!(
        out,
        "config       {} x{} (C={}, N={})",
        args.preset, config.scale, config.channels, config.num_blocks
    )?;
    writeln!(out, "shallow      {}", b.shallow)?;
    writeln!(out, "chimb        {} ({} x {})", b.chimb_per_block * b.num_blocks, b.num_blocks, b.chimb_per_block)?;
    writeln!(out, "cvim         {} ({} x {})", b.cvim_per_block * b.num_blocks, b.num_blocks, b.cvim_per_block)?;
    writeln!(out, "reconstruct  {}", b.reconstruct)?;
    writeln!(out, "total        {}", b.total())?;
    Ok(())
}

fn cmd_init(args: InitArgs, err: &mut dyn Write) -> Outcome {
    let config = ModelConfig::preset(args.config.preset, args.config.scale)?;
    let store = init_parameters(&config, args.seed);
    write_weights(&config, &store, &args.out)?;
    writeln!(err, "wrote {} parameters to {}", store.scalar_count(), args.out.display())?;
    Ok(())
}

fn cmd_loss(args: LossArgs, out: &mut dyn Write) -> Outcome {
    let config = LossConfig {
        lambda: args.lambda,
        epsilon: args.epsilon,
    };
    config.validate()?;
    let sr = load_pair(&args.sr_left, &args.sr_right)?;
    let hr = load_pair(&args.hr_left, &args.hr_right)?;
    let mse = mse_loss(&sr, &hr)?;
    let fc = freq_charbonnier_loss(&sr, &hr, config.epsilon)?;
    writeln!(out, "L_MSE   = {mse:e}")?;
    writeln!(out, "L_FC    = {fc:e}")?;
    writeln!(out, "L_total = {:e}", mse + config.lambda * fc)?;
    Ok(())
}

fn cmd_verify(out: &mut dyn Write) -> Outcome {
    let outcomes = verify::run_all();
    for o in &outcomes {
        writeln!(out, "{o}")?;
    }
    match outcomes.iter().filter(|o| !o.passed).count() {
        0 => Ok(()),
        n => Err(Failure::Verify(n)),
    }
}
