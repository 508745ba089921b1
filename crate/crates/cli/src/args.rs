use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "hvsisp", version, about = "Hybrid vision sensor ISP toolkit")]
pub struct Cli {
    /// Emit machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate black level and per-row fixed pattern noise from dark frames.
    CalibrateDark(CalibrateDarkArgs),
    /// Run the ISP on one RAW frame and write an sRGB PNG.
    Run(RunArgs),
    /// Fit a color correction matrix to measured chart patches.
    CcmFit(CcmFitArgs),
    /// Event stream tools.
    #[command(subcommand)]
    Events(EventsCommand),
    /// Compare two PNG images.
    Eval(EvalArgs),
    /// Batch reports over a manifest of frames and annotations.
    #[command(subcommand)]
    Report(ReportCommand),
    /// Write a synthetic ColorChecker capture with dark frames and annotation.
    Synth(SynthArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::CalibrateDark(_) => "calibrate-dark",
            Command::Run(_) => "run",
            Command::CcmFit(_) => "ccm-fit",
            Command::Events(e) => match e {
                EventsCommand::Voxelize(_) => "events voxelize",
                EventsCommand::Simulate(_) => "events simulate",
                EventsCommand::Activity(_) => "events activity",
                EventsCommand::Rate(_) => "events rate",
                EventsCommand::Flicker(_) => "events flicker",
            },
            Command::Eval(_) => "eval",
            Command::Report(r) => match r {
                ReportCommand::ColorAccuracy(_) => "report color-accuracy",
                ReportCommand::Stability(_) => "report stability",
            },
            Command::Synth(_) => "synth",
        }
    }
}

#[derive(Debug, Args)]
pub struct CalibrateDarkArgs {
    /// Dark RAW frames (PGM).
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub raw: PathBuf,
    /// key=value pipeline configuration; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dark calibration JSON (overrides dark.calibration).
    #[arg(long)]
    pub calib: Option<PathBuf>,
    /// LabelMe ColorChecker annotation.
    #[arg(long)]
    pub checker: Option<PathBuf>,
    /// Event stream (EVT1, or CSV by extension).
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Reference chart as encoded sRGB JSON (overrides ccm.reference).
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// CCM JSON for ccm.mode=file (overrides ccm.file).
    #[arg(long)]
    pub ccm: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Write the stage report as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CcmFitArgs {
    /// Linear measured patch colors: JSON array of 24 [r, g, b].
    #[arg(long)]
    pub measured: PathBuf,
    /// Reference chart as encoded sRGB JSON.
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub white_preserve: bool,
    #[arg(long)]
    pub no_exposure_normalize: bool,
}

#[derive(Debug, Subcommand)]
pub enum EventsCommand {
    /// Bin events into a VOX1 voxel grid.
    Voxelize(VoxelizeArgs),
    /// Generate events from two intensity frames.
    Simulate(SimulateArgs),
    /// Per-pixel event counts as JSON.
    Activity(WindowArgs),
    /// Global event rate per bin as CSV.
    Rate(RateArgs),
    /// Flicker periodicity report as JSON.
    Flicker(RateArgs),
}

#[derive(Debug, Args)]
pub struct TimeWindow {
    /// Window start in microseconds (default: first event).
    #[arg(long)]
    pub t0: Option<u64>,
    /// Window end in microseconds, exclusive (default: one past the last event).
    #[arg(long)]
    pub t1: Option<u64>,
}

#[derive(Debug, Args)]
pub struct VoxelizeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub window: TimeWindow,
    #[arg(long, default_value_t = 5)]
    pub bins: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// First intensity frame (PNG).
    #[arg(long)]
    pub frame0: PathBuf,
    /// Second intensity frame (PNG).
    #[arg(long)]
    pub frame1: PathBuf,
    /// Contrast threshold in log intensity.
    #[arg(long, default_value_t = 0.2)]
    pub theta: f64,
    #[arg(long, default_value_t = 0)]
    pub t0: u64,
    #[arg(long, default_value_t = 10_000)]
    pub t1: u64,
    /// Output EVT1, or CSV when the path ends in .csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct WindowArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub window: TimeWindow,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RateArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Bin width in microseconds.
    #[arg(long, default_value_t = 1000)]
    pub bin_width: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Comma-separated subset of psnr, ssim, l1.
    #[arg(long, default_value = "psnr,ssim,l1")]
    pub metrics: String,
    #[arg(long, default_value_t = 1.0)]
    pub peak: f64,
}

#[derive(Debug, Subcommand)]
pub enum ReportCommand {
    /// Per-patch ΔE00 and ΔEab against a reference chart.
    ColorAccuracy(ColorAccuracyArgs),
    /// Frame-to-frame patch fluctuation.
    Stability(StabilityArgs),
}

#[derive(Debug, Args)]
pub struct ColorAccuracyArgs {
    /// JSON list of {"frame": png, "annotation": labelme}; relative paths resolve against the manifest.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Reference chart as encoded sRGB JSON.
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub out_csv: PathBuf,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
    /// Sampling window as a fraction of the patch spacing.
    #[arg(long, default_value_t = hvsisp_core::color::DEFAULT_WINDOW_FRACTION)]
    pub window: f64,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out_csv: PathBuf,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
    #[arg(long, default_value_t = hvsisp_core::color::DEFAULT_WINDOW_FRACTION)]
    pub window: f64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 384)]
    pub width: usize,
    #[arg(long, default_value_t = 256)]
    pub height: usize,
    /// Gaussian read noise as a fraction of full scale.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 5)]
    pub dark_frames: usize,
    /// Target chart as encoded sRGB JSON (default: built-in ColorChecker values).
    #[arg(long)]
    pub reference: Option<PathBuf>,
}
