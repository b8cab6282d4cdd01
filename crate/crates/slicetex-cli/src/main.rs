use clap::{Args, Parser, Subcommand};
use slicetex_cli::config::{RunConfig, Slices};
use slicetex_cli::{cmd_ablate, cmd_gen, cmd_report, cmd_sweep, cmd_synth, CmdError, CmdResult};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "slicetex",
    version,
    about = "Exemplar-based texture synthesis with sliced optimal-transport losses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a texture from one exemplar.
    Synth(SynthArgs),
    /// Time synthesis under each direction budget, five runs per setting.
    AblateSlices(AblateArgs),
    /// Score reference/synthesis pairs and build a comparison grid.
    Report(ReportArgs),
    /// Synthesize at every pyramid depth from 0 up to a maximum.
    MultiscaleSweep(SweepArgs),
    /// Write a procedural test texture.
    GenTexture(GenTextureArgs),
    /// Write a seeded random backbone weights file.
    GenWeights(GenWeightsArgs),
}

/// Flags shared by every command that runs the backbone. Explicit flags
/// override values from `--config`.
#[derive(Args)]
struct CommonArgs {
    /// Flat `key = value` config file; flags given here win over it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Synthesis seed; defaults to a fresh random value recorded in the
    /// manifest.
    #[arg(long)]
    seed: Option<u64>,
    /// Seed for generated backbone weights when no file is supplied.
    #[arg(long)]
    backbone_seed: Option<u64>,
    /// Backbone weights file; defaults to the seeded cache.
    #[arg(long)]
    weights_path: Option<PathBuf>,
}

#[derive(Args)]
struct SynthCoreArgs {
    /// Pyramid depth K; the run synthesizes K+1 scales coarse to fine.
    #[arg(long)]
    scales: Option<usize>,
    /// Optimizer iterations per scale.
    #[arg(long)]
    iters: Option<usize>,
    /// Direction budget for the spatial terms: 16, 64, 256, or auto.
    #[arg(long, value_parser = parse_slices)]
    slices: Option<Slices>,
    /// Drop the height term and optimize the channel-sliced loss alone.
    #[arg(long)]
    no_height_loss: bool,
    /// Add the experimental width term alongside the height term.
    #[arg(long)]
    width_loss: bool,
    /// Optimizer step size.
    #[arg(long)]
    learning_rate: Option<f64>,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    core: SynthCoreArgs,
    /// Reference exemplar (PNG or JPEG).
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    /// Output image path; the trace CSV and manifest land beside it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Texture images to time.
    #[arg(required = true)]
    textures: Vec<PathBuf>,
    /// Output directory for the runtime table, CSV, and manifest.
    #[arg(long, default_value = "ablation")]
    out: PathBuf,
    /// Pyramid depth for the timed runs.
    #[arg(long)]
    scales: Option<usize>,
    /// Optimizer iterations per scale for the timed runs.
    #[arg(long)]
    iters: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Directory of pairs: name.png with name.synth.png, plus optional
    /// name.baseline.png.
    #[arg(long)]
    dir: PathBuf,
    /// Output directory; defaults to <dir>/report.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Add a ground-truth row scoring each reference against fresh crops of
    /// itself.
    #[arg(long)]
    include_gt: bool,
    /// Crop side length for the crop-based metrics.
    #[arg(long)]
    crop_size: Option<usize>,
    /// Crops drawn per image for the crop-based metrics.
    #[arg(long)]
    crop_count: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    core: SynthCoreArgs,
    /// Reference exemplar (PNG or JPEG).
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    /// Output directory for per-depth images and the summary table.
    #[arg(long, default_value = "sweep")]
    out: PathBuf,
    /// Largest pyramid depth to try.
    #[arg(long, default_value_t = 3)]
    max_scales: usize,
}

#[derive(Args)]
struct GenTextureArgs {
    /// Pattern: bands, bricks, waves, checker, rails, or noise.
    #[arg(long)]
    kind: String,
    /// Side length of one pattern cell in pixels.
    #[arg(long, default_value_t = 128)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Vertical repetitions of the cell.
    #[arg(long, default_value_t = 1)]
    tiles_y: usize,
    /// Horizontal repetitions of the cell.
    #[arg(long, default_value_t = 1)]
    tiles_x: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenWeightsArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Deepest convolution tag to include (e.g. conv3_2); smaller files for
    /// truncated backbones.
    #[arg(long)]
    through: Option<String>,
}

fn parse_slices(s: &str) -> Result<Slices, String> {
    s.parse()
}

fn base_config(path: Option<&Path>) -> CmdResult<RunConfig> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| {
                CmdError::usage(format!("cannot read config {}: {e}", p.display()))
            })?;
            RunConfig::parse(&text)
        }
        None => Ok(RunConfig::default()),
    }
}

fn apply_common(cfg: &mut RunConfig, args: &CommonArgs) {
    if let Some(v) = args.seed {
        cfg.seed = Some(v);
    }
    if let Some(v) = args.backbone_seed {
        cfg.backbone_seed = v;
    }
    if let Some(v) = &args.weights_path {
        cfg.weights_path = Some(v.clone());
    }
}

fn apply_core(cfg: &mut RunConfig, args: &SynthCoreArgs) -> CmdResult<()> {
    if let Some(v) = args.scales {
        cfg.scales = v;
    }
    if let Some(v) = args.iters {
        cfg.iters = v;
    }
    if let Some(v) = args.slices {
        cfg.slices = v;
    }
    if args.no_height_loss {
        cfg.height_loss = false;
    }
    if args.width_loss {
        cfg.width_loss = true;
    }
    if let Some(v) = args.learning_rate {
        if v <= 0.0 {
            return Err(CmdError::usage("learning_rate must be positive"));
        }
        cfg.learning_rate = v;
    }
    Ok(())
}

fn run_synth(args: SynthArgs) -> CmdResult<()> {
    let mut cfg = base_config(args.common.config.as_deref())?;
    apply_common(&mut cfg, &args.common);
    apply_core(&mut cfg, &args.core)?;
    if let Some(v) = args.reference {
        cfg.reference = Some(v);
    }
    if let Some(v) = args.out {
        cfg.out = Some(v);
    }
    let paths = cmd_synth::run(&mut cfg)?;
    println!("image    {}", paths.image.display());
    println!("trace    {}", paths.trace.display());
    println!("manifest {}", paths.manifest.display());
    Ok(())
}

fn run_ablate(args: AblateArgs) -> CmdResult<()> {
    let mut cfg = base_config(args.common.config.as_deref())?;
    apply_common(&mut cfg, &args.common);
    if let Some(v) = args.scales {
        cfg.scales = v;
    }
    if let Some(v) = args.iters {
        cfg.iters = v;
    }
    let (_, paths) = cmd_ablate::run(&mut cfg, &args.textures, &args.out)?;
    print!("{}", std::fs::read_to_string(&paths.table)?);
    println!("csv      {}", paths.csv.display());
    println!("manifest {}", paths.manifest.display());
    Ok(())
}

fn run_report(args: ReportArgs) -> CmdResult<()> {
    let mut cfg = base_config(args.common.config.as_deref())?;
    apply_common(&mut cfg, &args.common);
    if let Some(v) = args.crop_size {
        cfg.crop_size = v;
    }
    if let Some(v) = args.crop_count {
        cfg.crop_count = v;
    }
    let out_dir = args.out.unwrap_or_else(|| args.dir.join("report"));
    let result = cmd_report::run(&mut cfg, &args.dir, &out_dir, args.include_gt)?;
    print!("{}", std::fs::read_to_string(&result.table)?);
    for (path, why) in &result.skipped {
        eprintln!("skipped {}: {why}", path.display());
    }
    println!("csv      {}", result.csv.display());
    println!("grid     {}", result.grid.display());
    println!("manifest {}", result.manifest.display());
    Ok(())
}

fn run_sweep(args: SweepArgs) -> CmdResult<()> {
    let mut cfg = base_config(args.common.config.as_deref())?;
    apply_common(&mut cfg, &args.common);
    apply_core(&mut cfg, &args.core)?;
    if let Some(v) = args.reference {
        cfg.reference = Some(v);
    }
    let (_, paths) = cmd_sweep::run(&mut cfg, args.max_scales, &args.out)?;
    print!("{}", std::fs::read_to_string(&paths.table)?);
    println!("csv      {}", paths.csv.display());
    println!("manifest {}", paths.manifest.display());
    Ok(())
}

fn dispatch(cli: Cli) -> CmdResult<()> {
    match cli.command {
        Command::Synth(args) => run_synth(args),
        Command::AblateSlices(args) => run_ablate(args),
        Command::Report(args) => run_report(args),
        Command::MultiscaleSweep(args) => run_sweep(args),
        Command::GenTexture(args) => {
            cmd_gen::gen_texture(
                &args.kind,
                args.size,
                args.seed,
                args.tiles_y,
                args.tiles_x,
                &args.out,
            )?;
            println!("image    {}", args.out.display());
            Ok(())
        }
        Command::GenWeights(args) => {
            let checksum = cmd_gen::gen_weights(&args.out, args.seed, args.through.as_deref())?;
            println!("weights  {}", args.out.display());
            println!("checksum {checksum}");
            Ok(())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
