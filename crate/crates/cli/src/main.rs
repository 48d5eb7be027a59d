use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use roadclass_core::geom::BBox;
use roadclass_core::io;
use roadclass_core::painter::random_network;
use roadclass_core::pipeline::stages::{self, EvalInputs, PaintInputs};
use roadclass_core::pipeline::{parse_sweep_spec, run_pipeline, run_sweep, Mode, PipelineConfig, PipelineError};
use roadclass_core::raster::GeoTransform;
use roadclass_core::vectorize::GridSpec;

const TILE_HELP: &str = "Tiles are written as <sheet>_<row>_<col>.png, each with a .pgw world file, \
plus <sheet>_tiles.json describing the layout. Rows and columns count from the top-left tile.";

/// Road network vectorization and classification for scanned map sheets.
///
/// Exit codes: 0 success, 2 configuration error, 3 data error.
#[derive(Debug, Parser)]
#[command(name = "roadclass", version)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Append a manifest line for every stage run to this file.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split a raster into overlapping tiles.
    #[command(after_help = TILE_HELP)]
    Tile {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value = "sheet")]
        sheet: String,
        #[arg(long, default_value_t = 500)]
        tile_size: usize,
        #[arg(long, default_value_t = 125)]
        overlap: usize,
    },
    /// Reassemble tiles into one raster.
    #[command(after_help = TILE_HELP)]
    Stitch {
        #[arg(long)]
        tiles_dir: PathBuf,
        #[arg(long, default_value = "sheet")]
        sheet: String,
        #[arg(long)]
        output: PathBuf,
    },
    /// Remove components under the minimum area, then close the mask.
    Morph {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 100)]
        min_area: usize,
    },
    /// Thin a binary mask to a one-pixel skeleton.
    Skeleton {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Trace a skeleton into a simplified GeoJSON network.
    Vectorize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Simplification tolerance, meters.
        #[arg(long, default_value_t = 1.9)]
        epsilon: f64,
        #[command(flatten)]
        crs: CrsArgs,
    },
    /// Remove segments that trace the printed coordinate grid.
    Gridfilter(GridfilterArgs),
    /// Paint a network with random class symbols and write map, labels and region.
    Paint(PaintArgs),
    /// Template-matching class probabilities for a map.
    ClassifyBaseline {
        #[arg(long)]
        map: PathBuf,
        /// Road mask; only its pixels are scored.
        #[arg(long)]
        region: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        /// Symbology, baseline and tiling settings.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Average probability fields band-wise.
    Ensemble {
        #[arg(long)]
        output: PathBuf,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Set pixels outside a road mask to no road.
    Mask {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        region: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Split segments at class changes and classify each section.
    Assign(AssignArgs),
    /// Line metrics between networks and pixel metrics of a field.
    Eval(EvalArgs),
    /// Run every stage end to end.
    Pipeline(PipelineArgs),
    /// Run the pipeline once, then evaluate assignment parameter variations.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Values per parameter, e.g. "delta=5,10,20 l=40,80,120 beta=4,6,10".
        #[arg(long)]
        grid: String,
        /// Recompute every cell and rerun the pipeline.
        #[arg(long)]
        fresh: bool,
    },
    /// Draw classified sections over a map.
    Render {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        classified: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 3.0)]
        line_width: f64,
    },
    /// Print the default configuration.
    DefaultConfig,
}

#[derive(Debug, Args)]
struct CrsArgs {
    /// EPSG code written to GeoJSON output.
    #[arg(long, default_value_t = 2056)]
    crs: u32,
    /// Leave the CRS out of GeoJSON output.
    #[arg(long, conflicts_with = "crs")]
    no_crs: bool,
}

impl CrsArgs {
    fn epsg(&self) -> Option<u32> {
        (!self.no_crs).then_some(self.crs)
    }
}

#[derive(Debug, Args)]
struct GridfilterArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Also write the removed segments here.
    #[arg(long)]
    removed: Option<PathBuf>,
    /// Grid line spacing, meters; used unless --xs or --ys is given.
    #[arg(long, default_value_t = 1000.0)]
    spacing: f64,
    /// x-coordinates of vertical grid lines.
    #[arg(long, value_delimiter = ',')]
    xs: Vec<f64>,
    /// y-coordinates of horizontal grid lines.
    #[arg(long, value_delimiter = ',')]
    ys: Vec<f64>,
    /// Distance a vertex may stray from a grid line, meters.
    #[arg(long, default_value_t = 3.75)]
    buffer: f64,
    /// Largest net offset across a line still counted as zero, meters.
    #[arg(long, default_value_t = 2.5)]
    net_tolerance: f64,
    /// Largest distance from the grid line of end vertices skipped next to a junction, meters.
    #[arg(long, default_value_t = 10.0)]
    junction_offset: f64,
    #[command(flatten)]
    crs: CrsArgs,
}

#[derive(Debug, Args)]
struct PaintArgs {
    /// Network to paint; a random one is generated when absent.
    #[arg(long)]
    network: Option<PathBuf>,
    /// Base map; a paper-toned base is generated when absent.
    #[arg(long)]
    base: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    width: usize,
    #[arg(long, default_value_t = 2000)]
    height: usize,
    #[arg(long, default_value_t = 1.25)]
    pixel_size: f64,
    /// Map x of the top-left raster corner.
    #[arg(long, default_value_t = 600_000.0)]
    origin_x: f64,
    /// Map y of the top-left raster corner.
    #[arg(long, default_value_t = 202_500.0)]
    origin_y: f64,
    /// Roads of a generated network.
    #[arg(long, default_value_t = 30)]
    roads: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value = "synthetic")]
    stem: String,
    /// Symbology and label width.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    crs: CrsArgs,
}

#[derive(Debug, Args)]
struct AssignArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    field: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Assignment settings; the flags below override them.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Discretization interval, meters.
    #[arg(long)]
    delta: Option<f64>,
    /// Minimum section length, meters.
    #[arg(long)]
    min_length: Option<f64>,
    /// Zonal buffer radius, meters.
    #[arg(long)]
    beta: Option<f64>,
    /// Length trimmed from both section ends before the final class vote, meters.
    #[arg(long)]
    end_trim: Option<f64>,
    /// Write one profile CSV per segment into this directory.
    #[arg(long)]
    profiles: Option<PathBuf>,
    #[command(flatten)]
    crs: CrsArgs,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Ground-truth classified network.
    #[arg(long, requires = "predicted")]
    ground_truth: Option<PathBuf>,
    /// Predicted classified network.
    #[arg(long, requires = "ground_truth")]
    predicted: Option<PathBuf>,
    /// Probability field for pixel metrics.
    #[arg(long, requires = "labels")]
    field: Option<PathBuf>,
    /// Class labels (0 no road, 1..5) for pixel metrics.
    #[arg(long, requires = "field")]
    labels: Option<PathBuf>,
    /// Restrict pixel metrics to this mask.
    #[arg(long)]
    eval_mask: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
    /// Also write the text tables here.
    #[arg(long)]
    text: Option<PathBuf>,
    /// Buffer radius, meters.
    #[arg(long, default_value_t = 5.0)]
    buffer: f64,
    /// Leave no road out of the macro averages.
    #[arg(long)]
    exclude_no_road: bool,
    /// Average IoU over classes instead of road versus no road.
    #[arg(long)]
    macro_iou: bool,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Generate the map, labels and ground truth instead of reading them.
    #[arg(long)]
    synthetic: bool,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Draw the classified sections over the map.
    #[arg(long)]
    render: bool,
    /// Also sweep assignment parameters, e.g. "delta=5,10,20 l=40,80,120 beta=4,6,10".
    #[arg(long)]
    sweep: Option<String>,
    /// Write one profile CSV per segment.
    #[arg(long)]
    profiles: bool,
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig, PipelineError> {
    match path {
        Some(p) => PipelineConfig::load(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn run_config(args: &RunArgs) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = load_config(args.config.as_deref())?;
    if args.synthetic {
        cfg.mode = Mode::Synthetic;
    }
    if let Some(dir) = &args.output_dir {
        cfg.io.output_dir = dir.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn network_extent(path: &Path) -> Result<BBox, PipelineError> {
    let net = io::read_road_network(path)?;
    let points: Vec<_> = net.segments().values().flat_map(|s| s.line.vertices().to_vec()).collect();
    if points.is_empty() {
        return Err(PipelineError::Config(format!("{} holds no segment to place a regular grid on", path.display())));
    }
    Ok(BBox::from_points(&points))
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let m = cli.manifest.as_deref();
    let config_err = |e: &dyn std::fmt::Display| PipelineError::Config(e.to_string());
    match cli.command {
        Command::Tile { input, out_dir, sheet, tile_size, overlap } => {
            let tiling = roadclass_core::pipeline::TilingConfig { tile_size, overlap };
            let e = stages::tile(&input, &out_dir, &sheet, tiling, m)?;
            println!("wrote {} files to {}", e.outputs.len(), out_dir.display());
        }
        Command::Stitch { tiles_dir, sheet, output } => {
            stages::stitch(&tiles_dir, &sheet, &output, m)?;
            println!("wrote {}", output.display());
        }
        Command::Morph { input, output, min_area } => {
            stages::morph(&input, &output, min_area, m)?;
            println!("wrote {}", output.display());
        }
        Command::Skeleton { input, output } => {
            stages::skeleton(&input, &output, m)?;
            println!("wrote {}", output.display());
        }
        Command::Vectorize { input, output, epsilon, crs } => {
            if !(epsilon >= 0.0 && epsilon.is_finite()) {
                return Err(PipelineError::Config(format!("epsilon must be non-negative, got {epsilon}")));
            }
            let (_, stats) = stages::vectorize(&input, &output, epsilon, crs.epsg(), m)?;
            println!("{} segments, {} nodes written to {}", stats.segments, stats.nodes, output.display());
        }
        Command::Gridfilter(a) => {
            let spec = if a.xs.is_empty() && a.ys.is_empty() {
                GridSpec::regular(&network_extent(&a.input)?, a.spacing, a.buffer, a.net_tolerance)
            } else {
                GridSpec::new(a.xs.clone(), a.ys.clone(), a.buffer, a.net_tolerance)
            }
            .and_then(|g| g.with_junction_offset(a.junction_offset))
            .map_err(|e| config_err(&e))?;
            let (_, removed) = stages::gridfilter(&a.input, &a.output, a.removed.as_deref(), Some(&spec), a.crs.epsg(), m)?;
            println!("removed {removed} grid segments, wrote {}", a.output.display());
        }
        Command::Paint(a) => {
            let cfg = load_config(a.config.as_deref())?;
            let t = GeoTransform::new(a.origin_x, a.origin_y, a.pixel_size).map_err(|e| config_err(&e))?;
            std::fs::create_dir_all(&a.out_dir).map_err(|source| PipelineError::File { path: a.out_dir.clone(), source })?;
            let network = match &a.network {
                Some(p) => p.clone(),
                None => {
                    let params = roadclass_core::painter::RandomNetworkParams { roads: a.roads, ..cfg.synthetic.network.clone() };
                    let net = random_network(&t.extent(a.width, a.height), &params, a.seed)?;
                    let p = a.out_dir.join(format!("{}_network.geojson", a.stem));
                    io::write_road_network(&p, &net, a.crs.epsg())?;
                    p
                }
            };
            let inputs = PaintInputs { network: &network, base: a.base.as_deref(), grid: Some((a.width, a.height, t)) };
            let (_, files) =
                stages::paint(&inputs, &cfg.symbology, cfg.synthetic.label_width, a.seed, &a.out_dir, &a.stem, a.crs.epsg(), m)?;
            println!("wrote {}, {}, {}", files.map.display(), files.labels.display(), files.region_mask.display());
        }
        Command::ClassifyBaseline { map, region, output, config } => {
            let cfg = load_config(config.as_deref())?;
            stages::classify_baseline(&map, region.as_deref(), &output, &cfg.symbology, &cfg.baseline, cfg.tiling, m)?;
            println!("wrote {}", output.display());
        }
        Command::Ensemble { output, inputs } => {
            stages::ensemble(&inputs, &output, m)?;
            println!("averaged {} members into {}", inputs.len(), output.display());
        }
        Command::Mask { field, region, output } => {
            stages::mask(&field, &region, &output, m)?;
            println!("wrote {}", output.display());
        }
        Command::Assign(a) => {
            let mut params = load_config(a.config.as_deref())?.assignment;
            params.delta = a.delta.unwrap_or(params.delta);
            params.min_length = a.min_length.unwrap_or(params.min_length);
            params.beta = a.beta.unwrap_or(params.beta);
            params.end_trim = a.end_trim.unwrap_or(params.end_trim);
            params.validate().map_err(|e| config_err(&e))?;
            let (_, result) = stages::assign(&a.network, &a.field, &a.output, &params, a.profiles.as_deref(), a.crs.epsg(), m)?;
            println!(
                "{} segments classified into {} sections, {} failed; wrote {}",
                result.segments.len(),
                result.network.len(),
                result.failures.len(),
                a.output.display()
            );
        }
        Command::Eval(a) => {
            let config = roadclass_core::pipeline::EvaluationConfig {
                buffer: a.buffer,
                exclude_no_road: a.exclude_no_road,
                macro_iou: a.macro_iou,
            };
            let inputs = EvalInputs {
                lines: a.ground_truth.as_deref().zip(a.predicted.as_deref()),
                pixels: a.field.as_deref().zip(a.labels.as_deref()),
                eval_mask: a.eval_mask.as_deref(),
            };
            let (_, report) = stages::eval(&inputs, &config, &a.output, a.text.as_deref(), m)?;
            print!("{}", report.to_text());
        }
        Command::Pipeline(a) => {
            let mut cfg = run_config(&a.run)?;
            cfg.render.enabled |= a.render;
            cfg.io.profiles |= a.profiles;
            let grid = a.sweep.as_deref().map(parse_sweep_spec).transpose()?;
            cfg.validate()?;
            let outcome = run_pipeline(&cfg)?;
            let r = &outcome.report;
            println!(
                "{} segments traced, {} on grid lines removed, {} classified into {} sections, {} failed",
                r.vectorized_segments, r.grid_segments_removed, r.classified_segments, r.sections, r.failed_segments
            );
            if let Some(ev) = &r.evaluation {
                print!("{}", ev.to_text());
            }
            println!("outputs in {}", outcome.files.dir.display());
            if let Some(grid) = grid {
                let (path, rows) = run_sweep(&cfg, &grid, true)?;
                println!("{} sweep cells written to {}", rows.len(), path.display());
            }
        }
        Command::Sweep { run, grid, fresh } => {
            let cfg = run_config(&run)?;
            let grid = parse_sweep_spec(&grid)?;
            let (path, rows) = run_sweep(&cfg, &grid, !fresh)?;
            println!("{:>8} {:>8} {:>8} {:>12} {:>12}", "delta", "l", "beta", "complete %", "correct %");
            let pct = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{:.1}", 100.0 * v));
            for row in &rows {
                println!(
                    "{:>8} {:>8} {:>8} {:>12} {:>12}",
                    row.delta_m,
                    row.min_length_m,
                    row.beta_m,
                    pct(row.completeness),
                    pct(row.correctness)
                );
            }
            println!("wrote {}", path.display());
        }
        Command::Render { map, classified, output, line_width } => {
            if !(line_width > 0.0 && line_width.is_finite()) {
                return Err(PipelineError::Config(format!("line width must be positive, got {line_width}")));
            }
            stages::render(&map, &classified, &output, line_width, m)?;
            println!("wrote {}", output.display());
        }
        Command::DefaultConfig => print!("{}", PipelineConfig::default().to_toml()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
