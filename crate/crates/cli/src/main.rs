use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use gyrox::dataset::{
    convergence_study, enumerate_doe, evaluate, run_dataset, DoeSpec, ParamRange, RecordStatus, StudyKind,
    SweepOptions, RECORDS_DIR,
};
use gyrox::homogenize::Objective;
use gyrox::topopt::{binarization_fraction, optimize, TopOptConfig};
use gyrox::tpms::{default_gyroid, voxelized_gyroid, TpmsSpec, VoxelRule, DEFAULT_STRUT_RADIUS};
use gyrox::{DensityGrid, Error};

#[derive(Parser)]
#[command(name = "gyrox", version, about = "Gyroid voxelization, homogenization and topology optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Voxelize a Gyroid unit cell into a dgrid file.
    Voxelize(VoxelizeArgs),
    /// Optimize one unit cell for bulk or shear modulus.
    Optimize(OptimizeArgs),
    /// Run a design-of-experiments sweep into a dataset directory.
    Sweep(SweepArgs),
    /// Compare predicted against reference dgrid records.
    Evaluate(EvaluateArgs),
    /// Mesh-point or voxel-resolution convergence table (CSV).
    Study(StudyArgs),
    /// Convert a dgrid file for external viewers.
    Export(ExportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Strut,
    EdgeCrossing,
}

#[derive(clap::Args)]
struct VoxelizeArgs {
    /// Level-set constant.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    c: f64,
    /// Cell edge length in cm.
    #[arg(long, default_value_t = 1.0)]
    cell_length: f64,
    #[arg(long, default_value_t = 15)]
    mesh_points: usize,
    #[arg(long, default_value_t = 32)]
    resolution: usize,
    #[arg(long, value_enum, default_value_t = RuleArg::Strut)]
    rule: RuleArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct OptimizeArgs {
    #[arg(long, value_parser = parse_objective)]
    objective: Objective,
    #[arg(long)]
    vf: f64,
    #[arg(long)]
    rmin: f64,
    /// A dgrid file, or `gyroid` for the voxelized reference cell.
    #[arg(long, default_value = "gyroid")]
    init: String,
    /// Voxels per axis when `--init gyroid`.
    #[arg(long, default_value_t = 32)]
    resolution: usize,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    /// Output stem; writes `<out>.dgrid` and `<out>.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SweepArgs {
    #[arg(long, default_value = "0.25:0.45:0.01")]
    vf_range: String,
    #[arg(long, default_value = "1.20:2.50:0.01")]
    rmin_range: String,
    /// Comma-separated list of `bulk`, `shear`.
    #[arg(long, default_value = "bulk,shear")]
    objectives: String,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out_dir: PathBuf,
    /// Seed of the train/val/test split.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    resume: bool,
    #[arg(long, default_value_t = 32)]
    resolution: usize,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
}

#[derive(clap::Args)]
struct EvaluateArgs {
    #[arg(long)]
    pred_dir: PathBuf,
    #[arg(long)]
    truth_dir: PathBuf,
}

#[derive(clap::Args)]
struct StudyArgs {
    #[arg(long, value_parser = parse_study_kind)]
    kind: StudyKind,
    /// Comma-separated mesh-point counts or resolutions.
    #[arg(long, value_delimiter = ',', required = true)]
    levels: Vec<usize>,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportFormat {
    Vtk,
}

#[derive(clap::Args)]
struct ExportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = ExportFormat::Vtk)]
    format: ExportFormat,
    #[arg(long)]
    out: PathBuf,
}

fn parse_objective(s: &str) -> Result<Objective, String> {
    s.parse()
}

fn parse_study_kind(s: &str) -> Result<StudyKind, String> {
    s.parse()
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::NoSurface | Error::ShapeMismatch(_) => 2,
        Error::Io(_) | Error::Format { .. } | Error::Json(_) => 3,
        Error::SolverDiverged { .. } | Error::BisectionFailed { .. } => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();

    if let Some(n) = std::env::var("GYROX_THREADS").ok().filter(|s| !s.is_empty()) {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("GYROX_THREADS ignored: {e}");
                }
            }
            _ => {
                eprintln!("error[InvalidArgument]: GYROX_THREADS must be a positive integer, got '{n}'");
                return ExitCode::from(2);
            }
        }
    }

    let result = match cli.command {
        Command::Voxelize(a) => voxelize(a),
        Command::Optimize(a) => run_optimize(a),
        Command::Sweep(a) => sweep(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Study(a) => study(a),
        Command::Export(a) => export(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.kind());
            ExitCode::from(exit_code(&e))
        }
    }
}

fn voxelize(a: VoxelizeArgs) -> gyrox::Result<()> {
    let spec = TpmsSpec {
        c: a.c,
        lengths: [a.cell_length; 3],
        mesh_points: a.mesh_points,
    };
    let rule = match a.rule {
        RuleArg::Strut => VoxelRule::StrutRadius(DEFAULT_STRUT_RADIUS * a.cell_length),
        RuleArg::EdgeCrossing => VoxelRule::EdgeCrossing,
    };
    let grid = voxelized_gyroid(&spec, [a.resolution; 3], rule)?;
    if let Some(out) = &a.out {
        grid.save(out)?;
        log::info!("wrote {}", out.display());
    }
    println!("relative_density={}", grid.relative_density());
    Ok(())
}

fn initial_grid(init: &str, resolution: usize) -> gyrox::Result<DensityGrid> {
    if init == "gyroid" {
        default_gyroid(resolution)
    } else {
        DensityGrid::load(init)
    }
}

fn run_optimize(a: OptimizeArgs) -> gyrox::Result<()> {
    let initial = initial_grid(&a.init, a.resolution)?;
    let mut config = TopOptConfig::new(a.objective, a.vf, a.rmin, initial.resolution());
    config.max_iterations = a.max_iter;
    config.validate()?;

    let start = Instant::now();
    let result = optimize(&config, &initial)?;
    log::info!(
        "{} iterations in {:.1} s, binarization fraction {:.4}",
        result.iterations_used,
        start.elapsed().as_secs_f64(),
        binarization_fraction(&result.final_grid)
    );
    if let Some(out) = &a.out {
        result.save(out)?;
        log::info!("wrote {}.dgrid and {}.json", out.display(), out.display());
    }
    println!(
        "objective={} volume={} converged={} iters={}",
        result.objective_value, result.achieved_volume, result.converged, result.iterations_used
    );
    Ok(())
}

fn parse_objectives(s: &str) -> gyrox::Result<Vec<Objective>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let o: Objective = part.parse().map_err(Error::InvalidArgument)?;
        if !out.contains(&o) {
            out.push(o);
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument("no objectives given".into()));
    }
    Ok(out)
}

fn sweep(a: SweepArgs) -> gyrox::Result<()> {
    let spec = DoeSpec {
        vf: a.vf_range.parse::<ParamRange>()?,
        rmin: a.rmin_range.parse::<ParamRange>()?,
        objectives: parse_objectives(&a.objectives)?,
    };
    if a.jobs == 0 {
        return Err(Error::InvalidArgument("--jobs must be at least 1".into()));
    }
    let points = enumerate_doe(&spec);
    let initial = default_gyroid(a.resolution)?;
    let mut base = TopOptConfig::new(Objective::Bulk, 0.5, 1.5, initial.resolution());
    base.max_iterations = a.max_iter;
    let options = SweepOptions {
        jobs: a.jobs,
        seed: a.seed,
        resume: a.resume,
        ..SweepOptions::new(&a.out_dir)
    };
    log::info!("sweeping {} design points with {} workers", points.len(), a.jobs);
    let (records, manifest) = run_dataset(&points, &base, &initial, &options)?;
    let failed = records.iter().filter(|r| r.status == RecordStatus::Failed).count();
    for r in records.iter().filter(|r| r.status == RecordStatus::Failed) {
        log::warn!("{} failed: {}", r.point.record_id(), r.error.as_deref().unwrap_or("unknown error"));
    }
    println!("attempted={}", manifest.total);
    println!("converged={}", manifest.converged);
    println!("discarded={}", manifest.discarded);
    println!("failed={failed}");
    Ok(())
}

/// `*.dgrid` files of a directory (or of its `records/` subdirectory), by name.
fn dgrid_files(dir: &Path) -> gyrox::Result<Vec<(String, PathBuf)>> {
    let scan = |d: &Path| -> gyrox::Result<Vec<(String, PathBuf)>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(d)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "dgrid") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    out.push((stem.to_string(), path.clone()));
                }
            }
        }
        out.sort();
        Ok(out)
    };
    let files = scan(dir)?;
    let nested = dir.join(RECORDS_DIR);
    if files.is_empty() && nested.is_dir() {
        return scan(&nested);
    }
    Ok(files)
}

fn run_evaluate(a: EvaluateArgs) -> gyrox::Result<()> {
    let pred = dgrid_files(&a.pred_dir)?;
    let truth = dgrid_files(&a.truth_dir)?;
    let names: Vec<String> = pred.iter().map(|(n, _)| n.clone()).collect();
    let truth_names: Vec<String> = truth.iter().map(|(n, _)| n.clone()).collect();
    if names != truth_names {
        let missing: Vec<_> = truth_names.iter().filter(|n| !names.contains(n)).collect();
        let extra: Vec<_> = names.iter().filter(|n| !truth_names.contains(n)).collect();
        return Err(Error::ShapeMismatch(format!(
            "record sets differ: missing predictions {missing:?}, unmatched predictions {extra:?}"
        )));
    }
    if names.is_empty() {
        return Err(Error::InvalidArgument("no dgrid records found".into()));
    }
    let load = |files: &[(String, PathBuf)]| files.iter().map(|(_, p)| DensityGrid::load(p)).collect::<gyrox::Result<Vec<_>>>();
    let report = evaluate(&load(&pred)?, &load(&truth)?, &names)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn study(a: StudyArgs) -> gyrox::Result<()> {
    let table = convergence_study(a.kind, &a.levels)?;
    let csv = table.to_csv();
    match &a.out {
        Some(out) => {
            fs::write(out, &csv)?;
            log::info!("wrote {}", out.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn export(a: ExportArgs) -> gyrox::Result<()> {
    let grid = DensityGrid::load(&a.input)?;
    match a.format {
        ExportFormat::Vtk => {
            let mut w = BufWriter::new(fs::File::create(&a.out)?);
            grid.write_vtk(&mut w)?;
            w.flush()?;
        }
    }
    println!("voxels={}", grid.len());
    Ok(())
}
