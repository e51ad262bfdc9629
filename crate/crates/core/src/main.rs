use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use mlhp::io::StudyRecord;
use mlhp::problems::Grading;
use mlhp::study::{run_corner_study, run_transient_study, CornerConfig, MeshMode, TransientConfig};
use mlhp::{Execution, Result, Space};

#[derive(Parser, Debug)]
#[command(name = "mlhp", version, about = "Multi-level hp convergence studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Spatial dimension.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, value_enum, default_value_t = Space::Tensor)]
    space: Space,
    /// CG stopping bound on sqrt(r^T D^-1 r).
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Worker threads; 0 runs everything sequentially and deterministically.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// CSV output file (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for VTU output of every solution.
    #[arg(long)]
    vtu: Option<PathBuf>,
    /// Sample intervals per polynomial degree in VTU output.
    #[arg(long, default_value_t = 2)]
    samples_per_p: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Corner singularity, one row per refinement depth.
    Corner {
        #[command(flatten)]
        common: Common,
        /// Largest refinement depth.
        #[arg(long, default_value_t = 5)]
        levels: usize,
        #[arg(long, value_enum, default_value_t = Grading::Uniform)]
        grading: Grading,
    },
    /// Moving Gaussian source, one row per time step plus a summary row.
    Transient {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 32)]
        steps: usize,
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
        /// Refinement levels towards the source path.
        #[arg(long, default_value_t = 3)]
        depth: usize,
        /// Polynomial degree on every leaf.
        #[arg(long, default_value_t = 4)]
        degree: usize,
        /// Base cells per axis.
        #[arg(long, default_value_t = 4)]
        base_cells: usize,
        #[arg(long, value_enum, default_value_t = MeshMode::Fixed)]
        mesh: MeshMode,
    },
}

fn execution(threads: usize) -> Result<Execution> {
    if threads == 0 {
        return Ok(Execution::Sequential);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| mlhp::Error::InvalidArgument(e.to_string()))?;
    Ok(Execution::Parallel)
}

fn run(cli: Cli) -> Result<()> {
    let common = match &cli.command {
        Command::Corner { common, .. } | Command::Transient { common, .. } => common,
    };
    let execution = execution(common.threads)?;
    if let Some(dir) = &common.vtu {
        std::fs::create_dir_all(dir)?;
    }
    let output: Box<dyn Write> = match &common.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut writer = csv::Writer::from_writer(output);
    let mut sink = |record: &StudyRecord| -> Result<()> {
        writer.serialize(record)?;
        writer.flush()?;
        Ok(())
    };

    match cli.command {
        Command::Corner { common, levels, grading } => {
            let config = CornerConfig {
                dim: common.dim,
                max_depth: levels,
                grading,
                space: common.space,
                tol: common.tol,
                execution,
                vtu_dir: common.vtu,
                samples_per_p: common.samples_per_p,
            };
            run_corner_study(&config, &mut sink)?;
        }
        Command::Transient {
            common,
            steps,
            theta,
            depth,
            degree,
            base_cells,
            mesh,
        } => {
            let mut config = TransientConfig::default_for(common.dim.max(1));
            config.steps = steps;
            config.theta = theta;
            config.depth = depth;
            config.degree = degree;
            config.base_cells = base_cells;
            config.mesh_mode = mesh;
            config.space = common.space;
            config.tol = common.tol;
            config.execution = execution;
            config.vtu_dir = common.vtu;
            config.samples_per_p = common.samples_per_p;
            run_transient_study(&config, None, &mut sink)?;
        }
    }
    Ok(())
}

fn main() {
    env_logger::init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
