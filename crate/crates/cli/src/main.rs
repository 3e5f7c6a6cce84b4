use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use vem_sad_core::geometry::{generate_mesh, write_mesh, MeshFamily};
use vem_sad_core::harness::{run_experiment, run_self_checks, write_trace_csv, ExperimentConfig};

/// Polygonal virtual element solver for stress-assisted diffusion.
#[derive(Parser)]
#[command(name = "vem-sad", version)]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML file.
    Run { config: PathBuf },
    /// Generate a mesh of a family at resolution n.
    Mesh {
        /// square, crossed, voronoi or l_shape
        family: String,
        n: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run the self-checks for a configuration without solving the experiment.
    Check { config: PathBuf },
}

fn parse_family(s: &str) -> Result<MeshFamily> {
    Ok(match s.to_ascii_lowercase().replace('-', "_").as_str() {
        "square" => MeshFamily::Square,
        "crossed" => MeshFamily::Crossed,
        "voronoi" => MeshFamily::Voronoi,
        "l_shape" | "lshape" => MeshFamily::LShape,
        other => bail!("unknown mesh family `{other}` (square, crossed, voronoi, l_shape)"),
    })
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("VEM_SAD_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .with_context(|| format!("VEM_SAD_THREADS = `{v}` is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let (trace, art) = run_experiment(&cfg)?;
            let stdout = std::io::stdout();
            write_trace_csv(&trace, stdout.lock())?;
            eprintln!("wrote {}", art.trace_csv.display());
            for p in art.indicator_csvs.iter().chain(&art.vtk).chain(&art.svg) {
                eprintln!("wrote {}", p.display());
            }
            Ok(true)
        }
        Command::Mesh { family, n, output } => {
            let mesh = generate_mesh(parse_family(&family)?, n)?;
            let f = File::create(&output).with_context(|| format!("creating {}", output.display()))?;
            let mut w = BufWriter::new(f);
            write_mesh(&mesh, &mut w)?;
            w.flush()?;
            eprintln!(
                "{} cells, {} vertices -> {}",
                mesh.num_cells(),
                mesh.num_vertices(),
                output.display()
            );
            Ok(true)
        }
        Command::Check { config } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let results = run_self_checks(&cfg)?;
            for r in &results {
                println!("{} {}: {}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            Ok(results.iter().all(|r| r.pass))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let outcome = init_threads().and_then(|_| run(cli));
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
