use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fgn_core::experiment::{run_experiment, write_outputs, ExperimentConfig, Mode};
use fgn_core::generate::EdgeModel;
use fgn_core::inference::{Aggregator, CountKind};
use fgn_core::spectral::MatrixKind;
use fgn_core::{FgnError, Result};

/// Fractal Gaussian Network experiments.
///
/// Every subcommand accepts the same flags; values given on the command
/// line override the matching keys of `--config`. Outputs (edge lists, CSV
/// tables, summary.json and a hashed manifest.json) go to `--out`.
#[derive(Parser, Debug)]
#[command(name = "fgn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample networks and write their edge lists.
    Generate(Opts),
    /// Motif counts, clustering and degree histograms.
    Stats(Opts),
    /// Laplacian or adjacency spectrum with multiplicity clusters.
    Spectrum(Opts),
    /// Box-covering dimension.
    Boxdim(Opts),
    /// Fractality estimate from edge and node counts.
    Estimate(Opts),
    /// Threshold test for fractality.
    Detect(Opts),
    /// Two-community networks.
    Sbm(Opts),
    /// Read, clean and re-emit an edge list.
    Ingest(Opts),
    /// Motif counts across network sizes with a log-log fit.
    Scaling(Opts),
}

#[derive(Args, Debug, Default)]
struct Opts {
    /// JSON experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, conflicts_with = "gamma")]
    nu: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    /// Size parameter (expected node count).
    #[arg(long)]
    n: Option<f64>,
    #[arg(long)]
    replicates: Option<usize>,
    /// gaussian or hard.
    #[arg(long)]
    edge_model: Option<EdgeModel>,
    /// Detection threshold.
    #[arg(long)]
    nu0: Option<f64>,
    /// Edge list to analyse instead of generating.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Comma-separated sizes for scaling runs.
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<f64>>,
    /// mean, median or trimmed_mean:ALPHA.
    #[arg(long)]
    aggregator: Option<Aggregator>,
    /// Comma-separated counts to fit: edges, triangles, spokes_K, cliques_K.
    #[arg(long, value_delimiter = ',')]
    counts: Option<Vec<CountKind>>,
    #[arg(long, value_delimiter = ',')]
    spoke_ks: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    clique_ks: Option<Vec<usize>>,
    /// laplacian or adjacency.
    #[arg(long, value_parser = parse_matrix)]
    matrix: Option<MatrixKind>,
    #[arg(long, value_delimiter = ',')]
    box_sizes: Option<Vec<usize>>,
    #[arg(long)]
    gamma1: Option<f64>,
    #[arg(long)]
    gamma2: Option<f64>,
    #[arg(long)]
    sigma_in: Option<f64>,
    #[arg(long)]
    sigma_out: Option<f64>,
    /// Field grid cells per side.
    #[arg(long)]
    cells: Option<usize>,
    /// Write node positions.
    #[arg(long)]
    positions: bool,
    /// Skip community label files.
    #[arg(long)]
    no_labels: bool,
    /// Allow dense spectra and clique enumeration on very large inputs.
    #[arg(long)]
    allow_large: bool,
}

fn parse_matrix(s: &str) -> std::result::Result<MatrixKind, String> {
    match s {
        "laplacian" | "L" => Ok(MatrixKind::Laplacian),
        "adjacency" | "A" => Ok(MatrixKind::Adjacency),
        _ => Err(format!("unknown matrix '{s}' (laplacian or adjacency)")),
    }
}

fn build_config(mode: Mode, o: Opts) -> Result<ExperimentConfig> {
    let mut cfg = match &o.config {
        Some(path) => ExperimentConfig::from_json_file(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.mode = mode;
    if let Some(v) = o.seed {
        cfg.master_seed = v;
    }
    if let Some(v) = o.out {
        cfg.output_dir = v;
    }
    if let Some(v) = o.nu {
        cfg.model.nu = Some(v);
        cfg.model.gamma = None;
    }
    if let Some(v) = o.gamma {
        cfg.model.gamma = Some(v);
        cfg.model.nu = None;
    }
    if let Some(v) = o.dim {
        cfg.model.dim = v;
    }
    if let Some(v) = o.rho {
        cfg.model.rho = v;
        cfg.sbm.rho = v;
    }
    if let Some(v) = o.n {
        cfg.model.n = v;
    }
    if let Some(v) = o.replicates {
        cfg.replicates = v;
    }
    if let Some(v) = o.edge_model {
        cfg.model.edge_model = v;
    }
    if let Some(v) = o.nu0 {
        cfg.nu0 = v;
    }
    if let Some(v) = o.input {
        cfg.input = Some(v);
    }
    if let Some(v) = o.n_grid {
        cfg.n_grid = v;
    }
    if let Some(v) = o.aggregator {
        cfg.aggregator = v;
    }
    if let Some(v) = o.counts {
        cfg.count_kinds = v;
    }
    if let Some(v) = o.spoke_ks {
        cfg.spoke_ks = v;
    }
    if let Some(v) = o.clique_ks {
        cfg.clique_ks = v;
    }
    if let Some(v) = o.matrix {
        cfg.matrix = v;
    }
    if let Some(v) = o.box_sizes {
        cfg.box_sizes = Some(v);
    }
    if let Some(v) = o.gamma1 {
        cfg.sbm.gamma1 = v;
    }
    if let Some(v) = o.gamma2 {
        cfg.sbm.gamma2 = v;
    }
    if let Some(v) = o.sigma_in {
        cfg.sbm.sigma_in = Some(v);
    }
    if let Some(v) = o.sigma_out {
        cfg.sbm.sigma_out = Some(v);
    }
    if let Some(v) = o.cells {
        cfg.generation.cells_per_side = Some(v);
    }
    cfg.emit_positions |= o.positions;
    if o.no_labels {
        cfg.emit_labels = false;
    }
    cfg.allow_large |= o.allow_large;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let (mode, opts) = match cli.command {
        Command::Generate(o) => (Mode::Generate, o),
        Command::Stats(o) => (Mode::Stats, o),
        Command::Spectrum(o) => (Mode::Spectrum, o),
        Command::Boxdim(o) => (Mode::Boxdim, o),
        Command::Estimate(o) => (Mode::Estimate, o),
        Command::Detect(o) => (Mode::Detect, o),
        Command::Sbm(o) => (Mode::Sbm, o),
        Command::Ingest(o) => (Mode::Ingest, o),
        Command::Scaling(o) => (Mode::Scaling, o),
    };
    let cfg = build_config(mode, opts)?;
    let artifacts = run_experiment(&cfg)?;
    let manifest = write_outputs(&artifacts, &cfg.output_dir)?;
    log::info!("wrote {} files to {}", manifest.files.len() + 2, cfg.output_dir.display());
    let text = serde_json::to_string_pretty(&artifacts.summary).map_err(|e| FgnError::Numerical(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
