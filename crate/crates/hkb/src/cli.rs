//! Argument parsing and exit codes.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use crate::commands::{self, BaryArgs, Route, TreeArgs, Usage};
use crate::config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "hkb", version, about = "Hellinger-Kantorovich distances, barycenters and barycenter trees")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// HK distance between two measures
    Dist {
        a: PathBuf,
        b: PathBuf,
        /// Nodes per axis when point clouds are solved on a grid
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// HK barycenter of several measures
    Bary {
        inputs: Vec<PathBuf>,
        /// Solve exactly; every input must be a single atom
        #[arg(long, conflicts_with = "grid")]
        exact: bool,
        /// Solve entropically, optionally with N nodes per axis
        #[arg(long, value_name = "N", num_args = 0..=1)]
        grid: Option<Option<usize>>,
        /// Output stem
        #[arg(long, default_value = "barycenter")]
        out: PathBuf,
        /// Also write a PGM raster of a grid barycenter
        #[arg(long)]
        pgm: bool,
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        weights: WeightFlags,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Exact barycenter of single-atom inputs with regime and certificate
    Dirac {
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "barycenter")]
        out: PathBuf,
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        weights: WeightFlags,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Multi-marginal cost, its convex hull and dual membership for a JSON configuration
    Cmm {
        config: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Barycenters over a range of length scales and their component counts
    Tree {
        inputs: Vec<PathBuf>,
        /// tmin:tmax:num[:log|lin]
        #[arg(long)]
        scales: Option<String>,
        /// Cells or atoms below this fraction of the maximum are ignored
        #[arg(long)]
        threshold: Option<f64>,
        /// Components closer than this are merged
        #[arg(long = "merge-radius")]
        merge_radius: Option<f64>,
        /// Nodes per axis for the entropic route
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long = "out-dir", default_value = "tree_out")]
        out_dir: PathBuf,
        /// Treat every atom of a single point-cloud input as its own marginal
        #[arg(long = "split-atoms")]
        split_atoms: bool,
        #[arg(long)]
        pgm: bool,
        #[command(flatten)]
        weights: WeightFlags,
        #[command(flatten)]
        solver: SolverFlags,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct WeightFlags {
    /// Barycentric weights, normalized to sum to one (default uniform)
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SolverFlags {
    /// JSON run configuration; flags override its fields
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long = "eps-final")]
    pub eps_final: Option<f64>,
    #[arg(long = "eps-decay")]
    pub eps_decay: Option<f64>,
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    /// Marginal tolerance of the scaling iterations
    #[arg(long)]
    pub tol: Option<f64>,
    /// Stopping tolerance of the barycenter update
    #[arg(long = "bary-tol")]
    pub bary_tol: Option<f64>,
    #[arg(long = "outer-max-iter")]
    pub outer_max_iter: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub lower: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub upper: Option<Vec<f64>>,
}

impl SolverFlags {
    fn resolve(&self, extra: RunConfig) -> Result<RunConfig> {
        let flags = RunConfig {
            epsilon: self.epsilon,
            eps_final: self.eps_final,
            eps_decay: self.eps_decay,
            max_iter: self.max_iter,
            tol: self.tol,
            bary_tol: self.bary_tol,
            outer_max_iter: self.outer_max_iter,
            lower: self.lower.clone(),
            upper: self.upper.clone(),
            ..extra
        };
        let cfg = match &self.config {
            Some(p) => RunConfig::load(p)?.overridden_by(&flags),
            None => flags,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn nonempty(v: Vec<PathBuf>) -> Option<Vec<PathBuf>> {
    (!v.is_empty()).then_some(v)
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Dist { a, b, grid, json, solver } => {
            let cfg = solver.resolve(RunConfig { grid, ..Default::default() })?;
            commands::dist(out, &a, &b, &cfg, json)
        }
        Command::Bary { inputs, exact, grid, out: dest, pgm, json, weights, solver } => {
            let cfg = solver.resolve(RunConfig { grid: grid.flatten(), weights: weights.weights, inputs: nonempty(inputs), ..Default::default() })?;
            let route = match (exact, grid.is_some()) {
                (true, _) => Route::Exact,
                (false, true) => Route::Grid,
                _ => Route::Auto,
            };
            let inputs = cfg.inputs.clone().unwrap_or_default();
            commands::bary(out, &BaryArgs { inputs: &inputs, route, out: &dest, pgm, json }, &cfg)
        }
        Command::Dirac { inputs, out: dest, json, weights, solver } => {
            let cfg = solver.resolve(RunConfig { weights: weights.weights, inputs: nonempty(inputs), ..Default::default() })?;
            let inputs = cfg.inputs.clone().unwrap_or_default();
            commands::dirac(out, &inputs, &dest, &cfg, json)
        }
        Command::Cmm { config, json } => commands::cmm(out, &config, json),
        Command::Tree { inputs, scales, threshold, merge_radius, grid, out_dir, split_atoms, pgm, weights, solver } => {
            let cfg = solver.resolve(RunConfig {
                inputs: nonempty(inputs),
                scales,
                threshold,
                merge_radius,
                grid,
                weights: weights.weights,
                ..Default::default()
            })?;
            commands::tree(out, &TreeArgs { out_dir: &out_dir, split_atoms, pgm }, &cfg)
        }
    }
}

/// Exit status for an error: 3 when a solver invariant broke, 2 otherwise.
pub fn exit_code(e: &anyhow::Error) -> i32 {
    for cause in e.chain() {
        if let Some(hkb_core::Error::Invariant(_)) = cause.downcast_ref::<hkb_core::Error>() {
            return EXIT_INVARIANT;
        }
        if cause.downcast_ref::<Usage>().is_some() {
            return EXIT_USAGE;
        }
    }
    EXIT_USAGE
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render().ansi());
            return e.exit_code();
        }
    };
    match execute(cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            exit_code(&e)
        }
    }
}
