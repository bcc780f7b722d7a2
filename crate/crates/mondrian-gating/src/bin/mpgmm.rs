//! Command-line front end: simulate a bench, fit the model, reuse a
//! saved posterior, draw cut plots, and score the reference methods.
//!
//! Every option can also come from a flat `key=value` configuration
//! file (`--config`); explicit flags win over file values. All outputs
//! are deterministic in (inputs, seed, options) and carry no
//! timestamps, so identical invocations produce bytewise-identical
//! files.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mondrian_gating::config::ConfigFile;
use mondrian_gating::inference::McmcConfig;
use mondrian_gating::pipeline::{
    run_baseline, run_classify, run_compare, run_fit, run_plot, run_simulate, BaselineParams,
    ClassifyParams, CompareParams, FitParams, PlotParams, SimulateParams,
};
use mondrian_gating::table::Hyperparameters;

/// Every key a configuration file may set. Keys are shared across
/// subcommands so one file can drive a whole pipeline; keys a
/// subcommand does not use are ignored by it.
const KNOWN_KEYS: &[&str] = &[
    "seed",
    "threads",
    "cells",
    "table",
    "truth",
    "posterior",
    "out_dir",
    "out",
    "n_cells",
    "separation",
    "chains",
    "iterations",
    "step_size",
    "prior_only",
    "per_sample_labels",
    "gamma0",
    "gamma1",
    "phi0",
    "phi1",
    "budget",
    "gmm_components",
    "prior_samples",
    "x",
    "y",
];

#[derive(Parser)]
#[command(
    name = "mpgmm",
    version,
    about = "Mondrian-process mixtures for automated cytometry gating",
    propagate_version = true
)]
struct Cli {
    /// Flat key=value configuration file; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed for every randomized step.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for parallel chains (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic bench with known ground truth.
    Simulate {
        /// Prior-table CSV.
        #[arg(long, value_name = "PATH")]
        table: Option<PathBuf>,
        /// Directory for cells.csv, truth.csv, generating_tree.json.
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
        /// Number of cells to draw.
        #[arg(long)]
        n_cells: Option<usize>,
        /// Cluster-separation multiplier; larger means tighter blobs.
        #[arg(long)]
        separation: Option<f64>,
        #[command(flatten)]
        hyper: HyperArgs,
    },
    /// Fit the model: ingest, infer, classify, and export everything.
    Fit {
        /// Cell-matrix CSV.
        #[arg(long, value_name = "PATH")]
        cells: Option<PathBuf>,
        /// Prior-table CSV.
        #[arg(long, value_name = "PATH")]
        table: Option<PathBuf>,
        /// Directory for posterior, MAP tree, labels, diagnostics.
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        mcmc: McmcArgs,
        #[command(flatten)]
        hyper: HyperArgs,
        /// Add one label column per posterior sample to labels.csv.
        #[arg(long)]
        per_sample_labels: bool,
    },
    /// Label a cell matrix with a previously saved posterior.
    Classify {
        /// Cell-matrix CSV.
        #[arg(long, value_name = "PATH")]
        cells: Option<PathBuf>,
        /// posterior.json from a previous fit.
        #[arg(long, value_name = "PATH")]
        posterior: Option<PathBuf>,
        /// Directory for labels.csv.
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
        /// Add one label column per posterior sample to labels.csv.
        #[arg(long)]
        per_sample_labels: bool,
    },
    /// Render posterior cuts over the cells for one marker pair.
    Plot {
        /// Cell-matrix CSV.
        #[arg(long, value_name = "PATH")]
        cells: Option<PathBuf>,
        /// posterior.json from a previous fit.
        #[arg(long, value_name = "PATH")]
        posterior: Option<PathBuf>,
        /// Output SVG path.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Marker on the horizontal axis.
        #[arg(long, value_name = "MARKER")]
        x: Option<String>,
        /// Marker on the vertical axis.
        #[arg(long, value_name = "MARKER")]
        y: Option<String>,
    },
    /// Score the GMM and prior-voting reference methods against truth.
    Baseline {
        /// Cell-matrix CSV.
        #[arg(long, value_name = "PATH")]
        cells: Option<PathBuf>,
        /// Prior-table CSV.
        #[arg(long, value_name = "PATH")]
        table: Option<PathBuf>,
        /// Truth CSV (cell,label).
        #[arg(long, value_name = "PATH")]
        truth: Option<PathBuf>,
        /// Directory for labels and the accuracy table.
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
        /// Mixture components for the GMM (default: table rows).
        #[arg(long)]
        gmm_components: Option<usize>,
        /// Prior trees to vote over.
        #[arg(long)]
        prior_samples: Option<usize>,
        #[command(flatten)]
        hyper: HyperArgs,
    },
    /// Run all three methods and write a joint accuracy table.
    Compare {
        /// Cell-matrix CSV.
        #[arg(long, value_name = "PATH")]
        cells: Option<PathBuf>,
        /// Prior-table CSV.
        #[arg(long, value_name = "PATH")]
        table: Option<PathBuf>,
        /// Truth CSV (cell,label).
        #[arg(long, value_name = "PATH")]
        truth: Option<PathBuf>,
        /// Directory for per-method labels and the accuracy table.
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        mcmc: McmcArgs,
        #[command(flatten)]
        hyper: HyperArgs,
        /// Mixture components for the GMM (default: table rows).
        #[arg(long)]
        gmm_components: Option<usize>,
        /// Prior trees to vote over.
        #[arg(long)]
        prior_samples: Option<usize>,
    },
}

#[derive(Args)]
struct HyperArgs {
    /// Cut-rate weight of markers with disagreeing labels.
    #[arg(long)]
    gamma0: Option<f64>,
    /// Cut-rate weight of one-sided markers.
    #[arg(long)]
    gamma1: Option<f64>,
    /// Larger Beta shape for cut locations.
    #[arg(long)]
    phi0: Option<f64>,
    /// Smaller Beta shape for cut locations.
    #[arg(long)]
    phi1: Option<f64>,
    /// Budget of the tree-generating process.
    #[arg(long)]
    budget: Option<f64>,
}

impl HyperArgs {
    fn resolve(&self, cfg: Option<&ConfigFile>) -> Result<Hyperparameters> {
        let d = Hyperparameters::default();
        let h = Hyperparameters::new(
            resolve_f64(self.gamma0, cfg, "gamma0", d.gamma0)?,
            resolve_f64(self.gamma1, cfg, "gamma1", d.gamma1)?,
            resolve_f64(self.phi0, cfg, "phi0", d.phi0)?,
            resolve_f64(self.phi1, cfg, "phi1", d.phi1)?,
            resolve_f64(self.budget, cfg, "budget", d.budget)?,
        )?;
        Ok(h)
    }
}

#[derive(Args)]
struct McmcArgs {
    /// Independent chains (one posterior sample each).
    #[arg(long)]
    chains: Option<usize>,
    /// Metropolis–Hastings iterations per chain.
    #[arg(long)]
    iterations: Option<usize>,
    /// Standard deviation of the cut-position proposal.
    #[arg(long)]
    step_size: Option<f64>,
    /// Ignore the likelihood; sample cut positions from the prior.
    #[arg(long)]
    prior_only: bool,
}

impl McmcArgs {
    fn resolve(&self, cfg: Option<&ConfigFile>, seed: u64) -> Result<McmcConfig> {
        let d = McmcConfig::default();
        Ok(McmcConfig {
            chains: resolve_usize(self.chains, cfg, "chains", d.chains)?,
            iterations: resolve_usize(self.iterations, cfg, "iterations", d.iterations)?,
            step_size: resolve_f64(self.step_size, cfg, "step_size", d.step_size)?,
            seed,
            prior_only: resolve_switch(self.prior_only, cfg, "prior_only")?,
        })
    }
}

fn resolve_f64(flag: Option<f64>, cfg: Option<&ConfigFile>, key: &str, default: f64) -> Result<f64> {
    match flag {
        Some(v) => Ok(v),
        None => Ok(cfg
            .map(|c| c.get_f64(key))
            .transpose()?
            .flatten()
            .unwrap_or(default)),
    }
}

fn resolve_u64(flag: Option<u64>, cfg: Option<&ConfigFile>, key: &str, default: u64) -> Result<u64> {
    match flag {
        Some(v) => Ok(v),
        None => Ok(cfg
            .map(|c| c.get_u64(key))
            .transpose()?
            .flatten()
            .unwrap_or(default)),
    }
}

fn resolve_usize(
    flag: Option<usize>,
    cfg: Option<&ConfigFile>,
    key: &str,
    default: usize,
) -> Result<usize> {
    match flag {
        Some(v) => Ok(v),
        None => Ok(cfg
            .map(|c| c.get_usize(key))
            .transpose()?
            .flatten()
            .unwrap_or(default)),
    }
}

/// Boolean switches can only be turned on by a flag, so "flags win"
/// reduces to: on if the flag is present or the file says true.
fn resolve_switch(flag: bool, cfg: Option<&ConfigFile>, key: &str) -> Result<bool> {
    if flag {
        return Ok(true);
    }
    Ok(cfg
        .map(|c| c.get_bool(key))
        .transpose()?
        .flatten()
        .unwrap_or(false))
}

fn resolve_opt_usize(
    flag: Option<usize>,
    cfg: Option<&ConfigFile>,
    key: &str,
) -> Result<Option<usize>> {
    match flag {
        Some(v) => Ok(Some(v)),
        None => Ok(cfg.map(|c| c.get_usize(key)).transpose()?.flatten()),
    }
}

fn required_path(flag: Option<PathBuf>, cfg: Option<&ConfigFile>, key: &str) -> Result<PathBuf> {
    flag.or_else(|| cfg.and_then(|c| c.get_str(key)).map(PathBuf::from))
        .with_context(|| format!("missing required --{} (or {key}= in the config file)", key.replace('_', "-")))
}

fn required_str(flag: Option<String>, cfg: Option<&ConfigFile>, key: &str) -> Result<String> {
    flag.or_else(|| cfg.and_then(|c| c.get_str(key)).map(str::to_owned))
        .with_context(|| format!("missing required --{key} (or {key}= in the config file)"))
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("mpgmm: {e:#}");
            std::process::exit(1);
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => Some(ConfigFile::from_path(path)?),
        None => None,
    };
    if let Some(c) = &cfg {
        let unknown = c.unknown_keys(KNOWN_KEYS);
        if !unknown.is_empty() {
            bail!(
                "unknown configuration keys: {}",
                unknown.join(", ")
            );
        }
    }
    let cfg = cfg.as_ref();

    let seed = resolve_u64(cli.seed, cfg, "seed", 0)?;
    let threads = resolve_opt_usize(cli.threads, cfg, "threads")?;
    if let Some(n) = threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("thread pool already initialized")?;
    }

    match cli.command {
        Command::Simulate {
            table,
            out_dir,
            n_cells,
            separation,
            hyper,
        } => {
            let params = SimulateParams {
                table: required_path(table, cfg, "table")?,
                out_dir: required_path(out_dir, cfg, "out_dir")?,
                n_cells: resolve_usize(n_cells, cfg, "n_cells", 3000)?,
                separation: resolve_f64(separation, cfg, "separation", 2.0)?,
                seed,
                hyper: hyper.resolve(cfg)?,
            };
            let report = run_simulate(&params)?;
            println!(
                "simulated {} cells over {} leaves",
                report.n_cells, report.n_leaves
            );
            for f in &report.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Fit {
            cells,
            table,
            out_dir,
            mcmc,
            hyper,
            per_sample_labels,
        } => {
            let params = FitParams {
                cells: required_path(cells, cfg, "cells")?,
                table: required_path(table, cfg, "table")?,
                out_dir: required_path(out_dir, cfg, "out_dir")?,
                hyper: hyper.resolve(cfg)?,
                mcmc: mcmc.resolve(cfg, seed)?,
                per_sample_labels: resolve_switch(per_sample_labels, cfg, "per_sample_labels")?,
            };
            let report = run_fit(&params)?;
            println!(
                "fitted {} chains; {} improved on their initial likelihood",
                report.chains, report.chains_improved
            );
            println!(
                "MAP tree: {} leaves, log posterior {:.4}; mean acceptance {:.3}",
                report.map_leaf_count, report.map_log_posterior, report.mean_acceptance
            );
            for f in &report.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Classify {
            cells,
            posterior,
            out_dir,
            per_sample_labels,
        } => {
            let params = ClassifyParams {
                cells: required_path(cells, cfg, "cells")?,
                posterior: required_path(posterior, cfg, "posterior")?,
                out_dir: required_path(out_dir, cfg, "out_dir")?,
                seed,
                per_sample_labels: resolve_switch(per_sample_labels, cfg, "per_sample_labels")?,
            };
            let report = run_classify(&params)?;
            println!(
                "labeled {} cells from {} posterior samples ({} unknown)",
                report.n_cells, report.n_samples, report.n_unknown
            );
            for f in &report.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Plot {
            cells,
            posterior,
            out,
            x,
            y,
        } => {
            let params = PlotParams {
                cells: required_path(cells, cfg, "cells")?,
                posterior: required_path(posterior, cfg, "posterior")?,
                out: required_path(out, cfg, "out")?,
                x_marker: required_str(x, cfg, "x")?,
                y_marker: required_str(y, cfg, "y")?,
            };
            let report = run_plot(&params)?;
            println!("drew {} cuts", report.n_cuts_drawn);
            for f in &report.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Baseline {
            cells,
            table,
            truth,
            out_dir,
            gmm_components,
            prior_samples,
            hyper,
        } => {
            let params = BaselineParams {
                cells: required_path(cells, cfg, "cells")?,
                table: required_path(table, cfg, "table")?,
                truth: required_path(truth, cfg, "truth")?,
                out_dir: required_path(out_dir, cfg, "out_dir")?,
                seed,
                hyper: hyper.resolve(cfg)?,
                gmm_components: resolve_opt_usize(gmm_components, cfg, "gmm_components")?,
                prior_samples: resolve_usize(prior_samples, cfg, "prior_samples", 100)?,
            };
            let report = run_baseline(&params)?;
            print!("{}", report.text);
            for f in &report.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Compare {
            cells,
            table,
            truth,
            out_dir,
            mcmc,
            hyper,
            gmm_components,
            prior_samples,
        } => {
            let params = CompareParams {
                cells: required_path(cells, cfg, "cells")?,
                table: required_path(table, cfg, "table")?,
                truth: required_path(truth, cfg, "truth")?,
                out_dir: required_path(out_dir, cfg, "out_dir")?,
                hyper: hyper.resolve(cfg)?,
                mcmc: mcmc.resolve(cfg, seed)?,
                gmm_components: resolve_opt_usize(gmm_components, cfg, "gmm_components")?,
                prior_samples: resolve_usize(prior_samples, cfg, "prior_samples", 100)?,
            };
            let report = run_compare(&params)?;
            print!("{}", report.text);
            for f in &report.files {
                println!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}
