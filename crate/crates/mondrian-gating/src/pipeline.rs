//! End-to-end runs: wiring the sampler, inference, classification, and
//! baselines together, plus every file the command line reads or
//! writes. All outputs are deterministic functions of (inputs, seed,
//! configuration): text files carry no timestamps, and float columns
//! use the shortest round-trip form.

use std::path::{Path, PathBuf};

use crate::baselines::{gmm_classify, gmm_em_fit, mp_prior_classify_detailed};
use crate::classify::{classify_sample, vote_with_fractions, LabelVector, UNKNOWN_LABEL};
use crate::emissions::{domain_box, CellMatrix};
use crate::error::{Error, Result};
use crate::export::{posterior_from_json, posterior_to_json, tree_to_dot, tree_to_json};
use crate::geom::MondrianTree;
use crate::inference::{init_chains, run_mcmc, McmcConfig, McmcRun, TraceRow};
use crate::plot::render_posterior_cuts;
use crate::sampler::RandomSource;
use crate::synth::{generate_synthetic, SyntheticData, SyntheticSpec};
use crate::table::{Hyperparameters, PriorTable};

/// Stream offset for synthetic-data generation under a master seed.
pub(crate) const SYNTH_STREAM: u64 = 0;

/// Stream offsets for per-sample classification draws; adding the
/// chain index keeps them clear of the chain streams.
pub(crate) const CLASSIFY_STREAM_BASE: u64 = 1 << 32;

/// Fit the model: pad the data range into a domain box, start one
/// chain per prior draw, and run the sampler to completion.
pub fn fit_mp_gmm(
    data: &CellMatrix,
    table: &PriorTable,
    hyper: &Hyperparameters,
    mcmc: &McmcConfig,
) -> Result<McmcRun> {
    if data.markers() != table.markers() {
        return Err(Error::MarkerMismatch(format!(
            "cells carry markers {:?}, table defines {:?}; align the data first",
            data.markers(),
            table.markers()
        )));
    }
    let domain = domain_box(data)?;
    let chains = init_chains(mcmc, &domain, table, hyper, data)?;
    run_mcmc(chains, data, mcmc)
}

/// Voted labels over posterior samples given as (chain, tree,
/// log posterior) triples. Each sample classifies with its own
/// substream of `seed`, so adding or dropping samples never disturbs
/// the draws of the others.
pub fn classify_posterior(
    samples: &[(usize, &MondrianTree, f64)],
    data: &CellMatrix,
    seed: u64,
) -> Result<(LabelVector, Vec<f64>, Vec<LabelVector>)> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument(
            "classification needs at least one posterior sample".into(),
        ));
    }
    let mut per_sample = Vec::with_capacity(samples.len());
    let mut weights = Vec::with_capacity(samples.len());
    for &(chain, tree, log_posterior) in samples {
        let mut rng = RandomSource::substream(seed, CLASSIFY_STREAM_BASE + chain as u64);
        per_sample.push(classify_sample(tree, data, &mut rng)?);
        weights.push(log_posterior);
    }
    let (voted, fractions) = vote_with_fractions(&per_sample, &weights)?;
    Ok((voted, fractions, per_sample))
}

// ---------------------------------------------------------------------------
// Text formats.

fn label_name(labels: &LabelVector, i: usize) -> &str {
    labels.name(i).unwrap_or(UNKNOWN_LABEL)
}

/// Label CSV: `cell,label,vote_fraction`, one row per cell, optionally
/// followed by one label column per posterior sample.
pub fn labels_to_csv(
    voted: &LabelVector,
    fractions: &[f64],
    per_sample: Option<(&[usize], &[LabelVector])>,
) -> String {
    let mut out = String::from("cell,label,vote_fraction");
    if let Some((chains, _)) = per_sample {
        for chain in chains {
            out.push_str(&format!(",sample_{chain}"));
        }
    }
    out.push('\n');
    for i in 0..voted.len() {
        out.push_str(&format!("{i},{},{}", label_name(voted, i), fractions[i]));
        if let Some((_, samples)) = per_sample {
            for s in samples {
                out.push(',');
                out.push_str(label_name(s, i));
            }
        }
        out.push('\n');
    }
    out
}

/// Parse a label CSV back into labels and vote fractions. Per-sample
/// columns are allowed and skipped.
pub fn labels_from_csv(text: &str) -> Result<(LabelVector, Vec<f64>)> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("label CSV is empty".into()))?;
    if !(header == "cell,label,vote_fraction"
        || header.starts_with("cell,label,vote_fraction,"))
    {
        return Err(Error::Parse(format!(
            "label CSV header {header:?} should begin with cell,label,vote_fraction"
        )));
    }
    let mut names: Vec<Option<String>> = Vec::new();
    let mut fractions = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let cell = fields
            .next()
            .and_then(|f| f.parse::<usize>().ok())
            .ok_or_else(|| Error::Parse(format!("row {}: bad cell index", i + 2)))?;
        if cell != i {
            return Err(Error::Parse(format!(
                "row {}: cell index {cell} out of order",
                i + 2
            )));
        }
        let label = fields
            .next()
            .ok_or_else(|| Error::Parse(format!("row {}: missing label", i + 2)))?;
        let fraction = fields
            .next()
            .and_then(|f| f.parse::<f64>().ok())
            .filter(|f| (0.0..=1.0).contains(f))
            .ok_or_else(|| Error::Parse(format!("row {}: bad vote fraction", i + 2)))?;
        names.push((label != UNKNOWN_LABEL).then(|| label.to_string()));
        fractions.push(fraction);
    }
    Ok((LabelVector::from_names(names), fractions))
}

/// Truth CSV: `cell,label`, one row per cell.
pub fn truth_to_csv(truth: &LabelVector) -> String {
    let mut out = String::from("cell,label\n");
    for i in 0..truth.len() {
        out.push_str(&format!("{i},{}\n", label_name(truth, i)));
    }
    out
}

/// Parse a truth CSV written by [`truth_to_csv`].
pub fn truth_from_csv(text: &str) -> Result<LabelVector> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("truth CSV is empty".into()))?;
    if header != "cell,label" {
        return Err(Error::Parse(format!(
            "truth CSV header {header:?} should be cell,label"
        )));
    }
    let mut names: Vec<Option<String>> = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let (cell, label) = line
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("row {}: expected cell,label", i + 2)))?;
        let cell: usize = cell
            .parse()
            .map_err(|_| Error::Parse(format!("row {}: bad cell index", i + 2)))?;
        if cell != i {
            return Err(Error::Parse(format!(
                "row {}: cell index {cell} out of order",
                i + 2
            )));
        }
        names.push((label != UNKNOWN_LABEL).then(|| label.to_string()));
    }
    if names.is_empty() {
        return Err(Error::Parse("truth CSV has no rows".into()));
    }
    Ok(LabelVector::from_names(names))
}

/// Diagnostics CSV: one row per recorded trace point.
pub fn diagnostics_to_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("chain,iteration,log_prior,log_likelihood,acceptance_rate\n");
    for row in trace {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.chain, row.iteration, row.log_prior, row.log_likelihood, row.acceptance_rate
        ));
    }
    out
}

/// One row of a method-accuracy table.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodAccuracy {
    pub method: String,
    pub accuracy: f64,
}

/// Accuracy table as CSV: `method,accuracy`.
pub fn accuracy_to_csv(rows: &[MethodAccuracy]) -> String {
    let mut out = String::from("method,accuracy\n");
    for row in rows {
        out.push_str(&format!("{},{}\n", row.method, row.accuracy));
    }
    out
}

/// Accuracy table as aligned text, four decimals.
pub fn accuracy_to_text(rows: &[MethodAccuracy]) -> String {
    let width = rows
        .iter()
        .map(|r| r.method.len())
        .chain(std::iter::once("method".len()))
        .max()
        .unwrap_or(6);
    let mut out = format!("{:<width$}  accuracy\n", "method");
    for row in rows {
        out.push_str(&format!("{:<width$}  {:.4}\n", row.method, row.accuracy));
    }
    out
}

// ---------------------------------------------------------------------------
// File plumbing shared by the runners.

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn write_text(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|e| Error::io(path.display().to_string(), e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))
}

fn read_cells_aligned(path: &Path, markers: &[String]) -> Result<CellMatrix> {
    CellMatrix::from_csv_path(path)?.align_to(markers)
}

// ---------------------------------------------------------------------------
// Runners, one per subcommand.

#[derive(Debug, Clone)]
pub struct SimulateParams {
    pub table: PathBuf,
    pub out_dir: PathBuf,
    pub n_cells: usize,
    pub separation: f64,
    pub seed: u64,
    pub hyper: Hyperparameters,
}

#[derive(Debug, Clone)]
pub struct SimulateReport {
    pub n_cells: usize,
    pub n_leaves: usize,
    pub files: Vec<PathBuf>,
}

/// Generate a synthetic bench on the unit box and write `cells.csv`,
/// `truth.csv`, and `generating_tree.json`.
pub fn run_simulate(params: &SimulateParams) -> Result<SimulateReport> {
    let table = PriorTable::from_csv_path(&params.table)?;
    let spec = SyntheticSpec::unit(table.n_markers(), params.n_cells, params.separation)?;
    let mut rng = RandomSource::substream(params.seed, SYNTH_STREAM);
    let SyntheticData { cells, truth, tree } =
        generate_synthetic(&spec, &table, &params.hyper, &mut rng)?;

    ensure_dir(&params.out_dir)?;
    let files = vec![
        params.out_dir.join("cells.csv"),
        params.out_dir.join("truth.csv"),
        params.out_dir.join("generating_tree.json"),
    ];
    write_text(&files[0], &cells.to_csv_string())?;
    write_text(&files[1], &truth_to_csv(&truth))?;
    write_text(&files[2], &tree_to_json(&tree)?)?;
    Ok(SimulateReport {
        n_cells: cells.n_cells(),
        n_leaves: tree.leaf_count(),
        files,
    })
}

#[derive(Debug, Clone)]
pub struct FitParams {
    pub cells: PathBuf,
    pub table: PathBuf,
    pub out_dir: PathBuf,
    pub hyper: Hyperparameters,
    pub mcmc: McmcConfig,
    /// Also write one label column per posterior sample.
    pub per_sample_labels: bool,
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub map_log_posterior: f64,
    pub map_leaf_count: usize,
    pub mean_acceptance: f64,
    pub chains_improved: usize,
    pub chains: usize,
    pub files: Vec<PathBuf>,
}

/// The full pipeline: ingest, infer, classify, and export the
/// posterior, the MAP tree (JSON and DOT), labels, and diagnostics.
pub fn run_fit(params: &FitParams) -> Result<FitReport> {
    let table = PriorTable::from_csv_path(&params.table)?;
    let data = read_cells_aligned(&params.cells, table.markers())?;
    let run = fit_mp_gmm(&data, &table, &params.hyper, &params.mcmc)?;

    let triples: Vec<(usize, &MondrianTree, f64)> = run
        .samples
        .iter()
        .map(|s| (s.chain, &s.tree, s.log_posterior()))
        .collect();
    let (voted, fractions, per_sample) =
        classify_posterior(&triples, &data, params.mcmc.seed)?;

    let map = &run.samples[run.map_index()];
    ensure_dir(&params.out_dir)?;
    let files = vec![
        params.out_dir.join("posterior.json"),
        params.out_dir.join("map_tree.json"),
        params.out_dir.join("map_tree.dot"),
        params.out_dir.join("labels.csv"),
        params.out_dir.join("diagnostics.csv"),
    ];
    write_text(&files[0], &posterior_to_json(table.markers(), &run.samples)?)?;
    write_text(&files[1], &tree_to_json(&map.tree)?)?;
    write_text(&files[2], &tree_to_dot(&map.tree))?;
    let chains: Vec<usize> = run.samples.iter().map(|s| s.chain).collect();
    let sample_columns = params
        .per_sample_labels
        .then(|| (chains.as_slice(), per_sample.as_slice()));
    write_text(&files[3], &labels_to_csv(&voted, &fractions, sample_columns))?;
    write_text(&files[4], &diagnostics_to_csv(&run.trace))?;

    Ok(FitReport {
        map_log_posterior: map.log_posterior(),
        map_leaf_count: map.tree.leaf_count(),
        mean_acceptance: run.samples.iter().map(|s| s.acceptance_rate).sum::<f64>()
            / run.samples.len() as f64,
        chains_improved: run
            .samples
            .iter()
            .filter(|s| s.log_likelihood > s.initial_log_likelihood)
            .count(),
        chains: run.samples.len(),
        files,
    })
}

#[derive(Debug, Clone)]
pub struct ClassifyParams {
    pub cells: PathBuf,
    pub posterior: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub per_sample_labels: bool,
}

#[derive(Debug, Clone)]
pub struct ClassifyReport {
    pub n_cells: usize,
    pub n_samples: usize,
    pub n_unknown: usize,
    pub files: Vec<PathBuf>,
}

/// Reuse a saved posterior to label a cell matrix.
pub fn run_classify(params: &ClassifyParams) -> Result<ClassifyReport> {
    let posterior = posterior_from_json(&read_to_string(&params.posterior)?)?;
    let data = read_cells_aligned(&params.cells, &posterior.markers)?;
    let triples: Vec<(usize, &MondrianTree, f64)> = posterior
        .samples
        .iter()
        .map(|s| (s.chain, &s.tree, s.log_posterior()))
        .collect();
    let (voted, fractions, per_sample) = classify_posterior(&triples, &data, params.seed)?;

    ensure_dir(&params.out_dir)?;
    let files = vec![params.out_dir.join("labels.csv")];
    let chains: Vec<usize> = posterior.samples.iter().map(|s| s.chain).collect();
    let sample_columns = params
        .per_sample_labels
        .then(|| (chains.as_slice(), per_sample.as_slice()));
    write_text(&files[0], &labels_to_csv(&voted, &fractions, sample_columns))?;

    Ok(ClassifyReport {
        n_cells: voted.len(),
        n_samples: posterior.samples.len(),
        n_unknown: voted.labels().iter().filter(|l| l.is_none()).count(),
        files,
    })
}

#[derive(Debug, Clone)]
pub struct PlotParams {
    pub cells: PathBuf,
    pub posterior: PathBuf,
    pub out: PathBuf,
    pub x_marker: String,
    pub y_marker: String,
}

#[derive(Debug, Clone)]
pub struct PlotReport {
    pub n_cuts_drawn: usize,
    pub files: Vec<PathBuf>,
}

/// Render the posterior's cuts over the cells for one marker pair.
pub fn run_plot(params: &PlotParams) -> Result<PlotReport> {
    let posterior = posterior_from_json(&read_to_string(&params.posterior)?)?;
    let data = read_cells_aligned(&params.cells, &posterior.markers)?;
    let index_of = |name: &str| {
        posterior
            .markers
            .iter()
            .position(|m| m == name)
            .ok_or_else(|| {
                Error::MarkerMismatch(format!(
                    "marker {name:?} not in the posterior's markers {:?}",
                    posterior.markers
                ))
            })
    };
    let dim_x = index_of(&params.x_marker)?;
    let dim_y = index_of(&params.y_marker)?;
    let trees: Vec<&MondrianTree> = posterior.samples.iter().map(|s| &s.tree).collect();
    let svg = render_posterior_cuts(&trees, &data, dim_x, dim_y)?;

    if let Some(parent) = params.out.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    write_text(&params.out, &svg)?;
    Ok(PlotReport {
        n_cuts_drawn: svg.matches("<line").count(),
        files: vec![params.out.clone()],
    })
}

#[derive(Debug, Clone)]
pub struct BaselineParams {
    pub cells: PathBuf,
    pub table: PathBuf,
    pub truth: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub hyper: Hyperparameters,
    /// Mixture size; defaults to the table's row count.
    pub gmm_components: Option<usize>,
    pub prior_samples: usize,
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub table: Vec<MethodAccuracy>,
    pub text: String,
    pub files: Vec<PathBuf>,
}

/// Score the two reference methods against a truth file.
pub fn run_baseline(params: &BaselineParams) -> Result<CompareReport> {
    let table = PriorTable::from_csv_path(&params.table)?;
    let data = read_cells_aligned(&params.cells, table.markers())?;
    let truth = truth_from_csv(&read_to_string(&params.truth)?)?;

    let k = params.gmm_components.unwrap_or(table.n_types());
    let components = gmm_em_fit(&data, k, params.seed)?;
    let gmm_labels = gmm_classify(&components, &data, &table)?;
    let prior = mp_prior_classify_detailed(
        &data,
        &table,
        &params.hyper,
        params.prior_samples,
        params.seed,
    )?;

    let rows = vec![
        MethodAccuracy {
            method: "GMM".into(),
            accuracy: crate::classify::accuracy(&gmm_labels, &truth)?,
        },
        MethodAccuracy {
            method: "MP-Prior".into(),
            accuracy: crate::classify::accuracy(&prior.voted, &truth)?,
        },
    ];

    ensure_dir(&params.out_dir)?;
    let files = vec![
        params.out_dir.join("labels_gmm.csv"),
        params.out_dir.join("labels_mp_prior.csv"),
        params.out_dir.join("accuracy.csv"),
        params.out_dir.join("accuracy.txt"),
    ];
    let ones = vec![1.0; gmm_labels.len()];
    write_text(&files[0], &labels_to_csv(&gmm_labels, &ones, None))?;
    write_text(&files[1], &labels_to_csv(&prior.voted, &prior.fractions, None))?;
    write_text(&files[2], &accuracy_to_csv(&rows))?;
    let text = accuracy_to_text(&rows);
    write_text(&files[3], &text)?;

    Ok(CompareReport {
        table: rows,
        text,
        files,
    })
}

#[derive(Debug, Clone)]
pub struct CompareParams {
    pub cells: PathBuf,
    pub table: PathBuf,
    pub truth: PathBuf,
    pub out_dir: PathBuf,
    pub hyper: Hyperparameters,
    pub mcmc: McmcConfig,
    pub gmm_components: Option<usize>,
    pub prior_samples: usize,
}

/// Run all three methods and emit the accuracy table.
pub fn run_compare(params: &CompareParams) -> Result<CompareReport> {
    let table = PriorTable::from_csv_path(&params.table)?;
    let data = read_cells_aligned(&params.cells, table.markers())?;
    let truth = truth_from_csv(&read_to_string(&params.truth)?)?;

    let run = fit_mp_gmm(&data, &table, &params.hyper, &params.mcmc)?;
    let triples: Vec<(usize, &MondrianTree, f64)> = run
        .samples
        .iter()
        .map(|s| (s.chain, &s.tree, s.log_posterior()))
        .collect();
    let (mp_gmm_labels, mp_gmm_fractions, _) =
        classify_posterior(&triples, &data, params.mcmc.seed)?;

    let k = params.gmm_components.unwrap_or(table.n_types());
    let components = gmm_em_fit(&data, k, params.mcmc.seed)?;
    let gmm_labels = gmm_classify(&components, &data, &table)?;
    let prior = mp_prior_classify_detailed(
        &data,
        &table,
        &params.hyper,
        params.prior_samples,
        params.mcmc.seed,
    )?;

    let rows = vec![
        MethodAccuracy {
            method: "MP-GMM".into(),
            accuracy: crate::classify::accuracy(&mp_gmm_labels, &truth)?,
        },
        MethodAccuracy {
            method: "GMM".into(),
            accuracy: crate::classify::accuracy(&gmm_labels, &truth)?,
        },
        MethodAccuracy {
            method: "MP-Prior".into(),
            accuracy: crate::classify::accuracy(&prior.voted, &truth)?,
        },
    ];

    ensure_dir(&params.out_dir)?;
    let files = vec![
        params.out_dir.join("labels_mp_gmm.csv"),
        params.out_dir.join("labels_gmm.csv"),
        params.out_dir.join("labels_mp_prior.csv"),
        params.out_dir.join("accuracy.csv"),
        params.out_dir.join("accuracy.txt"),
    ];
    write_text(&files[0], &labels_to_csv(&mp_gmm_labels, &mp_gmm_fractions, None))?;
    let ones = vec![1.0; gmm_labels.len()];
    write_text(&files[1], &labels_to_csv(&gmm_labels, &ones, None))?;
    write_text(&files[2], &labels_to_csv(&prior.voted, &prior.fractions, None))?;
    write_text(&files[3], &accuracy_to_csv(&rows))?;
    let text = accuracy_to_text(&rows);
    write_text(&files[4], &text)?;

    Ok(CompareReport {
        table: rows,
        text,
        files,
    })
}
