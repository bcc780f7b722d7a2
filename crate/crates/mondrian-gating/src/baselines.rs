//! Reference methods to compare against: a plain Gaussian mixture fit
//! by EM, and voting over prior trees without any data-driven moves.

use rand::distributions::WeightedIndex;
use rand::prelude::*;

use crate::classify::{classify_sample, vote_with_fractions, LabelVector};
use crate::emissions::{domain_box, CellMatrix, VARIANCE_FLOOR_SCALE};
use crate::error::{Error, Result};
use crate::geom::MondrianTree;
use crate::sampler::{log_prior, sample_mondrian, RandomSource};
use crate::table::{Hyperparameters, Label, PriorTable};

/// Stream offset for baseline random sources under a shared master seed.
const BASELINE_STREAM_BASE: u64 = 2 << 32;

const LN_TWO_PI: f64 = 1.837_877_066_409_345_6;

/// Relative log-likelihood improvement below which EM stops.
const EM_RELATIVE_TOL: f64 = 1e-6;
const EM_MAX_ITERATIONS: usize = 500;

/// A fitted diagonal-covariance Gaussian mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmComponents {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    vars: Vec<Vec<f64>>,
    pub log_likelihood: f64,
    pub iterations: usize,
}

impl GmmComponents {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn vars(&self) -> &[Vec<f64>] {
        &self.vars
    }
}

/// Fit a `k`-component mixture by EM, seeded in the k-means++ style:
/// the first mean is a random cell, later means are cells drawn with
/// probability proportional to their squared distance from the chosen
/// set. Stops when the relative log-likelihood improvement drops below
/// `1e-6` or after 500 iterations.
pub fn gmm_em_fit(data: &CellMatrix, k: usize, seed: u64) -> Result<GmmComponents> {
    let n = data.n_cells();
    let dims = data.n_markers();
    if k == 0 {
        return Err(Error::InvalidArgument("component count must be positive".into()));
    }
    if n < k {
        return Err(Error::InvalidArgument(format!(
            "{n} cells cannot support {k} components"
        )));
    }

    let mut rng = RandomSource::substream(seed, BASELINE_STREAM_BASE);
    let floor: Vec<f64> = (0..dims)
        .map(|d| {
            let (lo, hi) = data.column_range(d)?;
            let len = hi - lo;
            if len > 0.0 {
                Ok(VARIANCE_FLOOR_SCALE * len * len)
            } else {
                // A constant column still needs a usable floor.
                Ok(VARIANCE_FLOOR_SCALE)
            }
        })
        .collect::<Result<_>>()?;

    // Seeding.
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(k);
    means.push(data.row(rng.gen_range(0..n)).to_vec());
    let mut dist2 = vec![0.0f64; n];
    while means.len() < k {
        for (i, slot) in dist2.iter_mut().enumerate() {
            let row = data.row(i);
            let nearest = means
                .iter()
                .map(|m| {
                    row.iter()
                        .zip(m)
                        .map(|(x, mu)| (x - mu) * (x - mu))
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min);
            *slot = nearest;
        }
        let next = match WeightedIndex::new(&dist2) {
            Ok(widx) => widx.sample(&mut rng),
            // All remaining cells coincide with a chosen mean.
            Err(_) => rng.gen_range(0..n),
        };
        means.push(data.row(next).to_vec());
    }

    // Shared initial spread: the per-column sample variance.
    let init_var: Vec<f64> = (0..dims)
        .map(|d| {
            let mean = (0..n).map(|i| data.value(i, d)).sum::<f64>() / n as f64;
            let var = (0..n)
                .map(|i| {
                    let diff = data.value(i, d) - mean;
                    diff * diff
                })
                .sum::<f64>()
                / n as f64;
            var.max(floor[d])
        })
        .collect();
    let mut vars: Vec<Vec<f64>> = vec![init_var; k];
    let mut weights = vec![1.0 / k as f64; k];

    let mut resp = vec![0.0f64; n * k];
    let mut previous = f64::NEG_INFINITY;
    let mut iterations = 0;
    let mut log_likelihood = f64::NEG_INFINITY;

    for iter in 1..=EM_MAX_ITERATIONS {
        iterations = iter;
        // E step with log-sum-exp per cell.
        let mut ll = 0.0;
        for i in 0..n {
            let row = data.row(i);
            let mut max = f64::NEG_INFINITY;
            for c in 0..k {
                let mut lp = weights[c].ln();
                for d in 0..dims {
                    let diff = row[d] - means[c][d];
                    lp += -0.5 * (LN_TWO_PI + vars[c][d].ln() + diff * diff / vars[c][d]);
                }
                resp[i * k + c] = lp;
                max = max.max(lp);
            }
            let sum: f64 = (0..k).map(|c| (resp[i * k + c] - max).exp()).sum();
            let lse = max + sum.ln();
            ll += lse;
            for c in 0..k {
                resp[i * k + c] = (resp[i * k + c] - lse).exp();
            }
        }
        assert!(
            ll >= previous - 1e-9 * previous.abs().max(1.0),
            "EM log likelihood decreased: {previous} -> {ll}"
        );
        log_likelihood = ll;
        if previous.is_finite() && ll - previous < EM_RELATIVE_TOL * previous.abs() {
            break;
        }
        previous = ll;

        // M step.
        for c in 0..k {
            let nk: f64 = (0..n).map(|i| resp[i * k + c]).sum();
            if nk < 1e-12 {
                // Deserted component: freeze its parameters.
                weights[c] = nk / n as f64;
                continue;
            }
            weights[c] = nk / n as f64;
            for d in 0..dims {
                let mean = (0..n)
                    .map(|i| resp[i * k + c] * data.value(i, d))
                    .sum::<f64>()
                    / nk;
                means[c][d] = mean;
            }
            for d in 0..dims {
                let var = (0..n)
                    .map(|i| {
                        let diff = data.value(i, d) - means[c][d];
                        resp[i * k + c] * diff * diff
                    })
                    .sum::<f64>()
                    / nk;
                vars[c][d] = var.max(floor[d]);
            }
        }
    }

    Ok(GmmComponents {
        weights,
        means,
        vars,
        log_likelihood,
        iterations,
    })
}

/// Map each mixture component to a cell type by comparing its mean to
/// the per-column data median: an entry of `+1` matches a mean above
/// the median, `-1` one below, `0` never counts. The row with the most
/// matches wins; ties go to the earliest row.
fn component_types(
    components: &GmmComponents,
    data: &CellMatrix,
    table: &PriorTable,
) -> Result<Vec<usize>> {
    let dims = data.n_markers();
    if table.n_markers() != dims {
        return Err(Error::MarkerMismatch(format!(
            "table has {} markers, data has {}",
            table.n_markers(),
            dims
        )));
    }
    let medians: Vec<f64> = (0..dims)
        .map(|d| data.column_median(d))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(components.k());
    for mean in components.means() {
        let mut best_row = 0usize;
        let mut best_score = -1i32;
        for r in 0..table.n_types() {
            let mut score = 0i32;
            for d in 0..dims {
                score += match table.entry(r, d) {
                    Label::High if mean[d] > medians[d] => 1,
                    Label::Low if mean[d] < medians[d] => 1,
                    _ => 0,
                };
            }
            if score > best_score {
                best_score = score;
                best_row = r;
            }
        }
        out.push(best_row);
    }
    Ok(out)
}

/// Hard-assign cells to their most responsible component, then rename
/// components to cell types via the signature match above.
pub fn gmm_classify(
    components: &GmmComponents,
    data: &CellMatrix,
    table: &PriorTable,
) -> Result<LabelVector> {
    let mapping = component_types(components, data, table)?;
    let k = components.k();
    let dims = data.n_markers();
    let mut labels = Vec::with_capacity(data.n_cells());
    for i in 0..data.n_cells() {
        let row = data.row(i);
        let mut best = 0usize;
        let mut best_lp = f64::NEG_INFINITY;
        for c in 0..k {
            if components.weights[c] <= 0.0 {
                continue;
            }
            let mut lp = components.weights[c].ln();
            for d in 0..dims {
                let diff = row[d] - components.means[c][d];
                lp += -0.5
                    * (LN_TWO_PI
                        + components.vars[c][d].ln()
                        + diff * diff / components.vars[c][d]);
            }
            if lp > best_lp {
                best_lp = lp;
                best = c;
            }
        }
        labels.push(Some(mapping[best]));
    }
    LabelVector::new(table.types().to_vec(), labels)
}

/// Everything the MP-Prior baseline produces: the voted labels, the
/// winning vote fractions, and the prior draws behind them.
#[derive(Debug, Clone)]
pub struct PriorVote {
    pub voted: LabelVector,
    pub fractions: Vec<f64>,
    pub trees: Vec<MondrianTree>,
    pub log_priors: Vec<f64>,
    pub per_sample: Vec<LabelVector>,
}

/// Vote over `n_samples` trees drawn straight from the prior on the
/// data's padded range box, with no data-driven refinement. Vote ties
/// are broken by the tree with the highest log prior. The trees depend
/// on the data only through its per-marker ranges.
pub fn mp_prior_classify_detailed(
    data: &CellMatrix,
    table: &PriorTable,
    hyper: &Hyperparameters,
    n_samples: usize,
    seed: u64,
) -> Result<PriorVote> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("sample count must be positive".into()));
    }
    let domain = domain_box(data)?;
    let mut trees = Vec::with_capacity(n_samples);
    let mut per_sample = Vec::with_capacity(n_samples);
    let mut log_priors = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let mut rng = RandomSource::substream(seed, BASELINE_STREAM_BASE + 1 + i as u64);
        let tree = sample_mondrian(hyper.budget, &domain, table, hyper, &mut rng)?;
        log_priors.push(log_prior(&tree, table, hyper)?);
        per_sample.push(classify_sample(&tree, data, &mut rng)?);
        trees.push(tree);
    }
    let (voted, fractions) = vote_with_fractions(&per_sample, &log_priors)?;
    Ok(PriorVote {
        voted,
        fractions,
        trees,
        log_priors,
        per_sample,
    })
}

/// The voted labels alone; see [`mp_prior_classify_detailed`].
pub fn mp_prior_classify(
    data: &CellMatrix,
    table: &PriorTable,
    hyper: &Hyperparameters,
    n_samples: usize,
    seed: u64,
) -> Result<LabelVector> {
    Ok(mp_prior_classify_detailed(data, table, hyper, n_samples, seed)?.voted)
}
