//! Metropolis-Hastings over cut positions.
//!
//! Chains are initialized with independent draws from the prior. Each
//! step picks one internal node uniformly at random and nudges its
//! relative cut position by a reflected Gaussian increment; topology,
//! cut dimensions, and waiting times stay frozen, so the leaf subtables
//! never change. Gaussian emission parameters are refit for every
//! proposal, and the proposal is accepted with probability
//! `min(1, exp(delta log prior + delta log likelihood))`. The
//! perturbation kernel is symmetric, so no correction term appears.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::emissions::{self, CellMatrix, LeafGaussian};
use crate::error::{Error, Result};
use crate::geom::{AxisBox, MondrianTree};
use crate::sampler::{log_prior, sample_mondrian, RandomSource};
use crate::table::{Hyperparameters, PriorTable};

/// Stream offset for per-chain random sources; keeps chain draws
/// disjoint from other consumers of the same master seed.
pub(crate) const CHAIN_STREAM_BASE: u64 = 1;

/// How it runs: chain count, steps per chain, proposal width, seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McmcConfig {
    pub chains: usize,
    pub iterations: usize,
    /// Standard deviation of the Gaussian proposal on relative cut
    /// positions.
    pub step_size: f64,
    pub seed: u64,
    /// Diagnostic switch: drop the likelihood term from the acceptance
    /// ratio, so chains sample the prior restricted to their initial
    /// topology. Used to validate the sampler against its own prior.
    pub prior_only: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            chains: 50,
            iterations: 2000,
            step_size: 0.05,
            seed: 0,
            prior_only: false,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(Error::InvalidConfig("chain count must be positive".into()));
        }
        if !self.step_size.is_finite() || self.step_size <= 0.0 || self.step_size >= 1.0 {
            return Err(Error::InvalidConfig(format!(
                "step size {} must lie in (0, 1)",
                self.step_size
            )));
        }
        Ok(())
    }
}

/// One sampler chain with cached state.
#[derive(Debug, Clone)]
pub struct Chain {
    index: usize,
    tree: MondrianTree,
    gaussians: Vec<LeafGaussian>,
    log_prior: f64,
    log_likelihood: f64,
    initial_log_likelihood: f64,
    rng: RandomSource,
    accepted: u64,
    steps: u64,
    table: PriorTable,
    hyper: Hyperparameters,
    step_size: f64,
    prior_only: bool,
}

impl Chain {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn tree(&self) -> &MondrianTree {
        &self.tree
    }

    pub fn gaussians(&self) -> &[LeafGaussian] {
        &self.gaussians
    }

    pub fn log_prior(&self) -> f64 {
        self.log_prior
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    pub fn log_posterior(&self) -> f64 {
        self.log_prior + self.log_likelihood
    }

    pub fn initial_log_likelihood(&self) -> f64 {
        self.initial_log_likelihood
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.accepted as f64 / self.steps as f64
        }
    }

    /// Recompute the cached log prior and log likelihood from scratch
    /// and confirm they agree with the running values.
    #[cfg(debug_assertions)]
    fn check_caches(&self, data: &CellMatrix) -> Result<()> {
        let lp = log_prior(&self.tree, &self.table, &self.hyper)?;
        let (_, ll) = emissions::fit_and_log_likelihood(&self.tree, data)?;
        let close = |cached: f64, fresh: f64| {
            (cached - fresh).abs() <= 1e-9 * cached.abs().max(fresh.abs()).max(1.0)
        };
        if !close(self.log_prior, lp) || !close(self.log_likelihood, ll) {
            return Err(Error::InvalidArgument(format!(
                "chain {} cache drifted: prior {} vs {}, likelihood {} vs {}",
                self.index, self.log_prior, lp, self.log_likelihood, ll
            )));
        }
        Ok(())
    }
}

/// Fold a real number into `[0, 1]` by reflecting at both ends.
fn reflect_unit(x: f64) -> f64 {
    let y = x.rem_euclid(2.0);
    if y > 1.0 {
        2.0 - y
    } else {
        y
    }
}

/// Draw independent prior trees and cache their scores.
pub fn init_chains(
    config: &McmcConfig,
    domain: &AxisBox,
    table: &PriorTable,
    hyper: &Hyperparameters,
    data: &CellMatrix,
) -> Result<Vec<Chain>> {
    config.validate()?;
    let mut chains = Vec::with_capacity(config.chains);
    for index in 0..config.chains {
        let mut rng = RandomSource::substream(config.seed, CHAIN_STREAM_BASE + index as u64);
        let tree = sample_mondrian(hyper.budget, domain, table, hyper, &mut rng)?;
        chains.push(build_chain(config, index, rng, tree, table, hyper, data)?);
    }
    Ok(chains)
}

/// Start a chain from an explicit tree instead of a fresh prior draw
/// (resuming from a stored sample, or pinning a topology for
/// diagnostics). The chain still draws proposals from the substream it
/// would own under `init_chains`.
pub fn init_chain_from_tree(
    config: &McmcConfig,
    index: usize,
    tree: MondrianTree,
    table: &PriorTable,
    hyper: &Hyperparameters,
    data: &CellMatrix,
) -> Result<Chain> {
    config.validate()?;
    let rng = RandomSource::substream(config.seed, CHAIN_STREAM_BASE + index as u64);
    build_chain(config, index, rng, tree, table, hyper, data)
}

fn build_chain(
    config: &McmcConfig,
    index: usize,
    rng: RandomSource,
    tree: MondrianTree,
    table: &PriorTable,
    hyper: &Hyperparameters,
    data: &CellMatrix,
) -> Result<Chain> {
    let lp = log_prior(&tree, table, hyper)?;
    let (gaussians, ll) = emissions::fit_and_log_likelihood(&tree, data)?;
    Ok(Chain {
        index,
        tree,
        gaussians,
        log_prior: lp,
        log_likelihood: ll,
        initial_log_likelihood: ll,
        rng,
        accepted: 0,
        steps: 0,
        table: table.clone(),
        hyper: *hyper,
        step_size: config.step_size,
        prior_only: config.prior_only,
    })
}

/// Propose a tree with one cut nudged. A tree without cuts proposes
/// itself (a self-transition).
pub fn propose_perturbation(chain: &mut Chain) -> Result<MondrianTree> {
    let cuts = chain.tree.internal_count();
    if cuts == 0 {
        return Ok(chain.tree.clone());
    }
    let target = chain.rng.gen_range(0..cuts);
    let current = chain.tree.rel_positions()[target];
    let step = Normal::new(0.0, chain.step_size)
        .map_err(|e| Error::InvalidConfig(format!("step size {}: {e}", chain.step_size)))?
        .sample(&mut chain.rng);
    let proposed = reflect_unit(current + step);
    if proposed <= 0.0 || proposed >= 1.0 {
        // Reflection landed exactly on a boundary; treat it as a
        // self-transition rather than producing a degenerate cut.
        return Ok(chain.tree.clone());
    }
    chain.tree.perturbed(target, proposed)
}

/// Score `candidate`, accept or reject it, and update the chain.
/// Returns whether the candidate was accepted.
pub fn mh_step(chain: &mut Chain, data: &CellMatrix, candidate: MondrianTree) -> Result<bool> {
    let assignments = emissions::assign(&candidate, data)?;
    let gaussians = emissions::fit_from_assignments(&candidate, data, &assignments)?;
    let ll = emissions::log_likelihood_from_assignments(
        data,
        &gaussians,
        &assignments,
        candidate.leaf_count(),
    )?;
    let lp = log_prior(&candidate, &chain.table, &chain.hyper)?;
    let delta = if chain.prior_only {
        lp - chain.log_prior
    } else {
        (lp + ll) - (chain.log_prior + chain.log_likelihood)
    };
    let u: f64 = chain.rng.gen();
    let accept = u.ln() < delta;
    chain.steps += 1;
    if accept {
        chain.tree = candidate;
        chain.gaussians = gaussians;
        chain.log_prior = lp;
        chain.log_likelihood = ll;
        chain.accepted += 1;
    }
    Ok(accept)
}

/// One row of the convergence trace, recorded every ten iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub chain: usize,
    pub iteration: usize,
    pub log_prior: f64,
    pub log_likelihood: f64,
    pub acceptance_rate: f64,
}

/// Final state of one chain: a posterior sample.
#[derive(Debug, Clone)]
pub struct PosteriorSample {
    pub chain: usize,
    pub tree: MondrianTree,
    pub log_prior: f64,
    pub log_likelihood: f64,
    pub initial_log_likelihood: f64,
    pub acceptance_rate: f64,
}

impl PosteriorSample {
    pub fn log_posterior(&self) -> f64 {
        self.log_prior + self.log_likelihood
    }
}

/// Everything a run produces: one sample per chain plus the trace.
#[derive(Debug, Clone)]
pub struct McmcRun {
    pub samples: Vec<PosteriorSample>,
    pub trace: Vec<TraceRow>,
}

impl McmcRun {
    /// Index of the sample with the highest log posterior. Exact ties
    /// resolve to the earliest chain.
    pub fn map_index(&self) -> usize {
        let mut best = 0;
        for (i, s) in self.samples.iter().enumerate() {
            if s.log_posterior() > self.samples[best].log_posterior() {
                best = i;
            }
        }
        best
    }
}

/// Run every chain for `config.iterations` steps. Chains are
/// independent and run in parallel; results are gathered in chain
/// order, so the outcome does not depend on scheduling.
pub fn run_mcmc(chains: Vec<Chain>, data: &CellMatrix, config: &McmcConfig) -> Result<McmcRun> {
    config.validate()?;
    let per_chain: Vec<(PosteriorSample, Vec<TraceRow>)> = chains
        .into_par_iter()
        .map(|chain| run_single_chain(chain, data, config.iterations))
        .collect::<Result<Vec<_>>>()?;

    let mut samples = Vec::with_capacity(per_chain.len());
    let mut trace = Vec::new();
    for (sample, rows) in per_chain {
        samples.push(sample);
        trace.extend(rows);
    }
    Ok(McmcRun { samples, trace })
}

fn run_single_chain(
    mut chain: Chain,
    data: &CellMatrix,
    iterations: usize,
) -> Result<(PosteriorSample, Vec<TraceRow>)> {
    let mut trace = Vec::with_capacity(iterations / 10 + 1);
    let record = |chain: &Chain, iteration: usize, trace: &mut Vec<TraceRow>| {
        trace.push(TraceRow {
            chain: chain.index,
            iteration,
            log_prior: chain.log_prior,
            log_likelihood: chain.log_likelihood,
            acceptance_rate: chain.acceptance_rate(),
        });
    };
    record(&chain, 0, &mut trace);
    for iteration in 1..=iterations {
        let candidate = propose_perturbation(&mut chain)?;
        mh_step(&mut chain, data, candidate)?;
        if iteration % 10 == 0 {
            record(&chain, iteration, &mut trace);
        }
        #[cfg(debug_assertions)]
        if iteration % 100 == 0 {
            chain.check_caches(data)?;
        }
    }
    let mut tree = chain.tree.clone();
    tree.set_leaf_gaussians(&chain.gaussians)?;
    let sample = PosteriorSample {
        chain: chain.index,
        tree,
        log_prior: chain.log_prior,
        log_likelihood: chain.log_likelihood,
        initial_log_likelihood: chain.initial_log_likelihood,
        acceptance_rate: chain.acceptance_rate(),
    };
    Ok((sample, trace))
}
