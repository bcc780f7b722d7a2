//! Automated gating of flow-cytometry data with a prior-informed
//! Mondrian process and Gaussian emissions.
//!
//! A Mondrian process recursively slices an axis-aligned box with
//! axis-aligned cuts until an exponential budget runs out. Here each
//! marker's cut rate and cut location are steered by a table of
//! expert knowledge ("CD4 T cells are CD4+, CD8−, CD3+"), so the
//! random partitions the process proposes already look like manual
//! gates: cuts cluster on markers that distinguish cell types and
//! fall where a gate boundary would. Each leaf of the resulting tree
//! carries a Gaussian over the cells it captures, giving a mixture
//! model whose component structure is a tree of gates rather than a
//! flat list.
//!
//! The pieces:
//!
//! - [`geom`]: boxes, cuts, and the [`geom::MondrianTree`] itself.
//! - [`table`]: the expert [`table::PriorTable`] and translation of
//!   its entries into cut-rate weights and cut-location Beta laws.
//! - [`sampler`]: prior simulation of trees over a table and a box.
//! - [`emissions`]: cell matrices, per-leaf Gaussians, and the model
//!   log-likelihood with cached sufficient statistics.
//! - [`inference`]: Metropolis–Hastings over cut positions with the
//!   topology held fixed, parallel across chains.
//! - [`classify`]: turning trees into per-cell labels and voting
//!   across posterior samples.
//! - [`baselines`]: the two reference methods — a plain Gaussian
//!   mixture fit by EM, and voting over prior trees without ever
//!   looking at the likelihood.
//! - [`synth`]: synthetic benches with known ground truth.
//! - [`pipeline`]: end-to-end runs and the CSV/JSON/DOT/SVG files the
//!   `mpgmm` binary reads and writes.
//!
//! Everything is deterministic under a seed: parallel chains, voting,
//! and synthesis all draw from fixed substreams, so rerunning a
//! command reproduces its outputs byte for byte.
//!
//! # Example
//!
//! ```
//! use mondrian_gating::prelude::*;
//!
//! let table = PriorTable::from_csv_str(
//!     "type,CD4,CD8\nT_helper,+1,-1\nT_cytotoxic,-1,+1\n",
//! )?;
//! let hyper = Hyperparameters::default();
//! let domain = AxisBox::unit(2);
//! let mut rng = RandomSource::new(7);
//! let tree = sample_mondrian(hyper.budget, &domain, &table, &hyper, &mut rng)?;
//! assert!(tree.leaf_count() >= 1);
//! # Ok::<(), mondrian_gating::Error>(())
//! ```

pub mod baselines;
pub mod classify;
pub mod config;
pub mod emissions;
pub mod error;
pub mod export;
pub mod geom;
pub mod inference;
pub mod pipeline;
pub mod plot;
pub mod sampler;
pub mod stats;
pub mod synth;
pub mod table;

pub use error::{Error, Result};

/// The working vocabulary, for glob import in examples and tests.
pub mod prelude {
    pub use crate::baselines::{
        gmm_classify, gmm_em_fit, mp_prior_classify, mp_prior_classify_detailed,
    };
    pub use crate::classify::{
        accuracy, classify_sample, vote, vote_with_fractions, LabelVector, UNKNOWN_LABEL,
    };
    pub use crate::emissions::{domain_box, CellMatrix, LeafGaussian};
    pub use crate::error::{Error, Result};
    pub use crate::export::{
        posterior_from_json, posterior_to_json, tree_from_json, tree_to_dot, tree_to_json,
    };
    pub use crate::geom::{AxisBox, Cut, MondrianTree, Node};
    pub use crate::inference::{
        init_chain_from_tree, init_chains, run_mcmc, McmcConfig, McmcRun, PosteriorSample,
    };
    pub use crate::pipeline::{classify_posterior, fit_mp_gmm};
    pub use crate::plot::render_posterior_cuts;
    pub use crate::sampler::{sample_mondrian, RandomSource};
    pub use crate::synth::{generate_synthetic, SyntheticData, SyntheticSpec};
    pub use crate::table::{Hyperparameters, Label, LabelSet, PriorTable};
}
