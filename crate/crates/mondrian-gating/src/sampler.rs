//! Generative sampling of prior-informed Mondrian trees, and the log
//! density of a tree under that generative process.
//!
//! Recursive recipe for a box `X` with table `T` and remaining budget:
//! draw a waiting time `t ~ Exponential(sum_d weight_d * length_d)`;
//! halt if the budget runs out or the table has at most one row left.
//! Otherwise pick a dimension with probability proportional to
//! `weight_d * length_d`, draw the relative cut position from the
//! column's Beta distribution, split the box and the table, and recurse
//! on both sides with the decremented budget.

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Exp};
use statrs::function::beta::ln_beta;

use crate::error::{Error, Result};
use crate::geom::{
    split_box, weighted_linear_dimension, AxisBox, Cut, MondrianTree, Node, Side,
};
use crate::table::{cut_beta_params, dimension_weights, Hyperparameters, PriorTable};

/// Hard cap on tree depth; hit only by runaway configurations.
pub const MAX_DEPTH: usize = 64;

/// Seeded, counter-based random source. The same seed always yields the
/// same draw sequence, and independent substreams can be split off by
/// stream id without touching each other.
#[derive(Debug, Clone)]
pub struct RandomSource {
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream `stream` of the generator seeded with `seed`.
    pub fn substream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }
}

impl RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

/// Draw one tree over `bounds` with starting budget `budget`.
pub fn sample_mondrian(
    budget: f64,
    bounds: &AxisBox,
    table: &PriorTable,
    hyper: &Hyperparameters,
    rng: &mut RandomSource,
) -> Result<MondrianTree> {
    if !budget.is_finite() || budget <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "budget {budget} must be finite and positive"
        )));
    }
    if table.n_markers() != bounds.dims() {
        return Err(Error::DimensionMismatch(format!(
            "table has {} markers, box has {} dimensions",
            table.n_markers(),
            bounds.dims()
        )));
    }
    let root = sample_node(budget, bounds.clone(), table.clone(), hyper, rng, 0)?;
    Ok(MondrianTree::from_root_unchecked(budget, root))
}

fn sample_node(
    budget: f64,
    bounds: AxisBox,
    table: PriorTable,
    hyper: &Hyperparameters,
    rng: &mut RandomSource,
    depth: usize,
) -> Result<Node> {
    if depth > MAX_DEPTH {
        return Err(Error::DepthExceeded(MAX_DEPTH));
    }
    // A table with at most one row cannot be split further.
    if table.n_types() <= 1 {
        return Ok(Node::Leaf {
            bounds,
            table,
            gaussian: None,
        });
    }
    let weights = dimension_weights(&table, hyper);
    let rate = weighted_linear_dimension(&bounds, &weights)?;
    let wait = Exp::new(rate)
        .map_err(|e| Error::InvalidArgument(format!("waiting-time rate {rate}: {e}")))?
        .sample(rng);
    if wait > budget {
        return Ok(Node::Leaf {
            bounds,
            table,
            gaussian: None,
        });
    }
    let remaining = budget - wait;

    let masses: Vec<f64> = (0..bounds.dims())
        .map(|d| weights[d] * bounds.length(d))
        .collect();
    let dim = WeightedIndex::new(&masses)
        .map_err(|e| Error::InvalidWeight(format!("dimension masses: {e}")))?
        .sample(rng);

    let (alpha, beta) = cut_beta_params(table.label_set(dim), hyper);
    let rel = sample_beta_interior(alpha, beta, rng)?;
    let cut = Cut::at_relative(&bounds, dim, rel, wait)?;
    let (left_bounds, right_bounds) = split_box(&bounds, &cut)?;
    let left_table = table.filter_rows(dim, Side::Left);
    let right_table = table.filter_rows(dim, Side::Right);

    let left = sample_node(remaining, left_bounds, left_table, hyper, rng, depth + 1)?;
    let right = sample_node(remaining, right_bounds, right_table, hyper, rng, depth + 1)?;
    Ok(Node::Internal {
        bounds,
        cut,
        left: Box::new(left),
        right: Box::new(right),
    })
}

/// Beta draw guaranteed to land strictly inside `(0, 1)`.
fn sample_beta_interior(alpha: f64, beta: f64, rng: &mut RandomSource) -> Result<f64> {
    let dist = Beta::new(alpha, beta)
        .map_err(|e| Error::InvalidArgument(format!("beta({alpha}, {beta}): {e}")))?;
    for _ in 0..100 {
        let r = dist.sample(rng);
        if r > 0.0 && r < 1.0 {
            return Ok(r);
        }
    }
    Err(Error::InvalidCut(format!(
        "beta({alpha}, {beta}) kept returning boundary values"
    )))
}

/// Log density of `tree` under the generative process started from
/// `table`, including survival terms for leaves that halted because the
/// budget ran out. Leaves forced by a table with at most one row
/// contribute nothing: halting there has probability one.
pub fn log_prior(tree: &MondrianTree, table: &PriorTable, hyper: &Hyperparameters) -> Result<f64> {
    if table.n_markers() != tree.dims() {
        return Err(Error::InconsistentTree(format!(
            "table has {} markers, tree has {} dimensions",
            table.n_markers(),
            tree.dims()
        )));
    }
    node_log_prior(tree.root(), table, hyper, tree.budget())
}

fn node_log_prior(
    node: &Node,
    table: &PriorTable,
    hyper: &Hyperparameters,
    budget_remaining: f64,
) -> Result<f64> {
    match node {
        Node::Leaf {
            table: stored,
            bounds,
            ..
        } => {
            if stored != table {
                return Err(Error::InconsistentTree(format!(
                    "leaf stores types {:?} but filtering the root table leaves {:?}",
                    stored.types(),
                    table.types()
                )));
            }
            if table.n_types() >= 2 {
                // Halted because no cut arrived within the remaining
                // budget: log of the exponential survival probability.
                let weights = dimension_weights(table, hyper);
                let rate = weighted_linear_dimension(bounds, &weights)?;
                Ok(-rate * budget_remaining)
            } else {
                Ok(0.0)
            }
        }
        Node::Internal {
            bounds,
            cut,
            left,
            right,
        } => {
            let wait = cut.wait_time();
            if wait > budget_remaining {
                return Err(Error::InconsistentTree(format!(
                    "waiting time {wait} exceeds the remaining budget {budget_remaining}"
                )));
            }
            let weights = dimension_weights(table, hyper);
            let rate = weighted_linear_dimension(bounds, &weights)?;
            let mut total = rate.ln() - rate * wait;

            let dim = cut.dim();
            let p_dim = weights[dim] * bounds.length(dim) / rate;
            total += p_dim.ln();

            let (alpha, beta) = cut_beta_params(table.label_set(dim), hyper);
            let r = cut.rel_pos();
            total += (alpha - 1.0) * r.ln() + (beta - 1.0) * (1.0 - r).ln() - ln_beta(alpha, beta);

            let remaining = budget_remaining - wait;
            let left_table = table.filter_rows(dim, Side::Left);
            let right_table = table.filter_rows(dim, Side::Right);
            total += node_log_prior(left, &left_table, hyper, remaining)?;
            total += node_log_prior(right, &right_table, hyper, remaining)?;
            Ok(total)
        }
    }
}
