//! Synthetic benches: draw a tree whose leaves each pin down a single
//! cell type, then emit truncated-Gaussian cells from its leaf boxes.

use rand::prelude::*;
use rand_distr::Normal;

use crate::classify::{leaf_type_candidates, LabelVector};
use crate::emissions::{CellMatrix, LeafGaussian};
use crate::error::{Error, Result};
use crate::geom::{AxisBox, MondrianTree};
use crate::sampler::{sample_mondrian, RandomSource};
use crate::table::{Hyperparameters, PriorTable};

/// How many fresh trees to draw before giving up on finding one whose
/// leaves all name exactly one cell type.
const MAX_TREE_ATTEMPTS: usize = 100;

/// How many rejection draws to allow per cell before giving up.
const MAX_CELL_ATTEMPTS: usize = 10_000;

/// Controls for [`generate_synthetic`].
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    /// Number of cells to emit.
    pub n_cells: usize,
    /// Separation factor: each leaf's marginal deviation is the box
    /// side length divided by `4 * separation`, so larger values mean
    /// cleaner clusters.
    pub separation: f64,
    /// Domain the generating tree partitions.
    pub domain: AxisBox,
}

impl SyntheticSpec {
    pub fn unit(dims: usize, n_cells: usize, separation: f64) -> Result<Self> {
        Ok(Self {
            n_cells,
            separation,
            domain: AxisBox::unit(dims),
        })
    }
}

/// A generated bench: the cells, their true labels, and the tree that
/// produced them (with its leaf Gaussians attached).
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub cells: CellMatrix,
    pub truth: LabelVector,
    pub tree: MondrianTree,
}

/// Draw a generating tree from the prior, keep it only if every leaf
/// is consistent with exactly one cell type, then sample cells leaf by
/// leaf (leaf choice proportional to box volume) from axis-aligned
/// Gaussians centred in each box and truncated to it.
pub fn generate_synthetic(
    spec: &SyntheticSpec,
    table: &PriorTable,
    hyper: &Hyperparameters,
    rng: &mut RandomSource,
) -> Result<SyntheticData> {
    if spec.n_cells == 0 {
        return Err(Error::InvalidArgument("cell count must be positive".into()));
    }
    if !(spec.separation.is_finite() && spec.separation > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "separation must be positive, got {}",
            spec.separation
        )));
    }
    if table.n_markers() != spec.domain.dims() {
        return Err(Error::DimensionMismatch(format!(
            "table has {} markers but the domain has {} dimensions",
            table.n_markers(),
            spec.domain.dims()
        )));
    }

    let mut tree = None;
    for _ in 0..MAX_TREE_ATTEMPTS {
        let candidate = sample_mondrian(hyper.budget, &spec.domain, table, hyper, rng)?;
        let single_typed = candidate
            .leaves()
            .iter()
            .all(|leaf| leaf_type_candidates(leaf).len() == 1);
        if single_typed {
            tree = Some(candidate);
            break;
        }
    }
    let mut tree = tree.ok_or(Error::SynthesisFailed {
        attempts: MAX_TREE_ATTEMPTS,
    })?;

    let dims = spec.domain.dims();
    let leaves = tree.leaves();
    let volumes: Vec<f64> = leaves.iter().map(|l| l.bounds.volume()).collect();
    let leaf_choice = rand::distributions::WeightedIndex::new(&volumes)
        .map_err(|_| Error::InvalidArgument("degenerate leaf volumes".into()))?;

    // One truncated Gaussian per leaf, centred in the box.
    let params: Vec<LeafGaussian> = leaves
        .iter()
        .map(|leaf| {
            let mean = leaf.bounds.center();
            let var: Vec<f64> = (0..dims)
                .map(|d| {
                    let sd = leaf.bounds.length(d) / (4.0 * spec.separation);
                    sd * sd
                })
                .collect();
            LeafGaussian::new(mean, var)
        })
        .collect::<Result<_>>()?;

    let type_names: Vec<String> = leaves
        .iter()
        .map(|leaf| leaf_type_candidates(leaf)[0].clone())
        .collect();

    let mut rows = Vec::with_capacity(spec.n_cells);
    let mut names = Vec::with_capacity(spec.n_cells);
    for _ in 0..spec.n_cells {
        let li = leaf_choice.sample(rng);
        let bounds = leaves[li].bounds;
        let gauss = &params[li];
        let mut cell = vec![0.0f64; dims];
        for d in 0..dims {
            let normal = Normal::new(gauss.mean()[d], gauss.var()[d].sqrt())
                .map_err(|_| Error::InvalidArgument("bad leaf deviation".into()))?;
            let mut accepted = false;
            for _ in 0..MAX_CELL_ATTEMPTS {
                let x = normal.sample(rng);
                if x >= bounds.lower(d) && x <= bounds.upper(d) {
                    cell[d] = x;
                    accepted = true;
                    break;
                }
            }
            if !accepted {
                return Err(Error::SynthesisFailed {
                    attempts: MAX_CELL_ATTEMPTS,
                });
            }
        }
        rows.push(cell);
        names.push(type_names[li].clone());
    }

    drop(leaves);
    tree.set_leaf_gaussians(&params)?;

    let cells = CellMatrix::new(table.markers().to_vec(), rows)?;
    let indices = names
        .iter()
        .map(|n| table.types().iter().position(|t| t == n))
        .collect();
    let truth = LabelVector::new(table.types().to_vec(), indices)?;
    Ok(SyntheticData { cells, truth, tree })
}
