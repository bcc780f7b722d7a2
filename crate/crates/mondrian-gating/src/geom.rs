//! Axis-aligned boxes, cuts, and the Mondrian tree built from them.
//!
//! A tree recursively halves an axis-aligned box. Every internal node
//! stores the cut that produced its children (dimension, relative and
//! absolute position, waiting time); every leaf stores the prior table
//! rows that survived the cut history above it, plus optional Gaussian
//! emission parameters. Points route left when they sit exactly on a
//! cut, so the leaves tile the domain without overlap.

use std::fmt;

use crate::emissions::LeafGaussian;
use crate::error::{Error, Result};
use crate::table::PriorTable;

/// Side of a cut, both for routing points and for filtering table rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

/// A product of bounded intervals, one per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl AxisBox {
    /// Build a box from per-dimension bounds. Every interval must be
    /// finite with strictly positive length.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidBox("a box needs at least one dimension".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::InvalidBox(format!(
                "lower has {} dimensions, upper has {}",
                lower.len(),
                upper.len()
            )));
        }
        for d in 0..lower.len() {
            let (a, b) = (lower[d], upper[d]);
            if !a.is_finite() || !b.is_finite() || !(a < b) {
                return Err(Error::InvalidBox(format!(
                    "dimension {d} has bounds [{a}, {b}]; need finite lower < upper"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The unit box `[0, 1]^dims`.
    pub fn unit(dims: usize) -> Self {
        Self {
            lower: vec![0.0; dims],
            upper: vec![1.0; dims],
        }
    }

    pub fn dims(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self, dim: usize) -> f64 {
        self.lower[dim]
    }

    pub fn upper(&self, dim: usize) -> f64 {
        self.upper[dim]
    }

    pub fn lower_bounds(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper_bounds(&self) -> &[f64] {
        &self.upper
    }

    pub fn length(&self, dim: usize) -> f64 {
        self.upper[dim] - self.lower[dim]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dims()).map(|d| self.length(d)).product()
    }

    pub fn center(&self) -> Vec<f64> {
        (0..self.dims())
            .map(|d| 0.5 * (self.lower[d] + self.upper[d]))
            .collect()
    }

    /// Closed-box membership test.
    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dims()
            && (0..self.dims()).all(|d| point[d] >= self.lower[d] && point[d] <= self.upper[d])
    }
}

/// One axis-aligned cut: the dimension it crosses, its position both
/// relative to the parent box and in absolute coordinates, and the
/// exponential waiting time that preceded it.
#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    dim: usize,
    rel_pos: f64,
    abs_pos: f64,
    wait_time: f64,
}

impl Cut {
    /// Place a cut at relative position `rel_pos` (strictly inside `(0, 1)`)
    /// along `dim` of `bounds`.
    pub fn at_relative(bounds: &AxisBox, dim: usize, rel_pos: f64, wait_time: f64) -> Result<Self> {
        if dim >= bounds.dims() {
            return Err(Error::InvalidCut(format!(
                "dimension {dim} out of range for a {}-dimensional box",
                bounds.dims()
            )));
        }
        if !rel_pos.is_finite() || rel_pos <= 0.0 || rel_pos >= 1.0 {
            return Err(Error::InvalidCut(format!(
                "relative position {rel_pos} must lie strictly inside (0, 1)"
            )));
        }
        if !wait_time.is_finite() || wait_time < 0.0 {
            return Err(Error::InvalidCut(format!(
                "waiting time {wait_time} must be finite and non-negative"
            )));
        }
        let (a, b) = (bounds.lower(dim), bounds.upper(dim));
        let abs_pos = a + rel_pos * (b - a);
        if !(abs_pos > a && abs_pos < b) {
            return Err(Error::InvalidCut(format!(
                "cut at {abs_pos} degenerates against the bounds [{a}, {b}]"
            )));
        }
        Ok(Self {
            dim,
            rel_pos,
            abs_pos,
            wait_time,
        })
    }

    /// Reassemble a cut from stored fields, trusting the caller to have
    /// validated consistency (used when importing serialized trees).
    pub(crate) fn from_parts(dim: usize, rel_pos: f64, abs_pos: f64, wait_time: f64) -> Self {
        Self {
            dim,
            rel_pos,
            abs_pos,
            wait_time,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rel_pos(&self) -> f64 {
        self.rel_pos
    }

    pub fn abs_pos(&self) -> f64 {
        self.abs_pos
    }

    pub fn wait_time(&self) -> f64 {
        self.wait_time
    }
}

/// Split `bounds` at `cut`, returning the lower and upper halves.
///
/// The cut must fall strictly inside the box; a cut on or outside the
/// boundary is an error.
pub fn split_box(bounds: &AxisBox, cut: &Cut) -> Result<(AxisBox, AxisBox)> {
    if cut.dim() >= bounds.dims() {
        return Err(Error::InvalidCut(format!(
            "dimension {} out of range for a {}-dimensional box",
            cut.dim(),
            bounds.dims()
        )));
    }
    let (a, b) = (bounds.lower(cut.dim()), bounds.upper(cut.dim()));
    let c = cut.abs_pos();
    if !(c > a && c < b) {
        return Err(Error::InvalidCut(format!(
            "cut at {c} does not fall strictly inside [{a}, {b}]"
        )));
    }
    let mut left = bounds.clone();
    let mut right = bounds.clone();
    left.upper[cut.dim()] = c;
    right.lower[cut.dim()] = c;
    Ok((left, right))
}

/// Weighted total side length `sum_d weights[d] * length_d`.
///
/// Weights must be strictly positive and finite, one per dimension.
pub fn weighted_linear_dimension(bounds: &AxisBox, weights: &[f64]) -> Result<f64> {
    if weights.len() != bounds.dims() {
        return Err(Error::InvalidWeight(format!(
            "{} weights for a {}-dimensional box",
            weights.len(),
            bounds.dims()
        )));
    }
    for (d, &w) in weights.iter().enumerate() {
        if !w.is_finite() || w <= 0.0 {
            return Err(Error::InvalidWeight(format!(
                "weight {w} for dimension {d} must be finite and positive"
            )));
        }
    }
    Ok(weights
        .iter()
        .zip(0..bounds.dims())
        .map(|(w, d)| w * bounds.length(d))
        .sum())
}

/// A node of the Mondrian tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Internal {
        bounds: AxisBox,
        cut: Cut,
        left: Box<Node>,
        right: Box<Node>,
    },
    Leaf {
        bounds: AxisBox,
        table: PriorTable,
        gaussian: Option<LeafGaussian>,
    },
}

impl Node {
    pub fn bounds(&self) -> &AxisBox {
        match self {
            Node::Internal { bounds, .. } | Node::Leaf { bounds, .. } => bounds,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Node::Leaf { .. })
    }
}

/// Identifier of a leaf: the sequence of sides taken from the root.
///
/// Displays as a string over `L`/`R`; the root itself is the empty path.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct LeafPath(Vec<Side>);

impl LeafPath {
    pub fn sides(&self) -> &[Side] {
        &self.0
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    fn child(&self, side: Side) -> Self {
        let mut sides = self.0.clone();
        sides.push(side);
        Self(sides)
    }
}

impl fmt::Display for LeafPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for side in &self.0 {
            f.write_str(match side {
                Side::Left => "L",
                Side::Right => "R",
            })?;
        }
        Ok(())
    }
}

/// Borrowing view of one leaf, in depth-first order.
#[derive(Debug, Clone)]
pub struct LeafView<'a> {
    pub path: LeafPath,
    pub bounds: &'a AxisBox,
    pub table: &'a PriorTable,
    pub gaussian: Option<&'a LeafGaussian>,
}

/// Declarative description of a tree shape, used to build trees by hand.
///
/// Boxes, subtables, and budget accounting are derived during
/// construction so the resulting tree satisfies the same invariants as
/// a sampled one.
#[derive(Debug, Clone)]
pub enum TreeSpec {
    Leaf,
    Cut {
        dim: usize,
        rel_pos: f64,
        wait_time: f64,
        left: Box<TreeSpec>,
        right: Box<TreeSpec>,
    },
}

impl TreeSpec {
    /// Convenience constructor for an internal node.
    pub fn cut(dim: usize, rel_pos: f64, wait_time: f64, left: TreeSpec, right: TreeSpec) -> Self {
        TreeSpec::Cut {
            dim,
            rel_pos,
            wait_time,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

/// A sampled (or explicitly built) Mondrian tree over a fixed domain box.
#[derive(Debug, Clone, PartialEq)]
pub struct MondrianTree {
    budget: f64,
    root: Node,
}

impl MondrianTree {
    /// A tree with no cuts.
    pub fn single_leaf(budget: f64, bounds: AxisBox, table: PriorTable) -> Result<Self> {
        check_budget(budget)?;
        check_table_dims(&bounds, &table)?;
        Ok(Self {
            budget,
            root: Node::Leaf {
                bounds,
                table,
                gaussian: None,
            },
        })
    }

    /// Build a tree from an explicit shape description. Child boxes and
    /// leaf subtables are derived from the cuts, and cumulative waiting
    /// times are checked against the budget.
    pub fn from_spec(
        budget: f64,
        bounds: AxisBox,
        table: &PriorTable,
        spec: &TreeSpec,
    ) -> Result<Self> {
        check_budget(budget)?;
        check_table_dims(&bounds, table)?;
        let root = build_from_spec(bounds, table.clone(), spec, budget)?;
        Ok(Self { budget, root })
    }

    /// Assemble a tree whose invariants the caller has already enforced
    /// (the sampler and the JSON importer).
    pub(crate) fn from_root_unchecked(budget: f64, root: Node) -> Self {
        Self { budget, root }
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn root_bounds(&self) -> &AxisBox {
        self.root.bounds()
    }

    pub fn dims(&self) -> usize {
        self.root.bounds().dims()
    }

    /// All leaves in depth-first order (left before right).
    pub fn leaves(&self) -> Vec<LeafView<'_>> {
        let mut out = Vec::new();
        collect_leaves(&self.root, LeafPath::default(), &mut out);
        out
    }

    pub fn leaf_count(&self) -> usize {
        fn count(node: &Node) -> usize {
            match node {
                Node::Leaf { .. } => 1,
                Node::Internal { left, right, .. } => count(left) + count(right),
            }
        }
        count(&self.root)
    }

    pub fn internal_count(&self) -> usize {
        self.leaf_count() - 1
    }

    /// Route a point to its leaf. Points exactly on a cut go left.
    pub fn leaf_of(&self, point: &[f64]) -> Result<LeafPath> {
        self.check_in_domain(point)?;
        let mut node = &self.root;
        let mut path = LeafPath::default();
        loop {
            match node {
                Node::Leaf { .. } => return Ok(path),
                Node::Internal {
                    cut, left, right, ..
                } => {
                    if point[cut.dim()] <= cut.abs_pos() {
                        path = path.child(Side::Left);
                        node = left;
                    } else {
                        path = path.child(Side::Right);
                        node = right;
                    }
                }
            }
        }
    }

    /// Route a point to the index of its leaf in depth-first order.
    /// Cheaper than [`MondrianTree::leaf_of`] for bulk assignment.
    pub fn leaf_index_of(&self, point: &[f64]) -> Result<usize> {
        self.check_in_domain(point)?;
        let mut node = &self.root;
        let mut index = 0;
        loop {
            match node {
                Node::Leaf { .. } => return Ok(index),
                Node::Internal {
                    cut, left, right, ..
                } => {
                    if point[cut.dim()] <= cut.abs_pos() {
                        node = left;
                    } else {
                        index += leaf_count_of(left);
                        node = right;
                    }
                }
            }
        }
    }

    fn check_in_domain(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.dims() {
            return Err(Error::OutOfDomain(format!(
                "point has {} coordinates, domain has {} dimensions",
                point.len(),
                self.dims()
            )));
        }
        if !self.root.bounds().contains(point) {
            return Err(Error::OutOfDomain(format!(
                "point {point:?} is not inside the domain box"
            )));
        }
        Ok(())
    }

    /// Every internal cut paired with the box it divides, depth-first.
    pub fn cuts(&self) -> Vec<(&AxisBox, &Cut)> {
        let mut out = Vec::new();
        fn walk<'a>(node: &'a Node, out: &mut Vec<(&'a AxisBox, &'a Cut)>) {
            if let Node::Internal {
                bounds,
                cut,
                left,
                right,
            } = node
            {
                out.push((bounds, cut));
                walk(left, out);
                walk(right, out);
            }
        }
        walk(&self.root, &mut out);
        out
    }

    /// Relative cut positions of internal nodes, depth-first.
    pub fn rel_positions(&self) -> Vec<f64> {
        self.cuts().iter().map(|(_, c)| c.rel_pos()).collect()
    }

    /// Copy of the tree with the `internal_index`-th cut (depth-first)
    /// moved to relative position `new_rel`. Topology, cut dimensions,
    /// and waiting times are untouched; boxes below the moved cut are
    /// recomputed from the stored relative positions, and leaf Gaussians
    /// are cleared because leaf membership may have changed.
    pub fn perturbed(&self, internal_index: usize, new_rel: f64) -> Result<MondrianTree> {
        let total = self.internal_count();
        if internal_index >= total {
            return Err(Error::InvalidArgument(format!(
                "internal node {internal_index} out of range; tree has {total} cuts"
            )));
        }
        let mut counter = 0;
        let root = rebuild(
            &self.root,
            self.root.bounds().clone(),
            &mut counter,
            internal_index,
            new_rel,
        )?;
        Ok(MondrianTree {
            budget: self.budget,
            root,
        })
    }

    /// Attach per-leaf Gaussian parameters, one per leaf in depth-first
    /// order.
    pub fn set_leaf_gaussians(&mut self, params: &[LeafGaussian]) -> Result<()> {
        let leaves = self.leaf_count();
        if params.len() != leaves {
            return Err(Error::DimensionMismatch(format!(
                "{} parameter sets for {} leaves",
                params.len(),
                leaves
            )));
        }
        let dims = self.dims();
        for g in params {
            if g.dims() != dims {
                return Err(Error::DimensionMismatch(format!(
                    "gaussian has {} dimensions, tree has {}",
                    g.dims(),
                    dims
                )));
            }
        }
        let mut next = 0;
        fn set(node: &mut Node, params: &[LeafGaussian], next: &mut usize) {
            match node {
                Node::Leaf { gaussian, .. } => {
                    *gaussian = Some(params[*next].clone());
                    *next += 1;
                }
                Node::Internal { left, right, .. } => {
                    set(left, params, next);
                    set(right, params, next);
                }
            }
        }
        set(&mut self.root, params, &mut next);
        Ok(())
    }
}

fn check_budget(budget: f64) -> Result<()> {
    if !budget.is_finite() || budget <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "budget {budget} must be finite and positive"
        )));
    }
    Ok(())
}

fn check_table_dims(bounds: &AxisBox, table: &PriorTable) -> Result<()> {
    if table.n_markers() != bounds.dims() {
        return Err(Error::DimensionMismatch(format!(
            "table has {} markers, box has {} dimensions",
            table.n_markers(),
            bounds.dims()
        )));
    }
    Ok(())
}

fn leaf_count_of(node: &Node) -> usize {
    match node {
        Node::Leaf { .. } => 1,
        Node::Internal { left, right, .. } => leaf_count_of(left) + leaf_count_of(right),
    }
}

fn collect_leaves<'a>(node: &'a Node, path: LeafPath, out: &mut Vec<LeafView<'a>>) {
    match node {
        Node::Leaf {
            bounds,
            table,
            gaussian,
        } => out.push(LeafView {
            path,
            bounds,
            table,
            gaussian: gaussian.as_ref(),
        }),
        Node::Internal { left, right, .. } => {
            collect_leaves(left, path.child(Side::Left), out);
            collect_leaves(right, path.child(Side::Right), out);
        }
    }
}

fn build_from_spec(
    bounds: AxisBox,
    table: PriorTable,
    spec: &TreeSpec,
    budget_remaining: f64,
) -> Result<Node> {
    match spec {
        TreeSpec::Leaf => Ok(Node::Leaf {
            bounds,
            table,
            gaussian: None,
        }),
        TreeSpec::Cut {
            dim,
            rel_pos,
            wait_time,
            left,
            right,
        } => {
            if *wait_time > budget_remaining {
                return Err(Error::InvalidArgument(format!(
                    "cumulative waiting time exceeds the budget by {}",
                    wait_time - budget_remaining
                )));
            }
            let cut = Cut::at_relative(&bounds, *dim, *rel_pos, *wait_time)?;
            let (lb, rb) = split_box(&bounds, &cut)?;
            let lt = table.filter_rows(*dim, Side::Left);
            let rt = table.filter_rows(*dim, Side::Right);
            let remaining = budget_remaining - wait_time;
            Ok(Node::Internal {
                bounds,
                cut,
                left: Box::new(build_from_spec(lb, lt, left, remaining)?),
                right: Box::new(build_from_spec(rb, rt, right, remaining)?),
            })
        }
    }
}

fn rebuild(
    node: &Node,
    bounds: AxisBox,
    counter: &mut usize,
    target: usize,
    new_rel: f64,
) -> Result<Node> {
    match node {
        Node::Leaf { table, .. } => Ok(Node::Leaf {
            bounds,
            table: table.clone(),
            gaussian: None,
        }),
        Node::Internal {
            cut, left, right, ..
        } => {
            let index = *counter;
            *counter += 1;
            let rel = if index == target {
                new_rel
            } else {
                cut.rel_pos()
            };
            let new_cut = Cut::at_relative(&bounds, cut.dim(), rel, cut.wait_time())?;
            let (lb, rb) = split_box(&bounds, &new_cut)?;
            Ok(Node::Internal {
                bounds,
                cut: new_cut,
                left: Box::new(rebuild(left, lb, counter, target, new_rel)?),
                right: Box::new(rebuild(right, rb, counter, target, new_rel)?),
            })
        }
    }
}
