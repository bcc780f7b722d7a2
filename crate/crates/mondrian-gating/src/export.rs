//! Serialization: trees and posterior collections to and from JSON,
//! plus Graphviz DOT rendering of a single tree.
//!
//! The JSON layout is stable so fitted trees can be archived and
//! reloaded. Imports re-derive child boxes from each stored cut and
//! reject files whose geometry disagrees with itself beyond a small
//! tolerance, but keep the stored values bit for bit so a round trip
//! through JSON is exact.

use serde::{Deserialize, Serialize};

use crate::classify::UNKNOWN_LABEL;
use crate::emissions::LeafGaussian;
use crate::error::{Error, Result};
use crate::geom::{split_box, AxisBox, Cut, MondrianTree, Node};
use crate::inference::PosteriorSample;
use crate::table::{Label, PriorTable};

/// Geometry tolerance when validating imported trees.
const IMPORT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Serialize, Deserialize)]
struct BoxRepr {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TableRepr {
    types: Vec<String>,
    markers: Vec<String>,
    entries: Vec<Vec<i8>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GaussianRepr {
    mean: Vec<f64>,
    var: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum NodeRepr {
    Internal {
        #[serde(rename = "box")]
        bounds: BoxRepr,
        dim: usize,
        rel_pos: f64,
        abs_pos: f64,
        wait_time: f64,
        children: Vec<NodeRepr>,
    },
    Leaf {
        #[serde(rename = "box")]
        bounds: BoxRepr,
        leaf_table: TableRepr,
        leaf_gaussian: Option<GaussianRepr>,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct TreeRepr {
    budget: f64,
    root: NodeRepr,
}

fn box_repr(bounds: &AxisBox) -> BoxRepr {
    BoxRepr {
        lower: bounds.lower_bounds().to_vec(),
        upper: bounds.upper_bounds().to_vec(),
    }
}

fn table_repr(table: &PriorTable) -> TableRepr {
    TableRepr {
        types: table.types().to_vec(),
        markers: table.markers().to_vec(),
        entries: (0..table.n_types())
            .map(|r| table.row(r).iter().map(|l| l.value()).collect())
            .collect(),
    }
}

fn node_repr(node: &Node) -> NodeRepr {
    match node {
        Node::Internal {
            bounds,
            cut,
            left,
            right,
        } => NodeRepr::Internal {
            bounds: box_repr(bounds),
            dim: cut.dim(),
            rel_pos: cut.rel_pos(),
            abs_pos: cut.abs_pos(),
            wait_time: cut.wait_time(),
            children: vec![node_repr(left), node_repr(right)],
        },
        Node::Leaf {
            bounds,
            table,
            gaussian,
        } => NodeRepr::Leaf {
            bounds: box_repr(bounds),
            leaf_table: table_repr(table),
            leaf_gaussian: gaussian.as_ref().map(|g| GaussianRepr {
                mean: g.mean().to_vec(),
                var: g.var().to_vec(),
            }),
        },
    }
}

/// Render a tree as pretty-printed JSON.
pub fn tree_to_json(tree: &MondrianTree) -> Result<String> {
    let repr = TreeRepr {
        budget: tree.budget(),
        root: node_repr(tree.root()),
    };
    serde_json::to_string_pretty(&repr).map_err(|e| Error::Parse(e.to_string()))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= IMPORT_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

fn boxes_close(a: &AxisBox, b: &AxisBox) -> bool {
    a.dims() == b.dims()
        && (0..a.dims()).all(|d| close(a.lower(d), b.lower(d)) && close(a.upper(d), b.upper(d)))
}

fn restore_table(repr: &TableRepr) -> Result<PriorTable> {
    let entries = repr
        .entries
        .iter()
        .map(|row| row.iter().map(|&v| Label::from_value(v)).collect())
        .collect::<Result<Vec<Vec<Label>>>>()?;
    PriorTable::new(repr.types.clone(), repr.markers.clone(), entries)
}

fn restore_node(
    repr: &NodeRepr,
    markers: &mut Option<Vec<String>>,
    budget_left: f64,
) -> Result<Node> {
    match repr {
        NodeRepr::Leaf {
            bounds,
            leaf_table,
            leaf_gaussian,
        } => {
            let bounds = AxisBox::new(bounds.lower.clone(), bounds.upper.clone())?;
            let table = restore_table(leaf_table)?;
            if table.n_markers() != bounds.dims() {
                return Err(Error::Parse(format!(
                    "leaf table has {} markers for a {}-dimensional box",
                    table.n_markers(),
                    bounds.dims()
                )));
            }
            match markers {
                Some(seen) if seen != table.markers() => {
                    return Err(Error::Parse(format!(
                        "leaf tables disagree on markers: {:?} vs {:?}",
                        seen,
                        table.markers()
                    )));
                }
                Some(_) => {}
                None => *markers = Some(table.markers().to_vec()),
            }
            let gaussian = leaf_gaussian
                .as_ref()
                .map(|g| LeafGaussian::new(g.mean.clone(), g.var.clone()))
                .transpose()?;
            if let Some(g) = &gaussian {
                if g.dims() != bounds.dims() {
                    return Err(Error::Parse(format!(
                        "leaf gaussian has {} dimensions for a {}-dimensional box",
                        g.dims(),
                        bounds.dims()
                    )));
                }
            }
            Ok(Node::Leaf {
                bounds,
                table,
                gaussian,
            })
        }
        NodeRepr::Internal {
            bounds,
            dim,
            rel_pos,
            abs_pos,
            wait_time,
            children,
        } => {
            let bounds = AxisBox::new(bounds.lower.clone(), bounds.upper.clone())?;
            if children.len() != 2 {
                return Err(Error::Parse(format!(
                    "internal node has {} children; expected 2",
                    children.len()
                )));
            }
            if *dim >= bounds.dims() {
                return Err(Error::Parse(format!(
                    "cut dimension {dim} out of range for a {}-dimensional box",
                    bounds.dims()
                )));
            }
            if !(rel_pos.is_finite() && *rel_pos > 0.0 && *rel_pos < 1.0) {
                return Err(Error::Parse(format!(
                    "relative cut position {rel_pos} outside (0, 1)"
                )));
            }
            if !(wait_time.is_finite() && *wait_time >= 0.0) {
                return Err(Error::Parse(format!("bad waiting time {wait_time}")));
            }
            if *wait_time > budget_left + IMPORT_TOLERANCE {
                return Err(Error::Parse(format!(
                    "cumulative waiting time exceeds the budget by {}",
                    wait_time - budget_left
                )));
            }
            let expected_abs = bounds.lower(*dim) + rel_pos * bounds.length(*dim);
            if !close(*abs_pos, expected_abs) {
                return Err(Error::Parse(format!(
                    "absolute cut position {abs_pos} disagrees with lower + rel * length = {expected_abs}"
                )));
            }
            let cut = Cut::from_parts(*dim, *rel_pos, *abs_pos, *wait_time);
            let (expected_left, expected_right) = split_box(&bounds, &cut)?;
            let remaining = budget_left - wait_time;
            let left = restore_node(&children[0], markers, remaining)?;
            let right = restore_node(&children[1], markers, remaining)?;
            if !boxes_close(left.bounds(), &expected_left)
                || !boxes_close(right.bounds(), &expected_right)
            {
                return Err(Error::Parse(
                    "child boxes disagree with the parent cut".into(),
                ));
            }
            Ok(Node::Internal {
                bounds,
                cut,
                left: Box::new(left),
                right: Box::new(right),
            })
        }
    }
}

/// Parse a tree from JSON, checking that the stored geometry is
/// self-consistent.
pub fn tree_from_json(text: &str) -> Result<MondrianTree> {
    let repr: TreeRepr = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if !(repr.budget.is_finite() && repr.budget > 0.0) {
        return Err(Error::Parse(format!(
            "budget {} must be finite and positive",
            repr.budget
        )));
    }
    let mut markers = None;
    let root = restore_node(&repr.root, &mut markers, repr.budget)?;
    Ok(MondrianTree::from_root_unchecked(repr.budget, root))
}

#[derive(Debug, Serialize, Deserialize)]
struct SampleRepr {
    chain: usize,
    log_prior: f64,
    log_likelihood: f64,
    tree: TreeRepr,
}

#[derive(Debug, Serialize, Deserialize)]
struct PosteriorRepr {
    markers: Vec<String>,
    samples: Vec<SampleRepr>,
}

/// A reloaded posterior collection.
#[derive(Debug, Clone)]
pub struct PosteriorFile {
    pub markers: Vec<String>,
    pub samples: Vec<PosteriorEntry>,
}

/// One reloaded posterior sample.
#[derive(Debug, Clone)]
pub struct PosteriorEntry {
    pub chain: usize,
    pub log_prior: f64,
    pub log_likelihood: f64,
    pub tree: MondrianTree,
}

impl PosteriorEntry {
    pub fn log_posterior(&self) -> f64 {
        self.log_prior + self.log_likelihood
    }
}

impl PosteriorFile {
    /// Index of the sample with the highest log posterior; exact ties
    /// resolve to the earliest sample.
    pub fn map_index(&self) -> Result<usize> {
        if self.samples.is_empty() {
            return Err(Error::InvalidArgument(
                "posterior holds no samples".into(),
            ));
        }
        let mut best = 0;
        for (i, s) in self.samples.iter().enumerate() {
            if s.log_posterior() > self.samples[best].log_posterior() {
                best = i;
            }
        }
        Ok(best)
    }
}

/// Render a posterior collection (marker names plus one sample per
/// chain) as pretty-printed JSON.
pub fn posterior_to_json(markers: &[String], samples: &[PosteriorSample]) -> Result<String> {
    let repr = PosteriorRepr {
        markers: markers.to_vec(),
        samples: samples
            .iter()
            .map(|s| SampleRepr {
                chain: s.chain,
                log_prior: s.log_prior,
                log_likelihood: s.log_likelihood,
                tree: TreeRepr {
                    budget: s.tree.budget(),
                    root: node_repr(s.tree.root()),
                },
            })
            .collect(),
    };
    serde_json::to_string_pretty(&repr).map_err(|e| Error::Parse(e.to_string()))
}

/// Parse a posterior collection, validating every tree and checking
/// that each agrees with the top-level marker list.
pub fn posterior_from_json(text: &str) -> Result<PosteriorFile> {
    let repr: PosteriorRepr =
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let mut samples = Vec::with_capacity(repr.samples.len());
    for (i, s) in repr.samples.iter().enumerate() {
        if !(s.tree.budget.is_finite() && s.tree.budget > 0.0) {
            return Err(Error::Parse(format!(
                "sample {i}: budget {} must be finite and positive",
                s.tree.budget
            )));
        }
        let mut markers = None;
        let root = restore_node(&s.tree.root, &mut markers, s.tree.budget)?;
        if let Some(tree_markers) = markers {
            if tree_markers != repr.markers {
                return Err(Error::Parse(format!(
                    "sample {i} was fitted on markers {tree_markers:?}, file declares {:?}",
                    repr.markers
                )));
            }
        }
        samples.push(PosteriorEntry {
            chain: s.chain,
            log_prior: s.log_prior,
            log_likelihood: s.log_likelihood,
            tree: MondrianTree::from_root_unchecked(s.tree.budget, root),
        });
    }
    Ok(PosteriorFile {
        markers: repr.markers,
        samples,
    })
}

/// Render a tree in Graphviz DOT form. Internal nodes are labeled with
/// the marker they cut and the absolute position; leaves list their
/// candidate types.
pub fn tree_to_dot(tree: &MondrianTree) -> String {
    let markers = tree
        .leaves()
        .first()
        .map(|l| l.table.markers().to_vec())
        .unwrap_or_default();
    let mut nodes = String::new();
    let mut edges = String::new();
    fn walk(
        node: &Node,
        id: &mut String,
        markers: &[String],
        nodes: &mut String,
        edges: &mut String,
    ) {
        match node {
            Node::Leaf { table, .. } => {
                let label = if table.n_types() == 0 {
                    UNKNOWN_LABEL.to_string()
                } else {
                    table.types().join(", ")
                };
                nodes.push_str(&format!("    {id} [label=\"{label}\", shape=box];\n"));
            }
            Node::Internal {
                cut, left, right, ..
            } => {
                nodes.push_str(&format!(
                    "    {id} [label=\"{} @ {:.3}\"];\n",
                    markers[cut.dim()],
                    cut.abs_pos()
                ));
                for (side, child) in [('L', left), ('R', right)] {
                    id.push(side);
                    edges.push_str(&format!(
                        "    {} -> {id};\n",
                        &id[..id.len() - 1]
                    ));
                    walk(child, id, markers, nodes, edges);
                    id.pop();
                }
            }
        }
    }
    let mut id = String::from("n");
    walk(tree.root(), &mut id, &markers, &mut nodes, &mut edges);
    format!("digraph mondrian {{\n{nodes}{edges}}}\n")
}
