//! Cell data and per-leaf Gaussian emission parameters.
//!
//! Each leaf of a tree owns an axis-aligned Gaussian with diagonal
//! covariance. Cells are hard-assigned to the leaf whose box contains
//! them, and the data log likelihood is the sum of per-cell log
//! densities under their leaf's Gaussian.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{AxisBox, MondrianTree};

/// Relative variance floor: multiplied by the squared root-box side
/// length of each dimension.
pub const VARIANCE_FLOOR_SCALE: f64 = 1e-6;

/// Relative margin added to each side of the observed data range when
/// deriving a fitting domain, so every cell is strictly interior.
pub const DOMAIN_MARGIN: f64 = 1e-3;

const LN_TWO_PI: f64 = 1.837_877_066_409_345_6;

/// Diagonal Gaussian attached to one leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafGaussian {
    mean: Vec<f64>,
    var: Vec<f64>,
}

impl LeafGaussian {
    pub fn new(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        if mean.is_empty() || mean.len() != var.len() {
            return Err(Error::DimensionMismatch(format!(
                "mean has {} dimensions, variance has {}",
                mean.len(),
                var.len()
            )));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidArgument("gaussian mean must be finite".into()));
        }
        if var.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::InvalidArgument(
                "gaussian variances must be finite and positive".into(),
            ));
        }
        Ok(Self { mean, var })
    }

    pub fn dims(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn var(&self) -> &[f64] {
        &self.var
    }

    /// Log density at a point, diagonal covariance.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let mut sum = 0.0;
        for d in 0..self.mean.len() {
            let diff = x[d] - self.mean[d];
            sum += -0.5 * (LN_TWO_PI + self.var[d].ln() + diff * diff / self.var[d]);
        }
        sum
    }
}

/// Dense cell-by-marker matrix with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMatrix {
    markers: Vec<String>,
    values: Vec<f64>, // row-major
    rows: usize,
}

impl CellMatrix {
    pub fn new(markers: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if markers.is_empty() {
            return Err(Error::InvalidArgument(
                "cell data needs at least one marker column".into(),
            ));
        }
        let mut values = Vec::with_capacity(rows.len() * markers.len());
        for (i, row) in rows.iter().enumerate() {
            if row.len() != markers.len() {
                return Err(Error::Parse(format!(
                    "cell {i} has {} values, expected {}",
                    row.len(),
                    markers.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            markers,
            values,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.rows
    }

    pub fn n_markers(&self) -> usize {
        self.markers.len()
    }

    pub fn markers(&self) -> &[String] {
        &self.markers
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.markers.len();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn value(&self, i: usize, dim: usize) -> f64 {
        self.values[i * self.markers.len() + dim]
    }

    /// Reorder columns to match `markers` by name. The sets of names
    /// must agree exactly; anything missing or extra is a hard error.
    pub fn align_to(&self, markers: &[String]) -> Result<CellMatrix> {
        if self.markers == markers {
            return Ok(self.clone());
        }
        let mut order = Vec::with_capacity(markers.len());
        for name in markers {
            match self.markers.iter().position(|m| m == name) {
                Some(idx) => order.push(idx),
                None => {
                    return Err(Error::MarkerMismatch(format!(
                        "cell data is missing marker {name:?}"
                    )))
                }
            }
        }
        if markers.len() != self.markers.len() {
            let extra: Vec<&String> = self
                .markers
                .iter()
                .filter(|m| !markers.contains(m))
                .collect();
            return Err(Error::MarkerMismatch(format!(
                "cell data has extra markers {extra:?}"
            )));
        }
        let mut values = Vec::with_capacity(self.values.len());
        for i in 0..self.rows {
            let row = self.row(i);
            values.extend(order.iter().map(|&d| row[d]));
        }
        Ok(CellMatrix {
            markers: markers.to_vec(),
            values,
            rows: self.rows,
        })
    }

    /// Observed `(min, max)` of one column. Zero cells yield an error.
    pub fn column_range(&self, dim: usize) -> Result<(f64, f64)> {
        if self.rows == 0 {
            return Err(Error::InvalidArgument(
                "cannot take the range of an empty cell matrix".into(),
            ));
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.rows {
            let v = self.value(i, dim);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Ok((lo, hi))
    }

    /// Median of one column (average of the middle pair for even counts).
    pub fn column_median(&self, dim: usize) -> Result<f64> {
        if self.rows == 0 {
            return Err(Error::InvalidArgument(
                "cannot take the median of an empty cell matrix".into(),
            ));
        }
        let mut col: Vec<f64> = (0..self.rows).map(|i| self.value(i, dim)).collect();
        col.sort_by(|a, b| a.partial_cmp(b).expect("non-finite cell value"));
        let n = col.len();
        Ok(if n % 2 == 1 {
            col[n / 2]
        } else {
            0.5 * (col[n / 2 - 1] + col[n / 2])
        })
    }

    /// Parse cells from CSV text with a marker-name header.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::Parse(format!("cell header: {e}")))?
            .clone();
        if headers.is_empty() {
            return Err(Error::Parse("cell data needs a marker header".into()));
        }
        let markers: Vec<String> = headers.iter().map(str::to_owned).collect();
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| Error::Parse(format!("cell row {line}: {e}")))?;
            if record.len() != markers.len() {
                return Err(Error::Parse(format!(
                    "cell row {line} has {} fields, expected {}",
                    record.len(),
                    markers.len()
                )));
            }
            let mut row = Vec::with_capacity(markers.len());
            for (d, field) in record.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| {
                    Error::Parse(format!(
                        "cell row {line}, column {:?}: invalid number {field:?}",
                        markers[d]
                    ))
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse(format!(
                        "cell row {line}, column {:?}: non-finite value",
                        markers[d]
                    )));
                }
                row.push(v);
            }
            rows.push(row);
        }
        CellMatrix::new(markers, rows)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_csv_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = self.markers.join(",");
        out.push('\n');
        for i in 0..self.rows {
            let row = self.row(i);
            for (d, v) in row.iter().enumerate() {
                if d > 0 {
                    out.push(',');
                }
                out.push_str(&format!("{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Fitting domain for a data set: the observed range of every column,
/// expanded a little per side so boundary cells are strictly interior.
pub fn domain_box(data: &CellMatrix) -> Result<AxisBox> {
    let mut lower = Vec::with_capacity(data.n_markers());
    let mut upper = Vec::with_capacity(data.n_markers());
    for d in 0..data.n_markers() {
        let (lo, hi) = data.column_range(d)?;
        if !(hi > lo) {
            return Err(Error::InvalidBox(format!(
                "marker {:?} has zero observed range at {lo}",
                data.markers()[d]
            )));
        }
        let pad = DOMAIN_MARGIN * (hi - lo);
        lower.push(lo - pad);
        upper.push(hi + pad);
    }
    AxisBox::new(lower, upper)
}

/// Hard-assign each cell to the depth-first index of its leaf.
pub fn assign(tree: &MondrianTree, data: &CellMatrix) -> Result<Vec<usize>> {
    if data.n_markers() != tree.dims() {
        return Err(Error::DimensionMismatch(format!(
            "cells have {} markers, tree has {} dimensions",
            data.n_markers(),
            tree.dims()
        )));
    }
    let mut out = Vec::with_capacity(data.n_cells());
    for i in 0..data.n_cells() {
        let idx = tree.leaf_index_of(data.row(i)).map_err(|e| {
            Error::CellOutOfDomain {
                index: i,
                detail: e.to_string(),
            }
        })?;
        out.push(idx);
    }
    Ok(out)
}

/// Maximum-likelihood Gaussian per leaf under the hard assignment.
///
/// Sample variances divide by the member count and are floored at
/// `VARIANCE_FLOOR_SCALE` times the squared root-box side length. A
/// leaf with no members gets its box center as mean and a quarter of
/// each side length as standard deviation; a single member keeps its
/// own coordinates with floored variances.
pub fn fit_leaf_gaussians(tree: &MondrianTree, data: &CellMatrix) -> Result<Vec<LeafGaussian>> {
    let assignments = assign(tree, data)?;
    fit_from_assignments(tree, data, &assignments)
}

pub(crate) fn fit_from_assignments(
    tree: &MondrianTree,
    data: &CellMatrix,
    assignments: &[usize],
) -> Result<Vec<LeafGaussian>> {
    let dims = tree.dims();
    let leaves = tree.leaves();
    let floor: Vec<f64> = (0..dims)
        .map(|d| {
            let len = tree.root_bounds().length(d);
            VARIANCE_FLOOR_SCALE * len * len
        })
        .collect();

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); leaves.len()];
    for (i, &leaf) in assignments.iter().enumerate() {
        members[leaf].push(i);
    }

    let mut params = Vec::with_capacity(leaves.len());
    for (leaf, view) in leaves.iter().enumerate() {
        let cells = &members[leaf];
        let gaussian = match cells.len() {
            0 => {
                let mean = view.bounds.center();
                let var: Vec<f64> = (0..dims)
                    .map(|d| {
                        let sd = view.bounds.length(d) / 4.0;
                        (sd * sd).max(floor[d])
                    })
                    .collect();
                LeafGaussian::new(mean, var)?
            }
            1 => {
                let mean = data.row(cells[0]).to_vec();
                LeafGaussian::new(mean, floor.clone())?
            }
            n => {
                let nf = n as f64;
                let mut mean = vec![0.0; dims];
                for &i in cells {
                    let row = data.row(i);
                    for d in 0..dims {
                        mean[d] += row[d];
                    }
                }
                for m in &mut mean {
                    *m /= nf;
                }
                let mut var = vec![0.0; dims];
                for &i in cells {
                    let row = data.row(i);
                    for d in 0..dims {
                        let diff = row[d] - mean[d];
                        var[d] += diff * diff;
                    }
                }
                for (d, v) in var.iter_mut().enumerate() {
                    *v = (*v / nf).max(floor[d]);
                }
                LeafGaussian::new(mean, var)?
            }
        };
        params.push(gaussian);
    }
    Ok(params)
}

/// Data log likelihood under hard assignment: each cell contributes the
/// log density of its leaf's Gaussian. Cells are summed in index order.
pub fn log_likelihood(
    tree: &MondrianTree,
    data: &CellMatrix,
    params: &[LeafGaussian],
) -> Result<f64> {
    let assignments = assign(tree, data)?;
    log_likelihood_from_assignments(data, params, &assignments, tree.leaf_count())
}

pub(crate) fn log_likelihood_from_assignments(
    data: &CellMatrix,
    params: &[LeafGaussian],
    assignments: &[usize],
    leaf_count: usize,
) -> Result<f64> {
    if params.len() != leaf_count {
        return Err(Error::DimensionMismatch(format!(
            "{} parameter sets for {} leaves",
            params.len(),
            leaf_count
        )));
    }
    let mut total = 0.0;
    for (i, &leaf) in assignments.iter().enumerate() {
        total += params[leaf].log_density(data.row(i));
    }
    Ok(total)
}

/// One-pass convenience: assign, fit, and evaluate the log likelihood.
pub fn fit_and_log_likelihood(
    tree: &MondrianTree,
    data: &CellMatrix,
) -> Result<(Vec<LeafGaussian>, f64)> {
    let assignments = assign(tree, data)?;
    let params = fit_from_assignments(tree, data, &assignments)?;
    let ll = log_likelihood_from_assignments(data, &params, &assignments, tree.leaf_count())?;
    Ok((params, ll))
}
