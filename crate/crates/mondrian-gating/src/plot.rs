//! SVG scatter plots of cells with posterior cuts drawn over them.
//!
//! Plots project onto two chosen markers. For every tree in the sample
//! collection, every cut along one of the plotted dimensions appears as
//! a blue segment spanning its box's extent in the other plotted
//! dimension; cuts along unplotted dimensions are left out. Cells are
//! black dots, and the domain box becomes the plot frame. Layout is a
//! pure function of the inputs.

use crate::emissions::CellMatrix;
use crate::error::{Error, Result};
use crate::geom::MondrianTree;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 800.0;
/// Margin on every side, five percent of the canvas.
const MARGIN: f64 = 40.0;
const DOT_RADIUS: f64 = 2.0;

struct Frame {
    x_lo: f64,
    x_len: f64,
    y_lo: f64,
    y_len: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        MARGIN + (v - self.x_lo) / self.x_len * (WIDTH - 2.0 * MARGIN)
    }

    fn y(&self, v: f64) -> f64 {
        // SVG grows downward; data grows upward.
        HEIGHT - MARGIN - (v - self.y_lo) / self.y_len * (HEIGHT - 2.0 * MARGIN)
    }
}

/// Render `data` projected on (`dim_x`, `dim_y`) with every sampled
/// cut overlaid, as a standalone 800x800 SVG document.
pub fn render_posterior_cuts(
    samples: &[&MondrianTree],
    data: &CellMatrix,
    dim_x: usize,
    dim_y: usize,
) -> Result<String> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidArgument("plotting needs at least one tree".into()))?;
    let dims = first.dims();
    if dim_x >= dims || dim_y >= dims {
        return Err(Error::InvalidArgument(format!(
            "plot dimensions ({dim_x}, {dim_y}) out of range for a {dims}-dimensional tree"
        )));
    }
    if dim_x == dim_y {
        return Err(Error::InvalidArgument(
            "plot dimensions must differ".into(),
        ));
    }
    if data.n_markers() != dims {
        return Err(Error::DimensionMismatch(format!(
            "cells have {} markers, trees have {dims} dimensions",
            data.n_markers()
        )));
    }
    if samples.iter().any(|t| t.dims() != dims) {
        return Err(Error::DimensionMismatch(
            "posterior trees disagree on dimensionality".into(),
        ));
    }

    let bounds = first.root_bounds();
    let frame = Frame {
        x_lo: bounds.lower(dim_x),
        x_len: bounds.length(dim_x),
        y_lo: bounds.lower(dim_y),
        y_len: bounds.length(dim_y),
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str(&format!(
        "  <rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{:.3}\" height=\"{:.3}\" \
         fill=\"none\" stroke=\"black\"/>\n",
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    ));

    for i in 0..data.n_cells() {
        let row = data.row(i);
        svg.push_str(&format!(
            "  <circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"{DOT_RADIUS}\" fill=\"black\"/>\n",
            frame.x(row[dim_x]),
            frame.y(row[dim_y])
        ));
    }

    for tree in samples {
        for (cut_bounds, cut) in tree.cuts() {
            if cut.dim() == dim_x {
                let x = frame.x(cut.abs_pos());
                svg.push_str(&format!(
                    "  <line x1=\"{x:.3}\" y1=\"{:.3}\" x2=\"{x:.3}\" y2=\"{:.3}\" \
                     stroke=\"blue\" stroke-width=\"1\"/>\n",
                    frame.y(cut_bounds.lower(dim_y)),
                    frame.y(cut_bounds.upper(dim_y))
                ));
            } else if cut.dim() == dim_y {
                let y = frame.y(cut.abs_pos());
                svg.push_str(&format!(
                    "  <line x1=\"{:.3}\" y1=\"{y:.3}\" x2=\"{:.3}\" y2=\"{y:.3}\" \
                     stroke=\"blue\" stroke-width=\"1\"/>\n",
                    frame.x(cut_bounds.lower(dim_x)),
                    frame.x(cut_bounds.upper(dim_x))
                ));
            }
        }
    }

    let markers = data.markers();
    svg.push_str(&format!(
        "  <text x=\"{:.3}\" y=\"{:.3}\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        WIDTH / 2.0,
        HEIGHT - MARGIN / 4.0,
        markers[dim_x]
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.3}\" y=\"{:.3}\" text-anchor=\"middle\" font-size=\"14\" \
         transform=\"rotate(-90 {:.3} {:.3})\">{}</text>\n",
        MARGIN / 4.0,
        HEIGHT / 2.0,
        MARGIN / 4.0,
        HEIGHT / 2.0,
        markers[dim_y]
    ));
    svg.push_str("</svg>\n");
    Ok(svg)
}
