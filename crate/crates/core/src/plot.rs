//! SVG scatter plots of 2-D embeddings.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::ArrayView2;

use crate::error::{Error, Result};

pub const VIEWBOX: f64 = 800.0;
pub const MARGIN_FRACTION: f64 = 0.05;
pub const POINT_RADIUS: f64 = 2.0;

/// Categorical 10-color palette, cycled by label value.
pub const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

/// Writes an 800x800 SVG scatter of a 2-D embedding, one circle per point,
/// colored by label when labels are given. Axes are autoscaled with a 5%
/// margin.
pub fn write_scatter_svg(path: &Path, y: ArrayView2<f64>, labels: Option<&[i64]>) -> Result<()> {
    if y.ncols() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: y.ncols(),
            context: "plot input columns".into(),
        });
    }
    if y.nrows() == 0 {
        return Err(Error::DatasetTooSmall { need: 1, have: 0 });
    }
    if let Some(l) = labels {
        if l.len() != y.nrows() {
            return Err(Error::DimensionMismatch {
                expected: y.nrows(),
                got: l.len(),
                context: "plot labels".into(),
            });
        }
    }
    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for row in y.outer_iter() {
        min_x = min_x.min(row[0]);
        max_x = max_x.max(row[0]);
        min_y = min_y.min(row[1]);
        max_y = max_y.max(row[1]);
    }
    let pad = |lo: f64, hi: f64| {
        let span = hi - lo;
        if span == 0.0 {
            (lo - 1.0, hi + 1.0)
        } else {
            (lo - span * MARGIN_FRACTION, hi + span * MARGIN_FRACTION)
        }
    };
    let (lo_x, hi_x) = pad(min_x, max_x);
    let (lo_y, hi_y) = pad(min_y, max_y);
    let scale_x = VIEWBOX / (hi_x - lo_x);
    let scale_y = VIEWBOX / (hi_y - lo_y);

    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    let io = |e: std::io::Error| Error::io(path, e);
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {VIEWBOX} {VIEWBOX}\" width=\"{VIEWBOX}\" height=\"{VIEWBOX}\">"
    )
    .map_err(io)?;
    writeln!(out, "<rect width=\"{VIEWBOX}\" height=\"{VIEWBOX}\" fill=\"white\"/>").map_err(io)?;
    for (i, row) in y.outer_iter().enumerate() {
        let cx = (row[0] - lo_x) * scale_x;
        // SVG y axis points down.
        let cy = VIEWBOX - (row[1] - lo_y) * scale_y;
        let color = match labels {
            Some(l) => PALETTE[(l[i].rem_euclid(PALETTE.len() as i64)) as usize],
            None => PALETTE[0],
        };
        writeln!(
            out,
            "<circle cx=\"{cx:.3}\" cy=\"{cy:.3}\" r=\"{POINT_RADIUS}\" fill=\"{color}\" fill-opacity=\"0.8\"/>"
        )
        .map_err(io)?;
    }
    writeln!(out, "</svg>").map_err(io)?;
    out.flush().map_err(io)?;
    Ok(())
}
