//! Comma-separated branch and contour tables.
//!
//! Numbers are written with `f64`'s shortest round-trip formatting, so a table
//! read back reproduces the traced points bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::continuation::{Branch, Polyline, ZeroCell};
use crate::error::{Error, Result};
use crate::numerics::Vector;
use crate::problem::SolutionPoint;

/// One row of a branch table.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchRow {
    pub step: usize,
    pub arclength: f64,
    pub point: SolutionPoint,
}

pub fn branch_csv(branch: &Branch) -> String {
    let dim = branch.points.first().map_or(0, SolutionPoint::dim);
    let mut out = String::from("step,arclength,eps,lambda");
    for i in 0..dim {
        let _ = write!(out, ",x{i}");
    }
    out.push('\n');
    for (k, (s, arc)) in branch.points.iter().zip(&branch.arclengths).enumerate() {
        let _ = write!(out, "{k},{arc},{},{}", s.eps, s.lambda);
        for v in s.x.iter() {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn parse_branch_csv(text: &str) -> Result<Vec<BranchRow>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidInput("empty branch table".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 5 || cols[..4] != ["step", "arclength", "eps", "lambda"] {
        return Err(Error::InvalidInput(format!("unexpected branch table header '{header}'")));
    }
    let dim = cols.len() - 4;
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = |what: &str| Error::InvalidInput(format!("branch table row {}: {what}", i + 1));
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != dim + 4 {
                return Err(bad("wrong column count"));
            }
            let step = fields[0].parse().map_err(|_| bad("bad step index"))?;
            let nums = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| bad("bad number")))
                .collect::<Result<Vec<_>>>()?;
            Ok(BranchRow {
                step,
                arclength: nums[0],
                point: SolutionPoint::new(Vector::from_column_slice(&nums[3..]), nums[1], nums[2]),
            })
        })
        .collect()
}

pub fn read_branch_csv(path: &Path) -> Result<Vec<BranchRow>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    parse_branch_csv(&text)
}

/// `eps,lambda` rows; polylines are separated by a blank line.
pub fn polylines_csv(polylines: &[Polyline]) -> String {
    let mut out = String::from("eps,lambda\n");
    for (i, pl) in polylines.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for &(e, l) in &pl.points {
            let _ = writeln!(out, "{e},{l}");
        }
    }
    out
}

pub fn zero_cells_csv(cells: &[ZeroCell]) -> String {
    let mut out = String::from("eps_lo,eps_hi,lambda_lo,lambda_hi,max_corner_sigma\n");
    for c in cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            c.eps.0, c.eps.1, c.lambda.0, c.lambda.1, c.max_corner_sigma
        );
    }
    out
}
