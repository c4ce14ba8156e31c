//! Eigenpair set `{(eps, lambda) : Ker(L + eps N - lambda C) != 0}` for linear `N`.
//!
//! The field `sign(det M) * sigma_min(M)` changes sign across simple zeros of
//! the determinant, so its zero contour is extracted by marching squares.
//! Zeros without a sign change (isolated eigenpairs) are bracketed by the
//! Lipschitz bound `|d sigma_min| <= |N| |d eps| + |C| |d lambda|`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::numerics::{det_sign, min_singular_values, svd};
use crate::parallel::{map_range, Execution};
use crate::problem::Problem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanWindow {
    pub eps: (f64, f64),
    pub lambda: (f64, f64),
    /// Grid nodes along eps and lambda.
    pub grid: (usize, usize),
}

impl ScanWindow {
    pub fn new(eps: (f64, f64), lambda: (f64, f64), grid: (usize, usize)) -> Result<Self> {
        if grid.0 < 16 || grid.1 < 16 {
            return Err(Error::InvalidInput(format!(
                "scan grid {}x{} is below the 16x16 minimum",
                grid.0, grid.1
            )));
        }
        if !(eps.0 < eps.1 && lambda.0 < lambda.1) {
            return Err(Error::InvalidInput("scan window bounds must be increasing".into()));
        }
        Ok(Self { eps, lambda, grid })
    }

    pub fn cell_size(&self) -> (f64, f64) {
        (
            (self.eps.1 - self.eps.0) / (self.grid.0 - 1) as f64,
            (self.lambda.1 - self.lambda.0) / (self.grid.1 - 1) as f64,
        )
    }

    fn node(&self, i: usize, j: usize) -> (f64, f64) {
        let (de, dl) = self.cell_size();
        (self.eps.0 + i as f64 * de, self.lambda.0 + j as f64 * dl)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pub points: Vec<(f64, f64)>,
    pub closed: bool,
}

/// A grid cell that may contain a zero of `sigma_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroCell {
    pub eps: (f64, f64),
    pub lambda: (f64, f64),
    pub max_corner_sigma: f64,
}

impl ZeroCell {
    pub fn contains(&self, eps: f64, lambda: f64, margin_cells: f64, cell: (f64, f64)) -> bool {
        eps >= self.eps.0 - margin_cells * cell.0
            && eps <= self.eps.1 + margin_cells * cell.0
            && lambda >= self.lambda.0 - margin_cells * cell.1
            && lambda <= self.lambda.1 + margin_cells * cell.1
    }
}

#[derive(Debug, Clone)]
pub struct ScanResult {
    pub window: ScanWindow,
    /// `sigma_min` at the nodes, indexed `[i * grid.1 + j]` for eps index `i`, lambda index `j`.
    pub sigma_min: Vec<f64>,
    pub polylines: Vec<Polyline>,
    pub zero_cells: Vec<ZeroCell>,
}

pub fn eigenpair_scan(p: &Problem, window: &ScanWindow, exec: Execution) -> Result<ScanResult> {
    let dim = p.dim();
    let n_mat = p.nonlinear().linear_matrix(dim)?;
    let l = p.l_matrix();
    let c = p.c_matrix();
    let n_norm = svd(&n_mat)?.sigma_max();
    let c_norm = svd(c)?.sigma_max();
    let (ne, nl) = window.grid;

    let rows: Vec<Result<Vec<(f64, f64)>>> = map_range(exec, ne, |i| {
        (0..nl)
            .map(|j| {
                let (eps, lam) = window.node(i, j);
                let m = l + &n_mat * eps - c * lam;
                let smin = min_singular_values(&m, 1)?[0];
                Ok((smin, det_sign(&m) * smin))
            })
            .collect()
    });
    let mut sigma = Vec::with_capacity(ne * nl);
    let mut field = Vec::with_capacity(ne * nl);
    for row in rows {
        for (s, f) in row? {
            sigma.push(s);
            field.push(f);
        }
    }

    let polylines = marching_squares(&field, window);

    let (de, dl) = window.cell_size();
    let bound = n_norm * de + c_norm * dl;
    let mut zero_cells = Vec::new();
    for i in 0..ne - 1 {
        for j in 0..nl - 1 {
            let corners = [
                sigma[i * nl + j],
                sigma[(i + 1) * nl + j],
                sigma[i * nl + j + 1],
                sigma[(i + 1) * nl + j + 1],
            ];
            let worst = corners.iter().copied().fold(0.0, f64::max);
            if worst <= bound {
                let (e0, l0) = window.node(i, j);
                zero_cells.push(ZeroCell {
                    eps: (e0, e0 + de),
                    lambda: (l0, l0 + dl),
                    max_corner_sigma: worst,
                });
            }
        }
    }

    Ok(ScanResult {
        window: *window,
        sigma_min: sigma,
        polylines,
        zero_cells,
    })
}

/// Zero contour of a node field over the window, stitched into polylines.
/// `field[i * grid.1 + j]` holds the value at eps index `i`, lambda index `j`.
pub fn marching_squares(field: &[f64], window: &ScanWindow) -> Vec<Polyline> {
    let (ne, nl) = window.grid;
    assert_eq!(field.len(), ne * nl, "field does not match the grid");
    let at = |i: usize, j: usize| field[i * nl + j];
    let inside = |v: f64| v > 0.0;

    // Edge ids: horizontal (along eps) edges from node (i,j) to (i+1,j) and
    // vertical edges from (i,j) to (i,j+1).
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
    enum Edge {
        E(usize, usize),
        L(usize, usize),
    }
    let crossing = |e: Edge| -> (f64, f64) {
        let ((i0, j0), (i1, j1)) = match e {
            Edge::E(i, j) => ((i, j), (i + 1, j)),
            Edge::L(i, j) => ((i, j), (i, j + 1)),
        };
        let (f0, f1) = (at(i0, j0), at(i1, j1));
        let t = f0 / (f0 - f1);
        let (a, b) = (window.node(i0, j0), window.node(i1, j1));
        (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1))
    };

    let mut segments: Vec<(Edge, Edge)> = Vec::new();
    for i in 0..ne - 1 {
        for j in 0..nl - 1 {
            // corners counter-clockwise: (i,j), (i+1,j), (i+1,j+1), (i,j+1)
            let v = [at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)];
            let edges = [Edge::E(i, j), Edge::L(i + 1, j), Edge::E(i, j + 1), Edge::L(i, j)];
            let mask = v
                .iter()
                .enumerate()
                .fold(0u8, |m, (k, &x)| if inside(x) { m | (1 << k) } else { m });
            let cut: Vec<usize> = (0..4).filter(|&k| inside(v[k]) != inside(v[(k + 1) % 4])).collect();
            match cut.len() {
                2 => segments.push((edges[cut[0]], edges[cut[1]])),
                4 => {
                    // saddle: pair edges so the centre value decides connectivity
                    let centre = v.iter().sum::<f64>() / 4.0;
                    let corner0_inside = mask & 1 != 0;
                    if inside(centre) == corner0_inside {
                        segments.push((edges[0], edges[1]));
                        segments.push((edges[2], edges[3]));
                    } else {
                        segments.push((edges[3], edges[0]));
                        segments.push((edges[1], edges[2]));
                    }
                }
                _ => {}
            }
        }
    }

    let mut by_edge: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (k, &(a, b)) in segments.iter().enumerate() {
        by_edge.entry(a).or_default().push(k);
        by_edge.entry(b).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let mut out = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (a, b) = segments[start];
        let mut chain = std::collections::VecDeque::from([a, b]);
        // extend forward from the tail, then backward from the head
        for forward in [true, false] {
            loop {
                let end = if forward { *chain.back().unwrap() } else { *chain.front().unwrap() };
                let next = by_edge[&end].iter().copied().find(|&s| !used[s]);
                let Some(s) = next else { break };
                used[s] = true;
                let (x, y) = segments[s];
                let other = if x == end { y } else { x };
                if forward {
                    chain.push_back(other);
                } else {
                    chain.push_front(other);
                }
            }
        }
        let closed = chain.len() > 2 && chain.front() == chain.back();
        if closed {
            chain.pop_back();
        }
        out.push(Polyline {
            points: chain.into_iter().map(crossing).collect(),
            closed,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_field_gives_one_closed_contour() {
        let w = ScanWindow::new((-2.0, 2.0), (-2.0, 2.0), (64, 64)).unwrap();
        let (ne, nl) = w.grid;
        let field: Vec<f64> = (0..ne * nl)
            .map(|k| {
                let (e, l) = w.node(k / nl, k % nl);
                e.hypot(l) - 1.0
            })
            .collect();
        let lines = marching_squares(&field, &w);
        assert_eq!(lines.len(), 1);
        assert!(lines[0].closed);
        let cell = w.cell_size().0;
        for &(e, l) in &lines[0].points {
            assert!((e.hypot(l) - 1.0).abs() < cell);
        }
    }

    #[test]
    fn two_disjoint_circles() {
        let w = ScanWindow::new((-3.0, 3.0), (-1.5, 1.5), (80, 40)).unwrap();
        let (ne, nl) = w.grid;
        let field: Vec<f64> = (0..ne * nl)
            .map(|k| {
                let (e, l) = w.node(k / nl, k % nl);
                ((e - 1.5).hypot(l) - 0.8).min((e + 1.5).hypot(l) - 0.8)
            })
            .collect();
        let lines = marching_squares(&field, &w);
        assert_eq!(lines.len(), 2);
        assert!(lines.iter().all(|p| p.closed));
    }

    #[test]
    fn small_grid_rejected() {
        assert!(ScanWindow::new((-1.0, 1.0), (-1.0, 1.0), (8, 32)).is_err());
    }
}
