//! Pseudo-arclength tracing of solution branches in `S x R x R`.

mod corrector;
mod events;
mod scan;
mod settings;
mod trace;

use serde::Serialize;

pub use corrector::{newton_correct, Corrected};
pub use events::{continue_past_branch_point, detect_branch_point, locate_trivial_crossing, PastBranchPoint};
pub use scan::{eigenpair_scan, marching_squares, Polyline, ScanResult, ScanWindow, ZeroCell};
pub use settings::ContinuationSettings;
pub use trace::{initial_tangent, trace_branch, trace_from, trace_secondary};

use crate::error::Result;
use crate::numerics::Vector;
use crate::problem::{Problem, SolutionPoint};

/// `|eps|` below which a point counts as lying on the slice `eps = 0`.
pub const TRIVIAL_EPS_TOL: f64 = 1e-9;
/// Events closer than this to `(eps, lambda) = (0, 0)` make the winding number undefined.
const ORIGIN_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Orientation {
    Forward,
    Backward,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Forward => 1.0,
            Orientation::Backward => -1.0,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "+" | "+1" | "forward" => Some(Self::Forward),
            "-" | "\u{2212}" | "-1" | "backward" => Some(Self::Backward),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EventKind {
    TrivialCrossing,
    BranchPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchEvent {
    pub kind: EventKind,
    pub location: SolutionPoint,
    /// Index of the accepted point that closes the step containing the event.
    pub step_index: usize,
    /// Arclength along the branch at which the event sits.
    pub arclength: f64,
    /// Set when a crossing could not be polished and the secant estimate was kept.
    pub degraded: bool,
    /// Incoming unit tangent; recorded for branch points so secondary traces can be launched.
    pub tangent: Option<Vector>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    ClosedLoop,
    Escaped,
    SingularStall,
    MaxSteps,
}

#[derive(Debug, Clone)]
pub struct Branch {
    pub points: Vec<SolutionPoint>,
    pub tangents: Vec<Vector>,
    /// Cumulative chord length at each accepted point.
    pub arclengths: Vec<f64>,
    pub events: Vec<BranchEvent>,
    pub termination: Termination,
    pub arclength: f64,
}

impl Branch {
    pub fn crossings(&self) -> impl Iterator<Item = &BranchEvent> {
        self.events.iter().filter(|e| e.kind == EventKind::TrivialCrossing)
    }

    pub fn branch_points(&self) -> impl Iterator<Item = &BranchEvent> {
        self.events.iter().filter(|e| e.kind == EventKind::BranchPoint)
    }

    pub fn crossing_lambdas(&self) -> Vec<f64> {
        self.crossings().map(|e| e.location.lambda).collect()
    }

    /// Winding number of the `(eps, lambda)` projection about the origin, for closed loops.
    /// `None` when the branch is open or its projection passes through the origin.
    pub fn winding_number(&self) -> Option<i64> {
        if self.termination != Termination::ClosedLoop {
            return None;
        }
        if self.events.iter().any(|e| e.location.eps.hypot(e.location.lambda) <= ORIGIN_TOL) {
            return None;
        }
        let pts: Vec<(f64, f64)> = self.points.iter().map(|s| (s.eps, s.lambda)).collect();
        winding_number(&pts)
    }

    /// Distance (in arclength) from `arc` to the nearest branch-point event.
    pub fn arclength_to_branch_point(&self, arc: f64) -> f64 {
        self.branch_points()
            .map(|e| (e.arclength - arc).abs())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Winding number of a closed polygon about the origin from summed signed angle increments.
pub fn winding_number(points: &[(f64, f64)]) -> Option<i64> {
    if points.len() < 3 {
        return None;
    }
    let scale = points.iter().map(|&(a, b)| a.hypot(b)).fold(0.0, f64::max);
    if points.iter().any(|&(a, b)| a.hypot(b) <= 1e-9 * scale.max(1.0)) {
        return None;
    }
    let mut total = 0.0;
    for (i, &(x0, y0)) in points.iter().enumerate() {
        let (x1, y1) = points[(i + 1) % points.len()];
        total += (x0 * y1 - y0 * x1).atan2(x0 * x1 + y0 * y1);
    }
    let turns = total / std::f64::consts::TAU;
    let rounded = turns.round();
    ((turns - rounded).abs() < 1e-6).then_some(rounded as i64)
}

/// Worst-case invariants over the accepted points of a branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchCheck {
    pub max_phi_norm: f64,
    pub max_sphere_defect: f64,
    /// `max |J(s_k) t_k|`; zero when no tangents are available.
    pub max_tangent_residual: f64,
    /// `min <t_k, t_{k+1}>`; `1` when fewer than two tangents are available.
    pub min_tangent_dot: f64,
}

pub fn check_branch(p: &Problem, b: &Branch, cfg: &ContinuationSettings) -> Result<BranchCheck> {
    let mut out = check_points(p, &b.points)?;
    for (s, t) in b.points.iter().zip(&b.tangents) {
        let j = p.jacobian_with(s, cfg.fd_step)?;
        out.max_tangent_residual = out.max_tangent_residual.max((j * t).norm());
    }
    for w in b.tangents.windows(2) {
        out.min_tangent_dot = out.min_tangent_dot.min(w[0].dot(&w[1]));
    }
    Ok(out)
}

/// Residual and sphere checks for bare points (e.g. re-read from a table).
pub fn check_points(p: &Problem, points: &[SolutionPoint]) -> Result<BranchCheck> {
    let mut out = BranchCheck {
        max_phi_norm: 0.0,
        max_sphere_defect: 0.0,
        max_tangent_residual: 0.0,
        min_tangent_dot: 1.0,
    };
    for s in points {
        out.max_phi_norm = out.max_phi_norm.max(p.phi_norm(s)?);
        out.max_sphere_defect = out.max_sphere_defect.max(p.sphere_defect(&s.x)?.abs());
    }
    Ok(out)
}
