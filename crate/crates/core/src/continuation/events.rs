//! Event location along an accepted step: crossings of `eps = 0`, tangential
//! touches of that slice, and branch points.

use crate::error::{Error, Result};
use crate::numerics::{least_squares, DenseMatrix, Vector};
use crate::problem::{Problem, SolutionPoint};

use super::corrector::{bordered_determinant, correct_state, kernel_info, tangent_along};
use super::{BranchEvent, ContinuationSettings, EventKind, TRIVIAL_EPS_TOL};

const BISECTION_STEPS: usize = 60;

/// A corrected point at pseudo-arclength offset `sigma` from `a` along `t_a`.
#[derive(Debug, Clone)]
pub(crate) struct Probe {
    pub point: SolutionPoint,
    pub tangent: Vector,
}

pub(crate) fn probe(
    p: &Problem,
    a: &Vector,
    t_a: &Vector,
    sigma: f64,
    cfg: &ContinuationSettings,
) -> Result<Probe> {
    let q = a + t_a * sigma;
    let tight = correct_state(p, q.clone(), &q, t_a, cfg.newton_tol * 1e-2, 3 * cfg.newton_max_iter, cfg.fd_step);
    let c = match tight {
        Ok(c) => c,
        Err(_) => correct_state(p, q.clone(), &q, t_a, cfg.newton_tol, 3 * cfg.newton_max_iter, cfg.fd_step)?,
    };
    let (tangent, _) = tangent_along(p, &c.point, t_a, cfg)?;
    Ok(Probe {
        point: c.point,
        tangent,
    })
}

/// Polishes a crossing of `eps = 0` between consecutive accepted points by
/// Newton in `(x, lambda)` with `eps` frozen at zero, starting from the secant
/// estimate. Returns the point and whether it is only the secant estimate.
pub fn locate_trivial_crossing(
    p: &Problem,
    a: &SolutionPoint,
    b: &SolutionPoint,
    cfg: &ContinuationSettings,
) -> Result<(SolutionPoint, bool)> {
    if a.eps == 0.0 {
        return Ok((a.clone(), false));
    }
    if b.eps == 0.0 {
        return Ok((b.clone(), false));
    }
    let n = p.dim();
    let w = a.eps / (a.eps - b.eps);
    let za = a.to_state();
    let secant = &za + (b.to_state() - &za) * w;
    let mut s = SolutionPoint::from_state(&secant);
    s.eps = 0.0;
    let secant_point = s.clone();

    let mut best: Option<(f64, SolutionPoint)> = None;
    for _ in 0..40 {
        let r = p.augmented_residual(&s)?;
        let res = p.residual_norm(&r)?;
        if best.as_ref().is_none_or(|(b, _)| res < *b) {
            best = Some((res, s.clone()));
        }
        if res <= cfg.newton_tol * 1e-3 || !res.is_finite() {
            break;
        }
        let j = p.jacobian_with(&s, cfg.fd_step)?;
        let mut jr = DenseMatrix::zeros(n + 1, n + 1);
        jr.view_mut((0, 0), (n + 1, n)).copy_from(&j.view((0, 0), (n + 1, n)));
        jr.set_column(n, &j.column(n + 1));
        let delta = least_squares(&jr, &r, cfg.rank_rel_tol)?.minimizer;
        s.x -= delta.rows(0, n);
        s.lambda -= delta[n];
    }
    match best {
        Some((res, pt)) if res <= cfg.newton_tol => Ok((pt, false)),
        _ => Ok((secant_point, true)),
    }
}

/// Finds the extremum of `eps` between `a` and `b` (where the tangent's
/// eps-component changes sign) by bisection on that sign.
pub(crate) fn refine_eps_extremum(
    p: &Problem,
    a: &SolutionPoint,
    t_a: &Vector,
    b: &SolutionPoint,
    cfg: &ContinuationSettings,
) -> Result<SolutionPoint> {
    let n = p.dim();
    let za = a.to_state();
    let hi_sigma = (b.to_state() - &za).dot(t_a);
    let sign_a = t_a[n].signum();
    let (mut lo, mut hi) = (0.0, hi_sigma);
    let mut best = if a.eps.abs() <= b.eps.abs() { a.clone() } else { b.clone() };
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let Ok(pr) = probe(p, &za, t_a, mid, cfg) else {
            break;
        };
        if pr.point.eps.abs() < best.eps.abs() {
            best = pr.point.clone();
        }
        if pr.tangent[n].signum() == sign_a {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    Ok(best)
}

/// Looks for a branch point between consecutive accepted points using the
/// sign of the bordered determinant and the smallest singular value at `b`.
pub fn detect_branch_point(
    p: &Problem,
    a: &SolutionPoint,
    b: &SolutionPoint,
    t_a: &Vector,
    t_b: &Vector,
    cfg: &ContinuationSettings,
) -> Result<Option<BranchEvent>> {
    let tau_a = bordered_determinant(p, a, t_a, cfg)?;
    let tau_b = bordered_determinant(p, b, t_b, cfg)?;
    let sigma_b = kernel_info(p, b, cfg)?.sigma_min;
    detect_with(p, a, t_a, b, t_b, tau_a, tau_b, sigma_b, cfg)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn detect_with(
    p: &Problem,
    a: &SolutionPoint,
    t_a: &Vector,
    b: &SolutionPoint,
    t_b: &Vector,
    tau_a: f64,
    tau_b: f64,
    sigma_b: f64,
    cfg: &ContinuationSettings,
) -> Result<Option<BranchEvent>> {
    let sign_change = tau_a * tau_b < 0.0;
    if !sign_change {
        if sigma_b < cfg.branch_point_tol {
            return Ok(Some(bp_event(b.clone(), t_b.clone())));
        }
        return Ok(None);
    }
    let za = a.to_state();
    let hi_sigma = (b.to_state() - &za).dot(t_a);
    let sign_a = tau_a.signum();
    let (mut lo, mut hi) = (0.0, hi_sigma);
    let mut loc = Probe {
        point: b.clone(),
        tangent: t_b.clone(),
    };
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let Ok(pr) = probe(p, &za, t_a, mid, cfg) else {
            break;
        };
        let tau = bordered_determinant(p, &pr.point, &pr.tangent, cfg)?;
        if tau.signum() == sign_a {
            lo = mid;
        } else {
            hi = mid;
        }
        loc = pr;
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok(Some(bp_event(loc.point, loc.tangent)))
}

fn bp_event(location: SolutionPoint, tangent: Vector) -> BranchEvent {
    BranchEvent {
        kind: EventKind::BranchPoint,
        location,
        step_index: 0,
        arclength: 0.0,
        degraded: false,
        tangent: Some(tangent),
    }
}

/// Result of stepping across a branch point along the incoming tangent.
#[derive(Debug, Clone)]
pub struct PastBranchPoint {
    pub point: SolutionPoint,
    pub tangent: Vector,
    /// Orthonormal basis of the approximate two-dimensional kernel at the branch point.
    pub kernel: [Vector; 2],
}

/// Steps `2 h0` past a branch point along `incoming`, corrects with the frozen
/// incoming-tangent constraint, and reports the local two-dimensional kernel.
pub fn continue_past_branch_point(
    p: &Problem,
    ev: &BranchEvent,
    incoming: &Vector,
    cfg: &ContinuationSettings,
) -> Result<PastBranchPoint> {
    if ev.kind != EventKind::BranchPoint {
        return Err(Error::InvalidInput("event is not a branch point".into()));
    }
    let t_in = incoming.normalize();
    let z = ev.location.to_state();
    let q = &z + &t_in * (2.0 * cfg.h0);
    let c = correct_state(p, q.clone(), &q, &t_in, cfg.newton_tol, cfg.newton_max_iter, cfg.fd_step)?;
    let (tangent, _) = tangent_along(p, &c.point, &t_in, cfg)?;
    Ok(PastBranchPoint {
        point: c.point,
        tangent,
        kernel: local_kernel(p, &ev.location, cfg)?,
    })
}

pub(crate) fn local_kernel(p: &Problem, s: &SolutionPoint, cfg: &ContinuationSettings) -> Result<[Vector; 2]> {
    let info = kernel_info(p, s, cfg)?;
    let k0 = info.smallest.normalize();
    let k1 = &info.second - &k0 * k0.dot(&info.second);
    Ok([k0, k1.normalize()])
}

/// The kernel direction orthogonal to the incoming tangent.
pub(crate) fn secondary_direction(kernel: &[Vector; 2], incoming: &Vector) -> Vector {
    let t = incoming.normalize();
    let cands: Vec<Vector> = kernel.iter().map(|k| k - &t * t.dot(k)).collect();
    let best = if cands[0].norm() >= cands[1].norm() { &cands[0] } else { &cands[1] };
    best.normalize()
}

pub(crate) fn is_trivial(s: &SolutionPoint) -> bool {
    s.eps.abs() <= TRIVIAL_EPS_TOL
}
