use crate::error::{Error, Result};
use crate::numerics::{kernel_basis, Vector};
use crate::problem::{Problem, SolutionPoint};

use super::corrector::{bordered_determinant, correct_state, kernel_info, orient, tangent_along};
use super::events::{
    continue_past_branch_point, detect_with, is_trivial, local_kernel, locate_trivial_crossing,
    refine_eps_extremum, secondary_direction,
};
use super::{Branch, BranchEvent, ContinuationSettings, EventKind, Orientation, Termination};

/// Newton iteration count at or below which a step counts as easy.
const EASY_ITERATIONS: usize = 3;
const STEP_GROWTH: f64 = 1.3;
/// Minimum cosine between consecutive tangents for a step to be accepted.
const MIN_TANGENT_COS: f64 = 0.5;

/// Unit kernel vector of the augmented Jacobian at `s0`, oriented so that its
/// eps-component has the sign of `orient`. A trivial start needs a
/// one-dimensional `Ker(L - lambda C)`.
pub fn initial_tangent(
    p: &Problem,
    s0: &SolutionPoint,
    orient: Orientation,
    cfg: &ContinuationSettings,
) -> Result<Vector> {
    let res = p.residual_norm(&p.augmented_residual(s0)?)?;
    if res > cfg.newton_tol {
        return Err(Error::InvalidInput(format!(
            "start point is not a solution (residual {res:.3e} > {:.1e})",
            cfg.newton_tol
        )));
    }
    if is_trivial(s0) {
        let a = p.l_matrix() - p.c_matrix() * s0.lambda;
        let kernel_dim = kernel_basis(&a, cfg.rank_rel_tol)?.len();
        if kernel_dim != 1 {
            return Err(Error::SingularStart { kernel_dim });
        }
    }
    let info = kernel_info(p, s0, cfg)?;
    if info.kernel_dim != 1 {
        return Err(Error::SingularStart {
            kernel_dim: info.kernel_dim,
        });
    }
    let t = info.smallest.normalize();
    let n = p.dim();
    let (t_eps, t_lambda) = (t[n], t[n + 1]);
    if is_trivial(s0) && t_eps.abs() < cfg.branch_point_tol {
        return Err(Error::Transversality {
            eps_component: t_eps.abs(),
        });
    }
    let key = if t_eps.abs() >= cfg.branch_point_tol { t_eps } else { t_lambda };
    Ok(if key * orient.sign() < 0.0 { -t } else { t })
}

pub fn trace_branch(
    p: &Problem,
    s0: &SolutionPoint,
    orient: Orientation,
    cfg: &ContinuationSettings,
) -> Result<Branch> {
    cfg.validate()?;
    let t0 = initial_tangent(p, s0, orient, cfg)?;
    trace_from(p, s0, &t0, cfg)
}

/// Traces from a solution point along a given unit tangent.
pub fn trace_from(p: &Problem, s0: &SolutionPoint, t0: &Vector, cfg: &ContinuationSettings) -> Result<Branch> {
    cfg.validate()?;
    Tracer::new(p, s0, t0, cfg)?.run()
}

/// Launches a trace from a branch point along the kernel direction transverse
/// to the incoming tangent. `orient` fixes the sign of the lambda-component
/// (the eps-component when lambda does not move).
pub fn trace_secondary(
    p: &Problem,
    ev: &BranchEvent,
    orient: Orientation,
    cfg: &ContinuationSettings,
) -> Result<Branch> {
    cfg.validate()?;
    let incoming = ev
        .tangent
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("branch point event carries no tangent".into()))?;
    let n = p.dim();
    let kernel = local_kernel(p, &ev.location, cfg)?;
    let mut d = secondary_direction(&kernel, incoming);
    let key = if d[n + 1].abs() > 1e-3 { d[n + 1] } else { d[n] };
    if key * orient.sign() < 0.0 {
        d = -d;
    }
    let z = ev.location.to_state();
    let mut last_err = None;
    for scale in [1.0, 2.0, 0.5] {
        let q = &z + &d * (scale * cfg.h0);
        match correct_state(p, q.clone(), &q, &d, cfg.newton_tol, cfg.newton_max_iter, cfg.fd_step) {
            Ok(c) => {
                let (t1, _) = tangent_along(p, &c.point, &d, cfg)?;
                return trace_from(p, &c.point, &t1, cfg);
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

struct Tracer<'a> {
    p: &'a Problem,
    cfg: &'a ContinuationSettings,
    z0: Vector,
    t0: Vector,
    points: Vec<SolutionPoint>,
    tangents: Vec<Vector>,
    arcs: Vec<f64>,
    taus: Vec<f64>,
    events: Vec<BranchEvent>,
}

impl<'a> Tracer<'a> {
    fn new(p: &'a Problem, s0: &SolutionPoint, t0: &Vector, cfg: &'a ContinuationSettings) -> Result<Self> {
        let t0 = t0.normalize();
        let tau0 = bordered_determinant(p, s0, &t0, cfg)?;
        let mut tr = Self {
            p,
            cfg,
            z0: s0.to_state(),
            t0: t0.clone(),
            points: vec![s0.clone()],
            tangents: vec![t0.clone()],
            arcs: vec![0.0],
            taus: vec![tau0],
            events: Vec::new(),
        };
        if is_trivial(s0) {
            tr.push_crossing(s0.clone(), 0, 0.0, false);
        }
        Ok(tr)
    }

    fn run(mut self) -> Result<Branch> {
        let cfg = self.cfg;
        let mut h = cfg.h0;
        let mut easy = 0usize;
        let mut bypassed_at: Option<usize> = None;

        for _ in 0..cfg.max_steps {
            let k = self.points.len() - 1;
            let zk = self.points[k].to_state();
            let tk = self.tangents[k].clone();

            let (step, closing) = self.closing_step(&zk, &tk, h);
            let q = &zk + &tk * step;
            let attempt = correct_state(self.p, q.clone(), &q, &tk, cfg.newton_tol, cfg.newton_max_iter, cfg.fd_step)
                .and_then(|c| {
                    let (t, info) = tangent_along(self.p, &c.point, &tk, cfg)?;
                    Ok((c, t, info))
                });
            let accepted = match attempt {
                Ok((c, t, info)) => {
                    let jump = (c.point.to_state() - &zk).norm();
                    (t.dot(&tk) >= MIN_TANGENT_COS && jump <= 2.0 * step + cfg.loop_tol)
                        .then_some((c, t, info))
                }
                Err(Error::CorrectionFailure { .. }) => None,
                Err(e) => return Err(e),
            };

            let Some((c, t, info)) = accepted else {
                h *= 0.5;
                easy = 0;
                if h < cfg.h_min {
                    if bypassed_at != Some(k) && self.try_bypass(k)? {
                        bypassed_at = Some(self.points.len() - 1);
                        h = cfg.h0;
                        continue;
                    }
                    return Ok(self.finish(Termination::SingularStall));
                }
                continue;
            };

            let tau = bordered_determinant(self.p, &c.point, &t, cfg)?;
            self.accept(c.point, t, tau, info.sigma_min)?;

            let last = self.points.last().expect("nonempty");
            if closing && (last.to_state() - &self.z0).norm() <= cfg.loop_tol {
                return Ok(self.finish(Termination::ClosedLoop));
            }
            if last.eps.hypot(last.lambda) > cfg.escape_radius {
                return Ok(self.finish(Termination::Escaped));
            }

            if c.iterations <= EASY_ITERATIONS {
                easy += 1;
                if easy >= 2 {
                    h = (h * STEP_GROWTH).min(cfg.h_max);
                    easy = 0;
                }
            } else {
                easy = 0;
            }
            h = h.clamp(cfg.h_min, cfg.h_max);
        }
        Ok(self.finish(Termination::MaxSteps))
    }

    /// Shortens the step so the constraint plane passes through the start
    /// point once the trace is back in its neighborhood heading the same way.
    fn closing_step(&self, zk: &Vector, tk: &Vector, h: f64) -> (f64, bool) {
        if self.points.len() <= self.cfg.min_loop_steps || self.t0.dot(tk) <= 0.0 {
            return (h, false);
        }
        let d = &self.z0 - zk;
        let proj = d.dot(tk);
        let reach = 1.5 * h;
        if proj > 0.0 && proj <= reach && d.norm() <= reach {
            (proj, true)
        } else {
            (h, false)
        }
    }

    fn accept(&mut self, s: SolutionPoint, t: Vector, tau: f64, sigma_min: f64) -> Result<()> {
        let k = self.points.len() - 1;
        let a = self.points[k].clone();
        let t_a = self.tangents[k].clone();
        let tau_a = self.taus[k];
        let arc_a = self.arcs[k];
        let arc_b = arc_a + (s.to_state() - a.to_state()).norm();
        let idx = k + 1;
        let cfg = self.cfg;

        // crossings of eps = 0
        if a.eps * s.eps < 0.0 {
            let (loc, degraded) = locate_trivial_crossing(self.p, &a, &s, cfg)?;
            let w = a.eps / (a.eps - s.eps);
            self.push_crossing(loc, idx, arc_a + w * (arc_b - arc_a), degraded);
        } else if is_trivial(&s) {
            self.push_crossing(s.clone(), idx, arc_b, false);
        } else {
            // tangential touch of eps = 0
            let n = self.p.dim();
            let chord = arc_b - arc_a;
            if t_a[n] * t[n] < 0.0 && a.eps.abs().min(s.eps.abs()) <= 1.1 * chord {
                let ext = refine_eps_extremum(self.p, &a, &t_a, &s, cfg)?;
                if is_trivial(&ext) {
                    let arc = arc_a + (ext.to_state() - a.to_state()).norm();
                    self.push_crossing(ext, idx, arc, false);
                }
            }
        }

        if let Some(mut ev) = detect_with(self.p, &a, &t_a, &s, &t, tau_a, tau, sigma_min, cfg)? {
            let dup = self.events.iter().any(|e| {
                e.kind == EventKind::BranchPoint && e.location.distance(&ev.location) <= 2.0 * cfg.h_max
            });
            if !dup {
                ev.step_index = idx;
                ev.arclength = arc_a + (ev.location.to_state() - a.to_state()).norm();
                self.events.push(ev);
            }
        }

        self.points.push(s);
        self.tangents.push(t);
        self.arcs.push(arc_b);
        self.taus.push(tau);
        Ok(())
    }

    fn push_crossing(&mut self, loc: SolutionPoint, step_index: usize, arclength: f64, degraded: bool) {
        let tol = self.cfg.loop_tol;
        let z0 = SolutionPoint::from_state(&self.z0);
        let dup = self
            .events
            .iter()
            .any(|e| e.kind == EventKind::TrivialCrossing && e.location.distance(&loc) <= tol)
            || (step_index > 0 && loc.distance(&z0) <= tol);
        if !dup {
            self.events.push(BranchEvent {
                kind: EventKind::TrivialCrossing,
                location: loc,
                step_index,
                arclength,
                degraded,
                tangent: None,
            });
        }
    }

    /// After a stall at a near-singular point, steps across it along the
    /// incoming tangent. Returns whether the trace could resume.
    fn try_bypass(&mut self, k: usize) -> Result<bool> {
        let s = self.points[k].clone();
        let t = self.tangents[k].clone();
        let info = kernel_info(self.p, &s, self.cfg)?;
        if info.sigma_min > 1e-3 * (1.0 + info.sigma_max) {
            return Ok(false);
        }
        let ev = BranchEvent {
            kind: EventKind::BranchPoint,
            location: s,
            step_index: k,
            arclength: self.arcs[k],
            degraded: false,
            tangent: Some(t.clone()),
        };
        let past = match continue_past_branch_point(self.p, &ev, &t, self.cfg) {
            Ok(past) => past,
            Err(Error::CorrectionFailure { .. }) => return Ok(false),
            Err(e) => return Err(e),
        };
        let info = kernel_info(self.p, &past.point, self.cfg)?;
        let tangent = orient(past.tangent, &t);
        let tau = bordered_determinant(self.p, &past.point, &tangent, self.cfg)?;
        if !self
            .events
            .iter()
            .any(|e| e.kind == EventKind::BranchPoint && e.location.distance(&ev.location) <= 2.0 * self.cfg.h_max)
        {
            self.events.push(ev);
        }
        // the sign flip of tau across the bypass is the branch point already recorded
        self.taus[k] = tau;
        self.accept(past.point, tangent, tau, info.sigma_min)?;
        Ok(true)
    }

    fn finish(self, termination: Termination) -> Branch {
        let arclength = *self.arcs.last().expect("nonempty");
        Branch {
            points: self.points,
            tangents: self.tangents,
            arclengths: self.arcs,
            events: self.events,
            termination,
            arclength,
        }
    }
}
