//! Closed-form solution families of the built-in problems, and the distance
//! from traced points to a family.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use crate::builtin::Builtin;
use crate::discretize::FourierBasis;
use crate::error::{Error, Result};
use crate::numerics::Vector;
use crate::parallel::{map_slice, Execution};
use crate::problem::{Problem, SolutionPoint};

const SELF_TEST_SAMPLES: usize = 64;
const SELF_TEST_TOL: f64 = 1e-10;
const DISTANCE_SAMPLES: usize = 1024;
/// Parameter half-width of the hyperbola families.
const HYPERBOLA_EXTENT: f64 = 12.0;

/// `((cos(theta/2), sin(theta/2)), -sin theta, cos theta)`.
pub fn oracle_ex41(theta: f64) -> SolutionPoint {
    SolutionPoint::new(
        Vector::from_vec(vec![(theta / 2.0).cos(), (theta / 2.0).sin()]),
        -theta.sin(),
        theta.cos(),
    )
}

/// `(cos theta + sin theta cos t, sin theta, 0)` in the `M`-mode basis.
pub fn oracle_ex42_segment(theta: f64, modes: usize) -> SolutionPoint {
    let b = FourierBasis::new(modes, 1);
    let mut x = Vector::zeros(b.dim());
    x[b.const_index(0)] = theta.cos();
    x[b.cos_index(0, 1)] = theta.sin();
    SolutionPoint::new(x, theta.sin(), 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// `(-+(s sin t + cos t)/sqrt(1+s^2), -+sqrt(1+s^2), s)`; the left branch has `eps < 0`.
pub fn oracle_ex42_hyperbola(side: Side, s: f64, modes: usize) -> SolutionPoint {
    let sign = match side {
        Side::Left => -1.0,
        Side::Right => 1.0,
    };
    let r = (1.0 + s * s).sqrt();
    let b = FourierBasis::new(modes, 1);
    let mut x = Vector::zeros(b.dim());
    x[b.sin_index(0, 1)] = sign * s / r;
    x[b.cos_index(0, 1)] = sign / r;
    SolutionPoint::new(x, sign * r, s)
}

/// Constant `(cos(alpha/2), sin(alpha/2))` with `(eps, lambda) = (cos alpha, sin alpha)`.
pub fn oracle_ex43(alpha: f64, modes: usize) -> SolutionPoint {
    let b = FourierBasis::new(modes, 2);
    let mut x = Vector::zeros(b.dim());
    x[b.const_index(0)] = (alpha / 2.0).cos();
    x[b.const_index(1)] = (alpha / 2.0).sin();
    SolutionPoint::new(x, alpha.cos(), alpha.sin())
}

/// `((-sin(phi/2), cos(phi/2)), 1 - cos phi, sin phi)`, a parametrization of the
/// solution loop over the eigenpair circle `eps (eps - 2) + lambda^2 = 0`.
pub fn oracle_ex44(phi: f64) -> SolutionPoint {
    SolutionPoint::new(
        Vector::from_vec(vec![-(phi / 2.0).sin(), (phi / 2.0).cos()]),
        1.0 - phi.cos(),
        phi.sin(),
    )
}

type Evaluator = Arc<dyn Fn(f64) -> SolutionPoint + Send + Sync>;

#[derive(Clone)]
pub struct OracleFamily {
    label: String,
    problem: Builtin,
    domain: (f64, f64),
    periodic: bool,
    eval: Evaluator,
}

impl fmt::Debug for OracleFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OracleFamily")
            .field("label", &self.label)
            .field("problem", &self.problem)
            .field("domain", &self.domain)
            .field("periodic", &self.periodic)
            .finish()
    }
}

impl OracleFamily {
    /// Builds a family and checks it against its problem on evenly spaced samples.
    pub fn new(
        label: impl Into<String>,
        problem: Builtin,
        domain: (f64, f64),
        periodic: bool,
        eval: impl Fn(f64) -> SolutionPoint + Send + Sync + 'static,
    ) -> Result<Self> {
        let fam = Self {
            label: label.into(),
            problem,
            domain,
            periodic,
            eval: Arc::new(eval),
        };
        let p = problem.problem()?;
        let worst = fam.self_test(&p)?;
        if worst > SELF_TEST_TOL {
            return Err(Error::Numerical(format!(
                "oracle {} fails its problem: residual {worst:.3e}",
                fam.label
            )));
        }
        Ok(fam)
    }

    /// Largest augmented residual over the self-test samples.
    pub fn self_test(&self, p: &Problem) -> Result<f64> {
        let mut worst = 0.0f64;
        for k in 0..SELF_TEST_SAMPLES {
            let t = self.domain.0 + (self.domain.1 - self.domain.0) * k as f64 / (SELF_TEST_SAMPLES - 1) as f64;
            worst = worst.max(p.augmented_residual(&self.eval(t))?.amax());
        }
        Ok(worst)
    }

    pub fn ex41() -> Result<Self> {
        Self::new("ex41", Builtin::Ex41, (0.0, 2.0 * TAU), true, oracle_ex41)
    }

    pub fn ex42_segment(modes: usize) -> Result<Self> {
        Self::new("ex42_segment", Builtin::Ex42 { modes }, (0.0, TAU), true, move |t| {
            oracle_ex42_segment(t, modes)
        })
    }

    pub fn ex42_hyperbola(side: Side, modes: usize) -> Result<Self> {
        let label = match side {
            Side::Left => "ex42_left",
            Side::Right => "ex42_right",
        };
        Self::new(
            label,
            Builtin::Ex42 { modes },
            (-HYPERBOLA_EXTENT, HYPERBOLA_EXTENT),
            false,
            move |s| oracle_ex42_hyperbola(side, s, modes),
        )
    }

    pub fn ex43(modes: usize) -> Result<Self> {
        Self::new("ex43", Builtin::Ex43 { modes }, (0.0, 4.0 * PI), true, move |a| oracle_ex43(a, modes))
    }

    pub fn ex44() -> Result<Self> {
        Self::new("ex44", Builtin::Ex44, (0.0, 4.0 * PI), true, oracle_ex44)
    }

    /// Family by label for a given built-in problem; rejects mismatched pairs.
    pub fn for_builtin(label: &str, problem: Builtin) -> Result<Self> {
        let mismatch = || {
            Error::InvalidInput(format!(
                "oracle '{label}' does not belong to problem {}",
                problem.name()
            ))
        };
        match (label, problem) {
            ("ex41", Builtin::Ex41) => Self::ex41(),
            ("ex42_segment", Builtin::Ex42 { modes }) => Self::ex42_segment(modes),
            ("ex42_left", Builtin::Ex42 { modes }) => Self::ex42_hyperbola(Side::Left, modes),
            ("ex42_right", Builtin::Ex42 { modes }) => Self::ex42_hyperbola(Side::Right, modes),
            ("ex43", Builtin::Ex43 { modes }) => Self::ex43(modes),
            ("ex44", Builtin::Ex44) => Self::ex44(),
            ("ex41" | "ex42_segment" | "ex42_left" | "ex42_right" | "ex43" | "ex44", _) => Err(mismatch()),
            _ => Err(Error::InvalidInput(format!("unknown oracle family '{label}'"))),
        }
    }

    pub fn labels_for(problem: Builtin) -> &'static [&'static str] {
        match problem {
            Builtin::Ex41 => &["ex41"],
            Builtin::Ex42 { .. } => &["ex42_segment", "ex42_left", "ex42_right"],
            Builtin::Ex43 { .. } => &["ex43"],
            Builtin::Ex44 => &["ex44"],
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn problem(&self) -> Builtin {
        self.problem
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn eval(&self, t: f64) -> SolutionPoint {
        (self.eval)(t)
    }

    fn dim(&self) -> usize {
        self.eval(self.domain.0).dim()
    }

    /// Distance from `s` to the family and the minimizing parameter.
    pub fn nearest(&self, s: &SolutionPoint) -> (f64, f64) {
        let samples = self.samples();
        self.nearest_with(s, &samples)
    }

    fn samples(&self) -> Vec<(f64, Vector)> {
        let (lo, hi) = self.domain;
        let n = DISTANCE_SAMPLES;
        let denom = if self.periodic { n } else { n - 1 } as f64;
        (0..n)
            .map(|k| {
                let t = lo + (hi - lo) * k as f64 / denom;
                (t, self.eval(t).to_state())
            })
            .collect()
    }

    fn nearest_with(&self, s: &SolutionPoint, samples: &[(f64, Vector)]) -> (f64, f64) {
        let z = s.to_state();
        let d2 = |t: f64| (self.eval(t).to_state() - &z).norm_squared();
        let (mut best_t, mut best) = (samples[0].0, f64::INFINITY);
        for (t, v) in samples {
            let d = (v - &z).norm_squared();
            if d < best {
                best = d;
                best_t = *t;
            }
        }
        let step = samples[1].0 - samples[0].0;
        let (mut a, mut b) = (best_t - step, best_t + step);
        if !self.periodic {
            a = a.max(self.domain.0);
            b = b.min(self.domain.1);
        }
        let t = golden_section(d2, a, b, 1e-15);
        let refined = d2(t);
        if refined < best {
            (refined.sqrt(), t)
        } else {
            (best.sqrt(), best_t)
        }
    }
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= tol * (1.0 + a.abs() + b.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// `max` over points of the distance to the family, with the per-point distances.
pub fn distance_profile(points: &[SolutionPoint], family: &OracleFamily, exec: Execution) -> Result<Vec<f64>> {
    let dim = family.dim();
    if let Some(bad) = points.iter().find(|s| s.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.dim(),
        });
    }
    let samples = family.samples();
    Ok(map_slice(exec, points, |s| family.nearest_with(s, &samples).0))
}

pub fn distance_to_family(points: &[SolutionPoint], family: &OracleFamily, exec: Execution) -> Result<f64> {
    Ok(distance_profile(points, family, exec)?.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::ex44;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn close(a: &SolutionPoint, b: &SolutionPoint, tol: f64) {
        assert!(a.distance(b) <= tol, "{a:?} vs {b:?}");
    }

    fn pt(x: &[f64], eps: f64, lam: f64) -> SolutionPoint {
        SolutionPoint::new(Vector::from_column_slice(x), eps, lam)
    }

    #[test]
    fn ex41_trivial_points() {
        close(&oracle_ex41(0.0), &pt(&[1.0, 0.0], 0.0, 1.0), 1e-15);
        close(&oracle_ex41(PI), &pt(&[0.0, 1.0], 0.0, -1.0), 1e-15);
        close(&oracle_ex41(TAU), &pt(&[-1.0, 0.0], 0.0, 1.0), 1e-15);
    }

    #[test]
    fn ex42_segment_points() {
        let m = 3;
        let mut one = vec![0.0; 7];
        one[0] = 1.0;
        close(&oracle_ex42_segment(0.0, m), &pt(&one, 0.0, 0.0), 1e-15);
        let mut mcos = vec![0.0; 7];
        mcos[1] = -1.0;
        close(&oracle_ex42_segment(1.5 * PI, m), &pt(&mcos, -1.0, 0.0), 1e-15);
        let p = Builtin::Ex42 { modes: m }.problem().unwrap();
        for k in 0..50 {
            let s = oracle_ex42_segment(k as f64 * 0.13, m);
            assert!((p.gram_g().norm(&s.x).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn ex42_hyperbola_points() {
        let m = 2;
        let mut mcos = vec![0.0; 5];
        mcos[1] = -1.0;
        close(&oracle_ex42_hyperbola(Side::Left, 0.0, m), &pt(&mcos, -1.0, 0.0), 1e-15);
        mcos[1] = 1.0;
        close(&oracle_ex42_hyperbola(Side::Right, 0.0, m), &pt(&mcos, 1.0, 0.0), 1e-15);
        for k in -20..20 {
            let s = oracle_ex42_hyperbola(Side::Left, k as f64 * 0.37, m);
            assert!((s.eps * s.eps - s.lambda * s.lambda - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ex43_points() {
        let m = 2;
        let s = oracle_ex43(PI / 2.0, m);
        assert!((s.x[0] - FRAC_1_SQRT_2).abs() < 1e-15 && (s.x[5] - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(s.eps.abs() < 1e-15 && (s.lambda - 1.0).abs() < 1e-15);
        let s = oracle_ex43(1.5 * PI, m);
        assert!((s.x[0] + FRAC_1_SQRT_2).abs() < 1e-15 && (s.x[5] - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((s.lambda + 1.0).abs() < 1e-15);
        for k in 0..40 {
            let s = oracle_ex43(k as f64 * 0.31, m);
            assert!((s.eps.hypot(s.lambda) - 1.0).abs() < 1e-15);
        }
    }

    /// The loop parametrization for the nilpotent problem is derived, so it is
    /// checked by direct substitution into `-eps x2 = lambda x1`,
    /// `(-2 + eps) x1 = lambda x2`, `|x| = 1` before anything relies on it.
    #[test]
    fn ex44_parametrization_by_substitution() {
        for k in 0..=4000 {
            let phi = 4.0 * PI * k as f64 / 4000.0;
            let s = oracle_ex44(phi);
            let (x1, x2) = (s.x[0], s.x[1]);
            assert!((-s.eps * x2 - s.lambda * x1).abs() < 1e-14);
            assert!(((-2.0 + s.eps) * x1 - s.lambda * x2).abs() < 1e-14);
            assert!((x1 * x1 + x2 * x2 - 1.0).abs() < 1e-14);
            assert!((s.eps * (s.eps - 2.0) + s.lambda * s.lambda).abs() < 1e-14);
        }
        close(&oracle_ex44(0.0), &pt(&[0.0, 1.0], 0.0, 0.0), 1e-15);
        // the trace start point sits at phi = 5 pi / 2
        close(&oracle_ex44(2.5 * PI), &pt(&[FRAC_1_SQRT_2, -FRAC_1_SQRT_2], 1.0, 1.0), 1e-15);
        let p = ex44();
        assert!(p.augmented_residual(&oracle_ex44(1.234)).unwrap().amax() < 1e-15);
    }

    #[test]
    fn periodicity() {
        close(&oracle_ex41(0.0), &oracle_ex41(4.0 * PI), 1e-12);
        close(&oracle_ex44(0.3), &oracle_ex44(0.3 + 4.0 * PI), 1e-12);
        close(&oracle_ex42_segment(0.0, 2), &oracle_ex42_segment(TAU, 2), 1e-12);
    }

    #[test]
    fn families_pass_self_test() {
        OracleFamily::ex41().unwrap();
        OracleFamily::ex42_segment(4).unwrap();
        OracleFamily::ex42_hyperbola(Side::Left, 4).unwrap();
        OracleFamily::ex42_hyperbola(Side::Right, 1).unwrap();
        OracleFamily::ex43(2).unwrap();
        OracleFamily::ex44().unwrap();
    }

    #[test]
    fn family_rejects_wrong_problem() {
        assert!(OracleFamily::new("good", Builtin::Ex41, (0.0, 1.0), false, oracle_ex41).is_ok());
        let bad = OracleFamily::new("bad", Builtin::Ex41, (0.0, 1.0), false, |t| {
            let mut s = oracle_ex41(t);
            s.eps = -s.eps;
            s.eps += 0.1;
            s
        });
        assert!(bad.is_err());
        assert!(OracleFamily::for_builtin("ex41", Builtin::Ex43 { modes: 2 }).is_err());
        assert!(OracleFamily::for_builtin("nope", Builtin::Ex41).is_err());
    }

    #[test]
    fn self_distance_is_zero() {
        let f = OracleFamily::ex41().unwrap();
        let pts: Vec<_> = (0..37).map(|k| oracle_ex41(0.3 + k as f64 * 0.33)).collect();
        assert!(distance_to_family(&pts, &f, Execution::Parallel).unwrap() <= 1e-9);
        let h = OracleFamily::ex42_hyperbola(Side::Right, 3).unwrap();
        let pts: Vec<_> = (0..20).map(|k| oracle_ex42_hyperbola(Side::Right, -5.0 + k as f64 * 0.51, 3)).collect();
        assert!(distance_to_family(&pts, &h, Execution::Sequential).unwrap() <= 1e-9);
    }

    #[test]
    fn planted_defect_detected() {
        let f = OracleFamily::ex41().unwrap();
        let mut pts: Vec<_> = (0..20).map(|k| oracle_ex41(k as f64 * 0.6)).collect();
        // radial offset is normal to the family
        pts[7].x *= 1.0 + 1e-3;
        assert!(distance_to_family(&pts, &f, Execution::Parallel).unwrap() >= 9e-4);
    }

    #[test]
    fn distance_rejects_dimension_mismatch() {
        let f = OracleFamily::ex41().unwrap();
        let pts = vec![oracle_ex43(0.0, 2)];
        assert!(distance_to_family(&pts, &f, Execution::Sequential).is_err());
    }
}
