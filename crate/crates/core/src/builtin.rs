//! The built-in problems and their named trivial solutions.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use crate::discretize::{fourier_problem_scalar, fourier_problem_system, FourierBasis};
use crate::error::{Error, Result};
use crate::numerics::{kernel_basis, DenseMatrix, Vector, DEFAULT_REL_TOL};
use crate::problem::{NonlinearTerm, Problem, SolutionPoint};

/// Selects one of the built-in problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Ex41,
    Ex42 { modes: usize },
    Ex43 { modes: usize },
    Ex44,
}

impl Builtin {
    pub fn parse(name: &str, modes: Option<usize>) -> Result<Self> {
        let needs_modes = |m: Option<usize>| {
            m.ok_or_else(|| Error::InvalidInput(format!("builtin {name} needs a mode count")))
        };
        let forbid_modes = |b: Builtin| match modes {
            Some(_) => Err(Error::InvalidInput(format!("builtin {name} takes no mode count"))),
            None => Ok(b),
        };
        match name {
            "ex41" => forbid_modes(Self::Ex41),
            "ex42" => Ok(Self::Ex42 { modes: needs_modes(modes)? }),
            "ex43" => Ok(Self::Ex43 { modes: needs_modes(modes)? }),
            "ex44" => forbid_modes(Self::Ex44),
            other => Err(Error::InvalidInput(format!("unknown builtin problem '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Ex41 => "ex41",
            Self::Ex42 { .. } => "ex42",
            Self::Ex43 { .. } => "ex43",
            Self::Ex44 => "ex44",
        }
    }

    pub fn problem(&self) -> Result<Problem> {
        match *self {
            Self::Ex41 => Ok(ex41()),
            Self::Ex42 { modes } => fourier_problem_scalar(modes),
            Self::Ex43 { modes } => fourier_problem_system(modes),
            Self::Ex44 => Ok(ex44()),
        }
    }

    /// Labelled trivial solutions `(x*, 0, lambda*)`.
    pub fn trivial_solutions(&self) -> Result<Vec<(String, SolutionPoint)>> {
        let pt = |x: Vec<f64>, lam: f64| SolutionPoint::new(Vector::from_vec(x), 0.0, lam);
        Ok(match *self {
            Self::Ex41 => vec![
                ("e1".into(), pt(vec![1.0, 0.0], 1.0)),
                ("-e1".into(), pt(vec![-1.0, 0.0], 1.0)),
                ("e2".into(), pt(vec![0.0, 1.0], -1.0)),
                ("-e2".into(), pt(vec![0.0, -1.0], -1.0)),
            ],
            Self::Ex42 { modes } => {
                let dim = FourierBasis::new(modes, 1).dim();
                let mut one = Vector::zeros(dim);
                one[0] = 1.0;
                vec![
                    ("one".into(), SolutionPoint::new(one.clone(), 0.0, 0.0)),
                    ("-one".into(), SolutionPoint::new(-one, 0.0, 0.0)),
                ]
            }
            Self::Ex43 { modes } => {
                let basis = FourierBasis::new(modes, 2);
                let constant = |a: f64, b: f64, lam: f64| {
                    let mut x = Vector::zeros(basis.dim());
                    x[basis.const_index(0)] = a;
                    x[basis.const_index(1)] = b;
                    SolutionPoint::new(x, 0.0, lam)
                };
                let h = FRAC_1_SQRT_2;
                let p = fourier_problem_system(modes)?;
                let a = p.l_matrix() - p.c_matrix() * SQRT_2;
                let k = kernel_basis(&a, DEFAULT_REL_TOL)?;
                let xk = p.project_to_sphere(&k[0])?;
                vec![
                    ("alpha=pi/2".into(), constant(h, h, 1.0)),
                    ("alpha=3pi/2".into(), constant(-h, h, -1.0)),
                    ("alpha=5pi/2".into(), constant(-h, -h, 1.0)),
                    ("alpha=7pi/2".into(), constant(h, -h, -1.0)),
                    ("sqrt2".into(), SolutionPoint::new(xk, 0.0, SQRT_2)),
                ]
            }
            Self::Ex44 => vec![
                ("e2".into(), pt(vec![0.0, 1.0], 0.0)),
                ("-e2".into(), pt(vec![0.0, -1.0], 0.0)),
            ],
        })
    }

    pub fn trivial_solution(&self, label: &str) -> Result<SolutionPoint> {
        self.trivial_solutions()?
            .into_iter()
            .find(|(l, _)| l == label)
            .map(|(_, s)| s)
            .ok_or_else(|| {
                Error::InvalidInput(format!("no trivial solution labelled '{label}' for {}", self.name()))
            })
    }
}

/// Two-dimensional problem: `L = diag(1, -1)`, `N(x) = (x2, -x1)`, `C = I`.
pub fn ex41() -> Problem {
    Problem::euclidean(
        "ex41",
        DenseMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]),
        DenseMatrix::identity(2, 2),
        NonlinearTerm::Linear(DenseMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])),
    )
    .expect("static problem is well formed")
}

/// Two-dimensional problem with nilpotent `L = [[0,0],[-2,0]]`, `N(x) = (-x2, x1)`, `C = I`.
pub fn ex44() -> Problem {
    Problem::euclidean(
        "ex44",
        DenseMatrix::from_row_slice(2, 2, &[0.0, 0.0, -2.0, 0.0]),
        DenseMatrix::identity(2, 2),
        NonlinearTerm::Linear(DenseMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])),
    )
    .expect("static problem is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_labelled_trivial_solution_solves_its_problem() {
        for b in [
            Builtin::Ex41,
            Builtin::Ex42 { modes: 1 },
            Builtin::Ex42 { modes: 8 },
            Builtin::Ex43 { modes: 2 },
            Builtin::Ex44,
        ] {
            let p = b.problem().unwrap();
            for (label, s) in b.trivial_solutions().unwrap() {
                let r = p.augmented_residual(&s).unwrap();
                assert!(r.amax() < 1e-12, "{} {label}: {r}", b.name());
            }
        }
    }

    #[test]
    fn parse_checks_modes() {
        assert_eq!(Builtin::parse("ex42", Some(3)).unwrap(), Builtin::Ex42 { modes: 3 });
        assert!(Builtin::parse("ex42", None).is_err());
        assert!(Builtin::parse("ex41", Some(3)).is_err());
        assert!(Builtin::parse("ex99", None).is_err());
    }
}
