//! Run configuration documents.

use std::path::Path;

use serde::Deserialize;

use crate::builtin::Builtin;
use crate::continuation::ContinuationSettings;
use crate::error::{Error, Result};
use crate::numerics::{matrix_from_rows, GramMetric, Vector};
use crate::oracles::OracleFamily;
use crate::problem::{NonlinearTerm, Problem, SolutionPoint};
use crate::simplicity::SimplicityTolerances;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSource,
    #[serde(default)]
    pub check_simple: Option<TrivialSelector>,
    #[serde(default)]
    pub simplicity: SimplicityTolerances,
    #[serde(default)]
    pub start: Option<StartPoint>,
    #[serde(default)]
    pub orient: Option<String>,
    #[serde(default)]
    pub settings: ContinuationSettings,
    #[serde(default)]
    pub scan: Option<ScanConfig>,
    #[serde(default)]
    pub compare: CompareConfig,
}

/// Exactly one of `builtin` or `inline`.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSource {
    Builtin(BuiltinRef),
    Inline(InlineProblem),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuiltinRef {
    pub name: String,
    #[serde(default)]
    pub modes: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineProblem {
    #[serde(default)]
    pub label: Option<String>,
    pub dim: usize,
    pub l: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    /// Linear `N`; omitted means `N = 0`.
    #[serde(default)]
    pub n_matrix: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub gram_g: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub gram_h: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TrivialSelector {
    /// Label of a built-in trivial solution.
    Trivial(String),
    Explicit { x_star: Vec<f64>, lambda_star: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StartPoint {
    Trivial(String),
    Point { x: Vec<f64>, eps: f64, lambda: f64 },
    Oracle { family: String, param: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub eps: (f64, f64),
    pub lambda: (f64, f64),
    #[serde(default = "default_grid")]
    pub grid: (usize, usize),
}

fn default_grid() -> (usize, usize) {
    (256, 256)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    /// Restricts the comparison to one family; all families of the problem otherwise.
    pub family: Option<String>,
    pub tol: f64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self { family: None, tol: 1e-8 }
    }
}

/// A loaded problem, remembering which built-in it came from.
#[derive(Debug, Clone)]
pub struct LoadedProblem {
    pub problem: Problem,
    pub builtin: Option<Builtin>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn load_problem(&self) -> Result<LoadedProblem> {
        match &self.problem {
            ProblemSource::Builtin(b) => {
                let builtin = Builtin::parse(&b.name, b.modes)?;
                Ok(LoadedProblem {
                    problem: builtin.problem()?,
                    builtin: Some(builtin),
                })
            }
            ProblemSource::Inline(inline) => Ok(LoadedProblem {
                problem: inline.build()?,
                builtin: None,
            }),
        }
    }
}

impl InlineProblem {
    fn matrix(&self, rows: &[Vec<f64>], what: &str) -> Result<crate::numerics::DenseMatrix> {
        if rows.len() != self.dim || rows.iter().any(|r| r.len() != self.dim) {
            return Err(Error::InvalidInput(format!("{what} must be {0}x{0}", self.dim)));
        }
        matrix_from_rows(rows)
    }

    pub fn build(&self) -> Result<Problem> {
        if self.dim == 0 {
            return Err(Error::InvalidInput("dim must be positive".into()));
        }
        let l = self.matrix(&self.l, "l")?;
        let c = self.matrix(&self.c, "c")?;
        let n = match &self.n_matrix {
            Some(rows) => NonlinearTerm::Linear(self.matrix(rows, "n_matrix")?),
            None => NonlinearTerm::Zero,
        };
        let gram = |rows: &Option<Vec<Vec<f64>>>, what: &str| match rows {
            Some(r) => GramMetric::new(self.matrix(r, what)?),
            None => Ok(GramMetric::identity(self.dim)),
        };
        Problem::new(
            self.label.clone().unwrap_or_else(|| "inline".into()),
            l,
            c,
            n,
            gram(&self.gram_g, "gram_g")?,
            gram(&self.gram_h, "gram_h")?,
        )
    }
}

fn vector(v: &[f64], dim: usize, what: &str) -> Result<Vector> {
    if v.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: v.len(),
        });
    }
    if v.iter().any(|a| !a.is_finite()) {
        return Err(Error::InvalidInput(format!("{what} has non-finite entries")));
    }
    Ok(Vector::from_column_slice(v))
}

fn builtin_of<'a>(loaded: &'a LoadedProblem, what: &str) -> Result<&'a Builtin> {
    loaded
        .builtin
        .as_ref()
        .ok_or_else(|| Error::InvalidInput(format!("{what} labels need a builtin problem")))
}

impl TrivialSelector {
    pub fn resolve(&self, loaded: &LoadedProblem) -> Result<(Vector, f64)> {
        match self {
            TrivialSelector::Trivial(label) => {
                let s = builtin_of(loaded, "trivial-solution")?.trivial_solution(label)?;
                Ok((s.x, s.lambda))
            }
            TrivialSelector::Explicit { x_star, lambda_star } => {
                Ok((vector(x_star, loaded.problem.dim(), "x_star")?, *lambda_star))
            }
        }
    }
}

impl StartPoint {
    pub fn resolve(&self, loaded: &LoadedProblem) -> Result<SolutionPoint> {
        match self {
            StartPoint::Trivial(label) => builtin_of(loaded, "trivial-solution")?.trivial_solution(label),
            StartPoint::Point { x, eps, lambda } => Ok(SolutionPoint::new(
                vector(x, loaded.problem.dim(), "start.x")?,
                *eps,
                *lambda,
            )),
            StartPoint::Oracle { family, param } => {
                let b = builtin_of(loaded, "oracle")?;
                Ok(OracleFamily::for_builtin(family, *b)?.eval(*param))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_builtin_and_inline() {
        let c = RunConfig::from_json(r#"{"problem": {"builtin": {"name": "ex42", "modes": 3}}}"#).unwrap();
        assert_eq!(c.load_problem().unwrap().problem.dim(), 7);
        let c = RunConfig::from_json(
            r#"{"problem": {"inline": {"dim": 2, "l": [[1,0],[0,-1]], "c": [[1,0],[0,1]], "n_matrix": [[0,1],[-1,0]]}},
                "start": {"point": {"x": [1, 0], "eps": 0, "lambda": 1}}}"#,
        )
        .unwrap();
        let lp = c.load_problem().unwrap();
        assert!(lp.builtin.is_none());
        assert_eq!(c.start.unwrap().resolve(&lp).unwrap().lambda, 1.0);
    }

    #[test]
    fn rejects_unknown_keys_and_two_sources() {
        assert!(RunConfig::from_json(r#"{"problem": {"builtin": {"name": "ex41"}}, "extra": 1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"problem": {"builtin": {"name": "ex41", "mode": 1}}}"#).is_err());
        assert!(RunConfig::from_json(
            r#"{"problem": {"builtin": {"name": "ex41"}, "inline": {"dim": 1, "l": [[1]], "c": [[1]]}}}"#
        )
        .is_err());
        assert!(RunConfig::from_json(r#"{"problem": {"builtin": {"name": "ex41"}}, "settings": {"h00": 1}}"#).is_err());
    }

    #[test]
    fn key_order_is_irrelevant() {
        let a = RunConfig::from_json(r#"{"orient": "-", "problem": {"builtin": {"modes": 2, "name": "ex43"}}}"#).unwrap();
        let b = RunConfig::from_json(r#"{"problem": {"builtin": {"name": "ex43", "modes": 2}}, "orient": "-"}"#).unwrap();
        assert_eq!(a.load_problem().unwrap().builtin, b.load_problem().unwrap().builtin);
        assert_eq!(a.orient, b.orient);
    }

    #[test]
    fn inline_validation() {
        let c = RunConfig::from_json(
            r#"{"problem": {"inline": {"dim": 2, "l": [[1,0,0],[0,-1,0]], "c": [[1,0],[0,1]]}}}"#,
        )
        .unwrap();
        assert!(c.load_problem().is_err());
        let c = RunConfig::from_json(
            r#"{"problem": {"inline": {"dim": 2, "l": [[1,0],[0,-1]], "c": [[1,0],[0,1]], "gram_g": [[1,2],[2,1]]}}}"#,
        )
        .unwrap();
        assert!(c.load_problem().is_err());
    }
}
