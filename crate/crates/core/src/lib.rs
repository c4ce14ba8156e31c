//! Global branch tracing for perturbed eigenvalue problems
//! `L x + eps N(x) = lambda C x` with `x` on the unit sphere of a Gram metric.
//!
//! The crate certifies simplicity of trivial solutions (`eps = 0`), traces
//! connected components of the solution set by pseudo-arclength continuation,
//! and classifies each branch as closed (meeting trivial solutions) or
//! escaping to large `(eps, lambda)`.

pub mod builtin;
pub mod cli;
pub mod continuation;
pub mod discretize;
pub mod error;
pub mod numerics;
pub mod oracles;
pub mod parallel;
pub mod problem;
pub mod simplicity;

pub use error::{Error, Result};
pub use parallel::Execution;
pub use problem::{NonlinearTerm, Problem, SolutionPoint};
