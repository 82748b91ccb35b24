//! Categorical black-box optimization with Fourier-basis surrogates.
//!
//! Surrogates are linear models over one of two orthogonal bases of
//! functions on `[k]^n`: an abridged one-hot basis and the characters of
//! the cyclic group `Z_k^n`. They are learned online by exponential weights
//! (`eco`) or by Bayesian regression with a regularized horseshoe prior and
//! Thompson sampling (`tco`), and minimized by simulated annealing (`sa`) or
//! Monte Carlo tree search (`mcts`).

pub mod basis;
pub mod blackbox;
pub mod campaign;
pub mod domain;
pub mod eco;
pub mod error;
pub mod mcts;
pub mod optimizer;
pub mod rna;
pub mod sa;
pub mod surrogate;
pub mod tco;
pub mod verify;

pub use basis::{BasisKind, BasisSpec, OneHotConvention};
pub use domain::{
    BlackBox, CategoricalPoint, CategoricalSpace, CountedBox, RngSeed, RngStream, RunTrace,
};
pub use error::{Error, Result};
