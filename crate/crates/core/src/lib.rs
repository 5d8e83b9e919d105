//! Interactive hyperparameter optimization for multi-objective learners.
//!
//! The crate learns a Pareto-front quality measure from pairwise
//! preferences over fronts and uses it as the cost of a surrogate-based
//! optimizer. The pieces, bottom up:
//!
//! - [`mo`]: dominance, front extraction and the HV / SP / MS / R2 indicators.
//! - [`frontfeat`]: fixed-width loss-matrix encoding of a model set.
//! - [`ranker`]: linear RankSVM over encoded fronts.
//! - [`ranking_eval`]: Fisher-Jenks ties, Kendall tau-b and cross-validation.
//! - [`benchmark`]: synthetic epoch-grid learner over the LCBench space.
//! - [`oracle`]: simulated user labelling pairs by an indicator.
//! - [`hpo`]: random-forest + expected-improvement optimizer.
//! - [`experiment`]: batch protocols (tau curves, PB/IB matrix, ranker tuning).

pub mod benchmark;
pub mod error;
pub mod experiment;
pub mod frontfeat;
pub mod hpo;
pub mod mo;
pub mod oracle;
pub mod ranker;
pub mod ranking_eval;
pub mod rng;

pub use error::{Error, Result};
