//! Linear RankSVM over encoded fronts.
//!
//! Each preference `winner > loser` becomes the pair of classification
//! examples `(f_w - f_l, +1)` and `(f_l - f_w, -1)`. A hyperplane through the
//! origin is fitted with the regularized hinge loss, and its weight vector is
//! the utility `u(P) = w . f_P`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontfeat::{FeatureStats, FeatureVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreferenceSource {
    Human,
    Simulated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub winner: String,
    pub loser: String,
    pub source: PreferenceSource,
}

impl PreferencePair {
    pub fn new(winner: impl Into<String>, loser: impl Into<String>, source: PreferenceSource) -> Result<Self> {
        let (winner, loser) = (winner.into(), loser.into());
        if winner == loser {
            return Err(Error::param(format!("front `{winner}` cannot be preferred to itself")));
        }
        Ok(PreferencePair { winner, loser, source })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmExample {
    pub x: Vec<f64>,
    /// +1 or -1.
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub reg: f64,
    pub max_epochs: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { reg: 1.0, max_epochs: 2000, tol: 1e-8, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.reg > 0.0 && self.reg.is_finite()) {
            return Err(Error::param("reg must be positive"));
        }
        if self.max_epochs == 0 {
            return Err(Error::param("max_epochs must be at least 1"));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::param("tol must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityModel {
    pub w: Vec<f64>,
    pub stats_ref: String,
    pub train_config: TrainConfig,
}

impl UtilityModel {
    /// Records which feature statistics the model's inputs are standardized with.
    pub fn bind_stats(mut self, stats: &FeatureStats) -> Self {
        self.stats_ref = stats.fingerprint();
        self
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }
}

pub fn build_svm_dataset(
    prefs: &[PreferencePair],
    features: &HashMap<String, FeatureVector>,
) -> Result<Vec<SvmExample>> {
    let mut out = Vec::with_capacity(2 * prefs.len());
    for p in prefs {
        let fw = features.get(&p.winner).ok_or_else(|| Error::Lookup(p.winner.clone()))?;
        let fl = features.get(&p.loser).ok_or_else(|| Error::Lookup(p.loser.clone()))?;
        if fw.len() != fl.len() {
            return Err(Error::Dimension { expected: fw.len(), got: fl.len() });
        }
        let diff: Vec<f64> = fw.values().iter().zip(fl.values()).map(|(a, b)| a - b).collect();
        let neg = diff.iter().map(|v| -v).collect();
        out.push(SvmExample { x: diff, y: 1.0 });
        out.push(SvmExample { x: neg, y: -1.0 });
    }
    Ok(out)
}

/// Regularized mean hinge objective `(reg / 2) |w|^2 + mean max(0, 1 - y (w.x + b))`.
pub fn objective(w: &[f64], bias: f64, data: &[SvmExample], reg: f64) -> f64 {
    let hinge: f64 = data.iter().map(|e| (1.0 - e.y * (dot(w, &e.x) + bias)).max(0.0)).sum::<f64>() / data.len() as f64;
    0.5 * reg * dot(w, w) + hinge
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Outcome of a training run: the selected iterate and, per epoch, the
/// objective of the iterate that would be returned if training stopped there.
#[derive(Debug, Clone)]
pub(crate) struct Fit {
    pub w: Vec<f64>,
    #[cfg_attr(not(test), allow(dead_code))]
    pub bias: f64,
    pub trace: Vec<f64>,
}

pub(crate) fn fit_hinge(data: &[SvmExample], cfg: &TrainConfig, with_intercept: bool) -> Result<Fit> {
    cfg.validate()?;
    let first = data.first().ok_or(Error::EmptyInput("svm dataset"))?;
    let d = first.x.len();
    for e in data {
        if e.x.len() != d {
            return Err(Error::Dimension { expected: d, got: e.x.len() });
        }
        if e.x.iter().any(|v| !v.is_finite()) || !(e.y == 1.0 || e.y == -1.0) {
            return Err(Error::Numeric("svm example with non-finite feature or bad label".into()));
        }
    }

    let n = data.len() as f64;
    let mut w = vec![0.0; d];
    let mut bias = 0.0;
    let mut best = (objective(&w, bias, data, cfg.reg), w.clone(), bias);
    let mut trace = Vec::with_capacity(cfg.max_epochs.min(4096));
    let mut prev = best.0;
    let mut grad = vec![0.0; d];

    for t in 1..=cfg.max_epochs {
        grad.iter_mut().zip(&w).for_each(|(g, wi)| *g = cfg.reg * wi);
        let mut grad_b = 0.0;
        for e in data {
            if e.y * (dot(&w, &e.x) + bias) < 1.0 {
                for (g, xi) in grad.iter_mut().zip(&e.x) {
                    *g -= e.y * xi / n;
                }
                grad_b -= e.y / n;
            }
        }
        let step = 1.0 / (cfg.reg * t as f64);
        for (wi, g) in w.iter_mut().zip(&grad) {
            *wi -= step * g;
        }
        if with_intercept {
            bias -= step * grad_b;
        }

        let obj = objective(&w, bias, data, cfg.reg);
        if obj < best.0 {
            best = (obj, w.clone(), bias);
        }
        trace.push(best.0);
        if (prev - obj).abs() < cfg.tol {
            break;
        }
        prev = obj;
    }
    Ok(Fit { w: best.1, bias: best.2, trace })
}

/// Fits the utility weights by full-batch subgradient descent with step
/// `1 / (reg * t)`. Subgradient iterates are not monotone, so the iterate with
/// the lowest objective is kept.
pub fn train_linear_ranksvm(data: &[SvmExample], cfg: &TrainConfig) -> Result<UtilityModel> {
    let fit = fit_hinge(data, cfg, false)?;
    Ok(UtilityModel { w: fit.w, stats_ref: String::new(), train_config: *cfg })
}

/// Per-epoch objective of the retained (lowest-objective) iterate.
pub fn objective_trace(data: &[SvmExample], cfg: &TrainConfig) -> Result<Vec<f64>> {
    Ok(fit_hinge(data, cfg, false)?.trace)
}

pub fn utility(model: &UtilityModel, feat: &FeatureVector) -> Result<f64> {
    if feat.len() != model.dim() {
        return Err(Error::Dimension { expected: model.dim(), got: feat.len() });
    }
    Ok(dot(&model.w, feat.values()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicted {
    First,
    Second,
    Tie,
}

const TIE_EPS: f64 = 1e-12;

pub fn predict_pref(model: &UtilityModel, f1: &FeatureVector, f2: &FeatureVector) -> Result<Predicted> {
    let (u1, u2) = (utility(model, f1)?, utility(model, f2)?);
    Ok(if u1 > u2 + TIE_EPS {
        Predicted::First
    } else if u2 > u1 + TIE_EPS {
        Predicted::Second
    } else {
        Predicted::Tie
    })
}
