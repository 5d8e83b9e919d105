//! Fixed-width encoding of a model set.
//!
//! Models are sorted by the order key, dominated rows are overwritten by the
//! running non-dominated incumbent, missing rows are forward-imputed from the
//! final row, and the flattened matrix is standardized with statistics that
//! are fitted once and then frozen.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mo::{dominates_unchecked, front_order, ModelPoint, ENERGY_LOSS, N_OBJECTIVES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingConfig {
    /// Matrix rows; an upper bound on the models returned per configuration.
    pub max_models: usize,
    pub n_objectives: usize,
    pub order_key: usize,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        EncodingConfig { max_models: 10, n_objectives: N_OBJECTIVES, order_key: ENERGY_LOSS }
    }
}

impl EncodingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_models == 0 {
            return Err(Error::param("max_models must be at least 1"));
        }
        if self.n_objectives != N_OBJECTIVES {
            return Err(Error::param(format!("only {N_OBJECTIVES} objectives are supported")));
        }
        if self.order_key >= self.n_objectives {
            return Err(Error::param("order key out of range"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.max_models * self.n_objectives
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossMatrix {
    pub rows: Vec<Vec<f64>>,
    /// Rows that came from actual models, before padding.
    pub b_filled: usize,
}

impl LossMatrix {
    /// Row-major flattening.
    pub fn flatten(&self) -> Vec<f64> {
        self.rows.iter().flatten().copied().collect()
    }

    pub fn dim(&self) -> usize {
        self.rows.len() * self.rows.first().map_or(0, Vec::len)
    }
}

pub fn build_loss_matrix(models: &[ModelPoint], cfg: &EncodingConfig) -> Result<LossMatrix> {
    cfg.validate()?;
    if models.is_empty() {
        return Err(Error::EmptyInput("model set"));
    }
    if models.len() > cfg.max_models {
        return Err(Error::Capacity { capacity: cfg.max_models, got: models.len() });
    }
    for m in models {
        if m.losses.len() != cfg.n_objectives {
            return Err(Error::Dimension { expected: cfg.n_objectives, got: m.losses.len() });
        }
    }

    let mut sorted: Vec<&ModelPoint> = models.iter().collect();
    let order = front_order(cfg.order_key);
    sorted.sort_by(|a, b| order(a, b));

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(cfg.max_models);
    let mut incumbent = sorted[0].losses.values().to_vec();
    rows.push(incumbent.clone());
    for m in &sorted[1..] {
        let row = m.losses.values();
        if dominates_unchecked(&incumbent, row) {
            rows.push(incumbent.clone());
        } else {
            incumbent = row.to_vec();
            rows.push(incumbent.clone());
        }
    }
    let b_filled = rows.len();
    while rows.len() < cfg.max_models {
        rows.push(incumbent.clone());
    }
    Ok(LossMatrix { rows, b_filled })
}

/// Per-position standardization statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub n_fit: usize,
}

impl FeatureStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Content hash of the exact bit patterns; identifies the stats a model was trained against.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for v in self.mean.iter().chain(&self.std) {
            h.update(v.to_bits().to_le_bytes());
        }
        h.update((self.n_fit as u64).to_le_bytes());
        h.finalize().iter().take(12).map(|b| format!("{b:02x}")).collect()
    }
}

/// Population mean and standard deviation per flattened position.
pub fn fit_stats(matrices: &[LossMatrix]) -> Result<FeatureStats> {
    let first = matrices.first().ok_or(Error::EmptyInput("loss matrices"))?;
    let dim = first.dim();
    let flat: Vec<Vec<f64>> = matrices
        .iter()
        .map(|m| {
            if m.dim() != dim || m.rows.len() != first.rows.len() {
                Err(Error::Dimension { expected: dim, got: m.dim() })
            } else {
                Ok(m.flatten())
            }
        })
        .collect::<Result<_>>()?;
    let n = flat.len() as f64;
    let mut mean = Vec::with_capacity(dim);
    let mut std = Vec::with_capacity(dim);
    for j in 0..dim {
        let first = flat[0][j];
        if flat.iter().all(|f| f[j] == first) {
            // a constant column; avoid a rounding-level std from the summed mean
            mean.push(first);
            std.push(0.0);
            continue;
        }
        let m = flat.iter().map(|f| f[j]).sum::<f64>() / n;
        mean.push(m);
        std.push((flat.iter().map(|f| (f[j] - m).powi(2)).sum::<f64>() / n).sqrt());
    }
    Ok(FeatureStats { mean, std, n_fit: flat.len() })
}

/// Standardized, flattened encoding of one front.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn encode(matrix: &LossMatrix, stats: &FeatureStats) -> Result<FeatureVector> {
    let flat = matrix.flatten();
    if flat.len() != stats.dim() {
        return Err(Error::Dimension { expected: stats.dim(), got: flat.len() });
    }
    Ok(FeatureVector(
        flat.iter()
            .zip(stats.mean.iter().zip(&stats.std))
            .map(|(x, (m, s))| if *s > 0.0 { (x - m) / s } else { 0.0 })
            .collect(),
    ))
}

/// Builds the matrix and encodes it in one step.
pub fn encode_models(models: &[ModelPoint], cfg: &EncodingConfig, stats: &FeatureStats) -> Result<FeatureVector> {
    encode(&build_loss_matrix(models, cfg)?, stats)
}
