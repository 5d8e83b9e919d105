//! Synthetic multi-objective learner over the LCBench configuration space.
//!
//! A configuration is "trained" for every epoch of a fixed grid; each epoch
//! snapshot is one model with an accuracy loss and a normalized energy loss.
//! Learning-curve shapes depend on the configuration through closed-form
//! response surfaces whose coefficients are drawn per dataset profile.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mo::{EvaluatedFront, ModelPoint};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamType {
    Integer,
    Real,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    Log,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParameter {
    pub name: String,
    pub kind: ParamType,
    pub low: f64,
    pub high: f64,
    pub distribution: Distribution,
}

impl HyperParameter {
    /// Maps a value to `[0, 1]` (log-scaled for log parameters).
    pub fn normalize(&self, v: f64) -> f64 {
        match self.distribution {
            Distribution::Log => (v / self.low).ln() / (self.high / self.low).ln(),
            Distribution::Linear => (v - self.low) / (self.high - self.low),
        }
    }

    /// Inverse of [`normalize`](Self::normalize); integers are rounded and
    /// everything is clamped to the range.
    pub fn denormalize(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let v = match self.distribution {
            Distribution::Log => self.low * (self.high / self.low).powf(u),
            Distribution::Linear => self.low + u * (self.high - self.low),
        };
        let v = match self.kind {
            ParamType::Integer => v.round(),
            ParamType::Real => v,
        };
        v.clamp(self.low, self.high)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.low && v <= self.high && (self.kind == ParamType::Real || v.fract() == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSpace {
    pub params: Vec<HyperParameter>,
}

impl ConfigSpace {
    /// The seven LCBench hyperparameters, in [`Configuration::to_values`] order.
    pub fn lcbench() -> Self {
        use Distribution::*;
        use ParamType::*;
        let p = |name: &str, kind, low, high, distribution| HyperParameter {
            name: String::from(name),
            kind,
            low,
            high,
            distribution,
        };
        ConfigSpace {
            params: vec![
                p("batch_size", Integer, 16.0, 512.0, Log),
                p("learning_rate", Real, 1e-4, 1e-1, Log),
                p("momentum", Real, 0.1, 0.99, Linear),
                p("weight_decay", Real, 1e-5, 1e-1, Linear),
                p("num_layers", Integer, 1.0, 5.0, Linear),
                p("max_units", Integer, 64.0, 1024.0, Log),
                p("max_dropout", Real, 0.0, 1.0, Linear),
            ],
        }
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn contains(&self, cfg: &Configuration) -> bool {
        self.params.iter().zip(cfg.to_values()).all(|(p, v)| p.contains(v))
    }

    /// Maps a point of the unit cube to a configuration.
    pub fn decode(&self, u: &[f64]) -> Configuration {
        let values: Vec<f64> = self.params.iter().zip(u).map(|(p, x)| p.denormalize(*x)).collect();
        Configuration::from_values(&values)
    }

    pub fn encode(&self, cfg: &Configuration) -> Vec<f64> {
        self.params.iter().zip(cfg.to_values()).map(|(p, v)| p.normalize(v)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub batch_size: u32,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub num_layers: u32,
    pub max_units: u32,
    pub max_dropout: f64,
}

impl Configuration {
    pub fn to_values(&self) -> [f64; 7] {
        [
            self.batch_size as f64,
            self.learning_rate,
            self.momentum,
            self.weight_decay,
            self.num_layers as f64,
            self.max_units as f64,
            self.max_dropout,
        ]
    }

    fn from_values(v: &[f64]) -> Self {
        Configuration {
            batch_size: v[0] as u32,
            learning_rate: v[1],
            momentum: v[2],
            weight_decay: v[3],
            num_layers: v[4] as u32,
            max_units: v[5] as u32,
            max_dropout: v[6],
        }
    }
}

/// Draws a configuration: log parameters uniformly in log space, linear ones
/// uniformly, integers rounded and clamped.
pub fn sample_config(space: &ConfigSpace, rng: &mut Rng) -> Configuration {
    let u: Vec<f64> = (0..space.dim()).map(|_| rng.random::<f64>()).collect();
    space.decode(&u)
}

/// Per-dataset response-surface coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetProfile {
    pub profile_id: u64,
    pub coefficients: [f64; 11],
}

impl DatasetProfile {
    pub fn new(profile_id: u64) -> Self {
        let mut rng = rng::stream(profile_id, &[rng::label("dataset-profile")]);
        let mut coefficients = [0.0; 11];
        for (i, c) in coefficients.iter_mut().enumerate() {
            let (lo, hi) = match i {
                3 | 5 => (0.2, 0.8),
                10 => (0.0, 0.3),
                _ => (0.5, 2.0),
            };
            *c = rng.random_range(lo..hi);
        }
        DatasetProfile { profile_id, coefficients }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochGrid {
    pub epochs: Vec<u32>,
}

impl Default for EpochGrid {
    fn default() -> Self {
        EpochGrid { epochs: (1..=10).map(|i| 5 * i).collect() }
    }
}

impl EpochGrid {
    pub fn new(epochs: Vec<u32>) -> Result<Self> {
        if epochs.is_empty() || epochs[0] == 0 || epochs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("epoch grid must be strictly increasing positive integers"));
        }
        Ok(EpochGrid { epochs })
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }
}

const MAX_POWER_NORM: f64 = 1024.0 * 5.0 / 16.0;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Relative power draw in `(0, 1]`.
pub fn power(cfg: &Configuration) -> f64 {
    (cfg.max_units as f64 * cfg.num_layers as f64) / (cfg.batch_size as f64 * MAX_POWER_NORM)
}

/// Accuracy after `epoch` epochs, clamped to `[0.01, 0.99]`.
pub fn accuracy(cfg: &Configuration, profile: &DatasetProfile, epoch: f64) -> f64 {
    let a = &profile.coefficients;
    let u = (cfg.max_units as f64 / 64.0).ln() / 16f64.ln();
    let l = (cfg.num_layers as f64 - 1.0) / 4.0;
    let lr = (cfg.learning_rate / 1e-4).ln() / 1000f64.ln();
    let bs = (cfg.batch_size as f64 / 16.0).ln() / 32f64.ln();
    let mom = (cfg.momentum - 0.1) / 0.89;
    let dr = cfg.max_dropout;
    let wd = (cfg.weight_decay / 1e-5).ln() / 1e4f64.ln();

    let capability = 0.5
        + 0.45
            * (a[0] * u + a[1] * l - a[2] * (lr - a[3]).powi(2) - a[4] * (dr - a[5]).powi(2) + a[6] * mom - a[7] * wd)
                .tanh();
    let rate = 0.02 + 0.3 * sigmoid(a[8] * lr - a[9] * bs);
    let decline = a[10] * dr * (epoch - 30.0).max(0.0) / 50.0;
    (capability * (1.0 - (-rate * epoch).exp()) - decline).clamp(0.01, 0.99)
}

/// Evaluates one configuration at every grid epoch.
pub fn run_moml(cfg: &Configuration, profile: &DatasetProfile, grid: &EpochGrid) -> Vec<ModelPoint> {
    let p = power(cfg);
    grid.epochs
        .iter()
        .map(|&e| {
            let epoch = e as f64;
            let acc_loss = 1.0 - accuracy(cfg, profile, epoch);
            let energy = (epoch * p / 50.0).min(1.0);
            ModelPoint::new(format!("epoch-{e:03}"), vec![acc_loss, energy])
                .expect("benchmark losses lie in [0, 1]")
                .with_meta("epoch", epoch)
        })
        .collect()
}

/// Runs the learner and extracts its front.
pub fn evaluate(
    id: impl Into<String>,
    cfg: &Configuration,
    profile: &DatasetProfile,
    grid: &EpochGrid,
) -> EvaluatedFront {
    EvaluatedFront::from_models(id, run_moml(cfg, profile, grid)).expect("benchmark model sets are non-empty")
}

/// A configuration and the front it produced during preliminary sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledFront {
    pub config: Configuration,
    pub evaluated: EvaluatedFront,
}

/// Preliminary sampling: `n` seeded random configurations and their fronts,
/// with ids `front-000`, `front-001`, ...
pub fn sample_fronts(n: usize, profile: &DatasetProfile, grid: &EpochGrid, seed: u64) -> Vec<SampledFront> {
    let space = ConfigSpace::lcbench();
    let mut rng = rng::stream(seed, &[rng::label("preliminary-sampling"), profile.profile_id]);
    (0..n)
        .map(|i| {
            let config = sample_config(&space, &mut rng);
            let evaluated = evaluate(format!("front-{i:03}"), &config, profile, grid);
            SampledFront { config, evaluated }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Configuration {
        Configuration {
            batch_size: 64,
            learning_rate: 1e-2,
            momentum: 0.9,
            weight_decay: 1e-3,
            num_layers: 3,
            max_units: 256,
            max_dropout: 0.2,
        }
    }

    #[test]
    fn samples_stay_in_range() {
        let space = ConfigSpace::lcbench();
        let mut rng = rng::stream(1, &[]);
        for _ in 0..10_000 {
            assert!(space.contains(&sample_config(&space, &mut rng)));
        }
    }

    #[test]
    fn learning_rate_is_log_uniform() {
        let space = ConfigSpace::lcbench();
        let mut rng = rng::stream(2, &[]);
        let below = (0..10_000).filter(|_| sample_config(&space, &mut rng).learning_rate < 10f64.powf(-2.5)).count();
        let frac = below as f64 / 10_000.0;
        assert!((frac - 0.5).abs() <= 0.02, "{frac}");
    }

    #[test]
    fn sampling_is_seeded() {
        let space = ConfigSpace::lcbench();
        let a = sample_config(&space, &mut rng::stream(9, &[]));
        let b = sample_config(&space, &mut rng::stream(9, &[]));
        assert_eq!(a, b);
    }

    #[test]
    fn profiles_are_reproducible_and_in_range() {
        let p = DatasetProfile::new(4);
        assert_eq!(p, DatasetProfile::new(4));
        assert_ne!(p, DatasetProfile::new(5));
        for (i, c) in p.coefficients.iter().enumerate() {
            let (lo, hi) = match i {
                3 | 5 => (0.2, 0.8),
                10 => (0.0, 0.3),
                _ => (0.5, 2.0),
            };
            assert!(*c >= lo && *c < hi);
        }
    }

    #[test]
    fn energy_increases_with_epoch() {
        let models = run_moml(&base(), &DatasetProfile::new(0), &EpochGrid::default());
        assert_eq!(models.len(), 10);
        for w in models.windows(2) {
            assert!(w[1].losses[1] > w[0].losses[1]);
        }
    }

    #[test]
    fn accuracy_loss_monotone_without_dropout() {
        let space = ConfigSpace::lcbench();
        let mut rng = rng::stream(5, &[]);
        for i in 0..100 {
            let mut cfg = sample_config(&space, &mut rng);
            cfg.max_dropout = 0.0;
            let models = run_moml(&cfg, &DatasetProfile::new(i % 7), &EpochGrid::default());
            for w in models.windows(2) {
                assert!(w[1].losses[0] <= w[0].losses[0]);
            }
        }
    }

    #[test]
    fn power_scales_with_units() {
        let small = Configuration { max_units: 64, ..base() };
        let big = Configuration { max_units: 1024, ..base() };
        assert!((power(&big) / power(&small) - 16.0).abs() < 1e-12);
        let max = Configuration { max_units: 1024, num_layers: 5, batch_size: 16, ..base() };
        assert_eq!(power(&max), 1.0);
    }

    #[test]
    fn losses_in_unit_interval_and_front_non_empty() {
        let space = ConfigSpace::lcbench();
        let mut rng = rng::stream(6, &[]);
        for i in 0..200 {
            let cfg = sample_config(&space, &mut rng);
            let ev = evaluate("x", &cfg, &DatasetProfile::new(i), &EpochGrid::default());
            assert!(!ev.front.is_empty());
            for m in &ev.models {
                assert!(m.losses.values().iter().all(|v| *v > 0.0 && *v <= 1.0));
            }
        }
    }

    #[test]
    fn sampled_fronts_are_diverse() {
        for profile in 0..3 {
            let fronts = sample_fronts(40, &DatasetProfile::new(profile), &EpochGrid::default(), 1);
            let first = &fronts[0].evaluated.front;
            assert!(fronts.iter().any(|f| &f.evaluated.front != first));
        }
    }

    #[test]
    fn model_set_determinism() {
        let p = DatasetProfile::new(3);
        let g = EpochGrid::default();
        assert_eq!(run_moml(&base(), &p, &g), run_moml(&base(), &p, &g));
    }

    #[test]
    fn grid_validation() {
        assert!(EpochGrid::new(vec![5, 5]).is_err());
        assert!(EpochGrid::new(vec![0, 5]).is_err());
        assert_eq!(EpochGrid::default().len(), 10);
    }
}
