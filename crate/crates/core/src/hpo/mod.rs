//! Sequential model-based optimization over the configuration space.
//!
//! A random-forest surrogate is refitted after every evaluation; proposals
//! are the expected-improvement maximizers among fresh random points and
//! Gaussian perturbations of the incumbent.

mod forest;

use rand::Rng as _;
use rand_distr::{Distribution as _, Normal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use statrs::distribution::{Continuous, ContinuousCDF, Normal as StdNormal};

pub use forest::{ForestConfig, RandomForest};

use crate::benchmark::{sample_config, ConfigSpace, Configuration};
use crate::error::{Error, Result};
use crate::frontfeat::{encode_models, EncodingConfig, FeatureStats};
use crate::mo::{indicator_value, Direction, EvaluatedFront, Indicator, ParetoFront, References};
use crate::ranker::{utility, UtilityModel};
use crate::rng;

/// What an HPO run minimizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CostSpec {
    /// Negated learned utility with frozen feature statistics.
    Preference { model: UtilityModel, stats: FeatureStats, encoding: EncodingConfig },
    /// A fixed indicator, sign-adjusted for minimization.
    Indicator { kind: Indicator },
}

impl CostSpec {
    pub fn preference(model: UtilityModel, stats: FeatureStats) -> Result<Self> {
        let spec = CostSpec::Preference { model, stats, encoding: EncodingConfig::default() };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if let CostSpec::Preference { model, stats, encoding } = self {
            encoding.validate()?;
            if model.dim() != stats.dim() || stats.dim() != encoding.dim() {
                return Err(Error::Dimension { expected: encoding.dim(), got: model.dim() });
            }
            if !model.stats_ref.is_empty() && model.stats_ref != stats.fingerprint() {
                return Err(Error::param("utility model was trained against different feature statistics"));
            }
        }
        Ok(())
    }
}

/// Minimization-oriented cost of an evaluated model set.
pub fn cost(spec: &CostSpec, evaluated: &EvaluatedFront, refs: &References) -> Result<f64> {
    match spec {
        CostSpec::Preference { model, stats, encoding } => {
            let f = encode_models(&evaluated.models, encoding, stats)?;
            Ok(-utility(model, &f)?)
        }
        CostSpec::Indicator { kind } => {
            let v = indicator_value(*kind, &evaluated.front, refs)?;
            Ok(match kind.direction() {
                Direction::Maximize => -v,
                Direction::Minimize => v,
            })
        }
    }
}

/// Unit-cube coordinates of a configuration: normalized log for log
/// parameters, min-max for linear ones.
pub fn encode_for_surrogate(cfg: &Configuration) -> Vec<f64> {
    ConfigSpace::lcbench().encode(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub budget: usize,
    pub n_init: usize,
    pub n_candidates: usize,
    pub forest: ForestConfig,
    /// Standard deviation of incumbent perturbations in the unit cube.
    pub local_sigma: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            budget: 30,
            n_init: 8,
            n_candidates: 1000,
            forest: ForestConfig::default(),
            local_sigma: 0.1,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn with_seed(seed: u64) -> Self {
        OptimizerConfig { seed, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 || self.n_init == 0 || self.n_candidates == 0 || self.forest.trees == 0 {
            return Err(Error::param("budget, n_init, n_candidates and trees must be positive"));
        }
        if self.n_init >= self.budget {
            return Err(Error::param(format!("n_init {} must be below budget {}", self.n_init, self.budget)));
        }
        let fs = self.forest.feature_subsample;
        if self.local_sigma.is_nan() || self.local_sigma <= 0.0 || fs.is_nan() || fs <= 0.0 || fs > 1.0 {
            return Err(Error::param("local_sigma and feature_subsample must be positive"));
        }
        Ok(())
    }
}

/// Result of evaluating one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub cost: f64,
    pub front: Option<ParetoFront>,
}

fn ser_cost<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

fn de_cost<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub trial_index: usize,
    pub config: Configuration,
    /// `+inf` (serialized as `null`) when the evaluation failed.
    #[serde(serialize_with = "ser_cost", deserialize_with = "de_cost")]
    pub cost: f64,
    pub front: Option<ParetoFront>,
    /// Whether this trial became the incumbent when it was evaluated.
    pub incumbent: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub trials: Vec<Trial>,
    /// Index of the incumbent trial after each step.
    pub incumbent_index: Vec<usize>,
}

impl Trajectory {
    fn push(&mut self, mut trial: Trial) -> &Trial {
        let best = self.incumbent().map(|t| t.cost);
        let improved = best.is_none_or(|b| trial.cost < b);
        trial.incumbent = improved;
        let inc = if improved { self.trials.len() } else { *self.incumbent_index.last().expect("incumbent") };
        self.trials.push(trial);
        self.incumbent_index.push(inc);
        self.trials.last().expect("just pushed")
    }

    pub fn incumbent(&self) -> Option<&Trial> {
        self.incumbent_index.last().map(|&i| &self.trials[i])
    }

    pub fn incumbent_costs(&self) -> Vec<f64> {
        self.incumbent_index.iter().map(|&i| self.trials[i].cost).collect()
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }
}

fn evaluate_into<F>(objective: &mut F, traj: &mut Trajectory, config: Configuration, on_trial: &mut dyn FnMut(&Trial))
where
    F: FnMut(&Configuration) -> std::result::Result<Evaluation, String>,
{
    let (cost, front, error) = match objective(&config) {
        Ok(e) if e.cost.is_finite() => (e.cost, e.front, None),
        Ok(e) => (f64::INFINITY, e.front, Some(format!("non-finite cost {}", e.cost))),
        Err(msg) => (f64::INFINITY, None, Some(msg)),
    };
    let trial = Trial { trial_index: traj.len(), config, cost, front, incumbent: false, error };
    on_trial(traj.push(trial));
}

/// Expected improvement below `best` for a Gaussian prediction.
pub fn expected_improvement(mean: f64, var: f64, best: f64) -> f64 {
    let sigma = var.max(0.0).sqrt();
    let gap = best - mean;
    if sigma < 1e-12 {
        return gap.max(0.0);
    }
    let z = gap / sigma;
    let n = StdNormal::standard();
    (gap * n.cdf(z) + sigma * n.pdf(z)).max(0.0)
}

/// Random initial design followed by surrogate-guided proposals.
pub fn optimize<F>(objective: F, space: &ConfigSpace, opt: &OptimizerConfig) -> Result<Trajectory>
where
    F: FnMut(&Configuration) -> std::result::Result<Evaluation, String>,
{
    optimize_observed(objective, space, opt, &[], &mut |_| {})
}

/// [`optimize`] with prior observations that inform the surrogate without
/// counting against the budget, and a callback after every trial.
pub fn optimize_observed<F>(
    mut objective: F,
    space: &ConfigSpace,
    opt: &OptimizerConfig,
    prior: &[(Configuration, f64)],
    on_trial: &mut dyn FnMut(&Trial),
) -> Result<Trajectory>
where
    F: FnMut(&Configuration) -> std::result::Result<Evaluation, String>,
{
    opt.validate()?;
    let mut traj = Trajectory::default();
    let mut init_rng = rng::stream(opt.seed, &[rng::label("smbo-init")]);
    for _ in 0..opt.n_init {
        let cfg = sample_config(space, &mut init_rng);
        evaluate_into(&mut objective, &mut traj, cfg, on_trial);
    }

    let local = Normal::new(0.0, opt.local_sigma).map_err(|e| Error::param(e.to_string()))?;
    for step in opt.n_init..opt.budget {
        let mut x: Vec<Vec<f64>> = prior.iter().map(|(c, _)| space.encode(c)).collect();
        let mut y: Vec<f64> = prior.iter().map(|(_, v)| *v).collect();
        x.extend(traj.trials.iter().map(|t| space.encode(&t.config)));
        y.extend(traj.trials.iter().map(|t| t.cost));
        // failed evaluations are imputed with the worst observed cost
        let worst = y.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
        let worst = if worst.is_finite() { worst } else { 0.0 };
        y.iter_mut().filter(|v| !v.is_finite()).for_each(|v| *v = worst);

        let mut forest_rng = rng::stream(opt.seed, &[rng::label("smbo-forest"), step as u64]);
        let forest = RandomForest::fit(&x, &y, &opt.forest, &mut forest_rng);

        let inc = traj.incumbent().expect("initial design evaluated");
        let best = y.iter().copied().fold(f64::INFINITY, f64::min);
        let inc_x = space.encode(&inc.config);

        let mut cand_rng = rng::stream(opt.seed, &[rng::label("smbo-candidates"), step as u64]);
        let n_random = opt.n_candidates.div_ceil(2);
        let candidates: Vec<Vec<f64>> = (0..opt.n_candidates)
            .map(|i| {
                if i < n_random {
                    (0..space.dim()).map(|_| cand_rng.random::<f64>()).collect()
                } else {
                    inc_x.iter().map(|v| (v + local.sample(&mut cand_rng)).clamp(0.0, 1.0)).collect()
                }
            })
            .collect();

        let mut chosen = 0;
        let mut chosen_ei = f64::NEG_INFINITY;
        for (i, c) in candidates.iter().enumerate() {
            let (m, v) = forest.predict(c);
            let ei = expected_improvement(m, v, best);
            if ei > chosen_ei {
                chosen = i;
                chosen_ei = ei;
            }
        }
        let cfg = space.decode(&candidates[chosen]);
        evaluate_into(&mut objective, &mut traj, cfg, on_trial);
    }
    Ok(traj)
}

/// Seeded random configurations with incumbent tracking.
pub fn random_search<F>(mut objective: F, space: &ConfigSpace, budget: usize, seed: u64) -> Result<Trajectory>
where
    F: FnMut(&Configuration) -> std::result::Result<Evaluation, String>,
{
    if budget == 0 {
        return Err(Error::param("budget must be positive"));
    }
    let mut traj = Trajectory::default();
    let mut rng = rng::stream(seed, &[rng::label("random-search")]);
    for _ in 0..budget {
        let cfg = sample_config(space, &mut rng);
        evaluate_into(&mut objective, &mut traj, cfg, &mut |_| {});
    }
    Ok(traj)
}
