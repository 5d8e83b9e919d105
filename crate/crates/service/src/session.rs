//! Session state and the phase logic, independent of HTTP.

use std::collections::HashMap;
use std::time::{SystemTime, UNIX_EPOCH};

use prefpareto_core::benchmark::{evaluate, sample_fronts, Configuration, DatasetProfile, EpochGrid, SampledFront};
use prefpareto_core::frontfeat::{build_loss_matrix, encode, fit_stats, EncodingConfig, FeatureStats, FeatureVector};
use prefpareto_core::hpo::{cost, CostSpec, Evaluation, OptimizerConfig, Trajectory, Trial};
use prefpareto_core::mo::References;
use prefpareto_core::oracle::build_pairs;
use prefpareto_core::ranker::{
    build_svm_dataset, predict_pref, train_linear_ranksvm, Predicted, PreferencePair, PreferenceSource, TrainConfig,
    UtilityModel,
};
use prefpareto_core::rng;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Sampling,
    Preferences,
    Training,
    Optimizing,
    Done,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateRequest {
    pub profile_id: u64,
    #[serde(default = "default_n_fronts")]
    pub n_fronts: usize,
    #[serde(default)]
    pub pair_limit: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

fn default_n_fronts() -> usize {
    40
}

/// A queued comparison and the side each front is shown on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueuedPair {
    pub pair_id: String,
    pub first: String,
    pub second: String,
    pub first_on_left: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    Left,
    Right,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub pair_id: String,
    pub choice: Choice,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub answered: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShownFront {
    /// `[accuracy_loss, energy_loss]` per Pareto-optimal model.
    pub points: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairPresentation {
    pub pair_id: String,
    pub left: ShownFront,
    pub right: ShownFront,
    pub progress: Progress,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextPair {
    pub done: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair: Option<PairPresentation>,
    pub progress: Progress,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PreferenceRequest {
    #[serde(default)]
    pub pair_id: Option<String>,
    #[serde(default)]
    pub choice: Option<Choice>,
    /// Ends labeling; remaining pairs are not shown.
    #[serde(default)]
    pub finish: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceAck {
    pub recorded: bool,
    pub progress: Progress,
    pub n_preferences: usize,
    pub labeling_done: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainRequest {
    #[serde(default)]
    pub train_config: Option<TrainConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub n_preferences: usize,
    pub dim: usize,
    pub weight_norm: f64,
    pub stats_ref: String,
    pub train_config: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResponse {
    /// `null` below [`MIN_PREFS_FOR_CV`] preferences.
    pub cv_tau_estimate: Option<f64>,
    pub model_summary: ModelSummary,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimizeRequest {
    #[serde(default)]
    pub budget: Option<usize>,
    /// Feed the sampled fronts to the surrogate as prior observations.
    #[serde(default)]
    pub warm_start: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeJob {
    pub budget: usize,
    pub warm_start: bool,
    pub optimizer: OptimizerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Status {
    pub phase: Phase,
    pub trials_done: usize,
    pub budget: Option<usize>,
    pub incumbent_cost: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Incumbent {
    pub trial_index: usize,
    pub config: Configuration,
    pub cost: f64,
    pub utility: f64,
    pub points: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub incumbent: Incumbent,
    pub trajectory: Trajectory,
}

pub const DEFAULT_BUDGET: usize = 30;
pub const MIN_PREFS_FOR_CV: usize = 10;
const CV_FOLDS: usize = 5;

pub fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub phase: Phase,
    pub profile_id: u64,
    pub seed: u64,
    pub request: CreateRequest,
    pub sampled_fronts: Vec<SampledFront>,
    pub stats: FeatureStats,
    pub encoding: EncodingConfig,
    pub pair_queue: Vec<QueuedPair>,
    pub cursor: usize,
    pub labeling_done: bool,
    pub answers: Vec<Answer>,
    pub preferences: Vec<PreferencePair>,
    pub model: Option<UtilityModel>,
    pub cv_tau_estimate: Option<f64>,
    pub job: Option<OptimizeJob>,
    pub trajectory: Option<Trajectory>,
    pub error: Option<String>,
    pub created_at: u64,
    pub updated_at: u64,
}

/// Session id derived from the creation request.
pub fn base_id(req: &CreateRequest) -> String {
    let limit = req.pair_limit.map_or(u64::MAX, |l| l as u64);
    let h = rng::derive(req.seed, &[rng::label("session"), req.profile_id, req.n_fronts as u64, limit]);
    format!("s{h:016x}")
}

impl Session {
    /// Preliminary sampling, frozen statistics and the pair queue.
    pub fn create(id: String, req: CreateRequest) -> Result<Session, ApiError> {
        if req.n_fronts < 2 {
            return Err(ApiError::invalid("n_fronts must be at least 2"));
        }
        if req.n_fronts > 500 {
            return Err(ApiError::invalid("n_fronts must be at most 500"));
        }
        if req.pair_limit == Some(0) {
            return Err(ApiError::invalid("pair_limit must be positive"));
        }
        let profile = DatasetProfile::new(req.profile_id);
        let sampled = sample_fronts(req.n_fronts, &profile, &EpochGrid::default(), req.seed);
        let encoding = EncodingConfig::default();
        let matrices =
            sampled.iter().map(|s| build_loss_matrix(&s.evaluated.models, &encoding)).collect::<Result<Vec<_>, _>>()?;
        let stats = fit_stats(&matrices)?;

        let ids: Vec<String> = sampled.iter().map(|s| s.evaluated.id.clone()).collect();
        let mut pairs = build_pairs(&ids, req.pair_limit, rng::derive(req.seed, &[rng::label("session-pairs")]))?;
        let mut order_rng = rng::stream(req.seed, &[rng::label("pair-order")]);
        if req.pair_limit.is_none() {
            pairs.shuffle(&mut order_rng);
        }
        let pair_queue = pairs
            .into_iter()
            .enumerate()
            .map(|(i, (first, second))| QueuedPair {
                pair_id: format!("pair-{i:04}"),
                first,
                second,
                first_on_left: order_rng.random_bool(0.5),
            })
            .collect();

        let t = now();
        Ok(Session {
            id,
            phase: Phase::Preferences,
            profile_id: req.profile_id,
            seed: req.seed,
            request: req,
            sampled_fronts: sampled,
            stats,
            encoding,
            pair_queue,
            cursor: 0,
            labeling_done: false,
            answers: Vec::new(),
            preferences: Vec::new(),
            model: None,
            cv_tau_estimate: None,
            job: None,
            trajectory: None,
            error: None,
            created_at: t,
            updated_at: t,
        })
    }

    fn require_phase(&self, allowed: &[Phase], action: &str) -> Result<(), ApiError> {
        if allowed.contains(&self.phase) {
            Ok(())
        } else {
            Err(ApiError::conflict(format!("cannot {action} in phase {:?}", self.phase)))
        }
    }

    fn front_points(&self, id: &str) -> ShownFront {
        let f = self.sampled_fronts.iter().find(|s| s.evaluated.id == id).expect("queued fronts exist");
        ShownFront { points: f.evaluated.front.coordinates() }
    }

    pub fn progress(&self) -> Progress {
        Progress { answered: self.cursor, total: self.pair_queue.len() }
    }

    fn labeling_over(&self) -> bool {
        self.labeling_done || self.cursor >= self.pair_queue.len()
    }

    pub fn next_pair(&self) -> Result<NextPair, ApiError> {
        self.require_phase(&[Phase::Preferences], "request pairs")?;
        if self.labeling_over() {
            return Ok(NextPair { done: true, pair: None, progress: self.progress() });
        }
        let q = &self.pair_queue[self.cursor];
        let (l, r) = if q.first_on_left { (&q.first, &q.second) } else { (&q.second, &q.first) };
        Ok(NextPair {
            done: false,
            pair: Some(PairPresentation {
                pair_id: q.pair_id.clone(),
                left: self.front_points(l),
                right: self.front_points(r),
                progress: self.progress(),
            }),
            progress: self.progress(),
        })
    }

    pub fn submit(&mut self, req: PreferenceRequest) -> Result<PreferenceAck, ApiError> {
        self.require_phase(&[Phase::Preferences], "submit preferences")?;
        let mut recorded = false;
        match (req.pair_id, req.choice) {
            (Some(pair_id), Some(choice)) => {
                if self.labeling_over() {
                    return Err(ApiError::conflict("labeling is finished"));
                }
                let q = &self.pair_queue[self.cursor];
                if q.pair_id != pair_id {
                    return Err(ApiError::conflict(format!("pair `{pair_id}` is not the current pair")));
                }
                let (left, right) = if q.first_on_left { (&q.first, &q.second) } else { (&q.second, &q.first) };
                let pref = match choice {
                    Choice::Left => Some(PreferencePair::new(left.clone(), right.clone(), PreferenceSource::Human)?),
                    Choice::Right => Some(PreferencePair::new(right.clone(), left.clone(), PreferenceSource::Human)?),
                    Choice::Skip => None,
                };
                if let Some(p) = pref {
                    self.preferences.push(p);
                    recorded = true;
                }
                self.answers.push(Answer { pair_id, choice });
                self.cursor += 1;
            }
            (None, None) if req.finish => {}
            _ => return Err(ApiError::invalid("expected `pair_id` and `choice`, or `finish: true`")),
        }
        if req.finish {
            self.labeling_done = true;
        }
        self.touch();
        Ok(PreferenceAck {
            recorded,
            progress: self.progress(),
            n_preferences: self.preferences.len(),
            labeling_done: self.labeling_over(),
        })
    }

    pub fn features(&self) -> Result<HashMap<String, FeatureVector>, ApiError> {
        self.sampled_fronts
            .iter()
            .map(|s| {
                let m = build_loss_matrix(&s.evaluated.models, &self.encoding)?;
                Ok((s.evaluated.id.clone(), encode(&m, &self.stats)?))
            })
            .collect()
    }

    pub fn train(&mut self, req: TrainRequest) -> Result<TrainResponse, ApiError> {
        self.require_phase(&[Phase::Preferences, Phase::Training], "train")?;
        if self.preferences.is_empty() {
            return Err(ApiError::precondition("at least one preference is needed to train"));
        }
        let cfg = req.train_config.unwrap_or_default();
        cfg.validate()?;
        let features = self.features()?;
        let data = build_svm_dataset(&self.preferences, &features)?;
        let model = train_linear_ranksvm(&data, &cfg)?.bind_stats(&self.stats);
        let cv = if self.preferences.len() >= MIN_PREFS_FOR_CV {
            Some(cv_estimate(&self.preferences, &features, &cfg, self.seed)?)
        } else {
            None
        };
        let summary = ModelSummary {
            n_preferences: self.preferences.len(),
            dim: model.dim(),
            weight_norm: model.w.iter().map(|w| w * w).sum::<f64>().sqrt(),
            stats_ref: model.stats_ref.clone(),
            train_config: cfg,
        };
        self.model = Some(model);
        self.cv_tau_estimate = cv;
        self.phase = Phase::Training;
        self.touch();
        Ok(TrainResponse { cv_tau_estimate: cv, model_summary: summary })
    }

    /// Validates the request and moves to the optimizing phase.
    pub fn begin_optimize(&mut self, req: OptimizeRequest) -> Result<OptimizeJob, ApiError> {
        if self.phase == Phase::Optimizing {
            return Err(ApiError::conflict("an optimization is already running"));
        }
        self.require_phase(&[Phase::Training], "optimize")?;
        let budget = req.budget.unwrap_or(DEFAULT_BUDGET);
        if !(2..=500).contains(&budget) {
            return Err(ApiError::invalid("budget must be between 2 and 500"));
        }
        let optimizer = OptimizerConfig {
            budget,
            n_init: 8.min(budget - 1),
            seed: rng::derive(self.seed, &[rng::label("session-optimize")]),
            ..Default::default()
        };
        let job = OptimizeJob { budget, warm_start: req.warm_start, optimizer };
        self.job = Some(job.clone());
        self.trajectory = Some(Trajectory::default());
        self.error = None;
        self.phase = Phase::Optimizing;
        self.touch();
        Ok(job)
    }

    pub fn cost_spec(&self) -> Result<CostSpec, ApiError> {
        let model = self.model.clone().ok_or_else(|| ApiError::precondition("no trained model"))?;
        if model.stats_ref != self.stats.fingerprint() {
            return Err(ApiError::internal("model statistics do not match the session's frozen statistics"));
        }
        Ok(CostSpec::Preference { model, stats: self.stats.clone(), encoding: self.encoding })
    }

    /// Objective for the optimizer: evaluate on the session's profile and
    /// score with the learned utility.
    pub fn objective(
        &self,
    ) -> Result<impl FnMut(&Configuration) -> Result<Evaluation, String> + Send + 'static, ApiError> {
        let spec = self.cost_spec()?;
        let profile = DatasetProfile::new(self.profile_id);
        let grid = EpochGrid::default();
        let mut step = 0usize;
        Ok(move |cfg: &Configuration| {
            let ef = evaluate(format!("trial-{step:03}"), cfg, &profile, &grid);
            step += 1;
            let c = cost(&spec, &ef, &References::default()).map_err(|e| e.to_string())?;
            Ok(Evaluation { cost: c, front: Some(ef.front) })
        })
    }

    /// Sampled configurations with their learned cost, for warm starts.
    pub fn priors(&self) -> Result<Vec<(Configuration, f64)>, ApiError> {
        let spec = self.cost_spec()?;
        self.sampled_fronts
            .iter()
            .map(|s| Ok((s.config.clone(), cost(&spec, &s.evaluated, &References::default())?)))
            .collect()
    }

    pub fn record_trial(&mut self, trial: &Trial) {
        let traj = self.trajectory.get_or_insert_with(Trajectory::default);
        let inc = if trial.incumbent { trial.trial_index } else { traj.incumbent_index.last().copied().unwrap_or(0) };
        traj.trials.push(trial.clone());
        traj.incumbent_index.push(inc);
        self.touch();
    }

    pub fn finish_optimize(&mut self, outcome: Result<Trajectory, String>) {
        match outcome {
            Ok(t) => {
                self.trajectory = Some(t);
                self.phase = Phase::Done;
            }
            Err(e) => {
                // back to training so the user can retry
                self.error = Some(e);
                self.phase = Phase::Training;
            }
        }
        self.touch();
    }

    pub fn status(&self) -> Status {
        let traj = self.trajectory.as_ref();
        Status {
            phase: self.phase,
            trials_done: traj.map_or(0, |t| t.len()),
            budget: self.job.as_ref().map(|j| j.budget),
            incumbent_cost: traj.and_then(|t| t.incumbent()).map(|t| t.cost).filter(|c| c.is_finite()),
            error: self.error.clone(),
        }
    }

    pub fn result(&self) -> Result<SessionResult, ApiError> {
        self.require_phase(&[Phase::Done], "fetch the result")?;
        let traj = self.trajectory.clone().ok_or_else(|| ApiError::internal("finished session without trajectory"))?;
        let inc = traj.incumbent().ok_or_else(|| ApiError::internal("empty trajectory"))?;
        let points = inc.front.as_ref().map(|f| f.coordinates()).unwrap_or_default();
        Ok(SessionResult {
            incumbent: Incumbent {
                trial_index: inc.trial_index,
                config: inc.config.clone(),
                cost: inc.cost,
                utility: -inc.cost,
                points,
            },
            trajectory: traj,
        })
    }

    pub fn touch(&mut self) {
        self.updated_at = now();
    }
}

/// Held-out pairwise agreement over `CV_FOLDS` folds of the user's own
/// preferences, reported on the tau scale: `(agree - disagree) / n`.
fn cv_estimate(
    prefs: &[PreferencePair],
    features: &HashMap<String, FeatureVector>,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<f64, ApiError> {
    let mut order: Vec<usize> = (0..prefs.len()).collect();
    order.shuffle(&mut rng::stream(seed, &[rng::label("session-cv")]));
    let mut score = 0.0;
    let mut n = 0usize;
    for fold in 0..CV_FOLDS {
        let in_fold = |pos: usize| pos % CV_FOLDS == fold;
        let train: Vec<PreferencePair> =
            order.iter().enumerate().filter(|(pos, _)| !in_fold(*pos)).map(|(_, &i)| prefs[i].clone()).collect();
        let model = train_linear_ranksvm(&build_svm_dataset(&train, features)?, cfg)?;
        for i in order.iter().enumerate().filter(|(pos, _)| in_fold(*pos)).map(|(_, &i)| i) {
            let p = &prefs[i];
            match predict_pref(&model, &features[&p.winner], &features[&p.loser])? {
                Predicted::First => score += 1.0,
                Predicted::Second => score -= 1.0,
                Predicted::Tie => {}
            }
            n += 1;
        }
    }
    Ok(score / n as f64)
}
