//! Simulated-user experiment protocols over the synthetic benchmark.
//!
//! Every run is keyed by `(profile, seed)`; runs execute in parallel and are
//! merged in key order so reports are reproducible bit for bit.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchmark::{evaluate, sample_fronts, ConfigSpace, DatasetProfile, EpochGrid};
use crate::error::{Error, Result};
use crate::frontfeat::{build_loss_matrix, encode, fit_stats, EncodingConfig, FeatureVector};
use crate::hpo::{cost, optimize, CostSpec, Evaluation, OptimizerConfig};
use crate::mo::{indicator_value, EvaluatedFront, Indicator, ParetoFront, References};
use crate::oracle::{build_pairs, label_pairs, OracleConfig};
use crate::ranker::{build_svm_dataset, train_linear_ranksvm, TrainConfig};
use crate::ranking_eval::{cross_validate_ranker, mean_std};
use crate::rng;

/// Fronts drawn in the preliminary sampling phase of every run.
pub const N_SAMPLED_FRONTS: usize = 40;

/// First profile id of the tuning split; evaluation profiles count up from 0.
pub const TUNING_PROFILE_BASE: u64 = 1000;

pub fn evaluation_profiles(n: usize) -> Vec<u64> {
    (0..n as u64).collect()
}

pub fn tuning_profiles(n: usize) -> Vec<u64> {
    (TUNING_PROFILE_BASE..TUNING_PROFILE_BASE + n as u64).collect()
}

/// `count` consecutive seeds starting at `base`.
pub fn run_seeds(base: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| base.wrapping_add(i)).collect()
}

fn sampled(profile: u64, seed: u64) -> Vec<EvaluatedFront> {
    let grid = EpochGrid::default();
    sample_fronts(N_SAMPLED_FRONTS, &DatasetProfile::new(profile), &grid, rng::derive(seed, &[profile]))
        .into_iter()
        .map(|s| s.evaluated)
        .collect()
}

fn grid_runs(profiles: &[u64], seeds: &[u64]) -> Vec<(u64, u64)> {
    profiles.iter().flat_map(|&p| seeds.iter().map(move |&s| (p, s))).collect()
}

fn check_nonempty(what: &'static str, n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::EmptyInput(what))
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauCurveArgs {
    pub indicators: Vec<Indicator>,
    pub n_pairs: Vec<usize>,
    pub profiles: Vec<u64>,
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
    /// Per-indicator replacements for `train`, e.g. [`TuneReport::selected`].
    #[serde(default)]
    pub tuned: Vec<TuneChoice>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauRun {
    pub indicator: Indicator,
    pub n_pairs: usize,
    pub profile: u64,
    pub seed: u64,
    pub tau_mean: f64,
    pub tau_std: f64,
    pub per_fold: Vec<f64>,
}

/// Mean and spread of the per-run CV means for one (indicator, regime).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauSummary {
    pub indicator: Indicator,
    pub n_pairs: usize,
    pub runs: usize,
    pub tau_mean: f64,
    pub tau_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauCurveReport {
    pub args: TauCurveArgs,
    pub runs: Vec<TauRun>,
    pub summary: Vec<TauSummary>,
}

impl TauCurveReport {
    /// Summary means for one indicator, in regime order.
    pub fn curve(&self, kind: Indicator) -> Vec<(usize, f64)> {
        self.summary.iter().filter(|s| s.indicator == kind).map(|s| (s.n_pairs, s.tau_mean)).collect()
    }
}

fn train_for(base: &TrainConfig, tuned: &[TuneChoice], kind: Indicator) -> TrainConfig {
    tuned.iter().rev().find(|t| t.indicator == kind).map_or(*base, |t| t.train)
}

fn validate_train(base: &TrainConfig, tuned: &[TuneChoice]) -> Result<()> {
    base.validate()?;
    tuned.iter().try_for_each(|t| t.train.validate())
}

pub fn tau_curve(args: &TauCurveArgs) -> Result<TauCurveReport> {
    check_nonempty("indicators", args.indicators.len())?;
    check_nonempty("pair regimes", args.n_pairs.len())?;
    check_nonempty("profiles", args.profiles.len())?;
    check_nonempty("seeds", args.seeds.len())?;
    validate_train(&args.train, &args.tuned)?;

    let runs = grid_runs(&args.profiles, &args.seeds);
    let fronts: Vec<Vec<EvaluatedFront>> = runs.par_iter().map(|&(p, s)| sampled(p, s)).collect();

    let mut jobs = Vec::new();
    for &kind in &args.indicators {
        for &n_pairs in &args.n_pairs {
            for r in 0..runs.len() {
                jobs.push((kind, n_pairs, r));
            }
        }
    }
    let results: Vec<TauRun> = jobs
        .par_iter()
        .map(|&(kind, n_pairs, r)| {
            let (profile, seed) = runs[r];
            let cfg = TrainConfig { seed, ..train_for(&args.train, &args.tuned, kind) };
            let rep = cross_validate_ranker(&fronts[r], kind, n_pairs, &cfg)?;
            Ok(TauRun {
                indicator: kind,
                n_pairs,
                profile,
                seed,
                tau_mean: rep.tau_mean,
                tau_std: rep.tau_std,
                per_fold: rep.per_fold,
            })
        })
        .collect::<Result<_>>()?;

    let summary = results
        .chunks(runs.len())
        .map(|chunk| {
            let means: Vec<f64> = chunk.iter().map(|r| r.tau_mean).collect();
            let (tau_mean, tau_std) = mean_std(&means);
            TauSummary {
                indicator: chunk[0].indicator,
                n_pairs: chunk[0].n_pairs,
                runs: chunk.len(),
                tau_mean,
                tau_std,
            }
        })
        .collect();
    Ok(TauCurveReport { args: args.clone(), runs: results, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixArgs {
    pub profiles: Vec<u64>,
    pub seeds: Vec<u64>,
    pub budget: usize,
    pub n_pairs: usize,
    pub train: TrainConfig,
    /// Per-indicator replacements for `train`.
    #[serde(default)]
    pub tuned: Vec<TuneChoice>,
    /// Surrogate candidates per proposal.
    pub n_candidates: usize,
}

/// Final-front scores of one (profile, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRun {
    pub profile: u64,
    pub seed: u64,
    /// `pb[r]`: row indicator `r` scoring the preference-based incumbent trained on `r` labels.
    pub pb: Vec<f64>,
    /// `ib[r][c]`: row indicator `r` scoring the incumbent of the run optimizing indicator `c`.
    pub ib: Vec<Vec<f64>>,
    pub pb_fronts: Vec<ParetoFront>,
    pub ib_fronts: Vec<ParetoFront>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Win,
    Tie,
    Loss,
}

/// Relative tolerance under which PB and IB count as equal.
pub const TIE_TOLERANCE: f64 = 0.05;

/// PB against IB on a row indicator: strictly better beyond the tolerance is a
/// win, within it a tie.
pub fn compare(row: Indicator, pb: f64, ib: f64, tolerance: f64) -> Outcome {
    if (pb - ib).abs() <= tolerance * ib.abs() {
        Outcome::Tie
    } else if row.direction().better(pb, ib) {
        Outcome::Win
    } else {
        Outcome::Loss
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixCell {
    pub row: Indicator,
    pub column: Indicator,
    pub pb_mean: f64,
    pub pb_std: f64,
    pub ib_mean: f64,
    pub ib_std: f64,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSummary {
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
}

impl OutcomeSummary {
    pub fn better_or_equal(&self) -> usize {
        self.wins + self.ties
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixReport {
    pub args: MatrixArgs,
    pub indicators: Vec<Indicator>,
    /// Row-major over [`Indicator::ALL`].
    pub cells: Vec<MatrixCell>,
    pub summary: OutcomeSummary,
    pub runs: Vec<MatrixRun>,
}

impl MatrixReport {
    pub fn cell(&self, row: Indicator, column: Indicator) -> Option<&MatrixCell> {
        self.cells.iter().find(|c| c.row == row && c.column == column)
    }
}

fn benchmark_objective<'a>(
    spec: &'a CostSpec,
    profile: &'a DatasetProfile,
    grid: &'a EpochGrid,
    refs: &'a References,
) -> impl FnMut(&crate::benchmark::Configuration) -> std::result::Result<Evaluation, String> + 'a {
    let mut step = 0usize;
    move |cfg| {
        let ef = evaluate(format!("trial-{step:03}"), cfg, profile, grid);
        step += 1;
        let c = cost(spec, &ef, refs).map_err(|e| e.to_string())?;
        Ok(Evaluation { cost: c, front: Some(ef.front) })
    }
}

/// Optimizes `spec` on a profile and returns the final incumbent front.
pub fn run_hpo(spec: &CostSpec, profile: u64, opt: &OptimizerConfig) -> Result<ParetoFront> {
    let profile = DatasetProfile::new(profile);
    let grid = EpochGrid::default();
    let refs = References::default();
    let traj = optimize(benchmark_objective(spec, &profile, &grid, &refs), &ConfigSpace::lcbench(), opt)?;
    traj.incumbent().and_then(|t| t.front.clone()).ok_or_else(|| Error::Numeric("no successful evaluation".into()))
}

/// Simulated user: labels `n_pairs` random pairs of the sampled fronts with a
/// strict oracle on `kind` and trains a utility model with frozen statistics.
pub fn learn_preference_cost(
    fronts: &[EvaluatedFront],
    kind: Indicator,
    n_pairs: usize,
    train: &TrainConfig,
    seed: u64,
) -> Result<CostSpec> {
    let enc = EncodingConfig::default();
    let matrices = fronts.iter().map(|f| build_loss_matrix(&f.models, &enc)).collect::<Result<Vec<_>>>()?;
    let stats = fit_stats(&matrices)?;
    let features: HashMap<String, FeatureVector> =
        fronts.iter().zip(&matrices).map(|(f, m)| Ok((f.id.clone(), encode(m, &stats)?))).collect::<Result<_>>()?;
    let ids: Vec<String> = fronts.iter().map(|f| f.id.clone()).collect();
    let pairs = build_pairs(&ids, Some(n_pairs), rng::derive(seed, &[rng::label("user-pairs"), kind as u64]))?;
    let prefs = label_pairs(&pairs, fronts, &OracleConfig::strict(kind), &References::default())?;
    let data = build_svm_dataset(&prefs, &features)?;
    let model = train_linear_ranksvm(&data, train)?.bind_stats(&stats);
    CostSpec::preference(model, stats)
}

fn score(front: &ParetoFront, kind: Indicator) -> Result<f64> {
    indicator_value(kind, front, &References::default())
}

fn matrix_run(args: &MatrixArgs, profile: u64, seed: u64) -> Result<MatrixRun> {
    let fronts = sampled(profile, seed);
    let opt = OptimizerConfig {
        budget: args.budget,
        n_init: 8.min(args.budget.saturating_sub(1)).max(1),
        n_candidates: args.n_candidates,
        seed: rng::derive(seed, &[profile, rng::label("hpo")]),
        ..Default::default()
    };
    let kinds = Indicator::ALL;
    let mut pb = Vec::with_capacity(kinds.len());
    let mut pb_fronts = Vec::with_capacity(kinds.len());
    for &kind in &kinds {
        let train = train_for(&args.train, &args.tuned, kind);
        let spec = learn_preference_cost(&fronts, kind, args.n_pairs, &train, seed)?;
        let front = run_hpo(&spec, profile, &opt)?;
        pb.push(score(&front, kind)?);
        pb_fronts.push(front);
    }
    let ib_fronts =
        kinds.iter().map(|&kind| run_hpo(&CostSpec::Indicator { kind }, profile, &opt)).collect::<Result<Vec<_>>>()?;
    let ib = kinds
        .iter()
        .map(|&row| ib_fronts.iter().map(|f| score(f, row)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(MatrixRun { profile, seed, pb, ib, pb_fronts, ib_fronts })
}

pub fn pb_ib_matrix(args: &MatrixArgs) -> Result<MatrixReport> {
    check_nonempty("profiles", args.profiles.len())?;
    check_nonempty("seeds", args.seeds.len())?;
    if args.budget < 2 {
        return Err(Error::param("budget must be at least 2"));
    }
    validate_train(&args.train, &args.tuned)?;

    let runs: Vec<MatrixRun> = grid_runs(&args.profiles, &args.seeds)
        .par_iter()
        .map(|&(p, s)| matrix_run(args, p, s))
        .collect::<Result<_>>()?;

    let kinds = Indicator::ALL;
    let mut cells = Vec::with_capacity(kinds.len() * kinds.len());
    let mut summary = OutcomeSummary::default();
    for (r, &row) in kinds.iter().enumerate() {
        let (pb_mean, pb_std) = mean_std(&runs.iter().map(|m| m.pb[r]).collect::<Vec<_>>());
        for (c, &column) in kinds.iter().enumerate() {
            let (ib_mean, ib_std) = mean_std(&runs.iter().map(|m| m.ib[r][c]).collect::<Vec<_>>());
            let outcome = compare(row, pb_mean, ib_mean, TIE_TOLERANCE);
            match outcome {
                Outcome::Win => summary.wins += 1,
                Outcome::Tie => summary.ties += 1,
                Outcome::Loss => summary.losses += 1,
            }
            cells.push(MatrixCell { row, column, pb_mean, pb_std, ib_mean, ib_std, outcome });
        }
    }
    Ok(MatrixReport { args: args.clone(), indicators: kinds.to_vec(), cells, summary, runs })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneArgs {
    pub reg_grid: Vec<f64>,
    pub indicators: Vec<Indicator>,
    pub profiles: Vec<u64>,
    pub seeds: Vec<u64>,
    pub n_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneCell {
    pub indicator: Indicator,
    pub reg: f64,
    pub tau_mean: f64,
    pub tau_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneChoice {
    pub indicator: Indicator,
    pub train: TrainConfig,
    pub tau_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub args: TuneArgs,
    pub cells: Vec<TuneCell>,
    pub selected: Vec<TuneChoice>,
}

/// Grid search over the regularization strength; per indicator the highest
/// mean CV tau wins, ties going to the smallest `reg`.
pub fn tune_ranker(args: &TuneArgs) -> Result<TuneReport> {
    check_nonempty("reg grid", args.reg_grid.len())?;
    if args.reg_grid.iter().any(|r| r.is_nan() || *r <= 0.0 || !r.is_finite()) {
        return Err(Error::param("reg values must be positive and finite"));
    }
    let mut grid = args.reg_grid.clone();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut cells = Vec::new();
    let mut selected = Vec::new();
    for &kind in &args.indicators {
        let mut best: Option<TuneChoice> = None;
        for &reg in &grid {
            let rep = tau_curve(&TauCurveArgs {
                indicators: vec![kind],
                n_pairs: vec![args.n_pairs],
                profiles: args.profiles.clone(),
                seeds: args.seeds.clone(),
                train: TrainConfig { reg, ..Default::default() },
                tuned: Vec::new(),
            })?;
            let s = &rep.summary[0];
            cells.push(TuneCell { indicator: kind, reg, tau_mean: s.tau_mean, tau_std: s.tau_std });
            if best.as_ref().is_none_or(|b| s.tau_mean > b.tau_mean) {
                best = Some(TuneChoice {
                    indicator: kind,
                    train: TrainConfig { reg, ..Default::default() },
                    tau_mean: s.tau_mean,
                });
            }
        }
        selected.extend(best);
    }
    check_nonempty("indicators", selected.len())?;
    Ok(TuneReport { args: args.clone(), cells, selected })
}
