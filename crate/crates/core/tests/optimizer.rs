mod oracles;

use prefpareto_core::benchmark::{ConfigSpace, Configuration};
use prefpareto_core::experiment::run_hpo;
use prefpareto_core::hpo::{optimize, optimize_observed, CostSpec, ForestConfig, OptimizerConfig, RandomForest};
use prefpareto_core::mo::Direction;
use prefpareto_core::mo::Indicator;
use prefpareto_core::ranking_eval::{kendall_tau_b, TiedRanking};
use prefpareto_core::rng;

use oracles::toy;

#[test]
fn optimizer_reaches_toy_minimum_and_beats_random_search() {
    oracles::check_bo(20).unwrap();
}

#[test]
fn observer_sees_every_trial_in_order() {
    let mut seen = Vec::new();
    let opt = OptimizerConfig { budget: 12, n_init: 4, n_candidates: 100, ..Default::default() };
    let t =
        optimize_observed(toy, &ConfigSpace::lcbench(), &opt, &[], &mut |trial| seen.push(trial.trial_index)).unwrap();
    assert_eq!(seen, (0..12).collect::<Vec<_>>());
    assert_eq!(t.len(), 12);
}

#[test]
fn priors_change_proposals_but_not_budget() {
    let opt = OptimizerConfig { budget: 12, n_init: 4, n_candidates: 100, seed: 3, ..Default::default() };
    let space = ConfigSpace::lcbench();
    let plain = optimize(toy, &space, &opt).unwrap();
    let mut r = rng::stream(9, &[]);
    let prior: Vec<(Configuration, f64)> = (0..10)
        .map(|_| {
            let c = prefpareto_core::benchmark::sample_config(&space, &mut r);
            let v = toy(&c).unwrap().cost;
            (c, v)
        })
        .collect();
    let warm = optimize_observed(toy, &space, &opt, &prior, &mut |_| {}).unwrap();
    assert_eq!(warm.len(), 12);
    assert_eq!(warm.trials[..4], plain.trials[..4]);
    assert_ne!(warm.trials[4..], plain.trials[4..]);
}

#[test]
fn surrogate_ranks_a_monotone_function() {
    let mut r = rng::stream(5, &[]);
    use rand::Rng;
    let x: Vec<Vec<f64>> = (0..25).map(|_| vec![r.random::<f64>()]).collect();
    let y: Vec<f64> = x.iter().map(|v| v[0].powi(3)).collect();
    let forest = RandomForest::fit(&x, &y, &ForestConfig::default(), &mut r);
    let ids: Vec<String> = (0..50).map(|i| format!("g{i:02}")).collect();
    let grid: Vec<f64> = (0..50).map(|i| (i as f64 + 0.5) / 50.0).collect();
    let pred: Vec<f64> = grid.iter().map(|g| forest.predict(&[*g]).0).collect();
    let truth: Vec<f64> = grid.iter().map(|g| g.powi(3)).collect();
    let a = TiedRanking::from_scores(&ids, &pred, Direction::Minimize).unwrap();
    let b = TiedRanking::from_scores(&ids, &truth, Direction::Minimize).unwrap();
    assert!(kendall_tau_b(&a, &b).unwrap() > 0.5);
}

#[test]
fn benchmark_hpo_returns_a_front() {
    let opt = OptimizerConfig { budget: 10, n_init: 4, n_candidates: 100, ..Default::default() };
    let front = run_hpo(&CostSpec::Indicator { kind: Indicator::Hv }, 0, &opt).unwrap();
    assert!(!front.is_empty());
    assert_eq!(front, run_hpo(&CostSpec::Indicator { kind: Indicator::Hv }, 0, &opt).unwrap());
}
