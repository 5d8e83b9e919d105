//! Independent reference implementations and randomized equivalence checks.
//!
//! Shared by the core integration tests and the acceptance runner, which
//! includes this file by path.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use prefpareto_core::benchmark::{sample_fronts, ConfigSpace, Configuration, DatasetProfile, EpochGrid};
use prefpareto_core::frontfeat::{build_loss_matrix, encode, fit_stats, EncodingConfig, FeatureVector};
use prefpareto_core::hpo::{optimize, random_search, Evaluation, OptimizerConfig};
use prefpareto_core::mo::{
    hypervolume, max_spread, pareto_filter, r2_indicator, spacing, ModelPoint, ParetoFront, ReferencePoint,
};
use prefpareto_core::ranker::{
    build_svm_dataset, predict_pref, train_linear_ranksvm, Predicted, PreferencePair, PreferenceSource, TrainConfig,
};
use prefpareto_core::ranking_eval::{fisher_jenks, kendall_tau_b, TiedRanking};
use prefpareto_core::rng;
use rand::Rng;

pub type Check = Result<String, String>;

pub fn random_points(r: &mut rng::Rng, n: usize) -> Vec<ModelPoint> {
    (0..n).map(|i| ModelPoint::new(format!("m{i:02}"), vec![r.random::<f64>(), r.random::<f64>()]).unwrap()).collect()
}

/// Points on a coarse lattice so duplicates and equal coordinates occur.
pub fn lattice_points(r: &mut rng::Rng, n: usize) -> Vec<ModelPoint> {
    (0..n)
        .map(|i| {
            let a = r.random_range(0..6) as f64 / 5.0;
            let e = r.random_range(0..6) as f64 / 5.0;
            ModelPoint::new(format!("m{i:02}"), vec![a, e]).unwrap()
        })
        .collect()
}

fn coords(front: &ParetoFront) -> Vec<(f64, f64)> {
    front.points().iter().map(|p| (p.losses[0], p.losses[1])).collect()
}

/// Dominated area inside the unit square, counted on an `n x n` grid of
/// cell midpoints.
pub fn hv_grid(points: &[(f64, f64)], n: usize) -> f64 {
    let h = 1.0 / n as f64;
    let mut covered = 0u64;
    for i in 0..n {
        let x = (i as f64 + 0.5) * h;
        // lowest energy among points at or left of x
        let floor = points.iter().filter(|p| p.0 <= x).map(|p| p.1).fold(f64::INFINITY, f64::min);
        for j in 0..n {
            let y = (j as f64 + 0.5) * h;
            if y >= floor {
                covered += 1;
            }
        }
    }
    covered as f64 * h * h
}

pub fn sp_naive(points: &[(f64, f64)]) -> f64 {
    let n = points.len();
    if n <= 1 {
        return 0.0;
    }
    let mut d = Vec::new();
    for i in 0..n {
        let mut best = f64::INFINITY;
        for j in 0..n {
            if i != j {
                let dist = (points[i].0 - points[j].0).abs() + (points[i].1 - points[j].1).abs();
                if dist < best {
                    best = dist;
                }
            }
        }
        d.push(best);
    }
    let mut sum = 0.0;
    for v in &d {
        sum += v;
    }
    let mean = sum / n as f64;
    let mut ss = 0.0;
    for v in &d {
        ss += (mean - v) * (mean - v);
    }
    (ss / (n - 1) as f64).sqrt()
}

pub fn ms_naive(points: &[(f64, f64)]) -> f64 {
    let mut ext0: f64 = 0.0;
    let mut ext1: f64 = 0.0;
    for a in points {
        for b in points {
            ext0 = ext0.max((a.0 - b.0).abs());
            ext1 = ext1.max((a.1 - b.1).abs());
        }
    }
    (ext0 * ext0 + ext1 * ext1).sqrt()
}

pub fn r2_naive(points: &[(f64, f64)]) -> f64 {
    let mut best = f64::INFINITY;
    for p in points {
        let cheb = if p.0.abs() > p.1.abs() { p.0.abs() } else { p.1.abs() };
        if cheb < best {
            best = cheb;
        }
    }
    best
}

pub fn check_indicators(n_fronts: usize, seed: u64) -> Check {
    let mut r = rng::stream(seed, &[rng::label("indicator-oracle")]);
    let refs = (ReferencePoint(vec![1.0, 1.0]), ReferencePoint(vec![0.0, 0.0]));
    let mut worst_hv: f64 = 0.0;
    for f in 0..n_fronts {
        // sizes 1..=20 after filtering: sample extra points on a curve-like spread
        let want = 1 + f % 20;
        let mut pts = Vec::new();
        for i in 0..want {
            let a = r.random::<f64>();
            let e = (1.0 - a).powf(r.random_range(0.5..2.0)) * r.random_range(0.6..1.0);
            pts.push(ModelPoint::new(format!("m{i:02}"), vec![a, e]).unwrap());
        }
        let front = pareto_filter(&pts).map_err(|e| e.to_string())?;
        let c = coords(&front);
        let hv = hypervolume(&front, &refs.0).map_err(|e| e.to_string())?;
        let grid = hv_grid(&c, 2000);
        worst_hv = worst_hv.max((hv - grid).abs());
        if (hv - grid).abs() > 1e-3 {
            return Err(format!("front {f}: sweep {hv} vs grid {grid}"));
        }
        let checks = [
            ("SP", spacing(&front), sp_naive(&c)),
            ("MS", max_spread(&front), ms_naive(&c)),
            ("R2", r2_indicator(&front, &refs.1).map_err(|e| e.to_string())?, r2_naive(&c)),
        ];
        for (name, fast, naive) in checks {
            if (fast - naive).abs() > 1e-12 {
                return Err(format!("front {f}: {name} {fast} vs naive {naive}"));
            }
        }
    }
    Ok(format!("{n_fronts} fronts, max |HV - grid| = {worst_hv:.2e}"))
}

fn seg_ssd(v: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in v {
        s += x;
    }
    let m = s / v.len() as f64;
    let mut ss = 0.0;
    for x in v {
        ss += (x - m) * (x - m);
    }
    ss
}

/// Every split of sorted `values` into `k` non-empty runs, in lexicographic
/// order of break indices; the first strict minimum wins. Segment costs are
/// summed right to left.
pub fn jenks_exhaustive(values: &[f64], k: usize) -> (f64, Vec<usize>) {
    let n = values.len();
    let mut best = (f64::INFINITY, Vec::new());
    let mut breaks: Vec<usize> = (1..k).collect();
    loop {
        let mut bounds = vec![0];
        bounds.extend(&breaks);
        bounds.push(n);
        let mut total = 0.0;
        let mut first = true;
        for w in bounds.windows(2).rev() {
            let s = seg_ssd(&values[w[0]..w[1]]);
            total = if first { s } else { s + total };
            first = false;
        }
        if total < best.0 {
            best = (total, breaks.clone());
        }
        // next combination of k-1 breaks from 1..n
        let m = breaks.len();
        let mut i = m;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if breaks[i] < n - (m - i) {
                breaks[i] += 1;
                for j in i + 1..m {
                    breaks[j] = breaks[j - 1] + 1;
                }
                break;
            }
        }
    }
}

pub fn check_jenks(n_sets: usize, seed: u64) -> Check {
    let mut r = rng::stream(seed, &[rng::label("jenks-oracle")]);
    let mut compared = 0;
    for s in 0..n_sets {
        let n = r.random_range(1..=12);
        let mut v: Vec<f64> = if s % 4 == 0 {
            (0..n).map(|_| r.random_range(0..5) as f64).collect()
        } else {
            (0..n).map(|_| r.random::<f64>() * 10.0).collect()
        };
        v.sort_by(f64::total_cmp);
        for k in 1..=n.min(4) {
            let dp = fisher_jenks(&v, k).map_err(|e| e.to_string())?;
            let (cost, breaks) = jenks_exhaustive(&v, k);
            if dp.cost != cost || dp.breaks != breaks {
                return Err(format!(
                    "{v:?} k={k}: dp ({}, {:?}) vs exhaustive ({cost}, {breaks:?})",
                    dp.cost, dp.breaks
                ));
            }
            let bounds: Vec<f64> = breaks.iter().map(|b| v[b - 1]).collect();
            if dp.boundaries != bounds {
                return Err(format!("{v:?} k={k}: boundaries {:?} vs {bounds:?}", dp.boundaries));
            }
            compared += 1;
        }
    }
    Ok(format!("{n_sets} value sets, {compared} (set, k) cases"))
}

/// Tie-corrected tau-b by direct pair enumeration.
pub fn tau_b_naive(x: &[usize], y: &[usize]) -> f64 {
    let n = x.len();
    let (mut c, mut d, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    let mut total = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            total += 1;
            let dx = x[i] as i64 - x[j] as i64;
            let dy = y[i] as i64 - y[j] as i64;
            if dx == 0 {
                tx += 1;
            }
            if dy == 0 {
                ty += 1;
            }
            if dx * dy > 0 {
                c += 1;
            } else if dx * dy < 0 {
                d += 1;
            }
        }
    }
    let denom = ((total - tx) as f64 * (total - ty) as f64).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        (c - d) as f64 / denom
    }
}

/// Random ranks with `groups` levels, relabelled to be dense.
pub fn random_ranks(r: &mut rng::Rng, n: usize, groups: usize) -> Vec<usize> {
    let raw: Vec<usize> = (0..n).map(|_| r.random_range(0..groups)).collect();
    let levels: BTreeSet<usize> = raw.iter().copied().collect();
    let levels: Vec<usize> = levels.into_iter().collect();
    raw.iter().map(|v| levels.iter().position(|l| l == v).unwrap() + 1).collect()
}

pub fn ranking(ranks: &[usize]) -> TiedRanking {
    TiedRanking::new(ranks.iter().enumerate().map(|(i, r)| (format!("i{i:02}"), *r)).collect()).unwrap()
}

pub fn check_tau(n_pairs: usize, seed: u64) -> Check {
    let mut r = rng::stream(seed, &[rng::label("tau-oracle")]);
    let mut worst: f64 = 0.0;
    for p in 0..n_pairs {
        let n = r.random_range(2..=30);
        let gx = r.random_range(1..=n);
        let gy = r.random_range(1..=n);
        let x = random_ranks(&mut r, n, gx);
        let y = random_ranks(&mut r, n, gy);
        let fast = kendall_tau_b(&ranking(&x), &ranking(&y)).map_err(|e| e.to_string())?;
        let naive = tau_b_naive(&x, &y);
        worst = worst.max((fast - naive).abs());
        if (fast - naive).abs() > 1e-12 {
            return Err(format!("pair {p}: {x:?} vs {y:?}: fast {fast}, naive {naive}"));
        }
    }
    Ok(format!("{n_pairs} ranking pairs, max deviation {worst:.1e}"))
}

/// Non-dominated subset by brute force, duplicates collapsed.
pub fn brute_pareto(points: &[ModelPoint]) -> BTreeSet<(u64, u64)> {
    let mut out = BTreeSet::new();
    for p in points {
        let (a, e) = (p.losses[0], p.losses[1]);
        let dominated = points.iter().any(|q| {
            let (qa, qe) = (q.losses[0], q.losses[1]);
            qa <= a && qe <= e && (qa < a || qe < e)
        });
        if !dominated {
            out.insert((a.to_bits(), e.to_bits()));
        }
    }
    out
}

pub fn check_staircase(n_sets: usize, seed: u64) -> Check {
    let mut r = rng::stream(seed, &[rng::label("staircase-oracle")]);
    let cfg = EncodingConfig::default();
    for s in 0..n_sets {
        let n = r.random_range(1..=8);
        let pts = if s % 2 == 0 { random_points(&mut r, n) } else { lattice_points(&mut r, n) };
        let m = build_loss_matrix(&pts, &cfg).map_err(|e| e.to_string())?;
        let rows: BTreeSet<(u64, u64)> = m.rows.iter().map(|row| (row[0].to_bits(), row[1].to_bits())).collect();
        let expected = brute_pareto(&pts);
        if rows != expected {
            return Err(format!("set {s}: matrix rows {:?} vs non-dominated {:?}", m.rows, expected));
        }
        let filtered: BTreeSet<(u64, u64)> = pareto_filter(&pts)
            .map_err(|e| e.to_string())?
            .points()
            .iter()
            .map(|p| (p.losses[0].to_bits(), p.losses[1].to_bits()))
            .collect();
        if filtered != expected {
            return Err(format!("set {s}: pareto_filter disagrees with brute force"));
        }
        let last = &m.rows[m.b_filled - 1];
        if m.rows[m.b_filled..].iter().any(|row| row != last) || m.rows.len() != cfg.max_models {
            return Err(format!("set {s}: padding rows differ from the final row"));
        }
    }
    Ok(format!("{n_sets} model sets"))
}

/// Fronts from a benchmark profile with features standardized on all of them.
pub fn planted_features(n: usize, profile: u64, seed: u64) -> (Vec<String>, HashMap<String, FeatureVector>) {
    let fronts = sample_fronts(n, &DatasetProfile::new(profile), &EpochGrid::default(), seed);
    let enc = EncodingConfig::default();
    let mats: Vec<_> = fronts.iter().map(|f| build_loss_matrix(&f.evaluated.models, &enc).unwrap()).collect();
    let stats = fit_stats(&mats).unwrap();
    let ids: Vec<String> = fronts.iter().map(|f| f.evaluated.id.clone()).collect();
    let feats = ids.iter().cloned().zip(mats.iter().map(|m| encode(m, &stats).unwrap())).collect();
    (ids, feats)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fraction of held-out planted pairs ordered correctly for one seed.
///
/// Training and held-out pairs are disjoint pairs over the same 60 fronts.
pub fn planted_accuracy(w_star: &[f64], n_train: usize, n_test: usize, train: &TrainConfig, seed: u64) -> f64 {
    let (ids, feats) = planted_features(60, seed % 7, seed);
    let mut r = rng::stream(seed, &[rng::label("planted-pairs")]);
    let mut seen = BTreeSet::new();
    let mut prefs = Vec::new();
    while prefs.len() < n_train + n_test {
        let (i, j) = (r.random_range(0..ids.len()), r.random_range(0..ids.len()));
        let (a, b) = (&ids[i.min(j)], &ids[i.max(j)]);
        let (ua, ub) = (dot(w_star, feats[a].values()), dot(w_star, feats[b].values()));
        if i == j || ua == ub || !seen.insert((i.min(j), i.max(j))) {
            continue;
        }
        let (w, l) = if ua > ub { (a, b) } else { (b, a) };
        prefs.push(PreferencePair::new(w.clone(), l.clone(), PreferenceSource::Simulated).unwrap());
    }
    let (train_prefs, test) = prefs.split_at(n_train);
    let data = build_svm_dataset(train_prefs, &feats).unwrap();
    let model = train_linear_ranksvm(&data, &TrainConfig { seed, ..*train }).unwrap();
    let correct = test
        .iter()
        .filter(|p| predict_pref(&model, &feats[&p.winner], &feats[&p.loser]).unwrap() == Predicted::First)
        .count();
    correct as f64 / n_test as f64
}

/// Planted `w* = e1`; every seed must reach 95% held-out accuracy.
pub fn check_planted(seeds: &[u64], train: &TrainConfig) -> Check {
    let mut w = vec![0.0; EncodingConfig::default().dim()];
    w[0] = 1.0;
    let mut accs = Vec::new();
    for &s in seeds {
        let acc = planted_accuracy(&w, 100, 50, train, s);
        accs.push(acc);
        if acc < 0.95 {
            return Err(format!("seed {s}: held-out accuracy {acc:.3} < 0.95"));
        }
    }
    Ok(format!("held-out accuracies {accs:?}"))
}

/// Effective 1-D objective: quadratic in log10 of the learning rate, minimum 1
/// at 1e-2, every other parameter ignored.
pub fn toy(cfg: &Configuration) -> Result<Evaluation, String> {
    Ok(Evaluation { cost: 1.0 + (cfg.learning_rate.log10() + 2.0).powi(2), front: None })
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Minimum of [`toy`] over 10,000 log-spaced learning rates spanning the space.
pub fn toy_grid_minimum() -> f64 {
    let lr = ConfigSpace::lcbench().params.into_iter().find(|p| p.name == "learning_rate").unwrap();
    let (lo, hi) = (lr.low.log10(), lr.high.log10());
    (0..10_000)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / 9_999.0;
            1.0 + (x + 2.0).powi(2)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Median incumbent over `n_seeds` within 5% of the grid minimum and no worse
/// than random search with the same budget.
pub fn check_bo(n_seeds: u64) -> Check {
    let space = ConfigSpace::lcbench();
    let opt = OptimizerConfig::default();
    let bo: Vec<f64> = (0..n_seeds)
        .map(|s| optimize(toy, &space, &OptimizerConfig { seed: s, ..opt.clone() }).unwrap().incumbent().unwrap().cost)
        .collect();
    let rs: Vec<f64> =
        (0..n_seeds).map(|s| random_search(toy, &space, opt.budget, s).unwrap().incumbent().unwrap().cost).collect();
    let (g, mb, mr) = (toy_grid_minimum(), median(bo), median(rs));
    let msg = format!("optimizer median {mb:.6}, random search median {mr:.6}, grid minimum {g:.6}");
    if mb <= g * 1.05 && mb < mr {
        Ok(msg)
    } else {
        Err(msg)
    }
}
