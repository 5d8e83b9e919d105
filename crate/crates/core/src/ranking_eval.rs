//! Ranking evaluation: natural-breaks ties, Kendall tau-b and the
//! cross-validation protocol for the front ranker.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontfeat::{build_loss_matrix, encode, fit_stats, EncodingConfig, FeatureVector};
use crate::mo::{indicator_value, Direction, EvaluatedFront, Indicator, References};
use crate::oracle::{label_pairs, OracleConfig};
use crate::ranker::{build_svm_dataset, train_linear_ranksvm, utility, TrainConfig};
use crate::rng;

/// Items with 1-based ranks; equal rank means tied.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TiedRanking {
    pub items: Vec<(String, usize)>,
}

impl TiedRanking {
    /// Validates that ranks are exactly `{1..k}` and ids are unique.
    pub fn new(items: Vec<(String, usize)>) -> Result<Self> {
        let mut ids: Vec<&str> = items.iter().map(|(id, _)| id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::param("duplicate item in ranking"));
        }
        let mut ranks: Vec<usize> = items.iter().map(|(_, r)| *r).collect();
        ranks.sort_unstable();
        ranks.dedup();
        if ranks.iter().enumerate().any(|(i, r)| *r != i + 1) {
            return Err(Error::param("ranks must form a contiguous set starting at 1"));
        }
        Ok(TiedRanking { items })
    }

    /// Dense ranking of scores; exactly equal scores tie.
    pub fn from_scores(ids: &[String], scores: &[f64], direction: Direction) -> Result<Self> {
        if ids.len() != scores.len() {
            return Err(Error::Dimension { expected: ids.len(), got: scores.len() });
        }
        let mut distinct: Vec<f64> = scores.to_vec();
        distinct.sort_by(|a, b| a.total_cmp(b));
        distinct.dedup();
        if direction == Direction::Maximize {
            distinct.reverse();
        }
        let items = ids
            .iter()
            .zip(scores)
            .map(|(id, s)| {
                let r = distinct.iter().position(|d| d == s).expect("score present") + 1;
                (id.clone(), r)
            })
            .collect();
        TiedRanking::new(items)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn rank_of(&self, id: &str) -> Option<usize> {
        self.items.iter().find(|(i, _)| i == id).map(|(_, r)| *r)
    }

    pub fn n_groups(&self) -> usize {
        self.items.iter().map(|(_, r)| *r).max().unwrap_or(0)
    }
}

/// Optimal partition of sorted values into contiguous buckets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreaksResult {
    pub k: usize,
    /// Start index of buckets `2..=k`.
    pub breaks: Vec<usize>,
    /// Largest value of each bucket except the last.
    pub boundaries: Vec<f64>,
    /// Bucket index per input value.
    pub assignment: Vec<usize>,
    /// Total within-bucket sum of squared deviations.
    pub cost: f64,
    /// Goodness of variance fit, `1 - cost / total`.
    pub gvf: f64,
}

/// Sum of squared deviations from the mean of `v`.
pub(crate) fn ssd(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - mean) * (x - mean)).sum()
}

fn gvf_from(cost: f64, total: f64) -> f64 {
    if total == 0.0 {
        1.0
    } else {
        1.0 - cost / total
    }
}

fn check_sorted(values: &[f64]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite value in breaks input".into()));
    }
    if values.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::param("values must be sorted ascending"));
    }
    Ok(())
}

/// Suffix dynamic program: `best[k][i]` is the cheapest split of
/// `values[i..]` into `k` buckets, with ties resolved towards the earliest
/// first break. Costs accumulate right to left (`s1 + (s2 + ...)`).
struct Jenks {
    n: usize,
    seg: Vec<Vec<f64>>,
    best: Vec<Vec<f64>>,
    cut: Vec<Vec<usize>>,
}

impl Jenks {
    fn solve(values: &[f64], k_max: usize) -> Jenks {
        let n = values.len();
        let mut seg = vec![vec![0.0; n + 1]; n + 1];
        for i in 0..n {
            for j in i + 1..=n {
                seg[i][j] = ssd(&values[i..j]);
            }
        }
        let mut best = vec![vec![f64::INFINITY; n + 1]; k_max + 1];
        let mut cut = vec![vec![n; n + 1]; k_max + 1];
        for i in 0..n {
            best[1][i] = seg[i][n];
        }
        for k in 2..=k_max {
            for i in 0..n {
                if n - i < k {
                    continue;
                }
                for j in i + 1..=n - (k - 1) {
                    let c = seg[i][j] + best[k - 1][j];
                    if c < best[k][i] {
                        best[k][i] = c;
                        cut[k][i] = j;
                    }
                }
            }
        }
        Jenks { n, seg, best, cut }
    }

    fn total(&self) -> f64 {
        self.seg[0][self.n]
    }

    fn result(&self, values: &[f64], k: usize) -> BreaksResult {
        let mut breaks = Vec::with_capacity(k - 1);
        let mut i = 0;
        for kk in (2..=k).rev() {
            i = self.cut[kk][i];
            breaks.push(i);
        }
        let mut assignment = vec![0; self.n];
        let mut bucket = 0;
        for (idx, a) in assignment.iter_mut().enumerate() {
            while bucket < breaks.len() && idx >= breaks[bucket] {
                bucket += 1;
            }
            *a = bucket;
        }
        let cost = self.best[k][0];
        BreaksResult {
            k,
            boundaries: breaks.iter().map(|b| values[b - 1]).collect(),
            breaks,
            assignment,
            cost,
            gvf: gvf_from(cost, self.total()),
        }
    }
}

pub fn fisher_jenks(values: &[f64], k: usize) -> Result<BreaksResult> {
    check_sorted(values)?;
    if k == 0 || k > values.len() {
        return Err(Error::param(format!("k = {k} outside 1..={}", values.len())));
    }
    Ok(Jenks::solve(values, k).result(values, k))
}

/// Goodness of variance fit for `k = 1..=k_max`.
pub fn gvf_curve(values: &[f64], k_max: usize) -> Result<Vec<f64>> {
    check_sorted(values)?;
    if k_max == 0 || k_max > values.len() {
        return Err(Error::param(format!("k_max = {k_max} outside 1..={}", values.len())));
    }
    let j = Jenks::solve(values, k_max);
    Ok((1..=k_max).map(|k| gvf_from(j.best[k][0], j.total())).collect())
}

/// Minimum excess of the knee's gain drop over that of evenly spaced data
/// for the knee to count as a real feature of the values.
const KNEE_MARGIN: f64 = 0.1;
/// Fit level used when the curve has no knee.
const GVF_TARGET: f64 = 0.999;

/// Drop in marginal gvf gain at each `k = 1..=k_max`, with `gvf(0) = 0`.
fn gain_drops(values: &[f64], k_max: usize) -> (Vec<f64>, Vec<f64>) {
    let n = values.len();
    let upper = (k_max + 1).min(n);
    let j = Jenks::solve(values, upper);
    let mut g = vec![0.0];
    g.extend((1..=upper).map(|k| gvf_from(j.best[k][0], j.total())));
    if upper == k_max {
        g.push(g[k_max]);
    }
    let drops = (1..=k_max).map(|k| (g[k] - g[k - 1]) - (g[k + 1] - g[k])).collect();
    (drops, g[1..=k_max].to_vec())
}

/// Picks the bucket count at the knee of the gvf curve.
///
/// The knee is the `k` with the largest drop in marginal gain. When that drop
/// is not clearly larger than the drop of evenly spaced values of the same
/// length, the curve is treated as featureless and the smallest `k` with
/// `gvf >= 0.999` is used instead.
pub fn select_k_elbow(values: &[f64], k_max: usize) -> Result<usize> {
    check_sorted(values)?;
    let n = values.len();
    if n == 0 {
        return Err(Error::EmptyInput("breaks input"));
    }
    if k_max == 0 || k_max > n {
        return Err(Error::param(format!("k_max = {k_max} outside 1..={n}")));
    }
    if ssd(values) == 0.0 {
        return Ok(1);
    }
    if n <= 2 {
        return Ok(n.min(k_max));
    }
    let (drops, gvf) = gain_drops(values, k_max);
    let knee = argmax_first(&drops);
    let even: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let (even_drops, _) = gain_drops(&even, k_max);
    if drops[knee] >= even_drops[knee] + KNEE_MARGIN {
        return Ok(knee + 1);
    }
    Ok(gvf.iter().position(|g| *g >= GVF_TARGET).map_or(k_max, |i| i + 1))
}

fn argmax_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Groups values into natural-breaks buckets and ranks the buckets.
pub fn tied_ranking_from_values(ids: &[String], values: &[f64], direction: Direction) -> Result<TiedRanking> {
    if ids.is_empty() {
        return Err(Error::EmptyInput("ranking items"));
    }
    if ids.len() != values.len() {
        return Err(Error::Dimension { expected: ids.len(), got: values.len() });
    }
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then_with(|| ids[a].cmp(&ids[b])));
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let k = select_k_elbow(&sorted, sorted.len())?;
    let breaks = fisher_jenks(&sorted, k)?;

    // equal values share the bucket of their first occurrence
    let mut bucket = breaks.assignment.clone();
    for i in 1..bucket.len() {
        if sorted[i] == sorted[i - 1] {
            bucket[i] = bucket[i - 1];
        }
    }
    let mut used: Vec<usize> = bucket.clone();
    used.dedup();
    if direction == Direction::Maximize {
        used.reverse();
    }
    let mut items = vec![(String::new(), 0); ids.len()];
    for (pos, &i) in order.iter().enumerate() {
        let rank = used.iter().position(|b| *b == bucket[pos]).expect("bucket present") + 1;
        items[i] = (ids[i].clone(), rank);
    }
    TiedRanking::new(items)
}

pub fn tied_ranking(
    fronts: &[EvaluatedFront],
    kind: Indicator,
    direction: Direction,
    refs: &References,
) -> Result<TiedRanking> {
    let values = fronts.iter().map(|f| indicator_value(kind, &f.front, refs)).collect::<Result<Vec<_>>>()?;
    let ids: Vec<String> = fronts.iter().map(|f| f.id.clone()).collect();
    tied_ranking_from_values(&ids, &values, direction)
}

/// Kendall tau-b between two rankings of the same items. Lower rank means
/// better in both; zero when either ranking is entirely tied.
pub fn kendall_tau_b(r1: &TiedRanking, r2: &TiedRanking) -> Result<f64> {
    if r1.len() != r2.len() {
        return Err(Error::param("rankings cover different items"));
    }
    let lookup: HashMap<&str, usize> = r2.items.iter().map(|(id, r)| (id.as_str(), *r)).collect();
    let mut pairs: Vec<(usize, usize)> = r1
        .items
        .iter()
        .map(|(id, r)| {
            lookup.get(id.as_str()).map(|r2| (*r, *r2)).ok_or_else(|| Error::param(format!("item `{id}` missing")))
        })
        .collect::<Result<_>>()?;
    Ok(tau_b_pairs(&mut pairs))
}

/// O(n log n) tau-b: sort by (x, y), count tie groups, then count
/// inversions of `y` with a merge sort.
fn tau_b_pairs(pairs: &mut [(usize, usize)]) -> f64 {
    let n = pairs.len() as u64;
    if n < 2 {
        return 0.0;
    }
    let tot = n * (n - 1) / 2;
    pairs.sort_unstable();

    let tie_count = |eq: &dyn Fn(usize) -> bool| -> u64 {
        let mut total = 0;
        let mut run = 1u64;
        for i in 1..pairs.len() {
            if eq(i) {
                run += 1;
            } else {
                total += run * (run - 1) / 2;
                run = 1;
            }
        }
        total + run * (run - 1) / 2
    };
    let x_ties = tie_count(&|i| pairs[i].0 == pairs[i - 1].0);
    let xy_ties = tie_count(&|i| pairs[i] == pairs[i - 1]);

    let mut ys: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0; ys.len()];
    let discordant = count_inversions(&mut ys, &mut buf);
    let mut y_ties = 0;
    let mut run = 1u64;
    for i in 1..ys.len() {
        if ys[i] == ys[i - 1] {
            run += 1;
        } else {
            y_ties += run * (run - 1) / 2;
            run = 1;
        }
    }
    y_ties += run * (run - 1) / 2;

    if x_ties == tot || y_ties == tot {
        return 0.0;
    }
    let con_minus_dis = tot as f64 - x_ties as f64 - y_ties as f64 + xy_ties as f64 - 2.0 * discordant as f64;
    con_minus_dis / (((tot - x_ties) as f64) * ((tot - y_ties) as f64)).sqrt()
}

/// Sorts `v` and returns the number of strictly inverted pairs.
fn count_inversions(v: &mut [usize], buf: &mut [usize]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = {
        let (l, r) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        count_inversions(l, bl) + count_inversions(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[i] <= v[j] {
            buf[k] = v[i];
            i += 1;
        } else {
            buf[k] = v[j];
            inv += (mid - i) as u64;
            j += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    inv
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub indicator: Indicator,
    pub n_pairs: usize,
    pub tau_mean: f64,
    pub tau_std: f64,
    pub per_fold: Vec<f64>,
}

pub const N_FOLDS: usize = 5;

/// Five-fold cross-validation of the ranker against an indicator oracle.
///
/// Fronts are shuffled into equal folds. For each test fold, training pairs
/// are all within-fold pairs of the remaining folds, taken fold by fold in
/// rotation order, then (beyond that) seeded cross-fold pairs among the
/// training fronts. Labels come from a strict oracle on `kind`. The utility
/// ranking of the test fold is scored with tau-b against the natural-breaks
/// ranking of the indicator. Feature statistics are fitted on all fronts.
pub fn cross_validate_ranker(
    fronts: &[EvaluatedFront],
    kind: Indicator,
    n_pairs: usize,
    cfg: &TrainConfig,
) -> Result<CvReport> {
    cross_validate_ranker_with(fronts, kind, n_pairs, cfg, &EncodingConfig::default(), &References::default())
}

pub fn cross_validate_ranker_with(
    fronts: &[EvaluatedFront],
    kind: Indicator,
    n_pairs: usize,
    cfg: &TrainConfig,
    enc: &EncodingConfig,
    refs: &References,
) -> Result<CvReport> {
    let n = fronts.len();
    if n < 2 * N_FOLDS || !n.is_multiple_of(N_FOLDS) {
        return Err(Error::param(format!("{n} fronts cannot form {N_FOLDS} equal folds of at least 2")));
    }
    let fold_size = n / N_FOLDS;
    let train_fronts = n - fold_size;
    let max_pairs = train_fronts * (train_fronts - 1) / 2;
    if n_pairs > max_pairs {
        return Err(Error::param(format!("{n_pairs} training pairs requested, at most {max_pairs} available")));
    }

    let matrices = fronts.iter().map(|f| build_loss_matrix(&f.models, enc)).collect::<Result<Vec<_>>>()?;
    let stats = fit_stats(&matrices)?;
    let features: HashMap<String, FeatureVector> =
        fronts.iter().zip(&matrices).map(|(f, m)| Ok((f.id.clone(), encode(m, &stats)?))).collect::<Result<_>>()?;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(cfg.seed, &[rng::label("cv-folds")]));
    let folds: Vec<&[usize]> = order.chunks(fold_size).collect();
    let oracle = OracleConfig::strict(kind);

    let per_fold = (0..N_FOLDS)
        .into_par_iter()
        .map(|test| {
            let train_folds: Vec<&[usize]> = (1..N_FOLDS).map(|o| folds[(test + o) % N_FOLDS]).collect();
            let mut pool: Vec<(usize, usize)> = Vec::new();
            for fold in &train_folds {
                for (a, &i) in fold.iter().enumerate() {
                    for &j in &fold[a + 1..] {
                        pool.push((i, j));
                    }
                }
            }
            if n_pairs > pool.len() {
                let mut cross: Vec<(usize, usize)> = Vec::new();
                for (fa, fold_a) in train_folds.iter().enumerate() {
                    for fold_b in &train_folds[fa + 1..] {
                        for &i in fold_a.iter() {
                            for &j in fold_b.iter() {
                                cross.push((i, j));
                            }
                        }
                    }
                }
                cross.shuffle(&mut rng::stream(cfg.seed, &[rng::label("cv-remainder"), test as u64]));
                pool.extend(cross);
            }
            pool.truncate(n_pairs);

            let pairs: Vec<(String, String)> =
                pool.iter().map(|&(i, j)| (fronts[i].id.clone(), fronts[j].id.clone())).collect();
            let prefs = label_pairs(&pairs, fronts, &oracle, refs)?;
            let data = build_svm_dataset(&prefs, &features)?;
            let model = train_linear_ranksvm(&data, cfg)?;

            let test_fronts: Vec<EvaluatedFront> = folds[test].iter().map(|&i| fronts[i].clone()).collect();
            let ids: Vec<String> = test_fronts.iter().map(|f| f.id.clone()).collect();
            let scores = ids.iter().map(|id| utility(&model, &features[id])).collect::<Result<Vec<_>>>()?;
            let predicted = TiedRanking::from_scores(&ids, &scores, Direction::Maximize)?;
            let truth = tied_ranking(&test_fronts, kind, kind.direction(), refs)?;
            kendall_tau_b(&predicted, &truth)
        })
        .collect::<Result<Vec<f64>>>()?;

    let (tau_mean, tau_std) = mean_std(&per_fold);
    Ok(CvReport { indicator: kind, n_pairs, tau_mean, tau_std, per_fold })
}

/// Mean and population standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
    (m, var.sqrt())
}
