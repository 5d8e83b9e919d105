//! Pareto dominance, front extraction and front quality indicators.
//!
//! All losses are minimized and normalized to `[0, 1]`. The indicators
//! operate on two objectives (accuracy loss, normalized energy).

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of objectives supported by the indicators and the encoder.
pub const N_OBJECTIVES: usize = 2;

/// Index of the accuracy loss (1 - accuracy).
pub const ACCURACY_LOSS: usize = 0;
/// Index of the normalized energy loss; the default front ordering key.
pub const ENERGY_LOSS: usize = 1;

/// Loss values of one model, each finite and in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LossVector(Vec<f64>);

impl LossVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("loss vector"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::Numeric(format!("loss {v} outside [0, 1]")));
        }
        Ok(LossVector(values))
    }

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

impl TryFrom<Vec<f64>> for LossVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        LossVector::new(v)
    }
}

impl From<LossVector> for Vec<f64> {
    fn from(v: LossVector) -> Self {
        v.0
    }
}

impl std::ops::Index<usize> for LossVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// One model returned by a multi-objective learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPoint {
    pub id: String,
    pub losses: LossVector,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, f64>,
}

impl ModelPoint {
    pub fn new(id: impl Into<String>, losses: Vec<f64>) -> Result<Self> {
        Ok(ModelPoint { id: id.into(), losses: LossVector::new(losses)?, meta: BTreeMap::new() })
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: f64) -> Self {
        self.meta.insert(key.into(), value);
        self
    }
}

/// `true` iff `a` is no worse than `b` everywhere and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::Dimension { expected: a.len(), got: b.len() });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite loss in dominance check".into()));
    }
    Ok(dominates_unchecked(a, b))
}

pub(crate) fn dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strict = true;
        }
    }
    strict
}

/// Ordering of models along a front: ascending by the order key, then by the
/// remaining losses in index order, then by id.
pub fn front_order(order_key: usize) -> impl Fn(&ModelPoint, &ModelPoint) -> Ordering {
    move |a, b| {
        let (la, lb) = (a.losses.values(), b.losses.values());
        la[order_key]
            .total_cmp(&lb[order_key])
            .then_with(|| {
                la.iter()
                    .zip(lb)
                    .enumerate()
                    .filter(|(i, _)| *i != order_key)
                    .map(|(_, (x, y))| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(Ordering::Equal)
            })
            .then_with(|| a.id.cmp(&b.id))
    }
}

/// A non-empty, mutually non-dominated, ordered set of models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FrontRepr")]
pub struct ParetoFront {
    points: Vec<ModelPoint>,
    order_key: usize,
}

#[derive(Deserialize)]
struct FrontRepr {
    points: Vec<ModelPoint>,
    order_key: usize,
}

impl TryFrom<FrontRepr> for ParetoFront {
    type Error = Error;
    fn try_from(r: FrontRepr) -> Result<Self> {
        ParetoFront::from_points(r.points, r.order_key)
    }
}

impl ParetoFront {
    /// Validates an already-filtered point list. Points are re-sorted.
    pub fn from_points(mut points: Vec<ModelPoint>, order_key: usize) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput("pareto front"));
        }
        let m = points[0].losses.len();
        if order_key >= m {
            return Err(Error::param(format!("order key {order_key} with {m} objectives")));
        }
        for p in &points {
            if p.losses.len() != m {
                return Err(Error::Dimension { expected: m, got: p.losses.len() });
            }
        }
        for (i, a) in points.iter().enumerate() {
            for b in &points[i + 1..] {
                if dominates_unchecked(a.losses.values(), b.losses.values())
                    || dominates_unchecked(b.losses.values(), a.losses.values())
                {
                    return Err(Error::param(format!("`{}` and `{}` are not mutually non-dominated", a.id, b.id)));
                }
            }
        }
        points.sort_by(front_order(order_key));
        Ok(ParetoFront { points, order_key })
    }

    pub fn points(&self) -> &[ModelPoint] {
        &self.points
    }

    pub fn order_key(&self) -> usize {
        self.order_key
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn n_objectives(&self) -> usize {
        self.points[0].losses.len()
    }

    /// Raw loss coordinates, in front order.
    pub fn coordinates(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| p.losses.values().to_vec()).collect()
    }
}

/// Extracts the non-dominated subset using the energy ordering.
pub fn pareto_filter(points: &[ModelPoint]) -> Result<ParetoFront> {
    pareto_filter_by(points, ENERGY_LOSS)
}

/// Extracts the non-dominated subset. Duplicate loss vectors collapse to the
/// representative with the smallest id.
pub fn pareto_filter_by(points: &[ModelPoint], order_key: usize) -> Result<ParetoFront> {
    if points.is_empty() {
        return Err(Error::EmptyInput("model set"));
    }
    let m = points[0].losses.len();
    for p in points {
        if p.losses.len() != m {
            return Err(Error::Dimension { expected: m, got: p.losses.len() });
        }
    }
    let mut keep: Vec<ModelPoint> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let dominated =
            points.iter().enumerate().any(|(j, q)| j != i && dominates_unchecked(q.losses.values(), p.losses.values()));
        if dominated {
            continue;
        }
        match keep.iter_mut().find(|k| k.losses == p.losses) {
            Some(k) if p.id < k.id => *k = p.clone(),
            Some(_) => {}
            None => keep.push(p.clone()),
        }
    }
    ParetoFront::from_points(keep, order_key)
}

/// A reference point for HV (nadir) or R2 (ideal).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReferencePoint(pub Vec<f64>);

impl ReferencePoint {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Nadir and ideal points of a normalized problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct References {
    pub nadir: ReferencePoint,
    pub ideal: ReferencePoint,
}

impl Default for References {
    fn default() -> Self {
        References { nadir: ReferencePoint(vec![1.0; N_OBJECTIVES]), ideal: ReferencePoint(vec![0.0; N_OBJECTIVES]) }
    }
}

/// Area dominated by a two-objective front and bounded by `reference`.
pub fn hypervolume(front: &ParetoFront, reference: &ReferencePoint) -> Result<f64> {
    let r = reference.values();
    if front.n_objectives() != 2 {
        return Err(Error::param("hypervolume is implemented for two objectives"));
    }
    if r.len() != 2 {
        return Err(Error::Dimension { expected: 2, got: r.len() });
    }
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(front.len());
    for (index, p) in front.points().iter().enumerate() {
        let l = p.losses.values();
        if l[0] > r[0] || l[1] > r[1] {
            return Err(Error::ReferenceViolation { index });
        }
        pts.push((l[0], l[1]));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    // Sweep along the first objective; each strip is bounded above by the
    // best second-objective value seen so far.
    let mut area = 0.0;
    let mut best_y = r[1];
    for (i, &(x, y)) in pts.iter().enumerate() {
        best_y = best_y.min(y);
        let next_x = pts.get(i + 1).map_or(r[0], |p| p.0);
        area += (next_x - x) * (r[1] - best_y);
    }
    Ok(area)
}

/// Standard deviation (with `N - 1`) of nearest-neighbour Manhattan distances.
/// Zero for fronts with at most one point.
pub fn spacing(front: &ParetoFront) -> f64 {
    let pts = front.points();
    let n = pts.len();
    if n <= 1 {
        return 0.0;
    }
    let nearest: Vec<f64> = pts
        .iter()
        .enumerate()
        .map(|(i, a)| {
            pts.iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, b)| manhattan(a.losses.values(), b.losses.values()))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mean = nearest.iter().sum::<f64>() / n as f64;
    let ss: f64 = nearest.iter().map(|d| (mean - d).powi(2)).sum();
    (ss / (n - 1) as f64).sqrt()
}

fn manhattan(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Euclidean norm of the per-objective extents of the front.
pub fn max_spread(front: &ParetoFront) -> f64 {
    (0..front.n_objectives())
        .map(|j| {
            let (lo, hi) = front
                .points()
                .iter()
                .map(|p| p.losses[j])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            (hi - lo).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

/// Smallest Chebyshev distance from a front point to the ideal point.
pub fn r2_indicator(front: &ParetoFront, ideal: &ReferencePoint) -> Result<f64> {
    let r = ideal.values();
    if r.len() != front.n_objectives() {
        return Err(Error::Dimension { expected: front.n_objectives(), got: r.len() });
    }
    Ok(front
        .points()
        .iter()
        .map(|p| p.losses.values().iter().zip(r).map(|(l, ri)| (l - ri).abs()).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min))
}

/// Whether larger or smaller indicator values are better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Maximize,
    Minimize,
}

impl Direction {
    /// `true` if `a` is strictly better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Direction::Maximize => a > b,
            Direction::Minimize => a < b,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Direction::Maximize => Direction::Minimize,
            Direction::Minimize => Direction::Maximize,
        }
    }
}

/// The four front quality indicators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Indicator {
    #[serde(rename = "HV")]
    Hv,
    #[serde(rename = "SP")]
    Sp,
    #[serde(rename = "MS")]
    Ms,
    #[serde(rename = "R2")]
    R2,
}

impl Indicator {
    /// Table order: HV, SP, MS, R2.
    pub const ALL: [Indicator; 4] = [Indicator::Hv, Indicator::Sp, Indicator::Ms, Indicator::R2];

    pub fn direction(self) -> Direction {
        match self {
            Indicator::Hv | Indicator::Ms => Direction::Maximize,
            Indicator::Sp | Indicator::R2 => Direction::Minimize,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Indicator::Hv => "HV",
            Indicator::Sp => "SP",
            Indicator::Ms => "MS",
            Indicator::R2 => "R2",
        }
    }
}

impl fmt::Display for Indicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Indicator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "HV" => Ok(Indicator::Hv),
            "SP" => Ok(Indicator::Sp),
            "MS" => Ok(Indicator::Ms),
            "R2" => Ok(Indicator::R2),
            other => Err(Error::param(format!("unknown indicator `{other}`"))),
        }
    }
}

pub fn indicator_value(kind: Indicator, front: &ParetoFront, refs: &References) -> Result<f64> {
    match kind {
        Indicator::Hv => hypervolume(front, &refs.nadir),
        Indicator::Sp => Ok(spacing(front)),
        Indicator::Ms => Ok(max_spread(front)),
        Indicator::R2 => r2_indicator(front, &refs.ideal),
    }
}

/// The full model set returned for one configuration, with its front.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedFront {
    pub id: String,
    pub models: Vec<ModelPoint>,
    pub front: ParetoFront,
}

impl EvaluatedFront {
    pub fn from_models(id: impl Into<String>, models: Vec<ModelPoint>) -> Result<Self> {
        let front = pareto_filter(&models)?;
        Ok(EvaluatedFront { id: id.into(), models, front })
    }
}
