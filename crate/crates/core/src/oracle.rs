//! Simulated user: labels front pairs by a quality indicator.

use std::collections::HashMap;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mo::{indicator_value, Direction, EvaluatedFront, Indicator, References};
use crate::ranker::{PreferencePair, PreferenceSource};
use crate::ranking_eval::tied_ranking;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieMode {
    /// Only exactly equal indicator values are ties.
    Strict,
    /// Fronts sharing a natural-breaks bucket are ties.
    Jenks,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub kind: Indicator,
    pub direction: Direction,
    pub tie_mode: TieMode,
}

impl OracleConfig {
    pub fn strict(kind: Indicator) -> Self {
        OracleConfig { kind, direction: kind.direction(), tie_mode: TieMode::Strict }
    }

    pub fn jenks(kind: Indicator) -> Self {
        OracleConfig { kind, direction: kind.direction(), tie_mode: TieMode::Jenks }
    }
}

/// All unordered pairs of distinct ids in index order, or a seeded uniform
/// subsample of `limit` of them.
pub fn build_pairs(ids: &[String], limit: Option<usize>, seed: u64) -> Result<Vec<(String, String)>> {
    if ids.len() < 2 {
        return Err(Error::param("at least two fronts are needed to form pairs"));
    }
    let all: Vec<(String, String)> =
        ids.iter().enumerate().flat_map(|(i, a)| ids[i + 1..].iter().map(move |b| (a.clone(), b.clone()))).collect();
    match limit {
        None => Ok(all),
        Some(l) if l > all.len() => Err(Error::param(format!("limit {l} exceeds the {} available pairs", all.len()))),
        Some(l) => {
            let mut rng = rng::stream(seed, &[rng::label("pairs")]);
            Ok(index::sample(&mut rng, all.len(), l).into_iter().map(|i| all[i].clone()).collect())
        }
    }
}

pub fn label_pairs(
    pairs: &[(String, String)],
    fronts: &[EvaluatedFront],
    cfg: &OracleConfig,
    refs: &References,
) -> Result<Vec<PreferencePair>> {
    let by_id: HashMap<&str, &EvaluatedFront> = fronts.iter().map(|f| (f.id.as_str(), f)).collect();
    let mut values: HashMap<&str, f64> = HashMap::new();
    for (a, b) in pairs {
        for id in [a, b] {
            if !values.contains_key(id.as_str()) {
                let f = by_id.get(id.as_str()).ok_or_else(|| Error::Lookup(id.clone()))?;
                values.insert(id.as_str(), indicator_value(cfg.kind, &f.front, refs)?);
            }
        }
    }
    let buckets = match cfg.tie_mode {
        TieMode::Strict => None,
        TieMode::Jenks => Some(tied_ranking(fronts, cfg.kind, cfg.direction, refs)?),
    };

    let mut out = Vec::new();
    for (a, b) in pairs {
        let (va, vb) = (values[a.as_str()], values[b.as_str()]);
        if va == vb {
            continue;
        }
        if let Some(r) = &buckets {
            if r.rank_of(a) == r.rank_of(b) {
                continue;
            }
        }
        let pref = if cfg.direction.better(va, vb) {
            PreferencePair::new(a.clone(), b.clone(), PreferenceSource::Simulated)?
        } else {
            PreferencePair::new(b.clone(), a.clone(), PreferenceSource::Simulated)?
        };
        out.push(pref);
    }
    Ok(out)
}

/// One line of a preference log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceRecord {
    pub winner: String,
    pub loser: String,
    pub source: PreferenceSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<Indicator>,
}

/// Serializes preferences as JSON lines.
pub fn to_json_lines(prefs: &[PreferencePair], oracle: Option<Indicator>) -> String {
    prefs
        .iter()
        .map(|p| {
            let rec = PreferenceRecord { winner: p.winner.clone(), loser: p.loser.clone(), source: p.source, oracle };
            serde_json::to_string(&rec).expect("record serializes") + "\n"
        })
        .collect()
}
