mod oracles;

use std::collections::HashMap;

use prefpareto_core::frontfeat::{build_loss_matrix, encode, fit_stats, EncodingConfig, FeatureVector};
use prefpareto_core::mo::{
    dominates, hypervolume, indicator_value, max_spread, pareto_filter, r2_indicator, spacing, Direction,
    EvaluatedFront, Indicator, ModelPoint, ReferencePoint, References,
};
use prefpareto_core::oracle::{build_pairs, label_pairs, OracleConfig};
use prefpareto_core::ranker::{predict_pref, Predicted, TrainConfig, UtilityModel};
use prefpareto_core::ranking_eval::{fisher_jenks, gvf_curve, kendall_tau_b, tied_ranking_from_values, TiedRanking};
use proptest::prelude::*;

fn loss() -> impl Strategy<Value = f64> {
    prop_oneof![0.0..=1.0f64, (0u8..=10).prop_map(|v| v as f64 / 10.0)]
}

fn points(max: usize) -> impl Strategy<Value = Vec<ModelPoint>> {
    prop::collection::vec((loss(), loss()), 1..=max).prop_map(|v| {
        v.into_iter().enumerate().map(|(i, (a, e))| ModelPoint::new(format!("p{i:02}"), vec![a, e]).unwrap()).collect()
    })
}

fn ranks(n: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0usize..n.max(1), n).prop_map(|raw| {
        let mut levels = raw.clone();
        levels.sort_unstable();
        levels.dedup();
        raw.iter().map(|v| levels.binary_search(v).unwrap() + 1).collect()
    })
}

fn nadir() -> ReferencePoint {
    ReferencePoint(vec![1.0, 1.0])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn dominance_is_antisymmetric_and_irreflexive(a in (loss(), loss()), b in (loss(), loss())) {
        let (a, b) = ([a.0, a.1], [b.0, b.1]);
        prop_assert!(!dominates(&a, &a).unwrap());
        prop_assert!(!(dominates(&a, &b).unwrap() && dominates(&b, &a).unwrap()));
    }

    #[test]
    fn pareto_filter_is_idempotent(pts in points(15)) {
        let once = pareto_filter(&pts).unwrap();
        let twice = pareto_filter(once.points()).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn hv_never_decreases_when_adding_a_point(pts in points(12), extra in (loss(), loss())) {
        let front = pareto_filter(&pts).unwrap();
        let mut more = front.points().to_vec();
        more.push(ModelPoint::new("zz", vec![extra.0, extra.1]).unwrap());
        let bigger = pareto_filter(&more).unwrap();
        prop_assert!(hypervolume(&bigger, &nadir()).unwrap() >= hypervolume(&front, &nadir()).unwrap() - 1e-15);
    }

    #[test]
    fn hv_is_within_unit_square(pts in points(12)) {
        let hv = hypervolume(&pareto_filter(&pts).unwrap(), &nadir()).unwrap();
        prop_assert!((0.0..=1.0).contains(&hv));
    }

    #[test]
    fn sp_is_non_negative(pts in points(12)) {
        prop_assert!(spacing(&pareto_filter(&pts).unwrap()) >= 0.0);
    }

    #[test]
    fn ms_depends_only_on_extrema(pts in points(12)) {
        let front = pareto_filter(&pts).unwrap();
        let ms = max_spread(&front);
        let c = front.coordinates();
        let ext = |j: usize| {
            let lo = c.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min);
            let hi = c.iter().map(|p| p[j]).fold(f64::NEG_INFINITY, f64::max);
            hi - lo
        };
        prop_assert_eq!(ms, (ext(0).powi(2) + ext(1).powi(2)).sqrt());
        let reversed: Vec<(f64, f64)> = c.iter().rev().map(|p| (p[0], p[1])).collect();
        prop_assert!((oracles::ms_naive(&reversed) - ms).abs() < 1e-12);
    }

    #[test]
    fn r2_bounded_by_each_point(pts in points(12)) {
        let front = pareto_filter(&pts).unwrap();
        let r2 = r2_indicator(&front, &ReferencePoint(vec![0.0, 0.0])).unwrap();
        for p in front.points() {
            prop_assert!(r2 <= p.losses[0].max(p.losses[1]));
        }
    }

    #[test]
    fn indicator_values_are_bit_identical(pts in points(12)) {
        let front = pareto_filter(&pts).unwrap();
        let refs = References::default();
        for kind in Indicator::ALL {
            let a = indicator_value(kind, &front, &refs).unwrap();
            let b = indicator_value(kind, &front.clone(), &refs).unwrap();
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn staircase_rows_never_step_back(pts in points(8)) {
        let m = build_loss_matrix(&pts, &EncodingConfig::default()).unwrap();
        for w in m.rows.windows(2) {
            prop_assert!(w[0] == w[1] || !dominates(&w[0], &w[1]).unwrap());
        }
        prop_assert_eq!(m, build_loss_matrix(&pts, &EncodingConfig::default()).unwrap());
    }

    #[test]
    fn standardized_collection_has_zero_mean_unit_variance(sets in prop::collection::vec(points(6), 2..12)) {
        let enc = EncodingConfig::default();
        let mats: Vec<_> = sets.iter().map(|s| build_loss_matrix(s, &enc).unwrap()).collect();
        let stats = fit_stats(&mats).unwrap();
        let feats: Vec<FeatureVector> = mats.iter().map(|m| encode(m, &stats).unwrap()).collect();
        let n = feats.len() as f64;
        for j in 0..enc.dim() {
            let mean = feats.iter().map(|f| f.values()[j]).sum::<f64>() / n;
            let var = feats.iter().map(|f| (f.values()[j] - mean).powi(2)).sum::<f64>() / n;
            prop_assert!(mean.abs() < 1e-9);
            if stats.std[j] > 1e-9 {
                prop_assert!((var - 1.0).abs() < 1e-9);
            } else {
                prop_assert!(var == 0.0);
            }
        }
    }

    #[test]
    fn prediction_is_antisymmetric(
        w in prop::collection::vec(-2.0..2.0f64, 4),
        a in prop::collection::vec(-2.0..2.0f64, 4),
        b in prop::collection::vec(-2.0..2.0f64, 4),
    ) {
        let model = UtilityModel { w, stats_ref: String::new(), train_config: TrainConfig::default() };
        let (fa, fb) = (FeatureVector(a), FeatureVector(b));
        let ab = predict_pref(&model, &fa, &fb).unwrap();
        let ba = predict_pref(&model, &fb, &fa).unwrap();
        let flipped = match ab {
            Predicted::First => Predicted::Second,
            Predicted::Second => Predicted::First,
            Predicted::Tie => Predicted::Tie,
        };
        prop_assert_eq!(ba, flipped);
    }

    #[test]
    fn gvf_is_non_decreasing(mut v in prop::collection::vec(0.0..100.0f64, 1..12)) {
        v.sort_by(f64::total_cmp);
        let g = gvf_curve(&v, v.len()).unwrap();
        for w in g.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12);
        }
    }

    #[test]
    fn jenks_assignment_is_contiguous(mut v in prop::collection::vec(0.0..100.0f64, 1..12), k in 1usize..5) {
        v.sort_by(f64::total_cmp);
        let k = k.min(v.len());
        let r = fisher_jenks(&v, k).unwrap();
        prop_assert_eq!(r.assignment.len(), v.len());
        prop_assert!(r.assignment.windows(2).all(|w| w[1] == w[0] || w[1] == w[0] + 1));
        prop_assert_eq!(*r.assignment.last().unwrap(), k - 1);
    }

    #[test]
    fn tau_is_symmetric_and_bounded(x in ranks(12), y in ranks(12)) {
        let (rx, ry) = (oracles::ranking(&x), oracles::ranking(&y));
        let a = kendall_tau_b(&rx, &ry).unwrap();
        let b = kendall_tau_b(&ry, &rx).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&a));
        let self_tau = kendall_tau_b(&rx, &rx).unwrap();
        if x.iter().any(|v| *v != x[0]) {
            prop_assert!((self_tau - 1.0).abs() < 1e-12);
        } else {
            prop_assert_eq!(self_tau, 0.0);
        }
    }

    #[test]
    fn tied_ranking_survives_positive_affine_maps(
        v in prop::collection::vec(0.0..1.0f64, 2..12),
        scale in 0.5..4.0f64,
        shift in -3.0..3.0f64,
    ) {
        // continuous values: exact cost ties between partitions, which rounding
        // after the map could break either way, do not occur
        let ids: Vec<String> = (0..v.len()).map(|i| format!("f{i:02}")).collect();
        let mapped: Vec<f64> = v.iter().map(|x| x * scale + shift).collect();
        let a = tied_ranking_from_values(&ids, &v, Direction::Maximize).unwrap();
        let b = tied_ranking_from_values(&ids, &mapped, Direction::Maximize).unwrap();
        prop_assert_eq!(a.items.iter().map(|(_, r)| *r).collect::<Vec<_>>(), b.items.iter().map(|(_, r)| *r).collect::<Vec<_>>());
    }

    #[test]
    fn oracle_labels_flip_with_direction(pts in prop::collection::vec(points(5), 3..8), seed in 0u64..1000) {
        let fronts: Vec<EvaluatedFront> = pts
            .into_iter()
            .enumerate()
            .map(|(i, p)| EvaluatedFront::from_models(format!("f{i}"), p).unwrap())
            .collect();
        let ids: Vec<String> = fronts.iter().map(|f| f.id.clone()).collect();
        let pairs = build_pairs(&ids, None, seed).unwrap();
        let refs = References::default();
        let up = label_pairs(&pairs, &fronts, &OracleConfig::strict(Indicator::Hv), &refs).unwrap();
        let down_cfg = OracleConfig { direction: Direction::Minimize, ..OracleConfig::strict(Indicator::Hv) };
        let down = label_pairs(&pairs, &fronts, &down_cfg, &refs).unwrap();
        prop_assert_eq!(up.len(), down.len());
        for (u, d) in up.iter().zip(&down) {
            prop_assert_eq!(&u.winner, &d.loser);
            prop_assert_eq!(&u.loser, &d.winner);
        }
        // a real-valued oracle cannot produce cycles: wins induce a consistent order
        let values: HashMap<&str, f64> = fronts
            .iter()
            .map(|f| (f.id.as_str(), indicator_value(Indicator::Hv, &f.front, &refs).unwrap()))
            .collect();
        for p in &up {
            prop_assert!(values[p.winner.as_str()] > values[p.loser.as_str()]);
        }
    }
}

#[test]
fn tied_ranking_rejects_gaps() {
    assert!(TiedRanking::new(vec![("a".into(), 1), ("b".into(), 3)]).is_err());
}
