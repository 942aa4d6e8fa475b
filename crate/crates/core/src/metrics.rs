//! Moment-retrieval evaluation: temporal IoU, R1@τ, detection-style AP with
//! greedy one-to-one matching, and mAP averaged over IoU thresholds.
//!
//! Every per-query reduction runs in ascending `QueryId` order so results are
//! bitwise reproducible.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::{GroundTruthEntry, PredictionWindow, QueryId, Segment};

/// Predictions keyed by query.
pub type Predictions = BTreeMap<QueryId, Vec<PredictionWindow>>;

/// Thresholds of the averaged mAP: 0.50, 0.55, …, 0.95.
pub fn map_thresholds() -> Vec<f64> {
    (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

pub const R1_THRESHOLDS: [f64; 2] = [0.5, 0.7];
pub const DEFAULT_PREDICTION_CAP: usize = 10;

/// IoU of two raw intervals; inverted or empty intervals have zero length.
pub fn interval_iou(a_start: f64, a_end: f64, b_start: f64, b_end: f64) -> f64 {
    let len_a = (a_end - a_start).max(0.0);
    let len_b = (b_end - b_start).max(0.0);
    let inter = (a_end.min(b_end) - a_start.max(b_start)).max(0.0);
    let union = len_a + len_b - inter;
    if union > 0.0 {
        (inter / union).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

pub fn iou(a: &Segment, b: &Segment) -> f64 {
    interval_iou(a.start(), a.end(), b.start(), b.end())
}

/// Sorts by score descending, then earlier start, then input order.
pub fn rank_predictions(preds: &[PredictionWindow]) -> Vec<PredictionWindow> {
    let mut ranked = preds.to_vec();
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.segment.start().total_cmp(&b.segment.start()))
    });
    ranked
}

fn best_gt_iou(window: &Segment, gts: &[Segment]) -> f64 {
    gts.iter().map(|g| iou(window, g)).fold(0.0, f64::max)
}

fn ground_truth_map(gts: &[GroundTruthEntry]) -> Result<BTreeMap<QueryId, &GroundTruthEntry>> {
    let mut map = BTreeMap::new();
    for gt in gts {
        if map.insert(gt.query_id(), gt).is_some() {
            return Err(Error::DuplicateQuery(gt.query_id()));
        }
    }
    Ok(map)
}

fn check_known(preds: &Predictions, gts: &BTreeMap<QueryId, &GroundTruthEntry>) -> Result<()> {
    match preds.keys().find(|q| !gts.contains_key(q)) {
        Some(&q) => Err(Error::UnknownQuery(q)),
        None => Ok(()),
    }
}

/// Percentage of ground-truth queries whose top-ranked window reaches
/// `threshold` IoU with some answer segment. Queries without predictions
/// count as misses.
pub fn recall_at_1(preds: &Predictions, gts: &[GroundTruthEntry], threshold: f64) -> Result<f64> {
    let gt_map = ground_truth_map(gts)?;
    check_known(preds, &gt_map)?;
    if gt_map.is_empty() {
        return Ok(0.0);
    }
    let hits = gt_map
        .iter()
        .filter(|(q, gt)| {
            preds
                .get(q)
                .and_then(|p| rank_predictions(p).first().copied())
                .is_some_and(|top| best_gt_iou(&top.segment, gt.segments()) >= threshold)
        })
        .count();
    Ok(100.0 * hits as f64 / gt_map.len() as f64)
}

/// Labels each ranked prediction as a true positive by greedily matching it
/// to the unmatched answer segment of highest IoU at or above `threshold`.
pub fn greedy_match(ranked: &[PredictionWindow], gts: &[Segment], threshold: f64) -> Vec<bool> {
    let mut taken = vec![false; gts.len()];
    ranked
        .iter()
        .map(|p| {
            let mut best: Option<(usize, f64)> = None;
            for (g, gt) in gts.iter().enumerate() {
                if taken[g] {
                    continue;
                }
                let v = iou(&p.segment, gt);
                if v >= threshold && best.is_none_or(|(_, b)| v > b) {
                    best = Some((g, v));
                }
            }
            if let Some((g, _)) = best {
                taken[g] = true;
            }
            best.is_some()
        })
        .collect()
}

/// Area under the precision-recall curve of a labeled ranking, with the
/// precision envelope made non-increasing in recall.
pub fn ap_from_labels(is_tp: &[bool], num_gt: usize) -> f64 {
    if num_gt == 0 {
        return 0.0;
    }
    let mut precision = Vec::with_capacity(is_tp.len());
    let mut tp = 0usize;
    for (rank, &hit) in is_tp.iter().enumerate() {
        tp += hit as usize;
        precision.push(tp as f64 / (rank + 1) as f64);
    }
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let step = 1.0 / num_gt as f64;
    is_tp
        .iter()
        .zip(&precision)
        .filter(|(hit, _)| **hit)
        .map(|(_, p)| p * step)
        .sum()
}

/// Detection-style average precision of one query at one IoU threshold.
pub fn average_precision(preds: &[PredictionWindow], gts: &[Segment], threshold: f64) -> Result<f64> {
    if gts.is_empty() {
        return Err(Error::EmptySegments);
    }
    let ranked = rank_predictions(preds);
    Ok(ap_from_labels(&greedy_match(&ranked, gts, threshold), gts.len()))
}

/// Per-threshold mAP (as a percentage) over every ground-truth query; a query
/// without predictions contributes AP 0. At most `cap` top-ranked
/// predictions per query are scored.
pub fn mean_ap(
    preds: &Predictions,
    gts: &[GroundTruthEntry],
    thresholds: &[f64],
    cap: usize,
) -> Result<Vec<(f64, f64)>> {
    if thresholds.is_empty() {
        return Err(Error::InvalidParameter {
            name: "threshold count",
            value: 0.0,
            reason: "must be >= 1",
        });
    }
    let gt_map = ground_truth_map(gts)?;
    check_known(preds, &gt_map)?;
    let capped: BTreeMap<QueryId, Vec<PredictionWindow>> = preds
        .iter()
        .map(|(q, p)| {
            let mut ranked = rank_predictions(p);
            ranked.truncate(cap);
            (*q, ranked)
        })
        .collect();
    thresholds
        .iter()
        .map(|&thr| {
            let mut sum = 0.0;
            for (q, gt) in &gt_map {
                if let Some(p) = capped.get(q) {
                    sum += average_precision(p, gt.segments(), thr)?;
                }
            }
            let mean = if gt_map.is_empty() {
                0.0
            } else {
                sum / gt_map.len() as f64
            };
            Ok((thr, 100.0 * mean))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalResult {
    /// `(threshold, percentage)` pairs.
    pub r1_at: Vec<(f64, f64)>,
    pub map_at: Vec<(f64, f64)>,
    pub map_avg: f64,
    pub num_queries: usize,
}

impl EvalResult {
    pub fn r1(&self, threshold: f64) -> Option<f64> {
        lookup(&self.r1_at, threshold)
    }

    pub fn map(&self, threshold: f64) -> Option<f64> {
        lookup(&self.map_at, threshold)
    }
}

fn lookup(table: &[(f64, f64)], threshold: f64) -> Option<f64> {
    table
        .iter()
        .find(|(t, _)| (t - threshold).abs() < 1e-9)
        .map(|(_, v)| *v)
}

/// R1 at 0.5 and 0.7, mAP at 0.50…0.95 and their mean.
pub fn evaluate(preds: &Predictions, gts: &[GroundTruthEntry], cap: usize) -> Result<EvalResult> {
    let r1_at = R1_THRESHOLDS
        .iter()
        .map(|&t| Ok((t, recall_at_1(preds, gts, t)?)))
        .collect::<Result<Vec<_>>>()?;
    let map_at = mean_ap(preds, gts, &map_thresholds(), cap)?;
    let map_avg = map_at.iter().map(|(_, v)| v).sum::<f64>() / map_at.len() as f64;
    Ok(EvalResult {
        r1_at,
        map_at,
        map_avg,
        num_queries: ground_truth_map(gts)?.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seg(s: f64, e: f64) -> Segment {
        Segment::new(s, e).unwrap()
    }

    fn win(s: f64, e: f64, score: f64) -> PredictionWindow {
        PredictionWindow::new(seg(s, e), score).unwrap()
    }

    fn gt(q: u64, segs: &[(f64, f64)]) -> GroundTruthEntry {
        GroundTruthEntry::new(
            QueryId(q),
            format!("v{q}"),
            150.0,
            segs.iter().map(|&(s, e)| seg(s, e)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn iou_examples() {
        assert!((iou(&seg(2.0, 4.0), &seg(3.0, 5.0)) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(iou(&seg(2.0, 4.0), &seg(2.0, 4.0)), 1.0);
        assert_eq!(iou(&seg(0.0, 1.0), &seg(2.0, 3.0)), 0.0);
        assert_eq!(interval_iou(0.5, 0.2, 0.0, 1.0), 0.0);
    }

    #[test]
    fn recall_examples() {
        let gts = vec![gt(1, &[(10.0, 20.0)]), gt(2, &[(50.0, 60.0)])];
        let mut preds = Predictions::new();
        preds.insert(QueryId(1), vec![win(10.0, 20.0, 1.0)]);
        assert_eq!(recall_at_1(&preds, &gts[..1], 1.0).unwrap(), 100.0);
        preds.insert(QueryId(2), vec![win(100.0, 110.0, 1.0)]);
        assert_eq!(recall_at_1(&preds, &gts, 0.5).unwrap(), 50.0);

        let multi = vec![gt(7, &[(10.0, 20.0), (30.0, 40.0)])];
        let mut p = Predictions::new();
        p.insert(QueryId(7), vec![win(29.0, 41.0, 0.9)]);
        let value = iou(&seg(29.0, 41.0), &seg(30.0, 40.0));
        assert!((value - 10.0 / 12.0).abs() < 1e-12);
        assert_eq!(recall_at_1(&p, &multi, 0.7).unwrap(), 100.0);
        assert_eq!(recall_at_1(&p, &multi, 0.85).unwrap(), 0.0);
    }

    #[test]
    fn recall_uses_top_score_and_rejects_unknown() {
        let gts = vec![gt(1, &[(10.0, 20.0)])];
        let mut preds = Predictions::new();
        preds.insert(QueryId(1), vec![win(100.0, 110.0, 0.2), win(10.0, 20.0, 0.9)]);
        assert_eq!(recall_at_1(&preds, &gts, 0.5).unwrap(), 100.0);
        preds.insert(QueryId(9), vec![win(1.0, 2.0, 0.1)]);
        assert!(matches!(recall_at_1(&preds, &gts, 0.5), Err(Error::UnknownQuery(QueryId(9)))));
    }

    #[test]
    fn missing_query_is_a_miss() {
        let gts = vec![gt(1, &[(10.0, 20.0)]), gt(2, &[(50.0, 60.0)])];
        let mut preds = Predictions::new();
        preds.insert(QueryId(1), vec![win(10.0, 20.0, 1.0)]);
        assert_eq!(recall_at_1(&preds, &gts, 0.5).unwrap(), 50.0);
        let m = mean_ap(&preds, &gts, &[0.5], 10).unwrap();
        assert_eq!(m, vec![(0.5, 50.0)]);
    }

    #[test]
    fn ap_examples() {
        let one = [seg(10.0, 20.0)];
        assert_eq!(average_precision(&[win(10.0, 20.0, 1.0)], &one, 0.5).unwrap(), 1.0);
        let ranked = [win(50.0, 60.0, 0.9), win(10.0, 20.0, 0.8)];
        assert_eq!(average_precision(&ranked, &one, 0.5).unwrap(), 0.5);
        let two = [seg(10.0, 20.0), seg(30.0, 40.0)];
        let preds = [win(30.0, 40.0, 0.9), win(10.0, 20.0, 0.8)];
        assert_eq!(average_precision(&preds, &two, 0.5).unwrap(), 1.0);
        assert!(average_precision(&preds, &[], 0.5).is_err());
    }

    #[test]
    fn duplicates_are_false_positives() {
        let one = [seg(10.0, 20.0)];
        let preds = [win(10.0, 20.0, 0.9), win(10.0, 20.0, 0.8)];
        let labels = greedy_match(&rank_predictions(&preds), &one, 0.5);
        assert_eq!(labels, vec![true, false]);
    }

    #[test]
    fn perfect_and_disjoint_map() {
        let gts = vec![gt(1, &[(10.0, 20.0), (40.0, 50.0)]), gt(2, &[(0.0, 5.0)])];
        let mut perfect = Predictions::new();
        perfect.insert(QueryId(1), vec![win(10.0, 20.0, 1.0), win(40.0, 50.0, 1.0)]);
        perfect.insert(QueryId(2), vec![win(0.0, 5.0, 1.0)]);
        let r = evaluate(&perfect, &gts, 10).unwrap();
        assert!(r.map_at.iter().all(|(_, v)| *v == 100.0));
        assert_eq!(r.map_avg, 100.0);
        assert_eq!(r.r1(0.7), Some(100.0));

        let mut off = Predictions::new();
        off.insert(QueryId(1), vec![win(100.0, 110.0, 1.0)]);
        off.insert(QueryId(2), vec![win(100.0, 110.0, 1.0)]);
        let r = evaluate(&off, &gts, 10).unwrap();
        assert_eq!(r.map_avg, 0.0);
        assert_eq!(r.r1(0.5), Some(0.0));
    }

    #[test]
    fn cap_limits_scored_predictions() {
        let gts = vec![gt(1, &[(10.0, 20.0)])];
        let mut preds = Predictions::new();
        preds.insert(QueryId(1), vec![win(50.0, 60.0, 0.9), win(10.0, 20.0, 0.1)]);
        assert_eq!(mean_ap(&preds, &gts, &[0.5], 1).unwrap()[0].1, 0.0);
        assert_eq!(mean_ap(&preds, &gts, &[0.5], 2).unwrap()[0].1, 50.0);
    }

    #[test]
    fn thresholds_are_exact() {
        let t = map_thresholds();
        assert_eq!(t.len(), 10);
        assert_eq!(t[0], 0.5);
        assert_eq!(t[5], 0.75);
        assert_eq!(t[9], 0.95);
    }

    fn window_strategy() -> impl Strategy<Value = PredictionWindow> {
        (0u32..20, 1u32..8, 0u32..5).prop_map(|(s, l, score)| win(s as f64, (s + l) as f64, score as f64))
    }

    proptest! {
        #[test]
        fn iou_properties(a in 0.0f64..10.0, la in 0.01f64..5.0, b in 0.0f64..10.0, lb in 0.01f64..5.0) {
            let (x, y) = (seg(a, a + la), seg(b, b + lb));
            let v = iou(&x, &y);
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(v, iou(&y, &x));
            prop_assert_eq!(iou(&x, &x), 1.0);
        }

        #[test]
        fn recall_non_increasing(
            preds in prop::collection::vec(prop::collection::vec(window_strategy(), 0..4), 3),
        ) {
            let gts = vec![gt(0, &[(2.0, 6.0)]), gt(1, &[(5.0, 9.0), (12.0, 15.0)]), gt(2, &[(0.0, 3.0)])];
            let p: Predictions = preds.into_iter().enumerate().map(|(i, w)| (QueryId(i as u64), w)).collect();
            let mut last = f64::INFINITY;
            for t in [0.1, 0.3, 0.5, 0.7, 0.9, 1.0] {
                let r = recall_at_1(&p, &gts, t).unwrap();
                prop_assert!(r <= last);
                last = r;
            }
        }

        #[test]
        fn low_scoring_miss_changes_nothing(
            preds in prop::collection::vec(window_strategy(), 1..6),
            thr in 0.3f64..0.95,
        ) {
            let gts = [seg(2.0, 6.0), seg(10.0, 13.0)];
            let base_labels = greedy_match(&rank_predictions(&preds), &gts, thr);
            let mut extended = preds.clone();
            extended.push(win(100.0, 101.0, -1.0));
            let ext_labels = greedy_match(&rank_predictions(&extended), &gts, thr);
            prop_assert_eq!(
                base_labels.iter().filter(|t| **t).count(),
                ext_labels.iter().filter(|t| **t).count()
            );
            let ap = average_precision(&preds, &gts, thr).unwrap();
            prop_assert!((0.0..=1.0).contains(&ap));
            let ap_ext = average_precision(&extended, &gts, thr).unwrap();
            prop_assert!(ap_ext <= ap + 1e-15);

            let entry = GroundTruthEntry::new(QueryId(0), "v", 150.0, gts.to_vec()).unwrap();
            let mut p = Predictions::new();
            p.insert(QueryId(0), preds);
            let r_before = recall_at_1(&p, std::slice::from_ref(&entry), thr).unwrap();
            p.get_mut(&QueryId(0)).unwrap().push(win(100.0, 101.0, -1.0));
            prop_assert_eq!(r_before, recall_at_1(&p, std::slice::from_ref(&entry), thr).unwrap());
        }

        #[test]
        fn ap_is_one_iff_all_matched_before_any_false_positive(
            preds in prop::collection::vec(window_strategy(), 1..6),
        ) {
            let gts = [seg(2.0, 6.0), seg(10.0, 13.0)];
            let labels = greedy_match(&rank_predictions(&preds), &gts, 0.5);
            let ap = ap_from_labels(&labels, gts.len());
            let tp = labels.iter().filter(|t| **t).count();
            let first_fp = labels.iter().position(|t| !*t).unwrap_or(labels.len());
            let clean = tp == gts.len() && labels[..first_fp].iter().filter(|t| **t).count() == tp;
            prop_assert_eq!(ap == 1.0, clean);
        }
    }
}
