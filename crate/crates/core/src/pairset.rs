//! Positive, negative and hard-negative clip pairs.
//!
//! A clip with 0-based index `i` is inside a normalized segment when
//! `start <= (i + 1) / T <= end`, i.e. the 1-based clip position divided by
//! the clip count falls in the segment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::SimilarityMatrix;
use crate::types::Segment;

/// An unordered clip pair stored as `(i, j)` with `i < j`.
pub type ClipPair = (usize, usize);

/// How to label a pair whose clips sit in two different answer segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrossSegmentPolicy {
    Positive,
    Negative,
    #[default]
    Excluded,
}

impl std::str::FromStr for CrossSegmentPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "positive" => Ok(Self::Positive),
            "negative" => Ok(Self::Negative),
            "excluded" => Ok(Self::Excluded),
            other => Err(format!(
                "unknown cross-segment policy `{other}` (expected positive, negative or excluded)"
            )),
        }
    }
}

/// Pair sets of one video. `positives` and `negatives` are sorted
/// lexicographically; `hard_negatives` is sorted by similarity, descending.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PairSets {
    pub positives: Vec<ClipPair>,
    pub negatives: Vec<ClipPair>,
    pub hard_negatives: Vec<ClipPair>,
}

pub fn clip_inside(i: usize, clips: usize, segment: &Segment) -> bool {
    let pos = (i + 1) as f64 / clips as f64;
    segment.start() <= pos && pos <= segment.end()
}

/// Labels all `C(T, 2)` clip pairs against normalized answer segments.
///
/// Pairs inside a common segment are positive, pairs spanning two segments
/// follow `policy`, and every pair with a clip outside all segments is
/// negative. `hard_negatives` is left empty.
pub fn build_pair_sets(
    clips: usize,
    segments: &[Segment],
    policy: CrossSegmentPolicy,
) -> Result<PairSets> {
    if clips < 2 {
        return Err(Error::TooFewClips(clips));
    }
    if segments.is_empty() {
        return Err(Error::EmptySegments);
    }
    if let Some((index, seg)) = segments.iter().enumerate().find(|(_, s)| s.end() > 1.0) {
        return Err(Error::SegmentExceedsDuration {
            index,
            start: seg.start(),
            end: seg.end(),
            duration: 1.0,
        });
    }

    let membership: Vec<Vec<usize>> = (0..clips)
        .map(|i| {
            segments
                .iter()
                .enumerate()
                .filter(|(_, s)| clip_inside(i, clips, s))
                .map(|(k, _)| k)
                .collect()
        })
        .collect();

    let mut sets = PairSets::default();
    for i in 0..clips {
        for j in i + 1..clips {
            let (a, b) = (&membership[i], &membership[j]);
            if a.iter().any(|k| b.contains(k)) {
                sets.positives.push((i, j));
            } else if a.is_empty() || b.is_empty() {
                sets.negatives.push((i, j));
            } else {
                match policy {
                    CrossSegmentPolicy::Positive => sets.positives.push((i, j)),
                    CrossSegmentPolicy::Negative => sets.negatives.push((i, j)),
                    CrossSegmentPolicy::Excluded => {}
                }
            }
        }
    }
    Ok(sets)
}

/// Keeps the `min(k, |N|)` most similar negatives, ties broken by pair order.
pub fn mine_hard_negatives(sims: &SimilarityMatrix, mut pairs: PairSets, k: usize) -> PairSets {
    let mut ranked: Vec<(f64, ClipPair)> = pairs
        .negatives
        .iter()
        .map(|&(i, j)| (sims.get(i, j), (i, j)))
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    pairs.hard_negatives = ranked.into_iter().take(k).map(|(_, p)| p).collect();
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seg(s: f64, e: f64) -> Segment {
        Segment::new(s, e).unwrap()
    }

    /// Enumerates every pair against the membership rule directly.
    fn brute_force(clips: usize, segments: &[Segment], policy: CrossSegmentPolicy) -> PairSets {
        let mut out = PairSets::default();
        for i in 0..clips {
            for j in 0..clips {
                if i >= j {
                    continue;
                }
                let inside = |c: usize, s: &Segment| {
                    let p = (c + 1) as f64 / clips as f64;
                    s.start() <= p && p <= s.end()
                };
                let same = segments.iter().any(|s| inside(i, s) && inside(j, s));
                let i_any = segments.iter().any(|s| inside(i, s));
                let j_any = segments.iter().any(|s| inside(j, s));
                if same {
                    out.positives.push((i, j));
                } else if !(i_any && j_any) {
                    out.negatives.push((i, j));
                } else if policy == CrossSegmentPolicy::Positive {
                    out.positives.push((i, j));
                } else if policy == CrossSegmentPolicy::Negative {
                    out.negatives.push((i, j));
                }
            }
        }
        out
    }

    fn sims_from(size: usize, entries: &[(ClipPair, f64)]) -> SimilarityMatrix {
        let mut data = vec![0.0; size * size];
        for i in 0..size {
            data[i * size + i] = 1.0;
        }
        for &((i, j), s) in entries {
            data[i * size + j] = s;
            data[j * size + i] = s;
        }
        SimilarityMatrix::from_vec(size, data).unwrap()
    }

    #[test]
    fn inside_examples() {
        assert!(clip_inside(4, 10, &seg(0.5, 0.8)));
        assert!(!clip_inside(0, 10, &seg(0.5, 0.8)));
        assert!(clip_inside(9, 10, &seg(0.0, 1.0)));
    }

    #[test]
    fn single_segment_example() {
        let sets = build_pair_sets(5, &[seg(0.2, 0.6)], CrossSegmentPolicy::Excluded).unwrap();
        assert_eq!(sets.positives, vec![(0, 1), (0, 2), (1, 2)]);
        assert_eq!(sets.negatives.len(), 7);
        assert_eq!(sets, brute_force(5, &[seg(0.2, 0.6)], CrossSegmentPolicy::Excluded));
    }

    #[test]
    fn whole_video_segment() {
        let sets = build_pair_sets(4, &[seg(0.0, 1.0)], CrossSegmentPolicy::Excluded).unwrap();
        assert_eq!(sets.positives.len(), 6);
        assert!(sets.negatives.is_empty());
    }

    #[test]
    fn two_segment_example() {
        let segs = [seg(0.0, 0.34), seg(0.67, 1.0)];
        let sets = build_pair_sets(6, &segs, CrossSegmentPolicy::Excluded).unwrap();
        assert_eq!(sets.positives, vec![(0, 1), (4, 5)]);
        for cross in [(0, 4), (0, 5), (1, 4), (1, 5)] {
            assert!(!sets.positives.contains(&cross) && !sets.negatives.contains(&cross));
        }
        assert_eq!(sets.negatives.len(), 9);
        assert_eq!(sets, brute_force(6, &segs, CrossSegmentPolicy::Excluded));

        let pos = build_pair_sets(6, &segs, CrossSegmentPolicy::Positive).unwrap();
        assert_eq!(pos.positives.len(), 6);
        let neg = build_pair_sets(6, &segs, CrossSegmentPolicy::Negative).unwrap();
        assert_eq!(neg.negatives.len(), 13);
    }

    #[test]
    fn build_errors() {
        assert!(matches!(
            build_pair_sets(1, &[seg(0.0, 1.0)], CrossSegmentPolicy::Excluded),
            Err(Error::TooFewClips(1))
        ));
        assert!(matches!(
            build_pair_sets(4, &[], CrossSegmentPolicy::Excluded),
            Err(Error::EmptySegments)
        ));
    }

    #[test]
    fn mining_examples() {
        let sims = sims_from(4, &[((0, 2), 0.9), ((0, 3), 0.1), ((1, 3), 0.5)]);
        let pairs = PairSets {
            negatives: vec![(0, 2), (0, 3), (1, 3)],
            ..Default::default()
        };
        let top2 = mine_hard_negatives(&sims, pairs.clone(), 2);
        assert_eq!(top2.hard_negatives, vec![(0, 2), (1, 3)]);
        let all = mine_hard_negatives(&sims, pairs, 10);
        assert_eq!(all.hard_negatives, vec![(0, 2), (1, 3), (0, 3)]);

        let tied = sims_from(4, &[((0, 2), 0.5), ((1, 3), 0.5)]);
        let pairs = PairSets {
            negatives: vec![(1, 3), (0, 2)],
            ..Default::default()
        };
        assert_eq!(mine_hard_negatives(&tied, pairs, 1).hard_negatives, vec![(0, 2)]);
    }

    #[test]
    fn mining_empty_negatives() {
        let sims = sims_from(2, &[]);
        assert!(mine_hard_negatives(&sims, PairSets::default(), 3).hard_negatives.is_empty());
    }

    fn segment_strategy() -> impl Strategy<Value = Segment> {
        (0u32..10, 1u32..=10).prop_filter_map("ordered", |(a, b)| {
            (a < b).then(|| seg(a as f64 / 10.0, b as f64 / 10.0))
        })
    }

    fn policy_strategy() -> impl Strategy<Value = CrossSegmentPolicy> {
        prop_oneof![
            Just(CrossSegmentPolicy::Positive),
            Just(CrossSegmentPolicy::Negative),
            Just(CrossSegmentPolicy::Excluded),
        ]
    }

    proptest! {
        #[test]
        fn sets_are_disjoint_and_mined_subset(
            clips in 2usize..12,
            segs in prop::collection::vec(segment_strategy(), 1..4),
            policy in policy_strategy(),
            k in 1usize..30,
            sim_seed in prop::collection::vec(-1.0f64..1.0, 144),
        ) {
            let sets = build_pair_sets(clips, &segs, policy).unwrap();
            for p in &sets.positives {
                prop_assert!(!sets.negatives.contains(p));
                prop_assert!(p.0 < p.1);
            }
            let mut data = vec![0.0; clips * clips];
            for i in 0..clips {
                for j in 0..clips {
                    let (a, b) = (i.min(j), i.max(j));
                    data[i * clips + j] = if a == b { 1.0 } else { sim_seed[a * 12 + b] };
                }
            }
            let sims = SimilarityMatrix::from_vec(clips, data).unwrap();
            let mined = mine_hard_negatives(&sims, sets.clone(), k);
            prop_assert_eq!(mined.hard_negatives.len(), k.min(sets.negatives.len()));
            for p in &mined.hard_negatives {
                prop_assert!(sets.negatives.contains(p));
            }
            for w in mined.hard_negatives.windows(2) {
                prop_assert!(sims.get(w[0].0, w[0].1) >= sims.get(w[1].0, w[1].1));
            }
        }

        #[test]
        fn segment_order_is_irrelevant(
            clips in 2usize..12,
            mut segs in prop::collection::vec(segment_strategy(), 1..4),
            policy in policy_strategy(),
        ) {
            let forward = build_pair_sets(clips, &segs, policy).unwrap();
            segs.reverse();
            prop_assert_eq!(forward, build_pair_sets(clips, &segs, policy).unwrap());
        }

        #[test]
        fn shrinking_never_adds_positives(
            clips in 2usize..12,
            a in 0u32..10,
            len in 1u32..10,
            shrink_lo in 0u32..5,
            shrink_hi in 0u32..5,
        ) {
            let b = (a + len).min(10);
            prop_assume!(a < b);
            let outer = seg(a as f64 / 10.0, b as f64 / 10.0);
            let (ia, ib) = (a + shrink_lo, b.saturating_sub(shrink_hi));
            prop_assume!(ia < ib);
            let inner = seg(ia as f64 / 10.0, ib as f64 / 10.0);
            let big = build_pair_sets(clips, &[outer], CrossSegmentPolicy::Positive).unwrap();
            let small = build_pair_sets(clips, &[inner], CrossSegmentPolicy::Positive).unwrap();
            for p in &small.positives {
                prop_assert!(big.positives.contains(p));
            }
        }
    }
}
