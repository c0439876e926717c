use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Dataset;

use super::RankedList;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProducerGroup {
    Long,
    Short,
}

pub type ProducerGroups = BTreeMap<String, ProducerGroup>;

/// Splits producers at the median of their mean uploaded-video duration.
///
/// Each video counts once per producer, however often it was watched. Producers
/// are ordered by mean duration (ties by id) and the first `ceil(n / 2)` are
/// short, so with an odd count the median producer lands in the short group.
pub fn producer_groups(ds: &Dataset) -> Result<ProducerGroups> {
    let mut videos: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
    for r in ds.records() {
        if r.producer_id.is_empty() {
            return Err(Error::Data(format!(
                "record for video {} has no producer id; producer analysis needs one",
                r.video_id
            )));
        }
        videos
            .entry(r.producer_id.as_str())
            .or_default()
            .insert(r.video_id.as_str(), r.duration);
    }
    let mut means: Vec<(&str, f64)> = videos
        .iter()
        .map(|(p, vids)| (*p, vids.values().sum::<f64>() / vids.len() as f64))
        .collect();
    means.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));
    let n_short = means.len().div_ceil(2);
    Ok(means
        .into_iter()
        .enumerate()
        .map(|(i, (p, _))| {
            let group = if i < n_short {
                ProducerGroup::Short
            } else {
                ProducerGroup::Long
            };
            (p.to_string(), group)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficShare {
    pub long: f64,
    pub short: f64,
}

/// Fraction of all top-k slots that go to each producer group.
pub fn traffic_share(lists: &[RankedList], k: usize, groups: &ProducerGroups) -> Result<TrafficShare> {
    let (mut long, mut short) = (0usize, 0usize);
    for list in lists {
        for item in list.top(k) {
            match groups.get(&item.producer_id) {
                Some(ProducerGroup::Long) => long += 1,
                Some(ProducerGroup::Short) => short += 1,
                None => {
                    return Err(Error::Data(format!(
                        "video {} has unknown producer `{}`",
                        item.video_id, item.producer_id
                    )))
                }
            }
        }
    }
    let total = long + short;
    if total == 0 {
        return Err(Error::Data("no recommendation slots to attribute".into()));
    }
    Ok(TrafficShare {
        long: long as f64 / total as f64,
        short: short as f64 / total as f64,
    })
}

/// Agreement between two groupings over their shared producers.
pub fn group_agreement(a: &ProducerGroups, b: &ProducerGroups) -> f64 {
    let shared: BTreeSet<_> = a.keys().filter(|k| b.contains_key(*k)).collect();
    if shared.is_empty() {
        return 0.0;
    }
    let same = shared.iter().filter(|k| a[**k] == b[**k]).count();
    same as f64 / shared.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::InteractionRecord;
    use crate::metrics::RankedItem;

    fn ds(rows: &[(&str, &str, f64)]) -> Dataset {
        Dataset::unsplit(
            rows.iter()
                .map(|(p, v, d)| InteractionRecord::new("u", *v, 1.0, *d, 0).with_producer(*p))
                .collect(),
        )
    }

    #[test]
    fn two_producers_split() {
        let g = producer_groups(&ds(&[("a", "v1", 10.0), ("b", "v2", 50.0)])).unwrap();
        assert_eq!(g["a"], ProducerGroup::Short);
        assert_eq!(g["b"], ProducerGroup::Long);
    }

    #[test]
    fn odd_count_median_is_short_and_videos_count_once() {
        let g = producer_groups(&ds(&[
            ("a", "v1", 10.0),
            ("b", "v2", 30.0),
            ("b", "v2", 30.0),
            ("b", "v3", 32.0),
            ("c", "v4", 50.0),
        ]))
        .unwrap();
        assert_eq!(g["b"], ProducerGroup::Short);
        assert_eq!(g.values().filter(|x| **x == ProducerGroup::Long).count(), 1);
    }

    #[test]
    fn missing_producer_fails_fast() {
        let ds = Dataset::unsplit(vec![InteractionRecord::new("u", "v", 1.0, 5.0, 0)]);
        assert!(matches!(producer_groups(&ds), Err(Error::Data(_))));
    }

    fn rec(video: &str, producer: &str, score: f64) -> RankedItem {
        RankedItem {
            video_id: video.into(),
            score,
            watch_time: 1.0,
            wtg: 0.0,
            duration: 10.0,
            producer_id: producer.into(),
        }
    }

    #[test]
    fn shares() {
        let groups: ProducerGroups = [("L".to_string(), ProducerGroup::Long), ("S".to_string(), ProducerGroup::Short)].into();
        let all_long = RankedList::new("u", vec![rec("a", "L", 2.0), rec("b", "L", 1.0), rec("c", "S", 0.0)]);
        let s = traffic_share(std::slice::from_ref(&all_long), 2, &groups).unwrap();
        assert_eq!((s.long, s.short), (1.0, 0.0));
        let balanced = RankedList::new("u", vec![rec("a", "L", 2.0), rec("b", "S", 1.0)]);
        let s = traffic_share(&[balanced], 2, &groups).unwrap();
        assert_eq!((s.long, s.short), (0.5, 0.5));
        let unknown = RankedList::new("u", vec![rec("a", "X", 1.0)]);
        assert!(traffic_share(&[unknown], 2, &groups).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn group_sizes_differ_by_at_most_one(durations in prop::collection::vec(1.0f64..100.0, 1..40)) {
                let rows: Vec<(String, String, f64)> = durations.iter().enumerate()
                    .map(|(i, d)| (format!("p{}", i % 13), format!("v{i}"), *d)).collect();
                let ds = Dataset::unsplit(rows.iter()
                    .map(|(p, v, d)| InteractionRecord::new("u", v.clone(), 1.0, *d, 0).with_producer(p.clone()))
                    .collect());
                let g = producer_groups(&ds).unwrap();
                let long = g.values().filter(|x| **x == ProducerGroup::Long).count();
                let short = g.len() - long;
                prop_assert!(short >= long && short - long <= 1);
            }

            #[test]
            fn shares_sum_to_one(picks in prop::collection::vec(any::<bool>(), 1..60), k in 1usize..20) {
                let groups: ProducerGroups = [("L".to_string(), ProducerGroup::Long), ("S".to_string(), ProducerGroup::Short)].into();
                let items = picks.iter().enumerate()
                    .map(|(i, l)| rec(&format!("v{i}"), if *l { "L" } else { "S" }, i as f64)).collect();
                let s = traffic_share(&[RankedList::new("u", items)], k, &groups).unwrap();
                prop_assert!((s.long + s.short - 1.0).abs() <= 1e-12);
            }
        }
    }
}
