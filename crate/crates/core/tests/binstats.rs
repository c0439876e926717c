use dvr_core::binstats::{BinStatistics, DurationBinner, OutOfRangePolicy};
use proptest::prelude::*;

fn binner() -> DurationBinner {
    DurationBinner::new(5.0, 60.0, 1.0).unwrap()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs())
}

fn assert_same(a: &BinStatistics, b: &BinStatistics, rel: f64) {
    for i in 0..a.binner().bins() {
        assert_eq!(a.count(i), b.count(i), "count of bin {i}");
        assert!(close(a.mean(i), b.mean(i), rel), "mean of bin {i}: {} vs {}", a.mean(i), b.mean(i));
        assert!(
            close(a.variance(i), b.variance(i), rel),
            "variance of bin {i}: {} vs {}",
            a.variance(i),
            b.variance(i)
        );
    }
}

fn stream(pairs: &[(f64, f64)]) -> BinStatistics {
    let mut s = BinStatistics::empty(binner(), 30);
    for &(wt, d) in pairs {
        s.stream_update(wt, d, OutOfRangePolicy::Skip).unwrap();
    }
    s
}

fn pairs_strategy(max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0f64..200.0, 5.0f64..=60.0), 1..max)
}

proptest! {
    #[test]
    fn streaming_matches_batch_in_any_order(
        pairs in pairs_strategy(400),
        perm_seed in any::<u64>(),
    ) {
        let batch = BinStatistics::fit_pairs(binner(), &pairs, 30).unwrap();
        let mut shuffled = pairs.clone();
        let mut state = perm_seed | 1;
        for i in (1..shuffled.len()).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            shuffled.swap(i, (state % (i as u64 + 1)) as usize);
        }
        assert_same(&stream(&pairs), &batch, 1e-9);
        assert_same(&stream(&shuffled), &batch, 1e-9);
    }

    #[test]
    fn merge_of_halves_matches_the_whole(pairs in pairs_strategy(300), cut in 0usize..300) {
        let cut = cut.min(pairs.len());
        let whole = BinStatistics::fit_pairs(binner(), &pairs, 30).unwrap();
        let a = stream(&pairs[..cut]);
        let b = stream(&pairs[cut..]);
        assert_same(&a.merge(&b).unwrap(), &whole, 1e-9);
    }

    #[test]
    fn merge_is_commutative_and_associative(
        a in pairs_strategy(150),
        b in pairs_strategy(150),
        c in pairs_strategy(150),
    ) {
        let (sa, sb, sc) = (stream(&a), stream(&b), stream(&c));
        assert_same(&sa.merge(&sb).unwrap(), &sb.merge(&sa).unwrap(), 1e-12);
        let left = sa.merge(&sb).unwrap().merge(&sc).unwrap();
        let right = sa.merge(&sb.merge(&sc).unwrap()).unwrap();
        assert_same(&left, &right, 1e-9);
    }

    #[test]
    fn snapshot_round_trip_is_exact(pairs in pairs_strategy(200)) {
        let s = stream(&pairs);
        let back = BinStatistics::restore(&s.snapshot()).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn variance_is_never_negative(pairs in pairs_strategy(200)) {
        let s = stream(&pairs);
        prop_assert!(s.variances().iter().all(|v| *v >= 0.0));
    }
}

#[test]
fn corrupted_snapshot_is_rejected() {
    let s = stream(&[(3.0, 10.0), (4.0, 10.0), (9.0, 33.0)]);
    let mut bytes = s.snapshot();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    assert!(BinStatistics::restore(&bytes).is_err());
    assert!(BinStatistics::restore(&bytes[..10]).is_err());
}

#[test]
fn merging_different_binners_fails() {
    let a = BinStatistics::empty(binner(), 30);
    let b = BinStatistics::empty(DurationBinner::new(5.0, 120.0, 1.0).unwrap(), 30);
    assert!(a.merge(&b).is_err());
}

#[test]
fn out_of_range_policy() {
    let mut s = BinStatistics::empty(binner(), 30);
    s.stream_update(3.0, 61.0, OutOfRangePolicy::Skip).unwrap();
    assert_eq!(s.skipped(), 1);
    assert!(s.stream_update(3.0, 4.0, OutOfRangePolicy::Error).is_err());
    assert_eq!(s.total_count(), 0);
}
