use crate::error::{Error, Result};

use super::RankedList;

/// A top-k value, with the number of items it actually covered.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtK {
    pub value: f64,
    pub used: usize,
}

impl AtK {
    /// True when the list had fewer than `k` items.
    pub fn is_short(&self, k: usize) -> bool {
        self.used < k
    }
}

fn head(list: &RankedList, k: usize) -> Result<&[super::RankedItem]> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if list.is_empty() {
        return Err(Error::Data(format!("empty ranked list for user {}", list.user_id)));
    }
    Ok(list.top(k))
}

/// Mean ground-truth WTG of the top-k items.
pub fn wtg_at_k(list: &RankedList, k: usize) -> Result<AtK> {
    let top = head(list, k)?;
    let sum: f64 = top.iter().map(|i| i.wtg).sum();
    Ok(AtK {
        value: sum / top.len() as f64,
        used: top.len(),
    })
}

/// Position-discounted sum: `sum_i wtg(l_i) / log2(1 + i)`.
pub fn dcwtg_at_k(list: &RankedList, k: usize) -> Result<AtK> {
    let top = head(list, k)?;
    let value = top
        .iter()
        .enumerate()
        .map(|(i, item)| item.wtg / ((i + 2) as f64).log2())
        .sum();
    Ok(AtK {
        value,
        used: top.len(),
    })
}

/// Top-k items whose ground-truth watch time is strictly below `threshold`, over all users.
pub fn bad_cases_at_k(lists: &[RankedList], k: usize, threshold: f64) -> usize {
    lists
        .iter()
        .map(|l| l.top(k).iter().filter(|i| i.watch_time < threshold).count())
        .sum()
}

/// Per-user total ground-truth watch time of the top-k items.
pub fn watch_time_sums_at_k(lists: &[RankedList], k: usize) -> Vec<f64> {
    lists
        .iter()
        .map(|l| l.top(k).iter().map(|i| i.watch_time).sum())
        .collect()
}

/// [`watch_time_sums_at_k`] averaged over users (0 for no users).
pub fn watch_time_at_k(lists: &[RankedList], k: usize) -> f64 {
    let sums = watch_time_sums_at_k(lists, k);
    if sums.is_empty() {
        0.0
    } else {
        sums.iter().sum::<f64>() / sums.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::RankedItem;

    pub(crate) fn item(id: &str, score: f64, wt: f64, wtg: f64) -> RankedItem {
        RankedItem {
            video_id: id.into(),
            score,
            watch_time: wt,
            wtg,
            duration: 10.0,
            producer_id: String::new(),
        }
    }

    fn list_of_wtg(values: &[f64]) -> RankedList {
        let items = values
            .iter()
            .enumerate()
            .map(|(i, &g)| item(&format!("v{i}"), -(i as f64), 5.0, g))
            .collect();
        RankedList::new("u", items)
    }

    #[test]
    fn ties_break_by_video_id() {
        let l = RankedList::new("u", vec![item("b", 1.0, 0.0, 0.0), item("a", 1.0, 0.0, 0.0), item("c", 2.0, 0.0, 0.0)]);
        let ids: Vec<_> = l.items().iter().map(|i| i.video_id.as_str()).collect();
        assert_eq!(ids, ["c", "a", "b"]);
    }

    #[test]
    fn wtg_at_k_examples() {
        let l = list_of_wtg(&[1.0, 0.0, -1.0]);
        assert_eq!(wtg_at_k(&l, 1).unwrap().value, 1.0);
        assert_eq!(wtg_at_k(&l, 3).unwrap().value, 0.0);
        let short = wtg_at_k(&l, 10).unwrap();
        assert!(short.is_short(10));
        assert_eq!(short.used, 3);
        assert!(wtg_at_k(&RankedList::new("u", vec![]), 3).is_err());
        assert!(wtg_at_k(&l, 0).is_err());
    }

    #[test]
    fn wtg_at_k_ignores_order_below_and_within_k() {
        let a = list_of_wtg(&[1.0, 0.5, 0.2, -3.0, 4.0]);
        let b = list_of_wtg(&[0.2, 1.0, 0.5, 4.0, -3.0]);
        assert_eq!(wtg_at_k(&a, 3).unwrap().value, wtg_at_k(&b, 3).unwrap().value);
    }

    #[test]
    fn dcwtg_examples() {
        let l = list_of_wtg(&[1.0, 1.0]);
        assert!((dcwtg_at_k(&l, 2).unwrap().value - (1.0 + 1.0 / 3f64.log2())).abs() < 1e-12);
        assert!((dcwtg_at_k(&l, 2).unwrap().value - 1.6309).abs() < 1e-4);
        assert_eq!(dcwtg_at_k(&list_of_wtg(&[1.0, 0.0]), 2).unwrap().value, 1.0);
        let swapped = dcwtg_at_k(&list_of_wtg(&[0.0, 1.0]), 2).unwrap().value;
        assert!((swapped - 0.6309).abs() < 1e-4);
        let x = list_of_wtg(&[0.3, -2.0]);
        assert_eq!(dcwtg_at_k(&x, 1).unwrap().value, wtg_at_k(&x, 1).unwrap().value);
    }

    #[test]
    fn bad_case_boundary_is_strict() {
        let l = RankedList::new("u", vec![item("a", 3.0, 1.9, 0.0), item("b", 2.0, 2.0, 0.0), item("c", 1.0, 0.5, 0.0)]);
        assert_eq!(bad_cases_at_k(std::slice::from_ref(&l), 3, 2.0), 2);
        assert_eq!(bad_cases_at_k(&[l.clone(), l.clone()], 3, 2.0), 4);
        let good = RankedList::new("u", vec![item("a", 1.0, 2.0, 0.0), item("b", 0.0, 9.0, 0.0)]);
        assert_eq!(bad_cases_at_k(&[good], 2, 2.0), 0);
    }

    #[test]
    fn watch_time_at_k_sums_top_items() {
        let l = RankedList::new("u", vec![item("a", 2.0, 10.0, 0.0), item("b", 1.0, 5.0, 0.0)]);
        assert_eq!(watch_time_at_k(std::slice::from_ref(&l), 2), 15.0);
        let mut items = l.items().to_vec();
        items.push(item("z", -1.0, 100.0, 0.0));
        assert_eq!(watch_time_at_k(&[RankedList::new("u", items)], 2), 15.0);
        assert_eq!(watch_time_at_k(&[], 2), 0.0);
    }
}
