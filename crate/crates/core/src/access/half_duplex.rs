use serde::{Deserialize, Serialize};

/// Half-open time interval `[start, end)` in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub start: u64,
    pub end: u64,
}

impl Interval {
    pub fn new(start: u64, end: u64) -> Self {
        debug_assert!(end >= start);
        Self { start, end }
    }

    pub fn len(&self) -> u64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn overlap(&self, other: &Interval) -> u64 {
        self.end.min(other.end).saturating_sub(self.start.max(other.start))
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.overlap(other) > 0
    }

    /// Share of `self` covered by `other`.
    pub fn overlap_fraction(&self, other: &Interval) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.overlap(other) as f64 / self.len() as f64
    }
}

/// True when any own transmission overlaps `rx`.
pub fn blocked_by_own_tx(own_tx: &[Interval], rx: &Interval) -> bool {
    own_tx.iter().any(|t| t.overlaps(rx))
}

/// Receptions that survive the receiver's own transmissions.
pub fn half_duplex_filter(own_tx: &[Interval], rx_events: &[Interval]) -> Vec<Interval> {
    rx_events
        .iter()
        .filter(|rx| !blocked_by_own_tx(own_tx, rx))
        .copied()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let tx = [Interval::new(0, 100)];
        let rx = [Interval::new(100, 200), Interval::new(300, 400)];
        assert_eq!(half_duplex_filter(&tx, &rx), rx.to_vec());
        // same TTI
        let tti = Interval::new(5_000_000, 6_000_000);
        assert!(half_duplex_filter(&[tti], &[tti]).is_empty());
        // partial frame overlap
        assert!(half_duplex_filter(&[Interval::new(0, 622)], &[Interval::new(600, 1100)]).is_empty());
    }

    #[test]
    fn fraction() {
        let a = Interval::new(0, 400);
        assert_eq!(a.overlap_fraction(&Interval::new(200, 1000)), 0.5);
        assert_eq!(a.overlap_fraction(&Interval::new(400, 1000)), 0.0);
    }

    proptest! {
        #[test]
        fn filter_matches_pointwise_oracle(
            tx in prop::collection::vec((0u64..200, 1u64..50), 0..5),
            rx in prop::collection::vec((0u64..200, 1u64..50), 0..10),
        ) {
            let tx: Vec<_> = tx.iter().map(|&(s, l)| Interval::new(s, s + l)).collect();
            let rx: Vec<_> = rx.iter().map(|&(s, l)| Interval::new(s, s + l)).collect();
            let kept = half_duplex_filter(&tx, &rx);
            let oracle: Vec<_> = rx
                .iter()
                .filter(|r| !(r.start..r.end).any(|t| tx.iter().any(|x| (x.start..x.end).contains(&t))))
                .copied()
                .collect();
            prop_assert_eq!(kept, oracle);
        }
    }
}
