//! Packet reception ratio over distance, inter-packet gap statistics and the
//! mean absolute error between PRR series.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;

/// Default PRR bin width and extent in metres.
pub const DEFAULT_BIN_WIDTH_M: f64 = 25.0;
pub const DEFAULT_MAX_DISTANCE_M: f64 = 600.0;
/// IPG is only tracked for pairs closer than this.
pub const DEFAULT_IPG_RANGE_M: f64 = 150.0;

/// Reception tallies per distance bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrrSeries<T> {
    bin_edges: Vec<T>,
    received: Vec<u64>,
    opportunities: Vec<u64>,
}

impl<T: Real> PrrSeries<T> {
    pub fn new(bin_edges: Vec<T>) -> Result<Self> {
        if bin_edges.len() < 2 {
            return Err(Error::config("PRR series needs at least two bin edges"));
        }
        if bin_edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::config("PRR bin edges must be strictly increasing"));
        }
        let n = bin_edges.len() - 1;
        Ok(Self {
            bin_edges,
            received: vec![0; n],
            opportunities: vec![0; n],
        })
    }

    /// `n_bins` bins of `width` starting at zero.
    pub fn uniform(width: T, n_bins: usize) -> Result<Self> {
        Self::new((0..=n_bins).map(|i| width * T::from_count(i)).collect())
    }

    pub fn bin_edges(&self) -> &[T] {
        &self.bin_edges
    }

    pub fn received(&self) -> &[u64] {
        &self.received
    }

    pub fn opportunities(&self) -> &[u64] {
        &self.opportunities
    }

    pub fn n_bins(&self) -> usize {
        self.received.len()
    }

    pub fn bin_center(&self, i: usize) -> T {
        (self.bin_edges[i] + self.bin_edges[i + 1]) / T::lit(2.0)
    }

    /// Bin containing `d`; bins are half-open `[lo, hi)`.
    pub fn bin_of(&self, d: T) -> Option<usize> {
        if d < self.bin_edges[0] {
            return None;
        }
        let j = self.bin_edges.partition_point(|&e| e <= d);
        (j < self.bin_edges.len()).then(|| j - 1)
    }

    /// Counts one opportunity at distance `d`. Distances past the last edge
    /// are ignored. Returns whether the sample landed in a bin.
    pub fn record(&mut self, d: T, received: bool) -> bool {
        match self.bin_of(d) {
            Some(i) => {
                self.opportunities[i] += 1;
                self.received[i] += received as u64;
                true
            }
            None => false,
        }
    }

    /// Per-bin ratio, `None` where the bin saw no opportunity.
    pub fn ratios(&self) -> Vec<Option<T>> {
        self.received
            .iter()
            .zip(&self.opportunities)
            .map(|(&r, &n)| (n > 0).then(|| T::lit(r as f64) / T::lit(n as f64)))
            .collect()
    }

    /// `(bin center, PRR)` for every populated bin.
    pub fn prr_curve(&self) -> Vec<(T, T)> {
        self.ratios()
            .into_iter()
            .enumerate()
            .filter_map(|(i, r)| r.map(|r| (self.bin_center(i), r)))
            .collect()
    }

    pub fn same_bins(&self, other: &Self) -> bool {
        self.bin_edges == other.bin_edges
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if !self.same_bins(other) {
            return Err(Error::data("cannot merge PRR series with different bin edges"));
        }
        for i in 0..self.n_bins() {
            self.received[i] += other.received[i];
            self.opportunities[i] += other.opportunities[i];
        }
        Ok(())
    }
}

/// `(1/n) Σ |a_i − b_i|` over bins populated in both series.
pub fn mae<T: Real>(a: &PrrSeries<T>, b: &PrrSeries<T>) -> Result<T> {
    if !a.same_bins(b) {
        return Err(Error::data("MAE needs PRR series with identical bin edges"));
    }
    let (sum, n) = a
        .ratios()
        .into_iter()
        .zip(b.ratios())
        .filter_map(|(x, y)| Some((x? - y?).abs()))
        .fold((T::zero(), 0usize), |(s, n), d| (s + d, n + 1));
    if n == 0 {
        return Err(Error::data("PRR series share no populated bin"));
    }
    Ok(sum / T::from_count(n))
}

/// Gaps between consecutive successful receptions per directed pair.
#[derive(Debug, Clone, PartialEq)]
pub struct IpgStore<T> {
    range_limit: T,
    last: HashMap<(u32, u32), T>,
    gaps: Vec<T>,
}

impl<T: Real> IpgStore<T> {
    pub fn new(range_limit: T) -> Self {
        Self {
            range_limit,
            last: HashMap::new(),
            gaps: Vec::new(),
        }
    }

    pub fn range_limit(&self) -> T {
        self.range_limit
    }

    pub fn gaps(&self) -> &[T] {
        &self.gaps
    }

    /// Notes a successful reception at `time` (seconds). Out-of-range or
    /// failed receptions leave the pair's history untouched.
    pub fn record(&mut self, tx: u32, rx: u32, distance: T, received: bool, time: T) {
        if !received || distance > self.range_limit {
            return;
        }
        if let Some(prev) = self.last.insert((tx, rx), time) {
            let gap = time - prev;
            if gap > T::zero() {
                self.gaps.push(gap);
            }
        }
    }

    /// Appends the other store's gaps. Pair histories are not carried over.
    pub fn merge(&mut self, other: &Self) {
        self.gaps.extend_from_slice(&other.gaps);
    }
}

/// Updates both accumulators for one (transmission, receiver) opportunity.
pub fn record_reception<T: Real>(
    prr: &mut PrrSeries<T>,
    ipg: &mut IpgStore<T>,
    pair: (u32, u32),
    distance: T,
    received: bool,
    time: T,
) {
    prr.record(distance, received);
    ipg.record(pair.0, pair.1, distance, received, time);
}

/// `0, step, 2·step, …` up to and including `max`.
pub fn uniform_grid(step: f64, max: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && max >= 0.0) {
        return Err(Error::config("grid needs step > 0 and max >= 0"));
    }
    let n = (max / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| step * i as f64).collect())
}

/// Empirical `P(IPG > t)` on `grid`.
pub fn ipg_ccdf<T: Real>(ipg: &IpgStore<T>, grid: &[T]) -> Result<Vec<(T, T)>> {
    ccdf(ipg.gaps(), grid)
}

pub fn ccdf<T: Real>(samples: &[T], grid: &[T]) -> Result<Vec<(T, T)>> {
    if samples.is_empty() {
        return Err(Error::data("no inter-packet gaps recorded"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite gaps"));
    let n = T::from_count(sorted.len());
    Ok(grid
        .iter()
        .map(|&t| {
            let at_or_below = sorted.partition_point(|&g| g <= t);
            (t, T::from_count(sorted.len() - at_or_below) / n)
        })
        .collect())
}

/// Per-opportunity outcome counts, for conservation checks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub opportunities: u64,
    pub received: u64,
    pub lost_sinr: u64,
    pub lost_half_duplex: u64,
    pub packets_generated: u64,
    pub packets_sent: u64,
    pub packets_dropped: u64,
}

impl OutcomeCounts {
    pub fn merge(&mut self, o: &Self) {
        self.opportunities += o.opportunities;
        self.received += o.received;
        self.lost_sinr += o.lost_sinr;
        self.lost_half_duplex += o.lost_half_duplex;
        self.packets_generated += o.packets_generated;
        self.packets_sent += o.packets_sent;
        self.packets_dropped += o.packets_dropped;
    }
}

/// Everything one simulation run measures.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricStore {
    pub prr: PrrSeries<f64>,
    pub ipg: IpgStore<f64>,
    pub outcomes: OutcomeCounts,
}

impl MetricStore {
    pub fn new(bin_width_m: f64, max_distance_m: f64, ipg_range_m: f64) -> Result<Self> {
        if !(bin_width_m > 0.0 && max_distance_m >= bin_width_m) {
            return Err(Error::config("PRR bins need width > 0 and max distance >= width"));
        }
        let n = (max_distance_m / bin_width_m).round() as usize;
        Ok(Self {
            prr: PrrSeries::uniform(bin_width_m, n)?,
            ipg: IpgStore::new(ipg_range_m),
            outcomes: OutcomeCounts::default(),
        })
    }

    /// Associative, order-independent merge of independent runs.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        self.prr.merge(&other.prr)?;
        self.ipg.merge(&other.ipg);
        self.outcomes.merge(&other.outcomes);
        Ok(())
    }
}
