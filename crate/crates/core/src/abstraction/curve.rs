//! PER-vs-SINR curves: ingestion, monotone repair, interpolation and the
//! step-function cut at a target PER.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{db_to_linear, linear_to_db, Real};
use crate::settings::Technology;

/// PER adjustments larger than this are reported as warnings.
pub const ADJUSTMENT_WARN_PER: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint<T> {
    pub sinr_db: T,
    pub per: T,
}

/// Identity of the configuration a curve was measured for.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurveMeta {
    pub scenario_id: String,
    pub technology: Option<Technology>,
    pub mcs_index: Option<u8>,
    pub payload_bytes: Option<u32>,
}

impl CurveMeta {
    pub fn new(scenario_id: impl Into<String>, technology: Technology, mcs: u8, payload: u32) -> Self {
        Self {
            scenario_id: scenario_id.into(),
            technology: Some(technology),
            mcs_index: Some(mcs),
            payload_bytes: Some(payload),
        }
    }

    /// Parses `<scenario>_<tech>_mcs<k>_<bytes>B.csv`. The scenario part may
    /// itself contain underscores.
    pub fn from_filename(path: &Path) -> Option<Self> {
        let stem = path.file_stem()?.to_str()?;
        let mut parts: Vec<&str> = stem.split('_').collect();
        if parts.len() < 4 {
            return None;
        }
        let bytes = parts.pop()?.strip_suffix('B')?.parse().ok()?;
        let mcs = parts.pop()?.strip_prefix("mcs")?.parse().ok()?;
        let tech: Technology = parts.pop()?.parse().ok()?;
        Some(Self::new(parts.join("_"), tech, mcs, bytes))
    }

    /// Canonical file name for this metadata, if complete.
    pub fn file_name(&self) -> Option<String> {
        Some(format!(
            "{}_{}_mcs{}_{}B.csv",
            self.scenario_id,
            self.technology?,
            self.mcs_index?,
            self.payload_bytes?
        ))
    }

    pub fn label(&self) -> String {
        match (self.technology, self.mcs_index, self.payload_bytes) {
            (Some(t), Some(m), Some(b)) => format!("{}:{t}:mcs{m}:{b}B", self.scenario_id),
            _ if self.scenario_id.is_empty() => "<unnamed>".to_string(),
            _ => self.scenario_id.clone(),
        }
    }
}

/// Monotone non-increasing PER curve sampled over SINR in dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerCurve<T> {
    points: Vec<CurvePoint<T>>,
    pub meta: CurveMeta,
}

impl<T: Real> PerCurve<T> {
    /// Builds a curve that already satisfies every invariant.
    pub fn new(points: Vec<CurvePoint<T>>, meta: CurveMeta) -> Result<Self> {
        let curve = Self { points, meta };
        curve.check()?;
        Ok(curve)
    }

    fn check(&self) -> Result<()> {
        let name = self.meta.label();
        if self.points.len() < 2 {
            return Err(Error::data(format!("curve {name}: needs at least 2 points")));
        }
        for p in &self.points {
            if !p.sinr_db.is_finite() || !(p.per >= T::zero() && p.per <= T::one()) {
                return Err(Error::data(format!(
                    "curve {name}: invalid point ({}, {})",
                    p.sinr_db, p.per
                )));
            }
        }
        for w in self.points.windows(2) {
            if !(w[1].sinr_db > w[0].sinr_db) {
                return Err(Error::data(format!(
                    "curve {name}: SINR not strictly increasing at {} dB",
                    w[1].sinr_db
                )));
            }
            if w[1].per > w[0].per {
                return Err(Error::data(format!(
                    "curve {name}: PER increases at {} dB",
                    w[1].sinr_db
                )));
            }
        }
        Ok(())
    }

    pub fn points(&self) -> &[CurvePoint<T>] {
        &self.points
    }

    pub fn name(&self) -> String {
        self.meta.label()
    }

    /// `(min PER, max PER)` over the samples.
    pub fn per_range(&self) -> (T, T) {
        (self.points[self.points.len() - 1].per, self.points[0].per)
    }

    /// PER at `sinr_db`, linear in dB between samples. Below the first
    /// sample the packet is always lost, above the last it always succeeds.
    pub fn per_at_db(&self, sinr_db: T) -> T {
        let pts = &self.points;
        if sinr_db < pts[0].sinr_db {
            return T::one();
        }
        let last = pts[pts.len() - 1];
        if sinr_db > last.sinr_db {
            return T::zero();
        }
        // first index with sinr > x
        let j = pts.partition_point(|p| p.sinr_db <= sinr_db);
        if j == pts.len() {
            return last.per;
        }
        let (a, b) = (pts[j - 1], pts[j]);
        let f = (sinr_db - a.sinr_db) / (b.sinr_db - a.sinr_db);
        a.per + f * (b.per - a.per)
    }

    pub fn per_at_linear(&self, sinr: T) -> T {
        self.per_at_db(linear_to_db(sinr))
    }
}

/// Outcome of [`normalize_curve`].
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizeReport<T> {
    /// Points whose PER was clamped into [0, 1].
    pub clamped: usize,
    /// Largest absolute PER change from clamping plus monotone pooling.
    pub max_adjustment: T,
    /// `max_adjustment` exceeded [`ADJUSTMENT_WARN_PER`].
    pub warning: bool,
}

/// Sorts, clamps and monotonises raw `(sinr_db, per)` samples.
pub fn normalize_curve<T: Real>(
    raw: &[(T, T)],
    meta: CurveMeta,
) -> Result<(PerCurve<T>, NormalizeReport<T>)> {
    let name = meta.label();
    if raw.len() < 2 {
        return Err(Error::data(format!("curve {name}: needs at least 2 points, got {}", raw.len())));
    }
    if raw.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::data(format!("curve {name}: non-finite sample")));
    }
    let mut pts = raw.to_vec();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
    if let Some(w) = pts.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::data(format!("curve {name}: duplicate SINR {} dB", w[0].0)));
    }

    let mut clamped = 0;
    let originals: Vec<T> = pts.iter().map(|p| p.1).collect();
    let bounded: Vec<T> = originals
        .iter()
        .map(|&p| {
            let c = p.max(T::zero()).min(T::one());
            if c != p {
                clamped += 1;
            }
            c
        })
        .collect();
    let fitted = pav_non_increasing(&bounded);

    let max_adjustment = originals
        .iter()
        .zip(&fitted)
        .map(|(&o, &f)| (o - f).abs())
        .fold(T::zero(), T::max);
    let warning = max_adjustment > T::lit(ADJUSTMENT_WARN_PER);
    if warning {
        log::warn!(
            "curve {name}: normalisation moved PER by up to {max_adjustment} ({clamped} clamped)"
        );
    }

    let points = pts
        .iter()
        .zip(fitted)
        .map(|(&(sinr_db, _), per)| CurvePoint { sinr_db, per })
        .collect();
    let curve = PerCurve::new(points, meta)?;
    Ok((
        curve,
        NormalizeReport {
            clamped,
            max_adjustment,
            warning,
        },
    ))
}

/// Unweighted pool-adjacent-violators fit constrained to be non-increasing.
pub fn pav_non_increasing<T: Real>(y: &[T]) -> Vec<T> {
    // blocks of (mean, count)
    let mut blocks: Vec<(T, usize)> = Vec::with_capacity(y.len());
    for &v in y {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (m1, n1) = blocks[blocks.len() - 1];
            let (m0, n0) = blocks[blocks.len() - 2];
            if m1 <= m0 {
                break;
            }
            let n = n0 + n1;
            let mean = (m0 * T::from_count(n0) + m1 * T::from_count(n1)) / T::from_count(n);
            blocks.truncate(blocks.len() - 2);
            blocks.push((mean, n));
        }
    }
    blocks
        .into_iter()
        .flat_map(|(m, n)| std::iter::repeat_n(m, n))
        .collect()
}

/// A packet is received iff its SINR exceeds `gamma_th`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepFunction<T> {
    /// Linear SINR threshold.
    pub gamma_th: T,
    /// Target PER the threshold was cut at.
    pub beta: T,
}

impl<T: Real> StepFunction<T> {
    pub fn new(gamma_th: T, beta: T) -> Result<Self> {
        if !(gamma_th > T::zero()) || !gamma_th.is_finite() {
            return Err(Error::config(format!("SINR threshold must be > 0, got {gamma_th}")));
        }
        Ok(Self { gamma_th, beta })
    }

    pub fn from_db(gamma_th_db: T, beta: T) -> Result<Self> {
        Self::new(db_to_linear(gamma_th_db), beta)
    }

    pub fn gamma_th_db(&self) -> T {
        linear_to_db(self.gamma_th)
    }

    /// Strict: a SINR exactly at the threshold is a loss.
    #[inline]
    pub fn receives(&self, sinr: T) -> bool {
        sinr > self.gamma_th
    }
}

/// SINR at which the curve crosses `beta`, as a step function.
///
/// When the curve sits exactly at `beta` over a flat run, the lowest SINR of
/// that run is used.
pub fn threshold_from_curve<T: Real>(curve: &PerCurve<T>, beta: T) -> Result<StepFunction<T>> {
    let (lo, hi) = curve.per_range();
    if !(beta > lo && beta < hi) {
        return Err(Error::OutOfRange {
            what: "target PER",
            curve: curve.name(),
            detail: format!("beta {beta} not inside ({lo}, {hi})"),
        });
    }
    let pts = curve.points();
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.per == beta {
            return StepFunction::from_db(a.sinr_db, beta);
        }
        if a.per > beta && b.per < beta {
            let f = (a.per - beta) / (a.per - b.per);
            return StepFunction::from_db(a.sinr_db + f * (b.sinr_db - a.sinr_db), beta);
        }
    }
    unreachable!("beta strictly inside the PER range always crosses a segment")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn curve(pts: &[(f64, f64)]) -> PerCurve<f64> {
        let points = pts
            .iter()
            .map(|&(sinr_db, per)| CurvePoint { sinr_db, per })
            .collect();
        PerCurve::new(points, CurveMeta::default()).unwrap()
    }

    #[test]
    fn threshold_examples() {
        let c = curve(&[(0.0, 0.9), (5.0, 0.5), (10.0, 0.1)]);
        let s = threshold_from_curve(&c, 0.5).unwrap();
        assert_relative_eq!(s.gamma_th_db(), 5.0, epsilon = 1e-12);
        assert_relative_eq!(s.gamma_th, 3.1622776601683795, epsilon = 1e-12);
        let s = threshold_from_curve(&c, 0.7).unwrap();
        assert_relative_eq!(s.gamma_th_db(), 2.5, epsilon = 1e-12);
        let c = curve(&[(0.0, 1.0), (10.0, 0.0)]);
        assert_relative_eq!(threshold_from_curve(&c, 0.5).unwrap().gamma_th_db(), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn threshold_flat_segment_takes_lowest() {
        let c = curve(&[(0.0, 1.0), (2.0, 0.5), (4.0, 0.5), (6.0, 0.0)]);
        assert_relative_eq!(threshold_from_curve(&c, 0.5).unwrap().gamma_th_db(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn threshold_out_of_range() {
        let c = curve(&[(0.0, 0.9), (10.0, 0.1)]);
        for beta in [0.9, 0.95, 0.1, 0.05] {
            match threshold_from_curve(&c, beta) {
                Err(Error::OutOfRange { .. }) => {}
                other => panic!("expected out of range, got {other:?}"),
            }
        }
    }

    #[test]
    fn normalize_examples() {
        let raw = [(0.0, 0.9), (5.0, 0.5), (10.0, 0.1)];
        let (c, rep) = normalize_curve(&raw, CurveMeta::default()).unwrap();
        assert_eq!(c.points().iter().map(|p| p.per).collect::<Vec<_>>(), vec![0.9, 0.5, 0.1]);
        assert_eq!(rep.max_adjustment, 0.0);
        assert!(!rep.warning);

        let (c, rep) = normalize_curve(&[(10.0, 0.1), (0.0, 0.5), (5.0, 0.6)], CurveMeta::default()).unwrap();
        let per: Vec<f64> = c.points().iter().map(|p| p.per).collect();
        assert_relative_eq!(per[0], 0.55, epsilon = 1e-12);
        assert_relative_eq!(per[1], 0.55, epsilon = 1e-12);
        assert_eq!(per[2], 0.1);
        assert!(rep.warning);

        let (c, rep) = normalize_curve(&[(0.0, 1.2), (5.0, 0.3)], CurveMeta::default()).unwrap();
        assert_eq!(c.points()[0].per, 1.0);
        assert_eq!(rep.clamped, 1);
        assert!(rep.warning);
    }

    #[test]
    fn normalize_rejects_bad_input() {
        assert!(normalize_curve(&[(0.0, 0.5)], CurveMeta::default()).is_err());
        assert!(normalize_curve(&[(0.0, 0.5), (0.0, 0.4)], CurveMeta::default()).is_err());
        assert!(normalize_curve(&[(0.0, f64::NAN), (1.0, 0.4)], CurveMeta::default()).is_err());
    }

    #[test]
    fn per_interpolation_and_clamping() {
        let c = curve(&[(0.0, 0.9), (5.0, 0.5), (10.0, 0.1)]);
        assert_eq!(c.per_at_db(-1.0), 1.0);
        assert_eq!(c.per_at_db(11.0), 0.0);
        assert_eq!(c.per_at_db(0.0), 0.9);
        assert_eq!(c.per_at_db(10.0), 0.1);
        assert_relative_eq!(c.per_at_db(2.5), 0.7, epsilon = 1e-12);
        assert_relative_eq!(c.per_at_linear(1.0), 0.9, epsilon = 1e-12);
    }

    #[test]
    fn filename_metadata() {
        let m = CurveMeta::from_filename(Path::new("dir/highway_los_11p_mcs2_350B.csv")).unwrap();
        assert_eq!(m, CurveMeta::new("highway_los", Technology::Ieee80211p, 2, 350));
        assert_eq!(m.file_name().unwrap(), "highway_los_11p_mcs2_350B.csv");
        let m = CurveMeta::from_filename(Path::new("crossing_nlos_cv2x_mcs11_550B.csv")).unwrap();
        assert_eq!(m.technology, Some(Technology::Cv2x));
        assert_eq!(m.mcs_index, Some(11));
        assert!(CurveMeta::from_filename(Path::new("curve.csv")).is_none());
        assert!(CurveMeta::from_filename(Path::new("a_b_mcs2_350.csv")).is_none());
    }

    proptest! {
        #[test]
        fn normalized_output_satisfies_invariants(
            raw in prop::collection::btree_map(-200i32..200, -0.5f64..1.5, 2..40)
        ) {
            let raw: Vec<(f64, f64)> = raw.into_iter().map(|(x, p)| (x as f64 * 0.25, p)).collect();
            let (c, _) = normalize_curve(&raw, CurveMeta::default()).unwrap();
            prop_assert_eq!(c.points().len(), raw.len());
            for w in c.points().windows(2) {
                prop_assert!(w[1].sinr_db > w[0].sinr_db);
                prop_assert!(w[1].per <= w[0].per);
            }
            prop_assert!(c.points().iter().all(|p| (0.0..=1.0).contains(&p.per)));
        }

        #[test]
        fn threshold_monotone_in_beta(
            steps in prop::collection::vec(0.0f64..0.2, 3..20),
            b1 in 0.05f64..0.95, b2 in 0.05f64..0.95,
        ) {
            // build a strictly decreasing curve from 1 down to 0
            let total: f64 = steps.iter().sum::<f64>() + 1e-9;
            let mut per = 1.0;
            let mut pts = vec![(0.0, 1.0)];
            for (i, s) in steps.iter().enumerate() {
                per -= s / total;
                pts.push(((i + 1) as f64, per.max(0.0)));
            }
            pts.last_mut().unwrap().1 = 0.0;
            let c = curve(&pts);
            let (lo, hi) = (b1.min(b2), b1.max(b2));
            let g_lo = threshold_from_curve(&c, lo).unwrap().gamma_th;
            let g_hi = threshold_from_curve(&c, hi).unwrap().gamma_th;
            prop_assert!(g_lo >= g_hi);
        }

        #[test]
        fn pav_matches_brute_force_on_small_inputs(y in prop::collection::vec(0.0f64..1.0, 1..7)) {
            let fit = pav_non_increasing(&y);
            for w in fit.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
            // optimality: no non-increasing step function built from block means
            // of contiguous partitions does better
            let sse = |f: &[f64]| f.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            let best = brute_force_isotonic(&y);
            prop_assert!((sse(&fit) - best).abs() < 1e-9);
        }
    }

    /// Minimum SSE over all contiguous partitions whose block means are
    /// non-increasing (the isotonic optimum is always of this form).
    fn brute_force_isotonic(y: &[f64]) -> f64 {
        let n = y.len();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << (n - 1)) {
            let mut blocks = vec![];
            let mut start = 0;
            for i in 0..n - 1 {
                if mask & (1 << i) != 0 {
                    blocks.push(&y[start..=i]);
                    start = i + 1;
                }
            }
            blocks.push(&y[start..]);
            let means: Vec<f64> = blocks.iter().map(|b| b.iter().sum::<f64>() / b.len() as f64).collect();
            if means.windows(2).any(|w| w[1] > w[0]) {
                continue;
            }
            let sse: f64 = blocks
                .iter()
                .zip(&means)
                .map(|(b, m)| b.iter().map(|v| (v - m).powi(2)).sum::<f64>())
                .sum();
            best = best.min(sse);
        }
        best
    }
}
