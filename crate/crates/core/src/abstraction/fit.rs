//! Shannon mapping, implementation-loss fit and threshold synthesis.

use serde::{Deserialize, Serialize};

use super::curve::{threshold_from_curve, PerCurve, StepFunction};
use crate::error::{Error, Result};
use crate::num::Real;
use crate::settings::{effective_throughput, TechnologySettings};

/// `B · log2(1 + γ)` in bit/s.
pub fn shannon_throughput<T: Real>(gamma_th: T, bandwidth_b: T) -> T {
    bandwidth_b * (T::one() + gamma_th).log2()
}

/// One configuration with a known curve: effective throughput against the
/// Shannon throughput at its curve-derived threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitPoint<T> {
    pub psi_e: T,
    pub psi_s: T,
    pub settings_tag: String,
}

impl<T: Real> FitPoint<T> {
    pub fn new(psi_e: T, psi_s: T, settings_tag: impl Into<String>) -> Result<Self> {
        if !(psi_e > T::zero() && psi_s > T::zero()) {
            return Err(Error::data(format!(
                "fit point needs positive throughputs, got psi_e={psi_e} psi_s={psi_s}"
            )));
        }
        Ok(Self {
            psi_e,
            psi_s,
            settings_tag: settings_tag.into(),
        })
    }

    /// Per-point implementation loss `Ψe / Ψs`.
    pub fn alpha(&self) -> T {
        self.psi_e / self.psi_s
    }
}

/// Cuts `curve` at `beta` and pairs the resulting Shannon rate with `theta`'s
/// effective throughput.
pub fn fit_point_for_curve<T: Real>(
    curve: &PerCurve<T>,
    theta: &TechnologySettings<T>,
    beta: T,
    bandwidth_b: T,
) -> Result<(FitPoint<T>, StepFunction<T>)> {
    let step = threshold_from_curve(curve, beta)?;
    let point = FitPoint::new(
        effective_throughput(theta),
        shannon_throughput(step.gamma_th, bandwidth_b),
        curve.name(),
    )?;
    Ok((point, step))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaFit<T> {
    pub alpha_hat: T,
    /// Root mean square residual `Ψe − α̂Ψs` in bit/s.
    pub rmse: T,
    pub n: usize,
}

/// Least-squares slope through the origin of `Ψe` against `Ψs`.
pub fn fit_alpha<T: Real>(points: &[FitPoint<T>]) -> Result<AlphaFit<T>> {
    if points.is_empty() {
        return Err(Error::data("cannot fit implementation loss to zero points"));
    }
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for p in points {
        if !(p.psi_s > T::zero()) {
            return Err(Error::data(format!("fit point {} has psi_s <= 0", p.settings_tag)));
        }
        sxy = sxy + p.psi_e * p.psi_s;
        sxx = sxx + p.psi_s * p.psi_s;
    }
    let alpha_hat = sxy / sxx;
    Ok(AlphaFit {
        alpha_hat,
        rmse: rmse(points, alpha_hat),
        n: points.len(),
    })
}

/// Root mean square of `Ψe − α·Ψs`.
pub fn rmse<T: Real>(points: &[FitPoint<T>], alpha: T) -> T {
    (sse(points, alpha) / T::from_count(points.len())).sqrt()
}

/// The least-squares objective.
pub fn sse<T: Real>(points: &[FitPoint<T>], alpha: T) -> T {
    points
        .iter()
        .map(|p| {
            let r = p.psi_e - alpha * p.psi_s;
            r * r
        })
        .fold(T::zero(), |a, b| a + b)
}

/// Fitted single-parameter abstraction for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractionModel<T> {
    pub scenario_id: String,
    pub alpha_hat: T,
    pub bandwidth_b: T,
    pub beta: T,
    pub rmse: T,
}

impl<T: Real> AbstractionModel<T> {
    pub fn new(scenario_id: impl Into<String>, alpha_hat: T, bandwidth_b: T, beta: T) -> Result<Self> {
        let m = Self {
            scenario_id: scenario_id.into(),
            alpha_hat,
            bandwidth_b,
            beta,
            rmse: T::zero(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn from_fit(scenario_id: impl Into<String>, fit: &AlphaFit<T>, bandwidth_b: T, beta: T) -> Result<Self> {
        let mut m = Self::new(scenario_id, fit.alpha_hat, bandwidth_b, beta)?;
        m.rmse = fit.rmse;
        if fit.alpha_hat > T::one() {
            log::warn!("fitted implementation loss {} exceeds 1", fit.alpha_hat);
        }
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_hat > T::zero()) || !self.alpha_hat.is_finite() {
            return Err(Error::data(format!("implementation loss must be > 0, got {}", self.alpha_hat)));
        }
        if !(self.bandwidth_b > T::zero()) || !self.bandwidth_b.is_finite() {
            return Err(Error::data(format!("bandwidth must be > 0, got {}", self.bandwidth_b)));
        }
        Ok(())
    }

    /// Threshold for a configuration with effective throughput `psi_e`.
    pub fn threshold_for_throughput(&self, psi_e: T) -> StepFunction<T> {
        let exponent = psi_e / (self.alpha_hat * self.bandwidth_b);
        StepFunction {
            gamma_th: T::lit(2.0).powf(exponent) - T::one(),
            beta: self.beta,
        }
    }
}

/// `γ̂_th(θ) = 2^(Ψe(θ) / (α̂·B)) − 1`
pub fn threshold_for_settings<T: Real>(
    theta: &TechnologySettings<T>,
    model: &AbstractionModel<T>,
) -> StepFunction<T> {
    model.threshold_for_throughput(effective_throughput(theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::rel_err;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pts(v: &[(f64, f64)]) -> Vec<FitPoint<f64>> {
        v.iter()
            .enumerate()
            .map(|(i, &(e, s))| FitPoint::new(e, s, format!("p{i}")).unwrap())
            .collect()
    }

    #[test]
    fn shannon_examples() {
        assert_eq!(shannon_throughput(1.0, 10e6), 10e6);
        assert_eq!(shannon_throughput(0.0, 10e6), 0.0);
        assert_eq!(shannon_throughput(3.0, 10e6), 20e6);
    }

    #[test]
    fn fit_examples() {
        let exact: Vec<_> = [10e6, 14e6, 22e6, 31e6]
            .iter()
            .map(|&s| (0.37 * s, s))
            .collect();
        let f = fit_alpha(&pts(&exact)).unwrap();
        assert_relative_eq!(f.alpha_hat, 0.37, max_relative = 1e-14);
        assert!(f.rmse < 1e-6);

        let f = fit_alpha(&pts(&[(4.0, 10.0), (6.0, 20.0)])).unwrap();
        assert_relative_eq!(f.alpha_hat, 0.32, max_relative = 1e-14);
        let f = fit_alpha(&pts(&[(5.0, 20.0)])).unwrap();
        assert_eq!(f.alpha_hat, 0.25);
        assert_eq!(f.n, 1);
        assert!(fit_alpha::<f64>(&[]).is_err());
    }

    #[test]
    fn rmse_matches_residuals() {
        let p = pts(&[(4.0, 10.0), (6.0, 20.0)]);
        let f = fit_alpha(&p).unwrap();
        let r1: f64 = 4.0 - 0.32 * 10.0;
        let r2: f64 = 6.0 - 0.32 * 20.0;
        assert_relative_eq!(f.rmse, ((r1 * r1 + r2 * r2) / 2.0).sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn threshold_synthesis_examples() {
        let m = AbstractionModel::new("h", 0.37, 10e6, 0.5).unwrap();
        assert_relative_eq!(m.threshold_for_throughput(3.7e6).gamma_th, 1.0, max_relative = 1e-12);
        assert_relative_eq!(m.threshold_for_throughput(7.4e6).gamma_th, 3.0, max_relative = 1e-12);
        assert_eq!(m.threshold_for_throughput(0.0).gamma_th, 0.0);
        assert!(m.threshold_for_throughput(1.0).gamma_th < 1e-6);
        assert!(AbstractionModel::new("h", 0.0, 10e6, 0.5).is_err());
        assert!(AbstractionModel::new("h", 0.3, -1.0, 0.5).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let p: Vec<FitPoint<f32>> = vec![FitPoint::new(4.0, 10.0, "a").unwrap(), FitPoint::new(6.0, 20.0, "b").unwrap()];
        assert!((fit_alpha(&p).unwrap().alpha_hat - 0.32).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn fit_is_scale_consistent(
            raw in prop::collection::vec((0.1f64..20.0, 0.5f64..40.0), 1..20),
            c in 0.01f64..100.0,
        ) {
            let a = fit_alpha(&pts(&raw)).unwrap().alpha_hat;
            let scaled: Vec<_> = raw.iter().map(|&(e, s)| (c * e, s)).collect();
            let b = fit_alpha(&pts(&scaled)).unwrap().alpha_hat;
            prop_assert!(rel_err(b, c * a) < 1e-12);
        }

        #[test]
        fn fitted_alpha_minimises_objective(raw in prop::collection::vec((0.1f64..20.0, 0.5f64..40.0), 1..20)) {
            let p = pts(&raw);
            let a = fit_alpha(&p).unwrap().alpha_hat;
            let at = sse(&p, a);
            prop_assert!(sse(&p, a * 1.001) >= at);
            prop_assert!(sse(&p, a * 0.999) >= at);
        }
    }
}
