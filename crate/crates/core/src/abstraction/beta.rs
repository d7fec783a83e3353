//! Target-PER selection by PRR mean absolute error.

use crate::error::{Error, Result};
use crate::metrics::{mae, PrrSeries};
use crate::num::Real;

/// Candidate target PER values evaluated by default.
pub const DEFAULT_BETAS: [f64; 7] = [0.1, 0.3, 0.4, 0.5, 0.6, 0.7, 0.9];

#[derive(Debug, Clone, PartialEq)]
pub struct BetaSelection<T> {
    pub beta_hat: T,
    /// `(beta, MAE)` in candidate order.
    pub table: Vec<(T, T)>,
}

impl<T: Real> BetaSelection<T> {
    pub fn mae_of(&self, beta: T) -> Option<T> {
        self.table.iter().find(|(b, _)| *b == beta).map(|&(_, m)| m)
    }
}

/// Runs `simulate` once per candidate and returns the candidate whose
/// step-function PRR is closest (MAE) to `benchmark`. Ties keep the earlier
/// candidate.
pub fn select_beta<T, F>(candidates: &[T], benchmark: &PrrSeries<T>, mut simulate: F) -> Result<BetaSelection<T>>
where
    T: Real,
    F: FnMut(T) -> Result<PrrSeries<T>>,
{
    if candidates.is_empty() {
        return Err(Error::config("beta candidate list is empty"));
    }
    let mut table = Vec::with_capacity(candidates.len());
    for &beta in candidates {
        let series = simulate(beta)?;
        table.push((beta, mae(&series, benchmark)?));
    }
    let (beta_hat, _) = table
        .iter()
        .copied()
        .fold(None, |best: Option<(T, T)>, (b, m)| match best {
            Some((_, bm)) if bm <= m => best,
            _ => Some((b, m)),
        })
        .expect("non-empty");
    Ok(BetaSelection { beta_hat, table })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn series(ratios: &[f64]) -> PrrSeries<f64> {
        let mut s = PrrSeries::uniform(10.0, ratios.len()).unwrap();
        for (i, &r) in ratios.iter().enumerate() {
            let d = 10.0 * i as f64 + 5.0;
            let rx = (r * 100.0).round() as u64;
            for k in 0..100 {
                s.record(d, k < rx);
            }
        }
        s
    }

    #[test]
    fn identical_series_give_zero() {
        let bench = series(&[1.0, 0.8, 0.5]);
        let sel = select_beta(&[0.3, 0.5], &bench, |_| Ok(bench.clone())).unwrap();
        assert!(sel.table.iter().all(|&(_, m)| m == 0.0));
        assert_eq!(sel.beta_hat, 0.3);
    }

    #[test]
    fn picks_minimum() {
        let bench = series(&[1.0, 0.8, 0.5]);
        let sel = select_beta(&[0.1, 0.5, 0.9], &bench, |b| {
            Ok(if b == 0.5 { series(&[0.99, 0.79, 0.49]) } else { series(&[0.9, 0.6, 0.3]) })
        })
        .unwrap();
        assert_eq!(sel.beta_hat, 0.5);
        assert_relative_eq!(sel.mae_of(0.5).unwrap(), 0.01, epsilon = 1e-12);
    }

    #[test]
    fn single_candidate_and_errors() {
        let bench = series(&[1.0, 0.5]);
        let sel = select_beta(&[0.7], &bench, |_| Ok(series(&[0.2, 0.2]))).unwrap();
        assert_eq!(sel.beta_hat, 0.7);
        assert!(select_beta::<f64, _>(&[], &bench, |_| Ok(bench.clone())).is_err());
        assert!(select_beta(&[0.5], &bench, |_| Ok(series(&[1.0, 0.5, 0.2]))).is_err());
    }
}
