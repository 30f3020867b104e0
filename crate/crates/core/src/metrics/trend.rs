use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domain::MonitoringSample;
use crate::error::{Error, Result};
use crate::sim::RoundOutcome;

pub const DEFAULT_TREND_DEGREE: usize = 3;

/// Least-squares polynomial. `coefficients[k]` multiplies `x^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendFit {
    pub degree: usize,
    pub coefficients: Vec<f64>,
    pub fitted: Vec<f64>,
}

impl TrendFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * x + c)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, c)| acc * x + k as f64 * c)
    }

    /// Average slope over `[lo, hi]`; the point slope when the range is empty.
    pub fn mean_derivative(&self, lo: f64, hi: f64) -> f64 {
        if hi > lo {
            (self.eval(hi) - self.eval(lo)) / (hi - lo)
        } else {
            self.derivative(lo)
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub fn fit_trend(xs: &[f64], ys: &[f64], degree: usize) -> Result<TrendFit> {
    if degree == 0 {
        return Err(Error::Config("trend degree must be at least 1".into()));
    }
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            actual: ys.len(),
        });
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Domain(
            "trend input contains non-finite values".into(),
        ));
    }
    let mut distinct = xs.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < degree + 1 {
        return Err(Error::Domain(format!(
            "underdetermined fit: {} distinct x values for degree {degree}",
            distinct.len()
        )));
    }
    // Centre and scale x so the Vandermonde matrix stays well conditioned.
    let lo = distinct[0];
    let hi = distinct[distinct.len() - 1];
    let centre = (lo + hi) / 2.0;
    let half = (hi - lo) / 2.0;
    let u: Vec<f64> = xs.iter().map(|x| (x - centre) / half).collect();
    let a = DMatrix::from_fn(xs.len(), degree + 1, |r, c| u[r].powi(c as i32));
    let b = DVector::from_column_slice(ys);
    let svd = a.clone().svd(true, true);
    let q = svd
        .solve(&b, 1e-12)
        .map_err(|e| Error::Domain(format!("least squares: {e}")))?;

    // p(x) = sum_j q_j ((x - centre) / half)^j, expanded into powers of x.
    let mut coefficients = vec![0.0; degree + 1];
    for (j, qj) in q.iter().enumerate() {
        let scale = qj / half.powi(j as i32);
        for (k, coeff) in coefficients.iter_mut().enumerate().take(j + 1) {
            *coeff += scale * binomial(j, k) * (-centre).powi((j - k) as i32);
        }
    }
    let fitted = (&a * &q).iter().copied().collect();
    Ok(TrendFit {
        degree,
        coefficients,
        fitted,
    })
}

/// The quantity plotted against reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrendAxis {
    Accuracy,
    Energy,
    Bandwidth,
}

impl TrendAxis {
    pub const ALL: [TrendAxis; 3] = [TrendAxis::Accuracy, TrendAxis::Energy, TrendAxis::Bandwidth];

    pub fn name(self) -> &'static str {
        match self {
            TrendAxis::Accuracy => "accuracy",
            TrendAxis::Energy => "energy",
            TrendAxis::Bandwidth => "bandwidth",
        }
    }

    /// Sign the fitted slope is expected to have.
    pub fn expected_sign(self) -> f64 {
        match self {
            TrendAxis::Energy => -1.0,
            _ => 1.0,
        }
    }
}

/// One `(x, reward)` point per node and round.
pub fn trend_points(outcomes: &[RoundOutcome], axis: TrendAxis) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for o in outcomes {
        let x: Vec<f64> = match axis {
            TrendAxis::Accuracy => match &o.node_accuracy {
                Some(a) => a.clone(),
                None => continue,
            },
            TrendAxis::Energy => o.samples.iter().map(MonitoringSample::energy_j).collect(),
            TrendAxis::Bandwidth => o.samples.iter().map(|s| s.bandwidth_kbps).collect(),
        };
        xs.extend(x);
        ys.extend_from_slice(&o.rewards);
    }
    if xs.is_empty() {
        return Err(Error::Empty("trend points"));
    }
    Ok((xs, ys))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub axis: TrendAxis,
    pub fit: TrendFit,
    pub x_min: f64,
    pub x_max: f64,
    pub mean_derivative: f64,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl TrendReport {
    pub fn sign_ok(&self) -> bool {
        self.mean_derivative * self.axis.expected_sign() > 0.0
    }
}

pub fn reward_trend(
    outcomes: &[RoundOutcome],
    axis: TrendAxis,
    degree: usize,
) -> Result<TrendReport> {
    let (xs, ys) = trend_points(outcomes, axis)?;
    let fit = fit_trend(&xs, &ys, degree)?;
    let x_min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let x_max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean_derivative = fit.mean_derivative(x_min, x_max);
    Ok(TrendReport {
        axis,
        fit,
        x_min,
        x_max,
        mean_derivative,
        xs,
        ys,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [0.0, 2.0, 4.0, 6.0];
        let f = fit_trend(&xs, &ys, 1).unwrap();
        assert!(f.coefficients[0].abs() < 1e-9);
        assert!((f.coefficients[1] - 2.0).abs() < 1e-9);
        assert!((f.mean_derivative(0.0, 3.0) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn constant_ys() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let f = fit_trend(&xs, &[7.0; 5], 3).unwrap();
        assert!((f.coefficients[0] - 7.0).abs() < 1e-9);
        assert!(f.coefficients[1..].iter().all(|c| c.abs() < 1e-9));
        assert!(f.fitted.iter().all(|v| (v - 7.0).abs() < 1e-9));
    }

    #[test]
    fn recovers_cubic_off_origin() {
        let xs: Vec<f64> = (0..20).map(|i| 100.0 + i as f64).collect();
        let p = |x: f64| 1.0 - 0.5 * x + 0.01 * x * x - 2e-5 * x * x * x;
        let ys: Vec<f64> = xs.iter().map(|&x| p(x)).collect();
        let f = fit_trend(&xs, &ys, 3).unwrap();
        for &x in &xs {
            assert!((f.eval(x) - p(x)).abs() < 1e-6);
        }
    }

    #[test]
    fn underdetermined_and_bad_degree() {
        assert!(fit_trend(&[1.0, 1.0, 2.0], &[0.0, 1.0, 2.0], 2).is_err());
        assert!(fit_trend(&[1.0, 2.0], &[0.0, 1.0], 0).is_err());
        assert!(fit_trend(&[1.0, 2.0], &[0.0], 1).is_err());
    }
}
