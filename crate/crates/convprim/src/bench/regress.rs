//! Ordinary least squares over benchmark records.

use crate::bench::runner::BenchRecord;
use crate::error::{Error, Result};

/// Regressor choice: theoretical MACs or measured latency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegressionX {
    MacsTheoretical,
    LatencyMean,
}

impl RegressionX {
    pub fn name(&self) -> &'static str {
        match self {
            RegressionX::MacsTheoretical => "macs_theoretical",
            RegressionX::LatencyMean => "latency_mean_ns",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "macs" | "macs_theoretical" => Ok(RegressionX::MacsTheoretical),
            "latency" | "latency_mean_ns" => Ok(RegressionX::LatencyMean),
            other => Err(Error::Parse(format!("unknown regressor '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    /// 1 - SS_res / SS_tot; 0 by convention when the response has no
    /// variance.
    pub r2: f64,
    pub x_name: String,
    pub y_name: String,
}

/// Least-squares fit of `ys` on `xs`.
pub fn ols(xs: &[f64], ys: &[f64], x_name: &str, y_name: &str) -> Result<RegressionResult> {
    if xs.len() != ys.len() {
        return Err(Error::Dimension(format!(
            "x and y lengths differ: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "regression needs at least 3 points, got {}",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let (slope, intercept) = if sxx == 0.0 { (0.0, ym) } else { (sxy / sxx, ym - sxy / sxx * xm) };

    let ss_tot: f64 = ys.iter().map(|y| (y - ym) * (y - ym)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    let r2 = if ss_tot == 0.0 { 0.0 } else { 1.0 - ss_res / ss_tot };
    Ok(RegressionResult { slope, intercept, r2, x_name: x_name.to_string(), y_name: y_name.to_string() })
}

/// Regresses mean latency on the chosen regressor over the measured (non
/// skip) records.
pub fn regress(records: &[BenchRecord], x: RegressionX) -> Result<RegressionResult> {
    let measured: Vec<&BenchRecord> = records.iter().filter(|r| !r.is_skip()).collect();
    let xs: Vec<f64> = measured
        .iter()
        .map(|r| match x {
            RegressionX::MacsTheoretical => r.macs_theoretical as f64,
            RegressionX::LatencyMean => r.latency_mean_ns,
        })
        .collect();
    let ys: Vec<f64> = measured.iter().map(|r| r.latency_mean_ns).collect();
    ols(&xs, &ys, x.name(), "latency_mean_ns")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_linear_data_has_unit_r2() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x + 2.0).collect();
        let fit = ols(&xs, &ys, "x", "y").unwrap();
        assert!((fit.slope - 3.0).abs() < 1e-12);
        assert!((fit.intercept - 2.0).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_response_has_zero_r2() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [5.0; 4];
        let fit = ols(&xs, &ys, "x", "y").unwrap();
        assert_eq!(fit.r2, 0.0);
    }

    #[test]
    fn too_few_points_is_an_error() {
        let err = ols(&[1.0, 2.0], &[1.0, 2.0], "x", "y").unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
    }

    #[test]
    fn noisy_linear_data_fits_well() {
        let xs: Vec<f64> = (1..40).map(|i| i as f64 * 100.0).collect();
        let ys: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| 0.7 * x + 11.0 + if i % 2 == 0 { 3.0 } else { -3.0 })
            .collect();
        let fit = ols(&xs, &ys, "x", "y").unwrap();
        assert!(fit.r2 > 0.99);
    }
}
