//! Power-law fits on log-log data.

use hgdlab::{LabError, Result};
use serde::Serialize;

use crate::table::Table;

/// Least squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
    /// Rows whose x or y was missing or non-positive.
    pub dropped: usize,
}

/// Fits `y ~ exp(intercept) x^slope`; non-positive points are dropped.
pub fn fit_points(points: &[(f64, f64)]) -> Result<ScalingFit> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let dropped = points.len() - logs.len();
    if dropped > 0 {
        log::warn!("scaling fit dropped {dropped} non-positive point(s)");
    }
    if logs.len() < 3 {
        return Err(LabError::Validation(format!(
            "a scaling fit needs at least 3 positive points, got {}",
            logs.len()
        )));
    }
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(LabError::Validation("a scaling fit needs at least two distinct x values".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok(ScalingFit { slope, intercept: my - slope * mx, r_squared, points: logs.len(), dropped })
}

/// Fits two named columns of a table.
pub fn fit_scaling(rows: &Table, x_field: &str, y_field: &str) -> Result<ScalingFit> {
    let xs = rows.f64s(x_field)?;
    let ys = rows.f64s(y_field)?;
    let pts: Vec<(f64, f64)> =
        xs.into_iter().zip(ys).map(|(x, y)| (x.unwrap_or(f64::NAN), y.unwrap_or(f64::NAN))).collect();
    fit_points(&pts)
}
