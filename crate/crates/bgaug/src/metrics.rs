//! Regression evaluation: per-variable coefficient of determination plus
//! mean absolute error. The heading variable is circular, so its residuals
//! are wrapped and its variance is taken around the circular mean (a plain
//! linear mode is available for strict comparability).

use std::collections::HashMap;
use std::path::Path;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::wrap_angle;

/// R^2 = 1 - SS_res / SS_tot. May be negative for worse-than-mean
/// predictors; zero-variance targets are a degenerate-target error.
pub fn r_squared<F: Float>(y_true: &[F], y_pred: &[F]) -> Result<F> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Argument(format!(
            "length mismatch: {} true vs {} predicted",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.len() < 2 {
        return Err(Error::Argument("need at least 2 observations".into()));
    }
    let n = F::from(y_true.len()).unwrap();
    let mean = y_true.iter().fold(F::zero(), |a, &v| a + v) / n;
    let ss_tot = y_true
        .iter()
        .fold(F::zero(), |a, &v| a + (v - mean) * (v - mean));
    if ss_tot == F::zero() {
        return Err(Error::Data("target variable has zero variance".into()));
    }
    let ss_res = y_true
        .iter()
        .zip(y_pred)
        .fold(F::zero(), |a, (&t, &p)| a + (t - p) * (t - p));
    Ok(F::one() - ss_res / ss_tot)
}

/// Wrapped residual for a circular variable.
pub fn angular_residual<F: Float>(phi_true: F, phi_pred: F) -> Result<F> {
    wrap_angle(phi_pred - phi_true)
}

/// Circular mean: atan2 of the mean sine and cosine.
fn circular_mean<F: Float>(angles: &[F]) -> F {
    let (s, c) = angles.iter().fold((F::zero(), F::zero()), |(s, c), &a| {
        (s + a.sin(), c + a.cos())
    });
    s.atan2(c)
}

/// R^2 for a circular variable: residuals are wrapped, and the variance
/// term uses wrapped deviations from the circular mean.
pub fn r_squared_circular<F: Float>(phi_true: &[F], phi_pred: &[F]) -> Result<F> {
    if phi_true.len() != phi_pred.len() {
        return Err(Error::Argument(format!(
            "length mismatch: {} true vs {} predicted",
            phi_true.len(),
            phi_pred.len()
        )));
    }
    if phi_true.len() < 2 {
        return Err(Error::Argument("need at least 2 observations".into()));
    }
    let mean = circular_mean(phi_true);
    let mut ss_tot = F::zero();
    let mut ss_res = F::zero();
    for (&t, &p) in phi_true.iter().zip(phi_pred) {
        let dev = wrap_angle(t - mean)?;
        ss_tot = ss_tot + dev * dev;
        let res = angular_residual(t, p)?;
        ss_res = ss_res + res * res;
    }
    if ss_tot == F::zero() {
        return Err(Error::Data("target variable has zero circular variance".into()));
    }
    Ok(F::one() - ss_res / ss_tot)
}

/// Per-variable evaluation summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariableReport {
    pub r2: f64,
    pub mae: f64,
}

/// Evaluation report over the three pose variables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub x: VariableReport,
    pub y: VariableReport,
    pub phi: VariableReport,
    /// Whether phi was treated as a plain linear variable.
    pub phi_linear: bool,
}

/// One labels/predictions row: frame_id, x, y, phi.
#[derive(Debug, Deserialize)]
struct LabelRow {
    frame_id: String,
    x: f64,
    y: f64,
    phi: f64,
}

fn read_label_csv(path: &Path) -> Result<Vec<LabelRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    reader
        .deserialize()
        .map(|r| r.map_err(|e| Error::Data(format!("{}: {e}", path.display()))))
        .collect()
}

fn mae(residuals: &[f64]) -> f64 {
    residuals.iter().map(|r| r.abs()).sum::<f64>() / residuals.len() as f64
}

/// Join two label CSVs on frame_id and compute per-variable R^2 and MAE.
/// Row order in either file is irrelevant.
pub fn evaluate(labels_path: &Path, predictions_path: &Path, phi_linear: bool) -> Result<EvalReport> {
    let labels = read_label_csv(labels_path)?;
    let predictions = read_label_csv(predictions_path)?;
    let by_id: HashMap<&str, &LabelRow> = predictions
        .iter()
        .map(|r| (r.frame_id.as_str(), r))
        .collect();
    let mut xt = Vec::new();
    let mut xp = Vec::new();
    let mut yt = Vec::new();
    let mut yp = Vec::new();
    let mut pt = Vec::new();
    let mut pp = Vec::new();
    for row in &labels {
        if let Some(pred) = by_id.get(row.frame_id.as_str()) {
            xt.push(row.x);
            xp.push(pred.x);
            yt.push(row.y);
            yp.push(pred.y);
            pt.push(row.phi);
            pp.push(pred.phi);
        }
    }
    if xt.len() < 2 {
        return Err(Error::Data(format!(
            "labels and predictions share only {} frame_ids",
            xt.len()
        )));
    }
    let x_res: Vec<f64> = xt.iter().zip(&xp).map(|(t, p)| p - t).collect();
    let y_res: Vec<f64> = yt.iter().zip(&yp).map(|(t, p)| p - t).collect();
    let phi_res: Vec<f64> = if phi_linear {
        pt.iter().zip(&pp).map(|(t, p)| p - t).collect()
    } else {
        pt.iter()
            .zip(&pp)
            .map(|(&t, &p)| angular_residual(t, p))
            .collect::<Result<_>>()?
    };
    let phi_r2 = if phi_linear {
        r_squared(&pt, &pp)?
    } else {
        r_squared_circular(&pt, &pp)?
    };
    Ok(EvalReport {
        n: xt.len(),
        x: VariableReport {
            r2: r_squared(&xt, &xp)?,
            mae: mae(&x_res),
        },
        y: VariableReport {
            r2: r_squared(&yt, &yp)?,
            mae: mae(&y_res),
        },
        phi: VariableReport {
            r2: phi_r2,
            mae: mae(&phi_res),
        },
        phi_linear,
    })
}
