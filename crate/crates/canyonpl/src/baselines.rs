//! Closed-form baselines: slope-intercept distance fit and the two
//! printed 3GPP street formulas.
//!
//! The slope-intercept model is P = A + 10·n·log10(d) with A the 1 m
//! intercept, n the path-loss exponent, and sigma the residual RMSE of
//! the fit. The 3GPP UMa LOS and UMi NLOS predictors are evaluated
//! exactly as printed (single-slope forms, no breakpoint or height
//! corrections).

use crate::error::{Error, Result};

/// Fitted distance-only model: prediction A + 10·n·log10(d3d).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SlopeInterceptModel {
    /// 1 m intercept, dB.
    pub a: f64,
    /// Path-loss exponent (dimensionless).
    pub n: f64,
    /// Residual RMSE of the fit (divide-by-n), dB.
    pub sigma: f64,
}

/// Ordinary least squares of path loss on 10·log10(d3d).
pub fn fit_slope_intercept(d3d: &[f64], pl: &[f64]) -> Result<SlopeInterceptModel> {
    if d3d.len() != pl.len() {
        return Err(Error::invalid(format!(
            "distance and path-loss lengths differ: {} vs {}",
            d3d.len(),
            pl.len()
        )));
    }
    if d3d.len() < 2 {
        return Err(Error::invalid("slope-intercept fit needs at least 2 links"));
    }
    if d3d.iter().any(|&d| !(d > 0.0)) || pl.iter().any(|p| !p.is_finite()) {
        return Err(Error::invalid("slope-intercept fit needs d > 0 and finite path loss"));
    }
    let x: Vec<f64> = d3d.iter().map(|&d| 10.0 * d.log10()).collect();
    let nf = x.len() as f64;
    let x_mean = x.iter().sum::<f64>() / nf;
    let y_mean = pl.iter().sum::<f64>() / nf;
    let sxx = x.iter().map(|v| (v - x_mean).powi(2)).sum::<f64>();
    if sxx == 0.0 {
        return Err(Error::invalid("all distances equal: slope is singular"));
    }
    let sxy = x
        .iter()
        .zip(pl)
        .map(|(xv, yv)| (xv - x_mean) * (yv - y_mean))
        .sum::<f64>();
    let n = sxy / sxx;
    let a = y_mean - n * x_mean;
    let mse = x
        .iter()
        .zip(pl)
        .map(|(xv, yv)| (yv - (a + n * xv)).powi(2))
        .sum::<f64>()
        / nf;
    Ok(SlopeInterceptModel {
        a,
        n,
        sigma: mse.sqrt(),
    })
}

/// Mean prediction of the fitted line (no noise term).
pub fn predict_slope_intercept(model: &SlopeInterceptModel, d3d: f64) -> Result<f64> {
    if !(d3d > 0.0) {
        return Err(Error::invalid(format!("d3d must be > 0, got {d3d}")));
    }
    Ok(model.a + 10.0 * model.n * d3d.log10())
}

/// 3GPP UMa LOS: P = 28.0 + 22·log10(d3d) + 20·log10(fc).
pub fn gpp_uma_los(d3d: f64, fc_ghz: f64) -> Result<f64> {
    if !(d3d > 0.0 && fc_ghz > 0.0) {
        return Err(Error::invalid("UMa LOS needs d3d > 0 and fc > 0"));
    }
    Ok(28.0 + 22.0 * d3d.log10() + 20.0 * fc_ghz.log10())
}

/// 3GPP UMi NLOS: P = 22.4 + 35.3·log10(d3d) + 21.3·log10(fc).
pub fn gpp_umi_nlos(d3d: f64, fc_ghz: f64) -> Result<f64> {
    if !(d3d > 0.0 && fc_ghz > 0.0) {
        return Err(Error::invalid("UMi NLOS needs d3d > 0 and fc > 0"));
    }
    Ok(22.4 + 35.3 * d3d.log10() + 21.3 * fc_ghz.log10())
}
