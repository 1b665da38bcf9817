//! Stabilized (Hájek-type) effect estimation and balance diagnostics.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectEstimate {
    pub tau_hat: f64,
    pub ess_treated: f64,
    pub ess_control: f64,
}

/// Difference of within-group weighted means:
/// `Σ wTY / Σ wT − Σ w(1−T)Y / Σ w(1−T)`.
pub fn stabilized_effect(y: &[f64], t: &[bool], w: &[f64]) -> Result<EffectEstimate> {
    if y.len() != t.len() || w.len() != t.len() {
        return Err(Error::DimensionMismatch { expected: t.len(), found: y.len().min(w.len()) });
    }
    let (mut sw_t, mut swy_t, mut sw_c, mut swy_c) = (0.0, 0.0, 0.0, 0.0);
    for ((&yi, &ti), &wi) in y.iter().zip(t).zip(w) {
        if ti {
            sw_t += wi;
            swy_t += wi * yi;
        } else {
            sw_c += wi;
            swy_c += wi * yi;
        }
    }
    if !(sw_t > 0.0) || !(sw_c > 0.0) {
        return Err(Error::Estimation("a treatment group has zero total weight".into()));
    }
    let group = |keep: bool| -> Vec<f64> { w.iter().zip(t).filter(|(_, &ti)| ti == keep).map(|(&wi, _)| wi).collect() };
    Ok(EffectEstimate {
        tau_hat: swy_t / sw_t - swy_c / sw_c,
        ess_treated: effective_sample_size(&group(true))?,
        ess_control: effective_sample_size(&group(false))?,
    })
}

/// Kish effective sample size `(Σw)² / Σw²`.
pub fn effective_sample_size(w: &[f64]) -> Result<f64> {
    let s: f64 = w.iter().sum();
    let s2: f64 = w.iter().map(|x| x * x).sum();
    if !(s2 > 0.0) {
        return Err(Error::Estimation("effective sample size of all-zero weights".into()));
    }
    Ok(s * s / s2)
}

/// Reference standard deviation for standardized mean differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SmdDenominator {
    /// Unweighted treated-group standard deviation.
    #[default]
    TreatedSd,
    /// `sqrt((s_t² + s_c²) / 2)` from unweighted group variances.
    PooledSd,
}

fn weighted_mean(x: &[f64], t: &[bool], w: &[f64], keep: bool) -> f64 {
    let (mut sw, mut swx) = (0.0, 0.0);
    for ((&xi, &ti), &wi) in x.iter().zip(t).zip(w) {
        if ti == keep {
            sw += wi;
            swx += wi * xi;
        }
    }
    swx / sw
}

fn group_variance(x: &[f64], t: &[bool], keep: bool) -> f64 {
    let vals: Vec<f64> = x.iter().zip(t).filter(|(_, &ti)| ti == keep).map(|(&v, _)| v).collect();
    let n = vals.len() as f64;
    if vals.len() < 2 {
        return 0.0;
    }
    let mean = vals.iter().sum::<f64>() / n;
    vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Reference sd used by [`std_mean_diff`], or an error when it is zero.
pub fn smd_scale(x: &[f64], t: &[bool], denom: SmdDenominator) -> Result<f64> {
    let sd = match denom {
        SmdDenominator::TreatedSd => group_variance(x, t, true).sqrt(),
        SmdDenominator::PooledSd => (0.5 * (group_variance(x, t, true) + group_variance(x, t, false))).sqrt(),
    };
    if !(sd > 0.0) {
        return Err(Error::Diagnostic("reference standard deviation is zero".into()));
    }
    Ok(sd)
}

/// (weighted treated mean − weighted control mean) / reference sd.
pub fn std_mean_diff(x: &[f64], t: &[bool], w: &[f64], denom: SmdDenominator) -> Result<f64> {
    if x.len() != t.len() || w.len() != t.len() {
        return Err(Error::DimensionMismatch { expected: t.len(), found: x.len().min(w.len()) });
    }
    let sd = smd_scale(x, t, denom)?;
    Ok((weighted_mean(x, t, w, true) - weighted_mean(x, t, w, false)) / sd)
}

/// Mean absolute standardized mean difference over `columns`.
pub fn es_mean<C: AsRef<[f64]>>(columns: &[C], t: &[bool], w: &[f64], denom: SmdDenominator) -> Result<f64> {
    if columns.is_empty() {
        return Err(Error::Diagnostic("es-mean needs at least one column".into()));
    }
    let mut total = 0.0;
    for c in columns {
        total += std_mean_diff(c.as_ref(), t, w, denom)?.abs();
    }
    Ok(total / columns.len() as f64)
}
