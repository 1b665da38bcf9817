use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::propensity::PropensityModel;
use crate::types::{group_sizes, Estimand};

/// Rescales each treatment group's weights to sum to one.
pub fn normalize_within_groups(w: &[f64], t: &[bool]) -> Result<Vec<f64>> {
    if w.len() != t.len() {
        return Err(Error::DimensionMismatch { expected: t.len(), found: w.len() });
    }
    let (mut st, mut sc) = (0.0, 0.0);
    for (&wi, &ti) in w.iter().zip(t) {
        if ti {
            st += wi;
        } else {
            sc += wi;
        }
    }
    if !(st > 0.0) || !(sc > 0.0) {
        return Err(Error::Estimation("a treatment group has zero total weight".into()));
    }
    Ok(w.iter().zip(t).map(|(&wi, &ti)| wi / if ti { st } else { sc }).collect())
}

/// Odds weights (ATT) or inverse-probability weights (ATE), normalized
/// within each group.
pub fn weights_from_propensity(ps: &[f64], t: &[bool], estimand: Estimand) -> Result<Vec<f64>> {
    if ps.len() != t.len() {
        return Err(Error::DimensionMismatch { expected: t.len(), found: ps.len() });
    }
    group_sizes(t)?;
    let raw: Vec<f64> = ps
        .iter()
        .zip(t)
        .map(|(&p, &ti)| match (estimand, ti) {
            (Estimand::Att, true) => 1.0,
            (Estimand::Att, false) => p / (1.0 - p),
            (Estimand::Ate, true) => 1.0 / p,
            (Estimand::Ate, false) => 1.0 / (1.0 - p),
        })
        .collect();
    normalize_within_groups(&raw, t)
}

pub fn weights_from_model<M: PropensityModel + ?Sized>(
    model: &M,
    x: &DMatrix<f64>,
    t: &[bool],
    estimand: Estimand,
) -> Result<Vec<f64>> {
    weights_from_propensity(&model.predict_ps(x)?, t, estimand)
}
