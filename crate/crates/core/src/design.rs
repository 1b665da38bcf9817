//! Moment-expanded, standardized design matrices.
//!
//! Columns are laid out power-major: every first power, then every square,
//! then every cube, then (optionally) pairwise interactions. The design for
//! a lower moment order is therefore a literal prefix of a higher one
//! whenever no column is pruned.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::types::MomentOrder;

/// Provenance of one design column: `x_source ^ power`, or
/// `x_source * x_partner` for an interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DesignColumn {
    pub source: usize,
    pub power: u8,
    pub partner: Option<usize>,
}

impl fmt::Display for DesignColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.partner, self.power) {
            (Some(b), _) => write!(f, "x{}*x{}", self.source + 1, b + 1),
            (None, 1) => write!(f, "x{}", self.source + 1),
            (None, p) => write!(f, "x{}^{}", self.source + 1, p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    Constant,
    DuplicateOfBinary,
    Collinear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DroppedColumn {
    pub column: DesignColumn,
    pub reason: DropReason,
}

/// Per-column affine map: `raw = center + scale * value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub center: f64,
    pub scale: f64,
}

impl Affine {
    const IDENTITY: Affine = Affine { center: 0.0, scale: 1.0 };
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub values: DMatrix<f64>,
    pub columns: Vec<DesignColumn>,
    pub standardization: Vec<Affine>,
    pub dropped: Vec<DroppedColumn>,
}

/// Units whose mean and standard deviation define the standardization.
#[derive(Debug, Clone, Copy)]
pub enum Reference<'a> {
    AllUnits,
    TreatedUnits(&'a [bool]),
}

/// Correlation above which a column counts as a copy of an earlier one.
pub const COLLINEAR_TOLERANCE: f64 = 1e-10;

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = v.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

fn abs_correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, _) = mean_sd(a);
    let (mb, _) = mean_sd(b);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    (sab / (saa * sbb).sqrt()).abs()
}

impl DesignMatrix {
    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_standardized(&self) -> bool {
        self.standardization.iter().any(|a| *a != Affine::IDENTITY)
    }

    /// Rows selected by `mask`.
    pub fn rows_where(&self, mask: &[bool], keep: bool) -> DMatrix<f64> {
        let idx: Vec<usize> = mask.iter().enumerate().filter(|(_, &m)| m == keep).map(|(i, _)| i).collect();
        self.values.select_rows(&idx)
    }

    /// Values mapped back to the raw (unstandardized) scale.
    pub fn destandardize(&self) -> DMatrix<f64> {
        let mut raw = self.values.clone();
        for (mut col, a) in raw.column_iter_mut().zip(&self.standardization) {
            col.apply(|v| *v = a.center + a.scale * *v);
        }
        raw
    }

    /// Keeps only the first `k` columns (and their metadata).
    pub fn truncate_columns(&self, k: usize) -> DesignMatrix {
        DesignMatrix {
            values: self.values.columns(0, k).into_owned(),
            columns: self.columns[..k].to_vec(),
            standardization: self.standardization[..k].to_vec(),
            dropped: self.dropped.clone(),
        }
    }
}

/// Emits x, x² (m ≥ 2) and x³ (m = 3) for each column of `x_sub`, plus
/// pairwise products when `interactions` is set. Constant columns and
/// columns (near-)identical to an earlier retained one are pruned and
/// listed in `dropped`.
///
/// `sources[j]` names the original covariate behind column `j` of `x_sub`.
pub fn expand_moments(x_sub: &DMatrix<f64>, sources: &[usize], m: MomentOrder, interactions: bool) -> Result<DesignMatrix> {
    if x_sub.nrows() == 0 || x_sub.ncols() == 0 {
        return Err(Error::EmptyInput("design input has no rows or no columns".into()));
    }
    if sources.len() != x_sub.ncols() {
        return Err(Error::DimensionMismatch { expected: x_sub.ncols(), found: sources.len() });
    }

    let mut candidates: Vec<(DesignColumn, Vec<f64>)> = Vec::new();
    for power in 1..=m.get() {
        for (j, &src) in sources.iter().enumerate() {
            let v = x_sub.column(j).iter().map(|x| x.powi(i32::from(power))).collect();
            candidates.push((DesignColumn { source: src, power, partner: None }, v));
        }
    }
    if interactions {
        for a in 0..sources.len() {
            for b in (a + 1)..sources.len() {
                let v = x_sub.column(a).iter().zip(x_sub.column(b).iter()).map(|(p, q)| p * q).collect();
                candidates.push((DesignColumn { source: sources[a], power: 2, partner: Some(sources[b]) }, v));
            }
        }
    }

    // Any two non-constant columns on two rows are perfectly correlated, so
    // the collinearity screen needs at least three rows.
    let n = x_sub.nrows();
    let mut kept: Vec<(DesignColumn, Vec<f64>)> = Vec::new();
    let mut dropped = Vec::new();
    for (col, v) in candidates {
        let reason = if v.iter().all(|&x| x == v[0]) {
            Some(DropReason::Constant)
        } else if kept.iter().any(|(_, k)| *k == v) {
            Some(DropReason::DuplicateOfBinary)
        } else if n > 2 && kept.iter().any(|(_, k)| abs_correlation(k, &v) > 1.0 - COLLINEAR_TOLERANCE) {
            Some(DropReason::Collinear)
        } else {
            None
        };
        match reason {
            Some(reason) => dropped.push(DroppedColumn { column: col, reason }),
            None => kept.push((col, v)),
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyInput("every design column was pruned".into()));
    }

    let values = DMatrix::from_fn(n, kept.len(), |i, j| kept[j].1[i]);
    let columns: Vec<DesignColumn> = kept.into_iter().map(|(c, _)| c).collect();
    Ok(DesignMatrix {
        values,
        standardization: vec![Affine::IDENTITY; columns.len()],
        columns,
        dropped,
    })
}

/// Centers and scales every column by the reference units' mean and sample
/// standard deviation (n − 1 denominator). The map composes with any
/// standardization already recorded on `d`.
pub fn standardize(d: &DesignMatrix, reference: Reference<'_>) -> Result<DesignMatrix> {
    let mask: Option<&[bool]> = match reference {
        Reference::AllUnits => None,
        Reference::TreatedUnits(t) => {
            if t.len() != d.nrows() {
                return Err(Error::DimensionMismatch { expected: d.nrows(), found: t.len() });
            }
            Some(t)
        }
    };
    let mut values = d.values.clone();
    let mut standardization = Vec::with_capacity(d.ncols());
    for (j, mut col) in values.column_iter_mut().enumerate() {
        let reference_values: Vec<f64> = match mask {
            None => col.iter().copied().collect(),
            Some(t) => col.iter().zip(t).filter(|(_, &ti)| ti).map(|(v, _)| *v).collect(),
        };
        let (center, scale) = mean_sd(&reference_values);
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::DegenerateColumn { column: d.columns[j].to_string() });
        }
        col.apply(|v| *v = (*v - center) / scale);
        let prev = d.standardization[j];
        standardization.push(Affine {
            center: prev.center + prev.scale * center,
            scale: prev.scale * scale,
        });
    }
    Ok(DesignMatrix {
        values,
        columns: d.columns.clone(),
        standardization,
        dropped: d.dropped.clone(),
    })
}

/// Selects `columns` of `x`, expands to moment order `m` and standardizes.
pub fn build_design(
    x: &DMatrix<f64>,
    columns: &[usize],
    m: MomentOrder,
    interactions: bool,
    reference: Reference<'_>,
) -> Result<DesignMatrix> {
    let x_sub = x.select_columns(columns);
    let expanded = expand_moments(&x_sub, columns, m, interactions)?;
    standardize(&expanded, reference)
}
