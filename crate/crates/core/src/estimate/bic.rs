use nalgebra::DMatrix;
use serde::Serialize;

use super::design::{Design, Family};
use super::fit::{fit_design, fit_window, ModelFit};
use crate::error::{Error, Result};
use crate::netdyn::NeighborhoodFn;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BicRow {
    pub p: usize,
    /// `+inf` when some component could not be fitted.
    pub bic: f64,
}

#[derive(Debug, Clone)]
pub struct BicSelection {
    pub p: usize,
    pub table: Vec<BicRow>,
    /// First target column shared by every candidate.
    pub window_start: usize,
    /// Refit of the chosen order on the full sample.
    pub fit: ModelFit,
}

/// `sum_r [m ln(RSS_r / m) + (k_r + 1) ln m]`.
pub fn bic(fit: &ModelFit) -> f64 {
    if !fit.is_complete() {
        return f64::INFINITY;
    }
    fit.components
        .iter()
        .map(|c| {
            let m = c.n_obs as f64;
            m * (c.rss / m).ln() + (c.w.len() + 1) as f64 * m.ln()
        })
        .sum()
}

/// Scans `p = 1..=p_max` on the common window `t = p_max..n`, picks the
/// smallest BIC (ties go to the smaller order) and refits that order on
/// targets `p..n`.
pub fn select_order_bic_design(
    x: &DMatrix<f64>,
    ads: &[DMatrix<f64>],
    base: &Design,
    p_max: usize,
) -> Result<BicSelection> {
    if p_max == 0 {
        return Err(Error::InvalidArgument(
            "maximum order must be at least 1".into(),
        ));
    }
    let mut table = Vec::with_capacity(p_max);
    let mut best: Option<(usize, f64)> = None;
    for p in 1..=p_max {
        let design = base.with_order(p)?;
        let fit = fit_window(x, ads, &design, p_max)?;
        debug_assert!(fit.components.iter().all(|c| c.n_obs == x.ncols() - p_max));
        let b = bic(&fit);
        if best.is_none_or(|(_, v)| b < v) {
            best = Some((p, b));
        }
        table.push(BicRow { p, bic: b });
    }
    let (p, b) = best.expect("p_max >= 1");
    if !b.is_finite() {
        return Err(Error::Singular {
            component: 0,
            detail: "no candidate order could be fitted".into(),
        });
    }
    let fit = fit_design(x, ads, &base.with_order(p)?)?;
    Ok(BicSelection {
        p,
        table,
        window_start: p_max,
        fit,
    })
}

/// BIC order selection for a family. `g` is ignored for VAR.
pub fn select_order_bic(
    x: &DMatrix<f64>,
    ads: &[DMatrix<f64>],
    g: &[NeighborhoodFn],
    p_max: usize,
    family: Family,
) -> Result<BicSelection> {
    let base = match family {
        Family::Nar => Design::nar(g, 1)?,
        Family::Lnar => Design::lnar(g, 1)?,
        Family::Var => Design::var(1, None)?,
    };
    select_order_bic_design(x, ads, &base, p_max)
}
