use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::config::RollingConfig;
use super::output::{csv_bytes, horizon_header, write_atomic};
use super::panel::{assemble_panel, PanelDataset, PanelOptions};
use crate::error::{Error, Result};
use crate::forecast::{difference, forecast_h, integrate};
use crate::model::{run_recursion, InnovationSpec, LnarSpec, ProcessSpec, SigmaSpec};
use crate::netdyn::NeighborhoodFn;
use crate::rng::{stream, Purpose};

/// Fewest levels before a forecast origin.
pub const MIN_ROLLING_PERIODS: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct RollingReport {
    pub entities: Vec<String>,
    pub methods: Vec<String>,
    pub horizons: usize,
    /// Period labels of the forecast origins.
    pub origins: Vec<String>,
    /// Per method, `d x h` sums over origins of squared level errors.
    pub squared: Vec<DMatrix<f64>>,
    /// Per method, `d x h` sums over origins of absolute level errors.
    pub absolute: Vec<DMatrix<f64>>,
    /// Per method, the order used at each origin.
    pub orders: Vec<Vec<usize>>,
}

/// Level errors `Y_{T+s} - Y_hat_{T+s}` for growth forecasts made at
/// origin column `t`.
pub fn level_errors(
    levels: &DMatrix<f64>,
    t: usize,
    growth: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let h = growth.ncols();
    if t + h >= levels.ncols() {
        return Err(Error::InvalidArgument(format!(
            "origin {t} + {h} runs past the data"
        )));
    }
    let fc = integrate(&levels.column(t).into_owned(), growth)?;
    Ok(levels.columns(t + 1, h) - fc)
}

/// Forecasts the levels from each origin: difference, fit, forecast the
/// growth, integrate.
pub fn run_rolling_forecast(data: &PanelDataset, cfg: &RollingConfig) -> Result<RollingReport> {
    cfg.validate()?;
    let (d, n) = (data.d(), data.n());
    let h = cfg.horizons;
    if n < h + cfg.origins + MIN_ROLLING_PERIODS - 1 {
        return Err(Error::InvalidArgument(format!(
            "{n} periods are too few for {} origins, horizon {h} and at least {MIN_ROLLING_PERIODS} periods of history",
            cfg.origins
        )));
    }
    let k = cfg.methods.len();
    let mut squared = vec![DMatrix::zeros(d, h); k];
    let mut absolute = vec![DMatrix::zeros(d, h); k];
    let mut orders = vec![Vec::new(); k];
    let mut origins = Vec::new();
    let first = n - h - cfg.origins;
    for t in first..n - h {
        origins.push(data.periods[t].clone());
        // Growth column c is the change into level column c + 1.
        let x = difference(&data.levels.columns(0, t + 1).into_owned())?;
        let observed = data.ads.slice(1, t + 1);
        let future = &data.ads.mats()[t + 1..(t + 1 + h).min(n)];
        for (j, m) in cfg.methods.iter().enumerate() {
            let fit = m.fit(&x, observed.mats(), cfg.p_max)?;
            let f = forecast_h(&fit, &x, &observed, &m.policy, h, Some(future))?;
            let e = level_errors(&data.levels, t, &f.points)?;
            squared[j] += e.map(|v| v * v);
            absolute[j] += e.abs();
            orders[j].push(fit.p());
        }
    }
    Ok(RollingReport {
        entities: data.entities.clone(),
        methods: cfg.methods.iter().map(|m| m.label()).collect(),
        horizons: h,
        origins,
        squared,
        absolute,
        orders,
    })
}

impl RollingReport {
    pub fn total_squared(&self, method: usize) -> f64 {
        self.squared[method].sum()
    }

    fn table(&self, mats: &[DMatrix<f64>]) -> Result<Vec<u8>> {
        let mut rows = Vec::new();
        for (m, label) in mats.iter().zip(&self.methods) {
            for (r, e) in self.entities.iter().enumerate() {
                let mut row = vec![label.clone(), e.clone()];
                row.extend(m.row(r).iter().map(|v| v.to_string()));
                rows.push(row);
            }
            let mut row = vec![label.clone(), "total".to_string()];
            row.extend(m.row_sum().iter().map(|v| v.to_string()));
            rows.push(row);
        }
        csv_bytes(&horizon_header(&["method", "entity"], self.horizons), rows)
    }

    /// `method,entity,h1..hH` sums of squared errors, with a `total` row per
    /// method.
    pub fn squared_csv(&self) -> Result<Vec<u8>> {
        self.table(&self.squared)
    }

    pub fn absolute_csv(&self) -> Result<Vec<u8>> {
        self.table(&self.absolute)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join("squared_errors.csv"), &self.squared_csv()?)?;
        write_atomic(&dir.join("absolute_errors.csv"), &self.absolute_csv()?)?;
        let summary = serde_json::json!({
            "entities": self.entities,
            "methods": self.methods,
            "horizons": self.horizons,
            "origins": self.origins,
            "orders": self.orders,
            "total_squared": (0..self.methods.len()).map(|j| self.total_squared(j)).collect::<Vec<_>>(),
        });
        let mut text = serde_json::to_string_pretty(&summary)?;
        text.push('\n');
        write_atomic(&dir.join("summary.json"), text.as_bytes())
    }
}

/// Synthetic trade panel whose growth rates follow an LNAR(1) on the
/// normalized trade weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPanelSpec {
    pub d: usize,
    pub start_year: i32,
    pub years: usize,
    /// Own-lag coefficients run linearly from `alpha.0` to `alpha.1`.
    pub alpha: (f64, f64),
    pub beta: f64,
    pub growth_mean: f64,
    /// Standard deviation of the yearly log change of each trade flow.
    pub trade_volatility: f64,
}

impl Default for SyntheticPanelSpec {
    fn default() -> Self {
        Self {
            d: 10,
            start_year: 1990,
            years: 25,
            alpha: (0.1, 0.4),
            beta: 0.45,
            growth_mean: 0.5,
            trade_volatility: 0.3,
        }
    }
}

const BURN_YEARS: usize = 5;

/// Panel `index` of the synthetic family under `seed`, plus its raw annual
/// trade matrices.
pub fn synthetic_panel(
    spec: &SyntheticPanelSpec,
    seed: u64,
    index: u64,
) -> Result<(PanelDataset, BTreeMap<i32, DMatrix<f64>>)> {
    let d = spec.d;
    if d < 2 || spec.years < 2 {
        return Err(Error::InvalidArgument(
            "synthetic panel needs d >= 2 and two years".into(),
        ));
    }
    let mut rng = stream(seed, index, Purpose::Auxiliary);
    let total_years = spec.years + BURN_YEARS;
    let mut trade = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            0.0
        } else {
            rng.sample::<f64, _>(StandardNormal).exp()
        }
    });
    let mut raw = Vec::with_capacity(total_years);
    for _ in 0..total_years {
        raw.push(trade.clone());
        trade =
            trade.map(|v| v * (spec.trade_volatility * rng.sample::<f64, _>(StandardNormal)).exp());
    }
    let mut ads = Vec::with_capacity(4 * total_years);
    for t in &raw {
        let w = super::panel::trade_weights(t)?;
        for _ in 0..4 {
            ads.push(w.clone());
        }
    }
    let df = (d - 1) as f64;
    let alpha = DMatrix::from_fn(1, d, |_, r| {
        spec.alpha.0 + (spec.alpha.1 - spec.alpha.0) * r as f64 / df
    });
    let beta = DMatrix::from_element(1, d, spec.beta);
    let lnar = LnarSpec::with_common_g(alpha, beta, NeighborhoodFn::RowNormalizedTranspose)?;
    let innov = InnovationSpec::new(
        DVector::from_element(d, spec.growth_mean),
        SigmaSpec::identity(d),
    )?;
    let mut eps_rng = stream(seed, index, Purpose::Innovations);
    let eps = innov.draw_matrix(&mut eps_rng, ads.len());
    let growth = run_recursion(&ProcessSpec::Lnar(lnar), &ads, &eps)?;
    let skip = 4 * BURN_YEARS;
    let n = 4 * spec.years;
    let mut levels = DMatrix::zeros(d, n);
    let mut acc = DVector::from_element(d, 100.0);
    for k in 0..n {
        acc += growth.column(skip + k);
        levels.set_column(k, &acc);
    }
    let entities: Vec<String> = (1..=d).map(|i| format!("E{i:02}")).collect();
    let periods: Vec<String> = (0..n)
        .map(|k| format!("{}Q{}", spec.start_year + (k / 4) as i32, k % 4 + 1))
        .collect();
    let trade_by_year: BTreeMap<i32, DMatrix<f64>> = raw
        .into_iter()
        .skip(BURN_YEARS)
        .enumerate()
        .map(|(i, t)| (spec.start_year + i as i32, t))
        .collect();
    let data = assemble_panel(
        entities,
        periods,
        levels,
        &trade_by_year,
        &PanelOptions::default(),
    )?;
    debug_assert_eq!(data.ads.mats(), &ads[skip..]);
    Ok((data, trade_by_year))
}
