//! Recursive h-step forecasts, network forecasts, the difference/integrate
//! transform and forecast-error summaries.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::ModelFit;
use crate::netdyn::AdjacencySeries;

fn default_alpha() -> f64 {
    1.0
}

/// How snapshots beyond the observed network history are obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NetworkForecastPolicy {
    /// The future snapshots are supplied.
    Known,
    /// The last observed snapshot is repeated.
    HoldLast,
    /// Independent two-state chain per edge, transition probabilities from
    /// smoothed counts; an edge is forecast present when its presence
    /// probability exceeds one half. `freeze` reuses the one-step forecast
    /// at every horizon.
    PerEdgeMarkov {
        #[serde(default = "default_alpha")]
        laplace_alpha: f64,
        #[serde(default)]
        freeze: bool,
    },
}

impl NetworkForecastPolicy {
    pub fn per_edge_markov() -> Self {
        NetworkForecastPolicy::PerEdgeMarkov {
            laplace_alpha: 1.0,
            freeze: false,
        }
    }

    /// Short label used in report tables.
    pub fn label(&self) -> &'static str {
        match self {
            NetworkForecastPolicy::Known => "known",
            NetworkForecastPolicy::HoldLast => "hold_last",
            NetworkForecastPolicy::PerEdgeMarkov { freeze: false, .. } => "markov",
            NetworkForecastPolicy::PerEdgeMarkov { freeze: true, .. } => "markov_frozen",
        }
    }
}

/// Smoothed per-edge transition probabilities of a binary network history.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeChains {
    pub stay: DMatrix<f64>,
    pub enter: DMatrix<f64>,
    pub last: DMatrix<f64>,
}

impl EdgeChains {
    pub fn fit(history: &AdjacencySeries, laplace_alpha: f64) -> Result<Self> {
        let last = history
            .last()
            .ok_or_else(|| Error::InvalidArgument("empty network history".into()))?
            .clone();
        if !history.is_binary() {
            return Err(Error::Domain(
                "per-edge Markov forecasts need a binary network history".into(),
            ));
        }
        if !(laplace_alpha >= 0.0) {
            return Err(Error::Domain(
                "Laplace smoothing count must be non-negative".into(),
            ));
        }
        let d = history.d();
        let mut n11 = DMatrix::<f64>::zeros(d, d);
        let mut n1 = DMatrix::<f64>::zeros(d, d);
        let mut n01 = DMatrix::<f64>::zeros(d, d);
        let mut n0 = DMatrix::<f64>::zeros(d, d);
        for w in history.mats().windows(2) {
            for k in 0..d * d {
                let (a, b) = (w[0].as_slice()[k], w[1].as_slice()[k]);
                if a == 1.0 {
                    n1.as_mut_slice()[k] += 1.0;
                    n11.as_mut_slice()[k] += b;
                } else {
                    n0.as_mut_slice()[k] += 1.0;
                    n01.as_mut_slice()[k] += b;
                }
            }
        }
        let smooth = |num: &DMatrix<f64>, den: &DMatrix<f64>, fallback: f64| {
            num.zip_map(den, |a, b| {
                let den = b + 2.0 * laplace_alpha;
                if den > 0.0 {
                    (a + laplace_alpha) / den
                } else {
                    fallback
                }
            })
        };
        Ok(Self {
            stay: smooth(&n11, &n1, 1.0),
            enter: smooth(&n01, &n0, 0.0),
            last,
        })
    }

    /// `P(edge present h steps after the last snapshot)`.
    pub fn presence_probability(&self, h: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.last.nrows(), self.last.ncols(), |i, j| {
            two_state_presence(
                self.stay[(i, j)],
                self.enter[(i, j)],
                self.last[(i, j)] == 1.0,
                h,
            )
        })
    }
}

/// h-step presence probability of a two-state chain: with
/// `lambda = stay - enter` and `pi = enter / (1 - lambda)`,
/// `P_h = pi + (s - pi) lambda^h`.
pub fn two_state_presence(stay: f64, enter: f64, present: bool, h: usize) -> f64 {
    let s = if present { 1.0 } else { 0.0 };
    let lambda = stay - enter;
    if (1.0 - lambda).abs() < 1e-15 {
        return s;
    }
    let pi = enter / (1.0 - lambda);
    pi + (s - pi) * lambda.powi(h as i32)
}

/// Snapshots for the `h` times after the end of `history`. `Known` needs the
/// future passed in `known`.
pub fn forecast_network(
    history: &AdjacencySeries,
    policy: &NetworkForecastPolicy,
    h: usize,
    known: Option<&[DMatrix<f64>]>,
) -> Result<AdjacencySeries> {
    let last = history
        .last()
        .ok_or_else(|| Error::InvalidArgument("empty network history".into()))?;
    let t0 = history.end_time() + 1;
    let mats = match policy {
        NetworkForecastPolicy::Known => {
            let future = known.unwrap_or(&[]);
            if future.len() < h {
                return Err(Error::MissingSnapshot {
                    t: t0 + future.len() as i64,
                });
            }
            future[..h].to_vec()
        }
        NetworkForecastPolicy::HoldLast => vec![last.clone(); h],
        NetworkForecastPolicy::PerEdgeMarkov {
            laplace_alpha,
            freeze,
        } => {
            let chains = EdgeChains::fit(history, *laplace_alpha)?;
            (1..=h)
                .map(|s| {
                    let step = if *freeze { 1 } else { s };
                    chains
                        .presence_probability(step)
                        .map(|p| if p > 0.5 { 1.0 } else { 0.0 })
                })
                .collect()
        }
    };
    AdjacencySeries::new(history.d(), t0, mats)
}

/// Point forecasts `X_hat_{n+1..n+h}` (columns) and the snapshots used beyond
/// the observed history.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastSet {
    pub points: DMatrix<f64>,
    pub networks: AdjacencySeries,
    pub truth: Option<DMatrix<f64>>,
}

impl ForecastSet {
    pub fn horizons(&self) -> usize {
        self.points.ncols()
    }

    /// `truth - point`, when the truth is attached.
    pub fn errors(&self) -> Option<DMatrix<f64>> {
        self.truth.as_ref().map(|t| t - &self.points)
    }

    pub fn with_truth(mut self, truth: DMatrix<f64>) -> Result<Self> {
        if truth.shape() != self.points.shape() {
            return Err(Error::Dimension(format!(
                "truth is {}x{}, forecasts are {}x{}",
                truth.nrows(),
                truth.ncols(),
                self.points.nrows(),
                self.points.ncols()
            )));
        }
        self.truth = Some(truth);
        Ok(self)
    }

    /// CSV rows `h,component,point,truth,error` (1-based; truth and error
    /// empty when unknown).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["h", "component", "point", "truth", "error"])?;
        let errors = self.errors();
        for s in 0..self.horizons() {
            for r in 0..self.points.nrows() {
                let (truth, err) = match (&self.truth, &errors) {
                    (Some(t), Some(e)) => (t[(r, s)].to_string(), e[(r, s)].to_string()),
                    _ => (String::new(), String::new()),
                };
                wr.write_record([
                    (s + 1).to_string(),
                    (r + 1).to_string(),
                    self.points[(r, s)].to_string(),
                    truth,
                    err,
                ])?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

/// Recursive forecast of the `h` points after the last column of `x`.
///
/// `observed[k]` is the snapshot at column `k` of `x`; snapshots from
/// column `observed.len()` onwards come from `policy` (for `Known`, from
/// `known_future`, whose first entry sits at column `observed.len()`).
/// Unobserved lagged values are replaced by earlier forecasts.
pub fn forecast_h(
    fit: &ModelFit,
    x: &DMatrix<f64>,
    observed: &AdjacencySeries,
    policy: &NetworkForecastPolicy,
    h: usize,
    known_future: Option<&[DMatrix<f64>]>,
) -> Result<ForecastSet> {
    let (d, n) = x.shape();
    let p = fit.p();
    if d != fit.d {
        return Err(Error::Dimension(format!(
            "series has {d} components, fit has {}",
            fit.d
        )));
    }
    if h == 0 {
        return Err(Error::InvalidArgument(
            "forecast horizon must be at least 1".into(),
        ));
    }
    if n < p {
        return Err(Error::InvalidArgument(format!(
            "history of {n} points is shorter than the order {p}"
        )));
    }
    let needs_network = fit.design.family != crate::estimate::Family::Var;
    // Snapshot columns needed: up to n + h - 2.
    let last_needed = n + h - 1;
    let (networks, future): (AdjacencySeries, Vec<DMatrix<f64>>) = if needs_network {
        let missing = last_needed.saturating_sub(observed.len());
        let f = if missing == 0 {
            AdjacencySeries::empty(d, observed.end_time() + 1)
        } else {
            forecast_network(observed, policy, missing, known_future)?
        };
        let mats = f.mats().to_vec();
        (f, mats)
    } else {
        (AdjacencySeries::empty(d, observed.t0()), Vec::new())
    };
    let snapshot = |c: usize| -> Option<&DMatrix<f64>> {
        if !needs_network {
            return None;
        }
        if c < observed.len() {
            Some(observed.at(c))
        } else {
            future.get(c - observed.len())
        }
    };
    let mut cols: Vec<DVector<f64>> = x
        .column_iter()
        .skip(n - p)
        .map(|c| c.into_owned())
        .collect();
    let mut points = DMatrix::zeros(d, h);
    for s in 0..h {
        let t = n + s;
        let len = cols.len();
        let xs: Vec<&DVector<f64>> = (1..=p).map(|j| &cols[len - j]).collect();
        let ads: Vec<Option<&DMatrix<f64>>> = (1..=p).map(|j| snapshot(t - j)).collect();
        if needs_network {
            if let Some(j) = ads.iter().position(Option::is_none) {
                return Err(Error::MissingSnapshot {
                    t: observed.t0() + (t - j - 1) as i64,
                });
            }
        }
        let pred = fit.predict(&xs, &ads)?;
        points.set_column(s, &pred);
        cols.push(pred);
    }
    Ok(ForecastSet {
        points,
        networks,
        truth: None,
    })
}

/// Growth series `Y_t - Y_{t-1}`.
pub fn difference(y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = y.ncols();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "differencing needs at least two points".into(),
        ));
    }
    Ok(y.columns(1, n - 1) - y.columns(0, n - 1))
}

/// Level forecasts `Y_n + sum_{s<=h} X_hat_{n+s}` for every horizon.
pub fn integrate(y_last: &DVector<f64>, growth: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if growth.nrows() != y_last.len() {
        return Err(Error::Dimension(format!(
            "{} levels but {} growth components",
            y_last.len(),
            growth.nrows()
        )));
    }
    let mut out = DMatrix::zeros(growth.nrows(), growth.ncols());
    let mut acc = y_last.clone();
    for s in 0..growth.ncols() {
        acc += growth.column(s);
        out.set_column(s, &acc);
    }
    Ok(out)
}

/// Forecast-error summary over replicates; every cell is a sum over
/// replicates taken in sorted order, so it does not depend on the order
/// the replicates are supplied in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorSummary {
    pub replicates: usize,
    /// `d x h` mean squared errors.
    #[serde(with = "crate::linalg::serde_rows")]
    pub mse_by_component: DMatrix<f64>,
    /// `d x h` sums of squared errors.
    #[serde(with = "crate::linalg::serde_rows")]
    pub sse: DMatrix<f64>,
    /// `d x h` sums of absolute errors.
    #[serde(with = "crate::linalg::serde_rows")]
    pub sae: DMatrix<f64>,
}

fn order_free_sum(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.into_iter().sum()
}

impl ErrorSummary {
    /// `errors[i]` is the `d x h` error matrix of replicate `i`.
    pub fn from_errors(errors: &[DMatrix<f64>]) -> Result<Self> {
        let first = errors
            .first()
            .ok_or_else(|| Error::InvalidArgument("no replicates".into()))?;
        let (d, h) = first.shape();
        if errors.iter().any(|e| e.shape() != (d, h)) {
            return Err(Error::Dimension(
                "replicate error matrices differ in shape".into(),
            ));
        }
        let b = errors.len() as f64;
        let sse = DMatrix::from_fn(d, h, |r, s| {
            order_free_sum(errors.iter().map(|e| e[(r, s)].powi(2)).collect())
        });
        let sae = DMatrix::from_fn(d, h, |r, s| {
            order_free_sum(errors.iter().map(|e| e[(r, s)].abs()).collect())
        });
        Ok(Self {
            replicates: errors.len(),
            mse_by_component: &sse / b,
            sse,
            sae,
        })
    }

    /// `(1/d) sum_r mse_{r,h}` per horizon.
    pub fn mse(&self) -> Vec<f64> {
        let d = self.mse_by_component.nrows() as f64;
        self.mse_by_component
            .column_iter()
            .map(|c| c.sum() / d)
            .collect()
    }
}

/// Per-horizon MSE averaged over components and replicates.
pub fn evaluate_mse(truth: &[DMatrix<f64>], forecasts: &[DMatrix<f64>]) -> Result<ErrorSummary> {
    if truth.len() != forecasts.len() {
        return Err(Error::Dimension(format!(
            "{} truths, {} forecasts",
            truth.len(),
            forecasts.len()
        )));
    }
    let errors: Vec<DMatrix<f64>> = truth
        .iter()
        .zip(forecasts)
        .map(|(t, f)| {
            if t.shape() != f.shape() {
                Err(Error::Dimension("truth and forecast shapes differ".into()))
            } else {
                Ok(t - f)
            }
        })
        .collect::<Result<_>>()?;
    ErrorSummary::from_errors(&errors)
}
