//! Coupled-path estimates of physical-dependence coefficients for network
//! processes and the processes they drive.
//!
//! Both paths share every innovation except the one at time 0, which the
//! coupled copy redraws. Network innovations are the per-step uniforms of
//! the generators, so the coupling is the inverse-transform one.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{is_stationary, run_recursion, ProcessScenario};
use crate::netdyn::NetworkModel;
use crate::rng::{stream, Purpose};

/// Replicates required per unit of moment order.
pub const MIN_REPS_PER_ORDER: usize = 10;

/// Which time-0 innovations the coupled copy redraws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingMode {
    /// Innovation of the process and network uniforms.
    #[default]
    Joint,
    /// Network uniforms only.
    NetworkOnly,
    /// Innovation of the process only.
    InnovationOnly,
}

impl CouplingMode {
    fn redraws_network(self) -> bool {
        self != CouplingMode::InnovationOnly
    }

    fn redraws_innovation(self) -> bool {
        self != CouplingMode::NetworkOnly
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingConfig {
    pub q: f64,
    pub max_lag: usize,
    pub reps: usize,
    pub seed: u64,
    /// Shared steps before time 0.
    pub burn_in: usize,
    pub mode: CouplingMode,
    /// First lag of the decay fit.
    #[serde(default = "one")]
    pub fit_from: usize,
}

fn one() -> usize {
    1
}

impl Default for CouplingConfig {
    fn default() -> Self {
        Self {
            q: 2.0,
            max_lag: 20,
            reps: 2000,
            seed: 1,
            burn_in: 200,
            mode: CouplingMode::Joint,
            fit_from: 1,
        }
    }
}

impl CouplingConfig {
    fn validate(&self) -> Result<()> {
        if !(self.q >= 1.0) || !self.q.is_finite() {
            return Err(Error::Domain(format!(
                "moment order q = {} must be at least 1",
                self.q
            )));
        }
        let min = MIN_REPS_PER_ORDER * self.q.ceil() as usize;
        if self.reps < min {
            return Err(Error::InvalidArgument(format!(
                "{} replicates are too few for q = {} (need at least {min})",
                self.reps, self.q
            )));
        }
        if self.fit_from + 2 > self.max_lag {
            return Err(Error::InvalidArgument(format!(
                "decay fit from lag {} needs max_lag >= {}",
                self.fit_from,
                self.fit_from + 2
            )));
        }
        Ok(())
    }
}

/// Least-squares line through `(j, ln delta_j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub log_ratio: f64,
    pub ratio: f64,
    pub r2: f64,
    pub first_lag: usize,
    pub last_lag: usize,
}

/// Fits the log-linear decay over the lags in `[from, to]` with positive
/// values; `None` with fewer than three such lags.
pub fn fit_decay(lags: &[usize], values: &[f64], from: usize, to: usize) -> Option<DecayFit> {
    let pts: Vec<(f64, f64)> = lags
        .iter()
        .zip(values)
        .filter(|(j, v)| **j >= from && **j <= to && **v > 0.0)
        .map(|(j, v)| (*j as f64, v.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 {
        sxy * sxy / (sxx * syy)
    } else {
        1.0
    };
    let first_lag = pts.first().map(|p| p.0 as usize)?;
    let last_lag = pts.last().map(|p| p.0 as usize)?;
    Some(DecayFit {
        log_ratio: slope,
        ratio: slope.exp(),
        r2,
        first_lag,
        last_lag,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingRun {
    pub q: f64,
    pub mode: CouplingMode,
    pub reps: usize,
    /// `0..=max_lag`.
    pub lags: Vec<usize>,
    /// Monte Carlo estimate of `E|D_j|^q`, with `D_j` the coupling statistic.
    pub moment: Vec<f64>,
    pub moment_se: Vec<f64>,
    /// `moment^(1/q)`.
    pub delta: Vec<f64>,
    pub se: Vec<f64>,
    /// Sum of `delta` over the computed lags.
    pub delta_sum: f64,
    /// `delta` at the last lag; large values mean the sum is truncated early.
    pub tail: f64,
    /// Log-linear fit over lags `fit_from..=max_lag`.
    pub decay_fit: Option<DecayFit>,
    /// Replicates whose paths agreed at some lag and differed later.
    pub recoupling_violations: usize,
}

impl CouplingRun {
    fn from_samples(cfg: &CouplingConfig, samples: &[Vec<f64>], violations: usize) -> Self {
        let lags: Vec<usize> = (0..=cfg.max_lag).collect();
        let b = samples.len() as f64;
        let mut moment = Vec::with_capacity(lags.len());
        let mut moment_se = Vec::with_capacity(lags.len());
        for j in 0..lags.len() {
            let mean = samples.iter().map(|s| s[j]).sum::<f64>() / b;
            let var = samples.iter().map(|s| (s[j] - mean).powi(2)).sum::<f64>() / (b - 1.0);
            moment.push(mean);
            moment_se.push((var / b).sqrt());
        }
        Self::from_moments(cfg, lags, moment, moment_se, violations)
    }

    fn from_moments(
        cfg: &CouplingConfig,
        lags: Vec<usize>,
        moment: Vec<f64>,
        moment_se: Vec<f64>,
        violations: usize,
    ) -> Self {
        let q = cfg.q;
        let delta: Vec<f64> = moment.iter().map(|m| m.powf(1.0 / q)).collect();
        // delta method for m^(1/q)
        let se = moment
            .iter()
            .zip(&moment_se)
            .map(|(m, s)| {
                if *m > 0.0 {
                    m.powf(1.0 / q - 1.0) * s / q
                } else {
                    0.0
                }
            })
            .collect();
        let delta_sum = delta.iter().sum();
        let tail = *delta.last().unwrap_or(&0.0);
        let decay_fit = fit_decay(&lags, &delta, cfg.fit_from, cfg.max_lag);
        Self {
            q,
            mode: cfg.mode,
            reps: cfg.reps,
            lags,
            moment,
            moment_se,
            delta,
            se,
            delta_sum,
            tail,
            decay_fit,
            recoupling_violations: violations,
        }
    }

    /// CSV rows `j,delta,se`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["j", "delta", "se"])?;
        for ((j, d), s) in self.lags.iter().zip(&self.delta).zip(&self.se) {
            wr.write_record([j.to_string(), d.to_string(), s.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// JSON summary without the per-lag vectors.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "q": self.q,
            "mode": self.mode,
            "reps": self.reps,
            "max_lag": self.lags.last(),
            "delta_sum": self.delta_sum,
            "tail": self.tail,
            "decay_fit": self.decay_fit,
            "recoupling_violations": self.recoupling_violations,
        })
    }
}

/// Coupled pair of network paths: the shared states before time 0 (initial
/// state plus `burn_in` steps), then lags `0..=max_lag` of both copies.
fn coupled_network_paths(
    model: &NetworkModel,
    cfg: &CouplingConfig,
    rep: u64,
    redraw: bool,
) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
    let d = model.d();
    let mut shared = stream(cfg.seed, rep, Purpose::Network);
    let mut own = stream(cfg.seed, rep, Purpose::Coupling);
    let mut u = Vec::new();
    let mut history = vec![model.initial(&mut shared)];
    for _ in 0..cfg.burn_in {
        model.draw_uniforms(&mut shared, &mut u);
        let mut next = DMatrix::zeros(d, d);
        model.step_from_uniforms(history.last().expect("nonempty"), &u, &mut next);
        history.push(next);
    }
    let state = history.last().expect("nonempty");
    let mut a = DMatrix::zeros(d, d);
    let mut b = DMatrix::zeros(d, d);
    model.draw_uniforms(&mut shared, &mut u);
    model.step_from_uniforms(state, &u, &mut a);
    if redraw {
        model.draw_uniforms(&mut own, &mut u);
    }
    model.step_from_uniforms(state, &u, &mut b);
    let mut pa = vec![a];
    let mut pb = vec![b];
    for _ in 0..cfg.max_lag {
        model.draw_uniforms(&mut shared, &mut u);
        let mut na = DMatrix::zeros(d, d);
        let mut nb = DMatrix::zeros(d, d);
        model.step_from_uniforms(pa.last().expect("nonempty"), &u, &mut na);
        model.step_from_uniforms(pb.last().expect("nonempty"), &u, &mut nb);
        pa.push(na);
        pb.push(nb);
    }
    (history, pa, pb)
}

fn recoupled_then_split(equal: impl Iterator<Item = bool>) -> bool {
    let mut met = false;
    for e in equal {
        if e {
            met = true;
        } else if met {
            return true;
        }
    }
    false
}

/// `delta_q(Ad, j)` for `j = 0..=max_lag`: the coupled copy redraws the
/// time-0 uniforms; the statistic is `max_{r,i} |Ad_{j;ri} - Ad*_{j;ri}|^q`.
pub fn estimate_delta_network(model: &NetworkModel, cfg: &CouplingConfig) -> Result<CouplingRun> {
    cfg.validate()?;
    let q = cfg.q;
    let per_rep: Vec<(Vec<f64>, bool)> = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|rep| {
            let (_, a, b) = coupled_network_paths(model, cfg, rep, true);
            let stats = a
                .iter()
                .zip(&b)
                .map(|(x, y)| (x - y).amax().powf(q))
                .collect();
            let bad = recoupled_then_split(a.iter().zip(&b).map(|(x, y)| x == y));
            (stats, bad)
        })
        .collect();
    let violations = per_rep.iter().filter(|r| r.1).count();
    let samples: Vec<Vec<f64>> = per_rep.into_iter().map(|r| r.0).collect();
    Ok(CouplingRun::from_samples(cfg, &samples, violations))
}

/// `delta_q(X, j) = max_r || X_{j;r} - X*_{j;r} ||_q` for `j = 0..=max_lag`,
/// with the time-0 innovations chosen by `cfg.mode` redrawn.
pub fn estimate_delta_x(scen: &ProcessScenario, cfg: &CouplingConfig) -> Result<CouplingRun> {
    cfg.validate()?;
    if !is_stationary(&scen.spec)? {
        return Err(Error::NotStationary { rho: f64::NAN });
    }
    let d = scen.d();
    let q = cfg.q;
    let total = cfg.burn_in + 1 + cfg.max_lag;
    let per_rep: Vec<Result<DMatrix<f64>>> = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|rep| {
            // Column burn_in is time 0.
            let inner = CouplingConfig {
                burn_in: cfg.burn_in.saturating_sub(1),
                ..*cfg
            };
            let (history, na, nb) =
                coupled_network_paths(&scen.network, &inner, rep, cfg.mode.redraws_network());
            let prefix = history[history.len() - cfg.burn_in.min(history.len())..].to_vec();
            let mut ads_a = prefix.clone();
            ads_a.extend(na);
            let mut ads_b = prefix;
            ads_b.extend(nb);
            let mut eps_rng = stream(cfg.seed, rep, Purpose::Innovations);
            let eps_a = scen.innov.draw_matrix(&mut eps_rng, total);
            let mut eps_b = eps_a.clone();
            if cfg.mode.redraws_innovation() {
                let mut own = stream(cfg.seed, rep, Purpose::Auxiliary);
                let mut z = DVector::zeros(d);
                let mut e = DVector::zeros(d);
                scen.innov.draw_into(&mut own, &mut z, &mut e);
                eps_b.set_column(cfg.burn_in, &e);
            }
            let xa = run_recursion(&scen.spec, &ads_a[..total], &eps_a)?;
            let xb = run_recursion(&scen.spec, &ads_b[..total], &eps_b)?;
            let diff = (xa.columns(cfg.burn_in, cfg.max_lag + 1)
                - xb.columns(cfg.burn_in, cfg.max_lag + 1))
            .abs();
            Ok(diff.map(|v| v.powf(q)))
        })
        .collect();
    let samples: Vec<DMatrix<f64>> = per_rep.into_iter().collect::<Result<_>>()?;
    let b = samples.len() as f64;
    let lags: Vec<usize> = (0..=cfg.max_lag).collect();
    let mut moment = Vec::with_capacity(lags.len());
    let mut moment_se = Vec::with_capacity(lags.len());
    for j in 0..lags.len() {
        let mut best = (0.0, 0.0);
        for r in 0..d {
            let mean = samples.iter().map(|s| s[(r, j)]).sum::<f64>() / b;
            if mean > best.0 || r == 0 {
                let var = samples
                    .iter()
                    .map(|s| (s[(r, j)] - mean).powi(2))
                    .sum::<f64>()
                    / (b - 1.0);
                best = (mean, (var / b).sqrt());
            }
        }
        moment.push(best.0);
        moment_se.push(best.1);
    }
    Ok(CouplingRun::from_moments(cfg, lags, moment, moment_se, 0))
}
