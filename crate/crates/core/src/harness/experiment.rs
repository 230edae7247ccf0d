use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::output::{csv_bytes, horizon_header, write_atomic};
use crate::error::{Error, Result};
use crate::forecast::{forecast_h, ErrorSummary};
use crate::model::SimOptions;

/// Accumulated errors of one method at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodResult {
    pub n: usize,
    pub method: String,
    pub summary: ErrorSummary,
    /// Selected order -> number of replicates.
    pub orders: BTreeMap<usize, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureRecord {
    pub n: usize,
    pub replicate: usize,
    pub message: String,
}

/// Forecast errors (`truth - forecast`, `d x h`) of one replicate and method.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateErrors {
    pub n: usize,
    pub replicate: usize,
    pub method: String,
    pub errors: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub d: usize,
    pub results: Vec<MethodResult>,
    pub failures: Vec<FailureRecord>,
    pub errors: Vec<ReplicateErrors>,
}

struct ReplicateOutcome {
    errors: Vec<DMatrix<f64>>,
    orders: Vec<usize>,
}

fn run_replicate(
    cfg: &ExperimentConfig,
    scen: &crate::model::ProcessScenario,
    n: usize,
    id: u64,
) -> Result<ReplicateOutcome> {
    let h = cfg.horizons;
    let opts = SimOptions::burn_in(cfg.burn_in);
    let path = scen.simulate_path(n + h, &opts, cfg.seed, id)?;
    let x = path.x.columns(0, n).into_owned();
    let truth = path.x.columns(n, h).into_owned();
    // Ad_1..Ad_{n-1} are observed; the rest is the policy's business.
    let observed = path.ads.slice(0, n - 1);
    let future = &path.ads.mats()[n - 1..n + h - 1];
    let mut errors = Vec::with_capacity(cfg.methods.len());
    let mut orders = Vec::with_capacity(cfg.methods.len());
    for m in &cfg.methods {
        let fit = m.fit(&x, observed.mats(), cfg.p_max)?;
        let f = forecast_h(&fit, &x, &observed, &m.policy, h, Some(future))?;
        errors.push(&truth - &f.points);
        orders.push(fit.p());
    }
    Ok(ReplicateOutcome { errors, orders })
}

/// Errors when more than `rate` of the replicates failed, or all of them.
pub fn check_failures(failed: usize, total: usize, rate: f64) -> Result<()> {
    if failed as f64 > rate * total as f64 || (total > 0 && failed == total) {
        return Err(Error::TooManyFailures { failed, total });
    }
    Ok(())
}

/// Runs every replicate at every sample size. Replicates run in parallel;
/// results are assembled in replicate order, so the report depends only on
/// the configuration.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let scen = cfg.scenario.build()?;
    let b = cfg.replicates;
    let labels: Vec<String> = cfg.methods.iter().map(|m| m.label()).collect();
    let mut results = Vec::new();
    let mut failures = Vec::new();
    let mut all_errors = Vec::new();
    for (k, &n) in cfg.sample_sizes.iter().enumerate() {
        let outcomes: Vec<Result<ReplicateOutcome>> = (0..b)
            .into_par_iter()
            .map(|i| run_replicate(cfg, &scen, n, (k * b + i) as u64))
            .collect();
        let mut per_method: Vec<Vec<DMatrix<f64>>> = vec![Vec::new(); labels.len()];
        let mut orders: Vec<BTreeMap<usize, usize>> = vec![BTreeMap::new(); labels.len()];
        let mut failed = 0;
        for (i, o) in outcomes.into_iter().enumerate() {
            match o {
                Ok(o) => {
                    for (j, e) in o.errors.into_iter().enumerate() {
                        *orders[j].entry(o.orders[j]).or_default() += 1;
                        if cfg.write_errors {
                            all_errors.push(ReplicateErrors {
                                n,
                                replicate: i,
                                method: labels[j].clone(),
                                errors: e.clone(),
                            });
                        }
                        per_method[j].push(e);
                    }
                }
                Err(e) => {
                    failed += 1;
                    failures.push(FailureRecord {
                        n,
                        replicate: i,
                        message: e.to_string(),
                    });
                }
            }
        }
        check_failures(failed, b, cfg.max_failure_rate)?;
        for (j, errs) in per_method.iter().enumerate() {
            results.push(MethodResult {
                n,
                method: labels[j].clone(),
                summary: ErrorSummary::from_errors(errs)?,
                orders: std::mem::take(&mut orders[j]),
            });
        }
    }
    Ok(ExperimentReport {
        config: cfg.clone(),
        d: scen.d(),
        results,
        failures,
        errors: all_errors,
    })
}

fn fmt(v: f64) -> String {
    v.to_string()
}

/// `n,method,h1..hH`: MSE averaged over components and replicates.
pub fn mse_table_csv(results: &[MethodResult], h: usize) -> Result<Vec<u8>> {
    let rows = results.iter().map(|r| {
        let mut row = vec![r.n.to_string(), r.method.clone()];
        row.extend(r.summary.mse().into_iter().map(fmt));
        row
    });
    csv_bytes(&horizon_header(&["n", "method"], h), rows)
}

/// MSE relative to the first VAR-family method at the same `n`.
pub fn relative_mse_table_csv(results: &[MethodResult], base: &str, h: usize) -> Result<Vec<u8>> {
    let mut rows = Vec::new();
    for r in results {
        let Some(b) = results.iter().find(|b| b.n == r.n && b.method == base) else {
            continue;
        };
        let bm = b.summary.mse();
        let mut row = vec![r.n.to_string(), r.method.clone()];
        row.extend(r.summary.mse().iter().zip(&bm).map(|(a, b)| fmt(a / b)));
        rows.push(row);
    }
    csv_bytes(&horizon_header(&["n", "method"], h), rows)
}

fn errors_csv(errors: &[ReplicateErrors]) -> Result<Vec<u8>> {
    let header: Vec<String> = ["n", "replicate", "method", "h", "component", "error"]
        .map(String::from)
        .to_vec();
    let rows = errors.iter().flat_map(|e| {
        (0..e.errors.ncols()).flat_map(move |s| {
            (0..e.errors.nrows()).map(move |r| {
                vec![
                    e.n.to_string(),
                    e.replicate.to_string(),
                    e.method.clone(),
                    (s + 1).to_string(),
                    (r + 1).to_string(),
                    fmt(e.errors[(r, s)]),
                ]
            })
        })
    });
    csv_bytes(&header, rows)
}

/// Rebuilds the per-method summaries from an `errors.csv` stream. Methods
/// keep their order of first appearance.
pub fn results_from_errors_csv<R: Read>(r: R) -> Result<Vec<MethodResult>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut keys: Vec<(usize, String)> = Vec::new();
    let mut cells: BTreeMap<(usize, String), BTreeMap<usize, Vec<(usize, usize, f64)>>> =
        BTreeMap::new();
    for rec in rd.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<usize> {
            rec.get(i)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Parse(format!("bad integer in errors row {rec:?}")))
        };
        let (n, rep, h, c) = (num(0)?, num(1)?, num(3)?, num(4)?);
        let method = rec.get(2).unwrap_or_default().to_string();
        let e: f64 = rec
            .get(5)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad error value in {rec:?}")))?;
        let key = (n, method);
        if !cells.contains_key(&key) {
            keys.push(key.clone());
        }
        cells
            .entry(key)
            .or_default()
            .entry(rep)
            .or_default()
            .push((h, c, e));
    }
    let mut out = Vec::new();
    for key in keys {
        let reps = &cells[&key];
        let mut mats = Vec::with_capacity(reps.len());
        for entries in reps.values() {
            let h = entries.iter().map(|e| e.0).max().unwrap_or(0);
            let d = entries.iter().map(|e| e.1).max().unwrap_or(0);
            let mut m = DMatrix::zeros(d, h);
            for &(s, c, v) in entries {
                m[(c - 1, s - 1)] = v;
            }
            mats.push(m);
        }
        out.push(MethodResult {
            n: key.0,
            method: key.1,
            summary: ErrorSummary::from_errors(&mats)?,
            orders: BTreeMap::new(),
        });
    }
    Ok(out)
}

impl ExperimentReport {
    /// Label of the first VAR method, used as the relative-MSE base.
    pub fn var_base(&self) -> Option<String> {
        self.config
            .methods
            .iter()
            .find(|m| m.family == crate::estimate::Family::Var)
            .map(|m| m.label())
    }

    pub fn mse(&self, n: usize, method: &str) -> Option<Vec<f64>> {
        self.results
            .iter()
            .find(|r| r.n == n && r.method == method)
            .map(|r| r.summary.mse())
    }

    /// Writes `mse_table.csv`, `relative_mse.csv` (with a VAR method),
    /// `mse_by_component.csv`, `orders.csv`, `errors.csv` (if enabled) and
    /// `summary.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let h = self.config.horizons;
        write_atomic(
            &dir.join("mse_table.csv"),
            &mse_table_csv(&self.results, h)?,
        )?;
        if let Some(base) = self.var_base() {
            write_atomic(
                &dir.join("relative_mse.csv"),
                &relative_mse_table_csv(&self.results, &base, h)?,
            )?;
        }
        let comp_rows = self.results.iter().flat_map(|r| {
            let m = &r.summary.mse_by_component;
            (0..m.ncols()).flat_map(move |s| {
                (0..m.nrows()).map(move |c| {
                    vec![
                        r.n.to_string(),
                        r.method.clone(),
                        (s + 1).to_string(),
                        (c + 1).to_string(),
                        fmt(m[(c, s)]),
                    ]
                })
            })
        });
        let header: Vec<String> = ["n", "method", "h", "component", "mse"]
            .map(String::from)
            .to_vec();
        write_atomic(
            &dir.join("mse_by_component.csv"),
            &csv_bytes(&header, comp_rows)?,
        )?;
        let order_rows = self.results.iter().flat_map(|r| {
            r.orders.iter().map(move |(p, c)| {
                vec![
                    r.n.to_string(),
                    r.method.clone(),
                    p.to_string(),
                    c.to_string(),
                ]
            })
        });
        let header: Vec<String> = ["n", "method", "p", "count"].map(String::from).to_vec();
        write_atomic(&dir.join("orders.csv"), &csv_bytes(&header, order_rows)?)?;
        if self.config.write_errors {
            write_atomic(&dir.join("errors.csv"), &errors_csv(&self.errors)?)?;
        }
        let summary = serde_json::json!({
            "id": self.config.id,
            "d": self.d,
            "seed": self.config.seed,
            "replicates": self.config.replicates,
            "horizons": h,
            "sample_sizes": self.config.sample_sizes,
            "failures": self.failures,
            "results": self.results.iter().map(|r| serde_json::json!({
                "n": r.n,
                "method": r.method,
                "replicates": r.summary.replicates,
                "mse": r.summary.mse(),
            })).collect::<Vec<_>>(),
            "config": self.config,
        });
        let mut text = serde_json::to_string_pretty(&summary)?;
        text.push('\n');
        write_atomic(&dir.join("summary.json"), text.as_bytes())
    }
}
