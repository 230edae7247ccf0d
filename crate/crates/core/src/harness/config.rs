use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{
    fit_design, network_mask, select_order_bic_design, Design, Family, ModelFit,
};
use crate::forecast::NetworkForecastPolicy;
use crate::model::{ModelDocument, ProcessScenario, DEFAULT_BURN_IN};
use crate::netdyn::{NeighborhoodFn, NetworkConfig};
use crate::presets;

pub const DEFAULT_P_MAX: usize = 3;

/// Where the simulated data come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioConfig {
    Example1,
    Example2 {
        d: usize,
    },
    Flip {
        persist: f64,
        mu: [f64; 3],
    },
    Custom {
        network: NetworkConfig,
        model: ModelDocument,
    },
}

impl ScenarioConfig {
    pub fn build(&self) -> Result<ProcessScenario> {
        match self {
            ScenarioConfig::Example1 => Ok(presets::example1()),
            ScenarioConfig::Example2 { d } => presets::example2(*d),
            ScenarioConfig::Flip { persist, mu } => presets::flip(*persist, *mu),
            ScenarioConfig::Custom { network, model } => {
                ProcessScenario::new(model.spec.clone(), network.build()?, model.innov.clone())
            }
        }
    }
}

/// Zero pattern imposed on a VAR benchmark.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VarMask {
    #[default]
    None,
    /// Entries never touched by `G(Ad_t)` in the observed window are zero.
    Network {
        #[serde(rename = "G")]
        g: NeighborhoodFn,
    },
}

fn known() -> NetworkForecastPolicy {
    NetworkForecastPolicy::Known
}

/// One estimation + forecasting method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub family: Family,
    #[serde(rename = "G", default, skip_serializing_if = "Vec::is_empty")]
    pub g: Vec<NeighborhoodFn>,
    #[serde(default = "known")]
    pub policy: NetworkForecastPolicy,
    /// Fixed order; BIC over `1..=p_max` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default)]
    pub var_mask: VarMask,
}

impl MethodConfig {
    pub fn nar(g: NeighborhoodFn, policy: NetworkForecastPolicy) -> Self {
        Self {
            label: None,
            family: Family::Nar,
            g: vec![g],
            policy,
            order: None,
            var_mask: VarMask::None,
        }
    }

    pub fn lnar(g: NeighborhoodFn, policy: NetworkForecastPolicy) -> Self {
        Self {
            family: Family::Lnar,
            ..Self::nar(g, policy)
        }
    }

    pub fn var(mask: VarMask) -> Self {
        Self {
            label: None,
            family: Family::Var,
            g: Vec::new(),
            policy: NetworkForecastPolicy::HoldLast,
            order: None,
            var_mask: mask,
        }
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = Some(label.to_string());
        self
    }

    pub fn label(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        match self.family {
            Family::Var => match self.var_mask {
                VarMask::None => "VAR".into(),
                VarMask::Network { .. } => "VAR(masked)".into(),
            },
            f => format!("{}({})", f.name().to_uppercase(), self.policy.label()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.family {
            Family::Var => {
                if !self.g.is_empty() {
                    return Err(Error::InvalidArgument(format!(
                        "{}: VAR methods take no G",
                        self.label()
                    )));
                }
            }
            _ => {
                if self.g.is_empty() {
                    return Err(Error::InvalidArgument(format!(
                        "{}: network methods need G",
                        self.label()
                    )));
                }
                if self.var_mask != VarMask::None {
                    return Err(Error::InvalidArgument(format!(
                        "{}: var_mask applies to VAR only",
                        self.label()
                    )));
                }
                for g in &self.g {
                    g.validate()?;
                }
            }
        }
        if self.order == Some(0) {
            return Err(Error::InvalidArgument(format!(
                "{}: order must be at least 1",
                self.label()
            )));
        }
        Ok(())
    }

    /// Order-1 (or fixed-order) design; VAR masks come from `observed`.
    pub fn design(&self, observed: &[DMatrix<f64>]) -> Result<Design> {
        let p = self.order.unwrap_or(1);
        match self.family {
            Family::Nar => Design::nar(&self.g, p),
            Family::Lnar => Design::lnar(&self.g, p),
            Family::Var => {
                let mask = match &self.var_mask {
                    VarMask::None => None,
                    VarMask::Network { g } => {
                        let m = network_mask(observed, g, 1)?;
                        Some(DMatrix::from_fn(m.nrows(), m.ncols() * p, |r, c| {
                            m[(r, c % m.ncols())]
                        }))
                    }
                };
                Design::var(p, mask)
            }
        }
    }

    /// Fits on `x` with `observed[k]` at column `k`: the fixed order, or the
    /// BIC choice over `1..=p_max`.
    pub fn fit(
        &self,
        x: &DMatrix<f64>,
        observed: &[DMatrix<f64>],
        p_max: usize,
    ) -> Result<ModelFit> {
        let design = self.design(observed)?;
        let fit = match self.order {
            Some(_) => fit_design(x, observed, &design)?,
            None => select_order_bic_design(x, observed, &design, p_max)?.fit,
        };
        if !fit.is_complete() {
            let f = &fit.failures[0];
            return Err(Error::Singular {
                component: f.r,
                detail: f.message.clone(),
            });
        }
        Ok(fit)
    }
}

fn default_p_max() -> usize {
    DEFAULT_P_MAX
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

fn default_failure_rate() -> f64 {
    0.01
}

fn yes() -> bool {
    true
}

/// One Monte Carlo forecasting study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub id: String,
    pub scenario: ScenarioConfig,
    pub sample_sizes: Vec<usize>,
    pub horizons: usize,
    pub replicates: usize,
    pub seed: u64,
    pub methods: Vec<MethodConfig>,
    #[serde(default = "default_p_max")]
    pub p_max: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_failure_rate")]
    pub max_failure_rate: f64,
    /// Also write every replicate's forecast errors.
    #[serde(default = "yes")]
    pub write_errors: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.id.is_empty() {
            return bad("experiment id is empty");
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1");
        }
        if self.horizons == 0 {
            return bad("horizons must be at least 1");
        }
        if self.methods.is_empty() {
            return bad("methods list is empty");
        }
        if self.sample_sizes.is_empty() {
            return bad("sample_sizes is empty");
        }
        if self.p_max == 0 {
            return bad("p_max must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.max_failure_rate) {
            return bad("max_failure_rate must lie in [0, 1]");
        }
        let mut labels = BTreeSet::new();
        for m in &self.methods {
            m.validate()?;
            if !labels.insert(m.label()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate method label {}",
                    m.label()
                )));
            }
        }
        let p = self
            .methods
            .iter()
            .map(|m| m.order.unwrap_or(self.p_max))
            .max()
            .unwrap_or(1);
        if let Some(n) = self.sample_sizes.iter().find(|n| **n < p + 3) {
            return Err(Error::InvalidArgument(format!(
                "sample size {n} is too small for order {p}"
            )));
        }
        Ok(())
    }
}

/// Methods and settings for a rolling forecast on panel data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RollingConfig {
    pub methods: Vec<MethodConfig>,
    pub horizons: usize,
    /// Number of forecast origins, ending `horizons` periods before the
    /// last observation.
    #[serde(default = "one")]
    pub origins: usize,
    #[serde(default = "default_p_max")]
    pub p_max: usize,
}

fn one() -> usize {
    1
}

impl RollingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.horizons == 0 || self.origins == 0 || self.p_max == 0 {
            return Err(Error::InvalidArgument(
                "rolling forecast needs methods, horizons, origins and p_max >= 1".into(),
            ));
        }
        let mut labels = BTreeSet::new();
        for m in &self.methods {
            m.validate()?;
            if !labels.insert(m.label()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate method label {}",
                    m.label()
                )));
            }
        }
        Ok(())
    }
}
