use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::companion::{is_stationary, CompanionForm};
use super::innovation::InnovationSpec;
use super::spec::{conditional_mean, GnlpSpec, LnarSpec, NarSpec, ProcessSpec};
use crate::error::{Error, Result};
use crate::netdyn::{AdjacencySeries, NetworkModel};
use crate::rng::{seeded, stream, Purpose, SimRng};

pub const DEFAULT_BURN_IN: usize = 500;

#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    pub burn_in: usize,
    /// Simulate even when the stationarity check fails.
    pub allow_explosive: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            burn_in: DEFAULT_BURN_IN,
            allow_explosive: false,
        }
    }
}

impl SimOptions {
    pub fn burn_in(burn_in: usize) -> Self {
        Self {
            burn_in,
            ..Self::default()
        }
    }
}

/// Runs the model recursion over every column of `eps`, starting from zero
/// history. `ads[k]` is the snapshot at column `k`.
pub fn run_recursion(
    spec: &ProcessSpec,
    ads: &[DMatrix<f64>],
    eps: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let d = spec.d();
    if eps.nrows() != d {
        return Err(Error::Dimension(format!(
            "innovations have {} rows, model d = {d}",
            eps.nrows()
        )));
    }
    if let Some(m) = ads.first() {
        if m.nrows() != d {
            return Err(Error::Dimension(format!(
                "network has {} vertices, model d = {d}",
                m.nrows()
            )));
        }
    }
    let len = eps.ncols();
    let mut x = DMatrix::zeros(d, len);
    let mut acc = DVector::zeros(d);
    for t in 0..len {
        match spec {
            ProcessSpec::Gnlp(g) => gnlp_sum(g, ads, eps, t, &mut acc)?,
            _ => conditional_mean(spec, &x, t, ads, &mut acc)?,
        }
        acc += eps.column(t);
        if acc.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t });
        }
        x.set_column(t, &acc);
    }
    Ok(x)
}

fn gnlp_sum(
    spec: &GnlpSpec,
    ads: &[DMatrix<f64>],
    eps: &DMatrix<f64>,
    t: usize,
    out: &mut DVector<f64>,
) -> Result<()> {
    out.fill(0.0);
    for term in &spec.terms {
        let Some(src) = t.checked_sub(term.lag) else {
            continue;
        };
        let needed = t - 1;
        if needed >= ads.len() {
            return Err(Error::NetworkTooShort {
                needed: needed + 1,
                have: ads.len(),
            });
        }
        let f = spec.coef(term, |s| &ads[t - s])?;
        out.gemv(1.0, &f, &eps.column(src), 1.0);
    }
    Ok(())
}

/// Simulates `n` points after discarding `opts.burn_in`. `ads` must cover
/// positions `0..burn_in + n - 1`; the output column `k` sits at position
/// `burn_in + k` of `ads`.
pub fn simulate<R: Rng + ?Sized>(
    spec: &ProcessSpec,
    ads: &AdjacencySeries,
    innov: &InnovationSpec,
    n: usize,
    opts: &SimOptions,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if innov.d() != spec.d() {
        return Err(Error::Dimension(format!(
            "innovations d = {}, model d = {}",
            innov.d(),
            spec.d()
        )));
    }
    let total = opts.burn_in + n;
    let needed = total.saturating_sub(1);
    if spec.order() > 0 && ads.len() < needed {
        return Err(Error::NetworkTooShort {
            needed,
            have: ads.len(),
        });
    }
    if !opts.allow_explosive && !is_stationary(spec)? {
        let rho = spec.as_nar().map_or(Ok(f64::NAN), |s| {
            super::check_stationarity_nar(&s).map(|r| r.rho)
        })?;
        return Err(Error::NotStationary { rho });
    }
    let eps = innov.draw_matrix(rng, total);
    let x = run_recursion(spec, ads.mats(), &eps)?;
    Ok(x.columns(opts.burn_in, n).into_owned())
}

pub fn simulate_nar(
    spec: &NarSpec,
    ads: &AdjacencySeries,
    innov: &InnovationSpec,
    n: usize,
    burn_in: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    let spec = ProcessSpec::Nar(spec.clone());
    simulate(
        &spec,
        ads,
        innov,
        n,
        &SimOptions::burn_in(burn_in),
        &mut seeded(seed, Purpose::Innovations),
    )
}

pub fn simulate_lnar(
    spec: &LnarSpec,
    ads: &AdjacencySeries,
    innov: &InnovationSpec,
    n: usize,
    burn_in: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    let spec = ProcessSpec::Lnar(spec.clone());
    simulate(
        &spec,
        ads,
        innov,
        n,
        &SimOptions::burn_in(burn_in),
        &mut seeded(seed, Purpose::Innovations),
    )
}

/// `X_t = eps_t + sum_{j<=J} f_j(Ad_{t-1}, ..., Ad_{t-j}) eps_{t-j}`. The first
/// `J` points are used as warm-up so every output point has its full sum.
pub fn simulate_gnlp_truncated(
    spec: &GnlpSpec,
    ads: &AdjacencySeries,
    innov: &InnovationSpec,
    n: usize,
    j_max: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    if j_max < spec.order() {
        return Err(Error::InvalidArgument(format!(
            "truncation {j_max} below moving-average order {}",
            spec.order()
        )));
    }
    let spec = ProcessSpec::Gnlp(spec.clone());
    simulate(
        &spec,
        ads,
        innov,
        n,
        &SimOptions::burn_in(j_max),
        &mut seeded(seed, Purpose::Innovations),
    )
}

/// `B_{t,0..J}` with `B_{t,j} = (e_1 ⊗ I)^T prod_{s=1..j} (Ã ⊙ G̃_{t-s+1}) (e_1 ⊗ I)`,
/// where `G̃_u` is built from `Ad_{u-1}, ..., Ad_{u-p}`. Positions before the
/// start of `ads` count as the empty network.
pub fn ma_infinity_coeffs(
    spec: &ProcessSpec,
    ads: &[DMatrix<f64>],
    t: usize,
    j_max: usize,
) -> Result<Vec<DMatrix<f64>>> {
    let form = CompanionForm::from_nar(&spec.as_nar().ok_or_else(|| {
        Error::InvalidArgument("MA coefficients need an autoregressive model".into())
    })?);
    let (d, p) = (form.d, form.p);
    let mut prod = DMatrix::identity(d * p, d * p);
    let mut out = Vec::with_capacity(j_max + 1);
    out.push(DMatrix::identity(d, d));
    for s in 1..=j_max {
        let u = t as i64 - s as i64 + 1;
        let m = form.transition(|j| {
            let k = u - j as i64;
            if k >= 0 {
                ads.get(k as usize)
            } else {
                None
            }
        })?;
        prod *= m;
        out.push(prod.view((0, 0), (d, d)).into_owned());
    }
    Ok(out)
}

/// A process driven by a network model: everything needed to draw paths.
#[derive(Debug, Clone)]
pub struct ProcessScenario {
    pub spec: ProcessSpec,
    pub network: NetworkModel,
    pub innov: InnovationSpec,
}

/// One simulated path. `ads.at(k)` is the snapshot at the time of column `k`.
#[derive(Debug, Clone)]
pub struct SimPath {
    pub x: DMatrix<f64>,
    pub ads: AdjacencySeries,
}

impl ProcessScenario {
    pub fn new(spec: ProcessSpec, network: NetworkModel, innov: InnovationSpec) -> Result<Self> {
        if spec.d() != network.d() || spec.d() != innov.d() {
            return Err(Error::Dimension(format!(
                "process d = {}, network d = {}, innovations d = {}",
                spec.d(),
                network.d(),
                innov.d()
            )));
        }
        Ok(Self {
            spec,
            network,
            innov,
        })
    }

    pub fn d(&self) -> usize {
        self.spec.d()
    }

    /// Path of length `n` for replicate `replicate` under `seed`, with the
    /// network and the innovations on separate streams.
    pub fn simulate_path(
        &self,
        n: usize,
        opts: &SimOptions,
        seed: u64,
        replicate: u64,
    ) -> Result<SimPath> {
        let mut net_rng = stream(seed, replicate, Purpose::Network);
        let mut eps_rng = stream(seed, replicate, Purpose::Innovations);
        self.simulate_path_with(n, opts, &mut net_rng, &mut eps_rng)
    }

    pub fn simulate_path_with(
        &self,
        n: usize,
        opts: &SimOptions,
        net_rng: &mut SimRng,
        eps_rng: &mut SimRng,
    ) -> Result<SimPath> {
        let total = opts.burn_in + n;
        let ads = self
            .network
            .simulate(total, 1 - opts.burn_in as i64, net_rng);
        let x = simulate(&self.spec, &ads, &self.innov, n, opts, eps_rng)?;
        Ok(SimPath {
            x,
            ads: ads.slice(opts.burn_in, total),
        })
    }
}
