use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::design::{Design, Family, LagTerm};
use crate::error::{Error, Result};
use crate::linalg::{matrix_to_rows, rows_to_matrix};
use crate::netdyn::NeighborhoodFn;

/// Active regressor slots of component `r` (both 0-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    pub r: usize,
    pub members: Vec<usize>,
}

impl IndexSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Least-squares fit of one component.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentFit {
    /// 0-based component.
    pub r: usize,
    /// 0-based active slots; `w[k]` belongs to `index_set[k]`.
    pub index_set: Vec<usize>,
    pub w: DVector<f64>,
    pub mu: f64,
    /// `RSS / (m - k - 1)` with `m` observations and `k` regressors.
    pub resid_var: f64,
    /// Sample covariance of the regressors (divisor `m`).
    pub gamma_y0: DMatrix<f64>,
    /// `resid_var * gamma_y0^{-1}`: asymptotic covariance of `sqrt(m) (w_hat - w)`.
    pub asymp_cov: DMatrix<f64>,
    pub n_obs: usize,
    pub rss: f64,
    /// Ridge added to the Gram matrix when it was numerically singular.
    pub ridge: Option<f64>,
    /// Eigenvalue ratio of the centred Gram matrix.
    pub condition: f64,
}

impl ComponentFit {
    /// Standard errors of `w`: `sqrt(diag(asymp_cov) / m)`.
    pub fn std_errors(&self) -> DVector<f64> {
        let m = self.n_obs as f64;
        DVector::from_iterator(
            self.w.len(),
            self.asymp_cov.diagonal().iter().map(|v| (v / m).sqrt()),
        )
    }
}

#[derive(Serialize, Deserialize)]
struct ComponentDoc {
    r: usize,
    index_set: Vec<usize>,
    w: Vec<f64>,
    mu: f64,
    resid_var: f64,
    asymp_cov: Vec<Vec<f64>>,
    gamma_y0: Vec<Vec<f64>>,
    n_obs: usize,
    rss: f64,
    #[serde(default)]
    ridge: Option<f64>,
    /// Absent when infinite.
    #[serde(default)]
    condition: Option<f64>,
}

impl Serialize for ComponentFit {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ComponentDoc {
            r: self.r + 1,
            index_set: self.index_set.iter().map(|i| i + 1).collect(),
            w: self.w.iter().copied().collect(),
            mu: self.mu,
            resid_var: self.resid_var,
            asymp_cov: matrix_to_rows(&self.asymp_cov),
            gamma_y0: matrix_to_rows(&self.gamma_y0),
            n_obs: self.n_obs,
            rss: self.rss,
            ridge: self.ridge,
            condition: self.condition.is_finite().then_some(self.condition),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComponentFit {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = ComponentDoc::deserialize(d)?;
        if doc.r == 0 || doc.index_set.contains(&0) || doc.index_set.len() != doc.w.len() {
            return Err(D::Error::custom(
                "component indices are 1-based and index_set must match w",
            ));
        }
        let k = doc.w.len();
        let mat = |rows: &[Vec<f64>]| -> std::result::Result<DMatrix<f64>, D::Error> {
            if k == 0 {
                return Ok(DMatrix::zeros(0, 0));
            }
            rows_to_matrix(rows).map_err(D::Error::custom)
        };
        Ok(ComponentFit {
            r: doc.r - 1,
            index_set: doc.index_set.iter().map(|i| i - 1).collect(),
            w: DVector::from_vec(doc.w),
            mu: doc.mu,
            resid_var: doc.resid_var,
            asymp_cov: mat(&doc.asymp_cov)?,
            gamma_y0: mat(&doc.gamma_y0)?,
            n_obs: doc.n_obs,
            rss: doc.rss,
            ridge: doc.ridge,
            condition: doc.condition.unwrap_or(f64::INFINITY),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentFailure {
    /// 1-based component.
    pub r: usize,
    pub message: String,
}

/// Componentwise fit of a whole model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub design: Design,
    pub d: usize,
    /// First target column of the estimation window.
    pub start: usize,
    /// Series length used.
    pub n: usize,
    pub components: Vec<ComponentFit>,
    #[serde(default)]
    pub failures: Vec<ComponentFailure>,
}

/// Solves the centred normal equations for one component.
///
/// `y` is `k x m` (one column per target time), `target` has length `m`.
/// Minimises `sum_t (target_t - w^T y_t - mu)^2`.
pub fn fit_component_ls(
    y: &DMatrix<f64>,
    target: &DVector<f64>,
    idx: &IndexSet,
) -> Result<ComponentFit> {
    let (k, m) = y.shape();
    let r = idx.r;
    if target.len() != m {
        return Err(Error::Dimension(format!(
            "{m} regressor columns but {} targets",
            target.len()
        )));
    }
    if idx.len() != k {
        return Err(Error::Dimension(format!(
            "index set has {} members, regressors have {k} rows",
            idx.len()
        )));
    }
    if m < k + 2 {
        return Err(Error::Singular {
            component: r,
            detail: format!("{m} observations cannot identify {k} coefficients plus intercept with positive residual degrees of freedom"),
        });
    }
    let mf = m as f64;
    let xbar = target.mean();
    let ybar = y.column_mean();
    let mut yc = y.clone();
    for mut col in yc.column_iter_mut() {
        col -= &ybar;
    }
    let xc = target.add_scalar(-xbar);
    let gram = &yc * yc.transpose();
    let rhs = &yc * &xc;
    let condition = if k == 0 {
        1.0
    } else {
        let ev = gram.clone().symmetric_eigenvalues();
        let (lo, hi) = ev.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| {
            (lo.min(*v), hi.max(v.abs()))
        });
        if lo > 0.0 {
            hi / lo
        } else {
            f64::INFINITY
        }
    };
    let (w, gram_inv, ridge) = if k == 0 {
        (DVector::zeros(0), DMatrix::zeros(0, 0), None)
    } else {
        solve_spd(&gram, &rhs, condition > MAX_CONDITION).ok_or_else(|| Error::Singular {
            component: r,
            detail: format!(
                "regressor Gram matrix is singular even after ridge jitter (trace {})",
                gram.trace()
            ),
        })?
    };
    let mu = xbar - w.dot(&ybar);
    let fitted = y.tr_mul(&w).add_scalar(mu);
    let rss = (target - fitted).norm_squared();
    let resid_var = rss / (m - k - 1) as f64;
    Ok(ComponentFit {
        r,
        index_set: idx.members.clone(),
        w,
        mu,
        resid_var,
        gamma_y0: gram / mf,
        asymp_cov: gram_inv * (resid_var * mf),
        n_obs: m,
        rss,
        ridge,
        condition,
    })
}

/// Gram matrices above this eigenvalue ratio get the ridge.
const MAX_CONDITION: f64 = 1e14;

/// Cholesky solve, retried once with `1e-8 trace / k` on the diagonal.
fn solve_spd(
    gram: &DMatrix<f64>,
    rhs: &DVector<f64>,
    force_ridge: bool,
) -> Option<(DVector<f64>, DMatrix<f64>, Option<f64>)> {
    if !force_ridge {
        if let Some(ch) = gram.clone().cholesky() {
            return Some((ch.solve(rhs), ch.inverse(), None));
        }
    }
    let k = gram.nrows();
    let lambda = 1e-8 * gram.trace() / k as f64;
    if !(lambda > 0.0) {
        return None;
    }
    let ch = (gram + DMatrix::identity(k, k) * lambda).cholesky()?;
    Some((ch.solve(rhs), ch.inverse(), Some(lambda)))
}

/// Lag terms for every target column `start..n`.
pub(crate) fn lag_terms(
    x: &DMatrix<f64>,
    ads: &[DMatrix<f64>],
    design: &Design,
    start: usize,
) -> Result<Vec<Vec<LagTerm>>> {
    let (d, n) = x.shape();
    let p = design.p;
    if start < p {
        return Err(Error::InvalidArgument(format!(
            "window starts at {start}, order is {p}"
        )));
    }
    if start >= n {
        return Err(Error::InvalidArgument(format!(
            "window starts at {start} but the series has {n} points"
        )));
    }
    if design.needs_network() {
        if ads.len() + 1 < n {
            return Err(Error::NetworkTooShort {
                needed: n - 1,
                have: ads.len(),
            });
        }
        if let Some(m) = ads.first() {
            if m.nrows() != d {
                return Err(Error::Dimension(format!(
                    "network has {} vertices, series has {d} components",
                    m.nrows()
                )));
            }
        }
    }
    if let Some(mask) = &design.mask {
        if mask.nrows() != d {
            return Err(Error::Dimension(format!(
                "mask has {} rows, series has {d} components",
                mask.nrows()
            )));
        }
    }
    (start..n)
        .map(|t| {
            (1..=p)
                .map(|j| design.lag_term(j, ads.get(t - j), &x.column(t - j).into_owned()))
                .collect()
        })
        .collect()
}

fn index_set_from_terms(design: &Design, terms: &[Vec<LagTerm>], r: usize, d: usize) -> IndexSet {
    let members = (0..design.slots(d))
        .filter(|&s| {
            terms
                .iter()
                .map(|tt| design.slot_mass(r, s, tt, d))
                .sum::<f64>()
                > 0.0
        })
        .collect();
    IndexSet { r, members }
}

fn columns(x: &DMatrix<f64>) -> Vec<DVector<f64>> {
    x.column_iter().map(|c| c.into_owned()).collect()
}

fn regressors_from_terms(
    cols: &[DVector<f64>],
    design: &Design,
    terms: &[Vec<LagTerm>],
    start: usize,
    idx: &IndexSet,
) -> DMatrix<f64> {
    let p = design.p;
    let mut y = DMatrix::zeros(idx.len(), terms.len());
    for (c, tt) in terms.iter().enumerate() {
        let t = start + c;
        let xs: Vec<&DVector<f64>> = (1..=p).map(|j| &cols[t - j]).collect();
        for (k, &s) in idx.members.iter().enumerate() {
            y[(k, c)] = design.slot_value(idx.r, s, tt, &xs);
        }
    }
    y
}

/// Index set of component `r` for a NAR design over targets `t = p..n`:
/// slot `i + (j-1) d` is active when `sum_t |G_j(Ad_{t-j})_{r,i}| > 0`.
pub fn build_index_set(
    ads: &[DMatrix<f64>],
    g: &[NeighborhoodFn],
    p: usize,
    r: usize,
    n: usize,
) -> Result<IndexSet> {
    let design = Design::nar(g, p)?;
    let d = ads
        .first()
        .map(|m| m.nrows())
        .ok_or_else(|| Error::InvalidArgument("empty network series".into()))?;
    let x = DMatrix::zeros(d, n);
    let terms = lag_terms(&x, ads, &design, p)?;
    Ok(index_set_from_terms(&design, &terms, r, d))
}

/// Index set for any design over targets `t = p..n`.
pub fn design_index_set(
    x: &DMatrix<f64>,
    ads: &[DMatrix<f64>],
    design: &Design,
    r: usize,
) -> Result<IndexSet> {
    let terms = lag_terms(x, ads, design, design.p)?;
    Ok(index_set_from_terms(design, &terms, r, x.nrows()))
}

/// `k x (n - p)` regressor matrix of component `idx.r`; column `c` is
/// `Y_{t-1}` for target column `t = p + c`.
pub fn build_regressors(
    x: &DMatrix<f64>,
    ads: &[DMatrix<f64>],
    design: &Design,
    idx: &IndexSet,
) -> Result<DMatrix<f64>> {
    let terms = lag_terms(x, ads, design, design.p)?;
    Ok(regressors_from_terms(
        &columns(x),
        design,
        &terms,
        design.p,
        idx,
    ))
}

/// Fits every component on targets `start..n`. `ads[k]` is the snapshot at
/// column `k` and must cover columns `0..n-1`.
pub fn fit_window(
    x: &DMatrix<f64>,
    ads: &[DMatrix<f64>],
    design: &Design,
    start: usize,
) -> Result<ModelFit> {
    let d = x.nrows();
    let terms = lag_terms(x, ads, design, start)?;
    let cols = columns(x);
    let results: Vec<Result<ComponentFit>> = (0..d)
        .into_par_iter()
        .map(|r| {
            let idx = index_set_from_terms(design, &terms, r, d);
            let y = regressors_from_terms(&cols, design, &terms, start, &idx);
            let target = x.row(r).columns(start, x.ncols() - start).transpose();
            fit_component_ls(&y, &target, &idx)
        })
        .collect();
    let mut components = Vec::with_capacity(d);
    let mut failures = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(c) => components.push(c),
            Err(e) => failures.push(ComponentFailure {
                r: r + 1,
                message: e.to_string(),
            }),
        }
    }
    Ok(ModelFit {
        design: design.clone(),
        d,
        start,
        n: x.ncols(),
        components,
        failures,
    })
}

pub fn fit_design(x: &DMatrix<f64>, ads: &[DMatrix<f64>], design: &Design) -> Result<ModelFit> {
    fit_window(x, ads, design, design.p)
}

pub fn fit_nar(
    x: &DMatrix<f64>,
    ads: &[DMatrix<f64>],
    g: &[NeighborhoodFn],
    p: usize,
) -> Result<ModelFit> {
    fit_design(x, ads, &Design::nar(g, p)?)
}

pub fn fit_lnar(
    x: &DMatrix<f64>,
    ads: &[DMatrix<f64>],
    g: &[NeighborhoodFn],
    p: usize,
) -> Result<ModelFit> {
    fit_design(x, ads, &Design::lnar(g, p)?)
}

/// Per-equation OLS with intercept; `mask` (`d x dp`) zeroes coefficients.
pub fn fit_var(x: &DMatrix<f64>, p: usize, mask: Option<&DMatrix<f64>>) -> Result<ModelFit> {
    fit_design(x, &[], &Design::var(p, mask.cloned())?)
}

/// VAR sparsity pattern induced by a network: coefficient `(r, c)` is free at
/// every lag iff `sum_t |G(Ad_t)_{r,c}| > 0`. Returns `d x dp`.
pub fn network_mask(ads: &[DMatrix<f64>], g: &NeighborhoodFn, p: usize) -> Result<DMatrix<f64>> {
    let d = ads
        .first()
        .map(|m| m.nrows())
        .ok_or_else(|| Error::InvalidArgument("empty network series".into()))?;
    let mut mass = DMatrix::zeros(d, d);
    for ad in ads {
        mass += g.apply(ad)?.abs();
    }
    let block = mass.map(|v| if v > 0.0 { 1.0 } else { 0.0 });
    let mut out = DMatrix::zeros(d, d * p);
    for j in 0..p {
        out.columns_mut(j * d, d).copy_from(&block);
    }
    Ok(out)
}

impl ModelFit {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty() && self.components.len() == self.d
    }

    fn require_complete(&self) -> Result<()> {
        if self.is_complete() {
            Ok(())
        } else {
            let f = &self.failures[0];
            Err(Error::Singular {
                component: f.r - 1,
                detail: f.message.clone(),
            })
        }
    }

    pub fn p(&self) -> usize {
        self.design.p
    }

    pub fn family(&self) -> Family {
        self.design.family
    }

    /// Intercepts.
    pub fn mu(&self) -> Result<DVector<f64>> {
        self.require_complete()?;
        Ok(DVector::from_iterator(
            self.d,
            self.components.iter().map(|c| c.mu),
        ))
    }

    /// Coefficient of every slot per component (`d x slots`), structural
    /// zeros included.
    pub fn slot_coefficients(&self) -> Result<DMatrix<f64>> {
        self.require_complete()?;
        let mut out = DMatrix::zeros(self.d, self.design.slots(self.d));
        for c in &self.components {
            for (k, &s) in c.index_set.iter().enumerate() {
                out[(c.r, s)] = c.w[k];
            }
        }
        Ok(out)
    }

    /// NAR/VAR coefficient matrices `A_1..A_p`.
    pub fn a_matrices(&self) -> Result<Vec<DMatrix<f64>>> {
        if self.family() == Family::Lnar {
            return Err(Error::InvalidArgument(
                "LNAR fits have alpha/beta coefficients".into(),
            ));
        }
        let w = self.slot_coefficients()?;
        Ok((0..self.p())
            .map(|j| w.columns(j * self.d, self.d).into_owned())
            .collect())
    }

    /// LNAR `(alpha, beta)`, each `p x d`.
    pub fn alpha_beta(&self) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        if self.family() != Family::Lnar {
            return Err(Error::InvalidArgument(
                "only LNAR fits have alpha/beta coefficients".into(),
            ));
        }
        let w = self.slot_coefficients()?;
        let p = self.p();
        let alpha = DMatrix::from_fn(p, self.d, |j, r| w[(r, 2 * j)]);
        let beta = DMatrix::from_fn(p, self.d, |j, r| w[(r, 2 * j + 1)]);
        Ok((alpha, beta))
    }

    /// `mu_hat + sum_j w_hat^T Y`: one-step prediction from lagged values
    /// `xs[j-1] = X_{t-j}` and snapshots `ads[j-1] = Ad_{t-j}`.
    pub fn predict(
        &self,
        xs: &[&DVector<f64>],
        ads: &[Option<&DMatrix<f64>>],
    ) -> Result<DVector<f64>> {
        self.require_complete()?;
        let p = self.p();
        if xs.len() < p || (self.design.needs_network() && ads.len() < p) {
            return Err(Error::InvalidArgument(format!("prediction needs {p} lags")));
        }
        let terms: Vec<LagTerm> = (1..=p)
            .map(|j| {
                self.design
                    .lag_term(j, ads.get(j - 1).copied().flatten(), xs[j - 1])
            })
            .collect::<Result<_>>()?;
        Ok(DVector::from_iterator(
            self.d,
            self.components.iter().map(|c| {
                c.mu + c
                    .index_set
                    .iter()
                    .zip(c.w.iter())
                    .map(|(&s, w)| w * self.design.slot_value(c.r, s, &terms, xs))
                    .sum::<f64>()
            }),
        ))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
