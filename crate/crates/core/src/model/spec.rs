use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::innovation::InnovationSpec;
use crate::error::{Error, Result};
use crate::linalg::{serde_rows, serde_rows_vec};
use crate::netdyn::NeighborhoodFn;

/// `X_t = sum_j (A_j ⊙ G_j(Ad_{t-j})) X_{t-j} + eps_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NarDoc", into = "NarDoc")]
pub struct NarSpec {
    pub p: usize,
    pub a: Vec<DMatrix<f64>>,
    pub g: Vec<NeighborhoodFn>,
}

#[derive(Serialize, Deserialize)]
struct NarDoc {
    p: usize,
    #[serde(rename = "A", with = "serde_rows_vec")]
    a: Vec<DMatrix<f64>>,
    #[serde(rename = "G")]
    g: Vec<NeighborhoodFn>,
}

impl TryFrom<NarDoc> for NarSpec {
    type Error = Error;
    fn try_from(doc: NarDoc) -> Result<Self> {
        let spec = NarSpec::new(doc.a, doc.g)?;
        if spec.p != doc.p {
            return Err(Error::Dimension(format!(
                "p = {} but {} coefficient matrices given",
                doc.p, spec.p
            )));
        }
        Ok(spec)
    }
}

impl From<NarSpec> for NarDoc {
    fn from(s: NarSpec) -> Self {
        NarDoc {
            p: s.p,
            a: s.a,
            g: s.g,
        }
    }
}

impl NarSpec {
    pub fn new(a: Vec<DMatrix<f64>>, g: Vec<NeighborhoodFn>) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::InvalidArgument(
                "NAR order must be at least 1".into(),
            ));
        }
        if a.len() != g.len() {
            return Err(Error::Dimension(format!(
                "{} coefficient matrices, {} neighborhood functions",
                a.len(),
                g.len()
            )));
        }
        let d = a[0].nrows();
        if a.iter().any(|m| m.shape() != (d, d)) {
            return Err(Error::Dimension(
                "coefficient matrices must be square of common size".into(),
            ));
        }
        for gj in &g {
            gj.validate()?;
        }
        Ok(Self { p: a.len(), a, g })
    }

    /// Same neighborhood function at every lag.
    pub fn with_common_g(a: Vec<DMatrix<f64>>, g: NeighborhoodFn) -> Result<Self> {
        let gs = vec![g; a.len()];
        Self::new(a, gs)
    }

    pub fn d(&self) -> usize {
        self.a[0].nrows()
    }

    /// `A_j ⊙ G_j(ad)` for lag `j` (1-based).
    pub fn coef(&self, j: usize, ad: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.a[j - 1].component_mul(&self.g[j - 1].apply(ad)?))
    }
}

/// `X_{t;r} = sum_j alpha_{j,r} X_{t-j;r} + beta_{j,r} e_r^T G_j(Ad_{t-j}) X_{t-j} + eps_{t;r}`
/// with the diagonal of every `G_j(Ad)` set to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LnarDoc", into = "LnarDoc")]
pub struct LnarSpec {
    pub p: usize,
    /// `p x d`, row `j-1` holds `alpha_{j,.}`.
    pub alpha: DMatrix<f64>,
    pub beta: DMatrix<f64>,
    pub g: Vec<NeighborhoodFn>,
}

#[derive(Serialize, Deserialize)]
struct LnarDoc {
    p: usize,
    #[serde(with = "serde_rows")]
    alpha: DMatrix<f64>,
    #[serde(with = "serde_rows")]
    beta: DMatrix<f64>,
    #[serde(rename = "G")]
    g: Vec<NeighborhoodFn>,
}

impl TryFrom<LnarDoc> for LnarSpec {
    type Error = Error;
    fn try_from(doc: LnarDoc) -> Result<Self> {
        let spec = LnarSpec::new(doc.alpha, doc.beta, doc.g)?;
        if spec.p != doc.p {
            return Err(Error::Dimension(format!(
                "p = {} but alpha has {} rows",
                doc.p, spec.p
            )));
        }
        Ok(spec)
    }
}

impl From<LnarSpec> for LnarDoc {
    fn from(s: LnarSpec) -> Self {
        LnarDoc {
            p: s.p,
            alpha: s.alpha,
            beta: s.beta,
            g: s.g,
        }
    }
}

/// `G(ad)` with zero diagonal.
pub(crate) fn offdiag_g(g: &NeighborhoodFn, ad: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut m = g.apply(ad)?;
    m.fill_diagonal(0.0);
    Ok(m)
}

impl LnarSpec {
    pub fn new(alpha: DMatrix<f64>, beta: DMatrix<f64>, g: Vec<NeighborhoodFn>) -> Result<Self> {
        let p = alpha.nrows();
        if p == 0 {
            return Err(Error::InvalidArgument(
                "LNAR order must be at least 1".into(),
            ));
        }
        if beta.shape() != alpha.shape() {
            return Err(Error::Dimension("alpha and beta must both be p x d".into()));
        }
        if g.len() != p {
            return Err(Error::Dimension(format!(
                "p = {p} but {} neighborhood functions",
                g.len()
            )));
        }
        for gj in &g {
            gj.validate()?;
        }
        Ok(Self { p, alpha, beta, g })
    }

    pub fn with_common_g(
        alpha: DMatrix<f64>,
        beta: DMatrix<f64>,
        g: NeighborhoodFn,
    ) -> Result<Self> {
        let gs = vec![g; alpha.nrows()];
        Self::new(alpha, beta, gs)
    }

    pub fn d(&self) -> usize {
        self.alpha.ncols()
    }

    /// `A_{j,alpha,beta}`: `alpha_{j,r}` on the diagonal, `beta_{j,r}` elsewhere in row `r`.
    pub fn a_matrix(&self, j: usize) -> DMatrix<f64> {
        let d = self.d();
        DMatrix::from_fn(d, d, |r, c| {
            if r == c {
                self.alpha[(j - 1, r)]
            } else {
                self.beta[(j - 1, r)]
            }
        })
    }

    /// Equivalent NAR: `A_{j,alpha,beta} ⊙ (I + G_j(Ad))` with zero-diagonal `G_j`.
    pub fn to_nar(&self) -> NarSpec {
        let a = (1..=self.p).map(|j| self.a_matrix(j)).collect();
        let g = self
            .g
            .iter()
            .map(|g| NeighborhoodFn::identity_plus(g.clone()))
            .collect();
        NarSpec { p: self.p, a, g }
    }

    /// Lag-`j` coefficient matrix for snapshot `ad`.
    pub fn coef(&self, j: usize, ad: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut m = offdiag_g(&self.g[j - 1], ad)?;
        for r in 0..self.d() {
            let mut row = m.row_mut(r);
            row *= self.beta[(j - 1, r)];
            row[r] = self.alpha[(j - 1, r)];
        }
        Ok(m)
    }
}

/// One factor `C ⊙ G(Ad_{t-s})` of a moving-average coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaFactor {
    /// Uses the snapshot `s` steps back.
    pub s: usize,
    #[serde(with = "serde_rows")]
    pub c: DMatrix<f64>,
    #[serde(rename = "G")]
    pub g: NeighborhoodFn,
}

/// `f_j(Ad_{t-1}, ..., Ad_{t-j})` as an ordered product of factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaTerm {
    pub lag: usize,
    pub factors: Vec<MaFactor>,
}

/// Finite-order network linear process `X_t = eps_t + sum_j f_j(...) eps_{t-j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnlpSpec {
    pub d: usize,
    pub terms: Vec<MaTerm>,
}

impl GnlpSpec {
    pub fn new(d: usize, terms: Vec<MaTerm>) -> Result<Self> {
        for t in &terms {
            if t.lag == 0 {
                return Err(Error::InvalidArgument(
                    "moving-average lags start at 1".into(),
                ));
            }
            for f in &t.factors {
                if f.s == 0 || f.s > t.lag {
                    return Err(Error::InvalidArgument(format!(
                        "factor of lag-{} term uses Ad_(t-{})",
                        t.lag, f.s
                    )));
                }
                if f.c.shape() != (d, d) {
                    return Err(Error::Dimension(
                        "moving-average factor has wrong size".into(),
                    ));
                }
                f.g.validate()?;
            }
        }
        Ok(Self { d, terms })
    }

    /// `X_t = Ad_{t-1}^T eps_{t-1} + eps_t` on the three-vertex flip network.
    pub fn flip_nma1() -> Self {
        let f = MaFactor {
            s: 1,
            c: DMatrix::from_element(3, 3, 1.0),
            g: NeighborhoodFn::Transpose,
        };
        Self::new(
            3,
            vec![MaTerm {
                lag: 1,
                factors: vec![f],
            }],
        )
        .expect("valid")
    }

    pub fn order(&self) -> usize {
        self.terms.iter().map(|t| t.lag).max().unwrap_or(0)
    }

    /// `f_j` given `ad(s) = Ad_{t-s}`.
    pub fn coef<'a>(
        &self,
        term: &MaTerm,
        ad: impl Fn(usize) -> &'a DMatrix<f64>,
    ) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::identity(self.d, self.d);
        for f in &term.factors {
            m *= f.c.component_mul(&f.g.apply(ad(f.s))?);
        }
        Ok(m)
    }
}

/// Any process the library can simulate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ProcessSpec {
    Nar(NarSpec),
    Lnar(LnarSpec),
    Gnlp(GnlpSpec),
}

impl ProcessSpec {
    pub fn d(&self) -> usize {
        match self {
            ProcessSpec::Nar(s) => s.d(),
            ProcessSpec::Lnar(s) => s.d(),
            ProcessSpec::Gnlp(s) => s.d,
        }
    }

    /// Autoregressive order, or moving-average order for a GNLP.
    pub fn order(&self) -> usize {
        match self {
            ProcessSpec::Nar(s) => s.p,
            ProcessSpec::Lnar(s) => s.p,
            ProcessSpec::Gnlp(s) => s.order(),
        }
    }

    /// Autoregressive coefficient matrix at lag `j` for snapshot `ad`.
    pub fn ar_coef(&self, j: usize, ad: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match self {
            ProcessSpec::Nar(s) => s.coef(j, ad),
            ProcessSpec::Lnar(s) => s.coef(j, ad),
            ProcessSpec::Gnlp(_) => Err(Error::InvalidArgument(
                "a GNLP has no autoregressive part".into(),
            )),
        }
    }

    /// Autoregressive part as a NAR (LNAR via its embedding).
    pub fn as_nar(&self) -> Option<NarSpec> {
        match self {
            ProcessSpec::Nar(s) => Some(s.clone()),
            ProcessSpec::Lnar(s) => Some(s.to_nar()),
            ProcessSpec::Gnlp(_) => None,
        }
    }
}

/// Model document: process plus innovation law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    #[serde(flatten)]
    pub spec: ProcessSpec,
    pub innov: InnovationSpec,
}

impl ModelDocument {
    pub fn new(spec: ProcessSpec, innov: InnovationSpec) -> Result<Self> {
        if spec.d() != innov.d() {
            return Err(Error::Dimension(format!(
                "process has d = {}, innovations d = {}",
                spec.d(),
                innov.d()
            )));
        }
        Ok(Self { spec, innov })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(s)?;
        Self::new(doc.spec, doc.innov)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

/// Autoregressive part of `X_t` from the columns of `x` before `t`, with
/// `X_{<0} = 0`; `ads[k]` is the snapshot at column `k`.
pub(crate) fn conditional_mean(
    spec: &ProcessSpec,
    x: &DMatrix<f64>,
    t: usize,
    ads: &[DMatrix<f64>],
    out: &mut DVector<f64>,
) -> Result<()> {
    out.fill(0.0);
    let p = spec.order();
    for j in 1..=p.min(t) {
        let xl = x.column(t - j);
        let ad = ads.get(t - j).ok_or(Error::NetworkTooShort {
            needed: t - j + 1,
            have: ads.len(),
        })?;
        match spec {
            ProcessSpec::Nar(s) => {
                let c = s.coef(j, ad)?;
                out.gemv(1.0, &c, &xl, 1.0);
            }
            ProcessSpec::Lnar(s) => {
                let g = offdiag_g(&s.g[j - 1], ad)?;
                let v = &g * xl;
                for r in 0..s.d() {
                    out[r] += s.alpha[(j - 1, r)] * xl[r] + s.beta[(j - 1, r)] * v[r];
                }
            }
            ProcessSpec::Gnlp(_) => unreachable!("handled by the moving-average recursion"),
        }
    }
    Ok(())
}
