use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::serde_rows;
use crate::netdyn::NeighborhoodFn;

/// Model family being estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Nar,
    Lnar,
    Var,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Nar => "nar",
            Family::Lnar => "lnar",
            Family::Var => "var",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nar" => Ok(Family::Nar),
            "lnar" => Ok(Family::Lnar),
            "var" => Ok(Family::Var),
            other => Err(Error::Parse(format!("unknown model family '{other}'"))),
        }
    }
}

/// Regressor layout of a componentwise regression.
///
/// Slots are numbered from 0. NAR and VAR have `d p` slots, slot
/// `i + (j-1) d` holding lag `j`, vertex `i`. LNAR has `2 p` slots ordered
/// `(alpha_1, beta_1, ..., alpha_p, beta_p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub family: Family,
    pub p: usize,
    /// One function per lag; empty for VAR.
    #[serde(rename = "G", default)]
    pub g: Vec<NeighborhoodFn>,
    /// VAR only: `d x dp` matrix, nonzero where a coefficient is free.
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_rows")]
    pub mask: Option<DMatrix<f64>>,
}

mod opt_rows {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        m: &Option<DMatrix<f64>>,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        match m {
            Some(m) => serde_rows::serialize(m, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Option<DMatrix<f64>>, D::Error> {
        let rows: Option<Vec<Vec<f64>>> = Option::deserialize(d)?;
        rows.map(|r| crate::linalg::rows_to_matrix(&r).map_err(serde::de::Error::custom))
            .transpose()
    }
}

/// Per-lag quantities shared by every component at one time point.
#[derive(Debug, Clone)]
pub(crate) enum LagTerm {
    /// NAR: `G_j(Ad_{t-j})`.
    Full(DMatrix<f64>),
    /// LNAR: `offdiag(G_j(Ad_{t-j})) X_{t-j}` and the row absolute sums of
    /// `offdiag(G_j(Ad_{t-j}))`.
    Summed { z: DVector<f64>, mass: DVector<f64> },
    /// VAR: nothing beyond the lagged values.
    Plain,
}

fn expand_g(g: &[NeighborhoodFn], p: usize) -> Result<Vec<NeighborhoodFn>> {
    match g.len() {
        0 => Err(Error::InvalidArgument(
            "at least one neighborhood function is required".into(),
        )),
        1 => Ok(vec![g[0].clone(); p]),
        n if n >= p => Ok(g[..p].to_vec()),
        n => Err(Error::Dimension(format!(
            "{n} neighborhood functions for order {p}"
        ))),
    }
}

impl Design {
    /// `g` holds one function per lag, or a single function used at every lag.
    pub fn nar(g: &[NeighborhoodFn], p: usize) -> Result<Self> {
        Self::network(Family::Nar, g, p)
    }

    pub fn lnar(g: &[NeighborhoodFn], p: usize) -> Result<Self> {
        Self::network(Family::Lnar, g, p)
    }

    fn network(family: Family, g: &[NeighborhoodFn], p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidArgument("order must be at least 1".into()));
        }
        let g = expand_g(g, p)?;
        for gj in &g {
            gj.validate()?;
        }
        Ok(Self {
            family,
            p,
            g,
            mask: None,
        })
    }

    /// `mask` is `d x dp`; `None` leaves every coefficient free.
    pub fn var(p: usize, mask: Option<DMatrix<f64>>) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidArgument("order must be at least 1".into()));
        }
        if let Some(m) = &mask {
            if m.ncols() != m.nrows() * p {
                return Err(Error::Dimension(format!(
                    "mask is {}x{}, expected d x {}d",
                    m.nrows(),
                    m.ncols(),
                    p
                )));
            }
        }
        Ok(Self {
            family: Family::Var,
            p,
            g: Vec::new(),
            mask,
        })
    }

    /// The same design at another order. Neighborhood functions are reused
    /// lag by lag (the last one repeats); a VAR mask is rebuilt from its
    /// first lag block.
    pub fn with_order(&self, p: usize) -> Result<Self> {
        match self.family {
            Family::Var => {
                let mask = self.mask.as_ref().map(|m| {
                    let d = m.nrows();
                    let first = m.columns(0, d).into_owned();
                    let mut out = DMatrix::zeros(d, d * p);
                    for j in 0..p {
                        out.columns_mut(j * d, d).copy_from(&first);
                    }
                    out
                });
                Self::var(p, mask)
            }
            f => {
                let g: Vec<_> = (0..p)
                    .map(|j| self.g[j.min(self.g.len() - 1)].clone())
                    .collect();
                Self::network(f, &g, p)
            }
        }
    }

    pub fn slots(&self, d: usize) -> usize {
        match self.family {
            Family::Lnar => 2 * self.p,
            _ => d * self.p,
        }
    }

    pub(crate) fn needs_network(&self) -> bool {
        self.family != Family::Var
    }

    /// Lag-`j` term (1-based) from the snapshot and the lagged observation.
    pub(crate) fn lag_term(
        &self,
        j: usize,
        ad: Option<&DMatrix<f64>>,
        x: &DVector<f64>,
    ) -> Result<LagTerm> {
        if self.family == Family::Var {
            return Ok(LagTerm::Plain);
        }
        let ad = ad.ok_or_else(|| {
            Error::InvalidArgument(format!("missing network snapshot for lag {j}"))
        })?;
        let mut gm = self.g[j - 1].apply(ad)?;
        Ok(match self.family {
            Family::Nar => LagTerm::Full(gm),
            _ => {
                gm.fill_diagonal(0.0);
                let mass = DVector::from_iterator(
                    gm.nrows(),
                    gm.row_iter().map(|r| r.iter().map(|v| v.abs()).sum()),
                );
                LagTerm::Summed { z: &gm * x, mass }
            }
        })
    }

    /// Value of `slot` for component `r`. `terms[j-1]` and `xs[j-1]` belong
    /// to lag `j`.
    pub(crate) fn slot_value(
        &self,
        r: usize,
        slot: usize,
        terms: &[LagTerm],
        xs: &[&DVector<f64>],
    ) -> f64 {
        match self.family {
            Family::Lnar => {
                let j = slot / 2;
                if slot.is_multiple_of(2) {
                    xs[j][r]
                } else {
                    match &terms[j] {
                        LagTerm::Summed { z, .. } => z[r],
                        _ => unreachable!("LNAR terms are summed"),
                    }
                }
            }
            _ => {
                let d = xs[0].len();
                let (j, i) = (slot / d, slot % d);
                match &terms[j] {
                    LagTerm::Full(g) => g[(r, i)] * xs[j][i],
                    _ => xs[j][i],
                }
            }
        }
    }

    /// Network mass of `slot` for component `r` at one time point; positive
    /// mass marks a slot as active. VAR slots follow the mask.
    pub(crate) fn slot_mass(&self, r: usize, slot: usize, terms: &[LagTerm], d: usize) -> f64 {
        match self.family {
            Family::Lnar => {
                if slot.is_multiple_of(2) {
                    1.0
                } else {
                    match &terms[slot / 2] {
                        LagTerm::Summed { mass, .. } => mass[r],
                        _ => unreachable!("LNAR terms are summed"),
                    }
                }
            }
            Family::Nar => match &terms[slot / d] {
                LagTerm::Full(g) => g[(r, slot % d)].abs(),
                _ => unreachable!("NAR terms are full"),
            },
            Family::Var => self.mask.as_ref().map_or(1.0, |m| m[(r, slot)].abs()),
        }
    }
}
