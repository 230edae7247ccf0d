//! Neighborhood functions `G`: maps from a network snapshot to the matrix that
//! modulates the autoregressive coefficients.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::inf_norm;

/// Closed set of neighborhood functions.
///
/// All variants map a matrix with entries in `[-1, 1]` to a matrix with
/// entries in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NeighborhoodFn {
    /// `G(Ad) = Ad`.
    Identity,
    /// `G(Ad) = Ad^T`: influence flows along the edge direction.
    Transpose,
    /// `G(Ad) = inner(Ad)^T`: switches between the two edge-direction concepts.
    TransposeOf { inner: Box<NeighborhoodFn> },
    /// `sign(Ad + Ad^2 + ... + Ad^k)` on binary input.
    SignPoly { k: usize },
    /// Indicator of k-stage neighbors (shortest walk of length exactly `k`).
    KStage { k: usize },
    /// `Ad^T` with every row divided by its absolute sum (`1/0 := 0`), so row
    /// `i` spreads weight one equally across the in-going edges of `i`.
    RowNormalizedTranspose,
    /// `G(Ad) = W ⊙ Ad` for a fixed weight matrix with entries in `[-1, 1]`.
    Mask {
        #[serde(with = "crate::linalg::serde_rows")]
        w: DMatrix<f64>,
    },
    /// `inner(Ad)` with its diagonal set to one.
    IdentityPlus { inner: Box<NeighborhoodFn> },
}

/// Whether `||G(Ad)||_inf <= 1` holds for every admissible snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfNormBound {
    Certified,
    Violated,
    Unverifiable,
}

fn require_binary(ad: &DMatrix<f64>, what: &str) -> Result<()> {
    if ad.iter().all(|v| *v == 0.0 || *v == 1.0) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{what} requires a binary adjacency matrix"
        )))
    }
}

/// Boolean matrix product on 0/1 data stored row-major.
fn bool_mul(a: &[u8], b: &[u8], d: usize) -> Vec<u8> {
    let mut out = vec![0u8; d * d];
    for i in 0..d {
        for k in 0..d {
            if a[i * d + k] == 0 {
                continue;
            }
            let (brow, orow) = (&b[k * d..(k + 1) * d], &mut out[i * d..(i + 1) * d]);
            for (o, v) in orow.iter_mut().zip(brow) {
                *o |= *v;
            }
        }
    }
    out
}

fn to_bool(m: &DMatrix<f64>, transpose: bool) -> Vec<u8> {
    let d = m.nrows();
    let mut out = vec![0u8; d * d];
    for i in 0..d {
        for j in 0..d {
            let v = if transpose { m[(j, i)] } else { m[(i, j)] };
            out[i * d + j] = u8::from(v != 0.0);
        }
    }
    out
}

fn from_bool(b: &[u8], d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |i, j| f64::from(b[i * d + j]))
}

/// `N_k(Ad) = sign(|sign((Ad^T)^k) - sign(sum_{i<k} (Ad^T)^i)|^+)`.
///
/// Entry `(j, v)` is one iff the shortest directed walk from `v` to `j` has
/// length exactly `k`.
pub fn k_stage_neighborhood(ad: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    if k < 1 {
        return Err(Error::InvalidArgument(
            "k-stage neighborhood needs k >= 1".into(),
        ));
    }
    square(ad)?;
    require_binary(ad, "k-stage neighborhood")?;
    let d = ad.nrows();
    let t = to_bool(ad, true);
    let mut power = t.clone();
    let mut seen = vec![0u8; d * d];
    for _ in 1..k {
        for (s, p) in seen.iter_mut().zip(&power) {
            *s |= *p;
        }
        power = bool_mul(&power, &t, d);
    }
    let out: Vec<u8> = power.iter().zip(&seen).map(|(p, s)| p & (1 - s)).collect();
    Ok(from_bool(&out, d))
}

/// `sign(Ad + Ad^2 + ... + Ad^k)` for binary `Ad`.
pub fn sign_poly(ad: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    if k < 1 {
        return Err(Error::InvalidArgument(
            "sign polynomial needs degree >= 1".into(),
        ));
    }
    square(ad)?;
    require_binary(ad, "sign polynomial")?;
    let d = ad.nrows();
    let a = to_bool(ad, false);
    let mut power = a.clone();
    let mut acc = a.clone();
    for _ in 1..k {
        power = bool_mul(&power, &a, d);
        for (s, p) in acc.iter_mut().zip(&power) {
            *s |= *p;
        }
    }
    Ok(from_bool(&acc, d))
}

fn row_normalized_transpose(ad: &DMatrix<f64>) -> DMatrix<f64> {
    let mut g = ad.transpose();
    for mut row in g.row_iter_mut() {
        let s: f64 = row.iter().map(|v| v.abs()).sum();
        if s > 0.0 {
            row /= s;
        } else {
            row.fill(0.0);
        }
    }
    g
}

fn square(ad: &DMatrix<f64>) -> Result<()> {
    if ad.nrows() == ad.ncols() {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "adjacency matrix is {}x{}",
            ad.nrows(),
            ad.ncols()
        )))
    }
}

impl NeighborhoodFn {
    pub fn transpose_of(inner: NeighborhoodFn) -> Self {
        NeighborhoodFn::TransposeOf {
            inner: Box::new(inner),
        }
    }

    pub fn identity_plus(inner: NeighborhoodFn) -> Self {
        NeighborhoodFn::IdentityPlus {
            inner: Box::new(inner),
        }
    }

    /// Checks the descriptor itself (mask entries, degrees).
    pub fn validate(&self) -> Result<()> {
        match self {
            NeighborhoodFn::SignPoly { k } | NeighborhoodFn::KStage { k } if *k < 1 => Err(
                Error::InvalidArgument("neighborhood degree must be >= 1".into()),
            ),
            NeighborhoodFn::Mask { w } => {
                square(w)?;
                if w.iter().any(|v| !(-1.0..=1.0).contains(v)) {
                    Err(Error::Domain("mask weights must lie in [-1, 1]".into()))
                } else {
                    Ok(())
                }
            }
            NeighborhoodFn::TransposeOf { inner } | NeighborhoodFn::IdentityPlus { inner } => {
                inner.validate()
            }
            _ => Ok(()),
        }
    }

    pub fn apply(&self, ad: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        square(ad)?;
        match self {
            NeighborhoodFn::Identity => Ok(ad.clone()),
            NeighborhoodFn::Transpose => Ok(ad.transpose()),
            NeighborhoodFn::TransposeOf { inner } => Ok(inner.apply(ad)?.transpose()),
            NeighborhoodFn::SignPoly { k } => sign_poly(ad, *k),
            NeighborhoodFn::KStage { k } => k_stage_neighborhood(ad, *k),
            NeighborhoodFn::RowNormalizedTranspose => Ok(row_normalized_transpose(ad)),
            NeighborhoodFn::Mask { w } => {
                if w.shape() != ad.shape() {
                    return Err(Error::Dimension("mask and adjacency shapes differ".into()));
                }
                Ok(w.component_mul(ad))
            }
            NeighborhoodFn::IdentityPlus { inner } => {
                let mut g = inner.apply(ad)?;
                g.fill_diagonal(1.0);
                Ok(g)
            }
        }
    }

    /// Static certificate for `||G(Ad)||_inf <= 1` over all snapshots in
    /// `[-1, 1]^{d x d}`.
    pub fn inf_norm_bound(&self) -> InfNormBound {
        match self {
            NeighborhoodFn::RowNormalizedTranspose => InfNormBound::Certified,
            NeighborhoodFn::Mask { w } => {
                if inf_norm(w) <= 1.0 + 1e-12 {
                    InfNormBound::Certified
                } else {
                    InfNormBound::Violated
                }
            }
            _ => InfNormBound::Unverifiable,
        }
    }
}

/// Applies `g`; with `lnar_safe` set, descriptors whose infinity-norm bound is
/// violated are rejected.
pub fn apply_neighborhood_fn(
    g: &NeighborhoodFn,
    ad: &DMatrix<f64>,
    lnar_safe: bool,
) -> Result<DMatrix<f64>> {
    g.validate()?;
    if lnar_safe && g.inf_norm_bound() == InfNormBound::Violated {
        return Err(Error::Domain(
            "mask weight matrix has infinity norm above one".into(),
        ));
    }
    g.apply(ad)
}

/// `[[Ad, B], [C, Ad]]`: one network for two attributes per vertex.
pub fn build_multiattribute_network(
    ad: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let d = ad.nrows();
    for (name, m) in [("Ad", ad), ("B", b), ("C", c)] {
        super::series::check_snapshot(d, m).map_err(|e| match e {
            Error::Dimension(msg) => Error::Dimension(format!("{name}: {msg}")),
            other => other,
        })?;
    }
    let mut out = DMatrix::zeros(2 * d, 2 * d);
    out.view_mut((0, 0), (d, d)).copy_from(ad);
    out.view_mut((0, d), (d, d)).copy_from(b);
    out.view_mut((d, 0), (d, d)).copy_from(c);
    out.view_mut((d, d), (d, d)).copy_from(ad);
    Ok(out)
}
