//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "spectral radius of {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenFailure);
    }
    let schur = m
        .clone()
        .try_schur(1e-14, 10_000)
        .ok_or(Error::EigenFailure)?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

/// `max_i sum_j |m_ij|`
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `max_ij |m_ij|`
pub fn max_norm(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .fold(0.0, |a, v| a.max(*v))
}

pub fn abs(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.map(f64::abs)
}

/// Block companion matrix with `blocks` in the first block row and identity
/// blocks on the sub-diagonal.
pub fn block_companion(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let p = blocks.len();
    let d = blocks.first().map_or(0, |b| b.nrows());
    let mut out = DMatrix::zeros(d * p, d * p);
    for (j, b) in blocks.iter().enumerate() {
        out.view_mut((0, j * d), (d, d)).copy_from(b);
    }
    for j in 1..p {
        for i in 0..d {
            out[(j * d + i, (j - 1) * d + i)] = 1.0;
        }
    }
    out
}

/// Symmetric factor `L` with `L L^T = sigma`, or an error when `sigma` is not
/// symmetric positive definite.
pub fn cholesky_factor(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if sigma.nrows() != sigma.ncols() {
        return Err(Error::Dimension("covariance must be square".into()));
    }
    let asym = (sigma - sigma.transpose()).abs().max();
    let scale = sigma.abs().max().max(1.0);
    if asym > 1e-10 * scale {
        return Err(Error::Domain("covariance matrix is not symmetric".into()));
    }
    sigma
        .clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::Domain("covariance matrix is not positive definite".into()))
}

/// Sum a sequence of matrices with a fixed binary tree, so the result does
/// not depend on how the inputs were produced.
pub fn tree_sum(mut items: Vec<DMatrix<f64>>) -> Option<DMatrix<f64>> {
    if items.is_empty() {
        return None;
    }
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut it = items.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(a + b),
                None => next.push(a),
            }
        }
        items = next;
    }
    items.pop()
}

pub fn column_mean(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.ncols().max(1) as f64;
    x.column_sum() / n
}

pub fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != nc) {
        return Err(Error::Dimension("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// serde adapter storing a `DMatrix` as a list of rows.
pub mod serde_rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        super::matrix_to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        super::rows_to_matrix(&rows).map_err(serde::de::Error::custom)
    }
}

/// serde adapter for a list of matrices.
pub mod serde_rows_vec {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &[DMatrix<f64>], s: S) -> Result<S::Ok, S::Error> {
        m.iter()
            .map(super::matrix_to_rows)
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DMatrix<f64>>, D::Error> {
        let all = Vec::<Vec<Vec<f64>>>::deserialize(d)?;
        all.iter()
            .map(|rows| super::rows_to_matrix(rows).map_err(serde::de::Error::custom))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn companion_layout() {
        let a1 = DMatrix::from_element(1, 1, 0.3);
        let a2 = DMatrix::from_element(1, 1, -0.2);
        let c = block_companion(&[a1, a2]);
        assert_eq!(c, DMatrix::from_row_slice(2, 2, &[0.3, -0.2, 1.0, 0.0]));
    }

    #[test]
    fn spectral_radius_of_rotation_is_one() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!((spectral_radius(&m).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tree_sum_matches_sequential() {
        let items: Vec<_> = (0..7)
            .map(|k| DMatrix::from_element(2, 2, k as f64))
            .collect();
        assert_eq!(tree_sum(items).unwrap(), DMatrix::from_element(2, 2, 21.0));
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(cholesky_factor(&m).is_err());
    }
}
