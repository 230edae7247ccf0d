use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_factor, matrix_to_rows, rows_to_matrix};

/// Covariance description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum SigmaSpec {
    /// Variances on the diagonal.
    Diagonal(Vec<f64>),
    /// Symmetric band matrix: `bands[k][i]` is entry `(i, i + k)`.
    Banded { bands: Vec<Vec<f64>> },
    /// Full matrix as a list of rows.
    Full(Vec<Vec<f64>>),
}

impl SigmaSpec {
    pub fn identity(d: usize) -> Self {
        SigmaSpec::Diagonal(vec![1.0; d])
    }

    pub fn full(m: &DMatrix<f64>) -> Self {
        SigmaSpec::Full(matrix_to_rows(m))
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        match self {
            SigmaSpec::Diagonal(v) => Ok(DMatrix::from_diagonal(&DVector::from_column_slice(v))),
            SigmaSpec::Banded { bands } => {
                let d = bands.first().map_or(0, Vec::len);
                let mut m = DMatrix::zeros(d, d);
                for (k, band) in bands.iter().enumerate() {
                    if band.len() + k != d {
                        return Err(Error::Dimension(format!(
                            "band {k} has length {}, expected {}",
                            band.len(),
                            d - k.min(d)
                        )));
                    }
                    for (i, v) in band.iter().enumerate() {
                        m[(i, i + k)] = *v;
                        m[(i + k, i)] = *v;
                    }
                }
                Ok(m)
            }
            SigmaSpec::Full(rows) => rows_to_matrix(rows),
        }
    }

    fn scaled(&self, c: f64) -> Self {
        match self {
            SigmaSpec::Diagonal(v) => SigmaSpec::Diagonal(v.iter().map(|x| x * c).collect()),
            SigmaSpec::Banded { bands } => SigmaSpec::Banded {
                bands: bands
                    .iter()
                    .map(|b| b.iter().map(|x| x * c).collect())
                    .collect(),
            },
            SigmaSpec::Full(rows) => SigmaSpec::Full(
                rows.iter()
                    .map(|r| r.iter().map(|x| x * c).collect())
                    .collect(),
            ),
        }
    }
}

#[derive(Debug, Clone)]
enum Factor {
    Diagonal(DVector<f64>),
    Lower(DMatrix<f64>),
}

#[derive(Serialize, Deserialize)]
struct InnovationDoc {
    mu: Vec<f64>,
    sigma: SigmaSpec,
}

/// Gaussian innovation law `N(mu, Sigma)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "InnovationDoc", into = "InnovationDoc")]
pub struct InnovationSpec {
    mu: DVector<f64>,
    sigma_spec: SigmaSpec,
    sigma: DMatrix<f64>,
    factor: Factor,
}

impl PartialEq for InnovationSpec {
    fn eq(&self, other: &Self) -> bool {
        self.mu == other.mu && self.sigma_spec == other.sigma_spec
    }
}

impl TryFrom<InnovationDoc> for InnovationSpec {
    type Error = Error;
    fn try_from(doc: InnovationDoc) -> Result<Self> {
        InnovationSpec::new(DVector::from_vec(doc.mu), doc.sigma)
    }
}

impl From<InnovationSpec> for InnovationDoc {
    fn from(s: InnovationSpec) -> Self {
        InnovationDoc {
            mu: s.mu.iter().copied().collect(),
            sigma: s.sigma_spec,
        }
    }
}

impl InnovationSpec {
    /// Fails unless `Sigma` is symmetric positive definite.
    pub fn new(mu: DVector<f64>, sigma_spec: SigmaSpec) -> Result<Self> {
        let sigma = sigma_spec.to_matrix()?;
        if sigma.nrows() != mu.len() {
            return Err(Error::Dimension(format!(
                "mu has length {}, sigma is {}x{}",
                mu.len(),
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        let factor = match &sigma_spec {
            SigmaSpec::Diagonal(v) => {
                if v.iter().any(|x| !(*x > 0.0)) {
                    return Err(Error::Domain(
                        "covariance matrix is not positive definite".into(),
                    ));
                }
                Factor::Diagonal(DVector::from_iterator(v.len(), v.iter().map(|x| x.sqrt())))
            }
            _ => Factor::Lower(cholesky_factor(&sigma)?),
        };
        Ok(Self {
            mu,
            sigma_spec,
            sigma,
            factor,
        })
    }

    /// `N(0, I_d)`.
    pub fn standard(d: usize) -> Self {
        Self::new(DVector::zeros(d), SigmaSpec::identity(d)).expect("identity is positive definite")
    }

    pub fn d(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn sigma_spec(&self) -> &SigmaSpec {
        &self.sigma_spec
    }

    /// Same mean, covariance multiplied by `c`.
    pub fn with_sigma_scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.mu.clone(), self.sigma_spec.scaled(c))
    }

    /// One draw: `d` standard normals in component order, then `mu + L z`.
    pub fn draw_into<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        z: &mut DVector<f64>,
        out: &mut DVector<f64>,
    ) {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        match &self.factor {
            Factor::Diagonal(s) => {
                for i in 0..out.len() {
                    out[i] = self.mu[i] + s[i] * z[i];
                }
            }
            Factor::Lower(l) => {
                out.copy_from(&self.mu);
                out.gemv(1.0, l, z, 1.0);
            }
        }
    }

    /// `len` draws as columns of a `d x len` matrix, in time order.
    pub fn draw_matrix<R: Rng + ?Sized>(&self, rng: &mut R, len: usize) -> DMatrix<f64> {
        let d = self.d();
        let mut out = DMatrix::zeros(d, len);
        let mut z = DVector::zeros(d);
        let mut e = DVector::zeros(d);
        for t in 0..len {
            self.draw_into(rng, &mut z, &mut e);
            out.set_column(t, &e);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded, Purpose};

    #[test]
    fn banded_layout() {
        let s = SigmaSpec::Banded {
            bands: vec![vec![1.0; 3], vec![0.25, -0.25]],
        };
        let m = s.to_matrix().unwrap();
        assert_eq!(
            m,
            DMatrix::from_row_slice(3, 3, &[1.0, 0.25, 0.0, 0.25, 1.0, -0.25, 0.0, -0.25, 1.0])
        );
    }

    #[test]
    fn rejects_non_pd() {
        let s = SigmaSpec::full(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]));
        assert!(InnovationSpec::new(DVector::zeros(2), s).is_err());
        assert!(
            InnovationSpec::new(DVector::zeros(2), SigmaSpec::Diagonal(vec![1.0, 0.0])).is_err()
        );
    }

    #[test]
    fn json_round_trip() {
        let spec = InnovationSpec::new(
            DVector::from_vec(vec![1.0, -1.0]),
            SigmaSpec::Diagonal(vec![1.0, 2.0]),
        )
        .unwrap();
        let s = serde_json::to_string(&spec).unwrap();
        assert_eq!(
            s,
            r#"{"mu":[1.0,-1.0],"sigma":{"kind":"diagonal","params":[1.0,2.0]}}"#
        );
        let back: InnovationSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn sample_moments() {
        let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let spec = InnovationSpec::new(DVector::from_vec(vec![3.0, -1.0]), SigmaSpec::full(&sigma))
            .unwrap();
        let x = spec.draw_matrix(&mut seeded(1, Purpose::Innovations), 200_000);
        let m = crate::linalg::column_mean(&x);
        assert!((m[0] - 3.0).abs() < 0.02 && (m[1] + 1.0).abs() < 0.02);
        let c = x.map_with_location(|i, _, v| v - m[i]);
        let cov = &c * c.transpose() / x.ncols() as f64;
        assert!((cov - sigma).abs().max() < 0.03);
    }
}
