use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::spec::{LnarSpec, NarSpec, ProcessSpec};
use crate::error::{Error, Result};
use crate::linalg::{abs, block_companion, spectral_radius};
use crate::netdyn::{InfNormBound, NeighborhoodFn};

/// Stacked order-one form of an order-`p` model on `dp` dimensions.
#[derive(Debug, Clone)]
pub struct CompanionForm {
    pub d: usize,
    pub p: usize,
    pub tilde_a: DMatrix<f64>,
    g: Vec<NeighborhoodFn>,
}

/// Companion form of a NAR, or of an LNAR through its `I + G_j` embedding.
pub fn build_companion(spec: &ProcessSpec) -> Result<CompanionForm> {
    let nar = spec.as_nar().ok_or_else(|| {
        Error::InvalidArgument("companion form needs an autoregressive model".into())
    })?;
    Ok(CompanionForm::from_nar(&nar))
}

impl CompanionForm {
    pub fn from_nar(spec: &NarSpec) -> Self {
        Self {
            d: spec.d(),
            p: spec.p,
            tilde_a: block_companion(&spec.a),
            g: spec.g.clone(),
        }
    }

    pub fn from_lnar(spec: &LnarSpec) -> Self {
        Self::from_nar(&spec.to_nar())
    }

    /// Stacked neighborhood matrix; `ad(j)` is `Ad_{t-j}` or `None` before the
    /// sample start (treated as the empty network).
    pub fn tilde_g<'a>(
        &self,
        ad: impl Fn(usize) -> Option<&'a DMatrix<f64>>,
    ) -> Result<DMatrix<f64>> {
        let (d, p) = (self.d, self.p);
        let zero = DMatrix::zeros(d, d);
        let blocks = (1..=p)
            .map(|j| self.g[j - 1].apply(ad(j).unwrap_or(&zero)))
            .collect::<Result<Vec<_>>>()?;
        Ok(block_companion(&blocks))
    }

    /// `Ã ⊙ G̃` for the given lagged snapshots.
    pub fn transition<'a>(
        &self,
        ad: impl Fn(usize) -> Option<&'a DMatrix<f64>>,
    ) -> Result<DMatrix<f64>> {
        Ok(self.tilde_a.component_mul(&self.tilde_g(ad)?))
    }

    /// Runs `𝕏_t = (Ã ⊙ G̃_t) 𝕏_{t-1} + (e_1 ⊗ I) eps_t` from `𝕏_{-1} = 0`;
    /// `ads[k]` is the snapshot at column `k` of `eps`. Returns the first block.
    pub fn simulate(&self, ads: &[DMatrix<f64>], eps: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let (d, p) = (self.d, self.p);
        let len = eps.ncols();
        let mut state = DVector::zeros(d * p);
        let mut out = DMatrix::zeros(d, len);
        for t in 0..len {
            let m = self.transition(|j| t.checked_sub(j).and_then(|k| ads.get(k)))?;
            let mut next = &m * &state;
            let mut head = next.rows_mut(0, d);
            head += eps.column(t);
            state = next;
            out.set_column(t, &state.rows(0, d));
        }
        Ok(out)
    }
}

const STATIONARITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NarStationarity {
    pub holds: bool,
    /// `rho(companion(|A_1|, ..., |A_p|))`
    pub rho: f64,
}

/// Condition `det(I - sum_j |A_j| z^j) != 0` on the closed unit disc, checked
/// as `rho < 1 - 1e-8` for the companion matrix of the `|A_j|`.
pub fn check_stationarity_nar(spec: &NarSpec) -> Result<NarStationarity> {
    let blocks: Vec<_> = spec.a.iter().map(abs).collect();
    let rho = spectral_radius(&block_companion(&blocks))?;
    Ok(NarStationarity {
        holds: rho < 1.0 - STATIONARITY_TOL,
        rho,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LnarStatus {
    Holds,
    Fails,
    /// Some `G_j` has no certified bound `||G_j||_inf <= 1`.
    Unverifiable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LnarStationarity {
    pub status: LnarStatus,
    pub holds: bool,
    /// `max_r sum_j (|alpha_{j,r}| + |beta_{j,r}|)`
    pub c_lambda: f64,
    /// Resulting bound `rho <= c_lambda^(1/p)` on the stacked transition.
    pub rho_bound: f64,
}

pub fn check_stationarity_lnar(spec: &LnarSpec) -> LnarStationarity {
    let d = spec.d();
    let c_lambda = (0..d)
        .map(|r| {
            (0..spec.p)
                .map(|j| spec.alpha[(j, r)].abs() + spec.beta[(j, r)].abs())
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    let certified = spec
        .g
        .iter()
        .all(|g| g.inf_norm_bound() == InfNormBound::Certified);
    let below = c_lambda < 1.0 - STATIONARITY_TOL;
    let status = match (certified, below) {
        (false, _) => LnarStatus::Unverifiable,
        (true, true) => LnarStatus::Holds,
        (true, false) => LnarStatus::Fails,
    };
    LnarStationarity {
        status,
        holds: status == LnarStatus::Holds,
        c_lambda,
        rho_bound: c_lambda.powf(1.0 / spec.p as f64),
    }
}

/// Largest `rho(Ã ⊙ G̃_t)` over all positions of a snapshot sequence: the
/// per-realization counterpart of the absolute-value condition.
pub fn max_transition_rho(form: &CompanionForm, ads: &[DMatrix<f64>]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for t in form.p..=ads.len() {
        let m = form.transition(|j| ads.get(t - j))?;
        worst = worst.max(spectral_radius(&m)?);
    }
    Ok(worst)
}

/// Whether a process can be simulated without an explosive override.
pub fn is_stationary(spec: &ProcessSpec) -> Result<bool> {
    Ok(match spec {
        ProcessSpec::Nar(s) => check_stationarity_nar(s)?.holds,
        ProcessSpec::Lnar(s) => {
            check_stationarity_lnar(s).holds || check_stationarity_nar(&s.to_nar())?.holds
        }
        ProcessSpec::Gnlp(_) => true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circulant() -> DMatrix<f64> {
        let mut a = DMatrix::from_diagonal_element(4, 4, 0.25);
        for r in 0..4 {
            a[(r, (r + 1) % 4)] = 0.7;
        }
        a
    }

    #[test]
    fn scalar_companion() {
        let spec = NarSpec::with_common_g(
            vec![
                DMatrix::from_element(1, 1, 0.3),
                DMatrix::from_element(1, 1, 0.2),
            ],
            NeighborhoodFn::Identity,
        )
        .unwrap();
        let c = CompanionForm::from_nar(&spec);
        assert_eq!(
            c.tilde_a,
            DMatrix::from_row_slice(2, 2, &[0.3, 0.2, 1.0, 0.0])
        );
    }

    #[test]
    fn nar_stationarity_examples() {
        let z =
            NarSpec::with_common_g(vec![DMatrix::zeros(3, 3)], NeighborhoodFn::Transpose).unwrap();
        let r = check_stationarity_nar(&z).unwrap();
        assert!(r.holds && r.rho == 0.0);
        let ex1 = NarSpec::with_common_g(vec![circulant()], NeighborhoodFn::Identity).unwrap();
        let r = check_stationarity_nar(&ex1).unwrap();
        assert!(r.holds && (r.rho - 0.95).abs() < 1e-10);
        let unit = NarSpec::with_common_g(vec![DMatrix::identity(3, 3)], NeighborhoodFn::Transpose)
            .unwrap();
        let r = check_stationarity_nar(&unit).unwrap();
        assert!(!r.holds && (r.rho - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lnar_stationarity_examples() {
        let d = 10;
        let alpha = DMatrix::from_fn(1, d, |_, r| 0.9 * (r + 1) as f64 / d as f64);
        let beta = DMatrix::from_fn(1, d, |_, r| 0.9 * (d - r - 1) as f64 / d as f64);
        let s =
            LnarSpec::with_common_g(alpha, beta, NeighborhoodFn::RowNormalizedTranspose).unwrap();
        let r = check_stationarity_lnar(&s);
        assert!(r.holds && (r.c_lambda - 0.9).abs() < 1e-12);

        let s = LnarSpec::with_common_g(
            DMatrix::zeros(1, 3),
            DMatrix::zeros(1, 3),
            NeighborhoodFn::RowNormalizedTranspose,
        )
        .unwrap();
        assert_eq!(check_stationarity_lnar(&s).c_lambda, 0.0);

        let alpha = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.2, 0.1]);
        let beta = DMatrix::from_row_slice(2, 2, &[0.2, 0.1, 0.1, 0.1]);
        let s =
            LnarSpec::with_common_g(alpha, beta, NeighborhoodFn::RowNormalizedTranspose).unwrap();
        let r = check_stationarity_lnar(&s);
        assert_eq!(r.status, LnarStatus::Fails);

        let s = LnarSpec::with_common_g(
            DMatrix::zeros(1, 3),
            DMatrix::zeros(1, 3),
            NeighborhoodFn::Transpose,
        )
        .unwrap();
        assert_eq!(check_stationarity_lnar(&s).status, LnarStatus::Unverifiable);
    }
}
