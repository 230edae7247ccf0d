//! Ready-made scenarios from the simulation studies.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::model::{
    GnlpSpec, InnovationSpec, LnarSpec, NarSpec, ProcessScenario, ProcessSpec, SigmaSpec,
};
use crate::netdyn::{
    generate_density_matched_markov, FlipNetwork, MarkovEdgeNetwork, NeighborhoodFn, NetworkModel,
};

#[rustfmt::skip]
const EX1_STAY: [f64; 16] = [
    0.95, 0.70, 0.99, 0.00,
    0.00, 0.95, 0.70, 0.00,
    0.99, 0.50, 0.95, 0.95,
    0.30, 0.00, 0.00, 0.95,
];

#[rustfmt::skip]
const EX1_ENTER: [f64; 16] = [
    0.05, 0.10, 0.01, 0.00,
    0.00, 0.05, 0.30, 0.00,
    0.01, 0.50, 0.05, 0.05,
    0.30, 0.00, 0.00, 0.05,
];

/// Four-vertex network with independent Markov edges.
pub fn example1_network() -> MarkovEdgeNetwork {
    MarkovEdgeNetwork::new(
        DMatrix::from_row_slice(4, 4, &EX1_STAY),
        DMatrix::from_row_slice(4, 4, &EX1_ENTER),
    )
    .expect("valid probabilities")
}

/// Circulant coefficient pattern: 0.25 on the diagonal, 0.7 on `(r, r+1)`.
pub fn example1_alpha() -> DMatrix<f64> {
    DMatrix::from_fn(4, 4, |r, c| {
        if r == c {
            0.25
        } else if c == (r + 1) % 4 {
            0.7
        } else {
            0.0
        }
    })
}

/// Neighborhood function of Example 1: coefficient `(i, j)` is switched by
/// the edge `j -> i`.
pub fn example1_g() -> NeighborhoodFn {
    NeighborhoodFn::Transpose
}

/// `X_t = (alpha ⊙ Ad_{t-1}^T) X_{t-1} + eps_t`.
pub fn example1_spec() -> NarSpec {
    NarSpec::with_common_g(vec![example1_alpha()], example1_g()).expect("valid")
}

pub fn example1_innov() -> InnovationSpec {
    InnovationSpec::new(
        DVector::from_vec(vec![-1.0, 4.0, -9.0, 16.0]),
        SigmaSpec::identity(4),
    )
    .expect("valid")
}

pub fn example1() -> ProcessScenario {
    ProcessScenario::new(
        ProcessSpec::Nar(example1_spec()),
        NetworkModel::Markov(example1_network()),
        example1_innov(),
    )
    .expect("consistent dimensions")
}

/// LNAR(1) with `alpha_r = 0.9 r/d`, `beta_r = 0.9 (d-r)/d` and the
/// row-normalized transpose.
pub fn example2_spec(d: usize) -> LnarSpec {
    let df = d as f64;
    let alpha = DMatrix::from_fn(1, d, |_, r| 0.9 * (r + 1) as f64 / df);
    let beta = DMatrix::from_fn(1, d, |_, r| 0.9 * (df - (r + 1) as f64) / df);
    LnarSpec::with_common_g(alpha, beta, NeighborhoodFn::RowNormalizedTranspose).expect("valid")
}

/// `N(mu, 5 Sigma)` with `mu_r = r (-1)^r` and `Sigma` tridiagonal, off-diagonal
/// `0.25 (-1)^(j+1)`.
pub fn example2_innov(d: usize) -> InnovationSpec {
    let mu = DVector::from_fn(d, |r, _| {
        let r1 = (r + 1) as f64;
        if (r + 1) % 2 == 0 {
            r1
        } else {
            -r1
        }
    });
    let off = (1..d)
        .map(|j| if j % 2 == 1 { 0.25 } else { -0.25 })
        .collect();
    let sigma = SigmaSpec::Banded {
        bands: vec![vec![1.0; d], off],
    };
    InnovationSpec::new(mu, sigma)
        .and_then(|s| s.with_sigma_scaled(5.0))
        .expect("diagonally dominant band is positive definite")
}

/// Density-matched Markov substitute network: density `5/d`, persistence 0.9,
/// no self-loops.
pub fn example2_network(d: usize) -> Result<MarkovEdgeNetwork> {
    Ok(generate_density_matched_markov(d, 5.0 / d as f64, 0.9)?.without_self_loops())
}

pub fn example2(d: usize) -> Result<ProcessScenario> {
    ProcessScenario::new(
        ProcessSpec::Lnar(example2_spec(d)),
        NetworkModel::Markov(example2_network(d)?),
        example2_innov(d),
    )
}

/// Flip network NMA(1): `X_t = Ad_{t-1}^T eps_{t-1} + eps_t`.
pub fn flip(persist: f64, mu: [f64; 3]) -> Result<ProcessScenario> {
    ProcessScenario::new(
        ProcessSpec::Gnlp(GnlpSpec::flip_nma1()),
        NetworkModel::Flip(FlipNetwork::new(persist)?),
        InnovationSpec::new(DVector::from_row_slice(&mu), SigmaSpec::identity(3))?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example2_innovations() {
        let s = example2_innov(4);
        assert_eq!(s.mu().as_slice(), &[-1.0, 2.0, -3.0, 4.0]);
        let m = s.sigma();
        assert_eq!(
            (m[(0, 0)], m[(0, 1)], m[(1, 2)], m[(2, 3)], m[(0, 2)]),
            (5.0, 1.25, -1.25, 1.25, 0.0)
        );
    }

    #[test]
    fn example2_network_density() {
        let n = example2_network(10).unwrap();
        assert!((n.stay[(0, 1)] - 0.95).abs() < 1e-12 && (n.enter[(0, 1)] - 0.05).abs() < 1e-12);
        assert_eq!(n.stay[(3, 3)], 0.0);
    }
}
