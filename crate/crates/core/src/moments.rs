//! Sample and Monte Carlo autocovariances, and the closed-form decomposition
//! for the flip-network NMA(1).

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{column_mean, tree_sum};
use crate::model::{ProcessScenario, SimOptions};

/// `Gamma(h) = Cov(X_{t+h}, X_t)` for `h = 0..=max_lag`.
#[derive(Debug, Clone, PartialEq)]
pub struct AcfEstimate {
    pub lags: Vec<usize>,
    pub gamma: Vec<DMatrix<f64>>,
    /// Monte Carlo standard errors, when the estimate is an average.
    pub se: Option<Vec<DMatrix<f64>>>,
}

impl AcfEstimate {
    pub fn at(&self, h: usize) -> &DMatrix<f64> {
        &self.gamma[h]
    }

    /// `Gamma(h)` for any integer lag, via `Gamma(-h) = Gamma(h)^T`.
    pub fn at_signed(&self, h: i64) -> DMatrix<f64> {
        let g = &self.gamma[h.unsigned_abs() as usize];
        if h < 0 {
            g.transpose()
        } else {
            g.clone()
        }
    }

    /// CSV rows `h,i,j,gamma,se` with 1-based `i, j`; `se` is empty when absent.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["h", "i", "j", "gamma", "se"])?;
        for (k, (h, g)) in self.lags.iter().zip(&self.gamma).enumerate() {
            for i in 0..g.nrows() {
                for j in 0..g.ncols() {
                    let se = self
                        .se
                        .as_ref()
                        .map_or(String::new(), |s| s[k][(i, j)].to_string());
                    wr.write_record([
                        h.to_string(),
                        (i + 1).to_string(),
                        (j + 1).to_string(),
                        g[(i, j)].to_string(),
                        se,
                    ])?;
                }
            }
        }
        wr.flush()?;
        Ok(())
    }
}

/// `Gamma_hat(h) = (1/n) sum_t (X_{t+h} - mean)(X_t - mean)^T`, divisor `n`.
pub fn sample_acf(x: &DMatrix<f64>, max_lag: usize) -> Result<AcfEstimate> {
    let n = x.ncols();
    if max_lag >= n {
        return Err(Error::InvalidArgument(format!(
            "max lag {max_lag} needs more than {n} observations"
        )));
    }
    let m = column_mean(x);
    let mut c = x.clone();
    for mut col in c.column_iter_mut() {
        col -= &m;
    }
    let gamma = (0..=max_lag)
        .map(|h| c.columns(h, n - h) * c.columns(0, n - h).transpose() / n as f64)
        .collect();
    Ok(AcfEstimate {
        lags: (0..=max_lag).collect(),
        gamma,
        se: None,
    })
}

/// Exact expectation of [`sample_acf`] on `n` points of a stationary series
/// with autocovariances `gamma[k] = Gamma(k)`, `k = 0..n`. Differs from
/// `Gamma(h)` by the `(n - h)/n` taper and the cost of centring at the
/// sample mean, roughly `-sum_k Gamma(k) / n`.
pub fn expected_sample_acf(
    gamma: &[DMatrix<f64>],
    n: usize,
    max_lag: usize,
) -> Result<AcfEstimate> {
    if n == 0 || gamma.len() < n || max_lag >= n {
        return Err(Error::InvalidArgument(format!(
            "need autocovariances at lags 0..{n} and max lag below {n}, got {} lags and max lag {max_lag}",
            gamma.len()
        )));
    }
    let d = gamma[0].nrows();
    let at = |m: i64| {
        if m >= 0 {
            gamma[m as usize].clone()
        } else {
            gamma[(-m) as usize].transpose()
        }
    };
    let ni = n as i64;
    // prefix[i] = sum of Gamma(m) for m in -(n-1)..i-(n-1)
    let mut prefix = Vec::with_capacity(2 * n);
    prefix.push(DMatrix::zeros(d, d));
    for m in -(ni - 1)..ni {
        let next = prefix.last().expect("non-empty") + at(m);
        prefix.push(next);
    }
    let nf = n as f64;
    // c[s] = Cov(X_s, mean) = (1/n) sum_u Gamma(s - u)
    let c: Vec<DMatrix<f64>> = (0..n).map(|s| (&prefix[s + n] - &prefix[s]) / nf).collect();
    let v = tree_sum(c.clone()).expect("n > 0") / nf;
    let mut out = Vec::with_capacity(max_lag + 1);
    for h in 0..=max_lag {
        let m = n - h;
        let sum_c = tree_sum(c[h..].to_vec()).expect("m > 0");
        let sum_d = tree_sum(c[..m].iter().map(|x| x.transpose()).collect()).expect("m > 0");
        out.push((&gamma[h] * m as f64 - sum_c - sum_d + &v * m as f64) / nf);
    }
    Ok(AcfEstimate {
        lags: (0..=max_lag).collect(),
        gamma: out,
        se: None,
    })
}

/// Average of sample autocovariances over `reps` independent paths of length
/// `n`, with across-replicate standard errors. Replicates run in parallel;
/// the reduction order is fixed so the result does not depend on scheduling.
pub fn mc_autocov(
    scenario: &ProcessScenario,
    max_lag: usize,
    reps: usize,
    n: usize,
    seed: u64,
    opts: &SimOptions,
) -> Result<AcfEstimate> {
    if reps < 2 {
        return Err(Error::InvalidArgument(
            "Monte Carlo autocovariance needs at least two replicates".into(),
        ));
    }
    let per_rep: Vec<AcfEstimate> = (0..reps as u64)
        .into_par_iter()
        .map(|i| {
            let path = scenario.simulate_path(n, opts, seed, i)?;
            sample_acf(&path.x, max_lag)
        })
        .collect::<Result<_>>()?;
    let r = reps as f64;
    let mut gamma = Vec::with_capacity(max_lag + 1);
    let mut se = Vec::with_capacity(max_lag + 1);
    for h in 0..=max_lag {
        let mean =
            tree_sum(per_rep.iter().map(|a| a.gamma[h].clone()).collect()).expect("reps > 0") / r;
        let ss = tree_sum(
            per_rep
                .iter()
                .map(|a| (&a.gamma[h] - &mean).map(|v| v * v))
                .collect(),
        )
        .expect("reps > 0");
        se.push(ss.map(|v| (v / (r - 1.0) / r).sqrt()));
        gamma.push(mean);
    }
    Ok(AcfEstimate {
        lags: (0..=max_lag).collect(),
        gamma,
        se: Some(se),
    })
}

/// The two parts of the flip-network autocovariance.
#[derive(Debug, Clone)]
pub struct FlipAcf {
    /// `sum_s E(B_{h,s+h} Sigma B_{0,s}^T)`
    pub part1: AcfEstimate,
    /// `sum_j sum_s Cov(B_{h,j} mu, B_{0,s} mu)`
    pub part2: AcfEstimate,
}

impl FlipAcf {
    pub fn total(&self) -> AcfEstimate {
        let gamma = self
            .part1
            .gamma
            .iter()
            .zip(&self.part2.gamma)
            .map(|(a, b)| a + b)
            .collect();
        AcfEstimate {
            lags: self.part1.lags.clone(),
            gamma,
            se: None,
        }
    }
}

/// Exact autocovariance of `X_t = Ad_{t-1}^T eps_{t-1} + eps_t` on the flip
/// network.
///
/// With `e_t` the indicator of edge `(1,3)`, `Ad_t^T = e_3 m_t^T` where
/// `m_t = (e_t, 1 - e_t, 0)`, so `B_{t,0} = I`, `B_{t,1} = e_3 m_{t-1}^T` and
/// all later coefficients vanish. The edge chain is symmetric with stationary
/// probability `pi = 1/2` and `Cov(e_{t+h}, e_t) = pi (1 - pi) lambda^h`,
/// `lambda = 2 persist - 1`.
///
/// part1: `Sigma + e_3 e_3^T (pi Sigma_11 + (1 - pi) Sigma_22)` at lag 0
/// (`e_t (1 - e_t) = 0` kills the cross term), `e_3 E(m)^T Sigma` at lag 1,
/// zero afterwards.
///
/// part2: only `j = s = 1` is random, and `m_t^T mu = mu_2 + e_t (mu_1 - mu_2)`,
/// so the (3,3) entry is `(mu_1 - mu_2)^2 pi (1 - pi) lambda^h` for every
/// `h >= 0` and all other entries are zero.
pub fn closed_form_flip_acf(
    persist: f64,
    mu: &[f64],
    sigma: &DMatrix<f64>,
    max_lag: usize,
) -> Result<FlipAcf> {
    if mu.len() != 3 || sigma.shape() != (3, 3) {
        return Err(Error::InvalidArgument(
            "the flip decomposition is defined for the three-vertex network only".into(),
        ));
    }
    if !(0.0..=1.0).contains(&persist) {
        return Err(Error::Domain("flip persistence must lie in [0, 1]".into()));
    }
    let pi = 0.5;
    let lambda = 2.0 * persist - 1.0;
    let edge_var = pi * (1.0 - pi);
    let mut part1 = Vec::with_capacity(max_lag + 1);
    let mut part2 = Vec::with_capacity(max_lag + 1);
    for h in 0..=max_lag {
        let p1 = match h {
            0 => {
                let mut g = sigma.clone();
                g[(2, 2)] += pi * sigma[(0, 0)] + (1.0 - pi) * sigma[(1, 1)];
                g
            }
            1 => {
                let mut em = DMatrix::zeros(3, 3);
                em[(2, 0)] = pi;
                em[(2, 1)] = 1.0 - pi;
                em * sigma
            }
            _ => DMatrix::zeros(3, 3),
        };
        let mut p2 = DMatrix::zeros(3, 3);
        p2[(2, 2)] = (mu[0] - mu[1]).powi(2) * edge_var * lambda.powi(h as i32);
        part1.push(p1);
        part2.push(p2);
    }
    let lags: Vec<usize> = (0..=max_lag).collect();
    Ok(FlipAcf {
        part1: AcfEstimate {
            lags: lags.clone(),
            gamma: part1,
            se: None,
        },
        part2: AcfEstimate {
            lags,
            gamma: part2,
            se: None,
        },
    })
}

/// Edge covariance `Cov(Ad_{t+h;13}, Ad_{t;13}) = (2 persist - 1)^h / 4`.
pub fn flip_edge_autocov(persist: f64, h: usize) -> f64 {
    (2.0 * persist - 1.0).powi(h as i32) / 4.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_has_zero_acf() {
        let x = DMatrix::from_element(2, 50, 3.5);
        let a = sample_acf(&x, 5).unwrap();
        assert!(a.gamma.iter().all(|g| g.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn divisor_is_n() {
        let x = DMatrix::from_row_slice(1, 4, &[1.0, -1.0, 1.0, -1.0]);
        let a = sample_acf(&x, 1).unwrap();
        assert_eq!(a.gamma[0][(0, 0)], 1.0);
        assert_eq!(a.gamma[1][(0, 0)], -0.75);
        assert!(sample_acf(&x, 4).is_err());
    }

    #[test]
    fn zero_mean_removes_part2() {
        let f = closed_form_flip_acf(0.95, &[0.0; 3], &DMatrix::identity(3, 3), 5).unwrap();
        assert!(f.part2.gamma.iter().all(|g| g.iter().all(|v| *v == 0.0)));
        assert!(f.part1.gamma[2..]
            .iter()
            .all(|g| g.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn part2_decays_with_edge_autocorrelation() {
        let f =
            closed_form_flip_acf(0.95, &[10.0, -10.0, 0.0], &DMatrix::identity(3, 3), 8).unwrap();
        for h in 2..=8 {
            let r = f.part2.gamma[h][(2, 2)] / f.part2.gamma[h - 1][(2, 2)];
            assert!((r - 0.9).abs() < 1e-12);
        }
        assert!((f.part2.gamma[0][(2, 2)] - 100.0).abs() < 1e-12);
        assert!((flip_edge_autocov(0.95, 3) - 0.729 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn expectation_of_white_noise_acf() {
        let n = 10;
        let mut gamma = vec![DMatrix::zeros(1, 1); n];
        gamma[0][(0, 0)] = 2.0;
        let e = expected_sample_acf(&gamma, n, 2).unwrap();
        // lag 0: (n-1)/n sigma^2; lag h: -(n-h) sigma^2 / n^2
        assert!((e.gamma[0][(0, 0)] - 1.8).abs() < 1e-12);
        assert!((e.gamma[1][(0, 0)] + 0.18).abs() < 1e-12);
        assert!((e.gamma[2][(0, 0)] + 0.16).abs() < 1e-12);
    }

    #[test]
    fn csv_layout() {
        let a = AcfEstimate {
            lags: vec![0],
            gamma: vec![DMatrix::from_row_slice(1, 1, &[2.0])],
            se: None,
        };
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "h,i,j,gamma,se\n0,1,1,2,\n"
        );
    }
}
