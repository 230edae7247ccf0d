use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inputs of the nonasymptotic LNAR error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub c_lambda: f64,
    pub c_a: f64,
    pub c_delta_y: f64,
    /// `rho(Gamma_Y(0)^{-1})`.
    pub rho_gamma_inv: f64,
    /// `||mu_Y||_1`.
    pub mu_y_norm: f64,
    /// `||eps_{0;r}||_{E,q}`.
    pub eps_norm: f64,
    pub mu_r: f64,
    pub c_q: f64,
    pub c_q_prime: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BoundOutcome {
    Feasible {
        w_bound: f64,
        mu_bound: f64,
        prob_lower: f64,
    },
    /// The denominator of the coefficient bound is not positive.
    Infeasible { denominator: f64 },
}

/// `C_{delta Y}` from the moment norm of the innovations and the
/// stationarity constants.
pub fn c_delta_y(eps_2q_norm: f64, c_a: f64, c_lambda: f64, c_g: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&c_lambda) {
        return Err(Error::Domain(format!(
            "C_lambda = {c_lambda} must lie in [0, 1)"
        )));
    }
    let one = 1.0 - c_lambda;
    Ok(eps_2q_norm * c_a / one
        * (c_lambda / one + c_g * (1.0 + c_a * (2.0 - c_lambda) / (one * one))))
}

/// Evaluates the bounds on `||w_hat - w||_1` and `|mu_hat - mu|` at level
/// `y`, and the probability `C_q(n, y)^4` with which they hold. The base of
/// the fourth power is clamped to `[0, 1]`; `|mu_r|` enters the bound.
pub fn eval_theorem2_bound(
    y: f64,
    q: f64,
    p: usize,
    k: &BoundConstants,
    n: usize,
) -> Result<BoundOutcome> {
    if !(y >= 0.0) || !y.is_finite() {
        return Err(Error::Domain(format!(
            "y = {y} must be finite and non-negative"
        )));
    }
    if !(q > 1.0) {
        return Err(Error::Domain(format!("q = {q} must exceed 1")));
    }
    if n <= p {
        return Err(Error::InvalidArgument(format!(
            "n = {n} must exceed p = {p}"
        )));
    }
    if !(k.c_lambda < 1.0) {
        return Err(Error::Domain("C_lambda must be below 1".into()));
    }
    let two_p = 2.0 * p as f64;
    let cd = k.c_delta_y;
    let denominator = k.rho_gamma_inv
        - y * two_p * cd * (2.0 * k.c_a / (1.0 - k.c_lambda) + 2.0 * k.mu_y_norm + y * cd);
    if !(denominator > 0.0) {
        return Ok(BoundOutcome::Infeasible { denominator });
    }
    let w_bound =
        y * two_p.sqrt() * cd * (k.eps_norm + cd * y + k.mu_r.abs() + k.mu_y_norm) / denominator;
    let mu_bound = (k.mu_y_norm + y * cd) * w_bound + y * cd;
    let m = (n - p) as f64;
    let base = if y == 0.0 {
        0.0
    } else {
        1.0 - k.c_q * m.powf(1.0 - q) * y.powf(-q)
            - (k.c_q_prime + 2.0) * (-k.c_q * m * y * y).exp()
    };
    let prob_lower = base.clamp(0.0, 1.0).powi(4);
    Ok(BoundOutcome::Feasible {
        w_bound,
        mu_bound,
        prob_lower,
    })
}
