//! Dynamic network generators. Every generator is a pure transition
//! `Ad_t = H(Ad_{t-1}, U_t)` driven by a fixed number of uniforms per step,
//! which makes seeded runs reproducible and coupling constructions explicit.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::series::AdjacencySeries;
use crate::error::{Error, Result};
use crate::linalg::serde_rows;

/// Starting state of a Markov edge network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// Each edge drawn independently from its stationary law.
    Stationary,
    Matrix(#[serde(with = "serde_rows")] DMatrix<f64>),
}

/// Independent two-state Markov chain per edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovEdgeNetwork {
    /// `P(edge at t | edge at t-1)`
    #[serde(with = "serde_rows")]
    pub stay: DMatrix<f64>,
    /// `P(edge at t | no edge at t-1)`
    #[serde(with = "serde_rows")]
    pub enter: DMatrix<f64>,
    #[serde(default = "stationary")]
    pub initial: InitialState,
}

fn stationary() -> InitialState {
    InitialState::Stationary
}

fn check_probs(name: &str, m: &DMatrix<f64>) -> Result<()> {
    if m.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Domain(format!(
            "{name} probabilities must lie in [0, 1]"
        )));
    }
    Ok(())
}

fn check_binary_state(state: &DMatrix<f64>) -> Result<()> {
    if state.iter().any(|v| *v != 0.0 && *v != 1.0) {
        return Err(Error::Domain("Markov edge state must be binary".into()));
    }
    Ok(())
}

impl MarkovEdgeNetwork {
    pub fn new(stay: DMatrix<f64>, enter: DMatrix<f64>) -> Result<Self> {
        let net = Self {
            stay,
            enter,
            initial: InitialState::Stationary,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn with_initial(mut self, initial: InitialState) -> Result<Self> {
        self.initial = initial;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.stay.nrows();
        if self.stay.shape() != (d, d) || self.enter.shape() != (d, d) {
            return Err(Error::Dimension(
                "transition matrices must be square and of equal size".into(),
            ));
        }
        check_probs("stay", &self.stay)?;
        check_probs("enter", &self.enter)?;
        if let InitialState::Matrix(m) = &self.initial {
            if m.shape() != (d, d) {
                return Err(Error::Dimension("initial state has wrong size".into()));
            }
            check_binary_state(m)?;
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.stay.nrows()
    }

    /// Per-edge stationary presence probability `enter / (enter + 1 - stay)`,
    /// with `0/0 := 0`.
    pub fn stationary_probs(&self) -> DMatrix<f64> {
        self.enter.zip_map(&self.stay, |e, s| {
            let den = e + 1.0 - s;
            if den > 0.0 {
                e / den
            } else {
                0.0
            }
        })
    }

    /// Same network with all self-loop probabilities set to zero.
    pub fn without_self_loops(mut self) -> Self {
        self.stay.fill_diagonal(0.0);
        self.enter.fill_diagonal(0.0);
        if let InitialState::Matrix(m) = &mut self.initial {
            m.fill_diagonal(0.0);
        }
        self
    }

    /// One transition. `uniforms` holds one draw in `[0, 1)` per edge in
    /// row-major order; edge `(i, j)` is present iff its draw is below the
    /// relevant transition probability.
    pub fn step(&self, state: &DMatrix<f64>, uniforms: &[f64]) -> Result<DMatrix<f64>> {
        let d = self.d();
        if state.shape() != (d, d) {
            return Err(Error::Dimension(format!(
                "state is {:?}, model is {d}x{d}",
                state.shape()
            )));
        }
        if uniforms.len() != d * d {
            return Err(Error::Dimension(format!(
                "need {} uniforms, got {}",
                d * d,
                uniforms.len()
            )));
        }
        check_binary_state(state)?;
        let mut out = DMatrix::zeros(d, d);
        self.step_into(state, uniforms, &mut out);
        Ok(out)
    }

    fn step_into(&self, state: &DMatrix<f64>, uniforms: &[f64], out: &mut DMatrix<f64>) {
        let d = self.d();
        for i in 0..d {
            for j in 0..d {
                let p = if state[(i, j)] == 1.0 {
                    self.stay[(i, j)]
                } else {
                    self.enter[(i, j)]
                };
                out[(i, j)] = f64::from(uniforms[i * d + j] < p);
            }
        }
    }

    fn initial_from_uniforms(&self, uniforms: &[f64]) -> DMatrix<f64> {
        match &self.initial {
            InitialState::Matrix(m) => m.clone(),
            InitialState::Stationary => {
                let pi = self.stationary_probs();
                let d = self.d();
                DMatrix::from_fn(d, d, |i, j| f64::from(uniforms[i * d + j] < pi[(i, j)]))
            }
        }
    }
}

/// [`MarkovEdgeNetwork::step`] as a free function.
pub fn step_markov_network(
    model: &MarkovEdgeNetwork,
    state: &DMatrix<f64>,
    uniforms: &[f64],
) -> Result<DMatrix<f64>> {
    model.step(state, uniforms)
}

/// Markov edge network in which every edge has stationary presence
/// probability `mean_density` and `stay - enter = persistence`.
///
/// Solving `pi = enter / (enter + 1 - stay)` with `stay - enter = g` gives
/// `enter = pi (1 - g)` and `stay = enter + g`.
pub fn generate_density_matched_markov(
    d: usize,
    mean_density: f64,
    persistence: f64,
) -> Result<MarkovEdgeNetwork> {
    if !(mean_density > 0.0 && mean_density < 1.0) {
        return Err(Error::Domain(format!(
            "mean density {mean_density} must lie in (0, 1)"
        )));
    }
    if persistence >= 1.0 {
        return Err(Error::Domain(
            "persistence must be below one (stationary law undefined)".into(),
        ));
    }
    let enter = mean_density * (1.0 - persistence);
    let stay = enter + persistence;
    if !(0.0..=1.0).contains(&enter) || !(0.0..=1.0).contains(&stay) {
        return Err(Error::Domain(format!(
            "density {mean_density} with persistence {persistence} gives stay={stay}, enter={enter}"
        )));
    }
    MarkovEdgeNetwork::new(
        DMatrix::from_element(d, d, stay),
        DMatrix::from_element(d, d, enter),
    )
}

/// Which of the two edges of the three-vertex flip network is present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipState {
    Edge13,
    Edge23,
}

/// Three vertices; exactly one of the edges `(1,3)`, `(2,3)` is present and
/// it persists with probability `persist`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipNetwork {
    pub persist: f64,
    #[serde(default = "edge13")]
    pub initial: FlipState,
}

fn edge13() -> FlipState {
    FlipState::Edge13
}

impl FlipNetwork {
    pub fn new(persist: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&persist) {
            return Err(Error::Domain("flip persistence must lie in [0, 1]".into()));
        }
        Ok(Self {
            persist,
            initial: FlipState::Edge13,
        })
    }

    pub fn matrix(state: FlipState) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(3, 3);
        match state {
            FlipState::Edge13 => m[(0, 2)] = 1.0,
            FlipState::Edge23 => m[(1, 2)] = 1.0,
        }
        m
    }

    pub fn state_of(m: &DMatrix<f64>) -> Result<FlipState> {
        match (m[(0, 2)], m[(1, 2)]) {
            (1.0, 0.0) => Ok(FlipState::Edge13),
            (0.0, 1.0) => Ok(FlipState::Edge23),
            _ => Err(Error::Domain("not a flip-network state".into())),
        }
    }

    /// Lag-one autocorrelation of the edge indicators, `2 persist - 1`.
    pub fn edge_autocorrelation(&self) -> f64 {
        2.0 * self.persist - 1.0
    }

    pub fn step(&self, state: FlipState, u: f64) -> FlipState {
        let threshold = match state {
            FlipState::Edge13 => 1.0 - self.persist,
            FlipState::Edge23 => self.persist,
        };
        if u > threshold {
            FlipState::Edge13
        } else {
            FlipState::Edge23
        }
    }
}

/// Flip transition with the default persistence 0.95: from `Edge13` stay iff
/// `u > 0.05`; from `Edge23` move to `Edge13` iff `u > 0.95`.
pub fn step_flip_network(state: FlipState, u: f64) -> FlipState {
    FlipNetwork {
        persist: 0.95,
        initial: FlipState::Edge13,
    }
    .step(state, u)
}

/// Network processes that can drive a simulation.
#[derive(Debug, Clone, PartialEq)]
pub enum NetworkModel {
    Markov(MarkovEdgeNetwork),
    Flip(FlipNetwork),
    Static(DMatrix<f64>),
}

impl NetworkModel {
    pub fn d(&self) -> usize {
        match self {
            NetworkModel::Markov(m) => m.d(),
            NetworkModel::Flip(_) => 3,
            NetworkModel::Static(m) => m.nrows(),
        }
    }

    /// Uniform draws consumed by one transition (and by the initial draw).
    pub fn uniforms_per_step(&self) -> usize {
        match self {
            NetworkModel::Markov(m) => m.d() * m.d(),
            NetworkModel::Flip(_) => 1,
            NetworkModel::Static(_) => 0,
        }
    }

    pub fn is_binary(&self) -> bool {
        match self {
            NetworkModel::Static(m) => m.iter().all(|v| *v == 0.0 || *v == 1.0),
            _ => true,
        }
    }

    pub fn initial_from_uniforms(&self, u: &[f64]) -> DMatrix<f64> {
        match self {
            NetworkModel::Markov(m) => m.initial_from_uniforms(u),
            NetworkModel::Flip(f) => FlipNetwork::matrix(f.initial),
            NetworkModel::Static(m) => m.clone(),
        }
    }

    /// Transition from `prev` using the given uniforms. `prev` must be a state
    /// this model produced.
    pub fn step_from_uniforms(&self, prev: &DMatrix<f64>, u: &[f64], out: &mut DMatrix<f64>) {
        match self {
            NetworkModel::Markov(m) => m.step_into(prev, u, out),
            NetworkModel::Flip(f) => {
                let s = FlipNetwork::state_of(prev).unwrap_or(FlipState::Edge13);
                out.copy_from(&FlipNetwork::matrix(f.step(s, u[0])));
            }
            NetworkModel::Static(m) => out.copy_from(m),
        }
    }

    pub fn draw_uniforms<R: Rng + ?Sized>(&self, rng: &mut R, buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend((0..self.uniforms_per_step()).map(|_| rng.random::<f64>()));
    }

    pub fn initial<R: Rng + ?Sized>(&self, rng: &mut R) -> DMatrix<f64> {
        let mut u = Vec::new();
        self.draw_uniforms(rng, &mut u);
        self.initial_from_uniforms(&u)
    }

    /// `len` consecutive snapshots starting at time `t0`; the first one is the
    /// initial state.
    pub fn simulate<R: Rng + ?Sized>(&self, len: usize, t0: i64, rng: &mut R) -> AdjacencySeries {
        let d = self.d();
        let mut mats = Vec::with_capacity(len);
        let mut u = Vec::with_capacity(self.uniforms_per_step());
        if len > 0 {
            mats.push(self.initial(rng));
        }
        while mats.len() < len {
            self.draw_uniforms(rng, &mut u);
            let mut next = DMatrix::zeros(d, d);
            self.step_from_uniforms(mats.last().expect("nonempty"), &u, &mut next);
            mats.push(next);
        }
        AdjacencySeries::new(d, t0, mats).expect("generators produce valid snapshots")
    }
}

/// Serializable description of a network process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NetworkConfig {
    Markov(MarkovEdgeNetwork),
    DensityMatched {
        d: usize,
        mean_density: f64,
        persistence: f64,
        #[serde(default)]
        self_loops: bool,
    },
    Flip(FlipNetwork),
    Static {
        #[serde(with = "serde_rows")]
        matrix: DMatrix<f64>,
    },
}

impl NetworkConfig {
    pub fn build(&self) -> Result<NetworkModel> {
        Ok(match self {
            NetworkConfig::Markov(m) => {
                m.validate()?;
                NetworkModel::Markov(m.clone())
            }
            NetworkConfig::DensityMatched {
                d,
                mean_density,
                persistence,
                self_loops,
            } => {
                let net = generate_density_matched_markov(*d, *mean_density, *persistence)?;
                NetworkModel::Markov(if *self_loops {
                    net
                } else {
                    net.without_self_loops()
                })
            }
            NetworkConfig::Flip(f) => {
                NetworkModel::Flip(FlipNetwork::new(f.persist)?.clone_with(f.initial))
            }
            NetworkConfig::Static { matrix } => {
                super::series::check_snapshot(matrix.nrows(), matrix)?;
                NetworkModel::Static(matrix.clone())
            }
        })
    }
}

impl FlipNetwork {
    fn clone_with(mut self, initial: FlipState) -> Self {
        self.initial = initial;
        self
    }
}
