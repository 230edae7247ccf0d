//! Dynamic networks: series containers, generators and neighborhood functions.

mod generators;
mod neighborhood;
mod series;

pub use generators::{
    generate_density_matched_markov, step_flip_network, step_markov_network, FlipNetwork,
    FlipState, InitialState, MarkovEdgeNetwork, NetworkConfig, NetworkModel,
};
pub use neighborhood::{
    apply_neighborhood_fn, build_multiattribute_network, k_stage_neighborhood, sign_poly,
    InfNormBound, NeighborhoodFn,
};
pub use series::AdjacencySeries;
