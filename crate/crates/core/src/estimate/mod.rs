//! Componentwise least-squares estimation of NAR, LNAR and VAR models, BIC
//! order selection, and the LNAR error-bound formula.

mod bic;
mod bound;
mod design;
mod fit;

pub use bic::{bic, select_order_bic, select_order_bic_design, BicRow, BicSelection};
pub use bound::{c_delta_y, eval_theorem2_bound, BoundConstants, BoundOutcome};
pub use design::{Design, Family};
pub use fit::{
    build_index_set, build_regressors, design_index_set, fit_component_ls, fit_design, fit_lnar,
    fit_nar, fit_var, fit_window, network_mask, ComponentFailure, ComponentFit, IndexSet, ModelFit,
};
