//! Model specifications, companion form, stationarity checks and simulation.

mod companion;
mod innovation;
mod io;
mod simulate;
mod spec;

pub use companion::{
    build_companion, check_stationarity_lnar, check_stationarity_nar, is_stationary,
    max_transition_rho, CompanionForm, LnarStationarity, LnarStatus, NarStationarity,
};
pub use innovation::{InnovationSpec, SigmaSpec};
pub use io::{read_series_csv, write_series_csv};
pub use simulate::{
    ma_infinity_coeffs, run_recursion, simulate, simulate_gnlp_truncated, simulate_lnar,
    simulate_nar, ProcessScenario, SimOptions, SimPath, DEFAULT_BURN_IN,
};
pub use spec::{GnlpSpec, LnarSpec, MaFactor, MaTerm, ModelDocument, NarSpec, ProcessSpec};
