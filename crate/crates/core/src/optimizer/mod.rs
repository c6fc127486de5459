//! Multiplicative update rules and the alternating fit loop.

mod diagnostics;
mod fit;
mod rules;

pub use diagnostics::{row_peakedness, u_fixed_point_ratios, v_gradient, v_stationarity_residual};
pub use fit::{
    fit, fit_from, fit_with, sweep, FitEvent, FitResult, FitTrace, IterationRecord, StopReason,
};
pub use rules::{update_c, update_p, update_u, update_v, update_w, update_x, GuardPolicy, Rule};
