//! Layer-wise policy metrics, percentile bands and puzzle solve dynamics.

mod bands;
mod divergence;
mod kendall;
mod report;
mod solve;

pub use bands::{percentile_bands, percentile_sorted, Band, MetricSeries, PERCENTILES};
pub use divergence::{entropy, js_divergence, top_move_probability};
pub use kendall::{kendall_tau, tau_b_on, top_k_indices, TauFilter};
pub use report::{compute_metrics, mlp_norm_series, mlp_output_norm, METRIC_NAMES};
pub use solve::{solve_dynamics, SolveDynamics, SolveMatrix};
