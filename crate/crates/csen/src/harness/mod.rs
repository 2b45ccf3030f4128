//! Experiment orchestration: dataset ingestion, configuration, the four
//! experiment drivers, persistence and replay.

pub mod config;
mod dictbench;
mod experiments;
mod idx;
mod phase;
mod replay;
pub mod report;

pub use config::{ExperimentConfig, ExperimentKind};
pub use dictbench::{dictbench_problem, dictbench_queries, run_dictclass_bench};
pub use experiments::{
    eval_estimator, init_arch, load_mnist, measurement_count, run_noise_sweep, run_se_experiment,
    se_context, split_indices, test_cells, train_estimator, Cell, ExperimentOutcome, MnistData,
    SeContext, SupportEval, TrainedEstimator, GRID, N,
};
pub use idx::{load_idx, resolve_idx_file};
pub use phase::{border_rho, rho_bins, run_phase_transition, run_recovery_comparison, RhoBins,
    SUCCESS_TOL};
pub use replay::{replay, ReplayOutcome};
pub use report::{emit_report, read_results_csv, ExperimentRecord, PlotSeries, TimingRecord};
