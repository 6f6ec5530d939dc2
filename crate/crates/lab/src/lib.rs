//! Experiment definitions, sweeps, scaling fits, plots and the invariant
//! checker behind the `hgdlab` command.

pub mod config;
pub mod experiments;
pub mod fit;
pub mod invariants;
pub mod plot;
pub mod table;

pub use config::{ExperimentConfig, ExperimentId, Overrides, Sweep};
pub use experiments::{compute_experiment, run_experiment, Artifacts, ExperimentOutput, BOUND_VIOLATION};
pub use fit::{fit_scaling, ScalingFit};
pub use invariants::{check_invariants, InvariantReport};
pub use plot::emit_plot;
pub use table::{Table, Value};
