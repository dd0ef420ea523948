//! Experiment orchestration: configuration, Rx placement, dataset
//! generation, scaling sweeps and plot data.

pub mod config;
pub mod parallel;
pub mod placement;
pub mod plotdata;
pub mod run;
pub mod seed;

pub use config::{ArrayPair, ExperimentConfig, RxMode, SiteConfig, SweepSettings, TraceSettings};
pub use placement::place_rx;
pub use plotdata::{emit_plotdata, PlotKind};
pub use run::{run_experiment, run_sweep, RunManifest, RunReport, SweepKind, SweepReport};
