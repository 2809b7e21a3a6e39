//! Metrics, file formats, experiment orchestration and plot data.

mod container;
mod history;
mod metrics;
mod pipeline;
mod plots;
mod store;

pub use container::{TensorContainer, HEADER_LEN, TENSOR_MAGIC};
pub use history::history_csv;
pub use metrics::{line_profile, normalized_lp_error, relative_mass_error, LineProfile, SummaryStats};
pub use pipeline::{
    fmt_num, method_csv, run_pipeline, run_pipeline_with, summary_csv, sweep, sweep_with, test_cases, write_report,
    CheckpointPaths, ExperimentManifest, MethodSummary, Method, MetricRow, Models, Report, Showcase, SweepCell,
    SweepReport, SweepSpec,
};
pub use plots::{boxplot_csv, density_pgm, emit_plots, profile_csv, radiograph_pgm};
pub use store::{
    load_checkpoint, load_radiographs, load_series, quantize_series, read_checkpoint, save_checkpoint,
    save_radiographs, save_series, sidecar_path, write_checkpoint, CHECKPOINT_MAGIC,
};
