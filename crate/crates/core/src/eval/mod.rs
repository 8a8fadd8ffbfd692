//! Retrieval evaluation, baselines and desk-scale experiments.

mod ablation;
mod aqe;
mod metrics;
mod pipeline;
mod protocol;
mod sweep;
mod synth;

pub use ablation::{run_ablation, AblationRow, AblationTable};
pub use aqe::{aqe_baseline, nn_search};
pub use metrics::{average_precision, mean_ap};
pub use pipeline::{build_affinity, cross_label_stats, evaluate, CrossLabelStats, DenoiseConfig, GraphSource, PipelineConfig, PipelineRun};
pub use protocol::{Protocol, ProtocolMode, QueryGroundTruth};
pub use sweep::{sweep, write_plot_data, SweepAxis, SweepResult};
pub use synth::{synth_benchmark, synth_manifolds, SynthBenchmark, SynthConfig, SynthShape, SyntheticData};
