//! Orchestration: configuration, frame sources, the SLAM loop and its artifacts.

pub mod config;
pub mod io;
pub mod run;
pub mod source;
pub mod tum;

pub use config::{
    config_string, load_config, parse_config, save_config, Ablation, InputSource, MappingMode,
    MatchingSection, RunConfig, RunSection, TrajectorySection,
};
pub use run::{
    frames_csv, run_log_csv, run_slam, run_with_source, write_outputs, FrameSummary, LogRow,
    RunOutcome,
};
pub use source::{write_dataset, DatasetSource, FrameSource, Manifest, SimSource};
pub use tum::{parse_pose, parse_tum, read_tum, tum_string, write_tum, Trajectory};
