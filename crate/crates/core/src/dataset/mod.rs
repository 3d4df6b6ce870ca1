//! Design-of-experiments sweeps, record storage and evaluation metrics.

mod doe;
mod metrics;
mod study;
mod sweep;

pub use doe::{enumerate_doe, DoePoint, DoeSpec, ParamRange};
pub use metrics::{dice, evaluate, mse, volume_deviation, EvalReport, VolumeDeviation, DICE_THRESHOLD};
pub use study::{convergence_study, StudyKind, StudyTable, MESH_STUDY_RESOLUTION};
pub use sweep::{
    run_dataset, split_dataset, write_atomic, DatasetManifest, DatasetRecord, ManifestEntry, ObjectiveCounts,
    RecordStatus, Split, SweepOptions, DEFAULT_SPLIT, MANIFEST_FILE, MANIFEST_SCHEMA_VERSION, RECORDS_DIR,
    TIMINGS_FILE,
};
