//! The video SR network, its loss, trainer and checkpoint format.

pub mod checkpoint;
pub mod config;
pub mod model;
pub mod train;

pub use checkpoint::{AdamSnapshot, Checkpoint, CheckpointMeta};
pub use config::{MoCoPnetCfg, TrainCfg};
pub use model::{loss, ForwardTrace, MoCoPnet};
pub use train::{train, Dataset, LossRecord, Sample, TrainOutcome, Trainer};
