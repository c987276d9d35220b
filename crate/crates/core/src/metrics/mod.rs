//! Evaluation: image quality, local target statistics, detection gains and ROC.
//!
//! Local statistics and gains expect 8-bit-scale intensities; PSNR/SSIM take an explicit peak.

pub mod neighborhood;
pub mod quality;
pub mod report;
pub mod roc;

pub use neighborhood::{
    default_tau, detection_gains, local_cr, local_scr, local_snr, neighborhood_stats, DetectionGains,
    NeighborhoodSpec, NeighborhoodStats, METRIC_EPS,
};
pub use quality::{psnr, ssim};
pub use report::{MetricReport, ReportRow};
pub use roc::{default_sweep, detection_counts, match_targets, roc, DetectionCounts, RocCurve, RocPoint};
