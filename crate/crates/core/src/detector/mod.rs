//! Joint phase-noise tracking and data detection, plus reference receivers.

pub mod baselines;
pub mod complexity;
pub mod ekf;
pub mod iterative;
pub mod system;

use serde::{Deserialize, Serialize};

pub use baselines::{detect_no_tracking, detect_perfect_phn, detect_pilot_cpe, pilot_cpe_estimate};
pub use complexity::{complexity_at, complexity_counts, ComplexityCounts};
pub use ekf::{ekf_track, ekf_update, EkfState, EkfTrace, GainForm};
pub use iterative::{
    iterative_detect, DetectionResult, DetectorConfig, PhasePrior, Reconstruction, SinrTerms,
    StopThreshold,
};
pub use system::{mmse_detect, stack, MmseSolution, SystemModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    Proposed,
    Perfect,
    NoTracking,
    Pilot,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 4] = [
        DetectorKind::Proposed,
        DetectorKind::Perfect,
        DetectorKind::NoTracking,
        DetectorKind::Pilot,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DetectorKind::Proposed => "proposed",
            DetectorKind::Perfect => "perfect",
            DetectorKind::NoTracking => "no_tracking",
            DetectorKind::Pilot => "pilot",
        }
    }
}

impl std::fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
