//! Link-level MIMO-OFDM simulation with joint data detection and
//! multi-oscillator phase-noise tracking.
//!
//! Module layout follows the signal chain: [`channel`] and [`phase_noise`]
//! generate impairments, [`phy`] builds and synthesizes frames, [`detector`]
//! recovers the data, [`ldpc`] and [`video`] turn detections into coded BER
//! and PSNR, and [`harness`] runs Monte Carlo campaigns.

// `!(x >= 0.0)` deliberately rejects NaN; index loops mirror the maths.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod channel;
pub mod detector;
pub mod error;
pub mod harness;
pub mod ldpc;
pub mod numerics;
pub mod phase_noise;
pub mod phy;
pub mod video;

pub use channel::{ChannelRealization, MimoChannel, PowerDelayProfile};
pub use detector::{DetectionResult, DetectorConfig, DetectorKind, EkfState, SystemModel};
pub use error::{Error, Result};
pub use harness::{CampaignConfig, ResultRecord};
pub use ldpc::LdpcCode;
pub use numerics::{CMat, C64};
pub use phase_noise::{PhnTrajectory, SpectralPhn, VarianceMode};
pub use phy::{MimoFrame, OfdmConfig, PilotLayout, Qam, QamOrder};
pub use video::RdParams;
