//! Campaign configuration file (TOML, `schema = 1`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::PowerDelayProfile;
use crate::detector::{DetectorKind, GainForm, Reconstruction};
use crate::error::{Error, Result};
use crate::phase_noise::VarianceMode;
use crate::phy::{OfdmConfig, PilotLayout};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Antennas {
    pub nt: usize,
    pub nr: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub pdp_db: PowerDelayProfile,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            pdp_db: PowerDelayProfile::exponential_default(),
        }
    }
}

/// Rate-distortion constants. `symbol_duration_s` defaults to the OFDM
/// symbol duration and `code_rate` to the LDPC rate when coding is on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RdConfig {
    pub a: f64,
    pub b: f64,
    pub z: f64,
    pub gop_duration_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbol_duration_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code_rate: Option<f64>,
}

impl Default for RdConfig {
    /// Synthetic example constants, not fitted to any real sequence.
    ///
    /// The rate term counts bits, so with `b = 100` and `z = 1` a physical GOP
    /// length would pin PSNR at its `a` asymptote. The time scale below puts
    /// `T_s / T_0` at 2e-3, which makes the 30 dB crossing fall inside an
    /// ordinary 0 to 30 dB SNR sweep of the default link.
    fn default() -> Self {
        RdConfig {
            a: 5.0,
            b: 100.0,
            z: 1.0,
            gop_duration_s: 8e-9,
            symbol_duration_s: None,
            code_rate: None,
        }
    }
}

fn default_detectors() -> Vec<DetectorKind> {
    DetectorKind::ALL.to_vec()
}

fn default_zeta_rel() -> f64 {
    1e-3
}

fn default_max_iterations() -> usize {
    10
}

fn default_symbols() -> usize {
    8
}

fn default_pilots() -> usize {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub schema: u32,
    pub seed: u64,
    pub trials: u64,
    pub snr_db: Vec<f64>,
    pub sigma2_delta: Vec<f64>,
    #[serde(default = "default_detectors")]
    pub detectors: Vec<DetectorKind>,
    #[serde(default)]
    pub coding: bool,
    #[serde(default = "default_zeta_rel")]
    pub zeta_rel: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    /// OFDM symbols per packet; channel and oscillators persist across them.
    #[serde(default = "default_symbols")]
    pub symbols_per_packet: usize,
    #[serde(default)]
    pub phn_variance_mode: VarianceMode,
    #[serde(default)]
    pub gain_form: GainForm,
    #[serde(default)]
    pub reconstruction: Reconstruction,
    #[serde(default = "default_pilots")]
    pub pilots: usize,
    pub antennas: Antennas,
    #[serde(default)]
    pub ofdm: OfdmConfig,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub rd: RdConfig,
}

impl CampaignConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: CampaignConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        CampaignConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "unsupported schema {} (expected {SCHEMA_VERSION})",
                self.schema
            )));
        }
        if self.trials == 0 {
            return Err(Error::config("trials must be at least 1"));
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::config(
                "snr_db must be a non-empty list of finite values",
            ));
        }
        if self.sigma2_delta.is_empty()
            || self
                .sigma2_delta
                .iter()
                .any(|s| !(*s >= 0.0) || !s.is_finite())
        {
            return Err(Error::config(
                "sigma2_delta must be a non-empty list of non-negative values",
            ));
        }
        if self.detectors.is_empty() {
            return Err(Error::config("at least one detector is required"));
        }
        if self.antennas.nt == 0 || self.antennas.nr == 0 {
            return Err(Error::config("antenna counts must be at least 1"));
        }
        if self.max_iterations == 0 || self.symbols_per_packet == 0 {
            return Err(Error::config(
                "max_iterations and symbols_per_packet must be at least 1",
            ));
        }
        if !(self.zeta_rel >= 0.0) {
            return Err(Error::config("zeta_rel must be non-negative"));
        }
        self.ofdm.validate(self.channel.pdp_db.len())?;
        let layout = self.pilot_layout()?;
        if self.detectors.contains(&DetectorKind::Pilot) && layout.len() < self.antennas.nt {
            return Err(Error::config(
                "the pilot detector needs at least one pilot per transmit antenna",
            ));
        }
        if self.coding && self.coded_bits_per_packet()? < crate::ldpc::LdpcCode::standard().n() {
            return Err(Error::config(
                "a packet is too short for one LDPC codeword; raise symbols_per_packet",
            ));
        }
        self.rd_params(0.5)?.validate()
    }

    pub fn pilot_layout(&self) -> Result<PilotLayout> {
        PilotLayout::comb(self.ofdm.n, self.pilots)
    }

    pub fn data_subcarriers(&self) -> Result<usize> {
        Ok(self.ofdm.n - self.pilot_layout()?.len())
    }

    pub fn coded_bits_per_packet(&self) -> Result<usize> {
        Ok(self.data_subcarriers()? * self.ofdm.qam.bits_per_symbol() * self.symbols_per_packet)
    }

    /// Resolved RD constants; `code_rate` is the LDPC rate used when coding is on.
    pub fn rd_params(&self, ldpc_rate: f64) -> Result<crate::video::RdParams> {
        let code_rate = self
            .rd
            .code_rate
            .unwrap_or(if self.coding { ldpc_rate } else { 1.0 });
        Ok(crate::video::RdParams {
            a: self.rd.a,
            b: self.rd.b,
            z: self.rd.z,
            gop_duration_s: self.rd.gop_duration_s,
            symbol_duration_s: self
                .rd
                .symbol_duration_s
                .unwrap_or(self.ofdm.symbol_duration()),
            code_rate,
        })
    }
}
