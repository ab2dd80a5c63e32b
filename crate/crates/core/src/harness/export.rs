//! CSV and JSON result files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::campaign::ResultRecord;
use super::config::CampaignConfig;
use crate::error::{Error, Result};
use crate::phase_noise::VarianceMode;

/// Column order of the CSV output. Changing it is a breaking change.
pub const CSV_COLUMNS: [&str; 15] = [
    "snr_db",
    "sigma2_delta",
    "nt",
    "nr",
    "qam",
    "detector",
    "trials",
    "uncoded_ber",
    "ber_ci",
    "coded_ber",
    "psnr_db",
    "mean_iters",
    "c_mult",
    "c_add",
    "failures",
];

/// How coded bits are laid onto subcarriers.
pub const BIT_PACKING: &str = "sequential codewords over data subcarriers, random filler";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::config(format!("unknown format {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub schema: u32,
    pub phn_variance_mode: VarianceMode,
    pub bit_packing: String,
}

impl Metadata {
    pub fn for_config(cfg: &CampaignConfig) -> Self {
        Metadata {
            config_hash: config_hash(cfg),
            seed: cfg.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            schema: cfg.schema,
            phn_variance_mode: cfg.phn_variance_mode,
            bit_packing: BIT_PACKING.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JsonResults {
    pub metadata: Metadata,
    pub records: Vec<ResultRecord>,
}

/// SHA-256 of the canonical TOML rendering of the configuration.
pub fn config_hash(cfg: &CampaignConfig) -> String {
    Sha256::digest(cfg.to_toml().as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn to_csv_string(records: &[ResultRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).map_err(|e| Error::Parse {
            what: "csv output".into(),
            reason: e.to_string(),
        })?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse {
        what: "csv output".into(),
        reason: e.to_string(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes `records`; refuses an empty list without touching the filesystem.
pub fn export_results(
    records: &[ResultRecord],
    metadata: &Metadata,
    path: &Path,
    format: Format,
) -> Result<()> {
    if records.is_empty() {
        return Err(Error::config("no records to export"));
    }
    let body = match format {
        Format::Csv => to_csv_string(records)?,
        Format::Json => {
            let doc = JsonResults {
                metadata: metadata.clone(),
                records: records.to_vec(),
            };
            let mut s = serde_json::to_string_pretty(&doc).map_err(|e| Error::Parse {
                what: "json output".into(),
                reason: e.to_string(),
            })?;
            s.push('\n');
            s
        }
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(body.as_bytes())
        .map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRecord>> {
    let parse = |e: csv::Error| Error::Parse {
        what: path.display().to_string(),
        reason: e.to_string(),
    };
    let mut r = csv::Reader::from_path(path).map_err(parse)?;
    let headers: Vec<String> = r
        .headers()
        .map_err(parse)?
        .iter()
        .map(str::to_string)
        .collect();
    if headers != CSV_COLUMNS {
        return Err(Error::Parse {
            what: path.display().to_string(),
            reason: format!("unexpected columns {headers:?}"),
        });
    }
    r.deserialize().map(|row| row.map_err(parse)).collect()
}

pub fn read_json(path: &Path) -> Result<JsonResults> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        what: path.display().to_string(),
        reason: e.to_string(),
    })
}
