//! Deterministic Monte-Carlo harness: configuration, result records and CSV
//! persistence. Runners live in [`runner`], the collision study in
//! [`collision`].

pub mod collision;
pub mod runner;

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel_estimation::EstimatorKind;
use crate::comms::ConstellationName;
use crate::equalizers::{EqualizerChoice, EqualizerKind};
use crate::quantization::MAX_BITS;
use crate::{Error, Result};

pub use collision::{collision_probability, empirical_collision, one_bit_sign_output};
pub use runner::{run, run_ber, run_collision, run_mse, run_se};

/// CSV header, in column order.
pub const CSV_HEADER: [&str; 10] =
    ["experiment", "equalizer", "bits", "n_tx", "n_rx", "ebn0_db", "value", "ci95", "trials", "seed"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    #[serde(alias = "MSE")]
    Mse,
    #[serde(alias = "BER")]
    Ber,
    #[serde(alias = "SE")]
    Se,
    #[serde(alias = "COLLISION")]
    Collision,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Mse => "mse",
            ExperimentKind::Ber => "ber",
            ExperimentKind::Se => "se",
            ExperimentKind::Collision => "collision",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mse" => Ok(ExperimentKind::Mse),
            "ber" => Ok(ExperimentKind::Ber),
            "se" => Ok(ExperimentKind::Se),
            "collision" => Ok(ExperimentKind::Collision),
            other => Err(Error::Config(format!("unknown experiment '{other}'"))),
        }
    }
}

fn default_constellation() -> ConstellationName {
    ConstellationName::Qam16
}
fn default_coherence() -> usize {
    200
}
fn default_symbols_per_trial() -> usize {
    1
}
fn default_min_errors() -> u64 {
    100
}

/// Experiment description, read from JSON.
///
/// `bits = 0` selects an unquantized front end. For SE runs `equalizers`
/// lists channel estimators (`aqnm`, `n-aqnm`, `b1bit`, `sohe`, `perfect`);
/// detection is always ZF. For collision runs `trials` counts channel draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub n_tx: usize,
    pub n_rx: usize,
    pub bits: Vec<u32>,
    pub ebn0_grid_db: Vec<f64>,
    #[serde(default = "default_constellation")]
    pub constellation: ConstellationName,
    #[serde(default)]
    pub equalizers: Vec<String>,
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    /// Pilot length `P`, defaults to `n_tx`.
    #[serde(default)]
    pub pilot_len: Option<usize>,
    #[serde(default = "default_coherence", rename = "coherence_T", alias = "coherence_t")]
    pub coherence_t: usize,
    /// Symbol vectors sent per channel realization (MSE/BER).
    #[serde(default = "default_symbols_per_trial")]
    pub symbols_per_trial: usize,
    /// BER cells stop once this many bit errors are counted.
    #[serde(default = "default_min_errors")]
    pub min_errors: u64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let mut text = String::new();
        File::open(path)
            .and_then(|mut f| f.read_to_string(&mut text))
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn pilot_len(&self) -> usize {
        self.pilot_len.unwrap_or(self.n_tx)
    }

    pub fn equalizer_choices(&self) -> Result<Vec<EqualizerChoice>> {
        self.equalizers.iter().map(|s| s.parse()).collect()
    }

    pub fn estimator_kinds(&self) -> Result<Vec<EstimatorKind>> {
        self.equalizers.iter().map(|s| s.parse()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_tx == 0 || self.n_rx < self.n_tx {
            return bad(format!("need n_rx >= n_tx >= 1, got n_tx={}, n_rx={}", self.n_tx, self.n_rx));
        }
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if self.ebn0_grid_db.is_empty() || self.ebn0_grid_db.iter().any(|x| !x.is_finite()) {
            return bad("ebn0_grid_db must be a non-empty list of finite values".into());
        }
        if self.bits.is_empty() || self.bits.iter().any(|&b| b > MAX_BITS) {
            return bad(format!("bits must be a non-empty list with entries in 0..={MAX_BITS}"));
        }
        if self.symbols_per_trial == 0 {
            return bad("symbols_per_trial must be >= 1".into());
        }
        match self.experiment {
            ExperimentKind::Mse | ExperimentKind::Ber => {
                if self.equalizers.is_empty() {
                    return bad("at least one equalizer is required".into());
                }
                for c in self.equalizer_choices()? {
                    if c.kind == EqualizerKind::Bussgang1Bit && self.bits.iter().any(|&b| b != 1) {
                        return bad(format!("'{c}' requires bits = [1]"));
                    }
                }
            }
            ExperimentKind::Se => {
                if self.equalizers.is_empty() {
                    return bad("at least one channel estimator is required".into());
                }
                for k in self.estimator_kinds()? {
                    if k == EstimatorKind::Bussgang1Bit && self.bits.iter().any(|&b| b != 1) {
                        return bad("'b1bit' estimator requires bits = [1]".into());
                    }
                }
                let p = self.pilot_len();
                if p < self.n_tx {
                    return bad(format!("pilot_len {p} must be >= n_tx"));
                }
                if self.coherence_t <= p {
                    return bad(format!("coherence_T {} must exceed pilot_len {p}", self.coherence_t));
                }
                let samples = self.trials as usize * (self.coherence_t - p);
                if samples < crate::channel_estimation::MIN_RATE_SAMPLES {
                    return bad(format!(
                        "SE needs trials * (coherence_T - pilot_len) >= {}, got {samples}",
                        crate::channel_estimation::MIN_RATE_SAMPLES
                    ));
                }
            }
            ExperimentKind::Collision => {
                if self.bits != [1] {
                    return bad("collision study uses 1-bit quantization: bits must be [1]".into());
                }
                let order = crate::comms::make_constellation(self.constellation).order();
                collision::check_enumerable(order, self.n_tx)?;
            }
        }
        Ok(())
    }
}

/// One measurement row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub experiment: String,
    pub equalizer: String,
    pub bits: u32,
    pub n_tx: usize,
    pub n_rx: usize,
    pub ebn0_db: f64,
    pub value: f64,
    pub ci95: f64,
    pub trials: u64,
    pub seed: u64,
}

/// Write `records` with the fixed header to `w`.
pub fn write_records<W: Write>(records: &[MetricRecord], w: W) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wr.write_record(CSV_HEADER)?;
    for r in records {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

/// Write `records` to a CSV file at `path`.
pub fn write_csv(records: &[MetricRecord], path: &Path) -> Result<()> {
    write_records(records, File::create(path)?)
}

/// Parse records written by [`write_records`].
pub fn read_records<R: Read>(r: R) -> Result<Vec<MetricRecord>> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::Config(format!("unexpected CSV header {header:?}")));
    }
    rd.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn read_csv(path: &Path) -> Result<Vec<MetricRecord>> {
    read_records(File::open(path)?)
}

/// Human-readable table of `value ± ci95` per cell.
pub fn summary_table(records: &[MetricRecord]) -> String {
    let mut out = format!(
        "{:<10} {:<9} {:>4} {:>4} {:>5} {:>8} {:>14} {:>12} {:>9}\n",
        "experiment", "equalizer", "bits", "N", "K", "EbN0", "value", "ci95", "trials"
    );
    for r in records {
        out.push_str(&format!(
            "{:<10} {:<9} {:>4} {:>4} {:>5} {:>8.2} {:>14.6} {:>12.6} {:>9}\n",
            r.experiment, r.equalizer, r.bits, r.n_tx, r.n_rx, r.ebn0_db, r.value, r.ci95, r.trials
        ));
    }
    out
}
