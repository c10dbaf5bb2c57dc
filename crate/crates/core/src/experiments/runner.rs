//! Monte-Carlo runners for the MSE, BER, SE and collision experiments.
//!
//! Each `(bits, Eb/N0)` cell draws trial `i` from substream `i` of a key
//! derived from the seed and the cell parameters, so every equalizer sees the
//! same channels and symbols and results do not depend on the thread count.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{ExperimentConfig, ExperimentKind, MetricRecord};
use crate::channel_estimation::{
    dft_pilots, sum_spectral_efficiency, training_observation, ChannelEstimator, RateAccumulator,
};
use crate::comms::{
    hard_decide, make_constellation, noise_variance_from_ebn0, rayleigh_channel, transmit, Constellation, LinkScenario,
};
use crate::equalizers::{
    elmmse, equalize, lmmse_aqnm, lmmse_bussgang_1bit, lmmse_modified, lmmse_sohe, mean_receive_power,
    sign_observation, zf, EqualizerChoice, EqualizerKind, EqualizerMatrix,
};
use crate::hermite::HermiteExpansion;
use crate::quantization::{distortion_factor, optimal_uniform_quantizer, QuantizerSpec};
use crate::rng::{cell_id, substream};
use crate::{CMatrix, CVector, Error, Result};

const Z95: f64 = 1.959_963_984_540_054;
/// Trials per stopping-rule check in BER cells.
const BER_CHUNK: u64 = 256;
/// Batches used for the SE confidence interval.
const SE_BATCHES: usize = 10;
/// Floor applied before converting an MSE to dB.
const MSE_FLOOR: f64 = 1e-30;

/// Sample mean and 95% normal-approximation half-width.
pub fn mean_ci(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut s, mut s2) = (0usize, 0.0, 0.0);
    for v in values {
        n += 1;
        s += v;
        s2 += v * v;
    }
    if n == 0 {
        return (0.0, 0.0);
    }
    let m = s / n as f64;
    if n < 2 {
        return (m, 0.0);
    }
    let var = ((s2 - n as f64 * m * m) / (n - 1) as f64).max(0.0);
    (m, Z95 * (var / n as f64).sqrt())
}

/// Quantizer and model constants for one resolution.
#[derive(Debug, Clone)]
pub struct QuantModel {
    pub bits: u32,
    pub spec: Option<QuantizerSpec>,
    pub rho: f64,
    pub expansion: HermiteExpansion,
}

impl QuantModel {
    /// Gaussian-optimal uniform quantizer for `bits`, ideal ADC for `bits = 0`.
    pub fn new(bits: u32) -> Result<Self> {
        if bits == 0 {
            return Ok(Self { bits, spec: None, rho: 0.0, expansion: HermiteExpansion::ideal() });
        }
        let spec = optimal_uniform_quantizer(bits)?;
        Ok(Self::from_spec(spec))
    }

    pub fn from_spec(spec: QuantizerSpec) -> Self {
        let rho = distortion_factor(&spec);
        let expansion = HermiteExpansion::at_design_variance(&spec);
        Self { bits: spec.bits(), spec: Some(spec), rho, expansion }
    }
}

/// Equalizer for one channel realization.
pub fn build_equalizer(choice: EqualizerChoice, h: &CMatrix, n0: f64, model: &QuantModel) -> Result<EqualizerMatrix> {
    let g = match choice.kind {
        EqualizerKind::Aqnm => lmmse_aqnm(h, n0, model.rho)?,
        EqualizerKind::Modified => lmmse_modified(h, n0, model.rho)?,
        EqualizerKind::Bussgang1Bit => {
            if model.bits != 1 {
                return Err(Error::invalid("Bussgang arcsine equalizer needs a 1-bit quantizer"));
            }
            lmmse_bussgang_1bit(h, n0)?
        }
        EqualizerKind::Sohe => lmmse_sohe(h, n0, &model.expansion, mean_receive_power(h, n0))?,
        EqualizerKind::Elmmse => elmmse(&lmmse_aqnm(h, n0, model.rho)?, h, model.expansion.lambda)?,
        EqualizerKind::Zf => zf(h)?,
    };
    Ok(g.normalized(choice.normalize))
}

/// Equalized output for the observation the equalizer expects.
fn detect(g: &EqualizerMatrix, y: &CVector) -> Result<CVector> {
    if g.kind == EqualizerKind::Bussgang1Bit {
        equalize(g, &sign_observation(y))
    } else {
        equalize(g, y)
    }
}

/// RNG cell key of `(bits, Eb/N0)`; trial `i` of the cell draws from
/// `substream(cfg.seed, key, i)`.
pub fn cell_key(cfg: &ExperimentConfig, bits: u32, ebn0_db: f64) -> u64 {
    cell_id(&format!(
        "{}|{}|b={}|N={}|K={}|ebn0={}|sym={}",
        cfg.experiment.as_str(),
        cfg.constellation,
        bits,
        cfg.n_tx,
        cfg.n_rx,
        ebn0_db,
        cfg.symbols_per_trial
    ))
}

struct Cell<'a> {
    cfg: &'a ExperimentConfig,
    model: QuantModel,
    constellation: Constellation,
    ebn0_db: f64,
    n0: f64,
    key: u64,
}

impl<'a> Cell<'a> {
    fn new(cfg: &'a ExperimentConfig, model: &QuantModel, ebn0_db: f64) -> Self {
        let constellation = make_constellation(cfg.constellation);
        let n0 = noise_variance_from_ebn0(ebn0_db, &constellation);
        let key = cell_key(cfg, model.bits, ebn0_db);
        Self { cfg, model: model.clone(), constellation, ebn0_db, n0, key }
    }

    fn rng(&self, trial: u64) -> ChaCha8Rng {
        substream(self.cfg.seed, self.key, trial)
    }

    fn scenario(&self, rng: &mut ChaCha8Rng) -> Result<LinkScenario> {
        let h = rayleigh_channel(self.cfg.n_rx, self.cfg.n_tx, rng);
        LinkScenario::new(h, self.n0, self.model.spec.clone(), self.constellation.clone())
    }

    fn record(&self, eq: &str, value: f64, ci95: f64, trials: u64) -> MetricRecord {
        MetricRecord {
            experiment: self.cfg.experiment.as_str().to_string(),
            equalizer: eq.to_string(),
            bits: self.model.bits,
            n_tx: self.cfg.n_tx,
            n_rx: self.cfg.n_rx,
            ebn0_db: self.ebn0_db,
            value,
            ci95,
            trials,
            seed: self.cfg.seed,
        }
    }

    /// Mean per-symbol squared error `||G y - s||^2 / N` of one trial.
    fn mse_trial(&self, choice: EqualizerChoice, trial: u64) -> Result<f64> {
        let mut rng = self.rng(trial);
        let sc = self.scenario(&mut rng)?;
        let g = build_equalizer(choice, &sc.h, self.n0, &self.model)?;
        let mut acc = 0.0;
        for _ in 0..self.cfg.symbols_per_trial {
            let labels = self.constellation.random_labels(self.cfg.n_tx, &mut rng);
            let s = self.constellation.symbols(&labels);
            let rx = transmit(&sc, &s, &mut rng)?;
            acc += (detect(&g, &rx.y)? - s).norm_squared() / self.cfg.n_tx as f64;
        }
        Ok(acc / self.cfg.symbols_per_trial as f64)
    }

    /// Bit errors of one trial.
    fn ber_trial(&self, choice: EqualizerChoice, trial: u64) -> Result<u64> {
        let mut rng = self.rng(trial);
        let sc = self.scenario(&mut rng)?;
        let g = build_equalizer(choice, &sc.h, self.n0, &self.model)?;
        let mut errors = 0u64;
        for _ in 0..self.cfg.symbols_per_trial {
            let labels = self.constellation.random_labels(self.cfg.n_tx, &mut rng);
            let s = self.constellation.symbols(&labels);
            let rx = transmit(&sc, &s, &mut rng)?;
            let (dec, _) = hard_decide(&detect(&g, &rx.y)?, &self.constellation);
            errors += dec.iter().zip(&labels).map(|(a, b)| u64::from((a ^ b).count_ones())).sum::<u64>();
        }
        Ok(errors)
    }

    /// Per-user rate accumulators of one coherence block.
    fn se_block(&self, est: &ChannelEstimator, pilot_len: usize, trial: u64) -> Result<Vec<RateAccumulator>> {
        let mut rng = self.rng(trial);
        let sc = self.scenario(&mut rng)?;
        let pilot = dft_pilots(self.cfg.n_tx, pilot_len)?.with_coherence(self.cfg.coherence_t)?;
        let train = training_observation(&sc.h, &pilot, self.n0, self.model.spec.as_ref(), &mut rng)?;
        let h_hat = est.estimate(&train.y, &sc.h)?;
        let g = zf(&h_hat)?;
        let mut acc = vec![RateAccumulator::default(); self.cfg.n_tx];
        for _ in 0..(self.cfg.coherence_t - pilot_len) {
            let labels = self.constellation.random_labels(self.cfg.n_tx, &mut rng);
            let s = self.constellation.symbols(&labels);
            let rx = transmit(&sc, &s, &mut rng)?;
            let s_hat = equalize(&g, &rx.y)?;
            for (n, a) in acc.iter_mut().enumerate() {
                a.push(s_hat[n], s[n]);
            }
        }
        Ok(acc)
    }
}

fn models(cfg: &ExperimentConfig) -> Result<Vec<QuantModel>> {
    cfg.bits.iter().map(|&b| QuantModel::new(b)).collect()
}

fn check_kind(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    cfg.validate()?;
    if cfg.experiment != kind {
        return Err(Error::Config(format!(
            "config describes a '{}' experiment, not '{}'",
            cfg.experiment.as_str(),
            kind.as_str()
        )));
    }
    Ok(())
}

fn to_db(x: f64) -> f64 {
    10.0 * x.max(MSE_FLOOR).log10()
}

/// MSE in dB per `(equalizer, bits, Eb/N0)` cell; `ci95` is the dB
/// half-width from the delta method.
pub fn run_mse(cfg: &ExperimentConfig) -> Result<Vec<MetricRecord>> {
    check_kind(cfg, ExperimentKind::Mse)?;
    let choices = cfg.equalizer_choices()?;
    let mut out = Vec::new();
    for model in models(cfg)? {
        for &ebn0 in &cfg.ebn0_grid_db {
            let cell = Cell::new(cfg, &model, ebn0);
            for &choice in &choices {
                let per_trial =
                    (0..cfg.trials).into_par_iter().map(|i| cell.mse_trial(choice, i)).collect::<Result<Vec<f64>>>()?;
                let (m, ci) = mean_ci(per_trial.iter().copied());
                let ci_db = if m > 0.0 { 10.0 / std::f64::consts::LN_10 * ci / m } else { 0.0 };
                out.push(cell.record(choice.as_str(), to_db(m), ci_db, cfg.trials));
            }
        }
    }
    Ok(out)
}

/// Bit error rate per cell; cells stop after `min_errors` bit errors (checked
/// every 256 trials) or `trials`, whichever comes first.
pub fn run_ber(cfg: &ExperimentConfig) -> Result<Vec<MetricRecord>> {
    check_kind(cfg, ExperimentKind::Ber)?;
    let choices = cfg.equalizer_choices()?;
    let mut out = Vec::new();
    for model in models(cfg)? {
        for &ebn0 in &cfg.ebn0_grid_db {
            let cell = Cell::new(cfg, &model, ebn0);
            let bits_per_trial = (cfg.n_tx * cfg.symbols_per_trial) as f64 * cell.constellation.bits_per_symbol as f64;
            for &choice in &choices {
                let mut errors: Vec<u64> = Vec::new();
                let mut total = 0u64;
                let mut start = 0u64;
                while start < cfg.trials && total < cfg.min_errors {
                    let end = (start + BER_CHUNK).min(cfg.trials);
                    let chunk = (start..end)
                        .into_par_iter()
                        .map(|i| cell.ber_trial(choice, i))
                        .collect::<Result<Vec<u64>>>()?;
                    total += chunk.iter().sum::<u64>();
                    errors.extend(chunk);
                    start = end;
                }
                let (m, ci) = mean_ci(errors.iter().map(|&e| e as f64 / bits_per_trial));
                out.push(cell.record(choice.as_str(), m, ci, errors.len() as u64));
            }
        }
    }
    Ok(out)
}

fn se_from(acc: &[RateAccumulator], t: usize, p: usize) -> Result<f64> {
    let rates: Vec<f64> = acc.iter().map(RateAccumulator::rate_unchecked).collect();
    sum_spectral_efficiency(&rates, t, p)
}

/// Sum spectral efficiency (bit/s/Hz) per `(estimator, bits, Eb/N0)` cell with
/// ZF detection on the estimated channel; one trial is one coherence block.
/// `ci95` comes from batch means over 10 groups of blocks.
pub fn run_se(cfg: &ExperimentConfig) -> Result<Vec<MetricRecord>> {
    check_kind(cfg, ExperimentKind::Se)?;
    let kinds = cfg.estimator_kinds()?;
    let p = cfg.pilot_len();
    let t = cfg.coherence_t;
    let mut out = Vec::new();
    for model in models(cfg)? {
        for &ebn0 in &cfg.ebn0_grid_db {
            let cell = Cell::new(cfg, &model, ebn0);
            let pilot = dft_pilots(cfg.n_tx, p)?.with_coherence(t)?;
            for &kind in &kinds {
                let est = ChannelEstimator::new(kind, &pilot, cfg.n_rx, cell.n0, model.spec.as_ref())?;
                let blocks =
                    (0..cfg.trials).into_par_iter().map(|i| cell.se_block(&est, p, i)).collect::<Result<Vec<_>>>()?;
                let mut total = vec![RateAccumulator::default(); cfg.n_tx];
                for b in &blocks {
                    for (a, x) in total.iter_mut().zip(b) {
                        a.merge(x);
                    }
                }
                let se = se_from(&total, t, p)?;
                let ci = if blocks.len() >= SE_BATCHES {
                    let per = blocks.len() / SE_BATCHES;
                    let batch_se = (0..SE_BATCHES).map(|g| {
                        let mut acc = vec![RateAccumulator::default(); cfg.n_tx];
                        for b in &blocks[g * per..(g + 1) * per] {
                            for (a, x) in acc.iter_mut().zip(b) {
                                a.merge(x);
                            }
                        }
                        se_from(&acc, t, p).unwrap_or(0.0)
                    });
                    mean_ci(batch_se).1
                } else {
                    0.0
                };
                out.push(cell.record(kind.as_str(), se, ci, cfg.trials));
            }
        }
    }
    Ok(out)
}

/// Empirical number of colliding block pairs (`empirical`) and the
/// uniform-output formula (`formula`) per Eb/N0 point.
pub fn run_collision(cfg: &ExperimentConfig) -> Result<Vec<MetricRecord>> {
    check_kind(cfg, ExperimentKind::Collision)?;
    let constellation = make_constellation(cfg.constellation);
    let order = constellation.order();
    let model = QuantModel::new(1)?;
    let formula = super::collision_probability(order as u64, cfg.n_tx as u32, cfg.n_rx as u32)?;
    let mut out = Vec::new();
    for &ebn0 in &cfg.ebn0_grid_db {
        let cell = Cell::new(cfg, &model, ebn0);
        let (m, ci) = super::empirical_collision(order, cfg.n_tx, cfg.n_rx, cell.n0, cfg.trials, cfg.seed ^ cell.key)?;
        out.push(cell.record("empirical", m, ci, cfg.trials));
        out.push(cell.record("formula", formula, 0.0, cfg.trials));
    }
    Ok(out)
}

/// Dispatch on `cfg.experiment`.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<MetricRecord>> {
    match cfg.experiment {
        ExperimentKind::Mse => run_mse(cfg),
        ExperimentKind::Ber => run_ber(cfg),
        ExperimentKind::Se => run_se(cfg),
        ExperimentKind::Collision => run_collision(cfg),
    }
}
