//! Channel estimation from quantized orthogonal pilots and sum spectral
//! efficiency of the subsequent ZF data phase.

use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;

use crate::comms::{complex_gaussian, quantize_with_agc, Received};
use crate::equalizers::{lmmse_aqnm, lmmse_bussgang_1bit, lmmse_sohe, sign_observation};
use crate::hermite::HermiteExpansion;
use crate::linalg::{eye, kron, unvec, vec};
use crate::quantization::{agc_gains, distortion_factor, QuantizerSpec};
use crate::{CMatrix, CVector, Error, Result};

/// SINR ceiling applied by [`empirical_rate`] (40 dB).
pub const SINR_CAP: f64 = 1e4;
/// Minimum number of samples per user for [`empirical_rate`].
pub const MIN_RATE_SAMPLES: usize = 10_000;

/// Pilot matrix `Phi` (`N x P`) and coherence interval `T`.
#[derive(Debug, Clone)]
pub struct PilotBlock {
    pub phi: CMatrix,
    pub p: usize,
    pub t: usize,
}

/// First `N` rows of the `P x P` DFT matrix, coherence interval 200.
pub fn dft_pilots(n: usize, p: usize) -> Result<PilotBlock> {
    if n == 0 || p < n {
        return Err(Error::invalid(format!("pilot length {p} must be at least N = {n} >= 1")));
    }
    let phi = CMatrix::from_fn(n, p, |i, j| {
        let a = -2.0 * std::f64::consts::PI * ((i * j) % p) as f64 / p as f64;
        Complex64::from_polar(1.0, a)
    });
    PilotBlock { phi, p, t: 200 }.with_coherence(200)
}

impl PilotBlock {
    pub fn with_coherence(mut self, t: usize) -> Result<Self> {
        if t <= self.p {
            return Err(Error::invalid(format!("coherence interval {t} must exceed pilot length {}", self.p)));
        }
        self.t = t;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.phi.nrows()
    }

    /// `Phi^T kron I_K`, so that `vec(H Phi) = Phi_bar vec(H)`.
    pub fn phi_bar(&self, k: usize) -> CMatrix {
        kron(&self.phi.transpose(), &eye(k))
    }
}

/// Quantized training observation `y_p = Q(Phi_bar vec(H) + v)`.
pub fn training_observation<R: Rng + ?Sized>(
    h: &CMatrix,
    pilot: &PilotBlock,
    n0: f64,
    spec: Option<&QuantizerSpec>,
    rng: &mut R,
) -> Result<Received> {
    let (k, n) = h.shape();
    if n != pilot.n() {
        return Err(Error::dims(format!("channel has {n} users, pilots have {}", pilot.n())));
    }
    let mut r = vec(&(h * &pilot.phi));
    for z in r.iter_mut() {
        *z += complex_gaussian(rng, n0);
    }
    // per-antenna received power sum_n |h_kn|^2 |phi_np|^2 + N0
    let mut power = vec![n0; k * pilot.p];
    for p in 0..pilot.p {
        for kk in 0..k {
            power[p * k + kk] += (0..n).map(|i| h[(kk, i)].norm_sqr() * pilot.phi[(i, p)].norm_sqr()).sum::<f64>();
        }
    }
    let gains = agc_gains(&power, 1.0)?;
    Ok(quantize_with_agc(spec, &r, &gains))
}

/// Channel estimators available for the training phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    Aqnm,
    NAqnm,
    Bussgang1Bit,
    Sohe,
    /// Genie: returns the true channel (upper bound reference).
    Perfect,
}

impl EstimatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::Aqnm => "aqnm",
            EstimatorKind::NAqnm => "n-aqnm",
            EstimatorKind::Bussgang1Bit => "b1bit",
            EstimatorKind::Sohe => "sohe",
            EstimatorKind::Perfect => "perfect",
        }
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "aqnm" => EstimatorKind::Aqnm,
            "n-aqnm" => EstimatorKind::NAqnm,
            "b1bit" => EstimatorKind::Bussgang1Bit,
            "sohe" => EstimatorKind::Sohe,
            "perfect" => EstimatorKind::Perfect,
            other => return Err(Error::Config(format!("unsupported channel estimator '{other}'"))),
        })
    }
}

/// Linear estimator `vec(H_hat) = W y_p` for a fixed pilot block, prior
/// `vec(H) ~ CN(0, I)` and quantizer.
#[derive(Debug, Clone)]
pub struct ChannelEstimator {
    pub kind: EstimatorKind,
    pub w: CMatrix,
    k: usize,
    n: usize,
}

impl ChannelEstimator {
    pub fn new(
        kind: EstimatorKind,
        pilot: &PilotBlock,
        k: usize,
        n0: f64,
        spec: Option<&QuantizerSpec>,
    ) -> Result<Self> {
        let n = pilot.n();
        let a = pilot.phi_bar(k);
        let rho = spec.map(distortion_factor).unwrap_or(0.0);
        let w = match kind {
            EstimatorKind::Aqnm | EstimatorKind::NAqnm => lmmse_aqnm(&a, n0, rho)?.g,
            EstimatorKind::Bussgang1Bit => {
                if spec.map(|q| q.bits()) != Some(1) {
                    return Err(Error::invalid("b1bit estimator requires a 1-bit quantizer"));
                }
                lmmse_bussgang_1bit(&a, n0)?.g
            }
            EstimatorKind::Sohe => {
                let exp = match spec {
                    Some(q) => HermiteExpansion::at_design_variance(q),
                    None => HermiteExpansion::ideal(),
                };
                let sigma = crate::equalizers::mean_receive_power(&a, n0);
                lmmse_sohe(&a, n0, &exp, sigma)?.g
            }
            EstimatorKind::Perfect => CMatrix::zeros(0, 0),
        };
        Ok(Self { kind, w, k, n })
    }

    /// `H_hat = unvec(W y_p)`; `truth` is only read by the genie estimator.
    pub fn estimate(&self, y_p: &CVector, truth: &CMatrix) -> Result<CMatrix> {
        let obs = match self.kind {
            EstimatorKind::Perfect => return Ok(truth.clone()),
            EstimatorKind::Bussgang1Bit => sign_observation(y_p),
            _ => y_p.clone(),
        };
        if obs.len() != self.w.ncols() {
            return Err(Error::dims("training observation length does not match the estimator"));
        }
        let mut h = unvec(&(&self.w * obs), self.k, self.n)?;
        if self.kind == EstimatorKind::NAqnm {
            let norm = h.norm();
            if norm > 0.0 {
                h *= Complex64::new(((self.k * self.n) as f64).sqrt() / norm, 0.0);
            }
        }
        Ok(h)
    }
}

/// One-shot form of [`ChannelEstimator`].
pub fn estimate_channel(
    kind: EstimatorKind,
    y_p: &CVector,
    pilot: &PilotBlock,
    k: usize,
    n0: f64,
    spec: Option<&QuantizerSpec>,
) -> Result<CMatrix> {
    if kind == EstimatorKind::Perfect {
        return Err(Error::invalid("the genie estimator needs the true channel"));
    }
    ChannelEstimator::new(kind, pilot, k, n0, spec)?.estimate(y_p, &CMatrix::zeros(0, 0))
}

/// `((T - P)/T) sum_n R_n`.
pub fn sum_spectral_efficiency(rates: &[f64], t: usize, p: usize) -> Result<f64> {
    if p > t || t == 0 {
        return Err(Error::invalid(format!("pilot length {p} exceeds coherence interval {t}")));
    }
    Ok((t - p) as f64 / t as f64 * rates.iter().sum::<f64>())
}

/// Running sums for the empirical SINR of one user.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RateAccumulator {
    pub count: usize,
    /// `sum s_hat s^*`.
    pub cross: Complex64,
    /// `sum |s_hat|^2`.
    pub power: f64,
}

impl RateAccumulator {
    pub fn push(&mut self, s_hat: Complex64, s: Complex64) {
        self.count += 1;
        self.cross += s_hat * s.conj();
        self.power += s_hat.norm_sqr();
    }

    pub fn merge(&mut self, other: &RateAccumulator) {
        self.count += other.count;
        self.cross += other.cross;
        self.power += other.power;
    }

    /// `|E[s_hat s^*]|^2 / (E|s_hat|^2 - |E[s_hat s^*]|^2)`, capped at 40 dB.
    pub fn sinr(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        let m = self.count as f64;
        let sig = (self.cross / m).norm_sqr();
        let rest = self.power / m - sig;
        if rest <= sig / SINR_CAP {
            SINR_CAP
        } else {
            sig / rest
        }
    }

    pub fn rate_unchecked(&self) -> f64 {
        (1.0 + self.sinr()).log2()
    }
}

/// `log2(1 + SINR)` from equalized samples `(s_hat, s)` of one user.
pub fn empirical_rate(samples: &[(Complex64, Complex64)]) -> Result<f64> {
    if samples.len() < MIN_RATE_SAMPLES {
        return Err(Error::invalid(format!(
            "empirical rate needs at least {MIN_RATE_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    let mut acc = RateAccumulator::default();
    for &(a, b) in samples {
        acc.push(a, b);
    }
    Ok(acc.rate_unchecked())
}
