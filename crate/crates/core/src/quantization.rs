//! b-bit staircase quantizers, ideal AGC and the distortion factor.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::quadrature::integrate;
use crate::{CVector, Error, Result};

pub const MAX_BITS: u32 = 8;

const QUAD_TOL: f64 = 1e-12;

/// Thresholds and reconstruction levels of a b-bit quantizer.
///
/// `thresholds` holds all `M + 1` edges including `-inf` and `+inf`; bin `m`
/// is `(thresholds[m], thresholds[m + 1]]` and maps to `levels[m]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QuantizerConfig", into = "QuantizerConfig")]
pub struct QuantizerSpec {
    bits: u32,
    levels: Vec<f64>,
    thresholds: Vec<f64>,
    step: Option<f64>,
}

/// Serialized form of a quantizer: either a uniform quantizer given by its
/// bit count (and optional step, defaulting to the Gaussian-optimal one) or
/// an explicit threshold/level table.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QuantizerConfig {
    Explicit {
        bits: u32,
        /// Finite thresholds only.
        thresholds: Vec<f64>,
        levels: Vec<f64>,
    },
    Uniform {
        bits: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        step: Option<f64>,
    },
}

impl TryFrom<QuantizerConfig> for QuantizerSpec {
    type Error = Error;

    fn try_from(c: QuantizerConfig) -> Result<Self> {
        match c {
            QuantizerConfig::Uniform { bits, step } => {
                let step = match step {
                    Some(s) => s,
                    None => optimal_step(bits)?,
                };
                make_uniform_quantizer(bits, step)
            }
            QuantizerConfig::Explicit { bits, thresholds, levels } => QuantizerSpec::new(bits, &thresholds, &levels),
        }
    }
}

impl From<QuantizerSpec> for QuantizerConfig {
    fn from(q: QuantizerSpec) -> Self {
        match q.step {
            Some(step) => QuantizerConfig::Uniform { bits: q.bits, step: Some(step) },
            None => {
                QuantizerConfig::Explicit { bits: q.bits, thresholds: q.finite_thresholds().to_vec(), levels: q.levels }
            }
        }
    }
}

fn check_bits(bits: u32) -> Result<usize> {
    if !(1..=MAX_BITS).contains(&bits) {
        return Err(Error::invalid(format!("bits must be in 1..={MAX_BITS}, got {bits}")));
    }
    Ok(1usize << bits)
}

impl QuantizerSpec {
    /// Quantizer from its `M - 1` finite thresholds and `M` levels.
    ///
    /// Thresholds must be strictly increasing and levels non-decreasing and
    /// finite. Symmetry is not required; see [`QuantizerSpec::is_symmetric`].
    pub fn new(bits: u32, finite_thresholds: &[f64], levels: &[f64]) -> Result<Self> {
        let m = check_bits(bits)?;
        if finite_thresholds.len() != m - 1 {
            return Err(Error::invalid(format!(
                "{bits}-bit quantizer needs {} finite thresholds, got {}",
                m - 1,
                finite_thresholds.len()
            )));
        }
        if levels.len() != m {
            return Err(Error::invalid(format!("{bits}-bit quantizer needs {m} levels, got {}", levels.len())));
        }
        if finite_thresholds.iter().chain(levels).any(|v| !v.is_finite()) {
            return Err(Error::invalid("thresholds and levels must be finite"));
        }
        if finite_thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("thresholds must be strictly increasing"));
        }
        if levels.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid("levels must be non-decreasing"));
        }
        let mut thresholds = Vec::with_capacity(m + 1);
        thresholds.push(f64::NEG_INFINITY);
        thresholds.extend_from_slice(finite_thresholds);
        thresholds.push(f64::INFINITY);
        Ok(Self { bits, levels: levels.to_vec(), thresholds, step: None })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Number of levels `M = 2^b`.
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// All `M + 1` thresholds including the infinite ends.
    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn finite_thresholds(&self) -> &[f64] {
        &self.thresholds[1..self.thresholds.len() - 1]
    }

    /// Step of a uniform quantizer, `None` for explicit tables.
    pub fn step(&self) -> Option<f64> {
        self.step
    }

    /// `x_m = -x_{M-1-m}` and `tau_m = -tau_{M-m}` up to `1e-12`.
    pub fn is_symmetric(&self) -> bool {
        let m = self.levels.len();
        let lv = (0..m).all(|i| (self.levels[i] + self.levels[m - 1 - i]).abs() <= 1e-12);
        let t = self.finite_thresholds();
        let n = t.len();
        lv && (0..n).all(|i| (t[i] + t[n - 1 - i]).abs() <= 1e-12)
    }

    /// Same quantizer acting on an input scaled by `1/scale`: thresholds and
    /// levels are both divided by `scale`.
    pub fn rescaled(&self, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid("scale must be positive"));
        }
        let t: Vec<f64> = self.finite_thresholds().iter().map(|v| v / scale).collect();
        let l: Vec<f64> = self.levels.iter().map(|v| v / scale).collect();
        let mut out = QuantizerSpec::new(self.bits, &t, &l)?;
        out.step = self.step.map(|s| s / scale);
        Ok(out)
    }

    /// Copy with every level shifted by `delta` (asymmetric test quantizers).
    pub fn with_level_offset(&self, delta: f64) -> Result<Self> {
        let l: Vec<f64> = self.levels.iter().map(|v| v + delta).collect();
        QuantizerSpec::new(self.bits, self.finite_thresholds(), &l)
    }

    /// Copy with thresholds and levels shifted by `delta`: `Q'(x) = Q(x - delta) + delta`.
    pub fn with_offset(&self, delta: f64) -> Result<Self> {
        let t: Vec<f64> = self.finite_thresholds().iter().map(|v| v + delta).collect();
        let l: Vec<f64> = self.levels.iter().map(|v| v + delta).collect();
        QuantizerSpec::new(self.bits, &t, &l)
    }

    #[inline]
    fn bin(&self, x: f64) -> usize {
        self.finite_thresholds().partition_point(|&t| t < x)
    }

    /// Level of `x`, assuming `x` is not NaN.
    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        self.levels[self.bin(x)]
    }
}

/// Mid-rise uniform quantizer with step `step`.
pub fn make_uniform_quantizer(bits: u32, step: f64) -> Result<QuantizerSpec> {
    let m = check_bits(bits)?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid(format!("step must be positive, got {step}")));
    }
    let half = (m / 2) as i64;
    let thresholds: Vec<f64> = (-(half - 1)..=(half - 1)).map(|k| k as f64 * step).collect();
    let levels: Vec<f64> = (-half..half).map(|k| (k as f64 + 0.5) * step).collect();
    let mut q = QuantizerSpec::new(bits, &thresholds, &levels)?;
    q.step = Some(step);
    Ok(q)
}

/// Symmetric quantizer whose levels sit on the thresholds: positive bins take
/// their upper edge, negative bins their lower edge, and the two unbounded
/// bins take the outermost finite threshold.
pub fn make_theorem1_quantizer(bits: u32, finite_thresholds: &[f64]) -> Result<QuantizerSpec> {
    let m = check_bits(bits)?;
    let t = finite_thresholds;
    if t.len() != m - 1 {
        return Err(Error::invalid(format!("{bits}-bit quantizer needs {} finite thresholds", m - 1)));
    }
    let n = t.len();
    if (0..n).any(|i| (t[i] + t[n - 1 - i]).abs() > 1e-12) {
        return Err(Error::invalid("threshold set is not symmetric"));
    }
    let lo = t[0];
    let hi = t[n - 1];
    let mut levels = Vec::with_capacity(m);
    for i in 0..m {
        // bin i = (tau_i, tau_{i+1}], tau_0 = -inf, tau_M = +inf
        let upper = if i + 1 < m { t[i] } else { f64::INFINITY };
        let lower = if i > 0 { t[i - 1] } else { f64::NEG_INFINITY };
        let level = if upper > 0.0 { upper.min(hi) } else { lower.max(lo) };
        levels.push(level);
    }
    if levels.contains(&0.0) {
        return Err(Error::DegenerateLevels(format!("{bits}-bit threshold grid yields a zero level")));
    }
    QuantizerSpec::new(bits, t, &levels)
}

/// `Q_b(x)`; values on a threshold go to the lower bin.
pub fn quantize_real(spec: &QuantizerSpec, x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::invalid("NaN input to quantizer"));
    }
    Ok(spec.apply(x))
}

/// Element-wise `Q_b(Re r_k) + j Q_b(Im r_k)`.
pub fn quantize_complex_vector(spec: &QuantizerSpec, r: &CVector) -> Result<CVector> {
    if r.iter().any(|z| z.re.is_nan() || z.im.is_nan()) {
        return Err(Error::invalid("NaN input to quantizer"));
    }
    Ok(r.map(|z| Complex64::new(spec.apply(z.re), spec.apply(z.im))))
}

/// Sample-based AGC: scales `r` so each real component has RMS `target_rms`.
pub fn agc_scale(r: &CVector, target_rms: f64) -> Result<(CVector, f64)> {
    if !(target_rms > 0.0) {
        return Err(Error::invalid("target_rms must be positive"));
    }
    if r.is_empty() {
        return Err(Error::invalid("empty input"));
    }
    let energy: f64 = r.iter().map(|z| z.norm_sqr()).sum();
    if energy <= 0.0 {
        return Err(Error::invalid("zero-energy input to AGC"));
    }
    let rms = (energy / (2 * r.len()) as f64).sqrt();
    let g = target_rms / rms;
    Ok((r * Complex64::new(g, 0.0), g))
}

/// Ideal (statistical) AGC: per-antenna gains from the known `diag(C_rr)`, so
/// each real component has standard deviation `target_rms`.
pub fn agc_gains(c_rr_diag: &[f64], target_rms: f64) -> Result<Vec<f64>> {
    if !(target_rms > 0.0) {
        return Err(Error::invalid("target_rms must be positive"));
    }
    c_rr_diag
        .iter()
        .map(|&d| {
            if d > 0.0 && d.is_finite() {
                Ok(target_rms / (d / 2.0).sqrt())
            } else {
                Err(Error::invalid("AGC needs positive received power"))
            }
        })
        .collect()
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `rho_b = E[(x - Q_b(x))^2]` for `x ~ N(0, 1)`, by per-bin quadrature.
pub fn distortion_factor(spec: &QuantizerSpec) -> f64 {
    let t = spec.thresholds();
    spec.levels()
        .iter()
        .enumerate()
        .map(|(m, &xm)| integrate(|x| (x - xm).powi(2) * std_normal_pdf(x), t[m], t[m + 1], QUAD_TOL))
        .sum()
}

/// Step of the mid-rise uniform quantizer minimizing [`distortion_factor`]
/// for a unit-variance Gaussian, by golden-section search.
pub fn optimal_step(bits: u32) -> Result<f64> {
    check_bits(bits)?;
    let f = |d: f64| distortion_factor(&make_uniform_quantizer(bits, d).expect("positive step"));
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (1e-3, 4.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-8 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    Ok(0.5 * (a + b))
}

/// Uniform quantizer with the Gaussian-optimal step.
pub fn optimal_uniform_quantizer(bits: u32) -> Result<QuantizerSpec> {
    make_uniform_quantizer(bits, optimal_step(bits)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn uniform_construction() {
        let q = make_uniform_quantizer(1, 2.0).unwrap();
        assert_eq!(q.finite_thresholds(), &[0.0]);
        assert_eq!(q.levels(), &[-1.0, 1.0]);
        let q = make_uniform_quantizer(2, 1.0).unwrap();
        assert_eq!(q.finite_thresholds(), &[-1.0, 0.0, 1.0]);
        assert_eq!(q.levels(), &[-1.5, -0.5, 0.5, 1.5]);
        let q = make_uniform_quantizer(3, 0.586).unwrap();
        assert_eq!(q.finite_thresholds().len(), 7);
        assert!((q.finite_thresholds()[6] - 3.0 * 0.586).abs() < 1e-15);
        assert!(q.is_symmetric());
        assert!(make_uniform_quantizer(0, 1.0).is_err());
        assert!(make_uniform_quantizer(9, 1.0).is_err());
        assert!(make_uniform_quantizer(2, 0.0).is_err());
    }

    #[test]
    fn scalar_quantization() {
        let q1 = make_uniform_quantizer(1, 2.0).unwrap();
        assert_eq!(quantize_real(&q1, 0.7).unwrap(), 1.0);
        assert_eq!(quantize_real(&q1, -0.0).unwrap(), -1.0);
        assert_eq!(quantize_real(&q1, 0.0).unwrap(), -1.0);
        assert!(quantize_real(&q1, f64::NAN).is_err());
        let q2 = make_uniform_quantizer(2, 1.0).unwrap();
        assert_eq!(quantize_real(&q2, 2.3).unwrap(), 1.5);
        assert_eq!(quantize_real(&q2, 1.0).unwrap(), 0.5);
    }

    #[test]
    fn complex_quantization() {
        let q1 = make_uniform_quantizer(1, 2.0).unwrap();
        let y = quantize_complex_vector(&q1, &CVector::from_vec(vec![c(0.7, -1.2)])).unwrap();
        assert_eq!(y[0], c(1.0, -1.0));
        let q2 = make_uniform_quantizer(2, 1.0).unwrap();
        let y = quantize_complex_vector(&q2, &CVector::from_vec(vec![c(0.2, 0.2), c(-3.0, 0.6)])).unwrap();
        assert_eq!(y[0], c(0.5, 0.5));
        assert_eq!(y[1], c(-1.5, 0.5));
        assert!(quantize_complex_vector(&q2, &CVector::from_vec(vec![c(0.0, f64::NAN)])).is_err());
    }

    #[test]
    fn rounded_grid_levels() {
        let q = make_theorem1_quantizer(2, &[-1.0, 0.0, 1.0]).unwrap();
        assert_eq!(q.levels(), &[-1.0, -1.0, 1.0, 1.0]);
        let q = make_theorem1_quantizer(3, &[-1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5]).unwrap();
        assert_eq!(q.levels(), &[-1.5, -1.5, -1.0, -0.5, 0.5, 1.0, 1.5, 1.5]);
        assert!(matches!(make_theorem1_quantizer(1, &[0.0]), Err(Error::DegenerateLevels(_))));
        assert!(make_theorem1_quantizer(2, &[-1.0, 0.0, 2.0]).is_err());
    }

    #[test]
    fn agc() {
        let r = CVector::from_vec(vec![c(2.0, 2.0), c(-2.0, 2.0)]);
        let (s, g) = agc_scale(&r, 1.0).unwrap();
        assert!((g - 0.5).abs() < 1e-15);
        assert!((s[0] - c(1.0, 1.0)).norm() < 1e-15);
        let (s2, g2) = agc_scale(&s, 1.0).unwrap();
        assert!((g2 - 1.0).abs() < 1e-15);
        assert_eq!(s2, s);
        assert!(agc_scale(&CVector::zeros(2), 1.0).is_err());
        assert_eq!(agc_gains(&[2.0, 2.0], 1.0).unwrap(), vec![1.0, 1.0]);
        assert!(agc_gains(&[0.0], 1.0).is_err());
    }

    #[test]
    fn one_bit_distortion_and_step() {
        let c1 = (2.0 / PI).sqrt();
        let q = make_uniform_quantizer(1, 2.0 * c1).unwrap();
        assert!((distortion_factor(&q) - (1.0 - 2.0 / PI)).abs() < 1e-10);
        let d = optimal_step(1).unwrap();
        assert!((d / 2.0 - c1).abs() < 1e-7);
    }

    #[test]
    fn optimal_steps_frozen() {
        // Frozen from an independent erf-based grid scan + Brent minimization.
        assert!((optimal_step(2).unwrap() - 0.995_687).abs() < 1e-5);
        assert!((optimal_step(3).unwrap() - 0.586_0).abs() < 5e-4);
    }

    #[test]
    fn rescaled_spec_commutes_with_scaling() {
        let q = optimal_uniform_quantizer(2).unwrap();
        let s = q.rescaled(2.0_f64.sqrt()).unwrap();
        for x in [-2.1, -0.3, 0.05, 0.9, 3.3] {
            let lhs = s.apply(x);
            let rhs = q.apply(x * 2.0_f64.sqrt()) / 2.0_f64.sqrt();
            assert!((lhs - rhs).abs() < 1e-15);
        }
    }

    #[test]
    fn serde_forms() {
        let q: QuantizerSpec = serde_json::from_str(r#"{"bits":2,"step":1.0}"#).unwrap();
        assert_eq!(q.levels(), &[-1.5, -0.5, 0.5, 1.5]);
        let q: QuantizerSpec = serde_json::from_str(r#"{"bits":1}"#).unwrap();
        assert!((q.levels()[1] - (2.0 / PI).sqrt()).abs() < 1e-7);
        let q: QuantizerSpec = serde_json::from_str(r#"{"bits":1,"thresholds":[0.0],"levels":[-1.0,1.0]}"#).unwrap();
        assert_eq!(q.step(), None);
        let back: QuantizerSpec = serde_json::from_str(&serde_json::to_string(&q).unwrap()).unwrap();
        assert_eq!(back, q);
        assert!(serde_json::from_str::<QuantizerSpec>(r#"{"bits":12}"#).is_err());
    }
}
