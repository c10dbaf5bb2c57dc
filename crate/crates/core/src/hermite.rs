//! Hermite expansion of a quantizer and the second-order (SOHE) model
//! `y = lambda r + q`.
//!
//! Coefficients are defined for an input with per-real-component variance
//! 1/2 (weight `exp(-x^2)`), so `Q(x) = sum_l omega_l H_l(x)` with physicists'
//! Hermite polynomials `H_l`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::quadrature::integrate;
use crate::quantization::QuantizerSpec;
use crate::{CMatrix, CVector, Error, Result};

/// Largest supported coefficient order.
pub const MAX_ORDER: u32 = 12;

/// Physicists' Hermite polynomial `H_n(x)` by recurrence.
pub fn hermite_poly(n: u32, x: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, 2.0 * x);
    if n == 0 {
        return h0;
    }
    for k in 1..n {
        let h2 = 2.0 * x * h1 - 2.0 * k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

/// `d^n/dx^n exp(-x^2) = (-1)^n H_n(x) exp(-x^2)`, zero at infinity.
fn gauss_derivative(n: u32, x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * hermite_poly(n, x) * (-x * x).exp()
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `omega_l = (-1)^l / (sqrt(pi) 2^l l!) * sum_m x_m [D^{l-1} exp(-x^2)]_{tau_m}^{tau_{m+1}}`.
pub fn hermite_coefficient(spec: &QuantizerSpec, l: u32) -> Result<f64> {
    if l == 0 || l > MAX_ORDER {
        return Err(Error::invalid(format!("Hermite order must be in 1..={MAX_ORDER}, got {l}")));
    }
    let t = spec.thresholds();
    let x = spec.levels();
    let term = |m: usize| x[m] * (gauss_derivative(l - 1, t[m + 1]) - gauss_derivative(l - 1, t[m]));
    // mirrored bins summed in pairs so odd/even cancellations are exact
    let n = x.len();
    let sum: f64 = (0..n / 2).map(|m| term(m) + term(n - 1 - m)).sum();
    let sign = if l.is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(sign / (PI.sqrt() * 2f64.powi(l as i32) * factorial(l)) * sum)
}

/// `lambda_b = (1/sqrt(pi)) sum_m x_m (exp(-tau_m^2) - exp(-tau_{m+1}^2))`.
pub fn lambda_closed_form(spec: &QuantizerSpec) -> f64 {
    let t = spec.thresholds();
    let e = |x: f64| if x.is_infinite() { 0.0 } else { (-x * x).exp() };
    spec.levels().iter().enumerate().map(|(m, &xm)| xm * (e(t[m]) - e(t[m + 1]))).sum::<f64>() / PI.sqrt()
}

/// Half-sum form of [`lambda_closed_form`] valid for symmetric quantizers:
/// `(2/sqrt(pi)) sum_{m >= M/2} x_m (exp(-tau_m^2) - exp(-tau_{m+1}^2))`.
pub fn lambda_symmetric(spec: &QuantizerSpec) -> Result<f64> {
    if !spec.is_symmetric() {
        return Err(Error::invalid("half-sum form requires a symmetric quantizer"));
    }
    let t = spec.thresholds();
    let m = spec.num_levels();
    let e = |x: f64| if x.is_infinite() { 0.0 } else { (-x * x).exp() };
    let s: f64 = (m / 2..m).map(|i| spec.levels()[i] * (e(t[i]) - e(t[i + 1]))).sum();
    Ok(2.0 * s / PI.sqrt())
}

/// Second-order Hermite model of a quantizer.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteExpansion {
    pub bits: u32,
    pub omega1: f64,
    pub omega2: f64,
    /// `2 omega1`.
    pub lambda: f64,
    /// Quantizer the coefficients were computed for (in the Hermite domain).
    pub source_spec: QuantizerSpec,
}

impl HermiteExpansion {
    /// Expansion of `spec` applied directly to a unit-complex-variance input.
    pub fn new(spec: &QuantizerSpec) -> Self {
        let omega1 = hermite_coefficient(spec, 1).expect("order 1 is valid");
        let omega2 = hermite_coefficient(spec, 2).expect("order 2 is valid");
        Self { bits: spec.bits(), omega1, omega2, lambda: 2.0 * omega1, source_spec: spec.clone() }
    }

    /// Expansion of `spec` when its input has per-real-component variance
    /// `real_variance` (e.g. 1 after ideal AGC to the quantizer's design
    /// variance). `lambda` is then the gain of `y = lambda r + q` in the
    /// original input units.
    pub fn at_input_variance(spec: &QuantizerSpec, real_variance: f64) -> Result<Self> {
        if !(real_variance > 0.0) {
            return Err(Error::invalid("input variance must be positive"));
        }
        Ok(Self::new(&spec.rescaled((2.0 * real_variance).sqrt())?))
    }

    /// Expansion of an ideal (unquantized) front end: `lambda = 1`, no distortion.
    pub fn ideal() -> Self {
        let spec = crate::quantization::make_uniform_quantizer(crate::quantization::MAX_BITS, 1.0 / 32.0)
            .expect("valid uniform quantizer");
        Self { bits: 0, omega1: 0.5, omega2: 0.0, lambda: 1.0, source_spec: spec }
    }

    /// Expansion of `spec` at its design input (unit-variance real components).
    pub fn at_design_variance(spec: &QuantizerSpec) -> Self {
        Self::at_input_variance(spec, 1.0).expect("unit variance is valid")
    }
}

/// `q_b = 4 omega2 (Re(r)^2 + j Im(r)^2) - 2 omega2 (1 + j)`.
pub fn sohe_distortion(exp: &HermiteExpansion, r: &CVector) -> CVector {
    let w = exp.omega2;
    r.map(|z| Complex64::new(4.0 * w * z.re * z.re - 2.0 * w, 4.0 * w * z.im * z.im - 2.0 * w))
}

/// Scalar distortion `omega2 H_2(x)` for one real dimension.
pub fn sohe_distortion_real(exp: &HermiteExpansion, x: f64) -> f64 {
    exp.omega2 * (4.0 * x * x - 2.0)
}

/// `lambda r + q_b(r)`.
pub fn sohe_predict(exp: &HermiteExpansion, r: &CVector) -> CVector {
    r * Complex64::new(exp.lambda, 0.0) + sohe_distortion(exp, r)
}

/// Asymptotic distortion covariance as published:
/// `4 omega2^2 (4 sigma^4 I + (2 sigma^4 - sigma^2 + 1) 11^T)`.
pub fn cqq_closed_form(omega2: f64, sigma_r2: f64, k: usize) -> CMatrix {
    let s4 = sigma_r2 * sigma_r2;
    let scale = 4.0 * omega2 * omega2;
    let off = 2.0 * s4 - sigma_r2 + 1.0;
    CMatrix::from_fn(k, k, |i, j| {
        let d = if i == j { 4.0 * s4 } else { 0.0 };
        Complex64::new(scale * (d + off), 0.0)
    })
}

/// Covariance of [`sohe_distortion`] for `r ~ CN(0, sigma^2 I)` with the
/// constant term on both real dimensions, evaluated from the Gaussian
/// moments `E[a^2] = sigma^2/2`, `E[a^4] = 3 sigma^4/4`:
/// `4 omega2^2 (4 sigma^4 I + 2 (sigma^2 - 1)^2 11^T)`.
pub fn cqq_gaussian_moments(omega2: f64, sigma_r2: f64, k: usize) -> CMatrix {
    let s4 = sigma_r2 * sigma_r2;
    let scale = 4.0 * omega2 * omega2;
    let off = 2.0 * (sigma_r2 - 1.0).powi(2);
    CMatrix::from_fn(k, k, |i, j| {
        let d = if i == j { 4.0 * s4 } else { 0.0 };
        Complex64::new(scale * (d + off), 0.0)
    })
}

/// `E[Q(x)^2]` for `x` with density `exp(-x^2)/sqrt(pi)`.
fn output_power(spec: &QuantizerSpec) -> f64 {
    let t = spec.thresholds();
    spec.levels()
        .iter()
        .enumerate()
        .map(|(m, &xm)| xm * xm * integrate(|x| (-x * x).exp() / PI.sqrt(), t[m], t[m + 1], 1e-14))
        .sum()
}

/// Weighted L2 norm of `Q - sum_{l=1}^{order} omega_l H_l` under the
/// `exp(-x^2)/sqrt(pi)` weight.
pub fn truncation_residual(spec: &QuantizerSpec, order: u32) -> Result<f64> {
    let mut captured = 0.0;
    for l in 1..=order {
        let w = hermite_coefficient(spec, l)?;
        captured += w * w * 2f64.powi(l as i32) * factorial(l);
    }
    Ok((output_power(spec) - captured).max(0.0).sqrt())
}

/// One row of the Hermite diagnostic table.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteRow {
    pub bits: u32,
    pub omega1: f64,
    pub omega2: f64,
    pub lambda: f64,
    /// `L = 2` truncation residual.
    pub residual_l2: f64,
    /// Largest `|q_b(x)|` over `|x| <= 3` standard deviations.
    pub max_abs_q: f64,
}

impl HermiteRow {
    pub fn from_expansion(exp: &HermiteExpansion) -> Result<Self> {
        // Hermite-domain std is 1/sqrt(2); H_2 peaks at the window edge
        let xmax = 3.0 / 2f64.sqrt();
        let max_abs_q = sohe_distortion_real(exp, xmax).abs().max(sohe_distortion_real(exp, 0.0).abs());
        Ok(Self {
            bits: exp.bits,
            omega1: exp.omega1,
            omega2: exp.omega2,
            lambda: exp.lambda,
            residual_l2: truncation_residual(&exp.source_spec, 2)?,
            max_abs_q,
        })
    }
}

/// Checks that `|omega2|` is non-increasing and `|lambda - 1|` strictly
/// decreasing over the given expansions (ordered by resolution).
pub fn check_limit_trends(rows: &[HermiteRow]) -> Result<()> {
    for w in rows.windows(2) {
        if w[1].omega2.abs() > w[0].omega2.abs() + 1e-12 {
            return Err(Error::invalid(format!("|omega2| increases from b={} to b={}", w[0].bits, w[1].bits)));
        }
        if (w[1].lambda - 1.0).abs() >= (w[0].lambda - 1.0).abs() {
            return Err(Error::invalid(format!("lambda does not approach 1 from b={} to b={}", w[0].bits, w[1].bits)));
        }
    }
    Ok(())
}

/// Hermite table of the Gaussian-optimal uniform quantizers at their design
/// input variance, with the limit trends checked.
pub fn verify_theorem2_limits(bits: &[u32]) -> Result<Vec<HermiteRow>> {
    let rows = bits
        .iter()
        .map(|&b| {
            let spec = crate::quantization::optimal_uniform_quantizer(b)?;
            HermiteRow::from_expansion(&HermiteExpansion::at_design_variance(&spec))
        })
        .collect::<Result<Vec<_>>>()?;
    check_limit_trends(&rows)?;
    Ok(rows)
}
