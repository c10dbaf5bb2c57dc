//! Covariance algebra of the AQNM, modified-AQNM and Bussgang linear models.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::hermite::lambda_closed_form;
use crate::linalg::{asin_c, diag_part, eye, nondiag_part, real_diag_matrix, real_diagonal, scale_cols, scale_rows};
use crate::quantization::QuantizerSpec;
use crate::{CMatrix, Error, Result};

/// Covariances of a linear quantization model `y = C_yr C_rr^{-1} r + e`.
#[derive(Debug, Clone)]
pub struct ModelCovariances {
    pub c_rr: CMatrix,
    pub c_yr: CMatrix,
    pub c_ee: CMatrix,
    /// Diagonal of `Lambda_b` when the model carries one.
    pub lambda_matrix: Option<CMatrix>,
}

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub(crate) fn check_channel(h: &CMatrix, n0: f64) -> Result<()> {
    let (k, n) = h.shape();
    if k < n || n == 0 {
        return Err(Error::dims(format!("channel must be K x N with K >= N >= 1, got {k}x{n}")));
    }
    if !(n0 >= 0.0) {
        return Err(Error::invalid("N0 must be non-negative"));
    }
    Ok(())
}

/// `HH^H + N0 I`.
pub fn c_rr(h: &CMatrix, n0: f64) -> Result<CMatrix> {
    check_channel(h, n0)?;
    Ok(h * h.adjoint() + eye(h.nrows()) * re(n0))
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::invalid(format!("rho must be in (0, 1), got {rho}")));
    }
    Ok(())
}

/// `C_yr = (1 - rho) C_rr`, `C_ee = (1 - rho)^2 N0 I + (1 - rho) rho diag(C_rr)`.
pub fn aqnm_covariances(c_rr: &CMatrix, rho: f64, n0: f64) -> Result<ModelCovariances> {
    check_rho(rho)?;
    let k = c_rr.nrows();
    let c_yr = c_rr * re(1.0 - rho);
    let c_ee = eye(k) * re((1.0 - rho).powi(2) * n0) + diag_part(c_rr) * re((1.0 - rho) * rho);
    Ok(ModelCovariances { c_rr: c_rr.clone(), c_yr, c_ee, lambda_matrix: None })
}

/// `D^{-1/2} C_rr D^{-1/2}` with `D = diag(C_rr)`.
pub fn normalized_correlation(c_rr: &CMatrix) -> Result<(CMatrix, Vec<f64>)> {
    let d = real_diagonal(c_rr);
    if d.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Singular("C_rr has a non-positive diagonal".into()));
    }
    let inv_sqrt: Vec<f64> = d.iter().map(|x| 1.0 / x.sqrt()).collect();
    Ok((scale_cols(&scale_rows(c_rr, &inv_sqrt), &inv_sqrt), d))
}

/// One-bit Bussgang covariances for the output `(sgn Re r + j sgn Im r)/sqrt(2)`.
pub fn bussgang_covariances(c_rr: &CMatrix, n0: f64) -> Result<ModelCovariances> {
    if crate::linalg::min_eigenvalue(c_rr) <= 0.0 {
        return Err(Error::Singular("C_rr is not positive definite".into()));
    }
    let (corr, d) = normalized_correlation(c_rr)?;
    let inv_sqrt: Vec<f64> = d.iter().map(|x| 1.0 / x.sqrt()).collect();
    let c_yr = scale_rows(c_rr, &inv_sqrt) * re((2.0 / PI).sqrt());
    let inv_d: Vec<f64> = d.iter().map(|x| n0 / x).collect();
    let c_ee = (asin_c(&corr) - &corr + real_diag_matrix(&inv_d)) * re(2.0 / PI);
    Ok(ModelCovariances { c_rr: c_rr.clone(), c_yr, c_ee, lambda_matrix: None })
}

/// Per-antenna Bussgang gain of `spec` at input covariance diagonal `D`:
/// `D^{-1/2} sum_m (x_m / sqrt(pi)) (exp(-tau_m^2 / D) - exp(-tau_{m+1}^2 / D))`.
pub fn generalized_lambda_matrix(spec: &QuantizerSpec, c_rr: &CMatrix) -> Result<CMatrix> {
    let d = real_diagonal(c_rr);
    let lam = d
        .iter()
        .map(|&dk| {
            if dk > 0.0 {
                Ok(lambda_closed_form(&spec.rescaled(dk.sqrt())?))
            } else {
                Err(Error::invalid("non-positive diagonal in C_rr"))
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(real_diag_matrix(&lam))
}

/// Gram matrix of the AQNM equalizer as printed: `N0 I + HH^H + rho nondiag(HH^H)`.
pub fn aqnm_gram_printed(h: &CMatrix, n0: f64, rho: f64) -> CMatrix {
    let hh = h * h.adjoint();
    eye(h.nrows()) * re(n0) + &hh + nondiag_part(&hh) * re(rho)
}

/// Gram matrix of the additive AQNM model `y = r + q` with
/// `C_qq = rho diag(HH^H)`: `N0 I + HH^H + rho diag(HH^H)`.
pub fn aqnm_gram(h: &CMatrix, n0: f64, rho: f64) -> CMatrix {
    let hh = h * h.adjoint();
    eye(h.nrows()) * re(n0) + &hh + diag_part(&hh) * re(rho)
}

/// Gram matrix of the modified-AQNM equalizer: `C_rr + rho/(1 - rho) diag(C_rr)`.
pub fn modified_gram(c_rr: &CMatrix, rho: f64) -> CMatrix {
    c_rr + diag_part(c_rr) * re(rho / (1.0 - rho))
}
