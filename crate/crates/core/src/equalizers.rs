//! Linear equalizers `s_hat = G y` built from the different quantization models.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::hermite::{cqq_closed_form, HermiteExpansion};
use crate::linalg::{self, asin_c, scale_rows};
use crate::linear_models::{aqnm_gram, aqnm_gram_printed, c_rr, check_channel, modified_gram, normalized_correlation};
use crate::{CMatrix, CVector, Error, Result};

/// Model an equalizer matrix was derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EqualizerKind {
    Aqnm,
    Modified,
    Bussgang1Bit,
    Sohe,
    Elmmse,
    Zf,
}

/// Equalizer selection as written in experiment configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct EqualizerChoice {
    pub kind: EqualizerKind,
    pub normalize: bool,
}

impl EqualizerChoice {
    pub const ALL: [&'static str; 8] = ["aqnm", "modified", "b1bit", "n-aqnm", "nb1bit", "sohe", "elmmse", "zf"];

    pub fn as_str(&self) -> &'static str {
        use EqualizerKind::*;
        match (self.kind, self.normalize) {
            (Aqnm, false) => "aqnm",
            (Aqnm, true) => "n-aqnm",
            (Modified, _) => "modified",
            (Bussgang1Bit, false) => "b1bit",
            (Bussgang1Bit, true) => "nb1bit",
            (Sohe, _) => "sohe",
            (Elmmse, _) => "elmmse",
            (Zf, _) => "zf",
        }
    }
}

impl FromStr for EqualizerChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        use EqualizerKind::*;
        let (kind, normalize) = match s {
            "aqnm" => (Aqnm, false),
            "n-aqnm" => (Aqnm, true),
            "modified" => (Modified, false),
            "b1bit" => (Bussgang1Bit, false),
            "nb1bit" => (Bussgang1Bit, true),
            "sohe" => (Sohe, false),
            "elmmse" => (Elmmse, false),
            "zf" => (Zf, false),
            other => return Err(Error::Config(format!("unknown equalizer '{other}'"))),
        };
        Ok(Self { kind, normalize })
    }
}

impl TryFrom<String> for EqualizerChoice {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EqualizerChoice> for String {
    fn from(c: EqualizerChoice) -> String {
        c.as_str().to_string()
    }
}

impl fmt::Display for EqualizerChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An `N x K` equalizer matrix.
#[derive(Debug, Clone)]
pub struct EqualizerMatrix {
    pub g: CMatrix,
    pub kind: EqualizerKind,
    /// Rescale outputs to block energy `N` (N-LMMSE / NB-LMMSE).
    pub normalize: bool,
    /// Scaling coefficient used by e-LMMSE and SOHE builders.
    pub lambda: Option<f64>,
}

impl EqualizerMatrix {
    fn new(g: CMatrix, kind: EqualizerKind) -> Self {
        Self { g, kind, normalize: false, lambda: None }
    }

    pub fn normalized(mut self, on: bool) -> Self {
        self.normalize = on;
        self
    }
}

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// `H^H A^{-1}` for Hermitian positive definite `A`.
fn h_adj_inv(h: &CMatrix, a: &CMatrix) -> Result<CMatrix> {
    Ok(linalg::solve_hpd(a, h)?.adjoint())
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::invalid(format!("rho must be in [0, 1), got {rho}")));
    }
    Ok(())
}

/// Classical LMMSE `H^H (HH^H + N0 I)^{-1}`.
pub fn lmmse_classical(h: &CMatrix, n0: f64) -> Result<EqualizerMatrix> {
    let g = h_adj_inv(h, &c_rr(h, n0)?)?;
    Ok(EqualizerMatrix::new(g, EqualizerKind::Aqnm))
}

/// AQNM-LMMSE `H^H (N0 I + HH^H + rho diag(HH^H))^{-1}`, i.e. the Wiener
/// filter of the additive model `y = r + q` with `C_qq = rho diag(HH^H)`.
pub fn lmmse_aqnm(h: &CMatrix, n0: f64, rho: f64) -> Result<EqualizerMatrix> {
    check_rho(rho)?;
    check_channel(h, n0)?;
    // D + HH^H with diagonal D: H^H (D + HH^H)^{-1} = (I + H^H D^{-1} H)^{-1} H^H D^{-1}
    let d_inv: Vec<f64> =
        (0..h.nrows()).map(|k| 1.0 / (n0 + rho * h.row(k).iter().map(|z| z.norm_sqr()).sum::<f64>())).collect();
    if d_inv.iter().any(|v| !v.is_finite()) {
        return h_adj_inv(h, &aqnm_gram(h, n0, rho)).map(|g| EqualizerMatrix::new(g, EqualizerKind::Aqnm));
    }
    let hd = linalg::scale_cols(&h.adjoint(), &d_inv);
    let small = CMatrix::identity(h.ncols(), h.ncols()) + &hd * h;
    let g = linalg::solve_hpd(&small, &hd)?;
    Ok(EqualizerMatrix::new(g, EqualizerKind::Aqnm))
}

/// AQNM-LMMSE with the off-diagonal loading `N0 I + HH^H + rho nondiag(HH^H)`.
///
/// The Gram matrix is indefinite once `rho` times the largest eigenvalue of
/// `HH^H` exceeds roughly `N0`, so it is inverted by LU and may be singular.
pub fn lmmse_aqnm_printed(h: &CMatrix, n0: f64, rho: f64) -> Result<EqualizerMatrix> {
    check_rho(rho)?;
    c_rr(h, n0)?;
    let gram = aqnm_gram_printed(h, n0, rho);
    let sol = gram.lu().solve(h).ok_or_else(|| Error::Singular("AQNM Gram matrix".into()))?;
    Ok(EqualizerMatrix::new(sol.adjoint(), EqualizerKind::Aqnm))
}

/// Modified-AQNM `(1 - rho)^{-1} H^H (C_rr + rho/(1 - rho) diag(C_rr))^{-1}`.
pub fn lmmse_modified(h: &CMatrix, n0: f64, rho: f64) -> Result<EqualizerMatrix> {
    check_rho(rho)?;
    let r = c_rr(h, n0)?;
    let g = h_adj_inv(h, &modified_gram(&r, rho))? * re(1.0 / (1.0 - rho));
    Ok(EqualizerMatrix::new(g, EqualizerKind::Modified))
}

/// One-bit Bussgang LMMSE `C_sy C_yy^{-1}` for the observation
/// `y = (sgn Re r + j sgn Im r)/sqrt(2)`.
pub fn lmmse_bussgang_1bit(h: &CMatrix, n0: f64) -> Result<EqualizerMatrix> {
    let r = c_rr(h, n0)?;
    let (corr, d) = normalized_correlation(&r)?;
    let inv_sqrt: Vec<f64> = d.iter().map(|x| 1.0 / x.sqrt()).collect();
    let c_ys = scale_rows(h, &inv_sqrt) * re((2.0 / PI).sqrt());
    let c_yy = asin_c(&corr) * re(2.0 / PI);
    let sol = match linalg::solve_hpd(&c_yy, &c_ys) {
        Ok(s) => s,
        Err(_) => c_yy.lu().solve(&c_ys).ok_or_else(|| Error::Singular("arcsine covariance".into()))?,
    };
    Ok(EqualizerMatrix::new(sol.adjoint(), EqualizerKind::Bussgang1Bit))
}

/// [`lmmse_bussgang_1bit`] guarded by the quantizer resolution.
pub fn lmmse_bussgang(h: &CMatrix, n0: f64, bits: u32) -> Result<EqualizerMatrix> {
    if bits != 1 {
        return Err(Error::invalid(format!("Bussgang arcsine equalizer needs a 1-bit quantizer, got {bits} bits")));
    }
    lmmse_bussgang_1bit(h, n0)
}

/// Maps a one-bit quantizer output to the unit-power sign observation used by
/// [`lmmse_bussgang_1bit`].
pub fn sign_observation(y: &CVector) -> CVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let sg = |x: f64| if x > 0.0 { s } else { -s };
    y.map(|z| Complex64::new(sg(z.re), sg(z.im)))
}

/// SOHE-LMMSE `lambda^{-1} H^H (HH^H + N0 I + lambda^{-2} C_qq)^{-1}`.
pub fn lmmse_sohe(h: &CMatrix, n0: f64, exp: &HermiteExpansion, sigma_r2: f64) -> Result<EqualizerMatrix> {
    let lam = exp.lambda;
    if !(lam > 0.0) {
        return Err(Error::invalid(format!("lambda must be positive, got {lam}")));
    }
    let k = h.nrows();
    let gram = c_rr(h, n0)? + cqq_closed_form(exp.omega2, sigma_r2, k) * re(1.0 / (lam * lam));
    let g = h_adj_inv(h, &gram)? * re(1.0 / lam);
    Ok(EqualizerMatrix { g, kind: EqualizerKind::Sohe, normalize: false, lambda: Some(lam) })
}

/// Mean received power per antenna, `mean(diag(C_rr))`.
pub fn mean_receive_power(h: &CMatrix, n0: f64) -> f64 {
    let d: f64 = h.iter().map(|z| z.norm_sqr()).sum();
    d / h.nrows() as f64 + n0
}

/// e-LMMSE `(1/lambda) diag(G H)^{-1} G`.
pub fn elmmse(g_aqnm: &EqualizerMatrix, h: &CMatrix, lambda: f64) -> Result<EqualizerMatrix> {
    if g_aqnm.kind != EqualizerKind::Aqnm {
        return Err(Error::invalid("e-LMMSE is built from an AQNM equalizer"));
    }
    if !(lambda > 0.0) {
        return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
    }
    if g_aqnm.g.ncols() != h.nrows() || g_aqnm.g.nrows() != h.ncols() {
        return Err(Error::dims("G and H shapes do not match"));
    }
    let n = h.ncols();
    let mut g = g_aqnm.g.clone();
    for i in 0..n {
        let gh_ii: Complex64 = (0..h.nrows()).map(|k| g_aqnm.g[(i, k)] * h[(k, i)]).sum();
        if gh_ii.norm() == 0.0 {
            return Err(Error::DegenerateDiagonal(i));
        }
        let scale = Complex64::new(1.0, 0.0) / (gh_ii * lambda);
        for k in 0..g.ncols() {
            g[(i, k)] *= scale;
        }
    }
    Ok(EqualizerMatrix { g, kind: EqualizerKind::Elmmse, normalize: false, lambda: Some(lambda) })
}

/// `Theta = G_sohe pinv(G_aqnm)`.
pub fn model_transform_theta(g_sohe: &EqualizerMatrix, g_aqnm: &EqualizerMatrix) -> Result<CMatrix> {
    if g_sohe.g.shape() != g_aqnm.g.shape() {
        return Err(Error::dims("equalizers have different shapes"));
    }
    let n = g_aqnm.g.nrows();
    let svd = nalgebra::SVD::new(g_aqnm.g.clone(), false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = (g_aqnm.g.nrows().max(g_aqnm.g.ncols()) as f64) * f64::EPSILON * smax;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < n {
        return Err(Error::Singular(format!("G_aqnm has rank {rank} < {n}")));
    }
    Ok(&g_sohe.g * linalg::pinv(&g_aqnm.g)?)
}

/// Zero-forcing left inverse `(H^H H)^{-1} H^H`.
pub fn zf(h_est: &CMatrix) -> Result<EqualizerMatrix> {
    let (k, n) = h_est.shape();
    if k < n {
        return Err(Error::dims(format!("ZF needs a tall channel, got {k}x{n}")));
    }
    let gram = h_est.adjoint() * h_est;
    let g = match linalg::solve_hpd(&gram, &h_est.adjoint()) {
        Ok(g) => g,
        Err(_) => return Err(Error::Singular("channel estimate is rank deficient".into())),
    };
    Ok(EqualizerMatrix::new(g, EqualizerKind::Zf))
}

/// `s_hat = G y`, rescaled to `||s_hat|| = sqrt(N)` when normalization is on.
pub fn equalize(g: &EqualizerMatrix, y: &CVector) -> Result<CVector> {
    if g.g.ncols() != y.len() {
        return Err(Error::dims(format!("G has {} columns, y has {} entries", g.g.ncols(), y.len())));
    }
    let s = &g.g * y;
    if g.normalize {
        let norm = s.norm();
        if norm == 0.0 {
            return Err(Error::invalid("cannot normalize a zero output"));
        }
        let scale = re((s.len() as f64).sqrt() / norm);
        return Ok(s * scale);
    }
    Ok(s)
}

/// Diagonal of `G H`.
pub fn effective_gains(g: &EqualizerMatrix, h: &CMatrix) -> Vec<Complex64> {
    (&g.g * h).diagonal().iter().cloned().collect()
}
