//! Constellations, Rayleigh channels, noise calibration and the quantized
//! uplink `y = Q(Hs + v)`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::real_diagonal;
use crate::quantization::{agc_gains, QuantizerSpec};
use crate::{CMatrix, CVector, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstellationName {
    Bpsk,
    Qpsk,
    Psk8,
    Qam16,
    Qam64,
}

impl ConstellationName {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConstellationName::Bpsk => "bpsk",
            ConstellationName::Qpsk => "qpsk",
            ConstellationName::Psk8 => "psk8",
            ConstellationName::Qam16 => "qam16",
            ConstellationName::Qam64 => "qam64",
        }
    }

    /// Constellation with `order` points.
    pub fn from_order(order: usize) -> Result<Self> {
        Ok(match order {
            2 => ConstellationName::Bpsk,
            4 => ConstellationName::Qpsk,
            8 => ConstellationName::Psk8,
            16 => ConstellationName::Qam16,
            64 => ConstellationName::Qam64,
            _ => return Err(Error::invalid(format!("no constellation of order {order}"))),
        })
    }
}

impl FromStr for ConstellationName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bpsk" => Ok(ConstellationName::Bpsk),
            "qpsk" => Ok(ConstellationName::Qpsk),
            "psk8" | "8psk" => Ok(ConstellationName::Psk8),
            "qam16" | "16qam" => Ok(ConstellationName::Qam16),
            "qam64" | "64qam" => Ok(ConstellationName::Qam64),
            other => Err(Error::Config(format!("unsupported constellation '{other}'"))),
        }
    }
}

impl fmt::Display for ConstellationName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Unit-energy Gray-mapped alphabet; `points[label]` is the point carrying
/// the bit pattern `label` (MSB first).
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    pub name: ConstellationName,
    pub points: Vec<Complex64>,
    pub bits_per_symbol: u32,
}

fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

/// Gray-labelled PAM levels `2i - (L - 1)`, indexed by label.
fn gray_pam(levels: usize) -> Vec<f64> {
    let mut out = vec![0.0; levels];
    for i in 0..levels {
        out[gray(i)] = (2 * i) as f64 - (levels - 1) as f64;
    }
    out
}

pub fn make_constellation(name: ConstellationName) -> Constellation {
    let (points, bits) = match name {
        ConstellationName::Bpsk => (vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)], 1),
        ConstellationName::Psk8 => {
            let mut p = vec![Complex64::new(0.0, 0.0); 8];
            for k in 0..8 {
                p[gray(k)] = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / 8.0);
            }
            (p, 3)
        }
        ConstellationName::Qpsk | ConstellationName::Qam16 | ConstellationName::Qam64 => {
            let per_dim = match name {
                ConstellationName::Qpsk => 1,
                ConstellationName::Qam16 => 2,
                _ => 3,
            };
            let l = 1usize << per_dim;
            let pam = gray_pam(l);
            let scale = (2.0 * ((l * l - 1) as f64) / 3.0).sqrt();
            let mut p = Vec::with_capacity(l * l);
            for label in 0..l * l {
                let (hi, lo) = (label >> per_dim, label & (l - 1));
                p.push(Complex64::new(pam[hi] / scale, pam[lo] / scale));
            }
            (p, 2 * per_dim)
        }
    };
    Constellation { name, points, bits_per_symbol: bits }
}

impl Constellation {
    pub fn order(&self) -> usize {
        self.points.len()
    }

    /// Bits of `label`, MSB first.
    pub fn label_bits(&self, label: usize) -> impl Iterator<Item = u8> + '_ {
        (0..self.bits_per_symbol).rev().map(move |b| ((label >> b) & 1) as u8)
    }

    /// Nearest point index; ties go to the lowest index.
    pub fn nearest(&self, z: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Uniform random labels for `n` users.
    pub fn random_labels<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        (0..n).map(|_| rng.random_range(0..self.order())).collect()
    }

    pub fn symbols(&self, labels: &[usize]) -> CVector {
        CVector::from_iterator(labels.len(), labels.iter().map(|&l| self.points[l]))
    }
}

/// Per-entry nearest-point decisions and the corresponding Gray bits.
pub fn hard_decide(s_hat: &CVector, c: &Constellation) -> (Vec<usize>, Vec<u8>) {
    let labels: Vec<usize> = s_hat.iter().map(|&z| c.nearest(z)).collect();
    let bits = labels.iter().flat_map(|&l| c.label_bits(l)).collect();
    (labels, bits)
}

/// Draw from `CN(0, var)`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    Complex64::new(s * a, s * b)
}

/// `K x N` matrix of i.i.d. `CN(0, 1)` entries.
pub fn rayleigh_channel<R: Rng + ?Sized>(k: usize, n: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(k, n, |_, _| complex_gaussian(rng, 1.0))
}

/// `N0 = 1 / (bits_per_symbol 10^(EbN0/10))` for unit per-user received
/// symbol energy per antenna.
pub fn noise_variance_from_ebn0(ebn0_db: f64, c: &Constellation) -> f64 {
    1.0 / (c.bits_per_symbol as f64 * 10f64.powf(ebn0_db / 10.0))
}

/// One uplink configuration. `quantizer = None` models ideal ADCs.
#[derive(Debug, Clone)]
pub struct LinkScenario {
    pub h: CMatrix,
    pub n0: f64,
    pub quantizer: Option<QuantizerSpec>,
    pub constellation: Constellation,
}

impl LinkScenario {
    pub fn new(h: CMatrix, n0: f64, quantizer: Option<QuantizerSpec>, constellation: Constellation) -> Result<Self> {
        let (k, n) = h.shape();
        if n == 0 || k < n {
            return Err(Error::dims(format!("need K >= N >= 1, got K={k}, N={n}")));
        }
        if !(n0 > 0.0) {
            return Err(Error::invalid("N0 must be positive"));
        }
        Ok(Self { h, n0, quantizer, constellation })
    }

    pub fn n_tx(&self) -> usize {
        self.h.ncols()
    }

    pub fn n_rx(&self) -> usize {
        self.h.nrows()
    }

    /// Ideal AGC gains from `diag(HH^H) + N0`, unit variance per real component.
    pub fn agc_gains(&self) -> Vec<f64> {
        let d: Vec<f64> =
            (0..self.n_rx()).map(|k| self.h.row(k).iter().map(|z| z.norm_sqr()).sum::<f64>() + self.n0).collect();
        agc_gains(&d, 1.0).expect("received power is positive")
    }
}

/// Signals of one channel use.
#[derive(Debug, Clone)]
pub struct Received {
    /// Unquantized `Hs + v`.
    pub r: CVector,
    /// Quantizer output mapped back to the units of `r`, `Q(g r) / g`.
    pub y: CVector,
    /// Raw quantizer output `Q(g r)` on the quantizer's level grid.
    pub y_adc: CVector,
    /// Per-antenna AGC gains `g`.
    pub gains: Vec<f64>,
}

/// Quantize `r` behind ideal per-antenna AGC with the given gains.
pub fn quantize_with_agc(spec: Option<&QuantizerSpec>, r: &CVector, gains: &[f64]) -> Received {
    match spec {
        None => Received { r: r.clone(), y: r.clone(), y_adc: r.clone(), gains: gains.to_vec() },
        Some(q) => {
            let mut y = r.clone();
            let mut y_adc = r.clone();
            for k in 0..r.len() {
                let g = gains[k];
                let z = r[k] * g;
                let a = Complex64::new(q.apply(z.re), q.apply(z.im));
                y_adc[k] = a;
                y[k] = a / g;
            }
            Received { r: r.clone(), y, y_adc, gains: gains.to_vec() }
        }
    }
}

/// `r = Hs + v`, `y = Q(r)` behind ideal AGC.
pub fn transmit<R: Rng + ?Sized>(sc: &LinkScenario, s: &CVector, rng: &mut R) -> Result<Received> {
    if s.len() != sc.n_tx() {
        return Err(Error::dims(format!("s has {} entries, channel has {} columns", s.len(), sc.n_tx())));
    }
    let mut r = &sc.h * s;
    for z in r.iter_mut() {
        *z += complex_gaussian(rng, sc.n0);
    }
    let gains = sc.agc_gains();
    Ok(quantize_with_agc(sc.quantizer.as_ref(), &r, &gains))
}

/// Diagonal of `HH^H + N0 I` as used by the AGC.
pub fn receive_power(h: &CMatrix, n0: f64) -> Vec<f64> {
    real_diagonal(&(h * h.adjoint())).into_iter().map(|d| d + n0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantization::optimal_uniform_quantizer;
    use crate::rng::substream;

    #[test]
    fn qam16_layout() {
        let c = make_constellation(ConstellationName::Qam16);
        assert_eq!(c.order(), 16);
        let e: f64 = c.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / 16.0;
        assert!((e - 1.0).abs() < 1e-12);
        let mut dmin = f64::INFINITY;
        for i in 0..16 {
            for j in 0..i {
                dmin = dmin.min((c.points[i] - c.points[j]).norm());
            }
        }
        assert!((dmin - 2.0 / 10f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn all_constellations_are_centred_unit_energy_and_centrosymmetric() {
        for name in [
            ConstellationName::Bpsk,
            ConstellationName::Qpsk,
            ConstellationName::Psk8,
            ConstellationName::Qam16,
            ConstellationName::Qam64,
        ] {
            let c = make_constellation(name);
            let m = c.order() as f64;
            let mean: Complex64 = c.points.iter().sum::<Complex64>() / m;
            let e: f64 = c.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / m;
            assert!(mean.norm() < 1e-12, "{name}");
            assert!((e - 1.0).abs() < 1e-12, "{name}");
            for p in &c.points {
                assert!(c.points.iter().any(|q| (q + p).norm() < 1e-12), "{name}");
            }
            assert_eq!(c.order(), 1 << c.bits_per_symbol);
        }
    }

    #[test]
    fn gray_neighbours_differ_in_one_bit() {
        for name in [ConstellationName::Qam16, ConstellationName::Qam64, ConstellationName::Psk8] {
            let c = make_constellation(name);
            let mut dmin = f64::INFINITY;
            for i in 0..c.order() {
                for j in 0..i {
                    dmin = dmin.min((c.points[i] - c.points[j]).norm());
                }
            }
            for i in 0..c.order() {
                for j in 0..i {
                    if (c.points[i] - c.points[j]).norm() < dmin + 1e-9 {
                        assert_eq!((i ^ j).count_ones(), 1, "{name}: {i} {j}");
                    }
                }
            }
        }
    }

    #[test]
    fn decisions() {
        let c = make_constellation(ConstellationName::Qpsk);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let (l, _) = hard_decide(&CVector::from_vec(vec![Complex64::new(0.9, 0.1)]), &c);
        assert!((c.points[l[0]] - Complex64::new(s, s)).norm() < 1e-15);
        let q16 = make_constellation(ConstellationName::Qam16);
        let sy = q16.symbols(&(0..16).collect::<Vec<_>>());
        let (l, bits) = hard_decide(&sy, &q16);
        assert_eq!(l, (0..16).collect::<Vec<_>>());
        assert_eq!(bits.len(), 64);
        // equidistant from all four QPSK points
        let (l, _) = hard_decide(&CVector::from_vec(vec![Complex64::new(0.0, 0.0)]), &c);
        assert_eq!(l[0], 0);
    }

    #[test]
    fn noise_calibration() {
        let qpsk = make_constellation(ConstellationName::Qpsk);
        let q16 = make_constellation(ConstellationName::Qam16);
        assert!((noise_variance_from_ebn0(0.0, &qpsk) - 0.5).abs() < 1e-15);
        assert!((noise_variance_from_ebn0(10.0, &q16) - 0.025).abs() < 1e-15);
    }

    #[test]
    fn channel_statistics_and_determinism() {
        let mut rng = substream(1, 2, 3);
        let h = rayleigh_channel(128, 4, &mut rng);
        let h2 = rayleigh_channel(128, 4, &mut substream(1, 2, 3));
        assert_eq!(h, h2);
        for col in h.column_iter() {
            let v = col.iter().map(|z| z.norm_sqr()).sum::<f64>() / 128.0;
            assert!((v - 1.0).abs() < 0.35);
        }
    }

    #[test]
    fn one_bit_outputs_on_level_grid() {
        let mut rng = substream(4, 0, 0);
        let q = optimal_uniform_quantizer(1).unwrap();
        let c = make_constellation(ConstellationName::Qam16);
        let sc = LinkScenario::new(rayleigh_channel(8, 2, &mut rng), 0.1, Some(q.clone()), c.clone()).unwrap();
        let s = c.symbols(&c.random_labels(2, &mut rng));
        let rx = transmit(&sc, &s, &mut rng).unwrap();
        let x0 = q.levels()[1];
        for (k, z) in rx.y_adc.iter().enumerate() {
            assert!((z.re.abs() - x0).abs() < 1e-15 && (z.im.abs() - x0).abs() < 1e-15);
            assert!((rx.y[k] * rx.gains[k] - z).norm() < 1e-12);
        }
    }
}
