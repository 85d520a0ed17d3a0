//! The frustrated Ising ring.
//!
//! `N` spins (odd) on a ring with bond `j` joining sites `j` and `j + 1`
//! (site `N + 1` is site 1). Bond `N` is antiferromagnetic with strength
//! `J_R`, the two bonds adjacent to the middle site are weak ferromagnetic
//! bonds `J_L`, and every other bond is a strong ferromagnetic bond `J`.
//!
//! Computational basis states are indexed by integers: bit `j - 1` carries
//! site `j`, and a 0 bit is the `+1` eigenstate of Z.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_J_R: f64 = 0.45;
pub const DEFAULT_J_L: f64 = 0.5;
pub const DEFAULT_J: f64 = 1.0;

/// Exact low-energy data of the problem Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumConstants {
    pub e0: f64,
    pub e1: f64,
    pub gap: f64,
    /// First-order estimate of the avoided crossing position.
    pub a_star: f64,
}

/// Wire form of a model: couplings are always derived, never stored.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct ModelParams {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "J_R")]
    j_r: f64,
    #[serde(rename = "J_L")]
    j_l: f64,
    #[serde(rename = "J")]
    j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelParams", into = "ModelParams")]
pub struct RingModel {
    n: usize,
    j_r: f64,
    j_l: f64,
    j: f64,
    /// `couplings[j - 1]` is the strength of bond `j`.
    couplings: Vec<f64>,
}

impl TryFrom<ModelParams> for RingModel {
    type Error = Error;

    fn try_from(p: ModelParams) -> Result<Self> {
        RingModel::new(p.n, p.j_r, p.j_l, p.j)
    }
}

impl From<RingModel> for ModelParams {
    fn from(m: RingModel) -> Self {
        ModelParams {
            n: m.n,
            j_r: m.j_r,
            j_l: m.j_l,
            j: m.j,
        }
    }
}

/// Bond strengths of the frustrated-ring pattern for any odd `n >= 3`.
///
/// This is the coupling rule without the model's size restriction; the Lie
/// closure tests use it at `n = 3`.
pub fn ring_couplings(n: usize, j_r: f64, j_l: f64, j: f64) -> Vec<f64> {
    let mut c = vec![j; n];
    c[n - 1] = -j_r;
    c[(n - 1) / 2 - 1] = j_l;
    c[(n + 1) / 2 - 1] = j_l;
    c
}

/// Diagonal of `-sum_j c_j Z_j Z_{j+1}` on the periodic chain of `c.len()` sites,
/// for computational basis index `x`.
#[inline]
pub fn ring_energy(couplings: &[f64], x: usize) -> f64 {
    let n = couplings.len();
    let mut e = 0.0;
    for (b, &c) in couplings.iter().enumerate() {
        let next = (b + 1) % n;
        let aligned = ((x >> b) ^ (x >> next)) & 1 == 0;
        e -= if aligned { c } else { -c };
    }
    e
}

impl RingModel {
    pub fn new(n: usize, j_r: f64, j_l: f64, j: f64) -> Result<Self> {
        if n % 2 == 0 {
            return Err(Error::InvalidModel(format!("N must be odd, got {n}")));
        }
        if n < 5 {
            return Err(Error::InvalidModel(format!("N must be at least 5, got {n}")));
        }
        if n > 63 {
            return Err(Error::InvalidModel(format!("N = {n} exceeds the 63-spin encoding limit")));
        }
        if !(0.0 < j_r && j_r < j_l && j_l < j) || !j.is_finite() {
            return Err(Error::InvalidModel(format!(
                "couplings must satisfy 0 < J_R < J_L < J, got J_R = {j_r}, J_L = {j_l}, J = {j}"
            )));
        }
        Ok(RingModel {
            n,
            j_r,
            j_l,
            j,
            couplings: ring_couplings(n, j_r, j_l, j),
        })
    }

    /// Model with the default couplings `(J_R, J_L, J) = (0.45, 0.5, 1)`.
    pub fn with_defaults(n: usize) -> Result<Self> {
        Self::new(n, DEFAULT_J_R, DEFAULT_J_L, DEFAULT_J)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn j_r(&self) -> f64 {
        self.j_r
    }

    pub fn j_l(&self) -> f64 {
        self.j_l
    }

    pub fn j(&self) -> f64 {
        self.j
    }

    /// All bond strengths; index `j - 1` holds bond `j`.
    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    /// Strength of bond `j` (1-based, `1..=N`).
    pub fn coupling(&self, j: usize) -> Result<f64> {
        if j == 0 || j > self.n {
            return Err(Error::InvalidSite(j.to_string(), self.n));
        }
        Ok(self.couplings[j - 1])
    }

    pub fn exact_spectrum(&self) -> SpectrumConstants {
        let n = self.n as f64;
        let e0 = -(n - 3.0) * self.j + self.j_r - 2.0 * self.j_l;
        let gap = 2.0 * (self.j_l - self.j_r);
        let e1 = e0 + gap;
        SpectrumConstants {
            e0,
            e1,
            gap,
            a_star: 1.0 / (1.0 + e1 - e0),
        }
    }

    /// Success threshold `2c(J_L - J_R)` on `E(T) - E0`.
    pub fn energy_threshold(&self, c: f64) -> Result<f64> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidArgument(format!("threshold factor c must be > 0, got {c}")));
        }
        Ok(2.0 * c * (self.j_l - self.j_r))
    }

    /// Problem energy of a spin configuration; `bits[j - 1]` is site `j`.
    pub fn classical_energy(&self, bits: &[bool]) -> Result<f64> {
        if bits.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: bits.len(),
            });
        }
        let x = bits
            .iter()
            .enumerate()
            .fold(0usize, |acc, (i, &b)| acc | ((b as usize) << i));
        Ok(self.basis_energy(x))
    }

    /// Problem energy of computational basis state `x`.
    #[inline]
    pub fn basis_energy(&self, x: usize) -> f64 {
        ring_energy(&self.couplings, x)
    }

    /// Parse a bitstring such as `"00011"`; the first character is site 1.
    pub fn parse_bits(&self, s: &str) -> Result<Vec<bool>> {
        let bits: Vec<bool> = s
            .chars()
            .map(|ch| match ch {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidArgument(format!("bad bit character {other:?}"))),
            })
            .collect::<Result<_>>()?;
        if bits.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: bits.len(),
            });
        }
        Ok(bits)
    }
}
