//! Pauli strings as bit masks.
//!
//! A string on `n` qubits is the pair `(x, z)` and denotes the Hermitian
//! operator `i^{|x & z|} X^x Z^z`, so a site with both bits set carries `Y`.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_PAULI_QUBITS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PauliString {
    n: u8,
    x: u64,
    z: u64,
}

fn full_mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl PauliString {
    pub fn new(n: usize, x_mask: u64, z_mask: u64) -> Result<Self> {
        if n == 0 || n > MAX_PAULI_QUBITS {
            return Err(Error::UnsupportedSize(n, 1, MAX_PAULI_QUBITS));
        }
        if (x_mask | z_mask) & !full_mask(n) != 0 {
            return Err(Error::InvalidArgument(format!("mask bits beyond {n} qubits")));
        }
        Ok(PauliString {
            n: n as u8,
            x: x_mask,
            z: z_mask,
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(n, 0, 0)
    }

    /// Single-site operator (`'X'`, `'Y'` or `'Z'`) on site `j` (1-based).
    pub fn single(n: usize, j: usize, op: char) -> Result<Self> {
        if j == 0 || j > n {
            return Err(Error::InvalidSite(j.to_string(), n));
        }
        let bit = 1u64 << (j - 1);
        match op {
            'X' => Self::new(n, bit, 0),
            'Y' => Self::new(n, bit, bit),
            'Z' => Self::new(n, 0, bit),
            _ => Err(Error::InvalidArgument(format!("unknown Pauli {op:?}"))),
        }
    }

    /// `Z_a Z_b` (1-based sites).
    pub fn zz(n: usize, a: usize, b: usize) -> Result<Self> {
        let p = Self::single(n, a, 'Z')?;
        let q = Self::single(n, b, 'Z')?;
        Self::new(n, 0, p.z | q.z)
    }

    /// Parse a label such as `"XZIY"`; the first character is site 1.
    pub fn parse(label: &str) -> Result<Self> {
        let n = label.chars().count();
        let (mut x, mut z) = (0u64, 0u64);
        for (i, ch) in label.chars().enumerate() {
            let bit = 1u64.checked_shl(i as u32).unwrap_or(0);
            match ch {
                'I' => {}
                'X' => x |= bit,
                'Y' => {
                    x |= bit;
                    z |= bit
                }
                'Z' => z |= bit,
                _ => return Err(Error::InvalidArgument(format!("bad Pauli label character {ch:?}"))),
            }
        }
        Self::new(n, x, z)
    }

    pub fn n(&self) -> usize {
        self.n as usize
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }

    /// `P Q = i^k R`; returns `(k mod 4, R)`.
    pub fn product(&self, other: &PauliString) -> (u8, PauliString) {
        let x = self.x ^ other.x;
        let z = self.z ^ other.z;
        let k = (self.x & self.z).count_ones() + (other.x & other.z).count_ones()
            + 2 * (self.z & other.x).count_ones()
            + 4 * 64
            - (x & z).count_ones();
        (
            (k % 4) as u8,
            PauliString { n: self.n, x, z },
        )
    }

    /// `<+|^N P |+>^N`: one for strings made of I and X only.
    pub fn plus_expectation(&self) -> f64 {
        if self.z == 0 {
            1.0
        } else {
            0.0
        }
    }

    /// Dense `2^n x 2^n` matrix, row-major; for small-`n` cross checks.
    pub fn to_dense(&self) -> Vec<Complex64> {
        let dim = 1usize << self.n;
        let mut m = vec![Complex64::new(0.0, 0.0); dim * dim];
        let phase = I_POWERS[((self.x & self.z).count_ones() % 4) as usize];
        for col in 0..dim {
            // X^x Z^z |col> = (-1)^{|z & col|} |col ^ x>.
            let sign = if (self.z & col as u64).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            let row = col ^ self.x as usize;
            m[row * dim + col] = phase * sign;
        }
        m
    }
}

const I_POWERS: [Complex64; 4] = [
    Complex64::new(1.0, 0.0),
    Complex64::new(0.0, 1.0),
    Complex64::new(-1.0, 0.0),
    Complex64::new(0.0, -1.0),
];

/// `i^k` as a complex number.
pub fn i_power(k: u8) -> Complex64 {
    I_POWERS[(k % 4) as usize]
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n() {
            let (x, z) = ((self.x >> i) & 1, (self.z >> i) & 1);
            let ch = match (x, z) {
                (0, 0) => 'I',
                (1, 0) => 'X',
                (1, 1) => 'Y',
                _ => 'Z',
            };
            write!(f, "{ch}")?;
        }
        Ok(())
    }
}

/// `[P, Q] = coeff R`. `None` when the strings commute; otherwise `coeff` is
/// `2i` or `-2i`.
pub fn pauli_commutator(p: &PauliString, q: &PauliString) -> Result<Option<(Complex64, PauliString)>> {
    if p.n != q.n {
        return Err(Error::DimensionMismatch {
            expected: p.n(),
            got: q.n(),
        });
    }
    if p.commutes_with(q) {
        return Ok(None);
    }
    let (k, r) = p.product(q);
    Ok(Some((2.0 * i_power(k), r)))
}

/// A Hermitian operator `sum_s c_s P_s` with real coefficients; stands for
/// the anti-Hermitian algebra element `i O`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DlaElement {
    terms: BTreeMap<PauliString, f64>,
}

impl DlaElement {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_terms<I: IntoIterator<Item = (PauliString, f64)>>(terms: I) -> Self {
        let mut e = Self::new();
        for (p, c) in terms {
            e.add_term(p, c);
        }
        e
    }

    pub fn add_term(&mut self, p: PauliString, c: f64) {
        *self.terms.entry(p).or_insert(0.0) += c;
    }

    pub fn terms(&self) -> impl Iterator<Item = (&PauliString, &f64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, p: &PauliString) -> f64 {
        self.terms.get(p).copied().unwrap_or(0.0)
    }

    /// Drop coefficients with magnitude at most `tol`.
    pub fn pruned(mut self, tol: f64) -> Self {
        self.terms.retain(|_, c| c.abs() > tol);
        self
    }

    /// Normalized Hilbert-Schmidt inner product `Tr(A B) / 2^N`.
    pub fn dot(&self, other: &DlaElement) -> f64 {
        self.terms.iter().map(|(p, c)| c * other.coefficient(p)).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `<+|^N O |+>^N`.
    pub fn plus_expectation(&self) -> f64 {
        self.terms.iter().map(|(p, c)| c * p.plus_expectation()).sum()
    }

    /// `C` with `[iA, iB] = iC`, i.e. `C = i[A, B]`. Real for real inputs.
    pub fn bracket(&self, other: &DlaElement) -> Result<DlaElement> {
        let mut out = DlaElement::new();
        for (p, a) in &self.terms {
            for (q, b) in &other.terms {
                if let Some((coeff, r)) = pauli_commutator(p, q)? {
                    let z = Complex64::i() * coeff * (a * b);
                    if z.im.abs() > 1e-12 * z.norm().max(1.0) {
                        return Err(Error::InvariantViolated(format!(
                            "bracket produced an imaginary coefficient on {r}"
                        )));
                    }
                    out.add_term(r, z.re);
                }
            }
        }
        Ok(out.pruned(0.0))
    }
}
