//! Bit-level Pauli-string algebra.
//!
//! Site convention used throughout the crate: site 0 is the leftmost letter of a
//! Pauli string and the most significant bit of a basis-state index, so the
//! index of a configuration is its bitstring read big-endian. Bit value 0 is
//! spin `+1`, bit value 1 is spin `-1`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CqdError, Result};

/// Largest register the bit-mask representation supports.
pub const MAX_SITES: usize = 63;

/// Default cap on dense-matrix lowering (2^14 = 16384 dimensional).
pub const DENSE_CAP: usize = 14;

#[inline]
pub(crate) fn site_mask(n: usize, site: usize) -> u64 {
    1u64 << (n - 1 - site)
}

/// A computational basis configuration of `n` spins.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpinConfig {
    bits: u64,
    n: usize,
}

impl SpinConfig {
    pub fn new(index: u64, n: usize) -> Result<Self> {
        if n > MAX_SITES {
            return Err(CqdError::CapExceeded { n, cap: MAX_SITES });
        }
        if n < 64 && index >> n != 0 {
            return Err(CqdError::precondition(format!(
                "index {index} does not fit in {n} sites"
            )));
        }
        Ok(Self { bits: index, n })
    }

    /// Builds a configuration from per-site bits (0 or 1), site 0 first.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let n = bits.len();
        let mut index = 0u64;
        for (i, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => index |= site_mask(n, i),
                _ => {
                    return Err(CqdError::precondition(format!(
                        "site {i} has bit value {b}, expected 0 or 1"
                    )))
                }
            }
        }
        Self::new(index, n)
    }

    /// Parses a bitstring such as `"0110"`.
    pub fn parse(s: &str) -> Result<Self> {
        let bits: Vec<u8> = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(CqdError::precondition(format!("invalid bitstring {s:?}"))),
            })
            .collect::<Result<_>>()?;
        Self::from_bits(&bits)
    }

    #[inline]
    pub fn index(&self) -> u64 {
        self.bits
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn bit(&self, site: usize) -> u8 {
        ((self.bits >> (self.n - 1 - site)) & 1) as u8
    }

    /// Spin value `1 - 2·bit` of a site.
    #[inline]
    pub fn spin(&self, site: usize) -> f64 {
        1.0 - 2.0 * self.bit(site) as f64
    }

    pub fn spins(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.spin(i)).collect()
    }
}

impl fmt::Display for SpinConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n {
            write!(f, "{}", self.bit(i))?;
        }
        Ok(())
    }
}

/// Spin value of `site` in a raw big-endian index.
#[inline]
pub fn spin_of(index: u64, n: usize, site: usize) -> f64 {
    1.0 - 2.0 * ((index >> (n - 1 - site)) & 1) as f64
}

/// One of the four phases a Pauli string can pick up on a basis state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    PlusOne,
    PlusI,
    MinusOne,
    MinusI,
}

impl Phase {
    #[inline]
    fn from_quarter_turns(k: u32) -> Self {
        match k & 3 {
            0 => Phase::PlusOne,
            1 => Phase::PlusI,
            2 => Phase::MinusOne,
            _ => Phase::MinusI,
        }
    }

    #[inline]
    fn quarter_turns(self) -> u32 {
        match self {
            Phase::PlusOne => 0,
            Phase::PlusI => 1,
            Phase::MinusOne => 2,
            Phase::MinusI => 3,
        }
    }

    #[inline]
    pub fn to_complex(self) -> Complex64 {
        match self {
            Phase::PlusOne => Complex64::new(1.0, 0.0),
            Phase::PlusI => Complex64::new(0.0, 1.0),
            Phase::MinusOne => Complex64::new(-1.0, 0.0),
            Phase::MinusI => Complex64::new(0.0, -1.0),
        }
    }

    #[inline]
    pub fn conj(self) -> Self {
        Self::from_quarter_turns(4 - self.quarter_turns())
    }

    #[inline]
    pub fn mul(self, other: Phase) -> Self {
        Self::from_quarter_turns(self.quarter_turns() + other.quarter_turns())
    }
}

/// Single-site Pauli letter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Letter {
    I,
    X,
    Y,
    Z,
}

impl Letter {
    pub fn as_char(self) -> char {
        match self {
            Letter::I => 'I',
            Letter::X => 'X',
            Letter::Y => 'Y',
            Letter::Z => 'Z',
        }
    }
}

/// A tensor product of single-site Paulis stored as symplectic X/Z masks.
///
/// `Y` sets both masks; the operator is exactly `Y` (the `i` from `Y = iXZ`
/// is accounted for in [`PauliString::apply_index`]).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    n: usize,
    x: u64,
    z: u64,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        Self { n, x: 0, z: 0 }
    }

    #[inline]
    pub(crate) fn from_masks(n: usize, x: u64, z: u64) -> Self {
        Self { n, x, z }
    }

    pub fn from_letters(letters: &[Letter]) -> Result<Self> {
        let n = letters.len();
        if n > MAX_SITES {
            return Err(CqdError::CapExceeded { n, cap: MAX_SITES });
        }
        let (mut x, mut z) = (0u64, 0u64);
        for (i, l) in letters.iter().enumerate() {
            let m = site_mask(n, i);
            match l {
                Letter::I => {}
                Letter::X => x |= m,
                Letter::Z => z |= m,
                Letter::Y => {
                    x |= m;
                    z |= m
                }
            }
        }
        Ok(Self { n, x, z })
    }

    /// String with `letter` on each listed site and identity elsewhere.
    pub fn from_sparse(n: usize, ops: &[(usize, Letter)]) -> Result<Self> {
        let mut letters = vec![Letter::I; n];
        for &(site, l) in ops {
            if site >= n {
                return Err(CqdError::precondition(format!(
                    "site {site} out of range for {n} sites"
                )));
            }
            letters[site] = l;
        }
        Self::from_letters(&letters)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn x_mask(&self) -> u64 {
        self.x
    }

    #[inline]
    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn letter(&self, site: usize) -> Letter {
        let m = site_mask(self.n, site);
        match (self.x & m != 0, self.z & m != 0) {
            (false, false) => Letter::I,
            (true, false) => Letter::X,
            (false, true) => Letter::Z,
            (true, true) => Letter::Y,
        }
    }

    pub fn letters(&self) -> Vec<Letter> {
        (0..self.n).map(|i| self.letter(i)).collect()
    }

    pub fn weight(&self) -> usize {
        (self.x | self.z).count_ones() as usize
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// True iff every letter is `I` or `Z`.
    pub fn is_diagonal(&self) -> bool {
        self.x == 0
    }

    /// Whether the matrix of this string in the computational basis is real
    /// (even number of `Y` letters).
    pub fn is_real(&self) -> bool {
        (self.x & self.z).count_ones() % 2 == 0
    }

    pub fn commutes(&self, other: &PauliString) -> Result<bool> {
        CqdError::check_len(self.n, other.n)?;
        let anti = (self.x & other.z).count_ones() + (self.z & other.x).count_ones();
        Ok(anti % 2 == 0)
    }

    /// Raw kernel: `P|index⟩ = phase·|index'⟩`.
    #[inline]
    pub fn apply_index(&self, index: u64) -> (u64, Phase) {
        let ny = (self.x & self.z).count_ones();
        let parity = (index & self.z).count_ones() & 1;
        (index ^ self.x, Phase::from_quarter_turns(ny + 2 * parity))
    }

    /// Applies the string to a basis configuration.
    pub fn apply(&self, z: SpinConfig) -> Result<(SpinConfig, Phase)> {
        CqdError::check_len(self.n, z.len())?;
        let (j, ph) = self.apply_index(z.index());
        Ok((SpinConfig { bits: j, n: self.n }, ph))
    }

    /// Matrix element `⟨row|P|col⟩`.
    #[inline]
    pub fn element(&self, row: u64, col: u64) -> Complex64 {
        let (j, ph) = self.apply_index(col);
        if j == row {
            ph.to_complex()
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    /// Restricts to a subset of sites, keeping their order.
    pub fn restrict(&self, sites: &[usize]) -> PauliString {
        let letters: Vec<Letter> = sites.iter().map(|&s| self.letter(s)).collect();
        PauliString::from_letters(&letters).expect("restriction is never larger than the source")
    }

    /// Places this string on `sites` of an `n_total`-site register.
    pub fn embed(&self, sites: &[usize], n_total: usize) -> Result<PauliString> {
        CqdError::check_len(self.n, sites.len())?;
        let ops: Vec<(usize, Letter)> = sites
            .iter()
            .enumerate()
            .map(|(i, &s)| (s, self.letter(i)))
            .collect();
        PauliString::from_sparse(n_total, &ops)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in self.letters() {
            write!(f, "{}", l.as_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliString({self})")
    }
}

impl FromStr for PauliString {
    type Err = CqdError;

    fn from_str(s: &str) -> Result<Self> {
        let letters: Vec<Letter> = s
            .chars()
            .map(|c| match c {
                'I' => Ok(Letter::I),
                'X' => Ok(Letter::X),
                'Y' => Ok(Letter::Y),
                'Z' => Ok(Letter::Z),
                _ => Err(CqdError::ParsePauli(s.to_string())),
            })
            .collect::<Result<_>>()?;
        if letters.is_empty() {
            return Err(CqdError::ParsePauli(s.to_string()));
        }
        PauliString::from_letters(&letters)
    }
}

/// Serialized form of one weighted term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coeff: f64,
    pub string: String,
}

/// A real-weighted sum of Pauli strings with duplicate strings merged.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliSum {
    n: usize,
    terms: Vec<(f64, PauliString)>,
}

impl PauliSum {
    pub fn zero(n: usize) -> Self {
        Self { n, terms: Vec::new() }
    }

    /// Builds a sum, merging repeated strings (first-occurrence order) and
    /// dropping terms whose merged weight is exactly zero.
    pub fn new(n: usize, terms: impl IntoIterator<Item = (f64, PauliString)>) -> Result<Self> {
        let mut merged: Vec<(f64, PauliString)> = Vec::new();
        for (c, p) in terms {
            CqdError::check_len(n, p.len())?;
            if !c.is_finite() {
                return Err(CqdError::NonFinite("pauli coefficient"));
            }
            match merged.iter_mut().find(|(_, q)| *q == p) {
                Some(slot) => slot.0 += c,
                None => merged.push((c, p)),
            }
        }
        merged.retain(|(c, _)| *c != 0.0);
        Ok(Self { n, terms: merged })
    }

    /// Accepts complex weights but rejects any with a nonzero imaginary part.
    pub fn from_complex_terms(
        n: usize,
        terms: impl IntoIterator<Item = (Complex64, PauliString)>,
    ) -> Result<Self> {
        let real: Vec<(f64, PauliString)> = terms
            .into_iter()
            .map(|(c, p)| {
                if c.im != 0.0 {
                    Err(CqdError::ComplexCoefficient { re: c.re, im: c.im })
                } else {
                    Ok((c.re, p))
                }
            })
            .collect::<Result<_>>()?;
        Self::new(n, real)
    }

    pub fn from_records(records: &[PauliTerm]) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| CqdError::precondition("empty pauli sum has no site count"))?;
        let n = first.string.len();
        let terms = records
            .iter()
            .map(|r| Ok((r.coeff, r.string.parse::<PauliString>()?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, terms)
    }

    pub fn to_records(&self) -> Vec<PauliTerm> {
        self.terms
            .iter()
            .map(|(c, p)| PauliTerm {
                coeff: *c,
                string: p.to_string(),
            })
            .collect()
    }

    #[inline]
    pub fn n_sites(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> PauliSum {
        let terms = self.terms.iter().map(|(c, p)| (c * factor, *p));
        PauliSum::new(self.n, terms).expect("scaling preserves validity")
    }

    pub fn add(&self, other: &PauliSum) -> Result<PauliSum> {
        CqdError::check_len(self.n, other.n)?;
        PauliSum::new(self.n, self.terms.iter().chain(other.terms.iter()).copied())
    }

    /// Coefficient attached to `p`, zero if absent.
    pub fn coefficient(&self, p: &PauliString) -> f64 {
        self.terms
            .iter()
            .find(|(_, q)| q == p)
            .map(|(c, _)| *c)
            .unwrap_or(0.0)
    }

    /// True when every pair of strings commutes.
    pub fn is_commuting(&self) -> bool {
        self.first_noncommuting_pair().is_none()
    }

    pub(crate) fn first_noncommuting_pair(&self) -> Option<(PauliString, PauliString)> {
        for (i, (_, a)) in self.terms.iter().enumerate() {
            for (_, b) in &self.terms[i + 1..] {
                if !a.commutes(b).expect("terms share a site count") {
                    return Some((*a, *b));
                }
            }
        }
        None
    }

    pub fn is_real(&self) -> bool {
        self.terms.iter().all(|(_, p)| p.is_real())
    }

    /// `H|ψ⟩` for an arbitrary (unnormalized) amplitude vector.
    pub fn apply_to(&self, psi: &[Complex64]) -> Result<Vec<Complex64>> {
        CqdError::check_len(1usize << self.n, psi.len())?;
        let mut out = vec![Complex64::new(0.0, 0.0); psi.len()];
        for (w, p) in &self.terms {
            for (idx, amp) in psi.iter().enumerate() {
                let (j, ph) = p.apply_index(idx as u64);
                out[j as usize] += *w * ph.to_complex() * amp;
            }
        }
        Ok(out)
    }

    /// Lowers the sum to its `2^n × 2^n` matrix, rows and columns indexed
    /// by big-endian configuration index.
    pub fn to_dense_matrix(&self, cap: usize) -> Result<DMatrix<Complex64>> {
        if self.n > cap {
            return Err(CqdError::CapExceeded { n: self.n, cap });
        }
        let dim = 1usize << self.n;
        let mut m = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
        for (w, p) in &self.terms {
            for col in 0..dim {
                let (row, ph) = p.apply_index(col as u64);
                m[(row as usize, col)] += *w * ph.to_complex();
            }
        }
        Ok(m)
    }
}

impl Serialize for PauliSum {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_records().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PauliSum {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let records = Vec::<PauliTerm>::deserialize(deserializer)?;
        PauliSum::from_records(&records).map_err(serde::de::Error::custom)
    }
}
