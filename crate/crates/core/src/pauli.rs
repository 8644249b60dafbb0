//! Exact n-qubit Pauli-group arithmetic in the symplectic representation.
//!
//! A [`PauliString`] stores one x bit and one z bit per qubit together with a
//! global phase `i^k`, `k ∈ {0, 1, 2, 3}`. The bit pair `(x, z)` on a qubit
//! selects the *Hermitian* single-qubit Pauli: `(0,0) = I`, `(1,0) = X`,
//! `(1,1) = Y`, `(0,1) = Z`, so that `"Y"` has phase `+1` and `XZ = -iY`.
//!
//! Labels are written with qubit 0 as the leftmost character everywhere in
//! the crate: `"XZ"` is `X` on qubit 0 and `Z` on qubit 1. Dense matrices use
//! the same convention (qubit 0 is the most significant bit of a basis index).

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Single-qubit Pauli operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    /// Whether two single-qubit Paulis commute.
    pub fn commute(a: Pauli, b: Pauli) -> bool {
        let (ax, az) = a.bits();
        let (bx, bz) = b.bits();
        (ax & bz) == (az & bx)
    }

    /// True for `I` and `Z`, the components left invariant by a
    /// computational-basis projector.
    pub fn is_diagonal(self) -> bool {
        matches!(self, Pauli::I | Pauli::Z)
    }

    pub fn matrix(self) -> [[Complex64; 2]; 2] {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        match self {
            Pauli::I => [[l, o], [o, l]],
            Pauli::X => [[o, l], [l, o]],
            Pauli::Y => [[o, -i], [i, o]],
            Pauli::Z => [[l, o], [o, -l]],
        }
    }
}

/// Global phase `i^k` of a Pauli string, stored as `k mod 4`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn new(exponent: i64) -> Self {
        Phase(exponent.rem_euclid(4) as u8)
    }

    pub fn exponent(self) -> u8 {
        self.0
    }

    /// `+1` or `-1` for real phases, `None` otherwise.
    pub fn sign(self) -> Option<i8> {
        match self.0 {
            0 => Some(1),
            2 => Some(-1),
            _ => None,
        }
    }

    pub fn to_complex(self) -> Complex64 {
        match self.0 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }
}

impl std::ops::Add for Phase {
    type Output = Phase;
    fn add(self, rhs: Phase) -> Phase {
        Phase((self.0 + rhs.0) % 4)
    }
}

#[inline]
fn words(n: usize) -> usize {
    n.div_ceil(64).max(1)
}

#[inline]
fn popcount_and(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x & y).count_ones()).sum()
}

/// An n-qubit Pauli operator with exact phase.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    phase: Phase,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        PauliString {
            n,
            x: vec![0; words(n)],
            z: vec![0; words(n)],
            phase: Phase::ONE,
        }
    }

    /// A string acting as `p` on `qubit` and identity elsewhere.
    pub fn single(n: usize, qubit: usize, p: Pauli) -> Self {
        let mut s = Self::identity(n);
        s.set(qubit, p);
        s
    }

    pub fn from_paulis(paulis: &[Pauli]) -> Self {
        let mut s = Self::identity(paulis.len());
        for (q, &p) in paulis.iter().enumerate() {
            s.set(q, p);
        }
        s
    }

    /// Builds a string from packed bit masks (bit `j` of word 0 is qubit `j`).
    /// Only supports `n <= 64`.
    pub fn from_masks(n: usize, x: u64, z: u64, phase: Phase) -> Self {
        assert!(n <= 64, "from_masks supports at most 64 qubits");
        let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        PauliString {
            n,
            x: vec![x & mask],
            z: vec![z & mask],
            phase,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn with_phase(mut self, phase: Phase) -> Self {
        self.phase = phase;
        self
    }

    /// The same operator with the phase reset to `+1`.
    pub fn unsigned(&self) -> Self {
        self.clone().with_phase(Phase::ONE)
    }

    pub fn x_mask(&self) -> u64 {
        self.x[0]
    }

    pub fn z_mask(&self) -> u64 {
        self.z[0]
    }

    pub fn x_bit(&self, q: usize) -> bool {
        (self.x[q / 64] >> (q % 64)) & 1 == 1
    }

    pub fn z_bit(&self, q: usize) -> bool {
        (self.z[q / 64] >> (q % 64)) & 1 == 1
    }

    pub fn get(&self, q: usize) -> Pauli {
        Pauli::from_bits(self.x_bit(q), self.z_bit(q))
    }

    pub fn set(&mut self, q: usize, p: Pauli) {
        assert!(q < self.n, "qubit {q} out of range for {} qubits", self.n);
        let (xb, zb) = p.bits();
        let (w, b) = (q / 64, q % 64);
        self.x[w] = (self.x[w] & !(1 << b)) | ((xb as u64) << b);
        self.z[w] = (self.z[w] & !(1 << b)) | ((zb as u64) << b);
    }

    /// Identity up to phase.
    pub fn is_identity(&self) -> bool {
        self.x.iter().chain(&self.z).all(|&w| w == 0)
    }

    pub fn weight(&self) -> usize {
        self.x
            .iter()
            .zip(&self.z)
            .map(|(a, b)| (a | b).count_ones() as usize)
            .sum()
    }

    /// Qubits on which the string acts non-trivially, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.n).filter(|&q| self.get(q) != Pauli::I).collect()
    }

    pub fn paulis(&self) -> Vec<Pauli> {
        (0..self.n).map(|q| self.get(q)).collect()
    }

    fn check_dim(&self, other: &PauliString) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                left: self.n,
                right: other.n,
            });
        }
        Ok(())
    }

    /// Returns 1 if the two strings anticommute and 0 if they commute.
    pub fn symplectic_product(&self, other: &PauliString) -> Result<u8> {
        self.check_dim(other)?;
        Ok(self.symplectic_unchecked(other))
    }

    pub(crate) fn symplectic_unchecked(&self, other: &PauliString) -> u8 {
        ((popcount_and(&self.x, &other.z) + popcount_and(&self.z, &other.x)) & 1) as u8
    }

    pub fn commutes_with(&self, other: &PauliString) -> Result<bool> {
        Ok(self.symplectic_product(other)? == 0)
    }

    /// Operator product `self · other` with exact phase.
    pub fn multiply(&self, other: &PauliString) -> Result<PauliString> {
        self.check_dim(other)?;
        Ok(self.multiply_unchecked(other))
    }

    pub(crate) fn multiply_unchecked(&self, other: &PauliString) -> PauliString {
        let x: Vec<u64> = self.x.iter().zip(&other.x).map(|(a, b)| a ^ b).collect();
        let z: Vec<u64> = self.z.iter().zip(&other.z).map(|(a, b)| a ^ b).collect();
        // i^{|x1 z1|} X^x1 Z^z1 · i^{|x2 z2|} X^x2 Z^z2
        //   = i^{|x1 z1| + |x2 z2| + 2|z1 x2|} X^x3 Z^z3,  X^x3 Z^z3 = i^{-|x3 z3|} P3
        let e = popcount_and(&self.x, &self.z) as i64
            + popcount_and(&other.x, &other.z) as i64
            + 2 * popcount_and(&self.z, &other.x) as i64
            - popcount_and(&x, &z) as i64;
        PauliString {
            n: self.n,
            x,
            z,
            phase: self.phase + other.phase + Phase::new(e),
        }
    }

    /// Adds `i^{k}` to the phase.
    pub fn mul_phase(&mut self, k: i64) {
        self.phase = self.phase + Phase::new(k);
    }

    /// Re-indexes a string defined on `qubits.len()` local qubits onto an
    /// `n`-qubit register, sending local qubit `i` to `qubits[i]`.
    pub fn embed(&self, n: usize, qubits: &[usize]) -> Result<PauliString> {
        if qubits.len() != self.n {
            return Err(Error::DimensionMismatch {
                left: self.n,
                right: qubits.len(),
            });
        }
        let mut out = PauliString::identity(n);
        for (i, &q) in qubits.iter().enumerate() {
            if q >= n {
                return Err(Error::IndexOutOfRange(format!("qubit {q} >= {n}")));
            }
            out.set(q, self.get(i));
        }
        out.phase = self.phase;
        Ok(out)
    }

    /// Restricts to the listed qubits (local qubit `i` is `qubits[i]`);
    /// the phase is kept.
    pub fn restrict(&self, qubits: &[usize]) -> Result<PauliString> {
        let mut out = PauliString::identity(qubits.len());
        for (i, &q) in qubits.iter().enumerate() {
            if q >= self.n {
                return Err(Error::IndexOutOfRange(format!("qubit {q} >= {}", self.n)));
            }
            out.set(i, self.get(q));
        }
        out.phase = self.phase;
        Ok(out)
    }

    /// Enumerates all `4^n` unsigned strings, qubit 0 most significant,
    /// each qubit running through `I, X, Y, Z`.
    pub fn all(n: usize) -> impl Iterator<Item = PauliString> {
        let total = 1usize << (2 * n);
        (0..total).map(move |mut idx| {
            let mut p = PauliString::identity(n);
            for q in (0..n).rev() {
                p.set(q, Pauli::ALL[idx & 3]);
                idx >>= 2;
            }
            p
        })
    }

    /// Dense `2^n × 2^n` matrix including the phase.
    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        let dim = 1usize << self.n;
        let mut m = DMatrix::zeros(dim, dim);
        for col in 0..dim {
            let mut amp = self.phase.to_complex();
            let mut row = col;
            for q in 0..self.n {
                let bit = self.n - 1 - q;
                let b = (col >> bit) & 1;
                let mat = self.get(q).matrix();
                let out = (0..2).find(|&r| mat[r][b] != Complex64::new(0.0, 0.0)).unwrap();
                amp *= mat[out][b];
                row = (row & !(1 << bit)) | (out << bit);
            }
            m[(row, col)] = amp;
        }
        m
    }

    /// Label text: optional phase prefix (`i`, `-`, `-i`) then one character
    /// per qubit, qubit 0 first.
    pub fn label(&self) -> String {
        let prefix = match self.phase.exponent() {
            0 => "",
            1 => "i",
            2 => "-",
            _ => "-i",
        };
        let body: String = (0..self.n).map(|q| self.get(q).as_char()).collect();
        format!("{prefix}{body}")
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliString({})", self.label())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |reason: &str| Error::InvalidLabel {
            label: s.to_string(),
            reason: reason.to_string(),
        };
        let (phase, body) = if let Some(rest) = s.strip_prefix("-i") {
            (Phase::MINUS_I, rest)
        } else if let Some(rest) = s.strip_prefix("+i") {
            (Phase::I, rest)
        } else if let Some(rest) = s.strip_prefix('i') {
            (Phase::I, rest)
        } else if let Some(rest) = s.strip_prefix('-') {
            (Phase::MINUS_ONE, rest)
        } else if let Some(rest) = s.strip_prefix('+') {
            (Phase::ONE, rest)
        } else {
            (Phase::ONE, s)
        };
        if body.is_empty() {
            return Err(bad("empty"));
        }
        let paulis = body
            .chars()
            .map(|c| Pauli::from_char(c).ok_or_else(|| bad(&format!("invalid character {c:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(PauliString::from_paulis(&paulis).with_phase(phase))
    }
}

/// Parses a label; see [`PauliString::from_str`].
pub fn parse_label(s: &str) -> Result<PauliString> {
    s.parse()
}

impl Serialize for PauliString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
