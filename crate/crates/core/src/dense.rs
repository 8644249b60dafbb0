//! Dense density-matrix kernels over `2^n`-dimensional complex matrices.
//!
//! Basis index bit `n - 1 - q` holds qubit `q`, so qubit 0 is the most
//! significant bit, matching the label order of [`PauliString`].

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gate::{Gate, Mat2, Mat4};
use crate::pauli::PauliString;

pub type CMatrix = DMatrix<Complex64>;

/// Largest register the dense kernels accept.
pub const DENSE_QUBIT_CAP: usize = 7;

pub fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        Err(Error::DimensionCap { qubits: n, cap })
    } else {
        Ok(())
    }
}

#[inline]
fn bit_of(n: usize, q: usize) -> usize {
    1 << (n - 1 - q)
}

/// Index-space masks `(flip, sign)` of an unsigned Pauli: `P|j⟩ ∝
/// (−1)^{|j & sign|} |j ^ flip⟩`.
pub fn index_masks(p: &PauliString) -> (usize, usize) {
    let n = p.num_qubits();
    let (mut flip, mut sign) = (0usize, 0usize);
    for q in 0..n {
        if p.x_bit(q) {
            flip |= bit_of(n, q);
        }
        if p.z_bit(q) {
            sign |= bit_of(n, q);
        }
    }
    (flip, sign)
}

#[inline]
fn parity(v: usize) -> f64 {
    if v.count_ones() & 1 == 1 {
        -1.0
    } else {
        1.0
    }
}

/// `P ρ P†` for an n-qubit Pauli `P`.
pub fn conjugate_pauli(rho: &CMatrix, p: &PauliString) -> CMatrix {
    let (flip, sign) = index_masks(p);
    let dim = rho.nrows();
    CMatrix::from_fn(dim, dim, |a, b| {
        let (sa, sb) = (a ^ flip, b ^ flip);
        rho[(sa, sb)] * (parity(sa & sign) * parity(sb & sign))
    })
}

/// `ρ → w ρ + (1 − w) P ρ P†`.
pub fn pauli_mix(rho: &CMatrix, p: &PauliString, w: f64) -> CMatrix {
    if p.is_identity() || w == 1.0 {
        return rho.clone();
    }
    rho * Complex64::from(w) + conjugate_pauli(rho, p) * Complex64::from(1.0 - w)
}

/// `ρ → U ρ U†` for a single-qubit unitary on qubit `q`.
pub fn apply_1q(rho: &mut CMatrix, n: usize, q: usize, u: &Mat2) {
    let bit = bit_of(n, q);
    let dim = rho.nrows();
    for col in 0..dim {
        for i in (0..dim).filter(|i| i & bit == 0) {
            let (a, b) = (rho[(i, col)], rho[(i | bit, col)]);
            rho[(i, col)] = u[0][0] * a + u[0][1] * b;
            rho[(i | bit, col)] = u[1][0] * a + u[1][1] * b;
        }
    }
    for row in 0..dim {
        for j in (0..dim).filter(|j| j & bit == 0) {
            let (a, b) = (rho[(row, j)], rho[(row, j | bit)]);
            rho[(row, j)] = a * u[0][0].conj() + b * u[0][1].conj();
            rho[(row, j | bit)] = a * u[1][0].conj() + b * u[1][1].conj();
        }
    }
}

/// `ρ → U ρ U†` for a two-qubit unitary with `q0` the more significant index.
pub fn apply_2q(rho: &mut CMatrix, n: usize, q0: usize, q1: usize, u: &Mat4) {
    let (b0, b1) = (bit_of(n, q0), bit_of(n, q1));
    let dim = rho.nrows();
    let idx = |base: usize, k: usize| base | if k & 2 != 0 { b0 } else { 0 } | if k & 1 != 0 { b1 } else { 0 };
    let bases: Vec<usize> = (0..dim).filter(|i| i & (b0 | b1) == 0).collect();
    for col in 0..dim {
        for &base in &bases {
            let v: [Complex64; 4] = std::array::from_fn(|k| rho[(idx(base, k), col)]);
            for r in 0..4 {
                rho[(idx(base, r), col)] = (0..4).map(|k| u[r][k] * v[k]).sum();
            }
        }
    }
    for row in 0..dim {
        for &base in &bases {
            let v: [Complex64; 4] = std::array::from_fn(|k| rho[(row, idx(base, k))]);
            for c in 0..4 {
                rho[(row, idx(base, c))] = (0..4).map(|k| v[k] * u[c][k].conj()).sum();
            }
        }
    }
}

pub fn apply_gate(rho: &mut CMatrix, n: usize, gate: &Gate) -> Result<()> {
    match gate.qubits.as_slice() {
        [q] => {
            let m = gate
                .kind
                .matrix1()
                .ok_or_else(|| Error::Unsupported(format!("{} on one qubit", gate.kind)))?;
            apply_1q(rho, n, *q, &m);
        }
        [a, b] => {
            let m = gate
                .kind
                .matrix2()
                .ok_or_else(|| Error::Unsupported(format!("{} on two qubits", gate.kind)))?;
            apply_2q(rho, n, *a, *b, &m);
        }
        _ => return Err(Error::Unsupported(format!("gate {} arity", gate.kind))),
    }
    Ok(())
}

/// `Π_b ρ Π_b` for outcome `b` of a Z measurement on `q` (unnormalized).
pub fn project(rho: &CMatrix, n: usize, q: usize, outcome: u8) -> CMatrix {
    let bit = bit_of(n, q);
    let keep = |i: usize| ((i & bit != 0) as u8) == outcome;
    let dim = rho.nrows();
    CMatrix::from_fn(dim, dim, |a, b| {
        if keep(a) && keep(b) {
            rho[(a, b)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Complete dephasing of qubit `q`: `(ρ + Z ρ Z) / 2`.
pub fn dephase(rho: &CMatrix, n: usize, q: usize) -> CMatrix {
    let bit = bit_of(n, q);
    let dim = rho.nrows();
    CMatrix::from_fn(dim, dim, |a, b| {
        if (a ^ b) & bit != 0 {
            Complex64::new(0.0, 0.0)
        } else {
            rho[(a, b)]
        }
    })
}

pub fn trace(rho: &CMatrix) -> f64 {
    rho.diagonal().iter().map(|z| z.re).sum()
}

/// `tr(P ρ)` including the phase of `P`, real part.
pub fn expectation(rho: &CMatrix, p: &PauliString) -> f64 {
    let (flip, sign) = index_masks(p);
    let n = p.num_qubits();
    let ys = (0..n).filter(|&q| p.x_bit(q) && p.z_bit(q)).count() as i64;
    // ⟨a|P|b⟩ with b = a ^ flip: i^{#Y} (−1)^{|b & sign|}
    let mut acc = Complex64::new(0.0, 0.0);
    for a in 0..rho.nrows() {
        let b = a ^ flip;
        acc += rho[(b, a)] * parity(b & sign);
    }
    let phase = crate::pauli::Phase::new(ys + p.phase().exponent() as i64).to_complex();
    (acc * phase).re
}

/// `|bits⟩⟨bits|` with `bits[q]` the value of qubit `q`.
pub fn basis_state(bits: &[u8]) -> CMatrix {
    let n = bits.len();
    let idx = bits
        .iter()
        .enumerate()
        .fold(0usize, |acc, (q, &b)| acc | if b == 1 { bit_of(n, q) } else { 0 });
    let dim = 1 << n;
    let mut rho = CMatrix::zeros(dim, dim);
    rho[(idx, idx)] = Complex64::new(1.0, 0.0);
    rho
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}
