//! Pauli transfer matrices `R[a][b] = tr(P_a χ(P_b)) / 2^n`.
//!
//! Basis order: the last qubit is the "ancilla digit". Strings whose last
//! component is `I` or `Z` come first, then those ending in `X` or `Y`;
//! within each class the leading qubits run through `I, X, Y, Z` (qubit 0
//! most significant) and the last digit varies fastest. For two qubits this
//! gives `II, IZ, XI, XZ, YI, YZ, ZI, ZZ, IX, IY, XX, XY, …`.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use super::dense::{run_dense_with, DenseOptions};
use super::NoiseBinding;
use crate::circuit::passes::apply_twirl;
use crate::circuit::DynamicCircuit;
use crate::dense::{self as kern, CMatrix};
use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString};

/// Largest register for PTM computations.
pub const PTM_QUBIT_CAP: usize = 4;

pub fn ptm_basis(n: usize) -> Vec<PauliString> {
    if n == 0 {
        return vec![PauliString::identity(0)];
    }
    let mut out = Vec::with_capacity(1 << (2 * n));
    for class in [[Pauli::I, Pauli::Z], [Pauli::X, Pauli::Y]] {
        for prefix in PauliString::all(n - 1) {
            for &last in &class {
                let mut p = PauliString::identity(n);
                for q in 0..n - 1 {
                    p.set(q, prefix.get(q));
                }
                p.set(n - 1, last);
                out.push(p);
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct PtMatrix {
    basis: Vec<PauliString>,
    data: DMatrix<f64>,
}

impl PtMatrix {
    pub fn basis(&self) -> &[PauliString] {
        &self.basis
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn index_of(&self, p: &PauliString) -> Option<usize> {
        self.basis.iter().position(|b| b == &p.unsigned())
    }

    pub fn entry(&self, a: &PauliString, b: &PauliString) -> Option<f64> {
        Some(self.data[(self.index_of(a)?, self.index_of(b)?)])
    }

    pub fn max_off_diagonal(&self) -> f64 {
        let d = self.data.nrows();
        (0..d)
            .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| self.data[(i, j)].abs())
            .fold(0.0, f64::max)
    }

    /// Non-identity diagonal entries whose magnitude exceeds `tol`.
    pub fn nonzero_diagonal(&self, tol: f64) -> Vec<(PauliString, f64)> {
        self.basis
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.is_identity())
            .map(|(i, p)| (p.clone(), self.data[(i, i)]))
            .filter(|(_, v)| v.abs() > tol)
            .collect()
    }

    pub fn max_abs_diff(&self, other: &PtMatrix) -> f64 {
        (&self.data - &other.data).abs().max()
    }

    /// CSV with a header row and column of basis labels.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("basis");
        for b in &self.basis {
            write!(s, ",{}", b.label()).unwrap();
        }
        s.push('\n');
        for (i, a) in self.basis.iter().enumerate() {
            s.push_str(&a.label());
            for j in 0..self.basis.len() {
                write!(s, ",{:.12e}", self.data[(i, j)]).unwrap();
            }
            s.push('\n');
        }
        s
    }
}

/// PTM of a linear map on `n`-qubit operators.
pub fn ptm_of(n: usize, channel: impl Fn(&CMatrix) -> Result<CMatrix>) -> Result<PtMatrix> {
    kern::check_cap(n, PTM_QUBIT_CAP)?;
    let basis = ptm_basis(n);
    let d = basis.len();
    let scale = 1.0 / (1u64 << n) as f64;
    let mut data = DMatrix::zeros(d, d);
    for (j, pb) in basis.iter().enumerate() {
        let out = channel(&pb.to_matrix())?;
        for (i, pa) in basis.iter().enumerate() {
            data[(i, j)] = kern::expectation(&out, pa) * scale;
        }
    }
    Ok(PtMatrix { basis, data })
}

/// PTM of a circuit run with classical outcomes discarded.
pub fn ptm_of_circuit(c: &DynamicCircuit, nb: &NoiseBinding) -> Result<PtMatrix> {
    if c.n_qubits() > PTM_QUBIT_CAP {
        return Err(Error::DimensionCap {
            qubits: c.n_qubits(),
            cap: PTM_QUBIT_CAP,
        });
    }
    ptm_of(c.n_qubits(), |op| {
        let opts = DenseOptions {
            input: Some(op.clone()),
            ..Default::default()
        };
        Ok(run_dense_with(c, nb, &opts)?.state())
    })
}

/// PTM averaged over every Pauli twirl of layer `index` on its twirl support.
pub fn twirled_ptm(c: &DynamicCircuit, nb: &NoiseBinding, index: usize) -> Result<PtMatrix> {
    let layer = c
        .layers()
        .get(index)
        .ok_or_else(|| Error::IndexOutOfRange(format!("layer {index}")))?;
    let support = layer.twirl_support();
    let mut acc: Option<PtMatrix> = None;
    let mut count = 0.0;
    for local in PauliString::all(support.len()) {
        let p = local.embed(c.n_qubits(), &support)?;
        let (tw, _) = apply_twirl(c, &[(index, p)], &[])?;
        let r = ptm_of_circuit(&tw, nb)?;
        acc = Some(match acc {
            None => r,
            Some(mut a) => {
                a.data += r.data;
                a
            }
        });
        count += 1.0;
    }
    let mut out = acc.expect("at least the identity twirl");
    out.data /= count;
    Ok(out)
}
