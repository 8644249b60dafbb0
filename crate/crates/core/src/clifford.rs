//! Clifford operators as Pauli-conjugation tableaus.

use std::fmt;

use crate::error::{Error, Result};
use crate::gate::{mat2_dagger, mat2_mul, Gate, GateKind, Mat2};
use crate::pauli::{Pauli, PauliString, Phase};

/// Conjugates `p` in place by a Clifford gate: `p ← G p G†`.
pub fn conjugate_by_gate(p: &mut PauliString, gate: &Gate) -> Result<()> {
    let n = p.num_qubits();
    for &q in &gate.qubits {
        if q >= n {
            return Err(Error::IndexOutOfRange(format!("qubit {q} >= {n}")));
        }
    }
    let q = gate.qubits[0];
    let flip = |p: &mut PauliString, cond: bool| {
        if cond {
            p.mul_phase(2);
        }
    };
    match gate.kind {
        GateKind::I => {}
        GateKind::X => {
            let z = p.z_bit(q);
            flip(p, z);
        }
        GateKind::Z => {
            let x = p.x_bit(q);
            flip(p, x);
        }
        GateKind::Y => {
            let c = p.x_bit(q) ^ p.z_bit(q);
            flip(p, c);
        }
        GateKind::H => {
            let (x, z) = (p.x_bit(q), p.z_bit(q));
            flip(p, x && z);
            p.set(q, Pauli::from_bits(z, x));
        }
        GateKind::S => {
            let (x, z) = (p.x_bit(q), p.z_bit(q));
            flip(p, x && z);
            p.set(q, Pauli::from_bits(x, z ^ x));
        }
        GateKind::Sdg => {
            let (x, z) = (p.x_bit(q), p.z_bit(q));
            flip(p, x && !z);
            p.set(q, Pauli::from_bits(x, z ^ x));
        }
        GateKind::Cx => {
            let t = gate.qubits[1];
            let (xc, zc, xt, zt) = (p.x_bit(q), p.z_bit(q), p.x_bit(t), p.z_bit(t));
            flip(p, xc && zt && !(xt ^ zc));
            p.set(t, Pauli::from_bits(xt ^ xc, zt));
            p.set(q, Pauli::from_bits(xc, zc ^ zt));
        }
        GateKind::Cz => {
            let t = gate.qubits[1];
            let (xa, za, xb, zb) = (p.x_bit(q), p.z_bit(q), p.x_bit(t), p.z_bit(t));
            flip(p, xa && xb && (za ^ zb));
            p.set(q, Pauli::from_bits(xa, za ^ xb));
            p.set(t, Pauli::from_bits(xb, zb ^ xa));
        }
        GateKind::Swap => {
            let t = gate.qubits[1];
            let (a, b) = (p.get(q), p.get(t));
            p.set(q, b);
            p.set(t, a);
        }
        GateKind::T | GateKind::Tdg | GateKind::Ry(_) | GateKind::Rz(_) => {
            return Err(Error::NonClifford(gate.kind.name()))
        }
    }
    Ok(())
}

/// A single-qubit Clifford given as a time-ordered gate sequence whose
/// overall unitary maps Paulis to Paulis. Sequences may contain
/// non-Clifford gates as long as the product is Clifford (e.g. `tdg.x.t`).
#[derive(Clone, Debug, PartialEq)]
pub struct SingleQubitClifford {
    sequence: Vec<GateKind>,
    matrix: Mat2,
    /// Image of I, X, Y, Z under conjugation, with sign.
    images: [(Pauli, bool); 4],
}

fn pauli_index(p: Pauli) -> usize {
    match p {
        Pauli::I => 0,
        Pauli::X => 1,
        Pauli::Y => 2,
        Pauli::Z => 3,
    }
}

/// Finds `(P, negative)` with `m == ±P`, if any.
fn match_signed_pauli(m: &Mat2) -> Option<(Pauli, bool)> {
    for p in [Pauli::X, Pauli::Y, Pauli::Z] {
        let pm = p.matrix();
        for (neg, s) in [(false, 1.0), (true, -1.0)] {
            let ok = (0..2).all(|i| (0..2).all(|j| (m[i][j] - pm[i][j] * s).norm() < 1e-9));
            if ok {
                return Some((p, neg));
            }
        }
    }
    None
}

impl SingleQubitClifford {
    pub fn identity() -> Self {
        Self::from_sequence(&[]).expect("identity is Clifford")
    }

    pub fn from_gate(kind: GateKind) -> Result<Self> {
        Self::from_sequence(&[kind])
    }

    pub fn pauli(p: Pauli) -> Self {
        Self::from_gate(GateKind::pauli(p)).expect("Paulis are Clifford")
    }

    /// Builds the operator for gates applied in the listed (time) order and
    /// verifies it is Clifford by conjugating `X` and `Z`.
    pub fn from_sequence(sequence: &[GateKind]) -> Result<Self> {
        let mut u = GateKind::I.matrix1().unwrap();
        for g in sequence {
            let m = g
                .matrix1()
                .ok_or_else(|| Error::NonClifford(format!("{g} is not a single-qubit gate")))?;
            u = mat2_mul(&m, &u);
        }
        let ud = mat2_dagger(&u);
        let conj = |p: Pauli| mat2_mul(&mat2_mul(&u, &p.matrix()), &ud);
        let name = || sequence.iter().map(|g| g.name()).collect::<Vec<_>>().join(".");
        let xi = match_signed_pauli(&conj(Pauli::X)).ok_or_else(|| Error::NonClifford(name()))?;
        let yi = match_signed_pauli(&conj(Pauli::Y)).ok_or_else(|| Error::NonClifford(name()))?;
        let zi = match_signed_pauli(&conj(Pauli::Z)).ok_or_else(|| Error::NonClifford(name()))?;
        Ok(SingleQubitClifford {
            sequence: sequence.to_vec(),
            matrix: u,
            images: [(Pauli::I, false), xi, yi, zi],
        })
    }

    /// Parses a `.`-separated, time-ordered gate sequence such as `x`,
    /// `tdg.x.t` or `t.x.tdg.x`.
    pub fn parse(s: &str) -> Result<Self> {
        let seq = s
            .split('.')
            .map(|t| t.trim().parse::<GateKind>())
            .collect::<Result<Vec<_>>>()?;
        if seq.iter().any(|g| g.arity() != 1) {
            return Err(Error::Schema(format!("{s:?} is not a single-qubit operation")));
        }
        Self::from_sequence(&seq)
    }

    pub fn sequence(&self) -> &[GateKind] {
        &self.sequence
    }

    pub fn matrix(&self) -> Mat2 {
        self.matrix
    }

    /// `C P C†` for a single-qubit Pauli, as `(Pauli, negative)`.
    pub fn image(&self, p: Pauli) -> (Pauli, bool) {
        self.images[pauli_index(p)]
    }

    /// The Pauli this operation equals up to global phase, if any.
    pub fn as_pauli(&self) -> Option<Pauli> {
        // A Pauli C satisfies C P C† = ±P for all P.
        let fixes = [Pauli::X, Pauli::Z]
            .iter()
            .all(|&p| self.image(p).0 == p);
        if !fixes {
            return None;
        }
        let neg_x = self.image(Pauli::X).1;
        let neg_z = self.image(Pauli::Z).1;
        Some(match (neg_x, neg_z) {
            (false, false) => Pauli::I,
            (false, true) => Pauli::X,
            (true, true) => Pauli::Y,
            (true, false) => Pauli::Z,
        })
    }

    /// Conjugates the component of `p` on qubit `q` in place.
    pub fn conjugate_on(&self, p: &mut PauliString, q: usize) {
        let (img, neg) = self.image(p.get(q));
        p.set(q, img);
        if neg {
            p.mul_phase(2);
        }
    }

    /// Sequence text accepted by [`SingleQubitClifford::parse`].
    pub fn name(&self) -> String {
        if self.sequence.is_empty() {
            return "id".into();
        }
        self.sequence
            .iter()
            .map(|g| g.name())
            .collect::<Vec<_>>()
            .join(".")
    }

    /// `self` followed by `other` in time.
    pub fn then(&self, other: &SingleQubitClifford) -> SingleQubitClifford {
        let mut seq = self.sequence.clone();
        seq.extend_from_slice(&other.sequence);
        Self::from_sequence(&seq).expect("product of Cliffords is Clifford")
    }
}

impl fmt::Display for SingleQubitClifford {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// An n-qubit Clifford stored as the conjugation images of every `X_j` and
/// `Z_j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CliffordOp {
    n: usize,
    x_images: Vec<PauliString>,
    z_images: Vec<PauliString>,
}

impl CliffordOp {
    pub fn identity(n: usize) -> Self {
        CliffordOp {
            n,
            x_images: (0..n).map(|q| PauliString::single(n, q, Pauli::X)).collect(),
            z_images: (0..n).map(|q| PauliString::single(n, q, Pauli::Z)).collect(),
        }
    }

    /// Clifford implemented by applying `gates` in order.
    pub fn from_gates(n: usize, gates: &[Gate]) -> Result<Self> {
        let mut c = Self::identity(n);
        for g in gates {
            c.then_gate(g)?;
        }
        Ok(c)
    }

    /// Embeds a single-qubit Clifford acting on qubit `q`.
    pub fn from_single(n: usize, q: usize, c: &SingleQubitClifford) -> Self {
        let mut op = Self::identity(n);
        for img in op.x_images.iter_mut().chain(op.z_images.iter_mut()) {
            c.conjugate_on(img, q);
        }
        op
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn x_image(&self, q: usize) -> &PauliString {
        &self.x_images[q]
    }

    pub fn z_image(&self, q: usize) -> &PauliString {
        &self.z_images[q]
    }

    /// Appends a gate (applied after the current operator).
    pub fn then_gate(&mut self, gate: &Gate) -> Result<()> {
        for img in self.x_images.iter_mut().chain(self.z_images.iter_mut()) {
            conjugate_by_gate(img, gate)?;
        }
        Ok(())
    }

    /// `c p c†` with exact sign.
    pub fn conjugate(&self, p: &PauliString) -> Result<PauliString> {
        if p.num_qubits() != self.n {
            return Err(Error::DimensionMismatch {
                left: self.n,
                right: p.num_qubits(),
            });
        }
        let mut out = PauliString::identity(self.n).with_phase(p.phase());
        let mut ys = 0i64;
        for q in 0..self.n {
            let (x, z) = (p.x_bit(q), p.z_bit(q));
            if x {
                out = out.multiply_unchecked(&self.x_images[q]);
            }
            if z {
                out = out.multiply_unchecked(&self.z_images[q]);
            }
            if x && z {
                ys += 1;
            }
        }
        // Y = i X Z on each qubit
        out.mul_phase(ys);
        Ok(out)
    }

    /// `self` followed by `other`.
    pub fn then(&self, other: &CliffordOp) -> Result<CliffordOp> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch {
                left: self.n,
                right: other.n,
            });
        }
        Ok(CliffordOp {
            n: self.n,
            x_images: self
                .x_images
                .iter()
                .map(|p| other.conjugate(p))
                .collect::<Result<_>>()?,
            z_images: self
                .z_images
                .iter()
                .map(|p| other.conjugate(p))
                .collect::<Result<_>>()?,
        })
    }

    /// Inverse operator.
    pub fn inverse(&self) -> CliffordOp {
        // Unsigned inverse images follow from S^{-1} = Ω Sᵀ Ω; signs are
        // fixed afterwards by applying the forward map.
        let n = self.n;
        let mut x_images = Vec::with_capacity(n);
        let mut z_images = Vec::with_capacity(n);
        for j in 0..n {
            for want_x in [true, false] {
                // C(R) = E: x bit of R on k is <E, C(Z_k)>, z bit is <E, C(X_k)>.
                let e = if want_x {
                    PauliString::single(n, j, Pauli::X)
                } else {
                    PauliString::single(n, j, Pauli::Z)
                };
                let mut r = PauliString::identity(n);
                for k in 0..n {
                    let xb = e.symplectic_unchecked(&self.z_images[k]) == 1;
                    let zb = e.symplectic_unchecked(&self.x_images[k]) == 1;
                    r.set(k, Pauli::from_bits(xb, zb));
                }
                let img = self.conjugate(&r).expect("dimensions agree");
                debug_assert!(img.unsigned() == e);
                if img.phase() != Phase::ONE {
                    r.mul_phase(2);
                }
                if want_x {
                    x_images.push(r);
                } else {
                    z_images.push(r);
                }
            }
        }
        CliffordOp {
            n,
            x_images,
            z_images,
        }
    }

    /// Checks the tableau preserves commutation relations and maps to
    /// Hermitian Paulis.
    pub fn is_valid(&self) -> bool {
        let all: Vec<(&PauliString, bool, usize)> = self
            .x_images
            .iter()
            .enumerate()
            .map(|(q, p)| (p, true, q))
            .chain(self.z_images.iter().enumerate().map(|(q, p)| (p, false, q)))
            .collect();
        for (a, ax, aq) in &all {
            if a.phase().sign().is_none() || a.is_identity() {
                return false;
            }
            for (b, bx, bq) in &all {
                let expected = (aq == bq && ax != bx) as u8;
                if a.symplectic_unchecked(b) != expected {
                    return false;
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use num_complex::Complex64;

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    /// Dense unitary for a gate list (oracle).
    #[allow(clippy::needless_range_loop)]
    fn dense(n: usize, gates: &[Gate]) -> DMatrix<Complex64> {
        let dim = 1 << n;
        let mut u = DMatrix::<Complex64>::identity(dim, dim);
        for g in gates {
            let mut gm = DMatrix::<Complex64>::zeros(dim, dim);
            for col in 0..dim {
                if g.kind.arity() == 1 {
                    let m = g.kind.matrix1().unwrap();
                    let bit = n - 1 - g.qubits[0];
                    let b = (col >> bit) & 1;
                    for r in 0..2 {
                        let row = (col & !(1 << bit)) | (r << bit);
                        gm[(row, col)] += m[r][b];
                    }
                } else {
                    let m = g.kind.matrix2().unwrap();
                    let (b0, b1) = (n - 1 - g.qubits[0], n - 1 - g.qubits[1]);
                    let idx = (((col >> b0) & 1) << 1) | ((col >> b1) & 1);
                    for r in 0..4 {
                        let row = (col & !(1 << b0) & !(1 << b1))
                            | (((r >> 1) & 1) << b0)
                            | ((r & 1) << b1);
                        gm[(row, col)] += m[r][idx];
                    }
                }
            }
            u = gm * u;
        }
        u
    }

    #[test]
    fn conjugate_examples() {
        let h = CliffordOp::from_gates(1, &[Gate::one(GateKind::H, 0)]).unwrap();
        assert_eq!(h.conjugate(&p("X")).unwrap(), p("Z"));
        let cx = CliffordOp::from_gates(2, &[Gate::cx(0, 1)]).unwrap();
        assert_eq!(cx.conjugate(&p("XI")).unwrap(), p("XX"));
        assert_eq!(cx.conjugate(&p("IZ")).unwrap(), p("ZZ"));
        assert!(cx.conjugate(&p("X")).is_err());
    }

    #[test]
    fn gate_conjugation_matches_dense() {
        let kinds = [
            GateKind::X,
            GateKind::Y,
            GateKind::Z,
            GateKind::H,
            GateKind::S,
            GateKind::Sdg,
        ];
        let two = [GateKind::Cx, GateKind::Cz, GateKind::Swap];
        let mut gates: Vec<Gate> = kinds.iter().map(|&k| Gate::one(k, 1)).collect();
        gates.extend(two.iter().map(|&k| Gate::new(k, &[1, 0])));
        gates.extend(two.iter().map(|&k| Gate::new(k, &[0, 1])));
        for g in &gates {
            let c = CliffordOp::from_gates(2, std::slice::from_ref(g)).unwrap();
            let u = dense(2, std::slice::from_ref(g));
            for q in PauliString::all(2) {
                let img = c.conjugate(&q).unwrap();
                let want = &u * q.to_matrix() * u.adjoint();
                let diff = (img.to_matrix() - want).iter().map(|v| v.norm()).fold(0.0, f64::max);
                assert!(diff < 1e-12, "{} on {}: got {}", g.kind, q, img);
            }
        }
    }

    #[test]
    fn inverse_composes_to_identity() {
        let gates = vec![
            Gate::one(GateKind::H, 0),
            Gate::cx(0, 2),
            Gate::one(GateKind::S, 1),
            Gate::new(GateKind::Cz, &[1, 2]),
            Gate::one(GateKind::Y, 2),
            Gate::one(GateKind::Sdg, 0),
        ];
        let c = CliffordOp::from_gates(3, &gates).unwrap();
        assert!(c.is_valid());
        let inv = c.inverse();
        assert!(inv.is_valid());
        assert_eq!(c.then(&inv).unwrap(), CliffordOp::identity(3));
        assert_eq!(inv.then(&c).unwrap(), CliffordOp::identity(3));
    }

    #[test]
    fn t_conjugates_are_clifford() {
        let a = SingleQubitClifford::parse("tdg.x.t").unwrap();
        assert_eq!(a.image(Pauli::X), (Pauli::Y, false));
        assert_eq!(a.image(Pauli::Z), (Pauli::Z, true));
        let b = SingleQubitClifford::parse("t.x.tdg.x").unwrap();
        assert_eq!(b.image(Pauli::Z), (Pauli::Z, false));
        assert_eq!(b.image(Pauli::X).0, Pauli::Y);
        assert!(matches!(
            SingleQubitClifford::parse("t"),
            Err(Error::NonClifford(_))
        ));
        assert!(CliffordOp::from_single(1, 0, &a).is_valid());
    }

    #[test]
    fn single_pauli_detection() {
        for q in [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z] {
            assert_eq!(SingleQubitClifford::pauli(q).as_pauli(), Some(q));
        }
        assert_eq!(SingleQubitClifford::parse("h").unwrap().as_pauli(), None);
        // i X Z = Y up to phase
        assert_eq!(SingleQubitClifford::parse("z.x").unwrap().as_pauli(), Some(Pauli::Y));
    }
}
