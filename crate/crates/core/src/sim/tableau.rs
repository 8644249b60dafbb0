//! Aaronson–Gottesman stabilizer tableau for up to 64 qubits.
//!
//! Rows `0..n` are destabilizers, `n..2n` stabilizers, row `2n` is scratch.
//! Each row packs its X and Z bits into one word each (bit `q` is qubit `q`).

use rand::Rng;

use crate::pauli::{Pauli, PauliString};

#[derive(Clone, Debug)]
pub struct Tableau {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    r: Vec<bool>,
}

/// Images of `X`, `Y`, `Z` under a single-qubit Clifford as `(x, z, negate)`.
pub type SingleImages = [(bool, bool, bool); 3];

pub fn single_images(c: &crate::clifford::SingleQubitClifford) -> SingleImages {
    let f = |p: Pauli| {
        let (img, neg) = c.image(p);
        let (x, z) = img.bits();
        (x, z, neg)
    };
    [f(Pauli::X), f(Pauli::Y), f(Pauli::Z)]
}

#[inline]
fn rowsum_phase(x1: u64, z1: u64, x2: u64, z2: u64) -> i32 {
    // Σ_j g(x1, z1, x2, z2) for the product (row 1)·(row 2)
    let y1 = x1 & z1;
    let xo = x1 & !z1;
    let zo = !x1 & z1;
    let pos = (y1 & z2 & !x2) | (xo & z2 & x2) | (zo & x2 & !z2);
    let neg = (y1 & x2 & !z2) | (xo & z2 & !x2) | (zo & x2 & z2);
    pos.count_ones() as i32 - neg.count_ones() as i32
}

impl Tableau {
    /// The state `|0…0⟩`.
    pub fn new(n: usize) -> Self {
        assert!(n <= 64, "tableau supports at most 64 qubits");
        let rows = 2 * n + 1;
        let mut t = Tableau {
            n,
            x: vec![0; rows],
            z: vec![0; rows],
            r: vec![false; rows],
        };
        for q in 0..n {
            t.x[q] = 1 << q;
            t.z[n + q] = 1 << q;
        }
        t
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    fn rowsum(&mut self, h: usize, i: usize) {
        let sum = 2 * self.r[h] as i32
            + 2 * self.r[i] as i32
            + rowsum_phase(self.x[i], self.z[i], self.x[h], self.z[h]);
        self.r[h] = sum.rem_euclid(4) == 2;
        self.x[h] ^= self.x[i];
        self.z[h] ^= self.z[i];
    }

    pub fn h(&mut self, q: usize) {
        let m = 1u64 << q;
        for i in 0..2 * self.n {
            let (xb, zb) = (self.x[i] & m, self.z[i] & m);
            if xb != 0 && zb != 0 {
                self.r[i] ^= true;
            }
            self.x[i] = (self.x[i] & !m) | zb;
            self.z[i] = (self.z[i] & !m) | xb;
        }
    }

    pub fn s(&mut self, q: usize) {
        let m = 1u64 << q;
        for i in 0..2 * self.n {
            if self.x[i] & m != 0 {
                if self.z[i] & m != 0 {
                    self.r[i] ^= true;
                }
                self.z[i] ^= m;
            }
        }
    }

    pub fn cx(&mut self, c: usize, t: usize) {
        let (mc, mt) = (1u64 << c, 1u64 << t);
        for i in 0..2 * self.n {
            let xc = self.x[i] & mc != 0;
            let zt = self.z[i] & mt != 0;
            let xt = self.x[i] & mt != 0;
            let zc = self.z[i] & mc != 0;
            if xc && zt && (xt == zc) {
                self.r[i] ^= true;
            }
            if xc {
                self.x[i] ^= mt;
            }
            if zt {
                self.z[i] ^= mc;
            }
        }
    }

    pub fn cz(&mut self, a: usize, b: usize) {
        self.h(b);
        self.cx(a, b);
        self.h(b);
    }

    pub fn swap(&mut self, a: usize, b: usize) {
        self.cx(a, b);
        self.cx(b, a);
        self.cx(a, b);
    }

    /// Applies a single-qubit Clifford given by its Pauli images.
    pub fn apply_single(&mut self, q: usize, images: &SingleImages) {
        let m = 1u64 << q;
        for i in 0..2 * self.n {
            let xb = self.x[i] & m != 0;
            let zb = self.z[i] & m != 0;
            let k = match (xb, zb) {
                (false, false) => continue,
                (true, false) => 0,
                (true, true) => 1,
                (false, true) => 2,
            };
            let (nx, nz, neg) = images[k];
            self.x[i] = (self.x[i] & !m) | if nx { m } else { 0 };
            self.z[i] = (self.z[i] & !m) | if nz { m } else { 0 };
            self.r[i] ^= neg;
        }
    }

    /// Applies an (unsigned) Pauli given as qubit masks.
    pub fn apply_pauli_masks(&mut self, px: u64, pz: u64) {
        if px | pz == 0 {
            return;
        }
        for i in 0..2 * self.n {
            let anti = ((self.x[i] & pz).count_ones() + (self.z[i] & px).count_ones()) & 1;
            self.r[i] ^= anti == 1;
        }
    }

    pub fn apply_pauli(&mut self, p: &PauliString) {
        self.apply_pauli_masks(p.x_mask(), p.z_mask());
    }

    /// Z-basis measurement of `q`, collapsing the state.
    pub fn measure<R: Rng + ?Sized>(&mut self, q: usize, rng: &mut R) -> u8 {
        let n = self.n;
        let m = 1u64 << q;
        if let Some(p) = (n..2 * n).find(|&i| self.x[i] & m != 0) {
            for i in 0..2 * n {
                if i != p && self.x[i] & m != 0 {
                    self.rowsum(i, p);
                }
            }
            self.x[p - n] = self.x[p];
            self.z[p - n] = self.z[p];
            self.r[p - n] = self.r[p];
            self.x[p] = 0;
            self.z[p] = m;
            let outcome = rng.gen::<bool>();
            self.r[p] = outcome;
            outcome as u8
        } else {
            let s = 2 * n;
            self.x[s] = 0;
            self.z[s] = 0;
            self.r[s] = false;
            for i in 0..n {
                if self.x[i] & m != 0 {
                    self.rowsum(s, i + n);
                }
            }
            self.r[s] as u8
        }
    }

    /// Outcome of measuring `q` if it is deterministic, without collapsing.
    pub fn peek_deterministic(&mut self, q: usize) -> Option<u8> {
        let n = self.n;
        let m = 1u64 << q;
        if (n..2 * n).any(|i| self.x[i] & m != 0) {
            return None;
        }
        let s = 2 * n;
        self.x[s] = 0;
        self.z[s] = 0;
        self.r[s] = false;
        for i in 0..n {
            if self.x[i] & m != 0 {
                self.rowsum(s, i + n);
            }
        }
        Some(self.r[s] as u8)
    }

    /// Stabilizer generators as signed Pauli strings.
    pub fn stabilizers(&self) -> Vec<PauliString> {
        (self.n..2 * self.n)
            .map(|i| {
                let mut p = PauliString::from_masks(self.n, self.x[i], self.z[i], crate::pauli::Phase::ONE);
                if self.r[i] {
                    p.mul_phase(2);
                }
                p
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn bell_pair_outcomes_agree() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut seen = [0; 2];
        for _ in 0..200 {
            let mut t = Tableau::new(2);
            t.h(0);
            t.cx(0, 1);
            let a = t.measure(0, &mut rng);
            let b = t.measure(1, &mut rng);
            assert_eq!(a, b);
            seen[a as usize] += 1;
        }
        assert!(seen[0] > 50 && seen[1] > 50);
    }

    #[test]
    fn x_flips_deterministic_outcome() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut t = Tableau::new(3);
        t.apply_pauli(&"IXY".parse().unwrap());
        assert_eq!(t.measure(0, &mut rng), 0);
        assert_eq!(t.measure(1, &mut rng), 1);
        assert_eq!(t.measure(2, &mut rng), 1);
    }

    #[test]
    fn sign_tracking_through_s_and_h() {
        // S H |0⟩ = |+i⟩; H S† |+i⟩... check via Y stabilizer sign
        let mut t = Tableau::new(1);
        t.h(0);
        t.s(0);
        assert_eq!(t.stabilizers()[0].label(), "Y");
        t.s(0);
        assert_eq!(t.stabilizers()[0].label(), "-X");
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        t.h(0);
        assert_eq!(t.measure(0, &mut rng), 1);
    }
}
