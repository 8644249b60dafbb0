use std::collections::BTreeMap;

use serde_json::{Map, Value};

use crate::circuit::FeedforwardRule;
use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString};

/// Histogram over `(recorded clbits, terminal bits)`; bit `k` of each mask
/// is clbit / qubit `k`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Counts {
    n_clbits: usize,
    n_qubits: usize,
    map: BTreeMap<(u64, u64), u64>,
}

fn bitstring(mask: u64, len: usize) -> String {
    (0..len)
        .map(|k| if (mask >> k) & 1 == 1 { '1' } else { '0' })
        .collect()
}

impl Counts {
    pub fn new(n_clbits: usize, n_qubits: usize) -> Self {
        Counts {
            n_clbits,
            n_qubits,
            map: BTreeMap::new(),
        }
    }

    pub fn n_clbits(&self) -> usize {
        self.n_clbits
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn add(&mut self, clbits: u64, terminal: u64, k: u64) {
        *self.map.entry((clbits, terminal)).or_insert(0) += k;
    }

    pub fn merge(&mut self, other: &Counts) {
        for (&(c, t), &k) in &other.map {
            self.add(c, t, k);
        }
    }

    pub fn total(&self) -> u64 {
        self.map.values().sum()
    }

    pub fn get(&self, clbits: u64, terminal: u64) -> u64 {
        self.map.get(&(clbits, terminal)).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = ((u64, u64), u64)> + '_ {
        self.map.iter().map(|(&k, &v)| (k, v))
    }

    /// Counts with the listed recorded bits inverted.
    pub fn corrected(&self, flip_mask: u64) -> Counts {
        let mut out = Counts::new(self.n_clbits, self.n_qubits);
        for ((c, t), k) in self.iter() {
            out.add(c ^ flip_mask, t, k);
        }
        out
    }

    /// Marginal counts of the recorded clbits.
    pub fn clbit_marginal(&self) -> BTreeMap<u64, u64> {
        let mut m = BTreeMap::new();
        for ((c, _), k) in self.iter() {
            *m.entry(c).or_insert(0) += k;
        }
        m
    }

    /// Key text: clbits then terminal bits, each with index 0 leftmost,
    /// separated by a space; only the terminal bits when there are no clbits.
    pub fn key(&self, clbits: u64, terminal: u64) -> String {
        let t = bitstring(terminal, self.n_qubits);
        if self.n_clbits == 0 {
            t
        } else {
            format!("{} {t}", bitstring(clbits, self.n_clbits))
        }
    }

    pub fn to_json_value(&self) -> Value {
        let mut m = Map::new();
        for ((c, t), k) in self.iter() {
            m.insert(self.key(c, t), Value::from(k));
        }
        Value::Object(m)
    }
}

/// `(−1)^{⟨C, O⟩}` accumulated over the Pauli rules that fire on `clbits`.
pub fn software_recovery_sign(rules: &[FeedforwardRule], clbits: u64, o: &PauliString) -> Result<i8> {
    let mut sign = 1i8;
    for r in rules {
        if ((clbits >> r.clbit) & 1) as u8 != r.value {
            continue;
        }
        let c = r
            .op
            .as_pauli()
            .ok_or_else(|| Error::Unsupported(format!("non-Pauli recovery {}", r.op.name())))?;
        if r.target >= o.num_qubits() {
            return Err(Error::IndexOutOfRange(format!("recovery target {}", r.target)));
        }
        if !Pauli::commute(c, o.get(r.target)) {
            sign = -sign;
        }
    }
    Ok(sign)
}

/// Z-parity mask and sign of a diagonal observable.
pub(crate) fn diagonal_observable(o: &PauliString) -> Result<(u64, f64)> {
    if o.num_qubits() > 64 || (0..o.num_qubits()).any(|q| o.x_bit(q)) {
        return Err(Error::Unsupported(format!(
            "observable {o} is not diagonal; rotate it into the Z basis first"
        )));
    }
    let sign = match o.phase().sign() {
        Some(s) => s as f64,
        None => return Err(Error::Unsupported(format!("observable {o} is not Hermitian"))),
    };
    Ok((o.z_mask(), sign))
}

/// Weighted mean eigenvalue of a diagonal observable over outcomes, with
/// optional software recovery.
pub fn weighted_expectation(
    outcomes: impl IntoIterator<Item = ((u64, u64), f64)>,
    o: &PauliString,
    recovery: &[FeedforwardRule],
) -> Result<f64> {
    rotated_expectation(outcomes, o, o, recovery)
}

/// Like [`weighted_expectation`] for an observable measured after a basis
/// rotation: parities come from the diagonal `measured`, recovery signs from
/// the unrotated `original`.
pub fn rotated_expectation(
    outcomes: impl IntoIterator<Item = ((u64, u64), f64)>,
    measured: &PauliString,
    original: &PauliString,
    recovery: &[FeedforwardRule],
) -> Result<f64> {
    let (mask, sign) = diagonal_observable(measured)?;
    let o = original;
    let (mut acc, mut total) = (0.0, 0.0);
    for ((c, t), w) in outcomes {
        let parity = if (t & mask).count_ones() & 1 == 1 { -1.0 } else { 1.0 };
        let rec = software_recovery_sign(recovery, c, o)? as f64;
        acc += w * parity * rec;
        total += w;
    }
    if total == 0.0 {
        return Err(Error::EmptySamples);
    }
    Ok(sign * acc / total)
}

/// Mean eigenvalue of a diagonal observable over counts.
pub fn expectation(counts: &Counts, o: &PauliString, recovery: &[FeedforwardRule]) -> Result<f64> {
    if o.num_qubits() != counts.n_qubits {
        return Err(Error::DimensionMismatch {
            left: counts.n_qubits,
            right: o.num_qubits(),
        });
    }
    weighted_expectation(counts.iter().map(|(k, v)| (k, v as f64)), o, recovery)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_zero_counts() {
        let mut c = Counts::new(0, 1);
        c.add(0, 0, 10);
        assert_eq!(expectation(&c, &"Z".parse().unwrap(), &[]).unwrap(), 1.0);
        assert!(expectation(&c, &"X".parse().unwrap(), &[]).is_err());
    }

    #[test]
    fn recovery_signs() {
        let rule = FeedforwardRule::pauli(0, 1, Pauli::X, 0);
        let z: PauliString = "Z".parse().unwrap();
        let x: PauliString = "X".parse().unwrap();
        assert_eq!(software_recovery_sign(std::slice::from_ref(&rule), 1, &z).unwrap(), -1);
        assert_eq!(software_recovery_sign(std::slice::from_ref(&rule), 0, &z).unwrap(), 1);
        assert_eq!(software_recovery_sign(std::slice::from_ref(&rule), 1, &x).unwrap(), 1);
        let mut c = Counts::new(1, 1);
        c.add(1, 0, 3);
        assert_eq!(expectation(&c, &z, &[rule]).unwrap(), -1.0);
    }

    #[test]
    fn key_format() {
        let mut c = Counts::new(2, 3);
        c.add(0b01, 0b110, 1);
        assert_eq!(c.key(0b01, 0b110), "10 011");
        assert_eq!(c.to_json_value().to_string(), r#"{"10 011":1}"#);
    }
}
