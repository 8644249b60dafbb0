//! Gate vocabulary shared by the circuit IR and both simulators.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::de::{self, SeqAccess, Visitor};
use serde::ser::SerializeTuple;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::pauli::Pauli;

pub type Mat2 = [[Complex64; 2]; 2];
pub type Mat4 = [[Complex64; 4]; 4];

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GateKind {
    I,
    X,
    Y,
    Z,
    H,
    S,
    Sdg,
    T,
    Tdg,
    /// `exp(-i θ Y / 2)`
    Ry(f64),
    /// `exp(-i θ Z / 2)`
    Rz(f64),
    Cx,
    Cz,
    Swap,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::Cx | GateKind::Cz | GateKind::Swap => 2,
            _ => 1,
        }
    }

    /// Gates the stabilizer backend can execute.
    pub fn is_clifford(self) -> bool {
        !matches!(
            self,
            GateKind::T | GateKind::Tdg | GateKind::Ry(_) | GateKind::Rz(_)
        )
    }

    pub fn pauli(p: Pauli) -> GateKind {
        match p {
            Pauli::I => GateKind::I,
            Pauli::X => GateKind::X,
            Pauli::Y => GateKind::Y,
            Pauli::Z => GateKind::Z,
        }
    }

    pub fn name(self) -> String {
        match self {
            GateKind::I => "id".into(),
            GateKind::X => "x".into(),
            GateKind::Y => "y".into(),
            GateKind::Z => "z".into(),
            GateKind::H => "h".into(),
            GateKind::S => "s".into(),
            GateKind::Sdg => "sdg".into(),
            GateKind::T => "t".into(),
            GateKind::Tdg => "tdg".into(),
            GateKind::Ry(t) => format!("ry({t})"),
            GateKind::Rz(t) => format!("rz({t})"),
            GateKind::Cx => "cx".into(),
            GateKind::Cz => "cz".into(),
            GateKind::Swap => "swap".into(),
        }
    }

    /// Unitary of a single-qubit gate.
    pub fn matrix1(self) -> Option<Mat2> {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let o = c(0.0, 0.0);
        let l = c(1.0, 0.0);
        let h = c(FRAC_1_SQRT_2, 0.0);
        let w = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
        Some(match self {
            GateKind::I => Pauli::I.matrix(),
            GateKind::X => Pauli::X.matrix(),
            GateKind::Y => Pauli::Y.matrix(),
            GateKind::Z => Pauli::Z.matrix(),
            GateKind::H => [[h, h], [h, -h]],
            GateKind::S => [[l, o], [o, c(0.0, 1.0)]],
            GateKind::Sdg => [[l, o], [o, c(0.0, -1.0)]],
            GateKind::T => [[l, o], [o, w]],
            GateKind::Tdg => [[l, o], [o, w.conj()]],
            GateKind::Ry(t) => {
                let (s, co) = (t / 2.0).sin_cos();
                [[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]]
            }
            GateKind::Rz(t) => [
                [Complex64::from_polar(1.0, -t / 2.0), o],
                [o, Complex64::from_polar(1.0, t / 2.0)],
            ],
            _ => return None,
        })
    }

    /// Unitary of a two-qubit gate on `(q0, q1)` with `q0` the more
    /// significant index (for `cx`, `q0` is the control).
    pub fn matrix2(self) -> Option<Mat4> {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        let mut m = [[o; 4]; 4];
        match self {
            GateKind::Cx => {
                m[0][0] = l;
                m[1][1] = l;
                m[2][3] = l;
                m[3][2] = l;
            }
            GateKind::Cz => {
                m[0][0] = l;
                m[1][1] = l;
                m[2][2] = l;
                m[3][3] = -l;
            }
            GateKind::Swap => {
                m[0][0] = l;
                m[1][2] = l;
                m[2][1] = l;
                m[3][3] = l;
            }
            _ => return None,
        }
        Some(m)
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for GateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let angle = |prefix: &str| -> Option<Result<f64>> {
            s.strip_prefix(prefix)
                .and_then(|r| r.strip_suffix(')'))
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Schema(format!("bad gate angle in {s:?}")))
                })
        };
        if let Some(t) = angle("ry(") {
            return Ok(GateKind::Ry(t?));
        }
        if let Some(t) = angle("rz(") {
            return Ok(GateKind::Rz(t?));
        }
        Ok(match s {
            "id" | "i" => GateKind::I,
            "x" => GateKind::X,
            "y" => GateKind::Y,
            "z" => GateKind::Z,
            "h" => GateKind::H,
            "s" => GateKind::S,
            "sdg" => GateKind::Sdg,
            "t" => GateKind::T,
            "tdg" => GateKind::Tdg,
            "cx" | "cnot" => GateKind::Cx,
            "cz" => GateKind::Cz,
            "swap" => GateKind::Swap,
            other => return Err(Error::Schema(format!("unknown gate {other:?}"))),
        })
    }
}

/// A gate applied to specific qubits. Serialized as `["cx", [0, 1]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
}

impl Gate {
    pub fn new(kind: GateKind, qubits: &[usize]) -> Self {
        Gate {
            kind,
            qubits: qubits.to_vec(),
        }
    }

    pub fn one(kind: GateKind, q: usize) -> Self {
        Gate::new(kind, &[q])
    }

    pub fn cx(control: usize, target: usize) -> Self {
        Gate::new(GateKind::Cx, &[control, target])
    }
}

impl Serialize for Gate {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut t = serializer.serialize_tuple(2)?;
        t.serialize_element(&self.kind.name())?;
        t.serialize_element(&self.qubits)?;
        t.end()
    }
}

impl<'de> Deserialize<'de> for Gate {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct GateVisitor;
        impl<'de> Visitor<'de> for GateVisitor {
            type Value = Gate;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a [name, [qubits...]] pair")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<Gate, A::Error> {
                let name: String = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(0, &self))?;
                let qubits: Vec<usize> = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(1, &self))?;
                let kind: GateKind = name.parse().map_err(de::Error::custom)?;
                if qubits.len() != kind.arity() {
                    return Err(de::Error::custom(format!(
                        "gate {name} expects {} qubits, got {}",
                        kind.arity(),
                        qubits.len()
                    )));
                }
                Ok(Gate { kind, qubits })
            }
        }
        deserializer.deserialize_tuple(2, GateVisitor)
    }
}

pub(crate) fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub(crate) fn mat2_dagger(a: &Mat2) -> Mat2 {
    [
        [a[0][0].conj(), a[1][0].conj()],
        [a[0][1].conj(), a[1][1].conj()],
    ]
}
