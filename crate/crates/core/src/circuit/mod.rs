//! Dynamic-circuit intermediate representation.
//!
//! A [`DynamicCircuit`] is an ordered list of [`Layer`]s over `n_qubits`
//! qubits and `n_clbits` classical bits. Measurement layers write classical
//! bits and may carry [`FeedforwardRule`]s that fire on those bits. Layers
//! with a `label` are PEC layers: they can be twirled, receive a noise
//! binding in the simulators and can be mitigated.
//!
//! The JSON form is
//!
//! ```json
//! { "n_qubits": 2, "n_clbits": 1, "layers": [
//!     {"kind": "unitary", "gates": [["cx", [0, 1]]], "label": "ul"},
//!     {"kind": "measurement", "qubits": [1], "clbits": [0],
//!      "feedforward": [{"clbit": 0, "value": 1, "op": "x", "target": 0}]},
//!     {"kind": "delay", "tag": "ff_latency"},
//!     {"kind": "dephase", "qubits": [1]} ] }
//! ```
//!
//! `label` and `support` are optional extensions; `support` lists spectator
//! qubits that share a measurement layer's noise and twirl.

pub mod passes;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::clifford::{CliffordOp, SingleQubitClifford};
use crate::error::{Error, Result};
use crate::gate::{Gate, GateKind};
use crate::pauli::{Pauli, PauliString};

/// What a feedforward rule does when it fires.
#[derive(Clone, Debug, PartialEq)]
pub enum FeedforwardOp {
    /// Conditional delay of single-qubit-gate duration (identity on the state).
    Delay,
    /// Single-qubit Clifford on the rule's target.
    Clifford(SingleQubitClifford),
    /// Classically-controlled CNOT from `control` onto the rule's target.
    ControlledX { control: usize },
}

impl FeedforwardOp {
    pub fn name(&self) -> String {
        match self {
            FeedforwardOp::Delay => "delay".into(),
            FeedforwardOp::Clifford(c) => c.name(),
            FeedforwardOp::ControlledX { .. } => "cx".into(),
        }
    }

    /// The Pauli this operation is, if it is one (a delay counts as `I`).
    pub fn as_pauli(&self) -> Option<Pauli> {
        match self {
            FeedforwardOp::Delay => Some(Pauli::I),
            FeedforwardOp::Clifford(c) => c.as_pauli(),
            FeedforwardOp::ControlledX { .. } => None,
        }
    }
}

/// Operation applied to `target` when classical bit `clbit` equals `value`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRule", into = "RawRule")]
pub struct FeedforwardRule {
    pub clbit: usize,
    pub value: u8,
    pub op: FeedforwardOp,
    pub target: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    clbit: usize,
    value: u8,
    op: String,
    target: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    control: Option<usize>,
}

impl TryFrom<RawRule> for FeedforwardRule {
    type Error = Error;
    fn try_from(r: RawRule) -> Result<Self> {
        if r.value > 1 {
            return Err(Error::Schema(format!("feedforward value {} is not a bit", r.value)));
        }
        let op = match (r.op.as_str(), r.control) {
            ("delay", None) => FeedforwardOp::Delay,
            ("cx", Some(control)) => FeedforwardOp::ControlledX { control },
            ("cx", None) => {
                return Err(Error::Schema("conditional cx needs a \"control\" field".into()))
            }
            (_, Some(_)) => {
                return Err(Error::Schema(format!("op {:?} does not take a control", r.op)))
            }
            (s, None) => FeedforwardOp::Clifford(SingleQubitClifford::parse(s)?),
        };
        Ok(FeedforwardRule {
            clbit: r.clbit,
            value: r.value,
            op,
            target: r.target,
        })
    }
}

impl From<FeedforwardRule> for RawRule {
    fn from(r: FeedforwardRule) -> Self {
        let control = match r.op {
            FeedforwardOp::ControlledX { control } => Some(control),
            _ => None,
        };
        RawRule {
            clbit: r.clbit,
            value: r.value,
            op: r.op.name(),
            target: r.target,
            control,
        }
    }
}

impl FeedforwardRule {
    pub fn pauli(clbit: usize, value: u8, p: Pauli, target: usize) -> Self {
        FeedforwardRule {
            clbit,
            value,
            op: FeedforwardOp::Clifford(SingleQubitClifford::pauli(p)),
            target,
        }
    }

    /// Qubits this rule touches.
    pub fn qubits(&self) -> Vec<usize> {
        match self.op {
            FeedforwardOp::ControlledX { control } => vec![control, self.target],
            _ => vec![self.target],
        }
    }

    /// The full-register Pauli applied when the rule fires, if Pauli.
    pub fn pauli_on(&self, n: usize) -> Option<PauliString> {
        self.op
            .as_pauli()
            .map(|p| PauliString::single(n, self.target, p))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Layer {
    Unitary {
        gates: Vec<Gate>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    Measurement {
        qubits: Vec<usize>,
        clbits: Vec<usize>,
        #[serde(default)]
        feedforward: Vec<FeedforwardRule>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        support: Vec<usize>,
    },
    Delay {
        tag: String,
    },
    Dephase {
        qubits: Vec<usize>,
    },
}

impl Layer {
    pub fn unitary(gates: Vec<Gate>) -> Self {
        Layer::Unitary { gates, label: None }
    }

    pub fn labeled_unitary(label: &str, gates: Vec<Gate>) -> Self {
        Layer::Unitary {
            gates,
            label: Some(label.to_string()),
        }
    }

    pub fn measurement(qubits: &[usize], clbits: &[usize], feedforward: Vec<FeedforwardRule>) -> Self {
        Layer::Measurement {
            qubits: qubits.to_vec(),
            clbits: clbits.to_vec(),
            feedforward,
            label: None,
            support: Vec::new(),
        }
    }

    /// Unlabeled layer applying the Pauli gates of `p` (phase dropped).
    pub fn pauli(p: &PauliString) -> Self {
        let gates = (0..p.num_qubits())
            .filter_map(|q| match p.get(q) {
                Pauli::I => None,
                other => Some(Gate::one(GateKind::pauli(other), q)),
            })
            .collect();
        Layer::unitary(gates)
    }

    pub fn label(&self) -> Option<&str> {
        match self {
            Layer::Unitary { label, .. } | Layer::Measurement { label, .. } => label.as_deref(),
            _ => None,
        }
    }

    pub fn with_label(mut self, new: &str) -> Self {
        match &mut self {
            Layer::Unitary { label, .. } | Layer::Measurement { label, .. } => {
                *label = Some(new.to_string())
            }
            _ => {}
        }
        self
    }

    /// Sets the spectator support of a measurement layer.
    pub fn with_support(mut self, qubits: &[usize]) -> Self {
        if let Layer::Measurement { support, .. } = &mut self {
            *support = qubits.to_vec();
        }
        self
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Layer::Unitary { .. } => "unitary",
            Layer::Measurement { .. } => "measurement",
            Layer::Delay { .. } => "delay",
            Layer::Dephase { .. } => "dephase",
        }
    }

    /// Qubits a twirl of this layer acts on, ascending.
    pub fn twirl_support(&self) -> Vec<usize> {
        let mut s = BTreeSet::new();
        match self {
            Layer::Unitary { gates, .. } => {
                for g in gates {
                    s.extend(g.qubits.iter().copied());
                }
            }
            Layer::Measurement {
                qubits,
                feedforward,
                support,
                ..
            } => {
                s.extend(qubits.iter().copied());
                s.extend(support.iter().copied());
                for r in feedforward {
                    s.extend(r.qubits());
                }
            }
            Layer::Delay { .. } | Layer::Dephase { .. } => {}
        }
        s.into_iter().collect()
    }

    /// True for unitary layers made of Clifford gates and measurement
    /// layers without two-qubit conditionals.
    pub fn is_twirlable(&self) -> bool {
        match self {
            Layer::Unitary { gates, .. } => gates.iter().all(|g| g.kind.is_clifford()),
            Layer::Measurement { feedforward, .. } => feedforward
                .iter()
                .all(|r| !matches!(r.op, FeedforwardOp::ControlledX { .. })),
            _ => false,
        }
    }

    /// Clifford implemented by a unitary layer.
    pub fn clifford(&self, n: usize) -> Result<CliffordOp> {
        match self {
            Layer::Unitary { gates, .. } => CliffordOp::from_gates(n, gates),
            _ => Err(Error::Unsupported(format!("{} layer has no unitary", self.kind_name()))),
        }
    }

    pub fn feedforward(&self) -> &[FeedforwardRule] {
        match self {
            Layer::Measurement { feedforward, .. } => feedforward,
            _ => &[],
        }
    }
}

/// An ordered list of layers over a qubit and a classical register.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCircuit", into = "RawCircuit")]
pub struct DynamicCircuit {
    n_qubits: usize,
    n_clbits: usize,
    layers: Vec<Layer>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCircuit {
    n_qubits: usize,
    n_clbits: usize,
    layers: Vec<Layer>,
}

impl TryFrom<RawCircuit> for DynamicCircuit {
    type Error = Error;
    fn try_from(r: RawCircuit) -> Result<Self> {
        DynamicCircuit::new(r.n_qubits, r.n_clbits, r.layers)
    }
}

impl From<DynamicCircuit> for RawCircuit {
    fn from(c: DynamicCircuit) -> Self {
        RawCircuit {
            n_qubits: c.n_qubits,
            n_clbits: c.n_clbits,
            layers: c.layers,
        }
    }
}

fn check_distinct(layer: usize, qubits: impl IntoIterator<Item = usize>) -> Result<()> {
    let mut seen = BTreeSet::new();
    for q in qubits {
        if !seen.insert(q) {
            return Err(Error::DuplicateQubit { layer, qubit: q });
        }
    }
    Ok(())
}

impl DynamicCircuit {
    /// Validates and builds a circuit.
    pub fn new(n_qubits: usize, n_clbits: usize, layers: Vec<Layer>) -> Result<Self> {
        let c = DynamicCircuit {
            n_qubits,
            n_clbits,
            layers,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_clbits(&self) -> usize {
        self.n_clbits
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn into_layers(self) -> Vec<Layer> {
        self.layers
    }

    /// Index of the layer carrying `label`.
    pub fn find_label(&self, label: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.label() == Some(label))
    }

    /// Distinct labels of PEC layers in order of first appearance. A label
    /// names a noise class, so repeated layers may share one.
    pub fn labels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for l in self.layers.iter().filter_map(|l| l.label()) {
            if !out.iter().any(|o| o == l) {
                out.push(l.to_string());
            }
        }
        out
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_qubits;
        let q_ok = |q: usize, layer: usize| {
            if q >= n {
                Err(Error::IndexOutOfRange(format!(
                    "qubit {q} in layer {layer} (circuit has {n})"
                )))
            } else {
                Ok(())
            }
        };
        let c_ok = |b: usize, layer: usize| {
            if b >= self.n_clbits {
                Err(Error::IndexOutOfRange(format!(
                    "clbit {b} in layer {layer} (circuit has {})",
                    self.n_clbits
                )))
            } else {
                Ok(())
            }
        };
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Unitary { gates, .. } => {
                    for g in gates {
                        if g.qubits.len() != g.kind.arity() {
                            return Err(Error::Schema(format!(
                                "gate {} in layer {i} has {} qubits",
                                g.kind,
                                g.qubits.len()
                            )));
                        }
                        for &q in &g.qubits {
                            q_ok(q, i)?;
                        }
                    }
                    check_distinct(i, gates.iter().flat_map(|g| g.qubits.iter().copied()))?;
                }
                Layer::Measurement {
                    qubits,
                    clbits,
                    feedforward,
                    support,
                    ..
                } => {
                    if qubits.len() != clbits.len() {
                        return Err(Error::Schema(format!(
                            "layer {i}: {} measured qubits but {} clbits",
                            qubits.len(),
                            clbits.len()
                        )));
                    }
                    for &q in qubits.iter().chain(support) {
                        q_ok(q, i)?;
                    }
                    for &b in clbits {
                        c_ok(b, i)?;
                    }
                    check_distinct(i, qubits.iter().copied())?;
                    let mut seen = BTreeSet::new();
                    for &b in clbits {
                        if !seen.insert(b) {
                            return Err(Error::Schema(format!(
                                "layer {i} writes clbit {b} more than once"
                            )));
                        }
                    }
                    for r in feedforward {
                        c_ok(r.clbit, i)?;
                        for q in r.qubits() {
                            q_ok(q, i)?;
                        }
                        if let FeedforwardOp::ControlledX { control } = r.op {
                            if control == r.target {
                                return Err(Error::DuplicateQubit {
                                    layer: i,
                                    qubit: control,
                                });
                            }
                        }
                    }
                }
                Layer::Delay { .. } => {}
                Layer::Dephase { qubits } => {
                    for &q in qubits {
                        q_ok(q, i)?;
                    }
                    check_distinct(i, qubits.iter().copied())?;
                }
            }
        }
        Ok(())
    }

    /// JSON text of the circuit.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("circuit serializes")
    }

    /// Appends a layer rotating every qubit of `observable` into the Z basis
    /// and returns the rotated circuit with the equivalent Z-type observable.
    pub fn measure_in_basis(&self, observable: &PauliString) -> Result<(DynamicCircuit, PauliString)> {
        if observable.num_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                left: self.n_qubits,
                right: observable.num_qubits(),
            });
        }
        let mut gates = Vec::new();
        let mut z_obs = PauliString::identity(self.n_qubits).with_phase(observable.phase());
        for q in 0..self.n_qubits {
            match observable.get(q) {
                Pauli::I => continue,
                Pauli::X => gates.push(Gate::one(GateKind::H, q)),
                Pauli::Y => {
                    gates.push(Gate::one(GateKind::Sdg, q));
                    gates.push(Gate::one(GateKind::H, q));
                }
                Pauli::Z => {}
            }
            z_obs.set(q, Pauli::Z);
        }
        let mut layers = self.layers.clone();
        if !gates.is_empty() {
            // sdg and h on the same qubit go into consecutive layers
            let (first, second): (Vec<Gate>, Vec<Gate>) = gates
                .into_iter()
                .partition(|g| g.kind == GateKind::Sdg);
            if !first.is_empty() {
                layers.push(Layer::unitary(first));
            }
            layers.push(Layer::unitary(second));
        }
        Ok((DynamicCircuit::new(self.n_qubits, self.n_clbits, layers)?, z_obs))
    }
}

/// Parses and validates a circuit document.
pub fn parse_circuit(doc: &str) -> Result<DynamicCircuit> {
    serde_json::from_str(doc).map_err(|e| {
        // serde wraps our own validation errors as text; keep their message
        Error::Schema(e.to_string())
    })
}
