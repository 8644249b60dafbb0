//! Noisy execution of dynamic circuits.
//!
//! Two backends share one noise semantics:
//!
//! * [`run_dense`] evolves the density matrix of every classical branch
//!   exactly (up to [`DENSE_QUBIT_CAP`](crate::dense::DENSE_QUBIT_CAP) qubits).
//! * [`run_trajectories`] samples shots on a stabilizer tableau.
//!
//! Noise bound to a labeled layer acts at the start of that layer. A
//! measurement produces a raw bit `b`; the control wire carries `c = b ⊕ e_r`
//! with `e_r ~ Bernoulli(r)`; feedforward fires on `c`; the recorded bit is
//! `c` passed through the qubit's assignment error. When the layer has
//! feedforward rules, noise bound to the delay tag `ff_latency` acts after
//! the measurement and before the rules. Every shot ends with a Z-basis
//! readout of all qubits.

pub mod counts;
pub mod dense;
pub mod ptm;
pub mod tableau;
pub mod trajectory;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::pauli::Pauli;

pub use counts::{expectation, software_recovery_sign, Counts};
pub use dense::{run_dense, run_dense_with, DenseOptions, DenseOutput};
pub use ptm::{ptm_basis, ptm_of, ptm_of_circuit, twirled_ptm, PtMatrix};
pub use trajectory::{run_trajectories, run_trajectories_instance, ShotRecord, TrajectoryResult};

/// Delay tag whose binding acts between a measurement and its feedforward.
pub const FF_LATENCY_TAG: &str = "ff_latency";

/// Small unitary over-rotation `exp(−i θ P / 2)` on one qubit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherentPerturbation {
    pub qubit: usize,
    #[serde(with = "pauli_char")]
    pub axis: Pauli,
    pub angle: f64,
}

mod pauli_char {
    use super::Pauli;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(p: &Pauli, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&p.as_char().to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Pauli, D::Error> {
        let s = String::deserialize(d)?;
        let mut it = s.chars();
        match (it.next().and_then(Pauli::from_char), it.next()) {
            (Some(p), None) => Ok(p),
            _ => Err(serde::de::Error::custom(format!("bad axis {s:?}"))),
        }
    }
}

impl CoherentPerturbation {
    pub fn matrix(&self) -> crate::gate::Mat2 {
        use num_complex::Complex64;
        let (s, c) = (self.angle / 2.0).sin_cos();
        let p = self.axis.matrix();
        let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let id = if i == j { c } else { 0.0 };
                m[i][j] = Complex64::new(id, 0.0) - Complex64::new(0.0, s) * p[i][j];
            }
        }
        m
    }
}

/// Noise acting at the start of one labeled layer.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerNoise {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<NoiseModel>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coherent: Vec<CoherentPerturbation>,
}

/// Assignment error of one qubit's readout.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Readout {
    /// Probability of reading 0 when the value is 1.
    pub p0_given_1: f64,
    /// Probability of reading 1 when the value is 0.
    pub p1_given_0: f64,
}

impl Readout {
    /// Probability the reported bit differs from `value`.
    pub fn flip_prob(&self, value: u8) -> f64 {
        if value == 1 {
            self.p0_given_1
        } else {
            self.p1_given_0
        }
    }
}

/// Planted noise for a simulation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseBinding {
    /// Noise per PEC-layer label.
    #[serde(default)]
    pub layers: BTreeMap<String, LayerNoise>,
    /// Noise per delay tag (generator qubits are register indices).
    #[serde(default)]
    pub delays: BTreeMap<String, NoiseModel>,
    /// Assignment error per qubit, for mid-circuit and terminal readout.
    #[serde(default)]
    pub readout: BTreeMap<usize, Readout>,
    /// Symmetric flip probability of the feedforward control wire.
    #[serde(default)]
    pub discriminator: f64,
    /// Probability that each qubit starts in `|1⟩` instead of `|0⟩`.
    #[serde(default)]
    pub init_flip: f64,
    /// Reject circuits whose labeled layers have no binding.
    #[serde(default)]
    pub strict: bool,
}

impl NoiseBinding {
    pub fn noiseless() -> Self {
        Self::default()
    }

    pub fn with_layer_model(mut self, label: &str, model: NoiseModel) -> Self {
        self.layers.entry(label.to_string()).or_default().model = Some(model);
        self
    }

    pub fn with_coherent(mut self, label: &str, perturbation: CoherentPerturbation) -> Self {
        self.layers
            .entry(label.to_string())
            .or_default()
            .coherent
            .push(perturbation);
        self
    }

    pub fn with_discriminator(mut self, r: f64) -> Self {
        self.discriminator = r;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {p} is not a probability")))
            }
        };
        if !(0.0..0.5).contains(&self.discriminator) {
            return Err(Error::Config(format!(
                "discriminator error {} outside [0, 0.5)",
                self.discriminator
            )));
        }
        prob("init_flip", self.init_flip)?;
        for (q, r) in &self.readout {
            prob(&format!("readout[{q}].p0_given_1"), r.p0_given_1)?;
            prob(&format!("readout[{q}].p1_given_0"), r.p1_given_0)?;
        }
        Ok(())
    }

    pub fn layer(&self, label: &str) -> Option<&LayerNoise> {
        self.layers.get(label)
    }

    pub fn readout_of(&self, q: usize) -> Readout {
        self.readout.get(&q).copied().unwrap_or_default()
    }

    pub fn from_json(doc: &str) -> Result<Self> {
        let b: NoiseBinding = serde_json::from_str(doc).map_err(|e| Error::Schema(e.to_string()))?;
        b.validate()?;
        Ok(b)
    }

    /// Checks labeled layers against the binding and each model's support
    /// against the register size.
    pub(crate) fn check_circuit(&self, c: &crate::circuit::DynamicCircuit) -> Result<()> {
        self.validate()?;
        for label in c.labels() {
            match self.layers.get(&label) {
                None if self.strict => return Err(Error::UnboundLayer(label)),
                Some(noise) => {
                    if let Some(m) = &noise.model {
                        m.embedded(c.n_qubits())?;
                    }
                    for p in &noise.coherent {
                        if p.qubit >= c.n_qubits() {
                            return Err(Error::IndexOutOfRange(format!(
                                "coherent perturbation on qubit {}",
                                p.qubit
                            )));
                        }
                    }
                }
                None => {}
            }
        }
        for m in self.delays.values() {
            m.embedded(c.n_qubits())?;
        }
        if c.n_clbits() > 64 || c.n_qubits() > 64 {
            return Err(Error::DimensionCap {
                qubits: c.n_qubits().max(c.n_clbits()),
                cap: 64,
            });
        }
        Ok(())
    }
}
