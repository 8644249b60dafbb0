//! Circuit-to-circuit rewrites: dephasing insertion, feedforward-to-delay
//! substitution, Pauli twirling and classically-controlled CNOT removal.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DynamicCircuit, FeedforwardOp, FeedforwardRule, Layer};
use crate::clifford::SingleQubitClifford;
use crate::error::{Error, Result};
use crate::gate::{Gate, GateKind};
use crate::pauli::{Pauli, PauliString};

/// Adds a dephase layer on the measured qubits after every measurement layer
/// that is not already followed by one.
pub fn insert_dephasing(c: &DynamicCircuit) -> DynamicCircuit {
    let src = c.layers();
    let mut out = Vec::with_capacity(src.len() * 2);
    for (i, layer) in src.iter().enumerate() {
        out.push(layer.clone());
        if let Layer::Measurement { qubits, .. } = layer {
            if qubits.is_empty() {
                continue;
            }
            let mut want = qubits.clone();
            want.sort_unstable();
            let already = match src.get(i + 1) {
                Some(Layer::Dephase { qubits: next }) => {
                    let mut have = next.clone();
                    have.sort_unstable();
                    have == want
                }
                _ => false,
            };
            if !already {
                out.push(Layer::Dephase { qubits: want });
            }
        }
    }
    DynamicCircuit::new(c.n_qubits(), c.n_clbits(), out).expect("dephasing preserves validity")
}

/// Replaces every feedforward operation with a conditional delay on the same
/// trigger bit and target.
pub fn replace_feedforward_with_delay(c: &DynamicCircuit) -> DynamicCircuit {
    let layers = c
        .layers()
        .iter()
        .cloned()
        .map(|mut l| {
            if let Layer::Measurement { feedforward, .. } = &mut l {
                for r in feedforward.iter_mut() {
                    r.op = FeedforwardOp::Delay;
                }
            }
            l
        })
        .collect();
    DynamicCircuit::new(c.n_qubits(), c.n_clbits(), layers).expect("delay substitution preserves validity")
}

/// Bookkeeping for one twirled instance.
#[derive(Clone, Debug, PartialEq)]
pub struct TwirlRecord {
    /// Twirl Pauli per twirled layer, keyed by the original layer index.
    pub twirls: Vec<(usize, PauliString)>,
    /// Recorded-bit corrections: bit `b` must be inverted in post-processing.
    pub flips: Vec<bool>,
    /// Product of the operator-level signs picked up while moving twirls
    /// through unitaries and conditional operations.
    pub sign: i8,
    /// New index of each original layer in the rewritten circuit.
    pub layer_map: Vec<usize>,
}

impl TwirlRecord {
    /// Undoes the twirl's outcome flips on a vector of recorded bits.
    pub fn correct(&self, bits: &mut [u8]) {
        for (b, f) in bits.iter_mut().zip(&self.flips) {
            *b ^= *f as u8;
        }
    }

    /// Correction as a bit mask over clbits (bit `b` of the mask is clbit `b`).
    pub fn flip_mask(&self) -> u64 {
        self.flips
            .iter()
            .enumerate()
            .fold(0, |m, (b, &f)| m | ((f as u64) << b))
    }
}

/// `(Q, sign)` with `Q = C P C†` for the rule's single-qubit Clifford `C`
/// acting on the rule's target; `P` is a full-register Pauli.
pub fn conjugate_twirl_through_clifford_ffwd(
    rule: &FeedforwardRule,
    p: &PauliString,
) -> Result<(PauliString, i8)> {
    if rule.target >= p.num_qubits() {
        return Err(Error::IndexOutOfRange(format!(
            "rule target {} on a {}-qubit Pauli",
            rule.target,
            p.num_qubits()
        )));
    }
    let mut q = p.unsigned();
    match &rule.op {
        FeedforwardOp::Delay => {}
        FeedforwardOp::Clifford(c) => c.conjugate_on(&mut q, rule.target),
        FeedforwardOp::ControlledX { .. } => {
            return Err(Error::NonClifford("conditional cx is not single-qubit".into()))
        }
    }
    let sign = q.phase().sign().expect("conjugating a Hermitian Pauli keeps it Hermitian");
    Ok((q.unsigned(), sign))
}

/// Draws a uniformly random Pauli on `support` of an `n`-qubit register.
pub fn random_pauli<R: Rng + ?Sized>(n: usize, support: &[usize], rng: &mut R) -> PauliString {
    let mut p = PauliString::identity(n);
    for &q in support {
        let bits: u8 = rng.gen_range(0..4);
        p.set(q, Pauli::ALL[bits as usize]);
    }
    p
}

/// Twirls the selected layers with Paulis drawn uniformly on each layer's
/// twirl support.
pub fn sample_twirl_instance(
    c: &DynamicCircuit,
    layers: &[usize],
    seed: u64,
) -> Result<(DynamicCircuit, TwirlRecord)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_twirl_with_rng(c, layers, &mut rng)
}

pub fn sample_twirl_with_rng<R: Rng + ?Sized>(
    c: &DynamicCircuit,
    layers: &[usize],
    rng: &mut R,
) -> Result<(DynamicCircuit, TwirlRecord)> {
    let mut twirls = Vec::with_capacity(layers.len());
    for &i in layers {
        let layer = c
            .layers()
            .get(i)
            .ok_or_else(|| Error::IndexOutOfRange(format!("layer {i}")))?;
        twirls.push((i, random_pauli(c.n_qubits(), &layer.twirl_support(), rng)));
    }
    apply_twirl(c, &twirls, &[])
}

/// Twirls layer `i` with the given Pauli for every `(i, P)` in `twirls`.
///
/// `insertions` are extra Paulis placed immediately before a layer (ahead of
/// its twirl, merged into the same Pauli layer). PEC uses them for inverse-
/// noise samples.
pub fn apply_twirl(
    c: &DynamicCircuit,
    twirls: &[(usize, PauliString)],
    insertions: &[(usize, PauliString)],
) -> Result<(DynamicCircuit, TwirlRecord)> {
    let n = c.n_qubits();
    let n_layers = c.layers().len();
    let mut pre: Vec<Option<PauliString>> = vec![None; n_layers];
    let mut post: Vec<Option<PauliString>> = vec![None; n_layers];
    let mut twirl_of: Vec<Option<PauliString>> = vec![None; n_layers];
    for (i, p) in twirls {
        check_layer_pauli(c, *i, p)?;
        if twirl_of[*i].replace(p.unsigned()).is_some() {
            return Err(Error::Schema(format!("layer {i} twirled twice")));
        }
    }
    for (i, p) in insertions {
        check_layer_pauli(c, *i, p)?;
        let merged = match pre[*i].take() {
            Some(prev) => p.multiply_unchecked(&prev),
            None => p.unsigned(),
        };
        pre[*i] = Some(merged.unsigned());
    }

    let mut layers: Vec<Layer> = c.layers().to_vec();
    let mut flips = vec![false; c.n_clbits()];
    let mut sign = 1i8;

    for i in 0..n_layers {
        let Some(p) = twirl_of[i].clone() else {
            if let Layer::Measurement { clbits, .. } = &layers[i] {
                for &b in clbits {
                    flips[b] = false;
                }
            }
            continue;
        };
        match &mut layers[i] {
            Layer::Unitary { gates, .. } => {
                if !gates.iter().all(|g| g.kind.is_clifford()) {
                    return Err(Error::NotTwirlable {
                        layer: i,
                        reason: "unitary contains a non-Clifford gate".into(),
                    });
                }
                let u = c.layers()[i].clifford(n)?;
                let q = u.conjugate(&p)?;
                sign *= q.phase().sign().expect("Hermitian image");
                post[i] = Some(q.unsigned());
            }
            Layer::Measurement {
                qubits,
                clbits,
                feedforward,
                ..
            } => {
                let mut layer_flips = Vec::new();
                for (&q, &b) in qubits.iter().zip(clbits.iter()) {
                    let f = p.x_bit(q);
                    flips[b] = f;
                    if f {
                        layer_flips.push(b);
                    }
                }
                for r in feedforward.iter_mut() {
                    if layer_flips.contains(&r.clbit) {
                        r.value ^= 1;
                    }
                    match &r.op {
                        FeedforwardOp::Delay => {}
                        FeedforwardOp::Clifford(op) => {
                            let pt = p.get(r.target);
                            if let Some(cp) = op.as_pauli() {
                                let anti = !Pauli::commute(cp, pt);
                                if anti {
                                    sign = -sign;
                                }
                            } else {
                                let (_, s) = conjugate_twirl_through_clifford_ffwd(r, &p)?;
                                sign *= s;
                                let t = SingleQubitClifford::pauli(pt);
                                r.op = FeedforwardOp::Clifford(t.then(op).then(&t));
                            }
                        }
                        FeedforwardOp::ControlledX { .. } => {
                            return Err(Error::NotTwirlable {
                                layer: i,
                                reason: "conditional cx must be decomposed first".into(),
                            })
                        }
                    }
                }
                // later rules that read a flipped bit see the raw value
                for b in layer_flips {
                    adjust_later_rules(&mut layers, i + 1, b);
                }
                post[i] = Some(p.clone());
            }
            other => {
                return Err(Error::NotTwirlable {
                    layer: i,
                    reason: format!("{} layers carry no twirl", other.kind_name()),
                })
            }
        }
        pre[i] = Some(match pre[i].take() {
            Some(ins) => p.multiply_unchecked(&ins).unsigned(),
            None => p.clone(),
        });
    }

    let mut out = Vec::with_capacity(n_layers + 2 * twirls.len());
    let mut layer_map = Vec::with_capacity(n_layers);
    for (i, layer) in layers.into_iter().enumerate() {
        if let Some(p) = &pre[i] {
            if !p.is_identity() {
                out.push(Layer::pauli(p));
            }
        }
        layer_map.push(out.len());
        out.push(layer);
        if let Some(p) = &post[i] {
            if !p.is_identity() {
                out.push(Layer::pauli(p));
            }
        }
    }
    let circuit = DynamicCircuit::new(n, c.n_clbits(), out)?;
    Ok((
        circuit,
        TwirlRecord {
            twirls: twirls.to_vec(),
            flips,
            sign,
            layer_map,
        },
    ))
}

fn check_layer_pauli(c: &DynamicCircuit, i: usize, p: &PauliString) -> Result<()> {
    if i >= c.layers().len() {
        return Err(Error::IndexOutOfRange(format!("layer {i}")));
    }
    if p.num_qubits() != c.n_qubits() {
        return Err(Error::DimensionMismatch {
            left: c.n_qubits(),
            right: p.num_qubits(),
        });
    }
    Ok(())
}

fn adjust_later_rules(layers: &mut [Layer], from: usize, bit: usize) {
    for layer in layers.iter_mut().skip(from) {
        if let Layer::Measurement {
            clbits, feedforward, ..
        } = layer
        {
            if clbits.contains(&bit) {
                return;
            }
            for r in feedforward.iter_mut().filter(|r| r.clbit == bit) {
                r.value ^= 1;
            }
        }
    }
}

/// Rewrites the classically-controlled CNOT of measurement layer `index`
/// into unconditional CNOTs and conditional single-qubit Cliffords.
///
/// With `H_t` basis changes the conditional CNOT becomes a conditional CZ,
/// which equals `CX · (T X T†)_t · CX · (T X T†)_t (X T† X T)_c` up to a
/// global phase. The result is measurement, then
/// `H(t); CX(c,t); [m] tdg.x.t on t; CX(c,t); [m] tdg.x.t on t and
/// t.x.tdg.x on c; H(t)`.
pub fn decompose_cc_cnot(c: &DynamicCircuit, index: usize) -> Result<DynamicCircuit> {
    let layer = c
        .layers()
        .get(index)
        .ok_or_else(|| Error::IndexOutOfRange(format!("layer {index}")))?;
    let Layer::Measurement {
        qubits,
        clbits,
        feedforward,
        label,
        support,
    } = layer
    else {
        return Err(Error::NoControlledCnot(index));
    };
    let (ccx, rest): (Vec<_>, Vec<_>) = feedforward
        .iter()
        .cloned()
        .partition(|r| matches!(r.op, FeedforwardOp::ControlledX { .. }));
    if ccx.is_empty() {
        return Err(Error::NoControlledCnot(index));
    }

    let a_op = SingleQubitClifford::parse("tdg.x.t")?;
    let b_op = SingleQubitClifford::parse("t.x.tdg.x")?;
    let mut replacement = vec![Layer::Measurement {
        qubits: qubits.clone(),
        clbits: clbits.clone(),
        feedforward: rest,
        label: label.clone(),
        support: support.clone(),
    }];
    for r in ccx {
        let FeedforwardOp::ControlledX { control } = r.op else {
            unreachable!()
        };
        let t = r.target;
        let cond = |ops: Vec<(SingleQubitClifford, usize)>| Layer::Measurement {
            qubits: Vec::new(),
            clbits: Vec::new(),
            feedforward: ops
                .into_iter()
                .map(|(op, target)| FeedforwardRule {
                    clbit: r.clbit,
                    value: r.value,
                    op: FeedforwardOp::Clifford(op),
                    target,
                })
                .collect(),
            label: None,
            support: Vec::new(),
        };
        replacement.push(Layer::unitary(vec![Gate::one(GateKind::H, t)]));
        replacement.push(Layer::unitary(vec![Gate::cx(control, t)]));
        replacement.push(cond(vec![(a_op.clone(), t)]));
        replacement.push(Layer::unitary(vec![Gate::cx(control, t)]));
        replacement.push(cond(vec![(a_op.clone(), t), (b_op.clone(), control)]));
        replacement.push(Layer::unitary(vec![Gate::one(GateKind::H, t)]));
    }

    let mut layers = c.layers()[..index].to_vec();
    layers.extend(replacement);
    layers.extend_from_slice(&c.layers()[index + 1..]);
    DynamicCircuit::new(c.n_qubits(), c.n_clbits(), layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::parse_circuit;

    fn fig4() -> DynamicCircuit {
        DynamicCircuit::new(
            2,
            1,
            vec![
                Layer::labeled_unitary("ul", vec![Gate::cx(0, 1)]),
                Layer::measurement(&[1], &[0], vec![FeedforwardRule::pauli(0, 1, Pauli::X, 0)])
                    .with_label("ml"),
            ],
        )
        .unwrap()
    }

    #[test]
    fn dephasing_is_added_once() {
        let c = fig4();
        let d = insert_dephasing(&c);
        assert_eq!(d.layers().len(), 3);
        assert_eq!(d.layers()[2], Layer::Dephase { qubits: vec![1] });
        assert_eq!(insert_dephasing(&d), d);
    }

    #[test]
    fn delays_keep_triggers() {
        let c = replace_feedforward_with_delay(&fig4());
        let r = &c.layers()[1].feedforward()[0];
        assert_eq!((r.clbit, r.value, r.target), (0, 1, 0));
        assert_eq!(r.op, FeedforwardOp::Delay);
        let plain = DynamicCircuit::new(1, 0, vec![Layer::unitary(vec![Gate::one(GateKind::H, 0)])]).unwrap();
        assert_eq!(replace_feedforward_with_delay(&plain), plain);
    }

    #[test]
    fn measurement_twirl_flags() {
        let c = fig4();
        let (_, rec) = apply_twirl(&c, &[(1, "IX".parse().unwrap())], &[]).unwrap();
        assert_eq!(rec.flips, vec![true]);
        let (_, rec) = apply_twirl(&c, &[(1, "IZ".parse().unwrap())], &[]).unwrap();
        assert_eq!(rec.flips, vec![false]);
        let (_, rec) = apply_twirl(&c, &[(1, "ZI".parse().unwrap())], &[]).unwrap();
        assert_eq!(rec.sign, -1);
    }

    #[test]
    fn flipped_twirl_inverts_trigger() {
        let (t, rec) = apply_twirl(&fig4(), &[(1, "IY".parse().unwrap())], &[]).unwrap();
        let ml = &t.layers()[rec.layer_map[1]];
        assert_eq!(ml.feedforward()[0].value, 0);
        assert_eq!(t.layers().len(), 4);
    }

    #[test]
    fn unitary_twirl_conjugates() {
        let (t, rec) = apply_twirl(&fig4(), &[(0, "XI".parse().unwrap())], &[]).unwrap();
        assert_eq!(rec.layer_map, vec![1, 3]);
        assert_eq!(t.layers()[2], Layer::pauli(&"XX".parse().unwrap()));
    }

    #[test]
    fn clifford_ffwd_conjugation() {
        let rule = FeedforwardRule::pauli(0, 1, Pauli::X, 0);
        let (q, s) = conjugate_twirl_through_clifford_ffwd(&rule, &"Z".parse().unwrap()).unwrap();
        assert_eq!((q.label().as_str(), s), ("Z", -1));
        let id = FeedforwardRule {
            op: FeedforwardOp::Delay,
            ..rule.clone()
        };
        let (q, s) = conjugate_twirl_through_clifford_ffwd(&id, &"Y".parse().unwrap()).unwrap();
        assert_eq!((q.label().as_str(), s), ("Y", 1));
        let t = FeedforwardRule {
            op: FeedforwardOp::Clifford(SingleQubitClifford::parse("tdg.x.t").unwrap()),
            ..rule
        };
        let (q, s) = conjugate_twirl_through_clifford_ffwd(&t, &"X".parse().unwrap()).unwrap();
        assert_eq!((q.label().as_str(), s), ("Y", 1));
    }

    #[test]
    fn cc_cnot_is_removed() {
        let c = parse_circuit(
            r#"{"n_qubits":3,"n_clbits":1,"layers":[{"kind":"measurement","qubits":[0],"clbits":[0],
            "feedforward":[{"clbit":0,"value":1,"op":"cx","control":1,"target":2}]}]}"#,
        )
        .unwrap();
        let d = decompose_cc_cnot(&c, 0).unwrap();
        let conditionals: Vec<_> = d.layers().iter().flat_map(|l| l.feedforward()).collect();
        assert_eq!(conditionals.len(), 3);
        assert!(conditionals
            .iter()
            .all(|r| matches!(r.op, FeedforwardOp::Clifford(_))));
        assert!(matches!(decompose_cc_cnot(&d, 0), Err(Error::NoControlledCnot(0))));
    }

    #[test]
    fn delay_layer_is_not_twirlable() {
        let c = DynamicCircuit::new(1, 0, vec![Layer::Delay { tag: "ff".into() }]).unwrap();
        assert!(matches!(
            apply_twirl(&c, &[(0, "X".parse().unwrap())], &[]),
            Err(Error::NotTwirlable { .. })
        ));
    }
}
