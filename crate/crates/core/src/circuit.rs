//! Sentence circuits.
//!
//! Single-wire words get an Euler triple `RX RZ RX`; words with `k >= 2`
//! wires get IQP layers (Hadamard on every wire, then controlled-RZ on
//! neighbouring wires). Each cup becomes a Bell effect: `CNOT(a -> b)`,
//! `H(a)`, with both wires post-selected on 0.
//!
//! Angles are looked up by name in a [`ParamRegistry`]. Names are
//! `concept/slot`, so two synonymous words (same concept) in different
//! languages resolve to the same values. Slots a language has beyond what the
//! concept shares across all its entries are named `concept/slot@language`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagram::DiscoDiagram;
use crate::grammar::Lexicon;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("unresolved parameter {0:?}")]
    Unresolved(String),
    #[error("iqp_layers must be at least 1")]
    NoLayers,
    #[error("circuit has no parameterized gates")]
    NoParameters,
    #[error("malformed gate {index}: {reason}")]
    MalformedGate { index: usize, reason: String },
    #[error("invalid registry file: {0}")]
    Registry(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateKind {
    #[serde(rename = "RX")]
    Rx,
    #[serde(rename = "RZ")]
    Rz,
    H,
    #[serde(rename = "CRZ")]
    Crz,
    #[serde(rename = "CNOT")]
    Cnot,
}

impl GateKind {
    pub fn has_angle(self) -> bool {
        matches!(self, GateKind::Rx | GateKind::Rz | GateKind::Crz)
    }

    pub fn arity(self) -> usize {
        match self {
            GateKind::Crz | GateKind::Cnot => 2,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::Rx => "RX",
            GateKind::Rz => "RZ",
            GateKind::H => "H",
            GateKind::Crz => "CRZ",
            GateKind::Cnot => "CNOT",
        }
    }
}

/// A gate whose angle (if any) is a `P`: a parameter name before binding, a
/// value in radians after.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate<P> {
    pub kind: GateKind,
    /// Control first for two-qubit gates.
    pub qubits: Vec<usize>,
    #[serde(default = "Option::default")]
    pub param: Option<P>,
    /// Owning word; `None` for the Bell effects between words.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word: Option<usize>,
}

impl<P> Gate<P> {
    pub fn new(kind: GateKind, qubits: Vec<usize>, param: Option<P>, word: Option<usize>) -> Self {
        Self {
            kind,
            qubits,
            param,
            word,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit<P> {
    pub n_qubits: usize,
    pub gates: Vec<Gate<P>>,
    pub postselect: BTreeSet<usize>,
    pub sentence_qubit: usize,
    #[serde(default)]
    pub language: String,
    #[serde(default)]
    pub source_text: String,
}

pub type ParamCircuit = Circuit<String>;
pub type BoundCircuit = Circuit<f64>;

impl<P> Circuit<P> {
    pub fn empty(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            gates: Vec::new(),
            postselect: BTreeSet::new(),
            sentence_qubit: 0,
            language: String::new(),
            source_text: String::new(),
        }
    }

    pub fn push(&mut self, kind: GateKind, qubits: &[usize], param: Option<P>) -> &mut Self {
        self.gates.push(Gate::new(kind, qubits.to_vec(), param, None));
        self
    }

    pub fn h(&mut self, q: usize) -> &mut Self {
        self.push(GateKind::H, &[q], None)
    }

    pub fn cnot(&mut self, control: usize, target: usize) -> &mut Self {
        self.push(GateKind::Cnot, &[control, target], None)
    }

    pub fn rx(&mut self, q: usize, angle: P) -> &mut Self {
        self.push(GateKind::Rx, &[q], Some(angle))
    }

    pub fn rz(&mut self, q: usize, angle: P) -> &mut Self {
        self.push(GateKind::Rz, &[q], Some(angle))
    }

    pub fn crz(&mut self, control: usize, target: usize, angle: P) -> &mut Self {
        self.push(GateKind::Crz, &[control, target], Some(angle))
    }

    /// Checks arity, qubit ranges and angle presence for every gate.
    pub fn validate(&self) -> Result<(), CircuitError> {
        for (index, g) in self.gates.iter().enumerate() {
            let bad = |reason: String| CircuitError::MalformedGate { index, reason };
            if g.qubits.len() != g.kind.arity() {
                return Err(bad(format!("{} takes {} qubits", g.kind.name(), g.kind.arity())));
            }
            if let Some(&q) = g.qubits.iter().find(|&&q| q >= self.n_qubits) {
                return Err(bad(format!("qubit {q} out of range {}", self.n_qubits)));
            }
            if g.qubits.len() == 2 && g.qubits[0] == g.qubits[1] {
                return Err(bad("repeated qubit".into()));
            }
            if g.kind.has_angle() != g.param.is_some() {
                return Err(bad(format!("{} angle presence mismatch", g.kind.name())));
            }
        }
        Ok(())
    }

    pub fn param_gate_count(&self) -> usize {
        self.gates.iter().filter(|g| g.param.is_some()).count()
    }

    pub fn cups(&self) -> Vec<(usize, usize)> {
        self.gates
            .iter()
            .filter(|g| g.kind == GateKind::Cnot && g.word.is_none())
            .map(|g| (g.qubits[0], g.qubits[1]))
            .collect()
    }
}

impl<P: Serialize> Circuit<P> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("circuit serializes")
    }
}

/// As-soon-as-possible time step of each gate: one past the latest step of
/// any earlier gate sharing a qubit.
pub fn asap_layers<P>(gates: &[&Gate<P>]) -> Vec<usize> {
    let mut ready: BTreeMap<usize, usize> = BTreeMap::new();
    gates
        .iter()
        .map(|g| {
            let t = g.qubits.iter().map(|q| ready.get(q).copied().unwrap_or(0)).max().unwrap_or(0);
            for &q in &g.qubits {
                ready.insert(q, t + 1);
            }
            t
        })
        .collect()
}

/// Angle values by parameter name, in radians in `[0, 2π)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamRegistry(BTreeMap<String, f64>);

impl ParamRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: f64) {
        self.0.insert(name.into(), value);
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Copy of `self` with every entry of `overrides` replacing the original.
    pub fn overlay(&self, overrides: &ParamRegistry) -> ParamRegistry {
        let mut out = self.clone();
        out.0.extend(overrides.0.iter().map(|(k, v)| (k.clone(), *v)));
        out
    }

    /// JSON object with every value written to 17 significant digits.
    pub fn to_json(&self) -> String {
        let mut s = String::from("{\n");
        for (i, (k, v)) in self.0.iter().enumerate() {
            let key = serde_json::to_string(k).expect("string serializes");
            s.push_str(&format!("  {key}: {v:.16e}"));
            s.push_str(if i + 1 < self.0.len() { ",\n" } else { "\n" });
        }
        s.push('}');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, CircuitError> {
        serde_json::from_str(text).map_err(|e| CircuitError::Registry(e.to_string()))
    }
}

/// Name of angle slot `slot` of `concept` as seen from `language`.
pub fn param_name(reg: &ParamRegistry, concept: &str, slot: usize, language: &str) -> String {
    let shared = format!("{concept}/{slot}");
    if reg.contains(&shared) {
        shared
    } else {
        format!("{concept}/{slot}@{language}")
    }
}

/// Draws every angle slot of every concept uniformly from `[0, 2π)`.
///
/// A concept shares the first `min` slots over all its entries; the rest are
/// drawn per language. Draw order follows the sorted parameter names.
pub fn init_params(lexicon: &Lexicon, iqp_layers: usize, seed: u64) -> ParamRegistry {
    let mut names = BTreeSet::new();
    for (concept, entries) in lexicon.concepts() {
        let shared = entries.iter().map(|e| e.param_arity(iqp_layers)).min().unwrap_or(0);
        for slot in 0..shared {
            names.insert(format!("{concept}/{slot}"));
        }
        for e in &entries {
            for slot in shared..e.param_arity(iqp_layers) {
                names.insert(format!("{concept}/{slot}@{}", e.language));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reg = ParamRegistry::new();
    for name in names {
        reg.insert(name, rng.gen_range(0.0..TAU));
    }
    reg
}

pub fn compile(d: &DiscoDiagram, reg: &ParamRegistry, iqp_layers: usize) -> Result<ParamCircuit, CircuitError> {
    if iqp_layers == 0 {
        return Err(CircuitError::NoLayers);
    }
    let mut gates = Vec::new();
    for (w, word) in d.words.iter().enumerate() {
        let concept = &word.entry.concept;
        let name = |slot: usize| param_name(reg, concept, slot, &d.language);
        let first = word.first_wire;
        let mut word_gates: Vec<Gate<String>> = Vec::new();
        match word.wire_count {
            0 => {}
            1 => {
                word_gates.push(Gate::new(GateKind::Rx, vec![first], Some(name(0)), Some(w)));
                word_gates.push(Gate::new(GateKind::Rz, vec![first], Some(name(1)), Some(w)));
                word_gates.push(Gate::new(GateKind::Rx, vec![first], Some(name(2)), Some(w)));
            }
            k => {
                for layer in 0..iqp_layers {
                    for q in first..first + k {
                        word_gates.push(Gate::new(GateKind::H, vec![q], None, Some(w)));
                    }
                    for j in 0..k - 1 {
                        let slot = layer * (k - 1) + j;
                        word_gates.push(Gate::new(
                            GateKind::Crz,
                            vec![first + j, first + j + 1],
                            Some(name(slot)),
                            Some(w),
                        ));
                    }
                }
            }
        }
        // emit moment by moment, top-down within a moment
        let refs: Vec<&Gate<String>> = word_gates.iter().collect();
        let layers = asap_layers(&refs);
        let mut order: Vec<usize> = (0..word_gates.len()).collect();
        order.sort_by_key(|&i| (layers[i], word_gates[i].qubits[0]));
        let mut slots: Vec<Option<Gate<String>>> = word_gates.into_iter().map(Some).collect();
        gates.extend(order.into_iter().map(|i| slots[i].take().expect("each gate taken once")));
    }
    let mut postselect = BTreeSet::new();
    for &(a, b) in &d.cups {
        gates.push(Gate::new(GateKind::Cnot, vec![a, b], None, None));
        gates.push(Gate::new(GateKind::H, vec![a], None, None));
        postselect.insert(a);
        postselect.insert(b);
    }
    Ok(Circuit {
        n_qubits: d.total_wires,
        gates,
        postselect,
        sentence_qubit: d.sentence_wire,
        language: d.language.clone(),
        source_text: d.text(),
    })
}

/// Distinct parameter names in order of first use.
pub fn parameter_names(c: &ParamCircuit) -> Vec<String> {
    let mut seen = HashSet::new();
    c.gates
        .iter()
        .filter_map(|g| g.param.as_ref())
        .filter(|p| seen.insert(p.as_str()))
        .cloned()
        .collect()
}

/// Circuit-local override that randomly permutes the values bound to the
/// circuit's parameters. Gates and parameter names are untouched; overlay
/// the result on `reg` (or bind with it directly) to get the swapped angles.
pub fn swap_angles(c: &ParamCircuit, reg: &ParamRegistry, seed: u64) -> Result<ParamRegistry, CircuitError> {
    let names = parameter_names(c);
    if names.is_empty() {
        return Err(CircuitError::NoParameters);
    }
    let mut values = names
        .iter()
        .map(|n| reg.get(n).ok_or_else(|| CircuitError::Unresolved(n.clone())))
        .collect::<Result<Vec<f64>, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    values.shuffle(&mut rng);
    let mut out = ParamRegistry::new();
    for (n, v) in names.into_iter().zip(values) {
        out.insert(n, v);
    }
    Ok(out)
}

pub fn bind(c: &ParamCircuit, reg: &ParamRegistry) -> Result<BoundCircuit, CircuitError> {
    let gates = c
        .gates
        .iter()
        .map(|g| {
            let param = match &g.param {
                Some(name) => Some(reg.get(name).ok_or_else(|| CircuitError::Unresolved(name.clone()))?),
                None => None,
            };
            Ok(Gate::new(g.kind, g.qubits.clone(), param, g.word))
        })
        .collect::<Result<Vec<_>, CircuitError>>()?;
    Ok(Circuit {
        n_qubits: c.n_qubits,
        gates,
        postselect: c.postselect.clone(),
        sentence_qubit: c.sentence_qubit,
        language: c.language.clone(),
        source_text: c.source_text.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::build_diagram;
    use crate::grammar::{assign_text, reduce, LexiconEntry};
    use std::f64::consts::PI;

    fn lexicon() -> Lexicon {
        let rows = [
            ("Sara", "en", "n", "Sara"),
            ("sees", "en", "n.r s n.l", "see"),
            ("Bob", "en", "n", "Bob"),
            ("Sara", "fa", "n", "Sara"),
            ("Bob", "fa", "n", "Bob"),
            ("ra", "fa", "n.r n", "ra"),
            ("mibinad", "fa", "n.r n.r s", "see"),
            ("sleeps", "en", "n.r s", "sleep"),
            ("khabide", "fa", "n.r n.r s", "sleep"),
            ("exists", "en", "s", "exist"),
        ];
        Lexicon::new(
            rows.iter()
                .map(|(w, l, t, c)| LexiconEntry::new(w, l, t, c).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn compiled(text: &str, lang: &str, reg: &ParamRegistry, layers: usize) -> ParamCircuit {
        let ts = assign_text(text, &lexicon(), lang).unwrap();
        let d = build_diagram(&ts, &reduce(&ts).unwrap()).unwrap();
        compile(&d, reg, layers).unwrap()
    }

    #[test]
    fn sara_sees_bob_layout() {
        let reg = init_params(&lexicon(), 1, 1);
        let c = compiled("Sara sees Bob", "en", &reg, 1);
        c.validate().unwrap();
        assert_eq!(c.n_qubits, 5);
        let kinds: Vec<_> = c.gates.iter().map(|g| g.kind.name()).collect();
        assert_eq!(
            kinds,
            [
                "RX", "RZ", "RX", "H", "H", "H", "CRZ", "CRZ", "RX", "RZ", "RX", "CNOT", "H", "CNOT", "H"
            ]
        );
        assert_eq!(c.gates[0].param.as_deref(), Some("Sara/0"));
        assert_eq!(c.gates[6].qubits, vec![1, 2]);
        assert_eq!(c.gates[6].param.as_deref(), Some("see/0"));
        assert_eq!(c.postselect, BTreeSet::from([0, 1, 3, 4]));
        assert_eq!(c.sentence_qubit, 2);
        assert_eq!(c.gates[11].word, None);
        assert_eq!(c.gates[8].word, Some(2));
    }

    #[test]
    fn single_word_euler_triple() {
        let reg = init_params(&lexicon(), 1, 3);
        let c = compiled("Sara sleeps", "en", &reg, 1);
        let first: Vec<_> = c.gates.iter().take(3).map(|g| (g.kind, g.qubits[0])).collect();
        assert_eq!(first, vec![(GateKind::Rx, 0), (GateKind::Rz, 0), (GateKind::Rx, 0)]);
    }

    #[test]
    fn zero_cup_circuit_has_no_postselection() {
        let reg = init_params(&lexicon(), 1, 3);
        let c = compiled("exists", "en", &reg, 1);
        assert!(c.postselect.is_empty());
        assert_eq!(c.sentence_qubit, 0);
        assert_eq!(c.param_gate_count(), 3);
    }

    #[test]
    fn two_layers_emit_moment_order() {
        let reg = init_params(&lexicon(), 2, 1);
        let c = compiled("Sara sees Bob", "en", &reg, 2);
        let verb: Vec<_> = c
            .gates
            .iter()
            .filter(|g| g.word == Some(1))
            .map(|g| (g.kind.name(), g.qubits[0]))
            .collect();
        assert_eq!(
            verb,
            [
                ("H", 1),
                ("H", 2),
                ("H", 3),
                ("CRZ", 1),
                ("H", 1),
                ("CRZ", 2),
                ("H", 2),
                ("H", 3),
                ("CRZ", 1),
                ("CRZ", 2)
            ]
        );
        assert_eq!(c.param_gate_count(), 3 + 4 + 3);
    }

    #[test]
    fn zero_layers_rejected() {
        let ts = assign_text("Sara sees Bob", &lexicon(), "en").unwrap();
        let d = build_diagram(&ts, &reduce(&ts).unwrap()).unwrap();
        assert_eq!(compile(&d, &ParamRegistry::new(), 0), Err(CircuitError::NoLayers));
    }

    #[test]
    fn init_params_is_seeded_and_shares_concepts() {
        let lex = lexicon();
        assert_eq!(init_params(&lex, 1, 42), init_params(&lex, 1, 42));
        assert_ne!(init_params(&lex, 1, 42), init_params(&lex, 1, 43));
        let reg = init_params(&lex, 1, 42);
        assert!(reg.iter().all(|(_, v)| (0.0..TAU).contains(&v)));
        // sleep: en has 1 slot, fa has 2; the first is shared
        assert!(reg.contains("sleep/0"));
        assert!(reg.contains("sleep/1@fa"));
        assert!(!reg.contains("sleep/2@fa"));
        assert!(!reg.contains("sleep/1"));
        assert!(init_params(&Lexicon::default(), 1, 0).is_empty());
    }

    #[test]
    fn synonyms_share_bound_angles() {
        let reg = init_params(&lexicon(), 1, 9);
        let en = bind(&compiled("Sara sees Bob", "en", &reg, 1), &reg).unwrap();
        let fa = bind(&compiled("Sara Bob ra mibinad", "fa", &reg, 1), &reg).unwrap();
        let angles = |c: &BoundCircuit, w: usize| -> Vec<f64> {
            c.gates.iter().filter(|g| g.word == Some(w)).filter_map(|g| g.param).collect()
        };
        assert_eq!(angles(&en, 0), angles(&fa, 0));
        assert_eq!(angles(&en, 2), angles(&fa, 1));
        assert_eq!(angles(&en, 1), angles(&fa, 3));
    }

    #[test]
    fn mismatched_wire_counts_go_language_local() {
        let reg = init_params(&lexicon(), 1, 9);
        let fa = compiled("Sara Bob ra khabide", "fa", &reg, 1);
        let names = parameter_names(&fa);
        assert!(names.contains(&"sleep/0".to_string()));
        assert!(names.contains(&"sleep/1@fa".to_string()));
        bind(&fa, &reg).unwrap();
    }

    #[test]
    fn bind_resolves_and_reports_missing() {
        let mut c = ParamCircuit::empty(1);
        c.rx(0, "x/0".to_string());
        let mut reg = ParamRegistry::new();
        assert_eq!(bind(&c, &reg), Err(CircuitError::Unresolved("x/0".into())));
        reg.insert("x/0", PI);
        let b = bind(&c, &reg).unwrap();
        assert_eq!(b.gates[0].param, Some(PI));
        assert_eq!(bind(&c, &reg).unwrap(), b);
    }

    #[test]
    fn swap_single_parameter_is_identity() {
        let mut c = ParamCircuit::empty(1);
        c.rx(0, "x/0".to_string());
        let mut reg = ParamRegistry::new();
        reg.insert("x/0", 1.25);
        for seed in 0..5 {
            assert_eq!(swap_angles(&c, &reg, seed).unwrap(), reg);
        }
        assert_eq!(
            swap_angles(&ParamCircuit::empty(1), &reg, 0),
            Err(CircuitError::NoParameters)
        );
    }

    #[test]
    fn swap_keeps_structure_and_values() {
        let reg = init_params(&lexicon(), 1, 5);
        let c = compiled("Sara sees Bob", "en", &reg, 1);
        let over = swap_angles(&c, &reg, 7).unwrap();
        let swapped = bind(&c, &reg.overlay(&over)).unwrap();
        let original = bind(&c, &reg).unwrap();
        let mut a: Vec<f64> = original.gates.iter().filter_map(|g| g.param).collect();
        let mut b: Vec<f64> = swapped.gates.iter().filter_map(|g| g.param).collect();
        assert_ne!(a, b);
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
        for (x, y) in original.gates.iter().zip(&swapped.gates) {
            assert_eq!((x.kind, &x.qubits, x.word), (y.kind, &y.qubits, y.word));
        }
    }

    #[test]
    fn registry_json_round_trips_exactly() {
        let reg = init_params(&lexicon(), 2, 11);
        let text = reg.to_json();
        let first_value = text.lines().nth(1).unwrap().split(": ").nth(1).unwrap();
        let mantissa = first_value.trim_end_matches(',').split('e').next().unwrap();
        assert_eq!(mantissa.replace(['.', '-'], "").len(), 17);
        assert_eq!(ParamRegistry::from_json(&text).unwrap(), reg);
    }

    #[test]
    fn circuit_json_shape() {
        let reg = init_params(&lexicon(), 1, 1);
        let c = compiled("Sara sees Bob", "en", &reg, 1);
        let v: serde_json::Value = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(v["n_qubits"], 5);
        assert_eq!(v["gates"][0]["kind"], "RX");
        assert_eq!(v["gates"][0]["param"], "Sara/0");
        assert_eq!(v["gates"][3]["param"], serde_json::Value::Null);
        assert_eq!(v["sentence_qubit"], 2);
        let back: ParamCircuit = serde_json::from_value(v).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn validate_catches_bad_gates() {
        let mut c = BoundCircuit::empty(2);
        c.push(GateKind::Cnot, &[0, 0], None);
        assert!(c.validate().is_err());
        let mut c = BoundCircuit::empty(2);
        c.push(GateKind::Rx, &[0], None);
        assert!(c.validate().is_err());
        let mut c = BoundCircuit::empty(2);
        c.h(2);
        assert!(c.validate().is_err());
    }
}
