//! Word-level circuit encoding.
//!
//! A circuit is cut into words, each word's gates are layered into time
//! steps, and each gate becomes an 8-wide vector: a one-hot kind over
//! `NOP RX RZ H CRZ CNOT`, the angle as a fraction of a turn, and the qubit
//! offset as a fraction of the word width. Bell-effect CNOTs join words and
//! are kept in the metadata; the Hadamard that follows each one sits on a
//! word's qubit and is scheduled with that word.
//!
//! The token form replaces each gate vector by one id per (kind, offset,
//! angle bin), closes every time step with `STEP_SEP` and every word with
//! `WORD_SEP`.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{bind, BoundCircuit, Circuit, CircuitError, Gate, GateKind, ParamCircuit, ParamRegistry};
use crate::corpus::{compile_text, Corpus, CorpusError};
use crate::grammar::Lexicon;

pub const GATE_DIM: usize = 8;
pub const PAD: u32 = 0;
pub const STEP_SEP: u32 = 1;
pub const WORD_SEP: u32 = 2;
pub const DEFAULT_BINS: usize = 32;

pub type GateVector = [f64; GATE_DIM];

const KINDS: [Option<GateKind>; 6] = [
    None,
    Some(GateKind::Rx),
    Some(GateKind::Rz),
    Some(GateKind::H),
    Some(GateKind::Crz),
    Some(GateKind::Cnot),
];

fn kind_slot(kind: GateKind) -> usize {
    KINDS.iter().position(|k| *k == Some(kind)).expect("every kind has a slot")
}

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("word partition: {0}")]
    Partition(String),
    #[error("schedule needs {needed_t} time steps and {needed_g} gates per step, shape allows ({t_max}, {g_max})")]
    Capacity {
        needed_t: usize,
        needed_g: usize,
        t_max: usize,
        g_max: usize,
    },
    #[error("word {word} time step {frame} slot {slot}: {reason}")]
    Decode {
        word: usize,
        frame: usize,
        slot: usize,
        reason: String,
    },
    #[error("word {word}: {reason}")]
    Structure { word: usize, reason: String },
    #[error("token {index}: {reason}")]
    Token { index: usize, reason: String },
    #[error("angle {0} outside [0, 2π)")]
    Angle(f64),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("dataset: {0}")]
    Dataset(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub t_max: usize,
    pub g_max: usize,
}

impl Shape {
    pub fn frame_dim(&self) -> usize {
        self.g_max * GATE_DIM
    }
}

/// Contiguous qubit groups, one per word.
///
/// Uses word annotations when present; otherwise connected components of the
/// gate graph with CNOT edges removed.
pub fn partition_words<P>(c: &Circuit<P>) -> Result<Vec<Vec<usize>>, EncodeError> {
    let mut groups: Vec<Vec<usize>> = if c.gates.iter().any(|g| g.word.is_some()) {
        let mut by_word: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for g in &c.gates {
            if let Some(w) = g.word {
                by_word.entry(w).or_default().extend(&g.qubits);
            }
        }
        let mut owner = vec![None; c.n_qubits];
        for (&w, qs) in &by_word {
            for &q in qs {
                if let Some(other) = owner[q].replace(w) {
                    return Err(EncodeError::Partition(format!("qubit {q} owned by words {other} and {w}")));
                }
            }
        }
        if let Some(q) = owner.iter().position(Option::is_none) {
            return Err(EncodeError::Partition(format!("qubit {q} belongs to no word")));
        }
        if by_word.keys().copied().ne(0..by_word.len()) {
            return Err(EncodeError::Partition("word indices are not 0..L".into()));
        }
        by_word.into_values().map(|s| s.into_iter().collect()).collect()
    } else {
        let mut parent: Vec<usize> = (0..c.n_qubits).collect();
        fn root(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for g in c.gates.iter().filter(|g| g.kind != GateKind::Cnot && g.qubits.len() == 2) {
            let (a, b) = (root(&mut parent, g.qubits[0]), root(&mut parent, g.qubits[1]));
            parent[a.max(b)] = a.min(b);
        }
        let mut comps: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for q in 0..c.n_qubits {
            let r = root(&mut parent, q);
            comps.entry(r).or_default().push(q);
        }
        comps.into_values().collect()
    };
    groups.sort();
    let mut next = 0;
    for g in &groups {
        if g.iter().copied().ne(next..next + g.len()) {
            return Err(EncodeError::Partition(format!("group {g:?} is not contiguous")));
        }
        next += g.len();
    }
    Ok(groups)
}

/// A gate placed in a word's schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct Placed<P> {
    pub kind: GateKind,
    /// Qubit (control for CRZ) relative to the word's first qubit.
    pub offset: usize,
    pub param: Option<P>,
}

/// ASAP time steps of the non-CNOT gates acting inside `group`, each step
/// sorted by offset.
pub fn schedule<P: Clone>(c: &Circuit<P>, group: &[usize]) -> Result<Vec<Vec<Placed<P>>>, EncodeError> {
    let first = *group.first().ok_or_else(|| EncodeError::Partition("empty group".into()))?;
    let inside = |q: &usize| group.contains(q);
    let mut ready: BTreeMap<usize, usize> = BTreeMap::new();
    let mut frames: Vec<Vec<Placed<P>>> = Vec::new();
    for g in c.gates.iter().filter(|g| g.kind != GateKind::Cnot) {
        let hits = g.qubits.iter().filter(|q| inside(q)).count();
        if hits == 0 {
            continue;
        }
        if hits != g.qubits.len() {
            return Err(EncodeError::Partition(format!("{} gate spans words", g.kind.name())));
        }
        if g.kind == GateKind::Crz && g.qubits[1] != g.qubits[0] + 1 {
            return Err(EncodeError::Partition("CRZ on non-adjacent qubits".into()));
        }
        let t = g.qubits.iter().map(|q| ready.get(q).copied().unwrap_or(0)).max().unwrap_or(0);
        for &q in &g.qubits {
            ready.insert(q, t + 1);
        }
        if frames.len() <= t {
            frames.resize_with(t + 1, Vec::new);
        }
        frames[t].push(Placed {
            kind: g.kind,
            offset: g.qubits[0] - first,
            param: g.param.clone(),
        });
    }
    for f in &mut frames {
        f.sort_by_key(|p| p.offset);
    }
    Ok(frames)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingMeta {
    pub n_qubits: usize,
    pub widths: Vec<usize>,
    pub cups: Vec<(usize, usize)>,
    pub sentence_qubit: usize,
    pub language: String,
    pub source_text: String,
    pub t_max: usize,
    pub g_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordEncoding {
    /// `t_max` frames of `g_max` gate vectors.
    pub frames: Vec<Vec<GateVector>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceEncoding {
    pub words: Vec<WordEncoding>,
    pub meta: EncodingMeta,
}

impl SentenceEncoding {
    /// Frames flattened to `g_max * 8` values each, word after word.
    pub fn flat_frames(&self) -> Vec<Vec<f64>> {
        self.words
            .iter()
            .flat_map(|w| w.frames.iter().map(|f| f.iter().flatten().copied().collect()))
            .collect()
    }
}

fn nop() -> GateVector {
    let mut v = [0.0; GATE_DIM];
    v[0] = 1.0;
    v
}

fn gate_vector(kind: GateKind, angle: Option<f64>, offset: usize, width: usize) -> GateVector {
    let mut v = [0.0; GATE_DIM];
    v[kind_slot(kind)] = 1.0;
    v[6] = angle.map_or(0.0, |a| a / TAU);
    v[7] = offset as f64 / width as f64;
    v
}

/// Largest (time steps, gates per step) over the circuit's words.
pub fn required_shape<P: Clone>(c: &Circuit<P>) -> Result<Shape, EncodeError> {
    let mut shape = Shape { t_max: 0, g_max: 0 };
    for group in partition_words(c)? {
        let frames = schedule(c, &group)?;
        shape.t_max = shape.t_max.max(frames.len());
        shape.g_max = shape.g_max.max(frames.iter().map(Vec::len).max().unwrap_or(0));
    }
    Ok(shape)
}

pub fn encode_bound(c: &BoundCircuit, shape: Shape) -> Result<SentenceEncoding, EncodeError> {
    let groups = partition_words(c)?;
    let mut words = Vec::with_capacity(groups.len());
    for group in &groups {
        let frames = schedule(c, group)?;
        let needed_t = frames.len();
        let needed_g = frames.iter().map(Vec::len).max().unwrap_or(0);
        if needed_t > shape.t_max || needed_g > shape.g_max {
            return Err(EncodeError::Capacity {
                needed_t,
                needed_g,
                t_max: shape.t_max,
                g_max: shape.g_max,
            });
        }
        let mut out = vec![vec![nop(); shape.g_max]; shape.t_max];
        for (t, frame) in frames.iter().enumerate() {
            for (s, p) in frame.iter().enumerate() {
                if let Some(a) = p.param {
                    if !(0.0..TAU).contains(&a) {
                        return Err(EncodeError::Angle(a));
                    }
                }
                out[t][s] = gate_vector(p.kind, p.param, p.offset, group.len());
            }
        }
        words.push(WordEncoding { frames: out });
    }
    Ok(SentenceEncoding {
        words,
        meta: EncodingMeta {
            n_qubits: c.n_qubits,
            widths: groups.iter().map(Vec::len).collect(),
            cups: c.cups(),
            sentence_qubit: c.sentence_qubit,
            language: c.language.clone(),
            source_text: c.source_text.clone(),
            t_max: shape.t_max,
            g_max: shape.g_max,
        },
    })
}

pub fn encode_sentence(c: &ParamCircuit, reg: &ParamRegistry, shape: Shape) -> Result<SentenceEncoding, EncodeError> {
    encode_bound(&bind(c, reg)?, shape)
}

/// Rebuilds the bound circuit: word gates in (word, time step, offset)
/// order, then each cup as CNOT and H. The H closing a cup is taken back out
/// of the control qubit's word.
pub fn decode_sentence(e: &SentenceEncoding) -> Result<BoundCircuit, EncodeError> {
    let meta = &e.meta;
    if e.words.len() != meta.widths.len() {
        return Err(EncodeError::Structure {
            word: e.words.len().min(meta.widths.len()),
            reason: format!("{} words but {} widths", e.words.len(), meta.widths.len()),
        });
    }
    if meta.widths.iter().sum::<usize>() != meta.n_qubits {
        return Err(EncodeError::Structure {
            word: 0,
            reason: "widths do not sum to the qubit count".into(),
        });
    }
    let mut gates: Vec<Gate<f64>> = Vec::new();
    let mut first = 0;
    for (w, (word, &width)) in e.words.iter().zip(&meta.widths).enumerate() {
        for (t, frame) in word.frames.iter().enumerate() {
            let mut used = BTreeSet::new();
            for (s, v) in frame.iter().enumerate() {
                let err = |reason: String| EncodeError::Decode {
                    word: w,
                    frame: t,
                    slot: s,
                    reason,
                };
                if v.iter().all(|&x| x == 0.0) {
                    continue;
                }
                let ones: Vec<usize> = (0..6).filter(|&i| v[i] == 1.0).collect();
                if ones.len() != 1 || (0..6).any(|i| v[i] != 0.0 && v[i] != 1.0) {
                    return Err(err(format!("kind one-hot {:?} is malformed", &v[..6])));
                }
                let Some(kind) = KINDS[ones[0]] else {
                    if v[6] != 0.0 || v[7] != 0.0 {
                        return Err(err("NOP with angle or offset".into()));
                    }
                    continue;
                };
                if kind == GateKind::Cnot {
                    return Err(err("CNOT inside a word".into()));
                }
                let offset = (v[7] * width as f64).round();
                if offset < 0.0 || offset as usize + kind.arity() > width {
                    return Err(err(format!("offset {} outside width {width}", v[7])));
                }
                let q = first + offset as usize;
                let qubits: Vec<usize> = (q..q + kind.arity()).collect();
                if !qubits.iter().all(|q| used.insert(*q)) {
                    return Err(err(format!("qubit {q} used twice in one time step")));
                }
                let param = kind.has_angle().then(|| v[6] * TAU);
                gates.push(Gate::new(kind, qubits, param, Some(w)));
            }
        }
        first += width;
    }
    let owner = |q: usize| meta.widths.iter().scan(0, |acc, &w| {
        *acc += w;
        Some(*acc)
    })
    .position(|end| q < end);
    let mut cups = meta.cups.clone();
    cups.sort_unstable();
    for &(a, b) in &cups {
        if a >= meta.n_qubits || b >= meta.n_qubits {
            return Err(EncodeError::Structure {
                word: 0,
                reason: format!("cup ({a}, {b}) out of range"),
            });
        }
        let w = owner(a).unwrap_or(0);
        let last = gates.iter().rposition(|g| g.qubits.contains(&a));
        match last {
            Some(i) if gates[i].kind == GateKind::H => {
                gates.remove(i);
            }
            _ => {
                return Err(EncodeError::Structure {
                    word: w,
                    reason: format!("cup ({a}, {b}) lacks its closing H on qubit {a}"),
                })
            }
        }
    }
    let mut postselect = BTreeSet::new();
    for &(a, b) in &cups {
        gates.push(Gate::new(GateKind::Cnot, vec![a, b], None, None));
        gates.push(Gate::new(GateKind::H, vec![a], None, None));
        postselect.insert(a);
        postselect.insert(b);
    }
    let c = Circuit {
        n_qubits: meta.n_qubits,
        gates,
        postselect,
        sentence_qubit: meta.sentence_qubit,
        language: meta.language.clone(),
        source_text: meta.source_text.clone(),
    };
    c.validate()?;
    Ok(c)
}

/// Token vocabulary over (kind, offset, angle bin).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokenizer {
    pub bins: usize,
    pub max_width: usize,
}

const ANGLED: [GateKind; 3] = [GateKind::Rx, GateKind::Rz, GateKind::Crz];
const PLAIN: [GateKind; 2] = [GateKind::H, GateKind::Cnot];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateToken {
    pub kind: GateKind,
    pub offset: usize,
    pub bin: Option<usize>,
}

impl Tokenizer {
    pub fn new(bins: usize, max_width: usize) -> Self {
        Self { bins, max_width }
    }

    pub fn vocab_size(&self) -> usize {
        3 + ANGLED.len() * self.max_width * self.bins + PLAIN.len() * self.max_width
    }

    pub fn bin(&self, angle: f64) -> usize {
        ((angle / TAU * self.bins as f64).floor().max(0.0) as usize).min(self.bins - 1)
    }

    pub fn bin_center(&self, bin: usize) -> f64 {
        (bin as f64 + 0.5) * TAU / self.bins as f64
    }

    /// Largest restoration error for an angle in `[0, 2π)`.
    pub fn max_angle_error(&self) -> f64 {
        PI / self.bins as f64
    }

    pub fn gate_id(&self, t: GateToken) -> Option<u32> {
        if t.offset >= self.max_width {
            return None;
        }
        let angled = ANGLED.len() * self.max_width * self.bins;
        let id = if let Some(k) = ANGLED.iter().position(|&k| k == t.kind) {
            let bin = t.bin.filter(|&b| b < self.bins)?;
            (k * self.max_width + t.offset) * self.bins + bin
        } else {
            let k = PLAIN.iter().position(|&k| k == t.kind)?;
            angled + k * self.max_width + t.offset
        };
        Some(3 + id as u32)
    }

    /// `None` for the three special ids and anything out of range.
    pub fn gate_of(&self, id: u32) -> Option<GateToken> {
        let id = (id as usize).checked_sub(3)?;
        let angled = ANGLED.len() * self.max_width * self.bins;
        if id < angled {
            let bin = id % self.bins;
            let rest = id / self.bins;
            Some(GateToken {
                kind: ANGLED[rest / self.max_width],
                offset: rest % self.max_width,
                bin: Some(bin),
            })
        } else {
            let id = id - angled;
            (id < PLAIN.len() * self.max_width).then(|| GateToken {
                kind: PLAIN[id / self.max_width],
                offset: id % self.max_width,
                bin: None,
            })
        }
    }

    pub fn tokenize(&self, e: &SentenceEncoding) -> Result<Vec<u32>, EncodeError> {
        let mut out = Vec::new();
        for (w, word) in e.words.iter().enumerate() {
            let width = e.meta.widths[w];
            for frame in &word.frames {
                for v in frame {
                    let Some(slot) = (1..6).find(|&i| v[i] == 1.0) else {
                        continue;
                    };
                    let kind = KINDS[slot].expect("slot 1.. is a gate");
                    let t = GateToken {
                        kind,
                        offset: (v[7] * width as f64).round() as usize,
                        bin: kind.has_angle().then(|| self.bin(v[6] * TAU)),
                    };
                    let id = self.gate_id(t).ok_or_else(|| EncodeError::Structure {
                        word: w,
                        reason: format!("offset {} exceeds tokenizer width {}", t.offset, self.max_width),
                    })?;
                    out.push(id);
                }
                out.push(STEP_SEP);
            }
            out.push(WORD_SEP);
        }
        Ok(out)
    }

    /// Inverse of [`tokenize`](Self::tokenize) up to angle bins. Trailing
    /// `PAD` ids are ignored.
    pub fn detokenize(&self, tokens: &[u32], meta: &EncodingMeta) -> Result<SentenceEncoding, EncodeError> {
        let end = tokens.iter().rposition(|&t| t != PAD).map_or(0, |i| i + 1);
        let mut words: Vec<WordEncoding> = Vec::new();
        let mut frames: Vec<Vec<GateVector>> = Vec::new();
        let mut frame: Vec<GateVector> = Vec::new();
        for (index, &id) in tokens[..end].iter().enumerate() {
            let err = |reason: String| EncodeError::Token { index, reason };
            match id {
                PAD => return Err(err("PAD before the end of the sequence".into())),
                STEP_SEP => {
                    if frames.len() == meta.t_max {
                        return Err(err(format!("more than {} time steps in a word", meta.t_max)));
                    }
                    frame.resize(meta.g_max, nop());
                    frames.push(std::mem::take(&mut frame));
                }
                WORD_SEP => {
                    if !frame.is_empty() || frames.len() != meta.t_max {
                        return Err(err(format!("word closed after {} of {} time steps", frames.len(), meta.t_max)));
                    }
                    if words.len() == meta.widths.len() {
                        return Err(err("more words than the metadata lists".into()));
                    }
                    words.push(WordEncoding {
                        frames: std::mem::take(&mut frames),
                    });
                }
                _ => {
                    let g = self.gate_of(id).ok_or_else(|| err(format!("id {id} outside vocabulary")))?;
                    let width = *meta
                        .widths
                        .get(words.len())
                        .ok_or_else(|| err("gate after the last word".into()))?;
                    if frame.len() == meta.g_max {
                        return Err(err(format!("more than {} gates in a time step", meta.g_max)));
                    }
                    if g.offset + g.kind.arity() > width {
                        return Err(err(format!("offset {} outside width {width}", g.offset)));
                    }
                    frame.push(gate_vector(g.kind, g.bin.map(|b| self.bin_center(b)), g.offset, width));
                }
            }
        }
        if !frame.is_empty() || !frames.is_empty() || words.len() != meta.widths.len() {
            return Err(EncodeError::Token {
                index: end,
                reason: format!("sequence ends after {} of {} words", words.len(), meta.widths.len()),
            });
        }
        Ok(SentenceEncoding {
            words,
            meta: meta.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub shape: Shape,
    pub bins: usize,
    pub max_width: usize,
    pub vocab_size: usize,
    /// Longest token sequence plus one trailing `PAD`.
    pub seq_len: usize,
    pub iqp_layers: usize,
}

impl DatasetHeader {
    pub fn tokenizer(&self) -> Tokenizer {
        Tokenizer::new(self.bins, self.max_width)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub src_tokens: Vec<u32>,
    pub tgt_tokens: Vec<u32>,
    pub meta_src: EncodingMeta,
    pub meta_tgt: EncodingMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<DatasetRecord>,
}

/// Compiled, bound circuit pair for one corpus entry.
#[derive(Debug, Clone)]
pub struct BoundPair {
    pub id: String,
    pub src: BoundCircuit,
    pub tgt: BoundCircuit,
}

pub fn bind_corpus(
    corpus: &Corpus,
    lex: &Lexicon,
    reg: &ParamRegistry,
    iqp_layers: usize,
) -> Result<Vec<BoundPair>, EncodeError> {
    corpus
        .pairs
        .iter()
        .map(|p| {
            let src = compile_text(&p.src, lex, &corpus.src_lang, reg, iqp_layers)?;
            let tgt = compile_text(&p.tgt, lex, &corpus.tgt_lang, reg, iqp_layers)?;
            Ok(BoundPair {
                id: p.id.clone(),
                src: bind(&src, reg)?,
                tgt: bind(&tgt, reg)?,
            })
        })
        .collect()
}

/// Encodes every pair at the corpus-wide shape and tokenizes both sides.
pub fn build_dataset(pairs: &[BoundPair], bins: usize, iqp_layers: usize) -> Result<Dataset, EncodeError> {
    if pairs.is_empty() {
        return Err(EncodeError::Dataset("no sentence pairs".into()));
    }
    let mut shape = Shape { t_max: 0, g_max: 0 };
    let mut max_width = 0;
    for c in pairs.iter().flat_map(|p| [&p.src, &p.tgt]) {
        let s = required_shape(c)?;
        shape.t_max = shape.t_max.max(s.t_max);
        shape.g_max = shape.g_max.max(s.g_max);
        max_width = max_width.max(partition_words(c)?.iter().map(Vec::len).max().unwrap_or(0));
    }
    let tok = Tokenizer::new(bins, max_width);
    let mut records = Vec::with_capacity(pairs.len());
    for p in pairs {
        let src = encode_bound(&p.src, shape)?;
        let tgt = encode_bound(&p.tgt, shape)?;
        records.push(DatasetRecord {
            id: p.id.clone(),
            src_tokens: tok.tokenize(&src)?,
            tgt_tokens: tok.tokenize(&tgt)?,
            meta_src: src.meta,
            meta_tgt: tgt.meta,
        });
    }
    let seq_len = 1 + records
        .iter()
        .map(|r| r.src_tokens.len().max(r.tgt_tokens.len()))
        .max()
        .unwrap_or(0);
    Ok(Dataset {
        header: DatasetHeader {
            shape,
            bins,
            max_width,
            vocab_size: tok.vocab_size(),
            seq_len,
            iqp_layers,
        },
        records,
    })
}

impl Dataset {
    pub fn to_jsonl(&self) -> String {
        let mut s = serde_json::to_string(&self.header).expect("header serializes");
        s.push('\n');
        for r in &self.records {
            s.push_str(&serde_json::to_string(r).expect("record serializes"));
            s.push('\n');
        }
        s
    }

    pub fn from_jsonl(text: &str) -> Result<Self, EncodeError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: DatasetHeader = serde_json::from_str(lines.next().ok_or_else(|| EncodeError::Dataset("empty file".into()))?)
            .map_err(|e| EncodeError::Dataset(format!("header: {e}")))?;
        let records = lines
            .enumerate()
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| EncodeError::Dataset(format!("record {}: {e}", i + 1))))
            .collect::<Result<Vec<DatasetRecord>, _>>()?;
        Ok(Self { header, records })
    }
}
