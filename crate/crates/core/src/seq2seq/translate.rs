//! Greedy decoding of target tokens under the token grammar, and conversion
//! of the result back into a circuit.

use serde::{Deserialize, Serialize};

use super::model::Model;
use super::Seq2SeqError;
use crate::circuit::{BoundCircuit, GateKind};
use crate::encode::{
    decode_sentence, encode_bound, DatasetHeader, EncodingMeta, SentenceEncoding, Shape, Tokenizer, GATE_DIM, PAD, STEP_SEP,
    WORD_SEP,
};
use crate::grammar::{reduce, Lexicon, LexiconEntry, TypedSentence};

/// Position in the token grammar: words of `t_max` steps of at most `g_max`
/// gates, offsets strictly increasing within a step.
#[derive(Debug, Clone)]
pub struct TokenGrammar {
    pub tokenizer: Tokenizer,
    pub shape: Shape,
    pub widths: Option<Vec<usize>>,
    words: usize,
    frames: usize,
    gates: usize,
    free_offset: usize,
    finished: bool,
}

impl TokenGrammar {
    pub fn new(tokenizer: Tokenizer, shape: Shape, widths: Option<Vec<usize>>) -> Self {
        Self {
            tokenizer,
            shape,
            widths,
            words: 0,
            frames: 0,
            gates: 0,
            free_offset: 0,
            finished: false,
        }
    }

    fn all_words_done(&self) -> bool {
        self.widths.as_ref().is_some_and(|w| self.words == w.len())
    }

    fn at_boundary(&self) -> bool {
        self.frames == 0 && self.gates == 0
    }

    /// A complete sequence may stop here.
    pub fn can_end(&self) -> bool {
        self.finished
            || (self.at_boundary() && self.words > 0 && self.widths.as_ref().is_none_or(|w| self.words == w.len()))
    }

    pub fn legal(&self, id: u32) -> bool {
        if self.finished {
            return id == PAD;
        }
        match id {
            PAD => self.can_end(),
            _ if self.all_words_done() => false,
            WORD_SEP => self.frames == self.shape.t_max,
            STEP_SEP => self.frames < self.shape.t_max,
            _ => {
                let Some(g) = self.tokenizer.gate_of(id) else {
                    return false;
                };
                let width = self
                    .widths
                    .as_ref()
                    .map_or(self.tokenizer.max_width, |w| w[self.words]);
                g.kind != GateKind::Cnot
                    && self.frames < self.shape.t_max
                    && self.gates < self.shape.g_max
                    && g.offset >= self.free_offset
                    && g.offset + g.kind.arity() <= width
            }
        }
    }

    pub fn advance(&mut self, id: u32) {
        match id {
            PAD => self.finished = true,
            STEP_SEP => {
                self.frames += 1;
                self.gates = 0;
                self.free_offset = 0;
            }
            WORD_SEP => {
                self.words += 1;
                self.frames = 0;
            }
            _ => {
                let g = self.tokenizer.gate_of(id).expect("advance follows legal");
                self.gates += 1;
                self.free_offset = g.offset + g.kind.arity();
            }
        }
    }

    /// Best legal id by score, or `None` when nothing is legal.
    pub fn best(&self, scores: &[f64]) -> Option<u32> {
        scores
            .iter()
            .enumerate()
            .filter(|(i, _)| self.legal(*i as u32))
            .fold(None, |best: Option<(usize, f64)>, (i, &v)| match best {
                Some((_, bv)) if bv >= v => best,
                _ => Some((i, v)),
            })
            .map(|(i, _)| i as u32)
    }
}

fn argmax(scores: &[f64]) -> u32 {
    scores
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |a, (i, &v)| if v > a.1 { (i, v) } else { a })
        .0 as u32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decoded {
    pub tokens: Vec<u32>,
    /// Unconstrained argmax at each emitted position.
    pub raw: Vec<u32>,
    pub repairs: usize,
}

/// Greedy decoding; illegal argmax tokens are replaced by the best legal
/// one. The trailing `PAD` is not included in `tokens`.
pub fn greedy_decode(model: &Model, src: &[u32], mut grammar: TokenGrammar) -> Result<Decoded, Seq2SeqError> {
    let len = model.cfg.seq_len;
    let positional = (!model.is_autoregressive()).then(|| model.positional_logits(src));
    let mut state = model.is_autoregressive().then(|| model.start(src));
    let mut out = Decoded {
        tokens: Vec::new(),
        raw: Vec::new(),
        repairs: 0,
    };
    let mut prev = PAD;
    for t in 0..len {
        let scores = match (&positional, &mut state) {
            (Some(l), _) => l.row(t).to_vec(),
            (None, Some(s)) => model.step(s, prev),
            _ => unreachable!("one decoding mode is set"),
        };
        let raw = argmax(&scores);
        if t == 0 && raw == PAD {
            return Err(Seq2SeqError::EmptyCircuit);
        }
        let Some(pick) = grammar.best(&scores) else {
            break;
        };
        out.raw.push(raw);
        out.repairs += usize::from(pick != raw);
        if pick == PAD {
            return Ok(out);
        }
        grammar.advance(pick);
        out.tokens.push(pick);
        prev = pick;
    }
    if grammar.can_end() {
        Ok(out)
    } else {
        Err(Seq2SeqError::Unrepairable {
            reason: "sequence length exhausted mid-word".into(),
            tokens: out.raw,
        })
    }
}

/// How the target circuit's structure is obtained.
#[derive(Debug, Clone)]
pub enum TargetMeta {
    /// Widths, cups and sentence qubit are given.
    Known(EncodingMeta),
    /// Widths are read off the decoded gates; cups come from a reduction
    /// over lexicon types of matching width in `language`.
    Infer { language: String },
}

#[derive(Debug, Clone)]
pub struct Translation {
    pub decoded: Decoded,
    pub encoding: SentenceEncoding,
    pub circuit: BoundCircuit,
    /// Cup-closing Hadamards that had to be inserted.
    pub inserted_h: usize,
}

fn split_words(tokens: &[u32]) -> Vec<&[u32]> {
    tokens.split(|&t| t == WORD_SEP).filter(|w| !w.is_empty()).collect()
}

fn inferred_widths(tok: &Tokenizer, tokens: &[u32]) -> Vec<usize> {
    split_words(tokens)
        .iter()
        .map(|w| {
            w.iter()
                .filter_map(|&t| tok.gate_of(t))
                .map(|g| g.offset + g.kind.arity())
                .max()
                .unwrap_or(1)
        })
        .collect()
}

/// First assignment of lexicon types with the given wire counts that reduces
/// to a sentence.
pub fn infer_structure(widths: &[usize], lexicon: &Lexicon, language: &str) -> Result<EncodingMeta, Seq2SeqError> {
    let mut by_width: Vec<Vec<&LexiconEntry>> = Vec::new();
    for &w in widths {
        let mut seen = Vec::new();
        let mut options: Vec<&LexiconEntry> = Vec::new();
        for e in lexicon.language_entries(language).filter(|e| e.wire_count() == w) {
            if !seen.contains(&&e.ty) {
                seen.push(&e.ty);
                options.push(e);
            }
        }
        by_width.push(options);
    }
    fn search(
        by_width: &[Vec<&LexiconEntry>],
        chosen: &mut Vec<LexiconEntry>,
        language: &str,
    ) -> Option<(Vec<(usize, usize)>, usize)> {
        if chosen.len() == by_width.len() {
            let ts = TypedSentence {
                language: language.to_string(),
                words: chosen.clone(),
            };
            return reduce(&ts).ok().map(|p| (p.cups, p.survivor));
        }
        for e in &by_width[chosen.len()] {
            chosen.push((*e).clone());
            if let Some(found) = search(by_width, chosen, language) {
                return Some(found);
            }
            chosen.pop();
        }
        None
    }
    let (cups, sentence_qubit) = search(&by_width, &mut Vec::new(), language).ok_or_else(|| Seq2SeqError::Unrepairable {
        reason: format!("no {language} type assignment fits word widths {widths:?}"),
        tokens: Vec::new(),
    })?;
    Ok(EncodingMeta {
        n_qubits: widths.iter().sum(),
        widths: widths.to_vec(),
        cups,
        sentence_qubit,
        language: language.to_string(),
        source_text: String::new(),
        t_max: 0,
        g_max: 0,
    })
}

/// Makes sure the last gate on every cup's control qubit is a Hadamard,
/// inserting one in a later free slot when it is not. Returns how many were
/// inserted.
pub fn repair_cup_hadamards(e: &mut SentenceEncoding) -> Result<usize, Seq2SeqError> {
    let mut inserted = 0;
    let starts: Vec<usize> = e
        .meta
        .widths
        .iter()
        .scan(0, |acc, &w| {
            let s = *acc;
            *acc += w;
            Some(s)
        })
        .collect();
    for &(a, _) in &e.meta.cups.clone() {
        let w = starts.iter().rposition(|&s| s <= a).unwrap_or(0);
        let width = e.meta.widths[w];
        let off = a - starts[w];
        let touches = |v: &[f64; GATE_DIM]| -> Option<bool> {
            let kind = (1..6).find(|&i| v[i] == 1.0)?;
            let o = (v[7] * width as f64).round() as usize;
            let arity = if kind == 4 { 2 } else { 1 };
            (o <= off && off < o + arity).then_some(kind == 3)
        };
        let frames = &mut e.words[w].frames;
        let mut last: Option<(usize, bool)> = None;
        for (t, f) in frames.iter().enumerate() {
            for v in f {
                if let Some(is_h) = touches(v) {
                    last = Some((t, is_h));
                }
            }
        }
        if let Some((_, true)) = last {
            continue;
        }
        let from = last.map_or(0, |(t, _)| t + 1);
        let slot = (from..frames.len()).find_map(|t| {
            let f = &frames[t];
            let clash = f.iter().any(|v| touches(v).is_some());
            let free = f.iter().position(|v| (1..6).all(|i| v[i] == 0.0));
            (!clash).then_some(free.map(|s| (t, s))).flatten()
        });
        let Some((t, s)) = slot else {
            return Err(Seq2SeqError::Unrepairable {
                reason: format!("no free time step for the Hadamard closing the cup on qubit {a}"),
                tokens: Vec::new(),
            });
        };
        let mut h = [0.0; GATE_DIM];
        h[3] = 1.0;
        h[7] = off as f64 / width as f64;
        frames[t][s] = h;
        frames[t].sort_by(|x, y| {
            let key = |v: &[f64; GATE_DIM]| if v[0] == 1.0 || v.iter().all(|&z| z == 0.0) { f64::INFINITY } else { v[7] };
            key(x).total_cmp(&key(y))
        });
        inserted += 1;
    }
    Ok(inserted)
}

/// Translates source tokens into a bound target circuit.
pub fn translate_tokens(
    model: &Model,
    src: &[u32],
    header: &DatasetHeader,
    target: &TargetMeta,
    lexicon: Option<&Lexicon>,
) -> Result<Translation, Seq2SeqError> {
    let tok = header.tokenizer();
    let widths = match target {
        TargetMeta::Known(m) => Some(m.widths.clone()),
        TargetMeta::Infer { .. } => None,
    };
    let decoded = greedy_decode(model, src, TokenGrammar::new(tok, header.shape, widths))?;
    if decoded.tokens.iter().all(|&t| t == PAD) {
        return Err(Seq2SeqError::EmptyCircuit);
    }
    let mut meta = match target {
        TargetMeta::Known(m) => m.clone(),
        TargetMeta::Infer { language } => {
            let lex = lexicon.ok_or_else(|| Seq2SeqError::Config("inferring structure needs a lexicon".into()))?;
            infer_structure(&inferred_widths(&tok, &decoded.tokens), lex, language)?
        }
    };
    meta.t_max = header.shape.t_max;
    meta.g_max = header.shape.g_max;
    let mut encoding = tok.detokenize(&decoded.tokens, &meta).map_err(|e| Seq2SeqError::Unrepairable {
        reason: e.to_string(),
        tokens: decoded.raw.clone(),
    })?;
    let inserted_h = repair_cup_hadamards(&mut encoding).map_err(|e| match e {
        Seq2SeqError::Unrepairable { reason, .. } => Seq2SeqError::Unrepairable {
            reason,
            tokens: decoded.raw.clone(),
        },
        other => other,
    })?;
    let circuit = decode_sentence(&encoding)?;
    Ok(Translation {
        decoded,
        encoding,
        circuit,
        inserted_h,
    })
}

/// Encodes and tokenizes `src` at the dataset shape, then translates.
pub fn translate(
    model: &Model,
    src: &BoundCircuit,
    header: &DatasetHeader,
    target: &TargetMeta,
    lexicon: Option<&Lexicon>,
) -> Result<Translation, Seq2SeqError> {
    let tok = header.tokenizer();
    let tokens = tok.tokenize(&encode_bound(src, header.shape)?)?;
    translate_tokens(model, &tokens, header, target, lexicon)
}
