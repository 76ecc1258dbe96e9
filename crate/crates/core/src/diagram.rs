//! String diagrams: one wire per type factor, cups from the reduction, one
//! open output wire.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{check_proof, BasicType, LexiconEntry, ReductionProof, TypedSentence};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagramError {
    #[error("proof does not match sentence: {0}")]
    Structural(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordWires {
    pub entry: LexiconEntry,
    pub wire_count: usize,
    pub first_wire: usize,
}

impl WordWires {
    pub fn wires(&self) -> std::ops::Range<usize> {
        self.first_wire..self.first_wire + self.wire_count
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoDiagram {
    pub language: String,
    pub words: Vec<WordWires>,
    pub cups: Vec<(usize, usize)>,
    pub sentence_wire: usize,
    pub total_wires: usize,
    /// False when the open wire is not a plain `s` (e.g. a noun phrase).
    pub canonical: bool,
}

impl DiscoDiagram {
    pub fn text(&self) -> String {
        self.words
            .iter()
            .map(|w| w.entry.surface.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Index of the word owning `wire`.
    pub fn word_of(&self, wire: usize) -> Option<usize> {
        self.words.iter().position(|w| w.wires().contains(&wire))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("diagram serializes")
    }
}

pub fn build_diagram(ts: &TypedSentence, proof: &ReductionProof) -> Result<DiscoDiagram, DiagramError> {
    let factors = ts.factors();
    check_proof(&factors, proof).map_err(DiagramError::Structural)?;
    let mut words = Vec::with_capacity(ts.words.len());
    let mut next = 0;
    for entry in &ts.words {
        let wire_count = entry.wire_count();
        words.push(WordWires {
            entry: entry.clone(),
            wire_count,
            first_wire: next,
        });
        next += wire_count;
    }
    let mut cups = proof.cups.clone();
    cups.sort_unstable();
    Ok(DiscoDiagram {
        language: ts.language.clone(),
        words,
        cups,
        sentence_wire: proof.survivor,
        total_wires: next,
        canonical: factors[proof.survivor].is_plain(BasicType::S),
    })
}

/// Per-word `(surface, wire_count)` rows.
pub fn wire_report(d: &DiscoDiagram) -> Vec<(String, usize)> {
    d.words
        .iter()
        .map(|w| (w.entry.surface.clone(), w.wire_count))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{assign_text, parse_type, reduce, reduce_to, Lexicon, LexiconEntry};

    fn lexicon() -> Lexicon {
        let rows = [
            ("Sara", "en", "n"),
            ("sees", "en", "n.r s n.l"),
            ("Bob", "en", "n"),
            ("Sara", "fa", "n"),
            ("Bob", "fa", "n"),
            ("ra", "fa", "n.r n"),
            ("mibinad", "fa", "n.r n.r s"),
        ];
        Lexicon::new(
            rows.iter()
                .map(|(w, l, t)| LexiconEntry::new(w, l, t, w).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn sara_sees_bob_has_five_wires() {
        let ts = assign_text("Sara sees Bob", &lexicon(), "en").unwrap();
        let d = build_diagram(&ts, &reduce(&ts).unwrap()).unwrap();
        assert_eq!(d.total_wires, 5);
        assert_eq!(
            wire_report(&d).iter().map(|r| r.1).collect::<Vec<_>>(),
            vec![1, 3, 1]
        );
        assert_eq!(d.cups, vec![(0, 1), (3, 4)]);
        assert_eq!(d.sentence_wire, 2);
        assert!(d.canonical);
        assert_eq!(d.word_of(3), Some(1));
    }

    #[test]
    fn noun_fragment_is_non_canonical() {
        let ts = assign_text("Sara", &lexicon(), "en").unwrap();
        let proof = reduce_to(&ts.factors(), crate::grammar::BasicType::N).unwrap();
        let d = build_diagram(&ts, &proof).unwrap();
        assert_eq!(wire_report(&d), vec![("Sara".to_string(), 1)]);
        assert_eq!(d.sentence_wire, 0);
        assert!(!d.canonical);
    }

    #[test]
    fn mismatched_proof_rejected() {
        let ts = assign_text("Sara sees Bob", &lexicon(), "en").unwrap();
        let bad = ReductionProof {
            cups: vec![(0, 1)],
            survivor: 2,
        };
        assert!(matches!(build_diagram(&ts, &bad), Err(DiagramError::Structural(_))));
        let out_of_range = ReductionProof {
            cups: vec![(0, 1), (3, 9)],
            survivor: 2,
        };
        assert!(build_diagram(&ts, &out_of_range).is_err());
    }

    #[test]
    fn persian_counterpart_wires() {
        let ts = assign_text("Sara Bob ra mibinad", &lexicon(), "fa").unwrap();
        let d = build_diagram(&ts, &reduce(&ts).unwrap()).unwrap();
        assert_eq!(d.total_wires, 7);
        assert_eq!(d.cups.len(), 3);
        assert_eq!(parse_type("n.r n.r s").unwrap().len(), d.words[3].wire_count);
    }

    #[test]
    fn json_has_words_cups_and_sentence_wire() {
        let ts = assign_text("Sara sees Bob", &lexicon(), "en").unwrap();
        let d = build_diagram(&ts, &reduce(&ts).unwrap()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&d.to_json()).unwrap();
        assert_eq!(v["sentence_wire"], 2);
        assert_eq!(v["cups"][1][0], 3);
        assert_eq!(v["words"][1]["entry"]["type"], "n.r s n.l");
    }
}
