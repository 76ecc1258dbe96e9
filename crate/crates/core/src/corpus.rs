//! Bilingual English/Persian corpus: the default lexicon, template-driven
//! generation, and the TSV file format. Persian is transliterated to Latin.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{compile, CircuitError, ParamCircuit, ParamRegistry};
use crate::diagram::{build_diagram, DiagramError, DiscoDiagram};
use crate::grammar::{assign_text, reduce, GrammarError, Lexicon};

pub const DEFAULT_LEXICON: &str = include_str!("../data/lexicon.json");

pub fn default_lexicon() -> Lexicon {
    Lexicon::from_json(DEFAULT_LEXICON).expect("bundled lexicon is valid")
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("only {available} distinct pairs can be generated, {requested} requested")]
    Exhausted { requested: usize, available: usize },
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("duplicate pair id {0:?}")]
    DuplicateId(String),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Diagram(#[from] DiagramError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentencePair {
    pub id: String,
    pub src: String,
    pub tgt: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub src_lang: String,
    pub tgt_lang: String,
    pub pairs: Vec<SentencePair>,
}

/// Pairs quoted in the source material, always emitted first.
pub const ATTESTED: [(&str, &str); 4] = [
    ("Sara buys the book from the bookshop", "Sara ketab ra az ketabforoushi mikharad"),
    ("Sara sees Bob", "Sara Bob ra mibinad"),
    ("Sara walks in the park", "Sara dar park miravad"),
    ("Bob walks in the park", "Bob dar park miravad"),
];

enum Slot {
    Word(&'static str),
    Var(usize),
}

/// A sentence shape in both languages over concept variables.
struct Template {
    vars: &'static [&'static [&'static str]],
    distinct: bool,
    en: &'static [Slot],
    fa: &'static [Slot],
}

const PEOPLE: &[&str] = &["Sara", "Bob", "Ali", "Mina"];
const GOODS: &[&str] = &["book", "pen", "bread", "apple", "flower"];
const SHOPS: &[&str] = &["bookshop", "bakery", "market", "shop"];
const OUTDOORS: &[&str] = &["park", "garden", "street", "school"];

const TEMPLATES: [Template; 3] = [
    // S V the O from the P / S O ra az P V
    Template {
        vars: &[PEOPLE, &["buys", "takes", "brings"], GOODS, SHOPS],
        distinct: false,
        en: &[
            Slot::Var(0),
            Slot::Var(1),
            Slot::Word("the"),
            Slot::Var(2),
            Slot::Word("from"),
            Slot::Word("the"),
            Slot::Var(3),
        ],
        fa: &[Slot::Var(0), Slot::Var(2), Slot::Word("ra"), Slot::Word("from"), Slot::Var(3), Slot::Var(1)],
    },
    // S V O / S O ra V
    Template {
        vars: &[PEOPLE, &["sees", "knows", "hears"], PEOPLE],
        distinct: true,
        en: &[Slot::Var(0), Slot::Var(1), Slot::Var(2)],
        fa: &[Slot::Var(0), Slot::Var(2), Slot::Word("ra"), Slot::Var(1)],
    },
    // S V in the P / S dar P V
    Template {
        vars: &[PEOPLE, &["walks", "runs", "sits", "plays"], OUTDOORS],
        distinct: false,
        en: &[Slot::Var(0), Slot::Var(1), Slot::Word("in"), Slot::Word("the"), Slot::Var(2)],
        fa: &[Slot::Var(0), Slot::Word("in"), Slot::Var(2), Slot::Var(1)],
    },
];

fn surface<'a>(lex: &'a Lexicon, concept: &str, language: &'a str) -> Option<&'a str> {
    lex.language_entries(language)
        .find(|e| e.concept == concept)
        .map(|e| e.surface.as_str())
}

fn render(lex: &Lexicon, slots: &[Slot], fill: &[&str], language: &str) -> Option<String> {
    let words = slots
        .iter()
        .map(|s| match s {
            Slot::Word(c) => surface(lex, c, language),
            Slot::Var(i) => surface(lex, fill[*i], language),
        })
        .collect::<Option<Vec<_>>>()?;
    Some(words.join(" "))
}

fn fills(t: &Template) -> Vec<Vec<&'static str>> {
    let mut out: Vec<Vec<&'static str>> = vec![vec![]];
    for choices in t.vars {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                choices.iter().map(move |c| {
                    let mut next = prefix.clone();
                    next.push(*c);
                    next
                })
            })
            .collect();
    }
    if t.distinct {
        out.retain(|f| f.iter().collect::<BTreeSet<_>>().len() == f.len());
    }
    out
}

fn grammatical(lex: &Lexicon, text: &str, language: &str) -> bool {
    assign_text(text, lex, language).and_then(|ts| reduce(&ts)).is_ok()
}

/// The attested pairs, then template fills taken round-robin across templates
/// from per-template shuffles. Every sentence is checked to reduce.
pub fn gen_corpus(lex: &Lexicon, n_pairs: usize, seed: u64) -> Result<Corpus, CorpusError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    let mut pairs: Vec<(String, String)> = Vec::new();
    for (en, fa) in ATTESTED {
        for (text, lang) in [(en, "en"), (fa, "fa")] {
            assign_text(text, lex, lang).and_then(|ts| reduce(&ts))?;
        }
        seen.insert((en.to_string(), fa.to_string()));
        pairs.push((en.to_string(), fa.to_string()));
    }
    let mut pools: Vec<Vec<(String, String)>> = TEMPLATES
        .iter()
        .map(|t| {
            let mut pool: Vec<(String, String)> = fills(t)
                .iter()
                .filter_map(|f| Some((render(lex, t.en, f, "en")?, render(lex, t.fa, f, "fa")?)))
                .filter(|p| !seen.contains(p))
                .filter(|(en, fa)| grammatical(lex, en, "en") && grammatical(lex, fa, "fa"))
                .collect();
            pool.shuffle(&mut rng);
            pool.reverse();
            pool
        })
        .collect();
    let available = pairs.len() + pools.iter().map(Vec::len).sum::<usize>();
    if n_pairs > available {
        return Err(CorpusError::Exhausted {
            requested: n_pairs,
            available,
        });
    }
    pairs.truncate(n_pairs);
    let mut k = 0;
    while pairs.len() < n_pairs {
        let n = pools.len();
        if let Some(p) = pools[k % n].pop() {
            pairs.push(p);
        }
        k += 1;
    }
    Ok(Corpus {
        src_lang: "en".into(),
        tgt_lang: "fa".into(),
        pairs: pairs
            .into_iter()
            .enumerate()
            .map(|(i, (src, tgt))| SentencePair {
                id: format!("p{:03}", i + 1),
                src,
                tgt,
            })
            .collect(),
    })
}

impl Corpus {
    pub fn to_tsv(&self) -> String {
        let mut s = format!("#lang\t{}\t{}\n", self.src_lang, self.tgt_lang);
        for p in &self.pairs {
            let _ = writeln!(s, "{}\t{}\t{}", p.id, p.src, p.tgt);
        }
        s
    }

    pub fn from_tsv(text: &str) -> Result<Self, CorpusError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(CorpusError::Format {
            line: 1,
            reason: "missing header".into(),
        })?;
        let head: Vec<&str> = header.split('\t').collect();
        if head.len() != 3 || head[0] != "#lang" {
            return Err(CorpusError::Format {
                line: 1,
                reason: "expected `#lang<TAB>src<TAB>tgt`".into(),
            });
        }
        let mut ids = BTreeSet::new();
        let mut pairs = Vec::new();
        for (i, line) in lines {
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(CorpusError::Format {
                    line: i + 1,
                    reason: format!("expected 3 columns, found {}", cols.len()),
                });
            }
            if !ids.insert(cols[0].to_string()) {
                return Err(CorpusError::DuplicateId(cols[0].to_string()));
            }
            pairs.push(SentencePair {
                id: cols[0].into(),
                src: cols[1].into(),
                tgt: cols[2].into(),
            });
        }
        Ok(Corpus {
            src_lang: head[1].into(),
            tgt_lang: head[2].into(),
            pairs,
        })
    }
}

/// Parse, reduce and lay out one sentence.
pub fn diagram_text(text: &str, lex: &Lexicon, language: &str) -> Result<DiscoDiagram, CorpusError> {
    let ts = assign_text(text, lex, language)?;
    let proof = reduce(&ts)?;
    Ok(build_diagram(&ts, &proof)?)
}

pub fn compile_text(
    text: &str,
    lex: &Lexicon,
    language: &str,
    reg: &ParamRegistry,
    iqp_layers: usize,
) -> Result<ParamCircuit, CorpusError> {
    Ok(compile(&diagram_text(text, lex, language)?, reg, iqp_layers)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_lexicon_loads() {
        let lex = default_lexicon();
        assert!(lex.concepts().values().all(|es| {
            let counts: BTreeSet<usize> = es.iter().map(|e| e.wire_count()).collect();
            counts.len() == 1
        }));
    }

    #[test]
    fn four_pairs_are_attested() {
        let c = gen_corpus(&default_lexicon(), 4, 0).unwrap();
        let got: Vec<(&str, &str)> = c.pairs.iter().map(|p| (p.src.as_str(), p.tgt.as_str())).collect();
        assert_eq!(got, ATTESTED.to_vec());
    }

    #[test]
    fn eighty_pairs_all_reduce() {
        let lex = default_lexicon();
        let c = gen_corpus(&lex, 80, 7).unwrap();
        assert_eq!(c.pairs.len(), 80);
        let distinct: BTreeSet<_> = c.pairs.iter().map(|p| &p.src).collect();
        assert_eq!(distinct.len(), 80);
        for p in &c.pairs {
            assert!(grammatical(&lex, &p.src, "en"), "{}", p.src);
            assert!(grammatical(&lex, &p.tgt, "fa"), "{}", p.tgt);
        }
    }

    #[test]
    fn generation_is_seeded() {
        let lex = default_lexicon();
        assert_eq!(gen_corpus(&lex, 30, 5).unwrap().to_tsv(), gen_corpus(&lex, 30, 5).unwrap().to_tsv());
        assert_ne!(gen_corpus(&lex, 30, 5).unwrap(), gen_corpus(&lex, 30, 6).unwrap());
    }

    #[test]
    fn exhaustion_reported() {
        assert!(matches!(
            gen_corpus(&default_lexicon(), 10_000, 0),
            Err(CorpusError::Exhausted { .. })
        ));
    }

    #[test]
    fn tsv_round_trip() {
        let c = gen_corpus(&default_lexicon(), 12, 1).unwrap();
        let text = c.to_tsv();
        assert!(text.starts_with("#lang\ten\tfa\np001\t"));
        assert_eq!(Corpus::from_tsv(&text).unwrap(), c);
        assert!(Corpus::from_tsv("#lang\ten\tfa\na\tx\n").is_err());
        assert!(Corpus::from_tsv("#lang\ten\tfa\na\tx\ty\na\tx\ty\n").is_err());
    }
}
