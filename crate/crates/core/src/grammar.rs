//! Pregroup types, lexicon lookup and the reduction search.
//!
//! A sentence is grammatical when the concatenation of its word types
//! contracts to the plain sentence type `s`. Contractions (cups) join a
//! factor `x^(k)` with an adjacent `x^(k+1)` once everything between them has
//! already been cancelled, so every successful reduction is a non-crossing
//! matching that leaves exactly one factor uncovered.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrammarError {
    #[error("cannot parse type {text:?}: bad token {token:?}")]
    Parse { text: String, token: String },
    #[error("word {word:?} is not in the lexicon for language {language:?}")]
    UnknownWord { word: String, language: String },
    #[error("sentence is empty")]
    EmptySentence,
    #[error("sentence does not reduce to {target}: {remaining} factors survive the best partial reduction")]
    Ungrammatical {
        target: BasicType,
        remaining: usize,
        partial: PartialReduction,
    },
    #[error("invalid lexicon: {0}")]
    InvalidLexicon(String),
}

/// The two basic types: nouns and declarative sentences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BasicType {
    N,
    S,
}

impl fmt::Display for BasicType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasicType::N => f.write_str("n"),
            BasicType::S => f.write_str("s"),
        }
    }
}

/// A basic type with an adjoint order: negative for left adjoints, positive
/// for right adjoints, zero for the plain type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SimpleType {
    pub base: BasicType,
    pub adjoint: i32,
}

impl SimpleType {
    pub const fn new(base: BasicType, adjoint: i32) -> Self {
        Self { base, adjoint }
    }

    pub const fn plain(base: BasicType) -> Self {
        Self { base, adjoint: 0 }
    }

    pub fn is_plain(&self, base: BasicType) -> bool {
        self.base == base && self.adjoint == 0
    }

    /// `self` on the left contracts with `right`: `x^(k) x^(k+1) -> 1`.
    pub fn cancels_with(&self, right: &SimpleType) -> bool {
        self.base == right.base && self.adjoint + 1 == right.adjoint
    }
}

impl fmt::Display for SimpleType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.base)?;
        let suffix = if self.adjoint < 0 { ".l" } else { ".r" };
        for _ in 0..self.adjoint.unsigned_abs() {
            f.write_str(suffix)?;
        }
        Ok(())
    }
}

/// An ordered product of simple types. The empty product is the unit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct PregroupType(Vec<SimpleType>);

impl PregroupType {
    pub fn new(factors: Vec<SimpleType>) -> Self {
        Self(factors)
    }

    pub fn unit() -> Self {
        Self(Vec::new())
    }

    pub fn factors(&self) -> &[SimpleType] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Parses the textual notation: whitespace separated factors, each `n` or
/// `s` followed by zero or more `.l` or `.r` suffixes (not mixed).
pub fn parse_type(text: &str) -> Result<PregroupType, GrammarError> {
    let err = |token: &str| GrammarError::Parse {
        text: text.to_string(),
        token: token.to_string(),
    };
    let mut factors = Vec::new();
    for token in text.split_whitespace() {
        let mut parts = token.split('.');
        let base = match parts.next() {
            Some("n") => BasicType::N,
            Some("s") => BasicType::S,
            _ => return Err(err(token)),
        };
        let mut adjoint = 0i32;
        for part in parts {
            let step = match part {
                "l" => -1,
                "r" => 1,
                _ => return Err(err(token)),
            };
            if adjoint != 0 && adjoint.signum() != step {
                return Err(err(token));
            }
            adjoint += step;
        }
        factors.push(SimpleType::new(base, adjoint));
    }
    Ok(PregroupType(factors))
}

impl FromStr for PregroupType {
    type Err = GrammarError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_type(s)
    }
}

impl fmt::Display for PregroupType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, factor) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{factor}")?;
        }
        Ok(())
    }
}

impl Serialize for PregroupType {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PregroupType {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_type(&text).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub surface: String,
    pub language: String,
    #[serde(rename = "type")]
    pub ty: PregroupType,
    /// Cross-lingual key; synonymous words share it and therefore share angles.
    pub concept: String,
}

impl LexiconEntry {
    pub fn new(surface: &str, language: &str, ty: &str, concept: &str) -> Result<Self, GrammarError> {
        Ok(Self {
            surface: surface.to_string(),
            language: language.to_string(),
            ty: parse_type(ty)?,
            concept: concept.to_string(),
        })
    }

    pub fn wire_count(&self) -> usize {
        self.ty.len()
    }

    /// Number of angle parameters the word's circuit fragment carries.
    pub fn param_arity(&self, iqp_layers: usize) -> usize {
        match self.wire_count() {
            0 => 0,
            1 => 3,
            k => iqp_layers * (k - 1),
        }
    }
}

/// Word list for one or more languages. A surface form may carry several
/// types; lookups return them in file order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
}

impl Lexicon {
    pub fn new(entries: Vec<LexiconEntry>) -> Result<Self, GrammarError> {
        let mut seen = HashSet::new();
        for e in &entries {
            if e.concept.is_empty() {
                return Err(GrammarError::InvalidLexicon(format!(
                    "entry {:?} ({}) has an empty concept",
                    e.surface, e.language
                )));
            }
            if e.surface.is_empty() || e.surface.split_whitespace().count() != 1 {
                return Err(GrammarError::InvalidLexicon(format!(
                    "surface {:?} must be a single token",
                    e.surface
                )));
            }
            if !seen.insert((e.surface.as_str(), e.language.as_str(), &e.ty)) {
                return Err(GrammarError::InvalidLexicon(format!(
                    "duplicate entry {:?} ({}) with type {}",
                    e.surface, e.language, e.ty
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn from_json(text: &str) -> Result<Self, GrammarError> {
        let entries: Vec<LexiconEntry> =
            serde_json::from_str(text).map_err(|e| GrammarError::InvalidLexicon(e.to_string()))?;
        Self::new(entries)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("lexicon serializes")
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup<'a>(&'a self, surface: &'a str, language: &'a str) -> impl Iterator<Item = &'a LexiconEntry> + 'a {
        self.entries
            .iter()
            .filter(move |e| e.surface == surface && e.language == language)
    }

    pub fn language_entries<'a>(&'a self, language: &'a str) -> impl Iterator<Item = &'a LexiconEntry> + 'a {
        self.entries.iter().filter(move |e| e.language == language)
    }

    /// Concepts in sorted order with the entries that carry them.
    pub fn concepts(&self) -> BTreeMap<&str, Vec<&LexiconEntry>> {
        let mut map: BTreeMap<&str, Vec<&LexiconEntry>> = BTreeMap::new();
        for e in &self.entries {
            map.entry(e.concept.as_str()).or_default().push(e);
        }
        map
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypedSentence {
    pub language: String,
    pub words: Vec<LexiconEntry>,
}

impl TypedSentence {
    pub fn factors(&self) -> Vec<SimpleType> {
        self.words
            .iter()
            .flat_map(|w| w.ty.factors().iter().copied())
            .collect()
    }

    pub fn text(&self) -> String {
        self.words
            .iter()
            .map(|w| w.surface.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Cups over the flattened factor sequence plus the one surviving factor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionProof {
    /// Sorted by left index.
    pub cups: Vec<(usize, usize)>,
    pub survivor: usize,
}

/// Best effort reported when no reduction to the target exists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialReduction {
    pub cups: Vec<(usize, usize)>,
    pub remaining: Vec<usize>,
}

/// Looks up every word and returns the first combination of lexicon entries
/// (in file order, leftmost word varying slowest) that reduces to `s`. When
/// no combination reduces, the all-first assignment is returned so that
/// [`reduce`] can report the failure.
pub fn assign_types(words: &[&str], lexicon: &Lexicon, language: &str) -> Result<TypedSentence, GrammarError> {
    if words.is_empty() {
        return Err(GrammarError::EmptySentence);
    }
    let mut candidates = Vec::with_capacity(words.len());
    for w in words {
        let found: Vec<&LexiconEntry> = lexicon.lookup(w, language).collect();
        if found.is_empty() {
            return Err(GrammarError::UnknownWord {
                word: w.to_string(),
                language: language.to_string(),
            });
        }
        candidates.push(found);
    }
    let build = |choice: &[usize]| TypedSentence {
        language: language.to_string(),
        words: choice
            .iter()
            .zip(&candidates)
            .map(|(&i, c)| c[i].clone())
            .collect(),
    };
    let mut choice = vec![0usize; words.len()];
    if candidates.iter().all(|c| c.len() == 1) {
        return Ok(build(&choice));
    }
    loop {
        let ts = build(&choice);
        if reduce(&ts).is_ok() {
            return Ok(ts);
        }
        // odometer increment, rightmost word fastest
        let mut pos = words.len();
        loop {
            if pos == 0 {
                return Ok(build(&vec![0; words.len()]));
            }
            pos -= 1;
            choice[pos] += 1;
            if choice[pos] < candidates[pos].len() {
                break;
            }
            choice[pos] = 0;
        }
    }
}

/// Splits on whitespace and assigns types.
pub fn assign_text(text: &str, lexicon: &Lexicon, language: &str) -> Result<TypedSentence, GrammarError> {
    let words: Vec<&str> = text.split_whitespace().collect();
    assign_types(&words, lexicon, language)
}

pub fn reduce(ts: &TypedSentence) -> Result<ReductionProof, GrammarError> {
    reduce_to(&ts.factors(), BasicType::S)
}

/// Backtracking search over adjacent contractions, smallest left index
/// first. Failed residual sequences are memoised, so the search visits each
/// reachable residual at most once.
pub fn reduce_to(factors: &[SimpleType], target: BasicType) -> Result<ReductionProof, GrammarError> {
    if factors.is_empty() {
        return Err(GrammarError::EmptySentence);
    }
    let mut search = Search {
        factors,
        target,
        failed: HashSet::new(),
        best: PartialReduction {
            cups: Vec::new(),
            remaining: (0..factors.len()).collect(),
        },
    };
    let mut cups = Vec::new();
    let remaining: Vec<usize> = (0..factors.len()).collect();
    if let Some(survivor) = search.run(remaining, &mut cups) {
        cups.sort_unstable();
        return Ok(ReductionProof { cups, survivor });
    }
    let mut partial = search.best;
    partial.cups.sort_unstable();
    Err(GrammarError::Ungrammatical {
        target,
        remaining: partial.remaining.len(),
        partial,
    })
}

struct Search<'a> {
    factors: &'a [SimpleType],
    target: BasicType,
    failed: HashSet<Vec<usize>>,
    best: PartialReduction,
}

impl Search<'_> {
    fn run(&mut self, remaining: Vec<usize>, cups: &mut Vec<(usize, usize)>) -> Option<usize> {
        if remaining.len() == 1 && self.factors[remaining[0]].is_plain(self.target) {
            return Some(remaining[0]);
        }
        if remaining.len() < self.best.remaining.len() {
            self.best = PartialReduction {
                cups: cups.clone(),
                remaining: remaining.clone(),
            };
        }
        if self.failed.contains(&remaining) {
            return None;
        }
        for k in 0..remaining.len().saturating_sub(1) {
            let (a, b) = (remaining[k], remaining[k + 1]);
            if !self.factors[a].cancels_with(&self.factors[b]) {
                continue;
            }
            let mut next = Vec::with_capacity(remaining.len() - 2);
            next.extend_from_slice(&remaining[..k]);
            next.extend_from_slice(&remaining[k + 2..]);
            cups.push((a, b));
            if let Some(s) = self.run(next, cups) {
                return Some(s);
            }
            cups.pop();
        }
        self.failed.insert(remaining);
        None
    }
}

/// Checks a proof against a factor sequence: cups in range, disjoint,
/// cancellable, non-crossing, never enclosing the survivor, covering every
/// other factor.
pub fn check_proof(factors: &[SimpleType], proof: &ReductionProof) -> Result<(), String> {
    let n = factors.len();
    if proof.survivor >= n {
        return Err(format!("survivor {} out of range {n}", proof.survivor));
    }
    let mut used = vec![false; n];
    used[proof.survivor] = true;
    for &(i, j) in &proof.cups {
        if i >= j || j >= n {
            return Err(format!("cup ({i}, {j}) is not an ordered pair in range"));
        }
        for k in [i, j] {
            if used[k] {
                return Err(format!("factor {k} is used twice"));
            }
            used[k] = true;
        }
        if !factors[i].cancels_with(&factors[j]) {
            return Err(format!("cup ({i}, {j}) joins {} and {}", factors[i], factors[j]));
        }
        if i < proof.survivor && proof.survivor < j {
            return Err(format!("cup ({i}, {j}) encloses the survivor"));
        }
    }
    if let Some(k) = used.iter().position(|u| !u) {
        return Err(format!("factor {k} is neither cancelled nor the survivor"));
    }
    for &(i, j) in &proof.cups {
        for &(k, l) in &proof.cups {
            if i < k && k < j && j < l {
                return Err(format!("cups ({i}, {j}) and ({k}, {l}) cross"));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn en_lexicon() -> Lexicon {
        let rows = [
            ("Sara", "n"),
            ("buys", "n.r s n.l n.l"),
            ("the", "n n.l"),
            ("book", "n"),
            ("from", "n n.l"),
            ("bookshop", "n"),
        ];
        Lexicon::new(
            rows.iter()
                .map(|(w, t)| LexiconEntry::new(w, "en", t, w).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn parse_verb_type() {
        let t = parse_type("n.r s n.l n.l").unwrap();
        let expect = [
            SimpleType::new(BasicType::N, 1),
            SimpleType::new(BasicType::S, 0),
            SimpleType::new(BasicType::N, -1),
            SimpleType::new(BasicType::N, -1),
        ];
        assert_eq!(t.factors(), &expect);
        assert_eq!(t.to_string(), "n.r s n.l n.l");
    }

    #[test]
    fn parse_unit_and_iterated() {
        assert!(parse_type("").unwrap().is_empty());
        let t = parse_type("n.r.r").unwrap();
        assert_eq!(t.factors(), &[SimpleType::new(BasicType::N, 2)]);
        assert_eq!(parse_type("s.l.l.l").unwrap().to_string(), "s.l.l.l");
    }

    #[test]
    fn parse_errors_name_token() {
        match parse_type("n x.l") {
            Err(GrammarError::Parse { token, .. }) => assert_eq!(token, "x.l"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_type("n.q"), Err(GrammarError::Parse { .. })));
        assert!(matches!(parse_type("n.l.r"), Err(GrammarError::Parse { .. })));
        assert!(matches!(parse_type("n."), Err(GrammarError::Parse { .. })));
    }

    #[test]
    fn unknown_word_reported() {
        let lex = en_lexicon();
        let err = assign_types(&["Sara", "sleeps"], &lex, "en").unwrap_err();
        assert_eq!(
            err,
            GrammarError::UnknownWord {
                word: "sleeps".into(),
                language: "en".into()
            }
        );
        assert!(matches!(
            assign_types(&["Sara"], &lex, "fa"),
            Err(GrammarError::UnknownWord { .. })
        ));
    }

    #[test]
    fn single_word_lookup() {
        let ts = assign_types(&["Sara"], &en_lexicon(), "en").unwrap();
        assert_eq!(ts.words.len(), 1);
        assert_eq!(ts.words[0].ty.to_string(), "n");
    }

    #[test]
    fn single_s_word_is_reduced() {
        let proof = reduce_to(&[SimpleType::plain(BasicType::S)], BasicType::S).unwrap();
        assert!(proof.cups.is_empty());
        assert_eq!(proof.survivor, 0);
    }

    #[test]
    fn english_example_reduces() {
        let ts = assign_text("Sara buys the book from the bookshop", &en_lexicon(), "en").unwrap();
        let proof = reduce(&ts).unwrap();
        assert_eq!(proof.survivor, 2);
        assert_eq!(proof.cups, vec![(0, 1), (3, 8), (4, 5), (6, 7), (9, 10), (11, 12)]);
        check_proof(&ts.factors(), &proof).unwrap();
    }

    #[test]
    fn ungrammatical_reports_partial() {
        let lex = en_lexicon();
        let ts = assign_types(&["Sara", "book"], &lex, "en").unwrap();
        match reduce(&ts) {
            Err(GrammarError::Ungrammatical { remaining, partial, .. }) => {
                assert_eq!(remaining, 2);
                assert_eq!(partial.remaining, vec![0, 1]);
            }
            other => panic!("unexpected {other:?}"),
        }
        let ts = assign_types(&["Sara", "buys", "book"], &lex, "en").unwrap();
        match reduce(&ts) {
            Err(GrammarError::Ungrammatical { partial, .. }) => {
                assert_eq!(partial.cups, vec![(0, 1), (4, 5)]);
                assert_eq!(partial.remaining, vec![2, 3]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn backtracking_finds_non_greedy_reduction() {
        // greedy (0,1) strands n.r n; the reduction needs (1,2) then (0,3)
        let f = parse_type("n.l n n.r n s").unwrap();
        let proof = reduce_to(f.factors(), BasicType::S).unwrap();
        check_proof(f.factors(), &proof).unwrap();
        assert_eq!(proof.cups, vec![(0, 3), (1, 2)]);
        assert_eq!(proof.survivor, 4);
    }

    #[test]
    fn ambiguous_lexicon_backtracks_over_entries() {
        let mut entries = en_lexicon().entries().to_vec();
        // a first, unusable reading of "Sara"
        entries.insert(0, LexiconEntry::new("Sara", "en", "n n.l", "Sara").unwrap());
        let lex = Lexicon::new(entries).unwrap();
        let ts = assign_text("Sara buys the book from the bookshop", &lex, "en").unwrap();
        assert_eq!(ts.words[0].ty.to_string(), "n");
        assert!(reduce(&ts).is_ok());
    }

    #[test]
    fn lexicon_rejects_duplicates_and_empty_concepts() {
        let e = LexiconEntry::new("Sara", "en", "n", "Sara").unwrap();
        assert!(Lexicon::new(vec![e.clone(), e.clone()]).is_err());
        let mut bad = e;
        bad.concept.clear();
        assert!(Lexicon::new(vec![bad]).is_err());
    }

    #[test]
    fn lexicon_json_round_trip() {
        let lex = en_lexicon();
        let text = lex.to_json();
        assert!(text.contains("\"type\": \"n.r s n.l n.l\""));
        assert_eq!(Lexicon::from_json(&text).unwrap(), lex);
    }

    #[test]
    fn check_proof_rejects_crossing_and_enclosure() {
        let f = parse_type("n.l n.l n n s").unwrap();
        let crossing = ReductionProof {
            cups: vec![(0, 2), (1, 3)],
            survivor: 4,
        };
        assert!(check_proof(f.factors(), &crossing).is_err());
        let f = parse_type("n.l s n").unwrap();
        let enclosing = ReductionProof {
            cups: vec![(0, 2)],
            survivor: 1,
        };
        assert!(check_proof(f.factors(), &enclosing).unwrap_err().contains("encloses"));
    }
}
