//! Pregroup parsing, sentence circuits, entropy alignment and circuit-to-circuit
//! sequence translation for a two-language corpus.

pub mod circuit;
pub mod diagram;
pub mod grammar;
pub mod corpus;
pub mod entropy;
pub mod sim;
pub mod encode;
pub mod seq2seq;
