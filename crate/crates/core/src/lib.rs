//! Error-feedback retrieval for idiom explanation.
//!
//! A first generation pass exposes the idioms a model gets wrong. Each
//! failure is turned into a short corrective hint, keyed by the embedding of
//! its idiom, and archived in a [`efrepo::Repository`]. On a second pass each
//! test idiom retrieves its nearest archived failure and the hint is added to
//! the prompt. [`metrics`] scores both passes with a fifteen-column battery.
//!
//! Modules, bottom up:
//!
//! * [`text`]: shared tokenizer and stopwords
//! * [`corpus`]: idiom records, splits, annotation agreement
//! * [`encoder`]: text → vector encoders and cosine similarity
//! * [`hinting`]: error discriminator, hint generation, prompt building
//! * [`efrepo`]: the failure archive and nearest-neighbour retrieval
//! * [`modelclient`]: HTTP and stub generation backends
//! * [`metrics`]: ROUGE, BLEU, METEOR, embedding F1, JSD, Lp, perplexity, Flesch
//! * [`harness`]: the two-pass experiment, persistence and reports

pub mod corpus;
pub mod efrepo;
pub mod encoder;
mod gate;
pub mod harness;
pub mod hinting;
mod http;
pub mod metrics;
pub mod modelclient;
pub mod text;

pub use gate::InFlightGate;
