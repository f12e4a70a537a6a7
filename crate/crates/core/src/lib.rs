//! Sketch-driven differential and metamorphic testing of JavaScript obfuscators.

pub mod campaign;
pub mod enhancer;
pub mod extractor;
pub mod exec;
pub mod filler;
pub mod js;
pub mod llm;
pub mod mr;
pub mod obfuscate;
pub mod oracle;
pub mod rng;
pub mod scope;
pub mod sketch;
pub mod store;
