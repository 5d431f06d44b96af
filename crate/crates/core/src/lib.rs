//! Bidirectional dynamic representations of short-term motion, inferred from
//! single still frames.

pub(crate) mod binio;
pub mod cli;
pub mod drnet;
pub mod error;
pub mod mdr;
pub mod numerics;
pub mod oracle;
pub mod rankcore;
pub mod seqgen;

pub use error::{Error, Result};
