//! File formats, output writers, parallel sampling and the `rxnet` command line,
//! built on [`rxnet_core`].

pub mod cli;
pub mod dsl;
pub mod output;
pub mod parallel;

pub use dsl::{format_network, parse_network, ParseError, ParseErrorKind};
