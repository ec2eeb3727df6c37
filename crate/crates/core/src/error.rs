use alloc::string::String;
use alloc::vec::Vec;

use crate::model::MultiIndex;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("integer overflow in {0}")]
    Overflow(&'static str),

    #[error("species table is empty")]
    NoSpecies,

    #[error("invalid name {0:?}")]
    InvalidName(String),

    #[error("duplicate species {0:?}")]
    DuplicateSpecies(String),

    #[error("duplicate reaction {0:?}")]
    DuplicateReaction(String),

    #[error("reaction {name:?} has non-positive or non-finite rate {rate}")]
    NonPositiveRate { name: String, rate: f64 },

    #[error("classical state entry {index} is negative or not finite: {value}")]
    InvalidClassicalState { index: usize, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),

    #[error("non-finite state encountered at t = {time}")]
    NonFinite { time: f64 },

    #[error("state space has more than {limit} states")]
    StateSpaceTooLarge { limit: usize },

    #[error("series has support outside the state space: {0:?}")]
    OutsideSpace(Vec<MultiIndex>),

    #[error("not a mixed state: {0}")]
    NotMixed(String),

    #[error("coefficient {value} at {index:?} is below the negativity floor")]
    NegativeCoefficient { index: MultiIndex, value: f64 },

    #[error("reaction {0:?} has a complex with more than one particle")]
    ComplexTooLarge(String),
}
