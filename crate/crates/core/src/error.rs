use num_rational::BigRational;
use thiserror::Error;

use crate::Kind;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("universe must contain at least one world")]
    EmptyUniverse,
    #[error("duplicate world label `{0}`")]
    DuplicateWorld(String),
    #[error("unknown world label `{0}`")]
    UnknownWorld(String),
    #[error("events belong to different universes")]
    UniverseMismatch,
    #[error("world index {index} out of range for a universe of {size} worlds")]
    WorldOutOfRange { index: usize, size: usize },
    #[error("observed event must be non-empty")]
    EmptyObservedEvent,
    #[error("event must be non-empty")]
    EmptyEvent,
    #[error("event {0} is not a union of atoms")]
    NotAtomUnion(String),
    #[error("{atoms} atoms exceed the limit of {limit} (the algebra would have 2^{atoms} = {events} events)")]
    AtomLimit { atoms: usize, limit: usize, events: u128 },
    #[error("{atoms} atoms exceed the chain limit of {limit} ({atoms}! chains)")]
    ChainLimit { atoms: usize, limit: usize },
    #[error("the generated algebra has {0} atoms, more than the supported 64")]
    TooManyAtoms(usize),
    #[error("set function is not completely monotone: Möbius weight {weight} on {event}")]
    NotCompletelyMonotone { event: String, weight: BigRational },
    #[error("set function is not normalized: {0}")]
    NotNormalized(String),
    #[error("invalid mass function: {0}")]
    InvalidMass(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("assessed value {value} at row {index} is outside [0, 1]")]
    ValueOutOfRange { index: usize, value: BigRational },
    #[error("expected a {expected} assessment, got {found}")]
    WrongKind { expected: Kind, found: Kind },
    #[error("assessment is not coherent as a {0} assessment")]
    Incoherent(Kind),
    #[error("scoring rule `{0}` is unbounded and cannot define a divergence")]
    UnboundedRule(String),
    #[error("scoring rule `{name}` is not strictly proper: {detail}")]
    ImproperRule { name: String, detail: String },
    #[error("unknown scoring rule `{0}`")]
    UnknownRule(String),
    #[error("grid of {points} points exceeds the cap of {cap}")]
    GridTooLarge { points: u128, cap: u128 },
    #[error("grid step {0} must be 1/q for a positive integer q")]
    InvalidStep(BigRational),
    #[error("expected {expected} stakes, got {found}")]
    StakesLength { expected: usize, found: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
