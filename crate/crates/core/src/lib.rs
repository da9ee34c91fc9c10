//! Coherence checking, Dutch books and score-based correction for belief,
//! probability and necessity assessments on finite universes.
//!
//! All verdicts, certificates and Brier-mode corrections are exact rational
//! computations. Irrational scores (logarithmic, spherical) go through the
//! 128-bit fixed-point type in [`precision`].

pub mod coherence;
pub mod correction;
pub mod error;
pub mod event_algebra;
pub mod exact_lp;
pub mod mobius;
pub mod precision;
pub mod rational;
pub mod scoring;

pub use coherence::{
    check, check_belief, check_necessity, check_probability, evaluate_gain, extension_interval, gain_sweep, Assessment,
    Certificate, DutchBook, ExtensionInterval, Kind, Refutation, Verdict,
};
pub use correction::{correct, CorrectedValues, CorrectionOptions, CorrectionResult};
pub use error::{Error, Result};
pub use event_algebra::{AtomMask, AtomSet, Chain, Event, EventFamily, Limits, Universe};
pub use mobius::MassFunction;
pub use precision::HighPrecision;
pub use rational::{parse_rational, ParseRationalError};
pub use scoring::{Brier, Logarithmic, RuleRegistry, Score, ScoringRule, Spherical};
