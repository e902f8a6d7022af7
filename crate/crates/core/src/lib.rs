//! Fuzzy temperature control without the standard library.
//!
//! The crate is organised the way a fuzzy controller is wired:
//!
//! - [`membership`]: triangular/trapezoidal sets, linguistic variables and fuzzification
//! - [`ruledsl`]: the `IF ... THEN ...` rule language and rule-matrix expansion
//! - [`inference`]: min/max rule evaluation and weighted-average defuzzification
//! - [`pwm`]: duty-cycle arithmetic and square-wave synthesis
//! - [`plant`]: a lumped heater/plate/fan thermal model with a quantizing sensor
//! - [`control`]: the sampled closed loop tying everything together
//!
//! [`fltc`] and [`room`] hold the canonical error→PWM controller and the
//! room-temperature rule matrix.
//!
//! Everything here is pure and allocation-only; file formats, the CLI and the
//! network service live in the `fuzzytherm` crate.

#![no_std]

extern crate alloc;

pub mod control;
pub mod fltc;
pub mod inference;
pub mod membership;
pub mod plant;
pub mod pwm;
pub mod room;
pub mod ruledsl;

pub use control::{ClosedLoop, ControlError, LoopConfig, RunRecord, RunSummary, TelemetryFrame};
pub use inference::{FuzzyController, InferenceError, InferenceTrace, RuleActivation};
pub use membership::{
    Degree, LinguisticTerm, LinguisticVariable, MembershipError, MembershipFunction, Universe,
};
pub use plant::{Plant, PlantError, PlantParams, PlantState};
pub use pwm::{PwmCommand, PwmError};
pub use ruledsl::{Antecedent, ParseError, Rule, RuleBase, RuleMatrix, Vocabulary};
