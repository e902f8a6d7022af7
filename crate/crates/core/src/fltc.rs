//! The canonical single-input temperature controller: error → PWM level.
//!
//! Input `error = setpoint − sensed` on `[-50, 50]` °C with five terms
//! NEG, SNEG, ZERO, SPOZ, POZ. Output `pwm` on `[0, 255]` with five
//! triangular terms Z, L, M, H, VH whose apexes sit at the midpoints of
//! their level ranges. The defuzzified level drives the fan; the heater
//! takes the complement.

use crate::inference::FuzzyController;
use crate::membership::{LinguisticVariable, MembershipFunction};
use crate::ruledsl::{parse_rules, Vocabulary};

fn tri(a: f64, b: f64, c: f64) -> MembershipFunction {
    MembershipFunction::Triangular { a, b, c }
}

fn trap(a: f64, b: f64, c: f64, d: f64) -> MembershipFunction {
    MembershipFunction::Trapezoidal { a, b, c, d }
}

/// `error` on `[-50, 50]`.
///
/// SNEG is `(-50, -25, 0)` so that an error of −1 grades 1/25 = 0.04 in it;
/// SPOZ mirrors it.
pub fn input_variable() -> LinguisticVariable {
    LinguisticVariable::from_shapes(
        "error",
        -50.0,
        50.0,
        [
            ("NEG", trap(-50.0, -50.0, -25.0, -15.0)),
            ("SNEG", tri(-50.0, -25.0, 0.0)),
            ("ZERO", tri(-15.0, 0.0, 15.0)),
            ("SPOZ", tri(0.0, 25.0, 50.0)),
            ("POZ", trap(15.0, 25.0, 50.0, 50.0)),
        ],
    )
    .expect("canonical input variable is valid")
}

/// `pwm` on `[0, 255]`.
pub fn output_variable() -> LinguisticVariable {
    LinguisticVariable::from_shapes(
        "pwm",
        0.0,
        255.0,
        [
            ("Z", tri(0.0, 44.625, 89.25)),
            ("L", tri(51.0, 89.0, 127.0)),
            ("M", tri(89.25, 127.5, 165.75)),
            ("H", tri(127.0, 165.5, 204.0)),
            ("VH", tri(165.75, 210.375, 255.0)),
        ],
    )
    .expect("canonical output variable is valid")
}

/// Rule text for the fan channel, one rule per input term.
pub const RULES: &str = "\
IF error is NEG THEN pwm is VH
IF error is SNEG THEN pwm is VH
IF error is ZERO THEN pwm is M
IF error is SPOZ THEN pwm is L
IF error is POZ THEN pwm is Z
";

pub fn vocabulary() -> Vocabulary {
    Vocabulary::new(alloc::vec![input_variable()], output_variable())
        .expect("distinct variable names")
}

pub fn controller() -> FuzzyController {
    let rulebase = parse_rules(RULES, &vocabulary()).expect("canonical rules parse");
    FuzzyController::new(rulebase)
}
