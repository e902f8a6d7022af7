//! Two-input room-temperature demo: current temperature and target, both on
//! `[0, 40]` °C with evenly spaced terms, mapped through a 5×5 decision
//! table to heat / cool / no-change.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::inference::{FuzzyController, InferenceError, InferenceTrace};
use crate::membership::{Degree, LinguisticVariable, MembershipFunction};
use crate::ruledsl::{RuleBase, RuleMatrix, Vocabulary};

pub const TERMS: [&str; 5] = ["too-cold", "cold", "warm", "hot", "too-hot"];

/// Command names in tie-break priority order.
pub const COMMANDS: [&str; 3] = ["heat", "cool", "no-change"];

/// The three textual sample rules. The third one (warm/warm → heat)
/// disagrees with the matrix, whose diagonal is no-change; the demo
/// controller is built from the matrix.
pub const TABLE_RULES: &str = "\
IF(temperature is cold OR too-cold)AND(target is warm)THEN command is heat
IF(temperature is hot OR too-hot)AND(target is warm)THEN command is cool
IF(temperature is warm)AND(target is warm)THEN command is heat
";

fn room_variable(name: &str) -> LinguisticVariable {
    let shapes = TERMS.iter().enumerate().map(|(i, &t)| {
        let apex = 10.0 * i as f64;
        let mf = MembershipFunction::Triangular {
            a: (apex - 10.0).max(0.0),
            b: apex,
            c: (apex + 10.0).min(40.0),
        };
        (t, mf)
    });
    LinguisticVariable::from_shapes(name, 0.0, 40.0, shapes).expect("room variable is valid")
}

pub fn vocabulary() -> Vocabulary {
    let command = LinguisticVariable::from_shapes(
        "command",
        -1.0,
        1.0,
        [
            (
                "cool",
                MembershipFunction::Triangular {
                    a: -1.0,
                    b: -1.0,
                    c: 0.0,
                },
            ),
            (
                "no-change",
                MembershipFunction::Triangular {
                    a: -1.0,
                    b: 0.0,
                    c: 1.0,
                },
            ),
            (
                "heat",
                MembershipFunction::Triangular {
                    a: 0.0,
                    b: 1.0,
                    c: 1.0,
                },
            ),
        ],
    )
    .expect("command variable is valid");
    Vocabulary::new(
        alloc::vec![room_variable("temperature"), room_variable("target")],
        command,
    )
    .expect("distinct names")
}

/// Rows are the current temperature, columns the target.
pub fn matrix() -> RuleMatrix {
    let cell = |row: usize, col: usize| -> String {
        let s = match row.cmp(&col) {
            core::cmp::Ordering::Less => "heat",
            core::cmp::Ordering::Equal => "no-change",
            core::cmp::Ordering::Greater => "cool",
        };
        s.to_string()
    };
    let names = || TERMS.iter().map(|t| t.to_string()).collect::<Vec<_>>();
    RuleMatrix {
        row_var: "temperature".into(),
        col_var: "target".into(),
        out_var: "command".into(),
        row_terms: names(),
        col_terms: names(),
        cells: (0..5)
            .map(|r| (0..5).map(|c| cell(r, c)).collect())
            .collect(),
    }
}

pub fn rulebase() -> RuleBase {
    matrix().to_rules(&vocabulary()).expect("matrix binds")
}

pub fn controller() -> FuzzyController {
    FuzzyController::new(rulebase())
}

/// Aggregated weight per command plus the winner.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomDecision {
    pub command: String,
    pub degree: Degree,
    /// `(command, max rule weight)` in [`COMMANDS`] order.
    pub strengths: Vec<(String, Degree)>,
    pub trace: Option<InferenceTrace>,
}

/// Evaluates the matrix controller and picks the command with the largest
/// rule weight, ties going to the earlier entry of [`COMMANDS`].
pub fn decide(
    ctl: &FuzzyController,
    temperature: f64,
    target: f64,
) -> Result<RoomDecision, InferenceError> {
    let trace = match ctl.infer(&[("temperature", temperature), ("target", target)]) {
        Ok(t) => t,
        Err(InferenceError::Degenerate(t)) => *t,
        Err(e) => return Err(e),
    };
    let rules = ctl.rulebase().rules();
    let strengths: Vec<(String, Degree)> = COMMANDS
        .iter()
        .map(|&cmd| {
            let w = trace
                .activations
                .iter()
                .zip(rules)
                .filter(|(_, r)| r.consequent.term.eq_ignore_ascii_case(cmd))
                .map(|(a, _)| a.weight)
                .fold(Degree::ZERO, Degree::or);
            (cmd.to_string(), w)
        })
        .collect();
    let (command, degree) = strengths
        .iter()
        .fold(None::<&(String, Degree)>, |best, cur| match best {
            Some(b) if b.1 >= cur.1 => Some(b),
            _ => Some(cur),
        })
        .cloned()
        .expect("three commands");
    Ok(RoomDecision {
        command,
        degree,
        strengths,
        trace: Some(trace),
    })
}
