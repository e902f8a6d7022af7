//! Fuzzifier, rule evaluation and weighted-average defuzzifier.
//!
//! Rule strength `W(i)` is the antecedent evaluated with AND = min and
//! OR = max. Each rule contributes the peak `P(i)` of its consequent term and
//! the crisp output is `D = Σ P(i)·W(i) / Σ W(i)`.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::membership::{Degree, MembershipError, TermDegrees};
use crate::ruledsl::{Antecedent, RuleBase};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InferenceError {
    #[error("no value supplied for input variable `{0}`")]
    MissingInput(String),
    #[error("`{0}` is not an input variable of this controller")]
    UnknownInput(String),
    #[error(transparent)]
    InvalidInput(#[from] MembershipError),
    #[error("fuzzified inputs have no degree for `{variable} is {term}`")]
    MissingDegree { variable: String, term: String },
    #[error("no rule activations to defuzzify")]
    NoActivations,
    #[error("every rule weight is zero; the output is undefined")]
    Degenerate(Box<InferenceTrace>),
    #[error("peak {value} for output term `{term}` is unknown or outside the output universe")]
    InvalidPeak { term: String, value: f64 },
}

/// One rule's contribution: weight `W(i)` and consequent peak `P(i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleActivation {
    pub rule_id: usize,
    pub weight: Degree,
    pub peak: f64,
}

/// A crisp input after clamping and fuzzification.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzifiedInput {
    pub variable: String,
    /// Value as supplied.
    pub raw: f64,
    /// Value actually fuzzified (clamped to the universe).
    pub value: f64,
    pub degrees: TermDegrees,
}

impl FuzzifiedInput {
    pub fn clamped(&self) -> bool {
        self.raw != self.value
    }
}

/// Every intermediate of one inference.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceTrace {
    pub fuzzified: Vec<FuzzifiedInput>,
    pub activations: Vec<RuleActivation>,
    /// `None` only when every weight is zero.
    pub output: Option<f64>,
}

impl InferenceTrace {
    pub fn input(&self, variable: &str) -> Option<&FuzzifiedInput> {
        self.fuzzified
            .iter()
            .find(|f| f.variable.eq_ignore_ascii_case(variable))
    }

    pub fn degree(&self, variable: &str, term: &str) -> Option<Degree> {
        self.input(variable)?.degrees.get(term)
    }
}

/// Min/max evaluation of an antecedent against fuzzified inputs.
pub fn evaluate_antecedent(
    expr: &Antecedent,
    fuzzified: &[FuzzifiedInput],
) -> Result<Degree, InferenceError> {
    match expr {
        Antecedent::Atom(p) => fuzzified
            .iter()
            .find(|f| f.variable.eq_ignore_ascii_case(&p.variable))
            .and_then(|f| f.degrees.get(&p.term))
            .ok_or_else(|| InferenceError::MissingDegree {
                variable: p.variable.clone(),
                term: p.term.clone(),
            }),
        Antecedent::And(l, r) => {
            Ok(evaluate_antecedent(l, fuzzified)?.and(evaluate_antecedent(r, fuzzified)?))
        }
        Antecedent::Or(l, r) => {
            Ok(evaluate_antecedent(l, fuzzified)?.or(evaluate_antecedent(r, fuzzified)?))
        }
    }
}

/// `Σ P·W / Σ W` over all activations.
pub fn defuzzify_weighted_average(activations: &[RuleActivation]) -> Result<f64, InferenceError> {
    if activations.is_empty() {
        return Err(InferenceError::NoActivations);
    }
    let (num, den) = activations.iter().fold((0.0, 0.0), |(n, d), a| {
        let w = a.weight.value();
        (n + a.peak * w, d + w)
    });
    if den > 0.0 {
        Ok(num / den)
    } else {
        Err(InferenceError::Degenerate(Box::new(InferenceTrace {
            fuzzified: Vec::new(),
            activations: activations.to_vec(),
            output: None,
        })))
    }
}

/// A rule base plus the peak value of every output term.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyController {
    rulebase: RuleBase,
    peaks: Vec<(String, f64)>,
}

impl FuzzyController {
    /// Peaks default to each output term's apex (plateau midpoint for trapezoids).
    pub fn new(rulebase: RuleBase) -> Self {
        let peaks = rulebase
            .output()
            .terms()
            .iter()
            .map(|t| (t.name().to_string(), t.mf().peak()))
            .collect();
        FuzzyController { rulebase, peaks }
    }

    /// Replaces the peak of named output terms.
    pub fn with_peaks<'a>(
        mut self,
        overrides: impl IntoIterator<Item = (&'a str, f64)>,
    ) -> Result<Self, InferenceError> {
        let universe = self.rulebase.output().universe();
        for (term, value) in overrides {
            let slot = self
                .peaks
                .iter_mut()
                .find(|(n, _)| n.eq_ignore_ascii_case(term))
                .filter(|_| value.is_finite() && universe.contains(value))
                .ok_or_else(|| InferenceError::InvalidPeak {
                    term: term.to_string(),
                    value,
                })?;
            slot.1 = value;
        }
        Ok(self)
    }

    pub fn rulebase(&self) -> &RuleBase {
        &self.rulebase
    }

    pub fn peaks(&self) -> &[(String, f64)] {
        &self.peaks
    }

    pub fn peak(&self, term: &str) -> Option<f64> {
        self.peaks
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(term))
            .map(|(_, p)| *p)
    }

    /// Fuzzifies, evaluates every rule and defuzzifies.
    ///
    /// When all weights are zero the full trace is returned inside
    /// [`InferenceError::Degenerate`] so callers can still log it.
    pub fn infer(&self, inputs: &[(&str, f64)]) -> Result<InferenceTrace, InferenceError> {
        if let Some((name, _)) = inputs
            .iter()
            .find(|(name, _)| !self.rulebase.inputs().iter().any(|v| v.matches(name)))
        {
            return Err(InferenceError::UnknownInput(name.to_string()));
        }
        let mut fuzzified = Vec::with_capacity(self.rulebase.inputs().len());
        for var in self.rulebase.inputs() {
            let raw = inputs
                .iter()
                .find(|(name, _)| var.matches(name))
                .map(|(_, x)| *x)
                .ok_or_else(|| InferenceError::MissingInput(var.name().to_string()))?;
            let degrees = var.fuzzify(raw)?;
            fuzzified.push(FuzzifiedInput {
                variable: var.name().to_string(),
                raw,
                value: var.universe().clamp(raw),
                degrees,
            });
        }
        let mut activations = Vec::with_capacity(self.rulebase.rules().len());
        for rule in self.rulebase.rules() {
            let weight = evaluate_antecedent(&rule.antecedent, &fuzzified)?;
            let peak =
                self.peak(&rule.consequent.term)
                    .ok_or_else(|| InferenceError::InvalidPeak {
                        term: rule.consequent.term.clone(),
                        value: f64::NAN,
                    })?;
            activations.push(RuleActivation {
                rule_id: rule.id,
                weight,
                peak,
            });
        }
        let mut trace = InferenceTrace {
            fuzzified,
            activations,
            output: None,
        };
        match defuzzify_weighted_average(&trace.activations) {
            Ok(d) => {
                trace.output = Some(d);
                Ok(trace)
            }
            Err(InferenceError::Degenerate(_)) => Err(InferenceError::Degenerate(Box::new(trace))),
            Err(e) => Err(e),
        }
    }

    /// Convenience for single-input controllers: the crisp output only.
    pub fn evaluate(&self, variable: &str, x: f64) -> Result<f64, InferenceError> {
        self.infer(&[(variable, x)])
            .map(|t| t.output.expect("set on success"))
    }
}
