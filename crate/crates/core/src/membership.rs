//! Membership functions, linguistic variables and fuzzification.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

/// A membership grade, always inside `[0, 1]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, PartialOrd)]
pub struct Degree(f64);

impl Degree {
    pub const ZERO: Degree = Degree(0.0);
    pub const ONE: Degree = Degree(1.0);

    /// Returns `None` unless `value` is a finite number in `[0, 1]`.
    pub fn new(value: f64) -> Option<Self> {
        (0.0..=1.0).contains(&value).then_some(Degree(value))
    }

    /// Clamps into `[0, 1]`; NaN maps to zero.
    pub fn saturating(value: f64) -> Self {
        if value.is_nan() {
            Degree::ZERO
        } else {
            Degree(value.clamp(0.0, 1.0))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Fuzzy AND.
    pub fn and(self, other: Degree) -> Degree {
        Degree(self.0.min(other.0))
    }

    /// Fuzzy OR.
    pub fn or(self, other: Degree) -> Degree {
        Degree(self.0.max(other.0))
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0.0
    }
}

impl From<Degree> for f64 {
    fn from(d: Degree) -> f64 {
        d.0
    }
}

impl fmt::Display for Degree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MembershipError {
    #[error("invalid {shape} breakpoints {points:?}: {reason}")]
    InvalidShape {
        shape: &'static str,
        points: Vec<f64>,
        reason: &'static str,
    },
    #[error("invalid universe [{lo}, {hi}]: lower bound must be finite and below upper bound")]
    InvalidUniverse { lo: f64, hi: f64 },
    #[error("invalid identifier {0:?}")]
    InvalidName(String),
    #[error("variable {variable:?} has no terms")]
    NoTerms { variable: String },
    #[error("variable {variable:?} declares term {term:?} twice")]
    DuplicateTerm { variable: String, term: String },
    #[error("term {term:?} of {variable:?} lies entirely outside the universe")]
    OutsideUniverse { variable: String, term: String },
    #[error("input {value} for {variable:?} is not a finite number")]
    NonFinite { variable: String, value: f64 },
}

/// Piecewise-linear fuzzy set shape.
///
/// Breakpoints are ordered left to right. A triangle is a trapezoid whose
/// plateau has shrunk to the single apex `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MembershipFunction {
    Triangular { a: f64, b: f64, c: f64 },
    Trapezoidal { a: f64, b: f64, c: f64, d: f64 },
}

impl MembershipFunction {
    pub fn triangular(a: f64, b: f64, c: f64) -> Result<Self, MembershipError> {
        let mf = MembershipFunction::Triangular { a, b, c };
        mf.validate()?;
        Ok(mf)
    }

    pub fn trapezoidal(a: f64, b: f64, c: f64, d: f64) -> Result<Self, MembershipError> {
        let mf = MembershipFunction::Trapezoidal { a, b, c, d };
        mf.validate()?;
        Ok(mf)
    }

    /// Builds a shape from a point list: three points give a triangle, four a trapezoid.
    pub fn from_points(points: &[f64]) -> Result<Self, MembershipError> {
        match *points {
            [a, b, c] => Self::triangular(a, b, c),
            [a, b, c, d] => Self::trapezoidal(a, b, c, d),
            _ => Err(MembershipError::InvalidShape {
                shape: "membership",
                points: points.to_vec(),
                reason: "expected 3 (triangular) or 4 (trapezoidal) points",
            }),
        }
    }

    pub fn shape_name(&self) -> &'static str {
        match self {
            MembershipFunction::Triangular { .. } => "triangular",
            MembershipFunction::Trapezoidal { .. } => "trapezoidal",
        }
    }

    pub fn points(&self) -> Vec<f64> {
        match *self {
            MembershipFunction::Triangular { a, b, c } => alloc::vec![a, b, c],
            MembershipFunction::Trapezoidal { a, b, c, d } => alloc::vec![a, b, c, d],
        }
    }

    fn corners(&self) -> (f64, f64, f64, f64) {
        match *self {
            MembershipFunction::Triangular { a, b, c } => (a, b, b, c),
            MembershipFunction::Trapezoidal { a, b, c, d } => (a, b, c, d),
        }
    }

    pub fn validate(&self) -> Result<(), MembershipError> {
        let points = self.points();
        let fail = |reason| MembershipError::InvalidShape {
            shape: self.shape_name(),
            points: points.clone(),
            reason,
        };
        if points.iter().any(|p| !p.is_finite()) {
            return Err(fail("breakpoints must be finite"));
        }
        if points.windows(2).any(|w| w[0] > w[1]) {
            return Err(fail("breakpoints must be nondecreasing"));
        }
        let (a, _, _, d) = self.corners();
        if a >= d {
            return Err(fail("support must have nonzero width"));
        }
        Ok(())
    }

    /// Evaluates the membership grade at `x`.
    ///
    /// Zero outside the support, one on the apex or plateau, linear on the
    /// ramps. A vertical edge (`a == b` or `c == d`) evaluates to one at the
    /// shared point. NaN evaluates to zero.
    pub fn degree(&self, x: f64) -> Degree {
        let (a, b, c, d) = self.corners();
        if x.is_nan() || x < a || x > d {
            Degree::ZERO
        } else if x >= b && x <= c {
            Degree::ONE
        } else if x < b {
            Degree::saturating((x - a) / (b - a))
        } else {
            Degree::saturating((d - x) / (d - c))
        }
    }

    /// The extremum used as the crisp representative of the set: the apex of
    /// a triangle, the plateau midpoint of a trapezoid.
    pub fn peak(&self) -> f64 {
        let (_, b, c, _) = self.corners();
        (b + c) / 2.0
    }

    /// Closed interval where the grade can be nonzero.
    pub fn support(&self) -> (f64, f64) {
        let (a, _, _, d) = self.corners();
        (a, d)
    }

    /// Steepest ramp slope, infinite when an edge is vertical.
    pub fn max_slope(&self) -> f64 {
        let (a, b, c, d) = self.corners();
        let rise = if b > a { 1.0 / (b - a) } else { f64::INFINITY };
        let fall = if d > c { 1.0 / (d - c) } else { f64::INFINITY };
        rise.max(fall)
    }

    /// Mirror image about `pivot`.
    pub fn reflect(&self, pivot: f64) -> Self {
        let m = |x: f64| 2.0 * pivot - x;
        match *self {
            MembershipFunction::Triangular { a, b, c } => MembershipFunction::Triangular {
                a: m(c),
                b: m(b),
                c: m(a),
            },
            MembershipFunction::Trapezoidal { a, b, c, d } => MembershipFunction::Trapezoidal {
                a: m(d),
                b: m(c),
                c: m(b),
                d: m(a),
            },
        }
    }
}

/// Words reserved by the rule language.
pub const KEYWORDS: [&str; 5] = ["if", "then", "is", "and", "or"];

/// Identifier rule shared by variable names, term names and the rule language:
/// a letter or `_`, then letters, digits, `_` or `-`. Keywords are excluded.
pub fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    let Some(first) = chars.next() else {
        return false;
    };
    (first.is_ascii_alphabetic() || first == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        && !KEYWORDS.iter().any(|k| k.eq_ignore_ascii_case(name))
}

fn check_identifier(name: &str) -> Result<(), MembershipError> {
    if is_identifier(name) {
        Ok(())
    } else {
        Err(MembershipError::InvalidName(name.to_string()))
    }
}

/// Closed real interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Universe {
    lo: f64,
    hi: f64,
}

impl Universe {
    pub fn new(lo: f64, hi: f64) -> Result<Self, MembershipError> {
        if lo.is_finite() && hi.is_finite() && lo < hi {
            Ok(Universe { lo, hi })
        } else {
            Err(MembershipError::InvalidUniverse { lo, hi })
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.lo..=self.hi).contains(&x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinguisticTerm {
    name: String,
    mf: MembershipFunction,
}

impl LinguisticTerm {
    pub fn new(name: impl Into<String>, mf: MembershipFunction) -> Result<Self, MembershipError> {
        let name = name.into();
        check_identifier(&name)?;
        mf.validate()?;
        Ok(LinguisticTerm { name, mf })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn mf(&self) -> &MembershipFunction {
        &self.mf
    }

    pub fn matches(&self, name: &str) -> bool {
        self.name.eq_ignore_ascii_case(name)
    }
}

/// A named quantity over a universe, described by an ordered list of terms.
///
/// Term lookup is case-insensitive; the declaration casing is preserved for
/// display and serialization.
#[derive(Debug, Clone, PartialEq)]
pub struct LinguisticVariable {
    name: String,
    universe: Universe,
    terms: Vec<LinguisticTerm>,
}

impl LinguisticVariable {
    pub fn new(
        name: impl Into<String>,
        universe: Universe,
        terms: Vec<LinguisticTerm>,
    ) -> Result<Self, MembershipError> {
        let name = name.into();
        check_identifier(&name)?;
        if terms.is_empty() {
            return Err(MembershipError::NoTerms { variable: name });
        }
        for (i, term) in terms.iter().enumerate() {
            if terms[..i].iter().any(|t| t.matches(&term.name)) {
                return Err(MembershipError::DuplicateTerm {
                    variable: name,
                    term: term.name.clone(),
                });
            }
            let (lo, hi) = term.mf.support();
            if hi < universe.lo || lo > universe.hi {
                return Err(MembershipError::OutsideUniverse {
                    variable: name,
                    term: term.name.clone(),
                });
            }
        }
        Ok(LinguisticVariable {
            name,
            universe,
            terms,
        })
    }

    /// Convenience constructor from `(term name, shape)` pairs.
    pub fn from_shapes<'a>(
        name: &str,
        lo: f64,
        hi: f64,
        shapes: impl IntoIterator<Item = (&'a str, MembershipFunction)>,
    ) -> Result<Self, MembershipError> {
        let terms = shapes
            .into_iter()
            .map(|(n, mf)| LinguisticTerm::new(n, mf))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(name, Universe::new(lo, hi)?, terms)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn universe(&self) -> Universe {
        self.universe
    }

    pub fn terms(&self) -> &[LinguisticTerm] {
        &self.terms
    }

    pub fn term(&self, name: &str) -> Option<&LinguisticTerm> {
        self.terms.iter().find(|t| t.matches(name))
    }

    pub fn matches(&self, name: &str) -> bool {
        self.name.eq_ignore_ascii_case(name)
    }

    /// Maps a crisp value to one degree per term, in declaration order.
    ///
    /// Values outside the universe are clamped to its nearest edge first.
    pub fn fuzzify(&self, x: f64) -> Result<TermDegrees, MembershipError> {
        if !x.is_finite() {
            return Err(MembershipError::NonFinite {
                variable: self.name.clone(),
                value: x,
            });
        }
        let x = self.universe.clamp(x);
        Ok(TermDegrees {
            entries: self
                .terms
                .iter()
                .map(|t| (t.name.clone(), t.mf.degree(x)))
                .collect(),
        })
    }

    /// Diagnostic: sample points (out of `samples + 1` evenly spaced across the
    /// universe) where every term's degree is zero.
    pub fn coverage_gaps(&self, samples: usize) -> Vec<f64> {
        let n = samples.max(1);
        let width = self.universe.hi - self.universe.lo;
        (0..=n)
            .map(|i| self.universe.lo + width * i as f64 / n as f64)
            .filter(|&x| self.terms.iter().all(|t| t.mf.degree(x).is_zero()))
            .collect()
    }
}

impl fmt::Display for LinguisticVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.terms.iter().map(|t| t.name.as_str()).collect();
        write!(
            f,
            "{} on [{}, {}] = {{{}}}",
            self.name,
            self.universe.lo,
            self.universe.hi,
            names.join(", ")
        )
    }
}

/// Fuzzified value of one variable: a degree per term, in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct TermDegrees {
    entries: Vec<(String, Degree)>,
}

impl TermDegrees {
    pub fn new(entries: Vec<(String, Degree)>) -> Self {
        TermDegrees { entries }
    }

    pub fn get(&self, term: &str) -> Option<Degree> {
        self.entries
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(term))
            .map(|(_, d)| *d)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Degree)> {
        self.entries.iter().map(|(n, d)| (n.as_str(), *d))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Largest degree, zero when empty.
    pub fn max(&self) -> Degree {
        self.entries
            .iter()
            .map(|(_, d)| *d)
            .fold(Degree::ZERO, Degree::or)
    }
}

impl fmt::Display for TermDegrees {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<_> = self
            .entries
            .iter()
            .map(|(n, d)| format!("{n}: {d}"))
            .collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}
