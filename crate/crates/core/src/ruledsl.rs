//! The `IF ... THEN ...` rule language and rule-matrix expansion.
//!
//! ```text
//! rule := "IF" expr "THEN" ident "is" ident
//! expr := conj { "OR" conj }
//! conj := atom { "AND" atom }
//! atom := "(" expr ")" | ident "is" ident { "OR" ident }
//! ```
//!
//! Keywords are case-insensitive. Rules are separated by newlines or `;`,
//! `#` starts a comment. `temperature is cold OR too-cold` is shorthand for
//! `(temperature is cold) OR (temperature is too-cold)`; the shorthand is
//! part of the atom and so binds tighter than `AND`.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::membership::{is_identifier, LinguisticVariable};

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

struct At(Option<Pos>);

impl fmt::Display for At {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(p) => write!(f, "{p}: "),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("{pos}: syntax error: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("{}unknown variable `{name}`", At(*.pos))]
    UnknownVariable { pos: Option<Pos>, name: String },
    #[error("{}variable `{variable}` has no term `{term}`", At(*.pos))]
    UnknownTerm {
        pos: Option<Pos>,
        variable: String,
        term: String,
    },
    #[error("{}consequent names input variable `{name}`; only the output variable may appear after THEN", At(*.pos))]
    ConsequentIsInput { pos: Option<Pos>, name: String },
    #[error("rule base has no rules")]
    Empty,
    #[error("vocabulary declares variable `{0}` more than once")]
    DuplicateVariable(String),
    #[error("rule matrix is {found} but its term lists require {expected}")]
    MatrixDimension { expected: String, found: String },
    #[error("rule ids must run 1..=n in order; rule #{index} has id {id}")]
    RuleIds { index: usize, id: usize },
}

impl ParseError {
    pub fn pos(&self) -> Option<Pos> {
        match self {
            ParseError::Syntax { pos, .. } => Some(*pos),
            ParseError::UnknownVariable { pos, .. }
            | ParseError::UnknownTerm { pos, .. }
            | ParseError::ConsequentIsInput { pos, .. } => *pos,
            _ => None,
        }
    }
}

/// `variable is term`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proposition {
    pub variable: String,
    pub term: String,
}

impl Proposition {
    pub fn new(variable: impl Into<String>, term: impl Into<String>) -> Self {
        Proposition {
            variable: variable.into(),
            term: term.into(),
        }
    }
}

/// AND/OR tree over propositions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Antecedent {
    Atom(Proposition),
    And(Box<Antecedent>, Box<Antecedent>),
    Or(Box<Antecedent>, Box<Antecedent>),
}

impl Antecedent {
    pub fn atom(variable: impl Into<String>, term: impl Into<String>) -> Self {
        Antecedent::Atom(Proposition::new(variable, term))
    }

    pub fn and(left: Antecedent, right: Antecedent) -> Self {
        Antecedent::And(Box::new(left), Box::new(right))
    }

    pub fn or(left: Antecedent, right: Antecedent) -> Self {
        Antecedent::Or(Box::new(left), Box::new(right))
    }

    /// Every proposition in left-to-right order.
    pub fn atoms(&self) -> Vec<&Proposition> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Proposition>) {
        match self {
            Antecedent::Atom(p) => out.push(p),
            Antecedent::And(l, r) | Antecedent::Or(l, r) => {
                l.collect_atoms(out);
                r.collect_atoms(out);
            }
        }
    }
}

impl fmt::Display for Antecedent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Antecedent::Atom(p) => write!(f, "{} IS {}", p.variable, p.term),
            Antecedent::And(l, r) => write!(f, "({l} AND {r})"),
            Antecedent::Or(l, r) => write!(f, "({l} OR {r})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub id: usize,
    pub antecedent: Antecedent,
    pub consequent: Proposition,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "IF {} THEN {} IS {}",
            self.antecedent, self.consequent.variable, self.consequent.term
        )
    }
}

/// Input variables plus the single output variable rules may conclude on.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    inputs: Vec<LinguisticVariable>,
    output: LinguisticVariable,
}

impl Vocabulary {
    pub fn new(
        inputs: Vec<LinguisticVariable>,
        output: LinguisticVariable,
    ) -> Result<Self, ParseError> {
        let all: Vec<&LinguisticVariable> =
            inputs.iter().chain(core::iter::once(&output)).collect();
        for (i, v) in all.iter().enumerate() {
            if all[..i].iter().any(|w| w.matches(v.name())) {
                return Err(ParseError::DuplicateVariable(v.name().to_string()));
            }
        }
        Ok(Vocabulary { inputs, output })
    }

    pub fn inputs(&self) -> &[LinguisticVariable] {
        &self.inputs
    }

    pub fn output(&self) -> &LinguisticVariable {
        &self.output
    }

    pub fn input(&self, name: &str) -> Option<&LinguisticVariable> {
        self.inputs.iter().find(|v| v.matches(name))
    }

    /// Resolves an antecedent proposition to declaration casing.
    fn bind_input(
        &self,
        variable: &str,
        term: &str,
        pos: Option<Pos>,
    ) -> Result<Proposition, ParseError> {
        let var = self
            .input(variable)
            .ok_or_else(|| ParseError::UnknownVariable {
                pos,
                name: variable.to_string(),
            })?;
        let t = var.term(term).ok_or_else(|| ParseError::UnknownTerm {
            pos,
            variable: var.name().to_string(),
            term: term.to_string(),
        })?;
        Ok(Proposition::new(var.name(), t.name()))
    }

    fn bind_output(
        &self,
        variable: &str,
        term: &str,
        pos: Option<Pos>,
    ) -> Result<Proposition, ParseError> {
        if self.input(variable).is_some() {
            return Err(ParseError::ConsequentIsInput {
                pos,
                name: variable.to_string(),
            });
        }
        if !self.output.matches(variable) {
            return Err(ParseError::UnknownVariable {
                pos,
                name: variable.to_string(),
            });
        }
        let t = self
            .output
            .term(term)
            .ok_or_else(|| ParseError::UnknownTerm {
                pos,
                variable: self.output.name().to_string(),
                term: term.to_string(),
            })?;
        Ok(Proposition::new(self.output.name(), t.name()))
    }

    fn bind_antecedent(&self, expr: &Antecedent) -> Result<Antecedent, ParseError> {
        Ok(match expr {
            Antecedent::Atom(p) => Antecedent::Atom(self.bind_input(&p.variable, &p.term, None)?),
            Antecedent::And(l, r) => {
                Antecedent::and(self.bind_antecedent(l)?, self.bind_antecedent(r)?)
            }
            Antecedent::Or(l, r) => {
                Antecedent::or(self.bind_antecedent(l)?, self.bind_antecedent(r)?)
            }
        })
    }
}

/// Ordered, fully bound rules over a vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleBase {
    vocabulary: Vocabulary,
    rules: Vec<Rule>,
}

impl RuleBase {
    /// Validates ids and rebinds every name against `vocabulary`.
    pub fn new(vocabulary: Vocabulary, rules: Vec<Rule>) -> Result<Self, ParseError> {
        if rules.is_empty() {
            return Err(ParseError::Empty);
        }
        let mut bound = Vec::with_capacity(rules.len());
        for (index, rule) in rules.into_iter().enumerate() {
            if rule.id != index + 1 {
                return Err(ParseError::RuleIds { index, id: rule.id });
            }
            bound.push(Rule {
                id: rule.id,
                antecedent: vocabulary.bind_antecedent(&rule.antecedent)?,
                consequent: vocabulary.bind_output(
                    &rule.consequent.variable,
                    &rule.consequent.term,
                    None,
                )?,
            });
        }
        Ok(RuleBase {
            vocabulary,
            rules: bound,
        })
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn inputs(&self) -> &[LinguisticVariable] {
        self.vocabulary.inputs()
    }

    pub fn output(&self) -> &LinguisticVariable {
        self.vocabulary.output()
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }
}

/// Canonical text: one fully parenthesized rule per line, uppercase keywords,
/// names in declaration casing. [`parse_rules`] reads it back unchanged.
pub fn serialize_rulebase(rb: &RuleBase) -> String {
    let mut out = String::new();
    for rule in &rb.rules {
        out.push_str(&rule.to_string());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    If,
    Then,
    Is,
    And,
    Or,
    LParen,
    RParen,
    Ident(String),
    Sep,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::If => "`IF`".into(),
            Tok::Then => "`THEN`".into(),
            Tok::Is => "`is`".into(),
            Tok::And => "`AND`".into(),
            Tok::Or => "`OR`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Sep => "end of rule".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn lex(source: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let mut toks = Vec::new();
    for (ln, line) in source.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let pos = Pos {
                line: ln + 1,
                column: i + 1,
            };
            match c {
                '#' => break,
                c if c.is_whitespace() => i += 1,
                '(' => {
                    toks.push((Tok::LParen, pos));
                    i += 1;
                }
                ')' => {
                    toks.push((Tok::RParen, pos));
                    i += 1;
                }
                ';' => {
                    toks.push((Tok::Sep, pos));
                    i += 1;
                }
                c if c.is_ascii_alphabetic() || c == '_' => {
                    let start = i;
                    while i < chars.len()
                        && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '-')
                    {
                        i += 1;
                    }
                    let word: String = chars[start..i].iter().collect();
                    let tok = match word.to_ascii_lowercase().as_str() {
                        "if" => Tok::If,
                        "then" => Tok::Then,
                        "is" => Tok::Is,
                        "and" => Tok::And,
                        "or" => Tok::Or,
                        _ => Tok::Ident(word),
                    };
                    toks.push((tok, pos));
                }
                other => {
                    return Err(ParseError::Syntax {
                        pos,
                        message: format!("unexpected character {other:?}"),
                    })
                }
            }
        }
        toks.push((
            Tok::Sep,
            Pos {
                line: ln + 1,
                column: chars.len() + 1,
            },
        ));
    }
    let end = toks
        .last()
        .map(|(_, p)| *p)
        .unwrap_or(Pos { line: 1, column: 1 });
    toks.push((Tok::Eof, end));
    Ok(toks)
}

/// Unbound antecedent with source positions for error reporting.
enum Expr {
    Atom {
        variable: String,
        term: String,
        pos: Pos,
    },
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
}

struct Parser<'v> {
    toks: Vec<(Tok, Pos)>,
    cursor: usize,
    vocabulary: &'v Vocabulary,
}

impl Parser<'_> {
    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.cursor + offset).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn peek(&self) -> &Tok {
        self.peek_at(0)
    }

    fn pos(&self) -> Pos {
        self.toks[self.cursor.min(self.toks.len() - 1)].1
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.cursor.min(self.toks.len() - 1)].clone();
        if self.cursor < self.toks.len() - 1 {
            self.cursor += 1;
        }
        t
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        ParseError::Syntax {
            pos: self.pos(),
            message: format!("expected {wanted}, found {}", self.peek().describe()),
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<Pos, ParseError> {
        if *self.peek() == tok {
            Ok(self.bump().1)
        } else {
            Err(self.unexpected(&tok.describe()))
        }
    }

    fn ident(&mut self) -> Result<(String, Pos), ParseError> {
        match self.peek() {
            Tok::Ident(_) => match self.bump() {
                (Tok::Ident(s), p) => Ok((s, p)),
                _ => unreachable!(),
            },
            _ => Err(self.unexpected("an identifier")),
        }
    }

    fn rules(&mut self) -> Result<Vec<Rule>, ParseError> {
        let mut rules = Vec::new();
        loop {
            match self.peek() {
                Tok::Eof => break,
                Tok::Sep => {
                    self.bump();
                }
                _ => {
                    let rule = self.rule(rules.len() + 1)?;
                    rules.push(rule);
                    if !matches!(self.peek(), Tok::Sep | Tok::Eof) {
                        return Err(self.unexpected("end of rule"));
                    }
                }
            }
        }
        if rules.is_empty() {
            return Err(ParseError::Empty);
        }
        Ok(rules)
    }

    fn rule(&mut self, id: usize) -> Result<Rule, ParseError> {
        self.expect(Tok::If)?;
        let expr = self.disjunction()?;
        self.expect(Tok::Then)?;
        let (variable, pos) = self.ident()?;
        self.expect(Tok::Is)?;
        let (term, _) = self.ident()?;
        let antecedent = self.bind(&expr)?;
        let consequent = self.vocabulary.bind_output(&variable, &term, Some(pos))?;
        Ok(Rule {
            id,
            antecedent,
            consequent,
        })
    }

    fn bind(&self, expr: &Expr) -> Result<Antecedent, ParseError> {
        Ok(match expr {
            Expr::Atom {
                variable,
                term,
                pos,
            } => Antecedent::Atom(self.vocabulary.bind_input(variable, term, Some(*pos))?),
            Expr::And(l, r) => Antecedent::and(self.bind(l)?, self.bind(r)?),
            Expr::Or(l, r) => Antecedent::or(self.bind(l)?, self.bind(r)?),
        })
    }

    fn disjunction(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.conjunction()?;
        while *self.peek() == Tok::Or {
            self.bump();
            let right = self.conjunction()?;
            left = Expr::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn conjunction(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.atom()?;
        while *self.peek() == Tok::And {
            self.bump();
            let right = self.atom()?;
            left = Expr::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::LParen {
            self.bump();
            let inner = self.disjunction()?;
            self.expect(Tok::RParen)?;
            return Ok(inner);
        }
        let (variable, pos) = match self.peek() {
            Tok::Ident(_) => self.ident()?,
            _ => return Err(self.unexpected("`(` or a variable name")),
        };
        self.expect(Tok::Is)?;
        let (term, _) = self.ident()?;
        let mut node = Expr::Atom {
            variable: variable.clone(),
            term,
            pos,
        };
        // `v is a OR b`: an identifier after OR that is not followed by `is`
        // is another term of the same variable.
        while *self.peek() == Tok::Or
            && matches!(self.peek_at(1), Tok::Ident(_))
            && *self.peek_at(2) != Tok::Is
        {
            self.bump();
            let (term, _) = self.ident()?;
            let extra = Expr::Atom {
                variable: variable.clone(),
                term,
                pos,
            };
            node = Expr::Or(Box::new(node), Box::new(extra));
        }
        Ok(node)
    }
}

/// Parses and binds rule text against `vocabulary`. Rule ids are assigned
/// 1..n in source order.
pub fn parse_rules(source: &str, vocabulary: &Vocabulary) -> Result<RuleBase, ParseError> {
    let mut parser = Parser {
        toks: lex(source)?,
        cursor: 0,
        vocabulary,
    };
    let rules = parser.rules()?;
    Ok(RuleBase {
        vocabulary: vocabulary.clone(),
        rules,
    })
}

/// A two-input decision table: `cells[r][c]` is the output term when the row
/// variable is `row_terms[r]` and the column variable is `col_terms[c]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleMatrix {
    pub row_var: String,
    pub col_var: String,
    pub out_var: String,
    pub row_terms: Vec<String>,
    pub col_terms: Vec<String>,
    pub cells: Vec<Vec<String>>,
}

impl RuleMatrix {
    fn check_dimensions(&self) -> Result<(), ParseError> {
        let rows_ok = self.cells.len() == self.row_terms.len();
        let cols_ok = self.cells.iter().all(|r| r.len() == self.col_terms.len());
        if rows_ok && cols_ok && !self.cells.is_empty() && !self.col_terms.is_empty() {
            return Ok(());
        }
        let widths: Vec<String> = self.cells.iter().map(|r| r.len().to_string()).collect();
        Err(ParseError::MatrixDimension {
            expected: format!("{}x{}", self.row_terms.len(), self.col_terms.len()),
            found: format!(
                "{} rows of widths [{}]",
                self.cells.len(),
                widths.join(", ")
            ),
        })
    }

    /// Expands into one rule per cell, row-major:
    /// `IF row_var is r AND col_var is c THEN out_var is cell`.
    pub fn to_rules(&self, vocabulary: &Vocabulary) -> Result<RuleBase, ParseError> {
        self.check_dimensions()?;
        for name in [&self.row_var, &self.col_var, &self.out_var] {
            if !is_identifier(name) {
                return Err(ParseError::UnknownVariable {
                    pos: None,
                    name: name.clone(),
                });
            }
        }
        let mut rules = Vec::with_capacity(self.row_terms.len() * self.col_terms.len());
        for (row_term, row) in self.row_terms.iter().zip(&self.cells) {
            for (col_term, cell) in self.col_terms.iter().zip(row) {
                rules.push(Rule {
                    id: rules.len() + 1,
                    antecedent: Antecedent::and(
                        Antecedent::atom(self.row_var.as_str(), row_term.as_str()),
                        Antecedent::atom(self.col_var.as_str(), col_term.as_str()),
                    ),
                    consequent: Proposition::new(self.out_var.as_str(), cell.as_str()),
                });
            }
        }
        RuleBase::new(vocabulary.clone(), rules)
    }
}
