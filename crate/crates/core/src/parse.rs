//! The line-oriented network DSL.
//!
//! ```text
//! # comment
//! theta A = saturating(2)
//! kinetics product-form
//! A + B <-> 2C ; 1, 0.5
//! 0 -> A ; 1
//! ```
//!
//! Species are numbered by first appearance in reaction lines; complexes by
//! first appearance. `<->` expands to the forward and the reverse reaction, in
//! that order, with the two rate constants in the same order.
//!
//! θ functions: `linear`, `saturating(K)` (min(m, K)) and
//! `table[v1, v2, ...] hold|linear` (θ(k) = v_k, continued by the last value or
//! proportionally). Header lines may appear anywhere.

use std::collections::HashMap;

use crate::error::{ParseError, ParseErrorKind};
use crate::kinetics::{Extension, KineticsKind, KineticsSpec, Theta, ThetaFamily};
use crate::model::{format_complex, Complex, Reaction, ReactionNetwork};

const MAX_COEFF: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct ParsedNetwork {
    pub network: ReactionNetwork,
    pub kinetics: KineticsSpec,
}

struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    _src: &'a str,
}

type PResult<T> = std::result::Result<T, ParseError>;

impl<'a> Cursor<'a> {
    fn new(src: &'a str, line: usize) -> Self {
        Cursor { chars: src.chars().collect(), pos: 0, line, _src: src }
    }

    fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError { line: self.line, column: self.pos + 1, kind }
    }

    fn err_at(&self, col: usize, kind: ParseErrorKind) -> ParseError {
        ParseError { line: self.line, column: col + 1, kind }
    }

    fn syntax(&self, msg: impl Into<String>) -> ParseError {
        self.err(ParseErrorKind::Syntax(msg.into()))
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c == ' ' || c == '\t' || c == '\r') {
            self.pos += 1;
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        matches!(self.peek(), None | Some('#'))
    }

    fn eat(&mut self, s: &str) -> bool {
        self.skip_ws();
        let n = s.chars().count();
        if self.chars.len() >= self.pos + n && self.chars[self.pos..self.pos + n].iter().copied().eq(s.chars()) {
            self.pos += n;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> PResult<()> {
        if self.eat(s) {
            Ok(())
        } else {
            Err(self.syntax(format!("expected '{s}'")))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() || c == '_' => self.pos += 1,
            _ => return Err(self.syntax("expected identifier")),
        }
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn digits(&mut self) -> Option<(String, usize)> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        (self.pos > start).then(|| (self.chars[start..self.pos].iter().collect(), start))
    }

    fn number(&mut self) -> PResult<(f64, String, usize)> {
        self.skip_ws();
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '+' | '-')) {
            self.pos += 1;
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse::<f64>()
            .map(|v| (v, text.clone(), start))
            .map_err(|_| self.err_at(start, ParseErrorKind::Syntax(format!("invalid number '{text}'"))))
    }
}

#[derive(Default)]
struct Builder {
    species: Vec<String>,
    species_index: HashMap<String, usize>,
    // complexes as sparse (species, coeff) until the species count is final
    complexes: Vec<Vec<(usize, i64)>>,
    complex_index: HashMap<Vec<(usize, i64)>, usize>,
    reactions: Vec<Reaction>,
    reaction_index: HashMap<Reaction, usize>,
    kappa: Vec<f64>,
    thetas: Vec<(String, Theta, usize, usize)>,
    kind: Option<KineticsKind>,
}

impl Builder {
    fn species(&mut self, name: String) -> usize {
        if let Some(&i) = self.species_index.get(&name) {
            return i;
        }
        self.species.push(name.clone());
        self.species_index.insert(name, self.species.len() - 1);
        self.species.len() - 1
    }

    fn complex(&mut self, terms: Vec<(usize, i64)>) -> usize {
        if let Some(&i) = self.complex_index.get(&terms) {
            return i;
        }
        self.complexes.push(terms.clone());
        self.complex_index.insert(terms, self.complexes.len() - 1);
        self.complexes.len() - 1
    }

    fn complex_text(&self, c: usize) -> String {
        let terms = &self.complexes[c];
        if terms.is_empty() {
            return "0".into();
        }
        terms
            .iter()
            .map(|&(s, k)| if k == 1 { self.species[s].clone() } else { format!("{k}{}", self.species[s]) })
            .collect::<Vec<_>>()
            .join("+")
    }

    fn parse_complex(&mut self, cur: &mut Cursor) -> PResult<usize> {
        cur.skip_ws();
        let start = cur.pos;
        if cur.peek() == Some('0') {
            let save = cur.pos;
            cur.pos += 1;
            let next = cur.peek();
            if !matches!(next, Some(c) if c.is_ascii_alphanumeric() || c == '_') {
                return Ok(self.complex(Vec::new()));
            }
            cur.pos = save;
        }
        let mut coeffs: HashMap<usize, i64> = HashMap::new();
        let mut order: Vec<usize> = Vec::new();
        loop {
            cur.skip_ws();
            let coeff = match cur.digits() {
                Some((text, col)) => {
                    let v: u64 = text.parse().unwrap_or(u64::MAX);
                    if v == 0 {
                        return Err(cur.err_at(col, ParseErrorKind::Syntax("zero coefficient".into())));
                    }
                    if v > MAX_COEFF {
                        return Err(cur.err_at(col, ParseErrorKind::CoefficientTooLarge(v)));
                    }
                    v as i64
                }
                None => 1,
            };
            let name = cur.ident()?;
            let s = self.species(name);
            if !coeffs.contains_key(&s) {
                order.push(s);
            }
            let entry = coeffs.entry(s).or_insert(0);
            *entry += coeff;
            if *entry as u64 > MAX_COEFF {
                return Err(cur.err_at(start, ParseErrorKind::CoefficientTooLarge(*entry as u64)));
            }
            cur.skip_ws();
            if cur.peek() == Some('+') {
                cur.pos += 1;
            } else {
                break;
            }
        }
        let mut terms: Vec<(usize, i64)> = order.into_iter().map(|s| (s, coeffs[&s])).collect();
        terms.sort_unstable();
        Ok(self.complex(terms))
    }

    fn add_reaction(&mut self, cur: &Cursor, col: usize, source: usize, target: usize, kappa: f64) -> PResult<()> {
        if source == target {
            return Err(cur.err_at(col, ParseErrorKind::SelfLoop(self.complex_text(source))));
        }
        let r = Reaction { source, target };
        if self.reaction_index.contains_key(&r) {
            let label = format!("{} -> {}", self.complex_text(source), self.complex_text(target));
            return Err(cur.err_at(col, ParseErrorKind::DuplicateReaction(label)));
        }
        self.reaction_index.insert(r, self.reactions.len());
        self.reactions.push(r);
        self.kappa.push(kappa);
        Ok(())
    }

    fn parse_reaction_line(&mut self, cur: &mut Cursor) -> PResult<()> {
        cur.skip_ws();
        let col = cur.pos;
        let source = self.parse_complex(cur)?;
        let reversible = if cur.eat("<->") {
            true
        } else if cur.eat("->") {
            false
        } else {
            return Err(cur.syntax("expected '->' or '<->'"));
        };
        let target = self.parse_complex(cur)?;
        cur.expect(";")?;
        let mut rates = Vec::new();
        loop {
            let (v, text, at) = cur.number()?;
            if !(v.is_finite() && v > 0.0) {
                return Err(cur.err_at(at, ParseErrorKind::NonPositiveRate(text)));
            }
            rates.push(v);
            if !cur.eat(",") {
                break;
            }
        }
        if !cur.at_end() {
            return Err(cur.syntax("unexpected trailing input"));
        }
        let expected = if reversible { 2 } else { 1 };
        if rates.len() != expected {
            return Err(cur.err_at(col, ParseErrorKind::RateCount { expected, got: rates.len() }));
        }
        self.add_reaction(cur, col, source, target, rates[0])?;
        if reversible {
            self.add_reaction(cur, col, target, source, rates[1])?;
        }
        Ok(())
    }

    fn parse_theta_line(&mut self, cur: &mut Cursor) -> PResult<()> {
        let name_col = {
            cur.skip_ws();
            cur.pos
        };
        let species = cur.ident()?;
        cur.expect("=")?;
        cur.skip_ws();
        let fcol = cur.pos;
        let fname = cur.ident()?;
        let theta = match fname.as_str() {
            "linear" => Theta::Linear,
            "saturating" => {
                cur.expect("(")?;
                cur.skip_ws();
                let (text, at) = cur.digits().ok_or_else(|| cur.syntax("expected integer cap"))?;
                let cap: u32 = text
                    .parse()
                    .ok()
                    .filter(|&c| c > 0)
                    .ok_or_else(|| cur.err_at(at, ParseErrorKind::Syntax("cap must be a positive integer".into())))?;
                cur.expect(")")?;
                Theta::Saturating { cap }
            }
            "table" => {
                cur.expect("[")?;
                let mut values = Vec::new();
                loop {
                    let (v, text, at) = cur.number()?;
                    if !(v.is_finite() && v > 0.0) {
                        return Err(cur.err_at(
                            at,
                            ParseErrorKind::Syntax(format!("theta table entries must be positive, got {text}")),
                        ));
                    }
                    values.push(v);
                    if !cur.eat(",") {
                        break;
                    }
                }
                cur.expect("]")?;
                let extension = if cur.at_end() {
                    Extension::Hold
                } else {
                    let ecol = cur.pos;
                    match cur.ident()?.as_str() {
                        "hold" => Extension::Hold,
                        "linear" => Extension::Linear,
                        other => {
                            return Err(cur.err_at(
                                ecol,
                                ParseErrorKind::Syntax(format!("unknown table extension '{other}'")),
                            ))
                        }
                    }
                };
                Theta::Table { values, extension }
            }
            other => return Err(cur.err_at(fcol, ParseErrorKind::UnknownTheta(other.to_string()))),
        };
        if !cur.at_end() {
            return Err(cur.syntax("unexpected trailing input"));
        }
        self.thetas.push((species, theta, cur.line, name_col));
        Ok(())
    }

    fn finish(self) -> PResult<ParsedNetwork> {
        let n = self.species.len();
        let mut theta = vec![Theta::Linear; n];
        for (name, t, line, col) in self.thetas {
            match self.species_index.get(&name) {
                Some(&i) => theta[i] = t,
                None => {
                    return Err(ParseError { line, column: col + 1, kind: ParseErrorKind::UnknownSpecies(name) })
                }
            }
        }
        let theta = ThetaFamily::new(theta);
        let kind = self.kind.unwrap_or(if theta.is_all_linear() {
            KineticsKind::StochasticMassAction
        } else {
            KineticsKind::StochasticProductForm
        });
        let complexes = self
            .complexes
            .iter()
            .map(|terms| {
                let mut v = vec![0i64; n];
                for &(s, k) in terms {
                    v[s] = k;
                }
                Complex::new(v).expect("coefficients are positive")
            })
            .collect();
        let network = ReactionNetwork::new(self.species, complexes, self.reactions)
            .expect("parser maintains network invariants");
        let kinetics = KineticsSpec::new(self.kappa, theta, kind).expect("rates validated");
        Ok(ParsedNetwork { network, kinetics })
    }
}

/// Parses DSL text into a network and its kinetics.
pub fn parse_network(text: &str) -> Result<ParsedNetwork, ParseError> {
    let mut b = Builder::default();
    for (lineno, raw) in text.lines().enumerate() {
        let mut cur = Cursor::new(raw, lineno + 1);
        if cur.at_end() {
            continue;
        }
        let save = cur.pos;
        let first = cur.ident().ok();
        let header = match first.as_deref() {
            Some("theta") if raw.contains('=') && !raw.contains(';') => Some("theta"),
            Some("kinetics") if !raw.contains(';') => Some("kinetics"),
            _ => None,
        };
        match header {
            Some("theta") => b.parse_theta_line(&mut cur)?,
            Some(_) => {
                cur.skip_ws();
                let col = cur.pos;
                let mut word = String::new();
                while matches!(cur.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '-') {
                    word.push(cur.peek().unwrap());
                    cur.pos += 1;
                }
                b.kind = Some(match word.as_str() {
                    "deterministic" => KineticsKind::DeterministicMassAction,
                    "mass-action" => KineticsKind::StochasticMassAction,
                    "product-form" => KineticsKind::StochasticProductForm,
                    _ => {
                        return Err(cur.err_at(col, ParseErrorKind::Syntax(format!("unknown kinetics '{word}'"))))
                    }
                });
                if !cur.at_end() {
                    return Err(cur.syntax("unexpected trailing input"));
                }
            }
            None => {
                cur.pos = save;
                b.parse_reaction_line(&mut cur)?;
            }
        }
    }
    b.finish()
}

/// Serialises a network back into the DSL; `parse_network` of the output
/// reproduces the same network and kinetics.
pub fn to_dsl(network: &ReactionNetwork, kinetics: &KineticsSpec) -> String {
    let mut out = String::new();
    let species = network.species();
    for (i, t) in kinetics.theta().iter().enumerate() {
        if !t.is_linear() {
            out.push_str(&format!("theta {} = {t}\n", species[i].name));
        }
    }
    let default_kind = if kinetics.theta().is_all_linear() {
        KineticsKind::StochasticMassAction
    } else {
        KineticsKind::StochasticProductForm
    };
    if kinetics.kind() != default_kind {
        out.push_str(&format!("kinetics {}\n", kinetics.kind().keyword()));
    }
    for (k, r) in network.reactions().iter().enumerate() {
        out.push_str(&format!(
            "{} -> {} ; {}\n",
            spaced(&format_complex(network.complex(r.source), species)),
            spaced(&format_complex(network.complex(r.target), species)),
            kinetics.kappa()[k]
        ));
    }
    out
}

fn spaced(label: &str) -> String {
    label.replace('+', " + ")
}
