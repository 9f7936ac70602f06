//! Manifest files (`.kz`).
//!
//! ```text
//! field: Fp 3
//! cap: 4
//! window: 5
//!
//! [operad]
//! builtin: uAss
//!
//! [algebra]
//! builtin: dual-numbers
//! ```
//!
//! Header keys: `field`, `sorts`, `cap`, `window` (`N` or `N lo..hi`). Sections and their keys:
//!
//! - `[operad]`: `builtin`, or `component: a,a->a: p12@0 p21@0`, `d: x = lincomb`,
//!   `swap: 1 p12 = lincomb`, `unit: a = lincomb`, `gamma: outer | inner… = lincomb`,
//!   `certificate: char0|free-module|asserted`.
//! - `[algebra]`: `builtin`, or `element: x 0 [sort]`, `d: x = lincomb`, `theta: op | x y = lincomb`.
//! - `[dstructure]`: `builtin: bar`, or `generator: x 1 [sort]`, `d: x = lincomb`,
//!   `delta: x = 2*[y y | p12] + -[ | u]`.
//! - `[complex]`: `generator: x 1`, `d: x = lincomb`.
//!
//! A lincomb is `0` or terms `c*name`, `name`, `-name` joined by `+`.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::algebra::Algebra;
use crate::chain::ChainComplex;
use crate::coeff::{FieldSpec, Scalar};
use crate::dstructure::{DeltaTerm, FiniteDStructure};
use crate::linalg::LinComb;
use crate::operad::{builtin, Builtin, Certificate, Operad, OperadBuilder, Signature};
use crate::tree::SortId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

pub type Terms = Vec<(String, Scalar)>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WindowSpec {
    pub size: usize,
    pub degrees: Option<(i64, i64)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentSpec {
    pub inputs: Vec<String>,
    pub output: String,
    pub basis: Vec<(String, i64)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ExplicitOperad {
    pub components: Vec<ComponentSpec>,
    pub d: Vec<(String, Terms)>,
    pub swaps: Vec<(usize, String, Terms)>,
    pub units: Vec<(String, Terms)>,
    pub gamma: Vec<(String, Vec<String>, Terms)>,
    pub certificate: Option<Certificate>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OperadSpec {
    Builtin(String),
    Explicit(ExplicitOperad),
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ExplicitAlgebra {
    pub elements: Vec<(String, i64, String)>,
    pub d: Vec<(String, Terms)>,
    /// `(op, inputs, value)`.
    pub theta: Vec<(String, Vec<String>, Terms)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AlgebraSpec {
    Builtin(String),
    Explicit(ExplicitAlgebra),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeltaSpec {
    pub coeff: Scalar,
    pub inputs: Vec<String>,
    pub op: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ExplicitDStructure {
    pub generators: Vec<(String, i64, String)>,
    pub d: Vec<(String, Terms)>,
    pub delta: Vec<(String, Vec<DeltaSpec>)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DStructureSpec {
    /// The bar D-structure of the manifest's algebra.
    Bar,
    Explicit(ExplicitDStructure),
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ComplexSpec {
    pub generators: Vec<(String, i64)>,
    pub d: Vec<(String, Terms)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Manifest {
    pub field: FieldSpec,
    /// Declared sort names; `None` means the operad's own (a single sort `*` when explicit).
    pub sorts: Option<Vec<String>>,
    pub cap: usize,
    pub window: WindowSpec,
    pub operad: Option<OperadSpec>,
    pub algebra: Option<AlgebraSpec>,
    pub dstructure: Option<DStructureSpec>,
    pub complex: Option<ComplexSpec>,
}

/// Objects built from a manifest.
pub struct Built {
    pub operad: Option<Arc<Operad>>,
    pub algebra: Option<Algebra>,
    pub dstructure: Option<FiniteDStructure>,
    pub complex: Option<ChainComplex>,
}

const DEFAULT_CAP: usize = 4;

// ---------------------------------------------------------------------------------------------
// Parsing

fn err(line: usize, col: usize, message: impl Into<String>) -> ParseError {
    ParseError { line, col, message: message.into() }
}

/// A piece of a line with its 1-based column.
#[derive(Clone, Copy)]
struct Span<'t> {
    text: &'t str,
    line: usize,
    col: usize,
}

impl<'t> Span<'t> {
    fn err(&self, message: impl Into<String>) -> ParseError {
        err(self.line, self.col, message)
    }

    fn trim(self) -> Span<'t> {
        let lead = self.text.len() - self.text.trim_start().len();
        Span { text: self.text.trim(), line: self.line, col: self.col + self.text[..lead].chars().count() }
    }

    fn sub(self, start: usize, end: usize) -> Span<'t> {
        Span { text: &self.text[start..end], line: self.line, col: self.col + self.text[..start].chars().count() }
    }

    fn split_once(self, pat: &str) -> Option<(Span<'t>, Span<'t>)> {
        let i = self.text.find(pat)?;
        Some((self.sub(0, i).trim(), self.sub(i + pat.len(), self.text.len()).trim()))
    }

    fn split_all(self, pat: char) -> Vec<Span<'t>> {
        let mut out = Vec::new();
        let mut start = 0;
        for (i, ch) in self.text.char_indices() {
            if ch == pat {
                out.push(self.sub(start, i).trim());
                start = i + ch.len_utf8();
            }
        }
        out.push(self.sub(start, self.text.len()).trim());
        out
    }

    fn words(self) -> Vec<Span<'t>> {
        let mut out = Vec::new();
        let mut start = None;
        for (i, ch) in self.text.char_indices() {
            match (ch.is_whitespace(), start) {
                (true, Some(s)) => {
                    out.push(self.sub(s, i));
                    start = None;
                }
                (false, None) => start = Some(i),
                _ => {}
            }
        }
        if let Some(s) = start {
            out.push(self.sub(s, self.text.len()));
        }
        out
    }
}

fn parse_name(s: Span) -> Result<String, ParseError> {
    let t = s.text;
    if t.is_empty() {
        return Err(s.err("expected a name"));
    }
    if t.chars().any(|c| c.is_whitespace() || matches!(c, '+' | '*' | '=' | '|' | '[' | ']' | '#')) {
        return Err(s.err(format!("invalid name `{t}`")));
    }
    Ok(t.to_string())
}

fn parse_int<T: std::str::FromStr>(s: Span, what: &str) -> Result<T, ParseError> {
    s.text.parse().map_err(|_| s.err(format!("expected {what}, found `{}`", s.text)))
}

fn parse_terms<'t>(s: Span<'t>, field: FieldSpec) -> Result<Vec<(Span<'t>, Scalar)>, ParseError> {
    if s.text == "0" {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for t in s.split_all('+') {
        if t.text.is_empty() {
            return Err(t.err("empty term"));
        }
        let (coeff, name) = match t.split_once("*") {
            Some((c, n)) => (field.parse_scalar(c.text).map_err(|_| c.err(format!("invalid coefficient `{}`", c.text)))?, n),
            None => match t.text.strip_prefix('-') {
                Some(_) => (field.one().neg(), t.sub(1, t.text.len()).trim()),
                None => (field.one(), t),
            },
        };
        parse_name(name)?;
        out.push((name, coeff));
    }
    Ok(out)
}

fn resolve_terms<F: Fn(&str) -> bool>(terms: Vec<(Span, Scalar)>, known: F, what: &str) -> Result<Terms, ParseError> {
    terms
        .into_iter()
        .map(|(n, c)| if known(n.text) { Ok((n.text.to_string(), c)) } else { Err(n.err(format!("unknown {what} `{}`", n.text))) })
        .collect()
}

fn parse_certificate(s: Span) -> Result<Certificate, ParseError> {
    match s.text {
        "char0" => Ok(Certificate::Char0),
        "free-module" => Ok(Certificate::FreeModule),
        "asserted" => Ok(Certificate::Asserted),
        other => Err(s.err(format!("unknown certificate `{other}` (char0, free-module, asserted)"))),
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Header,
    Operad,
    Algebra,
    DStructure,
    Complex,
}

struct Parser {
    field: Option<FieldSpec>,
    sorts: Option<Vec<String>>,
    cap: Option<usize>,
    window: Option<(WindowSpec, usize, usize)>,
    operad: Option<(OperadSpec, usize)>,
    built_operad: Option<Arc<Operad>>,
    algebra: Option<(AlgebraSpec, usize)>,
    built_algebra: bool,
    dstructure: Option<(DStructureSpec, usize)>,
    complex: Option<(ComplexSpec, usize)>,
    seen: BTreeSet<&'static str>,
}

impl Parser {
    fn field(&self, s: Span) -> Result<FieldSpec, ParseError> {
        self.field.ok_or_else(|| s.err("missing field header"))
    }

    fn sort_names(&self) -> Vec<String> {
        if let Some(op) = &self.built_operad {
            return op.sort_names().to_vec();
        }
        self.sorts.clone().unwrap_or_else(|| vec!["*".into()])
    }

    fn sort_of(&self, s: Span) -> Result<String, ParseError> {
        let names = self.sort_names();
        if names.iter().any(|n| n == s.text) {
            Ok(s.text.to_string())
        } else {
            Err(s.err(format!("unknown sort `{}`", s.text)))
        }
    }

    fn default_sort(&self, s: Span) -> Result<String, ParseError> {
        let names = self.sort_names();
        if names.len() == 1 {
            Ok(names[0].clone())
        } else {
            Err(s.err("a sort is required when there are several sorts"))
        }
    }

    fn header(&mut self, key: Span, value: Span) -> Result<(), ParseError> {
        match key.text {
            "field" => {
                self.field = Some(value.text.parse().map_err(|e| value.err(format!("{e}")))?);
            }
            "sorts" => {
                let names: Vec<String> = value.words().into_iter().map(parse_name).collect::<Result<_, _>>()?;
                if names.is_empty() || names.iter().collect::<BTreeSet<_>>().len() != names.len() {
                    return Err(value.err("sorts must be a nonempty list of distinct names"));
                }
                self.sorts = Some(names);
            }
            "cap" => {
                let c: usize = parse_int(value, "an arity cap")?;
                if c == 0 {
                    return Err(value.err("cap must be at least 1"));
                }
                self.cap = Some(c);
            }
            "window" => {
                let w = value.words();
                if w.is_empty() || w.len() > 2 {
                    return Err(value.err("expected `window: N` or `window: N lo..hi`"));
                }
                let size = parse_int(w[0], "a window size")?;
                let degrees = match w.get(1) {
                    None => None,
                    Some(r) => {
                        let (lo, hi) = r.split_once("..").ok_or_else(|| r.err("expected a degree range `lo..hi`"))?;
                        let (lo, hi) = (parse_int(lo, "a degree")?, parse_int(hi, "a degree")?);
                        if lo > hi {
                            return Err(r.err("empty degree range"));
                        }
                        Some((lo, hi))
                    }
                };
                self.window = Some((WindowSpec { size, degrees }, value.line, value.col));
            }
            other => return Err(key.err(format!("unknown header key `{other}`"))),
        }
        Ok(())
    }

    fn operad_line(&mut self, key: Span, value: Span) -> Result<(), ParseError> {
        let field = self.field(key)?;
        let (spec, _) = self.operad.as_mut().unwrap();
        if key.text == "builtin" {
            return match spec {
                OperadSpec::Explicit(e) if *e == ExplicitOperad::default() => {
                    Builtin::parse(value.text).map_err(|e| value.err(e.to_string()))?;
                    *spec = OperadSpec::Builtin(value.text.to_string());
                    Ok(())
                }
                _ => Err(key.err("`builtin` must be the only entry of its section")),
            };
        }
        let sorts = self.sorts.clone().unwrap_or_else(|| vec!["*".into()]);
        let OperadSpec::Explicit(e) = spec else { return Err(key.err("`builtin` must be the only entry of its section")) };
        let declared = |e: &ExplicitOperad, n: &str| e.components.iter().any(|c| c.basis.iter().any(|(b, _)| b == n));
        match key.text {
            "component" => {
                let (sig, basis) = value.split_once(": ").ok_or_else(|| value.err("expected `inputs->output: names`"))?;
                let (ins, out) = sig.split_once("->").ok_or_else(|| sig.err("expected `inputs->output`"))?;
                let check = |s: Span| -> Result<String, ParseError> {
                    if sorts.iter().any(|n| n == s.text) {
                        Ok(s.text.to_string())
                    } else {
                        Err(s.err(format!("unknown sort `{}`", s.text)))
                    }
                };
                let inputs = if ins.text.is_empty() { Vec::new() } else { ins.split_all(',').into_iter().map(check).collect::<Result<_, _>>()? };
                let output = check(out)?;
                let mut names = Vec::new();
                for w in basis.words() {
                    let (n, deg) = match w.split_once("@") {
                        Some((n, d)) => (n, parse_int(d, "a degree")?),
                        None => (w, 0),
                    };
                    let n = parse_name(n)?;
                    if declared(e, &n) || names.iter().any(|(m, _)| *m == n) {
                        return Err(w.err(format!("duplicate operation `{n}`")));
                    }
                    names.push((n, deg));
                }
                if names.is_empty() {
                    return Err(basis.err("a component needs at least one basis element"));
                }
                e.components.push(ComponentSpec { inputs, output, basis: names });
            }
            "d" | "swap" | "unit" | "gamma" => {
                let (lhs, rhs) = value.split_once("=").ok_or_else(|| value.err("expected `… = lincomb`"))?;
                let terms = resolve_terms(parse_terms(rhs, field)?, |n| declared(e, n), "operation")?;
                let known = |s: Span| -> Result<String, ParseError> {
                    if declared(e, s.text) {
                        Ok(s.text.to_string())
                    } else {
                        Err(s.err(format!("unknown operation `{}`", s.text)))
                    }
                };
                match key.text {
                    "d" => e.d.push((known(lhs)?, terms)),
                    "swap" => {
                        let w = lhs.words();
                        if w.len() != 2 {
                            return Err(lhs.err("expected `swap: position name = lincomb`"));
                        }
                        e.swaps.push((parse_int(w[0], "a position")?, known(w[1])?, terms));
                    }
                    "unit" => {
                        if !sorts.iter().any(|n| n == lhs.text) {
                            return Err(lhs.err(format!("unknown sort `{}`", lhs.text)));
                        }
                        e.units.push((lhs.text.to_string(), terms));
                    }
                    _ => {
                        let (outer, inner) = lhs.split_once("|").ok_or_else(|| lhs.err("expected `outer | inner…`"))?;
                        let inner = inner.words().into_iter().map(known).collect::<Result<_, _>>()?;
                        e.gamma.push((known(outer)?, inner, terms));
                    }
                }
            }
            "certificate" => e.certificate = Some(parse_certificate(value)?),
            other => return Err(key.err(format!("unknown operad key `{other}`"))),
        }
        Ok(())
    }

    fn finish_operad(&mut self) -> Result<(), ParseError> {
        let Some((spec, line)) = &self.operad else { return Ok(()) };
        let field = self.field.ok_or_else(|| err(1, 1, "missing field header"))?;
        let cap = self.cap.unwrap_or(DEFAULT_CAP);
        let op = build_operad(spec, field, self.sorts.as_deref(), cap).map_err(|m| err(*line, 1, m))?;
        if let Some(s) = &self.sorts {
            if s.as_slice() != op.sort_names() {
                return Err(err(*line, 1, format!("declared sorts {:?} differ from the operad's {:?}", s, op.sort_names())));
            }
        }
        self.built_operad = Some(Arc::new(op));
        Ok(())
    }

    fn element_line(&self, value: Span) -> Result<(String, i64, String), ParseError> {
        let w = value.words();
        if w.len() < 2 || w.len() > 3 {
            return Err(value.err("expected `name degree [sort]`"));
        }
        let sort = match w.get(2) {
            Some(s) => self.sort_of(*s)?,
            None => self.default_sort(value)?,
        };
        Ok((parse_name(w[0])?, parse_int(w[1], "a degree")?, sort))
    }

    fn algebra_line(&mut self, key: Span, value: Span) -> Result<(), ParseError> {
        let field = self.field(key)?;
        let op = self.built_operad.clone().ok_or_else(|| key.err("the algebra section needs an operad section before it"))?;
        let parsed = match key.text {
            "element" => Some(self.element_line(value)?),
            _ => None,
        };
        let (spec, _) = self.algebra.as_mut().unwrap();
        if key.text == "builtin" {
            return match spec {
                AlgebraSpec::Explicit(e) if *e == ExplicitAlgebra::default() => {
                    *spec = AlgebraSpec::Builtin(value.text.to_string());
                    Ok(())
                }
                _ => Err(key.err("`builtin` must be the only entry of its section")),
            };
        }
        let AlgebraSpec::Explicit(e) = spec else { return Err(key.err("`builtin` must be the only entry of its section")) };
        let has = |e: &ExplicitAlgebra, n: &str| e.elements.iter().any(|(m, _, _)| m == n);
        match key.text {
            "element" => {
                let el = parsed.unwrap();
                if has(e, &el.0) {
                    return Err(value.err(format!("duplicate element `{}`", el.0)));
                }
                e.elements.push(el);
            }
            "d" => {
                let (lhs, rhs) = value.split_once("=").ok_or_else(|| value.err("expected `x = lincomb`"))?;
                if !has(e, lhs.text) {
                    return Err(lhs.err(format!("unknown element `{}`", lhs.text)));
                }
                let terms = resolve_terms(parse_terms(rhs, field)?, |n| has(e, n), "element")?;
                e.d.push((lhs.text.to_string(), terms));
            }
            "theta" => {
                let (lhs, rhs) = value.split_once("=").ok_or_else(|| value.err("expected `op | inputs = lincomb`"))?;
                let (o, ins) = lhs.split_once("|").ok_or_else(|| lhs.err("expected `op | inputs`"))?;
                if op.lookup(o.text).is_none() {
                    return Err(o.err(format!("unknown operation `{}`", o.text)));
                }
                let mut inputs = Vec::new();
                for w in ins.words() {
                    if !has(e, w.text) {
                        return Err(w.err(format!("unknown element `{}`", w.text)));
                    }
                    inputs.push(w.text.to_string());
                }
                let terms = resolve_terms(parse_terms(rhs, field)?, |n| has(e, n), "element")?;
                e.theta.push((o.text.to_string(), inputs, terms));
            }
            other => return Err(key.err(format!("unknown algebra key `{other}`"))),
        }
        Ok(())
    }

    fn finish_algebra(&mut self) -> Result<(), ParseError> {
        let Some((spec, line)) = &self.algebra else { return Ok(()) };
        let op = self.built_operad.clone().expect("checked when the section started");
        build_algebra(spec, op).map_err(|m| err(*line, 1, m))?;
        self.built_algebra = true;
        Ok(())
    }

    fn dstructure_line(&mut self, key: Span, value: Span) -> Result<(), ParseError> {
        let field = self.field(key)?;
        let op = self.built_operad.clone().ok_or_else(|| key.err("the dstructure section needs an operad section before it"))?;
        let parsed = match key.text {
            "generator" => Some(self.element_line(value)?),
            _ => None,
        };
        let (spec, _) = self.dstructure.as_mut().unwrap();
        if key.text == "builtin" {
            if value.text != "bar" {
                return Err(value.err(format!("unknown D-structure builtin `{}` (bar)", value.text)));
            }
            return match spec {
                DStructureSpec::Explicit(e) if *e == ExplicitDStructure::default() => {
                    *spec = DStructureSpec::Bar;
                    Ok(())
                }
                _ => Err(key.err("`builtin` must be the only entry of its section")),
            };
        }
        let DStructureSpec::Explicit(e) = spec else { return Err(key.err("`builtin` must be the only entry of its section")) };
        let has = |e: &ExplicitDStructure, n: &str| e.generators.iter().any(|(m, _, _)| m == n);
        match key.text {
            "generator" => {
                let g = parsed.unwrap();
                if has(e, &g.0) {
                    return Err(value.err(format!("duplicate generator `{}`", g.0)));
                }
                e.generators.push(g);
            }
            "d" => {
                let (lhs, rhs) = value.split_once("=").ok_or_else(|| value.err("expected `x = lincomb`"))?;
                if !has(e, lhs.text) {
                    return Err(lhs.err(format!("unknown generator `{}`", lhs.text)));
                }
                let terms = resolve_terms(parse_terms(rhs, field)?, |n| has(e, n), "generator")?;
                e.d.push((lhs.text.to_string(), terms));
            }
            "delta" => {
                let (lhs, rhs) = value.split_once("=").ok_or_else(|| value.err("expected `x = terms`"))?;
                if !has(e, lhs.text) {
                    return Err(lhs.err(format!("unknown generator `{}`", lhs.text)));
                }
                let mut terms = Vec::new();
                if rhs.text != "0" {
                    for t in rhs.split_all('+') {
                        let open = t.text.find('[').ok_or_else(|| t.err("expected `c*[inputs | op]`"))?;
                        if !t.text.ends_with(']') {
                            return Err(t.err("expected `]` at the end of the term"));
                        }
                        let c = t.sub(0, open).trim();
                        let coeff = match c.text.trim_end_matches('*').trim() {
                            "" => field.one(),
                            "-" => field.one().neg(),
                            s => field.parse_scalar(s).map_err(|_| c.err(format!("invalid coefficient `{s}`")))?,
                        };
                        let body = t.sub(open + 1, t.text.len() - 1).trim();
                        let (ins, o) = body.split_once("|").ok_or_else(|| body.err("expected `inputs | op`"))?;
                        if op.lookup(o.text).is_none() {
                            return Err(o.err(format!("unknown operation `{}`", o.text)));
                        }
                        let mut inputs = Vec::new();
                        for w in ins.words() {
                            if !has(e, w.text) {
                                return Err(w.err(format!("unknown generator `{}`", w.text)));
                            }
                            inputs.push(w.text.to_string());
                        }
                        terms.push(DeltaSpec { coeff, inputs, op: o.text.to_string() });
                    }
                }
                e.delta.push((lhs.text.to_string(), terms));
            }
            other => return Err(key.err(format!("unknown dstructure key `{other}`"))),
        }
        Ok(())
    }

    fn finish_dstructure(&mut self) -> Result<(), ParseError> {
        let Some((spec, line)) = &self.dstructure else { return Ok(()) };
        match spec {
            DStructureSpec::Bar if !self.built_algebra => Err(err(*line, 1, "`builtin: bar` needs an algebra section before it")),
            DStructureSpec::Bar => Ok(()),
            DStructureSpec::Explicit(_) => {
                let op = self.built_operad.clone().expect("checked when the section started");
                build_dstructure(spec, op).map(|_| ()).map_err(|m| err(*line, 1, m))
            }
        }
    }

    fn complex_line(&mut self, key: Span, value: Span) -> Result<(), ParseError> {
        let field = self.field(key)?;
        let (spec, _) = self.complex.as_mut().unwrap();
        let has = |c: &ComplexSpec, n: &str| c.generators.iter().any(|(m, _)| m == n);
        match key.text {
            "generator" => {
                let w = value.words();
                if w.len() != 2 {
                    return Err(value.err("expected `name degree`"));
                }
                let n = parse_name(w[0])?;
                if has(spec, &n) {
                    return Err(w[0].err(format!("duplicate generator `{n}`")));
                }
                spec.generators.push((n, parse_int(w[1], "a degree")?));
            }
            "d" => {
                let (lhs, rhs) = value.split_once("=").ok_or_else(|| value.err("expected `x = lincomb`"))?;
                if !has(spec, lhs.text) {
                    return Err(lhs.err(format!("unknown generator `{}`", lhs.text)));
                }
                let terms = resolve_terms(parse_terms(rhs, field)?, |n| has(spec, n), "generator")?;
                spec.d.push((lhs.text.to_string(), terms));
            }
            other => return Err(key.err(format!("unknown complex key `{other}`"))),
        }
        Ok(())
    }

    fn finish(&mut self, section: Section) -> Result<(), ParseError> {
        match section {
            Section::Operad => self.finish_operad(),
            Section::Algebra => self.finish_algebra(),
            Section::DStructure => self.finish_dstructure(),
            Section::Complex => {
                let Some((spec, line)) = &self.complex else { return Ok(()) };
                let field = self.field.ok_or_else(|| err(1, 1, "missing field header"))?;
                build_complex(spec, field).map(|_| ()).map_err(|m| err(*line, 1, m))
            }
            Section::Header => Ok(()),
        }
    }
}

/// Parses and fully validates a manifest.
pub fn parse_manifest(text: &str) -> Result<Manifest, ParseError> {
    let mut p = Parser {
        field: None,
        sorts: None,
        cap: None,
        window: None,
        operad: None,
        built_operad: None,
        algebra: None,
        built_algebra: false,
        dstructure: None,
        complex: None,
        seen: BTreeSet::new(),
    };
    let mut section = Section::Header;
    for (i, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("");
        let line = Span { text: body, line: i + 1, col: 1 }.trim();
        if line.text.is_empty() {
            continue;
        }
        if line.text.starts_with('[') {
            let Some(name) = line.text.strip_suffix(']').map(|s| s[1..].trim()) else {
                return Err(line.err("expected `]`"));
            };
            if section == Section::Header && p.field.is_none() {
                return Err(line.err("missing field header"));
            }
            p.finish(section)?;
            let (next, tag): (Section, &'static str) = match name {
                "operad" => (Section::Operad, "operad"),
                "algebra" => (Section::Algebra, "algebra"),
                "dstructure" => (Section::DStructure, "dstructure"),
                "complex" => (Section::Complex, "complex"),
                other => return Err(line.err(format!("unknown section `[{other}]`"))),
            };
            if !p.seen.insert(tag) {
                return Err(line.err(format!("duplicate section `[{tag}]`")));
            }
            let at = line.line;
            match next {
                Section::Operad => p.operad = Some((OperadSpec::Explicit(ExplicitOperad::default()), at)),
                Section::Algebra => {
                    if p.built_operad.is_none() {
                        return Err(line.err("the algebra section needs an operad section before it"));
                    }
                    p.algebra = Some((AlgebraSpec::Explicit(ExplicitAlgebra::default()), at));
                }
                Section::DStructure => {
                    if p.built_operad.is_none() {
                        return Err(line.err("the dstructure section needs an operad section before it"));
                    }
                    p.dstructure = Some((DStructureSpec::Explicit(ExplicitDStructure::default()), at));
                }
                Section::Complex => p.complex = Some((ComplexSpec::default(), at)),
                Section::Header => unreachable!(),
            }
            section = next;
            continue;
        }
        let (key, value) = line.split_once(":").ok_or_else(|| line.err("expected `key: value`"))?;
        if section != Section::Header && p.field.is_none() {
            return Err(key.err("missing field header"));
        }
        match section {
            Section::Header => p.header(key, value)?,
            Section::Operad => p.operad_line(key, value)?,
            Section::Algebra => p.algebra_line(key, value)?,
            Section::DStructure => p.dstructure_line(key, value)?,
            Section::Complex => p.complex_line(key, value)?,
        }
    }
    let field = p.field.ok_or_else(|| err(1, 1, "missing field header"))?;
    p.finish(section)?;
    let cap = p.cap.unwrap_or(DEFAULT_CAP);
    let (window, wl, wc) = p.window.clone().unwrap_or((WindowSpec { size: cap + 1, degrees: None }, 1, 1));
    if p.operad.is_some() && window.size >= 2 && cap + 1 < window.size {
        return Err(err(wl, wc, format!("window {} needs arity cap ≥ {}, cap is {cap}", window.size, window.size - 1)));
    }
    Ok(Manifest {
        field,
        sorts: p.sorts,
        cap,
        window,
        operad: p.operad.map(|(s, _)| s),
        algebra: p.algebra.map(|(s, _)| s),
        dstructure: p.dstructure.map(|(s, _)| s),
        complex: p.complex.map(|(s, _)| s),
    })
}

// ---------------------------------------------------------------------------------------------
// Building

fn build_operad(spec: &OperadSpec, field: FieldSpec, sorts: Option<&[String]>, cap: usize) -> Result<Operad, String> {
    match spec {
        OperadSpec::Builtin(name) => {
            let b = Builtin::parse(name).map_err(|e| e.to_string())?;
            builtin(&b, field, cap).map_err(|e| e.to_string())
        }
        OperadSpec::Explicit(e) => {
            let names: Vec<String> = sorts.map(|s| s.to_vec()).unwrap_or_else(|| vec!["*".into()]);
            let sid = |n: &str| names.iter().position(|m| m == n).map(|i| i as SortId).ok_or_else(|| format!("unknown sort `{n}`"));
            let mut b = OperadBuilder::new(field, names.clone(), cap);
            for c in &e.components {
                let ins = c.inputs.iter().map(|s| sid(s)).collect::<Result<Vec<_>, _>>()?;
                b.component(Signature::new(ins, sid(&c.output)?), c.basis.clone());
            }
            for (n, t) in &e.d {
                b.differential(n, t.clone());
            }
            for (a, n, t) in &e.swaps {
                b.swap(*a, n, t.clone());
            }
            for (s, t) in &e.units {
                b.unit(sid(s)?, t.clone());
            }
            for (o, inner, t) in &e.gamma {
                b.gamma(o, inner.clone(), t.clone());
            }
            if let Some(c) = e.certificate {
                b.certificate(c);
            }
            b.build().map_err(|e| e.to_string())
        }
    }
}

fn build_algebra(spec: &AlgebraSpec, op: Arc<Operad>) -> Result<Algebra, String> {
    match spec {
        AlgebraSpec::Builtin(name) => Algebra::builtin(op, name).map_err(|e| e.to_string()),
        AlgebraSpec::Explicit(e) => {
            let mut elems = Vec::new();
            for (n, d, s) in &e.elements {
                let sid = op.sort_id(s).ok_or_else(|| format!("unknown sort `{s}`"))?;
                elems.push((n.clone(), *d, sid));
            }
            let theta: Vec<(Vec<String>, String, Terms)> = e.theta.iter().map(|(o, i, t)| (i.clone(), o.clone(), t.clone())).collect();
            Algebra::from_table(op, elems, &e.d, &theta).map_err(|e| e.to_string())
        }
    }
}

fn build_dstructure(spec: &DStructureSpec, op: Arc<Operad>) -> Result<Option<FiniteDStructure>, String> {
    let DStructureSpec::Explicit(e) = spec else { return Ok(None) };
    let field = op.field();
    let idx = |n: &str| e.generators.iter().position(|(m, _, _)| m == n).map(|i| i as u32).ok_or_else(|| format!("unknown generator `{n}`"));
    let mut elems = Vec::new();
    for (n, d, s) in &e.generators {
        elems.push((n.clone(), *d, op.sort_id(s).ok_or_else(|| format!("unknown sort `{s}`"))?));
    }
    let k = elems.len();
    let mut d = vec![LinComb::new(); k];
    for (n, t) in &e.d {
        let i = idx(n)? as usize;
        for (m, c) in t {
            d[i].add_term(idx(m)?, c.clone());
        }
    }
    let mut delta = vec![Vec::new(); k];
    for (n, terms) in &e.delta {
        let i = idx(n)? as usize;
        for t in terms {
            let o = op.lookup(&t.op).ok_or_else(|| format!("unknown operation `{}`", t.op))?;
            let inputs = t.inputs.iter().map(|m| idx(m)).collect::<Result<Vec<_>, _>>()?;
            delta[i].push(DeltaTerm { inputs, op: o, coeff: t.coeff.clone() });
        }
    }
    let _ = field;
    FiniteDStructure::new(op, elems, d, delta).map(Some).map_err(|e| e.to_string())
}

fn build_complex(spec: &ComplexSpec, field: FieldSpec) -> Result<ChainComplex, String> {
    ChainComplex::from_named(field, spec.generators.clone(), &spec.d).map_err(|e| e.to_string())
}

impl Manifest {
    pub fn build(&self) -> Result<Built, String> {
        let operad = match &self.operad {
            Some(s) => Some(Arc::new(build_operad(s, self.field, self.sorts.as_deref(), self.cap)?)),
            None => None,
        };
        let algebra = match (&self.algebra, &operad) {
            (Some(s), Some(op)) => Some(build_algebra(s, op.clone())?),
            _ => None,
        };
        let dstructure = match (&self.dstructure, &operad) {
            (Some(s), Some(op)) => build_dstructure(s, op.clone())?,
            _ => None,
        };
        let complex = match &self.complex {
            Some(s) => Some(build_complex(s, self.field)?),
            None => None,
        };
        Ok(Built { operad, algebra, dstructure, complex })
    }
}

// ---------------------------------------------------------------------------------------------
// Serialization

fn fmt_terms(t: &Terms) -> String {
    if t.is_empty() {
        return "0".into();
    }
    t.iter()
        .map(|(n, c)| {
            if c.is_one() {
                n.clone()
            } else if c.neg().is_one() {
                format!("-{n}")
            } else {
                format!("{c}*{n}")
            }
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

/// Canonical text of a manifest; `parse_manifest(&serialize(m)) == m`.
pub fn serialize(m: &Manifest) -> String {
    use fmt::Write;
    let mut s = String::new();
    let _ = writeln!(s, "field: {}", m.field);
    if let Some(sorts) = &m.sorts {
        let _ = writeln!(s, "sorts: {}", sorts.join(" "));
    }
    let _ = writeln!(s, "cap: {}", m.cap);
    match m.window.degrees {
        Some((lo, hi)) => {
            let _ = writeln!(s, "window: {} {lo}..{hi}", m.window.size);
        }
        None => {
            let _ = writeln!(s, "window: {}", m.window.size);
        }
    }
    let sort_suffix = |sort: &str| if m.sorts.as_ref().is_some_and(|v| v.len() > 1) { format!(" {sort}") } else { String::new() };
    if let Some(op) = &m.operad {
        let _ = writeln!(s, "\n[operad]");
        match op {
            OperadSpec::Builtin(n) => {
                let _ = writeln!(s, "builtin: {n}");
            }
            OperadSpec::Explicit(e) => {
                for c in &e.components {
                    let b: Vec<String> = c.basis.iter().map(|(n, d)| format!("{n}@{d}")).collect();
                    let _ = writeln!(s, "component: {}->{}: {}", c.inputs.join(","), c.output, b.join(" "));
                }
                for (n, t) in &e.d {
                    let _ = writeln!(s, "d: {n} = {}", fmt_terms(t));
                }
                for (a, n, t) in &e.swaps {
                    let _ = writeln!(s, "swap: {a} {n} = {}", fmt_terms(t));
                }
                for (so, t) in &e.units {
                    let _ = writeln!(s, "unit: {so} = {}", fmt_terms(t));
                }
                for (o, inner, t) in &e.gamma {
                    let _ = writeln!(s, "gamma: {o} | {} = {}", inner.join(" "), fmt_terms(t));
                }
                if let Some(c) = e.certificate {
                    let _ = writeln!(s, "certificate: {c}");
                }
            }
        }
    }
    if let Some(a) = &m.algebra {
        let _ = writeln!(s, "\n[algebra]");
        match a {
            AlgebraSpec::Builtin(n) => {
                let _ = writeln!(s, "builtin: {n}");
            }
            AlgebraSpec::Explicit(e) => {
                for (n, d, so) in &e.elements {
                    let _ = writeln!(s, "element: {n} {d}{}", sort_suffix(so));
                }
                for (n, t) in &e.d {
                    let _ = writeln!(s, "d: {n} = {}", fmt_terms(t));
                }
                for (o, ins, t) in &e.theta {
                    let _ = writeln!(s, "theta: {o} | {} = {}", ins.join(" "), fmt_terms(t));
                }
            }
        }
    }
    if let Some(ds) = &m.dstructure {
        let _ = writeln!(s, "\n[dstructure]");
        match ds {
            DStructureSpec::Bar => {
                let _ = writeln!(s, "builtin: bar");
            }
            DStructureSpec::Explicit(e) => {
                for (n, d, so) in &e.generators {
                    let _ = writeln!(s, "generator: {n} {d}{}", sort_suffix(so));
                }
                for (n, t) in &e.d {
                    let _ = writeln!(s, "d: {n} = {}", fmt_terms(t));
                }
                for (n, terms) in &e.delta {
                    let body = if terms.is_empty() {
                        "0".to_string()
                    } else {
                        terms
                            .iter()
                            .map(|t| {
                                let c = if t.coeff.is_one() {
                                    String::new()
                                } else if t.coeff.neg().is_one() {
                                    "-".into()
                                } else {
                                    format!("{}*", t.coeff)
                                };
                                format!("{c}[{} | {}]", t.inputs.join(" "), t.op)
                            })
                            .collect::<Vec<_>>()
                            .join(" + ")
                    };
                    let _ = writeln!(s, "delta: {n} = {body}");
                }
            }
        }
    }
    if let Some(c) = &m.complex {
        let _ = writeln!(s, "\n[complex]");
        for (n, d) in &c.generators {
            let _ = writeln!(s, "generator: {n} {d}");
        }
        for (n, t) in &c.d {
            let _ = writeln!(s, "d: {n} = {}", fmt_terms(t));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const UASS: &str = "field: Fp 3\ncap: 4\nwindow: 5\n\n[operad]\nbuiltin: uAss\n\n[algebra]\nbuiltin: dual-numbers\n";

    #[test]
    fn builtin_roundtrip() {
        let m = parse_manifest(UASS).unwrap();
        assert_eq!(serialize(&m), UASS);
        assert!(m.build().unwrap().algebra.is_some());
    }

    #[test]
    fn empty_is_missing_field() {
        let e = parse_manifest("").unwrap_err();
        assert!(e.message.contains("missing field header"));
        let e = parse_manifest("# nothing\n[operad]\nbuiltin: uAss\n").unwrap_err();
        assert_eq!((e.line, e.message.as_str()), (2, "missing field header"));
    }

    #[test]
    fn positions() {
        let e = parse_manifest("field: Q\n[operad]\nbuiltin: uAss\n[algebra]\nelement: 1 0\ntheta: p12 | 1 y = 1\n").unwrap_err();
        assert_eq!((e.line, e.col), (6, 16), "{e}");
        let e = parse_manifest("field: Q\nbogus: 1\n").unwrap_err();
        assert_eq!((e.line, e.col), (2, 1));
        let e = parse_manifest("field: Q\ncap: 2\nwindow: 5\n[operad]\nbuiltin: uAss\n").unwrap_err();
        assert_eq!(e.line, 3);
    }

    #[test]
    fn explicit_roundtrip() {
        let text = "field: Q\ncap: 2\nwindow: 3 -1..2\n\n[operad]\ncomponent: *->*: 1@0\nunit: * = 1\ngamma: 1 | 1 = 1\ncertificate: free-module\n\n[dstructure]\ngenerator: x 1\ngenerator: y 0\nd: x = 0\ndelta: x = -1/2*[y | 1] + [y | 1]\n\n[complex]\ngenerator: a 1\ngenerator: b 0\nd: a = 2*b + -b\n";
        let m = parse_manifest(text).unwrap();
        let again = parse_manifest(&serialize(&m)).unwrap();
        assert_eq!(m, again);
        assert_eq!(serialize(&again), serialize(&m));
        let b = m.build().unwrap();
        assert_eq!(b.dstructure.unwrap().dim(), 2);
        assert_eq!(b.complex.unwrap().homology_in_degree(0).dim, 0);
    }
}
