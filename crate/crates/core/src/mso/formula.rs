//! Formula syntax tree and its prefix s-expression surface syntax.
//!
//! ```text
//! f ::= true | false
//!     | (label a x) | (E1 x y) | (E2 x y) | (E x y) | (le x y) | (lt x y)
//!     | (sib x y) | (= x y) | (in x X) | (P x) | (N x)
//!     | (not f) | (and f*) | (or f*) | (implies f f)
//!     | (exists x f) | (forall x f) | (exists-set X f) | (forall-set X f)
//! top ::= f | (lambda (x y1 .. yl) f)
//! ```
//!
//! `E` is the child relation of the actual tree, `le`/`lt` the ancestor
//! order and `sib` the reflexive-transitive closure of `E2`.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rel {
    E1,
    E2,
    Edge,
    Le,
    Lt,
    Sib,
    Eq,
}

impl Rel {
    pub const ALL: [Rel; 7] = [Rel::E1, Rel::E2, Rel::Edge, Rel::Le, Rel::Lt, Rel::Sib, Rel::Eq];

    pub fn name(self) -> &'static str {
        match self {
            Rel::E1 => "E1",
            Rel::E2 => "E2",
            Rel::Edge => "E",
            Rel::Le => "le",
            Rel::Lt => "lt",
            Rel::Sib => "sib",
            Rel::Eq => "=",
        }
    }

    fn from_name(s: &str) -> Option<Rel> {
        Rel::ALL.into_iter().find(|r| r.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MarkSet {
    P,
    N,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Label(String, String),
    Rel(Rel, String, String),
    In(String, String),
    Mark(MarkSet, String),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Exists(String, Box<Formula>),
    Forall(String, Box<Formula>),
    ExistsSet(String, Box<Formula>),
    ForallSet(String, Box<Formula>),
}

/// Names reserved for the example-mark sets.
pub const P_SET: &str = "P";
pub const N_SET: &str = "N";

impl Formula {
    pub fn rel(r: Rel, x: &str, y: &str) -> Formula {
        Formula::Rel(r, x.into(), y.into())
    }

    pub fn negate(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn exists(x: &str, f: Formula) -> Formula {
        Formula::Exists(x.into(), Box::new(f))
    }

    pub fn forall(x: &str, f: Formula) -> Formula {
        Formula::Forall(x.into(), Box::new(f))
    }

    /// Free first-order variables, sorted.
    pub fn free_fo(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out, false);
        out
    }

    /// Free set variables, including `P`/`N` when used.
    pub fn free_sets(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out, true);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>, sets: bool) {
        let mut add = |v: &String, is_set: bool, bound: &Vec<String>| {
            if is_set == sets && !bound.contains(v) {
                out.insert(v.clone());
            }
        };
        match self {
            Formula::True | Formula::False => {}
            Formula::Label(_, x) => add(x, false, bound),
            Formula::Rel(_, x, y) => {
                add(x, false, bound);
                add(y, false, bound);
            }
            Formula::In(x, s) => {
                add(x, false, bound);
                add(s, true, bound);
            }
            Formula::Mark(m, x) => {
                add(x, false, bound);
                let name = match m {
                    MarkSet::P => P_SET,
                    MarkSet::N => N_SET,
                };
                add(&name.to_string(), true, bound);
            }
            Formula::Not(f) => f.collect_free(bound, out, sets),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.collect_free(bound, out, sets)),
            Formula::Implies(a, b) => {
                a.collect_free(bound, out, sets);
                b.collect_free(bound, out, sets);
            }
            Formula::Exists(v, f) | Formula::Forall(v, f) | Formula::ExistsSet(v, f) | Formula::ForallSet(v, f) => {
                bound.push(v.clone());
                f.collect_free(bound, out, sets);
                bound.pop();
            }
        }
    }

    pub fn quantifier_rank(&self) -> usize {
        match self {
            Formula::Not(f) => f.quantifier_rank(),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().map(Formula::quantifier_rank).max().unwrap_or(0),
            Formula::Implies(a, b) => a.quantifier_rank().max(b.quantifier_rank()),
            Formula::Exists(_, f) | Formula::Forall(_, f) | Formula::ExistsSet(_, f) | Formula::ForallSet(_, f) => {
                1 + f.quantifier_rank()
            }
            _ => 0,
        }
    }

    pub fn has_set_quantifier(&self) -> bool {
        match self {
            Formula::ExistsSet(..) | Formula::ForallSet(..) => true,
            Formula::Not(f) | Formula::Exists(_, f) | Formula::Forall(_, f) => f.has_set_quantifier(),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().any(Formula::has_set_quantifier),
            Formula::Implies(a, b) => a.has_set_quantifier() || b.has_set_quantifier(),
            _ => false,
        }
    }

    /// Label symbols mentioned anywhere.
    pub fn labels(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| {
            if let Formula::Label(a, _) = f {
                out.insert(a.clone());
            }
        });
        out
    }

    fn visit(&self, g: &mut impl FnMut(&Formula)) {
        g(self);
        match self {
            Formula::Not(f) | Formula::Exists(_, f) | Formula::Forall(_, f) | Formula::ExistsSet(_, f) | Formula::ForallSet(_, f) => {
                f.visit(g)
            }
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.visit(g)),
            Formula::Implies(a, b) => {
                a.visit(g);
                b.visit(g);
            }
            _ => {}
        }
    }

    pub fn parse(text: &str) -> Result<Formula> {
        Ok(ParamFormula::parse(text)?.body)
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => write!(f, "true"),
            Formula::False => write!(f, "false"),
            Formula::Label(a, x) => write!(f, "(label {a} {x})"),
            Formula::Rel(r, x, y) => write!(f, "({} {x} {y})", r.name()),
            Formula::In(x, s) => write!(f, "(in {x} {s})"),
            Formula::Mark(MarkSet::P, x) => write!(f, "(P {x})"),
            Formula::Mark(MarkSet::N, x) => write!(f, "(N {x})"),
            Formula::Not(g) => write!(f, "(not {g})"),
            Formula::And(gs) | Formula::Or(gs) => {
                write!(f, "({}", if matches!(self, Formula::And(_)) { "and" } else { "or" })?;
                for g in gs {
                    write!(f, " {g}")?;
                }
                write!(f, ")")
            }
            Formula::Implies(a, b) => write!(f, "(implies {a} {b})"),
            Formula::Exists(v, g) => write!(f, "(exists {v} {g})"),
            Formula::Forall(v, g) => write!(f, "(forall {v} {g})"),
            Formula::ExistsSet(v, g) => write!(f, "(exists-set {v} {g})"),
            Formula::ForallSet(v, g) => write!(f, "(forall-set {v} {g})"),
        }
    }
}

/// A formula `φ(x; y1..yl)` with a fixed instance variable and parameter
/// order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamFormula {
    pub x: String,
    pub params: Vec<String>,
    pub body: Formula,
}

impl ParamFormula {
    /// Without an explicit `lambda`, the instance variable is `x` and the
    /// parameters are the remaining free variables in name order.
    pub fn new(body: Formula) -> ParamFormula {
        let params = body.free_fo().into_iter().filter(|v| v != "x").collect();
        ParamFormula { x: "x".into(), params, body }
    }

    pub fn with_vars(x: &str, params: &[&str], body: Formula) -> ParamFormula {
        ParamFormula { x: x.into(), params: params.iter().map(|s| s.to_string()).collect(), body }
    }

    pub fn ell(&self) -> usize {
        self.params.len()
    }

    pub fn parse(text: &str) -> Result<ParamFormula> {
        let sx = SExpr::parse(text)?;
        if let SExpr::List(items, off) = &sx {
            if let Some(SExpr::Atom(h, _)) = items.first() {
                if h == "lambda" {
                    let [_, SExpr::List(vars, voff), body] = &items[..] else {
                        return Err(syn(*off, "expected (lambda (x y..) body)"));
                    };
                    let names: Vec<String> = vars
                        .iter()
                        .map(|v| match v {
                            SExpr::Atom(a, _) => Ok(a.clone()),
                            SExpr::List(_, o) => Err(syn(*o, "expected a variable name")),
                        })
                        .collect::<Result<_>>()?;
                    let Some((x, params)) = names.split_first() else {
                        return Err(syn(*voff, "lambda needs the instance variable"));
                    };
                    let pf = ParamFormula { x: x.clone(), params: params.to_vec(), body: to_formula(body)? };
                    let declared: BTreeSet<String> = names.iter().cloned().collect();
                    let extra: Vec<String> = pf.body.free_fo().difference(&declared).cloned().collect();
                    if !extra.is_empty() {
                        return Err(Error::FreeVariables(extra.join(" ")));
                    }
                    return Ok(pf);
                }
            }
        }
        Ok(ParamFormula::new(to_formula(&sx)?))
    }
}

impl fmt::Display for ParamFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(lambda ({}", self.x)?;
        for p in &self.params {
            write!(f, " {p}")?;
        }
        write!(f, ") {})", self.body)
    }
}

fn syn(offset: usize, msg: &str) -> Error {
    Error::Syntax { offset, msg: msg.to_owned() }
}

#[derive(Debug)]
enum SExpr {
    Atom(String, usize),
    List(Vec<SExpr>, usize),
}

impl SExpr {
    fn parse(text: &str) -> Result<SExpr> {
        let b = text.as_bytes();
        let mut stack: Vec<(Vec<SExpr>, usize)> = Vec::new();
        let mut done: Option<SExpr> = None;
        let mut i = 0;
        while i < b.len() {
            let c = b[i];
            if c.is_ascii_whitespace() {
                i += 1;
                continue;
            }
            if done.is_some() {
                return Err(syn(i, "trailing input"));
            }
            let item = match c {
                b'(' => {
                    stack.push((Vec::new(), i));
                    i += 1;
                    continue;
                }
                b')' => {
                    let (items, off) = stack.pop().ok_or_else(|| syn(i, "unbalanced `)`"))?;
                    i += 1;
                    SExpr::List(items, off)
                }
                _ => {
                    let s = i;
                    while i < b.len() && !(b[i].is_ascii_whitespace() || b[i] == b'(' || b[i] == b')') {
                        i += 1;
                    }
                    SExpr::Atom(text[s..i].to_owned(), s)
                }
            };
            match stack.last_mut() {
                Some((items, _)) => items.push(item),
                None => done = Some(item),
            }
        }
        if let Some((_, off)) = stack.last() {
            return Err(syn(*off, "unclosed `(`"));
        }
        done.ok_or_else(|| syn(0, "empty formula"))
    }
}

fn to_formula(e: &SExpr) -> Result<Formula> {
    let atom = |e: &SExpr| match e {
        SExpr::Atom(a, _) => Ok(a.clone()),
        SExpr::List(_, o) => Err(syn(*o, "expected a name")),
    };
    match e {
        SExpr::Atom(a, o) => match a.as_str() {
            "true" => Ok(Formula::True),
            "false" => Ok(Formula::False),
            _ => Err(syn(*o, "expected a formula")),
        },
        SExpr::List(items, off) => {
            let Some(SExpr::Atom(head, _)) = items.first() else {
                return Err(syn(*off, "expected an operator"));
            };
            let args = &items[1..];
            let n = args.len();
            let want = |k: usize| if n == k { Ok(()) } else { Err(syn(*off, &format!("`{head}` takes {k} arguments"))) };
            let sub = |i: usize| to_formula(&args[i]).map(Box::new);
            Ok(match head.as_str() {
                "label" => {
                    want(2)?;
                    Formula::Label(atom(&args[0])?, atom(&args[1])?)
                }
                "in" => {
                    want(2)?;
                    Formula::In(atom(&args[0])?, atom(&args[1])?)
                }
                "P" | "N" => {
                    want(1)?;
                    Formula::Mark(if head == "P" { MarkSet::P } else { MarkSet::N }, atom(&args[0])?)
                }
                "not" => {
                    want(1)?;
                    Formula::Not(sub(0)?)
                }
                "and" | "or" => {
                    let fs = args.iter().map(to_formula).collect::<Result<Vec<_>>>()?;
                    if head == "and" {
                        Formula::And(fs)
                    } else {
                        Formula::Or(fs)
                    }
                }
                "implies" => {
                    want(2)?;
                    Formula::Implies(sub(0)?, sub(1)?)
                }
                "exists" | "forall" | "exists-set" | "forall-set" => {
                    want(2)?;
                    let v = atom(&args[0])?;
                    if v == P_SET || v == N_SET {
                        return Err(syn(*off, "`P` and `N` are reserved"));
                    }
                    let f = sub(1)?;
                    match head.as_str() {
                        "exists" => Formula::Exists(v, f),
                        "forall" => Formula::Forall(v, f),
                        "exists-set" => Formula::ExistsSet(v, f),
                        _ => Formula::ForallSet(v, f),
                    }
                }
                h => match Rel::from_name(h) {
                    Some(r) => {
                        want(2)?;
                        Formula::Rel(r, atom(&args[0])?, atom(&args[1])?)
                    }
                    None => return Err(Error::Unsupported(format!("unknown operator `{h}`"))),
                },
            })
        }
    }
}

/// The consistency formula `∀x (P(x) → φ) ∧ (N(x) → ¬φ)` for the
/// parameter formula `φ(x; ȳ)`.
pub fn make_psi(phi: &ParamFormula) -> Result<Formula> {
    let declared: BTreeSet<String> = std::iter::once(phi.x.clone()).chain(phi.params.iter().cloned()).collect();
    let extra: Vec<String> = phi.body.free_fo().difference(&declared).cloned().collect();
    if !extra.is_empty() {
        return Err(Error::FreeVariables(extra.join(" ")));
    }
    if let Some(s) = phi.body.free_sets().iter().next() {
        return Err(Error::FreeVariables(s.clone()));
    }
    let x = phi.x.as_str();
    Ok(Formula::forall(
        x,
        Formula::And(vec![
            Formula::implies(Formula::Mark(MarkSet::P, x.into()), phi.body.clone()),
            Formula::implies(Formula::Mark(MarkSet::N, x.into()), Formula::negate(phi.body.clone())),
        ]),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let src = "(and (exists z (and (or (E x z) (E z x)) (or (E z y) (E y z)))) (not (= x y)))";
        let f = Formula::parse(src).unwrap();
        assert_eq!(f.to_string(), src);
        assert_eq!(f.quantifier_rank(), 1);
        let pf = ParamFormula::parse(src).unwrap();
        assert_eq!(pf.params, vec!["y".to_string()]);
        let l = ParamFormula::parse("(lambda (u b a) (and (E1 a u) (le b u)))").unwrap();
        assert_eq!((l.x.as_str(), l.params.clone()), ("u", vec!["b".to_string(), "a".to_string()]));
        assert_eq!(ParamFormula::parse(&l.to_string()).unwrap(), l);
    }

    #[test]
    fn errors() {
        assert!(matches!(Formula::parse("(and (E1 x y)"), Err(Error::Syntax { offset: 0, .. })));
        assert!(matches!(Formula::parse("(foo x)"), Err(Error::Unsupported(_))));
        assert!(matches!(Formula::parse("(E1 x)"), Err(Error::Syntax { .. })));
        assert!(matches!(ParamFormula::parse("(lambda (x) (E1 x y))"), Err(Error::FreeVariables(_))));
        assert!(matches!(Formula::parse("(exists P (P P))"), Err(Error::Syntax { .. })));
    }

    #[test]
    fn psi_template() {
        let phi = ParamFormula::parse("(label a x)").unwrap();
        let psi = make_psi(&phi).unwrap();
        assert_eq!(psi.to_string(), "(forall x (and (implies (P x) (label a x)) (implies (N x) (not (label a x)))))");
        assert_eq!(psi.free_sets().into_iter().collect::<Vec<_>>(), vec!["N".to_string(), "P".to_string()]);
        assert!(psi.free_fo().is_empty());
        let phi = ParamFormula::parse("(exists z (E1 z x))").unwrap();
        assert_eq!(phi.ell(), 0);
        assert!(make_psi(&phi).unwrap().to_string().contains("(exists z (E1 z x))"));
        let bad = ParamFormula::with_vars("x", &[], Formula::parse("(E1 y x)").unwrap());
        assert!(matches!(make_psi(&bad), Err(Error::FreeVariables(_))));
    }
}
