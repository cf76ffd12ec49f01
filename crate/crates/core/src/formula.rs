//! Positive-form formulas of the μ-calculus of knowledge: AST, parser, printer, macros.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    True,
    False,
    Atom(String),
    NegAtom(String),
    Var(String),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    AX(Box<Formula>),
    EX(Box<Formula>),
    K(String, Box<Formula>),
    P(String, Box<Formula>),
    Mu(String, Box<Formula>),
    Nu(String, Box<Formula>),
}

use Formula::*;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormulaError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("unknown macro `{0}`")]
    UnknownMacro(String),
    #[error("formula has free variables: {0}")]
    NotClosed(String),
}

pub fn atom(p: &str) -> Formula {
    Atom(p.to_string())
}
pub fn neg(p: &str) -> Formula {
    NegAtom(p.to_string())
}
pub fn var(z: &str) -> Formula {
    Var(z.to_string())
}
pub fn and(l: Formula, r: Formula) -> Formula {
    And(Box::new(l), Box::new(r))
}
pub fn or(l: Formula, r: Formula) -> Formula {
    Or(Box::new(l), Box::new(r))
}
pub fn ax(f: Formula) -> Formula {
    AX(Box::new(f))
}
pub fn ex(f: Formula) -> Formula {
    EX(Box::new(f))
}
pub fn k(a: &str, f: Formula) -> Formula {
    K(a.to_string(), Box::new(f))
}
pub fn p(a: &str, f: Formula) -> Formula {
    P(a.to_string(), Box::new(f))
}
pub fn mu(z: &str, f: Formula) -> Formula {
    Mu(z.to_string(), Box::new(f))
}
pub fn nu(z: &str, f: Formula) -> Formula {
    Nu(z.to_string(), Box::new(f))
}

impl Formula {
    pub fn children(&self) -> Vec<&Formula> {
        match self {
            True | False | Atom(_) | NegAtom(_) | Var(_) => vec![],
            And(l, r) | Or(l, r) => vec![l, r],
            AX(f) | EX(f) | K(_, f) | P(_, f) | Mu(_, f) | Nu(_, f) => vec![f],
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            Var(z) => {
                if !bound.contains(z) {
                    out.insert(z.clone());
                }
            }
            Mu(z, f) | Nu(z, f) => {
                bound.push(z.clone());
                f.collect_free(bound, out);
                bound.pop();
            }
            _ => {
                for c in self.children() {
                    c.collect_free(bound, out);
                }
            }
        }
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// Every variable name occurring in the formula, bound or free.
    pub fn var_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.walk(&mut |f| match f {
            Var(z) | Mu(z, _) | Nu(z, _) => {
                out.insert(z.clone());
            }
            _ => {}
        });
        out
    }

    pub fn agents(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.walk(&mut |f| {
            if let K(a, _) | P(a, _) = f {
                out.insert(a.clone());
            }
        });
        out
    }

    pub fn atoms(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.walk(&mut |f| {
            if let Atom(q) | NegAtom(q) = f {
                out.insert(q.clone());
            }
        });
        out
    }

    pub fn walk<F: FnMut(&Formula)>(&self, visit: &mut F) {
        visit(self);
        for c in self.children() {
            c.walk(visit);
        }
    }

    /// No epistemic operator.
    pub fn is_plain(&self) -> bool {
        self.agents().is_empty()
    }

    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    /// Number of nested AX/EX operators along the deepest branch.
    pub fn modal_depth(&self) -> usize {
        let below = self.children().iter().map(|c| c.modal_depth()).max().unwrap_or(0);
        match self {
            AX(_) | EX(_) => below + 1,
            _ => below,
        }
    }

    /// Negation of a positive formula, kept in positive form.
    pub fn dual(&self) -> Formula {
        match self {
            True => False,
            False => True,
            Atom(q) => NegAtom(q.clone()),
            NegAtom(q) => Atom(q.clone()),
            Var(z) => Var(z.clone()),
            And(l, r) => or(l.dual(), r.dual()),
            Or(l, r) => and(l.dual(), r.dual()),
            AX(f) => ex(f.dual()),
            EX(f) => ax(f.dual()),
            K(a, f) => P(a.clone(), Box::new(f.dual())),
            P(a, f) => K(a.clone(), Box::new(f.dual())),
            Mu(z, f) => Nu(z.clone(), Box::new(f.dual())),
            Nu(z, f) => Mu(z.clone(), Box::new(f.dual())),
        }
    }

    /// Renames binders so that each is unique and distinct from every free variable.
    pub fn normalize(&self) -> Formula {
        let mut used: BTreeSet<String> = self.free_vars();
        self.rename(&mut used, &mut Vec::new())
    }

    fn rename(&self, used: &mut BTreeSet<String>, scope: &mut Vec<(String, String)>) -> Formula {
        match self {
            Var(z) => {
                let mapped = scope.iter().rev().find(|(from, _)| from == z).map(|(_, to)| to.clone());
                Var(mapped.unwrap_or_else(|| z.clone()))
            }
            Mu(z, f) | Nu(z, f) => {
                let fresh = fresh_name(z, used);
                used.insert(fresh.clone());
                scope.push((z.clone(), fresh.clone()));
                let body = f.rename(used, scope);
                scope.pop();
                match self {
                    Mu(..) => Mu(fresh, Box::new(body)),
                    _ => Nu(fresh, Box::new(body)),
                }
            }
            True => True,
            False => False,
            Atom(q) => Atom(q.clone()),
            NegAtom(q) => NegAtom(q.clone()),
            And(l, r) => and(l.rename(used, scope), r.rename(used, scope)),
            Or(l, r) => or(l.rename(used, scope), r.rename(used, scope)),
            AX(f) => ax(f.rename(used, scope)),
            EX(f) => ex(f.rename(used, scope)),
            K(a, f) => K(a.clone(), Box::new(f.rename(used, scope))),
            P(a, f) => P(a.clone(), Box::new(f.rename(used, scope))),
        }
    }
}

fn fresh_name(base: &str, used: &BTreeSet<String>) -> String {
    if !used.contains(base) {
        return base.to_string();
    }
    (1..).map(|k| format!("{}_{}", base, k)).find(|c| !used.contains(c)).unwrap()
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            True => write!(f, "true"),
            False => write!(f, "false"),
            Atom(q) => write!(f, "{}", q),
            NegAtom(q) => write!(f, "!{}", q),
            Var(z) => write!(f, "{}", z),
            And(l, r) => write!(f, "({} & {})", l, r),
            Or(l, r) => write!(f, "({} | {})", l, r),
            AX(g) => write!(f, "(AX {})", g),
            EX(g) => write!(f, "(EX {})", g),
            K(a, g) => write!(f, "(K[{}] {})", a, g),
            P(a, g) => write!(f, "(P[{}] {})", a, g),
            Mu(z, g) => write!(f, "(mu {}. {})", z, g),
            Nu(z, g) => write!(f, "(nu {}. {})", z, g),
        }
    }
}

pub const MACROS: &[&str] =
    &["EF", "AF", "EG", "AG", "EDiamondBox", "EBoxDiamond", "ABoxDiamond", "ADiamondBox", "AGAF"];

/// Fixpoint expansion of a derived operator; bound names avoid every name in `arg`.
pub fn expand_macro(name: &str, arg: Formula) -> Result<Formula, FormulaError> {
    let taken = arg.var_names();
    let z = fresh_name("Z", &taken);
    let y = {
        let mut t = taken.clone();
        t.insert(z.clone());
        fresh_name("Y", &t)
    };
    let f = match name {
        "EF" => mu(&z, or(arg, ex(var(&z)))),
        "AF" => mu(&z, or(arg, ax(var(&z)))),
        "EG" => nu(&z, and(arg, ex(var(&z)))),
        "AG" => nu(&z, and(arg, ax(var(&z)))),
        "EDiamondBox" => mu(&z, or(nu(&y, and(arg, ex(var(&y)))), ex(var(&z)))),
        "EBoxDiamond" => nu(&z, mu(&y, ex(or(and(arg, var(&z)), var(&y))))),
        "ABoxDiamond" | "AGAF" => nu(&z, and(mu(&y, or(arg, ax(var(&y)))), ax(var(&z)))),
        "ADiamondBox" => mu(&z, nu(&y, ax(and(or(arg, var(&z)), var(&y))))),
        other => return Err(FormulaError::UnknownMacro(other.to_string())),
    };
    Ok(f)
}

// ---------------------------------------------------------------- parser

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Bang,
    Amp,
    Bar,
    LParen,
    RParen,
    LBrack,
    RBrack,
    Dot,
    Eof,
}

struct Lexer {
    toks: Vec<(Tok, usize, usize)>,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

impl Lexer {
    fn new(text: &str) -> Result<Lexer, FormulaError> {
        let mut toks = Vec::new();
        let (mut line, mut col) = (1, 1);
        let chars: Vec<char> = text.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let here = (line, col);
            if c == '#' {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            if c == '\n' {
                line += 1;
                col = 1;
                i += 1;
                continue;
            }
            if c.is_whitespace() {
                i += 1;
                col += 1;
                continue;
            }
            let single = match c {
                '!' | '~' => Some(Tok::Bang),
                '&' => Some(Tok::Amp),
                '|' => Some(Tok::Bar),
                '(' => Some(Tok::LParen),
                ')' => Some(Tok::RParen),
                '[' => Some(Tok::LBrack),
                ']' => Some(Tok::RBrack),
                '.' => Some(Tok::Dot),
                _ => None,
            };
            if let Some(t) = single {
                toks.push((t, here.0, here.1));
                i += 1;
                col += 1;
                continue;
            }
            if is_ident_start(c) {
                let start = i;
                while i < chars.len() && is_ident_char(chars[i]) {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                col += i - start;
                toks.push((Tok::Ident(s), here.0, here.1));
                continue;
            }
            return Err(FormulaError::Syntax { line, col, msg: format!("unexpected character `{}`", c) });
        }
        toks.push((Tok::Eof, line, col));
        Ok(Lexer { toks })
    }
}

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
    bound: Vec<String>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)].0
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, FormulaError> {
        let (_, line, col) = self.toks[self.pos];
        Err(FormulaError::Syntax { line, col, msg: msg.into() })
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), FormulaError> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected {}", what))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, FormulaError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.err(format!("expected {}", what)),
        }
    }

    fn disj(&mut self) -> Result<Formula, FormulaError> {
        let mut l = self.conj()?;
        while *self.peek() == Tok::Bar {
            self.bump();
            let r = self.conj()?;
            l = or(l, r);
        }
        Ok(l)
    }

    fn conj(&mut self) -> Result<Formula, FormulaError> {
        let mut l = self.unary()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            let r = self.unary()?;
            l = and(l, r);
        }
        Ok(l)
    }

    fn binder(&mut self) -> Result<(String, Formula), FormulaError> {
        let z = self.ident("a variable after the fixpoint keyword")?;
        self.expect(Tok::Dot, "`.` after the bound variable")?;
        self.bound.push(z.clone());
        let body = self.disj();
        self.bound.pop();
        Ok((z, body?))
    }

    fn unary(&mut self) -> Result<Formula, FormulaError> {
        match self.peek().clone() {
            Tok::Bang => {
                self.bump();
                match self.peek().clone() {
                    Tok::Ident(s) if !self.is_keyword(&s) && !self.bound.contains(&s) && !starts_upper(&s) => {
                        self.bump();
                        Ok(NegAtom(s))
                    }
                    _ => self.err("negation applies only to atoms"),
                }
            }
            Tok::LParen => {
                self.bump();
                let f = self.disj()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            Tok::Ident(s) => {
                match s.as_str() {
                    "true" => {
                        self.bump();
                        return Ok(True);
                    }
                    "false" => {
                        self.bump();
                        return Ok(False);
                    }
                    "mu" | "nu" => {
                        self.bump();
                        let (z, body) = self.binder()?;
                        return Ok(if s == "mu" { mu(&z, body) } else { nu(&z, body) });
                    }
                    "AX" => {
                        self.bump();
                        return Ok(ax(self.unary()?));
                    }
                    "EX" => {
                        self.bump();
                        return Ok(ex(self.unary()?));
                    }
                    "K" | "P" if *self.peek2() == Tok::LBrack => {
                        self.bump();
                        self.bump();
                        let a = self.ident("an agent name")?;
                        self.expect(Tok::RBrack, "`]`")?;
                        let f = self.unary()?;
                        return Ok(if s == "K" { k(&a, f) } else { p(&a, f) });
                    }
                    m if MACROS.contains(&m) => {
                        self.bump();
                        let f = self.unary()?;
                        return expand_macro(m, f);
                    }
                    _ => {}
                }
                self.bump();
                if self.bound.contains(&s) || starts_upper(&s) {
                    Ok(Var(s))
                } else {
                    Ok(Atom(s))
                }
            }
            Tok::Eof => self.err("unexpected end of input"),
            t => self.err(format!("unexpected token {:?}", t)),
        }
    }

    fn is_keyword(&self, s: &str) -> bool {
        matches!(s, "true" | "false" | "mu" | "nu" | "AX" | "EX") || MACROS.contains(&s)
    }
}

fn starts_upper(s: &str) -> bool {
    s.chars().next().map_or(false, |c| c.is_ascii_uppercase())
}

/// Parses a formula and alpha-renames its binders.
pub fn parse_formula(text: &str) -> Result<Formula, FormulaError> {
    let lx = Lexer::new(text)?;
    let mut ps = Parser { toks: lx.toks, pos: 0, bound: Vec::new() };
    let f = ps.disj()?;
    if *ps.peek() != Tok::Eof {
        return ps.err("trailing input");
    }
    Ok(f.normalize())
}

pub fn parse_closed_formula(text: &str) -> Result<Formula, FormulaError> {
    let f = parse_formula(text)?;
    let free = f.free_vars();
    if free.is_empty() {
        Ok(f)
    } else {
        Err(FormulaError::NotClosed(free.into_iter().collect::<Vec<_>>().join(", ")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar_forced_shape() {
        let f = parse_formula("mu Z. p | EX Z").unwrap();
        assert_eq!(f, mu("Z", or(atom("p"), ex(var("Z")))));
    }

    #[test]
    fn common_knowledge_shape() {
        let f = parse_formula("nu Z. (q & K[a] Z & K[b] Z)").unwrap();
        assert_eq!(f, nu("Z", and(and(atom("q"), k("a", var("Z"))), k("b", var("Z")))));
    }

    #[test]
    fn negated_fixpoint_is_rejected() {
        let e = parse_formula("mu Z. !(EX Z)").unwrap_err();
        assert!(matches!(e, FormulaError::Syntax { line: 1, col: 8, .. }), "{:?}", e);
        assert!(parse_formula("mu Z. !Z").is_err());
    }

    #[test]
    fn precedence() {
        let f = parse_formula("p | q & r").unwrap();
        assert_eq!(f, or(atom("p"), and(atom("q"), atom("r"))));
        let g = parse_formula("K[a] p & EX q").unwrap();
        assert_eq!(g, and(k("a", atom("p")), ex(atom("q"))));
    }

    #[test]
    fn binders_are_renamed_apart() {
        let f = parse_formula("(mu Z. EX Z) & (mu Z. AX Z)").unwrap();
        assert_eq!(f, and(mu("Z", ex(var("Z"))), mu("Z_1", ax(var("Z_1")))));
        let g = parse_formula("X & mu X. EX X").unwrap();
        assert_eq!(g, and(var("X"), mu("X_1", ex(var("X_1")))));
    }

    #[test]
    fn printer_round_trip() {
        for src in [
            "mu Z. p | EX Z",
            "nu Z. (q & K[a] Z & K[b] Z)",
            "K[a] (EF p) | P[b] !q",
            "EDiamondBox (p & K[a] q)",
            "true & false | Y",
        ] {
            let f = parse_formula(src).unwrap();
            assert_eq!(parse_formula(&f.to_string()).unwrap(), f, "{}", f);
        }
        assert_eq!(parse_formula("mu Z. p | EX Z").unwrap().to_string(), "(mu Z. (p | (EX Z)))");
    }

    #[test]
    fn macros_expand() {
        assert_eq!(expand_macro("EF", atom("p")).unwrap(), mu("Z", or(atom("p"), ex(var("Z")))));
        assert_eq!(
            expand_macro("EDiamondBox", atom("p")).unwrap(),
            mu("Z", or(nu("Y", and(atom("p"), ex(var("Y")))), ex(var("Z"))))
        );
        assert_eq!(
            expand_macro("AGAF", atom("p")).unwrap(),
            nu("Z", and(mu("Y", or(atom("p"), ax(var("Y")))), ax(var("Z"))))
        );
        assert!(matches!(expand_macro("XYZ", True), Err(FormulaError::UnknownMacro(_))));
    }

    #[test]
    fn macro_avoids_capture() {
        let f = parse_formula("mu Z. EF (p & EX Z)").unwrap();
        assert!(f.free_vars().is_empty());
        match &f {
            Mu(z, body) => match body.as_ref() {
                Mu(z2, _) => assert_ne!(z, z2),
                other => panic!("{}", other),
            },
            other => panic!("{}", other),
        }
    }

    #[test]
    fn dual_is_involutive() {
        let f = parse_formula("nu Z. (p & K[a] (EX Z)) | P[b] !q").unwrap();
        assert_eq!(f.dual().dual(), f);
        assert_eq!(parse_formula("AX p").unwrap().dual(), ex(neg("p")));
    }

    #[test]
    fn primed_atoms_lex() {
        let f = parse_formula("a'1 & !end_2").unwrap();
        assert_eq!(f, and(atom("a'1"), neg("end_2")));
    }
}
