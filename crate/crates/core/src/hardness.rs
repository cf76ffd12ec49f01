//! Hardness instances: context star-free expressions turned into (system, formula) pairs
//! whose query holds iff the expression's language is non-empty.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::checker::{model_check, CheckOptions};
use crate::error::Result;
use crate::formula::{self as fm, expand_macro, Formula};
use crate::mas::Mas;
use crate::oracle::{tree_eval_bounded, BoundedTree};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HardnessError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("symbol {0} is not in the alphabet")]
    Symbol(String),
    #[error("complemented expression {0} accepts the empty word")]
    EpsilonInComplement(String),
    #[error("membership is undefined for expressions with holes")]
    Hole,
    #[error("hole {0} occurs more than once")]
    RepeatedHole(usize),
    #[error("complement inside an automaton expression")]
    Complement,
    #[error("at most 64 holes per context")]
    TooManyHoles,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum StarFreeExpr {
    Empty,
    Eps,
    Sym(String),
    /// Placeholder x_j of a context.
    Hole(usize),
    Concat(Box<StarFreeExpr>, Box<StarFreeExpr>),
    Union(Box<StarFreeExpr>, Box<StarFreeExpr>),
    Complement(Box<StarFreeExpr>),
}

use StarFreeExpr as Sfx;

pub fn concat(a: Sfx, b: Sfx) -> Sfx {
    Sfx::Concat(Box::new(a), Box::new(b))
}

pub fn union(a: Sfx, b: Sfx) -> Sfx {
    Sfx::Union(Box::new(a), Box::new(b))
}

pub fn complement(a: Sfx) -> Sfx {
    Sfx::Complement(Box::new(a))
}

pub fn sym(a: &str) -> Sfx {
    Sfx::Sym(a.to_string())
}

impl StarFreeExpr {
    fn prec(&self) -> u8 {
        match self {
            Sfx::Union(..) => 0,
            Sfx::Concat(..) => 1,
            _ => 2,
        }
    }

    fn fmt_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.prec() < min {
            write!(f, "(")?;
            self.fmt_at(f, 0)?;
            return write!(f, ")");
        }
        match self {
            Sfx::Empty => write!(f, "empty"),
            Sfx::Eps => write!(f, "eps"),
            Sfx::Sym(a) => write!(f, "{}", a),
            Sfx::Hole(j) => write!(f, "x{}", j),
            Sfx::Concat(a, b) => {
                a.fmt_at(f, 1)?;
                write!(f, " . ")?;
                b.fmt_at(f, 2)
            }
            Sfx::Union(a, b) => {
                a.fmt_at(f, 0)?;
                write!(f, " + ")?;
                b.fmt_at(f, 1)
            }
            Sfx::Complement(a) => {
                write!(f, "~")?;
                a.fmt_at(f, 2)
            }
        }
    }

    pub fn has_complement(&self) -> bool {
        match self {
            Sfx::Complement(_) => true,
            Sfx::Concat(a, b) | Sfx::Union(a, b) => a.has_complement() || b.has_complement(),
            _ => false,
        }
    }

    /// Nesting depth of complements.
    pub fn complement_depth(&self) -> usize {
        match self {
            Sfx::Complement(a) => 1 + a.complement_depth(),
            Sfx::Concat(a, b) | Sfx::Union(a, b) => a.complement_depth().max(b.complement_depth()),
            _ => 0,
        }
    }

    pub fn symbols(&self, out: &mut BTreeSet<String>) {
        match self {
            Sfx::Sym(a) => {
                out.insert(a.clone());
            }
            Sfx::Concat(a, b) | Sfx::Union(a, b) => {
                a.symbols(out);
                b.symbols(out);
            }
            Sfx::Complement(a) => a.symbols(out),
            _ => {}
        }
    }
}

impl fmt::Display for StarFreeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(f, 0)
    }
}

// ---------------------------------------------------------------- expression files

#[derive(Debug, Clone)]
pub struct SfxFile {
    pub alphabet: Vec<String>,
    pub expr: StarFreeExpr,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Dot,
    Plus,
    Tilde,
    LParen,
    RParen,
    Comma,
    Eq,
}

fn lex(line: &str, lno: usize) -> std::result::Result<Vec<Tok>, HardnessError> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let t = match c {
            ' ' | '\t' | '\r' => {
                i += 1;
                continue;
            }
            '.' => Tok::Dot,
            '+' | '|' => Tok::Plus,
            '~' | '!' => Tok::Tilde,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            '=' => Tok::Eq,
            c if c.is_ascii_alphanumeric() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Tok::Ident(chars[start..i].iter().collect()));
                continue;
            }
            other => return Err(HardnessError::Parse { line: lno, msg: format!("unexpected character {:?}", other) }),
        };
        out.push(t);
        i += 1;
    }
    Ok(out)
}

fn valid_symbol(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_lowercase())
        && cs.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit())
        && !matches!(s, "eps" | "empty")
}

struct Def {
    params: Vec<String>,
    body: Vec<Tok>,
}

struct ExprParser<'a> {
    toks: &'a [Tok],
    pos: usize,
    line: usize,
    defs: &'a BTreeMap<String, Def>,
    env: &'a BTreeMap<String, Sfx>,
    alphabet: Option<&'a BTreeSet<String>>,
    depth: usize,
}

impl<'a> ExprParser<'a> {
    fn err(&self, msg: impl Into<String>) -> HardnessError {
        HardnessError::Parse { line: self.line, msg: msg.into() }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn union(&mut self) -> std::result::Result<Sfx, HardnessError> {
        let mut e = self.concat()?;
        while self.eat(&Tok::Plus) {
            e = union(e, self.concat()?);
        }
        Ok(e)
    }

    fn concat(&mut self) -> std::result::Result<Sfx, HardnessError> {
        let mut e = self.unary()?;
        while self.eat(&Tok::Dot) {
            e = concat(e, self.unary()?);
        }
        Ok(e)
    }

    fn unary(&mut self) -> std::result::Result<Sfx, HardnessError> {
        if self.eat(&Tok::Tilde) {
            return Ok(complement(self.unary()?));
        }
        match self.peek().cloned() {
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.union()?;
                if !self.eat(&Tok::RParen) {
                    return Err(self.err("expected ')'"));
                }
                Ok(e)
            }
            Some(Tok::Ident(id)) => {
                self.pos += 1;
                self.ident(&id)
            }
            Some(t) => Err(self.err(format!("unexpected token {:?}", t))),
            None => Err(self.err("unexpected end of expression")),
        }
    }

    fn ident(&mut self, id: &str) -> std::result::Result<Sfx, HardnessError> {
        if id == "eps" {
            return Ok(Sfx::Eps);
        }
        if id == "empty" {
            return Ok(Sfx::Empty);
        }
        if let Some(e) = self.env.get(id) {
            return Ok(e.clone());
        }
        if id.starts_with(|c: char| c.is_ascii_uppercase()) {
            let def = self.defs.get(id).ok_or_else(|| self.err(format!("undefined name {}", id)))?;
            let mut args = Vec::new();
            if self.eat(&Tok::LParen) {
                loop {
                    args.push(self.union()?);
                    if self.eat(&Tok::RParen) {
                        break;
                    }
                    if !self.eat(&Tok::Comma) {
                        return Err(self.err("expected ',' or ')'"));
                    }
                }
            }
            if args.len() != def.params.len() {
                return Err(self.err(format!("{} takes {} arguments, got {}", id, def.params.len(), args.len())));
            }
            if self.depth > 64 {
                return Err(self.err("definitions nested too deeply"));
            }
            let env: BTreeMap<String, Sfx> = def.params.iter().cloned().zip(args).collect();
            let mut sub = ExprParser {
                toks: &def.body,
                pos: 0,
                line: self.line,
                defs: self.defs,
                env: &env,
                alphabet: self.alphabet,
                depth: self.depth + 1,
            };
            return sub.whole();
        }
        if !valid_symbol(id) {
            return Err(self.err(format!("invalid symbol {}", id)));
        }
        if let Some(al) = self.alphabet {
            if !al.contains(id) {
                return Err(self.err(format!("symbol {} is not in the alphabet", id)));
            }
        }
        Ok(sym(id))
    }

    fn whole(&mut self) -> std::result::Result<Sfx, HardnessError> {
        let e = self.union()?;
        if self.pos != self.toks.len() {
            return Err(self.err(format!("trailing input at {:?}", self.toks[self.pos])));
        }
        Ok(e)
    }
}

/// Reads `alphabet:` and `Name(params) = expr` lines; the last definition is the result.
pub fn parse_sfx(text: &str) -> std::result::Result<SfxFile, HardnessError> {
    let mut alphabet: Option<Vec<String>> = None;
    let mut defs: BTreeMap<String, Def> = BTreeMap::new();
    let mut last: Option<(usize, Vec<Tok>)> = None;
    for (i, raw) in text.lines().enumerate() {
        let lno = i + 1;
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("alphabet:") {
            let syms: Vec<String> = rest.split_whitespace().map(String::from).collect();
            if let Some(bad) = syms.iter().find(|s| !valid_symbol(s)) {
                return Err(HardnessError::Parse { line: lno, msg: format!("invalid symbol {}", bad) });
            }
            alphabet = Some(syms);
            continue;
        }
        let toks = lex(line, lno)?;
        let Some(eq) = toks.iter().position(|t| *t == Tok::Eq) else {
            last = Some((lno, toks));
            continue;
        };
        let head = &toks[..eq];
        let (name, params) = match head {
            [Tok::Ident(n)] => (n.clone(), Vec::new()),
            [Tok::Ident(n), Tok::LParen, rest @ .., Tok::RParen] => {
                let mut ps = Vec::new();
                for (k, t) in rest.iter().enumerate() {
                    match (k % 2, t) {
                        (0, Tok::Ident(p)) => ps.push(p.clone()),
                        (1, Tok::Comma) => {}
                        _ => return Err(HardnessError::Parse { line: lno, msg: "malformed parameter list".into() }),
                    }
                }
                (n.clone(), ps)
            }
            _ => return Err(HardnessError::Parse { line: lno, msg: "malformed definition head".into() }),
        };
        if !name.starts_with(|c: char| c.is_ascii_uppercase()) {
            return Err(HardnessError::Parse { line: lno, msg: format!("definition names start uppercase: {}", name) });
        }
        let body = toks[eq + 1..].to_vec();
        if params.is_empty() {
            last = Some((lno, vec![Tok::Ident(name.clone())]));
        } else {
            last = None;
        }
        defs.insert(name, Def { params, body });
    }
    let (lno, toks) = last.ok_or(HardnessError::Parse { line: 0, msg: "no top-level expression".into() })?;
    let alpha_set: Option<BTreeSet<String>> = alphabet.as_ref().map(|a| a.iter().cloned().collect());
    let env = BTreeMap::new();
    let mut p = ExprParser { toks: &toks, pos: 0, line: lno, defs: &defs, env: &env, alphabet: alpha_set.as_ref(), depth: 0 };
    let expr = p.whole()?;
    let alphabet = alphabet.unwrap_or_else(|| {
        let mut s = BTreeSet::new();
        expr.symbols(&mut s);
        s.into_iter().collect()
    });
    if alphabet.is_empty() {
        return Err(HardnessError::Parse { line: 0, msg: "empty alphabet".into() });
    }
    Ok(SfxFile { alphabet, expr })
}

// ---------------------------------------------------------------- membership

pub type Word = Vec<String>;

pub fn word_string(w: &[String]) -> String {
    if w.is_empty() {
        "eps".to_string()
    } else if w.iter().all(|s| s.len() == 1) {
        w.concat()
    } else {
        w.join(".")
    }
}

/// `ok[i][j]` iff w[i..j] ∈ L(e).
fn table(e: &Sfx, w: &[String]) -> std::result::Result<Vec<Vec<bool>>, HardnessError> {
    let n = w.len();
    let mut t = vec![vec![false; n + 1]; n + 1];
    match e {
        Sfx::Empty => {}
        Sfx::Eps => (0..=n).for_each(|i| t[i][i] = true),
        Sfx::Sym(a) => (0..n).for_each(|i| t[i][i + 1] = w[i] == *a),
        Sfx::Hole(_) => return Err(HardnessError::Hole),
        Sfx::Union(a, b) => {
            let (ta, tb) = (table(a, w)?, table(b, w)?);
            for i in 0..=n {
                for j in i..=n {
                    t[i][j] = ta[i][j] || tb[i][j];
                }
            }
        }
        Sfx::Concat(a, b) => {
            let (ta, tb) = (table(a, w)?, table(b, w)?);
            for i in 0..=n {
                for j in i..=n {
                    t[i][j] = (i..=j).any(|k| ta[i][k] && tb[k][j]);
                }
            }
        }
        Sfx::Complement(a) => {
            let ta = table(a, w)?;
            for i in 0..=n {
                for j in i..=n {
                    t[i][j] = !ta[i][j];
                }
            }
        }
    }
    Ok(t)
}

/// w ∈ L(r), complement taken relative to Σ*.
pub fn sf_membership(r: &Sfx, alphabet: &[String], w: &[String]) -> std::result::Result<bool, HardnessError> {
    if let Some(bad) = w.iter().find(|a| !alphabet.contains(a)) {
        return Err(HardnessError::Symbol(bad.clone()));
    }
    Ok(table(r, w)?[0][w.len()])
}

/// Σ^{≤len} in length-lexicographic order.
pub fn words_upto(alphabet: &[String], len: usize) -> Vec<Word> {
    let mut out = vec![Vec::new()];
    let mut layer: Vec<Word> = vec![Vec::new()];
    for _ in 0..len {
        let mut next = Vec::new();
        for w in &layer {
            for a in alphabet {
                let mut v = w.clone();
                v.push(a.clone());
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// A shortest word of L(r) of length at most `len`, if any.
pub fn shortest_member(r: &Sfx, alphabet: &[String], len: usize) -> std::result::Result<Option<Word>, HardnessError> {
    for w in words_upto(alphabet, len) {
        if sf_membership(r, alphabet, &w)? {
            return Ok(Some(w));
        }
    }
    Ok(None)
}

// ---------------------------------------------------------------- Moore automata

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Letter {
    Sym(String),
    Hole(usize),
}

/// State-labeled automaton; state 0 is the unlabeled start state.
#[derive(Debug, Clone)]
pub struct MooreAutomaton {
    pub labels: Vec<Option<Letter>>,
    pub trans: BTreeSet<(usize, usize)>,
    pub finals: BTreeSet<usize>,
}

impl MooreAutomaton {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn succ(&self, q: usize) -> Vec<usize> {
        self.trans.range((q, 0)..(q + 1, 0)).map(|&(_, r)| r).collect()
    }

    pub fn hole_state(&self, j: usize) -> Option<usize> {
        self.labels.iter().position(|l| *l == Some(Letter::Hole(j)))
    }

    pub fn accepts(&self, w: &[Letter]) -> bool {
        let mut cur: BTreeSet<usize> = BTreeSet::from([0]);
        for a in w {
            cur = cur
                .iter()
                .flat_map(|&q| self.succ(q))
                .filter(|&r| self.labels[r].as_ref() == Some(a))
                .collect();
        }
        cur.iter().any(|q| self.finals.contains(q))
    }

    /// (Q_f^x, Q_f^{¬x}) for hole j: finals reachable only through q_x, and the rest.
    pub fn final_partition(&self, j: usize) -> (BTreeSet<usize>, BTreeSet<usize>) {
        let hx = self.hole_state(j);
        let mut seen = BTreeSet::from([0]);
        let mut queue = VecDeque::from([0]);
        while let Some(q) = queue.pop_front() {
            for r in self.succ(q) {
                if Some(r) != hx && seen.insert(r) {
                    queue.push_back(r);
                }
            }
        }
        let without: BTreeSet<usize> = self.finals.iter().copied().filter(|q| seen.contains(q)).collect();
        let with = self.finals.difference(&without).copied().collect();
        (with, without)
    }
}

struct Lin {
    nullable: bool,
    first: BTreeSet<usize>,
    last: BTreeSet<usize>,
}

fn linearize(
    e: &Sfx,
    labels: &mut Vec<Option<Letter>>,
    follow: &mut Vec<BTreeSet<usize>>,
) -> std::result::Result<Lin, HardnessError> {
    Ok(match e {
        Sfx::Empty => Lin { nullable: false, first: BTreeSet::new(), last: BTreeSet::new() },
        Sfx::Eps => Lin { nullable: true, first: BTreeSet::new(), last: BTreeSet::new() },
        Sfx::Sym(_) | Sfx::Hole(_) => {
            let p = labels.len();
            labels.push(Some(match e {
                Sfx::Sym(a) => Letter::Sym(a.clone()),
                Sfx::Hole(j) => Letter::Hole(*j),
                _ => unreachable!(),
            }));
            follow.push(BTreeSet::new());
            Lin { nullable: false, first: BTreeSet::from([p]), last: BTreeSet::from([p]) }
        }
        Sfx::Union(a, b) => {
            let (la, lb) = (linearize(a, labels, follow)?, linearize(b, labels, follow)?);
            Lin {
                nullable: la.nullable || lb.nullable,
                first: la.first.union(&lb.first).copied().collect(),
                last: la.last.union(&lb.last).copied().collect(),
            }
        }
        Sfx::Concat(a, b) => {
            let (la, lb) = (linearize(a, labels, follow)?, linearize(b, labels, follow)?);
            for &p in &la.last {
                follow[p].extend(lb.first.iter().copied());
            }
            let mut first = la.first.clone();
            if la.nullable {
                first.extend(lb.first.iter().copied());
            }
            let mut last = lb.last.clone();
            if lb.nullable {
                last.extend(la.last.iter().copied());
            }
            Lin { nullable: la.nullable && lb.nullable, first, last }
        }
        Sfx::Complement(_) => return Err(HardnessError::Complement),
    })
}

/// Glushkov automaton of a complement-free expression; holes become single labeled states.
pub fn regex_to_moore(r: &Sfx) -> std::result::Result<MooreAutomaton, HardnessError> {
    let mut labels = vec![None];
    let mut follow = vec![BTreeSet::new()];
    let lin = linearize(r, &mut labels, &mut follow)?;
    let mut holes = BTreeSet::new();
    for l in labels.iter().flatten() {
        if let Letter::Hole(j) = l {
            if !holes.insert(*j) {
                return Err(HardnessError::RepeatedHole(*j));
            }
        }
    }
    let mut trans = BTreeSet::new();
    for &p in &lin.first {
        trans.insert((0, p));
    }
    for (p, fs) in follow.iter().enumerate() {
        for &q in fs {
            trans.insert((p, q));
        }
    }
    let mut finals = lin.last;
    if lin.nullable {
        finals.insert(0);
    }
    Ok(MooreAutomaton { labels, trans, finals })
}

// ---------------------------------------------------------------- reduction

#[derive(Debug, Clone)]
pub struct Reduction {
    pub mas: Mas,
    pub alphabet: Vec<String>,
    /// φ_R
    pub phi: Formula,
    pub end_atom: String,
    /// E◇□(end_R ∧ φ_R)
    pub query: Formula,
    /// States 1..=main_states form the automaton part; state 1 is its start.
    pub main_states: usize,
    pub levels: usize,
}

pub fn end_atom(id: usize) -> String {
    format!("end_{}", id)
}

pub fn endx_atom(j: usize) -> String {
    format!("endx_{}", j)
}

pub fn primed(a: &str, j: usize) -> String {
    format!("{}'{}", a, j)
}

pub fn agent_name(j: usize) -> String {
    format!("A{}", j)
}

/// Replaces outermost complements with holes numbered from `counter`.
fn extract_holes(e: &Sfx, counter: &mut usize, out: &mut Vec<(usize, Sfx)>) -> Sfx {
    match e {
        Sfx::Complement(f) => {
            *counter += 1;
            let j = *counter;
            out.push((j, (**f).clone()));
            Sfx::Hole(j)
        }
        Sfx::Concat(a, b) => concat(extract_holes(a, counter, out), extract_holes(b, counter, out)),
        Sfx::Union(a, b) => union(extract_holes(a, counter, out), extract_holes(b, counter, out)),
        other => other.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Node {
    /// Automaton state with the set of holes already read through.
    Pos(usize, u64),
    /// Diagonal letter inside a hole's block.
    Diag(usize, usize, u64),
    End(u64),
}

struct Product<'a> {
    aut: &'a MooreAutomaton,
    hole_bit: BTreeMap<usize, u64>,
    nsym: usize,
}

impl Product<'_> {
    fn expand(&self, t: usize, b: u64, out: &mut BTreeSet<Node>) {
        match &self.aut.labels[t] {
            Some(Letter::Hole(j)) => {
                let bit = self.hole_bit[j];
                for a in 0..self.nsym {
                    out.insert(Node::Diag(t, a, b | bit));
                }
                // an empty instance needs no side condition
                for u in self.aut.succ(t) {
                    self.expand(u, b, out);
                }
                if self.aut.finals.contains(&t) {
                    out.insert(Node::End(b));
                }
            }
            _ => {
                out.insert(Node::Pos(t, b));
            }
        }
    }

    fn succ(&self, x: Node) -> BTreeSet<Node> {
        let mut out = BTreeSet::new();
        let (q, b) = match x {
            Node::End(b) => {
                out.insert(Node::End(b));
                return out;
            }
            Node::Pos(q, b) => (q, b),
            Node::Diag(q, _, b) => {
                for a in 0..self.nsym {
                    out.insert(Node::Diag(q, a, b));
                }
                (q, b)
            }
        };
        for t in self.aut.succ(q) {
            self.expand(t, b, &mut out);
        }
        if self.aut.finals.contains(&q) {
            out.insert(Node::End(b));
        }
        out
    }
}

struct Parts {
    n: usize,
    agents: BTreeSet<String>,
    atoms: Vec<String>,
    obs: BTreeMap<String, BTreeSet<String>>,
    labels: BTreeMap<usize, BTreeSet<String>>,
    trans: BTreeSet<(usize, usize)>,
    inits: BTreeSet<usize>,
}

fn build(expr: &Sfx, alphabet: &[String], id: usize, counter: &mut usize) -> std::result::Result<Reduction, HardnessError> {
    let mut holes = Vec::new();
    let ctx = extract_holes(expr, counter, &mut holes);
    if holes.len() > 64 {
        return Err(HardnessError::TooManyHoles);
    }
    let mut subs = Vec::new();
    for (j, f) in &holes {
        if sf_membership(f, alphabet, &[])? {
            return Err(HardnessError::EpsilonInComplement(f.to_string()));
        }
        subs.push((*j, build(f, alphabet, *j, counter)?));
    }
    let aut = regex_to_moore(&ctx)?;
    let hole_bit: BTreeMap<usize, u64> = holes.iter().enumerate().map(|(k, (j, _))| (*j, 1u64 << k)).collect();
    let prod = Product { aut: &aut, hole_bit: hole_bit.clone(), nsym: alphabet.len() };

    let start = Node::Pos(0, 0);
    let mut seen: BTreeSet<Node> = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    let mut edges: BTreeMap<Node, BTreeSet<Node>> = BTreeMap::new();
    while let Some(x) = queue.pop_front() {
        let s = prod.succ(x);
        for &y in &s {
            if seen.insert(y) {
                queue.push_back(y);
            }
        }
        edges.insert(x, s);
    }
    // keep what can still reach an end state
    let mut live: BTreeSet<Node> = seen.iter().copied().filter(|x| matches!(x, Node::End(_))).collect();
    loop {
        let before = live.len();
        for (x, s) in &edges {
            if !live.contains(x) && s.iter().any(|y| live.contains(y)) {
                live.insert(*x);
            }
        }
        if live.len() == before {
            break;
        }
    }
    let mut index: BTreeMap<Node, usize> = BTreeMap::from([(start, 1)]);
    let mut order = vec![start];
    let mut k = 0;
    while k < order.len() {
        let x = order[k];
        k += 1;
        for y in &edges[&x] {
            if live.contains(y) && !index.contains_key(y) {
                index.insert(*y, order.len() + 1);
                order.push(*y);
            }
        }
    }
    let main_states = order.len();
    let mut p = Parts {
        n: main_states,
        agents: BTreeSet::new(),
        atoms: alphabet.to_vec(),
        obs: BTreeMap::new(),
        labels: BTreeMap::new(),
        trans: BTreeSet::new(),
        inits: BTreeSet::from([1]),
    };
    let end = end_atom(id);
    p.atoms.push(end.clone());
    for (j, _) in &holes {
        p.atoms.push(endx_atom(*j));
    }
    for (i, x) in order.iter().enumerate() {
        let q = i + 1;
        let mut lab = BTreeSet::new();
        match *x {
            Node::Pos(t, _) => {
                if let Some(Letter::Sym(a)) = &aut.labels[t] {
                    lab.insert(a.clone());
                }
            }
            Node::Diag(t, a, _) => {
                let Some(Letter::Hole(j)) = &aut.labels[t] else { unreachable!() };
                lab.insert(alphabet[a].clone());
                lab.insert(primed(&alphabet[a], *j));
            }
            Node::End(b) => {
                lab.insert(end.clone());
                for (j, bit) in &hole_bit {
                    if b & bit != 0 {
                        lab.insert(endx_atom(*j));
                    }
                }
            }
        }
        p.labels.insert(q, lab);
        for y in &edges[x] {
            if let Some(&r) = index.get(y) {
                p.trans.insert((q, r));
            }
        }
    }
    if !p.trans.iter().any(|&(s, _)| s == 1) {
        p.trans.insert((1, 1));
    }

    let mut phi = Formula::True;
    for (j, sub) in subs {
        let agent = agent_name(j);
        let copy: Vec<String> = alphabet.iter().map(|a| primed(a, j)).collect();
        p.atoms.extend(copy.iter().cloned());
        p.agents.insert(agent.clone());
        p.obs.insert(agent.clone(), copy.iter().cloned().collect());
        let rename = |s: &String| if alphabet.contains(s) { primed(s, j) } else { s.clone() };
        let m = &sub.mas;
        let qbar = p.n + 1;
        let off = qbar;
        p.labels.insert(qbar, BTreeSet::new());
        p.trans.insert((qbar, qbar));
        p.inits.insert(qbar);
        for &q0 in m.inits() {
            p.trans.insert((qbar, q0 + off));
            p.inits.insert(q0 + off);
        }
        for q in m.states() {
            p.labels.insert(q + off, m.label(q).iter().map(rename).collect());
        }
        for &(s, r) in m.trans() {
            p.trans.insert((s + off, r + off));
        }
        p.atoms.extend(m.atoms().iter().map(rename));
        p.agents.extend(m.agents().iter().cloned());
        for (a, o) in m.obs_map() {
            p.obs.insert(a.clone(), o.clone());
        }
        p.n = off + m.n();

        let inner = if sub.phi == Formula::True {
            Formula::NegAtom(sub.end_atom.clone())
        } else {
            fm::or(Formula::NegAtom(sub.end_atom.clone()), sub.phi.dual())
        };
        let boxdia = expand_macro("ABoxDiamond", inner).expect("known macro");
        let conj = fm::or(Formula::NegAtom(endx_atom(j)), fm::k(&agent, boxdia));
        phi = if phi == Formula::True { conj } else { fm::and(phi, conj) };
    }
    let phi = phi.normalize();
    let target = if phi == Formula::True { Formula::Atom(end.clone()) } else { fm::and(Formula::Atom(end.clone()), phi.clone()) };
    let query = expand_macro("EDiamondBox", target).expect("known macro").normalize();
    let mas = Mas::new(p.n, p.agents, p.atoms, p.obs, p.labels, p.trans, p.inits);
    Ok(Reduction { mas, alphabet: alphabet.to_vec(), phi, end_atom: end, query, main_states, levels: expr.complement_depth() })
}

/// M_R, φ_R and end_R for a context star-free expression.
pub fn build_reduction(expr: &Sfx, alphabet: &[String]) -> std::result::Result<Reduction, HardnessError> {
    let mut syms = BTreeSet::new();
    expr.symbols(&mut syms);
    if let Some(bad) = syms.iter().find(|s| !alphabet.contains(s)) {
        return Err(HardnessError::Symbol(bad.clone()));
    }
    if let Some(bad) = alphabet.iter().find(|s| !valid_symbol(s)) {
        return Err(HardnessError::Symbol(bad.clone()));
    }
    build(expr, alphabet, 0, &mut 0)
}

impl Reduction {
    /// end_R ∧ φ_R
    pub fn side_formula(&self) -> Formula {
        if self.phi == Formula::True {
            Formula::Atom(self.end_atom.clone())
        } else {
            fm::and(Formula::Atom(self.end_atom.clone()), self.phi.clone())
        }
    }

    fn letter(&self, q: usize) -> Option<&String> {
        self.mas.label(q).iter().find(|a| self.alphabet.contains(a))
    }

    /// Paths of the automaton part from its start to the first end state reading at most `maxlen` letters.
    pub fn end_paths(&self, maxlen: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut path = vec![1];
        self.paths_from(1, 0, maxlen, &mut path, &mut out);
        out
    }

    fn paths_from(&self, q: usize, read: usize, maxlen: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if self.mas.has_atom(q, &self.end_atom) {
            out.push(path.clone());
            return;
        }
        for &r in self.mas.succ(q) {
            if r == q && self.letter(r).is_none() {
                continue;
            }
            let read2 = read + usize::from(self.letter(r).is_some());
            if read2 > maxlen {
                continue;
            }
            path.push(r);
            self.paths_from(r, read2, maxlen, path, out);
            path.pop();
        }
    }

    pub fn projection(&self, path: &[usize]) -> Word {
        path.iter().filter_map(|&q| self.letter(q).cloned()).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReductionReport {
    pub expr: String,
    pub alphabet: Vec<String>,
    pub states: usize,
    pub main_states: usize,
    pub agents: Vec<String>,
    pub root_model_size: usize,
    pub maxlen: usize,
    pub words: usize,
    pub members: usize,
    pub paths: usize,
    pub mismatches: Vec<String>,
    pub oracle_depth: usize,
    pub oracle_compared: usize,
    pub oracle_mismatches: Vec<String>,
    pub query_holds: bool,
    pub shortest_member: Option<String>,
}

impl ReductionReport {
    pub fn ok(&self) -> bool {
        self.mismatches.is_empty() && self.oracle_mismatches.is_empty()
    }
}

/// Run of the root model over `path` followed by looping in its last state, until a repeat.
fn lasso(res: &crate::checker::CheckResult, path: &[usize]) -> Option<(Vec<usize>, usize)> {
    let mut lifted = res.lift_run(path)?;
    let stay = *path.last()?;
    let to_m = &res.ins.root_to_m.st_map;
    let n = &res.root_model;
    let mut seen: BTreeMap<usize, usize> = BTreeMap::new();
    let base = lifted.len() - 1;
    loop {
        let cur = *lifted.last().unwrap();
        if let Some(&k) = seen.get(&cur) {
            return Some((lifted, base + k));
        }
        seen.insert(cur, lifted.len() - 1 - base);
        let next = *n.succ(cur).iter().find(|&&q| to_m[q] == stay)?;
        lifted.push(next);
    }
}

/// Compares membership with the existence of a witness path for every word up to `maxlen`,
/// and cross-checks the side condition against the bounded tree semantics at `depth`.
pub fn verify_reduction(
    file: &SfxFile,
    maxlen: usize,
    depth: usize,
    fuel: usize,
    opts: &CheckOptions,
    cap: usize,
) -> Result<ReductionReport> {
    let red = build_reduction(&file.expr, &file.alphabet)?;
    let m = Arc::new(red.mas.clone());
    let side = red.side_formula();
    let res = model_check(&side, &m, opts)?;
    let paths = red.end_paths(maxlen);
    let mut witnessed: BTreeSet<Word> = BTreeSet::new();
    let mut lassos = Vec::new();
    for path in &paths {
        let (lifted, cycle_start) =
            lasso(&res, path).ok_or_else(|| crate::Error::Input("path does not lift to the root model".into()))?;
        let ok = lifted[cycle_start..].iter().all(|&x| res.root_set.contains(x));
        if ok {
            witnessed.insert(red.projection(path));
        }
        lassos.push((path.clone(), lifted));
    }
    let words = words_upto(&file.alphabet, maxlen);
    let mut members = 0;
    let mut mismatches = Vec::new();
    let mut shortest = None;
    for w in &words {
        let member = sf_membership(&file.expr, &file.alphabet, w)?;
        if member {
            members += 1;
            shortest.get_or_insert_with(|| word_string(w));
        }
        if member != witnessed.contains(w) {
            mismatches.push(word_string(w));
        }
    }
    let mut oracle_compared = 0;
    let mut oracle_mismatches = Vec::new();
    if depth > 0 {
        let bt = BoundedTree::new(&m, depth, cap)?;
        let ev = tree_eval_bounded(&side, &bt, &BTreeMap::new(), fuel)?;
        let mut done = BTreeSet::new();
        for (path, lifted) in &lassos {
            let stay = *path.last().unwrap();
            for len in 1..=depth.min(lifted.len()) {
                let run: Vec<usize> = (0..len).map(|i| if i < path.len() { path[i] } else { stay }).collect();
                if !done.insert(run.clone()) {
                    continue;
                }
                let Some(x) = bt.node_of(&run) else { continue };
                if let Some(v) = ev.value(x) {
                    oracle_compared += 1;
                    if v != res.root_set.contains(lifted[len - 1]) {
                        oracle_mismatches.push(run.iter().map(|q| q.to_string()).collect::<Vec<_>>().join("."));
                    }
                }
            }
        }
    }
    let query = model_check(&red.query, &m, opts)?;
    Ok(ReductionReport {
        expr: file.expr.to_string(),
        alphabet: file.alphabet.clone(),
        states: m.n(),
        main_states: red.main_states,
        agents: m.agents().to_vec(),
        root_model_size: res.root_model_size(),
        maxlen,
        words: words.len(),
        members,
        paths: paths.len(),
        mismatches,
        oracle_depth: depth,
        oracle_compared,
        oracle_mismatches,
        query_holds: query.holds_any(),
        shortest_member: shortest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mas::validate_mas;
    use crate::syntree::check_nonmixing;

    fn ab() -> Vec<String> {
        vec!["a".into(), "b".into()]
    }

    fn w(s: &str) -> Word {
        s.chars().map(|c| c.to_string()).collect()
    }

    #[test]
    fn membership_examples() {
        let r = concat(sym("a"), sym("b"));
        assert!(sf_membership(&r, &ab(), &w("ab")).unwrap());
        assert!(sf_membership(&complement(sym("a")), &ab(), &w("")).unwrap());
        let c = concat(concat(sym("a"), complement(sym("a"))), sym("b"));
        assert!(!sf_membership(&c, &ab(), &w("aab")).unwrap());
        assert!(sf_membership(&c, &ab(), &w("abb")).unwrap());
        assert!(sf_membership(&c, &ab(), &w("ab")).unwrap());
        assert!(sf_membership(&r, &ab(), &w("c")).is_err());
    }

    #[test]
    fn parse_files() {
        let f = parse_sfx("alphabet: a b\nF = a\nC(x) = a . x . b\nR = C(~F)\n").unwrap();
        assert_eq!(f.expr.to_string(), "a . ~a . b");
        assert_eq!(f.alphabet, ab());
        let g = parse_sfx("(a + b) . ~(a . b)").unwrap();
        assert_eq!(g.expr, concat(union(sym("a"), sym("b")), complement(concat(sym("a"), sym("b")))));
        assert!(parse_sfx("alphabet: a\nR = b").is_err());
        assert!(parse_sfx("R = C(a)").is_err());
    }

    #[test]
    fn glushkov_shapes() {
        let a = regex_to_moore(&sym("a")).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a.finals, BTreeSet::from([1]));
        let axb = regex_to_moore(&concat(concat(sym("a"), Sfx::Hole(1)), sym("b"))).unwrap();
        let (with, without) = axb.final_partition(1);
        assert_eq!(axb.hole_state(1), Some(2));
        assert!(without.is_empty() && with.len() == 1);
        let u = regex_to_moore(&union(sym("a"), concat(sym("b"), Sfx::Hole(1)))).unwrap();
        let (with, without) = u.final_partition(1);
        assert_eq!(without, BTreeSet::from([1]));
        assert_eq!(with, BTreeSet::from([3]));
        assert!(matches!(regex_to_moore(&concat(Sfx::Hole(1), Sfx::Hole(1))), Err(HardnessError::RepeatedHole(1))));
    }

    #[test]
    fn glushkov_agrees_with_membership() {
        let exprs = [
            "a . b + b",
            "(a + eps) . (b + a . a)",
            "empty + a",
            "(a + b) . (a + b) . a",
            "eps",
            "a . empty",
        ];
        for src in exprs {
            let f = parse_sfx(&format!("alphabet: a b\nR = {}", src)).unwrap();
            let aut = regex_to_moore(&f.expr).unwrap();
            for word in words_upto(&f.alphabet, 4) {
                let letters: Vec<Letter> = word.iter().map(|a| Letter::Sym(a.clone())).collect();
                assert_eq!(aut.accepts(&letters), sf_membership(&f.expr, &f.alphabet, &word).unwrap(), "{} on {:?}", src, word);
            }
        }
    }

    #[test]
    fn base_case_instance() {
        let red = build_reduction(&sym("a"), &ab()).unwrap();
        assert!(validate_mas(&red.mas).is_empty());
        assert_eq!(red.mas.n(), 3);
        assert!(red.mas.agents().is_empty());
        assert_eq!(red.phi, Formula::True);
        assert_eq!(red.mas.label(3), &BTreeSet::from(["end_0".to_string()]));
        assert!(red.mas.trans().contains(&(3, 3)));
    }

    #[test]
    fn context_instance() {
        let f = parse_sfx("alphabet: a b\nF = a\nC(x) = a . x . b\nR = C(~F)").unwrap();
        let red = build_reduction(&f.expr, &f.alphabet).unwrap();
        assert!(validate_mas(&red.mas).is_empty(), "{:?}", validate_mas(&red.mas));
        assert_eq!(red.mas.agents(), &["A1".to_string()]);
        assert_eq!(red.mas.obs("A1").unwrap(), &BTreeSet::from(["a'1".to_string(), "b'1".to_string()]));
        assert!(check_nonmixing(&red.query, &red.mas).unwrap().is_none());
        assert!(red.mas.states().any(|q| red.mas.has_atom(q, "endx_1")));
        let text = red.mas.to_text();
        assert_eq!(crate::mas::parse_mas(&text).unwrap().to_text(), text);
    }

    #[test]
    fn epsilon_in_complement_is_rejected() {
        let e = complement(union(sym("a"), Sfx::Eps));
        assert!(matches!(build_reduction(&e, &ab()), Err(HardnessError::EpsilonInComplement(_))));
    }

    #[test]
    fn verify_small_instances() {
        for src in ["a", "a . ~a . b", "~a", "a . empty", "~(a + b . ~b)"] {
            let f = parse_sfx(&format!("alphabet: a b\nR = {}", src)).unwrap();
            let rep = verify_reduction(&f, 3, 4, 32, &CheckOptions::default(), 1_000_000).unwrap();
            assert!(rep.ok(), "{}: {:?}", src, rep);
            assert_eq!(rep.query_holds, rep.members > 0, "{}", src);
        }
    }
}
