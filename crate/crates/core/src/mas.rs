//! Finite multi-agent systems, their text format, runs and observations.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::stateset::StateSet;

pub const DEFAULT_NODE_CAP: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MasError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid system: {0}")]
    Invalid(String),
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("invalid run {0:?}")]
    InvalidRun(Vec<usize>),
    #[error("budget exceeded: more than {0} nodes")]
    Budget(usize),
}

/// A run is addressed by its state sequence; it doubles as a node of the unfolding.
pub type Run = Vec<usize>;

#[derive(Clone, PartialEq, Eq)]
pub struct Mas {
    n: usize,
    agents: Vec<String>,
    atoms: Vec<String>,
    obs: BTreeMap<String, BTreeSet<String>>,
    labels: BTreeMap<usize, BTreeSet<String>>,
    trans: BTreeSet<(usize, usize)>,
    inits: BTreeSet<usize>,
    succ: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    InitOutOfRange(usize),
    NoInit,
    TransOutOfRange(usize, usize),
    LabelOutOfRange(usize),
    UnknownObsAtom { agent: String, atom: String },
    UnknownLabelAtom { state: usize, atom: String },
    NoSuccessor(usize),
    Unreachable(usize),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::InitOutOfRange(q) => write!(f, "initial state {} not in states", q),
            Violation::NoInit => write!(f, "no initial state"),
            Violation::TransOutOfRange(q, r) => write!(f, "transition {}->{} leaves the state range", q, r),
            Violation::LabelOutOfRange(q) => write!(f, "label for state {} not in states", q),
            Violation::UnknownObsAtom { agent, atom } => {
                write!(f, "agent {} observes undeclared atom {}", agent, atom)
            }
            Violation::UnknownLabelAtom { state, atom } => {
                write!(f, "state {} labeled with undeclared atom {}", state, atom)
            }
            Violation::NoSuccessor(q) => write!(f, "state {} has no successor", q),
            Violation::Unreachable(q) => write!(f, "state {} is unreachable", q),
        }
    }
}

impl Mas {
    /// Builds a system without checking it; see [`validate_mas`].
    pub fn new(
        n: usize,
        agents: impl IntoIterator<Item = String>,
        atoms: impl IntoIterator<Item = String>,
        obs: BTreeMap<String, BTreeSet<String>>,
        labels: BTreeMap<usize, BTreeSet<String>>,
        trans: BTreeSet<(usize, usize)>,
        inits: BTreeSet<usize>,
    ) -> Mas {
        let mut agents: Vec<String> = agents.into_iter().collect();
        agents.sort();
        agents.dedup();
        let mut atoms_v: Vec<String> = Vec::new();
        for a in atoms {
            if !atoms_v.contains(&a) {
                atoms_v.push(a);
            }
        }
        let mut obs = obs;
        for a in &agents {
            obs.entry(a.clone()).or_default();
        }
        let labels = labels.into_iter().filter(|(_, l)| !l.is_empty()).collect();
        let mut succ = vec![Vec::new(); n + 1];
        let mut pred = vec![Vec::new(); n + 1];
        for &(q, r) in &trans {
            if q >= 1 && q <= n && r >= 1 && r <= n {
                succ[q].push(r);
                pred[r].push(q);
            }
        }
        Mas { n, agents, atoms: atoms_v, obs, labels, trans, inits, succ, pred }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn states(&self) -> impl Iterator<Item = usize> {
        1..=self.n
    }

    pub fn agents(&self) -> &[String] {
        &self.agents
    }

    pub fn has_agent(&self, a: &str) -> bool {
        self.agents.binary_search_by(|x| x.as_str().cmp(a)).is_ok()
    }

    pub fn atoms(&self) -> &[String] {
        &self.atoms
    }

    pub fn obs(&self, a: &str) -> Option<&BTreeSet<String>> {
        self.obs.get(a)
    }

    pub fn obs_map(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.obs
    }

    pub fn label(&self, q: usize) -> &BTreeSet<String> {
        static EMPTY: BTreeSet<String> = BTreeSet::new();
        self.labels.get(&q).unwrap_or(&EMPTY)
    }

    pub fn has_atom(&self, q: usize, p: &str) -> bool {
        self.label(q).contains(p)
    }

    pub fn trans(&self) -> &BTreeSet<(usize, usize)> {
        &self.trans
    }

    pub fn inits(&self) -> &BTreeSet<usize> {
        &self.inits
    }

    pub fn succ(&self, q: usize) -> &[usize] {
        &self.succ[q]
    }

    pub fn pred(&self, q: usize) -> &[usize] {
        &self.pred[q]
    }

    pub fn all(&self) -> StateSet {
        StateSet::full(self.n)
    }

    pub fn none(&self) -> StateSet {
        StateSet::empty(self.n)
    }

    /// States whose label contains `p`.
    pub fn atom_set(&self, p: &str) -> StateSet {
        StateSet::from_states(self.n, self.states().filter(|&q| self.has_atom(q, p)))
    }

    /// π(q) ∩ Π_a.
    pub fn observation(&self, a: &str, q: usize) -> Result<BTreeSet<String>, MasError> {
        let pa = self.obs.get(a).ok_or_else(|| MasError::UnknownAgent(a.to_string()))?;
        Ok(self.label(q).intersection(pa).cloned().collect())
    }

    /// Dense class id per state (index 0 unused) for the relation "same a-observation".
    pub fn obs_classes(&self, a: &str) -> Result<Vec<usize>, MasError> {
        let mut ids: HashMap<BTreeSet<String>, usize> = HashMap::new();
        let mut out = vec![0; self.n + 1];
        for q in self.states() {
            let o = self.observation(a, q)?;
            let next = ids.len();
            out[q] = *ids.entry(o).or_insert(next);
        }
        Ok(out)
    }

    pub fn is_run(&self, r: &[usize]) -> bool {
        !r.is_empty()
            && self.inits.contains(&r[0])
            && r.iter().all(|&q| q >= 1 && q <= self.n)
            && r.windows(2).all(|w| self.trans.contains(&(w[0], w[1])))
    }

    /// States reachable from the initial states.
    pub fn reachable(&self) -> StateSet {
        let mut seen = self.none();
        let mut queue: VecDeque<usize> = VecDeque::new();
        for &q in &self.inits {
            if q >= 1 && q <= self.n && !seen.contains(q) {
                seen.insert(q);
                queue.push_back(q);
            }
        }
        while let Some(q) = queue.pop_front() {
            for &r in &self.succ[q] {
                if !seen.contains(r) {
                    seen.insert(r);
                    queue.push_back(r);
                }
            }
        }
        seen
    }

    pub fn parse(text: &str) -> Result<Mas, MasError> {
        parse_mas(text)
    }

    /// Renders the system in the line-oriented text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("agents: {}\n", self.agents.join(" ")));
        out.push_str(&format!("atoms: {}\n", self.atoms.join(" ")));
        for (a, pa) in &self.obs {
            let v: Vec<&str> = pa.iter().map(|s| s.as_str()).collect();
            out.push_str(&format!("obs {}: {}\n", a, v.join(" ")).trim_end().to_string());
            out.push('\n');
        }
        out.push_str(&format!("states: {}\n", self.n));
        let inits: Vec<String> = self.inits.iter().map(|q| q.to_string()).collect();
        out.push_str(&format!("init: {}\n", inits.join(" ")));
        for (q, l) in &self.labels {
            let v: Vec<&str> = l.iter().map(|s| s.as_str()).collect();
            out.push_str(&format!("label {}: {}\n", q, v.join(" ")));
        }
        let tr: Vec<String> = self.trans.iter().map(|(q, r)| format!("{}->{}", q, r)).collect();
        for chunk in tr.chunks(16) {
            out.push_str(&format!("trans: {}\n", chunk.join(" ")));
        }
        out
    }
}

impl fmt::Debug for Mas {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mas(\n{})", self.to_text())
    }
}

fn parse_state(tok: &str, line: usize) -> Result<usize, MasError> {
    tok.trim()
        .parse::<usize>()
        .map_err(|_| MasError::Parse { line, msg: format!("expected a state number, got `{}`", tok.trim()) })
}

/// Parses the text format. Only syntax is checked here.
pub fn parse_mas(text: &str) -> Result<Mas, MasError> {
    let mut agents: Vec<String> = Vec::new();
    let mut atoms: Vec<String> = Vec::new();
    let mut obs: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut labels: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
    let mut trans = BTreeSet::new();
    let mut inits = BTreeSet::new();
    let mut n: Option<usize> = None;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, rest) = body
            .split_once(':')
            .ok_or_else(|| MasError::Parse { line, msg: "expected `key: value`".into() })?;
        let key = key.trim();
        let words: Vec<String> = rest.split_whitespace().map(|s| s.to_string()).collect();
        let mut kw = key.split_whitespace();
        match (kw.next(), kw.next(), kw.next()) {
            (Some("agents"), None, _) => agents.extend(words),
            (Some("atoms"), None, _) => atoms.extend(words),
            (Some("obs"), Some(a), None) => {
                obs.entry(a.to_string()).or_default().extend(words);
            }
            (Some("states"), None, _) => {
                if words.len() != 1 {
                    return Err(MasError::Parse { line, msg: "expected a single state count".into() });
                }
                n = Some(parse_state(&words[0], line)?);
            }
            (Some("init"), None, _) => {
                for w in &words {
                    inits.insert(parse_state(w, line)?);
                }
            }
            (Some("label"), Some(q), None) => {
                let q = parse_state(q, line)?;
                labels.entry(q).or_default().extend(words);
            }
            (Some("trans"), None, _) => {
                // whitespace around arrows is tolerated
                let joined = rest.replace(char::is_whitespace, " ");
                let compact = joined.split("->").map(|s| s.trim()).collect::<Vec<_>>().join("->");
                for w in compact.split_whitespace() {
                    let (q, r) = w.split_once("->").ok_or_else(|| MasError::Parse {
                        line,
                        msg: format!("expected `q->r`, got `{}`", w),
                    })?;
                    trans.insert((parse_state(q, line)?, parse_state(r, line)?));
                }
            }
            _ => return Err(MasError::Parse { line, msg: format!("unknown key `{}`", key) }),
        }
    }
    let n = n.ok_or(MasError::Parse { line: 0, msg: "missing `states:` line".into() })?;
    for a in obs.keys() {
        if !agents.contains(a) {
            return Err(MasError::Parse { line: 0, msg: format!("obs for undeclared agent `{}`", a) });
        }
    }
    Ok(Mas::new(n, agents, atoms, obs, labels, trans, inits))
}

/// Parses and rejects systems with any invariant violation.
pub fn parse_valid_mas(text: &str) -> Result<Mas, MasError> {
    let m = parse_mas(text)?;
    let v = validate_mas(&m);
    if v.is_empty() {
        Ok(m)
    } else {
        let msgs: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        Err(MasError::Invalid(msgs.join("; ")))
    }
}

pub fn validate_mas(m: &Mas) -> Vec<Violation> {
    let mut out = Vec::new();
    if m.inits.is_empty() {
        out.push(Violation::NoInit);
    }
    for &q in &m.inits {
        if q < 1 || q > m.n {
            out.push(Violation::InitOutOfRange(q));
        }
    }
    for &(q, r) in &m.trans {
        if q < 1 || q > m.n || r < 1 || r > m.n {
            out.push(Violation::TransOutOfRange(q, r));
        }
    }
    let atoms: BTreeSet<&String> = m.atoms.iter().collect();
    for (a, pa) in &m.obs {
        for p in pa {
            if !atoms.contains(p) {
                out.push(Violation::UnknownObsAtom { agent: a.clone(), atom: p.clone() });
            }
        }
    }
    for (&q, l) in &m.labels {
        if q < 1 || q > m.n {
            out.push(Violation::LabelOutOfRange(q));
        }
        for p in l {
            if !atoms.contains(p) {
                out.push(Violation::UnknownLabelAtom { state: q, atom: p.clone() });
            }
        }
    }
    for q in m.states() {
        if m.succ[q].is_empty() {
            out.push(Violation::NoSuccessor(q));
        }
    }
    let reach = m.reachable();
    for q in m.states() {
        if !reach.contains(q) {
            out.push(Violation::Unreachable(q));
        }
    }
    out
}

pub fn obs_trace(m: &Mas, a: &str, r: &[usize]) -> Result<Vec<BTreeSet<String>>, MasError> {
    r.iter().map(|&q| m.observation(a, q)).collect()
}

/// Synchronous perfect-recall indistinguishability, root observation included.
pub fn obs_equiv(m: &Mas, a: &str, r1: &[usize], r2: &[usize]) -> Result<bool, MasError> {
    if !m.has_agent(a) {
        return Err(MasError::UnknownAgent(a.to_string()));
    }
    for r in [r1, r2] {
        if !m.is_run(r) {
            return Err(MasError::InvalidRun(r.to_vec()));
        }
    }
    if r1.len() != r2.len() {
        return Ok(false);
    }
    for (&q, &s) in r1.iter().zip(r2) {
        if m.observation(a, q)? != m.observation(a, s)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Every run of length at most `depth`, shortest first, siblings in successor order.
pub fn runs_up_to(m: &Mas, depth: usize, cap: usize) -> Result<Vec<Run>, MasError> {
    let mut out: Vec<Run> = Vec::new();
    if depth == 0 {
        return Ok(out);
    }
    for &q in &m.inits {
        out.push(vec![q]);
    }
    if out.len() > cap {
        return Err(MasError::Budget(cap));
    }
    let mut start = 0;
    for _ in 1..depth {
        let end = out.len();
        for i in start..end {
            let last = *out[i].last().unwrap();
            for &r in &m.succ[last] {
                let mut next = out[i].clone();
                next.push(r);
                out.push(next);
                if out.len() > cap {
                    return Err(MasError::Budget(cap));
                }
            }
        }
        start = end;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub use crate::fixtures::FIG1;

    #[test]
    fn fig1_is_valid() {
        let m = parse_mas(FIG1).unwrap();
        assert!(validate_mas(&m).is_empty());
        assert_eq!(m.n(), 3);
        assert_eq!(m.succ(1), &[2, 3]);
    }

    #[test]
    fn missing_self_loop_is_reported() {
        let m = parse_mas(&FIG1.replace(" 3->3", "")).unwrap();
        let v = validate_mas(&m);
        assert!(v.contains(&Violation::NoSuccessor(3)));
        assert_eq!(v.iter().map(|x| x.to_string()).collect::<Vec<_>>(), vec!["state 3 has no successor"]);
    }

    #[test]
    fn init_outside_states_is_reported() {
        let m = parse_mas(&FIG1.replace("init: 1", "init: 4")).unwrap();
        let v = validate_mas(&m);
        assert!(v.contains(&Violation::InitOutOfRange(4)));
        assert_eq!(v[0].to_string(), "initial state 4 not in states");
    }

    #[test]
    fn obs_equiv_examples() {
        let m = parse_mas(FIG1).unwrap();
        assert!(obs_equiv(&m, "a", &[1, 2], &[1, 3]).unwrap());
        assert!(obs_equiv(&m, "a", &[1, 2, 1], &[1, 2, 1]).unwrap());
        assert!(!obs_equiv(&m, "a", &[1, 2], &[1, 2, 1]).unwrap());
        assert!(obs_equiv(&m, "a", &[1, 2, 2], &[1]).is_err());
        assert!(obs_equiv(&m, "z", &[1], &[1]).is_err());
    }

    #[test]
    fn runs_of_fig1() {
        let m = parse_mas(FIG1).unwrap();
        assert_eq!(runs_up_to(&m, 1, 10).unwrap(), vec![vec![1]]);
        assert_eq!(runs_up_to(&m, 2, 10).unwrap(), vec![vec![1], vec![1, 2], vec![1, 3]]);
        let r3 = runs_up_to(&m, 3, 10).unwrap();
        let got: BTreeSet<Run> = r3.into_iter().collect();
        let want: BTreeSet<Run> =
            [vec![1], vec![1, 2], vec![1, 3], vec![1, 2, 1], vec![1, 3, 3]].into_iter().collect();
        assert_eq!(got, want);
        assert_eq!(runs_up_to(&m, 3, 4), Err(MasError::Budget(4)));
    }

    #[test]
    fn text_round_trip() {
        let m = parse_mas(FIG1).unwrap();
        let again = parse_mas(&m.to_text()).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn comments_and_spacing() {
        let txt = "agents: a # one agent\natoms: p\nobs a: p\nstates: 2\ninit: 1\nlabel 2: p\ntrans: 1 -> 2   2->2\n";
        let m = parse_mas(txt).unwrap();
        assert!(validate_mas(&m).is_empty());
        assert!(m.label(1).is_empty());
        assert!(m.has_atom(2, "p"));
    }

    #[test]
    fn bad_line_reports_number() {
        let err = parse_mas("agents: a\nstates: x\n").unwrap_err();
        assert!(matches!(err, MasError::Parse { line: 2, .. }));
    }
}
