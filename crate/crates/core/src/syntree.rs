//! Syntactic trees of formulas, closedness, AgNCl and the non-mixing test.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::formula::Formula;
use crate::mas::Mas;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Op {
    True,
    False,
    Atom(String),
    NegAtom(String),
    Var(String),
    And,
    Or,
    AX,
    EX,
    K(String),
    P(String),
    Mu(String),
    Nu(String),
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Op::True => write!(f, "true"),
            Op::False => write!(f, "false"),
            Op::Atom(p) => write!(f, "{}", p),
            Op::NegAtom(p) => write!(f, "!{}", p),
            Op::Var(z) => write!(f, "{}", z),
            Op::And => write!(f, "&"),
            Op::Or => write!(f, "|"),
            Op::AX => write!(f, "AX"),
            Op::EX => write!(f, "EX"),
            Op::K(a) => write!(f, "K[{}]", a),
            Op::P(a) => write!(f, "P[{}]", a),
            Op::Mu(z) => write!(f, "mu {}", z),
            Op::Nu(z) => write!(f, "nu {}", z),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynNode {
    pub op: Op,
    /// Address in {1,2}*; the root has the empty path.
    pub path: Vec<u8>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// The subformula at this node; the ⊤ child of a variable carries `true`.
    pub form: Formula,
    pub closed: bool,
    pub agncl: BTreeSet<String>,
    /// Nearest closed ancestor-or-self (the root for open formulas); the node's region is headed there.
    pub region_top: usize,
}

impl SynNode {
    pub fn path_string(&self) -> String {
        if self.path.is_empty() {
            "e".to_string()
        } else {
            self.path.iter().map(|d| d.to_string()).collect()
        }
    }

    pub fn agent(&self) -> Option<&str> {
        match &self.op {
            Op::K(a) | Op::P(a) => Some(a),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynTree {
    pub nodes: Vec<SynNode>,
}

impl SynTree {
    pub fn root(&self) -> usize {
        0
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, x: usize) -> &SynNode {
        &self.nodes[x]
    }

    pub fn find(&self, path: &[u8]) -> Option<usize> {
        self.nodes.iter().position(|n| n.path == path)
    }

    /// Closed non-root nodes are nearest closed successors of their parent.
    pub fn is_nearest_closed_succ(&self, x: usize) -> bool {
        self.nodes[x].closed && self.nodes[x].parent.is_some()
    }

    /// Nearest closed successors of `x`: closed strict descendants with no closed node strictly between.
    pub fn nearest_closed_succs(&self, x: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack: Vec<usize> = self.nodes[x].children.iter().rev().copied().collect();
        while let Some(y) = stack.pop() {
            if self.nodes[y].closed {
                out.push(y);
            } else {
                stack.extend(self.nodes[y].children.iter().rev());
            }
        }
        out
    }

    /// The closed node `c` together with its non-closed descendants reached through non-closed nodes.
    pub fn region(&self, c: usize) -> Vec<usize> {
        let mut out = vec![c];
        let mut stack: Vec<usize> = self.nodes[c].children.iter().rev().copied().collect();
        while let Some(y) = stack.pop() {
            if !self.nodes[y].closed {
                out.push(y);
                stack.extend(self.nodes[y].children.iter().rev());
            }
        }
        out
    }

    /// Pre-order listing.
    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![0];
        while let Some(x) = stack.pop() {
            out.push(x);
            stack.extend(self.nodes[x].children.iter().rev());
        }
        out
    }

    /// Ancestors from the root down to `x`, inclusive.
    pub fn branch(&self, x: usize) -> Vec<usize> {
        let mut out = vec![x];
        let mut cur = x;
        while let Some(p) = self.nodes[cur].parent {
            out.push(p);
            cur = p;
        }
        out.reverse();
        out
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&x| self.nodes[x].children.is_empty()).collect()
    }
}

pub fn syntactic_tree(f: &Formula) -> SynTree {
    let mut t = SynTree { nodes: Vec::new() };
    build(&mut t, f, None, Vec::new());
    let order = t.preorder();
    for &x in &order {
        let top = match t.nodes[x].parent {
            Some(p) if !t.nodes[x].closed => t.nodes[p].region_top,
            _ => x,
        };
        t.nodes[x].region_top = top;
    }
    for &x in order.iter().rev() {
        if t.nodes[x].closed {
            continue;
        }
        let mut ag: BTreeSet<String> = BTreeSet::new();
        if let Some(a) = t.nodes[x].agent() {
            ag.insert(a.to_string());
        }
        for &c in &t.nodes[x].children {
            if !t.nodes[c].closed {
                ag.extend(t.nodes[c].agncl.iter().cloned());
            }
        }
        t.nodes[x].agncl = ag;
    }
    t
}

fn build(t: &mut SynTree, f: &Formula, parent: Option<usize>, path: Vec<u8>) -> usize {
    let op = match f {
        Formula::True => Op::True,
        Formula::False => Op::False,
        Formula::Atom(p) => Op::Atom(p.clone()),
        Formula::NegAtom(p) => Op::NegAtom(p.clone()),
        Formula::Var(z) => Op::Var(z.clone()),
        Formula::And(..) => Op::And,
        Formula::Or(..) => Op::Or,
        Formula::AX(_) => Op::AX,
        Formula::EX(_) => Op::EX,
        Formula::K(a, _) => Op::K(a.clone()),
        Formula::P(a, _) => Op::P(a.clone()),
        Formula::Mu(z, _) => Op::Mu(z.clone()),
        Formula::Nu(z, _) => Op::Nu(z.clone()),
    };
    let id = t.nodes.len();
    t.nodes.push(SynNode {
        op,
        path: path.clone(),
        parent,
        children: Vec::new(),
        form: f.clone(),
        closed: f.is_closed(),
        agncl: BTreeSet::new(),
        region_top: id,
    });
    let kids: Vec<Formula> = match f {
        Formula::Var(_) => vec![Formula::True],
        _ => f.children().into_iter().cloned().collect(),
    };
    for (i, c) in kids.iter().enumerate() {
        let mut p = path.clone();
        p.push(i as u8 + 1);
        let cid = build(t, c, Some(id), p);
        t.nodes[id].children.push(cid);
    }
    id
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MixingViolation {
    pub agent_a: String,
    pub agent_b: String,
    pub node: String,
    pub subformula: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NonMixingError {
    #[error("agent `{0}` is not declared in the model")]
    UndeclaredAgent(String),
}

/// `Ok(None)` when the formula is non-mixing for `m`, otherwise the first violation in pre-order.
pub fn check_nonmixing(f: &Formula, m: &Mas) -> Result<Option<MixingViolation>, NonMixingError> {
    for a in f.agents() {
        if !m.has_agent(&a) {
            return Err(NonMixingError::UndeclaredAgent(a));
        }
    }
    let t = syntactic_tree(f);
    for x in t.preorder() {
        let node = &t.nodes[x];
        let ag: Vec<&String> = node.agncl.iter().collect();
        for i in 0..ag.len() {
            for j in i + 1..ag.len() {
                let pa = m.obs(ag[i]).unwrap();
                let pb = m.obs(ag[j]).unwrap();
                if !pa.is_subset(pb) && !pb.is_subset(pa) {
                    return Ok(Some(MixingViolation {
                        agent_a: ag[i].clone(),
                        agent_b: ag[j].clone(),
                        node: node.path_string(),
                        subformula: node.form.to_string(),
                    }));
                }
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;
    use crate::mas::parse_mas;

    fn two_agents(oa: &str, ob: &str) -> Mas {
        parse_mas(&format!(
            "agents: a b\natoms: p q\nobs a: {}\nobs b: {}\nstates: 1\ninit: 1\ntrans: 1->1\n",
            oa, ob
        ))
        .unwrap()
    }

    #[test]
    fn atom_tree() {
        let t = syntactic_tree(&parse_formula("p").unwrap());
        assert_eq!(t.len(), 1);
        assert!(t.nodes[0].closed);
        assert!(t.nodes[0].agncl.is_empty());
    }

    #[test]
    fn variable_gets_top_child() {
        let t = syntactic_tree(&parse_formula("Z").unwrap());
        assert_eq!(t.len(), 2);
        assert!(!t.nodes[0].closed);
        assert!(t.nodes[1].closed);
        assert_eq!(t.nodes[1].op, Op::True);
        assert_eq!(t.nodes[1].path, vec![1]);
    }

    #[test]
    fn agncl_up_to_binder() {
        let t = syntactic_tree(&parse_formula("mu Z. p | K[a] (EX Z)").unwrap());
        // mu, |, p, K, EX, Z, ⊤
        assert_eq!(t.len(), 7);
        let kx = t.find(&[1, 2]).unwrap();
        assert_eq!(t.nodes[kx].op, Op::K("a".into()));
        for path in [vec![1], vec![1, 2], vec![1, 2, 1]] {
            let x = t.find(&path).unwrap();
            let ag = &t.nodes[x].agncl;
            if path.len() <= 2 {
                assert!(ag.contains("a"), "{:?}", path);
            } else {
                assert!(ag.is_empty());
            }
        }
        assert!(t.nodes[0].agncl.is_empty(), "closed root");
        assert_eq!(t.nearest_closed_succs(0).len(), 2);
    }

    #[test]
    fn reference_examples_classify() {
        let ok1 = parse_formula("mu Z1. p | K[a] (EX Z1) & nu Z2. (q & Z1 & K[a] (EX Z2))").unwrap();
        assert_eq!(check_nonmixing(&ok1, &two_agents("p", "q")).unwrap(), None);
        let ok2 = parse_formula("mu Z1. p | K[a] (EX Z1) & nu Z2. (q & K[b] (EX Z2))").unwrap();
        assert_eq!(check_nonmixing(&ok2, &two_agents("p", "p q")).unwrap(), None);
        let cab = parse_formula("nu Z. (q & K[a] Z | K[b] Z)").unwrap();
        assert!(check_nonmixing(&cab, &two_agents("p", "q")).unwrap().is_some());
        let bad = parse_formula("mu Z1. p | K[a] (EX Z1) & nu Z2. (q & Z1 & K[b] (EX Z2))").unwrap();
        let v = check_nonmixing(&bad, &two_agents("p", "q")).unwrap().unwrap();
        assert_eq!((v.agent_a.as_str(), v.agent_b.as_str()), ("a", "b"));
    }

    #[test]
    fn fixture_examples_classify() {
        for (src, model, accept) in crate::fixtures::NONMIXING_EXAMPLES {
            let f = parse_formula(src).unwrap();
            let m = parse_mas(model).unwrap();
            assert_eq!(check_nonmixing(&f, &m).unwrap().is_none(), accept, "{}", src);
        }
    }

    #[test]
    fn closed_epistemic_arguments_do_not_mix() {
        let f = parse_formula("K[a] (EF p) & K[b] (AG q)").unwrap();
        assert_eq!(check_nonmixing(&f, &two_agents("p", "q")).unwrap(), None);
    }

    #[test]
    fn undeclared_agent() {
        let f = parse_formula("K[c] p").unwrap();
        assert!(check_nonmixing(&f, &two_agents("p", "q")).is_err());
    }
}
