//! Bounded unfoldings and brute-force tree semantics.
//!
//! Every formula gets a lower and an upper approximation over the nodes of the
//! depth-bounded unfolding. Frontier nodes have unknown successors, so AX/EX are
//! false in the lower and true in the upper evaluation; K/P are exact because
//! indistinguishable runs have equal length and the tree holds whole levels.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use serde::Serialize;

use crate::checker::{model_check, CheckOptions};
use crate::distinction::{verify_in_splitting, InSplitting};
use crate::error::{Error, Result};
use crate::finitary::{compute_gamma, eval_closed, ka_f, pa_f};
use crate::formula::Formula;
use crate::mas::{Mas, MasError, Run};
use crate::stateset::StateSet;

pub const DEFAULT_DEPTH: usize = 6;
pub const DEFAULT_FUEL: usize = 16;

pub type NodeSet = FixedBitSet;

pub struct BoundedTree {
    pub mas: Arc<Mas>,
    pub depth: usize,
    pub runs: Vec<Run>,
    pub parent: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    classes: BTreeMap<String, Vec<usize>>,
    members: BTreeMap<String, Vec<Vec<usize>>>,
    index: HashMap<Run, usize>,
}

impl BoundedTree {
    pub fn new(m: &Arc<Mas>, depth: usize, cap: usize) -> Result<BoundedTree> {
        if depth == 0 {
            return Err(Error::Input("depth must be positive".into()));
        }
        let mut runs: Vec<Run> = Vec::new();
        let mut parent = Vec::new();
        for &q in m.inits() {
            runs.push(vec![q]);
            parent.push(None);
        }
        let mut start = 0;
        for _ in 1..depth {
            let end = runs.len();
            for i in start..end {
                let last = *runs[i].last().unwrap();
                for &r in m.succ(last) {
                    if runs.len() >= cap {
                        return Err(MasError::Budget(cap).into());
                    }
                    let mut next = runs[i].clone();
                    next.push(r);
                    runs.push(next);
                    parent.push(Some(i));
                }
            }
            start = end;
        }
        let mut children = vec![Vec::new(); runs.len()];
        for (i, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(i);
            }
        }
        let mut classes = BTreeMap::new();
        let mut members = BTreeMap::new();
        for a in m.agents() {
            let obs = m.obs_classes(a)?;
            let mut ids: HashMap<(usize, usize), usize> = HashMap::new();
            let mut cls = vec![0; runs.len()];
            let mut mem: Vec<Vec<usize>> = Vec::new();
            for i in 0..runs.len() {
                let up = parent[i].map_or(usize::MAX, |p| cls[p]);
                let key = (up, obs[*runs[i].last().unwrap()]);
                let next = ids.len();
                let c = *ids.entry(key).or_insert(next);
                if c == mem.len() {
                    mem.push(Vec::new());
                }
                mem[c].push(i);
                cls[i] = c;
            }
            classes.insert(a.clone(), cls);
            members.insert(a.clone(), mem);
        }
        let index = runs.iter().enumerate().map(|(i, r)| (r.clone(), i)).collect();
        Ok(BoundedTree { mas: m.clone(), depth, runs, parent, children, classes, members, index })
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn level(&self, x: usize) -> usize {
        self.runs[x].len()
    }

    pub fn last(&self, x: usize) -> usize {
        *self.runs[x].last().unwrap()
    }

    pub fn node_of(&self, run: &[usize]) -> Option<usize> {
        self.index.get(run).copied()
    }

    pub fn is_frontier(&self, x: usize) -> bool {
        self.level(x) == self.depth
    }

    /// The ~_a class of `x` (nodes of the same level with equal observation sequences).
    pub fn class_of(&self, a: &str, x: usize) -> &[usize] {
        let c = self.classes[a][x];
        &self.members[a][c]
    }

    pub fn equiv(&self, a: &str, x: usize, y: usize) -> bool {
        self.classes[a][x] == self.classes[a][y]
    }

    pub fn empty_set(&self) -> NodeSet {
        FixedBitSet::with_capacity(self.len())
    }

    pub fn full_set(&self) -> NodeSet {
        let mut s = self.empty_set();
        s.insert_range(..);
        s
    }

    /// t_M^{-1}(S): nodes whose last state is in `s`.
    pub fn lift(&self, s: &StateSet) -> NodeSet {
        let mut out = self.empty_set();
        for x in 0..self.len() {
            if s.contains(self.last(x)) {
                out.insert(x);
            }
        }
        out
    }

    fn ax(&self, s: &NodeSet, upper: bool) -> NodeSet {
        let mut out = self.empty_set();
        for x in 0..self.len() {
            let v = if self.is_frontier(x) { upper } else { self.children[x].iter().all(|&c| s.contains(c)) };
            out.set(x, v);
        }
        out
    }

    fn ex(&self, s: &NodeSet, upper: bool) -> NodeSet {
        let mut out = self.empty_set();
        for x in 0..self.len() {
            let v = if self.is_frontier(x) { upper } else { self.children[x].iter().any(|&c| s.contains(c)) };
            out.set(x, v);
        }
        out
    }

    /// K_a on the bounded tree: all ~_a-equivalent nodes are in `s`.
    pub fn k(&self, a: &str, s: &NodeSet) -> NodeSet {
        let mem = &self.members[a];
        let mut out = self.empty_set();
        for class in mem {
            if class.iter().all(|&y| s.contains(y)) {
                for &y in class {
                    out.insert(y);
                }
            }
        }
        out
    }

    pub fn p(&self, a: &str, s: &NodeSet) -> NodeSet {
        let mem = &self.members[a];
        let mut out = self.empty_set();
        for class in mem {
            if class.iter().any(|&y| s.contains(y)) {
                for &y in class {
                    out.insert(y);
                }
            }
        }
        out
    }

    fn eval(
        &self,
        f: &Formula,
        upper: bool,
        env: &BTreeMap<String, NodeSet>,
        fuel: usize,
        used: &mut usize,
    ) -> Result<NodeSet> {
        use Formula::*;
        let m = &self.mas;
        Ok(match f {
            True => self.full_set(),
            False => self.empty_set(),
            Atom(p) | NegAtom(p) => {
                let want = matches!(f, Atom(_));
                let mut out = self.empty_set();
                for x in 0..self.len() {
                    out.set(x, m.has_atom(self.last(x), p) == want);
                }
                out
            }
            Var(z) => env.get(z).cloned().ok_or_else(|| Error::Input(format!("unbound variable {}", z)))?,
            And(l, r) => {
                let mut a = self.eval(l, upper, env, fuel, used)?;
                a.intersect_with(&self.eval(r, upper, env, fuel, used)?);
                a
            }
            Or(l, r) => {
                let mut a = self.eval(l, upper, env, fuel, used)?;
                a.union_with(&self.eval(r, upper, env, fuel, used)?);
                a
            }
            AX(g) => self.ax(&self.eval(g, upper, env, fuel, used)?, upper),
            EX(g) => self.ex(&self.eval(g, upper, env, fuel, used)?, upper),
            K(a, g) | P(a, g) => {
                if !self.members.contains_key(a) {
                    return Err(MasError::UnknownAgent(a.clone()).into());
                }
                let s = self.eval(g, upper, env, fuel, used)?;
                if matches!(f, K(..)) {
                    self.k(a, &s)
                } else {
                    self.p(a, &s)
                }
            }
            Mu(z, g) | Nu(z, g) => {
                let mut cur = if matches!(f, Mu(..)) { self.empty_set() } else { self.full_set() };
                let mut steps = 0;
                loop {
                    let mut inner = env.clone();
                    inner.insert(z.clone(), cur.clone());
                    let next = self.eval(g, upper, &inner, fuel, used)?;
                    if next == cur {
                        break;
                    }
                    steps += 1;
                    if steps > fuel {
                        return Err(Error::Input(format!("fixpoint {} did not stabilize within {} approximants", z, fuel)));
                    }
                    cur = next;
                }
                *used = (*used).max(steps);
                cur
            }
        })
    }
}

#[derive(Debug, Clone)]
pub struct BoundedEval {
    pub lower: NodeSet,
    pub upper: NodeSet,
    /// Largest d such that every node of length at most d is decided.
    pub exact_depth: usize,
    /// Most approximants any fixpoint needed.
    pub approximants: usize,
}

impl BoundedEval {
    pub fn decided(&self, x: usize) -> bool {
        self.lower.contains(x) == self.upper.contains(x)
    }

    pub fn value(&self, x: usize) -> Option<bool> {
        if self.decided(x) {
            Some(self.lower.contains(x))
        } else {
            None
        }
    }
}

/// Lower and upper approximations of ‖f‖ on the bounded tree; free variables bind exact node sets.
pub fn tree_eval_bounded(
    f: &Formula,
    bt: &BoundedTree,
    env: &BTreeMap<String, NodeSet>,
    fuel: usize,
) -> Result<BoundedEval> {
    let mut used = 0;
    let lower = bt.eval(f, false, env, fuel, &mut used)?;
    let upper = bt.eval(f, true, env, fuel, &mut used)?;
    debug_assert!(lower.is_subset(&upper));
    let mut worst = bt.depth + 1;
    for x in 0..bt.len() {
        if lower.contains(x) != upper.contains(x) {
            worst = worst.min(bt.level(x));
        }
    }
    Ok(BoundedEval { lower, upper, exact_depth: worst - 1, approximants: used })
}

fn run_string(r: &[usize]) -> String {
    r.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(".")
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagramReport {
    pub depth: usize,
    pub nodes: usize,
    pub compared: usize,
    pub exact_depth: usize,
    pub approximants: usize,
    pub mismatches: Vec<String>,
}

/// Compares node membership with membership of the node's last state in ⌈f⌉ on decided nodes.
pub fn check_plain_diagram(f: &Formula, m: &Arc<Mas>, depth: usize, fuel: usize, cap: usize) -> Result<DiagramReport> {
    if !f.is_plain() || !f.is_closed() {
        return Err(Error::Input("plain diagram needs a closed formula without epistemic operators".into()));
    }
    let fin = eval_closed(f, m, 0)?;
    let bt = BoundedTree::new(m, depth, cap)?;
    let ev = tree_eval_bounded(f, &bt, &BTreeMap::new(), fuel)?;
    let mut compared = 0;
    let mut mismatches = Vec::new();
    for x in 0..bt.len() {
        if let Some(v) = ev.value(x) {
            compared += 1;
            if v != fin.contains(bt.last(x)) {
                mismatches.push(run_string(&bt.runs[x]));
            }
        }
    }
    Ok(DiagramReport {
        depth,
        nodes: bt.len(),
        compared,
        exact_depth: ev.exact_depth,
        approximants: ev.approximants,
        mismatches,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Modality {
    K,
    P,
}

/// Compares t_M^{-1}(K_a^f(S)) with K_a(t_M^{-1}(S)) (or the P variant) on every node.
pub fn check_epistemic_diagram(
    m: &Arc<Mas>,
    a: &str,
    s: &StateSet,
    depth: usize,
    modality: Modality,
    budget: usize,
    cap: usize,
) -> Result<DiagramReport> {
    let g = compute_gamma(m, a, budget)?;
    let fin = match modality {
        Modality::K => ka_f(&g, s),
        Modality::P => pa_f(&g, s),
    };
    let bt = BoundedTree::new(m, depth, cap)?;
    let lifted = bt.lift(s);
    let tree = match modality {
        Modality::K => bt.k(a, &lifted),
        Modality::P => bt.p(a, &lifted),
    };
    let mismatches = (0..bt.len())
        .filter(|&x| tree.contains(x) != fin.contains(bt.last(x)))
        .map(|x| run_string(&bt.runs[x]))
        .collect();
    Ok(DiagramReport { depth, nodes: bt.len(), compared: bt.len(), exact_depth: depth, approximants: 0, mismatches })
}

/// χ̂ maps runs of `src` pointwise; it must be a bijection of bounded trees commuting with labels.
pub fn check_hat_bijection(chi: &InSplitting, depth: usize, cap: usize) -> Result<bool> {
    let b1 = BoundedTree::new(&chi.src, depth, cap)?;
    let b2 = BoundedTree::new(&chi.dst, depth, cap)?;
    if b1.len() != b2.len() {
        return Ok(false);
    }
    let mut hit = vec![false; b2.len()];
    for x in 0..b1.len() {
        let img: Run = b1.runs[x].iter().map(|&q| chi.st(q)).collect();
        match b2.node_of(&img) {
            None => return Ok(false),
            Some(y) => {
                if hit[y] || chi.src.label(b1.last(x)) != chi.dst.label(b2.last(y)) {
                    return Ok(false);
                }
                hit[y] = true;
            }
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Serialize)]
pub struct IsoReport {
    pub nodes: usize,
    pub mismatches: Vec<String>,
}

/// Bounded evaluations on both systems agree under the node bijection induced by a bijective in-splitting.
pub fn check_iso_invariance(iso: &InSplitting, f: &Formula, depth: usize, fuel: usize, cap: usize) -> Result<IsoReport> {
    if !iso.is_bijective() || !verify_in_splitting(iso).is_empty() {
        return Err(Error::Input("isomorphism check needs a bijective in-splitting".into()));
    }
    let b1 = BoundedTree::new(&iso.src, depth, cap)?;
    let b2 = BoundedTree::new(&iso.dst, depth, cap)?;
    let e1 = tree_eval_bounded(f, &b1, &BTreeMap::new(), fuel)?;
    let e2 = tree_eval_bounded(f, &b2, &BTreeMap::new(), fuel)?;
    let mut mismatches = Vec::new();
    for x in 0..b1.len() {
        let img: Run = b1.runs[x].iter().map(|&q| iso.st(q)).collect();
        let y = b2.node_of(&img).ok_or_else(|| Error::Input("node without image".into()))?;
        if e1.lower.contains(x) != e2.lower.contains(y) || e1.upper.contains(x) != e2.upper.contains(y) {
            mismatches.push(run_string(&b1.runs[x]));
        }
    }
    Ok(IsoReport { nodes: b1.len(), mismatches })
}

#[derive(Debug, Clone, Serialize)]
pub struct AgreementReport {
    pub nodes: usize,
    pub compared: usize,
    pub exact_depth: usize,
    pub mismatches: Vec<String>,
}

/// Compares the checker's root-model verdict on each run with the bounded tree semantics, on decided nodes.
pub fn check_agreement(
    f: &Formula,
    m: &Arc<Mas>,
    opts: &CheckOptions,
    depth: usize,
    fuel: usize,
    cap: usize,
) -> Result<AgreementReport> {
    let res = model_check(f, m, opts)?;
    let bt = BoundedTree::new(m, depth, cap)?;
    let ev = tree_eval_bounded(f, &bt, &BTreeMap::new(), fuel)?;
    let mut compared = 0;
    let mut mismatches = Vec::new();
    for x in 0..bt.len() {
        let Some(v) = ev.value(x) else { continue };
        compared += 1;
        let lifted = res
            .lift_run(&bt.runs[x])
            .ok_or_else(|| Error::Input(format!("run {} does not lift", run_string(&bt.runs[x]))))?;
        if v != res.root_set.contains(*lifted.last().unwrap()) {
            mismatches.push(run_string(&bt.runs[x]));
        }
    }
    Ok(AgreementReport { nodes: bt.len(), compared, exact_depth: ev.exact_depth, mismatches })
}
