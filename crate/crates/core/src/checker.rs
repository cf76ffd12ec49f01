//! The decision procedure for non-mixing formulas.
//!
//! Each closed node `c` of the syntactic tree heads a region made of `c` and its
//! non-closed descendants. The region is evaluated on a refinement N_c of the
//! input system: first the common refinement B of the models of its nearest
//! closed successors, then Δ_{a1}(…Δ_{ak}(B)) for the agents a1 ⊆ … ⊆ ak of the
//! epistemic operators inside the region. N_c is a_i-distinguished for every i,
//! so the state-based epistemic transformers are exact there, and the results of
//! the nearest closed successors enter as constants pulled back to N_c.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::Arc;

use serde::Serialize;

use crate::distinction::{a_distinction, compose, preimage, same_mas, verify_in_splitting, InSplitting};
use crate::error::{Error, Result};
use crate::finitary::{ax_f, compute_gamma, ex_f, ka_f, pa_f, Gamma};
use crate::formula::Formula;
use crate::mas::Mas;
use crate::stateset::StateSet;
use crate::syntree::{check_nonmixing, syntactic_tree, Op, SynTree};

#[derive(Debug, Clone)]
pub struct CheckOptions {
    pub budget: usize,
    /// Run the structural assertions on the in-splitting tree.
    pub verify: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { budget: crate::distinction::DEFAULT_STATE_BUDGET, verify: true }
    }
}

/// T^Ins(x) with the chain it was composed from.
#[derive(Debug, Clone)]
pub struct InsNode {
    pub map: InSplitting,
    /// Names of the chain steps in application order: `id`, `Delta[a]^-1`, `proj`.
    pub chain: Vec<String>,
    pub steps: Vec<InSplitting>,
}

#[derive(Debug, Clone)]
pub struct InsTree {
    pub tree: SynTree,
    pub nodes: Vec<InsNode>,
    pub base: Arc<Mas>,
    /// Canonical map from the root model onto the input system.
    pub root_to_m: InSplitting,
}

#[derive(Debug, Clone, Serialize)]
pub struct InsTraceEntry {
    pub node: String,
    pub subformula: String,
    pub closed: bool,
    pub chain: Vec<String>,
    pub dom_states: usize,
    pub codom_states: usize,
}

impl InsTree {
    pub fn trace(&self) -> Vec<InsTraceEntry> {
        self.tree
            .preorder()
            .into_iter()
            .map(|x| {
                let n = &self.tree.nodes[x];
                let ins = &self.nodes[x];
                InsTraceEntry {
                    node: n.path_string(),
                    subformula: n.form.to_string(),
                    closed: n.closed,
                    chain: ins.chain.clone(),
                    dom_states: ins.map.src.n(),
                    codom_states: ins.map.dst.n(),
                }
            })
            .collect()
    }

    /// Composite of T^Ins along the branch from the root down to `x`.
    pub fn composite(&self, x: usize) -> Result<InSplitting> {
        let branch = self.tree.branch(x);
        let mut acc = self.nodes[branch[0]].map.clone();
        for &y in &branch[1..] {
            acc = compose(&self.nodes[y].map, &acc)?;
        }
        Ok(acc)
    }

    /// Violations of the structural properties (empty when all hold).
    pub fn verify(&self) -> Vec<String> {
        let mut out = Vec::new();
        let t = &self.tree;
        for x in 0..t.len() {
            let node = &t.nodes[x];
            let ins = &self.nodes[x];
            let name = node.path_string();
            if (x == t.root() || !node.closed) && !ins.map.is_identity() {
                out.push(format!("node {} should carry an identity", name));
            }
            if let Some(p) = node.parent {
                if !same_mas(&ins.map.src, &self.nodes[p].map.dst) {
                    out.push(format!("node {} does not chain onto its parent", name));
                }
            }
            if ins.map.src.n() < ins.map.dst.n() {
                out.push(format!("node {} maps onto a larger system", name));
            }
            if x != t.root() && node.closed {
                let shape_ok = ins.chain.last().map(|s| s == "proj").unwrap_or(false)
                    && ins.chain[..ins.chain.len() - 1].iter().all(|s| s.starts_with("Delta["));
                if !shape_ok {
                    out.push(format!("node {} has chain {:?}", name, ins.chain));
                }
                let mut acc = InSplitting::identity(ins.map.src.clone());
                for s in &ins.steps {
                    match compose(s, &acc) {
                        Ok(c) => acc = c,
                        Err(_) => {
                            out.push(format!("node {} has a broken chain", name));
                            break;
                        }
                    }
                }
                if acc.st_map != ins.map.st_map || !same_mas(&acc.dst, &ins.map.dst) {
                    out.push(format!("node {} differs from its chain composite", name));
                }
                for s in &ins.steps {
                    for v in verify_in_splitting(s) {
                        out.push(format!("node {}: {}", name, v));
                    }
                }
            }
        }
        for leaf in t.leaves() {
            match self.composite(leaf) {
                Ok(c) => {
                    if c.st_map != self.root_to_m.st_map || !same_mas(&c.dst, &self.base) {
                        out.push(format!("root-to-leaf composite at {} differs", t.nodes[leaf].path_string()));
                    }
                }
                Err(e) => out.push(e.to_string()),
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessSet {
    pub subformula: String,
    /// Root-model states satisfying the subformula.
    pub states: StateSet,
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    /// Verdict per initial state of the input system.
    pub per_init: BTreeMap<usize, bool>,
    pub root_model: Arc<Mas>,
    pub root_set: StateSet,
    /// Closed node path → number of states of its region model.
    pub model_sizes: BTreeMap<String, usize>,
    pub ins: InsTree,
    pub witness_sets: BTreeMap<String, WitnessSet>,
}

impl CheckResult {
    pub fn holds_all(&self) -> bool {
        self.per_init.values().all(|&v| v)
    }

    pub fn holds_any(&self) -> bool {
        self.per_init.values().any(|&v| v)
    }

    pub fn root_model_size(&self) -> usize {
        self.root_model.n()
    }

    /// The unique run of the root model over a run of the input system.
    pub fn lift_run(&self, run: &[usize]) -> Option<Vec<usize>> {
        lift_run(&self.root_model, &self.ins.root_to_m.st_map, run)
    }
}

pub fn lift_run(n: &Mas, to_m: &[usize], run: &[usize]) -> Option<Vec<usize>> {
    let first = *run.first()?;
    let mut cur = *n.inits().iter().find(|&&q| to_m[q] == first)?;
    let mut out = vec![cur];
    for &r in &run[1..] {
        cur = *n.succ(cur).iter().find(|&&q| to_m[q] == r)?;
        out.push(cur);
    }
    Some(out)
}

/// Preimage of `s` (over the codomain of T^Ins(x)) along the root-to-x composite.
pub fn pullback_result(ins: &InsTree, x: usize, s: &StateSet) -> Result<StateSet> {
    let c = ins.composite(x)?;
    if s.universe() != c.dst.n() {
        return Err(Error::Input("state set does not live on the node's system".into()));
    }
    Ok(preimage(&c, s))
}

#[derive(Clone)]
struct Model {
    mas: Arc<Mas>,
    to_m: Vec<usize>,
}

struct Solver<'a> {
    m: Arc<Mas>,
    tree: &'a SynTree,
    budget: usize,
    models: Vec<Option<Model>>,
    sets: Vec<Option<StateSet>>,
    ins: Vec<Option<InsNode>>,
}

impl<'a> Solver<'a> {
    fn base_model(&self) -> Model {
        Model { mas: self.m.clone(), to_m: (0..=self.m.n()).collect() }
    }

    fn solve(&mut self, c: usize) -> Result<()> {
        let t = self.tree;
        let ncs = t.nearest_closed_succs(c);
        for &d in &ncs {
            self.solve(d)?;
        }

        let mut distinct: Vec<Model> = Vec::new();
        for &d in &ncs {
            let md = self.models[d].clone().unwrap();
            if Arc::ptr_eq(&md.mas, &self.m) || distinct.iter().any(|x| Arc::ptr_eq(&x.mas, &md.mas)) {
                continue;
            }
            distinct.push(md);
        }
        let (b, projections) = match distinct.len() {
            0 => (self.base_model(), Vec::new()),
            1 => {
                let only = distinct[0].clone();
                let id: Vec<usize> = (0..=only.mas.n()).collect();
                (only, vec![id])
            }
            _ => product(&self.m, &distinct, self.budget)?,
        };

        let region = t.region(c);
        let mut agents: Vec<String> = Vec::new();
        for &y in &region {
            if let Some(a) = t.nodes[y].agent() {
                if !agents.iter().any(|x| x == a) {
                    agents.push(a.to_string());
                }
            }
        }
        agents.sort_by_key(|a| (self.m.obs(a).map_or(0, |p| p.len()), a.clone()));

        // Δ for the largest observation set is applied first.
        let mut cur = b.mas.clone();
        let mut deltas: Vec<(String, InSplitting)> = Vec::new();
        for a in agents.iter().rev() {
            let d = a_distinction(&cur, a, self.budget)?;
            deltas.push((a.clone(), d.chi));
            cur = d.mas;
        }
        deltas.reverse();
        let nc = cur;
        let mut to_b = InSplitting::identity(nc.clone());
        let mut chain_names: Vec<String> = Vec::new();
        let mut chain_steps: Vec<InSplitting> = Vec::new();
        for (a, chi) in &deltas {
            to_b = compose(chi, &to_b)?;
            chain_names.push(format!("Delta[{}]^-1", a));
            chain_steps.push(chi.clone());
        }
        let to_m: Vec<usize> = (0..=nc.n()).map(|q| if q == 0 { 0 } else { b.to_m[to_b.st(q)] }).collect();
        let model = Model { mas: nc.clone(), to_m: to_m.clone() };

        // T^Ins for the nearest closed successors and constants pulled back to N_c.
        let mut consts: HashMap<usize, StateSet> = HashMap::new();
        for &d in &ncs {
            let md = self.models[d].clone().unwrap();
            let proj_map: Vec<usize> = if Arc::ptr_eq(&md.mas, &b.mas) {
                (0..=b.mas.n()).collect()
            } else if Arc::ptr_eq(&md.mas, &self.m) {
                b.to_m.clone()
            } else {
                let k = distinct.iter().position(|x| Arc::ptr_eq(&x.mas, &md.mas)).unwrap();
                projections[k].clone()
            };
            let proj = InSplitting::from_state_map(b.mas.clone(), md.mas.clone(), proj_map);
            let map = compose(&proj, &to_b)?;
            let mut names = chain_names.clone();
            names.push("proj".into());
            let mut steps = chain_steps.clone();
            steps.push(proj);
            consts.insert(d, preimage(&map, self.sets[d].as_ref().unwrap()));
            self.ins[d] = Some(InsNode { map, chain: names, steps });
        }
        for &y in &region {
            if y != c || c == t.root() {
                self.ins[y] = Some(InsNode {
                    map: InSplitting::identity(nc.clone()),
                    chain: vec!["id".into()],
                    steps: Vec::new(),
                });
            }
        }

        let mut gammas: BTreeMap<String, Gamma> = BTreeMap::new();
        for a in &agents {
            gammas.insert(a.clone(), compute_gamma(&nc, a, self.budget)?);
        }
        let ev = RegionEval { tree: t, top: c, m: &nc, consts: &consts, gammas: &gammas };
        let set = ev.eval(c, &BTreeMap::new())?;
        self.models[c] = Some(model);
        self.sets[c] = Some(set);
        Ok(())
    }
}

/// Common refinement of several in-splittings of M: reachable tuples over equal base states.
fn product(m: &Arc<Mas>, models: &[Model], budget: usize) -> Result<(Model, Vec<Vec<usize>>)> {
    let k = models.len();
    let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut tuples: Vec<Vec<usize>> = Vec::new();
    let mut queue = VecDeque::new();
    let mut inits = std::collections::BTreeSet::new();
    let mut trans = std::collections::BTreeSet::new();
    let mut intern = |t: Vec<usize>, tuples: &mut Vec<Vec<usize>>, queue: &mut VecDeque<usize>| -> Result<usize> {
        if let Some(&id) = index.get(&t) {
            return Ok(id);
        }
        if tuples.len() >= budget {
            return Err(Error::Budget(budget));
        }
        tuples.push(t.clone());
        let id = tuples.len();
        index.insert(t, id);
        queue.push_back(id);
        Ok(id)
    };
    for &q0 in m.inits() {
        let mut t = Vec::with_capacity(k);
        for md in models {
            let over: Vec<usize> = md.mas.inits().iter().copied().filter(|&q| md.to_m[q] == q0).collect();
            if over.len() != 1 {
                return Err(Error::Input("refinement without a unique initial state over the base".into()));
            }
            t.push(over[0]);
        }
        let id = intern(t, &mut tuples, &mut queue)?;
        inits.insert(id);
    }
    while let Some(id) = queue.pop_front() {
        let t = tuples[id - 1].clone();
        let s = models[0].to_m[t[0]];
        for &r in m.succ(s) {
            let mut next = Vec::with_capacity(k);
            for (i, md) in models.iter().enumerate() {
                let over: Vec<usize> = md.mas.succ(t[i]).iter().copied().filter(|&q| md.to_m[q] == r).collect();
                if over.len() != 1 {
                    return Err(Error::Input("refinement is not locally bijective".into()));
                }
                next.push(over[0]);
            }
            let rid = intern(next, &mut tuples, &mut queue)?;
            trans.insert((id, rid));
        }
    }
    let n = tuples.len();
    let mut labels = BTreeMap::new();
    let mut to_m = vec![0; n + 1];
    let mut proj = vec![vec![0; n + 1]; k];
    for (i, t) in tuples.iter().enumerate() {
        let base = models[0].to_m[t[0]];
        labels.insert(i + 1, m.label(base).clone());
        to_m[i + 1] = base;
        for j in 0..k {
            proj[j][i + 1] = t[j];
        }
    }
    let mas = Mas::new(
        n,
        m.agents().iter().cloned(),
        m.atoms().iter().cloned(),
        m.obs_map().clone(),
        labels,
        trans,
        inits,
    );
    Ok((Model { mas: Arc::new(mas), to_m }, proj))
}

struct RegionEval<'a> {
    tree: &'a SynTree,
    top: usize,
    m: &'a Mas,
    consts: &'a HashMap<usize, StateSet>,
    gammas: &'a BTreeMap<String, Gamma>,
}

impl<'a> RegionEval<'a> {
    fn eval(&self, x: usize, env: &BTreeMap<String, StateSet>) -> Result<StateSet> {
        let node = &self.tree.nodes[x];
        if x != self.top && node.closed {
            return Ok(self.consts[&x].clone());
        }
        let kids = &node.children;
        let m = self.m;
        Ok(match &node.op {
            Op::True => m.all(),
            Op::False => m.none(),
            Op::Atom(p) => m.atom_set(p),
            Op::NegAtom(p) => m.atom_set(p).complement(),
            Op::Var(z) => env.get(z).cloned().ok_or_else(|| Error::Input(format!("unbound variable {}", z)))?,
            Op::And => self.eval(kids[0], env)?.intersection(&self.eval(kids[1], env)?),
            Op::Or => self.eval(kids[0], env)?.union(&self.eval(kids[1], env)?),
            Op::AX => ax_f(m, &self.eval(kids[0], env)?),
            Op::EX => ex_f(m, &self.eval(kids[0], env)?),
            Op::K(a) => ka_f(&self.gammas[a], &self.eval(kids[0], env)?),
            Op::P(a) => pa_f(&self.gammas[a], &self.eval(kids[0], env)?),
            Op::Mu(z) | Op::Nu(z) => {
                let mut cur = if matches!(node.op, Op::Mu(_)) { m.none() } else { m.all() };
                loop {
                    let mut inner = env.clone();
                    inner.insert(z.clone(), cur.clone());
                    let next = self.eval(kids[0], &inner)?;
                    if next == cur {
                        break cur;
                    }
                    cur = next;
                }
            }
        })
    }
}

/// Builds the in-splitting tree and evaluates every region.
pub fn build_ins_tree(f: &Formula, m: &Arc<Mas>, opts: &CheckOptions) -> Result<(InsTree, Vec<Option<StateSet>>)> {
    if !f.is_closed() {
        let free: Vec<String> = f.free_vars().into_iter().collect();
        return Err(Error::Input(format!("formula is not closed (free: {})", free.join(", "))));
    }
    if let Some(v) = check_nonmixing(f, m)? {
        return Err(Error::NonMixing(v));
    }
    let tree = syntactic_tree(f);
    let n = tree.len();
    let mut solver = Solver {
        m: m.clone(),
        tree: &tree,
        budget: opts.budget,
        models: vec![None; n],
        sets: vec![None; n],
        ins: vec![None; n],
    };
    solver.solve(tree.root())?;
    let root_model = solver.models[0].clone().unwrap();
    let nodes: Vec<InsNode> = solver.ins.into_iter().map(|x| x.unwrap()).collect();
    let sets = solver.sets;
    let root_to_m = InSplitting::from_state_map(root_model.mas.clone(), m.clone(), root_model.to_m);
    let ins = InsTree { tree, nodes, base: m.clone(), root_to_m };
    if opts.verify {
        let v = ins.verify();
        if !v.is_empty() {
            return Err(Error::Input(format!("internal: in-splitting tree invariants failed: {}", v.join("; "))));
        }
    }
    Ok((ins, sets))
}

pub fn model_check(f: &Formula, m: &Arc<Mas>, opts: &CheckOptions) -> Result<CheckResult> {
    let (ins, sets) = build_ins_tree(f, m, opts)?;
    let root = ins.tree.root();
    let root_model = ins.nodes[root].map.dst.clone();
    let root_set = sets[root].clone().unwrap();
    let mut per_init = BTreeMap::new();
    for &q0 in m.inits() {
        let lifted = lift_run(&root_model, &ins.root_to_m.st_map, &[q0])
            .ok_or_else(|| Error::Input("initial state without a lift".into()))?;
        per_init.insert(q0, root_set.contains(lifted[0]));
    }
    let mut model_sizes = BTreeMap::new();
    let mut witness_sets = BTreeMap::new();
    for x in 0..ins.tree.len() {
        if let Some(s) = &sets[x] {
            let node = &ins.tree.nodes[x];
            model_sizes.insert(node.path_string(), s.universe());
            let states = if x == root {
                s.clone()
            } else {
                let c = ins.composite(x)?;
                preimage(&c, s)
            };
            witness_sets.insert(node.path_string(), WitnessSet { subformula: node.form.to_string(), states });
        }
    }
    Ok(CheckResult { per_init, root_model, root_set, model_sizes, ins, witness_sets })
}
