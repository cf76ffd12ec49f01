//! Seeded generators for property suites: small systems, formulas and state splittings.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::distinction::InSplitting;
use crate::formula::{self as fm, Formula};
use crate::mas::{validate_mas, Mas};

#[derive(Debug, Clone)]
pub struct MasParams {
    pub max_states: usize,
    pub max_atoms: usize,
    pub max_agents: usize,
    /// Force Π_a ⊆ Π_b for the first two agents.
    pub nested_obs: bool,
    /// Allow more than one initial state.
    pub multi_init: bool,
}

impl Default for MasParams {
    fn default() -> Self {
        MasParams { max_states: 6, max_atoms: 3, max_agents: 2, nested_obs: false, multi_init: true }
    }
}

pub const AGENT_NAMES: [&str; 3] = ["a", "b", "c"];

fn random_subset<R: Rng>(rng: &mut R, items: &[String]) -> BTreeSet<String> {
    items.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect()
}

/// A valid system: every state reachable, every state with a successor.
pub fn random_mas<R: Rng>(rng: &mut R, p: &MasParams) -> Mas {
    let n = rng.gen_range(1..=p.max_states);
    let natoms = rng.gen_range(1..=p.max_atoms);
    let atoms: Vec<String> = (1..=natoms).map(|i| format!("p{}", i)).collect();
    let nag = rng.gen_range(1..=p.max_agents);
    let agents: Vec<String> = AGENT_NAMES[..nag].iter().map(|s| s.to_string()).collect();
    let mut obs = BTreeMap::new();
    for a in &agents {
        obs.insert(a.clone(), random_subset(rng, &atoms));
    }
    if p.nested_obs && nag >= 2 {
        let pa: BTreeSet<String> = obs["a"].clone();
        obs.get_mut("b").unwrap().extend(pa);
    }
    let mut labels = BTreeMap::new();
    for q in 1..=n {
        labels.insert(q, random_subset(rng, &atoms));
    }
    let mut trans = BTreeSet::new();
    for q in 2..=n {
        trans.insert((rng.gen_range(1..q), q));
    }
    for q in 1..=n {
        let extra = rng.gen_range(0..=2);
        for _ in 0..extra {
            trans.insert((q, rng.gen_range(1..=n)));
        }
        if !trans.iter().any(|&(s, _)| s == q) {
            trans.insert((q, rng.gen_range(1..=n)));
        }
    }
    let mut inits = BTreeSet::from([1]);
    if p.multi_init {
        for q in 2..=n {
            if rng.gen_bool(0.2) {
                inits.insert(q);
            }
        }
    }
    Mas::new(n, agents, atoms, obs, labels, trans, inits)
}

fn gen_plain<R: Rng>(rng: &mut R, depth: usize, atoms: &[String], scope: &mut Vec<String>, fresh: &mut usize) -> Formula {
    let leaf = depth == 0 || rng.gen_bool(0.25);
    if leaf {
        let k = rng.gen_range(0..4 + scope.len());
        return match k {
            0 => Formula::True,
            1 => Formula::False,
            2 => Formula::Atom(atoms.choose(rng).unwrap().clone()),
            3 => Formula::NegAtom(atoms.choose(rng).unwrap().clone()),
            _ => Formula::Var(scope[k - 4].clone()),
        };
    }
    match rng.gen_range(0..6) {
        0 => fm::and(gen_plain(rng, depth - 1, atoms, scope, fresh), gen_plain(rng, depth - 1, atoms, scope, fresh)),
        1 => fm::or(gen_plain(rng, depth - 1, atoms, scope, fresh), gen_plain(rng, depth - 1, atoms, scope, fresh)),
        2 => fm::ax(gen_plain(rng, depth - 1, atoms, scope, fresh)),
        3 => fm::ex(gen_plain(rng, depth - 1, atoms, scope, fresh)),
        k => {
            *fresh += 1;
            let z = format!("Z{}", fresh);
            scope.push(z.clone());
            let body = gen_plain(rng, depth - 1, atoms, scope, fresh);
            scope.pop();
            if k == 4 {
                fm::mu(&z, body)
            } else {
                fm::nu(&z, body)
            }
        }
    }
}

/// A closed formula without epistemic operators, of operator depth at most `depth`.
pub fn random_plain_formula<R: Rng>(rng: &mut R, depth: usize, atoms: &[String]) -> Formula {
    gen_plain(rng, depth, atoms, &mut Vec::new(), &mut 0).normalize()
}

fn gen_epistemic<R: Rng>(
    rng: &mut R,
    depth: usize,
    atoms: &[String],
    agents: &[String],
    open_k: bool,
    scope: &mut Vec<String>,
    fresh: &mut usize,
) -> Formula {
    if depth > 0 && rng.gen_bool(0.3) {
        let a = agents.choose(rng).unwrap();
        let arg = if open_k {
            gen_epistemic(rng, depth - 1, atoms, agents, open_k, scope, fresh)
        } else {
            gen_epistemic(rng, depth - 1, atoms, agents, open_k, &mut Vec::new(), fresh)
        };
        return if rng.gen_bool(0.5) { fm::k(a, arg) } else { fm::p(a, arg) };
    }
    let leaf = depth == 0 || rng.gen_bool(0.2);
    if leaf {
        let k = rng.gen_range(0..3 + scope.len());
        return match k {
            0 => Formula::True,
            1 => Formula::Atom(atoms.choose(rng).unwrap().clone()),
            2 => Formula::NegAtom(atoms.choose(rng).unwrap().clone()),
            _ => Formula::Var(scope[k - 3].clone()),
        };
    }
    let sub = |rng: &mut R, scope: &mut Vec<String>, fresh: &mut usize| {
        gen_epistemic(rng, depth - 1, atoms, agents, open_k, scope, fresh)
    };
    match rng.gen_range(0..6) {
        0 => fm::and(sub(rng, scope, fresh), sub(rng, scope, fresh)),
        1 => fm::or(sub(rng, scope, fresh), sub(rng, scope, fresh)),
        2 => fm::ax(sub(rng, scope, fresh)),
        3 => fm::ex(sub(rng, scope, fresh)),
        k => {
            *fresh += 1;
            let z = format!("Z{}", fresh);
            scope.push(z.clone());
            let body = sub(rng, scope, fresh);
            scope.pop();
            if k == 4 {
                fm::mu(&z, body)
            } else {
                fm::nu(&z, body)
            }
        }
    }
}

/// A closed formula whose K/P operators all have closed arguments, with at least one of them.
pub fn random_epistemic_formula<R: Rng>(rng: &mut R, depth: usize, atoms: &[String], agents: &[String]) -> Formula {
    loop {
        let f = gen_epistemic(rng, depth, atoms, agents, false, &mut Vec::new(), &mut 0).normalize();
        if !f.agents().is_empty() {
            return f;
        }
    }
}

/// A closed formula over one agent whose K/P operators may sit under fixpoint variables.
pub fn random_single_agent_formula<R: Rng>(rng: &mut R, depth: usize, atoms: &[String], agent: &str) -> Formula {
    let agents = [agent.to_string()];
    loop {
        let f = gen_epistemic(rng, depth, atoms, &agents, true, &mut Vec::new(), &mut 0).normalize();
        if !f.agents().is_empty() {
            return f;
        }
    }
}

/// Splits one state of `m` in two, returning the refined system and its in-splitting onto `m`.
pub fn random_state_split<R: Rng>(rng: &mut R, m: &Arc<Mas>) -> Option<(Arc<Mas>, InSplitting)> {
    let mut order: Vec<usize> = m.states().collect();
    order.shuffle(rng);
    for q in order {
        for _attempt in 0..8 {
            if let Some(res) = try_split(rng, m, q) {
                return Some(res);
            }
        }
    }
    None
}

fn try_split<R: Rng>(rng: &mut R, m: &Arc<Mas>, q: usize) -> Option<(Arc<Mas>, InSplitting)> {
    let n = m.n();
    let c = n + 1;
    let pick = |rng: &mut R| if rng.gen_bool(0.5) { q } else { c };
    let mut trans = BTreeSet::new();
    for &(s, r) in m.trans() {
        match (s == q, r == q) {
            (false, false) => {
                trans.insert((s, r));
            }
            (false, true) => {
                trans.insert((s, pick(rng)));
            }
            (true, false) => {
                trans.insert((q, r));
                trans.insert((c, r));
            }
            (true, true) => {
                trans.insert((q, pick(rng)));
                trans.insert((c, pick(rng)));
            }
        }
    }
    let mut inits: BTreeSet<usize> = m.inits().clone();
    if m.inits().contains(&q) {
        match rng.gen_range(0..3) {
            0 => {}
            1 => {
                inits.remove(&q);
                inits.insert(c);
            }
            _ => {
                inits.insert(c);
            }
        }
    }
    let mut labels = BTreeMap::new();
    for s in m.states() {
        labels.insert(s, m.label(s).clone());
    }
    labels.insert(c, m.label(q).clone());
    let src = Mas::new(
        c,
        m.agents().iter().cloned(),
        m.atoms().iter().cloned(),
        m.obs_map().clone(),
        labels,
        trans,
        inits,
    );
    if !validate_mas(&src).is_empty() {
        return None;
    }
    let mut st: Vec<usize> = (0..=n).collect();
    st.push(q);
    let src = Arc::new(src);
    let chi = InSplitting::from_state_map(src.clone(), m.clone(), st);
    Some((src, chi))
}
