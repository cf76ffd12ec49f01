//! In-splittings and the a-distinction subset construction.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::finitary::compute_gamma;
use crate::mas::{Mas, MasError};
use crate::stateset::StateSet;

pub const DEFAULT_STATE_BUDGET: usize = 200_000;

/// A pair of surjections from `src` onto `dst`; transitions map pointwise.
#[derive(Clone)]
pub struct InSplitting {
    pub src: Arc<Mas>,
    pub dst: Arc<Mas>,
    /// Index 0 is unused.
    pub st_map: Vec<usize>,
    pub tr_map: BTreeMap<(usize, usize), (usize, usize)>,
}

impl fmt::Debug for InSplitting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "InSplitting({} -> {} states, {:?})", self.src.n(), self.dst.n(), &self.st_map[1..])
    }
}

impl InSplitting {
    pub fn from_state_map(src: Arc<Mas>, dst: Arc<Mas>, st_map: Vec<usize>) -> InSplitting {
        assert_eq!(st_map.len(), src.n() + 1);
        let tr_map = src.trans().iter().map(|&(q, r)| ((q, r), (st_map[q], st_map[r]))).collect();
        InSplitting { src, dst, st_map, tr_map }
    }

    pub fn identity(m: Arc<Mas>) -> InSplitting {
        let st: Vec<usize> = (0..=m.n()).collect();
        InSplitting::from_state_map(m.clone(), m, st)
    }

    pub fn st(&self, q: usize) -> usize {
        self.st_map[q]
    }

    pub fn is_identity(&self) -> bool {
        same_mas(&self.src, &self.dst) && self.st_map.iter().enumerate().all(|(i, &q)| i == q)
    }

    pub fn is_bijective(&self) -> bool {
        if self.src.n() != self.dst.n() {
            return false;
        }
        let mut seen = vec![false; self.dst.n() + 1];
        for q in 1..=self.src.n() {
            let t = self.st_map[q];
            if t == 0 || t > self.dst.n() || seen[t] {
                return false;
            }
            seen[t] = true;
        }
        true
    }
}

pub fn same_mas(a: &Arc<Mas>, b: &Arc<Mas>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// Empty iff all in-splitting conditions hold.
pub fn verify_in_splitting(x: &InSplitting) -> Vec<String> {
    let mut out = Vec::new();
    let (src, dst) = (&x.src, &x.dst);
    if x.st_map.len() != src.n() + 1 {
        out.push(format!("state map has {} entries for {} states", x.st_map.len().saturating_sub(1), src.n()));
        return out;
    }
    let mut hit = StateSet::empty(dst.n());
    for q in src.states() {
        let t = x.st_map[q];
        if t < 1 || t > dst.n() {
            out.push(format!("state {} maps outside the target ({})", q, t));
            continue;
        }
        hit.insert(t);
        if src.label(q) != dst.label(t) {
            out.push(format!("label of {} differs from label of its image {}", q, t));
        }
        if src.succ(q).len() != dst.succ(t).len() {
            out.push(format!(
                "out-degree of {} is {} but its image {} has {}",
                q,
                src.succ(q).len(),
                t,
                dst.succ(t).len()
            ));
        }
    }
    if !out.is_empty() {
        return out;
    }
    if hit.len() != dst.n() {
        let missed: Vec<String> = hit.complement().iter().map(|q| q.to_string()).collect();
        out.push(format!("state map misses {}", missed.join(",")));
    }
    let mut tr_hit: BTreeSet<(usize, usize)> = BTreeSet::new();
    for &(q, r) in src.trans() {
        match x.tr_map.get(&(q, r)) {
            None => out.push(format!("transition {}->{} is not mapped", q, r)),
            Some(&(a, b)) => {
                if (a, b) != (x.st_map[q], x.st_map[r]) {
                    out.push(format!("transition {}->{} maps to {}->{} against the state map", q, r, a, b));
                }
                if !dst.trans().contains(&(a, b)) {
                    out.push(format!("image {}->{} of {}->{} is not a transition", a, b, q, r));
                }
                tr_hit.insert((a, b));
            }
        }
    }
    if x.tr_map.len() != src.trans().len() {
        out.push("transition map has entries for non-transitions".to_string());
    }
    for t in dst.trans() {
        if !tr_hit.contains(t) {
            out.push(format!("transition map misses {}->{}", t.0, t.1));
        }
    }
    let img: BTreeSet<usize> = src.inits().iter().map(|&q| x.st_map[q]).collect();
    if &img != dst.inits() {
        out.push(format!("initial states map to {:?}, expected {:?}", img, dst.inits()));
    }
    out
}

/// `inner` is applied first.
pub fn compose(outer: &InSplitting, inner: &InSplitting) -> Result<InSplitting> {
    if !same_mas(&inner.dst, &outer.src) {
        return Err(Error::Input("composition of in-splittings with mismatched systems".into()));
    }
    let st: Vec<usize> = (0..=inner.src.n()).map(|q| if q == 0 { 0 } else { outer.st(inner.st(q)) }).collect();
    Ok(InSplitting::from_state_map(inner.src.clone(), outer.dst.clone(), st))
}

pub fn preimage(x: &InSplitting, s: &StateSet) -> StateSet {
    StateSet::from_states(x.src.n(), x.src.states().filter(|&q| s.contains(x.st(q))))
}

/// Δ_a(M) with its in-splitting onto M and the information set of each new state.
#[derive(Clone, Debug)]
pub struct Distinction {
    pub mas: Arc<Mas>,
    pub chi: InSplitting,
    /// Indexed by new state; entry 0 unused.
    pub info: Vec<StateSet>,
}

impl Distinction {
    pub fn base(&self, q: usize) -> usize {
        self.chi.st(q)
    }

    /// Lines `(s,{...}) -> s`, one per new state.
    pub fn map_text(&self) -> String {
        let mut out = String::new();
        for q in self.mas.states() {
            let s = self.base(q);
            out.push_str(&format!("{}: ({},{}) -> {}\n", q, s, self.info[q], s));
        }
        out
    }
}

pub fn a_distinction(m: &Arc<Mas>, a: &str, budget: usize) -> Result<Distinction> {
    let cls = m.obs_classes(a)?;
    let nclasses = cls.iter().skip(1).copied().max().map_or(0, |c| c + 1);
    let mut class_sets = vec![m.none(); nclasses];
    for q in m.states() {
        class_sets[cls[q]].insert(q);
    }
    let mut index: HashMap<(usize, StateSet), usize> = HashMap::new();
    let mut states: Vec<(usize, StateSet)> = Vec::new();
    let mut queue: VecDeque<usize> = VecDeque::new();
    let mut inits = BTreeSet::new();

    let mut intern = |key: (usize, StateSet),
                      states: &mut Vec<(usize, StateSet)>,
                      queue: &mut VecDeque<usize>|
     -> Result<usize> {
        if let Some(&id) = index.get(&key) {
            return Ok(id);
        }
        if states.len() >= budget {
            return Err(Error::Budget(budget));
        }
        states.push(key.clone());
        let id = states.len();
        index.insert(key, id);
        queue.push_back(id);
        Ok(id)
    };

    for &q0 in m.inits() {
        let s0 = StateSet::from_states(m.n(), m.inits().iter().copied().filter(|&r| cls[r] == cls[q0]));
        let id = intern((q0, s0), &mut states, &mut queue)?;
        inits.insert(id);
    }
    let mut trans = BTreeSet::new();
    while let Some(id) = queue.pop_front() {
        let (s, info) = states[id - 1].clone();
        let mut post = m.none();
        for q in info.iter() {
            for &r in m.succ(q) {
                post.insert(r);
            }
        }
        for &r in m.succ(s) {
            let r_info = post.intersection(&class_sets[cls[r]]);
            let rid = intern((r, r_info), &mut states, &mut queue)?;
            trans.insert((id, rid));
        }
    }
    let n = states.len();
    let mut labels = BTreeMap::new();
    let mut st_map = vec![0; n + 1];
    let mut info = vec![StateSet::empty(m.n())];
    for (i, (s, set)) in states.into_iter().enumerate() {
        labels.insert(i + 1, m.label(s).clone());
        st_map[i + 1] = s;
        info.push(set);
    }
    let d = Mas::new(
        n,
        m.agents().iter().cloned(),
        m.atoms().iter().cloned(),
        m.obs_map().clone(),
        labels,
        trans,
        inits,
    );
    let d = Arc::new(d);
    let chi = InSplitting::from_state_map(d.clone(), m.clone(), st_map);
    Ok(Distinction { mas: d, chi, info })
}

/// Γ_a is an equivalence, a congruence for observation-matching steps, and relates
/// initial states with equal a-observation.
pub fn is_a_distinguished(m: &Arc<Mas>, a: &str, budget: usize) -> Result<bool> {
    if !m.has_agent(a) {
        return Err(MasError::UnknownAgent(a.to_string()).into());
    }
    let g = compute_gamma(m, a, budget)?;
    let cls = m.obs_classes(a)?;
    for q in m.states() {
        if !g.related(q, q) {
            return Ok(false);
        }
        for r in g.row(q).iter() {
            if !g.related(r, q) {
                return Ok(false);
            }
            if !g.row(r).is_subset(g.row(q)) {
                return Ok(false);
            }
            for &q2 in m.succ(q) {
                for &r2 in m.succ(r) {
                    if cls[q2] == cls[r2] && !g.related(q2, r2) {
                        return Ok(false);
                    }
                }
            }
        }
    }
    for &q in m.inits() {
        for &r in m.inits() {
            if cls[q] == cls[r] && !g.related(q, r) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
