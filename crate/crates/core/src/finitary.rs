//! State-based semantics: predicate transformers over state sets and the Γ_a relation.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::distinction::a_distinction;
use crate::error::{Error, Result};
use crate::formula::Formula;
use crate::mas::Mas;
use crate::stateset::StateSet;

/// Γ_a stored by rows: `row(q)` is `{ r | (q,r) ∈ Γ_a }`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gamma {
    rows: Vec<StateSet>,
}

impl Gamma {
    pub fn from_rows(rows: Vec<StateSet>) -> Gamma {
        Gamma { rows }
    }

    pub fn n(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn row(&self, q: usize) -> &StateSet {
        &self.rows[q]
    }

    pub fn related(&self, q: usize, r: usize) -> bool {
        self.rows[q].contains(r)
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        (1..self.rows.len()).flat_map(|q| self.rows[q].iter().map(move |r| (q, r))).collect()
    }

    /// Γ_a(S) = { q | ∃ s ∈ S, (s,q) ∈ Γ_a }.
    pub fn image(&self, s: &StateSet) -> StateSet {
        let mut out = StateSet::empty(self.n());
        for q in s.iter() {
            out.union_with(&self.rows[q]);
        }
        out
    }
}

/// (q,r) ∈ Γ_a iff r belongs to the information set of every reachable (q,S) in Δ_a(M).
pub fn compute_gamma(m: &Arc<Mas>, a: &str, budget: usize) -> Result<Gamma> {
    let d = a_distinction(m, a, budget)?;
    let mut rows: Vec<Option<StateSet>> = vec![None; m.n() + 1];
    for x in d.mas.states() {
        let q = d.base(x);
        let info = &d.info[x];
        rows[q] = Some(match rows[q].take() {
            None => info.clone(),
            Some(r) => r.intersection(info),
        });
    }
    let rows = rows
        .into_iter()
        .enumerate()
        .map(|(q, r)| r.unwrap_or_else(|| if q == 0 { m.none() } else { m.all() }))
        .collect();
    Ok(Gamma { rows })
}

pub fn ax_f(m: &Mas, s: &StateSet) -> StateSet {
    StateSet::from_states(m.n(), m.states().filter(|&q| m.succ(q).iter().all(|&r| s.contains(r))))
}

pub fn ex_f(m: &Mas, s: &StateSet) -> StateSet {
    let mut out = m.none();
    for r in s.iter() {
        for &q in m.pred(r) {
            out.insert(q);
        }
    }
    out
}

pub fn pa_f(g: &Gamma, s: &StateSet) -> StateSet {
    g.image(s)
}

pub fn ka_f(g: &Gamma, s: &StateSet) -> StateSet {
    g.image(&s.complement()).complement()
}

pub type VarEnv = BTreeMap<String, StateSet>;

/// Γ for every agent occurring in `f`.
pub fn gammas_for(f: &Formula, m: &Arc<Mas>, budget: usize) -> Result<BTreeMap<String, Gamma>> {
    let mut out = BTreeMap::new();
    for a in f.agents() {
        out.insert(a.clone(), compute_gamma(m, &a, budget)?);
    }
    Ok(out)
}

pub fn eval_finitary(f: &Formula, m: &Mas, env: &VarEnv, gammas: &BTreeMap<String, Gamma>) -> Result<StateSet> {
    use Formula::*;
    Ok(match f {
        True => m.all(),
        False => m.none(),
        Atom(p) => m.atom_set(p),
        NegAtom(p) => m.atom_set(p).complement(),
        Var(z) => env.get(z).cloned().ok_or_else(|| Error::Input(format!("unbound variable {}", z)))?,
        And(l, r) => eval_finitary(l, m, env, gammas)?.intersection(&eval_finitary(r, m, env, gammas)?),
        Or(l, r) => eval_finitary(l, m, env, gammas)?.union(&eval_finitary(r, m, env, gammas)?),
        AX(g) => ax_f(m, &eval_finitary(g, m, env, gammas)?),
        EX(g) => ex_f(m, &eval_finitary(g, m, env, gammas)?),
        K(a, g) | P(a, g) => {
            let gamma = gammas.get(a).ok_or_else(|| Error::Input(format!("no Γ for agent {}", a)))?;
            let s = eval_finitary(g, m, env, gammas)?;
            if matches!(f, K(..)) {
                ka_f(gamma, &s)
            } else {
                pa_f(gamma, &s)
            }
        }
        Mu(z, g) | Nu(z, g) => {
            let mut cur = if matches!(f, Mu(..)) { m.none() } else { m.all() };
            loop {
                let mut inner = env.clone();
                inner.insert(z.clone(), cur.clone());
                let next = eval_finitary(g, m, &inner, gammas)?;
                if next == cur {
                    break cur;
                }
                cur = next;
            }
        }
    })
}

/// ⌈f⌉ for a closed formula, computing Γ relations on the fly.
pub fn eval_closed(f: &Formula, m: &Arc<Mas>, budget: usize) -> Result<StateSet> {
    let gammas = gammas_for(f, m, budget)?;
    eval_finitary(f, m, &VarEnv::new(), &gammas)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;
    use crate::mas::parse_mas;
    use crate::fixtures::FIG1;

    fn fig1() -> Arc<Mas> {
        Arc::new(parse_mas(FIG1).unwrap())
    }

    fn set(n: usize, v: &[usize]) -> StateSet {
        StateSet::from_states(n, v.iter().copied())
    }

    #[test]
    fn fig1_gamma_and_knowledge() {
        let m = fig1();
        let g = compute_gamma(&m, "a", 100).unwrap();
        assert_eq!(g.image(&set(3, &[2])), set(3, &[2, 3]));
        assert_eq!(g.image(&set(3, &[3])), set(3, &[3]));
        assert_eq!(g.image(&set(3, &[1])), set(3, &[1]));
        assert_eq!(ka_f(&g, &set(3, &[1, 3])), set(3, &[1]));
        assert_eq!(pa_f(&g, &set(3, &[2])), set(3, &[2, 3]));
    }

    #[test]
    fn fig1_transformers() {
        let m = fig1();
        assert_eq!(ex_f(&m, &set(3, &[3])), set(3, &[1, 3]));
        assert_eq!(ax_f(&m, &m.all()), m.all());
    }

    #[test]
    fn full_observation_gives_identity() {
        let m = Arc::new(
            parse_mas(
                "agents: a\natoms: p q r\nobs a: p q r\nstates: 3\ninit: 1\nlabel 1: p\nlabel 2: q\nlabel 3: r\ntrans: 1->2 1->3 2->3 3->1\n",
            )
            .unwrap(),
        );
        let g = compute_gamma(&m, "a", 100).unwrap();
        assert_eq!(g.pairs(), vec![(1, 1), (2, 2), (3, 3)]);
    }

    #[test]
    fn fixpoints() {
        let m = fig1();
        let nu = parse_formula("nu Z. Z").unwrap();
        assert_eq!(eval_closed(&nu, &m, 100).unwrap(), m.all());
        let reach = parse_formula("mu Z. p1 | EX Z").unwrap();
        assert_eq!(eval_closed(&reach, &m, 100).unwrap(), m.all());
        let k = parse_formula("K[a] p1").unwrap();
        assert_eq!(eval_closed(&k, &m, 100).unwrap(), m.all());
    }

    #[test]
    fn unbound_variable_is_an_error() {
        let m = fig1();
        assert!(eval_finitary(&parse_formula("EX Z").unwrap(), &m, &VarEnv::new(), &BTreeMap::new()).is_err());
        assert!(eval_finitary(&parse_formula("K[a] p1").unwrap(), &m, &VarEnv::new(), &BTreeMap::new()).is_err());
    }
}
