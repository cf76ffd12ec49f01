//! Acceptance run: one PASS/FAIL line per criterion.

use std::collections::BTreeSet;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use epimu::checker::CheckOptions;
use epimu::distinction::{a_distinction, compose, is_a_distinguished, preimage, verify_in_splitting, InSplitting};
use epimu::finitary::{compute_gamma, eval_closed, ka_f, pa_f};
use epimu::fixtures::{FIG1, FIG2, NONMIXING_EXAMPLES};
use epimu::hardness::{parse_sfx, shortest_member, verify_reduction};
use epimu::mas::{parse_mas, Mas, DEFAULT_NODE_CAP};
use epimu::oracle::{check_agreement, check_epistemic_diagram, check_plain_diagram, Modality};
use epimu::random::{random_epistemic_formula, random_mas, random_plain_formula, random_state_split, MasParams};
use epimu::syntree::check_nonmixing;
use epimu::{parse_formula, StateSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BUDGET: usize = 200_000;

struct Outcome {
    ok: bool,
    detail: String,
}

fn pass(detail: impl Into<String>) -> Outcome {
    Outcome { ok: true, detail: detail.into() }
}

fn fail(detail: impl Into<String>) -> Outcome {
    Outcome { ok: false, detail: detail.into() }
}

fn set(n: usize, v: &[usize]) -> StateSet {
    StateSet::from_states(n, v.iter().copied())
}

fn fig(text: &str) -> Arc<Mas> {
    Arc::new(parse_mas(text).unwrap())
}

/// Random systems of the property corpus.
fn corpus(seed: u64, count: usize, params: &MasParams) -> Vec<Arc<Mas>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| Arc::new(random_mas(&mut rng, params))).collect()
}

fn c1() -> Outcome {
    let m = fig(FIG1);
    let g = compute_gamma(&m, "a", BUDGET).unwrap();
    let k = ka_f(&g, &set(3, &[1, 3]));
    let p = pa_f(&g, &set(3, &[2]));
    let ok = k == set(3, &[1]) && p == set(3, &[2, 3]);
    let d = format!("K^f({{1,3}})={} P^f({{2}})={}", k, p);
    if ok {
        pass(d)
    } else {
        fail(d)
    }
}

fn c2() -> Outcome {
    let m = fig(FIG2);
    let g = compute_gamma(&m, "a", BUDGET).unwrap();
    let s = set(4, &[1, 4]);
    let k = ka_f(&g, &s);
    let rep = check_epistemic_diagram(&m, "a", &s, 5, Modality::K, BUDGET, DEFAULT_NODE_CAP).unwrap();
    // a mismatch is a run ending in 4 at an odd level, counting the root as level 0
    let pattern = rep.mismatches.iter().all(|r| {
        let states: Vec<&str> = r.split('.').collect();
        states.last() == Some(&"4") && (states.len() - 1) % 2 == 1
    });
    let ok = k == s && rep.mismatches == vec!["1.3.4.4".to_string()] && pattern;
    let d = format!("K^f({{1,4}})={} mismatches={:?} of {} nodes", k, rep.mismatches, rep.nodes);
    if ok {
        pass(d)
    } else {
        fail(d)
    }
}

fn params6() -> MasParams {
    MasParams { max_states: 6, max_atoms: 3, max_agents: 2, nested_obs: false, multi_init: true }
}

fn c3() -> Outcome {
    let mut checked = 0;
    for m in corpus(3, 200, &params6()) {
        for a in m.agents() {
            let d = a_distinction(&m, a, BUDGET).unwrap();
            let errs = verify_in_splitting(&d.chi);
            if !errs.is_empty() {
                return fail(format!("in-splitting violated: {:?}\n{}", errs, m.to_text()));
            }
            if !is_a_distinguished(&d.mas, a, BUDGET).unwrap() {
                return fail(format!("not {}-distinguished\n{}", a, m.to_text()));
            }
            checked += 1;
        }
    }
    pass(format!("200 systems, {} distinctions", checked))
}

fn c4() -> Outcome {
    let mut pairs = 0;
    for m in corpus(3, 200, &params6()) {
        for a in m.agents() {
            let d = a_distinction(&m, a, BUDGET).unwrap();
            let g = compute_gamma(&d.mas, a, BUDGET).unwrap();
            let n = d.mas.n();
            for x in 1..=n {
                for y in 1..=n {
                    if g.related(x, y) != (d.info[x] == d.info[y]) {
                        return fail(format!("pair ({},{}) on\n{}", x, y, m.to_text()));
                    }
                    pairs += 1;
                }
            }
        }
    }
    pass(format!("{} state pairs", pairs))
}

fn c5() -> Outcome {
    let params = MasParams { max_states: 6, max_atoms: 3, max_agents: 2, nested_obs: true, multi_init: true };
    let mut cases = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    while cases < 100 {
        let m = Arc::new(random_mas(&mut rng, &params));
        if m.agents().len() < 2 {
            continue;
        }
        let m = if is_a_distinguished(&m, "b", BUDGET).unwrap() {
            m
        } else {
            a_distinction(&m, "b", BUDGET).unwrap().mas
        };
        let da = a_distinction(&m, "a", BUDGET).unwrap();
        if !is_a_distinguished(&da.mas, "b", BUDGET).unwrap() {
            return fail(format!("Δ_a lost b-distinction on\n{}", m.to_text()));
        }
        cases += 1;
    }
    pass(format!("{} b-distinguished systems with Π_a ⊆ Π_b", cases))
}

fn c6() -> Outcome {
    let params = MasParams { max_states: 5, max_atoms: 3, max_agents: 1, nested_obs: false, multi_init: true };
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut compared, mut nodes) = (0, 0);
    for _ in 0..100 {
        let m = Arc::new(random_mas(&mut rng, &params));
        let f = random_plain_formula(&mut rng, 3, m.atoms());
        let rep = check_plain_diagram(&f, &m, 6, 32, DEFAULT_NODE_CAP).unwrap();
        if !rep.mismatches.is_empty() {
            return fail(format!("{}: {:?}\n{}", f, rep.mismatches, m.to_text()));
        }
        compared += rep.compared;
        nodes += rep.nodes;
    }
    pass(format!("100 formulas, {} of {} nodes decided, 0 mismatches", compared, nodes))
}

fn c7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut cases = 0;
    while cases < 200 {
        let m = Arc::new(random_mas(&mut rng, &params6()));
        let splits = rng.gen_range(1..=3);
        let mut chi: Option<InSplitting> = None;
        let mut top = m.clone();
        for _ in 0..splits {
            let Some((src, step)) = random_state_split(&mut rng, &top) else { break };
            chi = Some(match chi {
                None => step,
                Some(outer) => compose(&outer, &step).unwrap(),
            });
            top = src;
        }
        let Some(chi) = chi else { continue };
        if !verify_in_splitting(&chi).is_empty() {
            return fail(format!("composite is not an in-splitting on\n{}", m.to_text()));
        }
        let f = random_plain_formula(&mut rng, 3, m.atoms());
        let lhs = eval_closed(&f, &chi.src, BUDGET).unwrap();
        let rhs = preimage(&chi, &eval_closed(&f, &chi.dst, BUDGET).unwrap());
        if lhs != rhs {
            return fail(format!("{}: {} vs {}\n{}", f, lhs, rhs, m.to_text()));
        }
        cases += 1;
    }
    pass(format!("{} split systems", cases))
}

fn c8() -> Outcome {
    let mut got = Vec::new();
    for (src, model, _) in NONMIXING_EXAMPLES {
        let f = parse_formula(src).unwrap();
        let m = parse_mas(model).unwrap();
        got.push(check_nonmixing(&f, &m).unwrap().is_none());
    }
    let want: Vec<bool> = NONMIXING_EXAMPLES.iter().map(|e| e.2).collect();
    let show = |v: &[bool]| v.iter().map(|&b| if b { "accept" } else { "reject" }).collect::<Vec<_>>().join("/");
    if got == want {
        pass(show(&got))
    } else {
        fail(format!("got {} want {}", show(&got), show(&want)))
    }
}

fn c9() -> Outcome {
    let params = MasParams { max_states: 5, max_atoms: 2, max_agents: 2, nested_obs: false, multi_init: true };
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut cases, mut compared) = (0, 0);
    while cases < 50 {
        let m = Arc::new(random_mas(&mut rng, &params));
        let f = random_epistemic_formula(&mut rng, 3, m.atoms(), m.agents());
        if check_nonmixing(&f, &m).unwrap().is_some() {
            continue;
        }
        let rep = check_agreement(&f, &m, &CheckOptions::default(), 6, 32, DEFAULT_NODE_CAP).unwrap();
        if !rep.mismatches.is_empty() {
            return fail(format!("{}: {:?}\n{}", f, rep.mismatches, m.to_text()));
        }
        compared += rep.compared;
        cases += 1;
    }
    if compared == 0 {
        return fail("no decided node");
    }
    pass(format!("50 formulas, {} decided nodes, 100% agreement", compared))
}

pub const REDUCTION_CASES: [&str; 10] = [
    "F = a\nC(x) = a . x . b\nR = C(~F)",
    "R = ~(a . b)",
    "R = (a + b) . ~(a . a)",
    "R = a . ~(b . b) + b",
    "R = ~a . ~b",
    "F = a . (a + b)\nR = ~F . b",
    "R = (~b + a) . a",
    "C(x) = a . x . b\nR = C(~(a + b . a))",
    "R = ~(a . b . a) . empty",
    "R = b . ~a . empty + a . empty",
];

fn c10() -> Outcome {
    let mut summary = Vec::new();
    for src in REDUCTION_CASES {
        let file = parse_sfx(&format!("alphabet: a b\n{}\n", src)).unwrap();
        if file.expr.complement_depth() > 1 {
            return fail(format!("{} nests complements", file.expr));
        }
        let rep = verify_reduction(&file, 4, 4, 32, &CheckOptions::default(), DEFAULT_NODE_CAP).unwrap();
        let brute = shortest_member(&file.expr, &file.alphabet, 8).unwrap().is_some();
        if !rep.ok() || rep.query_holds != brute {
            return fail(format!(
                "{}: mismatches {:?} oracle {:?} query {} brute {}",
                file.expr, rep.mismatches, rep.oracle_mismatches, rep.query_holds, brute
            ));
        }
        summary.push(format!("{}:{}", rep.states, if brute { "ne" } else { "empty" }));
    }
    pass(format!("10 expressions [{}]", summary.join(" ")))
}

fn bin(args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_epimu")).args(args).output().expect("run epimu");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn c11() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).display().to_string();
    std::fs::write(p("fig1.mas"), FIG1).unwrap();
    std::fs::write(p("e.sfx"), format!("alphabet: a b\n{}\n", REDUCTION_CASES[0])).unwrap();
    let (m, e) = (p("fig1.mas"), p("e.sfx"));
    let (o1, o2) = (p("h1"), p("h2"));
    let runs: Vec<Vec<&str>> = vec![
        vec!["check", "--model", &m, "--formula", "K[a] (EF p1) & P[a] (AG p1)", "--json", "--witness-sets"],
        vec!["nonmixing", "--model", &m, "--formula", "nu Z. (p1 & K[a] Z)", "--json"],
        vec!["distinguish", "--model", &m, "--agent", "a"],
        vec!["oracle", "--model", &m, "--formula", "mu Z. p1 | EX Z", "--depth", "5"],
        vec!["oracle", "--model", &m, "--diagram", "epistemic", "--agent", "a", "--set", "1,3", "--depth", "4"],
        vec!["verify-reduction", "--expr", &e, "--maxlen", "3", "--depth", "3"],
    ];
    let mut n = 0;
    for args in &runs {
        let (c1, s1) = bin(args);
        let (c2, s2) = bin(args);
        if c1 != c2 || s1 != s2 || s1.is_empty() {
            return fail(format!("{} differs between runs", args[0]));
        }
        n += 1;
    }
    let (_, g1) = bin(&["gen-hard", "--expr", &e, "--out", &o1]);
    let (_, g2) = bin(&["gen-hard", "--expr", &e, "--out", &o2]);
    let strip = |s: Vec<u8>, d: &str| String::from_utf8(s).unwrap().replace(d, "OUT");
    let files_same = ["model.mas", "query.muk"].iter().all(|f| {
        std::fs::read(dir.path().join("h1").join(f)).unwrap() == std::fs::read(dir.path().join("h2").join(f)).unwrap()
    });
    if strip(g1, &o1) != strip(g2, &o2) || !files_same {
        return fail("gen-hard output differs between runs");
    }
    pass(format!("{} commands plus gen-hard byte-identical", n))
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome, Duration)> = vec![
        ("fig1 finitary knowledge", c1, Duration::from_secs(1)),
        ("fig2 split system odd levels", c2, Duration::from_secs(1)),
        ("distinction is a distinguished in-splitting", c3, Duration::from_secs(60)),
        ("gamma on distinction is equal information sets", c4, Duration::from_secs(60)),
        ("distinction preserves coarser distinction", c5, Duration::from_secs(60)),
        ("plain diagram at depth 6", c6, Duration::from_secs(60)),
        ("in-splittings reflect plain formulas", c7, Duration::from_secs(60)),
        ("non-mixing classifier", c8, Duration::from_secs(1)),
        ("checker agrees with tree semantics", c9, Duration::from_secs(60)),
        ("reduction property", c10, Duration::from_secs(120)),
        ("deterministic output", c11, Duration::from_secs(60)),
    ];
    let mut failed = BTreeSet::new();
    for (i, (name, f, limit)) in criteria.into_iter().enumerate() {
        let t = Instant::now();
        let mut out = f();
        let took = t.elapsed();
        if out.ok && took > limit {
            out = fail(format!("{} (took {:?}, limit {:?})", out.detail, took, limit));
        }
        println!(
            "{} [{}] {} :: {} (tol=exact, {:.3}s <= {}s)",
            if out.ok { "PASS" } else { "FAIL" },
            i + 1,
            name,
            out.detail,
            took.as_secs_f64(),
            limit.as_secs()
        );
        if !out.ok {
            failed.insert(i + 1);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {:?}", failed);
        std::process::exit(1);
    }
}
