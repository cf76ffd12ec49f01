use std::sync::Arc;

use epimu::checker::CheckOptions;
use epimu::oracle::check_agreement;
use epimu::random::{random_epistemic_formula, random_single_agent_formula, random_mas, MasParams};
use epimu::syntree::check_nonmixing;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn checker_matches_tree_semantics_on_random_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let params = MasParams { max_states: 4, max_atoms: 2, max_agents: 2, nested_obs: false, multi_init: true };
    let mut compared = 0;
    let mut runs = 0;
    while runs < 400 {
        let m = Arc::new(random_mas(&mut rng, &params));
        let f = random_epistemic_formula(&mut rng, 3, m.atoms(), m.agents());
        if check_nonmixing(&f, &m).unwrap().is_some() {
            continue;
        }
        runs += 1;
        let rep = check_agreement(&f, &m, &CheckOptions::default(), 5, 32, 100_000).unwrap();
        assert!(rep.mismatches.is_empty(), "{} on\n{}\n{:?}", f, m.to_text(), rep.mismatches);
        compared += rep.compared;
    }
    assert!(compared > 0);
}

#[test]
fn single_agent_fixpoints_through_knowledge() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let params = MasParams { max_states: 4, max_atoms: 2, max_agents: 1, nested_obs: false, multi_init: true };
    let mut compared = 0;
    for _ in 0..400 {
        let m = Arc::new(random_mas(&mut rng, &params));
        let f = random_single_agent_formula(&mut rng, 4, m.atoms(), "a");
        let rep = check_agreement(&f, &m, &CheckOptions::default(), 5, 32, 100_000).unwrap();
        assert!(rep.mismatches.is_empty(), "{} on\n{}\n{:?}", f, m.to_text(), rep.mismatches);
        compared += rep.compared;
    }
    assert!(compared > 0);
}
