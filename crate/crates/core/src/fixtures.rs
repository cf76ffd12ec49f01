//! Small reference systems used by tests and the command line help.

/// One agent, three states, every state labeled `p1`; 1->2, 2->1, 1->3, 3->3.
pub const FIG1: &str = "\
agents: a
atoms: p1
obs a: p1
states: 3
init: 1
label 1: p1
label 2: p1
label 3: p1
trans: 1->2 2->1 1->3 3->3
";

/// FIG1 with state 3 split into 3 and 4: 1->2, 2->1, 1->3, 3->4, 4->4.
pub const FIG2: &str = "\
agents: a
atoms: p1
obs a: p1
states: 4
init: 1
label 1: p1
label 2: p1
label 3: p1
label 4: p1
trans: 1->2 2->1 1->3 3->4 4->4
";

/// Two agents with Π_a ⊆ Π_b.
pub const NESTED_OBS: &str = "\
agents: a b
atoms: p q
obs a: p
obs b: p q
states: 3
init: 1
label 1: p
label 2: q
label 3: p q
trans: 1->2 1->3 2->1 3->3
";

/// Two agents with incomparable observations.
pub const INCOMPARABLE_OBS: &str = "\
agents: a b
atoms: p q
obs a: p
obs b: q
states: 3
init: 1
label 1: p
label 2: q
label 3: p q
trans: 1->2 1->3 2->1 3->3
";

/// The four classification examples: formula, system, expected acceptance.
pub const NONMIXING_EXAMPLES: [(&str, &str, bool); 4] = [
    ("mu Z1. p | K[a] (EX Z1) & nu Z2. (q & Z1 & K[a] (EX Z2))", NESTED_OBS, true),
    ("mu Z1. p | K[a] (EX Z1) & nu Z2. (q & K[b] (EX Z2))", NESTED_OBS, true),
    ("nu Z. (q & K[a] Z | K[b] Z)", INCOMPARABLE_OBS, false),
    ("mu Z1. p | K[a] (EX Z1) & nu Z2. (q & Z1 & K[b] (EX Z2))", INCOMPARABLE_OBS, false),
];
