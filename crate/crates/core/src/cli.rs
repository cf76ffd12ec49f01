//! The `epimu` command line.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::checker::{model_check, CheckOptions, InsTraceEntry, WitnessSet};
use crate::distinction::{a_distinction, is_a_distinguished, DEFAULT_STATE_BUDGET};
use crate::error::{Error, Result};
use crate::formula::{parse_formula, Formula};
use crate::hardness::{build_reduction, parse_sfx, verify_reduction, SfxFile};
use crate::mas::{parse_valid_mas, Mas, DEFAULT_NODE_CAP};
use crate::oracle::{
    check_agreement, check_epistemic_diagram, check_plain_diagram, AgreementReport, Modality, DEFAULT_DEPTH,
    DEFAULT_FUEL,
};
use crate::stateset::StateSet;
use crate::syntree::{check_nonmixing, MixingViolation};

pub const BUDGET_ENV: &str = "EPIMU_BUDGET_STATES";

#[derive(Parser, Debug)]
#[command(name = "epimu", version, about = "Model checking epistemic fixpoint formulas under synchronous perfect recall")]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Decide a non-mixing formula on a system.
    Check {
        #[arg(long)]
        model: PathBuf,
        /// Formula file, or the formula itself.
        #[arg(long)]
        formula: String,
        #[arg(long)]
        json: bool,
        /// Include the satisfying root-model states of every closed subformula.
        #[arg(long)]
        witness_sets: bool,
        /// Print the in-splitting chain of every syntactic node.
        #[arg(long)]
        trace_ins: bool,
        #[arg(long)]
        budget_states: Option<usize>,
        /// Also compare against the bounded tree semantics at this depth.
        #[arg(long)]
        oracle_depth: Option<usize>,
    },
    /// Report the first non-mixing violation, if any.
    Nonmixing {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        formula: String,
        #[arg(long)]
        json: bool,
    },
    /// Build the a-distinction of a system.
    Distinguish {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        agent: String,
        /// Output system file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// State map file with lines `q: (s,{..}) -> s`.
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        budget_states: Option<usize>,
    },
    /// Compare finitary and bounded tree semantics.
    Oracle {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        formula: Option<String>,
        #[arg(long, default_value_t = DEFAULT_DEPTH)]
        depth: usize,
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: usize,
        #[arg(long, value_enum, default_value_t = Diagram::Plain)]
        diagram: Diagram,
        #[arg(long)]
        agent: Option<String>,
        /// Comma separated states, e.g. 1,3.
        #[arg(long)]
        set: Option<String>,
        #[arg(long, value_enum, default_value_t = ModalityArg::K)]
        modality: ModalityArg,
        #[arg(long, default_value_t = DEFAULT_NODE_CAP)]
        node_cap: usize,
        #[arg(long)]
        budget_states: Option<usize>,
    },
    /// Write the system and query of a hardness instance.
    GenHard {
        #[arg(long)]
        expr: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the reduction property on all words up to a length.
    VerifyReduction {
        #[arg(long)]
        expr: PathBuf,
        #[arg(long, default_value_t = 4)]
        maxlen: usize,
        #[arg(long, default_value_t = 4)]
        depth: usize,
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: usize,
        #[arg(long, default_value_t = DEFAULT_NODE_CAP)]
        node_cap: usize,
        #[arg(long)]
        budget_states: Option<usize>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Diagram {
    Plain,
    Epistemic,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModalityArg {
    K,
    P,
}

pub const EXIT_HOLDS: i32 = 0;
pub const EXIT_FAILS: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

fn exit_for(e: &Error) -> i32 {
    if e.is_budget() {
        EXIT_BUDGET
    } else {
        EXIT_INPUT
    }
}

fn budget(flag: Option<usize>) -> Result<usize> {
    if let Some(b) = flag {
        return Ok(b);
    }
    match std::env::var(BUDGET_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&b| b > 0)
            .ok_or_else(|| Error::Input(format!("{} must be a positive integer, got {:?}", BUDGET_ENV, v))),
        Err(_) => Ok(DEFAULT_STATE_BUDGET),
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {}", path.display(), e)))
}

fn load_mas(path: &Path) -> Result<Arc<Mas>> {
    Ok(Arc::new(parse_valid_mas(&read(path)?)?))
}

/// A formula argument names a file when one exists at that path.
fn load_formula(arg: &str) -> Result<Formula> {
    let p = Path::new(arg);
    let text = if p.is_file() { read(p)? } else { arg.to_string() };
    Ok(parse_formula(&text)?)
}

fn load_sfx(path: &Path) -> Result<SfxFile> {
    Ok(parse_sfx(&read(path)?)?)
}

fn parse_set(s: &str, n: usize) -> Result<StateSet> {
    let mut out = StateSet::empty(n);
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let q: usize = part.parse().map_err(|_| Error::Input(format!("bad state {:?} in --set", part)))?;
        if q == 0 || q > n {
            return Err(Error::Input(format!("state {} out of range 1..{}", q, n)));
        }
        out.insert(q);
    }
    Ok(out)
}

fn json<T: Serialize>(out: &mut dyn Write, v: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(v).map_err(|e| Error::Input(e.to_string()))?;
    writeln!(out, "{}", s).map_err(|e| Error::Input(e.to_string()))
}

fn emit(out: &mut dyn Write, s: &str) -> Result<()> {
    out.write_all(s.as_bytes()).map_err(|e| Error::Input(e.to_string()))
}

#[derive(Serialize)]
pub struct CheckJson {
    pub verdict: bool,
    /// Some initial state satisfies the formula.
    pub holds_any: bool,
    pub per_init: BTreeMap<usize, bool>,
    pub root_model_size: usize,
    pub ins_trace: Vec<InsTraceEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_sets: Option<BTreeMap<String, WitnessSet>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<AgreementReport>,
}

#[derive(Serialize)]
pub struct NonmixingJson {
    pub nonmixing: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violation: Option<MixingViolation>,
}

#[derive(Serialize)]
struct GenHardJson {
    expr: String,
    states: usize,
    main_states: usize,
    agents: Vec<String>,
    end_atom: String,
    levels: usize,
    model: String,
    query: String,
}

/// Runs one command, writing reports to `out` and diagnostics to `err`; returns the exit code.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match dispatch(cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e);
            exit_for(&e)
        }
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    match cli.cmd {
        Cmd::Check { model, formula, json: as_json, witness_sets, trace_ins, budget_states, oracle_depth } => {
            let m = load_mas(&model)?;
            let f = load_formula(&formula)?;
            let opts = CheckOptions { budget: budget(budget_states)?, ..CheckOptions::default() };
            let res = model_check(&f, &m, &opts)?;
            let oracle = match oracle_depth {
                Some(d) => Some(check_agreement(&f, &m, &opts, d, DEFAULT_FUEL, DEFAULT_NODE_CAP)?),
                None => None,
            };
            let verdict = res.holds_all();
            if as_json {
                json(
                    out,
                    &CheckJson {
                        verdict,
                        holds_any: res.holds_any(),
                        per_init: res.per_init.clone(),
                        root_model_size: res.root_model_size(),
                        ins_trace: res.ins.trace(),
                        witness_sets: witness_sets.then(|| res.witness_sets.clone()),
                        oracle,
                    },
                )?;
            } else {
                let mut s = format!("verdict: {}\n", if verdict { "holds" } else { "fails" });
                s.push_str(&format!("some initial state: {}\n", res.holds_any()));
                for (q, v) in &res.per_init {
                    s.push_str(&format!("init {}: {}\n", q, v));
                }
                s.push_str(&format!("root model: {} states\n", res.root_model_size()));
                if trace_ins {
                    for t in res.ins.trace() {
                        s.push_str(&format!(
                            "{} [{}] {} : {} -> {} states\n",
                            t.node,
                            t.chain.join(" ; "),
                            t.subformula,
                            t.dom_states,
                            t.codom_states
                        ));
                    }
                }
                if witness_sets {
                    for (path, w) in &res.witness_sets {
                        s.push_str(&format!("{} {} = {}\n", path, w.subformula, w.states));
                    }
                }
                if let Some(o) = &oracle {
                    s.push_str(&format!(
                        "oracle: {} of {} nodes decided, {} mismatches\n",
                        o.compared,
                        o.nodes,
                        o.mismatches.len()
                    ));
                }
                emit(out, &s)?;
            }
            Ok(if verdict { EXIT_HOLDS } else { EXIT_FAILS })
        }
        Cmd::Nonmixing { model, formula, json: as_json } => {
            let m = load_mas(&model)?;
            let f = load_formula(&formula)?;
            let v = check_nonmixing(&f, &m)?;
            let ok = v.is_none();
            if as_json {
                json(out, &NonmixingJson { nonmixing: ok, violation: v })?;
            } else {
                match &v {
                    None => emit(out, "non-mixing\n")?,
                    Some(v) => emit(out, &format!("{}\n", Error::NonMixing(v.clone())))?,
                }
            }
            Ok(if ok { EXIT_HOLDS } else { EXIT_FAILS })
        }
        Cmd::Distinguish { model, agent, out: out_path, map, budget_states } => {
            let m = load_mas(&model)?;
            let d = a_distinction(&m, &agent, budget(budget_states)?)?;
            let text = d.mas.to_text();
            match &out_path {
                Some(p) => std::fs::write(p, &text).map_err(|e| Error::Input(format!("{}: {}", p.display(), e)))?,
                None => emit(out, &text)?,
            }
            if let Some(p) = &map {
                std::fs::write(p, d.map_text()).map_err(|e| Error::Input(format!("{}: {}", p.display(), e)))?;
            }
            if out_path.is_some() {
                let ok = is_a_distinguished(&d.mas, &agent, budget(budget_states)?)?;
                emit(out, &format!("{} states, {}-distinguished: {}\n", d.mas.n(), agent, ok))?;
            }
            Ok(EXIT_HOLDS)
        }
        Cmd::Oracle { model, formula, depth, fuel, diagram, agent, set, modality, node_cap, budget_states } => {
            let m = load_mas(&model)?;
            let rep = match diagram {
                Diagram::Plain => {
                    let f = formula.ok_or_else(|| Error::Input("--formula is required for the plain diagram".into()))?;
                    check_plain_diagram(&load_formula(&f)?, &m, depth, fuel, node_cap)?
                }
                Diagram::Epistemic => {
                    let a = agent.ok_or_else(|| Error::Input("--agent is required for the epistemic diagram".into()))?;
                    if !m.has_agent(&a) {
                        return Err(Error::Input(format!("unknown agent {}", a)));
                    }
                    let s = parse_set(set.as_deref().unwrap_or(""), m.n())?;
                    let md = match modality {
                        ModalityArg::K => Modality::K,
                        ModalityArg::P => Modality::P,
                    };
                    check_epistemic_diagram(&m, &a, &s, depth, md, budget(budget_states)?, node_cap)?
                }
            };
            json(out, &rep)?;
            Ok(if rep.mismatches.is_empty() { EXIT_HOLDS } else { EXIT_FAILS })
        }
        Cmd::GenHard { expr, out: dir } => {
            let file = load_sfx(&expr)?;
            let red = build_reduction(&file.expr, &file.alphabet)?;
            std::fs::create_dir_all(&dir).map_err(|e| Error::Input(format!("{}: {}", dir.display(), e)))?;
            let mp = dir.join("model.mas");
            let qp = dir.join("query.muk");
            let w = |p: &Path, s: String| std::fs::write(p, s).map_err(|e| Error::Input(format!("{}: {}", p.display(), e)));
            w(&mp, red.mas.to_text())?;
            w(&qp, format!("{}\n", red.query))?;
            json(
                out,
                &GenHardJson {
                    expr: file.expr.to_string(),
                    states: red.mas.n(),
                    main_states: red.main_states,
                    agents: red.mas.agents().to_vec(),
                    end_atom: red.end_atom.clone(),
                    levels: red.levels,
                    model: mp.display().to_string(),
                    query: qp.display().to_string(),
                },
            )?;
            Ok(EXIT_HOLDS)
        }
        Cmd::VerifyReduction { expr, maxlen, depth, fuel, node_cap, budget_states } => {
            let file = load_sfx(&expr)?;
            let opts = CheckOptions { budget: budget(budget_states)?, ..CheckOptions::default() };
            let rep = verify_reduction(&file, maxlen, depth, fuel, &opts, node_cap)?;
            json(out, &rep)?;
            Ok(if rep.ok() { EXIT_HOLDS } else { EXIT_FAILS })
        }
    }
}
