use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use clap::{ArgGroup, Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use parikh_core::automaton::{
    build, check_state_invariants, size_reference, size_report, AutomatonError, Nfa, NfaJson,
    DEFAULT_STATE_BUDGET,
};
use parikh_core::grammar::{bounded_parikh_language, stats, DEFAULT_ORACLE_BUDGET};
use parikh_core::parsetree::{ParseTree, TreeSampler};
use parikh_core::remgraph::{regularity_width_of, ReminderGraph, WidthMode};
use parikh_core::symbolic::{check_invariants_symbolic, reachable_states, DEFAULT_COUNT_MEMO, DEFAULT_SATURATION_BUDGET};
use parikh_core::traces::{completeness_trace, random_accepted_run, soundness_reconstruct};
use parikh_core::verify::{
    gn_grammar, ports_grammar, random_grammar, stress, verify_against, verify_parikh_equivalence,
    GrammarSpec, StressConfig, Verdict, VerifyBudget,
};
use parikh_core::{parse_grammar, render, Grammar, ParikhVector};

#[derive(Parser)]
#[command(name = "parikh", version)]
#[command(about = "Regularity width and Parikh-equivalent automata for context-free grammars")]
struct Cli {
    /// Print one JSON envelope {command, inputs, results, timings} on stdout
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grammar metrics, regularity width and automaton size against the reference bound
    Analyze {
        /// Grammar file; stdin when absent or `-`
        grammar: Option<PathBuf>,
        #[command(flatten)]
        width: WidthArgs,
    },
    /// Export the reminder graph
    #[command(group(ArgGroup::new("format").required(true).args(["dot", "gr"])))]
    Remgraph {
        grammar: Option<PathBuf>,
        /// Graphviz output
        #[arg(long)]
        dot: bool,
        /// PACE .gr output (1-based ids, in variable order)
        #[arg(long)]
        gr: bool,
    },
    /// Build the automaton and write it as JSON
    Build {
        grammar: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write a Graphviz rendering
        #[arg(long)]
        dot: Option<PathBuf>,
        /// Also write the letter-level automaton (labels of length ≤ 1)
        #[arg(long)]
        letters: Option<PathBuf>,
    },
    /// Membership of a word in a built automaton; exit 1 when rejected
    Accepts {
        nfa: PathBuf,
        /// Terminal names separated by spaces, or one run of one-letter names
        word: String,
    },
    /// Parikh images of the words of length at most k
    ParikhSet {
        /// Grammar file or automaton JSON
        input: PathBuf,
        #[arg(short)]
        k: u64,
    },
    /// Compare the bounded Parikh images of grammar and automaton; exit 1 unless equal
    Verify {
        grammar: Option<PathBuf>,
        #[arg(short)]
        k: u64,
        /// Check this automaton JSON instead of building one
        #[arg(long)]
        nfa: Option<PathBuf>,
    },
    /// Transcripts translating between parse trees and runs
    Trace {
        #[command(subcommand)]
        which: TraceCommand,
    },
    /// State invariants over every reachable state; exit 1 on a violation
    Invariants {
        grammar: Option<PathBuf>,
        #[command(flatten)]
        width: WidthArgs,
    },
    /// Random grammars through verify, invariants and trace round trips
    Stress {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// GrammarSpec JSON file; defaults to the built-in spec
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(short, default_value_t = 6)]
        k: u64,
        #[arg(long)]
        jobs: Option<usize>,
        /// Seed of the first trial
        #[arg(long)]
        seed: Option<u64>,
        /// Random trees traced per grammar
        #[arg(long, default_value_t = 4)]
        trace_trees: usize,
    },
    /// Print example grammars
    Gen {
        #[command(subcommand)]
        which: GenCommand,
    },
}

#[derive(Args)]
struct WidthArgs {
    /// Exact treewidth of the reminder graph (default)
    #[arg(long, conflicts_with = "heuristic")]
    exact: bool,
    /// Min-fill upper bound instead of the exact width
    #[arg(long)]
    heuristic: bool,
    /// Tie-breaking seed for --heuristic
    #[arg(long)]
    seed: Option<u64>,
}

impl WidthArgs {
    fn mode(&self, json: bool) -> Result<WidthMode> {
        if self.heuristic {
            Ok(WidthMode::Heuristic {
                seed: seed_or_default(json, self.seed)?,
            })
        } else {
            Ok(WidthMode::default())
        }
    }
}

/// Randomized commands fall back to seed 0, except under `--json`.
fn seed_or_default(json: bool, seed: Option<u64>) -> Result<u64> {
    match seed {
        Some(s) => Ok(s),
        None if json => Err(usage("--json requires an explicit --seed")),
        None => Ok(0),
    }
}

#[derive(Subcommand)]
enum TraceCommand {
    /// Walk a parse tree down to an accepting run (JSON lines, one per step)
    Complete {
        grammar: Option<PathBuf>,
        /// Sample the tree from this seed
        #[arg(long, conflicts_with = "tree")]
        seed: Option<u64>,
        /// Read the tree as an s-expression, e.g. `(S a (S) b)`
        #[arg(long)]
        tree: Option<PathBuf>,
        /// Node cap for sampled trees
        #[arg(long, default_value_t = 40)]
        max_nodes: usize,
    },
    /// Replay a random accepting run as a derivation (JSON lines, one per step)
    Sound {
        grammar: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Moves before the walk heads straight for the final state
        #[arg(long, default_value_t = 30)]
        max_steps: usize,
    },
}

#[derive(Subcommand)]
enum GenCommand {
    /// A_j -> A_(j-1) A_(j-1), A_1 -> a; its language is a^(2^(n-1))
    Gn { n: usize },
    /// Program points calling subroutines through a few ports
    Ports {
        points: usize,
        ports: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// A sanitized random grammar
    Random {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
    },
}

/// Bad invocations and unreadable inputs; reported with exit code 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

/// What a command produced: human text, the JSON results, and whether
/// the check it ran passed.
struct Outcome {
    text: String,
    results: Value,
    inputs: Value,
    ok: bool,
}

impl Outcome {
    fn new(text: String, results: impl Serialize, inputs: Value) -> Self {
        Self {
            text,
            results: serde_json::to_value(results).expect("results serialize"),
            inputs,
            ok: true,
        }
    }

    fn failing_if(mut self, failed: bool) -> Self {
        self.ok = !failed;
        self
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let name = command_name(&cli.command);
    match run(&cli) {
        Ok(out) => {
            if cli.json {
                let env = json!({
                    "command": name,
                    "inputs": out.inputs,
                    "results": out.results,
                    "timings": { "total_ms": start.elapsed().as_secs_f64() * 1000.0 },
                });
                println!("{}", serde_json::to_string_pretty(&env).expect("envelope serializes"));
            } else {
                print!("{}", out.text);
                let _ = io::stdout().flush();
            }
            if out.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            let code = if e.downcast_ref::<Usage>().is_some() { 2 } else { 1 };
            if cli.json {
                let env = json!({ "command": name, "error": format!("{e:#}") });
                println!("{}", serde_json::to_string_pretty(&env).expect("envelope serializes"));
            }
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Analyze { .. } => "analyze",
        Command::Remgraph { .. } => "remgraph",
        Command::Build { .. } => "build",
        Command::Accepts { .. } => "accepts",
        Command::ParikhSet { .. } => "parikh-set",
        Command::Verify { .. } => "verify",
        Command::Trace {
            which: TraceCommand::Complete { .. },
        } => "trace complete",
        Command::Trace {
            which: TraceCommand::Sound { .. },
        } => "trace sound",
        Command::Invariants { .. } => "invariants",
        Command::Stress { .. } => "stress",
        Command::Gen { .. } => "gen",
    }
}

/// The automaton state cap, overridable through `PARIKH_STATE_BUDGET`.
fn state_budget(default: usize) -> Result<usize> {
    match std::env::var("PARIKH_STATE_BUDGET") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| usage(format!("PARIKH_STATE_BUDGET must be a positive integer, got `{v}`"))),
        Err(_) => Ok(default),
    }
}

fn read_input(path: Option<&Path>) -> Result<String> {
    match path {
        None => read_stdin(),
        Some(p) if p.as_os_str() == "-" => read_stdin(),
        Some(p) => fs::read_to_string(p).map_err(|e| usage(format!("cannot read {}: {e}", p.display()))),
    }
}

fn read_stdin() -> Result<String> {
    let mut s = String::new();
    io::stdin()
        .read_to_string(&mut s)
        .map_err(|e| usage(format!("cannot read stdin: {e}")))?;
    Ok(s)
}

fn load_grammar(path: Option<&Path>) -> Result<Grammar> {
    let text = read_input(path)?;
    parse_grammar(&text).map_err(|e| usage(format!("grammar: {e}")))
}

fn load_nfa(path: &Path) -> Result<Nfa> {
    let text = read_input(Some(path))?;
    let j: NfaJson = serde_json::from_str(&text).map_err(|e| usage(format!("automaton JSON: {e}")))?;
    Nfa::from_json(&j).map_err(|e| usage(format!("automaton JSON: {e}")))
}

fn load_spec(path: Option<&Path>) -> Result<GrammarSpec> {
    match path {
        None => Ok(GrammarSpec::default()),
        Some(p) => {
            let text = read_input(Some(p))?;
            serde_json::from_str(&text).map_err(|e| usage(format!("spec JSON: {e}")))
        }
    }
}

fn path_text(p: Option<&Path>) -> Value {
    match p {
        Some(p) if p.as_os_str() != "-" => json!(p.display().to_string()),
        _ => json!("<stdin>"),
    }
}

fn named_set(g_terms: &[String], set: &std::collections::BTreeSet<ParikhVector>) -> Vec<Value> {
    set.iter().map(|v| json!(v.to_named(g_terms))).collect()
}

fn vector_text(v: &serde_json::Map<String, Value>) -> String {
    if v.is_empty() {
        return "0".into();
    }
    let parts: Vec<String> = v.iter().map(|(k, n)| format!("{k}:{n}")).collect();
    format!("{{{}}}", parts.join(", "))
}

fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Analyze { grammar, width } => analyze(grammar.as_deref(), width.mode(cli.json)?),
        Command::Remgraph { grammar, dot, .. } => remgraph(grammar.as_deref(), *dot),
        Command::Build {
            grammar,
            out,
            dot,
            letters,
        } => build_cmd(grammar.as_deref(), out, dot.as_deref(), letters.as_deref()),
        Command::Accepts { nfa, word } => accepts(nfa, word),
        Command::ParikhSet { input, k } => parikh_set(input, *k),
        Command::Verify { grammar, k, nfa } => verify(grammar.as_deref(), *k, nfa.as_deref()),
        Command::Trace { which } => match which {
            TraceCommand::Complete {
                grammar,
                seed,
                tree,
                max_nodes,
            } => {
                let seed = match tree {
                    Some(_) => None,
                    None => Some(seed_or_default(cli.json, *seed)?),
                };
                trace_complete(grammar.as_deref(), seed, tree.as_deref(), *max_nodes)
            }
            TraceCommand::Sound {
                grammar,
                seed,
                max_steps,
            } => {
                trace_sound(grammar.as_deref(), seed_or_default(cli.json, *seed)?, *max_steps)
            }
        },
        Command::Invariants { grammar, width } => invariants(grammar.as_deref(), width.mode(cli.json)?),
        Command::Stress {
            trials,
            spec,
            k,
            jobs,
            seed,
            trace_trees,
        } => {
            let mut budget = VerifyBudget::default();
            budget.states = state_budget(budget.states)?;
            let cfg = StressConfig {
                trials: *trials,
                spec: load_spec(spec.as_deref())?,
                k: *k,
                seed: seed_or_default(cli.json, *seed)?,
                jobs: *jobs,
                trace_trees: *trace_trees,
                budget,
            };
            stress_cmd(&cfg)
        }
        Command::Gen { which } => gen(which, cli.json),
    }
}

fn analyze(path: Option<&Path>, mode: WidthMode) -> Result<Outcome> {
    let g = load_grammar(path)?;
    let st = stats(&g);
    let rg = ReminderGraph::build(&g);
    let w = regularity_width_of(&rg, mode).context("regularity width")?;
    let mut text = format!(
        "n = {}\nm = {}\ne = {}\n|P| = {}\nreminder graph edges = {}\nd = {} ({})\n",
        st.n,
        st.m,
        st.e,
        st.p_count,
        rg.edge_count(),
        w.d,
        if w.exact { "exact" } else { "upper bound" }
    );
    let reference = size_reference(st.n, w.d, st.m);
    let ref_text = reference.map_or_else(|| "overflow".to_string(), |r| r.to_string());
    let size = match build(&g, state_budget(DEFAULT_STATE_BUDGET)?) {
        Ok(nfa) => {
            let r = size_report(&nfa, &g, w.d);
            text += &format!(
                "states = {}\ntransitions = {}\nletter-level states = {}\nletter-level transitions = {}\n",
                r.states, r.transitions, r.letter_states, r.letter_transitions
            );
            text += &format!("reference n·d^(2d(m+1)) = {ref_text} (with e = {}, |P| = {})\n", r.e, r.productions);
            if r.exceeds_reference {
                text += "note: observed states exceed the reference value\n";
            }
            serde_json::to_value(&r)?
        }
        Err(AutomatonError::StateBudget { budget, .. }) => {
            let counted = reachable_states(&g, DEFAULT_SATURATION_BUDGET)
                .ok()
                .and_then(|r| r.count(DEFAULT_COUNT_MEMO));
            let states = counted.map_or_else(|| "unknown".to_string(), |c| c.to_string());
            text += &format!("states = {states} (more than the build budget of {budget}; counted symbolically)\n");
            text += &format!("reference n·d^(2d(m+1)) = {ref_text} (with e = {}, |P| = {})\n", st.e, st.p_count);
            let exceeds = matches!((counted, reference), (Some(c), Some(r)) if c > r);
            if exceeds {
                text += "note: observed states exceed the reference value\n";
            }
            json!({
                "states": counted, "n": st.n, "d": w.d, "m": st.m, "e": st.e,
                "productions": st.p_count, "reference": reference, "exceeds_reference": exceeds,
            })
        }
        Err(e) => return Err(e.into()),
    };
    let results = json!({
        "stats": st,
        "reminder_edges": rg.edge_count(),
        "d": w.d,
        "width_exact": w.exact,
        "size": size,
    });
    Ok(Outcome::new(text, results, json!({ "grammar": path_text(path) })))
}

fn remgraph(path: Option<&Path>, dot: bool) -> Result<Outcome> {
    let g = load_grammar(path)?;
    let rg = ReminderGraph::build(&g);
    let (text, results) = if dot {
        let s = rg.to_dot(&g);
        (s.clone(), json!({ "format": "dot", "text": s }))
    } else {
        let s = rg.to_pace();
        let ids = rg.pace_id_map(&g);
        (s.clone(), json!({ "format": "gr", "text": s, "ids": ids }))
    };
    Ok(Outcome::new(text, results, json!({ "grammar": path_text(path) })))
}

fn build_cmd(path: Option<&Path>, out: &Path, dot: Option<&Path>, letters: Option<&Path>) -> Result<Outcome> {
    let g = load_grammar(path)?;
    let nfa = build(&g, state_budget(DEFAULT_STATE_BUDGET)?)?;
    fs::write(out, serde_json::to_string_pretty(&nfa.to_json())?)
        .with_context(|| format!("writing {}", out.display()))?;
    if let Some(p) = dot {
        fs::write(p, nfa.to_dot()).with_context(|| format!("writing {}", p.display()))?;
    }
    let mut text = format!(
        "{} states, {} transitions -> {}\n",
        nfa.state_count(),
        nfa.transitions().len(),
        out.display()
    );
    let mut results = json!({
        "states": nfa.state_count(),
        "transitions": nfa.transitions().len(),
        "final_reachable": nfa.final_state().is_some(),
        "out": out.display().to_string(),
    });
    if let Some(p) = letters {
        let l = nfa.expand_letters();
        let transitions: Vec<Value> = l
            .transitions
            .iter()
            .map(|t| {
                json!({
                    "src": t.src,
                    "letter": t.letter.map(|x| g.term_name(x).to_string()),
                    "dst": t.dst,
                })
            })
            .collect();
        let j = json!({
            "terminals": g.terminals(),
            "state_count": l.state_count,
            "initial": l.initial,
            "final_state": l.final_state,
            "transitions": transitions,
        });
        fs::write(p, serde_json::to_string_pretty(&j)?).with_context(|| format!("writing {}", p.display()))?;
        text += &format!(
            "letter level: {} states, {} transitions -> {}\n",
            l.state_count,
            l.transitions.len(),
            p.display()
        );
        results["letter_states"] = json!(l.state_count);
        results["letter_transitions"] = json!(l.transitions.len());
    }
    Ok(Outcome::new(text, results, json!({ "grammar": path_text(path) })))
}

fn accepts(path: &Path, word: &str) -> Result<Outcome> {
    let nfa = load_nfa(path)?;
    let w = nfa
        .parse_word(word)
        .ok_or_else(|| usage(format!("`{word}` is not a word over the automaton's terminals")))?;
    let inputs = json!({ "nfa": path.display().to_string(), "word": word });
    match nfa.accepts(&w) {
        Some(run) => {
            let mut text = String::from("accepted\n");
            let mut steps = Vec::new();
            for &i in &run {
                let t = &nfa.transitions()[i];
                let (from, to) = (
                    nfa.state(t.src).display(nfa.variables()),
                    nfa.state(t.dst).display(nfa.variables()),
                );
                let label = nfa.word_text(&t.label);
                text += &format!("  {from} --{}/rule {}--> {to}\n", if label.is_empty() { "ε" } else { &label }, t.rule);
                steps.push(json!({ "transition": i, "from": from, "label": label, "rule": t.rule, "to": to }));
            }
            Ok(Outcome::new(text, json!({ "accepted": true, "run": steps }), inputs))
        }
        None => Ok(Outcome::new("rejected\n".into(), json!({ "accepted": false }), inputs).failing_if(true)),
    }
}

fn parikh_set(input: &Path, k: u64) -> Result<Outcome> {
    let text = read_input(Some(input))?;
    let (kind, terms, set) = if text.trim_start().starts_with('{') {
        let nfa = load_nfa(input)?;
        let set = nfa.bounded_parikh(k, VerifyBudget::default().search)?;
        ("automaton", nfa.terminals().to_vec(), set)
    } else {
        let g = parse_grammar(&text).map_err(|e| usage(format!("grammar: {e}")))?;
        let set = bounded_parikh_language(&g, k, DEFAULT_ORACLE_BUDGET)?;
        ("grammar", g.terminals().to_vec(), set)
    };
    let vectors = named_set(&terms, &set);
    let mut out = format!("{} vectors of total ≤ {k}:\n", set.len());
    for v in &vectors {
        out += &format!("  {}\n", vector_text(v.as_object().expect("named vector")));
    }
    let inputs = json!({ "input": input.display().to_string(), "kind": kind, "k": k });
    Ok(Outcome::new(out, json!({ "count": set.len(), "vectors": vectors }), inputs))
}

fn verify(path: Option<&Path>, k: u64, nfa: Option<&Path>) -> Result<Outcome> {
    let g = load_grammar(path)?;
    let mut budget = VerifyBudget::default();
    budget.states = state_budget(budget.states)?;
    let report = match nfa {
        Some(p) => verify_against(&g, &load_nfa(p)?, k, &budget),
        None => verify_parikh_equivalence(&g, k, &budget),
    };
    let show = |vs: &[std::collections::BTreeMap<String, u64>]| -> String {
        vs.iter()
            .map(|v| {
                let m: serde_json::Map<String, Value> = v.iter().map(|(a, b)| (a.clone(), json!(b))).collect();
                vector_text(&m)
            })
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut text = format!("verdict: {}\n", serde_json::to_value(report.verdict)?.as_str().unwrap_or(""));
    if let Some(side) = &report.automaton {
        text += &format!("automaton: {}\n", serde_json::to_string(side)?);
    }
    if let (Some(gs), Some(ns)) = (&report.grammar_set, &report.automaton_set) {
        text += &format!("grammar   ({}): {}\n", gs.len(), show(gs));
        text += &format!("automaton ({}): {}\n", ns.len(), show(ns));
    }
    if !report.only_grammar.is_empty() {
        text += &format!("only in grammar: {}\n", show(&report.only_grammar));
    }
    if !report.only_automaton.is_empty() {
        text += &format!("only in automaton: {}\n", show(&report.only_automaton));
    }
    if let Some(r) = &report.reason {
        text += &format!("reason: {r}\n");
    }
    let ok = report.verdict == Verdict::Equal;
    let inputs = json!({
        "grammar": path_text(path),
        "k": k,
        "nfa": nfa.map(|p| p.display().to_string()),
    });
    Ok(Outcome::new(text, &report, inputs).failing_if(!ok))
}

fn jsonl<T: Serialize>(records: &[T]) -> Result<String> {
    let mut s = String::new();
    for r in records {
        s += &serde_json::to_string(r)?;
        s.push('\n');
    }
    Ok(s)
}

fn trace_complete(path: Option<&Path>, seed: Option<u64>, tree: Option<&Path>, max_nodes: usize) -> Result<Outcome> {
    let g = load_grammar(path)?;
    let t = match tree {
        Some(p) => {
            let text = read_input(Some(p))?;
            ParseTree::from_sexpr(&g, text.trim()).map_err(|e| usage(format!("tree: {e}")))?
        }
        None => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));
            TreeSampler::new(&g)
                .sample(g.axiom(), max_nodes, &mut rng)
                .ok_or_else(|| anyhow!("no parse tree from the axiom with at most {max_nodes} nodes"))?
        }
    };
    let trace = completeness_trace(&g, &t)?;
    let word = g.word_text(&trace.word);
    let image = ParikhVector::of_word(&trace.word).to_named(g.terminals());
    let text = jsonl(&trace.records)?;
    eprintln!(
        "tree {}\naccepted word `{}` after {} steps; Parikh image equals the tree's yield",
        t.to_sexpr(&g),
        word,
        trace.run.len()
    );
    let results = json!({
        "tree": t.to_sexpr(&g),
        "word": word,
        "parikh": image,
        "steps": trace.records,
    });
    let inputs = json!({ "grammar": path_text(path), "seed": seed, "tree": tree.map(|p| p.display().to_string()) });
    Ok(Outcome::new(text, results, inputs))
}

fn trace_sound(path: Option<&Path>, seed: u64, max_steps: usize) -> Result<Outcome> {
    let g = load_grammar(path)?;
    let nfa = build(&g, state_budget(DEFAULT_STATE_BUDGET)?)?;
    let run = random_accepted_run(&nfa, seed, max_steps).ok_or_else(|| anyhow!("the automaton accepts nothing"))?;
    let back = soundness_reconstruct(&g, &run)?;
    let labels: Vec<_> = run.iter().flat_map(|s| s.label.iter().copied()).collect();
    let text = jsonl(&back.records)?;
    eprintln!(
        "run reads `{}`; derived word `{}` has the same Parikh image",
        g.word_text(&labels),
        g.word_text(&back.word)
    );
    let results = json!({
        "run_word": g.word_text(&labels),
        "derived_word": g.word_text(&back.word),
        "parikh": ParikhVector::of_word(&back.word).to_named(g.terminals()),
        "steps": back.records,
    });
    Ok(Outcome::new(text, results, json!({ "grammar": path_text(path), "seed": seed })))
}

fn invariants(path: Option<&Path>, mode: WidthMode) -> Result<Outcome> {
    let g = load_grammar(path)?;
    let rg = ReminderGraph::build(&g);
    let w = regularity_width_of(&rg, mode).context("regularity width")?;
    let sym = check_invariants_symbolic(&g, &rg, w.d, DEFAULT_SATURATION_BUDGET)?;
    let states = sym.states.map_or_else(|| "uncounted".to_string(), |s| s.to_string());
    let mut text = format!(
        "d = {}{}\nreachable states: {states}\nlongest sequence: {} (bound 2d+1 = {})\n",
        w.d,
        if w.exact { "" } else { " (upper bound)" },
        sym.max_sequence_length,
        sym.length_bound
    );
    let mut failed = !sym.ok();
    for v in &sym.violations {
        text += &format!("violation {}: {}\n", v.check, v.detail);
    }
    let mut listed = Value::Null;
    if let Ok(nfa) = build(&g, state_budget(DEFAULT_STATE_BUDGET)?) {
        let r = check_state_invariants(nfa.states(), &g, &rg, w.d);
        text += &format!(
            "listed check: {} states, {} longer than d, {} violations\n",
            r.states_checked,
            r.states_longer_than_d,
            r.violations.len()
        );
        for v in r.violations.iter().take(20) {
            text += &format!("violation {} at state {}: {}\n", v.check, v.state, v.detail);
        }
        failed |= !r.ok();
        listed = serde_json::to_value(&r)?;
    }
    text += if failed { "FAIL\n" } else { "all invariants hold\n" };
    let results = json!({ "d": w.d, "width_exact": w.exact, "symbolic": sym, "listed": listed });
    Ok(Outcome::new(text, results, json!({ "grammar": path_text(path) })).failing_if(failed))
}

fn stress_cmd(cfg: &StressConfig) -> Result<Outcome> {
    let r = stress(cfg)?;
    let mut text = format!("{} trials: {} passed, {} failed (k = {})\n", r.trials, r.passed, r.failed, r.k);
    for t in r.results.iter().filter(|t| !t.passed) {
        text += &format!("seed {}: {}\n", t.seed, t.failures.join("; "));
    }
    if let Some(f) = &r.first_failure {
        text += &format!(
            "first failure (seed {}) shrunk in {} steps to:\n{}",
            f.seed, f.shrink_steps, f.shrunk
        );
    }
    let failed = !r.ok();
    Ok(Outcome::new(text, &r, serde_json::to_value(cfg)?).failing_if(failed))
}

fn gen(which: &GenCommand, json: bool) -> Result<Outcome> {
    let (g, inputs) = match which {
        GenCommand::Gn { n } => (
            gn_grammar(*n).map_err(|e| usage(e.to_string()))?,
            json!({ "family": "gn", "n": n }),
        ),
        GenCommand::Ports { points, ports, seed } => {
            let seed = seed_or_default(json, *seed)?;
            (
                ports_grammar(*points, *ports, seed).map_err(|e| usage(e.to_string()))?,
                json!({ "family": "ports", "points": points, "ports": ports, "seed": seed }),
            )
        }
        GenCommand::Random { spec, seed } => {
            let s = load_spec(spec.as_deref())?;
            let g = random_grammar(&s, *seed).map_err(|e| usage(e.to_string()))?;
            (g, json!({ "family": "random", "spec": s, "seed": seed }))
        }
    };
    let text = render(&g);
    Ok(Outcome::new(text.clone(), json!({ "grammar": text }), inputs))
}
