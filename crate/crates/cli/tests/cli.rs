use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

use serde_json::{json, Value};

fn run(args: &[&str], stdin: Option<&str>) -> Output {
    run_env(args, stdin, &[])
}

fn run_env(args: &[&str], stdin: Option<&str>, env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_parikh"));
    cmd.args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    for (k, v) in env {
        cmd.env(k, v);
    }
    let mut child = cmd.spawn().unwrap();
    {
        let mut pipe = child.stdin.take().unwrap();
        if let Some(text) = stdin {
            // Usage errors exit before reading stdin.
            let _ = pipe.write_all(text.as_bytes());
        }
    }
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json_out(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn gen_gn(n: usize) -> String {
    stdout(&run(&["gen", "gn", &n.to_string()], None))
}

fn temp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("parikh-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn analyze_g3_from_stdin() {
    let o = run(&["analyze"], Some(&gen_gn(3)));
    assert!(o.status.success());
    let text = stdout(&o);
    for line in ["n = 3", "m = 1", "d = 2 (exact)", "768"] {
        assert!(text.contains(line), "{line} missing from\n{text}");
    }

    let o = run(&["--json", "analyze", "-"], Some(&gen_gn(3)));
    let env = json_out(&o);
    assert_eq!(env["command"], "analyze");
    assert_eq!(env["results"]["stats"]["n"], 3);
    assert_eq!(env["results"]["stats"]["m"], 1);
    assert_eq!(env["results"]["d"], 2);
    assert!(env["timings"]["total_ms"].is_number());
    assert_eq!(env["inputs"]["grammar"], "<stdin>");
}

#[test]
fn verify_gn4() {
    let o = run(&["verify", "-k", "8"], Some(&gen_gn(4)));
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("verdict: equal"));
}

#[test]
fn verify_corrupted_fixture_fails_with_witness() {
    let o = run(
        &[
            "--json",
            "verify",
            &fixture("g3.cfg"),
            "-k",
            "8",
            "--nfa",
            &fixture("g3_corrupted.nfa.json"),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(1));
    let r = &json_out(&o)["results"];
    assert_eq!(r["verdict"], "unequal");
    assert_eq!(r["only_grammar"], json!([{ "a": 4 }]));
    assert_eq!(r["only_automaton"], json!([{ "a": 5 }]));
}

#[test]
fn verify_with_tiny_state_budget_searches_on_the_fly() {
    let o = run_env(&["--json", "verify", "-k", "4"], Some(&gen_gn(3)), &[("PARIKH_STATE_BUDGET", "2")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json_out(&o)["results"]["automaton"]["kind"], "on-the-fly");

    let o = run_env(&["verify", "-k", "4"], Some(&gen_gn(3)), &[("PARIKH_STATE_BUDGET", "lots")]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_and_input_errors_exit_two() {
    assert_eq!(run(&["frobnicate"], None).status.code(), Some(2));
    assert_eq!(run(&["remgraph", "-"], Some(&gen_gn(2))).status.code(), Some(2));
    assert_eq!(run(&["analyze"], Some("S -> ->")).status.code(), Some(2));
    assert_eq!(run(&["analyze", "/nonexistent/grammar"], None).status.code(), Some(2));
    assert_eq!(run(&["gen", "gn", "0"], None).status.code(), Some(2));
}

#[test]
fn json_mode_requires_seeds() {
    let g = gen_gn(2);
    for args in [
        vec!["--json", "trace", "complete"],
        vec!["--json", "trace", "sound"],
        vec!["--json", "gen", "ports", "4", "2"],
        vec!["--json", "analyze", "--heuristic"],
        vec!["--json", "stress", "--trials", "1"],
    ] {
        let o = run(&args, Some(&g));
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
    let o = run(&["--json", "trace", "complete", "--seed", "3"], Some(&g));
    assert!(o.status.success());
    let o = run(&["--json", "analyze", "--heuristic", "--seed", "1"], Some(&g));
    assert_eq!(json_out(&o)["results"]["width_exact"], false);
}

#[test]
fn remgraph_exports() {
    let g = "start: S\nS -> A B\nA -> a | B\nB -> b\n";
    let o = run(&["remgraph", "--gr"], Some(g));
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("p tw 3 "));
    let o = run(&["--json", "remgraph", "--gr"], Some(g));
    assert_eq!(json_out(&o)["results"]["ids"]["1"], "S");
    let o = run(&["remgraph", "--dot"], Some(g));
    assert!(stdout(&o).contains("graph"));
}

#[test]
fn build_accepts_and_parikh_set() {
    let nfa = temp("anbn.nfa.json");
    let dot = temp("anbn.dot");
    let nfa_s = nfa.to_str().unwrap();
    let g = "start: S\nS -> a S b | _eps_\n";
    let o = run(&["build", "--out", nfa_s, "--dot", dot.to_str().unwrap()], Some(g));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(&dot).unwrap().starts_with("digraph"));

    let o = run(&["accepts", nfa_s, "a b a b"], None);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("accepted"));
    let o = run(&["accepts", nfa_s, "aab"], None);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["accepts", nfa_s, "a c"], None);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["--json", "parikh-set", nfa_s, "-k", "4"], None);
    let r = &json_out(&o)["results"];
    assert_eq!(r["count"], 3);
    assert_eq!(r["vectors"][2], json!({ "a": 2, "b": 2 }));

    let gfile = temp("anbn.cfg");
    std::fs::write(&gfile, g).unwrap();
    let o = run(&["--json", "parikh-set", gfile.to_str().unwrap(), "-k", "4"], None);
    assert_eq!(json_out(&o)["results"]["count"], 3);
}

#[test]
fn traces_print_json_lines() {
    let g = "start: S\nS -> a S b | c\n";
    let o = run(&["trace", "complete", "--seed", "5"], Some(g));
    assert!(o.status.success());
    let lines: Vec<Value> = stdout(&o)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(!lines.is_empty());
    assert!(lines.windows(2).all(|w| w[0]["size_after"] == w[1]["size_before"]));

    let tree = temp("tree.sexpr");
    std::fs::write(&tree, "(S a (S c) b)").unwrap();
    let o = run(&["--json", "trace", "complete", "--tree", tree.to_str().unwrap()], Some(g));
    let r = &json_out(&o)["results"];
    assert_eq!(r["parikh"], json!({ "a": 1, "b": 1, "c": 1 }));

    let o = run(&["--json", "trace", "sound", "--seed", "2", "--max-steps", "10"], Some(g));
    assert!(o.status.success());
    let r = &json_out(&o)["results"];
    let a = r["parikh"]["a"].as_u64().unwrap_or(0);
    assert_eq!(r["parikh"]["b"].as_u64().unwrap_or(0), a);
}

#[test]
fn invariants_and_stress() {
    let o = run(&["invariants"], Some(&gen_gn(4)));
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("all invariants hold"));

    let spec = temp("spec.json");
    std::fs::write(&spec, r#"{"n": 3, "terminal_count": 2}"#).unwrap();
    let o = run(
        &["--json", "stress", "--trials", "4", "--spec", spec.to_str().unwrap(), "-k", "5", "--seed", "10"],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let env = json_out(&o);
    assert_eq!(env["results"]["passed"], 4);
    assert_eq!(env["inputs"]["spec"]["n"], 3);
}

#[test]
fn generators_round_trip() {
    let a = run(&["gen", "random", "--seed", "9"], None);
    let b = run(&["gen", "random", "--seed", "9"], None);
    assert_eq!(a.stdout, b.stdout);
    let o = run(&["analyze"], Some(&stdout(&a)));
    assert!(o.status.success());

    let p = run(&["gen", "ports", "5", "2", "--seed", "1"], None);
    let o = run(&["--json", "analyze"], Some(&stdout(&p)));
    assert!(json_out(&o)["results"]["d"].as_u64().unwrap() <= 3);
}
