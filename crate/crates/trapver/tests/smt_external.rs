//! Cross-checks of the emitted SMT-LIB2 scripts against external solvers.
//!
//! The internal count-vector procedure is the primary decision engine;
//! these tests validate the export path whenever `z3` or `cvc5` happens to
//! be installed (the LIA encoding runs on either, the finite-set encoding
//! needs cvc5). Without a solver on PATH they are skipped with a note.

use std::io::Write as _;
use std::process::{Command, Stdio};
use trapver::card::card_sat;
use trapver::parse::parse_system;
use trapver::pipeline::{bundled_corpus, parametric_vc};
use trapver::smt::{emit_smtlib, SmtTheory};
use trapver::Limits;

fn solver_available(name: &str) -> bool {
    Command::new(name)
        .arg("--version")
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .status()
        .is_ok()
}

fn run_solver(name: &str, args: &[&str], script: &str) -> String {
    let mut child = Command::new(name)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .expect("solver spawns");
    child
        .stdin
        .as_mut()
        .unwrap()
        .write_all(script.as_bytes())
        .unwrap();
    let out = child.wait_with_output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    text.lines()
        .find(|l| *l == "sat" || *l == "unsat")
        .unwrap_or("unknown")
        .to_string()
}

fn strip_get_model(script: &str) -> String {
    // Solvers reject (get-model) after unsat; the scripts carry it for
    // interactive use.
    script.replace("(get-model)\n", "")
}

#[test]
fn external_solvers_agree_with_internal_verdicts() {
    let limits = Limits::default();
    let z3 = solver_available("z3");
    let cvc5 = solver_available("cvc5");
    if !z3 && !cvc5 {
        println!("skipped: no external SMT solver on PATH");
        return;
    }
    let mut cases: Vec<(String, String)> = bundled_corpus()
        .into_iter()
        .map(|(n, s)| (n.to_string(), s.to_string()))
        .collect();
    cases.push((
        "mutex-param".into(),
        include_str!("../../../systems/mutex-param.sys").into(),
    ));
    for (name, source) in cases {
        let def = parse_system(&source).unwrap();
        let vc = parametric_vc(&def, &limits).unwrap().1;
        let internal = if card_sat(&vc, &limits, true).unwrap().is_sat() {
            "sat"
        } else {
            "unsat"
        };
        let lia = strip_get_model(&emit_smtlib(&vc, SmtTheory::Lia, true).unwrap());
        if z3 {
            assert_eq!(
                run_solver("z3", &["-in"], &lia),
                internal,
                "{name}: z3 on the LIA script"
            );
        }
        if cvc5 {
            assert_eq!(
                run_solver("cvc5", &["--lang", "smt2"], &lia),
                internal,
                "{name}: cvc5 on the LIA script"
            );
            let sets = strip_get_model(&emit_smtlib(&vc, SmtTheory::Sets, true).unwrap());
            assert_eq!(
                run_solver("cvc5", &["--lang", "smt2"], &sets),
                internal,
                "{name}: cvc5 on the set encoding"
            );
        }
    }
}
