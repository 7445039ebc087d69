//! SMT-LIB2 export of closed cardinality formulae.
//!
//! Two encodings are produced for external cross-checking. The `lia`
//! script mirrors the internal decision procedure exactly: one integer
//! count per complete minterm of each type's vocabulary. The `sets` script
//! uses a finite-set sort with a cardinality operator, one set constant
//! per predicate and a declared universe per type. Output is deterministic
//! for a fixed input: declarations are sorted and there is a single assert.

use crate::card::{BoolTerm, Bound, CardError, CardFormula, CardOp};
use crate::mil::PredSymbol;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmtTheory {
    /// Quantifier-free linear integer arithmetic over minterm counts.
    Lia,
    /// Finite sets with cardinality.
    Sets,
}

impl std::str::FromStr for SmtTheory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lia" => Ok(SmtTheory::Lia),
            "sets" => Ok(SmtTheory::Sets),
            other => Err(format!(
                "unknown theory `{other}` (expected `lia` or `sets`)"
            )),
        }
    }
}

/// Per-type vocabularies mentioned by the formula, sorted.
fn vocabularies(phi: &CardFormula) -> BTreeMap<String, Vec<PredSymbol>> {
    fn walk(f: &CardFormula, out: &mut BTreeMap<String, BTreeSet<PredSymbol>>) {
        match f {
            CardFormula::True | CardFormula::False => {}
            CardFormula::Card(a) => {
                out.entry(a.ty.clone()).or_default().extend(a.term.preds());
            }
            CardFormula::Pred(..) | CardFormula::Eq(..) | CardFormula::Neq(..) => {}
            CardFormula::Not(f) => walk(f, out),
            CardFormula::And(fs) | CardFormula::Or(fs) => fs.iter().for_each(|f| walk(f, out)),
        }
    }
    let mut sets = BTreeMap::new();
    walk(phi, &mut sets);
    sets.into_iter()
        .map(|(ty, preds)| (ty, preds.into_iter().collect()))
        .collect()
}

/// Emit an SMT-LIB2 script deciding the closed formula `phi`.
/// `nonempty` asserts at least one instance per mentioned component type.
pub fn emit_smtlib(
    phi: &CardFormula,
    theory: SmtTheory,
    nonempty: bool,
) -> Result<String, CardError> {
    if !phi.is_closed() {
        return Err(CardError::NotClosed("emit".into()));
    }
    match theory {
        SmtTheory::Lia => emit_lia(phi, nonempty),
        SmtTheory::Sets => emit_sets(phi, nonempty),
    }
}

fn count_var(ty: &str, vocab: &[PredSymbol], mask: usize) -> String {
    let mut name = format!("n_{ty}");
    if vocab.is_empty() {
        name.push_str(".any");
        return name;
    }
    for (b, p) in vocab.iter().enumerate() {
        if mask & (1 << b) != 0 {
            name.push('.');
            name.push_str(p.name());
        }
    }
    if name == format!("n_{ty}") {
        name.push_str(".none");
    }
    name
}

fn emit_lia(phi: &CardFormula, nonempty: bool) -> Result<String, CardError> {
    let vocabs = vocabularies(phi);
    let mut out = String::new();
    out.push_str("; count of instances per complete minterm and component type\n");
    out.push_str("(set-logic QF_LIA)\n");
    let mut side = Vec::new();
    for (ty, vocab) in &vocabs {
        let subsets = 1usize << vocab.len();
        let mut names = Vec::new();
        for mask in 0..subsets {
            let name = count_var(ty, vocab, mask);
            let _ = writeln!(out, "(declare-const {name} Int)");
            side.push(format!("(>= {name} 0)"));
            names.push(name);
        }
        if nonempty {
            side.push(format!("(>= {} 1)", sum_expr(&names)));
        }
    }
    let body = lia_formula(phi, &vocabs);
    let mut all = side;
    all.push(body);
    let _ = writeln!(out, "(assert (and {}))", all.join(" "));
    out.push_str("(check-sat)\n(get-model)\n");
    Ok(out)
}

fn sum_expr(terms: &[String]) -> String {
    match terms.len() {
        0 => "0".to_string(),
        1 => terms[0].clone(),
        _ => format!("(+ {})", terms.join(" ")),
    }
}

fn lia_formula(phi: &CardFormula, vocabs: &BTreeMap<String, Vec<PredSymbol>>) -> String {
    match phi {
        CardFormula::True => "true".into(),
        CardFormula::False => "false".into(),
        CardFormula::Card(a) => {
            let vocab = &vocabs[&a.ty];
            let subsets = 1usize << vocab.len();
            let members: Vec<String> = (0..subsets)
                .filter(|&s| a.term.accepts_mask(vocab, s))
                .map(|s| count_var(&a.ty, vocab, s))
                .collect();
            let sum = sum_expr(&members);
            match (a.op, a.bound) {
                (CardOp::Ge, Bound::Finite(n)) => format!("(>= {sum} {n})"),
                (CardOp::Le, Bound::Finite(n)) => format!("(<= {sum} {n})"),
                (CardOp::Ge, Bound::Infinite) => "false".into(),
                (CardOp::Le, Bound::Infinite) => "true".into(),
            }
        }
        CardFormula::Pred(..) | CardFormula::Eq(..) | CardFormula::Neq(..) => {
            unreachable!("closed formula")
        }
        CardFormula::Not(f) => format!("(not {})", lia_formula(f, vocabs)),
        CardFormula::And(fs) => format!(
            "(and {})",
            fs.iter()
                .map(|f| lia_formula(f, vocabs))
                .collect::<Vec<_>>()
                .join(" ")
        ),
        CardFormula::Or(fs) => format!(
            "(or {})",
            fs.iter()
                .map(|f| lia_formula(f, vocabs))
                .collect::<Vec<_>>()
                .join(" ")
        ),
    }
}

fn set_name(p: &PredSymbol) -> String {
    format!("{}_{}", p.component_type(), p.name())
}

fn universe_name(ty: &str) -> String {
    format!("U_{ty}")
}

fn emit_sets(phi: &CardFormula, nonempty: bool) -> Result<String, CardError> {
    let vocabs = vocabularies(phi);
    let mut out = String::new();
    out.push_str("; one set constant per predicate, one universe per component type\n");
    out.push_str("(set-logic ALL)\n");
    let mut side = Vec::new();
    for (ty, vocab) in &vocabs {
        let u = universe_name(ty);
        let _ = writeln!(out, "(declare-fun {u} () (Set Int))");
        for p in vocab {
            let name = set_name(p);
            let _ = writeln!(out, "(declare-fun {name} () (Set Int))");
            side.push(format!("(set.subset {name} {u})"));
        }
        if nonempty {
            side.push(format!("(>= (set.card {u}) 1)"));
        }
    }
    let body = sets_formula(phi);
    let mut all = side;
    all.push(body);
    let _ = writeln!(out, "(assert (and {}))", all.join(" "));
    out.push_str("(check-sat)\n(get-model)\n");
    Ok(out)
}

fn set_term(t: &BoolTerm, ty: &str) -> String {
    match t {
        BoolTerm::True => universe_name(ty),
        BoolTerm::False => "(as set.empty (Set Int))".into(),
        BoolTerm::Pred(p) => set_name(p),
        BoolTerm::Not(inner) => {
            format!("(set.minus {} {})", universe_name(ty), set_term(inner, ty))
        }
        BoolTerm::And(ts) => nary_set("set.inter", ts, ty),
        BoolTerm::Or(ts) => nary_set("set.union", ts, ty),
    }
}

fn nary_set(op: &str, ts: &[BoolTerm], ty: &str) -> String {
    // SMT set operators are binary; fold left.
    let mut iter = ts.iter();
    let first = set_term(iter.next().expect("nonempty junction"), ty);
    iter.fold(first, |acc, t| format!("({op} {acc} {})", set_term(t, ty)))
}

fn sets_formula(phi: &CardFormula) -> String {
    match phi {
        CardFormula::True => "true".into(),
        CardFormula::False => "false".into(),
        CardFormula::Card(a) => {
            let card = format!("(set.card {})", set_term(&a.term, &a.ty));
            match (a.op, a.bound) {
                (CardOp::Ge, Bound::Finite(n)) => format!("(>= {card} {n})"),
                (CardOp::Le, Bound::Finite(n)) => format!("(<= {card} {n})"),
                (CardOp::Ge, Bound::Infinite) => "false".into(),
                (CardOp::Le, Bound::Infinite) => "true".into(),
            }
        }
        CardFormula::Pred(..) | CardFormula::Eq(..) | CardFormula::Neq(..) => {
            unreachable!("closed formula")
        }
        CardFormula::Not(f) => format!("(not {})", sets_formula(f)),
        CardFormula::And(fs) => format!(
            "(and {})",
            fs.iter().map(sets_formula).collect::<Vec<_>>().join(" ")
        ),
        CardFormula::Or(fs) => format!(
            "(or {})",
            fs.iter().map(sets_formula).collect::<Vec<_>>().join(" ")
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prop::VarKind;

    fn sample() -> CardFormula {
        let p = PredSymbol::new("p", "Worker", VarKind::State);
        let q = PredSymbol::new("q", "Worker", VarKind::State);
        CardFormula::and([
            CardFormula::ge("Worker", BoolTerm::pred(p), Bound::Finite(1)),
            CardFormula::le("Worker", BoolTerm::not(BoolTerm::pred(q)), Bound::Finite(2)),
        ])
    }

    #[test]
    fn lia_script_declares_sorted_counts_once() {
        let script = emit_smtlib(&sample(), SmtTheory::Lia, true).unwrap();
        assert!(script.contains("(set-logic QF_LIA)"));
        // Four complete minterms over {p, q}.
        assert_eq!(script.matches("(declare-const").count(), 4);
        assert_eq!(script.matches("(assert").count(), 1);
        assert!(script.contains("(check-sat)"));
        assert!(script.contains("n_Worker.none"));
        assert!(script.contains("n_Worker.p.q"));
    }

    #[test]
    fn sets_script_declares_universe_and_sets() {
        let script = emit_smtlib(&sample(), SmtTheory::Sets, true).unwrap();
        assert!(script.contains("(set-logic ALL)"));
        assert!(script.contains("(declare-fun U_Worker () (Set Int))"));
        assert!(script.contains("(declare-fun Worker_p () (Set Int))"));
        assert!(script.contains("set.subset"));
        assert!(script.contains("(set.card"));
        assert_eq!(script.matches("(assert").count(), 1);
    }

    #[test]
    fn emission_is_deterministic() {
        let a = emit_smtlib(&sample(), SmtTheory::Lia, true).unwrap();
        let b = emit_smtlib(&sample(), SmtTheory::Lia, true).unwrap();
        assert_eq!(a, b);
        let c = emit_smtlib(&sample(), SmtTheory::Sets, false).unwrap();
        let d = emit_smtlib(&sample(), SmtTheory::Sets, false).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn lia_ge_atom_shape() {
        let p = PredSymbol::new("p", "Worker", VarKind::State);
        let phi = CardFormula::ge("Worker", BoolTerm::pred(p), Bound::Finite(1));
        let script = emit_smtlib(&phi, SmtTheory::Lia, true).unwrap();
        assert!(script.contains("(>= n_Worker.p 1)"), "{script}");
    }
}
