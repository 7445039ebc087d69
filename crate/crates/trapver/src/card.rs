//! Boolean cardinality constraints and the bridge from monadic logic.
//!
//! The pieces here implement the parametric verification route:
//! quantifier elimination turns a sentence into a boolean combination of
//! atoms `|t| >= n` / `|t| <= n` over boolean terms of one component type;
//! complete-minterm decomposition and the positivation operator rebuild a
//! positive formula preserving minimal models; a count-vector search decides
//! satisfiability, with SMT-LIB2 export as an external escape hatch.

use crate::mil::{
    eval_mil, prenex_parts, IndexVar, MilError, MilFormula, PredSymbol, Quantifier, Structure,
};
use crate::{exec, Limits};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CardError {
    #[error("cardinality DNF would exceed the cap of {cap} minterms")]
    DnfCap { cap: usize },
    #[error("vocabulary of {size} predicates exceeds the cap of {cap}")]
    VocabCap { size: usize, cap: usize },
    #[error("composition enumeration would exceed the cap of {cap}")]
    CompositionCap { cap: usize },
    #[error("formula is not closed: residual atom over `{0}`")]
    NotClosed(String),
    #[error(transparent)]
    Mil(#[from] MilError),
}

/// Upper or lower bound of a cardinality atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bound {
    Finite(u32),
    Infinite,
}

impl Bound {
    pub fn finite(self) -> Option<u32> {
        match self {
            Bound::Finite(n) => Some(n),
            Bound::Infinite => None,
        }
    }

    fn add(self, other: Bound) -> Bound {
        match (self, other) {
            (Bound::Finite(a), Bound::Finite(b)) => Bound::Finite(a + b),
            _ => Bound::Infinite,
        }
    }

    fn min(self, other: Bound) -> Bound {
        match (self, other) {
            (Bound::Finite(a), Bound::Finite(b)) => Bound::Finite(a.min(b)),
            (Bound::Finite(a), _) | (_, Bound::Finite(a)) => Bound::Finite(a),
            _ => Bound::Infinite,
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Finite(n) => write!(f, "{n}"),
            Bound::Infinite => f.write_str("inf"),
        }
    }
}

/// Boolean term over the predicates of a single component type.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoolTerm {
    True,
    False,
    Pred(PredSymbol),
    Not(Box<BoolTerm>),
    And(Vec<BoolTerm>),
    Or(Vec<BoolTerm>),
}

impl BoolTerm {
    pub fn pred(p: PredSymbol) -> Self {
        BoolTerm::Pred(p)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(t: BoolTerm) -> Self {
        match t {
            BoolTerm::True => BoolTerm::False,
            BoolTerm::False => BoolTerm::True,
            BoolTerm::Not(inner) => *inner,
            other => BoolTerm::Not(Box::new(other)),
        }
    }

    pub fn and(ts: impl IntoIterator<Item = BoolTerm>) -> Self {
        let mut out = Vec::new();
        for t in ts {
            match t {
                BoolTerm::True => {}
                BoolTerm::False => return BoolTerm::False,
                BoolTerm::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => BoolTerm::True,
            1 => out.pop().unwrap(),
            _ => BoolTerm::And(out),
        }
    }

    pub fn or(ts: impl IntoIterator<Item = BoolTerm>) -> Self {
        let mut out = Vec::new();
        for t in ts {
            match t {
                BoolTerm::False => {}
                BoolTerm::True => return BoolTerm::True,
                BoolTerm::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => BoolTerm::False,
            1 => out.pop().unwrap(),
            _ => BoolTerm::Or(out),
        }
    }

    pub fn preds(&self) -> BTreeSet<PredSymbol> {
        let mut out = BTreeSet::new();
        self.collect_preds(&mut out);
        out
    }

    fn collect_preds(&self, out: &mut BTreeSet<PredSymbol>) {
        match self {
            BoolTerm::True | BoolTerm::False => {}
            BoolTerm::Pred(p) => {
                out.insert(p.clone());
            }
            BoolTerm::Not(t) => t.collect_preds(out),
            BoolTerm::And(ts) | BoolTerm::Or(ts) => ts.iter().for_each(|t| t.collect_preds(out)),
        }
    }

    /// Truth of the term at the valuation making exactly the predicates with
    /// their bit set in `mask` true, `vocab` giving the bit order.
    pub fn accepts_mask(&self, vocab: &[PredSymbol], mask: usize) -> bool {
        match self {
            BoolTerm::True => true,
            BoolTerm::False => false,
            BoolTerm::Pred(p) => {
                let idx = vocab
                    .iter()
                    .position(|q| q == p)
                    .expect("predicate outside vocabulary");
                mask & (1 << idx) != 0
            }
            BoolTerm::Not(t) => !t.accepts_mask(vocab, mask),
            BoolTerm::And(ts) => ts.iter().all(|t| t.accepts_mask(vocab, mask)),
            BoolTerm::Or(ts) => ts.iter().any(|t| t.accepts_mask(vocab, mask)),
        }
    }

    /// Elements of a structure satisfying the term, within the given type.
    pub fn elements(&self, st: &Structure, ty: &str) -> Result<BTreeSet<usize>, MilError> {
        let n = st.size_of(ty)?;
        let mut out = BTreeSet::new();
        for e in 1..=n {
            if self.holds_at(st, e) {
                out.insert(e);
            }
        }
        Ok(out)
    }

    fn holds_at(&self, st: &Structure, elem: usize) -> bool {
        match self {
            BoolTerm::True => true,
            BoolTerm::False => false,
            BoolTerm::Pred(p) => st.elements_of(p).contains(&elem),
            BoolTerm::Not(t) => !t.holds_at(st, elem),
            BoolTerm::And(ts) => ts.iter().all(|t| t.holds_at(st, elem)),
            BoolTerm::Or(ts) => ts.iter().any(|t| t.holds_at(st, elem)),
        }
    }

    /// Negation pushed down to predicate literals.
    pub fn negate_nnf(&self) -> BoolTerm {
        match self {
            BoolTerm::True => BoolTerm::False,
            BoolTerm::False => BoolTerm::True,
            BoolTerm::Pred(p) => BoolTerm::Not(Box::new(BoolTerm::Pred(p.clone()))),
            BoolTerm::Not(t) => (**t).clone(),
            BoolTerm::And(ts) => BoolTerm::or(ts.iter().map(|t| t.negate_nnf())),
            BoolTerm::Or(ts) => BoolTerm::and(ts.iter().map(|t| t.negate_nnf())),
        }
    }

    /// The formula `t(i)`: the term applied to an index variable.
    pub fn applied_to(&self, i: &IndexVar) -> MilFormula {
        match self {
            BoolTerm::True => MilFormula::True,
            BoolTerm::False => MilFormula::False,
            BoolTerm::Pred(p) => MilFormula::pred(p.clone(), i.clone()),
            BoolTerm::Not(t) => MilFormula::not(t.applied_to(i)),
            BoolTerm::And(ts) => MilFormula::and(ts.iter().map(|t| t.applied_to(i))),
            BoolTerm::Or(ts) => MilFormula::or(ts.iter().map(|t| t.applied_to(i))),
        }
    }

    /// Two terms are compatible when their conjunction is satisfiable over
    /// the union of their vocabularies.
    pub fn compatible(&self, other: &BoolTerm) -> bool {
        let vocab: Vec<PredSymbol> = self.preds().union(&other.preds()).cloned().collect();
        (0..(1usize << vocab.len()))
            .any(|mask| self.accepts_mask(&vocab, mask) && other.accepts_mask(&vocab, mask))
    }
}

impl fmt::Display for BoolTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(node: &BoolTerm, f: &mut fmt::Formatter<'_>, parent: u8) -> fmt::Result {
            let prec = match node {
                BoolTerm::True | BoolTerm::False | BoolTerm::Pred(_) | BoolTerm::Not(_) => 3,
                BoolTerm::And(_) => 2,
                BoolTerm::Or(_) => 1,
            };
            let paren = prec < parent;
            if paren {
                f.write_str("(")?;
            }
            match node {
                BoolTerm::True => f.write_str("true")?,
                BoolTerm::False => f.write_str("false")?,
                BoolTerm::Pred(p) => write!(f, "{p}")?,
                BoolTerm::Not(t) => {
                    f.write_str("!")?;
                    go(t, f, 3)?;
                }
                BoolTerm::And(ts) => {
                    for (i, t) in ts.iter().enumerate() {
                        if i > 0 {
                            f.write_str(" & ")?;
                        }
                        go(t, f, 2)?;
                    }
                }
                BoolTerm::Or(ts) => {
                    for (i, t) in ts.iter().enumerate() {
                        if i > 0 {
                            f.write_str(" | ")?;
                        }
                        go(t, f, 1)?;
                    }
                }
            }
            if paren {
                f.write_str(")")?;
            }
            Ok(())
        }
        go(self, f, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CardOp {
    Ge,
    Le,
}

/// Cardinality atom `|term| op bound` over one component type.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CardAtom {
    pub ty: String,
    pub term: BoolTerm,
    pub op: CardOp,
    pub bound: Bound,
}

impl fmt::Display for CardAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.op {
            CardOp::Ge => ">=",
            CardOp::Le => "<=",
        };
        write!(f, "|{}| {} {}", self.term, op, self.bound)
    }
}

/// Boolean combination of cardinality atoms. `Pred`, `Eq` and `Neq` atoms
/// over index variables appear only in intermediate quantifier-elimination
/// states; a closed formula has none.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CardFormula {
    True,
    False,
    Card(CardAtom),
    Pred(PredSymbol, IndexVar),
    Eq(IndexVar, IndexVar),
    Neq(IndexVar, IndexVar),
    Not(Box<CardFormula>),
    And(Vec<CardFormula>),
    Or(Vec<CardFormula>),
}

impl CardFormula {
    /// `|term| >= bound`, folding the trivial cases away.
    pub fn ge(ty: impl Into<String>, term: BoolTerm, bound: Bound) -> CardFormula {
        match bound {
            Bound::Finite(0) => CardFormula::True,
            Bound::Infinite => CardFormula::False,
            Bound::Finite(_) => CardFormula::Card(CardAtom {
                ty: ty.into(),
                term,
                op: CardOp::Ge,
                bound,
            }),
        }
    }

    /// `|term| <= bound`, folding the trivial cases away.
    pub fn le(ty: impl Into<String>, term: BoolTerm, bound: Bound) -> CardFormula {
        match bound {
            Bound::Infinite => CardFormula::True,
            Bound::Finite(_) => CardFormula::Card(CardAtom {
                ty: ty.into(),
                term,
                op: CardOp::Le,
                bound,
            }),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: CardFormula) -> CardFormula {
        match f {
            CardFormula::True => CardFormula::False,
            CardFormula::False => CardFormula::True,
            CardFormula::Eq(i, j) => CardFormula::Neq(i, j),
            CardFormula::Neq(i, j) => CardFormula::Eq(i, j),
            // The complement of a cardinality atom is again an atom.
            CardFormula::Card(a) => a.complement(),
            CardFormula::Not(inner) => *inner,
            other => CardFormula::Not(Box::new(other)),
        }
    }

    pub fn and(fs: impl IntoIterator<Item = CardFormula>) -> CardFormula {
        let mut out = Vec::new();
        for f in fs {
            match f {
                CardFormula::True => {}
                CardFormula::False => return CardFormula::False,
                CardFormula::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => CardFormula::True,
            1 => out.pop().unwrap(),
            _ => CardFormula::And(out),
        }
    }

    pub fn or(fs: impl IntoIterator<Item = CardFormula>) -> CardFormula {
        let mut out = Vec::new();
        for f in fs {
            match f {
                CardFormula::False => {}
                CardFormula::True => return CardFormula::True,
                CardFormula::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => CardFormula::False,
            1 => out.pop().unwrap(),
            _ => CardFormula::Or(out),
        }
    }

    pub fn implies(lhs: CardFormula, rhs: CardFormula) -> CardFormula {
        CardFormula::or([CardFormula::not(lhs), rhs])
    }

    /// No residual index-variable atoms.
    pub fn is_closed(&self) -> bool {
        self.first_open().is_none()
    }

    fn first_open(&self) -> Option<String> {
        match self {
            CardFormula::True | CardFormula::False | CardFormula::Card(_) => None,
            CardFormula::Pred(_, i) | CardFormula::Eq(i, _) | CardFormula::Neq(i, _) => {
                Some(i.name().to_string())
            }
            CardFormula::Not(f) => f.first_open(),
            CardFormula::And(fs) | CardFormula::Or(fs) => fs.iter().find_map(|f| f.first_open()),
        }
    }

    /// Negation normal form. Negated cardinality atoms flip into their
    /// complements, so negation survives only on predicate atoms.
    pub fn nnf(&self) -> CardFormula {
        self.nnf_rec(false)
    }

    fn nnf_rec(&self, negate: bool) -> CardFormula {
        match (self, negate) {
            (CardFormula::True, false) | (CardFormula::False, true) => CardFormula::True,
            (CardFormula::True, true) | (CardFormula::False, false) => CardFormula::False,
            (CardFormula::Card(a), false) => CardFormula::Card(a.clone()),
            (CardFormula::Card(a), true) => a.complement(),
            (CardFormula::Pred(p, i), false) => CardFormula::Pred(p.clone(), i.clone()),
            (CardFormula::Pred(p, i), true) => {
                CardFormula::Not(Box::new(CardFormula::Pred(p.clone(), i.clone())))
            }
            (CardFormula::Eq(i, j), false) | (CardFormula::Neq(i, j), true) => {
                CardFormula::Eq(i.clone(), j.clone())
            }
            (CardFormula::Eq(i, j), true) | (CardFormula::Neq(i, j), false) => {
                CardFormula::Neq(i.clone(), j.clone())
            }
            (CardFormula::Not(f), _) => f.nnf_rec(!negate),
            (CardFormula::And(fs), false) => CardFormula::and(fs.iter().map(|f| f.nnf_rec(false))),
            (CardFormula::And(fs), true) => CardFormula::or(fs.iter().map(|f| f.nnf_rec(true))),
            (CardFormula::Or(fs), false) => CardFormula::or(fs.iter().map(|f| f.nnf_rec(false))),
            (CardFormula::Or(fs), true) => CardFormula::and(fs.iter().map(|f| f.nnf_rec(true))),
        }
    }
}

impl CardAtom {
    /// `not |t| >= n` is `|t| <= n-1`; `not |t| <= n` is `|t| >= n+1`.
    fn complement(&self) -> CardFormula {
        match (self.op, self.bound) {
            (CardOp::Ge, Bound::Finite(n)) => {
                if n == 0 {
                    CardFormula::False
                } else {
                    CardFormula::le(self.ty.clone(), self.term.clone(), Bound::Finite(n - 1))
                }
            }
            (CardOp::Ge, Bound::Infinite) => CardFormula::True,
            (CardOp::Le, Bound::Finite(n)) => {
                CardFormula::ge(self.ty.clone(), self.term.clone(), Bound::Finite(n + 1))
            }
            (CardOp::Le, Bound::Infinite) => CardFormula::False,
        }
    }
}

impl fmt::Display for CardFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(node: &CardFormula, f: &mut fmt::Formatter<'_>, parent: u8) -> fmt::Result {
            let prec = match node {
                CardFormula::And(_) => 2,
                CardFormula::Or(_) => 1,
                _ => 3,
            };
            let paren = prec < parent;
            if paren {
                f.write_str("(")?;
            }
            match node {
                CardFormula::True => f.write_str("true")?,
                CardFormula::False => f.write_str("false")?,
                CardFormula::Card(a) => write!(f, "{a}")?,
                CardFormula::Pred(p, i) => write!(f, "{p}({i})")?,
                CardFormula::Eq(i, j) => write!(f, "{i} = {j}")?,
                CardFormula::Neq(i, j) => write!(f, "{i} != {j}")?,
                CardFormula::Not(inner) => {
                    f.write_str("!")?;
                    go(inner, f, 3)?;
                }
                CardFormula::And(fs) => {
                    for (i, sub) in fs.iter().enumerate() {
                        if i > 0 {
                            f.write_str(" & ")?;
                        }
                        go(sub, f, 2)?;
                    }
                }
                CardFormula::Or(fs) => {
                    for (i, sub) in fs.iter().enumerate() {
                        if i > 0 {
                            f.write_str(" | ")?;
                        }
                        go(sub, f, 1)?;
                    }
                }
            }
            if paren {
                f.write_str(")")?;
            }
            Ok(())
        }
        go(self, f, 0)
    }
}

/// Canonical conjunction of cardinality, predicate and equality literals.
/// Bounds on syntactically equal terms merge into one interval, which keeps
/// the disjunct sets small across repeated eliminations.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct CardMinterm {
    bounds: BTreeMap<(String, BoolTerm), (u32, Bound)>,
    preds: BTreeMap<(PredSymbol, IndexVar), bool>,
    eqs: BTreeMap<(IndexVar, IndexVar), bool>,
}

impl CardMinterm {
    fn insert_bound(&mut self, ty: String, term: BoolTerm, op: CardOp, bound: Bound) -> Option<()> {
        let entry = self
            .bounds
            .entry((ty, term))
            .or_insert((0, Bound::Infinite));
        match (op, bound) {
            (CardOp::Ge, Bound::Finite(n)) => entry.0 = entry.0.max(n),
            (CardOp::Ge, Bound::Infinite) => return None,
            (CardOp::Le, b) => entry.1 = entry.1.min(b),
        }
        match entry.1 {
            Bound::Finite(hi) if entry.0 > hi => None,
            _ => Some(()),
        }
    }

    fn insert_pred(&mut self, p: PredSymbol, i: IndexVar, polarity: bool) -> Option<()> {
        match self.preds.get(&(p.clone(), i.clone())) {
            Some(&q) if q != polarity => None,
            _ => {
                self.preds.insert((p, i), polarity);
                Some(())
            }
        }
    }

    fn insert_eq(&mut self, a: IndexVar, b: IndexVar, equal: bool) -> Option<()> {
        if a == b {
            return if equal { Some(()) } else { None };
        }
        let key = if a <= b { (a, b) } else { (b, a) };
        match self.eqs.get(&key) {
            Some(&q) if q != equal => None,
            _ => {
                self.eqs.insert(key, equal);
                Some(())
            }
        }
    }

    fn join(&self, other: &CardMinterm) -> Option<CardMinterm> {
        let mut out = self.clone();
        for ((ty, term), &(lo, hi)) in &other.bounds {
            if lo > 0 {
                out.insert_bound(ty.clone(), term.clone(), CardOp::Ge, Bound::Finite(lo))?;
            }
            out.insert_bound(ty.clone(), term.clone(), CardOp::Le, hi)?;
        }
        for ((p, i), &pol) in &other.preds {
            out.insert_pred(p.clone(), i.clone(), pol)?;
        }
        for ((a, b), &eq) in &other.eqs {
            out.insert_eq(a.clone(), b.clone(), eq)?;
        }
        Some(out)
    }

    /// `self` entails `other` literal-wise: every constraint of `other` is
    /// present here in equal or stronger form.
    fn entails(&self, other: &CardMinterm) -> bool {
        other.bounds.iter().all(|(key, &(lo, hi))| {
            self.bounds.get(key).is_some_and(|&(slo, shi)| {
                slo >= lo
                    && match (shi, hi) {
                        (_, Bound::Infinite) => true,
                        (Bound::Finite(a), Bound::Finite(b)) => a <= b,
                        (Bound::Infinite, Bound::Finite(_)) => false,
                    }
            })
        }) && other
            .preds
            .iter()
            .all(|(key, pol)| self.preds.get(key) == Some(pol))
            && other
                .eqs
                .iter()
                .all(|(key, eq)| self.eqs.get(key) == Some(eq))
    }

    pub fn to_formula(&self) -> CardFormula {
        let mut parts = Vec::new();
        for ((ty, term), &(lo, hi)) in &self.bounds {
            if lo > 0 {
                parts.push(CardFormula::ge(ty.clone(), term.clone(), Bound::Finite(lo)));
            }
            if hi != Bound::Infinite {
                parts.push(CardFormula::le(ty.clone(), term.clone(), hi));
            }
        }
        for ((p, i), &pol) in &self.preds {
            let atom = CardFormula::Pred(p.clone(), i.clone());
            parts.push(if pol { atom } else { CardFormula::not(atom) });
        }
        for ((a, b), &eq) in &self.eqs {
            parts.push(if eq {
                CardFormula::Eq(a.clone(), b.clone())
            } else {
                CardFormula::Neq(a.clone(), b.clone())
            });
        }
        CardFormula::and(parts)
    }

    /// Cardinality atoms as `(type, term, op, bound)` tuples.
    pub fn atoms(&self) -> Vec<(String, BoolTerm, CardOp, Bound)> {
        let mut out = Vec::new();
        for ((ty, term), &(lo, hi)) in &self.bounds {
            if lo > 0 {
                out.push((ty.clone(), term.clone(), CardOp::Ge, Bound::Finite(lo)));
            }
            if hi != Bound::Infinite {
                out.push((ty.clone(), term.clone(), CardOp::Le, hi));
            }
        }
        out
    }

    pub fn has_residuals(&self) -> bool {
        !self.preds.is_empty() || !self.eqs.is_empty()
    }
}

/// DNF of a quantifier-free cardinality formula: contradictory minterms are
/// pruned, duplicates merged and entailed disjuncts absorbed.
pub fn card_dnf(f: &CardFormula, limits: &Limits) -> Result<Vec<CardMinterm>, CardError> {
    let nnf = f.nnf();
    let mut minterms = card_dnf_rec(&nnf, limits)?;
    absorb(&mut minterms);
    Ok(minterms)
}

/// Drop disjuncts entailing another disjunct of the list.
fn absorb(minterms: &mut Vec<CardMinterm>) {
    let mut keep: Vec<CardMinterm> = Vec::new();
    for m in minterms.drain(..) {
        if keep.iter().any(|k| m.entails(k)) {
            continue;
        }
        keep.retain(|k| !k.entails(&m));
        keep.push(m);
    }
    *minterms = std::mem::take(&mut keep);
}

fn card_dnf_rec(f: &CardFormula, limits: &Limits) -> Result<Vec<CardMinterm>, CardError> {
    let cap = limits.dnf_minterms;
    let out = match f {
        CardFormula::True => vec![CardMinterm::default()],
        CardFormula::False => Vec::new(),
        CardFormula::Card(a) => {
            let mut m = CardMinterm::default();
            match m.insert_bound(a.ty.clone(), a.term.clone(), a.op, a.bound) {
                Some(()) => vec![m],
                None => Vec::new(),
            }
        }
        CardFormula::Pred(p, i) => {
            let mut m = CardMinterm::default();
            m.insert_pred(p.clone(), i.clone(), true);
            vec![m]
        }
        CardFormula::Not(inner) => match &**inner {
            CardFormula::Pred(p, i) => {
                let mut m = CardMinterm::default();
                m.insert_pred(p.clone(), i.clone(), false);
                vec![m]
            }
            _ => unreachable!("negation above non-predicate after NNF"),
        },
        CardFormula::Eq(a, b) => {
            let mut m = CardMinterm::default();
            match m.insert_eq(a.clone(), b.clone(), true) {
                Some(()) => vec![m],
                None => Vec::new(),
            }
        }
        CardFormula::Neq(a, b) => {
            let mut m = CardMinterm::default();
            match m.insert_eq(a.clone(), b.clone(), false) {
                Some(()) => vec![m],
                None => Vec::new(),
            }
        }
        CardFormula::Or(fs) => {
            let mut acc: Vec<CardMinterm> = Vec::new();
            for sub in fs {
                for m in card_dnf_rec(sub, limits)? {
                    if !acc.contains(&m) {
                        acc.push(m);
                    }
                }
                if acc.len() > cap {
                    return Err(CardError::DnfCap { cap });
                }
            }
            absorb(&mut acc);
            acc
        }
        CardFormula::And(fs) => {
            let mut acc = vec![CardMinterm::default()];
            for sub in fs {
                let next = card_dnf_rec(sub, limits)?;
                if acc.len().saturating_mul(next.len()) > cap {
                    return Err(CardError::DnfCap { cap });
                }
                let mut joined = Vec::new();
                for a in &acc {
                    for b in &next {
                        if let Some(m) = a.join(b) {
                            if !joined.contains(&m) {
                                joined.push(m);
                            }
                        }
                    }
                }
                absorb(&mut joined);
                acc = joined;
            }
            acc
        }
    };
    Ok(out)
}

/// Evaluate a cardinality formula on a finite structure. Residual predicate
/// and equality atoms use the structure's valuation.
pub fn eval_card(f: &CardFormula, st: &Structure) -> Result<bool, MilError> {
    match f {
        CardFormula::True => Ok(true),
        CardFormula::False => Ok(false),
        CardFormula::Card(a) => {
            let n = a.term.elements(st, &a.ty)?.len() as u32;
            Ok(match (a.op, a.bound) {
                (CardOp::Ge, Bound::Finite(b)) => n >= b,
                (CardOp::Ge, Bound::Infinite) => false,
                (CardOp::Le, Bound::Finite(b)) => n <= b,
                (CardOp::Le, Bound::Infinite) => true,
            })
        }
        CardFormula::Pred(p, i) => eval_mil(&MilFormula::pred(p.clone(), i.clone()), st),
        CardFormula::Eq(i, j) => eval_mil(&MilFormula::eq(i.clone(), j.clone()), st),
        CardFormula::Neq(i, j) => eval_mil(&MilFormula::neq(i.clone(), j.clone()), st),
        CardFormula::Not(inner) => Ok(!eval_card(inner, st)?),
        CardFormula::And(fs) => {
            for sub in fs {
                if !eval_card(sub, st)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        CardFormula::Or(fs) => {
            for sub in fs {
                if eval_card(sub, st)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
    }
}

/// Eliminate one existential quantifier from a quantifier-free body.
///
/// Each DNF disjunct splits into a part free of `var` and a conjunction of
/// literals over `var`. A positive equality substitutes `var` away;
/// otherwise the disequalities and predicate literals of `var` rewrite into
/// guarded lower-bound atoms over the literals' boolean term.
pub fn qelim_exists(
    body: &CardFormula,
    var: &IndexVar,
    limits: &Limits,
) -> Result<CardFormula, CardError> {
    let minterms = card_dnf(body, limits)?;
    let mut disjuncts = Vec::new();
    for m in &minterms {
        disjuncts.push(eliminate_from_minterm(m, var));
    }
    Ok(CardFormula::or(disjuncts))
}

fn eliminate_from_minterm(m: &CardMinterm, var: &IndexVar) -> CardFormula {
    // Split the minterm into the literals over `var` and the rest.
    let mut rest = CardMinterm::default();
    let mut var_preds: Vec<(PredSymbol, bool)> = Vec::new();
    let mut var_eqs: Vec<(IndexVar, bool)> = Vec::new();
    rest.bounds = m.bounds.clone();
    for ((p, i), &pol) in &m.preds {
        if i == var {
            var_preds.push((p.clone(), pol));
        } else {
            rest.preds.insert((p.clone(), i.clone()), pol);
        }
    }
    for ((a, b), &eq) in &m.eqs {
        if a == var {
            var_eqs.push((b.clone(), eq));
        } else if b == var {
            var_eqs.push((a.clone(), eq));
        } else {
            rest.eqs.insert((a.clone(), b.clone()), eq);
        }
    }

    // Case 1: `var = j` among the literals; substitute `j` for `var`.
    if let Some((j, _)) = var_eqs.iter().find(|(_, eq)| *eq) {
        let mut sub = rest.clone();
        for (p, pol) in &var_preds {
            if sub.insert_pred(p.clone(), j.clone(), *pol).is_none() {
                return CardFormula::False;
            }
        }
        for (k, eq) in &var_eqs {
            if k == j && *eq {
                continue;
            }
            if sub.insert_eq(j.clone(), k.clone(), *eq).is_none() {
                return CardFormula::False;
            }
        }
        return sub.to_formula();
    }

    // Case 2: only disequalities remain. The predicate literals of `var`
    // form one boolean term t; for every subset J of the distinct-from
    // variables, J pairwise-distinct witnesses of t force |t| >= |J|+1.
    let term = BoolTerm::and(var_preds.iter().map(|(p, pol)| {
        if *pol {
            BoolTerm::pred(p.clone())
        } else {
            BoolTerm::not(BoolTerm::pred(p.clone()))
        }
    }));
    let others: Vec<IndexVar> = {
        let mut seen = BTreeSet::new();
        var_eqs
            .iter()
            .filter(|(k, _)| seen.insert(k.clone()))
            .map(|(k, _)| k.clone())
            .collect()
    };
    let mut conjuncts = vec![rest.to_formula()];
    for subset_mask in 0..(1usize << others.len()) {
        let chosen: Vec<&IndexVar> = others
            .iter()
            .enumerate()
            .filter(|(b, _)| subset_mask & (1 << b) != 0)
            .map(|(_, v)| v)
            .collect();
        let mut antecedent = Vec::new();
        for a in 0..chosen.len() {
            for b in a + 1..chosen.len() {
                antecedent.push(CardFormula::Neq(chosen[a].clone(), chosen[b].clone()));
            }
        }
        for v in &chosen {
            antecedent.push(term_applied_card(&term, v));
        }
        let lower = CardFormula::ge(
            var.component_type().to_string(),
            term.clone(),
            Bound::Finite(chosen.len() as u32 + 1),
        );
        conjuncts.push(CardFormula::implies(CardFormula::and(antecedent), lower));
    }
    CardFormula::and(conjuncts)
}

/// The formula `t(i)` in the cardinality language.
fn term_applied_card(t: &BoolTerm, i: &IndexVar) -> CardFormula {
    match t {
        BoolTerm::True => CardFormula::True,
        BoolTerm::False => CardFormula::False,
        BoolTerm::Pred(p) => CardFormula::Pred(p.clone(), i.clone()),
        BoolTerm::Not(inner) => CardFormula::not(term_applied_card(inner, i)),
        BoolTerm::And(ts) => CardFormula::and(ts.iter().map(|x| term_applied_card(x, i))),
        BoolTerm::Or(ts) => CardFormula::or(ts.iter().map(|x| term_applied_card(x, i))),
    }
}

/// Quantifier elimination: a closed boolean combination of cardinality
/// atoms equivalent to the sentence over all structures.
///
/// Closed conjuncts and disjuncts are eliminated independently, which keeps
/// the prenex prefixes short. Universal quantifiers go through the duality
/// with negation, innermost quantifiers are eliminated first.
pub fn qelim(phi: &MilFormula, limits: &Limits) -> Result<CardFormula, CardError> {
    if !phi.is_sentence() {
        return Err(CardError::Mil(MilError::NotSentence));
    }
    match phi {
        MilFormula::And(fs) => {
            return Ok(CardFormula::and(
                fs.iter()
                    .map(|f| qelim(f, limits))
                    .collect::<Result<Vec<_>, _>>()?,
            ))
        }
        MilFormula::Or(fs) => {
            return Ok(CardFormula::or(
                fs.iter()
                    .map(|f| qelim(f, limits))
                    .collect::<Result<Vec<_>, _>>()?,
            ))
        }
        MilFormula::Not(f) => return Ok(CardFormula::not(qelim(f, limits)?)),
        _ => {}
    }
    let (prefix, matrix) = prenex_parts(phi)?;
    let mut current = mil_matrix_to_card(&matrix);
    for (quant, v) in prefix.into_iter().rev() {
        current = match quant {
            Quantifier::Exists => qelim_exists(&current, &v, limits)?,
            Quantifier::Forall => {
                let negated = CardFormula::not(current).nnf();
                CardFormula::not(qelim_exists(&negated, &v, limits)?).nnf()
            }
        };
    }
    debug_assert!(current.is_closed(), "open formula after elimination");
    Ok(current)
}

fn mil_matrix_to_card(phi: &MilFormula) -> CardFormula {
    match phi {
        MilFormula::True => CardFormula::True,
        MilFormula::False => CardFormula::False,
        MilFormula::Eq(i, j) => CardFormula::Eq(i.clone(), j.clone()),
        MilFormula::Neq(i, j) => CardFormula::Neq(i.clone(), j.clone()),
        MilFormula::Pred(p, i) => CardFormula::Pred(p.clone(), i.clone()),
        MilFormula::Not(f) => CardFormula::not(mil_matrix_to_card(f)),
        MilFormula::And(fs) => CardFormula::and(fs.iter().map(mil_matrix_to_card)),
        MilFormula::Or(fs) => CardFormula::or(fs.iter().map(mil_matrix_to_card)),
        MilFormula::Exists(..) | MilFormula::Forall(..) => {
            unreachable!("quantifier inside a prenex matrix")
        }
    }
}

/// The defining expansion of a cardinality atom back into monadic logic.
pub fn card_to_mil(atom: &CardAtom) -> MilFormula {
    let fresh = |k: usize| IndexVar::new(format!("k{k}"), atom.ty.clone());
    match (atom.op, atom.bound) {
        (CardOp::Ge, Bound::Infinite) => MilFormula::False,
        (CardOp::Le, Bound::Infinite) => MilFormula::True,
        (CardOp::Ge, Bound::Finite(0)) => MilFormula::True,
        (CardOp::Ge, Bound::Finite(n)) => {
            let vars: Vec<IndexVar> = (1..=n as usize).map(fresh).collect();
            let mut body = vec![MilFormula::distinct(&vars)];
            body.extend(vars.iter().map(|v| atom.term.applied_to(v)));
            let mut out = MilFormula::and(body);
            for v in vars.into_iter().rev() {
                out = MilFormula::exists(v, out);
            }
            out
        }
        (CardOp::Le, Bound::Finite(n)) => {
            // forall v1..v_{n+1}. distinct -> some !t(v_j), with the
            // negated guard written as equality atoms so the output stays
            // free of negation nodes.
            let vars: Vec<IndexVar> = (1..=n as usize + 1).map(fresh).collect();
            let negated = atom.term.negate_nnf();
            let mut cases = Vec::new();
            for a in 0..vars.len() {
                for b in a + 1..vars.len() {
                    cases.push(MilFormula::eq(vars[a].clone(), vars[b].clone()));
                }
            }
            cases.extend(vars.iter().map(|v| negated.applied_to(v)));
            let mut out = MilFormula::or(cases);
            for v in vars.into_iter().rev() {
                out = MilFormula::forall(v, out);
            }
            out
        }
    }
}

/// A closed cardinality formula translated wholesale into monadic logic.
pub fn card_formula_to_mil(f: &CardFormula) -> Result<MilFormula, CardError> {
    Ok(match f {
        CardFormula::True => MilFormula::True,
        CardFormula::False => MilFormula::False,
        CardFormula::Card(a) => card_to_mil(a),
        CardFormula::Pred(p, _) => return Err(CardError::NotClosed(p.name().to_string())),
        CardFormula::Eq(i, _) | CardFormula::Neq(i, _) => {
            return Err(CardError::NotClosed(i.name().to_string()))
        }
        CardFormula::Not(inner) => MilFormula::not(card_formula_to_mil(inner)?),
        CardFormula::And(fs) => MilFormula::and(
            fs.iter()
                .map(card_formula_to_mil)
                .collect::<Result<Vec<_>, _>>()?,
        ),
        CardFormula::Or(fs) => MilFormula::or(
            fs.iter()
                .map(card_formula_to_mil)
                .collect::<Result<Vec<_>, _>>()?,
        ),
    })
}

/// Partition the atoms of a conjunction into connected components of the
/// shared-predicate graph. Atoms whose terms have no predicates (pure
/// universe-size constraints) group per component type.
pub fn split_vocab(
    atoms: &[(String, BoolTerm, CardOp, Bound)],
) -> Vec<Vec<(String, BoolTerm, CardOp, Bound)>> {
    let n = atoms.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        if parent[x] != x {
            let root = find(parent, parent[x]);
            parent[x] = root;
        }
        parent[x]
    }
    let pred_sets: Vec<BTreeSet<PredSymbol>> = atoms.iter().map(|a| a.1.preds()).collect();
    for i in 0..n {
        for j in i + 1..n {
            let share = if pred_sets[i].is_empty() && pred_sets[j].is_empty() {
                // Constant terms of the same type bound the same universe.
                atoms[i].0 == atoms[j].0
            } else {
                !pred_sets[i].is_disjoint(&pred_sets[j])
            };
            if share {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<(String, BoolTerm, CardOp, Bound)>> = BTreeMap::new();
    for (i, atom) in atoms.iter().enumerate() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(atom.clone());
    }
    groups.into_values().collect()
}

/// Per-vector bounds: for every subset `S` of the part vocabulary, a lower
/// and an upper bound on the cardinality of the complete minterm `t_S`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundVector {
    pub vocab: Vec<PredSymbol>,
    pub ty: String,
    /// Indexed by the subset bitmask over `vocab`.
    pub bounds: Vec<(u32, Bound)>,
}

impl BoundVector {
    /// The complete minterm `t_S` for a subset mask.
    pub fn complete_minterm(&self, mask: usize) -> BoolTerm {
        BoolTerm::and(self.vocab.iter().enumerate().map(|(b, p)| {
            if mask & (1 << b) != 0 {
                BoolTerm::pred(p.clone())
            } else {
                BoolTerm::not(BoolTerm::pred(p.clone()))
            }
        }))
    }

    fn positive_part(&self, mask: usize) -> BoolTerm {
        BoolTerm::and(
            self.vocab
                .iter()
                .enumerate()
                .filter(|(b, _)| mask & (1 << b) != 0)
                .map(|(_, p)| BoolTerm::pred(p.clone())),
        )
    }

    fn negative_part(&self, mask: usize) -> BoolTerm {
        BoolTerm::and(
            self.vocab
                .iter()
                .enumerate()
                .filter(|(b, _)| mask & (1 << b) == 0)
                .map(|(_, p)| BoolTerm::not(BoolTerm::pred(p.clone()))),
        )
    }
}

/// Rewrite a conjunction of cardinality atoms over one vocabulary part into
/// a disjunction of bound vectors over the complete minterms of the part.
///
/// A lower bound `|t| >= l` splits into the weak compositions of `l` over
/// the minterms implying `t`, an upper bound symmetrically; vectors whose
/// intervals become empty are pruned eagerly.
pub fn complete_decompose(
    part: &[(String, BoolTerm, CardOp, Bound)],
    limits: &Limits,
) -> Result<Vec<BoundVector>, CardError> {
    assert!(!part.is_empty(), "empty vocabulary part");
    let ty = part[0].0.clone();
    let mut vocab: BTreeSet<PredSymbol> = BTreeSet::new();
    for (_, term, _, _) in part {
        vocab.extend(term.preds());
    }
    let vocab: Vec<PredSymbol> = vocab.into_iter().collect();
    if vocab.len() > limits.decompose_vocab {
        return Err(CardError::VocabCap {
            size: vocab.len(),
            cap: limits.decompose_vocab,
        });
    }
    let subsets = 1usize << vocab.len();
    let mut vectors = vec![BoundVector {
        vocab: vocab.clone(),
        ty: ty.clone(),
        bounds: vec![(0, Bound::Infinite); subsets],
    }];
    for (_, term, op, bound) in part {
        let classes: Vec<usize> = (0..subsets)
            .filter(|&s| term.accepts_mask(&vocab, s))
            .collect();
        let amount = match bound {
            Bound::Finite(n) => *n,
            Bound::Infinite => match op {
                // |t| >= inf is falsity, |t| <= inf is truth.
                CardOp::Ge => {
                    vectors.clear();
                    continue;
                }
                CardOp::Le => continue,
            },
        };
        let comps = weak_compositions(amount, classes.len(), limits)?;
        if comps.is_empty() {
            // A positive amount over an empty class set: unsatisfiable.
            vectors.clear();
        }
        let mut next = Vec::new();
        for v in &vectors {
            for comp in &comps {
                let mut nv = v.clone();
                let mut ok = true;
                for (ci, &s) in classes.iter().enumerate() {
                    let (lo, hi) = nv.bounds[s];
                    match op {
                        CardOp::Ge => nv.bounds[s].0 = lo.max(comp[ci]),
                        CardOp::Le => nv.bounds[s].1 = hi.min(Bound::Finite(comp[ci])),
                    }
                    let (lo, hi) = nv.bounds[s];
                    if let Bound::Finite(h) = hi {
                        if lo > h {
                            ok = false;
                            break;
                        }
                    }
                }
                if ok && !next.contains(&nv) {
                    next.push(nv);
                }
            }
            if next.len() > limits.compositions {
                return Err(CardError::CompositionCap {
                    cap: limits.compositions,
                });
            }
        }
        vectors = next;
    }
    Ok(vectors)
}

/// All ways to write `total` as an ordered sum of `parts` naturals.
fn weak_compositions(
    total: u32,
    parts: usize,
    limits: &Limits,
) -> Result<Vec<Vec<u32>>, CardError> {
    if parts == 0 {
        return Ok(if total == 0 {
            vec![Vec::new()]
        } else {
            Vec::new()
        });
    }
    fn rec(
        idx: usize,
        remaining: u32,
        current: &mut Vec<u32>,
        out: &mut Vec<Vec<u32>>,
        cap: usize,
    ) -> bool {
        if idx == current.len() - 1 {
            current[idx] = remaining;
            out.push(current.clone());
            return out.len() <= cap;
        }
        for take in 0..=remaining {
            current[idx] = take;
            if !rec(idx + 1, remaining - take, current, out, cap) {
                return false;
            }
        }
        true
    }
    let mut out = Vec::new();
    let mut current = vec![0u32; parts];
    if !rec(0, total, &mut current, &mut out, limits.compositions) {
        return Err(CardError::CompositionCap {
            cap: limits.compositions,
        });
    }
    Ok(out)
}

/// The positivation of one bound vector: a conjunction of positive
/// cardinality atoms with the same minimal models.
///
/// Every upward-closed family of subsets contributes a lower bound on the
/// disjunction of the positive parts of its minimal minterms, and its
/// downward-closed complement an upper bound on the disjunction of the
/// negative parts of its maximal minterms. Zero lower bounds and infinite
/// upper bounds are dropped as vacuous.
pub fn ppos(vector: &BoundVector, limits: &Limits) -> Result<Vec<CardAtom>, CardError> {
    let k = vector.vocab.len();
    if k > limits.ppos_vocab {
        return Err(CardError::VocabCap {
            size: k,
            cap: limits.ppos_vocab,
        });
    }
    let subsets = 1usize << k;
    let mut atoms = Vec::new();
    for family in 0u32..(1u32 << subsets) {
        if !upward_closed(family, subsets, k) {
            continue;
        }
        // Lower bound from the upward-closed family itself.
        let mut lower = 0u32;
        let mut minimal = Vec::new();
        for s in 0..subsets {
            if family & (1 << s) != 0 {
                lower += vector.bounds[s].0;
                let has_smaller =
                    (0..subsets).any(|t| t != s && (t & s) == t && family & (1 << t) != 0);
                if !has_smaller {
                    minimal.push(s);
                }
            }
        }
        if lower > 0 {
            let tau = BoolTerm::or(minimal.iter().map(|&s| vector.positive_part(s)));
            atoms.push(CardAtom {
                ty: vector.ty.clone(),
                term: tau,
                op: CardOp::Ge,
                bound: Bound::Finite(lower),
            });
        }
        // Upper bound from the downward-closed complement.
        let mut upper = Bound::Finite(0);
        let mut maximal = Vec::new();
        let mut complement_empty = true;
        for s in 0..subsets {
            if family & (1 << s) == 0 {
                complement_empty = false;
                upper = upper.add(vector.bounds[s].1);
                let has_bigger =
                    (0..subsets).any(|t| t != s && (t & s) == s && family & (1 << t) == 0);
                if !has_bigger {
                    maximal.push(s);
                }
            }
        }
        if !complement_empty {
            if let Bound::Finite(u) = upper {
                let tau = BoolTerm::or(maximal.iter().map(|&s| vector.negative_part(s)));
                atoms.push(CardAtom {
                    ty: vector.ty.clone(),
                    term: tau,
                    op: CardOp::Le,
                    bound: Bound::Finite(u),
                });
            }
        }
    }
    atoms.sort();
    atoms.dedup();
    Ok(atoms)
}

fn upward_closed(family: u32, subsets: usize, preds: usize) -> bool {
    for s in 0..subsets {
        if family & (1 << s) != 0 {
            for b in 0..preds {
                let bigger = s | (1 << b);
                if bigger != s && family & (1 << bigger) == 0 {
                    return false;
                }
            }
        }
    }
    true
}

/// The positivation operator on closed formulae: DNF, per-disjunct
/// vocabulary split, complete decomposition and per-vector positivation,
/// recombined and rendered as a positive sentence of monadic logic.
pub fn ppos_formula(phi: &CardFormula, limits: &Limits) -> Result<MilFormula, CardError> {
    let card = ppos_card(phi, limits)?;
    let mil = card_formula_to_mil(&card)?;
    debug_assert!(mil.is_positive());
    Ok(mil)
}

/// Positivation kept in the cardinality language.
pub fn ppos_card(phi: &CardFormula, limits: &Limits) -> Result<CardFormula, CardError> {
    if let Some(name) = phi.first_open() {
        return Err(CardError::NotClosed(name));
    }
    let minterms = card_dnf(phi, limits)?;
    let mut disjuncts = Vec::new();
    for m in &minterms {
        let atoms = m.atoms();
        if atoms.is_empty() {
            disjuncts.push(CardFormula::True);
            continue;
        }
        let mut parts_out = Vec::new();
        for part in split_vocab(&atoms) {
            let vectors = complete_decompose(&part, limits)?;
            let mut vector_formulas = Vec::new();
            for v in &vectors {
                let atoms = ppos(v, limits)?;
                vector_formulas.push(CardFormula::and(
                    atoms.into_iter().map(CardFormula::Card).collect::<Vec<_>>(),
                ));
            }
            parts_out.push(CardFormula::or(vector_formulas));
        }
        disjuncts.push(CardFormula::and(parts_out));
    }
    Ok(CardFormula::or(disjuncts))
}

/// Outcome of the count-vector satisfiability procedure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CardSat {
    Unsat,
    Sat(CountModel),
}

impl CardSat {
    pub fn is_sat(&self) -> bool {
        matches!(self, CardSat::Sat(_))
    }
}

/// Vocabulary of one component type plus the nonzero counts per subset
/// mask over it.
pub type TypeCounts = (Vec<PredSymbol>, Vec<(usize, u32)>);

/// A satisfying assignment of nonnegative counts to the complete minterms
/// of each component type's vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CountModel {
    /// Per type: vocabulary and the nonzero counts per subset mask.
    pub types: BTreeMap<String, TypeCounts>,
}

impl CountModel {
    /// Materialize a concrete structure: each counted minterm contributes
    /// that many fresh elements to its type's universe.
    pub fn to_structure(&self) -> Structure {
        let mut sizes = BTreeMap::new();
        let mut interp: BTreeMap<PredSymbol, BTreeSet<usize>> = BTreeMap::new();
        for (ty, (vocab, counts)) in &self.types {
            let mut next = 0usize;
            for p in vocab {
                interp.entry(p.clone()).or_default();
            }
            for &(mask, count) in counts {
                for _ in 0..count {
                    next += 1;
                    for (b, p) in vocab.iter().enumerate() {
                        if mask & (1 << b) != 0 {
                            interp.entry(p.clone()).or_default().insert(next);
                        }
                    }
                }
            }
            sizes.insert(ty.clone(), next.max(1));
        }
        let mut st = Structure::new(sizes);
        st.interp = interp;
        st
    }
}

impl fmt::Display for CountModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (ty, (vocab, counts)) in &self.types {
            write!(f, "{ty}:")?;
            if counts.is_empty() {
                write!(f, " (empty)")?;
            }
            for &(mask, count) in counts {
                let label: Vec<String> = vocab
                    .iter()
                    .enumerate()
                    .map(|(b, p)| {
                        if mask & (1 << b) != 0 {
                            p.name().to_string()
                        } else {
                            format!("!{}", p.name())
                        }
                    })
                    .collect();
                let label = if label.is_empty() {
                    "any".to_string()
                } else {
                    label.join("&")
                };
                write!(f, " {count}x[{label}]")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Decide satisfiability of a closed cardinality formula.
///
/// Per DNF disjunct and component type, one nonnegative integer count is
/// introduced for every complete minterm of the type's vocabulary; each
/// atom becomes a bound on a subset sum and feasibility is decided by a
/// bounded depth-first search. `nonempty` adds the at-least-one-instance
/// constraint per mentioned type, matching universes with one element or
/// more.
pub fn card_sat(phi: &CardFormula, limits: &Limits, nonempty: bool) -> Result<CardSat, CardError> {
    if let Some(name) = phi.first_open() {
        return Err(CardError::NotClosed(name));
    }
    let minterms = card_dnf(phi, limits)?;
    let solutions = exec::map_vec(minterms, |m| solve_minterm(&m, limits, nonempty));
    for sol in solutions {
        match sol? {
            Some(model) => return Ok(CardSat::Sat(model)),
            None => continue,
        }
    }
    Ok(CardSat::Unsat)
}

fn solve_minterm(
    m: &CardMinterm,
    limits: &Limits,
    nonempty: bool,
) -> Result<Option<CountModel>, CardError> {
    let mut by_type: BTreeMap<String, Vec<(BoolTerm, CardOp, Bound)>> = BTreeMap::new();
    for (ty, term, op, bound) in m.atoms() {
        by_type.entry(ty).or_default().push((term, op, bound));
    }
    let mut model = CountModel::default();
    for (ty, atoms) in &by_type {
        let mut vocab: BTreeSet<PredSymbol> = BTreeSet::new();
        for (term, _, _) in atoms {
            vocab.extend(term.preds());
        }
        let vocab: Vec<PredSymbol> = vocab.into_iter().collect();
        if vocab.len() > limits.decompose_vocab {
            return Err(CardError::VocabCap {
                size: vocab.len(),
                cap: limits.decompose_vocab,
            });
        }
        let subsets = 1usize << vocab.len();
        let mut constraints: Vec<(Vec<usize>, CardOp, u32)> = Vec::new();
        let mut infeasible = false;
        for (term, op, bound) in atoms {
            let members: Vec<usize> = (0..subsets)
                .filter(|&s| term.accepts_mask(&vocab, s))
                .collect();
            match (op, bound) {
                (CardOp::Ge, Bound::Finite(n)) => constraints.push((members, CardOp::Ge, *n)),
                (CardOp::Le, Bound::Finite(n)) => constraints.push((members, CardOp::Le, *n)),
                (CardOp::Ge, Bound::Infinite) => infeasible = true,
                (CardOp::Le, Bound::Infinite) => {}
            }
        }
        if infeasible {
            return Ok(None);
        }
        if nonempty {
            constraints.push(((0..subsets).collect(), CardOp::Ge, 1));
        }
        match solve_counts(subsets, &constraints) {
            Some(counts) => {
                let nonzero: Vec<(usize, u32)> = counts
                    .into_iter()
                    .enumerate()
                    .filter(|&(_, c)| c > 0)
                    .collect();
                model.types.insert(ty.clone(), (vocab, nonzero));
            }
            None => return Ok(None),
        }
    }
    Ok(Some(model))
}

/// Bounded search for nonnegative counts satisfying subset-sum constraints.
/// Any solution can be capped coordinate-wise at the largest lower bound,
/// so the domain `0..=B` is complete for the verdict.
fn solve_counts(vars: usize, constraints: &[(Vec<usize>, CardOp, u32)]) -> Option<Vec<u32>> {
    let cap = constraints
        .iter()
        .filter(|(_, op, _)| *op == CardOp::Ge)
        .map(|&(_, _, b)| b)
        .max()
        .unwrap_or(0)
        .max(1);
    // Assign heavily constrained variables first.
    let mut order: Vec<usize> = (0..vars).collect();
    let involvement = |v: usize| {
        constraints
            .iter()
            .filter(|(members, _, _)| members.contains(&v))
            .count()
    };
    order.sort_by_key(|&v| std::cmp::Reverse(involvement(v)));
    let position: Vec<usize> = {
        let mut pos = vec![0usize; vars];
        for (i, &v) in order.iter().enumerate() {
            pos[v] = i;
        }
        pos
    };

    struct Dfs<'a> {
        order: Vec<usize>,
        position: Vec<usize>,
        constraints: &'a [(Vec<usize>, CardOp, u32)],
        cap: u32,
    }

    impl Dfs<'_> {
        fn run(&self, idx: usize, assignment: &mut Vec<u32>) -> bool {
            for (members, op, bound) in self.constraints {
                let assigned: u32 = members
                    .iter()
                    .filter(|&&v| self.position[v] < idx)
                    .map(|&v| assignment[v])
                    .sum();
                let remaining = members.iter().filter(|&&v| self.position[v] >= idx).count() as u32;
                match op {
                    CardOp::Le if assigned > *bound => return false,
                    CardOp::Ge if assigned + remaining * self.cap < *bound => return false,
                    _ => {}
                }
            }
            if idx == self.order.len() {
                return true;
            }
            for value in 0..=self.cap {
                assignment[self.order[idx]] = value;
                if self.run(idx + 1, assignment) {
                    return true;
                }
            }
            assignment[self.order[idx]] = 0;
            false
        }
    }

    let dfs = Dfs {
        order,
        position,
        constraints,
        cap,
    };
    let mut assignment = vec![0u32; vars];
    if dfs.run(0, &mut assignment) {
        Some(assignment)
    } else {
        None
    }
}
