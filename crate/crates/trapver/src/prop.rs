//! Propositional formula algebra.
//!
//! Formulae are immutable trees over named variables. The operations here
//! back the bounded verification route: DNF conversion, positivation
//! (deleting negative literals from the DNF), dualization (swapping the
//! junctions of a positive formula) and exhaustive (minimal-)model
//! enumeration. Truth constants are explicit nodes rather than empty
//! junctions, so the empty-conjunction convention lives in the smart
//! constructors only.

use crate::{exec, Limits};
use serde::Serialize;
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// What a variable stands for in the source system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum VarKind {
    Port,
    State,
}

/// A propositional variable. Names are globally unique within one system,
/// so identity, ordering and hashing all go by name.
#[derive(Debug, Clone, Serialize)]
pub struct BoolVar {
    name: String,
    kind: VarKind,
    /// `(component type, instance index)` for variables produced by
    /// unfolding a parametric formula.
    origin: Option<(String, usize)>,
}

impl BoolVar {
    pub fn new(name: impl Into<String>, kind: VarKind) -> Self {
        BoolVar {
            name: name.into(),
            kind,
            origin: None,
        }
    }

    pub fn port(name: impl Into<String>) -> Self {
        Self::new(name, VarKind::Port)
    }

    pub fn state(name: impl Into<String>) -> Self {
        Self::new(name, VarKind::State)
    }

    /// Variable for predicate `base` applied to instance `index` of
    /// `component_type`. The rendered name is `base(index)`.
    pub fn instanced(
        base: &str,
        kind: VarKind,
        component_type: impl Into<String>,
        index: usize,
    ) -> Self {
        BoolVar {
            name: format!("{base}({index})"),
            kind,
            origin: Some((component_type.into(), index)),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> VarKind {
        self.kind
    }

    pub fn origin(&self) -> Option<(&str, usize)> {
        self.origin.as_ref().map(|(t, i)| (t.as_str(), *i))
    }
}

impl PartialEq for BoolVar {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}
impl Eq for BoolVar {}
impl PartialOrd for BoolVar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for BoolVar {
    fn cmp(&self, other: &Self) -> Ordering {
        self.name.cmp(&other.name)
    }
}
impl std::hash::Hash for BoolVar {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.name.hash(state);
    }
}
impl fmt::Display for BoolVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormulaError {
    #[error("DNF would exceed the configured cap of {cap} minterms")]
    DnfCap { cap: usize },
    #[error("enumeration over {vars} variables exceeds the cap of {cap}")]
    EnumBound { vars: usize, cap: usize },
    #[error("variable `{0}` is not bound by the valuation")]
    UnboundVar(String),
    #[error("operation requires a negation-free positive formula")]
    NotPositive,
}

/// Propositional formula. `And`/`Or` are n-ary; the smart constructors
/// collapse empty and singleton junctions.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoolFormula {
    True,
    False,
    Var(BoolVar),
    Not(Box<BoolFormula>),
    And(Vec<BoolFormula>),
    Or(Vec<BoolFormula>),
}

use BoolFormula::{And, False, Not, Or, True, Var};

impl BoolFormula {
    pub fn var(v: BoolVar) -> Self {
        Var(v)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: BoolFormula) -> Self {
        match f {
            True => False,
            False => True,
            Not(inner) => *inner,
            other => Not(Box::new(other)),
        }
    }

    pub fn and(fs: impl IntoIterator<Item = BoolFormula>) -> Self {
        let mut out = Vec::new();
        for f in fs {
            match f {
                True => {}
                False => return False,
                And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => True,
            1 => out.pop().unwrap(),
            _ => And(out),
        }
    }

    pub fn or(fs: impl IntoIterator<Item = BoolFormula>) -> Self {
        let mut out = Vec::new();
        for f in fs {
            match f {
                False => {}
                True => return True,
                Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => False,
            1 => out.pop().unwrap(),
            _ => Or(out),
        }
    }

    pub fn implies(lhs: BoolFormula, rhs: BoolFormula) -> Self {
        Self::or([Self::not(lhs), rhs])
    }

    pub fn iff(lhs: BoolFormula, rhs: BoolFormula) -> Self {
        Self::and([
            Self::implies(lhs.clone(), rhs.clone()),
            Self::implies(rhs, lhs),
        ])
    }

    /// All variables occurring in the formula.
    pub fn vars(&self) -> BTreeSet<BoolVar> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<BoolVar>) {
        match self {
            True | False => {}
            Var(v) => {
                out.insert(v.clone());
            }
            Not(f) => f.collect_vars(out),
            And(fs) | Or(fs) => fs.iter().for_each(|f| f.collect_vars(out)),
        }
    }

    /// Every variable occurs under an even number of negations.
    pub fn is_positive(&self) -> bool {
        self.polarity_ok(true)
    }

    fn polarity_ok(&self, positive: bool) -> bool {
        match self {
            True | False => true,
            Var(_) => positive,
            Not(f) => f.polarity_ok(!positive),
            And(fs) | Or(fs) => fs.iter().all(|f| f.polarity_ok(positive)),
        }
    }

    /// Disjunction of minterms with no duplicate literal per minterm.
    pub fn is_dnf(&self) -> bool {
        fn literal(f: &BoolFormula) -> bool {
            matches!(f, Var(_)) || matches!(f, Not(inner) if matches!(**inner, Var(_)))
        }
        fn minterm(f: &BoolFormula) -> bool {
            match f {
                And(fs) => fs.iter().all(literal),
                other => literal(other),
            }
        }
        match self {
            True | False => true,
            Or(fs) => fs.iter().all(minterm),
            other => minterm(other),
        }
    }

    /// Negation normal form: negations pushed down to variables.
    pub fn nnf(&self) -> BoolFormula {
        self.nnf_rec(false)
    }

    fn nnf_rec(&self, negate: bool) -> BoolFormula {
        match (self, negate) {
            (True, false) | (False, true) => True,
            (True, true) | (False, false) => False,
            (Var(v), false) => Var(v.clone()),
            (Var(v), true) => Not(Box::new(Var(v.clone()))),
            (Not(f), _) => f.nnf_rec(!negate),
            (And(fs), false) => Self::and(fs.iter().map(|f| f.nnf_rec(false))),
            (And(fs), true) => Self::or(fs.iter().map(|f| f.nnf_rec(true))),
            (Or(fs), false) => Self::or(fs.iter().map(|f| f.nnf_rec(false))),
            (Or(fs), true) => Self::and(fs.iter().map(|f| f.nnf_rec(true))),
        }
    }

    /// Truth value under `valuation`; errors on variables outside its
    /// universe.
    pub fn eval(&self, valuation: &Valuation) -> Result<bool, FormulaError> {
        match self {
            True => Ok(true),
            False => Ok(false),
            Var(v) => valuation.value(v),
            Not(f) => Ok(!f.eval(valuation)?),
            And(fs) => {
                for f in fs {
                    if !f.eval(valuation)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Or(fs) => {
                for f in fs {
                    if f.eval(valuation)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
        }
    }

    fn eval_mask(&self, index: &BTreeMap<&BoolVar, usize>, mask: u64) -> bool {
        match self {
            True => true,
            False => false,
            Var(v) => mask & (1 << index[v]) != 0,
            Not(f) => !f.eval_mask(index, mask),
            And(fs) => fs.iter().all(|f| f.eval_mask(index, mask)),
            Or(fs) => fs.iter().any(|f| f.eval_mask(index, mask)),
        }
    }
}

impl fmt::Display for BoolFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Precedence: ! > & > |
        fn go(node: &BoolFormula, f: &mut fmt::Formatter<'_>, parent: u8) -> fmt::Result {
            let prec = match node {
                True | False | Var(_) | Not(_) => 3,
                And(_) => 2,
                Or(_) => 1,
            };
            let paren = prec < parent;
            if paren {
                f.write_str("(")?;
            }
            match node {
                True => f.write_str("true")?,
                False => f.write_str("false")?,
                Var(v) => write!(f, "{v}")?,
                Not(inner) => {
                    f.write_str("!")?;
                    go(inner, f, 3)?;
                }
                And(fs) => {
                    for (i, sub) in fs.iter().enumerate() {
                        if i > 0 {
                            f.write_str(" & ")?;
                        }
                        go(sub, f, 2)?;
                    }
                }
                Or(fs) => {
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

/// A total assignment over a declared variable universe.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Valuation {
    universe: Arc<BTreeSet<BoolVar>>,
    true_vars: BTreeSet<BoolVar>,
}

impl Valuation {
    pub fn new(
        universe: impl IntoIterator<Item = BoolVar>,
        true_vars: impl IntoIterator<Item = BoolVar>,
    ) -> Self {
        let universe: BTreeSet<_> = universe.into_iter().collect();
        let true_vars = true_vars
            .into_iter()
            .filter(|v| universe.contains(v))
            .collect();
        Valuation {
            universe: Arc::new(universe),
            true_vars,
        }
    }

    pub fn value(&self, var: &BoolVar) -> Result<bool, FormulaError> {
        if !self.universe.contains(var) {
            return Err(FormulaError::UnboundVar(var.name().to_string()));
        }
        Ok(self.true_vars.contains(var))
    }

    pub fn universe(&self) -> &BTreeSet<BoolVar> {
        &self.universe
    }

    pub fn true_vars(&self) -> &BTreeSet<BoolVar> {
        &self.true_vars
    }

    /// Pointwise order: every variable true here is true in `other`.
    pub fn le(&self, other: &Valuation) -> bool {
        self.true_vars.is_subset(&other.true_vars)
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, v) in self.true_vars.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str("}")
    }
}

/// One conjunction of literals, keyed by variable with its polarity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Minterm {
    literals: BTreeMap<BoolVar, bool>,
}

impl Minterm {
    pub fn top() -> Self {
        Minterm {
            literals: BTreeMap::new(),
        }
    }

    /// Add a literal; `None` signals a complementary pair.
    fn insert(&mut self, var: BoolVar, positive: bool) -> Option<()> {
        match self.literals.get(&var) {
            Some(&p) if p != positive => None,
            _ => {
                self.literals.insert(var, positive);
                Some(())
            }
        }
    }

    fn join(&self, other: &Minterm) -> Option<Minterm> {
        let mut out = self.clone();
        for (v, &p) in &other.literals {
            out.insert(v.clone(), p)?;
        }
        Some(out)
    }

    pub fn literals(&self) -> impl Iterator<Item = (&BoolVar, bool)> {
        self.literals.iter().map(|(v, &p)| (v, p))
    }

    pub fn positive_vars(&self) -> impl Iterator<Item = &BoolVar> {
        self.literals
            .iter()
            .filter_map(|(v, &p)| if p { Some(v) } else { None })
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn to_formula(&self) -> BoolFormula {
        BoolFormula::and(self.literals.iter().map(|(v, &p)| {
            if p {
                Var(v.clone())
            } else {
                BoolFormula::not(Var(v.clone()))
            }
        }))
    }
}

/// A formula in disjunctive normal form: a set of canonical minterms.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dnf {
    minterms: BTreeSet<Minterm>,
}

impl Dnf {
    pub fn minterms(&self) -> impl Iterator<Item = &Minterm> {
        self.minterms.iter()
    }

    pub fn len(&self) -> usize {
        self.minterms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.minterms.is_empty()
    }

    pub fn to_formula(&self) -> BoolFormula {
        BoolFormula::or(self.minterms.iter().map(Minterm::to_formula))
    }

    /// Drop minterms whose literal set strictly contains another minterm's.
    /// For a positive DNF the survivors are exactly the minimal models.
    pub fn minimal_minterms(&self) -> Dnf {
        let terms: Vec<&Minterm> = self.minterms.iter().collect();
        let keep: Vec<Minterm> = terms
            .iter()
            .filter(|t| {
                !terms.iter().any(|other| {
                    *other != **t
                        && other.literals.len() < t.literals.len()
                        && other
                            .literals
                            .iter()
                            .all(|(v, p)| t.literals.get(v) == Some(p))
                })
            })
            .map(|t| (*t).clone())
            .collect();
        Dnf {
            minterms: keep.into_iter().collect(),
        }
    }
}

/// Convert to disjunctive normal form. Minterms with complementary literals
/// are pruned and duplicates are removed; no further simplification happens.
pub fn to_dnf(f: &BoolFormula, limits: &Limits) -> Result<Dnf, FormulaError> {
    let nnf = f.nnf();
    let minterms = dnf_rec(&nnf, limits)?;
    Ok(Dnf { minterms })
}

fn dnf_rec(f: &BoolFormula, limits: &Limits) -> Result<BTreeSet<Minterm>, FormulaError> {
    let cap = limits.dnf_minterms;
    match f {
        True => Ok(BTreeSet::from([Minterm::top()])),
        False => Ok(BTreeSet::new()),
        Var(v) => {
            let mut m = Minterm::top();
            m.insert(v.clone(), true);
            Ok(BTreeSet::from([m]))
        }
        Not(inner) => match &**inner {
            Var(v) => {
                let mut m = Minterm::top();
                m.insert(v.clone(), false);
                Ok(BTreeSet::from([m]))
            }
            // nnf() guarantees negations sit on variables only.
            _ => unreachable!("negation above non-variable after NNF"),
        },
        Or(fs) => {
            let mut out = BTreeSet::new();
            for sub in fs {
                out.extend(dnf_rec(sub, limits)?);
                if out.len() > cap {
                    return Err(FormulaError::DnfCap { cap });
                }
            }
            Ok(out)
        }
        And(fs) => {
            let mut acc = BTreeSet::from([Minterm::top()]);
            for sub in fs {
                let next = dnf_rec(sub, limits)?;
                if acc.len().saturating_mul(next.len()) > cap {
                    return Err(FormulaError::DnfCap { cap });
                }
                let mut joined = BTreeSet::new();
                for a in &acc {
                    for b in &next {
                        if let Some(m) = a.join(b) {
                            joined.insert(m);
                        }
                    }
                }
                acc = joined;
            }
            Ok(acc)
        }
    }
}

/// Delete the negative literals from the DNF of `f`. A minterm consisting of
/// negative literals only collapses to the empty minterm, i.e. truth.
pub fn positivate(f: &BoolFormula, limits: &Limits) -> Result<BoolFormula, FormulaError> {
    let dnf = to_dnf(f, limits)?;
    let stripped: BTreeSet<Minterm> = dnf
        .minterms
        .iter()
        .map(|m| {
            let mut out = Minterm::top();
            for v in m.positive_vars() {
                out.insert(v.clone(), true);
            }
            out
        })
        .collect();
    Ok(Dnf { minterms: stripped }.to_formula())
}

/// Swap conjunctions and disjunctions. Requires a negation-free formula
/// (e.g. the output of [`positivate`]).
pub fn dualize(f: &BoolFormula) -> Result<BoolFormula, FormulaError> {
    match f {
        True => Ok(False),
        False => Ok(True),
        Var(v) => Ok(Var(v.clone())),
        Not(_) => Err(FormulaError::NotPositive),
        And(fs) => Ok(BoolFormula::or(
            fs.iter().map(dualize).collect::<Result<Vec<_>, _>>()?,
        )),
        Or(fs) => Ok(BoolFormula::and(
            fs.iter().map(dualize).collect::<Result<Vec<_>, _>>()?,
        )),
    }
}

struct MaskSpace {
    vars: Vec<BoolVar>,
}

impl MaskSpace {
    fn new(universe: &BTreeSet<BoolVar>, limits: &Limits) -> Result<Self, FormulaError> {
        // 62 keeps the mask arithmetic inside u64 whatever the cap says.
        let cap = limits.enum_vars.min(62);
        if universe.len() > cap {
            return Err(FormulaError::EnumBound {
                vars: universe.len(),
                cap,
            });
        }
        Ok(MaskSpace {
            vars: universe.iter().cloned().collect(),
        })
    }

    fn index(&self) -> BTreeMap<&BoolVar, usize> {
        self.vars.iter().enumerate().map(|(i, v)| (v, i)).collect()
    }

    fn valuation(&self, mask: u64) -> Valuation {
        Valuation::new(
            self.vars.iter().cloned(),
            self.vars
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, v)| v.clone()),
        )
    }
}

/// Masks of popcount `k` over `n` bits, in increasing numeric order.
pub(crate) fn masks_of_weight(n: usize, k: usize) -> Vec<u64> {
    if k > n {
        return Vec::new();
    }
    if k == 0 {
        return vec![0];
    }
    let mut out = Vec::new();
    let mut mask: u64 = (1 << k) - 1;
    let top: u64 = 1 << n;
    while mask < top {
        out.push(mask);
        // Gosper's hack: next mask with the same popcount.
        let c = mask & mask.wrapping_neg();
        let r = mask + c;
        mask = (((r ^ mask) >> 2) / c) | r;
    }
    out
}

fn min_models_impl(
    f: &BoolFormula,
    universe: &BTreeSet<BoolVar>,
    limits: &Limits,
    parallel: bool,
) -> Result<BTreeSet<Valuation>, FormulaError> {
    for v in f.vars() {
        if !universe.contains(&v) {
            return Err(FormulaError::UnboundVar(v.name().to_string()));
        }
    }
    let space = MaskSpace::new(universe, limits)?;
    let index = space.index();
    let n = space.vars.len();
    let mut minimal: Vec<u64> = Vec::new();
    for k in 0..=n {
        let level = masks_of_weight(n, k);
        let checker = |mask: u64| -> bool {
            f.eval_mask(&index, mask) && !minimal.iter().any(|m| m & mask == *m)
        };
        let survivors = if parallel {
            exec::retain_filter(level, |&m| checker(m))
        } else {
            level.into_iter().filter(|&m| checker(m)).collect()
        };
        minimal.extend(survivors);
    }
    Ok(minimal.into_iter().map(|m| space.valuation(m)).collect())
}

/// The set of minimal satisfying valuations of `f` over `universe`,
/// by exhaustive enumeration plus minimality filtering.
pub fn min_models(
    f: &BoolFormula,
    universe: &BTreeSet<BoolVar>,
    limits: &Limits,
) -> Result<BTreeSet<Valuation>, FormulaError> {
    min_models_impl(f, universe, limits, true)
}

/// Sequential variant of [`min_models`] (used by the benchmark suite).
pub fn min_models_seq(
    f: &BoolFormula,
    universe: &BTreeSet<BoolVar>,
    limits: &Limits,
) -> Result<BTreeSet<Valuation>, FormulaError> {
    min_models_impl(f, universe, limits, false)
}

/// Satisfiability with an optional witness. Falls back to exhaustive
/// enumeration under the variable bound and to a splitting search above it.
pub fn is_sat(f: &BoolFormula, limits: &Limits) -> Option<Valuation> {
    let universe = f.vars();
    if universe.len() <= limits.enum_vars {
        let space = MaskSpace::new(&universe, limits).expect("bound already checked");
        let index = space.index();
        let total = 1u64 << space.vars.len();
        return exec::find_first_in_range(total, |mask| f.eval_mask(&index, mask))
            .map(|mask| space.valuation(mask));
    }
    let mut assignment = BTreeMap::new();
    if split_sat(f.clone(), &mut assignment) {
        let true_vars = assignment
            .iter()
            .filter(|(_, &v)| v)
            .map(|(k, _)| k.clone())
            .collect::<Vec<_>>();
        Some(Valuation::new(universe, true_vars))
    } else {
        None
    }
}

fn split_sat(f: BoolFormula, assignment: &mut BTreeMap<BoolVar, bool>) -> bool {
    match &f {
        True => return true,
        False => return false,
        _ => {}
    }
    let var = match f.vars().into_iter().next() {
        Some(v) => v,
        None => unreachable!("non-constant formula without variables"),
    };
    for value in [true, false] {
        let reduced = substitute(&f, &var, value);
        assignment.insert(var.clone(), value);
        if split_sat(reduced, assignment) {
            return true;
        }
        assignment.remove(&var);
    }
    false
}

/// Replace `var` by a constant and fold constants away.
pub fn substitute(f: &BoolFormula, var: &BoolVar, value: bool) -> BoolFormula {
    match f {
        True => True,
        False => False,
        Var(v) if v == var => {
            if value {
                True
            } else {
                False
            }
        }
        Var(v) => Var(v.clone()),
        Not(inner) => BoolFormula::not(substitute(inner, var, value)),
        And(fs) => BoolFormula::and(fs.iter().map(|g| substitute(g, var, value))),
        Or(fs) => BoolFormula::or(fs.iter().map(|g| substitute(g, var, value))),
    }
}

/// Exhaustive semantic equivalence over a shared universe.
pub fn equivalent(
    f: &BoolFormula,
    g: &BoolFormula,
    universe: &BTreeSet<BoolVar>,
    limits: &Limits,
) -> Result<bool, FormulaError> {
    let mut all = universe.clone();
    all.extend(f.vars());
    all.extend(g.vars());
    let space = MaskSpace::new(&all, limits)?;
    let index = space.index();
    let total = 1u64 << space.vars.len();
    Ok(exec::find_first_in_range(total, |mask| {
        f.eval_mask(&index, mask) != g.eval_mask(&index, mask)
    })
    .is_none())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(name: &str) -> BoolVar {
        BoolVar::state(name)
    }

    fn fv(name: &str) -> BoolFormula {
        BoolFormula::var(v(name))
    }

    fn lim() -> Limits {
        Limits::default()
    }

    #[test]
    fn dnf_distributes() {
        // (a | b) & c  ->  (a & c) | (b & c)
        let f = BoolFormula::and([BoolFormula::or([fv("a"), fv("b")]), fv("c")]);
        let dnf = to_dnf(&f, &lim()).unwrap();
        let expected = to_dnf(
            &BoolFormula::or([
                BoolFormula::and([fv("a"), fv("c")]),
                BoolFormula::and([fv("b"), fv("c")]),
            ]),
            &lim(),
        )
        .unwrap();
        assert_eq!(dnf, expected);
    }

    #[test]
    fn dnf_prunes_contradictions() {
        let f = BoolFormula::and([fv("p"), BoolFormula::not(fv("p"))]);
        let dnf = to_dnf(&f, &lim()).unwrap();
        assert!(dnf.is_empty());
        assert_eq!(dnf.to_formula(), False);
    }

    #[test]
    fn dnf_of_mutex_interaction_is_stable() {
        // (a & b1) | (a & b2) | (e & f1) | (e & f2) is already in DNF.
        let g = BoolFormula::or([
            BoolFormula::and([fv("a"), fv("b1")]),
            BoolFormula::and([fv("a"), fv("b2")]),
            BoolFormula::and([fv("e"), fv("f1")]),
            BoolFormula::and([fv("e"), fv("f2")]),
        ]);
        let dnf = to_dnf(&g, &lim()).unwrap();
        assert_eq!(dnf.len(), 4);
        assert!(equivalent(&dnf.to_formula(), &g, &g.vars(), &lim()).unwrap());
    }

    #[test]
    fn dnf_cap_is_enforced() {
        let mut limits = lim();
        limits.dnf_minterms = 3;
        // (a|b) & (c|d) has four minterms.
        let f = BoolFormula::and([
            BoolFormula::or([fv("a"), fv("b")]),
            BoolFormula::or([fv("c"), fv("d")]),
        ]);
        assert_eq!(
            to_dnf(&f, &limits).unwrap_err(),
            FormulaError::DnfCap { cap: 3 }
        );
    }

    #[test]
    fn positivate_keeps_positive_parts() {
        // (p & q) | (p & !r)  ->  (p & q) | p
        let f = BoolFormula::or([
            BoolFormula::and([fv("p"), fv("q")]),
            BoolFormula::and([fv("p"), BoolFormula::not(fv("r"))]),
        ]);
        let pos = positivate(&f, &lim()).unwrap();
        let expected = BoolFormula::or([BoolFormula::and([fv("p"), fv("q")]), fv("p")]);
        assert!(pos.is_positive());
        assert!(equivalent(&pos, &expected, &f.vars(), &lim()).unwrap());
    }

    #[test]
    fn positivate_all_negative_minterm_is_true() {
        let f = BoolFormula::not(fv("p"));
        assert_eq!(positivate(&f, &lim()).unwrap(), True);
    }

    #[test]
    fn positivate_fixes_positive_formulas() {
        let f = BoolFormula::or([BoolFormula::and([fv("p"), fv("q")]), fv("r")]);
        let pos = positivate(&f, &lim()).unwrap();
        assert!(equivalent(&pos, &f, &f.vars(), &lim()).unwrap());
    }

    #[test]
    fn dualize_swaps_junctions() {
        // (p & q) | p  ->  (p | q) & p
        let f = BoolFormula::or([BoolFormula::and([fv("p"), fv("q")]), fv("p")]);
        let dual = dualize(&f).unwrap();
        let expected = BoolFormula::and([BoolFormula::or([fv("p"), fv("q")]), fv("p")]);
        assert_eq!(dual, expected);
    }

    #[test]
    fn dualize_rejects_negations() {
        assert_eq!(
            dualize(&BoolFormula::not(fv("p"))).unwrap_err(),
            FormulaError::NotPositive
        );
    }

    #[test]
    fn eval_basics() {
        let val = Valuation::new([v("p"), v("q")], [v("p")]);
        assert!(BoolFormula::or([fv("p"), fv("q")]).eval(&val).unwrap());
        assert!(!False.eval(&val).unwrap());
        let unbound = fv("z").eval(&val).unwrap_err();
        assert_eq!(unbound, FormulaError::UnboundVar("z".into()));
    }

    #[test]
    fn min_models_of_mutex_interaction() {
        let g = BoolFormula::or([
            BoolFormula::and([fv("a"), fv("b1")]),
            BoolFormula::and([fv("a"), fv("b2")]),
            BoolFormula::and([fv("e"), fv("f1")]),
            BoolFormula::and([fv("e"), fv("f2")]),
        ]);
        let universe = g.vars();
        let models = min_models(&g, &universe, &lim()).unwrap();
        let sets: BTreeSet<BTreeSet<String>> = models
            .iter()
            .map(|m| m.true_vars().iter().map(|v| v.name().to_string()).collect())
            .collect();
        let expected: BTreeSet<BTreeSet<String>> =
            [["a", "b1"], ["a", "b2"], ["e", "f1"], ["e", "f2"]]
                .iter()
                .map(|s| s.iter().map(|x| x.to_string()).collect())
                .collect();
        assert_eq!(sets, expected);
    }

    #[test]
    fn min_models_of_truth_is_empty_valuation() {
        let universe: BTreeSet<_> = [v("a"), v("b")].into();
        let models = min_models(&True, &universe, &lim()).unwrap();
        assert_eq!(models.len(), 1);
        assert!(models.iter().next().unwrap().true_vars().is_empty());
    }

    #[test]
    fn min_models_absorbs() {
        // p | (p & q) has the single minimal model {p}.
        let f = BoolFormula::or([fv("p"), BoolFormula::and([fv("p"), fv("q")])]);
        let models = min_models(&f, &f.vars(), &lim()).unwrap();
        assert_eq!(models.len(), 1);
        let only = models.iter().next().unwrap();
        assert_eq!(only.true_vars().len(), 1);
        assert!(only.value(&v("p")).unwrap());
    }

    #[test]
    fn sat_examples() {
        assert!(is_sat(
            &BoolFormula::and([fv("p"), BoolFormula::not(fv("p"))]),
            &lim()
        )
        .is_none());
        let w = is_sat(&BoolFormula::or([fv("p"), fv("q")]), &lim()).unwrap();
        assert!(BoolFormula::or([fv("p"), fv("q")]).eval(&w).unwrap());
    }

    #[test]
    fn sat_above_enum_bound_uses_search() {
        let mut limits = lim();
        limits.enum_vars = 3;
        let f = BoolFormula::and((0..6).map(|i| fv(&format!("x{i}"))));
        assert!(is_sat(&f, &limits).is_some());
        let g = BoolFormula::and([f.clone(), BoolFormula::not(fv("x0"))]);
        assert!(is_sat(&g, &limits).is_none());
    }

    #[test]
    fn minimal_minterms_filters_supersets() {
        let f = BoolFormula::or([fv("p"), BoolFormula::and([fv("p"), fv("q")])]);
        let dnf = to_dnf(&f, &lim()).unwrap();
        assert_eq!(dnf.len(), 2);
        assert_eq!(dnf.minimal_minterms().len(), 1);
    }

    // Random formula over a fixed small vocabulary.
    fn arb_formula(vars: usize, depth: u32) -> impl Strategy<Value = BoolFormula> {
        let leaf = prop_oneof![
            Just(True),
            Just(False),
            (0..vars).prop_map(|i| fv(&format!("v{i}"))),
        ];
        leaf.prop_recursive(depth, 64, 4, |inner| {
            prop_oneof![
                inner.clone().prop_map(BoolFormula::not),
                prop::collection::vec(inner.clone(), 1..4).prop_map(BoolFormula::and),
                prop::collection::vec(inner, 1..4).prop_map(BoolFormula::or),
            ]
        })
    }

    fn small_universe(vars: usize) -> BTreeSet<BoolVar> {
        (0..vars).map(|i| v(&format!("v{i}"))).collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn prop_dnf_preserves_semantics(f in arb_formula(5, 4)) {
            let dnf = to_dnf(&f, &lim()).unwrap();
            prop_assert!(equivalent(&dnf.to_formula(), &f, &small_universe(5), &lim()).unwrap());
            prop_assert!(dnf.to_formula().is_dnf());
        }

        #[test]
        fn prop_positivate_preserves_min_models(f in arb_formula(5, 4)) {
            let universe = small_universe(5);
            let pos = positivate(&f, &lim()).unwrap();
            prop_assert!(pos.is_positive());
            let before = min_models(&f, &universe, &lim()).unwrap();
            let after = min_models(&pos, &universe, &lim()).unwrap();
            prop_assert_eq!(before, after);
        }

        #[test]
        fn prop_dual_is_involutive(f in arb_formula(5, 4)) {
            let pos = positivate(&f, &lim()).unwrap();
            let twice = dualize(&dualize(&pos).unwrap()).unwrap();
            prop_assert_eq!(twice, pos);
        }

        #[test]
        fn prop_dual_respects_equivalence(f in arb_formula(4, 3)) {
            // Two syntactically different positive presentations of the
            // same function must have equivalent duals.
            let universe = small_universe(4);
            let pos = positivate(&f, &lim()).unwrap();
            let alt = to_dnf(&pos, &lim()).unwrap().minimal_minterms().to_formula();
            prop_assert!(equivalent(&pos, &alt, &universe, &lim()).unwrap());
            let d1 = dualize(&pos).unwrap();
            let d2 = dualize(&alt).unwrap();
            prop_assert!(equivalent(&d1, &d2, &universe, &lim()).unwrap());
        }

        #[test]
        fn prop_positive_models_upward_closed(f in arb_formula(5, 4)) {
            let universe = small_universe(5);
            let pos = positivate(&f, &lim()).unwrap();
            let models = min_models(&pos, &universe, &lim()).unwrap();
            // Any valuation above a minimal model satisfies the formula.
            for m in &models {
                let mut bigger: Vec<BoolVar> = m.true_vars().iter().cloned().collect();
                for extra in universe.iter() {
                    if !m.value(extra).unwrap() {
                        bigger.push(extra.clone());
                        break;
                    }
                }
                let val = Valuation::new(universe.iter().cloned(), bigger);
                prop_assert!(pos.eval(&val).unwrap());
            }
        }
    }
}
