//! Monadic interaction logic: first-order logic with equality and unary
//! predicates over typed instance indices.
//!
//! Every quantifier carries the component type of its variable and ranges
//! over `1..=M(type)` of a finite structure, so the disjoint-vocabulary
//! discipline is mechanical. Structures double as the enumeration oracle for
//! the cardinality layer.

use crate::prop::{BoolFormula, BoolVar, VarKind};
use crate::Limits;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

/// A unary predicate symbol owned by one component type.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct PredSymbol {
    name: String,
    component_type: String,
    kind: VarKind,
}

impl PredSymbol {
    pub fn new(name: impl Into<String>, component_type: impl Into<String>, kind: VarKind) -> Self {
        PredSymbol {
            name: name.into(),
            component_type: component_type.into(),
            kind,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn component_type(&self) -> &str {
        &self.component_type
    }

    pub fn kind(&self) -> VarKind {
        self.kind
    }

    /// The propositional variable for this predicate at a concrete instance.
    pub fn at_instance(&self, index: usize) -> BoolVar {
        BoolVar::instanced(&self.name, self.kind, self.component_type.clone(), index)
    }
}

impl fmt::Display for PredSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// An index variable ranging over the instances of one component type.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct IndexVar {
    name: String,
    component_type: String,
}

impl IndexVar {
    pub fn new(name: impl Into<String>, component_type: impl Into<String>) -> Self {
        IndexVar {
            name: name.into(),
            component_type: component_type.into(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn component_type(&self) -> &str {
        &self.component_type
    }
}

impl fmt::Display for IndexVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MilError {
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("index variable `{0}` is unbound")]
    UnboundVar(String),
    #[error("component type `{0}` has no declared universe size")]
    UnknownType(String),
    #[error("component type `{0}` must have at least one instance")]
    EmptyUniverse(String),
    #[error("operation requires a formula without predicate negations")]
    NotPositive,
    #[error("operation requires a sentence (no free variables)")]
    NotSentence,
    #[error("structure enumeration of {count} structures exceeds the cap of {cap}")]
    EnumBound { count: u128, cap: u64 },
}

/// Monadic interaction logic formula. Disequality is first-class so that
/// positive formulae stay negation-free and dualization is structural.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MilFormula {
    True,
    False,
    Eq(IndexVar, IndexVar),
    Neq(IndexVar, IndexVar),
    Pred(PredSymbol, IndexVar),
    Not(Box<MilFormula>),
    And(Vec<MilFormula>),
    Or(Vec<MilFormula>),
    Exists(IndexVar, Box<MilFormula>),
    Forall(IndexVar, Box<MilFormula>),
}

use MilFormula::*;

impl MilFormula {
    /// Predicate atom; the variable must belong to the predicate's type.
    pub fn pred(p: PredSymbol, i: IndexVar) -> Self {
        assert_eq!(
            p.component_type(),
            i.component_type(),
            "predicate `{}` of type `{}` applied to index of type `{}`",
            p.name(),
            p.component_type(),
            i.component_type()
        );
        Pred(p, i)
    }

    /// Equality atom; cross-type comparisons are rejected because each
    /// quantifier ranges over its own type's instances.
    pub fn eq(i: IndexVar, j: IndexVar) -> Self {
        assert_eq!(
            i.component_type(),
            j.component_type(),
            "equality between indices of types `{}` and `{}`",
            i.component_type(),
            j.component_type()
        );
        Eq(i, j)
    }

    pub fn neq(i: IndexVar, j: IndexVar) -> Self {
        assert_eq!(i.component_type(), j.component_type());
        Neq(i, j)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: MilFormula) -> Self {
        match f {
            True => False,
            False => True,
            Eq(i, j) => Neq(i, j),
            Neq(i, j) => Eq(i, j),
            Not(inner) => *inner,
            other => Not(Box::new(other)),
        }
    }

    pub fn and(fs: impl IntoIterator<Item = MilFormula>) -> Self {
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

    pub fn or(fs: impl IntoIterator<Item = MilFormula>) -> Self {
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

    pub fn implies(lhs: MilFormula, rhs: MilFormula) -> Self {
        Self::or([Self::not(lhs), rhs])
    }

    pub fn exists(i: IndexVar, body: MilFormula) -> Self {
        Exists(i, Box::new(body))
    }

    pub fn forall(i: IndexVar, body: MilFormula) -> Self {
        Forall(i, Box::new(body))
    }

    /// Pairwise disequality; the empty and singleton cases are truth.
    pub fn distinct(vars: &[IndexVar]) -> Self {
        let mut lits = Vec::new();
        for a in 0..vars.len() {
            for b in a + 1..vars.len() {
                lits.push(Self::neq(vars[a].clone(), vars[b].clone()));
            }
        }
        Self::and(lits)
    }

    pub fn free_vars(&self) -> BTreeSet<IndexVar> {
        let mut out = BTreeSet::new();
        self.free_vars_rec(&mut Vec::new(), &mut out);
        out
    }

    fn free_vars_rec(&self, bound: &mut Vec<IndexVar>, out: &mut BTreeSet<IndexVar>) {
        match self {
            True | False => {}
            Eq(i, j) | Neq(i, j) => {
                for v in [i, j] {
                    if !bound.contains(v) {
                        out.insert(v.clone());
                    }
                }
            }
            Pred(_, i) => {
                if !bound.contains(i) {
                    out.insert(i.clone());
                }
            }
            Not(f) => f.free_vars_rec(bound, out),
            And(fs) | Or(fs) => fs.iter().for_each(|f| f.free_vars_rec(bound, out)),
            Exists(i, f) | Forall(i, f) => {
                bound.push(i.clone());
                f.free_vars_rec(bound, out);
                bound.pop();
            }
        }
    }

    pub fn is_sentence(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// All predicate symbols occurring anywhere in the formula.
    pub fn preds(&self) -> BTreeSet<PredSymbol> {
        let mut out = BTreeSet::new();
        self.collect_preds(&mut out);
        out
    }

    fn collect_preds(&self, out: &mut BTreeSet<PredSymbol>) {
        match self {
            True | False | Eq(..) | Neq(..) => {}
            Pred(p, _) => {
                out.insert(p.clone());
            }
            Not(f) => f.collect_preds(out),
            And(fs) | Or(fs) => fs.iter().for_each(|f| f.collect_preds(out)),
            Exists(_, f) | Forall(_, f) => f.collect_preds(out),
        }
    }

    /// Component types mentioned by predicates or quantifiers.
    pub fn component_types(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_types(&mut out);
        out
    }

    fn collect_types(&self, out: &mut BTreeSet<String>) {
        match self {
            True | False => {}
            Eq(i, j) | Neq(i, j) => {
                out.insert(i.component_type().to_string());
                out.insert(j.component_type().to_string());
            }
            Pred(p, i) => {
                out.insert(p.component_type().to_string());
                out.insert(i.component_type().to_string());
            }
            Not(f) => f.collect_types(out),
            And(fs) | Or(fs) => fs.iter().for_each(|f| f.collect_types(out)),
            Exists(i, f) | Forall(i, f) => {
                out.insert(i.component_type().to_string());
                f.collect_types(out);
            }
        }
    }

    /// Every predicate symbol occurs under an even number of negations.
    /// Equality literals are exempt.
    pub fn is_positive(&self) -> bool {
        self.polarity_ok(true)
    }

    fn polarity_ok(&self, positive: bool) -> bool {
        match self {
            True | False | Eq(..) | Neq(..) => true,
            Pred(..) => positive,
            Not(f) => f.polarity_ok(!positive),
            And(fs) | Or(fs) => fs.iter().all(|f| f.polarity_ok(positive)),
            Exists(_, f) | Forall(_, f) => f.polarity_ok(positive),
        }
    }

    /// Negation normal form: negation survives only directly on predicate
    /// atoms.
    pub fn nnf(&self) -> MilFormula {
        self.nnf_rec(false)
    }

    fn nnf_rec(&self, negate: bool) -> MilFormula {
        match (self, negate) {
            (True, false) | (False, true) => True,
            (True, true) | (False, false) => False,
            (Eq(i, j), false) | (Neq(i, j), true) => Eq(i.clone(), j.clone()),
            (Eq(i, j), true) | (Neq(i, j), false) => Neq(i.clone(), j.clone()),
            (Pred(p, i), false) => Pred(p.clone(), i.clone()),
            (Pred(p, i), true) => Not(Box::new(Pred(p.clone(), i.clone()))),
            (Not(f), _) => f.nnf_rec(!negate),
            (And(fs), false) => Self::and(fs.iter().map(|f| f.nnf_rec(false))),
            (And(fs), true) => Self::or(fs.iter().map(|f| f.nnf_rec(true))),
            (Or(fs), false) => Self::or(fs.iter().map(|f| f.nnf_rec(false))),
            (Or(fs), true) => Self::and(fs.iter().map(|f| f.nnf_rec(true))),
            (Exists(i, f), false) => Self::exists(i.clone(), f.nnf_rec(false)),
            (Exists(i, f), true) => Self::forall(i.clone(), f.nnf_rec(true)),
            (Forall(i, f), false) => Self::forall(i.clone(), f.nnf_rec(false)),
            (Forall(i, f), true) => Self::exists(i.clone(), f.nnf_rec(true)),
        }
    }

    fn rename_var(&self, from: &IndexVar, to: &IndexVar) -> MilFormula {
        let swap = |v: &IndexVar| if v == from { to.clone() } else { v.clone() };
        match self {
            True => True,
            False => False,
            Eq(i, j) => Eq(swap(i), swap(j)),
            Neq(i, j) => Neq(swap(i), swap(j)),
            Pred(p, i) => Pred(p.clone(), swap(i)),
            Not(f) => Not(Box::new(f.rename_var(from, to))),
            And(fs) => And(fs.iter().map(|f| f.rename_var(from, to)).collect()),
            Or(fs) => Or(fs.iter().map(|f| f.rename_var(from, to)).collect()),
            Exists(i, f) if i == from => Exists(i.clone(), f.clone()),
            Forall(i, f) if i == from => Forall(i.clone(), f.clone()),
            Exists(i, f) => Exists(i.clone(), Box::new(f.rename_var(from, to))),
            Forall(i, f) => Forall(i.clone(), Box::new(f.rename_var(from, to))),
        }
    }
}

impl fmt::Display for MilFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(node: &MilFormula, f: &mut fmt::Formatter<'_>, parent: u8) -> fmt::Result {
            let prec = match node {
                True | False | Eq(..) | Neq(..) | Pred(..) | Not(_) => 3,
                And(_) => 2,
                Or(_) => 1,
                Exists(..) | Forall(..) => 0,
            };
            let paren = prec < parent;
            if paren {
                f.write_str("(")?;
            }
            match node {
                True => f.write_str("true")?,
                False => f.write_str("false")?,
                Eq(i, j) => write!(f, "{i} = {j}")?,
                Neq(i, j) => write!(f, "{i} != {j}")?,
                Pred(p, i) => write!(f, "{p}({i})")?,
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
                Exists(i, body) => {
                    write!(f, "exists {}:{}. ", i.name(), i.component_type())?;
                    go(body, f, 0)?;
                }
                Forall(i, body) => {
                    write!(f, "forall {}:{}. ", i.name(), i.component_type())?;
                    go(body, f, 0)?;
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

/// A finite structure: per-type universe sizes, a valuation for free
/// variables and an interpretation of predicates as sets of instance
/// indices (1-based).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Structure {
    pub sizes: BTreeMap<String, usize>,
    pub valuation: BTreeMap<IndexVar, usize>,
    pub interp: BTreeMap<PredSymbol, BTreeSet<usize>>,
}

impl Structure {
    pub fn new(sizes: BTreeMap<String, usize>) -> Self {
        Structure {
            sizes,
            valuation: BTreeMap::new(),
            interp: BTreeMap::new(),
        }
    }

    pub fn with_pred(mut self, p: PredSymbol, elems: impl IntoIterator<Item = usize>) -> Self {
        self.interp.insert(p, elems.into_iter().collect());
        self
    }

    pub fn with_binding(mut self, v: IndexVar, elem: usize) -> Self {
        self.valuation.insert(v, elem);
        self
    }

    pub fn size_of(&self, component_type: &str) -> Result<usize, MilError> {
        match self.sizes.get(component_type) {
            Some(0) => Err(MilError::EmptyUniverse(component_type.to_string())),
            Some(&n) => Ok(n),
            None => Err(MilError::UnknownType(component_type.to_string())),
        }
    }

    pub fn elements_of(&self, p: &PredSymbol) -> BTreeSet<usize> {
        self.interp.get(p).cloned().unwrap_or_default()
    }

    /// Pointwise inclusion of interpretations (same universe assumed).
    pub fn le(&self, other: &Structure) -> bool {
        let preds: BTreeSet<&PredSymbol> = self.interp.keys().chain(other.interp.keys()).collect();
        preds
            .into_iter()
            .all(|p| self.elements_of(p).is_subset(&other.elements_of(p)))
    }

    /// The boolean valuation that marks `pred(k)` true iff `k` is in the
    /// interpretation of `pred`.
    pub fn to_valuation(&self, preds: &BTreeSet<PredSymbol>) -> crate::prop::Valuation {
        let mut universe = Vec::new();
        let mut true_vars = Vec::new();
        for p in preds {
            let n = *self.sizes.get(p.component_type()).unwrap_or(&0);
            for k in 1..=n {
                let var = p.at_instance(k);
                if self.elements_of(p).contains(&k) {
                    true_vars.push(var.clone());
                }
                universe.push(var);
            }
        }
        crate::prop::Valuation::new(universe, true_vars)
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sizes: Vec<String> = self.sizes.iter().map(|(t, n)| format!("{t}={n}")).collect();
        write!(f, "[{}]", sizes.join(", "))?;
        for (p, elems) in &self.interp {
            let list: Vec<String> = elems.iter().map(|e| e.to_string()).collect();
            write!(f, " {p}={{{}}}", list.join(","))?;
        }
        Ok(())
    }
}

/// Standard satisfaction relation over finite structures.
pub fn eval_mil(phi: &MilFormula, structure: &Structure) -> Result<bool, MilError> {
    let mut env = structure.valuation.clone();
    eval_rec(phi, structure, &mut env)
}

fn eval_rec(
    phi: &MilFormula,
    st: &Structure,
    env: &mut BTreeMap<IndexVar, usize>,
) -> Result<bool, MilError> {
    match phi {
        True => Ok(true),
        False => Ok(false),
        Eq(i, j) => Ok(lookup(env, i)? == lookup(env, j)?),
        Neq(i, j) => Ok(lookup(env, i)? != lookup(env, j)?),
        Pred(p, i) => {
            if p.component_type() != i.component_type() {
                return Err(MilError::TypeMismatch(format!(
                    "predicate `{}` applied to `{}`",
                    p.name(),
                    i.name()
                )));
            }
            Ok(st.elements_of(p).contains(&lookup(env, i)?))
        }
        Not(f) => Ok(!eval_rec(f, st, env)?),
        And(fs) => {
            for f in fs {
                if !eval_rec(f, st, env)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Or(fs) => {
            for f in fs {
                if eval_rec(f, st, env)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        Exists(i, f) => {
            let n = st.size_of(i.component_type())?;
            let saved = env.get(i).copied();
            for elem in 1..=n {
                env.insert(i.clone(), elem);
                if eval_rec(f, st, env)? {
                    restore(env, i, saved);
                    return Ok(true);
                }
            }
            restore(env, i, saved);
            Ok(false)
        }
        Forall(i, f) => {
            let n = st.size_of(i.component_type())?;
            let saved = env.get(i).copied();
            for elem in 1..=n {
                env.insert(i.clone(), elem);
                if !eval_rec(f, st, env)? {
                    restore(env, i, saved);
                    return Ok(false);
                }
            }
            restore(env, i, saved);
            Ok(true)
        }
    }
}

fn lookup(env: &BTreeMap<IndexVar, usize>, v: &IndexVar) -> Result<usize, MilError> {
    env.get(v)
        .copied()
        .ok_or_else(|| MilError::UnboundVar(v.name().to_string()))
}

fn restore(env: &mut BTreeMap<IndexVar, usize>, v: &IndexVar, saved: Option<usize>) {
    match saved {
        Some(x) => {
            env.insert(v.clone(), x);
        }
        None => {
            env.remove(v);
        }
    }
}

/// Replace quantifiers over type `k` by finite junctions over `1..=M(k)`.
/// Predicate atoms become instance variables and equality atoms fold to
/// constants. `phi` must be a sentence and every size must be at least one.
pub fn unfold(phi: &MilFormula, sizes: &BTreeMap<String, usize>) -> Result<BoolFormula, MilError> {
    if !phi.is_sentence() {
        return Err(MilError::NotSentence);
    }
    for ty in phi.component_types() {
        match sizes.get(&ty) {
            Some(0) => return Err(MilError::EmptyUniverse(ty)),
            Some(_) => {}
            None => return Err(MilError::UnknownType(ty)),
        }
    }
    let mut env = BTreeMap::new();
    unfold_rec(phi, sizes, &mut env)
}

fn unfold_rec(
    phi: &MilFormula,
    sizes: &BTreeMap<String, usize>,
    env: &mut BTreeMap<IndexVar, usize>,
) -> Result<BoolFormula, MilError> {
    Ok(match phi {
        True => BoolFormula::True,
        False => BoolFormula::False,
        Eq(i, j) => {
            if lookup(env, i)? == lookup(env, j)? {
                BoolFormula::True
            } else {
                BoolFormula::False
            }
        }
        Neq(i, j) => {
            if lookup(env, i)? != lookup(env, j)? {
                BoolFormula::True
            } else {
                BoolFormula::False
            }
        }
        Pred(p, i) => BoolFormula::var(p.at_instance(lookup(env, i)?)),
        Not(f) => BoolFormula::not(unfold_rec(f, sizes, env)?),
        And(fs) => BoolFormula::and(
            fs.iter()
                .map(|f| unfold_rec(f, sizes, env))
                .collect::<Result<Vec<_>, _>>()?,
        ),
        Or(fs) => BoolFormula::or(
            fs.iter()
                .map(|f| unfold_rec(f, sizes, env))
                .collect::<Result<Vec<_>, _>>()?,
        ),
        Exists(i, f) => {
            let n = sizes
                .get(i.component_type())
                .copied()
                .ok_or_else(|| MilError::UnknownType(i.component_type().to_string()))?;
            let saved = env.get(i).copied();
            let mut cases = Vec::with_capacity(n);
            for elem in 1..=n {
                env.insert(i.clone(), elem);
                cases.push(unfold_rec(f, sizes, env)?);
            }
            restore(env, i, saved);
            BoolFormula::or(cases)
        }
        Forall(i, f) => {
            let n = sizes
                .get(i.component_type())
                .copied()
                .ok_or_else(|| MilError::UnknownType(i.component_type().to_string()))?;
            let saved = env.get(i).copied();
            let mut cases = Vec::with_capacity(n);
            for elem in 1..=n {
                env.insert(i.clone(), elem);
                cases.push(unfold_rec(f, sizes, env)?);
            }
            restore(env, i, saved);
            BoolFormula::and(cases)
        }
    })
}

/// Dual of a positive formula: swap conjunction with disjunction, the
/// quantifiers with each other and equality with disequality. Predicate
/// atoms stay untouched, so the result is positive again.
pub fn mil_dual(phi: &MilFormula) -> Result<MilFormula, MilError> {
    Ok(match phi {
        True => False,
        False => True,
        Eq(i, j) => Neq(i.clone(), j.clone()),
        Neq(i, j) => Eq(i.clone(), j.clone()),
        Pred(p, i) => Pred(p.clone(), i.clone()),
        Not(_) => return Err(MilError::NotPositive),
        And(fs) => MilFormula::or(fs.iter().map(mil_dual).collect::<Result<Vec<_>, _>>()?),
        Or(fs) => MilFormula::and(fs.iter().map(mil_dual).collect::<Result<Vec<_>, _>>()?),
        Exists(i, f) => MilFormula::forall(i.clone(), mil_dual(f)?),
        Forall(i, f) => MilFormula::exists(i.clone(), mil_dual(f)?),
    })
}

/// Prenex normal form of a sentence. The prefix is returned outermost first
/// together with the quantifier-free matrix; bound variables are renamed
/// apart with a counter suffix.
pub fn prenex_parts(
    phi: &MilFormula,
) -> Result<(Vec<(Quantifier, IndexVar)>, MilFormula), MilError> {
    if !phi.is_sentence() {
        return Err(MilError::NotSentence);
    }
    let nnf = phi.nnf();
    let mut counter = 0usize;
    let (prefix, matrix) = pull(&nnf, &mut counter);
    Ok((prefix, matrix))
}

/// Prenex normal form as a single formula.
pub fn prenex(phi: &MilFormula) -> Result<MilFormula, MilError> {
    let (prefix, matrix) = prenex_parts(phi)?;
    let mut out = matrix;
    for (q, v) in prefix.into_iter().rev() {
        out = match q {
            Quantifier::Exists => MilFormula::exists(v, out),
            Quantifier::Forall => MilFormula::forall(v, out),
        };
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantifier {
    Exists,
    Forall,
}

fn pull(phi: &MilFormula, counter: &mut usize) -> (Vec<(Quantifier, IndexVar)>, MilFormula) {
    match phi {
        True | False | Eq(..) | Neq(..) | Pred(..) | Not(_) => (Vec::new(), phi.clone()),
        And(fs) => {
            let mut prefix = Vec::new();
            let mut parts = Vec::new();
            for f in fs {
                let (p, m) = pull(f, counter);
                prefix.extend(p);
                parts.push(m);
            }
            (prefix, MilFormula::and(parts))
        }
        Or(fs) => {
            let mut prefix = Vec::new();
            let mut parts = Vec::new();
            for f in fs {
                let (p, m) = pull(f, counter);
                prefix.extend(p);
                parts.push(m);
            }
            (prefix, MilFormula::or(parts))
        }
        Exists(i, f) | Forall(i, f) => {
            let quant = if matches!(phi, Exists(..)) {
                Quantifier::Exists
            } else {
                Quantifier::Forall
            };
            *counter += 1;
            let fresh = IndexVar::new(
                format!("{}#{}", i.name(), counter),
                i.component_type().to_string(),
            );
            let renamed = f.rename_var(i, &fresh);
            let (mut prefix, matrix) = pull(&renamed, counter);
            prefix.insert(0, (quant, fresh));
            (prefix, matrix)
        }
    }
}

/// True when the formula is a quantifier prefix over a quantifier-free
/// matrix.
pub fn is_prenex(phi: &MilFormula) -> bool {
    fn quantifier_free(f: &MilFormula) -> bool {
        match f {
            True | False | Eq(..) | Neq(..) | Pred(..) => true,
            Not(g) => quantifier_free(g),
            And(fs) | Or(fs) => fs.iter().all(quantifier_free),
            Exists(..) | Forall(..) => false,
        }
    }
    match phi {
        Exists(_, f) | Forall(_, f) => is_prenex(f),
        other => quantifier_free(other),
    }
}

/// The space of all interpretations of `preds` at fixed universe sizes.
/// Structures are indexed by a bitmask over `(pred, element)` pairs, so
/// iteration order is deterministic and consumers can shard the range.
pub struct StructureSpace {
    sizes: BTreeMap<String, usize>,
    slots: Vec<(PredSymbol, usize)>,
}

impl StructureSpace {
    pub fn new(
        preds: &BTreeSet<PredSymbol>,
        sizes: &BTreeMap<String, usize>,
        limits: &Limits,
    ) -> Result<Self, MilError> {
        let mut slots = Vec::new();
        for p in preds {
            let n = sizes
                .get(p.component_type())
                .copied()
                .ok_or_else(|| MilError::UnknownType(p.component_type().to_string()))?;
            if n == 0 {
                return Err(MilError::EmptyUniverse(p.component_type().to_string()));
            }
            for elem in 1..=n {
                slots.push((p.clone(), elem));
            }
        }
        let count = 1u128 << slots.len();
        if count > limits.structure_count as u128 {
            return Err(MilError::EnumBound {
                count,
                cap: limits.structure_count,
            });
        }
        Ok(StructureSpace {
            sizes: sizes.clone(),
            slots,
        })
    }

    pub fn count(&self) -> u64 {
        1u64 << self.slots.len()
    }

    pub fn get(&self, index: u64) -> Structure {
        let mut st = Structure::new(self.sizes.clone());
        for (bit, (p, elem)) in self.slots.iter().enumerate() {
            if index & (1 << bit) != 0 {
                st.interp.entry(p.clone()).or_default().insert(*elem);
            }
        }
        // Predicates with empty interpretations still belong to the domain.
        for (p, _) in &self.slots {
            st.interp.entry(p.clone()).or_default();
        }
        st
    }

    pub fn iter(&self) -> impl Iterator<Item = Structure> + '_ {
        (0..self.count()).map(|i| self.get(i))
    }

    /// Structure-mask pairs where `index` bit `b` set means slot `b` is in
    /// the interpretation; the subset order on masks is pointwise inclusion.
    pub fn mask_count(&self) -> u64 {
        self.count()
    }
}

/// Enumerate every structure over `preds` at exactly the given sizes.
pub fn enumerate_structures(
    preds: &BTreeSet<PredSymbol>,
    sizes: &BTreeMap<String, usize>,
    limits: &Limits,
) -> Result<Vec<Structure>, MilError> {
    let space = StructureSpace::new(preds, sizes, limits)?;
    Ok(space.iter().collect())
}

/// Minimal structures (pointwise inclusion) among those satisfying `accept`.
pub fn minimal_structures<F>(space: &StructureSpace, accept: F) -> Result<Vec<Structure>, MilError>
where
    F: Fn(&Structure) -> Result<bool, MilError>,
{
    let n = space.slots.len();
    let mut minimal_masks: Vec<u64> = Vec::new();
    for k in 0..=n {
        let level = crate::prop::masks_of_weight(n, k);
        for mask in level {
            if minimal_masks.iter().any(|m| m & mask == *m) {
                continue;
            }
            if accept(&space.get(mask))? {
                minimal_masks.push(mask);
            }
        }
    }
    Ok(minimal_masks.into_iter().map(|m| space.get(m)).collect())
}

/// All size maps assigning each type in `types` a size in `1..=max`.
pub fn size_maps(types: &[String], max: usize) -> Vec<BTreeMap<String, usize>> {
    let mut out = vec![BTreeMap::new()];
    for ty in types {
        let mut next = Vec::new();
        for partial in &out {
            for n in 1..=max {
                let mut m = partial.clone();
                m.insert(ty.clone(), n);
                next.push(m);
            }
        }
        out = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prop;

    fn task_pred(name: &str) -> PredSymbol {
        PredSymbol::new(name, "Task", VarKind::State)
    }

    fn task_var(name: &str) -> IndexVar {
        IndexVar::new(name, "Task")
    }

    fn lim() -> Limits {
        Limits::default()
    }

    #[test]
    fn eval_exists_over_interpretation() {
        let w = task_pred("w");
        let st = Structure::new(BTreeMap::from([("Task".into(), 2)])).with_pred(w.clone(), [1]);
        let phi = MilFormula::exists(task_var("i"), MilFormula::pred(w, task_var("i")));
        assert!(eval_mil(&phi, &st).unwrap());
    }

    #[test]
    fn eval_distinct_on_equal_bindings() {
        let st = Structure::new(BTreeMap::from([("Task".into(), 2)]))
            .with_binding(task_var("i1"), 1)
            .with_binding(task_var("i2"), 1);
        let phi = MilFormula::distinct(&[task_var("i1"), task_var("i2")]);
        assert!(!eval_mil(&phi, &st).unwrap());
    }

    #[test]
    fn eval_unbound_var_errors() {
        let st = Structure::new(BTreeMap::from([("Task".into(), 1)]));
        let phi = MilFormula::pred(task_pred("w"), task_var("i"));
        assert_eq!(
            eval_mil(&phi, &st).unwrap_err(),
            MilError::UnboundVar("i".into())
        );
    }

    #[test]
    fn unfold_exists_is_disjunction() {
        let b = PredSymbol::new("b", "Task", VarKind::Port);
        let phi = MilFormula::exists(task_var("i"), MilFormula::pred(b.clone(), task_var("i")));
        let f = unfold(&phi, &BTreeMap::from([("Task".into(), 2)])).unwrap();
        let expected = BoolFormula::or([
            BoolFormula::var(b.at_instance(1)),
            BoolFormula::var(b.at_instance(2)),
        ]);
        assert_eq!(f, expected);
    }

    #[test]
    fn unfold_forall_is_conjunction() {
        let w = task_pred("w");
        let phi = MilFormula::forall(task_var("i"), MilFormula::pred(w.clone(), task_var("i")));
        let f = unfold(&phi, &BTreeMap::from([("Task".into(), 3)])).unwrap();
        let expected = BoolFormula::and([
            BoolFormula::var(w.at_instance(1)),
            BoolFormula::var(w.at_instance(2)),
            BoolFormula::var(w.at_instance(3)),
        ]);
        assert_eq!(f, expected);
    }

    #[test]
    fn unfold_rejects_zero_size() {
        let w = task_pred("w");
        let phi = MilFormula::exists(task_var("i"), MilFormula::pred(w, task_var("i")));
        assert_eq!(
            unfold(&phi, &BTreeMap::from([("Task".into(), 0)])).unwrap_err(),
            MilError::EmptyUniverse("Task".into())
        );
    }

    #[test]
    fn parametric_mutex_unfolds_to_bounded_interaction() {
        // a(i) & b(j) | e(i) & f(j), one semaphore and two tasks.
        let a = PredSymbol::new("a", "Semaphore", VarKind::Port);
        let e = PredSymbol::new("e", "Semaphore", VarKind::Port);
        let b = PredSymbol::new("b", "Task", VarKind::Port);
        let fp = PredSymbol::new("f", "Task", VarKind::Port);
        let i = IndexVar::new("i", "Semaphore");
        let j = IndexVar::new("j", "Task");
        let gamma = MilFormula::or([
            MilFormula::exists(
                i.clone(),
                MilFormula::exists(
                    j.clone(),
                    MilFormula::and([
                        MilFormula::pred(a.clone(), i.clone()),
                        MilFormula::pred(b.clone(), j.clone()),
                    ]),
                ),
            ),
            MilFormula::exists(
                i.clone(),
                MilFormula::exists(
                    j.clone(),
                    MilFormula::and([
                        MilFormula::pred(e.clone(), i.clone()),
                        MilFormula::pred(fp.clone(), j.clone()),
                    ]),
                ),
            ),
        ]);
        let sizes = BTreeMap::from([("Semaphore".into(), 1), ("Task".into(), 2)]);
        let unfolded = unfold(&gamma, &sizes).unwrap();
        let expected = BoolFormula::or([
            BoolFormula::and([
                BoolFormula::var(a.at_instance(1)),
                BoolFormula::var(b.at_instance(1)),
            ]),
            BoolFormula::and([
                BoolFormula::var(a.at_instance(1)),
                BoolFormula::var(b.at_instance(2)),
            ]),
            BoolFormula::and([
                BoolFormula::var(e.at_instance(1)),
                BoolFormula::var(fp.at_instance(1)),
            ]),
            BoolFormula::and([
                BoolFormula::var(e.at_instance(1)),
                BoolFormula::var(fp.at_instance(2)),
            ]),
        ]);
        let universe = expected.vars();
        assert!(prop::equivalent(&unfolded, &expected, &universe, &lim()).unwrap());
    }

    #[test]
    fn dual_swaps_quantifiers_and_is_involutive() {
        let u = task_pred("u");
        let phi = MilFormula::exists(task_var("i"), MilFormula::pred(u.clone(), task_var("i")));
        let dual = mil_dual(&phi).unwrap();
        assert_eq!(
            dual,
            MilFormula::forall(task_var("i"), MilFormula::pred(u, task_var("i")))
        );
        assert_eq!(mil_dual(&dual).unwrap(), phi);
        assert!(dual.is_positive());
    }

    #[test]
    fn dual_rejects_negation() {
        let u = task_pred("u");
        let phi = MilFormula::not(MilFormula::pred(u, task_var("i")));
        assert_eq!(mil_dual(&phi).unwrap_err(), MilError::NotPositive);
    }

    #[test]
    fn prenex_pulls_quantifiers() {
        let b = PredSymbol::new("b", "Task", VarKind::Port);
        let fp = PredSymbol::new("f", "Task", VarKind::Port);
        let phi = MilFormula::or([
            MilFormula::exists(task_var("i"), MilFormula::pred(b, task_var("i"))),
            MilFormula::exists(task_var("j"), MilFormula::pred(fp, task_var("j"))),
        ]);
        let p = prenex(&phi).unwrap();
        assert!(is_prenex(&p));
        let (prefix, _) = prenex_parts(&phi).unwrap();
        assert_eq!(prefix.len(), 2);
        assert!(prefix.iter().all(|(q, _)| *q == Quantifier::Exists));
    }

    #[test]
    fn prenex_negated_exists_becomes_forall() {
        let w = task_pred("w");
        let phi = MilFormula::not(MilFormula::exists(
            task_var("i"),
            MilFormula::pred(w, task_var("i")),
        ));
        let (prefix, matrix) = prenex_parts(&phi).unwrap();
        assert_eq!(prefix.len(), 1);
        assert_eq!(prefix[0].0, Quantifier::Forall);
        assert!(matches!(matrix, MilFormula::Not(_)));
    }

    #[test]
    fn prenex_preserves_models() {
        let w = task_pred("w");
        let u = task_pred("u");
        let phi = MilFormula::forall(
            task_var("i"),
            MilFormula::implies(
                MilFormula::pred(w.clone(), task_var("i")),
                MilFormula::exists(task_var("j"), MilFormula::pred(u.clone(), task_var("j"))),
            ),
        );
        let p = prenex(&phi).unwrap();
        assert!(is_prenex(&p));
        let preds: BTreeSet<_> = [w, u].into();
        for sizes in size_maps(&["Task".to_string()], 3) {
            let space = StructureSpace::new(&preds, &sizes, &lim()).unwrap();
            for st in space.iter() {
                assert_eq!(eval_mil(&phi, &st).unwrap(), eval_mil(&p, &st).unwrap());
            }
        }
    }

    #[test]
    fn structure_counts() {
        let p = task_pred("p");
        let q = task_pred("q");
        let one = enumerate_structures(
            &[p.clone()].into(),
            &BTreeMap::from([("Task".into(), 1)]),
            &lim(),
        )
        .unwrap();
        assert_eq!(one.len(), 2);
        let two = enumerate_structures(
            &[p, q].into(),
            &BTreeMap::from([("Task".into(), 2)]),
            &lim(),
        )
        .unwrap();
        assert_eq!(two.len(), 16);
    }

    #[test]
    fn minimal_models_correspond_through_unfolding() {
        // Pointwise-minimal structures of a sentence map exactly onto the
        // subset-minimal valuations of its unfolding.
        let w = task_pred("w");
        let u = task_pred("u");
        let phi = MilFormula::and([
            MilFormula::exists(task_var("i"), MilFormula::pred(w.clone(), task_var("i"))),
            MilFormula::forall(
                task_var("j"),
                MilFormula::or([
                    MilFormula::pred(w.clone(), task_var("j")),
                    MilFormula::pred(u.clone(), task_var("j")),
                ]),
            ),
        ]);
        let preds: BTreeSet<_> = [w, u].into();
        for sizes in size_maps(&["Task".to_string()], 3) {
            let space = StructureSpace::new(&preds, &sizes, &lim()).unwrap();
            let min_structs: BTreeSet<_> = minimal_structures(&space, |st| eval_mil(&phi, st))
                .unwrap()
                .into_iter()
                .map(|st| st.to_valuation(&preds))
                .collect();
            let unfolded = unfold(&phi, &sizes).unwrap();
            let universe: BTreeSet<_> = space.get(0).to_valuation(&preds).universe().clone();
            let min_vals: BTreeSet<_> = prop::min_models(&unfolded, &universe, &lim())
                .unwrap()
                .into_iter()
                .collect();
            assert_eq!(min_structs, min_vals, "sizes {sizes:?}");
        }
    }

    #[test]
    fn unfolding_correspondence_on_samples() {
        // I |= phi  iff  beta_I |= unfold(phi), checked exhaustively.
        let w = task_pred("w");
        let u = task_pred("u");
        let phi = MilFormula::forall(
            task_var("i"),
            MilFormula::or([
                MilFormula::pred(w.clone(), task_var("i")),
                MilFormula::pred(u.clone(), task_var("i")),
            ]),
        );
        let preds: BTreeSet<_> = [w, u].into();
        for sizes in size_maps(&["Task".to_string()], 3) {
            let unfolded = unfold(&phi, &sizes).unwrap();
            let space = StructureSpace::new(&preds, &sizes, &lim()).unwrap();
            for st in space.iter() {
                let val = st.to_valuation(&preds);
                assert_eq!(
                    eval_mil(&phi, &st).unwrap(),
                    unfolded.eval(&val).unwrap(),
                    "mismatch at {st}"
                );
            }
        }
    }
}
