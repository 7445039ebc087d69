//! The verification subject: component types, interaction clauses, bounded
//! and parametric systems, and the generation of trap constraints, initial
//! conditions and deadlock conditions in both logics.

use crate::mil::{unfold, IndexVar, MilError, MilFormula, PredSymbol};
use crate::prop::{BoolFormula, BoolVar, FormulaError, VarKind};
use crate::Limits;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SystemError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Mil(#[from] MilError),
    #[error(transparent)]
    Formula(#[from] FormulaError),
}

fn invalid(msg: impl Into<String>) -> SystemError {
    SystemError::Invalid(msg.into())
}

/// One transition `from -port-> to` of a component type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub from: String,
    pub port: String,
    pub to: String,
}

/// A finite automaton template with ports labeling its transitions.
/// Each port labels at most one transition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentType {
    pub name: String,
    pub ports: Vec<String>,
    pub states: Vec<String>,
    pub initial: String,
    pub transitions: Vec<Transition>,
}

impl ComponentType {
    pub fn validate(&self) -> Result<(), SystemError> {
        let states: BTreeSet<&String> = self.states.iter().collect();
        let ports: BTreeSet<&String> = self.ports.iter().collect();
        if states.len() != self.states.len() {
            return Err(invalid(format!("duplicate state in `{}`", self.name)));
        }
        if ports.len() != self.ports.len() {
            return Err(invalid(format!("duplicate port in `{}`", self.name)));
        }
        if let Some(clash) = self.ports.iter().find(|p| states.contains(p)) {
            return Err(invalid(format!(
                "`{clash}` is both a port and a state of `{}`",
                self.name
            )));
        }
        if !states.contains(&self.initial) {
            return Err(invalid(format!(
                "initial state `{}` is not a state of `{}`",
                self.initial, self.name
            )));
        }
        let mut seen_ports = BTreeSet::new();
        for t in &self.transitions {
            if !states.contains(&t.from) || !states.contains(&t.to) {
                return Err(invalid(format!(
                    "transition endpoints `{}`/`{}` outside the states of `{}`",
                    t.from, t.to, self.name
                )));
            }
            if !ports.contains(&t.port) {
                return Err(invalid(format!(
                    "transition port `{}` is not a port of `{}`",
                    t.port, self.name
                )));
            }
            if !seen_ports.insert(&t.port) {
                return Err(invalid(format!(
                    "port `{}` labels two transitions of `{}`",
                    t.port, self.name
                )));
            }
        }
        Ok(())
    }

    /// The pre- and post-state of a port: the endpoints of its unique
    /// transition, or nothing when the port labels no transition.
    pub fn pre_post(&self, port: &str) -> Option<(&str, &str)> {
        self.transitions
            .iter()
            .find(|t| t.port == port)
            .map(|t| (t.from.as_str(), t.to.as_str()))
    }

    pub fn port_pred(&self, port: &str) -> PredSymbol {
        PredSymbol::new(port, self.name.clone(), VarKind::Port)
    }

    pub fn state_pred(&self, state: &str) -> PredSymbol {
        PredSymbol::new(state, self.name.clone(), VarKind::State)
    }
}

/// Equality or disequality literal between two clause variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EqLit {
    pub left: IndexVar,
    pub right: IndexVar,
    pub equal: bool,
}

impl EqLit {
    pub fn to_mil(&self) -> MilFormula {
        if self.equal {
            MilFormula::eq(self.left.clone(), self.right.clone())
        } else {
            MilFormula::neq(self.left.clone(), self.right.clone())
        }
    }
}

/// Broadcast part of an interaction clause: all instances of the variable's
/// type satisfying the guard fire `port`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Broadcast {
    pub var: IndexVar,
    pub guard: Vec<EqLit>,
    pub port: String,
}

/// One interaction clause: a multiparty rendezvous of the quantified
/// instances, guarded by (dis)equalities, plus optional broadcasts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionClause {
    pub rendezvous: Vec<(IndexVar, String)>,
    pub guard: Vec<EqLit>,
    pub broadcasts: Vec<Broadcast>,
}

impl InteractionClause {
    /// The clause as a sentence: exists the rendezvous variables, the guard
    /// and port atoms, and one guarded universal per broadcast.
    pub fn to_mil(&self, types: &BTreeMap<String, ComponentType>) -> MilFormula {
        let mut body: Vec<MilFormula> = self.guard.iter().map(EqLit::to_mil).collect();
        for (var, port) in &self.rendezvous {
            let ty = &types[var.component_type()];
            body.push(MilFormula::pred(ty.port_pred(port), var.clone()));
        }
        for bc in &self.broadcasts {
            let ty = &types[bc.var.component_type()];
            let guard = MilFormula::and(bc.guard.iter().map(EqLit::to_mil));
            body.push(MilFormula::forall(
                bc.var.clone(),
                MilFormula::implies(
                    guard,
                    MilFormula::pred(ty.port_pred(&bc.port), bc.var.clone()),
                ),
            ));
        }
        let mut out = MilFormula::and(body);
        for (var, _) in self.rendezvous.iter().rev() {
            out = MilFormula::exists(var.clone(), out);
        }
        out
    }
}

/// Declared number of instances of one component type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceCount {
    Literal(usize),
    /// Unbounded, with a deployment floor: the system is considered for
    /// every instance count at or above `min`.
    Param {
        min: usize,
    },
}

/// A parsed system before mode selection: component types, per-type
/// instance counts and the interaction clauses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemDef {
    pub name: String,
    pub types: Vec<ComponentType>,
    pub counts: BTreeMap<String, InstanceCount>,
    pub clauses: Vec<InteractionClause>,
}

impl SystemDef {
    pub fn validate(&self) -> Result<(), SystemError> {
        let mut preds: BTreeSet<&String> = BTreeSet::new();
        for ty in &self.types {
            ty.validate()?;
            for name in ty.ports.iter().chain(ty.states.iter()) {
                if !preds.insert(name) {
                    return Err(invalid(format!(
                        "name `{name}` is shared between component types"
                    )));
                }
            }
        }
        for ty in &self.types {
            if !self.counts.contains_key(&ty.name) {
                return Err(invalid(format!("no instance count for `{}`", ty.name)));
            }
        }
        for (name, count) in &self.counts {
            if self.type_named(name).is_none() {
                return Err(invalid(format!("instance count for unknown type `{name}`")));
            }
            match count {
                InstanceCount::Literal(0) => {
                    return Err(invalid(format!(
                        "type `{name}` must have at least 1 instance"
                    )))
                }
                InstanceCount::Param { min: 0 } => {
                    return Err(invalid(format!(
                        "parametric type `{name}` must have a minimum of at least 1"
                    )))
                }
                _ => {}
            }
        }
        for clause in &self.clauses {
            self.validate_clause(clause)?;
        }
        Ok(())
    }

    fn validate_clause(&self, clause: &InteractionClause) -> Result<(), SystemError> {
        if clause.rendezvous.is_empty() {
            return Err(invalid(
                "interaction clause needs at least one rendezvous port",
            ));
        }
        let mut scope: BTreeSet<&IndexVar> = BTreeSet::new();
        for (var, port) in &clause.rendezvous {
            let ty = self.type_named(var.component_type()).ok_or_else(|| {
                invalid(format!("unknown component type `{}`", var.component_type()))
            })?;
            if !ty.ports.contains(port) {
                return Err(invalid(format!(
                    "port `{port}` is not a port of `{}`",
                    ty.name
                )));
            }
            if !scope.insert(var) {
                return Err(invalid(format!(
                    "variable `{}` bound twice in one clause",
                    var.name()
                )));
            }
        }
        let check_lit = |lit: &EqLit, scope: &BTreeSet<&IndexVar>| -> Result<(), SystemError> {
            for v in [&lit.left, &lit.right] {
                if !scope.contains(v) {
                    return Err(invalid(format!("unbound variable `{}` in guard", v.name())));
                }
            }
            if lit.left.component_type() != lit.right.component_type() {
                return Err(invalid(format!(
                    "guard compares `{}` and `{}` of different types",
                    lit.left.name(),
                    lit.right.name()
                )));
            }
            Ok(())
        };
        for lit in &clause.guard {
            check_lit(lit, &scope)?;
        }
        for bc in &clause.broadcasts {
            let ty = self.type_named(bc.var.component_type()).ok_or_else(|| {
                invalid(format!(
                    "unknown component type `{}`",
                    bc.var.component_type()
                ))
            })?;
            if !ty.ports.contains(&bc.port) {
                return Err(invalid(format!(
                    "port `{}` is not a port of `{}`",
                    bc.port, ty.name
                )));
            }
            let mut bc_scope = scope.clone();
            if !bc_scope.insert(&bc.var) {
                return Err(invalid(format!(
                    "broadcast variable `{}` shadows a rendezvous variable",
                    bc.var.name()
                )));
            }
            for lit in &bc.guard {
                check_lit(lit, &bc_scope)?;
            }
        }
        Ok(())
    }

    pub fn type_named(&self, name: &str) -> Option<&ComponentType> {
        self.types.iter().find(|t| t.name == name)
    }

    pub fn types_map(&self) -> BTreeMap<String, ComponentType> {
        self.types
            .iter()
            .map(|t| (t.name.clone(), t.clone()))
            .collect()
    }

    pub fn is_bounded(&self) -> bool {
        self.counts
            .values()
            .all(|c| matches!(c, InstanceCount::Literal(_)))
    }

    /// The deployment floor per type: declared literals, or the parametric
    /// minimum.
    pub fn min_sizes(&self) -> BTreeMap<String, usize> {
        self.counts
            .iter()
            .map(|(name, c)| {
                let n = match c {
                    InstanceCount::Literal(n) => *n,
                    InstanceCount::Param { min } => *min,
                };
                (name.clone(), n)
            })
            .collect()
    }

    /// The interaction formula: the disjunction of the clauses.
    pub fn interaction_mil(&self) -> MilFormula {
        let types = self.types_map();
        MilFormula::or(self.clauses.iter().map(|c| c.to_mil(&types)))
    }

    /// Concrete instance counts for the bounded modes: declared literals,
    /// with `overrides` supplying (or replacing) parametric counts.
    pub fn concrete_sizes(
        &self,
        overrides: &BTreeMap<String, usize>,
    ) -> Result<BTreeMap<String, usize>, SystemError> {
        for name in overrides.keys() {
            if self.type_named(name).is_none() {
                return Err(invalid(format!(
                    "instance override for unknown type `{name}`"
                )));
            }
        }
        let mut sizes = BTreeMap::new();
        for (name, count) in &self.counts {
            let n = match (count, overrides.get(name)) {
                (_, Some(&n)) => n,
                (InstanceCount::Literal(n), None) => *n,
                (InstanceCount::Param { .. }, None) => {
                    return Err(invalid(format!(
                        "parametric type `{name}` needs an instance count (use --n {name}=K)"
                    )))
                }
            };
            if n == 0 {
                return Err(invalid(format!(
                    "type `{name}` must have at least 1 instance"
                )));
            }
            sizes.insert(name.clone(), n);
        }
        Ok(sizes)
    }

    /// Unfold into a bounded system at concrete sizes.
    pub fn to_bounded(
        &self,
        overrides: &BTreeMap<String, usize>,
    ) -> Result<BoundedSystem, SystemError> {
        let sizes = self.concrete_sizes(overrides)?;
        let interaction = unfold(&self.interaction_mil(), &sizes)?;
        debug_assert!(interaction.is_positive());
        Ok(BoundedSystem {
            name: self.name.clone(),
            types: self.types.clone(),
            sizes,
            interaction,
        })
    }

    /// The trap constraint: for every clause, whenever some pre-state of a
    /// participating port is in the candidate set, some post-state is too.
    pub fn trap_constraint_param(&self) -> MilFormula {
        MilFormula::and(self.clauses.iter().map(|c| self.clause_trap(c)))
    }

    fn clause_trap(&self, clause: &InteractionClause) -> MilFormula {
        let pre_side = self.clause_side(clause, true);
        let post_side = self.clause_side(clause, false);
        let guard = MilFormula::and(clause.guard.iter().map(EqLit::to_mil));
        let mut body = MilFormula::implies(MilFormula::and([guard, pre_side]), post_side);
        for (var, _) in clause.rendezvous.iter().rev() {
            body = MilFormula::forall(var.clone(), body);
        }
        body
    }

    /// Disjunction of pre- (or post-) state atoms over the rendezvous ports
    /// and guarded existentials over the broadcast ports. Ports without a
    /// transition contribute nothing.
    fn clause_side(&self, clause: &InteractionClause, pre: bool) -> MilFormula {
        let mut parts = Vec::new();
        for (var, port) in &clause.rendezvous {
            let ty = self.type_named(var.component_type()).expect("validated");
            if let Some((from, to)) = ty.pre_post(port) {
                let state = if pre { from } else { to };
                parts.push(MilFormula::pred(ty.state_pred(state), var.clone()));
            }
        }
        for bc in &clause.broadcasts {
            let ty = self.type_named(bc.var.component_type()).expect("validated");
            if let Some((from, to)) = ty.pre_post(&bc.port) {
                let state = if pre { from } else { to };
                let guard = MilFormula::and(bc.guard.iter().map(EqLit::to_mil));
                parts.push(MilFormula::exists(
                    bc.var.clone(),
                    MilFormula::and([
                        guard,
                        MilFormula::pred(ty.state_pred(state), bc.var.clone()),
                    ]),
                ));
            }
        }
        MilFormula::or(parts)
    }

    /// Some instance of some type is in its initial state.
    pub fn init_param(&self) -> MilFormula {
        MilFormula::or(self.types.iter().map(|ty| {
            let var = IndexVar::new(format!("i_{}", ty.name), ty.name.clone());
            MilFormula::exists(
                var.clone(),
                MilFormula::pred(ty.state_pred(&ty.initial), var),
            )
        }))
    }

    /// Configurations in which every clause is disabled: for all choices of
    /// rendezvous instances satisfying the guard, some participant is out of
    /// its pre-state or some broadcast target is.
    pub fn deadlock_param(&self) -> MilFormula {
        MilFormula::and(self.clauses.iter().map(|c| self.clause_deadlock(c)))
    }

    fn clause_deadlock(&self, clause: &InteractionClause) -> MilFormula {
        let mut parts = Vec::new();
        for (var, port) in &clause.rendezvous {
            let ty = self.type_named(var.component_type()).expect("validated");
            if let Some((from, _)) = ty.pre_post(port) {
                parts.push(MilFormula::not(MilFormula::pred(
                    ty.state_pred(from),
                    var.clone(),
                )));
            }
        }
        for bc in &clause.broadcasts {
            let ty = self.type_named(bc.var.component_type()).expect("validated");
            if let Some((from, _)) = ty.pre_post(&bc.port) {
                let guard = MilFormula::and(bc.guard.iter().map(EqLit::to_mil));
                parts.push(MilFormula::exists(
                    bc.var.clone(),
                    MilFormula::and([
                        guard,
                        MilFormula::not(MilFormula::pred(ty.state_pred(from), bc.var.clone())),
                    ]),
                ));
            }
        }
        let guard = MilFormula::and(clause.guard.iter().map(EqLit::to_mil));
        let mut body = MilFormula::implies(guard, MilFormula::or(parts));
        for (var, _) in clause.rendezvous.iter().rev() {
            body = MilFormula::forall(var.clone(), body);
        }
        body
    }
}

/// A system with a known number of instances per type; the interaction
/// formula is propositional and positive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundedSystem {
    pub name: String,
    pub types: Vec<ComponentType>,
    pub sizes: BTreeMap<String, usize>,
    pub interaction: BoolFormula,
}

impl BoundedSystem {
    pub fn type_named(&self, name: &str) -> Option<&ComponentType> {
        self.types.iter().find(|t| t.name == name)
    }

    /// State variables of all instances, in declaration order.
    pub fn state_vars(&self) -> Vec<BoolVar> {
        let mut out = Vec::new();
        for ty in &self.types {
            let n = self.sizes[&ty.name];
            for idx in 1..=n {
                for state in &ty.states {
                    out.push(ty.state_pred(state).at_instance(idx));
                }
            }
        }
        out
    }

    /// Port variables of all instances.
    pub fn port_vars(&self) -> Vec<BoolVar> {
        let mut out = Vec::new();
        for ty in &self.types {
            let n = self.sizes[&ty.name];
            for idx in 1..=n {
                for port in &ty.ports {
                    out.push(ty.port_pred(port).at_instance(idx));
                }
            }
        }
        out
    }

    /// Pre- and post-state variables of an instanced port variable.
    fn pre_post_vars(&self, port_var: &BoolVar) -> Option<(BoolVar, BoolVar)> {
        let (ty_name, idx) = port_var.origin()?;
        let ty = self.type_named(ty_name)?;
        let port = ty
            .ports
            .iter()
            .find(|p| port_var.name() == format!("{p}({idx})"))?;
        let (from, to) = ty.pre_post(port)?;
        Some((
            ty.state_pred(from).at_instance(idx),
            ty.state_pred(to).at_instance(idx),
        ))
    }

    /// Interaction minterms: the minimal DNF of the positive interaction
    /// formula, one port set per allowed synchronization.
    pub fn interaction_minterms(&self, limits: &Limits) -> Result<Vec<Vec<BoolVar>>, SystemError> {
        let dnf = crate::prop::to_dnf(&self.interaction, limits)?;
        Ok(dnf
            .minimal_minterms()
            .minterms()
            .map(|m| m.positive_vars().cloned().collect())
            .collect())
    }

    /// The trap constraint: one implication per interaction, from the
    /// disjunction of pre-states to the disjunction of post-states.
    pub fn trap_constraint_bounded(&self, limits: &Limits) -> Result<BoolFormula, SystemError> {
        let mut conjuncts = Vec::new();
        for ports in self.interaction_minterms(limits)? {
            let mut pres = Vec::new();
            let mut posts = Vec::new();
            for pv in &ports {
                if let Some((pre, post)) = self.pre_post_vars(pv) {
                    pres.push(BoolFormula::var(pre));
                    posts.push(BoolFormula::var(post));
                }
            }
            conjuncts.push(BoolFormula::implies(
                BoolFormula::or(pres),
                BoolFormula::or(posts),
            ));
        }
        Ok(BoolFormula::and(conjuncts))
    }

    /// Disjunction of the initial-state variables of all instances.
    pub fn init_bounded(&self) -> BoolFormula {
        let mut parts = Vec::new();
        for ty in &self.types {
            let n = self.sizes[&ty.name];
            for idx in 1..=n {
                parts.push(BoolFormula::var(
                    ty.state_pred(&ty.initial).at_instance(idx),
                ));
            }
        }
        BoolFormula::or(parts)
    }

    /// Configurations disabling every interaction: per interaction, some
    /// participant is out of its pre-state.
    pub fn deadlock_bounded(&self, limits: &Limits) -> Result<BoolFormula, SystemError> {
        let mut conjuncts = Vec::new();
        for ports in self.interaction_minterms(limits)? {
            let mut parts = Vec::new();
            for pv in &ports {
                if let Some((pre, _)) = self.pre_post_vars(pv) {
                    parts.push(BoolFormula::not(BoolFormula::var(pre)));
                }
            }
            conjuncts.push(BoolFormula::or(parts));
        }
        Ok(BoolFormula::and(conjuncts))
    }
}
