//! Explicit-state ground truth for bounded systems.
//!
//! A bounded system maps to a 1-safe marked Petri net: one place per
//! (instance, state), one transition per minimal model of the interaction
//! formula. Everything here is exact and brute-force by design; it backs
//! the `--mode exact` verifier and serves as the oracle for the symbolic
//! route. Markings are bitsets over a fixed place order (component type,
//! then instance, then state declaration order).

use crate::prop::{min_models, BoolFormula, BoolVar, FormulaError};
use crate::system::{BoundedSystem, SystemError};
use crate::{exec, Limits};
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PetriError {
    #[error("net has {places} places, above the cap of {cap} for trap enumeration")]
    PlaceBound { places: usize, cap: usize },
    #[error("net has {places} places, above the representable maximum of 64")]
    TooManyPlaces { places: usize },
    #[error("reachability exceeded the cap of {cap} markings")]
    MarkingBound { cap: usize },
    #[error("net is not 1-safe: firing `{transition}` duplicates a token in `{place}`")]
    NotOneSafe { transition: String, place: String },
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error(transparent)]
    System(#[from] SystemError),
}

/// A place: one state of one component instance.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Place {
    pub component_type: String,
    pub instance: usize,
    pub state: String,
}

impl Place {
    pub fn var(&self, system: &BoundedSystem) -> BoolVar {
        system
            .type_named(&self.component_type)
            .expect("place type")
            .state_pred(&self.state)
            .at_instance(self.instance)
    }
}

/// A net transition with bitset pre/post sets over the place order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetTransition {
    pub label: String,
    pub pre: u64,
    pub post: u64,
}

/// Marking as a bitset over the net's place order.
pub type Marking = u64;

/// Reachable markings plus the predecessor edge of each discovered one.
type Exploration = (BTreeSet<Marking>, HashMap<Marking, (Marking, String)>);

#[derive(Debug, Clone)]
pub struct PetriNet {
    pub places: Vec<Place>,
    pub transitions: Vec<NetTransition>,
    pub initial: Marking,
    place_index: BTreeMap<BoolVar, usize>,
    system: BoundedSystem,
}

impl PetriNet {
    pub fn place_count(&self) -> usize {
        self.places.len()
    }

    pub fn marking_places(&self, m: Marking) -> Vec<&Place> {
        self.places
            .iter()
            .enumerate()
            .filter(|(i, _)| m & (1 << i) != 0)
            .map(|(_, p)| p)
            .collect()
    }

    pub fn render_marking(&self, m: Marking) -> String {
        let names: Vec<String> = self
            .marking_places(m)
            .iter()
            .map(|p| p.var(&self.system).name().to_string())
            .collect();
        format!("{{{}}}", names.join(", "))
    }

    /// The valuation over the state variables induced by a marking.
    pub fn marking_valuation(&self, m: Marking) -> crate::prop::Valuation {
        let universe: Vec<BoolVar> = self.place_index.keys().cloned().collect();
        let true_vars: Vec<BoolVar> = self
            .marking_places(m)
            .iter()
            .map(|p| p.var(&self.system))
            .collect();
        crate::prop::Valuation::new(universe, true_vars)
    }

    /// The marking encoded by a set of state variables, ignoring variables
    /// outside the net.
    pub fn marking_of_vars<'a>(&self, vars: impl IntoIterator<Item = &'a BoolVar>) -> Marking {
        let mut m = 0u64;
        for v in vars {
            if let Some(&i) = self.place_index.get(v) {
                m |= 1 << i;
            }
        }
        m
    }

    fn enabled(&self, m: Marking, t: &NetTransition) -> bool {
        m & t.pre == t.pre
    }

    fn fire(&self, m: Marking, t: &NetTransition) -> Result<Marking, PetriError> {
        let cleared = m & !t.pre;
        if cleared & t.post != 0 {
            let clash = (cleared & t.post).trailing_zeros() as usize;
            return Err(PetriError::NotOneSafe {
                transition: t.label.clone(),
                place: self.places[clash].state.clone(),
            });
        }
        Ok(cleared | t.post)
    }

    pub fn is_deadlock(&self, m: Marking) -> bool {
        !self.transitions.iter().any(|t| self.enabled(m, t))
    }

    /// Exact reachability set by breadth-first exploration, asserting
    /// 1-safety along the way.
    pub fn reachable(&self, limits: &Limits) -> Result<BTreeSet<Marking>, PetriError> {
        Ok(self.explore(limits)?.0)
    }

    fn explore(&self, limits: &Limits) -> Result<Exploration, PetriError> {
        let mut seen: BTreeSet<Marking> = BTreeSet::new();
        let mut parents: HashMap<Marking, (Marking, String)> = HashMap::new();
        let mut queue = VecDeque::new();
        seen.insert(self.initial);
        queue.push_back(self.initial);
        while let Some(m) = queue.pop_front() {
            for t in &self.transitions {
                if !self.enabled(m, t) {
                    continue;
                }
                let next = self.fire(m, t)?;
                if seen.insert(next) {
                    if seen.len() > limits.reach_markings {
                        return Err(PetriError::MarkingBound {
                            cap: limits.reach_markings,
                        });
                    }
                    parents.insert(next, (m, t.label.clone()));
                    queue.push_back(next);
                }
            }
        }
        Ok((seen, parents))
    }

    /// Reachable deadlock markings.
    pub fn deadlocks(&self, limits: &Limits) -> Result<BTreeSet<Marking>, PetriError> {
        Ok(self
            .reachable(limits)?
            .into_iter()
            .filter(|&m| self.is_deadlock(m))
            .collect())
    }

    /// Exact deadlock-freedom verdict with a witness trace to the first
    /// reachable deadlock when one exists.
    pub fn deadlock_free_exact(&self, limits: &Limits) -> Result<Option<Vec<String>>, PetriError> {
        let (reachable, parents) = self.explore(limits)?;
        let dead = reachable.iter().copied().find(|&m| self.is_deadlock(m));
        match dead {
            None => Ok(None),
            Some(mut m) => {
                let mut steps = vec![format!("deadlock {}", self.render_marking(m))];
                while let Some((prev, label)) = parents.get(&m) {
                    steps.push(format!("fire {} at {}", label, self.render_marking(*prev)));
                    m = *prev;
                }
                steps.reverse();
                Ok(Some(steps))
            }
        }
    }

    /// All traps: place sets whose consuming transitions all feed them.
    pub fn traps(&self, limits: &Limits) -> Result<Vec<u64>, PetriError> {
        self.traps_impl(limits, true)
    }

    /// Sequential twin of [`PetriNet::traps`] for the benchmark suite.
    pub fn traps_seq(&self, limits: &Limits) -> Result<Vec<u64>, PetriError> {
        self.traps_impl(limits, false)
    }

    fn traps_impl(&self, limits: &Limits, parallel: bool) -> Result<Vec<u64>, PetriError> {
        let n = self.places.len();
        // 62 keeps the subset masks inside u64 whatever the cap says.
        let cap = limits.trap_places.min(62);
        if n > cap {
            return Err(PetriError::PlaceBound { places: n, cap });
        }
        // post(W) subseteq pre(W) over transitions, phrased per transition:
        // any t consuming from W must also produce into W.
        let tests: Vec<(u64, u64)> = self.transitions.iter().map(|t| (t.pre, t.post)).collect();
        let accept = move |w: u64| -> Option<u64> {
            tests
                .iter()
                .all(|&(pre, post)| w & pre == 0 || w & post != 0)
                .then_some(w)
        };
        let total = 1u64 << n;
        let found = if parallel {
            exec::filter_map_range(total, accept)
        } else {
            exec::filter_map_range_seq(total, accept)
        };
        Ok(found)
    }

    /// Traps containing an initially marked place.
    pub fn marked_traps(&self, limits: &Limits) -> Result<Vec<u64>, PetriError> {
        Ok(self
            .traps(limits)?
            .into_iter()
            .filter(|w| *w != 0 && w & self.initial != 0)
            .collect())
    }

    /// Marked traps with no strict marked-trap subset.
    pub fn minimal_marked_traps(&self, limits: &Limits) -> Result<Vec<u64>, PetriError> {
        let marked = self.marked_traps(limits)?;
        Ok(marked
            .iter()
            .copied()
            .filter(|&w| !marked.iter().any(|&other| other != w && other & w == other))
            .collect())
    }

    /// The exact trap invariant: every minimal marked trap keeps a token.
    pub fn trap_invariant_exact(&self, limits: &Limits) -> Result<BoolFormula, PetriError> {
        let traps = self.minimal_marked_traps(limits)?;
        Ok(BoolFormula::and(traps.into_iter().map(|w| {
            BoolFormula::or(
                self.marking_places(w)
                    .iter()
                    .map(|p| BoolFormula::var(p.var(&self.system))),
            )
        })))
    }

    /// GraphViz rendering of the net structure.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph net {\n  rankdir=LR;\n");
        for (i, p) in self.places.iter().enumerate() {
            let marked = if self.initial & (1 << i) != 0 {
                ", style=filled, fillcolor=gray85"
            } else {
                ""
            };
            let _ = writeln!(
                out,
                "  p{i} [label=\"{}\", shape=circle{marked}];",
                p.var(&self.system).name()
            );
        }
        for (j, t) in self.transitions.iter().enumerate() {
            let _ = writeln!(out, "  t{j} [label=\"{}\", shape=box];", t.label);
            for i in 0..self.places.len() {
                if t.pre & (1 << i) != 0 {
                    let _ = writeln!(out, "  p{i} -> t{j};");
                }
                if t.post & (1 << i) != 0 {
                    let _ = writeln!(out, "  t{j} -> p{i};");
                }
            }
        }
        out.push_str("}\n");
        out
    }

    /// GraphViz rendering of the reachability graph.
    pub fn reachability_dot(&self, limits: &Limits) -> Result<String, PetriError> {
        let reachable = self.reachable(limits)?;
        let index: BTreeMap<Marking, usize> =
            reachable.iter().enumerate().map(|(i, &m)| (m, i)).collect();
        let mut out = String::from("digraph reach {\n");
        for (&m, &i) in &index {
            let shape = if self.is_deadlock(m) {
                ", shape=doublecircle"
            } else {
                ""
            };
            let _ = writeln!(out, "  m{i} [label=\"{}\"{shape}];", self.render_marking(m));
        }
        for (&m, &i) in &index {
            for t in &self.transitions {
                if self.enabled(m, t) {
                    let next = self.fire(m, t)?;
                    let _ = writeln!(out, "  m{i} -> m{} [label=\"{}\"];", index[&next], t.label);
                }
            }
        }
        out.push_str("}\n");
        Ok(out)
    }
}

/// Build the 1-safe marked net of a bounded system: places are the states
/// of all instances, transitions the minimal models of the interaction
/// formula, the initial marking the initial states of all instances.
pub fn build_pn(system: &BoundedSystem, limits: &Limits) -> Result<PetriNet, PetriError> {
    let mut places = Vec::new();
    for ty in &system.types {
        let n = system.sizes[&ty.name];
        for instance in 1..=n {
            for state in &ty.states {
                places.push(Place {
                    component_type: ty.name.clone(),
                    instance,
                    state: state.clone(),
                });
            }
        }
    }
    if places.len() > 64 {
        return Err(PetriError::TooManyPlaces {
            places: places.len(),
        });
    }
    let place_index: BTreeMap<BoolVar, usize> = places
        .iter()
        .enumerate()
        .map(|(i, p)| (p.var(system), i))
        .collect();

    let ports: BTreeSet<BoolVar> = system.port_vars().into_iter().collect();
    let models = min_models(&system.interaction, &ports, limits)?;
    let mut transitions = Vec::new();
    for model in models {
        let fired: Vec<&BoolVar> = model.true_vars().iter().collect();
        let mut pre = 0u64;
        let mut post = 0u64;
        for port_var in &fired {
            let (ty_name, idx) = port_var.origin().expect("instanced port variable");
            let ty = system.type_named(ty_name).expect("port type");
            let port = ty
                .ports
                .iter()
                .find(|p| port_var.name() == format!("{p}({idx})"))
                .expect("port name");
            if let Some((from, to)) = ty.pre_post(port) {
                pre |= 1 << place_index[&ty.state_pred(from).at_instance(idx)];
                post |= 1 << place_index[&ty.state_pred(to).at_instance(idx)];
            }
        }
        let label = fired
            .iter()
            .map(|v| v.name().to_string())
            .collect::<Vec<_>>()
            .join("+");
        transitions.push(NetTransition { label, pre, post });
    }
    transitions.sort_by(|a, b| a.label.cmp(&b.label));

    let mut initial = 0u64;
    for ty in &system.types {
        let n = system.sizes[&ty.name];
        for idx in 1..=n {
            initial |= 1 << place_index[&ty.state_pred(&ty.initial).at_instance(idx)];
        }
    }
    Ok(PetriNet {
        places,
        transitions,
        initial,
        place_index,
        system: system.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_system;
    use crate::prop::{dualize, equivalent, positivate, BoolFormula as F};

    fn lim() -> Limits {
        Limits::default()
    }

    fn mutex_net(tasks: usize) -> (crate::system::BoundedSystem, PetriNet) {
        let text = format!(
            r#"
            component Task {{ ports b, f; states w init, u; trans w -b-> u; trans u -f-> w; }}
            component Semaphore {{ ports a, e; states r init, s; trans r -a-> s; trans s -e-> r; }}
            system mutex {{
              instances Semaphore: 1;
              instances Task: {tasks};
              interaction exists i:Semaphore, j:Task . a(i) and b(j);
              interaction exists i:Semaphore, j:Task . e(i) and f(j);
            }}
        "#
        );
        let def = parse_system(&text).unwrap();
        let bounded = def.to_bounded(&BTreeMap::new()).unwrap();
        let net = build_pn(&bounded, &lim()).unwrap();
        (bounded, net)
    }

    fn sync2_net(n: usize) -> PetriNet {
        let text = format!(
            r#"
            component Worker {{ ports b, f; states w init, u; trans w -b-> u; trans u -f-> w; }}
            system sync2 {{
              instances Worker: {n};
              interaction exists i1:Worker, i2:Worker . i1 != i2 and b(i1) and b(i2);
              interaction exists i:Worker . f(i) with forall j:Worker . j != i -> f(j);
            }}
        "#
        );
        let def = parse_system(&text).unwrap();
        let bounded = def.to_bounded(&BTreeMap::new()).unwrap();
        build_pn(&bounded, &lim()).unwrap()
    }

    #[test]
    fn mutex_net_shape() {
        let (_, net) = mutex_net(2);
        assert_eq!(net.place_count(), 6);
        assert_eq!(net.transitions.len(), 4);
    }

    #[test]
    fn net_without_interactions() {
        let text = r#"
            component Task { ports b; states w init, u; trans w -b-> u; }
            system lonely { instances Task: 1; }
        "#;
        let def = parse_system(text).unwrap();
        let bounded = def.to_bounded(&BTreeMap::new()).unwrap();
        let net = build_pn(&bounded, &lim()).unwrap();
        assert_eq!(net.transitions.len(), 0);
        let reach = net.reachable(&lim()).unwrap();
        assert_eq!(reach.len(), 1);
        assert!(reach.contains(&net.initial));
        // With no transitions, every initially marked nonempty subset is a
        // marked trap.
        let marked = net.marked_traps(&lim()).unwrap();
        assert_eq!(marked.len(), 2); // {w}, {w, u}
    }

    #[test]
    fn sync2_net_shape_and_reachability() {
        let net = sync2_net(3);
        assert_eq!(net.place_count(), 6);
        // Three b-pairings plus the all-f synchronization.
        assert_eq!(net.transitions.len(), 4);
        let net2 = sync2_net(2);
        let reach = net2.reachable(&lim()).unwrap();
        // {(w,w), (u,u)}
        assert_eq!(reach.len(), 2);
    }

    #[test]
    fn mutex_reachable_markings_exact() {
        let (_, net) = mutex_net(2);
        let reach = net.reachable(&lim()).unwrap();
        assert_eq!(reach.len(), 3);
        // Compare as sets of place sets rather than rendered strings to
        // avoid ordering assumptions.
        let got: BTreeSet<BTreeSet<String>> = reach
            .iter()
            .map(|&m| {
                net.marking_places(m)
                    .iter()
                    .map(|p| format!("{}({})", p.state, p.instance))
                    .collect()
            })
            .collect();
        let want: BTreeSet<BTreeSet<String>> = [
            vec!["r(1)", "w(1)", "w(2)"],
            vec!["s(1)", "u(1)", "w(2)"],
            vec!["s(1)", "w(1)", "u(2)"],
        ]
        .iter()
        .map(|v| v.iter().map(|s| s.to_string()).collect())
        .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn mutex_is_deadlock_free_exactly() {
        let (_, net) = mutex_net(2);
        assert!(net.deadlock_free_exact(&lim()).unwrap().is_none());
    }

    #[test]
    fn sync2_deadlocks_iff_odd() {
        let net3 = sync2_net(3);
        let trace = net3.deadlock_free_exact(&lim()).unwrap();
        assert!(trace.is_some());
        let net2 = sync2_net(2);
        assert!(net2.deadlock_free_exact(&lim()).unwrap().is_none());
        let net4 = sync2_net(4);
        assert!(net4.deadlock_free_exact(&lim()).unwrap().is_none());
    }

    #[test]
    fn mutex_minimal_marked_traps() {
        let (_, net) = mutex_net(2);
        let traps = net.minimal_marked_traps(&lim()).unwrap();
        let got: BTreeSet<BTreeSet<String>> = traps
            .iter()
            .map(|&w| {
                net.marking_places(w)
                    .iter()
                    .map(|p| format!("{}({})", p.state, p.instance))
                    .collect()
            })
            .collect();
        let want: BTreeSet<BTreeSet<String>> = [
            vec!["r(1)", "s(1)"],
            vec!["w(1)", "u(1)"],
            vec!["w(2)", "u(2)"],
            vec!["r(1)", "u(1)", "u(2)"],
            vec!["s(1)", "w(1)", "w(2)"],
        ]
        .iter()
        .map(|v| v.iter().map(|s| s.to_string()).collect())
        .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn trap_invariant_equals_symbolic_route() {
        // trap_invariant_exact agrees with dualize(positivate(trap & init)).
        let (bounded, net) = mutex_net(2);
        let exact = net.trap_invariant_exact(&lim()).unwrap();
        let trap = bounded.trap_constraint_bounded(&lim()).unwrap();
        let init = bounded.init_bounded();
        let pos = positivate(&F::and([trap, init]), &lim()).unwrap();
        let symbolic = dualize(&pos).unwrap();
        let universe: BTreeSet<_> = bounded.state_vars().into_iter().collect();
        assert!(equivalent(&exact, &symbolic, &universe, &lim()).unwrap());
    }

    #[test]
    fn traps_are_dynamically_invariant() {
        // Once a trap is marked, firing any transition keeps it marked.
        let (_, net) = mutex_net(2);
        let traps = net.traps(&lim()).unwrap();
        let reach = net.reachable(&lim()).unwrap();
        for &m in &reach {
            for t in &net.transitions {
                if !net.enabled(m, t) {
                    continue;
                }
                let next = net.fire(m, t).unwrap();
                for &w in &traps {
                    if m & w != 0 {
                        assert!(next & w != 0, "trap unmarked by {}", t.label);
                    }
                }
            }
        }
    }

    #[test]
    fn reachable_markings_satisfy_invariant() {
        let (_, net) = mutex_net(2);
        let invariant = net.trap_invariant_exact(&lim()).unwrap();
        for m in net.reachable(&lim()).unwrap() {
            let val = net.marking_valuation(m);
            assert!(invariant.eval(&val).unwrap());
        }
    }

    #[test]
    fn trap_constraint_models_are_exactly_marked_traps() {
        // Every satisfying valuation of trap & init encodes a marked trap
        // of the net and vice versa; minimal models encode the minimal
        // marked traps. Checked over all 2^6 valuations.
        let (bounded, net) = mutex_net(2);
        let lim = lim();
        let formula = F::and([
            bounded.trap_constraint_bounded(&lim).unwrap(),
            bounded.init_bounded(),
        ]);
        let marked: BTreeSet<u64> = net.marked_traps(&lim).unwrap().into_iter().collect();
        let vars: Vec<_> = bounded.state_vars();
        for mask in 0..(1u64 << vars.len()) {
            let true_vars: Vec<_> = vars
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, v)| v.clone())
                .collect();
            let val = crate::prop::Valuation::new(vars.iter().cloned(), true_vars.clone());
            let satisfies = formula.eval(&val).unwrap();
            let as_marking = net.marking_of_vars(true_vars.iter());
            assert_eq!(
                satisfies,
                marked.contains(&as_marking),
                "valuation {val} vs trap set"
            );
        }
        // Minimal side.
        let universe: BTreeSet<_> = vars.iter().cloned().collect();
        let min_sets: BTreeSet<u64> = min_models(&formula, &universe, &lim)
            .unwrap()
            .iter()
            .map(|m| net.marking_of_vars(m.true_vars().iter()))
            .collect();
        let min_traps: BTreeSet<u64> = net
            .minimal_marked_traps(&lim)
            .unwrap()
            .into_iter()
            .collect();
        assert_eq!(min_sets, min_traps);
    }

    #[test]
    fn traps_parallel_matches_sequential() {
        let (_, net) = mutex_net(3);
        assert_eq!(net.traps(&lim()).unwrap(), net.traps_seq(&lim()).unwrap());
    }

    #[test]
    fn place_bound_is_enforced() {
        let (_, net) = mutex_net(2);
        let mut limits = lim();
        limits.trap_places = 3;
        assert!(matches!(
            net.traps(&limits),
            Err(PetriError::PlaceBound { .. })
        ));
    }

    #[test]
    fn dot_output_mentions_every_place() {
        let (_, net) = mutex_net(2);
        let dot = net.to_dot();
        for p in &net.places {
            assert!(dot.contains(&format!("{}({})", p.state, p.instance)));
        }
        let rdot = net.reachability_dot(&lim()).unwrap();
        assert!(rdot.contains("digraph reach"));
    }
}
