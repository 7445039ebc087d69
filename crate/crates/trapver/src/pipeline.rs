//! End-to-end verification modes and the benchmark runner.
//!
//! The parametric route follows the invariant-generation flow: trap
//! constraint and initial condition, quantifier elimination, positivation,
//! dualization, conjunction with the deadlock condition, then the
//! count-vector decision procedure. The bounded routes either run the
//! propositional analogue or hand over to the exact Petri-net engine.

use crate::card::{
    card_formula_to_mil, card_sat, ppos_card, qelim, BoolTerm, Bound, CardError, CardFormula,
    CardSat, CountModel,
};
use crate::mil::{mil_dual, MilError, MilFormula};
use crate::parse::{parse_system, ParseError};
use crate::petri::{build_pn, PetriError};
use crate::prop::{dualize, is_sat, positivate, BoolFormula, FormulaError, Valuation};
use crate::smt::{emit_smtlib, SmtTheory};
use crate::system::{SystemDef, SystemError};
use crate::{exec, Limits};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Input(String),
    #[error("{stage}: {message}")]
    Stage {
        stage: &'static str,
        message: String,
        resource_cap: bool,
    },
    #[error("io error on `{path}`: {message}")]
    Io { path: String, message: String },
}

impl PipelineError {
    pub fn is_resource_cap(&self) -> bool {
        matches!(
            self,
            PipelineError::Stage {
                resource_cap: true,
                ..
            }
        )
    }
}

trait StageKind {
    fn resource_cap(&self) -> bool;
}

impl StageKind for FormulaError {
    fn resource_cap(&self) -> bool {
        matches!(
            self,
            FormulaError::DnfCap { .. } | FormulaError::EnumBound { .. }
        )
    }
}

impl StageKind for MilError {
    fn resource_cap(&self) -> bool {
        matches!(self, MilError::EnumBound { .. })
    }
}

impl StageKind for CardError {
    fn resource_cap(&self) -> bool {
        matches!(
            self,
            CardError::DnfCap { .. }
                | CardError::VocabCap { .. }
                | CardError::CompositionCap { .. }
        ) || matches!(self, CardError::Mil(e) if e.resource_cap())
    }
}

impl StageKind for PetriError {
    fn resource_cap(&self) -> bool {
        match self {
            PetriError::PlaceBound { .. }
            | PetriError::TooManyPlaces { .. }
            | PetriError::MarkingBound { .. } => true,
            PetriError::Formula(e) => e.resource_cap(),
            _ => false,
        }
    }
}

impl StageKind for SystemError {
    fn resource_cap(&self) -> bool {
        match self {
            SystemError::Formula(e) => e.resource_cap(),
            SystemError::Mil(e) => e.resource_cap(),
            SystemError::Invalid(_) => false,
        }
    }
}

fn at_stage<E: StageKind + std::fmt::Display>(
    stage: &'static str,
) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError::Stage {
        stage,
        message: e.to_string(),
        resource_cap: e.resource_cap(),
    }
}

/// Verification mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Size-independent verdict via the cardinality pipeline.
    Parametric,
    /// Propositional trap-invariant check at fixed sizes.
    Bounded,
    /// Exhaustive reachability at fixed sizes.
    Exact,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "parametric" => Ok(Mode::Parametric),
            "bounded" => Ok(Mode::Bounded),
            "exact" => Ok(Mode::Exact),
            other => Err(format!(
                "unknown mode `{other}` (expected `parametric`, `bounded` or `exact`)"
            )),
        }
    }
}

/// Satisfying witness carried by an inconclusive verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Witness {
    /// Count of instances per complete minterm and component type.
    Counts {
        counts: BTreeMap<String, BTreeMap<String, u32>>,
        rendered: String,
    },
    /// Propositional model: the variables set to true.
    Valuation { true_vars: Vec<String> },
}

impl Witness {
    fn from_counts(model: &CountModel) -> Self {
        let mut counts = BTreeMap::new();
        for (ty, (vocab, entries)) in &model.types {
            let mut per_ty = BTreeMap::new();
            for &(mask, count) in entries {
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
                    "any".into()
                } else {
                    label.join("&")
                };
                per_ty.insert(label, count);
            }
            counts.insert(ty.clone(), per_ty);
        }
        Witness::Counts {
            counts,
            rendered: format!("{model}").trim_end().to_string(),
        }
    }

    fn from_valuation(v: &Valuation) -> Self {
        Witness::Valuation {
            true_vars: v.true_vars().iter().map(|x| x.name().to_string()).collect(),
        }
    }
}

impl std::fmt::Display for Witness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Witness::Counts { rendered, .. } => f.write_str(rendered),
            Witness::Valuation { true_vars } => write!(f, "{{{}}}", true_vars.join(", ")),
        }
    }
}

/// Verification outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VerdictKind {
    /// The verification condition is unsatisfiable: no instance count
    /// admits a reachable deadlock.
    DeadlockFree,
    /// The condition is satisfiable. The method is sound but incomplete,
    /// so this is inconclusive; the witness shows the potential deadlock
    /// shape.
    Unknown(Witness),
    /// Exact exploration found no reachable deadlock.
    ExactFree,
    /// Exact exploration found a deadlock, with a firing trace.
    ExactDeadlock(Vec<String>),
}

impl VerdictKind {
    /// The satisfiability column this outcome corresponds to.
    pub fn sat_label(&self) -> &'static str {
        match self {
            VerdictKind::DeadlockFree => "unsat",
            VerdictKind::Unknown(_) => "sat",
            VerdictKind::ExactFree => "free",
            VerdictKind::ExactDeadlock(_) => "deadlock",
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            VerdictKind::DeadlockFree => "deadlock-free",
            VerdictKind::Unknown(_) => "unknown",
            VerdictKind::ExactFree => "exact-free",
            VerdictKind::ExactDeadlock(_) => "exact-deadlock",
        }
    }

    /// Process exit code: 0 free, 1 unknown, 2 deadlock.
    pub fn exit_code(&self) -> i32 {
        match self {
            VerdictKind::DeadlockFree | VerdictKind::ExactFree => 0,
            VerdictKind::Unknown(_) => 1,
            VerdictKind::ExactDeadlock(_) => 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub system: String,
    pub mode: Mode,
    pub kind: VerdictKind,
    pub invariant: String,
    pub t_gen: Duration,
    pub t_solve: Duration,
    pub smt_file: Option<PathBuf>,
}

impl Verdict {
    pub fn report(&self) -> Report {
        Report {
            example: self.system.clone(),
            mode: self.mode,
            verdict: self.kind.label().into(),
            invariant: self.invariant.clone(),
            witness: match &self.kind {
                VerdictKind::Unknown(w) => Some(w.clone()),
                _ => None,
            },
            trace: match &self.kind {
                VerdictKind::ExactDeadlock(t) => Some(t.clone()),
                _ => None,
            },
            t_gen_ms: self.t_gen.as_secs_f64() * 1e3,
            t_solve_ms: self.t_solve.as_secs_f64() * 1e3,
        }
    }
}

/// JSON-facing verification report.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub example: String,
    pub mode: Mode,
    pub verdict: String,
    pub invariant: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<String>>,
    pub t_gen_ms: f64,
    pub t_solve_ms: f64,
}

/// Everything a single verification run needs besides the system.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    /// Instance counts for parametric types in the bounded modes.
    pub sizes: BTreeMap<String, usize>,
    pub limits: Limits,
    pub emit_smt: Option<PathBuf>,
    pub theory: SmtTheory,
    /// Prefix for GraphViz dumps of the net and its reachability graph.
    pub dot: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: None,
            sizes: BTreeMap::new(),
            limits: Limits::default(),
            emit_smt: None,
            theory: SmtTheory::Lia,
            dot: None,
        }
    }
}

/// Verify a system, defaulting to parametric mode when some instance count
/// is parametric and to the bounded symbolic mode otherwise.
pub fn verify(def: &SystemDef, cfg: &RunConfig) -> Result<Verdict, PipelineError> {
    let mode = cfg.mode.unwrap_or(if def.is_bounded() {
        Mode::Bounded
    } else {
        Mode::Parametric
    });
    match mode {
        Mode::Parametric => verify_parametric(def, cfg),
        Mode::Bounded => verify_bounded_symbolic(def, cfg),
        Mode::Exact => verify_bounded_exact(def, cfg),
    }
}

/// Parse and verify in one step.
pub fn verify_source(text: &str, cfg: &RunConfig) -> Result<Verdict, PipelineError> {
    let def = parse_system(text)?;
    verify(&def, cfg)
}

/// The size-independent verification condition of a parametric system, as
/// a closed cardinality formula: the dualized positivation of the trap
/// constraint conjoined with the deadlock condition and the per-type
/// deployment floors.
pub fn parametric_vc(
    def: &SystemDef,
    limits: &Limits,
) -> Result<(MilFormula, CardFormula), PipelineError> {
    let trap_and_init = MilFormula::and([def.trap_constraint_param(), def.init_param()]);
    let eliminated = qelim(&trap_and_init, limits).map_err(at_stage("qelim"))?;
    let positive = ppos_card(&eliminated, limits).map_err(at_stage("ppos"))?;
    let positive_mil = card_formula_to_mil(&positive).map_err(at_stage("ppos"))?;
    let invariant = mil_dual(&positive_mil).map_err(at_stage("dual"))?;
    let vc_mil = MilFormula::and([invariant.clone(), def.deadlock_param()]);
    let mut vc = qelim(&vc_mil, limits).map_err(at_stage("vc-qelim"))?;
    // Deployment floors: a parametric type declared `param min k` only
    // exists at k or more instances. The k = 1 case is the nonempty
    // universe convention enforced by the solver itself.
    let floors: Vec<CardFormula> = def
        .min_sizes()
        .iter()
        .filter(|&(_, &min)| min > 1)
        .map(|(ty, &min)| CardFormula::ge(ty.clone(), BoolTerm::True, Bound::Finite(min as u32)))
        .collect();
    if !floors.is_empty() {
        vc = CardFormula::and(floors.into_iter().chain([vc]));
    }
    Ok((invariant, vc))
}

pub fn verify_parametric(def: &SystemDef, cfg: &RunConfig) -> Result<Verdict, PipelineError> {
    if cfg.dot.is_some() {
        return Err(PipelineError::Input(
            "GraphViz dumps need a bounded or exact run (use --mode bounded/exact with --n)".into(),
        ));
    }
    let started = Instant::now();
    let (invariant, vc) = parametric_vc(def, &cfg.limits)?;
    let t_gen = started.elapsed();

    let smt_file = match &cfg.emit_smt {
        Some(path) => {
            let script = emit_smtlib(&vc, cfg.theory, true).map_err(at_stage("emit-smt"))?;
            std::fs::write(path, script).map_err(|e| PipelineError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            Some(path.clone())
        }
        None => None,
    };

    let solve_started = Instant::now();
    let outcome = card_sat(&vc, &cfg.limits, true).map_err(at_stage("solve"))?;
    let t_solve = solve_started.elapsed();

    let kind = match outcome {
        CardSat::Unsat => VerdictKind::DeadlockFree,
        CardSat::Sat(model) => VerdictKind::Unknown(Witness::from_counts(&model)),
    };
    Ok(Verdict {
        system: def.name.clone(),
        mode: Mode::Parametric,
        kind,
        invariant: invariant.to_string(),
        t_gen,
        t_solve,
        smt_file,
    })
}

pub fn verify_bounded_symbolic(def: &SystemDef, cfg: &RunConfig) -> Result<Verdict, PipelineError> {
    if cfg.emit_smt.is_some() {
        return Err(PipelineError::Input(
            "SMT export is produced by the parametric mode".into(),
        ));
    }
    let started = Instant::now();
    let bounded = def
        .to_bounded(&cfg.sizes)
        .map_err(|e| PipelineError::Input(e.to_string()))?;
    let trap = bounded
        .trap_constraint_bounded(&cfg.limits)
        .map_err(at_stage("trap-constraint"))?;
    let init = bounded.init_bounded();
    let pos =
        positivate(&BoolFormula::and([trap, init]), &cfg.limits).map_err(at_stage("positivate"))?;
    let invariant = dualize(&pos).map_err(at_stage("dualize"))?;
    let delta = bounded
        .deadlock_bounded(&cfg.limits)
        .map_err(at_stage("deadlock"))?;
    let vc = BoolFormula::and([invariant.clone(), delta]);
    let t_gen = started.elapsed();

    if let Some(prefix) = &cfg.dot {
        let net = build_pn(&bounded, &cfg.limits).map_err(at_stage("petri"))?;
        write_dot(&net, prefix, &cfg.limits)?;
    }

    let solve_started = Instant::now();
    let witness = is_sat(&vc, &cfg.limits);
    let t_solve = solve_started.elapsed();
    let kind = match witness {
        None => VerdictKind::DeadlockFree,
        Some(v) => VerdictKind::Unknown(Witness::from_valuation(&v)),
    };
    Ok(Verdict {
        system: def.name.clone(),
        mode: Mode::Bounded,
        kind,
        invariant: invariant.to_string(),
        t_gen,
        t_solve,
        smt_file: None,
    })
}

pub fn verify_bounded_exact(def: &SystemDef, cfg: &RunConfig) -> Result<Verdict, PipelineError> {
    if cfg.emit_smt.is_some() {
        return Err(PipelineError::Input(
            "SMT export is produced by the parametric mode".into(),
        ));
    }
    let started = Instant::now();
    let bounded = def
        .to_bounded(&cfg.sizes)
        .map_err(|e| PipelineError::Input(e.to_string()))?;
    let net = build_pn(&bounded, &cfg.limits).map_err(at_stage("petri"))?;
    if let Some(prefix) = &cfg.dot {
        write_dot(&net, prefix, &cfg.limits)?;
    }
    let invariant = if net.place_count() <= cfg.limits.trap_places {
        net.trap_invariant_exact(&cfg.limits)
            .map_err(at_stage("trap-invariant"))?
            .to_string()
    } else {
        "(net too large for trap enumeration)".to_string()
    };
    let t_gen = started.elapsed();
    let solve_started = Instant::now();
    let outcome = net
        .deadlock_free_exact(&cfg.limits)
        .map_err(at_stage("reachability"))?;
    let t_solve = solve_started.elapsed();
    let kind = match outcome {
        None => VerdictKind::ExactFree,
        Some(trace) => VerdictKind::ExactDeadlock(trace),
    };
    Ok(Verdict {
        system: def.name.clone(),
        mode: Mode::Exact,
        kind,
        invariant,
        t_gen,
        t_solve,
        smt_file: None,
    })
}

fn write_dot(
    net: &crate::petri::PetriNet,
    prefix: &std::path::Path,
    limits: &Limits,
) -> Result<(), PipelineError> {
    let write = |suffix: &str, contents: String| -> Result<(), PipelineError> {
        let mut path = prefix.as_os_str().to_owned();
        path.push(suffix);
        let path = PathBuf::from(path);
        std::fs::write(&path, contents).map_err(|e| PipelineError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    };
    write(".net.dot", net.to_dot())?;
    write(
        ".reach.dot",
        net.reachability_dot(limits)
            .map_err(at_stage("reachability"))?,
    )
}

/// One row of the benchmark table.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub example: String,
    /// Satisfiability of the verification condition: `unsat` or `sat`.
    pub result: String,
    pub verdict: String,
    pub t_gen_ms: f64,
    pub t_solve_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<14} {:>8} {:>15} {:>10} {:>10}\n",
            "example", "result", "verdict", "t-gen", "t-solve"
        ));
        for row in &self.rows {
            out.push_str(&format!(
                "{:<14} {:>8} {:>15} {:>7.1} ms {:>7.1} ms\n",
                row.example, row.result, row.verdict, row.t_gen_ms, row.t_solve_ms
            ));
        }
        out
    }
}

/// The eight bundled parametric benchmark systems, in table order.
pub fn bundled_corpus() -> Vec<(&'static str, &'static str)> {
    vec![
        (
            "task-sem-1",
            include_str!(concat!(
                env!("CARGO_MANIFEST_DIR"),
                "/../../systems/bench/task-sem-1.sys"
            )),
        ),
        (
            "task-sem-2",
            include_str!(concat!(
                env!("CARGO_MANIFEST_DIR"),
                "/../../systems/bench/task-sem-2.sys"
            )),
        ),
        (
            "task-sem-3",
            include_str!(concat!(
                env!("CARGO_MANIFEST_DIR"),
                "/../../systems/bench/task-sem-3.sys"
            )),
        ),
        (
            "broadcast-2",
            include_str!(concat!(
                env!("CARGO_MANIFEST_DIR"),
                "/../../systems/bench/broadcast-2.sys"
            )),
        ),
        (
            "broadcast-3",
            include_str!(concat!(
                env!("CARGO_MANIFEST_DIR"),
                "/../../systems/bench/broadcast-3.sys"
            )),
        ),
        (
            "sync-1",
            include_str!(concat!(
                env!("CARGO_MANIFEST_DIR"),
                "/../../systems/bench/sync-1.sys"
            )),
        ),
        (
            "sync-2",
            include_str!(concat!(
                env!("CARGO_MANIFEST_DIR"),
                "/../../systems/bench/sync-2.sys"
            )),
        ),
        (
            "sync-3",
            include_str!(concat!(
                env!("CARGO_MANIFEST_DIR"),
                "/../../systems/bench/sync-3.sys"
            )),
        ),
    ]
}

/// Run the parametric verifier over a corpus of named system sources.
/// Entries run concurrently with isolated state; row order follows the
/// input order.
pub fn run_benchmarks(
    entries: &[(String, String)],
    limits: &Limits,
) -> Result<BenchReport, PipelineError> {
    let cfg = RunConfig {
        limits: limits.clone(),
        ..RunConfig::default()
    };
    let items: Vec<(String, String)> = entries.to_vec();
    let rows: Vec<Result<BenchRow, PipelineError>> = exec::map_vec(items, |(name, source)| {
        let verdict = verify_source(&source, &cfg)?;
        Ok(BenchRow {
            example: name,
            result: verdict.kind.sat_label().into(),
            verdict: verdict.kind.label().into(),
            t_gen_ms: verdict.t_gen.as_secs_f64() * 1e3,
            t_solve_ms: verdict.t_solve.as_secs_f64() * 1e3,
        })
    });
    Ok(BenchReport {
        rows: rows.into_iter().collect::<Result<Vec<_>, _>>()?,
    })
}

/// Run the bundled corpus.
pub fn run_bundled_benchmarks(limits: &Limits) -> Result<BenchReport, PipelineError> {
    let entries: Vec<(String, String)> = bundled_corpus()
        .into_iter()
        .map(|(n, s)| (n.to_string(), s.to_string()))
        .collect();
    run_benchmarks(&entries, limits)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MUTEX_BOUNDED: &str = include_str!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../systems/mutex-bounded.sys"
    ));
    const MUTEX_PARAM: &str = include_str!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../systems/mutex-param.sys"
    ));

    fn cfg() -> RunConfig {
        RunConfig::default()
    }

    #[test]
    fn bounded_mutex_is_deadlock_free() {
        let verdict = verify_source(MUTEX_BOUNDED, &cfg()).unwrap();
        assert_eq!(verdict.mode, Mode::Bounded);
        assert_eq!(verdict.kind, VerdictKind::DeadlockFree);
    }

    #[test]
    fn parametric_mutex_is_deadlock_free() {
        let verdict = verify_source(MUTEX_PARAM, &cfg()).unwrap();
        assert_eq!(verdict.mode, Mode::Parametric);
        assert_eq!(verdict.kind, VerdictKind::DeadlockFree);
    }

    #[test]
    fn exact_mode_agrees_on_mutex() {
        let mut config = cfg();
        config.mode = Some(Mode::Exact);
        let verdict = verify_source(MUTEX_BOUNDED, &config).unwrap();
        assert_eq!(verdict.kind, VerdictKind::ExactFree);
    }

    #[test]
    fn sync2_unfolded_at_three_has_deadlock() {
        let def = parse_system(
            bundled_corpus()
                .iter()
                .find(|(n, _)| *n == "sync-2")
                .unwrap()
                .1,
        )
        .unwrap();
        let mut config = cfg();
        config.sizes.insert("Worker".into(), 3);
        config.mode = Some(Mode::Exact);
        let verdict = verify(&def, &config).unwrap();
        assert!(matches!(verdict.kind, VerdictKind::ExactDeadlock(_)));
        // The symbolic bounded route cannot prove it free either.
        config.mode = Some(Mode::Bounded);
        let verdict = verify(&def, &config).unwrap();
        assert!(matches!(verdict.kind, VerdictKind::Unknown(_)));
    }

    #[test]
    fn sync2_unfolded_at_two_is_exactly_free() {
        let def = parse_system(
            bundled_corpus()
                .iter()
                .find(|(n, _)| *n == "sync-2")
                .unwrap()
                .1,
        )
        .unwrap();
        let mut config = cfg();
        config.sizes.insert("Worker".into(), 2);
        config.mode = Some(Mode::Exact);
        let verdict = verify(&def, &config).unwrap();
        assert_eq!(verdict.kind, VerdictKind::ExactFree);
    }

    #[test]
    fn sync3_exact_free_at_three() {
        let def = parse_system(
            bundled_corpus()
                .iter()
                .find(|(n, _)| *n == "sync-3")
                .unwrap()
                .1,
        )
        .unwrap();
        let mut config = cfg();
        config.sizes.insert("Worker".into(), 3);
        config.mode = Some(Mode::Exact);
        let verdict = verify(&def, &config).unwrap();
        assert_eq!(verdict.kind, VerdictKind::ExactFree);
    }

    #[test]
    fn mutex_param_invariant_matches_known_form() {
        // Over single-semaphore universes the generated invariant is
        // (r | s) & [forall i. w(i) | u(i)] & [r | exists i. u(i)]
        //         & [s | exists i. w(i)].
        use crate::mil::{enumerate_structures, eval_mil, IndexVar, MilFormula, PredSymbol};
        use crate::prop::VarKind;

        let def = parse_system(MUTEX_PARAM).unwrap();
        let (invariant, _) = parametric_vc(&def, &Limits::default()).unwrap();

        let r = PredSymbol::new("r", "Semaphore", VarKind::State);
        let s = PredSymbol::new("s", "Semaphore", VarKind::State);
        let w = PredSymbol::new("w", "Task", VarKind::State);
        let u = PredSymbol::new("u", "Task", VarKind::State);
        let k = IndexVar::new("k", "Semaphore");
        let i = IndexVar::new("i", "Task");
        // With one semaphore instance, a bare predicate reads as "some
        // instance satisfies it".
        let some_sem =
            |p: &PredSymbol| MilFormula::exists(k.clone(), MilFormula::pred(p.clone(), k.clone()));
        let expected = MilFormula::and([
            MilFormula::or([some_sem(&r), some_sem(&s)]),
            MilFormula::forall(
                i.clone(),
                MilFormula::or([
                    MilFormula::pred(w.clone(), i.clone()),
                    MilFormula::pred(u.clone(), i.clone()),
                ]),
            ),
            MilFormula::or([
                some_sem(&r),
                MilFormula::exists(i.clone(), MilFormula::pred(u.clone(), i.clone())),
            ]),
            MilFormula::or([
                some_sem(&s),
                MilFormula::exists(i.clone(), MilFormula::pred(w.clone(), i.clone())),
            ]),
        ]);
        let preds: std::collections::BTreeSet<PredSymbol> = [r, s, w, u].into_iter().collect();
        for tasks in 1..=3usize {
            let sizes = BTreeMap::from([("Semaphore".to_string(), 1), ("Task".to_string(), tasks)]);
            for st in enumerate_structures(&preds, &sizes, &Limits::default()).unwrap() {
                assert_eq!(
                    eval_mil(&invariant, &st).unwrap(),
                    eval_mil(&expected, &st).unwrap(),
                    "structure {st}"
                );
            }
        }
        // Sanity for the whole condition: the invariant conjoined with the
        // deadlock formula is unsatisfiable.
        let vc = parametric_vc(&def, &Limits::default()).unwrap().1;
        assert!(!card_sat(&vc, &Limits::default(), true).unwrap().is_sat());
    }

    #[test]
    fn mutex_param_qelim_is_sound_and_covers_known_disjunct() {
        // The eliminated trap-and-init condition agrees with direct
        // evaluation everywhere, and it subsumes the known disjunct
        // !r & !s & |w & !u| <= 0 & |u & !w| <= 0 & 1 <= |w|
        // (all tasks in both w and u while the semaphore states are
        // empty: a marked trap shape).
        use crate::card::{eval_card, BoolTerm, Bound, CardFormula};
        use crate::mil::{enumerate_structures, eval_mil, MilFormula, PredSymbol};
        use crate::prop::VarKind;

        let def = parse_system(MUTEX_PARAM).unwrap();
        let theta_init = MilFormula::and([def.trap_constraint_param(), def.init_param()]);
        let eliminated = qelim(&theta_init, &Limits::default()).unwrap();

        let r = BoolTerm::pred(PredSymbol::new("r", "Semaphore", VarKind::State));
        let s = BoolTerm::pred(PredSymbol::new("s", "Semaphore", VarKind::State));
        let w = || BoolTerm::pred(PredSymbol::new("w", "Task", VarKind::State));
        let u = || BoolTerm::pred(PredSymbol::new("u", "Task", VarKind::State));
        let known_disjunct = CardFormula::and([
            CardFormula::le("Semaphore", r, Bound::Finite(0)),
            CardFormula::le("Semaphore", s, Bound::Finite(0)),
            CardFormula::le(
                "Task",
                BoolTerm::and([w(), BoolTerm::not(u())]),
                Bound::Finite(0),
            ),
            CardFormula::le(
                "Task",
                BoolTerm::and([u(), BoolTerm::not(w())]),
                Bound::Finite(0),
            ),
            CardFormula::ge("Task", w(), Bound::Finite(1)),
        ]);
        let preds = theta_init.preds();
        for sem in 1..=2usize {
            for tasks in 1..=3usize {
                let sizes =
                    BTreeMap::from([("Semaphore".to_string(), sem), ("Task".to_string(), tasks)]);
                for st in enumerate_structures(&preds, &sizes, &Limits::default()).unwrap() {
                    let direct = eval_mil(&theta_init, &st).unwrap();
                    assert_eq!(
                        eval_card(&eliminated, &st).unwrap(),
                        direct,
                        "elimination diverges at {st}"
                    );
                    if eval_card(&known_disjunct, &st).unwrap() {
                        assert!(direct, "known disjunct not subsumed at {st}");
                    }
                }
            }
        }
    }

    #[test]
    fn missing_parametric_size_is_an_input_error() {
        let def = parse_system(MUTEX_PARAM).unwrap();
        let mut config = cfg();
        config.mode = Some(Mode::Exact);
        let err = verify(&def, &config).unwrap_err();
        assert!(matches!(err, PipelineError::Input(_)), "{err}");
    }

    #[test]
    fn json_report_is_deterministic_modulo_timing() {
        let def = parse_system(MUTEX_PARAM).unwrap();
        let render = || {
            let mut report = verify(&def, &cfg()).unwrap().report();
            report.t_gen_ms = 0.0;
            report.t_solve_ms = 0.0;
            serde_json::to_string_pretty(&report).unwrap()
        };
        assert_eq!(render(), render());
    }

    #[test]
    fn smt_artifacts_are_written() {
        let dir = std::env::temp_dir().join(format!("trapver-smt-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("vc.smt2");
        let def = parse_system(MUTEX_PARAM).unwrap();
        let mut config = cfg();
        config.emit_smt = Some(path.clone());
        let verdict = verify(&def, &config).unwrap();
        assert_eq!(verdict.smt_file.as_deref(), Some(path.as_path()));
        let script = std::fs::read_to_string(&path).unwrap();
        assert!(script.contains("(check-sat)"));
        std::fs::remove_dir_all(&dir).ok();
    }
}
