//! The ADCL search.
//!
//! State: the current set of transitions `S` (input plus learned), a trace
//! that is always a run from `init`, and one blocking set per trace
//! position plus one. Rules are tried in a fixed priority: refute an unsafe
//! trace; for each recursive suffix (shortest first) try covered,
//! accelerate and nonterm; step with the first active implicant; backtrack.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::accel::{accelerate, AccelFailure};
use crate::formula::{Formula, Subst, Term, VarId};
use crate::fresh;
use crate::implicants::{sip_of_model_mapped, ActiveStream, ImplicantError};
use crate::nonterm::{find_certificate, refine, verify_certificate, CertError, Certificate, DEFAULT_MAX_ITERS};
use crate::smt::{Entailment, SmtError, SmtResult, Solver, SolverConfig};
use crate::ts::{chain, chain_seq, Location, Provenance, Transition, TransitionSystem, TsError};

#[derive(Debug, Clone, Copy)]
pub struct Budgets {
    pub wall: Duration,
    pub max_depth: usize,
    pub max_learned: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            wall: Duration::from_secs(60),
            max_depth: 100,
            max_learned: 200,
        }
    }
}

/// Order in which input transitions are offered to the Step rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeedOrder {
    #[default]
    File,
    Shuffle(u64),
}

#[derive(Debug, Clone, Default)]
pub struct EngineConfig {
    pub budgets: Budgets,
    pub solver: SolverConfig,
    pub seed_order: SeedOrder,
    pub log_derivation: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaybeReason {
    /// Every branch was explored or pruned.
    Exhausted,
    Budget,
    /// The search ended, but solver unknowns may have hidden a proof.
    Unknowns,
}

#[derive(Debug, Clone)]
pub struct NontermWitness {
    /// Run from `init` to the entry of the loop.
    pub stem: Vec<Arc<Transition>>,
    /// The recursive suffix that was certified.
    pub loop_: Vec<Arc<Transition>>,
    pub certificate: Arc<Certificate>,
}

#[derive(Debug, Clone)]
pub enum Verdict {
    NonTerminating(NontermWitness),
    Maybe(MaybeReason),
}

#[derive(Debug, Clone, Default)]
pub struct Stats {
    pub learned: usize,
    pub max_depth: usize,
    pub smt_queries: u64,
    pub rule_applications: usize,
    pub wall: Duration,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub verdict: Verdict,
    pub stats: Stats,
    /// One line per rule application, when requested.
    pub derivation: Vec<String>,
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Smt(#[from] SmtError),
    #[error(transparent)]
    Implicant(#[from] ImplicantError),
    #[error(transparent)]
    Ts(#[from] TsError),
    #[error("internal error: witness rejected by verification: {0}")]
    Unsound(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Redundancy {
    Yes,
    No,
    Unknown,
}

/// Key identifying a sequence of transitions independent of provenance.
type SeqKey = Vec<(Location, Location, Formula)>;

fn key_of(ts: &[Arc<Transition>]) -> SeqKey {
    ts.iter()
        .map(|t| (t.src.clone(), t.dst.clone(), t.cond.clone()))
        .collect()
}

/// Rename the parameters of `f` apart from everything else.
fn rename_params(f: &Formula) -> (Formula, Subst) {
    let mut s = Subst::new();
    for p in f.params() {
        let VarId::Param(name) = &p else { unreachable!() };
        let prefix = name.split('$').next().unwrap_or("p").to_string();
        s.insert(p, Term::var(fresh::fresh_param(&prefix)));
    }
    (f.substitute(&s), s)
}

/// `cond(t) |= exists params. c`, with the parameters of `c` eliminated
/// through equalities where possible and read universally otherwise.
fn included(solver: &mut Solver, t: &Formula, c: &Formula) -> Result<Redundancy, SmtError> {
    let (c, renaming) = rename_params(c);
    let params: Vec<VarId> = renaming.values().flat_map(|t| t.vars()).collect();
    let c = c.eliminate_by_equalities(&|v| params.contains(v));
    Ok(match solver.entails(t, &c)? {
        Entailment::Yes => Redundancy::Yes,
        Entailment::No(_) => Redundancy::No,
        Entailment::Unknown(_) => Redundancy::Unknown,
    })
}

/// Whether `c` allows a step that `t` does not. Parameters of `t` that
/// cannot be eliminated make the answer `No` (conservative).
fn strictly_larger(solver: &mut Solver, t: &Formula, c: &Formula) -> Result<Redundancy, SmtError> {
    let t_params: Vec<VarId> = t.params().into_iter().collect();
    let t_elim = t.eliminate_by_equalities(&|v| t_params.contains(v));
    if !t_elim.params().is_empty() {
        return Ok(Redundancy::No);
    }
    let (c, _) = rename_params(c);
    Ok(match solver.check_sat(&Formula::and([c, t_elim.negate()]))? {
        SmtResult::Sat(_) => Redundancy::Yes,
        SmtResult::Unsat => Redundancy::No,
        SmtResult::Unknown(_) => Redundancy::Unknown,
    })
}

/// Bound on the implicants of a disjunctive pool member that are examined.
const REDUNDANCY_IMPLICANT_LIMIT: usize = 32;

/// `t ⊑ t'` (or `t ⊏ t'` when `strict`) for some `t'` in `sip(pool)`.
///
/// Inclusion of relations is checked by entailment. Against a disjunctive
/// pool member, the implicants of its condition that are consistent with
/// `t` are examined one by one.
pub fn redundant(
    solver: &mut Solver,
    t: &Transition,
    pool: &[Arc<Transition>],
    strict: bool,
) -> Result<Redundancy, SmtError> {
    let mut unknown = false;
    for other in pool.iter().filter(|o| o.src == t.src && o.dst == t.dst) {
        if **other == *t {
            if !strict {
                return Ok(Redundancy::Yes);
            }
            continue;
        }
        let candidates: Vec<Formula> = if other.is_conjunctive() {
            vec![other.cond.clone()]
        } else {
            let (renamed, rename) = rename_params(&other.cond);
            let mut stream = crate::smt::ModelStream::new(Formula::and([t.cond.clone(), renamed]));
            let mut found = Vec::new();
            while found.len() < REDUNDANCY_IMPLICANT_LIMIT {
                let Some(m) = stream.next(solver)? else { break };
                let Ok(imp) = sip_of_model_mapped(&other.cond, &rename, &m) else {
                    break;
                };
                stream.block(imp.substitute(&rename).negate());
                found.push(imp);
            }
            unknown |= stream.unknown().is_some();
            found
        };
        for c in candidates {
            match included(solver, &t.cond, &c)? {
                Redundancy::Yes => {}
                Redundancy::No => continue,
                Redundancy::Unknown => {
                    unknown = true;
                    continue;
                }
            }
            if !strict {
                return Ok(Redundancy::Yes);
            }
            match strictly_larger(solver, &t.cond, &c)? {
                Redundancy::Yes => return Ok(Redundancy::Yes),
                Redundancy::No => {}
                Redundancy::Unknown => unknown = true,
            }
        }
    }
    Ok(if unknown { Redundancy::Unknown } else { Redundancy::No })
}

/// `(S, trace, [B_0 .. B_k])`.
#[derive(Debug, Clone)]
pub struct SearchState {
    pub original: Vec<Arc<Transition>>,
    pub learned: Vec<Arc<Transition>>,
    pub trace: Vec<Arc<Transition>>,
    pub blocked: Vec<Vec<Arc<Transition>>>,
    /// `backtracked[i]`: `blocked[i]` received an element through backtracking.
    backtracked: Vec<bool>,
    /// `chains[i] = chain_seq(trace[..=i])`.
    chains: Vec<Transition>,
}

impl SearchState {
    /// `T ~> (T, [], [{}])`.
    pub fn init(ts: &TransitionSystem) -> Self {
        SearchState {
            original: ts.transitions().to_vec(),
            learned: Vec::new(),
            trace: Vec::new(),
            blocked: vec![Vec::new()],
            backtracked: vec![false],
            chains: Vec::new(),
        }
    }

    /// Input and learned transitions.
    pub fn all(&self) -> Vec<Arc<Transition>> {
        self.original.iter().chain(self.learned.iter()).cloned().collect()
    }

    /// Learned transitions newest first, then the input in order.
    fn candidates(&self) -> Vec<Arc<Transition>> {
        self.learned.iter().rev().chain(self.original.iter()).cloned().collect()
    }

    pub fn depth(&self) -> usize {
        self.trace.len()
    }

    /// Chained condition of the whole trace.
    pub fn trace_chain(&self) -> Option<&Transition> {
        self.chains.last()
    }

    /// Start indices `j` such that `trace[j..]` is recursive, shortest first.
    pub fn recursive_suffixes(&self) -> Vec<usize> {
        let Some(top) = self.trace.last() else { return Vec::new() };
        (0..self.trace.len()).rev().filter(|&j| self.trace[j].src == top.dst).collect()
    }

    fn push(&mut self, t: Arc<Transition>) {
        let chained = match self.chains.last() {
            None => (*t).clone(),
            Some(prev) => chain(prev, &t),
        };
        self.chains.push(chained);
        self.trace.push(t);
        self.blocked.push(Vec::new());
        self.backtracked.push(false);
    }

    /// `bt`: drop the last trace element and block it one level down.
    pub fn backtrack(&mut self) -> Option<Arc<Transition>> {
        let t = self.trace.pop()?;
        self.chains.pop();
        self.blocked.pop();
        self.backtracked.pop();
        self.blocked.last_mut().unwrap().push(t.clone());
        *self.backtracked.last_mut().unwrap() = true;
        Some(t)
    }

    /// Replace `trace[j..]` by `t`, whose blocking set becomes `{t}`.
    fn replace_suffix(&mut self, j: usize, t: Arc<Transition>) {
        self.trace.truncate(j);
        self.chains.truncate(j);
        self.blocked.truncate(j + 1);
        self.backtracked.truncate(j + 1);
        self.push(t.clone());
        *self.blocked.last_mut().unwrap() = vec![t];
    }

    /// No blocking set alongside `trace[j..]` was extended by backtracking.
    pub fn suffix_is_fresh(&self, j: usize) -> bool {
        self.backtracked[j + 1..].iter().all(|b| !b)
    }

    /// Identity of the trace, sizes of the blocking sets, and `|learned|`.
    fn fingerprint(&self) -> (Vec<*const Transition>, Vec<usize>, usize) {
        (
            self.trace.iter().map(Arc::as_ptr).collect(),
            self.blocked.iter().map(Vec::len).collect(),
            self.learned.len(),
        )
    }

    /// Every rule keeps the state well formed and changes it.
    fn debug_check(&self, before: &(Vec<*const Transition>, Vec<usize>, usize)) {
        debug_assert!(self.well_formed(), "rule broke well-formedness");
        debug_assert!(self.fingerprint() != *before, "rule application left the state unchanged");
    }

    /// Structural invariants; checked after every rule application in
    /// debug builds.
    pub fn well_formed(&self) -> bool {
        self.blocked.len() == self.trace.len() + 1
            && self.chains.len() == self.trace.len()
            && self.backtracked.len() == self.blocked.len()
            && self.trace.first().is_none_or(|t| t.is_initial())
            && self.trace.windows(2).all(|w| w[0].dst == w[1].src)
    }
}

/// Outcome of trying one rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Applied {
    Yes,
    NoChange,
}

/// Why an accelerate or nonterm attempt did not change the state.
#[derive(Debug, Clone)]
enum Learn {
    Failed,
    Learned(Arc<Transition>),
}

pub struct Engine {
    config: EngineConfig,
    dim: usize,
    names: Vec<String>,
    solver: Solver,
    state: SearchState,
    accel_cache: HashMap<SeqKey, Result<Arc<Transition>, AccelFailure>>,
    cert_cache: HashMap<SeqKey, Option<Arc<Certificate>>>,
    covered_cache: HashMap<(SeqKey, usize), bool>,
    unknowns: bool,
    budget_hit: bool,
    stats: Stats,
    derivation: Vec<String>,
    started: Instant,
}

impl Engine {
    pub fn new(ts: &TransitionSystem, config: EngineConfig) -> Result<Self, EngineError> {
        fresh::reset();
        for t in ts.transitions() {
            fresh::observe_formula(&t.cond);
        }
        let solver = Solver::new(config.solver.clone())?;
        let mut state = SearchState::init(ts);
        if let SeedOrder::Shuffle(seed) = config.seed_order {
            state.original.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        }
        Ok(Engine {
            config,
            dim: ts.dim(),
            names: ts.names().to_vec(),
            solver,
            state,
            accel_cache: HashMap::new(),
            cert_cache: HashMap::new(),
            covered_cache: HashMap::new(),
            unknowns: false,
            budget_hit: false,
            stats: Stats::default(),
            derivation: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn state(&self) -> &SearchState {
        &self.state
    }

    pub fn solver(&mut self) -> &mut Solver {
        &mut self.solver
    }

    fn log(&mut self, rule: &str, detail: impl FnOnce(&[String]) -> String) {
        self.stats.rule_applications += 1;
        if self.config.log_derivation {
            let detail = detail(&self.names);
            let line = if detail.is_empty() { rule.to_string() } else { format!("{rule} {detail}") };
            self.derivation.push(line);
        }
    }

    fn suffix(&self, j: usize) -> Vec<Arc<Transition>> {
        self.state.trace[j..].to_vec()
    }

    /// Covered: `trace[j..] ⊏ sip(S)`, or `⊑` with more than one element.
    pub fn try_covered(&mut self, j: usize) -> Result<Applied, EngineError> {
        let suffix = self.suffix(j);
        let key = (key_of(&suffix), self.state.learned.len());
        let covered = match self.covered_cache.get(&key) {
            Some(c) => *c,
            None => {
                let chained = chain_seq(&suffix)?;
                let pool = self.state.all();
                // A single transition must be strictly redundant, or the
                // rule could undo every step.
                let r = redundant(&mut self.solver, &chained, &pool, suffix.len() == 1)?;
                // Unknown counts as not covered.
                let c = r == Redundancy::Yes;
                self.covered_cache.insert(key, c);
                c
            }
        };
        if !covered {
            return Ok(Applied::NoChange);
        }
        let t = self.state.backtrack().expect("suffix is nonempty");
        self.log("covered", |n| format!("{} (suffix length {})", t.display(n), suffix.len()));
        Ok(Applied::Yes)
    }

    /// Accelerate: replace a fresh recursive suffix by its acceleration if
    /// that is not already redundant.
    pub fn try_accelerate(&mut self, j: usize) -> Result<Applied, EngineError> {
        if !self.state.suffix_is_fresh(j) {
            return Ok(Applied::NoChange);
        }
        let suffix = self.suffix(j);
        let key = key_of(&suffix);
        let result = match self.accel_cache.get(&key) {
            Some(r) => r.clone(),
            None => {
                let chained = chain_seq(&suffix)?;
                let r = accelerate(&chained, self.dim).map(|acc| {
                    let mut t = acc.transition;
                    t.provenance = Provenance::Accelerated(suffix.clone());
                    Arc::new(t)
                });
                self.accel_cache.insert(key, r.clone());
                r
            }
        };
        let Ok(learned) = result else { return Ok(Applied::NoChange) };
        match self.learn(learned)? {
            Learn::Failed => Ok(Applied::NoChange),
            Learn::Learned(t) => {
                self.state.replace_suffix(j, t.clone());
                self.log("accelerate", |n| format!("{} (suffix length {})", t.display(n), suffix.len()));
                Ok(Applied::Yes)
            }
        }
    }

    /// Nonterm: learn `l -> err [psi]` for a certificate `psi` of the suffix.
    pub fn try_nonterm(&mut self, j: usize) -> Result<Applied, EngineError> {
        let suffix = self.suffix(j);
        let key = key_of(&suffix);
        let cert = match self.cert_cache.get(&key) {
            Some(c) => c.clone(),
            None => {
                let chained = chain_seq(&suffix)?;
                let c = find_certificate(&mut self.solver, &chained, self.dim, DEFAULT_MAX_ITERS)?.map(Arc::new);
                self.cert_cache.insert(key, c.clone());
                c
            }
        };
        let Some(cert) = cert else { return Ok(Applied::NoChange) };
        let loc = suffix[0].src.clone();
        let t_err = Transition::new(
            loc,
            Location::err(),
            cert.psi.clone(),
            Provenance::ErrCert {
                loop_: suffix.clone(),
                certificate: cert,
            },
        )
        .expect("loop locations are never init targets");
        match self.learn(Arc::new(t_err))? {
            Learn::Failed => Ok(Applied::NoChange),
            Learn::Learned(t) => {
                self.log("nonterm", |n| format!("{} (suffix length {})", t.display(n), suffix.len()));
                Ok(Applied::Yes)
            }
        }
    }

    /// Add `t` to `S` unless it is redundant (or possibly redundant).
    fn learn(&mut self, t: Arc<Transition>) -> Result<Learn, EngineError> {
        let pool = self.state.all();
        match redundant(&mut self.solver, &t, &pool, false)? {
            Redundancy::No => {
                self.state.learned.push(t.clone());
                self.stats.learned = self.state.learned.len();
                Ok(Learn::Learned(t))
            }
            Redundancy::Unknown => {
                self.unknowns = true;
                Ok(Learn::Failed)
            }
            Redundancy::Yes => Ok(Learn::Failed),
        }
    }

    /// Step with the first active implicant not redundant w.r.t. the top
    /// blocking set.
    pub fn try_step(&mut self) -> Result<Applied, EngineError> {
        let mut stream = ActiveStream::new(self.state.trace_chain().cloned(), self.state.candidates());
        let top: Vec<Arc<Transition>> = self.state.blocked.last().unwrap().clone();
        let mut saw_unknown = false;
        let next = stream.next(&mut self.solver, &mut |cand, solver| {
            if top.iter().any(|b| **b == **cand) {
                return Ok(true);
            }
            Ok(match redundant(solver, cand, &top, false)? {
                Redundancy::Yes => true,
                Redundancy::No => false,
                Redundancy::Unknown => {
                    saw_unknown = true;
                    false
                }
            })
        })?;
        self.unknowns |= saw_unknown || stream.unknowns() > 0;
        let Some(imp) = next else { return Ok(Applied::NoChange) };
        let t = imp.transition();
        debug_assert!(!top.iter().any(|b| **b == *t), "stepped a blocked transition");
        self.state.push(t.clone());
        self.stats.max_depth = self.stats.max_depth.max(self.state.depth());
        self.log("step", |n| t.display(n).to_string());
        Ok(Applied::Yes)
    }

    /// Refute: the trace ends in `err`. Builds and re-verifies the witness.
    pub fn try_refute(&mut self) -> Result<Option<NontermWitness>, EngineError> {
        let Some(last) = self.state.trace.last() else { return Ok(None) };
        if last.is_safe() {
            return Ok(None);
        }
        let Provenance::ErrCert { loop_, certificate } = &last.provenance else {
            return Err(EngineError::Unsound("unsafe transition without certificate".into()));
        };
        let k = self.state.depth();
        let witness = NontermWitness {
            stem: self.state.trace[..k - 1].to_vec(),
            loop_: loop_.clone(),
            certificate: certificate.clone(),
        };
        check_witness(&mut self.solver, &self.config.solver, &witness, self.dim)
            .map_err(|e| EngineError::Unsound(e.to_string()))?;
        self.log("refute", |_| format!("depth {k}"));
        Ok(Some(witness))
    }

    fn out_of_time(&self) -> bool {
        self.started.elapsed() >= self.config.budgets.wall
    }

    fn finish(&mut self, verdict: Verdict) -> RunOutcome {
        self.stats.smt_queries = self.solver.queries();
        self.stats.wall = self.started.elapsed();
        RunOutcome {
            verdict,
            stats: self.stats.clone(),
            derivation: std::mem::take(&mut self.derivation),
        }
    }

    /// Apply rules until refutation, exhaustion, or a budget runs out.
    pub fn run(mut self) -> Result<RunOutcome, EngineError> {
        self.started = Instant::now();
        self.solver.set_deadline(self.started.checked_add(self.config.budgets.wall));
        self.log("init", |_| String::new());
        'search: loop {
            if self.out_of_time() || self.state.learned.len() >= self.config.budgets.max_learned {
                return Ok(self.finish(Verdict::Maybe(MaybeReason::Budget)));
            }
            if let Some(w) = self.try_refute()? {
                return Ok(self.finish(Verdict::NonTerminating(w)));
            }
            let before = self.state.fingerprint();
            for j in self.state.recursive_suffixes() {
                if self.try_covered(j)? == Applied::Yes
                    || self.try_accelerate(j)? == Applied::Yes
                    || self.try_nonterm(j)? == Applied::Yes
                {
                    self.state.debug_check(&before);
                    continue 'search;
                }
                if self.out_of_time() {
                    continue 'search;
                }
            }
            if self.state.depth() < self.config.budgets.max_depth {
                if self.try_step()? == Applied::Yes {
                    self.state.debug_check(&before);
                    continue;
                }
            } else {
                self.budget_hit = true;
            }
            if self.state.trace.is_empty() {
                let reason = if self.budget_hit || self.out_of_time() {
                    MaybeReason::Budget
                } else if self.unknowns {
                    MaybeReason::Unknowns
                } else {
                    MaybeReason::Exhausted
                };
                return Ok(self.finish(Verdict::Maybe(reason)));
            }
            let t = self.state.backtrack().unwrap();
            self.state.debug_check(&before);
            self.log("backtrack", |n| t.display(n).to_string());
        }
    }
}

/// Run the search on `ts`.
pub fn run(ts: &TransitionSystem, config: EngineConfig) -> Result<RunOutcome, EngineError> {
    Engine::new(ts, config)?.run()
}

#[derive(Debug, Error)]
pub enum WitnessError {
    #[error("empty stem")]
    EmptyStem,
    #[error("stem does not start in init")]
    StemNotInitial,
    #[error("loop does not start where the stem ends")]
    Disconnected,
    #[error("certificate loop is not an instance of the witness loop")]
    LoopMismatch,
    #[error("certificate: {0}")]
    Certificate(#[from] CertError),
    #[error("no stem run ends in the certificate")]
    Unreachable,
    #[error("solver returned unknown during witness check")]
    Unknown,
    #[error(transparent)]
    Ts(#[from] TsError),
    #[error(transparent)]
    Smt(#[from] SmtError),
}

/// The soundness gate: the certificate verifies from scratch, it certifies
/// an instance of the chained loop, and the stem can reach it.
pub fn check_witness(
    solver: &mut Solver,
    config: &SolverConfig,
    w: &NontermWitness,
    dim: usize,
) -> Result<(), WitnessError> {
    if w.stem.is_empty() {
        return Err(WitnessError::EmptyStem);
    }
    if !w.stem[0].is_initial() {
        return Err(WitnessError::StemNotInitial);
    }
    let stem = chain_seq(&w.stem)?;
    let looped = chain_seq(&w.loop_)?;
    if stem.dst != looped.src || !looped.is_recursive() || w.certificate.loop_.src != looped.src {
        return Err(WitnessError::Disconnected);
    }
    verify_certificate(config, &w.certificate, dim)?;
    // Every step of the certified loop must be a step of the chained loop.
    // `refine` only picks instances of the loop, so comparing against its
    // result suffices and avoids quantified iteration counters.
    let Some((instance, _, _)) = refine(&looped, dim) else {
        return Err(WitnessError::LoopMismatch);
    };
    match included(solver, &w.certificate.loop_.cond, &instance.cond)? {
        Redundancy::Yes => {}
        Redundancy::No => return Err(WitnessError::LoopMismatch),
        Redundancy::Unknown => return Err(WitnessError::Unknown),
    }
    let at_post: Subst = (0..dim).map(|i| (VarId::Pre(i), Term::post(i))).collect();
    match solver.check_sat(&Formula::and([stem.cond.clone(), w.certificate.psi.substitute(&at_post)]))? {
        SmtResult::Sat(_) => Ok(()),
        SmtResult::Unsat => Err(WitnessError::Unreachable),
        SmtResult::Unknown(_) => Err(WitnessError::Unknown),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse, parse_formula};

    fn names() -> Vec<String> {
        ["x", "y", "z"].iter().map(|s| s.to_string()).collect()
    }

    fn tr(src: &str, dst: &str, cond: &str) -> Arc<Transition> {
        Arc::new(
            Transition::new(
                Location::new(src),
                Location::new(dst),
                parse_formula(cond, &names(), true).unwrap(),
                Provenance::Chained,
            )
            .unwrap(),
        )
    }

    fn solver() -> Solver {
        Solver::new(SolverConfig::default()).unwrap()
    }

    #[test]
    fn self_redundancy_is_not_strict() {
        let mut s = solver();
        let t = tr("l", "l", "x > 0 && x' = x + 1");
        assert_eq!(redundant(&mut s, &t, std::slice::from_ref(&t), false).unwrap(), Redundancy::Yes);
        assert_eq!(redundant(&mut s, &t, std::slice::from_ref(&t), true).unwrap(), Redundancy::No);
        let other = tr("m", "l", "x > 0 && x' = x + 1");
        assert_eq!(redundant(&mut s, &other, &[t], false).unwrap(), Redundancy::No);
    }

    #[test]
    fn one_step_is_covered_by_its_acceleration() {
        let mut s = solver();
        let step = tr("l1", "l1", "y <= 2*z && x' = x + 1 && x < z && y' = y && z' = z");
        let acc = accelerate(&step, 3).unwrap().transition;
        let acc = Arc::new(acc);
        assert_eq!(redundant(&mut s, &step, std::slice::from_ref(&acc), false).unwrap(), Redundancy::Yes);
        assert_eq!(redundant(&mut s, &step, std::slice::from_ref(&acc), true).unwrap(), Redundancy::Yes);
        assert_eq!(redundant(&mut s, &acc, &[step], false).unwrap(), Redundancy::No);
    }

    #[test]
    fn redundancy_against_disjunctive_transitions() {
        let mut s = solver();
        let disj = tr("l", "l", "x > 0 && ((x' = x + 1 && y' = y) || (x' = x - 1 && y' = y + 1))");
        let sub = tr("l", "l", "x > 5 && x' = x - 1 && y' = y + 1");
        assert_eq!(redundant(&mut s, &sub, std::slice::from_ref(&disj), true).unwrap(), Redundancy::Yes);
        let mixed = tr("l", "l", "x > 5 && x' = x && y' = y");
        assert_eq!(redundant(&mut s, &mixed, &[disj], false).unwrap(), Redundancy::No);
    }

    #[test]
    fn empty_and_acyclic_systems_are_exhausted() {
        let ts = parse("vars x\nrule init -> l1 :: x' = 0").unwrap();
        let out = run(&ts, EngineConfig::default()).unwrap();
        assert!(matches!(out.verdict, Verdict::Maybe(MaybeReason::Exhausted)));
    }

    #[test]
    fn counting_up_does_not_terminate() {
        let ts = parse("vars x\nrule init -> l1 :: x' = 1\nrule l1 -> l1 :: x > 0 && x++").unwrap();
        let out = run(&ts, EngineConfig::default()).unwrap();
        let Verdict::NonTerminating(w) = out.verdict else {
            panic!("expected NO, got {:?}", out.verdict)
        };
        let mut s = solver();
        let x_pos = parse_formula("x > 0", &["x".to_string()], false).unwrap();
        assert!(s.entails(&w.certificate.psi, &x_pos).unwrap().is_yes());
        assert!(s.entails(&x_pos, &w.certificate.psi).unwrap().is_yes());
    }

    #[test]
    fn counting_down_is_maybe() {
        let ts = parse("vars x\nrule init -> l1 :: x' >= 0\nrule l1 -> l1 :: x > 0 && x--").unwrap();
        let out = run(&ts, EngineConfig::default()).unwrap();
        assert!(matches!(out.verdict, Verdict::Maybe(_)), "{:?}", out.verdict);
    }

    #[test]
    fn backtracking_blocks_one_level_down() {
        let ts = parse("vars x\nrule init -> l1 :: x' = 0\nrule l1 -> l2 :: x == ").unwrap();
        let mut e = Engine::new(&ts, EngineConfig::default()).unwrap();
        assert_eq!(e.try_step().unwrap(), Applied::Yes);
        assert_eq!(e.try_step().unwrap(), Applied::Yes);
        assert!(e.state().well_formed());
        let before = e.state().blocked[1].len();
        let popped = e.state.backtrack().unwrap();
        assert_eq!(e.state().blocked.len(), 2);
        assert_eq!(e.state().blocked[1].len(), before + 1);
        // The popped transition is no longer offered at that depth.
        assert_eq!(e.try_step().unwrap(), Applied::NoChange);
        assert!(e.state().blocked[1].contains(&popped));
        assert!(e.state().well_formed());
    }
}
