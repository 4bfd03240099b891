//! Certificates of non-termination: a satisfiable state formula `psi` such
//! that every model of `psi` enables the loop and `psi` is preserved by the
//! loop's deterministic update.

use std::fmt;

use num_bigint::BigInt;
use thiserror::Error;

use crate::accel::{extract_update, Update, UpdateMap};
use crate::formula::{Formula, Model, Subst, Term, VarId};
use crate::smt::{Entailment, SmtError, SmtResult, Solver, SolverConfig};
use crate::ts::{Provenance, Transition};

pub const DEFAULT_MAX_ITERS: usize = 10;
pub const SIMULATION_STEPS: usize = 50;
pub const SIMULATION_MAX_BITS: u64 = 4096;
/// Nonlinear updates square the degree of `psi` on every iteration; past
/// this many monomials the iteration is abandoned.
pub const MAX_PSI_SIZE: usize = 400;

fn size(f: &Formula) -> usize {
    f.literals().iter().map(|l| l.term().monomials().count()).sum()
}

#[derive(Debug, Clone)]
pub struct Certificate {
    /// The deterministic loop that `psi` certifies.
    pub loop_: Transition,
    /// Conjunctive, over pre-state variables only.
    pub psi: Formula,
    pub update: UpdateMap,
}

impl Certificate {
    pub fn display<'a>(&'a self, names: &'a [String]) -> impl fmt::Display + 'a {
        struct D<'a>(&'a Certificate, &'a [String]);
        impl fmt::Display for D<'_> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{} certifies {}", self.0.psi.display(self.1), self.0.loop_.display(self.1))
            }
        }
        D(self, names)
    }
}

/// Deterministic instance of a recursive conjunctive loop:
/// iteration counters of accelerated transitions are fixed to 1 and
/// post-state variables the condition does not mention keep their value.
/// Every run of the result is a run of `t`.
///
/// Returns `None` if `t` is not recursive and conjunctive, if some mentioned
/// variable has no deterministic update, or if other parameters remain.
pub fn refine(t: &Transition, dim: usize) -> Option<(Transition, UpdateMap, Formula)> {
    if !t.is_recursive() || !t.is_conjunctive() {
        return None;
    }
    let counters: Subst = t
        .cond
        .params()
        .into_iter()
        .filter(|p| matches!(p, VarId::Param(name) if name.starts_with("n$")))
        .map(|p| (p, Term::constant(1)))
        .collect();
    let mut parts = vec![t.cond.substitute(&counters).simplify()];
    for i in 0..dim {
        if !parts[0].mentions(&VarId::Post(i)) {
            parts.push(Formula::eq(Term::post(i), Term::pre(i)));
        }
    }
    let cond = Formula::and(parts).simplify();
    if !cond.params().is_empty() {
        return None;
    }
    let extracted = extract_update(&cond, dim);
    if !extracted.update.is_deterministic() {
        return None;
    }
    let post = extracted.update.post_subst();
    let guard = Formula::and(extracted.rest.into_iter().map(|l| Formula::Lit(l).substitute(&post))).simplify();
    Some((t.restrict(cond, Provenance::Chained), extracted.update, guard))
}

/// Recurrent-set iteration: `psi_0 = guard`, `psi_{k+1} = psi_k && psi_k[u]`
/// until `psi_k |= psi_k[u]`. Solver unknowns give `None`.
pub fn find_certificate(
    solver: &mut Solver,
    t: &Transition,
    dim: usize,
    max_iters: usize,
) -> Result<Option<Certificate>, SmtError> {
    let Some((loop_, update, guard)) = refine(t, dim) else {
        return Ok(None);
    };
    let step = update.pre_subst();
    let mut psi = guard;
    for _ in 0..=max_iters {
        if !solver.check_sat(&psi)?.is_sat() {
            return Ok(None);
        }
        let next = psi.substitute(&step);
        if size(&next) > MAX_PSI_SIZE {
            return Ok(None);
        }
        match solver.entails(&psi, &next)? {
            Entailment::Yes => return Ok(Some(Certificate { loop_, psi, update })),
            Entailment::No(_) => psi = Formula::and([psi, next]).simplify(),
            Entailment::Unknown(_) => return Ok(None),
        }
    }
    Ok(None)
}

#[derive(Debug, Error)]
pub enum CertError {
    #[error("certificate formula mentions non pre-state variable {0}")]
    NotAStateFormula(String),
    #[error("certificate loop is not recursive and conjunctive")]
    BadLoop,
    #[error("update is not deterministic over pre-state variables")]
    BadUpdate,
    #[error("certificate formula is unsatisfiable")]
    Unsatisfiable,
    #[error("certificate formula does not enable the loop (countermodel {0:?})")]
    NotEnabling(Model),
    #[error("certificate formula is not preserved by the update (countermodel {0:?})")]
    NotPreserved(Model),
    #[error("concrete simulation left the certificate at step {0}")]
    Simulation(usize),
    #[error("solver returned unknown: {0}")]
    Unknown(String),
    #[error(transparent)]
    Smt(#[from] SmtError),
}

/// Re-check a certificate from scratch with a fresh solver process.
pub fn verify_certificate(config: &SolverConfig, cert: &Certificate, dim: usize) -> Result<(), CertError> {
    let mut solver = Solver::new(config.clone())?;
    verify_with(&mut solver, cert, dim)
}

pub fn verify_with(solver: &mut Solver, cert: &Certificate, dim: usize) -> Result<(), CertError> {
    if let Some(v) = cert.psi.vars().into_iter().find(|v| !matches!(v, VarId::Pre(i) if *i < dim)) {
        return Err(CertError::NotAStateFormula(v.smt_name()));
    }
    if !cert.loop_.is_recursive() || !cert.loop_.is_conjunctive() {
        return Err(CertError::BadLoop);
    }
    if cert.update.0.len() != dim
        || cert.update.0.iter().any(|u| match u {
            Update::Det(t) => t.vars().iter().any(|v| !matches!(v, VarId::Pre(i) if *i < dim)),
            Update::Nondet => true,
        })
    {
        return Err(CertError::BadUpdate);
    }
    let start = match solver.check_sat(&cert.psi)? {
        SmtResult::Sat(m) => m,
        SmtResult::Unsat => return Err(CertError::Unsatisfiable),
        SmtResult::Unknown(r) => return Err(CertError::Unknown(r)),
    };
    let enabled = cert.loop_.cond.substitute(&cert.update.post_subst());
    match solver.entails(&cert.psi, &enabled)? {
        Entailment::Yes => {}
        Entailment::No(m) => return Err(CertError::NotEnabling(m)),
        Entailment::Unknown(r) => return Err(CertError::Unknown(r)),
    }
    match solver.entails(&cert.psi, &cert.psi.substitute(&cert.update.pre_subst()))? {
        Entailment::Yes => {}
        Entailment::No(m) => return Err(CertError::NotPreserved(m)),
        Entailment::Unknown(r) => return Err(CertError::Unknown(r)),
    }
    let state: Vec<BigInt> = (0..dim)
        .map(|i| start.get(&VarId::Pre(i)).cloned().unwrap_or_default())
        .collect();
    simulate(cert, state, SIMULATION_STEPS).map_err(CertError::Simulation)
}

/// Run the update `steps` times from `state`, checking before every step
/// that `psi` holds and the loop condition accepts the successor. Returns
/// the index of the first failing step. Nonlinear updates can grow values
/// doubly exponentially, so the run stops (successfully) once some value
/// exceeds [`SIMULATION_MAX_BITS`].
pub fn simulate(cert: &Certificate, mut state: Vec<BigInt>, steps: usize) -> Result<(), usize> {
    for k in 0..steps {
        let pre: Model = state.iter().enumerate().map(|(i, v)| (VarId::Pre(i), v.clone())).collect();
        let next: Option<Vec<BigInt>> = cert
            .update
            .0
            .iter()
            .map(|u| match u {
                Update::Det(t) => t.evaluate(&pre).ok(),
                Update::Nondet => None,
            })
            .collect();
        let Some(next) = next else { return Err(k) };
        let mut full = pre.clone();
        full.extend(next.iter().enumerate().map(|(i, v)| (VarId::Post(i), v.clone())));
        if cert.psi.evaluate(&pre) != Ok(true) || cert.loop_.cond.evaluate(&full) != Ok(true) {
            return Err(k);
        }
        if next.iter().any(|v| v.bits() > SIMULATION_MAX_BITS) {
            break;
        }
        state = next;
    }
    Ok(())
}
