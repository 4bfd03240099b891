//! Exact acceleration of recursive conjunctive transitions whose updates are
//! deterministic and have simple closed forms.
//!
//! For `l -> l [phi]` the result is `l -> l [n > 0 && x' = u^n(x) && G]`
//! with a fresh counter `n`, where `G` states that every guard literal holds
//! at each of the iterations `0 .. n-1`. Only loops for which this is an
//! exact description of the transitive closure are accepted.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::formula::{Formula, Literal, Rel, Subst, Term, VarId};
use crate::fresh;
use crate::ts::{Provenance, Transition};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Update {
    /// `x_i' = t` with `t` over pre-state variables.
    Det(Term),
    Nondet,
}

/// One entry per program variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateMap(pub Vec<Update>);

impl UpdateMap {
    pub fn is_deterministic(&self) -> bool {
        self.0.iter().all(|u| matches!(u, Update::Det(_)))
    }

    pub fn get(&self, i: usize) -> &Update {
        &self.0[i]
    }

    /// `Pre(i) |-> t_i`; panics on a nondeterministic entry.
    pub fn pre_subst(&self) -> Subst {
        self.0
            .iter()
            .enumerate()
            .map(|(i, u)| match u {
                Update::Det(t) => (VarId::Pre(i), t.clone()),
                Update::Nondet => panic!("nondeterministic update for variable {i}"),
            })
            .collect()
    }

    /// `Post(i) |-> t_i` for the deterministic entries.
    pub fn post_subst(&self) -> Subst {
        self.0
            .iter()
            .enumerate()
            .filter_map(|(i, u)| match u {
                Update::Det(t) => Some((VarId::Post(i), t.clone())),
                Update::Nondet => None,
            })
            .collect()
    }
}

impl fmt::Display for UpdateMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, u) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            match u {
                Update::Det(t) => write!(f, "x{i} := {t}")?,
                Update::Nondet => write!(f, "x{i} := *")?,
            }
        }
        Ok(())
    }
}

/// Update map of a conjunctive condition plus the literals that are not
/// used as defining equalities.
#[derive(Debug, Clone)]
pub struct Extracted {
    pub update: UpdateMap,
    pub rest: Vec<Literal>,
}

/// Picks, for each variable, the first equality `x_i' = t` with `t` over
/// pre-state variables. Everything else stays in `rest`.
pub fn extract_update(psi: &Formula, dim: usize) -> Extracted {
    let mut update = vec![Update::Nondet; dim];
    let mut rest = Vec::new();
    for lit in psi.literals() {
        match defining_equality(&lit) {
            Some((i, t)) if i < dim && update[i] == Update::Nondet => update[i] = Update::Det(t),
            _ => rest.push(lit),
        }
    }
    Extracted {
        update: UpdateMap(update),
        rest,
    }
}

fn defining_equality(lit: &Literal) -> Option<(usize, Term)> {
    if lit.rel() != Rel::Eq {
        return None;
    }
    let vars = lit.vars();
    let mut posts = vars.iter().filter(|v| v.is_post());
    let post = posts.next()?.clone();
    if posts.next().is_some() || vars.iter().any(VarId::is_param) {
        return None;
    }
    let c = lit.term().linear_coefficient(&post)?;
    if !c.abs().is_one() {
        return None;
    }
    let rest = lit.term() - &Term::var(post.clone()).scale(&c);
    let t = if c.is_one() { -&rest } else { rest };
    let VarId::Post(i) = post else { unreachable!() };
    Some((i, t))
}

/// Why a loop could not be accelerated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AccelFailure {
    NotRecursive,
    NotConjunctive,
    NondetVar(usize),
    NonConstantIncrement(usize),
    GuardNotMonotone(Literal),
    Nonlinear(usize),
    SolverUnknown,
}

impl fmt::Display for AccelFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AccelFailure::NotRecursive => write!(f, "transition is not recursive"),
            AccelFailure::NotConjunctive => write!(f, "condition is not conjunctive"),
            AccelFailure::NondetVar(i) => write!(f, "update of x{i} is not deterministic"),
            AccelFailure::NonConstantIncrement(i) => write!(f, "no supported closed form for x{i}"),
            AccelFailure::GuardNotMonotone(l) => write!(f, "guard {} has non-constant drift", Formula::Lit(l.clone())),
            AccelFailure::Nonlinear(i) => write!(f, "nonlinear recurrence for x{i}"),
            AccelFailure::SolverUnknown => write!(f, "solver returned unknown"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClosedForm {
    /// `u^n(x)_i` for every variable, valid for `n >= 1`.
    pub terms: Vec<Term>,
    /// Some term multiplies `n` with a program variable.
    pub nonlinear: bool,
}

/// n-fold composition of a deterministic update.
pub fn closed_form(u: &UpdateMap, n: &VarId) -> Result<ClosedForm, AccelFailure> {
    let mut t = Vec::with_capacity(u.0.len());
    for (i, e) in u.0.iter().enumerate() {
        match e {
            Update::Det(t_i) => t.push(t_i.clone()),
            Update::Nondet => return Err(AccelFailure::NondetVar(i)),
        }
    }
    let invariant: Vec<bool> = t.iter().enumerate().map(|(i, t_i)| *t_i == Term::pre(i)).collect();
    let only_invariant = |term: &Term| {
        term.vars()
            .iter()
            .all(|v| matches!(v, VarId::Pre(j) if invariant[*j]))
    };
    let n_term = Term::var(n.clone());
    let mut terms = Vec::with_capacity(t.len());
    let mut nonlinear = false;
    for (i, t_i) in t.iter().enumerate() {
        let x_i = Term::pre(i);
        if invariant[i] {
            terms.push(x_i);
            continue;
        }
        if only_invariant(t_i) {
            // Reset to a value that no later iteration changes.
            terms.push(t_i.clone());
            continue;
        }
        let increment = t_i - &x_i;
        if !increment.mentions(&VarId::Pre(i)) && only_invariant(&increment) {
            nonlinear |= increment.as_constant().is_none();
            terms.push(&x_i + &(&n_term * &increment));
            continue;
        }
        if !t_i.is_linear() {
            return Err(AccelFailure::Nonlinear(i));
        }
        return Err(AccelFailure::NonConstantIncrement(i));
    }
    Ok(ClosedForm { terms, nonlinear })
}

#[derive(Debug, Clone)]
pub struct Accelerated {
    pub transition: Transition,
    pub counter: VarId,
    pub nonlinear: bool,
}

pub type AccelResult = Result<Accelerated, AccelFailure>;

/// Accelerate a recursive conjunctive transition. The result's provenance
/// is `Accelerated([t])`; callers that accelerate a chained sequence replace
/// it with the sequence.
pub fn accelerate(t: &Transition, dim: usize) -> AccelResult {
    if !t.is_recursive() {
        return Err(AccelFailure::NotRecursive);
    }
    if !t.is_conjunctive() {
        return Err(AccelFailure::NotConjunctive);
    }
    if t.cond == Formula::False {
        // The empty relation is its own closure.
        return Ok(Accelerated {
            transition: t.restrict(Formula::False, Provenance::Accelerated(vec![Arc::new(t.clone())])),
            counter: fresh::fresh_param("n"),
            nonlinear: false,
        });
    }
    let Extracted { update, rest } = extract_update(&t.cond, dim);
    if let Some(i) = update.0.iter().position(|u| *u == Update::Nondet) {
        return Err(AccelFailure::NondetVar(i));
    }
    let post = update.post_subst();
    let step = update.pre_subst();
    let n = fresh::fresh_param("n");
    let n_term = Term::var(n.clone());
    let cf = closed_form(&update, &n)?;

    let mut parts = vec![Formula::gt(n_term.clone(), Term::zero())];
    for lit in rest {
        // Remaining post-state occurrences are fixed by the update.
        let guard = Formula::Lit(lit.clone()).substitute(&post);
        for g in guard.literals() {
            if g.vars().iter().any(VarId::is_param) {
                return Err(AccelFailure::NondetVar(first_param_owner(&lit)));
            }
            parts.push(accelerate_guard(&g, &step, &n_term)?);
        }
        if guard == Formula::False {
            parts.push(Formula::False);
        }
    }
    for (i, term) in cf.terms.iter().enumerate() {
        parts.push(Formula::eq(Term::post(i), term.clone()));
    }
    let cond = Formula::and(parts).simplify();
    Ok(Accelerated {
        transition: t.restrict(cond, Provenance::Accelerated(vec![Arc::new(t.clone())])),
        counter: n,
        nonlinear: cf.nonlinear,
    })
}

fn first_param_owner(lit: &Literal) -> usize {
    lit.vars()
        .iter()
        .find_map(|v| match v {
            VarId::Pre(i) | VarId::Post(i) => Some(*i),
            VarId::Param(_) => None,
        })
        .unwrap_or(0)
}

/// `g` at every iteration `0 .. n-1`, given a constant drift.
fn accelerate_guard(g: &Literal, step: &Subst, n: &Term) -> Result<Formula, AccelFailure> {
    let t = g.term();
    let drift = &t.substitute(step) - t;
    let Some(delta) = drift.as_constant() else {
        return Err(AccelFailure::GuardNotMonotone(g.clone()));
    };
    if delta.is_zero() {
        return Ok(Formula::Lit(g.clone()));
    }
    let last = || t + &(n - &Term::constant(1)).scale(&delta);
    Ok(match g.rel() {
        Rel::Le => le_at_extreme(t, &delta, &last()),
        // t = 0 at iterations 0 and n-1 with nonzero drift: only n = 1.
        Rel::Eq => Formula::and([
            le_at_extreme(t, &delta, &last()),
            le_at_extreme(&-t, &-&delta, &-&last()),
        ]),
        Rel::Ne => return Err(AccelFailure::GuardNotMonotone(g.clone())),
    })
}

/// `t + k*delta <= 0` for all `0 <= k < n` reduces to its largest instance.
fn le_at_extreme(t0: &Term, delta: &BigInt, t_last: &Term) -> Formula {
    if delta.is_positive() {
        Literal::build(t_last.clone(), Rel::Le)
    } else {
        Literal::build(t0.clone(), Rel::Le)
    }
}
