//! Syntactic implicants: the conjunction of exactly those literals of a
//! formula that a given model satisfies.
//!
//! The set of implicants of a condition is finite but can be exponential,
//! so it is only ever enumerated lazily, one solver model at a time.

use std::sync::Arc;

use thiserror::Error;

use crate::formula::{Formula, Literal, Model, Subst};
use crate::smt::{ModelStream, SmtError, Solver};
use crate::ts::{link, Provenance, Transition};

#[derive(Debug, Error)]
pub enum ImplicantError {
    #[error("the model does not satisfy {0}")]
    NotAModel(Formula),
    #[error(transparent)]
    Smt(#[from] SmtError),
}

/// `sip` of `psi` at `model`. The model must satisfy `psi`.
pub fn sip_of_model(psi: &Formula, model: &Model) -> Result<Formula, ImplicantError> {
    sip_of_model_mapped(psi, &Subst::new(), model)
}

/// As [`sip_of_model`], but each literal of `psi` is first renamed by `s`
/// before it is evaluated. Used when the model belongs to a chained query in
/// which `psi`'s variables appear under other names.
pub fn sip_of_model_mapped(psi: &Formula, s: &Subst, model: &Model) -> Result<Formula, ImplicantError> {
    if psi.substitute(s).evaluate(model) != Ok(true) {
        return Err(ImplicantError::NotAModel(psi.clone()));
    }
    let kept: Vec<Formula> = psi
        .literals()
        .into_iter()
        .filter(|l| holds(l, s, model))
        .map(Formula::Lit)
        .collect();
    Ok(Formula::and(kept))
}

fn holds(l: &Literal, s: &Subst, model: &Model) -> bool {
    l.substitute(s).evaluate(model) == Ok(true)
}

/// `base|kept` with `kept` a conjunction of literals of `cond(base)`.
#[derive(Debug, Clone)]
pub struct Implicant {
    pub base: Arc<Transition>,
    pub kept: Formula,
}

impl Implicant {
    /// Conjunctive transitions are their own (unique) implicant; their
    /// identity is kept so learned transitions stay recognizable on the trace.
    pub fn transition(&self) -> Arc<Transition> {
        if self.base.is_conjunctive() {
            return self.base.clone();
        }
        Arc::new(
            self.base
                .restrict(self.kept.clone(), Provenance::Implicant(self.base.clone())),
        )
    }
}

/// Rejects a candidate implicant; may query the solver.
pub type Blocked<'a> = dyn FnMut(&Arc<Transition>, &mut Solver) -> Result<bool, SmtError> + 'a;

/// Lazy stream of active implicants after a trace whose chained transition
/// is `prefix` (`None` for the empty trace).
pub struct ActiveStream {
    prefix: Option<Transition>,
    candidates: std::vec::IntoIter<Arc<Transition>>,
    current: Option<Current>,
    unknowns: usize,
}

struct Current {
    base: Arc<Transition>,
    rename: Subst,
    models: ModelStream,
}

impl ActiveStream {
    /// `candidates` are tried in the given order.
    pub fn new(prefix: Option<Transition>, candidates: Vec<Arc<Transition>>) -> Self {
        ActiveStream {
            prefix,
            candidates: candidates.into_iter(),
            current: None,
            unknowns: 0,
        }
    }

    /// Candidates abandoned because the solver returned unknown.
    pub fn unknowns(&self) -> usize {
        self.unknowns
    }

    fn open(&self, base: &Arc<Transition>) -> Option<Current> {
        let (query, rename) = match &self.prefix {
            None if base.is_initial() => (base.cond.clone(), Subst::new()),
            None => return None,
            Some(p) if p.dst == base.src => {
                let (q, _, s2) = link(&p.cond, &base.cond);
                (q, s2)
            }
            Some(_) => return None,
        };
        Some(Current {
            base: base.clone(),
            rename,
            models: ModelStream::new(query),
        })
    }

    /// The next implicant whose chained condition is satisfiable and which
    /// `blocked` does not reject. Rejected implicants are skipped.
    pub fn next(
        &mut self,
        solver: &mut Solver,
        blocked: &mut Blocked<'_>,
    ) -> Result<Option<Implicant>, ImplicantError> {
        loop {
            if self.current.is_none() {
                let Some(base) = self.candidates.next() else {
                    return Ok(None);
                };
                self.current = self.open(&base);
                continue;
            }
            let cur = self.current.as_mut().unwrap();
            let Some(model) = cur.models.next(solver)? else {
                if cur.models.unknown().is_some() {
                    self.unknowns += 1;
                }
                self.current = None;
                continue;
            };
            let kept = sip_of_model_mapped(&cur.base.cond, &cur.rename, &model)?;
            cur.models.block(kept.substitute(&cur.rename).negate());
            let imp = Implicant {
                base: cur.base.clone(),
                kept,
            };
            if imp.base.is_conjunctive() {
                // Only one implicant exists.
                self.current = None;
            }
            if !blocked(&imp.transition(), solver)? {
                return Ok(Some(imp));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{model_of, VarId};
    use crate::parser::{parse, parse_formula};
    use crate::smt::SolverConfig;

    const LEADING: &str = "\
vars x y z
rule init -> l1 :: x' <= 0 && z' >= 5000 && y' <= z'
rule l1 -> l1 :: y <= 2*z && x++ && ((x < z && y==) || (x >= z && y++)) && z==
";

    fn names() -> Vec<String> {
        ["x", "y", "z"].iter().map(|s| s.to_string()).collect()
    }

    fn f(s: &str) -> Formula {
        parse_formula(s, &names(), false).unwrap()
    }

    #[test]
    fn keeps_all_satisfied_literals() {
        let m = model_of([(VarId::Pre(0), 2)]);
        assert_eq!(sip_of_model(&f("x > 0 && x > 1"), &m).unwrap(), f("x > 0 && x > 1"));
        let m = model_of([(VarId::Pre(0), 0), (VarId::Pre(1), 1)]);
        assert_eq!(sip_of_model(&f("x = 0 || y = 0"), &m).unwrap(), f("x = 0"));
    }

    #[test]
    fn rejects_non_models() {
        let m = model_of([(VarId::Pre(0), 0)]);
        assert!(matches!(
            sip_of_model(&f("x > 0"), &m),
            Err(ImplicantError::NotAModel(_))
        ));
    }

    #[test]
    fn branch_of_the_leading_loop() {
        let ts = parse(LEADING).unwrap();
        let cond = &ts.transitions()[1].cond;
        let m = model_of([
            (VarId::Pre(0), 0),
            (VarId::Pre(1), 0),
            (VarId::Pre(2), 10),
            (VarId::Post(0), 1),
            (VarId::Post(1), 0),
            (VarId::Post(2), 10),
        ]);
        let expected = f("y <= 2*z && x' = x + 1 && x < z && y' = y && z' = z");
        assert_eq!(
            sip_of_model(cond, &m).unwrap().literals().len(),
            expected.literals().len()
        );
        let mut got = sip_of_model(cond, &m).unwrap().literals();
        let mut want = expected.literals();
        got.sort();
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn only_the_x_below_z_branch_is_active_after_init() {
        let ts = parse(LEADING).unwrap();
        let mut solver = Solver::new(SolverConfig::default()).unwrap();
        let init = ts.transitions()[0].clone();
        let rec = ts.transitions()[1].clone();
        let mut stream = ActiveStream::new(Some((*init).clone()), vec![rec]);
        let mut found = Vec::new();
        while let Some(imp) = stream.next(&mut solver, &mut |_, _| Ok(false)).unwrap() {
            found.push(imp.kept);
        }
        assert_eq!(found.len(), 1);
        assert!(found[0].literals().contains(&match f("x < z") {
            Formula::Lit(l) => l,
            _ => unreachable!(),
        }));
    }

    #[test]
    fn empty_trace_needs_initial_candidates() {
        let ts = parse(LEADING).unwrap();
        let mut solver = Solver::new(SolverConfig::default()).unwrap();
        let mut stream = ActiveStream::new(None, ts.transitions().to_vec());
        let first = stream.next(&mut solver, &mut |_, _| Ok(false)).unwrap().unwrap();
        assert!(first.base.is_initial());
        assert!(stream.next(&mut solver, &mut |_, _| Ok(false)).unwrap().is_none());
        let mut empty = ActiveStream::new(None, Vec::new());
        assert!(empty.next(&mut solver, &mut |_, _| Ok(false)).unwrap().is_none());
    }
}
