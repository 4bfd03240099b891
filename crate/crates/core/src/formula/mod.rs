//! Quantifier-free integer arithmetic formulas in negation normal form.
//!
//! Literals are kept in the canonical shape `t rel 0` with `rel` one of
//! `=`, `!=` or `<=`; strict inequalities are tightened (`t < 0` becomes
//! `t + 1 <= 0`) and coefficients are divided by their gcd, so syntactically
//! different spellings of the same constraint collapse to one literal.

mod term;

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

pub use term::{default_name, Model, Monomial, Subst, Term, VarId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("model does not assign variable {}", default_name(.0))]
    Unassigned(VarId),
}

/// Relation of a normalized literal against zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rel {
    Eq,
    Ne,
    Le,
}

/// Comparison operators accepted by the smart constructors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

/// `term rel 0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    term: Term,
    rel: Rel,
}

impl Literal {
    pub fn term(&self) -> &Term {
        &self.term
    }

    pub fn rel(&self) -> Rel {
        self.rel
    }

    /// Normalize `term rel 0`. Constant literals fold to `True`/`False`.
    pub fn build(term: Term, rel: Rel) -> Formula {
        if let Some(c) = term.as_constant() {
            let holds = match rel {
                Rel::Eq => c.is_zero(),
                Rel::Ne => !c.is_zero(),
                Rel::Le => !c.is_positive(),
            };
            return Formula::from_bool(holds);
        }
        let g = term.content();
        let c = term.constant_part();
        let term = match rel {
            Rel::Le => {
                // g*q + c <= 0  <=>  q + ceil(c/g) <= 0
                let rest = term.without_constant().div_exact(&g);
                let k = c.div_ceil(&g);
                &rest + &Term::constant(k)
            }
            Rel::Eq | Rel::Ne => {
                if !(&c % &g).is_zero() {
                    return Formula::from_bool(rel == Rel::Ne);
                }
                let t = term.div_exact(&g);
                if t.leading_sign_negative() {
                    -&t
                } else {
                    t
                }
            }
        };
        Formula::Lit(Literal { term, rel })
    }

    /// Complement; always again a single literal.
    pub fn negate(&self) -> Literal {
        match self.rel {
            Rel::Eq => Literal {
                term: self.term.clone(),
                rel: Rel::Ne,
            },
            Rel::Ne => Literal {
                term: self.term.clone(),
                rel: Rel::Eq,
            },
            // not (t <= 0)  <=>  -t + 1 <= 0
            Rel::Le => match Literal::build(&Term::constant(1) - &self.term, Rel::Le) {
                Formula::Lit(l) => l,
                other => unreachable!("negating a non-constant literal gave {other:?}"),
            },
        }
    }

    pub fn evaluate(&self, model: &Model) -> Result<bool, EvalError> {
        let v = self.term.evaluate(model)?;
        Ok(match self.rel {
            Rel::Eq => v.is_zero(),
            Rel::Ne => !v.is_zero(),
            Rel::Le => !v.is_positive(),
        })
    }

    pub fn substitute(&self, s: &Subst) -> Formula {
        Literal::build(self.term.substitute(s), self.rel)
    }

    pub fn vars(&self) -> BTreeSet<VarId> {
        self.term.vars()
    }

    pub fn to_smtlib(&self) -> String {
        let t = self.term.to_smtlib();
        match self.rel {
            Rel::Eq => format!("(= {t} 0)"),
            Rel::Ne => format!("(distinct {t} 0)"),
            Rel::Le => format!("(<= {t} 0)"),
        }
    }

    /// `lhs rel rhs` with all coefficients positive on both sides.
    fn fmt_with(&self, f: &mut fmt::Formatter<'_>, name: &dyn Fn(&VarId) -> String) -> fmt::Result {
        // Orient (dis)equalities so that post-state variables read `x' = ...`.
        let flip = self.rel != Rel::Le
            && self
                .term
                .monomials()
                .find(|(m, _)| m.vars().iter().any(VarId::is_post))
                .is_some_and(|(_, c)| c.is_negative());
        let term = if flip { -&self.term } else { self.term.clone() };
        let mut lhs = Term::zero();
        let mut rhs = Term::zero();
        for (m, c) in term.monomials() {
            let mut single = Term::constant(c.abs());
            for v in m.vars() {
                single = &single * &Term::var(v.clone());
            }
            if c.is_negative() {
                rhs = &rhs + &single;
            } else {
                lhs = &lhs + &single;
            }
        }
        let op = match self.rel {
            Rel::Eq => "=",
            Rel::Ne => "!=",
            Rel::Le => "<=",
        };
        lhs.fmt_with(f, name)?;
        write!(f, " {op} ")?;
        rhs.fmt_with(f, name)
    }
}

/// Quantifier-free formula in negation normal form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    True,
    False,
    Lit(Literal),
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

impl Formula {
    pub fn from_bool(b: bool) -> Formula {
        if b {
            Formula::True
        } else {
            Formula::False
        }
    }

    pub fn cmp(lhs: Term, op: CmpOp, rhs: Term) -> Formula {
        let d = &lhs - &rhs;
        match op {
            CmpOp::Eq => Literal::build(d, Rel::Eq),
            CmpOp::Ne => Literal::build(d, Rel::Ne),
            CmpOp::Le => Literal::build(d, Rel::Le),
            CmpOp::Lt => Literal::build(&d + &Term::constant(1), Rel::Le),
            CmpOp::Ge => Literal::build(-&d, Rel::Le),
            CmpOp::Gt => Literal::build(&Term::constant(1) - &d, Rel::Le),
        }
    }

    pub fn eq(lhs: Term, rhs: Term) -> Formula {
        Formula::cmp(lhs, CmpOp::Eq, rhs)
    }
    pub fn ne(lhs: Term, rhs: Term) -> Formula {
        Formula::cmp(lhs, CmpOp::Ne, rhs)
    }
    pub fn le(lhs: Term, rhs: Term) -> Formula {
        Formula::cmp(lhs, CmpOp::Le, rhs)
    }
    pub fn lt(lhs: Term, rhs: Term) -> Formula {
        Formula::cmp(lhs, CmpOp::Lt, rhs)
    }
    pub fn ge(lhs: Term, rhs: Term) -> Formula {
        Formula::cmp(lhs, CmpOp::Ge, rhs)
    }
    pub fn gt(lhs: Term, rhs: Term) -> Formula {
        Formula::cmp(lhs, CmpOp::Gt, rhs)
    }

    /// Conjunction; flattens nested conjunctions and drops `True`.
    pub fn and(parts: impl IntoIterator<Item = Formula>) -> Formula {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Formula::True => {}
                Formula::False => return Formula::False,
                Formula::And(xs) => out.extend(xs),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::True,
            1 => out.pop().unwrap(),
            _ => Formula::And(out),
        }
    }

    /// Disjunction; flattens nested disjunctions and drops `False`.
    pub fn or(parts: impl IntoIterator<Item = Formula>) -> Formula {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Formula::False => {}
                Formula::True => return Formula::True,
                Formula::Or(xs) => out.extend(xs),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::False,
            1 => out.pop().unwrap(),
            _ => Formula::Or(out),
        }
    }

    pub fn negate(&self) -> Formula {
        match self {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            Formula::Lit(l) => Formula::Lit(l.negate()),
            Formula::And(xs) => Formula::or(xs.iter().map(Formula::negate)),
            Formula::Or(xs) => Formula::and(xs.iter().map(Formula::negate)),
        }
    }

    /// No `Or` node occurs.
    pub fn is_conjunctive(&self) -> bool {
        match self {
            Formula::Or(_) => false,
            Formula::And(xs) => xs.iter().all(Formula::is_conjunctive),
            _ => true,
        }
    }

    pub fn is_linear(&self) -> bool {
        self.literals().iter().all(|l| l.term.is_linear())
    }

    /// Top-level conjuncts (a non-`And` formula is its own single conjunct).
    pub fn conjuncts(&self) -> Vec<&Formula> {
        match self {
            Formula::And(xs) => xs.iter().collect(),
            Formula::True => Vec::new(),
            other => vec![other],
        }
    }

    /// Distinct literal occurrences, in order of first appearance.
    pub fn literals(&self) -> Vec<Literal> {
        fn walk(f: &Formula, seen: &mut BTreeSet<Literal>, out: &mut Vec<Literal>) {
            match f {
                Formula::Lit(l) => {
                    if seen.insert(l.clone()) {
                        out.push(l.clone());
                    }
                }
                Formula::And(xs) | Formula::Or(xs) => {
                    xs.iter().for_each(|x| walk(x, seen, out));
                }
                Formula::True | Formula::False => {}
            }
        }
        let mut out = Vec::new();
        walk(self, &mut BTreeSet::new(), &mut out);
        out
    }

    pub fn vars(&self) -> BTreeSet<VarId> {
        self.literals().iter().flat_map(|l| l.vars()).collect()
    }

    pub fn params(&self) -> BTreeSet<VarId> {
        self.vars().into_iter().filter(VarId::is_param).collect()
    }

    pub fn mentions(&self, v: &VarId) -> bool {
        self.literals().iter().any(|l| l.term.mentions(v))
    }

    pub fn substitute(&self, s: &Subst) -> Formula {
        if s.is_empty() {
            return self.clone();
        }
        match self {
            Formula::True | Formula::False => self.clone(),
            Formula::Lit(l) => l.substitute(s),
            Formula::And(xs) => Formula::and(xs.iter().map(|x| x.substitute(s))),
            Formula::Or(xs) => Formula::or(xs.iter().map(|x| x.substitute(s))),
        }
    }

    pub fn evaluate(&self, model: &Model) -> Result<bool, EvalError> {
        Ok(match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Lit(l) => l.evaluate(model)?,
            Formula::And(xs) => {
                // Evaluate everything so missing variables are always reported.
                let mut all = true;
                for x in xs {
                    all &= x.evaluate(model)?;
                }
                all
            }
            Formula::Or(xs) => {
                let mut any = false;
                for x in xs {
                    any |= x.evaluate(model)?;
                }
                any
            }
        })
    }

    /// Kleene evaluation under a partial assignment: `None` when the value
    /// depends on unassigned variables.
    pub fn partial_evaluate(&self, model: &Model) -> Option<bool> {
        match self {
            Formula::True => Some(true),
            Formula::False => Some(false),
            Formula::Lit(l) => l.evaluate(model).ok(),
            Formula::And(xs) => {
                let mut unknown = false;
                for x in xs {
                    match x.partial_evaluate(model) {
                        Some(false) => return Some(false),
                        None => unknown = true,
                        Some(true) => {}
                    }
                }
                if unknown {
                    None
                } else {
                    Some(true)
                }
            }
            Formula::Or(xs) => {
                let mut unknown = false;
                for x in xs {
                    match x.partial_evaluate(model) {
                        Some(true) => return Some(true),
                        None => unknown = true,
                        Some(false) => {}
                    }
                }
                if unknown {
                    None
                } else {
                    Some(false)
                }
            }
        }
    }

    /// Flatten, fold units and drop duplicate children. Equivalence
    /// preserving; no semantic subsumption is attempted.
    pub fn simplify(&self) -> Formula {
        match self {
            Formula::True | Formula::False | Formula::Lit(_) => self.clone(),
            Formula::And(xs) => {
                let flat = Formula::and(xs.iter().map(Formula::simplify));
                match flat {
                    Formula::And(ys) => Formula::and(dedup(ys)),
                    other => other,
                }
            }
            Formula::Or(xs) => {
                let flat = Formula::or(xs.iter().map(Formula::simplify));
                match flat {
                    Formula::Or(ys) => Formula::or(dedup(ys)),
                    other => other,
                }
            }
        }
    }

    /// Eliminate variables selected by `eliminable` using top-level
    /// equalities `c*v + t = 0` with `c = ±1` and `v` not in `t`.
    ///
    /// The selected variables are read existentially, so the result is
    /// equivalent to `exists v. self` for each eliminated `v`.
    pub fn eliminate_by_equalities(&self, eliminable: &dyn Fn(&VarId) -> bool) -> Formula {
        let mut current = self.clone();
        'outer: loop {
            let conjuncts: Vec<Formula> = current.conjuncts().into_iter().cloned().collect();
            for (idx, c) in conjuncts.iter().enumerate() {
                let Formula::Lit(lit) = c else { continue };
                if lit.rel != Rel::Eq {
                    continue;
                }
                for v in lit.vars() {
                    if !eliminable(&v) {
                        continue;
                    }
                    let Some(coeff) = lit.term.linear_coefficient(&v) else {
                        continue;
                    };
                    if !coeff.abs().is_one() {
                        continue;
                    }
                    // c*v + rest = 0  =>  v = -rest / c
                    let rest = &lit.term - &Term::var(v.clone()).scale(&coeff);
                    let solution = if coeff.is_one() { -&rest } else { rest };
                    let mut s = Subst::new();
                    s.insert(v.clone(), solution);
                    current = Formula::and(
                        conjuncts
                            .iter()
                            .enumerate()
                            .filter(|(j, _)| *j != idx)
                            .map(|(_, f)| f.substitute(&s)),
                    )
                    .simplify();
                    continue 'outer;
                }
            }
            return current;
        }
    }

    pub fn to_smtlib(&self) -> String {
        match self {
            Formula::True => "true".to_string(),
            Formula::False => "false".to_string(),
            Formula::Lit(l) => l.to_smtlib(),
            Formula::And(xs) => format!(
                "(and {})",
                xs.iter().map(Formula::to_smtlib).collect::<Vec<_>>().join(" ")
            ),
            Formula::Or(xs) => format!(
                "(or {})",
                xs.iter().map(Formula::to_smtlib).collect::<Vec<_>>().join(" ")
            ),
        }
    }

    /// Display using the given program-variable names (`x`, `x'`, params verbatim).
    pub fn display<'a>(&'a self, names: &'a [String]) -> Named<'a> {
        Named { f: self, names }
    }

    fn fmt_with(&self, f: &mut fmt::Formatter<'_>, name: &dyn Fn(&VarId) -> String, top: bool) -> fmt::Result {
        match self {
            Formula::True => write!(f, "true"),
            Formula::False => write!(f, "false"),
            Formula::Lit(l) => l.fmt_with(f, name),
            Formula::And(xs) | Formula::Or(xs) => {
                let sep = if matches!(self, Formula::And(_)) { " && " } else { " || " };
                if !top {
                    write!(f, "(")?;
                }
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, "{sep}")?;
                    }
                    x.fmt_with(f, name, false)?;
                }
                if !top {
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

fn dedup(xs: Vec<Formula>) -> Vec<Formula> {
    let mut seen = BTreeSet::new();
    xs.into_iter().filter(|x| seen.insert(x.clone())).collect()
}

impl From<Literal> for Formula {
    fn from(l: Literal) -> Self {
        Formula::Lit(l)
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_with(f, &default_name, true)
    }
}

pub struct Named<'a> {
    f: &'a Formula,
    names: &'a [String],
}

impl fmt::Display for Named<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = |v: &VarId| var_name(v, self.names);
        self.f.fmt_with(f, &name, true)
    }
}

/// Human-readable name of a variable given the program-variable names.
pub fn var_name(v: &VarId, names: &[String]) -> String {
    match v {
        VarId::Pre(i) => names.get(*i).cloned().unwrap_or_else(|| format!("x{i}")),
        VarId::Post(i) => format!(
            "{}'",
            names.get(*i).cloned().unwrap_or_else(|| format!("x{i}"))
        ),
        VarId::Param(p) => p.to_string(),
    }
}

/// Display a term with program-variable names.
pub fn display_term(t: &Term, names: &[String]) -> String {
    struct D<'a>(&'a Term, &'a [String]);
    impl fmt::Display for D<'_> {
        fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            let names = self.1;
            self.0.fmt_with(f, &|v| var_name(v, names))
        }
    }
    D(t, names).to_string()
}

/// Model with small integer values, handy in tests.
pub fn model_of(pairs: impl IntoIterator<Item = (VarId, i64)>) -> Model {
    pairs.into_iter().map(|(v, k)| (v, BigInt::from(k))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn x() -> Term {
        Term::pre(0)
    }
    fn y() -> Term {
        Term::pre(1)
    }
    fn z() -> Term {
        Term::pre(2)
    }
    fn c(k: i64) -> Term {
        Term::constant(k)
    }

    #[test]
    fn strict_inequalities_are_tightened() {
        assert_eq!(Formula::lt(x(), c(0)), Formula::le(&x() + &c(1), c(0)));
        assert_eq!(Formula::gt(x(), y()), Formula::ge(x(), &y() + &c(1)));
    }

    #[test]
    fn equalities_are_sign_canonical() {
        assert_eq!(Formula::eq(x(), y()), Formula::eq(y(), x()));
        assert_eq!(Formula::eq(x().scale(&2.into()), c(3)), Formula::False);
        assert_eq!(Formula::ne(x().scale(&2.into()), c(3)), Formula::True);
    }

    #[test]
    fn gcd_tightening() {
        // 2x <= 3  <=>  x <= 1
        assert_eq!(
            Formula::le(x().scale(&2.into()), c(3)),
            Formula::le(x(), c(1))
        );
    }

    #[test]
    fn substitute_renames_post_variable() {
        // (x' = x + 1)[x' -> x''] = (x'' = x + 1)
        let f = Formula::eq(Term::post(0), &x() + &c(1));
        let mut s = Subst::new();
        s.insert(VarId::Post(0), Term::param("v$0"));
        assert_eq!(
            f.substitute(&s),
            Formula::eq(Term::param("v$0"), &x() + &c(1))
        );
        let g = Formula::and([Formula::eq(x(), y()), Formula::gt(x(), c(0))]);
        assert_eq!(g.substitute(&Subst::new()), g);
    }

    #[test]
    fn literals_of_formulas() {
        let f = Formula::and([Formula::gt(x(), c(0)), Formula::gt(x(), c(1))]);
        assert_eq!(f.literals().len(), 2);
        assert!(Formula::True.literals().is_empty());
        let g = Formula::or([Formula::lt(x(), y()), Formula::ge(x(), y())]);
        assert_eq!(g.literals().len(), 2);
    }

    #[test]
    fn evaluate_examples() {
        // x = y /\ x > 0 /\ x' = x /\ y' = y - 1 at (4,4,4) -> (4,3,7)
        let f = Formula::and([
            Formula::eq(x(), y()),
            Formula::gt(x(), c(0)),
            Formula::eq(Term::post(0), x()),
            Formula::eq(Term::post(1), &y() - &c(1)),
        ]);
        let m = model_of([
            (VarId::Pre(0), 4),
            (VarId::Pre(1), 4),
            (VarId::Pre(2), 4),
            (VarId::Post(0), 4),
            (VarId::Post(1), 3),
            (VarId::Post(2), 7),
        ]);
        assert_eq!(f.evaluate(&m), Ok(true));
        assert_eq!(Formula::False.evaluate(&m), Ok(false));
        let g = Formula::le(&x() + &y(), z().scale(&2.into()));
        let m = model_of([(VarId::Pre(0), 1), (VarId::Pre(1), 1), (VarId::Pre(2), 1)]);
        assert_eq!(g.evaluate(&m), Ok(true));
    }

    #[test]
    fn evaluate_reports_missing_variables() {
        let f = Formula::gt(x(), c(0));
        assert_eq!(
            f.evaluate(&Model::new()),
            Err(EvalError::Unassigned(VarId::Pre(0)))
        );
    }

    #[test]
    fn simplify_examples() {
        let p = Formula::gt(x(), c(0));
        assert_eq!(Formula::And(vec![Formula::True, p.clone()]).simplify(), p);
        assert_eq!(Formula::And(vec![p.clone(), p.clone()]).simplify(), p);
        assert_eq!(
            Formula::And(vec![Formula::le(c(3), c(5))]).simplify(),
            Formula::True
        );
    }

    #[test]
    fn elimination_keeps_existential_meaning() {
        // exists v. v = x + 1 /\ x' = v  ==  x' = x + 1
        let f = Formula::and([
            Formula::eq(Term::param("v$0"), &x() + &c(1)),
            Formula::eq(Term::post(0), Term::param("v$0")),
        ]);
        let g = f.eliminate_by_equalities(&|v| v.is_param());
        assert_eq!(g, Formula::eq(Term::post(0), &x() + &c(1)));
    }

    #[test]
    fn smtlib_is_deterministic() {
        let f = Formula::and([
            Formula::le(Term::post(0), c(0)),
            Formula::or([Formula::ne(x(), y()), Formula::ge(z(), c(5000))]),
        ]);
        assert_eq!(
            f.to_smtlib(),
            "(and (<= post0 0) (or (distinct (+ pre0 (* (- 1) pre1)) 0) (<= (+ 5000 (* (- 1) pre2)) 0)))"
        );
    }

    #[test]
    fn display_uses_names() {
        let names = vec!["x".to_string(), "y".to_string()];
        let f = Formula::and([
            Formula::eq(Term::post(0), &x() + &c(1)),
            Formula::le(y(), x().scale(&2.into())),
        ]);
        assert_eq!(f.display(&names).to_string(), "x' = x + 1 && y <= 2*x");
    }

    fn arb_term() -> impl Strategy<Value = Term> {
        (
            proptest::collection::vec(-2i64..=2, 3),
            -3i64..=3,
        )
            .prop_map(|(cs, k)| {
                cs.iter().enumerate().fold(Term::constant(k), |acc, (i, c)| {
                    &acc + &Term::pre(i).scale(&BigInt::from(*c))
                })
            })
    }

    fn arb_formula() -> impl Strategy<Value = Formula> {
        let leaf = (arb_term(), 0usize..6).prop_map(|(t, op)| {
            let op = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge][op];
            Formula::cmp(t, op, Term::zero())
        });
        leaf.prop_recursive(3, 12, 3, |inner| {
            prop_oneof![
                proptest::collection::vec(inner.clone(), 1..4).prop_map(Formula::And),
                proptest::collection::vec(inner, 1..4).prop_map(Formula::Or),
            ]
        })
    }

    fn grid() -> Vec<Model> {
        let mut out = Vec::new();
        for a in -3..=3 {
            for b in -3..=3 {
                for c in -3..=3 {
                    out.push(model_of([(VarId::Pre(0), a), (VarId::Pre(1), b), (VarId::Pre(2), c)]));
                }
            }
        }
        out
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn negation_complements(f in arb_formula()) {
            let n = f.negate();
            for m in grid() {
                prop_assert_eq!(n.evaluate(&m).unwrap(), !f.evaluate(&m).unwrap());
            }
        }

        #[test]
        fn simplify_preserves_truth(f in arb_formula()) {
            let s = f.simplify();
            for m in grid() {
                prop_assert_eq!(s.evaluate(&m).unwrap(), f.evaluate(&m).unwrap());
            }
        }

        #[test]
        fn substitution_matches_semantic_update(f in arb_formula(), t in arb_term()) {
            let mut s = Subst::new();
            s.insert(VarId::Pre(0), t.clone());
            let g = f.substitute(&s);
            for m in grid() {
                let mut m2 = m.clone();
                m2.insert(VarId::Pre(0), t.evaluate(&m).unwrap());
                prop_assert_eq!(g.evaluate(&m).unwrap(), f.evaluate(&m2).unwrap());
            }
        }
    }
}
