//! Transitions, transition systems, chaining and a bounded concrete-execution
//! oracle.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use thiserror::Error;

use crate::formula::{Formula, Literal, Model, Rel, Subst, Term, VarId};
use crate::fresh;
use crate::nonterm::Certificate;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TsError {
    #[error("transition {0} -> {1} targets the reserved location init")]
    TargetsInit(Location, Location),
    #[error("transition {0} -> {1} leaves the reserved location err")]
    LeavesErr(Location, Location),
    #[error("input transition {0} -> {1} is unsafe (targets err)")]
    Unsafe(Location, Location),
    #[error("variable index {0} out of range for dimension {1}")]
    BadIndex(usize, usize),
    #[error("cannot chain an empty sequence of transitions")]
    EmptySequence,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Location(Arc<str>);

impl Location {
    pub fn new(name: &str) -> Self {
        Location(Arc::from(name))
    }

    pub fn init() -> Self {
        Location::new("init")
    }

    pub fn err() -> Self {
        Location::new("err")
    }

    pub fn name(&self) -> &str {
        &self.0
    }

    pub fn is_init(&self) -> bool {
        &*self.0 == "init"
    }

    pub fn is_err(&self) -> bool {
        &*self.0 == "err"
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Where a transition came from. Carried so witnesses can be replayed.
#[derive(Debug, Clone)]
pub enum Provenance {
    /// Index into the input system.
    Original(usize),
    /// Syntactic implicant of the given transition.
    Implicant(Arc<Transition>),
    /// Acceleration of the chained sequence.
    Accelerated(Vec<Arc<Transition>>),
    /// Learned `l -> err` transition backed by a certificate for the loop.
    ErrCert {
        loop_: Vec<Arc<Transition>>,
        certificate: Arc<Certificate>,
    },
    /// Result of chaining.
    Chained,
}

/// `src -> dst [cond]`. Equality ignores provenance.
#[derive(Debug, Clone)]
pub struct Transition {
    pub src: Location,
    pub dst: Location,
    pub cond: Formula,
    pub provenance: Provenance,
}

impl PartialEq for Transition {
    fn eq(&self, other: &Self) -> bool {
        self.src == other.src && self.dst == other.dst && self.cond == other.cond
    }
}

impl Eq for Transition {}

impl Hash for Transition {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.src.hash(state);
        self.dst.hash(state);
        self.cond.hash(state);
    }
}

impl Transition {
    /// Builds a transition, rejecting edges into `init` or out of `err`.
    pub fn new(src: Location, dst: Location, cond: Formula, provenance: Provenance) -> Result<Self, TsError> {
        if dst.is_init() {
            return Err(TsError::TargetsInit(src, dst));
        }
        if src.is_err() {
            return Err(TsError::LeavesErr(src, dst));
        }
        Ok(Transition {
            src,
            dst,
            cond,
            provenance,
        })
    }

    pub fn is_recursive(&self) -> bool {
        self.src == self.dst
    }

    pub fn is_initial(&self) -> bool {
        self.src.is_init()
    }

    pub fn is_safe(&self) -> bool {
        !self.dst.is_err()
    }

    pub fn is_conjunctive(&self) -> bool {
        self.cond.is_conjunctive()
    }

    /// `self|_cond`: same locations, new condition.
    pub fn restrict(&self, cond: Formula, provenance: Provenance) -> Transition {
        Transition {
            src: self.src.clone(),
            dst: self.dst.clone(),
            cond,
            provenance,
        }
    }

    pub fn display<'a>(&'a self, names: &'a [String]) -> impl fmt::Display + 'a {
        struct D<'a>(&'a Transition, &'a [String]);
        impl fmt::Display for D<'_> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{} -> {} :: {}", self.0.src, self.0.dst, self.0.cond.display(self.1))
            }
        }
        D(self, names)
    }
}

/// A finite set of transitions over `names.len()` program variables.
#[derive(Debug, Clone)]
pub struct TransitionSystem {
    names: Vec<String>,
    transitions: Vec<Arc<Transition>>,
}

impl TransitionSystem {
    /// Validates variable indices and that no transition is unsafe.
    pub fn new(names: Vec<String>, transitions: Vec<Transition>) -> Result<Self, TsError> {
        let d = names.len();
        for t in &transitions {
            if !t.is_safe() {
                return Err(TsError::Unsafe(t.src.clone(), t.dst.clone()));
            }
            for v in t.cond.vars() {
                match v {
                    VarId::Pre(i) | VarId::Post(i) if i >= d => return Err(TsError::BadIndex(i, d)),
                    _ => {}
                }
            }
        }
        Ok(TransitionSystem {
            names,
            transitions: transitions.into_iter().map(Arc::new).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn transitions(&self) -> &[Arc<Transition>] {
        &self.transitions
    }

    pub fn locations(&self) -> BTreeSet<Location> {
        self.transitions
            .iter()
            .flat_map(|t| [t.src.clone(), t.dst.clone()])
            .collect()
    }
}

/// `l(s)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    pub loc: Location,
    pub vals: Vec<BigInt>,
}

impl Configuration {
    pub fn new(loc: Location, vals: impl IntoIterator<Item = i64>) -> Self {
        Configuration {
            loc,
            vals: vals.into_iter().map(BigInt::from).collect(),
        }
    }
}

/// Conjunction of `first` and `second.cond` with the post-state of `first`
/// identified with the pre-state of `second` through fresh intermediates.
/// Parameters of `second` that clash with those of `first` are renamed.
///
/// Returns the combined formula, the intermediates, and the substitution
/// that was applied to `second.cond`.
pub fn link(first: &Formula, second: &Formula) -> (Formula, Vec<VarId>, Subst) {
    let first_params = first.params();
    let second_vars = second.vars();
    let mut indices = BTreeSet::new();
    for v in first.vars() {
        if let VarId::Post(i) = v {
            indices.insert(i);
        }
    }
    for v in &second_vars {
        if let VarId::Pre(i) = v {
            indices.insert(*i);
        }
    }
    let mut s1 = Subst::new();
    let mut s2 = Subst::new();
    let mut intermediates = Vec::new();
    for i in indices {
        let v = fresh::fresh_param("v");
        s1.insert(VarId::Post(i), Term::var(v.clone()));
        s2.insert(VarId::Pre(i), Term::var(v.clone()));
        intermediates.push(v);
    }
    for v in second_vars.iter().filter(|v| first_params.contains(v)) {
        if let VarId::Param(name) = v {
            let prefix = name.split('$').next().unwrap_or("p");
            s2.insert(v.clone(), Term::var(fresh::fresh_param(prefix)));
        }
    }
    let combined = Formula::and([first.substitute(&s1), second.substitute(&s2)]);
    (combined, intermediates, s2)
}

/// Sequential composition: `->chain(t, u) = ->t ; ->u`.
///
/// Intermediates that are fixed by an equality are eliminated again, so
/// chaining deterministic updates yields formulas over pre/post variables only.
pub fn chain(t: &Transition, u: &Transition) -> Transition {
    if t.dst != u.src {
        return Transition {
            src: t.src.clone(),
            dst: u.dst.clone(),
            cond: Formula::False,
            provenance: Provenance::Chained,
        };
    }
    let (combined, intermediates, _) = link(&t.cond, &u.cond);
    let cond = combined
        .eliminate_by_equalities(&|v| intermediates.contains(v))
        .simplify();
    Transition {
        src: t.src.clone(),
        dst: u.dst.clone(),
        cond,
        provenance: Provenance::Chained,
    }
}

/// Left fold of [`chain`]; `chain_seq([t]) = t`.
pub fn chain_seq(ts: &[Arc<Transition>]) -> Result<Transition, TsError> {
    let (first, rest) = ts.split_first().ok_or(TsError::EmptySequence)?;
    let mut acc = (**first).clone();
    for t in rest {
        acc = chain(&acc, t);
    }
    Ok(acc)
}

/// All successors of `c` under the given transitions whose values lie in
/// `[-bound, bound]^d`. Parameters are enumerated in the same box.
pub fn concrete_step(transitions: &[Arc<Transition>], c: &Configuration, bound: i64) -> BTreeSet<Configuration> {
    let d = c.vals.len();
    let mut out = BTreeSet::new();
    for t in transitions.iter().filter(|t| t.src == c.loc) {
        let mut fixed = Model::new();
        for (i, v) in c.vals.iter().enumerate() {
            fixed.insert(VarId::Pre(i), v.clone());
        }
        let mut free: Vec<VarId> = t.cond.params().into_iter().collect();
        free.extend((0..d).map(VarId::Post));
        for_each_model_in_box(&t.cond, &fixed, &free, -bound, bound, &mut |m| {
            let vals = (0..d).map(|i| m[&VarId::Post(i)].clone()).collect();
            out.insert(Configuration {
                loc: t.dst.clone(),
                vals,
            });
        });
    }
    out
}

/// Enumerate every extension of `fixed` that assigns each `free` variable a
/// value in `[lo, hi]` and satisfies `f`. Partial assignments are pruned as
/// soon as some part of the formula is decided.
pub fn for_each_model_in_box(
    f: &Formula,
    fixed: &Model,
    free: &[VarId],
    lo: i64,
    hi: i64,
    visit: &mut dyn FnMut(&Model),
) {
    let mut slots: Vec<VarId> = fixed.keys().cloned().collect();
    slots.extend(free.iter().cloned());
    let index: BTreeMap<VarId, usize> = slots.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();
    let mut values: Vec<i128> = Vec::with_capacity(slots.len());
    let Some(compiled) = CNode::compile(f, &index) else {
        // Unassigned variables or huge coefficients: fall back to exact
        // evaluation.
        slow_enumerate(f, fixed.clone(), free, lo, hi, visit);
        return;
    };
    for v in fixed.values() {
        match v.to_i128() {
            Some(k) => values.push(k),
            None => {
                slow_enumerate(f, fixed.clone(), free, lo, hi, visit);
                return;
            }
        }
    }
    let base = fixed.len();
    fn go(
        node: &CNode,
        values: &mut Vec<i128>,
        slots: &[VarId],
        lo: i64,
        hi: i64,
        visit: &mut dyn FnMut(&Model),
    ) {
        match node.eval(values) {
            Some(false) => return,
            Some(true) if values.len() == slots.len() => {
                let m: Model = slots
                    .iter()
                    .cloned()
                    .zip(values.iter().map(|k| BigInt::from(*k)))
                    .collect();
                visit(&m);
                return;
            }
            _ => {}
        }
        if values.len() == slots.len() {
            return;
        }
        for k in lo..=hi {
            values.push(k as i128);
            go(node, values, slots, lo, hi, visit);
            values.pop();
        }
    }
    debug_assert_eq!(values.len(), base);
    go(&compiled, &mut values, &slots, lo, hi, visit);
}

fn slow_enumerate(f: &Formula, mut m: Model, free: &[VarId], lo: i64, hi: i64, visit: &mut dyn FnMut(&Model)) {
    match f.partial_evaluate(&m) {
        Some(false) => return,
        Some(true) if free.is_empty() => {
            visit(&m);
            return;
        }
        _ => {}
    }
    let Some((v, rest)) = free.split_first() else { return };
    for k in lo..=hi {
        m.insert(v.clone(), BigInt::from(k));
        slow_enumerate(f, m.clone(), rest, lo, hi, visit);
    }
}

/// Formula compiled against variable slots for fast box enumeration.
enum CNode {
    Const(bool),
    Lit {
        monomials: Vec<(i128, Vec<usize>)>,
        rel: Rel,
        /// Number of assigned slots needed to decide the literal.
        needs: usize,
    },
    And(Vec<CNode>),
    Or(Vec<CNode>),
}

impl CNode {
    fn compile(f: &Formula, index: &BTreeMap<VarId, usize>) -> Option<CNode> {
        Some(match f {
            Formula::True => CNode::Const(true),
            Formula::False => CNode::Const(false),
            Formula::Lit(l) => CNode::compile_lit(l, index)?,
            Formula::And(xs) => CNode::And(xs.iter().map(|x| CNode::compile(x, index)).collect::<Option<_>>()?),
            Formula::Or(xs) => CNode::Or(xs.iter().map(|x| CNode::compile(x, index)).collect::<Option<_>>()?),
        })
    }

    fn compile_lit(l: &Literal, index: &BTreeMap<VarId, usize>) -> Option<CNode> {
        let mut monomials = Vec::new();
        let mut needs = 0;
        for (m, c) in l.term().monomials() {
            let c = c.to_i64()? as i128;
            let mut vs = Vec::new();
            for v in m.vars() {
                let i = *index.get(v)?;
                needs = needs.max(i + 1);
                vs.push(i);
            }
            monomials.push((c, vs));
        }
        Some(CNode::Lit {
            monomials,
            rel: l.rel(),
            needs,
        })
    }

    fn eval(&self, values: &[i128]) -> Option<bool> {
        match self {
            CNode::Const(b) => Some(*b),
            CNode::Lit { monomials, rel, needs } => {
                if *needs > values.len() {
                    return None;
                }
                let mut total: i128 = 0;
                for (c, vs) in monomials {
                    let mut p = *c;
                    for &i in vs {
                        p = p.checked_mul(values[i]).expect("box enumeration overflow");
                    }
                    total = total.checked_add(p).expect("box enumeration overflow");
                }
                Some(match rel {
                    Rel::Eq => total == 0,
                    Rel::Ne => total != 0,
                    Rel::Le => total <= 0,
                })
            }
            CNode::And(xs) => {
                let mut unknown = false;
                for x in xs {
                    match x.eval(values) {
                        Some(false) => return Some(false),
                        None => unknown = true,
                        _ => {}
                    }
                }
                (!unknown).then_some(true)
            }
            CNode::Or(xs) => {
                let mut unknown = false;
                for x in xs {
                    match x.eval(values) {
                        Some(true) => return Some(true),
                        None => unknown = true,
                        _ => {}
                    }
                }
                (!unknown).then_some(false)
            }
        }
    }
}
